//! Straight-line flow across edge identifications.
//!
//! The flow moves at unit speed in a fixed direction. Inside a polygon it is
//! a straight segment; on reaching an edge the point re-enters through the
//! glued edge. Trajectories passing within `1e-12 * scale` of a cone point or
//! marked point stop with [`FlowError::SingularityHit`].

use alloc::vec::Vec;
use core::ops::ControlFlow;

use crate::develop::{develop, start_sheets};
use crate::geom::{point_segment_distance, Direction, Vec2};
use crate::surface::{Corner, EdgeRef, SurfacePoint, TranslationSurface};

/// Relative distance (times the surface scale) below which a trajectory is
/// considered to hit a singularity.
pub const SINGULAR_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, thiserror::Error)]
pub enum FlowError {
    #[error("trajectory hits a singularity at time {time}")]
    SingularityHit { time: f64, class: usize, corner: Corner },
    #[error("more than {steps} edge crossings")]
    StepLimitExceeded { steps: usize },
    #[error("point is not on polygon {polygon}")]
    InvalidPoint { polygon: usize },
    #[error("lost track of the trajectory in polygon {polygon} (numerical failure)")]
    Lost { polygon: usize },
    #[error("flow time must be finite")]
    NonFiniteTime,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EventKind {
    EdgeCrossing { edge: EdgeRef },
    SingularityHit { class: usize, corner: Corner },
    TimeReached,
}

/// One entry of a trajectory log. For edge crossings `point` is the
/// position just after re-entering through the glued edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryEvent {
    pub kind: EventKind,
    pub time: f64,
    pub point: SurfacePoint,
}

/// A maximal straight piece of a trajectory inside one polygon.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Piece {
    pub polygon: usize,
    pub start: Vec2,
    pub end: Vec2,
    /// Flow time at `start`.
    pub t0: f64,
    /// Edge through which the piece leaves, if it ends on an edge.
    pub exit: Option<EdgeRef>,
}

impl Piece {
    pub fn len(&self) -> f64 {
        (self.end - self.start).norm()
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// Result of running the flow to completion or until a visitor stops it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Outcome {
    pub end: SurfacePoint,
    pub time: f64,
    pub crossings: usize,
    pub stopped: bool,
}

#[derive(Clone, Copy, Debug)]
struct Exit {
    t: f64,
    edge: usize,
    s: f64,
}

fn find_exit(surface: &TranslationSurface, polygon: usize, pos: Vec2, u: Vec2, slack: f64) -> Option<Exit> {
    let tol_t = slack * surface.scale();
    let mut best: Option<Exit> = None;
    for (i, ed) in surface.edge_data(polygon).iter().enumerate() {
        let dn = u.dot(ed.normal);
        if dn <= 0.0 {
            continue;
        }
        let t = (ed.a - pos).dot(ed.normal) / dn;
        if t < -tol_t || best.is_some_and(|b| t >= b.t) {
            continue;
        }
        let q = pos + u * t;
        let s = (q - ed.a).dot(ed.e) * ed.inv_norm2;
        if s < -slack || s > 1.0 + slack {
            continue;
        }
        best = Some(Exit { t: t.max(0.0), edge: i, s });
    }
    best
}

/// Which vertices end a trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopAt {
    /// Cone points and marked points.
    Singular,
    /// Only genuine cone points (angle above `2*pi`); used for metric
    /// questions, where a marked point is an ordinary point.
    ConePoints,
}

impl StopAt {
    #[inline]
    fn mask(self) -> u8 {
        match self {
            StopAt::Singular => 1,
            StopAt::ConePoints => 2,
        }
    }
}

/// First stopping vertex of `polygon` met by the segment `pos + [0, len] u`.
/// `exit_edge` names the edge the segment runs towards; in a convex
/// polygon only its two endpoints need checking.
#[allow(clippy::too_many_arguments)]
fn singular_on_segment(
    surface: &TranslationSurface,
    polygon: usize,
    pos: Vec2,
    u: Vec2,
    len: f64,
    eps: f64,
    stop: StopAt,
    exit_edge: usize,
) -> Option<(f64, Corner)> {
    let poly = surface.polygon(polygon);
    let mask = stop.mask();
    let flags = surface.corner_flags(polygon);
    let check = |k: usize, best: &mut Option<(f64, Corner)>| {
        if flags[k] & mask == 0 {
            return;
        }
        let w = poly.vertices[k] - pos;
        let along = w.dot(u);
        if along <= eps || along > len + eps {
            return;
        }
        if w.cross(u).abs() < eps && best.is_none_or(|(t, _)| along < t) {
            *best = Some((along, Corner { poly: polygon, vertex: k }));
        }
    };
    let mut best = None;
    if surface.is_convex(polygon) {
        check(exit_edge, &mut best);
        check((exit_edge + 1) % flags.len(), &mut best);
    } else {
        for k in 0..flags.len() {
            check(k, &mut best);
        }
    }
    best
}

/// Where a trajectory leaving `pt` in direction `u` actually starts: a
/// vertex is replaced by the corner whose sector contains `u`, and a point
/// on an edge moves to the glued polygon when `u` points outward.
pub(crate) fn resolve_start(
    surface: &TranslationSurface,
    pt: SurfacePoint,
    u: Vec2,
    hint: Option<Corner>,
) -> Result<(usize, Vec2), FlowError> {
    let tol = SINGULAR_EPS * surface.scale();
    if let Some(c) = hint {
        if surface.corner_contains(c, u) {
            return Ok((c.poly, surface.corner_point(c)));
        }
    }
    if pt.polygon >= surface.polygons().len() || !pt.pos.is_finite() {
        return Err(FlowError::InvalidPoint { polygon: pt.polygon });
    }
    if let Some(c) = surface.corner_at(pt, tol) {
        if surface.corner_contains(c, u) {
            return Ok((c.poly, surface.corner_point(c)));
        }
        let corners = &surface.classes()[surface.class_of(c)].corners;
        let at = corners.iter().position(|&x| x == c).unwrap_or(0);
        for i in 0..corners.len() {
            let cand = corners[(at + i) % corners.len()];
            if surface.corner_contains(cand, u) {
                return Ok((cand.poly, surface.corner_point(cand)));
            }
        }
        return Err(FlowError::Lost { polygon: pt.polygon });
    }
    let poly = surface.polygon(pt.polygon);
    for e in 0..poly.len() {
        let (a, b) = poly.edge(e);
        if point_segment_distance(pt.pos, a, b) <= tol {
            let edge = b - a;
            if u.dot(Vec2::new(edge.y, -edge.x)) > 0.0 {
                let r = EdgeRef { poly: pt.polygon, edge: e };
                let there = surface.partner(r);
                return Ok((there.poly, pt.pos + surface.edge_shift(r)));
            }
        }
    }
    Ok((pt.polygon, pt.pos))
}

/// Default cap on edge crossings for a flow of length `t`.
pub fn default_step_cap(surface: &TranslationSurface, t: f64) -> usize {
    let per = 10.0 * t.abs() / surface.shortest_edge();
    (per.min(1e12) as usize).saturating_add(1000)
}

/// Runs the flow from `pt` in unit direction `u` for time `t >= 0`, handing
/// every piece to `visit`. Breaking from `visit` stops the run after that
/// piece. On a singularity hit the piece up to the hit is visited first.
#[allow(clippy::too_many_arguments)]
pub fn run_pieces<F>(
    surface: &TranslationSurface,
    pt: SurfacePoint,
    hint: Option<Corner>,
    u: Vec2,
    t: f64,
    max_steps: usize,
    stop: StopAt,
    mut visit: F,
) -> Result<Outcome, FlowError>
where
    F: FnMut(&Piece) -> ControlFlow<()>,
{
    if !t.is_finite() {
        return Err(FlowError::NonFiniteTime);
    }
    let (mut polygon, mut pos) = resolve_start(surface, pt, u, hint)?;
    let eps = SINGULAR_EPS * surface.scale();
    let mut done = 0.0;
    let mut crossings = 0usize;
    loop {
        let remaining = t - done;
        let exit = find_exit(surface, polygon, pos, u, 1e-12)
            .or_else(|| find_exit(surface, polygon, pos, u, 1e-9))
            .ok_or(FlowError::Lost { polygon })?;
        let reach = exit.t.min(remaining);
        if let Some((along, corner)) = singular_on_segment(surface, polygon, pos, u, reach, eps, stop, exit.edge) {
            let piece = Piece {
                polygon,
                start: pos,
                end: surface.corner_point(corner),
                t0: done,
                exit: None,
            };
            let _ = visit(&piece);
            return Err(FlowError::SingularityHit {
                time: done + along,
                class: surface.class_of(corner),
                corner,
            });
        }
        if exit.t >= remaining {
            let end = pos + u * remaining;
            let piece = Piece {
                polygon,
                start: pos,
                end,
                t0: done,
                exit: None,
            };
            let stopped = visit(&piece).is_break();
            return Ok(Outcome {
                end: SurfacePoint::new(polygon, end),
                time: t,
                crossings,
                stopped,
            });
        }
        let ed = surface.edge_data(polygon)[exit.edge];
        let s = exit.s.clamp(0.0, 1.0);
        let here = EdgeRef { poly: polygon, edge: exit.edge };
        let exit_point = ed.a + ed.e * s;
        let piece = Piece {
            polygon,
            start: pos,
            end: exit_point,
            t0: done,
            exit: Some(here),
        };
        if visit(&piece).is_break() {
            return Ok(Outcome {
                end: SurfacePoint::new(polygon, exit_point),
                time: done + exit.t,
                crossings,
                stopped: true,
            });
        }
        let there = surface.partner(here);
        let pb = surface.edge_data(there.poly)[there.edge].b;
        // a + s(b - a) is glued to the point at parameter 1 - s on the partner edge
        pos = pb + ed.e * s;
        polygon = there.poly;
        done += exit.t;
        crossings += 1;
        if crossings > max_steps {
            return Err(FlowError::StepLimitExceeded { steps: max_steps });
        }
    }
}

/// `F_dir^t(x)`; negative `t` flows backwards.
pub fn flow_point(
    surface: &TranslationSurface,
    x: SurfacePoint,
    dir: Direction,
    t: f64,
) -> Result<SurfacePoint, FlowError> {
    flow_vec(surface, x, dir.unit(), t)
}

/// Flow in the direction of a unit vector.
pub fn flow_vec(surface: &TranslationSurface, x: SurfacePoint, u: Vec2, t: f64) -> Result<SurfacePoint, FlowError> {
    flow_vec_until(surface, x, u, t, StopAt::Singular)
}

pub fn flow_vec_until(
    surface: &TranslationSurface,
    x: SurfacePoint,
    u: Vec2,
    t: f64,
    stop: StopAt,
) -> Result<SurfacePoint, FlowError> {
    let (u, t) = if t < 0.0 { (-u, -t) } else { (u, t) };
    let cap = default_step_cap(surface, t);
    run_pieces(surface, x, None, u, t, cap, stop, |_| ControlFlow::Continue(())).map(|o| o.end)
}

/// Full event log of the flow for time `t_max`, ending with a
/// `TimeReached` or `SingularityHit` event.
pub fn trace(
    surface: &TranslationSurface,
    x: SurfacePoint,
    dir: Direction,
    t_max: f64,
) -> Result<Vec<TrajectoryEvent>, FlowError> {
    trace_with_cap(surface, x, dir, t_max, default_step_cap(surface, t_max))
}

pub fn trace_with_cap(
    surface: &TranslationSurface,
    x: SurfacePoint,
    dir: Direction,
    t_max: f64,
    max_steps: usize,
) -> Result<Vec<TrajectoryEvent>, FlowError> {
    if !(t_max > 0.0) {
        return Err(FlowError::NonFiniteTime);
    }
    let mut events = Vec::new();
    let result = run_pieces(surface, x, None, dir.unit(), t_max, max_steps, StopAt::Singular, |piece| {
        if let Some(edge) = piece.exit {
            let there = surface.partner(edge);
            events.push(TrajectoryEvent {
                kind: EventKind::EdgeCrossing { edge },
                time: piece.t0 + piece.len(),
                point: SurfacePoint::new(there.poly, piece.end + surface.edge_shift(edge)),
            });
        }
        ControlFlow::Continue(())
    });
    match result {
        Ok(out) => {
            events.push(TrajectoryEvent {
                kind: EventKind::TimeReached,
                time: out.time,
                point: out.end,
            });
            Ok(events)
        }
        Err(FlowError::SingularityHit { time, class, corner }) => {
            events.push(TrajectoryEvent {
                kind: EventKind::SingularityHit { class, corner },
                time,
                point: SurfacePoint::new(corner.poly, surface.corner_point(corner)),
            });
            Ok(events)
        }
        Err(e) => Err(e),
    }
}

/// Bounds for the development search used by [`distance`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistanceOptions {
    /// Maximum number of developed polygon copies.
    pub max_polygons: usize,
}

impl Default for DistanceOptions {
    fn default() -> Self {
        DistanceOptions { max_polygons: 50_000 }
    }
}

/// Flat distance from `x` to `y` if it is at most `r_max`, else `None`.
///
/// The surface is developed along straight rays from `x`; every developed
/// copy of `y` within `r_max` is a candidate, and the shortest candidate whose
/// straight segment is realized by the flow (no cone point in the way) is
/// returned. Marked points do not block paths.
pub fn distance(surface: &TranslationSurface, x: SurfacePoint, y: SurfacePoint, r_max: f64) -> Option<f64> {
    distance_with(surface, x, y, r_max, DistanceOptions::default())
}

pub fn distance_with(
    surface: &TranslationSurface,
    x: SurfacePoint,
    y: SurfacePoint,
    r_max: f64,
    opts: DistanceOptions,
) -> Option<f64> {
    let tol = 1e-9 * surface.scale().max(1.0);
    if surface.same_point(x, y, SINGULAR_EPS * surface.scale()) {
        return Some(0.0);
    }
    if !(r_max > 0.0) {
        return None;
    }
    let mut candidates: Vec<f64> = Vec::new();
    let mut targets: Vec<Vec2> = Vec::new();
    // a budget overflow only loses far candidates; the near ones are kept
    let _ = develop(surface, start_sheets(surface, x), r_max, opts.max_polygons, |sheet| {
        if sheet.poly == y.polygon {
            let image = y.pos + sheet.offset;
            let d = image.norm();
            if d <= r_max && sheet.sees(image) {
                candidates.push(d);
                targets.push(x.pos + image);
            }
        }
        ControlFlow::Continue(())
    });

    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&i, &j| candidates[i].total_cmp(&candidates[j]));
    for i in order {
        let len = candidates[i];
        let u = (targets[i] - x.pos) * (1.0 / len);
        let reached = match flow_vec_until(surface, x, u, len, StopAt::ConePoints) {
            Ok(z) => surface.same_point(z, y, tol),
            Err(FlowError::SingularityHit { time, corner, .. }) => {
                (time - len).abs() <= tol
                    && surface.same_point(SurfacePoint::new(corner.poly, surface.corner_point(corner)), y, tol)
            }
            Err(_) => false,
        };
        if reached {
            return Some(len);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::{l_shape, square_torus};

    fn pt(x: f64, y: f64) -> SurfacePoint {
        SurfacePoint::new(0, Vec2::new(x, y))
    }

    #[test]
    fn horizontal_flow_on_the_torus() {
        let s = square_torus().unwrap();
        let p = flow_point(&s, pt(0.25, 0.5), Direction::new(0.0), 0.5).unwrap();
        assert!(s.same_point(p, pt(0.75, 0.5), 1e-12));
        let p = flow_point(&s, pt(0.25, 0.5), Direction::new(0.0), 1.0).unwrap();
        assert!(s.same_point(p, pt(0.25, 0.5), 1e-12));
        let p = flow_point(&s, pt(0.25, 0.5), Direction::new(0.0), -0.5).unwrap();
        assert!(s.same_point(p, pt(0.75, 0.5), 1e-12));
    }

    #[test]
    fn diagonal_from_marked_corner_hits_it_again() {
        let s = square_torus().unwrap();
        let events = trace(&s, pt(0.0, 0.0), Direction::new(0.125), 5.0).unwrap();
        let last = events.last().unwrap();
        assert!(matches!(last.kind, EventKind::SingularityHit { .. }));
        assert!((last.time - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(events.len(), 1);
    }

    #[test]
    fn trace_counts_crossings() {
        let s = square_torus().unwrap();
        let events = trace(&s, pt(0.5, 0.5), Direction::new(0.0), 2.5).unwrap();
        let crossings = events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::EdgeCrossing { .. }))
            .count();
        assert_eq!(crossings, 2);
        let last = events.last().unwrap();
        assert_eq!(last.kind, EventKind::TimeReached);
        assert!(s.same_point(last.point, pt(0.0, 0.5), 1e-12));
        assert!(s.same_point(last.point, pt(1.0, 0.5), 1e-12));
    }

    #[test]
    fn step_limit() {
        let s = square_torus().unwrap();
        let err = trace_with_cap(&s, pt(0.5, 0.5), Direction::new(0.0), 100.0, 10).unwrap_err();
        assert_eq!(err, FlowError::StepLimitExceeded { steps: 10 });
    }

    #[test]
    fn l_shape_bottom_row_horizontal_crossings() {
        // bottom row is a horizontal cylinder of core length 2 made of the
        // unit square and the right arm: two crossings per period
        let s = l_shape(2.0, 2.0).unwrap();
        let events = trace(&s, pt(0.5, 0.5), Direction::new(0.0), 2.0).unwrap();
        let crossings = events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::EdgeCrossing { .. }))
            .count();
        assert_eq!(crossings, 2);
        assert!(s.same_point(events.last().unwrap().point, pt(0.5, 0.5), 1e-12));
        // top arm is a cylinder of length 1 with one crossing per period
        let top = SurfacePoint::new(2, Vec2::new(0.5, 1.5));
        let events = trace(&s, top, Direction::new(0.0), 1.0).unwrap();
        assert_eq!(events.len(), 2);
        assert!(s.same_point(events.last().unwrap().point, top, 1e-12));
    }

    #[test]
    fn torus_distances() {
        let s = square_torus().unwrap();
        let d = distance(&s, pt(0.1, 0.5), pt(0.9, 0.5), 0.7).unwrap();
        assert!((d - 0.2).abs() < 1e-12);
        assert_eq!(distance(&s, pt(0.3, 0.3), pt(0.3, 0.3), 0.1), Some(0.0));
        let d = distance(&s, pt(0.1, 0.1), pt(0.9, 0.9), 0.7).unwrap();
        // brute force over the nine lattice translates
        let mut best = f64::INFINITY;
        for i in -1..=1 {
            for j in -1..=1 {
                let v = Vec2::new(0.9 + f64::from(i) - 0.1, 0.9 + f64::from(j) - 0.1);
                best = best.min(v.norm());
            }
        }
        assert!((d - best).abs() < 1e-12);
        assert!((d - 0.08f64.sqrt()).abs() < 1e-12);
        assert_eq!(distance(&s, pt(0.1, 0.5), pt(0.6, 0.5), 0.2), None);
    }

    #[test]
    fn marked_point_does_not_block_distance() {
        // the shortest segment runs straight through the marked corner
        let s = square_torus().unwrap();
        let d = distance(&s, pt(0.2, 0.2), pt(0.8, 0.8), 0.6).unwrap();
        assert!((d - 0.32f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn cone_point_blocks_straight_segments() {
        // In L(2,2) the points (0.9, 0.9) and (1.1, 1.1)-equivalent sit on
        // opposite sides of the cone point at (1, 1); the diagonal through
        // the vertex is not a flat segment of the surface.
        let s = l_shape(2.0, 2.0).unwrap();
        let a = SurfacePoint::new(0, Vec2::new(0.9, 0.9));
        let b = SurfacePoint::new(1, Vec2::new(1.1, 0.9));
        let d = distance(&s, a, b, 0.5).unwrap();
        assert!((d - 0.2).abs() < 1e-12);
        let err = flow_vec(&s, a, Vec2::new(1.0, 1.0).normalized(), 0.2).unwrap_err();
        assert!(matches!(err, FlowError::SingularityHit { .. }));
    }
}
