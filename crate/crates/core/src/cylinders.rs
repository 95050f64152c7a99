//! Saddle connections and maximal periodic cylinders.
//!
//! Saddle connections are found by developing polygons in a disk around each
//! singularity and confirming every candidate holonomy with the flow.
//! Cylinders are seeded just beside each saddle connection: if the orbit of
//! the seed closes up, the cylinder is widened transversally until the
//! swept core touches a singularity on either side.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::ControlFlow;

use crate::flow::{default_step_cap, flow_vec, run_pieces, FlowError, Piece, StopAt, SINGULAR_EPS};
use crate::develop::{corner_sheets, develop};
use crate::geom::{circle_distance, point_segment_distance, Direction, Vec2};
use crate::surface::{Corner, SurfacePoint, TranslationSurface, VorobetsConstant};

/// Default cap on developed polygons in saddle connection searches.
pub const DEFAULT_MAX_DEVELOPED: usize = 20_000_000;

#[derive(Clone, Copy, Debug, PartialEq, thiserror::Error)]
pub enum CylinderError {
    #[error("surface has no cone points or marked points")]
    NoSingularities,
    #[error("development exceeded {developed} polygons")]
    ExplosionGuard { developed: usize },
    #[error("bad parameter: {0}")]
    BadParameter(&'static str),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

/// A straight segment between singularities with none in its interior.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SaddleConnection {
    pub holonomy: Vec2,
    pub start_singularity: usize,
    pub end_singularity: usize,
    pub start_point: SurfacePoint,
    /// Corner of the start singularity the segment leaves through.
    pub start_corner: Corner,
    /// Angular position of the outgoing ray inside the start cone point.
    pub start_angle: f64,
}

impl SaddleConnection {
    pub fn length(&self) -> f64 {
        self.holonomy.norm()
    }

    pub fn direction(&self) -> Direction {
        Direction::from_vector(self.holonomy)
    }
}

fn quantize(v: f64, q: f64) -> i64 {
    libm::round(v / q) as i64
}

/// All saddle connections of length at most `max_len`, sorted by length and
/// then direction. Both orientations of each connection are listed.
pub fn enumerate_saddle_connections(
    surface: &TranslationSurface,
    max_len: f64,
) -> Result<Vec<SaddleConnection>, CylinderError> {
    enumerate_saddle_connections_with(surface, max_len, DEFAULT_MAX_DEVELOPED)
}

pub fn enumerate_saddle_connections_with(
    surface: &TranslationSurface,
    max_len: f64,
    max_developed: usize,
) -> Result<Vec<SaddleConnection>, CylinderError> {
    if !(max_len > 0.0) || !max_len.is_finite() {
        return Err(CylinderError::BadParameter("length bound must be positive and finite"));
    }
    let singular: Vec<usize> = surface.singular_classes().collect();
    if singular.is_empty() {
        return Err(CylinderError::NoSingularities);
    }
    let q = 1e-9 * surface.scale();
    let mut out = Vec::new();
    let mut developed = 0usize;
    for &class in &singular {
        let first = surface.classes()[class].corners[0];
        let mut candidates: BTreeMap<(i64, i64), Vec2> = BTreeMap::new();
        let budget = max_developed.saturating_sub(developed);
        let r = develop(surface, corner_sheets(surface, first), max_len, budget, |sheet| {
            developed += 1;
            let poly = surface.polygon(sheet.poly);
            for k in 0..poly.len() {
                if !surface.is_singular_corner(Corner { poly: sheet.poly, vertex: k }) {
                    continue;
                }
                let w = poly.vertex(k) + sheet.offset;
                let n = w.norm();
                if n > q && n <= max_len * (1.0 + 1e-12) && sheet.sees(w) {
                    candidates.entry((quantize(w.x, q), quantize(w.y, q))).or_insert(w);
                }
            }
            ControlFlow::Continue(())
        });
        if r.is_err() {
            return Err(CylinderError::ExplosionGuard { developed: max_developed });
        }
        let mut rays = BTreeSet::new();
        for h in candidates.into_values() {
            let len = h.norm();
            let u = h * (1.0 / len);
            for (corner, angle) in surface.corners_containing(class, u) {
                if let Some(sc) = confirm(surface, class, corner, angle, h)? {
                    if rays.insert(quantize(angle, 1e-10)) {
                        out.push(sc);
                    }
                }
            }
        }
    }
    sort_connections(&mut out);
    Ok(out)
}

fn sort_connections(list: &mut [SaddleConnection]) {
    list.sort_by(|a, b| {
        a.length()
            .total_cmp(&b.length())
            .then(a.direction().tau().total_cmp(&b.direction().tau()))
            .then(a.start_singularity.cmp(&b.start_singularity))
            .then(a.start_angle.total_cmp(&b.start_angle))
    });
}

/// Flows from `corner` along `h`; a saddle connection iff the first
/// singularity met is at the far end.
fn confirm(
    surface: &TranslationSurface,
    class: usize,
    corner: Corner,
    angle: f64,
    h: Vec2,
) -> Result<Option<SaddleConnection>, CylinderError> {
    let len = h.norm();
    let u = h * (1.0 / len);
    let tol = 1e-9 * len.max(1.0);
    let start = SurfacePoint::new(corner.poly, surface.corner_point(corner));
    let cap = default_step_cap(surface, len);
    match run_pieces(surface, start, Some(corner), u, len + 2.0 * tol, cap, StopAt::Singular, |_| {
        ControlFlow::Continue(())
    }) {
        Err(FlowError::SingularityHit { time, class: end, .. }) if (time - len).abs() <= tol => {
            Ok(Some(SaddleConnection {
                holonomy: h,
                start_singularity: class,
                end_singularity: end,
                start_point: start,
                start_corner: corner,
                start_angle: angle,
            }))
        }
        Err(FlowError::SingularityHit { .. }) | Ok(_) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Length of the shortest saddle connection, found by doubling the search
/// radius from the shortest polygon edge.
pub fn shortest_saddle(surface: &TranslationSurface) -> Result<f64, CylinderError> {
    let mut len = surface.shortest_edge();
    for _ in 0..64 {
        let list = enumerate_saddle_connections(surface, len)?;
        if let Some(first) = list.first() {
            return Ok(first.length());
        }
        len *= 2.0;
    }
    Err(CylinderError::BadParameter("no saddle connection found"))
}

/// `2^(2^(4m)) sqrt(s)` with `s` computed by enumeration.
pub fn vorobets_constant(surface: &TranslationSurface) -> Result<VorobetsConstant, CylinderError> {
    let s = shortest_saddle(surface)?;
    VorobetsConstant::new(surface.multiplicity_sum(), s)
        .map_err(|_| CylinderError::BadParameter("multiplicity sum too large"))
}

/// One straight piece of a cylinder's core curve, from an entry edge to an
/// exit edge of `polygon`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorePiece {
    pub polygon: usize,
    pub entry: Vec2,
    pub exit: Vec2,
    pub entry_edge: usize,
    pub exit_edge: usize,
}

impl CorePiece {
    /// Slopes `ds/dw` of the entry and exit edges in the frame (u, n).
    fn edge_slopes(&self, surface: &TranslationSurface, u: Vec2) -> (f64, f64) {
        let n = u.perp();
        let poly = surface.polygon(self.polygon);
        let ei = poly.edge_vector(self.entry_edge);
        let eo = poly.edge_vector(self.exit_edge);
        (ei.dot(u) / ei.dot(n), eo.dot(u) / eo.dot(n))
    }
}

/// A maximal periodic cylinder.
#[derive(Clone, Debug, PartialEq)]
pub struct Cylinder {
    /// Direction of the core curves, in `[0, 1/2)`.
    pub direction: Direction,
    /// Circumference `T` of the core closed geodesic.
    pub core_length: f64,
    /// Transversal width `h`; the area is `T * h`.
    pub height: f64,
    /// `T * h / total_area`.
    pub area_fraction: f64,
    /// A point on the middle core curve.
    pub witness: SurfacePoint,
    core_dir: Vec2,
    core: Vec<CorePiece>,
}

impl Cylinder {
    /// Unit vector along which `core_pieces` are traversed.
    pub fn core_direction(&self) -> Vec2 {
        self.core_dir
    }

    pub fn core_pieces(&self) -> &[CorePiece] {
        &self.core
    }

    /// Both flow directions on `[0, 1)` in which the cylinder is periodic.
    pub fn full_circle_directions(&self) -> [f64; 2] {
        let t = self.direction.tau();
        [t, t + 0.5]
    }

    /// Whether `pt` lies in the open cylinder, up to `tol`.
    pub fn contains(&self, surface: &TranslationSurface, pt: SurfacePoint, tol: f64) -> bool {
        let canon = surface.canonicalize(pt, SINGULAR_EPS * surface.scale());
        [pt, canon].iter().any(|q| self.contains_in_polygon(surface, *q, tol))
    }

    fn contains_in_polygon(&self, surface: &TranslationSurface, q: SurfacePoint, tol: f64) -> bool {
        let u = self.core_dir;
        let n = u.perp();
        let half = 0.5 * self.height;
        self.core.iter().filter(|p| p.polygon == q.polygon).any(|piece| {
            let (k_in, k_out) = piece.edge_slopes(surface, u);
            let d = q.pos - piece.entry;
            let w = d.dot(n);
            let s = d.dot(u);
            let len = (piece.exit - piece.entry).norm();
            w.abs() < half + tol && s >= w * k_in - tol && s <= len + w * k_out + tol
        })
    }

    /// The point reached from the witness by moving `s` along the core and
    /// `w` across it (`|w| < height / 2`).
    pub fn point_at(&self, surface: &TranslationSurface, s: f64, w: f64) -> Result<SurfacePoint, FlowError> {
        let along = flow_vec(surface, self.witness, self.core_dir, s)?;
        flow_vec(surface, along, self.core_dir.perp(), w)
    }

    /// Whether some core piece of `other` passes through the interior of
    /// `self`.
    pub fn core_meets(&self, surface: &TranslationSurface, other: &Cylinder) -> bool {
        let u = self.core_dir;
        let n = u.perp();
        let half = 0.5 * self.height;
        let margin = 1e-12 * surface.scale();
        for mine in &self.core {
            let (k_in, k_out) = mine.edge_slopes(surface, u);
            let len = (mine.exit - mine.entry).norm();
            for theirs in other.core.iter().filter(|p| p.polygon == mine.polygon) {
                // clip theirs against the open trapezoid of mine
                let a = theirs.entry - mine.entry;
                let d = theirs.exit - theirs.entry;
                let (mut lo, mut hi) = (0.0f64, 1.0f64);
                // each constraint: c0 + c1 * tau > margin
                let constraints = [
                    (half - a.dot(n), -d.dot(n)),
                    (half + a.dot(n), d.dot(n)),
                    (a.dot(u) - k_in * a.dot(n), d.dot(u) - k_in * d.dot(n)),
                    (len + k_out * a.dot(n) - a.dot(u), k_out * d.dot(n) - d.dot(u)),
                ];
                let mut empty = false;
                for (c0, c1) in constraints {
                    let c0 = c0 - margin;
                    if c1.abs() < 1e-300 {
                        if c0 <= 0.0 {
                            empty = true;
                            break;
                        }
                    } else if c1 > 0.0 {
                        lo = lo.max(-c0 / c1);
                    } else {
                        hi = hi.min(-c0 / c1);
                    }
                }
                if !empty && hi - lo > 1e-12 {
                    return true;
                }
            }
        }
        false
    }
}

struct ClosedOrbit {
    length: f64,
    pieces: Vec<Piece>,
}

/// First return of the orbit of `p` (an interior point) to itself before
/// `t_max`, with the pieces traversed.
fn closed_orbit(
    surface: &TranslationSurface,
    p: SurfacePoint,
    u: Vec2,
    t_max: f64,
) -> Result<Option<ClosedOrbit>, FlowError> {
    let tol = 1e-9 * surface.scale();
    let mut pieces = Vec::new();
    let mut found = None;
    let cap = default_step_cap(surface, t_max);
    let result = run_pieces(surface, p, None, u, t_max, cap, StopAt::Singular, |piece| {
        if piece.polygon == p.polygon {
            let w = p.pos - piece.start;
            let along = w.dot(u);
            if along > tol && along <= piece.len() + tol && w.cross(u).abs() < tol {
                found = Some(piece.t0 + along);
                pieces.push(Piece {
                    end: p.pos,
                    exit: None,
                    ..*piece
                });
                return ControlFlow::Break(());
            }
        }
        pieces.push(*piece);
        ControlFlow::Continue(())
    });
    match result {
        Ok(_) => Ok(found.map(|length| ClosedOrbit { length, pieces })),
        Err(FlowError::SingularityHit { .. }) | Err(FlowError::StepLimitExceeded { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Merges the first and last pieces (both split at the start point) and
/// attaches entry edges.
fn core_pieces(surface: &TranslationSurface, orbit: &ClosedOrbit) -> Option<Vec<CorePiece>> {
    let pieces = &orbit.pieces;
    if pieces.len() < 2 {
        return None;
    }
    let last = pieces[pieces.len() - 1];
    let mut out = Vec::with_capacity(pieces.len() - 1);
    for i in 0..pieces.len() - 1 {
        let piece = pieces[i];
        let prev = if i == 0 { pieces[pieces.len() - 2] } else { pieces[i - 1] };
        let entry_edge = surface.partner(prev.exit?).edge;
        let entry = if i == 0 { last.start } else { piece.start };
        out.push(CorePiece {
            polygon: piece.polygon,
            entry,
            exit: piece.end,
            entry_edge,
            exit_edge: piece.exit?.edge,
        });
    }
    Some(out)
}

/// Offsets (along `u.perp()`) at which the swept core first touches a
/// polygon vertex above and below.
fn contacts(surface: &TranslationSurface, core: &[CorePiece], u: Vec2) -> ((f64, Corner), (f64, Corner)) {
    let n = u.perp();
    let tol_w = 1e-12 * surface.scale();
    let mut top = (f64::INFINITY, Corner { poly: 0, vertex: 0 });
    let mut bottom = (f64::NEG_INFINITY, Corner { poly: 0, vertex: 0 });
    for piece in core {
        let poly = surface.polygon(piece.polygon);
        let (k_in, k_out) = piece.edge_slopes(surface, u);
        let len = (piece.exit - piece.entry).norm();
        let tol_s = 1e-9 * len.max(surface.scale());
        for k in 0..poly.len() {
            let d = poly.vertex(k) - piece.entry;
            let w = d.dot(n);
            let s = d.dot(u);
            if w.abs() <= tol_w {
                continue;
            }
            if s < w * k_in - tol_s || s > len + w * k_out + tol_s {
                continue;
            }
            let c = Corner { poly: piece.polygon, vertex: k };
            if w > 0.0 && w < top.0 {
                top = (w, c);
            } else if w < 0.0 && w > bottom.0 {
                bottom = (w, c);
            }
        }
    }
    (top, bottom)
}

/// Distance from the core curve to the nearest singular vertex inside the
/// polygons it crosses.
fn singular_clearance(surface: &TranslationSurface, core: &[CorePiece]) -> f64 {
    let mut best = f64::INFINITY;
    for piece in core {
        let poly = surface.polygon(piece.polygon);
        for k in 0..poly.len() {
            if surface.is_singular_corner(Corner { poly: piece.polygon, vertex: k }) {
                best = best.min(point_segment_distance(poly.vertex(k), piece.entry, piece.exit));
            }
        }
    }
    best
}

/// Builds the maximal cylinder through the closed orbit of `seed`, if the
/// orbit closes before `t_max`.
fn cylinder_from_seed(
    surface: &TranslationSurface,
    seed: SurfacePoint,
    u: Vec2,
    t_max: f64,
) -> Result<Option<Cylinder>, FlowError> {
    let n = u.perp();
    let Some(orbit) = closed_orbit(surface, seed, u, t_max)? else {
        return Ok(None);
    };
    let period = orbit.length;
    let same_period = |o: &ClosedOrbit| (o.length - period).abs() <= 1e-9 * period.max(1.0);

    // Sweep up and down; contacts at regular vertices are stepped over.
    let step = 1e-9 * surface.scale();
    let mut reach = [0.0f64; 2];
    for (side, sign) in [(0usize, 1.0f64), (1, -1.0)] {
        let mut base = seed;
        let mut core = match core_pieces(surface, &orbit) {
            Some(c) => c,
            None => return Ok(None),
        };
        let mut travelled = 0.0;
        let mut rounds = 0;
        loop {
            let (top, bottom) = contacts(surface, &core, u);
            let (w, corner) = if sign > 0.0 { top } else { bottom };
            if !w.is_finite() {
                return Ok(None);
            }
            if surface.is_singular_corner(corner) {
                reach[side] = travelled + w.abs();
                break;
            }
            rounds += 1;
            if rounds > 64 {
                return Ok(None);
            }
            let hop = w.abs() + step;
            base = flow_vec(surface, base, n * sign, hop)?;
            travelled += hop;
            let Some(o) = closed_orbit(surface, base, u, 2.0 * period)? else {
                return Ok(None);
            };
            if !same_period(&o) {
                return Ok(None);
            }
            core = match core_pieces(surface, &o) {
                Some(c) => c,
                None => return Ok(None),
            };
        }
    }
    let height = reach[0] + reach[1];
    let center = 0.5 * (reach[0] - reach[1]);
    let witness = flow_vec(surface, seed, n, center)?;
    let Some(mid) = closed_orbit(surface, witness, u, 2.0 * period)? else {
        return Ok(None);
    };
    if !same_period(&mid) {
        return Ok(None);
    }
    let Some(core) = core_pieces(surface, &mid) else {
        return Ok(None);
    };
    let area_fraction = period * height / surface.total_area();
    Ok(Some(Cylinder {
        direction: Direction::from_vector(u).unoriented(),
        core_length: mid.length,
        height,
        area_fraction,
        witness,
        core_dir: u,
        core,
    }))
}

/// Collects cylinders, skipping seeds that fall in a known cylinder.
struct Collector {
    cylinders: Vec<Cylinder>,
    by_direction: BTreeMap<i64, Vec<usize>>,
    offset: f64,
}

impl Collector {
    fn new(surface: &TranslationSurface) -> Self {
        Collector {
            cylinders: Vec::new(),
            by_direction: BTreeMap::new(),
            offset: 1e-6 * surface.shortest_edge(),
        }
    }

    fn dir_key(tau: f64) -> i64 {
        quantize(tau, 1e-8)
    }

    fn known(&self, surface: &TranslationSurface, tau: f64, pt: SurfacePoint) -> bool {
        let key = Self::dir_key(tau);
        let tol = 1e-9 * surface.scale();
        (key - 1..=key + 1)
            .filter_map(|k| self.by_direction.get(&k))
            .flatten()
            .map(|&i| &self.cylinders[i])
            .filter(|c| circle_distance(c.direction.tau(), tau) < 1e-9)
            .any(|c| c.contains(surface, pt, -tol))
    }

    /// Seeds on both sides of the saddle connection `sc`.
    fn add_from(&mut self, surface: &TranslationSurface, sc: &SaddleConnection, t_max: f64) -> Result<(), FlowError> {
        let len = sc.length();
        let u = sc.holonomy * (1.0 / len);
        let tau = Direction::from_vector(u).unoriented().tau();
        let cap = default_step_cap(surface, len);
        let mid = match run_pieces(surface, sc.start_point, Some(sc.start_corner), u, 0.5 * len, cap, StopAt::Singular, |_| {
            ControlFlow::Continue(())
        }) {
            Ok(o) => o.end,
            Err(FlowError::SingularityHit { .. }) => return Ok(()),
            Err(e) => return Err(e),
        };
        for sign in [1.0, -1.0] {
            let seed = flow_vec(surface, mid, u.perp() * sign, self.offset)?;
            let seed = nudge_interior(surface, seed, u)?;
            if self.known(surface, tau, seed) {
                continue;
            }
            let Some(cyl) = cylinder_from_seed(surface, seed, u, t_max)? else {
                continue;
            };
            // reject near-coincidences: a true cylinder closes at half the offset too
            let half = flow_vec(surface, mid, u.perp() * sign, 0.5 * self.offset)?;
            let half = nudge_interior(surface, half, u)?;
            match closed_orbit(surface, half, u, 2.0 * cyl.core_length)? {
                Some(o) if (o.length - cyl.core_length).abs() <= 1e-9 * cyl.core_length.max(1.0) => {}
                _ => continue,
            }
            if self.known(surface, tau, cyl.witness) {
                continue;
            }
            let idx = self.cylinders.len();
            self.by_direction.entry(Self::dir_key(cyl.direction.tau())).or_default().push(idx);
            self.cylinders.push(cyl);
        }
        Ok(())
    }

    fn finish(mut self) -> Vec<Cylinder> {
        sort_cylinders(&mut self.cylinders);
        self.cylinders
    }
}

/// Moves `p` to the middle of its first piece in direction `u` so that it
/// is not on a polygon edge.
fn nudge_interior(surface: &TranslationSurface, p: SurfacePoint, u: Vec2) -> Result<SurfacePoint, FlowError> {
    let mut first = None;
    let cap = default_step_cap(surface, surface.scale());
    let r = run_pieces(surface, p, None, u, 4.0 * surface.scale(), cap, StopAt::Singular, |piece| {
        if piece.len() > 1e-9 * surface.scale() {
            first = Some(*piece);
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    });
    match (r, first) {
        (_, Some(piece)) => Ok(SurfacePoint::new(piece.polygon, (piece.start + piece.end) * 0.5)),
        (Err(e), None) => Err(e),
        (Ok(_), None) => Ok(p),
    }
}

fn sort_cylinders(list: &mut [Cylinder]) {
    list.sort_by(|a, b| {
        a.core_length
            .total_cmp(&b.core_length)
            .then(a.direction.tau().total_cmp(&b.direction.tau()))
            .then(a.height.total_cmp(&b.height))
    });
}

/// All maximal cylinders with core length `< max_len` and area fraction
/// `>= min_area`, sorted by `(T, tau)`.
pub fn enumerate_cylinders(
    surface: &TranslationSurface,
    max_len: f64,
    min_area: f64,
) -> Result<Vec<Cylinder>, CylinderError> {
    if !(min_area > 0.0 && min_area <= 1.0) {
        return Err(CylinderError::BadParameter("min_area must lie in (0, 1]"));
    }
    let saddles = enumerate_saddle_connections(surface, max_len)?;
    let mut collector = Collector::new(surface);
    for sc in saddles.iter().filter(|s| s.length() < max_len) {
        collector.add_from(surface, sc, max_len)?;
    }
    let mut list = collector.finish();
    list.retain(|c| c.core_length < max_len && c.area_fraction >= min_area * (1.0 - 1e-12));
    Ok(list)
}

/// Cylinders of area fraction at least `sigma_eff` and length `< max_len`,
/// ordered by increasing length (ties by direction).
pub fn cylinder_sequence(surface: &TranslationSurface, max_len: f64) -> Result<Vec<Cylinder>, CylinderError> {
    enumerate_cylinders(surface, max_len, surface.sigma_eff())
}

/// Cylinders whose boundary saddle connections leave a singularity within
/// a narrow funnel around `dir`.
///
/// Every separatrix in direction `dir` is followed for time `t_max`; each
/// singular vertex it passes at along-distance `s` and perpendicular offset
/// `d` with `keep(s, d)` is tested as the far end of a saddle connection,
/// and cylinders are seeded from the confirmed ones.
pub fn cylinders_near_direction<F>(
    surface: &TranslationSurface,
    dir: Direction,
    t_max: f64,
    keep: F,
) -> Result<Vec<Cylinder>, CylinderError>
where
    F: Fn(f64, f64) -> bool,
{
    let u = dir.unit();
    let n = u.perp();
    let q = 1e-9 * surface.scale();
    let mut collector = Collector::new(surface);
    let singular: Vec<usize> = surface.singular_classes().collect();
    if singular.is_empty() {
        return Err(CylinderError::NoSingularities);
    }
    for class in singular {
        for (corner, angle) in surface.corners_containing(class, u) {
            let start = SurfacePoint::new(corner.poly, surface.corner_point(corner));
            let mut found: BTreeMap<(i64, i64), Vec2> = BTreeMap::new();
            let cap = default_step_cap(surface, t_max);
            let r = run_pieces(surface, start, Some(corner), u, t_max, cap, StopAt::Singular, |piece| {
                let poly = surface.polygon(piece.polygon);
                let origin = u * piece.t0 - piece.start;
                for k in 0..poly.len() {
                    if !surface.is_singular_corner(Corner { poly: piece.polygon, vertex: k }) {
                        continue;
                    }
                    let h = origin + poly.vertex(k);
                    let s = h.dot(u);
                    let d = h.dot(n);
                    if s > q && keep(s, d.abs()) {
                        found.entry((quantize(h.x, q), quantize(h.y, q))).or_insert(h);
                    }
                }
                ControlFlow::Continue(())
            });
            match r {
                Ok(_) | Err(FlowError::SingularityHit { .. }) | Err(FlowError::StepLimitExceeded { .. }) => {}
                Err(e) => return Err(e.into()),
            }
            for h in found.into_values() {
                let hu = h.normalized();
                let target = angle + libm::atan2(u.cross(hu), u.dot(hu));
                let cone = surface.classes()[class].cone_angle();
                let best = surface.corners_containing(class, hu).into_iter().min_by(|a, b| {
                    let da = angular_gap(a.1, target, cone);
                    let db = angular_gap(b.1, target, cone);
                    da.total_cmp(&db)
                });
                let Some((c, a)) = best else { continue };
                if let Some(sc) = confirm(surface, class, c, a, h)? {
                    collector.add_from(surface, &sc, t_max)?;
                }
            }
        }
    }
    Ok(collector.finish())
}

fn angular_gap(a: f64, b: f64, period: f64) -> f64 {
    let r = (a - b) / period;
    let d = (r - libm::floor(r)) * period;
    d.min(period - d)
}

/// A pair of cylinders violating the crossing-time bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeparationViolation {
    /// Index of the crossed cylinder.
    pub crossed: usize,
    /// Index of the cylinder whose core crosses it.
    pub crossing: usize,
    /// `h_1 / |sin(angle)|`.
    pub required: f64,
    /// Core length `R` of the crossing cylinder.
    pub length: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SeparationReport {
    pub cylinders: usize,
    pub pairs_checked: usize,
    pub intersecting_pairs: usize,
    pub violations: Vec<SeparationViolation>,
    /// Intersecting pairs with `|tau_1 - tau_2| < 1 / (R T_1)` in turn units.
    pub unit_constant_violations: usize,
    /// Smallest `R / (h_1 |csc|)` over intersecting pairs.
    pub min_ratio: f64,
}

/// Checks `R >= h_1 |csc(2 pi (tau_1 - tau_2))|` for every ordered pair of
/// cylinders in different directions whose interiors meet along the second
/// one's core.
pub fn check_separation(surface: &TranslationSurface, cylinders: &[Cylinder]) -> SeparationReport {
    let mut report = SeparationReport {
        cylinders: cylinders.len(),
        min_ratio: f64::INFINITY,
        ..Default::default()
    };
    for (i, c1) in cylinders.iter().enumerate() {
        for (j, c2) in cylinders.iter().enumerate() {
            if i == j || circle_distance(c1.direction.tau(), c2.direction.tau()) < 1e-12 {
                continue;
            }
            report.pairs_checked += 1;
            if !c1.core_meets(surface, c2) {
                continue;
            }
            report.intersecting_pairs += 1;
            let delta = c1.direction.tau() - c2.direction.tau();
            let sin = libm::sin(2.0 * PI * delta).abs();
            let required = c1.height / sin;
            let ratio = c2.core_length / required;
            report.min_ratio = report.min_ratio.min(ratio);
            if c2.core_length < required * (1.0 - 1e-9) {
                report.violations.push(SeparationViolation {
                    crossed: i,
                    crossing: j,
                    required,
                    length: c2.core_length,
                });
            }
            let turn_gap = libm::fabs(delta).min(0.5 - libm::fabs(delta));
            if turn_gap < 1.0 / (c2.core_length * c1.core_length) {
                report.unit_constant_violations += 1;
            }
        }
    }
    report
}

/// Ways in which a cylinder can fail its defining properties.
#[derive(Clone, Copy, Debug, PartialEq, thiserror::Error)]
pub enum CylinderInvariant {
    #[error("area fraction inconsistent with T*h")]
    Area,
    #[error("core does not close up at time T")]
    Closure,
    #[error("cylinder is narrower than its recorded height")]
    Height,
    #[error("cylinder is not maximal")]
    MissedMaximality,
}

/// Verifies area accounting, closure of the core, closure of curves near
/// both boundaries and that a singularity sits on each boundary.
pub fn check_cylinder(surface: &TranslationSurface, cyl: &Cylinder) -> Result<(), CylinderInvariant> {
    let expected = cyl.core_length * cyl.height / surface.total_area();
    if !(cyl.area_fraction > 0.0 && cyl.area_fraction <= 1.0 + 1e-9) || (expected - cyl.area_fraction).abs() > 1e-9 {
        return Err(CylinderInvariant::Area);
    }
    let u = cyl.core_dir;
    let back = flow_vec(surface, cyl.witness, u, cyl.core_length).map_err(|_| CylinderInvariant::Closure)?;
    if !surface.same_point(back, cyl.witness, 1e-9) {
        return Err(CylinderInvariant::Closure);
    }
    let kappa = 1e-6;
    for sign in [1.0, -1.0] {
        let w = 0.5 * cyl.height * (1.0 - kappa);
        let p = flow_vec(surface, cyl.witness, u.perp() * sign, w).map_err(|_| CylinderInvariant::Height)?;
        let p = nudge_interior(surface, p, u).map_err(|_| CylinderInvariant::Height)?;
        let orbit = closed_orbit(surface, p, u, 2.0 * cyl.core_length)
            .ok()
            .flatten()
            .ok_or(CylinderInvariant::Height)?;
        if (orbit.length - cyl.core_length).abs() > 1e-8 * cyl.core_length.max(1.0) {
            return Err(CylinderInvariant::Height);
        }
        let core = core_pieces(surface, &orbit).ok_or(CylinderInvariant::Height)?;
        let clearance = singular_clearance(surface, &core);
        if clearance > 2.0 * kappa * 0.5 * cyl.height + 1e-9 {
            return Err(CylinderInvariant::MissedMaximality);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::{l_shape, regular_octagon, square_torus};
    use alloc::vec;

    fn gcd(a: i64, b: i64) -> i64 {
        if b == 0 {
            a.abs()
        } else {
            gcd(b, a % b)
        }
    }

    /// Primitive lattice vectors with norm below `len`, one per line.
    fn primitive_count(len: f64) -> usize {
        let r = len.ceil() as i64 + 1;
        let mut count = 0;
        for x in -r..=r {
            for y in -r..=r {
                if (x, y) != (0, 0) && gcd(x, y) == 1 && ((x * x + y * y) as f64) < len * len {
                    count += 1;
                }
            }
        }
        count / 2
    }

    #[test]
    fn torus_saddle_connections_short() {
        let s = square_torus().unwrap();
        let list = enumerate_saddle_connections(&s, 1.5).unwrap();
        let mut hol: Vec<(i64, i64)> = list
            .iter()
            .map(|sc| (libm::round(sc.holonomy.x) as i64, libm::round(sc.holonomy.y) as i64))
            .collect();
        hol.sort();
        assert_eq!(
            hol,
            vec![(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
        );
        let unoriented: BTreeSet<i64> = list.iter().map(|sc| quantize(sc.direction().unoriented().tau(), 1e-9)).collect();
        assert_eq!(unoriented.len(), 4);
        assert!(enumerate_saddle_connections(&s, 0.5).unwrap().is_empty());
    }

    #[test]
    fn l_shape_unit_connections_and_shortest() {
        let s = l_shape(2.0, 2.0).unwrap();
        let list = enumerate_saddle_connections(&s, 1.01).unwrap();
        assert!(list.iter().any(|sc| (sc.holonomy - Vec2::new(1.0, 0.0)).norm() < 1e-12));
        assert!(list.iter().any(|sc| (sc.holonomy - Vec2::new(0.0, 1.0)).norm() < 1e-12));
        assert!((shortest_saddle(&s).unwrap() - 1.0).abs() < 1e-12);
        assert!((shortest_saddle(&square_torus().unwrap()).unwrap() - 1.0).abs() < 1e-12);
        assert!((shortest_saddle(&regular_octagon().unwrap()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn saddle_connections_retrace() {
        let s = l_shape(2.0, 2.0).unwrap();
        for sc in enumerate_saddle_connections(&s, 3.0).unwrap() {
            let u = sc.holonomy.normalized();
            let r = run_pieces(&s, sc.start_point, Some(sc.start_corner), u, 2.0 * sc.length(), 10_000, StopAt::Singular, |_| {
                ControlFlow::Continue(())
            });
            match r {
                Err(FlowError::SingularityHit { time, class, .. }) => {
                    assert!((time - sc.length()).abs() < 1e-9);
                    assert_eq!(class, sc.end_singularity);
                }
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn torus_cylinders_short() {
        let s = square_torus().unwrap();
        let cyls = enumerate_cylinders(&s, 1.5, 1.0).unwrap();
        assert_eq!(cyls.len(), 4);
        let taus: Vec<f64> = cyls.iter().map(|c| c.direction.tau()).collect();
        for expected in [0.0, 0.25, 0.125, 0.375] {
            assert!(taus.iter().any(|t| (t - expected).abs() < 1e-12), "{taus:?}");
        }
        for c in &cyls {
            assert!((c.area_fraction - 1.0).abs() < 1e-9);
            assert!((c.height - 1.0 / c.core_length).abs() < 1e-9);
            check_cylinder(&s, c).unwrap();
        }
        assert_eq!(cylinder_sequence(&s, 1.5).unwrap(), cyls);
    }

    #[test]
    fn torus_sequence_order_and_counts() {
        let s = square_torus().unwrap();
        let seq = cylinder_sequence(&s, 2.0).unwrap();
        assert_eq!(seq[0].direction.tau(), 0.0);
        assert!((seq[0].core_length - 1.0).abs() < 1e-12);
        let first_diag = seq.iter().position(|c| (c.direction.tau() - 0.125).abs() < 1e-12).unwrap();
        assert!(first_diag > 0);
        assert!((seq[first_diag].core_length - 2f64.sqrt()).abs() < 1e-12);
        for len in [5.0, 10.0] {
            assert_eq!(cylinder_sequence(&s, len).unwrap().len(), primitive_count(len));
        }
        assert_eq!(primitive_count(10.0), 96);
        assert!(cylinder_sequence(&s, 0.5).unwrap().is_empty());
    }

    #[test]
    fn l_shape_horizontal_decomposition() {
        let s = l_shape(2.0, 2.0).unwrap();
        let cyls = enumerate_cylinders(&s, 2.01, 0.25).unwrap();
        let horizontal: Vec<&Cylinder> = cyls.iter().filter(|c| c.direction.tau().abs() < 1e-12).collect();
        assert_eq!(horizontal.len(), 2);
        let total: f64 = horizontal.iter().map(|c| c.area_fraction).sum();
        assert!((total - 1.0).abs() < 1e-9);
        let mut lengths: Vec<f64> = horizontal.iter().map(|c| c.core_length).collect();
        lengths.sort_by(f64::total_cmp);
        assert!((lengths[0] - 1.0).abs() < 1e-12 && (lengths[1] - 2.0).abs() < 1e-12);
        for c in &cyls {
            check_cylinder(&s, c).unwrap();
        }
    }

    #[test]
    fn separation_on_torus_and_l() {
        let s = square_torus().unwrap();
        let cyls = cylinder_sequence(&s, 8.0).unwrap();
        let report = check_separation(&s, &cyls);
        assert!(report.intersecting_pairs > 0);
        assert!(report.violations.is_empty(), "{:?}", report.violations);
        // unimodular pairs sit exactly on the bound
        assert!((report.min_ratio - 1.0).abs() < 1e-9);

        let l = l_shape(2.0, 2.0).unwrap();
        let cyls = cylinder_sequence(&l, 8.0).unwrap();
        let report = check_separation(&l, &cyls);
        assert!(report.violations.is_empty());
        assert!(check_separation(&l, &cyls[..1]).pairs_checked == 0);
    }

    #[test]
    fn cylinder_membership_and_points() {
        let s = square_torus().unwrap();
        let cyls = cylinder_sequence(&s, 1.5).unwrap();
        let horizontal = &cyls[0];
        let p = horizontal.point_at(&s, 0.3, 0.2).unwrap();
        assert!(horizontal.contains(&s, p, 0.0));
        let l = l_shape(2.0, 2.0).unwrap();
        let cyls = enumerate_cylinders(&l, 2.01, 0.25).unwrap();
        let top = cyls
            .iter()
            .find(|c| c.direction.tau() == 0.0 && (c.core_length - 1.0).abs() < 1e-9)
            .unwrap();
        assert!(top.contains(&l, SurfacePoint::new(2, Vec2::new(0.5, 1.5)), 0.0));
        assert!(!top.contains(&l, SurfacePoint::new(0, Vec2::new(0.5, 0.5)), 0.0));
    }

    #[test]
    fn near_direction_search_finds_the_close_cylinders() {
        let s = square_torus().unwrap();
        // direction just above slope 1/3
        let dir = Direction::from_vector(Vec2::new(3.0, 1.0 + 1e-4));
        let cyls = cylinders_near_direction(&s, dir, 20.0, |_, d| d < 0.05).unwrap();
        assert!(cyls
            .iter()
            .any(|c| (c.direction.tau() - Direction::from_vector(Vec2::new(3.0, 1.0)).tau()).abs() < 1e-12));
        for c in &cyls {
            check_cylinder(&s, c).unwrap();
        }
    }
}
