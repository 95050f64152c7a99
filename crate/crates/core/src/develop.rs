//! Straight-line development of the surface around a point.
//!
//! Polygons are unfolded into the plane along rays from the origin. Each
//! developed copy carries the angular window of rays that reach it, so the
//! windows of all copies at a given distance partition the directions at
//! the origin and sheets around a cone point never get mixed up (mixing
//! them is harmless on the torus but unbounded on, say, the octagon, whose
//! edge translations are dense in the plane).

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};
use core::ops::ControlFlow;

use crate::geom::{point_segment_distance, Vec2};
use crate::surface::{Corner, EdgeRef, SurfacePoint, TranslationSurface};

/// A polygon copy in the developed plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Sheet {
    pub poly: usize,
    /// Added to polygon coordinates to get developed coordinates.
    pub offset: Vec2,
    /// Lifted angular window `[lo, hi]` of rays from the origin.
    pub lo: f64,
    pub hi: f64,
    entry: Option<usize>,
}

impl Sheet {
    /// Angle of `p` lifted next to the window.
    fn lift(&self, p: Vec2) -> f64 {
        let mid = 0.5 * (self.lo + self.hi);
        let (s, c) = libm::sincos(mid);
        let d = Vec2::new(c, s);
        mid + libm::atan2(d.cross(p), d.dot(p))
    }

    /// Whether the developed point `p` is in the window (closed, with slack).
    pub fn sees(&self, p: Vec2) -> bool {
        let a = self.lift(p);
        let tol = 1e-12;
        a >= self.lo - tol && a <= self.hi + tol
    }
}

/// Sectors at `pt`: one per polygon corner meeting there (vertex), two half
/// planes (edge point) or the full turn (interior point). Windows wider than
/// a quarter turn are split.
pub(crate) fn start_sheets(surface: &TranslationSurface, pt: SurfacePoint) -> Vec<Sheet> {
    let tol = 1e-12 * surface.scale();
    let mut raw: Vec<(usize, Vec2, f64, f64)> = Vec::new();
    let poly = surface.polygon(pt.polygon);
    if let Some(c) = surface.corner_at(pt, tol) {
        let class = surface.class_of(c);
        for &k in &surface.classes()[class].corners {
            let start = surface.polygon(k.poly).edge_vector(k.vertex).angle();
            raw.push((k.poly, -surface.corner_point(k), start, start + surface.corner_angle(k)));
        }
    } else if let Some(e) = (0..poly.len()).find(|&e| {
        let (a, b) = poly.edge(e);
        point_segment_distance(pt.pos, a, b) <= tol
    }) {
        let here = EdgeRef { poly: pt.polygon, edge: e };
        let there = surface.partner(here);
        let start = poly.edge_vector(e).angle();
        raw.push((pt.polygon, -pt.pos, start, start + PI));
        raw.push((there.poly, -(pt.pos + surface.edge_shift(here)), start + PI, start + 2.0 * PI));
    } else {
        raw.push((pt.polygon, -pt.pos, 0.0, 2.0 * PI));
    }
    let mut out = Vec::new();
    for (poly, offset, lo, hi) in raw {
        let pieces = libm::ceil((hi - lo) / FRAC_PI_2).max(1.0) as usize;
        let step = (hi - lo) / pieces as f64;
        for i in 0..pieces {
            out.push(Sheet {
                poly,
                offset,
                lo: lo + step * i as f64,
                hi: if i + 1 == pieces { hi } else { lo + step * (i + 1) as f64 },
                entry: None,
            });
        }
    }
    out
}

/// Parameters `(t, s)` of the ray `t d` meeting the line `a + s (b - a)`.
fn ray_hit(d: Vec2, a: Vec2, b: Vec2) -> Option<(f64, f64)> {
    let e = b - a;
    let den = d.cross(e);
    if den.abs() < 1e-300 {
        return None;
    }
    Some((a.cross(e) / den, a.cross(d) / den))
}

/// Exit edge of the ray at angle `theta` through the sheet.
fn exit_edge(surface: &TranslationSurface, sheet: &Sheet, theta: f64) -> Option<usize> {
    let poly = surface.polygon(sheet.poly);
    let (s, c) = libm::sincos(theta);
    let d = Vec2::new(c, s);
    let tiny = 1e-12 * surface.scale();
    let t_in = match sheet.entry {
        Some(e) => {
            let (a, b) = poly.edge(e);
            ray_hit(d, a + sheet.offset, b + sheet.offset)?.0
        }
        None => 0.0,
    };
    let mut best: Option<(f64, usize)> = None;
    for e in 0..poly.len() {
        if Some(e) == sheet.entry {
            continue;
        }
        let ev = poly.edge_vector(e);
        if ev.cross(d) >= 0.0 {
            continue;
        }
        let (a, b) = poly.edge(e);
        let Some((t, s)) = ray_hit(d, a + sheet.offset, b + sheet.offset) else {
            continue;
        };
        if t > t_in + tiny && (-1e-12..=1.0 + 1e-12).contains(&s) && best.is_none_or(|(bt, _)| t < bt) {
            best = Some((t, e));
        }
    }
    best.map(|(_, e)| e)
}

/// Develops breadth-first, visiting every sheet that meets the disk of
/// `radius` about the origin. Returns `Err(count)` when more than `max`
/// sheets would be needed.
pub(crate) fn develop<F>(
    surface: &TranslationSurface,
    starts: Vec<Sheet>,
    radius: f64,
    max: usize,
    mut visit: F,
) -> Result<(), usize>
where
    F: FnMut(&Sheet) -> ControlFlow<()>,
{
    let mut queue: alloc::collections::VecDeque<Sheet> = starts.into();
    let mut count = 0usize;
    let mut cuts: Vec<f64> = Vec::new();
    while let Some(sheet) = queue.pop_front() {
        count += 1;
        if count > max {
            return Err(max);
        }
        if visit(&sheet).is_break() {
            return Ok(());
        }
        let poly = surface.polygon(sheet.poly);
        cuts.clear();
        cuts.push(sheet.lo);
        for k in 0..poly.len() {
            let v = poly.vertex(k) + sheet.offset;
            if v.norm() <= 1e-12 * surface.scale() {
                continue;
            }
            let a = sheet.lift(v);
            if a > sheet.lo && a < sheet.hi {
                cuts.push(a);
            }
        }
        cuts.push(sheet.hi);
        cuts.sort_by(f64::total_cmp);
        // merge runs with the same exit edge
        let mut run: Option<(usize, f64, f64)> = None;
        let flush = |run: Option<(usize, f64, f64)>, queue: &mut alloc::collections::VecDeque<Sheet>| {
            let Some((e, lo, hi)) = run else { return };
            let (a, b) = poly.edge(e);
            if point_segment_distance(Vec2::ZERO, a + sheet.offset, b + sheet.offset) > radius {
                return;
            }
            let here = EdgeRef { poly: sheet.poly, edge: e };
            let there = surface.partner(here);
            queue.push_back(Sheet {
                poly: there.poly,
                offset: sheet.offset - surface.edge_shift(here),
                lo,
                hi,
                entry: Some(there.edge),
            });
        };
        for w in cuts.windows(2) {
            if w[1] - w[0] <= 1e-15 {
                continue;
            }
            let Some(e) = exit_edge(surface, &sheet, 0.5 * (w[0] + w[1])) else {
                continue;
            };
            run = match run {
                Some((re, lo, _)) if re == e => Some((e, lo, w[1])),
                other => {
                    flush(other, &mut queue);
                    Some((e, w[0], w[1]))
                }
            };
        }
        flush(run, &mut queue);
    }
    Ok(())
}

/// Corner sheets of a vertex class, for searches from a cone point.
pub(crate) fn corner_sheets(surface: &TranslationSurface, corner: Corner) -> Vec<Sheet> {
    start_sheets(surface, SurfacePoint::new(corner.poly, surface.corner_point(corner)))
}
