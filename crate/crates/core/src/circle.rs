//! Measure of finite unions of arcs on the circle `[0, 1)`.

use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::cylinders::{cylinder_sequence, Cylinder, CylinderError};
use crate::geom::wrap_unit;
use crate::surface::TranslationSurface;

/// The ball `B(center, radius)` on the circle of length 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arc {
    center: f64,
    radius: f64,
}

impl Arc {
    /// `None` unless the radius is positive. Radii of at least `1/2` are
    /// stored as `1/2` (the whole circle).
    pub fn new(center: f64, radius: f64) -> Option<Self> {
        (radius > 0.0 && center.is_finite()).then(|| Arc {
            center: wrap_unit(center),
            radius: radius.min(0.5),
        })
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn is_full(&self) -> bool {
        self.radius >= 0.5
    }

    /// The arc as one or two intervals of `[0, 1]`.
    fn pieces(&self) -> ([(f64, f64); 2], usize) {
        if self.is_full() {
            return ([(0.0, 1.0), (0.0, 0.0)], 1);
        }
        let lo = self.center - self.radius;
        let hi = self.center + self.radius;
        if lo < 0.0 {
            ([(lo + 1.0, 1.0), (0.0, hi)], 2)
        } else if hi > 1.0 {
            ([(lo, 1.0), (0.0, hi - 1.0)], 2)
        } else {
            ([(lo, hi), (0.0, 0.0)], 1)
        }
    }
}

/// A closed subinterval `[start, end]` of `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub const CIRCLE: Interval = Interval { start: 0.0, end: 1.0 };

    pub fn new(start: f64, end: f64) -> Option<Self> {
        (0.0 <= start && start <= end && end <= 1.0).then_some(Interval { start, end })
    }

    /// `[i / 2^k, (i + 1) / 2^k]`.
    pub fn dyadic(k: u32, i: u64) -> Option<Self> {
        let n = 1u64.checked_shl(k)?;
        if i >= n {
            return None;
        }
        let w = 1.0 / n as f64;
        Interval::new(i as f64 * w, (i + 1) as f64 * w)
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains(&self, x: f64) -> bool {
        self.start <= x && x <= self.end
    }
}

/// An uncovered stretch of the circle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gap {
    pub center: f64,
    pub length: f64,
}

/// Disjoint sorted intervals covering the same set as a list of arcs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ArcUnion {
    intervals: Vec<Interval>,
}

impl ArcUnion {
    pub fn from_arcs(arcs: &[Arc]) -> Self {
        let mut raw: Vec<(f64, f64)> = Vec::with_capacity(2 * arcs.len());
        for arc in arcs {
            let (p, n) = arc.pieces();
            raw.extend_from_slice(&p[..n]);
        }
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut intervals: Vec<Interval> = Vec::new();
        for (lo, hi) in raw {
            match intervals.last_mut() {
                Some(last) if lo <= last.end => last.end = last.end.max(hi),
                _ => intervals.push(Interval { start: lo, end: hi }),
            }
        }
        ArcUnion { intervals }
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(Interval::length).sum()
    }

    /// `λ(self ∩ j)`.
    pub fn measure_in(&self, j: Interval) -> f64 {
        self.intervals
            .iter()
            .map(|i| (i.end.min(j.end) - i.start.max(j.start)).max(0.0))
            .sum()
    }

    pub fn contains(&self, x: f64) -> bool {
        let x = wrap_unit(x);
        let k = self.intervals.partition_point(|i| i.start <= x);
        (k > 0 && self.intervals[k - 1].end >= x) || (x == 0.0 && self.intervals.last().is_some_and(|i| i.end >= 1.0))
    }

    /// Uncovered arcs of positive length; the stretch across `0` counts
    /// as one gap.
    pub fn gaps(&self) -> Vec<Gap> {
        if self.intervals.is_empty() {
            return alloc::vec![Gap { center: 0.5, length: 1.0 }];
        }
        let mut out = Vec::new();
        for w in self.intervals.windows(2) {
            let len = w[1].start - w[0].end;
            if len > 0.0 {
                out.push(Gap {
                    center: 0.5 * (w[0].end + w[1].start),
                    length: len,
                });
            }
        }
        let first = self.intervals[0].start;
        let last = self.intervals[self.intervals.len() - 1].end;
        let wrap = first + (1.0 - last);
        if wrap > 0.0 {
            out.push(Gap {
                center: wrap_unit(last + 0.5 * wrap),
                length: wrap,
            });
        }
        out
    }

    /// The longest gap; ties go to the one met first from `0`.
    pub fn largest_gap(&self) -> Option<Gap> {
        let mut gaps = self.gaps();
        gaps.sort_by(|a, b| wrap_unit(a.center).total_cmp(&wrap_unit(b.center)));
        gaps.into_iter()
            .fold(None, |best: Option<Gap>, g| match best {
                Some(b) if b.length >= g.length => Some(b),
                _ => Some(g),
            })
    }
}

/// `λ((∪ arcs) ∩ j)`.
pub fn union_measure(arcs: &[Arc], j: Interval) -> f64 {
    ArcUnion::from_arcs(arcs).measure_in(j)
}

/// Whether the arcs cover the circle, with the largest gap if not.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coverage {
    pub covered: bool,
    pub largest_gap: Option<Gap>,
}

pub fn covers_circle(arcs: &[Arc]) -> Coverage {
    let gap = ArcUnion::from_arcs(arcs).largest_gap();
    Coverage {
        covered: gap.is_none(),
        largest_gap: gap,
    }
}

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

/// `λ((∪ arcs) ∩ j)` computed exactly from the binary values of the arc
/// centers, radii and interval endpoints.
pub fn exact_union_measure(arcs: &[Arc], j: Interval) -> BigRational {
    let zero = BigRational::from_integer(BigInt::from(0));
    let one = BigRational::from_integer(BigInt::from(1));
    let (j0, j1) = (exact(j.start), exact(j.end));
    let mut raw: Vec<(BigRational, BigRational)> = Vec::new();
    let mut push = |lo: BigRational, hi: BigRational| {
        let lo = if lo > j0 { lo } else { j0.clone() };
        let hi = if hi < j1 { hi } else { j1.clone() };
        if lo < hi {
            raw.push((lo, hi));
        }
    };
    for arc in arcs {
        if arc.is_full() {
            push(zero.clone(), one.clone());
            continue;
        }
        let c = exact(arc.center);
        let r = exact(arc.radius);
        let lo = &c - &r;
        let hi = &c + &r;
        if lo < zero {
            push(lo + &one, one.clone());
            push(zero.clone(), hi);
        } else if hi > one {
            push(lo, one.clone());
            push(zero.clone(), hi - &one);
        } else {
            push(lo, hi);
        }
    }
    raw.sort();
    let mut total = zero.clone();
    let mut cur: Option<(BigRational, BigRational)> = None;
    for (lo, hi) in raw {
        cur = match cur {
            Some((a, b)) if lo <= b => Some((a, if hi > b { hi } else { b })),
            Some((a, b)) => {
                total += b - a;
                Some((lo, hi))
            }
            None => Some((lo, hi)),
        };
    }
    if let Some((a, b)) = cur {
        total += b - a;
    }
    total
}

/// Largest number of arcs sharing a point of `j`.
pub fn overlap_depth(arcs: &[Arc], j: Interval) -> usize {
    let mut events: Vec<(f64, i32)> = Vec::new();
    for arc in arcs {
        let (p, n) = arc.pieces();
        for &(lo, hi) in &p[..n] {
            let (lo, hi) = (lo.max(j.start), hi.min(j.end));
            if lo < hi {
                events.push((lo, 1));
                events.push((hi, -1));
            }
        }
    }
    // closings sort before openings at equal positions
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut depth = 0i32;
    let mut best = 0i32;
    for (_, d) in events {
        depth += d;
        best = best.max(depth);
    }
    best as usize
}

/// Arcs `B(tau, c / (T * scale))` around both flow directions of every
/// cylinder.
pub fn cylinder_arcs(cylinders: &[Cylinder], c: f64, scale: f64) -> Vec<Arc> {
    cylinders
        .iter()
        .flat_map(|cyl| {
            let r = c / (cyl.core_length * scale);
            cyl.full_circle_directions().map(|t| Arc::new(t, r))
        })
        .flatten()
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, thiserror::Error)]
pub enum CircleError {
    #[error("no cylinders of the required area below the length bound")]
    NoCylinders,
    #[error("bad parameter: {0}")]
    BadParameter(&'static str),
    #[error(transparent)]
    Cylinders(#[from] CylinderError),
}

/// Smallest `c` (to `1e-6`) for which the arcs `B(tau, c/(T L))` of all
/// cylinders with area fraction at least `sigma_eff` and length `< L`
/// cover the circle.
pub fn minimal_covering_constant(surface: &TranslationSurface, len: f64) -> Result<f64, CircleError> {
    let cylinders = cylinder_sequence(surface, len)?;
    covering_constant_of(&cylinders, len)
}

pub fn covering_constant_of(cylinders: &[Cylinder], len: f64) -> Result<f64, CircleError> {
    if cylinders.is_empty() {
        return Err(CircleError::NoCylinders);
    }
    let covers = |c: f64| covers_circle(&cylinder_arcs(cylinders, c, len)).covered;
    let mut hi = 1.0;
    while !covers(hi) {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if covers(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// The annulus measurement behind the key lower bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KeyBound {
    /// `λ(∪ B(θ, 1/(C1 N)^2) ∩ J)` over cylinders with `N <= T < C1 N`.
    pub measured: f64,
    /// `2 / (C1 N)^2`.
    pub correction: f64,
    /// `(measured + correction) / λ(J)`: the largest `C2` this instance allows.
    pub c2_candidate: Option<f64>,
    pub cylinders: usize,
}

pub fn key_bound_report(surface: &TranslationSurface, n: f64, j: Interval, c1: f64) -> Result<KeyBound, CircleError> {
    if !(n > 0.0) || !(c1 > 1.0) {
        return Err(CircleError::BadParameter("need N > 0 and C1 > 1"));
    }
    let outer = c1 * n;
    let all = cylinder_sequence(surface, outer)?;
    let annulus: Vec<Cylinder> = all.into_iter().filter(|c| c.core_length >= n).collect();
    if annulus.is_empty() {
        return Err(CircleError::NoCylinders);
    }
    let r = 1.0 / (outer * outer);
    let arcs: Vec<Arc> = annulus
        .iter()
        .flat_map(|c| c.full_circle_directions().map(|t| Arc::new(t, r)))
        .flatten()
        .collect();
    let measured = union_measure(&arcs, j);
    let correction = 2.0 * r;
    Ok(KeyBound {
        measured,
        correction,
        c2_candidate: (j.length() > 0.0).then(|| (measured + correction) / j.length()),
        cylinders: annulus.len(),
    })
}

/// One interval of the sum-bound check.
#[derive(Clone, Debug, PartialEq)]
pub struct SumBoundCheck {
    pub interval: Interval,
    /// `λ(∪ B(θ, 1/(T L)) ∩ J)`.
    pub measured: f64,
    /// `σ^{-1} λ(J)`.
    pub bound: f64,
    /// Exact rational comparison `measured <= bound`.
    pub holds: bool,
    /// `Σ λ(B ∩ J)`, which the overlap argument bounds by `σ^{-1}(λ(J) + 2/L)`.
    pub sum_of_measures: f64,
    pub sum_bound: f64,
    pub depth: usize,
}

/// Sum-bound checks over all dyadic intervals of length `2^-k`, `k <= k_max`.
pub fn sum_bound_checks(cylinders: &[Cylinder], len: f64, sigma_inverse: u32, k_max: u32) -> Vec<SumBoundCheck> {
    let arcs = cylinder_arcs(cylinders, 1.0, len);
    let union = ArcUnion::from_arcs(&arcs);
    let s_inv = BigRational::from_integer(BigInt::from(sigma_inverse));
    let mut out = Vec::new();
    for k in 0..=k_max {
        for i in 0..(1u64 << k) {
            let j = Interval::dyadic(k, i).expect("in range");
            let exact_measure = exact_union_measure(&arcs, j);
            let bound_exact = &s_inv * (exact(j.end) - exact(j.start));
            let sum: f64 = arcs.iter().map(|a| union_measure(core::slice::from_ref(a), j)).sum();
            out.push(SumBoundCheck {
                interval: j,
                measured: union.measure_in(j),
                bound: sigma_inverse as f64 * j.length(),
                holds: exact_measure <= bound_exact,
                sum_of_measures: sum,
                sum_bound: sigma_inverse as f64 * (j.length() + 2.0 / len),
                depth: overlap_depth(&arcs, j),
            });
        }
    }
    out
}

/// `|{(θ, T): L <= T < c5 L, θ ∈ J}|` counting both flow directions of
/// each cylinder.
pub fn annulus_count(cylinders: &[Cylinder], len: f64, c5: f64, j: Interval) -> usize {
    cylinders
        .iter()
        .filter(|c| c.core_length >= len && c.core_length < c5 * len)
        .flat_map(|c| c.full_circle_directions())
        .filter(|&t| j.contains(t))
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::square_torus;
    use alloc::vec;

    fn arc(c: f64, r: f64) -> Arc {
        Arc::new(c, r).unwrap()
    }

    #[test]
    fn measures_of_small_unions() {
        let a = [arc(0.15, 0.05), arc(0.225, 0.075)];
        assert!((union_measure(&a, Interval::CIRCLE) - 0.2).abs() < 1e-15);
        assert!((union_measure(&[arc(0.0, 0.1)], Interval::CIRCLE) - 0.2).abs() < 1e-15);
        assert_eq!(union_measure(&[], Interval::CIRCLE), 0.0);
        assert!((union_measure(&[arc(0.0, 0.1)], Interval::new(0.0, 0.5).unwrap()) - 0.1).abs() < 1e-15);
        assert_eq!(union_measure(&a, Interval::new(0.5, 0.5).unwrap()), 0.0);
        let diff = exact_union_measure(&a, Interval::CIRCLE) - exact(0.2);
        assert!(diff < exact(1e-15) && diff > exact(-1e-15));
    }

    #[test]
    fn coverage_and_gaps() {
        assert!(covers_circle(&[arc(0.0, 0.3), arc(0.5, 0.3)]).covered);
        let c = covers_circle(&[arc(0.0, 0.2), arc(0.5, 0.2)]);
        assert!(!c.covered);
        let g = c.largest_gap.unwrap();
        assert!((g.length - 0.1).abs() < 1e-12);
        // two gaps of (nearly) equal length, centered at 1/4 and 3/4
        assert!((g.center - 0.25).abs() < 1e-12 || (g.center - 0.75).abs() < 1e-12);
        assert!(covers_circle(&[arc(0.3, 0.5)]).covered);
        assert!(covers_circle(&[arc(0.3, 7.0)]).covered);
        let none = covers_circle(&[]);
        assert_eq!(none.largest_gap, Some(Gap { center: 0.5, length: 1.0 }));
        // gap across zero
        let g = covers_circle(&[arc(0.5, 0.4)]).largest_gap.unwrap();
        assert!((g.center - 0.0).abs() < 1e-12 && (g.length - 0.2).abs() < 1e-12);
    }

    #[test]
    fn depth_counts_overlaps() {
        let arcs = vec![arc(0.1, 0.05), arc(0.12, 0.05), arc(0.9, 0.3)];
        assert_eq!(overlap_depth(&arcs, Interval::CIRCLE), 3);
        assert_eq!(overlap_depth(&arcs, Interval::new(0.5, 0.55).unwrap()), 0);
    }

    #[test]
    fn torus_covering_constant() {
        let s = square_torus().unwrap();
        let c10 = minimal_covering_constant(&s, 10.0).unwrap();
        assert!(c10 > 0.0 && c10 <= 4.0, "{c10}");
        let cyl = cylinder_sequence(&s, 10.0).unwrap();
        assert!(covers_circle(&cylinder_arcs(&cyl, c10, 10.0)).covered);
        assert!(!covers_circle(&cylinder_arcs(&cyl, c10 - 2e-6, 10.0)).covered);
        assert_eq!(covering_constant_of(&[], 10.0), Err(CircleError::NoCylinders));
    }

    #[test]
    fn torus_sum_bound_and_key() {
        let s = square_torus().unwrap();
        let cyl = cylinder_sequence(&s, 10.0).unwrap();
        let checks = sum_bound_checks(&cyl, 10.0, s.sigma_inverse(), 3);
        assert_eq!(checks.len(), 1 + 2 + 4 + 8);
        assert!(checks.iter().all(|c| c.holds));
        let k = key_bound_report(&s, 50.0, Interval::CIRCLE, 2.0).unwrap();
        assert!(k.measured > 0.0);
        assert!((k.correction - 2.0 / 10_000.0).abs() < 1e-18);
        let k0 = key_bound_report(&s, 50.0, Interval::new(0.3, 0.3).unwrap(), 2.0).unwrap();
        assert_eq!(k0.measured, 0.0);
        assert_eq!(k0.c2_candidate, None);
        // annulus only: nothing shorter than 0.5, some below 2
        let k = key_bound_report(&s, 0.5, Interval::CIRCLE, 4.0).unwrap();
        assert!(k.measured > 0.0 && k.cylinders == 4);
    }
}
