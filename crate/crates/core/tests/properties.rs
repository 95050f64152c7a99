use flatkhinchin_core::builtin::{l_shape, square_torus};
use flatkhinchin_core::circle::{exact_union_measure, union_measure, Arc, ArcUnion, Interval};
use flatkhinchin_core::flow::{distance, flow_point, FlowError};
use flatkhinchin_core::geom::circle_distance;
use flatkhinchin_core::iet::{Iet, Metric};
use flatkhinchin_core::series::Sequence;
use flatkhinchin_core::{Direction, SurfacePoint, TranslationSurface, Vec2};
use proptest::prelude::*;

fn surfaces() -> [TranslationSurface; 2] {
    [square_torus().unwrap(), l_shape(2.0, 2.0).unwrap()]
}

/// A point of the unit square (polygon 0 of both fixtures), kept away from
/// the boundary.
fn interior() -> impl Strategy<Value = SurfacePoint> {
    (0.001f64..0.999, 0.001f64..0.999).prop_map(|(x, y)| SurfacePoint::new(0, Vec2::new(x, y)))
}

fn close(s: &TranslationSurface, a: SurfacePoint, b: SurfacePoint, tol: f64) -> bool {
    s.same_point(a, b, tol)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn flow_is_reversible(which in 0usize..2, x in interior(), tau in 0.0f64..1.0, t in 0.0f64..200.0) {
        let s = &surfaces()[which];
        let dir = Direction::new(tau);
        match flow_point(s, x, dir, t) {
            Ok(y) => {
                let back = flow_point(s, y, dir, -t);
                prop_assume!(!matches!(back, Err(FlowError::SingularityHit { .. })));
                prop_assert!(close(s, back.unwrap(), x, 1e-8));
            }
            Err(FlowError::SingularityHit { .. }) => {}
            Err(e) => prop_assert!(false, "{e}"),
        }
    }

    #[test]
    fn flow_is_additive(which in 0usize..2, x in interior(), tau in 0.0f64..1.0,
                        t1 in 0.0f64..100.0, t2 in 0.0f64..100.0) {
        let s = &surfaces()[which];
        let dir = Direction::new(tau);
        let whole = flow_point(s, x, dir, t1 + t2);
        let split = flow_point(s, x, dir, t1).and_then(|y| flow_point(s, y, dir, t2));
        match (whole, split) {
            (Ok(a), Ok(b)) => prop_assert!(close(s, a, b, 1e-8)),
            (Err(FlowError::SingularityHit { .. }), _) | (_, Err(FlowError::SingularityHit { .. })) => {}
            (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
        }
    }

    #[test]
    fn torus_flow_is_translation_mod_one(x in interior(), tau in 0.0f64..1.0, t in 0.0f64..1000.0) {
        let s = square_torus().unwrap();
        let dir = Direction::new(tau);
        if let Ok(y) = flow_point(&s, x, dir, t) {
            let u = dir.unit();
            prop_assert!(circle_distance(y.pos.x, x.pos.x + t * u.x) < 1e-9);
            prop_assert!(circle_distance(y.pos.y, x.pos.y + t * u.y) < 1e-9);
        }
    }

    #[test]
    fn torus_distance_matches_lattice(x in interior(), y in interior()) {
        let s = square_torus().unwrap();
        let dx = circle_distance(x.pos.x, y.pos.x);
        let dy = circle_distance(x.pos.y, y.pos.y);
        let d = distance(&s, x, y, 2.0).unwrap();
        prop_assert!((d - dx.hypot(dy)).abs() < 1e-9, "{d} vs {}", dx.hypot(dy));
    }

    #[test]
    fn distance_is_symmetric_and_triangular(which in 0usize..2, x in interior(), y in interior(), z in interior()) {
        let s = &surfaces()[which];
        let r = 3.0;
        let dxy = distance(s, x, y, r).unwrap();
        let dyx = distance(s, y, x, r).unwrap();
        let dyz = distance(s, y, z, r).unwrap();
        let dxz = distance(s, x, z, r).unwrap();
        prop_assert!((dxy - dyx).abs() < 1e-9);
        prop_assert!(dxz <= dxy + dyz + 1e-9);
    }
}

fn arcs() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0f64..1.0, 1e-4f64..0.3), 0..12)
}

fn build(v: &[(f64, f64)]) -> Vec<Arc> {
    v.iter().filter_map(|&(c, r)| Arc::new(c, r)).collect()
}

proptest! {
    #[test]
    fn arc_union_is_monotone_and_subadditive(v in arcs(), extra in (0.0f64..1.0, 1e-4f64..0.3)) {
        let a = build(&v);
        let m = ArcUnion::from_arcs(&a).measure();
        let total: f64 = a.iter().map(|x| 2.0 * x.radius()).sum();
        prop_assert!(m <= total.min(1.0) + 1e-12);
        prop_assert!(a.iter().all(|x| m + 1e-12 >= 2.0 * x.radius()));
        let mut b = a.clone();
        b.extend(Arc::new(extra.0, extra.1));
        prop_assert!(ArcUnion::from_arcs(&b).measure() + 1e-12 >= m);
    }

    #[test]
    fn interval_measures_add_up(v in arcs(), cut in 0.0f64..1.0) {
        let a = build(&v);
        let left = union_measure(&a, Interval::new(0.0, cut).unwrap());
        let right = union_measure(&a, Interval::new(cut, 1.0).unwrap());
        let whole = union_measure(&a, Interval::CIRCLE);
        prop_assert!((left + right - whole).abs() < 1e-12);
        prop_assert!(left <= cut + 1e-12);
    }

    #[test]
    fn exact_and_float_measures_agree(v in arcs(), k in 0u32..4, i in 0u64..16) {
        let a = build(&v);
        let j = Interval::dyadic(k, i % (1 << k)).unwrap();
        let exact = exact_union_measure(&a, j);
        let approx = union_measure(&a, j);
        let (n, d) = (exact.numer().to_string(), exact.denom().to_string());
        let e: f64 = n.parse::<f64>().unwrap() / d.parse::<f64>().unwrap();
        prop_assert!((e - approx).abs() < 1e-12);
    }
}

/// An IET from lengths and a permutation (image order).
fn iet_strategy() -> impl Strategy<Value = Iet> {
    (2usize..6)
        .prop_flat_map(|n| (prop::collection::vec(0.05f64..1.0, n), Just((0..n).collect::<Vec<_>>()).prop_shuffle()))
        .prop_map(|(lens, perm)| {
            let total: f64 = lens.iter().sum();
            let mut starts = vec![0.0];
            for l in &lens {
                starts.push(starts.last().unwrap() + l);
            }
            // piece perm[k] is the k-th piece of the image
            let mut image_start = vec![0.0; lens.len()];
            let mut at = 0.0;
            for &p in &perm {
                image_start[p] = at;
                at += lens[p];
            }
            let translations = (0..lens.len()).map(|i| image_start[i] - starts[i]).collect();
            Iet::new(total, starts[1..lens.len()].to_vec(), translations, Metric::Interval).unwrap()
        })
}

proptest! {
    #[test]
    fn iet_inverse_undoes_forward(iet in iet_strategy(), frac in 0.0f64..1.0, n in 1i64..50) {
        let x = frac * iet.domain_length();
        if let Ok(y) = iet.apply(x, n) {
            prop_assert!((0.0..iet.domain_length()).contains(&y));
            let back = iet.apply(y, -n);
            prop_assume!(back.is_ok());
            prop_assert!((back.unwrap() - x).abs() < 1e-9);
        }
    }

    #[test]
    fn rotation_has_closed_form(alpha in 0.0f64..1.0, x in 0.0f64..1.0, n in 0i64..1000) {
        let r = Iet::rotation(alpha);
        if let Ok(y) = r.apply(x, n) {
            prop_assert!(circle_distance(y, x + n as f64 * alpha) < 1e-9);
        }
    }

    #[test]
    fn sequence_text_round_trips(kind in 0usize..4, c in 0.01f64..100.0, p in 0.0f64..4.0,
                                 list in prop::collection::vec(0.001f64..10.0, 1..8)) {
        let seq = match kind {
            0 => Sequence::Harmonic { c },
            1 => Sequence::Power { c, p },
            2 => Sequence::Log { c, q: p },
            _ => Sequence::Explicit(list),
        };
        let back: Sequence = seq.to_string().parse().unwrap();
        prop_assert_eq!(back, seq);
    }
}
