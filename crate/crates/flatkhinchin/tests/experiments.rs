use flatkhinchin::experiments::{
    default_transversal, run_iet_khinchin, run_khinchin_flow, FlowConfig, FlowReport, IetConfig, IetReport,
};
use flatkhinchin::surface_file::{parse_surface_json, surface_to_json};
use flatkhinchin_core::builtin::{l_shape, square_torus};
use flatkhinchin_core::series::Sequence;
use flatkhinchin_core::TranslationSurface;
use proptest::prelude::*;

fn flow(s: &TranslationSurface, f: &str, samples: usize, horizon: f64) -> FlowReport {
    let f: Sequence = f.parse().unwrap();
    let cfg = FlowConfig {
        surface: String::new(),
        f: f.to_string(),
        samples,
        horizon,
        seed: 8,
    };
    run_khinchin_flow(s, &f, cfg, 1).unwrap()
}

fn iet(s: &TranslationSurface, a: &str, samples: usize, n: u64) -> IetReport {
    let a: Sequence = a.parse().unwrap();
    let cfg = IetConfig {
        surface: String::new(),
        a: a.to_string(),
        samples,
        n,
        seed: 8,
    };
    run_iet_khinchin(s, &a, &default_transversal(s), cfg, 1).unwrap()
}

#[test]
fn larger_targets_hit_at_least_as_often() {
    let s = square_torus().unwrap();
    let one = iet(&s, "harmonic:1", 30, 20_000);
    let two = iet(&s, "harmonic:2", 30, 20_000);
    for (a, b) in one.samples.iter().zip(&two.samples) {
        assert_eq!(a.theta, b.theta);
        assert!(b.hit_count >= a.hit_count);
        assert!(a.hits.iter().all(|n| b.hits.contains(n)));
    }
    let small = iet(&s, "power:1,2", 30, 20_000);
    let fewer = small.samples.iter().zip(&one.samples).filter(|(c, a)| c.hit_count < a.hit_count).count();
    assert!(fewer > 20, "{fewer}");
    assert!(small.aggregate.hypothesis_violated);
}

#[test]
fn flow_hits_grow_with_target() {
    let s = l_shape(2.0, 2.0).unwrap();
    let one = flow(&s, "power:1,1", 12, 500.0);
    let two = flow(&s, "power:2,1", 12, 500.0);
    for (a, b) in one.samples.iter().zip(&two.samples) {
        assert!(b.hits.len() >= a.hits.len(), "sample {}", a.index);
    }
}

#[test]
fn any_hit_fraction_grows_with_horizon() {
    let s = square_torus().unwrap();
    let ladder: Vec<f64> = [30.0, 300.0, 3000.0]
        .iter()
        .map(|&h| flow(&s, "power:1,1", 40, h).aggregate.any_hit_fraction)
        .collect();
    assert!(ladder.windows(2).all(|w| w[1] >= w[0]), "{ladder:?}");
}

#[test]
fn torus_iet_battery() {
    // every slope has infinitely many n with n‖nα‖ < 1/√5, so the scan
    // should see plenty of hits and ratios below 1
    let r = iet(&square_torus().unwrap(), "harmonic:1", 100, 100_000);
    assert!(r.aggregate.median_hits.unwrap() >= 5.0);
    assert!(r.aggregate.min_ratio_below_one >= 0.95);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn surface_json_round_trips(a in 1.01f64..5.0, b in 1.01f64..5.0) {
        let s = l_shape(a, b).unwrap();
        let back = parse_surface_json(&surface_to_json(&s)).unwrap();
        prop_assert_eq!(back.polygons(), s.polygons());
        prop_assert_eq!(back.gluings(), s.gluings());
        prop_assert_eq!(back.genus(), s.genus());
        prop_assert_eq!(back.classes(), s.classes());
    }
}
