//! Seeded recurrence experiments.
//!
//! Sample `i` draws from its own ChaCha20 stream: the generator is seeded
//! with the master seed and switched to stream `i`. Samples are independent
//! jobs and are reduced in index order, so reports do not depend on the
//! number of worker threads.

use std::f64::consts::TAU;

use flatkhinchin_core::circle::Interval;
use flatkhinchin_core::cylinders::{cylinder_sequence, cylinders_near_direction, Cylinder, CylinderError};
use flatkhinchin_core::flow::{distance, flow_point, FlowError};
use flatkhinchin_core::geom::signed_turn_difference;
use flatkhinchin_core::iet::{first_return_iet, recurrence_scan, IetError, Transversal};
use flatkhinchin_core::series::{divergence_verdict, Sequence, SeriesError, SeriesSide, Thresholds, Verdict};
use flatkhinchin_core::{Direction, SurfacePoint, TranslationSurface, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;

/// Geometric probe grid `t0 * rho^k`.
const GRID_START: f64 = 1.0;
const GRID_RATIO: f64 = 1.05;
/// Attempts per IET sample before it is recorded as failed.
const MAX_REDRAWS: u32 = 100;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("bad configuration: {0}")]
    BadConfig(String),
    #[error("perturbation too large: epsilon = {epsilon}, height = {height}, epsilon/T = {turns} turns")]
    BadPerturbation { epsilon: f64, height: f64, turns: f64 },
    #[error("thread pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Cylinders(#[from] CylinderError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Iet(#[from] IetError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// The generator for sample `index`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Runs `job` over `0..n` on `threads` workers (0 = rayon's default) and
/// returns the results in index order.
pub fn run_indexed<T, F>(n: usize, threads: usize, job: F) -> Result<Vec<T>, ExperimentError>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| ExperimentError::ThreadPool(e.to_string()))?;
    Ok(pool.install(|| (0..n).into_par_iter().map(&job).collect()))
}

/// A point uniformly distributed on the surface.
pub fn random_point<R: Rng>(surface: &TranslationSurface, rng: &mut R) -> SurfacePoint {
    let total = surface.total_area();
    let mut pick = rng.random::<f64>() * total;
    let mut poly = surface.polygons().len() - 1;
    for (i, p) in surface.polygons().iter().enumerate() {
        if pick < p.area() {
            poly = i;
            break;
        }
        pick -= p.area();
    }
    let p = surface.polygon(poly);
    let (mut lo, mut hi) = (p.vertex(0), p.vertex(0));
    for i in 1..p.len() {
        let v = p.vertex(i);
        lo = Vec2::new(lo.x.min(v.x), lo.y.min(v.y));
        hi = Vec2::new(hi.x.max(v.x), hi.y.max(v.y));
    }
    loop {
        let q = Vec2::new(
            lo.x + (hi.x - lo.x) * rng.random::<f64>(),
            lo.y + (hi.y - lo.y) * rng.random::<f64>(),
        );
        if p.contains(q, 0.0) {
            return SurfacePoint::new(poly, q);
        }
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

// ---------------------------------------------------------------------------
// flow recurrence

#[derive(Clone, Debug, Serialize)]
pub struct FlowConfig {
    pub surface: String,
    /// Target function `f(t)`, in sequence syntax (`power:1,1` is `1/t`).
    pub f: String,
    pub samples: usize,
    pub horizon: f64,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FlowHit {
    pub t: f64,
    pub distance: f64,
    pub target: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowSample {
    pub index: usize,
    pub theta: f64,
    pub polygon: usize,
    pub x: [f64; 2],
    pub probes: usize,
    pub cylinder_probes: usize,
    pub hits: Vec<FlowHit>,
    pub first_hit_time: Option<f64>,
    /// `min d / f(t)` over all probes.
    pub min_ratio: Option<f64>,
    /// Some hit at `t >= horizon / 10`.
    pub success: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FlowAggregate {
    pub samples: usize,
    pub failed: usize,
    pub successes: usize,
    /// Fraction of samples with a hit at `t >= horizon / 10`.
    pub hit_fraction: f64,
    /// Fraction with any hit at all; unlike `hit_fraction` this can only
    /// grow with the horizon.
    pub any_hit_fraction: f64,
    pub median_hits: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FlowReport {
    pub schema_version: u32,
    pub experiment: &'static str,
    pub config: FlowConfig,
    pub aggregate: FlowAggregate,
    pub samples: Vec<FlowSample>,
}

/// Probe times predicted by nearby cylinders: a point of a cylinder of
/// length `T` in direction `tau` comes back after `k T |sec 2π(θ - tau)|`
/// displaced by `k T |tan 2π(θ - tau)|` along the core.
fn cylinder_probe_times(cyls: &[Cylinder], theta: f64, horizon: f64, f: &Sequence) -> Vec<f64> {
    let mut out = Vec::new();
    for c in cyls {
        for tau in c.full_circle_directions() {
            let delta = signed_turn_difference(theta, tau);
            if delta.abs() >= 0.125 {
                continue;
            }
            let sec = 1.0 / (TAU * delta).cos();
            let drift = (TAU * delta).tan().abs() * c.core_length;
            for k in 1u32.. {
                let t = f64::from(k) * c.core_length * sec;
                if t > horizon {
                    break;
                }
                match f.at(t.max(1.0)) {
                    Some(ft) if f64::from(k) * drift < 2.0 * ft => out.push(t),
                    _ => break,
                }
            }
        }
    }
    out
}

fn flow_sample(surface: &TranslationSurface, f: &Sequence, horizon: f64, seed: u64, index: usize) -> FlowSample {
    let mut rng = sample_rng(seed, index as u64);
    let theta: f64 = rng.random();
    let x = random_point(surface, &mut rng);
    let mut sample = FlowSample {
        index,
        theta,
        polygon: x.polygon,
        x: [x.pos.x, x.pos.y],
        probes: 0,
        cylinder_probes: 0,
        hits: Vec::new(),
        first_hit_time: None,
        min_ratio: None,
        success: false,
        error: None,
    };
    let dir = Direction::new(theta);
    let keep = |s: f64, d: f64| f.at(s.max(1.0)).is_some_and(|ft| d <= 2.0 * ft);
    let mut times = match cylinders_near_direction(surface, dir, horizon, keep) {
        Ok(cyls) => cylinder_probe_times(&cyls, theta, horizon, f),
        Err(e) => {
            sample.error = Some(e.to_string());
            Vec::new()
        }
    };
    sample.cylinder_probes = times.len();
    let mut t = GRID_START;
    while t <= horizon {
        times.push(t);
        t *= GRID_RATIO;
    }
    times.sort_by(f64::total_cmp);
    times.dedup();
    sample.probes = times.len();

    // flow incrementally from probe to probe
    let mut y = x;
    let mut at = 0.0;
    for &t in &times {
        y = match flow_point(surface, y, dir, t - at) {
            Ok(p) => p,
            Err(e) => {
                sample.error.get_or_insert(e.to_string());
                break;
            }
        };
        at = t;
        let Some(ft) = f.at(t.max(1.0)) else { break };
        if let Some(d) = distance(surface, x, y, ft) {
            let ratio = d / ft;
            sample.min_ratio = Some(sample.min_ratio.map_or(ratio, |m: f64| m.min(ratio)));
            if d < ft {
                sample.hits.push(FlowHit {
                    t,
                    distance: d,
                    target: ft,
                });
            }
        }
    }
    sample.first_hit_time = sample.hits.first().map(|h| h.t);
    sample.success = sample.hits.iter().any(|h| h.t >= horizon / 10.0);
    sample
}

/// For sampled `(θ, x)`, probes `d(F_θ^t x, x) < f(t)` on a geometric time
/// grid plus the return times of cylinders near `θ`.
pub fn run_khinchin_flow(
    surface: &TranslationSurface,
    f: &Sequence,
    config: FlowConfig,
    threads: usize,
) -> Result<FlowReport, ExperimentError> {
    if config.samples == 0 {
        return Err(ExperimentError::BadConfig("need at least one sample".into()));
    }
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must be rejected
    if !(config.horizon >= 1.0) || !config.horizon.is_finite() {
        return Err(ExperimentError::BadConfig("horizon must be finite and >= 1".into()));
    }
    f.validate(1000)?;
    let (horizon, seed) = (config.horizon, config.seed);
    let samples = run_indexed(config.samples, threads, |i| flow_sample(surface, f, horizon, seed, i))?;
    let failed = samples.iter().filter(|s| s.error.is_some() && s.hits.is_empty()).count();
    let successes = samples.iter().filter(|s| s.success).count();
    let aggregate = FlowAggregate {
        samples: samples.len(),
        failed,
        successes,
        hit_fraction: successes as f64 / samples.len() as f64,
        any_hit_fraction: samples.iter().filter(|s| !s.hits.is_empty()).count() as f64 / samples.len() as f64,
        median_hits: median(samples.iter().map(|s| s.hits.len() as f64).collect()),
    };
    Ok(FlowReport {
        schema_version: SCHEMA_VERSION,
        experiment: "khinchin-flow",
        config,
        aggregate,
        samples,
    })
}

// ---------------------------------------------------------------------------
// IET recurrence

#[derive(Clone, Debug, Serialize)]
pub struct IetConfig {
    pub surface: String,
    pub a: String,
    pub samples: usize,
    pub n: u64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IetSample {
    pub index: usize,
    pub theta: f64,
    pub x: f64,
    pub redraws: u32,
    /// Why each redrawn attempt was rejected.
    pub redraw_reasons: Vec<String>,
    pub intervals: usize,
    pub hits: Vec<u64>,
    pub hit_count: usize,
    pub min_ratio: Option<f64>,
    pub tail_min_ratio: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct IetAggregate {
    pub samples: usize,
    pub failed: usize,
    pub median_hits: Option<f64>,
    /// Fraction of samples with `min_n |T^n x - x| / a_n < 1`.
    pub min_ratio_below_one: f64,
    pub sum_verdict: &'static str,
    /// Set when `Σ a_n` looks convergent, i.e. outside the theorem.
    pub hypothesis_violated: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct IetReport {
    pub schema_version: u32,
    pub experiment: &'static str,
    pub config: IetConfig,
    pub transversal: TransversalInfo,
    pub aggregate: IetAggregate,
    pub samples: Vec<IetSample>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TransversalInfo {
    pub polygon: usize,
    pub base: [f64; 2],
    pub direction: f64,
    pub length: f64,
}

/// The core curve of the shortest cylinder: a closed transversal that
/// avoids every cone point. Falls back to edge 0 of polygon 0 on surfaces
/// without singularities.
pub fn default_transversal(surface: &TranslationSurface) -> Transversal {
    let mut len = 2.0 * surface.shortest_edge();
    while len <= 64.0 * surface.scale() {
        match cylinder_sequence(surface, len) {
            Ok(cyls) if !cyls.is_empty() => {
                let c = &cyls[0];
                return Transversal::new(c.witness, Direction::from_vector(c.core_direction()), c.core_length);
            }
            Ok(_) => len *= 2.0,
            Err(_) => break,
        }
    }
    let p = surface.polygon(0);
    let e = p.edge_vector(0);
    Transversal::new(SurfacePoint::new(0, p.vertex(0)), Direction::from_vector(e), e.norm())
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn iet_sample(
    surface: &TranslationSurface,
    transversal: &Transversal,
    seq: &Sequence,
    n: u64,
    seed: u64,
    index: usize,
) -> IetSample {
    let mut rng = sample_rng(seed, index as u64);
    let mut reasons = Vec::new();
    loop {
        let theta: f64 = rng.random();
        let attempt = first_return_iet(surface, Direction::new(theta), transversal).and_then(|fr| {
            let x = rng.random::<f64>() * fr.iet.domain_length();
            let scan = recurrence_scan(&fr.iet, x, seq, n)?;
            Ok((x, fr.iet.breakpoints().len() + 1, scan))
        });
        match attempt {
            Ok((x, intervals, scan)) => {
                return IetSample {
                    index,
                    theta,
                    x,
                    redraws: reasons.len() as u32,
                    redraw_reasons: reasons,
                    intervals,
                    hit_count: scan.hits.len(),
                    hits: scan.hits.iter().map(|h| h.n).collect(),
                    min_ratio: finite(scan.min_ratio),
                    tail_min_ratio: finite(scan.tail_min_ratio),
                    error: None,
                }
            }
            Err(e) => {
                reasons.push(format!("theta={theta}: {e}"));
                if reasons.len() as u32 >= MAX_REDRAWS {
                    return IetSample {
                        index,
                        theta,
                        x: 0.0,
                        redraws: reasons.len() as u32,
                        redraw_reasons: reasons,
                        intervals: 0,
                        hits: Vec::new(),
                        hit_count: 0,
                        min_ratio: None,
                        tail_min_ratio: None,
                        error: Some(e.to_string()),
                    };
                }
            }
        }
    }
}

/// Random directions, first-return maps to `transversal` and a shrinking
/// target scan `|T^n x - x| < a_n` for each.
pub fn run_iet_khinchin(
    surface: &TranslationSurface,
    seq: &Sequence,
    transversal: &Transversal,
    config: IetConfig,
    threads: usize,
) -> Result<IetReport, ExperimentError> {
    if config.samples == 0 || config.n == 0 {
        return Err(ExperimentError::BadConfig("need at least one sample and N >= 1".into()));
    }
    seq.validate(config.n.min(1_000_000))?;
    let verdict = match seq {
        Sequence::Explicit(_) => None,
        _ => Some(divergence_verdict(seq, SeriesSide::Plain, Thresholds::default())?.verdict),
    };
    let (n, seed) = (config.n, config.seed);
    let samples = run_indexed(config.samples, threads, |i| iet_sample(surface, transversal, seq, n, seed, i))?;
    let ok: Vec<&IetSample> = samples.iter().filter(|s| s.error.is_none()).collect();
    let below = ok.iter().filter(|s| s.min_ratio.is_some_and(|r| r < 1.0)).count();
    let aggregate = IetAggregate {
        samples: samples.len(),
        failed: samples.len() - ok.len(),
        median_hits: median(ok.iter().map(|s| s.hit_count as f64).collect()),
        min_ratio_below_one: if ok.is_empty() { 0.0 } else { below as f64 / ok.len() as f64 },
        sum_verdict: verdict.map_or("not_evaluated", |v| v.as_str()),
        hypothesis_violated: verdict == Some(Verdict::ConvergesEmpirically),
    };
    let base = transversal.base;
    Ok(IetReport {
        schema_version: SCHEMA_VERSION,
        experiment: "iet-recurrence",
        config,
        transversal: TransversalInfo {
            polygon: base.polygon,
            base: [base.pos.x, base.pos.y],
            direction: transversal.direction.tau(),
            length: transversal.length,
        },
        aggregate,
        samples,
    })
}

// ---------------------------------------------------------------------------
// translation lemma

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TranslationCheck {
    pub tau: f64,
    pub core_length: f64,
    pub height: f64,
    pub area_fraction: f64,
    pub epsilon: f64,
    /// Perturbed flow direction `tau + epsilon / T`.
    pub phi: f64,
    /// Return time `T |sec 2π(phi - tau)|`.
    pub time: f64,
    pub samples: usize,
    pub failed: usize,
    pub fraction_2eps: f64,
    pub fraction_10eps: f64,
    /// Largest displacement seen among points that came back within `20ε`.
    pub max_displacement: f64,
    pub median_displacement_over_eps: Option<f64>,
    /// `a / 4`.
    pub required: f64,
    /// Binomial standard deviation of a fraction `a / 4` over `samples`.
    pub sigma: f64,
    pub passes_2eps: bool,
    pub passes_10eps: bool,
}

/// Flows uniformly sampled points of `cyl` in the direction `tau + ε/T` for
/// time `T |sec|` and measures how far they land from where they started.
pub fn run_lemma_translation_check(
    surface: &TranslationSurface,
    cyl: &Cylinder,
    epsilon: f64,
    samples: usize,
    seed: u64,
    threads: usize,
) -> Result<TranslationCheck, ExperimentError> {
    let t = cyl.core_length;
    let turns = epsilon / t;
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(epsilon > 0.0) || epsilon >= 0.5 * cyl.height || turns >= 0.25 {
        return Err(ExperimentError::BadPerturbation {
            epsilon,
            height: cyl.height,
            turns,
        });
    }
    if samples == 0 {
        return Err(ExperimentError::BadConfig("need at least one sample".into()));
    }
    let tau = Direction::from_vector(cyl.core_direction()).tau();
    let phi = Direction::new(tau + turns);
    let time = t / (TAU * turns).cos().abs();
    let radius = 20.0 * epsilon;
    let results = run_indexed(samples, threads, |i| -> Result<Option<f64>, FlowError> {
        let mut rng = sample_rng(seed, i as u64);
        let s = rng.random::<f64>() * t;
        let w = (rng.random::<f64>() - 0.5) * cyl.height;
        let x = cyl.point_at(surface, s, w)?;
        let y = flow_point(surface, x, phi, time)?;
        Ok(distance(surface, x, y, radius))
    })?;
    let failed = results.iter().filter(|r| r.is_err()).count();
    let d: Vec<f64> = results.iter().filter_map(|r| (*r).ok().flatten()).collect();
    let frac = |k: f64| d.iter().filter(|&&x| x < k * epsilon).count() as f64 / samples as f64;
    let required = 0.25 * cyl.area_fraction;
    let sigma = (required * (1.0 - required) / samples as f64).sqrt();
    let (f2, f10) = (frac(2.0), frac(10.0));
    Ok(TranslationCheck {
        tau,
        core_length: t,
        height: cyl.height,
        area_fraction: cyl.area_fraction,
        epsilon,
        phi: phi.tau(),
        time,
        samples,
        failed,
        fraction_2eps: f2,
        fraction_10eps: f10,
        max_displacement: d.iter().copied().fold(0.0, f64::max),
        median_displacement_over_eps: median(d.iter().map(|x| x / epsilon).collect()),
        required,
        sigma,
        passes_2eps: f2 >= required - 2.0 * sigma,
        passes_10eps: f10 >= required - 2.0 * sigma,
    })
}

/// `J` given as `start,end` in turns.
pub fn parse_interval(s: &str) -> Result<Interval, ExperimentError> {
    let bad = || ExperimentError::BadConfig(format!("bad interval `{s}` (expected START,END in [0,1])"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    Interval::new(a, b).ok_or_else(bad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use flatkhinchin_core::builtin::square_torus;
    use flatkhinchin_core::cylinders::enumerate_cylinders;

    #[test]
    fn streams_differ_and_repeat() {
        let a: u64 = sample_rng(7, 0).random();
        let b: u64 = sample_rng(7, 1).random();
        assert_ne!(a, b);
        assert_eq!(a, sample_rng(7, 0).random::<u64>());
    }

    #[test]
    fn random_points_lie_on_the_surface() {
        let s = flatkhinchin_core::builtin::l_shape(2.0, 2.0).unwrap();
        let mut rng = sample_rng(1, 0);
        for _ in 0..1000 {
            let p = random_point(&s, &mut rng);
            assert!(s.polygon(p.polygon).contains(p.pos, 0.0));
        }
    }

    #[test]
    fn constant_target_is_always_hit() {
        let s = square_torus().unwrap();
        let f: Sequence = "power:10,0".parse().unwrap();
        let cfg = FlowConfig {
            surface: "torus".into(),
            f: f.to_string(),
            samples: 8,
            horizon: 10.0,
            seed: 3,
        };
        let r = run_khinchin_flow(&s, &f, cfg, 2).unwrap();
        assert_eq!(r.aggregate.hit_fraction, 1.0);
    }

    #[test]
    fn translation_guard() {
        let s = square_torus().unwrap();
        let cyl = &enumerate_cylinders(&s, 1.5, 0.5).unwrap()[0];
        assert!(matches!(
            run_lemma_translation_check(&s, cyl, 0.6, 10, 0, 1),
            Err(ExperimentError::BadPerturbation { .. })
        ));
        let ok = run_lemma_translation_check(&s, cyl, 0.01, 200, 0, 1).unwrap();
        // on the torus every point is displaced by exactly T tan(2π ε / T)
        assert_eq!(ok.fraction_10eps, 1.0);
        assert!((ok.max_displacement - (TAU * 0.01).tan()).abs() < 1e-9);
    }

    #[test]
    fn interval_parsing() {
        let j = parse_interval("0.25, 0.5").unwrap();
        assert_eq!((j.start, j.end), (0.25, 0.5));
        assert!(parse_interval("0.5").is_err());
    }
}
