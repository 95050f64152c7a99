//! Reports for the `verify` subcommands.

use flatkhinchin_core::circle::{covering_constant_of, key_bound_report, sum_bound_checks, CircleError, Interval};
use flatkhinchin_core::cylinders::{
    check_separation, cylinder_sequence, enumerate_cylinders, vorobets_constant, Cylinder, CylinderError,
};
use flatkhinchin_core::TranslationSurface;
use serde::Serialize;

use crate::experiments::{run_lemma_translation_check, ExperimentError, TranslationCheck, SCHEMA_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error(transparent)]
    Cylinders(#[from] CylinderError),
    #[error(transparent)]
    Circle(#[from] CircleError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
}

/// All cylinders of any area below `max_len`.
pub fn all_cylinders(surface: &TranslationSurface, max_len: f64) -> Result<Vec<Cylinder>, CylinderError> {
    enumerate_cylinders(surface, max_len, f64::MIN_POSITIVE)
}

#[derive(Clone, Debug, Serialize)]
pub struct Violation {
    pub crossed: usize,
    pub crossing: usize,
    pub required: f64,
    pub length: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LemmaFlowReport {
    pub schema_version: u32,
    pub check: &'static str,
    pub surface: String,
    pub max_length: f64,
    pub cylinders: usize,
    pub pairs_checked: usize,
    pub intersecting_pairs: usize,
    pub violations: Vec<Violation>,
    /// Violations of the same inequality with the constant replaced by 1.
    pub unit_constant_violations: usize,
    pub min_ratio: Option<f64>,
    pub pass: bool,
}

/// Crossing-time check over every intersecting pair of cylinders shorter
/// than `max_len`.
pub fn verify_lemma_flow(
    surface: &TranslationSurface,
    name: &str,
    max_len: f64,
) -> Result<LemmaFlowReport, VerifyError> {
    let cyls = all_cylinders(surface, max_len)?;
    let r = check_separation(surface, &cyls);
    Ok(LemmaFlowReport {
        schema_version: SCHEMA_VERSION,
        check: "lemma-flow",
        surface: name.to_string(),
        max_length: max_len,
        cylinders: r.cylinders,
        pairs_checked: r.pairs_checked,
        intersecting_pairs: r.intersecting_pairs,
        pass: r.violations.is_empty(),
        violations: r
            .violations
            .iter()
            .map(|v| Violation {
                crossed: v.crossed,
                crossing: v.crossing,
                required: v.required,
                length: v.length,
            })
            .collect(),
        unit_constant_violations: r.unit_constant_violations,
        min_ratio: r.min_ratio.is_finite().then_some(r.min_ratio),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CoveringEntry {
    pub length: f64,
    pub cylinders: usize,
    pub constant: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CoveringReport {
    pub schema_version: u32,
    pub check: &'static str,
    pub surface: String,
    pub entries: Vec<CoveringEntry>,
    pub multiplicity_sum: u32,
    pub shortest_saddle: f64,
    /// `log2` of the theoretical constant `2^(2^(4m)) sqrt(s)`.
    pub theoretical_log2: f64,
    /// The theoretical constant, when it fits in an `f64`.
    pub theoretical: Option<f64>,
    /// max / min of the measured constants.
    pub spread: f64,
    pub within_factor_two: bool,
    pub bounded_by_theory: bool,
    pub pass: bool,
}

/// Minimal covering constants at each length, compared with each other and
/// with the theoretical constant.
pub fn verify_covering(
    surface: &TranslationSurface,
    name: &str,
    lengths: &[f64],
) -> Result<CoveringReport, VerifyError> {
    let mut entries = Vec::new();
    for &len in lengths {
        let cyls = cylinder_sequence(surface, len)?;
        let c = covering_constant_of(&cyls, len)?;
        entries.push(CoveringEntry {
            length: len,
            cylinders: cyls.len(),
            constant: c,
        });
    }
    let vc = vorobets_constant(surface)?;
    let max = entries.iter().map(|e| e.constant).fold(f64::MIN, f64::max);
    let min = entries.iter().map(|e| e.constant).fold(f64::MAX, f64::min);
    let spread = if entries.is_empty() { 1.0 } else { max / min };
    let bounded = entries.iter().all(|e| vc.bounds(e.constant));
    Ok(CoveringReport {
        schema_version: SCHEMA_VERSION,
        check: "covering",
        surface: name.to_string(),
        multiplicity_sum: vc.multiplicity_sum,
        shortest_saddle: vc.shortest_saddle,
        theoretical_log2: vc.log2,
        theoretical: vc.value(),
        spread,
        within_factor_two: spread <= 2.0,
        bounded_by_theory: bounded,
        pass: spread <= 2.0 && bounded,
        entries,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SumBoundEntry {
    pub length: f64,
    pub cylinders: usize,
    pub intervals: usize,
    /// Intervals where the exact union inequality fails.
    pub failures: usize,
    /// `max measured / bound`.
    pub worst_ratio: f64,
    /// Intervals where `Σ λ(B ∩ J) <= σ^{-1}(λ(J) + 2/L)` fails; reported only.
    pub sum_form_failures: usize,
    pub max_depth: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SumBoundReport {
    pub schema_version: u32,
    pub check: &'static str,
    pub surface: String,
    pub sigma_inverse: u32,
    pub k_max: u32,
    pub entries: Vec<SumBoundEntry>,
    pub pass: bool,
}

/// `λ(∪ B(θ, 1/(TL)) ∩ J) <= σ^{-1} λ(J)` over dyadic `J` of length `2^-k`.
pub fn verify_sum_bound(
    surface: &TranslationSurface,
    name: &str,
    lengths: &[f64],
    k_max: u32,
) -> Result<SumBoundReport, VerifyError> {
    let s_inv = surface.sigma_inverse();
    let mut entries = Vec::new();
    for &len in lengths {
        let cyls = cylinder_sequence(surface, len)?;
        let checks = sum_bound_checks(&cyls, len, s_inv, k_max);
        entries.push(SumBoundEntry {
            length: len,
            cylinders: cyls.len(),
            intervals: checks.len(),
            failures: checks.iter().filter(|c| !c.holds).count(),
            worst_ratio: checks.iter().map(|c| c.measured / c.bound).fold(0.0, f64::max),
            sum_form_failures: checks.iter().filter(|c| c.sum_of_measures > c.sum_bound).count(),
            max_depth: checks.iter().map(|c| c.depth).max().unwrap_or(0),
        });
    }
    Ok(SumBoundReport {
        schema_version: SCHEMA_VERSION,
        check: "sum-bound",
        surface: name.to_string(),
        sigma_inverse: s_inv,
        k_max,
        pass: entries.iter().all(|e| e.failures == 0),
        entries,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct KeyReport {
    pub schema_version: u32,
    pub check: &'static str,
    pub surface: String,
    pub n: f64,
    pub c1: f64,
    pub interval: [f64; 2],
    pub cylinders: usize,
    pub measured: f64,
    pub correction: f64,
    pub c2_candidate: Option<f64>,
}

pub fn verify_key(
    surface: &TranslationSurface,
    name: &str,
    n: f64,
    j: Interval,
    c1: f64,
) -> Result<KeyReport, VerifyError> {
    let k = key_bound_report(surface, n, j, c1)?;
    Ok(KeyReport {
        schema_version: SCHEMA_VERSION,
        check: "key",
        surface: name.to_string(),
        n,
        c1,
        interval: [j.start, j.end],
        cylinders: k.cylinders,
        measured: k.measured,
        correction: k.correction,
        c2_candidate: k.c2_candidate,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TranslationReport {
    pub schema_version: u32,
    pub check: &'static str,
    pub surface: String,
    pub epsilon: f64,
    pub samples: usize,
    pub seed: u64,
    pub checks: Vec<TranslationCheck>,
    /// Every cylinder passes at the `10ε` threshold.
    pub pass: bool,
}

/// The first `count` cylinders (by length) whose height exceeds `2ε`.
pub fn translation_cylinders(
    surface: &TranslationSurface,
    epsilon: f64,
    count: usize,
) -> Result<Vec<Cylinder>, CylinderError> {
    let mut len = 4.0 * surface.scale();
    loop {
        let picked: Vec<Cylinder> = all_cylinders(surface, len)?
            .into_iter()
            .filter(|c| epsilon < 0.5 * c.height && epsilon / c.core_length < 0.25)
            .take(count)
            .collect();
        if picked.len() == count || len > 64.0 * surface.scale() {
            return Ok(picked);
        }
        len *= 2.0;
    }
}

pub fn verify_translation(
    surface: &TranslationSurface,
    name: &str,
    epsilon: f64,
    count: usize,
    samples: usize,
    seed: u64,
    threads: usize,
) -> Result<TranslationReport, VerifyError> {
    let cyls = translation_cylinders(surface, epsilon, count)?;
    let checks = cyls
        .iter()
        .map(|c| run_lemma_translation_check(surface, c, epsilon, samples, seed, threads))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TranslationReport {
        schema_version: SCHEMA_VERSION,
        check: "translation",
        surface: name.to_string(),
        epsilon,
        samples,
        seed,
        pass: checks.len() == count && checks.iter().all(|c| c.passes_10eps),
        checks,
    })
}
