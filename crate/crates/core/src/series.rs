//! Target sequences and partial sums for divergence comparisons.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SeriesError {
    #[error("cannot parse sequence `{0}` (expected harmonic:c, power:c,p, log:c,q or explicit:v1,v2,...)")]
    Parse(String),
    #[error("term {index} is not positive")]
    NotPositive { index: u64 },
    #[error("term {index} exceeds its predecessor")]
    Increasing { index: u64 },
    #[error("explicit sequence has only {len} terms")]
    TooShort { len: usize },
    #[error("need at least 4 terms")]
    TooFewTerms,
}

/// A positive non-increasing sequence `a_1, a_2, ...`.
#[derive(Clone, Debug, PartialEq)]
pub enum Sequence {
    /// `c / n`
    Harmonic { c: f64 },
    /// `c / n^p`
    Power { c: f64, p: f64 },
    /// `c / (n * max(1, ln n)^q)`; the floor keeps the first terms finite
    /// and monotone.
    Log { c: f64, q: f64 },
    Explicit(Vec<f64>),
}

impl Sequence {
    /// `a_n` for `n >= 1`; `None` past the end of an explicit list.
    pub fn term(&self, n: u64) -> Option<f64> {
        let x = n as f64;
        match self {
            Sequence::Harmonic { c } => Some(c / x),
            Sequence::Power { c, p } => Some(c / libm::pow(x, *p)),
            Sequence::Log { c, q } => Some(c / (x * libm::pow(libm::log(x).max(1.0), *q))),
            Sequence::Explicit(v) => v.get(n.checked_sub(1)? as usize).copied(),
        }
    }

    /// The generator at a real argument `t >= 1`, for use as a target
    /// function `f(t)`. Explicit lists are read at `⌊t⌋`.
    pub fn at(&self, t: f64) -> Option<f64> {
        match self {
            Sequence::Harmonic { c } => Some(c / t),
            Sequence::Power { c, p } => Some(c / libm::pow(t, *p)),
            Sequence::Log { c, q } => Some(c / (t * libm::pow(libm::log(t).max(1.0), *q))),
            Sequence::Explicit(_) => self.term(libm::floor(t).max(1.0) as u64),
        }
    }

    /// Checks positivity and monotonicity of the first `upto` terms.
    pub fn validate(&self, upto: u64) -> Result<(), SeriesError> {
        let upto = match self {
            Sequence::Explicit(v) => upto.min(v.len() as u64),
            _ => upto,
        };
        let mut prev = f64::INFINITY;
        for n in 1..=upto {
            let a = self.term(n).ok_or(SeriesError::TooShort { len: n as usize - 1 })?;
            if !(a > 0.0) || !a.is_finite() {
                return Err(SeriesError::NotPositive { index: n });
            }
            if a > prev {
                return Err(SeriesError::Increasing { index: n });
            }
            prev = a;
        }
        Ok(())
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sequence::Harmonic { c } => write!(f, "harmonic:{c}"),
            Sequence::Power { c, p } => write!(f, "power:{c},{p}"),
            Sequence::Log { c, q } => write!(f, "log:{c},{q}"),
            Sequence::Explicit(v) => {
                f.write_str("explicit:")?;
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{x}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for Sequence {
    type Err = SeriesError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SeriesError::Parse(s.to_string());
        let (kind, args) = s.split_once(':').ok_or_else(bad)?;
        let nums: Vec<f64> = args
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?;
        let seq = match (kind.trim(), nums.as_slice()) {
            ("harmonic", [c]) => Sequence::Harmonic { c: *c },
            ("power", [c, p]) => Sequence::Power { c: *c, p: *p },
            ("log", [c, q]) => Sequence::Log { c: *c, q: *q },
            ("explicit", v) if !v.is_empty() => Sequence::Explicit(v.to_vec()),
            _ => return Err(bad()),
        };
        let finite = match &seq {
            Sequence::Explicit(v) => v.iter().all(|x| x.is_finite()),
            Sequence::Harmonic { c } => c.is_finite() && *c > 0.0,
            Sequence::Power { c, p } | Sequence::Log { c, q: p } => {
                c.is_finite() && *c > 0.0 && p.is_finite() && *p >= 0.0
            }
        };
        if !finite {
            return Err(bad());
        }
        Ok(seq)
    }
}

/// Neumaier compensated summation.
#[derive(Clone, Copy, Debug, Default)]
struct Sum {
    s: f64,
    c: f64,
}

impl Sum {
    fn add(&mut self, x: f64) {
        let t = self.s + x;
        if self.s.abs() >= x.abs() {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }

    fn value(&self) -> f64 {
        self.s + self.c
    }
}

fn isqrt(k: u64) -> u64 {
    let mut r = libm::sqrt(k as f64) as u64;
    while r * r > k {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= k {
        r += 1;
    }
    r
}

fn term(seq: &Sequence, n: u64) -> Result<f64, SeriesError> {
    seq.term(n).ok_or(match seq {
        Sequence::Explicit(v) => SeriesError::TooShort { len: v.len() },
        _ => SeriesError::TooFewTerms,
    })
}

/// `Σ_{i<=k} a_{⌊√i⌋}`, grouping the `2m+1` indices with the same root.
pub fn floor_sqrt_sum(seq: &Sequence, k: u64) -> Result<f64, SeriesError> {
    let root = isqrt(k);
    let mut sum = Sum::default();
    for m in 1..root {
        sum.add((2 * m + 1) as f64 * term(seq, m)?);
    }
    if root >= 1 {
        sum.add((k - root * root + 1) as f64 * term(seq, root)?);
    }
    Ok(sum.value())
}

/// Partial sums at one truncation together with the dyadic sandwich.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartialSums {
    pub k: u64,
    /// `Σ_{i<=K} i a_i`
    pub sum_i_ai: f64,
    /// `Σ_{i<=K} a_i`
    pub sum_ai: f64,
    /// `Σ_{i<=K} a_{⌊√i⌋}`
    pub sum_a_floor_sqrt: f64,
    /// `Σ_{i>=1, 2^i<=K} 4^(i-1) a_{2^i}`
    pub lower: f64,
    /// `Σ_{i>=0, 2^i<=K} 4^(i+1) a_{2^i}`
    pub upper: f64,
    /// The lower sandwich for the floor-root sum, over `2^i <= ⌊√(K+1)⌋ - 1`.
    pub sqrt_lower: f64,
    /// The upper sandwich for the floor-root sum, over `2^i <= ⌊√K⌋`.
    pub sqrt_upper: f64,
}

impl PartialSums {
    pub fn sandwich_holds(&self) -> bool {
        self.lower <= self.sum_i_ai
            && self.sum_i_ai <= self.upper
            && self.sqrt_lower <= self.sum_a_floor_sqrt
            && self.sum_a_floor_sqrt <= self.sqrt_upper
    }
}

fn dyadic_sums(seq: &Sequence, lower_cap: u64, upper_cap: u64) -> Result<(f64, f64), SeriesError> {
    let mut lower = Sum::default();
    let mut upper = Sum::default();
    let mut i = 0u32;
    while let Some(p) = 1u64.checked_shl(i).filter(|&p| p <= lower_cap.max(upper_cap) && i < 63) {
        let a = term(seq, p)?;
        if i >= 1 && p <= lower_cap {
            lower.add(libm::ldexp(a, 2 * (i as i32 - 1)));
        }
        if p <= upper_cap {
            upper.add(libm::ldexp(a, 2 * (i as i32 + 1)));
        }
        i += 1;
    }
    Ok((lower.value(), upper.value()))
}

fn sandwich_at(seq: &Sequence, k: u64, sum_i_ai: f64, sum_ai: f64) -> Result<PartialSums, SeriesError> {
    let (lower, upper) = dyadic_sums(seq, k, k)?;
    let (sqrt_lower, _) = dyadic_sums(seq, isqrt(k + 1).saturating_sub(1), 0)?;
    let (_, sqrt_upper) = dyadic_sums(seq, 0, isqrt(k))?;
    Ok(PartialSums {
        k,
        sum_i_ai,
        sum_ai,
        sum_a_floor_sqrt: floor_sqrt_sum(seq, k)?,
        lower,
        upper,
        sqrt_lower,
        sqrt_upper,
    })
}

/// Partial sums up to `k` (`k >= 4`).
pub fn partial_sums(seq: &Sequence, k: u64) -> Result<PartialSums, SeriesError> {
    Ok(*sandwich_ladder(seq, k)?.last().expect("non-empty"))
}

/// Partial sums at every power of two up to `k`, and at `k` itself.
pub fn sandwich_ladder(seq: &Sequence, k: u64) -> Result<Vec<PartialSums>, SeriesError> {
    if k < 4 {
        return Err(SeriesError::TooFewTerms);
    }
    let mut s_iai = Sum::default();
    let mut s_ai = Sum::default();
    let mut out = Vec::new();
    for i in 1..=k {
        let a = term(seq, i)?;
        s_iai.add(i as f64 * a);
        s_ai.add(a);
        if (i >= 4 && i.is_power_of_two()) || i == k {
            out.push(sandwich_at(seq, i, s_iai.value(), s_ai.value())?);
        }
    }
    if out.len() >= 2 && out[out.len() - 1].k == out[out.len() - 2].k {
        out.pop();
    }
    Ok(out)
}

/// Which partial-sum sequence a verdict is about.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeriesSide {
    /// `Σ i a_i` at `K = 10^4, 10^5, 10^6`.
    IndexWeighted,
    /// `Σ a_i` at the same truncations.
    Plain,
    /// `Σ a_{⌊√i⌋}` at `K = 10^8, 10^10, 10^12`, the squares of the above.
    FloorSqrt,
}

/// An empirical growth classification; never a proof.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    DivergesEmpirically,
    ConvergesEmpirically,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::DivergesEmpirically => "diverges_empirically",
            Verdict::ConvergesEmpirically => "converges_empirically",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// Ratio thresholds on `(S(K3) - S(K2)) / (S(K2) - S(K1))`: increments
/// that hold up from one decade to the next indicate divergence, geometric
/// decay indicates convergence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thresholds {
    pub diverge_ratio: f64,
    pub converge_ratio: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            diverge_ratio: 0.75,
            converge_ratio: 0.70,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerdictReport {
    pub side: SeriesSide,
    pub truncations: [u64; 3],
    pub sums: [f64; 3],
    pub increment_ratio: f64,
    pub verdict: Verdict,
}

pub fn divergence_verdict(seq: &Sequence, side: SeriesSide, t: Thresholds) -> Result<VerdictReport, SeriesError> {
    let ks: [u64; 3] = match side {
        SeriesSide::FloorSqrt => [100_000_000, 10_000_000_000, 1_000_000_000_000],
        _ => [10_000, 100_000, 1_000_000],
    };
    let sums = match side {
        SeriesSide::FloorSqrt => [
            floor_sqrt_sum(seq, ks[0])?,
            floor_sqrt_sum(seq, ks[1])?,
            floor_sqrt_sum(seq, ks[2])?,
        ],
        _ => {
            let mut s = Sum::default();
            let mut out = [0.0; 3];
            let mut next = 0;
            for i in 1..=ks[2] {
                let a = term(seq, i)?;
                s.add(if side == SeriesSide::IndexWeighted { i as f64 * a } else { a });
                if i == ks[next] {
                    out[next] = s.value();
                    next += 1;
                }
            }
            out
        }
    };
    let d1 = sums[1] - sums[0];
    let d2 = sums[2] - sums[1];
    let ratio = if d1 > 0.0 { d2 / d1 } else { 0.0 };
    let verdict = if ratio >= t.diverge_ratio {
        Verdict::DivergesEmpirically
    } else if ratio <= t.converge_ratio {
        Verdict::ConvergesEmpirically
    } else {
        Verdict::Inconclusive
    };
    Ok(VerdictReport {
        side,
        truncations: ks,
        sums,
        increment_ratio: ratio,
        verdict,
    })
}

/// Four sequences with `Σ i a_i = ∞` followed by four with `Σ i a_i < ∞`.
pub fn test_battery() -> Vec<Sequence> {
    [
        "harmonic:1",
        "power:1,1.5",
        "power:1,2",
        "log:1,2",
        "power:1,2.5",
        "power:1,3",
        "power:1,3.5",
        "power:1,4",
    ]
    .iter()
    .map(|s| s.parse().expect("valid"))
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn parse_and_display_round_trip() {
        for s in ["harmonic:1", "power:1,2.5", "log:1,2", "explicit:0.5,0.25"] {
            let seq: Sequence = s.parse().unwrap();
            assert_eq!(seq.to_string(), s);
        }
        assert!("power:1".parse::<Sequence>().is_err());
        assert!("harmonic:-1".parse::<Sequence>().is_err());
        assert!("weird:1".parse::<Sequence>().is_err());
    }

    #[test]
    fn terms_and_validation() {
        let log: Sequence = "log:1,2".parse().unwrap();
        assert_eq!(log.term(1), Some(1.0));
        log.validate(100_000).unwrap();
        let bad = Sequence::Explicit(alloc::vec![0.1, 0.2]);
        assert_eq!(bad.validate(10), Err(SeriesError::Increasing { index: 2 }));
        assert_eq!(Sequence::Explicit(alloc::vec![0.1]).term(2), None);
    }

    #[test]
    fn floor_sqrt_grouping_matches_direct_sum() {
        let seq: Sequence = "power:1,1.3".parse().unwrap();
        for k in [1u64, 3, 4, 15, 16, 17, 1000] {
            let direct: f64 = (1..=k).map(|i| seq.term(isqrt(i)).unwrap()).sum();
            assert!((floor_sqrt_sum(&seq, k).unwrap() - direct).abs() < 1e-10);
        }
    }

    #[test]
    fn analytic_values() {
        let cube: Sequence = "power:1,3".parse().unwrap();
        let p = partial_sums(&cube, 1_000_000).unwrap();
        assert!((p.sum_i_ai - PI * PI / 6.0).abs() < 1e-5);
        let square: Sequence = "power:1,2".parse().unwrap();
        let p = partial_sums(&square, 1_000_000).unwrap();
        let euler_gamma = 0.577_215_664_901_532_9;
        assert!((p.sum_i_ai - (libm::log(1e6) + euler_gamma)).abs() < 1e-3);
    }

    #[test]
    fn sandwich_on_battery() {
        for seq in test_battery() {
            for row in sandwich_ladder(&seq, 1 << 16).unwrap() {
                assert!(row.sandwich_holds(), "{seq} {row:?}");
            }
        }
    }

    #[test]
    fn verdicts() {
        let t = Thresholds::default();
        let h: Sequence = "harmonic:1".parse().unwrap();
        assert_eq!(divergence_verdict(&h, SeriesSide::Plain, t).unwrap().verdict, Verdict::DivergesEmpirically);
        let cube: Sequence = "power:1,3".parse().unwrap();
        assert_eq!(divergence_verdict(&cube, SeriesSide::Plain, t).unwrap().verdict, Verdict::ConvergesEmpirically);
        let log: Sequence = "log:1,2".parse().unwrap();
        assert_eq!(divergence_verdict(&log, SeriesSide::Plain, t).unwrap().verdict, Verdict::ConvergesEmpirically);
        assert_eq!(
            divergence_verdict(&log, SeriesSide::IndexWeighted, t).unwrap().verdict,
            Verdict::DivergesEmpirically
        );
    }

    #[test]
    fn both_sides_agree_on_the_battery() {
        let t = Thresholds::default();
        for (i, seq) in test_battery().iter().enumerate() {
            let a = divergence_verdict(seq, SeriesSide::IndexWeighted, t).unwrap().verdict;
            let b = divergence_verdict(seq, SeriesSide::FloorSqrt, t).unwrap().verdict;
            let expected = if i < 4 { Verdict::DivergesEmpirically } else { Verdict::ConvergesEmpirically };
            assert_eq!((a, b), (expected, expected), "{seq}");
        }
    }
}
