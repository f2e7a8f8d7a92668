//! Finite-statistics certification under memory effects.
//!
//! Each round `i` picks a setting `(x, y)` with probability `P(x, y)` and
//! scores `I_i = c[x,y](a, b)`. With `c = s·a·b / P(x, y)` on the three pair
//! settings (`s = −1` for `(1,3)`) and zero elsewhere, `E[I_i] = LGI` for any
//! strategy, and `|I_i − E[I_i]| ≤ 1/q + I_q` with `q` the smallest pair
//! probability and `I_q = 1.5`. Azuma–Hoeffding then gives, except with
//! probability `δ`,
//!
//! ```text
//! LGI ≥ Î − ε,    ε = (1/q + I_q) · √(2 ln(1/δ) / n),
//! ```
//!
//! and `n · f(Î − ε − 1)` certified bits, where `f` is the joint or
//! conditional entropy bound.
//!
//! The score average runs over all rounds, including those spent on the
//! single-measurement settings `(0,2)` and `(0,3)`; these score zero. This
//! keeps the estimator unbiased for any mixture of settings while the
//! increment bound stays the one above. Without single settings it is the
//! plain average over pair rounds.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bounds::{entropy, Alpha, Mode, QUANTUM_MAX_LGI};
use crate::error::{Error, Result};
use crate::qubit::{Outcome, Pair, ProbabilityTable};
use crate::simulator::TrialRecord;

/// Per-condition bounded-increment constant of the NSIT martingales.
pub const NSIT_INCREMENT: f64 = 0.5;

/// Default share of rounds spent on `(0,2)` and `(0,3)` when auditing NSIT.
pub const DEFAULT_AUDIT_MASS: f64 = 0.1;

const SUM_TOL: f64 = 1e-12;

/// Which measurements a round performs: the earlier time `x` (0 for none)
/// and the later time `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Setting {
    S02,
    S03,
    S12,
    S13,
    S23,
}

impl Setting {
    pub const ALL: [Setting; 5] = [Setting::S02, Setting::S03, Setting::S12, Setting::S13, Setting::S23];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn x(self) -> u8 {
        match self {
            Setting::S02 | Setting::S03 => 0,
            Setting::S12 | Setting::S13 => 1,
            Setting::S23 => 2,
        }
    }

    pub fn y(self) -> u8 {
        match self {
            Setting::S02 | Setting::S12 => 2,
            Setting::S03 | Setting::S13 | Setting::S23 => 3,
        }
    }

    pub fn from_xy(x: u8, y: u8) -> Result<Setting> {
        match (x, y) {
            (0, 2) => Ok(Setting::S02),
            (0, 3) => Ok(Setting::S03),
            (1, 2) => Ok(Setting::S12),
            (1, 3) => Ok(Setting::S13),
            (2, 3) => Ok(Setting::S23),
            _ => Err(Error::InvalidTrial(format!("setting ({x},{y}) is not one of (0,2) (0,3) (1,2) (1,3) (2,3)"))),
        }
    }

    /// The correlator this setting samples, `None` for single measurements.
    pub fn pair(self) -> Option<Pair> {
        match self {
            Setting::S12 => Some(Pair::Q12),
            Setting::S13 => Some(Pair::Q13),
            Setting::S23 => Some(Pair::Q23),
            _ => None,
        }
    }

    pub fn from_pair(pair: Pair) -> Setting {
        match pair {
            Pair::Q12 => Setting::S12,
            Pair::Q13 => Setting::S13,
            Pair::Q23 => Setting::S23,
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x(), self.y())
    }
}

/// Probabilities of the five settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionRecord", into = "DistributionRecord")]
pub struct SettingsDistribution {
    probs: [f64; 5],
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DistributionRecord {
    #[serde(default)]
    p02: f64,
    #[serde(default)]
    p03: f64,
    p12: f64,
    p13: f64,
    p23: f64,
}

impl TryFrom<DistributionRecord> for SettingsDistribution {
    type Error = Error;
    fn try_from(r: DistributionRecord) -> Result<Self> {
        SettingsDistribution::new([r.p02, r.p03, r.p12, r.p13, r.p23])
    }
}

impl From<SettingsDistribution> for DistributionRecord {
    fn from(d: SettingsDistribution) -> Self {
        let [p02, p03, p12, p13, p23] = d.probs;
        DistributionRecord { p02, p03, p12, p13, p23 }
    }
}

impl SettingsDistribution {
    /// Probabilities ordered as [`Setting::ALL`]. All three pair settings must
    /// be reachable.
    pub fn new(probs: [f64; 5]) -> Result<Self> {
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidDistribution(format!("probability {p} is negative or not finite")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidDistribution(format!("probabilities sum to {sum}, not 1")));
        }
        for s in [Setting::S12, Setting::S13, Setting::S23] {
            if probs[s.index()] <= 0.0 {
                return Err(Error::MissingSetting(s.to_string()));
            }
        }
        Ok(SettingsDistribution { probs })
    }

    /// Only the three pair settings, given in the order `(1,2)`, `(2,3)`, `(1,3)`.
    pub fn pairs(p12: f64, p23: f64, p13: f64) -> Result<Self> {
        Self::new([0.0, 0.0, p12, p13, p23])
    }

    pub fn uniform() -> Self {
        let third = 1.0 / 3.0;
        SettingsDistribution { probs: [0.0, 0.0, third, third, 1.0 - 2.0 * third] }
    }

    /// Move `mass` of the probability, split evenly, onto `(0,2)` and `(0,3)`,
    /// scaling the pair settings down proportionally.
    pub fn with_singles(&self, mass: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&mass) {
            return Err(Error::InvalidDistribution(format!("single-setting mass {mass} outside [0, 1)")));
        }
        let pair_mass = self.pair_mass();
        let mut probs = [0.0; 5];
        probs[0] = 0.5 * mass;
        probs[1] = 0.5 * mass;
        for s in [Setting::S12, Setting::S13, Setting::S23] {
            probs[s.index()] = self.probs[s.index()] / pair_mass * (1.0 - mass);
        }
        // absorb round-off so the sum check stays exact
        let drift = 1.0 - probs.iter().sum::<f64>();
        probs[Setting::S23.index()] += drift;
        Self::new(probs)
    }

    pub fn probability(&self, s: Setting) -> f64 {
        self.probs[s.index()]
    }

    pub fn probabilities(&self) -> [f64; 5] {
        self.probs
    }

    /// Smallest pair-setting probability.
    pub fn q(&self) -> f64 {
        [Setting::S12, Setting::S13, Setting::S23].iter().map(|s| self.probs[s.index()]).fold(f64::INFINITY, f64::min)
    }

    pub fn pair_mass(&self) -> f64 {
        self.probs[2] + self.probs[3] + self.probs[4]
    }

    pub fn has_singles(&self) -> bool {
        self.probs[0] > 0.0 && self.probs[1] > 0.0
    }
}

/// Score of a round as a function of setting and outcomes:
/// `[setting][a][b]` with `a` indexed `+`, `−`, absent.
pub type ScoreTable = [[[f64; 2]; 3]; 5];

fn a_slot(a: Option<Outcome>) -> usize {
    a.map_or(2, Outcome::index)
}

/// Linear per-round estimators for the inequality value and the three NSIT
/// values.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorSpec {
    pub dist: SettingsDistribution,
    pub lgi: ScoreTable,
    /// Present when both single settings have positive probability.
    pub nsit: Option<[ScoreTable; 3]>,
}

impl EstimatorSpec {
    pub fn lgi_score(&self, setting: Setting, a: Option<Outcome>, b: Outcome) -> f64 {
        self.lgi[setting.index()][a_slot(a)][b.index()]
    }
}

pub fn default_estimator(dist: &SettingsDistribution) -> EstimatorSpec {
    let mut lgi = [[[0.0; 2]; 3]; 5];
    for pair in Pair::ALL {
        let s = Setting::from_pair(pair);
        let p = dist.probability(s);
        for a in Outcome::BOTH {
            for b in Outcome::BOTH {
                lgi[s.index()][a.index()][b.index()] = pair.lgi_sign() * a.sign() * b.sign() / p;
            }
        }
    }
    let nsit = dist.has_singles().then(|| {
        // NSIT_j = P(+ at y | nothing before) − P(+ at y | x measured first)
        let conditions = [(Setting::S02, Setting::S12), (Setting::S03, Setting::S13), (Setting::S03, Setting::S23)];
        conditions.map(|(alone, after)| {
            let mut m = [[[0.0; 2]; 3]; 5];
            m[alone.index()][2][Outcome::Plus.index()] = 1.0 / dist.probability(alone);
            for a in Outcome::BOTH {
                m[after.index()][a.index()][Outcome::Plus.index()] = -1.0 / dist.probability(after);
            }
            m
        })
    });
    EstimatorSpec { dist: *dist, lgi, nsit }
}

fn expectation(scores: &ScoreTable, dist: &SettingsDistribution, table: &ProbabilityTable) -> f64 {
    let mut total = 0.0;
    for s in Setting::ALL {
        let ps = dist.probability(s);
        if ps == 0.0 {
            continue;
        }
        let block = &scores[s.index()];
        let mut e = 0.0;
        for b in Outcome::BOTH {
            match s.pair() {
                Some(pair) => {
                    for a in Outcome::BOTH {
                        e += block[a.index()][b.index()] * table.joint(pair, a, b);
                    }
                }
                None => e += block[2][b.index()] * table.single(s.y(), b),
            }
        }
        total += ps * e;
    }
    total
}

/// Exact mean of the per-round inequality score under `table`.
pub fn expected_lgi(spec: &EstimatorSpec, table: &ProbabilityTable) -> f64 {
    expectation(&spec.lgi, &spec.dist, table)
}

/// Exact means of the three per-round NSIT scores, if defined.
pub fn expected_nsit(spec: &EstimatorSpec, table: &ProbabilityTable) -> Option<[f64; 3]> {
    spec.nsit.as_ref().map(|m| [0, 1, 2].map(|j| expectation(&m[j], &spec.dist, table)))
}

/// `Î`, the mean round score over all trials.
pub fn lgi_estimate(trials: &[TrialRecord], spec: &EstimatorSpec) -> Result<f64> {
    let mut sum = 0.0;
    let mut pair_rounds = 0usize;
    for t in trials {
        if spec.dist.probability(t.setting) == 0.0 {
            return Err(Error::UnexpectedSetting { x: t.setting.x(), y: t.setting.y() });
        }
        if t.setting.pair().is_some() {
            pair_rounds += 1;
        }
        sum += spec.lgi_score(t.setting, t.a, t.b);
    }
    if pair_rounds == 0 {
        return Err(Error::MissingSetting("(1,2), (1,3), (2,3)".into()));
    }
    Ok(sum / trials.len() as f64)
}

/// Differences of observed `+` frequencies at the later time with and
/// without the earlier measurement, for the three NSIT conditions.
pub fn nsit_estimates(trials: &[TrialRecord]) -> Result<[f64; 3]> {
    let mut plus = [0u64; 5];
    let mut total = [0u64; 5];
    for t in trials {
        total[t.setting.index()] += 1;
        if t.b == Outcome::Plus {
            plus[t.setting.index()] += 1;
        }
    }
    let missing: Vec<String> = Setting::ALL.iter().filter(|s| total[s.index()] == 0).map(|s| s.to_string()).collect();
    if !missing.is_empty() {
        return Err(Error::MissingSetting(missing.join(", ")));
    }
    let freq = |s: Setting| plus[s.index()] as f64 / total[s.index()] as f64;
    Ok([
        freq(Setting::S02) - freq(Setting::S12),
        freq(Setting::S03) - freq(Setting::S13),
        freq(Setting::S03) - freq(Setting::S23),
    ])
}

fn check_rounds_delta(n: u64, delta: f64, allow_one: bool) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("number of rounds must be at least 1".into()));
    }
    let ok = delta > 0.0 && (delta < 1.0 || (allow_one && delta == 1.0));
    if !ok {
        return Err(Error::InvalidArgument(format!("delta = {delta} outside (0, 1)")));
    }
    Ok(())
}

/// Azuma–Hoeffding radius `(1/q + I_q)·√(2 ln(1/δ)/n)`.
pub fn epsilon_from_delta(n: u64, delta: f64, q: f64, iq: f64) -> Result<f64> {
    check_rounds_delta(n, delta, false)?;
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidArgument(format!("q = {q} outside (0, 1]")));
    }
    if !(iq.is_finite() && iq >= 0.0) {
        return Err(Error::InvalidArgument(format!("I_q = {iq} must be finite and nonnegative")));
    }
    Ok((1.0 / q + iq) * (2.0 * (1.0 / delta).ln() / n as f64).sqrt())
}

/// Radii `(1 + N_q)·√(2 ln(1/δ)/n)` of the three NSIT deviations; `δ = 1`
/// gives zero.
pub fn nsit_deviation(n: u64, delta: f64, nq: [f64; 3]) -> Result<[f64; 3]> {
    check_rounds_delta(n, delta, true)?;
    if nq.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidArgument(format!("N_q = {nq:?} must be finite and nonnegative")));
    }
    let root = (2.0 * (1.0 / delta).ln() / n as f64).sqrt();
    Ok(nq.map(|c| (1.0 + c) * root))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertificationReport {
    pub n: u64,
    pub q: f64,
    pub delta: f64,
    #[serde(rename = "I_hat")]
    pub i_hat: f64,
    pub epsilon: f64,
    pub alpha_eff: f64,
    pub mode: Mode,
    pub bits_per_round: f64,
    pub total_bits: u64,
    pub nsit_hat: Option<[f64; 3]>,
    pub nsit_epsilon: [f64; 3],
    #[serde(rename = "Iq")]
    pub iq: f64,
}

/// Whether the confidence radius accounts for finite statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Confidence {
    /// Azuma–Hoeffding radius at failure probability `δ`.
    #[default]
    Azuma,
    /// `ε = 0`: the observed value is taken at face value.
    Asymptotic,
}

fn report(
    i_hat: f64,
    n: u64,
    dist: &SettingsDistribution,
    delta: f64,
    mode: Mode,
    confidence: Confidence,
) -> Result<CertificationReport> {
    if !i_hat.is_finite() {
        return Err(Error::NonFinite("I_hat"));
    }
    check_rounds_delta(n, delta, false)?;
    let q = dist.q();
    let (epsilon, nsit_epsilon) = match confidence {
        Confidence::Azuma => (
            epsilon_from_delta(n, delta, q, QUANTUM_MAX_LGI)?,
            nsit_deviation(n, delta, [NSIT_INCREMENT; 3])?,
        ),
        Confidence::Asymptotic => (0.0, [0.0; 3]),
    };
    let alpha_eff = i_hat - epsilon - 1.0;
    let bits_per_round = if alpha_eff > 0.0 {
        // a noisy estimate may overshoot the quantum ceiling; the bound saturates there
        entropy(mode, Alpha::new(alpha_eff.min(Alpha::MAX.value()))?)
    } else {
        0.0
    };
    let total_bits = (n as f64 * bits_per_round).floor() as u64;
    Ok(CertificationReport {
        n,
        q,
        delta,
        i_hat,
        epsilon,
        alpha_eff,
        mode,
        bits_per_round,
        total_bits,
        nsit_hat: None,
        nsit_epsilon,
        iq: QUANTUM_MAX_LGI,
    })
}

/// Certified min-entropy of `n` rounds that produced the estimate `i_hat`.
/// Sub-threshold inputs give a zero-bit report.
pub fn certify(i_hat: f64, n: u64, dist: &SettingsDistribution, delta: f64, mode: Mode) -> Result<CertificationReport> {
    report(i_hat, n, dist, delta, mode, Confidence::Azuma)
}

pub fn certify_with(
    i_hat: f64,
    n: u64,
    dist: &SettingsDistribution,
    delta: f64,
    mode: Mode,
    confidence: Confidence,
) -> Result<CertificationReport> {
    report(i_hat, n, dist, delta, mode, confidence)
}

/// Estimate `Î` (and NSIT when single settings were run) from a trial
/// stream and certify it.
pub fn certify_trials(
    trials: &[TrialRecord],
    spec: &EstimatorSpec,
    delta: f64,
    mode: Mode,
    confidence: Confidence,
) -> Result<CertificationReport> {
    let i_hat = lgi_estimate(trials, spec)?;
    let mut r = report(i_hat, trials.len() as u64, &spec.dist, delta, mode, confidence)?;
    if spec.dist.has_singles() {
        r.nsit_hat = Some(nsit_estimates(trials)?);
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MemoryRow {
    pub n: u64,
    pub total_bits: u64,
    pub mode: Mode,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemoryCurve {
    pub rows: Vec<MemoryRow>,
    /// Smallest grid `n` whose certified entropy is positive. Rounding down
    /// to whole bits can leave `total_bits` at zero a little past it.
    pub first_positive: Option<u64>,
}

pub fn memory_curve(
    i_hat: f64,
    delta: f64,
    dist: &SettingsDistribution,
    n_grid: &[u64],
    mode: Mode,
) -> Result<MemoryCurve> {
    if n_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let reports = n_grid.iter().map(|&n| certify(i_hat, n, dist, delta, mode)).collect::<Result<Vec<_>>>()?;
    let first_positive = reports.iter().filter(|r| r.bits_per_round > 0.0).map(|r| r.n).min();
    let rows = reports.iter().map(|r| MemoryRow { n: r.n, total_bits: r.total_bits, mode }).collect();
    Ok(MemoryCurve { rows, first_positive })
}

/// Smallest `n` with `Î − ε(n) > 1`, or `None` when `Î ≤ 1`.
pub fn threshold_runs(i_hat: f64, delta: f64, q: f64) -> Result<Option<u64>> {
    let excess = i_hat - 1.0;
    epsilon_from_delta(1, delta, q, QUANTUM_MAX_LGI)?;
    if !(excess > 0.0) {
        return Ok(None);
    }
    let c = 1.0 / q + QUANTUM_MAX_LGI;
    let estimate = (2.0 * c * c * (1.0 / delta).ln() / (excess * excess)).floor().max(1.0) as u64;
    // step off the floating-point estimate until the strict inequality flips
    let passes = |n: u64| excess - epsilon_from_delta(n, delta, q, QUANTUM_MAX_LGI).unwrap() > 0.0;
    let mut n = estimate.saturating_sub(2).max(1);
    while !passes(n) {
        n += 1;
    }
    while n > 1 && passes(n - 1) {
        n -= 1;
    }
    Ok(Some(n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::canonical_strategy;
    use crate::qubit::{probability_table, Strategy};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn trial(i: u64, x: u8, y: u8, a: Option<i64>, b: i64) -> TrialRecord {
        TrialRecord::new(
            i,
            Setting::from_xy(x, y).unwrap(),
            a.map(|v| Outcome::from_sign(v).unwrap()),
            Outcome::from_sign(b).unwrap(),
        )
        .unwrap()
    }

    fn biased() -> SettingsDistribution {
        SettingsDistribution::pairs(1.0 / 6.0, 5.0 / 12.0, 5.0 / 12.0).unwrap()
    }

    #[test]
    fn distribution_validation() {
        assert!(SettingsDistribution::pairs(0.5, 0.5, 0.0).is_err());
        assert!(SettingsDistribution::pairs(0.5, 0.5, 0.1).is_err());
        assert!(SettingsDistribution::new([-0.1, 0.1, 0.4, 0.3, 0.3]).is_err());
        let u = SettingsDistribution::uniform();
        assert_abs_diff_eq!(u.q(), 1.0 / 3.0, epsilon = 1e-15);
        let a = u.with_singles(0.1).unwrap();
        assert_abs_diff_eq!(a.probability(Setting::S02), 0.05);
        assert_abs_diff_eq!(a.q(), 0.3, epsilon = 1e-15);
        assert!(a.has_singles() && !u.has_singles());
        let json = serde_json::to_string(&a).unwrap();
        let back: SettingsDistribution = serde_json::from_str(&json).unwrap();
        assert_eq!(back, a);
        assert!(serde_json::from_str::<SettingsDistribution>(r#"{"p12":0.5,"p13":0.5,"p23":0.5}"#).is_err());
    }

    #[test]
    fn estimator_score_examples() {
        let spec = default_estimator(&SettingsDistribution::uniform());
        assert_abs_diff_eq!(spec.lgi_score(Setting::S12, Some(Outcome::Plus), Outcome::Plus), 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(spec.lgi_score(Setting::S13, Some(Outcome::Plus), Outcome::Minus), 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(spec.lgi_score(Setting::S23, Some(Outcome::Plus), Outcome::Minus), -3.0, epsilon = 1e-12);
        let t = probability_table(&canonical_strategy(Alpha::MAX));
        assert_abs_diff_eq!(expected_lgi(&spec, &t), 1.5, epsilon = 1e-12);
        assert!(spec.nsit.is_none());
    }

    #[test]
    fn expectations_match_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..200 {
            let s = Strategy::random(&mut rng);
            let t = probability_table(&s);
            let w: [f64; 5] = std::array::from_fn(|_| rng.random_range(0.05..1.0));
            let sum: f64 = w.iter().sum();
            let mut p = w.map(|v| v / sum);
            p[4] = 1.0 - p[..4].iter().sum::<f64>();
            let spec = default_estimator(&SettingsDistribution::new(p).unwrap());
            assert_abs_diff_eq!(expected_lgi(&spec, &t), t.lgi, epsilon = 1e-12);
            let n = expected_nsit(&spec, &t).unwrap();
            for j in 0..3 {
                assert_abs_diff_eq!(n[j], t.nsit[j], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn fabricated_streams() {
        let spec = default_estimator(&SettingsDistribution::uniform());
        let same: Vec<_> = (0..10).map(|i| trial(i, 1, 2, Some(1), 1)).collect();
        assert_abs_diff_eq!(lgi_estimate(&same, &spec).unwrap(), 3.0, epsilon = 1e-12);
        assert_eq!(lgi_estimate(&[], &spec), Err(Error::MissingSetting("(1,2), (1,3), (2,3)".into())));
        let single = [trial(0, 0, 3, None, 1)];
        assert_eq!(lgi_estimate(&single, &spec), Err(Error::UnexpectedSetting { x: 0, y: 3 }));

        // (0,3) is + 60% of the time, (1,3) is + half the time
        let mut v = Vec::new();
        let mut i = 0;
        let mut push = |x, y, a, b| {
            v.push(trial(i, x, y, a, b));
            i += 1;
        };
        for k in 0..10 {
            push(0, 3, None, if k < 6 { 1 } else { -1 });
            push(1, 3, Some(1), if k < 5 { 1 } else { -1 });
            push(0, 2, None, 1);
            push(1, 2, Some(-1), 1);
            push(2, 3, Some(1), -1);
        }
        let n = nsit_estimates(&v).unwrap();
        assert_abs_diff_eq!(n[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(n[1], 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(n[2], 0.6, epsilon = 1e-12);
        assert!(nsit_estimates(&same).is_err());
    }

    #[test]
    fn epsilon_examples() {
        assert_abs_diff_eq!(epsilon_from_delta(100_000, 0.01, 1.0 / 3.0, 1.5).unwrap(), 0.04319, epsilon = 5e-6);
        assert_abs_diff_eq!(epsilon_from_delta(100_000, 0.01, 1.0 / 6.0, 1.5).unwrap(), 0.07198, epsilon = 5e-6);
        assert!(epsilon_from_delta(u64::MAX, 0.01, 1.0 / 3.0, 1.5).unwrap() < 1e-8);
        assert!(epsilon_from_delta(0, 0.01, 0.3, 1.5).is_err());
        assert!(epsilon_from_delta(10, 1.0, 0.3, 1.5).is_err());
        assert!(epsilon_from_delta(10, 0.1, 0.0, 1.5).is_err());
    }

    #[test]
    fn nsit_deviation_examples() {
        let e = nsit_deviation(100_000, 0.01, [0.5; 3]).unwrap();
        assert_abs_diff_eq!(e[0], 0.0144, epsilon = 5e-5);
        assert_eq!(nsit_deviation(1000, 1.0, [0.5; 3]).unwrap(), [0.0; 3]);
        assert!(nsit_deviation(u64::MAX, 0.01, [0.5; 3]).unwrap()[2] < 1e-8);
        assert!(nsit_deviation(10, 0.0, [0.5; 3]).is_err());
    }

    #[test]
    fn headline_certifications() {
        let u = certify(1.31, 100_000, &SettingsDistribution::uniform(), 0.01, Mode::Conditional).unwrap();
        assert!(u.total_bits.abs_diff(3673) <= 2, "{}", u.total_bits);
        let b = certify(1.31, 100_000, &biased(), 0.01, Mode::Conditional).unwrap();
        assert!(b.total_bits.abs_diff(2777) <= 2, "{}", b.total_bits);
        let free =
            certify_with(1.31, 100_000, &SettingsDistribution::uniform(), 0.01, Mode::Conditional, Confidence::Asymptotic)
                .unwrap();
        assert!(free.total_bits.abs_diff(5406) <= 1, "{}", free.total_bits);
        assert_abs_diff_eq!(free.bits_per_round, 0.05406, epsilon = 1e-4);
    }

    #[test]
    fn zero_clamp() {
        let u = SettingsDistribution::uniform();
        for i_hat in [1.0, 0.5, -3.0, 1.04] {
            let r = certify(i_hat, 100_000, &u, 0.01, Mode::Joint).unwrap();
            assert_eq!(r.total_bits, 0);
            assert_eq!(r.bits_per_round, 0.0);
        }
        let over = certify(2.5, 1_000_000, &u, 0.01, Mode::Joint).unwrap();
        assert_abs_diff_eq!(over.bits_per_round, entropy(Mode::Joint, Alpha::MAX));
    }

    #[test]
    fn report_json_fields() {
        let r = certify(1.31, 100_000, &SettingsDistribution::uniform(), 0.01, Mode::Conditional).unwrap();
        let v = serde_json::to_value(r).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        let mut want = vec![
            "n", "q", "delta", "I_hat", "epsilon", "alpha_eff", "mode", "bits_per_round", "total_bits", "nsit_hat",
            "nsit_epsilon", "Iq",
        ];
        want.sort();
        assert_eq!(keys, want);
    }

    #[test]
    fn threshold_and_curve() {
        let u = SettingsDistribution::uniform();
        let n_star = threshold_runs(1.31, 0.01, u.q()).unwrap().unwrap();
        assert_eq!(n_star, 1941);
        let curve = memory_curve(1.31, 0.01, &u, &[1000, 1940, 1941, 3000, 100_000], Mode::Conditional).unwrap();
        assert_eq!(curve.first_positive, Some(1941));
        assert_eq!(curve.rows[0].total_bits, 0);
        assert_eq!(curve.rows[1].total_bits, 0);
        assert!(curve.rows[3].total_bits > 0);
        assert!(curve.rows[4].total_bits.abs_diff(3673) <= 2);
        let biased_star = threshold_runs(1.31, 0.01, biased().q()).unwrap().unwrap();
        assert!(biased_star > n_star);
        assert_eq!(threshold_runs(1.0, 0.01, u.q()).unwrap(), None);
        assert_eq!(memory_curve(1.31, 0.01, &u, &[], Mode::Joint), Err(Error::EmptyGrid));
    }
}
