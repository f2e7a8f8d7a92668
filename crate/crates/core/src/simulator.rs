//! Reproducible Monte Carlo trial streams and their bit-string output.
//!
//! Round `i` draws from its own ChaCha8 stream: the key comes from the
//! master seed and the stream number is `i`. A round's outcome therefore
//! depends only on `(seed, i)`, so a stream can be generated in any order or
//! chunking and stays bit-identical.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certification::{Setting, SettingsDistribution};
use crate::error::{Error, Result};
use crate::qubit::{probability_table, Outcome, ProbabilityTable, Strategy, UnitaryParams};

/// Rounds per second used for rate reporting.
pub const DEFAULT_ROUNDS_PER_SECOND: f64 = 3865.0;

/// One round: the setting, the earlier outcome `a` (absent when nothing was
/// measured first) and the outcome `b` at time `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TrialLine", into = "TrialLine")]
pub struct TrialRecord {
    pub index: u64,
    pub setting: Setting,
    pub a: Option<Outcome>,
    pub b: Outcome,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrialLine {
    i: u64,
    x: u8,
    y: u8,
    a: Option<Outcome>,
    b: Outcome,
}

impl TryFrom<TrialLine> for TrialRecord {
    type Error = Error;
    fn try_from(l: TrialLine) -> Result<Self> {
        TrialRecord::new(l.i, Setting::from_xy(l.x, l.y)?, l.a, l.b)
    }
}

impl From<TrialRecord> for TrialLine {
    fn from(t: TrialRecord) -> Self {
        TrialLine { i: t.index, x: t.setting.x(), y: t.setting.y(), a: t.a, b: t.b }
    }
}

impl TrialRecord {
    pub fn new(index: u64, setting: Setting, a: Option<Outcome>, b: Outcome) -> Result<Self> {
        if a.is_some() != setting.pair().is_some() {
            return Err(Error::InvalidTrial(format!(
                "setting {setting} {} an earlier outcome",
                if a.is_some() { "cannot have" } else { "requires" }
            )));
        }
        Ok(TrialRecord { index, setting, a, b })
    }
}

/// Unitary angle perturbed by a drift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriftParam {
    X1,
    Y1,
    Z1,
    X2,
    Y2,
    Z2,
}

/// `param += amplitude · sin(2π i / period)` at round `i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Drift {
    pub param: DriftParam,
    pub amplitude: f64,
    pub period: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftSchedule {
    pub base: Strategy,
    pub drift: Option<Drift>,
}

impl DriftSchedule {
    pub fn fixed(base: Strategy) -> Self {
        DriftSchedule { base, drift: None }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(d) = &self.drift {
            if !d.amplitude.is_finite() {
                return Err(Error::NonFinite("drift amplitude"));
            }
            if !(d.period.is_finite() && d.period > 0.0) {
                return Err(Error::InvalidArgument(format!("drift period {} must be positive", d.period)));
            }
        }
        Ok(())
    }

    /// The strategy in force at round `i`.
    pub fn strategy_at(&self, i: u64) -> Strategy {
        let Some(d) = self.drift else { return self.base };
        let shift = d.amplitude * (2.0 * PI * i as f64 / d.period).sin();
        let mut s = self.base;
        let bump = |u: UnitaryParams, k: usize| {
            let mut v = [u.x(), u.y(), u.z()];
            v[k] += shift;
            UnitaryParams::new(v[0], v[1], v[2]).expect("finite angles")
        };
        match d.param {
            DriftParam::X1 => s.u1 = bump(s.u1, 0),
            DriftParam::Y1 => s.u1 = bump(s.u1, 1),
            DriftParam::Z1 => s.u1 = bump(s.u1, 2),
            DriftParam::X2 => s.u2 = bump(s.u2, 0),
            DriftParam::Y2 => s.u2 = bump(s.u2, 1),
            DriftParam::Z2 => s.u2 = bump(s.u2, 2),
        }
        s
    }
}

fn round_key(seed: u64) -> [u8; 32] {
    let mut key = [0u8; 32];
    ChaCha8Rng::seed_from_u64(seed).fill(&mut key[..]);
    key
}

fn pick(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return k;
        }
    }
    // u landed in the round-off gap above the last cumulative sum
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

fn sample_round(key: &[u8; 32], index: u64, table: &ProbabilityTable, dist: &[f64; 5]) -> TrialRecord {
    let mut rng = ChaCha8Rng::from_seed(*key);
    rng.set_stream(index);
    let setting = Setting::ALL[pick(dist, rng.random::<f64>())];
    let u = rng.random::<f64>();
    let (a, b) = match setting.pair() {
        Some(pair) => {
            let block = &table.joint[pair.index()];
            let k = pick(&[block[0][0], block[0][1], block[1][0], block[1][1]], u);
            (Some(Outcome::from_index(k / 2)), Outcome::from_index(k % 2))
        }
        None => {
            let single = &table.singles[setting.y() as usize - 1];
            (None, Outcome::from_index(pick(single, u)))
        }
    };
    TrialRecord { index, setting, a, b }
}

/// `n` rounds of `schedule` under `dist`, reproducible from `seed`.
pub fn sample_trials(schedule: &DriftSchedule, dist: &SettingsDistribution, n: u64, seed: u64) -> Result<Vec<TrialRecord>> {
    if n == 0 {
        return Err(Error::InvalidArgument("number of rounds must be at least 1".into()));
    }
    schedule.validate()?;
    let key = round_key(seed);
    let probs = dist.probabilities();
    let fixed = schedule.drift.is_none().then(|| probability_table(&schedule.base));
    Ok((0..n)
        .into_par_iter()
        .map(|i| match &fixed {
            Some(t) => sample_round(&key, i, t, &probs),
            None => sample_round(&key, i, &probability_table(&schedule.strategy_at(i)), &probs),
        })
        .collect())
}

/// Observed frequencies arranged as a probability table, with the counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalTable {
    /// Joint blocks are frequencies within each pair setting. `Q1` singles
    /// pool the first outcome of all `(1,·)` rounds; `Q2` and `Q3` singles
    /// come from `(0,2)` and `(0,3)` and are NaN when those were not run.
    pub table: ProbabilityTable,
    /// `counts[setting][a][b]`, `a` indexed `+`, `−`, absent.
    pub counts: [[[u64; 2]; 3]; 5],
    pub rounds: u64,
}

impl EmpiricalTable {
    pub fn setting_count(&self, s: Setting) -> u64 {
        self.counts[s.index()].iter().flatten().sum()
    }
}

pub fn empirical_table(trials: &[TrialRecord]) -> Result<EmpiricalTable> {
    let mut counts = [[[0u64; 2]; 3]; 5];
    for t in trials {
        counts[t.setting.index()][t.a.map_or(2, Outcome::index)][t.b.index()] += 1;
    }
    let total = |s: Setting| -> u64 { counts[s.index()].iter().flatten().sum() };
    let missing: Vec<String> =
        [Setting::S12, Setting::S13, Setting::S23].iter().filter(|s| total(**s) == 0).map(|s| s.to_string()).collect();
    if !missing.is_empty() {
        return Err(Error::MissingSetting(missing.join(", ")));
    }
    let mut joint = [[[0.0; 2]; 2]; 3];
    for s in [Setting::S12, Setting::S13, Setting::S23] {
        let pair = s.pair().expect("pair setting");
        let n = total(s) as f64;
        for a in 0..2 {
            for b in 0..2 {
                joint[pair.index()][a][b] = counts[s.index()][a][b] as f64 / n;
            }
        }
    }
    let mut singles = [[f64::NAN; 2]; 3];
    let first: [u64; 2] = [0, 1].map(|a| {
        [Setting::S12, Setting::S13].iter().map(|s| counts[s.index()][a][0] + counts[s.index()][a][1]).sum()
    });
    let first_total = (first[0] + first[1]) as f64;
    singles[0] = [first[0] as f64 / first_total, first[1] as f64 / first_total];
    for (slot, s) in [(1, Setting::S02), (2, Setting::S03)] {
        let n = total(s);
        if n > 0 {
            let c = counts[s.index()][2];
            singles[slot] = [c[0] as f64 / n as f64, c[1] as f64 / n as f64];
        }
    }
    Ok(EmpiricalTable { table: ProbabilityTable::from_probabilities(joint, singles), counts, rounds: trials.len() as u64 })
}

/// Output group: setting and earlier outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupKey {
    pub setting: Setting,
    pub a: Option<Outcome>,
}

impl GroupKey {
    /// `bits_x{X}_y{Y}_a{A}.txt`, with `A` one of `+1`, `-1`, `0` (absent).
    pub fn file_name(&self) -> String {
        let a = match self.a {
            Some(Outcome::Plus) => "+1",
            Some(Outcome::Minus) => "-1",
            None => "0",
        };
        format!("bits_x{}_y{}_a{}.txt", self.setting.x(), self.setting.y(), a)
    }
}

/// One bit per trial from the later outcome, `+ → '0'`, `− → '1'`, grouped by
/// configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct BitOutput {
    pub groups: BTreeMap<GroupKey, String>,
    pub rounds_per_second: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupManifest {
    pub x: u8,
    pub y: u8,
    pub a: Option<Outcome>,
    pub file: String,
    pub length: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BitManifest {
    pub groups: Vec<GroupManifest>,
    pub total_length: usize,
    pub rounds_per_second: f64,
    pub duration_seconds: f64,
    pub bits_per_second: f64,
}

impl BitOutput {
    pub fn total_length(&self) -> usize {
        self.groups.values().map(String::len).sum()
    }

    pub fn length(&self, key: &GroupKey) -> usize {
        self.groups.get(key).map_or(0, String::len)
    }

    pub fn manifest(&self) -> BitManifest {
        let total_length = self.total_length();
        let duration_seconds = total_length as f64 / self.rounds_per_second;
        BitManifest {
            groups: self
                .groups
                .iter()
                .map(|(k, bits)| GroupManifest {
                    x: k.setting.x(),
                    y: k.setting.y(),
                    a: k.a,
                    file: k.file_name(),
                    length: bits.len(),
                })
                .collect(),
            total_length,
            rounds_per_second: self.rounds_per_second,
            duration_seconds,
            bits_per_second: if total_length > 0 { total_length as f64 / duration_seconds } else { 0.0 },
        }
    }

    /// Write one file per group plus `manifest.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> io::Result<BitManifest> {
        fs::create_dir_all(dir)?;
        for (k, bits) in &self.groups {
            fs::write(dir.join(k.file_name()), bits)?;
        }
        let manifest = self.manifest();
        let json = serde_json::to_string_pretty(&manifest).map_err(io::Error::other)?;
        fs::write(dir.join("manifest.json"), json + "\n")?;
        Ok(manifest)
    }
}

pub fn bits_from_trials(trials: &[TrialRecord], rounds_per_second: f64) -> BitOutput {
    let mut groups: BTreeMap<GroupKey, String> = BTreeMap::new();
    for t in trials {
        let bit = match t.b {
            Outcome::Plus => '0',
            Outcome::Minus => '1',
        };
        groups.entry(GroupKey { setting: t.setting, a: t.a }).or_default().push(bit);
    }
    BitOutput { groups, rounds_per_second }
}

/// Write trials as JSON lines.
pub fn write_trials<W: Write>(mut out: W, trials: &[TrialRecord]) -> io::Result<()> {
    for t in trials {
        serde_json::to_writer(&mut out, t).map_err(io::Error::other)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// A trial file line that failed to parse.
#[derive(Debug, thiserror::Error)]
pub enum ReadTrialsError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Read JSON-lines trials; blank lines are skipped.
pub fn read_trials<R: BufRead>(input: R) -> std::result::Result<Vec<TrialRecord>, ReadTrialsError> {
    let mut trials = Vec::new();
    for (k, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let t = serde_json::from_str(&line)
            .map_err(|e| ReadTrialsError::Malformed { line: k + 1, message: e.to_string() })?;
        trials.push(t);
    }
    Ok(trials)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{canonical_strategy, Alpha};
    use crate::qubit::{BlochVector, PovmParams};

    #[test]
    fn trial_json_shape() {
        let t = TrialRecord::new(4, Setting::S13, Some(Outcome::Plus), Outcome::Minus).unwrap();
        assert_eq!(serde_json::to_string(&t).unwrap(), r#"{"i":4,"x":1,"y":3,"a":1,"b":-1}"#);
        let s = TrialRecord::new(5, Setting::S03, None, Outcome::Plus).unwrap();
        assert_eq!(serde_json::to_string(&s).unwrap(), r#"{"i":5,"x":0,"y":3,"a":null,"b":1}"#);
        let back: TrialRecord = serde_json::from_str(r#"{"i":5,"x":0,"y":3,"a":null,"b":1}"#).unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<TrialRecord>(r#"{"i":5,"x":0,"y":3,"a":1,"b":1}"#).is_err());
        assert!(serde_json::from_str::<TrialRecord>(r#"{"i":5,"x":1,"y":3,"a":null,"b":1}"#).is_err());
        assert!(serde_json::from_str::<TrialRecord>(r#"{"i":5,"x":3,"y":2,"a":1,"b":1}"#).is_err());
        assert!(serde_json::from_str::<TrialRecord>(r#"{"i":5,"x":1,"y":2,"a":1,"b":0}"#).is_err());
    }

    #[test]
    fn read_reports_line_numbers() {
        let text = "{\"i\":0,\"x\":1,\"y\":2,\"a\":1,\"b\":1}\n\n{\"i\":1,\"x\":1,\"y\":2,\"a\":1}\n";
        match read_trials(text.as_bytes()) {
            Err(ReadTrialsError::Malformed { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn deterministic_strategy() {
        let s = Strategy::new(
            BlochVector::new(0.0, 0.0, 1.0).unwrap(),
            UnitaryParams::IDENTITY,
            UnitaryParams::IDENTITY,
            PovmParams::PROJECTIVE,
        );
        let trials = sample_trials(&DriftSchedule::fixed(s), &SettingsDistribution::uniform(), 3000, 1).unwrap();
        for t in trials.iter().filter(|t| t.setting == Setting::S12) {
            assert_eq!((t.a, t.b), (Some(Outcome::Plus), Outcome::Plus));
        }
    }

    #[test]
    fn reproducible_and_chunk_free() {
        let sched = DriftSchedule::fixed(canonical_strategy(Alpha::MAX));
        let dist = SettingsDistribution::uniform().with_singles(0.1).unwrap();
        let a = sample_trials(&sched, &dist, 5000, 9).unwrap();
        let b = sample_trials(&sched, &dist, 5000, 9).unwrap();
        assert_eq!(a, b);
        let prefix = sample_trials(&sched, &dist, 1000, 9).unwrap();
        assert_eq!(&a[..1000], &prefix[..]);
        let c = sample_trials(&sched, &dist, 5000, 10).unwrap();
        assert_ne!(a, c);
        assert!(a.iter().enumerate().all(|(i, t)| t.index == i as u64));
    }

    #[test]
    fn drift_moves_angle() {
        let base = canonical_strategy(Alpha::new(0.3).unwrap());
        let sched =
            DriftSchedule { base, drift: Some(Drift { param: DriftParam::Z1, amplitude: 0.05, period: 400.0 }) };
        assert_eq!(sched.strategy_at(0), base);
        assert!((sched.strategy_at(100).u1.z() - base.u1.z() - 0.05).abs() < 1e-12);
        assert_eq!(sched.strategy_at(100).u2, base.u2);
        let bad = DriftSchedule { base, drift: Some(Drift { param: DriftParam::Z1, amplitude: 0.05, period: 0.0 }) };
        assert!(sample_trials(&bad, &SettingsDistribution::uniform(), 10, 0).is_err());
    }

    #[test]
    fn empirical_small_stream() {
        let mut v = Vec::new();
        for (k, (a, b)) in [(1, 1), (1, -1), (-1, 1), (-1, -1)].into_iter().enumerate() {
            v.push(
                TrialRecord::new(
                    k as u64,
                    Setting::S12,
                    Some(Outcome::from_sign(a).unwrap()),
                    Outcome::from_sign(b).unwrap(),
                )
                .unwrap(),
            );
        }
        assert!(empirical_table(&v).is_err());
        v.push(TrialRecord::new(4, Setting::S13, Some(Outcome::Plus), Outcome::Plus).unwrap());
        v.push(TrialRecord::new(5, Setting::S23, Some(Outcome::Plus), Outcome::Plus).unwrap());
        let e = empirical_table(&v).unwrap();
        assert_eq!(e.table.joint[0], [[0.25, 0.25], [0.25, 0.25]]);
        assert!(e.table.singles[2][0].is_nan());
        assert_eq!(e.setting_count(Setting::S12), 4);
    }

    #[test]
    fn bit_groups() {
        let trials = [
            TrialRecord::new(0, Setting::S13, Some(Outcome::Plus), Outcome::Plus).unwrap(),
            TrialRecord::new(1, Setting::S13, Some(Outcome::Minus), Outcome::Minus).unwrap(),
            TrialRecord::new(2, Setting::S13, Some(Outcome::Plus), Outcome::Minus).unwrap(),
            TrialRecord::new(3, Setting::S03, None, Outcome::Plus).unwrap(),
        ];
        let out = bits_from_trials(&trials, DEFAULT_ROUNDS_PER_SECOND);
        let plus = GroupKey { setting: Setting::S13, a: Some(Outcome::Plus) };
        let minus = GroupKey { setting: Setting::S13, a: Some(Outcome::Minus) };
        assert_eq!(out.groups[&plus], "01");
        assert_eq!(out.groups[&minus], "1");
        assert_eq!(out.total_length(), 4);
        assert_eq!(plus.file_name(), "bits_x1_y3_a+1.txt");
        assert_eq!(GroupKey { setting: Setting::S03, a: None }.file_name(), "bits_x0_y3_a0.txt");
        let m = out.manifest();
        assert_eq!(m.total_length, 4);
        assert_eq!(m.groups.len(), 3);
    }
}
