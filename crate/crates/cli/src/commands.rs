use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use lgcert::bounds::{bound_curve, canonical_strategy, Alpha, Mode};
use lgcert::certification::{
    certify_trials, certify_with, default_estimator, nsit_deviation, nsit_estimates, threshold_runs,
    Confidence, SettingsDistribution, DEFAULT_AUDIT_MASS,
};
use lgcert::optimizer::{maximize, randomness_vs_nsit_curve, NsitCurveRow, OptProblem, SolverOptions, Target};
use lgcert::qubit::Strategy;
use lgcert::report::{sig6, write_bound_csv, write_memory_csv, write_nsit_curve_csv};
use lgcert::simulator::{bits_from_trials, read_trials, sample_trials, write_trials, DriftSchedule, ReadTrialsError, TrialRecord};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{
    BoundArgs, CertifyArgs, DistArgs, Format, MemoryCurveArgs, NsitAuditArgs, OptimizeArgs, SimulateArgs,
    SCHEMA_VERSION,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Model(#[from] lgcert::Error),
    #[error("{0}")]
    NotMet(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {message}")]
    BadFile { path: PathBuf, message: String },
    #[error("writing output: {0}")]
    Stdout(io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Model(_) | CliError::BadFile { .. } => 1,
            CliError::NotMet(_) => 2,
            CliError::Io { .. } | CliError::Stdout(_) => 3,
        }
    }
}

pub type CliResult = Result<(), CliError>;

pub fn io_at(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

/// JSON document with the schema version prepended.
#[derive(Serialize)]
pub struct Versioned<T: Serialize> {
    pub schema_version: u32,
    #[serde(flatten)]
    pub body: T,
}

pub fn versioned<T: Serialize>(body: T) -> Versioned<T> {
    Versioned { schema_version: SCHEMA_VERSION, body }
}

pub fn print_json<T: Serialize>(value: &T) -> CliResult {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| CliError::Stdout(e.into()))?;
    writeln!(out).map_err(CliError::Stdout)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let text = serde_json::to_string_pretty(value).expect("serializable") + "\n";
    fs::write(path, text).map_err(io_at(path))
}

fn stdout_csv(f: impl FnOnce(&mut io::StdoutLock<'static>) -> io::Result<()>) -> CliResult {
    let mut out = io::stdout().lock();
    f(&mut out).map_err(CliError::Stdout)
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn alpha(v: f64) -> Result<Alpha, CliError> {
    Alpha::new(v).map_err(CliError::from)
}

/// Distribution from the flags, with `default_singles` unless overridden.
fn resolve_dist(d: &DistArgs, default_singles: f64) -> Result<SettingsDistribution, CliError> {
    let base = d.dist.unwrap_or_else(SettingsDistribution::uniform);
    let mass = if d.no_nsit_audit { 0.0 } else { d.singles.unwrap_or(default_singles) };
    if mass == 0.0 {
        return Ok(base);
    }
    Ok(base.with_singles(mass)?)
}

pub fn bound(a: BoundArgs) -> CliResult {
    let grid = match (a.alpha, a.grid) {
        (Some(v), _) => vec![v],
        (None, Some(g)) => g.0,
        (None, None) => unreachable!("clap requires one of --alpha/--grid"),
    };
    let rows = bound_curve(&grid, a.mode.into())?;
    match a.format {
        Format::Csv => stdout_csv(|out| write_bound_csv(out, &rows)),
        Format::Json => print_json(&versioned(serde_json::json!({ "rows": rows }))),
    }
}

fn solver(restarts: usize) -> Result<SolverOptions, CliError> {
    if restarts == 0 {
        return Err(CliError::Usage("--restarts must be at least 1".into()));
    }
    Ok(SolverOptions { restarts, ..Default::default() })
}

fn curve_row(alpha: f64, v: f64, best_value: f64, converged: bool) -> NsitCurveRow {
    NsitCurveRow { alpha, v, best_value, bits: -best_value.log2(), converged }
}

pub fn optimize(a: OptimizeArgs) -> CliResult {
    let opts = solver(a.restarts)?;
    let curve = a.alpha_grid.is_some() || a.v_grid.is_some();
    if curve {
        let alphas = match (&a.alpha_grid, a.alpha) {
            (Some(g), _) => g.0.clone(),
            (None, Some(v)) => vec![v],
            (None, None) => unreachable!("clap requires one of --alpha/--alpha-grid"),
        };
        let vs = a.v_grid.as_ref().map_or(vec![a.v], |g| g.0.clone());
        if Mode::from(a.mode) != Mode::Conditional {
            return Err(CliError::Usage("randomness-vs-NSIT curves use the conditional objective".into()));
        }
        let rows = randomness_vs_nsit_curve(&alphas, &vs, &opts, a.seed)?;
        match a.format {
            Format::Csv => stdout_csv(|out| write_nsit_curve_csv(out, &rows))?,
            Format::Json => print_json(&versioned(serde_json::json!({ "rows": rows })))?,
        }
        return match rows.iter().find(|r| !r.converged) {
            Some(r) => Err(CliError::NotMet(format!("no feasible point found at alpha {} v {}", r.alpha, r.v))),
            None => Ok(()),
        };
    }
    let al = alpha(a.alpha.expect("clap requires --alpha"))?;
    let mode: Mode = a.mode.into();
    let problem = OptProblem::new(al, a.v, mode, Target::MaxOverAll)?;
    let r = maximize(&problem, &opts, a.seed);
    let bits = -r.best_value.log2();
    match a.format {
        Format::Json => print_json(&versioned(serde_json::json!({
            "alpha": al.value(),
            "v": a.v,
            "mode": mode,
            "seed": a.seed,
            "bits": bits,
            "result": r,
        })))?,
        Format::Csv => stdout_csv(|out| write_nsit_curve_csv(out, &[curve_row(al.value(), a.v, r.best_value, r.converged)]))?,
    }
    if r.converged {
        Ok(())
    } else {
        Err(CliError::NotMet(format!("no point met the constraints to tolerance; max residual {:?}", r.residuals)))
    }
}

/// Written next to a trial file as `<file>.manifest.json`.
#[derive(Debug, Serialize, Deserialize)]
pub struct TrialManifest {
    pub schema_version: u32,
    pub n: u64,
    pub seed: u64,
    pub distribution: SettingsDistribution,
    pub schedule: DriftSchedule,
    pub trials_sha256: String,
    /// Unix seconds; the only field that differs between identical runs.
    pub created_unix: u64,
}

pub fn manifest_path(trials: &Path) -> PathBuf {
    let mut name = trials.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(io_at(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::BadFile { path: path.to_path_buf(), message: e.to_string() })
}

pub fn simulate(a: SimulateArgs) -> CliResult {
    let base: Strategy = match (&a.strategy, a.canonical_alpha) {
        (Some(path), _) => read_json(path)?,
        (None, Some(v)) => canonical_strategy(alpha(v)?),
        (None, None) => unreachable!("clap requires one of --strategy/--canonical-alpha"),
    };
    let schedule = DriftSchedule { base, drift: a.drift };
    let dist = resolve_dist(&a.dist, DEFAULT_AUDIT_MASS)?;
    let trials = sample_trials(&schedule, &dist, a.n, a.seed)?;

    let mut buf = Vec::with_capacity(trials.len() * 40);
    write_trials(&mut buf, &trials).map_err(CliError::Stdout)?;
    match &a.out {
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(&buf).and_then(|_| stdout.flush()).map_err(CliError::Stdout)?;
        }
        Some(out) => {
            fs::write(out, &buf).map_err(io_at(out))?;
            let manifest = TrialManifest {
                schema_version: SCHEMA_VERSION,
                n: a.n,
                seed: a.seed,
                distribution: dist,
                schedule,
                trials_sha256: hex_digest(&buf),
                created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            };
            write_json(&manifest_path(out), &manifest)?;
            eprintln!("wrote {} trials to {}", trials.len(), out.display());
        }
    }

    if let Some(dir) = &a.bits_dir {
        if !(a.rounds_per_second > 0.0) {
            return Err(CliError::Usage("--rounds-per-second must be positive".into()));
        }
        bits_from_trials(&trials, a.rounds_per_second).write_to(dir).map_err(io_at(dir))?;
    }
    Ok(())
}

fn load_trials(path: &Path) -> Result<Vec<TrialRecord>, CliError> {
    let file = File::open(path).map_err(io_at(path))?;
    read_trials(BufReader::new(file)).map_err(|e| match e {
        ReadTrialsError::Io(source) => CliError::Io { path: path.to_path_buf(), source },
        malformed => CliError::BadFile { path: path.to_path_buf(), message: malformed.to_string() },
    })
}

/// Distribution behind a trial file: explicit flags win, then the manifest,
/// then the simulate defaults.
fn trial_dist(path: &Path, d: &DistArgs) -> Result<SettingsDistribution, CliError> {
    if d.given() {
        return resolve_dist(d, DEFAULT_AUDIT_MASS);
    }
    let mpath = manifest_path(path);
    if mpath.exists() {
        let m: TrialManifest = read_json(&mpath)?;
        return Ok(m.distribution);
    }
    resolve_dist(d, DEFAULT_AUDIT_MASS)
}

pub fn certify(a: CertifyArgs) -> CliResult {
    let mode: Mode = a.mode.into();
    let confidence = if a.no_memory { Confidence::Asymptotic } else { Confidence::Azuma };
    let report = match (&a.trials, a.i_value) {
        (Some(path), _) => {
            let trials = load_trials(path)?;
            let dist = trial_dist(path, &a.dist)?;
            let spec = default_estimator(&dist);
            let singles_seen = trials.iter().any(|t| t.setting.pair().is_none());
            if dist.has_singles() && !singles_seen {
                return Err(CliError::Usage(
                    "the distribution includes single-measurement rounds but the file has none; pass --no-nsit-audit".into(),
                ));
            }
            certify_trials(&trials, &spec, a.delta, mode, confidence)?
        }
        (None, Some(i_hat)) => {
            let dist = resolve_dist(&a.dist, 0.0)?;
            certify_with(i_hat, a.n.expect("clap requires --n with --I"), &dist, a.delta, mode, confidence)?
        }
        (None, None) => unreachable!("clap requires one of --trials/--I"),
    };
    print_json(&versioned(report))?;
    eprintln!("total_bits {}", report.total_bits);
    if report.total_bits == 0 {
        return Err(CliError::NotMet(format!(
            "no certified randomness: I_hat - epsilon - 1 = {}",
            sig6(report.alpha_eff)
        )));
    }
    Ok(())
}

pub fn memory_curve(a: MemoryCurveArgs) -> CliResult {
    let dist = resolve_dist(&a.dist, 0.0)?;
    let mode: Mode = a.mode.into();
    let curve = lgcert::certification::memory_curve(a.i_value, a.delta, &dist, &a.n_grid.0, mode)?;
    let threshold = threshold_runs(a.i_value, a.delta, dist.q())?;
    match a.format {
        Format::Csv => stdout_csv(|out| write_memory_csv(out, &curve.rows))?,
        Format::Json => print_json(&versioned(serde_json::json!({
            "I_hat": a.i_value,
            "delta": a.delta,
            "q": dist.q(),
            "rows": curve.rows,
            "first_positive": curve.first_positive,
            "threshold_runs": threshold,
        })))?,
    }
    match threshold {
        Some(n) => eprintln!("entropy becomes positive at n = {n}"),
        None => eprintln!("no violation: no number of rounds certifies randomness"),
    }
    Ok(())
}

pub fn nsit_audit(a: NsitAuditArgs) -> CliResult {
    let nq = [a.nq; 3];
    if let Some(path) = &a.trials {
        let trials = load_trials(path)?;
        let hat = nsit_estimates(&trials)?;
        let eps = nsit_deviation(trials.len() as u64, a.delta, nq)?;
        let within: Vec<bool> = hat.iter().zip(&eps).map(|(h, e)| h.abs() <= *e).collect();
        print_json(&versioned(serde_json::json!({
            "n": trials.len(),
            "delta": a.delta,
            "nsit_hat": hat,
            "nsit_epsilon": eps,
            "within": within,
        })))?;
        if within.iter().all(|w| *w) {
            return Ok(());
        }
        return Err(CliError::NotMet("an NSIT estimate exceeds its deviation radius".into()));
    }
    let rows = a
        .n_grid
        .0
        .iter()
        .map(|&n| nsit_deviation(n, a.delta, nq).map(|e| (n, e)))
        .collect::<Result<Vec<_>, _>>()?;
    stdout_csv(|out| {
        let mut out = BufWriter::new(out);
        writeln!(out, "n,epsilon_1,epsilon_2,epsilon_3")?;
        for (n, e) in rows {
            writeln!(out, "{n},{},{},{}", sig6(e[0]), sig6(e[1]), sig6(e[2]))?;
        }
        out.flush()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digests_are_hex() {
        assert_eq!(hex_digest(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn manifest_sits_next_to_trials() {
        assert_eq!(manifest_path(Path::new("/tmp/t.jsonl")), PathBuf::from("/tmp/t.jsonl.manifest.json"));
    }
}
