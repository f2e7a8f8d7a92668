//! `repro-paper`: every headline number and figure table in one run.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use lgcert::bounds::{bound_curve, canonical_strategy, entropy, pstar, Alpha, Mode};
use lgcert::certification::{
    certify, certify_trials, certify_with, default_estimator, memory_curve, nsit_deviation, threshold_runs,
    Confidence, SettingsDistribution, DEFAULT_AUDIT_MASS, NSIT_INCREMENT,
};
use lgcert::optimizer::{maximize, randomness_vs_nsit_curve, OptProblem, SolverOptions, Target};
use lgcert::report::{sig6, write_bound_csv, write_memory_csv, write_nsit_curve_csv};
use lgcert::simulator::{sample_trials, DriftSchedule};
use serde::Serialize;

use crate::commands::{io_at, versioned, write_json, CliError, CliResult};
use crate::ReproArgs;

#[derive(Debug, Serialize)]
struct Check {
    quantity: String,
    reference: f64,
    computed: f64,
    tolerance: f64,
    pass: bool,
}

fn check(quantity: impl Into<String>, reference: f64, computed: f64, tolerance: f64) -> Check {
    Check { quantity: quantity.into(), reference, computed, tolerance, pass: (computed - reference).abs() <= tolerance }
}

fn csv_file(dir: &Path, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> CliResult {
    let path = dir.join(name);
    let file = File::create(&path).map_err(io_at(&path))?;
    let mut out = BufWriter::new(file);
    f(&mut out).and_then(|_| out.flush()).map_err(io_at(&path))
}

fn a(v: f64) -> Alpha {
    Alpha::new(v).expect("grid inside (0, 0.5]")
}

pub fn run(args: ReproArgs) -> CliResult {
    if args.restarts == 0 {
        return Err(CliError::Usage("--restarts must be at least 1".into()));
    }
    let dir = &args.out_dir;
    fs::create_dir_all(dir).map_err(io_at(dir))?;
    let mut checks = Vec::new();

    // analytic bounds (figure curves)
    let grid: Vec<f64> = (0..=50).map(|k| k as f64 * 0.01).collect();
    for (mode, file, endpoint) in [(Mode::Joint, "bound_joint.csv", 1.415), (Mode::Conditional, "bound_conditional.csv", 0.415)] {
        let rows = bound_curve(&grid, mode)?;
        csv_file(dir, file, |out| write_bound_csv(out, &rows))?;
        checks.push(check(format!("{mode} entropy at alpha 0.5"), endpoint, entropy(mode, Alpha::MAX), 0.005));
    }

    // optimizer against the analytic bound (figure points)
    let opts = SolverOptions { restarts: args.restarts, ..Default::default() };
    let alphas: Vec<f64> = if args.quick { vec![0.1, 0.3, 0.5] } else { (1..=10).map(|k| 0.05 * k as f64).collect() };
    let mut points = Vec::new();
    for mode in [Mode::Joint, Mode::Conditional] {
        let mut worst: f64 = 0.0;
        for &al in &alphas {
            let r = maximize(&OptProblem::new(a(al), 0.0, mode, Target::MaxOverAll)?, &opts, args.seed);
            let analytic = pstar(mode, a(al));
            worst = worst.max((r.best_value - analytic).abs() + if r.converged { 0.0 } else { f64::INFINITY });
            points.push((al, mode, r.best_value, analytic, r.converged));
        }
        checks.push(check(format!("{mode} optimizer max gap to bound"), 0.0, worst, 2e-3));
    }
    csv_file(dir, "optimizer.csv", |out| {
        writeln!(out, "alpha,mode,numeric,analytic,converged")?;
        for (al, mode, numeric, analytic, converged) in &points {
            writeln!(out, "{},{mode},{},{},{converged}", sig6(*al), sig6(*numeric), sig6(*analytic))?;
        }
        Ok(())
    })?;

    // memory-effect certification (headline numbers and run-count curve)
    let uniform = SettingsDistribution::uniform();
    let biased = SettingsDistribution::pairs(1.0 / 6.0, 5.0 / 12.0, 5.0 / 12.0)?;
    let cond = Mode::Conditional;
    let u = certify(1.31, 100_000, &uniform, 0.01, cond)?;
    let b = certify(1.31, 100_000, &biased, 0.01, cond)?;
    let free = certify_with(1.31, 100_000, &uniform, 0.01, cond, Confidence::Asymptotic)?;
    checks.push(check("certified bits, uniform settings, n=1e5", 3673.0, u.total_bits as f64, 2.0));
    checks.push(check("certified bits, biased settings, n=1e5", 2777.0, b.total_bits as f64, 2.0));
    checks.push(check("bits per round without memory effect", 0.05406, free.bits_per_round, 1e-4));
    let n_grid: Vec<u64> = (1..=100).map(|k| 1000 * k).collect();
    for (dist, file) in [(&uniform, "memory_uniform.csv"), (&biased, "memory_biased.csv")] {
        let curve = memory_curve(1.31, 0.01, dist, &n_grid, cond)?;
        csv_file(dir, file, |out| write_memory_csv(out, &curve.rows))?;
    }
    let t_uniform = threshold_runs(1.31, 0.01, uniform.q())?.unwrap_or(0);
    let t_biased = threshold_runs(1.31, 0.01, biased.q())?.unwrap_or(0);
    let crossing = |q: f64| (2.0 * (1.0 / q + 1.5f64).powi(2) * 100f64.ln() / 0.31f64.powi(2)).ceil();
    checks.push(check("entropy threshold runs, uniform", crossing(uniform.q()), t_uniform as f64, 0.0));
    checks.push(check("entropy threshold runs, biased", crossing(biased.q()), t_biased as f64, 0.0));

    // NSIT deviation radii
    let audit_grid: Vec<u64> = (1..=20).map(|k| 10_000 * k).collect();
    csv_file(dir, "nsit_audit.csv", |out| {
        writeln!(out, "n,epsilon")?;
        for &n in &audit_grid {
            let e = nsit_deviation(n, 0.01, [NSIT_INCREMENT; 3]).expect("valid inputs");
            writeln!(out, "{n},{}", sig6(e[0]))?;
        }
        Ok(())
    })?;
    checks.push(check("NSIT deviation at n=1e5", 0.0144, nsit_deviation(100_000, 0.01, [NSIT_INCREMENT; 3])?[0], 5e-5));

    // relaxed NSIT
    let (curve_alphas, curve_vs) =
        if args.quick { (vec![0.5], vec![0.0, 0.05]) } else { (vec![0.1, 0.2, 0.3, 0.4, 0.5], vec![0.0, 0.01, 0.02, 0.05]) };
    let rows = randomness_vs_nsit_curve(&curve_alphas, &curve_vs, &opts, args.seed)?;
    csv_file(dir, "nsit_curve.csv", |out| write_nsit_curve_csv(out, &rows))?;
    let end = rows.iter().find(|r| r.alpha == 0.5 && r.v == 0.05).expect("grid contains the corner");
    checks.push(Check {
        quantity: "bits at alpha 0.5 with NSIT tolerance 0.05 (> 0)".into(),
        reference: 0.0,
        computed: end.bits,
        tolerance: 0.0,
        pass: end.bits > 0.0 && end.converged,
    });

    // simulated pipeline
    let n = 1_000_000;
    let dist = uniform.with_singles(DEFAULT_AUDIT_MASS)?;
    let trials = sample_trials(&DriftSchedule::fixed(canonical_strategy(a(0.31))), &dist, n, args.seed)?;
    let r = certify_trials(&trials, &default_estimator(&dist), 0.01, cond, Confidence::Azuma)?;
    let want = certify(1.31, n, &dist, 0.01, cond)?.total_bits as f64;
    checks.push(check(format!("simulated pipeline bits, n={n}"), want, r.total_bits as f64, 0.05 * want));
    let worst_nsit = r.nsit_hat.map_or(f64::INFINITY, |h| h.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    checks.push(check("simulated pipeline max |NSIT estimate|", 0.0, worst_nsit, 0.005));

    csv_file(dir, "summary.csv", |out| {
        writeln!(out, "quantity,reference,computed,tolerance,pass")?;
        for c in &checks {
            writeln!(out, "\"{}\",{},{},{},{}", c.quantity, sig6(c.reference), sig6(c.computed), sig6(c.tolerance), c.pass)?;
        }
        Ok(())
    })?;
    write_json(&dir.join("summary.json"), &versioned(serde_json::json!({ "quick": args.quick, "checks": checks })))?;

    for c in &checks {
        println!(
            "[{}] {}: {} (reference {}, tolerance {})",
            if c.pass { "PASS" } else { "FAIL" },
            c.quantity,
            sig6(c.computed),
            sig6(c.reference),
            sig6(c.tolerance)
        );
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    if failed > 0 {
        return Err(CliError::NotMet(format!("{failed} of {} checks failed", checks.len())));
    }
    Ok(())
}
