//! Numerical maximization of outcome probabilities over all strategies that
//! reach a given inequality value while (approximately) respecting the three
//! NSIT conditions.
//!
//! The feasible set is `{ s : LGI(s) = 1 + α, |NSIT_j(s)| ≤ v }`. Each target
//! probability is maximized separately by a multi-start local search:
//! every start runs an augmented-Lagrangian loop whose inner solver is the
//! Nelder–Mead simplex of [`simplex`], then a Gauss–Newton projection pushes
//! the point onto the constraint surface. Restarts are independent and run
//! in parallel; the reduction picks the highest feasible value and breaks
//! ties by restart index, so results do not depend on scheduling.

pub mod param;
pub mod simplex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{canonical_strategy, Alpha, Mode};
use crate::error::{Error, Result};
use crate::qubit::{probability_table, Outcome, Pair, ProbabilityTable, Strategy};
use param::DIM;
use simplex::SimplexOptions;

/// Marginals below this make a conditional objective unusable for a start.
pub const MARGINAL_FLOOR: f64 = 1e-6;

/// One of the twelve `(pair, a, b)` outcome probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct TargetOutcome {
    pub pair: Pair,
    pub a: Outcome,
    pub b: Outcome,
}

impl TargetOutcome {
    pub fn all() -> impl Iterator<Item = TargetOutcome> {
        Pair::ALL.into_iter().flat_map(|pair| {
            Outcome::BOTH.into_iter().flat_map(move |a| Outcome::BOTH.into_iter().map(move |b| TargetOutcome { pair, a, b }))
        })
    }

    fn ordinal(&self) -> u64 {
        (self.pair.index() * 4 + self.a.index() * 2 + self.b.index()) as u64
    }

    /// Joint or conditional probability of this outcome in `table`.
    pub fn value(&self, table: &ProbabilityTable, mode: Mode) -> f64 {
        let joint = table.joint(self.pair, self.a, self.b);
        match mode {
            Mode::Joint => joint,
            Mode::Conditional => {
                let marginal = table.single(self.pair.times().0, self.a);
                if marginal < MARGINAL_FLOOR { -1.0 } else { joint / marginal }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    /// Maximum over all twelve outcomes, i.e. the min-entropy guess.
    MaxOverAll,
    Specific(TargetOutcome),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptProblem {
    pub alpha: Alpha,
    /// Allowed `|NSIT_j|`; zero demands exact no-signalling-in-time.
    pub nsit_tolerance: f64,
    pub objective: Mode,
    pub target: Target,
}

impl OptProblem {
    pub fn new(alpha: Alpha, nsit_tolerance: f64, objective: Mode, target: Target) -> Result<Self> {
        if !(0.0..0.5).contains(&nsit_tolerance) {
            return Err(Error::InvalidArgument(format!("NSIT tolerance {nsit_tolerance} outside [0, 0.5)")));
        }
        Ok(OptProblem { alpha, nsit_tolerance, objective, target })
    }
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Local searches per target, including the canonical and warm starts.
    pub restarts: usize,
    pub penalty_start: f64,
    pub penalty_growth: f64,
    pub penalty_stages: usize,
    /// Extra multiplier updates at the final penalty weight.
    pub multiplier_stages: usize,
    pub evals_per_stage: usize,
    /// A point is feasible when every constraint holds to this.
    pub constraint_tol: f64,
    /// Seed the search with the saturating strategy for `α`.
    pub include_canonical: bool,
    /// Additional starting strategies, tried after the canonical one.
    pub warm_starts: Vec<Strategy>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            restarts: 64,
            penalty_start: 1e2,
            penalty_growth: 10.0,
            penalty_stages: 4,
            multiplier_stages: 4,
            evals_per_stage: 3000,
            constraint_tol: 1e-6,
            include_canonical: true,
            warm_starts: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OptResult {
    pub best_value: f64,
    pub best_strategy: Strategy,
    /// Winning outcome; `None` for custom objectives.
    pub target: Option<TargetOutcome>,
    /// `(LGI − (1 + α), NSIT_1, NSIT_2, NSIT_3)` at the best strategy.
    pub residuals: [f64; 4],
    pub restarts_used: usize,
    pub converged: bool,
}

/// `(LGI − (1 + α), v1, v2, v3)`.
pub fn residuals(s: &Strategy, alpha: Alpha) -> [f64; 4] {
    let t = probability_table(s);
    table_residuals(&t, alpha.value())
}

fn table_residuals(t: &ProbabilityTable, alpha: f64) -> [f64; 4] {
    [t.lgi - 1.0 - alpha, t.nsit[0], t.nsit[1], t.nsit[2]]
}

/// Largest amount by which the constraints are missed.
fn violation(res: &[f64; 4], v: f64) -> f64 {
    res[1..].iter().fold(res[0].abs(), |m, c| m.max((c.abs() - v).max(0.0)))
}

type ObjectiveFn<'a> = dyn Fn(&Strategy, &ProbabilityTable) -> f64 + Sync + 'a;

struct Candidate {
    params: [f64; DIM],
    value: f64,
    residuals: [f64; 4],
    violation: f64,
}

struct Search<'a> {
    alpha: f64,
    v: f64,
    objective: &'a ObjectiveFn<'a>,
    opts: &'a SolverOptions,
}

#[derive(Clone, Copy)]
struct Multipliers {
    eq: [f64; 4],
    upper: [f64; 4],
    lower: [f64; 4],
}

impl<'a> Search<'a> {
    fn evaluate(&self, p: &[f64]) -> (f64, [f64; 4]) {
        let s = param::decode(p);
        let t = probability_table(&s);
        ((self.objective)(&s, &t), table_residuals(&t, self.alpha))
    }

    fn merit(&self, p: &[f64], lam: &Multipliers, mu: f64) -> f64 {
        let (obj, c) = self.evaluate(p);
        let mut m = -obj + lam.eq[0] * c[0] + 0.5 * mu * c[0] * c[0];
        for j in 1..4 {
            if self.v == 0.0 {
                m += lam.eq[j] * c[j] + 0.5 * mu * c[j] * c[j];
            } else {
                for (g, l) in [(c[j] - self.v, lam.upper[j]), (-c[j] - self.v, lam.lower[j])] {
                    let z = (l + mu * g).max(0.0);
                    m += (z * z - l * l) / (2.0 * mu);
                }
            }
        }
        m
    }

    fn update(&self, lam: &mut Multipliers, c: &[f64; 4], mu: f64) {
        lam.eq[0] += mu * c[0];
        for j in 1..4 {
            if self.v == 0.0 {
                lam.eq[j] += mu * c[j];
            } else {
                lam.upper[j] = (lam.upper[j] + mu * (c[j] - self.v)).max(0.0);
                lam.lower[j] = (lam.lower[j] + mu * (-c[j] - self.v)).max(0.0);
            }
        }
    }

    fn candidate(&self, params: [f64; DIM]) -> Candidate {
        let (value, residuals) = self.evaluate(&params);
        Candidate { params, value, residuals, violation: violation(&residuals, self.v) }
    }

    fn local_search(&self, start: [f64; DIM]) -> Candidate {
        let opts = self.opts;
        let mut x = start;
        let mut lam = Multipliers { eq: [0.0; 4], upper: [0.0; 4], lower: [0.0; 4] };
        let mut mu = opts.penalty_start;
        let stages = opts.penalty_stages + opts.multiplier_stages;
        for stage in 0..stages {
            let simplex = SimplexOptions {
                max_evals: opts.evals_per_stage,
                initial_step: (0.3 * 0.4f64.powi(stage as i32)).max(2e-3),
                ..SimplexOptions::default()
            };
            let r = simplex::minimize(|p| self.merit(p, &lam, mu), &x, &simplex);
            x.copy_from_slice(&r.x);
            let (_, c) = self.evaluate(&x);
            self.update(&mut lam, &c, mu);
            if stage + 1 >= opts.penalty_stages && violation(&c, self.v) < 0.1 * opts.constraint_tol {
                break;
            }
            if stage + 1 < opts.penalty_stages {
                mu *= opts.penalty_growth;
            }
        }
        self.project(&mut x);
        let found = self.candidate(x);

        let initial = self.candidate(start);
        let tol = opts.constraint_tol;
        if initial.violation <= tol && (found.violation > tol || initial.value > found.value) {
            initial
        } else {
            found
        }
    }

    /// Gauss–Newton minimum-norm steps onto the violated constraints.
    fn project(&self, x: &mut [f64; DIM]) {
        const H: f64 = 1e-7;
        for _ in 0..40 {
            let (_, c) = self.evaluate(x);
            let current = violation(&c, self.v);
            if current <= 1e-14 {
                return;
            }
            // (constraint index, target value)
            let mut active: Vec<(usize, f64)> = vec![(0, 0.0)];
            for j in 1..4 {
                if self.v == 0.0 {
                    active.push((j, 0.0));
                } else if c[j].abs() > self.v {
                    active.push((j, self.v.copysign(c[j])));
                }
            }
            let m = active.len();
            let mut jac = [[0.0; DIM]; 4];
            for k in 0..DIM {
                let mut fwd = *x;
                let mut back = *x;
                fwd[k] += H;
                back[k] -= H;
                let (_, cf) = self.evaluate(&fwd);
                let (_, cb) = self.evaluate(&back);
                for (row, &(j, _)) in active.iter().enumerate() {
                    jac[row][k] = (cf[j] - cb[j]) / (2.0 * H);
                }
            }
            let mut gram = [[0.0; 4]; 4];
            let mut rhs = [0.0; 4];
            for r in 0..m {
                for s in 0..m {
                    gram[r][s] = (0..DIM).map(|k| jac[r][k] * jac[s][k]).sum();
                }
                gram[r][r] += 1e-14;
                rhs[r] = c[active[r].0] - active[r].1;
            }
            let Some(y) = solve_small(gram, rhs, m) else { return };
            let mut step = [0.0; DIM];
            for k in 0..DIM {
                step[k] = -(0..m).map(|r| jac[r][k] * y[r]).sum::<f64>();
            }
            let mut scale = 1.0;
            let mut improved = false;
            for _ in 0..30 {
                let mut trial = *x;
                for k in 0..DIM {
                    trial[k] += scale * step[k];
                }
                let (_, ct) = self.evaluate(&trial);
                if violation(&ct, self.v) < current {
                    *x = trial;
                    improved = true;
                    break;
                }
                scale *= 0.5;
            }
            if !improved {
                return;
            }
        }
    }

    fn starts(&self, stream: u64, seed: u64) -> Vec<[f64; DIM]> {
        let mut starts = Vec::with_capacity(self.opts.restarts.max(1));
        if self.opts.include_canonical {
            if let Ok(a) = Alpha::new(self.alpha) {
                starts.push(param::encode(&canonical_strategy(a)));
            }
        }
        starts.extend(self.opts.warm_starts.iter().map(param::encode));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        while starts.len() < self.opts.restarts.max(1) {
            starts.push(param::random_point(&mut rng));
        }
        starts
    }

    /// Best candidate and the number of local searches.
    fn run(&self, stream: u64, seed: u64) -> (Candidate, usize) {
        let starts = self.starts(stream, seed);
        let found: Vec<Candidate> = starts.par_iter().map(|s| self.local_search(*s)).collect();
        let count = found.len();
        let tol = self.opts.constraint_tol;
        let mut best: Option<Candidate> = None;
        for c in found {
            let better = match &best {
                None => true,
                Some(b) => match (c.violation <= tol, b.violation <= tol) {
                    (true, false) => true,
                    (false, true) => false,
                    (true, true) => c.value > b.value,
                    (false, false) => c.violation < b.violation,
                },
            };
            if better {
                best = Some(c);
            }
        }
        (best.expect("at least one start"), count)
    }
}

fn finish(c: Candidate, target: Option<TargetOutcome>, restarts_used: usize, tol: f64) -> OptResult {
    OptResult {
        best_value: c.value,
        best_strategy: param::decode(&c.params),
        target,
        residuals: c.residuals,
        restarts_used,
        converged: c.violation <= tol,
    }
}

/// Maximize the problem's target probability. Non-convergence is reported
/// through [`OptResult::converged`], never as an error.
pub fn maximize(problem: &OptProblem, opts: &SolverOptions, seed: u64) -> OptResult {
    let targets: Vec<TargetOutcome> = match problem.target {
        Target::Specific(t) => vec![t],
        Target::MaxOverAll => TargetOutcome::all().collect(),
    };
    let tol = opts.constraint_tol;
    let mut best: Option<(Candidate, TargetOutcome)> = None;
    let mut used = 0;
    for target in targets {
        let mode = problem.objective;
        let objective = move |_: &Strategy, t: &ProbabilityTable| target.value(t, mode);
        let search = Search { alpha: problem.alpha.value(), v: problem.nsit_tolerance, objective: &objective, opts };
        let (c, n) = search.run(target.ordinal(), seed);
        used += n;
        let better = match &best {
            None => true,
            Some((b, _)) => match (c.violation <= tol, b.violation <= tol) {
                (true, false) => true,
                (false, true) => false,
                (true, true) => c.value > b.value,
                (false, false) => c.violation < b.violation,
            },
        };
        if better {
            best = Some((c, target));
        }
    }
    let (c, target) = best.expect("twelve or one target");
    finish(c, Some(target), used, tol)
}

/// Maximize an arbitrary smooth function of the strategy over the same
/// feasible set.
pub fn maximize_with<F>(objective: F, alpha: Alpha, nsit_tolerance: f64, opts: &SolverOptions, seed: u64) -> OptResult
where
    F: Fn(&Strategy, &ProbabilityTable) -> f64 + Sync,
{
    let search = Search { alpha: alpha.value(), v: nsit_tolerance, objective: &objective, opts };
    let (c, n) = search.run(u64::MAX, seed);
    finish(c, None, n, opts.constraint_tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NsitCurveRow {
    pub alpha: f64,
    pub v: f64,
    pub best_value: f64,
    pub bits: f64,
    pub converged: bool,
}

/// Conditional-mode randomness over an `(α, v)` grid. At each `α` the
/// tolerances are processed in increasing order and every target is warm
/// started from its optimum at the previous tolerance, which is feasible
/// for the looser problem.
pub fn randomness_vs_nsit_curve(alphas: &[f64], v_values: &[f64], opts: &SolverOptions, seed: u64) -> Result<Vec<NsitCurveRow>> {
    if alphas.is_empty() || v_values.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let alphas: Vec<Alpha> = alphas.iter().map(|&a| Alpha::new(a)).collect::<Result<_>>()?;
    for &v in v_values {
        OptProblem::new(alphas[0], v, Mode::Conditional, Target::MaxOverAll)?;
    }
    let mut order: Vec<usize> = (0..v_values.len()).collect();
    order.sort_by(|&i, &j| v_values[i].total_cmp(&v_values[j]));

    let mut rows = Vec::with_capacity(alphas.len() * v_values.len());
    for &alpha in &alphas {
        let mut per_v: Vec<Option<NsitCurveRow>> = vec![None; v_values.len()];
        let mut previous: Vec<Option<Strategy>> = vec![None; 12];
        for &vi in &order {
            let v = v_values[vi];
            let mut best: Option<OptResult> = None;
            for (k, target) in TargetOutcome::all().enumerate() {
                let mut o = opts.clone();
                o.warm_starts.extend(previous[k]);
                let problem = OptProblem::new(alpha, v, Mode::Conditional, Target::Specific(target))?;
                let r = maximize(&problem, &o, seed);
                if r.converged {
                    previous[k] = Some(r.best_strategy);
                }
                let better = match &best {
                    None => true,
                    Some(b) => (r.converged && !b.converged) || (r.converged == b.converged && r.best_value > b.best_value),
                };
                if better {
                    best = Some(r);
                }
            }
            let best = best.expect("twelve targets");
            per_v[vi] = Some(NsitCurveRow {
                alpha: alpha.value(),
                v,
                best_value: best.best_value,
                bits: -best.best_value.log2(),
                converged: best.converged,
            });
        }
        rows.extend(per_v.into_iter().map(|r| r.expect("filled")));
    }
    Ok(rows)
}

fn solve_small(mut a: [[f64; 4]; 4], mut b: [f64; 4], m: usize) -> Option<[f64; 4]> {
    for col in 0..m {
        let pivot = (col..m).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..m {
            let f = a[row][col] / a[col][col];
            for k in col..m {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..m).rev() {
        let s: f64 = (row + 1..m).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{pstar_conditional, pstar_joint};
    use crate::qubit::PovmParams;

    fn alpha(v: f64) -> Alpha {
        Alpha::new(v).unwrap()
    }

    fn quick() -> SolverOptions {
        SolverOptions { restarts: 8, ..SolverOptions::default() }
    }

    #[test]
    fn residual_examples() {
        let r = residuals(&canonical_strategy(alpha(0.37)), alpha(0.37));
        assert!(r.iter().all(|v| v.abs() < 1e-10));
        let r = residuals(&Strategy::trivial(), alpha(0.5));
        assert!((r[0] + 0.5).abs() < 1e-12 && r[1..].iter().all(|v| v.abs() < 1e-12));
        let mut s = canonical_strategy(alpha(0.5));
        s.povm = PovmParams::new(0.2, 0.0).unwrap();
        assert!(residuals(&s, alpha(0.5))[0] <= -0.5 + 1e-12);
    }

    #[test]
    fn canonical_start_is_kept() {
        let problem = OptProblem::new(
            alpha(0.5),
            0.0,
            Mode::Joint,
            Target::Specific(TargetOutcome { pair: Pair::Q13, a: Outcome::Plus, b: Outcome::Minus }),
        )
        .unwrap();
        let opts = SolverOptions { restarts: 1, ..SolverOptions::default() };
        let r = maximize(&problem, &opts, 0);
        assert!(r.converged);
        // α = 0.5 is the top of the LGI range, so the constraint is locally
        // quadratic and round-off feasibility admits O(1e-8) drift upward.
        assert!(r.best_value >= 0.375 - 1e-12 && r.best_value <= 0.375 + 1e-6, "{}", r.best_value);
    }

    #[test]
    fn specific_target_reaches_bound_without_canonical_start() {
        let problem = OptProblem::new(
            alpha(0.3),
            0.0,
            Mode::Joint,
            Target::Specific(TargetOutcome { pair: Pair::Q13, a: Outcome::Plus, b: Outcome::Minus }),
        )
        .unwrap();
        let opts = SolverOptions { restarts: 16, include_canonical: false, ..SolverOptions::default() };
        let r = maximize(&problem, &opts, 42);
        assert!(r.converged);
        assert!((r.best_value - pstar_joint(alpha(0.3))).abs() < 2e-3, "{}", r.best_value);
        assert!(r.residuals.iter().all(|v| v.abs() <= 1e-6));
    }

    #[test]
    fn conditional_max_over_all() {
        let problem = OptProblem::new(alpha(0.5), 0.0, Mode::Conditional, Target::MaxOverAll).unwrap();
        let r = maximize(&problem, &quick(), 1);
        assert!(r.converged);
        assert!((r.best_value - pstar_conditional(alpha(0.5))).abs() < 2e-3);
        assert_eq!(r.restarts_used, 12 * 8);
    }

    #[test]
    fn soundness_of_reported_strategy() {
        let problem = OptProblem::new(alpha(0.2), 0.0, Mode::Joint, Target::MaxOverAll).unwrap();
        let r = maximize(&problem, &quick(), 9);
        let t = probability_table(&r.best_strategy);
        let target = r.target.unwrap();
        assert!((target.value(&t, Mode::Joint) - r.best_value).abs() < 1e-9);
        let res = residuals(&r.best_strategy, alpha(0.2));
        assert!(res.iter().all(|v| v.abs() <= 1e-6), "{res:?}");
    }

    #[test]
    fn deterministic_for_seed() {
        let problem = OptProblem::new(alpha(0.4), 0.02, Mode::Conditional, Target::MaxOverAll).unwrap();
        let opts = SolverOptions { restarts: 4, ..SolverOptions::default() };
        let a = maximize(&problem, &opts, 5);
        let b = maximize(&problem, &opts, 5);
        assert_eq!(a.best_value.to_bits(), b.best_value.to_bits());
        assert_eq!(a.best_strategy, b.best_strategy);
        assert_eq!(a.residuals, b.residuals);
    }

    #[test]
    fn relaxed_tolerance_respected() {
        let problem = OptProblem::new(alpha(0.45), 0.05, Mode::Conditional, Target::MaxOverAll).unwrap();
        let r = maximize(&problem, &quick(), 3);
        assert!(r.converged);
        assert!(r.residuals[0].abs() <= 1e-6);
        assert!(r.residuals[1..].iter().all(|v| v.abs() <= 0.05 + 1e-6));
        assert!(r.best_value >= pstar_conditional(alpha(0.45)) - 1e-9);
        assert!(r.best_value < 1.0);
    }

    #[test]
    fn problem_validation() {
        assert!(OptProblem::new(alpha(0.3), 0.5, Mode::Joint, Target::MaxOverAll).is_err());
        assert!(OptProblem::new(alpha(0.3), -0.1, Mode::Joint, Target::MaxOverAll).is_err());
        assert_eq!(randomness_vs_nsit_curve(&[], &[0.0], &quick(), 0), Err(Error::EmptyGrid));
        assert!(randomness_vs_nsit_curve(&[0.7], &[0.0], &quick(), 0).is_err());
    }

    #[test]
    fn custom_objective() {
        // cos 2z₁ never exceeds α + √(1 − 2α) when NSIT holds.
        let a = alpha(0.5);
        let r = maximize_with(|s, _| (2.0 * s.u1.z()).cos(), a, 0.0, &quick(), 2);
        assert!(r.converged);
        assert!((r.best_value - 0.5).abs() < 2e-3, "{}", r.best_value);
        assert!(r.target.is_none());
    }

    #[test]
    fn small_solver() {
        let a = [[4.0, 1.0, 0.0, 0.0], [1.0, 3.0, 0.0, 0.0], [0.0; 4], [0.0; 4]];
        let x = solve_small(a, [1.0, 2.0, 0.0, 0.0], 2).unwrap();
        assert!((4.0 * x[0] + x[1] - 1.0).abs() < 1e-14);
        assert!((x[0] + 3.0 * x[1] - 2.0).abs() < 1e-14);
    }
}
