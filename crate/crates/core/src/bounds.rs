//! Closed-form min-entropy bounds as a function of the inequality excess.
//!
//! With the inequality value at `1 + α` and all three NSIT conditions met,
//! the largest joint outcome probability is
//!
//! ```text
//! P*(α) = (1 + α + √(1 − 2α)) / 4
//! ```
//!
//! and the largest conditional probability `P(b|a)` is `2 P*(α)`. The
//! certified min-entropy is `−log₂` of either. Both are strictly increasing
//! on `(0, 0.5]`, from 1 and 0 bits respectively at zero violation up to
//! `−log₂(3/8) ≈ 1.415` and `−log₂(3/4) ≈ 0.415` at the quantum maximum.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubit::{BlochVector, PovmParams, Strategy, UnitaryParams};

/// Largest quantum value of the three-time inequality.
pub const QUANTUM_MAX_LGI: f64 = 1.5;

/// Excess `α` of the inequality over its classical bound, `LGI = 1 + α`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Alpha(f64);

impl Alpha {
    pub const MAX: Alpha = Alpha(0.5);

    pub fn new(value: f64) -> Result<Alpha> {
        if value.is_finite() && value > 0.0 && value <= 0.5 {
            Ok(Alpha(value))
        } else {
            Err(Error::AlphaOutOfRange(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Alpha {
    type Error = Error;
    fn try_from(v: f64) -> Result<Alpha> {
        Alpha::new(v)
    }
}

impl From<Alpha> for f64 {
    fn from(a: Alpha) -> f64 {
        a.0
    }
}

/// Which probability the adversary is assumed to guess.
///
/// `Joint` guesses a whole outcome pair. `Conditional` guesses the second
/// outcome given the first, which stays secure when the initial state may be
/// correlated with the adversary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Joint,
    #[default]
    Conditional,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Joint => "joint",
            Mode::Conditional => "conditional",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Mode> {
        match s {
            "joint" => Ok(Mode::Joint),
            "conditional" => Ok(Mode::Conditional),
            other => Err(Error::InvalidArgument(format!("unknown mode `{other}` (joint|conditional)"))),
        }
    }
}

// Both formulas below are continuous on [0, 0.5]; the public wrappers only
// admit certified values, the curve also evaluates at 0.
fn pstar_joint_raw(alpha: f64) -> f64 {
    0.25 * (1.0 + alpha + (1.0 - 2.0 * alpha).max(0.0).sqrt())
}

fn entropy_raw(mode: Mode, alpha: f64) -> f64 {
    let p = match mode {
        Mode::Joint => pstar_joint_raw(alpha),
        Mode::Conditional => 2.0 * pstar_joint_raw(alpha),
    };
    0.0 - p.log2()
}

/// `P*(α) = (1 + α + √(1 − 2α))/4`.
pub fn pstar_joint(alpha: Alpha) -> f64 {
    pstar_joint_raw(alpha.0)
}

/// `P̄*(α) = 2 P*(α)`.
pub fn pstar_conditional(alpha: Alpha) -> f64 {
    2.0 * pstar_joint_raw(alpha.0)
}

pub fn pstar(mode: Mode, alpha: Alpha) -> f64 {
    match mode {
        Mode::Joint => pstar_joint(alpha),
        Mode::Conditional => pstar_conditional(alpha),
    }
}

pub fn entropy_joint(alpha: Alpha) -> f64 {
    entropy_raw(Mode::Joint, alpha.0)
}

pub fn entropy_conditional(alpha: Alpha) -> f64 {
    entropy_raw(Mode::Conditional, alpha.0)
}

/// Certified bits per round for `mode`.
pub fn entropy(mode: Mode, alpha: Alpha) -> f64 {
    entropy_raw(mode, alpha.0)
}

/// `cos 2z₁ = cos 2z₂` on the saturating family.
pub fn canonical_cos2z(alpha: Alpha) -> f64 {
    0.5 * (1.0 - (1.0 - 2.0 * alpha.0).sqrt())
}

/// A strategy meeting every constraint with `P(+,−|Q1,Q3) = P*(α)`:
/// maximally mixed state, `cos t = b = 1`, unbiased projective readout and
/// equal rotation angles on both unitaries.
pub fn canonical_strategy(alpha: Alpha) -> Strategy {
    let z = 0.5 * canonical_cos2z(alpha).acos();
    let u = UnitaryParams::new(0.0, 0.0, z).expect("finite angle");
    Strategy::new(BlochVector::MIXED, u, u, PovmParams::PROJECTIVE)
}

/// One row of a tabulated bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundRow {
    pub alpha: f64,
    pub bits: f64,
    pub mode: Mode,
    /// Set for `α = 0`, which is the zero-violation limit rather than a
    /// certifiable point.
    pub limit: bool,
}

/// Tabulate the entropy bound over `grid`. `α = 0` is allowed and marked as a
/// limit row.
pub fn bound_curve(grid: &[f64], mode: Mode) -> Result<Vec<BoundRow>> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    grid.iter()
        .map(|&alpha| {
            if alpha == 0.0 {
                Ok(BoundRow { alpha, bits: entropy_raw(mode, 0.0), mode, limit: true })
            } else {
                let a = Alpha::new(alpha)?;
                Ok(BoundRow { alpha, bits: entropy(mode, a), mode, limit: false })
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubit::{conditional_probability, probability_table, Outcome, Pair};
    use approx::assert_abs_diff_eq;

    fn a(v: f64) -> Alpha {
        Alpha::new(v).unwrap()
    }

    #[test]
    fn alpha_domain() {
        assert!(Alpha::new(0.0).is_err());
        assert!(Alpha::new(0.5000001).is_err());
        assert!(Alpha::new(-0.1).is_err());
        assert!(Alpha::new(f64::NAN).is_err());
        assert!(Alpha::new(0.5).is_ok());
    }

    #[test]
    fn joint_bound_values() {
        assert_abs_diff_eq!(pstar_joint(a(0.5)), 0.375, epsilon = 1e-15);
        assert_abs_diff_eq!(pstar_joint(a(1e-12)), 0.5, epsilon = 1e-11);
        assert_abs_diff_eq!(pstar_joint(a(0.3)), 0.483113883008419, epsilon = 1e-12);
        assert_abs_diff_eq!(entropy_joint(a(0.5)), 1.415, epsilon = 5e-4);
        assert_abs_diff_eq!(entropy_joint(a(1e-12)), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(entropy_joint(a(0.3)), 1.0496, epsilon = 5e-5);
    }

    #[test]
    fn conditional_bound_values() {
        assert_abs_diff_eq!(pstar_conditional(a(0.5)), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(pstar_conditional(a(1e-12)), 1.0, epsilon = 1e-11);
        assert_abs_diff_eq!(pstar_conditional(a(0.31)), 0.96322, epsilon = 5e-6);
        assert_abs_diff_eq!(entropy_conditional(a(0.5)), 0.415, epsilon = 5e-4);
        assert_abs_diff_eq!(entropy_conditional(a(0.31)), 0.05406, epsilon = 5e-6);
        assert_abs_diff_eq!(entropy_conditional(a(1e-12)), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn conditional_is_twice_joint() {
        for i in 1..=500 {
            let al = a(i as f64 * 1e-3);
            assert_eq!(pstar_conditional(al), 2.0 * pstar_joint(al));
        }
    }

    #[test]
    fn entropy_strictly_increasing() {
        for mode in [Mode::Joint, Mode::Conditional] {
            let grid: Vec<f64> = (0..=500).map(|i| i as f64 * 1e-3).collect();
            let rows = bound_curve(&grid, mode).unwrap();
            assert!(rows[0].limit);
            for w in rows.windows(2) {
                assert!(w[1].bits > w[0].bits, "{mode}: {:?} -> {:?}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn curve_examples() {
        let j = bound_curve(&[0.5], Mode::Joint).unwrap();
        assert_abs_diff_eq!(j[0].bits, 1.415, epsilon = 5e-4);
        let c = bound_curve(&[0.5], Mode::Conditional).unwrap();
        assert_abs_diff_eq!(c[0].bits, 0.415, epsilon = 5e-4);
        assert_eq!(bound_curve(&[], Mode::Joint), Err(Error::EmptyGrid));
        assert!(bound_curve(&[0.6], Mode::Joint).is_err());
        let row0 = bound_curve(&[0.0], Mode::Conditional).unwrap()[0];
        assert!(row0.limit && row0.bits.abs() < 1e-15);
    }

    #[test]
    fn canonical_strategy_saturates() {
        for i in 1..=500 {
            let al = a(i as f64 * 1e-3);
            let s = canonical_strategy(al);
            let t = probability_table(&s);
            assert_abs_diff_eq!(t.lgi, 1.0 + al.value(), epsilon = 1e-10);
            assert!(t.max_nsit() < 1e-10);
            assert_abs_diff_eq!(t.joint(Pair::Q13, Outcome::Plus, Outcome::Minus), pstar_joint(al), epsilon = 1e-10);
            let cond = conditional_probability(&t, Pair::Q13, Outcome::Plus, Outcome::Minus).unwrap();
            assert_abs_diff_eq!(cond, pstar_conditional(al), epsilon = 1e-10);
            // the family sits inside the maximal reachable cos 2z₁
            assert!(canonical_cos2z(al) <= al.value() + (1.0 - 2.0 * al.value()).sqrt() + 1e-15);
        }
    }

    #[test]
    fn canonical_examples() {
        let s = canonical_strategy(a(0.5));
        assert_abs_diff_eq!(s.u1.z(), 0.5f64.acos() / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.u2.z(), 0.5f64.acos() / 2.0, epsilon = 1e-15);
        let t = probability_table(&s);
        assert_abs_diff_eq!(t.lgi, 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(t.joint(Pair::Q13, Outcome::Plus, Outcome::Minus), 0.375, epsilon = 1e-12);
        let t = probability_table(&canonical_strategy(a(0.3)));
        assert_abs_diff_eq!(t.joint(Pair::Q13, Outcome::Plus, Outcome::Minus), 0.483114, epsilon = 1e-6);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("joint".parse::<Mode>().unwrap(), Mode::Joint);
        assert_eq!("conditional".parse::<Mode>().unwrap(), Mode::Conditional);
        assert!("both".parse::<Mode>().is_err());
        assert_eq!(serde_json::to_string(&Mode::Joint).unwrap(), "\"joint\"");
    }
}
