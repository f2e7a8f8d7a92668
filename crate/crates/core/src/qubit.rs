//! Exact qubit model of the three-time experiment.
//!
//! A [`Strategy`] fixes everything an adversarial device could choose: the
//! initial state (a Bloch vector), the two unitaries applied between the
//! measurement times, and the two-outcome POVM at `t3`. Measurements at `t1`
//! and `t2` are the computational-basis projectors.
//!
//! Probabilities are available two ways. [`probability_table`] uses closed
//! forms in the scalars of [`DerivedQuantities`]; [`joint_prob_trace`] and
//! [`single_prob_trace`] multiply the matrices out and take traces. The two
//! routes agree to round-off and the test suite holds them to `1e-12`.
//!
//! The closed form for `P(−−|Q1,Q3)` carries a prefactor of `1/4`. The
//! frequently quoted `1/8` does not normalize the `(1,3)` block.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::mat2::Mat2;

/// Slack allowed on the norm and POVM constraints.
pub const CONSTRAINT_SLACK: f64 = 1e-12;

/// A dichotomic measurement outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    pub const BOTH: [Outcome; 2] = [Outcome::Plus, Outcome::Minus];

    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Outcome::Plus => 1.0,
            Outcome::Minus => -1.0,
        }
    }

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Outcome::Plus => 0,
            Outcome::Minus => 1,
        }
    }

    pub fn from_index(i: usize) -> Outcome {
        if i == 0 { Outcome::Plus } else { Outcome::Minus }
    }

    pub fn from_sign(v: i64) -> Result<Outcome> {
        match v {
            1 => Ok(Outcome::Plus),
            -1 => Ok(Outcome::Minus),
            other => Err(Error::InvalidArgument(format!("outcome label {other} is not ±1"))),
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Plus => "+",
            Outcome::Minus => "-",
        })
    }
}

impl Serialize for Outcome {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_i8(self.sign() as i8)
    }
}

impl<'de> Deserialize<'de> for Outcome {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = i64::deserialize(d)?;
        Outcome::from_sign(v).map_err(serde::de::Error::custom)
    }
}

/// The three time pairs entering the inequality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pair {
    #[serde(rename = "12")]
    Q12,
    #[serde(rename = "13")]
    Q13,
    #[serde(rename = "23")]
    Q23,
}

impl Pair {
    pub const ALL: [Pair; 3] = [Pair::Q12, Pair::Q13, Pair::Q23];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Pair::Q12 => 0,
            Pair::Q13 => 1,
            Pair::Q23 => 2,
        }
    }

    /// Measurement times `(i, j)` with `i < j`.
    pub fn times(self) -> (u8, u8) {
        match self {
            Pair::Q12 => (1, 2),
            Pair::Q13 => (1, 3),
            Pair::Q23 => (2, 3),
        }
    }

    pub fn from_times(i: u8, j: u8) -> Result<Pair> {
        match (i, j) {
            (1, 2) => Ok(Pair::Q12),
            (1, 3) => Ok(Pair::Q13),
            (2, 3) => Ok(Pair::Q23),
            _ => Err(Error::InvalidArgument(format!("({i},{j}) is not a measurement pair"))),
        }
    }

    /// Coefficient of `⟨QiQj⟩` in the inequality.
    #[inline]
    pub fn lgi_sign(self) -> f64 {
        match self {
            Pair::Q13 => -1.0,
            _ => 1.0,
        }
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (i, j) = self.times();
        write!(f, "Q{i}Q{j}")
    }
}

/// Map an angle onto `[-π, π)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * PI;
    theta - two_pi * ((theta + PI) / two_pi).floor()
}

/// Initial state `ρ = (I + n·σ)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochVector {
    nx: f64,
    ny: f64,
    nz: f64,
}

impl BlochVector {
    pub const MIXED: BlochVector = BlochVector { nx: 0.0, ny: 0.0, nz: 0.0 };

    pub fn new(nx: f64, ny: f64, nz: f64) -> Result<Self> {
        for (v, name) in [(nx, "nx"), (ny, "ny"), (nz, "nz")] {
            if !v.is_finite() {
                return Err(Error::NonFinite(name));
            }
        }
        let norm2 = nx * nx + ny * ny + nz * nz;
        if norm2 > 1.0 + CONSTRAINT_SLACK {
            return Err(Error::BlochOutsideBall { nx, ny, nz, norm: norm2.sqrt() });
        }
        Ok(BlochVector { nx, ny, nz })
    }

    pub fn nx(&self) -> f64 {
        self.nx
    }
    pub fn ny(&self) -> f64 {
        self.ny
    }
    pub fn nz(&self) -> f64 {
        self.nz
    }

    pub fn norm(&self) -> f64 {
        (self.nx * self.nx + self.ny * self.ny + self.nz * self.nz).sqrt()
    }
}

/// Angles of `U = [[e^{ix} cos z, e^{iy} sin z], [−e^{−iy} sin z, e^{−ix} cos z]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitaryParams {
    x: f64,
    y: f64,
    z: f64,
}

impl UnitaryParams {
    pub const IDENTITY: UnitaryParams = UnitaryParams { x: 0.0, y: 0.0, z: 0.0 };

    /// Angles are taken modulo `2π`.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        for (v, name) in [(x, "x"), (y, "y"), (z, "z")] {
            if !v.is_finite() {
                return Err(Error::NonFinite(name));
            }
        }
        Ok(UnitaryParams { x: normalize_angle(x), y: normalize_angle(y), z: normalize_angle(z) })
    }

    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn z(&self) -> f64 {
        self.z
    }
}

/// Diagonal POVM `M± = ((1 ± a) I ± b σz)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PovmParams {
    a: f64,
    b: f64,
}

impl PovmParams {
    pub const PROJECTIVE: PovmParams = PovmParams { a: 0.0, b: 1.0 };

    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !a.is_finite() {
            return Err(Error::NonFinite("a"));
        }
        if !b.is_finite() {
            return Err(Error::NonFinite("b"));
        }
        if b < 0.0 || b > 1.0 + CONSTRAINT_SLACK || a.abs() + b > 1.0 + CONSTRAINT_SLACK {
            return Err(Error::InvalidPovm { a, b });
        }
        Ok(PovmParams { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> f64 {
        self.b
    }
}

/// State, the two unitaries and the final measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Strategy {
    pub state: BlochVector,
    pub u1: UnitaryParams,
    pub u2: UnitaryParams,
    pub povm: PovmParams,
}

/// Flat wire form: `{"nx","ny","nz","x1","y1","z1","x2","y2","z2","a","b"}`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyRecord {
    pub nx: f64,
    pub ny: f64,
    pub nz: f64,
    pub x1: f64,
    pub y1: f64,
    pub z1: f64,
    pub x2: f64,
    pub y2: f64,
    pub z2: f64,
    pub a: f64,
    pub b: f64,
}

impl TryFrom<StrategyRecord> for Strategy {
    type Error = Error;
    fn try_from(r: StrategyRecord) -> Result<Strategy> {
        Ok(Strategy {
            state: BlochVector::new(r.nx, r.ny, r.nz)?,
            u1: UnitaryParams::new(r.x1, r.y1, r.z1)?,
            u2: UnitaryParams::new(r.x2, r.y2, r.z2)?,
            povm: PovmParams::new(r.a, r.b)?,
        })
    }
}

impl From<Strategy> for StrategyRecord {
    fn from(s: Strategy) -> StrategyRecord {
        StrategyRecord {
            nx: s.state.nx,
            ny: s.state.ny,
            nz: s.state.nz,
            x1: s.u1.x,
            y1: s.u1.y,
            z1: s.u1.z,
            x2: s.u2.x,
            y2: s.u2.y,
            z2: s.u2.z,
            a: s.povm.a,
            b: s.povm.b,
        }
    }
}

impl Serialize for Strategy {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        StrategyRecord::from(*self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Strategy {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rec = StrategyRecord::deserialize(d)?;
        Strategy::try_from(rec).map_err(serde::de::Error::custom)
    }
}

impl Strategy {
    pub fn new(state: BlochVector, u1: UnitaryParams, u2: UnitaryParams, povm: PovmParams) -> Self {
        Strategy { state, u1, u2, povm }
    }

    /// Maximally mixed state, identity unitaries, projective readout.
    pub fn trivial() -> Self {
        Strategy::new(BlochVector::MIXED, UnitaryParams::IDENTITY, UnitaryParams::IDENTITY, PovmParams::PROJECTIVE)
    }

    /// Draw a strategy with a uniformly distributed Bloch vector in the ball,
    /// uniform angles, and POVM parameters uniform over their triangle.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let state = loop {
            let v = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            if v[0] * v[0] + v[1] * v[1] + v[2] * v[2] <= 1.0 {
                break BlochVector { nx: v[0], ny: v[1], nz: v[2] };
            }
        };
        let mut angle = || rng.random_range(-PI..PI);
        let u1 = UnitaryParams { x: angle(), y: angle(), z: angle() };
        let u2 = UnitaryParams { x: angle(), y: angle(), z: angle() };
        let b: f64 = rng.random_range(0.0..=1.0);
        let a = (1.0 - b) * rng.random_range(-1.0..=1.0);
        Strategy::new(state, u1, u2, PovmParams { a, b })
    }
}

/// `(I + n·σ)/2`.
pub fn density_from_bloch(state: &BlochVector) -> Mat2 {
    (Mat2::IDENTITY
        + Mat2::pauli_x().scale(state.nx)
        + Mat2::pauli_y().scale(state.ny)
        + Mat2::pauli_z().scale(state.nz))
    .scale(0.5)
}

pub fn unitary_from_params(p: &UnitaryParams) -> Mat2 {
    let (c, s) = (p.z.cos(), p.z.sin());
    let ex = Complex64::from_polar(1.0, p.x);
    let ey = Complex64::from_polar(1.0, p.y);
    Mat2::new(ex * c, ey * s, -ey.conj() * s, ex.conj() * c)
}

/// `(M+, M−)`.
pub fn povm_elements(p: &PovmParams) -> (Mat2, Mat2) {
    let plus = Mat2::diag(0.5 * (1.0 + p.a + p.b), 0.5 * (1.0 + p.a - p.b));
    let minus = Mat2::diag(0.5 * (1.0 - p.a - p.b), 0.5 * (1.0 - p.a + p.b));
    (plus, minus)
}

/// Computational-basis projector for the `t1`/`t2` measurements.
pub fn projector(o: Outcome) -> Mat2 {
    match o {
        Outcome::Plus => Mat2::diag(1.0, 0.0),
        Outcome::Minus => Mat2::diag(0.0, 1.0),
    }
}

fn povm_element(p: &PovmParams, o: Outcome) -> Mat2 {
    let (plus, minus) = povm_elements(p);
    match o {
        Outcome::Plus => plus,
        Outcome::Minus => minus,
    }
}

/// Sequential-measurement probability `P(a, b | Qi, Qj)` by matrix products.
pub fn joint_prob_trace(s: &Strategy, pair: Pair, a: Outcome, b: Outcome) -> f64 {
    let rho = density_from_bloch(&s.state);
    let u1 = unitary_from_params(&s.u1);
    let u2 = unitary_from_params(&s.u2);
    let pa = projector(a);
    let p = match pair {
        Pair::Q12 => (pa * rho * pa).conjugate_by(&u1) * projector(b),
        Pair::Q13 => (pa * rho * pa).conjugate_by(&(u2 * u1)) * povm_element(&s.povm, b),
        Pair::Q23 => (pa * rho.conjugate_by(&u1) * pa).conjugate_by(&u2) * povm_element(&s.povm, b),
    };
    p.trace().re
}

/// Probability of outcome `o` at time `time ∈ {1,2,3}` with no earlier measurement.
pub fn single_prob_trace(s: &Strategy, time: u8, o: Outcome) -> Result<f64> {
    let rho = density_from_bloch(&s.state);
    let u1 = unitary_from_params(&s.u1);
    let u2 = unitary_from_params(&s.u2);
    let m = match time {
        1 => rho * projector(o),
        2 => rho.conjugate_by(&u1) * projector(o),
        3 => rho.conjugate_by(&(u2 * u1)) * povm_element(&s.povm, o),
        _ => return Err(Error::InvalidArgument(format!("time {time} is not in 1..=3"))),
    };
    Ok(m.trace().re)
}

/// Scalars that the closed-form probabilities are written in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedQuantities {
    pub gamma: f64,
    /// `x1 + x2 + y1 − y2`, not reduced modulo `2π`.
    pub t: f64,
    pub chi: f64,
    pub xi: f64,
}

pub fn derived_quantities(s: &Strategy) -> DerivedQuantities {
    let (n, u1, u2, b) = (&s.state, &s.u1, &s.u2, s.povm.b);
    let t = u1.x + u2.x + u1.y - u2.y;
    let d = u1.x - u1.y;
    let (c1, s1) = ((2.0 * u1.z).cos(), (2.0 * u1.z).sin());
    let (c2, s2) = ((2.0 * u2.z).cos(), (2.0 * u2.z).sin());
    let gamma = b * (c1 * c2 - t.cos() * s1 * s2);
    let in_plane = n.nx * d.cos() + n.ny * d.sin();
    let chi = in_plane * s1;
    let xi = t.cos() * c1 * in_plane + t.sin() * (n.ny * d.cos() - n.nx * d.sin());
    DerivedQuantities { gamma, t, chi, xi }
}

/// Joint and single probabilities with the correlators, inequality value
/// and the three signalling-in-time values derived from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbabilityTable {
    /// `joint[pair][a][b]`, outcomes indexed `+ → 0`, `− → 1`.
    pub joint: [[[f64; 2]; 2]; 3],
    /// `singles[time − 1][outcome]`, each measured with no earlier measurement.
    pub singles: [[f64; 2]; 3],
    /// `⟨QiQj⟩` indexed by [`Pair::index`].
    pub correlators: [f64; 3],
    pub lgi: f64,
    /// `(v1, v2, v3)`: `P(+|Q2) − Σa P(a+|Q1Q2)`, then the two `P(+|Q3)` conditions.
    pub nsit: [f64; 3],
}

impl ProbabilityTable {
    /// Assemble a table from joint blocks and singles; correlators, inequality
    /// value and NSIT values are computed from them.
    pub fn from_probabilities(joint: [[[f64; 2]; 2]; 3], singles: [[f64; 2]; 3]) -> Self {
        let mut correlators = [0.0; 3];
        for pair in Pair::ALL {
            let block = &joint[pair.index()];
            correlators[pair.index()] = block[0][0] - block[0][1] - block[1][0] + block[1][1];
        }
        let lgi = Pair::ALL.iter().map(|p| p.lgi_sign() * correlators[p.index()]).sum();
        let plus_marginal = |pair: Pair| joint[pair.index()][0][0] + joint[pair.index()][1][0];
        let nsit = [
            singles[1][0] - plus_marginal(Pair::Q12),
            singles[2][0] - plus_marginal(Pair::Q13),
            singles[2][0] - plus_marginal(Pair::Q23),
        ];
        ProbabilityTable { joint, singles, correlators, lgi, nsit }
    }

    #[inline]
    pub fn joint(&self, pair: Pair, a: Outcome, b: Outcome) -> f64 {
        self.joint[pair.index()][a.index()][b.index()]
    }

    /// `P(o|Q_time)`; panics unless `time ∈ {1,2,3}`.
    #[inline]
    pub fn single(&self, time: u8, o: Outcome) -> f64 {
        self.singles[time as usize - 1][o.index()]
    }

    #[inline]
    pub fn correlator(&self, pair: Pair) -> f64 {
        self.correlators[pair.index()]
    }

    /// Largest `|NSIT_j|`.
    pub fn max_nsit(&self) -> f64 {
        self.nsit.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Every entry of the table from the closed-form expressions.
pub fn probability_table(s: &Strategy) -> ProbabilityTable {
    let DerivedQuantities { gamma, t, chi, xi } = derived_quantities(s);
    let nz = s.state.nz;
    let (a, b) = (s.povm.a, s.povm.b);
    let (z1, z2) = (s.u1.z, s.u2.z);
    let (c1, s1) = ((2.0 * z1).cos(), (2.0 * z1).sin());
    let (c2, s2) = ((2.0 * z2).cos(), (2.0 * z2).sin());
    let (cos_sq, sin_sq) = (z1.cos().powi(2), z1.sin().powi(2));

    let mut joint = [[[0.0; 2]; 2]; 3];
    for oa in Outcome::BOTH {
        let sa = oa.sign();
        for ob in Outcome::BOTH {
            let sb = ob.sign();
            let (i, j) = (oa.index(), ob.index());
            let same = if oa == ob { cos_sq } else { sin_sq };
            joint[0][i][j] = 0.5 * (1.0 + sa * nz) * same;
            joint[1][i][j] = 0.25 * (1.0 + sa * nz) * (1.0 + sb * a + sa * sb * gamma);
            joint[2][i][j] = 0.25 * (1.0 + sb * a + sa * sb * b * c2) * (1.0 + sa * (nz * c1 + chi));
        }
    }

    let nsit1 = 0.5 * chi;
    let nsit2 = 0.5 * b * (c2 * chi + s2 * xi);
    let nsit3 = 0.5 * b * s2 * (xi - nz * t.cos() * s1);

    let p3_plus = 0.5 * (1.0 + a + nz * gamma) + nsit2;
    let singles = [
        [0.5 * (1.0 + nz), 0.5 * (1.0 - nz)],
        [0.5 * (1.0 + nz * c1 + chi), 0.5 * (1.0 - nz * c1 - chi)],
        [p3_plus, 1.0 - p3_plus],
    ];

    let correlators = [c1, a * nz + gamma, a * nz * c1 + b * c2 + a * chi];
    // The frequently printed form omits `a χ`; it only vanishes once NSIT_1 = 0.
    let lgi = (1.0 + a * nz) * c1 + b * c2 - a * nz - gamma + a * chi;

    ProbabilityTable { joint, singles, correlators, lgi, nsit: [nsit1, nsit2, nsit3] }
}

/// `P(b | a, Qi, Qj) = P(a, b | Qi, Qj) / P(a | Qi)`.
pub fn conditional_probability(table: &ProbabilityTable, pair: Pair, a: Outcome, b: Outcome) -> Result<f64> {
    let (first, _) = pair.times();
    let marginal = table.single(first, a);
    if marginal.abs() <= 1e-12 {
        return Err(Error::ZeroMarginal { time: first, outcome: a.sign() as i8 });
    }
    Ok(table.joint(pair, a, b) / marginal)
}
