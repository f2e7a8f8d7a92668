//! Unconstrained coordinates for the strategy search.
//!
//! Every probability depends on the unitary phases only through
//! `t = x1 + x2 + y1 − y2` and `d = x1 − y1`, so the search runs over nine
//! coordinates:
//!
//! | index | meaning                                   |
//! |-------|-------------------------------------------|
//! | 0     | Bloch radius, clamped to `[0, 1]`         |
//! | 1, 2  | polar and azimuthal angle of the state    |
//! | 3, 4  | `d` and `t`                               |
//! | 5, 6  | `z1`, `z2`                                |
//! | 7     | `θ` with `b = sin² θ`                     |
//! | 8     | bias, clamped to `[−1, 1]` and scaled by `1 − b` |
//!
//! Decoding puts `d` into `x1`, `t − d` into `x2` and zeroes both `y`s.

use std::f64::consts::PI;

use rand::Rng;

use crate::qubit::{BlochVector, PovmParams, Strategy, UnitaryParams};

pub const DIM: usize = 9;

pub fn decode(p: &[f64]) -> Strategy {
    debug_assert_eq!(p.len(), DIM);
    let r = p[0].clamp(0.0, 1.0);
    let (st, ct) = p[1].sin_cos();
    let (sp, cp) = p[2].sin_cos();
    let state = BlochVector::new(r * st * cp, r * st * sp, r * ct)
        .or_else(|_| BlochVector::new(0.0, 0.0, 0.0))
        .expect("mixed state is valid");
    let (d, t) = (p[3], p[4]);
    let u1 = UnitaryParams::new(d, 0.0, p[5]).expect("finite angles");
    let u2 = UnitaryParams::new(t - d, 0.0, p[6]).expect("finite angles");
    let b = p[7].sin().powi(2).min(1.0);
    let a = (1.0 - b) * p[8].clamp(-1.0, 1.0);
    let povm = PovmParams::new(a, b).expect("bias scaled into range");
    Strategy::new(state, u1, u2, povm)
}

/// Coordinates reproducing the probability table of `s`.
pub fn encode(s: &Strategy) -> [f64; DIM] {
    let n = &s.state;
    let r = n.norm();
    let (theta, phi) = if r > 0.0 { ((n.nz() / r).clamp(-1.0, 1.0).acos(), n.ny().atan2(n.nx())) } else { (0.0, 0.0) };
    let t = s.u1.x() + s.u2.x() + s.u1.y() - s.u2.y();
    let d = s.u1.x() - s.u1.y();
    let b = s.povm.b();
    let theta_b = b.sqrt().clamp(0.0, 1.0).asin();
    let bias = if b < 1.0 { (s.povm.a() / (1.0 - b)).clamp(-1.0, 1.0) } else { 0.0 };
    [r, theta, phi, d, t, s.u1.z(), s.u2.z(), theta_b, bias]
}

pub fn random_point<R: Rng + ?Sized>(rng: &mut R) -> [f64; DIM] {
    [
        rng.random_range(0.0..1.0),
        rng.random_range(0.0..PI),
        rng.random_range(-PI..PI),
        rng.random_range(-PI..PI),
        rng.random_range(-PI..PI),
        rng.random_range(-PI..PI),
        rng.random_range(-PI..PI),
        rng.random_range(0.0..PI / 2.0),
        rng.random_range(-1.0..1.0),
    ]
}
