//! The quartic double well, the heteroclinic profile and its cutoff.
//!
//! The profile `psi(s) = tanh(s / sqrt 2)` is the increasing entire solution of
//! `psi'' = W'(psi)` with `psi(0) = 0`. The cutoff glues `psi(t / eps)` to the
//! sign function across the shell `eps^delta / 2 <= |t| <= eps^delta`.

use std::f64::consts::SQRT_2;

use crate::error::{LabError, Result};

/// `W(u) = (1 - u^2)^2 / 4`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct QuarticWell;

impl QuarticWell {
    pub fn w(u: f64) -> f64 {
        let a = 1.0 - u * u;
        0.25 * a * a
    }

    pub fn dw(u: f64) -> f64 {
        u * u * u - u
    }

    pub fn d2w(u: f64) -> f64 {
        3.0 * u * u - 1.0
    }
}

fn sech2(x: f64) -> f64 {
    let c = x.cosh();
    if c.is_finite() {
        1.0 / (c * c)
    } else {
        0.0
    }
}

/// `psi(s) = tanh(s / sqrt 2)`.
pub fn eval_psi(s: f64) -> f64 {
    (s / SQRT_2).tanh()
}

/// `psi(s) - sgn(s)` without cancellation in the tails.
pub fn psi_minus_sign(s: f64) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    let e = (-SQRT_2 * s.abs()).exp();
    // tanh(x) - 1 = -2 e^{-2x} / (1 + e^{-2x}) for x > 0
    -s.signum() * 2.0 * e / (1.0 + e)
}

pub fn psi_d1(s: f64) -> f64 {
    sech2(s / SQRT_2) / SQRT_2
}

pub fn psi_d2(s: f64) -> f64 {
    -eval_psi(s) * sech2(s / SQRT_2)
}

pub fn psi_d3(s: f64) -> f64 {
    let t = eval_psi(s);
    sech2(s / SQRT_2) * (3.0 * t * t - 1.0) / SQRT_2
}

/// Derivative of order `k` (0..=3) of the profile at `s`.
pub fn psi_derivative(k: usize, s: f64) -> f64 {
    match k {
        0 => eval_psi(s),
        1 => psi_d1(s),
        2 => psi_d2(s),
        3 => psi_d3(s),
        _ => panic!("profile derivative of order {k} not tabulated"),
    }
}

fn bump_exp(y: f64) -> f64 {
    if y > 0.0 {
        (-1.0 / y).exp()
    } else {
        0.0
    }
}

fn bump_exp_d1(y: f64) -> f64 {
    if y > 0.0 {
        bump_exp(y) / (y * y)
    } else {
        0.0
    }
}

fn bump_exp_d2(y: f64) -> f64 {
    if y > 0.0 {
        bump_exp(y) * (1.0 - 2.0 * y) / (y * y * y * y)
    } else {
        0.0
    }
}

/// C-infinity step with `rho = 1` on `x <= 0` and `rho = 0` on `x >= 1`.
///
/// Returns `(rho, rho', rho'')`.
pub fn smooth_step(x: f64) -> (f64, f64, f64) {
    if x <= 0.0 {
        return (1.0, 0.0, 0.0);
    }
    if x >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let a = bump_exp(1.0 - x);
    let b = bump_exp(x);
    let da = -bump_exp_d1(1.0 - x);
    let db = bump_exp_d1(x);
    let d2a = bump_exp_d2(1.0 - x);
    let d2b = bump_exp_d2(x);
    let s = a + b;
    let ds = da + db;
    let num = da * b - a * db;
    let dnum = d2a * b - a * d2b;
    let rho = a / s;
    let d1 = num / (s * s);
    let d2 = dnum / (s * s) - 2.0 * num * ds / (s * s * s);
    (rho, d1, d2)
}

/// Value and first two derivatives of a one-dimensional profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

/// The cutoff `omega` of `psi(t / eps)` at collar radius `eps^delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffProfile {
    epsilon: f64,
    delta: f64,
}

impl CutoffProfile {
    pub const DEFAULT_DELTA: f64 = 0.5;

    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(LabError::InvalidParameter(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(LabError::InvalidParameter(format!(
                "cutoff exponent must lie in (0, 1), got {delta}"
            )));
        }
        Ok(Self { epsilon, delta })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Outer radius `eps^delta`; `omega = sgn` beyond it.
    pub fn collar(&self) -> f64 {
        self.epsilon.powf(self.delta)
    }

    /// `chi(t) = rho(2 eps^{-delta} |t| - 1)` with its derivatives in `t`.
    pub fn chi(&self, t: f64) -> (f64, f64, f64) {
        let scale = 2.0 / self.collar();
        let (r, r1, r2) = smooth_step(scale * t.abs() - 1.0);
        (r, r1 * scale * t.signum(), r2 * scale * scale)
    }

    /// `omega(t)` and its first two derivatives.
    pub fn jet(&self, t: f64) -> Jet {
        let eps = self.epsilon;
        let s = t / eps;
        let (chi, chi1, chi2) = self.chi(t);
        // omega = sgn(t) + (psi(t/eps) - sgn(t)) chi
        let d0 = psi_minus_sign(s);
        let d1 = psi_d1(s) / eps;
        let d2 = psi_d2(s) / (eps * eps);
        let sign = if t == 0.0 { 0.0 } else { t.signum() };
        Jet {
            value: sign + d0 * chi,
            d1: d1 * chi + d0 * chi1,
            d2: d2 * chi + 2.0 * d1 * chi1 + d0 * chi2,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.jet(t).value
    }

    pub fn d1(&self, t: f64) -> f64 {
        self.jet(t).d1
    }

    pub fn d2(&self, t: f64) -> f64 {
        self.jet(t).d2
    }

    /// Closed-form bound `2 exp(-sqrt2 eps^{delta-1} / 2)` on `|omega - psi(./eps)|`.
    pub fn tail_bound(&self) -> f64 {
        2.0 * (-SQRT_2 * self.epsilon.powf(self.delta - 1.0) / 2.0).exp()
    }
}

/// `omega(t)` for the given profile.
pub fn eval_cutoff(t: f64, profile: &CutoffProfile) -> f64 {
    profile.eval(t)
}
