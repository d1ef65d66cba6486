//! Newton and gradient-flow solvers for `Q(u) = eps^2 Delta_w u - W'(u) = 0`,
//! signed Dirichlet minimizers, and seed factories.
//!
//! All linear algebra is done on the mass-weighted (symmetric) forms:
//! the Newton system is `(eps^2 G + M W''(u)) du = M Q(u)`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discretization::{energy, weighted_laplacian, Field, Grid};
use crate::error::{LabError, Result};
use crate::linalg::SymTridiagonal;
use crate::potential::{eval_psi, QuarticWell};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Sup-norm residual tolerance for Newton.
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    /// Step halvings allowed in the residual line search.
    pub max_halvings: usize,
    /// Initial flow step; `None` means `eps^2`.
    pub flow_step: Option<f64>,
    /// Largest flow step reached by doubling after accepted steps.
    pub flow_step_max: f64,
    /// Smallest flow step before an energy increase aborts the flow.
    pub flow_step_min: f64,
    pub flow_max_steps: usize,
    /// Residual at which the flow stops.
    pub flow_tol: f64,
    /// Stabilization constant of the semi-implicit step.
    pub stabilization: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            newton_tol: 1e-11,
            max_newton_iters: 50,
            max_halvings: 20,
            flow_step: None,
            flow_step_max: 64.0,
            flow_step_min: 1e-14,
            flow_max_steps: 20_000,
            flow_tol: 1e-6,
            stabilization: 2.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.newton_tol,
            self.flow_step_max,
            self.flow_step_min,
            self.flow_tol,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) || self.flow_step.is_some_and(|d| !(d > 0.0)) {
            return Err(LabError::InvalidParameter(
                "solver tolerances must be positive".into(),
            ));
        }
        if self.stabilization < 0.0 {
            return Err(LabError::InvalidParameter(
                "stabilization must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub field: Field,
    pub epsilon: f64,
    pub residual_norm: f64,
    pub energy: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Residual sup-norms (Newton) or energies (flow) per iteration.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionMeta {
    pub epsilon: f64,
    pub residual_norm: f64,
    pub energy: f64,
    pub converged: bool,
    pub iterations: usize,
    pub points: usize,
    pub spacing: f64,
    pub bounds: (f64, f64),
    pub geometry: String,
    pub geometry_hash: String,
}

impl Solution {
    fn finish(
        field: Field,
        epsilon: f64,
        tol: f64,
        iterations: usize,
        trace: Vec<f64>,
    ) -> Result<Self> {
        let residual_norm = residual(&field, epsilon)?.sup_norm();
        let energy = energy(&field, epsilon)?;
        Ok(Self {
            converged: residual_norm <= tol,
            field,
            epsilon,
            residual_norm,
            energy,
            iterations,
            trace,
        })
    }

    pub fn meta(&self) -> SolutionMeta {
        let grid = self.field.grid();
        SolutionMeta {
            epsilon: self.epsilon,
            residual_norm: self.residual_norm,
            energy: self.energy,
            converged: self.converged,
            iterations: self.iterations,
            points: grid.len(),
            spacing: grid.spacing(),
            bounds: grid.bounds(),
            geometry: grid.geometry().describe(),
            geometry_hash: grid.geometry().hash(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.meta())?)
    }

    pub fn to_csv(&self) -> String {
        self.field.to_csv()
    }
}

/// `Q(u) = eps^2 Delta_w u - W'(u)`.
pub fn residual(u: &Field, epsilon: f64) -> Result<Field> {
    let lap = weighted_laplacian(u, epsilon)?;
    let values = lap
        .values
        .iter()
        .zip(&u.values)
        .map(|(l, &v)| l - QuarticWell::dw(v))
        .collect();
    u.with_values(values)
}

/// The symmetric operator `eps^2 G + M diag(W''(u))`, i.e. `-M` times the
/// linearization of `Q` at `u`.
pub fn hessian(u: &Field, epsilon: f64) -> SymTridiagonal {
    let grid = u.grid();
    let mut k = grid.stiffness();
    let e2 = epsilon * epsilon;
    let mass = grid.mass();
    for i in 0..k.len() {
        k.diag[i] = e2 * k.diag[i] + mass[i] * QuarticWell::d2w(u.values[i]);
    }
    for o in k.off.iter_mut() {
        *o *= e2;
    }
    if let Some(c) = k.corner.as_mut() {
        *c *= e2;
    }
    k
}

pub fn newton_solve(init: &Field, epsilon: f64, cfg: &SolverConfig) -> Result<Solution> {
    cfg.validate()?;
    let mut u = init.clone();
    let mut q = residual(&u, epsilon)?;
    let mut norm = q.sup_norm();
    let mut trace = vec![norm];
    let mass = u.grid().mass();
    for iter in 1..=cfg.max_newton_iters {
        if norm <= cfg.newton_tol {
            return Solution::finish(u, epsilon, cfg.newton_tol, iter, trace);
        }
        let k = hessian(&u, epsilon);
        let rhs: Vec<f64> = q.values.iter().zip(&mass).map(|(a, m)| a * m).collect();
        let step = match k.solve(&rhs) {
            Ok(s) if s.iter().all(|v| v.is_finite()) => s,
            _ => {
                let eigenvalue = k.nearest_to_zero(1e-14)?;
                return Err(LabError::SingularJacobian { eigenvalue });
            }
        };
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..=cfg.max_halvings {
            let trial = u.with_values(
                u.values
                    .iter()
                    .zip(&step)
                    .map(|(a, d)| a + alpha * d)
                    .collect(),
            )?;
            let tq = residual(&trial, epsilon)?;
            let tn = tq.sup_norm();
            if tn < norm || tn <= cfg.newton_tol {
                u = trial;
                q = tq;
                norm = tn;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        trace.push(norm);
        if !accepted {
            // line search exhausted: report honestly as divergent
            return Solution::finish(u, epsilon, cfg.newton_tol, iter, trace);
        }
    }
    Solution::finish(u, epsilon, cfg.newton_tol, cfg.max_newton_iters, trace)
}

/// Stabilized semi-implicit gradient flow
/// `((1/dt + S) M + eps^2 G) u' = M ((1/dt + S) u - W'(u))`,
/// accepting only steps that do not increase the energy.
pub fn gradient_flow(init: &Field, epsilon: f64, cfg: &SolverConfig) -> Result<Solution> {
    cfg.validate()?;
    let grid = init.grid();
    grid.check_resolution(epsilon)?;
    let g = grid.stiffness();
    let mass = grid.mass();
    let e2 = epsilon * epsilon;
    let mut dt = cfg.flow_step.unwrap_or(e2);
    let mut u = init.clone();
    let mut e = energy(&u, epsilon)?;
    let mut energies = vec![e];
    let mut steps = 0;
    while steps < cfg.flow_max_steps {
        if residual(&u, epsilon)?.sup_norm() <= cfg.flow_tol {
            break;
        }
        let a = 1.0 / dt + cfg.stabilization;
        let mut k = g.clone();
        for i in 0..k.len() {
            k.diag[i] = e2 * k.diag[i] + a * mass[i];
        }
        k.off.iter_mut().for_each(|o| *o *= e2);
        if let Some(c) = k.corner.as_mut() {
            *c *= e2;
        }
        let rhs: Vec<f64> = u
            .values
            .iter()
            .zip(&mass)
            .map(|(&v, m)| m * (a * v - QuarticWell::dw(v)))
            .collect();
        let next = u.with_values(k.solve(&rhs)?)?;
        let en = energy(&next, epsilon)?;
        if en <= e + 1e-14 * e.abs().max(1.0) {
            u = next;
            e = en;
            energies.push(e);
            steps += 1;
            dt = (2.0 * dt).min(cfg.flow_step_max);
        } else {
            dt *= 0.5;
            if dt < cfg.flow_step_min {
                return Err(LabError::EnergyIncrease {
                    dt,
                    increase: en - e,
                });
            }
        }
    }
    Solution::finish(u, epsilon, cfg.flow_tol, steps, energies)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Positive => 1.0,
            Sign::Negative => -1.0,
        }
    }
}

/// Lowest eigenvalue of `eps^2 (-Delta_w)` on the grid with its boundary
/// conditions (the weighted generalized problem, symmetrized).
pub fn first_eigenvalue(grid: &Grid, epsilon: f64) -> Result<f64> {
    let g = grid.stiffness();
    let m = grid.mass();
    let s: Vec<f64> = m.iter().map(|v| v.sqrt().recip()).collect();
    let diag = (0..g.len()).map(|i| g.diag[i] * s[i] * s[i]).collect();
    let off = (0..g.off.len())
        .map(|i| g.off[i] * s[i] * s[i + 1])
        .collect();
    let corner = g.corner.map(|c| c * s[0] * s[g.len() - 1]);
    let sym = SymTridiagonal::new(diag, off, corner);
    Ok(epsilon * epsilon * sym.eigenvalue(0, 1e-13)?)
}

/// Signed minimizer of the energy with zero Dirichlet data on `grid`.
///
/// Returns `u = 0` when the first Dirichlet eigenvalue of `eps^2 (-Delta_w)`
/// is at least `-W''(0) = 1`, where zero is linearly stable.
pub fn minimize_dirichlet(
    grid: Arc<Grid>,
    sign: Sign,
    epsilon: f64,
    cfg: &SolverConfig,
) -> Result<Solution> {
    grid.check_resolution(epsilon)?;
    let lambda1 = first_eigenvalue(&grid, epsilon)?;
    if lambda1 >= -QuarticWell::d2w(0.0) {
        let zero = Field::constant(grid, 0.0);
        return Solution::finish(zero, epsilon, cfg.newton_tol, 0, Vec::new());
    }
    let cap = Field::constant(grid, sign.value());
    let flowed = gradient_flow(&cap, epsilon, cfg)?;
    let polished = newton_solve(&flowed.field, epsilon, cfg)?;
    let s = sign.value();
    if polished.field.values.iter().any(|&v| v * s < 0.0) {
        return Err(LabError::Contract(
            "Dirichlet minimizer changed sign".into(),
        ));
    }
    Ok(polished)
}

/// Heteroclinic seed `psi((t - c)/eps)` (wrapped on periodic grids).
pub fn seed_single(grid: Arc<Grid>, center: f64, epsilon: f64) -> Field {
    let g = grid.clone();
    Field::from_fn(grid, move |t| eval_psi(g.offset(t, center) / epsilon))
}

/// Two-interface seed `clamp(psi((t-c+d)/eps) * (-psi((t-c-d)/eps)), -1, 1)`:
/// positive between `c - d` and `c + d`, negative outside.
pub fn seed_pair(grid: Arc<Grid>, center: f64, half_gap: f64, epsilon: f64) -> Field {
    let g = grid.clone();
    Field::from_fn(grid, move |t| {
        let s = g.offset(t, center);
        (eval_psi((s + half_gap) / epsilon) * -eval_psi((s - half_gap) / epsilon)).clamp(-1.0, 1.0)
    })
}

/// Adds deterministic uniform noise of the given amplitude.
pub fn with_noise(u: &Field, amplitude: f64, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = u
        .values
        .iter()
        .map(|v| v + amplitude * rng.gen_range(-1.0..1.0))
        .collect();
    u.with_values(values).expect("same grid")
}
