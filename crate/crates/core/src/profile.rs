//! Moment constants of the heteroclinic profile and the one-dimensional
//! linearized operators `l0 = eps^2 d^2 - W''(psi(./eps))` and its cutoff
//! version, with the truncated spectrum of `-d_s^2 + W''(psi(s))`.

use std::fmt::Write as _;

use serde::Serialize;

use crate::discretization::Field;
use crate::error::{LabError, Result};
use crate::linalg::{solve_tridiagonal, SymTridiagonal};
use crate::potential::{eval_psi, psi_d1, CutoffProfile, QuarticWell};
use crate::quadrature::integrate;

/// Half-width of the rescaled truncation for profile integrals.
pub const PROFILE_HALFWIDTH: f64 = 40.0;
pub const DEFAULT_QUADRATURE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossMoment {
    pub k: usize,
    pub m: usize,
    /// `int d^k omega d^m omega dt` at the table's epsilon.
    pub raw: f64,
    /// `raw * eps^{k+m-1}`.
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentTable {
    pub epsilon: f64,
    pub delta: f64,
    /// `int_{-1}^{1} sqrt(W/2)`.
    pub sigma0: f64,
    /// `int psi'`.
    pub sigma1: f64,
    /// `int psi'^2`.
    pub sigma2: f64,
    /// One-dimensional energy `int psi'^2/2 + W(psi)` of the profile; the
    /// energy carried by one interface per unit area.
    pub profile_energy: f64,
    pub cross_moments: Vec<CrossMoment>,
    pub quadrature_error: f64,
}

impl MomentTable {
    pub fn cross(&self, k: usize, m: usize) -> Option<&CrossMoment> {
        self.cross_moments
            .iter()
            .find(|c| (c.k, c.m) == (k, m) || (c.k, c.m) == (m, k))
    }

    pub fn to_record(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: f64| writeln!(out, "{k} = {v:.17e}").expect("string write");
        kv("epsilon", self.epsilon);
        kv("delta", self.delta);
        kv("sigma0", self.sigma0);
        kv("sigma1", self.sigma1);
        kv("sigma2", self.sigma2);
        kv("profile_energy", self.profile_energy);
        kv("quadrature_error", self.quadrature_error);
        for c in &self.cross_moments {
            kv(&format!("cross_{}_{}", c.k, c.m), c.raw);
            kv(&format!("cross_{}_{}_normalized", c.k, c.m), c.normalized);
        }
        out
    }
}

/// Closed-form value of the interface energy `2 sqrt(2) / 3`.
pub fn profile_energy() -> f64 {
    2.0 * std::f64::consts::SQRT_2 / 3.0
}

fn cutoff_derivative(profile: &CutoffProfile, k: usize, t: f64) -> f64 {
    match k {
        1 => profile.d1(t),
        2 => profile.d2(t),
        _ => unreachable!("cross moments tabulated for k in 1..=2"),
    }
}

pub fn compute_moments(profile: &CutoffProfile, quadrature_tol: f64) -> Result<MomentTable> {
    let l = PROFILE_HALFWIDTH;
    let mut err: f64 = 0.0;
    let mut q = |f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64| -> Result<f64> {
        let r = integrate(f, a, b, tol)?;
        err = err.max(r.error);
        Ok(r.value)
    };
    let sigma0 = q(
        &|s| (QuarticWell::w(s) / 2.0).sqrt(),
        -1.0,
        1.0,
        quadrature_tol,
    )?;
    let sigma1 = q(&psi_d1, -l, l, quadrature_tol)?;
    let sigma2 = q(&|s| psi_d1(s).powi(2), -l, l, quadrature_tol)?;
    let profile_energy = q(
        &|s| 0.5 * psi_d1(s).powi(2) + QuarticWell::w(eval_psi(s)),
        -l,
        l,
        quadrature_tol,
    )?;

    let eps = profile.epsilon();
    let c = profile.collar();
    let mut cross_moments = Vec::new();
    for k in 1..=2usize {
        for m in k..=2usize {
            let scale = eps.powi(k as i32 + m as i32 - 1);
            let f = |t: f64| cutoff_derivative(profile, k, t) * cutoff_derivative(profile, m, t);
            // the integrand lives on [-c, c]; split where the cutoff switches on
            let mut raw = 0.0;
            for (a, b) in [
                (-c, -0.5 * c),
                (-0.5 * c, 0.0),
                (0.0, 0.5 * c),
                (0.5 * c, c),
            ] {
                raw += q(&f, a, b, 0.25 * quadrature_tol / scale)?;
            }
            cross_moments.push(CrossMoment {
                k,
                m,
                raw,
                normalized: raw * scale,
            });
        }
    }
    Ok(MomentTable {
        epsilon: eps,
        delta: profile.delta(),
        sigma0,
        sigma1,
        sigma2,
        profile_energy,
        cross_moments,
        quadrature_error: err,
    })
}

/// `l0(phi) = eps^2 phi'' - W''(psi((t - c)/eps)) phi`, or with `omega` in
/// place of `psi` when `use_cutoff`; unweighted central second differences
/// with the grid's boundary conditions.
pub fn apply_linearized_1d(
    phi: &Field,
    profile: &CutoffProfile,
    center: f64,
    use_cutoff: bool,
) -> Result<Field> {
    let eps = profile.epsilon();
    phi.grid().check_resolution(eps)?;
    let h = phi.grid().spacing();
    let g = phi.grid().apply_flat_stiffness(&phi.values);
    let values = phi
        .grid()
        .nodes()
        .iter()
        .zip(&g)
        .zip(&phi.values)
        .map(|((&t, gi), p)| {
            let s = phi.grid().offset(t, center);
            let base = if use_cutoff {
                profile.eval(s)
            } else {
                eval_psi(s / eps)
            };
            -eps * eps * gi / h - QuarticWell::d2w(base) * p
        })
        .collect();
    phi.with_values(values)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralReport {
    pub halfwidth: f64,
    pub points: usize,
    /// Lowest eigenvalues, ascending, in rescaled units.
    pub eigenvalues: Vec<f64>,
    pub kernel_residual: f64,
    pub gap: f64,
    /// `|<v0, psi'>| / (|v0| |psi'|)` for the computed ground state.
    pub kernel_alignment: f64,
    /// `W''(+-1)`, the bottom of the essential spectrum on the line.
    pub essential_edge: f64,
}

impl SpectralReport {
    pub fn to_record(&self) -> String {
        let mut out = String::new();
        writeln!(out, "halfwidth = {:.17e}", self.halfwidth).unwrap();
        writeln!(out, "points = {}", self.points).unwrap();
        for (i, e) in self.eigenvalues.iter().enumerate() {
            writeln!(out, "lambda{i} = {e:.17e}").unwrap();
        }
        writeln!(out, "kernel_residual = {:.17e}", self.kernel_residual).unwrap();
        writeln!(out, "gap = {:.17e}", self.gap).unwrap();
        writeln!(out, "kernel_alignment = {:.17e}", self.kernel_alignment).unwrap();
        writeln!(out, "essential_edge = {:.17e}", self.essential_edge).unwrap();
        out
    }
}

/// Symmetric tridiagonal matrix of `-d^2 + W''(psi(s))` on `(-L, L)` with
/// Dirichlet truncation at `points` interior nodes; returns the matrix and
/// the nodes.
pub fn linearized_matrix(halfwidth: f64, points: usize) -> (SymTridiagonal, Vec<f64>) {
    let h = 2.0 * halfwidth / (points as f64 + 1.0);
    let nodes: Vec<f64> = (1..=points).map(|i| -halfwidth + i as f64 * h).collect();
    let diag = nodes
        .iter()
        .map(|&s| 2.0 / (h * h) + QuarticWell::d2w(eval_psi(s)))
        .collect();
    let off = vec![-1.0 / (h * h); points - 1];
    (SymTridiagonal::new(diag, off, None), nodes)
}

pub fn spectral_gap(halfwidth: f64, points: usize) -> Result<SpectralReport> {
    if !(halfwidth >= 15.0) || points < 1024 {
        return Err(LabError::InvalidParameter(format!(
            "spectral truncation needs halfwidth >= 15 and >= 1024 points, got {halfwidth}, {points}"
        )));
    }
    let (a, nodes) = linearized_matrix(halfwidth, points);
    let eigenvalues = (0..4)
        .map(|k| a.eigenvalue(k, 1e-13))
        .collect::<Result<Vec<f64>>>()?;
    let lambda0 = eigenvalues[0];

    // inverse iteration for the ground state
    let shift = lambda0 - 1e-8;
    let diag: Vec<f64> = a.diag.iter().map(|d| d - shift).collect();
    let mut v = vec![1.0; points];
    for _ in 0..3 {
        v = solve_tridiagonal(&a.off, &diag, &a.off, &v)?;
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(LabError::Eigen("inverse iteration breakdown".into()));
        }
        v.iter_mut().for_each(|x| *x /= norm);
    }
    let kernel: Vec<f64> = nodes.iter().map(|&s| psi_d1(s)).collect();
    let kn = kernel.iter().map(|x| x * x).sum::<f64>().sqrt();
    let dot: f64 = v.iter().zip(&kernel).map(|(a, b)| a * b).sum();

    Ok(SpectralReport {
        halfwidth,
        points,
        kernel_residual: lambda0.abs(),
        gap: eigenvalues[1],
        eigenvalues,
        kernel_alignment: dot.abs() / kn,
        essential_edge: QuarticWell::d2w(1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{BoundaryCondition, Grid};
    use crate::geometry::WarpedGeometry;
    use std::f64::consts::{PI, SQRT_2};
    use std::sync::Arc;

    #[test]
    fn moments_match_closed_forms() {
        let p = CutoffProfile::new(0.05, 0.5).unwrap();
        let m = compute_moments(&p, 1e-12).unwrap();
        assert!((m.sigma0 - SQRT_2 / 3.0).abs() < 1e-10);
        assert!((m.sigma1 - 2.0).abs() < 1e-10);
        assert!((m.sigma2 - 2.0 * SQRT_2 / 3.0).abs() < 1e-10);
        assert!((m.profile_energy - profile_energy()).abs() < 1e-10);
        assert!(m.cross(1, 2).unwrap().raw.abs() < 1e-8);
        assert!(m.to_record().contains("sigma2 = "));
    }

    #[test]
    fn linearized_kills_profile_derivative() {
        let eps = 0.05;
        let p = CutoffProfile::new(eps, 0.5).unwrap();
        let geom = Arc::new(WarpedGeometry::flat_torus(2, 2.0 * PI).unwrap());
        let g = Arc::new(
            Grid::interval(
                geom,
                0.0,
                2.0,
                1024,
                BoundaryCondition::DirichletZero,
                BoundaryCondition::DirichletZero,
            )
            .unwrap(),
        );
        let h = g.spacing();
        let phi = Field::from_fn(g.clone(), |t| psi_d1((t - 1.0) / eps));
        let l = apply_linearized_1d(&phi, &p, 1.0, false).unwrap();
        assert!(
            l.sup_norm() < 10.0 * h * h / (eps * eps),
            "{}",
            l.sup_norm()
        );
        let zero = Field::constant(g, 0.0);
        assert_eq!(
            apply_linearized_1d(&zero, &p, 1.0, true)
                .unwrap()
                .sup_norm(),
            0.0
        );
    }

    #[test]
    fn coarse_grid_refused() {
        let p = CutoffProfile::new(0.05, 0.5).unwrap();
        let geom = Arc::new(WarpedGeometry::flat_torus(2, 2.0 * PI).unwrap());
        let g = Arc::new(Grid::full(geom, 64).unwrap());
        let phi = Field::constant(g, 1.0);
        assert!(matches!(
            apply_linearized_1d(&phi, &p, 1.0, false),
            Err(LabError::Unresolved { .. })
        ));
    }

    #[test]
    fn spectrum_kernel_and_gap() {
        let r = spectral_gap(20.0, 4096).unwrap();
        assert!(r.kernel_residual < 1e-5, "{}", r.kernel_residual);
        assert!((r.gap - 1.5).abs() < 1e-3, "{}", r.gap);
        assert!(r.kernel_alignment > 1.0 - 1e-8);
        assert_eq!(r.essential_edge, 2.0);
        assert!(r.gap < r.essential_edge);
    }

    #[test]
    fn spectrum_rejects_small_truncation() {
        assert!(spectral_gap(10.0, 4096).is_err());
        assert!(spectral_gap(20.0, 100).is_err());
    }
}
