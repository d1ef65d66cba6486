//! Sub- and supersolutions `v_H = omega_H + phi_1 + phi_2` built around the
//! constant mean curvature slices `Gamma_H`, and the sliding trap that
//! squeezes a solution between them.
//!
//! With `omega_H(t) = omega(t - c(H))`, the continuous residual is
//! `Q(omega_H) = eps^2 omega'' - eps^2 H(t) omega' - W'(omega)`, and since
//! `int (eps^2 omega'' - W'(omega)) omega' = 0` exactly, the choice
//! `lambda = (eps / sigma_1) int H(t) omega_H'(t)^2 dt` makes
//! `f = Q(omega_H) + eps lambda` orthogonal to `omega_H'`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::nodal_set;
use crate::discretization::{weighted_laplacian, Field, Grid};
use crate::error::{LabError, Result};
use crate::geometry::{CmcFamily, Slice, WarpedGeometry};
use crate::linalg::SymTridiagonal;
use crate::potential::{eval_psi, psi_d1, CutoffProfile, QuarticWell};
use crate::quadrature::{gauss_legendre, integrate};
use crate::solver::{residual, Solution};

/// `int psi' = psi(inf) - psi(-inf)`.
const SIGMA1: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BarrierConfig {
    /// Barriers are certified for `|H| >= k_factor * eps`.
    pub k_factor: f64,
    /// Largest `|H|` of the sliding ladder.
    pub tau_trap: f64,
    /// Rungs per sign in the ladder.
    pub rungs: usize,
}

impl Default for BarrierConfig {
    fn default() -> Self {
        Self {
            k_factor: 5.0,
            tau_trap: 0.2,
            rungs: 8,
        }
    }
}

fn collar_pieces(c: f64, r: f64) -> [(f64, f64); 4] {
    [
        (c - r, c - 0.5 * r),
        (c - 0.5 * r, c),
        (c, c + 0.5 * r),
        (c + 0.5 * r, c + r),
    ]
}

/// `lambda = (eps / sigma_1) int H(t) omega'(t - c)^2 dt` by adaptive quadrature,
/// where `c` is the position of the slice of mean curvature `h`.
pub fn compute_lambda(
    geom: &WarpedGeometry,
    base: &Slice,
    h: f64,
    profile: &CutoffProfile,
) -> Result<f64> {
    let c = CmcFamily::new(geom, *base)?.position(geom, h)?;
    lambda_at(geom, c, profile)
}

fn lambda_at(geom: &WarpedGeometry, c: f64, profile: &CutoffProfile) -> Result<f64> {
    let eps = profile.epsilon();
    let r = profile.collar();
    // the integrand is O(1/eps^2) near c; the tolerance is relative to that
    let tol = 1e-14 / (eps * eps);
    let mut total = 0.0;
    for (a, b) in collar_pieces(c, r) {
        let f = |t: f64| {
            let d = profile.d1(t - c);
            geom.mean_curvature(t).unwrap_or(0.0) * d * d
        };
        total += integrate(f, a, b, tol)?.value;
    }
    Ok(eps / SIGMA1 * total)
}

/// `|int (Q(omega_c) + eps lambda) omega'_c dt|` by a composite Gauss-Legendre
/// rule, independent of the adaptive quadrature used for `lambda`.
pub fn lambda_orthogonality(
    geom: &WarpedGeometry,
    c: f64,
    lambda: f64,
    profile: &CutoffProfile,
) -> f64 {
    let eps = profile.epsilon();
    let r = profile.collar();
    let panels = ((2.0 * r / eps) * 64.0).ceil() as usize;
    let f = |t: f64| {
        let j = profile.jet(t - c);
        let hc = geom.mean_curvature(t).unwrap_or(0.0);
        let q = eps * eps * (j.d2 - hc * j.d1) - QuarticWell::dw(j.value);
        (q + eps * lambda) * j.d1
    };
    collar_pieces(c, r)
        .iter()
        .map(|&(a, b)| gauss_legendre(f, a, b, panels / 4 + 1))
        .sum::<f64>()
        .abs()
}

/// Plain-`dt` projection coefficient of `v` on `k`.
fn projection(v: &[f64], k: &[f64]) -> f64 {
    let num: f64 = v.iter().zip(k).map(|(a, b)| a * b).sum();
    let den: f64 = k.iter().map(|b| b * b).sum();
    num / den
}

#[derive(Debug, Clone)]
pub struct AtInfinity {
    /// Solution of `eps^2 Delta_w v - 2 v = -f`.
    pub v1: Field,
    /// `v1` with its `omega'` component removed.
    pub phi1: Field,
}

/// Solves `(eps^2 Delta_w - 2) v1 = -f`, i.e. `(eps^2 G + 2M) v1 = M f`, and
/// projects out the direction `omega'(t - center)`.
pub fn invert_at_infinity(f: &Field, profile: &CutoffProfile, center: f64) -> Result<AtInfinity> {
    let grid = f.grid();
    let eps = profile.epsilon();
    grid.check_resolution(eps)?;
    let mass = grid.mass();
    let mut k = grid.stiffness();
    let e2 = eps * eps;
    for i in 0..k.len() {
        k.diag[i] = e2 * k.diag[i] + 2.0 * mass[i];
    }
    k.off.iter_mut().for_each(|o| *o *= e2);
    if let Some(c) = k.corner.as_mut() {
        *c *= e2;
    }
    let rhs: Vec<f64> = f.values.iter().zip(&mass).map(|(a, m)| a * m).collect();
    let v1 = f.with_values(k.solve(&rhs)?)?;
    let kernel: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&t| profile.d1(grid.offset(t, center)))
        .collect();
    let phi1 = if kernel.iter().all(|&v| v == 0.0) {
        v1.clone()
    } else {
        let a = projection(&v1.values, &kernel);
        v1.with_values(
            v1.values
                .iter()
                .zip(&kernel)
                .map(|(v, k)| v - a * k)
                .collect(),
        )?
    };
    Ok(AtInfinity { v1, phi1 })
}

#[derive(Debug, Clone)]
pub struct OrthogonalInverse {
    /// Cut-off solution of `l0 v = g` with `int v psi' = 0`.
    pub field: Field,
    /// Lagrange multiplier of the constraint.
    pub multiplier: f64,
    /// Sup norm of the component of `g` along `psi'` that the bordered solve
    /// discards.
    pub discarded_norm: f64,
    /// Sup norm of the part removed by the collar cutoff.
    pub tail_norm: f64,
}

/// Solves `l0 v = g`, `int v psi'((t - c)/eps) dt = 0` with
/// `l0 = eps^2 d^2 - W''(psi((t - c)/eps))` through the bordered system
/// `[A k; k^T 0]` by block elimination, then cuts `v` to the collar.
pub fn invert_orthogonal(
    g: &Field,
    profile: &CutoffProfile,
    center: f64,
) -> Result<OrthogonalInverse> {
    let grid = g.grid();
    let eps = profile.epsilon();
    grid.check_resolution(eps)?;
    let h = grid.spacing();
    let offsets: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&t| grid.offset(t, center))
        .collect();
    // -h l0 = eps^2 G_flat + h W''(psi)
    let mut a = grid.flat_stiffness();
    let e2 = eps * eps;
    for i in 0..a.len() {
        a.diag[i] = e2 * a.diag[i] + h * QuarticWell::d2w(eval_psi(offsets[i] / eps));
    }
    a.off.iter_mut().for_each(|o| *o *= e2);
    if let Some(c) = a.corner.as_mut() {
        *c *= e2;
    }
    let kernel: Vec<f64> = offsets.iter().map(|&s| psi_d1(s / eps)).collect();
    let k: Vec<f64> = kernel.iter().map(|v| h * v).collect();
    let b: Vec<f64> = g.values.iter().map(|v| -h * v).collect();
    let singular = |a: &SymTridiagonal| {
        let s = a.nearest_to_zero(1e-14).unwrap_or(0.0);
        LabError::BorderedSingular(s.abs())
    };
    let x = a.solve(&b).map_err(|_| singular(&a))?;
    let z = a.solve(&k).map_err(|_| singular(&a))?;
    let kz: f64 = k.iter().zip(&z).map(|(p, q)| p * q).sum();
    if !(kz.abs() > 0.0 && kz.is_finite()) {
        return Err(singular(&a));
    }
    let mu = k.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() / kz;
    let v: Vec<f64> = x.iter().zip(&z).map(|(p, q)| p - mu * q).collect();
    // A v + mu k = b  <=>  l0 v = g + (mu / h) * h psi'
    let discarded_norm = (mu * kernel.iter().fold(0.0f64, |m, v| m.max(v.abs()))).abs();
    let mut tail = 0.0f64;
    let cut: Vec<f64> = v
        .iter()
        .zip(&offsets)
        .map(|(&val, &s)| {
            let chi = profile.chi(s).0;
            tail = tail.max((val * (1.0 - chi)).abs());
            val * chi
        })
        .collect();
    Ok(OrthogonalInverse {
        field: g.with_values(cut)?,
        multiplier: mu,
        discarded_norm,
        tail_norm: tail,
    })
}

/// Discrete `L phi = eps^2 Delta_w phi - W''(omega) phi`.
fn linearization(phi: &Field, omega: &Field, eps: f64) -> Result<Field> {
    let lap = weighted_laplacian(phi, eps)?;
    let values = lap
        .values
        .iter()
        .zip(&phi.values)
        .zip(&omega.values)
        .map(|((l, p), w)| l - QuarticWell::d2w(*w) * p)
        .collect();
    phi.with_values(values)
}

#[derive(Debug, Clone)]
pub struct BarrierResult {
    pub h: f64,
    pub lambda: f64,
    /// Position `c(H)` of the slice carrying the profile.
    pub center: f64,
    pub v: Field,
    /// `sup |phi_1 + phi_2|`.
    pub phi_norm: f64,
    pub phi1_norm: f64,
    pub phi2_norm: f64,
    /// Every node has `sgn Q(v) = -sgn H`.
    pub sign_uniform: bool,
    pub min_abs_residual: f64,
    /// Nodes where the sign fails.
    pub offending: Vec<usize>,
    pub nodal_position: Option<f64>,
    /// Independent check of the defining orthogonality of `lambda`.
    pub orthogonality_residual: f64,
    pub discarded_norm: f64,
    pub tail_norm: f64,
}

/// Builds `v_H` on `grid` and certifies the sign of `Q(v_H)` node by node.
pub fn assemble_barrier(
    grid: Arc<Grid>,
    base: &Slice,
    h: f64,
    profile: &CutoffProfile,
    cfg: &BarrierConfig,
) -> Result<BarrierResult> {
    let eps = profile.epsilon();
    grid.check_resolution(eps)?;
    if h.abs() < cfg.k_factor * eps * (1.0 - 1e-12) {
        return Err(LabError::InvalidParameter(format!(
            "|H| = {} below K eps = {}",
            h.abs(),
            cfg.k_factor * eps
        )));
    }
    let geom = grid.geometry();
    let family = CmcFamily::new(geom, *base)?;
    if h.abs() > family.tau {
        return Err(LabError::OutsideCmcNeighborhood(h));
    }
    let c = family.position(geom, h)?;
    let lambda = lambda_at(geom, c, profile)?;
    let orthogonality_residual = lambda_orthogonality(geom, c, lambda, profile);

    let omega = Field::from_fn(grid.clone(), |t| profile.eval(grid.offset(t, c)));
    let q0 = residual(&omega, eps)?;
    let f = q0.map(|v| v + eps * lambda);
    let inf = invert_at_infinity(&f, profile, c)?;
    let g = f.add(&linearization(&inf.phi1, &omega, eps)?)?;
    let orth = invert_orthogonal(&g.scale(-1.0), profile, c)?;
    let phi = inf.phi1.add(&orth.field)?;
    let v = omega.add(&phi)?;

    let q = residual(&v, eps)?;
    let want = -h.signum();
    let offending: Vec<usize> = q
        .values
        .iter()
        .enumerate()
        .filter(|(_, &x)| !(x * want > 0.0))
        .map(|(i, _)| i)
        .collect();
    let min_abs_residual = q.values.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
    let nodal_position = nodal_set(&v)
        .crossings
        .into_iter()
        .min_by(|a, b| (a - c).abs().total_cmp(&(b - c).abs()));
    Ok(BarrierResult {
        h,
        lambda,
        center: c,
        phi_norm: phi.sup_norm(),
        phi1_norm: inf.phi1.sup_norm(),
        phi2_norm: orth.field.sup_norm(),
        sign_uniform: offending.is_empty(),
        min_abs_residual,
        offending,
        nodal_position,
        orthogonality_residual,
        discarded_norm: orth.discarded_norm,
        tail_norm: orth.tail_norm,
        v,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrapRung {
    pub h: f64,
    /// `min (v_H - u)`.
    pub upper_margin: f64,
    /// `min (u - v_{-H})`.
    pub lower_margin: f64,
    pub sign_uniform: bool,
}

impl TrapRung {
    pub fn holds(&self) -> bool {
        self.upper_margin > 0.0 && self.lower_margin > 0.0 && self.sign_uniform
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrapReport {
    /// False when `u` has no interface to trap.
    pub applicable: bool,
    pub trapped: bool,
    pub rungs: Vec<TrapRung>,
    /// First failing rung and its violation magnitude.
    pub violation: Option<(f64, f64)>,
    /// Largest distance of the final barriers' nodal points from the base.
    pub radius: f64,
    pub radius_over_eps: f64,
    /// Largest distance of the nodal set of `u` from the base, over `eps`.
    pub nodal_distance_over_eps: f64,
}

/// Descending ladder `H_k` from `tau` to `K eps`.
pub fn ladder(cfg: &BarrierConfig, epsilon: f64) -> Vec<f64> {
    let lo = cfg.k_factor * epsilon;
    let hi = cfg.tau_trap.max(lo);
    let n = cfg.rungs.max(1);
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|k| hi * (lo / hi).powf(k as f64 / (n - 1) as f64))
        .collect()
}

/// Checks `v_{-H} < u < v_H` at every node along the ladder.
pub fn sliding_trap(
    u: &Solution,
    base: &Slice,
    profile: &CutoffProfile,
    cfg: &BarrierConfig,
) -> Result<TrapReport> {
    let eps = profile.epsilon();
    let grid = u.field.grid_arc();
    let geom = grid.geometry();
    let nodal = nodal_set(&u.field);
    if nodal.count == 0 {
        return Ok(TrapReport {
            applicable: false,
            trapped: false,
            rungs: Vec::new(),
            violation: None,
            radius: f64::NAN,
            radius_over_eps: f64::NAN,
            nodal_distance_over_eps: f64::NAN,
        });
    }
    let hs = ladder(cfg, eps);
    let pairs: Vec<Result<(TrapRung, Option<f64>, Option<f64>)>> = hs
        .par_iter()
        .map(|&h| {
            let upper = assemble_barrier(grid.clone(), base, h, profile, cfg)?;
            let lower = assemble_barrier(grid.clone(), base, -h, profile, cfg)?;
            let up = upper
                .v
                .values
                .iter()
                .zip(&u.field.values)
                .map(|(v, w)| v - w)
                .fold(f64::INFINITY, f64::min);
            let lo = u
                .field
                .values
                .iter()
                .zip(&lower.v.values)
                .map(|(w, v)| w - v)
                .fold(f64::INFINITY, f64::min);
            Ok((
                TrapRung {
                    h,
                    upper_margin: up,
                    lower_margin: lo,
                    sign_uniform: upper.sign_uniform && lower.sign_uniform,
                },
                upper.nodal_position,
                lower.nodal_position,
            ))
        })
        .collect();
    let mut rungs = Vec::with_capacity(pairs.len());
    let mut last_nodes = (None, None);
    for p in pairs {
        let (rung, a, b) = p?;
        rungs.push(rung);
        last_nodes = (a, b);
    }
    let violation = rungs
        .iter()
        .find(|r| !r.holds())
        .map(|r| (r.h, -(r.upper_margin.min(r.lower_margin)).min(0.0)));
    let radius = [last_nodes.0, last_nodes.1]
        .iter()
        .map(|p| {
            p.map(|x| grid.offset(x, base.position).abs())
                .unwrap_or(f64::INFINITY)
        })
        .fold(0.0, f64::max);
    let nodal_distance = nodal
        .crossings
        .iter()
        .map(|&x| crate::geometry::signed_distance(geom, base, x).abs())
        .fold(0.0, f64::max);
    Ok(TrapReport {
        applicable: true,
        trapped: violation.is_none(),
        rungs,
        violation,
        radius,
        radius_over_eps: radius / eps,
        nodal_distance_over_eps: nodal_distance / eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{points_for, BoundaryCondition};
    use std::f64::consts::PI;

    fn cut_torus(eps: f64) -> Arc<Grid> {
        Arc::new(
            Grid::interval(
                Arc::new(WarpedGeometry::default_torus()),
                0.0,
                2.0 * PI,
                points_for(2.0 * PI, eps),
                BoundaryCondition::NeumannZero,
                BoundaryCondition::NeumannZero,
            )
            .unwrap(),
        )
    }

    #[test]
    fn lambda_flat_is_zero() {
        let geom = WarpedGeometry::flat_torus(2, 2.0 * PI).unwrap();
        let p = CutoffProfile::new(0.02, 0.5).unwrap();
        assert_eq!(lambda_at(&geom, PI, &p).unwrap(), 0.0);
    }

    #[test]
    fn lambda_orthogonality_holds() {
        let geom = WarpedGeometry::default_torus();
        let base = geom.slice_at(PI).unwrap();
        let p = CutoffProfile::new(0.02, 0.5).unwrap();
        let c = CmcFamily::new(&geom, base)
            .unwrap()
            .position(&geom, 0.05)
            .unwrap();
        let lam = compute_lambda(&geom, &base, 0.05, &p).unwrap();
        assert!(lambda_orthogonality(&geom, c, lam, &p) < 1e-8);
    }

    #[test]
    fn at_infinity_constant_and_zero() {
        let eps = 0.05;
        let g = cut_torus(eps);
        let p = CutoffProfile::new(eps, 0.5).unwrap();
        let zero = invert_at_infinity(&Field::constant(g.clone(), 0.0), &p, PI).unwrap();
        assert_eq!(zero.phi1.sup_norm(), 0.0);
        let c = invert_at_infinity(&Field::constant(g, 0.3), &p, PI).unwrap();
        assert!(c.v1.values.iter().all(|v| (v - 0.15).abs() < 1e-12));
    }

    #[test]
    fn orthogonal_kernel_direction_is_discarded() {
        let eps = 0.05;
        let g = cut_torus(eps);
        let p = CutoffProfile::new(eps, 0.5).unwrap();
        let k = Field::from_fn(g, |t| psi_d1((t - PI) / eps));
        let r = invert_orthogonal(&k, &p, PI).unwrap();
        assert!(r.field.sup_norm() < 1e-8, "{}", r.field.sup_norm());
        assert!(r.discarded_norm > 0.1);
    }

    #[test]
    fn barrier_signs_on_default_torus() {
        let eps = 0.02;
        let g = cut_torus(eps);
        let base = g.geometry().slice_at(PI).unwrap();
        let p = CutoffProfile::new(eps, 0.5).unwrap();
        let cfg = BarrierConfig::default();
        for h in [0.1, -0.1] {
            let b = assemble_barrier(g.clone(), &base, h, &p, &cfg).unwrap();
            assert!(b.sign_uniform, "H = {h}: {} offending", b.offending.len());
            assert!(b.min_abs_residual > 0.0);
            assert!(b.orthogonality_residual < 1e-8);
        }
    }

    #[test]
    fn ladder_descends_to_k_eps() {
        let l = ladder(&BarrierConfig::default(), 0.02);
        assert_eq!(l.len(), 8);
        assert!((l[0] - 0.2).abs() < 1e-15);
        assert!((l[7] - 0.1).abs() < 1e-12);
        assert!(l.windows(2).all(|w| w[1] < w[0]));
    }
}
