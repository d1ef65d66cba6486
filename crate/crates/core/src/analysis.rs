//! Post-processing of computed solutions: nodal sets, distance to a slice,
//! energy multiplicity, tail decay, Morse index, and the orthogonal
//! `(xi, phi)` splitting `u = omega_xi + phi` with `int phi omega'_xi dt = 0`.

use serde::Serialize;

use crate::discretization::Field;
use crate::error::{LabError, Result};
use crate::geometry::{signed_distance, Slice, WarpedGeometry};
use crate::linalg::SymTridiagonal;
use crate::potential::CutoffProfile;
use crate::profile::profile_energy;
use crate::solver::{hessian, Solution};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodalSet {
    pub crossings: Vec<f64>,
    pub count: usize,
}

/// Zero crossings by linear interpolation; exact zeros count once.
pub fn nodal_set(u: &Field) -> NodalSet {
    let grid = u.grid();
    let t = grid.nodes();
    let v = &u.values;
    let n = v.len();
    let h = grid.spacing();
    let mut crossings = Vec::new();
    let pairs = if grid.is_periodic() { n } else { n - 1 };
    for i in 0..n {
        if v[i] == 0.0 {
            crossings.push(t[i]);
        }
    }
    for i in 0..pairs {
        let j = (i + 1) % n;
        let (a, b) = (v[i], v[j]);
        if a * b < 0.0 {
            let frac = a / (a - b);
            let mut x = t[i] + frac * h;
            if j == 0 {
                let (lo, hi) = grid.bounds();
                if x >= hi {
                    x -= hi - lo;
                }
            }
            crossings.push(x);
        }
    }
    crossings.sort_by(f64::total_cmp);
    NodalSet {
        count: crossings.len(),
        crossings,
    }
}

/// Largest distance from a crossing to the slice.  In the symmetric class the
/// nodal set is a union of slices, so this one-sided distance equals the
/// two-sided Hausdorff distance.
pub fn hausdorff_to_slice(nodal: &NodalSet, geom: &WarpedGeometry, slice: &Slice) -> Result<f64> {
    if nodal.crossings.is_empty() {
        return Err(LabError::NoInterface);
    }
    Ok(nodal
        .crossings
        .iter()
        .map(|&c| signed_distance(geom, slice, c).abs())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Multiplicity {
    /// `E(u) / (e_1 |slice|)` with `e_1 = 2 sqrt(2)/3` the energy per unit area
    /// of one interface.
    pub ratio: f64,
    /// Nearest integer when within 0.25 of it; `None` flags an ambiguous value.
    pub rounded: Option<u32>,
}

pub const MULTIPLICITY_AMBIGUITY: f64 = 0.25;

pub fn multiplicity_estimate(u: &Solution, slice: &Slice) -> Multiplicity {
    let ratio = u.energy / (profile_energy() * slice.area);
    let nearest = ratio.round();
    let rounded = ((ratio - nearest).abs() <= MULTIPLICITY_AMBIGUITY && nearest >= 0.0)
        .then_some(nearest as u32);
    Multiplicity { ratio, rounded }
}

/// Least-squares slope of `log(1 - |u|)` against `dist / eps` over nodes with
/// `r1 <= |t - c| <= r2`.
pub fn decay_fit(u: &Field, center: f64, collar: (f64, f64), epsilon: f64) -> Result<f64> {
    let grid = u.grid();
    let (r1, r2) = collar;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &v) in grid.nodes().iter().zip(&u.values) {
        let d = grid.offset(t, center).abs();
        if d < r1 || d > r2 {
            continue;
        }
        let gap = 1.0 - v.abs();
        if !(gap > 1e-14) {
            return Err(LabError::DecayFloor(gap));
        }
        xs.push(d / epsilon);
        ys.push(gap.ln());
    }
    if xs.len() < 2 {
        return Err(LabError::InvalidParameter(
            "decay collar holds fewer than 2 nodes".into(),
        ));
    }
    Ok(least_squares_slope(&xs, &ys))
}

pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Number of negative eigenvalues of `-eps^2 Delta_w + W''(u)` in the
/// weighted inner product, by Sylvester inertia of `eps^2 G + M W''(u)`.
pub fn morse_index(u: &Solution) -> usize {
    hessian(&u.field, u.epsilon).negative_count()
}

/// Lowest `k` eigenvalues of `-eps^2 Delta_w + W''(u)` (mass-symmetrized).
pub fn lowest_eigenvalues(u: &Field, epsilon: f64, k: usize) -> Result<Vec<f64>> {
    let kmat = hessian(u, epsilon);
    let m = u.grid().mass();
    let s: Vec<f64> = m.iter().map(|v| v.sqrt().recip()).collect();
    let n = kmat.len();
    let diag = (0..n).map(|i| kmat.diag[i] * s[i] * s[i]).collect();
    let off = (0..n - 1).map(|i| kmat.off[i] * s[i] * s[i + 1]).collect();
    let corner = kmat.corner.map(|c| c * s[0] * s[n - 1]);
    let sym = SymTridiagonal::new(diag, off, corner);
    (0..k.min(n)).map(|j| sym.eigenvalue(j, 1e-14)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecompositionReport {
    pub xi: f64,
    /// `sup |u - omega_xi|`.
    pub phi_sup: f64,
    /// `max(|phi|, eps |phi'|, eps^2 |phi''|)` by central differences.
    pub phi_c2: f64,
    /// `|F(xi)|`.
    pub orthogonality_residual: f64,
    /// Centered difference `dF/dxi` at the root.
    pub slope: f64,
    pub iterations: usize,
}

/// `F(xi) = eps int (u - omega_xi) omega'_xi dt` in the plain coordinate measure.
pub fn orthogonality_functional(u: &Field, profile: &CutoffProfile, xi: f64) -> f64 {
    let grid = u.grid();
    let eps = profile.epsilon();
    let s: f64 = grid
        .nodes()
        .iter()
        .zip(&u.values)
        .map(|(&t, &v)| {
            let jet = profile.jet(grid.offset(t, xi));
            (v - jet.value) * jet.d1
        })
        .sum();
    eps * s * grid.spacing()
}

pub const DEFAULT_BRACKET: f64 = 0.2;

/// Root of `F` in `[c - b, c + b]` by secant steps safeguarded by bisection.
pub fn decompose(
    u: &Field,
    center: f64,
    profile: &CutoffProfile,
    bracket_halfwidth: f64,
) -> Result<DecompositionReport> {
    let eps = profile.epsilon();
    let f = |x: f64| orthogonality_functional(u, profile, x);
    let (mut a, mut b) = (center - bracket_halfwidth, center + bracket_halfwidth);
    let (mut fa, fb) = (f(a), f(b));
    if fa * fb > 0.0 {
        return Err(LabError::InterfaceOutsideCollar);
    }
    let tol = 1e-12 * eps;
    // secant iterates start from the centre and the nearer bracket end
    let mut x0 = center;
    let mut f0 = f(x0);
    let mut x1 = if fa.abs() < fb.abs() { a } else { b };
    let mut f1 = if fa.abs() < fb.abs() { fa } else { fb };
    let mut iterations = 0;
    let mut root = x0;
    for it in 0..200 {
        iterations = it + 1;
        if f0 == 0.0 {
            root = x0;
            break;
        }
        // maintain the bracket with the newest evaluation
        if (f0 < 0.0) == (fa < 0.0) {
            a = x0;
            fa = f0;
        } else {
            b = x0;
        }
        let secant = if f1 != f0 {
            x0 - f0 * (x0 - x1) / (f0 - f1)
        } else {
            f64::NAN
        };
        let next = if secant.is_finite() && secant > a.min(b) && secant < a.max(b) {
            secant
        } else {
            0.5 * (a + b)
        };
        let step = (next - x0).abs();
        x1 = x0;
        f1 = f0;
        x0 = next;
        f0 = f(x0);
        root = x0;
        if step < tol || (b - a).abs() < tol {
            break;
        }
    }
    let xi = root;
    let residual = f(xi).abs();
    let d = 1e-3 * eps;
    let slope = (f(xi + d) - f(xi - d)) / (2.0 * d);

    let grid = u.grid();
    let phi: Vec<f64> = grid
        .nodes()
        .iter()
        .zip(&u.values)
        .map(|(&t, &v)| v - profile.eval(grid.offset(t, xi)))
        .collect();
    let phi_sup = phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let h = grid.spacing();
    let mut c2 = phi_sup;
    for i in 1..phi.len() - 1 {
        let d1 = (phi[i + 1] - phi[i - 1]) / (2.0 * h);
        let d2 = (phi[i + 1] - 2.0 * phi[i] + phi[i - 1]) / (h * h);
        c2 = c2.max(eps * d1.abs()).max(eps * eps * d2.abs());
    }
    Ok(DecompositionReport {
        xi,
        phi_sup,
        phi_c2: c2,
        orthogonality_residual: residual,
        slope,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{BoundaryCondition, Grid};
    use crate::potential::eval_psi;
    use crate::solver::{newton_solve, SolverConfig};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn cut_torus(n: usize) -> Arc<Grid> {
        Arc::new(
            Grid::interval(
                Arc::new(WarpedGeometry::default_torus()),
                0.0,
                2.0 * PI,
                n,
                BoundaryCondition::NeumannZero,
                BoundaryCondition::NeumannZero,
            )
            .unwrap(),
        )
    }

    #[test]
    fn nodal_examples() {
        let eps = 0.05;
        let g = cut_torus(2048);
        let h = g.spacing();
        let c = 2.0;
        let u = Field::from_fn(g.clone(), |t| eval_psi((t - c) / eps));
        let ns = nodal_set(&u);
        assert_eq!(ns.count, 1);
        assert!((ns.crossings[0] - c).abs() <= h * h / eps);
        assert_eq!(nodal_set(&Field::constant(g.clone(), 1.0)).count, 0);
        let pair = crate::solver::seed_pair(g, PI, 0.4, eps);
        assert_eq!(nodal_set(&pair).count, 2);
    }

    #[test]
    fn nodal_periodic_wrap() {
        let g = Arc::new(Grid::full(Arc::new(WarpedGeometry::default_torus()), 256).unwrap());
        let u = crate::solver::seed_pair(g, 0.0, 0.5, 0.05);
        let ns = nodal_set(&u);
        assert_eq!(ns.count, 2);
        assert!(ns.crossings.iter().all(|&x| (0.0..2.0 * PI).contains(&x)));
    }

    #[test]
    fn hausdorff_examples() {
        let geom = WarpedGeometry::default_torus();
        let s = geom.slice_at(PI).unwrap();
        let one = NodalSet {
            crossings: vec![PI],
            count: 1,
        };
        assert_eq!(hausdorff_to_slice(&one, &geom, &s).unwrap(), 0.0);
        let two = NodalSet {
            crossings: vec![PI - 0.1, PI + 0.1],
            count: 2,
        };
        assert!((hausdorff_to_slice(&two, &geom, &s).unwrap() - 0.1).abs() < 1e-14);
        let none = NodalSet {
            crossings: vec![],
            count: 0,
        };
        assert!(matches!(
            hausdorff_to_slice(&none, &geom, &s),
            Err(LabError::NoInterface)
        ));
    }

    #[test]
    fn decay_of_exact_profile() {
        let eps = 0.02;
        let g = cut_torus(8192);
        let u = Field::from_fn(g, |t| eval_psi((t - PI) / eps));
        let slope = decay_fit(&u, PI, (3.0 * eps, 8.0 * eps), eps).unwrap();
        assert!((slope / -2f64.sqrt() - 1.0).abs() < 0.02, "{slope}");
        let one = Field::constant(u.grid_arc(), 1.0);
        assert!(matches!(
            decay_fit(&one, PI, (3.0 * eps, 8.0 * eps), eps),
            Err(LabError::DecayFloor(_))
        ));
    }

    #[test]
    fn decompose_manufactured() {
        let eps = 0.04;
        let p = CutoffProfile::new(eps, 0.5).unwrap();
        let g = cut_torus(4096);
        let u = Field::from_fn(g.clone(), |t| p.eval(t - PI));
        let r = decompose(&u, PI, &p, DEFAULT_BRACKET).unwrap();
        assert!((r.xi - PI).abs() < 1e-12);
        assert!(r.phi_sup < 1e-10);
        let shifted = Field::from_fn(g, |t| p.eval(t - PI - 0.3 * eps));
        let r = decompose(&shifted, PI, &p, DEFAULT_BRACKET).unwrap();
        assert!((r.xi - PI - 0.3 * eps).abs() < 1e-8);
        assert!((r.slope / (2.0 * 2f64.sqrt() / 3.0) - 1.0).abs() < 0.2);
    }

    #[test]
    fn decompose_without_interface_fails() {
        let eps = 0.04;
        let p = CutoffProfile::new(eps, 0.5).unwrap();
        let u = Field::constant(cut_torus(4096), 1.0);
        assert!(matches!(
            decompose(&u, PI, &p, DEFAULT_BRACKET),
            Err(LabError::InterfaceOutsideCollar)
        ));
    }

    #[test]
    fn index_of_constants() {
        let eps = 0.1;
        let g =
            Arc::new(Grid::for_epsilon(Arc::new(WarpedGeometry::default_torus()), eps).unwrap());
        let cfg = SolverConfig::default();
        let one = newton_solve(&Field::constant(g.clone(), 1.0), eps, &cfg).unwrap();
        assert_eq!(morse_index(&one), 0);
        let zero = newton_solve(&Field::constant(g, 0.0), eps, &cfg).unwrap();
        assert!(morse_index(&zero) >= 1);
        let m = multiplicity_estimate(&one, &WarpedGeometry::default_torus().slice_at(PI).unwrap());
        assert_eq!(m.ratio, 0.0);
        assert_eq!(m.rounded, Some(0));
    }
}
