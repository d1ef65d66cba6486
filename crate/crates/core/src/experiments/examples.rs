use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use super::study::{barriers_available, interface_columns};
use super::{
    elapsed, noisy, require_converged, require_kind, CutTorus, Outcome, RunConfig, StudyRecord,
};
use crate::analysis::{hausdorff_to_slice, morse_index, multiplicity_estimate, nodal_set};
use crate::barriers::sliding_trap;
use crate::discretization::{energy, points_for, BoundaryCondition, Field, Grid};
use crate::error::{LabError, Result};
use crate::geometry::{GeometryKind, WarpedGeometry};
use crate::potential::CutoffProfile;
use crate::solver::{gradient_flow, minimize_dirichlet, newton_solve, seed_pair, Sign, Solution};

/// Values in the shooting scan.
const SCAN_POINTS: usize = 32;
/// Bisection stops when the tau bracket is this narrow.
const SHOOT_TOL: f64 = 1e-8;
/// Band half-widths scanned: from `1.2 eps` (below the existence threshold
/// `pi eps / 2` of a positive band solution) to this value.
const SCAN_MAX_HALFWIDTH: f64 = 0.9;
/// Seeds of the two-interface search at the unstable slice: half gaps
/// `(1.5 + 0.5 k) eps` up to `10 eps`.
const PAIR_SCAN: usize = 18;
/// Half gap of the two-interface seed at the stable slice, in units of eps.
const STABLE_PAIR_HALF_GAP: f64 = 4.0;
/// Exclusion radius around the stable slice for the negative result.
const STABLE_EXCLUSION: f64 = 0.1;

/// Antipodally even solution on the round sphere with two parallels.
#[derive(Debug, Clone)]
pub struct SphereSolution {
    /// `cos` of the polar angle of the northern parallel at the shooting root.
    pub tau: f64,
    /// Scanned `(tau, eps * (u_A' - u_D'))` at the common boundary.
    pub mismatch_curve: Vec<(f64, f64)>,
    pub solution: Solution,
    /// Polar angles of the two crossings.
    pub parallels: (f64, f64),
    pub distance_to_equator: f64,
}

/// One-sided derivative at a zero Dirichlet face from the two nearest cell
/// values (quadratic through the face value).
fn face_slope(u0: f64, u1: f64, h: f64) -> f64 {
    (9.0 * u0 - u1) / (3.0 * h)
}

struct Shot {
    mismatch: f64,
    cap: Solution,
    band: Solution,
}

/// Negative minimizer on the cap `theta < acos(tau)` and positive minimizer on
/// the half band `acos(tau) < theta < pi/2` (Neumann at the equator by the
/// antipodal symmetry); mismatch of their normal derivatives at the boundary.
fn shoot(
    geom: &Arc<WarpedGeometry>,
    tau: f64,
    eps: f64,
    n: usize,
    cfg: &RunConfig,
) -> Result<Shot> {
    shoot_cells(geom, tau.acos(), n, n, eps, cfg)
}

fn shoot_cells(
    geom: &Arc<WarpedGeometry>,
    tb: f64,
    cap_cells: usize,
    band_cells: usize,
    eps: f64,
    cfg: &RunConfig,
) -> Result<Shot> {
    let cap = Arc::new(Grid::interval(
        geom.clone(),
        0.0,
        tb,
        cap_cells,
        BoundaryCondition::PoleRegular,
        BoundaryCondition::DirichletZero,
    )?);
    let band = Arc::new(Grid::interval(
        geom.clone(),
        tb,
        FRAC_PI_2,
        band_cells,
        BoundaryCondition::DirichletZero,
        BoundaryCondition::NeumannZero,
    )?);
    let cap = minimize_dirichlet(cap, Sign::Negative, eps, &cfg.solver)?;
    let band = minimize_dirichlet(band, Sign::Positive, eps, &cfg.solver)?;
    let c = &cap.field.values;
    let b = &band.field.values;
    let n = c.len();
    let d_cap = -face_slope(c[n - 1], c[n - 2], cap.field.grid().spacing());
    let d_band = face_slope(b[0], b[1], band.field.grid().spacing());
    Ok(Shot {
        mismatch: eps * (d_band - d_cap),
        cap,
        band,
    })
}

/// Shooting on `tau`, gluing and a Newton polish on the full sphere.
pub fn sphere_solution(
    geom: Arc<WarpedGeometry>,
    eps: f64,
    cfg: &RunConfig,
) -> Result<SphereSolution> {
    require_kind(&geom, &[GeometryKind::Sphere])?;
    if geom.dim != 2 {
        return Err(LabError::InvalidParameter(format!(
            "sphere example is set up for n = 2, got n = {}",
            geom.dim
        )));
    }
    let lo = 1.2 * eps;
    if !(lo < SCAN_MAX_HALFWIDTH) {
        return Err(LabError::InvalidParameter(format!(
            "epsilon {eps} too large for the tau scan"
        )));
    }
    let n = points_for(FRAC_PI_2, eps) * cfg.grid_multiplier;
    let taus: Vec<f64> = (0..SCAN_POINTS)
        .map(|k| {
            let d = lo * (SCAN_MAX_HALFWIDTH / lo).powf(k as f64 / (SCAN_POINTS - 1) as f64);
            d.sin()
        })
        .collect();
    let mut curve = Vec::with_capacity(SCAN_POINTS);
    for &tau in &taus {
        curve.push((tau, shoot(&geom, tau, eps, n, cfg)?.mismatch));
    }
    let k = curve
        .windows(2)
        .position(|w| w[0].1 < 0.0 && w[1].1 > 0.0)
        .ok_or_else(|| LabError::NoShootingRoot(curve.clone()))?;
    let (mut a, mut b) = (curve[k].0, curve[k + 1].0);
    while b - a > SHOOT_TOL {
        let m = 0.5 * (a + b);
        if shoot(&geom, m, eps, n, cfg)?.mismatch < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    let tau = 0.5 * (a + b);
    // re-solve cap and band on cells of the full grid, with the common
    // boundary snapped to the nearest face, so gluing needs no interpolation
    let full = Arc::new(Grid::full(
        geom.clone(),
        points_for(PI, eps) * cfg.grid_multiplier,
    )?);
    let half = full.len() / 2;
    let h = full.spacing();
    let k = ((tau.acos() / h).round() as usize).clamp(2, half - 2);
    let shot = shoot_cells(&geom, k as f64 * h, k, half - k, eps, cfg)?;
    let mut values = shot.cap.field.values.clone();
    values.extend_from_slice(&shot.band.field.values);
    let mirror: Vec<f64> = values.iter().rev().copied().collect();
    values.extend(mirror);
    let seed = Field::new(full, values)?;
    let solution = newton_solve(&seed, eps, &cfg.solver)?;
    require_converged(&solution, "glued sphere solution")?;
    let nodal = nodal_set(&solution.field);
    if nodal.count != 2 {
        return Err(LabError::Contract(format!(
            "sphere solution has {} crossings, expected two parallels",
            nodal.count
        )));
    }
    let (p, q) = (nodal.crossings[0], nodal.crossings[1]);
    if (p + q - PI).abs() > 1e-6 {
        return Err(LabError::Contract(format!(
            "parallels at {p} and {q} are not symmetric about the equator"
        )));
    }
    Ok(SphereSolution {
        tau,
        mismatch_curve: curve,
        solution,
        parallels: (p, q),
        distance_to_equator: 0.5 * (q - p),
    })
}

fn sphere_geometry(cfg: &RunConfig) -> Result<Arc<WarpedGeometry>> {
    Ok(Arc::new(WarpedGeometry::sphere(cfg.geometry.dim)?))
}

fn example1_rung(eps: f64, cfg: &RunConfig) -> Result<Vec<StudyRecord>> {
    let start = Instant::now();
    let geom = Arc::new(cfg.geometry.build()?);
    let s = sphere_solution(geom.clone(), eps, cfg)?;
    let equator = geom.slice_at(FRAC_PI_2)?;
    let nodal = nodal_set(&s.solution.field);
    let mut rec = StudyRecord::new("example1", eps, &geom.hash());
    rec.energy = Some(s.solution.energy);
    rec.mult_ratio = Some(multiplicity_estimate(&s.solution, &equator).ratio);
    rec.hausdorff_over_eps = Some(hausdorff_to_slice(&nodal, &geom, &equator)? / eps);
    rec.index = Some(morse_index(&s.solution));
    rec.crossings = Some(nodal.count);
    rec.nearest_interface = Some(s.distance_to_equator);
    rec.outcome = format!("tau={:.10}", s.tau);
    rec.field = Some(s.solution.field);
    rec.wall_time = elapsed(start);
    Ok(vec![rec])
}

pub(crate) fn example1_outcome(cfg: &RunConfig) -> Outcome {
    Outcome::collect(
        cfg.epsilon
            .par_iter()
            .map(|&e| example1_rung(e, cfg))
            .collect(),
    )
}

/// Round sphere `n = 2`: two parallels symmetric about the equator.
pub fn run_example1(cfg: &RunConfig) -> Result<Vec<StudyRecord>> {
    example1_outcome(cfg).into_result()
}

fn example2_rung(eps: f64, cfg: &RunConfig) -> Result<Vec<StudyRecord>> {
    let start = Instant::now();
    let sphere = sphere_geometry(cfg)?;
    let s = sphere_solution(sphere, eps, cfg)?;
    let proj = Arc::new(WarpedGeometry::projective_sphere(cfg.geometry.dim)?);
    let n = s.solution.field.len();
    let grid = Arc::new(Grid::full(proj.clone(), n / 2)?);
    // the quotient's cells are exactly the northern half of the sphere's
    let quotient = Field::new(grid, s.solution.field.values[..n / 2].to_vec())?;
    let e_half = energy(&quotient, eps)?;
    if (e_half - 0.5 * s.solution.energy).abs() > 1e-8 {
        return Err(LabError::Contract(format!(
            "quotient energy {e_half} is not half of {}",
            s.solution.energy
        )));
    }
    let qsol = newton_solve(&quotient, eps, &cfg.solver)?;
    require_converged(&qsol, "quotient solution")?;
    let slice = proj.slice_at(FRAC_PI_2)?;
    let nodal = nodal_set(&qsol.field);
    let ratio = multiplicity_estimate(&qsol, &slice).ratio;
    let mut rec = StudyRecord::new("example2", eps, &proj.hash());
    rec.energy = Some(qsol.energy);
    rec.mult_ratio = Some(ratio);
    rec.hausdorff_over_eps = Some(hausdorff_to_slice(&nodal, &proj, &slice)? / eps);
    rec.index = Some(morse_index(&qsol));
    rec.crossings = Some(nodal.count);
    rec.nearest_interface = Some(s.distance_to_equator);
    // the same energy read against the full equator length
    rec.outcome = format!("ratio_vs_equator={:.6}", 0.5 * ratio);
    rec.field = Some(qsol.field);
    rec.wall_time = elapsed(start);
    Ok(vec![rec])
}

pub(crate) fn example2_outcome(cfg: &RunConfig) -> Outcome {
    Outcome::collect(
        cfg.epsilon
            .par_iter()
            .map(|&e| example2_rung(e, cfg))
            .collect(),
    )
}

/// Quotient of the sphere solution on the projective line `[0, pi/2]`.
pub fn run_example2(cfg: &RunConfig) -> Result<Vec<StudyRecord>> {
    example2_outcome(cfg).into_result()
}

/// (i) two interfaces around the unstable slice.
fn pair_at_unstable(ct: &CutTorus, eps: f64, cfg: &RunConfig) -> Result<StudyRecord> {
    let start = Instant::now();
    let geom = ct.geometry.clone();
    let t1 = ct.unstable()?;
    let p = ct.period;
    let grid = Arc::new(Grid::full(
        geom.clone(),
        points_for(p, eps) * cfg.grid_multiplier,
    )?);
    let mut found = None;
    for k in 0..PAIR_SCAN {
        let d = (1.5 + 0.5 * k as f64) * eps;
        let seed = noisy(seed_pair(grid.clone(), t1.position, d, eps), cfg);
        let s = newton_solve(&seed, eps, &cfg.solver)?;
        let nodal = nodal_set(&s.field);
        let inside = s.field.values[grid
            .nodes()
            .partition_point(|&t| t < t1.position)
            .min(grid.len() - 1)];
        if s.converged && nodal.count == 2 && inside > 0.0 {
            found = Some((d, s));
            break;
        }
    }
    let (d, s) = found.ok_or_else(|| {
        LabError::Contract("no two-interface solution at the unstable slice".into())
    })?;
    let nodal = nodal_set(&s.field);
    let mut rec = StudyRecord::new("example3_i", eps, &geom.hash());
    rec.energy = Some(s.energy);
    rec.mult_ratio = Some(multiplicity_estimate(&s, &t1).ratio);
    rec.hausdorff_over_eps = Some(hausdorff_to_slice(&nodal, &geom, &t1)? / eps);
    rec.index = Some(morse_index(&s));
    rec.crossings = Some(nodal.count);
    rec.nearest_interface = nodal
        .crossings
        .iter()
        .map(|&c| grid.offset(c, t1.position).abs())
        .reduce(f64::min);
    rec.outcome = format!("seed_half_gap_over_eps={:.1}", d / eps);
    rec.field = Some(s.field);
    rec.wall_time = elapsed(start);
    Ok(rec)
}

/// (ii) two interfaces seeded around the stable slice, followed by the flow.
fn pair_at_stable(ct: &CutTorus, eps: f64, cfg: &RunConfig) -> Result<StudyRecord> {
    let start = Instant::now();
    let geom = ct.geometry.clone();
    let grid = Arc::new(Grid::full(
        geom.clone(),
        points_for(ct.period, eps) * cfg.grid_multiplier,
    )?);
    let c = ct.base.position;
    let seed = noisy(
        seed_pair(grid.clone(), c, STABLE_PAIR_HALF_GAP * eps, eps),
        cfg,
    );
    let flowed = gradient_flow(&seed, eps, &cfg.solver)?;
    // polish when the flow has settled, so the index is that of a critical point
    let fin = match newton_solve(&flowed.field, eps, &cfg.solver) {
        Ok(s) if s.converged => s,
        _ => flowed,
    };
    let nodal = nodal_set(&fin.field);
    let nearest = nodal
        .crossings
        .iter()
        .map(|&x| grid.offset(x, c).abs())
        .reduce(f64::min);
    let outcome = match nearest {
        None => "annihilated",
        Some(d) if d > STABLE_EXCLUSION => "migrated",
        Some(_) => "FALSIFYING",
    };
    let mut rec = StudyRecord::new("example3_ii", eps, &geom.hash());
    rec.energy = Some(fin.energy);
    rec.mult_ratio = Some(multiplicity_estimate(&fin, &ct.base).ratio);
    rec.index = Some(morse_index(&fin));
    rec.crossings = Some(nodal.count);
    rec.nearest_interface = nearest;
    rec.outcome = outcome.into();
    rec.field = Some(fin.field);
    rec.wall_time = elapsed(start);
    Ok(rec)
}

/// (iii) single interface at the stable slice: index, index under `h/2`, trap.
fn single_at_stable(ct: &CutTorus, eps: f64, cfg: &RunConfig) -> Result<StudyRecord> {
    let start = Instant::now();
    let grid = ct.grid(eps, cfg.grid_multiplier)?;
    let sol = ct.solve(grid.clone(), eps, cfg)?;
    let half = ct.solve(Arc::new(grid.refined(2)?), eps, cfg)?;
    let mut rec = StudyRecord::new("example3_iii", eps, &ct.geometry.hash());
    interface_columns(&mut rec, &sol, &ct.base, ct)?;
    let mut outcome = format!("index_half_h={}", morse_index(&half));
    if barriers_available(ct, eps, cfg)? {
        let profile = CutoffProfile::new(eps, cfg.delta)?;
        let trap = sliding_trap(&sol, &ct.base, &profile, &cfg.barrier)?;
        rec.trapped = Some(trap.trapped);
        rec.barrier_margin = trap
            .rungs
            .iter()
            .map(|r| r.upper_margin.min(r.lower_margin))
            .reduce(f64::min);
        outcome.push_str(&format!(
            ";trap_radius_over_eps={:.4}",
            trap.radius_over_eps
        ));
    } else {
        outcome.push_str(";barriers_unavailable(K eps > tau)");
    }
    rec.outcome = outcome;
    rec.field = Some(sol.field);
    rec.wall_time = elapsed(start);
    Ok(rec)
}

fn example3_rung(eps: f64, cfg: &RunConfig) -> Result<Vec<StudyRecord>> {
    let ct = CutTorus::new(Arc::new(cfg.geometry.build()?))?;
    let jobs: [fn(&CutTorus, f64, &RunConfig) -> Result<StudyRecord>; 3] =
        [pair_at_unstable, pair_at_stable, single_at_stable];
    jobs.par_iter().map(|job| job(&ct, eps, cfg)).collect()
}

pub(crate) fn example3_outcome(cfg: &RunConfig) -> Outcome {
    Outcome::collect(
        cfg.epsilon
            .par_iter()
            .map(|&e| example3_rung(e, cfg))
            .collect(),
    )
}

/// Warped torus: (i) multiplicity-two solution at the unstable slice, (ii) the
/// fate of two interfaces seeded at the stable slice, (iii) the trapped
/// single-interface solution there.
pub fn run_example3(cfg: &RunConfig) -> Result<Vec<StudyRecord>> {
    example3_outcome(cfg).into_result()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn face_slope_is_exact_for_quadratics_vanishing_at_the_face() {
        let h = 0.01;
        for (a, b) in [(1.0, 0.0), (0.3, -2.0)] {
            let u = |x: f64| a * x + b * x * x;
            assert!((face_slope(u(0.5 * h), u(1.5 * h), h) - a).abs() < 1e-10);
        }
    }

    #[test]
    fn sphere_solution_is_even_with_two_parallels() {
        let cfg = RunConfig::for_experiment(super::super::Experiment::Example1);
        let geom = Arc::new(WarpedGeometry::sphere(2).unwrap());
        let s = sphere_solution(geom, 0.05, &cfg).unwrap();
        let (p, q) = s.parallels;
        assert!((p + q - PI).abs() < 1e-6);
        assert!(p < FRAC_PI_2 && q > FRAC_PI_2);
        let v = &s.solution.field.values;
        let n = v.len();
        for i in 0..n / 2 {
            assert!((v[i] - v[n - 1 - i]).abs() < 1e-8);
        }
    }
}
