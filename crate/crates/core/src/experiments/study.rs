use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use super::{elapsed, richardson, CutTorus, Outcome, RunConfig, StudyRecord};
use crate::analysis::{
    decay_fit, decompose, hausdorff_to_slice, least_squares_slope, morse_index,
    multiplicity_estimate, nodal_set, DEFAULT_BRACKET,
};
use crate::barriers::{assemble_barrier, sliding_trap};
use crate::discretization::Grid;
use crate::error::{LabError, Result};
use crate::geometry::{CmcFamily, GeometryKind, Slice};
use crate::potential::CutoffProfile;
use crate::solver::Solution;

/// Collar `[3 eps, 8 eps]` of the tail fit.
const DECAY_COLLAR: (f64, f64) = (3.0, 8.0);

fn cut_torus(cfg: &RunConfig) -> Result<CutTorus> {
    CutTorus::new(Arc::new(cfg.geometry.build()?))
}

/// Barriers exist only for `K eps <= tau` of the CMC family.
pub(super) fn barriers_available(ct: &CutTorus, eps: f64, cfg: &RunConfig) -> Result<bool> {
    let fam = CmcFamily::new(&ct.geometry, ct.base)?;
    Ok(cfg.barrier.k_factor * eps <= fam.tau)
}

/// Fills the single-interface columns shared by every T0-type row.
pub(super) fn interface_columns(
    rec: &mut StudyRecord,
    sol: &Solution,
    base: &Slice,
    ct: &CutTorus,
) -> Result<()> {
    let eps = sol.epsilon;
    let nodal = nodal_set(&sol.field);
    rec.energy = Some(sol.energy);
    rec.mult_ratio = Some(multiplicity_estimate(sol, base).ratio);
    rec.hausdorff_over_eps = Some(hausdorff_to_slice(&nodal, &ct.geometry, base)? / eps);
    rec.decay_slope = Some(decay_fit(
        &sol.field,
        base.position,
        (DECAY_COLLAR.0 * eps, DECAY_COLLAR.1 * eps),
        eps,
    )?);
    rec.index = Some(morse_index(sol));
    rec.crossings = Some(nodal.count);
    rec.nearest_interface = nodal
        .crossings
        .iter()
        .map(|c| (c - base.position).abs())
        .reduce(f64::min);
    Ok(())
}

fn barrier_record(
    grid: Arc<Grid>,
    base: &Slice,
    h: f64,
    profile: &CutoffProfile,
    cfg: &RunConfig,
    hash: &str,
) -> Result<StudyRecord> {
    let start = Instant::now();
    let b = assemble_barrier(grid, base, h, profile, &cfg.barrier)?;
    let mut rec = StudyRecord::new("barrier", profile.epsilon(), hash);
    rec.mean_curvature = Some(h);
    rec.xi = Some(b.center);
    rec.phi_sup = Some(b.phi_norm);
    rec.orthogonality_residual = Some(b.orthogonality_residual);
    rec.crossings = Some(nodal_set(&b.v).count);
    rec.nearest_interface = b.nodal_position.map(|p| (p - base.position).abs());
    rec.barrier_margin = Some(if b.sign_uniform {
        b.min_abs_residual
    } else {
        -b.min_abs_residual
    });
    rec.outcome = if b.sign_uniform {
        "sign_uniform".into()
    } else {
        format!("sign_violation({} nodes)", b.offending.len())
    };
    rec.field = Some(b.v);
    rec.wall_time = elapsed(start);
    Ok(rec)
}

fn solve_rung(ct: &CutTorus, eps: f64, cfg: &RunConfig) -> Result<Vec<StudyRecord>> {
    let start = Instant::now();
    let grid = ct.grid(eps, cfg.grid_multiplier)?;
    let sol = ct.solve(grid, eps, cfg)?;
    let mut rec = StudyRecord::new("solve", eps, &ct.geometry.hash());
    interface_columns(&mut rec, &sol, &ct.base, ct)?;
    rec.outcome = format!("newton_iterations={}", sol.iterations);
    rec.field = Some(sol.field);
    rec.wall_time = elapsed(start);
    Ok(vec![rec])
}

pub(crate) fn solve_outcome(cfg: &RunConfig) -> Outcome {
    match cfg.geometry.kind {
        GeometryKind::Sphere => return super::examples::example1_outcome(cfg),
        GeometryKind::ProjectiveSphere => return super::examples::example2_outcome(cfg),
        GeometryKind::WarpedTorus => {}
    }
    let ct = match cut_torus(cfg) {
        Ok(ct) => ct,
        Err(e) => {
            return Outcome {
                records: Vec::new(),
                error: Some(e),
            }
        }
    };
    Outcome::collect(
        cfg.epsilon
            .par_iter()
            .map(|&e| solve_rung(&ct, e, cfg))
            .collect(),
    )
}

/// Single-interface solutions through the strictly stable slice of the torus.
pub fn run_solve(cfg: &RunConfig) -> Result<Vec<StudyRecord>> {
    solve_outcome(cfg).into_result()
}

/// Barrier rows, keeping those produced before a failure.
pub fn barrier_outcome(cfg: &RunConfig, curvatures: Option<&[f64]>) -> Outcome {
    let ct = match cut_torus(cfg) {
        Ok(ct) => ct,
        Err(e) => {
            return Outcome {
                records: Vec::new(),
                error: Some(e),
            }
        }
    };
    let hash = ct.geometry.hash();
    let jobs: Vec<(f64, f64)> = cfg
        .epsilon
        .iter()
        .flat_map(|&e| {
            let k = cfg.barrier.k_factor * e;
            let hs = curvatures
                .map(|h| h.to_vec())
                .unwrap_or_else(|| vec![k, -k]);
            hs.into_iter().map(move |h| (e, h))
        })
        .collect();
    let parts = jobs
        .par_iter()
        .map(|&(e, h)| {
            let profile = CutoffProfile::new(e, cfg.delta)?;
            let grid = ct.grid(e, cfg.grid_multiplier)?;
            barrier_record(grid, &ct.base, h, &profile, cfg, &hash).map(|r| vec![r])
        })
        .collect();
    Outcome::collect(parts)
}

/// One barrier row per `(eps, H)`; `H = +-K eps` when `curvatures` is `None`.
pub fn run_barriers(cfg: &RunConfig, curvatures: Option<&[f64]>) -> Result<Vec<StudyRecord>> {
    barrier_outcome(cfg, curvatures).into_result()
}

fn study_rung(ct: &CutTorus, eps: f64, cfg: &RunConfig) -> Result<Vec<StudyRecord>> {
    let start = Instant::now();
    let hash = ct.geometry.hash();
    let profile = CutoffProfile::new(eps, cfg.delta)?;
    let grid = ct.grid(eps, cfg.grid_multiplier)?;
    let coarse = ct.solve(grid.clone(), eps, cfg)?;
    let fine = ct.solve(Arc::new(grid.refined(cfg.refine)?), eps, cfg)?;
    let extrapolated = richardson(&coarse.field, &fine.field)?;
    let dec = decompose(&extrapolated, ct.base.position, &profile, DEFAULT_BRACKET)?;

    let mut rec = StudyRecord::new("study", eps, &hash);
    interface_columns(&mut rec, &coarse, &ct.base, ct)?;
    rec.xi = Some(dec.xi);
    rec.phi_sup = Some(dec.phi_sup);
    rec.orthogonality_residual = Some(dec.orthogonality_residual);
    let r2 = (cfg.refine * cfg.refine) as f64;
    rec.energy_extrapolated = Some((r2 * fine.energy - coarse.energy) / (r2 - 1.0));

    let mut rows = Vec::new();
    if barriers_available(ct, eps, cfg)? {
        let trap = sliding_trap(&coarse, &ct.base, &profile, &cfg.barrier)?;
        rec.trapped = Some(trap.trapped);
        rec.barrier_margin = trap
            .rungs
            .iter()
            .map(|r| r.upper_margin.min(r.lower_margin))
            .reduce(f64::min);
        rec.outcome = match trap.violation {
            Some((h, v)) => format!("trap_violation(H={h:.4}, {v:.3e})"),
            None => format!("trap_radius_over_eps={:.4}", trap.radius_over_eps),
        };
        let k = cfg.barrier.k_factor * eps;
        for h in [k, -k] {
            rows.push(barrier_record(
                grid.clone(),
                &ct.base,
                h,
                &profile,
                cfg,
                &hash,
            )?);
        }
    } else {
        rec.outcome = "barriers_unavailable(K eps > tau)".into();
    }
    rec.field = Some(coarse.field);
    rec.wall_time = elapsed(start);
    rows.insert(0, rec);
    Ok(rows)
}

pub(crate) fn study_outcome(cfg: &RunConfig) -> Outcome {
    if cfg.epsilon.len() < 4 {
        return Outcome {
            records: Vec::new(),
            error: Some(LabError::Config(format!(
                "convergence study needs >= 4 epsilon values, got {}",
                cfg.epsilon.len()
            ))),
        };
    }
    let ct = match cut_torus(cfg) {
        Ok(ct) => ct,
        Err(e) => {
            return Outcome {
                records: Vec::new(),
                error: Some(e),
            }
        }
    };
    Outcome::collect(
        cfg.epsilon
            .par_iter()
            .map(|&e| study_rung(&ct, e, cfg))
            .collect(),
    )
}

/// Per-epsilon solve at the stable slice, decomposition on the Richardson
/// extrapolate, tail fit, index, multiplicity, barriers at `+-K eps` and the
/// sliding trap.
pub fn run_convergence_study(cfg: &RunConfig) -> Result<Vec<StudyRecord>> {
    study_outcome(cfg).into_result()
}

/// Log-log slopes of the study rows, monotonicity of the energy defect
/// `|E - e_1 |Gamma||`, and of the sphere parallels' distance to the equator.
pub fn ladder_fits(records: &[StudyRecord]) -> BTreeMap<String, f64> {
    let rows: Vec<&StudyRecord> = records.iter().filter(|r| r.experiment == "study").collect();
    let mut out = BTreeMap::new();
    let slope = |f: &dyn Fn(&StudyRecord) -> Option<f64>| -> Option<f64> {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter_map(|r| f(r).filter(|v| *v > 0.0).map(|v| (r.epsilon.ln(), v.ln())))
            .collect();
        (pts.len() >= 2).then(|| {
            let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            least_squares_slope(&xs, &ys)
        })
    };
    if let Some(s) = slope(&|r| r.phi_sup) {
        out.insert("phi_sup_slope".into(), s);
    }
    // distances at roundoff level (exactly symmetric nodal sets) carry no slope
    let resolved = |r: &StudyRecord| {
        r.hausdorff_over_eps
            .filter(|&h| h > 1e-9)
            .map(|h| h * r.epsilon)
    };
    if rows.iter().all(|r| resolved(r).is_some()) {
        if let Some(s) = slope(&resolved) {
            out.insert("hausdorff_slope".into(), s);
        }
    }
    // |E*/(e_1 |Gamma|) - 1| with e_1 |Gamma| = energy / mult_ratio
    let defect = |r: &StudyRecord| -> Option<f64> {
        let (e, m, x) = (r.energy?, r.mult_ratio?, r.energy_extrapolated?);
        Some((x * m / e - 1.0).abs())
    };
    if let Some(s) = slope(&defect) {
        out.insert("energy_defect_slope".into(), s);
    }
    let defects: Vec<f64> = rows.iter().filter_map(|r| defect(r)).collect();
    if defects.len() >= 2 {
        let monotone = defects.windows(2).all(|w| w[1] < w[0]);
        out.insert(
            "energy_defect_monotone".into(),
            if monotone { 1.0 } else { 0.0 },
        );
    }
    let mut sphere: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.experiment == "example1")
        .filter_map(|r| r.nearest_interface.map(|d| (r.epsilon, d)))
        .collect();
    if sphere.len() >= 2 {
        sphere.sort_by(|a, b| b.0.total_cmp(&a.0));
        let monotone = sphere.windows(2).all(|w| w[1].1 < w[0].1);
        out.insert(
            "equator_distance_monotone".into(),
            if monotone { 1.0 } else { 0.0 },
        );
    }
    out
}
