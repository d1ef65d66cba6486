//! End-to-end pipelines: the worked examples on the sphere, its quotient and
//! the warped torus, the epsilon-ladder convergence study, configuration and
//! persistence.

pub mod config;
mod examples;
pub mod output;
mod study;

use std::sync::Arc;
use std::time::Instant;

pub use config::{Experiment, GeometrySpec, RunConfig};
pub use examples::{run_example1, run_example2, run_example3, sphere_solution, SphereSolution};
pub use output::{read_study, records_to_csv, write_atomic, Manifest, OutputDir, StudyRecord};
pub use study::{barrier_outcome, ladder_fits, run_barriers, run_convergence_study, run_solve};

use crate::discretization::{points_for, BoundaryCondition, Field, Grid};
use crate::error::{LabError, Result};
use crate::geometry::{find_minimal_slices, GeometryKind, Slice, Stability, WarpedGeometry};
use crate::solver::{newton_solve, seed_single, with_noise, Solution};

/// Records produced before an error, kept so a failed run still leaves a
/// consistent partial CSV.
#[derive(Debug)]
pub struct Outcome {
    pub records: Vec<StudyRecord>,
    pub error: Option<LabError>,
}

impl Outcome {
    pub fn into_result(self) -> Result<Vec<StudyRecord>> {
        match self.error {
            Some(e) => Err(e),
            None => Ok(self.records),
        }
    }

    /// Concatenates per-rung results in ladder order, stopping at the first
    /// failure.
    fn collect(parts: Vec<Result<Vec<StudyRecord>>>) -> Self {
        let mut records = Vec::new();
        for p in parts {
            match p {
                Ok(r) => records.extend(r),
                Err(e) => {
                    return Self {
                        records,
                        error: Some(e),
                    }
                }
            }
        }
        Self {
            records,
            error: None,
        }
    }
}

/// Runs the experiment named in the config.
pub fn run(cfg: &RunConfig) -> Outcome {
    if let Err(e) = cfg.validate() {
        return Outcome {
            records: Vec::new(),
            error: Some(e),
        };
    }
    match cfg.experiment {
        Experiment::Solve => study::solve_outcome(cfg),
        Experiment::Barrier => study::barrier_outcome(cfg, None),
        Experiment::Example1 => examples::example1_outcome(cfg),
        Experiment::Example2 => examples::example2_outcome(cfg),
        Experiment::Example3 => examples::example3_outcome(cfg),
        Experiment::Study => study::study_outcome(cfg),
    }
}

pub(crate) fn require_kind(geom: &WarpedGeometry, kinds: &[GeometryKind]) -> Result<()> {
    if kinds.contains(&geom.kind) {
        Ok(())
    } else {
        Err(LabError::InvalidParameter(format!(
            "experiment needs geometry {:?}, got {}",
            kinds,
            geom.describe()
        )))
    }
}

pub(crate) fn require_converged(s: &Solution, what: &str) -> Result<()> {
    if s.converged {
        Ok(())
    } else {
        Err(LabError::Contract(format!(
            "{what}: Newton stalled at residual {:.3e} after {} iterations",
            s.residual_norm, s.iterations
        )))
    }
}

pub(crate) fn noisy(u: Field, cfg: &RunConfig) -> Field {
    if cfg.noise > 0.0 {
        with_noise(&u, cfg.noise, cfg.seed)
    } else {
        u
    }
}

pub(crate) fn elapsed(start: Instant) -> f64 {
    start.elapsed().as_secs_f64()
}

/// A strictly stable slice of a periodic warped product together with the
/// torus cut open at an unstable slice, where `w' = 0` makes the Neumann
/// condition exact for the reflection-symmetric single-interface problem.
#[derive(Debug, Clone)]
pub struct CutTorus {
    pub geometry: Arc<WarpedGeometry>,
    /// Strictly stable slice, positioned inside `[cut, cut + period]`.
    pub base: Slice,
    pub cut: f64,
    pub period: f64,
}

impl CutTorus {
    pub fn new(geometry: Arc<WarpedGeometry>) -> Result<Self> {
        require_kind(&geometry, &[GeometryKind::WarpedTorus])?;
        let period = geometry
            .period()
            .ok_or_else(|| LabError::InvalidParameter("torus without period".into()))?;
        let slices = find_minimal_slices(&geometry)?;
        let stable = slices
            .iter()
            .find(|s| s.stability == Stability::StrictlyStable)
            .ok_or_else(|| LabError::InvalidParameter("no strictly stable slice".into()))?;
        let cut = slices
            .iter()
            .find(|s| s.stability == Stability::Unstable)
            .ok_or_else(|| LabError::InvalidParameter("no unstable slice to cut at".into()))?
            .position;
        let base = geometry.slice_at(cut + (stable.position - cut).rem_euclid(period))?;
        Ok(Self {
            geometry,
            base,
            cut,
            period,
        })
    }

    /// The unstable slice at the cut.
    pub fn unstable(&self) -> Result<Slice> {
        self.geometry.slice_at(self.cut)
    }

    pub fn grid(&self, epsilon: f64, multiplier: usize) -> Result<Arc<Grid>> {
        let n = points_for(self.period, epsilon) * multiplier.max(1);
        let g = Grid::interval(
            self.geometry.clone(),
            self.cut,
            self.cut + self.period,
            n,
            BoundaryCondition::NeumannZero,
            BoundaryCondition::NeumannZero,
        )?;
        Ok(Arc::new(g))
    }

    /// Single-interface solution through the stable slice.
    pub fn solve(&self, grid: Arc<Grid>, epsilon: f64, cfg: &RunConfig) -> Result<Solution> {
        let seed = noisy(seed_single(grid, self.base.position, epsilon), cfg);
        let s = newton_solve(&seed, epsilon, &cfg.solver)?;
        require_converged(&s, "single interface at the stable slice")?;
        Ok(s)
    }
}

/// Richardson extrapolation of a second-order cell-centred solution from a
/// grid and its odd refinement by `r`: `(r^2 u_fine - u_coarse) / (r^2 - 1)`
/// at the shared cell centres.
pub fn richardson(coarse: &Field, fine: &Field) -> Result<Field> {
    let (n, m) = (coarse.len(), fine.len());
    let r = m / n;
    if r < 3 || r % 2 == 0 || r * n != m || coarse.grid().bounds() != fine.grid().bounds() {
        return Err(LabError::GridMismatch);
    }
    let r2 = (r * r) as f64;
    let mid = (r - 1) / 2;
    let values = (0..n)
        .map(|i| (r2 * fine.values[r * i + mid] - coarse.values[i]) / (r2 - 1.0))
        .collect();
    coarse.with_values(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn cut_torus_of_default_geometry() {
        let ct = CutTorus::new(Arc::new(WarpedGeometry::default_torus())).unwrap();
        assert!(ct.cut.abs() < 1e-10);
        assert!((ct.base.position - PI).abs() < 1e-10);
        assert_eq!(ct.unstable().unwrap().stability, Stability::Unstable);
    }

    #[test]
    fn richardson_cancels_quadratic_error() {
        let ct = CutTorus::new(Arc::new(WarpedGeometry::default_torus())).unwrap();
        let g = ct.grid(0.1, 1).unwrap();
        let f = Arc::new(g.refined(3).unwrap());
        let h = g.spacing();
        // exact + C h^2 on each grid
        let exact = |t: f64| t.sin();
        let c = Field::from_fn(g.clone(), |t| exact(t) + 5.0 * h * h);
        let hf = h / 3.0;
        let fi = Field::from_fn(f, |t| exact(t) + 5.0 * hf * hf);
        let r = richardson(&c, &fi).unwrap();
        for (&t, &v) in g.nodes().iter().zip(&r.values) {
            assert!((v - exact(t)).abs() < 1e-13);
        }
        assert!(richardson(&fi, &c).is_err());
    }
}
