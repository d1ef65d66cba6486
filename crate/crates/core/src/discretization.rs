//! Cell-centred grids on an interval of the radial coordinate, discrete fields,
//! and the weighted Laplacian in flux form.
//!
//! Cell `i` has centre `t_i = a + (i + 1/2) h`; face `j` sits at `a + j h`.
//! The interior flux across face `j` is `w(t_j)^{n-1} (u_j - u_{j-1}) / h`.
//! Boundary faces carry zero flux (Neumann, pole) or the one-sided flux to a
//! zero ghost value half a cell away (Dirichlet).  With lumped mass
//! `M_i = w(t_i)^{n-1} h` and stiffness `G` we have `M (Delta_w u) = -G u`,
//! so the operator is self-adjoint in the weighted inner product.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::{GeometryKind, WarpedGeometry};
use crate::linalg::SymTridiagonal;
use crate::potential::QuarticWell;

/// Points per epsilon required of every grid an operation runs on.
pub const POINTS_PER_EPSILON: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCondition {
    Periodic,
    DirichletZero,
    NeumannZero,
    PoleRegular,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    geometry: Arc<WarpedGeometry>,
    start: f64,
    end: f64,
    h: f64,
    left: BoundaryCondition,
    right: BoundaryCondition,
    nodes: Vec<f64>,
    cell_weight: Vec<f64>,
    face_weight: Vec<f64>,
}

impl Grid {
    /// Grid over the whole domain of the geometry with its natural boundary
    /// conditions (periodic torus, regular poles, antipodal reflection).
    pub fn full(geometry: Arc<WarpedGeometry>, points: usize) -> Result<Self> {
        let (a, b) = geometry.domain();
        let (left, right) = match geometry.kind {
            GeometryKind::WarpedTorus => (BoundaryCondition::Periodic, BoundaryCondition::Periodic),
            GeometryKind::Sphere => (
                BoundaryCondition::PoleRegular,
                BoundaryCondition::PoleRegular,
            ),
            // even reflection through theta = pi/2 on the quotient
            GeometryKind::ProjectiveSphere => (
                BoundaryCondition::PoleRegular,
                BoundaryCondition::NeumannZero,
            ),
        };
        Self::interval(geometry, a, b, points, left, right)
    }

    /// Smallest power-of-two grid over the full domain meeting `h <= eps/8`.
    pub fn for_epsilon(geometry: Arc<WarpedGeometry>, epsilon: f64) -> Result<Self> {
        let (a, b) = geometry.domain();
        let points = points_for(b - a, epsilon);
        Self::full(geometry, points)
    }

    pub fn interval(
        geometry: Arc<WarpedGeometry>,
        start: f64,
        end: f64,
        points: usize,
        left: BoundaryCondition,
        right: BoundaryCondition,
    ) -> Result<Self> {
        if points < 4 || !(end > start) {
            return Err(LabError::InvalidParameter(format!(
                "grid needs >= 4 points on a nonempty interval, got {points} on [{start}, {end}]"
            )));
        }
        let mismatch = |bc: BoundaryCondition| LabError::BoundaryMismatch {
            bc: format!("{bc:?}"),
            geometry: geometry.describe(),
        };
        let periodic = left == BoundaryCondition::Periodic || right == BoundaryCondition::Periodic;
        if periodic {
            let whole = geometry
                .period()
                .map(|p| left == right && (end - start - p).abs() < 1e-12 * p.max(1.0))
                .unwrap_or(false);
            if !whole {
                return Err(mismatch(BoundaryCondition::Periodic));
            }
        }
        for (bc, at) in [(left, start), (right, end)] {
            if bc == BoundaryCondition::PoleRegular && geometry.w(at).abs() > 1e-12 {
                return Err(mismatch(bc));
            }
        }
        let h = (end - start) / points as f64;
        let nodes: Vec<f64> = (0..points).map(|i| start + (i as f64 + 0.5) * h).collect();
        let cell_weight = nodes.iter().map(|&t| geometry.weight(t)).collect();
        let face_weight = (0..=points)
            .map(|j| geometry.weight(start + j as f64 * h))
            .collect();
        Ok(Self {
            geometry,
            start,
            end,
            h,
            left,
            right,
            nodes,
            cell_weight,
            face_weight,
        })
    }

    /// Same interval and boundary conditions with `factor` times as many cells.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::interval(
            self.geometry.clone(),
            self.start,
            self.end,
            self.len() * factor,
            self.left,
            self.right,
        )
    }

    pub fn geometry(&self) -> &WarpedGeometry {
        &self.geometry
    }

    pub fn geometry_arc(&self) -> Arc<WarpedGeometry> {
        self.geometry.clone()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.start, self.end)
    }

    pub fn boundary(&self) -> (BoundaryCondition, BoundaryCondition) {
        (self.left, self.right)
    }

    pub fn is_periodic(&self) -> bool {
        self.left == BoundaryCondition::Periodic
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// `w(t_i)^{n-1}` at cell centres.
    pub fn cell_weights(&self) -> &[f64] {
        &self.cell_weight
    }

    /// Lumped mass `w(t_i)^{n-1} h` (without the fiber volume).
    pub fn mass(&self) -> Vec<f64> {
        self.cell_weight.iter().map(|w| w * self.h).collect()
    }

    pub fn check_resolution(&self, epsilon: f64) -> Result<()> {
        let limit = epsilon / POINTS_PER_EPSILON;
        if self.h > limit * (1.0 + 1e-12) {
            return Err(LabError::Unresolved {
                h: self.h,
                epsilon,
                limit,
            });
        }
        Ok(())
    }

    /// The positive semi-definite stiffness matrix `G` of the flux form.
    pub fn stiffness(&self) -> SymTridiagonal {
        self.stiffness_from(&self.face_weight)
    }

    /// Stiffness of the unweighted second difference (`w = 1`) with the same
    /// boundary conditions; pairs with mass `h`.
    pub fn flat_stiffness(&self) -> SymTridiagonal {
        self.stiffness_from(&vec![1.0; self.len() + 1])
    }

    fn stiffness_from(&self, a: &[f64]) -> SymTridiagonal {
        let n = self.len();
        let h = self.h;
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n - 1];
        for i in 0..n - 1 {
            let c = a[i + 1] / h;
            diag[i] += c;
            diag[i + 1] += c;
            off[i] = -c;
        }
        let mut corner = None;
        if self.is_periodic() {
            let c = a[0] / h;
            diag[0] += c;
            diag[n - 1] += c;
            corner = Some(-c);
        } else {
            if self.left == BoundaryCondition::DirichletZero {
                diag[0] += 2.0 * a[0] / h;
            }
            if self.right == BoundaryCondition::DirichletZero {
                diag[n - 1] += 2.0 * a[n] / h;
            }
        }
        SymTridiagonal::new(diag, off, corner)
    }

    /// `G u` assembled face by face, so constants are annihilated exactly.
    pub fn apply_stiffness(&self, u: &[f64]) -> Vec<f64> {
        self.apply_from(&self.face_weight, u)
    }

    pub fn apply_flat_stiffness(&self, u: &[f64]) -> Vec<f64> {
        self.apply_from(&vec![1.0; self.len() + 1], u)
    }

    fn apply_from(&self, a: &[f64], u: &[f64]) -> Vec<f64> {
        let n = self.len();
        let h = self.h;
        let mut out = vec![0.0; n];
        for j in 1..n {
            let flux = a[j] * (u[j] - u[j - 1]) / h;
            out[j - 1] -= flux;
            out[j] += flux;
        }
        if self.is_periodic() {
            let flux = a[0] * (u[0] - u[n - 1]) / h;
            out[n - 1] -= flux;
            out[0] += flux;
        } else {
            if self.left == BoundaryCondition::DirichletZero {
                out[0] += 2.0 * a[0] * u[0] / h;
            }
            if self.right == BoundaryCondition::DirichletZero {
                out[n - 1] += 2.0 * a[n] * u[n - 1] / h;
            }
        }
        out
    }

    /// `sum_faces a_j (jump_j)^2 / h`, i.e. `u^T G u`.
    pub fn dirichlet_form(&self, u: &[f64]) -> f64 {
        let n = self.len();
        let h = self.h;
        let a = &self.face_weight;
        let mut s = 0.0;
        for j in 1..n {
            let d = u[j] - u[j - 1];
            s += a[j] * d * d / h;
        }
        if self.is_periodic() {
            let d = u[0] - u[n - 1];
            s += a[0] * d * d / h;
        } else {
            if self.left == BoundaryCondition::DirichletZero {
                s += 2.0 * a[0] * u[0] * u[0] / h;
            }
            if self.right == BoundaryCondition::DirichletZero {
                s += 2.0 * a[n] * u[n - 1] * u[n - 1] / h;
            }
        }
        s
    }

    /// `t - c`, wrapped into `(-P/2, P/2]` on periodic grids.
    pub fn offset(&self, t: f64, c: f64) -> f64 {
        let d = t - c;
        if !self.is_periodic() {
            return d;
        }
        let p = self.end - self.start;
        let r = d.rem_euclid(p);
        if r > 0.5 * p {
            r - p
        } else {
            r
        }
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        std::ptr::eq(self, other) || self == other
    }
}

/// Smallest power of two `N` with `span / N <= eps / 8`.
pub fn points_for(span: f64, epsilon: f64) -> usize {
    let need = (span * POINTS_PER_EPSILON / epsilon).ceil() as usize;
    need.max(4).next_power_of_two()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Arc<Grid>,
    pub values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(LabError::GridMismatch);
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&t| f(t)).collect();
        Self { grid, values }
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Self {
        let values = vec![c; grid.len()];
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn grid_arc(&self) -> Arc<Grid> {
        self.grid.clone()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.grid.clone(), values)
    }

    fn zip(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        if !(Arc::ptr_eq(&self.grid, &other.grid) || self.grid.same_as(&other.grid)) {
            return Err(LabError::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Field {
            grid: self.grid.clone(),
            values,
        })
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Field {
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Weighted inner product `sum u_i v_i w_i^{n-1} h`.
    pub fn inner(&self, other: &Field) -> Result<f64> {
        let p = self.zip(other, |a, b| a * b)?;
        Ok(p.values
            .iter()
            .zip(self.grid.cell_weights())
            .map(|(v, w)| v * w)
            .sum::<f64>()
            * self.grid.spacing())
    }

    /// `t, value` rows.
    pub fn to_csv(&self) -> String {
        fields_to_csv(&[("value", self)]).expect("single field")
    }
}

/// Several fields on one grid as CSV with a leading `t` column.
pub fn fields_to_csv(columns: &[(&str, &Field)]) -> Result<String> {
    let Some((_, first)) = columns.first() else {
        return Ok(String::from("t\n"));
    };
    if columns.iter().any(|(_, f)| !f.grid.same_as(&first.grid)) {
        return Err(LabError::GridMismatch);
    }
    let mut out = String::from("t");
    for (name, _) in columns {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (i, t) in first.grid.nodes().iter().enumerate() {
        write!(out, "{t:.17e}").expect("string write");
        for (_, f) in columns {
            write!(out, ",{:.17e}", f.values[i]).expect("string write");
        }
        out.push('\n');
    }
    Ok(out)
}

/// `eps^2 (1/w^{n-1}) (w^{n-1} u')'` in flux form.
pub fn weighted_laplacian(u: &Field, epsilon: f64) -> Result<Field> {
    let grid = u.grid();
    grid.check_resolution(epsilon)?;
    Ok(weighted_laplacian_unchecked(u, epsilon))
}

pub(crate) fn weighted_laplacian_unchecked(u: &Field, epsilon: f64) -> Field {
    let grid = u.grid();
    let g = grid.apply_stiffness(&u.values);
    let e2 = epsilon * epsilon;
    let values = g
        .iter()
        .zip(grid.mass())
        .map(|(gi, mi)| -e2 * gi / mi)
        .collect();
    Field {
        grid: u.grid.clone(),
        values,
    }
}

/// `E(u) = int eps |u'|^2 / 2 + W(u) / eps` over the manifold.
pub fn energy(u: &Field, epsilon: f64) -> Result<f64> {
    let grid = u.grid();
    grid.check_resolution(epsilon)?;
    let gradient = 0.5 * epsilon * grid.dirichlet_form(&u.values);
    let potential: f64 = u
        .values
        .iter()
        .zip(grid.cell_weights())
        .map(|(&v, w)| QuarticWell::w(v) * w)
        .sum::<f64>()
        * grid.spacing()
        / epsilon;
    Ok(grid.geometry().fiber_volume * (gradient + potential))
}

/// `sum f_i w_i^{n-1} h * fiber_volume` (midpoint rule on cell centres).
pub fn quadrature(f: &Field) -> f64 {
    let grid = f.grid();
    let s: f64 = f
        .values
        .iter()
        .zip(grid.cell_weights())
        .map(|(v, w)| v * w)
        .sum();
    s * grid.spacing() * grid.geometry().fiber_volume
}

/// Plain `sum f_i h` in the radial coordinate, no volume weight.
pub fn line_integral(f: &Field) -> f64 {
    f.values.iter().sum::<f64>() * f.grid().spacing()
}
