//! Banded linear algebra for the one-dimensional discretizations: pivoted
//! tridiagonal solves, cyclic (periodic) systems by bordering, Sturm counts
//! and bisection eigenvalues, and inertia of symmetric (cyclic) tridiagonals.

use crate::error::{LabError, Result};

/// Symmetric tridiagonal matrix, optionally closed into a cycle by equal
/// corner entries `A[0][n-1] = A[n-1][0] = corner`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
    pub corner: Option<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>, corner: Option<f64>) -> Self {
        assert_eq!(off.len() + 1, diag.len(), "off-diagonal length");
        Self { diag, off, corner }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn is_cyclic(&self) -> bool {
        self.corner.is_some()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut y: Vec<f64> = (0..n).map(|i| self.diag[i] * x[i]).collect();
        for i in 0..n.saturating_sub(1) {
            y[i] += self.off[i] * x[i + 1];
            y[i + 1] += self.off[i] * x[i];
        }
        if let Some(c) = self.corner {
            y[0] += c * x[n - 1];
            y[n - 1] += c * x[0];
        }
        y
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        if rhs.len() != n {
            return Err(LabError::LinearSolve("rhs length mismatch".into()));
        }
        match self.corner {
            None => solve_tridiagonal(&self.off, &self.diag, &self.off, rhs),
            Some(c) => {
                if n < 3 {
                    return Err(LabError::LinearSolve("cyclic system needs n >= 3".into()));
                }
                let m = n - 1;
                // border the last unknown: A11 y + a12 z = b1, a21 y + a22 z = b2
                let inner_diag = &self.diag[..m];
                let inner_off = &self.off[..m - 1];
                let p = solve_tridiagonal(inner_off, inner_diag, inner_off, &rhs[..m])?;
                let mut a12 = vec![0.0; m];
                a12[0] += c;
                a12[m - 1] += self.off[m - 1];
                let q = solve_tridiagonal(inner_off, inner_diag, inner_off, &a12)?;
                let a21p = a12[0] * p[0] + if m > 1 { a12[m - 1] * p[m - 1] } else { 0.0 };
                let a21q = a12[0] * q[0] + if m > 1 { a12[m - 1] * q[m - 1] } else { 0.0 };
                let schur = self.diag[m] - a21q;
                if schur == 0.0 || !schur.is_finite() {
                    return Err(LabError::LinearSolve("zero Schur complement".into()));
                }
                let z = (rhs[m] - a21p) / schur;
                let mut x: Vec<f64> = p.iter().zip(&q).map(|(pi, qi)| pi - qi * z).collect();
                x.push(z);
                Ok(x)
            }
        }
    }

    /// Number of negative eigenvalues (Sylvester inertia).
    pub fn negative_count(&self) -> usize {
        self.count_below(0.0)
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        match self.corner {
            None => sturm_count(&self.diag, &self.off, x),
            Some(c) => {
                // Haynsworth: In(A - x) = In(A11 - x) + In(Schur complement)
                let n = self.len();
                let m = n - 1;
                let inner_count = sturm_count(&self.diag[..m], &self.off[..m - 1], x);
                let shifted: Vec<f64> = self.diag[..m].iter().map(|d| d - x).collect();
                let mut a12 = vec![0.0; m];
                a12[0] += c;
                a12[m - 1] += self.off[m - 1];
                match solve_tridiagonal(&self.off[..m - 1], &shifted, &self.off[..m - 1], &a12) {
                    Ok(q) => {
                        let a21q: f64 = a12.iter().zip(&q).map(|(a, b)| a * b).sum();
                        let schur = self.diag[m] - x - a21q;
                        inner_count + usize::from(schur < 0.0)
                    }
                    Err(_) => {
                        // x is an eigenvalue of A11; nudge
                        let nudged = x - 1e-13 * (1.0 + x.abs());
                        self.count_below(nudged)
                    }
                }
            }
        }
    }

    /// Gershgorin interval containing the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.off[i - 1].abs();
            }
            if i + 1 < n {
                r += self.off[i].abs();
            }
            if let Some(c) = self.corner {
                if i == 0 || i == n - 1 {
                    r += c.abs();
                }
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// The `k`-th smallest eigenvalue (0-based) by bisection on the count.
    pub fn eigenvalue(&self, k: usize, tol: f64) -> Result<f64> {
        let n = self.len();
        if k >= n {
            return Err(LabError::Eigen(format!(
                "index {k} out of range for n = {n}"
            )));
        }
        let (mut lo, mut hi) = self.gershgorin();
        lo -= 1e-12 * (1.0 + lo.abs());
        hi += 1e-12 * (1.0 + hi.abs());
        for _ in 0..400 {
            if hi - lo <= tol {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        if !(hi - lo <= tol.max(1e-15 * (1.0 + lo.abs()) * 4.0)) {
            return Err(LabError::Eigen("bisection did not reach tolerance".into()));
        }
        Ok(0.5 * (lo + hi))
    }

    /// The eigenvalue closest to zero.
    pub fn nearest_to_zero(&self, tol: f64) -> Result<f64> {
        let k = self.negative_count();
        let mut best: Option<f64> = None;
        if k > 0 {
            best = Some(self.eigenvalue(k - 1, tol)?);
        }
        if k < self.len() {
            let up = self.eigenvalue(k, tol)?;
            best = Some(match best {
                Some(b) if b.abs() <= up.abs() => b,
                _ => up,
            });
        }
        best.ok_or_else(|| LabError::Eigen("empty matrix".into()))
    }
}

/// Sturm sequence count of eigenvalues of a symmetric tridiagonal below `x`.
pub fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..diag.len() {
        let b2 = if i == 0 { 0.0 } else { off[i - 1] * off[i - 1] };
        q = diag[i] - x - if i == 0 { 0.0 } else { b2 / q };
        if q == 0.0 {
            q = -1e-300;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Solve a general tridiagonal system with partial pivoting.
pub fn solve_tridiagonal(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &[f64],
) -> Result<Vec<f64>> {
    let n = diag.len();
    if rhs.len() != n || (n > 0 && (lower.len() + 1 != n || upper.len() + 1 != n)) {
        return Err(LabError::LinearSolve("dimension mismatch".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut d = diag.to_vec();
    let mut du = upper.to_vec();
    let mut dl = lower.to_vec();
    let mut du2 = vec![0.0; n.saturating_sub(2)];
    let mut b = rhs.to_vec();
    let singular = |i: usize| LabError::LinearSolve(format!("zero pivot at row {i}"));
    for i in 0..n.saturating_sub(1) {
        if d[i].abs() >= dl[i].abs() {
            if d[i] == 0.0 {
                return Err(singular(i));
            }
            let fact = dl[i] / d[i];
            d[i + 1] -= fact * du[i];
            b[i + 1] -= fact * b[i];
        } else {
            let fact = d[i] / dl[i];
            d[i] = dl[i];
            let temp = d[i + 1];
            d[i + 1] = du[i] - fact * temp;
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] = -fact * du2[i];
            }
            du[i] = temp;
            let tb = b[i];
            b[i] = b[i + 1];
            b[i + 1] = tb - fact * b[i + 1];
        }
        dl[i] = 0.0;
    }
    if d[n - 1] == 0.0 {
        return Err(singular(n - 1));
    }
    b[n - 1] /= d[n - 1];
    if n > 1 {
        b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
    }
    for i in (0..n.saturating_sub(2)).rev() {
        b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i];
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(LabError::LinearSolve("non-finite solution".into()));
    }
    Ok(b)
}
