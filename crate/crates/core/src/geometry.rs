//! Rotationally symmetric closed manifolds reduced to a warped line
//! `dt^2 + w(t)^2 g_fiber`, and their slices `{t = c}`.
//!
//! The mean curvature of the slice `{t}` with respect to `d/dt` is fixed by the
//! drift in `Delta_g = Delta_t + d_t^2 - H_t d_t`, which gives
//! `H(t) = -(n - 1) w'(t) / w(t)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "warp", rename_all = "snake_case")]
pub enum Warp {
    /// `w(t) = 1 + a cos(2 pi t / period)`.
    Cosine { amplitude: f64, period: f64 },
    /// `w(t) = sin t` on `[0, pi]`.
    Sine,
    /// Periodic table sampled on a uniform grid, linearly interpolated.
    Tabulated { period: f64, values: Vec<f64> },
}

impl Warp {
    fn tabulated_index(period: f64, values: &[f64], t: f64) -> (usize, f64, f64) {
        let n = values.len();
        let h = period / n as f64;
        let x = t.rem_euclid(period) / h;
        let i = (x.floor() as usize).min(n - 1);
        (i, x - i as f64, h)
    }

    pub fn w(&self, t: f64) -> f64 {
        match self {
            Warp::Cosine { amplitude, period } => 1.0 + amplitude * (2.0 * PI * t / period).cos(),
            Warp::Sine => t.sin(),
            Warp::Tabulated { period, values } => {
                let (i, frac, _) = Self::tabulated_index(*period, values, t);
                let j = (i + 1) % values.len();
                values[i] * (1.0 - frac) + values[j] * frac
            }
        }
    }

    pub fn dw(&self, t: f64) -> f64 {
        match self {
            Warp::Cosine { amplitude, period } => {
                let k = 2.0 * PI / period;
                -amplitude * k * (k * t).sin()
            }
            Warp::Sine => t.cos(),
            Warp::Tabulated { period, values } => {
                let (i, _, h) = Self::tabulated_index(*period, values, t);
                let j = (i + 1) % values.len();
                (values[j] - values[i]) / h
            }
        }
    }

    pub fn d2w(&self, t: f64) -> f64 {
        match self {
            Warp::Cosine { amplitude, period } => {
                let k = 2.0 * PI / period;
                -amplitude * k * k * (k * t).cos()
            }
            Warp::Sine => -t.sin(),
            Warp::Tabulated { period, values } => {
                // second difference at the nearest table node
                let n = values.len();
                let h = period / n as f64;
                let i = ((t.rem_euclid(*period) / h).round() as usize) % n;
                let prev = values[(i + n - 1) % n];
                let next = values[(i + 1) % n];
                (next - 2.0 * values[i] + prev) / (h * h)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    WarpedTorus,
    Sphere,
    ProjectiveSphere,
}

impl std::fmt::Display for GeometryKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            GeometryKind::WarpedTorus => "warped_torus",
            GeometryKind::Sphere => "sphere",
            GeometryKind::ProjectiveSphere => "projective_sphere",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    StrictlyStable,
    Unstable,
    Degenerate,
}

/// A slice `{t = position}` with its area and second-variation data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slice {
    pub position: f64,
    pub area: f64,
    pub mean_curvature: f64,
    pub stability: Stability,
    /// Lowest eigenvalue of `-J` in the symmetric class: `-H'(position)`.
    pub jacobi_eigenvalue: f64,
}

pub const DEGENERACY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarpedGeometry {
    pub kind: GeometryKind,
    pub dim: usize,
    pub warp: Warp,
    pub fiber_volume: f64,
}

impl WarpedGeometry {
    pub fn warped_torus(amplitude: f64, dim: usize, period: f64) -> Result<Self> {
        if amplitude.abs() >= 1.0 {
            return Err(LabError::InvalidParameter(format!(
                "warp 1 + a cos must stay positive, got a = {amplitude}"
            )));
        }
        Self::check_dim(dim)?;
        Ok(Self {
            kind: GeometryKind::WarpedTorus,
            dim,
            warp: Warp::Cosine { amplitude, period },
            fiber_volume: 2.0 * PI,
        })
    }

    /// The desk default: `w = 1 + 0.3 cos t`, `n = 2`, period `2 pi`.
    pub fn default_torus() -> Self {
        Self::warped_torus(0.3, 2, 2.0 * PI).expect("valid default")
    }

    pub fn flat_torus(dim: usize, period: f64) -> Result<Self> {
        Self::warped_torus(0.0, dim, period)
    }

    pub fn tabulated_torus(values: Vec<f64>, dim: usize, period: f64) -> Result<Self> {
        Self::check_dim(dim)?;
        if values.len() < 3 || values.iter().any(|&v| !(v > 0.0)) {
            return Err(LabError::InvalidParameter(
                "tabulated warp needs >= 3 positive samples".into(),
            ));
        }
        Ok(Self {
            kind: GeometryKind::WarpedTorus,
            dim,
            warp: Warp::Tabulated { period, values },
            fiber_volume: 2.0 * PI,
        })
    }

    pub fn sphere(dim: usize) -> Result<Self> {
        Self::check_dim(dim)?;
        Ok(Self {
            kind: GeometryKind::Sphere,
            dim,
            warp: Warp::Sine,
            fiber_volume: unit_sphere_volume(dim - 1),
        })
    }

    pub fn projective_sphere(dim: usize) -> Result<Self> {
        Ok(Self {
            kind: GeometryKind::ProjectiveSphere,
            ..Self::sphere(dim)?
        })
    }

    fn check_dim(dim: usize) -> Result<()> {
        if dim < 2 {
            return Err(LabError::InvalidParameter(format!(
                "dimension must be >= 2, got {dim}"
            )));
        }
        Ok(())
    }

    /// Coordinate range `[start, end]`; periodic for the torus.
    pub fn domain(&self) -> (f64, f64) {
        match (&self.kind, &self.warp) {
            (GeometryKind::WarpedTorus, Warp::Cosine { period, .. })
            | (GeometryKind::WarpedTorus, Warp::Tabulated { period, .. }) => (0.0, *period),
            (GeometryKind::Sphere, _) => (0.0, PI),
            (GeometryKind::ProjectiveSphere, _) => (0.0, 0.5 * PI),
            (GeometryKind::WarpedTorus, Warp::Sine) => (0.0, 2.0 * PI),
        }
    }

    pub fn period(&self) -> Option<f64> {
        match self.kind {
            GeometryKind::WarpedTorus => Some(self.domain().1),
            _ => None,
        }
    }

    pub fn w(&self, t: f64) -> f64 {
        self.warp.w(t)
    }

    /// Volume density `w^{n-1}` (without the fiber volume).
    pub fn weight(&self, t: f64) -> f64 {
        self.warp.w(t).max(0.0).powi(self.dim as i32 - 1)
    }

    pub fn mean_curvature(&self, t: f64) -> Result<f64> {
        let w = self.warp.w(t);
        if !(w > 1e-12) {
            return Err(LabError::CoordinateSingularity(t));
        }
        Ok(-((self.dim - 1) as f64) * self.warp.dw(t) / w)
    }

    /// `dH/dt`.
    pub fn mean_curvature_derivative(&self, t: f64) -> Result<f64> {
        let w = self.warp.w(t);
        if !(w > 1e-12) {
            return Err(LabError::CoordinateSingularity(t));
        }
        let dw = self.warp.dw(t);
        Ok(-((self.dim - 1) as f64) * (self.warp.d2w(t) * w - dw * dw) / (w * w))
    }

    pub fn slice_area(&self, c: f64) -> f64 {
        let full = self.weight(c) * self.fiber_volume;
        match self.kind {
            GeometryKind::ProjectiveSphere => 0.5 * full,
            _ => full,
        }
    }

    pub fn slice_at(&self, c: f64) -> Result<Slice> {
        let h = self.mean_curvature(c)?;
        let jac = -self.mean_curvature_derivative(c)?;
        let stability = if jac.abs() < DEGENERACY_TOL {
            Stability::Degenerate
        } else if jac > 0.0 {
            Stability::StrictlyStable
        } else {
            Stability::Unstable
        };
        Ok(Slice {
            position: c,
            area: self.slice_area(c),
            mean_curvature: h,
            stability,
            jacobi_eigenvalue: jac,
        })
    }

    /// Stable digest of the geometry description.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("geometry serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn describe(&self) -> String {
        match &self.warp {
            Warp::Cosine { amplitude, period } => {
                format!(
                    "{} a={} n={} P={:.6}",
                    self.kind, amplitude, self.dim, period
                )
            }
            Warp::Sine => format!("{} n={}", self.kind, self.dim),
            Warp::Tabulated { period, values } => {
                format!(
                    "{} tabulated({}) n={} P={:.6}",
                    self.kind,
                    values.len(),
                    self.dim,
                    period
                )
            }
        }
    }
}

/// Volume of the unit `k`-sphere.
pub fn unit_sphere_volume(k: usize) -> f64 {
    // |S^k| = 2 pi^{(k+1)/2} / Gamma((k+1)/2); recurrence |S^k| = 2pi/(k-1) |S^{k-2}|
    match k {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (k as f64 - 1.0) * unit_sphere_volume(k - 2),
    }
}

pub fn mean_curvature(geom: &WarpedGeometry, t: f64) -> Result<f64> {
    geom.mean_curvature(t)
}

fn refine_root<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 || (b - a) < 1e-15 * (1.0 + m.abs()) {
            return m;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// All critical points of the warp on one period (or the open interval),
/// classified by the Jacobi eigenvalue `(n-1) w''(c) / w(c)`.
///
/// A warp with `w' = 0` identically has every slice minimal; a single
/// degenerate representative at the domain start is returned.
pub fn find_minimal_slices(geom: &WarpedGeometry) -> Result<Vec<Slice>> {
    let (a, b) = geom.domain();
    const SAMPLES: usize = 4096;
    let dw = |t: f64| geom.warp.dw(t);
    let h = (b - a) / SAMPLES as f64;
    let scale = (0..SAMPLES)
        .map(|i| dw(a + i as f64 * h).abs())
        .fold(0.0, f64::max);
    if scale < 1e-14 {
        return Ok(vec![geom.slice_at(a)?]);
    }
    let mut roots = Vec::new();
    let periodic = geom.period().is_some();
    let (start, count) = if periodic {
        (a, SAMPLES)
    } else {
        (a + 0.5 * h, SAMPLES - 1)
    };
    for i in 0..count {
        let t0 = start + i as f64 * h;
        let t1 = t0 + h;
        let f0 = dw(t0);
        let f1 = dw(t1);
        if f0 == 0.0 {
            roots.push(t0);
        } else if f0 * f1 < 0.0 {
            roots.push(refine_root(dw, t0, t1));
        }
    }
    if geom.kind == GeometryKind::ProjectiveSphere {
        // the slice at the antipodal boundary pi/2 is the image of the equator
        roots.push(0.5 * PI);
    }
    roots
        .into_iter()
        .map(|c| {
            let c = if let Some(p) = geom.period() {
                c.rem_euclid(p)
            } else {
                c
            };
            let c = if c.abs() < 1e-14 { 0.0 } else { c };
            geom.slice_at(c)
        })
        .collect()
}

/// The constant mean curvature family about a non-degenerate minimal slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CmcFamily {
    pub base: Slice,
    /// Positions between which `H` is strictly monotone.
    pub bracket: (f64, f64),
    /// Largest `|H|` reachable on both sides inside the bracket.
    pub tau: f64,
}

impl CmcFamily {
    pub fn new(geom: &WarpedGeometry, base: Slice) -> Result<Self> {
        if base.stability == Stability::Degenerate {
            return Err(LabError::InvalidParameter(
                "base slice is degenerate".into(),
            ));
        }
        let c = base.position;
        let d0 = geom.mean_curvature_derivative(c)?;
        let (lo_dom, hi_dom) = geom.domain();
        let span = hi_dom - lo_dom;
        let step = span / 4096.0;
        let walk = |dir: f64| -> f64 {
            let mut t = c;
            loop {
                let next = t + dir * step;
                if geom.period().is_none() && (next <= lo_dom + step || next >= hi_dom - step) {
                    return t;
                }
                if (next - c).abs() >= 0.5 * span {
                    return t;
                }
                match geom.mean_curvature_derivative(next) {
                    Ok(d) if d * d0 > 0.0 => t = next,
                    _ => return t,
                }
            }
        };
        let lo = walk(-1.0);
        let hi = walk(1.0);
        let h_lo = geom.mean_curvature(lo)?;
        let h_hi = geom.mean_curvature(hi)?;
        let tau = 0.95 * h_lo.abs().min(h_hi.abs());
        Ok(Self {
            base,
            bracket: (lo, hi),
            tau,
        })
    }

    pub fn position(&self, geom: &WarpedGeometry, h: f64) -> Result<f64> {
        if h == 0.0 {
            return Ok(self.base.position);
        }
        let (lo, hi) = self.bracket;
        let mut c = self.base.position;
        for _ in 0..100 {
            let f = geom.mean_curvature(c)? - h;
            let df = geom.mean_curvature_derivative(c)?;
            let step = f / df;
            c -= step;
            if !(c > lo && c < hi) || !c.is_finite() {
                return Err(LabError::OutsideCmcNeighborhood(h));
            }
            if step.abs() < 1e-15 * (1.0 + c.abs()) {
                return Ok(c);
            }
        }
        Err(LabError::OutsideCmcNeighborhood(h))
    }
}

/// The slice of constant mean curvature `h` over the non-degenerate `base`.
pub fn cmc_slice(geom: &WarpedGeometry, base: &Slice, h: f64) -> Result<Slice> {
    if h == 0.0 {
        return Ok(*base);
    }
    let family = CmcFamily::new(geom, *base)?;
    let c = family.position(geom, h)?;
    geom.slice_at(c)
}

/// Signed distance `t - c`, wrapped to `(-P/2, P/2]` on periodic geometries.
pub fn signed_distance(geom: &WarpedGeometry, slice: &Slice, t: f64) -> f64 {
    let d = t - slice.position;
    match geom.period() {
        Some(p) => {
            let r = d.rem_euclid(p);
            if r > 0.5 * p {
                r - p
            } else {
                r
            }
        }
        None => d,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn torus() -> WarpedGeometry {
        WarpedGeometry::default_torus()
    }

    #[test]
    fn mean_curvature_examples() {
        let flat = WarpedGeometry::flat_torus(2, 2.0 * PI).unwrap();
        for i in 0..10 {
            assert_eq!(flat.mean_curvature(i as f64 * 0.6).unwrap(), 0.0);
        }
        let g = torus();
        assert!(g.mean_curvature(PI).unwrap().abs() < 1e-15);
        assert!((g.mean_curvature(0.5 * PI).unwrap() - 0.3).abs() < 1e-15);
        let s = WarpedGeometry::sphere(2).unwrap();
        assert!(matches!(
            s.mean_curvature(0.0),
            Err(LabError::CoordinateSingularity(_))
        ));
        assert!(s.mean_curvature(PI).is_err());
    }

    #[test]
    fn torus_slices() {
        let slices = find_minimal_slices(&torus()).unwrap();
        assert_eq!(slices.len(), 2);
        let t1 = slices.iter().find(|s| s.position.abs() < 1e-12).unwrap();
        let t0 = slices
            .iter()
            .find(|s| (s.position - PI).abs() < 1e-12)
            .unwrap();
        assert_eq!(t1.stability, Stability::Unstable);
        assert_eq!(t0.stability, Stability::StrictlyStable);
        assert!((t0.jacobi_eigenvalue - 0.3 / 0.7).abs() < 1e-12);
        assert!((t0.area - 2.0 * PI * 0.7).abs() < 1e-12);
    }

    #[test]
    fn sphere_equator_unstable() {
        let s = WarpedGeometry::sphere(2).unwrap();
        let slices = find_minimal_slices(&s).unwrap();
        assert_eq!(slices.len(), 1);
        assert!((slices[0].position - 0.5 * PI).abs() < 1e-12);
        assert_eq!(slices[0].stability, Stability::Unstable);
        assert!((slices[0].jacobi_eigenvalue + 1.0).abs() < 1e-12);
        // second variation of L(theta) = 2 pi sin(theta) at the equator
        let h = 1e-4;
        let len = |t: f64| 2.0 * PI * t.sin();
        let l2 = (len(0.5 * PI + h) - 2.0 * len(0.5 * PI) + len(0.5 * PI - h)) / (h * h);
        assert!((l2 + 2.0 * PI).abs() < 1e-5);
    }

    #[test]
    fn flat_is_degenerate() {
        let flat = WarpedGeometry::flat_torus(2, 2.0 * PI).unwrap();
        let slices = find_minimal_slices(&flat).unwrap();
        assert!(slices.iter().all(|s| s.stability == Stability::Degenerate));
    }

    #[test]
    fn cmc_examples() {
        let g = torus();
        let t0 = g.slice_at(PI).unwrap();
        assert_eq!(cmc_slice(&g, &t0, 0.0).unwrap(), t0);
        let c = cmc_slice(&g, &t0, 0.01).unwrap().position;
        // bisection oracle on the mean curvature
        let root = refine_root(|t| g.mean_curvature(t).unwrap() - 0.01, PI - 0.5, PI + 0.5);
        assert!((c - root).abs() < 1e-12);
        let first_order = PI - 0.01 * 0.7 / 0.3;
        assert!((c - first_order).abs() < 1e-3);
        assert!((c - (PI - 0.02333)).abs() < 1e-3);
        let hs: Vec<f64> = (0..11).map(|i| -0.05 + 0.01 * i as f64).collect();
        let cs: Vec<f64> = hs
            .iter()
            .map(|&h| cmc_slice(&g, &t0, h).unwrap().position)
            .collect();
        assert!(cs.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn cmc_outside_neighborhood() {
        let g = torus();
        let t0 = g.slice_at(PI).unwrap();
        assert!(matches!(
            cmc_slice(&g, &t0, 5.0),
            Err(LabError::OutsideCmcNeighborhood(_))
        ));
    }

    #[test]
    fn area_along_family_has_min_iff_stable() {
        let g = torus();
        for s in find_minimal_slices(&g).unwrap() {
            let h = 0.01;
            let a = |hh: f64| cmc_slice(&g, &s, hh).unwrap().area;
            let second = a(h) - 2.0 * a(0.0) + a(-h);
            assert_eq!(second > 0.0, s.stability == Stability::StrictlyStable);
        }
    }

    #[test]
    fn curvature_weighted_integral_vanishes() {
        let g = torus();
        let n = 2000;
        let h = 2.0 * PI / n as f64;
        let total: f64 = (0..n)
            .map(|i| {
                let t = i as f64 * h;
                g.mean_curvature(t).unwrap() * g.weight(t) * h
            })
            .sum();
        assert!(total.abs() < 1e-12);
    }

    #[test]
    fn signed_distance_examples() {
        let g = torus();
        let s = g.slice_at(PI).unwrap();
        assert_eq!(signed_distance(&g, &s, PI), 0.0);
        assert!((signed_distance(&g, &s, 0.0) - PI).abs() < 1e-15);
        assert!((signed_distance(&g, &s, PI + 0.3) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn tabulated_warp_interpolates() {
        let n = 256;
        let vals: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.3 * (2.0 * PI * i as f64 / n as f64).cos())
            .collect();
        let g = WarpedGeometry::tabulated_torus(vals, 2, 2.0 * PI).unwrap();
        assert!((g.w(0.123) - torus().w(0.123)).abs() < 1e-3);
        let slices = find_minimal_slices(&g).unwrap();
        assert!(slices
            .iter()
            .any(|s| (s.position - PI).abs() < 0.05 && s.stability == Stability::StrictlyStable));
    }

    #[test]
    fn sphere_volumes() {
        assert!((unit_sphere_volume(1) - 2.0 * PI).abs() < 1e-15);
        assert!((unit_sphere_volume(2) - 4.0 * PI).abs() < 1e-14);
        assert!((unit_sphere_volume(3) - 2.0 * PI * PI).abs() < 1e-13);
    }
}
