//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! fails. Runs without the libtest harness so the lines always print.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;
use std::time::Instant;

use ac_multiplicity::analysis::morse_index;
use ac_multiplicity::barriers::{assemble_barrier, invert_orthogonal, BarrierConfig};
use ac_multiplicity::discretization::{weighted_laplacian, Field, Grid};
use ac_multiplicity::experiments::{
    ladder_fits, records_to_csv, run, CutTorus, Experiment, RunConfig, StudyRecord,
};
use ac_multiplicity::geometry::WarpedGeometry;
use ac_multiplicity::potential::{psi_d1, CutoffProfile, QuarticWell};
use ac_multiplicity::profile::{
    apply_linearized_1d, compute_moments, linearized_matrix, spectral_gap,
};
use ac_multiplicity::solver::{gradient_flow, residual, seed_pair, with_noise, SolverConfig};

type Check = std::result::Result<String, String>;

fn pass_if(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn records(exp: Experiment, eps: &[f64]) -> Result<Vec<StudyRecord>, String> {
    let cfg = RunConfig {
        epsilon: eps.to_vec(),
        ..RunConfig::for_experiment(exp)
    };
    run(&cfg)
        .into_result()
        .map_err(|e| format!("{} failed: {e}", exp.name()))
}

/// Eigenvalues of a symmetric tridiagonal matrix by implicit QL with Wilkinson
/// shifts.
fn tridiagonal_ql(mut d: Vec<f64>, off: &[f64]) -> Vec<f64> {
    let n = d.len();
    let mut e: Vec<f64> = off.to_vec();
    e.push(0.0);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter < 60, "QL did not converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(f64::total_cmp);
    d
}

fn moments() -> Check {
    let profile =
        CutoffProfile::new(0.05, CutoffProfile::DEFAULT_DELTA).map_err(|e| e.to_string())?;
    let m = compute_moments(&profile, 1e-13).map_err(|e| e.to_string())?;
    let errs = [
        (m.sigma0 - SQRT_2 / 3.0).abs(),
        (m.sigma1 - 2.0).abs(),
        (m.sigma2 - 2.0 * SQRT_2 / 3.0).abs(),
    ];
    pass_if(
        errs.iter().all(|e| *e < 1e-10),
        format!(
            "errors sigma0 {:.1e} sigma1 {:.1e} sigma2 {:.1e} (tol 1e-10)",
            errs[0], errs[1], errs[2]
        ),
    )
}

fn spectrum() -> Check {
    let r = spectral_gap(20.0, 4096).map_err(|e| e.to_string())?;
    let (a, _) = linearized_matrix(20.0, 4096);
    let oracle = tridiagonal_ql(a.diag.clone(), &a.off);
    let (l0, l1) = (r.eigenvalues[0], r.eigenvalues[1]);
    let agree = (l0 - oracle[0]).abs().max((l1 - oracle[1]).abs());
    let edge = QuarticWell::d2w(1.0);
    pass_if(
        l0.abs() < 1e-5
            && (l1 - 1.5).abs() < 1e-3
            && agree < 1e-9
            && edge == 2.0
            && QuarticWell::d2w(-1.0) == 2.0,
        format!("lambda0 {l0:.3e}, lambda1 {l1:.7}, QL oracle gap {agree:.1e}, W''(+-1) = {edge}"),
    )
}

fn barrier_signs() -> Check {
    let ct = CutTorus::new(Arc::new(WarpedGeometry::default_torus())).map_err(|e| e.to_string())?;
    let cfg = BarrierConfig::default();
    let mut detail = Vec::new();
    let mut ok = cfg.k_factor == 5.0;
    for eps in [0.04, 0.02] {
        let profile =
            CutoffProfile::new(eps, CutoffProfile::DEFAULT_DELTA).map_err(|e| e.to_string())?;
        let g = ct.grid(eps, 1).map_err(|e| e.to_string())?;
        for h in [5.0 * eps, -5.0 * eps] {
            let b = assemble_barrier(g.clone(), &ct.base, h, &profile, &cfg)
                .map_err(|e| e.to_string())?;
            // recompute Q(v_H) node by node
            let q = residual(&b.v, eps).map_err(|e| e.to_string())?;
            let uniform = q.values.iter().all(|&x| x * h.signum() < 0.0);
            let margin = q.values.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
            ok &= uniform && b.sign_uniform && margin > 0.0;
            detail.push(format!(
                "eps={eps} H={h:+.2}: margin {margin:.2e}{}",
                if uniform { "" } else { " VIOLATED" }
            ));
        }
    }
    pass_if(ok, detail.join("; "))
}

fn sliding_trap() -> Check {
    let recs = records(Experiment::Study, &[0.08, 0.04, 0.02, 0.01])?;
    let mut ok = true;
    let mut detail = Vec::new();
    for eps in [0.04, 0.02, 0.01] {
        let r = recs
            .iter()
            .find(|r| r.experiment == "study" && r.epsilon == eps)
            .ok_or(format!("no study row at eps={eps}"))?;
        let trapped = r.trapped == Some(true);
        let haus = r.hausdorff_over_eps.unwrap_or(f64::INFINITY);
        ok &= trapped && haus <= 3.0;
        detail.push(format!(
            "eps={eps}: trapped={trapped} hausdorff/eps={haus:.1e}"
        ));
    }
    pass_if(ok, detail.join("; "))
}

fn example3() -> Check {
    let recs = records(Experiment::Example3, &[0.02])?;
    let get = |name: &str| {
        recs.iter()
            .find(|r| r.experiment == name)
            .ok_or(format!("no {name} row"))
    };
    let t1 = get("example3_i")?;
    let t0 = get("example3_ii")?;
    let ratio = t1.mult_ratio.unwrap_or(f64::NAN);
    let index = t1.index.unwrap_or(0);
    let left = match t0.outcome.as_str() {
        "annihilated" => true,
        "FALSIFYING" => false,
        _ => t0.nearest_interface.is_some_and(|d| d > 0.1),
    };
    pass_if(
        (ratio - 2.0).abs() <= 0.05 && index >= 1 && t1.crossings == Some(2) && left,
        format!(
            "T1 pair ratio {ratio:.4} index {index}; T0 pair outcome {}",
            t0.outcome
        ),
    )
}

fn example1() -> Check {
    let mut recs = records(Experiment::Example1, &[0.08, 0.04, 0.02])?;
    recs.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
    let dist: Vec<f64> = recs
        .iter()
        .map(|r| r.nearest_interface.unwrap_or(f64::NAN))
        .collect();
    let decreasing = dist.windows(2).all(|w| w[1] < w[0]);
    let two = recs.iter().all(|r| r.crossings == Some(2));
    let last = recs.last().ok_or("no rows")?;
    // E / (2 sigma0 * 2 pi) per parallel with one interface energy 2 sigma0 each
    let ratio = last.mult_ratio.unwrap_or(f64::NAN) / 2.0;
    pass_if(
        decreasing && two && (ratio - 1.0).abs() <= 0.05,
        format!(
            "distances {:.4}, {:.4}, {:.4}; energy ratio at eps=0.02 {ratio:.4}",
            dist[0], dist[1], dist[2]
        ),
    )
}

fn decomposition() -> Check {
    let recs = records(Experiment::Study, &[0.08, 0.04, 0.02, 0.01])?;
    let fits = ladder_fits(&recs);
    let slope = *fits.get("phi_sup_slope").ok_or("no slope fit")?;
    let worst = recs
        .iter()
        .filter(|r| r.experiment == "study")
        .map(|r| r.orthogonality_residual.unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    pass_if(
        (slope - 2.0).abs() <= 0.3 && worst < 1e-8,
        format!("phi_sup slope {slope:.4}; max orthogonality residual {worst:.1e}"),
    )
}

fn decay() -> Check {
    let recs = records(Experiment::Study, &[0.08, 0.04, 0.02, 0.01])?;
    let r = recs
        .iter()
        .find(|r| r.experiment == "study" && r.epsilon == 0.01)
        .ok_or("no eps=0.01 row")?;
    let s = r.decay_slope.unwrap_or(f64::NAN);
    pass_if(
        (s + SQRT_2).abs() <= 0.1 * SQRT_2,
        format!("tail slope {s:.4} vs -sqrt2 = {:.4}", -SQRT_2),
    )
}

fn index_stability() -> Check {
    let ct = CutTorus::new(Arc::new(WarpedGeometry::default_torus())).map_err(|e| e.to_string())?;
    let cfg = RunConfig::for_experiment(Experiment::Solve);
    let mut ok = true;
    let mut detail = Vec::new();
    for eps in [0.02, 0.01] {
        let mut idx = Vec::new();
        for mult in [1, 2] {
            let g = ct.grid(eps, mult).map_err(|e| e.to_string())?;
            let s = ct.solve(g, eps, &cfg).map_err(|e| e.to_string())?;
            idx.push(morse_index(&s));
        }
        ok &= idx == [0, 0];
        detail.push(format!("eps={eps}: index {} (h), {} (h/2)", idx[0], idx[1]));
    }
    pass_if(ok, detail.join("; "))
}

fn property_suites() -> Check {
    let mut fails = Vec::new();

    // order-2 convergence of the weighted Laplacian on a manufactured field
    let geom = Arc::new(WarpedGeometry::warped_torus(0.3, 3, 2.0 * PI).map_err(|e| e.to_string())?);
    let exact = |t: f64| {
        -4.0 * (2.0 * t).cos() + 2.0 * 0.3 * t.sin() / (1.0 + 0.3 * t.cos()) * 2.0 * (2.0 * t).sin()
    };
    let err = |n: usize| {
        let g = Arc::new(Grid::full(geom.clone(), n).unwrap());
        let l = weighted_laplacian(&Field::from_fn(g.clone(), |t| (2.0 * t).cos()), 1.0).unwrap();
        g.nodes()
            .iter()
            .zip(&l.values)
            .map(|(&t, v)| (v - exact(t)).abs())
            .fold(0.0, f64::max)
    };
    let order = (err(128) / err(256)).log2();
    if (order - 2.0).abs() > 0.15 {
        fails.push(format!("order {order:.3}"));
    }

    // summation by parts: <Delta u, u> = -u^T G u <= 0
    let g = Arc::new(Grid::full(geom.clone(), 64).map_err(|e| e.to_string())?);
    for seed in 0..16u64 {
        let u = with_noise(&Field::constant(g.clone(), 0.0), 1.0, seed);
        let q = weighted_laplacian(&u, 1.0).unwrap().inner(&u).unwrap();
        let d = g.dirichlet_form(&u.values);
        if q > 0.0 || (q + d).abs() > 1e-10 * d {
            fails.push(format!("SBP seed {seed}"));
        }
    }

    // flow energy monotone from random initial data
    let eps = 0.1;
    let g = Arc::new(
        Grid::for_epsilon(Arc::new(WarpedGeometry::default_torus()), eps)
            .map_err(|e| e.to_string())?,
    );
    for seed in 0..4u64 {
        let u0 = with_noise(&seed_pair(g.clone(), PI, 4.0 * eps, eps), 0.5, seed);
        let cfg = SolverConfig {
            flow_max_steps: 200,
            ..SolverConfig::default()
        };
        let s = gradient_flow(&u0, eps, &cfg).map_err(|e| e.to_string())?;
        if s.trace
            .windows(2)
            .any(|w| w[1] > w[0] + 1e-14 * w[0].abs().max(1.0))
        {
            fails.push(format!("flow energy increased (seed {seed})"));
        }
    }

    // determinism of the study CSV, wall time blanked
    let cfg = RunConfig {
        noise: 1e-6,
        ..RunConfig::for_experiment(Experiment::Study)
    };
    let csv = || {
        let recs: Vec<StudyRecord> = run(&cfg)
            .into_result()
            .map(|v| {
                v.into_iter()
                    .map(|r| StudyRecord {
                        wall_time: 0.0,
                        ..r
                    })
                    .collect()
            })
            .unwrap_or_default();
        records_to_csv(&recs).unwrap_or_default()
    };
    let (a, b) = (csv(), csv());
    if a != b || a.is_empty() {
        fails.push("study CSV differs between runs".into());
    }

    // invert_orthogonal round trip
    let eps = 0.04;
    let profile = CutoffProfile::new(eps, 0.5).map_err(|e| e.to_string())?;
    let ct = CutTorus::new(Arc::new(WarpedGeometry::default_torus())).map_err(|e| e.to_string())?;
    let g = ct.grid(eps, 1).map_err(|e| e.to_string())?;
    let c = ct.base.position;
    let rad = 0.45 * profile.collar();
    let bump = |s: f64| {
        if s.abs() < rad {
            (-1.0 / (1.0 - (s / rad).powi(2))).exp()
        } else {
            0.0
        }
    };
    let mut worst: f64 = 0.0;
    for k in 0..4 {
        let raw = Field::from_fn(g.clone(), |t| bump(t - c) * ((t - c) / eps).powi(k));
        let kernel: Vec<f64> = g.nodes().iter().map(|&t| psi_d1((t - c) / eps)).collect();
        let bk: Vec<f64> = g
            .nodes()
            .iter()
            .zip(&kernel)
            .map(|(&t, k)| bump(t - c) * k)
            .collect();
        let kp: f64 = kernel.iter().zip(&raw.values).map(|(a, b)| a * b).sum();
        let kb: f64 = kernel.iter().zip(&bk).map(|(a, b)| a * b).sum();
        let phi = raw
            .with_values(
                raw.values
                    .iter()
                    .zip(&bk)
                    .map(|(p, b)| p - kp / kb * b)
                    .collect(),
            )
            .map_err(|e| e.to_string())?;
        let l = apply_linearized_1d(&phi, &profile, c, false).map_err(|e| e.to_string())?;
        let inv = invert_orthogonal(&l, &profile, c).map_err(|e| e.to_string())?;
        worst = worst.max(inv.field.sub(&phi).unwrap().sup_norm() / phi.sup_norm());
    }
    if worst >= 1e-6 {
        fails.push(format!("round-trip error {worst:.1e}"));
    }

    pass_if(
        fails.is_empty(),
        if fails.is_empty() {
            format!("order {order:.3}; SBP, flow monotonicity, CSV determinism ok; round-trip {worst:.1e}")
        } else {
            fails.join("; ")
        },
    )
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("moments", moments),
        ("spectrum", spectrum),
        ("barrier sign certificate", barrier_signs),
        ("sliding trap", sliding_trap),
        ("example 3 foliation dichotomy", example3),
        ("example 1 sphere", example1),
        ("decomposition scaling", decomposition),
        ("decay", decay),
        ("index stability", index_stability),
        ("property suites", property_suites),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(d) => println!("PASS {name}: {d} [{secs:.2}s]"),
            Err(d) => {
                failed += 1;
                println!("FAIL {name}: {d} [{secs:.2}s]");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
