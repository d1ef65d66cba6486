use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use ac_multiplicity::experiments::{
    self, ladder_fits, Experiment, Manifest, OutputDir, RunConfig, StudyRecord,
};
use ac_multiplicity::potential::CutoffProfile;
use ac_multiplicity::profile::{compute_moments, spectral_gap, DEFAULT_QUADRATURE_TOL};
use ac_multiplicity::{LabError, Result};

#[derive(Parser)]
#[command(
    name = "ac-multiplicity",
    version,
    about = "Allen-Cahn interfaces on warped products"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Moment table of the cutoff profile as key = value lines.
    Profile {
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        #[arg(long, default_value_t = CutoffProfile::DEFAULT_DELTA)]
        delta: f64,
        #[arg(long, default_value_t = DEFAULT_QUADRATURE_TOL)]
        tol: f64,
    },
    /// Low spectrum of the 1-D linearized operator about the profile.
    Spectrum {
        #[arg(long, default_value_t = 20.0)]
        halfwidth: f64,
        #[arg(long, default_value_t = 4096)]
        points: usize,
    },
    /// Single-interface solution at the strictly stable slice.
    Solve(RunArgs),
    /// Barriers v_H with their sign certificate, one row per (epsilon, H).
    Barrier {
        #[command(flatten)]
        run: RunArgs,
        /// Mean curvatures (default +-K epsilon).
        #[arg(long = "h", value_delimiter = ',', allow_hyphen_values = true)]
        curvatures: Option<Vec<f64>>,
    },
    /// Round sphere: two parallels by tau-shooting.
    Example1(RunArgs),
    /// Projective quotient of the sphere solution.
    Example2(RunArgs),
    /// Warped torus: foliation at the unstable slice, sliding at the stable one.
    Example3(RunArgs),
    /// Epsilon-ladder convergence study at the stable slice.
    Study(RunArgs),
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Run configuration (TOML: flat keys with sections).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Epsilon ladder, descending (overrides the config).
    #[arg(long, value_delimiter = ',')]
    epsilon: Option<Vec<f64>>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Overwrite existing outputs.
    #[arg(long)]
    force: bool,
}

impl RunArgs {
    fn config(&self, experiment: Experiment) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::for_experiment(experiment),
        };
        cfg.experiment = experiment;
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(e) = &self.epsilon {
            cfg.epsilon = e.clone();
        }
        if let Some(d) = self.delta {
            cfg.delta = d;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_record(r: &StudyRecord) {
    let f = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6e}"));
    println!(
        "{:<12} eps={:<6} E={} mult={} haus/eps={} slope={} index={} phi_sup={} H={} margin={} {}",
        r.experiment,
        r.epsilon,
        f(r.energy),
        f(r.mult_ratio),
        f(r.hausdorff_over_eps),
        f(r.decay_slope),
        r.index.map_or("-".into(), |i| i.to_string()),
        f(r.phi_sup),
        f(r.mean_curvature),
        f(r.barrier_margin),
        r.outcome
    );
}

fn run_experiment(
    args: &RunArgs,
    experiment: Experiment,
    curvatures: Option<Vec<f64>>,
) -> Result<bool> {
    let cfg = args.config(experiment)?;
    let out = OutputDir::prepare(&cfg.out, args.force)?;
    let start = Instant::now();
    let outcome = match (&curvatures, experiment) {
        (Some(h), Experiment::Barrier) => experiments::barrier_outcome(&cfg, Some(h)),
        _ => experiments::run(&cfg),
    };
    let total = start.elapsed().as_secs_f64();
    let fits = ladder_fits(&outcome.records);
    let geometry = cfg
        .geometry
        .build()
        .map(|g| g.describe())
        .unwrap_or_default();
    let command: Vec<String> = std::env::args().collect();
    let files = out.write_study(&outcome.records, |files| Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.join(" "),
        config: cfg.clone(),
        geometry,
        files,
        records: outcome.records.len(),
        timings: BTreeMap::from([(experiment.name().to_string(), total)]),
        fits: fits.clone(),
    })?;
    for r in &outcome.records {
        print_record(r);
    }
    for (k, v) in &fits {
        println!("{k} = {v:.6}");
    }
    println!("wrote {} files to {}", files.len(), out.root().display());
    if let Some(e) = outcome.error {
        return Err(e);
    }
    // a solution inside the stable collar contradicts the sliding mechanism
    Ok(!outcome.records.iter().any(|r| r.outcome == "FALSIFYING"))
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Profile {
            epsilon,
            delta,
            tol,
        } => {
            let profile = CutoffProfile::new(epsilon, delta)?;
            print!("{}", compute_moments(&profile, tol)?.to_record());
            Ok(true)
        }
        Command::Spectrum { halfwidth, points } => {
            print!("{}", spectral_gap(halfwidth, points)?.to_record());
            Ok(true)
        }
        Command::Solve(a) => run_experiment(&a, Experiment::Solve, None),
        Command::Barrier { run, curvatures } => {
            run_experiment(&run, Experiment::Barrier, curvatures)
        }
        Command::Example1(a) => run_experiment(&a, Experiment::Example1, None),
        Command::Example2(a) => run_experiment(&a, Experiment::Example2, None),
        Command::Example3(a) => run_experiment(&a, Experiment::Example3, None),
        Command::Study(a) => run_experiment(&a, Experiment::Study, None),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: falsifying outcome recorded");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if LabError::is_usage(&e) { 2 } else { 1 })
        }
    }
}
