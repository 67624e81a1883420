use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use rabisim::error::Error;
use rabisim::hilbert::{make_space, StateVector};
use rabisim::model::ModelParams;
use rabisim::spectral;
use rabisim::sweep::{
    self, Axis, ConfigFile, CutoffPolicy, EngineSet, RunContext, SweepSpec,
};
use rabisim::trajectory::{self, TrajectoryConfig};
use rabisim::weak;

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_VALIDATION: u8 = 4;

#[derive(Parser)]
#[command(name = "rabisim", about = "Steady states, correlations, spectra, and quantum-jump trajectories of a driven-free qubit-oscillator model with nonlinear dispersive coupling", version)]
struct Cli {
    #[command(flatten)]
    common: Common,

    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args)]
struct Common {
    /// TOML config file; flags override config keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Fock cutoff (highest retained photon number).
    #[arg(long, global = true)]
    n_max: Option<usize>,

    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Worker threads for sweep points.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Verb {
    /// Sweep one parameter over a uniform grid, writing a CSV table.
    #[command(allow_negative_numbers = true)]
    Sweep {
        /// Axis: U, g, omega0, omega, or kappa (absolute units).
        #[arg(long)]
        axis: String,
        #[arg(long)]
        start: f64,
        #[arg(long)]
        stop: f64,
        #[arg(long, default_value_t = 101)]
        points: usize,
        /// Comma-separated engines from {master, analytic}.
        #[arg(long, default_value = "master,analytic")]
        engines: String,
    },
    /// Reproduce a named figure preset (CSV files + JSON manifest).
    Figure {
        #[arg(long)]
        preset: String,
    },
    /// Emission spectrum at the configured parameters.
    Spectrum,
    /// Intensity correlation g2(tau), numeric and analytic.
    G2tau {
        /// Trace length in units of 1/kappa.
        #[arg(long, default_value_t = 10.0)]
        tau_kappa: f64,
        #[arg(long, default_value_t = 1001)]
        points: usize,
    },
    /// Quantum-jump trajectory ensemble; writes estimates and jump times.
    Trajectory {
        #[arg(long)]
        n_trajectories: Option<usize>,
        /// Run length per trajectory in units of 1/kappa.
        #[arg(long)]
        t_total_kappa: Option<f64>,
    },
    /// Run the reduced-statistics invariant suite; report to stdout.
    Validate,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(category(&e))
        }
    }
}

fn category(e: &Error) -> u8 {
    match e {
        Error::InvalidParam(_) | Error::Config(_) | Error::UnknownPreset { .. } | Error::Io(_) => {
            EXIT_CONFIG
        }
        _ => EXIT_SOLVER,
    }
}

struct Resolved {
    params: ModelParams,
    seed: u64,
    n_max: usize,
    out_dir: PathBuf,
    config: ConfigFile,
}

fn resolve(common: &Common) -> Result<Resolved, Error> {
    let mut config = match &common.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    if let Some(seed) = common.seed {
        config.run.seed = seed;
    }
    if let Some(n_max) = common.n_max {
        config.run.n_max = n_max;
    }
    if let Some(out_dir) = &common.out_dir {
        config.run.out_dir = out_dir.display().to_string();
    }
    if let Some(jobs) = common.jobs {
        config.run.jobs = jobs;
    }
    if config.run.jobs > 0 {
        // ignore failure if a pool already exists (tests, repeated calls)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(config.run.jobs)
            .build_global();
    }
    let params = config.params()?;
    Ok(Resolved {
        params,
        seed: config.run.seed,
        n_max: config.run.n_max,
        out_dir: PathBuf::from(&config.run.out_dir),
        config,
    })
}

fn run(cli: &Cli) -> Result<ExitCode, Error> {
    let r = resolve(&cli.common)?;
    std::fs::create_dir_all(&r.out_dir)?;

    match &cli.verb {
        Verb::Sweep {
            axis,
            start,
            stop,
            points,
            engines,
        } => {
            if *points < 2 || !(stop > start) {
                return Err(Error::InvalidParam(
                    "need points >= 2 and stop > start".into(),
                ));
            }
            let mut set = EngineSet {
                master: false,
                analytic: false,
                trajectory: false,
            };
            for name in engines.split(',') {
                match name.trim() {
                    "master" => set.master = true,
                    "analytic" => set.analytic = true,
                    other => {
                        return Err(Error::InvalidParam(format!(
                            "unknown engine '{other}' (use master, analytic)"
                        )))
                    }
                }
            }
            let step = (stop - start) / (*points - 1) as f64;
            let grid: Vec<f64> = (0..*points).map(|k| start + k as f64 * step).collect();
            let spec = SweepSpec {
                base: r.params,
                axis: Axis::from_str(axis)?,
                grid,
                engines: set,
                cutoff: CutoffPolicy::Fixed(r.n_max),
                trajectory: None,
            };
            let result = sweep::run_sweep(&spec)?;
            let path = r.out_dir.join(format!("sweep_{}.csv", spec.axis.name()));
            sweep::sweep_csv(&spec, &result, &path)?;
            println!("wrote {}", path.display());
        }
        Verb::Figure { preset } => {
            let ctx = RunContext {
                out_dir: r.out_dir.clone(),
                seed: r.seed,
            };
            let out = sweep::run_figure(preset, &ctx)?;
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            println!("wrote {}", out.manifest.display());
        }
        Verb::Spectrum => {
            let p = &r.params;
            let w = p.omega;
            let sp = make_space(r.n_max)?;
            let lv = rabisim::model::liouvillian(p, sp)?;
            let ss = rabisim::solvers::steady_state(&lv)?;
            let obs = rabisim::solvers::observables(&ss.rho)?;
            let nu_max = p.omega0 + 3.0 * w + p.u.abs();
            let corr = spectral::field_correlation_decayed(
                p,
                sp,
                0.2 / nu_max,
                200.0 / w,
                40_000.0 / w,
            )?;
            let centers: Vec<f64> = [-1.0, 0.0, 1.0, 2.0]
                .iter()
                .flat_map(|&k| [p.omega0 + k * w, -(p.omega0 + k * w)])
                .collect();
            let nu_grid =
                sweep::composite_nu_grid(-nu_max, nu_max, 0.01 * w, &centers, 0.05 * w, 2e-4 * w);
            let spectrum = spectral::emission_spectrum(&corr, obs.photon_number, &nu_grid)?;
            let path = r.out_dir.join("spectrum.csv");
            sweep::spectrum_csv(p, &spectrum, &path)?;
            println!("wrote {}", path.display());
        }
        Verb::G2tau { tau_kappa, points } => {
            if *points < 2 || !(*tau_kappa > 0.0) {
                return Err(Error::InvalidParam(
                    "need points >= 2 and tau_kappa > 0".into(),
                ));
            }
            let p = &r.params;
            let sp = make_space(r.n_max)?;
            let tau_max = tau_kappa / p.kappa;
            let grid = spectral::uniform_grid(*points, tau_max / (*points - 1) as f64);
            let qrt = spectral::g2_tau(p, sp, &grid)?;
            let analytic = weak::g2_tau_approx(p, &grid)?;
            let path = r.out_dir.join("g2tau.csv");
            sweep::correlation_csv(p, &qrt, Some(&analytic), &path)?;
            println!("wrote {}", path.display());
        }
        Verb::Trajectory {
            n_trajectories,
            t_total_kappa,
        } => {
            let p = &r.params;
            let n_traj = n_trajectories.unwrap_or(r.config.run.n_trajectories);
            let t_total = t_total_kappa.unwrap_or(r.config.run.t_total_kappa) / p.kappa;
            let config = TrajectoryConfig {
                seed: r.seed,
                t_burn: trajectory::suggested_burn_in(p)?.min(t_total / 4.0),
                t_total,
                dt_max: 0.5 / p.omega,
                n_trajectories: n_traj,
            };
            let sp = make_space(r.n_max)?;
            let initial = StateVector::basis(sp, 0, true)?;
            let records = trajectory::run_ensemble(p, sp, &config, &initial)?;
            let estimates = trajectory::estimate_observables(&records, p)?;

            // jump-time dump for offline analysis
            let mut rows = Vec::new();
            for (id, record) in records.iter().enumerate() {
                for &t in &record.jump_times {
                    rows.push(format!("{id},{}", sweep::fmt_f64(t)));
                }
            }
            let jumps_path = r.out_dir.join("trajectory_jumps.csv");
            sweep::write_csv(
                &jumps_path,
                &[format!("seed={} n_trajectories={n_traj}", r.seed)],
                "trajectory_id,jump_time",
                &rows,
            )?;

            let est_path = r.out_dir.join("trajectory_estimates.json");
            let json = serde_json::json!({
                "photon_number": estimates.photon_number,
                "photon_number_se": estimates.photon_number_se,
                "inversion": estimates.inversion,
                "inversion_se": estimates.inversion_se,
                "p1": estimates.p1,
                "p1_se": estimates.p1_se,
                "p2": estimates.p2,
                "g2_zero_by_bin": estimates.g2_zero_by_bin,
                "n_jumps": estimates.n_jumps,
                "total_time": estimates.total_time,
                "alternation_rate": estimates.alternation_rate,
            });
            std::fs::write(&est_path, serde_json::to_string_pretty(&json).unwrap())?;
            println!("wrote {}", jumps_path.display());
            println!("wrote {}", est_path.display());
        }
        Verb::Validate => {
            let report = sweep::validate(&r.config);
            for check in &report.checks {
                println!(
                    "{} {}: {}",
                    if check.passed { "PASS" } else { "FAIL" },
                    check.name,
                    check.detail
                );
            }
            let path = r.out_dir.join("validation_report.json");
            std::fs::write(&path, serde_json::to_string_pretty(&report).unwrap())?;
            println!("wrote {}", path.display());
            if !report.passed {
                return Ok(ExitCode::from(EXIT_VALIDATION));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
