//! Parameter sweeps, figure-style presets, tabular CSV output with a JSON
//! manifest, and the validation report backing the `validate` CLI verb.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hilbert::{make_space, StateVector};
use crate::model::{liouvillian, ModelParams};
use crate::solvers::{self, Observables};
use crate::spectral;
use crate::trajectory::{self, TrajectoryConfig};
use crate::weak;

/// Sweep axis: which model parameter the grid runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    U,
    G,
    Omega0,
    Omega,
    Kappa,
}

impl Axis {
    pub fn name(&self) -> &'static str {
        match self {
            Axis::U => "U",
            Axis::G => "g",
            Axis::Omega0 => "omega0",
            Axis::Omega => "omega",
            Axis::Kappa => "kappa",
        }
    }

    fn apply(&self, base: &ModelParams, value: f64) -> Result<ModelParams> {
        let mut p = *base;
        match self {
            Axis::U => p.u = value,
            Axis::G => p.g = value,
            Axis::Omega0 => p.omega0 = value,
            Axis::Omega => p.omega = value,
            Axis::Kappa => p.kappa = value,
        }
        p.validate()?;
        Ok(p)
    }
}

impl FromStr for Axis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "u" => Ok(Axis::U),
            "g" => Ok(Axis::G),
            "omega0" | "w0" => Ok(Axis::Omega0),
            "omega" | "w" => Ok(Axis::Omega),
            "kappa" | "k" => Ok(Axis::Kappa),
            other => Err(Error::InvalidParam(format!(
                "unknown sweep axis '{other}' (use U, g, omega0, omega, kappa)"
            ))),
        }
    }
}

/// Which engines compute each sweep row.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EngineSet {
    pub master: bool,
    pub analytic: bool,
    pub trajectory: bool,
}

impl Default for EngineSet {
    fn default() -> Self {
        EngineSet {
            master: true,
            analytic: true,
            trajectory: false,
        }
    }
}

/// How the Fock cutoff is chosen per sweep point.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum CutoffPolicy {
    Fixed(usize),
    Converge { start: usize, tol: f64 },
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub base: ModelParams,
    pub axis: Axis,
    pub grid: Vec<f64>,
    pub engines: EngineSet,
    pub cutoff: CutoffPolicy,
    /// Used only when `engines.trajectory` is set.
    pub trajectory: Option<TrajectoryConfig>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.grid.is_empty() {
            return Err(Error::InvalidParam("empty sweep grid".into()));
        }
        let increasing = self.grid.windows(2).all(|w| w[1] > w[0]);
        let decreasing = self.grid.windows(2).all(|w| w[1] < w[0]);
        if !(increasing || decreasing) {
            return Err(Error::InvalidParam("sweep grid must be strictly monotone".into()));
        }
        if self.engines.trajectory && self.trajectory.is_none() {
            return Err(Error::InvalidParam(
                "trajectory engine requested without a trajectory config".into(),
            ));
        }
        Ok(())
    }
}

/// One sweep row; engines that were not requested (or failed) leave None.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub axis_value: f64,
    pub n_max_used: Option<usize>,
    pub master: Option<Observables>,
    pub analytic: Option<Observables>,
    pub p1: Option<f64>,
    pub p2: Option<f64>,
    pub traj_photon_number: Option<(f64, f64)>,
    pub traj_p1: Option<(f64, f64)>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub axis: Axis,
    pub rows: Vec<SweepRow>,
}

/// Run every grid point independently (in parallel), ordered by grid index.
/// Per-point failures are recorded in the row; the sweep continues.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let rows: Vec<SweepRow> = spec
        .grid
        .par_iter()
        .map(|&value| sweep_point(spec, value))
        .collect();
    Ok(SweepResult {
        axis: spec.axis,
        rows,
    })
}

fn sweep_point(spec: &SweepSpec, value: f64) -> SweepRow {
    let mut row = SweepRow {
        axis_value: value,
        n_max_used: None,
        master: None,
        analytic: None,
        p1: None,
        p2: None,
        traj_photon_number: None,
        traj_p1: None,
        error: None,
    };
    let params = match spec.axis.apply(&spec.base, value) {
        Ok(p) => p,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };

    if spec.engines.master {
        let solve = || -> Result<(Observables, usize)> {
            match spec.cutoff {
                CutoffPolicy::Fixed(n_max) => {
                    let sp = make_space(n_max)?;
                    let lv = liouvillian(&params, sp)?;
                    let ss = solvers::steady_state(&lv)?;
                    Ok((solvers::observables(&ss.rho)?, n_max))
                }
                CutoffPolicy::Converge { start, tol } => {
                    let (ss, obs) = solvers::converge_cutoff(&params, start, tol)?;
                    Ok((obs, ss.n_max_used))
                }
            }
        };
        match solve() {
            Ok((obs, n_max)) => {
                row.master = Some(obs);
                row.n_max_used = Some(n_max);
            }
            Err(e) => row.error = Some(e.to_string()),
        }
    }

    if spec.engines.analytic {
        match weak::closed_form_observables(&params) {
            Ok(obs) => row.analytic = Some(obs),
            Err(e) => push_error(&mut row.error, e),
        }
        match weak::amplitudes(&params).and_then(|a| weak::populations(&a)) {
            Ok(pops) => {
                row.p1 = Some(pops.p1);
                row.p2 = Some(pops.p2);
            }
            Err(e) => push_error(&mut row.error, e),
        }
    }

    if spec.engines.trajectory {
        let run = || -> Result<trajectory::TrajectoryEstimates> {
            let config = spec.trajectory.as_ref().unwrap();
            let n_max = match spec.cutoff {
                CutoffPolicy::Fixed(n) => n,
                CutoffPolicy::Converge { start, .. } => start,
            };
            let sp = make_space(n_max)?;
            let initial = StateVector::basis(sp, 0, true)?;
            let records = trajectory::run_ensemble(&params, sp, config, &initial)?;
            trajectory::estimate_observables(&records, &params)
        };
        match run() {
            Ok(est) => {
                row.traj_photon_number = Some((est.photon_number, est.photon_number_se));
                row.traj_p1 = Some((est.p1, est.p1_se));
            }
            Err(e) => push_error(&mut row.error, e),
        }
    }

    row
}

fn push_error(slot: &mut Option<String>, e: Error) {
    match slot {
        Some(existing) => {
            existing.push_str("; ");
            existing.push_str(&e.to_string());
        }
        None => *slot = Some(e.to_string()),
    }
}

// --- configuration file -----------------------------------------------------

/// Flat TOML config: physical rates as ratios to ω plus the absolute ω
/// scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub model: ModelSection,
    pub run: RunSection,
}

impl Default for ConfigFile {
    fn default() -> Self {
        ConfigFile {
            model: ModelSection::default(),
            run: RunSection::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// Absolute frequency scale; every other rate is a ratio to it.
    pub omega: f64,
    pub omega0_ratio: f64,
    pub g_ratio: f64,
    pub u_ratio: f64,
    pub kappa_ratio: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            omega: 1.0,
            omega0_ratio: 10.0,
            g_ratio: 0.1,
            u_ratio: -20.0,
            kappa_ratio: 0.2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub n_max: usize,
    pub out_dir: String,
    pub jobs: usize,
    pub n_trajectories: usize,
    pub t_total_kappa: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seed: 1234,
            n_max: 15,
            out_dir: "out".into(),
            jobs: 1,
            n_trajectories: 200,
            t_total_kappa: 2000.0,
        }
    }
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn params(&self) -> Result<ModelParams> {
        let w = self.model.omega;
        if !(w > 0.0) {
            return Err(Error::Config(format!("omega scale must be > 0, got {w}")));
        }
        ModelParams::new(
            self.model.omega0_ratio * w,
            w,
            self.model.g_ratio * w,
            self.model.u_ratio * w,
            self.model.kappa_ratio * w,
        )
    }
}

// --- CSV + manifest output ---------------------------------------------------

/// Format a float with 17 significant digits for lossless round-tripping.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.16e}")
    }
}

fn opt(x: Option<f64>) -> String {
    fmt_f64(x.unwrap_or(f64::NAN))
}

/// Write a CSV file: '#'-prefixed metadata lines, one header line, rows.
pub fn write_csv(
    path: &Path,
    metadata: &[String],
    header: &str,
    rows: &[String],
) -> Result<()> {
    let mut text = String::new();
    for line in metadata {
        let _ = writeln!(text, "# {line}");
    }
    let _ = writeln!(text, "{header}");
    for row in rows {
        let _ = writeln!(text, "{row}");
    }
    fs::write(path, text)?;
    Ok(())
}

fn params_metadata(p: &ModelParams) -> Vec<String> {
    vec![format!(
        "omega0={} omega={} g={} u={} kappa={}",
        fmt_f64(p.omega0),
        fmt_f64(p.omega),
        fmt_f64(p.g),
        fmt_f64(p.u),
        fmt_f64(p.kappa)
    )]
}

/// Serialize a sweep result to CSV rows (shared by all sweep presets).
pub fn sweep_csv(spec: &SweepSpec, result: &SweepResult, path: &Path) -> Result<()> {
    let mut metadata = params_metadata(&spec.base);
    metadata.push(format!("axis={}", spec.axis.name()));
    let header = "axis_value,n_photon_master,sz_master,g2_master,\
                  n_photon_analytic,sz_analytic,g2_analytic,p1,p2,\
                  n_photon_traj,n_photon_traj_se,p1_traj,p1_traj_se,n_max_used,error";
    let rows: Vec<String> = result
        .rows
        .iter()
        .map(|r| {
            let m = r.master.as_ref();
            let a = r.analytic.as_ref();
            format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                fmt_f64(r.axis_value),
                opt(m.map(|o| o.photon_number)),
                opt(m.map(|o| o.inversion)),
                opt(m.and_then(|o| o.g2_zero)),
                opt(a.map(|o| o.photon_number)),
                opt(a.map(|o| o.inversion)),
                opt(a.and_then(|o| o.g2_zero)),
                opt(r.p1),
                opt(r.p2),
                opt(r.traj_photon_number.map(|v| v.0)),
                opt(r.traj_photon_number.map(|v| v.1)),
                opt(r.traj_p1.map(|v| v.0)),
                opt(r.traj_p1.map(|v| v.1)),
                r.n_max_used.map(|n| n.to_string()).unwrap_or_default(),
                r.error.clone().unwrap_or_default().replace(',', ";")
            )
        })
        .collect();
    write_csv(path, &metadata, header, &rows)
}

/// Correlation-trace CSV: tau, value_re, value_im per engine column pair.
pub fn correlation_csv(
    params: &ModelParams,
    qrt: &spectral::CorrelationValues,
    analytic: Option<&spectral::CorrelationValues>,
    path: &Path,
) -> Result<()> {
    let metadata = params_metadata(params);
    let header = "tau,g2_qrt,g2_analytic";
    let rows: Vec<String> = qrt
        .tau_grid
        .iter()
        .enumerate()
        .map(|(k, &tau)| {
            let an = analytic.map(|a| a.values[k].re);
            format!(
                "{},{},{}",
                fmt_f64(tau),
                fmt_f64(qrt.values[k].re),
                opt(an)
            )
        })
        .collect();
    write_csv(path, &metadata, header, &rows)
}

/// Spectrum CSV: nu, S.
pub fn spectrum_csv(params: &ModelParams, spectrum: &spectral::Spectrum, path: &Path) -> Result<()> {
    let mut metadata = params_metadata(params);
    metadata.push(format!(
        "photon_number={} sum_rule={}",
        fmt_f64(spectrum.photon_number),
        fmt_f64(spectral::spectrum_integral(spectrum))
    ));
    let header = "nu,s_value";
    let rows: Vec<String> = spectrum
        .nu_grid
        .iter()
        .zip(spectrum.s_values.iter())
        .map(|(&nu, &s)| format!("{},{}", fmt_f64(nu), fmt_f64(s)))
        .collect();
    write_csv(path, &metadata, header, &rows)
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

// --- figure presets ----------------------------------------------------------

pub const PRESETS: [&str; 9] = [
    "fig1",
    "fig2_p1p2",
    "fig4_g2tau",
    "fig5_g2tau_offsets",
    "fig6_spectrum",
    "fig7_spectrum",
    "fig8_large_g_sweep",
    "fig9_saturation",
    "fig_spec_large_g",
];

/// Output of a figure preset run: the data files plus the manifest.
#[derive(Debug, Clone)]
pub struct FigureOutput {
    pub files: Vec<PathBuf>,
    pub manifest: PathBuf,
}

/// Execution context shared by figure presets.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub out_dir: PathBuf,
    pub seed: u64,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|k| lo + k as f64 * step).collect()
}

/// Composite frequency grid: a coarse background plus fine windows around
/// the given centers, sorted and deduplicated.
pub fn composite_nu_grid(
    coarse_lo: f64,
    coarse_hi: f64,
    coarse_step: f64,
    centers: &[f64],
    half_width: f64,
    fine_step: f64,
) -> Vec<f64> {
    let mut grid = Vec::new();
    let n_coarse = ((coarse_hi - coarse_lo) / coarse_step).round() as usize + 1;
    for k in 0..n_coarse {
        grid.push(coarse_lo + k as f64 * coarse_step);
    }
    for &c in centers {
        let n_fine = (2.0 * half_width / fine_step).round() as usize + 1;
        for k in 0..n_fine {
            grid.push(c - half_width + k as f64 * fine_step);
        }
    }
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup_by(|a, b| (*a - *b).abs() < 0.5 * fine_step);
    grid
}

/// Emission spectrum with an adaptive correlation window and a composite
/// frequency grid refined around the expected line positions.
fn spectrum_for(params: &ModelParams, n_max: usize, centers: &[f64]) -> Result<spectral::Spectrum> {
    let sp = make_space(n_max)?;
    let lv = liouvillian(params, sp)?;
    let ss = solvers::steady_state(&lv)?;
    let obs = solvers::observables(&ss.rho)?;

    let nu_max = centers.iter().fold(0.0f64, |m, &c| m.max(c.abs())) + 3.0 * params.omega;
    let dt = 0.2 / nu_max;
    let corr = spectral::field_correlation_decayed(params, sp, dt, 200.0 / params.omega, 40_000.0 / params.omega)?;

    let mut all_centers: Vec<f64> = Vec::new();
    for &c in centers {
        all_centers.push(c);
        all_centers.push(-c);
    }
    let w = params.omega;
    let nu_grid = composite_nu_grid(-nu_max, nu_max, 0.01 * w, &all_centers, 0.05 * w, 2e-4 * w);
    spectral::emission_spectrum(&corr, obs.photon_number, &nu_grid)
}

/// Run a named preset, writing CSV files plus a JSON manifest into
/// `ctx.out_dir`. The manifest lists every file with its checksum; the
/// timestamp appears only there.
pub fn run_figure(preset: &str, ctx: &RunContext) -> Result<FigureOutput> {
    if !PRESETS.contains(&preset) {
        return Err(Error::UnknownPreset {
            name: preset.to_string(),
            available: PRESETS.join(", "),
        });
    }
    fs::create_dir_all(&ctx.out_dir)?;

    let mut files = Vec::new();
    let mut extra = serde_json::Map::new();

    match preset {
        "fig1" => {
            for &omega0 in &[2.0, 5.0, 10.0] {
                let base = ModelParams::new(omega0, 1.0, 0.1, -2.0 * omega0, 0.2)?;
                let spec = SweepSpec {
                    base,
                    axis: Axis::U,
                    grid: linspace(-24.0, 6.0, 301),
                    engines: EngineSet::default(),
                    cutoff: CutoffPolicy::Fixed(15),
                    trajectory: None,
                };
                let result = run_sweep(&spec)?;
                let path = ctx.out_dir.join(format!("fig1_omega0_{omega0:.0}.csv"));
                sweep_csv(&spec, &result, &path)?;
                files.push(path);
            }
        }
        "fig2_p1p2" => {
            let base = ModelParams::new(10.0, 1.0, 0.1, -20.0, 0.2)?;
            let spec = SweepSpec {
                base,
                axis: Axis::U,
                grid: linspace(-24.0, 6.0, 301),
                engines: EngineSet {
                    master: false,
                    analytic: true,
                    trajectory: false,
                },
                cutoff: CutoffPolicy::Fixed(7),
                trajectory: None,
            };
            let result = run_sweep(&spec)?;
            let path = ctx.out_dir.join("fig2_p1p2.csv");
            sweep_csv(&spec, &result, &path)?;
            files.push(path);
        }
        "fig4_g2tau" => {
            // {omega0, g}/kappa = {50, 0.5}; omega/kappa in {5, 2.5}
            for (label, params) in [
                ("wk5", ModelParams::new(10.0, 1.0, 0.1, -20.0, 0.2)?),
                ("wk2p5", ModelParams::new(20.0, 1.0, 0.2, -40.0, 0.4)?),
            ] {
                let sp = make_space(10)?;
                let tau_max = 20.0 / params.kappa;
                let grid = spectral::uniform_grid(1001, tau_max / 1000.0);
                let qrt = spectral::g2_tau(&params, sp, &grid)?;
                let analytic = weak::g2_tau_approx(&params, &grid)?;
                let path = ctx.out_dir.join(format!("fig4_g2tau_{label}.csv"));
                correlation_csv(&params, &qrt, Some(&analytic), &path)?;
                files.push(path);
            }
        }
        "fig5_g2tau_offsets" => {
            // {omega, omega0, g}/kappa = {5, 50, 0.5}; U = -2w0 + {2,4,10}w
            for (label, offset) in [("u2", 2.0), ("u4", 4.0), ("u10", 10.0)] {
                let params = ModelParams::new(10.0, 1.0, 0.1, -20.0 + offset, 0.2)?;
                let sp = make_space(10)?;
                let tau_max = 10.0 / params.kappa;
                let grid = spectral::uniform_grid(1001, tau_max / 1000.0);
                let qrt = spectral::g2_tau(&params, sp, &grid)?;
                let analytic = weak::g2_tau_approx(&params, &grid)?;
                let path = ctx.out_dir.join(format!("fig5_g2tau_{label}.csv"));
                correlation_csv(&params, &qrt, Some(&analytic), &path)?;
                files.push(path);
            }
        }
        "fig6_spectrum" => {
            let params = ModelParams::new(10.0, 1.0, 0.1, -20.0, 0.1)?;
            let spectrum = spectrum_for(&params, 7, &[9.0, 10.0, 11.0])?;
            let path = ctx.out_dir.join("fig6_spectrum.csv");
            spectrum_csv(&params, &spectrum, &path)?;
            files.push(path);
        }
        "fig7_spectrum" => {
            let params = ModelParams::new(10.0, 1.0, 0.1, -22.0, 0.1)?;
            let spectrum = spectrum_for(&params, 7, &[9.0, 10.0, 11.0, 12.0])?;
            let path = ctx.out_dir.join("fig7_spectrum.csv");
            spectrum_csv(&params, &spectrum, &path)?;
            files.push(path);
        }
        "fig8_large_g_sweep" => {
            for &g in &[0.2, 0.5, 1.0] {
                let base = ModelParams::new(10.0, 1.0, g, -20.0, 0.2)?;
                let spec = SweepSpec {
                    base,
                    axis: Axis::U,
                    grid: linspace(-24.0, 6.0, 151),
                    engines: EngineSet::default(),
                    cutoff: CutoffPolicy::Converge {
                        start: 11,
                        tol: 1e-8,
                    },
                    trajectory: None,
                };
                let result = run_sweep(&spec)?;
                let path = ctx.out_dir.join(format!("fig8_g_{}.csv", g.to_string().replace('.', "p")));
                sweep_csv(&spec, &result, &path)?;
                files.push(path);
            }
        }
        "fig9_saturation" => {
            let base = ModelParams::new(10.0, 1.0, 0.1, -20.0, 0.2)?;
            let spec = SweepSpec {
                base,
                axis: Axis::G,
                grid: linspace(0.05, 2.0, 79),
                engines: EngineSet::default(),
                cutoff: CutoffPolicy::Converge {
                    start: 11,
                    tol: 1e-8,
                },
                trajectory: None,
            };
            let result = run_sweep(&spec)?;
            let path = ctx.out_dir.join("fig9_saturation.csv");
            sweep_csv(&spec, &result, &path)?;
            files.push(path);
        }
        "fig_spec_large_g" => {
            for (label, u) in [("u_res", -20.0), ("u_off", -22.0)] {
                let params = ModelParams::new(10.0, 1.0, 1.0, u, 0.1)?;
                let spectrum = spectrum_for(&params, 23, &[9.0, 10.0, 11.0, 12.0, 13.0])?;
                let path = ctx.out_dir.join(format!("fig_spec_large_g_{label}.csv"));
                spectrum_csv(&params, &spectrum, &path)?;
                files.push(path);
            }
        }
        _ => unreachable!("preset list checked above"),
    }

    extra.insert("preset".into(), serde_json::Value::String(preset.into()));

    let manifest = write_manifest(ctx, preset, &files, extra)?;
    Ok(FigureOutput { files, manifest })
}

fn write_manifest(
    ctx: &RunContext,
    name: &str,
    files: &[PathBuf],
    extra: serde_json::Map<String, serde_json::Value>,
) -> Result<PathBuf> {
    let mut file_entries = Vec::new();
    for path in files {
        let rows = fs::read_to_string(path)
            .map(|t| t.lines().filter(|l| !l.starts_with('#')).count().saturating_sub(1))
            .unwrap_or(0);
        file_entries.push(serde_json::json!({
            "name": path.file_name().unwrap().to_string_lossy(),
            "sha256": sha256_file(path)?,
            "rows": rows,
        }));
    }
    let manifest = serde_json::json!({
        "name": name,
        "engine": {
            "name": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
        },
        "seed": ctx.seed,
        "timestamp": chrono::Utc::now().to_rfc3339(),
        "files": file_entries,
        "extra": extra,
    });
    let path = ctx.out_dir.join(format!("{name}_manifest.json"));
    fs::write(&path, serde_json::to_string_pretty(&manifest).unwrap())?;
    Ok(path)
}

// --- validation report -------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub checks: Vec<Check>,
}

fn check(name: &str, result: Result<(bool, String)>) -> Check {
    match result {
        Ok((passed, detail)) => Check {
            name: name.into(),
            passed,
            detail,
        },
        Err(e) => Check {
            name: name.into(),
            passed: false,
            detail: e.to_string(),
        },
    }
}

/// Run the invariant suite at reduced statistics against the configured
/// model. Failures are report content, not errors.
pub fn validate(config: &ConfigFile) -> ValidationReport {
    let mut checks = Vec::new();

    let params = match config.params() {
        Ok(p) => p,
        Err(e) => {
            return ValidationReport {
                passed: false,
                checks: vec![Check {
                    name: "config".into(),
                    passed: false,
                    detail: e.to_string(),
                }],
            }
        }
    };
    let n_max = config.run.n_max;

    checks.push(check("steady_state", (|| {
        let sp = make_space(n_max)?;
        let lv = liouvillian(&params, sp)?;
        let ss = solvers::steady_state(&lv)?;
        Ok((
            ss.converged,
            format!("residual {:.2e}", ss.residual),
        ))
    })()));

    checks.push(check("positivity_and_dark_field", (|| {
        let sp = make_space(n_max)?;
        let lv = liouvillian(&params, sp)?;
        let ss = solvers::steady_state(&lv)?;
        let eigs = ss.rho.eigenvalues()?;
        let min_eig = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        let a_mean = solvers::field_amplitude(&ss.rho)?.norm();
        let ok = min_eig > -1e-10 && a_mean < 1e-8;
        Ok((ok, format!("min eig {min_eig:.2e}, |<a>| {a_mean:.2e}")))
    })()));

    checks.push(check("cutoff_convergence", (|| {
        let obs_lo = {
            let sp = make_space(n_max)?;
            let lv = liouvillian(&params, sp)?;
            solvers::observables(&solvers::steady_state(&lv)?.rho)?
        };
        let obs_hi = {
            let sp = make_space(n_max + 4)?;
            let lv = liouvillian(&params, sp)?;
            solvers::observables(&solvers::steady_state(&lv)?.rho)?
        };
        let change = (obs_hi.photon_number - obs_lo.photon_number).abs();
        Ok((
            change < 1e-8,
            format!("photon number change {change:.2e} from n_max {n_max} to {}", n_max + 4),
        ))
    })()));

    checks.push(check("analytic_agreement", (|| {
        let sp = make_space(n_max)?;
        let lv = liouvillian(&params, sp)?;
        let obs = solvers::observables(&solvers::steady_state(&lv)?.rho)?;
        let th = weak::closed_form_observables(&params)?;
        let rel = (obs.photon_number - th.photon_number).abs() / th.photon_number.max(1e-300);
        Ok((rel < 0.10, format!("photon number rel deviation {rel:.2e}")))
    })()));

    checks.push(check("trajectory_determinism", (|| {
        let sp = make_space(n_max.min(7))?;
        let t_total = 200.0 / params.kappa;
        let tc = TrajectoryConfig {
            seed: config.run.seed,
            t_burn: 0.0,
            t_total,
            dt_max: 0.5 / params.omega,
            n_trajectories: 1,
        };
        let initial = StateVector::basis(sp, 0, true)?;
        let r1 = trajectory::run_trajectory(&params, sp, &tc, &initial, 0)?;
        let r2 = trajectory::run_trajectory(&params, sp, &tc, &initial, 0)?;
        let same = r1.jump_times.len() == r2.jump_times.len()
            && r1
                .jump_times
                .iter()
                .zip(r2.jump_times.iter())
                .all(|(a, b)| a.to_bits() == b.to_bits());
        Ok((same, format!("{} jumps", r1.jump_times.len())))
    })()));

    let passed = checks.iter().all(|c| c.passed);
    ValidationReport { passed, checks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn weak_base() -> ModelParams {
        ModelParams::new(10.0, 1.0, 0.1, -20.0, 0.2).unwrap()
    }

    #[test]
    fn empty_grid_rejected() {
        let spec = SweepSpec {
            base: weak_base(),
            axis: Axis::U,
            grid: vec![],
            engines: EngineSet::default(),
            cutoff: CutoffPolicy::Fixed(7),
            trajectory: None,
        };
        assert!(run_sweep(&spec).is_err());
    }

    #[test]
    fn non_monotone_grid_rejected() {
        let spec = SweepSpec {
            base: weak_base(),
            axis: Axis::U,
            grid: vec![-20.0, -18.0, -19.0],
            engines: EngineSet::default(),
            cutoff: CutoffPolicy::Fixed(7),
            trajectory: None,
        };
        assert!(run_sweep(&spec).is_err());
    }

    #[test]
    fn unknown_preset_lists_names() {
        let ctx = RunContext {
            out_dir: std::env::temp_dir(),
            seed: 1,
        };
        match run_figure("fig42", &ctx) {
            Err(Error::UnknownPreset { name, available }) => {
                assert_eq!(name, "fig42");
                assert!(available.contains("fig1"));
                assert!(available.contains("fig9_saturation"));
            }
            other => panic!("expected UnknownPreset, got {other:?}"),
        }
    }

    #[test]
    fn photon_number_peaks_at_resonance() {
        let spec = SweepSpec {
            base: weak_base(),
            axis: Axis::U,
            grid: linspace(-24.0, -16.0, 41),
            engines: EngineSet::default(),
            cutoff: CutoffPolicy::Fixed(7),
            trajectory: None,
        };
        let result = run_sweep(&spec).unwrap();
        let peak = result
            .rows
            .iter()
            .max_by(|a, b| {
                a.master
                    .as_ref()
                    .unwrap()
                    .photon_number
                    .partial_cmp(&b.master.as_ref().unwrap().photon_number)
                    .unwrap()
            })
            .unwrap();
        assert!((peak.axis_value - (-20.0)).abs() < 0.21, "peak at U = {}", peak.axis_value);
        for row in &result.rows {
            assert!(row.error.is_none(), "row error: {:?}", row.error);
            assert_eq!(row.n_max_used, Some(7));
        }
    }

    #[test]
    fn per_point_failure_recorded_in_row() {
        // sweeping kappa through 0 makes that single point invalid
        let spec = SweepSpec {
            base: weak_base(),
            axis: Axis::Kappa,
            grid: vec![-0.1, 0.1, 0.2],
            engines: EngineSet::default(),
            cutoff: CutoffPolicy::Fixed(7),
            trajectory: None,
        };
        let result = run_sweep(&spec).unwrap();
        assert!(result.rows[0].error.is_some());
        assert!(result.rows[0].master.is_none());
        assert!(result.rows[1].error.is_none());
        assert!(result.rows[2].error.is_none());
    }

    #[test]
    fn csv_output_is_deterministic() {
        let spec = SweepSpec {
            base: weak_base(),
            axis: Axis::U,
            grid: linspace(-21.0, -19.0, 5),
            engines: EngineSet::default(),
            cutoff: CutoffPolicy::Fixed(7),
            trajectory: None,
        };
        let dir = tempdir().unwrap();
        let p1 = dir.path().join("a.csv");
        let p2 = dir.path().join("b.csv");
        let r1 = run_sweep(&spec).unwrap();
        sweep_csv(&spec, &r1, &p1).unwrap();
        let r2 = run_sweep(&spec).unwrap();
        sweep_csv(&spec, &r2, &p2).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
    }

    #[test]
    fn csv_round_trips_doubles() {
        let x = 9.614999999999313e-3;
        let s = fmt_f64(x);
        let back: f64 = s.parse().unwrap();
        assert_eq!(x.to_bits(), back.to_bits());
    }

    #[test]
    fn config_defaults_and_params() {
        let config = ConfigFile::default();
        let p = config.params().unwrap();
        assert_eq!(p.omega0, 10.0);
        assert_eq!(p.u, -20.0);
        // scaling omega rescales everything
        let mut scaled = ConfigFile::default();
        scaled.model.omega = 2.0;
        let q = scaled.params().unwrap();
        assert_eq!(q.omega0, 20.0);
        assert_eq!(q.kappa, 0.4);
    }

    #[test]
    fn config_parse_toml() {
        let text = r#"
            [model]
            omega = 1.0
            omega0_ratio = 5.0
            u_ratio = -10.0

            [run]
            seed = 7
            n_max = 9
        "#;
        let config: ConfigFile = toml::from_str(text).unwrap();
        assert_eq!(config.model.omega0_ratio, 5.0);
        assert_eq!(config.run.seed, 7);
        assert_eq!(config.run.jobs, 1);
        let bad: std::result::Result<ConfigFile, _> = toml::from_str("[model]\nnonsense = 1");
        assert!(bad.is_err());
    }

    #[test]
    fn validate_default_config_passes() {
        let mut config = ConfigFile::default();
        config.run.n_max = 9;
        let report = validate(&config);
        for c in &report.checks {
            assert!(c.passed, "check {} failed: {}", c.name, c.detail);
        }
        assert!(report.passed);
    }

    #[test]
    fn validate_small_cutoff_fails_convergence() {
        let mut config = ConfigFile::default();
        config.run.n_max = 2;
        config.model.g_ratio = 0.5;
        let report = validate(&config);
        let cutoff = report
            .checks
            .iter()
            .find(|c| c.name == "cutoff_convergence")
            .unwrap();
        assert!(!cutoff.passed, "expected cutoff failure: {}", cutoff.detail);
        assert!(!report.passed);
    }

    #[test]
    fn validate_g_zero_surfaces_degeneracy() {
        let mut config = ConfigFile::default();
        config.model.g_ratio = 0.0;
        let report = validate(&config);
        assert!(!report.passed);
        let ss = report
            .checks
            .iter()
            .find(|c| c.name == "steady_state")
            .unwrap();
        assert!(!ss.passed);
        assert!(
            ss.detail.contains("not unique"),
            "detail: {}",
            ss.detail
        );
    }

    #[test]
    fn manifest_lists_checksums() {
        let dir = tempdir().unwrap();
        let ctx = RunContext {
            out_dir: dir.path().to_path_buf(),
            seed: 3,
        };
        let out = run_figure("fig2_p1p2", &ctx).unwrap();
        assert_eq!(out.files.len(), 1);
        let manifest: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&out.manifest).unwrap()).unwrap();
        let entries = manifest["files"].as_array().unwrap();
        assert_eq!(entries.len(), 1);
        let recorded = entries[0]["sha256"].as_str().unwrap();
        let actual = sha256_file(&out.files[0]).unwrap();
        assert_eq!(recorded, actual);
        assert!(manifest["timestamp"].is_string());
        assert!(entries[0]["rows"].as_u64().unwrap() > 0);
    }

    #[test]
    fn composite_grid_sorted_unique() {
        let grid = composite_nu_grid(-2.0, 2.0, 0.1, &[1.0, -1.0], 0.05, 0.001);
        assert!(grid.windows(2).all(|w| w[1] > w[0]));
        assert!(grid.iter().any(|&x| (x - 1.0).abs() < 1e-9));
    }
}
