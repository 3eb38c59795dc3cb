//! Command-line driver: subcommands that wire a [`ModelConfig`] through the
//! simulation pipeline and write CSV artifacts.

pub mod output;

use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use tricat_core::cat_state::kernel;
use tricat_core::classical::{crossing_window, default_cluster_gap, detect_crossings, ensemble, CrossingEvent};
use tricat_core::model::{GridSpec, ModelConfig, CONFIG_KEYS};
use tricat_core::normal_modes::{diagonalize, NormalModeBasis};
use tricat_core::oracle::{oracle_marginal, OracleOptions};
use tricat_core::propagator::coefficients;
use tricat_core::reduced_density::{damping_window, decoherence_series, SampleStatus, SeriesEntry};

use output::{emit, num, Csv, Manifest, OutputDir};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] tricat_core::Error),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    #[error("{0}")]
    Usage(String),

    #[error("{failed} of {total} time samples failed; first at t={t}: {first}")]
    SampleFailures { failed: usize, total: usize, t: f64, first: tricat_core::Error },

    #[error("cannot start worker pool: {0}")]
    ThreadPool(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Io { .. } => "Io",
            CliError::Usage(_) => "Usage",
            CliError::SampleFailures { first, .. } => first.kind(),
            CliError::ThreadPool(_) => "ThreadPool",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    /// Single-line `error[<kind>]: <message>` form.
    pub fn error_line(&self) -> String {
        let msg = self.to_string().replace('\n', " ");
        format!("error[{}]: {msg}", self.kind())
    }
}

#[derive(Debug, Parser)]
#[command(name = "tricat", version, about = "Decoherence of three coupled Schrödinger-cat particles")]
pub struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

/// Config file plus one override flag per config key.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// `key = value` config file applied before the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub mass: Option<String>,
    #[arg(long)]
    pub omega12: Option<String>,
    #[arg(long)]
    pub omega13: Option<String>,
    #[arg(long)]
    pub omega23: Option<String>,
    #[arg(long)]
    pub hbar: Option<String>,
    /// One value for all particles or three comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    pub sigma: Option<String>,
    /// One value for all particles or three comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    pub d: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub t0: Option<String>,
    /// Comma-separated sample times.
    #[arg(long)]
    pub times: Option<String>,
    /// `auto[:count]` or `min, max, count`.
    #[arg(long = "x1_grid", alias = "x1-grid", allow_hyphen_values = true)]
    pub x1_grid: Option<String>,
    /// `auto[:count]` or `min, max, count`.
    #[arg(long = "quad_grid", alias = "quad-grid", allow_hyphen_values = true)]
    pub quad_grid: Option<String>,
}

impl ConfigArgs {
    fn flags(&self) -> [(&'static str, Option<&String>); 11] {
        let f = [
            self.mass.as_ref(),
            self.omega12.as_ref(),
            self.omega13.as_ref(),
            self.omega23.as_ref(),
            self.hbar.as_ref(),
            self.sigma.as_ref(),
            self.d.as_ref(),
            self.t0.as_ref(),
            self.times.as_ref(),
            self.x1_grid.as_ref(),
            self.quad_grid.as_ref(),
        ];
        std::array::from_fn(|i| (CONFIG_KEYS[i], f[i]))
    }

    /// Apply the config file and flags on top of `base`, then validate.
    pub fn resolve(&self, base: ModelConfig) -> Result<ModelConfig, CliError> {
        let mut cfg = base;
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|source| CliError::Io { path: path.clone(), source })?;
            cfg.apply_config_str(&text)?;
        }
        for (key, value) in self.flags() {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        Ok(cfg.validate()?)
    }
}

#[derive(Debug, Clone, Args)]
pub struct OrbitSampling {
    /// Length of the sampled interval after `t0`.
    #[arg(long, default_value_t = 20.0)]
    pub t_max: f64,
    /// Number of samples, endpoints included.
    #[arg(long, default_value_t = 20001)]
    pub samples: usize,
}

impl OrbitSampling {
    fn times(&self, t0: f64) -> Result<Vec<f64>, CliError> {
        if self.samples < 2 || !(self.t_max > 0.0) {
            return Err(CliError::Usage("need --samples >= 2 and --t-max > 0".into()));
        }
        let h = self.t_max / (self.samples - 1) as f64;
        Ok((0..self.samples).map(|i| t0 + h * i as f64).collect())
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normal-mode basis of the coupling matrix.
    Modes {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// CSV instead of aligned text.
        #[arg(long)]
        csv: bool,
    },
    /// Particle-1 traces of the eight packet-centre orbits.
    Classical {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        sampling: OrbitSampling,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sign changes between pairs of particle-1 orbit traces.
    Crossings {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        sampling: OrbitSampling,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Propagator and Gaussian-kernel coefficients at one time.
    Coeffs {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reduced densities at every configured time.
    Evolve {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value = "tricat-output")]
        out: PathBuf,
    },
    /// Particle-1 marginal from the grid Schrödinger integrator.
    Oracle {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        t: f64,
        /// Grid points per axis.
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        /// Box padding beyond the classical extent, in units of σ.
        #[arg(long, default_value_t = 7.0)]
        padding: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reference preset: default parameters on the ten-sample time ladder.
    ReproducePaper {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value = "tricat-output")]
        out: PathBuf,
    },
    /// Compare the classical crossing window with the interference-damping window.
    Correlate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        sampling: OrbitSampling,
        /// First scan time after `t0`.
        #[arg(long, default_value_t = 0.005)]
        scan_start: f64,
        /// Last scan time after `t0`.
        #[arg(long, default_value_t = 10.005)]
        scan_end: f64,
        #[arg(long, default_value_t = 0.1)]
        scan_step: f64,
        /// Directory for the scan, crossings and report files.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Grids used by the `correlate` scan unless overridden.
pub fn scan_defaults() -> ModelConfig {
    ModelConfig {
        x1_grid: GridSpec::Auto { count: 401 },
        quad_grid: GridSpec::Auto { count: 129 },
        ..Default::default()
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let threads = cli
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if threads == 0 {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::ThreadPool(e.to_string()))?;
    pool.install(|| dispatch(&cli.command, threads))
}

fn dispatch(command: &Command, threads: usize) -> Result<(), CliError> {
    match command {
        Command::Modes { cfg, csv } => {
            let cfg = cfg.resolve(ModelConfig::default())?;
            let basis = diagonalize(&cfg)?;
            let text = if *csv { modes_csv(&basis) } else { modes_text(&basis) };
            emit(None, &text)
        }
        Command::Classical { cfg, sampling, out } => {
            let cfg = cfg.resolve(ModelConfig::default())?;
            let basis = diagonalize(&cfg)?;
            let times = sampling.times(cfg.t0)?;
            let ens = ensemble(&cfg, &basis, &times);
            let mut header = vec!["t".to_string()];
            header.extend((0..8).map(|k| format!("x1_orbit{k}")));
            let mut csv = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
            for (s, &t) in times.iter().enumerate() {
                let mut row = vec![t];
                row.extend(ens.x1.iter().map(|o| o[s]));
                csv.numbers(&row);
            }
            emit(out.as_deref(), &csv.into_string())
        }
        Command::Crossings { cfg, sampling, out } => {
            let cfg = cfg.resolve(ModelConfig::default())?;
            let basis = diagonalize(&cfg)?;
            let events = detect_crossings(&ensemble(&cfg, &basis, &sampling.times(cfg.t0)?));
            emit(out.as_deref(), &crossings_csv(&events))
        }
        Command::Coeffs { cfg, t, out } => {
            let cfg = cfg.resolve(ModelConfig::default())?;
            let basis = diagonalize(&cfg)?;
            emit(out.as_deref(), &coeffs_csv(&cfg, &basis, *t)?)
        }
        Command::Evolve { cfg, out } => {
            let cfg = cfg.resolve(ModelConfig::default())?;
            evolve_to_dir(&cfg, out, "evolve", threads)
        }
        Command::ReproducePaper { cfg, out } => {
            let cfg = cfg.resolve(ModelConfig::default())?;
            evolve_to_dir(&cfg, out, "reproduce-paper", threads)
        }
        Command::Oracle { cfg, t, n, dt, padding, out } => {
            let cfg = cfg.resolve(ModelConfig::default())?;
            let opts = OracleOptions { n: *n, dt: *dt, padding_sigmas: *padding, domain: None };
            let m = oracle_marginal(&cfg, *t, &opts)?;
            let mut csv = Csv::new(&["x1", "rho0", "rhod", "rhoint", "rho"]);
            for i in 0..m.x1.len() {
                csv.numbers(&[m.x1[i], m.rho0[i], m.rhod[i], m.rhoint[i], m.rho[i]]);
            }
            emit(out.as_deref(), &csv.into_string())
        }
        Command::Correlate { cfg, sampling, scan_start, scan_end, scan_step, out } => {
            let base = cfg.resolve(scan_defaults())?;
            let scan = Scan { start: *scan_start, end: *scan_end, step: *scan_step };
            correlate(&base, sampling, &scan, out.as_deref(), threads)
        }
    }
}

fn modes_rows(b: &NormalModeBasis) -> Vec<(String, f64)> {
    let mut rows = vec![("delta_omega_sq".to_string(), b.delta_omega_sq)];
    for i in 0..2 {
        rows.push((format!("lambda{}", i + 1), b.lambda[i]));
    }
    for i in 0..2 {
        rows.push((format!("Omega{}", i + 1), b.mode_frequencies[i]));
    }
    for (name, v) in [("xi", b.xi), ("eta", b.eta), ("zeta", b.zeta)] {
        for i in 0..2 {
            rows.push((format!("{name}{}", i + 1), v[i]));
        }
    }
    rows.push(("det".into(), b.det));
    for (name, v) in [("a", b.a), ("b", b.b), ("c", b.c), ("m", b.masses)] {
        for i in 0..3 {
            rows.push((format!("{name}{}", i + 1), v[i]));
        }
    }
    for i in 0..2 {
        rows.push((format!("omega{}", i + 1), b.frequencies[i]));
    }
    rows
}

pub fn modes_csv(b: &NormalModeBasis) -> String {
    let mut csv = Csv::new(&["quantity", "value"]);
    for (name, v) in modes_rows(b) {
        csv.row([name, num(v)]);
    }
    csv.into_string()
}

pub fn modes_text(b: &NormalModeBasis) -> String {
    let rows = modes_rows(b);
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0);
    rows.iter().map(|(n, v)| format!("{n:<width$}  {v:>24.17e}\n")).collect()
}

pub fn crossings_csv(events: &[CrossingEvent]) -> String {
    let mut csv = Csv::new(&["t_cross", "orbit_i", "orbit_j", "same_group"]);
    for e in events {
        csv.row([num(e.t), e.orbit_i.to_string(), e.orbit_j.to_string(), u8::from(e.same_group).to_string()]);
    }
    csv.into_string()
}

pub fn coeffs_csv(cfg: &ModelConfig, basis: &NormalModeBasis, t: f64) -> Result<String, CliError> {
    let c = coefficients(basis, cfg.t0, t)?;
    let k = kernel(&c, cfg)?;
    let mut rows: Vec<(String, f64)> = vec![("t".into(), c.t), ("dt".into(), c.dt)];
    for m in 0..3 {
        rows.push((format!("cot_stiffness{}", m + 1), c.cot_stiffness[m]));
        rows.push((format!("csc_stiffness{}", m + 1), c.csc_stiffness[m]));
    }
    for i in 0..3 {
        rows.push((format!("A{}", i + 1), c.a[i]));
    }
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        rows.push((format!("B{}{}", i + 1, j + 1), c.b[i][j]));
    }
    for i in 0..3 {
        for d in 0..3 {
            rows.push((format!("alpha{}_{}", i + 1, d + 1), c.alpha[i][d]));
        }
    }
    rows.push(("Delta_re".into(), k.delta.re));
    rows.push(("Delta_im".into(), k.delta.im));
    rows.push(("phi".into(), k.phi));
    for i in 0..3 {
        rows.push((format!("lambda{}_re", i + 1), k.lambda[i].re));
        rows.push((format!("lambda{}_im", i + 1), k.lambda[i].im));
    }
    for (idx, name) in [(2, "mu12"), (0, "mu23"), (1, "mu31")] {
        rows.push((format!("{name}_re"), k.mu[idx].re));
        rows.push((format!("{name}_im"), k.mu[idx].im));
    }
    let mut csv = Csv::new(&["quantity", "value"]);
    for (n, v) in rows {
        csv.row([n, num(v)]);
    }
    Ok(csv.into_string())
}

/// File name of the density CSV for one time sample.
pub fn rho_file_name(t: f64) -> String {
    format!("rho_t{t}.csv")
}

fn decoherence_csv(series: &[SeriesEntry]) -> String {
    let mut csv = Csv::new(&["t", "I", "skipped_flag"]);
    for e in series {
        let i = e.interference_strength().map_or_else(|| "nan".to_string(), num);
        let skipped = u8::from(e.status() != SampleStatus::Ok);
        csv.row([num(e.t), i, skipped.to_string()]);
    }
    csv.into_string()
}

fn failures(series: &[SeriesEntry]) -> Result<(), CliError> {
    let mut failed = series.iter().filter(|e| e.status() == SampleStatus::Error);
    if let Some(first) = failed.next() {
        let Err(err) = &first.result else { unreachable!() };
        return Err(CliError::SampleFailures {
            failed: 1 + failed.count(),
            total: series.len(),
            t: first.t,
            first: err.clone(),
        });
    }
    Ok(())
}

fn evolve_to_dir(cfg: &ModelConfig, out: &Path, subcommand: &str, threads: usize) -> Result<(), CliError> {
    let mut dir = OutputDir::prepare(out)?;
    let mut manifest = Manifest::new(subcommand, out, cfg, threads);
    let start = Instant::now();
    let series = decoherence_series(cfg)?;
    manifest.stage("evolve", start.elapsed().as_secs_f64());

    let start = Instant::now();
    for e in &series {
        manifest.entry(&format!("status.t={}", e.t), e.status().as_str());
        if let Err(err) = &e.result {
            manifest.entry(&format!("error.t={}", e.t), &err.to_string().replace('\n', " "));
        }
        if let Ok(s) = &e.result {
            let mut csv = Csv::new(&["x1", "rho0", "rhod", "rhoint", "rho"]);
            for i in 0..s.x1.len() {
                csv.numbers(&[s.x1[i], s.rho0[i], s.rhod[i], s.rhoint[i], s.rho[i]]);
            }
            dir.write(&rho_file_name(e.t), &csv.into_string())?;
        }
    }
    dir.write("decoherence.csv", &decoherence_csv(&series))?;
    manifest.stage("write", start.elapsed().as_secs_f64());
    dir.finish(manifest)?;
    failures(&series)
}

/// Time scan used for the interference-damping window.
#[derive(Debug, Clone, Copy)]
pub struct Scan {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl Scan {
    pub fn times(&self, t0: f64) -> Result<Vec<f64>, CliError> {
        if !(self.step > 0.0 && self.start > 0.0 && self.end >= self.start) {
            return Err(CliError::Usage("need 0 < scan-start <= scan-end and scan-step > 0".into()));
        }
        let n = ((self.end - self.start) / self.step + 1e-9).floor() as usize;
        // rounded so scan times print as the decimals they stand for
        let clean = |v: f64| (v * 1e9).round() / 1e9;
        Ok((0..=n).map(|i| t0 + clean(self.start + self.step * i as f64)).collect())
    }
}

/// Outcome of `correlate`.
#[derive(Debug, Clone, PartialEq)]
pub struct Correlation {
    pub crossing_window: Option<(f64, f64)>,
    pub cross_group_crossings: usize,
    /// `(time of max I, max I)`.
    pub peak: Option<(f64, f64)>,
    pub damping_window: Option<(f64, Option<f64>)>,
    pub overlap: Option<(f64, f64)>,
}

impl Correlation {
    pub fn report(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), num);
        let mut lines = vec![
            format!("crossing_window_start = {}", opt(self.crossing_window.map(|w| w.0))),
            format!("crossing_window_end = {}", opt(self.crossing_window.map(|w| w.1))),
            format!("cross_group_crossings = {}", self.cross_group_crossings),
            format!("interference_peak_t = {}", opt(self.peak.map(|p| p.0))),
            format!("interference_peak_I = {}", opt(self.peak.map(|p| p.1))),
            format!("damping_window_start = {}", opt(self.damping_window.map(|w| w.0))),
            format!("damping_window_end = {}", opt(self.damping_window.and_then(|w| w.1))),
            format!("overlap_start = {}", opt(self.overlap.map(|o| o.0))),
            format!("overlap_end = {}", opt(self.overlap.map(|o| o.1))),
        ];
        lines.push(format!("overlap = {}", if self.overlap.is_some() { "yes" } else { "no" }));
        lines.join("\n") + "\n"
    }
}

pub fn correlation(events: &[CrossingEvent], gap: f64, series: &[(f64, f64)]) -> Correlation {
    let crossing = crossing_window(events, gap);
    let damping = damping_window(series, 0.5);
    let peak = damping.and_then(|(t, _)| series.iter().find(|s| s.0 == t).copied());
    let overlap = match (crossing, damping) {
        (Some((c0, c1)), Some((d0, Some(d1)))) => {
            let (lo, hi) = (c0.max(d0), c1.min(d1));
            (lo <= hi).then_some((lo, hi))
        }
        _ => None,
    };
    Correlation {
        crossing_window: crossing,
        cross_group_crossings: events.iter().filter(|e| !e.same_group).count(),
        peak,
        damping_window: damping,
        overlap,
    }
}

fn correlate(
    base: &ModelConfig,
    sampling: &OrbitSampling,
    scan: &Scan,
    out: Option<&Path>,
    threads: usize,
) -> Result<(), CliError> {
    let mut manifest = out.map(|p| Manifest::new("correlate", p, base, threads));
    let basis = diagonalize(base)?;

    let start = Instant::now();
    let events = detect_crossings(&ensemble(base, &basis, &sampling.times(base.t0)?));
    if let Some(m) = manifest.as_mut() {
        m.stage("crossings", start.elapsed().as_secs_f64());
    }

    let start = Instant::now();
    let cfg = ModelConfig { times: scan.times(base.t0)?, ..base.clone() }.validate()?;
    let series = decoherence_series(&cfg)?;
    if let Some(m) = manifest.as_mut() {
        m.stage("scan", start.elapsed().as_secs_f64());
    }
    let points: Vec<(f64, f64)> = series
        .iter()
        .filter_map(|e| e.interference_strength().map(|i| (e.t, i)))
        .collect();

    let corr = correlation(&events, default_cluster_gap(&basis), &points);
    let report = corr.report();
    emit(None, &report)?;
    if let (Some(path), Some(mut m)) = (out, manifest) {
        let mut dir = OutputDir::prepare(path)?;
        for e in &series {
            m.entry(&format!("status.t={}", e.t), e.status().as_str());
        }
        dir.write("scan.csv", &decoherence_csv(&series))?;
        dir.write("crossings.csv", &crossings_csv(&events))?;
        dir.write("report.txt", &report)?;
        dir.finish(m)?;
    }
    failures(&series)
}
