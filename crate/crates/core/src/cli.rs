//! Experiment runner: flat `key = value` configs in, CSV and SVG files out.
//!
//! Every run writes `manifest.txt`, which echoes the fully resolved config and
//! can be fed back through `--config` to repeat the run.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, ValueEnum};
use rayon::prelude::*;

use crate::closedform::{critical_summary, gap_indicator, gap_picard, CriticalPointParams, CriticalSummary};
use crate::dynamics::{evolve, evolve_reduced, SolverConfig, Trajectory};
use crate::energy::{EnergySpec, Kernel};
use crate::error::{Error, Result};
use crate::grid::{lp_distance, DensityPair, Grid1D, Norm};
use crate::initial::InitialData;
use crate::minimise::{gap_width, minimise, overlap, MinimiserConfig, Projection};
use crate::plot::{emit_plot, emit_plot_from_csv, PlotStyle, Series};
use crate::transport::{jko_chain, JkoConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Subcommand {
    Evolve,
    EvolveReduced,
    Minimise,
    Jko,
    Critical,
    Gapscan,
    Compare,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Self::Evolve => "evolve",
            Self::EvolveReduced => "evolve-reduced",
            Self::Minimise => "minimise",
            Self::Jko => "jko",
            Self::Critical => "critical",
            Self::Gapscan => "gapscan",
            Self::Compare => "compare",
        }
    }
}

impl FromStr for Subcommand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Subcommand::from_str_name(s).ok_or_else(|| Error::Config(format!("unknown subcommand `{s}`")))
    }
}

impl Subcommand {
    fn from_str_name(s: &str) -> Option<Self> {
        <Self as ValueEnum>::from_str(s, false).ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reference {
    Reduced,
    Critical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub subcommand: Subcommand,
    pub seed: u64,

    pub half_length: f64,
    pub n_cells: usize,
    pub delta: f64,
    pub energy: String,
    pub kernel: String,
    pub alpha: f64,
    pub initial: String,
    pub mass_rho: f64,
    pub mass_eta: f64,

    pub t_end: f64,
    pub output_times: Vec<f64>,
    pub cfl: f64,
    pub dt_max: f64,
    pub min_dt: f64,
    pub steady_tol: Option<f64>,
    pub trace_stride: usize,

    pub step0: f64,
    pub backtrack_factor: f64,
    pub armijo_c: f64,
    pub tol_rel_energy: f64,
    pub max_iters: usize,
    pub supp_eps: f64,
    pub projection: Projection,
    pub support_spread: Option<usize>,

    pub tau: f64,
    pub jko_steps: usize,

    pub delta_min: f64,
    pub delta_max: f64,
    pub delta_count: usize,

    pub reference: Reference,
    pub plots: bool,
}

impl ExperimentConfig {
    pub fn new(subcommand: Subcommand) -> Self {
        let solver = SolverConfig::default();
        let minimiser = MinimiserConfig::default();
        Self {
            subcommand,
            seed: 0,
            half_length: 4.0,
            n_cells: 400,
            delta: -0.9,
            energy: "local".into(),
            kernel: "indicator".into(),
            alpha: 1.0,
            initial: "blocks".into(),
            mass_rho: 2.0,
            mass_eta: 2.0,
            t_end: 10.0,
            output_times: Vec::new(),
            cfl: solver.cfl,
            dt_max: solver.dt_max,
            min_dt: solver.min_dt,
            steady_tol: None,
            trace_stride: 1,
            step0: minimiser.step0,
            backtrack_factor: minimiser.backtrack_factor,
            armijo_c: minimiser.armijo_c,
            tol_rel_energy: minimiser.tol_rel_energy,
            max_iters: minimiser.max_iters,
            supp_eps: minimiser.supp_eps,
            projection: minimiser.projection,
            support_spread: minimiser.support_spread,
            tau: 0.05,
            jko_steps: 20,
            delta_min: -0.95,
            delta_max: -0.5,
            delta_count: 10,
            reference: Reference::Reduced,
            plots: true,
        }
    }

    /// Parses a flat config. `subcommand` may come from the text or from
    /// `fallback`; when both are present they must agree.
    pub fn parse(text: &str, fallback: Option<Subcommand>) -> Result<Self> {
        let mut keys = Keys::parse(text)?;
        let from_text = keys.take_opt("subcommand")?.map(|s: String| s.parse::<Subcommand>()).transpose()?;
        let subcommand = match (from_text, fallback) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::Config(format!("config says `{}` but `{}` was requested", a.name(), b.name())))
            }
            (Some(a), _) | (None, Some(a)) => a,
            (None, None) => return Err(Error::Config("no subcommand given".into())),
        };
        let d = Self::new(subcommand);
        let cfg = Self {
            subcommand,
            seed: keys.take("seed", d.seed)?,
            half_length: keys.take("half_length", d.half_length)?,
            n_cells: keys.take("n_cells", d.n_cells)?,
            delta: keys.take("delta", d.delta)?,
            energy: keys.take("energy", d.energy)?,
            kernel: keys.take("kernel", d.kernel)?,
            alpha: keys.take("alpha", d.alpha)?,
            initial: keys.take("initial", d.initial)?,
            mass_rho: keys.take("mass_rho", d.mass_rho)?,
            mass_eta: keys.take("mass_eta", d.mass_eta)?,
            t_end: keys.take("t_end", d.t_end)?,
            output_times: match keys.take_opt::<String>("output_times")? {
                Some(list) => parse_list(&list)?,
                None => d.output_times,
            },
            cfl: keys.take("cfl", d.cfl)?,
            dt_max: keys.take("dt_max", d.dt_max)?,
            min_dt: keys.take("min_dt", d.min_dt)?,
            steady_tol: keys.take_optional_value("steady_tol", d.steady_tol)?,
            trace_stride: keys.take("trace_stride", d.trace_stride)?,
            step0: keys.take("step0", d.step0)?,
            backtrack_factor: keys.take("backtrack_factor", d.backtrack_factor)?,
            armijo_c: keys.take("armijo_c", d.armijo_c)?,
            tol_rel_energy: keys.take("tol_rel_energy", d.tol_rel_energy)?,
            max_iters: keys.take("max_iters", d.max_iters)?,
            supp_eps: keys.take("supp_eps", d.supp_eps)?,
            projection: match keys.take_opt::<String>("projection")?.as_deref() {
                None => d.projection,
                Some("clip") => Projection::ClipRescale,
                Some("simplex") => Projection::Simplex,
                Some(other) => return Err(Error::Config(format!("projection must be `clip` or `simplex`, got `{other}`"))),
            },
            support_spread: keys.take_optional_value("support_spread", d.support_spread)?,
            tau: keys.take("tau", d.tau)?,
            jko_steps: keys.take("jko_steps", d.jko_steps)?,
            delta_min: keys.take("delta_min", d.delta_min)?,
            delta_max: keys.take("delta_max", d.delta_max)?,
            delta_count: keys.take("delta_count", d.delta_count)?,
            reference: match keys.take_opt::<String>("reference")?.as_deref() {
                None => d.reference,
                Some("reduced") => Reference::Reduced,
                Some("critical") => Reference::Critical,
                Some(other) => return Err(Error::Config(format!("reference must be `reduced` or `critical`, got `{other}`"))),
            },
            plots: keys.take("plots", d.plots)?,
        };
        keys.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks everything that can be checked without running a solver.
    pub fn validate(&self) -> Result<()> {
        let grid = self.grid()?;
        self.spec()?;
        self.initial_pair(&grid)?;
        self.solver().validate()?;
        self.minimiser().validate()?;
        if self.subcommand == Subcommand::Jko {
            self.jko().validate()?;
            if self.jko_steps == 0 {
                return Err(Error::Config("jko_steps must be positive".into()));
            }
        }
        if self.subcommand == Subcommand::Gapscan {
            if self.delta_count == 0 || !(self.delta_min <= self.delta_max) {
                return Err(Error::Config("gapscan needs delta_min <= delta_max and delta_count >= 1".into()));
            }
            for d in self.scan_deltas() {
                EnergySpec::nonlocal(d, self.kernel_value()?)?;
            }
        }
        if self.subcommand == Subcommand::Critical || (self.subcommand == Subcommand::Compare && self.reference == Reference::Critical) {
            self.critical_params()?.profile(self.n_cells)?;
        }
        if matches!(self.subcommand, Subcommand::Compare) && self.reference == Reference::Reduced && self.output_times.is_empty() {
            return Err(Error::Config("compare needs output_times".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid1D> {
        Grid1D::new(self.half_length, self.n_cells)
    }

    pub fn kernel_value(&self) -> Result<Kernel> {
        Kernel::from_name(&self.kernel, self.alpha)
    }

    pub fn spec(&self) -> Result<EnergySpec> {
        match self.energy.as_str() {
            "local" => EnergySpec::local(self.delta),
            "nonlocal" => EnergySpec::nonlocal(self.delta, self.kernel_value()?),
            "relaxed" => EnergySpec::relaxed(self.delta),
            other => Err(Error::Config(format!("energy must be local, nonlocal or relaxed, got `{other}`"))),
        }
    }

    pub fn initial_pair(&self, grid: &Grid1D) -> Result<DensityPair> {
        InitialData::from_name(&self.initial, self.seed, (self.mass_rho, self.mass_eta))?.build(grid)
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            cfl: self.cfl,
            t_end: self.t_end,
            output_times: self.output_times.clone(),
            dt_max: self.dt_max,
            min_dt: self.min_dt,
            steady_tol: self.steady_tol,
            trace_stride: self.trace_stride,
        }
    }

    pub fn minimiser(&self) -> MinimiserConfig {
        MinimiserConfig {
            step0: self.step0,
            backtrack_factor: self.backtrack_factor,
            armijo_c: self.armijo_c,
            tol_rel_energy: self.tol_rel_energy,
            max_iters: self.max_iters,
            supp_eps: self.supp_eps,
            projection: self.projection,
            support_spread: self.support_spread,
        }
    }

    pub fn jko(&self) -> JkoConfig {
        JkoConfig { tau: self.tau, minimiser: self.minimiser(), quantile_resolution: None }
    }

    pub fn critical_params(&self) -> Result<CriticalPointParams> {
        CriticalPointParams::new(self.half_length, self.delta, self.kernel_value()?)
    }

    pub fn scan_deltas(&self) -> Vec<f64> {
        if self.delta_count == 1 {
            return vec![self.delta_min];
        }
        let h = (self.delta_max - self.delta_min) / (self.delta_count - 1) as f64;
        (0..self.delta_count).map(|k| self.delta_min + h * k as f64).collect()
    }

    /// The resolved config in the same flat format the parser reads.
    pub fn manifest(&self) -> String {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "none".into());
        let list = self.output_times.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let entries: Vec<(&str, String)> = vec![
            ("subcommand", self.subcommand.name().into()),
            ("seed", self.seed.to_string()),
            ("half_length", self.half_length.to_string()),
            ("n_cells", self.n_cells.to_string()),
            ("delta", self.delta.to_string()),
            ("energy", self.energy.clone()),
            ("kernel", self.kernel.clone()),
            ("alpha", self.alpha.to_string()),
            ("initial", self.initial.clone()),
            ("mass_rho", self.mass_rho.to_string()),
            ("mass_eta", self.mass_eta.to_string()),
            ("t_end", self.t_end.to_string()),
            ("output_times", list),
            ("cfl", self.cfl.to_string()),
            ("dt_max", self.dt_max.to_string()),
            ("min_dt", self.min_dt.to_string()),
            ("steady_tol", opt(self.steady_tol.map(|v| v.to_string()))),
            ("trace_stride", self.trace_stride.to_string()),
            ("step0", self.step0.to_string()),
            ("backtrack_factor", self.backtrack_factor.to_string()),
            ("armijo_c", self.armijo_c.to_string()),
            ("tol_rel_energy", self.tol_rel_energy.to_string()),
            ("max_iters", self.max_iters.to_string()),
            ("supp_eps", self.supp_eps.to_string()),
            (
                "projection",
                match self.projection {
                    Projection::ClipRescale => "clip",
                    Projection::Simplex => "simplex",
                }
                .into(),
            ),
            ("support_spread", opt(self.support_spread.map(|v| v.to_string()))),
            ("tau", self.tau.to_string()),
            ("jko_steps", self.jko_steps.to_string()),
            ("delta_min", self.delta_min.to_string()),
            ("delta_max", self.delta_max.to_string()),
            ("delta_count", self.delta_count.to_string()),
            (
                "reference",
                match self.reference {
                    Reference::Reduced => "reduced",
                    Reference::Critical => "critical",
                }
                .into(),
            ),
            ("plots", self.plots.to_string()),
        ];
        let mut out = String::new();
        for (k, v) in entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

struct Keys {
    map: BTreeMap<String, String>,
}

impl Keys {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) =
                line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got {raw:?}", no + 1)))?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if k.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", no + 1)));
            }
            if map.insert(k.clone(), v).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{k}`", no + 1)));
            }
        }
        Ok(Self { map })
    }

    fn take_opt<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.map.remove(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| Error::Config(format!("cannot parse `{key} = {v}`"))),
        }
    }

    fn take<T: FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        Ok(self.take_opt(key)?.unwrap_or(default))
    }

    /// A key whose value may be the literal `none`.
    fn take_optional_value<T: FromStr>(&mut self, key: &str, default: Option<T>) -> Result<Option<T>> {
        match self.map.get(key).map(String::as_str) {
            Some("none") => {
                self.map.remove(key);
                Ok(None)
            }
            Some(_) => self.take_opt(key),
            None => Ok(default),
        }
    }

    fn finish(self) -> Result<()> {
        match self.map.keys().next() {
            None => Ok(()),
            Some(k) => Err(Error::Config(format!("unknown key `{k}`"))),
        }
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| Error::Config(format!("bad number `{t}` in list"))))
        .collect()
}

/// What a run produced: files relative to the output directory and a short
/// human-readable summary.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub summary: String,
    pub warnings: Vec<String>,
}

struct Sink<'a> {
    dir: &'a Path,
    plots: bool,
    files: Vec<PathBuf>,
}

impl Sink<'_> {
    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        fs::write(self.dir.join(name), contents)?;
        self.files.push(PathBuf::from(name));
        Ok(())
    }

    fn pair(&mut self, stem: &str, pair: &DensityPair, title: &str) -> Result<()> {
        let mut buf = Vec::new();
        pair.write_csv(&mut buf)?;
        let text = String::from_utf8(buf).expect("csv is ascii");
        self.write(&format!("{stem}.csv"), &text)?;
        if self.plots {
            let svg = emit_plot_from_csv(&text, &PlotStyle::titled(title))?;
            self.write(&format!("{stem}.svg"), &svg)?;
        }
        Ok(())
    }

    fn plot(&mut self, name: &str, series: &[Series], style: &PlotStyle) -> Result<()> {
        if self.plots {
            self.write(name, &emit_plot(series, style)?)?;
        }
        Ok(())
    }
}

/// Runs one experiment, writing artifacts into `out_dir`.
pub fn execute(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunReport> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let mut sink = Sink { dir: out_dir, plots: cfg.plots, files: Vec::new() };
    sink.write("manifest.txt", &cfg.manifest())?;
    let mut warnings = Vec::new();
    let summary = match cfg.subcommand {
        Subcommand::Evolve | Subcommand::EvolveReduced => run_evolve(cfg, &mut sink, &mut warnings)?,
        Subcommand::Minimise => run_minimise(cfg, &mut sink)?,
        Subcommand::Jko => run_jko(cfg, &mut sink)?,
        Subcommand::Critical => run_critical(cfg, &mut sink)?,
        Subcommand::Gapscan => run_gapscan(cfg, &mut sink)?,
        Subcommand::Compare => match cfg.reference {
            Reference::Reduced => run_compare_reduced(cfg, &mut sink)?,
            Reference::Critical => run_compare_critical(cfg, &mut sink, &mut warnings)?,
        },
    };
    sink.write("summary.txt", &format!("{summary}\n"))?;
    Ok(RunReport { files: sink.files, summary, warnings })
}

fn trace_plot(sink: &mut Sink, traj: &Trajectory, relaxed: bool) -> Result<()> {
    let t: Vec<f64> = traj.trace.iter().map(|r| r.t).collect();
    let mut series = vec![Series::new("energy", t.clone(), traj.trace.iter().map(|r| r.energy).collect())];
    if relaxed {
        series.push(Series::new("relaxed", t, traj.trace.iter().map(|r| r.relaxed_energy).collect()));
    }
    sink.plot("energy.svg", &series, &PlotStyle { x_label: "t".into(), ..PlotStyle::titled("energy") })
}

fn run_evolve(cfg: &ExperimentConfig, sink: &mut Sink, warnings: &mut Vec<String>) -> Result<String> {
    let grid = cfg.grid()?;
    let pair0 = cfg.initial_pair(&grid)?;
    let traj = if cfg.subcommand == Subcommand::EvolveReduced {
        evolve_reduced(&pair0, cfg.delta, &cfg.solver())?
    } else {
        evolve(&pair0, &cfg.spec()?, &cfg.solver())?
    };
    warnings.extend(traj.warnings.iter().cloned());
    sink.pair("initial", &pair0, "t = 0")?;
    for (k, snap) in traj.snapshots.iter().enumerate() {
        sink.pair(&format!("snapshot_{k:03}"), &snap.pair, &format!("t = {}", snap.t))?;
    }
    sink.pair("final", &traj.final_pair, &format!("t = {}", traj.final_time))?;
    let mut buf = Vec::new();
    traj.write_trace_csv(&mut buf)?;
    sink.write("trace.csv", &String::from_utf8(buf).expect("csv is ascii"))?;
    trace_plot(sink, &traj, cfg.delta < 0.0)?;

    let f = &traj.final_pair;
    let (m1, m2) = f.masses();
    Ok(format!(
        "t_final={} steps={} steady={} energy={} overlap={:e} mass_rho={} mass_eta={}",
        traj.final_time,
        traj.steps,
        traj.reached_steady,
        traj.trace.last().map_or(f64::NAN, |r| r.energy),
        overlap(f),
        m1,
        m2
    ))
}

fn run_minimise(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<String> {
    let grid = cfg.grid()?;
    let pair0 = cfg.initial_pair(&grid)?;
    let trace = minimise(&cfg.spec()?, &pair0, &cfg.minimiser())?;
    let mut buf = Vec::new();
    trace.write_csv(&mut buf)?;
    sink.write("descent.csv", &String::from_utf8(buf).expect("csv is ascii"))?;
    sink.pair("initial", &pair0, "initial")?;
    sink.pair("final", &trace.final_pair, "minimiser")?;
    let iters: Vec<f64> = trace.rows.iter().map(|r| r.iter as f64).collect();
    let energies: Vec<f64> = trace.energies().collect();
    sink.plot(
        "energy.svg",
        &[Series::new("energy", iters, energies)],
        &PlotStyle { x_label: "iteration".into(), ..PlotStyle::titled("descent") },
    )?;
    let gap = gap_width(&trace.final_pair, cfg.supp_eps).map_or(f64::NAN, |g| g);
    Ok(format!(
        "iterations={} converged={} energy={} overlap={:e} gap={}",
        trace.iterations,
        trace.converged,
        trace.final_energy(),
        overlap(&trace.final_pair),
        gap
    ))
}

fn run_jko(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<String> {
    let grid = cfg.grid()?;
    let pair0 = cfg.initial_pair(&grid)?;
    let steps = jko_chain(&pair0, &cfg.spec()?, &cfg.jko(), cfg.jko_steps)?;
    let mut csv = String::from("step,t,objective,energy,w2_rho,w2_eta,overlap,iterations\n");
    for (k, s) in steps.iter().enumerate() {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            k + 1,
            (k + 1) as f64 * cfg.tau,
            s.objective,
            s.energy,
            s.moved.0,
            s.moved.1,
            overlap(&s.pair),
            s.descent.iterations
        );
        sink.pair(&format!("step_{:03}", k + 1), &s.pair, &format!("t = {}", (k + 1) as f64 * cfg.tau))?;
    }
    sink.write("jko.csv", &csv)?;
    let last = steps.last().expect("at least one step");
    Ok(format!(
        "steps={} t_final={} energy={} overlap={:e}",
        steps.len(),
        steps.len() as f64 * cfg.tau,
        last.energy,
        steps.iter().map(|s| overlap(&s.pair)).fold(0.0, f64::max)
    ))
}

fn run_critical(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<String> {
    let params = cfg.critical_params()?;
    let summary = critical_summary(&params, cfg.n_cells, cfg.supp_eps)?;
    sink.pair("profile", &params.profile(cfg.n_cells)?, &format!("{} kernel, alpha = {}", cfg.kernel, cfg.alpha))?;
    sink.write("critical.csv", &format!("{}\n{}\n", CriticalSummary::HEADER, summary.csv_row()))?;
    Ok(summary.csv_row())
}

fn formula_gap(kernel: &Kernel, half_length: f64, delta: f64) -> f64 {
    let r = match kernel {
        Kernel::Indicator { alpha } => gap_indicator(*alpha, delta),
        Kernel::Picard { alpha } => gap_picard(half_length, *alpha, delta),
    };
    r.map_or(f64::NAN, |g| g.r)
}

fn run_gapscan(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<String> {
    let grid = cfg.grid()?;
    let pair0 = cfg.initial_pair(&grid)?;
    let kernel = cfg.kernel_value()?;
    let minimiser = cfg.minimiser();
    let rows: Vec<(f64, f64, f64)> = cfg
        .scan_deltas()
        .into_par_iter()
        .map(|d| -> Result<(f64, f64, f64)> {
            let trace = minimise(&EnergySpec::nonlocal(d, kernel)?, &pair0, &minimiser)?;
            let measured = 0.5 * gap_width(&trace.final_pair, cfg.supp_eps)?;
            Ok((d, measured, formula_gap(&kernel, cfg.half_length, d)))
        })
        .collect::<Result<_>>()?;

    let mut csv = String::from("delta,r_measured,r_formula\n");
    let mut worst = 0.0f64;
    for (d, m, f) in &rows {
        let _ = writeln!(csv, "{d},{m},{f}");
        if f.is_finite() {
            worst = worst.max((m - f).abs());
        }
    }
    sink.write("gapscan.csv", &csv)?;
    let ds: Vec<f64> = rows.iter().map(|r| r.0).collect();
    sink.plot(
        "gapscan.svg",
        &[
            Series::new("measured", ds.clone(), rows.iter().map(|r| r.1).collect()),
            Series::new("formula", ds, rows.iter().map(|r| if r.2.is_finite() { r.2 } else { 0.0 }).collect()),
        ],
        &PlotStyle { x_label: "delta".into(), y_label: "r".into(), ..PlotStyle::titled(format!("gap, alpha = {}", cfg.alpha)) },
    )?;
    Ok(format!("points={} max_abs_diff={} dx={}", rows.len(), worst, grid.dx()))
}

fn run_compare_reduced(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<String> {
    let grid = cfg.grid()?;
    let pair0 = cfg.initial_pair(&grid)?;
    let solver = cfg.solver();
    let full = evolve(&pair0, &EnergySpec::local(cfg.delta)?, &solver)?;
    let reduced = evolve_reduced(&pair0, cfg.delta, &solver)?;
    let mut csv = String::from("t,l1_rho,l1_eta,l1\n");
    let mut worst = 0.0f64;
    for (k, (a, b)) in full.snapshots.iter().zip(&reduced.snapshots).enumerate() {
        let lr = lp_distance(&a.pair.rho, &b.pair.rho, Norm::L1)?;
        let le = lp_distance(&a.pair.eta, &b.pair.eta, Norm::L1)?;
        worst = worst.max(lr + le);
        let _ = writeln!(csv, "{},{},{},{}", a.t, lr, le, lr + le);
        let x = grid.centers();
        sink.plot(
            &format!("compare_{k:03}.svg"),
            &[
                Series::new("rho", x.clone(), a.pair.rho.values().to_vec()),
                Series::new("eta", x.clone(), a.pair.eta.values().to_vec()),
                Series::new("rho reduced", x.clone(), b.pair.rho.values().to_vec()),
                Series::new("eta reduced", x.clone(), b.pair.eta.values().to_vec()),
            ],
            &PlotStyle::titled(format!("t = {}", a.t)),
        )?;
    }
    sink.write("compare.csv", &csv)?;
    Ok(format!("max_l1={worst}"))
}

fn run_compare_critical(cfg: &ExperimentConfig, sink: &mut Sink, warnings: &mut Vec<String>) -> Result<String> {
    let grid = cfg.grid()?;
    let params = cfg.critical_params()?;
    let profile = params.profile(cfg.n_cells)?;
    let gap_formula = 2.0 * params.gap()?.r;
    let pair0 = cfg.initial_pair(&grid)?;
    let traj = evolve(&pair0, &params.spec(), &cfg.solver())?;
    warnings.extend(traj.warnings.iter().cloned());

    let mut csv = String::from("t,l1_rho,gap_measured,gap_formula\n");
    let mut states: Vec<(f64, &DensityPair)> = traj.snapshots.iter().map(|s| (s.t, &s.pair)).collect();
    if states.last().map(|s| s.0) != Some(traj.final_time) {
        states.push((traj.final_time, &traj.final_pair));
    }
    let mut last = (f64::NAN, f64::NAN);
    for (t, pair) in states {
        let l1 = lp_distance(&pair.rho, &profile.rho, Norm::L1)?;
        let gap = gap_width(pair, cfg.supp_eps)?;
        let _ = writeln!(csv, "{t},{l1},{gap},{gap_formula}");
        last = (l1, gap);
    }
    sink.write("compare.csv", &csv)?;
    sink.pair("profile", &profile, "closed form")?;
    sink.pair("final", &traj.final_pair, &format!("t = {}", traj.final_time))?;
    let x = grid.centers();
    sink.plot(
        "overlay.svg",
        &[
            Series::new("rho", x.clone(), traj.final_pair.rho.values().to_vec()),
            Series::new("eta", x.clone(), traj.final_pair.eta.values().to_vec()),
            Series::new("rho closed form", x.clone(), profile.rho.values().to_vec()),
            Series::new("eta closed form", x, profile.eta.values().to_vec()),
        ],
        &PlotStyle::titled(format!("t = {}", traj.final_time)),
    )?;
    Ok(format!("t_final={} l1_rho={} gap={} gap_formula={} dx={}", traj.final_time, last.0, last.1, gap_formula, grid.dx()))
}

/// Maps an error to the process exit status.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidParameter(_) | Error::Domain(_) | Error::MalformedCsv(_) => EXIT_CONFIG,
        Error::Instability { .. } | Error::StepTooSmall { .. } | Error::Infeasible | Error::EmptySupport(_) | Error::GridMismatch => {
            EXIT_SOLVER
        }
        Error::Io(_) => EXIT_IO,
    }
}

#[derive(Debug, Parser)]
#[command(name = "crossdiff", version, about = "Two-species cross-diffusion experiments")]
struct Args {
    /// Experiment to run; may also be set by `subcommand = ...` in the config.
    #[arg(value_enum)]
    subcommand: Option<Subcommand>,

    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Seed for randomised initial data; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
}

/// Entry point of the binary. Returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let text = match &args.config {
        Some(path) => match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", path.display());
                return EXIT_CONFIG;
            }
        },
        None => String::new(),
    };
    let cfg = ExperimentConfig::parse(&text, args.subcommand).and_then(|mut c| {
        if let Some(seed) = args.seed {
            c.seed = seed;
            c.validate()?;
        }
        Ok(c)
    });
    let cfg = match cfg {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    match execute(&cfg, &args.out) {
        Ok(report) => {
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            println!("{}", report.summary);
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip_through_manifest() {
        let cfg = ExperimentConfig::parse("delta = 0.9\noutput_times = 0.5, 1\n", Some(Subcommand::Evolve)).unwrap();
        let again = ExperimentConfig::parse(&cfg.manifest(), None).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(again.output_times, vec![0.5, 1.0]);
    }

    #[test]
    fn unknown_and_duplicate_keys_rejected() {
        let e = ExperimentConfig::parse("detla = 0.5", Some(Subcommand::Evolve)).unwrap_err();
        assert!(e.to_string().contains("detla"));
        assert_eq!(exit_code(&e), EXIT_CONFIG);
        assert!(ExperimentConfig::parse("delta = 0.5\ndelta = 0.6", Some(Subcommand::Evolve)).is_err());
        assert!(ExperimentConfig::parse("no equals sign", Some(Subcommand::Evolve)).is_err());
    }

    #[test]
    fn invalid_delta_and_grid_are_config_errors() {
        for text in ["delta = -1", "n_cells = 2", "energy = quartic", "delta = abc"] {
            let e = ExperimentConfig::parse(text, Some(Subcommand::Evolve)).unwrap_err();
            assert_eq!(exit_code(&e), EXIT_CONFIG, "{text}");
        }
    }

    #[test]
    fn subcommand_sources_must_agree() {
        assert!(ExperimentConfig::parse("subcommand = jko", None).is_ok());
        assert!(ExperimentConfig::parse("subcommand = jko", Some(Subcommand::Evolve)).is_err());
        assert!(ExperimentConfig::parse("", None).is_err());
    }

    #[test]
    fn none_values() {
        let cfg = ExperimentConfig::parse("steady_tol = 1e-10\nsupport_spread = none", Some(Subcommand::Minimise)).unwrap();
        assert_eq!(cfg.steady_tol, Some(1e-10));
        assert_eq!(cfg.support_spread, None);
    }

    #[test]
    fn scan_grid_includes_endpoints() {
        let mut cfg = ExperimentConfig::new(Subcommand::Gapscan);
        cfg.delta_min = -0.9;
        cfg.delta_max = -0.5;
        cfg.delta_count = 5;
        let d = cfg.scan_deltas();
        assert_eq!(d.len(), 5);
        assert_eq!(d[0], -0.9);
        assert!((d[4] + 0.5).abs() < 1e-15);
    }
}
