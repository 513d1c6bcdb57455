//! Command-line front end: `simulate`, `certify` and `sweep`.

pub mod output;
pub mod scenario_file;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::observers::SignMode;
use crate::sim::{error_metrics, integrate, Scenario, SimError};
use crate::stability::{certify, eta_search_grid, CertifyOptions, StabilityReport};
pub use scenario_file::{load_scenario, parse_scenario, serialize_scenario, ScenarioFileError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;
pub const EXIT_CERTIFICATION_FAILED: i32 = 4;

pub const OUT_DIR_ENV: &str = "HOTRACK_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "hotrack", version, about = "Leader-follower tracking simulator and certificate checker")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate a scenario and write trace.csv, errors.csv and summary.txt.
    Simulate {
        scenario: PathBuf,
        #[arg(long, env = OUT_DIR_ENV, default_value = "hotrack-out")]
        out: PathBuf,
        #[command(flatten)]
        integration: IntegrationOverrides,
    },
    /// Check the convergence certificate for the scenario's agent model.
    Certify {
        scenario: PathBuf,
        /// Also try a log grid of eta values for every Lyapunov equation.
        #[arg(long)]
        eta_search: bool,
        #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
        format: ReportFormat,
        /// Also write report.txt and report.kv here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Certify (and optionally simulate) every point of a gain grid.
    Sweep {
        scenario: PathBuf,
        /// `name=start:stop:count`; names are k1.., c01.., r2.., tau, d0.
        #[arg(long = "grid", required = true)]
        grid: Vec<String>,
        /// Run a simulation per point and record final error norms.
        #[arg(long)]
        simulate: bool,
        #[arg(long)]
        eta_search: bool,
        #[arg(long, env = OUT_DIR_ENV, default_value = "hotrack-out")]
        out: PathBuf,
        #[command(flatten)]
        integration: IntegrationOverrides,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Kv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SgnModeArg {
    Hard,
    BoundaryLayer,
}

#[derive(Debug, Clone, Default, Args)]
pub struct IntegrationOverrides {
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long, value_enum)]
    pub sgn_mode: Option<SgnModeArg>,
    #[arg(long)]
    pub epsilon: Option<f64>,
}

impl IntegrationOverrides {
    pub fn apply(&self, s: &mut Scenario) -> Result<(), String> {
        if let Some(dt) = self.dt {
            s.dt = dt;
        }
        if let Some(t) = self.horizon {
            s.horizon = t;
        }
        let current_eps = match s.sign_mode {
            SignMode::BoundaryLayer { epsilon } => Some(epsilon),
            SignMode::Hard => None,
        };
        match (self.sgn_mode, self.epsilon.or(current_eps)) {
            (Some(SgnModeArg::Hard), _) => s.sign_mode = SignMode::Hard,
            (Some(SgnModeArg::BoundaryLayer), Some(epsilon)) => s.sign_mode = SignMode::BoundaryLayer { epsilon },
            (Some(SgnModeArg::BoundaryLayer), None) => {
                return Err("--sgn-mode boundary-layer needs --epsilon".into())
            }
            (None, Some(epsilon)) if self.epsilon.is_some() => {
                if current_eps.is_none() {
                    return Err("--epsilon needs --sgn-mode boundary-layer".into());
                }
                s.sign_mode = SignMode::BoundaryLayer { epsilon };
            }
            (None, _) => {}
        }
        Ok(())
    }
}

fn load_or_report(path: &Path) -> Result<Scenario, i32> {
    load_scenario(path).map_err(|e| {
        eprintln!("error: {e}");
        match e {
            ScenarioFileError::Io { .. } => EXIT_IO,
            _ => EXIT_VALIDATION,
        }
    })
}

fn prepare(path: &Path, overrides: &IntegrationOverrides) -> Result<Scenario, i32> {
    let mut s = load_or_report(path)?;
    if let Err(msg) = overrides.apply(&mut s) {
        eprintln!("error: {msg}");
        return Err(EXIT_VALIDATION);
    }
    if let Err(e) = s.validate() {
        eprintln!("error: {e}");
        return Err(EXIT_VALIDATION);
    }
    Ok(s)
}

fn exit_for_sim_error(e: &SimError) -> i32 {
    match e {
        SimError::InvalidScenario(_) | SimError::Dimension(_) => EXIT_VALIDATION,
        _ => EXIT_DIVERGED,
    }
}

pub fn run_simulate(path: &Path, out_dir: &Path, overrides: &IntegrationOverrides) -> i32 {
    let s = match prepare(path, overrides) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let log = match integrate(&s) {
        Ok(log) => log,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_for_sim_error(&e);
        }
    };
    let metrics = error_metrics(&log).expect("integration records t = 0");
    let written = std::fs::create_dir_all(out_dir)
        .map_err(|e| e.to_string())
        .and_then(|_| output::write_trace_csv(&out_dir.join("trace.csv"), &log).map_err(|e| e.to_string()))
        .and_then(|_| output::write_errors_csv(&out_dir.join("errors.csv"), &metrics).map_err(|e| e.to_string()))
        .and_then(|_| {
            std::fs::write(out_dir.join("summary.txt"), output::summary_text(&log, &metrics))
                .map_err(|e| e.to_string())
        });
    if let Err(e) = written {
        eprintln!("error: cannot write output to {}: {e}", out_dir.display());
        return EXIT_IO;
    }
    print!("{}", output::summary_text(&log, &metrics));
    EXIT_OK
}

fn options(eta_search: bool) -> CertifyOptions {
    let mut o = CertifyOptions::default();
    if eta_search {
        o.etas = eta_search_grid();
    }
    o
}

pub fn run_certify(path: &Path, eta_search: bool, format: ReportFormat, out: Option<&Path>) -> i32 {
    let s = match prepare(path, &IntegrationOverrides::default()) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let report = certify(&s, &options(eta_search));
    match format {
        ReportFormat::Text => print!("{}", report.to_text()),
        ReportFormat::Kv => print!("{}", report.to_key_values()),
    }
    if let Some(dir) = out {
        let res = std::fs::create_dir_all(dir)
            .and_then(|_| output::write_atomic(&dir.join("report.txt"), report.to_text().as_bytes()))
            .and_then(|_| output::write_atomic(&dir.join("report.kv"), report.to_key_values().as_bytes()));
        if let Err(e) = res {
            eprintln!("error: cannot write report to {}: {e}", dir.display());
            return EXIT_IO;
        }
    }
    if report.passed() {
        EXIT_OK
    } else {
        EXIT_CERTIFICATION_FAILED
    }
}

/// One axis of a sweep grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridAxis {
    pub name: String,
    pub values: Vec<f64>,
}

/// Parses `name=start:stop:count` into evenly spaced values.
pub fn parse_grid_axis(axis: &str) -> Result<GridAxis, String> {
    let (name, range) = axis
        .split_once('=')
        .ok_or_else(|| format!("grid axis \"{axis}\" must look like name=start:stop:count"))?;
    let parts: Vec<&str> = range.split(':').collect();
    let [start, stop, count] = parts.as_slice() else {
        return Err(format!("grid axis \"{axis}\" must look like name=start:stop:count"));
    };
    let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("grid axis \"{axis}\": {e}"));
    let (start, stop) = (parse(start)?, parse(stop)?);
    let count: usize = count
        .trim()
        .parse()
        .map_err(|e| format!("grid axis \"{axis}\": count: {e}"))?;
    if count == 0 {
        return Err(format!("grid axis \"{axis}\" is empty"));
    }
    if !(start.is_finite() && stop.is_finite()) {
        return Err(format!("grid axis \"{axis}\": bounds must be finite"));
    }
    let values = if count == 1 {
        vec![start]
    } else {
        (0..count)
            .map(|k| start + (stop - start) * k as f64 / (count - 1) as f64)
            .collect()
    };
    Ok(GridAxis {
        name: name.trim().to_string(),
        values,
    })
}

/// Sets one named gain on every follower or order it refers to.
pub fn set_parameter(s: &mut Scenario, name: &str, value: f64) -> Result<(), String> {
    let l = s.order;
    let index = |prefix: &str, lo: usize| -> Option<usize> {
        name.strip_prefix(prefix)
            .and_then(|m| m.parse::<usize>().ok())
            .filter(|m| (lo..=l).contains(m))
    };
    match name {
        "tau" => s.gains.tau.fill(value),
        "d0" => s.gains.d0.fill(value),
        _ => {
            if let Some(m) = index("c0", 1) {
                s.gains.c0[m - 1] = value;
            } else if let Some(m) = index("k", 1) {
                s.gains.k[m - 1] = value;
            } else if let Some(m) = index("r", 2) {
                s.gains.r[m - 2] = value;
            } else {
                return Err(format!(
                    "unknown grid parameter \"{name}\" (use k1..k{l}, c01..c0{l}, r2..r{l}, tau, d0)"
                ));
            }
        }
    }
    Ok(())
}

/// Cartesian product of the axes, first axis varying slowest.
pub fn grid_points(axes: &[GridAxis]) -> Vec<Vec<f64>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.iter()
            .flat_map(|p| {
                axis.values.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub values: Vec<f64>,
    pub verdict: &'static str,
    pub failing: Vec<String>,
    /// `sim_status` and the four final norms, when simulated.
    pub simulation: Option<(String, [f64; 4])>,
    pub report: Option<StabilityReport>,
}

fn sweep_point(base: &Scenario, axes: &[GridAxis], values: &[f64], opts: &CertifyOptions, simulate: bool) -> SweepRow {
    let mut s = base.clone();
    for (axis, &v) in axes.iter().zip(values) {
        set_parameter(&mut s, &axis.name, v).expect("axis names checked before the sweep");
    }
    let violations = s.violations();
    if !violations.is_empty() {
        return SweepRow {
            values: values.to_vec(),
            verdict: "invalid",
            failing: violations,
            simulation: None,
            report: None,
        };
    }
    let report = certify(&s, opts);
    let simulation = simulate.then(|| match integrate(&s) {
        Ok(log) => {
            let m = error_metrics(&log).expect("nonempty");
            ("completed".to_string(), std::array::from_fn(|j| m.signals[j].final_value))
        }
        Err(e) => (format!("{e}"), [f64::NAN; 4]),
    });
    SweepRow {
        values: values.to_vec(),
        verdict: if report.passed() { "pass" } else { "fail" },
        failing: report.failing().into_iter().map(String::from).collect(),
        simulation,
        report: Some(report),
    }
}

/// Evaluates every grid point in parallel.
pub fn sweep(base: &Scenario, axes: &[GridAxis], opts: &CertifyOptions, simulate: bool) -> Result<Vec<SweepRow>, String> {
    if axes.is_empty() {
        return Err("empty grid".into());
    }
    let mut probe = base.clone();
    for axis in axes {
        set_parameter(&mut probe, &axis.name, 1.0)?;
    }
    let points = grid_points(axes);
    Ok(points
        .par_iter()
        .map(|p| sweep_point(base, axes, p, opts, simulate))
        .collect())
}

pub fn sweep_csv(axes: &[GridAxis], rows: &[SweepRow], simulate: bool) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = vec!["point".into()];
    header.extend(axes.iter().map(|a| a.name.clone()));
    header.extend(["verdict".into(), "failing".into()]);
    if simulate {
        header.extend(["sim_status", "final_e_u", "final_e_0x", "final_e_x", "final_e"].map(String::from));
    }
    w.write_record(&header)?;
    for (idx, r) in rows.iter().enumerate() {
        let mut rec = vec![idx.to_string()];
        rec.extend(r.values.iter().map(|v| v.to_string()));
        rec.push(r.verdict.to_string());
        rec.push(r.failing.join(";"));
        if simulate {
            match &r.simulation {
                Some((status, norms)) => {
                    rec.push(status.clone());
                    rec.extend(norms.iter().map(|v| v.to_string()));
                }
                None => rec.extend(std::iter::repeat_n(String::new(), 5)),
            }
        }
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

pub fn run_sweep(
    path: &Path,
    grid: &[String],
    simulate: bool,
    eta_search: bool,
    out_dir: &Path,
    overrides: &IntegrationOverrides,
) -> i32 {
    let s = match prepare(path, overrides) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let axes: Result<Vec<GridAxis>, String> = grid.iter().map(|g| parse_grid_axis(g)).collect();
    let rows = match axes.and_then(|axes| sweep(&s, &axes, &options(eta_search), simulate).map(|r| (axes, r))) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_VALIDATION;
        }
    };
    let (axes, rows) = rows;
    let points_dir = out_dir.join("points");
    let written = std::fs::create_dir_all(&points_dir).and_then(|_| {
        rows.par_iter().enumerate().try_for_each(|(idx, r)| {
            let text = match &r.report {
                Some(rep) => rep.to_text(),
                None => format!("invalid point:\n  {}\n", r.failing.join("\n  ")),
            };
            output::write_atomic(&points_dir.join(format!("point_{idx:05}.txt")), text.as_bytes())
        })
    });
    let csv = sweep_csv(&axes, &rows, simulate).map_err(std::io::Error::other);
    let written = written
        .and(csv)
        .and_then(|bytes| output::write_atomic(&out_dir.join("sweep.csv"), &bytes));
    if let Err(e) = written {
        eprintln!("error: cannot write sweep output to {}: {e}", out_dir.display());
        return EXIT_IO;
    }
    let passed = rows.iter().filter(|r| r.verdict == "pass").count();
    println!("{} points, {passed} certified, written to {}", rows.len(), out_dir.display());
    EXIT_OK
}

pub fn run(cli: Cli) -> i32 {
    match cli.command {
        Command::Simulate {
            scenario,
            out,
            integration,
        } => run_simulate(&scenario, &out, &integration),
        Command::Certify {
            scenario,
            eta_search,
            format,
            out,
        } => run_certify(&scenario, eta_search, format, out.as_deref()),
        Command::Sweep {
            scenario,
            grid,
            simulate,
            eta_search,
            out,
            integration,
        } => run_sweep(&scenario, &grid, simulate, eta_search, &out, &integration),
    }
}
