//! CSV and text writers for simulation output.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use tempfile::NamedTempFile;

use crate::sim::{ErrorMetrics, Mode, TraceLog, CROSSING_THRESHOLDS};

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Column names of `trace.csv`, in order.
pub fn trace_header(log: &TraceLog) -> Vec<String> {
    let first = &log.records[0].state;
    let (n, l) = (first.n_followers(), first.order());
    let leader_from = if log.mode == Mode::Nonlinear { 1 } else { 2 };
    let mut h = vec!["t".to_string(), "u0".to_string()];
    for a in 0..=n {
        h.extend((1..=l).map(|m| format!("x_{a}_{m}")));
    }
    for i in 1..=n {
        h.extend((leader_from..=l).map(|m| format!("xhat0_{i}_{m}")));
    }
    for i in 1..=n {
        h.extend((2..=l).map(|m| format!("xhat_{i}_{m}")));
    }
    for i in 1..=n {
        h.extend((2..=l).map(|m| format!("z0_{i}_{m}")));
    }
    for i in 1..=n {
        h.extend((2..=l).map(|m| format!("z_{i}_{m}")));
    }
    h.extend((1..=n).map(|i| format!("uhat_{i}")));
    h.extend((1..=n).map(|i| format!("d_{i}")));
    h.extend((1..=n).map(|i| format!("u_{i}")));
    h
}

pub fn write_trace_csv(path: &Path, log: &TraceLog) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(trace_header(log))?;
    let leader_from = if log.mode == Mode::Nonlinear { 0 } else { 1 };
    for r in &log.records {
        let st = &r.state;
        let (n, l) = (st.n_followers(), st.order());
        let mut row = vec![r.t, r.u0];
        row.extend(st.agents.transpose().iter());
        for i in 0..n {
            row.extend((leader_from..l).map(|c| r.leader_estimates[(i, c)]));
        }
        for i in 0..n {
            row.extend((1..l).map(|c| r.own_estimates[(i, c)]));
        }
        row.extend(st.leader.z.transpose().iter());
        row.extend(st.own.z.transpose().iter());
        row.extend(st.input.u_hat.iter());
        row.extend(st.input.d.iter());
        row.extend(r.control.iter());
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub const ERRORS_HEADER: [&str; 5] = ["t", "e_u", "e_0x", "e_x", "e"];

pub fn write_errors_csv(path: &Path, metrics: &ErrorMetrics) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(ERRORS_HEADER)?;
    for (k, t) in metrics.times.iter().enumerate() {
        let mut row = vec![t.to_string()];
        row.extend(metrics.signals.iter().map(|s| s.norms[k].to_string()));
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Smallest one-step change of any adaptive gain over the run.
pub fn min_gain_increment(log: &TraceLog) -> f64 {
    log.records
        .windows(2)
        .flat_map(|w| {
            let (a, b) = (&w[0].state.input.d, &w[1].state.input.d);
            a.iter().zip(b.iter()).map(|(x, y)| y - x).collect::<Vec<_>>()
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn summary_text(log: &TraceLog, metrics: &ErrorMetrics) -> String {
    let first = &log.records[0].state;
    let last = log.records.last().expect("nonempty");
    let horizon = last.t;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "mode: {}\norder: {}\nfollowers: {}\ndt: {}\nT: {}\nsteps: {}",
        match log.mode {
            Mode::Linear => "linear",
            Mode::Nonlinear => "nonlinear",
        },
        first.order(),
        first.n_followers(),
        log.dt,
        horizon,
        log.records.len() - 1
    );
    let _ = writeln!(out, "\nsignal  final        sup_last_quarter  first_below_1e-1  first_below_1e-2  first_below_1e-3");
    for s in &metrics.signals {
        let q = s.sup_between(&metrics.times, 0.75 * horizon, horizon);
        let _ = write!(out, "{:<7} {:<12.4e} {:<17.4e}", s.name, s.final_value, q);
        for c in &s.first_crossings {
            let cell = c.map_or("never".to_string(), |t| format!("{t:.3}"));
            let _ = write!(out, " {cell:<17}");
        }
        out.truncate(out.trim_end().len());
        out.push('\n');
    }
    debug_assert_eq!(CROSSING_THRESHOLDS.len(), 3);
    let d_end: Vec<String> = last.state.input.d.iter().map(|d| format!("{d:.6}")).collect();
    let _ = writeln!(out, "\nadaptive gains at T: [{}]", d_end.join(", "));
    let _ = writeln!(out, "smallest one-step gain change: {:.3e}", min_gain_increment(log));
    out
}
