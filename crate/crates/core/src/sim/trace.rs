//! Recorded trajectories and the tracking/estimation error signals.
//!
//! Error vectors are stacked by state order, `N` entries per order:
//! - `e_u`: `û_i - u_0`;
//! - `e_0x`: `x̂_{0,i,m} - x_{0,m}` for `m = 2..l` (linear) or `1..l` (nonlinear);
//! - `e_x`: `x̂_{i,m} - x_{i,m}` for `m = 2..l`;
//! - `e`: `x_{i,m} - x_{0,m}` for `m = 1..l`.

use nalgebra::{DMatrix, DVector};

use super::{Mode, Scenario, SimError, SystemState};

/// Thresholds reported by `error_metrics`.
pub const CROSSING_THRESHOLDS: [f64; 3] = [1e-1, 1e-2, 1e-3];

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub state: SystemState,
    pub u0: f64,
    pub leader_estimates: DMatrix<f64>,
    pub own_estimates: DMatrix<f64>,
    pub control: DVector<f64>,
}

impl TraceRecord {
    pub fn new(t: f64, state: SystemState, s: &Scenario) -> Result<Self, SimError> {
        let snap = state.snapshot(t, s)?;
        Ok(Self {
            t,
            u0: snap.u0,
            leader_estimates: snap.leader_estimates,
            own_estimates: snap.own_estimates,
            control: snap.control,
            state,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSignals {
    pub e_u: Vec<f64>,
    pub e_0x: Vec<f64>,
    pub e_x: Vec<f64>,
    pub e: Vec<f64>,
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

impl ErrorSignals {
    /// `[‖e_u‖∞, ‖e_0x‖∞, ‖e_x‖∞, ‖e‖∞]`.
    pub fn sup_norms(&self) -> [f64; 4] {
        [sup(&self.e_u), sup(&self.e_0x), sup(&self.e_x), sup(&self.e)]
    }
}

/// One record per grid point `t_k = k dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceLog {
    pub mode: Mode,
    pub dt: f64,
    pub records: Vec<TraceRecord>,
}

impl TraceLog {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn errors_at(&self, k: usize) -> ErrorSignals {
        let r = &self.records[k];
        let agents = &r.state.agents;
        let (n, l) = (agents.nrows() - 1, agents.ncols());
        let first_estimated = if self.mode == Mode::Nonlinear { 1 } else { 2 };
        let stack = |from: usize, f: &dyn Fn(usize, usize) -> f64| -> Vec<f64> {
            (from..=l).flat_map(|m| (0..n).map(move |i| (i, m))).map(|(i, m)| f(i, m)).collect()
        };
        ErrorSignals {
            e_u: r.state.input.u_hat.iter().map(|u| u - r.u0).collect(),
            e_0x: stack(first_estimated, &|i, m| r.leader_estimates[(i, m - 1)] - agents[(0, m - 1)]),
            e_x: stack(2, &|i, m| r.own_estimates[(i, m - 1)] - agents[(i + 1, m - 1)]),
            e: stack(1, &|i, m| agents[(i + 1, m - 1)] - agents[(0, m - 1)]),
        }
    }

    /// Per-step `[‖e_u‖∞, ‖e_0x‖∞, ‖e_x‖∞, ‖e‖∞]`.
    pub fn error_norms(&self) -> Vec<[f64; 4]> {
        (0..self.records.len()).map(|k| self.errors_at(k).sup_norms()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalMetrics {
    pub name: &'static str,
    pub norms: Vec<f64>,
    pub final_value: f64,
    /// First time the norm is at or below each of `CROSSING_THRESHOLDS`.
    pub first_crossings: Vec<Option<f64>>,
}

impl SignalMetrics {
    fn new(name: &'static str, times: &[f64], norms: Vec<f64>) -> Self {
        let first_crossings = CROSSING_THRESHOLDS
            .iter()
            .map(|&th| norms.iter().position(|&v| v <= th).map(|k| times[k]))
            .collect();
        Self {
            name,
            final_value: *norms.last().expect("nonempty"),
            norms,
            first_crossings,
        }
    }

    /// Sup of the norm over grid points with `t_a <= t <= t_b`.
    pub fn sup_between(&self, times: &[f64], t_a: f64, t_b: f64) -> f64 {
        times
            .iter()
            .zip(&self.norms)
            .filter(|(t, _)| **t >= t_a && **t <= t_b)
            .fold(0.0, |a, (_, v)| a.max(*v))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMetrics {
    pub times: Vec<f64>,
    /// `e_u`, `e_0x`, `e_x`, `e` in that order.
    pub signals: [SignalMetrics; 4],
}

pub const SIGNAL_NAMES: [&str; 4] = ["e_u", "e_0x", "e_x", "e"];

pub fn error_metrics(log: &TraceLog) -> Result<ErrorMetrics, SimError> {
    if log.records.is_empty() {
        return Err(SimError::EmptyLog);
    }
    let times = log.times();
    let norms = log.error_norms();
    let signals = std::array::from_fn(|j| {
        SignalMetrics::new(SIGNAL_NAMES[j], &times, norms.iter().map(|row| row[j]).collect())
    });
    Ok(ErrorMetrics { times, signals })
}
