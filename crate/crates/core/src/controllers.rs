//! Follower control laws built from measured first states and observer outputs.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, DimensionMismatch};
use crate::graph::Topology;

/// Inputs `u_1..u_N` applied by the followers.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlInputs(pub DVector<f64>);

impl ControlInputs {
    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }
}

fn check_estimates(
    n: usize,
    l: usize,
    own: &DMatrix<f64>,
    leader: &DMatrix<f64>,
    u_hat: &DVector<f64>,
) -> Result<(), DimensionMismatch> {
    check_len("own-state estimate rows", n, own.nrows())?;
    check_len("own-state estimate columns", l, own.ncols())?;
    check_len("leader estimate rows", n, leader.nrows())?;
    check_len("leader estimate columns", l, leader.ncols())?;
    check_len("input estimates", n, u_hat.len())
}

/// Estimate feedback `-Σ_{m≥2} k_m (x̂_{i,m} - x̂_{0,i,m}) + û_{0,i}`.
fn estimate_feedback(i: usize, own: &DMatrix<f64>, leader: &DMatrix<f64>, u_hat: &DVector<f64>, k: &[f64]) -> f64 {
    let l = k.len();
    let mut u = u_hat[i];
    for m in 2..=l {
        u -= k[m - 1] * (own[(i, m - 1)] - leader[(i, m - 1)]);
    }
    u
}

/// Linear-agent law: relative first-state feedback over neighbours and the
/// leader link, plus estimate feedback.
///
/// `x1` holds `x_{0,1}, x_{1,1}, ..., x_{N,1}`. Estimate matrices are `N × l`;
/// their first columns are ignored here.
pub fn linear_control(
    topology: &Topology,
    x1: &[f64],
    own: &DMatrix<f64>,
    leader: &DMatrix<f64>,
    u_hat: &DVector<f64>,
    k: &[f64],
) -> Result<ControlInputs, DimensionMismatch> {
    let n = topology.n_followers();
    check_len("measured first states", n + 1, x1.len())?;
    check_estimates(n, k.len(), own, leader, u_hat)?;
    let followers = &x1[1..];
    let consensus = topology.disagreement(followers);
    Ok(ControlInputs(DVector::from_fn(n, |i, _| {
        let relative = consensus[i] + topology.leader_weight(i) * (followers[i] - x1[0]);
        -k[0] * relative + estimate_feedback(i, own, leader, u_hat, k)
    })))
}

/// Nonlinear-agent law: first-state error against the follower's own estimate
/// `x̂_{0,i,1}` (leader estimates column 0), no neighbour position term.
pub fn nonlinear_control(
    x1: &[f64],
    own: &DMatrix<f64>,
    leader: &DMatrix<f64>,
    u_hat: &DVector<f64>,
    k: &[f64],
) -> Result<ControlInputs, DimensionMismatch> {
    let n = x1.len();
    check_estimates(n, k.len(), own, leader, u_hat)?;
    Ok(ControlInputs(DVector::from_fn(n, |i, _| {
        -k[0] * (x1[i] - leader[(i, 0)]) + estimate_feedback(i, own, leader, u_hat, k)
    })))
}
