//! Distributed and local observers run by each follower.
//!
//! All functions here are pure derivative evaluations. Estimates (`x̂`) are
//! never integrated on their own: they are rebuilt from the internal `z`
//! states on every call, so the output identities hold exactly.
//!
//! Estimate matrices are `N × l` with column `m - 1` holding state `m`:
//! - leader estimates: column 0 is `x̂_{0,i,1}` (integrated in the nonlinear
//!   variant, zero and unused in the linear one);
//! - own-state estimates: column 0 is the measured `x_{i,1}`.
//!
//! Internal states `z` are `N × (l - 1)` with column `m - 2` holding `z_{·,m}`.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, DimensionMismatch};
use crate::graph::Topology;
use crate::models::Nonlinearity;

/// Sign function used by the adaptive input observer.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum SignMode {
    /// Pointwise signum with `sgn(0) = 0`.
    #[default]
    Hard,
    /// `tanh(x / epsilon)`.
    BoundaryLayer { epsilon: f64 },
}

impl SignMode {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            SignMode::Hard => {
                if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            SignMode::BoundaryLayer { epsilon } => (x / epsilon).tanh(),
        }
    }
}

/// Controller and observer gains.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSet {
    /// `k_1..k_l`.
    pub k: Vec<f64>,
    /// `c_{0,1}..c_{0,l}`; `c_{0,1}` only matters for the nonlinear observer.
    pub c0: Vec<f64>,
    /// `r_2..r_l`.
    pub r: Vec<f64>,
    /// Adaptation rates `τ_1..τ_N`.
    pub tau: Vec<f64>,
    /// Initial adaptive gains `d_i(0)`.
    pub d0: Vec<f64>,
}

pub const DEFAULT_TAU: f64 = 1.0;
pub const DEFAULT_D0: f64 = 0.1;

impl GainSet {
    /// Uniform gains with the default `τ` and `d(0)`.
    pub fn uniform(l: usize, n: usize, k: f64, c0: f64, r: f64) -> Self {
        Self {
            k: vec![k; l],
            c0: vec![c0; l],
            r: vec![r; l - 1],
            tau: vec![DEFAULT_TAU; n],
            d0: vec![DEFAULT_D0; n],
        }
    }

    /// `c_{0,m}` for one-based `m`.
    pub fn c0(&self, m: usize) -> f64 {
        self.c0[m - 1]
    }

    /// `r_m` for `m >= 2`.
    pub fn r(&self, m: usize) -> f64 {
        self.r[m - 2]
    }

    /// `k_m` for one-based `m`.
    pub fn k(&self, m: usize) -> f64 {
        self.k[m - 1]
    }

    /// Every violated constraint, prefixed with the field name.
    pub fn violations(&self, l: usize, n: usize) -> Vec<String> {
        let mut out = Vec::new();
        let fields: [(&str, &[f64], usize); 5] = [
            ("k", &self.k, l),
            ("c0", &self.c0, l),
            ("r", &self.r, l - 1),
            ("tau", &self.tau, n),
            ("d0", &self.d0, n),
        ];
        for (name, values, len) in fields {
            if values.len() != len {
                out.push(format!("gains.{name}: expected {len} entries, found {}", values.len()));
            }
            for (idx, v) in values.iter().enumerate() {
                if !(v.is_finite() && *v > 0.0) {
                    out.push(format!("gains.{name}[{idx}] = {v} must be finite and strictly positive"));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InputObserverState {
    /// `û_{0,i}`.
    pub u_hat: DVector<f64>,
    /// Adaptive gains `d_i`.
    pub d: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeaderStateObserverState {
    /// `x̂_{0,i,1}`, integrated only in the nonlinear variant.
    pub first: Option<DVector<f64>>,
    /// `z_{0,i,2..l}`.
    pub z: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfStateObserverState {
    /// `z_{i,2..l}`.
    pub z: DMatrix<f64>,
}

/// `Σ_j a_ij (û_i - û_j) + b_i (û_i - u_0)` for each follower.
pub fn input_disagreement(u_hat: &DVector<f64>, topology: &Topology, u0: f64) -> Vec<f64> {
    let consensus = topology.disagreement(u_hat.as_slice());
    consensus
        .into_iter()
        .enumerate()
        .map(|(i, c)| c + topology.leader_weight(i) * (u_hat[i] - u0))
        .collect()
}

/// Adaptive leader-input observer. Returns `(dû, dd)`.
pub fn input_observer_derivative(
    s: &InputObserverState,
    topology: &Topology,
    u0: f64,
    tau: &[f64],
    sign: SignMode,
) -> Result<(DVector<f64>, DVector<f64>), DimensionMismatch> {
    let n = topology.n_followers();
    check_len("input observer estimates", n, s.u_hat.len())?;
    check_len("input observer gains", n, s.d.len())?;
    check_len("adaptation rates", n, tau.len())?;
    let sigma = input_disagreement(&s.u_hat, topology, u0);
    let du = DVector::from_fn(n, |i, _| -sigma[i] - s.d[i] * sign.apply(sigma[i]));
    let dd = DVector::from_fn(n, |i, _| tau[i] * sigma[i].abs());
    Ok((du, dd))
}

fn check_leader_state(
    s: &LeaderStateObserverState,
    topology: &Topology,
    u_hat: &DVector<f64>,
    c0: &[f64],
) -> Result<usize, DimensionMismatch> {
    let n = topology.n_followers();
    check_len("leader observer rows", n, s.z.nrows())?;
    let l = s.z.ncols() + 1;
    check_len("leader observer gains", l, c0.len())?;
    check_len("input estimates", n, u_hat.len())?;
    if let Some(first) = &s.first {
        check_len("leader first-state estimates", n, first.len())?;
    }
    Ok(l)
}

impl LeaderStateObserverState {
    pub fn zeros(n: usize, l: usize, nonlinear: bool) -> Self {
        Self {
            first: nonlinear.then(|| DVector::zeros(n)),
            z: DMatrix::zeros(n, l - 1),
        }
    }

    /// Leader estimates `x̂_{0,i,m}` as an `N × l` matrix.
    pub fn estimates(&self, topology: &Topology, x01: f64, c0: &[f64]) -> DMatrix<f64> {
        let (n, l) = (self.z.nrows(), self.z.ncols() + 1);
        let mut est = DMatrix::zeros(n, l);
        for i in 0..n {
            if let Some(first) = &self.first {
                est[(i, 0)] = first[i];
            }
            est[(i, 1)] = self.z[(i, 0)] + topology.leader_weight(i) * c0[1] * x01;
            for m in 3..=l {
                est[(i, m - 1)] = self.z[(i, m - 2)] + c0[m - 1] * est[(i, m - 2)];
            }
        }
        est
    }
}

impl SelfStateObserverState {
    pub fn zeros(n: usize, l: usize) -> Self {
        Self {
            z: DMatrix::zeros(n, l - 1),
        }
    }

    /// Own-state estimates as an `N × l` matrix; column 0 is the measurement.
    pub fn estimates(&self, x1: &[f64], r: &[f64]) -> DMatrix<f64> {
        let (n, l) = (self.z.nrows(), self.z.ncols() + 1);
        let mut est = DMatrix::zeros(n, l);
        for i in 0..n {
            est[(i, 0)] = x1[i];
            for m in 2..=l {
                est[(i, m - 1)] = self.z[(i, m - 2)] + r[m - 2] * est[(i, m - 2)];
            }
        }
        est
    }
}

/// Distributed leader-state observer, linear agents. Returns `dz_0`.
pub fn leader_state_observer_derivative_linear(
    s: &LeaderStateObserverState,
    topology: &Topology,
    x01: f64,
    u_hat: &DVector<f64>,
    c0: &[f64],
) -> Result<DMatrix<f64>, DimensionMismatch> {
    leader_state_derivative(s, topology, x01, u_hat, c0, None).map(|(_, dz)| dz)
}

/// Distributed leader-state observer, nonlinear agents. Returns `(dx̂_{0,·,1}, dz_0)`.
///
/// `s.first` holds `x̂_{0,i,1}`; a missing vector is treated as zeros.
pub fn leader_state_observer_derivative_nonlinear(
    s: &LeaderStateObserverState,
    topology: &Topology,
    x01: f64,
    u_hat: &DVector<f64>,
    c0: &[f64],
    f: &Nonlinearity,
) -> Result<(DVector<f64>, DMatrix<f64>), DimensionMismatch> {
    let (first, dz) = leader_state_derivative(s, topology, x01, u_hat, c0, Some(f))?;
    Ok((first.expect("nonlinear variant computes the first-state derivative"), dz))
}

fn leader_state_derivative(
    s: &LeaderStateObserverState,
    topology: &Topology,
    x01: f64,
    u_hat: &DVector<f64>,
    c0: &[f64],
    nonlinear: Option<&Nonlinearity>,
) -> Result<(Option<DVector<f64>>, DMatrix<f64>), DimensionMismatch> {
    let l = check_leader_state(s, topology, u_hat, c0)?;
    let n = topology.n_followers();
    let est = s.estimates(topology, x01, c0);
    let f = nonlinear.filter(|f| !f.is_zero());

    let second: Vec<f64> = est.column(1).iter().copied().collect();
    let consensus2 = topology.disagreement(&second);
    let next = |i: usize, m: usize| if m < l { est[(i, m)] } else { u_hat[i] };

    let mut dz = DMatrix::zeros(n, l - 1);
    for i in 0..n {
        let b = topology.leader_weight(i);
        let chain: Vec<f64> = est.row(i).iter().copied().collect();
        let c2 = c0[1];
        let mut d2 = -b * c2 * s.z[(i, 0)] - b * b * c2 * c2 * x01 - c2 * consensus2[i] + next(i, 2);
        if let Some(f) = f {
            d2 += f.evaluate(2, &chain) - b * c2 * f.evaluate(1, &[x01]);
        }
        dz[(i, 0)] = d2;
        for m in 3..=l {
            let cm = c0[m - 1];
            let mut dm = -cm * s.z[(i, m - 2)] - cm * cm * est[(i, m - 2)] + next(i, m);
            if let Some(f) = f {
                dm += f.evaluate(m, &chain) - cm * f.evaluate(m - 1, &chain);
            }
            dz[(i, m - 2)] = dm;
        }
    }

    let first = nonlinear.map(|_| {
        let x01_hat: Vec<f64> = est.column(0).iter().copied().collect();
        let consensus1 = topology.disagreement(&x01_hat);
        DVector::from_fn(n, |i, _| {
            let b = topology.leader_weight(i);
            let mut d = -c0[0] * (consensus1[i] + b * (x01_hat[i] - x01)) + est[(i, 1)];
            if let Some(f) = f {
                d += f.evaluate(1, &x01_hat[i..=i]);
            }
            d
        })
    });
    Ok((first, dz))
}

fn check_self_state(
    s: &SelfStateObserverState,
    x1: &[f64],
    u: &[f64],
    r: &[f64],
) -> Result<usize, DimensionMismatch> {
    let n = s.z.nrows();
    let l = s.z.ncols() + 1;
    check_len("measured first states", n, x1.len())?;
    check_len("control inputs", n, u.len())?;
    check_len("self observer gains", l - 1, r.len())?;
    Ok(l)
}

/// Local own-state observer, linear agents. Returns `dz`.
pub fn self_state_observer_derivative_linear(
    s: &SelfStateObserverState,
    x1: &[f64],
    u: &[f64],
    r: &[f64],
) -> Result<DMatrix<f64>, DimensionMismatch> {
    self_state_derivative(s, x1, u, r, None)
}

/// Local own-state observer, nonlinear agents. `f_m` sees `(x_{i,1}, x̂_{i,2..m})`.
pub fn self_state_observer_derivative_nonlinear(
    s: &SelfStateObserverState,
    x1: &[f64],
    u: &[f64],
    r: &[f64],
    f: &Nonlinearity,
) -> Result<DMatrix<f64>, DimensionMismatch> {
    self_state_derivative(s, x1, u, r, Some(f))
}

fn self_state_derivative(
    s: &SelfStateObserverState,
    x1: &[f64],
    u: &[f64],
    r: &[f64],
    f: Option<&Nonlinearity>,
) -> Result<DMatrix<f64>, DimensionMismatch> {
    let l = check_self_state(s, x1, u, r)?;
    let n = s.z.nrows();
    let est = s.estimates(x1, r);
    let f = f.filter(|f| !f.is_zero());
    let mut dz = DMatrix::zeros(n, l - 1);
    for i in 0..n {
        let chain: Vec<f64> = est.row(i).iter().copied().collect();
        for m in 2..=l {
            let rm = r[m - 2];
            let next = if m < l { est[(i, m)] } else { u[i] };
            let mut dm = -rm * s.z[(i, m - 2)] - rm * rm * est[(i, m - 2)] + next;
            if let Some(f) = f {
                dm += f.evaluate(m, &chain) - rm * f.evaluate(m - 1, &chain);
            }
            dz[(i, m - 2)] = dm;
        }
    }
    Ok(dz)
}
