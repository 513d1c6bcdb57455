//! Closed-loop simulation of the leader, the followers and every observer.

mod integrator;
mod trace;

pub use integrator::{integrate, integrate_with, rk4_step, DIVERGENCE_THRESHOLD, STEP_GROWTH_LIMIT};
pub use trace::{error_metrics, ErrorMetrics, ErrorSignals, SignalMetrics, TraceLog, TraceRecord, CROSSING_THRESHOLDS, SIGNAL_NAMES};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::controllers::{linear_control, nonlinear_control};
use crate::error::DimensionMismatch;
use crate::graph::Topology;
use crate::models::{linear_drift, nonlinear_drift, LeaderInput, ModelError, Nonlinearity};
use crate::observers::{
    input_observer_derivative, leader_state_observer_derivative_linear,
    leader_state_observer_derivative_nonlinear, self_state_observer_derivative_linear,
    self_state_observer_derivative_nonlinear, GainSet, InputObserverState, LeaderStateObserverState,
    SelfStateObserverState, SignMode,
};

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_HORIZON: f64 = 40.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("non-finite state at t = {0}")]
    NonFiniteState(f64),
    #[error("state diverged at t = {0}")]
    Diverged(f64),
    #[error("state norm grew by more than {STEP_GROWTH_LIMIT:e}x in one step at t = {0}; reduce dt")]
    StepTooLarge(f64),
    #[error("empty trace")]
    EmptyLog,
    #[error("invalid scenario: {}", .0.join("; "))]
    InvalidScenario(Vec<String>),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dimension(#[from] DimensionMismatch),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Linear,
    Nonlinear,
}

/// Explicit initial observer internals; anything left `None` starts at zero.
/// `d_i(0)` always comes from the gain set.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObserverInit {
    pub u_hat: Option<Vec<f64>>,
    /// `x̂_{0,i,1}`, nonlinear mode only.
    pub leader_first: Option<Vec<f64>>,
    /// `N × (l - 1)`.
    pub leader_z: Option<DMatrix<f64>>,
    /// `N × (l - 1)`.
    pub own_z: Option<DMatrix<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub mode: Mode,
    pub order: usize,
    pub topology: Topology,
    pub gains: GainSet,
    pub leader_input: LeaderInput,
    pub nonlinearity: Nonlinearity,
    /// `(N + 1) × l`; row 0 is the leader.
    pub initial_agents: DMatrix<f64>,
    pub initial_observers: ObserverInit,
    pub horizon: f64,
    pub dt: f64,
    pub sign_mode: SignMode,
}

/// Leader at rest at the origin, follower first states `1, -1, 2, -2, ...`,
/// every higher state zero.
pub fn default_initial_agents(n: usize, l: usize) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(n + 1, l);
    for i in 0..n {
        let magnitude = (i / 2 + 1) as f64;
        x[(i + 1, 0)] = if i % 2 == 0 { magnitude } else { -magnitude };
    }
    x
}

impl Scenario {
    /// Defaults: zero leader input, no nonlinearity, default initial states,
    /// `T = 40`, `dt = 1e-3`, hard sign.
    pub fn new(mode: Mode, order: usize, topology: Topology, gains: GainSet) -> Self {
        let n = topology.n_followers();
        Self {
            mode,
            order,
            topology,
            gains,
            leader_input: LeaderInput::zero(),
            nonlinearity: Nonlinearity::none(order),
            initial_agents: default_initial_agents(n, order),
            initial_observers: ObserverInit::default(),
            horizon: DEFAULT_HORIZON,
            dt: DEFAULT_DT,
            sign_mode: SignMode::Hard,
        }
    }

    pub fn n_followers(&self) -> usize {
        self.topology.n_followers()
    }

    /// Every violated constraint; empty when the scenario is runnable.
    pub fn violations(&self) -> Vec<String> {
        let (n, l) = (self.n_followers(), self.order);
        let mut out = Vec::new();
        if l < 3 {
            out.push(format!("system.order = {l} must be at least 3"));
            return out;
        }
        out.extend(self.gains.violations(l, n));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            out.push(format!("integration.dt = {} must be finite and positive", self.dt));
        }
        if !(self.horizon.is_finite() && self.horizon >= self.dt) {
            out.push(format!("integration.T = {} must be finite and at least dt", self.horizon));
        }
        if let SignMode::BoundaryLayer { epsilon } = self.sign_mode {
            if !(epsilon.is_finite() && epsilon > 0.0) {
                out.push(format!("integration.epsilon = {epsilon} must be finite and positive"));
            }
        }
        if self.nonlinearity.order() != l {
            out.push(format!(
                "nonlinearity: {} Lipschitz constants for order {l}",
                self.nonlinearity.order()
            ));
        }
        if self.mode == Mode::Linear && !self.nonlinearity.is_zero() {
            out.push("nonlinearity: linear mode requires kind = \"none\"".into());
        }
        if self.initial_agents.shape() != (n + 1, l) {
            out.push(format!(
                "initial_conditions.agents: expected {}x{l}, found {}x{}",
                n + 1,
                self.initial_agents.nrows(),
                self.initial_agents.ncols()
            ));
        }
        if self.initial_agents.iter().any(|v| !v.is_finite()) {
            out.push("initial_conditions.agents: entries must be finite".into());
        }
        let init = &self.initial_observers;
        let vec_check = |name: &str, v: &Option<Vec<f64>>, out: &mut Vec<String>| {
            if let Some(v) = v {
                if v.len() != n {
                    out.push(format!("initial_conditions.{name}: expected {n} entries, found {}", v.len()));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    out.push(format!("initial_conditions.{name}: entries must be finite"));
                }
            }
        };
        vec_check("u_hat", &init.u_hat, &mut out);
        vec_check("leader_first", &init.leader_first, &mut out);
        if self.mode == Mode::Linear && init.leader_first.is_some() {
            out.push("initial_conditions.leader_first: only used in nonlinear mode".into());
        }
        for (name, z) in [("leader_z", &init.leader_z), ("own_z", &init.own_z)] {
            if let Some(z) = z {
                if z.shape() != (n, l - 1) {
                    out.push(format!(
                        "initial_conditions.{name}: expected {n}x{}, found {}x{}",
                        l - 1,
                        z.nrows(),
                        z.ncols()
                    ));
                }
                if z.iter().any(|x| !x.is_finite()) {
                    out.push(format!("initial_conditions.{name}: entries must be finite"));
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(SimError::InvalidScenario(v))
        }
    }

    pub fn initial_state(&self) -> SystemState {
        let (n, l) = (self.n_followers(), self.order);
        let init = &self.initial_observers;
        let nonlinear = self.mode == Mode::Nonlinear;
        let zeros_z = || DMatrix::zeros(n, l - 1);
        SystemState {
            agents: self.initial_agents.clone(),
            input: InputObserverState {
                u_hat: init.u_hat.as_ref().map_or_else(|| DVector::zeros(n), |v| DVector::from_vec(v.clone())),
                d: DVector::from_vec(self.gains.d0.clone()),
            },
            leader: LeaderStateObserverState {
                first: nonlinear.then(|| {
                    init.leader_first
                        .as_ref()
                        .map_or_else(|| DVector::zeros(n), |v| DVector::from_vec(v.clone()))
                }),
                z: init.leader_z.clone().unwrap_or_else(zeros_z),
            },
            own: SelfStateObserverState {
                z: init.own_z.clone().unwrap_or_else(zeros_z),
            },
        }
    }

    /// Observer internals chosen so that every estimate equals the quantity it
    /// tracks at `t = 0` (including `û = u_0(0)`).
    pub fn with_exact_estimates(mut self) -> Result<Self, SimError> {
        let (n, l) = (self.n_followers(), self.order);
        let c0 = &self.gains.c0;
        let r = &self.gains.r;
        let x0 = self.initial_agents.row(0).clone_owned();
        let mut leader_z = DMatrix::zeros(n, l - 1);
        let mut own_z = DMatrix::zeros(n, l - 1);
        for i in 0..n {
            let b = self.topology.leader_weight(i);
            leader_z[(i, 0)] = x0[1] - b * c0[1] * x0[0];
            for m in 3..=l {
                leader_z[(i, m - 2)] = x0[m - 1] - c0[m - 1] * x0[m - 2];
            }
            let xi = self.initial_agents.row(i + 1);
            for m in 2..=l {
                own_z[(i, m - 2)] = xi[m - 1] - r[m - 2] * xi[m - 2];
            }
        }
        self.initial_observers = ObserverInit {
            u_hat: Some(vec![self.leader_input.eval(0.0)?; n]),
            leader_first: (self.mode == Mode::Nonlinear).then(|| vec![x0[0]; n]),
            leader_z: Some(leader_z),
            own_z: Some(own_z),
        };
        Ok(self)
    }
}

/// Everything integrated by the simulator.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    /// `(N + 1) × l`; row 0 is the leader.
    pub agents: DMatrix<f64>,
    pub input: InputObserverState,
    pub leader: LeaderStateObserverState,
    pub own: SelfStateObserverState,
}

/// Everything derived from a state at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub u0: f64,
    /// `N × l` leader-state estimates.
    pub leader_estimates: DMatrix<f64>,
    /// `N × l` own-state estimates.
    pub own_estimates: DMatrix<f64>,
    pub control: DVector<f64>,
}

impl SystemState {
    pub fn n_followers(&self) -> usize {
        self.agents.nrows() - 1
    }

    pub fn order(&self) -> usize {
        self.agents.ncols()
    }

    /// Flat layout: agents row by row, `û`, `d`, `x̂_{0,·,1}` if present, leader
    /// observer `z` row by row, own observer `z` row by row.
    pub fn to_vector(&self) -> DVector<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend(self.agents.transpose().iter());
        v.extend(self.input.u_hat.iter());
        v.extend(self.input.d.iter());
        if let Some(first) = &self.leader.first {
            v.extend(first.iter());
        }
        v.extend(self.leader.z.transpose().iter());
        v.extend(self.own.z.transpose().iter());
        DVector::from_vec(v)
    }

    pub fn len(&self) -> usize {
        let (n, l) = (self.n_followers(), self.order());
        let first = if self.leader.first.is_some() { n } else { 0 };
        (n + 1) * l + 2 * n + first + 2 * n * (l - 1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Inverse of `to_vector` for a state shaped like `self`.
    pub fn from_vector_like(&self, v: &[f64]) -> Self {
        let (n, l) = (self.n_followers(), self.order());
        let mut at = 0;
        let mut take = |len: usize| {
            let s = &v[at..at + len];
            at += len;
            s
        };
        let agents = DMatrix::from_row_slice(n + 1, l, take((n + 1) * l));
        let u_hat = DVector::from_row_slice(take(n));
        let d = DVector::from_row_slice(take(n));
        let first = self.leader.first.as_ref().map(|_| DVector::from_row_slice(take(n)));
        let leader_z = DMatrix::from_row_slice(n, l - 1, take(n * (l - 1)));
        let own_z = DMatrix::from_row_slice(n, l - 1, take(n * (l - 1)));
        Self {
            agents,
            input: InputObserverState { u_hat, d },
            leader: LeaderStateObserverState { first, z: leader_z },
            own: SelfStateObserverState { z: own_z },
        }
    }

    /// Estimates and control inputs at time `t`.
    pub fn snapshot(&self, t: f64, s: &Scenario) -> Result<Snapshot, SimError> {
        let n = self.n_followers();
        let u0 = s.leader_input.eval(t)?;
        let x1: Vec<f64> = self.agents.column(0).iter().copied().collect();
        let leader_estimates = self.leader.estimates(&s.topology, x1[0], &s.gains.c0);
        let own_estimates = self.own.estimates(&x1[1..], &s.gains.r);
        let control = match s.mode {
            Mode::Linear => linear_control(
                &s.topology,
                &x1,
                &own_estimates,
                &leader_estimates,
                &self.input.u_hat,
                &s.gains.k,
            )?,
            Mode::Nonlinear => nonlinear_control(
                &x1[1..],
                &own_estimates,
                &leader_estimates,
                &self.input.u_hat,
                &s.gains.k,
            )?,
        }
        .0;
        debug_assert_eq!(control.len(), n);
        Ok(Snapshot {
            u0,
            leader_estimates,
            own_estimates,
            control,
        })
    }
}

/// Time derivative of the whole closed loop.
pub fn closed_loop_derivative(state: &SystemState, t: f64, s: &Scenario) -> Result<SystemState, SimError> {
    let n = state.n_followers();
    let l = state.order();
    let snap = state.snapshot(t, s)?;
    let x1: Vec<f64> = state.agents.column(0).iter().copied().collect();
    let nonlinear = s.mode == Mode::Nonlinear;
    let f = &s.nonlinearity;

    let mut agents = DMatrix::zeros(n + 1, l);
    for a in 0..=n {
        let row: Vec<f64> = state.agents.row(a).iter().copied().collect();
        let u = if a == 0 { snap.u0 } else { snap.control[a - 1] };
        let dx = if nonlinear {
            nonlinear_drift(&row, u, f)
        } else {
            linear_drift(&row, u)
        }
        .map_err(|_| SimError::NonFiniteState(t))?;
        agents.row_mut(a).copy_from_slice(&dx);
    }

    let (du, dd) = input_observer_derivative(&state.input, &s.topology, snap.u0, &s.gains.tau, s.sign_mode)?;
    let (dfirst, dz0) = if nonlinear {
        let (a, b) = leader_state_observer_derivative_nonlinear(
            &state.leader,
            &s.topology,
            x1[0],
            &state.input.u_hat,
            &s.gains.c0,
            f,
        )?;
        (Some(a), b)
    } else {
        let dz = leader_state_observer_derivative_linear(
            &state.leader,
            &s.topology,
            x1[0],
            &state.input.u_hat,
            &s.gains.c0,
        )?;
        (None, dz)
    };
    let u: Vec<f64> = snap.control.iter().copied().collect();
    let dz = if nonlinear {
        self_state_observer_derivative_nonlinear(&state.own, &x1[1..], &u, &s.gains.r, f)?
    } else {
        self_state_observer_derivative_linear(&state.own, &x1[1..], &u, &s.gains.r)?
    };

    let out = SystemState {
        agents,
        input: InputObserverState { u_hat: du, d: dd },
        leader: LeaderStateObserverState { first: dfirst, z: dz0 },
        own: SelfStateObserverState { z: dz },
    };
    if out.to_vector().iter().any(|v| !v.is_finite()) {
        return Err(SimError::NonFiniteState(t));
    }
    Ok(out)
}
