//! Agent dynamics, leader input signals and chain nonlinearities.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("agent order must be at least 3, got {0}")]
    OrderTooLow(usize),
    #[error("non-finite input to agent dynamics")]
    NonFiniteInput,
    #[error("time {t} is outside the tabulated leader input [{start}, {end}]")]
    OutOfHorizon { t: f64, start: f64, end: f64 },
    #[error("invalid leader input table: {0}")]
    InvalidTable(String),
    #[error("expected {expected} Lipschitz constants, got {found}")]
    LipschitzLength { expected: usize, found: usize },
    #[error("Lipschitz constant rho_{m} = {value} must be finite and nonnegative")]
    InvalidLipschitz { m: usize, value: f64 },
}

/// Length `l` of each agent's integrator chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgentOrder(usize);

impl AgentOrder {
    pub fn new(l: usize) -> Result<Self, ModelError> {
        if l < 3 {
            return Err(ModelError::OrderTooLow(l));
        }
        Ok(Self(l))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

/// `(x_2, ..., x_l, u)`.
pub fn linear_drift(state: &[f64], u: f64) -> Result<Vec<f64>, ModelError> {
    if !u.is_finite() || state.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFiniteInput);
    }
    let mut out = Vec::with_capacity(state.len());
    out.extend_from_slice(&state[1..]);
    out.push(u);
    Ok(out)
}

/// `(x_2 + f_1(x_1), ..., u + f_l(x_1..x_l))`.
pub fn nonlinear_drift(state: &[f64], u: f64, f: &Nonlinearity) -> Result<Vec<f64>, ModelError> {
    let mut out = linear_drift(state, u)?;
    if !f.is_zero() {
        for (m, d) in out.iter_mut().enumerate() {
            *d += f.evaluate(m + 1, state);
        }
    }
    Ok(out)
}

/// Natural cubic spline through `(t_k, u_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    t: Vec<f64>,
    u: Vec<f64>,
    // second derivatives at the knots
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn new(t: Vec<f64>, u: Vec<f64>) -> Result<Self, ModelError> {
        if t.len() != u.len() {
            return Err(ModelError::InvalidTable(format!(
                "{} times but {} values",
                t.len(),
                u.len()
            )));
        }
        if t.len() < 2 {
            return Err(ModelError::InvalidTable("need at least two samples".into()));
        }
        if t.iter().chain(&u).any(|v| !v.is_finite()) {
            return Err(ModelError::InvalidTable("non-finite sample".into()));
        }
        if t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ModelError::InvalidTable("times must be strictly increasing".into()));
        }

        // Thomas algorithm on the interior second derivatives.
        let n = t.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for i in 0..k {
                diag[i] = 2.0 * (h[i] + h[i + 1]);
                rhs[i] = 6.0 * ((u[i + 2] - u[i + 1]) / h[i + 1] - (u[i + 1] - u[i]) / h[i]);
            }
            for i in 1..k {
                let w = h[i] / diag[i - 1];
                diag[i] -= w * h[i];
                rhs[i] -= w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - h[i + 1] * m[i + 2]) / diag[i];
            }
        }
        Ok(Self { t, u, m })
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.u
    }

    pub fn start(&self) -> f64 {
        self.t[0]
    }

    pub fn end(&self) -> f64 {
        self.t[self.t.len() - 1]
    }

    fn segment(&self, t: f64) -> Result<usize, ModelError> {
        if !(t >= self.start() && t <= self.end()) {
            return Err(ModelError::OutOfHorizon {
                t,
                start: self.start(),
                end: self.end(),
            });
        }
        let idx = self.t.partition_point(|&x| x <= t);
        Ok(idx.saturating_sub(1).min(self.t.len() - 2))
    }

    pub fn eval(&self, t: f64) -> Result<f64, ModelError> {
        let i = self.segment(t)?;
        let h = self.t[i + 1] - self.t[i];
        let a = (self.t[i + 1] - t) / h;
        let b = (t - self.t[i]) / h;
        Ok(a * self.u[i]
            + b * self.u[i + 1]
            + ((a.powi(3) - a) * self.m[i] + (b.powi(3) - b) * self.m[i + 1]) * h * h / 6.0)
    }

    pub fn derivative(&self, t: f64) -> Result<f64, ModelError> {
        let i = self.segment(t)?;
        let h = self.t[i + 1] - self.t[i];
        let a = (self.t[i + 1] - t) / h;
        let b = (t - self.t[i]) / h;
        Ok((self.u[i + 1] - self.u[i]) / h
            + ((1.0 - 3.0 * a * a) * self.m[i] + (3.0 * b * b - 1.0) * self.m[i + 1]) * h / 6.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LeaderSignal {
    Zero,
    Sinusoid {
        amplitude: f64,
        angular_frequency: f64,
        phase: f64,
    },
    /// Coefficients in ascending powers of `t`.
    Polynomial(Vec<f64>),
    Table(CubicSpline),
}

/// The leader's maneuver input `u_0(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeaderInput {
    pub signal: LeaderSignal,
    /// Declared bound `w` on `|du_0/dt|`, audited but never used by the followers.
    pub derivative_bound: Option<f64>,
}

/// Outcome of sampling `|du_0/dt|` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RateAudit {
    pub samples: usize,
    pub max_rate: f64,
    pub bound: Option<f64>,
    pub satisfied: bool,
}

impl LeaderInput {
    pub fn zero() -> Self {
        Self {
            signal: LeaderSignal::Zero,
            derivative_bound: None,
        }
    }

    pub fn sinusoid(amplitude: f64, angular_frequency: f64, phase: f64) -> Self {
        Self {
            signal: LeaderSignal::Sinusoid {
                amplitude,
                angular_frequency,
                phase,
            },
            derivative_bound: None,
        }
    }

    pub fn with_derivative_bound(mut self, w: f64) -> Self {
        self.derivative_bound = Some(w);
        self
    }

    pub fn eval(&self, t: f64) -> Result<f64, ModelError> {
        Ok(match &self.signal {
            LeaderSignal::Zero => 0.0,
            LeaderSignal::Sinusoid {
                amplitude,
                angular_frequency,
                phase,
            } => amplitude * (angular_frequency * t + phase).sin(),
            LeaderSignal::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &a| acc * t + a),
            LeaderSignal::Table(s) => s.eval(t)?,
        })
    }

    pub fn derivative(&self, t: f64) -> Result<f64, ModelError> {
        Ok(match &self.signal {
            LeaderSignal::Zero => 0.0,
            LeaderSignal::Sinusoid {
                amplitude,
                angular_frequency,
                phase,
            } => amplitude * angular_frequency * (angular_frequency * t + phase).cos(),
            LeaderSignal::Polynomial(c) => c
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, &a)| acc * t + k as f64 * a),
            LeaderSignal::Table(s) => s.derivative(t)?,
        })
    }

    /// Finite-difference audit of `|du_0/dt|` over `[0, horizon]`.
    pub fn audit_rate(&self, horizon: f64, samples: usize) -> Result<RateAudit, ModelError> {
        let samples = samples.max(2);
        let h = horizon / (samples - 1) as f64;
        let mut prev = self.eval(0.0)?;
        let mut max_rate: f64 = 0.0;
        for k in 1..samples {
            let t = if k == samples - 1 { horizon } else { k as f64 * h };
            let next = self.eval(t)?;
            max_rate = max_rate.max(((next - prev) / h).abs());
            prev = next;
        }
        let satisfied = max_rate.is_finite()
            && self
                .derivative_bound
                .is_none_or(|w| max_rate <= w * (1.0 + 1e-9) + 1e-12);
        Ok(RateAudit {
            samples,
            max_rate,
            bound: self.derivative_bound,
            satisfied,
        })
    }
}

/// User-supplied `f_m`; receives `m` (one-based) and the chain prefix `x_1..x_m`.
pub type ChainFn = Arc<dyn Fn(usize, &[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum NonlinearityKind {
    None,
    /// `f_m(x_1..x_m) = Σ_k cos(x_k)`.
    CosineSum,
    Custom(ChainFn),
}

impl fmt::Debug for NonlinearityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::None => f.write_str("None"),
            Self::CosineSum => f.write_str("CosineSum"),
            Self::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl PartialEq for NonlinearityKind {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Self::None, Self::None) | (Self::CosineSum, Self::CosineSum) => true,
            (Self::Custom(a), Self::Custom(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

/// The chain nonlinearities `f_1..f_l` with declared Lipschitz constants.
#[derive(Debug, Clone, PartialEq)]
pub struct Nonlinearity {
    kind: NonlinearityKind,
    lipschitz: Vec<f64>,
}

/// Worst sampled ratio `|f_m(a) - f_m(b)| / ‖a - b‖` per `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzAudit {
    pub samples: usize,
    pub worst_ratio: Vec<f64>,
    /// One-based `m` whose declared constant was exceeded.
    pub violations: Vec<usize>,
}

impl LipschitzAudit {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

impl Nonlinearity {
    pub fn none(l: usize) -> Self {
        Self {
            kind: NonlinearityKind::None,
            lipschitz: vec![0.0; l],
        }
    }

    pub fn cosine_sum(l: usize) -> Self {
        Self {
            kind: NonlinearityKind::CosineSum,
            lipschitz: lipschitz_for_cosine_sum(l),
        }
    }

    pub fn custom(f: ChainFn, lipschitz: Vec<f64>) -> Result<Self, ModelError> {
        Self {
            kind: NonlinearityKind::Custom(f),
            lipschitz: Vec::new(),
        }
        .with_lipschitz(lipschitz)
    }

    /// Replaces the declared constants; the audit decides whether they hold.
    pub fn with_lipschitz(mut self, lipschitz: Vec<f64>) -> Result<Self, ModelError> {
        if let Some((m, &value)) = lipschitz
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(ModelError::InvalidLipschitz { m: m + 1, value });
        }
        if !self.lipschitz.is_empty() && lipschitz.len() != self.lipschitz.len() {
            return Err(ModelError::LipschitzLength {
                expected: self.lipschitz.len(),
                found: lipschitz.len(),
            });
        }
        self.lipschitz = lipschitz;
        Ok(self)
    }

    pub fn kind(&self) -> &NonlinearityKind {
        &self.kind
    }

    pub fn lipschitz(&self) -> &[f64] {
        &self.lipschitz
    }

    pub fn order(&self) -> usize {
        self.lipschitz.len()
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, NonlinearityKind::None)
    }

    /// `f_m` evaluated on the first `m` entries of `chain`.
    pub fn evaluate(&self, m: usize, chain: &[f64]) -> f64 {
        let prefix = &chain[..m];
        match &self.kind {
            NonlinearityKind::None => 0.0,
            NonlinearityKind::CosineSum => prefix.iter().map(|x| x.cos()).sum(),
            NonlinearityKind::Custom(f) => f(m, prefix),
        }
    }

    /// Samples `samples` random pairs in `[-10, 10]^m` for each `m` and checks
    /// the declared constants. Can only refute a declaration, never prove it.
    pub fn audit_lipschitz(&self, samples: usize, seed: u64) -> LipschitzAudit {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst_ratio = Vec::with_capacity(self.order());
        let mut violations = Vec::new();
        for m in 1..=self.order() {
            let mut worst: f64 = 0.0;
            let mut a = vec![0.0f64; m];
            let mut b = vec![0.0f64; m];
            for _ in 0..samples {
                a.iter_mut().for_each(|v| *v = rng.gen_range(-10.0..=10.0));
                b.iter_mut().for_each(|v| *v = rng.gen_range(-10.0..=10.0));
                let dist = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
                if dist == 0.0 {
                    continue;
                }
                let ratio = (self.evaluate(m, &a) - self.evaluate(m, &b)).abs() / dist;
                worst = worst.max(ratio);
            }
            if worst.is_nan() || worst > self.lipschitz[m - 1] + 1e-12 {
                violations.push(m);
            }
            worst_ratio.push(worst);
        }
        LipschitzAudit {
            samples,
            worst_ratio,
            violations,
        }
    }
}

/// `ρ_m = √m`: each cosine is 1-Lipschitz, Cauchy–Schwarz over `m` coordinates.
pub fn lipschitz_for_cosine_sum(l: usize) -> Vec<f64> {
    (1..=l).map(|m| (m as f64).sqrt()).collect()
}
