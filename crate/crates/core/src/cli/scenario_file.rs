//! TOML scenario files.
//!
//! ```toml
//! [system]
//! mode = "nonlinear"        # or "linear"
//! order = 3
//! n_followers = 5
//!
//! [topology]                # optional; default is the path 1-2-...-N pinned at 1
//! edges = [[1, 2], [2, 3, 0.5]]       # [i, j] or [i, j, weight]
//! leader_links = [[1], [3, 2.0]]      # [i] or [i, weight]
//!
//! [gains]
//! k = [3, 3, 3]
//! c0 = [5, 5, 5]
//! r = [4, 4]
//! tau = 1.0                 # scalar or one per follower
//! d0 = 0.1                  # scalar or one per follower
//!
//! [leader_input]            # optional; default zero
//! kind = "sinusoid"         # zero | sinusoid | polynomial | table
//! amplitude = 1.0
//! angular_frequency = 0.6283185307179586
//! phase = 0.0
//! derivative_bound = 0.7    # optional, audited only
//!
//! [nonlinearity]            # optional; default none
//! kind = "cosine_sum"       # none | cosine_sum
//! rho = [1.0, 1.5, 2.0]     # optional Lipschitz override
//!
//! [initial_conditions]      # optional
//! agents = [[0, 0, 0], [1, 0, 0]]     # (N + 1) rows, leader first
//!
//! [integration]             # optional
//! dt = 1e-3
//! T = 40.0
//! sgn_mode = "hard"         # or "boundary_layer" with epsilon
//! ```

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Topology;
use crate::models::{
    lipschitz_for_cosine_sum, CubicSpline, LeaderInput, LeaderSignal, Nonlinearity, NonlinearityKind,
};
use crate::observers::{GainSet, SignMode, DEFAULT_D0, DEFAULT_TAU};
use crate::sim::{default_initial_agents, Mode, ObserverInit, Scenario, DEFAULT_DT, DEFAULT_HORIZON};

#[derive(Debug, Error)]
pub enum ScenarioFileError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
    #[error("cannot serialize scenario: {0}")]
    Serialize(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerFollower {
    Scalar(f64),
    List(Vec<f64>),
}

impl PerFollower {
    fn expand(&self, n: usize) -> Vec<f64> {
        match self {
            PerFollower::Scalar(v) => vec![*v; n],
            PerFollower::List(v) => v.clone(),
        }
    }

    fn compact(v: &[f64]) -> Self {
        match v.first() {
            Some(&x) if v.iter().all(|&y| y.to_bits() == x.to_bits()) => PerFollower::Scalar(x),
            _ => PerFollower::List(v.to_vec()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub mode: String,
    pub order: usize,
    pub n_followers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    #[serde(default)]
    pub edges: Vec<Vec<f64>>,
    #[serde(default)]
    pub leader_links: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsSection {
    pub k: Vec<f64>,
    pub c0: Vec<f64>,
    pub r: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<PerFollower>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d0: Option<PerFollower>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeaderInputSection {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angular_frequency: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<f64>,
    /// Polynomial coefficients in ascending powers of `t`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derivative_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearitySection {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConditionsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agents: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_hat: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leader_first: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leader_z: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub own_z: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, rename = "T", skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sgn_mode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub system: SystemSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology: Option<TopologySection>,
    pub gains: GainsSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leader_input: Option<LeaderInputSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonlinearity: Option<NonlinearitySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_conditions: Option<InitialConditionsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integration: Option<IntegrationSection>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioFileError> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| ScenarioFileError::Parse {
        line: e.span().map_or(0, |s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;
    file.to_scenario()
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text)
}

pub fn serialize_scenario(s: &Scenario) -> Result<String, ScenarioFileError> {
    let file = ScenarioFile::from_scenario(s)?;
    toml::to_string(&file).map_err(|e| ScenarioFileError::Serialize(e.to_string()))
}

fn node_id(v: f64, what: &str, errors: &mut Vec<String>) -> Option<usize> {
    if v.fract() == 0.0 && v >= 1.0 && v.is_finite() {
        Some(v as usize)
    } else {
        errors.push(format!("{what}: node id {v} must be a positive integer"));
        None
    }
}

fn matrix_from_rows(rows: &[Vec<f64>], what: &str, errors: &mut Vec<String>) -> Option<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        errors.push(format!("{what}: rows must all have the same length"));
        return None;
    }
    Some(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl TopologySection {
    fn build(&self, n: usize, errors: &mut Vec<String>) -> Option<Topology> {
        let before = errors.len();
        let mut edges = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (idx, e) in self.edges.iter().enumerate() {
            let what = format!("topology.edges[{idx}]");
            if !(e.len() == 2 || e.len() == 3) {
                errors.push(format!("{what}: expected [i, j] or [i, j, weight]"));
                continue;
            }
            let (i, j) = (node_id(e[0], &what, errors), node_id(e[1], &what, errors));
            let w = e.get(2).copied().unwrap_or(1.0);
            let (Some(i), Some(j)) = (i, j) else { continue };
            if i > n || j > n {
                errors.push(format!("{what}: node out of range 1..={n}"));
            } else if i == j {
                errors.push(format!("{what}: self-loop on {i}"));
            } else if !seen.insert((i.min(j), i.max(j))) {
                errors.push(format!("{what}: duplicate edge ({i}, {j})"));
            }
            if !(w.is_finite() && w > 0.0) {
                errors.push(format!("{what}: weight {w} must be finite and positive"));
            }
            edges.push((i, j, w));
        }
        let mut links = Vec::new();
        let mut seen_links = std::collections::HashSet::new();
        for (idx, e) in self.leader_links.iter().enumerate() {
            let what = format!("topology.leader_links[{idx}]");
            if !(e.len() == 1 || e.len() == 2) {
                errors.push(format!("{what}: expected [i] or [i, weight]"));
                continue;
            }
            let Some(i) = node_id(e[0], &what, errors) else { continue };
            let w = e.get(1).copied().unwrap_or(1.0);
            if i > n {
                errors.push(format!("{what}: node out of range 1..={n}"));
            } else if !seen_links.insert(i) {
                errors.push(format!("{what}: duplicate leader link to {i}"));
            }
            if !(w.is_finite() && w > 0.0) {
                errors.push(format!("{what}: weight {w} must be finite and positive"));
            }
            links.push((i, w));
        }
        if errors.len() > before {
            return None;
        }
        match Topology::new(n, &edges, &links) {
            Ok(t) => Some(t),
            Err(e) => {
                errors.push(format!("topology: {e}"));
                None
            }
        }
    }

    fn from_topology(t: &Topology) -> Self {
        Self {
            edges: t.edges().into_iter().map(|(i, j, w)| vec![i as f64, j as f64, w]).collect(),
            leader_links: t.leader_links().into_iter().map(|(i, w)| vec![i as f64, w]).collect(),
        }
    }
}

impl LeaderInputSection {
    fn build(&self, errors: &mut Vec<String>) -> Option<LeaderInput> {
        let present = |name: &str, set: bool| (set, name.to_string());
        let fields = [
            present("amplitude", self.amplitude.is_some()),
            present("angular_frequency", self.angular_frequency.is_some()),
            present("phase", self.phase.is_some()),
            present("coefficients", self.coefficients.is_some()),
            present("t", self.t.is_some()),
            present("u", self.u.is_some()),
        ];
        let allowed: &[&str] = match self.kind.as_str() {
            "zero" => &[],
            "sinusoid" => &["amplitude", "angular_frequency", "phase"],
            "polynomial" => &["coefficients"],
            "table" => &["t", "u"],
            other => {
                errors.push(format!(
                    "leader_input.kind = \"{other}\" must be zero, sinusoid, polynomial or table"
                ));
                return None;
            }
        };
        let before = errors.len();
        for (set, name) in &fields {
            if *set && !allowed.contains(&name.as_str()) {
                errors.push(format!("leader_input.{name} is not used by kind \"{}\"", self.kind));
            }
        }
        let finite = |name: &str, v: f64, errors: &mut Vec<String>| {
            if !v.is_finite() {
                errors.push(format!("leader_input.{name} = {v} must be finite"));
            }
        };
        let signal = match self.kind.as_str() {
            "zero" => LeaderSignal::Zero,
            "sinusoid" => {
                let amplitude = self.amplitude.unwrap_or(1.0);
                let angular_frequency = self.angular_frequency.unwrap_or(1.0);
                let phase = self.phase.unwrap_or(0.0);
                finite("amplitude", amplitude, errors);
                finite("angular_frequency", angular_frequency, errors);
                finite("phase", phase, errors);
                LeaderSignal::Sinusoid {
                    amplitude,
                    angular_frequency,
                    phase,
                }
            }
            "polynomial" => {
                let c = self.coefficients.clone().unwrap_or_default();
                if c.is_empty() {
                    errors.push("leader_input.coefficients: at least one coefficient required".into());
                }
                for v in &c {
                    finite("coefficients", *v, errors);
                }
                LeaderSignal::Polynomial(c)
            }
            _ => {
                let (Some(t), Some(u)) = (self.t.clone(), self.u.clone()) else {
                    errors.push("leader_input: kind \"table\" needs both t and u".into());
                    return None;
                };
                match CubicSpline::new(t, u) {
                    Ok(s) => LeaderSignal::Table(s),
                    Err(e) => {
                        errors.push(format!("leader_input: {e}"));
                        return None;
                    }
                }
            }
        };
        if let Some(w) = self.derivative_bound {
            if !(w.is_finite() && w >= 0.0) {
                errors.push(format!("leader_input.derivative_bound = {w} must be finite and non-negative"));
            }
        }
        (errors.len() == before).then_some(LeaderInput {
            signal,
            derivative_bound: self.derivative_bound,
        })
    }

    fn from_input(u: &LeaderInput) -> Self {
        let mut s = Self {
            kind: String::new(),
            amplitude: None,
            angular_frequency: None,
            phase: None,
            coefficients: None,
            t: None,
            u: None,
            derivative_bound: u.derivative_bound,
        };
        match &u.signal {
            LeaderSignal::Zero => s.kind = "zero".into(),
            LeaderSignal::Sinusoid {
                amplitude,
                angular_frequency,
                phase,
            } => {
                s.kind = "sinusoid".into();
                s.amplitude = Some(*amplitude);
                s.angular_frequency = Some(*angular_frequency);
                s.phase = Some(*phase);
            }
            LeaderSignal::Polynomial(c) => {
                s.kind = "polynomial".into();
                s.coefficients = Some(c.clone());
            }
            LeaderSignal::Table(sp) => {
                s.kind = "table".into();
                s.t = Some(sp.times().to_vec());
                s.u = Some(sp.values().to_vec());
            }
        }
        s
    }
}

fn check_finite(what: &str, values: &[f64], errors: &mut Vec<String>) {
    if values.iter().any(|v| !v.is_finite()) {
        errors.push(format!("{what}: entries must be finite"));
    }
}

impl ScenarioFile {
    /// Builds and validates the scenario, collecting every violation.
    pub fn to_scenario(&self) -> Result<Scenario, ScenarioFileError> {
        let mut errors = Vec::new();
        let sys = &self.system;
        let mode = match sys.mode.as_str() {
            "linear" => Some(Mode::Linear),
            "nonlinear" => Some(Mode::Nonlinear),
            other => {
                errors.push(format!("system.mode = \"{other}\" must be linear or nonlinear"));
                None
            }
        };
        let (n, l) = (sys.n_followers, sys.order);
        if n == 0 {
            errors.push("system.n_followers must be at least 1".into());
        }
        if l < 3 {
            errors.push(format!("system.order = {l} must be at least 3"));
        }
        if n == 0 || l < 3 {
            return Err(ScenarioFileError::Validation(errors));
        }

        let topology = match &self.topology {
            Some(t) => t.build(n, &mut errors),
            None => Topology::chain(n).ok(),
        };
        if let Some(t) = &topology {
            if !t.leader_globally_reachable() {
                errors.push("topology: the leader does not reach every follower".into());
            }
        }

        let g = &self.gains;
        let gains = GainSet {
            k: g.k.clone(),
            c0: g.c0.clone(),
            r: g.r.clone(),
            tau: g.tau.as_ref().map_or(vec![DEFAULT_TAU; n], |v| v.expand(n)),
            d0: g.d0.as_ref().map_or(vec![DEFAULT_D0; n], |v| v.expand(n)),
        };

        let leader_input = match &self.leader_input {
            Some(s) => s.build(&mut errors),
            None => Some(LeaderInput::zero()),
        };

        let nonlinearity = match &self.nonlinearity {
            None => Some(Nonlinearity::none(l)),
            Some(sec) => {
                let base = match sec.kind.as_str() {
                    "none" => Some(Nonlinearity::none(l)),
                    "cosine_sum" => Some(Nonlinearity::cosine_sum(l)),
                    other => {
                        errors.push(format!("nonlinearity.kind = \"{other}\" must be none or cosine_sum"));
                        None
                    }
                };
                match (base, &sec.rho) {
                    (Some(b), Some(rho)) => match b.with_lipschitz(rho.clone()) {
                        Ok(nl) => Some(nl),
                        Err(e) => {
                            errors.push(format!("nonlinearity.rho: {e}"));
                            None
                        }
                    },
                    (b, _) => b,
                }
            }
        };

        let ic = self.initial_conditions.clone().unwrap_or_default();
        let initial_agents = match &ic.agents {
            Some(rows) => matrix_from_rows(rows, "initial_conditions.agents", &mut errors),
            None => Some(default_initial_agents(n, l)),
        };
        let leader_z = ic
            .leader_z
            .as_ref()
            .and_then(|rows| matrix_from_rows(rows, "initial_conditions.leader_z", &mut errors));
        let own_z = ic
            .own_z
            .as_ref()
            .and_then(|rows| matrix_from_rows(rows, "initial_conditions.own_z", &mut errors));

        let integ = self.integration.clone().unwrap_or_default();
        let sign_mode = match integ.sgn_mode.as_deref().unwrap_or("hard") {
            "hard" => {
                if integ.epsilon.is_some() {
                    errors.push("integration.epsilon is only used with sgn_mode = \"boundary_layer\"".into());
                }
                Some(SignMode::Hard)
            }
            "boundary_layer" => match integ.epsilon {
                Some(epsilon) => Some(SignMode::BoundaryLayer { epsilon }),
                None => {
                    errors.push("integration.epsilon is required with sgn_mode = \"boundary_layer\"".into());
                    None
                }
            },
            other => {
                errors.push(format!("integration.sgn_mode = \"{other}\" must be hard or boundary_layer"));
                None
            }
        };

        for (what, v) in [("gains.k", &gains.k), ("gains.c0", &gains.c0), ("gains.r", &gains.r)] {
            check_finite(what, v, &mut errors);
        }

        let (
            Some(mode),
            Some(topology),
            Some(leader_input),
            Some(nonlinearity),
            Some(initial_agents),
            Some(sign_mode),
        ) = (mode, topology, leader_input, nonlinearity, initial_agents, sign_mode)
        else {
            // Checks that do not need a complete scenario.
            errors.extend(gains.violations(l, n));
            let dt = integ.dt.unwrap_or(DEFAULT_DT);
            if !(dt.is_finite() && dt > 0.0) {
                errors.push(format!("integration.dt = {dt} must be finite and positive"));
            }
            return Err(ScenarioFileError::Validation(errors));
        };
        let scenario = Scenario {
            mode,
            order: l,
            topology,
            gains,
            leader_input,
            nonlinearity,
            initial_agents,
            initial_observers: ObserverInit {
                u_hat: ic.u_hat.clone(),
                leader_first: ic.leader_first.clone(),
                leader_z,
                own_z,
            },
            horizon: integ.horizon.unwrap_or(DEFAULT_HORIZON),
            dt: integ.dt.unwrap_or(DEFAULT_DT),
            sign_mode,
        };
        errors.extend(scenario.violations());
        errors.dedup();
        if errors.is_empty() {
            Ok(scenario)
        } else {
            Err(ScenarioFileError::Validation(errors))
        }
    }

    /// Fully explicit file for a scenario. Custom nonlinearities have no file form.
    pub fn from_scenario(s: &Scenario) -> Result<Self, ScenarioFileError> {
        let kind = match s.nonlinearity.kind() {
            NonlinearityKind::None => "none",
            NonlinearityKind::CosineSum => "cosine_sum",
            NonlinearityKind::Custom(_) => {
                return Err(ScenarioFileError::Serialize(
                    "custom nonlinearities cannot be written to a scenario file".into(),
                ))
            }
        };
        let default_rho = match s.nonlinearity.kind() {
            NonlinearityKind::CosineSum => lipschitz_for_cosine_sum(s.order),
            _ => vec![0.0; s.order],
        };
        let rho = s.nonlinearity.lipschitz().to_vec();
        let init = &s.initial_observers;
        let (sgn_mode, epsilon) = match s.sign_mode {
            SignMode::Hard => ("hard", None),
            SignMode::BoundaryLayer { epsilon } => ("boundary_layer", Some(epsilon)),
        };
        Ok(Self {
            system: SystemSection {
                mode: match s.mode {
                    Mode::Linear => "linear",
                    Mode::Nonlinear => "nonlinear",
                }
                .into(),
                order: s.order,
                n_followers: s.n_followers(),
            },
            topology: Some(TopologySection::from_topology(&s.topology)),
            gains: GainsSection {
                k: s.gains.k.clone(),
                c0: s.gains.c0.clone(),
                r: s.gains.r.clone(),
                tau: Some(PerFollower::compact(&s.gains.tau)),
                d0: Some(PerFollower::compact(&s.gains.d0)),
            },
            leader_input: Some(LeaderInputSection::from_input(&s.leader_input)),
            nonlinearity: Some(NonlinearitySection {
                kind: kind.into(),
                rho: (rho != default_rho).then_some(rho),
            }),
            initial_conditions: Some(InitialConditionsSection {
                agents: Some(rows_of(&s.initial_agents)),
                u_hat: init.u_hat.clone(),
                leader_first: init.leader_first.clone(),
                leader_z: init.leader_z.as_ref().map(rows_of),
                own_z: init.own_z.as_ref().map(rows_of),
            }),
            integration: Some(IntegrationSection {
                dt: Some(s.dt),
                horizon: Some(s.horizon),
                sgn_mode: Some(sgn_mode.into()),
                epsilon,
            }),
        })
    }
}
