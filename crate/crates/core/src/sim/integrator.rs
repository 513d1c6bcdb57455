//! Fixed-step classical Runge–Kutta.

use nalgebra::DVector;

use super::{closed_loop_derivative, trace::TraceRecord, Scenario, SimError, SystemState, TraceLog};

/// Sup-norm of the state beyond which a run is declared divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1e6;
/// Per-step growth factor of the sup-norm that flags a step size problem.
pub const STEP_GROWTH_LIMIT: f64 = 1e6;

/// One RK4 step of `y' = f(t, y)`.
pub fn rk4_step<F, E>(mut f: F, t: f64, y: &DVector<f64>, dt: f64) -> Result<DVector<f64>, E>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>, E>,
{
    let h2 = 0.5 * dt;
    let k1 = f(t, y)?;
    let k2 = f(t + h2, &(y + &k1 * h2))?;
    let k3 = f(t + h2, &(y + &k2 * h2))?;
    let k4 = f(t + dt, &(y + &k3 * dt))?;
    Ok(y + (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0))
}

/// Number of steps covering `[0, horizon]` on a grid of spacing `dt`.
pub(crate) fn step_count(horizon: f64, dt: f64) -> usize {
    ((horizon / dt) * (1.0 - 1e-12)).ceil() as usize
}

/// Integrates the scenario from its initial state.
pub fn integrate(s: &Scenario) -> Result<TraceLog, SimError> {
    integrate_with(s, s.initial_state())
}

/// Integrates the scenario from an explicit initial state.
pub fn integrate_with(s: &Scenario, initial: SystemState) -> Result<TraceLog, SimError> {
    s.validate()?;
    let template = initial.clone();
    let rhs = |t: f64, y: &DVector<f64>| -> Result<DVector<f64>, SimError> {
        let st = template.from_vector_like(y.as_slice());
        Ok(closed_loop_derivative(&st, t, s)?.to_vector())
    };
    let steps = step_count(s.horizon, s.dt);
    let mut records = Vec::with_capacity(steps + 1);
    let mut y = initial.to_vector();
    let mut state = initial;
    let mut norm = y.amax();
    for k in 0..=steps {
        let t = k as f64 * s.dt;
        records.push(TraceRecord::new(t, state.clone(), s)?);
        if k == steps {
            break;
        }
        let next = rk4_step(&rhs, t, &y, s.dt).map_err(|e| match e {
            SimError::NonFiniteState(_) => SimError::Diverged(t),
            other => other,
        })?;
        let t_next = t + s.dt;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(SimError::Diverged(t_next));
        }
        let next_norm = next.amax();
        if next_norm > STEP_GROWTH_LIMIT * norm.max(1.0) {
            return Err(SimError::StepTooLarge(t_next));
        }
        if next_norm > DIVERGENCE_THRESHOLD {
            return Err(SimError::Diverged(t_next));
        }
        norm = next_norm;
        state = state.from_vector_like(next.as_slice());
        y = next;
    }
    Ok(TraceLog {
        mode: s.mode,
        dt: s.dt,
        records,
    })
}
