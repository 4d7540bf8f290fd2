//! Fixed-step RK4 for double-integrator agents with linear drag,
//! `ṙ = v`, `v̇ = u − C_d v`, the input held constant over the step.

use crate::geometry::{AgentState, Vec2};

fn deriv(s: &AgentState, u: Vec2, drag: f64) -> (Vec2, Vec2) {
    (s.velocity, u - s.velocity * drag)
}

pub fn rk4_step(s: &AgentState, u: Vec2, drag: f64, dt: f64) -> AgentState {
    let shift = |k: (Vec2, Vec2), h: f64| AgentState::new(s.position + k.0 * h, s.velocity + k.1 * h);
    let k1 = deriv(s, u, drag);
    let k2 = deriv(&shift(k1, 0.5 * dt), u, drag);
    let k3 = deriv(&shift(k2, 0.5 * dt), u, drag);
    let k4 = deriv(&shift(k3, dt), u, drag);
    let w = dt / 6.0;
    AgentState::new(
        s.position + (k1.0 + (k2.0 + k3.0) * 2.0 + k4.0) * w,
        s.velocity + (k1.1 + (k2.1 + k3.1) * 2.0 + k4.1) * w,
    )
}

/// RK4 with a state-feedback input re-evaluated at every stage. Used for
/// closed-loop reference solutions where the controller is cheap.
pub fn rk4_feedback(s: &AgentState, drag: f64, dt: f64, control: impl Fn(&AgentState) -> Vec2) -> AgentState {
    let f = |x: &AgentState| deriv(x, control(x), drag);
    let shift = |k: (Vec2, Vec2), h: f64| AgentState::new(s.position + k.0 * h, s.velocity + k.1 * h);
    let k1 = f(s);
    let k2 = f(&shift(k1, 0.5 * dt));
    let k3 = f(&shift(k2, 0.5 * dt));
    let k4 = f(&shift(k3, dt));
    let w = dt / 6.0;
    AgentState::new(
        s.position + (k1.0 + (k2.0 + k3.0) * 2.0 + k4.0) * w,
        s.velocity + (k1.1 + (k2.1 + k3.1) * 2.0 + k4.1) * w,
    )
}
