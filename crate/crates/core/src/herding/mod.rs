//! The defenders' mission: gather on a semicircle ahead of the attackers,
//! close a StringNet around them, then drag the rigid net to the safe area.

pub mod bounds;

use std::collections::BTreeSet;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};
use crate::flock::{obstacle_term, Diagnostics};
use crate::geometry::{blend, saturate, sig_alpha, unit_from_angle, AgentState, BlendSpec, Obstacle, Vec2};
use crate::integrator::rk4_feedback;
use crate::potentials::{u_p_floored, PotentialSpec, RelativeState};
use crate::virtual_agents::{project_onto_circle, project_onto_contour};

pub use bounds::{
    clearance_margin, herding_lyapunov, min_defenders, solve_lyapunov, symmetric_eigenvalues, tracking_bound,
    TrackingBound,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HerdingParams {
    pub k1: f64,
    pub k2: f64,
    /// Velocity exponent of the finite-time law; the position exponent is
    /// derived from it.
    pub alpha2: f64,
    /// Distance of the gathering center from the protected-area center (m).
    pub gather_distance: f64,
    /// Radius of the gathering semicircle (m).
    pub semicircle_radius: f64,
    /// StringNet radius (m).
    pub net_radius: f64,
    /// Largest formation footprint the free space admits (m).
    pub net_radius_max: f64,
    /// Attackers' connectivity radius about their center of mass (m).
    pub connectivity_radius: f64,
    /// Formation tolerance b_d (m).
    pub formation_tolerance: f64,
    /// Distance threshold for the wait trigger and for arrival (m).
    pub wait_trigger: f64,
    /// Virtual-agent speed below which herding is complete (m/s).
    pub done_speed: f64,
    /// Acceleration bound of the herding virtual agent (m/s²).
    pub herd_u_max: f64,
    /// Defender body radius, used in the formation clearance check (m).
    pub defender_radius: f64,
    /// Scaling in (0, 1) of the perturbation margin in the tracking bound.
    pub c0: f64,
    /// Expected duration of the formation phase (s). Defaults to 1.5× the
    /// unperturbed gathering settling time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formation_time_estimate: Option<f64>,
    pub defender_blend: BlendSpec,
    pub connectivity_blend: BlendSpec,
    /// Doublet on the superelliptic distance.
    pub obstacle_blend: BlendSpec,
    /// Doublet on the Euclidean distance of the virtual agent to a contour.
    pub formation_obstacle_blend: BlendSpec,
    pub defender_potential: PotentialSpec,
    pub connectivity_potential: PotentialSpec,
    pub obstacle_potential: PotentialSpec,
    pub formation_obstacle_potential: PotentialSpec,
}

impl HerdingParams {
    pub fn alpha1(&self) -> f64 {
        self.alpha2 / (2.0 - self.alpha2)
    }

    /// Conditions that involve only these parameters and the defender count.
    pub fn violations(&self, n_defenders: usize, attacker_u_max: f64) -> Vec<Violation> {
        let mut v = Vec::new();
        let mut check = |ok: bool, name: &str, detail: String| {
            if !ok {
                v.push(Violation::new(name, detail));
            }
        };
        check(self.k1 > 0.0 && self.k2 > 0.0, "tracking gains", format!("k1 = {}, k2 = {}", self.k1, self.k2));
        check(self.alpha2 > 0.0 && self.alpha2 < 1.0, "alpha2 range", format!("alpha2 = {} not in (0, 1)", self.alpha2));
        check(self.c0 > 0.0 && self.c0 < 1.0, "c0 range", format!("c0 = {} not in (0, 1)", self.c0));
        check(n_defenders >= 2, "defender count", format!("need at least 2 defenders, got {n_defenders}"));
        for (name, b) in [
            ("defender blend", &self.defender_blend),
            ("connectivity blend", &self.connectivity_blend),
            ("obstacle blend", &self.obstacle_blend),
            ("formation obstacle blend", &self.formation_obstacle_blend),
        ] {
            if let Err(e) = b.validate() {
                check(false, name, e.to_string());
            }
        }
        for (name, p) in [
            ("defender potential", &self.defender_potential),
            ("connectivity potential", &self.connectivity_potential),
            ("obstacle potential", &self.obstacle_potential),
            ("formation obstacle potential", &self.formation_obstacle_potential),
        ] {
            if let Err(e) = p.validate() {
                check(false, name, e.to_string());
            }
        }
        if n_defenders >= 2 {
            let chord = self.semicircle_radius * (2.0 - 2.0 * (PI / (n_defenders as f64 - 1.0)).cos()).sqrt();
            check(
                chord > self.defender_blend.upper,
                "gathering chord condition",
                format!("semicircle chord {chord:.4} must exceed defender blend upper {}", self.defender_blend.upper),
            );
        }
        check(
            self.semicircle_radius > self.connectivity_radius + self.connectivity_blend.upper,
            "gathering radius condition",
            format!(
                "semicircle radius {} must exceed connectivity radius + blend upper = {}",
                self.semicircle_radius,
                self.connectivity_radius + self.connectivity_blend.upper
            ),
        );
        check(
            self.connectivity_radius + self.formation_tolerance < self.net_radius
                && self.net_radius <= self.net_radius_max - self.formation_tolerance,
            "net radius range",
            format!(
                "need {} < net_radius = {} <= {}",
                self.connectivity_radius + self.formation_tolerance,
                self.net_radius,
                self.net_radius_max - self.formation_tolerance
            ),
        );
        check(
            self.defender_potential.desired_offset > self.defender_blend.upper,
            "defender potential offset",
            format!(
                "desired offset {} must exceed defender blend upper {}",
                self.defender_potential.desired_offset, self.defender_blend.upper
            ),
        );
        check(
            self.herd_u_max > 0.0 && self.herd_u_max < attacker_u_max,
            "herding acceleration bound",
            format!("need 0 < herd_u_max = {} < attacker u_max = {attacker_u_max}", self.herd_u_max),
        );
        check(
            self.formation_tolerance > 0.0 && self.wait_trigger > 0.0 && self.done_speed > 0.0,
            "thresholds",
            "formation tolerance, wait trigger and done speed must be positive".into(),
        );
        v
    }
}

/// Desired position, velocity and acceleration of one defender.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DesiredState {
    pub position: Vec2,
    pub velocity: Vec2,
    pub accel: Vec2,
}

/// Direction of the straight path from the attackers' initial center of
/// mass to the protected-area center.
pub fn gather_heading(initial_acom: Vec2, protected_center: Vec2) -> f64 {
    (protected_center - initial_acom).angle()
}

/// Center of the gathering semicircle: on the attackers' approach line, at
/// `gather_distance` in front of the protected area.
pub fn gather_center(params: &HerdingParams, protected_center: Vec2, heading: f64) -> Vec2 {
    protected_center - unit_from_angle(heading) * params.gather_distance
}

pub fn gather_targets(params: &HerdingParams, n: usize, heading: f64, protected_center: Vec2) -> Vec<DesiredState> {
    let center = gather_center(params, protected_center, heading);
    let start = heading - PI / 2.0;
    let span = if n > 1 { PI / (n as f64 - 1.0) } else { 0.0 };
    (0..n)
        .map(|j| DesiredState {
            position: center + unit_from_angle(start + span * j as f64) * params.semicircle_radius,
            ..Default::default()
        })
        .collect()
}

/// Angle of defender `j` (0-based) on the closed formation.
pub fn net_angle(n: usize, heading: f64, j: usize) -> f64 {
    heading - PI / 2.0 + PI * (2 * j + 1) as f64 / n as f64
}

pub fn stringnet_targets(
    params: &HerdingParams,
    n: usize,
    heading: f64,
    acom: Vec2,
    acom_velocity: Vec2,
    acom_accel: Vec2,
) -> Vec<DesiredState> {
    (0..n)
        .map(|j| DesiredState {
            position: acom + unit_from_angle(net_angle(n, heading, j)) * params.net_radius,
            velocity: acom_velocity,
            accel: acom_accel,
        })
        .collect()
}

/// Rigid formation about the herding virtual agent moving under `u_df`.
pub fn herd_targets(
    params: &HerdingParams,
    n: usize,
    heading: f64,
    virtual_agent: &AgentState,
    u_df: Vec2,
    drag: f64,
) -> Vec<DesiredState> {
    let accel = u_df - virtual_agent.velocity * drag;
    (0..n)
        .map(|j| DesiredState {
            position: virtual_agent.position + unit_from_angle(net_angle(n, heading, j)) * params.net_radius,
            velocity: virtual_agent.velocity,
            accel,
        })
        .collect()
}

/// Blend-gated repulsion from the other defenders and from obstacle
/// δ-agents.
pub fn collision_term(
    j: usize,
    defenders: &[AgentState],
    obstacles: &[Obstacle],
    params: &HerdingParams,
    diag: &mut Diagnostics,
) -> Result<Vec2> {
    let me = &defenders[j];
    let mut u = Vec2::ZERO;
    for (k, other) in defenders.iter().enumerate() {
        if k == j {
            continue;
        }
        let sigma = blend(&params.defender_blend, me.position.distance(other.position));
        if sigma <= 0.0 {
            continue;
        }
        let rel = RelativeState::new(me.position, me.velocity, other.position, other.velocity);
        let rep = u_p_floored(&params.defender_potential, &rel, None);
        if rep.floored {
            diag.near_violations += 1;
        }
        u += rep.accel * sigma;
    }
    for ob in obstacles {
        u += obstacle_term(ob, me, &params.obstacle_potential, &params.obstacle_blend, diag)?;
    }
    Ok(u)
}

/// Finite-time law toward a stationary or moving target, plus collision
/// avoidance and feedforward.
pub fn gather_control(
    j: usize,
    defenders: &[AgentState],
    target: &DesiredState,
    obstacles: &[Obstacle],
    params: &HerdingParams,
    drag: f64,
    diag: &mut Diagnostics,
) -> Result<Vec2> {
    let me = &defenders[j];
    Ok(finite_time_feedback(me, target, params, drag) + collision_term(j, defenders, obstacles, params, diag)? + target.accel)
}

fn finite_time_feedback(me: &AgentState, target: &DesiredState, params: &HerdingParams, drag: f64) -> Vec2 {
    me.velocity * drag
        - sig_alpha(me.velocity - target.velocity, params.alpha2) * params.k2
        - sig_alpha(me.position - target.position, params.alpha1()) * params.k1
}

fn linear_feedback(me: &AgentState, target: &DesiredState, params: &HerdingParams, drag: f64) -> Vec2 {
    me.velocity * drag - (me.velocity - target.velocity) * params.k2 - (me.position - target.position) * params.k1
}

/// The attackers' connectivity disc, moving with their center of mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackerRegion {
    pub center: AgentState,
    pub radius: f64,
}

/// Linear tracking of the StringNet targets while staying clear of the
/// attackers' connectivity disc. No acceleration feedforward.
#[allow(clippy::too_many_arguments)]
pub fn form_control(
    j: usize,
    defenders: &[AgentState],
    target: &DesiredState,
    obstacles: &[Obstacle],
    region: &AttackerRegion,
    params: &HerdingParams,
    drag: f64,
    diag: &mut Diagnostics,
) -> Result<Vec2> {
    let me = &defenders[j];
    let mut u = linear_feedback(me, target, params, drag) + collision_term(j, defenders, obstacles, params, diag)?;
    let offset = me.position - region.center.position;
    let gap = (offset.norm() - region.radius).abs();
    let sigma = blend(&params.connectivity_blend, gap);
    if sigma > 0.0 {
        let va = project_onto_circle(&region.center, region.radius, me);
        let rel = RelativeState::new(me.position, me.velocity, va.position, va.velocity);
        let rep = u_p_floored(&params.connectivity_potential, &rel, Some(offset));
        if rep.floored {
            diag.near_violations += 1;
        }
        u += rep.accel * sigma;
    }
    Ok(u)
}

/// Linear tracking of the rigid herding formation with feedforward.
pub fn herd_control(
    j: usize,
    defenders: &[AgentState],
    target: &DesiredState,
    obstacles: &[Obstacle],
    params: &HerdingParams,
    drag: f64,
    diag: &mut Diagnostics,
) -> Result<Vec2> {
    let me = &defenders[j];
    Ok(linear_feedback(me, target, params, drag) + collision_term(j, defenders, obstacles, params, diag)? + target.accel)
}

/// Distance from `p` to the axis-aligned box enclosing an obstacle's level
/// contour; a lower bound on the distance to the contour itself.
fn contour_box_distance(ob: &Obstacle, p: Vec2) -> f64 {
    let scale = (1.0 + ob.level).powf(1.0 / (2.0 * ob.exponent as f64));
    let dx = ((p.x - ob.center.x).abs() - ob.semi_axis_x * scale).max(0.0);
    let dy = ((p.y - ob.center.y).abs() - ob.semi_axis_y * scale).max(0.0);
    dx.hypot(dy)
}

/// Saturated acceleration of the herding virtual agent: pull toward the
/// safe-area center plus blend-gated repulsion from obstacle contours.
pub fn virtual_agent_accel(
    virtual_agent: &AgentState,
    safe_center: Vec2,
    obstacles: &[Obstacle],
    params: &HerdingParams,
    diag: &mut Diagnostics,
) -> Result<Vec2> {
    let mut u = (virtual_agent.position - safe_center) * -params.k1;
    for ob in obstacles {
        if contour_box_distance(ob, virtual_agent.position) >= params.formation_obstacle_blend.upper {
            continue;
        }
        let va = project_onto_contour(ob, virtual_agent.position, virtual_agent.velocity)?;
        let sigma = blend(&params.formation_obstacle_blend, virtual_agent.position.distance(va.position));
        if sigma <= 0.0 {
            continue;
        }
        let rel = RelativeState::new(virtual_agent.position, virtual_agent.velocity, va.position, va.velocity);
        let rep = u_p_floored(&params.formation_obstacle_potential, &rel, Some(ob.gradient(virtual_agent.position)));
        if rep.floored {
            diag.near_violations += 1;
        }
        u += rep.accel * sigma;
    }
    Ok(saturate(u, params.herd_u_max))
}

/// Time for a single defender under the unperturbed finite-time law to
/// bring its stacked position/velocity error below `tol`, integrating
/// with stage-wise feedback. `None` if `t_max` elapses first.
pub fn gathering_settling_time(
    params: &HerdingParams,
    initial_error: Vec2,
    tol: f64,
    dt: f64,
    t_max: f64,
) -> Option<f64> {
    let target = DesiredState::default();
    let mut s = AgentState::at_rest(initial_error);
    let steps = (t_max / dt).ceil() as usize;
    for k in 0..=steps {
        if s.position.norm().hypot(s.velocity.norm()) < tol {
            return Some(k as f64 * dt);
        }
        s = rk4_feedback(&s, 0.0, dt, |x| finite_time_feedback(x, &target, params, 0.0));
    }
    None
}

/// Mission stage, ordered by progress.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    Gathering,
    Waiting,
    FormingStringNet,
    Herding,
    Done,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Gathering => "gathering",
            Stage::Waiting => "waiting",
            Stage::FormingStringNet => "forming",
            Stage::Herding => "herding",
            Stage::Done => "done",
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_name(s: &str) -> Option<Stage> {
        [Stage::Gathering, Stage::Waiting, Stage::FormingStringNet, Stage::Herding, Stage::Done]
            .into_iter()
            .find(|st| st.name() == s)
    }
}

/// Mission state: the stage, the strings established so far and the
/// heading frozen at mission start.
#[derive(Debug, Clone, PartialEq)]
pub struct Phase {
    pub stage: Stage,
    /// Defender index pairs `(a, b)` with `a < b`.
    pub strings: BTreeSet<(usize, usize)>,
    pub heading: f64,
}

impl Phase {
    pub fn new(heading: f64) -> Self {
        Phase { stage: Stage::Gathering, strings: BTreeSet::new(), heading }
    }

    pub fn string_list(&self) -> Vec<(usize, usize)> {
        self.strings.iter().copied().collect()
    }

    /// True when the strings form the closed cycle over `n` defenders.
    pub fn is_closed(&self, n: usize) -> bool {
        (0..n).all(|j| {
            let k = (j + 1) % n;
            self.strings.contains(&(j.min(k), j.max(k)))
        })
    }
}

/// What the phase machine looks at each step.
#[derive(Debug, Clone, Copy)]
pub struct PhaseObservation<'a> {
    pub defenders: &'a [AgentState],
    /// Targets of the current stage.
    pub targets: &'a [DesiredState],
    pub acom: Vec2,
    pub gather_center: Vec2,
    pub virtual_agent: Option<AgentState>,
    pub safe_center: Vec2,
}

/// Latching transition function; moves at most one stage per call.
pub fn advance_phase(phase: &Phase, obs: &PhaseObservation, params: &HerdingParams) -> Result<Phase> {
    let n = obs.defenders.len();
    if obs.targets.len() != n {
        return Err(Error::Domain(format!("{} targets for {n} defenders", obs.targets.len())));
    }
    let close: Vec<bool> = obs
        .defenders
        .iter()
        .zip(obs.targets)
        .map(|(d, t)| d.position.distance(t.position) < params.formation_tolerance)
        .collect();
    let mut next = phase.clone();
    match phase.stage {
        Stage::Gathering => {
            for j in 0..n.saturating_sub(1) {
                if close[j] && close[j + 1] {
                    next.strings.insert((j, j + 1));
                }
            }
            if close.iter().all(|&c| c) {
                next.stage = Stage::Waiting;
            }
        }
        Stage::Waiting => {
            if obs.gather_center.distance(obs.acom) < params.wait_trigger {
                next.stage = Stage::FormingStringNet;
            }
        }
        Stage::FormingStringNet => {
            if n >= 2 && close[0] && close[n - 1] {
                next.strings.insert((0, n - 1));
            }
            if close.iter().all(|&c| c) && next.is_closed(n) {
                next.stage = Stage::Herding;
            }
        }
        Stage::Herding => {
            if let Some(va) = obs.virtual_agent {
                if va.position.distance(obs.safe_center) < params.wait_trigger && va.velocity.norm() < params.done_speed
                {
                    next.stage = Stage::Done;
                }
            }
        }
        Stage::Done => {}
    }
    Ok(next)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn params() -> HerdingParams {
        HerdingParams {
            k1: 1.0,
            k2: 2.0,
            alpha2: 0.8,
            gather_distance: 10.0,
            semicircle_radius: 4.0,
            net_radius: 3.0,
            net_radius_max: 5.0,
            connectivity_radius: 1.5,
            formation_tolerance: 0.5,
            wait_trigger: 1.0,
            done_speed: 0.05,
            herd_u_max: 0.5,
            defender_radius: 0.2,
            c0: 0.5,
            formation_time_estimate: None,
            defender_blend: BlendSpec::new(1.0, 2.0).unwrap(),
            connectivity_blend: BlendSpec::new(0.3, 1.0).unwrap(),
            obstacle_blend: BlendSpec::new(0.5, 2.0).unwrap(),
            formation_obstacle_blend: BlendSpec::new(5.0, 8.0).unwrap(),
            defender_potential: PotentialSpec::new(0.5, 2.5, 1.0, 1.0).unwrap(),
            connectivity_potential: PotentialSpec::new(0.1, 1.5, 1.0, 1.0).unwrap(),
            obstacle_potential: PotentialSpec::new(0.0, 3.0, 1.0, 1.0).unwrap(),
            formation_obstacle_potential: PotentialSpec::new(4.0, 5.0, 1.0, 1.0).unwrap(),
        }
    }

    fn close(a: Vec2, b: Vec2) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn gather_target_examples() {
        let p = params();
        let t = gather_targets(&p, 3, 0.0, Vec2::ZERO);
        assert!(close(t[0].position, Vec2::new(-10.0, -4.0)));
        assert!(close(t[1].position, Vec2::new(-6.0, 0.0)));
        assert!(close(t[2].position, Vec2::new(-10.0, 4.0)));
        assert!(t.iter().all(|d| d.velocity == Vec2::ZERO && d.accel == Vec2::ZERO));

        let t = gather_targets(&p, 2, 0.0, Vec2::ZERO);
        assert!(close(t[0].position, Vec2::new(-10.0, -4.0)));
        assert!(close(t[1].position, Vec2::new(-10.0, 4.0)));

        for n in 3..9 {
            let t = gather_targets(&p, n, 0.7, Vec2::new(1.0, 2.0));
            let chord = p.semicircle_radius * (2.0 - 2.0 * (PI / (n as f64 - 1.0)).cos()).sqrt();
            for w in t.windows(2) {
                assert!((w[0].position.distance(w[1].position) - chord).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn stringnet_target_examples() {
        let mut p = params();
        p.net_radius = 1.0;
        let t = stringnet_targets(&p, 4, PI / 2.0, Vec2::ZERO, Vec2::new(0.3, 0.0), Vec2::ZERO);
        for (j, want) in [PI / 4.0, 3.0 * PI / 4.0, 5.0 * PI / 4.0, 7.0 * PI / 4.0].iter().enumerate() {
            assert!(close(t[j].position, unit_from_angle(*want)));
            assert_eq!(t[j].velocity, Vec2::new(0.3, 0.0));
        }
        let d = Vec2::new(2.0, -5.0);
        let moved = stringnet_targets(&p, 4, PI / 2.0, d, Vec2::ZERO, Vec2::ZERO);
        for (a, b) in t.iter().zip(&moved) {
            assert!(close(a.position + d, b.position));
        }
    }

    #[test]
    fn herd_targets_are_rigid_and_match_net_angles() {
        let p = params();
        let va = AgentState::new(Vec2::new(3.0, 1.0), Vec2::new(0.2, 0.1));
        let h = herd_targets(&p, 5, 0.4, &va, Vec2::new(0.1, 0.0), 0.5);
        let s = stringnet_targets(&p, 5, 0.4, va.position, va.velocity, Vec2::ZERO);
        for (a, b) in h.iter().zip(&s) {
            assert!(close(a.position, b.position));
            assert!(close(a.accel, Vec2::new(0.0, -0.05)));
        }
        let rest = herd_targets(&p, 5, 0.4, &AgentState::at_rest(va.position), Vec2::ZERO, 0.5);
        assert!(rest.iter().all(|d| d.velocity == Vec2::ZERO && d.accel == Vec2::ZERO));
    }

    #[test]
    fn gather_control_examples() {
        let p = params();
        let target = DesiredState::default();
        let mut diag = Diagnostics::default();
        let at = [AgentState::at_rest(Vec2::ZERO)];
        assert_eq!(gather_control(0, &at, &target, &[], &p, 0.5, &mut diag).unwrap(), Vec2::ZERO);
        let off = [AgentState::at_rest(Vec2::new(1.0, 0.0))];
        let u = gather_control(0, &off, &target, &[], &p, 0.5, &mut diag).unwrap();
        assert!(close(u, Vec2::new(-1.0, 0.0)));

        // Two defenders inside the defender blend push apart along their axis.
        let pair = [AgentState::at_rest(Vec2::ZERO), AgentState::at_rest(Vec2::new(1.5, 0.0))];
        let t0 = DesiredState { position: Vec2::ZERO, ..Default::default() };
        let u = gather_control(0, &pair, &t0, &[], &p, 0.5, &mut diag).unwrap();
        assert!(u.x < 0.0 && u.y.abs() < 1e-15);
    }

    #[test]
    fn form_control_examples() {
        let mut p = params();
        p.k1 = 2.0;
        let region = AttackerRegion { center: AgentState::at_rest(Vec2::new(100.0, 0.0)), radius: 1.0 };
        let mut diag = Diagnostics::default();
        let v = Vec2::new(0.3, -0.2);
        let on = [AgentState::new(Vec2::ZERO, v)];
        let target = DesiredState { position: Vec2::ZERO, velocity: v, accel: Vec2::new(5.0, 5.0) };
        let u = form_control(0, &on, &target, &[], &region, &p, 0.7, &mut diag).unwrap();
        assert!(close(u, v * 0.7));

        let off = [AgentState::at_rest(Vec2::new(1.0, 0.0))];
        let u = form_control(0, &off, &DesiredState::default(), &[], &region, &p, 0.7, &mut diag).unwrap();
        assert!(close(u, Vec2::new(-2.0, 0.0)));

        // Just outside the connectivity circle: pushed outward.
        let region = AttackerRegion { center: AgentState::at_rest(Vec2::ZERO), radius: 1.0 };
        let near = [AgentState::at_rest(Vec2::new(1.4, 0.0))];
        let target = DesiredState { position: near[0].position, ..Default::default() };
        let u = form_control(0, &near, &target, &[], &region, &p, 0.7, &mut diag).unwrap();
        assert!(u.x > 0.0 && u.y.abs() < 1e-12);
    }

    #[test]
    fn virtual_agent_examples() {
        let p = params();
        let mut diag = Diagnostics::default();
        let s = Vec2::new(5.0, 5.0);
        assert_eq!(virtual_agent_accel(&AgentState::at_rest(s), s, &[], &p, &mut diag).unwrap(), Vec2::ZERO);
        let u = virtual_agent_accel(&AgentState::at_rest(Vec2::new(-50.0, 5.0)), s, &[], &p, &mut diag).unwrap();
        assert!((u.norm() - p.herd_u_max).abs() < 1e-15);
        assert!(close(u.normalized(), Vec2::new(1.0, 0.0)));

        // Obstacle just above the straight line to the target deflects down.
        let ob = Obstacle::from_rectangle(Vec2::new(-20.0, 9.0), 6.0, 4.0, 0.05, 4, 0.5).unwrap();
        let va = AgentState::at_rest(Vec2::new(-20.0, 5.0));
        let u = virtual_agent_accel(&va, s, &[ob], &p, &mut diag).unwrap();
        assert!(u.y < 0.0);
    }

    #[test]
    fn box_distance_bounds_contour_distance() {
        let ob = Obstacle::from_rectangle(Vec2::new(1.0, -2.0), 4.0, 2.0, 0.05, 4, 0.5).unwrap();
        for &q in &[Vec2::new(8.0, 3.0), Vec2::new(1.0, 5.0), Vec2::new(-6.0, -2.5)] {
            let p = project_onto_contour(&ob, q, Vec2::ZERO).unwrap().position;
            assert!(contour_box_distance(&ob, q) <= q.distance(p) + 1e-12);
        }
    }

    #[test]
    fn settling_is_finite_and_sublinear() {
        let mut p = params();
        p.k1 = 1.0;
        p.k2 = 1.0;
        let t1 = gathering_settling_time(&p, Vec2::new(1.0, 0.0), 1e-3, 0.01, 100.0).unwrap();
        let t10 = gathering_settling_time(&p, Vec2::new(10.0, 0.0), 1e-3, 0.01, 100.0).unwrap();
        assert!(t10 / t1 <= 5.0);
        // Tightening the tolerance a thousandfold barely moves the time.
        let tight = gathering_settling_time(&p, Vec2::new(1.0, 0.0), 1e-6, 0.01, 100.0).unwrap();
        assert!(tight - t1 < 0.5 * t1, "{t1} {tight}");
    }

    fn observe<'a>(d: &'a [AgentState], t: &'a [DesiredState], acom: Vec2) -> PhaseObservation<'a> {
        PhaseObservation {
            defenders: d,
            targets: t,
            acom,
            gather_center: Vec2::ZERO,
            virtual_agent: None,
            safe_center: Vec2::new(50.0, 0.0),
        }
    }

    #[test]
    fn phase_machine() {
        let p = params();
        let targets = gather_targets(&p, 4, 0.0, Vec2::new(10.0, 0.0));
        let mut d: Vec<AgentState> = targets.iter().map(|t| AgentState::at_rest(t.position)).collect();
        d[3].position += Vec2::new(5.0, 0.0);
        let ph = advance_phase(&Phase::new(0.0), &observe(&d, &targets, Vec2::new(-30.0, 0.0)), &p).unwrap();
        assert_eq!(ph.stage, Stage::Gathering);
        assert_eq!(ph.string_list(), vec![(0, 1), (1, 2)]);

        d[3].position = targets[3].position;
        let ph = advance_phase(&ph, &observe(&d, &targets, Vec2::new(-30.0, 0.0)), &p).unwrap();
        assert_eq!(ph.stage, Stage::Waiting);
        assert_eq!(ph.strings.len(), 3);

        // Latched: errors growing again do not undo the stage.
        d[0].position += Vec2::new(9.0, 9.0);
        let ph = advance_phase(&ph, &observe(&d, &targets, Vec2::new(-30.0, 0.0)), &p).unwrap();
        assert_eq!(ph.stage, Stage::Waiting);
        let ph = advance_phase(&ph, &observe(&d, &targets, Vec2::new(0.5, 0.0)), &p).unwrap();
        assert_eq!(ph.stage, Stage::FormingStringNet);

        let net = stringnet_targets(&p, 4, 0.0, Vec2::ZERO, Vec2::ZERO, Vec2::ZERO);
        let d: Vec<AgentState> = net.iter().map(|t| AgentState::at_rest(t.position)).collect();
        let ph = advance_phase(&ph, &observe(&d, &net, Vec2::ZERO), &p).unwrap();
        assert_eq!(ph.stage, Stage::Herding);
        assert!(ph.is_closed(4));

        let mut obs = observe(&d, &net, Vec2::ZERO);
        obs.virtual_agent = Some(AgentState::new(Vec2::new(50.2, 0.0), Vec2::new(0.2, 0.0)));
        assert_eq!(advance_phase(&ph, &obs, &p).unwrap().stage, Stage::Herding);
        obs.virtual_agent = Some(AgentState::new(Vec2::new(50.2, 0.0), Vec2::new(0.01, 0.0)));
        assert_eq!(advance_phase(&ph, &obs, &p).unwrap().stage, Stage::Done);
    }

    #[test]
    fn forming_needs_closing_edge() {
        let p = params();
        let net = stringnet_targets(&p, 4, 0.0, Vec2::ZERO, Vec2::ZERO, Vec2::ZERO);
        let mut d: Vec<AgentState> = net.iter().map(|t| AgentState::at_rest(t.position)).collect();
        d[3].position += Vec2::new(3.0, 0.0);
        let mut ph = Phase::new(0.0);
        ph.stage = Stage::FormingStringNet;
        ph.strings.extend([(0, 1), (1, 2), (2, 3)]);
        let next = advance_phase(&ph, &observe(&d, &net, Vec2::ZERO), &p).unwrap();
        assert_eq!(next.stage, Stage::FormingStringNet);
        assert!(!next.is_closed(4));
    }

    #[test]
    fn stage_order() {
        assert!(Stage::Gathering < Stage::Waiting);
        assert!(Stage::Waiting < Stage::FormingStringNet);
        assert!(Stage::FormingStringNet < Stage::Herding);
        assert!(Stage::Herding < Stage::Done);
        for s in [Stage::Gathering, Stage::Waiting, Stage::FormingStringNet, Stage::Herding, Stage::Done] {
            assert_eq!(Stage::from_name(s.name()), Some(s));
        }
    }

    #[test]
    fn parameter_checks() {
        let p = params();
        assert!(p.violations(5, 1.0).is_empty(), "{:?}", p.violations(5, 1.0));
        let mut bad = p;
        bad.net_radius = 4.8;
        let v = bad.violations(5, 1.0);
        assert!(v.iter().any(|x| x.condition == "net radius range"));
        let mut bad = p;
        bad.semicircle_radius = 1.0;
        let names: Vec<_> = bad.violations(12, 1.0).into_iter().map(|x| x.condition).collect();
        assert!(names.contains(&"gathering chord condition".to_string()));
        assert!(names.contains(&"gathering radius condition".to_string()));
        assert!(p.violations(5, 0.4).iter().any(|x| x.condition == "herding acceleration bound"));
        assert!((p.alpha1() - 2.0 / 3.0).abs() < 1e-15);
    }
}
