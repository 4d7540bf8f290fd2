//! Fixed-step simulation of attackers, defenders and the herding virtual
//! agent, with phase advancement and the safety-ratio time series.

use crate::error::{Error, Result};
use crate::flock::{attacker_control, build_flock_graph, Diagnostics, FlockContext, FlockParams};
use crate::geometry::{AgentState, Obstacle, Vec2};
use crate::herding::{
    advance_phase, form_control, gather_center, gather_control, gather_heading, gather_targets, herd_control,
    herd_targets, stringnet_targets, virtual_agent_accel, AttackerRegion, DesiredState, HerdingParams, Phase,
    PhaseObservation, Stage,
};
use crate::integrator::rk4_step;
use crate::scenario::{acom, Scenario, SimConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub time: f64,
    pub attackers: Vec<AgentState>,
    pub defenders: Vec<AgentState>,
    /// Center of the rigid herding formation, present from Herding on.
    pub virtual_agent: Option<AgentState>,
    pub phase: Phase,
}

/// Inputs held over one step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Controls {
    pub attackers: Vec<Vec2>,
    pub defenders: Vec<Vec2>,
    pub virtual_agent: Vec2,
}

/// Advance every agent by one RK4 step with the inputs held constant.
pub fn step(world: &WorldState, controls: &Controls, config: &SimConfig) -> Result<WorldState> {
    let advance = |states: &[AgentState], inputs: &[Vec2]| -> Vec<AgentState> {
        states.iter().zip(inputs).map(|(s, &u)| rk4_step(s, u, config.drag, config.dt)).collect()
    };
    let next = WorldState {
        time: world.time + config.dt,
        attackers: advance(&world.attackers, &controls.attackers),
        defenders: advance(&world.defenders, &controls.defenders),
        virtual_agent: world.virtual_agent.map(|v| rk4_step(&v, controls.virtual_agent, config.drag, config.dt)),
        phase: world.phase.clone(),
    };
    let bad = |kind: &str, states: &[AgentState]| states.iter().position(|s| !s.is_finite()).map(|i| format!("{kind} {i}"));
    if let Some(what) = bad("attacker", &next.attackers)
        .or_else(|| bad("defender", &next.defenders))
        .or_else(|| next.virtual_agent.filter(|v| !v.is_finite()).map(|_| "virtual agent".to_string()))
    {
        return Err(Error::NonFiniteState { time: next.time, what });
    }
    Ok(next)
}

/// One sample of the five critical distance ratios. Each is the largest
/// safety-distance-to-distance ratio over its class; below 1 is safe.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SafetySample {
    pub defender_defender: f64,
    pub attacker_defender: f64,
    pub attacker_attacker: f64,
    pub attacker_obstacle: f64,
    pub defender_obstacle: f64,
}

impl SafetySample {
    pub const NAMES: [&'static str; 5] = ["delta_dd", "delta_ad", "delta_aa", "delta_ao", "delta_do"];

    pub fn values(&self) -> [f64; 5] {
        [
            self.defender_defender,
            self.attacker_defender,
            self.attacker_attacker,
            self.attacker_obstacle,
            self.defender_obstacle,
        ]
    }

    pub fn from_values(v: [f64; 5]) -> Self {
        SafetySample {
            defender_defender: v[0],
            attacker_defender: v[1],
            attacker_attacker: v[2],
            attacker_obstacle: v[3],
            defender_obstacle: v[4],
        }
    }

    pub fn max(&self) -> f64 {
        self.values().into_iter().fold(0.0, f64::max)
    }

    pub fn is_safe(&self) -> bool {
        self.values().iter().all(|&x| x < 1.0)
    }
}

fn pair_ratio(a: &[AgentState], b: &[AgentState], safety: f64, same: bool) -> f64 {
    let mut worst = 0.0f64;
    for (i, p) in a.iter().enumerate() {
        for (j, q) in b.iter().enumerate() {
            if same && j <= i {
                continue;
            }
            let d = p.position.distance(q.position);
            worst = worst.max(if d > 0.0 { safety / d } else { f64::INFINITY });
        }
    }
    worst
}

/// `ξ^m / E` over the obstacles whose blend is active for each agent.
fn obstacle_ratio(agents: &[AgentState], obstacles: &[Obstacle], blend_upper: f64) -> f64 {
    let mut worst = 0.0f64;
    for a in agents {
        for ob in obstacles {
            let e = ob.superelliptic_distance(a.position);
            if e < blend_upper {
                worst = worst.max(if e > 0.0 { ob.level / e } else { f64::INFINITY });
            }
        }
    }
    worst
}

pub fn compute_metrics(
    attackers: &[AgentState],
    defenders: &[AgentState],
    flock: &FlockParams,
    herding: &HerdingParams,
    obstacles: &[Obstacle],
) -> SafetySample {
    SafetySample {
        defender_defender: pair_ratio(defenders, defenders, herding.defender_potential.min_distance, true),
        attacker_defender: pair_ratio(attackers, defenders, flock.defender_potential.min_distance, false),
        attacker_attacker: pair_ratio(attackers, attackers, flock.neighbor_potential.min_distance, true),
        attacker_obstacle: obstacle_ratio(attackers, obstacles, flock.obstacle_blend.upper),
        defender_obstacle: obstacle_ratio(defenders, obstacles, herding.obstacle_blend.upper),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub time: f64,
    pub attackers: Vec<AgentState>,
    pub defenders: Vec<AgentState>,
    pub attacker_controls: Vec<Vec2>,
    pub defender_controls: Vec<Vec2>,
    pub stage: Stage,
    pub metrics: SafetySample,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseEvent {
    pub time: f64,
    pub from: Stage,
    pub to: Stage,
}

/// Steps where at least one potential was evaluated at the distance floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NearViolation {
    pub time: f64,
    pub count: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Done,
    Timeout,
    /// An attacker reached the protected area.
    Breach,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::Done => "done",
            Outcome::Timeout => "timeout",
            Outcome::Breach => "breach",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub n_attackers: usize,
    pub n_defenders: usize,
    pub rows: Vec<LogRow>,
    pub events: Vec<PhaseEvent>,
    pub near_violations: Vec<NearViolation>,
    /// Established strings at the end of the run.
    pub strings: Vec<(usize, usize)>,
    /// Herding virtual agent positions, one per row from Herding on.
    pub virtual_path: Vec<Vec2>,
    pub outcome: Outcome,
}

impl TrajectoryLog {
    pub fn empty(n_attackers: usize, n_defenders: usize) -> Self {
        TrajectoryLog {
            n_attackers,
            n_defenders,
            rows: Vec::new(),
            events: Vec::new(),
            near_violations: Vec::new(),
            strings: Vec::new(),
            virtual_path: Vec::new(),
            outcome: Outcome::Timeout,
        }
    }

    pub fn final_row(&self) -> Option<&LogRow> {
        self.rows.last()
    }

    /// Largest value of each ratio over the whole run.
    pub fn max_metrics(&self) -> SafetySample {
        let mut m = [0.0f64; 5];
        for r in &self.rows {
            for (acc, x) in m.iter_mut().zip(r.metrics.values()) {
                *acc = acc.max(x);
            }
        }
        SafetySample::from_values(m)
    }

    pub fn time_of(&self, stage: Stage) -> Option<f64> {
        self.events.iter().find(|e| e.to == stage).map(|e| e.time)
    }
}

/// Everything the controllers need that does not change during a run.
pub struct Simulator<'a> {
    scenario: &'a Scenario,
    obstacles: Vec<Obstacle>,
    config: SimConfig,
    gather: Vec<DesiredState>,
    gather_center: Vec2,
    world: WorldState,
}

impl<'a> Simulator<'a> {
    /// Set up a run. Sampled attackers use `config.seed`.
    pub fn new(scenario: &'a Scenario, config: SimConfig) -> Result<Self> {
        let obstacles = scenario.obstacles()?;
        let attackers = scenario.attacker_states(config.seed)?;
        let p = scenario.protected_area.center;
        let heading = gather_heading(acom(&attackers), p);
        let gather = gather_targets(&scenario.herding, scenario.defenders.len(), heading, p);
        let world = WorldState {
            time: 0.0,
            attackers,
            defenders: scenario.defenders.clone(),
            virtual_agent: None,
            phase: Phase::new(heading),
        };
        Ok(Simulator {
            scenario,
            obstacles,
            config,
            gather,
            gather_center: gather_center(&scenario.herding, p, heading),
            world,
        })
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }

    fn attacker_controls(&self, diag: &mut Diagnostics) -> Result<Vec<Vec2>> {
        let w = &self.world;
        let graph = build_flock_graph(&w.attackers, &self.scenario.flock);
        let strings = w.phase.string_list();
        let ctx = FlockContext {
            attackers: &w.attackers,
            defenders: &w.defenders,
            strings: &strings,
            obstacles: &self.obstacles,
            graph: &graph,
            target: self.scenario.protected_area.center,
            drag: self.config.drag,
        };
        (0..w.attackers.len()).map(|i| attacker_control(i, &ctx, &self.scenario.flock, diag)).collect()
    }

    /// Targets for the current stage and, while herding, the virtual
    /// agent's input.
    fn targets(&self, attacker_u: &[Vec2], diag: &mut Diagnostics) -> Result<(Vec<DesiredState>, Vec2)> {
        let w = &self.world;
        let h = &self.scenario.herding;
        let n = w.defenders.len();
        match w.phase.stage {
            Stage::Gathering | Stage::Waiting => Ok((self.gather.clone(), Vec2::ZERO)),
            Stage::FormingStringNet => {
                let (c, v, a) = self.acom_motion(attacker_u);
                Ok((stringnet_targets(h, n, w.phase.heading, c, v, a), Vec2::ZERO))
            }
            Stage::Herding | Stage::Done => {
                let va = w.virtual_agent.expect("virtual agent exists while herding");
                let u = virtual_agent_accel(&va, self.scenario.safe_area.center, &self.obstacles, h, diag)?;
                Ok((herd_targets(h, n, w.phase.heading, &va, u, self.config.drag), u))
            }
        }
    }

    /// Center of mass of the attackers with its velocity and acceleration.
    fn acom_motion(&self, attacker_u: &[Vec2]) -> (Vec2, Vec2, Vec2) {
        let a = &self.world.attackers;
        let n = a.len() as f64;
        let v = a.iter().map(|s| s.velocity).sum::<Vec2>() / n;
        let acc = a.iter().zip(attacker_u).map(|(s, &u)| u - s.velocity * self.config.drag).sum::<Vec2>() / n;
        (acom(a), v, acc)
    }

    fn defender_controls(&self, targets: &[DesiredState], diag: &mut Diagnostics) -> Result<Vec<Vec2>> {
        let w = &self.world;
        let h = &self.scenario.herding;
        let drag = self.config.drag;
        let region = AttackerRegion {
            center: AgentState::new(acom(&w.attackers), {
                let n = w.attackers.len() as f64;
                w.attackers.iter().map(|s| s.velocity).sum::<Vec2>() / n
            }),
            radius: h.connectivity_radius,
        };
        (0..w.defenders.len())
            .map(|j| match w.phase.stage {
                Stage::Gathering | Stage::Waiting => {
                    gather_control(j, &w.defenders, &targets[j], &self.obstacles, h, drag, diag)
                }
                Stage::FormingStringNet => {
                    form_control(j, &w.defenders, &targets[j], &self.obstacles, &region, h, drag, diag)
                }
                Stage::Herding | Stage::Done => herd_control(j, &w.defenders, &targets[j], &self.obstacles, h, drag, diag),
            })
            .collect()
    }

    fn breached(&self) -> bool {
        let p = &self.scenario.protected_area;
        let reach = p.radius + self.scenario.attacker_radius;
        self.world.attackers.iter().any(|a| a.position.distance(p.center) <= reach)
    }

    /// Advance the phase machine against the current state; returns the
    /// transition if one happened.
    fn update_phase(&mut self, attacker_u: &[Vec2], diag: &mut Diagnostics) -> Result<Option<PhaseEvent>> {
        let (targets, _) = self.targets(attacker_u, diag)?;
        let w = &self.world;
        let obs = PhaseObservation {
            defenders: &w.defenders,
            targets: &targets,
            acom: acom(&w.attackers),
            gather_center: self.gather_center,
            virtual_agent: w.virtual_agent,
            safe_center: self.scenario.safe_area.center,
        };
        let next = advance_phase(&w.phase, &obs, &self.scenario.herding)?;
        let from = w.phase.stage;
        let to = next.stage;
        if to == Stage::Herding && from != Stage::Herding {
            let (c, v, _) = self.acom_motion(attacker_u);
            self.world.virtual_agent = Some(AgentState::new(c, v));
        }
        self.world.phase = next;
        Ok((from != to).then_some(PhaseEvent { time: self.world.time, from, to }))
    }

    /// Run to Done, breach or the horizon.
    pub fn run(mut self) -> Result<TrajectoryLog> {
        let (na, nd) = (self.world.attackers.len(), self.world.defenders.len());
        let mut log = TrajectoryLog::empty(na, nd);
        let steps = (self.config.t_max / self.config.dt).round() as usize;
        let h = &self.scenario.herding;
        let flock = &self.scenario.flock;
        for k in 0..=steps {
            let mut diag = Diagnostics::default();
            let mut attacker_u = self.attacker_controls(&mut diag)?;
            if let Some(ev) = self.update_phase(&attacker_u, &mut diag)? {
                log.events.push(ev);
                // Strings established by the transition act on the attackers now.
                attacker_u = self.attacker_controls(&mut diag)?;
            }
            let (targets, u_df) = self.targets(&attacker_u, &mut diag)?;
            let defender_u = self.defender_controls(&targets, &mut diag)?;
            let w = &self.world;
            log.rows.push(LogRow {
                time: w.time,
                attackers: w.attackers.clone(),
                defenders: w.defenders.clone(),
                attacker_controls: attacker_u.clone(),
                defender_controls: defender_u.clone(),
                stage: w.phase.stage,
                metrics: compute_metrics(&w.attackers, &w.defenders, flock, h, &self.obstacles),
            });
            if let Some(va) = w.virtual_agent {
                log.virtual_path.push(va.position);
            }
            if diag.near_violations > 0 {
                log.near_violations.push(NearViolation { time: w.time, count: diag.near_violations });
            }
            if w.phase.stage == Stage::Done {
                log.outcome = Outcome::Done;
                break;
            }
            if self.breached() {
                log.outcome = Outcome::Breach;
                break;
            }
            if k == steps {
                log.outcome = Outcome::Timeout;
                break;
            }
            let controls = Controls { attackers: attacker_u, defenders: defender_u, virtual_agent: u_df };
            let mut next = step(&self.world, &controls, &self.config)?;
            // Accumulate time as k·dt to avoid drift from repeated addition.
            next.time = (k + 1) as f64 * self.config.dt;
            self.world = next;
        }
        log.strings = self.world.phase.string_list();
        Ok(log)
    }
}

/// Run a scenario with its own settings.
pub fn run(scenario: &Scenario) -> Result<TrajectoryLog> {
    scenario.validate()?;
    Simulator::new(scenario, scenario.sim)?.run()
}

/// Run with overridden settings (step, horizon or seed); validation is the
/// caller's responsibility.
pub fn run_with(scenario: &Scenario, config: SimConfig) -> Result<TrajectoryLog> {
    Simulator::new(scenario, config)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drag_decay_matches_closed_form() {
        let config = SimConfig { dt: 0.01, t_max: 10.0, drag: 1.0, seed: 0 };
        let mut w = WorldState {
            time: 0.0,
            attackers: vec![AgentState::new(Vec2::ZERO, Vec2::new(1.0, 0.0))],
            defenders: vec![],
            virtual_agent: None,
            phase: Phase::new(0.0),
        };
        let controls = Controls { attackers: vec![Vec2::ZERO], ..Default::default() };
        for _ in 0..1000 {
            w = step(&w, &controls, &config).unwrap();
        }
        assert!((w.attackers[0].velocity.x - (-10f64).exp()).abs() < 1e-6);
        assert!((w.attackers[0].position.x - (1.0 - (-10f64).exp())).abs() < 1e-6);
    }

    #[test]
    fn rest_is_unchanged() {
        let config = SimConfig { dt: 0.01, t_max: 1.0, drag: 0.5, seed: 0 };
        let w = WorldState {
            time: 0.0,
            attackers: vec![AgentState::at_rest(Vec2::new(3.0, 4.0))],
            defenders: vec![AgentState::at_rest(Vec2::new(-1.0, 2.0))],
            virtual_agent: None,
            phase: Phase::new(0.0),
        };
        let c = Controls { attackers: vec![Vec2::ZERO], defenders: vec![Vec2::ZERO], virtual_agent: Vec2::ZERO };
        let next = step(&w, &c, &config).unwrap();
        assert_eq!(next.attackers, w.attackers);
        assert_eq!(next.defenders, w.defenders);
    }

    #[test]
    fn non_finite_is_reported() {
        let config = SimConfig { dt: 0.01, t_max: 1.0, drag: 0.5, seed: 0 };
        let w = WorldState {
            time: 0.0,
            attackers: vec![],
            defenders: vec![AgentState::at_rest(Vec2::ZERO)],
            virtual_agent: None,
            phase: Phase::new(0.0),
        };
        let c = Controls { defenders: vec![Vec2::new(f64::NAN, 0.0)], ..Default::default() };
        assert!(matches!(step(&w, &c, &config), Err(Error::NonFiniteState { .. })));
    }

    #[test]
    fn metric_examples() {
        let flock = crate::flock::tests::params();
        let herding = crate::herding::tests::params();
        let rd = herding.defender_potential.min_distance;
        let d = [AgentState::at_rest(Vec2::ZERO), AgentState::at_rest(Vec2::new(2.0 * rd, 0.0))];
        let m = compute_metrics(&[], &d, &flock, &herding, &[]);
        assert!((m.defender_defender - 0.5).abs() < 1e-15);
        assert_eq!(m.attacker_obstacle, 0.0);

        let d = [AgentState::at_rest(Vec2::ZERO), AgentState::at_rest(Vec2::new(rd, 0.0))];
        assert!((compute_metrics(&[], &d, &flock, &herding, &[]).defender_defender - 1.0).abs() < 1e-15);

        let ob = Obstacle::from_rectangle(Vec2::ZERO, 2.0, 2.0, 0.05, 4, 0.5).unwrap();
        let far = [AgentState::at_rest(Vec2::new(1000.0, 0.0))];
        let other = [AgentState::at_rest(Vec2::new(0.0, -1000.0))];
        let m = compute_metrics(&far, &other, &flock, &herding, &[ob]);
        assert!(m.max() < 1e-3);
    }
}
