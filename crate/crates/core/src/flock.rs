//! Attacker control stack: navigation and cohesion flocking with
//! β-agent obstacle avoidance, defender avoidance, string avoidance, and
//! the saturated combination of the three.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{blend, saturate, AgentState, BlendSpec, Obstacle, Vec2};
use crate::potentials::{u_p_floored, PotentialSpec, RelativeState};
use crate::virtual_agents::{project_onto_contour, project_onto_string, StringSegment};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlockParams {
    /// Navigation gain towards the protected-area center (1/s²).
    pub k_nav: f64,
    /// Acceleration bound (m/s²).
    pub u_max: f64,
    /// Radius of each attacker's sensing zone (m).
    pub sensing_radius: f64,
    /// Attackers closer than this are neighbours in the flock graph (m).
    pub neighbor_radius: f64,
    /// Doublet on the superelliptic distance.
    pub obstacle_blend: BlendSpec,
    pub defender_blend: BlendSpec,
    pub string_blend: BlendSpec,
    pub neighbor_potential: PotentialSpec,
    pub defender_potential: PotentialSpec,
    pub string_potential: PotentialSpec,
    /// Potential against β-agents on the obstacle contours.
    pub obstacle_potential: PotentialSpec,
}

impl FlockParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Domain(m));
        if !(self.u_max > 0.0) {
            return bad(format!("attacker u_max must be positive, got {}", self.u_max));
        }
        if !(self.k_nav >= 0.0 && self.sensing_radius > 0.0 && self.neighbor_radius > 0.0) {
            return bad("attacker gains and radii must be positive".into());
        }
        for b in [&self.obstacle_blend, &self.defender_blend, &self.string_blend] {
            b.validate()?;
        }
        for p in [
            &self.neighbor_potential,
            &self.defender_potential,
            &self.string_potential,
            &self.obstacle_potential,
        ] {
            p.validate()?;
        }
        if !(self.defender_potential.desired_offset > self.defender_blend.upper) {
            return bad(format!(
                "defender potential offset {} must exceed the defender blend upper bound {}",
                self.defender_potential.desired_offset, self.defender_blend.upper
            ));
        }
        if self.neighbor_potential.equilibrium_distance() > self.neighbor_radius {
            return bad(format!(
                "flock spacing {} exceeds the neighbour radius {}",
                self.neighbor_potential.equilibrium_distance(),
                self.neighbor_radius
            ));
        }
        Ok(())
    }

    /// Terminal speed under saturated control and linear drag.
    pub fn max_speed(&self, drag: f64) -> f64 {
        self.u_max / drag
    }
}

/// Undirected attacker neighbour graph.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FlockGraph {
    adjacency: Vec<Vec<usize>>,
}

impl FlockGraph {
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].contains(&j)
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }
}

pub fn build_flock_graph(states: &[AgentState], params: &FlockParams) -> FlockGraph {
    let n = states.len();
    let mut adjacency = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if states[i].position.distance(states[j].position) <= params.neighbor_radius {
                adjacency[i].push(j);
                adjacency[j].push(i);
            }
        }
    }
    FlockGraph { adjacency }
}

/// Counts potential evaluations that hit the distance floor.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Diagnostics {
    pub near_violations: u32,
}

impl Diagnostics {
    fn record(&mut self, floored: bool) {
        if floored {
            self.near_violations += 1;
        }
    }
}

/// Blend-gated repulsion of `agent` from the contour of one obstacle, the
/// superelliptic distance being the blend argument. Returns zero outside
/// the blend support.
pub fn obstacle_term(
    ob: &Obstacle,
    agent: &AgentState,
    spec: &PotentialSpec,
    doublet: &BlendSpec,
    diag: &mut Diagnostics,
) -> Result<Vec2> {
    let e = ob.superelliptic_distance(agent.position);
    let sigma = blend(doublet, e);
    if sigma <= 0.0 {
        return Ok(Vec2::ZERO);
    }
    let rep = if e > ob.level {
        let va = project_onto_contour(ob, agent.position, agent.velocity)?;
        let rel = RelativeState::new(agent.position, agent.velocity, va.position, va.velocity);
        u_p_floored(spec, &rel, Some(ob.gradient(agent.position)))
    } else {
        // Overshot the contour within one step: push straight back out.
        let outward = ob.gradient(agent.position);
        let n = outward.normalized();
        let tangential = agent.velocity - n * agent.velocity.dot(n);
        let rel = RelativeState::new(agent.position, agent.velocity, agent.position, tangential);
        u_p_floored(spec, &rel, Some(outward))
    };
    diag.record(rep.floored);
    Ok(rep.accel * sigma)
}

/// Read-only snapshot the attacker controllers are evaluated against.
#[derive(Debug, Clone, Copy)]
pub struct FlockContext<'a> {
    pub attackers: &'a [AgentState],
    pub defenders: &'a [AgentState],
    /// Established strings as defender index pairs.
    pub strings: &'a [(usize, usize)],
    pub obstacles: &'a [Obstacle],
    pub graph: &'a FlockGraph,
    /// Navigation target (the protected-area center).
    pub target: Vec2,
    pub drag: f64,
}

/// Navigation, neighbour cohesion and obstacle avoidance.
pub fn flock_accel(
    i: usize,
    states: &[AgentState],
    graph: &FlockGraph,
    obstacles: &[Obstacle],
    params: &FlockParams,
    target: Vec2,
    diag: &mut Diagnostics,
) -> Result<Vec2> {
    let me = &states[i];
    let mut u = (target - me.position) * params.k_nav;
    for &k in graph.neighbors(i) {
        let other = &states[k];
        let rel = RelativeState::new(me.position, me.velocity, other.position, other.velocity);
        let rep = u_p_floored(&params.neighbor_potential, &rel, None);
        diag.record(rep.floored);
        u += rep.accel;
    }
    for ob in obstacles {
        u += obstacle_term(ob, me, &params.obstacle_potential, &params.obstacle_blend, diag)?;
    }
    Ok(u)
}

pub fn defender_avoid_accel(
    i: usize,
    states: &[AgentState],
    defenders: &[AgentState],
    params: &FlockParams,
    diag: &mut Diagnostics,
) -> Vec2 {
    let me = &states[i];
    let mut u = Vec2::ZERO;
    for d in defenders {
        let dist = me.position.distance(d.position);
        if dist >= params.sensing_radius {
            continue;
        }
        let sigma = blend(&params.defender_blend, dist);
        if sigma <= 0.0 {
            continue;
        }
        let rel = RelativeState::new(me.position, me.velocity, d.position, d.velocity);
        let rep = u_p_floored(&params.defender_potential, &rel, None);
        diag.record(rep.floored);
        u += rep.accel * sigma;
    }
    u
}

pub fn string_avoid_accel(
    i: usize,
    states: &[AgentState],
    defenders: &[AgentState],
    strings: &[(usize, usize)],
    params: &FlockParams,
    diag: &mut Diagnostics,
) -> Vec2 {
    let me = &states[i];
    let mut u = Vec2::ZERO;
    for &(a, b) in strings {
        let seg = StringSegment { endpoint_a: defenders[a], endpoint_b: defenders[b] };
        let va = project_onto_string(&seg, me.position);
        let dist = me.position.distance(va.position);
        if dist >= params.sensing_radius {
            continue;
        }
        let sigma = blend(&params.string_blend, dist);
        if sigma <= 0.0 {
            continue;
        }
        let rel = RelativeState::new(me.position, me.velocity, va.position, va.velocity);
        let rep = u_p_floored(&params.string_potential, &rel, None);
        diag.record(rep.floored);
        u += rep.accel * sigma;
    }
    u
}

/// Saturated sum of all attacker terms plus drag compensation.
pub fn attacker_control(
    i: usize,
    ctx: &FlockContext,
    params: &FlockParams,
    diag: &mut Diagnostics,
) -> Result<Vec2> {
    let me = &ctx.attackers[i];
    let raw = flock_accel(i, ctx.attackers, ctx.graph, ctx.obstacles, params, ctx.target, diag)?
        + defender_avoid_accel(i, ctx.attackers, ctx.defenders, params, diag)
        + string_avoid_accel(i, ctx.attackers, ctx.defenders, ctx.strings, params, diag)
        + me.velocity * ctx.drag;
    Ok(saturate(raw, params.u_max))
}
