//! Scenario documents: JSON with a versioned `schema` field, SI units
//! throughout. Parsing returns either a fully validated scenario or every
//! violated condition by name.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};
use crate::flock::FlockParams;
use crate::geometry::{unit_from_angle, AgentState, Disk, Obstacle, Vec2, DEFAULT_ENVELOPE_EXPONENT, DEFAULT_ENVELOPE_MARGIN};
use crate::herding::{self, gather_heading, gather_targets, HerdingParams};

pub const SCHEMA: &str = "stringnet-scenario/1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Integration step (s).
    pub dt: f64,
    /// Horizon (s).
    pub t_max: f64,
    /// Linear drag coefficient C_d (1/s).
    pub drag: f64,
    /// Seed for sampled initial conditions.
    #[serde(default)]
    pub seed: u64,
}

/// Rectangle plus the parameters of its superelliptic envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstacleSpec {
    pub center: Vec2,
    pub width: f64,
    pub height: f64,
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default = "default_exponent")]
    pub exponent: u32,
    /// Contour level ξ^m the agents must stay outside of.
    pub level: f64,
}

fn default_margin() -> f64 {
    DEFAULT_ENVELOPE_MARGIN
}

fn default_exponent() -> u32 {
    DEFAULT_ENVELOPE_EXPONENT
}

impl ObstacleSpec {
    pub fn build(&self) -> Result<Obstacle> {
        Obstacle::from_rectangle(self.center, self.width, self.height, self.margin, self.exponent, self.level)
    }
}

/// Uniform samples in a disc, rejected until pairwise separated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscSampler {
    pub center: Vec2,
    pub radius: f64,
    pub count: usize,
    pub min_separation: f64,
    #[serde(default)]
    pub velocity: Vec2,
}

const SAMPLER_ATTEMPTS: usize = 10_000;

impl DiscSampler {
    pub fn sample(&self, seed: u64) -> Result<Vec<AgentState>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out: Vec<AgentState> = Vec::with_capacity(self.count);
        let mut attempts = 0;
        while out.len() < self.count {
            attempts += 1;
            if attempts > SAMPLER_ATTEMPTS {
                return Err(Error::Validation(vec![Violation::new(
                    "attacker sampler",
                    format!(
                        "could not place {} attackers {} m apart in a disc of radius {}",
                        self.count, self.min_separation, self.radius
                    ),
                )]));
            }
            let r = self.radius * rng.gen::<f64>().sqrt();
            let theta = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            let p = self.center + unit_from_angle(theta) * r;
            if out.iter().all(|a| a.position.distance(p) >= self.min_separation) {
                out.push(AgentState::new(p, self.velocity));
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackerInit {
    States(Vec<AgentState>),
    Sampler(DiscSampler),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub schema: String,
    #[serde(default)]
    pub name: String,
    /// Free-form notes keyed by parameter path, e.g. which values are
    /// tuning choices.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub annotations: BTreeMap<String, String>,
    pub protected_area: Disk,
    pub safe_area: Disk,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
    pub attackers: AttackerInit,
    /// Attacker body radius (m).
    pub attacker_radius: f64,
    pub defenders: Vec<AgentState>,
    pub flock: FlockParams,
    pub herding: HerdingParams,
    pub sim: SimConfig,
}

impl Scenario {
    /// Parse without validating.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::Parse { line: e.line(), column: e.column(), message: e.to_string() })
    }

    /// Parse and validate.
    pub fn parse(text: &str) -> Result<Self> {
        let s = Self::from_json(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn obstacles(&self) -> Result<Vec<Obstacle>> {
        self.obstacles.iter().map(ObstacleSpec::build).collect()
    }

    /// Initial attacker states; sampled ones use `seed`.
    pub fn attacker_states(&self, seed: u64) -> Result<Vec<AgentState>> {
        match &self.attackers {
            AttackerInit::States(s) => Ok(s.clone()),
            AttackerInit::Sampler(d) => d.sample(seed),
        }
    }

    pub fn attacker_count(&self) -> usize {
        match &self.attackers {
            AttackerInit::States(s) => s.len(),
            AttackerInit::Sampler(d) => d.count,
        }
    }

    /// Defender count required by the connectivity radius and tolerance.
    pub fn min_defenders(&self) -> Result<usize> {
        let h = &self.herding;
        herding::min_defenders(h.connectivity_radius, h.formation_tolerance, h.net_radius_max)
    }

    /// Tracking-error bound b_d for the configured gains.
    pub fn tracking_bound(&self) -> Result<f64> {
        let h = &self.herding;
        herding::tracking_bound(h.k1, h.k2, self.flock.u_max, h.c0)
    }

    pub fn clearance_margin(&self) -> Result<f64> {
        herding::clearance_margin(self.herding.herd_u_max, self.sim.drag)
    }

    /// Estimated duration of the formation phase: the configured value, or
    /// 1.5× the unperturbed gathering settling time from the largest
    /// initial defender error.
    pub fn formation_time_estimate(&self, attackers: &[AgentState]) -> f64 {
        if let Some(t) = self.herding.formation_time_estimate {
            return t;
        }
        let targets = self.initial_gather_targets(attackers);
        let worst = self
            .defenders
            .iter()
            .zip(&targets)
            .map(|(d, t)| d.position.distance(t.position))
            .fold(0.0, f64::max);
        let settle = herding::gathering_settling_time(&self.herding, Vec2::new(worst.max(1e-3), 0.0), 1e-3, self.sim.dt, 1e4)
            .unwrap_or(f64::INFINITY);
        1.5 * settle
    }

    /// Farthest the attackers' center of mass can move during formation.
    pub fn acom_travel_bound(&self, attackers: &[AgentState]) -> f64 {
        self.flock.max_speed(self.sim.drag) * self.formation_time_estimate(attackers)
    }

    pub fn initial_gather_targets(&self, attackers: &[AgentState]) -> Vec<herding::DesiredState> {
        let heading = gather_heading(acom(attackers), self.protected_area.center);
        gather_targets(&self.herding, self.defenders.len(), heading, self.protected_area.center)
    }

    /// Every violated condition, using the scenario's own seed for sampled
    /// attackers.
    pub fn violations(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        let mut push = |name: &str, detail: String| v.push(Violation::new(name, detail));
        if self.schema != SCHEMA {
            push("schema", format!("expected \"{SCHEMA}\", got \"{}\"", self.schema));
        }
        let c = &self.sim;
        if !(c.dt > 0.0 && c.t_max >= c.dt && c.drag > 0.0) {
            push("simulation settings", format!("need dt > 0, t_max >= dt, drag > 0 (dt {}, t_max {}, drag {})", c.dt, c.t_max, c.drag));
        }
        if !(self.protected_area.radius > 0.0 && self.safe_area.radius > 0.0) {
            push("area radius", "protected and safe areas need positive radii".into());
        }
        if !(self.attacker_radius >= 0.0) {
            push("attacker radius", format!("must be non-negative, got {}", self.attacker_radius));
        }
        let mut obstacles = Vec::new();
        for (k, o) in self.obstacles.iter().enumerate() {
            match o.build() {
                Ok(ob) => obstacles.push(ob),
                Err(e) => push("obstacle envelope", format!("obstacle {k}: {e}")),
            }
        }
        if let Err(e) = self.flock.validate() {
            push("attacker parameters", e.to_string());
        }
        let n_d = self.defenders.len();
        for x in self.herding.violations(n_d, self.flock.u_max) {
            push(&x.condition, x.detail);
        }
        let h = &self.herding;
        if self.safe_area.radius <= h.net_radius_max {
            push(
                "safe area radius",
                format!("safe radius {} must exceed the maximum net radius {}", self.safe_area.radius, h.net_radius_max),
            );
        }
        match self.min_defenders() {
            Ok(min) if n_d < min => push("defender count below minimum", format!("{n_d} defenders, at least {min} required")),
            Ok(_) => {}
            Err(e) => push("defender count below minimum", e.to_string()),
        }
        if let Ok(rho_bar) = self.clearance_margin() {
            let need = h.net_radius + h.defender_radius + rho_bar;
            if !(h.formation_obstacle_potential.min_distance > need) {
                push(
                    "formation clearance",
                    format!(
                        "formation obstacle safety distance {} must exceed net radius + defender radius + clearance margin = {need:.4}",
                        h.formation_obstacle_potential.min_distance
                    ),
                );
            }
        }
        if self.attacker_count() == 0 {
            push("attacker count", "at least one attacker is required".into());
        }
        let attackers = match self.attacker_states(self.sim.seed) {
            Ok(a) => a,
            Err(e) => {
                for x in e.violations() {
                    push(&x.condition, x.detail.clone());
                }
                return v;
            }
        };
        if attackers.is_empty() || n_d < 2 {
            return v;
        }
        let targets = self.initial_gather_targets(&attackers);
        for (j, t) in targets.iter().enumerate() {
            for (k, ob) in obstacles.iter().enumerate() {
                let e = ob.superelliptic_distance(t.position);
                if !(e > h.obstacle_blend.upper) {
                    push(
                        "gathering targets clear of obstacles",
                        format!("target of defender {j} has E = {e:.4} from obstacle {k}, needs > {}", h.obstacle_blend.upper),
                    );
                }
            }
        }
        let travel = self.acom_travel_bound(&attackers);
        if !(h.gather_distance > self.protected_area.radius + travel) {
            push(
                "gathering distance",
                format!(
                    "gather distance {} must exceed protected radius + attacker travel during formation = {:.4}",
                    h.gather_distance,
                    self.protected_area.radius + travel
                ),
            );
        }
        for (i, a) in attackers.iter().enumerate() {
            for (k, ob) in obstacles.iter().enumerate() {
                if ob.superelliptic_distance(a.position) <= ob.level {
                    push("initial positions", format!("attacker {i} starts inside the envelope of obstacle {k}"));
                }
            }
            if a.position.distance(self.protected_area.center) <= self.protected_area.radius + self.attacker_radius {
                push("initial positions", format!("attacker {i} starts in the protected area"));
            }
        }
        for (j, d) in self.defenders.iter().enumerate() {
            for (k, ob) in obstacles.iter().enumerate() {
                if ob.superelliptic_distance(d.position) <= ob.level {
                    push("initial positions", format!("defender {j} starts inside the envelope of obstacle {k}"));
                }
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }
}

/// Attackers' center of mass.
pub fn acom(attackers: &[AgentState]) -> Vec2 {
    attackers.iter().map(|a| a.position).sum::<Vec2>() / attackers.len().max(1) as f64
}
