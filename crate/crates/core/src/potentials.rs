//! Pairwise logarithmic barrier potential and the damped-gradient control
//! primitive every avoidance and cohesion term is built from.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;

/// Parameters of one pairwise potential.
///
/// The potential is infinite at `min_distance`, minimal at
/// `min_distance + desired_offset`, and grows logarithmically beyond.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    /// Minimum safety distance (m).
    pub min_distance: f64,
    /// Offset of the desired distance beyond the safety distance (m).
    pub desired_offset: f64,
    /// Relative-velocity damping gain (1/s).
    pub damping: f64,
    /// Gradient gain.
    pub gain: f64,
}

impl PotentialSpec {
    pub fn new(min_distance: f64, desired_offset: f64, damping: f64, gain: f64) -> Result<Self> {
        let spec = PotentialSpec { min_distance, desired_offset, damping, gain };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min_distance >= 0.0) {
            return Err(Error::Domain(format!("min_distance must be >= 0, got {}", self.min_distance)));
        }
        if !(self.desired_offset > 0.0) || !(self.desired_offset > self.min_distance) {
            return Err(Error::Domain(format!(
                "desired_offset must be positive and exceed min_distance ({} vs {})",
                self.desired_offset, self.min_distance
            )));
        }
        if !(self.damping >= 0.0 && self.gain >= 0.0) {
            return Err(Error::Domain("potential gains must be non-negative".into()));
        }
        Ok(())
    }

    /// Distance at which the potential is minimal.
    pub fn equilibrium_distance(&self) -> f64 {
        self.min_distance + self.desired_offset
    }

    fn gap(&self, distance: f64) -> Result<f64> {
        let u = distance - self.min_distance;
        if u > 0.0 {
            Ok(u)
        } else {
            Err(Error::Domain(format!(
                "distance {distance} is not above the safety distance {}",
                self.min_distance
            )))
        }
    }
}

/// Stacked state of a pair `(i, j)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeState {
    pub r_i: Vec2,
    pub v_i: Vec2,
    pub r_j: Vec2,
    pub v_j: Vec2,
}

impl RelativeState {
    pub fn new(r_i: Vec2, v_i: Vec2, r_j: Vec2, v_j: Vec2) -> Self {
        RelativeState { r_i, v_i, r_j, v_j }
    }

    pub fn distance(&self) -> f64 {
        self.r_i.distance(self.r_j)
    }
}

pub fn potential(spec: &PotentialSpec, distance: f64) -> Result<f64> {
    let u = spec.gap(distance)?;
    let rt = spec.desired_offset;
    Ok((rt / u + u / rt).ln())
}

/// dV/dR in closed form: `(u² − R̃²) / (u (u² + R̃²))` with `u = R − R̂`.
pub fn potential_slope(spec: &PotentialSpec, distance: f64) -> Result<f64> {
    let u = spec.gap(distance)?;
    Ok(slope_of_gap(spec, u))
}

fn slope_of_gap(spec: &PotentialSpec, u: f64) -> f64 {
    let rt2 = spec.desired_offset * spec.desired_offset;
    let u2 = u * u;
    (u2 - rt2) / (u * (u2 + rt2))
}

/// Gradient of the potential with respect to `r_i`.
pub fn potential_gradient(spec: &PotentialSpec, r_i: Vec2, r_j: Vec2) -> Result<Vec2> {
    let d = r_i - r_j;
    let dist = d.norm();
    Ok(d * (potential_slope(spec, dist)? / dist))
}

/// `−ζ (v_i − v_j) − μ ∇_{r_i} V`.
pub fn u_p(spec: &PotentialSpec, rel: &RelativeState) -> Result<Vec2> {
    let grad = potential_gradient(spec, rel.r_i, rel.r_j)?;
    Ok(-(rel.v_i - rel.v_j) * spec.damping - grad * spec.gain)
}

/// Distances closer than this to the safety distance are floored.
pub const DISTANCE_FLOOR: f64 = 1e-9;

/// Result of a controller-side potential evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Repulsion {
    pub accel: Vec2,
    /// The pair was at or inside the safety distance and the floor applied.
    pub floored: bool,
}

/// [`u_p`] for use inside controllers: a pair that a discrete step pushed
/// into the forbidden band is evaluated at `R̂ + DISTANCE_FLOOR` instead,
/// giving a very large but finite repulsion. `outward` is used as the
/// repulsion direction when the two positions coincide.
pub fn u_p_floored(spec: &PotentialSpec, rel: &RelativeState, outward: Option<Vec2>) -> Repulsion {
    let d = rel.r_i - rel.r_j;
    let dist = d.norm();
    let floor = spec.min_distance + DISTANCE_FLOOR;
    let floored = dist <= floor;
    let u = if floored { DISTANCE_FLOOR } else { dist - spec.min_distance };
    let dir = if dist > 0.0 { d / dist } else { outward.unwrap_or(Vec2::new(1.0, 0.0)).normalized() };
    let accel = -(rel.v_i - rel.v_j) * spec.damping - dir * (spec.gain * slope_of_gap(spec, u));
    Repulsion { accel, floored }
}
