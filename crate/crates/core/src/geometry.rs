//! Planar vector math and the shared geometric vocabulary: blending
//! functions, signed powers, saturation, obstacles and circular areas.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A planar vector. Used for positions (m), velocities (m/s) and
/// accelerations (m/s²) alike.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl From<[f64; 2]> for Vec2 {
    fn from(v: [f64; 2]) -> Self {
        Vec2::new(v[0], v[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3-D cross product.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    /// Unit vector in the same direction, or zero for the zero vector.
    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        if n > 0.0 {
            self / n
        } else {
            Vec2::ZERO
        }
    }

    /// Counter-clockwise rotation by π/2.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl SubAssign for Vec2 {
    fn sub_assign(&mut self, o: Vec2) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    fn div(self, s: f64) -> Vec2 {
        Vec2::new(self.x / s, self.y / s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl std::iter::Sum for Vec2 {
    fn sum<I: Iterator<Item = Vec2>>(iter: I) -> Vec2 {
        iter.fold(Vec2::ZERO, Add::add)
    }
}

/// Position and velocity of one disc agent.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AgentState {
    pub position: Vec2,
    pub velocity: Vec2,
}

impl AgentState {
    pub const fn new(position: Vec2, velocity: Vec2) -> Self {
        AgentState { position, velocity }
    }

    pub fn at_rest(position: Vec2) -> Self {
        AgentState::new(position, Vec2::ZERO)
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite() && self.velocity.is_finite()
    }
}

/// A closed disc, used for the protected and the safe area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: Vec2,
    pub radius: f64,
}

impl Disk {
    pub fn new(center: Vec2, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !center.is_finite() {
            return Err(Error::Domain(format!("disk radius must be positive, got {radius}")));
        }
        Ok(Disk { center, radius })
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.distance(self.center) <= self.radius
    }
}

/// `x·‖x‖^(α−1)`, with the zero vector mapped to itself.
pub fn sig_alpha(x: Vec2, alpha: f64) -> Vec2 {
    let n = x.norm();
    if n == 0.0 {
        Vec2::ZERO
    } else {
        x * n.powf(alpha - 1.0)
    }
}

/// Scalar signed power `sgn(x)|x|^p`.
pub fn sig_scalar(x: f64, p: f64) -> f64 {
    x.signum() * x.abs().powf(p)
}

/// Saturation to norm `u_max`, preserving direction.
pub fn saturate(u: Vec2, u_max: f64) -> Vec2 {
    let n = u.norm();
    if n <= u_max {
        u
    } else {
        u * (u_max / n)
    }
}

/// Unit vector at angle `theta` from the x-axis.
pub fn unit_from_angle(theta: f64) -> Vec2 {
    Vec2::new(theta.cos(), theta.sin())
}

/// Wrap an angle to (−π, π]. Only used when reporting.
pub fn wrap_angle(theta: f64) -> f64 {
    use std::f64::consts::PI;
    let mut a = theta.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// The doublet `(lower, upper)` of a C¹ cubic switch that is 1 below
/// `lower` and 0 above `upper`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlendSpec {
    pub lower: f64,
    pub upper: f64,
}

impl BlendSpec {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        let spec = BlendSpec { lower, upper };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lower < self.upper) || !self.lower.is_finite() || !self.upper.is_finite() {
            return Err(Error::Domain(format!(
                "blend doublet requires lower < upper, got ({}, {})",
                self.lower, self.upper
            )));
        }
        Ok(())
    }

    /// Cubic coefficients `[A, B, C, D]` of the transition band.
    pub fn coefficients(&self) -> [f64; 4] {
        let (lo, hi) = (self.lower, self.upper);
        let d3 = (hi - lo).powi(3);
        [
            2.0 / d3,
            -3.0 * (hi + lo) / d3,
            6.0 * hi * lo / d3,
            hi * hi * (hi - 3.0 * lo) / d3,
        ]
    }

    pub fn eval(&self, delta: f64) -> f64 {
        blend(self, delta)
    }

    /// Analytic derivative of [`blend`].
    pub fn derivative(&self, delta: f64) -> f64 {
        if delta <= self.lower || delta >= self.upper {
            return 0.0;
        }
        self.transition_slope(delta)
    }

    /// The band cubic without the clamping outside `[lower, upper]`, in the
    /// normalised form `(1 − t)²(1 + 2t)`, `t = (δ − lower)/(upper − lower)`.
    pub fn transition(&self, delta: f64) -> f64 {
        let t = (delta - self.lower) / (self.upper - self.lower);
        (1.0 - t) * (1.0 - t) * (1.0 + 2.0 * t)
    }

    pub fn transition_slope(&self, delta: f64) -> f64 {
        let w = self.upper - self.lower;
        let t = (delta - self.lower) / w;
        6.0 * t * (t - 1.0) / w
    }

    /// True when the switch is nonzero at `delta`.
    pub fn is_active(&self, delta: f64) -> bool {
        delta < self.upper
    }
}

pub fn blend(spec: &BlendSpec, delta: f64) -> f64 {
    if delta <= spec.lower {
        1.0
    } else if delta >= spec.upper {
        0.0
    } else {
        spec.transition(delta).clamp(0.0, 1.0)
    }
}

/// Axis-aligned rectangular obstacle with its superelliptic envelope
/// `|Δx/a|^(2n) + |Δy/b|^(2n) − 1 = level`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: Vec2,
    pub width: f64,
    pub height: f64,
    pub semi_axis_x: f64,
    pub semi_axis_y: f64,
    pub exponent: u32,
    pub level: f64,
}

pub const DEFAULT_ENVELOPE_MARGIN: f64 = 0.05;
pub const DEFAULT_ENVELOPE_EXPONENT: u32 = 4;

impl Obstacle {
    /// Build the envelope from a rectangle: semi-axes are the half-extents
    /// inflated by `margin`.
    pub fn from_rectangle(
        center: Vec2,
        width: f64,
        height: f64,
        margin: f64,
        exponent: u32,
        level: f64,
    ) -> Result<Self> {
        let ob = Obstacle {
            center,
            width,
            height,
            semi_axis_x: 0.5 * width * (1.0 + margin),
            semi_axis_y: 0.5 * height * (1.0 + margin),
            exponent,
            level,
        };
        ob.validate()?;
        Ok(ob)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Domain(msg));
        if !(self.width > 0.0 && self.height > 0.0) {
            return bad(format!("obstacle extents must be positive ({} x {})", self.width, self.height));
        }
        if self.exponent == 0 {
            return bad("obstacle exponent must be a positive integer".into());
        }
        if !(self.level > 0.0) {
            return bad(format!("obstacle margin level must be positive, got {}", self.level));
        }
        if self.semi_axis_x < 0.5 * self.width || self.semi_axis_y < 0.5 * self.height {
            return bad("obstacle semi-axes must cover the rectangle half-extents".into());
        }
        let corner = self.center + Vec2::new(0.5 * self.width, 0.5 * self.height);
        let e = self.superelliptic_distance(corner);
        if !(e < self.level) {
            return bad(format!(
                "rectangle corner lies outside the envelope contour (E = {e:.6} >= level {})",
                self.level
            ));
        }
        Ok(())
    }

    pub fn superelliptic_distance(&self, r: Vec2) -> f64 {
        superelliptic_distance(self, r)
    }

    /// Gradient of the superelliptic distance at `r`.
    pub fn gradient(&self, r: Vec2) -> Vec2 {
        let p = 2 * self.exponent as i32;
        let d = r - self.center;
        let sx = d.x / self.semi_axis_x;
        let sy = d.y / self.semi_axis_y;
        Vec2::new(
            p as f64 * sx.powi(p - 1) / self.semi_axis_x,
            p as f64 * sy.powi(p - 1) / self.semi_axis_y,
        )
    }

    /// Whether `r` lies inside the rectangle itself.
    pub fn rectangle_contains(&self, r: Vec2) -> bool {
        let d = r - self.center;
        d.x.abs() <= 0.5 * self.width && d.y.abs() <= 0.5 * self.height
    }
}

pub fn superelliptic_distance(ob: &Obstacle, r: Vec2) -> f64 {
    let p = 2 * ob.exponent as i32;
    let d = r - ob.center;
    (d.x / ob.semi_axis_x).abs().powi(p) + (d.y / ob.semi_axis_y).abs().powi(p) - 1.0
}
