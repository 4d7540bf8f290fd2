//! Virtual agents: projections of a real agent onto an obstacle envelope
//! contour, onto a string barrier, or onto the boundary of the attackers'
//! connectivity disc. Each carries a position and a velocity that the
//! pairwise potentials then treat like a neighbour.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{AgentState, Obstacle, Vec2};

/// Position and velocity of a virtual agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VirtualAgent {
    pub position: Vec2,
    pub velocity: Vec2,
}

/// A string barrier between two connected defenders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StringSegment {
    pub endpoint_a: AgentState,
    pub endpoint_b: AgentState,
}

const COARSE_SAMPLES: usize = 64;
const MAX_ITERATIONS: usize = 100;
const RESIDUAL_TOL: f64 = 1e-12;
const AXIS_TOL: f64 = 1e-12;
const ON_CONTOUR_TOL: f64 = 1e-12;

/// The level contour `E = level` of one obstacle, parameterised by the
/// polar angle φ in coordinates scaled by the semi-axes:
///
/// `c(φ) = center + (A cos φ, B sin φ) / (cos²ⁿφ + sin²ⁿφ)^(1/2n)`
///
/// with `A = a (1 + level)^(1/2n)`. The map is smooth for every integer
/// `n ≥ 1`, which keeps the 1-D search well conditioned on the flat faces
/// of high-exponent envelopes.
struct Contour<'a> {
    ob: &'a Obstacle,
    n2: i32,
    ax: f64,
    by: f64,
}

impl<'a> Contour<'a> {
    fn new(ob: &'a Obstacle) -> Self {
        let n2 = 2 * ob.exponent as i32;
        let scale = (1.0 + ob.level).powf(1.0 / n2 as f64);
        Contour { ob, n2, ax: ob.semi_axis_x * scale, by: ob.semi_axis_y * scale }
    }

    fn shape(&self, phi: f64) -> (f64, f64, f64, f64) {
        let (s, c) = phi.sin_cos();
        let sum = c.powi(self.n2) + s.powi(self.n2);
        let rho = sum.powf(-1.0 / self.n2 as f64);
        (s, c, sum, rho)
    }

    fn point(&self, phi: f64) -> Vec2 {
        let (s, c, _, rho) = self.shape(phi);
        self.ob.center + Vec2::new(self.ax * c * rho, self.by * s * rho)
    }

    fn derivative(&self, phi: f64) -> Vec2 {
        let (s, c, sum, rho) = self.shape(phi);
        let g = s * c * (s.powi(self.n2 - 2) - c.powi(self.n2 - 2)) / sum;
        Vec2::new(-self.ax * rho * (s + c * g), self.by * rho * (c - s * g))
    }

    /// Offset from the query projected on the unit tangent at c(φ). Zero at
    /// every critical point of the distance; negative-to-positive crossings
    /// are local minima.
    fn residual(&self, phi: f64, r: Vec2) -> f64 {
        let d = self.derivative(phi);
        (self.point(phi) - r).dot(d) / d.norm()
    }
}

/// Unit tangent of the contour through `p`, counter-clockwise about the
/// obstacle center.
pub fn contour_tangent(ob: &Obstacle, p: Vec2) -> Vec2 {
    ob.gradient(p).perp().normalized()
}

/// `E(p) − level`: how far `p` is from satisfying the contour equation.
pub fn contour_residual(ob: &Obstacle, p: Vec2) -> f64 {
    ob.superelliptic_distance(p) - ob.level
}

/// Component of `r − p` along the contour tangent at `p`; zero when the
/// offset is normal to the contour.
pub fn orthogonality_residual(ob: &Obstacle, r: Vec2, p: Vec2) -> f64 {
    (r - p).dot(contour_tangent(ob, p))
}

/// Tangential velocity of a virtual agent at `p` for a real agent moving
/// with `v`: the tangent is flipped so that it points along the motion,
/// and the counter-clockwise orientation is kept when `v` is normal.
fn tangential_velocity(tangent: Vec2, v: Vec2) -> Vec2 {
    let along = v.dot(tangent);
    let t = if along < 0.0 { -tangent } else { tangent };
    t * v.dot(t)
}

/// β/δ-agent of an agent at `r` moving with `v`: the nearest point of the
/// obstacle's level contour, moving with the tangential part of `v`.
pub fn project_onto_contour(ob: &Obstacle, r: Vec2, v: Vec2) -> Result<VirtualAgent> {
    let e = ob.superelliptic_distance(r);
    if e < ob.level - ON_CONTOUR_TOL {
        return Err(Error::InsideContour { distance: e, level: ob.level });
    }
    let position = if (e - ob.level).abs() <= ON_CONTOUR_TOL {
        r
    } else {
        nearest_contour_point(ob, r)?
    };
    let velocity = tangential_velocity(contour_tangent(ob, position), v);
    Ok(VirtualAgent { position, velocity })
}

fn nearest_contour_point(ob: &Obstacle, r: Vec2) -> Result<Vec2> {
    let contour = Contour::new(ob);
    let d = r - ob.center;

    // On a symmetry axis the vertex on the same side is the nearest point.
    if d.y.abs() < AXIS_TOL && d.x != 0.0 {
        return Ok(ob.center + Vec2::new(contour.ax.copysign(d.x), 0.0));
    }
    if d.x.abs() < AXIS_TOL && d.y != 0.0 {
        return Ok(ob.center + Vec2::new(0.0, contour.by.copysign(d.y)));
    }

    let step = 2.0 * PI / COARSE_SAMPLES as f64;
    let phis: Vec<f64> = (0..=COARSE_SAMPLES).map(|k| -PI + k as f64 * step).collect();
    let res: Vec<f64> = phis.iter().map(|&p| contour.residual(p, r)).collect();
    let dist: Vec<f64> = phis.iter().map(|&p| contour.point(p).distance(r)).collect();

    let mut best: Option<(f64, Vec2)> = None;
    let mut worst_residual = 0.0f64;
    let mut consider = |phi: Option<f64>, fallback_residual: f64| match phi {
        Some(phi) => {
            let p = contour.point(phi);
            let dist = p.distance(r);
            if best.is_none_or(|(bd, _)| dist < bd) {
                best = Some((dist, p));
            }
        }
        None => worst_residual = worst_residual.max(fallback_residual),
    };

    for k in 0..COARSE_SAMPLES {
        let (lo, hi) = (phis[k], phis[k + 1]);
        if res[k] == 0.0 {
            consider(Some(lo), 0.0);
        }
        if res[k] < 0.0 && res[k + 1] > 0.0 {
            let found = refine_bracket(&contour, r, lo, hi, res[k], res[k + 1]);
            consider(found.ok(), found.err().unwrap_or(0.0));
        } else {
            // A minimum/maximum pair inside one sample interval produces no
            // sign change; catch it through the sampled distance instead.
            let prev = if k == 0 { dist[COARSE_SAMPLES - 1] } else { dist[k - 1] };
            if dist[k] <= prev && dist[k] <= dist[k + 1] && !(res[k] == 0.0) {
                let lo = phis[k] - step;
                let hi = phis[k + 1];
                let phi = golden_section(|p| contour.point(p).distance_squared_to(r), lo, hi);
                let found = polish(&contour, r, phi, lo, hi);
                consider(found.ok(), found.err().unwrap_or(0.0));
            }
        }
    }

    match best {
        Some((_, p)) => Ok(p),
        None => Err(Error::ProjectionFailed { residual: worst_residual }),
    }
}

trait DistanceSquared {
    fn distance_squared_to(self, other: Vec2) -> f64;
}

impl DistanceSquared for Vec2 {
    fn distance_squared_to(self, other: Vec2) -> f64 {
        (self - other).norm_squared()
    }
}

fn converged(contour: &Contour, r: Vec2, phi: f64, residual: f64) -> bool {
    residual.abs() <= RESIDUAL_TOL * contour.point(phi).distance(r).max(1.0)
}

/// Safeguarded Newton on the orthogonality residual inside a sign-change
/// bracket, falling back to bisection whenever the Newton step leaves the
/// bracket or stalls. Returns the angle, or the best residual on failure.
fn refine_bracket(
    contour: &Contour,
    r: Vec2,
    mut lo: f64,
    mut hi: f64,
    mut f_lo: f64,
    mut f_hi: f64,
) -> std::result::Result<f64, f64> {
    let mut phi = if f_hi - f_lo != 0.0 { lo - f_lo * (hi - lo) / (f_hi - f_lo) } else { 0.5 * (lo + hi) };
    if !(phi > lo && phi < hi) {
        phi = 0.5 * (lo + hi);
    }
    let mut prev_step = hi - lo;
    for _ in 0..MAX_ITERATIONS {
        let f = contour.residual(phi, r);
        if converged(contour, r, phi, f) {
            return Ok(phi);
        }
        if f < 0.0 {
            lo = phi;
            f_lo = f;
        } else {
            hi = phi;
            f_hi = f;
        }
        let h = 1e-7 * (1.0 + phi.abs());
        let df = (contour.residual(phi + h, r) - contour.residual(phi - h, r)) / (2.0 * h);
        let newton = if df != 0.0 { phi - f / df } else { f64::NAN };
        let next = if newton > lo && newton < hi && (newton - phi).abs() < 0.5 * prev_step {
            newton
        } else {
            0.5 * (lo + hi)
        };
        prev_step = (next - phi).abs();
        if next == phi || hi - lo <= f64::EPSILON * phi.abs().max(1.0) {
            let f = contour.residual(next, r);
            let loose = f.abs() <= 1e3 * RESIDUAL_TOL * contour.point(next).distance(r).max(1.0);
            return if loose { Ok(next) } else { Err(f.abs()) };
        }
        phi = next;
    }
    let f = contour.residual(phi, r);
    Err(f.abs().max(f_lo.abs().min(f_hi.abs())))
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Newton polish from a golden-section estimate; re-brackets when the
/// residual changes sign around the estimate.
fn polish(contour: &Contour, r: Vec2, phi: f64, lo: f64, hi: f64) -> std::result::Result<f64, f64> {
    let f = contour.residual(phi, r);
    if converged(contour, r, phi, f) {
        return Ok(phi);
    }
    let width = 1e-6 * (hi - lo);
    let (a, b) = (phi - width, phi + width);
    let (fa, fb) = (contour.residual(a, r), contour.residual(b, r));
    if fa < 0.0 && fb > 0.0 {
        refine_bracket(contour, r, a, b, fa, fb)
    } else {
        Err(f.abs())
    }
}

/// Closest point of the closed string segment to `r_a`, moving with the
/// velocity interpolated between the two endpoint defenders.
pub fn project_onto_string(seg: &StringSegment, r_a: Vec2) -> VirtualAgent {
    let a = seg.endpoint_a.position;
    let ab = seg.endpoint_b.position - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 { ((r_a - a).dot(ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    VirtualAgent {
        position: a + ab * t,
        velocity: seg.endpoint_a.velocity * (1.0 - t) + seg.endpoint_b.velocity * t,
    }
}

/// δ-agent on the boundary of a moving disc (the attackers' connectivity
/// region): radial projection of `agent`, moving with the disc plus the
/// tangential part of the agent's motion relative to it.
pub fn project_onto_circle(center: &AgentState, radius: f64, agent: &AgentState) -> VirtualAgent {
    let offset = agent.position - center.position;
    let normal = if offset.norm() > 0.0 { offset.normalized() } else { Vec2::new(1.0, 0.0) };
    let tangent = normal.perp();
    let relative = agent.velocity - center.velocity;
    VirtualAgent {
        position: center.position + normal * radius,
        velocity: center.velocity + tangent * relative.dot(tangent),
    }
}
