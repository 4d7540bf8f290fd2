//! Computable quantities behind the herding guarantees: minimum defender
//! count, the ultimate tracking-error bound from a Lyapunov solve, the
//! formation clearance margin, and the herding Lyapunov function.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::Vec2;

pub type Mat2 = [[f64; 2]; 2];

/// Smallest defender count whose regular polygon of strings keeps the
/// connectivity region (plus tolerance) strictly inside.
pub fn min_defenders(connectivity_radius: f64, tolerance: f64, net_radius_max: f64) -> Result<usize> {
    let ratio = (connectivity_radius + tolerance) / (net_radius_max - tolerance);
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Domain(format!(
            "min_defenders needs 0 < (rho_ac + b_d)/(rho_sn_max - b_d) < 1, got {ratio}"
        )));
    }
    let x = PI / ratio.acos();
    // Absorb rounding so exact integers (e.g. π/(π/3)) are not bumped up.
    Ok((x - 1e-9).ceil() as usize)
}

/// Worst-case distance covered by the formation under bounded
/// acceleration before drag and saturation bring it to rest.
pub fn clearance_margin(herd_u_max: f64, drag: f64) -> Result<f64> {
    if !(drag > 0.0) {
        return Err(Error::Domain(format!("drag must be positive, got {drag}")));
    }
    Ok(herd_u_max * (1.0 - 2f64.ln()) / (drag * drag))
}

/// Solve `AᵀP + PA = −Q` for symmetric `P` (2×2, `Q` symmetric).
pub fn solve_lyapunov(a: Mat2, q: Mat2) -> Result<Mat2> {
    // Unknowns (p11, p12, p22).
    let m = [
        [2.0 * a[0][0], 2.0 * a[1][0], 0.0],
        [a[0][1], a[0][0] + a[1][1], a[1][0]],
        [0.0, 2.0 * a[0][1], 2.0 * a[1][1]],
    ];
    let rhs = [-q[0][0], -q[0][1], -q[1][1]];
    let det3 = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let det = det3(&m);
    if det.abs() < 1e-300 {
        return Err(Error::Domain("Lyapunov equation is singular".into()));
    }
    let mut sol = [0.0; 3];
    for (k, s) in sol.iter_mut().enumerate() {
        let mut mk = m;
        for row in 0..3 {
            mk[row][k] = rhs[row];
        }
        *s = det3(&mk) / det;
    }
    Ok([[sol[0], sol[1]], [sol[1], sol[2]]])
}

/// Eigenvalues `(min, max)` of a symmetric 2×2 matrix.
pub fn symmetric_eigenvalues(m: Mat2) -> (f64, f64) {
    let mean = 0.5 * (m[0][0] + m[1][1]);
    let half = 0.5 * (m[0][0] - m[1][1]);
    let rad = half.hypot(m[0][1]);
    (mean - rad, mean + rad)
}

/// Per-axis tracking-error companion matrix.
pub fn error_dynamics(k1: f64, k2: f64) -> Mat2 {
    [[0.0, 1.0], [-k1, -k2]]
}

/// The ultimate-bound constants for the linear tracking law under a
/// bounded disturbance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingBound {
    pub p: Mat2,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c0: f64,
    /// Ultimate bound on the stacked error norm (m).
    pub bound: f64,
}

impl TrackingBound {
    pub fn new(k1: f64, k2: f64, disturbance: f64, c0: f64) -> Result<Self> {
        if !(k1 > 0.0 && k2 > 0.0) {
            return Err(Error::Domain(format!("tracking gains must be positive, got ({k1}, {k2})")));
        }
        if !(c0 > 0.0 && c0 < 1.0) {
            return Err(Error::Domain(format!("c0 must lie in (0, 1), got {c0}")));
        }
        let identity = [[1.0, 0.0], [0.0, 1.0]];
        let p = solve_lyapunov(error_dynamics(k1, k2), identity)?;
        let (c1, c2) = symmetric_eigenvalues(p);
        let c3 = 1.0;
        let c4 = 2.0 * c2;
        let bound = (c4 / c3) * (c2 / c1).sqrt() * disturbance / c0;
        Ok(TrackingBound { p, c1, c2, c3, c4, c0, bound })
    }

    /// Time after which the exponential envelope from `initial_error` has
    /// decayed below the ultimate bound.
    pub fn transient_time(&self, initial_error: f64) -> f64 {
        let rate = (1.0 - self.c0) * self.c3 / (2.0 * self.c2);
        let ratio = (self.c2 / self.c1).sqrt() * initial_error / self.bound;
        if ratio <= 1.0 {
            0.0
        } else {
            ratio.ln() / rate
        }
    }

    /// Largest disturbance the bound is valid for on the ball of radius
    /// `e_bar`.
    pub fn admissible_disturbance(&self, e_bar: f64) -> f64 {
        (self.c3 / self.c4) * (self.c1 / self.c2).sqrt() * self.c0 * e_bar
    }
}

pub fn tracking_bound(k1: f64, k2: f64, u_max: f64, c0: f64) -> Result<f64> {
    Ok(TrackingBound::new(k1, k2, u_max, c0)?.bound)
}

/// Piecewise Lyapunov function of the herding virtual agent about the safe
/// area center: quadratic inside the unsaturated ball, linear outside.
pub fn herding_lyapunov(k1: f64, herd_u_max: f64, offset: Vec2, velocity: Vec2) -> f64 {
    let r = offset.norm();
    let kinetic = 0.5 * velocity.norm_squared();
    if r < herd_u_max / k1 {
        0.5 * k1 * r * r + kinetic
    } else {
        herd_u_max * r + kinetic - herd_u_max * herd_u_max / (2.0 * k1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_defender_examples() {
        assert_eq!(min_defenders(2.0, 1.0, 7.0).unwrap(), 3);
        assert_eq!(min_defenders(1e-12, 0.0, 1.0).unwrap(), 2);
        assert_eq!(min_defenders(0.9, 0.05, 1.05).unwrap(), 10);
        assert!(min_defenders(3.0, 1.0, 5.0).is_err());
        assert!(min_defenders(0.0, 0.0, 5.0).is_err());
    }

    #[test]
    fn clearance_examples() {
        let m = clearance_margin(1.0, 1.0).unwrap();
        assert!((m - (1.0 - 2f64.ln())).abs() < 1e-15);
        assert!((clearance_margin(1.0, 2.0).unwrap() - m / 4.0).abs() < 1e-15);
        assert_eq!(clearance_margin(0.0, 1.0).unwrap(), 0.0);
        assert!(clearance_margin(1.0, 0.0).is_err());
    }

    #[test]
    fn lyapunov_matches_companion_closed_form() {
        for &(k1, k2) in &[(1.0, 1.0), (2.0, 0.5), (10.0, 3.0), (0.3, 7.0)] {
            let p = solve_lyapunov(error_dynamics(k1, k2), [[1.0, 0.0], [0.0, 1.0]]).unwrap();
            // Hand-derived: p12 = 1/(2k1), p22 = (k1+1)/(2k1k2), p11 = k1 p22 + k2 p12.
            let p12 = 1.0 / (2.0 * k1);
            let p22 = (k1 + 1.0) / (2.0 * k1 * k2);
            let p11 = k1 * p22 + k2 * p12;
            assert!((p[0][0] - p11).abs() < 1e-12);
            assert!((p[0][1] - p12).abs() < 1e-12);
            assert!((p[1][1] - p22).abs() < 1e-12);
            let (lo, _) = symmetric_eigenvalues(p);
            assert!(lo > 0.0);
        }
    }

    #[test]
    fn lyapunov_residual_general() {
        let a = [[-1.0, 2.0], [-0.5, -3.0]];
        let q = [[2.0, 0.3], [0.3, 1.0]];
        let p = solve_lyapunov(a, q).unwrap();
        for i in 0..2 {
            for k in 0..2 {
                let mut s = q[i][k];
                for m in 0..2 {
                    s += a[m][i] * p[m][k] + p[i][m] * a[m][k];
                }
                assert!(s.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tracking_bound_scaling() {
        let b1 = tracking_bound(1.0, 1.0, 1.0, 1.0 - 1e-12);
        assert!(b1.is_ok());
        let b = tracking_bound(1.5, 2.0, 1.0, 0.5).unwrap();
        assert!((tracking_bound(1.5, 2.0, 3.0, 0.5).unwrap() - 3.0 * b).abs() < 1e-12);
        let half = tracking_bound(1.5, 2.0, 1.0, 0.25).unwrap();
        assert!((half - 2.0 * b).abs() < 1e-12);
        assert!(tracking_bound(0.0, 1.0, 1.0, 0.5).is_err());
        assert!(tracking_bound(1.0, 1.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn herding_lyapunov_is_continuous() {
        let (k1, um) = (2.0, 0.4);
        let edge = um / k1;
        let inside = herding_lyapunov(k1, um, Vec2::new(edge - 1e-12, 0.0), Vec2::ZERO);
        let outside = herding_lyapunov(k1, um, Vec2::new(edge, 0.0), Vec2::ZERO);
        assert!((inside - outside).abs() < 1e-12);
        assert_eq!(herding_lyapunov(k1, um, Vec2::ZERO, Vec2::ZERO), 0.0);
    }
}
