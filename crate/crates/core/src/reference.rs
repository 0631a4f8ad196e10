//! Desired trajectories for the actuated coordinates and the geometric
//! obstacle check used to verify the load path.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReferenceError {
    #[error("target cable length must be positive, got {0}")]
    NonPositiveCable(f64),
    #[error("semicircle endpoints must differ in x (both at {0})")]
    DegenerateArc(f64),
    #[error("semicircle must start and end at the same cable length ({start} vs {end})")]
    UnequalCableLength { start: f64, end: f64 },
    #[error("duration must be positive, got {0}")]
    NonPositiveDuration(f64),
    #[error("arc radius {radius} reaches the rail from cable length {l}")]
    ApexAboveRail { radius: f64, l: f64 },
    #[error("invalid obstacle: {0}")]
    InvalidObstacle(String),
    #[error("non-finite trajectory parameter")]
    NonFinite,
}

/// Desired coordinates with their first and second time derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Reference {
    pub x: f64,
    pub l: f64,
    pub theta: f64,
    pub x_dot: f64,
    pub l_dot: f64,
    pub theta_dot: f64,
    pub x_ddot: f64,
    pub l_ddot: f64,
    pub theta_ddot: f64,
}

impl Reference {
    pub fn hold(x: f64, l: f64) -> Self {
        Self {
            x,
            l,
            ..Self::default()
        }
    }
}

/// Constant reference at `(x, l)` with zero swing.
pub fn setpoint(target: (f64, f64), _t: f64) -> Result<Reference, ReferenceError> {
    let (x, l) = target;
    if !(x.is_finite() && l.is_finite()) {
        return Err(ReferenceError::NonFinite);
    }
    if l <= 0.0 {
        return Err(ReferenceError::NonPositiveCable(l));
    }
    Ok(Reference::hold(x, l))
}

/// Minimum-jerk progress law on `[0, 1]`: value, first and second derivative
/// with respect to normalized time.
fn quintic(tau: f64) -> (f64, f64, f64) {
    let t2 = tau * tau;
    let t3 = t2 * tau;
    (
        t3 * (10.0 - 15.0 * tau + 6.0 * t2),
        30.0 * t2 * (1.0 - tau) * (1.0 - tau),
        60.0 * tau * (1.0 - 3.0 * tau + 2.0 * t2),
    )
}

/// Semicircular arc in the `(x, l)` plane from `(x0, l0)` to `(x1, l0)`,
/// lifting the load to `l0 − |x1 − x0|/2` at mid-time.
pub fn semicircle(
    start: (f64, f64),
    end: (f64, f64),
    duration: f64,
    t: f64,
) -> Result<Reference, ReferenceError> {
    Ok(Semicircle::new(start, end, duration)?.at(t))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Semicircle {
    x0: f64,
    x1: f64,
    l0: f64,
    duration: f64,
}

impl Semicircle {
    pub fn new(start: (f64, f64), end: (f64, f64), duration: f64) -> Result<Self, ReferenceError> {
        let (x0, l0) = start;
        let (x1, l1) = end;
        if ![x0, l0, x1, l1, duration].iter().all(|v| v.is_finite()) {
            return Err(ReferenceError::NonFinite);
        }
        if l0 <= 0.0 {
            return Err(ReferenceError::NonPositiveCable(l0));
        }
        if x0 == x1 {
            return Err(ReferenceError::DegenerateArc(x0));
        }
        if l0 != l1 {
            return Err(ReferenceError::UnequalCableLength { start: l0, end: l1 });
        }
        if duration <= 0.0 {
            return Err(ReferenceError::NonPositiveDuration(duration));
        }
        let radius = 0.5 * (x1 - x0).abs();
        if radius >= l0 {
            return Err(ReferenceError::ApexAboveRail { radius, l: l0 });
        }
        Ok(Self {
            x0,
            x1,
            l0,
            duration,
        })
    }

    pub fn radius(&self) -> f64 {
        0.5 * (self.x1 - self.x0).abs()
    }

    pub fn start(&self) -> (f64, f64) {
        (self.x0, self.l0)
    }

    pub fn end(&self) -> (f64, f64) {
        (self.x1, self.l0)
    }

    pub fn apex(&self) -> (f64, f64) {
        (0.5 * (self.x0 + self.x1), self.l0 - self.radius())
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn at(&self, t: f64) -> Reference {
        let tau = (t / self.duration).clamp(0.0, 1.0);
        let (sigma, dsigma, ddsigma) = if t >= self.duration {
            (1.0, 0.0, 0.0)
        } else if t <= 0.0 {
            (0.0, 0.0, 0.0)
        } else {
            let (s, ds, dds) = quintic(tau);
            (s, ds / self.duration, dds / (self.duration * self.duration))
        };

        let r = self.radius();
        let dir = (self.x1 - self.x0).signum();
        let center = 0.5 * (self.x0 + self.x1);
        let (sin_b, cos_b) = (PI * sigma).sin_cos();

        // Derivatives with respect to the progress variable.
        let x_s = dir * r * PI * sin_b;
        let x_ss = dir * r * PI * PI * cos_b;
        let l_s = -r * PI * cos_b;
        let l_ss = r * PI * PI * sin_b;

        let (x, l) = if sigma >= 1.0 {
            self.end()
        } else if sigma <= 0.0 {
            self.start()
        } else {
            (center - dir * r * cos_b, self.l0 - r * sin_b)
        };

        Reference {
            x,
            l,
            x_dot: x_s * dsigma,
            l_dot: l_s * dsigma,
            x_ddot: x_ss * dsigma * dsigma + x_s * ddsigma,
            l_ddot: l_ss * dsigma * dsigma + l_s * ddsigma,
            ..Reference::default()
        }
    }
}

/// A validated reference generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Trajectory {
    Setpoint { x: f64, l: f64 },
    Semicircle(Semicircle),
}

impl Trajectory {
    pub fn setpoint(x: f64, l: f64) -> Result<Self, ReferenceError> {
        setpoint((x, l), 0.0)?;
        Ok(Trajectory::Setpoint { x, l })
    }

    pub fn semicircle(
        start: (f64, f64),
        end: (f64, f64),
        duration: f64,
    ) -> Result<Self, ReferenceError> {
        Ok(Trajectory::Semicircle(Semicircle::new(
            start, end, duration,
        )?))
    }

    pub fn at(&self, t: f64) -> Reference {
        match self {
            Trajectory::Setpoint { x, l } => Reference::hold(*x, *l),
            Trajectory::Semicircle(arc) => arc.at(t),
        }
    }

    /// Where the load is expected to start from.
    pub fn start(&self) -> (f64, f64) {
        match self {
            Trajectory::Setpoint { x, l } => (*x, *l),
            Trajectory::Semicircle(arc) => arc.start(),
        }
    }

    /// Final commanded position.
    pub fn end(&self) -> (f64, f64) {
        match self {
            Trajectory::Setpoint { x, l } => (*x, *l),
            Trajectory::Semicircle(arc) => arc.end(),
        }
    }

    /// Equilibria worth linearizing about: the target, and for the arc also
    /// the shortest cable length it passes through.
    pub fn operating_points(&self) -> Vec<(f64, f64)> {
        match self {
            Trajectory::Setpoint { x, l } => vec![(*x, *l)],
            Trajectory::Semicircle(arc) => vec![arc.start(), arc.apex(), arc.end()],
        }
    }
}

/// Axis-aligned obstacle standing on a floor below the rail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSpec {
    pub x_center: f64,
    pub width: f64,
    pub height: f64,
    /// Margin kept around every face of the obstacle.
    pub top_clearance: f64,
    /// Depth of the obstacle base below the rail.
    pub floor_depth: f64,
}

impl ObstacleSpec {
    pub fn validate(&self) -> Result<(), ReferenceError> {
        for (name, v) in [
            ("width", self.width),
            ("height", self.height),
            ("top_clearance", self.top_clearance),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ReferenceError::InvalidObstacle(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !self.x_center.is_finite() || !self.floor_depth.is_finite() {
            return Err(ReferenceError::NonFinite);
        }
        Ok(())
    }

    /// Inflated rectangle as `(x_min, x_max, depth_min, depth_max)`.
    pub fn inflated_bounds(&self) -> (f64, f64, f64, f64) {
        let c = self.top_clearance;
        (
            self.x_center - 0.5 * self.width - c,
            self.x_center + 0.5 * self.width + c,
            self.floor_depth - self.height - c,
            self.floor_depth + c,
        )
    }

    /// Signed distance to the inflated rectangle, negative inside.
    pub fn signed_gap(&self, point: (f64, f64)) -> f64 {
        let (x0, x1, y0, y1) = self.inflated_bounds();
        let (px, py) = point;
        let dx = (x0 - px).max(px - x1).max(0.0);
        let dy = (y0 - py).max(py - y1).max(0.0);
        if dx > 0.0 || dy > 0.0 {
            dx.hypot(dy)
        } else {
            -(px - x0).min(x1 - px).min(py - y0).min(y1 - py)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClearanceReport {
    pub passed: bool,
    pub min_gap: f64,
    /// Index of the sample attaining `min_gap`.
    pub worst_index: usize,
}

/// Checks sampled load positions `(horizontal, depth)` against the obstacle.
/// An empty path reports an infinite gap.
pub fn clearance_check(path: &[(f64, f64)], obstacle: &ObstacleSpec) -> ClearanceReport {
    let (worst_index, min_gap) = path
        .iter()
        .map(|&p| obstacle.signed_gap(p))
        .enumerate()
        .fold(
            (0, f64::INFINITY),
            |best, (i, g)| if g < best.1 { (i, g) } else { best },
        );
    ClearanceReport {
        passed: min_gap > 0.0,
        min_gap,
        worst_index,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn setpoint_is_constant() {
        let a = setpoint((1.0, 1.5), 0.0).unwrap();
        let b = setpoint((1.0, 1.5), 42.0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, Reference::hold(1.0, 1.5));
        assert_eq!(a.x_dot, 0.0);
        assert_eq!(a.l_ddot, 0.0);
        assert_eq!(
            setpoint((1.0, 0.0), 0.0),
            Err(ReferenceError::NonPositiveCable(0.0))
        );
    }

    #[test]
    fn semicircle_endpoints_and_apex() {
        let arc = Semicircle::new((0.0, 1.5), (2.0, 1.5), 10.0).unwrap();
        let r0 = arc.at(0.0);
        assert_eq!((r0.x, r0.l), (0.0, 1.5));
        assert_eq!(
            (r0.x_dot, r0.l_dot, r0.x_ddot, r0.l_ddot),
            (0.0, 0.0, 0.0, 0.0)
        );

        let mid = arc.at(5.0);
        assert_relative_eq!(mid.x, 1.0, epsilon = 1e-12);
        assert_relative_eq!(mid.l, 0.5, epsilon = 1e-12);

        let r1 = arc.at(10.0);
        assert_eq!((r1.x, r1.l), (2.0, 1.5));
        assert_eq!(arc.at(25.0), r1);
        assert_eq!(r1.theta, 0.0);
    }

    #[test]
    fn semicircle_reversed_direction() {
        let arc = Semicircle::new((2.0, 1.5), (0.0, 1.5), 4.0).unwrap();
        let mid = arc.at(2.0);
        assert_relative_eq!(mid.x, 1.0, epsilon = 1e-12);
        assert_relative_eq!(mid.l, 0.5, epsilon = 1e-12);
        assert!(arc.at(1.0).x_dot < 0.0);
    }

    #[test]
    fn semicircle_rejects_bad_geometry() {
        assert_eq!(
            Semicircle::new((1.0, 1.5), (1.0, 1.5), 1.0),
            Err(ReferenceError::DegenerateArc(1.0))
        );
        assert!(matches!(
            Semicircle::new((0.0, 1.5), (1.0, 1.4), 1.0),
            Err(ReferenceError::UnequalCableLength { .. })
        ));
        assert_eq!(
            Semicircle::new((0.0, 1.5), (1.0, 1.5), 0.0),
            Err(ReferenceError::NonPositiveDuration(0.0))
        );
        assert!(matches!(
            Semicircle::new((0.0, 1.0), (2.0, 1.0), 1.0),
            Err(ReferenceError::ApexAboveRail { .. })
        ));
    }

    #[test]
    fn semicircle_derivatives_match_finite_differences() {
        let arc = Semicircle::new((0.0, 1.5), (2.0, 1.5), 10.0).unwrap();
        let h = 1e-4;
        for k in 1..100 {
            let t = 0.1 * k as f64;
            let (m, c, p) = (arc.at(t - h), arc.at(t), arc.at(t + h));
            assert!(((p.x - m.x) / (2.0 * h) - c.x_dot).abs() < 1e-6);
            assert!(((p.l - m.l) / (2.0 * h) - c.l_dot).abs() < 1e-6);
            assert!(((p.x_dot - m.x_dot) / (2.0 * h) - c.x_ddot).abs() < 1e-6);
            assert!(((p.l_dot - m.l_dot) / (2.0 * h) - c.l_ddot).abs() < 1e-6);
        }
    }

    #[test]
    fn semicircle_is_c2_at_the_splice() {
        let arc = Semicircle::new((0.0, 1.5), (2.0, 1.5), 10.0).unwrap();
        let before = arc.at(10.0 - 1e-7);
        let after = arc.at(10.0);
        assert!((before.x - after.x).abs() < 1e-12);
        assert!(before.x_dot.abs() < 1e-9 && before.l_dot.abs() < 1e-9);
        assert!(before.x_ddot.abs() < 1e-5 && before.l_ddot.abs() < 1e-5);
    }

    fn obstacle() -> ObstacleSpec {
        ObstacleSpec {
            x_center: 1.0,
            width: 0.4,
            height: 0.4,
            top_clearance: 0.2,
            floor_depth: 1.5,
        }
    }

    #[test]
    fn clearance_above_and_inside() {
        let obs = obstacle();
        let above = [(0.5, 0.2), (1.0, 0.3), (1.5, 0.2)];
        let rep = clearance_check(&above, &obs);
        assert!(rep.passed);
        assert_relative_eq!(rep.min_gap, 0.6, epsilon = 1e-12);
        assert_eq!(rep.worst_index, 1);

        let hit = [(0.0, 1.5), (1.0, 1.3)];
        let rep = clearance_check(&hit, &obs);
        assert!(!rep.passed);
        assert!(rep.min_gap < 0.0);
        assert_eq!(rep.worst_index, 1);
    }

    #[test]
    fn desired_arc_clears_obstacle() {
        let arc = Semicircle::new((0.0, 1.5), (2.0, 1.5), 10.0).unwrap();
        let path: Vec<_> = (0..=1000)
            .map(|k| arc.at(0.01 * k as f64))
            .map(|r| (r.x, r.l))
            .collect();
        let rep = clearance_check(&path, &obstacle());
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn obstacle_validation() {
        assert!(obstacle().validate().is_ok());
        let mut o = obstacle();
        o.width = 0.0;
        assert!(o.validate().is_err());
    }
}
