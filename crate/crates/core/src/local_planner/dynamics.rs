use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Wrap an angle into (−π, π].
pub fn wrap_angle(theta: f64) -> f64 {
    let mut t = theta % (2.0 * PI);
    if t <= -PI {
        t += 2.0 * PI;
    } else if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// Planar unicycle state: position in metres and heading in (−π, π].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub p: Vector2<f64>,
    pub theta: f64,
}

impl RobotState {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            p: Vector2::new(x, y),
            theta: wrap_angle(theta),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    /// Linear velocity, m/s.
    pub v: f64,
    /// Angular velocity, rad/s.
    pub omega: f64,
}

/// Closed-form unicycle integration with constant controls over `dt`.
pub fn propagate(x: &RobotState, u: &ControlInput, dt: f64) -> RobotState {
    let th = x.theta;
    if u.omega == 0.0 {
        let d = u.v * dt;
        return RobotState {
            p: x.p + Vector2::new(d * th.cos(), d * th.sin()),
            theta: th,
        };
    }
    let th1 = th + u.omega * dt;
    let k = u.v / u.omega;
    RobotState {
        p: x.p + Vector2::new(k * (th1.sin() - th.sin()), k * (th.cos() - th1.cos())),
        theta: wrap_angle(th1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wraps_into_half_open_interval() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(0.5 + 4.0 * PI) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn straight_and_arc() {
        let x0 = RobotState::new(0.0, 0.0, 0.0);
        let s = propagate(&x0, &ControlInput { v: 1.0, omega: 0.0 }, 1.0);
        assert_eq!(s, RobotState::new(1.0, 0.0, 0.0));
        let a = propagate(&x0, &ControlInput { v: 1.0, omega: PI / 2.0 }, 1.0);
        assert!((a.p - Vector2::new(2.0 / PI, 2.0 / PI)).norm() < 1e-12);
        assert!((a.theta - PI / 2.0).abs() < 1e-12);
        let x = RobotState::new(1.0, -2.0, 0.7);
        assert_eq!(propagate(&x, &ControlInput { v: 0.0, omega: 0.0 }, 1.0), x);
    }
}
