//! Planar kinematics shared by pursuers and targets.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::action::ActionPrimitive;
use crate::{Error, Result};

/// Pursuer pose in the plane. `heading` is kept in (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self { x, y, heading }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

/// Target position and velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetPhase {
    pub px: f64,
    pub py: f64,
    pub vx: f64,
    pub vy: f64,
}

impl TargetPhase {
    pub fn at_rest(px: f64, py: f64) -> Self {
        Self { px, py, vx: 0.0, vy: 0.0 }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.px, self.py]
    }

    pub fn speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.px, self.py, self.vx, self.vy]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self { px: a[0], py: a[1], vx: a[2], vy: a[3] }
    }
}

/// Maps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> Result<f64> {
    if !a.is_finite() {
        return Err(Error::InvalidArgument(format!("angle {a} is not finite")));
    }
    Ok(wrap(a))
}

// Infallible variant for internal callers that already hold finite values.
pub(crate) fn wrap(a: f64) -> f64 {
    let mut r = a.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    // rem_euclid can land exactly on TAU after rounding
    if r <= -PI {
        r += TAU;
    }
    r
}

/// Forward-Euler unicycle step.
pub fn step_unicycle(p: Pose2, a: ActionPrimitive, dt: f64) -> Result<Pose2> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let (s, c) = p.heading.sin_cos();
    Ok(Pose2 {
        x: p.x + a.linear_speed * c * dt,
        y: p.y + a.linear_speed * s * dt,
        heading: wrap(p.heading + a.turn_rate * dt),
    })
}

/// Range and bearing of `point` seen from `agent`. A coincident point has bearing 0.
pub fn global_to_local_polar(agent: &Pose2, point: [f64; 2]) -> (f64, f64) {
    let dx = point[0] - agent.x;
    let dy = point[1] - agent.y;
    let range = dx.hypot(dy);
    if range == 0.0 {
        return (0.0, 0.0);
    }
    (range, wrap(dy.atan2(dx) - agent.heading))
}

/// Rotates a global-frame vector into the agent frame.
pub fn rotate_into_frame(heading: f64, v: [f64; 2]) -> [f64; 2] {
    let (s, c) = heading.sin_cos();
    [c * v[0] + s * v[1], -s * v[0] + c * v[1]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EPS: f64 = 1e-12;

    #[test]
    fn wrap_examples() {
        assert_eq!(wrap_angle(0.0).unwrap(), 0.0);
        assert!((wrap_angle(3.0 * PI).unwrap() - PI).abs() < EPS);
        assert!((wrap_angle(-1.5 * PI).unwrap() - 0.5 * PI).abs() < EPS);
        assert_eq!(wrap_angle(PI).unwrap(), PI);
        assert_eq!(wrap_angle(-PI).unwrap(), PI);
        assert!(wrap_angle(f64::NAN).is_err());
        assert!(wrap_angle(f64::INFINITY).is_err());
    }

    #[test]
    fn unicycle_examples() {
        let p = Pose2::new(0.0, 0.0, 0.0);
        let fwd = ActionPrimitive { linear_speed: 2.0, turn_rate: 0.0 };
        let q = step_unicycle(p, fwd, 0.5).unwrap();
        assert!((q.x - 1.0).abs() < EPS && q.y.abs() < EPS && q.heading.abs() < EPS);

        let turn = ActionPrimitive { linear_speed: 0.0, turn_rate: PI / 4.0 };
        let q = step_unicycle(p, turn, 0.5).unwrap();
        assert!(q.x.abs() < EPS && q.y.abs() < EPS);
        assert!((q.heading - PI / 8.0).abs() < EPS);

        let still = ActionPrimitive { linear_speed: 0.0, turn_rate: 0.0 };
        let p = Pose2::new(3.0, -2.0, 1.2);
        assert_eq!(step_unicycle(p, still, 0.5).unwrap(), p);
        assert!(step_unicycle(p, still, 0.0).is_err());
    }

    #[test]
    fn polar_examples() {
        let (r, b) = global_to_local_polar(&Pose2::new(0.0, 0.0, 0.0), [3.0, 4.0]);
        assert!((r - 5.0).abs() < EPS);
        assert!((b - 4f64.atan2(3.0)).abs() < EPS);

        let (r, b) = global_to_local_polar(&Pose2::new(1.0, 1.0, PI / 2.0), [1.0, 3.0]);
        assert!((r - 2.0).abs() < EPS);
        assert!(b.abs() < EPS);

        assert_eq!(global_to_local_polar(&Pose2::new(2.0, 5.0, 0.3), [2.0, 5.0]), (0.0, 0.0));
    }

    proptest! {
        #[test]
        fn wrap_is_idempotent_and_congruent(a in -1e4f64..1e4) {
            let w = wrap_angle(a).unwrap();
            prop_assert!(w > -PI && w <= PI);
            prop_assert_eq!(wrap_angle(w).unwrap(), w);
            let k = ((a - w) / TAU).round();
            prop_assert!((a - w - k * TAU).abs() < 1e-9);
        }

        #[test]
        fn polar_is_rigid_invariant(
            ax in -50f64..50.0, ay in -50f64..50.0, ah in -PI..PI,
            px in -50f64..50.0, py in -50f64..50.0,
            rot in -PI..PI, tx in -100f64..100.0, ty in -100f64..100.0,
        ) {
            let agent = Pose2::new(ax, ay, ah);
            let (r0, b0) = global_to_local_polar(&agent, [px, py]);
            let (s, c) = rot.sin_cos();
            let tf = |x: f64, y: f64| [c * x - s * y + tx, s * x + c * y + ty];
            let a2 = tf(ax, ay);
            let p2 = tf(px, py);
            let agent2 = Pose2::new(a2[0], a2[1], wrap(ah + rot));
            let (r1, b1) = global_to_local_polar(&agent2, p2);
            prop_assert!((r0 - r1).abs() < 1e-9);
            if r0 > 1e-6 {
                prop_assert!(wrap(b0 - b1).abs() < 1e-9);
            }
        }
    }
}
