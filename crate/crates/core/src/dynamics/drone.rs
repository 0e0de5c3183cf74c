use serde::{Deserialize, Serialize};

use super::{check_input, ControlBounds, Dynamics, State, StepError};

/// Physical parameters of the planar quadrotor.
///
/// State layout: `[x, z, v_x, v_z, theta, theta_dot]`; control layout:
/// `[F_in1, F_in2]` (left, right rotor thrust commands in newtons).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DroneParams {
    /// kg
    pub mass: f64,
    /// kg m^2
    pub inertia: f64,
    /// Distance from the body center to each rotor, m.
    pub arm: f64,
    /// Rotor radius, m.
    pub rotor_radius: f64,
    /// Dimensionless ground-effect coefficient.
    pub ground_effect: f64,
    pub gravity: f64,
    pub dt: f64,
    /// Per-rotor thrust limit, N.
    pub max_thrust: f64,
}

impl Default for DroneParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            inertia: 0.02,
            arm: 0.15,
            rotor_radius: 0.1,
            ground_effect: 0.15,
            gravity: 9.81,
            dt: 0.02,
            max_thrust: 9.81,
        }
    }
}

impl DroneParams {
    /// Rotor heights are floored here so the ground-effect divisor stays
    /// away from its pole.
    pub fn rotor_height_floor(&self) -> f64 {
        0.05 * self.rotor_radius
    }

    pub fn validate(&self) -> Result<(), StepError> {
        let positive = [
            ("mass", self.mass),
            ("inertia", self.inertia),
            ("arm", self.arm),
            ("rotor_radius", self.rotor_radius),
            ("ground_effect", self.ground_effect),
            ("gravity", self.gravity),
            ("dt", self.dt),
            ("max_thrust", self.max_thrust),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(StepError::InvalidParameter(format!(
                    "drone {name} must be finite and > 0, got {v}"
                )));
            }
        }
        let worst = self.ground_effect * self.rotor_radius / (4.0 * self.rotor_height_floor());
        if worst >= 1.0 {
            return Err(StepError::InvalidParameter(format!(
                "ground-effect divisor reaches {:.3} <= 0 at the rotor height floor",
                1.0 - worst
            )));
        }
        Ok(())
    }

    pub fn hover_thrust(&self) -> f64 {
        0.5 * self.mass * self.gravity
    }
}

/// Planar quadrotor with ground effect, integrated with explicit Euler.
#[derive(Debug, Clone)]
pub struct DroneModel {
    params: DroneParams,
    bounds: ControlBounds,
}

impl DroneModel {
    pub fn new(params: DroneParams) -> Result<Self, StepError> {
        params.validate()?;
        let bounds = ControlBounds::new(vec![0.0, 0.0], vec![params.max_thrust; 2])?;
        Ok(Self { params, bounds })
    }

    pub fn params(&self) -> &DroneParams {
        &self.params
    }

    /// Thrust produced by a rotor at height `z_r` for a commanded `f_in`.
    pub fn rotor_thrust(&self, f_in: f64, z_r: f64) -> f64 {
        let p = &self.params;
        let z_r = z_r.max(p.rotor_height_floor());
        f_in / (1.0 - p.ground_effect * (p.rotor_radius / (4.0 * z_r)))
    }

    /// Returns `(a_x, a_z, theta_ddot)`.
    pub fn accelerations(&self, x: &[f64], u: &[f64]) -> (f64, f64, f64) {
        let p = &self.params;
        let (z, theta) = (x[1], x[4]);
        let (sin_t, cos_t) = theta.sin_cos();
        let z_r1 = z - p.arm * sin_t;
        let z_r2 = z + p.arm * sin_t;
        let f1 = self.rotor_thrust(u[0], z_r1);
        let f2 = self.rotor_thrust(u[1], z_r2);
        let total = f1 + f2;
        let torque = p.arm * (f2 - f1);
        (
            -(total / p.mass) * sin_t,
            (total / p.mass) * cos_t - p.gravity,
            torque / p.inertia,
        )
    }
}

impl Dynamics for DroneModel {
    fn state_dim(&self) -> usize {
        6
    }
    fn control_dim(&self) -> usize {
        2
    }
    fn control_bounds(&self) -> &ControlBounds {
        &self.bounds
    }
    fn dt(&self) -> f64 {
        self.params.dt
    }

    fn step(&self, x: &[f64], u: &[f64]) -> Result<State, StepError> {
        check_input(x, u, 6, 2)?;
        let u = self.bounds.clamped(u);
        let dt = self.params.dt;
        let (ax, az, alpha) = self.accelerations(x, &u);
        Ok(vec![
            x[0] + x[2] * dt,
            x[1] + x[3] * dt,
            x[2] + ax * dt,
            x[3] + az * dt,
            x[4] + x[5] * dt,
            x[5] + alpha * dt,
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{rollout, ControlSequence};

    fn model() -> DroneModel {
        DroneModel::new(DroneParams::default()).unwrap()
    }

    #[test]
    fn hover_far_from_ground_is_a_fixed_point() {
        let m = model();
        let f = m.params().hover_thrust();
        let x = vec![0.0, 1e12, 0.0, 0.0, 0.0, 0.0];
        let next = m.step(&x, &[f, f]).unwrap();
        for (a, b) in x.iter().zip(&next) {
            assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{a} vs {b}");
        }
        let traj = rollout(&m, &x, &ControlSequence::constant(5, &[f, f])).unwrap();
        assert_eq!(traj.len(), 6);
        assert!(traj.iter().all(|s| (s[3]).abs() < 1e-12));
    }

    #[test]
    fn ground_effect_vanishes_with_height() {
        let m = model();
        assert_eq!(m.rotor_thrust(3.0, f64::INFINITY), 3.0);
        let mut prev = f64::INFINITY;
        for z in [0.001, 0.01, 0.05, 0.1, 0.5, 1.0, 10.0, 1e6] {
            let f = m.rotor_thrust(3.0, z);
            assert!(f <= prev && f >= 3.0);
            prev = f;
        }
        assert!((m.rotor_thrust(3.0, 1e9) - 3.0).abs() < 1e-9);
    }

    #[test]
    fn asymmetric_thrust_hand_evaluated() {
        // F1 = 4, F2 = 6 at theta = 0, z = 1e9: tau = 0.15 * 2 = 0.3,
        // theta_ddot = 0.3 / 0.02 = 15, a_x = 0, a_z = 10 / 1 - 9.81 = 0.19.
        let m = model();
        let (ax, az, alpha) = m.accelerations(&[0.0, 1e9, 0.0, 0.0, 0.0, 0.0], &[4.0, 6.0]);
        assert_eq!(ax, 0.0);
        assert!((alpha - 15.0).abs() < 1e-8);
        assert!((az - 0.19).abs() < 1e-8);
    }

    #[test]
    fn free_fall_loses_g_dt_per_step() {
        let m = model();
        let p = m.params().clone();
        let mut x = vec![0.0, 100.0, 0.3, 0.0, 0.2, 0.0];
        for _ in 0..10 {
            let next = m.step(&x, &[0.0, 0.0]).unwrap();
            assert_eq!(next[3], x[3] - p.gravity * p.dt);
            x = next;
        }
    }

    #[test]
    fn low_rotor_height_is_floored() {
        let m = model();
        let floor = m.params().rotor_height_floor();
        assert_eq!(m.rotor_thrust(1.0, -3.0), m.rotor_thrust(1.0, floor));
        assert!(m.rotor_thrust(1.0, -3.0).is_finite());
    }

    #[test]
    fn rejects_bad_input() {
        let m = model();
        assert!(m
            .step(&[f64::NAN, 0.0, 0.0, 0.0, 0.0, 0.0], &[1.0, 1.0])
            .is_err());
        assert!(m.step(&[0.0; 5], &[1.0, 1.0]).is_err());
        let bad = DroneParams {
            ground_effect: 0.5,
            ..DroneParams::default()
        };
        assert!(DroneModel::new(bad).is_err());
    }
}
