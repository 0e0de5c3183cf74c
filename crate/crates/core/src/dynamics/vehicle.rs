use serde::{Deserialize, Serialize};

use super::{check_input, ControlBounds, Dynamics, State, StepError, TrackGeometry};

/// Identified chassis and tire parameters of the 1/5-scale rally car.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleParams {
    /// kg
    pub mass: f64,
    /// Yaw moment of inertia, kg m^2.
    pub yaw_inertia: f64,
    /// CoM to front axle, m.
    pub lf: f64,
    /// CoM to rear axle, m.
    pub lr: f64,
    /// kg m^2
    pub front_wheel_inertia: f64,
    /// m
    pub front_wheel_radius: f64,
    pub tire_b: f64,
    pub tire_c: f64,
    pub tire_d: f64,
    pub gravity: f64,
    pub dt: f64,
    /// Steering limit, rad.
    pub max_steer: f64,
    /// Lower bound on the wheel speed used to normalize slip, m/s.
    pub min_slip_speed: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass: 22.0,
            yaw_inertia: 1.1,
            lf: 0.34,
            lr: 0.23,
            front_wheel_inertia: 0.10,
            front_wheel_radius: 0.095,
            tire_b: 4.1,
            tire_c: 0.95,
            tire_d: 1.1,
            gravity: 9.81,
            dt: 0.02,
            max_steer: 0.45,
            min_slip_speed: 1.0,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), StepError> {
        let positive = [
            ("mass", self.mass),
            ("yaw_inertia", self.yaw_inertia),
            ("lf", self.lf),
            ("lr", self.lr),
            ("front_wheel_inertia", self.front_wheel_inertia),
            ("front_wheel_radius", self.front_wheel_radius),
            ("tire_b", self.tire_b),
            ("tire_c", self.tire_c),
            ("tire_d", self.tire_d),
            ("gravity", self.gravity),
            ("dt", self.dt),
            ("max_steer", self.max_steer),
            ("min_slip_speed", self.min_slip_speed),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(StepError::InvalidParameter(format!(
                    "vehicle {name} must be finite and > 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Static normal loads `(front, rear)` without load transfer.
    pub fn normal_loads(&self) -> (f64, f64) {
        let w = self.mass * self.gravity;
        let l = self.lf + self.lr;
        (w * self.lr / l, w * self.lf / l)
    }

    /// Pacejka magic formula `D sin(C atan(B slip))`.
    pub fn magic_formula(&self, slip: f64) -> f64 {
        self.tire_d * (self.tire_c * (self.tire_b * slip).atan()).sin()
    }
}

/// First-order stand-in for the rear-wheel drivetrain:
/// `omega_R' = (c_T T - c_d omega_R - r_R f_Rx / I_wR) * scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DrivetrainParams {
    pub throttle_gain: f64,
    pub wheel_damping: f64,
    pub rear_wheel_radius: f64,
    pub rear_wheel_inertia: f64,
    pub scale: f64,
}

impl Default for DrivetrainParams {
    fn default() -> Self {
        Self {
            throttle_gain: 200.0,
            wheel_damping: 1.0,
            rear_wheel_radius: 0.095,
            rear_wheel_inertia: 0.10,
            scale: 1.0,
        }
    }
}

impl DrivetrainParams {
    pub fn validate(&self) -> Result<(), StepError> {
        let ok = self.throttle_gain > 0.0
            && self.wheel_damping >= 0.0
            && self.rear_wheel_radius > 0.0
            && self.rear_wheel_inertia > 0.0
            && self.scale > 0.0;
        if ok {
            Ok(())
        } else {
            Err(StepError::InvalidParameter(
                "drivetrain gains, radius, inertia and scale must be positive".into(),
            ))
        }
    }
}

/// Named view of the vehicle state `[v_x, v_y, psi_dot, omega_F, omega_R, e_psi, e_y, s]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VehicleState {
    pub v_x: f64,
    pub v_y: f64,
    pub yaw_rate: f64,
    pub omega_f: f64,
    pub omega_r: f64,
    pub e_psi: f64,
    pub e_y: f64,
    pub s: f64,
}

impl VehicleState {
    pub const V_X: usize = 0;
    pub const V_Y: usize = 1;
    pub const YAW_RATE: usize = 2;
    pub const OMEGA_F: usize = 3;
    pub const OMEGA_R: usize = 4;
    pub const E_PSI: usize = 5;
    pub const E_Y: usize = 6;
    pub const S: usize = 7;
    pub const DIM: usize = 8;

    pub fn from_slice(x: &[f64]) -> Self {
        Self {
            v_x: x[0],
            v_y: x[1],
            yaw_rate: x[2],
            omega_f: x[3],
            omega_r: x[4],
            e_psi: x[5],
            e_y: x[6],
            s: x[7],
        }
    }

    pub fn to_vec(&self) -> State {
        vec![
            self.v_x,
            self.v_y,
            self.yaw_rate,
            self.omega_f,
            self.omega_r,
            self.e_psi,
            self.e_y,
            self.s,
        ]
    }

    /// Straight-line cruising at `speed` with rolling wheels.
    pub fn cruising(speed: f64, front_radius: f64, rear_radius: f64) -> Self {
        Self {
            v_x: speed,
            omega_f: speed / front_radius,
            omega_r: speed / rear_radius,
            ..Self::default()
        }
    }
}

/// Tire forces in each wheel's own frame, N.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TireForces {
    pub front_x: f64,
    pub front_y: f64,
    pub rear_x: f64,
    pub rear_y: f64,
}

/// Rear-wheel-drive single-track model in curvilinear track coordinates.
#[derive(Debug, Clone)]
pub struct VehicleModel {
    params: VehicleParams,
    drivetrain: DrivetrainParams,
    track: TrackGeometry,
    bounds: ControlBounds,
}

impl VehicleModel {
    pub fn new(
        params: VehicleParams,
        drivetrain: DrivetrainParams,
        track: TrackGeometry,
    ) -> Result<Self, StepError> {
        params.validate()?;
        drivetrain.validate()?;
        let bounds = ControlBounds::symmetric(&[params.max_steer, 1.0]);
        Ok(Self {
            params,
            drivetrain,
            track,
            bounds,
        })
    }

    pub fn params(&self) -> &VehicleParams {
        &self.params
    }

    pub fn drivetrain(&self) -> &DrivetrainParams {
        &self.drivetrain
    }

    pub fn track(&self) -> &TrackGeometry {
        &self.track
    }

    pub fn cruising_state(&self, speed: f64) -> VehicleState {
        VehicleState::cruising(
            speed,
            self.params.front_wheel_radius,
            self.drivetrain.rear_wheel_radius,
        )
    }

    /// Friction-circle coefficients `(mu_x, mu_y)` for a wheel whose contact
    /// patch moves at `(v_wx, v_wy)` while the rim moves at `rim_speed`.
    fn friction(&self, v_wx: f64, v_wy: f64, rim_speed: f64) -> (f64, f64) {
        let denom = rim_speed.abs().max(self.params.min_slip_speed);
        let s_x = (v_wx - rim_speed) / denom;
        let s_y = v_wy / denom;
        let s = s_x.hypot(s_y);
        if s < 1e-12 {
            return (0.0, 0.0);
        }
        let mu = self.params.magic_formula(s);
        (-s_x / s * mu, -s_y / s * mu)
    }

    pub fn tire_forces(&self, x: &[f64], steer: f64) -> TireForces {
        let p = &self.params;
        let v = VehicleState::from_slice(x);
        let (fz_f, fz_r) = p.normal_loads();
        let (sin_d, cos_d) = steer.sin_cos();
        let lat_f = v.v_y + p.lf * v.yaw_rate;
        let vf_x = v.v_x * cos_d + lat_f * sin_d;
        let vf_y = -v.v_x * sin_d + lat_f * cos_d;
        let vr_x = v.v_x;
        let vr_y = v.v_y - p.lr * v.yaw_rate;
        let (mu_fx, mu_fy) = self.friction(vf_x, vf_y, v.omega_f * p.front_wheel_radius);
        let (mu_rx, mu_ry) =
            self.friction(vr_x, vr_y, v.omega_r * self.drivetrain.rear_wheel_radius);
        TireForces {
            front_x: fz_f * mu_fx,
            front_y: fz_f * mu_fy,
            rear_x: fz_r * mu_rx,
            rear_y: fz_r * mu_ry,
        }
    }

    /// Continuous-time right-hand side `F(x, u)`; `u` must already be clamped.
    pub fn derivatives(&self, x: &[f64], u: &[f64]) -> Result<[f64; 8], StepError> {
        let p = &self.params;
        let d = &self.drivetrain;
        let v = VehicleState::from_slice(x);
        let (steer, throttle) = (u[0], u[1]);
        let f = self.tire_forces(x, steer);
        let (sin_d, cos_d) = steer.sin_cos();
        let rho = self.track.curvature(v.s);
        let denom = 1.0 - rho * v.e_y;
        if denom <= 1e-6 {
            return Err(StepError::OffTrack { denominator: denom });
        }
        let (sin_e, cos_e) = v.e_psi.sin_cos();
        let s_dot = (v.v_x * cos_e - v.v_y * sin_e) / denom;
        Ok([
            (f.front_x * cos_d - f.front_y * sin_d + f.rear_x) / p.mass + v.v_y * v.yaw_rate,
            (f.front_x * sin_d + f.front_y * cos_d + f.rear_y) / p.mass - v.v_x * v.yaw_rate,
            ((f.front_y * cos_d + f.front_x * sin_d) * p.lf - f.rear_y * p.lr) / p.yaw_inertia,
            -p.front_wheel_radius / p.front_wheel_inertia * f.front_x,
            (d.throttle_gain * throttle
                - d.wheel_damping * v.omega_r
                - d.rear_wheel_radius * f.rear_x / d.rear_wheel_inertia)
                * d.scale,
            v.yaw_rate - rho * s_dot,
            v.v_x * sin_e + v.v_y * cos_e,
            s_dot,
        ])
    }
}

impl Dynamics for VehicleModel {
    fn state_dim(&self) -> usize {
        VehicleState::DIM
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
        check_input(x, u, VehicleState::DIM, 2)?;
        let u = self.bounds.clamped(u);
        let rhs = self.derivatives(x, &u)?;
        let dt = self.params.dt;
        let mut next: State = x.iter().zip(&rhs).map(|(xi, fi)| xi + fi * dt).collect();
        // wheels brake to a stop but never spin backwards
        next[VehicleState::OMEGA_F] = next[VehicleState::OMEGA_F].max(0.0);
        next[VehicleState::OMEGA_R] = next[VehicleState::OMEGA_R].max(0.0);
        next[VehicleState::S] = self.track.wrap(next[VehicleState::S]);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(StepError::NonFinite { what: "next state" });
        }
        Ok(next)
    }
}
