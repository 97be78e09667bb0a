//! Leader quadrotor and tether dynamics.
//!
//! The leader is a point mass under a PD hover controller with first-order
//! attitude tracking and no integral term, so a steady pull leaves a steady
//! offset in position and tilt. That offset is the joystick signal.
//!
//! Attitude follows the right-handed world frame: positive pitch (rotation
//! about +y) tilts thrust toward +x, positive roll (rotation about +x) tilts
//! it toward -y. Altitude is held by thrust, so a tilt of `θ` yields a
//! horizontal acceleration of `g·tan θ`.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    ensure_finite, ensure_finite3, wrap_heading, wrap_to_pi, GripInput, LeaderState, Vec3,
};

/// Added to the twist inertia so a zero attachment offset stays finite.
pub const TWIST_INERTIA_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LeaderParams {
    pub mass: f64,
    pub gravity: f64,
    pub kp_pos: f64,
    pub kd_pos: f64,
    pub tilt_tau: f64,
    pub kp_yaw: f64,
    pub kd_yaw: f64,
    pub tilt_cap: f64,
}

impl Default for LeaderParams {
    fn default() -> Self {
        LeaderParams {
            mass: 0.5,
            gravity: 9.81,
            kp_pos: 8.0,
            kd_pos: 4.0,
            tilt_tau: 0.15,
            kp_yaw: 6.0,
            kd_yaw: 3.0,
            tilt_cap: 0.45,
        }
    }
}

impl LeaderParams {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("leader.mass", self.mass),
            ("leader.gravity", self.gravity),
            ("leader.kp_pos", self.kp_pos),
            ("leader.kd_pos", self.kd_pos),
            ("leader.tilt_tau", self.tilt_tau),
            ("leader.kp_yaw", self.kp_yaw),
            ("leader.kd_yaw", self.kd_yaw),
            ("leader.tilt_cap", self.tilt_cap),
        ] {
            ensure_finite(field, v)?;
            if v <= 0.0 {
                return Err(Error::invalid(field, format!("{field}: must be > 0")));
            }
        }
        if self.tilt_cap >= FRAC_PI_2 {
            return Err(Error::invalid("leader.tilt_cap", "leader.tilt_cap: must be below pi/2"));
        }
        Ok(())
    }
}

/// Coiled wire between the leader and the handgrip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TetherConfig {
    pub rest_length: f64,
    pub stiffness: f64,
    pub damping: f64,
    /// Distance of the attachment point below the leader's center.
    pub attach_offset: f64,
    /// Largest twist torque the operator can apply through the grip.
    pub twist_max: f64,
}

impl Default for TetherConfig {
    fn default() -> Self {
        TetherConfig {
            rest_length: 0.5,
            stiffness: 20.0,
            damping: 1.0,
            attach_offset: 0.05,
            twist_max: 0.002,
        }
    }
}

impl TetherConfig {
    pub fn validate(&self) -> Result<()> {
        ensure_finite("tether.rest_length", self.rest_length)?;
        if self.rest_length <= 0.0 {
            return Err(Error::invalid("tether.rest_length", "tether.rest_length: must be > 0"));
        }
        for (field, v) in [
            ("tether.stiffness", self.stiffness),
            ("tether.damping", self.damping),
            ("tether.attach_offset", self.attach_offset),
            ("tether.twist_max", self.twist_max),
        ] {
            ensure_finite(field, v)?;
            if v < 0.0 {
                return Err(Error::invalid(field, format!("{field}: must be >= 0")));
            }
        }
        Ok(())
    }

    /// Where the wire leaves the leader.
    pub fn attach_point(&self, leader: &LeaderState) -> Vec3 {
        leader.position - Vec3::new(0.0, 0.0, self.attach_offset)
    }

    /// Grip position that leaves the wire hanging straight down, exactly at rest length.
    pub fn rest_grip(&self, leader_position: Vec3) -> Vec3 {
        leader_position - Vec3::new(0.0, 0.0, self.attach_offset + self.rest_length)
    }
}

/// Force the wire exerts on the leader. Tension only: a slack or released
/// wire pushes nothing.
pub fn tether_force(
    grip: &GripInput,
    grip_velocity: &Vec3,
    leader: &LeaderState,
    tether: &TetherConfig,
) -> Vec3 {
    if !grip.held {
        return Vec3::zeros();
    }
    let d = grip.position - tether.attach_point(leader);
    let length = d.norm();
    if length <= tether.rest_length {
        return Vec3::zeros();
    }
    let dir = d / length;
    let separation_rate = dir.dot(&(grip_velocity - leader.velocity));
    let tension =
        tether.stiffness * (length - tether.rest_length) + tether.damping * separation_rate.max(0.0);
    dir * tension
}

/// What the hover controller holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoldSetpoint {
    pub position: Vec3,
    pub yaw: f64,
}

/// External load the wire puts on the leader for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TetherLoad {
    /// Wire tension, applied at the center of mass.
    pub force: Vec3,
    /// Operator twist torque about the vertical axis.
    pub twist: f64,
    /// Lever arm of the twist (the attachment offset).
    pub lever_arm: f64,
}

impl TetherLoad {
    pub fn none() -> Self {
        TetherLoad {
            force: Vec3::zeros(),
            twist: 0.0,
            lever_arm: 0.0,
        }
    }

    pub fn force_only(force: Vec3) -> Self {
        TetherLoad {
            force,
            ..TetherLoad::none()
        }
    }
}

fn check_inputs(state: &LeaderState, load: &TetherLoad, dt: f64) -> Result<()> {
    if let Some(field) = state.first_non_finite() {
        return Err(Error::invalid(field, format!("{field}: must be finite")));
    }
    ensure_finite3("ext_force", &load.force)?;
    ensure_finite("twist", load.twist)?;
    ensure_finite("lever_arm", load.lever_arm)?;
    ensure_finite("dt", dt)?;
    if dt <= 0.0 {
        return Err(Error::invalid("dt", "dt: must be > 0"));
    }
    Ok(())
}

fn relax_factor(dt: f64, tau: f64) -> f64 {
    // exact discretisation of the first-order lag; never overshoots the target
    1.0 - (-dt / tau).exp()
}

/// One semi-implicit Euler step of the powered leader.
pub fn step_leader(
    state: &LeaderState,
    load: &TetherLoad,
    params: &LeaderParams,
    setpoint: &HoldSetpoint,
    dt: f64,
) -> Result<LeaderState> {
    check_inputs(state, load, dt)?;
    let g = params.gravity;
    let cap = params.tilt_cap;

    let a_des = (setpoint.position - state.position) * params.kp_pos - state.velocity * params.kd_pos;
    let pitch_cmd = (a_des.x / g).atan().clamp(-cap, cap);
    let roll_cmd = (-a_des.y / g).atan().clamp(-cap, cap);

    let relax = relax_factor(dt, params.tilt_tau);
    let pitch = state.pitch + (pitch_cmd - state.pitch) * relax;
    let roll = state.roll + (roll_cmd - state.roll) * relax;

    let thrust_accel = Vec3::new(g * pitch.tan(), -g * roll.tan(), a_des.z);
    let accel = thrust_accel + load.force / params.mass;
    let mut velocity = state.velocity + accel * dt;
    let mut position = state.position + velocity * dt;
    if position.z < 0.0 {
        position.z = 0.0;
        velocity.z = velocity.z.max(0.0);
    }

    let inertia = params.mass * load.lever_arm * load.lever_arm + TWIST_INERTIA_EPS;
    let yaw_accel = params.kp_yaw * wrap_to_pi(setpoint.yaw - state.yaw)
        - params.kd_yaw * state.yaw_rate
        + load.twist / inertia;
    let yaw_rate = state.yaw_rate + yaw_accel * dt;
    let yaw = wrap_heading(state.yaw + yaw_rate * dt);

    Ok(LeaderState {
        position,
        velocity,
        pitch,
        roll,
        yaw,
        yaw_rate,
    })
}

/// One step of the leader with its motors shut down.
///
/// Attitude relaxes to level, there is no thrust, and the airframe falls
/// under gravity plus wire tension. Twist is ignored and the heading is
/// frozen. Once on the ground it stays put.
pub fn step_leader_unpowered(
    state: &LeaderState,
    load: &TetherLoad,
    params: &LeaderParams,
    dt: f64,
) -> Result<LeaderState> {
    check_inputs(state, load, dt)?;
    let relax = relax_factor(dt, params.tilt_tau);
    let pitch = state.pitch - state.pitch * relax;
    let roll = state.roll - state.roll * relax;

    if state.position.z <= 0.0 {
        return Ok(LeaderState {
            position: Vec3::new(state.position.x, state.position.y, 0.0),
            velocity: Vec3::zeros(),
            pitch,
            roll,
            yaw: state.yaw,
            yaw_rate: 0.0,
        });
    }

    let accel = Vec3::new(0.0, 0.0, -params.gravity) + load.force / params.mass;
    let mut velocity = state.velocity + accel * dt;
    let mut position = state.position + velocity * dt;
    if position.z <= 0.0 {
        position.z = 0.0;
        velocity = Vec3::zeros();
    }
    Ok(LeaderState {
        position,
        velocity,
        pitch,
        roll,
        yaw: state.yaw,
        yaw_rate: 0.0,
    })
}
