//! The joystick command law, e-stop detection and the mission mode machine.
//!
//! Each follower command is the leader's deviation on one axis, passed
//! through a hard deadzone gate and scaled by that axis' gain:
//!
//! ```text
//! command_i = k_v[i] * gate(deviation_i, limit_i)
//! deviation = (-pitch, roll, z - z_d, wrap(yaw - yaw_d))
//! ```
//!
//! Everything here is a pure function of its arguments.

use serde::{Deserialize, Serialize};

use crate::model::{
    wrap_to_pi, CommandVector, JoystickConfig, LeaderState, Mode, SafetyConfig,
};

/// Sign applied to pitch before gating: a nose-down leader (negative pitch)
/// commands positive `v_x`.
pub const PITCH_SIGN: f64 = -1.0;

/// Leader state minus its hold setpoint, one entry per command axis.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Deviation {
    pub d_pitch: f64,
    pub d_roll: f64,
    pub d_z: f64,
    pub d_yaw: f64,
}

impl Deviation {
    pub fn to_array(self) -> [f64; 4] {
        [self.d_pitch, self.d_roll, self.d_z, self.d_yaw]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Deviation {
            d_pitch: a[0],
            d_roll: a[1],
            d_z: a[2],
            d_yaw: a[3],
        }
    }
}

pub fn deviations(state: &LeaderState, cfg: &JoystickConfig) -> Deviation {
    Deviation {
        d_pitch: PITCH_SIGN * state.pitch,
        d_roll: state.roll,
        d_z: state.position.z - cfg.z_d,
        d_yaw: wrap_to_pi(state.yaw - cfg.yaw_d),
    }
}

/// Hard deadzone: passes `value` unchanged iff `|value| > limit`, else 0.
#[inline]
pub fn gate(value: f64, limit: f64) -> f64 {
    if value.abs() > limit {
        value
    } else {
        0.0
    }
}

/// Gated, scaled command for one deviation vector.
pub fn command_from_deviation(dev: Deviation, cfg: &JoystickConfig) -> CommandVector {
    let limits = cfg.limits();
    let d = dev.to_array();
    let mut out = [0.0; 4];
    for i in 0..4 {
        out[i] = cfg.k_v[i] * gate(d[i], limits[i]);
    }
    CommandVector::from_array(out)
}

pub fn compute_command(state: &LeaderState, cfg: &JoystickConfig) -> CommandVector {
    command_from_deviation(deviations(state, cfg), cfg)
}

/// True when the leader is in an extreme attitude or outside the altitude band.
pub fn check_estop(state: &LeaderState, safety: &SafetyConfig) -> bool {
    state.pitch.abs() > safety.pitch_max
        || state.roll.abs() > safety.roll_max
        || state.position.z < safety.z_floor
        || state.position.z > safety.z_ceiling
}

/// Advances the mission mode by one tick.
///
/// `Docked` leaves for `Deploying` unconditionally: the engine only calls this
/// once the scenario has started. An e-stop beats a completed deployment.
pub fn step_mode(mode: Mode, estop: bool, deploy_done: bool, landed: bool) -> Mode {
    match mode {
        Mode::Docked => Mode::Deploying,
        Mode::Deploying if estop => Mode::Emergency,
        Mode::Deploying if deploy_done => Mode::Active,
        Mode::Deploying => Mode::Deploying,
        Mode::Active if estop => Mode::Emergency,
        Mode::Active => Mode::Active,
        Mode::Emergency if landed => Mode::Landed,
        Mode::Emergency => Mode::Emergency,
        Mode::Landed => Mode::Landed,
    }
}
