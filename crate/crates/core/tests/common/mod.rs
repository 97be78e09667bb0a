#![allow(dead_code)]

use std::f64::consts::{PI, TAU};

use dronestick_core::{JoystickConfig, LeaderState, Scenario};

pub const PULL_EAST: &str = include_str!("../../../../scenarios/pull_east.json");
pub const ESTOP: &str = include_str!("../../../../scenarios/estop.json");
pub const DEFAULT: &str = include_str!("../../../../scenarios/default.json");

pub fn scenario(text: &str) -> Scenario {
    Scenario::from_json(text).expect("bundled scenario is valid")
}

/// Reference evaluation of the command law, written out one scalar at a
/// time without touching the library's control path.
pub fn command_oracle(s: &LeaderState, c: &JoystickConfig) -> [f64; 4] {
    let deviation = [
        -s.pitch,
        s.roll,
        s.position.z - c.z_d,
        wrap_oracle(s.yaw - c.yaw_d),
    ];
    let limit = [c.angle_lim, c.angle_lim, c.z_lim, c.yaw_lim];
    let mut out = [0.0; 4];
    for i in 0..4 {
        out[i] = if deviation[i].abs() > limit[i] {
            c.k_v[i] * deviation[i]
        } else {
            0.0
        };
    }
    out
}

/// Angle wrap to (-pi, pi] by repeated shifting.
pub fn wrap_oracle(mut a: f64) -> f64 {
    while a > PI {
        a -= TAU;
    }
    while a <= -PI {
        a += TAU;
    }
    a
}

pub fn oracle_deviation(s: &LeaderState, c: &JoystickConfig) -> [f64; 4] {
    [
        -s.pitch,
        s.roll,
        s.position.z - c.z_d,
        wrap_oracle(s.yaw - c.yaw_d),
    ]
}
