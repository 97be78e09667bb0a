//! Declarative description of one simulation run, loaded from JSON.
//!
//! A scenario file has exactly the top-level sections `joystick`, `safety`,
//! `tether`, `leader`, `fleet`, `feedback` and `sim`. Missing sections and
//! fields take their defaults; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::feedback::{FeedbackConfig, Obstacle};
use crate::fleet::FleetConfig;
use crate::model::{
    ensure_finite, ensure_finite3, validate_config, GripInput, JoystickConfig, SafetyConfig, Vec3,
};
use crate::physics::{HoldSetpoint, LeaderParams, TetherConfig};

/// Tolerance used when mapping scenario times onto the tick grid.
pub(crate) const GRID_EPS: f64 = 1e-9;

/// One point of the scripted grip timeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GripKeyframe {
    pub t: f64,
    pub pos: Vec3,
    #[serde(default)]
    pub twist: f64,
    pub held: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BatteryProfile {
    pub initial: f64,
    /// Fraction lost per second.
    pub drain: f64,
}

impl Default for BatteryProfile {
    fn default() -> Self {
        BatteryProfile {
            initial: 1.0,
            drain: 0.0,
        }
    }
}

impl BatteryProfile {
    pub fn level_at(&self, t: f64) -> f64 {
        (self.initial - self.drain * t).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub dt: f64,
    pub duration: f64,
    /// Only consumed by test-side scenario generators; the engine draws no randomness.
    pub seed: u64,
    /// Where the leader sits before take-off.
    pub launchpad: Vec3,
    pub deploy_target: Vec3,
    /// Speed of the take-off setpoint ramp, m/s.
    pub deploy_speed: f64,
    pub grip_timeline: Vec<GripKeyframe>,
    pub obstacles: Vec<Obstacle>,
    pub battery: BatteryProfile,
    /// Time of a forced e-stop, if any.
    pub estop_at: Option<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 0.01,
            duration: 10.0,
            seed: 0,
            launchpad: Vec3::zeros(),
            deploy_target: Vec3::new(0.0, 0.0, 1.5),
            deploy_speed: 0.5,
            grip_timeline: Vec::new(),
            obstacles: Vec::new(),
            battery: BatteryProfile::default(),
            estop_at: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub joystick: JoystickConfig,
    pub safety: SafetyConfig,
    pub tether: TetherConfig,
    pub leader: LeaderParams,
    pub fleet: FleetConfig,
    pub feedback: FeedbackConfig,
    pub sim: SimConfig,
}

impl Scenario {
    /// Parses and validates a scenario document.
    pub fn from_json(text: &str) -> Result<Self> {
        let scenario: Scenario = serde_json::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Scenario::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        validate_config(self.joystick, self.safety)?;
        self.tether.validate()?;
        self.leader.validate()?;
        self.fleet.validate()?;
        self.feedback.validate()?;

        let sim = &self.sim;
        ensure_finite("dt", sim.dt)?;
        if sim.dt <= 0.0 {
            return Err(Error::invalid("dt", "dt: must be > 0"));
        }
        ensure_finite("duration", sim.duration)?;
        if sim.duration < 0.0 {
            return Err(Error::invalid("duration", "duration: must be >= 0"));
        }
        ensure_finite3("launchpad", &sim.launchpad)?;
        ensure_finite3("deploy_target", &sim.deploy_target)?;
        if sim.launchpad.z < 0.0 {
            return Err(Error::invalid("launchpad", "launchpad: must not be below ground"));
        }
        ensure_finite("deploy_speed", sim.deploy_speed)?;
        if sim.deploy_speed <= 0.0 {
            return Err(Error::invalid("deploy_speed", "deploy_speed: must be > 0"));
        }
        let mut prev: Option<f64> = None;
        for key in &sim.grip_timeline {
            ensure_finite("grip_timeline.t", key.t)?;
            if key.t < 0.0 || key.t > sim.duration {
                return Err(Error::invalid(
                    "grip_timeline.t",
                    format!("grip_timeline.t: {} lies outside [0, duration]", key.t),
                ));
            }
            if prev.is_some_and(|p| key.t <= p) {
                return Err(Error::invalid(
                    "grip_timeline.t",
                    "grip_timeline.t: times must be strictly increasing",
                ));
            }
            prev = Some(key.t);
            GripInput {
                position: key.pos,
                yaw_twist: key.twist,
                held: key.held,
            }
            .validate(self.tether.twist_max)?;
        }
        sim.obstacles.iter().try_for_each(Obstacle::validate)?;
        ensure_finite("battery.initial", sim.battery.initial)?;
        ensure_finite("battery.drain", sim.battery.drain)?;
        if !(0.0..=1.0).contains(&sim.battery.initial) {
            return Err(Error::invalid("battery.initial", "battery.initial: must lie in [0, 1]"));
        }
        if sim.battery.drain < 0.0 {
            return Err(Error::invalid("battery.drain", "battery.drain: must be >= 0"));
        }
        if let Some(t) = sim.estop_at {
            ensure_finite("estop_at", t)?;
            if t < 0.0 {
                return Err(Error::invalid("estop_at", "estop_at: must be >= 0"));
            }
        }
        Ok(())
    }

    /// Number of ticks in a full run.
    pub fn tick_count(&self) -> u64 {
        (self.sim.duration / self.sim.dt + GRID_EPS).floor() as u64
    }

    /// Grip position that hangs the wire at exactly its rest length below the
    /// leader's hover point.
    pub fn rest_grip_position(&self) -> Vec3 {
        self.tether.rest_grip(self.sim.deploy_target)
    }

    /// Scripted grip at time `t`: piecewise-linear in position and twist,
    /// a step function in `held`. With no timeline the grip hangs released.
    pub fn sample_grip(&self, t: f64) -> GripInput {
        let keys = &self.sim.grip_timeline;
        let (first, last) = match (keys.first(), keys.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return GripInput::released(self.rest_grip_position()),
        };
        let from_key = |k: &GripKeyframe| GripInput {
            position: k.pos,
            yaw_twist: k.twist,
            held: k.held,
        };
        if t <= first.t {
            return from_key(first);
        }
        if t >= last.t {
            return from_key(last);
        }
        let i = keys.partition_point(|k| k.t <= t) - 1;
        let (a, b) = (&keys[i], &keys[i + 1]);
        let s = (t - a.t) / (b.t - a.t);
        GripInput {
            position: a.pos + (b.pos - a.pos) * s,
            yaw_twist: a.twist + (b.twist - a.twist) * s,
            held: a.held,
        }
    }

    /// Hover setpoint during take-off: a constant-speed ramp from the launchpad.
    pub fn deploy_setpoint(&self, t: f64) -> HoldSetpoint {
        let start = self.sim.launchpad;
        let span = self.sim.deploy_target - start;
        let distance = span.norm();
        let position = if distance == 0.0 {
            self.sim.deploy_target
        } else {
            let s = (t * self.sim.deploy_speed / distance).min(1.0);
            if s >= 1.0 {
                self.sim.deploy_target
            } else {
                start + span * s
            }
        };
        HoldSetpoint {
            position,
            yaw: self.joystick.yaw_d,
        }
    }

    /// Whether the scripted e-stop fires on the tick starting at `t`.
    pub fn scripted_estop(&self, t: f64) -> bool {
        self.sim
            .estop_at
            .is_some_and(|at| t >= at - GRID_EPS * self.sim.dt)
    }

    /// Canonical JSON: every default filled in, object keys sorted, no whitespace.
    pub fn canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("scenario serializes");
        let mut out = String::new();
        write_canonical(&value, &mut out);
        out
    }

    /// 64-bit FNV-1a of the canonical JSON.
    pub fn hash(&self) -> u64 {
        fnv1a64(self.canonical_json().as_bytes())
    }
}

fn write_canonical(value: &Value, out: &mut String) {
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_canonical(&map[k], out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        scalar => out.push_str(&scalar.to_string()),
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    use std::hash::Hasher;
    let mut h = fnv::FnvHasher::default();
    h.write(bytes);
    h.finish()
}
