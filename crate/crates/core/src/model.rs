//! Shared domain types and their invariants.
//!
//! Units are SI throughout (meters, seconds, radians, newtons) with the world
//! z-axis pointing up. Every type here is a plain value; the `validate` methods
//! and the checked constructors are the only gate between untrusted input and
//! the simulation.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Wraps an angle into `(-π, π]`. Values already in range are returned untouched.
pub fn wrap_to_pi(angle: f64) -> f64 {
    let a = angle % TAU;
    if a > PI {
        a - TAU
    } else if a <= -PI {
        a + TAU
    } else {
        a
    }
}

/// Wraps a heading into `[-π, π)`.
pub fn wrap_heading(angle: f64) -> f64 {
    let a = wrap_to_pi(angle);
    if a == PI {
        -PI
    } else {
        a
    }
}

pub(crate) fn ensure_finite(field: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("{field}: must be finite")))
    }
}

pub(crate) fn ensure_finite3(field: &'static str, v: &Vec3) -> Result<()> {
    if v.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("{field}: must be finite")))
    }
}

fn ensure_non_negative(field: &'static str, value: f64, what: &str) -> Result<()> {
    ensure_finite(field, value)?;
    if value >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("{field}: negative {what}")))
    }
}

/// Pose and rates of the leader quadrotor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeaderState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub pitch: f64,
    pub roll: f64,
    pub yaw: f64,
    pub yaw_rate: f64,
}

impl LeaderState {
    /// Leader at rest at `position`, level, facing `yaw`.
    pub fn at_rest(position: Vec3, yaw: f64) -> Self {
        LeaderState {
            position,
            velocity: Vec3::zeros(),
            pitch: 0.0,
            roll: 0.0,
            yaw: wrap_heading(yaw),
            yaw_rate: 0.0,
        }
    }

    /// Name of the first field holding a NaN or infinity, if any.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        if !self.position.iter().all(|c| c.is_finite()) {
            Some("leader.position")
        } else if !self.velocity.iter().all(|c| c.is_finite()) {
            Some("leader.velocity")
        } else if !self.pitch.is_finite() {
            Some("leader.pitch")
        } else if !self.roll.is_finite() {
            Some("leader.roll")
        } else if !self.yaw.is_finite() {
            Some("leader.yaw")
        } else if !self.yaw_rate.is_finite() {
            Some("leader.yaw_rate")
        } else {
            None
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(field) = self.first_non_finite() {
            return Err(Error::invalid(field, format!("{field}: must be finite")));
        }
        if self.pitch.abs() >= FRAC_PI_2 {
            return Err(Error::invalid("pitch", "pitch: must lie in (-pi/2, pi/2)"));
        }
        if self.roll.abs() >= FRAC_PI_2 {
            return Err(Error::invalid("roll", "roll: must lie in (-pi/2, pi/2)"));
        }
        if !(-PI..PI).contains(&self.yaw) {
            return Err(Error::invalid("yaw", "yaw: must lie in [-pi, pi)"));
        }
        Ok(())
    }
}

/// Gains, hover setpoints and deadzone limits of the command law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JoystickConfig {
    /// Per-axis gains for (pitch, roll, z, yaw).
    pub k_v: [f64; 4],
    pub z_d: f64,
    pub yaw_d: f64,
    pub angle_lim: f64,
    pub z_lim: f64,
    pub yaw_lim: f64,
}

impl Default for JoystickConfig {
    fn default() -> Self {
        JoystickConfig {
            k_v: [4.0, 4.0, 1.0, 1.0],
            z_d: 1.5,
            yaw_d: 0.0,
            angle_lim: 0.03,
            z_lim: 0.05,
            yaw_lim: 0.05,
        }
    }
}

impl JoystickConfig {
    pub fn validate(&self) -> Result<()> {
        const GAINS: [&str; 4] = ["k_v[0]", "k_v[1]", "k_v[2]", "k_v[3]"];
        for (name, k) in GAINS.iter().zip(self.k_v) {
            ensure_non_negative(name, k, "gain")?;
        }
        ensure_non_negative("angle_lim", self.angle_lim, "limit")?;
        ensure_non_negative("z_lim", self.z_lim, "limit")?;
        ensure_non_negative("yaw_lim", self.yaw_lim, "limit")?;
        ensure_finite("z_d", self.z_d)?;
        if self.z_d <= 0.0 {
            return Err(Error::invalid("z_d", "z_d: hover setpoint must be above ground"));
        }
        ensure_finite("yaw_d", self.yaw_d)?;
        Ok(())
    }

    /// Deadzone limits in axis order (pitch, roll, z, yaw).
    pub fn limits(&self) -> [f64; 4] {
        [self.angle_lim, self.angle_lim, self.z_lim, self.yaw_lim]
    }
}

/// The four outputs of the command law sent to every follower.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandVector {
    pub v_x: f64,
    pub v_y: f64,
    pub v_z: f64,
    /// Absolute yaw setpoint for the followers.
    pub alpha: f64,
}

impl CommandVector {
    pub const ZERO: CommandVector = CommandVector {
        v_x: 0.0,
        v_y: 0.0,
        v_z: 0.0,
        alpha: 0.0,
    };

    pub fn from_array(a: [f64; 4]) -> Self {
        CommandVector {
            v_x: a[0],
            v_y: a[1],
            v_z: a[2],
            alpha: a[3],
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.v_x, self.v_y, self.v_z, self.alpha]
    }

    pub fn is_zero(&self) -> bool {
        self.to_array().iter().all(|c| *c == 0.0)
    }

    pub fn velocity(&self) -> Vec3 {
        Vec3::new(self.v_x, self.v_y, self.v_z)
    }
}

/// Extreme-state thresholds that trip the emergency stop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SafetyConfig {
    pub pitch_max: f64,
    pub roll_max: f64,
    pub z_floor: f64,
    pub z_ceiling: f64,
}

impl Default for SafetyConfig {
    fn default() -> Self {
        SafetyConfig {
            pitch_max: 0.5,
            roll_max: 0.5,
            z_floor: 0.2,
            z_ceiling: 3.0,
        }
    }
}

/// Checks a joystick/safety pair and hands it back unchanged.
///
/// Reports the first violated invariant by name.
pub fn validate_config(
    cfg: JoystickConfig,
    safety: SafetyConfig,
) -> Result<(JoystickConfig, SafetyConfig)> {
    cfg.validate()?;
    ensure_finite("pitch_max", safety.pitch_max)?;
    ensure_finite("roll_max", safety.roll_max)?;
    ensure_finite("z_floor", safety.z_floor)?;
    ensure_finite("z_ceiling", safety.z_ceiling)?;
    if safety.pitch_max <= cfg.angle_lim {
        return Err(Error::invalid("pitch_max", "pitch_max must exceed angle_lim"));
    }
    if safety.roll_max <= cfg.angle_lim {
        return Err(Error::invalid("roll_max", "roll_max must exceed angle_lim"));
    }
    if safety.z_floor < 0.0 {
        return Err(Error::invalid("z_floor", "z_floor: negative limit"));
    }
    if safety.z_floor >= safety.z_ceiling {
        return Err(Error::invalid("z_ceiling", "z_ceiling must exceed z_floor"));
    }
    Ok((cfg, safety))
}

/// Mission mode of the leader and, through it, of the whole fleet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    Docked,
    Deploying,
    Active,
    Emergency,
    Landed,
}

impl Mode {
    /// Whether `self -> next` is an allowed edge (self-loops always are).
    pub fn can_transition_to(self, next: Mode) -> bool {
        use Mode::*;
        self == next
            || matches!(
                (self, next),
                (Docked, Deploying)
                    | (Deploying, Active)
                    | (Deploying, Emergency)
                    | (Active, Emergency)
                    | (Emergency, Landed)
            )
    }

    /// Emergency or Landed: the e-stop has fired and nothing can undo it.
    pub fn is_safety(self) -> bool {
        matches!(self, Mode::Emergency | Mode::Landed)
    }
}

/// Operator-side boundary condition: where the handgrip is and how it is held.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GripInput {
    pub position: Vec3,
    /// Twist torque about the vertical axis, N·m.
    pub yaw_twist: f64,
    pub held: bool,
}

impl GripInput {
    pub fn new(position: Vec3, yaw_twist: f64, held: bool, twist_max: f64) -> Result<Self> {
        let grip = GripInput {
            position,
            yaw_twist,
            held,
        };
        grip.validate(twist_max)?;
        Ok(grip)
    }

    pub fn released(position: Vec3) -> Self {
        GripInput {
            position,
            yaw_twist: 0.0,
            held: false,
        }
    }

    pub fn validate(&self, twist_max: f64) -> Result<()> {
        ensure_finite3("grip.position", &self.position)?;
        ensure_finite("grip.yaw_twist", self.yaw_twist)?;
        if self.yaw_twist.abs() > twist_max {
            return Err(Error::invalid(
                "grip.yaw_twist",
                format!("grip.yaw_twist: |{}| exceeds twist_max {twist_max}", self.yaw_twist),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reason(e: Error) -> String {
        e.to_string()
    }

    #[test]
    fn default_config_is_accepted() {
        let cfg = JoystickConfig::default();
        let safety = SafetyConfig::default();
        assert_eq!(validate_config(cfg, safety).unwrap(), (cfg, safety));
    }

    #[test]
    fn accepts_limits_in_typical_band() {
        let cfg = JoystickConfig {
            k_v: [4.0, 4.0, 1.0, 1.0],
            angle_lim: 0.03,
            z_lim: 0.05,
            yaw_lim: 0.04,
            ..JoystickConfig::default()
        };
        let safety = SafetyConfig {
            pitch_max: 0.5,
            ..SafetyConfig::default()
        };
        assert!(validate_config(cfg, safety).is_ok());
    }

    #[test]
    fn negative_limit_is_rejected() {
        let cfg = JoystickConfig {
            angle_lim: -0.1,
            ..JoystickConfig::default()
        };
        let err = validate_config(cfg, SafetyConfig::default()).unwrap_err();
        assert_eq!(err.field(), Some("angle_lim"));
        assert!(reason(err).contains("negative limit"));
    }

    #[test]
    fn pitch_max_below_angle_lim_is_rejected() {
        let cfg = JoystickConfig {
            angle_lim: 0.03,
            ..JoystickConfig::default()
        };
        let safety = SafetyConfig {
            pitch_max: 0.02,
            ..SafetyConfig::default()
        };
        let err = validate_config(cfg, safety).unwrap_err();
        assert_eq!(err.field(), Some("pitch_max"));
        assert_eq!(reason(err), "pitch_max must exceed angle_lim");
    }

    #[test]
    fn other_orderings_and_signs() {
        let bad_gain = JoystickConfig {
            k_v: [4.0, -1.0, 1.0, 1.0],
            ..JoystickConfig::default()
        };
        assert_eq!(bad_gain.validate().unwrap_err().field(), Some("k_v[1]"));

        let ground = JoystickConfig {
            z_d: 0.0,
            ..JoystickConfig::default()
        };
        assert_eq!(ground.validate().unwrap_err().field(), Some("z_d"));

        let inverted = SafetyConfig {
            z_floor: 3.0,
            z_ceiling: 2.0,
            ..SafetyConfig::default()
        };
        let err = validate_config(JoystickConfig::default(), inverted).unwrap_err();
        assert_eq!(err.field(), Some("z_ceiling"));
    }

    #[test]
    fn mode_transitions() {
        use Mode::*;
        assert!(Docked.can_transition_to(Deploying));
        assert!(Deploying.can_transition_to(Active));
        assert!(Active.can_transition_to(Emergency));
        assert!(Emergency.can_transition_to(Landed));
        assert!(!Landed.can_transition_to(Active));
        assert!(!Emergency.can_transition_to(Active));
        assert!(!Docked.can_transition_to(Active));
    }

    #[test]
    fn wrapping() {
        assert_eq!(wrap_to_pi(PI), PI);
        assert_eq!(wrap_to_pi(-PI), PI);
        assert_eq!(wrap_heading(PI), -PI);
        assert_eq!(wrap_to_pi(0.5), 0.5);
        assert!((wrap_to_pi(3.2) - (3.2 - TAU)).abs() < 1e-15);
        assert!((wrap_to_pi(-7.0) - (-7.0 + TAU)).abs() < 1e-15);
    }

    #[test]
    fn grip_twist_is_bounded() {
        let p = Vec3::new(0.0, 0.0, 1.0);
        assert!(GripInput::new(p, 0.001, true, 0.002).is_ok());
        let err = GripInput::new(p, -0.003, true, 0.002).unwrap_err();
        assert_eq!(err.field(), Some("grip.yaw_twist"));
        assert!(GripInput::new(Vec3::new(f64::NAN, 0.0, 0.0), 0.0, true, 1.0).is_err());
    }

    #[test]
    fn leader_state_bounds() {
        let mut s = LeaderState::at_rest(Vec3::new(0.0, 0.0, 1.5), 0.0);
        assert!(s.validate().is_ok());
        s.pitch = 1.6;
        assert_eq!(s.validate().unwrap_err().field(), Some("pitch"));
        s.pitch = 0.0;
        s.velocity.y = f64::INFINITY;
        assert_eq!(s.first_non_finite(), Some("leader.velocity"));
    }
}
