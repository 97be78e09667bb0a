//! Vibrotactile alarm impulses delivered at the handgrip.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fleet::Follower;
use crate::model::{ensure_finite, ensure_finite3, Vec3};

/// Slack on the refractory comparison so impulses land on the tick grid.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeedbackConfig {
    /// Clearance below which a follower counts as close to an obstacle.
    pub d_warn: f64,
    /// Battery fraction below which the power alarm fires.
    pub b_warn: f64,
    pub impulse_len: f64,
    pub impulse_gap: f64,
    pub amplitude: f64,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        FeedbackConfig {
            d_warn: 1.0,
            b_warn: 0.2,
            impulse_len: 0.1,
            impulse_gap: 0.4,
            amplitude: 1.0,
        }
    }
}

impl FeedbackConfig {
    pub fn validate(&self) -> Result<()> {
        ensure_finite("feedback.d_warn", self.d_warn)?;
        ensure_finite("feedback.b_warn", self.b_warn)?;
        ensure_finite("feedback.impulse_len", self.impulse_len)?;
        ensure_finite("feedback.impulse_gap", self.impulse_gap)?;
        ensure_finite("feedback.amplitude", self.amplitude)?;
        if self.d_warn <= 0.0 {
            return Err(Error::invalid("feedback.d_warn", "feedback.d_warn: must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.b_warn) {
            return Err(Error::invalid("feedback.b_warn", "feedback.b_warn: must lie in [0, 1]"));
        }
        if self.impulse_len <= 0.0 {
            return Err(Error::invalid("feedback.impulse_len", "feedback.impulse_len: must be > 0"));
        }
        if self.impulse_gap < 0.0 {
            return Err(Error::invalid("feedback.impulse_gap", "feedback.impulse_gap: must be >= 0"));
        }
        if !(self.amplitude > 0.0 && self.amplitude <= 1.0) {
            return Err(Error::invalid("feedback.amplitude", "feedback.amplitude: must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Spacing of a continuously active alarm's impulse train.
    pub fn period(&self) -> f64 {
        self.impulse_len + self.impulse_gap
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlarmCause {
    Proximity,
    Battery,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VibroEvent {
    pub t_start: f64,
    pub duration: f64,
    pub cause: AlarmCause,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    pub center: Vec3,
    pub radius: f64,
}

impl Obstacle {
    pub fn validate(&self) -> Result<()> {
        ensure_finite3("obstacle.center", &self.center)?;
        ensure_finite("obstacle.radius", self.radius)?;
        if self.radius < 0.0 {
            return Err(Error::invalid("obstacle.radius", "obstacle.radius: must be >= 0"));
        }
        Ok(())
    }

    pub fn clearance(&self, p: &Vec3) -> f64 {
        (p - self.center).norm() - self.radius
    }
}

/// End time of the latest impulse per cause. A missing entry means never fired.
pub type ImpulseClock = BTreeMap<AlarmCause, f64>;

pub fn proximity_alarm(fleet: &[Follower], obstacles: &[Obstacle], d_warn: f64) -> bool {
    fleet
        .iter()
        .flat_map(|f| obstacles.iter().map(move |o| o.clearance(&f.position)))
        .any(|c| c < d_warn)
}

pub fn battery_alarm(level: f64, b_warn: f64) -> bool {
    level < b_warn
}

/// Emits one impulse per active cause that is out of its refractory window,
/// and returns the updated clock alongside.
pub fn schedule_impulses(
    active: &[AlarmCause],
    now: f64,
    last_end: &ImpulseClock,
    cfg: &FeedbackConfig,
) -> (Vec<VibroEvent>, ImpulseClock) {
    let mut clock = last_end.clone();
    let mut events = Vec::new();
    let mut causes = active.to_vec();
    causes.sort();
    causes.dedup();
    for cause in causes {
        let eligible = match clock.get(&cause) {
            None => true,
            Some(end) => now >= end + cfg.impulse_gap - TIME_EPS,
        };
        if eligible {
            events.push(VibroEvent {
                t_start: now,
                duration: cfg.impulse_len,
                cause,
                amplitude: cfg.amplitude,
            });
            clock.insert(cause, now + cfg.impulse_len);
        }
    }
    (events, clock)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fleet::{FleetMember, FollowerKind};

    fn quad(p: Vec3) -> Follower {
        Follower::new(
            0,
            &FleetMember {
                kind: FollowerKind::Quad,
                offset: p,
                workspace: None,
            },
        )
    }

    #[test]
    fn proximity_examples() {
        let fleet = [quad(Vec3::new(0.0, 0.0, 1.0))];
        let far = Obstacle {
            center: Vec3::new(2.0, 0.0, 1.0),
            radius: 0.5,
        };
        let near = Obstacle {
            center: Vec3::new(1.0, 0.0, 1.0),
            radius: 0.5,
        };
        assert!(!proximity_alarm(&fleet, &[far], 1.0));
        assert!(proximity_alarm(&fleet, &[near], 1.0));
        assert!(proximity_alarm(&fleet, &[far, near], 1.0));
        assert!(!proximity_alarm(&fleet, &[], 1.0));
        assert!(!proximity_alarm(&[], &[near], 1.0));
    }

    #[test]
    fn battery_examples() {
        assert!(battery_alarm(0.15, 0.2));
        assert!(!battery_alarm(0.2, 0.2));
        assert!(!battery_alarm(1.0, 0.2));
    }

    #[test]
    fn first_firing_and_refractory_window() {
        let cfg = FeedbackConfig::default();
        let (events, clock) = schedule_impulses(&[AlarmCause::Proximity], 3.0, &ImpulseClock::new(), &cfg);
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].t_start, 3.0);
        assert_eq!(events[0].duration, cfg.impulse_len);
        assert_eq!(clock[&AlarmCause::Proximity], 3.1);

        let half_gap = 3.1 + cfg.impulse_gap / 2.0;
        let (events, _) = schedule_impulses(&[AlarmCause::Proximity], half_gap, &clock, &cfg);
        assert!(events.is_empty());
    }

    #[test]
    fn causes_fire_independently() {
        let cfg = FeedbackConfig::default();
        let mut clock = ImpulseClock::new();
        clock.insert(AlarmCause::Battery, 0.95);
        let both = [AlarmCause::Proximity, AlarmCause::Battery];
        let (events, _) = schedule_impulses(&both, 1.0, &clock, &cfg);
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].cause, AlarmCause::Proximity);

        let (events, _) = schedule_impulses(&both, 1.0, &ImpulseClock::new(), &cfg);
        assert_eq!(events.len(), 2);
    }

    #[test]
    fn inactive_alarms_emit_nothing() {
        let (events, clock) = schedule_impulses(&[], 1.0, &ImpulseClock::new(), &FeedbackConfig::default());
        assert!(events.is_empty());
        assert!(clock.is_empty());
    }
}
