//! Fixed-step world loop.
//!
//! One tick runs, in order: grip sample (or live override), tether force,
//! leader step, command law, safety check and mode step, fleet step, battery
//! and haptic alarms, frame emission. The command computed from the leader
//! state at tick `k` moves the fleet within the same tick.

use serde::{Deserialize, Serialize};

use crate::control::{check_estop, compute_command, deviations, step_mode, Deviation};
use crate::error::{Error, Result};
use crate::feedback::{
    battery_alarm, proximity_alarm, schedule_impulses, AlarmCause, ImpulseClock, VibroEvent,
};
use crate::fleet::{fleet_step, Follower};
use crate::model::{CommandVector, GripInput, LeaderState, Mode, Vec3};
use crate::physics::{step_leader, step_leader_unpowered, tether_force, TetherLoad};
use crate::scenario::Scenario;

/// Take-off is complete once the leader is this close to its target...
pub const DEPLOY_POSITION_TOL: f64 = 0.05;
/// ...and slower than this.
pub const DEPLOY_SPEED_TOL: f64 = 0.05;

/// Operator inputs that arrived from outside the scenario for one tick.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LiveInput {
    /// Replaces the scripted grip sample.
    pub grip: Option<GripInput>,
    pub estop: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub t: f64,
    pub tick: u64,
    pub mode: Mode,
    pub leader: LeaderState,
    pub grip: GripInput,
    pub fleet: Vec<Follower>,
    pub battery: f64,
    pub command: CommandVector,
    pub vibro_last_end: ImpulseClock,
    pub estop_latched: bool,
}

impl WorldState {
    pub fn initial(scenario: &Scenario) -> Self {
        let leader = LeaderState::at_rest(scenario.sim.launchpad, scenario.joystick.yaw_d);
        WorldState {
            t: 0.0,
            tick: 0,
            mode: Mode::Docked,
            leader,
            grip: scenario.sample_grip(0.0),
            fleet: scenario.fleet.spawn(),
            battery: scenario.sim.battery.level_at(0.0),
            command: CommandVector::ZERO,
            vibro_last_end: ImpulseClock::new(),
            estop_latched: false,
        }
    }
}

/// Everything that happened in one tick. The unit of logging, replay and streaming.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Frame {
    pub tick: u64,
    /// Start time of the tick.
    pub t: f64,
    pub mode: Mode,
    pub leader: LeaderState,
    pub grip: GripInput,
    /// The grip came from a live operator rather than the timeline.
    pub grip_live: bool,
    /// An operator e-stop was applied on this tick.
    pub operator_estop: bool,
    pub tether_force: Vec3,
    pub deviation: Deviation,
    pub command: CommandVector,
    pub fleet: Vec<Follower>,
    pub battery: f64,
    pub vibro: Vec<VibroEvent>,
    pub estop_latched: bool,
}

impl Frame {
    /// The live inputs recorded in this frame, in the form `tick` consumes them.
    pub fn live_input(&self) -> LiveInput {
        LiveInput {
            grip: self.grip_live.then_some(self.grip),
            estop: self.operator_estop,
        }
    }
}

fn check_finite(leader: &LeaderState, fleet: &[Follower], tick: u64) -> Result<()> {
    if let Some(field) = leader.first_non_finite() {
        return Err(Error::NonFinite { field, tick });
    }
    for f in fleet {
        if !f.position.iter().all(|c| c.is_finite()) {
            return Err(Error::NonFinite {
                field: "fleet.position",
                tick,
            });
        }
        if !f.yaw.is_finite() {
            return Err(Error::NonFinite {
                field: "fleet.yaw",
                tick,
            });
        }
    }
    Ok(())
}

/// Advances the world by one tick.
pub fn tick(world: &WorldState, scenario: &Scenario, live: &LiveInput) -> Result<(WorldState, Frame)> {
    let dt = scenario.sim.dt;
    let k = world.tick;
    let t = k as f64 * dt;

    // (1) grip
    let grip = live.grip.unwrap_or_else(|| scenario.sample_grip(t));
    grip.validate(scenario.tether.twist_max)?;
    let grip_velocity = if k == 0 {
        Vec3::zeros()
    } else {
        (grip.position - world.grip.position) / dt
    };

    // (2) tether
    let force = tether_force(&grip, &grip_velocity, &world.leader, &scenario.tether);
    let load = TetherLoad {
        force,
        twist: if grip.held { grip.yaw_twist } else { 0.0 },
        lever_arm: scenario.tether.attach_offset,
    };

    // (3) leader; the first tick is the scenario start and takes the leader off the pad
    let mode = match world.mode {
        Mode::Docked => step_mode(Mode::Docked, false, false, false),
        m => m,
    };
    let stepped = match mode {
        Mode::Emergency | Mode::Landed => {
            step_leader_unpowered(&world.leader, &load, &scenario.leader, dt)
        }
        _ => step_leader(
            &world.leader,
            &load,
            &scenario.leader,
            &scenario.deploy_setpoint(t),
            dt,
        ),
    };
    let leader = stepped.map_err(|e| match e {
        Error::Invalid { field, .. } => Error::NonFinite { field, tick: k },
        other => other,
    })?;
    check_finite(&leader, &[], k)?;

    // (4) command law
    let deviation = deviations(&leader, &scenario.joystick);
    let raw_command = if mode == Mode::Active {
        compute_command(&leader, &scenario.joystick)
    } else {
        CommandVector::ZERO
    };

    // (5) safety and mode
    let sensed = mode == Mode::Active && check_estop(&leader, &scenario.safety);
    let requested = matches!(mode, Mode::Deploying | Mode::Active)
        && (scenario.scripted_estop(t) || live.estop);
    let estop = sensed || requested;
    let target = scenario.sim.deploy_target;
    let deploy_done = mode == Mode::Deploying
        && (leader.position - target).norm() < DEPLOY_POSITION_TOL
        && leader.velocity.norm() < DEPLOY_SPEED_TOL;
    let landed = leader.position.z == 0.0 && world.fleet.iter().all(|f| f.landed);
    let next_mode = step_mode(mode, estop, deploy_done, landed);
    let command = if next_mode == Mode::Active {
        raw_command
    } else {
        CommandVector::ZERO
    };
    let estop_latched = world.estop_latched || estop;

    // (6) fleet
    let fleet_params = scenario.fleet.params();
    let fleet = fleet_step(&world.fleet, &command, next_mode, &fleet_params, dt);
    check_finite(&leader, &fleet, k)?;

    // (7) battery and haptics
    let battery = scenario.sim.battery.level_at(t);
    let mut active = Vec::new();
    if proximity_alarm(&fleet, &scenario.sim.obstacles, scenario.feedback.d_warn) {
        active.push(AlarmCause::Proximity);
    }
    if battery_alarm(battery, scenario.feedback.b_warn) {
        active.push(AlarmCause::Battery);
    }
    let (vibro, vibro_last_end) =
        schedule_impulses(&active, t, &world.vibro_last_end, &scenario.feedback);

    // (8) frame
    let frame = Frame {
        tick: k,
        t,
        mode: next_mode,
        leader,
        grip,
        grip_live: live.grip.is_some(),
        operator_estop: live.estop,
        tether_force: force,
        deviation,
        command,
        fleet: fleet.clone(),
        battery,
        vibro,
        estop_latched,
    };
    let next = WorldState {
        t: (k + 1) as f64 * dt,
        tick: k + 1,
        mode: next_mode,
        leader,
        grip,
        fleet,
        battery,
        command,
        vibro_last_end,
        estop_latched,
    };
    Ok((next, frame))
}

/// Owns the single mutable world of one run.
#[derive(Debug, Clone)]
pub struct Engine {
    scenario: Scenario,
    world: WorldState,
}

impl Engine {
    pub fn new(scenario: Scenario) -> Result<Self> {
        scenario.validate()?;
        let world = WorldState::initial(&scenario);
        Ok(Engine { scenario, world })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn finished(&self) -> bool {
        self.world.tick >= self.scenario.tick_count()
    }

    /// Runs one tick. Operator e-stops arriving after the stop has fired are
    /// dropped so they leave no trace in the record.
    pub fn step(&mut self, mut live: LiveInput) -> Result<Frame> {
        if self.world.mode.is_safety() {
            live.estop = false;
        }
        let (next, frame) = tick(&self.world, &self.scenario, &live)?;
        self.world = next;
        Ok(frame)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fleet::{FleetMember, FollowerKind};

    fn hovering(duration: f64) -> Scenario {
        let mut s = Scenario::default();
        s.sim.duration = duration;
        s.sim.launchpad = s.sim.deploy_target;
        s.fleet.members = vec![FleetMember {
            kind: FollowerKind::Quad,
            offset: Vec3::new(0.0, 0.0, 1.0),
            workspace: None,
        }];
        s
    }

    #[test]
    fn quiescent_tick_is_null() {
        let s = hovering(1.0);
        let mut engine = Engine::new(s).unwrap();
        let first = engine.step(LiveInput::default()).unwrap();
        assert_eq!(first.mode, Mode::Active);
        let frame = engine.step(LiveInput::default()).unwrap();
        assert_eq!(frame.mode, Mode::Active);
        assert!(frame.command.is_zero());
        assert_eq!(frame.fleet, engine.scenario().fleet.spawn());
    }

    #[test]
    fn identical_inputs_give_identical_frames() {
        let s = hovering(1.0);
        let w = WorldState::initial(&s);
        let (_, a) = tick(&w, &s, &LiveInput::default()).unwrap();
        let (_, b) = tick(&w, &s, &LiveInput::default()).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn take_off_from_the_pad_reaches_active() {
        let mut s = Scenario::default();
        s.sim.duration = 12.0;
        let mut engine = Engine::new(s).unwrap();
        let mut modes = Vec::new();
        while !engine.finished() {
            modes.push(engine.step(LiveInput::default()).unwrap().mode);
        }
        assert_eq!(modes[0], Mode::Deploying);
        let active_at = modes.iter().position(|m| *m == Mode::Active).expect("deploys");
        assert!(modes[active_at..].iter().all(|m| *m == Mode::Active));
        assert!((engine.world().leader.position - engine.scenario().sim.deploy_target).norm() < 0.05);
    }

    #[test]
    fn operator_estop_fires_and_later_ones_are_dropped() {
        let s = hovering(2.0);
        let mut engine = Engine::new(s).unwrap();
        for _ in 0..10 {
            engine.step(LiveInput::default()).unwrap();
        }
        let stop = LiveInput {
            grip: None,
            estop: true,
        };
        let f = engine.step(stop).unwrap();
        assert_eq!(f.mode, Mode::Emergency);
        assert!(f.operator_estop);
        assert!(f.command.is_zero());
        let again = engine.step(stop).unwrap();
        assert!(!again.operator_estop);
        assert_eq!(again.mode, Mode::Emergency);
    }

    #[test]
    fn emergency_ends_in_landed() {
        let mut s = hovering(6.0);
        s.sim.estop_at = Some(0.5);
        let mut engine = Engine::new(s).unwrap();
        let mut last = None;
        while !engine.finished() {
            last = Some(engine.step(LiveInput::default()).unwrap());
        }
        let last = last.unwrap();
        assert_eq!(last.mode, Mode::Landed);
        assert_eq!(last.leader.position.z, 0.0);
        assert!(last.fleet.iter().all(|f| f.landed && f.position.z == 0.0));
    }

    #[test]
    fn over_limit_live_twist_is_rejected() {
        let s = hovering(1.0);
        let mut engine = Engine::new(s).unwrap();
        let live = LiveInput {
            grip: Some(GripInput {
                position: Vec3::new(0.0, 0.0, 0.9),
                yaw_twist: 1.0,
                held: true,
            }),
            estop: false,
        };
        assert!(engine.step(live).is_err());
    }
}
