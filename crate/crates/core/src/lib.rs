//! Simulator and control library for a flying joystick: an operator pulls a
//! handgrip hanging on a coiled wire from a position-holding quadrotor, and
//! the quadrotor's resulting tilt, altitude and heading offsets become
//! velocity and heading commands for a heterogeneous follower fleet.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: shared value types, units and validation
//! - [`control`]: the gated command law, e-stop check and mode machine
//! - [`physics`]: leader hover dynamics and the tension-only tether
//! - [`fleet`]: kinematic quad, ground and arm followers
//! - [`feedback`]: proximity and battery alarms as vibration impulses
//! - [`scenario`], [`engine`], [`log`]: the deterministic world loop,
//!   JSON-Lines logging and bit-exact replay

pub mod control;
pub mod engine;
pub mod error;
pub mod feedback;
pub mod fleet;
pub mod log;
pub mod model;
pub mod physics;
pub mod scenario;

pub use control::{check_estop, compute_command, deviations, gate, step_mode, Deviation};
pub use engine::{tick, Engine, Frame, LiveInput, WorldState};
pub use error::{Error, Result};
pub use feedback::{AlarmCause, FeedbackConfig, Obstacle, VibroEvent};
pub use fleet::{FleetConfig, FleetMember, FleetParams, Follower, FollowerKind, Workspace};
pub use log::{replay, run, Log, LogHeader, ReplayReport};
pub use model::{
    validate_config, CommandVector, GripInput, JoystickConfig, LeaderState, Mode, SafetyConfig,
    Vec3,
};
pub use physics::{HoldSetpoint, LeaderParams, TetherConfig, TetherLoad};
pub use scenario::{BatteryProfile, GripKeyframe, Scenario, SimConfig};
