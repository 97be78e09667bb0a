//! Kinematic followers driven by the broadcast command.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    ensure_finite, ensure_finite3, wrap_heading, wrap_to_pi, CommandVector, Mode, Vec3,
};

/// Snap tolerance for the last landing step, relative to one step's descent.
const LANDING_SNAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FollowerKind {
    /// Flying robot: moves in all three axes and turns.
    Quad,
    /// Mobile robot on the ground plane: ignores `v_z`.
    Ground,
    /// Manipulator end effector confined to a box: ignores `alpha`.
    Arm,
}

/// Axis-aligned box in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Workspace {
    pub min: Vec3,
    pub max: Vec3,
}

impl Workspace {
    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn clamp(&self, p: &Vec3) -> Vec3 {
        Vec3::from_fn(|i, _| p[i].clamp(self.min[i], self.max[i]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Follower {
    pub id: u32,
    pub kind: FollowerKind,
    pub position: Vec3,
    pub yaw: f64,
    /// Formation offset from the fleet reference (the world origin at start).
    pub offset: Vec3,
    /// Commanded displacement accumulated so far; identical across all quads.
    pub travel: Vec3,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workspace: Option<Workspace>,
    pub landed: bool,
}

impl Follower {
    pub fn new(id: u32, member: &FleetMember) -> Self {
        let mut position = member.offset;
        if member.kind == FollowerKind::Ground {
            position.z = 0.0;
        }
        Follower {
            id,
            kind: member.kind,
            position,
            yaw: 0.0,
            offset: member.offset,
            travel: Vec3::zeros(),
            workspace: member.workspace,
            landed: false,
        }
    }
}

/// One entry of the fleet list in a scenario file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetMember {
    pub kind: FollowerKind,
    pub offset: Vec3,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workspace: Option<Workspace>,
}

impl FleetMember {
    pub fn validate(&self) -> Result<()> {
        ensure_finite3("fleet.offset", &self.offset)?;
        match self.kind {
            FollowerKind::Ground if self.offset.z != 0.0 => Err(Error::invalid(
                "fleet.offset",
                "fleet.offset: ground followers must start at z = 0",
            )),
            FollowerKind::Quad if self.offset.z < 0.0 => Err(Error::invalid(
                "fleet.offset",
                "fleet.offset: quad followers must start at z >= 0",
            )),
            FollowerKind::Arm => {
                let ws = self.workspace.ok_or_else(|| {
                    Error::invalid("fleet.workspace", "fleet.workspace: arm followers need a workspace")
                })?;
                ensure_finite3("fleet.workspace", &ws.min)?;
                ensure_finite3("fleet.workspace", &ws.max)?;
                if (0..3).any(|i| ws.min[i] > ws.max[i]) {
                    return Err(Error::invalid("fleet.workspace", "fleet.workspace: min exceeds max"));
                }
                if !ws.contains(&self.offset) {
                    return Err(Error::invalid(
                        "fleet.workspace",
                        "fleet.workspace: arm offset lies outside its workspace",
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FleetParams {
    /// Descent rate of quads in safety mode.
    pub v_land: f64,
    pub yaw_rate_max: f64,
    /// Per-axis clamp on commanded velocity.
    pub v_max: f64,
}

impl Default for FleetParams {
    fn default() -> Self {
        FleetParams {
            v_land: 0.5,
            yaw_rate_max: 1.0,
            v_max: 1.5,
        }
    }
}

impl FleetParams {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("fleet.v_land", self.v_land),
            ("fleet.yaw_rate_max", self.yaw_rate_max),
            ("fleet.v_max", self.v_max),
        ] {
            ensure_finite(field, v)?;
            if v <= 0.0 {
                return Err(Error::invalid(field, format!("{field}: must be > 0")));
            }
        }
        Ok(())
    }
}

/// The `fleet` section of a scenario: rates plus the member list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FleetConfig {
    pub v_land: f64,
    pub yaw_rate_max: f64,
    pub v_max: f64,
    pub members: Vec<FleetMember>,
}

impl Default for FleetConfig {
    fn default() -> Self {
        let p = FleetParams::default();
        FleetConfig {
            v_land: p.v_land,
            yaw_rate_max: p.yaw_rate_max,
            v_max: p.v_max,
            members: Vec::new(),
        }
    }
}

impl FleetConfig {
    pub fn params(&self) -> FleetParams {
        FleetParams {
            v_land: self.v_land,
            yaw_rate_max: self.yaw_rate_max,
            v_max: self.v_max,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params().validate()?;
        self.members.iter().try_for_each(FleetMember::validate)
    }

    pub fn spawn(&self) -> Vec<Follower> {
        self.members
            .iter()
            .zip(0u32..)
            .map(|(m, id)| Follower::new(id, m))
            .collect()
    }
}

fn slew(from: f64, to: f64, max_step: f64) -> f64 {
    let err = wrap_to_pi(to - from);
    wrap_heading(from + err.clamp(-max_step, max_step))
}

pub fn apply_command(f: &Follower, cmd: &CommandVector, params: &FleetParams, dt: f64) -> Follower {
    if f.landed {
        return *f;
    }
    let v = cmd.velocity().map(|c| c.clamp(-params.v_max, params.v_max));
    let step = v * dt;
    let mut next = *f;
    match f.kind {
        FollowerKind::Quad => {
            next.travel = f.travel + step;
            next.position = f.offset + next.travel;
            next.position.z = next.position.z.max(0.0);
            next.yaw = slew(f.yaw, cmd.alpha, params.yaw_rate_max * dt);
        }
        FollowerKind::Ground => {
            next.travel = f.travel + Vec3::new(step.x, step.y, 0.0);
            next.position = f.offset + next.travel;
            next.position.z = 0.0;
            next.yaw = slew(f.yaw, cmd.alpha, params.yaw_rate_max * dt);
        }
        FollowerKind::Arm => {
            let target = f.position + step;
            next.position = match &f.workspace {
                Some(ws) => ws.clamp(&target),
                None => target,
            };
            next.travel = f.travel + (next.position - f.position);
        }
    }
    next
}

/// One tick of safety mode: quads descend at `v_land`, everything else stops.
pub fn safe_land(f: &Follower, params: &FleetParams, dt: f64) -> Follower {
    if f.landed {
        return *f;
    }
    let mut next = *f;
    match f.kind {
        FollowerKind::Quad => {
            let descent = params.v_land * dt;
            if f.position.z <= descent * (1.0 + LANDING_SNAP) {
                next.position.z = 0.0;
                next.landed = true;
            } else {
                next.position.z = f.position.z - descent;
            }
        }
        FollowerKind::Ground | FollowerKind::Arm => next.landed = true,
    }
    next
}

pub fn fleet_step(
    fleet: &[Follower],
    cmd: &CommandVector,
    mode: Mode,
    params: &FleetParams,
    dt: f64,
) -> Vec<Follower> {
    match mode {
        Mode::Active => fleet.iter().map(|f| apply_command(f, cmd, params, dt)).collect(),
        Mode::Emergency => fleet.iter().map(|f| safe_land(f, params, dt)).collect(),
        Mode::Docked | Mode::Deploying | Mode::Landed => fleet.to_vec(),
    }
}
