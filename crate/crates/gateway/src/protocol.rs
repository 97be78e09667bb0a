//! Wire format between the gateway and an operator client. Every message is
//! a UTF-8 JSON object with a `type` field.

use dronestick_core::{Frame, GripInput, Vec3};
use serde::{Deserialize, Serialize};

/// Client to gateway.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum InboundMsg {
    Grip { pos: [f64; 3], twist: f64, held: bool },
    Estop,
    Pause,
    Resume,
}

impl InboundMsg {
    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn encode(&self) -> String {
        serde_json::to_string(self).expect("inbound messages always serialize")
    }

    /// The grip this message carries, checked against the scenario's twist bound.
    pub fn grip(&self, twist_max: f64) -> Option<dronestick_core::Result<GripInput>> {
        match *self {
            InboundMsg::Grip { pos, twist, held } => {
                Some(GripInput::new(Vec3::from(pos), twist, held, twist_max))
            }
            _ => None,
        }
    }
}

/// Gateway to client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum OutboundMsg {
    Frame {
        /// Per-connection sequence number, starting at 0.
        seq: u64,
        /// Wall-clock seconds since the server started.
        server_time: f64,
        #[serde(flatten)]
        frame: Box<Frame>,
    },
    /// Engine state changes the client did not ask for, or acknowledgements.
    Status {
        state: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reason: Option<String>,
    },
    Error { reason: String },
}

impl OutboundMsg {
    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn encode(&self) -> String {
        serde_json::to_string(self).expect("outbound messages always serialize")
    }

    pub fn error(reason: impl Into<String>) -> Self {
        OutboundMsg::Error {
            reason: reason.into(),
        }
    }

    pub fn status(state: &str, reason: Option<&str>) -> Self {
        OutboundMsg::Status {
            state: state.to_owned(),
            reason: reason.map(str::to_owned),
        }
    }
}

/// How many engine ticks go by per streamed frame. Never less than one.
pub fn decimation(dt: f64, stream_hz: f64) -> u64 {
    ((1.0 / dt) / stream_hz).round().max(1.0) as u64
}
