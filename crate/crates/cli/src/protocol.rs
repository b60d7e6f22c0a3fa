//! Messages exchanged with live clients. Every websocket text frame holds one
//! JSON [`WireMessage`]; the frame header carries its length.

use std::fmt;

use nalgebra::{UnitQuaternion, Vector3};
use pointgo_core::control::{ControlSystem, JoystickSample, Mode};
use pointgo_core::frames::{ControlFrame2, ControlFrame3};
use pointgo_core::metrics::MetricsRecord;
use pointgo_core::sim::ScenarioKind;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::coalesce::{ClientId, InputSource};

pub const WIRE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    State,
    Input,
    Control,
    Metrics,
    Error,
}

impl Kind {
    pub const ALL: [Kind; 5] = [Self::State, Self::Input, Self::Control, Self::Metrics, Self::Error];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::State => "state",
            Self::Input => "input",
            Self::Control => "control",
            Self::Metrics => "metrics",
            Self::Error => "error",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

/// Envelope of every message in both directions.
///
/// `seq` strictly increases along each direction of a connection. Server `t`
/// is the session clock (ticks since start times dt) and never decreases;
/// clients echo the last `t` they saw. `kind` stays a plain string here so
/// that an unknown kind can be reported rather than failing to parse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireMessage {
    pub v: u32,
    pub seq: u64,
    pub t: f64,
    pub kind: String,
    #[serde(default)]
    pub payload: Value,
}

impl WireMessage {
    pub fn new<T: Serialize>(kind: Kind, seq: u64, t: f64, payload: &T) -> Self {
        Self {
            v: WIRE_VERSION,
            seq,
            t,
            kind: kind.as_str().to_owned(),
            payload: serde_json::to_value(payload).expect("wire payloads serialize"),
        }
    }

    pub fn to_text(&self) -> String {
        serde_json::to_string(self).expect("wire messages serialize")
    }

    fn payload_as<T: DeserializeOwned>(&self) -> Result<T, ProtocolError> {
        T::deserialize(&self.payload).map_err(|e| {
            ProtocolError::new(ErrorCode::InvalidPayload, format!("bad {} payload: {e}", self.kind))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum ControlCommand {
    /// Begins the next episode if none is running.
    Start,
    /// Ends the running episode and begins the next one.
    Reset,
    SelectSystem { system: ControlSystem },
    SelectScenario { scenario: ScenarioKind },
}

/// Server-to-client `control` payloads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum ControlEvent {
    /// First message on every connection.
    Welcome {
        client: ClientId,
        wire_version: u32,
        dt: f64,
        decimation: u32,
        /// Chain file contents, for client-side forward kinematics.
        chain: String,
    },
    EpisodeStarted {
        episode: u32,
        seed: u64,
        system: ControlSystem,
        scenario: String,
    },
}

/// One simulation tick as seen by clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatePayload {
    /// Session tick; equals `t / dt`.
    pub tick: u64,
    pub episode: u32,
    /// Ticks stepped in this episode.
    pub episode_tick: u64,
    /// Episode time [s].
    pub time: f64,
    pub running: bool,
    pub system: ControlSystem,
    pub scenario: String,
    pub mode: Mode,
    pub q: Vec<f64>,
    pub ee_position: Vector3<f64>,
    pub ee_orientation: UnitQuaternion<f64>,
    pub wrist: Vector3<f64>,
    pub frame2: ControlFrame2,
    pub frame3: ControlFrame3,
    pub gripper: f64,
    pub success: bool,
    pub progress: f64,
    /// Sample fed to the world this tick; absent while no episode runs.
    pub input: Option<JoystickSample>,
    /// Latest client input folded into the applied sample.
    pub input_source: Option<InputSource>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    Malformed,
    UnsupportedVersion,
    UnknownKind,
    /// A known kind that only the server sends.
    NotAccepted,
    InvalidPayload,
    StaleSeq,
    Simulation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorPayload {
    pub code: ErrorCode,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolError {
    pub code: ErrorCode,
    pub message: String,
}

impl ProtocolError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn payload(&self) -> ErrorPayload {
        ErrorPayload {
            code: self.code,
            message: self.message.clone(),
        }
    }
}

impl fmt::Display for ProtocolError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.code, self.message)
    }
}

impl std::error::Error for ProtocolError {}

#[derive(Debug, Clone, PartialEq)]
pub enum ClientMessage {
    Input(JoystickSample),
    Control(ControlCommand),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ServerMessage {
    State(Box<StatePayload>),
    Control(ControlEvent),
    Metrics(MetricsRecord),
    Error(ErrorPayload),
}

fn envelope(text: &str) -> Result<WireMessage, ProtocolError> {
    let msg: WireMessage =
        serde_json::from_str(text).map_err(|e| ProtocolError::new(ErrorCode::Malformed, e.to_string()))?;
    if msg.v != WIRE_VERSION {
        return Err(ProtocolError::new(
            ErrorCode::UnsupportedVersion,
            format!("wire version {} (expected {WIRE_VERSION})", msg.v),
        ));
    }
    Ok(msg)
}

/// Decodes a client frame. `last_seq` is the previous accepted client `seq`.
pub fn decode_client(text: &str, last_seq: Option<u64>) -> Result<(u64, ClientMessage), ProtocolError> {
    let msg = envelope(text)?;
    let kind = Kind::parse(&msg.kind)
        .ok_or_else(|| ProtocolError::new(ErrorCode::UnknownKind, format!("unknown kind '{}'", msg.kind)))?;
    if last_seq.is_some_and(|last| msg.seq <= last) {
        return Err(ProtocolError::new(
            ErrorCode::StaleSeq,
            format!("seq {} does not follow {}", msg.seq, last_seq.unwrap_or_default()),
        ));
    }
    let body = match kind {
        Kind::Input => {
            let sample: JoystickSample = msg.payload_as()?;
            if !sample.is_finite() {
                return Err(ProtocolError::new(ErrorCode::InvalidPayload, "non-finite axis"));
            }
            ClientMessage::Input(sample.clamped())
        }
        Kind::Control => ClientMessage::Control(msg.payload_as()?),
        Kind::State | Kind::Metrics | Kind::Error => {
            return Err(ProtocolError::new(
                ErrorCode::NotAccepted,
                format!("clients may not send '{}'", msg.kind),
            ))
        }
    };
    Ok((msg.seq, body))
}

/// Decodes a server frame; used by clients and tests.
pub fn decode_server(text: &str) -> Result<(WireMessage, ServerMessage), ProtocolError> {
    let msg = envelope(text)?;
    let body = match Kind::parse(&msg.kind) {
        Some(Kind::State) => ServerMessage::State(Box::new(msg.payload_as()?)),
        Some(Kind::Control) => ServerMessage::Control(msg.payload_as()?),
        Some(Kind::Metrics) => ServerMessage::Metrics(msg.payload_as()?),
        Some(Kind::Error) => ServerMessage::Error(msg.payload_as()?),
        Some(Kind::Input) | None => {
            return Err(ProtocolError::new(
                ErrorCode::UnknownKind,
                format!("unexpected server kind '{}'", msg.kind),
            ))
        }
    };
    Ok((msg, body))
}

/// Client-side encoder for an input frame.
pub fn input_message(seq: u64, t: f64, sample: &JoystickSample) -> WireMessage {
    WireMessage::new(Kind::Input, seq, t, sample)
}

pub fn control_message(seq: u64, t: f64, command: &ControlCommand) -> WireMessage {
    WireMessage::new(Kind::Control, seq, t, command)
}
