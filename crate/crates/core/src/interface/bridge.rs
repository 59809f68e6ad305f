//! Line-delimited JSON protocol between the engine and its clients.
//!
//! Clients send `command` (a voice or gesture token), `human_pose` and
//! `control` messages. The engine answers every tick with a `state` message
//! followed by whatever happened during the tick: warnings, dialogue, fused
//! commands and task progress. Transport lives elsewhere; [`Bridge`] only
//! turns lines into engine injections and ticks into messages.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::events::Speaker;
use crate::engine::{Engine, EngineError, EventKind, Injection, TickState};
use crate::fusion::vocab::{Command, TOKEN_NAMES};
use crate::fusion::{Channel, ChannelEvent};
use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlAction {
    /// End the episode now.
    Stop,
    /// Ask to become the controlling client.
    Claim,
    Ping,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Inbound {
    Command {
        channel: Channel,
        token: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        payload: Option<[f64; 3]>,
    },
    HumanPose {
        p: [f64; 3],
        #[serde(default)]
        v: [f64; 3],
    },
    Control {
        action: ControlAction,
    },
}

impl Inbound {
    /// Whether the message changes the episode; only the controlling client
    /// may send these.
    pub fn is_mutating(&self) -> bool {
        !matches!(self, Inbound::Control { action: ControlAction::Claim | ControlAction::Ping })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("malformed message: {0}")]
    Parse(String),
    #[error("unsupported message type {0:?}")]
    Unsupported(String),
    #[error("invalid message: {0}")]
    Invalid(String),
}

impl ProtocolError {
    /// Short code sent back in the `error` field.
    pub fn code(&self) -> &'static str {
        match self {
            ProtocolError::Parse(_) => "parse",
            ProtocolError::Unsupported(_) => "unsupported",
            ProtocolError::Invalid(_) => "invalid",
        }
    }
}

/// Parses and validates one inbound line. Unknown fields are ignored.
pub fn parse_inbound(line: &str) -> Result<Inbound, ProtocolError> {
    let value: serde_json::Value = serde_json::from_str(line).map_err(|e| ProtocolError::Parse(e.to_string()))?;
    let Some(kind) = value.get("type").and_then(|t| t.as_str()) else {
        return Err(ProtocolError::Parse("missing \"type\"".into()));
    };
    if !matches!(kind, "command" | "human_pose" | "control") {
        return Err(ProtocolError::Unsupported(kind.to_string()));
    }
    let msg: Inbound = serde_json::from_value(value).map_err(|e| ProtocolError::Invalid(e.to_string()))?;
    match &msg {
        Inbound::Command { channel, token, payload } => {
            ChannelEvent::new(*channel, *token, 0.0, payload.map(Vec3::from)).map_err(|e| ProtocolError::Invalid(e.to_string()))?;
            if payload.is_some_and(|p| p.iter().any(|x| !x.is_finite())) {
                return Err(ProtocolError::Invalid("payload must be finite".into()));
            }
        }
        Inbound::HumanPose { p, v } => {
            if p.iter().chain(v).any(|x| !x.is_finite()) {
                return Err(ProtocolError::Invalid("pose must be finite".into()));
            }
        }
        Inbound::Control { .. } => {}
    }
    Ok(msg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Controller,
    Observer,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TokenInfo {
    pub id: usize,
    pub name: &'static str,
    pub channel: Channel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommandInfo {
    pub id: usize,
    pub name: &'static str,
}

pub fn vocabulary() -> Vec<TokenInfo> {
    TOKEN_NAMES
        .iter()
        .enumerate()
        .map(|(id, &name)| TokenInfo { id, name, channel: Channel::of_token(id).expect("every token has a channel") })
        .collect()
}

pub fn command_table() -> Vec<CommandInfo> {
    (0..crate::fusion::vocab::N_CLASSES)
        .filter_map(Command::from_id)
        .map(|c| CommandInfo { id: c.id(), name: c.name() })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum ControlEvent {
    Hello {
        role: Role,
        #[serde(rename = "T_r")]
        t_r: f64,
        vocabulary: Vec<TokenInfo>,
        commands: Vec<CommandInfo>,
    },
    Role {
        role: Role,
    },
    Error {
        error: &'static str,
        detail: String,
    },
    Pong,
    TaskStart {
        t: f64,
        task: usize,
        label: String,
        nominal_duration: f64,
    },
    TaskDone {
        t: f64,
        task: usize,
    },
    Overflow {
        t: f64,
        token: usize,
    },
    EpisodeEnd {
        t: f64,
        completed: bool,
        timed_out: bool,
    },
}

impl ControlEvent {
    pub fn error(code: &'static str, detail: impl Into<String>) -> Self {
        ControlEvent::Error { error: code, detail: detail.into() }
    }
}

impl From<&ProtocolError> for ControlEvent {
    fn from(e: &ProtocolError) -> Self {
        ControlEvent::error(e.code(), e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Outbound {
    State(TickState),
    Warning {
        t: f64,
        code: String,
        #[serde(rename = "T_virt")]
        t_virt: f64,
        #[serde(rename = "T_rem")]
        t_rem: f64,
        text: String,
    },
    Dialogue {
        t: f64,
        speaker: Speaker,
        text: String,
    },
    Command {
        t: f64,
        class: Option<usize>,
        command: Option<String>,
        tokens: Vec<usize>,
        payload: Option<[f64; 3]>,
        accepted: bool,
        note: String,
    },
    Control(ControlEvent),
}

impl Outbound {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("outbound messages always serialize")
    }

    /// Message for a logged event; per-period samples are carried by the
    /// state message instead.
    pub fn from_event(t: f64, kind: &EventKind) -> Option<Self> {
        Some(match kind.clone() {
            EventKind::Alpha { .. } | EventKind::Separation { .. } => return None,
            EventKind::Warning { code, t_virt, t_rem, text } => Outbound::Warning { t, code, t_virt, t_rem, text },
            EventKind::Dialogue { speaker, text } => Outbound::Dialogue { t, speaker, text },
            EventKind::Command { class, command, tokens, payload, accepted, note } => {
                Outbound::Command { t, class, command, tokens, payload, accepted, note }
            }
            EventKind::TaskStart { task, label, nominal_duration } => {
                Outbound::Control(ControlEvent::TaskStart { t, task, label, nominal_duration })
            }
            EventKind::TaskDone { task } => Outbound::Control(ControlEvent::TaskDone { t, task }),
            EventKind::Overflow { token } => Outbound::Control(ControlEvent::Overflow { t, token }),
            EventKind::EpisodeEnd { completed, timed_out } => Outbound::Control(ControlEvent::EpisodeEnd { t, completed, timed_out }),
        })
    }
}

/// An accepted inbound message and the tick before which it was applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedInbound {
    pub tick: u64,
    pub msg: Inbound,
}

/// Drives an engine from protocol messages.
pub struct Bridge {
    engine: Engine,
    forwarded: usize,
    record: Vec<RecordedInbound>,
}

impl Bridge {
    /// The engine keeps running with an empty queue, waiting for commands.
    pub fn new(engine: Engine) -> Self {
        Self { engine: engine.keep_alive(true), forwarded: 0, record: Vec::new() }
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn into_engine(self) -> Engine {
        self.engine
    }

    pub fn is_finished(&self) -> bool {
        self.engine.is_finished()
    }

    /// Every engine-affecting message applied so far.
    pub fn recorded(&self) -> &[RecordedInbound] {
        &self.record
    }

    /// Applies a validated message before the next tick. Returns an
    /// immediate reply for the sender, if any.
    pub fn apply(&mut self, msg: &Inbound) -> Option<Outbound> {
        if msg.is_mutating() {
            self.record.push(RecordedInbound { tick: self.engine.tick_count(), msg: msg.clone() });
        }
        match *msg {
            Inbound::Command { channel, token, payload } => {
                self.engine.inject(Injection::Input { channel, token, payload: payload.map(Vec3::from) });
                None
            }
            Inbound::HumanPose { p, v } => {
                if self.engine.human_position().is_none() {
                    return Some(Outbound::Control(ControlEvent::error("invalid", "scenario has no human")));
                }
                self.engine.inject(Injection::HumanPose { position: p.into(), velocity: v.into() });
                None
            }
            Inbound::Control { action: ControlAction::Stop } => {
                self.engine.stop();
                None
            }
            Inbound::Control { action: ControlAction::Ping } => Some(Outbound::Control(ControlEvent::Pong)),
            Inbound::Control { action: ControlAction::Claim } => None,
        }
    }

    /// Runs one period and returns the messages it produced: the state
    /// first, then events in log order.
    pub fn tick(&mut self) -> Result<Vec<Outbound>, EngineError> {
        let mut out = Vec::new();
        if !self.engine.is_finished() {
            self.engine.step()?;
            out.push(Outbound::State(self.engine.state().clone()));
        }
        out.extend(self.drain_events());
        Ok(out)
    }

    fn drain_events(&mut self) -> Vec<Outbound> {
        let events = &self.engine.events()[self.forwarded..];
        self.forwarded = self.engine.events().len();
        events.iter().filter_map(|e| Outbound::from_event(e.t, &e.kind)).collect()
    }
}

pub fn write_record<W: Write>(mut w: W, record: &[RecordedInbound]) -> std::io::Result<()> {
    for r in record {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_record<R: BufRead>(r: R) -> std::io::Result<Vec<RecordedInbound>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line).map_err(std::io::Error::other)?);
        }
    }
    Ok(out)
}

/// Re-applies a recorded session tick by tick, without wall-clock pacing.
/// The returned engine has finished (by stop, timeout or `max_ticks`).
pub fn replay(engine: Engine, record: &[RecordedInbound], max_ticks: Option<u64>) -> Result<Engine, EngineError> {
    let mut bridge = Bridge::new(engine);
    let mut pending = record.iter().peekable();
    while !bridge.is_finished() {
        let k = bridge.engine.tick_count();
        if max_ticks.is_some_and(|m| k >= m) {
            bridge.engine.stop();
            break;
        }
        while let Some(r) = pending.next_if(|r| r.tick <= k) {
            bridge.apply(&r.msg);
        }
        if bridge.is_finished() {
            break;
        }
        bridge.engine.step()?;
    }
    Ok(bridge.engine)
}
