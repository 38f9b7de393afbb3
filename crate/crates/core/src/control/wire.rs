//! Message codec.
//!
//! A frame is a 4-byte big-endian body length followed by that many bytes of
//! UTF-8 JSON: `{"msg_type":..,"sender":..,"seq":..,"payload":{..}}`, keys in
//! that order. The payload schema depends on `msg_type`.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use super::role::NodeRole;

/// Largest accepted body.
pub const MAX_FRAME_LEN: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WireError {
    #[error("frame of {0} bytes exceeds the limit")]
    FrameTooLarge(usize),
    #[error("malformed message: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MsgType {
    Register,
    RegisterAck,
    Heartbeat,
    CommissionWorkflow,
    DecommissionWorkflow,
    ClientRequest,
    ClientReply,
    NameLookup,
    NameAnswer,
    Shutdown,
}

impl fmt::Display for MsgType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Register {
    pub role: NodeRole,
    pub name: String,
    /// Address the sender accepts connections on; empty when it does not listen.
    #[serde(default)]
    pub listen_addr: String,
    /// OS process id, or 0 for in-process entities.
    #[serde(default)]
    pub pid: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegisterAck {
    pub accepted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Heartbeat {
    pub uptime_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkflowChange {
    pub zone: u32,
    pub workflow: u32,
    pub instance: u32,
    /// Per-instance load that triggered the change.
    pub load_rps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClientRequest {
    pub request_id: u64,
    pub user: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClientReply {
    pub request_id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NameLookup {
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NameAnswer {
    pub name: String,
    pub addrs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Shutdown {
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Payload {
    Register(Register),
    RegisterAck(RegisterAck),
    Heartbeat(Heartbeat),
    CommissionWorkflow(WorkflowChange),
    DecommissionWorkflow(WorkflowChange),
    ClientRequest(ClientRequest),
    ClientReply(ClientReply),
    NameLookup(NameLookup),
    NameAnswer(NameAnswer),
    Shutdown(Shutdown),
}

impl Payload {
    pub fn msg_type(&self) -> MsgType {
        match self {
            Payload::Register(_) => MsgType::Register,
            Payload::RegisterAck(_) => MsgType::RegisterAck,
            Payload::Heartbeat(_) => MsgType::Heartbeat,
            Payload::CommissionWorkflow(_) => MsgType::CommissionWorkflow,
            Payload::DecommissionWorkflow(_) => MsgType::DecommissionWorkflow,
            Payload::ClientRequest(_) => MsgType::ClientRequest,
            Payload::ClientReply(_) => MsgType::ClientReply,
            Payload::NameLookup(_) => MsgType::NameLookup,
            Payload::NameAnswer(_) => MsgType::NameAnswer,
            Payload::Shutdown(_) => MsgType::Shutdown,
        }
    }

    fn from_value(t: MsgType, v: serde_json::Value) -> Result<Self, serde_json::Error> {
        use serde_json::from_value as f;
        Ok(match t {
            MsgType::Register => Payload::Register(f(v)?),
            MsgType::RegisterAck => Payload::RegisterAck(f(v)?),
            MsgType::Heartbeat => Payload::Heartbeat(f(v)?),
            MsgType::CommissionWorkflow => Payload::CommissionWorkflow(f(v)?),
            MsgType::DecommissionWorkflow => Payload::DecommissionWorkflow(f(v)?),
            MsgType::ClientRequest => Payload::ClientRequest(f(v)?),
            MsgType::ClientReply => Payload::ClientReply(f(v)?),
            MsgType::NameLookup => Payload::NameLookup(f(v)?),
            MsgType::NameAnswer => Payload::NameAnswer(f(v)?),
            MsgType::Shutdown => Payload::Shutdown(f(v)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub sender: String,
    pub seq: u64,
    pub payload: Payload,
}

#[derive(Serialize)]
struct WireOut<'a> {
    msg_type: MsgType,
    sender: &'a str,
    seq: u64,
    payload: &'a Payload,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WireIn {
    msg_type: MsgType,
    sender: String,
    seq: u64,
    payload: serde_json::Value,
}

impl Message {
    pub fn new(sender: impl Into<String>, seq: u64, payload: Payload) -> Self {
        Self {
            sender: sender.into(),
            seq,
            payload,
        }
    }

    pub fn msg_type(&self) -> MsgType {
        self.payload.msg_type()
    }

    pub fn to_json(&self) -> String {
        let out = WireOut {
            msg_type: self.msg_type(),
            sender: &self.sender,
            seq: self.seq,
            payload: &self.payload,
        };
        // plain structs with string keys always serialize
        serde_json::to_string(&out).unwrap_or_default()
    }

    pub fn from_json(body: &[u8]) -> Result<Self, WireError> {
        let raw: WireIn = serde_json::from_slice(body).map_err(|e| WireError::Malformed(e.to_string()))?;
        let payload =
            Payload::from_value(raw.msg_type, raw.payload).map_err(|e| WireError::Malformed(e.to_string()))?;
        Ok(Self {
            sender: raw.sender,
            seq: raw.seq,
            payload,
        })
    }

    /// Length prefix plus body.
    pub fn encode(&self) -> Result<Vec<u8>, WireError> {
        let body = self.to_json();
        if body.len() > MAX_FRAME_LEN {
            return Err(WireError::FrameTooLarge(body.len()));
        }
        let mut out = Vec::with_capacity(4 + body.len());
        out.extend_from_slice(&(body.len() as u32).to_be_bytes());
        out.extend_from_slice(body.as_bytes());
        Ok(out)
    }
}

/// Reassembles frames from a byte stream fed in arbitrary chunks.
#[derive(Debug, Default)]
pub struct FrameDecoder {
    buf: Vec<u8>,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    pub fn buffered(&self) -> usize {
        self.buf.len()
    }

    /// The next complete body, if any.
    pub fn next_frame(&mut self) -> Result<Option<Vec<u8>>, WireError> {
        if self.buf.len() < 4 {
            return Ok(None);
        }
        let len = u32::from_be_bytes([self.buf[0], self.buf[1], self.buf[2], self.buf[3]]) as usize;
        if len > MAX_FRAME_LEN {
            return Err(WireError::FrameTooLarge(len));
        }
        if self.buf.len() < 4 + len {
            return Ok(None);
        }
        let body = self.buf[4..4 + len].to_vec();
        self.buf.drain(..4 + len);
        Ok(Some(body))
    }

    pub fn next_message(&mut self) -> Result<Option<Message>, WireError> {
        match self.next_frame()? {
            Some(body) => Message::from_json(&body).map(Some),
            None => Ok(None),
        }
    }
}

/// Sender-side counter; one sequence shared by all message types, which
/// keeps every (sender, msg_type) stream strictly increasing too.
#[derive(Debug, Clone, Default)]
pub struct SeqCounter {
    next: u64,
}

impl SeqCounter {
    pub fn issue(&mut self) -> u64 {
        self.next += 1;
        self.next
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{sender} sent {msg_type} seq {seq} after {last}")]
pub struct SeqViolation {
    pub sender: String,
    pub msg_type: MsgType,
    pub seq: u64,
    pub last: u64,
}

/// Receiver-side check that seq strictly increases per (sender, msg_type).
#[derive(Debug, Clone, Default)]
pub struct SeqTracker {
    last: BTreeMap<(String, MsgType), u64>,
}

impl SeqTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(&mut self, m: &Message) -> Result<(), SeqViolation> {
        let key = (m.sender.clone(), m.msg_type());
        match self.last.get(&key) {
            Some(&last) if m.seq <= last => Err(SeqViolation {
                sender: m.sender.clone(),
                msg_type: m.msg_type(),
                seq: m.seq,
                last,
            }),
            _ => {
                self.last.insert(key, m.seq);
                Ok(())
            }
        }
    }
}
