//! Pure state of the control-plane testbed: roles and topology planning,
//! bootstrap ordering, the wire codec, workflow scaling, heartbeat liveness
//! and client-load bookkeeping. The runtime that drives these over sockets
//! and processes is in the `adnprof` crate.

pub mod bootstrap;
pub mod config;
pub mod liveness;
pub mod load;
pub mod role;
pub mod topology;
pub mod wire;
pub mod workflow;

pub use bootstrap::{BootstrapPhase, BootstrapTimeline, PhaseOrderError, PhaseStamp};
pub use config::{ConfigError, PostStartSleep, ScenarioConfig, REFERENCE_USERS};
pub use liveness::{FailureRecord, LivenessEvent, LivenessReport, LivenessTracker, UnreachableRecord};
pub use load::{quantile, request_count, LatencySummary, LoadReport};
pub use role::NodeRole;
pub use topology::{expected_count, EntitySpec, TopologyPlan};
pub use wire::{
    ClientReply, ClientRequest, FrameDecoder, Heartbeat, Message, MsgType, NameAnswer, NameLookup, Payload, Register,
    RegisterAck, SeqCounter, SeqTracker, SeqViolation, Shutdown, WireError, WorkflowChange,
};
pub use workflow::{InstanceState, WorkflowAction, WorkflowInstance, WorkflowManager, WorkflowThresholds};
