//! A loopback testbed of the distributed control plane. Every entity
//! speaks the same framed wire protocol over TCP and runs either as its
//! own process or as a thread of the caller.

pub mod entity;
pub mod net;
pub mod orchestrator;

pub use entity::{entity_main_from_env, run_entity, EntityEnv, EntityError, EntityOutcome, ExitKind};
pub use net::{loopback, Endpoint, Flow, LoopStats, NetError, NetEvent};
pub use orchestrator::{
    bootstrap, MemberInfo, RunOptions, RunningTopology, ShutdownReport, SpawnMode, TestbedError, WorkflowChangeRecord,
};
