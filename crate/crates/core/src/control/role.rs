use core::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    GlobalManager,
    GlobalController,
    WorkflowManager,
    LocalController,
    NameServer,
    HostNode,
    ClientHost,
}

impl NodeRole {
    pub const ALL: [NodeRole; 7] = [
        NodeRole::GlobalManager,
        NodeRole::GlobalController,
        NodeRole::WorkflowManager,
        NodeRole::LocalController,
        NodeRole::NameServer,
        NodeRole::HostNode,
        NodeRole::ClientHost,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NodeRole::GlobalManager => "global_manager",
            NodeRole::GlobalController => "global_controller",
            NodeRole::WorkflowManager => "workflow_manager",
            NodeRole::LocalController => "local_controller",
            NodeRole::NameServer => "name_server",
            NodeRole::HostNode => "host_node",
            NodeRole::ClientHost => "client_host",
        }
    }

    pub fn parse(s: &str) -> Option<NodeRole> {
        NodeRole::ALL.into_iter().find(|r| r.as_str() == s)
    }
}

impl fmt::Display for NodeRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
