use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::role::NodeRole;

/// One entity the orchestrator must start.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntitySpec {
    pub id: String,
    pub role: NodeRole,
    pub zone: Option<u32>,
    pub site: Option<u32>,
    /// Local controller a host reports to.
    pub controller: Option<String>,
    /// Workflow index within its zone, for workflow managers.
    pub workflow: Option<u32>,
}

impl EntitySpec {
    fn new(id: String, role: NodeRole) -> Self {
        Self {
            id,
            role,
            zone: None,
            site: None,
            controller: None,
            workflow: None,
        }
    }
}

/// Every entity of a scenario, in start order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologyPlan {
    pub entities: Vec<EntitySpec>,
}

pub fn lc_id(zone: u32, site: u32) -> String {
    format!("lc-z{zone}-s{site}")
}

impl TopologyPlan {
    pub fn from_config(c: &ScenarioConfig) -> Self {
        let mut e = Vec::new();
        e.push(EntitySpec::new("gm".into(), NodeRole::GlobalManager));
        e.push(EntitySpec::new("gc".into(), NodeRole::GlobalController));
        e.push(EntitySpec::new("ns".into(), NodeRole::NameServer));
        for z in 0..c.zones {
            for s in 0..c.sites_per_zone {
                let mut lc = EntitySpec::new(lc_id(z, s), NodeRole::LocalController);
                lc.zone = Some(z);
                lc.site = Some(s);
                e.push(lc);
            }
        }
        for z in 0..c.zones {
            for w in 0..c.workflows_per_zone {
                let mut wm = EntitySpec::new(format!("wm-z{z}-w{w}"), NodeRole::WorkflowManager);
                wm.zone = Some(z);
                wm.workflow = Some(w);
                e.push(wm);
            }
        }
        for z in 0..c.zones {
            for s in 0..c.sites_per_zone {
                for h in 0..c.hosts_per_site {
                    let mut host = EntitySpec::new(format!("host-z{z}-s{s}-{h}"), NodeRole::HostNode);
                    host.zone = Some(z);
                    host.site = Some(s);
                    host.controller = Some(lc_id(z, s));
                    e.push(host);
                }
            }
        }
        for i in 0..c.client_hosts {
            e.push(EntitySpec::new(format!("client-{i}"), NodeRole::ClientHost));
        }
        Self { entities: e }
    }

    pub fn count(&self, role: NodeRole) -> usize {
        self.entities.iter().filter(|e| e.role == role).count()
    }

    pub fn of_role(&self, role: NodeRole) -> impl Iterator<Item = &EntitySpec> {
        self.entities.iter().filter(move |e| e.role == role)
    }

    pub fn get(&self, id: &str) -> Option<&EntitySpec> {
        self.entities.iter().find(|e| e.id == id)
    }

    /// Hosts whose controller is `lc`.
    pub fn hosts_behind<'a>(&'a self, lc: &'a str) -> impl Iterator<Item = &'a EntitySpec> + 'a {
        self.entities
            .iter()
            .filter(move |e| e.controller.as_deref() == Some(lc))
    }
}

/// Role counts a config implies.
pub fn expected_count(c: &ScenarioConfig, role: NodeRole) -> usize {
    let n = match role {
        NodeRole::GlobalManager | NodeRole::GlobalController | NodeRole::NameServer => 1,
        NodeRole::LocalController => c.zones * c.sites_per_zone,
        NodeRole::WorkflowManager => c.zones * c.workflows_per_zone,
        NodeRole::HostNode => c.zones * c.sites_per_zone * c.hosts_per_site,
        NodeRole::ClientHost => c.client_hosts,
    };
    n as usize
}
