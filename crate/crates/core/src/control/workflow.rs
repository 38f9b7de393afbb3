use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceState {
    Commissioned,
    Active,
    Decommissioned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkflowInstance {
    pub id: u32,
    pub zone: u32,
    pub state: InstanceState,
    /// Requests per second over the last adjustment period.
    pub current_load: f64,
    pub served: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum WorkflowAction {
    Commission { instance: u32 },
    Decommission { instance: u32 },
}

/// Per-instance load band in requests per second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkflowThresholds {
    pub high: f64,
    pub low: f64,
}

impl Default for WorkflowThresholds {
    fn default() -> Self {
        Self { high: 100.0, low: 10.0 }
    }
}

/// Instances of one workflow in one zone. At least one instance is always
/// live (Commissioned or Active); only Active instances are routed to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkflowManager {
    pub zone: u32,
    pub workflow: u32,
    pub thresholds: WorkflowThresholds,
    instances: Vec<WorkflowInstance>,
    next_id: u32,
    cursor: usize,
}

impl WorkflowManager {
    /// Starts with one commissioned instance.
    pub fn new(zone: u32, workflow: u32, thresholds: WorkflowThresholds) -> Self {
        let mut wm = Self {
            zone,
            workflow,
            thresholds,
            instances: Vec::new(),
            next_id: 0,
            cursor: 0,
        };
        wm.commission();
        wm
    }

    fn commission(&mut self) -> u32 {
        let id = self.next_id;
        self.next_id += 1;
        self.instances.push(WorkflowInstance {
            id,
            zone: self.zone,
            state: InstanceState::Commissioned,
            current_load: 0.0,
            served: 0,
        });
        id
    }

    pub fn instances(&self) -> &[WorkflowInstance] {
        &self.instances
    }

    pub fn live(&self) -> usize {
        self.instances
            .iter()
            .filter(|i| i.state != InstanceState::Decommissioned)
            .count()
    }

    pub fn active(&self) -> usize {
        self.instances
            .iter()
            .filter(|i| i.state == InstanceState::Active)
            .count()
    }

    /// Promotes commissioned instances; returns their ids.
    pub fn activate_pending(&mut self) -> Vec<u32> {
        self.instances
            .iter_mut()
            .filter(|i| i.state == InstanceState::Commissioned)
            .map(|i| {
                i.state = InstanceState::Active;
                i.id
            })
            .collect()
    }

    /// Scales by one instance when the per-instance load leaves the
    /// `[low, high]` band.
    pub fn adjust_workflows(&mut self, observed_load: f64) -> Vec<WorkflowAction> {
        for i in self
            .instances
            .iter_mut()
            .filter(|i| i.state != InstanceState::Decommissioned)
        {
            i.current_load = observed_load;
        }
        let live = self.live();
        if observed_load > self.thresholds.high {
            let instance = self.commission();
            return alloc::vec![WorkflowAction::Commission { instance }];
        }
        if observed_load < self.thresholds.low && live > 1 {
            // newest live instance goes first
            if let Some(i) = self
                .instances
                .iter_mut()
                .rev()
                .find(|i| i.state != InstanceState::Decommissioned)
            {
                i.state = InstanceState::Decommissioned;
                i.current_load = 0.0;
                return alloc::vec![WorkflowAction::Decommission { instance: i.id }];
            }
        }
        Vec::new()
    }

    /// Next Active instance in round-robin order.
    pub fn route(&mut self) -> Option<u32> {
        let n = self.instances.len();
        for k in 0..n {
            let idx = (self.cursor + k) % n;
            if self.instances[idx].state == InstanceState::Active {
                self.cursor = (idx + 1) % n;
                self.instances[idx].served += 1;
                return Some(self.instances[idx].id);
            }
        }
        None
    }
}
