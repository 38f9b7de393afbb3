use alloc::string::String;

use serde::{Deserialize, Serialize};

/// Simulated-user count the scale factor is measured against.
pub const REFERENCE_USERS: u32 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("`{field}` must be at least {min}")]
    TooSmall { field: &'static str, min: u32 },
    #[error("`{field}` must be positive and finite")]
    NotPositive { field: &'static str },
    #[error("`{field}` must be non-negative and finite")]
    Negative { field: &'static str },
    #[error("workflow_load_low must be below workflow_load_high")]
    ThresholdOrder,
    #[error("scenario_id must not be empty")]
    EmptyScenarioId,
}

/// Seconds each group sleeps after its entities have registered. The host
/// group sleeps once, not once per host.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PostStartSleep {
    pub name_server: f64,
    pub global_controller: f64,
    pub local_controllers: f64,
    pub workflow_managers: f64,
    pub hosts: f64,
    pub client_hosts: f64,
}

impl Default for PostStartSleep {
    fn default() -> Self {
        Self {
            name_server: 5.0,
            global_controller: 5.0,
            local_controllers: 0.0,
            workflow_managers: 0.0,
            hosts: 5.0,
            client_hosts: 0.0,
        }
    }
}

impl PostStartSleep {
    pub fn none() -> Self {
        Self {
            name_server: 0.0,
            global_controller: 0.0,
            local_controllers: 0.0,
            workflow_managers: 0.0,
            hosts: 0.0,
            client_hosts: 0.0,
        }
    }

    pub fn total_s(&self) -> f64 {
        self.name_server
            + self.global_controller
            + self.local_controllers
            + self.workflow_managers
            + self.hosts
            + self.client_hosts
    }

    fn fields(&self) -> [(&'static str, f64); 6] {
        [
            ("post_start_sleep.name_server", self.name_server),
            ("post_start_sleep.global_controller", self.global_controller),
            ("post_start_sleep.local_controllers", self.local_controllers),
            ("post_start_sleep.workflow_managers", self.workflow_managers),
            ("post_start_sleep.hosts", self.hosts),
            ("post_start_sleep.client_hosts", self.client_hosts),
        ]
    }
}

/// Topology and timing knobs of one testbed run. Every field has a default,
/// so a config file only needs the keys it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario_id: String,
    pub zones: u32,
    pub sites_per_zone: u32,
    /// May be 0 for a controller-only topology.
    pub hosts_per_site: u32,
    pub workflows_per_zone: u32,
    /// May be 0 when no load is generated.
    pub client_hosts: u32,
    pub client_users: u32,
    /// Aggregate request rate of all users, requests per second.
    pub client_rate: f64,
    pub run_duration_s: f64,
    pub poll_timeout_ms: u64,
    pub post_start_sleep: PostStartSleep,
    pub heartbeat_interval_s: f64,
    pub heartbeat_miss_limit: u32,
    /// Per-instance requests per second.
    pub workflow_load_high: f64,
    pub workflow_load_low: f64,
    pub workflow_adjust_period_s: f64,
    /// Deadline for every bootstrap phase, sleeps excluded.
    pub phase_deadline_s: f64,
    /// 0 picks an ephemeral port.
    pub manager_port: u16,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario_id: "default".into(),
            zones: 1,
            sites_per_zone: 2,
            hosts_per_site: 7,
            workflows_per_zone: 1,
            client_hosts: 1,
            client_users: 100,
            client_rate: 50.0,
            run_duration_s: 10.0,
            poll_timeout_ms: 1,
            post_start_sleep: PostStartSleep::default(),
            heartbeat_interval_s: 1.0,
            heartbeat_miss_limit: 3,
            workflow_load_high: 100.0,
            workflow_load_low: 10.0,
            workflow_adjust_period_s: 1.0,
            phase_deadline_s: 30.0,
            manager_port: 0,
            seed: 1,
        }
    }
}

impl ScenarioConfig {
    /// Ratio of simulated users to [`REFERENCE_USERS`].
    pub fn scale_factor(&self) -> f64 {
        self.client_users as f64 / REFERENCE_USERS as f64
    }

    pub fn sites(&self) -> u32 {
        self.zones * self.sites_per_zone
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.scenario_id.trim().is_empty() {
            return Err(ConfigError::EmptyScenarioId);
        }
        for (field, v) in [
            ("zones", self.zones),
            ("sites_per_zone", self.sites_per_zone),
            ("workflows_per_zone", self.workflows_per_zone),
            ("heartbeat_miss_limit", self.heartbeat_miss_limit),
        ] {
            if v < 1 {
                return Err(ConfigError::TooSmall { field, min: 1 });
            }
        }
        if self.poll_timeout_ms == 0 {
            return Err(ConfigError::NotPositive {
                field: "poll_timeout_ms",
            });
        }
        for (field, v) in [
            ("heartbeat_interval_s", self.heartbeat_interval_s),
            ("workflow_adjust_period_s", self.workflow_adjust_period_s),
            ("phase_deadline_s", self.phase_deadline_s),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError::NotPositive { field });
            }
        }
        let mut nonneg = [
            ("client_rate", self.client_rate),
            ("run_duration_s", self.run_duration_s),
            ("workflow_load_high", self.workflow_load_high),
            ("workflow_load_low", self.workflow_load_low),
        ]
        .into_iter()
        .chain(self.post_start_sleep.fields());
        if let Some((field, _)) = nonneg.find(|(_, v)| !(v.is_finite() && *v >= 0.0)) {
            return Err(ConfigError::Negative { field });
        }
        if self.workflow_load_low >= self.workflow_load_high {
            return Err(ConfigError::ThresholdOrder);
        }
        Ok(())
    }
}
