//! The global manager: brings the topology up phase by phase, watches
//! heartbeats and tears everything down again.

use std::collections::{BTreeMap, HashMap};
use std::io;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use adnprof_core::control::{
    expected_count, BootstrapPhase, BootstrapTimeline, ConfigError, EntitySpec, FailureRecord, LivenessEvent,
    LivenessReport, LivenessTracker, MsgType, NodeRole, Payload, PhaseOrderError, RegisterAck, ScenarioConfig,
    SeqTracker, Shutdown, TopologyPlan, UnreachableRecord, WorkflowChange,
};
use mio::Token;
use serde::{Deserialize, Serialize};

use super::entity::{run_entity, EntityEnv, EntityError, EntityOutcome};
use super::net::{loopback, Endpoint, Flow, LoopStats, NetError, NetEvent};
use crate::instrument::{instrument_sleep, Levels};
use crate::{profile_scope, region};

#[derive(Debug, thiserror::Error)]
pub enum TestbedError {
    #[error("invalid scenario: {0}")]
    Config(#[from] ConfigError),
    #[error("port {port} unavailable: {source}")]
    PortUnavailable {
        port: u16,
        #[source]
        source: io::Error,
    },
    #[error("failed to spawn {role}: {reason}")]
    EntitySpawnFailed { role: NodeRole, reason: String },
    #[error("bootstrap phase {0} did not complete before its deadline")]
    BootstrapTimeout(BootstrapPhase),
    #[error(transparent)]
    PhaseOrder(#[from] PhaseOrderError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("no entity `{0}` in this topology")]
    UnknownEntity(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone)]
pub enum SpawnMode {
    /// Each entity runs `<exe> entity` as its own process.
    Process(PathBuf),
    /// Each entity runs on a thread of the calling process.
    Thread,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub run_id: String,
    /// Where entities write `<id>.jsonl`; no dumps when `None`.
    pub dump_dir: Option<PathBuf>,
    pub levels: Levels,
    pub mode: SpawnMode,
}

impl RunOptions {
    pub fn threaded(run_id: &str) -> Self {
        Self {
            run_id: run_id.into(),
            dump_dir: None,
            levels: Levels::none(),
            mode: SpawnMode::Thread,
        }
    }
}

/// A commission or decommission reported by a workflow manager.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkflowChangeRecord {
    pub at_s: f64,
    pub manager: String,
    pub commission: bool,
    pub change: WorkflowChange,
}

enum Handle {
    Process(Child),
    Thread {
        join: JoinHandle<Result<EntityOutcome, EntityError>>,
        kill: Arc<AtomicBool>,
    },
}

struct Member {
    spec: EntitySpec,
    handle: Option<Handle>,
    token: Option<Token>,
    listen: Option<SocketAddr>,
    pid: u32,
    registered_at: Option<Duration>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberInfo {
    pub id: String,
    pub role: NodeRole,
    pub pid: u32,
    pub registered: bool,
}

/// Everything the manager's handlers mutate; kept apart from the endpoint
/// so the event loop can lend both.
struct GmState {
    started: Instant,
    members: BTreeMap<String, Member>,
    tokens: HashMap<Token, String>,
    tracker: LivenessTracker,
    tracking: bool,
    report: LivenessReport,
    killed: BTreeMap<String, f64>,
    messages: BTreeMap<String, u64>,
    changes: Vec<WorkflowChangeRecord>,
    seq: SeqTracker,
    seq_violations: u64,
}

impl GmState {
    fn now(&self) -> Duration {
        self.started.elapsed()
    }

    fn handle(&mut self, ep: &mut Endpoint, ev: NetEvent) {
        let NetEvent::Message(token, msg) = ev else {
            return;
        };
        if self.seq.observe(&msg).is_err() {
            self.seq_violations += 1;
        }
        *self.messages.entry(msg.msg_type().to_string()).or_default() += 1;
        let now = self.now();
        let kind = msg.msg_type();
        match msg.payload {
            Payload::Register(r) => {
                let _g = profile_scope!("handle_register");
                let reply = match self.members.get_mut(&r.name) {
                    Some(m) if m.spec.role == r.role => {
                        m.token = Some(token);
                        m.listen = r.listen_addr.parse().ok();
                        m.pid = r.pid;
                        m.registered_at = Some(now);
                        self.tokens.insert(token, r.name.clone());
                        ep.set_peer(token, &r.name);
                        RegisterAck {
                            accepted: true,
                            reason: None,
                        }
                    }
                    Some(_) => RegisterAck {
                        accepted: false,
                        reason: Some(format!("{} is not a {}", r.name, r.role)),
                    },
                    None => RegisterAck {
                        accepted: false,
                        reason: Some(format!("unknown entity {}", r.name)),
                    },
                };
                let _ = ep.send(token, Payload::RegisterAck(reply));
            }
            Payload::Heartbeat(_) => {
                let _g = profile_scope!("handle_heartbeat");
                self.report.heartbeats += 1;
                if let Some(name) = self.tokens.get(&token) {
                    self.tracker.heartbeat(name, now);
                }
            }
            Payload::CommissionWorkflow(change) | Payload::DecommissionWorkflow(change) => {
                let commission = kind == MsgType::CommissionWorkflow;
                self.changes.push(WorkflowChangeRecord {
                    at_s: now.as_secs_f64(),
                    manager: msg.sender,
                    commission,
                    change,
                });
            }
            _ => {}
        }
    }

    fn begin_tracking(&mut self) {
        if self.tracking {
            return;
        }
        self.tracking = true;
        let now = self.now();
        for (id, m) in &self.members {
            if m.registered_at.is_some() && !self.killed.contains_key(id) {
                self.tracker.track(id, m.spec.role, m.spec.controller.as_deref(), now);
            }
        }
    }

    fn check_liveness(&mut self) {
        let _g = profile_scope!("check_heartbeats");
        for e in self.tracker.check(self.now()) {
            match e {
                LivenessEvent::Failed {
                    node,
                    role,
                    last_seen,
                    detected_at,
                } => {
                    log::info!("{node} failed, last seen {:.3}s", last_seen.as_secs_f64());
                    self.report.failures.push(FailureRecord {
                        killed_at_s: self.killed.get(&node).copied(),
                        node,
                        role,
                        last_seen_s: last_seen.as_secs_f64(),
                        detected_at_s: detected_at.as_secs_f64(),
                    });
                }
                LivenessEvent::UnreachableViaController {
                    host,
                    controller,
                    detected_at,
                } => self.report.unreachable.push(UnreachableRecord {
                    host,
                    controller,
                    detected_at_s: detected_at.as_secs_f64(),
                }),
            }
        }
    }
}

/// Entities that have exited, by id.
#[derive(Debug, Default)]
pub struct ShutdownReport {
    /// Outcomes of threaded entities; process-mode results live in dumps.
    pub outcomes: Vec<EntityOutcome>,
    /// Entities that had to be killed because they did not exit in time.
    pub forced: Vec<String>,
}

/// A bootstrapped topology under the manager's control.
pub struct RunningTopology {
    config: ScenarioConfig,
    plan: TopologyPlan,
    opts: RunOptions,
    ep: Endpoint,
    st: GmState,
    timeline: BootstrapTimeline,
}

/// Brings up every entity of `config` in bootstrap order.
pub fn bootstrap(config: &ScenarioConfig, opts: RunOptions) -> Result<RunningTopology, TestbedError> {
    config.validate()?;
    let ep = Endpoint::bind("gm", loopback(config.manager_port)).map_err(|source| TestbedError::PortUnavailable {
        port: config.manager_port,
        source,
    })?;
    let plan = TopologyPlan::from_config(config);
    let members = plan
        .entities
        .iter()
        .filter(|e| e.role != NodeRole::GlobalManager)
        .map(|e| {
            (
                e.id.clone(),
                Member {
                    spec: e.clone(),
                    handle: None,
                    token: None,
                    listen: None,
                    pid: 0,
                    registered_at: None,
                },
            )
        })
        .collect();
    let interval = Duration::from_secs_f64(config.heartbeat_interval_s);
    let mut t = RunningTopology {
        config: config.clone(),
        plan,
        opts,
        ep,
        st: GmState {
            started: Instant::now(),
            members,
            tokens: HashMap::new(),
            tracker: LivenessTracker::new(interval, config.heartbeat_miss_limit),
            tracking: false,
            report: LivenessReport {
                interval_s: config.heartbeat_interval_s,
                miss_limit: config.heartbeat_miss_limit,
                ..LivenessReport::default()
            },
            killed: BTreeMap::new(),
            messages: BTreeMap::new(),
            changes: Vec::new(),
            seq: SeqTracker::new(),
            seq_violations: 0,
        },
        timeline: BootstrapTimeline::new(),
    };
    if let Err(e) = t.bring_up() {
        t.abort();
        return Err(e);
    }
    Ok(t)
}

impl RunningTopology {
    fn elapsed(&self) -> Duration {
        self.st.now()
    }

    fn poll_timeout(&self) -> Duration {
        Duration::from_millis(self.config.poll_timeout_ms.max(1))
    }

    fn bring_up(&mut self) -> Result<(), TestbedError> {
        self.timeline
            .record(BootstrapPhase::ManagerUp, self.elapsed(), Duration::ZERO)?;
        self.start_global_controller()?;
        self.start_name_server()?;
        self.start_local_controllers()?;
        self.start_workflow_managers()?;
        self.start_hosts()?;
        self.start_client_hosts()?;
        self.timeline
            .record(BootstrapPhase::Running, self.elapsed(), Duration::ZERO)?;
        Ok(())
    }

    fn start_global_controller(&mut self) -> Result<(), TestbedError> {
        let _g = profile_scope!("start_global_controller");
        self.start_group(
            BootstrapPhase::GlobalControllerUp,
            self.config.post_start_sleep.global_controller,
        )
    }

    fn start_name_server(&mut self) -> Result<(), TestbedError> {
        let _g = profile_scope!("start_name_server");
        self.start_group(BootstrapPhase::NameServerUp, self.config.post_start_sleep.name_server)
    }

    fn start_local_controllers(&mut self) -> Result<(), TestbedError> {
        let _g = profile_scope!("start_local_controllers");
        self.start_group(
            BootstrapPhase::LocalControllersUp,
            self.config.post_start_sleep.local_controllers,
        )
    }

    fn start_workflow_managers(&mut self) -> Result<(), TestbedError> {
        let _g = profile_scope!("start_workflow_managers");
        self.start_group(
            BootstrapPhase::WorkflowManagersUp,
            self.config.post_start_sleep.workflow_managers,
        )
    }

    fn start_hosts(&mut self) -> Result<(), TestbedError> {
        let _g = profile_scope!("start_hosts");
        self.start_group(BootstrapPhase::HostsUp, self.config.post_start_sleep.hosts)
    }

    fn start_client_hosts(&mut self) -> Result<(), TestbedError> {
        let _g = profile_scope!("start_client_hosts");
        self.start_group(BootstrapPhase::ClientsUp, self.config.post_start_sleep.client_hosts)
    }

    /// Spawns the phase's role, waits for every member to register, then
    /// sleeps the configured post-start time.
    fn start_group(&mut self, phase: BootstrapPhase, sleep_s: f64) -> Result<(), TestbedError> {
        let role = phase.role().unwrap_or(NodeRole::HostNode);
        region!("spawn_entities", self.spawn_role(role))?;
        region!("await_registration", self.await_role(role, phase))?;
        let slept = Duration::from_secs_f64(sleep_s.max(0.0));
        if !slept.is_zero() {
            instrument_sleep(slept);
        }
        self.timeline.record(phase, self.elapsed(), slept)?;
        Ok(())
    }

    fn listen_of(&self, id: &str) -> Option<SocketAddr> {
        self.st.members.get(id).and_then(|m| m.listen)
    }

    fn spawn_role(&mut self, role: NodeRole) -> Result<(), TestbedError> {
        let specs: Vec<EntitySpec> = self.plan.of_role(role).cloned().collect();
        let manager = self.ep.local_addr().unwrap_or_else(|| loopback(0));
        for spec in specs {
            let kill = Arc::new(AtomicBool::new(false));
            let env = EntityEnv {
                config: self.config.clone(),
                run_id: self.opts.run_id.clone(),
                manager,
                name_server: self.listen_of("ns"),
                global_controller: self.listen_of("gc"),
                local_controller: spec.controller.as_deref().and_then(|c| self.listen_of(c)),
                dump_path: self
                    .opts
                    .dump_dir
                    .as_ref()
                    .map(|d| d.join(format!("{}.jsonl", spec.id))),
                levels: self.opts.levels,
                kill: matches!(self.opts.mode, SpawnMode::Thread).then(|| kill.clone()),
                spec: spec.clone(),
            };
            let failed = |e: io::Error| TestbedError::EntitySpawnFailed {
                role,
                reason: format!("{}: {e}", spec.id),
            };
            let handle = match &self.opts.mode {
                SpawnMode::Process(exe) => {
                    let child = Command::new(exe)
                        .arg("entity")
                        .envs(env.to_env())
                        .stdin(Stdio::null())
                        .stdout(Stdio::null())
                        .spawn()
                        .map_err(failed)?;
                    Handle::Process(child)
                }
                SpawnMode::Thread => {
                    let join = std::thread::Builder::new()
                        .name(spec.id.clone())
                        .spawn(move || run_entity(env))
                        .map_err(failed)?;
                    Handle::Thread { join, kill }
                }
            };
            if let Some(m) = self.st.members.get_mut(&spec.id) {
                m.handle = Some(handle);
            }
        }
        Ok(())
    }

    fn await_role(&mut self, role: NodeRole, phase: BootstrapPhase) -> Result<(), TestbedError> {
        let deadline = Instant::now() + Duration::from_secs_f64(self.config.phase_deadline_s);
        let timeout = self.poll_timeout();
        loop {
            let pending: Vec<String> = self
                .st
                .members
                .values()
                .filter(|m| m.spec.role == role && m.registered_at.is_none())
                .map(|m| m.spec.id.clone())
                .collect();
            if pending.is_empty() {
                return Ok(());
            }
            for id in &pending {
                if let Some(reason) = self.exited_early(id) {
                    return Err(TestbedError::EntitySpawnFailed { role, reason });
                }
            }
            if Instant::now() >= deadline {
                return Err(TestbedError::BootstrapTimeout(phase));
            }
            for ev in self.ep.poll_once(timeout)? {
                self.st.handle(&mut self.ep, ev);
            }
        }
    }

    fn exited_early(&mut self, id: &str) -> Option<String> {
        let m = self.st.members.get_mut(id)?;
        match m.handle.as_mut()? {
            Handle::Process(child) => match child.try_wait() {
                Ok(Some(status)) => Some(format!("{id} exited with {status}")),
                _ => None,
            },
            Handle::Thread { join, .. } if join.is_finished() => {
                let Some(Handle::Thread { join, .. }) = m.handle.take() else {
                    return None;
                };
                Some(match join.join() {
                    Ok(Err(e)) => format!("{id}: {e}"),
                    _ => format!("{id} stopped before registering"),
                })
            }
            Handle::Thread { .. } => None,
        }
    }

    /// Runs the manager loop for `duration`, checking heartbeats after
    /// every poll.
    pub fn monitor(&mut self, duration: Duration) -> Result<LoopStats, TestbedError> {
        self.monitor_until(duration, |_| false)
    }

    /// Like [`RunningTopology::monitor`] but returns early once `done` holds
    /// for the liveness report.
    pub fn monitor_until(
        &mut self,
        max: Duration,
        done: impl Fn(&LivenessReport) -> bool,
    ) -> Result<LoopStats, TestbedError> {
        let _g = profile_scope!("monitor");
        self.st.begin_tracking();
        let timeout = self.poll_timeout();
        let st = &mut self.st;
        let stats = self.ep.poll_loop(Some(max), timeout, |ep, ev| {
            match ev {
                Some(ev) => st.handle(ep, ev),
                None => {
                    st.check_liveness();
                    if done(&st.report) {
                        return Flow::Stop;
                    }
                }
            }
            Flow::Continue
        })?;
        Ok(stats)
    }

    /// Kills `id` without warning. Threaded entities stop at their next
    /// poll; processes get SIGKILL.
    pub fn kill(&mut self, id: &str) -> Result<(), TestbedError> {
        let now = self.elapsed().as_secs_f64();
        let m = self
            .st
            .members
            .get_mut(id)
            .ok_or_else(|| TestbedError::UnknownEntity(id.into()))?;
        self.st.killed.insert(id.into(), now);
        match m.handle.take() {
            Some(Handle::Process(mut child)) => {
                let _ = child.kill();
                let _ = child.wait();
            }
            Some(Handle::Thread { join, kill }) => {
                kill.store(true, Ordering::Release);
                let _ = join.join();
            }
            None => {}
        }
        Ok(())
    }

    pub fn timeline(&self) -> &BootstrapTimeline {
        &self.timeline
    }

    pub fn plan(&self) -> &TopologyPlan {
        &self.plan
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn liveness_report(&self) -> &LivenessReport {
        &self.st.report
    }

    pub fn workflow_changes(&self) -> &[WorkflowChangeRecord] {
        &self.st.changes
    }

    /// Messages received by the manager, by type.
    pub fn messages(&self) -> &BTreeMap<String, u64> {
        &self.st.messages
    }

    pub fn seq_violations(&self) -> u64 {
        self.st.seq_violations
    }

    pub fn loop_stats(&self) -> LoopStats {
        self.ep.stats()
    }

    pub fn members(&self) -> Vec<MemberInfo> {
        self.st
            .members
            .values()
            .map(|m| MemberInfo {
                id: m.spec.id.clone(),
                role: m.spec.role,
                pid: m.pid,
                registered: m.registered_at.is_some(),
            })
            .collect()
    }

    /// Registered members of `role`, plus the manager itself.
    pub fn registered(&self, role: NodeRole) -> usize {
        if role == NodeRole::GlobalManager {
            return 1;
        }
        self.st
            .members
            .values()
            .filter(|m| m.spec.role == role && m.registered_at.is_some())
            .count()
    }

    /// Whether every role has exactly the members the scenario implies.
    pub fn cardinality_ok(&self) -> bool {
        NodeRole::ALL
            .iter()
            .all(|r| self.registered(*r) == expected_count(&self.config, *r))
    }

    /// Sends `Shutdown` to clients first, then to everyone else, and waits
    /// for each group to exit.
    pub fn shutdown(mut self) -> Result<ShutdownReport, TestbedError> {
        let _g = profile_scope!("shutdown");
        let mut report = ShutdownReport::default();
        let groups: [&[NodeRole]; 2] = [
            &[NodeRole::ClientHost],
            &[
                NodeRole::HostNode,
                NodeRole::WorkflowManager,
                NodeRole::LocalController,
                NodeRole::NameServer,
                NodeRole::GlobalController,
            ],
        ];
        for roles in groups {
            let ids: Vec<String> = self
                .st
                .members
                .values()
                .filter(|m| roles.contains(&m.spec.role) && m.handle.is_some())
                .map(|m| m.spec.id.clone())
                .collect();
            for id in &ids {
                let token = self.st.members[id].token;
                let sent = token.is_some_and(|t| {
                    self.ep
                        .send(
                            t,
                            Payload::Shutdown(Shutdown {
                                reason: "run complete".into(),
                            }),
                        )
                        .is_ok()
                });
                if !sent {
                    self.force(id, &mut report);
                }
            }
            self.await_exit(&ids, &mut report)?;
        }
        Ok(report)
    }

    fn force(&mut self, id: &str, report: &mut ShutdownReport) {
        if let Some(m) = self.st.members.get_mut(id) {
            match m.handle.take() {
                Some(Handle::Process(mut c)) => {
                    let _ = c.kill();
                    let _ = c.wait();
                }
                Some(Handle::Thread { join, kill }) => {
                    kill.store(true, Ordering::Release);
                    let _ = join.join();
                }
                None => return,
            }
            report.forced.push(id.into());
        }
    }

    fn await_exit(&mut self, ids: &[String], report: &mut ShutdownReport) -> Result<(), TestbedError> {
        let deadline = Instant::now() + Duration::from_secs(10);
        let timeout = self.poll_timeout().max(Duration::from_millis(5));
        loop {
            for id in ids {
                let m = self.st.members.get_mut(id).expect("member");
                let done = match m.handle.as_mut() {
                    Some(Handle::Process(c)) => matches!(c.try_wait(), Ok(Some(_))),
                    Some(Handle::Thread { join, .. }) => join.is_finished(),
                    None => false,
                };
                if done {
                    if let Some(Handle::Thread { join, .. }) = m.handle.take() {
                        match join.join() {
                            Ok(Ok(o)) => report.outcomes.push(o),
                            Ok(Err(e)) => log::warn!("{id}: {e}"),
                            Err(_) => log::warn!("{id} panicked"),
                        }
                    }
                }
            }
            if ids.iter().all(|id| self.st.members[id].handle.is_none()) {
                return Ok(());
            }
            if Instant::now() >= deadline {
                for id in ids {
                    self.force(id, report);
                }
                return Ok(());
            }
            // keep draining so exiting entities are never blocked on a full socket
            for ev in self.ep.poll_once(timeout)? {
                self.st.handle(&mut self.ep, ev);
            }
        }
    }

    fn abort(&mut self) {
        let ids: Vec<String> = self.st.members.keys().cloned().collect();
        let mut sink = ShutdownReport::default();
        for id in ids {
            self.force(&id, &mut sink);
        }
    }
}

impl Drop for RunningTopology {
    fn drop(&mut self) {
        self.abort();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use adnprof_core::control::PostStartSleep;

    fn fast(hosts: u32, clients: u32) -> ScenarioConfig {
        ScenarioConfig {
            sites_per_zone: 1,
            hosts_per_site: hosts,
            client_hosts: clients,
            run_duration_s: 0.5,
            post_start_sleep: PostStartSleep::none(),
            heartbeat_interval_s: 0.1,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn minimal_topology_reaches_running() {
        let t = bootstrap(&fast(0, 0), RunOptions::threaded("t")).unwrap();
        assert!(t.timeline().is_running());
        assert!(t.cardinality_ok());
        let ids: Vec<String> = t.members().into_iter().map(|m| m.id).collect();
        assert_eq!(ids, ["gc", "lc-z0-s0", "ns", "wm-z0-w0"]);
        let r = t.shutdown().unwrap();
        assert!(r.forced.is_empty(), "{:?}", r.forced);
        assert_eq!(r.outcomes.len(), 4);
    }

    #[test]
    fn timeline_accounts_for_post_start_sleeps() {
        let mut c = fast(1, 0);
        c.post_start_sleep = PostStartSleep {
            name_server: 0.2,
            global_controller: 0.2,
            hosts: 0.2,
            ..PostStartSleep::none()
        };
        // oracle: sum of the configured sleeps
        let configured = 0.6;
        let t = bootstrap(&c, RunOptions::threaded("t")).unwrap();
        assert!((t.timeline().total_slept().as_secs_f64() - configured).abs() < 1e-9);
        assert!(t.timeline().elapsed().as_secs_f64() >= configured);
        let stamps = t.timeline().stamps();
        assert!(stamps.windows(2).all(|w| w[0].at < w[1].at));
        t.shutdown().unwrap();
    }

    #[test]
    fn killed_host_is_detected_within_bound() {
        let mut t = bootstrap(&fast(2, 0), RunOptions::threaded("t")).unwrap();
        t.monitor(Duration::from_millis(300)).unwrap();
        t.kill("host-z0-s0-1").unwrap();
        let bound = t.liveness_report().bound_s();
        t.monitor_until(Duration::from_secs_f64(bound * 2.0), |r| {
            r.failure("host-z0-s0-1").is_some()
        })
        .unwrap();
        let f = t.liveness_report().failure("host-z0-s0-1").expect("detected");
        assert!(f.detection_latency_s().unwrap() <= bound, "{f:?}");
        assert!(t.liveness_report().failure("host-z0-s0-0").is_none());
        t.shutdown().unwrap();
    }

    #[test]
    fn dead_controller_cascades_to_its_hosts() {
        let mut t = bootstrap(&fast(2, 0), RunOptions::threaded("t")).unwrap();
        t.monitor(Duration::from_millis(200)).unwrap();
        t.kill("lc-z0-s0").unwrap();
        let bound = t.liveness_report().bound_s();
        t.monitor_until(Duration::from_secs_f64(bound * 2.0), |r| r.unreachable.len() == 2)
            .unwrap();
        let r = t.liveness_report();
        assert!(r.failure("lc-z0-s0").unwrap().detection_latency_s().unwrap() <= bound);
        let mut hosts: Vec<&str> = r.unreachable.iter().map(|u| u.host.as_str()).collect();
        hosts.sort();
        assert_eq!(hosts, ["host-z0-s0-0", "host-z0-s0-1"]);
        // the hosts keep heartbeating, so they are not failed themselves
        assert!(r.failure("host-z0-s0-0").is_none());
        t.shutdown().unwrap();
    }

    #[test]
    fn client_load_is_answered_round_robin() {
        let mut c = fast(0, 1);
        c.client_users = 10;
        c.client_rate = 40.0;
        c.run_duration_s = 0.5;
        c.workflow_load_high = 1e6;
        let mut t = bootstrap(&c, RunOptions::threaded("t")).unwrap();
        t.monitor(Duration::from_secs_f64(c.run_duration_s + 0.3)).unwrap();
        let r = t.shutdown().unwrap();
        let load = r.outcomes.iter().find_map(|o| o.load.clone()).expect("client report");
        // oracle: rate x duration
        assert_eq!(load.sent, 20);
        assert_eq!(load.answered, load.sent);
        assert_eq!(load.errors, 0);
    }
}
