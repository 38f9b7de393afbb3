//! One testbed node: a single-threaded event loop that registers with its
//! peers, heartbeats to the manager and plays its role until shut down.

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use adnprof_core::control::{
    request_count, ClientReply, ClientRequest, EntitySpec, Heartbeat, LatencySummary, LoadReport, Message, NameAnswer,
    NameLookup, NodeRole, Payload, Register, RegisterAck, ScenarioConfig, TopologyPlan, WorkflowAction, WorkflowChange,
    WorkflowManager, WorkflowThresholds,
};
use mio::Token;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::net::{loopback, Endpoint, Flow, LoopStats, NetError, NetEvent};
use crate::coarse::{read_process_times, ProcessRef};
use crate::dump::{Dump, DumpHeader, SamplingInfo, ThreadInfo};
use crate::instrument::{self, build_trace, finish_thread, start_thread, Level, Levels, Sampler};
use crate::{profile_scope, region};

pub const SAMPLE_INTERVAL: Duration = Duration::from_millis(10);

/// Everything an entity needs to start. Process-mode entities read it from
/// the environment, threaded ones receive it directly.
#[derive(Debug, Clone)]
pub struct EntityEnv {
    pub spec: EntitySpec,
    pub config: ScenarioConfig,
    pub run_id: String,
    pub manager: SocketAddr,
    pub name_server: Option<SocketAddr>,
    pub global_controller: Option<SocketAddr>,
    pub local_controller: Option<SocketAddr>,
    pub dump_path: Option<PathBuf>,
    pub levels: Levels,
    /// Set by the orchestrator to kill a threaded entity.
    pub kill: Option<Arc<AtomicBool>>,
}

#[derive(Debug, thiserror::Error)]
pub enum EntityError {
    #[error("missing or malformed environment variable {0}")]
    Env(&'static str),
    #[error("scenario: {0}")]
    Scenario(String),
    #[error("no entity `{0}` in the scenario topology")]
    UnknownEntity(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Format(#[from] crate::dump::FormatError),
}

impl From<std::io::Error> for EntityError {
    fn from(e: std::io::Error) -> Self {
        EntityError::Net(NetError::Io(e))
    }
}

const ENV_HOST_NAME: &str = "HOST_NAME";
const ENV_MANAGER: &str = "GLOBAL_MANAGER_ADDR";
const ENV_NAME_SERVER: &str = "NAME_SERVER_ADDR";
const ENV_NAME_SERVER_UPDATE_PORT: &str = "NAME_SERVER_UPDATE_PORT";
const ENV_GLOBAL_CONTROLLER: &str = "GLOBAL_CONTROLLER_ADDR";
const ENV_LOCAL_CONTROLLER: &str = "LOCAL_CONTROLLER_ADDR";
const ENV_RUN_ID: &str = "ADNPROF_RUN_ID";
const ENV_SCENARIO: &str = "ADNPROF_SCENARIO_TOML";
const ENV_DUMP: &str = "ADNPROF_DUMP";
const ENV_LEVELS: &str = "ADNPROF_LEVELS";

impl EntityEnv {
    pub fn to_env(&self) -> Vec<(&'static str, String)> {
        let mut v = vec![
            (ENV_HOST_NAME, self.spec.id.clone()),
            (ENV_MANAGER, self.manager.to_string()),
            (ENV_RUN_ID, self.run_id.clone()),
            (ENV_SCENARIO, crate::scenario::scenario_to_toml(&self.config)),
            (ENV_LEVELS, self.levels.to_string()),
        ];
        if let Some(a) = self.name_server {
            v.push((ENV_NAME_SERVER, a.to_string()));
            v.push((ENV_NAME_SERVER_UPDATE_PORT, a.port().to_string()));
        }
        if let Some(a) = self.global_controller {
            v.push((ENV_GLOBAL_CONTROLLER, a.to_string()));
        }
        if let Some(a) = self.local_controller {
            v.push((ENV_LOCAL_CONTROLLER, a.to_string()));
        }
        if let Some(p) = &self.dump_path {
            v.push((ENV_DUMP, p.display().to_string()));
        }
        v
    }

    pub fn from_env() -> Result<EntityEnv, EntityError> {
        let var = |k: &'static str| std::env::var(k).ok().filter(|s| !s.is_empty());
        let addr = |k: &'static str| -> Result<Option<SocketAddr>, EntityError> {
            var(k).map(|s| s.parse().map_err(|_| EntityError::Env(k))).transpose()
        };
        let id = var(ENV_HOST_NAME).ok_or(EntityError::Env(ENV_HOST_NAME))?;
        let config = crate::scenario::parse_scenario(&var(ENV_SCENARIO).ok_or(EntityError::Env(ENV_SCENARIO))?)
            .map_err(EntityError::Scenario)?;
        let spec = TopologyPlan::from_config(&config)
            .get(&id)
            .cloned()
            .ok_or_else(|| EntityError::UnknownEntity(id.clone()))?;
        // the update port names the name server on loopback when no address is given
        let name_server = match addr(ENV_NAME_SERVER)? {
            Some(a) => Some(a),
            None => var(ENV_NAME_SERVER_UPDATE_PORT)
                .map(|p| {
                    p.parse()
                        .map(loopback)
                        .map_err(|_| EntityError::Env(ENV_NAME_SERVER_UPDATE_PORT))
                })
                .transpose()?,
        };
        Ok(EntityEnv {
            spec,
            config,
            run_id: var(ENV_RUN_ID).unwrap_or_default(),
            manager: addr(ENV_MANAGER)?.ok_or(EntityError::Env(ENV_MANAGER))?,
            name_server,
            global_controller: addr(ENV_GLOBAL_CONTROLLER)?,
            local_controller: addr(ENV_LOCAL_CONTROLLER)?,
            dump_path: var(ENV_DUMP).map(PathBuf::from),
            levels: match var(ENV_LEVELS) {
                Some(s) => Levels::parse(&s).map_err(|_| EntityError::Env(ENV_LEVELS))?,
                None => Levels::default(),
            },
            kill: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExitKind {
    Shutdown,
    Killed,
}

#[derive(Debug, Clone)]
pub struct EntityOutcome {
    pub id: String,
    pub exit: ExitKind,
    pub loop_stats: LoopStats,
    pub messages: BTreeMap<String, u64>,
    pub load: Option<LoadReport>,
}

struct ClientState {
    wms: Vec<String>,
    targets: Vec<Option<Token>>,
    rng: ChaCha8Rng,
    total: u64,
    start: Option<Instant>,
    next: u64,
    outstanding: HashMap<u64, Instant>,
    latencies_ms: Vec<f64>,
    report: LoadReport,
    drain_until: Option<Instant>,
}

impl ClientState {
    fn new(env: &EntityEnv, plan: &TopologyPlan) -> Self {
        let c = &env.config;
        let wms: Vec<String> = plan.of_role(NodeRole::WorkflowManager).map(|w| w.id.clone()).collect();
        let seed = c.seed ^ fnv1a(env.spec.id.as_bytes());
        let per_client = c.client_users / c.client_hosts.max(1);
        let rate = c.client_rate / c.client_hosts.max(1) as f64;
        ClientState {
            targets: vec![None; wms.len()],
            wms,
            rng: ChaCha8Rng::seed_from_u64(seed),
            total: request_count(per_client, rate, c.run_duration_s),
            start: None,
            next: 0,
            outstanding: HashMap::new(),
            latencies_ms: Vec::new(),
            report: LoadReport {
                client: env.spec.id.clone(),
                users: per_client,
                rate,
                duration_s: c.run_duration_s,
                scale_factor: c.scale_factor(),
                ..LoadReport::default()
            },
            drain_until: None,
        }
    }

    /// Done once a shutdown has been received and replies are in, or the
    /// drain window has passed.
    fn finished(&self, now: Instant) -> bool {
        self.drain_until
            .is_some_and(|d| now >= d || self.outstanding.is_empty())
    }

    fn into_report(mut self) -> LoadReport {
        self.report.latency = LatencySummary::from_samples(self.latencies_ms);
        self.report
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ *b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

struct WorkflowState {
    wm: WorkflowManager,
    window: u64,
    next_adjust: Instant,
    period: Duration,
}

enum RoleState {
    Passive,
    NameServer(BTreeMap<String, String>),
    Workflow(WorkflowState),
    Client(Box<ClientState>),
}

struct Entity {
    env: EntityEnv,
    manager: Token,
    started: Instant,
    next_heartbeat: Instant,
    interval: Duration,
    role: RoleState,
    messages: BTreeMap<String, u64>,
    stop: Option<ExitKind>,
}

impl Entity {
    fn killed(&self) -> bool {
        self.env.kill.as_ref().is_some_and(|k| k.load(Ordering::Acquire))
    }

    fn send_heartbeat(&mut self, ep: &mut Endpoint) {
        let _g = profile_scope!("send_heartbeat");
        let uptime_ms = self.started.elapsed().as_millis() as u64;
        if ep
            .send(self.manager, Payload::Heartbeat(Heartbeat { uptime_ms }))
            .is_err()
        {
            log::warn!("{}: manager connection lost", self.env.spec.id);
        }
    }

    fn on_tick(&mut self, ep: &mut Endpoint) -> Flow {
        if self.killed() {
            self.stop = Some(ExitKind::Killed);
            return Flow::Stop;
        }
        let now = Instant::now();
        if now >= self.next_heartbeat {
            self.send_heartbeat(ep);
            // skip missed beats rather than bursting
            while self.next_heartbeat <= now {
                self.next_heartbeat += self.interval;
            }
        }
        match &mut self.role {
            RoleState::Workflow(w) if now >= w.next_adjust => adjust(&self.env, self.manager, ep, w),
            RoleState::Client(c) => {
                client_tick(ep, c, now);
                if c.finished(now) {
                    self.stop = Some(ExitKind::Shutdown);
                }
            }
            _ => {}
        }
        if self.stop.is_some() {
            Flow::Stop
        } else {
            Flow::Continue
        }
    }

    fn on_event(&mut self, ep: &mut Endpoint, ev: NetEvent) {
        match ev {
            NetEvent::Message(token, msg) => {
                *self.messages.entry(msg.msg_type().to_string()).or_default() += 1;
                self.handle_message(ep, token, msg);
            }
            NetEvent::Closed(token) if token == self.manager => {
                log::warn!("{}: manager closed the connection", self.env.spec.id);
            }
            _ => {}
        }
    }

    fn handle_message(&mut self, ep: &mut Endpoint, token: Token, msg: Message) {
        let _g = profile_scope!("handle_message");
        let ack = Payload::RegisterAck(RegisterAck {
            accepted: true,
            reason: None,
        });
        match (msg.payload, &mut self.role) {
            (Payload::Shutdown(_), RoleState::Client(c)) => {
                c.drain_until = Some(Instant::now() + Duration::from_secs(1));
            }
            (Payload::Shutdown(_), _) => self.stop = Some(ExitKind::Shutdown),
            (Payload::Register(r), RoleState::NameServer(names)) => {
                if !r.listen_addr.is_empty() {
                    names.insert(r.name.clone(), r.listen_addr);
                }
                ep.set_peer(token, &r.name);
                let _ = ep.send(token, ack);
            }
            (Payload::Register(r), _) => {
                ep.set_peer(token, &r.name);
                let _ = ep.send(token, ack);
            }
            (Payload::NameLookup(q), RoleState::NameServer(names)) => {
                let addrs = names.get(&q.name).cloned().into_iter().collect();
                let _ = ep.send(token, Payload::NameAnswer(NameAnswer { name: q.name, addrs }));
            }
            (Payload::ClientRequest(req), RoleState::Workflow(w)) => {
                w.window += 1;
                let instance = w.wm.route();
                let reply = ClientReply {
                    request_id: req.request_id,
                    instance,
                    error: instance.is_none().then(|| "no active workflow instance".to_string()),
                };
                let _ = ep.send(token, Payload::ClientReply(reply));
            }
            (Payload::NameAnswer(a), RoleState::Client(c)) => {
                if let (Some(i), Some(addr)) = (c.wms.iter().position(|w| *w == a.name), a.addrs.first()) {
                    match addr
                        .parse()
                        .map_err(|_| NetError::Rejected(addr.clone()))
                        .and_then(|s| ep.connect(s, &a.name))
                    {
                        Ok(t) => c.targets[i] = Some(t),
                        Err(e) => log::warn!("{}: cannot reach {}: {e}", self.env.spec.id, a.name),
                    }
                }
                if c.start.is_none() && c.targets.iter().all(Option::is_some) {
                    c.start = Some(Instant::now());
                }
            }
            (Payload::ClientReply(r), RoleState::Client(c)) => {
                if let Some(t0) = c.outstanding.remove(&r.request_id) {
                    c.latencies_ms.push(t0.elapsed().as_secs_f64() * 1e3);
                }
                match r.instance {
                    Some(i) if r.error.is_none() => {
                        c.report.answered += 1;
                        *c.report
                            .per_instance
                            .entry(format!("{}/{}", msg.sender, i))
                            .or_default() += 1;
                    }
                    _ => c.report.errors += 1,
                }
            }
            _ => {}
        }
    }
}

fn adjust(env: &EntityEnv, manager: Token, ep: &mut Endpoint, w: &mut WorkflowState) {
    let _g = profile_scope!("adjust_workflows");
    let secs = w.period.as_secs_f64().max(1e-3);
    let load = w.window as f64 / secs / w.wm.live().max(1) as f64;
    w.window = 0;
    w.next_adjust += w.period;
    let actions = w.wm.adjust_workflows(load);
    for a in actions {
        let (instance, commission) = match a {
            WorkflowAction::Commission { instance } => (instance, true),
            WorkflowAction::Decommission { instance } => (instance, false),
        };
        let change = WorkflowChange {
            zone: env.spec.zone.unwrap_or(0),
            workflow: w.wm.workflow,
            instance,
            load_rps: load,
        };
        let payload = if commission {
            Payload::CommissionWorkflow(change)
        } else {
            Payload::DecommissionWorkflow(change)
        };
        let _ = ep.send(manager, payload);
    }
    w.wm.activate_pending();
}

fn client_tick(ep: &mut Endpoint, c: &mut ClientState, now: Instant) {
    let Some(start) = c.start else {
        return;
    };
    if c.drain_until.is_some() || c.targets.is_empty() {
        return;
    }
    let rate = c.report.rate;
    while c.next < c.total {
        let due = start + Duration::from_secs_f64(c.next as f64 / rate);
        if due > now {
            break;
        }
        let _g = profile_scope!("send_client_request");
        let user = c.rng.random_range(0..c.report.users.max(1));
        let target = c.targets[(c.next as usize) % c.targets.len()];
        if let Some(t) = target {
            let req = ClientRequest {
                request_id: c.next,
                user,
            };
            if ep.send(t, Payload::ClientRequest(req)).is_ok() {
                c.outstanding.insert(c.next, now);
                c.report.sent += 1;
            } else {
                c.report.errors += 1;
            }
        }
        c.next += 1;
    }
}

fn register_msg(env: &EntityEnv, listen: Option<SocketAddr>) -> Register {
    Register {
        role: env.spec.role,
        name: env.spec.id.clone(),
        listen_addr: listen.map(|a| a.to_string()).unwrap_or_default(),
        pid: if env.kill.is_some() { 0 } else { std::process::id() },
    }
}

fn listens(role: NodeRole) -> bool {
    matches!(
        role,
        NodeRole::NameServer | NodeRole::GlobalController | NodeRole::LocalController | NodeRole::WorkflowManager
    )
}

/// Connects to upstream peers and finally to the manager, whose ack marks
/// the entity as up.
fn join_topology(env: &EntityEnv, ep: &mut Endpoint) -> Result<(Token, Option<Token>), EntityError> {
    let _g = profile_scope!("join_topology");
    let timeout = Duration::from_secs_f64(env.config.phase_deadline_s.max(1.0));
    let role = env.spec.role;
    let need = |a: Option<SocketAddr>, what: &'static str| a.ok_or(EntityError::Env(what));
    let mut name_server = None;
    if matches!(
        role,
        NodeRole::LocalController | NodeRole::WorkflowManager | NodeRole::ClientHost
    ) {
        let a = need(env.name_server, ENV_NAME_SERVER)?;
        name_server = Some(region!(
            "register_with_name_server",
            ep.register_with(a, "ns", reg_with(ep, env), timeout)
        )?);
    }
    if role == NodeRole::LocalController {
        let a = need(env.global_controller, ENV_GLOBAL_CONTROLLER)?;
        region!(
            "register_with_global_controller",
            ep.register_with(a, "gc", reg_with(ep, env), timeout)
        )?;
    }
    if role == NodeRole::HostNode {
        let a = need(env.local_controller, ENV_LOCAL_CONTROLLER)?;
        let lc = env.spec.controller.clone().unwrap_or_default();
        region!(
            "register_with_local_controller",
            ep.register_with(a, &lc, reg_with(ep, env), timeout)
        )?;
    }
    let manager = region!(
        "register_with_manager",
        ep.register_with(env.manager, "gm", reg_with(ep, env), timeout)
    )?;
    Ok((manager, name_server))
}

fn reg_with(ep: &Endpoint, env: &EntityEnv) -> Register {
    register_msg(env, ep.local_addr())
}

/// Runs one entity to completion on the calling thread and writes its dump.
pub fn run_entity(env: EntityEnv) -> Result<EntityOutcome, EntityError> {
    let id = env.spec.id.clone();
    start_thread(&id, env.levels);
    let sampler = if env.levels.contains(Level::Sample) {
        instrument::sample_target().and_then(|t| Sampler::start(t, SAMPLE_INTERVAL).ok())
    } else {
        None
    };
    let result = serve(env.clone());
    let stream = sampler.map(Sampler::stop);
    let capture = finish_thread();
    let outcome = result?;
    if outcome.exit == ExitKind::Killed {
        return Ok(outcome);
    }
    if let (Some(path), Some(capture)) = (&env.dump_path, capture) {
        let streams: Vec<_> = stream.into_iter().collect();
        let trace = build_trace(std::slice::from_ref(&capture), &streams);
        let mut header = DumpHeader::new(&env.run_id, &id);
        header.role = Some(env.spec.role);
        header.scenario_id = env.config.scenario_id.clone();
        header.scale_factor = env.config.scale_factor();
        header.levels = env.levels.names().into_iter().map(String::from).collect();
        header.calibration = crate::instrument::cached_calibration();
        // threaded entities share the process, so only process mode has its own accounting
        if env.kill.is_none() && env.levels.contains(Level::Coarse) {
            header.coarse = read_process_times(ProcessRef::Current).ok();
        }
        header.threads = vec![ThreadInfo {
            tid: capture.tid,
            name: capture.name.clone(),
        }];
        header.sampling = streams.iter().map(SamplingInfo::from).collect();
        header.loop_stats = Some(outcome.loop_stats);
        header.load = outcome.load.clone();
        header.messages = outcome.messages.clone();
        Dump { header, trace }.write_to(path)?;
    }
    Ok(outcome)
}

fn serve(env: EntityEnv) -> Result<EntityOutcome, EntityError> {
    // roles share this call site in threaded mode, so the site is keyed by symbol here
    let root = instrument::register_site(adnprof_core::CodeSite::function(
        file!(),
        line!(),
        entry_symbol(env.spec.role),
    ));
    let _g = instrument::enter_function(root);
    let mut ep = if listens(env.spec.role) {
        Endpoint::bind(&env.spec.id, loopback(0))?
    } else {
        Endpoint::new(&env.spec.id)?
    };
    let (manager, name_server) = join_topology(&env, &mut ep)?;
    let plan = TopologyPlan::from_config(&env.config);
    let role = match env.spec.role {
        NodeRole::NameServer => RoleState::NameServer(BTreeMap::new()),
        NodeRole::WorkflowManager => {
            let c = &env.config;
            let mut wm = WorkflowManager::new(
                env.spec.zone.unwrap_or(0),
                env.spec.workflow.unwrap_or(0),
                WorkflowThresholds {
                    high: c.workflow_load_high,
                    low: c.workflow_load_low,
                },
            );
            wm.activate_pending();
            let period = Duration::from_secs_f64(c.workflow_adjust_period_s.max(0.01));
            RoleState::Workflow(WorkflowState {
                wm,
                window: 0,
                next_adjust: Instant::now() + period,
                period,
            })
        }
        NodeRole::ClientHost => {
            let c = ClientState::new(&env, &plan);
            if let Some(ns) = name_server {
                for w in &c.wms {
                    ep.send(ns, Payload::NameLookup(NameLookup { name: w.clone() }))?;
                }
            }
            RoleState::Client(Box::new(c))
        }
        _ => RoleState::Passive,
    };
    let interval = Duration::from_secs_f64(env.config.heartbeat_interval_s.max(0.001));
    let timeout = Duration::from_millis(env.config.poll_timeout_ms.max(1));
    let now = Instant::now();
    let mut entity = Entity {
        env,
        manager,
        started: now,
        next_heartbeat: now,
        interval,
        role,
        messages: BTreeMap::new(),
        stop: None,
    };
    let stats = {
        let _g = profile_scope!("serve");
        ep.poll_loop(None, timeout, |ep, ev| match ev {
            Some(ev) => {
                entity.on_event(ep, ev);
                Flow::Continue
            }
            None => entity.on_tick(ep),
        })?
    };
    let load = match std::mem::replace(&mut entity.role, RoleState::Passive) {
        RoleState::Client(c) => Some(c.into_report()),
        _ => None,
    };
    Ok(EntityOutcome {
        id: entity.env.spec.id.clone(),
        exit: entity.stop.unwrap_or(ExitKind::Shutdown),
        loop_stats: stats,
        messages: entity.messages,
        load,
    })
}

/// Root function name of each role's dump.
pub fn entry_symbol(role: NodeRole) -> &'static str {
    match role {
        NodeRole::GlobalManager => "run_global_manager",
        NodeRole::GlobalController => "run_global_controller",
        NodeRole::WorkflowManager => "run_workflow_manager",
        NodeRole::LocalController => "run_local_controller",
        NodeRole::NameServer => "run_name_server",
        NodeRole::HostNode => "run_host",
        NodeRole::ClientHost => "run_client_host",
    }
}

/// Entry point of `adnprof entity`.
pub fn entity_main_from_env() -> Result<EntityOutcome, EntityError> {
    run_entity(EntityEnv::from_env()?)
}
