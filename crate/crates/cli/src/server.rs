//! Live session server.
//!
//! One task owns the world and steps it at a fixed rate. Connection tasks
//! only forward decoded client messages into a bounded queue and relay the
//! broadcast of serialized server messages. The sequence counter and session
//! clock are the only values shared across tasks.

use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context};
use futures_util::{SinkExt, StreamExt};
use pointgo_core::control::{ControlSystem, GainConfig};
use pointgo_core::kinematics::KinematicChain;
use pointgo_core::metrics::{MetricsConfig, MetricsRecord};
use pointgo_core::session::{SessionHeader, SessionRecord, SessionWriter};
use pointgo_core::sim::{EpisodeRunner, EpisodeSpec, TaskScenario};
use serde::Serialize;
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{broadcast, mpsc};
use tokio::time::MissedTickBehavior;
use tokio_tungstenite::tungstenite::protocol::frame::coding::CloseCode;
use tokio_tungstenite::tungstenite::protocol::CloseFrame;
use tokio_tungstenite::tungstenite::{Message, Utf8Bytes};
use tracing::{debug, info, warn};

use crate::coalesce::{ClientId, Coalescer, InputSource};
use crate::protocol::{
    decode_client, ClientMessage, ControlCommand, ControlEvent, ErrorCode, ErrorPayload, Kind, ProtocolError,
    StatePayload, WireMessage, WIRE_VERSION,
};

pub const MIN_TICK_RATE: f64 = 50.0;
pub const MAX_TICK_RATE: f64 = 1000.0;
/// Client events waiting for the next tick.
pub const EVENT_QUEUE: usize = 1024;
/// Server messages a slow client may fall behind before it skips ahead.
pub const BROADCAST_BUFFER: usize = 256;

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub chain: KinematicChain,
    pub gains: GainConfig,
    pub scenario: TaskScenario,
    pub system: ControlSystem,
    /// Episode `k` starts from the perturbation drawn with seed `seed + k`.
    pub seed: u64,
    /// Ticks per second; also fixes dt.
    pub tick_rate: f64,
    /// State is broadcast every `decimation` ticks.
    pub decimation: u32,
    pub addr: SocketAddr,
    pub record: Option<PathBuf>,
    pub metrics: MetricsConfig,
}

impl ServeConfig {
    pub fn new(scenario: TaskScenario, system: ControlSystem, addr: SocketAddr) -> Self {
        Self {
            chain: KinematicChain::gen3(),
            gains: GainConfig::default(),
            scenario,
            system,
            seed: 0,
            tick_rate: 100.0,
            decimation: 1,
            addr,
            record: None,
            metrics: MetricsConfig::default(),
        }
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.tick_rate
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if !(MIN_TICK_RATE..=MAX_TICK_RATE).contains(&self.tick_rate) {
            bail!(
                "tick rate {} Hz outside [{MIN_TICK_RATE}, {MAX_TICK_RATE}]",
                self.tick_rate
            );
        }
        if self.decimation == 0 {
            bail!("decimation must be at least 1");
        }
        self.gains.validate()?;
        self.scenario.check_reachable(&self.chain)?;
        Ok(())
    }
}

/// What a finished serve produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ServeSummary {
    pub ticks: u64,
    /// Metrics of every episode, in order, including one cut short by shutdown.
    pub episodes: Vec<MetricsRecord>,
}

#[derive(Debug)]
struct Clock {
    seq: AtomicU64,
    tick: AtomicU64,
    dt: f64,
}

impl Clock {
    fn next_seq(&self) -> u64 {
        self.seq.fetch_add(1, Ordering::SeqCst)
    }

    fn now(&self) -> f64 {
        self.tick.load(Ordering::SeqCst) as f64 * self.dt
    }
}

#[derive(Debug)]
enum LoopEvent {
    Input {
        source: InputSource,
        sample: pointgo_core::control::JoystickSample,
    },
    Control {
        client: ClientId,
        command: ControlCommand,
    },
    Disconnected(ClientId),
}

/// Serialized server message tagged with its `seq`.
type Outgoing = (u64, Utf8Bytes);

pub struct Server {
    listener: TcpListener,
    config: ServeConfig,
    recorder: Option<SessionWriter>,
}

impl Server {
    /// Validates the config, binds the port and opens the recording.
    pub async fn bind(config: ServeConfig) -> anyhow::Result<Self> {
        config.validate()?;
        let listener = TcpListener::bind(config.addr)
            .await
            .with_context(|| format!("cannot listen on {}", config.addr))?;
        let recorder = match &config.record {
            Some(path) => {
                let header = SessionHeader::new(
                    config.system,
                    &config.scenario,
                    &config.chain,
                    &config.gains,
                    config.dt(),
                    config.metrics,
                );
                Some(SessionWriter::create(path, header)?)
            }
            None => None,
        };
        Ok(Self {
            listener,
            config,
            recorder,
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.listener.local_addr().expect("bound listener has an address")
    }

    /// Serves until `shutdown` resolves, then closes the running episode.
    pub async fn run(self, shutdown: impl Future<Output = ()>) -> anyhow::Result<ServeSummary> {
        let Self {
            listener,
            config,
            recorder,
        } = self;
        info!(addr = %listener.local_addr()?, system = %config.system, scenario = %config.scenario.name, "serving");
        let clock = Arc::new(Clock {
            seq: AtomicU64::new(0),
            tick: AtomicU64::new(0),
            dt: config.dt(),
        });
        let (events_tx, mut events) = mpsc::channel(EVENT_QUEUE);
        let (out, _) = broadcast::channel(BROADCAST_BUFFER);
        let welcome = Welcome {
            dt: config.dt(),
            decimation: config.decimation,
            chain: config.chain.to_toml_string(),
        };
        let acceptor = tokio::spawn(accept_loop(listener, events_tx, out.clone(), clock.clone(), welcome));

        let period = Duration::from_secs_f64(config.dt());
        let mut sim = SimLoop::new(config, recorder, clock, out)?;
        let mut interval = tokio::time::interval(period);
        interval.set_missed_tick_behavior(MissedTickBehavior::Delay);
        tokio::pin!(shutdown);
        let result = loop {
            tokio::select! {
                _ = &mut shutdown => break Ok(()),
                _ = interval.tick() => {
                    if let Err(e) = sim.tick(&mut events) {
                        break Err(e);
                    }
                }
            }
        };
        acceptor.abort();
        let summary = sim.close()?;
        result.map(|()| summary)
    }
}

#[derive(Debug, Clone)]
struct Welcome {
    dt: f64,
    decimation: u32,
    chain: String,
}

async fn accept_loop(
    listener: TcpListener,
    events: mpsc::Sender<LoopEvent>,
    out: broadcast::Sender<Outgoing>,
    clock: Arc<Clock>,
    welcome: Welcome,
) {
    let mut next_id: ClientId = 1;
    loop {
        let (stream, peer) = match listener.accept().await {
            Ok(conn) => conn,
            Err(e) => {
                warn!("accept failed: {e}");
                continue;
            }
        };
        let id = next_id;
        next_id += 1;
        debug!(client = id, %peer, "connected");
        let conn = Connection {
            id,
            events: events.clone(),
            clock: clock.clone(),
        };
        let states = out.subscribe();
        let welcome = welcome.clone();
        tokio::spawn(async move {
            if let Err(e) = conn.serve(stream, states, welcome).await {
                debug!(client = id, "connection ended: {e}");
            }
        });
    }
}

struct Connection {
    id: ClientId,
    events: mpsc::Sender<LoopEvent>,
    clock: Arc<Clock>,
}

impl Connection {
    fn message<T: Serialize>(&self, kind: Kind, payload: &T) -> (u64, Message) {
        let t = self.clock.now();
        let seq = self.clock.next_seq();
        (seq, Message::text(WireMessage::new(kind, seq, t, payload).to_text()))
    }

    async fn serve(
        self,
        stream: TcpStream,
        mut states: broadcast::Receiver<Outgoing>,
        welcome: Welcome,
    ) -> anyhow::Result<()> {
        let ws = tokio_tungstenite::accept_async(stream).await?;
        let (mut sink, mut source) = ws.split();
        let (mut last_sent, hello) = self.message(
            Kind::Control,
            &ControlEvent::Welcome {
                client: self.id,
                wire_version: WIRE_VERSION,
                dt: welcome.dt,
                decimation: welcome.decimation,
                chain: welcome.chain,
            },
        );
        sink.send(hello).await?;
        let mut last_client_seq = None;
        let outcome = loop {
            tokio::select! {
                incoming = source.next() => {
                    let text = match incoming {
                        None => break Ok(()),
                        Some(Err(e)) => break Err(e.into()),
                        Some(Ok(Message::Text(text))) => text,
                        Some(Ok(Message::Binary(_))) => {
                            let err = ProtocolError::new(ErrorCode::Malformed, "binary frames are not accepted");
                            break self.reject(&mut sink, err).await;
                        }
                        Some(Ok(Message::Close(_))) => break Ok(()),
                        Some(Ok(_)) => continue,
                    };
                    match decode_client(&text, last_client_seq) {
                        Ok((seq, msg)) => {
                            last_client_seq = Some(seq);
                            let event = match msg {
                                ClientMessage::Input(sample) => LoopEvent::Input {
                                    source: InputSource { client: self.id, seq },
                                    sample,
                                },
                                ClientMessage::Control(command) => LoopEvent::Control { client: self.id, command },
                            };
                            if self.events.send(event).await.is_err() {
                                break Ok(());
                            }
                        }
                        Err(err) => break self.reject(&mut sink, err).await,
                    }
                }
                outgoing = states.recv() => match outgoing {
                    Ok((seq, text)) => {
                        // Messages sequenced before this connection's own are stale.
                        if seq > last_sent {
                            last_sent = seq;
                            sink.send(Message::Text(text)).await?;
                        }
                    }
                    Err(broadcast::error::RecvError::Lagged(n)) => {
                        warn!(client = self.id, skipped = n, "client lagging");
                    }
                    Err(broadcast::error::RecvError::Closed) => {
                        let _ = sink.send(Message::Close(None)).await;
                        break Ok(());
                    }
                }
            }
        };
        let _ = self.events.send(LoopEvent::Disconnected(self.id)).await;
        debug!(client = self.id, "disconnected");
        outcome
    }

    async fn reject<S>(&self, sink: &mut S, err: ProtocolError) -> anyhow::Result<()>
    where
        S: SinkExt<Message> + Unpin,
        S::Error: std::error::Error + Send + Sync + 'static,
    {
        warn!(client = self.id, "protocol violation: {err}");
        let (_, msg) = self.message(Kind::Error, &err.payload());
        sink.send(msg).await?;
        sink.send(Message::Close(Some(CloseFrame {
            code: CloseCode::Policy,
            reason: Utf8Bytes::from_static("protocol violation"),
        })))
        .await?;
        Ok(())
    }
}

struct SimLoop {
    chain: KinematicChain,
    gains: GainConfig,
    metrics: MetricsConfig,
    dt: f64,
    decimation: u32,
    base_seed: u64,
    system: ControlSystem,
    scenario: TaskScenario,
    header_system: ControlSystem,
    header_scenario: String,
    runner: EpisodeRunner,
    episode: u32,
    started: u32,
    running: bool,
    tick: u64,
    coalescer: Coalescer,
    recorder: Option<SessionWriter>,
    finished: Vec<MetricsRecord>,
    clock: Arc<Clock>,
    out: broadcast::Sender<Outgoing>,
}

impl SimLoop {
    fn new(
        config: ServeConfig,
        recorder: Option<SessionWriter>,
        clock: Arc<Clock>,
        out: broadcast::Sender<Outgoing>,
    ) -> anyhow::Result<Self> {
        let dt = config.dt();
        let spec = EpisodeSpec {
            system: config.system,
            scenario: config.scenario.clone(),
            seed: config.seed,
            dt,
        };
        let runner = EpisodeRunner::new(&config.chain, &config.gains, &spec, &config.metrics)?;
        let mut sim = Self {
            header_system: config.system,
            header_scenario: config.scenario.to_toml_string(),
            chain: config.chain,
            gains: config.gains,
            metrics: config.metrics,
            dt,
            decimation: config.decimation,
            base_seed: config.seed,
            system: config.system,
            scenario: config.scenario,
            runner,
            episode: 0,
            started: 0,
            running: false,
            tick: 0,
            coalescer: Coalescer::default(),
            recorder,
            finished: Vec::new(),
            clock,
            out,
        };
        sim.begin_episode()?;
        Ok(sim)
    }

    fn emit<T: Serialize>(&self, kind: Kind, payload: &T) {
        let seq = self.clock.next_seq();
        let text = WireMessage::new(kind, seq, self.tick as f64 * self.dt, payload).to_text();
        // No receivers is fine.
        let _ = self.out.send((seq, Utf8Bytes::from(text)));
    }

    fn record(&mut self, rec: &SessionRecord) -> anyhow::Result<()> {
        if let Some(w) = &mut self.recorder {
            w.write(rec)?;
        }
        Ok(())
    }

    fn begin_episode(&mut self) -> anyhow::Result<()> {
        let episode = self.started;
        let seed = self.base_seed + u64::from(episode);
        let spec = EpisodeSpec {
            system: self.system,
            scenario: self.scenario.clone(),
            seed,
            dt: self.dt,
        };
        self.runner = EpisodeRunner::new(&self.chain, &self.gains, &spec, &self.metrics)?;
        self.episode = episode;
        self.started += 1;
        self.running = true;
        let scenario_toml = self.scenario.to_toml_string();
        self.record(&SessionRecord::EpisodeStart {
            episode,
            seed,
            q0: self.runner.q0().to_vec(),
            system: (self.system != self.header_system).then_some(self.system),
            scenario: (scenario_toml != self.header_scenario).then_some(scenario_toml),
        })?;
        info!(episode, seed, system = %self.system, scenario = %self.scenario.name, "episode started");
        self.emit(
            Kind::Control,
            &ControlEvent::EpisodeStarted {
                episode,
                seed,
                system: self.system,
                scenario: self.scenario.name.clone(),
            },
        );
        Ok(())
    }

    fn end_episode(&mut self) -> anyhow::Result<()> {
        if !self.running {
            return Ok(());
        }
        self.running = false;
        let metrics = self.runner.metrics()?;
        self.record(&SessionRecord::EpisodeEnd {
            episode: self.episode,
            metrics: metrics.clone(),
        })?;
        info!(
            episode = self.episode,
            success = metrics.success,
            time = metrics.completion_time,
            switches = metrics.mode_switches,
            "episode ended"
        );
        self.emit(Kind::Metrics, &metrics);
        self.finished.push(metrics);
        Ok(())
    }

    fn control(&mut self, client: ClientId, command: ControlCommand) -> anyhow::Result<()> {
        debug!(client, ?command, "control");
        match command {
            ControlCommand::Start => {
                if !self.running {
                    self.begin_episode()?;
                }
                return Ok(());
            }
            ControlCommand::Reset => {}
            ControlCommand::SelectSystem { system } => self.system = system,
            ControlCommand::SelectScenario { scenario } => self.scenario = TaskScenario::builtin(scenario),
        }
        self.end_episode()?;
        self.begin_episode()
    }

    fn tick(&mut self, events: &mut mpsc::Receiver<LoopEvent>) -> anyhow::Result<()> {
        while let Ok(event) = events.try_recv() {
            match event {
                LoopEvent::Input { source, sample } => self.coalescer.push(source, &sample),
                LoopEvent::Control { client, command } => self.control(client, command)?,
                LoopEvent::Disconnected(client) => {
                    if self.coalescer.disconnect(client) {
                        info!(client, "input owner left; latched to neutral");
                    }
                }
            }
        }
        let sample = self.coalescer.next(self.runner.world().time());
        let mut applied = None;
        if self.running {
            let episode_tick = self.runner.world().steps();
            match self.runner.step(&sample) {
                Ok(_) => {
                    applied = Some(sample);
                    self.record(&SessionRecord::Input {
                        episode: self.episode,
                        tick: episode_tick,
                        sample,
                    })?;
                }
                Err(e) => {
                    warn!("episode {} aborted: {e}", self.episode);
                    self.emit(
                        Kind::Error,
                        &ErrorPayload {
                            code: ErrorCode::Simulation,
                            message: e.to_string(),
                        },
                    );
                    self.end_episode()?;
                }
            }
        }
        self.tick += 1;
        self.clock.tick.store(self.tick, Ordering::SeqCst);
        if self.tick % u64::from(self.decimation) == 0 {
            let state = self.state(applied);
            self.emit(Kind::State, &state);
        }
        if self.running && self.runner.is_done() {
            self.end_episode()?;
        }
        Ok(())
    }

    fn state(&self, input: Option<pointgo_core::control::JoystickSample>) -> StatePayload {
        let world = self.runner.world();
        let ee = world.ee_pose();
        let progress = self.runner.tracker().progress();
        StatePayload {
            tick: self.tick,
            episode: self.episode,
            episode_tick: world.steps(),
            time: world.time(),
            running: self.running,
            system: world.system(),
            scenario: self.runner.spec().scenario.name.clone(),
            mode: world.mode(),
            q: world.q().to_vec(),
            ee_position: ee.position,
            ee_orientation: nalgebra::UnitQuaternion::from_rotation_matrix(&ee.orientation),
            wrist: world.wrist_center(),
            frame2: world.frame2(),
            frame3: world.frame3(),
            gripper: world.gripper(),
            success: progress.success,
            progress: progress.progress,
            input,
            input_source: self.coalescer.source(),
        }
    }

    /// Ends the running episode and flushes the recording.
    fn close(mut self) -> anyhow::Result<ServeSummary> {
        self.end_episode()?;
        if let Some(w) = &mut self.recorder {
            w.flush()?;
        }
        Ok(ServeSummary {
            ticks: self.tick,
            episodes: self.finished,
        })
    }
}
