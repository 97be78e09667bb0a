//! Real-time serving of one scenario to a single operator over WebSocket.
//!
//! The engine runs on its own thread. It talks to the network side only
//! through two queues: operator inputs flow in over an unbounded channel that
//! the engine drains at the start of every tick, and frames flow out over a
//! bounded broadcast channel that drops its oldest entries when a client
//! falls behind.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use dronestick_core::{Engine, Frame, GripInput, LiveInput, Log, Mode, Scenario};
use futures_util::{SinkExt, StreamExt};
use serde::Serialize;
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{broadcast, mpsc, oneshot};
use tokio::task::JoinHandle;
use tokio_tungstenite::tungstenite::Message;

use crate::protocol::{decimation, InboundMsg, OutboundMsg};

/// Frames buffered per client before the oldest are dropped.
pub const OUTBOUND_CAPACITY: usize = 256;

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub stream_hz: f64,
    /// Where the session log is written when the scenario ends.
    pub log_dir: PathBuf,
    /// A host stall longer than this pauses the scenario instead of catching up.
    pub stall_limit: Duration,
}

impl Default for ServeOptions {
    fn default() -> Self {
        ServeOptions {
            stream_hz: 50.0,
            log_dir: PathBuf::from("logs"),
            stall_limit: Duration::from_millis(250),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SessionSummary {
    pub frames: usize,
    pub log: PathBuf,
    pub scenario_hash: String,
    pub final_mode: Mode,
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("invalid stream rate {0}: must be a positive number")]
    StreamRate(f64),
    #[error(transparent)]
    Engine(#[from] dronestick_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("engine thread stopped unexpectedly")]
    EngineLost,
}

/// Operator input as the engine sees it.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Control {
    Grip(GripInput),
    Estop,
    Pause,
    Resume,
    Disconnected,
}

#[derive(Debug, Clone)]
enum Event {
    Frame { frame: Arc<Frame>, server_time: f64 },
    Message(OutboundMsg),
}

pub struct Gateway {
    listener: TcpListener,
    scenario: Scenario,
    options: ServeOptions,
}

impl Gateway {
    /// Binds the listening socket. Port 0 picks a free port.
    pub async fn bind(addr: &str, scenario: Scenario, options: ServeOptions) -> Result<Self, ServeError> {
        if !(options.stream_hz.is_finite() && options.stream_hz > 0.0) {
            return Err(ServeError::StreamRate(options.stream_hz));
        }
        scenario.validate()?;
        let listener = TcpListener::bind(addr).await?;
        Ok(Gateway {
            listener,
            scenario,
            options,
        })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Runs the scenario to its end in real time, serving whoever connects.
    pub async fn run(self) -> Result<SessionSummary, ServeError> {
        let Gateway {
            listener,
            scenario,
            options,
        } = self;
        let started = Instant::now();
        let twist_max = scenario.tether.twist_max;
        let (to_engine, inbound) = mpsc::unbounded_channel();
        let (outbound, _) = broadcast::channel::<Event>(OUTBOUND_CAPACITY);
        let (done_tx, mut done) = oneshot::channel();

        let engine = Engine::new(scenario.clone())?;
        let engine_out = outbound.clone();
        let engine_opts = options.clone();
        thread::Builder::new()
            .name("dronestick-engine".into())
            .spawn(move || {
                let result = engine_loop(engine, inbound, &engine_out, &engine_opts, started);
                let _ = done_tx.send(result);
            })?;

        let mut active: Option<JoinHandle<()>> = None;
        let result = loop {
            tokio::select! {
                result = &mut done => break result.map_err(|_| ServeError::EngineLost),
                accepted = listener.accept() => {
                    let (stream, peer) = match accepted {
                        Ok(a) => a,
                        Err(e) => {
                            log::warn!("accept failed: {e}");
                            continue;
                        }
                    };
                    if active.as_ref().is_some_and(|h| !h.is_finished()) {
                        log::info!("rejecting {peer}: an operator is already connected");
                        tokio::spawn(reject(stream));
                        continue;
                    }
                    log::info!("operator connected from {peer}");
                    let frames = outbound.subscribe();
                    active = Some(tokio::spawn(connection(
                        stream,
                        to_engine.clone(),
                        frames,
                        twist_max,
                    )));
                }
            }
        };
        // let the client see the closing status before tearing down
        drop(outbound);
        if let Some(handle) = active {
            let _ = tokio::time::timeout(Duration::from_secs(1), handle).await;
        }
        let log = result??;

        let path = write_session_log(&log, &options.log_dir)?;
        Ok(SessionSummary {
            frames: log.frames.len(),
            log: path,
            scenario_hash: log.header.scenario_hash.clone(),
            final_mode: log.frames.last().map_or(Mode::Docked, |f| f.mode),
        })
    }
}

fn write_session_log(log: &Log, dir: &Path) -> Result<PathBuf, ServeError> {
    std::fs::create_dir_all(dir)?;
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis());
    let path = dir.join(format!("session-{}-{stamp}.jsonl", log.header.scenario_hash));
    log.write(&path)?;
    Ok(path)
}

fn engine_loop(
    mut engine: Engine,
    mut inbound: mpsc::UnboundedReceiver<Control>,
    outbound: &broadcast::Sender<Event>,
    options: &ServeOptions,
    started: Instant,
) -> Result<Log, ServeError> {
    let dt = engine.scenario().sim.dt;
    let tick_len = Duration::from_secs_f64(dt);
    let every = decimation(dt, options.stream_hz);
    let mut log = Log::new(engine.scenario());
    let mut live_grip: Option<GripInput> = None;
    let mut estop = false;
    let mut paused = false;
    let mut deadline = Instant::now();
    // a send only fails when nobody is listening, which is fine for a view
    let notify = |msg: OutboundMsg| {
        let _ = outbound.send(Event::Message(msg));
    };

    while !engine.finished() {
        let mut apply = |c: Control, paused: &mut bool| match c {
            Control::Grip(g) => live_grip = Some(g),
            Control::Estop => estop = true,
            Control::Pause => *paused = true,
            Control::Resume => *paused = false,
            Control::Disconnected => {
                live_grip = Some(GripInput::released(engine.world().grip.position))
            }
        };

        if paused {
            match inbound.blocking_recv() {
                Some(c) => apply(c, &mut paused),
                None => break,
            }
            if !paused {
                deadline = Instant::now();
                notify(OutboundMsg::status("running", None));
            }
            continue;
        }

        let now = Instant::now();
        if now < deadline {
            thread::sleep(deadline - now);
            continue;
        }
        if now - deadline > options.stall_limit {
            paused = true;
            log::warn!("host stalled for {:?}; pausing", now - deadline);
            notify(OutboundMsg::status("paused", Some("stall")));
            continue;
        }

        while let Ok(c) = inbound.try_recv() {
            let was_paused = paused;
            apply(c, &mut paused);
            if paused && !was_paused {
                notify(OutboundMsg::status("paused", Some("operator")));
            }
        }
        if paused {
            continue;
        }

        let frame = match engine.step(LiveInput {
            grip: live_grip,
            estop,
        }) {
            Ok(f) => f,
            Err(e) => {
                notify(OutboundMsg::error(format!("engine stopped: {e}")));
                return Err(e.into());
            }
        };
        estop = false;
        if frame.tick % every == 0 {
            let _ = outbound.send(Event::Frame {
                frame: Arc::new(frame.clone()),
                server_time: started.elapsed().as_secs_f64(),
            });
        }
        log.frames.push(frame);
        deadline += tick_len;
    }
    notify(OutboundMsg::status("finished", None));
    Ok(log)
}

type Socket = tokio_tungstenite::WebSocketStream<TcpStream>;

async fn send(ws: &mut futures_util::stream::SplitSink<Socket, Message>, msg: &OutboundMsg) -> bool {
    ws.send(Message::text(msg.encode())).await.is_ok()
}

async fn reject(stream: TcpStream) {
    let Ok(ws) = tokio_tungstenite::accept_async(stream).await else {
        return;
    };
    let (mut sink, _) = ws.split();
    send(&mut sink, &OutboundMsg::error("occupied")).await;
    let _ = sink.close().await;
}

async fn connection(
    stream: TcpStream,
    to_engine: mpsc::UnboundedSender<Control>,
    mut frames: broadcast::Receiver<Event>,
    twist_max: f64,
) {
    let ws = match tokio_tungstenite::accept_async(stream).await {
        Ok(ws) => ws,
        Err(e) => {
            log::warn!("handshake failed: {e}");
            return;
        }
    };
    let (mut sink, mut source) = ws.split();
    let mut seq = 0u64;

    loop {
        tokio::select! {
            incoming = source.next() => {
                let text = match incoming {
                    Some(Ok(Message::Text(t))) => t,
                    Some(Ok(Message::Binary(_))) => {
                        if !send(&mut sink, &OutboundMsg::error("binary messages are not supported")).await {
                            break;
                        }
                        continue;
                    }
                    Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                    Some(Ok(_)) => continue,
                };
                let control = match InboundMsg::parse(text.as_str()) {
                    Ok(InboundMsg::Estop) => Ok(Control::Estop),
                    Ok(InboundMsg::Pause) => Ok(Control::Pause),
                    Ok(InboundMsg::Resume) => Ok(Control::Resume),
                    Ok(grip) => match grip.grip(twist_max) {
                        Some(Ok(g)) => Ok(Control::Grip(g)),
                        Some(Err(e)) => Err(e.to_string()),
                        None => unreachable!("only grip messages remain"),
                    },
                    Err(e) => Err(format!("malformed message: {e}")),
                };
                match control {
                    Ok(c) => {
                        if to_engine.send(c).is_err() {
                            break;
                        }
                    }
                    Err(reason) => {
                        if !send(&mut sink, &OutboundMsg::error(reason)).await {
                            break;
                        }
                    }
                }
            }
            event = frames.recv() => {
                let msg = match event {
                    Ok(Event::Frame { frame, server_time }) => {
                        let msg = OutboundMsg::Frame {
                            seq,
                            server_time,
                            frame: Box::new((*frame).clone()),
                        };
                        seq += 1;
                        msg
                    }
                    Ok(Event::Message(m)) => m,
                    Err(broadcast::error::RecvError::Lagged(n)) => {
                        log::debug!("client lagging, dropped {n} frames");
                        continue;
                    }
                    Err(broadcast::error::RecvError::Closed) => {
                        let _ = sink.close().await;
                        break;
                    }
                };
                if !send(&mut sink, &msg).await {
                    break;
                }
            }
        }
    }
    let _ = to_engine.send(Control::Disconnected);
    log::info!("operator disconnected");
}
