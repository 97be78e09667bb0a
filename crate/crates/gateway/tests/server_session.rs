use std::time::Duration;

use dronestick_core::{replay, Log, Mode, ReplayReport, Scenario};
use dronestick_gateway::{Gateway, InboundMsg, OutboundMsg, ServeOptions, SessionSummary};
use futures_util::{SinkExt, StreamExt};
use tokio::net::TcpStream;
use tokio::task::JoinHandle;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

const PULL_EAST: &str = include_str!("../../../scenarios/pull_east.json");

type Client = WebSocketStream<MaybeTlsStream<TcpStream>>;

struct Session {
    url: String,
    handle: JoinHandle<SessionSummary>,
    scenario: Scenario,
    _logs: tempfile::TempDir,
}

/// Pull-east with no scripted pull, shortened to `duration` seconds.
async fn start(duration: f64, hz: f64) -> Session {
    let mut scenario = Scenario::from_json(PULL_EAST).unwrap();
    scenario.sim.duration = duration;
    scenario.sim.grip_timeline.clear();
    let logs = tempfile::tempdir().unwrap();
    let options = ServeOptions {
        stream_hz: hz,
        log_dir: logs.path().to_path_buf(),
        ..ServeOptions::default()
    };
    let gateway = Gateway::bind("127.0.0.1:0", scenario.clone(), options).await.unwrap();
    let url = format!("ws://{}", gateway.local_addr().unwrap());
    let handle = tokio::spawn(async move { gateway.run().await.unwrap() });
    Session {
        url,
        handle,
        scenario,
        _logs: logs,
    }
}

async fn connect(url: &str) -> Client {
    connect_async(url).await.unwrap().0
}

async fn recv(ws: &mut Client) -> Option<OutboundMsg> {
    loop {
        match tokio::time::timeout(Duration::from_secs(5), ws.next()).await.expect("message in time") {
            Some(Ok(Message::Text(t))) => return Some(OutboundMsg::parse(t.as_str()).unwrap()),
            Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return None,
            Some(Ok(_)) => {}
        }
    }
}

async fn next_frame(ws: &mut Client) -> (u64, dronestick_core::Frame) {
    loop {
        if let OutboundMsg::Frame { seq, frame, .. } = recv(ws).await.expect("stream still open") {
            return (seq, *frame);
        }
    }
}

async fn send(ws: &mut Client, m: &InboundMsg) {
    ws.send(Message::text(m.encode())).await.unwrap();
}

fn read_log(summary: &SessionSummary) -> (String, Log) {
    let text = std::fs::read_to_string(&summary.log).unwrap();
    let log = Log::from_jsonl(&text).unwrap();
    (text, log)
}

#[tokio::test(flavor = "multi_thread")]
async fn estop_message_stops_the_fleet_on_the_next_tick() {
    let s = start(1.5, 100.0).await;
    let mut ws = connect(&s.url).await;
    let (_, before) = next_frame(&mut ws).await;
    assert_eq!(before.mode, Mode::Active);
    send(&mut ws, &InboundMsg::Estop).await;
    let mut emergency = None;
    for _ in 0..20 {
        let (_, f) = next_frame(&mut ws).await;
        if f.mode == Mode::Emergency {
            emergency = Some(f);
            break;
        }
    }
    let f = emergency.expect("Emergency streamed shortly after the e-stop");
    assert!(f.command.is_zero());
    // repeated stops change nothing
    send(&mut ws, &InboundMsg::Estop).await;
    send(&mut ws, &InboundMsg::Estop).await;
    drop(ws);

    let summary = s.handle.await.unwrap();
    let (text, log) = read_log(&summary);
    let stop = log.frames.iter().position(|f| f.operator_estop).unwrap();
    assert_eq!(log.frames[stop].mode, Mode::Emergency);
    assert!(log.frames[..stop].iter().all(|f| f.mode == Mode::Active));
    assert!(log.frames[stop..].iter().all(|f| f.mode.is_safety() && f.command.is_zero()));
    assert!(summary.final_mode.is_safety());
    let report = replay(&text, &s.scenario).unwrap();
    assert!(matches!(report, ReplayReport::ExactMatch { complete: true, .. }), "{report}");
}

#[tokio::test(flavor = "multi_thread")]
async fn second_operator_is_turned_away() {
    let s = start(1.0, 50.0).await;
    let mut first = connect(&s.url).await;
    next_frame(&mut first).await;
    let mut second = connect(&s.url).await;
    match recv(&mut second).await {
        Some(OutboundMsg::Error { reason }) => assert_eq!(reason, "occupied"),
        other => panic!("second client got {other:?}"),
    }
    assert!(recv(&mut second).await.is_none());
    // the first operator is unaffected
    next_frame(&mut first).await;
    s.handle.await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn malformed_input_gets_an_error_and_the_connection_stays() {
    let s = start(1.0, 50.0).await;
    let mut ws = connect(&s.url).await;
    ws.send(Message::text("{not json")).await.unwrap();
    send(
        &mut ws,
        &InboundMsg::Grip {
            pos: [0.0, 0.0, 0.95],
            twist: 1.0,
            held: true,
        },
    )
    .await;
    let mut errors = Vec::new();
    while errors.len() < 2 {
        if let Some(OutboundMsg::Error { reason }) = recv(&mut ws).await {
            errors.push(reason);
        }
    }
    assert!(errors[0].starts_with("malformed message"), "{}", errors[0]);
    assert!(errors[1].contains("twist"), "{}", errors[1]);
    next_frame(&mut ws).await;
    s.handle.await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn stream_is_decimated_and_sequenced() {
    let s = start(1.0, 50.0).await;
    let mut ws = connect(&s.url).await;
    let mut prev = next_frame(&mut ws).await;
    let mut seen = 1;
    loop {
        match recv(&mut ws).await {
            Some(OutboundMsg::Frame { seq, frame, .. }) => {
                assert_eq!(seq, prev.0 + 1);
                assert_eq!(frame.tick, prev.1.tick + 2);
                prev = (seq, *frame);
                seen += 1;
            }
            Some(OutboundMsg::Status { state, .. }) if state == "finished" => break,
            Some(other) => panic!("unexpected {other:?}"),
            None => break,
        }
    }
    assert!(seen >= 40, "only {seen} frames");
    s.handle.await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn pause_holds_the_clock_and_keeps_sequence_order() {
    let s = start(1.0, 100.0).await;
    let mut ws = connect(&s.url).await;
    let (mut last_seq, mut last) = next_frame(&mut ws).await;
    send(&mut ws, &InboundMsg::Pause).await;
    loop {
        match recv(&mut ws).await.unwrap() {
            OutboundMsg::Frame { seq, frame, .. } => {
                assert!(seq > last_seq);
                (last_seq, last) = (seq, *frame);
            }
            OutboundMsg::Status { state, reason } => {
                assert_eq!((state.as_str(), reason.as_deref()), ("paused", Some("operator")));
                break;
            }
            other => panic!("unexpected {other:?}"),
        }
    }
    // nothing is produced while paused, well past the stall limit
    assert!(tokio::time::timeout(Duration::from_millis(400), ws.next()).await.is_err());
    send(&mut ws, &InboundMsg::Resume).await;
    let mut resumed = false;
    loop {
        match recv(&mut ws).await {
            Some(OutboundMsg::Frame { seq, frame, .. }) => {
                assert!(resumed, "frame before the running status");
                assert_eq!(seq, last_seq + 1);
                assert_eq!(frame.tick, last.tick + 1);
                (last_seq, last) = (seq, *frame);
            }
            Some(OutboundMsg::Status { state, .. }) if state == "running" => resumed = true,
            Some(OutboundMsg::Status { state, .. }) if state == "finished" => break,
            Some(other) => panic!("unexpected {other:?}"),
            None => break,
        }
    }
    let summary = s.handle.await.unwrap();
    assert_eq!(summary.frames as u64, s.scenario.tick_count());
}

#[tokio::test(flavor = "multi_thread")]
async fn disconnect_mid_pull_releases_the_grip() {
    let s = start(3.0, 50.0).await;
    let rest = s.scenario.rest_grip_position();
    let mut ws = connect(&s.url).await;
    next_frame(&mut ws).await;
    let pull = [rest.x + 0.3, rest.y, rest.z];
    send(
        &mut ws,
        &InboundMsg::Grip {
            pos: pull,
            twist: 0.0,
            held: true,
        },
    )
    .await;
    // pull until the fleet starts moving, then vanish
    loop {
        let (_, f) = next_frame(&mut ws).await;
        if f.command.v_x > 0.0 {
            break;
        }
    }
    drop(ws);

    let summary = s.handle.await.unwrap();
    let (text, log) = read_log(&summary);
    let last_held = log.frames.iter().rposition(|f| f.grip.held).unwrap();
    let after = &log.frames[last_held + 1..];
    assert!(!after.is_empty());
    for f in after {
        assert!(f.grip_live && !f.grip.held);
        assert_eq!(f.grip.position.x, pull[0]);
        assert_eq!(f.tether_force.norm(), 0.0);
    }
    let end = log.frames.last().unwrap();
    assert!(end.command.is_zero());
    assert!((end.leader.position - s.scenario.sim.deploy_target).norm() < 0.05);
    let report = replay(&text, &s.scenario).unwrap();
    assert!(report.is_exact(), "{report}");
}
