use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use serde_json::Value;
use sonifier_core::session::{Services, Session, SessionConfig};
use sonifier_core::Timestamp;
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio_tungstenite::tungstenite::Message;

fn config() -> SessionConfig {
    let mut c = SessionConfig {
        seed: 42,
        fixtures_dir: Some(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/canberra")),
        library_sounds: 120,
        ..Default::default()
    };
    c.providers.embedding_dimension = 32;
    c
}

type Ws = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

async fn next_of(ws: &mut Ws, kind: &str) -> Value {
    let deadline = tokio::time::Instant::now() + Duration::from_secs(10);
    loop {
        let msg = tokio::time::timeout_at(deadline, ws.next()).await.expect("timed out").unwrap().unwrap();
        if let Message::Text(t) = msg {
            let v: Value = serde_json::from_str(t.as_str()).unwrap();
            if v["type"] == kind {
                return v;
            }
        }
    }
}

async fn send(ws: &mut Ws, frame: &str) {
    ws.send(Message::Text(frame.into())).await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn pv1_round_trip() {
    let c = config();
    let services = Arc::new(Services::offline(&c).unwrap());
    let session = Session::start(&c, services, Timestamp(0)).unwrap();
    let key = session.composition().global_key().value();

    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let (stop_tx, stop_rx) = oneshot::channel::<()>();
    let server = tokio::spawn(sonifier::server::serve(listener, session, async {
        let _ = stop_rx.await;
    }));

    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/ws")).await.unwrap();
    send(&mut ws, r#"{"type":"hello","protocol_version":"pv1"}"#).await;
    let snap = next_of(&mut ws, "state_snapshot").await;
    assert_eq!(snap["protocol_version"], "pv1");
    assert_eq!(snap["key"], key);
    assert_eq!(snap["layers"].as_array().unwrap().len(), 6);
    assert_eq!(snap["strings"].as_array().unwrap().len(), 5);

    // A second client sees the same scene.
    let (mut other, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/ws")).await.unwrap();
    send(&mut other, r#"{"type":"hello","protocol_version":"pv1"}"#).await;
    let other_snap = next_of(&mut other, "state_snapshot").await;
    assert_eq!(other_snap["render_hash"], snap["render_hash"]);

    send(&mut ws, r#"{"type":"set_tempo","tempo_bpm":200}"#).await;
    let err = next_of(&mut ws, "error").await;
    assert_eq!(err["code"], "bad_frame");
    send(&mut ws, r#"{"type":"hello","protocol_version":"pv9"}"#).await;
    assert_eq!(next_of(&mut ws, "error").await["code"], "version_mismatch");

    send(&mut ws, r#"{"type":"pointer_update","hand_id":1,"x":0.5,"y":0.01}"#).await;
    send(&mut ws, r#"{"type":"pointer_update","hand_id":1,"x":0.5,"y":0.25}"#).await;
    let pluck = loop {
        let ev = next_of(&mut other, "note_event").await;
        if ev["kind"] == "note_pluck" {
            break ev;
        }
    };
    assert_eq!(pluck["string"], 0);
    assert_eq!(pluck["hand"], 1);
    assert_eq!(pluck["pitch"], 57);
    let trail = next_of(&mut other, "trail_update").await;
    assert_eq!(trail["hand_id"], 1);

    stop_tx.send(()).unwrap();
    let session = tokio::time::timeout(Duration::from_secs(10), server).await.unwrap().unwrap().unwrap();
    assert_eq!(session.composition().global_key().value(), key);
    let plucks = session.event_log().iter().filter(|e| e.is_pluck()).count();
    assert_eq!(plucks, 1);
}
