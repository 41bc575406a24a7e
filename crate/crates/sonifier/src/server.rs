//! WebSocket server for protocol `pv1` at `/ws`.
//!
//! A single task owns the session. Client frames reach it through a queue,
//! refreshes run on the blocking pool and come back through another, and
//! broadcasts fan out to every connection.

use std::future::Future;
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use futures_util::{SinkExt, StreamExt};
use sonifier_core::session::{execute, Outbound, ServerMessage, Session, WorkResult, TICK_HZ};
use sonifier_core::Timestamp;
use tokio::net::TcpListener;
use tokio::sync::{broadcast, mpsc, watch};

const BROADCAST_CAPACITY: usize = 4096;

enum Command {
    Frame { text: String, reply: mpsc::UnboundedSender<String> },
}

#[derive(Clone)]
struct AppState {
    commands: mpsc::Sender<Command>,
    broadcasts: broadcast::Sender<String>,
    stop: watch::Receiver<bool>,
}

fn router(
    state_commands: mpsc::Sender<Command>,
    broadcasts: broadcast::Sender<String>,
    stop: watch::Receiver<bool>,
) -> Router {
    Router::new().route("/ws", get(upgrade)).with_state(AppState { commands: state_commands, broadcasts, stop })
}

/// Serves until `shutdown` resolves, then hands the session back so its
/// event log can be written.
pub async fn serve(
    listener: TcpListener,
    session: Session,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> anyhow::Result<Session> {
    let (commands, command_rx) = mpsc::channel(1024);
    let (broadcasts, _) = broadcast::channel(BROADCAST_CAPACITY);
    let (stop_tx, stop_rx) = watch::channel(false);

    let session_task = tokio::spawn(session_loop(session, command_rx, broadcasts.clone(), stop_rx.clone()));
    let app = router(commands, broadcasts, stop_rx);
    axum::serve(listener, app)
        .with_graceful_shutdown(async move {
            shutdown.await;
            let _ = stop_tx.send(true);
        })
        .await?;
    Ok(session_task.await?)
}

async fn session_loop(
    mut session: Session,
    mut commands: mpsc::Receiver<Command>,
    broadcasts: broadcast::Sender<String>,
    mut stop: watch::Receiver<bool>,
) -> Session {
    let services = session.services().clone();
    let (results_tx, mut results) = mpsc::unbounded_channel::<WorkResult>();
    let origin = Instant::now();
    let start = session.start_time();
    let mut ticker = tokio::time::interval(Duration::from_millis(1000 / TICK_HZ as u64));
    ticker.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Skip);

    let publish = |out: Vec<Outbound>, reply: Option<&mpsc::UnboundedSender<String>>| {
        for o in out {
            match o {
                Outbound::Broadcast(m) => {
                    let _ = broadcasts.send(m.to_frame());
                }
                Outbound::Reply(m) => {
                    if let Some(r) = reply {
                        let _ = r.send(m.to_frame());
                    }
                }
            }
        }
    };

    loop {
        tokio::select! {
            _ = ticker.tick() => {
                let t = Timestamp(start.as_millis() + origin.elapsed().as_millis() as i64);
                match session.advance(t) {
                    Ok(out) => publish(out, None),
                    Err(e) => tracing::error!("composer: {e}"),
                }
                for work in session.due_work() {
                    tracing::debug!(target = ?work.target(), "refresh");
                    let services = services.clone();
                    let tx = results_tx.clone();
                    tokio::task::spawn_blocking(move || {
                        let _ = tx.send(execute(&services, &work));
                    });
                }
            }
            Some(result) = results.recv() => {
                let failures = session.failures().len();
                publish(session.apply(result), None);
                for f in &session.failures()[failures..] {
                    tracing::warn!(target = ?f.target, "refresh failed, keeping last good data: {}", f.detail);
                }
            }
            Some(Command::Frame { text, reply }) = commands.recv() => {
                publish(session.handle_frame(&text), Some(&reply));
            }
            _ = stop.changed() => break,
        }
    }
    session
}

async fn upgrade(ws: WebSocketUpgrade, State(state): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| connection(socket, state))
}

async fn connection(socket: WebSocket, state: AppState) {
    let (mut sink, mut stream) = socket.split();
    let (reply_tx, mut replies) = mpsc::unbounded_channel::<String>();
    let mut broadcasts = state.broadcasts.subscribe();
    let mut stop = state.stop.clone();
    loop {
        let outgoing = tokio::select! {
            incoming = stream.next() => match incoming {
                Some(Ok(Message::Text(text))) => {
                    let cmd = Command::Frame { text: text.to_string(), reply: reply_tx.clone() };
                    if state.commands.send(cmd).await.is_err() {
                        break;
                    }
                    continue;
                }
                Some(Ok(Message::Binary(_))) => {
                    ServerMessage::error("bad_frame", "binary frames are not part of the protocol").to_frame()
                }
                Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                Some(Ok(_)) => continue,
            },
            Some(reply) = replies.recv() => reply,
            frame = broadcasts.recv() => match frame {
                Ok(frame) => frame,
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    tracing::warn!("client fell behind by {n} messages");
                    continue;
                }
                Err(broadcast::error::RecvError::Closed) => break,
            },
            _ = stop.changed() => {
                let _ = sink.send(Message::Close(None)).await;
                break;
            }
        };
        if sink.send(Message::Text(outgoing.into())).await.is_err() {
            break;
        }
    }
}
