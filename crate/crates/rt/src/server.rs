//! HTTP side: WebSocket telemetry and control at `/ws`, static UI at `/`.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use futures_util::{SinkExt, StreamExt};
use tokio::net::TcpListener;
use tokio::sync::{broadcast, watch};
use tower_http::services::ServeDir;

use crate::pipeline::{ControlHandle, RunSummary, RunningPipeline};
use crate::protocol::{ServerMessage, PROTOCOL};

/// Frames buffered per subscriber before a slow client starts skipping.
const FANOUT_CAPACITY: usize = 256;

#[derive(Clone)]
struct AppState {
    control: ControlHandle,
    telemetry: broadcast::Sender<Arc<str>>,
    hello: Arc<str>,
    done: watch::Receiver<bool>,
}

fn router(state: AppState, ui_dir: Option<PathBuf>) -> Router {
    let app = Router::new().route("/ws", get(ws_upgrade)).with_state(state);
    match ui_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(state): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| client(socket, state))
}

async fn client(socket: WebSocket, state: AppState) {
    let mut frames = state.telemetry.subscribe();
    let mut done = state.done.clone();
    drop(state.telemetry);
    let (mut tx, mut rx) = socket.split();
    if tx.send(Message::Text(state.hello.to_string().into())).await.is_err() {
        return;
    }
    loop {
        tokio::select! {
            incoming = rx.next() => match incoming {
                Some(Ok(Message::Text(text))) => {
                    let control = state.control.clone();
                    let text = text.to_string();
                    let reply = tokio::task::spawn_blocking(move || control.handle_text(&text))
                        .await
                        .unwrap_or_else(|e| ServerMessage::err(format!("internal: {e}")));
                    if tx.send(Message::Text(reply.to_text().into())).await.is_err() {
                        return;
                    }
                }
                Some(Ok(Message::Binary(_))) => {
                    let reply = ServerMessage::err("binary frames are not part of the protocol");
                    if tx.send(Message::Text(reply.to_text().into())).await.is_err() {
                        return;
                    }
                }
                Some(Ok(_)) => {}
                Some(Err(_)) | None => return,
            },
            frame = frames.recv() => match frame {
                Ok(text) => {
                    if tx.send(Message::Text(text.to_string().into())).await.is_err() {
                        return;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => log::debug!("client skipped {n} frames"),
                Err(broadcast::error::RecvError::Closed) => {
                    let _ = tx.send(Message::Close(None)).await;
                    return;
                }
            },
            _ = async { let _ = done.wait_for(|d| *d).await; } => {
                while let Ok(text) = frames.try_recv() {
                    let _ = tx.send(Message::Text(text.to_string().into())).await;
                }
                let _ = tx.send(Message::Close(None)).await;
                return;
            }
        }
    }
}

/// Serves `pipeline` on `listener` until the pipeline ends or `shutdown`
/// resolves, then returns its summary.
pub async fn serve_on(
    listener: TcpListener,
    mut pipeline: RunningPipeline,
    ui_dir: Option<PathBuf>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> anyhow::Result<RunSummary> {
    let (tele_tx, _) = broadcast::channel::<Arc<str>>(FANOUT_CAPACITY);
    let hello = ServerMessage::Hello {
        protocol: PROTOCOL.into(),
        source: pipeline.source.clone(),
        mode: pipeline.mode.into(),
        n_emg_ch: pipeline.n_emg_ch,
    };
    let (done_tx, done_rx) = watch::channel(false);
    let state = AppState {
        control: pipeline.control.clone(),
        telemetry: tele_tx.clone(),
        hello: hello.to_text().into(),
        done: done_rx.clone(),
    };
    let app = router(state, ui_dir);

    // Broadcast stage: fan frames out to every subscriber.
    let frames = pipeline.take_frames();
    let fanout_tx = tele_tx.clone();
    let fanout = std::thread::Builder::new().name("bmui-broadcast".into()).spawn(move || {
        for f in frames.iter() {
            let _ = fanout_tx.send(ServerMessage::Telemetry(f).to_text().into());
        }
    })?;

    let stop_handle = pipeline.control.clone();
    let summary = tokio::task::spawn_blocking(move || {
        let s = pipeline.join();
        let _ = fanout.join();
        let _ = done_tx.send(true);
        s
    });
    let mut done_wait = done_rx;
    let addr: SocketAddr = listener.local_addr()?;
    log::info!("serving {PROTOCOL} on ws://{addr}/ws");
    let server = axum::serve(listener, app).with_graceful_shutdown(async move {
        tokio::select! {
            _ = shutdown => stop_handle.shutdown(),
            _ = async { let _ = done_wait.wait_for(|d| *d).await; } => {}
        }
    });
    let serve_result = server.await;
    drop(tele_tx);
    let summary = summary.await??;
    serve_result?;
    Ok(summary)
}
