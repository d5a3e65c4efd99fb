use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use serde_json::Value;
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};
use tokio_tungstenite::tungstenite::Message;

use bmui_rt::server::serve_on;
use bmui_rt::{spawn, PipelineConfig, PROTOCOL};

type Ws = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<TcpStream>>;

async fn next_json(ws: &mut Ws) -> Value {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(5), ws.next()).await.expect("timed out").unwrap().unwrap();
        if let Message::Text(t) = msg {
            return serde_json::from_str(&t).unwrap();
        }
    }
}

/// Next message that is not telemetry.
async fn next_reply(ws: &mut Ws) -> Value {
    loop {
        let v = next_json(ws).await;
        if v["type"] != "telemetry" {
            return v;
        }
    }
}

async fn send(ws: &mut Ws, text: &str) {
    ws.send(Message::Text(text.into())).await.unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn headless_client_session() {
    let ui = tempfile::tempdir().unwrap();
    std::fs::write(ui.path().join("index.html"), "<!doctype html><title>arm</title>").unwrap();
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let cfg = PipelineConfig { start_paused: true, ..PipelineConfig::default() };
    let pipeline = spawn(&cfg, None).unwrap();
    let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(serve_on(listener, pipeline, Some(ui.path().into()), async {
        let _ = stop_rx.await;
    }));

    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/ws")).await.unwrap();
    let hello = next_json(&mut ws).await;
    assert_eq!(hello["type"], "hello");
    assert_eq!(hello["protocol"], PROTOCOL);
    assert_eq!(hello["mode"], "intent");

    send(&mut ws, r#"{"type":"set_gain","value":0.5}"#).await;
    assert_eq!(next_reply(&mut ws).await, serde_json::json!({"type":"ack","detail":"set_gain"}));
    send(&mut ws, r#"{"type":"intent","direction":"flex","level":1.0}"#).await;
    assert_eq!(next_reply(&mut ws).await["type"], "ack");
    send(&mut ws, r#"{"type":"start"}"#).await;
    assert_eq!(next_reply(&mut ws).await["type"], "ack");

    let mut frames = Vec::new();
    while frames.len() < 25 {
        let v = next_json(&mut ws).await;
        if v["type"] == "telemetry" {
            frames.push(v);
        }
    }
    for key in ["t_step", "elbow_angle_deg", "direction", "magnitude", "pred_envelope", "eeg_preview", "processing_latency_ms"] {
        assert!(frames[0].get(key).is_some(), "missing {key}");
    }
    assert_eq!(frames[0]["eeg_preview"].as_array().unwrap().len(), 4);
    let angles: Vec<f64> = frames.iter().map(|f| f["elbow_angle_deg"].as_f64().unwrap()).collect();
    assert!(angles.windows(2).all(|w| (w[1] - w[0] - 1.5).abs() < 1e-9), "{angles:?}");
    assert_eq!(frames[5]["direction"], "flex");

    send(&mut ws, r#"{"type":"set_gain","value":99}"#).await;
    let e = next_reply(&mut ws).await;
    assert_eq!(e["type"], "err");
    assert!(e["detail"].as_str().unwrap().contains("set_gain"));
    send(&mut ws, r#"{"type":"teleport"}"#).await;
    let e = next_reply(&mut ws).await;
    assert_eq!(e["type"], "err");
    assert!(e["detail"].as_str().unwrap().contains("teleport"));
    send(&mut ws, "{").await;
    assert_eq!(next_reply(&mut ws).await["type"], "err");
    send(&mut ws, r#"{"type":"reset_arm"}"#).await;
    assert_eq!(next_reply(&mut ws).await["type"], "ack");
    loop {
        let v = next_json(&mut ws).await;
        if v["type"] == "telemetry" && v["elbow_angle_deg"] == 0.0 {
            break;
        }
    }

    let mut http = TcpStream::connect(addr).await.unwrap();
    http.write_all(b"GET / HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").await.unwrap();
    let mut body = String::new();
    http.read_to_string(&mut body).await.unwrap();
    assert!(body.starts_with("HTTP/1.1 200"), "{body}");
    assert!(body.contains("<title>arm</title>"));

    stop_tx.send(()).unwrap();
    let summary = tokio::time::timeout(Duration::from_secs(10), server).await.unwrap().unwrap().unwrap();
    assert!(summary.chunks >= 25);
    assert!(!summary.source_exhausted);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn exhausted_pipeline_closes_clients() {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let cfg = PipelineConfig { max_chunks: Some(10), start_paused: true, ..PipelineConfig::default() };
    let pipeline = spawn(&cfg, None).unwrap();
    let server = tokio::spawn(serve_on(listener, pipeline, None, std::future::pending()));
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/ws")).await.unwrap();
    assert_eq!(next_json(&mut ws).await["type"], "hello");
    send(&mut ws, r#"{"type":"start"}"#).await;
    let mut telemetry = 0;
    while let Ok(Some(Ok(msg))) = tokio::time::timeout(Duration::from_secs(5), ws.next()).await {
        match msg {
            Message::Text(t) if t.contains("\"telemetry\"") => telemetry += 1,
            Message::Close(_) => break,
            _ => {}
        }
    }
    assert_eq!(telemetry, 10);
    let summary = tokio::time::timeout(Duration::from_secs(10), server).await.unwrap().unwrap().unwrap();
    assert_eq!(summary.chunks, 10);
}
