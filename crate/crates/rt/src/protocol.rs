//! The `bmui-ws/1` message schema.

use bmui_core::control::Direction;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const PROTOCOL: &str = "bmui-ws/1";

/// One frame per processed chunk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryFrame {
    pub t_step: u64,
    pub elbow_angle_deg: f64,
    pub direction: Direction,
    pub magnitude: f64,
    /// Empty until the window ring has filled, and when no models are loaded.
    pub pred_envelope: Vec<f64>,
    /// Up to four filtered EEG channels, decimated.
    pub eeg_preview: Vec<Vec<f64>>,
    pub processing_latency_ms: f64,
}

/// Server to client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello { protocol: String, source: String, mode: String, n_emg_ch: usize },
    Telemetry(TelemetryFrame),
    Ack { detail: String },
    Err { detail: String },
}

impl ServerMessage {
    pub fn ack(detail: impl Into<String>) -> Self {
        ServerMessage::Ack { detail: detail.into() }
    }

    pub fn err(detail: impl Into<String>) -> Self {
        ServerMessage::Err { detail: detail.into() }
    }

    pub fn to_text(&self) -> String {
        serde_json::to_string(self).expect("server message serialises")
    }
}

/// Client to server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlMessage {
    SetSource {
        #[serde(alias = "source")]
        value: String,
    },
    SetGain {
        value: f64,
    },
    SetThresholdFraction {
        value: f64,
    },
    Intent {
        direction: Direction,
        level: f64,
    },
    Start,
    Stop,
    ResetArm,
}

const TYPES: [&str; 7] = ["set_source", "set_gain", "set_threshold_fraction", "intent", "start", "stop", "reset_arm"];

impl ControlMessage {
    pub fn kind(&self) -> &'static str {
        match self {
            ControlMessage::SetSource { .. } => "set_source",
            ControlMessage::SetGain { .. } => "set_gain",
            ControlMessage::SetThresholdFraction { .. } => "set_threshold_fraction",
            ControlMessage::Intent { .. } => "intent",
            ControlMessage::Start => "start",
            ControlMessage::Stop => "stop",
            ControlMessage::ResetArm => "reset_arm",
        }
    }

    /// Parses a text frame; the error string names the offending field.
    pub fn parse(text: &str) -> Result<Self, String> {
        let v: Value = serde_json::from_str(text).map_err(|e| format!("malformed message: {e}"))?;
        let kind = match v.get("type") {
            Some(Value::String(s)) => s.clone(),
            Some(other) => return Err(format!("field \"type\" must be a string, got {other}")),
            None => return Err("missing field \"type\"".into()),
        };
        if !TYPES.contains(&kind.as_str()) {
            return Err(format!("unknown type \"{kind}\""));
        }
        serde_json::from_value(v).map_err(|e| format!("{kind}: {e}"))
    }

    pub fn to_text(&self) -> String {
        serde_json::to_string(self).expect("control message serialises")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn telemetry_is_flat_and_tagged() {
        let f = TelemetryFrame {
            t_step: 3,
            elbow_angle_deg: 12.5,
            direction: Direction::Flex,
            magnitude: 0.25,
            pred_envelope: vec![1.0],
            eeg_preview: vec![vec![0.5]],
            processing_latency_ms: 0.7,
        };
        let text = ServerMessage::Telemetry(f.clone()).to_text();
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["type"], "telemetry");
        assert_eq!(v["direction"], "flex");
        assert_eq!(v["t_step"], 3);
        assert_eq!(serde_json::from_str::<ServerMessage>(&text).unwrap(), ServerMessage::Telemetry(f));
        assert_eq!(ServerMessage::ack("set_gain").to_text(), r#"{"type":"ack","detail":"set_gain"}"#);
    }

    #[test]
    fn parses_every_control_message() {
        let cases = [
            (r#"{"type":"set_source","value":"synthetic:3"}"#, ControlMessage::SetSource { value: "synthetic:3".into() }),
            (r#"{"type":"set_source","source":"replay:/x"}"#, ControlMessage::SetSource { value: "replay:/x".into() }),
            (r#"{"type":"set_gain","value":0.5}"#, ControlMessage::SetGain { value: 0.5 }),
            (r#"{"type":"set_threshold_fraction","value":0.1}"#, ControlMessage::SetThresholdFraction { value: 0.1 }),
            (
                r#"{"type":"intent","direction":"extend","level":1}"#,
                ControlMessage::Intent { direction: Direction::Extend, level: 1.0 },
            ),
            (r#"{"type":"start"}"#, ControlMessage::Start),
            (r#"{"type":"stop"}"#, ControlMessage::Stop),
            (r#"{"type":"reset_arm"}"#, ControlMessage::ResetArm),
        ];
        for (text, want) in cases {
            let got = ControlMessage::parse(text).unwrap();
            assert_eq!(got, want);
            assert_eq!(ControlMessage::parse(&got.to_text()).unwrap(), want);
        }
    }

    #[test]
    fn errors_echo_the_offending_field() {
        assert!(ControlMessage::parse(r#"{"type":"jump"}"#).unwrap_err().contains("\"jump\""));
        assert!(ControlMessage::parse(r#"{"value":1}"#).unwrap_err().contains("type"));
        assert!(ControlMessage::parse(r#"{"type":"set_gain"}"#).unwrap_err().contains("value"));
        assert!(ControlMessage::parse(r#"{"type":"intent","direction":"up","level":1}"#).unwrap_err().contains("up"));
        assert!(ControlMessage::parse("not json").unwrap_err().starts_with("malformed"));
    }
}
