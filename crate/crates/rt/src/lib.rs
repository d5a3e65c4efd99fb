//! Real-time side of the brain-muscle interface: the chunked decoding
//! pipeline, its WebSocket protocol and the `bmui` command line.

pub mod calibrate;
pub mod cli;
pub mod frontend;
pub mod pipeline;
pub mod protocol;
pub mod server;
pub mod source;

pub use pipeline::{spawn, ControlHandle, Models, PipelineConfig, RunSummary, RunningPipeline};
pub use protocol::{ControlMessage, ServerMessage, TelemetryFrame, PROTOCOL};
pub use source::{Intent, SourceSpec};
