//! Three-stage real-time loop: ingest, inference and control, broadcast.

use std::path::Path;
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use crossbeam_channel::{bounded, unbounded, Receiver, RecvTimeoutError, Sender, TrySendError};

use bmui_core::control::{arm_update_with_speed, ArmState, Calibration, ControlCommand, Direction, MAX_SPEED_DEG_S};
use bmui_core::neural::{load_classifier, load_regressor};
use bmui_core::{Classifier, Controller, Error, Regressor, Result};

use crate::frontend::{FrontEnd, WindowRing};
use crate::protocol::{ControlMessage, ServerMessage, TelemetryFrame};
use crate::source::{open_source, Intent, Source, SourceSpec};

pub const CHUNK_MS: u32 = 50;
pub const QUEUE_DEPTH: usize = 4;
pub const PREVIEW_CHANNELS: usize = 4;
pub const PREVIEW_DECIMATION: usize = 10;
pub const MAX_GAIN: f64 = 10.0;
const MODEL_STRIDE_MS: u32 = 50;

/// Trained regressor and classifier with the magnitude calibration.
#[derive(Debug, Clone)]
pub struct Models {
    pub regressor: Regressor,
    pub classifier: Classifier,
    pub calibration: Calibration,
}

impl Models {
    pub fn new(regressor: Regressor, classifier: Classifier, calibration: Calibration) -> Result<Self> {
        let n_emg = regressor.config().n_emg_ch;
        if classifier.config().n_channels != n_emg {
            return Err(Error::Shape(format!(
                "classifier reads {} channels, regressor predicts {n_emg}",
                classifier.config().n_channels
            )));
        }
        if calibration.channel_index >= n_emg {
            return Err(Error::Shape(format!("calibrated channel {} out of range", calibration.channel_index)));
        }
        Ok(Self { regressor, classifier, calibration })
    }

    pub fn load(regressor: &Path, classifier: &Path, calibration: &Path) -> Result<Self> {
        Self::new(load_regressor(regressor)?, load_classifier(classifier)?, Calibration::load(calibration)?)
    }

    pub fn n_eeg_ch(&self) -> usize {
        self.regressor.config().n_eeg_ch
    }
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub chunk_ms: u32,
    pub source: SourceSpec,
    /// Run unpaced and never drop frames.
    pub fast: bool,
    /// Stop after this many chunks.
    pub max_chunks: Option<u64>,
    pub start_paused: bool,
    pub gain: f64,
    pub threshold_fraction: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            chunk_ms: CHUNK_MS,
            source: SourceSpec::Synthetic(42),
            fast: false,
            max_chunks: None,
            start_paused: false,
            gain: 1.0,
            threshold_fraction: 0.0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chunk_ms == 0 || MODEL_STRIDE_MS % self.chunk_ms != 0 {
            return Err(Error::InvalidConfig(format!("chunk of {} ms must divide the {MODEL_STRIDE_MS} ms stride", self.chunk_ms)));
        }
        check_gain(self.gain)?;
        check_threshold(self.threshold_fraction)?;
        Ok(())
    }
}

fn check_gain(g: f64) -> Result<()> {
    if !(0.0..=MAX_GAIN).contains(&g) {
        return Err(Error::InvalidArgument(format!("gain {g} outside [0, {MAX_GAIN}]")));
    }
    Ok(())
}

fn check_threshold(f: f64) -> Result<()> {
    if !(0.0..1.0).contains(&f) {
        return Err(Error::InvalidArgument(format!("threshold fraction {f} outside [0, 1)")));
    }
    Ok(())
}

/// Latency histogram with 0.05 ms bins up to 500 ms.
#[derive(Debug, Clone)]
pub struct LatencyHistogram {
    bins: Vec<u64>,
    count: u64,
    max_ms: f64,
}

const BIN_MS: f64 = 0.05;
const N_BINS: usize = 10_000;

impl Default for LatencyHistogram {
    fn default() -> Self {
        Self { bins: vec![0; N_BINS + 1], count: 0, max_ms: 0.0 }
    }
}

impl LatencyHistogram {
    pub fn record(&mut self, ms: f64) {
        let i = ((ms / BIN_MS) as usize).min(N_BINS);
        self.bins[i] += 1;
        self.count += 1;
        self.max_ms = self.max_ms.max(ms);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn max_ms(&self) -> f64 {
        self.max_ms
    }

    /// Upper edge of the bin holding the `q`-quantile.
    pub fn quantile_ms(&self, q: f64) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        let rank = (q * self.count as f64).ceil().max(1.0) as u64;
        let mut seen = 0;
        for (i, &b) in self.bins.iter().enumerate() {
            seen += b;
            if seen >= rank {
                return if i == N_BINS { self.max_ms } else { (i + 1) as f64 * BIN_MS };
            }
        }
        self.max_ms
    }
}

/// Totals reported when the pipeline stops.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub chunks: u64,
    pub frames_dropped: u64,
    pub final_angle_deg: f64,
    pub latency: LatencyHistogram,
    pub source_exhausted: bool,
}

impl RunSummary {
    pub fn describe(&self) -> String {
        format!(
            "{} chunks, final angle {:.2} deg, latency p50 {:.2} ms p95 {:.2} ms max {:.2} ms, {} frames dropped{}",
            self.chunks,
            self.final_angle_deg,
            self.latency.quantile_ms(0.5),
            self.latency.quantile_ms(0.95),
            self.latency.max_ms(),
            self.frames_dropped,
            if self.source_exhausted { ", source exhausted" } else { "" }
        )
    }
}

enum IngestCommand {
    Source(Box<dyn Source>),
    Intent(Intent),
    Start,
    Stop,
    Shutdown,
    Forward(StageCommand),
}

/// Messages for the control stage, carried in order with the data.
#[derive(Debug, Clone, Copy)]
enum StageCommand {
    Gain(f64),
    Threshold(f64),
    ResetArm,
    SourceChanged,
}

struct Chunk {
    eeg: Vec<Vec<f64>>,
    intent: Intent,
    arrived: Instant,
}

enum Item {
    Chunk(Chunk),
    Control(StageCommand),
}

/// Validates operator messages and routes them to the stages.
#[derive(Clone)]
pub struct ControlHandle {
    tx: Sender<IngestCommand>,
    n_eeg_ch: Option<usize>,
}

impl ControlHandle {
    /// Applies `msg`; out-of-range values are rejected with state unchanged.
    pub fn handle(&self, msg: ControlMessage) -> ServerMessage {
        let kind = msg.kind();
        match self.route(msg) {
            Ok(()) => ServerMessage::ack(kind),
            Err(e) => ServerMessage::err(format!("{kind}: {e}")),
        }
    }

    /// Parses and applies a text frame.
    pub fn handle_text(&self, text: &str) -> ServerMessage {
        match ControlMessage::parse(text) {
            Ok(msg) => self.handle(msg),
            Err(e) => ServerMessage::err(e),
        }
    }

    /// Ends the ingest stage; the other stages follow once drained.
    pub fn shutdown(&self) {
        let _ = self.tx.send(IngestCommand::Shutdown);
    }

    fn route(&self, msg: ControlMessage) -> Result<()> {
        let cmd = match msg {
            ControlMessage::SetSource { value } => {
                let spec: SourceSpec = value.parse()?;
                let src = open_source(&spec)?;
                if let Some(n) = self.n_eeg_ch {
                    if src.n_eeg_ch() != n {
                        return Err(Error::Shape(format!("source has {} EEG channels, model expects {n}", src.n_eeg_ch())));
                    }
                }
                FrontEnd::new(src.n_eeg_ch(), src.rate_hz())?;
                IngestCommand::Source(src)
            }
            ControlMessage::SetGain { value } => {
                check_gain(value)?;
                IngestCommand::Forward(StageCommand::Gain(value))
            }
            ControlMessage::SetThresholdFraction { value } => {
                check_threshold(value)?;
                IngestCommand::Forward(StageCommand::Threshold(value))
            }
            ControlMessage::Intent { direction, level } => {
                if !(0.0..=1.0).contains(&level) {
                    return Err(Error::InvalidArgument(format!("level {level} outside [0, 1]")));
                }
                IngestCommand::Intent(Intent { direction, level })
            }
            ControlMessage::Start => IngestCommand::Start,
            ControlMessage::Stop => IngestCommand::Stop,
            ControlMessage::ResetArm => IngestCommand::Forward(StageCommand::ResetArm),
        };
        self.tx.send(cmd).map_err(|_| Error::InvalidArgument("pipeline has stopped".into()))
    }
}

/// A running pipeline. Frames arrive on `frames`; dropping every
/// `ControlHandle` and draining `frames` lets the stages wind down.
pub struct RunningPipeline {
    pub control: ControlHandle,
    pub frames: Receiver<TelemetryFrame>,
    pub n_emg_ch: usize,
    pub source: String,
    pub mode: &'static str,
    ingest: JoinHandle<Result<bool>>,
    control_stage: JoinHandle<Result<RunSummary>>,
}

impl RunningPipeline {
    /// Moves the frame stream out; later `join`/`collect` see no frames.
    pub fn take_frames(&mut self) -> Receiver<TelemetryFrame> {
        let (_, closed) = bounded(0);
        std::mem::replace(&mut self.frames, closed)
    }

    /// Waits for both stages; requires the source to end or `max_chunks`.
    pub fn join(self) -> Result<RunSummary> {
        let RunningPipeline { control, frames, ingest, control_stage, .. } = self;
        drop(control);
        let drain = std::thread::spawn(move || frames.iter().count());
        let exhausted = ingest.join().map_err(|_| Error::InvalidArgument("ingest stage panicked".into()))??;
        let mut summary = control_stage.join().map_err(|_| Error::InvalidArgument("control stage panicked".into()))??;
        let _ = drain.join();
        summary.source_exhausted = exhausted;
        Ok(summary)
    }

    /// Collects every frame, then joins.
    pub fn collect(self) -> Result<(Vec<TelemetryFrame>, RunSummary)> {
        let RunningPipeline { control, frames, ingest, control_stage, .. } = self;
        drop(control);
        let collected: Vec<TelemetryFrame> = frames.iter().collect();
        let exhausted = ingest.join().map_err(|_| Error::InvalidArgument("ingest stage panicked".into()))??;
        let mut summary = control_stage.join().map_err(|_| Error::InvalidArgument("control stage panicked".into()))??;
        summary.source_exhausted = exhausted;
        Ok((collected, summary))
    }
}

/// Starts the ingest and control stages. Without `models` the command is
/// taken straight from the operator intent.
pub fn spawn(cfg: &PipelineConfig, models: Option<Arc<Models>>) -> Result<RunningPipeline> {
    spawn_with_source(cfg, models, open_source(&cfg.source)?)
}

pub fn spawn_with_source(cfg: &PipelineConfig, models: Option<Arc<Models>>, source: Box<dyn Source>) -> Result<RunningPipeline> {
    cfg.validate()?;
    if let Some(m) = &models {
        if m.n_eeg_ch() != source.n_eeg_ch() {
            return Err(Error::Shape(format!(
                "model expects {} EEG channels, source {} has {}",
                m.n_eeg_ch(),
                source.describe(),
                source.n_eeg_ch()
            )));
        }
    }
    let front = FrontEnd::new(source.n_eeg_ch(), source.rate_hz())?;
    let (ctl_tx, ctl_rx) = unbounded();
    let (item_tx, item_rx) = bounded(QUEUE_DEPTH);
    let (frame_tx, frame_rx) = bounded(QUEUE_DEPTH);
    let n_emg_ch = models.as_ref().map_or(0, |m| m.regressor.config().n_emg_ch);
    let describe = source.describe();
    let mode = if models.is_some() { "decoded" } else { "intent" };
    let n_eeg_ch = models.as_ref().map(|m| m.n_eeg_ch());

    let ingest_cfg = cfg.clone();
    let ingest = std::thread::Builder::new()
        .name("bmui-ingest".into())
        .spawn(move || ingest_stage(&ingest_cfg, source, front, ctl_rx, item_tx))?;

    let control_cfg = cfg.clone();
    let stage_state = ControlStage::new(&control_cfg, models)?;
    // Only the paced path evicts; holding a receiver in fast mode would keep a
    // blocking send alive after the consumer has gone.
    let drop_rx = (!cfg.fast).then(|| frame_rx.clone());
    let control_stage = std::thread::Builder::new()
        .name("bmui-control".into())
        .spawn(move || stage_state.run(item_rx, frame_tx, drop_rx))?;

    Ok(RunningPipeline {
        control: ControlHandle { tx: ctl_tx, n_eeg_ch },
        frames: frame_rx,
        n_emg_ch,
        source: describe,
        mode,
        ingest,
        control_stage,
    })
}

/// Returns whether the source ran out.
fn ingest_stage(
    cfg: &PipelineConfig,
    mut source: Box<dyn Source>,
    mut front: FrontEnd,
    ctl: Receiver<IngestCommand>,
    out: Sender<Item>,
) -> Result<bool> {
    let period = Duration::from_millis(cfg.chunk_ms as u64);
    let mut running = !cfg.start_paused;
    let mut next_deadline = Instant::now();
    let mut produced = 0u64;
    let mut ctl_open = true;
    loop {
        // Apply pending commands; block briefly while paused.
        loop {
            let cmd = if running || !ctl_open {
                match ctl.try_recv() {
                    Ok(c) => c,
                    Err(crossbeam_channel::TryRecvError::Empty) => break,
                    Err(crossbeam_channel::TryRecvError::Disconnected) => {
                        ctl_open = false;
                        break;
                    }
                }
            } else {
                match ctl.recv_timeout(Duration::from_millis(10)) {
                    Ok(c) => c,
                    Err(RecvTimeoutError::Timeout) => continue,
                    Err(RecvTimeoutError::Disconnected) => {
                        ctl_open = false;
                        break;
                    }
                }
            };
            match cmd {
                IngestCommand::Source(s) => {
                    front = FrontEnd::new(s.n_eeg_ch(), s.rate_hz())?;
                    source = s;
                    if out.send(Item::Control(StageCommand::SourceChanged)).is_err() {
                        return Ok(false);
                    }
                }
                IngestCommand::Intent(i) => source.set_intent(i)?,
                IngestCommand::Start => {
                    running = true;
                    next_deadline = Instant::now();
                }
                IngestCommand::Stop => running = false,
                IngestCommand::Shutdown => return Ok(false),
                IngestCommand::Forward(c) => {
                    if out.send(Item::Control(c)).is_err() {
                        return Ok(false);
                    }
                }
            }
        }
        if !running {
            if !ctl_open {
                return Ok(false);
            }
            continue;
        }
        if cfg.max_chunks.is_some_and(|m| produced >= m) {
            return Ok(false);
        }
        if !cfg.fast {
            let now = Instant::now();
            if next_deadline > now {
                std::thread::sleep(next_deadline - now);
            }
            next_deadline += period;
        }
        let Some(chunk) = source.next_chunk(cfg.chunk_ms)? else {
            return Ok(true);
        };
        let arrived = Instant::now();
        let eeg = front.process(&chunk.eeg)?;
        if out.send(Item::Chunk(Chunk { eeg, intent: chunk.intent, arrived })).is_err() {
            return Ok(false);
        }
        produced += 1;
    }
}

struct ControlStage {
    dt_s: f64,
    models: Option<Arc<Models>>,
    ring: Option<WindowRing>,
    controller: Option<Controller>,
    arm: ArmState,
    gain: f64,
    hold_next: bool,
    t_step: u64,
    latency: LatencyHistogram,
    dropped: u64,
}

impl ControlStage {
    fn new(cfg: &PipelineConfig, models: Option<Arc<Models>>) -> Result<Self> {
        let (ring, controller) = match &models {
            Some(m) => {
                let rc = m.regressor.config();
                let mut c = Controller::new(m.calibration.clone(), rc.n_emg_ch)?;
                c.set_threshold_fraction(cfg.threshold_fraction)?;
                (Some(WindowRing::new(rc.n_eeg_ch, rc.window)), Some(c))
            }
            None => (None, None),
        };
        Ok(Self {
            dt_s: cfg.chunk_ms as f64 / 1000.0,
            models,
            ring,
            controller,
            arm: ArmState::default(),
            gain: cfg.gain,
            hold_next: false,
            t_step: 0,
            latency: LatencyHistogram::default(),
            dropped: 0,
        })
    }

    fn run(mut self, input: Receiver<Item>, out: Sender<TelemetryFrame>, drop_rx: Option<Receiver<TelemetryFrame>>) -> Result<RunSummary> {
        for item in input.iter() {
            match item {
                Item::Control(c) => self.apply(c)?,
                Item::Chunk(chunk) => {
                    let frame = self.step(chunk)?;
                    match &drop_rx {
                        Some(evict) => self.offer(&out, evict, frame),
                        None => {
                            if out.send(frame).is_err() {
                                break;
                            }
                        }
                    }
                }
            }
        }
        Ok(RunSummary {
            chunks: self.t_step,
            frames_dropped: self.dropped,
            final_angle_deg: self.arm.elbow_angle_deg,
            latency: self.latency,
            source_exhausted: false,
        })
    }

    /// Non-blocking send that evicts the oldest queued frame when full.
    fn offer(&mut self, out: &Sender<TelemetryFrame>, drop_rx: &Receiver<TelemetryFrame>, mut frame: TelemetryFrame) {
        loop {
            match out.try_send(frame) {
                Ok(()) => return,
                Err(TrySendError::Full(f)) => {
                    if drop_rx.try_recv().is_ok() {
                        self.dropped += 1;
                    }
                    frame = f;
                }
                Err(TrySendError::Disconnected(_)) => return,
            }
        }
    }

    fn apply(&mut self, c: StageCommand) -> Result<()> {
        match c {
            StageCommand::Gain(g) => self.gain = g,
            StageCommand::Threshold(f) => {
                if let Some(ctl) = &mut self.controller {
                    ctl.set_threshold_fraction(f)?;
                }
            }
            StageCommand::ResetArm => {
                self.arm = ArmState::default();
                self.hold_next = true;
                if let Some(ctl) = &mut self.controller {
                    ctl.reset();
                }
            }
            StageCommand::SourceChanged => {
                if let Some(r) = &mut self.ring {
                    r.clear();
                }
                if let Some(ctl) = &mut self.controller {
                    ctl.reset();
                }
            }
        }
        Ok(())
    }

    fn step(&mut self, chunk: Chunk) -> Result<TelemetryFrame> {
        let t = self.t_step;
        let mut pred_envelope = Vec::new();
        let cmd = match (&self.models, &mut self.ring, &mut self.controller) {
            (Some(m), Some(ring), Some(ctl)) => {
                ring.push(&chunk.eeg);
                if ring.is_full() {
                    pred_envelope = m.regressor.predict_envelope(&ring.window())?;
                    match ctl.step(&pred_envelope, &m.classifier) {
                        Ok(c) => ControlCommand { t, ..c },
                        Err(Error::WarmingUp { .. }) => ControlCommand::rest(t),
                        Err(e) => return Err(e),
                    }
                } else {
                    ControlCommand::rest(t)
                }
            }
            _ => {
                let Intent { direction, level } = chunk.intent;
                let magnitude = if direction == Direction::Rest { 0.0 } else { level };
                ControlCommand { direction, magnitude, t }
            }
        };
        if std::mem::take(&mut self.hold_next) {
            self.arm = ArmState::default();
        } else {
            self.arm = arm_update_with_speed(self.arm, &cmd, self.dt_s, MAX_SPEED_DEG_S * self.gain);
        }
        let eeg_preview = chunk
            .eeg
            .iter()
            .take(PREVIEW_CHANNELS)
            .map(|r| r.iter().step_by(PREVIEW_DECIMATION).copied().collect())
            .collect();
        let latency_ms = chunk.arrived.elapsed().as_secs_f64() * 1000.0;
        self.latency.record(latency_ms);
        self.t_step += 1;
        Ok(TelemetryFrame {
            t_step: t,
            elbow_angle_deg: self.arm.elbow_angle_deg,
            direction: cmd.direction,
            magnitude: cmd.magnitude,
            pred_envelope,
            eeg_preview,
            processing_latency_ms: latency_ms,
        })
    }
}
