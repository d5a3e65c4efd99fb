//! Seeded synthetic sessions.
//!
//! A latent intent `u_d(t) ∈ [0, 1]` per direction drives three observables:
//! beta-band (15–35 Hz) amplitude on the EEG channels, the amplitude of
//! broadband EMG bursts after a neuromuscular delay, and a slow force trace.
//! [`SynthGenerator`] produces the signals chunk by chunk so the live source
//! of the service and the offline session files share one model.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::segment::ActiveInterval;
use crate::control::Direction;
use crate::dsp::{design_butterworth, BiquadCascade, FilterDesign, StreamingFilterState};
use crate::error::{Error, Result};
use crate::signal::{MovementLabel, MultiChannelSignal, RawSession, ALIGNED_RATE_HZ};

pub const EEG_RATE_HZ: f64 = 500.0;
pub const EMG_RATE_HZ: f64 = 1000.0;
pub const FORCE_RATE_HZ: f64 = 6.6;
/// Seconds taken by the intent to move between two levels.
pub const RAMP_S: f64 = 0.3;
pub const LOW_EFFORT: f64 = 0.5;
pub const HIGH_EFFORT: f64 = 1.0;

const EEG_SCALE: f64 = 10.0;
const EMG_SCALE: f64 = 100.0;
const BACKGROUND_BETA: f64 = 0.15;
const FORCE_GAIN: f64 = 10.0;
const FORCE_NOISE: f64 = 0.02;
const FORCE_LOWPASS_HZ: f64 = 5.0;
const LINE_HZ: f64 = 50.0;

/// Default `(flex, extend)` gains of a six-muscle arm. Channel 0 stands in
/// for the brachialis and is active in both directions.
pub const DEFAULT_EMG_GAINS: [[f64; 2]; 6] =
    [[1.0, 0.7], [0.8, 0.2], [0.3, 0.9], [0.2, 1.0], [0.5, 0.1], [0.1, 0.5]];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub subject_id: String,
    pub n_trials: usize,
    pub trial_duration_s: f64,
    pub rest_duration_s: f64,
    pub n_eeg_ch: usize,
    pub n_emg_ch: usize,
    /// `(flex, extend)` coupling per EMG channel; empty selects defaults.
    pub emg_gains: Vec<[f64; 2]>,
    /// `(flex, extend)` beta modulation depth per EEG channel; empty selects defaults.
    pub eeg_coupling: Vec<[f64; 2]>,
    pub delay_ms: f64,
    /// Modulated beta amplitude over broadband noise amplitude.
    pub eeg_snr: f64,
    /// Burst amplitude at full activation over noise amplitude.
    pub emg_snr: f64,
    /// Amplitude of the 50 Hz mains pickup on EEG (common mode) and EMG.
    pub line_noise_uv: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            subject_id: "synthetic".into(),
            n_trials: 40,
            trial_duration_s: 3.0,
            rest_duration_s: 2.0,
            n_eeg_ch: 16,
            n_emg_ch: 6,
            emg_gains: Vec::new(),
            eeg_coupling: Vec::new(),
            delay_ms: 50.0,
            eeg_snr: 1.0,
            emg_snr: 10.0,
            line_noise_uv: 5.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_eeg_ch == 0 || self.n_emg_ch == 0 {
            return bad("channel counts must be positive".into());
        }
        if !self.emg_gains.is_empty() && self.emg_gains.len() != self.n_emg_ch {
            return bad(format!("{} EMG gains for {} channels", self.emg_gains.len(), self.n_emg_ch));
        }
        if !self.eeg_coupling.is_empty() && self.eeg_coupling.len() != self.n_eeg_ch {
            return bad(format!("{} EEG couplings for {} channels", self.eeg_coupling.len(), self.n_eeg_ch));
        }
        if self.trial_duration_s < 2.0 * RAMP_S || self.rest_duration_s < 0.0 {
            return bad(format!("trial must last at least {} s", 2.0 * RAMP_S));
        }
        if !(self.delay_ms >= 0.0 && self.eeg_snr > 0.0 && self.emg_snr > 0.0 && self.line_noise_uv >= 0.0) {
            return bad("delay, SNRs and line noise must be non-negative".into());
        }
        Ok(())
    }

    pub fn resolved_emg_gains(&self) -> Vec<[f64; 2]> {
        if !self.emg_gains.is_empty() {
            return self.emg_gains.clone();
        }
        (0..self.n_emg_ch)
            .map(|j| {
                let [f, e] = DEFAULT_EMG_GAINS[j % DEFAULT_EMG_GAINS.len()];
                let fade = 1.0 - 0.1 * (j / DEFAULT_EMG_GAINS.len()) as f64;
                [f * fade, e * fade]
            })
            .collect()
    }

    /// Flexion couples to one side of the montage, extension to the other.
    pub fn resolved_eeg_coupling(&self) -> Vec<[f64; 2]> {
        if !self.eeg_coupling.is_empty() {
            return self.eeg_coupling.clone();
        }
        let c = self.n_eeg_ch as f64;
        (0..self.n_eeg_ch)
            .map(|i| {
                let phase = (2.0 * std::f64::consts::PI * i as f64 / c).cos();
                [0.3 + 0.9 * (1.0 + phase) / 2.0, 0.3 + 0.9 * (1.0 - phase) / 2.0]
            })
            .collect()
    }

    pub fn n_force_ch(&self) -> usize {
        (self.n_emg_ch / 6).max(1)
    }

    /// Trial protocol: rest, then alternating trials and rests. Labels cycle
    /// through flexion and extension at low and high effort.
    pub fn protocol(&self) -> Vec<ScriptStep> {
        const CYCLE: [(Direction, f64, &str); 4] = [
            (Direction::Flex, LOW_EFFORT, "flex-low"),
            (Direction::Extend, LOW_EFFORT, "extend-low"),
            (Direction::Flex, HIGH_EFFORT, "flex-high"),
            (Direction::Extend, HIGH_EFFORT, "extend-high"),
        ];
        let mut steps = vec![ScriptStep::rest(self.rest_duration_s)];
        for k in 0..self.n_trials {
            let (dir, level, label) = CYCLE[k % CYCLE.len()];
            steps.push(ScriptStep { direction: dir, level, duration_s: self.trial_duration_s - RAMP_S, label: Some(label.into()) });
            steps.push(ScriptStep::rest(self.rest_duration_s + RAMP_S));
        }
        steps
    }
}

/// Holds the intent target `(direction, level)` for `duration_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptStep {
    pub direction: Direction,
    pub level: f64,
    pub duration_s: f64,
    #[serde(default)]
    pub label: Option<String>,
}

impl ScriptStep {
    pub fn rest(duration_s: f64) -> Self {
        Self { direction: Direction::Rest, level: 0.0, duration_s, label: None }
    }

    pub fn hold(direction: Direction, level: f64, duration_s: f64) -> Self {
        Self { direction, level, duration_s, label: Some(format!("{direction}")) }
    }
}

/// Latent intent at 1000 Hz, not delayed.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub rate_hz: f64,
    pub u_flex: Vec<f64>,
    pub u_extend: Vec<f64>,
}

impl GroundTruth {
    pub fn len(&self) -> usize {
        self.u_flex.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u_flex.is_empty()
    }

    /// Direction with non-zero intent at sample `t`.
    pub fn direction_at(&self, t: usize) -> Direction {
        let (f, e) = (self.u_flex[t], self.u_extend[t]);
        if f <= 0.0 && e <= 0.0 {
            Direction::Rest
        } else if f >= e {
            Direction::Flex
        } else {
            Direction::Extend
        }
    }

    /// Maximal runs of non-zero intent.
    pub fn intervals(&self) -> Vec<ActiveInterval> {
        let mut out = Vec::new();
        let mut start = None;
        for t in 0..=self.len() {
            let active = t < self.len() && (self.u_flex[t] > 0.0 || self.u_extend[t] > 0.0);
            match (active, start) {
                (true, None) => start = Some(t),
                (false, Some(s)) => {
                    out.push(ActiveInterval { start: s, end: t, label: None });
                    start = None;
                }
                _ => {}
            }
        }
        out
    }
}

/// Trapezoidal intent: every target change ramps linearly over [`RAMP_S`].
#[derive(Debug, Clone)]
pub struct IntentShaper {
    from: [f64; 2],
    target: [f64; 2],
    elapsed: usize,
    ramp: usize,
}

impl IntentShaper {
    pub fn new(rate_hz: f64) -> Self {
        Self { from: [0.0; 2], target: [0.0; 2], elapsed: 0, ramp: ((RAMP_S * rate_hz).round() as usize).max(1) }
    }

    pub fn set(&mut self, direction: Direction, level: f64) {
        let level = level.clamp(0.0, 1.0);
        let target = match direction {
            Direction::Flex => [level, 0.0],
            Direction::Extend => [0.0, level],
            Direction::Rest => [0.0, 0.0],
        };
        if target != self.target {
            self.from = self.current();
            self.target = target;
            self.elapsed = 0;
        }
    }

    pub fn current(&self) -> [f64; 2] {
        let a = (self.elapsed as f64 / self.ramp as f64).min(1.0);
        [0, 1].map(|d| self.from[d] + (self.target[d] - self.from[d]) * a)
    }

    /// Advances one sample and returns the intent for that sample.
    pub fn tick(&mut self) -> [f64; 2] {
        self.elapsed = (self.elapsed + 1).min(self.ramp);
        self.current()
    }
}

/// Kellet's three-pole approximation of 1/f noise, scaled to unit variance.
#[derive(Debug, Clone)]
struct Pink {
    b: [f64; 3],
}

const PINK_A: [f64; 3] = [0.99765, 0.963, 0.57];
const PINK_C: [f64; 3] = [0.099_046, 0.296_516_4, 1.052_691_3];
const PINK_D: f64 = 0.1848;

fn pink_std() -> f64 {
    let mut var = PINK_D * PINK_D;
    for i in 0..3 {
        var += 2.0 * PINK_D * PINK_C[i];
        for j in 0..3 {
            var += PINK_C[i] * PINK_C[j] / (1.0 - PINK_A[i] * PINK_A[j]);
        }
    }
    var.sqrt()
}

impl Pink {
    fn next(&mut self, w: f64, scale: f64) -> f64 {
        let mut s = PINK_D * w;
        for k in 0..3 {
            self.b[k] = PINK_A[k] * self.b[k] + PINK_C[k] * w;
            s += self.b[k];
        }
        s * scale
    }
}

/// Standard deviation of unit white noise after `cascade`.
fn noise_gain(cascade: &BiquadCascade<f64>) -> f64 {
    let n = 8192;
    let nyq = cascade.rate_hz() / 2.0;
    let mean_sq: f64 = (0..n)
        .map(|k| cascade.frequency_response((k as f64 + 0.5) / n as f64 * nyq).norm_sqr())
        .sum::<f64>()
        / n as f64;
    mean_sq.sqrt()
}

fn band_state(kind: FilterDesign, n_ch: usize) -> Result<(StreamingFilterState<f64>, f64)> {
    let cascade = Arc::new(design_butterworth::<f64>(&kind)?);
    let gain = noise_gain(&cascade);
    Ok((StreamingFilterState::new(cascade, n_ch), 1.0 / gain))
}

/// One chunk of generator output.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SynthChunk {
    /// `[n_eeg_ch × k]` at 500 Hz.
    pub eeg: Vec<Vec<f64>>,
    /// `[n_emg_ch × n]` at 1000 Hz.
    pub emg: Vec<Vec<f64>>,
    /// `[n_force_ch × n]` at 1000 Hz, before force sampling.
    pub force: Vec<Vec<f64>>,
    /// Intent per 1000 Hz sample, not delayed.
    pub intent: Vec<[f64; 2]>,
}

/// Streaming source of synthetic EEG, EMG and force.
pub struct SynthGenerator {
    rng: ChaCha8Rng,
    emg_gains: Vec<[f64; 2]>,
    eeg_coupling: Vec<[f64; 2]>,
    eeg_noise: f64,
    emg_noise: f64,
    line_uv: f64,
    line_phase: Vec<f64>,
    eeg_carrier: (StreamingFilterState<f64>, f64),
    eeg_background: (StreamingFilterState<f64>, f64),
    emg_carrier: (StreamingFilterState<f64>, f64),
    force_lp: StreamingFilterState<f64>,
    pink: Vec<Pink>,
    pink_scale: f64,
    delay: VecDeque<[f64; 2]>,
    tick: u64,
    n_force: usize,
}

impl SynthGenerator {
    pub fn new(cfg: &SynthConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let line_phase = (0..cfg.n_emg_ch).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
        let delay_samples = (cfg.delay_ms * EMG_RATE_HZ / 1000.0).round() as usize;
        let force_lp = design_butterworth::<f64>(&FilterDesign::lowpass(4, FORCE_LOWPASS_HZ, EMG_RATE_HZ))?;
        Ok(Self {
            rng,
            emg_gains: cfg.resolved_emg_gains(),
            eeg_coupling: cfg.resolved_eeg_coupling(),
            eeg_noise: 1.0 / cfg.eeg_snr,
            emg_noise: 1.0 / cfg.emg_snr,
            line_uv: cfg.line_noise_uv,
            line_phase,
            eeg_carrier: band_state(FilterDesign::bandpass(4, 15.0, 35.0, EEG_RATE_HZ), cfg.n_eeg_ch)?,
            eeg_background: band_state(FilterDesign::bandpass(4, 15.0, 35.0, EEG_RATE_HZ), cfg.n_eeg_ch)?,
            emg_carrier: band_state(FilterDesign::bandpass(4, 20.0, 450.0, EMG_RATE_HZ), cfg.n_emg_ch)?,
            force_lp: StreamingFilterState::new(Arc::new(force_lp), cfg.n_force_ch()),
            pink: vec![Pink { b: [0.0; 3] }; cfg.n_eeg_ch],
            pink_scale: 1.0 / pink_std(),
            delay: std::iter::repeat_n([0.0; 2], delay_samples).collect(),
            tick: 0,
            n_force: cfg.n_force_ch(),
        })
    }

    pub fn n_eeg_ch(&self) -> usize {
        self.eeg_coupling.len()
    }

    pub fn n_emg_ch(&self) -> usize {
        self.emg_gains.len()
    }

    /// Samples emitted so far at 1000 Hz.
    pub fn ticks(&self) -> u64 {
        self.tick
    }

    fn white(&mut self, rows: usize, cols: usize) -> Vec<Vec<f64>> {
        (0..rows).map(|_| (0..cols).map(|_| StandardNormal.sample(&mut self.rng)).collect()).collect()
    }

    /// Generates one 1000 Hz sample per entry of `intent`. EEG samples fall
    /// on even ticks.
    pub fn generate(&mut self, intent: &[[f64; 2]]) -> Result<SynthChunk> {
        let n = intent.len();
        let n_eeg_ch = self.n_eeg_ch();
        let n_emg_ch = self.n_emg_ch();
        let eeg_ticks: Vec<usize> = (0..n).filter(|&k| (self.tick + k as u64) % 2 == 0).collect();
        let m = eeg_ticks.len();

        // EEG: modulated beta carrier + background beta + pink noise + common mode
        let mut carrier = self.white(n_eeg_ch, m);
        self.eeg_carrier.0.process_in_place(&mut carrier)?;
        let mut background = self.white(n_eeg_ch, m);
        self.eeg_background.0.process_in_place(&mut background)?;
        let pink_white = self.white(n_eeg_ch, m);
        let drift: Vec<f64> = self.white(1, m).remove(0);
        let mut eeg = vec![vec![0.0; m]; n_eeg_ch];
        for (s, &k) in eeg_ticks.iter().enumerate() {
            let [uf, ue] = intent[k];
            let t = (self.tick + k as u64) as f64 / EMG_RATE_HZ;
            let common = self.line_uv * (std::f64::consts::TAU * LINE_HZ * t).sin() + 2.0 * drift[s];
            for i in 0..n_eeg_ch {
                let [af, ae] = self.eeg_coupling[i];
                let beta = (af * uf + ae * ue) * carrier[i][s] * self.eeg_carrier.1
                    + BACKGROUND_BETA * background[i][s] * self.eeg_background.1;
                let pink = self.pink[i].next(pink_white[i][s], self.pink_scale);
                eeg[i][s] = EEG_SCALE * (beta + self.eeg_noise * pink) + common;
            }
        }

        // EMG: delayed drive modulating band-limited bursts, plus noise and mains
        let mut hf = self.white(n_emg_ch, n);
        self.emg_carrier.0.process_in_place(&mut hf)?;
        let noise = self.white(n_emg_ch, n);
        let force_noise = self.white(self.n_force, n);
        let mut emg = vec![vec![0.0; n]; n_emg_ch];
        let mut force = vec![vec![0.0; n]; self.n_force];
        for k in 0..n {
            self.delay.push_back(intent[k]);
            let [uf, ue] = self.delay.pop_front().unwrap_or([0.0; 2]);
            let t = (self.tick + k as u64) as f64 / EMG_RATE_HZ;
            let mut drive_sum = 0.0;
            for j in 0..n_emg_ch {
                let [gf, ge] = self.emg_gains[j];
                let drive = gf * uf + ge * ue;
                drive_sum += drive;
                let mains = self.line_uv * (std::f64::consts::TAU * LINE_HZ * t + self.line_phase[j]).sin();
                emg[j][k] = EMG_SCALE * (drive * hf[j][k] * self.emg_carrier.1 + self.emg_noise * noise[j][k]) + mains;
            }
            for (c, row) in force.iter_mut().enumerate() {
                row[k] = FORCE_GAIN * drive_sum / self.n_force as f64 + FORCE_NOISE * force_noise[c][k];
            }
        }
        self.force_lp.process_in_place(&mut force)?;
        self.tick += n as u64;
        Ok(SynthChunk { eeg, emg, force, intent: intent.to_vec() })
    }
}

/// A generated session with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSession {
    pub session: RawSession<f64>,
    pub truth: GroundTruth,
    /// Ground-truth intervals of non-zero intent, labelled.
    pub intervals: Vec<ActiveInterval>,
}

pub fn synthesize_session(cfg: &SynthConfig) -> Result<SynthSession> {
    synthesize_scripted(cfg, &cfg.protocol())
}

/// Runs the generator through `script`; every labelled step becomes one
/// movement label.
pub fn synthesize_scripted(cfg: &SynthConfig, script: &[ScriptStep]) -> Result<SynthSession> {
    cfg.validate()?;
    let mut shaper = IntentShaper::new(EMG_RATE_HZ);
    let mut intent = Vec::new();
    let mut labels = Vec::new();
    for step in script {
        if !(step.duration_s >= 0.0 && (0.0..=1.0).contains(&step.level)) {
            return Err(Error::InvalidConfig(format!("bad script step {step:?}")));
        }
        shaper.set(step.direction, step.level);
        if let Some(label) = &step.label {
            labels.push(MovementLabel { trial_index: labels.len(), label: label.clone() });
        }
        let n = (step.duration_s * EMG_RATE_HZ).round() as usize;
        intent.extend((0..n).map(|_| shaper.tick()));
    }
    if intent.len() < 2 {
        return Err(Error::InvalidConfig("script shorter than two samples".into()));
    }
    let mut gen = SynthGenerator::new(cfg)?;
    let chunk = gen.generate(&intent)?;

    let n = intent.len();
    let force_len = ((n - 1) as f64 * FORCE_RATE_HZ / EMG_RATE_HZ + 1e-9).floor() as usize + 1;
    let force = chunk
        .force
        .iter()
        .map(|row| {
            (0..force_len)
                .map(|k| {
                    let pos = k as f64 * EMG_RATE_HZ / FORCE_RATE_HZ;
                    let i = (pos.floor() as usize).min(n - 1);
                    let frac = pos - i as f64;
                    if i + 1 < n {
                        row[i] + (row[i + 1] - row[i]) * frac
                    } else {
                        row[i]
                    }
                })
                .collect()
        })
        .collect();

    let session = RawSession {
        subject_id: cfg.subject_id.clone(),
        eeg: MultiChannelSignal::from_rows(EEG_RATE_HZ, "eeg", chunk.eeg)?,
        emg: MultiChannelSignal::from_rows(EMG_RATE_HZ, "emg", chunk.emg)?,
        force: MultiChannelSignal::from_rows(FORCE_RATE_HZ, "force", force)?,
        movement_labels: labels.clone(),
    };
    let truth = GroundTruth {
        rate_hz: ALIGNED_RATE_HZ,
        u_flex: intent.iter().map(|u| u[0]).collect(),
        u_extend: intent.iter().map(|u| u[1]).collect(),
    };
    let mut intervals = truth.intervals();
    for (iv, l) in intervals.iter_mut().zip(&labels) {
        iv.label = Some(l.label.clone());
    }
    Ok(SynthSession { session, truth, intervals })
}

/// Envelope sequences `[n_ch × n_steps]` labelled flex / extend / rest,
/// `n_per_class` of each, drawn from the gain model of `cfg`.
pub fn synthesize_envelope_sequences(
    cfg: &SynthConfig,
    n_per_class: usize,
    n_steps: usize,
    noise: f64,
) -> Result<Vec<(Vec<Vec<f64>>, usize)>> {
    cfg.validate()?;
    let gains = cfg.resolved_emg_gains();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0f_c1a55);
    let mut out = Vec::with_capacity(3 * n_per_class);
    for _ in 0..n_per_class {
        for dir in Direction::ALL {
            let level: f64 = if dir == Direction::Rest { 0.0 } else { rng.random_range(0.3..1.0) };
            let slope: f64 = rng.random_range(-0.3..0.3);
            let seq = gains
                .iter()
                .map(|g| {
                    let gain = match dir {
                        Direction::Flex => g[0],
                        Direction::Extend => g[1],
                        Direction::Rest => 0.0,
                    };
                    (0..n_steps)
                        .map(|s| {
                            let u = (level * (1.0 + slope * (s as f64 / n_steps as f64 - 0.5))).max(0.0);
                            let e: f64 = StandardNormal.sample(&mut rng);
                            (gain * u + noise * (0.5 + e.abs())).max(0.0)
                        })
                        .collect()
                })
                .collect();
            out.push((seq, dir.index()));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{emg_envelope, preprocess_emg};
    use crate::metrics::spearman;

    fn small(seed: u64) -> SynthConfig {
        SynthConfig { seed, n_trials: 4, ..SynthConfig::default() }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = synthesize_session(&small(3)).unwrap();
        let b = synthesize_session(&small(3)).unwrap();
        assert_eq!(a, b);
        let c = synthesize_session(&small(4)).unwrap();
        assert_ne!(a.session.eeg, c.session.eeg);
    }

    #[test]
    fn shapes_and_rates() {
        let cfg = small(1);
        let s = synthesize_session(&cfg).unwrap();
        let total = cfg.rest_duration_s + cfg.n_trials as f64 * (cfg.trial_duration_s + cfg.rest_duration_s);
        let n = (total * 1000.0).round() as usize;
        assert_eq!(s.session.emg.n_samples(), n);
        assert_eq!(s.session.eeg.n_samples(), n.div_ceil(2));
        assert_eq!(s.session.force.n_samples(), ((n - 1) as f64 * 6.6 / 1000.0).floor() as usize + 1);
        assert_eq!((s.session.eeg.n_channels(), s.session.emg.n_channels()), (16, 6));
        assert_eq!(s.session.force.n_channels(), 1);
        s.session.validate().unwrap();
        assert_eq!(s.intervals.len(), 4);
        assert_eq!(s.session.movement_labels.len(), 4);
        let iv = &s.intervals[0];
        assert_eq!(iv.start, 2000);
        assert_eq!(iv.end - iv.start, 3000 - 1);
        assert_eq!(iv.label.as_deref(), Some("flex-low"));
    }

    #[test]
    fn zero_channels_rejected() {
        let cfg = SynthConfig { n_emg_ch: 0, ..small(0) };
        assert!(matches!(synthesize_session(&cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn intent_is_a_trapezoid() {
        let mut sh = IntentShaper::new(1000.0);
        sh.set(Direction::Flex, 1.0);
        let rise: Vec<f64> = (0..300).map(|_| sh.tick()[0]).collect();
        assert!((rise[149] - 0.5).abs() < 1e-12 && rise[299] == 1.0);
        assert!(rise.windows(2).all(|w| w[1] > w[0]));
        sh.set(Direction::Extend, 0.5);
        let mid = (0..150).map(|_| sh.tick()).last().unwrap();
        assert!((mid[0] - 0.5).abs() < 1e-12 && (mid[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn pink_noise_has_unit_variance() {
        let mut p = Pink { b: [0.0; 3] };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let scale = 1.0 / pink_std();
        let xs: Vec<f64> = (0..400_000).map(|_| p.next(StandardNormal.sample(&mut rng), scale)).skip(2000).collect();
        let var = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
        assert!((var - 1.0).abs() < 0.1, "{var}");
    }

    fn envelope_vs_drive(cfg: &SynthConfig, seconds: f64) -> f64 {
        let script = [
            ScriptStep::rest(1.0),
            ScriptStep::hold(Direction::Flex, 1.0, seconds / 2.0 - 2.0),
            ScriptStep::rest(1.5),
            ScriptStep::hold(Direction::Extend, 0.6, seconds / 2.0 - 1.0),
            ScriptStep::rest(0.5),
        ];
        let s = synthesize_scripted(cfg, &script).unwrap();
        let env = emg_envelope(&preprocess_emg(&s.session.emg).unwrap()).unwrap();
        let gains = cfg.resolved_emg_gains();
        let j = (0..gains.len())
            .max_by(|&a, &b| (gains[a][0] + gains[a][1]).total_cmp(&(gains[b][0] + gains[b][1])))
            .unwrap();
        let d = (cfg.delay_ms as usize).min(s.truth.len());
        let drive: Vec<f64> = (0..s.truth.len())
            .map(|t| if t < d { 0.0 } else { gains[j][0] * s.truth.u_flex[t - d] + gains[j][1] * s.truth.u_extend[t - d] })
            .collect();
        spearman(env.channel(j), &drive).unwrap()
    }

    #[test]
    fn envelope_tracks_delayed_intent() {
        let r = envelope_vs_drive(&SynthConfig::default(), 10.0);
        assert!(r >= 0.9, "{r}");
    }

    #[test]
    fn zero_gain_envelope_is_uninformative() {
        let cfg = SynthConfig { emg_gains: vec![[0.0, 0.0]; 6], ..SynthConfig::default() };
        let r = envelope_vs_drive_raw_intent(&cfg);
        assert!(r.abs() < 0.1, "{r}");
    }

    fn envelope_vs_drive_raw_intent(cfg: &SynthConfig) -> f64 {
        let script = [ScriptStep::rest(2.0), ScriptStep::hold(Direction::Flex, 1.0, 5.0), ScriptStep::rest(3.0)];
        let s = synthesize_scripted(cfg, &script).unwrap();
        let env = emg_envelope(&preprocess_emg(&s.session.emg).unwrap()).unwrap();
        spearman(env.channel(0), &s.truth.u_flex).unwrap()
    }

    #[test]
    fn envelope_sequences_are_balanced() {
        let seqs = synthesize_envelope_sequences(&SynthConfig::default(), 5, 10, 0.05).unwrap();
        assert_eq!(seqs.len(), 15);
        for c in 0..3 {
            assert_eq!(seqs.iter().filter(|s| s.1 == c).count(), 5);
        }
        assert!(seqs.iter().all(|(s, _)| s.len() == 6 && s.iter().all(|r| r.len() == 10 && r.iter().all(|v| *v >= 0.0))));
    }
}
