//! EEG sources for the live pipeline.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use bmui_core::control::Direction;
use bmui_core::session::{load_session_dir, IntentShaper, SessionStage, SynthConfig, SynthGenerator, EEG_RATE_HZ};
use bmui_core::signal::ALIGNED_RATE_HZ;
use bmui_core::{Error, Result, Signal};

/// `synthetic:<seed>` or `replay:<dir>`.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceSpec {
    Synthetic(u64),
    Replay(PathBuf),
}

impl FromStr for SourceSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            Some(("synthetic", seed)) => seed
                .parse()
                .map(SourceSpec::Synthetic)
                .map_err(|_| Error::InvalidArgument(format!("bad synthetic seed {seed:?}"))),
            Some(("replay", dir)) if !dir.is_empty() => Ok(SourceSpec::Replay(PathBuf::from(dir))),
            _ => Err(Error::InvalidArgument(format!("source {s:?} is neither synthetic:<seed> nor replay:<dir>"))),
        }
    }
}

impl fmt::Display for SourceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceSpec::Synthetic(seed) => write!(f, "synthetic:{seed}"),
            SourceSpec::Replay(dir) => write!(f, "replay:{}", dir.display()),
        }
    }
}

/// Operator intent as last commanded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intent {
    pub direction: Direction,
    pub level: f64,
}

impl Default for Intent {
    fn default() -> Self {
        Self { direction: Direction::Rest, level: 0.0 }
    }
}

/// Raw EEG at the source's native rate plus the intent in force.
#[derive(Debug, Clone)]
pub struct SourceChunk {
    pub eeg: Vec<Vec<f64>>,
    pub intent: Intent,
}

pub trait Source: Send {
    fn n_eeg_ch(&self) -> usize;
    fn rate_hz(&self) -> f64;
    /// Next `duration_ms` of EEG; `None` once exhausted.
    fn next_chunk(&mut self, duration_ms: u32) -> Result<Option<SourceChunk>>;
    fn set_intent(&mut self, intent: Intent) -> Result<()>;
    fn describe(&self) -> String;
}

/// Streams the synthetic generator, steered by operator intent.
pub struct SyntheticSource {
    seed: u64,
    generator: SynthGenerator,
    shaper: IntentShaper,
    intent: Intent,
}

impl SyntheticSource {
    pub fn new(cfg: &SynthConfig) -> Result<Self> {
        Ok(Self {
            seed: cfg.seed,
            generator: SynthGenerator::new(cfg)?,
            shaper: IntentShaper::new(ALIGNED_RATE_HZ),
            intent: Intent::default(),
        })
    }
}

impl Source for SyntheticSource {
    fn n_eeg_ch(&self) -> usize {
        self.generator.n_eeg_ch()
    }

    fn rate_hz(&self) -> f64 {
        EEG_RATE_HZ
    }

    fn next_chunk(&mut self, duration_ms: u32) -> Result<Option<SourceChunk>> {
        let n = (duration_ms as f64 * ALIGNED_RATE_HZ / 1000.0).round() as usize;
        let intent: Vec<[f64; 2]> = (0..n).map(|_| self.shaper.tick()).collect();
        let chunk = self.generator.generate(&intent)?;
        Ok(Some(SourceChunk { eeg: chunk.eeg, intent: self.intent }))
    }

    fn set_intent(&mut self, intent: Intent) -> Result<()> {
        self.shaper.set(intent.direction, intent.level);
        self.intent = intent;
        Ok(())
    }

    fn describe(&self) -> String {
        SourceSpec::Synthetic(self.seed).to_string()
    }
}

/// Plays back the EEG of a raw session directory.
pub struct ReplaySource {
    dir: PathBuf,
    eeg: Signal,
    pos: usize,
    intent: Intent,
}

impl ReplaySource {
    pub fn open(dir: PathBuf) -> Result<Self> {
        let stored = load_session_dir::<f64>(&dir)?;
        if stored.stage != SessionStage::Raw {
            return Err(Error::InvalidSession(format!("{}: replay needs a raw session", dir.display())));
        }
        Ok(Self { dir, eeg: stored.session.eeg, pos: 0, intent: Intent::default() })
    }

    pub fn from_signal(dir: PathBuf, eeg: Signal) -> Self {
        Self { dir, eeg, pos: 0, intent: Intent::default() }
    }
}

impl Source for ReplaySource {
    fn n_eeg_ch(&self) -> usize {
        self.eeg.n_channels()
    }

    fn rate_hz(&self) -> f64 {
        self.eeg.rate_hz()
    }

    fn next_chunk(&mut self, duration_ms: u32) -> Result<Option<SourceChunk>> {
        let n = self.eeg.n_samples();
        if self.pos >= n {
            return Ok(None);
        }
        let len = (duration_ms as f64 * self.eeg.rate_hz() / 1000.0).round().max(1.0) as usize;
        let end = (self.pos + len).min(n);
        let eeg = self.eeg.rows().iter().map(|r| r[self.pos..end].to_vec()).collect();
        self.pos = end;
        Ok(Some(SourceChunk { eeg, intent: self.intent }))
    }

    /// Recorded EEG cannot be steered; the intent is only reported.
    fn set_intent(&mut self, intent: Intent) -> Result<()> {
        self.intent = intent;
        Ok(())
    }

    fn describe(&self) -> String {
        SourceSpec::Replay(self.dir.clone()).to_string()
    }
}

/// Opens a source; synthetic sources use the default subject model.
pub fn open_source(spec: &SourceSpec) -> Result<Box<dyn Source>> {
    Ok(match spec {
        SourceSpec::Synthetic(seed) => Box::new(SyntheticSource::new(&SynthConfig { seed: *seed, ..SynthConfig::default() })?),
        SourceSpec::Replay(dir) => Box::new(ReplaySource::open(dir.clone())?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_parsing() {
        assert_eq!("synthetic:7".parse::<SourceSpec>().unwrap(), SourceSpec::Synthetic(7));
        assert_eq!("replay:/tmp/s".parse::<SourceSpec>().unwrap(), SourceSpec::Replay("/tmp/s".into()));
        for bad in ["synthetic:x", "replay:", "file:/a", "synthetic"] {
            assert!(bad.parse::<SourceSpec>().is_err(), "{bad}");
        }
        assert_eq!(SourceSpec::Synthetic(7).to_string(), "synthetic:7");
    }

    #[test]
    fn synthetic_chunks_are_fifty_ms() {
        let mut s = open_source(&SourceSpec::Synthetic(1)).unwrap();
        let c = s.next_chunk(50).unwrap().unwrap();
        assert_eq!(c.eeg.len(), 16);
        assert!(c.eeg.iter().all(|r| r.len() == 25));
        s.set_intent(Intent { direction: Direction::Flex, level: 1.0 }).unwrap();
        assert_eq!(s.next_chunk(50).unwrap().unwrap().intent.direction, Direction::Flex);
    }

    #[test]
    fn replay_runs_out() {
        let eeg = Signal::from_rows(500.0, "eeg", vec![vec![0.0; 60]]).unwrap();
        let mut s = ReplaySource::from_signal("mem".into(), eeg);
        let lens: Vec<usize> = std::iter::from_fn(|| s.next_chunk(50).unwrap()).map(|c| c.eeg[0].len()).collect();
        assert_eq!(lens, vec![25, 25, 10]);
    }

    #[test]
    fn missing_replay_dir() {
        assert!(matches!(open_source(&SourceSpec::Replay("/nonexistent/x".into())), Err(Error::NotFound(_))));
    }
}
