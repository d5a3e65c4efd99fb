use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::calibration::{proportional_map, Calibration};
use super::direction::Direction;
use crate::error::{Error, Result};
use crate::neural::{argmax, ClassifierModel};
use crate::scalar::Real;

/// Envelope history seen by the classifier, in control steps.
pub const HISTORY_STEPS: usize = 10;
/// Consecutive wins a new direction needs before it is emitted.
pub const DEBOUNCE_STEPS: usize = 3;

/// Direction and magnitude for one control step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlCommand {
    pub direction: Direction,
    pub magnitude: f64,
    pub t: u64,
}

impl ControlCommand {
    pub fn rest(t: u64) -> Self {
        Self { direction: Direction::Rest, magnitude: 0.0, t }
    }
}

/// Debounce state machine: the emitted direction changes only after a
/// different raw decision has won `steps` consecutive control steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Debouncer {
    steps: usize,
    current: Direction,
    candidate: Option<(Direction, usize)>,
}

impl Debouncer {
    pub fn new(steps: usize) -> Self {
        Self { steps: steps.max(1), current: Direction::Rest, candidate: None }
    }

    pub fn current(&self) -> Direction {
        self.current
    }

    pub fn update(&mut self, raw: Direction) -> Direction {
        if raw == self.current {
            self.candidate = None;
            return self.current;
        }
        let count = match self.candidate {
            Some((d, n)) if d == raw => n + 1,
            _ => 1,
        };
        if count >= self.steps {
            self.current = raw;
            self.candidate = None;
        } else {
            self.candidate = Some((raw, count));
        }
        self.current
    }

    pub fn reset(&mut self) {
        *self = Self::new(self.steps);
    }
}

/// Direction-proportional controller: the classifier picks the direction
/// from the envelope history, the calibrated channel sets the magnitude.
#[derive(Debug, Clone)]
pub struct DpController<T> {
    calib: Calibration,
    n_channels: usize,
    history: VecDeque<Vec<T>>,
    debounce: Debouncer,
    threshold_fraction: f64,
    t: u64,
}

impl<T: Real> DpController<T> {
    pub fn new(calib: Calibration, n_channels: usize) -> Result<Self> {
        if calib.channel_index >= n_channels {
            return Err(Error::Shape(format!(
                "calibrated channel {} out of range for {n_channels} channels",
                calib.channel_index
            )));
        }
        Ok(Self {
            calib,
            n_channels,
            history: VecDeque::with_capacity(HISTORY_STEPS),
            debounce: Debouncer::new(DEBOUNCE_STEPS),
            threshold_fraction: 0.0,
            t: 0,
        })
    }

    pub fn calibration(&self) -> &Calibration {
        &self.calib
    }

    pub fn threshold_fraction(&self) -> f64 {
        self.threshold_fraction
    }

    /// Magnitudes below `fraction` are reported as zero.
    pub fn set_threshold_fraction(&mut self, fraction: f64) -> Result<()> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::InvalidArgument(format!("threshold fraction {fraction} outside [0, 1)")));
        }
        self.threshold_fraction = fraction;
        Ok(())
    }

    /// Control steps taken so far.
    pub fn steps(&self) -> u64 {
        self.t
    }

    /// The history as `[channel][step]`, oldest first.
    pub fn history(&self) -> Vec<Vec<T>> {
        (0..self.n_channels).map(|c| self.history.iter().map(|e| e[c]).collect()).collect()
    }

    pub fn magnitude(&self, env_value: f64) -> f64 {
        let m = proportional_map(env_value, &self.calib);
        if m < self.threshold_fraction {
            0.0
        } else {
            m
        }
    }

    /// Pushes one predicted envelope and returns the fused command, or
    /// [`Error::WarmingUp`] until the history is full.
    pub fn step(&mut self, envelope: &[T], classifier: &ClassifierModel<T>) -> Result<ControlCommand> {
        self.step_with(envelope, |h| Ok(Direction::from_index(argmax(&classifier.logits(h)?)).unwrap_or(Direction::Rest)))
    }

    /// As [`step`](Self::step) with an arbitrary raw direction decision.
    pub fn step_with<F>(&mut self, envelope: &[T], decide: F) -> Result<ControlCommand>
    where
        F: FnOnce(&[Vec<T>]) -> Result<Direction>,
    {
        if envelope.len() != self.n_channels {
            return Err(Error::Shape(format!("expected {} envelope channels, got {}", self.n_channels, envelope.len())));
        }
        if self.history.len() == HISTORY_STEPS {
            self.history.pop_front();
        }
        self.history.push_back(envelope.to_vec());
        let t = self.t;
        self.t += 1;
        if self.history.len() < HISTORY_STEPS {
            return Err(Error::WarmingUp { have: self.history.len(), need: HISTORY_STEPS });
        }
        let raw = decide(&self.history())?;
        let direction = self.debounce.update(raw);
        let magnitude = match direction {
            Direction::Rest => 0.0,
            _ => self.magnitude(envelope[self.calib.channel_index].as_f64()),
        };
        Ok(ControlCommand { direction, magnitude, t })
    }

    /// Clears the history and the debounce state; the step counter keeps running.
    pub fn reset(&mut self) {
        self.history.clear();
        self.debounce.reset();
    }
}
