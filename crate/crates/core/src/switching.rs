//! The binary continuous-time Markov process that selects the active subflow.
//!
//! Each state is held for an `Exp(λ)` waiting time before flipping. Streams
//! are ChaCha8 generators keyed by `(seed, stream id)`, so trajectory `k` of
//! an ensemble sees the same switch times regardless of how work is
//! scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which subflow is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// State 0: the linear (data / diffusion-fidelity) subflow.
    Linear,
    /// State 1: the non-smooth thresholding subflow.
    Threshold,
}

impl Regime {
    pub fn index(self) -> usize {
        match self {
            Regime::Linear => 0,
            Regime::Threshold => 1,
        }
    }

    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            0 => Ok(Regime::Linear),
            1 => Ok(Regime::Threshold),
            _ => Err(Error::invalid(format!("regime must be 0 or 1, got {i}"))),
        }
    }

    pub fn other(self) -> Self {
        match self {
            Regime::Linear => Regime::Threshold,
            Regime::Threshold => Regime::Linear,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchConfig {
    pub lambda: f64,
    pub initial_regime: Regime,
    pub seed: u64,
}

impl SwitchConfig {
    pub fn new(lambda: f64, initial_regime: Regime, seed: u64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!("switching rate must be positive, got {lambda}")));
        }
        Ok(SwitchConfig {
            lambda,
            initial_regime,
            seed,
        })
    }

    /// Lazy, unbounded event stream for trajectory `stream`.
    pub fn events(&self, stream: u64) -> SwitchEvents {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        SwitchEvents {
            rng,
            waiting: Exp::new(self.lambda).expect("rate validated on construction"),
            next: self.initial_regime,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchEvent {
    pub regime: Regime,
    pub duration: f64,
}

/// Infinite iterator of alternating regimes with `Exp(λ)` durations.
#[derive(Debug, Clone)]
pub struct SwitchEvents {
    rng: ChaCha8Rng,
    waiting: Exp<f64>,
    next: Regime,
}

impl Iterator for SwitchEvents {
    type Item = SwitchEvent;

    fn next(&mut self) -> Option<SwitchEvent> {
        let duration = loop {
            let d = self.waiting.sample(&mut self.rng);
            if d > 0.0 {
                break d;
            }
        };
        let regime = self.next;
        self.next = regime.other();
        Some(SwitchEvent { regime, duration })
    }
}

/// A realized switch sequence covering `[0, horizon]`. The last event may
/// overrun the horizon; consumers truncate it.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchSchedule {
    events: Vec<SwitchEvent>,
    horizon: f64,
}

impl SwitchSchedule {
    pub fn new(events: Vec<SwitchEvent>, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::invalid(format!("horizon must be positive, got {horizon}")));
        }
        if events.iter().any(|e| !(e.duration > 0.0) || !e.duration.is_finite()) {
            return Err(Error::invalid("event durations must be positive and finite"));
        }
        if events.windows(2).any(|w| w[0].regime == w[1].regime) {
            return Err(Error::invalid("regimes must alternate"));
        }
        let total: f64 = events.iter().map(|e| e.duration).sum();
        if total < horizon {
            return Err(Error::invalid(format!(
                "events cover {total} but the horizon is {horizon}"
            )));
        }
        Ok(SwitchSchedule { events, horizon })
    }

    pub fn events(&self) -> &[SwitchEvent] {
        &self.events
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Regime of the right-continuous process at time `t`.
    pub fn regime_at(&self, t: f64) -> Option<Regime> {
        let mut start = 0.0;
        for e in &self.events {
            if t < start + e.duration {
                return Some(e.regime);
            }
            start += e.duration;
        }
        None
    }

    /// Fraction of `[0, horizon]` spent in `regime`.
    pub fn occupation_fraction(&self, regime: Regime) -> f64 {
        let mut start = 0.0;
        let mut time = 0.0;
        for e in &self.events {
            if start >= self.horizon {
                break;
            }
            let d = e.duration.min(self.horizon - start);
            if e.regime == regime {
                time += d;
            }
            start += e.duration;
        }
        time / self.horizon
    }
}

/// Draws the schedule of stream 0 up to `horizon`.
pub fn sample_schedule(cfg: &SwitchConfig, horizon: f64) -> Result<SwitchSchedule> {
    sample_schedule_for(cfg, 0, horizon)
}

pub fn sample_schedule_for(cfg: &SwitchConfig, stream: u64, horizon: f64) -> Result<SwitchSchedule> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::invalid(format!("horizon must be positive, got {horizon}")));
    }
    let mut events = Vec::new();
    let mut covered = 0.0;
    for e in cfg.events(stream) {
        covered += e.duration;
        events.push(e);
        if covered >= horizon {
            break;
        }
    }
    SwitchSchedule::new(events, horizon)
}

/// `P(i(t) = 0 | i(0) = i0)` and `P(i(t) = 1 | i(0) = i0)`.
pub fn transition_kernel(t: f64, i0: Regime, lambda: f64) -> Result<[f64; 2]> {
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("time must be nonnegative, got {t}")));
    }
    if !(lambda > 0.0) {
        return Err(Error::invalid(format!("switching rate must be positive, got {lambda}")));
    }
    let decay = (-2.0 * lambda * t).exp();
    let base = (1.0 - decay) / 2.0;
    let mut p = [base, base];
    p[i0.index()] += decay;
    Ok(p)
}
