//! Per-simulation value streams: synthetic draws with slow drift, constant
//! values, or a replayed dataset.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exp2::dist::{ValueDistribution, MAX_VALUE};

/// Mean-one multiplicative drift of the value level along the transaction
/// stream.
///
/// The log level follows an Ornstein-Uhlenbeck process indexed by transaction
/// count, stepped once per `chunk` transactions. Each factor is
/// `exp(L - Var[L]/2)`, so the expected multiplier is exactly one at every
/// position.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DriftConfig {
    /// Log-level standard deviation added per transaction (scaled by the
    /// square root of the chunk length at each step).
    pub step_sd: f64,
    /// Mean-reversion length in transactions; infinity gives a random walk.
    pub reversion_txs: f64,
    pub chunk: u32,
}

impl DriftConfig {
    pub const NONE: DriftConfig = DriftConfig {
        step_sd: 0.0,
        reversion_txs: f64::INFINITY,
        chunk: 1000,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.step_sd >= 0.0 && self.step_sd.is_finite()) {
            return Err(Error::Parameter(format!(
                "drift step sd {} is invalid",
                self.step_sd
            )));
        }
        if !(self.reversion_txs > 0.0) {
            return Err(Error::Parameter("drift reversion must be positive".into()));
        }
        if self.chunk == 0 {
            return Err(Error::Parameter("drift chunk must be at least 1".into()));
        }
        Ok(())
    }

    pub fn is_none(&self) -> bool {
        self.step_sd == 0.0
    }
}

impl Default for DriftConfig {
    fn default() -> Self {
        DriftConfig {
            step_sd: 3e-4,
            reversion_txs: 1e7,
            chunk: 1000,
        }
    }
}

/// Where transaction values come from.
#[derive(Clone, Debug)]
pub enum ValueSource {
    Synthetic {
        dist: ValueDistribution,
        drift: DriftConfig,
    },
    /// Zero-dispersion ablation.
    Constant(u64),
    /// Values replayed in order, wrapping at the end.
    Replay(Arc<[u64]>),
}

impl ValueSource {
    pub fn validate(&self) -> Result<()> {
        match self {
            ValueSource::Synthetic { drift, .. } => drift.validate(),
            ValueSource::Replay(v) if v.is_empty() => {
                Err(Error::InvalidInput("replay dataset is empty".into()))
            }
            _ => Ok(()),
        }
    }

    /// Fresh stream positioned at the start.
    pub fn stream(&self) -> ValueStream<'_> {
        match self {
            ValueSource::Synthetic { dist, drift } => ValueStream::Synthetic {
                dist,
                drift: DriftState::new(drift),
            },
            ValueSource::Constant(v) => ValueStream::Constant(*v),
            ValueSource::Replay(values) => ValueStream::Replay { values, pos: 0 },
        }
    }
}

#[derive(Clone, Debug)]
pub struct DriftState {
    level: f64,
    var: f64,
    phi: f64,
    innovation_sd: f64,
    chunk: u32,
    left: u32,
    factor: f64,
}

impl DriftState {
    fn new(cfg: &DriftConfig) -> Self {
        DriftState {
            level: 0.0,
            var: 0.0,
            phi: (-(cfg.chunk as f64) / cfg.reversion_txs).exp(),
            innovation_sd: cfg.step_sd * (cfg.chunk as f64).sqrt(),
            chunk: cfg.chunk,
            left: cfg.chunk,
            factor: 1.0,
        }
    }

    fn next_factor<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        if self.innovation_sd == 0.0 {
            return 1.0;
        }
        if self.left == 0 {
            let z: f64 = rng.sample(StandardNormal);
            self.level = self.phi * self.level + self.innovation_sd * z;
            self.var = self.phi * self.phi * self.var + self.innovation_sd * self.innovation_sd;
            self.factor = (self.level - self.var / 2.0).exp();
            self.left = self.chunk;
        }
        self.left -= 1;
        self.factor
    }
}

#[derive(Debug)]
pub enum ValueStream<'a> {
    Synthetic {
        dist: &'a ValueDistribution,
        drift: DriftState,
    },
    Constant(u64),
    Replay {
        values: &'a [u64],
        pos: usize,
    },
}

impl ValueStream<'_> {
    pub fn next_value<R: Rng + ?Sized>(&mut self, rng: &mut R) -> u64 {
        match self {
            ValueStream::Synthetic { dist, drift } => {
                let f = drift.next_factor(rng);
                (dist.sample_f64(rng) * f).min(MAX_VALUE).round() as u64
            }
            ValueStream::Constant(v) => *v,
            ValueStream::Replay { values, pos } => {
                let v = values[*pos];
                *pos = (*pos + 1) % values.len();
                v
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn replay_wraps() {
        let src = ValueSource::Replay(Arc::from(vec![1, 2, 3]));
        let mut s = src.stream();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let got: Vec<u64> = (0..7).map(|_| s.next_value(&mut rng)).collect();
        assert_eq!(got, vec![1, 2, 3, 1, 2, 3, 1]);
    }

    #[test]
    fn drift_factor_has_unit_mean() {
        let cfg = DriftConfig {
            step_sd: 0.01,
            reversion_txs: 5_000.0,
            chunk: 10,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let reps = 4000;
        let mut sum = 0.0;
        for _ in 0..reps {
            let mut d = DriftState::new(&cfg);
            let mut f = 1.0;
            for _ in 0..2_000 {
                f = d.next_factor(&mut rng);
            }
            sum += f;
        }
        let m = sum / reps as f64;
        assert!((m - 1.0).abs() < 0.03, "{m}");
    }

    #[test]
    fn no_drift_is_identity() {
        let mut d = DriftState::new(&DriftConfig::NONE);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!((0..5000).all(|_| d.next_factor(&mut rng) == 1.0));
    }
}
