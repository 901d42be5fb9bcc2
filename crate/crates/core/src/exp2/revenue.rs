//! Pure-fee mining simulation: one revenue figure per block interval.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exp2::stream::ValueSource;
use crate::mempool::DEFAULT_MULTIPLIER;
use crate::tx::FeeRate;

pub const DEFAULT_BLOCKS: u32 = 2_000;
pub const BLOCK_INTERVAL_S: u64 = 600;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimConfig {
    pub blocks: u32,
    pub block_interval_s: u64,
    /// Initial pool size as a multiple of capacity.
    pub multiplier: f64,
    #[serde(skip)]
    pub fee_rate: FeeRate,
    pub seed: u64,
    /// Mean arrivals per interval; defaults to the capacity.
    pub arrivals: Option<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            blocks: DEFAULT_BLOCKS,
            block_interval_s: BLOCK_INTERVAL_S,
            multiplier: DEFAULT_MULTIPLIER,
            fee_rate: FeeRate::DEFAULT,
            seed: 0,
            arrivals: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.blocks == 0 {
            return Err(Error::Parameter("at least one block is required".into()));
        }
        if self.block_interval_s == 0 {
            return Err(Error::Parameter("block interval must be positive".into()));
        }
        if !(self.multiplier >= 0.0 && self.multiplier.is_finite()) {
            return Err(Error::Parameter(format!(
                "multiplier must be non-negative, got {}",
                self.multiplier
            )));
        }
        if let Some(a) = self.arrivals {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(Error::Parameter(format!("arrival mean {a} is invalid")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RevenueSeries {
    pub capacity: u64,
    pub block_interval_s: u64,
    pub blocks: u32,
    pub seed: u64,
    pub revenues: Vec<u64>,
}

/// Simulates `cfg.blocks` intervals at one block capacity.
///
/// The pool starts with `multiplier * capacity` transactions. Each interval
/// adds a Poisson number of arrivals, then the miner takes the `capacity`
/// highest fees. Only fees are tracked since nothing else affects revenue.
pub fn simulate_revenue(
    capacity: u64,
    source: &ValueSource,
    cfg: &SimConfig,
) -> Result<RevenueSeries> {
    if capacity == 0 {
        return Err(Error::Parameter("capacity must be at least 1".into()));
    }
    cfg.validate()?;
    source.validate()?;
    let cap = capacity as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ capacity);
    let mut stream = source.stream();
    let lambda = cfg.arrivals.unwrap_or(capacity as f64);
    let arrivals = if lambda > 0.0 {
        Some(Poisson::new(lambda).map_err(|e| Error::Parameter(e.to_string()))?)
    } else {
        None
    };

    let initial = (cfg.multiplier * capacity as f64).round() as usize;
    let mut pool: Vec<u64> = Vec::with_capacity(initial + 2 * cap);
    for _ in 0..initial {
        pool.push(cfg.fee_rate.fee_for(stream.next_value(&mut rng)));
    }

    let mut revenues = Vec::with_capacity(cfg.blocks as usize);
    for _ in 0..cfg.blocks {
        let k = arrivals.as_ref().map_or(0, |p| p.sample(&mut rng) as usize);
        for _ in 0..k {
            pool.push(cfg.fee_rate.fee_for(stream.next_value(&mut rng)));
        }
        let revenue = if pool.len() <= cap {
            let total = pool.iter().sum();
            pool.clear();
            total
        } else {
            let cut = pool.len() - cap;
            pool.select_nth_unstable(cut);
            let total = pool[cut..].iter().sum();
            pool.truncate(cut);
            total
        };
        revenues.push(revenue);
    }
    Ok(RevenueSeries {
        capacity,
        block_interval_s: cfg.block_interval_s,
        blocks: cfg.blocks,
        seed: cfg.seed,
        revenues,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn replay(values: Vec<u64>) -> ValueSource {
        ValueSource::Replay(Arc::from(values))
    }

    #[test]
    fn length_and_determinism() {
        let src = replay((1..=997).map(|v| v * 7919).collect());
        let cfg = SimConfig {
            blocks: 50,
            seed: 4,
            ..Default::default()
        };
        let a = simulate_revenue(100, &src, &cfg).unwrap();
        let b = simulate_revenue(100, &src, &cfg).unwrap();
        assert_eq!(a.revenues.len(), 50);
        assert_eq!(a, b);
        let c = simulate_revenue(
            100,
            &src,
            &SimConfig {
                seed: 5,
                ..cfg.clone()
            },
        )
        .unwrap();
        assert_ne!(a.revenues, c.revenues);
    }

    #[test]
    fn top_fees_are_taken() {
        // no arrivals, pool of 10 values, capacity 3
        let src = replay(vec![
            500, 1000, 1500, 2000, 2500, 3000, 3500, 4000, 4500, 5000,
        ]);
        let cfg = SimConfig {
            blocks: 4,
            multiplier: 10.0 / 3.0,
            arrivals: Some(0.0),
            ..Default::default()
        };
        let s = simulate_revenue(3, &src, &cfg).unwrap();
        // fees are 1..=10 sat
        assert_eq!(s.revenues, vec![27, 18, 9, 1]);
    }

    #[test]
    fn zero_capacity_rejected() {
        let src = ValueSource::Constant(1);
        assert!(simulate_revenue(0, &src, &SimConfig::default()).is_err());
    }
}
