//! Monte Carlo sweep of compressed block size against block capacity.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::capacity::SizeModel;
use crate::error::{Error, Result};
use crate::mempool::DEFAULT_MULTIPLIER;
use crate::protocols::graphene::{GrapheneConfig, DEFAULT_BETA, DEFAULT_TAU};
use crate::protocols::xthinner::{encode_ids, XthinnerBody};
use crate::protocols::Protocol;
use crate::sketches::hash::mix64;
use crate::stats;

pub const HISTOGRAM_BINS: usize = 20;
pub const MIN_TRIALS: u32 = 30;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepConfig {
    pub capacities: Vec<u64>,
    pub trials: u32,
    pub multiplier: f64,
    pub beta: f64,
    pub tau: f64,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            capacities: log_spaced(40, 1_000, 1_000_000),
            trials: 100,
            multiplier: DEFAULT_MULTIPLIER,
            beta: DEFAULT_BETA,
            tau: DEFAULT_TAU,
            seed: 0,
        }
    }
}

/// `count` points from `lo` to `hi`, evenly spaced in log scale and rounded.
/// Duplicates after rounding are dropped.
pub fn log_spaced(count: usize, lo: u64, hi: u64) -> Vec<u64> {
    if count <= 1 {
        return vec![lo];
    }
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut out: Vec<u64> = (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp().round() as u64)
        .collect();
    out.dedup();
    out
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials < MIN_TRIALS {
            return Err(Error::Parameter(format!(
                "at least {MIN_TRIALS} trials are required, got {}",
                self.trials
            )));
        }
        if self.capacities.is_empty() || self.capacities[0] == 0 {
            return Err(Error::Parameter(
                "capacities must be positive and non-empty".into(),
            ));
        }
        if !self.capacities.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Parameter(
                "capacities must be strictly increasing".into(),
            ));
        }
        if !(self.multiplier >= 1.0 && self.multiplier.is_finite()) {
            return Err(Error::Parameter(format!(
                "multiplier must be at least 1, got {}",
                self.multiplier
            )));
        }
        self.graphene().validate()
    }

    pub fn graphene(&self) -> GrapheneConfig {
        GrapheneConfig {
            tau: self.tau,
            beta: self.beta,
            salt: self.seed,
        }
    }
}

/// RNG seed of one trial, mixing the master seed, capacity and trial index.
pub fn trial_seed(seed: u64, capacity: u64, trial: u32) -> u64 {
    mix64(seed ^ mix64(capacity ^ mix64(trial as u64 ^ 0x7472_6961_6c00_0000)))
}

/// XThinner block size for one random pool.
///
/// Transaction values are drawn independently of ids, so the fee-ranked
/// block is a uniformly random subset of the pool; the first `capacity` of
/// the i.i.d. ids stand in for it. Only the leading 8 bytes of each txid
/// enter the codec, so ids are drawn as `u64` directly.
pub fn xthinner_trial_size(capacity: u64, multiplier: f64, seed: u64) -> u64 {
    let m = ((multiplier * capacity as f64).round() as usize).max(capacity as usize);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<u64> = (0..m).map(|_| rng.random()).collect();
    let mut block = pool[..capacity as usize].to_vec();
    pool.sort_unstable();
    block.sort_unstable();
    let body = XthinnerBody {
        n: capacity,
        stream: encode_ids(&block, &pool),
        order: None,
    };
    (Protocol::XThinner.base_bytes() + body.serialized_len()) as u64
}

/// XThinner size as the mean of `trials` random pools per transaction count.
///
/// Trial seeds depend only on `(seed, n, trial)`, so repeated evaluations at
/// the same `n` agree and bisection over this model is deterministic.
pub fn xthinner_model(multiplier: f64, trials: u32, seed: u64) -> SizeModel {
    let trials = trials.max(1);
    SizeModel::empirical(
        Protocol::XThinner,
        Protocol::XThinner.base_bytes() as u64,
        move |n| {
            if n == 0 {
                return Protocol::XThinner.base_bytes() as u64;
            }
            let total: u64 = (0..trials)
                .map(|t| xthinner_trial_size(n, multiplier, trial_seed(seed, n, t)))
                .sum();
            (total as f64 / trials as f64).round() as u64
        },
    )
}

/// Size model used for protocols whose size does not depend on the draw.
pub fn analytic_model(protocol: Protocol, cfg: &SweepConfig) -> Option<SizeModel> {
    match protocol {
        Protocol::Compact => Some(SizeModel::compact()),
        Protocol::XThin => Some(SizeModel::xthin()),
        Protocol::Ipfs => Some(SizeModel::ipfs()),
        // depends only on (n, m)
        Protocol::Graphene => Some(SizeModel::graphene(cfg.multiplier, cfg.graphene())),
        _ => None,
    }
}

pub fn run_trial(
    protocol: Protocol,
    capacity: u64,
    cfg: &SweepConfig,
    trial_index: u32,
) -> Result<u64> {
    if capacity == 0 {
        return Err(Error::Parameter("capacity must be at least 1".into()));
    }
    match protocol {
        Protocol::XThinner => Ok(xthinner_trial_size(
            capacity,
            cfg.multiplier,
            trial_seed(cfg.seed, capacity, trial_index),
        )),
        Protocol::Dino => Err(Error::NotApplicable(
            "dino is not part of the capacity sweep".into(),
        )),
        p => Ok(analytic_model(p, cfg).unwrap().evaluate(capacity)),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CapacityStats {
    pub capacity: u64,
    pub mean: f64,
    pub std: f64,
    pub min: u64,
    pub max: u64,
    pub histogram: Vec<u32>,
    /// Bytes per trial, in trial order.
    pub samples: Vec<u64>,
}

impl CapacityStats {
    pub fn from_samples(capacity: u64, samples: Vec<u64>) -> Self {
        let xs: Vec<f64> = samples.iter().map(|&s| s as f64).collect();
        CapacityStats {
            capacity,
            mean: stats::mean(&xs),
            std: stats::sample_std(&xs),
            min: samples.iter().copied().min().unwrap_or(0),
            max: samples.iter().copied().max().unwrap_or(0),
            histogram: stats::histogram(&xs, HISTOGRAM_BINS),
            samples,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub protocol: Protocol,
    pub config: SweepConfig,
    pub points: Vec<CapacityStats>,
}

pub fn sweep(protocol: Protocol, cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let jobs: Vec<(u64, u32)> = cfg
        .capacities
        .iter()
        .flat_map(|&c| (0..cfg.trials).map(move |t| (c, t)))
        .collect();
    // collect() keeps job order, so results do not depend on scheduling
    let sizes: Vec<u64> = jobs
        .par_iter()
        .map(|&(c, t)| run_trial(protocol, c, cfg, t))
        .collect::<Result<_>>()?;
    let points = sizes
        .chunks(cfg.trials as usize)
        .zip(&cfg.capacities)
        .map(|(s, &c)| CapacityStats::from_samples(c, s.to_vec()))
        .collect();
    Ok(SweepResult {
        protocol,
        config: cfg.clone(),
        points,
    })
}

impl SweepResult {
    /// Capacity at which mean size first exceeds `budget`, interpolated
    /// linearly between grid points.
    pub fn crossing(&self, budget: f64) -> Option<f64> {
        let p = &self.points;
        let i = p.iter().position(|s| s.mean > budget)?;
        if i == 0 {
            return Some(p[0].capacity as f64);
        }
        let (a, b) = (&p[i - 1], &p[i]);
        let t = (budget - a.mean) / (b.mean - a.mean);
        Some(a.capacity as f64 + t * (b.capacity - a.capacity) as f64)
    }

    pub fn size_model(&self) -> Result<SizeModel> {
        SizeModel::from_points(
            self.protocol,
            self.protocol.base_bytes() as u64,
            self.points.iter().map(|s| (s.capacity, s.mean)).collect(),
        )
    }
}

pub fn write_raw_csv<W: Write>(mut w: W, results: &[SweepResult]) -> std::io::Result<()> {
    writeln!(w, "protocol,capacity,trial,bytes")?;
    for r in results {
        for s in &r.points {
            for (t, b) in s.samples.iter().enumerate() {
                writeln!(w, "{},{},{},{}", r.protocol, s.capacity, t, b)?;
            }
        }
    }
    Ok(())
}

pub fn write_summary_csv<W: Write>(mut w: W, results: &[SweepResult]) -> std::io::Result<()> {
    writeln!(w, "protocol,capacity,mean,std,min,max")?;
    for r in results {
        for s in &r.points {
            writeln!(
                w,
                "{},{},{:.3},{:.3},{},{}",
                r.protocol, s.capacity, s.mean, s.std, s.min, s.max
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(trials: u32) -> SweepConfig {
        SweepConfig {
            capacities: vec![100, 1_000, 5_000],
            trials,
            ..Default::default()
        }
    }

    #[test]
    fn default_grid() {
        let g = log_spaced(40, 1_000, 1_000_000);
        assert_eq!(g.len(), 40);
        assert_eq!((g[0], g[39]), (1_000, 1_000_000));
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn validation() {
        assert!(small(29).validate().is_err());
        let mut c = small(30);
        c.capacities = vec![5, 5];
        assert!(c.validate().is_err());
        assert!(small(30).validate().is_ok());
    }

    #[test]
    fn one_transaction_exceeds_base() {
        let cfg = small(30);
        for p in [Protocol::Graphene, Protocol::XThinner, Protocol::Compact] {
            assert!(run_trial(p, 1, &cfg, 0).unwrap() > 580);
        }
    }

    #[test]
    fn sweep_statistics_are_consistent() {
        let r = sweep(Protocol::XThinner, &small(30)).unwrap();
        for s in &r.points {
            assert_eq!(s.histogram.iter().sum::<u32>(), 30);
            assert!(s.min as f64 <= s.mean && s.mean <= s.max as f64);
        }
        let g = sweep(Protocol::Graphene, &small(30)).unwrap();
        assert!(g.points.iter().all(|s| s.std == 0.0 && s.min == s.max));
    }

    #[test]
    fn sweep_is_reproducible() {
        let a = sweep(Protocol::XThinner, &small(30)).unwrap();
        let b = sweep(Protocol::XThinner, &small(30)).unwrap();
        let (mut x, mut y) = (Vec::new(), Vec::new());
        write_raw_csv(&mut x, &[a]).unwrap();
        write_raw_csv(&mut y, &[b]).unwrap();
        assert_eq!(x, y);
    }
}
