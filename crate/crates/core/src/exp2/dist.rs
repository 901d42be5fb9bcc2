//! Heavy-tailed transaction value model: a log-normal body with a Pareto tail.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::mempool::ValueSampler;

/// Total supply in satoshi; no single value may exceed it.
pub const MAX_VALUE: f64 = 2.1e15;

pub const DEFAULT_TAIL_ALPHA: f64 = 2.5;

/// Summary statistics a fitted distribution has to reproduce.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TargetStats {
    pub mean: f64,
    pub median: f64,
    /// Values above this count as the tail.
    pub tail_threshold: f64,
    /// Fraction of values above `tail_threshold`.
    pub tail_fraction: f64,
}

impl TargetStats {
    /// Six months of 2021 mainnet transfers.
    pub const MAINNET_2021: TargetStats = TargetStats {
        mean: 612_542_247.0,
        median: 1_782_395.0,
        tail_threshold: 5e11,
        tail_fraction: 0.000463,
    };
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ValueDistribution {
    pub mu: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub x_min: f64,
    /// Probability a draw comes from the Pareto tail.
    pub tail_weight: f64,
}

impl ValueDistribution {
    pub fn lognormal(mu: f64, sigma: f64) -> Self {
        ValueDistribution {
            mu,
            sigma,
            alpha: DEFAULT_TAIL_ALPHA,
            x_min: f64::INFINITY,
            tail_weight: 0.0,
        }
    }

    /// Mixture mean, ignoring the supply clamp.
    pub fn mean(&self) -> f64 {
        let body = (self.mu + self.sigma * self.sigma / 2.0).exp();
        if self.tail_weight == 0.0 {
            return body;
        }
        let tail = self.alpha * self.x_min / (self.alpha - 1.0);
        (1.0 - self.tail_weight) * body + self.tail_weight * tail
    }

    /// `P(v > x)` under the mixture.
    pub fn survival(&self, x: f64) -> f64 {
        let body = lognormal_sf(self.mu, self.sigma, x);
        let tail = if x < self.x_min {
            1.0
        } else {
            (self.x_min / x).powf(self.alpha)
        };
        (1.0 - self.tail_weight) * body + self.tail_weight * tail
    }

    pub fn sample_f64<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let v = if self.tail_weight > 0.0 && rng.random::<f64>() < self.tail_weight {
            let u = 1.0 - rng.random::<f64>();
            self.x_min * u.powf(-1.0 / self.alpha)
        } else {
            let z: f64 = rng.sample(StandardNormal);
            (self.mu + self.sigma * z).exp()
        };
        v.min(MAX_VALUE)
    }
}

impl ValueSampler for ValueDistribution {
    fn sample_value<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.sample_f64(rng).round() as u64
    }
}

fn lognormal_sf(mu: f64, sigma: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    0.5 * erfc((x.ln() - mu) / (sigma * std::f64::consts::SQRT_2))
}

/// Fits a log-normal body and a Pareto tail starting at the tail threshold.
///
/// The body median is pinned to the target median. For a given sigma the
/// tail weight follows from the tail fraction; sigma is then bisected until
/// the mixture mean matches.
pub fn fit_value_sampler(stats: &TargetStats, alpha: f64) -> Result<ValueDistribution> {
    let TargetStats {
        mean,
        median,
        tail_threshold,
        tail_fraction,
    } = *stats;
    if !(mean > 0.0 && median > 0.0 && tail_threshold > 0.0) || !mean.is_finite() {
        return Err(Error::Parameter(
            "target statistics must be positive".into(),
        ));
    }
    if median >= mean {
        return Err(Error::Parameter(format!(
            "median {median} must be below mean {mean}"
        )));
    }
    if !(tail_fraction > 0.0 && tail_fraction < 0.5) {
        return Err(Error::Parameter(format!(
            "tail fraction must lie in (0, 0.5), got {tail_fraction}"
        )));
    }
    if !(alpha > 1.0 && alpha.is_finite()) {
        return Err(Error::Parameter(format!(
            "tail exponent must exceed 1 for a finite mean, got {alpha}"
        )));
    }
    let mu = median.ln();
    let gap = tail_threshold.ln() - mu;
    if gap <= 0.0 {
        return Err(Error::Fit {
            message: "tail threshold lies below the median".into(),
            residual: gap,
        });
    }
    // sigma at which the body alone produces the whole tail fraction
    let z = Normal::standard().inverse_cdf(1.0 - tail_fraction);
    let sigma_max = gap / z;

    let build = |sigma: f64| {
        let body_tail = lognormal_sf(mu, sigma, tail_threshold);
        let w = ((tail_fraction - body_tail) / (1.0 - body_tail)).max(0.0);
        ValueDistribution {
            mu,
            sigma,
            alpha,
            x_min: tail_threshold,
            tail_weight: w,
        }
    };
    let residual = |sigma: f64| build(sigma).mean() / mean - 1.0;

    let (mut lo, mut hi) = (1e-3, sigma_max);
    let (r_lo, r_hi) = (residual(lo), residual(hi));
    if r_lo > 0.0 || r_hi < 0.0 {
        let worst = if r_lo > 0.0 { r_lo } else { r_hi };
        return Err(Error::Fit {
            message: format!(
                "no sigma in [{lo}, {hi:.4}] matches mean {mean} with tail exponent {alpha}"
            ),
            residual: worst,
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if residual(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    let dist = build(0.5 * (lo + hi));
    let r = residual(dist.sigma);
    if r.abs() > 1e-9 {
        return Err(Error::Fit {
            message: "bisection did not converge".into(),
            residual: r,
        });
    }
    Ok(dist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fit_matches_reference_solution() {
        let d = fit_value_sampler(&TargetStats::MAINNET_2021, 2.5).unwrap();
        assert!((d.sigma - 3.151169).abs() < 1e-5, "{d:?}");
        assert!((d.tail_weight - 0.00042868).abs() < 1e-7, "{d:?}");
        assert!((d.mu - 1_782_395f64.ln()).abs() < 1e-12);
        assert!((d.mean() / 612_542_247.0 - 1.0).abs() < 1e-9);
        assert!((d.survival(5e11) - 0.000463).abs() < 1e-12);
    }

    #[test]
    fn other_tail_exponents_fit() {
        let d2 = fit_value_sampler(&TargetStats::MAINNET_2021, 2.0).unwrap();
        assert!((d2.sigma - 3.009161).abs() < 1e-5);
        let d3 = fit_value_sampler(&TargetStats::MAINNET_2021, 3.0).unwrap();
        assert!((d3.sigma - 3.200425).abs() < 1e-5);
    }

    #[test]
    fn infeasible_targets_report_residual() {
        let mut s = TargetStats::MAINNET_2021;
        // tail alone already exceeds the mean
        s.tail_fraction = 0.01;
        match fit_value_sampler(&s, 2.5) {
            Err(Error::Fit { residual, .. }) => assert!(residual > 0.0),
            other => panic!("expected fit error, got {other:?}"),
        }
        s = TargetStats::MAINNET_2021;
        s.median = s.mean * 2.0;
        assert!(matches!(
            fit_value_sampler(&s, 2.5),
            Err(Error::Parameter(_))
        ));
        assert!(fit_value_sampler(&TargetStats::MAINNET_2021, 1.0).is_err());
    }

    #[test]
    fn pure_lognormal_mean_is_closed_form() {
        let d = ValueDistribution::lognormal(2.0, 0.5);
        assert_eq!(d.mean(), (2.0f64 + 0.125).exp());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200_000;
        let m: f64 = (0..n).map(|_| d.sample_f64(&mut rng)).sum::<f64>() / n as f64;
        assert!((m / d.mean() - 1.0).abs() < 0.01, "{m}");
    }

    #[test]
    fn draws_respect_supply_cap() {
        let d = ValueDistribution {
            mu: 30.0,
            sigma: 5.0,
            alpha: 1.1,
            x_min: 1e14,
            tail_weight: 0.5,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..10_000).all(|_| d.sample_f64(&mut rng) <= MAX_VALUE));
    }
}
