//! Historical volatility of revenue series and the volatility-vs-throughput
//! curve.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::capacity::tps;
use crate::error::{Error, Result};
use crate::exp1::log_spaced;
use crate::exp2::revenue::{simulate_revenue, SimConfig};
use crate::exp2::stream::ValueSource;
use crate::stats;

pub const DEFAULT_SMOOTHING: usize = 5;
pub const CURVE_POINTS: usize = 30;

/// Yearly historical volatility of mining revenue, 2012 to 2021.
pub const REFERENCE_HV: [(u16, f64); 10] = [
    (2012, 0.238111),
    (2013, 0.200857),
    (2014, 0.218010),
    (2015, 0.180948),
    (2016, 0.073051),
    (2017, 0.063965),
    (2018, 0.045616),
    (2019, 0.037647),
    (2020, 0.059485),
    (2021, 0.044932),
];

/// Lowest and highest of [`REFERENCE_HV`].
pub const REFERENCE_BAND: (f64, f64) = (0.037647, 0.238111);

/// Default capacity grid for the curve.
pub fn default_grid() -> Vec<u64> {
    log_spaced(CURVE_POINTS, 1_000, 1_000_000)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Volatility {
    pub hv: f64,
    /// Some revenue was zero and was floored to one satoshi.
    pub degenerate: bool,
}

/// Sample standard deviation of the log-returns `ln(I_i / I_{i-1})`.
pub fn historical_volatility(series: &[u64]) -> Result<Volatility> {
    let v: Vec<f64> = series.iter().map(|&x| x as f64).collect();
    historical_volatility_f64(&v)
}

/// As [`historical_volatility`], for real-valued series. Values below one are
/// floored to one and flag the series as degenerate.
pub fn historical_volatility_f64(series: &[f64]) -> Result<Volatility> {
    if series.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "volatility needs at least 3 values, got {}",
            series.len()
        )));
    }
    if series.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::InvalidInput(
            "revenues must be finite and non-negative".into(),
        ));
    }
    let mut degenerate = false;
    let logs: Vec<f64> = series
        .iter()
        .map(|&x| {
            if x == 0.0 {
                degenerate = true;
                0.0
            } else {
                x.ln()
            }
        })
        .collect();
    let returns: Vec<f64> = logs.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(Volatility {
        hv: stats::sample_std(&returns),
        degenerate,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub capacity: u64,
    pub tps: f64,
    pub hv: f64,
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VolatilityCurve {
    pub points: Vec<CurvePoint>,
}

impl VolatilityCurve {
    /// HV at `tps`, interpolated linearly in log throughput and clamped to the
    /// curve's ends.
    pub fn hv_at(&self, tps: f64) -> Option<f64> {
        let p = &self.points;
        let first = p.first()?;
        let last = p.last()?;
        if tps <= first.tps {
            return Some(first.hv);
        }
        if tps >= last.tps {
            return Some(last.hv);
        }
        let i = p.partition_point(|q| q.tps < tps);
        let (a, b) = (&p[i - 1], &p[i]);
        let t = (tps.ln() - a.tps.ln()) / (b.tps.ln() - a.tps.ln());
        Some(a.hv + t * (b.hv - a.hv))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "capacity,tps,hv,degenerate_flag")?;
        for p in &self.points {
            writeln!(
                w,
                "{},{},{},{}",
                p.capacity,
                p.tps,
                p.hv,
                u8::from(p.degenerate)
            )?;
        }
        Ok(())
    }
}

/// One simulated HV per capacity. Points run in parallel and are collected
/// in grid order.
pub fn volatility_curve(
    grid: &[u64],
    source: &ValueSource,
    cfg: &SimConfig,
) -> Result<VolatilityCurve> {
    if grid.is_empty() || grid[0] == 0 || !grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::Parameter(
            "capacity grid must be positive and strictly increasing".into(),
        ));
    }
    if cfg.blocks < 3 {
        return Err(Error::Parameter(
            "volatility needs at least 3 blocks".into(),
        ));
    }
    let points = grid
        .par_iter()
        .map(|&c| {
            let series = simulate_revenue(c, source, cfg)?;
            let v = historical_volatility(&series.revenues)?;
            Ok(CurvePoint {
                capacity: c,
                tps: tps(c, cfg.block_interval_s)?,
                hv: v.hv,
                degenerate: v.degenerate,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VolatilityCurve { points })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CriticalPoint {
    pub index: usize,
    pub capacity: u64,
    pub tps: f64,
    /// Unsmoothed HV at the minimum.
    pub hv: f64,
    pub smoothed_hv: f64,
    /// False when the smoothed minimum sits at, or ties with, an endpoint.
    pub interior: bool,
}

/// Minimum of the moving-average-smoothed curve.
pub fn find_critical_point(curve: &VolatilityCurve, window: usize) -> Result<CriticalPoint> {
    let p = &curve.points;
    if p.len() < 5 {
        return Err(Error::InvalidInput(format!(
            "critical point needs at least 5 curve points, got {}",
            p.len()
        )));
    }
    let hv: Vec<f64> = p.iter().map(|q| q.hv).collect();
    let smooth = stats::moving_average(&hv, window);
    let (index, &min) = smooth
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let last = smooth.len() - 1;
    let interior = min < smooth[0] && min < smooth[last];
    Ok(CriticalPoint {
        index,
        capacity: p[index].capacity,
        tps: p[index].tps,
        hv: p[index].hv,
        smoothed_hv: min,
        interior,
    })
}
