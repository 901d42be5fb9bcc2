//! Prints the simulated volatility curve for one drift setting.
//!
//! Usage: calibrate_curve [step_sd] [reversion_txs] [blocks] [points] [alpha] [seed]

use std::time::Instant;

use blockpress::exp1::log_spaced;
use blockpress::exp2::{
    find_critical_point, fit_value_sampler, volatility_curve, DriftConfig, SimConfig, TargetStats,
    ValueSource,
};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, d: f64| {
        args.get(i)
            .map_or(d, |s| s.parse().expect("numeric argument"))
    };
    let drift = DriftConfig {
        step_sd: arg(0, 3e-4),
        reversion_txs: arg(1, 1e7),
        chunk: 1000,
    };
    let dist = fit_value_sampler(&TargetStats::MAINNET_2021, arg(4, 2.5)).expect("fit");
    let cfg = SimConfig {
        blocks: arg(2, 2000.0) as u32,
        seed: arg(5, 0.0) as u64,
        ..Default::default()
    };
    let grid = log_spaced(arg(3, 30.0) as usize, 1_000, 1_000_000);
    let start = Instant::now();
    let curve =
        volatility_curve(&grid, &ValueSource::Synthetic { dist, drift }, &cfg).expect("curve");
    println!("capacity,tps,hv");
    for p in &curve.points {
        println!("{},{:.2},{:.4}", p.capacity, p.tps, p.hv);
    }
    let cp = find_critical_point(&curve, 5).expect("critical point");
    println!(
        "# min hv {:.4} (smoothed {:.4}) at tps {:.2}, interior {}, {:.1}s",
        cp.hv,
        cp.smoothed_hv,
        cp.tps,
        cp.interior,
        start.elapsed().as_secs_f64()
    );
}
