//! Measures decode failure of assurance-sized IBLTs across difference sizes.
//!
//! cargo run --release -p blockpress --example calibrate_iblt -- [trials] [d...]

use blockpress::sketches::iblt::{assured_cells, cells_with_overhead, Iblt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn failures(d: u64, cells: u64, trials: u32, rng: &mut ChaCha8Rng) -> u32 {
    let mut fails = 0;
    for _ in 0..trials {
        let mut t = Iblt::new(cells, 3, rng.random()).unwrap();
        for _ in 0..d {
            t.insert(rng.random());
        }
        if t.decode().is_err() {
            fails += 1;
        }
    }
    fails
}

fn main() {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<u64>().unwrap());
    let trials = args.next().unwrap_or(20_000) as u32;
    let mut ds: Vec<u64> = args.collect();
    if ds.is_empty() {
        ds = vec![1, 2, 3, 4, 5, 6, 8, 10, 13, 20, 30, 50, 100, 200, 500];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x1b17);
    println!("d,cells,failures,trials,rate,linear_cells,linear_rate");
    for d in ds {
        let cells = assured_cells(d);
        let f = failures(d, cells, trials, &mut rng);
        let lin = cells_with_overhead(d, 1.5, 3);
        let fl = failures(d, lin, trials, &mut rng);
        println!(
            "{d},{cells},{f},{trials},{:.5},{lin},{:.5}",
            f as f64 / trials as f64,
            fl as f64 / trials as f64
        );
    }
}
