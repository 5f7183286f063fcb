// SPDX-License-Identifier: Apache-2.0
//! Fits the constant `c` in `pins ≈ c · n^p` for the synthetic generator.
//! Usage: cargo run --release --example rent_calibration [p]

use debugfabric_core::circuits::gen_synthetic;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p: f64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0.7);
    let mut ratios = Vec::new();
    for n in [50usize, 100, 150, 200, 300, 400] {
        for seed in 0..10u64 {
            let pins = gen_synthetic(seed, n, p)?.external_pins();
            let r = pins as f64 / (n as f64).powf(p);
            println!("n={n:4} seed={seed} pins={pins:4} ratio={r:.4}");
            ratios.push(r);
        }
    }
    let c = ratios.iter().sum::<f64>() / ratios.len() as f64;
    println!("c = {c:.4} over {} runs at p = {p}", ratios.len());
    Ok(())
}
