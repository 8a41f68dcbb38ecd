//! ℓ:m resonances inside period intervals of the n = 7, 8, 9 families.
//!
//! `cargo run --release --example resonance_scan [l_max]`

use choreo::choreography::enumerate_resonances;
use choreo::nbody::SystemConfig;

fn main() -> choreo::Result<()> {
    let l_max: i64 = std::env::args().nth(1).map_or(16, |a| a.parse().expect("an integer"));
    // (n, k, observed period interval)
    let families = [
        (7, 2, (4.0811, 28.328)),
        (7, 3, (3.3953, 27.974)),
        (7, 4, (4.1664, 28.499)),
        (8, 2, (5.4804, 14.430)),
        (8, 5, (3.2814, 29.122)),
        (9, 6, (2.7197, 10.008)),
    ];
    for (n, k, interval) in families {
        let config = SystemConfig::polygon(n)?;
        let found = enumerate_resonances(&config, k, interval, l_max);
        let labels: Vec<String> = found
            .iter()
            .map(|r| format!("{}:{} (T={:.4}, k̃={})", r.ell, r.m, r.period, r.k_tilde))
            .collect();
        println!("n={n} k={k} [{:.4}, {:.4}]: {}", interval.0, interval.1, labels.join(", "));
    }
    Ok(())
}
