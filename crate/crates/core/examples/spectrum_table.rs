//! Planar and vertical modes of the polygonal equilibrium for n = 7, 8, 9.
//!
//! `cargo run --release --example spectrum_table [n...]`

use choreo::nbody::{s_coefficient, SystemConfig};
use choreo::spectrum::all_modes;

fn main() -> choreo::Result<()> {
    let sizes: Vec<usize> = std::env::args()
        .skip(1)
        .map(|a| a.parse().expect("ring sizes are integers"))
        .collect();
    let sizes = if sizes.is_empty() { vec![7, 8, 9] } else { sizes };
    for n in sizes {
        let config = SystemConfig::polygon(n)?;
        println!("n = {n}, s_1 = {:.10}, frame frequency {:.10}", s_coefficient(n, 1)?, config.frame_freq());
        println!("{:>9} {:>3} {:>12} {:>12} {:>5}", "family", "k", "frequency", "2π/freq", "mult");
        for m in all_modes(&config)? {
            println!(
                "{:>9} {:>3} {:>12.6} {:>12.4} {:>5}",
                m.family_type.as_str(),
                m.wave_number,
                m.frequency,
                m.initial_period(),
                m.multiplicity
            );
        }
        println!();
    }
    Ok(())
}
