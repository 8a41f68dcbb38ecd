//! The Maxwell configuration: a central mass μ inside the ring. Prints the
//! spectrum and continues a short stretch of one planar family.
//!
//! `cargo run --release --example maxwell_spectrum [mu]`

use choreo::continuation::{start_family, ContinuationSettings};
use choreo::nbody::{s_coefficient, SystemConfig};
use choreo::spectrum::{all_modes, FamilyType};

fn main() -> choreo::Result<()> {
    let mu: f64 = std::env::args().nth(1).map_or(200.0, |a| a.parse().expect("a number"));
    let config = SystemConfig::new(7, mu)?;
    println!("n = 7, μ = {mu}, frame frequency √(μ+s₁) = {:.10}", config.frame_freq());
    let modes = all_modes(&config)?;
    let worst_re = modes.iter().map(|m| m.growth.abs()).fold(0.0, f64::max);
    println!("largest |Re| over the modes: {worst_re:.1e}");
    for m in &modes {
        let expected = if m.family_type == FamilyType::Vertical {
            let k = m.wave_number as i64 % 7;
            let s = if k == 0 { 7.0 } else { s_coefficient(7, k)? };
            format!("√(μ+s_k) = {:.10}", (mu + s).sqrt())
        } else {
            String::new()
        };
        println!("{:>9} k={} ν = {:.10} {expected}", m.family_type.as_str(), m.wave_number, m.frequency);
    }
    let mode = modes
        .iter()
        .filter(|m| m.family_type == FamilyType::Planar && m.wave_number == 2)
        .max_by(|a, b| a.frequency.total_cmp(&b.frequency))
        .expect("a planar k = 2 mode");
    let settings = ContinuationSettings {
        max_steps: 10,
        ..Default::default()
    };
    let branch = start_family(mode, &config, &settings)?;
    let (lo, hi) = branch.period_range();
    println!("{}: {} orbits, T in [{lo:.6}, {hi:.6}]", branch.id, branch.len());
    Ok(())
}
