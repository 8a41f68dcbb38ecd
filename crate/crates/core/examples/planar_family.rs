//! Continues the n = 7, k = 3 planar family and checks three of its orbits
//! against direct integration.
//!
//! `cargo run --release --example planar_family [max_period]`

use choreo::continuation::{start_family, ContinuationSettings};
use choreo::nbody::SystemConfig;
use choreo::spectrum::{all_modes, FamilyType};
use choreo::verifier::{cross_check, unfolding_check};

fn main() -> choreo::Result<()> {
    let max_period: f64 = std::env::args().nth(1).map_or(10.0, |a| a.parse().expect("a number"));
    let config = SystemConfig::polygon(7)?;
    let mode = all_modes(&config)?
        .into_iter()
        .find(|m| m.family_type == FamilyType::Planar && m.wave_number == 3)
        .expect("n = 7 has a planar k = 3 mode");
    let settings = ContinuationSettings {
        max_period,
        ..Default::default()
    };
    let branch = start_family(&mode, &config, &settings)?;
    let (lo, hi) = branch.period_range();
    println!("{}: {} orbits, T in [{lo:.5}, {hi:.5}], stopped: {:?}", branch.id, branch.len(), branch.termination);
    println!("linear prediction 2π/ν = {:.5}", mode.initial_period());
    for i in [0, branch.len() / 2, branch.len() - 1] {
        let orbit = &branch.orbits[i];
        let check = cross_check(orbit, 1e-13, 200)?;
        println!(
            "orbit {i:>3} T = {:.6} |λ| = {:.1e} return {:.1e} drift {:.1e} min distance {:.3}",
            orbit.period,
            unfolding_check(orbit).max_abs,
            check.return_residual,
            check.conserved_drift,
            orbit.min_pair_distance()
        );
    }
    Ok(())
}
