//! The 5:3 resonant orbit of the n = 7, k = 2 planar family and the
//! choreography it traces in the inertial frame.
//!
//! `cargo run --release --example choreography_5_3 [path-file]`

use choreo::choreography::{inertial_states, to_inertial, verify_choreography, Resonance};
use choreo::continuation::{locate_period, start_family, ContinuationSettings};
use choreo::io::path_to_string;
use choreo::nbody::SystemConfig;
use choreo::spectrum::{all_modes, FamilyType};

fn main() -> choreo::Result<()> {
    let config = SystemConfig::polygon(7)?;
    let mode = all_modes(&config)?
        .into_iter()
        .find(|m| m.family_type == FamilyType::Planar && m.wave_number == 2 && m.frequency > 1.0)
        .expect("n = 7 has the k = 2 mode near 1.5396");
    let res = Resonance::new(&config, 2, 5, 3)?;
    println!("5:3 resonance at T = {:.10}, k̃ = {}, d = {}", res.period, res.k_tilde, res.d);
    let settings = ContinuationSettings {
        max_period: res.period + 0.3,
        ..Default::default()
    };
    let branch = start_family(&mode, &config, &settings)?;
    let orbit = locate_period(&branch, res.period)?;
    let states = inertial_states(&orbit, &res, 512)?;
    let path = to_inertial(&orbit, &res, 512)?;
    let report = verify_choreography(&path, &states);
    println!("located T = {:.10}, |λ| = {:.1e}", orbit.period, orbit.lambdas.max_abs());
    println!("choreography period {:.6} (3T)", res.total_period());
    println!(
        "closure {:.1e}, same path {:.1e}, Z3 rotation {:.1e}, winding {}",
        report.closure, report.same_path, report.rotation, report.winding
    );
    if let Some(file) = std::env::args().nth(1) {
        std::fs::write(&file, path_to_string(&path, &config, &report, None))?;
        println!("wrote {file}");
    }
    Ok(())
}
