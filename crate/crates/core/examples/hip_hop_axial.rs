//! The n = 4 Hip-Hop family, its first branch point and the Axial family
//! bifurcating there.
//!
//! `cargo run --release --example hip_hop_axial`

use choreo::continuation::{branch_switch, start_family, ContinuationSettings, EventKind};
use choreo::nbody::SystemConfig;
use choreo::spectrum::{all_modes, FamilyType};
use choreo::verifier::symmetry_residuals;

fn main() -> choreo::Result<()> {
    let config = SystemConfig::polygon(4)?;
    let mode = all_modes(&config)?
        .into_iter()
        .find(|m| m.family_type == FamilyType::Vertical && m.wave_number == 2)
        .expect("n = 4 has the vertical k = 2 mode");
    let settings = ContinuationSettings {
        max_period: 6.2,
        ..Default::default()
    };
    let hip_hop = start_family(&mode, &config, &settings)?;
    let mid = symmetry_residuals(&hip_hop.orbits[hip_hop.len() / 2]);
    println!(
        "Hip-Hop: {} orbits, alternating z {:.1e}, half period {:.1e}",
        hip_hop.len(),
        mid.alternating_z,
        mid.half_period
    );
    let bp = hip_hop
        .events
        .iter()
        .position(|e| e.kind == EventKind::BranchPoint)
        .expect("a branch point below T = 6.2");
    println!("branch point at T = {:.6}", hip_hop.events[bp].period());
    let switched = ContinuationSettings {
        max_steps: 20,
        ..Default::default()
    };
    let axial = branch_switch(&hip_hop, bp, &switched, 1)?;
    println!("{} family: {} orbits", axial.family_type, axial.len());
    for orbit in axial.orbits.iter().step_by(5) {
        let r = symmetry_residuals(orbit);
        println!(
            "T = {:.5} max|z| = {:.3} axial {:.1e} half period {:.1e}",
            orbit.period,
            orbit.max_abs_z(),
            r.axial,
            r.half_period
        );
    }
    Ok(())
}
