//! The 7:10 choreography on the n = 4 Axial family and its torus-knot type.
//!
//! `cargo run --release --example torus_knot`

use choreo::choreography::{inertial_states, knot_type, to_inertial, verify_choreography, Resonance};
use choreo::continuation::{branch_switch, locate_period, start_family, ContinuationSettings, EventKind};
use choreo::nbody::SystemConfig;
use choreo::spectrum::{all_modes, FamilyType};

fn main() -> choreo::Result<()> {
    let config = SystemConfig::polygon(4)?;
    let mode = all_modes(&config)?
        .into_iter()
        .find(|m| m.family_type == FamilyType::Vertical && m.wave_number == 2)
        .expect("n = 4 has the vertical k = 2 mode");
    let hip_hop = start_family(
        &mode,
        &config,
        &ContinuationSettings {
            max_period: 6.2,
            ..Default::default()
        },
    )?;
    let bp = hip_hop
        .events
        .iter()
        .position(|e| e.kind == EventKind::BranchPoint)
        .expect("a branch point below T = 6.2");
    let res = Resonance::new(&config, 2, 7, 10)?;
    let axial = branch_switch(
        &hip_hop,
        bp,
        &ContinuationSettings {
            min_period: res.period - 0.2,
            ..Default::default()
        },
        1,
    )?;
    let orbit = locate_period(&axial, res.period)?;
    let states = inertial_states(&orbit, &res, 512)?;
    let path = to_inertial(&orbit, &res, 512)?;
    let report = verify_choreography(&path, &states);
    println!("7:10 orbit at T = {:.8}, winding {}", orbit.period, report.winding);
    println!("same path {:.1e}, rotation {:.1e}", report.same_path, report.rotation);
    match knot_type(&path) {
        Ok(c) => println!(
            "({}, {}) torus knot, R = {:.4}, r = {:.4}, fit deviation {:.3}",
            c.ell, c.m, c.major_radius, c.minor_radius, c.max_deviation
        ),
        Err(e) => println!("no torus: {e}"),
    }
    Ok(())
}
