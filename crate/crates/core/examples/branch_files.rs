//! Writes a short branch to a run directory and reads it back.
//!
//! `cargo run --release --example branch_files [dir]`

use choreo::continuation::{start_family, ContinuationSettings};
use choreo::io::{read_branch, read_index, save_branch};
use choreo::nbody::SystemConfig;
use choreo::spectrum::{all_modes, FamilyType};

fn main() -> choreo::Result<()> {
    let dir = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("choreo-branch-files"), Into::into);
    let config = SystemConfig::polygon(7)?;
    let mode = all_modes(&config)?
        .into_iter()
        .find(|m| m.family_type == FamilyType::Planar && m.wave_number == 3)
        .expect("n = 7 has a planar k = 3 mode");
    let settings = ContinuationSettings {
        max_steps: 5,
        ..Default::default()
    };
    let branch = start_family(&mode, &config, &settings)?;
    let path = save_branch(&dir, &branch)?;
    let back = read_branch(&path)?;
    println!("wrote {} ({} orbits)", path.display(), branch.len());
    println!("reloaded identical: {}", back == branch);
    for e in read_index(&dir)? {
        println!("index: {} {} k={} T in [{:.4}, {:.4}]", e.id, e.family_type, e.wave_number, e.period_range.0, e.period_range.1);
    }
    Ok(())
}
