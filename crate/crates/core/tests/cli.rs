use std::path::Path;
use std::process::{Command, Output};

use choreo::cli::{EXIT_OK, EXIT_USAGE, OUT_ENV};
use choreo::io::read_branch;

fn choreo(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_choreo"))
        .args(args)
        .env(OUT_ENV, out)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn field(text: &str, key: &str) -> Vec<String> {
    let line = text
        .lines()
        .find(|l| l.split(' ').next() == Some(key))
        .unwrap_or_else(|| panic!("no '{key}' line in:\n{text}"));
    line.split(' ').skip(1).map(str::to_string).collect()
}

#[test]
fn spectrum_lists_the_seven_body_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = choreo(&["spectrum", "--n", "7"], dir.path());
    assert_eq!(o.status.code(), Some(EXIT_OK));
    let text = stdout(&o);
    let planar: Vec<(usize, f64)> = text
        .lines()
        .filter(|l| l.starts_with("planar "))
        .map(|l| {
            let f: Vec<&str> = l.split(' ').collect();
            (f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    for (k, freq) in [(2, 1.53960), (3, 1.85058), (4, 1.50806), (2, 0.761477)] {
        assert!(
            planar.iter().any(|&(kk, f)| kk == k && ((f - freq) / freq).abs() < 1e-5),
            "missing k={k} {freq}"
        );
    }
    assert!(dir.path().join("spectrum-n7-mu0.txt").exists());
}

#[test]
fn spectrum_of_the_square_has_the_quartic_root_of_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = choreo(&["spectrum", "--n", "4"], dir.path());
    let row = stdout(&o)
        .lines()
        .find(|l| l.starts_with("vertical 2 "))
        .map(str::to_string)
        .expect("vertical k=2 row");
    let f: f64 = row.split(' ').nth(2).unwrap().parse().unwrap();
    assert!((f - 2f64.powf(0.25)).abs() < 1e-12);
}

#[test]
fn two_bodies_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(choreo(&["spectrum", "--n", "2"], dir.path()).status.code(), Some(EXIT_USAGE));
    assert_eq!(choreo(&["spectrum"], dir.path()).status.code(), Some(EXIT_USAGE));
    assert_eq!(choreo(&["bogus"], dir.path()).status.code(), Some(EXIT_USAGE));
}

#[test]
fn zero_steps_gives_a_single_orbit_branch() {
    let dir = tempfile::tempdir().unwrap();
    let o = choreo(&["continue", "--n", "7", "--k", "3", "--family", "planar", "--steps", "0"], dir.path());
    assert_eq!(o.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(field(&text, "orbits"), ["1"]);
    assert_eq!(field(&text, "termination"), ["max-steps"]);
    let id = &field(&text, "branch")[0];
    let branch = read_branch(&dir.path().join(format!("{id}.branch"))).unwrap();
    assert_eq!(branch.len(), 1);
    assert!(dir.path().join("index.txt").exists());
    assert!(dir.path().join(format!("{id}.diagram")).exists());
}

#[test]
fn out_flag_overrides_the_environment() {
    let env_dir = tempfile::tempdir().unwrap();
    let flag_dir = tempfile::tempdir().unwrap();
    let flag = flag_dir.path().to_str().unwrap();
    let o = choreo(&["spectrum", "--n", "5", "--out", flag], env_dir.path());
    assert_eq!(o.status.code(), Some(EXIT_OK));
    assert!(flag_dir.path().join("spectrum-n5-mu0.txt").exists());
    assert!(!env_dir.path().join("spectrum-n5-mu0.txt").exists());
}

#[test]
fn ambiguous_mode_choice_asks_for_a_frequency() {
    let dir = tempfile::tempdir().unwrap();
    let o = choreo(&["continue", "--n", "7", "--k", "2", "--family", "planar", "--steps", "0"], dir.path());
    assert_eq!(o.status.code(), Some(EXIT_USAGE));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--frequency"));
    let o = choreo(
        &["continue", "--n", "7", "--k", "2", "--family", "planar", "--steps", "0", "--frequency", "0.76"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(EXIT_OK));
    assert!(field(&stdout(&o), "branch")[0].contains("f0.761477"));
}

#[test]
fn degenerate_mode_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let o = choreo(&["continue", "--n", "4", "--k", "1", "--family", "planar"], dir.path());
    assert_ne!(o.status.code(), Some(EXIT_OK));
    assert!(String::from_utf8_lossy(&o.stderr).contains("degenerate"));
}

#[test]
fn continue_scan_extract_on_the_seven_body_k2_family() {
    let dir = tempfile::tempdir().unwrap();
    let o = choreo(
        &[
            "continue", "--n", "7", "--k", "2", "--family", "planar", "--frequency", "1.5396", "--max-period", "7.2",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&o.stderr));
    let id = field(&stdout(&o), "branch")[0].clone();
    let file = dir.path().join(format!("{id}.branch"));
    let file = file.to_str().unwrap();

    let o = choreo(&["scan", "--branch", file, "--lmax", "6"], dir.path());
    assert_eq!(o.status.code(), Some(EXIT_OK));
    assert!(stdout(&o).lines().any(|l| l.starts_with("5:3 ")));

    let o = choreo(&["scan", "--branch", file, "--lmax", "1"], dir.path());
    assert_eq!(o.status.code(), Some(EXIT_OK));

    let o = choreo(&["extract", "--branch", file, "--ell", "5", "--m", "3"], dir.path());
    assert_eq!(o.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(field(&text, "winding"), ["5"]);
    let period: f64 = field(&text, "period")[0].parse().unwrap();
    let total: f64 = field(&text, "choreography_period")[0].parse().unwrap();
    assert!((period - 6.8978).abs() < 1e-3);
    assert!((total - 3.0 * period).abs() < 1e-8);
    let rotation: f64 = field(&text, "rotation")[0].parse().unwrap();
    assert!(rotation < 1e-5);
    let path = dir.path().join(format!("{id}-5-3.path"));
    let samples = choreo::io::path_samples_from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(samples.len(), 3 * 512 + 1);

    // 2·2 − 1 = 3 is not a multiple of 7
    let o = choreo(&["extract", "--branch", file, "--ell", "2", "--m", "1"], dir.path());
    assert_eq!(o.status.code(), Some(EXIT_USAGE));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not a choreography"));

    // 4:1 lies beyond the continued stretch
    let o = choreo(&["extract", "--branch", file, "--ell", "4", "--m", "1"], dir.path());
    assert_eq!(o.status.code(), Some(EXIT_USAGE));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not bracketed"));

    // an impossible tolerance is a verification failure
    let o = choreo(&["extract", "--branch", file, "--ell", "5", "--m", "3", "--tol", "1e-30"], dir.path());
    assert_eq!(o.status.code(), Some(choreo::cli::EXIT_VERIFICATION));
}

#[test]
fn switching_at_a_fold_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let o = choreo(
        &["continue", "--n", "4", "--k", "2", "--family", "vertical", "--max-period", "6.2"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(EXIT_OK));
    let id = field(&stdout(&o), "branch")[0].clone();
    let file = dir.path().join(format!("{id}.branch"));
    let text = std::fs::read_to_string(&file).unwrap();
    assert!(text.contains("\nevent branch-point "));
    let folded = dir.path().join("folded.branch");
    std::fs::write(&folded, text.replacen("\nevent branch-point ", "\nevent fold ", 1)).unwrap();
    let o = choreo(&["switch", "--branch", folded.to_str().unwrap(), "--event", "0"], dir.path());
    assert_eq!(o.status.code(), Some(EXIT_USAGE));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not a branch point"));

    let o = choreo(
        &["switch", "--branch", file.to_str().unwrap(), "--event", "0", "--steps", "3", "--direction", "-1"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(field(&text, "family"), ["axial", "k", "2"]);
    assert!(field(&text, "branch")[0].ends_with("-e0m"));
}

#[test]
fn missing_or_corrupt_branch_files_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = choreo(&["scan", "--branch", "/nonexistent/x.branch"], dir.path());
    assert_eq!(o.status.code(), Some(EXIT_USAGE));
    let bad = dir.path().join("bad.branch");
    std::fs::write(&bad, "choreo-branch 1\nschema header,settings,orbits,events\nid x\nconfig seven 0\n").unwrap();
    let o = choreo(&["scan", "--branch", bad.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(EXIT_USAGE));
}
