//! The `choreo` command-line front end.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 numerical failure,
//! 4 verification failure. Output files go to `--out`, else `$CHOREO_OUT`,
//! else `./choreo-out`.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::choreography::{enumerate_resonances, inertial_states, knot_type, to_inertial, verify_choreography, Resonance};
use crate::continuation::{branch_switch, locate_period, start_family, ContinuationSettings, FamilyBranch};
use crate::error::Error;
use crate::io::{diagram_to_string, fmt_f64, path_to_string, read_branch, save_branch};
use crate::nbody::SystemConfig;
use crate::spectrum::{all_modes, FamilyType, ModeRecord};
use crate::verifier::unfolding_check;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_VERIFICATION: i32 = 4;

pub const OUT_ENV: &str = "CHOREO_OUT";
pub const DEFAULT_OUT: &str = "choreo-out";

#[derive(Debug, Parser)]
#[command(name = "choreo", version, about = "Lyapunov families of the n-body polygon and their choreographies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Linear modes of the polygonal equilibrium.
    Spectrum(SpectrumArgs),
    /// Continue the family born at one mode.
    Continue(ContinueArgs),
    /// List resonances inside a branch's period range.
    Scan(ScanArgs),
    /// Locate a resonant orbit and export its choreography.
    Extract(ExtractArgs),
    /// Switch onto the branch bifurcating at a recorded branch point.
    Switch(SwitchArgs),
}

#[derive(Debug, Args)]
pub struct OutArg {
    /// Output directory (default: $CHOREO_OUT, then ./choreo-out).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0.0)]
    pub mu: f64,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Planar,
    Vertical,
}

#[derive(Debug, Args)]
pub struct ContinueArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    #[arg(long, default_value_t = 0.0)]
    pub mu: f64,
    /// Pick the mode closest to this frequency when several share `k`.
    #[arg(long)]
    pub frequency: Option<f64>,
    #[arg(long, default_value_t = 500)]
    pub steps: usize,
    #[arg(long)]
    pub max_period: Option<f64>,
    #[arg(long)]
    pub min_period: Option<f64>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long)]
    pub branch: PathBuf,
    #[arg(long, default_value_t = 16)]
    pub lmax: i64,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub branch: PathBuf,
    #[arg(long)]
    pub ell: i64,
    #[arg(long)]
    pub m: i64,
    /// Largest accepted symmetry residual.
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    /// Samples per rotating-frame period.
    #[arg(long, default_value_t = 512)]
    pub samples: usize,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct SwitchArgs {
    #[arg(long)]
    pub branch: PathBuf,
    #[arg(long)]
    pub event: usize,
    #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
    pub direction: i32,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub max_period: Option<f64>,
    #[arg(long)]
    pub min_period: Option<f64>,
    #[command(flatten)]
    pub out: OutArg,
}

/// A failed command: exit code and message.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidConfig(_)
        | Error::Format(_)
        | Error::Io(_)
        | Error::NotCoprime { .. }
        | Error::NotChoreography { .. }
        | Error::NotBranchPoint(_)
        | Error::NotBracketed { .. }
        | Error::DegenerateMode { .. } => EXIT_USAGE,
        Error::NotToroidal(_) => EXIT_VERIFICATION,
        _ => EXIT_NUMERICAL,
    }
}

/// Output directory: flag, then environment, then the default.
pub fn output_dir(flag: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(DEFAULT_OUT),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code. Normal output goes to stdout, diagnostics to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli.command) {
        Ok(text) => {
            print!("{text}");
            EXIT_OK
        }
        Err((text, failure)) => {
            print!("{text}");
            eprintln!("error: {}", failure.message);
            failure.code
        }
    }
}

/// Runs a parsed command, returning stdout text, or partial text and the
/// failure.
pub fn execute(command: &Command) -> std::result::Result<String, (String, Failure)> {
    let mut out = String::new();
    let result = match command {
        Command::Spectrum(a) => cmd_spectrum(a, &mut out),
        Command::Continue(a) => cmd_continue(a, &mut out),
        Command::Scan(a) => cmd_scan(a, &mut out),
        Command::Extract(a) => cmd_extract(a, &mut out),
        Command::Switch(a) => cmd_switch(a, &mut out),
    };
    match result {
        Ok(()) => Ok(out),
        Err(f) => Err((out, f)),
    }
}

fn config_from(n: usize, mu: f64) -> std::result::Result<SystemConfig, Failure> {
    if n < 3 {
        return Err(usage(format!("--n must be at least 3, got {n}")));
    }
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(usage(format!("--mu must be a finite non-negative number, got {mu}")));
    }
    Ok(SystemConfig::new(n, mu)?)
}

fn spectrum_table(modes: &[ModeRecord]) -> String {
    let mut s = String::from("family k frequency initial_period multiplicity\n");
    for m in modes {
        let _ = writeln!(
            s,
            "{} {} {} {} {}",
            m.family_type,
            m.wave_number,
            fmt_f64(m.frequency),
            fmt_f64(m.initial_period()),
            m.multiplicity
        );
    }
    s
}

fn cmd_spectrum(a: &SpectrumArgs, out: &mut String) -> std::result::Result<(), Failure> {
    let config = config_from(a.n, a.mu)?;
    let modes = all_modes(&config)?;
    let table = spectrum_table(&modes);
    out.push_str(&table);
    let dir = output_dir(a.out.out.as_deref());
    fs::create_dir_all(&dir).map_err(Error::from)?;
    let file = dir.join(format!("spectrum-n{}-mu{}.txt", a.n, a.mu));
    let mut text = format!("choreo-spectrum 1\nschema family k frequency initial_period multiplicity\nconfig {} {}\n", a.n, fmt_f64(a.mu));
    for line in table.lines().skip(1) {
        let _ = writeln!(text, "mode {line}");
    }
    fs::write(&file, text).map_err(Error::from)?;
    let _ = writeln!(out, "wrote {}", file.display());
    Ok(())
}

fn select_mode(modes: &[ModeRecord], a: &ContinueArgs) -> std::result::Result<ModeRecord, Failure> {
    let family = match a.family {
        FamilyArg::Planar => FamilyType::Planar,
        FamilyArg::Vertical => FamilyType::Vertical,
    };
    let mut candidates: Vec<&ModeRecord> = modes
        .iter()
        .filter(|m| m.family_type == family && m.wave_number == a.k)
        .collect();
    if let Some(f) = a.frequency {
        candidates.sort_by(|x, y| (x.frequency - f).abs().total_cmp(&(y.frequency - f).abs()));
        candidates.truncate(1);
    }
    match candidates.as_slice() {
        [] => Err(usage(format!("no {} mode with k={}", family, a.k))),
        [m] => Ok((*m).clone()),
        many => {
            // the simple mode, if exactly one is simple
            let simple: Vec<_> = many.iter().filter(|m| m.continuable()).collect();
            if simple.len() == 1 {
                Ok((**simple[0]).clone())
            } else {
                let freqs: Vec<String> = many.iter().map(|m| format!("{:.6}", m.frequency)).collect();
                Err(usage(format!(
                    "several {} k={} modes ({}); choose one with --frequency",
                    family,
                    a.k,
                    freqs.join(", ")
                )))
            }
        }
    }
}

fn summarize(branch: &FamilyBranch, out: &mut String) {
    let (lo, hi) = branch.period_range();
    let _ = writeln!(out, "branch {}", branch.id);
    let _ = writeln!(out, "family {} k {}", branch.family_type, branch.wave_number);
    let _ = writeln!(out, "orbits {}", branch.len());
    let _ = writeln!(out, "period_range {} {}", fmt_f64(lo), fmt_f64(hi));
    let _ = writeln!(
        out,
        "termination {}",
        branch.termination.map_or("none", |t| t.as_str())
    );
    for (i, e) in branch.events.iter().enumerate() {
        let _ = writeln!(out, "event {} {} step {} period {}", i, e.kind, e.step, fmt_f64(e.period()));
    }
}

fn store(branch: &FamilyBranch, dir: &Path, out: &mut String) -> std::result::Result<(), Failure> {
    let path = save_branch(dir, branch)?;
    let diagram = dir.join(format!("{}.diagram", branch.id));
    fs::write(&diagram, diagram_to_string(branch)).map_err(Error::from)?;
    let _ = writeln!(out, "wrote {}", path.display());
    Ok(())
}

fn apply_bounds(s: &mut ContinuationSettings, steps: Option<usize>, min: Option<f64>, max: Option<f64>) {
    if let Some(v) = steps {
        s.max_steps = v;
    }
    if let Some(v) = min {
        s.min_period = v;
    }
    if let Some(v) = max {
        s.max_period = v;
    }
}

fn stopped_by_failure(branch: &FamilyBranch) -> bool {
    branch.termination == Some(crate::continuation::Termination::StepFailure)
}

fn cmd_continue(a: &ContinueArgs, out: &mut String) -> std::result::Result<(), Failure> {
    let config = config_from(a.n, a.mu)?;
    let modes = all_modes(&config)?;
    let mode = select_mode(&modes, a)?;
    let mut settings = ContinuationSettings::default();
    apply_bounds(&mut settings, Some(a.steps), a.min_period, a.max_period);
    settings.validate()?;
    let branch = start_family(&mode, &config, &settings)?;
    summarize(&branch, out);
    store(&branch, &output_dir(a.out.out.as_deref()), out)?;
    if stopped_by_failure(&branch) {
        return Err(Failure {
            code: EXIT_NUMERICAL,
            message: "continuation stopped on a step failure; partial branch written".into(),
        });
    }
    Ok(())
}

fn cmd_scan(a: &ScanArgs, out: &mut String) -> std::result::Result<(), Failure> {
    if a.lmax < 1 {
        return Err(usage("--lmax must be positive"));
    }
    let branch = read_branch(&a.branch)?;
    let range = branch.period_range();
    let list = enumerate_resonances(&branch.config, branch.wave_number as i64, range, a.lmax);
    let _ = writeln!(out, "branch {} period_range {} {}", branch.id, fmt_f64(range.0), fmt_f64(range.1));
    let _ = writeln!(out, "resonance period k_tilde d");
    for r in &list {
        let _ = writeln!(out, "{}:{} {} {} {}", r.ell, r.m, fmt_f64(r.period), r.k_tilde, r.d);
    }
    Ok(())
}

fn cmd_extract(a: &ExtractArgs, out: &mut String) -> std::result::Result<(), Failure> {
    if a.samples < 8 {
        return Err(usage("--samples must be at least 8"));
    }
    let branch = read_branch(&a.branch)?;
    let res = Resonance::new(&branch.config, branch.wave_number as i64, a.ell, a.m)?;
    let orbit = locate_period(&branch, res.period)?;
    let states = inertial_states(&orbit, &res, a.samples)?;
    let path = to_inertial(&orbit, &res, a.samples)?;
    let report = verify_choreography(&path, &states);
    let knot = knot_type(&path).ok();
    let unfolding = unfolding_check(&orbit);
    let _ = writeln!(out, "resonance {}:{} k {} k_tilde {} d {}", res.ell, res.m, res.k, res.k_tilde, res.d);
    let _ = writeln!(out, "period {}", fmt_f64(orbit.period));
    let _ = writeln!(out, "choreography_period {}", fmt_f64(res.total_period()));
    let _ = writeln!(out, "closure {}", fmt_f64(report.closure));
    let _ = writeln!(out, "same_path {}", fmt_f64(report.same_path));
    let _ = writeln!(out, "rotation {}", fmt_f64(report.rotation));
    let _ = writeln!(out, "grouping {}", fmt_f64(report.grouping));
    let _ = writeln!(out, "winding {}", report.winding);
    let _ = writeln!(out, "max_lambda {}", fmt_f64(unfolding.max_abs));
    match &knot {
        Some(c) => {
            let _ = writeln!(out, "torus_knot {} {}", c.ell, c.m);
        }
        None => out.push_str("torus_knot none\n"),
    }
    let dir = output_dir(a.out.out.as_deref());
    fs::create_dir_all(&dir).map_err(Error::from)?;
    let file = dir.join(format!("{}-{}-{}.path", branch.id, a.ell, a.m));
    fs::write(&file, path_to_string(&path, &branch.config, &report, knot.as_ref())).map_err(Error::from)?;
    let _ = writeln!(out, "wrote {}", file.display());
    let worst = report.closure.max(report.same_path).max(report.rotation).max(report.grouping);
    if !(worst <= a.tol) {
        return Err(Failure {
            code: EXIT_VERIFICATION,
            message: format!("largest symmetry residual {worst:.3e} exceeds --tol {:.1e}", a.tol),
        });
    }
    Ok(())
}

fn cmd_switch(a: &SwitchArgs, out: &mut String) -> std::result::Result<(), Failure> {
    if a.direction != 1 && a.direction != -1 {
        return Err(usage("--direction must be 1 or -1"));
    }
    let parent = read_branch(&a.branch)?;
    let mut settings = parent.settings.clone();
    // the parent's period window need not contain the child branch
    settings.min_period = 0.0;
    settings.max_period = ContinuationSettings::default().max_period;
    apply_bounds(&mut settings, a.steps, a.min_period, a.max_period);
    settings.validate()?;
    let child = branch_switch(&parent, a.event, &settings, a.direction)?;
    summarize(&child, out);
    store(&child, &output_dir(a.out.out.as_deref()), out)?;
    if stopped_by_failure(&child) {
        return Err(Failure {
            code: EXIT_NUMERICAL,
            message: "continuation stopped on a step failure; partial branch written".into(),
        });
    }
    Ok(())
}
