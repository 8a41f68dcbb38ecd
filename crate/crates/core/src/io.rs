//! Plain-text persistence for branches, run indices and choreography paths.
//!
//! Every file starts with a magic word and version, followed by a `schema`
//! line naming the layout. Records are one per line, the first token being
//! the record key and the remaining tokens its fields, separated by single
//! spaces. Floats are written with 17 significant digits (`{:.16e}`), which
//! round-trips every finite `f64` exactly.
//!
//! Branch file (`choreo-branch 1`):
//!
//! ```text
//! choreo-branch 1
//! schema header,settings,orbits,events
//! id <id>
//! config <n> <mu>
//! family <type> <k>
//! provenance mode <frequency> <k> <type>
//! provenance switch <parent> <event> <period> <direction>
//! settings <15 fields in declaration order, newton tolerance and iterations last>
//! termination <reason|none>
//! control <step_size> <fast_streak> <since_adapt>
//! orbits <count>
//!   orbit <period> <λ1> <λ2> <λ3> <k> <type> <degree> <intervals>
//!   breakpoints <intervals + 1 values>
//!   node <dim values>            (one line per collocation node)
//!   tangent <len>
//!   t <up to dim values>         (lines covering the tangent in order)
//!   record <step-in> <det-sign> <newton-iterations>
//! events <count>
//!   event <kind> <step>
//!   orbit ... / tangent ...     (as above, without record)
//! end
//! ```
//!
//! Index file `index.txt` (`choreo-index 1`): one `branch` line per branch
//! with id, file name, n, μ, family, k, orbit count, period range,
//! termination and event count.
//!
//! Path file (`choreo-path 1`): header records followed by `columns t x y z`
//! and one sample per line.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::bvp::mesh::Mesh;
use crate::bvp::newton::NewtonSettings;
use crate::bvp::orbit::OrbitSolution;
use crate::choreography::{ChoreographyPath, KnotCertificate, SymmetryReport};
use crate::continuation::{
    ContinuationSettings, EventKind, EventRecord, FamilyBranch, Provenance, Termination,
};
use crate::error::{Error, Result};
use crate::nbody::{SystemConfig, UnfoldingParams};
use crate::spectrum::FamilyType;

pub const BRANCH_MAGIC: &str = "choreo-branch";
pub const INDEX_MAGIC: &str = "choreo-index";
pub const PATH_MAGIC: &str = "choreo-path";
pub const FORMAT_VERSION: u32 = 1;
pub const INDEX_FILE: &str = "index.txt";

const BRANCH_SCHEMA: &str = "header,settings,orbits,events";
const INDEX_SCHEMA: &str = "id file n mu family k orbits t_min t_max termination events";
const PATH_SCHEMA: &str = "header,report,columns,samples";

/// Canonical float text: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn push_line(out: &mut String, key: &str, fields: &[String]) {
    out.push_str(key);
    for f in fields {
        out.push(' ');
        out.push_str(f);
    }
    out.push('\n');
}

fn push_floats(out: &mut String, key: &str, values: &[f64]) {
    out.push_str(key);
    for v in values {
        out.push(' ');
        out.push_str(&fmt_f64(*v));
    }
    out.push('\n');
}

/// Line-oriented reader that checks record keys.
struct Lines<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    line_no: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines().enumerate(),
            line_no: 0,
        }
    }

    fn err(&self, msg: impl AsRef<str>) -> Error {
        Error::Format(format!("line {}: {}", self.line_no, msg.as_ref()))
    }

    fn next_tokens(&mut self) -> Result<Vec<&'a str>> {
        let (i, line) = self.lines.next().ok_or_else(|| Error::Format("unexpected end of file".into()))?;
        self.line_no = i + 1;
        Ok(line.split(' ').collect())
    }

    /// Next record, which must have key `key`; returns its fields.
    fn expect(&mut self, key: &str) -> Result<Vec<&'a str>> {
        let mut tokens = self.next_tokens()?;
        if tokens[0] != key {
            return Err(self.err(format!("expected '{key}', found '{}'", tokens[0])));
        }
        tokens.remove(0);
        Ok(tokens)
    }

    fn expect_n(&mut self, key: &str, count: usize) -> Result<Vec<&'a str>> {
        let fields = self.expect(key)?;
        if fields.len() != count {
            return Err(self.err(format!("'{key}' needs {count} fields, found {}", fields.len())));
        }
        Ok(fields)
    }

    fn parse<T: FromStr>(&self, s: &str) -> Result<T> {
        s.parse::<T>().map_err(|_| self.err(format!("cannot parse '{s}'")))
    }

    fn floats(&self, fields: &[&str]) -> Result<Vec<f64>> {
        fields.iter().map(|s| self.parse::<f64>(s)).collect()
    }

    fn header(&mut self, magic: &str, schema: &str) -> Result<()> {
        let fields = self.expect_n(magic, 1)?;
        let version: u32 = self.parse(fields[0])?;
        if version != FORMAT_VERSION {
            return Err(self.err(format!("unsupported {magic} version {version}")));
        }
        let found = self.expect("schema")?.join(" ");
        if found != schema {
            return Err(self.err(format!("schema mismatch: '{found}'")));
        }
        Ok(())
    }
}

fn write_orbit(out: &mut String, orbit: &OrbitSolution) {
    let mesh = &orbit.mesh;
    let l = orbit.lambdas;
    push_line(
        out,
        "orbit",
        &[
            fmt_f64(orbit.period),
            fmt_f64(l.lambda1),
            fmt_f64(l.lambda2),
            fmt_f64(l.lambda3),
            orbit.wave_number.to_string(),
            orbit.family_type.to_string(),
            mesh.degree().to_string(),
            mesh.intervals().to_string(),
        ],
    );
    push_floats(out, "breakpoints", mesh.breakpoints());
    for row in orbit.nodes.chunks(orbit.dim()) {
        push_floats(out, "node", row);
    }
}

fn read_orbit(r: &mut Lines, config: &SystemConfig) -> Result<OrbitSolution> {
    let f = r.expect_n("orbit", 8)?;
    let head = r.floats(&f[..4])?;
    let wave_number: usize = r.parse(f[4])?;
    let family_type: FamilyType = r.parse(f[5])?;
    let degree: usize = r.parse(f[6])?;
    let intervals: usize = r.parse(f[7])?;
    let bp = r.expect_n("breakpoints", intervals + 1)?;
    let breakpoints = r.floats(&bp)?;
    let mesh = Mesh::from_breakpoints(breakpoints, degree)?;
    let dim = config.dim();
    let mut nodes = Vec::with_capacity(mesh.node_count() * dim);
    for _ in 0..mesh.node_count() {
        let row = r.expect_n("node", dim)?;
        nodes.extend(r.floats(&row)?);
    }
    Ok(OrbitSolution {
        config: *config,
        mesh,
        nodes,
        period: head[0],
        lambdas: UnfoldingParams::new(head[1], head[2], head[3]),
        wave_number,
        family_type,
    })
}

fn write_tangent(out: &mut String, tangent: &[f64], width: usize) {
    push_line(out, "tangent", &[tangent.len().to_string()]);
    for chunk in tangent.chunks(width) {
        push_floats(out, "t", chunk);
    }
}

fn read_tangent(r: &mut Lines) -> Result<Vec<f64>> {
    let f = r.expect_n("tangent", 1)?;
    let len: usize = r.parse(f[0])?;
    let mut tangent = Vec::with_capacity(len);
    while tangent.len() < len {
        let chunk = r.expect("t")?;
        tangent.extend(r.floats(&chunk)?);
    }
    if tangent.len() != len {
        return Err(r.err("tangent length mismatch"));
    }
    Ok(tangent)
}

fn settings_fields(s: &ContinuationSettings) -> Vec<String> {
    vec![
        fmt_f64(s.initial_amplitude),
        fmt_f64(s.initial_step),
        fmt_f64(s.min_step),
        fmt_f64(s.max_step),
        s.max_steps.to_string(),
        fmt_f64(s.min_period),
        fmt_f64(s.max_period),
        fmt_f64(s.collision_radius),
        fmt_f64(s.event_tolerance),
        s.detect_events.to_string(),
        s.intervals.to_string(),
        s.degree.to_string(),
        s.adapt_every.to_string(),
        fmt_f64(s.newton.tolerance),
        s.newton.max_iterations.to_string(),
    ]
}

fn read_settings(r: &mut Lines) -> Result<ContinuationSettings> {
    let f = r.expect_n("settings", 15)?;
    Ok(ContinuationSettings {
        initial_amplitude: r.parse(f[0])?,
        initial_step: r.parse(f[1])?,
        min_step: r.parse(f[2])?,
        max_step: r.parse(f[3])?,
        max_steps: r.parse(f[4])?,
        min_period: r.parse(f[5])?,
        max_period: r.parse(f[6])?,
        collision_radius: r.parse(f[7])?,
        event_tolerance: r.parse(f[8])?,
        detect_events: r.parse(f[9])?,
        intervals: r.parse(f[10])?,
        degree: r.parse(f[11])?,
        adapt_every: r.parse(f[12])?,
        newton: NewtonSettings {
            tolerance: r.parse(f[13])?,
            max_iterations: r.parse(f[14])?,
        },
    })
}

/// Serializes a branch to the branch-file text format.
pub fn branch_to_string(branch: &FamilyBranch) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{BRANCH_MAGIC} {FORMAT_VERSION}");
    let _ = writeln!(out, "schema {BRANCH_SCHEMA}");
    push_line(&mut out, "id", std::slice::from_ref(&branch.id));
    push_line(
        &mut out,
        "config",
        &[branch.config.n().to_string(), fmt_f64(branch.config.mu())],
    );
    push_line(
        &mut out,
        "family",
        &[branch.family_type.to_string(), branch.wave_number.to_string()],
    );
    match &branch.provenance {
        Provenance::Mode {
            frequency,
            wave_number,
            family_type,
        } => push_line(
            &mut out,
            "provenance",
            &["mode".into(), fmt_f64(*frequency), wave_number.to_string(), family_type.to_string()],
        ),
        Provenance::Switch {
            parent,
            event,
            period,
            direction,
        } => push_line(
            &mut out,
            "provenance",
            &[
                "switch".into(),
                parent.clone(),
                event.to_string(),
                fmt_f64(*period),
                direction.to_string(),
            ],
        ),
    }
    push_line(&mut out, "settings", &settings_fields(&branch.settings));
    let termination = branch.termination.map_or("none", |t| t.as_str());
    push_line(&mut out, "termination", &[termination.into()]);
    push_line(
        &mut out,
        "control",
        &[
            fmt_f64(branch.step_size),
            branch.fast_streak.to_string(),
            branch.since_adapt.to_string(),
        ],
    );
    let width = branch.config.dim();
    push_line(&mut out, "orbits", &[branch.orbits.len().to_string()]);
    for (i, orbit) in branch.orbits.iter().enumerate() {
        write_orbit(&mut out, orbit);
        write_tangent(&mut out, &branch.tangents[i], width);
        // the first orbit has no incoming step
        let step = if i == 0 { 0.0 } else { branch.steps[i - 1] };
        push_line(
            &mut out,
            "record",
            &[fmt_f64(step), fmt_f64(branch.det_signs[i]), branch.newton_iterations[i].to_string()],
        );
    }
    push_line(&mut out, "events", &[branch.events.len().to_string()]);
    for event in &branch.events {
        push_line(&mut out, "event", &[event.kind.to_string(), event.step.to_string()]);
        write_orbit(&mut out, &event.orbit);
        write_tangent(&mut out, &event.tangent, width);
    }
    out.push_str("end\n");
    out
}

/// Parses a branch file, checking magic, version and schema.
pub fn branch_from_str(text: &str) -> Result<FamilyBranch> {
    let mut r = Lines::new(text);
    r.header(BRANCH_MAGIC, BRANCH_SCHEMA)?;
    let id = r.expect_n("id", 1)?[0].to_string();
    let f = r.expect_n("config", 2)?;
    let config = SystemConfig::new(r.parse(f[0])?, r.parse(f[1])?)?;
    let f = r.expect_n("family", 2)?;
    let family_type: FamilyType = r.parse(f[0])?;
    let wave_number: usize = r.parse(f[1])?;
    let f = r.expect("provenance")?;
    let provenance = match f.first().copied() {
        Some("mode") if f.len() == 4 => Provenance::Mode {
            frequency: r.parse(f[1])?,
            wave_number: r.parse(f[2])?,
            family_type: r.parse(f[3])?,
        },
        Some("switch") if f.len() == 5 => Provenance::Switch {
            parent: f[1].to_string(),
            event: r.parse(f[2])?,
            period: r.parse(f[3])?,
            direction: r.parse(f[4])?,
        },
        _ => return Err(r.err("malformed provenance")),
    };
    let settings = read_settings(&mut r)?;
    let f = r.expect_n("termination", 1)?;
    let termination = match f[0] {
        "none" => None,
        s => Some(r.parse::<Termination>(s)?),
    };
    let f = r.expect_n("control", 3)?;
    let step_size: f64 = r.parse(f[0])?;
    let fast_streak: usize = r.parse(f[1])?;
    let since_adapt: usize = r.parse(f[2])?;
    let f = r.expect_n("orbits", 1)?;
    let count: usize = r.parse(f[0])?;
    let mut orbits = Vec::with_capacity(count);
    let mut tangents = Vec::with_capacity(count);
    let mut steps = Vec::with_capacity(count.saturating_sub(1));
    let mut det_signs = Vec::with_capacity(count);
    let mut newton_iterations = Vec::with_capacity(count);
    for i in 0..count {
        orbits.push(read_orbit(&mut r, &config)?);
        tangents.push(read_tangent(&mut r)?);
        let f = r.expect_n("record", 3)?;
        if i > 0 {
            steps.push(r.parse(f[0])?);
        }
        det_signs.push(r.parse(f[1])?);
        newton_iterations.push(r.parse(f[2])?);
    }
    let f = r.expect_n("events", 1)?;
    let count: usize = r.parse(f[0])?;
    let mut events = Vec::with_capacity(count);
    for _ in 0..count {
        let f = r.expect_n("event", 2)?;
        let kind: EventKind = r.parse(f[0])?;
        let step: usize = r.parse(f[1])?;
        let orbit = read_orbit(&mut r, &config)?;
        let tangent = read_tangent(&mut r)?;
        events.push(EventRecord {
            kind,
            step,
            orbit,
            tangent,
        });
    }
    r.expect_n("end", 0)?;
    let mut branch = FamilyBranch::from_parts(
        id,
        config,
        family_type,
        wave_number,
        provenance,
        settings,
        orbits,
        tangents,
        steps,
        det_signs,
        newton_iterations,
        events,
        termination,
        step_size,
    );
    branch.fast_streak = fast_streak;
    branch.since_adapt = since_adapt;
    Ok(branch)
}

/// File name used for a branch inside a run directory.
pub fn branch_file_name(id: &str) -> String {
    format!("{id}.branch")
}

pub fn write_branch(path: &Path, branch: &FamilyBranch) -> Result<()> {
    fs::write(path, branch_to_string(branch))?;
    Ok(())
}

pub fn read_branch(path: &Path) -> Result<FamilyBranch> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    branch_from_str(&text).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// One line of a run index.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    pub id: String,
    pub file: String,
    pub n: usize,
    pub mu: f64,
    pub family_type: FamilyType,
    pub wave_number: usize,
    pub orbits: usize,
    pub period_range: (f64, f64),
    pub termination: Option<Termination>,
    pub events: usize,
}

impl IndexEntry {
    pub fn of(branch: &FamilyBranch) -> Self {
        Self {
            id: branch.id.clone(),
            file: branch_file_name(&branch.id),
            n: branch.config.n(),
            mu: branch.config.mu(),
            family_type: branch.family_type,
            wave_number: branch.wave_number,
            orbits: branch.len(),
            period_range: branch.period_range(),
            termination: branch.termination,
            events: branch.events.len(),
        }
    }
}

pub fn index_to_string(entries: &[IndexEntry]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{INDEX_MAGIC} {FORMAT_VERSION}");
    let _ = writeln!(out, "schema {INDEX_SCHEMA}");
    for e in entries {
        push_line(
            &mut out,
            "branch",
            &[
                e.id.clone(),
                e.file.clone(),
                e.n.to_string(),
                fmt_f64(e.mu),
                e.family_type.to_string(),
                e.wave_number.to_string(),
                e.orbits.to_string(),
                fmt_f64(e.period_range.0),
                fmt_f64(e.period_range.1),
                e.termination.map_or("none", |t| t.as_str()).into(),
                e.events.to_string(),
            ],
        );
    }
    out
}

pub fn index_from_str(text: &str) -> Result<Vec<IndexEntry>> {
    let mut r = Lines::new(text);
    r.header(INDEX_MAGIC, INDEX_SCHEMA)?;
    let mut entries = Vec::new();
    while let Ok(f) = r.expect_n("branch", 11) {
        entries.push(IndexEntry {
            id: f[0].to_string(),
            file: f[1].to_string(),
            n: r.parse(f[2])?,
            mu: r.parse(f[3])?,
            family_type: r.parse(f[4])?,
            wave_number: r.parse(f[5])?,
            orbits: r.parse(f[6])?,
            period_range: (r.parse(f[7])?, r.parse(f[8])?),
            termination: match f[9] {
                "none" => None,
                s => Some(r.parse(s)?),
            },
            events: r.parse(f[10])?,
        });
    }
    Ok(entries)
}

/// Writes the branch file into `dir` and adds or replaces its index entry.
pub fn save_branch(dir: &Path, branch: &FamilyBranch) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    if branch.id.is_empty() || branch.id.contains(char::is_whitespace) || branch.id.contains('/') {
        return Err(Error::InvalidConfig(format!("unusable branch id '{}'", branch.id)));
    }
    let path = dir.join(branch_file_name(&branch.id));
    write_branch(&path, branch)?;
    let index_path = dir.join(INDEX_FILE);
    let mut entries = if index_path.exists() {
        index_from_str(&fs::read_to_string(&index_path)?)?
    } else {
        Vec::new()
    };
    let entry = IndexEntry::of(branch);
    match entries.iter_mut().find(|e| e.id == entry.id) {
        Some(slot) => *slot = entry,
        None => entries.push(entry),
    }
    fs::write(index_path, index_to_string(&entries))?;
    Ok(path)
}

pub fn read_index(dir: &Path) -> Result<Vec<IndexEntry>> {
    index_from_str(&fs::read_to_string(dir.join(INDEX_FILE))?)
}

/// Period, size and encounter data per orbit, one row per line.
pub fn diagram_to_string(branch: &FamilyBranch) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {} step period min_distance max_abs_z max_lambda", branch.id);
    for (i, o) in branch.orbits.iter().enumerate() {
        let _ = writeln!(
            out,
            "{i} {} {} {} {}",
            fmt_f64(o.period),
            fmt_f64(o.min_pair_distance()),
            fmt_f64(o.max_abs_z()),
            fmt_f64(o.lambdas.max_abs())
        );
    }
    out
}

/// Choreography export: resonance header, residual report, then `t x y z`.
pub fn path_to_string(
    path: &ChoreographyPath,
    config: &SystemConfig,
    report: &SymmetryReport,
    knot: Option<&KnotCertificate>,
) -> String {
    let res = &path.resonance;
    let mut out = String::new();
    let _ = writeln!(out, "{PATH_MAGIC} {FORMAT_VERSION}");
    let _ = writeln!(out, "schema {PATH_SCHEMA}");
    push_line(&mut out, "source", std::slice::from_ref(&path.source));
    push_line(&mut out, "n", &[config.n().to_string()]);
    push_line(&mut out, "mu", &[fmt_f64(config.mu())]);
    push_line(&mut out, "k", &[res.k.to_string()]);
    push_line(&mut out, "resonance", &[res.ell.to_string(), res.m.to_string()]);
    push_line(&mut out, "k_tilde", &[res.k_tilde.to_string()]);
    push_line(&mut out, "d", &[res.d.to_string()]);
    push_line(&mut out, "period", &[fmt_f64(res.period)]);
    push_line(&mut out, "choreography_period", &[fmt_f64(res.total_period())]);
    push_line(&mut out, "closure", &[fmt_f64(report.closure)]);
    push_line(&mut out, "same_path", &[fmt_f64(report.same_path)]);
    push_line(&mut out, "rotation", &[fmt_f64(report.rotation)]);
    push_line(&mut out, "grouping", &[fmt_f64(report.grouping)]);
    push_line(&mut out, "winding", &[report.winding.to_string()]);
    match knot {
        Some(c) => push_line(
            &mut out,
            "torus_knot",
            &[
                c.ell.to_string(),
                c.m.to_string(),
                fmt_f64(c.major_radius),
                fmt_f64(c.minor_radius),
                fmt_f64(c.max_deviation),
            ],
        ),
        None => push_line(&mut out, "torus_knot", &["none".into()]),
    }
    push_line(&mut out, "columns", &["t".into(), "x".into(), "y".into(), "z".into()]);
    for s in &path.samples {
        push_floats(&mut out, "p", s);
    }
    out
}

/// Reads back the samples of a path file, checking its header.
pub fn path_samples_from_str(text: &str) -> Result<Vec<[f64; 4]>> {
    let mut r = Lines::new(text);
    r.header(PATH_MAGIC, PATH_SCHEMA)?;
    loop {
        let tokens = r.next_tokens()?;
        if tokens[0] == "columns" {
            break;
        }
    }
    let mut samples = Vec::new();
    while let Ok(f) = r.expect_n("p", 4) {
        let v = r.floats(&f)?;
        samples.push([v[0], v[1], v[2], v[3]]);
    }
    Ok(samples)
}
