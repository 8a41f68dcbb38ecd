//! Pseudo-arclength continuation of periodic orbit families, with detection
//! of folds and branch points and switching onto bifurcating branches.

use std::fmt;
use std::str::FromStr;

use crate::bvp::linsolve::BorderedFactorization;
use crate::bvp::mesh::{CollocationTables, Mesh, DEFAULT_DEGREE, DEFAULT_INTERVALS, MIN_INTERVALS};
use crate::bvp::newton::{newton_correct, NewtonOutcome, NewtonSettings};
use crate::bvp::orbit::{adapt_mesh, reinterpolate_unknowns, w_inner, OrbitSolution};
use crate::bvp::system::{residual_and_factorization, ContinuationEquation, PhaseConstraints};
use crate::error::{Error, Result};
use crate::nbody::{SystemConfig, COLLISION_GUARD};
use crate::spectrum::{lyapunov_predictor_on, FamilyType, ModeRecord};

/// Newton factorization count above which a step is retried with half the
/// step size.
const SLOW_NEWTON: usize = 10;

/// Inverse-iteration sweeps allowed for the two null-vector starts to agree.
const NULL_SWEEPS: usize = 12;

/// `|cos|` between the two starts accepted as a one-dimensional null space.
const NULL_PARALLEL: f64 = 0.99;

/// Minimum pairwise distance below which the mesh is adapted every step.
const NEAR_COLLISION: f64 = 0.25;

/// A branch terminates in a collision once two bodies come within this
/// multiple of the collision radius; trial orbits inside the radius itself
/// are rejected by the vector field, so the radius is never reached.
pub const COLLISION_FACTOR: f64 = 2.0;

/// Step-size, termination and event controls.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationSettings {
    /// Amplitude of the first orbit along the mode shape.
    pub initial_amplitude: f64,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub max_steps: usize,
    pub min_period: f64,
    pub max_period: f64,
    /// Termination distance between any two bodies.
    pub collision_radius: f64,
    /// Period tolerance when locating branch points and folds.
    pub event_tolerance: f64,
    pub detect_events: bool,
    pub intervals: usize,
    pub degree: usize,
    /// Mesh adaptation every this many accepted steps (0 disables).
    pub adapt_every: usize,
    pub newton: NewtonSettings,
}

impl Default for ContinuationSettings {
    fn default() -> Self {
        Self {
            initial_amplitude: 1e-4,
            initial_step: 0.05,
            min_step: 1e-6,
            max_step: 0.5,
            max_steps: 500,
            min_period: 0.0,
            max_period: 40.0,
            collision_radius: COLLISION_GUARD,
            event_tolerance: 1e-8,
            detect_events: true,
            intervals: DEFAULT_INTERVALS,
            degree: DEFAULT_DEGREE,
            adapt_every: 5,
            newton: NewtonSettings::default(),
        }
    }
}

impl ContinuationSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_step > 0.0 && self.min_step <= self.initial_step && self.initial_step <= self.max_step) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < min_step <= initial_step <= max_step, got {} {} {}",
                self.min_step, self.initial_step, self.max_step
            )));
        }
        if self.intervals < MIN_INTERVALS {
            return Err(Error::InvalidConfig(format!(
                "at least {MIN_INTERVALS} mesh intervals required, got {}",
                self.intervals
            )));
        }
        if !(2..=7).contains(&self.degree) {
            return Err(Error::InvalidConfig(format!("degree {} outside 2..=7", self.degree)));
        }
        if !(self.initial_amplitude > 0.0) || !(self.max_period > self.min_period) {
            return Err(Error::InvalidConfig("bad amplitude or period bounds".into()));
        }
        Ok(())
    }
}

/// Kind of event recorded along a branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    BranchPoint,
    Fold,
    Collision,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::BranchPoint => "branch-point",
            EventKind::Fold => "fold",
            EventKind::Collision => "collision",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "branch-point" => Ok(EventKind::BranchPoint),
            "fold" => Ok(EventKind::Fold),
            "collision" => Ok(EventKind::Collision),
            other => Err(Error::Format(format!("unknown event kind '{other}'"))),
        }
    }
}

/// A located event: the orbit at the event and the branch tangent there.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub kind: EventKind,
    /// Index of the branch orbit preceding the event.
    pub step: usize,
    pub orbit: OrbitSolution,
    pub tangent: Vec<f64>,
}

impl EventRecord {
    pub fn period(&self) -> f64 {
        self.orbit.period
    }
}

/// Why a branch stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    MaxSteps,
    PeriodBound,
    Collision,
    StepFailure,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::MaxSteps => "max-steps",
            Termination::PeriodBound => "period-bound",
            Termination::Collision => "collision",
            Termination::StepFailure => "step-failure",
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Termination {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max-steps" => Ok(Termination::MaxSteps),
            "period-bound" => Ok(Termination::PeriodBound),
            "collision" => Ok(Termination::Collision),
            "step-failure" => Ok(Termination::StepFailure),
            other => Err(Error::Format(format!("unknown termination '{other}'"))),
        }
    }
}

/// Where a branch came from.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Mode {
        frequency: f64,
        wave_number: usize,
        family_type: FamilyType,
    },
    Switch {
        parent: String,
        event: usize,
        period: f64,
        direction: i32,
    },
}

/// An ordered family of orbits with tangents and events.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyBranch {
    pub id: String,
    pub config: SystemConfig,
    pub family_type: FamilyType,
    pub wave_number: usize,
    pub provenance: Provenance,
    pub settings: ContinuationSettings,
    pub orbits: Vec<OrbitSolution>,
    /// Unit tangent (in the `W` inner product) at each orbit, on its mesh.
    pub tangents: Vec<Vec<f64>>,
    /// Arclength step taken from orbit `k` to orbit `k + 1`.
    pub steps: Vec<f64>,
    /// Determinant sign of the bordered Jacobian at each orbit.
    pub det_signs: Vec<f64>,
    pub newton_iterations: Vec<usize>,
    pub events: Vec<EventRecord>,
    pub termination: Option<Termination>,
    /// Current step size.
    pub step_size: f64,
    pub(crate) fast_streak: usize,
    pub(crate) since_adapt: usize,
}

impl FamilyBranch {
    pub fn len(&self) -> usize {
        self.orbits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orbits.is_empty()
    }

    pub fn last(&self) -> &OrbitSolution {
        self.orbits.last().expect("non-empty branch")
    }

    pub fn periods(&self) -> Vec<f64> {
        self.orbits.iter().map(|o| o.period).collect()
    }

    /// Smallest and largest period on the branch.
    pub fn period_range(&self) -> (f64, f64) {
        self.orbits.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), o| {
            (lo.min(o.period), hi.max(o.period))
        })
    }

    pub fn branch_points(&self) -> impl Iterator<Item = (usize, &EventRecord)> {
        self.events
            .iter()
            .enumerate()
            .filter(|(_, e)| e.kind == EventKind::BranchPoint)
    }

    /// Assembles a branch from stored parts (used by the file reader).
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        id: String,
        config: SystemConfig,
        family_type: FamilyType,
        wave_number: usize,
        provenance: Provenance,
        settings: ContinuationSettings,
        orbits: Vec<OrbitSolution>,
        tangents: Vec<Vec<f64>>,
        steps: Vec<f64>,
        det_signs: Vec<f64>,
        newton_iterations: Vec<usize>,
        events: Vec<EventRecord>,
        termination: Option<Termination>,
        step_size: f64,
    ) -> Self {
        Self {
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
            fast_streak: 0,
            since_adapt: 0,
        }
    }
}

fn tables_for(orbit: &OrbitSolution) -> CollocationTables {
    CollocationTables::new(orbit.mesh.degree())
}

fn w_norm(orbit: &OrbitSolution, v: &[f64]) -> f64 {
    w_inner(&orbit.mesh, &tables_for(orbit), orbit.dim(), v, v).sqrt()
}

/// Solves `J t = e_last` and scales `t` to unit `W`-norm. With the last
/// row of `J` equal to `W τ`, the result satisfies `⟨t, τ⟩_W > 0`.
fn tangent_from(fac: &BorderedFactorization, orbit: &OrbitSolution) -> Vec<f64> {
    let mut rhs = vec![0.0; orbit.unknown_count()];
    *rhs.last_mut().unwrap() = 1.0;
    let mut t = fac.solve(&rhs);
    let norm = w_norm(orbit, &t);
    t.iter_mut().for_each(|v| *v /= norm);
    t
}

/// Result of one predictor–corrector step.
struct StepResult {
    outcome: NewtonOutcome,
    tangent: Vec<f64>,
}

fn corrected_step(
    base: &OrbitSolution,
    tangent: &[f64],
    ds: f64,
    newton: &NewtonSettings,
) -> Result<StepResult> {
    let u0 = base.to_unknowns();
    let pred: Vec<f64> = u0.iter().zip(tangent).map(|(a, b)| a + ds * b).collect();
    let guess = base.with_unknowns(&pred);
    let constraints = PhaseConstraints::new(base.clone());
    let cont = ContinuationEquation::pseudo_arclength(base, tangent, ds);
    let outcome = newton_correct(&guess, &constraints, &cont, newton)?;
    let t = tangent_from(&outcome.factorization, &outcome.orbit);
    Ok(StepResult { outcome, tangent: t })
}

/// Re-solves an orbit on its own mesh with itself as phase reference,
/// pinned by the continuation equation along `tangent`.
fn recorrect_in_place(
    orbit: &OrbitSolution,
    tangent: &[f64],
    newton: &NewtonSettings,
) -> Result<StepResult> {
    corrected_step(orbit, tangent, 0.0, newton)
}

fn branch_id(config: &SystemConfig, family: FamilyType, k: usize, freq: f64) -> String {
    format!("n{}-mu{}-{}-k{}-f{:.6}", config.n(), config.mu(), family, k, freq)
}

/// Direction vector of the linear mode in unknown layout (zero parameters).
fn mode_direction(predictor: &OrbitSolution, eq_orbit: &OrbitSolution) -> Vec<f64> {
    let mut dir: Vec<f64> = predictor
        .nodes
        .iter()
        .zip(&eq_orbit.nodes)
        .map(|(a, b)| a - b)
        .collect();
    dir.extend_from_slice(&[0.0; 4]);
    let norm = w_norm(predictor, &dir);
    dir.iter_mut().for_each(|v| *v /= norm);
    dir
}

/// Corrects the first orbit of a family from the Lyapunov predictor.
pub fn first_orbit(mode: &ModeRecord, config: &SystemConfig, settings: &ContinuationSettings) -> Result<FamilyBranch> {
    settings.validate()?;
    if !mode.continuable() {
        return Err(Error::DegenerateMode {
            frequency: mode.frequency,
            multiplicity: mode.multiplicity,
        });
    }
    let mesh = Mesh::uniform(settings.intervals, settings.degree)?;
    let (predictor, _) = lyapunov_predictor_on(mode, settings.initial_amplitude, config, mesh.clone());
    let (eq_orbit, _) = lyapunov_predictor_on(mode, 0.0, config, mesh);
    let dir = mode_direction(&predictor, &eq_orbit);
    let constraints = PhaseConstraints::new(predictor.clone());
    let cont = ContinuationEquation::pseudo_arclength(&predictor, &dir, 0.0);
    let outcome = newton_correct(&predictor, &constraints, &cont, &settings.newton)?;
    let tangent = tangent_from(&outcome.factorization, &outcome.orbit);
    let det = outcome.factorization.det_sign();
    Ok(FamilyBranch {
        id: branch_id(config, mode.family_type, mode.wave_number, mode.frequency),
        config: *config,
        family_type: mode.family_type,
        wave_number: mode.wave_number,
        provenance: Provenance::Mode {
            frequency: mode.frequency,
            wave_number: mode.wave_number,
            family_type: mode.family_type,
        },
        settings: settings.clone(),
        orbits: vec![outcome.orbit],
        tangents: vec![tangent],
        steps: Vec::new(),
        det_signs: vec![det],
        newton_iterations: vec![outcome.iterations],
        events: Vec::new(),
        termination: None,
        step_size: settings.initial_step,
        fast_streak: 0,
        since_adapt: 0,
    })
}

/// Starts a family at a non-degenerate mode and continues it until a
/// termination condition is met.
pub fn start_family(mode: &ModeRecord, config: &SystemConfig, settings: &ContinuationSettings) -> Result<FamilyBranch> {
    let mut branch = first_orbit(mode, config, settings)?;
    continue_branch(&mut branch, settings);
    Ok(branch)
}

/// Outcome of a single continuation step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Accepted,
    Terminated(Termination),
}

/// Advances the branch until it terminates; the reason is stored on the
/// branch.
pub fn continue_branch(branch: &mut FamilyBranch, settings: &ContinuationSettings) {
    if branch.termination.is_some() {
        return;
    }
    if let Some(reason) = check_termination(branch, settings) {
        branch.termination = Some(reason);
        return;
    }
    loop {
        match arclength_step(branch, settings) {
            Ok(StepOutcome::Accepted) => {}
            Ok(StepOutcome::Terminated(reason)) => {
                branch.termination = Some(reason);
                return;
            }
            Err(_) => {
                branch.termination = Some(Termination::StepFailure);
                return;
            }
        }
    }
}

fn check_termination(branch: &FamilyBranch, settings: &ContinuationSettings) -> Option<Termination> {
    let last = branch.last();
    if last.min_pair_distance() < COLLISION_FACTOR * settings.collision_radius {
        return Some(Termination::Collision);
    }
    if last.period > settings.max_period || last.period < settings.min_period {
        return Some(Termination::PeriodBound);
    }
    if branch.steps.len() >= settings.max_steps {
        return Some(Termination::MaxSteps);
    }
    None
}

/// One predictor–corrector step with step-size control and event detection.
pub fn arclength_step(branch: &mut FamilyBranch, settings: &ContinuationSettings) -> Result<StepOutcome> {
    if let Some(reason) = check_termination(branch, settings) {
        return Ok(StepOutcome::Terminated(reason));
    }
    let base = branch.last().clone();
    let tangent = branch.tangents.last().unwrap().clone();
    let mut ds = branch.step_size;
    let accepted = loop {
        if let Ok(step) = corrected_step(&base, &tangent, ds, &settings.newton) {
            let ok = step.outcome.iterations <= SLOW_NEWTON && step_is_acceptable(&base, &tangent, ds, &step);
            if ok {
                break step;
            }
        }
        ds *= 0.5;
        branch.fast_streak = 0;
        if ds < settings.min_step {
            return Err(Error::StepFailure { step: ds });
        }
    };
    let k = branch.orbits.len() - 1;
    let new_sign = accepted.outcome.factorization.det_sign();
    let old_t = tangent[base.nodes.len()];
    let new_t = accepted.tangent[base.nodes.len()];
    let sign_before = branch.det_signs[k];

    if accepted.outcome.iterations <= 4 {
        branch.fast_streak += 1;
    } else {
        branch.fast_streak = 0;
    }
    branch.step_size = if branch.fast_streak >= 4 {
        branch.fast_streak = 0;
        (ds * 1.3).min(settings.max_step)
    } else {
        ds
    };

    let mut orbit = accepted.outcome.orbit;
    let mut new_tangent = accepted.tangent;
    let mut stored_sign = new_sign;
    let mut iterations = accepted.outcome.iterations;
    branch.since_adapt += 1;
    // near collisions the solution profile changes quickly between steps
    let crowded = orbit.min_pair_distance() < NEAR_COLLISION;
    if settings.adapt_every > 0 && (branch.since_adapt >= settings.adapt_every || crowded) {
        branch.since_adapt = 0;
        let adapted = adapt_mesh(&orbit, orbit.mesh.intervals())?;
        let t_adapted = reinterpolate_unknowns(&orbit.mesh, &new_tangent, orbit.dim(), &adapted.mesh);
        if let Ok(re) = recorrect_in_place(&adapted, &t_adapted, &settings.newton) {
            stored_sign = re.outcome.factorization.det_sign();
            orbit = re.outcome.orbit;
            new_tangent = re.tangent;
            iterations += re.outcome.iterations;
        }
    }

    if settings.detect_events {
        if sign_before * new_sign < 0.0 {
            if let Ok(ev) = locate_event(&base, &tangent, ds, k, EventKind::BranchPoint, settings) {
                branch.events.push(ev);
            }
        }
        if old_t * new_t < 0.0 {
            if let Ok(ev) = locate_event(&base, &tangent, ds, k, EventKind::Fold, settings) {
                branch.events.push(ev);
            }
        }
    }

    branch.orbits.push(orbit);
    branch.tangents.push(new_tangent);
    branch.steps.push(ds);
    branch.det_signs.push(stored_sign);
    branch.newton_iterations.push(iterations);

    let last = branch.last();
    if last.min_pair_distance() < COLLISION_FACTOR * settings.collision_radius {
        branch.events.push(EventRecord {
            kind: EventKind::Collision,
            step: k + 1,
            orbit: last.clone(),
            tangent: branch.tangents.last().unwrap().clone(),
        });
        return Ok(StepOutcome::Terminated(Termination::Collision));
    }
    Ok(StepOutcome::Accepted)
}

/// Rejects corrections that wandered far from the predictor or turned the
/// branch sharply.
fn step_is_acceptable(base: &OrbitSolution, tangent: &[f64], ds: f64, step: &StepResult) -> bool {
    let u0 = base.to_unknowns();
    let u1 = step.outcome.orbit.to_unknowns();
    let diff: Vec<f64> = u1
        .iter()
        .zip(&u0)
        .zip(tangent)
        .map(|((a, b), t)| a - b - ds * t)
        .collect();
    let drift = w_norm(base, &diff);
    let cos = w_inner(&base.mesh, &tables_for(base), base.dim(), tangent, &step.tangent);
    drift <= 0.5 * ds.abs().max(1e-12) + 1e-9 && cos > 0.8 && step.outcome.orbit.period > 0.0
}

/// Determinant sign at the start of a step, with the same phase reference
/// and border row as the step itself.
fn consistent_sign(base: &OrbitSolution, tangent: &[f64]) -> Result<f64> {
    let constraints = PhaseConstraints::new(base.clone());
    let cont = ContinuationEquation::pseudo_arclength(base, tangent, 0.0);
    let (_, fac) = residual_and_factorization(base, &constraints, &cont)?;
    Ok(fac.det_sign())
}

/// Bisection for a determinant sign change (branch point) or a sign change
/// of the period component of the tangent (fold) between `base` and the
/// orbit a step `ds` along `tangent`. Trial orbits lie on hyperplanes
/// normal to the chord between the two, which cut the branch once even
/// where it turns back in period.
fn locate_event(
    base: &OrbitSolution,
    tangent: &[f64],
    ds: f64,
    step_index: usize,
    kind: EventKind,
    settings: &ContinuationSettings,
) -> Result<EventRecord> {
    let tcol = base.nodes.len();
    let end = corrected_step(base, tangent, ds, &settings.newton)?;
    let mut chord: Vec<f64> = end
        .outcome
        .orbit
        .to_unknowns()
        .iter()
        .zip(base.to_unknowns())
        .map(|(b, a)| b - a)
        .collect();
    let length = w_norm(base, &chord);
    if !(length > 0.0) {
        return Err(Error::NotBracketed { target: 0.0 });
    }
    chord.iter_mut().for_each(|c| *c /= length);
    let indicator = |r: &StepResult| -> f64 {
        match kind {
            EventKind::BranchPoint => r.outcome.factorization.det_sign(),
            _ => r.tangent[tcol].signum(),
        }
    };
    let lo_val = match kind {
        EventKind::BranchPoint => consistent_sign(base, &chord)?,
        _ => tangent[tcol].signum(),
    };
    let mut lo = 0.0;
    let mut hi = length;
    let mut hi_res = corrected_step(base, &chord, hi, &settings.newton)?;
    if indicator(&hi_res) == lo_val {
        return Err(Error::NotBracketed { target: 0.0 });
    }
    let mut lo_period = base.period;
    for _ in 0..80 {
        if (hi_res.outcome.orbit.period - lo_period).abs() < settings.event_tolerance
            || (hi - lo) < 1e-12 * length
        {
            break;
        }
        let mid = 0.5 * (lo + hi);
        match corrected_step(base, &chord, mid, &settings.newton) {
            Ok(r) => {
                if indicator(&r) == lo_val {
                    lo = mid;
                    lo_period = r.outcome.orbit.period;
                } else {
                    hi = mid;
                    hi_res = r;
                }
            }
            Err(_) => break,
        }
    }
    // the bordered system is singular at a branch point, so the chord
    // stands in for the branch direction there
    let event_tangent = match kind {
        EventKind::BranchPoint => chord,
        _ => {
            let mut t = hi_res.tangent;
            if w_inner(&base.mesh, &tables_for(base), base.dim(), &t, tangent) < 0.0 {
                t.iter_mut().for_each(|x| *x = -*x);
            }
            t
        }
    };
    Ok(EventRecord {
        kind,
        step: step_index,
        orbit: hi_res.outcome.orbit,
        tangent: event_tangent,
    })
}

/// Re-checks the stored determinant signs and returns the branch-point
/// events of the branch, locating any sign change that has no event yet.
pub fn detect_branch_points(branch: &FamilyBranch) -> Vec<EventRecord> {
    let mut out: Vec<EventRecord> = branch.branch_points().map(|(_, e)| e.clone()).collect();
    for k in 0..branch.steps.len() {
        let known = out.iter().any(|e| e.step == k);
        if known {
            continue;
        }
        let base = &branch.orbits[k];
        let tangent = &branch.tangents[k];
        let Ok(s0) = consistent_sign(base, tangent) else {
            continue;
        };
        let Ok(end) = corrected_step(base, tangent, branch.steps[k], &branch.settings.newton) else {
            continue;
        };
        if s0 * end.outcome.factorization.det_sign() < 0.0 {
            if let Ok(ev) = locate_event(base, tangent, branch.steps[k], k, EventKind::BranchPoint, &branch.settings) {
                out.push(ev);
            }
        }
    }
    out.sort_by_key(|e| e.step);
    out
}

/// Inverse iteration for the null vector of the bordered Jacobian at an
/// event orbit. Two independent starts must agree, otherwise the null space
/// is not one-dimensional.
fn null_vector(event: &EventRecord) -> Result<Vec<f64>> {
    let orbit = &event.orbit;
    let constraints = PhaseConstraints::new(orbit.clone());
    let cont = ContinuationEquation::pseudo_arclength(orbit, &event.tangent, 0.0);
    let (_, fac) = residual_and_factorization(orbit, &constraints, &cont)?;
    let n = orbit.unknown_count();
    let mut vecs: Vec<Vec<f64>> = (0..2u64)
        .map(|seed| {
            let mut s = 0x9E3779B97F4A7C15u64.wrapping_mul(seed + 1);
            let mut v: Vec<f64> = (0..n)
                .map(|_| {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
                })
                .collect();
            *v.last_mut().unwrap() = 0.0;
            v
        })
        .collect();
    let mut c = 0.0;
    for _ in 0..NULL_SWEEPS {
        for v in vecs.iter_mut() {
            *v = fac.solve(v);
            let norm = w_norm(orbit, v);
            v.iter_mut().for_each(|x| *x /= norm);
        }
        c = w_inner(&orbit.mesh, &tables_for(orbit), orbit.dim(), &vecs[0], &vecs[1]).abs();
        if c >= NULL_PARALLEL {
            break;
        }
    }
    if c < NULL_PARALLEL {
        return Err(Error::NullSpaceAmbiguous { ratio: c });
    }
    let mut phi = vecs.swap_remove(0);
    // remove the tangent component so the perturbation leaves the branch
    let proj = w_inner(&orbit.mesh, &tables_for(orbit), orbit.dim(), &phi, &event.tangent);
    phi.iter_mut().zip(&event.tangent).for_each(|(p, t)| *p -= proj * t);
    let norm = w_norm(orbit, &phi);
    // sign fixed by the orbit alone: largest component positive
    let big = phi.iter().fold(0.0f64, |m, x| if x.abs() > m.abs() { *x } else { m });
    let scale = if big < 0.0 { -1.0 / norm } else { 1.0 / norm };
    phi.iter_mut().for_each(|x| *x *= scale);
    Ok(phi)
}

/// Switches onto the branch bifurcating at event `event_index` and
/// continues it. `direction` (±1) selects which side of the bifurcating
/// branch to follow.
pub fn branch_switch(
    branch: &FamilyBranch,
    event_index: usize,
    settings: &ContinuationSettings,
    direction: i32,
) -> Result<FamilyBranch> {
    let mut child = switch_first_orbit(branch, event_index, settings, direction)?;
    continue_branch(&mut child, settings);
    Ok(child)
}

/// The corrected first orbit of the bifurcating branch, without continuing.
pub fn switch_first_orbit(
    branch: &FamilyBranch,
    event_index: usize,
    settings: &ContinuationSettings,
    direction: i32,
) -> Result<FamilyBranch> {
    settings.validate()?;
    let event = branch
        .events
        .get(event_index)
        .ok_or_else(|| Error::InvalidConfig(format!("branch has no event {event_index}")))?;
    if event.kind != EventKind::BranchPoint {
        return Err(Error::NotBranchPoint(event_index));
    }
    let phi = null_vector(event)?;
    let sign = if direction < 0 { -1.0 } else { 1.0 };
    let phi: Vec<f64> = phi.iter().map(|v| sign * v).collect();
    let eps = settings.initial_step;
    let base = &event.orbit;
    let guess_u: Vec<f64> = base.to_unknowns().iter().zip(&phi).map(|(a, b)| a + eps * b).collect();
    let guess = base.with_unknowns(&guess_u);
    let constraints = PhaseConstraints::new(base.clone());
    let cont = ContinuationEquation::pseudo_arclength(base, &phi, eps);
    let outcome = newton_correct(&guess, &constraints, &cont, &settings.newton)?;
    let tangent = tangent_from(&outcome.factorization, &outcome.orbit);
    let mut orbit = outcome.orbit;
    let planar = orbit.max_abs_z() < 1e-8;
    let family_type = match (branch.family_type, planar) {
        (FamilyType::Vertical, _) => FamilyType::Axial,
        (FamilyType::Axial, true) => FamilyType::Unchained,
        (FamilyType::Axial, false) => FamilyType::Axial,
        (other, _) => other,
    };
    orbit.family_type = family_type;
    let suffix = if sign > 0.0 { "p" } else { "m" };
    Ok(FamilyBranch {
        id: format!("{}-e{}{}", branch.id, event_index, suffix),
        config: branch.config,
        family_type,
        wave_number: branch.wave_number,
        provenance: Provenance::Switch {
            parent: branch.id.clone(),
            event: event_index,
            period: event.period(),
            direction: if sign > 0.0 { 1 } else { -1 },
        },
        settings: settings.clone(),
        orbits: vec![orbit],
        tangents: vec![tangent],
        steps: Vec::new(),
        det_signs: vec![outcome.factorization.det_sign()],
        newton_iterations: vec![outcome.iterations],
        events: Vec::new(),
        termination: None,
        step_size: settings.initial_step,
        fast_streak: 0,
        since_adapt: 0,
    })
}

/// Orbit on the branch with period `target`, located by a safeguarded
/// secant iteration on the arclength between two bracketing members.
pub fn locate_period(branch: &FamilyBranch, target: f64) -> Result<OrbitSolution> {
    let tol = 1e-9 * target;
    for (k, o) in branch.orbits.iter().enumerate() {
        if o.period == target {
            return Ok(branch.orbits[k].clone());
        }
    }
    for k in 0..branch.steps.len() {
        let (a, b) = (branch.orbits[k].period, branch.orbits[k + 1].period);
        if (a - target) * (b - target) > 0.0 {
            continue;
        }
        let base = &branch.orbits[k];
        let tangent = &branch.tangents[k];
        let newton = &branch.settings.newton;
        let mut lo = (0.0, a - target);
        let end = corrected_step(base, tangent, branch.steps[k], newton)?;
        let mut hi = (branch.steps[k], end.outcome.orbit.period - target);
        if lo.1 * hi.1 > 0.0 {
            continue;
        }
        if hi.1.abs() < tol {
            return Ok(end.outcome.orbit);
        }
        let mut side = 0;
        for _ in 0..100 {
            // Illinois variant of regula falsi
            let s = (lo.0 * hi.1 - hi.0 * lo.1) / (hi.1 - lo.1);
            let s = if s.is_finite() && s > lo.0.min(hi.0) && s < lo.0.max(hi.0) {
                s
            } else {
                0.5 * (lo.0 + hi.0)
            };
            let r = corrected_step(base, tangent, s, newton)?;
            let g = r.outcome.orbit.period - target;
            if g.abs() < tol {
                return Ok(r.outcome.orbit);
            }
            if g * hi.1 < 0.0 {
                lo = hi;
                hi = (s, g);
                side = 0;
            } else {
                hi = (s, g);
                if side == 1 {
                    lo.1 *= 0.5;
                }
                side = 1;
            }
        }
        return Err(Error::NoConvergence {
            residual: hi.1.abs(),
            iterations: 100,
        });
    }
    Err(Error::NotBracketed { target })
}

/// `⟨a, b⟩_W` for unknown vectors on an orbit's mesh.
pub fn inner(orbit: &OrbitSolution, a: &[f64], b: &[f64]) -> f64 {
    w_inner(&orbit.mesh, &tables_for(orbit), orbit.dim(), a, b)
}
