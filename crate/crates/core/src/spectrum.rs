//! Linearization at the polygonal equilibrium and classification of the
//! oscillatory modes by their symmetry wave number.
//!
//! At the equilibrium the planar and vertical motions decouple, so planar
//! frequencies come from the `4B × 4B` planar block and vertical frequencies
//! are known in closed form (`√(μ + s_k)` and, with a central mass,
//! `√(μ + n)`).

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Complex, DMatrix, DVector};

use crate::bvp::mesh::{Mesh, DEFAULT_DEGREE, DEFAULT_INTERVALS};
use crate::bvp::orbit::OrbitSolution;
use crate::error::{Error, Result};
use crate::nbody::{field_jacobian_into, polygon_equilibrium, s_coefficient, SystemConfig, UnfoldingParams};

/// Relative distance below which two eigenvalues count as one cluster.
///
/// Eigenvalues belonging to a Jordan block split by about the square root of
/// machine precision in floating point, so the tolerance sits well above
/// that splitting.
pub const CLUSTER_TOLERANCE: f64 = 1e-6;
/// Minimum share of the dominant wave number in a mode's Fourier energy.
pub const CLASSIFICATION_THRESHOLD: f64 = 0.99;
/// Largest relative real part for an eigenvalue to count as oscillatory.
const OSCILLATORY_TOLERANCE: f64 = 1e-5;

/// Kind of family an orbit or mode belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FamilyType {
    Planar,
    Vertical,
    Axial,
    Unchained,
}

impl FamilyType {
    pub fn as_str(&self) -> &'static str {
        match self {
            FamilyType::Planar => "planar",
            FamilyType::Vertical => "vertical",
            FamilyType::Axial => "axial",
            FamilyType::Unchained => "unchained",
        }
    }
}

impl fmt::Display for FamilyType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FamilyType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "planar" => Ok(FamilyType::Planar),
            "vertical" => Ok(FamilyType::Vertical),
            "axial" => Ok(FamilyType::Axial),
            "unchained" => Ok(FamilyType::Unchained),
            other => Err(Error::Format(format!("unknown family type '{other}'"))),
        }
    }
}

/// One oscillatory mode `±iν` of the linearized equations.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeRecord {
    /// `ν`, the imaginary part of the eigenvalue.
    pub frequency: f64,
    /// Real part of the eigenvalue as computed (zero for analytic modes).
    pub growth: f64,
    /// Symmetry wave number `k ∈ 1..=n`.
    pub wave_number: usize,
    pub family_type: FamilyType,
    /// Real and imaginary parts of the complex eigenvector for `+iν`, in the
    /// phase-point layout. The linear motion is `Re(e^{iνt} (re + i·im))`.
    pub shape_re: Vec<f64>,
    pub shape_im: Vec<f64>,
    /// Number of eigenvalues of the full linearization in the cluster.
    pub multiplicity: usize,
    /// Share of the Fourier energy carried by `wave_number`.
    pub fourier_energy: f64,
}

impl ModeRecord {
    /// Period `2π/ν` of the small-amplitude orbits.
    pub fn initial_period(&self) -> f64 {
        2.0 * PI / self.frequency
    }

    /// Only simple eigenvalues start a family here.
    pub fn continuable(&self) -> bool {
        self.multiplicity == 1
    }
}

/// Derivative of the λ = 0 vector field at the polygonal equilibrium.
pub fn equilibrium_jacobian(config: &SystemConfig) -> DMatrix<f64> {
    let dim = config.dim();
    let eq = polygon_equilibrium(config);
    let mut jac = vec![0.0; dim * dim];
    field_jacobian_into(config, eq.as_slice(), &UnfoldingParams::ZERO, &mut jac);
    DMatrix::from_row_slice(dim, dim, &jac)
}

/// State indices of the planar coordinates (positions then velocities).
fn planar_indices(config: &SystemConfig) -> Vec<usize> {
    let b = config.bodies();
    let mut idx = Vec::with_capacity(4 * b);
    for s in 0..b {
        idx.push(config.pos_index(s, 0));
        idx.push(config.pos_index(s, 1));
    }
    for s in 0..b {
        idx.push(config.vel_index(s, 0));
        idx.push(config.vel_index(s, 1));
    }
    idx
}

/// State indices of the vertical coordinates.
fn vertical_indices(config: &SystemConfig) -> Vec<usize> {
    let b = config.bodies();
    (0..b)
        .map(|s| config.pos_index(s, 2))
        .chain((0..b).map(|s| config.vel_index(s, 2)))
        .collect()
}

fn sub_block(full: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |r, c| full[(idx[r], idx[c])])
}

/// Jacobian restricted to the vertical coordinates.
pub fn vertical_block(config: &SystemConfig) -> DMatrix<f64> {
    sub_block(&equilibrium_jacobian(config), &vertical_indices(config))
}

/// Jacobian restricted to the planar coordinates.
pub fn planar_block(config: &SystemConfig) -> DMatrix<f64> {
    sub_block(&equilibrium_jacobian(config), &planar_indices(config))
}

/// Normalized Fourier energies `E(k)`, `k = 1..=n` (index `k - 1`), of a
/// complex mode shape over the ring bodies.
///
/// Planar displacements are measured in the frame co-rotating with each
/// body, `w_j = e^{-ijζ} δu_j`; a wave-number-`k` mode has
/// `w_j ∝ e^{ijkζ}` for the positive-frequency part and `e^{-ijkζ}` for the
/// negative-frequency part. Vertical displacements satisfy `δz_j ∝ e^{ijkζ}`.
pub fn wave_number_energies(config: &SystemConfig, shape_re: &[f64], shape_im: &[f64]) -> Vec<f64> {
    let n = config.n();
    let zeta = config.zeta();
    let mut p = Vec::with_capacity(n);
    let mut q = Vec::with_capacity(n);
    let mut zc = Vec::with_capacity(n);
    for j in 1..=n {
        let s = config.ring_slot(j);
        let cx = Complex::new(shape_re[3 * s], shape_im[3 * s]);
        let cy = Complex::new(shape_re[3 * s + 1], shape_im[3 * s + 1]);
        let cz = Complex::new(shape_re[3 * s + 2], shape_im[3 * s + 2]);
        let rot = Complex::from_polar(1.0, -(j as f64) * zeta);
        let i = Complex::new(0.0, 1.0);
        p.push(rot * (cx + i * cy));
        q.push(rot * (cx.conj() + i * cy.conj()));
        zc.push(cz);
    }
    let mut e = vec![0.0; n];
    for k in 1..=n {
        let mut sp = Complex::new(0.0, 0.0);
        let mut sq = Complex::new(0.0, 0.0);
        let mut sz = Complex::new(0.0, 0.0);
        for j in 1..=n {
            let ph = (j * k) as f64 * zeta;
            sp += p[j - 1] * Complex::from_polar(1.0, -ph);
            sq += q[j - 1] * Complex::from_polar(1.0, ph);
            sz += zc[j - 1] * Complex::from_polar(1.0, -ph);
        }
        e[k - 1] = sp.norm_sqr() + sq.norm_sqr() + sz.norm_sqr();
    }
    let total: f64 = e.iter().sum();
    if total > 0.0 {
        e.iter_mut().for_each(|v| *v /= total);
    }
    e
}

/// Dominant wave number and its energy share.
pub fn classify(config: &SystemConfig, shape_re: &[f64], shape_im: &[f64]) -> (usize, f64) {
    let e = wave_number_energies(config, shape_re, shape_im);
    let (idx, best) = e
        .iter()
        .enumerate()
        .fold((0, -1.0), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    (idx + 1, best)
}

/// Eigenvalues of the planar block with positive imaginary part.
fn planar_eigenvalues(config: &SystemConfig) -> (DMatrix<f64>, Vec<Complex<f64>>) {
    let block = planar_block(config);
    let eig = block.complex_eigenvalues();
    (block, eig.iter().cloned().collect())
}

fn vertical_frequencies(config: &SystemConfig) -> Vec<(usize, f64)> {
    let n = config.n();
    let mu = config.mu();
    let mut out: Vec<(usize, f64)> = (1..n)
        .map(|k| (k, (mu + s_coefficient(n, k as i64).expect("n >= 3")).sqrt()))
        .collect();
    if config.has_central() {
        out.push((n, (mu + n as f64).sqrt()));
    }
    out
}

fn close(a: Complex<f64>, b: Complex<f64>) -> bool {
    (a - b).norm() <= CLUSTER_TOLERANCE * (1.0 + a.norm().max(b.norm()))
}

/// Groups eigenvalues into clusters, returning (mean, count).
fn clusters(values: &[Complex<f64>]) -> Vec<(Complex<f64>, usize)> {
    let mut used = vec![false; values.len()];
    let mut out = Vec::new();
    for i in 0..values.len() {
        if used[i] {
            continue;
        }
        let mut members = vec![values[i]];
        used[i] = true;
        for j in i + 1..values.len() {
            if !used[j] && close(values[i], values[j]) {
                used[j] = true;
                members.push(values[j]);
            }
        }
        let mean = members.iter().fold(Complex::new(0.0, 0.0), |a, b| a + b) / members.len() as f64;
        out.push((mean, members.len()));
    }
    out
}

/// Total multiplicity of `iν` in the full linearization.
fn multiplicity(config: &SystemConfig, planar: &[Complex<f64>], nu: f64) -> usize {
    let target = Complex::new(0.0, nu);
    let p = planar.iter().filter(|&&l| close(l, target)).count();
    let v = vertical_frequencies(config)
        .iter()
        .filter(|(_, f)| close(Complex::new(0.0, *f), target))
        .count();
    p + v
}

/// Eigenvector of `block` for the eigenvalue closest to `sigma`.
fn inverse_iteration(block: &DMatrix<f64>, sigma: Complex<f64>) -> DVector<Complex<f64>> {
    let n = block.nrows();
    let shift = sigma + Complex::new(1e-11, 1e-11) * (1.0 + sigma.norm());
    let m = DMatrix::from_fn(n, n, |r, c| {
        let v = Complex::new(block[(r, c)], 0.0);
        if r == c {
            v - shift
        } else {
            v
        }
    });
    let lu = m.lu();
    let mut v = DVector::from_fn(n, |i, _| Complex::new(1.0 + 0.1 * i as f64, 0.3 - 0.05 * i as f64));
    for _ in 0..3 {
        if let Some(w) = lu.solve(&v) {
            let norm = w.norm();
            if norm > 0.0 && norm.is_finite() {
                v = w / Complex::new(norm, 0.0);
            }
        }
    }
    v
}

/// Fixes the phase so that body `n`'s x-displacement is real and positive
/// (its y-displacement then is imaginary for reversible modes) and scales
/// the largest position entry to modulus one.
fn normalize_shape(config: &SystemConfig, re: &mut [f64], im: &mut [f64]) {
    let s = config.ring_slot(config.n());
    let pos = 3 * config.bodies();
    let maxmod = (0..pos)
        .map(|i| re[i].hypot(im[i]))
        .fold(0.0, f64::max);
    if maxmod == 0.0 {
        return;
    }
    let cx = Complex::new(re[3 * s], im[3 * s]);
    let cy = Complex::new(re[3 * s + 1], im[3 * s + 1]);
    let cz = Complex::new(re[3 * s + 2], im[3 * s + 2]);
    let anchor = if cx.norm() > 1e-6 * maxmod {
        cx
    } else if cz.norm() > 1e-6 * maxmod {
        cz
    } else {
        cy * Complex::new(0.0, -1.0)
    };
    let rot = anchor.conj() / anchor.norm() / maxmod;
    for i in 0..re.len() {
        let c = Complex::new(re[i], im[i]) * rot;
        re[i] = c.re;
        im[i] = c.im;
    }
}

/// Oscillatory planar modes, sorted by wave number and, within one wave
/// number, by decreasing frequency.
pub fn planar_modes(config: &SystemConfig) -> Result<Vec<ModeRecord>> {
    let (block, eig) = planar_eigenvalues(config);
    let idx = planar_indices(config);
    let dim = config.dim();
    let mut out = Vec::new();
    let positive: Vec<Complex<f64>> = eig
        .iter()
        .cloned()
        .filter(|l| l.im > 1e-6 && l.re.abs() <= OSCILLATORY_TOLERANCE * l.norm())
        .collect();
    for (mean, _) in clusters(&positive) {
        let nu = mean.im;
        let v = inverse_iteration(&block, mean);
        let mut re = vec![0.0; dim];
        let mut im = vec![0.0; dim];
        for (r, &gi) in idx.iter().enumerate() {
            re[gi] = v[r].re;
            im[gi] = v[r].im;
        }
        normalize_shape(config, &mut re, &mut im);
        let mult = multiplicity(config, &eig, nu);
        let (k, energy) = classify(config, &re, &im);
        if mult == 1 && energy < CLASSIFICATION_THRESHOLD {
            return Err(Error::AmbiguousMode { energy });
        }
        out.push(ModeRecord {
            frequency: nu,
            growth: mean.re,
            wave_number: k,
            family_type: FamilyType::Planar,
            shape_re: re,
            shape_im: im,
            multiplicity: mult,
            fourier_energy: energy,
        });
    }
    out.sort_by(|a, b| {
        a.wave_number
            .cmp(&b.wave_number)
            .then(b.frequency.partial_cmp(&a.frequency).unwrap())
    });
    Ok(out)
}

/// Vertical modes `√(μ + s_k)`, `k = 1..n-1`, and `√(μ + n)` for `k = n`
/// when a central mass is present.
pub fn vertical_modes(config: &SystemConfig) -> Vec<ModeRecord> {
    let (_, eig) = planar_eigenvalues(config);
    let n = config.n();
    let dim = config.dim();
    let zeta = config.zeta();
    let off = 3 * config.bodies();
    vertical_frequencies(config)
        .into_iter()
        .map(|(k, nu)| {
            let mut re = vec![0.0; dim];
            let mut im = vec![0.0; dim];
            for j in 1..=n {
                let s = config.ring_slot(j);
                let ph = (j * k) as f64 * zeta;
                if k == n {
                    re[3 * s + 2] = 1.0;
                } else {
                    re[3 * s + 2] = ph.cos();
                    im[3 * s + 2] = ph.sin();
                }
            }
            if let Some(c) = config.central_slot() {
                if k == n {
                    re[3 * c + 2] = -(n as f64) / config.mu();
                }
            }
            // velocities of the mode: iν times the displacement
            for i in 0..off {
                re[off + i] = -nu * im[i];
                im[off + i] = nu * re[i];
            }
            normalize_shape(config, &mut re, &mut im);
            let (_, energy) = classify(config, &re, &im);
            ModeRecord {
                frequency: nu,
                growth: 0.0,
                wave_number: k,
                family_type: FamilyType::Vertical,
                shape_re: re,
                shape_im: im,
                multiplicity: multiplicity(config, &eig, nu),
                fourier_energy: energy,
            }
        })
        .collect()
}

/// Planar modes followed by vertical modes.
pub fn all_modes(config: &SystemConfig) -> Result<Vec<ModeRecord>> {
    let mut v = planar_modes(config)?;
    v.extend(vertical_modes(config));
    Ok(v)
}

/// Initial guess `x(t) = x_eq + a·Re(e^{2πit}·c)` on a given mesh, with
/// period `2π/ν` and zero unfolding parameters.
pub fn lyapunov_predictor_on(
    mode: &ModeRecord,
    amplitude: f64,
    config: &SystemConfig,
    mesh: Mesh,
) -> (OrbitSolution, f64) {
    let eq = polygon_equilibrium(config);
    let period = mode.initial_period();
    let orbit = OrbitSolution::from_fn(config, mesh, period, mode.wave_number, mode.family_type, |t| {
        let (s, c) = (2.0 * PI * t).sin_cos();
        eq.as_slice()
            .iter()
            .zip(mode.shape_re.iter().zip(&mode.shape_im))
            .map(|(x, (re, im))| x + amplitude * (re * c - im * s))
            .collect()
    });
    (orbit, period)
}

/// [`lyapunov_predictor_on`] with the default mesh.
pub fn lyapunov_predictor(mode: &ModeRecord, amplitude: f64, config: &SystemConfig) -> (OrbitSolution, f64) {
    let mesh = Mesh::uniform(DEFAULT_INTERVALS, DEFAULT_DEGREE).expect("default mesh");
    lyapunov_predictor_on(mode, amplitude, config, mesh)
}
