//! Periodic orbits represented on a collocation mesh.

use crate::bvp::mesh::{CollocationTables, LagrangeBasis, Mesh};
use crate::error::{Error, Result};
use crate::nbody::{min_pair_distance, PhasePoint, SystemConfig, UnfoldingParams};
use crate::spectrum::FamilyType;

/// Number of scalar parameters appended to the node values: `T, λ1, λ2, λ3`.
pub const PARAMS: usize = 4;

/// A periodic orbit on the unit time interval, stored as node values of a
/// piecewise polynomial, together with its period and unfolding parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitSolution {
    pub config: SystemConfig,
    pub mesh: Mesh,
    /// Node values, `mesh.node_count()` rows of `config.dim()` entries.
    pub nodes: Vec<f64>,
    pub period: f64,
    pub lambdas: UnfoldingParams,
    /// Symmetry wave number `k` of the family the orbit belongs to.
    pub wave_number: usize,
    pub family_type: FamilyType,
}

impl OrbitSolution {
    /// The constant orbit sitting at `state` for all time.
    pub fn constant(
        config: &SystemConfig,
        mesh: Mesh,
        period: f64,
        wave_number: usize,
        family_type: FamilyType,
        state: &PhasePoint,
    ) -> Self {
        Self::from_fn(config, mesh, period, wave_number, family_type, |_| {
            state.as_slice().to_vec()
        })
    }

    /// Samples `f(t)` at the mesh nodes.
    pub fn from_fn<F: Fn(f64) -> Vec<f64>>(
        config: &SystemConfig,
        mesh: Mesh,
        period: f64,
        wave_number: usize,
        family_type: FamilyType,
        f: F,
    ) -> Self {
        let dim = config.dim();
        let mut nodes = Vec::with_capacity(mesh.node_count() * dim);
        for l in 0..mesh.node_count() {
            let v = f(mesh.node_time(l));
            debug_assert_eq!(v.len(), dim);
            nodes.extend_from_slice(&v);
        }
        Self {
            config: *config,
            mesh,
            nodes,
            period,
            lambdas: UnfoldingParams::ZERO,
            wave_number,
            family_type,
        }
    }

    pub fn dim(&self) -> usize {
        self.config.dim()
    }

    /// Length of the unknown vector: node values plus `T, λ1, λ2, λ3`.
    pub fn unknown_count(&self) -> usize {
        self.nodes.len() + PARAMS
    }

    pub fn node(&self, l: usize) -> &[f64] {
        let d = self.dim();
        &self.nodes[l * d..(l + 1) * d]
    }

    pub fn frequency(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.period
    }

    pub fn to_unknowns(&self) -> Vec<f64> {
        let mut u = self.nodes.clone();
        u.push(self.period);
        u.extend_from_slice(&self.lambdas.as_array());
        u
    }

    pub fn set_unknowns(&mut self, u: &[f64]) {
        let n = self.nodes.len();
        self.nodes.copy_from_slice(&u[..n]);
        self.period = u[n];
        self.lambdas = UnfoldingParams::new(u[n + 1], u[n + 2], u[n + 3]);
    }

    pub fn with_unknowns(&self, u: &[f64]) -> Self {
        let mut o = self.clone();
        o.set_unknowns(u);
        o
    }

    /// State at unit time `t`, reduced mod 1.
    pub fn evaluate(&self, t: f64) -> PhasePoint {
        let v = evaluate_nodes(&self.mesh, &self.nodes, self.dim(), t);
        PhasePoint::from_vec(&self.config, v).expect("dimension")
    }

    /// Derivative with respect to unit time at `t`.
    pub fn derivative(&self, t: f64) -> Vec<f64> {
        let d = self.dim();
        let t = t.rem_euclid(1.0);
        let i = self.mesh.locate(t);
        let h = self.mesh.width(i);
        let s = ((t - self.mesh.breakpoints()[i]) / h).clamp(0.0, 1.0);
        let basis = LagrangeBasis::equispaced(self.mesh.degree());
        let dl = basis.derivatives(s);
        let m = self.mesh.degree();
        let mut out = vec![0.0; d];
        for (l, w) in dl.iter().enumerate() {
            let node = &self.nodes[(i * m + l) * d..(i * m + l + 1) * d];
            for c in 0..d {
                out[c] += w * node[c] / h;
            }
        }
        out
    }

    /// Smallest pairwise distance over all mesh nodes.
    pub fn min_pair_distance(&self) -> f64 {
        (0..self.mesh.node_count())
            .map(|l| min_pair_distance(&self.config, self.node(l)))
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest |z| of any body over all mesh nodes.
    pub fn max_abs_z(&self) -> f64 {
        let b = self.config.bodies();
        let mut best: f64 = 0.0;
        for l in 0..self.mesh.node_count() {
            let x = self.node(l);
            for s in 0..b {
                best = best.max(x[3 * s + 2].abs());
            }
        }
        best
    }

    /// Largest deviation of any node from the first node (orbit amplitude).
    pub fn amplitude(&self, reference: &PhasePoint) -> f64 {
        let d = self.dim();
        let r = reference.as_slice();
        let mut best: f64 = 0.0;
        for l in 0..self.mesh.node_count() {
            for c in 0..3 * self.config.bodies() {
                best = best.max((self.nodes[l * d + c] - r[c]).abs());
            }
        }
        best
    }

    /// The same orbit represented on another mesh.
    pub fn remeshed(&self, mesh: Mesh) -> Self {
        let nodes = reinterpolate(&self.mesh, &self.nodes, self.dim(), &mesh);
        Self {
            mesh,
            nodes,
            ..self.clone()
        }
    }

    pub fn check_compatible(&self, other: &OrbitSolution) -> Result<()> {
        if self.config != other.config {
            return Err(Error::MeshMismatch("orbits belong to different systems".into()));
        }
        if self.mesh != other.mesh {
            return Err(Error::MeshMismatch("orbits live on different meshes".into()));
        }
        Ok(())
    }
}

/// Evaluates the piecewise interpolant stored in `nodes` at `t` (mod 1).
pub fn evaluate_nodes(mesh: &Mesh, nodes: &[f64], dim: usize, t: f64) -> Vec<f64> {
    let t = if (0.0..=1.0).contains(&t) { t } else { t.rem_euclid(1.0) };
    let i = mesh.locate(t);
    let h = mesh.width(i);
    let s = ((t - mesh.breakpoints()[i]) / h).clamp(0.0, 1.0);
    let m = mesh.degree();
    let basis = LagrangeBasis::equispaced(m);
    let w = basis.values(s);
    let mut out = vec![0.0; dim];
    for (l, wl) in w.iter().enumerate() {
        let node = &nodes[(i * m + l) * dim..(i * m + l + 1) * dim];
        for c in 0..dim {
            out[c] += wl * node[c];
        }
    }
    out
}

/// Re-represents node values from `old` on `new`.
pub fn reinterpolate(old: &Mesh, nodes: &[f64], dim: usize, new: &Mesh) -> Vec<f64> {
    let mut out = Vec::with_capacity(new.node_count() * dim);
    for l in 0..new.node_count() {
        out.extend(evaluate_nodes(old, nodes, dim, new.node_time(l)));
    }
    out
}

/// Re-represents a full unknown vector (node values plus trailing parameters).
pub fn reinterpolate_unknowns(old: &Mesh, u: &[f64], dim: usize, new: &Mesh) -> Vec<f64> {
    let n = old.node_count() * dim;
    let mut out = reinterpolate(old, &u[..n], dim, new);
    out.extend_from_slice(&u[n..]);
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Mesh with `target` intervals that equidistributes `h^m |x^{(m)}|`, the
/// local size of the highest-order term of the piecewise interpolant.
pub fn equidistributed_mesh(orbit: &OrbitSolution, target: usize) -> Result<Mesh> {
    let mesh = &orbit.mesh;
    let m = mesh.degree();
    let n = mesh.intervals();
    let d = orbit.dim();
    // m-th derivative of the interpolant, constant on each interval
    let coeffs: Vec<f64> = (0..=m)
        .map(|l| {
            let sign = if (m - l).is_multiple_of(2) { 1.0 } else { -1.0 };
            sign * binomial(m, l)
        })
        .collect();
    let mut dm = vec![0.0; n * d];
    for i in 0..n {
        let scale = (m as f64 / mesh.width(i)).powi(m as i32);
        for comp in 0..d {
            let mut sum = 0.0;
            let mut size = 0.0;
            for (l, c) in coeffs.iter().enumerate() {
                let v = c * orbit.node(i * m + l)[comp];
                sum += v;
                size += v.abs();
            }
            // differences at rounding level count as zero
            if sum.abs() > 1e-12 * size {
                dm[i * d + comp] = sum * scale;
            }
        }
    }
    let mut rho: Vec<f64> = (0..n)
        .map(|i| {
            let s: f64 = dm[i * d..(i + 1) * d].iter().map(|v| v * v).sum();
            s.sqrt().powf(1.0 / m as f64)
        })
        .collect();
    let total: f64 = rho.iter().zip(0..n).map(|(r, i)| r * mesh.width(i)).sum();
    if !(total > 0.0) || !total.is_finite() {
        return Mesh::uniform(target, m);
    }
    // keep a minimum density so that quiet stretches are not starved
    let floor = 0.1 * total;
    for r in rho.iter_mut() {
        *r += floor;
    }
    let total = total + floor;
    let mut cum = vec![0.0; n + 1];
    for i in 0..n {
        cum[i + 1] = cum[i] + rho[i] * mesh.width(i);
    }
    let mut bp = Vec::with_capacity(target + 1);
    bp.push(0.0);
    let mut i = 0;
    for q in 1..target {
        let level = total * q as f64 / target as f64;
        while i + 1 < n && cum[i + 1] < level {
            i += 1;
        }
        let frac = (level - cum[i]) / (cum[i + 1] - cum[i]);
        bp.push(mesh.breakpoints()[i] + frac.clamp(0.0, 1.0) * mesh.width(i));
    }
    bp.push(1.0);
    Mesh::from_breakpoints(bp, m)
}

/// Moves the mesh to equidistribute the interpolation error and
/// re-represents the orbit on it.
pub fn adapt_mesh(orbit: &OrbitSolution, target: usize) -> Result<OrbitSolution> {
    // a few fixed-point sweeps, each estimating the density of the original
    // interpolant sampled on the previous trial mesh
    let mut mesh = equidistributed_mesh(orbit, target)?;
    for _ in 0..3 {
        mesh = equidistributed_mesh(&orbit.remeshed(mesh), target)?;
    }
    Ok(orbit.remeshed(mesh))
}

/// Evaluates the orbit at `t ∈ [0, 1]` (reduced mod 1).
pub fn evaluate_orbit(orbit: &OrbitSolution, t: f64) -> PhasePoint {
    orbit.evaluate(t)
}

/// Gauss-quadrature `∫_0^1 a(t)·b(t) dt` of two node vectors on one mesh.
pub fn l2_inner(mesh: &Mesh, tables: &CollocationTables, dim: usize, a: &[f64], b: &[f64]) -> f64 {
    let m = mesh.degree();
    let mut total = 0.0;
    let mut va = vec![0.0; dim];
    let mut vb = vec![0.0; dim];
    for i in 0..mesh.intervals() {
        let h = mesh.width(i);
        for c in 0..m {
            va.iter_mut().for_each(|v| *v = 0.0);
            vb.iter_mut().for_each(|v| *v = 0.0);
            for l in 0..=m {
                let w = tables.values[c][l];
                let base = (i * m + l) * dim;
                for q in 0..dim {
                    va[q] += w * a[base + q];
                    vb[q] += w * b[base + q];
                }
            }
            let dot: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
            total += h * tables.weights[c] * dot;
        }
    }
    total
}

/// Weight vector `g` such that `g·b = ∫ a·b dt + Σ a_p b_p` for unknown
/// vectors (node values followed by the four parameters).
pub fn inner_weights(mesh: &Mesh, tables: &CollocationTables, dim: usize, a: &[f64]) -> Vec<f64> {
    let m = mesh.degree();
    let n = mesh.node_count() * dim;
    let mut g = vec![0.0; a.len()];
    let mut va = vec![0.0; dim];
    for i in 0..mesh.intervals() {
        let h = mesh.width(i);
        for c in 0..m {
            va.iter_mut().for_each(|v| *v = 0.0);
            for l in 0..=m {
                let w = tables.values[c][l];
                let base = (i * m + l) * dim;
                for q in 0..dim {
                    va[q] += w * a[base + q];
                }
            }
            let hw = h * tables.weights[c];
            for l in 0..=m {
                let w = tables.values[c][l] * hw;
                let base = (i * m + l) * dim;
                for q in 0..dim {
                    g[base + q] += w * va[q];
                }
            }
        }
    }
    g[n..].copy_from_slice(&a[n..]);
    g
}

/// `⟨a, b⟩_W` for full unknown vectors.
pub fn w_inner(mesh: &Mesh, tables: &CollocationTables, dim: usize, a: &[f64], b: &[f64]) -> f64 {
    let n = mesh.node_count() * dim;
    l2_inner(mesh, tables, dim, &a[..n], &b[..n])
        + a[n..].iter().zip(&b[n..]).map(|(x, y)| x * y).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nbody::polygon_equilibrium;
    use std::f64::consts::PI;

    fn sample_orbit(mesh: Mesh) -> OrbitSolution {
        let c = SystemConfig::polygon(3).unwrap();
        let eq = polygon_equilibrium(&c);
        OrbitSolution::from_fn(&c, mesh, 2.0, 1, FamilyType::Planar, |t| {
            let mut v = eq.as_slice().to_vec();
            v[0] += 0.1 * (2.0 * PI * t).cos();
            v[1] += 0.1 * (2.0 * PI * t).sin();
            v
        })
    }

    #[test]
    fn evaluation_is_periodic_and_interpolating() {
        let o = sample_orbit(Mesh::uniform(20, 4).unwrap());
        let a = o.evaluate(0.0);
        let b = o.evaluate(1.0);
        assert!(a.as_slice().iter().zip(b.as_slice()).all(|(x, y)| (x - y).abs() < 1e-9));
        let l = 37;
        let t = o.mesh.node_time(l);
        let at = o.evaluate(t);
        assert!(at.as_slice().iter().zip(o.node(l)).all(|(a, b)| (a - b).abs() < 1e-14));
        let mid = o.evaluate(0.4321).as_slice()[0];
        let exact = polygon_equilibrium(&o.config).as_slice()[0] + 0.1 * (2.0 * PI * 0.4321).cos();
        assert!((mid - exact).abs() < 1e-7);
        assert!((o.evaluate(1.25).as_slice()[0] - o.evaluate(0.25).as_slice()[0]).abs() < 1e-15);
    }

    #[test]
    fn derivative_of_interpolant() {
        let o = sample_orbit(Mesh::uniform(20, 4).unwrap());
        let d = o.derivative(0.3);
        assert!((d[0] + 0.2 * PI * (0.6 * PI).sin()).abs() < 1e-4, "{}", d[0]);
    }

    #[test]
    fn inner_products_agree() {
        let o = sample_orbit(Mesh::uniform(12, 4).unwrap());
        let tables = CollocationTables::new(4);
        let u = o.to_unknowns();
        let g = inner_weights(&o.mesh, &tables, o.dim(), &u);
        let direct = w_inner(&o.mesh, &tables, o.dim(), &u, &u);
        let via: f64 = g.iter().zip(&u).map(|(a, b)| a * b).sum();
        assert!((direct - via).abs() < 1e-12 * direct);
    }

    #[test]
    fn constant_orbit_adapts_to_uniform_mesh() {
        let c = SystemConfig::polygon(4).unwrap();
        let eq = polygon_equilibrium(&c);
        let mesh = Mesh::from_breakpoints(vec![0.0, 0.1, 0.5, 0.7, 1.0], 4).unwrap();
        let o = OrbitSolution::constant(&c, mesh, 3.0, 2, FamilyType::Vertical, &eq);
        let a = adapt_mesh(&o, 10).unwrap();
        for (i, b) in a.mesh.breakpoints().iter().enumerate() {
            assert!((b - i as f64 / 10.0).abs() < 1e-12);
        }
    }

    #[test]
    fn adaptation_concentrates_on_sharp_features() {
        let c = SystemConfig::polygon(3).unwrap();
        let eq = polygon_equilibrium(&c);
        // a narrow pulse in body 1's x coordinate centred at t = 0.5
        let o = OrbitSolution::from_fn(&c, Mesh::uniform(200, 4).unwrap(), 1.0, 1, FamilyType::Planar, |t| {
            let mut v = eq.as_slice().to_vec();
            v[0] += 0.2 * (-((t - 0.5) / 0.02).powi(2)).exp();
            v
        });
        let a = adapt_mesh(&o, 100).unwrap();
        let i = a.mesh.locate(0.5);
        assert!(a.mesh.width(i) < 0.25 / 100.0, "{}", a.mesh.width(i));
        assert!(a.mesh.width(a.mesh.locate(0.02)) > 5.0 * a.mesh.width(i));
        let b = adapt_mesh(&a, 100).unwrap();
        let shift = a
            .mesh
            .breakpoints()
            .iter()
            .zip(b.mesh.breakpoints())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(shift < 1e-2 / 100.0 * 40.0, "{shift}");
    }
}
