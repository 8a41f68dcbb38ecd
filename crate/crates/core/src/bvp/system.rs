//! Residual and Jacobian of the collocation equations with phase conditions.

use crate::bvp::linsolve::{BorderedFactorization, IntervalBlock, BORDER};
use crate::bvp::mesh::CollocationTables;
use crate::bvp::orbit::{inner_weights, OrbitSolution};
use crate::error::{Error, Result};
use crate::nbody::{field_into, field_jacobian_into};

/// Phase conditions against a reference orbit `x̃` on the same mesh:
/// `I1 = ∫ y_n`, `I2 = ∫ z_n`, `I3 = ∫ (x_n − x̃_n)·x̃'_n`, where `x_n` is the
/// position of ring body `n`.
#[derive(Debug, Clone)]
pub struct PhaseConstraints {
    reference: OrbitSolution,
    /// Position and derivative of body `n` of the reference at every Gauss
    /// point, `[x, y, z, x', y', z']`.
    gauss_data: Vec<[f64; 6]>,
}

impl PhaseConstraints {
    pub fn new(reference: OrbitSolution) -> Self {
        let tables = CollocationTables::new(reference.mesh.degree());
        let mesh = &reference.mesh;
        let m = mesh.degree();
        let d = reference.dim();
        let body = 3 * reference.config.ring_slot(reference.config.n());
        let mut gauss_data = Vec::with_capacity(mesh.intervals() * m);
        for i in 0..mesh.intervals() {
            let h = mesh.width(i);
            for c in 0..m {
                let mut g = [0.0; 6];
                for l in 0..=m {
                    let node = &reference.nodes[(i * m + l) * d..];
                    for r in 0..3 {
                        g[r] += tables.values[c][l] * node[body + r];
                        g[3 + r] += tables.derivs[c][l] * node[body + r] / h;
                    }
                }
                gauss_data.push(g);
            }
        }
        Self {
            reference,
            gauss_data,
        }
    }

    pub fn reference(&self) -> &OrbitSolution {
        &self.reference
    }
}

/// Linear continuation equation `weights · U = target`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationEquation {
    pub weights: Vec<f64>,
    pub target: f64,
}

impl ContinuationEquation {
    /// `⟨U − U_base, direction⟩_W = step`.
    pub fn pseudo_arclength(base: &OrbitSolution, direction: &[f64], step: f64) -> Self {
        let tables = CollocationTables::new(base.mesh.degree());
        let weights = inner_weights(&base.mesh, &tables, base.dim(), direction);
        let u = base.to_unknowns();
        let target = dot(&weights, &u) + step;
        Self { weights, target }
    }

    pub fn value(&self, u: &[f64]) -> f64 {
        dot(&self.weights, u) - self.target
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Collocation, periodicity and phase-integral residuals (without the
/// continuation equation).
pub fn assemble_residual(candidate: &OrbitSolution, constraints: &PhaseConstraints) -> Result<Vec<f64>> {
    let mut r = assemble(candidate, constraints, None, false)?.0;
    r.pop();
    Ok(r)
}

/// Full residual, including the continuation equation as last entry.
pub fn full_residual(
    candidate: &OrbitSolution,
    constraints: &PhaseConstraints,
    cont: &ContinuationEquation,
) -> Result<Vec<f64>> {
    Ok(assemble(candidate, constraints, Some(cont), false)?.0)
}

/// Residual together with the factorized Jacobian.
pub fn residual_and_factorization(
    candidate: &OrbitSolution,
    constraints: &PhaseConstraints,
    cont: &ContinuationEquation,
) -> Result<(Vec<f64>, BorderedFactorization)> {
    let (r, blocks, params) = assemble(candidate, constraints, Some(cont), true)?;
    let d = candidate.dim();
    let f = BorderedFactorization::factor(d, candidate.mesh.degree(), blocks.unwrap(), params)?;
    Ok((r, f))
}

/// Residual and unfactorized Jacobian blocks.
pub(crate) type Assembled = (Vec<f64>, Option<Vec<IntervalBlock>>, [[f64; BORDER]; BORDER]);

pub(crate) fn assemble(
    candidate: &OrbitSolution,
    constraints: &PhaseConstraints,
    cont: Option<&ContinuationEquation>,
    jacobian: bool,
) -> Result<Assembled> {
    let reference = &constraints.reference;
    if reference.config != candidate.config || reference.mesh != candidate.mesh {
        return Err(Error::MeshMismatch(
            "phase reference and candidate must share system and mesh".into(),
        ));
    }
    let config = &candidate.config;
    let mesh = &candidate.mesh;
    let m = mesh.degree();
    let n_int = mesh.intervals();
    let d = candidate.dim();
    let nodes = mesh.node_count();
    let unknowns = nodes * d + BORDER;
    if let Some(c) = cont {
        if c.weights.len() != unknowns {
            return Err(Error::MeshMismatch(format!(
                "continuation equation has {} weights, expected {unknowns}",
                c.weights.len()
            )));
        }
    }
    let tables = CollocationTables::new(m);
    let bodies = config.bodies();
    let off = 3 * bodies;
    let body_n = 3 * config.ring_slot(config.n());
    let t_period = candidate.period;
    let lam = candidate.lambdas;
    let u_all = candidate.to_unknowns();

    let rows = BorderedFactorization::local_rows(d, m);
    let cols = BorderedFactorization::local_cols(d, m);
    let col_of_node = |l: usize| -> usize {
        if l == 0 {
            (m - 1) * d
        } else if l == m {
            m * d
        } else {
            (l - 1) * d
        }
    };
    let pcol = (m + 1) * d;

    let mut residual = vec![0.0; unknowns];
    let mut blocks = if jacobian { Some(Vec::with_capacity(n_int)) } else { None };
    let mut x = vec![0.0; d];
    let mut dx = vec![0.0; d];
    let mut f = vec![0.0; d];
    let mut jf = if jacobian { vec![0.0; d * d] } else { Vec::new() };
    let mut integrals = [0.0; 3];

    for i in 0..n_int {
        let h = mesh.width(i);
        let mut a = if jacobian { vec![0.0; rows * cols] } else { Vec::new() };
        for c in 0..m {
            x.iter_mut().for_each(|v| *v = 0.0);
            dx.iter_mut().for_each(|v| *v = 0.0);
            for l in 0..=m {
                let node = &candidate.nodes[(i * m + l) * d..(i * m + l + 1) * d];
                let wv = tables.values[c][l];
                let wd = tables.derivs[c][l] / h;
                for q in 0..d {
                    x[q] += wv * node[q];
                    dx[q] += wd * node[q];
                }
            }
            field_into(config, &x, &lam, &mut f)?;
            let row0 = i * m * d + c * d;
            for q in 0..d {
                residual[row0 + q] = dx[q] - t_period * f[q];
            }
            let hw = h * tables.weights[c];
            let g = &constraints.gauss_data[i * m + c];
            integrals[0] += hw * x[body_n + 1];
            integrals[1] += hw * x[body_n + 2];
            integrals[2] += hw
                * ((x[body_n] - g[0]) * g[3]
                    + (x[body_n + 1] - g[1]) * g[4]
                    + (x[body_n + 2] - g[2]) * g[5]);

            if jacobian {
                field_jacobian_into(config, &x, &lam, &mut jf);
                for l in 0..=m {
                    let wv = tables.values[c][l];
                    let wd = tables.derivs[c][l] / h;
                    let col0 = col_of_node(l);
                    for q in 0..d {
                        let row = &mut a[(c * d + q) * cols..(c * d + q + 1) * cols];
                        let jrow = &jf[q * d..(q + 1) * d];
                        for s in 0..d {
                            row[col0 + s] = -t_period * wv * jrow[s];
                        }
                        row[col0 + q] += wd;
                    }
                    // border rows: phase integrals
                    let br = m * d;
                    a[br * cols + col0 + body_n + 1] += hw * wv;
                    a[(br + 1) * cols + col0 + body_n + 2] += hw * wv;
                    for r in 0..3 {
                        a[(br + 2) * cols + col0 + body_n + r] += hw * wv * g[3 + r];
                    }
                }
                for q in 0..d {
                    a[(c * d + q) * cols + pcol] = -f[q];
                }
                for s in 0..bodies {
                    let vx = off + 3 * s;
                    a[(c * d + vx + 2) * cols + pcol + 1] = -t_period;
                    a[(c * d + vx) * cols + pcol + 2] = -t_period * x[3 * s + 1];
                    a[(c * d + vx + 1) * cols + pcol + 2] = t_period * x[3 * s];
                    for r in 0..3 {
                        a[(c * d + vx + r) * cols + pcol + 3] = -t_period * x[off + 3 * s + r];
                    }
                }
            }
        }
        if jacobian {
            if let Some(ce) = cont {
                let br = (m * d + 3) * cols;
                let last = if i + 1 == n_int { m } else { m - 1 };
                for l in 0..=last {
                    let col0 = col_of_node(l);
                    let w = &ce.weights[(i * m + l) * d..(i * m + l + 1) * d];
                    a[br + col0..br + col0 + d].copy_from_slice(w);
                }
            }
            blocks.as_mut().unwrap().push(IntervalBlock { matrix: a });
        }
    }
    let prow = n_int * m * d;
    for q in 0..d {
        residual[prow + q] = candidate.nodes[(nodes - 1) * d + q] - candidate.nodes[q];
    }
    residual[nodes * d] = integrals[0];
    residual[nodes * d + 1] = integrals[1];
    residual[nodes * d + 2] = integrals[2];
    let mut params = [[0.0; BORDER]; BORDER];
    if let Some(ce) = cont {
        residual[nodes * d + 3] = ce.value(&u_all);
        params[3].copy_from_slice(&ce.weights[nodes * d..]);
    }
    Ok((residual, blocks, params))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::bvp::linsolve::BORDER;
    use crate::bvp::mesh::Mesh;
    use crate::nbody::{polygon_equilibrium, SystemConfig, UnfoldingParams};
    use crate::spectrum::FamilyType;
    use nalgebra::DMatrix;
    use std::f64::consts::PI;

    pub(crate) fn dense(candidate: &OrbitSolution, blocks: &[IntervalBlock], params: &[[f64; 4]; 4]) -> DMatrix<f64> {
        let d = candidate.dim();
        let m = candidate.mesh.degree();
        let n = candidate.mesh.intervals();
        let nodes = n * m + 1;
        let size = nodes * d + BORDER;
        let rows = BorderedFactorization::local_rows(d, m);
        let cols = BorderedFactorization::local_cols(d, m);
        let mut g = DMatrix::zeros(size, size);
        for (i, b) in blocks.iter().enumerate() {
            for r in 0..rows {
                let gr = if r < m * d { i * m * d + r } else { nodes * d + r - m * d };
                for c in 0..cols {
                    let gc = if c < (m - 1) * d {
                        (i * m + 1) * d + c
                    } else if c < m * d {
                        i * m * d + c - (m - 1) * d
                    } else if c < (m + 1) * d {
                        (i + 1) * m * d + c - m * d
                    } else {
                        nodes * d + c - (m + 1) * d
                    };
                    g[(gr, gc)] += b.matrix[r * cols + c];
                }
            }
        }
        for q in 0..d {
            g[(n * m * d + q, q)] = -1.0;
            g[(n * m * d + q, (nodes - 1) * d + q)] = 1.0;
        }
        for r in 0..4 {
            for c in 0..4 {
                g[(nodes * d + r, nodes * d + c)] += params[r][c];
            }
        }
        g
    }

    fn wobbly(config: &SystemConfig, mesh: Mesh) -> OrbitSolution {
        let eq = polygon_equilibrium(config);
        let mut o = OrbitSolution::from_fn(config, mesh, 3.1, 1, FamilyType::Planar, |t| {
            let mut v = eq.as_slice().to_vec();
            for (q, x) in v.iter_mut().enumerate() {
                *x += 0.05 * ((q as f64 + 1.0) * 0.7 + 2.0 * PI * t).sin();
            }
            v
        });
        o.lambdas = UnfoldingParams::new(0.01, -0.02, 0.03);
        o
    }

    #[test]
    fn equilibrium_satisfies_every_block() {
        let c = SystemConfig::polygon(5).unwrap();
        let eq = polygon_equilibrium(&c);
        let o = OrbitSolution::constant(&c, Mesh::uniform(10, 4).unwrap(), 2.7, 1, FamilyType::Planar, &eq);
        let r = assemble_residual(&o, &PhaseConstraints::new(o.clone())).unwrap();
        assert_eq!(r.len(), o.unknown_count() - 1);
        assert!(r.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn lambda1_shifts_z_rows_by_period() {
        let c = SystemConfig::polygon(4).unwrap();
        let o = wobbly(&c, Mesh::uniform(10, 3).unwrap());
        let cons = PhaseConstraints::new(o.clone());
        let r0 = assemble_residual(&o, &cons).unwrap();
        let mut p = o.clone();
        let eps = 1e-3;
        p.lambdas.lambda1 += eps;
        let r1 = assemble_residual(&p, &cons).unwrap();
        let d = o.dim();
        let off = 3 * c.bodies();
        for row in 0..o.mesh.intervals() * 3 * d {
            let q = row % d;
            let expect = if q >= off && (q - off) % 3 == 2 { -o.period * eps } else { 0.0 };
            assert!((r1[row] - r0[row] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let c = SystemConfig::new(3, 0.5).unwrap();
        let o = wobbly(&c, Mesh::uniform(3, 2).unwrap());
        let mut reference = o.clone();
        for v in reference.nodes.iter_mut() {
            *v *= 1.01;
        }
        let cons = PhaseConstraints::new(reference);
        let u = o.to_unknowns();
        let dir: Vec<f64> = (0..u.len()).map(|i| ((i * 7 % 5) as f64) - 2.0).collect();
        let ce = ContinuationEquation::pseudo_arclength(&o, &dir, 0.1);
        let (r, blocks, params) = assemble(&o, &cons, Some(&ce), true).unwrap();
        let jac = dense(&o, blocks.as_ref().unwrap(), &params);
        let h = 1e-6;
        for col in 0..u.len() {
            let mut up = u.clone();
            let mut um = u.clone();
            up[col] += h;
            um[col] -= h;
            let rp = full_residual(&o.with_unknowns(&up), &cons, &ce).unwrap();
            let rm = full_residual(&o.with_unknowns(&um), &cons, &ce).unwrap();
            for row in 0..u.len() {
                let fd = (rp[row] - rm[row]) / (2.0 * h);
                assert!(
                    (fd - jac[(row, col)]).abs() < 1e-5 * (1.0 + fd.abs()),
                    "row {row} col {col}: fd {fd} vs {}",
                    jac[(row, col)]
                );
            }
        }
        assert_eq!(r.len(), u.len());
        // dimensions: d (N m + 1) + 3 + 1 unknowns and equations
        assert_eq!(u.len(), c.dim() * (3 * 2 + 1) + 4);
    }

    #[test]
    fn structured_factorization_solves_the_assembled_system() {
        let c = SystemConfig::polygon(3).unwrap();
        let o = wobbly(&c, Mesh::uniform(4, 3).unwrap());
        let cons = PhaseConstraints::new(o.clone());
        let u = o.to_unknowns();
        let dir: Vec<f64> = (0..u.len()).map(|i| (i as f64 * 0.37).cos()).collect();
        let ce = ContinuationEquation::pseudo_arclength(&o, &dir, 0.0);
        let (r, blocks, params) = assemble(&o, &cons, Some(&ce), true).unwrap();
        let jac = dense(&o, blocks.as_ref().unwrap(), &params);
        let (_, fac) = residual_and_factorization(&o, &cons, &ce).unwrap();
        let x = fac.solve(&r);
        let back = &jac * nalgebra::DVector::from_column_slice(&x);
        for i in 0..r.len() {
            assert!((back[i] - r[i]).abs() < 1e-9 * (1.0 + r[i].abs()));
        }
    }

    #[test]
    fn mismatched_reference_mesh_is_rejected() {
        let c = SystemConfig::polygon(3).unwrap();
        let a = wobbly(&c, Mesh::uniform(4, 3).unwrap());
        let b = wobbly(&c, Mesh::uniform(5, 3).unwrap());
        assert!(matches!(
            assemble_residual(&a, &PhaseConstraints::new(b)),
            Err(Error::MeshMismatch(_))
        ));
    }
}
