//! Collocation meshes on the unit period interval.

use crate::error::{Error, Result};

/// Smallest interval count accepted by the solver policy.
pub const MIN_INTERVALS: usize = 10;
/// Default number of mesh intervals.
pub const DEFAULT_INTERVALS: usize = 100;
/// Default number of Gauss points per interval.
pub const DEFAULT_DEGREE: usize = 4;

/// Breakpoints `0 = t_0 < … < t_N = 1` and the collocation degree.
///
/// On each interval the solution is a polynomial of degree `m` represented by
/// its values at `m + 1` equally spaced nodes (the end nodes are shared with
/// the neighbours), and the differential equation is imposed at the `m`
/// Gauss–Legendre points.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    breakpoints: Vec<f64>,
    degree: usize,
}

impl Mesh {
    pub fn uniform(intervals: usize, degree: usize) -> Result<Self> {
        if intervals == 0 {
            return Err(Error::MeshMismatch("mesh needs at least one interval".into()));
        }
        let bp = (0..=intervals).map(|i| i as f64 / intervals as f64).collect();
        Self::from_breakpoints(bp, degree)
    }

    /// Builds a mesh from explicit breakpoints. The interval-count policy
    /// (`N >= MIN_INTERVALS`) is enforced by the continuation settings, not
    /// here, so that deliberately coarse meshes can be tested.
    pub fn from_breakpoints(breakpoints: Vec<f64>, degree: usize) -> Result<Self> {
        if !(2..=7).contains(&degree) {
            return Err(Error::MeshMismatch(format!(
                "collocation degree {degree} outside 2..=7"
            )));
        }
        if breakpoints.len() < 2 {
            return Err(Error::MeshMismatch("mesh needs at least one interval".into()));
        }
        let first = breakpoints[0];
        let last = *breakpoints.last().unwrap();
        if first != 0.0 || last != 1.0 {
            return Err(Error::MeshMismatch(format!(
                "breakpoints must span [0, 1], got [{first}, {last}]"
            )));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::MeshMismatch("breakpoints must increase strictly".into()));
        }
        Ok(Self {
            breakpoints,
            degree,
        })
    }

    pub fn intervals(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn width(&self, i: usize) -> f64 {
        self.breakpoints[i + 1] - self.breakpoints[i]
    }

    /// Total number of nodes `N·m + 1`.
    pub fn node_count(&self) -> usize {
        self.intervals() * self.degree + 1
    }

    /// Time of node `l` (0-based, global numbering).
    pub fn node_time(&self, l: usize) -> f64 {
        let m = self.degree;
        let i = (l / m).min(self.intervals() - 1);
        let r = l - i * m;
        self.breakpoints[i] + self.width(i) * r as f64 / m as f64
    }

    /// Interval containing `t ∈ [0, 1]`.
    pub fn locate(&self, t: f64) -> usize {
        let n = self.intervals();
        match self
            .breakpoints
            .binary_search_by(|b| b.partial_cmp(&t).unwrap_or(std::cmp::Ordering::Less))
        {
            Ok(i) => i.min(n - 1),
            Err(i) => i.saturating_sub(1).min(n - 1),
        }
    }

    pub fn same_as(&self, other: &Mesh) -> bool {
        self == other
    }
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    for i in 0..m {
        // Newton on P_m starting from the Chebyshev-like guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(m, x);
        dp = if d != 0.0 { d } else { dp };
        nodes.push(0.5 * (1.0 - x));
        weights.push(1.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

fn legendre(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=m {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Lagrange basis on the `m + 1` equally spaced nodes of `[0, 1]`.
#[derive(Debug, Clone)]
pub struct LagrangeBasis {
    nodes: Vec<f64>,
    denom: Vec<f64>,
}

impl LagrangeBasis {
    pub fn equispaced(m: usize) -> Self {
        let nodes: Vec<f64> = (0..=m).map(|l| l as f64 / m as f64).collect();
        let denom = (0..=m)
            .map(|l| {
                (0..=m)
                    .filter(|&q| q != l)
                    .map(|q| nodes[l] - nodes[q])
                    .product()
            })
            .collect();
        Self { nodes, denom }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Values of all basis polynomials at `s`.
    pub fn values(&self, s: f64) -> Vec<f64> {
        let n = self.nodes.len();
        (0..n)
            .map(|l| {
                (0..n)
                    .filter(|&q| q != l)
                    .map(|q| s - self.nodes[q])
                    .product::<f64>()
                    / self.denom[l]
            })
            .collect()
    }

    /// Derivatives of all basis polynomials at `s`.
    pub fn derivatives(&self, s: f64) -> Vec<f64> {
        let n = self.nodes.len();
        (0..n)
            .map(|l| {
                let mut sum = 0.0;
                for r in 0..n {
                    if r == l {
                        continue;
                    }
                    let mut prod = 1.0;
                    for q in 0..n {
                        if q != l && q != r {
                            prod *= s - self.nodes[q];
                        }
                    }
                    sum += prod;
                }
                sum / self.denom[l]
            })
            .collect()
    }
}

/// Precomputed basis data at the Gauss points of the reference interval.
#[derive(Debug, Clone)]
pub struct CollocationTables {
    pub degree: usize,
    pub gauss: Vec<f64>,
    pub weights: Vec<f64>,
    /// `values[c][l]`: basis `l` at Gauss point `c`.
    pub values: Vec<Vec<f64>>,
    /// `derivs[c][l]`: derivative of basis `l` at Gauss point `c` (reference scale).
    pub derivs: Vec<Vec<f64>>,
    pub basis: LagrangeBasis,
}

impl CollocationTables {
    pub fn new(degree: usize) -> Self {
        let (gauss, weights) = gauss_legendre(degree);
        let basis = LagrangeBasis::equispaced(degree);
        let values = gauss.iter().map(|&g| basis.values(g)).collect();
        let derivs = gauss.iter().map(|&g| basis.derivatives(g)).collect();
        Self {
            degree,
            gauss,
            weights,
            values,
            derivs,
            basis,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_is_exact_to_degree_2m_minus_1() {
        for m in 2..=7 {
            let (x, w) = gauss_legendre(m);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for p in 0..2 * m {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                assert!((q - 1.0 / (p as f64 + 1.0)).abs() < 1e-14, "m={m} p={p}");
            }
        }
    }

    #[test]
    fn lagrange_basis_reproduces_polynomials() {
        let b = LagrangeBasis::equispaced(4);
        let f = |s: f64| 1.0 + 2.0 * s - 3.0 * s.powi(3) + s.powi(4);
        let df = |s: f64| 2.0 - 9.0 * s * s + 4.0 * s.powi(3);
        let nodes: Vec<f64> = (0..=4).map(|l| l as f64 / 4.0).collect();
        for s in [0.0, 0.13, 0.5, 0.77, 1.0] {
            let v: f64 = b.values(s).iter().zip(&nodes).map(|(l, &t)| l * f(t)).sum();
            let d: f64 = b.derivatives(s).iter().zip(&nodes).map(|(l, &t)| l * f(t)).sum();
            assert!((v - f(s)).abs() < 1e-13);
            assert!((d - df(s)).abs() < 1e-12);
        }
    }

    #[test]
    fn mesh_validation_and_lookup() {
        assert!(Mesh::uniform(10, 1).is_err());
        assert!(Mesh::uniform(10, 8).is_err());
        assert!(Mesh::from_breakpoints(vec![0.0, 0.5, 0.5, 1.0], 4).is_err());
        assert!(Mesh::from_breakpoints(vec![0.0, 0.5, 0.9], 4).is_err());
        let m = Mesh::uniform(10, 4).unwrap();
        assert_eq!(m.node_count(), 41);
        assert_eq!(m.locate(0.0), 0);
        assert_eq!(m.locate(1.0), 9);
        assert_eq!(m.locate(0.35), 3);
        assert!((m.node_time(6) - 0.15).abs() < 1e-15);
        assert_eq!(m.node_time(40), 1.0);
    }
}
