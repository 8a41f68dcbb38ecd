//! Rotating-frame equations of motion for `n` unit masses on a ring, with an
//! optional central mass (the Maxwell configuration).
//!
//! Complex planar positions are stored as real pairs. The planar rotation
//! generator is the symplectic matrix `J = [[0, 1], [-1, 0]]`, so the
//! Coriolis term reads `2ω J v` and the rotating frame turns counterclockwise
//! with angular velocity `ω = frame_freq` relative to the inertial frame.
//!
//! State vectors are flat: the `3B` positions of all `B` bodies come first,
//! followed by the `3B` velocities. When a central body is present it occupies
//! slot 0 and ring body `j` (1-based) sits in slot `j`; otherwise ring body `j`
//! sits in slot `j - 1`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Bodies closer than this are treated as colliding. The polygon has unit
/// circumradius.
pub const COLLISION_GUARD: f64 = 1e-3;

/// `s_k = 1/4 Σ_{j=1}^{n-1} sin²(k j ζ/2) / sin³(j ζ/2)` with `ζ = 2π/n`.
pub fn s_coefficient(n: usize, k: i64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidConfig(format!("s_k needs n >= 2, got {n}")));
    }
    let zeta = 2.0 * PI / n as f64;
    // s_{n-k} = s_k holds exactly when both evaluate the same sum
    let k = k.rem_euclid(n as i64);
    let k = k.min(n as i64 - k) as f64;
    let sum: f64 = (1..n)
        .map(|j| {
            let j = j as f64;
            let num = (k * j * zeta / 2.0).sin();
            let den = (j * zeta / 2.0).sin();
            num * num / (den * den * den)
        })
        .sum();
    Ok(0.25 * sum)
}

/// Problem definition: ring size, central mass and rotating-frame frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemConfig {
    n: usize,
    mu: f64,
    frame_freq: f64,
    zeta: f64,
}

impl SystemConfig {
    /// A ring of `n` unit masses with central mass `mu` (0 for the pure polygon).
    /// The frame frequency is `sqrt(mu + s_1)`, which makes the polygon an
    /// equilibrium.
    pub fn new(n: usize, mu: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidConfig(format!("need n >= 3, got {n}")));
        }
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(Error::InvalidConfig(format!("central mass must be >= 0, got {mu}")));
        }
        let s1 = s_coefficient(n, 1)?;
        Ok(Self {
            n,
            mu,
            frame_freq: (mu + s1).sqrt(),
            zeta: 2.0 * PI / n as f64,
        })
    }

    pub fn polygon(n: usize) -> Result<Self> {
        Self::new(n, 0.0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn frame_freq(&self) -> f64 {
        self.frame_freq
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn has_central(&self) -> bool {
        self.mu > 0.0
    }

    /// Number of bodies carried in the state.
    pub fn bodies(&self) -> usize {
        self.n + usize::from(self.has_central())
    }

    /// Length of a phase-space vector.
    pub fn dim(&self) -> usize {
        6 * self.bodies()
    }

    /// Storage slot of ring body `j` (1-based, `1..=n`).
    pub fn ring_slot(&self, j: usize) -> usize {
        debug_assert!((1..=self.n).contains(&j));
        j - 1 + usize::from(self.has_central())
    }

    /// Storage slot of the central body, if any.
    pub fn central_slot(&self) -> Option<usize> {
        self.has_central().then_some(0)
    }

    pub fn mass(&self, slot: usize) -> f64 {
        if self.has_central() && slot == 0 {
            self.mu
        } else {
            1.0
        }
    }

    /// Index of component `c` (0=x, 1=y, 2=z) of the position of `slot`.
    pub fn pos_index(&self, slot: usize, c: usize) -> usize {
        3 * slot + c
    }

    /// Index of component `c` of the velocity of `slot`.
    pub fn vel_index(&self, slot: usize, c: usize) -> usize {
        3 * self.bodies() + 3 * slot + c
    }
}

/// Positions and velocities of every body at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    data: Vec<f64>,
}

/// Time derivative of a [`PhasePoint`]; same layout.
pub type PhaseDerivative = PhasePoint;

impl PhasePoint {
    pub fn from_vec(config: &SystemConfig, data: Vec<f64>) -> Result<Self> {
        if data.len() != config.dim() {
            return Err(Error::InvalidConfig(format!(
                "phase point has length {}, expected {}",
                data.len(),
                config.dim()
            )));
        }
        Ok(Self { data })
    }

    pub fn zeros(config: &SystemConfig) -> Self {
        Self {
            data: vec![0.0; config.dim()],
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn bodies(&self) -> usize {
        self.data.len() / 6
    }

    pub fn position(&self, slot: usize) -> [f64; 3] {
        let i = 3 * slot;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn velocity(&self, slot: usize) -> [f64; 3] {
        let i = 3 * self.bodies() + 3 * slot;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Coefficients of the three unfolding fields.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UnfoldingParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
}

impl UnfoldingParams {
    pub const ZERO: Self = Self {
        lambda1: 0.0,
        lambda2: 0.0,
        lambda3: 0.0,
    };

    pub fn new(lambda1: f64, lambda2: f64, lambda3: f64) -> Self {
        Self {
            lambda1,
            lambda2,
            lambda3,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.lambda1, self.lambda2, self.lambda3]
    }

    pub fn max_abs(&self) -> f64 {
        self.lambda1
            .abs()
            .max(self.lambda2.abs())
            .max(self.lambda3.abs())
    }
}

/// Regular polygon `u_j = e^{i j ζ}` at rest, central body at the origin.
pub fn polygon_equilibrium(config: &SystemConfig) -> PhasePoint {
    let mut p = PhasePoint::zeros(config);
    for j in 1..=config.n() {
        let s = config.ring_slot(j);
        let angle = j as f64 * config.zeta();
        p.data[3 * s] = angle.cos();
        p.data[3 * s + 1] = angle.sin();
    }
    p
}

/// Smallest distance between any two bodies.
pub fn min_pair_distance(config: &SystemConfig, x: &[f64]) -> f64 {
    let b = config.bodies();
    let mut best = f64::INFINITY;
    for a in 0..b {
        for c in a + 1..b {
            let dx = x[3 * c] - x[3 * a];
            let dy = x[3 * c + 1] - x[3 * a + 1];
            let dz = x[3 * c + 2] - x[3 * a + 2];
            best = best.min((dx * dx + dy * dy + dz * dz).sqrt());
        }
    }
    best
}

/// Rotating-frame vector field with the unfolding terms.
pub fn vector_field(
    state: &PhasePoint,
    config: &SystemConfig,
    lambdas: &UnfoldingParams,
) -> Result<PhaseDerivative> {
    let mut out = PhasePoint::zeros(config);
    field_into(config, &state.data, lambdas, &mut out.data)?;
    Ok(out)
}

/// Writes the vector field at `x` into `out`.
pub fn field_into(
    config: &SystemConfig,
    x: &[f64],
    lambdas: &UnfoldingParams,
    out: &mut [f64],
) -> Result<()> {
    let b = config.bodies();
    let off = 3 * b;
    let w = config.frame_freq();
    let w2 = w * w;
    out[..off].copy_from_slice(&x[off..2 * off]);
    for a in 0..b {
        let (px, py) = (x[3 * a], x[3 * a + 1]);
        let (vx, vy, vz) = (x[off + 3 * a], x[off + 3 * a + 1], x[off + 3 * a + 2]);
        let acc = &mut out[off + 3 * a..off + 3 * a + 3];
        acc[0] = 2.0 * w * vy + w2 * px + lambdas.lambda2 * py + lambdas.lambda3 * vx;
        acc[1] = -2.0 * w * vx + w2 * py - lambdas.lambda2 * px + lambdas.lambda3 * vy;
        acc[2] = lambdas.lambda1 + lambdas.lambda3 * vz;
    }
    for a in 0..b {
        let ma = config.mass(a);
        for c in a + 1..b {
            let mc = config.mass(c);
            let d = [
                x[3 * c] - x[3 * a],
                x[3 * c + 1] - x[3 * a + 1],
                x[3 * c + 2] - x[3 * a + 2],
            ];
            let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
            let r = r2.sqrt();
            if !(r >= COLLISION_GUARD) {
                return Err(Error::CollisionProximity { distance: r });
            }
            let inv_r3 = 1.0 / (r2 * r);
            for i in 0..3 {
                out[off + 3 * a + i] += mc * d[i] * inv_r3;
                out[off + 3 * c + i] -= ma * d[i] * inv_r3;
            }
        }
    }
    Ok(())
}

/// Writes the Jacobian of the vector field at `x` (row-major, `dim × dim`).
/// The caller is expected to have evaluated [`field_into`] at the same point,
/// which guards against collisions.
pub fn field_jacobian_into(
    config: &SystemConfig,
    x: &[f64],
    lambdas: &UnfoldingParams,
    out: &mut [f64],
) {
    let dim = config.dim();
    let b = config.bodies();
    let off = 3 * b;
    let w = config.frame_freq();
    out.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..off {
        out[i * dim + off + i] = 1.0;
    }
    for a in 0..b {
        let r0 = off + 3 * a;
        // centrifugal and rotation unfolding
        out[r0 * dim + 3 * a] = w * w;
        out[(r0 + 1) * dim + 3 * a + 1] = w * w;
        out[r0 * dim + 3 * a + 1] = lambdas.lambda2;
        out[(r0 + 1) * dim + 3 * a] = -lambdas.lambda2;
        // Coriolis and energy unfolding
        out[r0 * dim + off + 3 * a + 1] = 2.0 * w;
        out[(r0 + 1) * dim + off + 3 * a] = -2.0 * w;
        for i in 0..3 {
            out[(r0 + i) * dim + off + 3 * a + i] += lambdas.lambda3;
        }
    }
    for a in 0..b {
        let ma = config.mass(a);
        for c in a + 1..b {
            let mc = config.mass(c);
            let d = [
                x[3 * c] - x[3 * a],
                x[3 * c + 1] - x[3 * a + 1],
                x[3 * c + 2] - x[3 * a + 2],
            ];
            let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
            let r = r2.sqrt();
            let inv_r3 = 1.0 / (r2 * r);
            let inv_r5 = inv_r3 / r2;
            for i in 0..3 {
                for l in 0..3 {
                    let kil = if i == l { inv_r3 } else { 0.0 } - 3.0 * d[i] * d[l] * inv_r5;
                    let ra = (off + 3 * a + i) * dim;
                    let rc = (off + 3 * c + i) * dim;
                    out[ra + 3 * c + l] += mc * kil;
                    out[ra + 3 * a + l] -= mc * kil;
                    out[rc + 3 * a + l] += ma * kil;
                    out[rc + 3 * c + l] -= ma * kil;
                }
            }
        }
    }
}

/// Gravitational potential `V = Σ_{i<j} m_i m_j / |x_i - x_j|`.
pub fn potential(config: &SystemConfig, x: &[f64]) -> f64 {
    let b = config.bodies();
    let mut v = 0.0;
    for a in 0..b {
        for c in a + 1..b {
            let dx = x[3 * c] - x[3 * a];
            let dy = x[3 * c + 1] - x[3 * a + 1];
            let dz = x[3 * c + 2] - x[3 * a + 2];
            v += config.mass(a) * config.mass(c) / (dx * dx + dy * dy + dz * dz).sqrt();
        }
    }
    v
}

/// The three unfolding fields, as per-body acceleration triples:
/// `F¹ = e₃`, `F² = diag(J, 0) x`, `F³ = v`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnfoldingFields {
    pub translation: Vec<[f64; 3]>,
    pub rotation: Vec<[f64; 3]>,
    pub dissipation: Vec<[f64; 3]>,
}

impl UnfoldingFields {
    pub fn as_array(&self) -> [&[[f64; 3]]; 3] {
        [&self.translation, &self.rotation, &self.dissipation]
    }

    /// Gram matrix of the three stacked fields.
    pub fn gram(&self) -> [[f64; 3]; 3] {
        let f = self.as_array();
        let mut g = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                g[a][b] = f[a]
                    .iter()
                    .zip(f[b])
                    .map(|(p, q)| p[0] * q[0] + p[1] * q[1] + p[2] * q[2])
                    .sum();
            }
        }
        g
    }
}

pub fn unfolding_fields(state: &PhasePoint, config: &SystemConfig) -> UnfoldingFields {
    let b = config.bodies();
    let mut out = UnfoldingFields {
        translation: vec![[0.0, 0.0, 1.0]; b],
        rotation: Vec::with_capacity(b),
        dissipation: Vec::with_capacity(b),
    };
    for s in 0..b {
        let p = state.position(s);
        out.rotation.push([p[1], -p[0], 0.0]);
        out.dissipation.push(state.velocity(s));
    }
    out
}

/// First integrals: vertical momentum and the rotational quantity
/// `L = Σ m (u̇·J u − ω |u|²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConservedQuantities {
    pub pz: f64,
    pub angular: f64,
}

pub fn conserved_quantities(state: &PhasePoint, config: &SystemConfig) -> ConservedQuantities {
    let w = config.frame_freq();
    let mut pz = 0.0;
    let mut angular = 0.0;
    for s in 0..config.bodies() {
        let m = config.mass(s);
        let p = state.position(s);
        let v = state.velocity(s);
        pz += m * v[2];
        angular += m * (v[0] * p[1] - v[1] * p[0] - w * (p[0] * p[0] + p[1] * p[1]));
    }
    ConservedQuantities { pz, angular }
}

/// Jacobi energy `½ Σ m |v|² − ½ ω² Σ m |u|² − V`, conserved when λ = 0.
pub fn jacobi_energy(state: &PhasePoint, config: &SystemConfig) -> f64 {
    let w2 = config.frame_freq().powi(2);
    let mut e = 0.0;
    for s in 0..config.bodies() {
        let m = config.mass(s);
        let p = state.position(s);
        let v = state.velocity(s);
        e += 0.5 * m * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        e -= 0.5 * m * w2 * (p[0] * p[0] + p[1] * p[1]);
    }
    e - potential(config, state.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn random_state(config: &SystemConfig, seed: u64) -> PhasePoint {
        // small deterministic LCG; perturbation keeps bodies well separated
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut p = polygon_equilibrium(config);
        for v in p.as_mut_slice().iter_mut() {
            *v += 0.2 * next();
        }
        p
    }

    #[test]
    fn s1_for_seven_bodies_matches_reference_period() {
        let s1 = s_coefficient(7, 1).unwrap();
        assert!((2.0 * PI / s1.sqrt() - 4.1387).abs() < 5e-4);
    }

    #[test]
    fn s_coefficient_hand_values() {
        assert_relative_eq!(s_coefficient(3, 1).unwrap(), 1.0 / 3f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(s_coefficient(4, 2).unwrap(), 2f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(
            s_coefficient(9, 2).unwrap(),
            s_coefficient(9, 7).unwrap(),
            max_relative = 1e-14
        );
        assert!(s_coefficient(1, 1).is_err());
    }

    #[test]
    fn config_rejects_small_rings() {
        assert!(SystemConfig::polygon(2).is_err());
        assert!(SystemConfig::new(5, -1.0).is_err());
        let c = SystemConfig::new(7, 200.0).unwrap();
        let s1 = s_coefficient(7, 1).unwrap();
        assert_relative_eq!(c.frame_freq().powi(2), 200.0 + s1, max_relative = 1e-12);
        assert_eq!(c.dim(), 48);
        assert!((c.zeta() * 7.0 - 2.0 * PI).abs() < 1e-14);
    }

    #[test]
    fn square_equilibrium_positions() {
        let c = SystemConfig::polygon(4).unwrap();
        let p = polygon_equilibrium(&c);
        let expect = [[0.0, 1.0], [-1.0, 0.0], [0.0, -1.0], [1.0, 0.0]];
        for (j, e) in expect.iter().enumerate() {
            let q = p.position(c.ring_slot(j + 1));
            assert!((q[0] - e[0]).abs() < 1e-15 && (q[1] - e[1]).abs() < 1e-15 && q[2] == 0.0);
        }
    }

    #[test]
    fn equilibria_are_fixed_points() {
        for n in 3..=12 {
            for mu in [0.0, 200.0, 300.0] {
                let c = SystemConfig::new(n, mu).unwrap();
                let f = vector_field(&polygon_equilibrium(&c), &c, &UnfoldingParams::ZERO).unwrap();
                assert!(f.max_abs() < 1e-10, "n={n} mu={mu} |f|={}", f.max_abs());
                if mu == 0.0 {
                    assert!(f.max_abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn force_is_gradient_of_potential() {
        let c = SystemConfig::new(5, 3.0).unwrap();
        let p = random_state(&c, 7);
        let f = vector_field(&p, &c, &UnfoldingParams::ZERO).unwrap();
        let off = 3 * c.bodies();
        let w2 = c.frame_freq().powi(2);
        for s in 0..c.bodies() {
            for comp in 0..3 {
                let i = 3 * s + comp;
                let h = 1e-5;
                let mut xp = p.as_slice().to_vec();
                let mut xm = xp.clone();
                xp[i] += h;
                xm[i] -= h;
                let grad = (potential(&c, &xp) - potential(&c, &xm)) / (2.0 * h);
                // remove the inertial terms to isolate the gravitational acceleration
                let v = p.velocity(s);
                let q = p.position(s);
                let inertial = match comp {
                    0 => 2.0 * c.frame_freq() * v[1] + w2 * q[0],
                    1 => -2.0 * c.frame_freq() * v[0] + w2 * q[1],
                    _ => 0.0,
                };
                let acc = (f.as_slice()[off + i] - inertial) * c.mass(s);
                assert_relative_eq!(acc, grad, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn analytic_jacobian_matches_finite_differences() {
        let c = SystemConfig::new(4, 2.0).unwrap();
        let p = random_state(&c, 3);
        let lam = UnfoldingParams::new(0.3, -0.2, 0.1);
        let dim = c.dim();
        let mut jac = vec![0.0; dim * dim];
        field_jacobian_into(&c, p.as_slice(), &lam, &mut jac);
        let h = 1e-6;
        for col in 0..dim {
            let mut xp = p.as_slice().to_vec();
            let mut xm = xp.clone();
            xp[col] += h;
            xm[col] -= h;
            let mut fp = vec![0.0; dim];
            let mut fm = vec![0.0; dim];
            field_into(&c, &xp, &lam, &mut fp).unwrap();
            field_into(&c, &xm, &lam, &mut fm).unwrap();
            for row in 0..dim {
                let fd = (fp[row] - fm[row]) / (2.0 * h);
                assert!(
                    (fd - jac[row * dim + col]).abs() < 1e-6 * (1.0 + fd.abs()),
                    "row {row} col {col}: {fd} vs {}",
                    jac[row * dim + col]
                );
            }
        }
    }

    #[test]
    fn momentum_balance_and_unfolding_contribution() {
        let c = SystemConfig::polygon(6).unwrap();
        let p = random_state(&c, 11);
        let lam = UnfoldingParams::new(0.7, 0.4, -0.3);
        let f0 = vector_field(&p, &c, &UnfoldingParams::ZERO).unwrap();
        let f = vector_field(&p, &c, &lam).unwrap();
        let off = 3 * c.bodies();
        let sum_z0: f64 = (0..c.bodies()).map(|s| f0.as_slice()[off + 3 * s + 2]).sum();
        assert!(sum_z0.abs() < 1e-12);
        let sum_z: f64 = (0..c.bodies()).map(|s| f.as_slice()[off + 3 * s + 2]).sum();
        let sum_vz: f64 = (0..c.bodies()).map(|s| p.velocity(s)[2]).sum();
        assert_relative_eq!(sum_z, 6.0 * lam.lambda1 + lam.lambda3 * sum_vz, epsilon = 1e-12);
    }

    #[test]
    fn unfolding_fields_at_equilibrium() {
        let c = SystemConfig::polygon(5).unwrap();
        let p = polygon_equilibrium(&c);
        let f = unfolding_fields(&p, &c);
        for s in 0..c.bodies() {
            assert_eq!(f.translation[s], [0.0, 0.0, 1.0]);
            assert_eq!(f.dissipation[s], [0.0, 0.0, 0.0]);
            let q = p.position(s);
            let r = f.rotation[s];
            assert!((r[0] * q[0] + r[1] * q[1]).abs() < 1e-15);
        }
        let g = unfolding_fields(&random_state(&c, 5), &c).gram();
        let det = g[0][0] * (g[1][1] * g[2][2] - g[1][2] * g[2][1])
            - g[0][1] * (g[1][0] * g[2][2] - g[1][2] * g[2][0])
            + g[0][2] * (g[1][0] * g[2][1] - g[1][1] * g[2][0]);
        assert!(det > 1e-6);
    }

    #[test]
    fn conserved_quantities_at_equilibrium_and_mirror() {
        let c = SystemConfig::polygon(7).unwrap();
        let q = conserved_quantities(&polygon_equilibrium(&c), &c);
        assert_eq!(q.pz, 0.0);
        assert_relative_eq!(q.angular, -7.0 * 2.0 * PI / 4.1387, max_relative = 2e-4);
        let p = random_state(&c, 9);
        let mut m = p.clone();
        for s in 0..c.bodies() {
            let zi = c.pos_index(s, 2);
            let vi = c.vel_index(s, 2);
            m.as_mut_slice()[zi] *= -1.0;
            m.as_mut_slice()[vi] *= -1.0;
        }
        let a = conserved_quantities(&p, &c);
        let b = conserved_quantities(&m, &c);
        assert_eq!(a.pz, -b.pz);
        assert_eq!(a.angular, b.angular);
    }

    #[test]
    fn collision_guard_fires() {
        let c = SystemConfig::polygon(3).unwrap();
        let mut p = polygon_equilibrium(&c);
        let (a, b) = (c.ring_slot(1), c.ring_slot(2));
        let q = p.position(b);
        for i in 0..3 {
            p.as_mut_slice()[3 * a + i] = q[i] + if i == 0 { 5e-4 } else { 0.0 };
        }
        assert!(matches!(
            vector_field(&p, &c, &UnfoldingParams::ZERO),
            Err(Error::CollisionProximity { .. })
        ));
    }
}
