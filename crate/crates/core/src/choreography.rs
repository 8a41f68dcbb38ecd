//! Resonance arithmetic, the inertial-frame picture of resonant orbits, and
//! certificates that a resonant orbit is a choreography.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::bvp::orbit::OrbitSolution;
use crate::error::{Error, Result};
use crate::nbody::SystemConfig;

/// `Ω = (k·ω/ν − 1)/n`, the rotation of the polygon symmetry seen in the
/// inertial frame.
pub fn omega_of(nu: f64, k: i64, config: &SystemConfig) -> f64 {
    (k as f64 * config.frame_freq() / nu - 1.0) / config.n() as f64
}

pub fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Inverse of `a` modulo `m` in `[0, m)`; `0` for `m = 1`.
pub fn modular_inverse(a: i64, m: i64) -> Result<i64> {
    if m < 1 {
        return Err(Error::InvalidConfig(format!("modulus {m} must be positive")));
    }
    if m == 1 {
        return Ok(0);
    }
    // extended Euclid on (a mod m, m)
    let (mut r0, mut r1) = (a.rem_euclid(m), m);
    let (mut s0, mut s1) = (1i64, 0i64);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
    }
    if r0 != 1 {
        return Err(Error::NotCoprime { a, m });
    }
    Ok(s0.rem_euclid(m))
}

/// An `ℓ:m` resonance of a family with wave number `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resonance {
    pub ell: i64,
    pub m: i64,
    pub k: i64,
    pub n: i64,
    pub frame_freq: f64,
    /// `T = (2π/ω)·ℓ/m` in the rotating frame.
    pub period: f64,
    /// `r = (kℓ − m)/n`.
    pub r: i64,
    /// Time-shift index ordering the bodies along the curve, in `[0, n·m)`.
    pub k_tilde: i64,
    /// `gcd(k, n)`: the bodies form groups of `d`-gons.
    pub d: i64,
}

impl Resonance {
    pub fn new(config: &SystemConfig, k: i64, ell: i64, m: i64) -> Result<Self> {
        if ell < 1 || m < 1 {
            return Err(Error::InvalidConfig(format!("resonance {ell}:{m} must be positive")));
        }
        if gcd(ell, m) != 1 {
            return Err(Error::NotCoprime { a: ell, m });
        }
        let n = config.n() as i64;
        let num = k * ell - m;
        if num.rem_euclid(n) != 0 {
            return Err(Error::NotChoreography {
                ell,
                m,
                k,
                n,
                curves: n / gcd(n, num),
            });
        }
        let r = num / n;
        let ell_star = modular_inverse(ell, m)?;
        let nm = n * m;
        let k_tilde = (k - r * n * ell_star).rem_euclid(nm);
        Ok(Self {
            ell,
            m,
            k,
            n,
            frame_freq: config.frame_freq(),
            period: 2.0 * PI / config.frame_freq() * ell as f64 / m as f64,
            r,
            k_tilde,
            d: gcd(k, n),
        })
    }

    /// Period of the choreography, `m·T`.
    pub fn total_period(&self) -> f64 {
        self.m as f64 * self.period
    }

    /// The rotating-frame frequency `ν = 2π/T`.
    pub fn nu(&self) -> f64 {
        2.0 * PI / self.period
    }
}

/// All coprime `ℓ:m` with `ℓ, m ≤ l_max`, `kℓ ≡ m (mod n)` and period
/// inside `interval`, sorted by period.
pub fn enumerate_resonances(config: &SystemConfig, k: i64, interval: (f64, f64), l_max: i64) -> Vec<Resonance> {
    let (lo, hi) = (interval.0.min(interval.1), interval.0.max(interval.1));
    let mut out = Vec::new();
    for ell in 1..=l_max {
        for m in 1..=l_max {
            if gcd(ell, m) != 1 {
                continue;
            }
            let Ok(res) = Resonance::new(config, k, ell, m) else {
                continue;
            };
            if res.period >= lo && res.period <= hi {
                out.push(res);
            }
        }
    }
    out.sort_by(|a, b| a.period.total_cmp(&b.period).then(a.m.cmp(&b.m)));
    out
}

/// Counter-clockwise rotation of `(x, y)` by `angle`.
pub fn rotate(angle: f64, p: [f64; 3]) -> [f64; 3] {
    let (s, c) = angle.sin_cos();
    [c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]]
}

/// Uniform inertial-frame samples of every ring body over one choreography
/// period, endpoint included.
#[derive(Debug, Clone, PartialEq)]
pub struct InertialStates {
    pub times: Vec<f64>,
    /// `bodies[j][i]`: position of ring body `j + 1` at `times[i]`.
    pub bodies: Vec<Vec<[f64; 3]>>,
}

/// Body `n`'s inertial path over one choreography period.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoreographyPath {
    /// `(t, x, y, z)` on a uniform grid over `[0, m·T]`, endpoint included.
    pub samples: Vec<[f64; 4]>,
    pub resonance: Resonance,
    pub source: String,
}

impl ChoreographyPath {
    pub fn points(&self) -> Vec<[f64; 3]> {
        self.samples.iter().map(|s| [s[1], s[2], s[3]]).collect()
    }
}

fn check_period(orbit: &OrbitSolution, res: &Resonance) -> Result<()> {
    if (orbit.period - res.period).abs() > 1e-8 * res.period {
        return Err(Error::PeriodMismatch {
            period: orbit.period,
            expected: res.period,
        });
    }
    Ok(())
}

/// Inertial positions of all ring bodies, `q_j(t) = R(ωt)·u_j(t)`.
pub fn inertial_states(orbit: &OrbitSolution, res: &Resonance, samples_per_period: usize) -> Result<InertialStates> {
    check_period(orbit, res)?;
    if samples_per_period < 2 {
        return Err(Error::InvalidConfig("need at least two samples per period".into()));
    }
    let config = &orbit.config;
    let count = samples_per_period * res.m as usize;
    let total = res.total_period();
    let mut times = Vec::with_capacity(count + 1);
    let mut bodies = vec![Vec::with_capacity(count + 1); config.n()];
    for i in 0..=count {
        let t = total * i as f64 / count as f64;
        let u = orbit.evaluate(t / orbit.period);
        let angle = config.frame_freq() * t;
        for (j, body) in bodies.iter_mut().enumerate() {
            let p = u.position(config.ring_slot(j + 1));
            body.push(rotate(angle, p));
        }
        times.push(t);
    }
    Ok(InertialStates { times, bodies })
}

/// Body `n`'s path in the inertial frame over `[0, m·T]`.
pub fn to_inertial(orbit: &OrbitSolution, res: &Resonance, samples_per_period: usize) -> Result<ChoreographyPath> {
    let states = inertial_states(orbit, res, samples_per_period)?;
    let n = orbit.config.n();
    let samples = states
        .times
        .iter()
        .zip(&states.bodies[n - 1])
        .map(|(t, p)| [*t, p[0], p[1], p[2]])
        .collect();
    Ok(ChoreographyPath {
        samples,
        resonance: *res,
        source: format!("n{}-k{}-T{:.10}", n, orbit.wave_number, orbit.period),
    })
}

/// Rotating-frame samples recovered from inertial ones.
pub fn to_rotating(states: &InertialStates, frame_freq: f64) -> InertialStates {
    let bodies = states
        .bodies
        .iter()
        .map(|b| {
            b.iter()
                .zip(&states.times)
                .map(|(p, t)| rotate(-frame_freq * t, *p))
                .collect()
        })
        .collect();
    InertialStates {
        times: states.times.clone(),
        bodies,
    }
}

/// Residuals certifying the choreography.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryReport {
    pub closure: f64,
    /// `max ‖q_j(t) − q_n(t + j·k̃·T/n)‖`.
    pub same_path: f64,
    /// `max ‖q_n(t − T) − R(−2πℓ/m)·q_n(t)‖`.
    pub rotation: f64,
    pub winding: i64,
    /// `max ‖q_{j+n/d}(t) − R(2π/d)·q_j(t)‖`.
    pub grouping: f64,
}

/// Periodic trigonometric interpolation on a uniform grid.
struct Trig {
    spectra: [Vec<Complex64>; 3],
    len: usize,
}

impl Trig {
    fn new(points: &[[f64; 3]]) -> Self {
        let len = points.len();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(len);
        let spectra = std::array::from_fn(|c| {
            let mut buf: Vec<Complex64> = points.iter().map(|p| Complex64::new(p[c], 0.0)).collect();
            fft.process(&mut buf);
            buf
        });
        Self { spectra, len }
    }

    /// Samples shifted forward by `shift` grid steps: `f(t_i + shift·Δ)`.
    fn shifted(&self, shift: f64) -> Vec<[f64; 3]> {
        let len = self.len;
        let mut planner = FftPlanner::new();
        let ifft = planner.plan_fft_inverse(len);
        let mut out = vec![[0.0; 3]; len];
        for (c, spec) in self.spectra.iter().enumerate() {
            let mut buf: Vec<Complex64> = spec
                .iter()
                .enumerate()
                .map(|(q, v)| {
                    let freq = if 2 * q < len {
                        q as f64
                    } else if 2 * q == len {
                        0.0
                    } else {
                        q as f64 - len as f64
                    };
                    let v = if 2 * q == len {
                        // Nyquist term: keep its real, even part
                        *v * (PI * shift).cos()
                    } else {
                        *v
                    };
                    v * Complex64::from_polar(1.0, 2.0 * PI * freq * shift / len as f64)
                })
                .collect();
            ifft.process(&mut buf);
            for (o, b) in out.iter_mut().zip(&buf) {
                o[c] = b.re / len as f64;
            }
        }
        out
    }
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Signed number of turns of the planar projection about its centroid.
pub fn winding_number(points: &[[f64; 3]]) -> f64 {
    let open = &points[..points.len() - 1];
    let cx = open.iter().map(|p| p[0]).sum::<f64>() / open.len() as f64;
    let cy = open.iter().map(|p| p[1]).sum::<f64>() / open.len() as f64;
    let mut total = 0.0;
    for w in points.windows(2) {
        let a = (w[0][1] - cy).atan2(w[0][0] - cx);
        let b = (w[1][1] - cy).atan2(w[1][0] - cx);
        let mut d = b - a;
        while d > PI {
            d -= 2.0 * PI;
        }
        while d < -PI {
            d += 2.0 * PI;
        }
        total += d;
    }
    total / (2.0 * PI)
}

/// Closure, same-path, rotation, winding and grouping checks on the
/// inertial samples.
pub fn verify_choreography(path: &ChoreographyPath, states: &InertialStates) -> SymmetryReport {
    let res = &path.resonance;
    let pts = path.points();
    let count = pts.len() - 1;
    let closure = dist(&pts[0], &pts[count]);
    let trig = Trig::new(&pts[..count]);
    let n = states.bodies.len();
    let steps_per_t = count as f64 / res.m as f64;

    let mut same_path: f64 = 0.0;
    for (j, body) in states.bodies.iter().enumerate().take(n - 1) {
        let jj = (j + 1) as f64;
        let shift = jj * res.k_tilde as f64 * steps_per_t / res.n as f64;
        let moved = trig.shifted(shift);
        for (a, b) in body[..count].iter().zip(&moved) {
            same_path = same_path.max(dist(a, b));
        }
    }

    let back = trig.shifted(-steps_per_t);
    let angle = -2.0 * PI * res.ell as f64 / res.m as f64;
    let rotation = back
        .iter()
        .zip(&pts[..count])
        .map(|(a, b)| dist(a, &rotate(angle, *b)))
        .fold(0.0, f64::max);

    let winding = winding_number(&pts).round() as i64;

    let group = n / res.d as usize;
    let mut grouping: f64 = 0.0;
    if group < n {
        let angle = 2.0 * PI * group as f64 / n as f64;
        for j in 0..n - group {
            for (a, b) in states.bodies[j + group].iter().zip(&states.bodies[j]) {
                grouping = grouping.max(dist(a, &rotate(angle, *b)));
            }
        }
    }
    SymmetryReport {
        closure,
        same_path,
        rotation,
        winding,
        grouping,
    }
}

/// Torus-knot certificate of a path winding around the `z` axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnotCertificate {
    /// Turns around the `z` axis.
    pub ell: i64,
    /// Turns around the core circle of the torus.
    pub m: i64,
    pub major_radius: f64,
    pub minor_radius: f64,
    pub center_z: f64,
    /// Largest distance of a sample from the fitted torus surface.
    pub max_deviation: f64,
}

/// Least-squares circle through points of the `(ρ, z)` half-plane.
fn fit_circle(pts: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    // algebraic fit: ρ² + z² + Dρ + Ez + F = 0
    let mut ata = nalgebra::Matrix3::<f64>::zeros();
    let mut atb = nalgebra::Vector3::<f64>::zeros();
    for &(r, z) in pts {
        let row = nalgebra::Vector3::new(r, z, 1.0);
        ata += row * row.transpose();
        atb += row * -(r * r + z * z);
    }
    let sol = ata.lu().solve(&atb)?;
    let (cr, cz) = (-sol[0] / 2.0, -sol[1] / 2.0);
    let rad2 = cr * cr + cz * cz - sol[2];
    (rad2 > 0.0).then(|| (cr, cz, rad2.sqrt()))
}

/// Fits a torus of revolution about the `z` axis and counts the windings
/// around its two cycles.
pub fn knot_type(path: &ChoreographyPath) -> Result<KnotCertificate> {
    let pts = path.points();
    let scale = pts.iter().map(|p| p[0].hypot(p[1])).fold(0.0, f64::max);
    let zspan = pts.iter().map(|p| p[2].abs()).fold(0.0, f64::max);
    if !(zspan > 1e-8 * scale.max(1.0)) {
        return Err(Error::NotToroidal("path is planar".into()));
    }
    let rz: Vec<(f64, f64)> = pts.iter().map(|p| (p[0].hypot(p[1]), p[2])).collect();
    let (cr, cz, r) = fit_circle(&rz).ok_or_else(|| Error::NotToroidal("degenerate circle fit".into()))?;
    let deviation = rz
        .iter()
        .map(|(a, b)| ((a - cr).hypot(b - cz) - r).abs())
        .fold(0.0, f64::max);
    if !(cr > r) {
        return Err(Error::NotToroidal(format!(
            "fitted tube radius {r:.3e} reaches the axis at major radius {cr:.3e}"
        )));
    }
    if deviation > 0.2 * r {
        return Err(Error::NotToroidal(format!(
            "deviation {deviation:.3e} exceeds 20% of tube radius {r:.3e}"
        )));
    }
    let unwrap = |angles: Vec<f64>| -> f64 {
        let mut total = 0.0;
        for w in angles.windows(2) {
            let mut d = w[1] - w[0];
            while d > PI {
                d -= 2.0 * PI;
            }
            while d < -PI {
                d += 2.0 * PI;
            }
            total += d;
        }
        total / (2.0 * PI)
    };
    let long = unwrap(pts.iter().map(|p| p[1].atan2(p[0])).collect());
    let mer = unwrap(rz.iter().map(|(a, b)| (b - cz).atan2(a - cr)).collect());
    Ok(KnotCertificate {
        ell: long.round().abs() as i64,
        m: mer.round().abs() as i64,
        major_radius: cr,
        minor_radius: r,
        center_z: cz,
        max_deviation: deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nbody::polygon_equilibrium;
    use crate::bvp::mesh::Mesh;
    use crate::spectrum::FamilyType;

    #[test]
    fn modular_inverse_examples() {
        assert_eq!(modular_inverse(5, 3).unwrap(), 2);
        assert_eq!(modular_inverse(1, 9).unwrap(), 1);
        assert_eq!(modular_inverse(3, 7).unwrap(), 5);
        assert_eq!(modular_inverse(4, 1).unwrap(), 0);
        assert!(matches!(modular_inverse(4, 6), Err(Error::NotCoprime { .. })));
    }

    #[test]
    fn omega_examples() {
        let c = SystemConfig::polygon(7).unwrap();
        let w = c.frame_freq();
        assert!(omega_of(2.0 * w, 2, &c).abs() < 1e-15);
        assert!((omega_of(w * 3.0 / 5.0, 2, &c) - 1.0 / 3.0).abs() < 1e-14);
        let c4 = SystemConfig::polygon(4).unwrap();
        let nu = c4.frame_freq() * 2.0 / 3.0;
        assert!((omega_of(nu, 2, &c4) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn resonance_fields() {
        let c = SystemConfig::polygon(7).unwrap();
        let r = Resonance::new(&c, 2, 5, 3).unwrap();
        assert_eq!(r.r, 1);
        assert_eq!(r.d, 1);
        // k̃ = 2 − 1·7·2 = −12 ≡ 9 (mod 21)
        assert_eq!(r.k_tilde, 9);
        assert!((r.period - 6.8978).abs() < 1e-4);
        assert!(matches!(
            Resonance::new(&c, 2, 2, 1),
            Err(Error::NotChoreography { curves: 7, .. })
        ));
    }

    #[test]
    fn circular_choreography_of_the_equilibrium() {
        let c = SystemConfig::polygon(5).unwrap();
        let eq = polygon_equilibrium(&c);
        let res = Resonance::new(&c, 1, 1, 1).unwrap();
        let orbit = OrbitSolution::constant(&c, Mesh::uniform(10, 4).unwrap(), res.period, 1, FamilyType::Planar, &eq);
        let states = inertial_states(&orbit, &res, 200).unwrap();
        let path = to_inertial(&orbit, &res, 200).unwrap();
        for p in path.points() {
            assert!((p[0].hypot(p[1]) - 1.0).abs() < 1e-12);
        }
        let rep = verify_choreography(&path, &states);
        assert!(rep.closure < 1e-10);
        assert!(rep.same_path < 1e-10, "{}", rep.same_path);
        assert!(rep.rotation < 1e-10);
        assert_eq!(rep.winding, 1);
        let back = to_rotating(&states, c.frame_freq());
        for (j, body) in back.bodies.iter().enumerate() {
            let p = eq.position(c.ring_slot(j + 1));
            for q in body {
                assert!(dist(q, &p) < 1e-12);
            }
        }
    }

    #[test]
    fn synthetic_torus_knot() {
        let c = SystemConfig::polygon(3).unwrap();
        let res = Resonance::new(&c, 1, 1, 1).unwrap();
        let count = 3000;
        let samples = (0..=count)
            .map(|i| {
                let s = 2.0 * PI * i as f64 / count as f64;
                let rho = 2.0 + 0.5 * (3.0 * s).cos();
                [s, rho * (2.0 * s).cos(), rho * (2.0 * s).sin(), 0.5 * (3.0 * s).sin()]
            })
            .collect();
        let path = ChoreographyPath {
            samples,
            resonance: res,
            source: "synthetic".into(),
        };
        let k = knot_type(&path).unwrap();
        assert_eq!((k.ell, k.m), (2, 3));
        assert!((k.major_radius - 2.0).abs() < 1e-9 && (k.minor_radius - 0.5).abs() < 1e-9);
        let flat = ChoreographyPath {
            samples: path.samples.iter().map(|s| [s[0], s[1], s[2], 0.0]).collect(),
            ..path
        };
        assert!(matches!(knot_type(&flat), Err(Error::NotToroidal(_))));
    }

    #[test]
    fn trig_shift_is_exact_for_band_limited_data() {
        let len = 64;
        let pts: Vec<[f64; 3]> = (0..len)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / len as f64;
                [t.cos() + 0.3 * (5.0 * t).sin(), (2.0 * t).sin(), 1.0]
            })
            .collect();
        let trig = Trig::new(&pts);
        let s = 3.7;
        for (i, p) in trig.shifted(s).iter().enumerate() {
            let t = 2.0 * PI * (i as f64 + s) / len as f64;
            let exact = [t.cos() + 0.3 * (5.0 * t).sin(), (2.0 * t).sin(), 1.0];
            assert!(dist(p, &exact) < 1e-13);
        }
    }
}
