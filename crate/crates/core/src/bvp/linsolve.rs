//! Direct solver for the almost block diagonal, bordered collocation system.
//!
//! Row order of the global system: the `m·d` collocation rows of each
//! interval, then `d` periodicity rows, then the four border rows (three
//! phase integrals and the continuation equation). Unknowns: the node values
//! `x_0 … x_{N m}` followed by the parameters `T, λ1, λ2, λ3`.
//!
//! The factorization condenses each interval onto its two breakpoints,
//! eliminates the interior breakpoints one after the other, and finishes with
//! a dense LU of the `(2d + 4)`-square system in `x_0`, `x_{N m}` and the
//! parameters. All factors are kept so that further right-hand sides (such
//! as the tangent equation) can be solved without refactoring.

use crate::error::{Error, Result};

/// Number of border rows and of trailing parameter unknowns.
pub const BORDER: usize = 4;

/// In-place Gaussian elimination of the leading `ne` columns of a row-major
/// block. Only the first `piv_rows` rows are pivot candidates; the rows after
/// them are border rows that get updated but never pivot.
#[derive(Debug, Clone)]
struct Elim {
    rows: usize,
    cols: usize,
    ne: usize,
    a: Vec<f64>,
    swaps: Vec<usize>,
}

impl Elim {
    fn new(mut a: Vec<f64>, rows: usize, cols: usize, ne: usize, piv_rows: usize) -> Result<(Self, f64, bool)> {
        debug_assert_eq!(a.len(), rows * cols);
        debug_assert!(ne <= piv_rows && piv_rows <= rows && ne <= cols);
        let mut swaps = Vec::with_capacity(ne);
        let mut log_det = 0.0;
        let mut negative = false;
        for k in 0..ne {
            let mut best = k;
            let mut best_val = a[k * cols + k].abs();
            for r in k + 1..piv_rows {
                let v = a[r * cols + k].abs();
                if v > best_val {
                    best = r;
                    best_val = v;
                }
            }
            if !(best_val > 0.0) || !best_val.is_finite() {
                return Err(Error::SingularJacobian);
            }
            if best != k {
                let (lo, hi) = a.split_at_mut(best * cols);
                lo[k * cols..(k + 1) * cols].swap_with_slice(&mut hi[..cols]);
                negative = !negative;
            }
            swaps.push(best);
            let pivot = a[k * cols + k];
            log_det += pivot.abs().ln();
            if pivot < 0.0 {
                negative = !negative;
            }
            let (top, bottom) = a.split_at_mut((k + 1) * cols);
            let prow = &top[k * cols + k + 1..(k + 1) * cols];
            for r in 0..rows - k - 1 {
                let row = &mut bottom[r * cols..(r + 1) * cols];
                let f = row[k] / pivot;
                row[k] = f;
                if f != 0.0 {
                    for (x, p) in row[k + 1..].iter_mut().zip(prow) {
                        *x -= f * p;
                    }
                }
            }
        }
        Ok((
            Self {
                rows,
                cols,
                ne,
                a,
                swaps,
            },
            log_det,
            negative,
        ))
    }

    /// Remaining rows/columns after elimination (the Schur complement).
    fn schur(&self) -> Vec<f64> {
        let rest = self.cols - self.ne;
        let mut out = Vec::with_capacity((self.rows - self.ne) * rest);
        for r in self.ne..self.rows {
            out.extend_from_slice(&self.a[r * self.cols + self.ne..(r + 1) * self.cols]);
        }
        out
    }

    /// Applies the row operations to a right-hand side of length `rows`.
    fn forward(&self, rhs: &mut [f64]) {
        for (k, &s) in self.swaps.iter().enumerate() {
            if s != k {
                rhs.swap(k, s);
            }
        }
        for k in 0..self.ne {
            let v = rhs[k];
            if v != 0.0 {
                for r in k + 1..self.rows {
                    rhs[r] -= self.a[r * self.cols + k] * v;
                }
            }
        }
    }

    /// Solves the pivot rows for the eliminated unknowns given the forwarded
    /// right-hand side and the values of the remaining unknowns.
    fn back(&self, y: &[f64], rest: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.ne];
        for k in (0..self.ne).rev() {
            let row = &self.a[k * self.cols..(k + 1) * self.cols];
            let mut s = y[k];
            for c in k + 1..self.ne {
                s -= row[c] * x[c];
            }
            for (c, r) in rest.iter().enumerate() {
                s -= row[self.ne + c] * r;
            }
            x[k] = s / row[k];
        }
        x
    }
}

/// Jacobian data for one mesh interval.
///
/// `rows = m·d + 4`: the interval's collocation rows followed by its
/// contributions to the four border rows. Columns are ordered as
/// `[interior nodes ((m-1)·d) | left breakpoint (d) | right breakpoint (d) | parameters (4)]`.
#[derive(Debug, Clone)]
pub struct IntervalBlock {
    pub matrix: Vec<f64>,
}

/// Factorized bordered collocation Jacobian.
#[derive(Debug, Clone)]
pub struct BorderedFactorization {
    dim: usize,
    degree: usize,
    intervals: Vec<Elim>,
    chain: Vec<Elim>,
    last: Elim,
    log_det: f64,
    negative: bool,
}

impl BorderedFactorization {
    pub fn local_rows(dim: usize, degree: usize) -> usize {
        degree * dim + BORDER
    }

    pub fn local_cols(dim: usize, degree: usize) -> usize {
        (degree + 1) * dim + BORDER
    }

    /// Factorizes the system. `border_params` holds the global coefficients
    /// of the parameters in the border rows (row-major 4×4).
    pub fn factor(
        dim: usize,
        degree: usize,
        blocks: Vec<IntervalBlock>,
        border_params: [[f64; BORDER]; BORDER],
    ) -> Result<Self> {
        let d = dim;
        let m = degree;
        let n = blocks.len();
        if n == 0 {
            return Err(Error::MeshMismatch("no intervals".into()));
        }
        let rows = Self::local_rows(d, m);
        let cols = Self::local_cols(d, m);
        let mut log_det = 0.0;
        let mut negative = false;
        let mut intervals = Vec::with_capacity(n);
        // condensed collocation rows and border rows, layout [left | right | p]
        let mut condensed = Vec::with_capacity(n);
        for block in blocks {
            let (e, ld, neg) = Elim::new(block.matrix, rows, cols, (m - 1) * d, m * d)?;
            log_det += ld;
            negative ^= neg;
            condensed.push(e.schur());
            intervals.push(e);
        }
        let w = 2 * d + BORDER; // width of the condensed layout
        let c0 = &condensed[0];
        let mut r_rows: Vec<f64> = c0[..d * w].to_vec();
        let mut border: Vec<f64> = c0[d * w..].to_vec();
        let mut chain = Vec::with_capacity(n.saturating_sub(1));
        let cw = 3 * d + BORDER;
        for ci in condensed.iter().skip(1) {
            let mut a = vec![0.0; (2 * d + BORDER) * cw];
            // previous rows, layout [b0 | bi | p]
            for r in 0..d {
                let src = &r_rows[r * w..(r + 1) * w];
                let dst = &mut a[r * cw..(r + 1) * cw];
                dst[..d].copy_from_slice(&src[d..2 * d]);
                dst[d..2 * d].copy_from_slice(&src[..d]);
                dst[3 * d..].copy_from_slice(&src[2 * d..]);
            }
            // interval rows, layout [bi | bi+1 | p]
            for r in 0..d {
                let src = &ci[r * w..(r + 1) * w];
                let dst = &mut a[(d + r) * cw..(d + r + 1) * cw];
                dst[..d].copy_from_slice(&src[..d]);
                dst[2 * d..3 * d].copy_from_slice(&src[d..2 * d]);
                dst[3 * d..].copy_from_slice(&src[2 * d..]);
            }
            // border rows: accumulated [b0 | bi | p] plus this interval's part
            for r in 0..BORDER {
                let acc = &border[r * w..(r + 1) * w];
                let loc = &ci[(d + r) * w..(d + r + 1) * w];
                let dst = &mut a[(2 * d + r) * cw..(2 * d + r + 1) * cw];
                for c in 0..d {
                    dst[c] = acc[d + c] + loc[c];
                    dst[d + c] = acc[c];
                    dst[2 * d + c] = loc[d + c];
                }
                for c in 0..BORDER {
                    dst[3 * d + c] = acc[2 * d + c] + loc[2 * d + c];
                }
            }
            let (e, ld, neg) = Elim::new(a, 2 * d + BORDER, cw, d, 2 * d)?;
            log_det += ld;
            negative ^= neg;
            let s = e.schur();
            r_rows = s[..d * w].to_vec();
            border = s[d * w..].to_vec();
            chain.push(e);
        }
        // final square system in [b0 | bN | p]
        let mut a = vec![0.0; w * w];
        a[..d * w].copy_from_slice(&r_rows);
        for c in 0..d {
            a[(d + c) * w + c] = -1.0;
            a[(d + c) * w + d + c] = 1.0;
        }
        for r in 0..BORDER {
            let dst = &mut a[(2 * d + r) * w..(2 * d + r + 1) * w];
            dst.copy_from_slice(&border[r * w..(r + 1) * w]);
            for c in 0..BORDER {
                dst[2 * d + c] += border_params[r][c];
            }
        }
        let (last, ld, neg) = Elim::new(a, w, w, w, w)?;
        log_det += ld;
        negative ^= neg;
        Ok(Self {
            dim,
            degree,
            intervals,
            chain,
            last,
            log_det,
            negative,
        })
    }

    pub fn intervals(&self) -> usize {
        self.intervals.len()
    }

    pub fn unknowns(&self) -> usize {
        (self.intervals.len() * self.degree + 1) * self.dim + BORDER
    }

    /// `ln |det J|` up to the constant contribution of the row/column ordering.
    pub fn log_abs_det(&self) -> f64 {
        self.log_det
    }

    /// Sign of `det J` relative to the fixed structural ordering. Comparable
    /// between factorizations with the same interval count, degree and
    /// dimension.
    pub fn det_sign(&self) -> f64 {
        if self.negative {
            -1.0
        } else {
            1.0
        }
    }

    /// Magnitude of the smallest pivot of the final dense stage relative to
    /// the largest, a cheap indicator of near-singularity.
    pub fn last_pivot_ratio(&self) -> f64 {
        let w = self.last.cols;
        let piv: Vec<f64> = (0..w).map(|k| self.last.a[k * w + k].abs()).collect();
        let max = piv.iter().cloned().fold(0.0, f64::max);
        let min = piv.iter().cloned().fold(f64::INFINITY, f64::min);
        min / max
    }

    /// Solves `J x = rhs` with `rhs` in global row order.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let m = self.degree;
        let n = self.intervals.len();
        let nodes = n * m + 1;
        assert_eq!(rhs.len(), nodes * d + BORDER);
        let rows = Self::local_rows(d, m);
        let ne = (m - 1) * d;
        let mut interval_y = Vec::with_capacity(n);
        let mut cond_rhs = Vec::with_capacity(n);
        let mut border_rhs = [0.0; BORDER];
        border_rhs.copy_from_slice(&rhs[nodes * d..]);
        for (i, e) in self.intervals.iter().enumerate() {
            let mut v = vec![0.0; rows];
            v[..m * d].copy_from_slice(&rhs[i * m * d..(i + 1) * m * d]);
            e.forward(&mut v);
            for r in 0..BORDER {
                border_rhs[r] += v[m * d + r];
            }
            cond_rhs.push(v[ne..m * d].to_vec());
            v.truncate(ne);
            interval_y.push(v);
        }
        let mut r = cond_rhs[0].clone();
        let mut chain_y = Vec::with_capacity(self.chain.len());
        for (step, e) in self.chain.iter().enumerate() {
            let mut v = Vec::with_capacity(2 * d + BORDER);
            v.extend_from_slice(&r);
            v.extend_from_slice(&cond_rhs[step + 1]);
            v.extend_from_slice(&border_rhs);
            e.forward(&mut v);
            r = v[d..2 * d].to_vec();
            border_rhs.copy_from_slice(&v[2 * d..]);
            v.truncate(d);
            chain_y.push(v);
        }
        let mut v = Vec::with_capacity(2 * d + BORDER);
        v.extend_from_slice(&r);
        v.extend_from_slice(&rhs[n * m * d..nodes * d]);
        v.extend_from_slice(&border_rhs);
        self.last.forward(&mut v);
        let top = self.last.back(&v, &[]);
        let b0 = &top[..d];
        let bn = &top[d..2 * d];
        let p = &top[2 * d..];
        let mut x = vec![0.0; nodes * d + BORDER];
        x[..d].copy_from_slice(b0);
        x[n * m * d..nodes * d].copy_from_slice(bn);
        x[nodes * d..].copy_from_slice(p);
        // interior breakpoints, last to first
        for step in (0..self.chain.len()).rev() {
            let i = step + 1;
            let mut rest = Vec::with_capacity(2 * d + BORDER);
            rest.extend_from_slice(b0);
            rest.extend_from_slice(&x[(i + 1) * m * d..((i + 1) * m + 1) * d]);
            rest.extend_from_slice(p);
            let bi = self.chain[step].back(&chain_y[step], &rest);
            x[i * m * d..(i * m + 1) * d].copy_from_slice(&bi);
        }
        for (i, e) in self.intervals.iter().enumerate() {
            let mut rest = Vec::with_capacity(2 * d + BORDER);
            rest.extend_from_slice(&x[i * m * d..(i * m + 1) * d]);
            rest.extend_from_slice(&x[(i + 1) * m * d..((i + 1) * m + 1) * d]);
            rest.extend_from_slice(p);
            let interior = e.back(&interval_y[i], &rest);
            x[(i * m + 1) * d..((i + 1) * m) * d].copy_from_slice(&interior);
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    /// Builds random interval blocks and the equivalent dense global matrix.
    fn random_system(d: usize, m: usize, n: usize, seed: u64) -> (Vec<IntervalBlock>, [[f64; 4]; 4], DMatrix<f64>) {
        let mut s = seed;
        let mut rnd = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let rows = BorderedFactorization::local_rows(d, m);
        let cols = BorderedFactorization::local_cols(d, m);
        let nodes = n * m + 1;
        let size = nodes * d + BORDER;
        let mut global = DMatrix::zeros(size, size);
        let mut blocks = Vec::new();
        for i in 0..n {
            let mut a = vec![0.0; rows * cols];
            for r in 0..rows {
                for c in 0..cols {
                    a[r * cols + c] = rnd();
                }
                // strengthen the derivative-like diagonal on the interior
                if r < (m - 1) * d {
                    a[r * cols + r] += 3.0;
                }
            }
            let col_of = |c: usize| -> usize {
                if c < (m - 1) * d {
                    (i * m + 1) * d + c
                } else if c < m * d {
                    i * m * d + (c - (m - 1) * d)
                } else if c < (m + 1) * d {
                    (i + 1) * m * d + (c - m * d)
                } else {
                    nodes * d + (c - (m + 1) * d)
                }
            };
            for r in 0..rows {
                let gr = if r < m * d { i * m * d + r } else { nodes * d + (r - m * d) };
                for c in 0..cols {
                    global[(gr, col_of(c))] += a[r * cols + c];
                }
            }
            blocks.push(IntervalBlock { matrix: a });
        }
        for c in 0..d {
            global[(n * m * d + c, c)] = -1.0;
            global[(n * m * d + c, n * m * d + c)] = 1.0;
        }
        let mut bp = [[0.0; 4]; 4];
        for r in 0..4 {
            for c in 0..4 {
                bp[r][c] = rnd();
                global[(nodes * d + r, nodes * d + c)] += bp[r][c];
            }
        }
        (blocks, bp, global)
    }

    #[test]
    fn structured_solve_matches_dense_lu() {
        for &(d, m, n) in &[(2, 2, 1), (3, 3, 4), (6, 4, 7)] {
            let (blocks, bp, global) = random_system(d, m, n, 17 + d as u64);
            let f = BorderedFactorization::factor(d, m, blocks, bp).unwrap();
            let size = global.nrows();
            let rhs = DVector::from_fn(size, |i, _| ((i * 37 % 11) as f64) - 5.0);
            let x = f.solve(rhs.as_slice());
            let dense = global.clone().lu().solve(&rhs).unwrap();
            for i in 0..size {
                assert!((x[i] - dense[i]).abs() < 1e-8 * (1.0 + dense[i].abs()), "{i}: {} {}", x[i], dense[i]);
            }
            let det = global.determinant();
            assert!((f.log_abs_det() - det.abs().ln()).abs() < 1e-8);
            let _ = f.det_sign();
        }
    }

    #[test]
    fn det_sign_tracks_a_sign_flip() {
        let (blocks, bp, global) = random_system(3, 2, 3, 5);
        let f = BorderedFactorization::factor(3, 2, blocks.clone(), bp).unwrap();
        // negating one border row flips the determinant sign
        let mut bp2 = bp;
        for c in 0..4 {
            bp2[3][c] = -bp2[3][c];
        }
        let mut blocks2 = blocks;
        let rows = BorderedFactorization::local_rows(3, 2);
        let cols = BorderedFactorization::local_cols(3, 2);
        for b in blocks2.iter_mut() {
            for c in 0..cols {
                b.matrix[(rows - 1) * cols + c] *= -1.0;
            }
        }
        let g = BorderedFactorization::factor(3, 2, blocks2, bp2).unwrap();
        assert_eq!(f.det_sign(), -g.det_sign());
        assert!((f.log_abs_det() - g.log_abs_det()).abs() < 1e-9);
        let _ = global;
    }

    #[test]
    fn det_sign_agrees_with_dense_up_to_fixed_ordering_sign() {
        let mut structural = None;
        for seed in 0..8 {
            let (blocks, bp, global) = random_system(3, 3, 5, 100 + seed);
            let f = BorderedFactorization::factor(3, 3, blocks, bp).unwrap();
            let s = global.determinant().signum() * f.det_sign();
            match structural {
                None => structural = Some(s),
                Some(t) => assert_eq!(s, t, "seed {seed}"),
            }
        }
    }

    #[test]
    fn singular_system_is_reported() {
        let d = 2;
        let m = 2;
        let rows = BorderedFactorization::local_rows(d, m);
        let cols = BorderedFactorization::local_cols(d, m);
        let blocks = vec![IntervalBlock { matrix: vec![0.0; rows * cols] }; 2];
        assert!(matches!(
            BorderedFactorization::factor(d, m, blocks, [[0.0; 4]; 4]),
            Err(Error::SingularJacobian)
        ));
    }
}
