//! Angularly shift-invariant linear operators between row-structured arrays.
//!
//! Every array on an [`crate::mesh::AnnulusGrid`] is a stack of rows, each row a
//! periodic sequence of `n_th` samples. An operator row is a list of taps
//! `(input row, angular shift, coefficient)`:
//! `out[row][j] = Σ c · in[col][(j + shift) mod n_th]`.
//! Such operators are diagonalized by the angular DFT; [`StencilOp::symbol_row`]
//! gives the mode-`k` matrix entries.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Tap {
    pub col: usize,
    pub shift: isize,
    pub coeff: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct StencilOp {
    pub n_th: usize,
    pub n_in: usize,
    pub rows: Vec<Vec<Tap>>,
}

const PAR_MIN: usize = 1 << 14;

impl StencilOp {
    pub fn new(n_th: usize, n_in: usize, n_out: usize) -> Self {
        Self {
            n_th,
            n_in,
            rows: vec![Vec::new(); n_out],
        }
    }

    pub fn n_out(&self) -> usize {
        self.rows.len()
    }

    pub fn push(&mut self, row: usize, col: usize, shift: isize, coeff: f64) {
        debug_assert!(col < self.n_in);
        if coeff != 0.0 {
            self.rows[row].push(Tap { col, shift, coeff });
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n_th;
        assert_eq!(x.len(), self.n_in * n, "stencil input size");
        let mut out = vec![0.0; self.n_out() * n];
        let body = |(row, o): (usize, &mut [f64])| {
            for t in &self.rows[row] {
                let src = &x[t.col * n..(t.col + 1) * n];
                let s = t.shift.rem_euclid(n as isize) as usize;
                for (j, oj) in o.iter_mut().enumerate() {
                    let jj = if j + s >= n { j + s - n } else { j + s };
                    *oj += t.coeff * src[jj];
                }
            }
        };
        if out.len() >= PAR_MIN {
            out.par_chunks_mut(n).enumerate().for_each(body);
        } else {
            out.chunks_mut(n).enumerate().for_each(body);
        }
        out
    }

    pub fn transpose(&self) -> StencilOp {
        let mut t = StencilOp::new(self.n_th, self.n_out(), self.n_in);
        for (row, taps) in self.rows.iter().enumerate() {
            for tap in taps {
                t.push(tap.col, row, -tap.shift, tap.coeff);
            }
        }
        t
    }

    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        self.transpose().apply(y)
    }

    /// Mode-`k` entries of one output row, taps on the same column merged.
    pub fn symbol_row(&self, row: usize, k: usize) -> Vec<(usize, Complex64)> {
        let mut out: Vec<(usize, Complex64)> = Vec::with_capacity(self.rows[row].len());
        for t in &self.rows[row] {
            let v = t.coeff * phase(t.shift, k, self.n_th);
            match out.iter_mut().find(|(c, _)| *c == t.col) {
                Some((_, acc)) => *acc += v,
                None => out.push((t.col, v)),
            }
        }
        out
    }
}

/// `e^{2πi s k / n}`: the eigenvalue of a shift by `s` on angular mode `k`.
pub(crate) fn phase(shift: isize, k: usize, n: usize) -> Complex64 {
    let m = (shift * k as isize).rem_euclid(n as isize) as f64;
    let ang = 2.0 * std::f64::consts::PI * m / n as f64;
    Complex64::new(ang.cos(), ang.sin())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_op() -> StencilOp {
        let mut op = StencilOp::new(8, 3, 2);
        op.push(0, 0, 0, 1.5);
        op.push(0, 2, 1, -0.5);
        op.push(1, 1, -1, 2.0);
        op.push(1, 1, 3, 0.25);
        op
    }

    #[test]
    fn transpose_is_adjoint() {
        let op = sample_op();
        let x: Vec<f64> = (0..24).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let y: Vec<f64> = (0..16).map(|i| ((i * 5) % 7) as f64 * 0.3).collect();
        let ax = op.apply(&x);
        let aty = op.apply_transpose(&y);
        let l: f64 = ax.iter().zip(&y).map(|(a, b)| a * b).sum();
        let r: f64 = x.iter().zip(&aty).map(|(a, b)| a * b).sum();
        assert!((l - r).abs() < 1e-12);
    }

    #[test]
    fn symbol_matches_action_on_modes() {
        let op = sample_op();
        let n = 8;
        for k in 0..n {
            // Apply to a pure mode in column 1 and read the coefficient of row 1.
            let mut xr = vec![0.0; 24];
            let mut xi = vec![0.0; 24];
            for j in 0..n {
                let a = 2.0 * std::f64::consts::PI * (k * j) as f64 / n as f64;
                xr[n + j] = a.cos();
                xi[n + j] = a.sin();
            }
            let (yr, yi) = (op.apply(&xr), op.apply(&xi));
            let sym = op.symbol_row(1, k);
            assert_eq!(sym.len(), 1);
            let s = sym[0].1;
            for j in 0..n {
                let a = 2.0 * std::f64::consts::PI * (k * j) as f64 / n as f64;
                let e = Complex64::new(a.cos(), a.sin()) * s;
                assert!((yr[n + j] - e.re).abs() < 1e-12);
                assert!((yi[n + j] - e.im).abs() < 1e-12);
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn transpose_is_adjoint_on_random_vectors(
            x in proptest::collection::vec(-1.0f64..1.0, 24),
            y in proptest::collection::vec(-1.0f64..1.0, 16),
        ) {
            let op = sample_op();
            let l: f64 = op.apply(&x).iter().zip(&y).map(|(a, b)| a * b).sum();
            let r: f64 = x.iter().zip(&op.apply_transpose(&y)).map(|(a, b)| a * b).sum();
            proptest::prop_assert!((l - r).abs() < 1e-12);
        }
    }
}
