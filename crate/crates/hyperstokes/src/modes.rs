//! Direct solves of angularly shift-invariant systems, one angular Fourier
//! mode at a time.
//!
//! Unknowns are grouped into blocks (faces, cells); each block is a stack of
//! rows and only selected rows are degrees of freedom. Per mode the system is
//! a small complex banded matrix once the degrees of freedom are ordered by
//! radial position.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Complex banded LU with partial pivoting.
#[derive(Debug, Clone)]
pub(crate) struct BandLu {
    n: usize,
    kl: usize,
    w: usize,
    ab: Vec<Complex64>,
    piv: Vec<usize>,
}

impl BandLu {
    /// Factor the `n × n` matrix given as triplets with `|i − j|` inside the bands.
    pub fn factor(n: usize, triplets: &[(usize, usize, Complex64)]) -> Result<Self> {
        let (mut kl, mut ku) = (0usize, 0usize);
        for &(i, j, _) in triplets {
            if i > j {
                kl = kl.max(i - j);
            } else {
                ku = ku.max(j - i);
            }
        }
        let w = 2 * kl + ku + 1;
        let mut lu = Self {
            n,
            kl,
            w,
            ab: vec![Complex64::new(0.0, 0.0); n * w],
            piv: vec![0; n],
        };
        for &(i, j, v) in triplets {
            *lu.at_mut(i, j) += v;
        }
        let scale = lu.ab.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        let span = kl + ku;
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = lu.at(k, k).norm();
            for i in k + 1..=last {
                let v = lu.at(i, k).norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > 1e-300 && best > scale * 1e-15) {
                return Err(Error::Solver(format!(
                    "singular mode matrix at pivot {k} of {n} (pivot {best:.3e}, scale {scale:.3e})"
                )));
            }
            lu.piv[k] = p;
            let jmax = (k + span).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let a = lu.at(k, j);
                    let b = lu.at(p, j);
                    *lu.at_mut(k, j) = b;
                    *lu.at_mut(p, j) = a;
                }
            }
            let d = lu.at(k, k);
            for i in k + 1..=last {
                let l = lu.at(i, k) / d;
                *lu.at_mut(i, k) = l;
                if l.norm_sqr() == 0.0 {
                    continue;
                }
                for j in k + 1..=jmax {
                    let v = lu.at(k, j);
                    *lu.at_mut(i, j) -= l * v;
                }
            }
        }
        Ok(lu)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> Complex64 {
        self.ab[i * self.w + (j + self.kl - i)]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut Complex64 {
        &mut self.ab[i * self.w + (j + self.kl - i)]
    }

    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        let n = self.n;
        let span = self.w - 1 - self.kl;
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            for i in k + 1..=(k + self.kl).min(n - 1) {
                b[i] -= self.at(i, k) * bk;
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + span).min(n - 1) {
                s -= self.at(i, j) * b[j];
            }
            b[i] = s / self.at(i, i);
        }
    }
}

/// Degrees of freedom of a blocked system, ordered for a narrow band.
#[derive(Debug, Clone)]
pub(crate) struct DofMap {
    pub block_rows: Vec<usize>,
    order: Vec<(usize, usize)>,
    index: Vec<Vec<Option<usize>>>,
}

impl DofMap {
    /// `entries` are `(block, row, position)`; dofs are sorted by position, ties by block.
    pub fn new(block_rows: Vec<usize>, mut entries: Vec<(usize, usize, f64)>) -> Self {
        entries.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
        let mut index: Vec<Vec<Option<usize>>> =
            block_rows.iter().map(|&n| vec![None; n]).collect();
        let order: Vec<(usize, usize)> = entries.iter().map(|e| (e.0, e.1)).collect();
        for (k, &(b, r)) in order.iter().enumerate() {
            index[b][r] = Some(k);
        }
        Self {
            block_rows,
            order,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn get(&self, block: usize, row: usize) -> Option<usize> {
        self.index[block][row]
    }

    pub fn without(&self, block: usize, row: usize) -> Self {
        let entries = self
            .order
            .iter()
            .enumerate()
            .filter(|(_, &(b, r))| !(b == block && r == row))
            .map(|(k, &(b, r))| (b, r, k as f64))
            .collect();
        Self::new(self.block_rows.clone(), entries)
    }
}

/// Collects mode-`k` matrix entries addressed by `(block, row)`.
pub(crate) struct ModeAssembler<'a> {
    dofs: &'a DofMap,
    pub triplets: Vec<(usize, usize, Complex64)>,
}

impl ModeAssembler<'_> {
    pub fn add(&mut self, br: usize, rr: usize, bc: usize, rc: usize, v: Complex64) {
        if let (Some(i), Some(j)) = (self.dofs.get(br, rr), self.dofs.get(bc, rc)) {
            self.triplets.push((i, j, v));
        }
    }
}

/// Row-wise angular FFTs.
#[derive(Clone)]
pub(crate) struct RowFft {
    pub n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl RowFft {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    pub fn forward(&self, data: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = data.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        if !buf.is_empty() {
            self.fwd.process(&mut buf);
        }
        buf
    }

    pub fn inverse(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        if !spec.is_empty() {
            self.inv.process(&mut spec);
        }
        let s = 1.0 / self.n as f64;
        spec.iter().map(|z| z.re * s).collect()
    }
}

/// Factored per-mode systems for modes `0..=n/2`.
pub(crate) struct ModeFactors {
    pub fft: RowFft,
    dofs: DofMap,
    dofs0: DofMap,
    lus: Vec<BandLu>,
}

impl ModeFactors {
    /// `fill(k, assembler)` adds the mode-`k` entries; `dofs0` is the dof set used for mode 0.
    pub fn build<F>(n_th: usize, dofs: DofMap, dofs0: DofMap, fill: F) -> Result<Self>
    where
        F: Fn(usize, &mut ModeAssembler) + Sync,
    {
        let lus = (0..=n_th / 2)
            .into_par_iter()
            .map(|k| {
                let d = if k == 0 { &dofs0 } else { &dofs };
                let mut asm = ModeAssembler {
                    dofs: d,
                    triplets: Vec::new(),
                };
                fill(k, &mut asm);
                BandLu::factor(d.len(), &asm.triplets).map_err(|e| match e {
                    Error::Solver(m) => Error::Solver(format!("angular mode {k}: {m}")),
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            fft: RowFft::new(n_th),
            dofs,
            dofs0,
            lus,
        })
    }

    /// Solve with right-hand sides given per block as full row stacks.
    /// Rows that are not degrees of freedom come back as zero.
    pub fn solve(&self, rhs: &[&[f64]]) -> Vec<Vec<f64>> {
        let n = self.fft.n;
        let block_rows = &self.dofs.block_rows;
        let spectra: Vec<Vec<Option<Vec<Complex64>>>> = rhs
            .iter()
            .enumerate()
            .map(|(b, data)| {
                (0..block_rows[b])
                    .into_par_iter()
                    .map(|r| {
                        let used = self.dofs.get(b, r).is_some() || self.dofs0.get(b, r).is_some();
                        used.then(|| self.fft.forward(&data[r * n..(r + 1) * n]))
                    })
                    .collect()
            })
            .collect();
        let sols: Vec<Vec<Complex64>> = (0..=n / 2)
            .into_par_iter()
            .map(|k| {
                let d = if k == 0 { &self.dofs0 } else { &self.dofs };
                let mut x: Vec<Complex64> = d
                    .order
                    .iter()
                    .map(|&(b, r)| {
                        spectra[b][r]
                            .as_ref()
                            .map_or(Complex64::new(0.0, 0.0), |s| s[k])
                    })
                    .collect();
                self.lus[k].solve_in_place(&mut x);
                x
            })
            .collect();
        (0..block_rows.len())
            .map(|b| {
                let rows: Vec<Vec<f64>> = (0..block_rows[b])
                    .into_par_iter()
                    .map(|r| {
                        if self.dofs.get(b, r).is_none() && self.dofs0.get(b, r).is_none() {
                            return vec![0.0; n];
                        }
                        let mut spec = vec![Complex64::new(0.0, 0.0); n];
                        for k in 0..=n / 2 {
                            let d = if k == 0 { &self.dofs0 } else { &self.dofs };
                            if let Some(i) = d.get(b, r) {
                                spec[k] = sols[k][i];
                                if k != 0 && k != n - k {
                                    spec[n - k] = sols[k][i].conj();
                                }
                            }
                        }
                        if n.is_multiple_of(2) {
                            spec[n / 2].im = 0.0;
                        }
                        spec[0].im = 0.0;
                        self.fft.inverse(spec)
                    })
                    .collect();
                rows.concat()
            })
            .collect()
    }
}
