//! Ring-supported solutions of `div w♯ = h`.
//!
//! Among all fields on the transition ring vanishing on both ring circles we
//! pick the one of least Euclidean Dirichlet energy `∫|∇w♯|²`. The multiplier
//! equation `B A⁻¹ Bᵀ λ = area·h` is solved by preconditioned conjugate
//! gradients; each `A⁻¹` is a direct per-mode solve. The result is extended by
//! zero to the full grid.

use std::sync::Arc;

use crate::calculus::DiscreteCalculus;
use crate::error::{invalid, Error, Result};
use crate::fields::{compatibility, l1_norm, l2_norm_euclidean};
use crate::mesh::{AnnulusGrid, BoundaryClass, Location, OneFormField, ScalarField};
use crate::systems::{apply_form, FaceForm, FormSolver};

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceSolveReport {
    /// `‖div w♯ − h‖_{L²(dy)}`.
    pub residual_l2: f64,
    /// `(∫ |∇w♯|² dy)^{1/2}`.
    pub grad_norm: f64,
    /// `grad_norm / ‖h‖_{L²(dy)}`.
    pub bogovskii_ratio: f64,
    /// `‖d*w − g(dη,dF)‖_{L²}` in the hyperbolic metric, where `g(dη,dF) = −pw·h`.
    pub codifferential_residual: f64,
    /// `‖pw·h‖_{L²}` in the hyperbolic metric.
    pub codifferential_rhs: f64,
    pub iterations: usize,
    /// Relative residual after each iteration.
    pub residual_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivSolveOptions {
    /// Relative tolerance on `‖div w♯ − h‖ / ‖h‖`.
    pub tol: f64,
    pub max_iters: usize,
    /// Relative tolerance for the compatibility precondition `|∫h| ≤ tol · ‖h‖_{L¹}`.
    pub compat_tol: f64,
}

impl Default for DivSolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iters: 5000,
            compat_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DivergenceSolution {
    /// Zero-extended to the full grid.
    pub w: OneFormField,
    /// Multiplier on the ring cells, zero elsewhere; zero area-weighted mean.
    pub multiplier: ScalarField,
    pub report: DivergenceSolveReport,
}

/// Factored ring problem, reusable across right-hand sides.
pub struct RingDivergenceSolver {
    grid: Arc<AnnulusGrid>,
    ring: Arc<AnnulusGrid>,
    lo: usize,
    dc: DiscreteCalculus,
    inner: FormSolver,
}

impl RingDivergenceSolver {
    /// Ring between node rows `lo < hi` of `grid`.
    pub fn new(grid: &Arc<AnnulusGrid>, lo: usize, hi: usize) -> Result<Self> {
        let ring = grid.sub_annulus(lo, hi)?;
        let dc = DiscreteCalculus::new(&ring);
        let inner = FormSolver::new(&dc, FaceForm::EuclideanDirichlet)?;
        Ok(Self {
            grid: grid.clone(),
            ring,
            lo,
            dc,
            inner,
        })
    }

    /// `Bᵀ λ = divᵀ(area · λ)` restricted to interior ring faces.
    fn bt(&self, lam: &[f64]) -> Vec<f64> {
        let mut a = lam.to_vec();
        self.dc.scale_rows(&self.ring.cell_area, &mut a);
        let mut out = self.dc.div.apply_transpose(&a);
        crate::systems::restrict_interior(self.ring.n_r(), self.ring.n_th(), &mut out);
        out
    }

    fn b(&self, u: &[f64]) -> Vec<f64> {
        let mut d = self.dc.div.apply(u);
        self.dc.scale_rows(&self.ring.cell_area, &mut d);
        d
    }

    /// Solve with initial multiplier `lambda0` (ring cell rows), or zero.
    pub fn solve(
        &self,
        h: &ScalarField,
        opts: &DivSolveOptions,
        lambda0: Option<&[f64]>,
    ) -> Result<DivergenceSolution> {
        if !self.grid.same_as(&h.grid) || h.location != Location::Centers {
            return Err(invalid(
                "h must be a cell-center scalar on the solver's grid",
            ));
        }
        let n = self.grid.n_th();
        let nr = self.ring.n_r();
        let hi = self.lo + nr;
        let outside = (0..self.lo)
            .chain(hi..self.grid.n_r())
            .any(|i| h.values[i * n..(i + 1) * n].iter().any(|v| *v != 0.0));
        if outside {
            return Err(invalid("h must vanish outside the transition ring"));
        }
        let total = compatibility(h);
        let l1 = l1_norm(h);
        if total.abs() > opts.compat_tol * l1 {
            return Err(Error::Compatibility(format!(
                "|∫h| = {:.3e} exceeds {:.1e} · ‖h‖_L1 = {:.3e}",
                total.abs(),
                opts.compat_tol,
                opts.compat_tol * l1
            )));
        }
        let h_ring = &h.values[self.lo * n..hi * n];
        let h_norm = l2_norm_euclidean(h);
        let area = &self.ring.cell_area;
        let mut rhs = h_ring.to_vec();
        self.dc.scale_rows(area, &mut rhs);
        // Remove the rounding-level mean so the singular multiplier system stays consistent.
        let tot_area: f64 = area.iter().sum::<f64>() * n as f64;
        let mean = rhs.iter().sum::<f64>() / tot_area;
        for (k, v) in rhs.iter_mut().enumerate() {
            *v -= mean * area[k / n];
        }
        let inv_area: Vec<f64> = area.iter().map(|a| 1.0 / a).collect();
        let resid_l2 = |r: &[f64]| -> f64 {
            r.iter()
                .enumerate()
                .map(|(k, v)| v * v * inv_area[k / n])
                .sum::<f64>()
                .sqrt()
        };

        let mut lam = lambda0
            .map(|l| l.to_vec())
            .unwrap_or_else(|| vec![0.0; nr * n]);
        if lam.len() != nr * n {
            return Err(invalid("initial multiplier has the wrong size"));
        }
        let s_apply = |x: &[f64]| self.b(&self.inner.solve(&self.bt(x)));
        let mut r: Vec<f64> = rhs.iter().zip(s_apply(&lam)).map(|(a, b)| a - b).collect();
        let mut z = r.clone();
        self.dc.scale_rows(&inv_area, &mut z);
        let mut p = z.clone();
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let mut trace = Vec::new();
        let scale = if h_norm > 0.0 { h_norm } else { 1.0 };
        let mut rel = resid_l2(&r) / scale;
        let mut iterations = 0;
        while rel > opts.tol && h_norm > 0.0 {
            if iterations >= opts.max_iters {
                return Err(Error::Solver(format!(
                    "divergence solve did not converge in {} iterations; residual trace tail {:?}",
                    opts.max_iters,
                    &trace[trace.len().saturating_sub(5)..]
                )));
            }
            let sp = s_apply(&p);
            let psp: f64 = p.iter().zip(&sp).map(|(a, b)| a * b).sum();
            if !(psp > 0.0) {
                return Err(Error::Solver(format!(
                    "multiplier system lost positivity at iteration {iterations}"
                )));
            }
            let alpha = rz / psp;
            for k in 0..lam.len() {
                lam[k] += alpha * p[k];
                r[k] -= alpha * sp[k];
            }
            z.copy_from_slice(&r);
            self.dc.scale_rows(&inv_area, &mut z);
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..p.len() {
                p[k] = z[k] + beta * p[k];
            }
            iterations += 1;
            rel = resid_l2(&r) / scale;
            trace.push(rel);
        }

        let w_ring = if h_norm > 0.0 {
            self.inner.solve(&self.bt(&lam))
        } else {
            vec![0.0; (2 * nr + 3) * n]
        };
        let div = self.dc.div.apply(&w_ring);
        let residual_l2 = div
            .iter()
            .zip(h_ring)
            .enumerate()
            .map(|(k, (d, hv))| area[k / n] * (d - hv) * (d - hv))
            .sum::<f64>()
            .sqrt();
        let pw = |k: usize| self.grid.pairing_weight_center(self.lo + k / n);
        let codifferential_residual = div
            .iter()
            .zip(h_ring)
            .enumerate()
            .map(|(k, (d, hv))| area[k / n] * pw(k) * (d - hv) * (d - hv))
            .sum::<f64>()
            .sqrt();
        let codifferential_rhs = h_ring
            .iter()
            .enumerate()
            .map(|(k, hv)| area[k / n] * pw(k) * hv * hv)
            .sum::<f64>()
            .sqrt();
        let grad_norm = {
            let aw = apply_form(&self.dc, FaceForm::EuclideanDirichlet, &w_ring);
            aw.iter()
                .zip(&w_ring)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                .max(0.0)
                .sqrt()
        };
        // Zero-mean multiplier.
        let lmean = lam
            .iter()
            .enumerate()
            .map(|(k, v)| v * area[k / n])
            .sum::<f64>()
            / tot_area;
        let mut multiplier = ScalarField::zeros(&self.grid, Location::Centers);
        for (k, v) in lam.iter().enumerate() {
            multiplier.values[self.lo * n + k] = if h_norm > 0.0 { v - lmean } else { 0.0 };
        }
        let w = self.extend(&w_ring);
        let report = DivergenceSolveReport {
            residual_l2,
            grad_norm,
            bogovskii_ratio: if h_norm > 0.0 {
                grad_norm / h_norm
            } else {
                0.0
            },
            codifferential_residual,
            codifferential_rhs,
            iterations,
            residual_trace: trace,
        };
        Ok(DivergenceSolution {
            w,
            multiplier,
            report,
        })
    }

    fn extend(&self, w_ring: &[f64]) -> OneFormField {
        let n = self.grid.n_th();
        let (nr, big) = (self.ring.n_r(), self.grid.n_r());
        let mut w = OneFormField::zeros(&self.grid);
        w.class = BoundaryClass::ZeroOnBoth;
        for k in 0..=nr {
            w.data[(self.lo + k) * n..(self.lo + k + 1) * n]
                .copy_from_slice(&w_ring[k * n..(k + 1) * n]);
        }
        for m in 1..=nr {
            let src = (nr + 1 + m) * n;
            let dst = (big + 1 + self.lo + m) * n;
            w.data[dst..dst + n].copy_from_slice(&w_ring[src..src + n]);
        }
        w
    }

    pub fn ring_grid(&self) -> &Arc<AnnulusGrid> {
        &self.ring
    }

    pub fn ring_rows(&self) -> (usize, usize) {
        (self.lo, self.lo + self.ring.n_r())
    }
}

/// Minimal-norm solution of `div w♯ = h` supported on node rows `lo..hi`.
pub fn solve_divergence(
    grid: &Arc<AnnulusGrid>,
    h: &ScalarField,
    lo: usize,
    hi: usize,
) -> Result<DivergenceSolution> {
    RingDivergenceSolver::new(grid, lo, hi)?.solve(h, &DivSolveOptions::default(), None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::DiscreteCalculus;
    use crate::fields::{cutoff, divergence_rhs, harmonic_pair, CutoffSpec, HarmonicSpec};
    use crate::hypgeom::DomainSpec;

    fn setup(n_r: usize, n_th: usize) -> (Arc<AnnulusGrid>, ScalarField, usize, usize) {
        let g =
            AnnulusGrid::build(DomainSpec::new(1.0, 1.0).unwrap(), 1.0, 12.0, n_r, n_th).unwrap();
        let c = cutoff(CutoffSpec::new(g.spec()), &g).unwrap();
        let hp = harmonic_pair(HarmonicSpec::new(1, 1.0, 0.0).unwrap(), &g);
        let h = divergence_rhs(&c, &hp).unwrap();
        let (lo, hi) = c.ring_nodes(&g).unwrap();
        (g, h, lo, hi)
    }

    #[test]
    fn zero_data_gives_zero_field() {
        let (g, _, lo, hi) = setup(64, 32);
        let h = ScalarField::zeros(&g, Location::Centers);
        let s = solve_divergence(&g, &h, lo, hi).unwrap();
        assert_eq!(s.w.max_abs(), 0.0);
        assert_eq!(s.report.iterations, 0);
    }

    #[test]
    fn solves_ring_divergence_and_vanishes_outside() {
        let (g, h, lo, hi) = setup(96, 64);
        let s = solve_divergence(&g, &h, lo, hi).unwrap();
        let hn = l2_norm_euclidean(&h);
        assert!(
            s.report.residual_l2 <= 1e-8 * hn,
            "{:?}",
            s.report.residual_l2 / hn
        );
        let n = g.n_th();
        let nr = g.n_r();
        for i in (0..=lo).chain(hi..=nr) {
            assert!(s.w.radial()[i * n..(i + 1) * n].iter().all(|v| *v == 0.0));
        }
        for m in (0..=lo).chain(hi + 1..=nr + 1) {
            assert!(s.w.angular()[m * n..(m + 1) * n].iter().all(|v| *v == 0.0));
        }
        // Full-grid divergence matches h everywhere.
        let d = DiscreteCalculus::new(&g).euclidean_div(&s.w).unwrap();
        let err = d
            .values
            .iter()
            .zip(&h.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-8 * h.max_abs());
    }

    #[test]
    fn incompatible_data_rejected() {
        let (g, mut h, lo, hi) = setup(64, 32);
        let n = g.n_th();
        for v in &mut h.values[(lo + 1) * n..(lo + 2) * n] {
            *v += 1.0;
        }
        assert!(matches!(
            solve_divergence(&g, &h, lo, hi),
            Err(Error::Compatibility(_))
        ));
    }
}
