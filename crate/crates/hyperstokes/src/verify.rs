//! Headline checks on solved fields: the sign of the pairing `∫g(w,dF)`, a
//! certificate that `u ≠ 0`, the non-potential-flow test, and the functional
//! inequality suite.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::calculus::{l2_inner, norms, vorticity_norm_sq, DiscreteCalculus, InnerProductKind};
use crate::error::{invalid, Result};
use crate::fields::{
    discrete_harmonic_gradient, harmonic_pair, Cutoff, CutoffSpec, HarmonicPair, HarmonicSpec,
};
use crate::hypgeom::geodesic_to_disk;
use crate::mesh::{AnnulusGrid, OneFormField};
use crate::navierstokes::{grad_norm_sq, random_probe};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NontrivialityReport {
    /// `∫ g(w, dF) Vol` over the grid.
    pub pairing: f64,
    /// `∫ η g(dF, dF) Vol` over the whole plane, by quadrature.
    pub eta_energy: f64,
    /// `|pairing + eta_energy|`.
    pub gap: f64,
    pub relative_gap: f64,
    pub u_h1_norm: f64,
}

impl NontrivialityReport {
    pub fn negative_pairing(&self) -> bool {
        self.pairing < 0.0
    }
}

/// `∫ η |∇F|² dy` for `F = c rⁿ cos(nθ + φ)`: the disk inside `2R₀` in closed form plus
/// Simpson quadrature of the transition in geodesic radius.
pub fn eta_energy(cut: CutoffSpec, harmonic: HarmonicSpec) -> Result<f64> {
    let n = harmonic.n as i32;
    let (a, r0) = (cut.a, cut.r0);
    let r2 = geodesic_to_disk(a, 2.0 * r0)?.r();
    let inner = harmonic.energy_in_disk(r2);
    let panels = 4000;
    let h = 2.0 * r0 / panels as f64;
    let integrand = |rho: f64| {
        let d = geodesic_to_disk(a, rho).expect("finite radius");
        let r = d.r();
        cut.at_geodesic(rho) * r.powi(2 * n - 1) * 0.5 * a * d.one_minus_sq()
    };
    let mut s = integrand(2.0 * r0) + integrand(4.0 * r0);
    for k in 1..panels {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * integrand(2.0 * r0 + k as f64 * h);
    }
    let nf = harmonic.n as f64;
    Ok(inner + 2.0 * PI * nf * nf * harmonic.c * harmonic.c * s * h / 3.0)
}

/// `H¹` norm `(‖∇u‖² + ‖u‖²)^{1/2}` with the finite-difference covariant derivative.
pub fn h1_norm(u: &OneFormField) -> f64 {
    let n = norms(u);
    (n.h1 * n.h1 + n.l2 * n.l2).sqrt()
}

pub fn nontriviality(
    w: &OneFormField,
    harmonic: &HarmonicPair,
    cut: CutoffSpec,
    u: &OneFormField,
) -> Result<NontrivialityReport> {
    let pairing = l2_inner(w, &harmonic.df)?;
    let eta_energy = eta_energy(cut, harmonic.spec)?;
    let gap = (pairing + eta_energy).abs();
    Ok(NontrivialityReport {
        pairing,
        eta_energy,
        gap,
        relative_gap: gap / eta_energy,
        u_h1_norm: h1_norm(u),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonzeroCertificate {
    pub h1_norm: f64,
    /// `∫ (1−η) g(dF,dF) Vol` over the grid; positive for nontrivial `dF`.
    pub outer_energy: f64,
    /// `∫ g(w̃, dF) Vol`.
    pub orthogonality: f64,
    /// `|orthogonality| / (‖w̃‖‖dF‖)`.
    pub orthogonality_relative: f64,
    pub certified: bool,
}

pub fn nonzero_solution(
    u: &OneFormField,
    df: &OneFormField,
    cut: &Cutoff,
    w_tilde: &OneFormField,
) -> Result<NonzeroCertificate> {
    let h1 = h1_norm(u);
    let one_minus = cut.times_minus_one(df).scaled(-1.0);
    let outer_energy = l2_inner(&one_minus, df)?;
    let orthogonality = l2_inner(w_tilde, df)?;
    let scale = (l2_inner(w_tilde, w_tilde)? * l2_inner(df, df)?).sqrt();
    let orthogonality_relative = if scale > 0.0 {
        orthogonality.abs() / scale
    } else {
        orthogonality.abs()
    };
    Ok(NonzeroCertificate {
        h1_norm: h1,
        outer_energy,
        orthogonality,
        orthogonality_relative,
        certified: h1 > 0.0 && outer_energy > 0.0 && orthogonality_relative <= 1e-6,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaurentSample {
    pub radius: f64,
    /// `(k, |a_k|)`.
    pub coeffs: Vec<(i32, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialFlowReport {
    pub vorticity_l2: f64,
    /// `‖du‖ / ‖u‖`.
    pub relative_vorticity: f64,
    /// `min ‖u − df‖/‖u‖` over the discrete-harmonic subspace.
    pub best_potential_residual: f64,
    pub laurent_coeffs: Vec<LaurentSample>,
    /// `u ≡ 0`.
    pub degenerate: bool,
}

/// Highest power in the fitting subspace.
pub const FIT_MODES: i32 = 6;

pub fn potential_flow_test(u: &OneFormField) -> Result<PotentialFlowReport> {
    let grid = &u.grid;
    let u_norm = l2_inner(u, u)?.max(0.0).sqrt();
    let vort = vorticity_norm_sq(u).max(0.0).sqrt();
    if u_norm == 0.0 {
        return Ok(PotentialFlowReport {
            vorticity_l2: 0.0,
            relative_vorticity: 0.0,
            best_potential_residual: 0.0,
            laurent_coeffs: Vec::new(),
            degenerate: true,
        });
    }
    // (k, phase): r^k cos(|k|θ + phase), log r for k = 0.
    let mut basis_spec = vec![(0, 0.0)];
    for k in (-FIT_MODES..=FIT_MODES).filter(|k| *k != 0) {
        basis_spec.push((k, 0.0));
        basis_spec.push((k, -PI / 2.0));
    }
    let basis: Vec<OneFormField> = basis_spec
        .par_iter()
        .map(|&(k, ph)| discrete_harmonic_gradient(grid, k, ph))
        .collect();
    let scales: Vec<f64> = basis
        .iter()
        .map(|b| l2_inner(b, b).unwrap().sqrt())
        .collect();
    let m = basis.len();
    let gram = DMatrix::from_fn(m, m, |i, j| {
        l2_inner(&basis[i], &basis[j]).unwrap() / (scales[i] * scales[j])
    });
    let rhs = DVector::from_fn(m, |i, _| l2_inner(&basis[i], u).unwrap() / scales[i]);
    let coef = gram
        .svd(true, true)
        .solve(&rhs, 1e-13)
        .map_err(|e| invalid(e.to_string()))?;
    let mut fit = OneFormField::zeros(grid);
    fit.class = u.class;
    for (i, b) in basis.iter().enumerate() {
        fit = fit.axpy(coef[i] / scales[i], b);
    }
    let res = u.axpy(-1.0, &fit);
    let best = l2_inner(&res, &res)?.max(0.0).sqrt() / u_norm;
    // F(z) = ∂₁f − i∂₂f of the fitted potential, sampled on circles.
    let a = grid.spec().a;
    let r0 = grid.geodesic_in();
    let fitted: Vec<(i32, f64, f64)> = basis_spec
        .iter()
        .enumerate()
        .map(|(i, &(k, ph))| (k, ph, coef[i] / scales[i]))
        .collect();
    let eval = |x: f64, y: f64| -> (f64, f64) {
        // 2∂_z Re(β z^k) = β k z^{k−1}; 2∂_z log|z| = 1/z.
        let (mut re, mut im) = (0.0, 0.0);
        let (zr, zt) = ((x * x + y * y).sqrt(), y.atan2(x));
        for &(k, ph, c) in &fitted {
            let (mag, arg) = if k == 0 {
                (c / zr, -zt)
            } else {
                let beta = if k > 0 { ph } else { -ph };
                (c * k as f64 * zr.powi(k - 1), beta + (k - 1) as f64 * zt)
            };
            re += mag * arg.cos();
            im += mag * arg.sin();
        }
        (re, im)
    };
    let mut laurent = Vec::new();
    for frac in [1.25, 1.5, 2.0] {
        let delta = geodesic_to_disk(a, r0 * frac)?.r();
        let samples = 256;
        let values: Vec<(f64, f64)> = (0..samples)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / samples as f64;
                eval(delta * t.cos(), delta * t.sin())
            })
            .collect();
        let coeffs = (-(FIT_MODES + 1)..FIT_MODES)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (j, (fr, fi)) in values.iter().enumerate() {
                    let t = -(k as f64) * 2.0 * PI * j as f64 / samples as f64;
                    re += fr * t.cos() - fi * t.sin();
                    im += fr * t.sin() + fi * t.cos();
                }
                (
                    k,
                    (re * re + im * im).sqrt() / (samples as f64 * delta.powi(k)),
                )
            })
            .collect();
        laurent.push(LaurentSample {
            radius: delta,
            coeffs,
        });
    }
    Ok(PotentialFlowReport {
        vorticity_l2: vort,
        relative_vorticity: vort / u_norm,
        best_potential_residual: best,
        laurent_coeffs: laurent,
        degenerate: false,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InequalityReport {
    pub count: usize,
    pub tolerance: f64,
    /// `a‖φ‖₂/‖∇φ‖₂` per probe, finite-difference `∇`.
    pub poincare: Vec<f64>,
    pub poincare_passed: usize,
    /// Same with `‖∇φ‖` from the energy form.
    pub poincare_energy_max: f64,
    pub ladyzhenskaya_max: f64,
    pub ladyzhenskaya_finite: bool,
    /// `(n, ‖∇dF‖₂/‖dF‖₂)`.
    pub harmonic_ratios: Vec<(u32, f64)>,
}

pub const POINCARE_TOLERANCE: f64 = 0.02;

/// Inequalities on `count` seeded zero-boundary probes; the zero field is skipped.
pub fn inequality_suite(grid: &Arc<AnnulusGrid>, seed: u64, count: usize) -> InequalityReport {
    let dc = DiscreteCalculus::new(grid);
    let a = grid.spec().a;
    let rows: Vec<Option<(f64, f64, f64)>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let phi = random_probe(&dc, seed, i as u64, false);
            let nm = norms(&phi);
            if nm.l2 == 0.0 || nm.h1 == 0.0 {
                return None;
            }
            let g = grad_norm_sq(&phi).sqrt();
            let l4 = crate::calculus::inner(InnerProductKind::L4Norm, &phi, &phi)
                .unwrap()
                .max(0.0)
                .powf(0.25);
            Some((
                a * nm.l2 / nm.h1,
                a * nm.l2 / g,
                l4 / (nm.l2.sqrt() * (nm.l2 + g).sqrt()),
            ))
        })
        .collect();
    let rows: Vec<(f64, f64, f64)> = rows.into_iter().flatten().collect();
    let poincare: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let harmonic_ratios = (1..=4)
        .map(|n| {
            let hp = harmonic_pair(HarmonicSpec::new(n, 1.0, 0.0).expect("valid mode"), grid);
            let nm = norms(&hp.df);
            (n, nm.h1 / nm.l2)
        })
        .collect();
    InequalityReport {
        count: rows.len(),
        tolerance: POINCARE_TOLERANCE,
        poincare_passed: poincare
            .iter()
            .filter(|q| **q <= 1.0 + POINCARE_TOLERANCE)
            .count(),
        poincare,
        poincare_energy_max: rows.iter().map(|r| r.1).fold(0.0, f64::max),
        ladyzhenskaya_max: rows.iter().map(|r| r.2).fold(0.0, f64::max),
        ladyzhenskaya_finite: rows.iter().all(|r| r.2.is_finite()),
        harmonic_ratios,
    }
}
