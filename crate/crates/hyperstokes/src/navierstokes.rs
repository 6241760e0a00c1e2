//! The nonlinear problem on truncated annuli: `Ψ`/`Φ`, empirical constants and
//! the smallness threshold, λ-continuation with Picard iteration, the energy
//! identity and a priori bound, and exhaustion by growing annuli.
//!
//! All gradient norms use `‖∇w‖² = ((w,w)) − a²‖w‖²`, which for zero-boundary
//! fields is `‖dw‖² + ‖d*w‖² + a²‖w‖²`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::calculus::{covariant_derivative, norms, pairing, DiscreteCalculus, InnerProductKind};
use crate::divsolve::DivSolveOptions;
use crate::error::{invalid, Error, Result};
use crate::fields::{Cutoff, CutoffSpec, HarmonicSpec};
use crate::hypgeom::DomainSpec;
use crate::mesh::{AnnulusGrid, BoundaryClass, Location, OneFormField, ScalarField};
use crate::stokes::{
    energy_alpha, glue_pressure, normalize_mean, recover_pressure, FunctionalLabel, GluedPressure,
    Ingredients, ResidualKind, StokesSolver, WeakFunctional,
};
use crate::systems::restrict_interior;

/// `Ψ = (η−1)dF + w` and `Φ(φ) = −((Ψ,φ)) − b(Ψ,Ψ,φ)`.
pub fn assemble_psi_phi(
    cut: &Cutoff,
    df: &OneFormField,
    w: &OneFormField,
) -> Result<(OneFormField, WeakFunctional)> {
    let grid = &df.grid;
    if !grid.same_as(&w.grid) || !grid.same_as(&cut.eta.grid) {
        return Err(invalid("ingredients live on different grids"));
    }
    let mut psi = cut.times_minus_one(df).axpy(1.0, w);
    psi.class = BoundaryClass::ZeroOnInner;
    let dc = DiscreteCalculus::new(grid);
    let mut phi = dc.energy_dual(energy_alpha(grid), &psi.data);
    for (x, y) in phi
        .iter_mut()
        .zip(dc.convect_dual(&psi.data, &psi.data, true))
    {
        *x = -*x - y;
    }
    restrict_interior(grid.n_r(), grid.n_th(), &mut phi);
    Ok((
        psi,
        WeakFunctional {
            grid: grid.clone(),
            label: FunctionalLabel::Phi,
            data: phi,
        },
    ))
}

/// `‖∇w‖²` for a zero-boundary field.
pub fn grad_norm_sq(w: &OneFormField) -> f64 {
    let dc = DiscreteCalculus::new(&w.grid);
    let a = w.grid.spec().a;
    dc.energy(a * a, &w.data, &w.data)
}

fn grad_norm_sq_with(dc: &DiscreteCalculus, a: f64, w: &[f64]) -> f64 {
    dc.energy(a * a, w, w)
}

/// Random zero-boundary probe built from a smooth bump in geodesic radius times
/// low angular modes. Divergence-free probes are `rot` of such a stream function.
pub fn random_probe(
    dc: &DiscreteCalculus,
    seed: u64,
    index: u64,
    divergence_free: bool,
) -> OneFormField {
    let grid = dc.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let (lo, hi) = (grid.geodesic_in(), grid.geodesic_out());
    let mut bump = |rows: &[f64]| {
        let c = rng.random_range(lo..hi);
        let w = rng.random_range(0.3..2.0);
        let modes: Vec<[f64; 2]> = (0..5)
            .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        (rows.to_vec(), c, w, modes)
    };
    let eval = |(rows, c, w, modes): &(Vec<f64>, f64, f64, Vec<[f64; 2]>),
                n: usize,
                theta: &dyn Fn(usize) -> f64| {
        let mut v = vec![0.0; rows.len() * n];
        for (i, rho) in rows.iter().enumerate() {
            let s = (rho - lo) / (hi - lo);
            let radial = (-((rho - c) / w).powi(2)).exp() * s * (1.0 - s);
            for j in 0..n {
                let t = theta(j);
                let ang: f64 = modes
                    .iter()
                    .enumerate()
                    .map(|(k, ab)| ab[0] * (k as f64 * t).cos() + ab[1] * (k as f64 * t).sin())
                    .sum();
                v[i * n + j] = radial * ang;
            }
        }
        v
    };
    let n = grid.n_th();
    if divergence_free {
        let b = bump(grid.node_geodesic());
        let mut psi = ScalarField::zeros(grid, Location::Nodes);
        psi.values = eval(&b, n, &|j| grid.theta_node(j));
        let n_r = grid.n_r();
        psi.values[..n].fill(0.0);
        psi.values[n_r * n..].fill(0.0);
        let mut u = dc.rot(&psi).expect("stream function on the calculus grid");
        u.class = BoundaryClass::ZeroOnBoth;
        u.enforce_class();
        u
    } else {
        let n_r = grid.n_r();
        let br = bump(grid.node_geodesic());
        let mut rows_t = vec![grid.geodesic_in()];
        rows_t.extend_from_slice(grid.center_geodesic());
        rows_t.push(grid.geodesic_out());
        let bt = bump(&rows_t);
        let mut data = eval(&br, n, &|j| grid.theta_center(j));
        data.extend(eval(&bt, n, &|j| grid.theta_node(j)));
        debug_assert_eq!(data.len(), (2 * n_r + 3) * n);
        let mut u = OneFormField::with_data(grid, BoundaryClass::ZeroOnBoth, data);
        u.enforce_class();
        u
    }
}

/// Empirical constants of the estimate chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantsReport {
    /// `sup a‖φ‖₂/‖∇φ‖₂` with the finite-difference covariant derivative.
    pub c_poincare: f64,
    /// Same quotient with `‖∇φ‖` from the energy form.
    pub c_poincare_energy: f64,
    /// `sup ‖φ‖₄ / (‖φ‖₂^{1/2}(‖φ‖₂ + ‖∇φ‖₂)^{1/2})`.
    pub c_ladyzhenskaya: f64,
    /// `‖∇dF‖₂/‖dF‖₂` on the grid.
    pub c_harmonic: f64,
    /// `sup |((Ψ,φ))| / (‖dF‖‖∇φ‖)`.
    pub k_linear: f64,
    /// `sup |b(Ψ,Ψ,φ)| / (‖dF‖²‖∇φ‖)`.
    pub k_convection: f64,
    /// `sup |b(φ,Ψ,φ)| / (‖dF‖‖∇φ‖²)`.
    pub k_coupling: f64,
    /// `2·max(k_linear, k_convection, k_coupling)`.
    pub c_ar0: f64,
    /// `1/(2·c_ar0)`.
    pub df_threshold: f64,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Quotients {
    poincare_fd: f64,
    poincare_energy: f64,
    lady: f64,
    k1: f64,
    k2: f64,
    k3: f64,
}

impl Quotients {
    fn max(self, o: Self) -> Self {
        Self {
            poincare_fd: self.poincare_fd.max(o.poincare_fd),
            poincare_energy: self.poincare_energy.max(o.poincare_energy),
            lady: self.lady.max(o.lady),
            k1: self.k1.max(o.k1),
            k2: self.k2.max(o.k2),
            k3: self.k3.max(o.k3),
        }
    }
}

struct ChainData<'a> {
    dc: &'a DiscreteCalculus,
    a: f64,
    psi: &'a [f64],
    lin: Vec<f64>,
    conv: Vec<f64>,
    df_norm: f64,
}

impl ChainData<'_> {
    fn quotients(&self, phi: &OneFormField) -> Quotients {
        let g2 = grad_norm_sq_with(self.dc, self.a, &phi.data);
        if !(g2 > 0.0) {
            return Quotients::default();
        }
        let g = g2.sqrt();
        let nm = norms(phi);
        let l4 = crate::calculus::inner(InnerProductKind::L4Norm, phi, phi)
            .unwrap_or(0.0)
            .max(0.0)
            .powf(0.25);
        let dot = |x: &[f64]| x.iter().zip(&phi.data).map(|(a, b)| a * b).sum::<f64>();
        let b3 = 0.5
            * (self.dc.convect_plain(&phi.data, self.psi, &phi.data)
                - self.dc.convect_plain(&phi.data, &phi.data, self.psi));
        Quotients {
            poincare_fd: if nm.h1 > 0.0 {
                self.a * nm.l2 / nm.h1
            } else {
                0.0
            },
            poincare_energy: self.a * nm.l2 / g,
            lady: l4 / (nm.l2.sqrt() * (nm.l2 + g).sqrt()),
            k1: dot(&self.lin).abs() / (self.df_norm * g),
            k2: dot(&self.conv).abs() / (self.df_norm * self.df_norm * g),
            k3: b3.abs() / (self.df_norm * g2),
        }
    }
}

/// Estimate the constants from `samples` seeded divergence-free probes plus the
/// worst probes: Riesz representatives of the two linear functionals and a few
/// power iterations for the coupling form. Uses `c = 1`; the constants do not depend on `c`.
pub fn estimate_constants(
    grid: &Arc<AnnulusGrid>,
    harmonic: HarmonicSpec,
    samples: usize,
    seed: u64,
) -> Result<ConstantsReport> {
    let unit = HarmonicSpec::new(harmonic.n, 1.0, harmonic.phase)?;
    let ing = Ingredients::build(
        grid,
        unit,
        CutoffSpec::new(grid.spec()),
        &DivSolveOptions::default(),
    )?;
    let solver = StokesSolver::new(grid)?;
    estimate_constants_with(&solver, &ing, samples, seed)
}

fn estimate_constants_with(
    solver: &StokesSolver,
    ing: &Ingredients,
    samples: usize,
    seed: u64,
) -> Result<ConstantsReport> {
    let dc = solver.calculus();
    let grid = dc.grid().clone();
    let a = grid.spec().a;
    let df_norm = ing.harmonic.spec.total_norm();
    let (psi, _) = assemble_psi_phi(&ing.cutoff, &ing.harmonic.df, &ing.div.w)?;
    let mut lin = dc.energy_dual(energy_alpha(&grid), &psi.data);
    let mut conv = dc.convect_dual(&psi.data, &psi.data, true);
    restrict_interior(grid.n_r(), grid.n_th(), &mut lin);
    restrict_interior(grid.n_r(), grid.n_th(), &mut conv);
    let chain = ChainData {
        dc,
        a,
        psi: &psi.data,
        lin,
        conv,
        df_norm,
    };

    let random = (0..samples)
        .into_par_iter()
        .map(|i| chain.quotients(&random_probe(dc, seed, i as u64, true)))
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Quotients::default(), Quotients::max);

    let riesz = |data: &[f64]| {
        solver
            .solve(&WeakFunctional {
                grid: grid.clone(),
                label: FunctionalLabel::Residual,
                data: data.to_vec(),
            })
            .0
    };
    let mut worst = chain
        .quotients(&riesz(&chain.lin))
        .max(chain.quotients(&riesz(&chain.conv)));
    let mut phi = random_probe(dc, seed, samples as u64, true);
    for _ in 0..12 {
        let mut s = dc.convect_dual(&phi.data, &psi.data, true);
        for (x, y) in s
            .iter_mut()
            .zip(dc.convect_dual_first(&psi.data, &phi.data, true))
        {
            *x += y;
        }
        restrict_interior(grid.n_r(), grid.n_th(), &mut s);
        let next = riesz(&s);
        let nrm = grad_norm_sq_with(dc, a, &next.data).sqrt();
        if !(nrm > 0.0) {
            break;
        }
        phi = next.scaled(1.0 / nrm);
        worst = worst.max(chain.quotients(&phi));
    }
    let q = random.max(worst);
    let c_ar0 = 2.0 * q.k1.max(q.k2).max(q.k3);
    let df = &ing.harmonic.df;
    let dn = norms(df);
    Ok(ConstantsReport {
        c_poincare: q.poincare_fd,
        c_poincare_energy: q.poincare_energy,
        c_ladyzhenskaya: q.lady,
        c_harmonic: dn.h1 / dn.l2,
        k_linear: q.k1,
        k_convection: q.k2,
        k_coupling: q.k3,
        c_ar0,
        df_threshold: 1.0 / (2.0 * c_ar0),
        samples,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Increasing homotopy values in `(0,1]` ending at 1.
    pub lambda_schedule: Vec<f64>,
    pub picard_tol: f64,
    /// Per λ value.
    pub picard_max_iters: usize,
    /// Relaxation `θ ← θ + ω(θ_new − θ)`.
    pub damping: f64,
    /// Skip the smallness check.
    pub allow_large_data: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            lambda_schedule: vec![0.5, 1.0],
            picard_tol: 1e-10,
            picard_max_iters: 50,
            damping: 1.0,
            allow_large_data: false,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let l = &self.lambda_schedule;
        if l.is_empty()
            || l.iter().any(|x| !(*x > 0.0 && *x <= 1.0))
            || l.windows(2).any(|w| w[1] <= w[0])
            || *l.last().unwrap() != 1.0
        {
            return Err(invalid(
                "lambda schedule must be increasing values in (0,1] ending at 1",
            ));
        }
        if !(self.picard_tol > 0.0)
            || self.picard_max_iters == 0
            || !(self.damping > 0.0 && self.damping <= 1.0)
        {
            return Err(invalid(
                "picard tolerance, iteration cap and damping in (0,1] must be positive",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaTrace {
    pub lambda: f64,
    /// Energy-norm increments `((θ^{k+1}−θ^k))^{1/2}`.
    pub increments: Vec<f64>,
    pub converged: bool,
    /// Energy norm of the solution at this λ.
    pub solution_norm: f64,
}

impl LambdaTrace {
    pub fn iterations(&self) -> usize {
        self.increments.len()
    }

    /// `inc_{k+1}/inc_k`.
    pub fn contraction_ratios(&self) -> Vec<f64> {
        self.increments
            .windows(2)
            .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardTrace {
    pub stages: Vec<LambdaTrace>,
}

impl PicardTrace {
    pub fn total_iterations(&self) -> usize {
        self.stages.iter().map(LambdaTrace::iterations).sum()
    }
}

#[derive(Debug, Clone)]
pub struct NsSolution {
    pub w: OneFormField,
    pub pressure: ScalarField,
    pub trace: PicardTrace,
}

/// Smallness data: `‖dF‖` and the threshold `1/(2C)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Smallness {
    pub df_norm: f64,
    pub threshold: f64,
}

impl Smallness {
    pub fn check(&self, allow: bool) -> Result<()> {
        if allow || self.df_norm < self.threshold {
            return Ok(());
        }
        Err(Error::Smallness(format!(
            "‖dF‖ = {:.6e} violates the smallness condition ‖dF‖ < 1/(2C(a,R0)) = {:.6e}; scale c down or pass the explicit unsafe override",
            self.df_norm, self.threshold
        )))
    }
}

/// λ-continuation with Picard iteration for
/// `((θ,φ)) − ⟨P, d̃iv φ⟩ = λ[⟨Φ,φ⟩ − b(θ,Ψ,φ) − b(Ψ,θ,φ) − b(θ,θ,φ)]`.
pub fn solve_ns_annulus(
    solver: &StokesSolver,
    psi: &OneFormField,
    phi: &WeakFunctional,
    opts: &SolverOptions,
    smallness: Smallness,
    warm_start: Option<&OneFormField>,
) -> Result<NsSolution> {
    opts.validate()?;
    smallness.check(opts.allow_large_data)?;
    let dc = solver.calculus();
    let grid = dc.grid().clone();
    if !grid.same_as(&psi.grid) || !grid.same_as(&phi.grid) {
        return Err(invalid("Ψ and Φ must live on the solver grid"));
    }
    let (n_r, n_th) = (grid.n_r(), grid.n_th());
    let alpha = energy_alpha(&grid);
    let enorm = |x: &[f64]| dc.energy(alpha, x, x).max(0.0).sqrt();
    let mut theta = match warm_start {
        Some(w) if w.grid.same_as(&grid) => w.data.clone(),
        Some(_) => return Err(invalid("warm start lives on a different grid")),
        None => vec![0.0; phi.data.len()],
    };
    let mut pressure = ScalarField::zeros(&grid, Location::Centers);
    let mut stages = Vec::new();
    for &lambda in &opts.lambda_schedule {
        let mut trace = LambdaTrace {
            lambda,
            increments: Vec::new(),
            converged: false,
            solution_norm: 0.0,
        };
        let mut growth = 0;
        for _ in 0..opts.picard_max_iters {
            let mut rhs = phi.data.clone();
            for part in [
                dc.convect_dual(&theta, &psi.data, true),
                dc.convect_dual(&psi.data, &theta, true),
                dc.convect_dual(&theta, &theta, true),
            ] {
                for (x, y) in rhs.iter_mut().zip(part) {
                    *x -= y;
                }
            }
            restrict_interior(n_r, n_th, &mut rhs);
            for x in &mut rhs {
                *x *= lambda;
            }
            let (next, p) = solver.solve(&WeakFunctional {
                grid: grid.clone(),
                label: FunctionalLabel::Residual,
                data: rhs,
            });
            let step: Vec<f64> = next
                .data
                .iter()
                .zip(&theta)
                .map(|(n, t)| opts.damping * (n - t))
                .collect();
            for (t, s) in theta.iter_mut().zip(&step) {
                *t += s;
            }
            pressure = p;
            let inc = enorm(&step);
            if trace.increments.last().is_some_and(|prev| inc > *prev) {
                growth += 1;
            } else {
                growth = 0;
            }
            trace.increments.push(inc);
            let norm = enorm(&theta);
            if inc <= opts.picard_tol * norm || norm == 0.0 {
                trace.converged = true;
                trace.solution_norm = norm;
                break;
            }
            if growth >= 5 {
                return Err(Error::Solver(format!(
                    "Picard iteration diverges at λ = {lambda} (increment grew five times in a row); reduce ‖dF‖ or use a denser λ schedule"
                )));
            }
        }
        let converged = trace.converged;
        stages.push(trace);
        if !converged {
            return Err(Error::Solver(format!(
                "Picard iteration did not reach tolerance {:.1e} within {} steps at λ = {lambda}",
                opts.picard_tol, opts.picard_max_iters
            )));
        }
    }
    normalize_mean(&mut pressure, n_r);
    Ok(NsSolution {
        w: OneFormField::with_data(&grid, BoundaryClass::ZeroOnBoth, theta),
        pressure,
        trace: PicardTrace { stages },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyIdentityReport {
    /// `‖∇w‖² + a²‖w‖²`.
    pub energy: f64,
    pub phi_w: f64,
    pub b_w_psi_w: f64,
    /// `|energy − ⟨Φ,w⟩ + b(w,Ψ,w)|`.
    pub residual: f64,
    pub relative: f64,
    /// `b(Ψ,w,w)` and `b(w,w,w)` relative to `‖w‖_E²(‖Ψ‖_E + ‖w‖_E)`.
    pub cancel_psi_w_w: f64,
    pub cancel_w_w_w: f64,
}

/// Cancellation terms `(b(Ψ,w,w), b(w,w,w))` with the skew or plain convection form.
pub fn cancellation_terms(w: &OneFormField, psi: &OneFormField, skew: bool) -> (f64, f64) {
    let dc = DiscreteCalculus::new(&w.grid);
    let form = |t: &[f64], v: &[f64], p: &[f64]| {
        if skew {
            0.5 * (dc.convect_plain(t, v, p) - dc.convect_plain(t, p, v))
        } else {
            dc.convect_plain(t, v, p)
        }
    };
    (
        form(&psi.data, &w.data, &w.data),
        form(&w.data, &w.data, &w.data),
    )
}

pub fn check_energy_identity(
    w: &OneFormField,
    psi: &OneFormField,
    phi: &WeakFunctional,
) -> Result<EnergyIdentityReport> {
    if !w.grid.same_as(&psi.grid) || !w.grid.same_as(&phi.grid) {
        return Err(invalid("fields live on different grids"));
    }
    let dc = DiscreteCalculus::new(&w.grid);
    let alpha = energy_alpha(&w.grid);
    let energy = dc.energy(alpha, &w.data, &w.data);
    let phi_w = phi.apply(w)?;
    let b_w_psi_w = 0.5
        * (dc.convect_plain(&w.data, &psi.data, &w.data)
            - dc.convect_plain(&w.data, &w.data, &psi.data));
    let residual = (energy - phi_w + b_w_psi_w).abs();
    let (c1, c2) = cancellation_terms(w, psi, true);
    let we = energy.max(0.0).sqrt();
    let pe = dc.energy(alpha, &psi.data, &psi.data).max(0.0).sqrt();
    let scale = we * we * (pe + we);
    let rel = |x: f64, s: f64| if s > 0.0 { x.abs() / s } else { x.abs() };
    Ok(EnergyIdentityReport {
        energy,
        phi_w,
        b_w_psi_w,
        residual,
        relative: rel(residual, energy),
        cancel_psi_w_w: rel(c1, scale),
        cancel_w_w_w: rel(c2, scale),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AprioriReport {
    /// `‖∇w‖²`.
    pub lhs: f64,
    /// `C²(‖dF‖+‖dF‖²)²/(1−2C‖dF‖)`, infinite at or above the threshold.
    pub rhs: f64,
    pub satisfied: bool,
}

pub fn check_apriori_bound(
    w: &OneFormField,
    df_norm: f64,
    constants: &ConstantsReport,
) -> AprioriReport {
    let lhs = grad_norm_sq(w);
    let c = constants.c_ar0;
    let den = 1.0 - 2.0 * c * df_norm;
    let rhs = if den > 0.0 {
        c * c * (df_norm + df_norm * df_norm).powi(2) / den
    } else {
        f64::INFINITY
    };
    AprioriReport {
        lhs,
        rhs,
        satisfied: lhs <= rhs,
    }
}

/// Growing outer radii with a fixed radial density; stage grids are nested prefixes.
#[derive(Debug, Clone, PartialEq)]
pub struct ExhaustionSchedule {
    pub radii: Vec<f64>,
    /// Radial cells per unit geodesic length.
    pub cells_per_unit: f64,
    pub n_th: usize,
}

impl ExhaustionSchedule {
    pub fn validate(&self, spec: DomainSpec) -> Result<()> {
        if self.radii.is_empty() {
            return Err(invalid("exhaustion schedule is empty"));
        }
        if self.radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("exhaustion radii must be strictly increasing"));
        }
        if !(self.radii[0] > 5.0 * spec.r0) {
            return Err(invalid(format!(
                "first exhaustion radius must exceed 5R0 = {}",
                5.0 * spec.r0
            )));
        }
        if !(self.cells_per_unit > 0.0) {
            return Err(invalid("radial density must be positive"));
        }
        Ok(())
    }

    /// Grid on `Ω(R₀, R_m)`; breakpoints `R₀, 2R₀, 4R₀, R₁, …, R_m`.
    pub fn stage_grid(&self, spec: DomainSpec, m: usize) -> Result<Arc<AnnulusGrid>> {
        self.validate(spec)?;
        let r0 = spec.r0;
        let mut breaks = vec![r0, 2.0 * r0, 4.0 * r0];
        breaks.extend_from_slice(&self.radii[..=m]);
        let counts: Vec<usize> = breaks
            .windows(2)
            .enumerate()
            .map(|(k, w)| {
                let c = ((w[1] - w[0]) * self.cells_per_unit).ceil() as usize;
                if k == 1 {
                    c.max(crate::mesh::MIN_RING_CELLS)
                } else {
                    c.max(1)
                }
            })
            .collect();
        AnnulusGrid::from_segments(spec, &breaks, &counts, self.n_th)
    }
}

#[derive(Debug, Clone)]
pub struct StageResult {
    pub outer_radius: f64,
    pub solution: NsSolution,
    pub psi: OneFormField,
    pub energy: EnergyIdentityReport,
    pub apriori: AprioriReport,
}

#[derive(Debug, Clone)]
pub struct ExhaustionReport {
    pub stages: Vec<StageResult>,
    /// `δ_m = ‖w_{m+1} − w_m‖_{H¹(Ω(R₀,R₁))}`.
    pub cauchy: Vec<f64>,
    /// Locals recovered from the last stage on `Ω(R₀,R_m)` and glued.
    pub glued: Option<GluedPressure>,
    /// `‖P_m + C − P_glued‖` on `Ω(R₀,R₁)` for each stage's own multiplier.
    pub cross_stage_gaps: Vec<f64>,
    /// Set when a stage failed; earlier stages are kept.
    pub failure: Option<String>,
}

/// Copy the prefix rows of `u` onto the smaller nested grid `small`.
pub fn restrict_to_prefix(u: &OneFormField, small: &Arc<AnnulusGrid>) -> Result<OneFormField> {
    let big = &u.grid;
    let (nb, ns, n) = (big.n_r(), small.n_r(), small.n_th());
    if n != big.n_th() || ns > nb || small.node_geodesic()[..=ns] != big.node_geodesic()[..=ns] {
        return Err(invalid("grid is not a nested prefix"));
    }
    let mut out = OneFormField::zeros(small);
    out.class = if ns == nb {
        u.class
    } else {
        BoundaryClass::ZeroOnInner
    };
    out.radial_mut()
        .copy_from_slice(&u.radial()[..(ns + 1) * n]);
    if ns == nb {
        out.angular_mut().copy_from_slice(u.angular());
    } else {
        out.angular_mut()[..(ns + 1) * n].copy_from_slice(&u.angular()[..(ns + 1) * n]);
        // The small grid's outer wall row sits at r_ns, between two center rows of the big grid.
        let xa = big.angular_row_radii();
        let t = (small.r_out() - xa[ns]) / (xa[ns + 1] - xa[ns]);
        let (lo, hi) = (
            u.angular()[ns * n..(ns + 1) * n].to_vec(),
            u.angular()[(ns + 1) * n..(ns + 2) * n].to_vec(),
        );
        for (j, v) in out.angular_mut()[(ns + 1) * n..].iter_mut().enumerate() {
            *v = lo[j] + t * (hi[j] - lo[j]);
        }
    }
    Ok(out)
}

/// `(‖∇u‖² + ‖u‖²)^{1/2}` over the first `rows` cell rows, finite-difference `∇`.
pub fn h1_norm_on_rows(u: &OneFormField, rows: usize) -> f64 {
    let g = &u.grid;
    let n = g.n_th();
    let k = covariant_derivative(u);
    let p = pairing(u, u).expect("same grid");
    let mut total = 0.0;
    for i in 0..rows.min(g.n_r()) {
        let w = g.cell_area(i) * g.pairing_weight_center(i);
        let t: f64 = (0..4)
            .map(|c| {
                k.comps[c][i * n..(i + 1) * n]
                    .iter()
                    .map(|x| x * x)
                    .sum::<f64>()
            })
            .sum();
        total += w * t;
        total += g.cell_area(i) * g.vw_center(i) * p.values[i * n..(i + 1) * n].iter().sum::<f64>();
    }
    total.sqrt()
}

/// Solve on each `Ω(R₀,R_m)` in turn, warm-starting from the previous stage.
pub fn exhaust_domains(
    spec: DomainSpec,
    harmonic: HarmonicSpec,
    schedule: &ExhaustionSchedule,
    opts: &SolverOptions,
    constants: &ConstantsReport,
) -> Result<ExhaustionReport> {
    schedule.validate(spec)?;
    opts.validate()?;
    let smallness = Smallness {
        df_norm: harmonic.total_norm(),
        threshold: constants.df_threshold,
    };
    smallness.check(opts.allow_large_data)?;
    let mut stages: Vec<StageResult> = Vec::new();
    let mut failure = None;
    for m in 0..schedule.radii.len() {
        let stage = (|| -> Result<StageResult> {
            let grid = schedule.stage_grid(spec, m)?;
            let ing = Ingredients::build(
                &grid,
                harmonic,
                CutoffSpec::new(spec),
                &DivSolveOptions::default(),
            )?;
            let (psi, phi) = assemble_psi_phi(&ing.cutoff, &ing.harmonic.df, &ing.div.w)?;
            let solver = StokesSolver::new(&grid)?;
            let warm = match stages.last() {
                Some(prev) => Some(extend_by_zero(&prev.solution.w, &grid)?),
                None => None,
            };
            let solution = solve_ns_annulus(&solver, &psi, &phi, opts, smallness, warm.as_ref())?;
            let energy = check_energy_identity(&solution.w, &psi, &phi)?;
            let apriori = check_apriori_bound(&solution.w, smallness.df_norm, constants);
            Ok(StageResult {
                outer_radius: schedule.radii[m],
                solution,
                psi,
                energy,
                apriori,
            })
        })();
        match stage {
            Ok(s) => stages.push(s),
            Err(e) => {
                failure = Some(format!("stage {} (R = {}): {e}", m + 1, schedule.radii[m]));
                break;
            }
        }
    }
    let mut cauchy = Vec::new();
    let mut glued = None;
    let mut cross = Vec::new();
    if let Some(first) = stages.first() {
        let g1 = first.solution.w.grid.clone();
        let rows1 = g1.n_r();
        for pair in stages.windows(2) {
            let (a, b) = (&pair[0].solution.w, &pair[1].solution.w);
            let b_small = restrict_to_prefix(b, &a.grid)?;
            let diff = b_small.axpy(-1.0, &restrict_to_prefix(a, &a.grid)?);
            cauchy.push(h1_norm_on_rows(&diff, rows1));
        }
        if failure.is_none() {
            let last = stages.last().unwrap();
            let u = last.psi.axpy(1.0, &last.solution.w);
            let locals = stages
                .iter()
                .map(|s| recover_pressure(&u, s.solution.w.grid.n_r(), ResidualKind::NavierStokes))
                .collect::<Result<Vec<_>>>()?;
            let gp = glue_pressure(&locals, 1e-8)?;
            let n = g1.n_th();
            for s in &stages {
                let own = ScalarField {
                    grid: g1.clone(),
                    location: Location::Centers,
                    values: s.solution.pressure.values[..rows1 * n].to_vec(),
                };
                let reference = ScalarField {
                    grid: g1.clone(),
                    location: Location::Centers,
                    values: gp.pressure.values[..rows1 * n].to_vec(),
                };
                let mut d = ScalarField {
                    values: own
                        .values
                        .iter()
                        .zip(&reference.values)
                        .map(|(x, y)| x - y)
                        .collect(),
                    ..own
                };
                normalize_mean(&mut d, rows1);
                let l2: f64 = (0..rows1)
                    .map(|i| {
                        g1.cell_area(i)
                            * g1.vw_center(i)
                            * d.values[i * n..(i + 1) * n]
                                .iter()
                                .map(|v| v * v)
                                .sum::<f64>()
                    })
                    .sum();
                cross.push(l2.sqrt());
            }
            glued = Some(gp);
        }
    }
    Ok(ExhaustionReport {
        stages,
        cauchy,
        glued,
        cross_stage_gaps: cross,
        failure,
    })
}

/// Zero-extend a field from a nested prefix grid to `big`.
pub fn extend_by_zero(u: &OneFormField, big: &Arc<AnnulusGrid>) -> Result<OneFormField> {
    let small = &u.grid;
    let (ns, nb, n) = (small.n_r(), big.n_r(), big.n_th());
    if n != small.n_th() || ns > nb || small.node_geodesic()[..=ns] != big.node_geodesic()[..=ns] {
        return Err(invalid("grid is not a nested prefix"));
    }
    let mut out = OneFormField::zeros(big);
    out.radial_mut()[..(ns + 1) * n].copy_from_slice(u.radial());
    out.angular_mut()[..(ns + 1) * n].copy_from_slice(&u.angular()[..(ns + 1) * n]);
    out.enforce_class();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::trilinear;

    fn std_grid(n_r: usize, n_th: usize) -> Arc<AnnulusGrid> {
        AnnulusGrid::build(DomainSpec::new(1.0, 1.0).unwrap(), 1.0, 12.0, n_r, n_th).unwrap()
    }

    fn problem(grid: &Arc<AnnulusGrid>, c: f64) -> (Ingredients, OneFormField, WeakFunctional) {
        let ing = Ingredients::build(
            grid,
            HarmonicSpec::new(1, c, 0.0).unwrap(),
            CutoffSpec::new(grid.spec()),
            &DivSolveOptions::default(),
        )
        .unwrap();
        let (psi, phi) = assemble_psi_phi(&ing.cutoff, &ing.harmonic.df, &ing.div.w).unwrap();
        (ing, psi, phi)
    }

    #[test]
    fn psi_is_divergence_free() {
        let g = std_grid(96, 32);
        let (_, psi, _) = problem(&g, 1.0);
        let d = crate::calculus::codifferential(&psi);
        let dn: f64 = {
            let n = g.n_th();
            (0..g.n_r())
                .map(|i| {
                    g.cell_area(i)
                        * g.vw_center(i)
                        * d.values[i * n..(i + 1) * n]
                            .iter()
                            .map(|v| v * v)
                            .sum::<f64>()
                })
                .sum::<f64>()
                .sqrt()
        };
        assert!(dn <= 1e-8 * norms(&psi).h1, "{dn}");
    }

    #[test]
    fn phi_vanishes_away_from_psi() {
        let g = std_grid(64, 32);
        let (_, _, phi) = problem(&g, 1.0);
        // Inside 2R₀ the cutoff is 1 and w is 0, so Ψ vanishes there.
        let dc = DiscreteCalculus::new(&g);
        let lo = g.node_index_of(2.0).unwrap();
        let mut probe = random_probe(&dc, 3, 0, false);
        let n = g.n_th();
        probe.radial_mut()[(lo - 3) * n..].fill(0.0);
        probe.angular_mut()[(lo - 3) * n..].fill(0.0);
        assert!(phi.apply(&probe).unwrap().abs() < 1e-14);
    }

    #[test]
    fn zero_data_gives_zero_in_one_step() {
        let g = std_grid(64, 32);
        let solver = StokesSolver::new(&g).unwrap();
        let psi = OneFormField::zeros(&g);
        let phi = WeakFunctional::zeros(&g, FunctionalLabel::Phi);
        let s = solve_ns_annulus(
            &solver,
            &psi,
            &phi,
            &SolverOptions::default(),
            Smallness {
                df_norm: 0.0,
                threshold: 1.0,
            },
            None,
        )
        .unwrap();
        assert_eq!(s.w.max_abs(), 0.0);
        assert!(s.trace.stages.iter().all(|t| t.iterations() == 1));
    }

    #[test]
    fn smallness_is_enforced_unless_overridden() {
        let s = Smallness {
            df_norm: 2.0,
            threshold: 1.0,
        };
        assert!(matches!(s.check(false), Err(Error::Smallness(_))));
        assert!(s.check(true).is_ok());
    }

    #[test]
    fn constants_are_reproducible_and_c_independent() {
        let g = std_grid(64, 32);
        let a = estimate_constants(&g, HarmonicSpec::new(1, 1.0, 0.0).unwrap(), 16, 9).unwrap();
        let b = estimate_constants(&g, HarmonicSpec::new(1, 0.01, 0.0).unwrap(), 16, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.df_threshold > 0.0 && a.df_threshold.is_finite());
        assert!(a.c_poincare_energy <= 1.0);
    }

    #[test]
    fn small_data_run_converges_with_identity() {
        let g = std_grid(96, 32);
        let k = estimate_constants(&g, HarmonicSpec::new(1, 1.0, 0.0).unwrap(), 16, 1).unwrap();
        let c = 0.05 * k.df_threshold / std::f64::consts::PI.sqrt();
        let (ing, psi, phi) = problem(&g, c);
        let solver = StokesSolver::new(&g).unwrap();
        let sm = Smallness {
            df_norm: ing.harmonic.spec.total_norm(),
            threshold: k.df_threshold,
        };
        let s = solve_ns_annulus(&solver, &psi, &phi, &SolverOptions::default(), sm, None).unwrap();
        assert!(s.trace.total_iterations() <= 50);
        let e = check_energy_identity(&s.w, &psi, &phi).unwrap();
        assert!(e.relative <= 1e-8, "{e:?}");
        assert!(
            e.cancel_psi_w_w <= 1e-10 && e.cancel_w_w_w <= 1e-10,
            "{e:?}"
        );
        assert!(check_apriori_bound(&s.w, sm.df_norm, &k).satisfied);
        assert!((trilinear(&psi, &s.w, &s.w).unwrap()).abs() <= 1e-10 * e.energy.max(1e-300));
    }

    #[test]
    fn schedule_validation() {
        let spec = DomainSpec::new(1.0, 1.0).unwrap();
        let ok = ExhaustionSchedule {
            radii: vec![6.0, 8.0],
            cells_per_unit: 8.0,
            n_th: 16,
        };
        assert!(ok.validate(spec).is_ok());
        let bad = ExhaustionSchedule {
            radii: vec![5.0, 8.0],
            ..ok.clone()
        };
        assert!(bad.validate(spec).is_err());
        let bad = ExhaustionSchedule {
            radii: vec![8.0, 6.0],
            ..ok.clone()
        };
        assert!(bad.validate(spec).is_err());
        let g1 = ok.stage_grid(spec, 0).unwrap();
        let g2 = ok.stage_grid(spec, 1).unwrap();
        assert_eq!(g1.node_geodesic(), &g2.node_geodesic()[..=g1.n_r()]);
    }

    fn exhaust(radii: Vec<f64>) -> ExhaustionReport {
        let spec = DomainSpec::new(1.0, 1.0).unwrap();
        let sched = ExhaustionSchedule {
            radii,
            cells_per_unit: 8.0,
            n_th: 32,
        };
        let g = sched.stage_grid(spec, 0).unwrap();
        let k = estimate_constants(&g, HarmonicSpec::new(1, 1.0, 0.0).unwrap(), 16, 4).unwrap();
        let c = 0.05 * k.df_threshold / std::f64::consts::PI.sqrt();
        exhaust_domains(
            spec,
            HarmonicSpec::new(1, c, 0.0).unwrap(),
            &sched,
            &SolverOptions::default(),
            &k,
        )
        .unwrap()
    }

    #[test]
    fn exhaustion_differences_decrease_and_pressure_glues() {
        let rep = exhaust(vec![6.0, 8.0, 10.0]);
        assert!(rep.failure.is_none());
        assert_eq!(rep.cauchy.len(), 2);
        assert!(rep.cauchy[1] < rep.cauchy[0], "{:?}", rep.cauchy);
        assert!(rep.glued.unwrap().overlap_gaps.iter().all(|g| *g <= 1e-8));
        assert!(rep.stages.iter().all(|s| s.apriori.satisfied));
    }

    #[test]
    fn single_stage_has_no_differences() {
        let rep = exhaust(vec![6.0]);
        assert!(rep.cauchy.is_empty());
        assert_eq!(rep.stages.len(), 1);
    }
}
