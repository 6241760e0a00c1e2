//! The linear problem: forcing `T`, the constrained energy solve for `w̃`,
//! assembly of `u = (η−1)dF + w + w̃`, weak residuals, and pressure
//! recovery/gluing on nested annuli.
//!
//! Test fields are the interior faces of the grid (zero on both boundary
//! circles). Dual vectors are stored as full face arrays whose boundary rows
//! are zero.

use std::sync::Arc;

use crate::calculus::{h10_inner, DiscreteCalculus};
use crate::divsolve::{DivSolveOptions, DivergenceSolution, RingDivergenceSolver};
use crate::error::{invalid, Error, Result};
use crate::fields::{
    cutoff, divergence_rhs, harmonic_pair, Cutoff, CutoffSpec, HarmonicPair, HarmonicSpec,
};
use crate::mesh::{AnnulusGrid, BoundaryClass, Location, OneFormField, ScalarField};
use crate::modes::{DofMap, ModeFactors};
use crate::systems::{restrict_interior, FaceForm, FormSolver, SaddleSolver};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionalLabel {
    T,
    Phi,
    Residual,
}

/// A linear functional on test 1-forms, stored as its action on each interior face.
#[derive(Debug, Clone)]
pub struct WeakFunctional {
    pub grid: Arc<AnnulusGrid>,
    pub label: FunctionalLabel,
    pub data: Vec<f64>,
}

impl WeakFunctional {
    pub fn zeros(grid: &Arc<AnnulusGrid>, label: FunctionalLabel) -> Self {
        Self {
            grid: grid.clone(),
            label,
            data: vec![0.0; (2 * grid.n_r() + 3) * grid.n_th()],
        }
    }

    fn from_dual(grid: &Arc<AnnulusGrid>, label: FunctionalLabel, mut data: Vec<f64>) -> Self {
        restrict_interior(grid.n_r(), grid.n_th(), &mut data);
        Self {
            grid: grid.clone(),
            label,
            data,
        }
    }

    /// `⟨L, φ⟩`; boundary values of `φ` are ignored.
    pub fn apply(&self, phi: &OneFormField) -> Result<f64> {
        if !self.grid.same_as(&phi.grid) {
            return Err(invalid("test field lives on a different grid"));
        }
        Ok(self.data.iter().zip(&phi.data).map(|(a, b)| a * b).sum())
    }
}

/// `α` of the energy form `((u,v)) = ∫g(du,dv) + α∫g(u,v)`.
pub fn energy_alpha(grid: &AnnulusGrid) -> f64 {
    let a = grid.spec().a;
    2.0 * a * a
}

/// Cached factorizations for one grid.
pub struct StokesSolver {
    grid: Arc<AnnulusGrid>,
    dc: DiscreteCalculus,
    saddle: SaddleSolver,
    energy: FormSolver,
}

impl StokesSolver {
    pub fn new(grid: &Arc<AnnulusGrid>) -> Result<Self> {
        let dc = DiscreteCalculus::new(grid);
        let form = FaceForm::Energy {
            alpha: energy_alpha(grid),
        };
        let saddle = SaddleSolver::new(&dc, form)?;
        let energy = FormSolver::new(&dc, form)?;
        Ok(Self {
            grid: grid.clone(),
            dc,
            saddle,
            energy,
        })
    }

    pub fn calculus(&self) -> &DiscreteCalculus {
        &self.dc
    }

    /// `sqrt(Lᵀ A⁻¹ L)`: the norm of `L` dual to the energy norm on test fields.
    pub fn dual_norm(&self, l: &WeakFunctional) -> f64 {
        let x = self.energy.solve(&l.data);
        x.iter()
            .zip(&l.data)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            .max(0.0)
            .sqrt()
    }

    /// Riesz representative of `L` in the energy inner product (unconstrained).
    pub fn riesz(&self, l: &WeakFunctional) -> OneFormField {
        OneFormField::with_data(
            &self.grid,
            BoundaryClass::ZeroOnBoth,
            self.energy.solve(&l.data),
        )
    }

    /// Solve `((w̃,φ)) − ⟨P, d̃iv φ⟩ = ⟨L,φ⟩`, `div w̃ = 0`; `P` has zero mean.
    pub fn solve(&self, l: &WeakFunctional) -> (OneFormField, ScalarField) {
        let zero = vec![0.0; self.grid.n_r() * self.grid.n_th()];
        let (u, p) = self.saddle.solve(&l.data, &zero);
        let w = OneFormField::with_data(&self.grid, BoundaryClass::ZeroOnBoth, u);
        let mut pf = ScalarField {
            grid: self.grid.clone(),
            location: Location::Centers,
            values: p,
        };
        normalize_mean(&mut pf, self.grid.n_r());
        (w, pf)
    }

    /// Momentum residual `((u,·)) [+ b(u,u,·)] − Bᵀp` as a functional, with `B = area·div`.
    pub fn residual(
        &self,
        u: &OneFormField,
        p: &ScalarField,
        kind: ResidualKind,
    ) -> WeakFunctional {
        let mut r = self.dc.energy_dual(energy_alpha(&self.grid), &u.data);
        if let ResidualKind::NavierStokes = kind {
            for (x, y) in r
                .iter_mut()
                .zip(self.dc.convect_dual(&u.data, &u.data, true))
            {
                *x += y;
            }
        }
        let mut ap = p.values.clone();
        self.dc.scale_rows(&self.grid.cell_area, &mut ap);
        for (x, y) in r.iter_mut().zip(self.dc.div.apply_transpose(&ap)) {
            *x -= y;
        }
        WeakFunctional::from_dual(&self.grid, FunctionalLabel::Residual, r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidualKind {
    Stokes,
    NavierStokes,
}

/// Subtract the hyperbolic-volume mean over cell rows `0..rows`.
pub fn normalize_mean(p: &mut ScalarField, rows: usize) {
    let m = volume_mean(p, rows);
    for v in &mut p.values {
        *v -= m;
    }
}

fn volume_mean(p: &ScalarField, rows: usize) -> f64 {
    let g = &p.grid;
    let n = g.n_th();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..rows {
        let w = g.cell_area(i) * g.vw_center(i);
        num += w * p.values[i * n..(i + 1) * n].iter().sum::<f64>();
        den += w * n as f64;
    }
    num / den
}

fn volume_l2(p: &ScalarField, rows: usize) -> f64 {
    let g = &p.grid;
    let n = g.n_th();
    (0..rows)
        .map(|i| {
            g.cell_area(i)
                * g.vw_center(i)
                * p.values[i * n..(i + 1) * n]
                    .iter()
                    .map(|v| v * v)
                    .sum::<f64>()
        })
        .sum::<f64>()
        .sqrt()
}

/// `T(φ) = −((η dF + w, φ))`, the weak form of `Δ(ηdF + w) − 2a²(ηdF + w)`.
pub fn stokes_rhs(cut: &Cutoff, df: &OneFormField, w: &OneFormField) -> Result<WeakFunctional> {
    if !df.grid.same_as(&w.grid) || !df.grid.same_as(&cut.eta.grid) {
        return Err(invalid("ingredients live on different grids"));
    }
    let v = cut.times(df).axpy(1.0, w);
    let dc = DiscreteCalculus::new(&df.grid);
    let d = dc.energy_dual(energy_alpha(&df.grid), &v.data);
    Ok(WeakFunctional::from_dual(
        &df.grid,
        FunctionalLabel::T,
        d.into_iter().map(|x| -x).collect(),
    ))
}

/// Solve for `w̃` and the multiplier `P` (zero volume mean).
pub fn solve_stokes(
    grid: &Arc<AnnulusGrid>,
    t: &WeakFunctional,
) -> Result<(OneFormField, ScalarField, StokesSolveReport)> {
    let solver = StokesSolver::new(grid)?;
    let (w, p) = solver.solve(t);
    let report = stokes_report(&solver, t, &w, &p);
    Ok((w, p, report))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StokesSolveReport {
    /// `‖((w̃,·)) − T − Bᵀ P‖_*`.
    pub weak_residual: f64,
    pub t_dual: f64,
    /// `‖d*w̃‖_{L²} / ((w̃,w̃))^{1/2}`.
    pub div_residual: f64,
    pub w_tilde_energy: f64,
}

fn stokes_report(
    solver: &StokesSolver,
    t: &WeakFunctional,
    w: &OneFormField,
    p: &ScalarField,
) -> StokesSolveReport {
    let mut r = solver.residual(w, p, ResidualKind::Stokes);
    for (x, y) in r.data.iter_mut().zip(&t.data) {
        *x -= y;
    }
    let energy = h10_inner(w, w).unwrap_or(0.0).max(0.0).sqrt();
    let div = crate::calculus::codifferential_norm_sq(w).sqrt();
    StokesSolveReport {
        weak_residual: solver.dual_norm(&r),
        t_dual: solver.dual_norm(t),
        div_residual: if energy > 0.0 { div / energy } else { div },
        w_tilde_energy: energy,
    }
}

/// `u = (η−1)dF + w + w̃`.
pub fn assemble_solution(
    cut: &Cutoff,
    df: &OneFormField,
    w: &OneFormField,
    w_tilde: &OneFormField,
) -> Result<OneFormField> {
    if !df.grid.same_as(&w.grid)
        || !df.grid.same_as(&w_tilde.grid)
        || !df.grid.same_as(&cut.eta.grid)
    {
        return Err(invalid("ingredients live on different grids"));
    }
    let mut u = cut.times_minus_one(df).axpy(1.0, w).axpy(1.0, w_tilde);
    u.class = BoundaryClass::ZeroOnInner;
    Ok(u)
}

/// `‖((u,·)) [+ b(u,u,·)] − Bᵀp‖_*` on the grid's test fields.
pub fn weak_residual(u: &OneFormField, p: &ScalarField, kind: ResidualKind) -> Result<f64> {
    if !u.grid.same_as(&p.grid) {
        return Err(invalid("velocity and pressure live on different grids"));
    }
    let solver = StokesSolver::new(&u.grid)?;
    Ok(solver.dual_norm(&solver.residual(u, p, kind)))
}

/// The ingredients shared by the linear and nonlinear problems.
#[derive(Debug, Clone)]
pub struct Ingredients {
    pub harmonic: HarmonicPair,
    pub cutoff: Cutoff,
    pub h: ScalarField,
    pub div: DivergenceSolution,
}

impl Ingredients {
    pub fn build(
        grid: &Arc<AnnulusGrid>,
        harmonic: HarmonicSpec,
        cut: CutoffSpec,
        opts: &DivSolveOptions,
    ) -> Result<Self> {
        let cutoff = cutoff(cut, grid)?;
        let harmonic = harmonic_pair(harmonic, grid);
        let h = divergence_rhs(&cutoff, &harmonic)?;
        let (lo, hi) = cutoff.ring_nodes(grid)?;
        let div = RingDivergenceSolver::new(grid, lo, hi)?.solve(&h, opts, None)?;
        Ok(Self {
            harmonic,
            cutoff,
            h,
            div,
        })
    }

    /// `Ψ = (η−1)dF + w`.
    pub fn psi(&self) -> OneFormField {
        self.cutoff
            .times_minus_one(&self.harmonic.df)
            .axpy(1.0, &self.div.w)
    }
}

#[derive(Debug, Clone)]
pub struct StokesSolution {
    pub ingredients: Ingredients,
    pub u: OneFormField,
    pub w_tilde: OneFormField,
    /// Multiplier of the `w̃` problem.
    pub pressure_multiplier: ScalarField,
    /// `p = P + 2a²F`, the pressure of `u`.
    pub pressure: ScalarField,
    pub t: WeakFunctional,
    pub report: StokesSolveReport,
    /// Weak residual of `(u, p)` and of `(u, P)`.
    pub residual_with_p: f64,
    pub residual_with_multiplier: f64,
}

/// The full linear pipeline on one grid.
pub fn solve_stokes_problem(
    grid: &Arc<AnnulusGrid>,
    harmonic: HarmonicSpec,
    cut: CutoffSpec,
    opts: &DivSolveOptions,
) -> Result<StokesSolution> {
    let ing = Ingredients::build(grid, harmonic, cut, opts)?;
    let solver = StokesSolver::new(grid)?;
    let t = stokes_rhs(&ing.cutoff, &ing.harmonic.df, &ing.div.w)?;
    let (w_tilde, mult) = solver.solve(&t);
    let report = stokes_report(&solver, &t, &w_tilde, &mult);
    let u = assemble_solution(&ing.cutoff, &ing.harmonic.df, &ing.div.w, &w_tilde)?;
    let alpha = energy_alpha(grid);
    let mut pressure = mult.clone();
    for (p, f) in pressure.values.iter_mut().zip(&ing.harmonic.f.values) {
        *p += alpha * f;
    }
    normalize_mean(&mut pressure, grid.n_r());
    let residual_with_p = solver.dual_norm(&solver.residual(&u, &pressure, ResidualKind::Stokes));
    let residual_with_multiplier =
        solver.dual_norm(&solver.residual(&u, &mult, ResidualKind::Stokes));
    Ok(StokesSolution {
        ingredients: ing,
        u,
        w_tilde,
        pressure_multiplier: mult,
        pressure,
        t,
        report,
        residual_with_p,
        residual_with_multiplier,
    })
}

/// Pressure of `u` on the sub-annulus of the first `rows` cell rows, from the momentum
/// residual restricted to that sub-annulus's test fields (least squares in the face-mass norm).
pub fn recover_pressure(u: &OneFormField, rows: usize, kind: ResidualKind) -> Result<ScalarField> {
    let grid = &u.grid;
    if rows < 2 || rows > grid.n_r() {
        return Err(invalid(format!(
            "sub-annulus must have between 2 and {} cell rows",
            grid.n_r()
        )));
    }
    let sub = grid.sub_annulus(0, rows)?;
    let dc = DiscreteCalculus::new(grid);
    let mut r = dc.energy_dual(energy_alpha(grid), &u.data);
    if let ResidualKind::NavierStokes = kind {
        for (x, y) in r.iter_mut().zip(dc.convect_dual(&u.data, &u.data, true)) {
            *x += y;
        }
    }
    let n = grid.n_th();
    let big = grid.n_r();
    // Copy the sub-annulus test rows into the sub grid's face layout.
    let mut rs = vec![0.0; (2 * rows + 3) * n];
    for i in 1..rows {
        rs[i * n..(i + 1) * n].copy_from_slice(&r[i * n..(i + 1) * n]);
    }
    for m in 1..=rows {
        let src = (big + 1 + m) * n;
        let dst = (rows + 1 + m) * n;
        rs[dst..dst + n].copy_from_slice(&r[src..src + n]);
    }
    // Bᵀp ≈ r  ⇒  B M⁻¹ Bᵀ p = B M⁻¹ r
    let sdc = DiscreteCalculus::new(&sub);
    let masses = sdc.face_masses();
    let inv_m: Vec<f64> = masses
        .iter()
        .map(|m| if *m > 0.0 { 1.0 / m } else { 0.0 })
        .collect();
    let mut rm = rs.clone();
    restrict_interior(rows, n, &mut rm);
    sdc.scale_rows(&inv_m, &mut rm);
    let mut rhs = sdc.div.apply(&rm);
    sdc.scale_rows(&sub.cell_area, &mut rhs);
    let entries: Vec<(usize, usize, f64)> = (0..rows).map(|c| (0, c, c as f64)).collect();
    let dofs = DofMap::new(vec![rows], entries);
    let dofs0 = dofs.without(0, 0);
    let interior = crate::systems::interior_face_rows(rows);
    let factors = ModeFactors::build(n, dofs, dofs0, |k, asm| {
        let rows_sym: Vec<Vec<(usize, rustfft::num_complex::Complex64)>> =
            (0..rows).map(|c| sdc.div.symbol_row(c, k)).collect();
        for c1 in 0..rows {
            for c2 in c1.saturating_sub(1)..(c1 + 2).min(rows) {
                let mut v = rustfft::num_complex::Complex64::new(0.0, 0.0);
                for &(f1, s1) in &rows_sym[c1] {
                    if !interior.contains(&f1) {
                        continue;
                    }
                    for &(f2, s2) in &rows_sym[c2] {
                        if f1 == f2 {
                            v += s1 * s2.conj() * inv_m[f1];
                        }
                    }
                }
                asm.add(0, c1, 0, c2, v * sub.cell_area[c1] * sub.cell_area[c2]);
            }
        }
    })?;
    let p = factors.solve(&[&rhs]).swap_remove(0);
    let mut pf = ScalarField {
        grid: sub,
        location: Location::Centers,
        values: p,
    };
    normalize_mean(&mut pf, rows);
    Ok(pf)
}

#[derive(Debug, Clone)]
pub struct GluedPressure {
    /// On the grid of the largest local.
    pub pressure: ScalarField,
    /// Constants added to each local.
    pub constants: Vec<f64>,
    /// `‖P_m + C_m − P₁‖_{L²(Ω(R₀,R₁))}` per local.
    pub overlap_gaps: Vec<f64>,
}

/// Fix additive constants so every local pressure matches the innermost one on its annulus,
/// then patch the locals together. Locals must live on nested prefix sub-annuli.
pub fn glue_pressure(locals: &[ScalarField], tol: f64) -> Result<GluedPressure> {
    let mut order: Vec<usize> = (0..locals.len()).collect();
    if order.is_empty() {
        return Err(invalid("no local pressures to glue"));
    }
    order.sort_by_key(|&k| locals[k].grid.n_r());
    let first = &locals[order[0]];
    let rows1 = first.grid.n_r();
    let largest = &locals[*order.last().unwrap()];
    let n = first.grid.n_th();
    for p in locals {
        let g = &p.grid;
        if g.n_th() != n
            || g.node_geodesic()[..=g.n_r()] != largest.grid.node_geodesic()[..=g.n_r()]
        {
            return Err(Error::Gluing(
                "local pressures must live on nested sub-annuli of one grid".into(),
            ));
        }
    }
    let mut p1 = first.clone();
    normalize_mean(&mut p1, rows1);
    let mut constants = vec![0.0; locals.len()];
    let mut gaps = vec![0.0; locals.len()];
    let mut shifted: Vec<ScalarField> = Vec::with_capacity(locals.len());
    for (k, p) in locals.iter().enumerate() {
        let diff = ScalarField {
            grid: first.grid.clone(),
            location: Location::Centers,
            values: p1
                .values
                .iter()
                .zip(&p.values[..rows1 * n])
                .map(|(a, b)| a - b)
                .collect(),
        };
        let c = volume_mean(&diff, rows1);
        constants[k] = c;
        let d2 = ScalarField {
            values: diff.values.iter().map(|v| v - c).collect(),
            ..diff
        };
        gaps[k] = volume_l2(&d2, rows1);
        shifted.push(ScalarField {
            values: p.values.iter().map(|v| v + c).collect(),
            ..p.clone()
        });
    }
    if let Some((k, g)) = gaps.iter().enumerate().find(|(_, g)| **g > tol) {
        return Err(Error::Gluing(format!(
            "local {k} disagrees with the innermost pressure by {g:.3e} on the overlap"
        )));
    }
    let mut out = ScalarField::zeros(&largest.grid, Location::Centers);
    let mut start = 0;
    for &k in &order {
        let rows = shifted[k].grid.n_r();
        if rows > start {
            out.values[start * n..rows * n]
                .copy_from_slice(&shifted[k].values[start * n..rows * n]);
            start = rows;
        }
    }
    Ok(GluedPressure {
        pressure: out,
        constants,
        overlap_gaps: gaps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::h10_inner;
    use crate::hypgeom::DomainSpec;

    fn std_grid(n_r: usize, n_th: usize) -> Arc<AnnulusGrid> {
        AnnulusGrid::build(DomainSpec::new(1.0, 1.0).unwrap(), 1.0, 12.0, n_r, n_th).unwrap()
    }

    fn run(n_r: usize, n_th: usize) -> StokesSolution {
        let g = std_grid(n_r, n_th);
        solve_stokes_problem(
            &g,
            HarmonicSpec::new(1, 1.0, 0.0).unwrap(),
            CutoffSpec::new(g.spec()),
            &DivSolveOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn zero_forcing_gives_zero() {
        let g = std_grid(64, 32);
        let t = WeakFunctional::zeros(&g, FunctionalLabel::T);
        let (w, p, rep) = solve_stokes(&g, &t).unwrap();
        assert_eq!(w.max_abs(), 0.0);
        assert!(p.max_abs() < 1e-300);
        assert_eq!(rep.weak_residual, 0.0);
    }

    #[test]
    fn standard_run_residuals() {
        let s = run(96, 64);
        assert!(
            s.report.weak_residual <= 1e-8 * s.report.t_dual,
            "{:?}",
            s.report
        );
        assert!(s.report.div_residual <= 1e-8);
        assert!(s.u.inner_trace_max() <= 1e-13);
        assert!(s.report.w_tilde_energy > 0.0);
        assert!(
            s.residual_with_p <= 1e-8 * s.report.t_dual,
            "{}",
            s.residual_with_p
        );
    }

    #[test]
    fn solution_satisfies_weak_form_on_div_free_probes() {
        let s = run(64, 32);
        let g = s.u.grid.clone();
        let dc = DiscreteCalculus::new(&g);
        for k in 0..20 {
            let psi = ScalarField::from_fn(&g, Location::Nodes, |r, t| {
                let (r0, r1) = (g.r_in(), g.r_out());
                let x = (r - r0) / (r1 - r0);
                let v = (std::f64::consts::PI * x * (1 + k % 3) as f64).sin()
                    * ((k % 5) as f64 * t + k as f64).cos();
                if x <= 0.0 || x >= 1.0 {
                    0.0
                } else {
                    v
                }
            });
            let mut psi = psi;
            let n = g.n_th();
            let nr = g.n_r();
            psi.values[..n].fill(0.0);
            psi.values[nr * n..].fill(0.0);
            let phi = dc.rot(&psi).unwrap();
            let lhs = h10_inner(&s.w_tilde, &phi).unwrap();
            let rhs = s.t.apply(&phi).unwrap();
            let scale = s.report.w_tilde_energy * h10_inner(&phi, &phi).unwrap().sqrt();
            assert!(
                (lhs - rhs).abs() <= 1e-8 * scale.max(1e-300),
                "{k}: {lhs} {rhs}"
            );
        }
    }

    #[test]
    fn gluing_removes_constant_shift() {
        let g = std_grid(64, 16);
        let small = g.sub_annulus(0, 20).unwrap();
        let p1 = ScalarField::from_fn(&small, Location::Centers, |r, t| r * t.cos());
        let p2 = ScalarField::from_fn(&g, Location::Centers, |r, t| r * t.cos() + 3.7);
        let glued = glue_pressure(&[p2, p1], 1e-8).unwrap();
        assert!(glued.overlap_gaps.iter().all(|x| *x < 1e-10));
        assert!((glued.constants[0] - glued.constants[1] + 3.7).abs() < 1e-10);
    }

    #[test]
    fn single_local_gluing_removes_mean() {
        let g = std_grid(64, 16);
        let p = ScalarField::from_fn(&g, Location::Centers, |r, _| r + 1.0);
        let glued = glue_pressure(&[p], 1e-8).unwrap();
        assert!(volume_mean(&glued.pressure, g.n_r()).abs() < 1e-10);
    }

    #[test]
    fn recovered_pressure_matches_solved_pressure() {
        let s = run(64, 32);
        let rows = 30;
        let pr = recover_pressure(&s.u, rows, ResidualKind::Stokes).unwrap();
        let n = s.u.grid.n_th();
        let mut p = s.pressure.clone();
        p.values.truncate(rows * n);
        let mut pf = ScalarField {
            grid: pr.grid.clone(),
            location: Location::Centers,
            values: p.values,
        };
        normalize_mean(&mut pf, rows);
        let err = pf
            .values
            .iter()
            .zip(&pr.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-8 * pf.max_abs().max(1.0), "{err}");
    }
}
