use hyperstokes::divsolve::DivSolveOptions;
use hyperstokes::fields::{CutoffSpec, HarmonicSpec};
use hyperstokes::mesh::AnnulusGrid;
use hyperstokes::navierstokes::{
    assemble_psi_phi, check_energy_identity, estimate_constants, solve_ns_annulus, Smallness,
    SolverOptions,
};
use hyperstokes::stokes::{solve_stokes_problem, StokesSolver};
use hyperstokes::verify::{nontriviality, potential_flow_test};
use hyperstokes::DomainSpec;

#[test]
fn stokes_then_navier_stokes_on_coarse_grid() {
    let spec = DomainSpec::new(1.0, 1.0).unwrap();
    let grid = AnnulusGrid::build(spec, 1.0, 12.0, 96, 64).unwrap();
    let cut = CutoffSpec::new(spec);
    let s = solve_stokes_problem(
        &grid,
        HarmonicSpec::new(1, 1.0, 0.0).unwrap(),
        cut,
        &DivSolveOptions::default(),
    )
    .unwrap();
    assert!(s.report.weak_residual <= 1e-8 * s.report.t_dual);
    assert!(s.u.inner_trace_max() <= 1e-13);
    let nt = nontriviality(&s.ingredients.div.w, &s.ingredients.harmonic, cut, &s.u).unwrap();
    assert!(nt.pairing < 0.0 && nt.relative_gap < 1e-2, "{nt:?}");
    assert!(potential_flow_test(&s.u).unwrap().relative_vorticity > 1e-3);

    let k = estimate_constants(&grid, HarmonicSpec::new(1, 1.0, 0.0).unwrap(), 8, 3).unwrap();
    let small = HarmonicSpec::new(
        1,
        0.05 * k.df_threshold / HarmonicSpec::new(1, 1.0, 0.0).unwrap().total_norm(),
        0.0,
    )
    .unwrap();
    let s = solve_stokes_problem(&grid, small, cut, &DivSolveOptions::default()).unwrap();
    let (psi, phi) = assemble_psi_phi(
        &s.ingredients.cutoff,
        &s.ingredients.harmonic.df,
        &s.ingredients.div.w,
    )
    .unwrap();
    let solver = StokesSolver::new(&grid).unwrap();
    let gate = Smallness {
        df_norm: small.total_norm(),
        threshold: k.df_threshold,
    };
    let ns = solve_ns_annulus(&solver, &psi, &phi, &SolverOptions::default(), gate, None).unwrap();
    assert!(ns.trace.stages.iter().all(|st| st.converged));
    let e = check_energy_identity(&ns.w, &psi, &phi).unwrap();
    assert!(e.relative <= 1e-8, "{e:?}");
}
