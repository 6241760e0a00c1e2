//! Acceptance criteria 1–12. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Standard configuration: a = 1, R0 = 1, n = 1, c = 1,
//! R_max = 12.

use std::process::{Command, ExitCode};
use std::time::Instant;

use serde_json::Value;

use hyperstokes::calculus::l2_inner;
use hyperstokes::divsolve::RingDivergenceSolver;
use hyperstokes::fields::{
    compatibility, cutoff, divergence_rhs, harmonic_analytic, harmonic_pair, l1_norm, HarmonicSpec,
};
use hyperstokes::hypgeom::{disk_to_geodesic, geodesic_to_disk};
use hyperstokes::mesh::AnnulusGrid;
use hyperstokes::stokes::{solve_stokes_problem, Ingredients};
use hyperstokes::verify::{inequality_suite, nontriviality, potential_flow_test};
use hyperstokes::{DomainSpec, Result};
use hyperstokes_cli::{
    observed_order, potential_control_vorticity, run, Mode, RunConfig, SweepParam,
};

type Criterion = fn() -> Result<Verdict>;

struct Verdict {
    ok: bool,
    detail: String,
}

fn verdict(ok: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { ok, detail })
}

fn standard(n: usize) -> RunConfig {
    RunConfig {
        n_r: n,
        n_th: n,
        reproducible: true,
        ..RunConfig::default()
    }
}

fn round_trip() -> Result<Verdict> {
    let mut worst: f64 = 0.0;
    for a in [0.5, 1.0, 2.0] {
        for k in 0..=4000 {
            let big_r = 1e-3 * (20.0f64 / 1e-3).powf(k as f64 / 4000.0);
            let back = disk_to_geodesic(a, geodesic_to_disk(a, big_r)?)?;
            worst = worst.max((back - big_r).abs() / big_r.max(1.0));
        }
    }
    verdict(
        worst <= 1e-12,
        format!("max |R' - R|/max(1,R) = {worst:.2e} (tol 1e-12)"),
    )
}

fn conformal_l2() -> Result<Verdict> {
    let spec = DomainSpec::new(1.0, 1.0)?;
    let grid = AnnulusGrid::build(spec, 1.0, 12.0, 4096, 16)?;
    let mut worst: f64 = 0.0;
    for n in 1..=4 {
        let h = HarmonicSpec::new(n, 1.0, 0.0)?;
        // Annulus by quadrature, obstacle disk in closed form.
        let total = l2_inner(&harmonic_analytic(h, &grid), &harmonic_analytic(h, &grid))?
            + h.energy_in_disk(grid.r_in());
        let exact = h.energy_in_disk(grid.r_out());
        worst = worst.max((total - exact).abs() / exact);
    }
    verdict(
        worst <= 1e-6,
        format!("max relative error n=1..4 = {worst:.2e} (tol 1e-6)"),
    )
}

fn compatibility_check() -> Result<Verdict> {
    let mut worst: f64 = 0.0;
    for (a, r0) in [(1.0, 1.0), (0.5, 2.0)] {
        for n in 1..=3 {
            let cfg = RunConfig {
                a,
                r0,
                n,
                ..standard(256)
            };
            let grid = cfg.grid()?;
            let h = divergence_rhs(
                &cutoff(cfg.cutoff()?, &grid)?,
                &harmonic_pair(cfg.harmonic()?, &grid),
            )?;
            worst = worst.max(compatibility(&h).abs() / l1_norm(&h));
        }
    }
    verdict(
        worst <= 1e-10,
        format!("max |∫h|/‖h‖_L1 = {worst:.2e} (tol 1e-10)"),
    )
}

fn divergence_solve() -> Result<Verdict> {
    let cfg = standard(256);
    let grid = cfg.grid()?;
    let ing = Ingredients::build(&grid, cfg.harmonic()?, cfg.cutoff()?, &cfg.div_options())?;
    let rep = &ing.div.report;
    let resid_ok = rep.codifferential_residual <= 1e-8 * rep.codifferential_rhs;

    let (r_lo, r_hi) = (
        geodesic_to_disk(cfg.a, 2.0 * cfg.r0)?.r(),
        geodesic_to_disk(cfg.a, 4.0 * cfg.r0)?.r(),
    );
    let outside = |r: f64| r <= r_lo * (1.0 + 1e-12) || r >= r_hi * (1.0 - 1e-12);
    let n = grid.n_th();
    let w = &ing.div.w;
    let radial_leak = grid
        .node_radii()
        .iter()
        .enumerate()
        .filter(|(_, r)| outside(**r))
        .flat_map(|(i, _)| &w.radial()[i * n..(i + 1) * n])
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let angular_leak = grid
        .angular_row_radii()
        .iter()
        .enumerate()
        .filter(|(_, r)| outside(**r))
        .flat_map(|(i, _)| &w.angular()[i * n..(i + 1) * n])
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let support_ok = radial_leak == 0.0 && angular_leak == 0.0;

    let (lo, hi) = ing.cutoff.ring_nodes(&grid)?;
    let solver = RingDivergenceSolver::new(&grid, lo, hi)?;
    let cells = (hi - lo) * n;
    let w_max = w.max_abs();
    let mut spread: f64 = 0.0;
    for s in 1..=3 {
        let start: Vec<f64> = (0..cells)
            .map(|k| (s as f64) * ((k as f64) * 0.37 * s as f64).sin())
            .collect();
        let other = solver.solve(&ing.h, &cfg.div_options(), Some(&start))?;
        spread = spread.max(other.w.axpy(-1.0, w).max_abs() / w_max);
    }
    verdict(
        resid_ok && support_ok && spread <= 1e-10,
        format!(
            "residual {:.2e} <= 1e-8·{:.2e}: {resid_ok}; outside-ring max |w| = {:.1e}; restart spread {spread:.2e} (tol 1e-10)",
            rep.codifferential_residual,
            rep.codifferential_rhs,
            radial_leak.max(angular_leak)
        ),
    )
}

fn stokes_solve() -> Result<Verdict> {
    let cfg = standard(256);
    let s = solve_stokes_problem(
        &cfg.grid()?,
        cfg.harmonic()?,
        cfg.cutoff()?,
        &cfg.div_options(),
    )?;
    let r = &s.report;
    let trace = s.u.inner_trace_max();
    let ok = r.weak_residual <= 1e-8 * r.t_dual
        && s.residual_with_p <= 1e-8 * r.t_dual
        && r.div_residual <= 1e-8
        && trace <= 1e-13;
    verdict(
        ok,
        format!(
            "weak residual {:.2e} (with P {:.2e}) vs 1e-8·‖T‖ = {:.2e}; d*w̃ {:.2e}; inner trace {trace:.1e}",
            r.weak_residual,
            s.residual_with_p,
            1e-8 * r.t_dual,
            r.div_residual
        ),
    )
}

fn nontriviality_check() -> Result<Verdict> {
    let mut gaps = Vec::new();
    let mut first = None;
    for n in [256, 512] {
        let cfg = standard(n);
        let s = solve_stokes_problem(
            &cfg.grid()?,
            cfg.harmonic()?,
            cfg.cutoff()?,
            &cfg.div_options(),
        )?;
        let nt = nontriviality(
            &s.ingredients.div.w,
            &s.ingredients.harmonic,
            cfg.cutoff()?,
            &s.u,
        )?;
        gaps.push(nt.gap);
        first.get_or_insert(nt);
    }
    let nt = first.expect("two grids ran");
    let order = observed_order(gaps[0], gaps[1], 256.0, 512.0);
    let bracket = (1.822..=2.919).contains(&nt.eta_energy);
    let ok =
        nt.pairing < 0.0 && nt.relative_gap <= 5e-3 && gaps[1] < gaps[0] && order >= 1.0 && bracket;
    verdict(
        ok,
        format!(
            "pairing {:.6} eta_energy {:.6} in [1.822, 2.919]: {bracket}; relative gap {:.2e} (tol 5e-3); order {order:.2}",
            nt.pairing, nt.eta_energy, nt.relative_gap
        ),
    )
}

fn non_potential() -> Result<Verdict> {
    let mut rel = Vec::new();
    let mut ctl = Vec::new();
    for n in [256, 512] {
        let cfg = standard(n);
        let s = solve_stokes_problem(
            &cfg.grid()?,
            cfg.harmonic()?,
            cfg.cutoff()?,
            &cfg.div_options(),
        )?;
        rel.push(potential_flow_test(&s.u)?.relative_vorticity);
        ctl.push(potential_control_vorticity(&cfg)?);
    }
    let order = observed_order(ctl[0], ctl[1], 256.0, 512.0);
    let ok = rel.iter().all(|r| *r >= 1e-3) && order >= 2.0;
    verdict(ok, format!("‖du‖/‖u‖ = {:.4} (256²), {:.4} (512²); control ‖d dF‖ {:.2e} -> {:.2e}, order {order:.7} (tol >= 2)", rel[0], rel[1], ctl[0], ctl[1]))
}

fn inequalities() -> Result<Verdict> {
    let cfg = standard(256);
    let iq = inequality_suite(&cfg.grid()?, cfg.seed, 100);
    let harm = iq.harmonic_ratios.iter().all(|(_, r)| r.is_finite());
    let ok = iq.count == 100 && iq.poincare_passed == 100 && iq.ladyzhenskaya_finite && harm;
    verdict(
        ok,
        format!(
            "Poincaré {}/{} (max ratio {:.4}); Ladyzhenskaya max {:.3e}; harmonic ratios finite: {harm}",
            iq.poincare_passed,
            iq.count,
            iq.poincare.iter().cloned().fold(0.0, f64::max),
            iq.ladyzhenskaya_max
        ),
    )
}

fn report_of(
    mode: Mode,
    cfg: &RunConfig,
    sweep: Option<(SweepParam, &[f64])>,
) -> Result<(bool, Value)> {
    let o = run(mode, cfg, sweep)?;
    Ok((o.passed, o.report))
}

fn check_value(rep: &Value, name: &str) -> Vec<f64> {
    rep["checks"]
        .as_array()
        .into_iter()
        .flatten()
        .filter(|c| c["name"] == name)
        .filter_map(|c| c["value"].as_f64())
        .collect()
}

fn ns_small_data() -> Result<Verdict> {
    let dir = tempfile::tempdir().expect("tempdir");
    let cfg = RunConfig {
        df_fraction: Some(0.05),
        out: dir.path().to_path_buf(),
        ..standard(256)
    };
    let (passed, rep) = report_of(Mode::NavierStokes, &cfg, None)?;
    let stages = rep["picard"].as_array().cloned().unwrap_or_default();
    let converged = !stages.is_empty() && stages.iter().all(|s| s["converged"] == true);
    let iters: usize = stages
        .iter()
        .map(|s| s["increments"].as_array().map_or(0, Vec::len))
        .sum();
    verdict(
        passed && converged && iters <= 50,
        format!(
            "Picard {iters} iterations, converged {converged}; energy identity {:.1e}; cancellations {:?} {:?}; a priori {}",
            rep["scalars"]["energy_identity_relative"]["value"].as_f64().unwrap_or(f64::NAN),
            check_value(&rep, "cancellation_psi_w_w"),
            check_value(&rep, "cancellation_w_w_w"),
            rep["scalars"]["apriori_lhs"]["value"].as_f64().unwrap_or(f64::NAN) <= rep["scalars"]["apriori_rhs"]["value"].as_f64().unwrap_or(f64::NAN),
        ),
    )
}

fn exhaustion() -> Result<Verdict> {
    let dir = tempfile::tempdir().expect("tempdir");
    let cfg = RunConfig {
        df_fraction: Some(0.05),
        schedule: vec![6.0, 8.0, 10.0],
        out: dir.path().to_path_buf(),
        ..standard(256)
    };
    let (passed, rep) = report_of(Mode::NavierStokes, &cfg, None)?;
    let ex = &rep["exhaustion"];
    let cauchy: Vec<f64> = ex["cauchy_differences"]["value"]
        .as_array()
        .into_iter()
        .flatten()
        .filter_map(Value::as_f64)
        .collect();
    let gap = ex["glue_overlap_gaps"]["value"]
        .as_array()
        .into_iter()
        .flatten()
        .filter_map(Value::as_f64)
        .fold(0.0, f64::max);
    let decreasing = cauchy.len() == 2 && cauchy[1] < cauchy[0];
    verdict(
        passed && decreasing && gap <= 1e-8,
        format!(
            "δ = {:.3e}, {:.3e}; max glue gap {gap:.1e} (tol 1e-8)",
            cauchy.first().copied().unwrap_or(f64::NAN),
            cauchy.last().copied().unwrap_or(f64::NAN)
        ),
    )
}

fn truncation() -> Result<Verdict> {
    let dir = tempfile::tempdir().expect("tempdir");
    let cfg = RunConfig {
        out: dir.path().to_path_buf(),
        ..standard(256)
    };
    let (passed, rep) = report_of(Mode::Sweep, &cfg, Some((SweepParam::RMax, &[12.0, 16.0])))?;
    let s = &rep["scalars"];
    let get = |k: &str| s[k]["value"].as_f64().unwrap_or(f64::NAN);
    let worst = get("pairing_change")
        .max(get("u_h1_change"))
        .max(get("vorticity_change"));
    verdict(
        passed && worst <= 0.01,
        format!(
            "relative change pairing {:.2e}, ‖u‖_H1 {:.2e}, ‖du‖ {:.2e} (tol 1e-2)",
            get("pairing_change"),
            get("u_h1_change"),
            get("vorticity_change")
        ),
    )
}

fn determinism() -> Result<Verdict> {
    let dirs = [
        tempfile::tempdir().expect("tempdir"),
        tempfile::tempdir().expect("tempdir"),
    ];
    let mut bytes = Vec::new();
    for d in &dirs {
        let status = Command::new(env!("CARGO_BIN_EXE_hyperstokes"))
            .args(["verify", "--reproducible", "--seed", "7", "--out"])
            .arg(d.path())
            .status()
            .expect("binary runs");
        bytes.push((
            status.code(),
            std::fs::read(d.path().join("report.json")).unwrap_or_default(),
        ));
    }
    let same = !bytes[0].1.is_empty() && bytes[0].1 == bytes[1].1;
    verdict(
        same,
        format!(
            "exit codes {:?} {:?}; report.json identical: {same} ({} bytes)",
            bytes[0].0,
            bytes[1].0,
            bytes[0].1.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 12] = [
        ("geometry round trip", round_trip),
        ("conformal L2 identity", conformal_l2),
        ("flux compatibility", compatibility_check),
        ("divergence solve", divergence_solve),
        ("Stokes solve", stokes_solve),
        ("nontriviality identity", nontriviality_check),
        ("non-potential flow", non_potential),
        ("inequality suite", inequalities),
        ("Navier-Stokes small data", ns_small_data),
        ("domain exhaustion", exhaustion),
        ("truncation sensitivity", truncation),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let v = f().unwrap_or_else(|e| Verdict {
            ok: false,
            detail: format!("error: {e}"),
        });
        failed += usize::from(!v.ok);
        println!(
            "{} criterion {:>2} {name}: {} [{:.1}s]",
            if v.ok { "PASS" } else { "FAIL" },
            k + 1,
            v.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of 12 criteria passed", 12 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
