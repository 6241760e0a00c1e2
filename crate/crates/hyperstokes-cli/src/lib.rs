//! Orchestration behind the `hyperstokes` binary: run a mode from a
//! [`RunConfig`], write `report.json` and field CSVs, and map the outcome to an
//! exit code (0 all checks passed, 1 a numerical check failed, 2 configuration
//! or solver error).

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod config;
pub mod report;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use serde_json::{json, Value};

use hyperstokes::calculus::{covariant_derivative, vorticity_norm_sq};
use hyperstokes::fields::{harmonic_pair, HarmonicSpec};
use hyperstokes::hypgeom::geodesic_to_disk;
use hyperstokes::mesh::{write_one_form_csv, write_scalar_csv, write_tensor_csv};
use hyperstokes::navierstokes::{
    assemble_psi_phi, check_apriori_bound, check_energy_identity, estimate_constants,
    exhaust_domains, solve_ns_annulus, ConstantsReport, ExhaustionReport, PicardTrace, Smallness,
};
use hyperstokes::stokes::{solve_stokes_problem, Ingredients, StokesSolution, StokesSolver};
use hyperstokes::verify::{
    inequality_suite, nontriviality, nonzero_solution, potential_flow_test, NontrivialityReport,
};
use hyperstokes::{Error, OneFormField, Result, ScalarField};

pub use config::RunConfig;
use report::{Check, Report};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Stokes,
    NavierStokes,
    Verify,
    Sweep,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Stokes => "stokes",
            Mode::NavierStokes => "ns",
            Mode::Verify => "verify",
            Mode::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Grid,
    RMax,
    C,
    N,
}

impl std::str::FromStr for SweepParam {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid" => Ok(Self::Grid),
            "R_max" | "r_max" => Ok(Self::RMax),
            "c" => Ok(Self::C),
            "n" => Ok(Self::N),
            _ => Err(Error::InvalidInput(format!(
                "sweep parameter must be one of grid, R_max, c, n; got `{s}`"
            ))),
        }
    }
}

/// Result of one mode: the report and whether every check passed.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Value,
    pub passed: bool,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }
}

/// Exit code for a finished or failed run.
pub fn exit_code(r: &Result<Outcome>) -> i32 {
    match r {
        Ok(o) => o.exit_code(),
        Err(_) => 2,
    }
}

fn config_json(cfg: &RunConfig) -> Value {
    json!({
        "a": cfg.a,
        "R0": cfg.r0,
        "n": cfg.n,
        "c": cfg.c,
        "phase": cfg.phase,
        "N_r": cfg.n_r,
        "N_th": cfg.n_th,
        "R_max": cfg.r_max,
        "schedule": cfg.schedule,
        "cells_per_unit": cfg.cells_per_unit,
        "lambda_schedule": cfg.lambda_schedule,
        "picard_tol": cfg.picard_tol,
        "picard_max_iters": cfg.picard_max_iters,
        "damping": cfg.damping,
        "div_tol": cfg.div_tol,
        "constant_samples": cfg.constant_samples,
        "probes": cfg.probes,
        "seed": cfg.seed,
        "df_fraction": cfg.df_fraction,
        "allow_large_data": cfg.allow_large_data,
        "reproducible": cfg.reproducible,
    })
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::InvalidInput(format!("cannot write {}: {e}", path.display()))
}

fn write_csv<F>(dir: &Path, name: &str, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| io_err(&path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| io_err(&path, e))
}

fn write_report(dir: &Path, v: &Value) -> Result<()> {
    let path = dir.join("report.json");
    let text = serde_json::to_string_pretty(v).expect("report values serialize");
    std::fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))
}

fn prepare_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

/// Run one mode and write its outputs under `cfg.out`.
pub fn run(mode: Mode, cfg: &RunConfig, sweep: Option<(SweepParam, &[f64])>) -> Result<Outcome> {
    cfg.validate()?;
    prepare_out(&cfg.out)?;
    let start = Instant::now();
    let mut rep = Report::default();
    match mode {
        Mode::Stokes => {
            stokes_mode(cfg, &mut rep, true)?;
        }
        Mode::NavierStokes => ns_mode(cfg, &mut rep)?,
        Mode::Verify => verify_mode(cfg, &mut rep)?,
        Mode::Sweep => {
            let (param, values) = sweep
                .ok_or_else(|| Error::InvalidInput("sweep needs a parameter and values".into()))?;
            sweep_mode(cfg, param, values, &mut rep)?;
        }
    }
    if !cfg.reproducible {
        rep.section("timing_seconds", json!(start.elapsed().as_secs_f64()));
    }
    let passed = rep.passed();
    let report = rep.finish(mode.name(), config_json(cfg));
    write_report(&cfg.out, &report)?;
    Ok(Outcome { report, passed })
}

/// Headline scalars of a linear run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Headline {
    pub nontrivial: NontrivialityReport,
    pub vorticity_l2: f64,
    pub relative_vorticity: f64,
    pub best_potential_residual: f64,
}

fn stokes_checks(cfg: &RunConfig, s: &StokesSolution, rep: &mut Report) -> Result<Headline> {
    let ing = &s.ingredients;
    let d = &ing.div.report;
    rep.scalar(
        "divergence_residual",
        "divergence-equation",
        d.codifferential_residual,
    );
    rep.scalar(
        "divergence_rhs_norm",
        "divergence-equation",
        d.codifferential_rhs,
    );
    rep.scalar(
        "divergence_iterations",
        "divergence-equation",
        d.iterations as f64,
    );
    rep.scalar("bogovskii_ratio", "divergence-equation", d.bogovskii_ratio);
    rep.check(Check::le(
        "divergence_residual",
        "divergence-equation",
        d.codifferential_residual,
        1e-8 * d.codifferential_rhs,
    ));
    let r = &s.report;
    rep.scalar("stokes_weak_residual", "stokes-weak-form", r.weak_residual);
    rep.scalar("stokes_forcing_dual_norm", "stokes-weak-form", r.t_dual);
    rep.scalar(
        "stokes_pressure_residual",
        "stokes-weak-form",
        s.residual_with_p,
    );
    rep.check(Check::le(
        "stokes_weak_residual",
        "stokes-weak-form",
        r.weak_residual,
        1e-8 * r.t_dual,
    ));
    rep.check(Check::le(
        "stokes_pressure_residual",
        "stokes-weak-form",
        s.residual_with_p,
        1e-8 * r.t_dual,
    ));
    rep.check(Check::le(
        "correction_codifferential",
        "stokes-divergence-free",
        r.div_residual,
        1e-8,
    ));
    rep.check(Check::le(
        "inner_trace",
        "no-slip-obstacle",
        s.u.inner_trace_max(),
        1e-13,
    ));

    let nt = nontriviality(&ing.div.w, &ing.harmonic, cfg.cutoff()?, &s.u)?;
    rep.scalar("pairing", "nontriviality-identity", nt.pairing);
    rep.scalar("eta_energy", "nontriviality-identity", nt.eta_energy);
    rep.scalar(
        "pairing_gap_relative",
        "nontriviality-identity",
        nt.relative_gap,
    );
    rep.scalar("u_h1_norm", "nontrivial-solution", nt.u_h1_norm);
    rep.check(Check::lt(
        "pairing_sign",
        "nontriviality-identity",
        nt.pairing,
        0.0,
    ));
    rep.check(Check::le(
        "pairing_gap_relative",
        "nontriviality-identity",
        nt.relative_gap,
        5e-3,
    ));
    let h = ing.harmonic.spec;
    let (lo, hi) = (
        geodesic_to_disk(cfg.a, 2.0 * cfg.r0)?.r(),
        geodesic_to_disk(cfg.a, 4.0 * cfg.r0)?.r(),
    );
    let bracket = nt.eta_energy >= h.energy_in_disk(lo) && nt.eta_energy <= h.energy_in_disk(hi);
    rep.check(Check::holds(
        "eta_energy_bracket",
        "cutoff-energy-bracket",
        bracket,
    ));

    let cert = nonzero_solution(&s.u, &ing.harmonic.df, &ing.cutoff, &s.w_tilde)?;
    rep.scalar("outer_energy", "nontrivial-solution", cert.outer_energy);
    rep.scalar(
        "correction_orthogonality",
        "correction-orthogonal-to-dF",
        cert.orthogonality_relative,
    );
    rep.check(Check::holds(
        "nonzero_certificate",
        "nontrivial-solution",
        cert.certified,
    ));

    let pf = potential_flow_test(&s.u)?;
    rep.scalar("vorticity_l2", "non-potential-flow", pf.vorticity_l2);
    rep.scalar(
        "relative_vorticity",
        "non-potential-flow",
        pf.relative_vorticity,
    );
    rep.scalar(
        "best_potential_residual",
        "non-potential-flow",
        pf.best_potential_residual,
    );
    rep.check(Check::ge(
        "relative_vorticity",
        "non-potential-flow",
        pf.relative_vorticity,
        1e-3,
    ));
    rep.check(Check::ge(
        "best_potential_residual",
        "non-potential-flow",
        pf.best_potential_residual,
        0.05,
    ));
    rep.section(
        "laurent_coefficients",
        Value::Array(
            pf.laurent_coeffs
                .iter()
                .map(|l| json!({ "radius": l.radius, "abs_coeffs": l.coeffs }))
                .collect(),
        ),
    );
    Ok(Headline {
        nontrivial: nt,
        vorticity_l2: pf.vorticity_l2,
        relative_vorticity: pf.relative_vorticity,
        best_potential_residual: pf.best_potential_residual,
    })
}

/// Linear pipeline with checks; field CSVs when `dump` is set.
pub fn stokes_mode(cfg: &RunConfig, rep: &mut Report, dump: bool) -> Result<Headline> {
    let grid = cfg.grid()?;
    let s = solve_stokes_problem(&grid, cfg.harmonic()?, cfg.cutoff()?, &cfg.div_options())?;
    let head = stokes_checks(cfg, &s, rep)?;
    if dump {
        let dir = &cfg.out;
        write_csv(dir, "u.csv", |w| write_one_form_csv(w, &s.u))?;
        write_csv(dir, "w.csv", |w| {
            write_one_form_csv(w, &s.ingredients.div.w)
        })?;
        write_csv(dir, "w_tilde.csv", |w| write_one_form_csv(w, &s.w_tilde))?;
        write_csv(dir, "dF.csv", |w| {
            write_one_form_csv(w, &s.ingredients.harmonic.df)
        })?;
        write_csv(dir, "pressure.csv", |w| write_scalar_csv(w, &s.pressure))?;
        write_csv(dir, "h.csv", |w| write_scalar_csv(w, &s.ingredients.h))?;
        write_csv(dir, "grad_u.csv", |w| {
            write_tensor_csv(w, &covariant_derivative(&s.u))
        })?;
    }
    Ok(head)
}

fn constants_json(k: &ConstantsReport) -> Value {
    json!({
        "C_poincare": { "value": k.c_poincare, "anchor": "poincare-inequality" },
        "C_poincare_energy": { "value": k.c_poincare_energy, "anchor": "poincare-inequality" },
        "C_ladyzhenskaya": { "value": k.c_ladyzhenskaya, "anchor": "ladyzhenskaya-inequality" },
        "C_harmonic": { "value": k.c_harmonic, "anchor": "harmonic-gradient-estimate" },
        "K_linear": { "value": k.k_linear, "anchor": "forcing-dual-estimate" },
        "K_convection": { "value": k.k_convection, "anchor": "forcing-dual-estimate" },
        "K_coupling": { "value": k.k_coupling, "anchor": "coupling-estimate" },
        "C_aR0": { "value": k.c_ar0, "anchor": "smallness-condition" },
        "dF_threshold": { "value": k.df_threshold, "anchor": "smallness-condition" },
        "samples": k.samples,
        "seed": k.seed,
    })
}

fn trace_json(t: &PicardTrace) -> Value {
    Value::Array(
        t.stages
            .iter()
            .map(|s| json!({ "lambda": s.lambda, "increments": s.increments, "converged": s.converged, "solution_norm": s.solution_norm }))
            .collect(),
    )
}

/// `c` actually used: rescaled to `df_fraction · threshold` when requested.
pub fn effective_harmonic(cfg: &RunConfig, k: &ConstantsReport) -> Result<HarmonicSpec> {
    let h = cfg.harmonic()?;
    match cfg.df_fraction {
        Some(f) => {
            let unit = HarmonicSpec::new(h.n, 1.0, h.phase)?.total_norm();
            HarmonicSpec::new(h.n, h.c.signum() * f * k.df_threshold / unit, h.phase)
        }
        None => Ok(h),
    }
}

fn ns_mode(cfg: &RunConfig, rep: &mut Report) -> Result<()> {
    let domain = cfg.domain()?;
    let opts = cfg.solver_options();
    let base_grid = if cfg.schedule.is_empty() {
        cfg.grid()?
    } else {
        cfg.exhaustion().stage_grid(domain, 0)?
    };
    let k = estimate_constants(&base_grid, cfg.harmonic()?, cfg.constant_samples, cfg.seed)?;
    rep.section("constants", constants_json(&k));
    let h = effective_harmonic(cfg, &k)?;
    let small = Smallness {
        df_norm: h.total_norm(),
        threshold: k.df_threshold,
    };
    rep.scalar("c_effective", "smallness-condition", h.c);
    rep.scalar("dF_norm", "smallness-condition", small.df_norm);
    rep.scalar("dF_threshold", "smallness-condition", small.threshold);
    small.check(opts.allow_large_data)?;

    if cfg.schedule.is_empty() {
        let grid = base_grid;
        let ing = Ingredients::build(&grid, h, cfg.cutoff()?, &cfg.div_options())?;
        let (psi, phi) = assemble_psi_phi(&ing.cutoff, &ing.harmonic.df, &ing.div.w)?;
        let solver = StokesSolver::new(&grid)?;
        let sol = solve_ns_annulus(&solver, &psi, &phi, &opts, small, None)?;
        rep.section("picard", trace_json(&sol.trace));
        stage_checks(
            rep,
            &sol.trace,
            &check_energy_identity(&sol.w, &psi, &phi)?,
            check_apriori_bound(&sol.w, small.df_norm, &k),
            cfg,
        );
        let u = psi.axpy(1.0, &sol.w);
        dump_ns(&cfg.out, &u, &sol.w, &sol.pressure)?;
    } else {
        let ex = exhaust_domains(domain, h, &cfg.exhaustion(), &opts, &k)?;
        exhaustion_checks(rep, &ex, cfg)?;
        if let Some(last) = ex.stages.last() {
            let u = last.psi.axpy(1.0, &last.solution.w);
            let p = ex
                .glued
                .as_ref()
                .map(|g| g.pressure.clone())
                .unwrap_or_else(|| last.solution.pressure.clone());
            dump_ns(&cfg.out, &u, &last.solution.w, &p)?;
        }
    }
    Ok(())
}

fn dump_ns(dir: &Path, u: &OneFormField, w: &OneFormField, p: &ScalarField) -> Result<()> {
    write_csv(dir, "u.csv", |f| write_one_form_csv(f, u))?;
    write_csv(dir, "w_R.csv", |f| write_one_form_csv(f, w))?;
    write_csv(dir, "pressure.csv", |f| write_scalar_csv(f, p))
}

fn stage_checks(
    rep: &mut Report,
    trace: &PicardTrace,
    e: &hyperstokes::navierstokes::EnergyIdentityReport,
    ap: hyperstokes::navierstokes::AprioriReport,
    cfg: &RunConfig,
) {
    rep.scalar(
        "picard_iterations",
        "picard-continuation",
        trace.total_iterations() as f64,
    );
    rep.check(Check::le(
        "picard_iterations",
        "picard-continuation",
        trace.total_iterations() as f64,
        cfg.picard_max_iters as f64,
    ));
    rep.scalar("energy_identity_relative", "energy-identity", e.relative);
    rep.scalar(
        "cancellation_psi_w_w",
        "trilinear-cancellation",
        e.cancel_psi_w_w,
    );
    rep.scalar(
        "cancellation_w_w_w",
        "trilinear-cancellation",
        e.cancel_w_w_w,
    );
    rep.check(Check::le(
        "energy_identity_relative",
        "energy-identity",
        e.relative,
        1e-8,
    ));
    rep.check(Check::le(
        "cancellation_psi_w_w",
        "trilinear-cancellation",
        e.cancel_psi_w_w,
        1e-10,
    ));
    rep.check(Check::le(
        "cancellation_w_w_w",
        "trilinear-cancellation",
        e.cancel_w_w_w,
        1e-10,
    ));
    rep.scalar("apriori_lhs", "a-priori-bound", ap.lhs);
    rep.scalar("apriori_rhs", "a-priori-bound", ap.rhs);
    rep.check(Check::holds(
        "apriori_bound",
        "a-priori-bound",
        ap.satisfied,
    ));
}

fn exhaustion_checks(rep: &mut Report, ex: &ExhaustionReport, cfg: &RunConfig) -> Result<()> {
    let stages: Vec<Value> = ex
        .stages
        .iter()
        .map(|s| {
            json!({
                "R": s.outer_radius,
                "picard": trace_json(&s.solution.trace),
                "energy_identity_relative": s.energy.relative,
                "cancellation_psi_w_w": s.energy.cancel_psi_w_w,
                "cancellation_w_w_w": s.energy.cancel_w_w_w,
                "apriori_lhs": s.apriori.lhs,
                "apriori_rhs": s.apriori.rhs,
                "apriori_satisfied": s.apriori.satisfied,
            })
        })
        .collect();
    rep.section("stages", Value::Array(stages));
    rep.section(
        "exhaustion",
        json!({
            "cauchy_differences": { "value": ex.cauchy, "anchor": "exhaustion-convergence" },
            "glue_overlap_gaps": { "value": ex.glued.as_ref().map(|g| g.overlap_gaps.clone()), "anchor": "pressure-gluing" },
            "glue_constants": ex.glued.as_ref().map(|g| g.constants.clone()),
            "cross_stage_pressure_gaps": ex.cross_stage_gaps,
            "failure": ex.failure,
        }),
    );
    if let Some(f) = &ex.failure {
        return Err(Error::Solver(f.clone()));
    }
    for s in &ex.stages {
        stage_checks(rep, &s.solution.trace, &s.energy, s.apriori, cfg);
    }
    if ex.cauchy.len() >= 2 {
        let decreasing = ex.cauchy.windows(2).all(|w| w[1] < w[0]);
        rep.check(Check::holds(
            "cauchy_decreasing",
            "exhaustion-convergence",
            decreasing,
        ));
    }
    if let Some(g) = &ex.glued {
        let worst = g.overlap_gaps.iter().cloned().fold(0.0, f64::max);
        rep.scalar("glue_overlap_gap", "pressure-gluing", worst);
        rep.check(Check::le(
            "glue_overlap_gap",
            "pressure-gluing",
            worst,
            1e-8,
        ));
    }
    Ok(())
}

fn verify_mode(cfg: &RunConfig, rep: &mut Report) -> Result<()> {
    stokes_mode(cfg, rep, false)?;
    let grid = cfg.grid()?;
    let iq = inequality_suite(&grid, cfg.seed, cfg.probes);
    rep.scalar(
        "poincare_passed",
        "poincare-inequality",
        iq.poincare_passed as f64,
    );
    rep.scalar(
        "poincare_max",
        "poincare-inequality",
        iq.poincare.iter().cloned().fold(0.0, f64::max),
    );
    rep.scalar(
        "poincare_energy_max",
        "poincare-inequality",
        iq.poincare_energy_max,
    );
    rep.scalar(
        "ladyzhenskaya_max",
        "ladyzhenskaya-inequality",
        iq.ladyzhenskaya_max,
    );
    rep.check(Check::ge(
        "poincare_passed",
        "poincare-inequality",
        iq.poincare_passed as f64,
        iq.count as f64,
    ));
    rep.check(Check::holds(
        "ladyzhenskaya_finite",
        "ladyzhenskaya-inequality",
        iq.ladyzhenskaya_finite,
    ));
    rep.check(Check::holds(
        "harmonic_ratios_finite",
        "harmonic-gradient-estimate",
        iq.harmonic_ratios.iter().all(|(_, r)| r.is_finite()),
    ));
    rep.section(
        "harmonic_ratios",
        Value::Array(
            iq.harmonic_ratios
                .iter()
                .map(|(n, r)| json!({ "n": n, "value": r, "anchor": "harmonic-gradient-estimate" }))
                .collect(),
        ),
    );
    let control = harmonic_pair(cfg.harmonic()?, &grid).df;
    let pf = potential_flow_test(&control)?;
    rep.scalar(
        "control_relative_vorticity",
        "non-potential-flow",
        pf.relative_vorticity,
    );
    rep.scalar(
        "control_potential_residual",
        "non-potential-flow",
        pf.best_potential_residual,
    );
    rep.check(Check::le(
        "control_potential_residual",
        "non-potential-flow",
        pf.best_potential_residual,
        1e-6,
    ));
    Ok(())
}

/// Richardson order `log(e_prev/e)/log(N/N_prev)`.
pub fn observed_order(e_prev: f64, e: f64, n_prev: f64, n: f64) -> f64 {
    (e_prev / e).ln() / (n / n_prev).ln()
}

fn sweep_config(cfg: &RunConfig, param: SweepParam, v: f64) -> Result<RunConfig> {
    let mut c = cfg.clone();
    match param {
        SweepParam::Grid => {
            if !(v >= 1.0 && v.fract() == 0.0) {
                return Err(Error::InvalidInput(format!(
                    "grid sweep values must be positive integers, got {v}"
                )));
            }
            c.n_r = v as usize;
            c.n_th = v as usize;
        }
        SweepParam::RMax => {
            // Keep the radial spacing of the base configuration.
            c.n_r = ((cfg.n_r as f64) * (v - cfg.r0) / (cfg.r_max - cfg.r0)).round() as usize;
            c.r_max = v;
        }
        SweepParam::C => c.c = v,
        SweepParam::N => {
            if !(v >= 1.0 && v.fract() == 0.0) {
                return Err(Error::InvalidInput(format!(
                    "mode numbers must be positive integers, got {v}"
                )));
            }
            c.n = v as u32;
        }
    }
    c.validate()?;
    Ok(c)
}

fn sweep_mode(cfg: &RunConfig, param: SweepParam, values: &[f64], rep: &mut Report) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidInput("sweep value list is empty".into()));
    }
    let mut rows = Vec::new();
    let mut heads: Vec<Option<(f64, Headline)>> = Vec::new();
    for &v in values {
        let res = sweep_config(cfg, param, v).and_then(|c| {
            let mut sub = Report::default();
            let h = stokes_mode(&c, &mut sub, false)?;
            Ok((
                h,
                sub.passed(),
                sub.failed_checks()
                    .iter()
                    .map(|c| c.name)
                    .collect::<Vec<_>>(),
            ))
        });
        match res {
            Ok((h, ok, failed)) => {
                rows.push(json!({
                    "value": v,
                    "ok": ok,
                    "failed_checks": failed,
                    "pairing": h.nontrivial.pairing,
                    "eta_energy": h.nontrivial.eta_energy,
                    "pairing_gap": h.nontrivial.gap,
                    "pairing_gap_relative": h.nontrivial.relative_gap,
                    "u_h1_norm": h.nontrivial.u_h1_norm,
                    "vorticity_l2": h.vorticity_l2,
                    "relative_vorticity": h.relative_vorticity,
                }));
                rep.check(Check::holds("sweep_row", "sweep", ok));
                heads.push(Some((v, h)));
            }
            Err(e) => {
                rows.push(json!({ "value": v, "ok": false, "error": e.to_string() }));
                rep.check(Check::holds("sweep_row", "sweep", false));
                heads.push(None);
            }
        }
    }
    let mut derived = Vec::new();
    for pair in heads.windows(2) {
        if let [Some((v0, h0)), Some((v1, h1))] = pair {
            let rel = |a: f64, b: f64| (b - a).abs() / a.abs().max(f64::MIN_POSITIVE);
            let mut d = json!({
                "from": v0,
                "to": v1,
                "pairing_change": rel(h0.nontrivial.pairing, h1.nontrivial.pairing),
                "u_h1_change": rel(h0.nontrivial.u_h1_norm, h1.nontrivial.u_h1_norm),
                "vorticity_change": rel(h0.vorticity_l2, h1.vorticity_l2),
            });
            if param == SweepParam::Grid {
                d["pairing_gap_order"] = json!(observed_order(
                    h0.nontrivial.gap,
                    h1.nontrivial.gap,
                    *v0,
                    *v1
                ));
            }
            derived.push(d);
        }
    }
    if let Some(last) = derived.last() {
        match param {
            SweepParam::Grid => {
                let order = last["pairing_gap_order"].as_f64().unwrap_or(f64::NAN);
                rep.scalar("pairing_gap_order", "nontriviality-identity", order);
                rep.check(Check::ge(
                    "pairing_gap_order",
                    "nontriviality-identity",
                    order,
                    1.0,
                ));
            }
            SweepParam::RMax => {
                for key in ["pairing_change", "u_h1_change", "vorticity_change"] {
                    let x = last[key].as_f64().unwrap_or(f64::NAN);
                    rep.scalar(key, "truncation-sensitivity", x);
                }
                let worst = ["pairing_change", "u_h1_change", "vorticity_change"]
                    .iter()
                    .map(|k| last[*k].as_f64().unwrap_or(f64::INFINITY))
                    .fold(0.0, f64::max);
                rep.check(Check::le(
                    "truncation_change",
                    "truncation-sensitivity",
                    worst,
                    0.01,
                ));
            }
            _ => {}
        }
    }
    rep.section(
        "sweep",
        json!({ "parameter": format!("{param:?}"), "rows": rows, "consecutive": derived }),
    );
    Ok(())
}

/// `‖du‖` of the analytic samples of `dF`; goes to zero at second order.
pub fn potential_control_vorticity(cfg: &RunConfig) -> Result<f64> {
    let grid = cfg.grid()?;
    Ok(vorticity_norm_sq(&hyperstokes::fields::harmonic_analytic(
        cfg.harmonic()?,
        &grid,
    ))
    .sqrt())
}
