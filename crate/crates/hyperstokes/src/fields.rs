//! The explicit ingredients: harmonic 1-forms `dF` with `F♯ = c·Re(e^{iφ} zⁿ)`,
//! the radial cutoff `η_{R₀}`, and the divergence data `h = −∇η♯·∇F♯`.
//!
//! The pipeline uses a discrete-harmonic `F_h`: the angular profile is the
//! exact `cos(nθ + φ)` and the radial profile solves the grid's own
//! Laplace recurrence with the analytic wall values `rⁿ`. Its gradient is
//! closed and co-closed to rounding, so the divergence bookkeeping of the
//! construction holds exactly on the grid. Analytic samples are available
//! separately for quadrature oracles.

use std::sync::Arc;

use crate::calculus::DiscreteCalculus;
use crate::error::{invalid, Error, Result};
use crate::hypgeom::DomainSpec;
use crate::mesh::{AnnulusGrid, BoundaryClass, Location, OneFormField, ScalarField};

/// `F♯ = c · Re(e^{iφ} (y¹ + i y²)ⁿ) = c rⁿ cos(nθ + φ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicSpec {
    pub n: u32,
    pub c: f64,
    pub phase: f64,
}

impl HarmonicSpec {
    pub fn new(n: u32, c: f64, phase: f64) -> Result<Self> {
        if n == 0 {
            return Err(invalid(
                "harmonic mode n must be at least 1 (n = 0 gives dF = 0)",
            ));
        }
        if !(c.is_finite() && c != 0.0) {
            return Err(invalid(format!(
                "harmonic amplitude c must be finite and nonzero, got {c}"
            )));
        }
        if !phase.is_finite() {
            return Err(invalid("harmonic phase must be finite"));
        }
        Ok(Self { n, c, phase })
    }

    pub fn value(&self, r: f64, theta: f64) -> f64 {
        self.c * r.powi(self.n as i32) * (self.n as f64 * theta + self.phase).cos()
    }

    /// Polar components `(∂_r F, r⁻¹ ∂_θ F)`.
    pub fn gradient_polar(&self, r: f64, theta: f64) -> [f64; 2] {
        let n = self.n as f64;
        let k = self.c * n * r.powi(self.n as i32 - 1);
        let (s, c) = (n * theta + self.phase).sin_cos();
        [k * c, -k * s]
    }

    /// `‖dF‖²_{L²(H²)}` over the disk `|y| < r`: `π n c² r^{2n}`.
    pub fn energy_in_disk(&self, r: f64) -> f64 {
        std::f64::consts::PI * self.n as f64 * self.c * self.c * r.powi(2 * self.n as i32)
    }

    /// `‖dF‖_{L²(H²)}` over the whole plane.
    pub fn total_norm(&self) -> f64 {
        self.energy_in_disk(1.0).sqrt()
    }
}

/// `F_h` at centers and walls together with `dF_h`.
#[derive(Debug, Clone)]
pub struct HarmonicPair {
    pub spec: HarmonicSpec,
    pub f: ScalarField,
    /// `n_r + 2` rows: inner wall, centers, outer wall.
    pub f_ext: Vec<f64>,
    pub df: OneFormField,
}

/// Discrete-harmonic potential and its gradient on `grid`.
pub fn harmonic_pair(spec: HarmonicSpec, grid: &Arc<AnnulusGrid>) -> HarmonicPair {
    let r = grid.node_radii();
    let n = spec.n as i32;
    let profile = discrete_radial_profile(grid, spec.n, [r[0].powi(n), r[grid.n_r()].powi(n)]);
    let (n_r, n_th) = (grid.n_r(), grid.n_th());
    let mut f_ext = vec![0.0; (n_r + 2) * n_th];
    for (m, &p) in profile.iter().enumerate() {
        for j in 0..n_th {
            let t = grid.theta_center(j);
            f_ext[m * n_th + j] = spec.c * p * (spec.n as f64 * t + spec.phase).cos();
        }
    }
    let f = ScalarField {
        grid: grid.clone(),
        location: Location::Centers,
        values: f_ext[n_th..(n_r + 1) * n_th].to_vec(),
    };
    let df = DiscreteCalculus::new(grid).grad_extended(&f_ext, BoundaryClass::Free);
    HarmonicPair { spec, f, f_ext, df }
}

/// Gradient of the discrete-harmonic extension of `r^k cos(|k|θ + phase)` (`log r` for `k = 0`)
/// from its wall values.
pub(crate) fn discrete_harmonic_gradient(
    grid: &Arc<AnnulusGrid>,
    k: i32,
    phase: f64,
) -> OneFormField {
    let r = grid.node_radii();
    let wall = |x: f64| if k == 0 { x.ln() } else { x.powi(k) };
    let profile =
        discrete_radial_profile(grid, k.unsigned_abs(), [wall(r[0]), wall(r[grid.n_r()])]);
    let n_th = grid.n_th();
    let mut f_ext = vec![0.0; profile.len() * n_th];
    for (m, &p) in profile.iter().enumerate() {
        for j in 0..n_th {
            f_ext[m * n_th + j] =
                p * (k.unsigned_abs() as f64 * grid.theta_center(j) + phase).cos();
        }
    }
    DiscreteCalculus::new(grid).grad_extended(&f_ext, BoundaryClass::Free)
}

/// Radial profile at `[r_0, rc_0, …, rc_{n_r−1}, r_{n_r}]` with the given wall values whose
/// `cos(nθ)` extension is annihilated by the grid divergence of the grid gradient.
fn discrete_radial_profile(grid: &AnnulusGrid, n: u32, walls: [f64; 2]) -> Vec<f64> {
    let n_r = grid.n_r();
    let r = grid.node_radii();
    let rc = grid.center_radii();
    let dt = grid.dtheta();
    let len = &grid.node_len;
    let lam = 2.0 * ((n as f64 * dt).cos() - 1.0);
    let mut e = vec![0.0; n_r + 2];
    e[0] = walls[0];
    e[n_r + 1] = walls[1];
    // Row i couples e[i], e[i+1], e[i+2].
    let mut sub = vec![0.0; n_r];
    let mut diag = vec![0.0; n_r];
    let mut sup = vec![0.0; n_r];
    let mut rhs = vec![0.0; n_r];
    for i in 0..n_r {
        let lo = dt * r[i] / len[i];
        let hi = dt * r[i + 1] / len[i + 1];
        sub[i] = lo;
        sup[i] = hi;
        diag[i] = -lo - hi + (r[i + 1] - r[i]) * lam / (rc[i] * dt);
    }
    rhs[0] -= sub[0] * e[0];
    rhs[n_r - 1] -= sup[n_r - 1] * e[n_r + 1];
    // Thomas algorithm; the system is diagonally dominant.
    for i in 1..n_r {
        let m = sub[i] / diag[i - 1];
        diag[i] -= m * sup[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    e[n_r] = rhs[n_r - 1] / diag[n_r - 1];
    for i in (0..n_r - 1).rev() {
        e[i + 1] = (rhs[i] - sup[i] * e[i + 2]) / diag[i];
    }
    e
}

/// Exact samples of `dF` at the staggered positions.
pub fn harmonic_analytic(spec: HarmonicSpec, grid: &Arc<AnnulusGrid>) -> OneFormField {
    OneFormField::from_polar_fn(grid, BoundaryClass::Free, |r, t| spec.gradient_polar(r, t))
}

/// Transition profile of the cutoff on `t ∈ [1, 2]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CutoffProfile {
    /// `s(2−t)/(s(2−t)+s(t−1))`, `s(τ) = e^{−1/τ}`; C^∞.
    #[default]
    Exponential,
    /// Quintic smoothstep; C².
    Quintic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffSpec {
    pub a: f64,
    pub r0: f64,
    pub profile: CutoffProfile,
}

impl CutoffSpec {
    pub fn new(domain: DomainSpec) -> Self {
        Self {
            a: domain.a,
            r0: domain.r0,
            profile: CutoffProfile::Exponential,
        }
    }

    /// `η(t)`: 1 on `t ≤ 1`, 0 on `t ≥ 2`, nonincreasing.
    pub fn eta(&self, t: f64) -> f64 {
        if t <= 1.0 {
            return 1.0;
        }
        if t >= 2.0 {
            return 0.0;
        }
        match self.profile {
            CutoffProfile::Exponential => {
                let (p, q) = (bump(2.0 - t), bump(t - 1.0));
                p / (p + q)
            }
            CutoffProfile::Quintic => {
                let x = t - 1.0;
                1.0 - x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
            }
        }
    }

    /// `η′(t)`.
    pub fn eta_prime(&self, t: f64) -> f64 {
        if t <= 1.0 || t >= 2.0 {
            return 0.0;
        }
        match self.profile {
            CutoffProfile::Exponential => {
                let (u, v) = (2.0 - t, t - 1.0);
                let (p, q) = (bump(u), bump(v));
                let (dp, dq) = (p / (u * u), q / (v * v));
                -(dp * q + p * dq) / ((p + q) * (p + q))
            }
            CutoffProfile::Quintic => {
                let x = t - 1.0;
                -30.0 * x * x * (1.0 - x) * (1.0 - x)
            }
        }
    }

    /// `η_{R₀}(ρ) = η(ρ / 2R₀)`.
    pub fn at_geodesic(&self, rho: f64) -> f64 {
        self.eta(rho / (2.0 * self.r0))
    }

    /// Radial disk derivative `∂_r η_{R₀}` at disk radius `r` with geodesic radius `rho`.
    pub fn radial_derivative(&self, rho: f64, r: f64) -> f64 {
        let drho_dr = 2.0 / (self.a * (1.0 - r * r));
        self.eta_prime(rho / (2.0 * self.r0)) / (2.0 * self.r0) * drho_dr
    }
}

fn bump(tau: f64) -> f64 {
    if tau <= 0.0 {
        0.0
    } else {
        (-1.0 / tau).exp()
    }
}

/// The cutoff sampled on a grid.
#[derive(Debug, Clone)]
pub struct Cutoff {
    pub spec: CutoffSpec,
    pub eta: ScalarField,
    pub deta: OneFormField,
    /// `η` at every face row (`2n_r + 3` values).
    pub face_values: Vec<f64>,
}

/// Sample `η_{R₀}` at centers, `dη` and `η` at faces.
pub fn cutoff(spec: CutoffSpec, grid: &Arc<AnnulusGrid>) -> Result<Cutoff> {
    if grid.geodesic_out() < 4.0 * spec.r0 * (1.0 - 1e-12) {
        return Err(Error::Grid(format!(
            "outer geodesic radius {} must reach 4R0 = {} so the cutoff vanishes inside the grid",
            grid.geodesic_out(),
            4.0 * spec.r0
        )));
    }
    let n_r = grid.n_r();
    let n_th = grid.n_th();
    let rho_c = grid.center_geodesic();
    let rho_n = grid.node_geodesic();
    let eta = ScalarField {
        grid: grid.clone(),
        location: Location::Centers,
        values: (0..n_r * n_th)
            .map(|k| spec.at_geodesic(rho_c[k / n_th]))
            .collect(),
    };
    let mut face_values: Vec<f64> = rho_n.iter().map(|&p| spec.at_geodesic(p)).collect();
    face_values.push(spec.at_geodesic(rho_n[0]));
    face_values.extend(rho_c.iter().map(|&p| spec.at_geodesic(p)));
    face_values.push(spec.at_geodesic(rho_n[n_r]));
    let mut deta = OneFormField::zeros(grid);
    deta.class = BoundaryClass::Free;
    let r = grid.node_radii();
    for i in 0..=n_r {
        let d = spec.radial_derivative(rho_n[i], r[i]);
        deta.radial_mut()[i * n_th..(i + 1) * n_th].fill(d);
    }
    Ok(Cutoff {
        spec,
        eta,
        deta,
        face_values,
    })
}

impl Cutoff {
    /// `η · u` with `η` sampled at the face positions.
    pub fn times(&self, u: &OneFormField) -> OneFormField {
        let n = u.grid.n_th();
        let mut out = u.clone();
        for (row, &e) in self.face_values.iter().enumerate() {
            for v in &mut out.data[row * n..(row + 1) * n] {
                *v *= e;
            }
        }
        out
    }

    /// `(η − 1) · u`.
    pub fn times_minus_one(&self, u: &OneFormField) -> OneFormField {
        let n = u.grid.n_th();
        let mut out = u.clone();
        for (row, &e) in self.face_values.iter().enumerate() {
            for v in &mut out.data[row * n..(row + 1) * n] {
                *v *= e - 1.0;
            }
        }
        out.class = BoundaryClass::ZeroOnInner;
        if self.face_values[0] != 1.0 {
            out.class = BoundaryClass::Free;
        }
        out
    }

    /// Cells where `η` is not constant across the cell faces.
    pub fn ring_cells(&self, grid: &AnnulusGrid) -> Vec<bool> {
        let n_r = grid.n_r();
        (0..n_r)
            .map(|i| {
                let vals = [
                    self.face_values[i],
                    self.face_values[i + 1],
                    self.face_values[n_r + 2 + i],
                ];
                !(vals.iter().all(|&v| v == 1.0) || vals.iter().all(|&v| v == 0.0))
            })
            .collect()
    }

    /// Node rows bounding the transition ring `[2R₀, 4R₀]`.
    pub fn ring_nodes(&self, grid: &AnnulusGrid) -> Result<(usize, usize)> {
        let lo = grid.node_index_of(2.0 * self.spec.r0);
        let hi = grid.node_index_of(4.0 * self.spec.r0);
        match (lo, hi) {
            (Some(lo), Some(hi)) => Ok((lo, hi)),
            _ => Err(Error::Grid(
                "geodesic radii 2R0 and 4R0 must both be grid nodes".into(),
            )),
        }
    }
}

/// Euclidean divergence data `h = −div(η dF_h)`, set to exactly zero off the transition ring.
/// On the ring this is the discrete `−∇η♯·∇F♯`.
pub fn divergence_rhs(cut: &Cutoff, harm: &HarmonicPair) -> Result<ScalarField> {
    let grid = &harm.df.grid;
    if !grid.same_as(&cut.eta.grid) {
        return Err(invalid("cutoff and harmonic field live on different grids"));
    }
    let dc = DiscreteCalculus::new(grid);
    let mut h = dc.euclidean_div(&cut.times(&harm.df))?;
    let ring = cut.ring_cells(grid);
    let n = grid.n_th();
    for (i, inside) in ring.iter().enumerate() {
        for v in &mut h.values[i * n..(i + 1) * n] {
            *v = if *inside { -*v } else { 0.0 };
        }
    }
    Ok(h)
}

/// Pointwise `−∇η♯·∇F♯` from analytic derivatives, at cell centers.
pub fn divergence_rhs_analytic(
    cut: &Cutoff,
    spec: HarmonicSpec,
    grid: &Arc<AnnulusGrid>,
) -> ScalarField {
    let rho = grid.center_geodesic();
    let rc = grid.center_radii();
    let n = grid.n_th();
    let values = (0..grid.n_r() * n)
        .map(|k| {
            let (i, j) = (k / n, k % n);
            -cut.spec.radial_derivative(rho[i], rc[i])
                * spec.gradient_polar(rc[i], grid.theta_center(j))[0]
        })
        .collect();
    ScalarField {
        grid: grid.clone(),
        location: Location::Centers,
        values,
    }
}

/// Hyperbolic form `g(dη, dF) = −pw · h`.
pub fn hyperbolic_rhs(h: &ScalarField) -> ScalarField {
    let g = &h.grid;
    let n = g.n_th();
    let values = h
        .values
        .iter()
        .enumerate()
        .map(|(k, v)| -g.pairing_weight_center(k / n) * v)
        .collect();
    ScalarField {
        grid: g.clone(),
        location: Location::Centers,
        values,
    }
}

/// `∫ h dy` over the grid.
pub fn compatibility(h: &ScalarField) -> f64 {
    let g = &h.grid;
    let n = g.n_th();
    (0..g.n_r())
        .map(|i| g.cell_area(i) * h.values[i * n..(i + 1) * n].iter().sum::<f64>())
        .sum()
}

/// `∫ |h| dy`.
pub fn l1_norm(h: &ScalarField) -> f64 {
    let g = &h.grid;
    let n = g.n_th();
    (0..g.n_r())
        .map(|i| {
            g.cell_area(i)
                * h.values[i * n..(i + 1) * n]
                    .iter()
                    .map(|v| v.abs())
                    .sum::<f64>()
        })
        .sum()
}

/// `(∫ h² dy)^{1/2}`.
pub fn l2_norm_euclidean(h: &ScalarField) -> f64 {
    let g = &h.grid;
    let n = g.n_th();
    (0..g.n_r())
        .map(|i| {
            g.cell_area(i)
                * h.values[i * n..(i + 1) * n]
                    .iter()
                    .map(|v| v * v)
                    .sum::<f64>()
        })
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{codifferential, l2_inner, vorticity_norm_sq};

    fn std_grid(n_r: usize, n_th: usize) -> Arc<AnnulusGrid> {
        AnnulusGrid::build(DomainSpec::new(1.0, 1.0).unwrap(), 1.0, 12.0, n_r, n_th).unwrap()
    }

    #[test]
    fn zero_mode_rejected() {
        assert!(HarmonicSpec::new(0, 1.0, 0.0).is_err());
        assert!(HarmonicSpec::new(1, 0.0, 0.0).is_err());
    }

    #[test]
    fn linear_mode_is_dy1() {
        let s = HarmonicSpec::new(1, 1.0, 0.0).unwrap();
        let g = std_grid(64, 32);
        let u = harmonic_analytic(s, &g);
        let [u1, u2] = u.cartesian_at_centers();
        let f = (g.dtheta() / 2.0).cos();
        assert!(u1.iter().all(|v| (v - 1.0).abs() <= 1.0 - f + 1e-12));
        assert!(u2.iter().all(|v| v.abs() <= 1.0 - f + 1e-12));
        assert!((s.total_norm().powi(2) - std::f64::consts::PI).abs() < 1e-14);
        let s2 = HarmonicSpec::new(2, 1.0, 0.0).unwrap();
        assert!((s2.total_norm().powi(2) - 2.0 * std::f64::consts::PI).abs() < 1e-14);
    }

    #[test]
    fn discrete_harmonic_gradient_is_closed_and_coclosed() {
        let g = std_grid(64, 64);
        for n in 1..=3 {
            let hp = harmonic_pair(HarmonicSpec::new(n, 1.0, 0.3).unwrap(), &g);
            let scale = hp.df.max_abs();
            assert!(
                vorticity_norm_sq(&hp.df).sqrt() < 1e-13 * l2_inner(&hp.df, &hp.df).unwrap().sqrt()
            );
            let d = codifferential(&hp.df);
            assert!(d.max_abs() < 1e-12 * scale.max(1.0), "{}", d.max_abs());
        }
    }

    #[test]
    fn discrete_harmonic_tracks_analytic() {
        let g = std_grid(128, 128);
        let s = HarmonicSpec::new(2, 1.0, 0.0).unwrap();
        let hp = harmonic_pair(s, &g);
        let an = harmonic_analytic(s, &g);
        let diff = hp.df.axpy(-1.0, &an);
        let rel = (l2_inner(&diff, &diff).unwrap() / l2_inner(&an, &an).unwrap()).sqrt();
        assert!(rel < 1e-3, "{rel}");
    }

    #[test]
    fn cutoff_values() {
        let c = CutoffSpec::new(DomainSpec::new(1.0, 1.0).unwrap());
        assert_eq!(c.at_geodesic(1.0), 1.0);
        assert_eq!(c.at_geodesic(5.0), 0.0);
        assert!((c.eta(1.5) - 0.5).abs() < 1e-15);
        let mut prev = 1.0;
        for k in 0..=200 {
            let t = 1.0 + k as f64 / 200.0;
            let e = c.eta(t);
            assert!(e <= prev && c.eta_prime(t) <= 0.0);
            prev = e;
        }
        let q = CutoffSpec {
            profile: CutoffProfile::Quintic,
            ..c
        };
        assert!((q.eta(1.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn eta_prime_matches_difference_quotient() {
        let c = CutoffSpec::new(DomainSpec::new(1.0, 1.0).unwrap());
        for &t in &[1.1, 1.3, 1.5, 1.77, 1.95] {
            let h = 1e-6;
            let fd = (c.eta(t + h) - c.eta(t - h)) / (2.0 * h);
            assert!((fd - c.eta_prime(t)).abs() < 1e-7);
        }
    }

    #[test]
    fn cutoff_needs_outer_radius() {
        let g = AnnulusGrid::build(DomainSpec::new(1.0, 1.0).unwrap(), 1.0, 3.5, 64, 16).unwrap();
        let c = CutoffSpec::new(DomainSpec::new(1.0, 1.0).unwrap());
        assert!(cutoff(c, &g).is_err());
    }

    #[test]
    fn deta_supported_in_ring() {
        let g = std_grid(128, 16);
        let c = cutoff(CutoffSpec::new(g.spec()), &g).unwrap();
        let (lo, hi) = (1.0f64.tanh(), 2.0f64.tanh());
        let n = g.n_th();
        for (i, &r) in g.node_radii().iter().enumerate() {
            let v = c.deta.radial()[i * n];
            if r < lo || r > hi {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn h_vanishes_off_ring_and_integrates_to_zero() {
        let g = std_grid(128, 64);
        let c = cutoff(CutoffSpec::new(g.spec()), &g).unwrap();
        for n in 1..=3 {
            let hp = harmonic_pair(HarmonicSpec::new(n, 1.0, 0.0).unwrap(), &g);
            let h = divergence_rhs(&c, &hp).unwrap();
            let (lo, hi) = c.ring_nodes(&g).unwrap();
            let nt = g.n_th();
            for i in (0..lo).chain(hi..g.n_r()) {
                assert!(h.values[i * nt..(i + 1) * nt].iter().all(|v| *v == 0.0));
            }
            assert!(compatibility(&h).abs() <= 1e-10 * l1_norm(&h));
            let abs = ScalarField {
                values: h.values.iter().map(|v| v.abs()).collect(),
                ..h.clone()
            };
            assert!(compatibility(&abs) > 0.0);
        }
    }

    #[test]
    fn n1_h_sign_follows_y1() {
        let g = std_grid(128, 64);
        let c = cutoff(CutoffSpec::new(g.spec()), &g).unwrap();
        let h = divergence_rhs_analytic(&c, HarmonicSpec::new(1, 1.0, 0.0).unwrap(), &g);
        let n = g.n_th();
        for (k, v) in h.values.iter().enumerate() {
            let t = g.theta_center(k % n);
            if t.cos() > 0.0 {
                assert!(*v >= 0.0);
            }
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]

        #[test]
        fn ring_data_is_compatible(n in 1u32..5, c in -3.0f64..3.0, phase in 0.0f64..6.3, a in 0.5f64..2.0) {
            let spec = DomainSpec::new(a, 1.0).unwrap();
            let g = AnnulusGrid::build(spec, 1.0, 6.0, 40, 32).unwrap();
            let h = HarmonicSpec::new(n, c, phase).unwrap();
            let rhs = divergence_rhs(&cutoff(CutoffSpec::new(spec), &g).unwrap(), &harmonic_pair(h, &g)).unwrap();
            proptest::prop_assert!(compatibility(&rhs).abs() <= 1e-10 * l1_norm(&rhs).max(f64::MIN_POSITIVE));
        }
    }
}
