//! Staggered polar grids on disk annuli.
//!
//! Layout (MAC style) for a grid with `n_r` radial and `n_th` angular cells:
//!
//! * scalars live at cell centers `(rc_i, θ_{j+½})`, `i < n_r`;
//! * vorticity densities live at nodes `(r_i, θ_j)`, `i ≤ n_r`;
//! * a 1-form stores its radial component at radial faces `(r_i, θ_{j+½})`,
//!   `i ≤ n_r`, and its angular component at angular faces `(rc_i, θ_j)`
//!   plus the two boundary circles, giving `n_r + 2` angular rows ordered
//!   `[r_0, rc_0, …, rc_{n_r−1}, r_{n_r}]`.
//!
//! Components are the orthonormal polar components of the disk-chart 1-form
//! `u₁dY¹ + u₂dY²`; [`OneFormField::cartesian_at_centers`] rotates back.
//!
//! Radial nodes are uniform in geodesic distance inside each segment between
//! breakpoints `R_in`, `2R₀`, `4R₀`, `R_out`, so the cutoff transition ring
//! is a union of whole cells.

use std::io::{self, Write};
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::hypgeom::{
    disk_to_geodesic, geodesic_to_disk, log_factor_slope, pairing_weight_from, volume_weight_from,
    DiskRadius, DomainSpec,
};

/// Upper bound on `n_r · n_th`.
pub const MAX_CELLS: usize = 4096 * 4096;
/// Minimum number of radial cells across the cutoff transition ring.
pub const MIN_RING_CELLS: usize = 8;

/// A staggered polar discretization of `{r_in < |y| < r_out}`.
#[derive(Debug, Clone)]
pub struct AnnulusGrid {
    spec: DomainSpec,
    n_r: usize,
    n_th: usize,
    dtheta: f64,
    rho: Vec<f64>,
    r: Vec<f64>,
    om: Vec<f64>,
    rc: Vec<f64>,
    omc: Vec<f64>,
    rho_c: Vec<f64>,
    /// Positions of the angular rows `[r_0, rc_0, …, r_{n_r}]`.
    pub(crate) xa: Vec<f64>,
    pub(crate) cell_area: Vec<f64>,
    pub(crate) node_len: Vec<f64>,
    pub(crate) node_area: Vec<f64>,
    pub(crate) mass_r: Vec<f64>,
    pub(crate) mass_t: Vec<f64>,
    pub(crate) pw_node: Vec<f64>,
    pub(crate) pw_center: Vec<f64>,
    pub(crate) pw_face_r: Vec<f64>,
    pub(crate) pw_face_t: Vec<f64>,
    pub(crate) slope_center: Vec<f64>,
}

/// Which part of the grid boundary a node row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Interior,
    InnerBoundary,
    OuterBoundary,
}

/// Measure used by [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    Euclidean,
    Hyperbolic,
}

impl AnnulusGrid {
    /// Build the grid for `R_in < ρ < R_out` with `n_r` radial and `n_th` angular cells.
    pub fn build(
        spec: DomainSpec,
        r_in: f64,
        r_out: f64,
        n_r: usize,
        n_th: usize,
    ) -> Result<Arc<Self>> {
        Self::build_with_breaks(spec, r_in, r_out, n_r, n_th, &[])
    }

    /// Like [`AnnulusGrid::build`], with extra geodesic breakpoints that become grid nodes.
    pub fn build_with_breaks(
        spec: DomainSpec,
        r_in: f64,
        r_out: f64,
        n_r: usize,
        n_th: usize,
        extra: &[f64],
    ) -> Result<Arc<Self>> {
        if !(r_in.is_finite() && r_out.is_finite() && r_in > 0.0 && r_in < r_out) {
            return Err(Error::Grid(format!(
                "need 0 < R_in < R_out, got R_in={r_in}, R_out={r_out}"
            )));
        }
        if n_r < 8 {
            return Err(Error::Grid(format!(
                "need at least 8 radial cells, got {n_r}"
            )));
        }
        let mut breaks = vec![r_in, r_out];
        for b in [2.0 * spec.r0, 4.0 * spec.r0].iter().chain(extra) {
            if *b > r_in && *b < r_out {
                breaks.push(*b);
            }
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let counts = allocate(&breaks, n_r);
        if let Some(k) = breaks.iter().position(|&b| b == 2.0 * spec.r0) {
            if breaks.get(k + 1) == Some(&(4.0 * spec.r0)) && counts[k] < MIN_RING_CELLS {
                return Err(Error::Grid(format!(
                    "cutoff transition ring [2R0, 4R0] gets {} radial cells, need at least {MIN_RING_CELLS}",
                    counts[k]
                )));
            }
        }
        Self::from_segments(spec, &breaks, &counts, n_th)
    }

    /// Build from explicit geodesic breakpoints and per-segment cell counts.
    pub fn from_segments(
        spec: DomainSpec,
        breaks: &[f64],
        counts: &[usize],
        n_th: usize,
    ) -> Result<Arc<Self>> {
        if breaks.len() != counts.len() + 1 || counts.contains(&0) {
            return Err(Error::Grid(
                "segment counts must be positive, one per breakpoint interval".into(),
            ));
        }
        let mut rho = vec![breaks[0]];
        for (k, &m) in counts.iter().enumerate() {
            let (lo, hi) = (breaks[k], breaks[k + 1]);
            for q in 1..=m {
                rho.push(if q == m {
                    hi
                } else {
                    lo + (hi - lo) * q as f64 / m as f64
                });
            }
        }
        Self::from_geodesic_nodes(spec, rho, n_th)
    }

    /// Build from strictly increasing geodesic node radii.
    pub fn from_geodesic_nodes(spec: DomainSpec, rho: Vec<f64>, n_th: usize) -> Result<Arc<Self>> {
        let n_r = rho.len().saturating_sub(1);
        if n_r < 8 {
            return Err(Error::Grid(format!(
                "need at least 8 radial cells, got {n_r}"
            )));
        }
        if n_th < 16 || !n_th.is_multiple_of(2) {
            return Err(Error::Grid(format!(
                "need an even angular count of at least 16, got {n_th}"
            )));
        }
        if n_r.saturating_mul(n_th) > MAX_CELLS {
            return Err(Error::Grid(format!(
                "{n_r} x {n_th} cells exceeds the resource guard of {MAX_CELLS} cells"
            )));
        }
        if !(rho[0] > 0.0) || rho.windows(2).any(|w| !(w[1] > w[0])) || !rho[n_r].is_finite() {
            return Err(Error::Grid(
                "geodesic node radii must be positive, finite and strictly increasing".into(),
            ));
        }
        let a = spec.a;
        let mut r = Vec::with_capacity(n_r + 1);
        let mut om = Vec::with_capacity(n_r + 1);
        for &p in &rho {
            let d = geodesic_to_disk(a, p)?;
            r.push(d.r());
            om.push(d.complement());
        }
        let dtheta = 2.0 * std::f64::consts::PI / n_th as f64;
        let rc: Vec<f64> = (0..n_r).map(|i| 0.5 * (r[i] + r[i + 1])).collect();
        let omc: Vec<f64> = (0..n_r).map(|i| 0.5 * (om[i] + om[i + 1])).collect();
        let rho_c = (0..n_r)
            .map(|i| disk_to_geodesic(a, radius_from_parts(rc[i], omc[i])))
            .collect::<Result<Vec<_>>>()?;
        let s_node: Vec<f64> = (0..=n_r).map(|i| om[i] * (1.0 + r[i])).collect();
        let s_center: Vec<f64> = (0..n_r).map(|i| omc[i] * (1.0 + rc[i])).collect();

        let mut xa = Vec::with_capacity(n_r + 2);
        xa.push(r[0]);
        xa.extend_from_slice(&rc);
        xa.push(r[n_r]);
        let cell_area: Vec<f64> = (0..n_r)
            .map(|i| rc[i] * (r[i + 1] - r[i]) * dtheta)
            .collect();
        let mut node_len = Vec::with_capacity(n_r + 1);
        let mut node_area = Vec::with_capacity(n_r + 1);
        for i in 0..=n_r {
            let (lo, hi) = (xa[i], xa[i + 1]);
            node_len.push(hi - lo);
            node_area.push(0.5 * (hi + lo) * (hi - lo) * dtheta);
        }
        let mass_r: Vec<f64> = (0..=n_r).map(|i| r[i] * node_len[i] * dtheta).collect();
        let mut mass_t = vec![0.0; n_r + 2];
        mass_t[1..=n_r].copy_from_slice(&cell_area);
        let pw_node: Vec<f64> = s_node.iter().map(|&s| pairing_weight_from(a, s)).collect();
        let pw_center: Vec<f64> = s_center
            .iter()
            .map(|&s| pairing_weight_from(a, s))
            .collect();
        let mut pw_face_t = Vec::with_capacity(n_r + 2);
        pw_face_t.push(pw_node[0]);
        pw_face_t.extend_from_slice(&pw_center);
        pw_face_t.push(pw_node[n_r]);
        let slope_center = (0..n_r)
            .map(|i| log_factor_slope(rc[i], s_center[i]))
            .collect();
        Ok(Arc::new(Self {
            spec,
            n_r,
            n_th,
            dtheta,
            rho,
            r,
            om,
            rc,
            omc,
            rho_c,
            xa,
            cell_area,
            node_len,
            node_area,
            mass_r,
            mass_t,
            pw_face_r: pw_node.clone(),
            pw_node,
            pw_center,
            pw_face_t,
            slope_center,
        }))
    }

    /// Halve every cell in geodesic radius and in angle. Nested with `self`.
    pub fn refine(&self) -> Result<Arc<Self>> {
        let mut rho = Vec::with_capacity(2 * self.n_r + 1);
        for w in self.rho.windows(2) {
            rho.push(w[0]);
            rho.push(0.5 * (w[0] + w[1]));
        }
        rho.push(self.rho[self.n_r]);
        Self::from_geodesic_nodes(self.spec, rho, 2 * self.n_th)
    }

    /// The sub-annulus between node rows `lo < hi`.
    pub fn sub_annulus(&self, lo: usize, hi: usize) -> Result<Arc<Self>> {
        if !(lo < hi && hi <= self.n_r) {
            return Err(invalid(format!("bad sub-annulus node range {lo}..{hi}")));
        }
        Self::from_geodesic_nodes(self.spec, self.rho[lo..=hi].to_vec(), self.n_th)
    }

    /// Node row whose geodesic radius equals `rho` exactly, if any.
    pub fn node_index_of(&self, rho: f64) -> Option<usize> {
        self.rho.iter().position(|&p| p == rho)
    }

    pub fn spec(&self) -> DomainSpec {
        self.spec
    }
    pub fn n_r(&self) -> usize {
        self.n_r
    }
    pub fn n_th(&self) -> usize {
        self.n_th
    }
    pub fn dtheta(&self) -> f64 {
        self.dtheta
    }
    pub fn r_in(&self) -> f64 {
        self.r[0]
    }
    pub fn r_out(&self) -> f64 {
        self.r[self.n_r]
    }
    /// Geodesic radius of the inner boundary.
    pub fn geodesic_in(&self) -> f64 {
        self.rho[0]
    }
    /// Geodesic radius of the outer boundary.
    pub fn geodesic_out(&self) -> f64 {
        self.rho[self.n_r]
    }
    pub fn node_radii(&self) -> &[f64] {
        &self.r
    }
    pub fn node_geodesic(&self) -> &[f64] {
        &self.rho
    }
    pub fn node_complements(&self) -> &[f64] {
        &self.om
    }
    pub fn center_radii(&self) -> &[f64] {
        &self.rc
    }
    pub fn center_complements(&self) -> &[f64] {
        &self.omc
    }
    pub fn center_geodesic(&self) -> &[f64] {
        &self.rho_c
    }
    /// Radii of the angular-component rows, walls included.
    pub fn angular_row_radii(&self) -> &[f64] {
        &self.xa
    }
    /// Euclidean area of one cell in radial row `i`.
    pub fn cell_area(&self, i: usize) -> f64 {
        self.cell_area[i]
    }
    /// Pairing weight `a²(1−r²)²/4` at cell centers of row `i`.
    pub fn pairing_weight_center(&self, i: usize) -> f64 {
        self.pw_center[i]
    }
    pub fn theta_node(&self, j: usize) -> f64 {
        j as f64 * self.dtheta
    }
    pub fn theta_center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dtheta
    }

    pub fn node_class(&self, i: usize) -> NodeClass {
        if i == 0 {
            NodeClass::InnerBoundary
        } else if i == self.n_r {
            NodeClass::OuterBoundary
        } else {
            NodeClass::Interior
        }
    }

    /// Total Euclidean area covered by the quadrature weights.
    pub fn total_area(&self) -> f64 {
        self.cell_area.iter().sum::<f64>() * self.n_th as f64
    }

    pub(crate) fn n_faces(&self) -> usize {
        2 * self.n_r + 3
    }

    /// Volume weight at cell centers of row `i`.
    pub(crate) fn vw_center(&self, i: usize) -> f64 {
        volume_weight_from(self.spec.a, self.omc[i] * (1.0 + self.rc[i]))
    }

    pub(crate) fn vw_face_r(&self, i: usize) -> f64 {
        volume_weight_from(self.spec.a, self.om[i] * (1.0 + self.r[i]))
    }

    pub(crate) fn vw_face_t(&self, m: usize) -> f64 {
        if m == 0 {
            self.vw_face_r(0)
        } else if m == self.n_r + 1 {
            self.vw_face_r(self.n_r)
        } else {
            self.vw_center(m - 1)
        }
    }

    /// Structural identity used to catch fields from different grids.
    pub fn same_as(&self, other: &Self) -> bool {
        std::ptr::eq(self, other)
            || (self.n_th == other.n_th && self.rho == other.rho && self.spec == other.spec)
    }
}

fn radius_from_parts(r: f64, complement: f64) -> DiskRadius {
    if r < 0.5 {
        DiskRadius::new(r).expect("center radius inside the disk")
    } else {
        DiskRadius::from_complement(complement).expect("center complement positive")
    }
}

/// Split `n` cells over the intervals of `breaks` proportionally to geodesic length.
fn allocate(breaks: &[f64], n: usize) -> Vec<usize> {
    let total = breaks[breaks.len() - 1] - breaks[0];
    let k = breaks.len() - 1;
    let exact: Vec<f64> = breaks
        .windows(2)
        .map(|w| (w[1] - w[0]) / total * n as f64)
        .collect();
    let mut counts: Vec<usize> = exact.iter().map(|&x| (x.floor() as usize).max(1)).collect();
    while counts.iter().sum::<usize>() < n {
        let best = (0..k)
            .max_by(|&p, &q| {
                (exact[p] - counts[p] as f64).total_cmp(&(exact[q] - counts[q] as f64))
            })
            .unwrap_or(0);
        counts[best] += 1;
    }
    while counts.iter().sum::<usize>() > n {
        let best = (0..k)
            .filter(|&p| counts[p] > 1)
            .min_by(|&p, &q| {
                (exact[p] - counts[p] as f64).total_cmp(&(exact[q] - counts[q] as f64))
            })
            .unwrap_or(0);
        counts[best] -= 1;
    }
    counts
}

/// Where the samples of a scalar field live.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Centers,
    Nodes,
}

/// Boundary condition satisfied by a 1-form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryClass {
    Free,
    ZeroOnInner,
    ZeroOnBoth,
}

/// Scalar samples, row-major over `(i_r, i_th)`.
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub grid: Arc<AnnulusGrid>,
    pub location: Location,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Arc<AnnulusGrid>, location: Location) -> Self {
        let rows = match location {
            Location::Centers => grid.n_r,
            Location::Nodes => grid.n_r + 1,
        };
        Self {
            grid: grid.clone(),
            location,
            values: vec![0.0; rows * grid.n_th],
        }
    }

    /// Sample `f(r, θ)` at the field's locations.
    pub fn from_fn(
        grid: &Arc<AnnulusGrid>,
        location: Location,
        f: impl Fn(f64, f64) -> f64,
    ) -> Self {
        let mut out = Self::zeros(grid, location);
        let n_th = grid.n_th;
        for (idx, v) in out.values.iter_mut().enumerate() {
            let (i, j) = (idx / n_th, idx % n_th);
            *v = match location {
                Location::Centers => f(grid.rc[i], grid.theta_center(j)),
                Location::Nodes => f(grid.r[i], grid.theta_node(j)),
            };
        }
        out
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.n_th + j]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// A 1-form in staggered storage: radial rows first, then angular rows.
#[derive(Debug, Clone)]
pub struct OneFormField {
    pub grid: Arc<AnnulusGrid>,
    pub class: BoundaryClass,
    pub data: Vec<f64>,
}

impl OneFormField {
    pub fn zeros(grid: &Arc<AnnulusGrid>) -> Self {
        Self {
            grid: grid.clone(),
            class: BoundaryClass::ZeroOnBoth,
            data: vec![0.0; grid.n_faces() * grid.n_th],
        }
    }

    pub fn with_data(grid: &Arc<AnnulusGrid>, class: BoundaryClass, data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            grid.n_faces() * grid.n_th,
            "1-form storage size"
        );
        Self {
            grid: grid.clone(),
            class,
            data,
        }
    }

    /// Sample polar components `(u_r, u_θ) = f(r, θ)` at the staggered positions.
    pub fn from_polar_fn(
        grid: &Arc<AnnulusGrid>,
        class: BoundaryClass,
        f: impl Fn(f64, f64) -> [f64; 2],
    ) -> Self {
        let mut out = Self::zeros(grid);
        out.class = class;
        let n_th = grid.n_th;
        let nr1 = grid.n_r + 1;
        for i in 0..nr1 {
            for j in 0..n_th {
                out.data[i * n_th + j] = f(grid.r[i], grid.theta_center(j))[0];
            }
        }
        for m in 0..grid.n_r + 2 {
            for j in 0..n_th {
                out.data[(nr1 + m) * n_th + j] = f(grid.xa[m], grid.theta_node(j))[1];
            }
        }
        out.enforce_class();
        out
    }

    /// Sample Cartesian disk components `(u₁, u₂) = f(y¹, y²)`.
    pub fn from_cartesian_fn(
        grid: &Arc<AnnulusGrid>,
        class: BoundaryClass,
        f: impl Fn(f64, f64) -> [f64; 2],
    ) -> Self {
        Self::from_polar_fn(grid, class, |r, t| {
            let (s, c) = t.sin_cos();
            let [u1, u2] = f(r * c, r * s);
            [u1 * c + u2 * s, -u1 * s + u2 * c]
        })
    }

    pub fn radial(&self) -> &[f64] {
        &self.data[..(self.grid.n_r + 1) * self.grid.n_th]
    }
    pub fn angular(&self) -> &[f64] {
        &self.data[(self.grid.n_r + 1) * self.grid.n_th..]
    }
    pub fn radial_mut(&mut self) -> &mut [f64] {
        let k = (self.grid.n_r + 1) * self.grid.n_th;
        &mut self.data[..k]
    }
    pub fn angular_mut(&mut self) -> &mut [f64] {
        let k = (self.grid.n_r + 1) * self.grid.n_th;
        &mut self.data[k..]
    }

    /// Zero the entries that the boundary class pins.
    pub fn enforce_class(&mut self) {
        let (n_r, n_th) = (self.grid.n_r, self.grid.n_th);
        let (inner, outer) = match self.class {
            BoundaryClass::Free => (false, false),
            BoundaryClass::ZeroOnInner => (true, false),
            BoundaryClass::ZeroOnBoth => (true, true),
        };
        if inner {
            self.radial_mut()[..n_th].fill(0.0);
            self.angular_mut()[..n_th].fill(0.0);
        }
        if outer {
            self.radial_mut()[n_r * n_th..].fill(0.0);
            self.angular_mut()[(n_r + 1) * n_th..].fill(0.0);
        }
    }

    /// Largest component magnitude on the inner boundary circle.
    pub fn inner_trace_max(&self) -> f64 {
        let n_th = self.grid.n_th;
        self.radial()[..n_th]
            .iter()
            .chain(&self.angular()[..n_th])
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest component magnitude on the outer boundary circle.
    pub fn outer_trace_max(&self) -> f64 {
        let (n_r, n_th) = (self.grid.n_r, self.grid.n_th);
        self.radial()[n_r * n_th..]
            .iter()
            .chain(&self.angular()[(n_r + 1) * n_th..])
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            class: self.class,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// `self + s·other`, with the weaker boundary class of the two.
    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        assert!(
            self.grid.same_as(&other.grid),
            "1-forms live on different grids"
        );
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| x + s * y)
            .collect();
        Self {
            grid: self.grid.clone(),
            class: weaker(self.class, other.class),
            data,
        }
    }

    /// Polar components interpolated to cell centers.
    pub fn polar_at_centers(&self) -> [Vec<f64>; 2] {
        let (n_r, n_th) = (self.grid.n_r, self.grid.n_th);
        let (rad, ang) = (self.radial(), self.angular());
        let mut ur = vec![0.0; n_r * n_th];
        let mut ut = vec![0.0; n_r * n_th];
        for i in 0..n_r {
            for j in 0..n_th {
                ur[i * n_th + j] = 0.5 * (rad[i * n_th + j] + rad[(i + 1) * n_th + j]);
                let jp = (j + 1) % n_th;
                ut[i * n_th + j] = 0.5 * (ang[(i + 1) * n_th + j] + ang[(i + 1) * n_th + jp]);
            }
        }
        [ur, ut]
    }

    /// Disk-chart components `(u₁, u₂)` interpolated to cell centers.
    pub fn cartesian_at_centers(&self) -> [Vec<f64>; 2] {
        let [ur, ut] = self.polar_at_centers();
        let n_th = self.grid.n_th;
        let mut u1 = vec![0.0; ur.len()];
        let mut u2 = vec![0.0; ur.len()];
        for idx in 0..ur.len() {
            let (s, c) = self.grid.theta_center(idx % n_th).sin_cos();
            u1[idx] = ur[idx] * c - ut[idx] * s;
            u2[idx] = ur[idx] * s + ut[idx] * c;
        }
        [u1, u2]
    }
}

fn weaker(a: BoundaryClass, b: BoundaryClass) -> BoundaryClass {
    use BoundaryClass::*;
    match (a, b) {
        (Free, _) | (_, Free) => Free,
        (ZeroOnInner, _) | (_, ZeroOnInner) => ZeroOnInner,
        _ => ZeroOnBoth,
    }
}

/// A 2-tensor at cell centers, components in the orthonormal polar frame
/// ordered `[rr, rθ, θr, θθ]` (first index is the derivative direction).
#[derive(Debug, Clone)]
pub struct TensorField {
    pub grid: Arc<AnnulusGrid>,
    pub comps: [Vec<f64>; 4],
}

impl TensorField {
    /// Components rotated to the `dY¹, dY²` basis: `[11, 12, 21, 22]`.
    pub fn cartesian(&self) -> [Vec<f64>; 4] {
        let n = self.comps[0].len();
        let n_th = self.grid.n_th;
        let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for idx in 0..n {
            let (s, c) = self.grid.theta_center(idx % n_th).sin_cos();
            let q = [[c, -s], [s, c]];
            let t = [
                [self.comps[0][idx], self.comps[1][idx]],
                [self.comps[2][idx], self.comps[3][idx]],
            ];
            for a in 0..2 {
                for b in 0..2 {
                    let mut v = 0.0;
                    for p in 0..2 {
                        for q2 in 0..2 {
                            v += q[a][p] * t[p][q2] * q[b][q2];
                        }
                    }
                    out[2 * a + b][idx] = v;
                }
            }
        }
        out
    }
}

/// Integrate a scalar density over the annulus with the midpoint rule.
pub fn integrate(grid: &AnnulusGrid, f: &ScalarField, measure: Measure) -> Result<f64> {
    if !grid.same_as(&f.grid) {
        return Err(invalid("field sampled on a different grid"));
    }
    let n_th = grid.n_th;
    let mut total = 0.0;
    match f.location {
        Location::Centers => {
            for i in 0..grid.n_r {
                let w = match measure {
                    Measure::Euclidean => grid.cell_area[i],
                    Measure::Hyperbolic => grid.cell_area[i] * grid.vw_center(i),
                };
                total += w * f.values[i * n_th..(i + 1) * n_th].iter().sum::<f64>();
            }
        }
        Location::Nodes => {
            for i in 0..=grid.n_r {
                let w = match measure {
                    Measure::Euclidean => grid.node_area[i],
                    Measure::Hyperbolic => grid.node_area[i] * grid.vw_face_r(i),
                };
                total += w * f.values[i * n_th..(i + 1) * n_th].iter().sum::<f64>();
            }
        }
    }
    Ok(total)
}

/// Write a scalar field as CSV (`r,theta,y1,y2,c1`).
pub fn write_scalar_csv(out: &mut impl Write, f: &ScalarField) -> io::Result<()> {
    let g = &f.grid;
    writeln!(out, "r,theta,y1,y2,c1")?;
    let rows = f.values.len() / g.n_th;
    for i in 0..rows {
        for j in 0..g.n_th {
            let (r, t) = match f.location {
                Location::Centers => (g.rc[i], g.theta_center(j)),
                Location::Nodes => (g.r[i], g.theta_node(j)),
            };
            write_row(out, r, t, &[f.values[i * g.n_th + j]])?;
        }
    }
    Ok(())
}

/// Write a 1-form as CSV with disk-chart components at cell centers (`…,c1,c2`).
pub fn write_one_form_csv(out: &mut impl Write, u: &OneFormField) -> io::Result<()> {
    let g = &u.grid;
    let [u1, u2] = u.cartesian_at_centers();
    writeln!(out, "r,theta,y1,y2,c1,c2")?;
    for i in 0..g.n_r {
        for j in 0..g.n_th {
            let k = i * g.n_th + j;
            write_row(out, g.rc[i], g.theta_center(j), &[u1[k], u2[k]])?;
        }
    }
    Ok(())
}

/// Write a tensor as CSV with disk-chart components `[11, 12, 21, 22]`.
pub fn write_tensor_csv(out: &mut impl Write, t: &TensorField) -> io::Result<()> {
    let g = &t.grid;
    let c = t.cartesian();
    writeln!(out, "r,theta,y1,y2,c1,c2,c3,c4")?;
    for i in 0..g.n_r {
        for j in 0..g.n_th {
            let k = i * g.n_th + j;
            write_row(
                out,
                g.rc[i],
                g.theta_center(j),
                &[c[0][k], c[1][k], c[2][k], c[3][k]],
            )?;
        }
    }
    Ok(())
}

fn write_row(out: &mut impl Write, r: f64, t: f64, comps: &[f64]) -> io::Result<()> {
    let (s, c) = t.sin_cos();
    write!(out, "{r:.16e},{t:.16e},{:.16e},{:.16e}", r * c, r * s)?;
    for v in comps {
        write!(out, ",{v:.16e}")?;
    }
    out.write_all(b"\n")
}
