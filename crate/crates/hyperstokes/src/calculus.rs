//! Discrete exterior calculus on a staggered polar grid.
//!
//! Face vectors are the flat storage of [`OneFormField`]: `n_r + 1` radial rows
//! followed by `n_r + 2` angular rows. `d` maps scalars (cell centers plus the
//! two wall circles) to faces, `curl` maps faces to nodes and `div` maps faces
//! to cells. `curl ∘ d = 0` and `div = −dᵀ` (under the face masses) hold
//! exactly.
//!
//! Inner products follow the hyperbolic metric; in two dimensions
//! `g(u,v) Vol = u·v dy`, so the L² pairing of 1-forms is Euclidean while
//! 2-forms and tensors carry the pairing weight `a²(1−r²)²/4`.

use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::mesh::{AnnulusGrid, BoundaryClass, Location, OneFormField, ScalarField, TensorField};
use crate::stencil::StencilOp;

/// Operator bundle for one grid.
#[derive(Debug, Clone)]
pub struct DiscreteCalculus {
    grid: Arc<AnnulusGrid>,
    pub(crate) div: StencilOp,
    pub(crate) curl: StencilOp,
    pub(crate) grad: StencilOp,
    pub(crate) interp: StencilOp,
    pub(crate) cov: StencilOp,
    pub(crate) rot: StencilOp,
}

impl DiscreteCalculus {
    pub fn new(grid: &Arc<AnnulusGrid>) -> Self {
        let g = grid.as_ref();
        let (n_r, n_th, dt) = (g.n_r(), g.n_th(), g.dtheta());
        let nf = 2 * n_r + 3;
        let r = g.node_radii();
        let rc = g.center_radii();
        let xa = &g.xa;
        let ang = |m: usize| n_r + 1 + m;

        let mut div = StencilOp::new(n_th, nf, n_r);
        for i in 0..n_r {
            let a = g.cell_area[i];
            let dr = r[i + 1] - r[i];
            div.push(i, i + 1, 0, dt * r[i + 1] / a);
            div.push(i, i, 0, -dt * r[i] / a);
            div.push(i, ang(i + 1), 1, dr / a);
            div.push(i, ang(i + 1), 0, -dr / a);
        }

        let mut curl = StencilOp::new(n_th, nf, n_r + 1);
        for i in 0..=n_r {
            let (lo, hi) = (xa[i], xa[i + 1]);
            let (len, area) = (g.node_len[i], g.node_area[i]);
            curl.push(i, ang(i + 1), 0, hi * dt / area);
            curl.push(i, ang(i), 0, -lo * dt / area);
            curl.push(i, i, 0, -len / area);
            curl.push(i, i, -1, len / area);
        }

        let mut grad = StencilOp::new(n_th, n_r + 2, nf);
        for i in 0..=n_r {
            grad.push(i, i + 1, 0, 1.0 / g.node_len[i]);
            grad.push(i, i, 0, -1.0 / g.node_len[i]);
        }
        for m in 0..n_r + 2 {
            grad.push(ang(m), m, 0, 1.0 / (xa[m] * dt));
            grad.push(ang(m), m, -1, -1.0 / (xa[m] * dt));
        }

        let mut interp = StencilOp::new(n_th, nf, 2 * n_r);
        for i in 0..n_r {
            interp.push(i, i, 0, 0.5);
            interp.push(i, i + 1, 0, 0.5);
            interp.push(n_r + i, ang(i + 1), 0, 0.5);
            interp.push(n_r + i, ang(i + 1), 1, 0.5);
        }

        // Covariant derivative in the orthonormal polar frame, rows [rr | rθ | θr | θθ].
        let mut cov = StencilOp::new(n_th, nf, 4 * n_r);
        for i in 0..n_r {
            let dr = r[i + 1] - r[i];
            let fp = g.slope_center[i];
            let inv_r = 1.0 / rc[i];
            let (rr, rt, tr, tt) = (i, n_r + i, 2 * n_r + i, 3 * n_r + i);
            // rr: ∂_r u_r − f′ ū_r
            cov.push(rr, i + 1, 0, 1.0 / dr - 0.5 * fp);
            cov.push(rr, i, 0, -1.0 / dr - 0.5 * fp);
            // rθ: ∂_r u_θ − f′ ū_θ, three-point difference on angular averages
            let (x0, x1, x2) = (xa[i], xa[i + 1], xa[i + 2]);
            let (h0, h1) = (x1 - x0, x2 - x1);
            let w0 = -h1 / (h0 * (h0 + h1));
            let w1 = (h1 - h0) / (h0 * h1);
            let w2 = h0 / (h1 * (h0 + h1));
            for (m, w) in [(i, w0), (i + 1, w1 - fp), (i + 2, w2)] {
                cov.push(rt, ang(m), 0, 0.5 * w);
                cov.push(rt, ang(m), 1, 0.5 * w);
            }
            // θr: (∂_θ u_r − ū_θ)/r − f′ ū_θ
            for k in [i, i + 1] {
                cov.push(tr, k, 1, 0.25 * inv_r / dt);
                cov.push(tr, k, -1, -0.25 * inv_r / dt);
            }
            let c = -0.5 * (inv_r + fp);
            cov.push(tr, ang(i + 1), 0, c);
            cov.push(tr, ang(i + 1), 1, c);
            // θθ: (∂_θ u_θ + ū_r)/r + f′ ū_r
            cov.push(tt, ang(i + 1), 1, inv_r / dt);
            cov.push(tt, ang(i + 1), 0, -inv_r / dt);
            let c = 0.5 * (inv_r + fp);
            cov.push(tt, i, 0, c);
            cov.push(tt, i + 1, 0, c);
        }

        // Rotated gradient of a node stream function: u_r = ψ_θ / r, u_θ = −ψ_r.
        let mut rot = StencilOp::new(n_th, n_r + 1, nf);
        for i in 0..=n_r {
            rot.push(i, i, 1, 1.0 / (r[i] * dt));
            rot.push(i, i, 0, -1.0 / (r[i] * dt));
        }
        for i in 0..n_r {
            let dr = r[i + 1] - r[i];
            rot.push(ang(i + 1), i + 1, 0, -1.0 / dr);
            rot.push(ang(i + 1), i, 0, 1.0 / dr);
        }

        Self {
            grid: grid.clone(),
            div,
            curl,
            grad,
            interp,
            cov,
            rot,
        }
    }

    pub fn grid(&self) -> &Arc<AnnulusGrid> {
        &self.grid
    }

    fn check(&self, u: &OneFormField) -> Result<()> {
        if self.grid.same_as(&u.grid) {
            Ok(())
        } else {
            Err(invalid("fields live on different grids"))
        }
    }

    /// Euclidean divergence `∂₁u₁ + ∂₂u₂` at cell centers.
    pub fn euclidean_div(&self, u: &OneFormField) -> Result<ScalarField> {
        self.check(u)?;
        Ok(ScalarField {
            grid: self.grid.clone(),
            location: Location::Centers,
            values: self.div.apply(&u.data),
        })
    }

    /// Gradient of a center scalar extended by wall values (`n_r + 2` rows at the angular-row radii).
    pub fn grad_extended(&self, f_ext: &[f64], class: BoundaryClass) -> OneFormField {
        OneFormField::with_data(&self.grid, class, self.grad.apply(f_ext))
    }

    /// Divergence-free field `rot ψ` from a node stream function.
    pub fn rot(&self, psi: &ScalarField) -> Result<OneFormField> {
        if psi.location != Location::Nodes || !self.grid.same_as(&psi.grid) {
            return Err(invalid(
                "stream function must be sampled at nodes of the same grid",
            ));
        }
        let boundary_zero = {
            let n = self.grid.n_th();
            let n_r = self.grid.n_r();
            psi.values[..n]
                .iter()
                .chain(&psi.values[n_r * n..])
                .all(|v| *v == 0.0)
        };
        let class = if boundary_zero {
            BoundaryClass::ZeroOnBoth
        } else {
            BoundaryClass::Free
        };
        Ok(OneFormField::with_data(
            &self.grid,
            class,
            self.rot.apply(&psi.values),
        ))
    }

    /// Per-node weights `pw · area` for `‖du‖²`.
    pub(crate) fn node_weights(&self) -> Vec<f64> {
        let g = &self.grid;
        (0..=g.n_r())
            .map(|i| g.pw_node[i] * g.node_area[i])
            .collect()
    }

    /// Per-face-row masses for the L² pairing of 1-forms.
    pub(crate) fn face_masses(&self) -> Vec<f64> {
        let g = &self.grid;
        g.mass_r.iter().chain(&g.mass_t).copied().collect()
    }

    /// Per-cell weights `area · pw` for tensors and center pairings.
    pub(crate) fn cell_weights(&self) -> Vec<f64> {
        let g = &self.grid;
        (0..g.n_r())
            .map(|i| g.cell_area[i] * g.pw_center[i])
            .collect()
    }

    /// `Σ_rows w[row] Σ_j x y`.
    pub(crate) fn weighted_dot(&self, w: &[f64], x: &[f64], y: &[f64]) -> f64 {
        let n = self.grid.n_th();
        w.iter()
            .enumerate()
            .map(|(row, &wr)| {
                if wr == 0.0 {
                    return 0.0;
                }
                let s: f64 = x[row * n..(row + 1) * n]
                    .iter()
                    .zip(&y[row * n..(row + 1) * n])
                    .map(|(a, b)| a * b)
                    .sum();
                wr * s
            })
            .sum()
    }

    pub(crate) fn scale_rows(&self, w: &[f64], x: &mut [f64]) {
        let n = self.grid.n_th();
        for (row, &wr) in w.iter().enumerate() {
            for v in &mut x[row * n..(row + 1) * n] {
                *v *= wr;
            }
        }
    }

    /// Energy form `Σ pw·curl u·curl v + α Σ mass·u·v` on raw face arrays.
    pub(crate) fn energy(&self, alpha: f64, u: &[f64], v: &[f64]) -> f64 {
        let (cu, cv) = (self.curl.apply(u), self.curl.apply(v));
        self.weighted_dot(&self.node_weights(), &cu, &cv)
            + alpha * self.weighted_dot(&self.face_masses(), u, v)
    }

    /// Dual vector of the energy form: `Cᵀ W C u + α M u` (all faces).
    pub(crate) fn energy_dual(&self, alpha: f64, u: &[f64]) -> Vec<f64> {
        let mut cu = self.curl.apply(u);
        self.scale_rows(&self.node_weights(), &mut cu);
        let mut out = self.curl.apply_transpose(&cu);
        let mut mu = u.to_vec();
        self.scale_rows(&self.face_masses(), &mut mu);
        for (o, m) in out.iter_mut().zip(&mu) {
            *o += alpha * m;
        }
        out
    }

    /// `t(θ, v, φ) = Σ area · pw · θ̄_i (∇v)_{ij} φ̄_j`, the unsymmetrized convection form.
    pub(crate) fn convect_plain(&self, th: &[f64], v: &[f64], ph: &[f64]) -> f64 {
        let n_r = self.grid.n_r();
        let n = self.grid.n_th();
        let (it, ip, kv) = (
            self.interp.apply(th),
            self.interp.apply(ph),
            self.cov.apply(v),
        );
        let cw = self.cell_weights();
        let s = n_r * n;
        let mut total = 0.0;
        for i in 0..n_r {
            let mut row = 0.0;
            for j in 0..n {
                let k = i * n + j;
                let (tr, tt, pr, pt) = (it[k], it[s + k], ip[k], ip[s + k]);
                row += tr * (kv[k] * pr + kv[s + k] * pt)
                    + tt * (kv[2 * s + k] * pr + kv[3 * s + k] * pt);
            }
            total += cw[i] * row;
        }
        total
    }

    /// Gradient of `φ ↦ b(θ, v, φ)` as a face dual vector.
    pub(crate) fn convect_dual(&self, th: &[f64], v: &[f64], skew: bool) -> Vec<f64> {
        let n_r = self.grid.n_r();
        let n = self.grid.n_th();
        let s = n_r * n;
        let it = self.interp.apply(th);
        let kv = self.cov.apply(v);
        let cw = self.cell_weights();
        // ∂/∂φ t(θ, v, φ) = Iᵀ[cw · θ̄·∇v]
        let mut a = vec![0.0; 2 * s];
        for i in 0..n_r {
            for j in 0..n {
                let k = i * n + j;
                let (tr, tt) = (it[k], it[s + k]);
                a[k] = cw[i] * (tr * kv[k] + tt * kv[2 * s + k]);
                a[s + k] = cw[i] * (tr * kv[s + k] + tt * kv[3 * s + k]);
            }
        }
        let mut out = self.interp.apply_transpose(&a);
        if skew {
            // ∂/∂φ t(θ, φ, v) = Kᵀ[cw · θ̄ ⊗ v̄]
            let iv = self.interp.apply(v);
            let mut q = vec![0.0; 4 * s];
            for i in 0..n_r {
                for j in 0..n {
                    let k = i * n + j;
                    let (tr, tt, vr, vt) = (it[k], it[s + k], iv[k], iv[s + k]);
                    q[k] = cw[i] * tr * vr;
                    q[s + k] = cw[i] * tr * vt;
                    q[2 * s + k] = cw[i] * tt * vr;
                    q[3 * s + k] = cw[i] * tt * vt;
                }
            }
            let kt = self.cov.apply_transpose(&q);
            for (o, x) in out.iter_mut().zip(&kt) {
                *o = 0.5 * (*o - x);
            }
        }
        out
    }
}

impl DiscreteCalculus {
    /// Gradient of `θ ↦ b(θ, v, φ)` (or of `t` when `skew` is false).
    pub(crate) fn convect_dual_first(&self, v: &[f64], ph: &[f64], skew: bool) -> Vec<f64> {
        let plain = |v: &[f64], ph: &[f64]| {
            let s = self.grid.n_r() * self.grid.n_th();
            let n = self.grid.n_th();
            let (kv, ip) = (self.cov.apply(v), self.interp.apply(ph));
            let cw = self.cell_weights();
            let mut a = vec![0.0; 2 * s];
            for k in 0..s {
                let (pr, pt) = (ip[k], ip[s + k]);
                a[k] = cw[k / n] * (kv[k] * pr + kv[s + k] * pt);
                a[s + k] = cw[k / n] * (kv[2 * s + k] * pr + kv[3 * s + k] * pt);
            }
            self.interp.apply_transpose(&a)
        };
        let mut out = plain(v, ph);
        if skew {
            for (o, x) in out.iter_mut().zip(plain(ph, v)) {
                *o = 0.5 * (*o - x);
            }
        }
        out
    }
}

/// Which inner product [`inner`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerProductKind {
    L2,
    H10Energy,
    /// `∫ g(u,u) g(v,v) Vol`; for `u = v` this is `‖u‖⁴_{L⁴}`.
    L4Norm,
}

/// Norms of a 1-form in the hyperbolic metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub l4: f64,
    /// `(∫ g(∇u, ∇u) Vol)^{1/2}` with the finite-difference covariant derivative.
    pub h1: f64,
}

fn same_grid(u: &OneFormField, v: &OneFormField) -> Result<()> {
    if u.grid.same_as(&v.grid) {
        Ok(())
    } else {
        Err(invalid("fields live on different grids"))
    }
}

/// Pointwise metric pairing `g(u,v) = pw · (u₁v₁ + u₂v₂)` at cell centers.
pub fn pairing(u: &OneFormField, v: &OneFormField) -> Result<ScalarField> {
    same_grid(u, v)?;
    let dc = DiscreteCalculus::new(&u.grid);
    let (iu, iv) = (dc.interp.apply(&u.data), dc.interp.apply(&v.data));
    let g = &u.grid;
    let n = g.n_th();
    let s = g.n_r() * n;
    let values = (0..s)
        .map(|k| g.pw_center[k / n] * (iu[k] * iv[k] + iu[s + k] * iv[s + k]))
        .collect();
    Ok(ScalarField {
        grid: g.clone(),
        location: Location::Centers,
        values,
    })
}

/// `d*u` at cell centers; `−d*u = pw · (∂₁u₁ + ∂₂u₂)`.
pub fn codifferential(u: &OneFormField) -> ScalarField {
    let dc = DiscreteCalculus::new(&u.grid);
    let mut values = dc.div.apply(&u.data);
    let n = u.grid.n_th();
    for (k, v) in values.iter_mut().enumerate() {
        *v *= -u.grid.pw_center[k / n];
    }
    ScalarField {
        grid: u.grid.clone(),
        location: Location::Centers,
        values,
    }
}

/// Wall values of a center scalar by linear extrapolation, as `n_r + 2` rows.
pub fn extend_to_walls(f: &ScalarField) -> Result<Vec<f64>> {
    if f.location != Location::Centers {
        return Err(invalid("expected a cell-center scalar"));
    }
    let g = &f.grid;
    let (n_r, n) = (g.n_r(), g.n_th());
    let xa = &g.xa;
    let mut ext = Vec::with_capacity((n_r + 2) * n);
    let t_in = (xa[0] - xa[1]) / (xa[2] - xa[1]);
    let t_out = (xa[n_r + 1] - xa[n_r]) / (xa[n_r] - xa[n_r - 1]);
    for j in 0..n {
        ext.push(f.at(0, j) + t_in * (f.at(1, j) - f.at(0, j)));
    }
    ext.extend_from_slice(&f.values);
    for j in 0..n {
        ext.push(f.at(n_r - 1, j) + t_out * (f.at(n_r - 1, j) - f.at(n_r - 2, j)));
    }
    Ok(ext)
}

/// Gradient 1-form `df`; wall values come from linear extrapolation.
pub fn ext_derivative(f: &ScalarField) -> Result<OneFormField> {
    let ext = extend_to_walls(f)?;
    Ok(DiscreteCalculus::new(&f.grid).grad_extended(&ext, BoundaryClass::Free))
}

/// Euclidean vorticity density `∂₁u₂ − ∂₂u₁` at nodes.
pub fn vorticity(u: &OneFormField) -> ScalarField {
    let dc = DiscreteCalculus::new(&u.grid);
    ScalarField {
        grid: u.grid.clone(),
        location: Location::Nodes,
        values: dc.curl.apply(&u.data),
    }
}

/// Covariant derivative `(∇u)_{ij} = ∇_i u_j` at cell centers.
pub fn covariant_derivative(u: &OneFormField) -> TensorField {
    let dc = DiscreteCalculus::new(&u.grid);
    tensor_from_rows(&u.grid, dc.cov.apply(&u.data))
}

/// Symmetric part `Def u = ½(∇_i u_j + ∇_j u_i)`.
pub fn deformation(u: &OneFormField) -> TensorField {
    let mut t = covariant_derivative(u);
    for k in 0..t.comps[1].len() {
        let m = 0.5 * (t.comps[1][k] + t.comps[2][k]);
        t.comps[1][k] = m;
        t.comps[2][k] = m;
    }
    t
}

fn tensor_from_rows(grid: &Arc<AnnulusGrid>, rows: Vec<f64>) -> TensorField {
    let s = grid.n_r() * grid.n_th();
    let comps = [
        rows[..s].to_vec(),
        rows[s..2 * s].to_vec(),
        rows[2 * s..3 * s].to_vec(),
        rows[3 * s..].to_vec(),
    ];
    TensorField {
        grid: grid.clone(),
        comps,
    }
}

/// `∫ g(S, T) Vol` for tensors at centers.
pub fn tensor_inner(s: &TensorField, t: &TensorField) -> f64 {
    let g = &s.grid;
    let n = g.n_th();
    let mut total = 0.0;
    for i in 0..g.n_r() {
        let w = g.cell_area[i] * g.pw_center[i];
        let mut row = 0.0;
        for c in 0..4 {
            row += s.comps[c][i * n..(i + 1) * n]
                .iter()
                .zip(&t.comps[c][i * n..(i + 1) * n])
                .map(|(a, b)| a * b)
                .sum::<f64>();
        }
        total += w * row;
    }
    total
}

/// `∫ g(u,v) Vol`, accumulated with the Euclidean masses.
pub fn l2_inner(u: &OneFormField, v: &OneFormField) -> Result<f64> {
    same_grid(u, v)?;
    let dc = DiscreteCalculus::new(&u.grid);
    Ok(dc.weighted_dot(&dc.face_masses(), &u.data, &v.data))
}

/// `∫ g(u,v) Vol`, accumulated as `pw · vw · mass`; agrees with [`l2_inner`] to rounding.
pub fn l2_inner_hyperbolic(u: &OneFormField, v: &OneFormField) -> Result<f64> {
    same_grid(u, v)?;
    let g = &u.grid;
    let n_r = g.n_r();
    let mut w = Vec::with_capacity(2 * n_r + 3);
    for i in 0..=n_r {
        w.push(g.pw_face_r[i] * g.vw_face_r(i) * g.mass_r[i]);
    }
    for m in 0..n_r + 2 {
        w.push(g.pw_face_t[m] * g.vw_face_t(m) * g.mass_t[m]);
    }
    Ok(DiscreteCalculus::new(g).weighted_dot(&w, &u.data, &v.data))
}

/// `‖du‖²_{L²} = ∫ g(du, du) Vol`.
pub fn vorticity_norm_sq(u: &OneFormField) -> f64 {
    let dc = DiscreteCalculus::new(&u.grid);
    let c = dc.curl.apply(&u.data);
    dc.weighted_dot(&dc.node_weights(), &c, &c)
}

/// `‖d*u‖²_{L²}`.
pub fn codifferential_norm_sq(u: &OneFormField) -> f64 {
    let dc = DiscreteCalculus::new(&u.grid);
    let d = dc.div.apply(&u.data);
    dc.weighted_dot(&dc.cell_weights(), &d, &d)
}

/// The energy inner product `((u,v)) = ∫ g(du,dv) Vol + 2a² ∫ g(u,v) Vol` on zero-boundary fields.
pub fn h10_inner(u: &OneFormField, v: &OneFormField) -> Result<f64> {
    same_grid(u, v)?;
    for f in [u, v] {
        if f.class != BoundaryClass::ZeroOnBoth {
            return Err(invalid(
                "the energy inner product needs fields vanishing on both boundary circles",
            ));
        }
    }
    let a = u.grid.spec().a;
    Ok(DiscreteCalculus::new(&u.grid).energy(2.0 * a * a, &u.data, &v.data))
}

/// `‖∇u‖²` through the Weitzenböck identity `‖du‖² + ‖d*u‖² + a²‖u‖²` (zero-boundary fields).
pub fn grad_norm_sq_weitzenbock(u: &OneFormField) -> f64 {
    let a = u.grid.spec().a;
    let dc = DiscreteCalculus::new(&u.grid);
    dc.energy(a * a, &u.data, &u.data) + codifferential_norm_sq(u)
}

pub fn inner(kind: InnerProductKind, u: &OneFormField, v: &OneFormField) -> Result<f64> {
    match kind {
        InnerProductKind::L2 => l2_inner(u, v),
        InnerProductKind::H10Energy => h10_inner(u, v),
        InnerProductKind::L4Norm => {
            same_grid(u, v)?;
            let (gu, gv) = (pairing(u, u)?, pairing(v, v)?);
            let g = &u.grid;
            let n = g.n_th();
            Ok(gu
                .values
                .iter()
                .zip(&gv.values)
                .enumerate()
                .map(|(k, (x, y))| g.cell_area[k / n] * g.vw_center(k / n) * x * y)
                .sum())
        }
    }
}

pub fn norms(u: &OneFormField) -> Norms {
    let l2 = l2_inner(u, u).unwrap_or(0.0).sqrt();
    let l4 = inner(InnerProductKind::L4Norm, u, u)
        .unwrap_or(0.0)
        .powf(0.25);
    let k = covariant_derivative(u);
    let h1 = tensor_inner(&k, &k).sqrt();
    Norms { l2, l4, h1 }
}

/// Skew-symmetrized convection form `b(θ,v,φ) = ½[t(θ,v,φ) − t(θ,φ,v)]`, `t = ∫ g(∇_θ v, φ) Vol`.
pub fn trilinear(th: &OneFormField, v: &OneFormField, ph: &OneFormField) -> Result<f64> {
    same_grid(th, v)?;
    same_grid(th, ph)?;
    let dc = DiscreteCalculus::new(&th.grid);
    Ok(0.5
        * (dc.convect_plain(&th.data, &v.data, &ph.data)
            - dc.convect_plain(&th.data, &ph.data, &v.data)))
}

/// The unsymmetrized `t(θ,v,φ) = ∫ g(∇_θ v, φ) Vol`.
pub fn trilinear_plain(th: &OneFormField, v: &OneFormField, ph: &OneFormField) -> Result<f64> {
    same_grid(th, v)?;
    same_grid(th, ph)?;
    Ok(DiscreteCalculus::new(&th.grid).convect_plain(&th.data, &v.data, &ph.data))
}
