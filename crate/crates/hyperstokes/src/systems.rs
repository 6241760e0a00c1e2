//! Factored linear systems on interior faces: the energy form, the Euclidean
//! Dirichlet form, and the constrained saddle-point system.

use rustfft::num_complex::Complex64;

use crate::calculus::DiscreteCalculus;
use crate::error::Result;
use crate::modes::{DofMap, ModeAssembler, ModeFactors};
use crate::stencil::StencilOp;

const FACES: usize = 0;
const CELLS: usize = 1;

/// Symmetric form on face arrays.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum FaceForm {
    /// `Σ pw·curl u·curl v + α Σ mass·u·v`.
    Energy { alpha: f64 },
    /// `Σ area·curl u·curl v + Σ area·div u·div v`: the Euclidean `∫|∇w♯|²` on zero-boundary fields.
    EuclideanDirichlet,
}

pub(crate) fn interior_face_rows(n_r: usize) -> Vec<usize> {
    (1..n_r).chain((1..=n_r).map(|m| n_r + 1 + m)).collect()
}

fn face_entries(dc: &DiscreteCalculus) -> Vec<(usize, usize, f64)> {
    let g = dc.grid();
    let n_r = g.n_r();
    let r = g.node_radii();
    let mut e: Vec<(usize, usize, f64)> = (1..n_r).map(|i| (FACES, i, r[i])).collect();
    e.extend((1..=n_r).map(|m| (FACES, n_r + 1 + m, g.xa[m])));
    e
}

fn add_gram(asm: &mut ModeAssembler, op: &StencilOp, weights: &[f64], k: usize, block: usize) {
    for (row, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let sym = op.symbol_row(row, k);
        for &(p, sp) in &sym {
            for &(q, sq) in &sym {
                asm.add(block, p, block, q, sp.conj() * sq * w);
            }
        }
    }
}

fn add_form(asm: &mut ModeAssembler, dc: &DiscreteCalculus, form: FaceForm, k: usize) {
    let g = dc.grid();
    match form {
        FaceForm::Energy { alpha } => {
            add_gram(asm, &dc.curl, &dc.node_weights(), k, FACES);
            for (row, m) in dc.face_masses().into_iter().enumerate() {
                asm.add(FACES, row, FACES, row, Complex64::new(alpha * m, 0.0));
            }
        }
        FaceForm::EuclideanDirichlet => {
            add_gram(asm, &dc.curl, &g.node_area, k, FACES);
            add_gram(asm, &dc.div, &g.cell_area, k, FACES);
        }
    }
}

/// Apply a face form to a raw face array (all rows).
pub(crate) fn apply_form(dc: &DiscreteCalculus, form: FaceForm, u: &[f64]) -> Vec<f64> {
    match form {
        FaceForm::Energy { alpha } => dc.energy_dual(alpha, u),
        FaceForm::EuclideanDirichlet => {
            let g = dc.grid();
            let mut cu = dc.curl.apply(u);
            dc.scale_rows(&g.node_area, &mut cu);
            let mut out = dc.curl.apply_transpose(&cu);
            let mut du = dc.div.apply(u);
            dc.scale_rows(&g.cell_area, &mut du);
            for (o, x) in out.iter_mut().zip(dc.div.apply_transpose(&du)) {
                *o += x;
            }
            out
        }
    }
}

/// Zero every row that is not an interior face.
pub(crate) fn restrict_interior(n_r: usize, n_th: usize, v: &mut [f64]) {
    let keep = interior_face_rows(n_r);
    let mut mask = vec![false; 2 * n_r + 3];
    for r in keep {
        mask[r] = true;
    }
    for (row, m) in mask.iter().enumerate() {
        if !m {
            v[row * n_th..(row + 1) * n_th].fill(0.0);
        }
    }
}

/// `A⁻¹` for a face form restricted to interior faces.
pub(crate) struct FormSolver {
    factors: ModeFactors,
}

impl FormSolver {
    pub fn new(dc: &DiscreteCalculus, form: FaceForm) -> Result<Self> {
        let g = dc.grid();
        let dofs = DofMap::new(vec![2 * g.n_r() + 3], face_entries(dc));
        let factors = ModeFactors::build(g.n_th(), dofs.clone(), dofs, |k, asm| {
            add_form(asm, dc, form, k)
        })?;
        Ok(Self { factors })
    }

    /// Solve `A x = f` on interior faces; boundary rows of `f` are ignored and of `x` zero.
    pub fn solve(&self, f: &[f64]) -> Vec<f64> {
        self.factors.solve(&[f]).swap_remove(0)
    }
}

/// `[[A, −Bᵀ], [−B, 0]]` with `B = diag(cell area) · div` on interior faces.
pub(crate) struct SaddleSolver {
    factors: ModeFactors,
}

impl SaddleSolver {
    pub fn new(dc: &DiscreteCalculus, form: FaceForm) -> Result<Self> {
        let g = dc.grid();
        let n_r = g.n_r();
        let mut entries = face_entries(dc);
        entries.extend((0..n_r).map(|c| (CELLS, c, g.center_radii()[c])));
        let dofs = DofMap::new(vec![2 * n_r + 3, n_r], entries);
        let dofs0 = dofs.without(CELLS, 0);
        let factors = ModeFactors::build(g.n_th(), dofs, dofs0, |k, asm| {
            add_form(asm, dc, form, k);
            for c in 0..n_r {
                let a = g.cell_area[c];
                for (f, s) in dc.div.symbol_row(c, k) {
                    let b = s * a;
                    asm.add(CELLS, c, FACES, f, -b);
                    asm.add(FACES, f, CELLS, c, -b.conj());
                }
            }
        })?;
        Ok(Self { factors })
    }

    /// Solve `A u − Bᵀ p = f`, `B u = g`; returns `(u, p)`. `p` is fixed by the mode-0
    /// value of cell row 0 and should be renormalized by the caller.
    pub fn solve(&self, f: &[f64], g: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let neg: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut out = self.factors.solve(&[f, &neg]);
        let p = out.pop().unwrap_or_default();
        let u = out.pop().unwrap_or_default();
        (u, p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypgeom::DomainSpec;
    use crate::mesh::AnnulusGrid;

    fn dc() -> DiscreteCalculus {
        let g = AnnulusGrid::build(DomainSpec::new(1.0, 1.0).unwrap(), 1.0, 12.0, 64, 32).unwrap();
        DiscreteCalculus::new(&g)
    }

    fn pseudo_random(len: usize, seed: u64) -> Vec<f64> {
        let mut x = seed;
        (0..len)
            .map(|_| {
                x = x
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                ((x >> 11) as f64 / (1u64 << 53) as f64) - 0.5
            })
            .collect()
    }

    #[test]
    fn form_solver_inverts_form() {
        let dc = dc();
        let g = dc.grid().clone();
        let (n_r, n) = (g.n_r(), g.n_th());
        for form in [
            FaceForm::Energy { alpha: 2.0 },
            FaceForm::EuclideanDirichlet,
        ] {
            let mut x = pseudo_random((2 * n_r + 3) * n, 7);
            restrict_interior(n_r, n, &mut x);
            let mut f = apply_form(&dc, form, &x);
            restrict_interior(n_r, n, &mut f);
            let y = FormSolver::new(&dc, form).unwrap().solve(&f);
            let err = x
                .iter()
                .zip(&y)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(err < 1e-8, "{form:?}: {err}");
        }
    }

    #[test]
    fn saddle_solution_satisfies_both_rows() {
        let dc = dc();
        let g = dc.grid().clone();
        let (n_r, n) = (g.n_r(), g.n_th());
        let form = FaceForm::Energy { alpha: 2.0 };
        let mut f = pseudo_random((2 * n_r + 3) * n, 3);
        restrict_interior(n_r, n, &mut f);
        let mut gc = pseudo_random(n_r * n, 5);
        // compatible constraint data: zero total
        let tot: f64 = gc.iter().sum::<f64>() / gc.len() as f64;
        for v in &mut gc {
            *v -= tot;
        }
        let (u, p) = SaddleSolver::new(&dc, form).unwrap().solve(&f, &gc);
        let mut bu = dc.div.apply(&u);
        dc.scale_rows(&g.cell_area, &mut bu);
        let err_c = bu
            .iter()
            .zip(&gc)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err_c < 1e-9, "{err_c}");
        let mut ap = p.clone();
        dc.scale_rows(&g.cell_area, &mut ap);
        let bt = dc.div.apply_transpose(&ap);
        let mut r: Vec<f64> = apply_form(&dc, form, &u)
            .iter()
            .zip(&bt)
            .zip(&f)
            .map(|((a, b), c)| a - b - c)
            .collect();
        restrict_interior(n_r, n, &mut r);
        let err_m = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(err_m < 1e-9, "{err_m}");
    }
}
