//! Two-parameter resolvent family `{R(t,s)}` on a time grid.
//!
//! For each base time `s = τ_j` the family solves, in `t`,
//!
//! ```text
//! ∂²R/∂t²(t,s) = A(t) R(t,s) + ∫ₛᵗ ζ(t,τ) R(τ,s) dτ,
//! R(s,s) = 0,   ∂R/∂t(t,s)|_{t=s} = I,
//! ```
//!
//! and the s-derivative `∂R/∂s` solves the same equation with initial data
//! `∂R/∂s(s,s) = -I`, `∂²R/∂t∂s|_{t=s} = 0`. (Differentiating the defining
//! identities gives exactly those data: the kernel boundary term drops out
//! because `R(s,s) = 0`, and `∂²R/∂t∂s|_{t=s} = -∂²R/∂t²|_{t=s} = -A(s)·0`.)
//!
//! Time stepping is an explicit central-difference (Störmer) recurrence with
//! trapezoidal treatment of the memory integral; both pieces are second
//! order. On a pure oscillator the recurrence has no amplitude drift, only
//! an `O(h²)` phase error, which keeps downstream quadratures (Gramian,
//! convolutions) accurate at desk-scale steps.
//!
//! Both `R` and `∂R/∂s` are stored densely on the lower triangle
//! `{(i,j) : i ≥ j}` of node pairs, `O(K²M²)` floats. That is acceptable at
//! desk scale and the Gramian and mild-solution convolutions need whole rows
//! anyway. Note the family is *not* assumed to satisfy any cocycle identity
//! `R(t,s) = R(t,r)R(r,s)` — second-order problems do not have one — and no
//! such property is used or checked.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::problem::{spectral_norm, OperatorStructure, ProblemSpec};

/// Entry cap used to detect a blow-up of the explicit stepper.
pub const NORM_CAP: f64 = 1e12;

/// `R(τ_i, τ_j)` and `∂R/∂s(τ_i, τ_j)` for all node pairs `i ≥ j`.
pub struct ResolventGrid {
    grid: TimeGrid,
    dim: usize,
    structure: OperatorStructure,
    /// Lower-triangular blocks of R, row-major `dim×dim` each, block
    /// `(i, j)` at offset `(i(i+1)/2 + j)·dim²`.
    r: Vec<f64>,
    /// Same layout for ∂R/∂s.
    dsr: Vec<f64>,
    scheme_order: u32,
}

/// Sampled operator-norm constants of a built family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolventBounds {
    /// `max ‖R(τ_i, τ_j)‖` over stored node pairs.
    pub m1: f64,
    /// `max ‖∂R/∂s(τ_i, τ_j)‖`.
    pub m2: f64,
    /// Largest forward difference quotient `‖R(τ_{i+1},τ_j) - R(τ_i,τ_j)‖/Δτ`.
    pub lr: f64,
    /// Same quotient for `∂R/∂s`.
    pub mr: f64,
    /// Number of node pairs sampled.
    pub node_pairs: usize,
}

#[inline]
fn pair_index(i: usize, j: usize) -> usize {
    debug_assert!(i >= j);
    i * (i + 1) / 2 + j
}

/// `dst += scale · a · b` for row-major `dim×dim` blocks.
#[inline]
fn mat_mul_acc(dst: &mut [f64], a: &[f64], b: &[f64], dim: usize, scale: f64) {
    for i in 0..dim {
        for k in 0..dim {
            let aik = a[i * dim + k];
            if aik == 0.0 {
                continue;
            }
            let f = scale * aik;
            let b_row = &b[k * dim..(k + 1) * dim];
            let d_row = &mut dst[i * dim..(i + 1) * dim];
            for (d, &bv) in d_row.iter_mut().zip(b_row) {
                *d += f * bv;
            }
        }
    }
}

/// Trapezoid weight of node `k` on the node range `[j, n]`: half the span
/// of the panels adjacent to `k`, truncated at the range ends.
#[inline]
fn trapezoid_weight(nodes: &[f64], j: usize, n: usize, k: usize) -> f64 {
    let lo = if k == j { nodes[j] } else { nodes[k - 1] };
    let hi = if k == n { nodes[n] } else { nodes[k + 1] };
    0.5 * (hi - lo)
}

/// Scalar triangle integration: one mode of a diagonal problem, or the
/// whole problem when `dim == 1` after extraction.
///
/// `a[n]` is the diagonal entry of `A(τ_n)`, `z` (when present) the diagonal
/// kernel entry per stored pair. `out_r`/`out_d` receive the scalar values
/// of R and ∂R/∂s per pair.
fn integrate_triangle_scalar(
    nodes: &[f64],
    a: &[f64],
    z: Option<&[f64]>,
    out_r: &mut [f64],
    out_d: &mut [f64],
) -> std::result::Result<(), (f64, f64)> {
    let n_nodes = nodes.len();
    for j in 0..n_nodes {
        out_r[pair_index(j, j)] = 0.0;
        out_d[pair_index(j, j)] = -1.0;
        if j + 1 >= n_nodes {
            continue;
        }
        let h0 = nodes[j + 1] - nodes[j];
        out_r[pair_index(j + 1, j)] = h0 + h0 * h0 * h0 / 6.0 * a[j];
        out_d[pair_index(j + 1, j)] = -1.0 - 0.5 * h0 * h0 * a[j];
        for n in (j + 1)..(n_nodes - 1) {
            let h_prev = nodes[n] - nodes[n - 1];
            let h_next = nodes[n + 1] - nodes[n];
            let ratio = h_next / h_prev;
            let fac = 0.5 * h_next * (h_next + h_prev);
            let (mut f_r, mut f_d) = (
                a[n] * out_r[pair_index(n, j)],
                a[n] * out_d[pair_index(n, j)],
            );
            if let Some(z) = z {
                let row = n * (n + 1) / 2;
                let mut g_r = 0.0;
                let mut g_d = 0.0;
                for k in j..=n {
                    let w = trapezoid_weight(nodes, j, n, k);
                    let zv = z[row + k];
                    let col = pair_index(k, j);
                    g_r += w * zv * out_r[col];
                    g_d += w * zv * out_d[col];
                }
                f_r += g_r;
                f_d += g_d;
            }
            let r_n = out_r[pair_index(n, j)];
            let r_p = out_r[pair_index(n - 1, j)];
            let d_n = out_d[pair_index(n, j)];
            let d_p = out_d[pair_index(n - 1, j)];
            let r_next = r_n + (r_n - r_p) * ratio + f_r * fac;
            let d_next = d_n + (d_n - d_p) * ratio + f_d * fac;
            if !(r_next.abs() <= NORM_CAP) || !(d_next.abs() <= NORM_CAP) {
                return Err((nodes[n + 1], nodes[j]));
            }
            out_r[pair_index(n + 1, j)] = r_next;
            out_d[pair_index(n + 1, j)] = d_next;
        }
    }
    Ok(())
}

/// Dense-block column integration for base index `j`, writing into the
/// triangle `data`. `init` fills the blocks at `(j,j)` and `(j+1,j)`.
#[allow(clippy::too_many_arguments)]
fn integrate_column_dense(
    data: &mut [f64],
    j: usize,
    nodes: &[f64],
    dim: usize,
    a_tab: &[f64],
    z_tab: Option<&[f64]>,
    f_buf: &mut [f64],
) -> std::result::Result<(), (f64, f64)> {
    let n_nodes = nodes.len();
    let blk = dim * dim;
    for n in (j + 1)..(n_nodes - 1) {
        let h_prev = nodes[n] - nodes[n - 1];
        let h_next = nodes[n + 1] - nodes[n];
        let ratio = h_next / h_prev;
        let fac = 0.5 * h_next * (h_next + h_prev);

        f_buf.fill(0.0);
        {
            let y_n = &data[pair_index(n, j) * blk..pair_index(n, j) * blk + blk];
            mat_mul_acc(f_buf, &a_tab[n * blk..(n + 1) * blk], y_n, dim, 1.0);
        }
        if let Some(z_tab) = z_tab {
            let row = n * (n + 1) / 2;
            for k in j..=n {
                let w = trapezoid_weight(nodes, j, n, k);
                let z_blk = &z_tab[(row + k) * blk..(row + k + 1) * blk];
                let y_k = &data[pair_index(k, j) * blk..pair_index(k, j) * blk + blk];
                mat_mul_acc(f_buf, z_blk, y_k, dim, w);
            }
        }

        let write_off = pair_index(n + 1, j) * blk;
        let (before, after) = data.split_at_mut(write_off);
        let y_n = &before[pair_index(n, j) * blk..pair_index(n, j) * blk + blk];
        let y_p = &before[pair_index(n - 1, j) * blk..pair_index(n - 1, j) * blk + blk];
        let dst = &mut after[..blk];
        for idx in 0..blk {
            let v = y_n[idx] + (y_n[idx] - y_p[idx]) * ratio + f_buf[idx] * fac;
            if !(v.abs() <= NORM_CAP) {
                return Err((nodes[n + 1], nodes[j]));
            }
            dst[idx] = v;
        }
    }
    Ok(())
}

/// Integrate the defining second-order Volterra IVPs of the resolvent family
/// and its s-derivative for every base node of `grid`.
///
/// Diagonal-structured specs run one scalar recurrence per mode; the dense
/// path handles arbitrary operators. Blow-up past [`NORM_CAP`] reports the
/// offending `(t, s)` and advises grid refinement.
pub fn build_resolvent_grid(spec: &ProblemSpec, grid: &TimeGrid) -> Result<ResolventGrid> {
    let dim = spec.state_dim;
    if dim == 0 {
        return Err(Error::Domain("state dimension must be at least 1".into()));
    }
    if (grid.horizon() - spec.horizon).abs() > 1e-12 * spec.horizon.max(1.0) {
        return Err(Error::Domain(format!(
            "grid horizon {} does not match spec horizon {}",
            grid.horizon(),
            spec.horizon
        )));
    }
    let nodes = grid.nodes();
    let n_nodes = nodes.len();
    let blk = dim * dim;
    let pairs = n_nodes * (n_nodes + 1) / 2;

    let mut res = ResolventGrid {
        grid: grid.clone(),
        dim,
        structure: spec.structure,
        r: vec![0.0; pairs * blk],
        dsr: vec![0.0; pairs * blk],
        scheme_order: 2,
    };

    match spec.structure {
        OperatorStructure::Diagonal => {
            // Tabulate diagonals once, then run modes independently.
            let mut a_diag = vec![0.0; n_nodes * dim];
            for (n, &t) in nodes.iter().enumerate() {
                let a = (spec.a_op)(t);
                check_finite_op(&a, dim, "a_op", t, t)?;
                for m in 0..dim {
                    a_diag[n * dim + m] = a[(m, m)];
                }
            }
            let z_diag = match &spec.kernel {
                Some(kernel) => {
                    let mut z = vec![0.0; pairs * dim];
                    for i in 0..n_nodes {
                        for j in 0..=i {
                            let zm = kernel(nodes[i], nodes[j]);
                            check_finite_op(&zm, dim, "kernel", nodes[i], nodes[j])?;
                            for m in 0..dim {
                                z[pair_index(i, j) * dim + m] = zm[(m, m)];
                            }
                        }
                    }
                    Some(z)
                }
                None => None,
            };
            let mut a_mode = vec![0.0; n_nodes];
            let mut z_mode = z_diag.as_ref().map(|_| vec![0.0; pairs]);
            let mut r_mode = vec![0.0; pairs];
            let mut d_mode = vec![0.0; pairs];
            for m in 0..dim {
                for n in 0..n_nodes {
                    a_mode[n] = a_diag[n * dim + m];
                }
                if let (Some(z), Some(zm)) = (&z_diag, z_mode.as_mut()) {
                    for p in 0..pairs {
                        zm[p] = z[p * dim + m];
                    }
                }
                integrate_triangle_scalar(
                    nodes,
                    &a_mode,
                    z_mode.as_deref(),
                    &mut r_mode,
                    &mut d_mode,
                )
                .map_err(|(t, s)| Error::Instability {
                    t,
                    s,
                    cap: NORM_CAP,
                })?;
                for p in 0..pairs {
                    res.r[p * blk + m * dim + m] = r_mode[p];
                    res.dsr[p * blk + m * dim + m] = d_mode[p];
                }
            }
        }
        OperatorStructure::Dense => {
            let mut a_tab = vec![0.0; n_nodes * blk];
            for (n, &t) in nodes.iter().enumerate() {
                let a = (spec.a_op)(t);
                check_finite_op(&a, dim, "a_op", t, t)?;
                for r_i in 0..dim {
                    for c in 0..dim {
                        a_tab[n * blk + r_i * dim + c] = a[(r_i, c)];
                    }
                }
            }
            let z_tab = match &spec.kernel {
                Some(kernel) => {
                    let mut z = vec![0.0; pairs * blk];
                    for i in 0..n_nodes {
                        for j in 0..=i {
                            let zm = kernel(nodes[i], nodes[j]);
                            check_finite_op(&zm, dim, "kernel", nodes[i], nodes[j])?;
                            let off = pair_index(i, j) * blk;
                            for r_i in 0..dim {
                                for c in 0..dim {
                                    z[off + r_i * dim + c] = zm[(r_i, c)];
                                }
                            }
                        }
                    }
                    Some(z)
                }
                None => None,
            };

            let mut f_buf = vec![0.0; blk];
            for j in 0..n_nodes {
                // R(j,j) = 0 is already in place; set ∂R/∂s(j,j) = -I.
                let d0 = pair_index(j, j) * blk;
                for m in 0..dim {
                    res.dsr[d0 + m * dim + m] = -1.0;
                }
                if j + 1 >= n_nodes {
                    continue;
                }
                let h0 = nodes[j + 1] - nodes[j];
                let r1 = pair_index(j + 1, j) * blk;
                for r_i in 0..dim {
                    for c in 0..dim {
                        let a_jc = a_tab[j * blk + r_i * dim + c];
                        let eye = if r_i == c { 1.0 } else { 0.0 };
                        res.r[r1 + r_i * dim + c] = h0 * eye + h0 * h0 * h0 / 6.0 * a_jc;
                        res.dsr[r1 + r_i * dim + c] = -eye - 0.5 * h0 * h0 * a_jc;
                    }
                }
                integrate_column_dense(
                    &mut res.r,
                    j,
                    nodes,
                    dim,
                    &a_tab,
                    z_tab.as_deref(),
                    &mut f_buf,
                )
                .map_err(|(t, s)| Error::Instability {
                    t,
                    s,
                    cap: NORM_CAP,
                })?;
                integrate_column_dense(
                    &mut res.dsr,
                    j,
                    nodes,
                    dim,
                    &a_tab,
                    z_tab.as_deref(),
                    &mut f_buf,
                )
                .map_err(|(t, s)| Error::Instability {
                    t,
                    s,
                    cap: NORM_CAP,
                })?;
            }
        }
    }
    Ok(res)
}

fn check_finite_op(m: &DMatrix<f64>, dim: usize, name: &str, t: f64, s: f64) -> Result<()> {
    if m.nrows() != dim || m.ncols() != dim {
        return Err(Error::Domain(format!(
            "{name} returned {}x{} at (t,s) = ({t},{s}), expected {dim}x{dim}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("{name} at (t,s) = ({t},{s})")));
    }
    Ok(())
}

impl ResolventGrid {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scheme_order(&self) -> u32 {
        self.scheme_order
    }

    pub fn structure(&self) -> OperatorStructure {
        self.structure
    }

    #[inline]
    pub(crate) fn r_block(&self, i: usize, j: usize) -> &[f64] {
        let blk = self.dim * self.dim;
        &self.r[pair_index(i, j) * blk..(pair_index(i, j) + 1) * blk]
    }

    #[inline]
    pub(crate) fn ds_r_block(&self, i: usize, j: usize) -> &[f64] {
        let blk = self.dim * self.dim;
        &self.dsr[pair_index(i, j) * blk..(pair_index(i, j) + 1) * blk]
    }

    pub(crate) fn raw_r(&self) -> &[f64] {
        &self.r
    }

    pub(crate) fn raw_ds_r(&self) -> &[f64] {
        &self.dsr
    }

    pub(crate) fn from_raw(
        grid: TimeGrid,
        dim: usize,
        structure: OperatorStructure,
        r: Vec<f64>,
        dsr: Vec<f64>,
    ) -> Self {
        ResolventGrid {
            grid,
            dim,
            structure,
            r,
            dsr,
            scheme_order: 2,
        }
    }

    /// Stored matrix `R(τ_i, τ_j)`.
    pub fn r_node(&self, i: usize, j: usize) -> DMatrix<f64> {
        block_to_matrix(self.r_block(i, j), self.dim)
    }

    /// Stored matrix `∂R/∂s(τ_i, τ_j)`.
    pub fn ds_r_node(&self, i: usize, j: usize) -> DMatrix<f64> {
        block_to_matrix(self.ds_r_block(i, j), self.dim)
    }

    /// Bilinear interpolation of `R` at `(t, s)`, exact at stored nodes.
    pub fn eval_r(&self, t: f64, s: f64) -> Result<DMatrix<f64>> {
        self.eval(t, s, true)
    }

    /// Bilinear interpolation of `∂R/∂s` at `(t, s)`, exact at stored nodes.
    pub fn eval_ds_r(&self, t: f64, s: f64) -> Result<DMatrix<f64>> {
        self.eval(t, s, false)
    }

    /// In cells straddling the diagonal the missing corner (which would have
    /// `s > t`) is supplied by reflection: odd for `R` (`R ~ (t-s)·I` near
    /// the diagonal) and even for `∂R/∂s`. Both choices are second-order
    /// consistent and make on-diagonal queries interpolate to exactly zero.
    fn eval(&self, t: f64, s: f64, use_r: bool) -> Result<DMatrix<f64>> {
        if s > t {
            return Err(Error::Domain(format!(
                "resolvent evaluated at s = {s} > t = {t}"
            )));
        }
        let (ti, ta) = self.locate(t)?;
        let (si, sa) = self.locate(s)?;
        let dim = self.dim;
        let mut out = vec![0.0; dim * dim];
        let corners = [
            (ti, si, (1.0 - ta) * (1.0 - sa)),
            (ti + 1, si, ta * (1.0 - sa)),
            (ti, si + 1, (1.0 - ta) * sa),
            (ti + 1, si + 1, ta * sa),
        ];
        for (ci, cj, w) in corners {
            if w == 0.0 {
                continue;
            }
            let (block, sign) = if ci >= cj {
                (
                    if use_r {
                        self.r_block(ci, cj)
                    } else {
                        self.ds_r_block(ci, cj)
                    },
                    1.0,
                )
            } else {
                (
                    if use_r {
                        self.r_block(cj, ci)
                    } else {
                        self.ds_r_block(cj, ci)
                    },
                    if use_r { -1.0 } else { 1.0 },
                )
            };
            for (o, &b) in out.iter_mut().zip(block) {
                *o += w * sign * b;
            }
        }
        Ok(block_to_matrix(&out, dim))
    }

    /// Cell index and fractional offset; exact node hits return offset 0 so
    /// interpolation weights degenerate to a single stored block.
    fn locate(&self, x: f64) -> Result<(usize, f64)> {
        let nodes = self.grid.nodes();
        let i = self.grid.bracket(x)?;
        if x == nodes[i] {
            return Ok((i, 0.0));
        }
        if x == nodes[i + 1] {
            // Represent as the next node with zero offset; the (i+2) corner
            // then carries weight zero and is never read.
            return Ok((i + 1, 0.0));
        }
        Ok((i, (x - nodes[i]) / (nodes[i + 1] - nodes[i])))
    }

    /// Sampled bounds `M₁`, `M₂` and forward Lipschitz quotients over all
    /// stored node pairs.
    pub fn verify_resolvent_bounds(&self) -> ResolventBounds {
        let n_nodes = self.grid.nodes().len();
        let mut m1 = 0.0_f64;
        let mut m2 = 0.0_f64;
        let mut lr = 0.0_f64;
        let mut mr = 0.0_f64;
        let mut pairs = 0usize;
        for i in 0..n_nodes {
            for j in 0..=i {
                pairs += 1;
                m1 = m1.max(self.block_norm(self.r_block(i, j)));
                m2 = m2.max(self.block_norm(self.ds_r_block(i, j)));
                if i + 1 < n_nodes {
                    let dt = self.grid.node(i + 1) - self.grid.node(i);
                    lr = lr
                        .max(self.block_diff_norm(self.r_block(i + 1, j), self.r_block(i, j)) / dt);
                    mr = mr.max(
                        self.block_diff_norm(self.ds_r_block(i + 1, j), self.ds_r_block(i, j)) / dt,
                    );
                }
            }
        }
        ResolventBounds {
            m1,
            m2,
            lr,
            mr,
            node_pairs: pairs,
        }
    }

    fn block_norm(&self, block: &[f64]) -> f64 {
        match self.structure {
            OperatorStructure::Diagonal => {
                let dim = self.dim;
                (0..dim)
                    .map(|m| block[m * dim + m].abs())
                    .fold(0.0, f64::max)
            }
            OperatorStructure::Dense => {
                if self.dim == 1 {
                    block[0].abs()
                } else {
                    spectral_norm(&block_to_matrix(block, self.dim))
                }
            }
        }
    }

    fn block_diff_norm(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.structure {
            OperatorStructure::Diagonal => {
                let dim = self.dim;
                (0..dim)
                    .map(|m| (a[m * dim + m] - b[m * dim + m]).abs())
                    .fold(0.0, f64::max)
            }
            OperatorStructure::Dense => {
                if self.dim == 1 {
                    (a[0] - b[0]).abs()
                } else {
                    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
                    spectral_norm(&block_to_matrix(&diff, self.dim))
                }
            }
        }
    }
}

fn block_to_matrix(block: &[f64], dim: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(dim, dim, block)
}

/// `out += scale · B · x` for a row-major block.
#[inline]
pub(crate) fn block_apply_acc(block: &[f64], x: &[f64], out: &mut [f64], dim: usize, scale: f64) {
    for i in 0..dim {
        let row = &block[i * dim..(i + 1) * dim];
        let mut acc = 0.0;
        for (b, &xv) in row.iter().zip(x) {
            acc += b * xv;
        }
        out[i] += scale * acc;
    }
}
