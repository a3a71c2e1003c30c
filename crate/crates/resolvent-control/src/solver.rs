//! Mild-solution map and Picard iteration.
//!
//! A trajectory `ϑ` is a mild solution when it satisfies, at every time,
//!
//! ```text
//! ϑ(t) = -∂R/∂s(t,0)[Φ(0) + f₂(0,Φ)] + R(t,0)[v₀ + y₁] - f₂(t, ϑ_t)
//!        + ∫₀ᵗ R(t,s)[f₁(s,ϑ(s)) + B u(s)] ds
//!        - Σ_{t_q<t} ∂R/∂s(t,t_q) I_q(ϑ(t_q⁻)) + Σ_{t_q<t} R(t,t_q) J_q(ϑ(t_q⁻)),
//! ```
//!
//! and the solver finds it as the fixed point of that map by successive
//! approximation starting from the constant trajectory `ϑ ≡ Φ(0)`.
//!
//! Conventions, shared with the rest of the crate:
//!
//! * Trajectories are piecewise continuous; at an impulse node both limits
//!   are kept, and the pointwise value `ϑ(t_q)` means the left limit.
//! * The convolution uses per-panel trapezoid with the stored resolvent
//!   blocks at exact nodes — no interpolation inside the integral — and
//!   each panel reads the one-sided limits that belong to its interior.
//! * The velocity path `ϑ'` is never reconstructed; velocity jumps enter
//!   only through the `R(t,t_q) J_q` term.

use std::collections::BTreeMap;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::problem::{HistoryFunction, ProblemSpec};
use crate::resolvent::{block_apply_acc, ResolventGrid};

/// Control signal sampled on the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridControl {
    pub samples: Vec<DVector<f64>>,
}

impl GridControl {
    pub fn zeros(n_nodes: usize, control_dim: usize) -> Self {
        GridControl {
            samples: vec![DVector::zeros(control_dim); n_nodes],
        }
    }

    pub fn control_dim(&self) -> usize {
        self.samples.first().map_or(0, |u| u.len())
    }

    /// `L²` norm over `[0, horizon]` by trapezoid.
    pub fn energy(&self, grid: &TimeGrid) -> f64 {
        let w = grid.trapezoid_weights();
        self.samples
            .iter()
            .zip(&w)
            .map(|(u, &wk)| wk * u.norm_squared())
            .sum::<f64>()
            .sqrt()
    }
}

/// Piecewise-continuous state path on a grid.
///
/// `values[i]` holds `ϑ(τ_i)`, storing the right limit at impulse nodes;
/// the corresponding left limits are kept separately.
pub struct Trajectory {
    grid: TimeGrid,
    values: Vec<DVector<f64>>,
    left_limits: BTreeMap<usize, DVector<f64>>,
    velocity0: DVector<f64>,
}

impl Trajectory {
    /// Constant path, the canonical Picard starting iterate (it lies in the
    /// admissible set because its value at zero is `Φ(0)`).
    pub fn constant(grid: TimeGrid, value: DVector<f64>, velocity0: DVector<f64>) -> Self {
        let n = grid.nodes().len();
        Trajectory {
            grid,
            values: vec![value; n],
            left_limits: BTreeMap::new(),
            velocity0,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Stored value at node `i` (the right limit at impulse nodes).
    pub fn value(&self, i: usize) -> &DVector<f64> {
        &self.values[i]
    }

    /// Left limit at node `i`; equals the stored value away from impulses.
    pub fn left_value(&self, i: usize) -> &DVector<f64> {
        self.left_limits.get(&i).unwrap_or(&self.values[i])
    }

    pub fn left_limit_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.left_limits.keys().copied()
    }

    pub fn velocity0(&self) -> &DVector<f64> {
        &self.velocity0
    }

    /// Final value `ϑ(horizon)`.
    pub fn terminal_value(&self) -> &DVector<f64> {
        self.values.last().unwrap()
    }

    /// Pointwise evaluation with the piecewise-continuous convention: exact
    /// impulse nodes yield the left limit, panel interiors interpolate the
    /// one-sided limits belonging to the panel.
    pub fn value_at(&self, t: f64) -> Result<DVector<f64>> {
        let nodes = self.grid.nodes();
        let i = self.grid.bracket(t)?;
        if t == nodes[i] {
            return Ok(self.pc_value(i).clone());
        }
        if t == nodes[i + 1] {
            return Ok(self.pc_value(i + 1).clone());
        }
        let alpha = (t - nodes[i]) / (nodes[i + 1] - nodes[i]);
        Ok(self.value(i) * (1.0 - alpha) + self.left_value(i + 1) * alpha)
    }

    fn pc_value(&self, i: usize) -> &DVector<f64> {
        if self.left_limits.contains_key(&i) {
            self.left_value(i)
        } else {
            &self.values[i]
        }
    }

    /// Record a jump at node `i`: stored value becomes the right limit.
    pub fn set_jump(&mut self, i: usize, left: DVector<f64>, right: DVector<f64>) {
        self.values[i] = right;
        self.left_limits.insert(i, left);
    }

    /// Max node distance to another trajectory on the same grid, including
    /// left limits.
    pub fn distance(&self, other: &Trajectory) -> f64 {
        let mut d = 0.0_f64;
        for (a, b) in self.values.iter().zip(&other.values) {
            d = d.max((a - b).norm());
        }
        for (&i, a) in &self.left_limits {
            d = d.max((a - other.left_value(i)).norm());
        }
        for (&i, b) in &other.left_limits {
            d = d.max((self.left_value(i) - b).norm());
        }
        d
    }

    /// Largest node norm, including left limits (the ball-radius diagnostic).
    pub fn sup_norm(&self) -> f64 {
        let v = self.values.iter().map(|x| x.norm()).fold(0.0, f64::max);
        self.left_limits
            .values()
            .map(|x| x.norm())
            .fold(v, f64::max)
    }
}

/// History segment `ϑ_t(θ) = ϑ(t+θ)`, splicing a trajectory (for `t+θ ≥ 0`)
/// with the initial history (for `t+θ < 0`).
pub struct HistorySegment<'a> {
    anchor: f64,
    traj: Option<&'a Trajectory>,
    hist: &'a HistoryFunction,
}

impl<'a> HistorySegment<'a> {
    /// Segment backed by the initial history alone; times past zero are
    /// clamped to `Φ(0)`. Used for `f₂(0, Φ)` and for the finite-difference
    /// estimate of the neutral initial velocity.
    pub fn of_history(hist: &'a HistoryFunction, anchor: f64) -> Self {
        HistorySegment {
            anchor,
            traj: None,
            hist,
        }
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    /// `ϑ_t(θ)` for `θ ≤ 0`.
    pub fn value(&self, theta: f64) -> DVector<f64> {
        let t = self.anchor + theta;
        if t < 0.0 {
            self.hist.value(t)
        } else {
            match self.traj {
                Some(traj) => traj
                    .value_at(t.min(traj.grid().horizon()))
                    .expect("segment lookup inside [0, horizon]"),
                None => self.hist.value(0.0),
            }
        }
    }

    /// Sampled sup norm over `[-(memory_window + anchor), 0]`.
    pub fn sup_norm(&self, samples: usize) -> f64 {
        let span = self.hist.memory_window + self.anchor.max(0.0);
        let n = samples.max(2);
        (0..n)
            .map(|k| {
                let theta = -span * k as f64 / (n - 1) as f64;
                self.value(theta).norm()
            })
            .fold(0.0, f64::max)
    }
}

/// Segment of `traj` anchored at `t ∈ [0, horizon]`.
pub fn segment_history<'a>(
    traj: &'a Trajectory,
    hist: &'a HistoryFunction,
    t: f64,
) -> Result<HistorySegment<'a>> {
    if !(0.0..=traj.grid().horizon()).contains(&t) {
        return Err(Error::Domain(format!(
            "segment anchor {t} outside [0, {}]",
            traj.grid().horizon()
        )));
    }
    Ok(HistorySegment {
        anchor: t,
        traj: Some(traj),
        hist,
    })
}

/// `v₀ + y₁` where `y₁ = d/dt f₂(t, ϑ_t)|_{t=0}` is taken from the spec or
/// estimated by a central difference over history-backed segments with the
/// given step.
pub fn effective_initial_velocity(spec: &ProblemSpec, step: f64) -> DVector<f64> {
    let y1 = match (&spec.v0_neutral, &spec.f2) {
        (Some(y1), _) => y1.clone(),
        (None, None) => DVector::zeros(spec.state_dim),
        (None, Some(f2)) => {
            let h = step;
            let plus = f2(h, &HistorySegment::of_history(&spec.history, h));
            let minus = f2(-h, &HistorySegment::of_history(&spec.history, -h));
            (plus - minus) / (2.0 * h)
        }
    };
    &spec.v0 + y1
}

/// Node indices of the spec's impulse times on `grid`, requiring exact hits.
fn impulse_node_indices(spec: &ProblemSpec, grid: &TimeGrid) -> Result<Vec<usize>> {
    let nodes = grid.nodes();
    spec.impulses
        .times
        .iter()
        .map(|&t| {
            nodes
                .binary_search_by(|x| x.partial_cmp(&t).unwrap())
                .map_err(|_| {
                    Error::Domain(format!("grid is not impulse-aligned: no node at t = {t}"))
                })
        })
        .collect()
}

fn check_finite(v: &DVector<f64>, what: &str, t: f64) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("{what} at t = {t}")));
    }
    Ok(())
}

/// One application of the mild-solution map to `traj`.
///
/// All trajectory-dependent quantities — the forcing samples, the neutral
/// term, and the impulse jump arguments — are read from the *input*
/// trajectory. The returned trajectory records its own jump bookkeeping:
/// at each impulse node the stored value is `left + I_q(left)` with `left`
/// the computed left limit, so the jump identity is exact on every output.
pub fn evaluate_mild_map(
    spec: &ProblemSpec,
    res: &ResolventGrid,
    traj: &Trajectory,
    control: &GridControl,
) -> Result<Trajectory> {
    let grid = res.grid();
    let nodes = grid.nodes();
    let n_nodes = nodes.len();
    let dim = spec.state_dim;
    if control.samples.len() != n_nodes {
        return Err(Error::Domain(format!(
            "control has {} samples, grid has {n_nodes} nodes",
            control.samples.len()
        )));
    }
    if control.control_dim() != spec.control_dim() {
        return Err(Error::Domain(format!(
            "control has {} inputs, spec expects {}",
            control.control_dim(),
            spec.control_dim()
        )));
    }
    if traj.grid().nodes().len() != n_nodes {
        return Err(Error::Domain(
            "trajectory grid does not match the resolvent grid".into(),
        ));
    }
    let impulse_idx = impulse_node_indices(spec, grid)?;

    let y_eff = effective_initial_velocity(spec, nodes[1] - nodes[0]);
    let mut base0 = spec.history.value(0.0);
    if let Some(f2) = &spec.f2 {
        let seg0 = HistorySegment::of_history(&spec.history, 0.0);
        let f20 = f2(0.0, &seg0);
        check_finite(&f20, "f2", 0.0)?;
        base0 += f20;
    }

    // Forcing f₁ + B·u per node; at impulse nodes the left-sided sample
    // (used by the panel ending there) differs from the right-sided one.
    let mut phi_right: Vec<DVector<f64>> = Vec::with_capacity(n_nodes);
    for (k, &t) in nodes.iter().enumerate() {
        let mut phi = &spec.b_op * &control.samples[k];
        if let Some(f1) = &spec.f1 {
            let f = f1(t, traj.value(k));
            check_finite(&f, "f1", t)?;
            phi += f;
        }
        phi_right.push(phi);
    }
    let mut phi_left: BTreeMap<usize, DVector<f64>> = BTreeMap::new();
    if let Some(f1) = &spec.f1 {
        for &k in &impulse_idx {
            let mut phi = &spec.b_op * &control.samples[k];
            let f = f1(nodes[k], traj.left_value(k));
            check_finite(&f, "f1", nodes[k])?;
            phi += f;
            phi_left.insert(k, phi);
        }
    }

    // Neutral term on segments of the input trajectory.
    let f2_terms: Option<Vec<DVector<f64>>> = match &spec.f2 {
        Some(f2) => {
            let mut terms = Vec::with_capacity(n_nodes);
            for &t in nodes {
                let seg = segment_history(traj, &spec.history, t)?;
                let v = f2(t, &seg);
                check_finite(&v, "f2", t)?;
                terms.push(v);
            }
            Some(terms)
        }
        None => None,
    };

    // Impulse jump contributions from the input trajectory's left limits.
    let mut jumps_state = Vec::with_capacity(impulse_idx.len());
    let mut jumps_velocity = Vec::with_capacity(impulse_idx.len());
    for (q, &k) in impulse_idx.iter().enumerate() {
        let left = traj.left_value(k);
        let di = (spec.impulses.jump_state[q])(left);
        let dj = (spec.impulses.jump_velocity[q])(left);
        check_finite(&di, "jump_state", nodes[k])?;
        check_finite(&dj, "jump_velocity", nodes[k])?;
        jumps_state.push(di);
        jumps_velocity.push(dj);
    }

    let mut out = Trajectory {
        grid: grid.clone(),
        values: Vec::with_capacity(n_nodes),
        left_limits: BTreeMap::new(),
        velocity0: spec.v0.clone(),
    };

    let mut acc = vec![0.0_f64; dim];
    for i in 0..n_nodes {
        acc.fill(0.0);
        block_apply_acc(res.ds_r_block(i, 0), base0.as_slice(), &mut acc, dim, -1.0);
        block_apply_acc(res.r_block(i, 0), y_eff.as_slice(), &mut acc, dim, 1.0);
        if let Some(terms) = &f2_terms {
            for (a, v) in acc.iter_mut().zip(terms[i].iter()) {
                *a -= v;
            }
        }
        // Convolution ∫₀^{τ_i} R(τ_i, s)[f₁ + Bu] ds, panel by panel.
        for k in 0..i {
            let half = 0.5 * (nodes[k + 1] - nodes[k]);
            block_apply_acc(
                res.r_block(i, k),
                phi_right[k].as_slice(),
                &mut acc,
                dim,
                half,
            );
            let end = phi_left.get(&(k + 1)).unwrap_or(&phi_right[k + 1]);
            block_apply_acc(res.r_block(i, k + 1), end.as_slice(), &mut acc, dim, half);
        }
        // Impulse sums over t_q < τ_i (strict: at τ_i = t_q the q-th term is
        // excluded, so the formula yields the left limit there).
        for (q, &kq) in impulse_idx.iter().enumerate() {
            if kq >= i {
                break;
            }
            block_apply_acc(
                res.ds_r_block(i, kq),
                jumps_state[q].as_slice(),
                &mut acc,
                dim,
                -1.0,
            );
            block_apply_acc(
                res.r_block(i, kq),
                jumps_velocity[q].as_slice(),
                &mut acc,
                dim,
                1.0,
            );
        }
        out.values.push(DVector::from_column_slice(&acc));
    }

    // Jump bookkeeping on the output: exact by construction.
    for (q, &kq) in impulse_idx.iter().enumerate() {
        let left = out.values[kq].clone();
        let right = &left + (spec.impulses.jump_state[q])(&left);
        out.set_jump(kq, left, right);
    }
    Ok(out)
}

/// Enforce the jump identity at impulse `q` (0-based) from the trajectory's
/// own left limit. The stored value becomes `left + I_q(left)` exactly;
/// there is no discretization error in this step.
pub fn apply_jump(traj: &mut Trajectory, spec: &ProblemSpec, q: usize) -> Result<()> {
    let idx = impulse_node_indices(spec, traj.grid())?;
    let &node = idx.get(q).ok_or_else(|| {
        Error::Domain(format!(
            "impulse index {q} out of range (spec has {})",
            idx.len()
        ))
    })?;
    let left = traj.left_value(node).clone();
    let right = &left + (spec.impulses.jump_state[q])(&left);
    traj.set_jump(node, left, right);
    Ok(())
}

/// Convergence record of a Picard solve.
#[derive(Debug, Clone)]
pub struct PicardReport {
    pub iterations: usize,
    /// Successive max-node distances between iterates.
    pub distances: Vec<f64>,
    /// Largest node norm of the returned trajectory (ball-radius diagnostic).
    pub ball_radius: f64,
}

impl PicardReport {
    /// Ratios of successive distances, the empirical contraction factor.
    pub fn contraction_ratios(&self) -> Vec<f64> {
        self.distances
            .windows(2)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .collect()
    }
}

/// Solve `ϑ = Q̃ϑ` by successive approximation from the constant iterate
/// `ϑ ≡ Φ(0)`.
///
/// When the map does not depend on the trajectory (no forcing, no neutral
/// term, no impulses) a single application is the exact fixed point. On
/// non-convergence the distance sequence is returned in the error; a
/// diverging sequence signals that the solvability condition checked by
/// [`crate::hypotheses::check_solvability`] is being violated.
pub fn picard_solve(
    spec: &ProblemSpec,
    res: &ResolventGrid,
    control: &GridControl,
    tol: f64,
    max_iter: usize,
) -> Result<(Trajectory, PicardReport)> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let phi0 = spec.history.value(0.0);
    let mut current = Trajectory::constant(res.grid().clone(), phi0, spec.v0.clone());

    if spec.is_linear() {
        let next = evaluate_mild_map(spec, res, &current, control)?;
        let d = next.distance(&current);
        let report = PicardReport {
            iterations: 1,
            distances: vec![d],
            ball_radius: next.sup_norm(),
        };
        return Ok((next, report));
    }

    let mut distances = Vec::new();
    for iteration in 1..=max_iter {
        let next = evaluate_mild_map(spec, res, &current, control)?;
        let d = next.distance(&current);
        distances.push(d);
        current = next;
        if d < tol {
            let report = PicardReport {
                iterations: iteration,
                distances,
                ball_radius: current.sup_norm(),
            };
            return Ok((current, report));
        }
    }
    Err(Error::non_convergence(
        "picard iteration",
        max_iter,
        distances,
    ))
}
