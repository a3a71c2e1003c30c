//! Sampled hypothesis constants and the solvability condition.
//!
//! The solvability and controllability statements for the problem class
//! rest on a family of growth, Lipschitz and boundedness constants. None of
//! them is computable exactly for black-box maps, so this module estimates
//! every constant as a max (or an L²-based proxy) over a documented
//! deterministic sample set: all stored node pairs for the resolvent
//! bounds, a subsampled node set for time-dependent maps, and a nested
//! radial lattice of state probes. The estimates are *sampled*, not
//! certified; the report carries its sample counts so the condition checker
//! can refuse to conclude from thin data.
//!
//! With the sup-norm phase space used throughout the crate the phase-space
//! constant `K₂` equals one, so the left-hand side of the solvability
//! inequality reads
//!
//! ```text
//! 2M₁ + M₂ + r₂ + M₁ℓσ + M₁‖B‖λℓ + M₁Σe_q + M₂Σd_q  <  1.
//! ```

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::problem::{spectral_norm, HistoryFunction, ProblemSpec};
use crate::resolvent::ResolventGrid;
use crate::solver::{GridControl, HistorySegment};

/// Phase-space constant of the sup-norm concretization.
pub const PHASE_SPACE_K2: f64 = 1.0;
/// Sample-count floor below which the condition checker reports
/// `Inconclusive` instead of a verdict.
pub const DEFAULT_MIN_PROBES: usize = 8;
/// Default refinement level of the radial probe lattice.
pub const DEFAULT_PROBE_LEVEL: u32 = 2;

const TIME_SUBSAMPLE: usize = 129;
const KERNEL_SUBSAMPLE: usize = 33;

/// Sampled constants of one problem/resolvent pair.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    /// Sampled bound `‖R(t,s)‖ ≤ M₁` over node pairs.
    pub m1_est: f64,
    /// Sampled bound `‖∂R/∂s(t,s)‖ ≤ M₂`.
    pub m2_est: f64,
    /// Forward Lipschitz quotient of `R` in `t`.
    pub lr_est: f64,
    /// Forward Lipschitz quotient of `∂R/∂s` in `t`.
    pub mr_est: f64,
    /// Growth proxy `σ ≈ ‖ν_r‖_{L²} / r` at the largest probe radius,
    /// where `ν_r(t)` is the sampled sup of `‖f₁(t,·)‖` on the radius-r ball.
    pub sigma_est: f64,
    /// Affine offset of the neutral term: `max_t ‖f₂(t, 0)‖`.
    pub r1_est: f64,
    /// Affine slope of the neutral term over constant probe segments.
    pub r2_est: f64,
    /// Same-time Lipschitz quotient of the neutral term.
    pub l2_est: f64,
    /// Per-impulse growth constants `max ‖I_q(x)‖/(‖x‖+1)`.
    pub dq_est: Vec<f64>,
    /// Per-impulse growth constants `max ‖J_q(x)‖/(‖x‖+1)`.
    pub eq_est: Vec<f64>,
    /// Control bound proxy `max_t ‖u(t)‖ / r` (zero for the zero control).
    pub lambda_est: f64,
    /// Graph-norm bound of the kernel.
    pub h1_est: f64,
    /// Bound of the iterated map `x ↦ ∫ R(t,s) ζ(s,η) x ds`, with the
    /// resolvent standing in for the evolution family of the decomposition
    /// this crate does not construct.
    pub h2_est: f64,
    /// Time-Lipschitz constant of the kernel in graph norm.
    pub lzeta_est: f64,
    /// Left-hand side of the solvability inequality at these estimates.
    pub solvability_lhs: f64,
    pub state_probe_count: usize,
    pub time_sample_count: usize,
    pub node_pair_count: usize,
}

/// Verdict of the solvability condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolvabilityCondition {
    Holds,
    Fails,
    /// Too few probes behind at least one estimate.
    Inconclusive,
}

impl std::fmt::Display for SolvabilityCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolvabilityCondition::Holds => write!(f, "holds"),
            SolvabilityCondition::Fails => write!(f, "fails"),
            SolvabilityCondition::Inconclusive => write!(f, "inconclusive"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolvabilityVerdict {
    pub condition: SolvabilityCondition,
    pub lhs: f64,
}

/// Nested radial lattice: level `d` places probes at radii `k·r/2^d` along
/// the axis directions and two diagonal directions. Level `d+1` contains
/// every level-`d` probe, so refining the lattice never decreases a max.
fn probe_lattice(dim: usize, radius: f64, level: u32) -> Vec<DVector<f64>> {
    let mut directions: Vec<DVector<f64>> = Vec::new();
    for i in 0..dim {
        let mut e = DVector::zeros(dim);
        e[i] = 1.0;
        directions.push(e.clone());
        directions.push(-e);
    }
    let scale = 1.0 / (dim as f64).sqrt();
    let ones = DVector::from_element(dim, scale);
    let alt = DVector::from_fn(dim, |i, _| if i % 2 == 0 { scale } else { -scale });
    for d in [ones.clone(), -ones, alt.clone(), -alt] {
        if !directions.iter().any(|v| v == &d) {
            directions.push(d);
        }
    }
    let steps = 1usize << level;
    let mut probes = vec![DVector::zeros(dim)];
    for k in 1..=steps {
        let rho = radius * k as f64 / steps as f64;
        for dir in &directions {
            probes.push(dir * rho);
        }
    }
    probes
}

/// Evenly spread subset of `0..n`, always containing both ends.
fn subsample_indices(n: usize, max_count: usize) -> Vec<usize> {
    if n <= max_count {
        return (0..n).collect();
    }
    (0..max_count)
        .map(|k| k * (n - 1) / (max_count - 1))
        .collect()
}

fn finite_or_err(v: f64, what: &str, at: String) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(format!("{what} at {at}")))
    }
}

/// Estimate every hypothesis constant for `spec` on `grid` with the default
/// lattice level. `control` feeds the control-bound constant; `None` audits
/// the uncontrolled system.
pub fn estimate_constants(
    spec: &ProblemSpec,
    grid: &TimeGrid,
    resolvent: &ResolventGrid,
    probe_radius: f64,
    control: Option<&GridControl>,
) -> Result<HypothesisReport> {
    estimate_constants_with_level(
        spec,
        grid,
        resolvent,
        probe_radius,
        control,
        DEFAULT_PROBE_LEVEL,
    )
}

/// [`estimate_constants`] with an explicit lattice refinement level.
pub fn estimate_constants_with_level(
    spec: &ProblemSpec,
    grid: &TimeGrid,
    resolvent: &ResolventGrid,
    probe_radius: f64,
    control: Option<&GridControl>,
    level: u32,
) -> Result<HypothesisReport> {
    if !(probe_radius > 0.0) {
        return Err(Error::Domain(format!(
            "probe radius must be positive, got {probe_radius}"
        )));
    }
    let dim = spec.state_dim;
    let nodes = grid.nodes();
    let bounds = resolvent.verify_resolvent_bounds();
    let probes = probe_lattice(dim, probe_radius, level);
    let time_idx = subsample_indices(nodes.len(), TIME_SUBSAMPLE);
    let times: Vec<f64> = time_idx.iter().map(|&i| nodes[i]).collect();

    // σ from the forcing: ν̂(t) = sampled sup of ‖f₁(t,·)‖ on the ball,
    // then the L² norm over the subsampled times divided by the radius.
    let sigma_est = match &spec.f1 {
        None => 0.0,
        Some(f1) => {
            let mut nu = Vec::with_capacity(times.len());
            for &t in &times {
                let mut worst = 0.0_f64;
                for x in &probes {
                    let v = f1(t, x).norm();
                    finite_or_err(v, "f1", format!("t = {t}, probe norm {}", x.norm()))?;
                    worst = worst.max(v);
                }
                nu.push(worst);
            }
            let mut l2 = 0.0;
            for k in 0..times.len() - 1 {
                let h = times[k + 1] - times[k];
                l2 += 0.5 * h * (nu[k] * nu[k] + nu[k + 1] * nu[k + 1]);
            }
            l2.sqrt() / probe_radius
        }
    };

    // Neutral-term constants over constant probe segments. Two passes: the
    // affine offset r₁ is fixed from the zero probe over all times first,
    // then the slope r₂ is inverted against it.
    let (r1_est, r2_est, l2_est) = match &spec.f2 {
        None => (0.0, 0.0, 0.0),
        Some(f2) => {
            let holders: Vec<HistoryFunction> = probes
                .iter()
                .map(|x| HistoryFunction::constant(x.clone()))
                .collect();
            let mut per_time: Vec<Vec<DVector<f64>>> = Vec::with_capacity(times.len());
            for &t in &times {
                let values: Vec<DVector<f64>> = holders
                    .iter()
                    .map(|h| f2(t, &HistorySegment::of_history(h, 0.0)))
                    .collect();
                for (x, v) in probes.iter().zip(&values) {
                    finite_or_err(v.norm(), "f2", format!("t = {t}, probe norm {}", x.norm()))?;
                }
                per_time.push(values);
            }
            let mut r1 = 0.0_f64;
            for values in &per_time {
                for (x, v) in probes.iter().zip(values) {
                    if x.norm() == 0.0 {
                        r1 = r1.max(v.norm());
                    }
                }
            }
            let mut r2 = 0.0_f64;
            let mut l2 = 0.0_f64;
            for values in &per_time {
                for (a, va) in probes.iter().zip(values) {
                    for (b, vb) in probes.iter().zip(values) {
                        let dx = (a - b).norm();
                        if dx > 0.0 {
                            l2 = l2.max((va - vb).norm() / dx);
                        }
                    }
                }
                for (x, v) in probes.iter().zip(values) {
                    let nx = x.norm();
                    if nx > 0.0 {
                        r2 = r2.max(((v.norm() - r1) / nx).max(0.0));
                    }
                }
            }
            (r1, r2, l2)
        }
    };

    // Impulse growth constants by direct inversion of the assumed bound.
    let mut dq_est = Vec::with_capacity(spec.impulses.len());
    let mut eq_est = Vec::with_capacity(spec.impulses.len());
    for q in 0..spec.impulses.len() {
        let mut dq = 0.0_f64;
        let mut eq = 0.0_f64;
        for x in &probes {
            let denom = x.norm() + 1.0;
            let di = (spec.impulses.jump_state[q])(x).norm();
            let dj = (spec.impulses.jump_velocity[q])(x).norm();
            finite_or_err(
                di,
                "jump_state",
                format!("impulse {}, probe norm {}", q + 1, x.norm()),
            )?;
            finite_or_err(
                dj,
                "jump_velocity",
                format!("impulse {}, probe norm {}", q + 1, x.norm()),
            )?;
            dq = dq.max(di / denom);
            eq = eq.max(dj / denom);
        }
        dq_est.push(dq);
        eq_est.push(eq);
    }

    // Control bound proxy at the ball boundary.
    let lambda_est = match control {
        None => 0.0,
        Some(u) => {
            let mut worst = 0.0_f64;
            for (k, sample) in u.samples.iter().enumerate() {
                let v = sample.norm();
                finite_or_err(v, "control", format!("node {k}"))?;
                worst = worst.max(v);
            }
            worst / probe_radius
        }
    };

    // Kernel constants on a coarse node subgrid, graph-normed by A(t).
    let (h1_est, h2_est, lzeta_est) = match &spec.kernel {
        None => (0.0, 0.0, 0.0),
        Some(kernel) => {
            let sub = subsample_indices(nodes.len(), KERNEL_SUBSAMPLE);
            let sub_times: Vec<f64> = sub.iter().map(|&i| nodes[i]).collect();
            let a_at: Vec<_> = sub_times.iter().map(|&t| (spec.a_op)(t)).collect();
            let state_probes: Vec<&DVector<f64>> =
                probes.iter().filter(|x| x.norm() > 0.0).collect();
            let mut h1 = 0.0_f64;
            let mut lz = 0.0_f64;
            for (ti, &t) in sub_times.iter().enumerate() {
                for &s in sub_times.iter().take(ti + 1) {
                    let z = kernel(t, s);
                    for x in &state_probes {
                        let graph = x.norm() + (&a_at[ti] * *x).norm();
                        let v = (&z * *x).norm();
                        finite_or_err(v, "kernel", format!("(t,s) = ({t},{s})"))?;
                        h1 = h1.max(v / graph);
                    }
                    if ti + 1 < sub_times.len() {
                        let t2 = sub_times[ti + 1];
                        let z2 = kernel(t2, s);
                        for x in &state_probes {
                            let graph = x.norm() + (&a_at[ti] * *x).norm();
                            let v = ((&z2 - &z) * *x).norm();
                            lz = lz.max(v / ((t2 - t) * graph));
                        }
                    }
                }
            }
            // h₂: trapezoid of R(t,·)ζ(·,η)x over the subgrid between η and t.
            let mut h2 = 0.0_f64;
            for (ei, &eta) in sub_times.iter().enumerate() {
                let zx: Vec<Vec<DVector<f64>>> = sub
                    .iter()
                    .enumerate()
                    .skip(ei)
                    .map(|(ki, _)| {
                        let z = kernel(sub_times[ki], eta);
                        state_probes.iter().map(|x| &z * *x).collect()
                    })
                    .collect();
                for ti in ei + 1..sub.len() {
                    for (pi, x) in state_probes.iter().enumerate() {
                        let mut acc = DVector::zeros(dim);
                        for ki in ei..=ti {
                            let lo = if ki == ei {
                                sub_times[ei]
                            } else {
                                sub_times[ki - 1]
                            };
                            let hi = if ki == ti {
                                sub_times[ti]
                            } else {
                                sub_times[ki + 1]
                            };
                            let w = 0.5 * (hi - lo);
                            let r_blk = resolvent.r_node(sub[ti], sub[ki]);
                            acc += r_blk * &zx[ki - ei][pi] * w;
                        }
                        h2 = h2.max(acc.norm() / x.norm());
                    }
                }
            }
            (h1, h2, lz)
        }
    };

    let beta_norm = spectral_norm(&spec.b_op);
    let ell = spec.horizon;
    let sum_eq: f64 = eq_est.iter().sum();
    let sum_dq: f64 = dq_est.iter().sum();
    let solvability_lhs = 2.0 * bounds.m1
        + bounds.m2
        + r2_est * PHASE_SPACE_K2
        + bounds.m1 * ell * sigma_est
        + bounds.m1 * beta_norm * lambda_est * ell
        + bounds.m1 * sum_eq
        + bounds.m2 * sum_dq;

    Ok(HypothesisReport {
        m1_est: bounds.m1,
        m2_est: bounds.m2,
        lr_est: bounds.lr,
        mr_est: bounds.mr,
        sigma_est,
        r1_est,
        r2_est,
        l2_est,
        dq_est,
        eq_est,
        lambda_est,
        h1_est,
        h2_est,
        lzeta_est,
        solvability_lhs,
        state_probe_count: probes.len(),
        time_sample_count: times.len(),
        node_pair_count: bounds.node_pairs,
    })
}

/// Evaluate the solvability inequality with the default probe floor.
pub fn check_solvability(report: &HypothesisReport, spec: &ProblemSpec) -> SolvabilityVerdict {
    check_solvability_with_min(report, spec, DEFAULT_MIN_PROBES)
}

/// Evaluate the solvability inequality; estimates backed by fewer than
/// `min_probes` samples yield `Inconclusive`.
pub fn check_solvability_with_min(
    report: &HypothesisReport,
    spec: &ProblemSpec,
    min_probes: usize,
) -> SolvabilityVerdict {
    let beta_norm = spectral_norm(&spec.b_op);
    let ell = spec.horizon;
    let sum_eq: f64 = report.eq_est.iter().sum();
    let sum_dq: f64 = report.dq_est.iter().sum();
    let lhs = 2.0 * report.m1_est
        + report.m2_est
        + report.r2_est * PHASE_SPACE_K2
        + report.m1_est * ell * report.sigma_est
        + report.m1_est * beta_norm * report.lambda_est * ell
        + report.m1_est * sum_eq
        + report.m2_est * sum_dq;
    let condition = if report.state_probe_count < min_probes
        || report.time_sample_count < min_probes
        || report.node_pair_count < min_probes
    {
        SolvabilityCondition::Inconclusive
    } else if lhs < 1.0 {
        SolvabilityCondition::Holds
    } else {
        SolvabilityCondition::Fails
    };
    SolvabilityVerdict { condition, lhs }
}
