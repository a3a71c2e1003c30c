//! Problem instances: operators, nonlinearities, impulses, history.
//!
//! A [`ProblemSpec`] is a complete discretizable description of a controlled
//! second-order neutral integrodifferential system
//!
//! ```text
//! (d²/dt²)[ϑ(t) + f₂(t, ϑ_t)] = A(t)[ϑ + f₂] + ∫₀ᵗ ζ(t,s)[ϑ + f₂] ds
//!                              + f₁(t, ϑ(t)) + B u(t),
//! Δϑ(t_q) = I_q(ϑ(t_q⁻)),   Δϑ'(t_q) = J_q(ϑ(t_q⁻)),
//! ϑ₀ = Φ,   ϑ'(0) = v₀,
//! ```
//!
//! on the truncated state space ℝᴹ. Specs are immutable after construction
//! and safe to share across threads; all validators are pure.
//!
//! The phase space for history segments is the space of bounded continuous
//! functions `(-∞, 0] → ℝᴹ` with the sup norm, represented by a finite
//! window `[-memory_window, 0]` plus constant extension. With that norm the
//! standard phase-space axioms hold with unit constants, which is why the
//! solvability checker in [`crate::hypotheses`] uses `K₂ = 1`.

use nalgebra::{DMatrix, DVector};

use crate::solver::HistorySegment;

/// Time-dependent principal operator `t ↦ A(t)`.
pub type MatrixFn = Box<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>;
/// Two-time memory kernel `(t, s) ↦ ζ(t,s)`, evaluated only for `s ≤ t`.
pub type KernelFn = Box<dyn Fn(f64, f64) -> DMatrix<f64> + Send + Sync>;
/// State forcing `(t, x) ↦ f₁(t,x)`.
pub type ForcingFn = Box<dyn Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync>;
/// Neutral term `(t, ϑ_t) ↦ f₂(t, ϑ_t)` acting on a history segment.
pub type NeutralFn = Box<dyn Fn(f64, &HistorySegment) -> DVector<f64> + Send + Sync>;
/// Impulse jump map `x ↦ I(x)` (or `J(x)`).
pub type StateMap = Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

/// Structural form of `A(t)` and `ζ(t,s)`, declared by the builder.
///
/// `Diagonal` lets the resolvent integrator run one scalar recurrence per
/// mode; the declaration is audited by [`validate_spec`] against operator
/// probes and cross-checked against the dense path in tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorStructure {
    Dense,
    Diagonal,
}

/// Impulse times together with the state and velocity jump maps.
///
/// All three lists are parallel: entry `q` holds `t_q`, `I_q`, `J_q`. Jump
/// maps are applied to the left limit `ϑ(t_q⁻)`.
pub struct ImpulseSchedule {
    pub times: Vec<f64>,
    pub jump_state: Vec<StateMap>,
    pub jump_velocity: Vec<StateMap>,
}

impl ImpulseSchedule {
    pub fn empty() -> Self {
        ImpulseSchedule {
            times: Vec::new(),
            jump_state: Vec::new(),
            jump_velocity: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Initial history `Φ` on `(-∞, 0]`, stored as a map on `[-memory_window, 0]`
/// with constant extension `Φ(θ) = Φ(-memory_window)` for `θ < -memory_window`.
pub struct HistoryFunction {
    pub memory_window: f64,
    pub dim: usize,
    phi: Box<dyn Fn(f64) -> DVector<f64> + Send + Sync>,
}

impl HistoryFunction {
    pub fn new(
        memory_window: f64,
        dim: usize,
        phi: impl Fn(f64) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        HistoryFunction {
            memory_window,
            dim,
            phi: Box::new(phi),
        }
    }

    /// History identically equal to `value`.
    pub fn constant(value: DVector<f64>) -> Self {
        let dim = value.len();
        HistoryFunction::new(0.0, dim, move |_| value.clone())
    }

    /// `Φ(θ)` for `θ ≤ 0`, with constant extension left of the window.
    pub fn value(&self, theta: f64) -> DVector<f64> {
        let clamped = theta.clamp(-self.memory_window, 0.0);
        (self.phi)(clamped)
    }

    /// Sampled sup norm over the window (`samples` uniform probe points).
    pub fn sup_norm(&self, samples: usize) -> f64 {
        let n = samples.max(2);
        (0..n)
            .map(|k| {
                let theta = -self.memory_window * k as f64 / (n - 1) as f64;
                self.value(theta).norm()
            })
            .fold(0.0, f64::max)
    }
}

/// Complete description of one problem instance.
pub struct ProblemSpec {
    /// Dimension M of the truncated state space.
    pub state_dim: usize,
    /// Final time ℓ of the working interval `[0, ℓ]`.
    pub horizon: f64,
    pub a_op: MatrixFn,
    /// `None` means `ζ ≡ 0`; the memory integral is then skipped entirely.
    pub kernel: Option<KernelFn>,
    /// `None` means `f₁ ≡ 0`.
    pub f1: Option<ForcingFn>,
    /// `None` means `f₂ ≡ 0` (no neutral term).
    pub f2: Option<NeutralFn>,
    /// Control injection matrix B (M × m).
    pub b_op: DMatrix<f64>,
    pub impulses: ImpulseSchedule,
    pub history: HistoryFunction,
    /// Initial velocity `ϑ'(0)`.
    pub v0: DVector<f64>,
    /// `d/dt f₂(t, ϑ_t)|_{t=0}`; when absent it is approximated by a central
    /// finite difference with step equal to the grid step.
    pub v0_neutral: Option<DVector<f64>>,
    pub structure: OperatorStructure,
}

impl ProblemSpec {
    /// Number of control inputs m.
    pub fn control_dim(&self) -> usize {
        self.b_op.ncols()
    }

    /// True when the mild-solution map does not depend on the trajectory:
    /// no forcing, no neutral term, no impulses. The terminal defect is then
    /// independent of the solve and one outer control iteration suffices.
    pub fn is_linear(&self) -> bool {
        self.f1.is_none() && self.f2.is_none() && self.impulses.is_empty()
    }
}

/// One structural defect found by [`validate_spec`]. Violations are data,
/// not failures; an empty list means the spec is admissible for solving.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    fn new(field: &str, message: impl Into<String>) -> Self {
        Violation {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn probe_states(dim: usize, radius: f64) -> Vec<DVector<f64>> {
    let mut probes = vec![DVector::zeros(dim)];
    for i in 0..dim {
        let mut e = DVector::zeros(dim);
        e[i] = radius;
        probes.push(e.clone());
        probes.push(-e);
    }
    let ones = DVector::from_element(dim, radius / (dim as f64).sqrt());
    let alt = DVector::from_fn(dim, |i, _| {
        (if i % 2 == 0 { 1.0 } else { -1.0 }) * radius / (dim as f64).sqrt()
    });
    for v in [ones.clone(), -ones, alt.clone(), -alt] {
        if !probes.iter().any(|p| p == &v) {
            probes.push(v);
        }
    }
    probes
}

fn all_finite_vec(v: &DVector<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn all_finite_mat(m: &DMatrix<f64>) -> bool {
    m.iter().all(|x| x.is_finite())
}

fn max_offdiag(m: &DMatrix<f64>) -> f64 {
    let mut v = 0.0_f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j {
                v = v.max(m[(i, j)].abs());
            }
        }
    }
    v
}

const VALIDATE_TIME_PROBES: usize = 17;

/// Structural audit of a spec. Returns every violation found; the check
/// order is fixed, so repeated calls yield the identical list.
pub fn validate_spec(spec: &ProblemSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    let dim = spec.state_dim;
    let horizon = spec.horizon;

    if !(horizon > 0.0) || !horizon.is_finite() {
        out.push(Violation::new(
            "horizon",
            format!("must be positive, got {horizon}"),
        ));
    }
    if dim == 0 {
        out.push(Violation::new("state_dim", "must be at least 1"));
    }
    if spec.b_op.nrows() != dim {
        out.push(Violation::new(
            "b_op",
            format!("has {} rows, expected state_dim = {dim}", spec.b_op.nrows()),
        ));
    }
    if spec.v0.len() != dim {
        out.push(Violation::new(
            "v0",
            format!("has length {}, expected {dim}", spec.v0.len()),
        ));
    }
    if let Some(y1) = &spec.v0_neutral {
        if y1.len() != dim {
            out.push(Violation::new(
                "v0_neutral",
                format!("has length {}, expected {dim}", y1.len()),
            ));
        }
    }
    if spec.history.dim != dim {
        out.push(Violation::new(
            "history",
            format!("has dimension {}, expected {dim}", spec.history.dim),
        ));
    }
    if !(spec.history.memory_window >= 0.0) {
        out.push(Violation::new(
            "history.memory_window",
            "must be nonnegative",
        ));
    }

    // Impulse schedule: parallel lengths, strictly increasing interior times.
    let imp = &spec.impulses;
    if imp.jump_state.len() != imp.times.len() || imp.jump_velocity.len() != imp.times.len() {
        out.push(Violation::new(
            "impulses",
            format!(
                "parallel lists differ in length ({} times, {} state maps, {} velocity maps)",
                imp.times.len(),
                imp.jump_state.len(),
                imp.jump_velocity.len()
            ),
        ));
    }
    if imp.times.windows(2).any(|w| w[1] <= w[0]) {
        out.push(Violation::new(
            "impulses.times",
            "impulse times not increasing",
        ));
    }
    for &t in &imp.times {
        if t >= horizon {
            out.push(Violation::new(
                "impulses.times",
                if t == horizon {
                    format!("impulse at horizon (t = {t})")
                } else {
                    format!("impulse time {t} beyond horizon {horizon}")
                },
            ));
        } else if t <= 0.0 {
            out.push(Violation::new(
                "impulses.times",
                format!("impulse time {t} not strictly positive"),
            ));
        }
    }

    if dim == 0 || !(horizon > 0.0) || !horizon.is_finite() {
        return out; // cannot probe maps without a sane domain
    }

    let times: Vec<f64> = (0..VALIDATE_TIME_PROBES)
        .map(|k| horizon * k as f64 / (VALIDATE_TIME_PROBES - 1) as f64)
        .collect();
    let probes = probe_states(dim, 1.0);
    let declared_diag = spec.structure == OperatorStructure::Diagonal;

    for &t in &times {
        let a = (spec.a_op)(t);
        if a.nrows() != dim || a.ncols() != dim {
            out.push(Violation::new(
                "a_op",
                format!(
                    "returned {}x{} at t = {t}, expected {dim}x{dim}",
                    a.nrows(),
                    a.ncols()
                ),
            ));
            break;
        }
        if !all_finite_mat(&a) {
            out.push(Violation::new(
                "a_op",
                format!("non-finite entry at t = {t}"),
            ));
        }
        if declared_diag && max_offdiag(&a) > 0.0 {
            out.push(Violation::new(
                "a_op",
                format!("declared diagonal but has off-diagonal entries at t = {t}"),
            ));
        }
    }
    if let Some(kernel) = &spec.kernel {
        'kernel: for (ti, &t) in times.iter().enumerate() {
            for &s in &times[..=ti] {
                let z = kernel(t, s);
                if z.nrows() != dim || z.ncols() != dim {
                    out.push(Violation::new(
                        "kernel",
                        format!("returned {}x{} at (t,s) = ({t},{s})", z.nrows(), z.ncols()),
                    ));
                    break 'kernel;
                }
                if !all_finite_mat(&z) {
                    out.push(Violation::new(
                        "kernel",
                        format!("non-finite entry at (t,s) = ({t},{s})"),
                    ));
                    break 'kernel;
                }
                if declared_diag && max_offdiag(&z) > 0.0 {
                    out.push(Violation::new(
                        "kernel",
                        format!(
                            "declared diagonal but has off-diagonal entries at (t,s) = ({t},{s})"
                        ),
                    ));
                    break 'kernel;
                }
            }
        }
    }
    if let Some(f1) = &spec.f1 {
        'f1: for &t in &times {
            for x in &probes {
                let y = f1(t, x);
                if y.len() != dim {
                    out.push(Violation::new(
                        "f1",
                        format!("returned length {} at t = {t}", y.len()),
                    ));
                    break 'f1;
                }
                if !all_finite_vec(&y) {
                    out.push(Violation::new(
                        "f1",
                        format!("non-finite value at t = {t}, probe {:?}", x.as_slice()),
                    ));
                    break 'f1;
                }
            }
        }
    }
    if let Some(f2) = &spec.f2 {
        for &t in &times {
            let seg = HistorySegment::of_history(&spec.history, t);
            let y = f2(t, &seg);
            if y.len() != dim || !all_finite_vec(&y) {
                out.push(Violation::new(
                    "f2",
                    format!("non-finite or mis-sized value at t = {t}"),
                ));
                break;
            }
        }
    }
    for (q, (i_q, j_q)) in imp.jump_state.iter().zip(&imp.jump_velocity).enumerate() {
        for x in &probes {
            let di = i_q(x);
            let dj = j_q(x);
            if di.len() != dim || !all_finite_vec(&di) {
                out.push(Violation::new(
                    "impulses.jump_state",
                    format!("map {} returned non-finite or mis-sized value", q + 1),
                ));
                break;
            }
            if dj.len() != dim || !all_finite_vec(&dj) {
                out.push(Violation::new(
                    "impulses.jump_velocity",
                    format!("map {} returned non-finite or mis-sized value", q + 1),
                ));
                break;
            }
        }
    }

    // History: finiteness plus a sampled modulus-of-continuity probe. For a
    // continuous Φ the largest adjacent increment roughly halves when the
    // sampling is refined; a persistent increment flags a jump.
    let sup = spec.history.sup_norm(257);
    if !sup.is_finite() {
        out.push(Violation::new("history", "sup norm is not finite"));
    } else if spec.history.memory_window > 0.0 {
        let max_inc = |n: usize| -> f64 {
            let mut worst = 0.0_f64;
            for k in 0..n {
                let a = -spec.history.memory_window * k as f64 / n as f64;
                let b = -spec.history.memory_window * (k + 1) as f64 / n as f64;
                worst = worst.max((spec.history.value(a) - spec.history.value(b)).norm());
            }
            worst
        };
        let coarse = max_inc(128);
        let fine = max_inc(256);
        if fine > 1e-8 * (1.0 + sup) && fine > 0.75 * coarse {
            out.push(Violation::new(
                "history.phi",
                "sampled increments do not shrink under refinement; history may be discontinuous",
            ));
        }
    }

    out
}

/// Numerical rank of the control injection matrix (singular values above
/// `1e-12` times the largest). Reported for controllability diagnosis.
pub fn control_rank(b: &DMatrix<f64>) -> usize {
    if b.nrows() == 0 || b.ncols() == 0 {
        return 0;
    }
    let sv = b.clone().svd(false, false).singular_values;
    let top = sv.max();
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-12 * top).count()
}

/// Largest singular value, used for operator norms throughout the crate.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_spec(impulse_times: Vec<f64>) -> ProblemSpec {
        let n = impulse_times.len();
        ProblemSpec {
            state_dim: 1,
            horizon: 1.0,
            a_op: Box::new(|_| DMatrix::from_element(1, 1, -1.0)),
            kernel: None,
            f1: None,
            f2: None,
            b_op: DMatrix::from_element(1, 1, 1.0),
            impulses: ImpulseSchedule {
                times: impulse_times,
                jump_state: (0..n)
                    .map(|_| Box::new(|x: &DVector<f64>| x.clone()) as StateMap)
                    .collect(),
                jump_velocity: (0..n)
                    .map(|_| Box::new(|x: &DVector<f64>| x.clone()) as StateMap)
                    .collect(),
            },
            history: HistoryFunction::constant(DVector::from_element(1, 0.5)),
            v0: DVector::zeros(1),
            v0_neutral: None,
            structure: OperatorStructure::Dense,
        }
    }

    #[test]
    fn non_increasing_impulse_times_flagged() {
        let spec = scalar_spec(vec![0.5, 0.3]);
        let violations = validate_spec(&spec);
        assert!(violations
            .iter()
            .any(|v| v.message.contains("not increasing")));
    }

    #[test]
    fn impulse_at_horizon_flagged() {
        let spec = scalar_spec(vec![1.0]);
        let violations = validate_spec(&spec);
        assert!(violations
            .iter()
            .any(|v| v.message.contains("impulse at horizon")));
    }

    #[test]
    fn clean_spec_passes() {
        let spec = scalar_spec(vec![0.25, 0.75]);
        assert!(validate_spec(&spec).is_empty());
    }

    #[test]
    fn validation_is_idempotent() {
        let spec = scalar_spec(vec![0.9, 0.2, 0.2]);
        assert_eq!(validate_spec(&spec), validate_spec(&spec));
    }

    #[test]
    fn non_finite_operator_flagged() {
        let mut spec = scalar_spec(vec![]);
        spec.a_op = Box::new(|t| DMatrix::from_element(1, 1, if t > 0.5 { f64::NAN } else { 0.0 }));
        let violations = validate_spec(&spec);
        assert!(violations.iter().any(|v| v.field == "a_op"));
    }

    #[test]
    fn discontinuous_history_flagged() {
        let mut spec = scalar_spec(vec![]);
        spec.history = HistoryFunction::new(1.0, 1, |theta| {
            DVector::from_element(1, if theta < -0.5 { 1.0 } else { 0.0 })
        });
        let violations = validate_spec(&spec);
        assert!(violations.iter().any(|v| v.field == "history.phi"));
    }

    #[test]
    fn declared_diagonal_is_audited() {
        let mut spec = scalar_spec(vec![]);
        spec.structure = OperatorStructure::Diagonal;
        assert!(validate_spec(&spec).is_empty());

        let dense = ProblemSpec {
            state_dim: 2,
            horizon: 1.0,
            a_op: Box::new(|_| DMatrix::from_row_slice(2, 2, &[-1.0, 0.3, 0.3, -4.0])),
            kernel: None,
            f1: None,
            f2: None,
            b_op: DMatrix::identity(2, 2),
            impulses: ImpulseSchedule::empty(),
            history: HistoryFunction::constant(DVector::zeros(2)),
            v0: DVector::zeros(2),
            v0_neutral: None,
            structure: OperatorStructure::Diagonal,
        };
        let violations = validate_spec(&dense);
        assert!(violations.iter().any(|v| v.field == "a_op"));
    }

    #[test]
    fn control_rank_reports_deficiency() {
        assert_eq!(control_rank(&DMatrix::<f64>::identity(3, 3)), 3);
        assert_eq!(control_rank(&DMatrix::<f64>::zeros(3, 2)), 0);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(control_rank(&b), 1);
    }

    #[test]
    fn history_constant_extension() {
        let h = HistoryFunction::new(0.5, 1, |theta| DVector::from_element(1, theta.exp()));
        assert!((h.value(-2.0)[0] - (-0.5_f64).exp()).abs() < 1e-15);
        assert!((h.value(0.0)[0] - 1.0).abs() < 1e-15);
    }
}
