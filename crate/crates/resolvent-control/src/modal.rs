//! Spectral Galerkin reduction of the wave-with-memory scenario.
//!
//! The spatial operator is the Dirichlet Laplacian on `(0, 2π)`, truncated
//! onto its first M eigenfunctions. The working basis is the real sine
//! family `ϑ_m(y) = sin(m·y)/√π` — Dirichlet-compatible at both ends, with
//! eigenvalues exactly `-m²`. Projections and reconstructions run over a
//! composite Gauss–Legendre rule sized so that products of the first 2M
//! basis functions integrate to relative error below 1e-10.
//!
//! [`build_wave_memory_scenario`] assembles the modal [`ProblemSpec`]:
//! `A(t) = diag(-m²) + F(t)·I`, `ζ(t,s) = ħ(t-s)·diag(-m²)`, componentwise
//! saturation forcing, delayed neutral term, integral saturation impulses
//! and projected history/velocity profiles.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::problem::{ImpulseSchedule, OperatorStructure, ProblemSpec};
use crate::registry::{
    ControlMatrixForm, ForcingForm, HistoryForm, ImpulseEvent, NeutralForm, ScalarField1d,
    VelocityForm,
};

const GL_POINTS_PER_PANEL: usize = 16;

/// Sine eigenbasis of the Dirichlet Laplacian on `(0, 2π)` plus the
/// quadrature used for all projections.
#[derive(Debug, Clone)]
pub struct ModeBasis {
    mode_count: usize,
    eigenvalues: Vec<f64>,
    quad_nodes: Vec<f64>,
    quad_weights: Vec<f64>,
}

impl ModeBasis {
    pub fn new(mode_count: usize) -> Result<Self> {
        if mode_count == 0 {
            return Err(Error::Domain("mode count must be at least 1".into()));
        }
        let eigenvalues = (1..=mode_count).map(|m| -((m * m) as f64)).collect();
        let panels = (2 * mode_count).max(4);
        let (nodes, weights) = composite_gauss_legendre(panels, 0.0, 2.0 * std::f64::consts::PI);
        Ok(ModeBasis {
            mode_count,
            eigenvalues,
            quad_nodes: nodes,
            quad_weights: weights,
        })
    }

    pub fn mode_count(&self) -> usize {
        self.mode_count
    }

    /// Eigenvalues `-m²` for `m = 1..=mode_count`, strictly decreasing.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn quad_nodes(&self) -> &[f64] {
        &self.quad_nodes
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.quad_weights
    }

    /// `ϑ_m(y) = sin((m+1)·y)/√π` for the 0-based mode index `m`.
    pub fn basis_value(mode_index: usize, y: f64) -> f64 {
        ((mode_index + 1) as f64 * y).sin() / std::f64::consts::PI.sqrt()
    }

    /// Quadrature coefficients `⟨field, ϑ_m⟩` for `m = 1..=mode_count`.
    pub fn project_field(&self, field: impl Fn(f64) -> f64) -> Result<DVector<f64>> {
        let mut coeffs = DVector::zeros(self.mode_count);
        for (&y, &w) in self.quad_nodes.iter().zip(&self.quad_weights) {
            let f = field(y);
            if !f.is_finite() {
                return Err(Error::NonFinite(format!("field sample at y = {y}")));
            }
            for m in 0..self.mode_count {
                coeffs[m] += w * f * Self::basis_value(m, y);
            }
        }
        Ok(coeffs)
    }

    /// `Σ_m coeffs_m ϑ_m(y)` at each requested point.
    pub fn reconstruct_field(&self, coeffs: &DVector<f64>, points: &[f64]) -> Vec<f64> {
        points
            .iter()
            .map(|&y| {
                (0..self.mode_count.min(coeffs.len()))
                    .map(|m| coeffs[m] * Self::basis_value(m, y))
                    .sum()
            })
            .collect()
    }

    /// Worst deviation of `∫ ϑ_a ϑ_b` from `δ_ab` over the first
    /// `2·mode_count` basis functions — the quadrature resolution audit.
    pub fn quadrature_defect(&self) -> f64 {
        let n = 2 * self.mode_count;
        let mut worst = 0.0_f64;
        for a in 0..n {
            for b in a..n {
                let mut acc = 0.0;
                for (&y, &w) in self.quad_nodes.iter().zip(&self.quad_weights) {
                    acc += w * Self::basis_value(a, y) * Self::basis_value(b, y);
                }
                let expected = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((acc - expected).abs());
            }
        }
        worst
    }

    /// `L²(0, 2π)` norm of a field under the basis quadrature.
    pub fn field_l2_norm(&self, field: impl Fn(f64) -> f64) -> f64 {
        self.quad_nodes
            .iter()
            .zip(&self.quad_weights)
            .map(|(&y, &w)| w * field(y) * field(y))
            .sum::<f64>()
            .sqrt()
    }
}

/// Composite Gauss–Legendre rule with `panels` equal panels on `[a, b]`.
fn composite_gauss_legendre(panels: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (xs, ws) = gauss_legendre(GL_POINTS_PER_PANEL);
    let width = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * xs.len());
    let mut weights = Vec::with_capacity(panels * xs.len());
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let mid = lo + 0.5 * width;
        for (&x, &w) in xs.iter().zip(&ws) {
            nodes.push(mid + 0.5 * width * x);
            weights.push(0.5 * width * w);
        }
    }
    (nodes, weights)
}

/// Gauss–Legendre nodes/weights on `[-1, 1]` by Newton iteration on the
/// Legendre recurrence.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, t);
            let dt = -p / dp;
            t += dt;
            if dt.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, t);
        x[i] = -t;
        x[n - 1 - i] = t;
        let wi = 2.0 / ((1.0 - t * t) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, t: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, t);
    for k in 2..=n {
        let kf = k as f64;
        let pk = ((2.0 * kf - 1.0) * t * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = pk;
    }
    let dp = n as f64 * (t * p1 - p0) / (t * t - 1.0);
    (p1, dp)
}

/// Parameters of the wave-with-memory scenario.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WaveMemoryParams {
    pub mode_count: usize,
    pub horizon: f64,
    #[serde(default)]
    pub memory_window: f64,
    /// Potential `F(t)` added as `F(t)·I` to the diagonal operator.
    #[serde(default)]
    pub potential: ScalarField1d,
    /// Kernel envelope `ħ(τ)`; `zero` drops the memory term entirely.
    #[serde(default)]
    pub kernel_h: ScalarField1d,
    #[serde(default)]
    pub f1: ForcingForm,
    #[serde(default)]
    pub f2: NeutralForm,
    #[serde(default)]
    pub impulses: Vec<ImpulseEvent>,
    #[serde(default)]
    pub history: HistoryForm,
    #[serde(default)]
    pub velocity: VelocityForm,
    #[serde(default)]
    pub v0_neutral: Option<Vec<f64>>,
    #[serde(default)]
    pub control_matrix: ControlMatrixForm,
}

impl WaveMemoryParams {
    /// Ready-made nonlinear scenario: exponential memory kernel, bounded
    /// saturation forcing and neutral delay, two integral impulses, history
    /// energy in the first mode and full-rank actuation.
    pub fn demo(mode_count: usize) -> Self {
        WaveMemoryParams {
            mode_count,
            horizon: 1.0,
            memory_window: 0.5,
            potential: ScalarField1d::Zero,
            kernel_h: ScalarField1d::ExpDecay {
                scale: 1.0,
                rate: 1.0,
            },
            f1: ForcingForm::SineSaturation { scale: 0.05 },
            f2: NeutralForm::DelayTanh {
                coeff: 0.05,
                delay: 0.15,
            },
            impulses: vec![
                ImpulseEvent {
                    time: 0.35,
                    kind: crate::registry::ImpulseKind::SaturationPair {
                        state_scale: 0.05,
                        velocity_scale: 0.05,
                    },
                },
                ImpulseEvent {
                    time: 0.7,
                    kind: crate::registry::ImpulseKind::SaturationPair {
                        state_scale: 0.05,
                        velocity_scale: 0.05,
                    },
                },
            ],
            history: HistoryForm::DecayingMode {
                mode: 1,
                amplitude: 0.4,
                rate: 1.0,
            },
            velocity: VelocityForm::Mode {
                mode: 2.min(mode_count),
                amplitude: 0.2,
            },
            v0_neutral: None,
            control_matrix: ControlMatrixForm::Identity,
        }
    }
}

/// Assemble the modal [`ProblemSpec`] of the wave-with-memory scenario.
pub fn build_wave_memory_scenario(params: &WaveMemoryParams) -> Result<ProblemSpec> {
    let basis = ModeBasis::new(params.mode_count)?;
    let dim = params.mode_count;
    if !(params.horizon > 0.0) || !params.horizon.is_finite() {
        return Err(Error::Config(format!(
            "horizon must be positive, got {}",
            params.horizon
        )));
    }
    let eigen = DVector::from_vec(basis.eigenvalues().to_vec());

    let a_eigen = eigen.clone();
    let potential = params.potential.clone();
    let a_op = Box::new(move |t: f64| {
        let mut a = DMatrix::zeros(dim, dim);
        let f = potential.eval(t);
        for m in 0..dim {
            a[(m, m)] = a_eigen[m] + f;
        }
        a
    });

    let kernel = if params.kernel_h.is_zero() {
        None
    } else {
        let h = params.kernel_h.clone();
        let k_eigen = eigen.clone();
        Some(Box::new(move |t: f64, s: f64| {
            let mut z = DMatrix::zeros(dim, dim);
            let hv = h.eval(t - s);
            for m in 0..dim {
                z[(m, m)] = hv * k_eigen[m];
            }
            z
        }) as crate::problem::KernelFn)
    };

    let mut times = Vec::with_capacity(params.impulses.len());
    let mut jump_state = Vec::with_capacity(params.impulses.len());
    let mut jump_velocity = Vec::with_capacity(params.impulses.len());
    for ev in &params.impulses {
        let (i_q, j_q) = ev.kind.build(dim, Some(&basis))?;
        times.push(ev.time);
        jump_state.push(i_q);
        jump_velocity.push(j_q);
    }

    let history = params
        .history
        .build(dim, params.memory_window, Some(&basis))?;
    let v0 = params.velocity.build(dim, Some(&basis))?;
    let v0_neutral = match &params.v0_neutral {
        Some(v) => {
            if v.len() != dim {
                return Err(Error::Config(format!("v0_neutral must have length {dim}")));
            }
            Some(DVector::from_vec(v.clone()))
        }
        None => None,
    };
    let b_op = params.control_matrix.build(dim)?;

    Ok(ProblemSpec {
        state_dim: dim,
        horizon: params.horizon,
        a_op,
        kernel,
        f1: params.f1.build(),
        f2: params.f2.build(),
        b_op,
        impulses: ImpulseSchedule {
            times,
            jump_state,
            jump_velocity,
        },
        history,
        v0,
        v0_neutral,
        structure: OperatorStructure::Diagonal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::validate_spec;
    use crate::registry::ImpulseKind;

    #[test]
    fn eigenvalues_are_exact_squares() {
        let basis = ModeBasis::new(6).unwrap();
        for (i, &lam) in basis.eigenvalues().iter().enumerate() {
            let m = (i + 1) as f64;
            assert_eq!(lam, -(m * m));
        }
        assert!(basis.eigenvalues().windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn quadrature_resolves_basis_products() {
        for modes in [1, 3, 8] {
            let basis = ModeBasis::new(modes).unwrap();
            assert!(
                basis.quadrature_defect() <= 1e-10,
                "defect {} at {modes} modes",
                basis.quadrature_defect()
            );
        }
    }

    #[test]
    fn projection_recovers_basis_coefficients() {
        let basis = ModeBasis::new(4).unwrap();
        let e2 = basis
            .project_field(|y| ModeBasis::basis_value(1, y))
            .unwrap();
        for m in 0..4 {
            let expected = if m == 1 { 1.0 } else { 0.0 };
            assert!((e2[m] - expected).abs() < 1e-10);
        }
        let zero = basis.project_field(|_| 0.0).unwrap();
        assert!(zero.iter().all(|&c| c == 0.0));
        let combo = basis
            .project_field(|y| {
                3.0 * ModeBasis::basis_value(0, y) + 4.0 * ModeBasis::basis_value(2, y)
            })
            .unwrap();
        let expected = [3.0, 0.0, 4.0, 0.0];
        for m in 0..4 {
            assert!((combo[m] - expected[m]).abs() < 1e-10, "mode {m}");
        }
    }

    #[test]
    fn projection_reports_bad_samples() {
        let basis = ModeBasis::new(2).unwrap();
        let err = basis
            .project_field(|y| if y > 3.0 { f64::NAN } else { 0.0 })
            .unwrap_err();
        assert!(err.to_string().contains("y ="));
    }

    #[test]
    fn reconstruction_round_trip() {
        let basis = ModeBasis::new(3).unwrap();
        let mut e1 = DVector::zeros(3);
        e1[0] = 1.0;
        let vals = basis.reconstruct_field(&e1, &[std::f64::consts::FRAC_PI_2]);
        assert!((vals[0] - ModeBasis::basis_value(0, std::f64::consts::FRAC_PI_2)).abs() < 1e-15);

        let zeros = basis.reconstruct_field(&DVector::zeros(3), &[0.1, 1.0, 2.0]);
        assert!(zeros.iter().all(|&v| v == 0.0));

        let f = |y: f64| ModeBasis::basis_value(0, y) - 2.0 * ModeBasis::basis_value(1, y);
        let coeffs = basis.project_field(f).unwrap();
        let points: Vec<f64> = (0..17)
            .map(|k| 2.0 * std::f64::consts::PI * k as f64 / 16.0)
            .collect();
        let recon = basis.reconstruct_field(&coeffs, &points);
        let worst = points
            .iter()
            .zip(&recon)
            .map(|(&y, &v)| (v - f(y)).abs())
            .fold(0.0_f64, f64::max);
        assert!(worst <= 1e-9, "round trip error {worst}");
    }

    #[test]
    fn truncated_projection_respects_parseval() {
        let basis = ModeBasis::new(5).unwrap();
        let f = |y: f64| (y / 2.0).sin() * (1.0 + 0.3 * (2.0 * y).cos());
        let coeffs = basis.project_field(f).unwrap();
        assert!(coeffs.norm() <= basis.field_l2_norm(f) + 1e-8);
    }

    #[test]
    fn single_mode_scenario_is_pure_wave() {
        let mut params = WaveMemoryParams::demo(1);
        params.kernel_h = ScalarField1d::Zero;
        params.potential = ScalarField1d::Zero;
        params.f1 = ForcingForm::Zero;
        params.f2 = NeutralForm::Zero;
        params.velocity = VelocityForm::Zero;
        params.impulses.clear();
        let spec = build_wave_memory_scenario(&params).unwrap();
        assert!(spec.kernel.is_none());
        assert!(spec.is_linear());
        let a = (spec.a_op)(0.37);
        assert_eq!(a[(0, 0)], -1.0);
    }

    #[test]
    fn kernel_entry_matches_eigenvalue_times_envelope() {
        let mut params = WaveMemoryParams::demo(3);
        params.kernel_h = ScalarField1d::ExpDecay {
            scale: 1.0,
            rate: 1.0,
        };
        let spec = build_wave_memory_scenario(&params).unwrap();
        let z = spec.kernel.as_ref().unwrap()(0.9, 0.4);
        let expected = -4.0 * (-(0.9 - 0.4_f64)).exp();
        assert!((z[(1, 1)] - expected).abs() < 1e-14);
        assert_eq!(z[(0, 1)], 0.0);
    }

    #[test]
    fn physical_history_concentrates_in_first_mode() {
        let mut params = WaveMemoryParams::demo(4);
        params.history = HistoryForm::SineProfile {
            wavenumber: 1,
            amplitude: 1.0,
            rate: 1.0,
        };
        let spec = build_wave_memory_scenario(&params).unwrap();
        let phi = spec.history.value(-0.3);
        let expected = std::f64::consts::PI.sqrt() * (-0.3_f64).exp();
        assert!((phi[0] - expected).abs() < 1e-9);
        for m in 1..4 {
            assert!(phi[m].abs() <= 1e-10, "mode {m} leaked {}", phi[m]);
        }
    }

    #[test]
    fn demo_scenario_validates_cleanly() {
        let spec = build_wave_memory_scenario(&WaveMemoryParams::demo(8)).unwrap();
        let violations = validate_spec(&spec);
        assert!(
            violations.is_empty(),
            "unexpected violations: {violations:?}"
        );
    }

    #[test]
    fn integral_impulse_respects_field_bound() {
        let basis = ModeBasis::new(4).unwrap();
        let scale = 0.4;
        let (i_q, _) = ImpulseKind::SaturationPair {
            state_scale: scale,
            velocity_scale: 0.0,
        }
        .build(4, Some(&basis))
        .unwrap();
        let cap = 2.0 * scale * (2.0 * std::f64::consts::PI).sqrt();
        for x in [
            DVector::from_element(4, 0.3),
            DVector::from_element(4, -40.0),
            DVector::from_fn(4, |i, _| (i as f64 + 1.0) * 7.0),
        ] {
            assert!(i_q(&x).norm() <= cap);
        }
    }
}
