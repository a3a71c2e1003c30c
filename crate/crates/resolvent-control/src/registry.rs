//! Named forms for scenario ingredients.
//!
//! Config files cannot carry closures, so every nonlinearity, kernel
//! profile, history, impulse map and control signal is selected from this
//! registry by kind plus a small parameter block. Builders turn the forms
//! into the closures a [`ProblemSpec`] carries.
//!
//! The forcing and neutral forms are saturation-shaped on purpose: the
//! control-synthesis loop assumes uniformly bounded nonlinearities and
//! impulse maps, and every non-zero form here has an explicit sup bound.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::modal::ModeBasis;
use crate::problem::{ForcingFn, HistoryFunction, NeutralFn, StateMap};
use crate::solver::GridControl;

/// Scalar profile of one real variable, used for the kernel envelope
/// `ħ(t-s)` and the potential `F(t)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarField1d {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    /// `scale · e^(-rate·x)`
    ExpDecay {
        scale: f64,
        rate: f64,
    },
    /// `amplitude · cos(frequency·x)`
    Cosine {
        amplitude: f64,
        frequency: f64,
    },
}

impl ScalarField1d {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ScalarField1d::Zero => 0.0,
            ScalarField1d::Constant { value } => *value,
            ScalarField1d::ExpDecay { scale, rate } => scale * (-rate * x).exp(),
            ScalarField1d::Cosine {
                amplitude,
                frequency,
            } => amplitude * (frequency * x).cos(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ScalarField1d::Zero)
    }
}

/// State forcing `f₁`, applied componentwise in modal coordinates.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForcingForm {
    #[default]
    Zero,
    /// `scale · sin(xᵢ)` per component; `‖f₁‖ ≤ scale·√M`.
    SineSaturation { scale: f64 },
    /// `scale · tanh(xᵢ)` per component; `‖f₁‖ ≤ scale·√M`.
    TanhSaturation { scale: f64 },
}

impl ForcingForm {
    pub fn build(&self) -> Option<ForcingFn> {
        match self {
            ForcingForm::Zero => None,
            ForcingForm::SineSaturation { scale } => {
                let c = *scale;
                Some(Box::new(move |_t, x: &DVector<f64>| x.map(|v| c * v.sin())))
            }
            ForcingForm::TanhSaturation { scale } => {
                let c = *scale;
                Some(Box::new(move |_t, x: &DVector<f64>| {
                    x.map(|v| c * v.tanh())
                }))
            }
        }
    }

    /// Sup bound of the built map over all states.
    pub fn uniform_bound(&self, dim: usize) -> f64 {
        match self {
            ForcingForm::Zero => 0.0,
            ForcingForm::SineSaturation { scale } | ForcingForm::TanhSaturation { scale } => {
                scale.abs() * (dim as f64).sqrt()
            }
        }
    }
}

/// Neutral term `f₂` acting on the history segment.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NeutralForm {
    #[default]
    Zero,
    /// `coeff · ϑ_t(-delay)` — linear delayed feedback.
    DelayScale { coeff: f64, delay: f64 },
    /// `coeff · tanh(ϑ_t(-delay))` componentwise — uniformly bounded.
    DelayTanh { coeff: f64, delay: f64 },
}

impl NeutralForm {
    pub fn build(&self) -> Option<NeutralFn> {
        match self {
            NeutralForm::Zero => None,
            NeutralForm::DelayScale { coeff, delay } => {
                let (c, d) = (*coeff, *delay);
                Some(Box::new(move |_t, seg| seg.value(-d) * c))
            }
            NeutralForm::DelayTanh { coeff, delay } => {
                let (c, d) = (*coeff, *delay);
                Some(Box::new(move |_t, seg| seg.value(-d).map(|v| c * v.tanh())))
            }
        }
    }

    /// Smallest delay the form reads, used to sanity-check memory windows.
    pub fn max_delay(&self) -> f64 {
        match self {
            NeutralForm::Zero => 0.0,
            NeutralForm::DelayScale { delay, .. } | NeutralForm::DelayTanh { delay, .. } => *delay,
        }
    }
}

/// Jump maps applied at one impulse time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ImpulseKind {
    /// Linear jumps `I(x) = state_factor·x`, `J(x) = velocity_factor·x`.
    Scale {
        state_factor: f64,
        velocity_factor: f64,
    },
    /// Constant jumps.
    Kick { state: Vec<f64>, velocity: Vec<f64> },
    /// Integral saturation maps over the spatial domain: the state jump
    /// weighs `ϱ²/(π(1+ϱ²))` and the velocity jump `ϱ⁴/(2e²(1+ϱ⁴))`
    /// against a separable first-mode profile. Requires a mode basis.
    SaturationPair {
        state_scale: f64,
        velocity_scale: f64,
    },
}

/// One impulse event: a time and the jump maps to apply there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpulseEvent {
    pub time: f64,
    #[serde(flatten)]
    pub kind: ImpulseKind,
}

impl ImpulseKind {
    /// Build `(I_q, J_q)` for state dimension `dim`; integral forms need the
    /// basis for quadrature and projection.
    pub fn build(&self, dim: usize, basis: Option<&ModeBasis>) -> Result<(StateMap, StateMap)> {
        match self {
            ImpulseKind::Scale {
                state_factor,
                velocity_factor,
            } => {
                let (sf, vf) = (*state_factor, *velocity_factor);
                Ok((
                    Box::new(move |x: &DVector<f64>| x * sf),
                    Box::new(move |x: &DVector<f64>| x * vf),
                ))
            }
            ImpulseKind::Kick { state, velocity } => {
                if state.len() != dim || velocity.len() != dim {
                    return Err(Error::Config(format!(
                        "impulse kick vectors must have length {dim}"
                    )));
                }
                let s = DVector::from_vec(state.clone());
                let v = DVector::from_vec(velocity.clone());
                Ok((
                    Box::new(move |_: &DVector<f64>| s.clone()),
                    Box::new(move |_: &DVector<f64>| v.clone()),
                ))
            }
            ImpulseKind::SaturationPair {
                state_scale,
                velocity_scale,
            } => {
                let basis = basis.ok_or_else(|| {
                    Error::Config(
                        "saturation_pair impulses need a mode basis (wave_memory scenario)".into(),
                    )
                })?;
                Ok((
                    saturation_impulse(basis, dim, *state_scale, false),
                    saturation_impulse(basis, dim, *velocity_scale, true),
                ))
            }
        }
    }
}

/// Integral impulse map with the separable profile `φ(ξ,y) = scale·sin(y)`:
/// reconstruct the field from modal coefficients, apply the pointwise
/// saturation, integrate over ξ and inject the result along the first mode.
/// Bounded by `2·scale·√(2π)` uniformly. (The ξ-profile is constant on
/// purpose — the saturated field term is symmetric about ξ = π for every
/// sine-span field, so an odd profile would integrate to exactly zero.)
fn saturation_impulse(basis: &ModeBasis, dim: usize, scale: f64, quartic: bool) -> StateMap {
    let nodes = basis.quad_nodes().to_vec();
    let weights = basis.quad_weights().to_vec();
    // Basis values at quadrature nodes, node-major.
    let table: Vec<f64> = nodes
        .iter()
        .flat_map(|&y| (0..dim).map(move |m| ModeBasis::basis_value(m, y)))
        .collect();
    let sqrt_pi = std::f64::consts::PI.sqrt();
    Box::new(move |x: &DVector<f64>| {
        let mut integral = 0.0;
        for (i, &w) in weights.iter().enumerate() {
            let mut field = 0.0;
            for m in 0..dim {
                field += x[m] * table[i * dim + m];
            }
            let g = if quartic {
                let f4 = field.powi(4);
                f4 / (2.0 * std::f64::consts::E.powi(2) * (1.0 + f4))
            } else {
                let f2 = field * field;
                f2 / (std::f64::consts::PI * (1.0 + f2))
            };
            integral += w * g;
        }
        let mut out = DVector::zeros(dim);
        out[0] = scale * sqrt_pi * integral;
        out
    })
}

/// Initial history shapes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HistoryForm {
    #[default]
    Zero,
    /// Constant history equal to `values`.
    ConstantVector { values: Vec<f64> },
    /// `amplitude · e^(rate·θ)` along modal coordinate `mode` (1-based).
    DecayingMode {
        mode: usize,
        amplitude: f64,
        rate: f64,
    },
    /// Physical profile `amplitude · e^(rate·θ) · sin(wavenumber·y)`,
    /// projected onto the basis (wave scenario only).
    SineProfile {
        wavenumber: usize,
        amplitude: f64,
        rate: f64,
    },
}

impl HistoryForm {
    pub fn build(
        &self,
        dim: usize,
        memory_window: f64,
        basis: Option<&ModeBasis>,
    ) -> Result<HistoryFunction> {
        match self {
            HistoryForm::Zero => Ok(HistoryFunction::constant(DVector::zeros(dim))),
            HistoryForm::ConstantVector { values } => {
                if values.len() != dim {
                    return Err(Error::Config(format!(
                        "history vector must have length {dim}"
                    )));
                }
                Ok(HistoryFunction::constant(DVector::from_vec(values.clone())))
            }
            HistoryForm::DecayingMode {
                mode,
                amplitude,
                rate,
            } => {
                let shape = mode_vector(dim, *mode, *amplitude)?;
                let rate = *rate;
                Ok(HistoryFunction::new(memory_window, dim, move |theta| {
                    &shape * (rate * theta).exp()
                }))
            }
            HistoryForm::SineProfile {
                wavenumber,
                amplitude,
                rate,
            } => {
                let basis = basis.ok_or_else(|| {
                    Error::Config("sine_profile history needs a mode basis".into())
                })?;
                let k = *wavenumber;
                let shape = basis.project_field(|y| (k as f64 * y).sin())? * *amplitude;
                let rate = *rate;
                Ok(HistoryFunction::new(memory_window, dim, move |theta| {
                    &shape * (rate * theta).exp()
                }))
            }
        }
    }
}

/// Initial velocity shapes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VelocityForm {
    #[default]
    Zero,
    Mode {
        mode: usize,
        amplitude: f64,
    },
    Vector {
        values: Vec<f64>,
    },
    SineProfile {
        wavenumber: usize,
        amplitude: f64,
    },
}

impl VelocityForm {
    pub fn build(&self, dim: usize, basis: Option<&ModeBasis>) -> Result<DVector<f64>> {
        match self {
            VelocityForm::Zero => Ok(DVector::zeros(dim)),
            VelocityForm::Mode { mode, amplitude } => mode_vector(dim, *mode, *amplitude),
            VelocityForm::Vector { values } => {
                if values.len() != dim {
                    return Err(Error::Config(format!(
                        "velocity vector must have length {dim}"
                    )));
                }
                Ok(DVector::from_vec(values.clone()))
            }
            VelocityForm::SineProfile {
                wavenumber,
                amplitude,
            } => {
                let basis = basis.ok_or_else(|| {
                    Error::Config("sine_profile velocity needs a mode basis".into())
                })?;
                Ok(basis.project_field(|y| (*wavenumber as f64 * y).sin())? * *amplitude)
            }
        }
    }
}

/// Control injection matrix shapes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControlMatrixForm {
    #[default]
    Identity,
    Scaled {
        factor: f64,
    },
    /// Explicit M×m matrix as nested row arrays.
    Matrix {
        rows: Vec<Vec<f64>>,
    },
    /// No actuation at all (`inputs` zero columns).
    Zero {
        inputs: usize,
    },
}

impl ControlMatrixForm {
    pub fn build(&self, dim: usize) -> Result<DMatrix<f64>> {
        match self {
            ControlMatrixForm::Identity => Ok(DMatrix::identity(dim, dim)),
            ControlMatrixForm::Scaled { factor } => Ok(DMatrix::identity(dim, dim) * *factor),
            ControlMatrixForm::Matrix { rows } => {
                if rows.len() != dim {
                    return Err(Error::Config(format!(
                        "control matrix must have {dim} rows"
                    )));
                }
                let cols = rows.first().map_or(0, |r| r.len());
                if cols == 0 || rows.iter().any(|r| r.len() != cols) {
                    return Err(Error::Config(
                        "control matrix rows must be equal and nonempty".into(),
                    ));
                }
                let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                Ok(DMatrix::from_row_slice(dim, cols, &flat))
            }
            ControlMatrixForm::Zero { inputs } => {
                if *inputs == 0 {
                    return Err(Error::Config(
                        "control matrix needs at least one input column".into(),
                    ));
                }
                Ok(DMatrix::zeros(dim, *inputs))
            }
        }
    }
}

/// Open-loop control signals for plain solves.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControlSignalForm {
    #[default]
    Zero,
    ConstantVector {
        values: Vec<f64>,
    },
    /// `amplitude · sin(frequency·t)` on input `component` (1-based).
    Sine {
        component: usize,
        amplitude: f64,
        frequency: f64,
    },
}

impl ControlSignalForm {
    pub fn sample(&self, grid: &TimeGrid, control_dim: usize) -> Result<GridControl> {
        let n = grid.nodes().len();
        match self {
            ControlSignalForm::Zero => Ok(GridControl::zeros(n, control_dim)),
            ControlSignalForm::ConstantVector { values } => {
                if values.len() != control_dim {
                    return Err(Error::Config(format!(
                        "control signal vector must have length {control_dim}"
                    )));
                }
                let u = DVector::from_vec(values.clone());
                Ok(GridControl {
                    samples: vec![u; n],
                })
            }
            ControlSignalForm::Sine {
                component,
                amplitude,
                frequency,
            } => {
                if *component == 0 || *component > control_dim {
                    return Err(Error::Config(format!(
                        "control component {component} outside 1..={control_dim}"
                    )));
                }
                let samples = grid
                    .nodes()
                    .iter()
                    .map(|&t| {
                        let mut u = DVector::zeros(control_dim);
                        u[component - 1] = amplitude * (frequency * t).sin();
                        u
                    })
                    .collect();
                Ok(GridControl { samples })
            }
        }
    }
}

/// Steering targets for control synthesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetForm {
    Vector {
        values: Vec<f64>,
    },
    Mode {
        mode: usize,
        amplitude: f64,
    },
    /// Target the endpoint of the uncontrolled solve (zero defect).
    FreeResponse,
}

impl TargetForm {
    /// Resolve to a state vector; `free_endpoint` supplies the uncontrolled
    /// terminal value when the form asks for it.
    pub fn resolve(
        &self,
        dim: usize,
        free_endpoint: Option<&DVector<f64>>,
    ) -> Result<DVector<f64>> {
        match self {
            TargetForm::Vector { values } => {
                if values.len() != dim {
                    return Err(Error::Config(format!(
                        "target vector must have length {dim}"
                    )));
                }
                Ok(DVector::from_vec(values.clone()))
            }
            TargetForm::Mode { mode, amplitude } => mode_vector(dim, *mode, *amplitude),
            TargetForm::FreeResponse => free_endpoint.cloned().ok_or_else(|| {
                Error::Config("free_response target requires an uncontrolled solve first".into())
            }),
        }
    }
}

fn mode_vector(dim: usize, mode: usize, amplitude: f64) -> Result<DVector<f64>> {
    if mode == 0 || mode > dim {
        return Err(Error::Config(format!("mode {mode} outside 1..={dim}")));
    }
    let mut v = DVector::zeros(dim);
    v[mode - 1] = amplitude;
    Ok(v)
}
