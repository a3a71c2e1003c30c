//! Scenario config files.
//!
//! Configs are TOML: scalar fields, matrices as nested arrays, and every
//! map selected from the [`crate::registry`] forms by `kind` plus a
//! parameter block. Parsing is not bit-exact but round-trips
//! parse → serialize → parse to value-identical configs.
//!
//! ```toml
//! [grid]
//! step = 2e-3
//!
//! [scenario]
//! kind = "wave_memory"
//! mode_count = 8
//! horizon = 1.0
//! memory_window = 0.5
//! kernel_h = { kind = "exp_decay", scale = 1.0, rate = 1.0 }
//! f1 = { kind = "sine_saturation", scale = 0.05 }
//! f2 = { kind = "delay_tanh", coeff = 0.05, delay = 0.15 }
//! history = { kind = "decaying_mode", mode = 1, amplitude = 0.4, rate = 1.0 }
//! velocity = { kind = "mode", mode = 2, amplitude = 0.2 }
//! control_matrix = { kind = "identity" }
//!
//! [[scenario.impulses]]
//! time = 0.35
//! kind = "saturation_pair"
//! state_scale = 0.05
//! velocity_scale = 0.05
//!
//! [control]
//! target = { kind = "mode", mode = 1, amplitude = 0.8 }
//! epsilon = 1e-2
//! eps_list = [1e-1, 1e-2, 1e-3]
//! ```

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::modal::{build_wave_memory_scenario, WaveMemoryParams};
use crate::problem::{ImpulseSchedule, OperatorStructure, ProblemSpec};
use crate::registry::{
    ControlMatrixForm, ControlSignalForm, ForcingForm, HistoryForm, ImpulseEvent, NeutralForm,
    ScalarField1d, TargetForm, VelocityForm,
};

/// Convolution-type kernel for the constant-coefficient scenario:
/// `ζ(t,s) = h(t-s) · matrix`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearKernel {
    pub h: ScalarField1d,
    pub matrix: Vec<Vec<f64>>,
}

/// Constant-coefficient scenario with explicit matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConstantParams {
    pub state_dim: usize,
    pub horizon: f64,
    #[serde(default)]
    pub memory_window: f64,
    /// Principal operator as nested rows (M×M).
    pub a_matrix: Vec<Vec<f64>>,
    #[serde(default)]
    pub kernel: Option<LinearKernel>,
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

fn parse_matrix(rows: &[Vec<f64>], dim: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::Config(format!(
            "{what} must be a {dim}x{dim} nested array"
        )));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(dim, dim, &flat))
}

fn is_diagonal(m: &DMatrix<f64>) -> bool {
    m.row_iter()
        .enumerate()
        .all(|(i, row)| row.iter().enumerate().all(|(j, &v)| i == j || v == 0.0))
}

impl LinearConstantParams {
    pub fn build(&self) -> Result<ProblemSpec> {
        let dim = self.state_dim;
        if dim == 0 {
            return Err(Error::Config("state_dim must be at least 1".into()));
        }
        let a = parse_matrix(&self.a_matrix, dim, "a_matrix")?;
        let kernel_data = match &self.kernel {
            Some(k) => Some((k.h.clone(), parse_matrix(&k.matrix, dim, "kernel.matrix")?)),
            None => None,
        };
        let diagonal = is_diagonal(&a) && kernel_data.as_ref().is_none_or(|(_, m)| is_diagonal(m));

        let mut times = Vec::new();
        let mut jump_state = Vec::new();
        let mut jump_velocity = Vec::new();
        for ev in &self.impulses {
            let (i_q, j_q) = ev.kind.build(dim, None)?;
            times.push(ev.time);
            jump_state.push(i_q);
            jump_velocity.push(j_q);
        }

        let history = self.history.build(dim, self.memory_window, None)?;
        let v0 = self.velocity.build(dim, None)?;
        let v0_neutral = match &self.v0_neutral {
            Some(v) if v.len() != dim => {
                return Err(Error::Config(format!("v0_neutral must have length {dim}")))
            }
            Some(v) => Some(DVector::from_vec(v.clone())),
            None => None,
        };

        let a_owned = a;
        let kernel = kernel_data.map(|(h, m)| {
            Box::new(move |t: f64, s: f64| &m * h.eval(t - s)) as crate::problem::KernelFn
        });
        Ok(ProblemSpec {
            state_dim: dim,
            horizon: self.horizon,
            a_op: Box::new(move |_| a_owned.clone()),
            kernel,
            f1: self.f1.build(),
            f2: self.f2.build(),
            b_op: self.control_matrix.build(dim)?,
            impulses: ImpulseSchedule {
                times,
                jump_state,
                jump_velocity,
            },
            history,
            v0,
            v0_neutral,
            structure: if diagonal {
                OperatorStructure::Diagonal
            } else {
                OperatorStructure::Dense
            },
        })
    }
}

/// Scenario selector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioConfig {
    WaveMemory(WaveMemoryParams),
    LinearConstant(LinearConstantParams),
}

impl ScenarioConfig {
    pub fn build(&self) -> Result<ProblemSpec> {
        match self {
            ScenarioConfig::WaveMemory(p) => build_wave_memory_scenario(p),
            ScenarioConfig::LinearConstant(p) => p.build(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub step: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { step: 2e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToleranceConfig {
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    pub outer_tol: f64,
    pub outer_max_iter: usize,
    /// Probe-ball radius for the hypothesis audit.
    pub probe_radius: f64,
    /// Relative decay threshold of the controllability test.
    pub decay_tol: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        ToleranceConfig {
            picard_tol: 1e-10,
            picard_max_iter: 200,
            outer_tol: 1e-8,
            outer_max_iter: 50,
            probe_radius: 2.0,
            decay_tol: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlSection {
    pub target: Option<TargetForm>,
    pub epsilon: Option<f64>,
    pub eps_list: Option<Vec<f64>>,
    pub signal: ControlSignalForm,
}

/// Root of a scenario config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
    #[serde(default)]
    pub control: ControlSection,
}

impl RunConfig {
    pub fn parse_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Content hash of the *parsed* config (canonical serialization), so
    /// whitespace and key order in the file do not matter.
    pub fn content_hash(&self) -> Result<String> {
        let canonical = self.to_toml_string()?;
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        Ok(hex_string(&hasher.finalize()))
    }

    pub fn build_spec(&self) -> Result<ProblemSpec> {
        self.scenario.build()
    }
}

pub(crate) fn hex_string(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const WAVE_CONFIG: &str = r#"
[grid]
step = 5e-3

[scenario]
kind = "wave_memory"
mode_count = 3
horizon = 1.0
memory_window = 0.5
kernel_h = { kind = "exp_decay", scale = 1.0, rate = 1.0 }
f1 = { kind = "sine_saturation", scale = 0.05 }
f2 = { kind = "delay_tanh", coeff = 0.05, delay = 0.15 }
history = { kind = "decaying_mode", mode = 1, amplitude = 0.4, rate = 1.0 }
velocity = { kind = "mode", mode = 2, amplitude = 0.2 }
control_matrix = { kind = "identity" }

[[scenario.impulses]]
time = 0.35
kind = "saturation_pair"
state_scale = 0.05
velocity_scale = 0.05

[control]
target = { kind = "mode", mode = 1, amplitude = 0.8 }
eps_list = [1e-1, 1e-2, 1e-3]
"#;

    const SCALAR_CONFIG: &str = r#"
[scenario]
kind = "linear_constant"
state_dim = 1
horizon = 1.0
a_matrix = [[-1.0]]
history = { kind = "constant_vector", values = [0.7] }
velocity = { kind = "vector", values = [-0.4] }
"#;

    #[test]
    fn parses_wave_scenario() {
        let cfg = RunConfig::parse_str(WAVE_CONFIG).unwrap();
        assert_eq!(cfg.grid.step, 5e-3);
        let spec = cfg.build_spec().unwrap();
        assert_eq!(spec.state_dim, 3);
        assert_eq!(spec.impulses.len(), 1);
        assert!(spec.kernel.is_some());
    }

    #[test]
    fn parses_scalar_scenario_with_defaults() {
        let cfg = RunConfig::parse_str(SCALAR_CONFIG).unwrap();
        let spec = cfg.build_spec().unwrap();
        assert_eq!(spec.state_dim, 1);
        assert!(spec.is_linear());
        assert_eq!(spec.structure, OperatorStructure::Diagonal);
        assert_eq!(cfg.tolerances.picard_tol, 1e-10);
    }

    #[test]
    fn dense_matrices_are_detected() {
        let text = r#"
[scenario]
kind = "linear_constant"
state_dim = 2
horizon = 1.0
a_matrix = [[-1.0, 0.2], [0.2, -4.0]]
"#;
        let spec = RunConfig::parse_str(text).unwrap().build_spec().unwrap();
        assert_eq!(spec.structure, OperatorStructure::Dense);
    }

    #[test]
    fn missing_horizon_names_the_field() {
        let text = r#"
[scenario]
kind = "linear_constant"
state_dim = 1
a_matrix = [[-1.0]]
"#;
        let err = RunConfig::parse_str(text).unwrap_err();
        assert!(err.to_string().contains("horizon"), "{err}");
    }

    #[test]
    fn round_trip_is_value_identical() {
        for text in [WAVE_CONFIG, SCALAR_CONFIG] {
            let parsed = RunConfig::parse_str(text).unwrap();
            let serialized = parsed.to_toml_string().unwrap();
            let reparsed = RunConfig::parse_str(&serialized).unwrap();
            assert_eq!(parsed, reparsed);
            assert_eq!(
                parsed.content_hash().unwrap(),
                reparsed.content_hash().unwrap()
            );
        }
    }

    #[test]
    fn hash_ignores_formatting() {
        let reformatted = WAVE_CONFIG.replace("step = 5e-3", "step   =   5e-3");
        let a = RunConfig::parse_str(WAVE_CONFIG)
            .unwrap()
            .content_hash()
            .unwrap();
        let b = RunConfig::parse_str(&reformatted)
            .unwrap()
            .content_hash()
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bad_matrix_shape_is_a_config_error() {
        let text = r#"
[scenario]
kind = "linear_constant"
state_dim = 2
horizon = 1.0
a_matrix = [[-1.0]]
"#;
        match RunConfig::parse_str(text).unwrap().build_spec() {
            Err(Error::Config(msg)) => assert!(msg.contains("a_matrix")),
            other => panic!("expected config error, got {:?}", other.map(|_| ()).err()),
        }
    }
}
