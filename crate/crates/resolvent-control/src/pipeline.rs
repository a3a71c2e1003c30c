//! Batch pipelines behind the command-line front end.
//!
//! Each command parses a config, writes a manifest (before any numeric
//! output), runs its stages and finalizes the manifest with wall-clock
//! timings. All numeric artifacts are CSV; see [`crate::export`] for the
//! column contracts.

use std::path::PathBuf;

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cache::{build_resolvent_grid_cached, ResolventCache};
use crate::config::{RunConfig, ToleranceConfig};
use crate::control::{
    assemble_gramian, epsilon_sweep, synthesize_control, test_linear_controllability,
    ControllabilityVerdict, DecayTable, GramianPackage, SweepRow, SynthesisParams,
};
use crate::error::{Error, Result};
use crate::export;
use crate::grid::TimeGrid;
use crate::hypotheses::{check_solvability, estimate_constants, HypothesisReport, SolvabilityVerdict};
use crate::manifest::{RunManifest, StageClock};
use crate::problem::{control_rank, validate_spec, ProblemSpec, Violation};
use crate::registry::TargetForm;
use crate::resolvent::ResolventGrid;
use crate::solver::{picard_solve, GridControl, PicardReport, Trajectory};

/// Fixed seed for the sweep's probe directions: runs are reproducible.
const PROBE_SEED: u64 = 0x5245_534f_4c56_454e;
const DECAY_PROBES: usize = 5;

/// Command-line level options shared by all commands.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub config_path: PathBuf,
    pub out_dir: PathBuf,
    pub grid_step: Option<f64>,
    /// Overrides the Picard tolerance.
    pub tol: Option<f64>,
    /// ε values: the sweep list, or the single synthesis ε.
    pub eps: Option<Vec<f64>>,
    pub target: Option<TargetForm>,
    pub cache_dir: Option<PathBuf>,
}

struct Resolved {
    config: RunConfig,
    spec: ProblemSpec,
    step: f64,
    tols: ToleranceConfig,
    hash: String,
    cache: Option<ResolventCache>,
}

impl Resolved {
    /// Impulse-aligned grid for the spec. Deferred so that `validate` can
    /// report structural problems (like an impulse at the horizon) as
    /// violations instead of dying on grid construction.
    fn make_grid(&self) -> Result<TimeGrid> {
        TimeGrid::aligned(self.spec.horizon, self.step, &self.spec.impulses.times)
            .map_err(|e| Error::Config(e.to_string()))
    }
}

fn resolve(opts: &RunOptions) -> Result<Resolved> {
    let config = RunConfig::from_file(&opts.config_path)?;
    let spec = config.build_spec()?;
    let step = opts.grid_step.unwrap_or(config.grid.step);
    if !(step > 0.0) {
        return Err(Error::Config(format!(
            "grid step must be positive, got {step}"
        )));
    }
    let mut tols = config.tolerances;
    if let Some(tol) = opts.tol {
        if !(tol > 0.0) {
            return Err(Error::Config(format!(
                "tolerance must be positive, got {tol}"
            )));
        }
        tols.picard_tol = tol;
    }
    let hash = config.content_hash()?;
    let cache = match &opts.cache_dir {
        Some(dir) => Some(ResolventCache::new(dir.clone())?),
        None => None,
    };
    Ok(Resolved {
        config,
        spec,
        step,
        tols,
        hash,
        cache,
    })
}

fn manifest_skeleton(
    command: &str,
    opts: &RunOptions,
    r: &Resolved,
    outputs: &[&str],
) -> RunManifest {
    RunManifest {
        command: command.into(),
        config_path: opts.config_path.display().to_string(),
        out_dir: opts.out_dir.display().to_string(),
        spec_hash: r.hash.clone(),
        grid_step: r.step,
        picard_tol: r.tols.picard_tol,
        outer_tol: r.tols.outer_tol,
        eps: Vec::new(),
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
        status: "running".into(),
        timings: Vec::new(),
    }
}

/// Config-level checks beyond the structural spec audit: ε lists and
/// targets must be usable by the control commands.
fn control_section_violations(config: &RunConfig, dim: usize) -> Vec<Violation> {
    let mut out = Vec::new();
    let section = &config.control;
    if let Some(eps) = &section.epsilon {
        if !(*eps > 0.0) {
            out.push(Violation {
                field: "control.epsilon".into(),
                message: format!("must be positive, got {eps}"),
            });
        }
    }
    if let Some(list) = &section.eps_list {
        if list.is_empty() {
            out.push(Violation {
                field: "control.eps_list".into(),
                message: "must be nonempty".into(),
            });
        }
        if list.iter().any(|&e| !(e > 0.0)) {
            out.push(Violation {
                field: "control.eps_list".into(),
                message: "entries must be positive".into(),
            });
        }
        if list.windows(2).any(|w| w[1] >= w[0]) {
            out.push(Violation {
                field: "control.eps_list".into(),
                message: "entries must be strictly decreasing".into(),
            });
        }
    }
    if let Some(TargetForm::Vector { values }) = &section.target {
        if values.len() != dim {
            out.push(Violation {
                field: "control.target".into(),
                message: format!("vector target must have length {dim}"),
            });
        }
    }
    out
}

pub struct ValidateOutcome {
    pub violations: Vec<Violation>,
    pub b_rank: usize,
    pub report: Option<HypothesisReport>,
    pub verdict: Option<SolvabilityVerdict>,
    pub manifest_path: PathBuf,
}

/// Parse, audit the spec, estimate the hypothesis constants and evaluate
/// the solvability condition. Structural violations short-circuit the
/// numeric stages; the condition verdict is informational either way.
pub fn cmd_validate(opts: &RunOptions) -> Result<ValidateOutcome> {
    let r = resolve(opts)?;
    let mut clock = StageClock::start();
    let mut manifest = manifest_skeleton("validate", opts, &r, &[]);
    let manifest_path = manifest.write(&opts.out_dir)?;
    clock.lap("parse");

    let mut violations = validate_spec(&r.spec);
    violations.extend(control_section_violations(&r.config, r.spec.state_dim));
    let b_rank = control_rank(&r.spec.b_op);
    clock.lap("validate");

    let (report, verdict) = if violations.is_empty() {
        let grid = r.make_grid()?;
        let res = build_resolvent_grid_cached(&r.spec, &grid, r.cache.as_ref())?;
        clock.lap("resolvent");
        let control = r
            .config
            .control
            .signal
            .sample(&grid, r.spec.control_dim())?;
        let report = estimate_constants(&r.spec, &grid, &res, r.tols.probe_radius, Some(&control))?;
        let verdict = check_solvability(&report, &r.spec);
        clock.lap("estimate");
        (Some(report), Some(verdict))
    } else {
        (None, None)
    };

    manifest.status = if violations.is_empty() {
        "complete"
    } else {
        "violations"
    }
    .into();
    manifest.timings = clock.into_timings();
    manifest.write(&opts.out_dir)?;
    Ok(ValidateOutcome {
        violations,
        b_rank,
        report,
        verdict,
        manifest_path,
    })
}

pub struct SolveOutcome {
    pub trajectory_csv: PathBuf,
    pub manifest_path: PathBuf,
    pub picard: PicardReport,
    pub terminal: DVector<f64>,
}

/// Build grid and resolvent (cache-aware), run the Picard solve with the
/// config's open-loop control, and write the trajectory CSV.
pub fn cmd_solve(opts: &RunOptions) -> Result<SolveOutcome> {
    let r = resolve(opts)?;
    let mut clock = StageClock::start();
    let mut manifest = manifest_skeleton("solve", opts, &r, &["trajectory.csv"]);
    let manifest_path = manifest.write(&opts.out_dir)?;
    clock.lap("parse");

    let grid = r.make_grid()?;
    let res = build_resolvent_grid_cached(&r.spec, &grid, r.cache.as_ref())?;
    clock.lap("resolvent");
    let control = r
        .config
        .control
        .signal
        .sample(&grid, r.spec.control_dim())?;
    let (traj, picard) = picard_solve(
        &r.spec,
        &res,
        &control,
        r.tols.picard_tol,
        r.tols.picard_max_iter,
    )?;
    clock.lap("solve");

    let trajectory_csv = opts.out_dir.join("trajectory.csv");
    export::write_text(&trajectory_csv, &export::trajectory_csv(&traj))?;
    clock.lap("export");

    manifest.status = "complete".into();
    manifest.timings = clock.into_timings();
    manifest.write(&opts.out_dir)?;
    Ok(SolveOutcome {
        trajectory_csv,
        manifest_path,
        terminal: traj.terminal_value().clone(),
        picard,
    })
}

pub struct ControlOutcome {
    pub control_csv: PathBuf,
    pub trajectory_csv: PathBuf,
    pub summary_csv: PathBuf,
    pub manifest_path: PathBuf,
    pub epsilon: f64,
    pub terminal_error: f64,
    pub identity_defect: f64,
    pub defect_norm: f64,
    pub outer_iterations: usize,
    pub steerable: bool,
}

fn resolve_target(
    target: &TargetForm,
    spec: &ProblemSpec,
    res: &ResolventGrid,
    tols: &ToleranceConfig,
) -> Result<(DVector<f64>, Option<Trajectory>)> {
    if matches!(target, TargetForm::FreeResponse) {
        let zero = GridControl::zeros(res.grid().nodes().len(), spec.control_dim());
        let (traj, _) = picard_solve(spec, res, &zero, tols.picard_tol, tols.picard_max_iter)?;
        let b = target.resolve(spec.state_dim, Some(traj.terminal_value()))?;
        Ok((b, Some(traj)))
    } else {
        Ok((target.resolve(spec.state_dim, None)?, None))
    }
}

/// Full synthesis pipeline: Gramian, regularized steering law, outer loop;
/// writes the control signal, the steered trajectory and a one-row summary.
pub fn cmd_control(opts: &RunOptions) -> Result<ControlOutcome> {
    let r = resolve(opts)?;
    let epsilon = match &opts.eps {
        Some(list) if list.len() == 1 => list[0],
        Some(_) => {
            return Err(Error::Config(
                "control takes a single --eps value; use sweep for lists".into(),
            ))
        }
        None => r.config.control.epsilon.unwrap_or(1e-2),
    };
    if !(epsilon > 0.0) {
        return Err(Error::Config(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let target_form = opts
        .target
        .clone()
        .or_else(|| r.config.control.target.clone())
        .ok_or_else(|| {
            Error::Config("no steering target (config [control].target or --target)".into())
        })?;

    let mut clock = StageClock::start();
    let mut manifest = manifest_skeleton(
        "control",
        opts,
        &r,
        &["control.csv", "trajectory.csv", "summary.csv"],
    );
    manifest.eps = vec![epsilon];
    let manifest_path = manifest.write(&opts.out_dir)?;
    clock.lap("parse");

    let grid = r.make_grid()?;
    let res = build_resolvent_grid_cached(&r.spec, &grid, r.cache.as_ref())?;
    clock.lap("resolvent");
    let gram = assemble_gramian(&res, &r.spec.b_op)?;
    clock.lap("gramian");
    let (target, _) = resolve_target(&target_form, &r.spec, &res, &r.tols)?;
    let params = SynthesisParams {
        epsilon,
        tol_outer: r.tols.outer_tol,
        max_outer: r.tols.outer_max_iter,
        picard_tol: r.tols.picard_tol,
        picard_max_iter: r.tols.picard_max_iter,
    };
    let synthesis = synthesize_control(&r.spec, &res, &gram, &target, &params)?;
    clock.lap("synthesis");

    let control_csv = opts.out_dir.join("control.csv");
    let trajectory_csv = opts.out_dir.join("trajectory.csv");
    let summary_csv = opts.out_dir.join("summary.csv");
    export::write_text(
        &control_csv,
        &export::control_csv(&grid, &synthesis.control),
    )?;
    export::write_text(
        &trajectory_csv,
        &export::trajectory_csv(&synthesis.trajectory),
    )?;
    let steerable = gram.is_positive_definite();
    let summary = format!(
        "epsilon,terminal_error,control_energy,outer_iterations,defect_norm,verdict\n{},{},{},{},{},{}\n",
        synthesis.epsilon,
        synthesis.terminal_error,
        synthesis.control_energy,
        synthesis.outer_iterations,
        synthesis.defect.norm(),
        if steerable { "steerable" } else { "not steerable" },
    );
    export::write_text(&summary_csv, &summary)?;
    clock.lap("export");

    manifest.status = "complete".into();
    manifest.timings = clock.into_timings();
    manifest.write(&opts.out_dir)?;
    Ok(ControlOutcome {
        control_csv,
        trajectory_csv,
        summary_csv,
        manifest_path,
        epsilon,
        terminal_error: synthesis.terminal_error,
        identity_defect: synthesis.identity_defect,
        defect_norm: synthesis.defect.norm(),
        outer_iterations: synthesis.outer_iterations,
        steerable,
    })
}

pub struct SweepOutcome {
    pub sweep_csv: PathBuf,
    pub decay_csv: PathBuf,
    pub manifest_path: PathBuf,
    pub rows: Vec<SweepRow>,
    pub decay: DecayTable,
}

/// Deterministic random directions for the decay table.
fn decay_probes(dim: usize, g: &GramianPackage) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED);
    let mut probes = Vec::with_capacity(DECAY_PROBES);
    while probes.len() < DECAY_PROBES {
        let v = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
        if v.norm() > 1e-3 {
            probes.push(v.normalize());
        }
    }
    // A rank-deficient Gramian also gets its kernel direction probed, which
    // is the direction that defeats steerability.
    if !g.is_positive_definite() {
        let kernel_dir = g.eigenvectors().column(dim - 1).into_owned();
        probes.push(kernel_dir);
    }
    probes
}

/// ε-sweep plus the strong-decay controllability table.
pub fn cmd_sweep(opts: &RunOptions) -> Result<SweepOutcome> {
    let r = resolve(opts)?;
    let eps_list = opts
        .eps
        .clone()
        .or_else(|| r.config.control.eps_list.clone())
        .unwrap_or_else(|| vec![1e-1, 1e-2, 1e-3]);
    if eps_list.is_empty() {
        return Err(Error::Config("epsilon list must be nonempty".into()));
    }
    if eps_list.iter().any(|&e| !(e > 0.0)) || eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config(
            "epsilon list must be positive and strictly decreasing".into(),
        ));
    }
    let target_form = opts
        .target
        .clone()
        .or_else(|| r.config.control.target.clone())
        .ok_or_else(|| {
            Error::Config("no steering target (config [control].target or --target)".into())
        })?;

    let mut clock = StageClock::start();
    let mut manifest = manifest_skeleton("sweep", opts, &r, &["sweep.csv", "decay.csv"]);
    manifest.eps = eps_list.clone();
    let manifest_path = manifest.write(&opts.out_dir)?;
    clock.lap("parse");

    let grid = r.make_grid()?;
    let res = build_resolvent_grid_cached(&r.spec, &grid, r.cache.as_ref())?;
    clock.lap("resolvent");
    let gram = assemble_gramian(&res, &r.spec.b_op)?;
    let (target, _) = resolve_target(&target_form, &r.spec, &res, &r.tols)?;
    let base = SynthesisParams {
        epsilon: eps_list[0],
        tol_outer: r.tols.outer_tol,
        max_outer: r.tols.outer_max_iter,
        picard_tol: r.tols.picard_tol,
        picard_max_iter: r.tols.picard_max_iter,
    };
    let rows = epsilon_sweep(&r.spec, &res, &gram, &target, &eps_list, &base)?;
    clock.lap("sweep");

    let probes = decay_probes(r.spec.state_dim, &gram);
    let decay = test_linear_controllability(&gram, &eps_list, &probes, r.tols.decay_tol)?;
    clock.lap("decay");

    let sweep_csv = opts.out_dir.join("sweep.csv");
    let decay_csv = opts.out_dir.join("decay.csv");
    export::write_text(&sweep_csv, &export::sweep_csv(&rows))?;
    export::write_text(&decay_csv, &export::decay_csv(&decay))?;
    clock.lap("export");

    manifest.status = "complete".into();
    manifest.timings = clock.into_timings();
    manifest.write(&opts.out_dir)?;
    Ok(SweepOutcome {
        sweep_csv,
        decay_csv,
        manifest_path,
        rows,
        decay,
    })
}

/// Human-readable verdict line for sweeps.
pub fn describe_decay(decay: &DecayTable) -> String {
    format!(
        "controllability: {} (lambda_min = {:.6e}, decay_tol = {})",
        match decay.verdict {
            ControllabilityVerdict::Controllable => "positive",
            ControllabilityVerdict::NotControllable => "negative",
        },
        decay.lambda_min,
        decay.decay_tol
    )
}
