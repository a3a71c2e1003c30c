//! Audit a scenario: structural validation, sampled hypothesis constants
//! and the sufficient solvability condition.
//!
//! The condition `2M₁ + M₂ + r₂ + M₁ℓσ + M₁‖B‖λℓ + M₁Σe_q + M₂Σd_q < 1`
//! is conservative — it fails here even though the Picard iteration
//! contracts comfortably, which is exactly why the artifact reports both
//! the verdict and the empirical contraction.
//!
//! ```bash
//! cargo run --example hypothesis_audit
//! ```

use resolvent_control::{
    build_resolvent_grid, build_wave_memory_scenario, check_solvability, estimate_constants,
    picard_solve, validate_spec, GridControl, TimeGrid, WaveMemoryParams,
};

fn main() -> resolvent_control::Result<()> {
    let spec = build_wave_memory_scenario(&WaveMemoryParams::demo(4))?;

    let violations = validate_spec(&spec);
    println!("structural violations: {}", violations.len());
    for v in &violations {
        println!("  {v}");
    }

    let grid = TimeGrid::aligned(spec.horizon, 5e-3, &spec.impulses.times)?;
    let res = build_resolvent_grid(&spec, &grid)?;
    let report = estimate_constants(&spec, &grid, &res, 2.0, None)?;

    println!(
        "\nsampled constants ({} state probes, {} time samples, {} node pairs):",
        report.state_probe_count, report.time_sample_count, report.node_pair_count
    );
    println!(
        "  resolvent bounds   M1 = {:.4}, M2 = {:.4}",
        report.m1_est, report.m2_est
    );
    println!(
        "  time regularity    LR = {:.4}, MR = {:.4}",
        report.lr_est, report.mr_est
    );
    println!("  forcing growth     sigma = {:.4}", report.sigma_est);
    println!(
        "  neutral term       r1 = {:.4}, r2 = {:.4}, L2 = {:.4}",
        report.r1_est, report.r2_est, report.l2_est
    );
    println!(
        "  impulses           d_q = {:?}, e_q = {:?}",
        report
            .dq_est
            .iter()
            .map(|v| format!("{v:.4}"))
            .collect::<Vec<_>>(),
        report
            .eq_est
            .iter()
            .map(|v| format!("{v:.4}"))
            .collect::<Vec<_>>()
    );
    println!(
        "  kernel             h1 = {:.4}, h2 = {:.4}, L_zeta = {:.4}",
        report.h1_est, report.h2_est, report.lzeta_est
    );

    let verdict = check_solvability(&report, &spec);
    println!(
        "\nsufficient condition: lhs = {:.4} -> {}",
        verdict.lhs, verdict.condition
    );

    let control = GridControl::zeros(grid.nodes().len(), spec.control_dim());
    let (_, picard) = picard_solve(&spec, &res, &control, 1e-10, 100)?;
    println!(
        "empirical Picard contraction (what actually happens): {:?} in {} iterations",
        picard
            .contraction_ratios()
            .iter()
            .map(|r| format!("{r:.3}"))
            .collect::<Vec<_>>(),
        picard.iterations
    );
    Ok(())
}
