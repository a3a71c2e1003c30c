//! Solve the free scalar wave and compare against the closed form.
//!
//! With constant history `a`, initial velocity `b` and everything else
//! zero, the mild solution collapses to `a·cos t + b·sin t`.
//!
//! ```bash
//! cargo run --example free_wave
//! ```

use nalgebra::{DMatrix, DVector};
use resolvent_control::{
    build_resolvent_grid, picard_solve, GridControl, HistoryFunction, ImpulseSchedule,
    OperatorStructure, ProblemSpec, TimeGrid,
};

fn main() -> resolvent_control::Result<()> {
    let (a, b) = (0.7, -0.4);
    let spec = ProblemSpec {
        state_dim: 1,
        horizon: 1.0,
        a_op: Box::new(|_| DMatrix::from_element(1, 1, -1.0)),
        kernel: None,
        f1: None,
        f2: None,
        b_op: DMatrix::from_element(1, 1, 1.0),
        impulses: ImpulseSchedule::empty(),
        history: HistoryFunction::constant(DVector::from_element(1, a)),
        v0: DVector::from_element(1, b),
        v0_neutral: None,
        structure: OperatorStructure::Diagonal,
    };
    let grid = TimeGrid::uniform(spec.horizon, 1e-3)?;
    let res = build_resolvent_grid(&spec, &grid)?;
    let control = GridControl::zeros(grid.nodes().len(), 1);
    let (traj, report) = picard_solve(&spec, &res, &control, 1e-10, 50)?;

    println!("free wave: theta'' = -theta, theta(0) = {a}, theta'(0) = {b}");
    println!("converged in {} iteration(s)\n", report.iterations);
    println!(
        "{:>6} {:>14} {:>14} {:>10}",
        "t", "solved", "closed form", "error"
    );
    let mut worst = 0.0_f64;
    for k in 0..=10 {
        let t = k as f64 / 10.0;
        let solved = traj.value_at(t)?[0];
        let exact = a * t.cos() + b * t.sin();
        worst = worst.max((solved - exact).abs());
        println!(
            "{t:>6.2} {solved:>14.9} {exact:>14.9} {:>10.2e}",
            (solved - exact).abs()
        );
    }
    println!("\nmax node error {worst:.3e}");
    Ok(())
}
