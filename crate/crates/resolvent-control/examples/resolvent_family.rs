//! Build the two-parameter resolvent family of a scalar oscillator and
//! check it against the sine family `R(t,s) = sin(m(t-s))/m`,
//! `∂R/∂s(t,s) = -cos(m(t-s))`, including the order-2 convergence of the
//! stepper and the sampled operator bounds.
//!
//! ```bash
//! cargo run --example resolvent_family
//! ```

use nalgebra::{DMatrix, DVector};
use resolvent_control::{
    build_resolvent_grid, HistoryFunction, ImpulseSchedule, OperatorStructure, ProblemSpec,
    ResolventGrid, TimeGrid,
};

fn oscillator(m: f64) -> ProblemSpec {
    ProblemSpec {
        state_dim: 1,
        horizon: 1.0,
        a_op: Box::new(move |_| DMatrix::from_element(1, 1, -m * m)),
        kernel: None,
        f1: None,
        f2: None,
        b_op: DMatrix::from_element(1, 1, 1.0),
        impulses: ImpulseSchedule::empty(),
        history: HistoryFunction::constant(DVector::zeros(1)),
        v0: DVector::zeros(1),
        v0_neutral: None,
        structure: OperatorStructure::Diagonal,
    }
}

fn max_errors(res: &ResolventGrid, m: f64) -> (f64, f64) {
    let nodes = res.grid().nodes();
    let (mut er, mut ed) = (0.0_f64, 0.0_f64);
    for i in 0..nodes.len() {
        for j in 0..=i {
            let u = m * (nodes[i] - nodes[j]);
            er = er.max((res.r_node(i, j)[(0, 0)] - u.sin() / m).abs());
            ed = ed.max((res.ds_r_node(i, j)[(0, 0)] + u.cos()).abs());
        }
    }
    (er, ed)
}

fn main() -> resolvent_control::Result<()> {
    let m = 2.0;
    let spec = oscillator(m);

    println!("max node errors vs sin(m(t-s))/m and -cos(m(t-s)), m = {m}:\n");
    println!("{:>10} {:>12} {:>12}", "step", "R error", "dsR error");
    let mut previous: Option<f64> = None;
    for step in [4e-3, 2e-3, 1e-3] {
        let res = build_resolvent_grid(&spec, &TimeGrid::uniform(1.0, step)?)?;
        let (er, ed) = max_errors(&res, m);
        match previous {
            Some(p) => println!(
                "{step:>10.0e} {er:>12.3e} {ed:>12.3e}   (ratio {:.2})",
                p / er
            ),
            None => println!("{step:>10.0e} {er:>12.3e} {ed:>12.3e}"),
        }
        previous = Some(er);
    }

    let res = build_resolvent_grid(&spec, &TimeGrid::uniform(1.0, 1e-3)?)?;
    let bounds = res.verify_resolvent_bounds();
    println!("\nsampled bounds over {} node pairs:", bounds.node_pairs);
    println!(
        "  M1 = {:.6}  (closed form 1/m = {:.6} since m*l >= pi/2)",
        bounds.m1,
        1.0 / m
    );
    println!("  M2 = {:.6}  (sup |cos| = 1)", bounds.m2);
    println!(
        "  LR = {:.4}, MR = {:.4}  (forward Lipschitz quotients)",
        bounds.lr, bounds.mr
    );

    // Off-node evaluation interpolates bilinearly and is exact at nodes.
    let v = res.eval_r(0.513, 0.101)?[(0, 0)];
    println!(
        "\neval_r(0.513, 0.101) = {v:.8}  vs closed form {:.8}",
        (m * (0.513 - 0.101)).sin() / m
    );
    println!(
        "eval_r(s, s) off-node = {:.2e} (diagonal stays at zero)",
        res.eval_r(0.7003, 0.7003)?[(0, 0)].abs()
    );
    Ok(())
}
