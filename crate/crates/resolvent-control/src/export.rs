//! CSV emitters.
//!
//! CSV is the only numeric output format; plotting is left to external
//! tools. Column contracts:
//!
//! * trajectory: `t,left_limit_flag,component_1..M` — impulse nodes emit
//!   two rows, the left limit (flag 1) followed by the right limit (flag 0);
//! * control: `t,u_1..u_m`;
//! * sweep: `epsilon,terminal_error,control_energy,outer_iterations`;
//! * decay: `epsilon,probe_1..probe_P,verdict`.
//!
//! Floats are written with Rust's shortest round-trip formatting, so two
//! runs of the same pipeline produce byte-identical bodies.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::control::{DecayTable, SweepRow};
use crate::error::Result;
use crate::grid::TimeGrid;
use crate::solver::{GridControl, Trajectory};

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let dim = traj.value(0).len();
    let mut out = String::from("t,left_limit_flag");
    for c in 1..=dim {
        let _ = write!(out, ",component_{c}");
    }
    out.push('\n');
    let jump_nodes: BTreeSet<usize> = traj.left_limit_nodes().collect();
    for (i, &t) in traj.grid().nodes().iter().enumerate() {
        if jump_nodes.contains(&i) {
            push_row(&mut out, t, 1, traj.left_value(i).iter());
        }
        push_row(&mut out, t, 0, traj.value(i).iter());
    }
    out
}

pub fn control_csv(grid: &TimeGrid, control: &GridControl) -> String {
    let m = control.control_dim();
    let mut out = String::from("t");
    for c in 1..=m {
        let _ = write!(out, ",u_{c}");
    }
    out.push('\n');
    for (&t, u) in grid.nodes().iter().zip(&control.samples) {
        let _ = write!(out, "{t}");
        for v in u.iter() {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("epsilon,terminal_error,control_energy,outer_iterations\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.epsilon, r.terminal_error, r.control_energy, r.outer_iterations
        );
    }
    out
}

pub fn decay_csv(table: &DecayTable) -> String {
    let mut out = String::from("epsilon");
    for p in 1..=table.probe_norms.len() {
        let _ = write!(out, ",probe_{p}");
    }
    out.push_str(",verdict\n");
    for (&eps, row) in table.epsilons.iter().zip(&table.rows) {
        let _ = write!(out, "{eps}");
        for v in row {
            let _ = write!(out, ",{v}");
        }
        let _ = writeln!(out, ",{}", table.verdict);
    }
    out
}

fn push_row<'a>(out: &mut String, t: f64, flag: u8, values: impl Iterator<Item = &'a f64>) {
    let _ = write!(out, "{t},{flag}");
    for v in values {
        let _ = write!(out, ",{v}");
    }
    out.push('\n');
}

pub fn write_text(path: &Path, body: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, body)?;
    Ok(())
}
