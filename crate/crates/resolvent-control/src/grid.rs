//! Time grids on `[0, horizon]`.
//!
//! All solvers in this crate work on a fixed node set. Grids are built
//! per-segment uniform so that every impulse time is hit exactly by a node;
//! between two consecutive impulse times the spacing is constant.

use crate::error::{Error, Result};

/// Discretization of `[0, horizon]` with nodes `0 = τ₀ < … < τ_K = horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    nodes: Vec<f64>,
    /// Node index of each impulse time, in increasing order.
    impulse_nodes: Vec<usize>,
    impulse_aligned: bool,
    step_max: f64,
}

impl TimeGrid {
    /// Uniform grid with spacing at most `step` and no interior alignment
    /// constraints.
    pub fn uniform(horizon: f64, step: f64) -> Result<Self> {
        Self::aligned(horizon, step, &[])
    }

    /// Grid with spacing at most `step` whose node set contains every entry
    /// of `impulse_times` exactly. Each segment between consecutive impulse
    /// times (and the ends of the interval) is subdivided uniformly.
    pub fn aligned(horizon: f64, step: f64, impulse_times: &[f64]) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::Domain(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::Domain(format!(
                "grid step must be positive, got {step}"
            )));
        }
        let mut boundaries = vec![0.0];
        for &t in impulse_times {
            if !(t > 0.0 && t < horizon) {
                return Err(Error::Domain(format!(
                    "impulse time {t} outside (0, {horizon})"
                )));
            }
            if t <= *boundaries.last().unwrap() {
                return Err(Error::Domain(
                    "impulse times must be strictly increasing".into(),
                ));
            }
            boundaries.push(t);
        }
        boundaries.push(horizon);

        let mut nodes = vec![0.0];
        let mut impulse_nodes = Vec::with_capacity(impulse_times.len());
        for seg in boundaries.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let n_sub = ((b - a) / step).ceil().max(1.0) as usize;
            let h = (b - a) / n_sub as f64;
            for k in 1..n_sub {
                nodes.push(a + k as f64 * h);
            }
            // Segment endpoints are stored exactly, not as a + n_sub*h.
            nodes.push(b);
        }
        for &t in impulse_times {
            let idx = nodes
                .iter()
                .position(|&x| x == t)
                .expect("impulse time is a segment boundary");
            impulse_nodes.push(idx);
        }
        let step_max = nodes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0_f64, f64::max);
        Ok(TimeGrid {
            nodes,
            impulse_nodes,
            impulse_aligned: true,
            step_max,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Number of nodes minus one (index of the final node).
    pub fn last_index(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn node(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    pub fn horizon(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn step_max(&self) -> f64 {
        self.step_max
    }

    pub fn impulse_aligned(&self) -> bool {
        self.impulse_aligned
    }

    /// Node indices of the impulse times this grid was aligned to.
    pub fn impulse_nodes(&self) -> &[usize] {
        &self.impulse_nodes
    }

    /// Index `i` with `τ_i ≤ t ≤ τ_{i+1}`; the last cell is used for `t`
    /// at the horizon.
    pub fn bracket(&self, t: f64) -> Result<usize> {
        if !(0.0..=self.horizon()).contains(&t) {
            return Err(Error::Domain(format!(
                "time {t} outside [0, {}]",
                self.horizon()
            )));
        }
        let i = self.nodes.partition_point(|&x| x <= t);
        Ok(i.saturating_sub(1).min(self.nodes.len() - 2))
    }

    /// Trapezoid weights over the whole grid (node spacing may vary).
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let n = self.nodes.len();
        let mut w = vec![0.0; n];
        for i in 0..n - 1 {
            let h = self.nodes[i + 1] - self.nodes[i];
            w[i] += 0.5 * h;
            w[i + 1] += 0.5 * h;
        }
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_grid_hits_ends_exactly() {
        let g = TimeGrid::uniform(1.0, 1e-3).unwrap();
        assert_eq!(g.node(0), 0.0);
        assert_eq!(g.horizon(), 1.0);
        assert_eq!(g.last_index(), 1000);
    }

    #[test]
    fn aligned_grid_contains_impulse_times() {
        let g = TimeGrid::aligned(1.0, 1e-2, &[0.3, 0.7]).unwrap();
        let idx = g.impulse_nodes();
        assert_eq!(g.node(idx[0]), 0.3);
        assert_eq!(g.node(idx[1]), 0.7);
        assert!(g.step_max() <= 1e-2 + 1e-15);
    }

    #[test]
    fn rejects_bad_impulse_times() {
        assert!(TimeGrid::aligned(1.0, 1e-2, &[1.0]).is_err());
        assert!(TimeGrid::aligned(1.0, 1e-2, &[0.5, 0.5]).is_err());
        assert!(TimeGrid::aligned(1.0, 1e-2, &[0.7, 0.3]).is_err());
    }

    #[test]
    fn trapezoid_weights_sum_to_horizon() {
        let g = TimeGrid::aligned(2.0, 1e-2, &[0.37, 1.11]).unwrap();
        let total: f64 = g.trapezoid_weights().iter().sum();
        assert!((total - 2.0).abs() < 1e-12);
    }

    #[test]
    fn bracket_finds_enclosing_cell() {
        let g = TimeGrid::uniform(1.0, 0.25).unwrap();
        assert_eq!(g.bracket(0.0).unwrap(), 0);
        assert_eq!(g.bracket(0.3).unwrap(), 1);
        assert_eq!(g.bracket(1.0).unwrap(), 3);
        assert!(g.bracket(1.5).is_err());
    }

    proptest! {
        #[test]
        fn nodes_strictly_increasing(step in 1e-3f64..0.3, t1 in 0.05f64..0.45, dt in 0.05f64..0.45) {
            let g = TimeGrid::aligned(1.0, step, &[t1, t1 + dt]).unwrap();
            prop_assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
            prop_assert_eq!(g.node(0), 0.0);
            prop_assert_eq!(g.horizon(), 1.0);
            for (&q, &i) in [t1, t1 + dt].iter().zip(g.impulse_nodes()) {
                prop_assert_eq!(g.node(i), q);
            }
        }
    }
}
