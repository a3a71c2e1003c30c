//! Independent reference solver for cross-validation.
//!
//! This is a dense method-of-lines integrator for the neutral Volterra
//! system, deliberately built on a different formulation than the library:
//! it integrates the substituted variable `w(t) = ϑ(t) + c·ϑ(t-δ)` with a
//! classical fixed-step RK4 (trapezoid tail for the memory integral) and
//! recovers `ϑ` through the delay recursion afterwards. No resolvent
//! family, no mild-solution map, no Picard iteration is involved, so an
//! agreement between the two solvers is meaningful.

use nalgebra::{DMatrix, DVector};

type KernelFn = Box<dyn Fn(f64, f64) -> DMatrix<f64>>;
type ForcingFn = Box<dyn Fn(f64, &DVector<f64>) -> DVector<f64>>;

/// Neutral Volterra problem in the reference formulation. The neutral term
/// is the linear delay form `f₂(t, ϑ_t) = c·ϑ(t-δ)` with `δ > 0`.
pub struct ReferenceProblem {
    pub dim: usize,
    pub horizon: f64,
    pub a_op: Box<dyn Fn(f64) -> DMatrix<f64>>,
    pub kernel: Option<KernelFn>,
    /// Total forcing `f₁(t, ϑ(t)) + B u(t)`.
    pub forcing: Option<ForcingFn>,
    pub neutral_coeff: f64,
    pub neutral_delay: f64,
    /// Initial history `Φ(θ)` for `θ ≤ 0`.
    pub history: Box<dyn Fn(f64) -> DVector<f64>>,
    /// `w'(0) = v₀ + y₁`; pass the same effective initial velocity the
    /// solver under test uses so both integrate the same initial data.
    pub w_prime0: DVector<f64>,
}

/// Dense reference solution on a uniform fine grid.
pub struct ReferenceSolution {
    step: f64,
    theta: Vec<DVector<f64>>,
}

impl ReferenceSolution {
    /// `ϑ(t)` by linear interpolation on the fine grid.
    pub fn eval(&self, t: f64) -> DVector<f64> {
        let x = t / self.step;
        let i = (x.floor() as usize).min(self.theta.len() - 1);
        let j = (i + 1).min(self.theta.len() - 1);
        let frac = x - i as f64;
        &self.theta[i] * (1.0 - frac) + &self.theta[j] * frac
    }
}

/// Integrate with `steps` RK4 steps over `[0, horizon]`.
pub fn solve_reference(problem: &ReferenceProblem, steps: usize) -> ReferenceSolution {
    let h = problem.horizon / steps as f64;
    let c = problem.neutral_coeff;
    let delta = problem.neutral_delay;
    let dim = problem.dim;

    // History of ϑ on the fine grid, filled as w becomes available.
    let mut theta: Vec<DVector<f64>> = Vec::with_capacity(steps + 1);
    let mut w_hist: Vec<DVector<f64>> = Vec::with_capacity(steps + 1);

    let phi = |t: f64| -> DVector<f64> {
        if t <= 0.0 {
            (problem.history)(t)
        } else {
            (problem.history)(0.0)
        }
    };
    let theta_at = |theta: &Vec<DVector<f64>>, t: f64| -> DVector<f64> {
        if t < 0.0 {
            return phi(t);
        }
        let x = t / h;
        let i = x.floor() as usize;
        let i = i.min(theta.len().saturating_sub(1));
        let j = (i + 1).min(theta.len().saturating_sub(1));
        let frac = (x - i as f64).clamp(0.0, 1.0);
        &theta[i] * (1.0 - frac) + &theta[j] * frac
    };

    let mut w = phi(0.0) + phi(-delta) * c;
    let mut v = problem.w_prime0.clone();
    w_hist.push(w.clone());
    theta.push(phi(0.0));

    // Memory integral ∫₀^{ts} ζ(ts, s) w(s) ds: trapezoid over stored nodes
    // plus a trapezoid tail from the last stored node to the stage time.
    let memory = |w_hist: &Vec<DVector<f64>>, ts: f64, w_stage: &DVector<f64>| -> DVector<f64> {
        let kernel = match &problem.kernel {
            Some(k) => k,
            None => return DVector::zeros(dim),
        };
        let n = w_hist.len() - 1;
        let t_n = n as f64 * h;
        let mut acc = DVector::zeros(dim);
        for (k, wk) in w_hist.iter().enumerate() {
            let weight = if k == 0 || k == n { 0.5 * h } else { h };
            if n == 0 {
                break;
            }
            acc += kernel(ts, k as f64 * h) * wk * weight;
        }
        let tail = ts - t_n;
        if tail > 0.0 {
            acc += (kernel(ts, t_n) * &w_hist[n] + kernel(ts, ts) * w_stage) * (0.5 * tail);
        }
        acc
    };

    let accel = |w_hist: &Vec<DVector<f64>>,
                 theta_hist: &Vec<DVector<f64>>,
                 ts: f64,
                 w_stage: &DVector<f64>|
     -> DVector<f64> {
        let mut acc = (problem.a_op)(ts) * w_stage;
        acc += memory(w_hist, ts, w_stage);
        if let Some(f) = &problem.forcing {
            let theta_stage = w_stage - theta_at(theta_hist, ts - delta) * c;
            acc += f(ts, &theta_stage);
        }
        acc
    };

    for n in 0..steps {
        let t = n as f64 * h;
        // Classical RK4 on (w, v).
        let k1v = accel(&w_hist, &theta, t, &w);
        let k1w = v.clone();
        let w2 = &w + &k1w * (0.5 * h);
        let k2v = accel(&w_hist, &theta, t + 0.5 * h, &w2);
        let k2w = &v + &k1v * (0.5 * h);
        let w3 = &w + &k2w * (0.5 * h);
        let k3v = accel(&w_hist, &theta, t + 0.5 * h, &w3);
        let k3w = &v + &k2v * (0.5 * h);
        let w4 = &w + &k3w * h;
        let k4v = accel(&w_hist, &theta, t + h, &w4);
        let k4w = &v + &k3v * h;

        w += (k1w + &k2w * 2.0 + &k3w * 2.0 + k4w) * (h / 6.0);
        v += (k1v + &k2v * 2.0 + &k3v * 2.0 + k4v) * (h / 6.0);
        w_hist.push(w.clone());

        // Delay recursion: ϑ(t) = w(t) - c·ϑ(t-δ).
        let t_next = (n + 1) as f64 * h;
        let lag = theta_at(&theta, t_next - delta);
        theta.push(&w - lag * c);
    }

    ReferenceSolution { step: h, theta }
}
