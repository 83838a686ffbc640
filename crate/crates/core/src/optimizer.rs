//! Minimization of the discrete action over the free nodes.
//!
//! Limited-memory BFGS with Armijo backtracking. The initial inverse-Hessian
//! guess is the inverse of the kinetic Hessian `(2/h)·L` (`L` the path
//! Laplacian with `p_0 = 0` fixed and a free last node), scaled by the
//! usual `sᵀy / yᵀP⁻¹y` factor; without it the `O(M²)` conditioning of the
//! kinetic term makes long horizons very slow. Trial points with a node in a
//! collision ball are treated as `+∞` and the step is shrunk.
//!
//! Close to a minimizer the attainable decrease drops below the rounding
//! noise of the action. A step is then also accepted when the action stays
//! within `APPROX_WOLFE_EPS·(1+|f|)` of the current value and the
//! directional derivative satisfies the approximate Armijo condition
//! `g(x+αd)ᵀd ≤ (1-2c)|g(x)ᵀd|`.

use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::action::{evaluate, ActionParts};
use crate::diagnostics::energy_stats;
use crate::error::{Error, Result};
use crate::problem::{Point, ProblemSpec, DEFAULT_COLLISION_DELTA};
use crate::trajectory::{fmt17, OddTrajectory};

/// Relative rounding band for the approximate Armijo acceptance.
pub const APPROX_WOLFE_EPS: f64 = 1e-10;

/// Smallest trial step before the line search gives up.
const MIN_STEP: f64 = 1e-20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimizeOptions {
    /// Stop when the Euclidean norm of the gradient drops to this value.
    pub grad_tol: f64,
    pub max_iters: usize,
    pub armijo_c: f64,
    pub backtrack_ratio: f64,
    /// Number of stored correction pairs; 0 gives preconditioned steepest descent.
    pub memory: usize,
    pub collision_delta: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            grad_tol: 1e-8,
            max_iters: 100_000,
            armijo_c: 1e-4,
            backtrack_ratio: 0.5,
            memory: 10,
            collision_delta: DEFAULT_COLLISION_DELTA,
        }
    }
}

impl MinimizeOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::ParameterRange(what.to_string()));
        if !(self.grad_tol > 0.0) {
            return bad("grad_tol must be positive");
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 0.5) {
            return bad("armijo_c must lie in (0, 1/2)");
        }
        if !(self.backtrack_ratio > 0.0 && self.backtrack_ratio < 1.0) {
            return bad("backtrack_ratio must lie in (0, 1)");
        }
        if !(self.collision_delta > 0.0) {
            return bad("collision_delta must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub action: f64,
    pub grad_norm: f64,
    pub step_size: f64,
    pub min_center_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizeReport {
    pub trajectory: OddTrajectory,
    /// Minimal action `a_n` found for this horizon.
    pub action_value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub min_center_distance: f64,
    /// `|p_M - p_{M-1}| / step`.
    pub terminal_speed: f64,
    pub energy_mean: f64,
    pub energy_spread: f64,
    pub history: Vec<IterationRecord>,
}

impl MinimizeReport {
    /// Writes the iteration log as CSV `iter,action,grad_norm,step_size,min_center_distance`.
    pub fn write_iteration_log<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iter", "action", "grad_norm", "step_size", "min_center_distance"])?;
        for r in &self.history {
            w.write_record([
                r.iter.to_string(),
                fmt17(r.action),
                fmt17(r.grad_norm),
                fmt17(r.step_size),
                fmt17(r.min_center_distance),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Speed of the last segment. The free endpoint makes `q̇(n) = 0` the
/// natural boundary condition of a stationary path, so small values
/// corroborate stationarity.
pub fn natural_boundary_check(report: &MinimizeReport) -> f64 {
    report.terminal_speed
}

/// Thomas factorization of the kinetic Hessian `(2/h)·L`.
struct KineticPreconditioner {
    scale: f64,
    upper: Vec<f64>,
    inv_diag: Vec<f64>,
}

impl KineticPreconditioner {
    fn new(m: usize, step: f64) -> Self {
        let mut upper = vec![0.0; m];
        let mut inv_diag = vec![0.0; m];
        let mut prev_upper = 0.0;
        for k in 0..m {
            let diag = if k + 1 == m { 1.0 } else { 2.0 };
            let d = diag + prev_upper;
            inv_diag[k] = 1.0 / d;
            upper[k] = -1.0 / d;
            prev_upper = upper[k];
        }
        KineticPreconditioner {
            scale: step / 2.0,
            upper,
            inv_diag,
        }
    }

    /// `out = P⁻¹ r`.
    fn solve(&self, r: &[Point], out: &mut [Point]) {
        let m = r.len();
        let mut prev = Point::zeros();
        for k in 0..m {
            prev = (r[k] + prev) * self.inv_diag[k];
            out[k] = prev;
        }
        for k in (0..m - 1).rev() {
            out[k] -= out[k + 1] * self.upper[k];
        }
        for v in out.iter_mut() {
            *v *= self.scale;
        }
    }
}

fn dot(a: &[Point], b: &[Point]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn axpy(alpha: f64, x: &[Point], y: &mut [Point]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += xi * alpha;
    }
}

struct Correction {
    s: Vec<Point>,
    y: Vec<Point>,
    rho: f64,
}

/// Two-loop recursion: `dir = -H g`.
fn lbfgs_direction(g: &[Point], history: &VecDeque<Correction>, precond: &KineticPreconditioner, dir: &mut [Point], scratch: &mut [Point]) {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for c in history.iter().rev() {
        let a = c.rho * dot(&c.s, &q);
        axpy(-a, &c.y, &mut q);
        alphas.push(a);
    }
    precond.solve(&q, dir);
    if let Some(last) = history.back() {
        precond.solve(&last.y, scratch);
        let yhy = dot(&last.y, scratch);
        if yhy > 0.0 {
            let gamma = 1.0 / (last.rho * yhy);
            for d in dir.iter_mut() {
                *d *= gamma;
            }
        }
    }
    for (c, a) in history.iter().zip(alphas.iter().rev()) {
        let b = c.rho * dot(&c.y, dir);
        axpy(a - b, &c.s, dir);
    }
    for d in dir.iter_mut() {
        *d = -*d;
    }
}

/// Descends from `start` to a stationary point of the discrete action.
///
/// Every accepted iterate is feasible and the recorded action sequence is
/// non-increasing up to the rounding band [`APPROX_WOLFE_EPS`]. Failures
/// carry the last iterate in the error.
pub fn minimize(spec: &ProblemSpec, start: &OddTrajectory, opts: &MinimizeOptions) -> Result<MinimizeReport> {
    spec.require_symmetric()?;
    opts.validate()?;
    let delta = opts.collision_delta.max(spec.collision_delta);
    let horizon = start.horizon();
    let step = start.step();
    let m = start.node_count();

    let mut x = start.nodes().to_vec();
    let mut g = vec![Point::zeros(); m];
    let mut parts = match evaluate(spec, step, &x, delta, &mut g) {
        Some(p) => p,
        None => {
            let point = *x.iter().find(|p| spec.center_distance(p) <= delta).expect("an infeasible node");
            return Err(Error::Collision { point, delta });
        }
    };
    let precond = KineticPreconditioner::new(m, step);
    let mut corrections: VecDeque<Correction> = VecDeque::with_capacity(opts.memory);
    let mut dir = vec![Point::zeros(); m];
    let mut scratch = vec![Point::zeros(); m];
    let mut x_trial = vec![Point::zeros(); m];
    let mut g_trial = vec![Point::zeros(); m];
    let mut grad_norm = dot(&g, &g).sqrt();
    let mut history = vec![IterationRecord {
        iter: 0,
        action: parts.value,
        grad_norm,
        step_size: 0.0,
        min_center_distance: parts.min_center_distance,
    }];

    enum Outcome {
        Converged,
        Stalled,
        Trapped,
        OutOfIterations,
    }

    let mut iterations = 0;
    let outcome = loop {
        if grad_norm <= opts.grad_tol {
            break Outcome::Converged;
        }
        if iterations >= opts.max_iters {
            break Outcome::OutOfIterations;
        }

        lbfgs_direction(&g, &corrections, &precond, &mut dir, &mut scratch);
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            corrections.clear();
            precond.solve(&g, &mut dir);
            dir.iter_mut().for_each(|d| *d = -*d);
            slope = dot(&g, &dir);
            if !(slope < 0.0) {
                dir.copy_from_slice(&g);
                dir.iter_mut().for_each(|d| *d = -*d);
                slope = -grad_norm * grad_norm;
            }
        }

        let mut alpha = 1.0;
        let mut saw_feasible = false;
        let band = APPROX_WOLFE_EPS * (1.0 + parts.value.abs());
        let accepted: Option<ActionParts> = loop {
            if alpha < MIN_STEP {
                break None;
            }
            for ((xt, xi), di) in x_trial.iter_mut().zip(&x).zip(&dir) {
                *xt = xi + di * alpha;
            }
            match evaluate(spec, step, &x_trial, delta, &mut g_trial) {
                None => {}
                Some(p) => {
                    saw_feasible = true;
                    if p.value <= parts.value + opts.armijo_c * alpha * slope {
                        break Some(p);
                    }
                    if p.value <= parts.value + band && dot(&g_trial, &dir) <= (1.0 - 2.0 * opts.armijo_c) * slope.abs() {
                        break Some(p);
                    }
                }
            }
            alpha *= opts.backtrack_ratio;
        };

        let Some(new_parts) = accepted else {
            break if saw_feasible { Outcome::Stalled } else { Outcome::Trapped };
        };

        let s: Vec<Point> = x_trial.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<Point> = g_trial.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if opts.memory > 0 && sy > 1e-14 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if corrections.len() == opts.memory {
                corrections.pop_front();
            }
            corrections.push_back(Correction { s, y, rho: 1.0 / sy });
        }
        std::mem::swap(&mut x, &mut x_trial);
        std::mem::swap(&mut g, &mut g_trial);
        parts = new_parts;
        grad_norm = dot(&g, &g).sqrt();
        iterations += 1;
        history.push(IterationRecord {
            iter: iterations,
            action: parts.value,
            grad_norm,
            step_size: alpha,
            min_center_distance: parts.min_center_distance,
        });
    };

    let trajectory = OddTrajectory::new(horizon, x)?;
    let (energy_mean, energy_spread) = energy_stats(spec, &trajectory)?;
    let report = MinimizeReport {
        terminal_speed: trajectory.terminal_speed(),
        trajectory,
        action_value: parts.value,
        grad_norm,
        iterations,
        converged: matches!(outcome, Outcome::Converged),
        min_center_distance: parts.min_center_distance,
        energy_mean,
        energy_spread,
        history,
    };
    match outcome {
        Outcome::Converged => Ok(report),
        Outcome::Stalled => Err(Error::Stalled { report: Box::new(report) }),
        Outcome::Trapped => Err(Error::CollisionTrap { report: Box::new(report) }),
        Outcome::OutOfIterations => Err(Error::MaxIters { report: Box::new(report) }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{action, test_trajectory_y_axis};
    use crate::trajectory::Initializer;

    #[test]
    fn preconditioner_inverts_kinetic_hessian() {
        let (m, h) = (7, 0.25);
        let p = KineticPreconditioner::new(m, h);
        let r: Vec<Point> = (0..m).map(|k| Point::new(k as f64 - 2.0, (k * k) as f64 * 0.1)).collect();
        let mut z = vec![Point::zeros(); m];
        p.solve(&r, &mut z);
        // (2/h)·L z should reproduce r.
        for k in 0..m {
            let left = if k > 0 { z[k - 1] } else { Point::zeros() };
            let lz = if k + 1 == m { z[k] - left } else { z[k] * 2.0 - left - z[k + 1] };
            assert!((lz * (2.0 / h) - r[k]).norm() < 1e-12, "row {k}");
        }
    }

    #[test]
    fn zero_path_is_already_stationary() {
        let spec = ProblemSpec::symmetric(1.0).unwrap();
        let z = OddTrajectory::make_uniform(&spec, 2.0, 8, Initializer::ZeroOffset).unwrap();
        let r = minimize(&spec, &z, &MinimizeOptions::default()).unwrap();
        assert_eq!(r.iterations, 0);
        assert!(r.converged);
        assert_eq!(natural_boundary_check(&r), 0.0);
    }

    #[test]
    fn descent_from_test_path() {
        let spec = ProblemSpec::symmetric(1.0).unwrap();
        let start = test_trajectory_y_axis(1.0, 3.0, 0.6, 48).unwrap();
        let f0 = action(&spec, &start).unwrap().value;
        let r = minimize(&spec, &start, &MinimizeOptions::default()).unwrap();
        assert!(r.converged && r.grad_norm <= 1e-8);
        assert!(r.action_value <= f0);
        assert!(r.min_center_distance > 1e-6);
        let band = APPROX_WOLFE_EPS * (1.0 + f0);
        for w in r.history.windows(2) {
            assert!(w[1].action <= w[0].action + band);
        }
        // Stays on the symmetry axis.
        assert!(r.trajectory.nodes().iter().all(|p| p.x == 0.0));
    }

    #[test]
    fn option_validation_and_symmetry() {
        let spec = ProblemSpec::symmetric(1.0).unwrap();
        let start = test_trajectory_y_axis(1.0, 1.0, 0.6, 4).unwrap();
        let bad = MinimizeOptions {
            armijo_c: 0.6,
            ..Default::default()
        };
        assert!(matches!(minimize(&spec, &start, &bad), Err(Error::ParameterRange(_))));
        let asym = ProblemSpec::new(1.0, 0.3).unwrap();
        assert!(matches!(
            minimize(&asym, &start, &MinimizeOptions::default()),
            Err(Error::Symmetry(_))
        ));
    }

    #[test]
    fn max_iters_returns_partial_report() {
        let spec = ProblemSpec::symmetric(1.0).unwrap();
        let start = test_trajectory_y_axis(1.0, 5.0, 0.6, 80).unwrap();
        let opts = MinimizeOptions {
            max_iters: 3,
            ..Default::default()
        };
        let err = minimize(&spec, &start, &opts).unwrap_err();
        let partial = err.partial_report().expect("partial report");
        assert_eq!(partial.iterations, 3);
        assert!(!partial.converged);
        assert_eq!(err.kind(), "max_iters");
    }

    #[test]
    fn iteration_log_format() {
        let spec = ProblemSpec::symmetric(1.0).unwrap();
        let start = test_trajectory_y_axis(1.0, 1.0, 0.6, 8).unwrap();
        let r = minimize(&spec, &start, &MinimizeOptions::default()).unwrap();
        let mut buf = Vec::new();
        r.write_iteration_log(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iter,action,grad_norm,step_size,min_center_distance\n"));
        assert_eq!(text.lines().count(), r.history.len() + 1);
    }
}
