//! The discrete truncated action and the y-axis comparison paths that bound
//! its minimum.
//!
//! For an odd path with `p_0 = 0` the action is evaluated on `[0, n]` and
//! doubled. The kinetic term is exact for the piecewise-linear interpolant
//! and the potential term uses the trapezoid rule with half weights at
//! `t = 0` and `t = n`, so the discrete value is a smooth function of the
//! nodes and its gradient is computed exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{Point, ProblemSpec};
use crate::trajectory::{Initializer, OddTrajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionEvaluation {
    pub value: f64,
    pub kinetic: f64,
    pub potential: f64,
    /// `∂value/∂p_k` for the free nodes `k = 1..M`.
    pub gradient: Vec<Point>,
    pub min_center_distance: f64,
}

/// Value split returned by the allocation-free evaluator.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ActionParts {
    pub value: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub min_center_distance: f64,
}

/// Evaluates the discrete action of the free nodes `nodes` (grid step `step`)
/// and writes its gradient into `grad`. Returns `None` if a node lies within
/// `delta` of a center.
pub(crate) fn evaluate(spec: &ProblemSpec, step: f64, nodes: &[Point], delta: f64, grad: &mut [Point]) -> Option<ActionParts> {
    debug_assert_eq!(nodes.len(), grad.len());
    let m = nodes.len();
    let mut min_dist = spec.center_distance(&Point::zeros());
    for p in nodes {
        let d = spec.center_distance(p);
        if !(d > delta) {
            return None;
        }
        min_dist = min_dist.min(d);
    }

    let inv_h = 1.0 / step;
    let mut kinetic = 0.0;
    let mut prev = Point::zeros();
    for (k, p) in nodes.iter().enumerate() {
        let d = p - prev;
        kinetic += d.norm_squared();
        // 2·½|d/h|²·h summed over both halves gives |d|²/h per segment.
        let dk = d * (2.0 * inv_h);
        grad[k] = dk;
        if k > 0 {
            grad[k - 1] -= dk;
        }
        prev = *p;
    }
    kinetic *= inv_h;

    // Trapezoid on [0, n], doubled.
    let mut potential = 0.5 * spec.potential_unchecked(&Point::zeros());
    for (k, p) in nodes.iter().enumerate() {
        let w = if k + 1 == m { 0.5 } else { 1.0 };
        potential += w * spec.potential_unchecked(p);
        grad[k] += spec.grad_unchecked(p) * (2.0 * w * step);
    }
    potential *= 2.0 * step;

    Some(ActionParts {
        value: kinetic + potential,
        kinetic,
        potential,
        min_center_distance: min_dist,
    })
}

/// Discrete truncated action `∫_{-n}^{n} ½|q̇|² + U(q) dt` and its gradient.
pub fn action(spec: &ProblemSpec, traj: &OddTrajectory) -> Result<ActionEvaluation> {
    spec.require_symmetric()?;
    let mut gradient = vec![Point::zeros(); traj.node_count()];
    match evaluate(spec, traj.step(), traj.nodes(), spec.collision_delta, &mut gradient) {
        Some(p) => Ok(ActionEvaluation {
            value: p.value,
            kinetic: p.kinetic,
            potential: p.potential,
            gradient,
            min_center_distance: p.min_center_distance,
        }),
        None => {
            let point = *traj.nodes().iter().find(|p| !spec.is_feasible(p)).expect("an infeasible node");
            Err(Error::Collision {
                point,
                delta: spec.collision_delta,
            })
        }
    }
}

/// Growth exponent and constant of the bound `a_n ≤ c·n^θ` obtained from
/// the y-axis path `(0, t^β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub beta: f64,
    pub theta: f64,
    pub c: f64,
}

impl BoundConstants {
    /// `c·n^θ`.
    pub fn action_threshold(&self, n: f64) -> f64 {
        self.c * n.powf(self.theta)
    }

    /// `(c/2)·n^{θ-1}`, the resulting upper bound on the energy constant.
    pub fn energy_threshold(&self, n: f64) -> f64 {
        0.5 * self.c * n.powf(self.theta - 1.0)
    }

    /// Lower bound on `‖q‖∞²` from `c·n^θ ≥ 2n (2S² + 5/4)^{-α/2}`, i.e.
    /// `S² ≥ ((2n^{1-θ}/c)^{2/α} - 5/4) / 2`. Negative values are vacuous.
    pub fn sup_norm_sq_bound(&self, n: f64, alpha: f64) -> f64 {
        ((2.0 * n.powf(1.0 - self.theta) / self.c).powf(2.0 / alpha) - 1.25) / 2.0
    }
}

/// `θ = max(2β-1, 1-αβ)` and `c = β²/(2β-1) + 2/(1-αβ)`.
pub fn bound_constants(alpha: f64, beta: f64) -> Result<BoundConstants> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::ParameterRange(format!("alpha = {alpha} must lie in (0, 2)")));
    }
    if !(beta > 0.5 && alpha * beta < 1.0) {
        return Err(Error::ParameterRange(format!(
            "beta = {beta} must lie in (1/2, 1/alpha) = (0.5, {})",
            1.0 / alpha
        )));
    }
    if beta >= 1.0 {
        return Err(Error::ParameterRange(format!("beta = {beta} gives theta >= 1")));
    }
    let a = 2.0 * beta - 1.0;
    let b = 1.0 - alpha * beta;
    Ok(BoundConstants {
        beta,
        theta: a.max(b),
        c: beta * beta / a + 2.0 / b,
    })
}

/// The `β` that minimizes `θ`: `2/(2+α)`, where `2β-1 = 1-αβ`.
pub fn optimal_beta(alpha: f64) -> f64 {
    2.0 / (2.0 + alpha)
}

/// The admissible `β = l/m` with `l, m` odd and coprime, `1/2 < β < min(1, 1/α)`,
/// of smallest denominator (ties broken by distance to [`optimal_beta`]).
pub fn simplest_odd_rational_beta(alpha: f64) -> Result<(u64, u64)> {
    let upper = 1.0f64.min(1.0 / alpha);
    let target = optimal_beta(alpha);
    for m in (1..=9_999u64).step_by(2) {
        let best = (1..m)
            .step_by(2)
            .filter(|&l| gcd(l, m) == 1)
            .filter(|&l| {
                let b = l as f64 / m as f64;
                b > 0.5 && b < upper
            })
            .min_by(|&a, &b| {
                let da = (a as f64 / m as f64 - target).abs();
                let db = (b as f64 / m as f64 - target).abs();
                da.total_cmp(&db)
            });
        if let Some(l) = best {
            return Ok((l, m));
        }
    }
    Err(Error::ParameterRange(format!(
        "no odd rational in (1/2, {upper}) for alpha = {alpha}"
    )))
}

/// `Some((l, m))` when `beta` equals a ratio of odd coprime integers with `m < 1000`.
pub fn odd_rational(beta: f64) -> Option<(u64, u64)> {
    (1..1000u64).step_by(2).find_map(|m| {
        let l = (beta * m as f64).round();
        if l < 1.0 || (l as u64).is_multiple_of(2) || gcd(l as u64, m) != 1 {
            return None;
        }
        ((l / m as f64 - beta).abs() <= 1e-12).then_some((l as u64, m))
    })
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// The comparison path `x = 0, y = sign(t)|t|^β` on a uniform grid.
pub fn test_trajectory_y_axis(alpha: f64, n: f64, beta: f64, m: usize) -> Result<OddTrajectory> {
    if !(beta > 0.5 && alpha * beta < 1.0) {
        return Err(Error::ParameterRange(format!(
            "beta = {beta} must lie in (1/2, 1/alpha) for alpha = {alpha}"
        )));
    }
    // The y-axis stays at distance >= 1/2 from both centers for any α.
    let spec = ProblemSpec::symmetric(1.0)?;
    OddTrajectory::make_uniform(&spec, n, m, Initializer::YPower { beta })
}
