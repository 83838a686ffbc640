//! Checks run on computed minimizers: energy conservation, Euler–Lagrange
//! residuals, the `a_n ≤ c·n^θ` certificate and its consequences, window
//! convergence across horizons and an independent initial-value
//! cross-check.

use serde::{Deserialize, Serialize};

use crate::action::{action, odd_rational, BoundConstants};
use crate::error::{Error, Result};
use crate::problem::{Point, ProblemSpec};
use crate::trajectory::OddTrajectory;

/// Samples per unit time used by [`window_convergence`].
pub const WINDOW_SAMPLES_PER_UNIT: f64 = 64.0;

/// Fraction of `[0, n]` trimmed from each end before averaging the energy.
const ENERGY_TRIM: f64 = 0.1;

/// Prefactor of the zero-energy kinetic lower bound as stated in the source
/// analysis, `2^{(α+2)/2}`. It does not follow from `|q-qⁱ|² ≤ 2|q|² + 1/2`,
/// which yields prefactor 1; only the latter is asserted.
pub fn stated_kinetic_prefactor(alpha: f64) -> f64 {
    2f64.powf((alpha + 2.0) / 2.0)
}

/// Energy `h = ½|Δp/h|² - U(midpoint)` at every segment midpoint of `[0, n]`.
///
/// `(p_k + p_{k+1})/2` with velocity `(p_{k+1} - p_k)/h` is exactly the
/// integer-step state of position Verlet, the scheme whose discrete
/// equations the action's stationary points satisfy.
pub fn energy_profile(spec: &ProblemSpec, traj: &OddTrajectory) -> Result<Vec<(f64, f64)>> {
    let h = traj.step();
    traj.anchored_nodes()
        .zip(traj.nodes())
        .enumerate()
        .map(|(k, (a, b))| {
            let mid = (a + b) * 0.5;
            let v = (b - a) / h;
            Ok(((k as f64 + 0.5) * h, spec.energy(&mid, &v)?))
        })
        .collect()
}

/// Mean and maximal deviation of the energy samples over the middle 80% of
/// `[0, n]`. The end segments are excluded from both statistics.
pub fn energy_stats(spec: &ProblemSpec, traj: &OddTrajectory) -> Result<(f64, f64)> {
    let profile = energy_profile(spec, traj)?;
    let n = traj.horizon();
    let (lo, hi) = (ENERGY_TRIM * n, (1.0 - ENERGY_TRIM) * n);
    let mut window: Vec<f64> = profile.iter().filter(|(t, _)| *t >= lo && *t <= hi).map(|s| s.1).collect();
    if window.is_empty() {
        window = profile.iter().map(|s| s.1).collect();
    }
    let mean = window.iter().sum::<f64>() / window.len() as f64;
    let spread = window.iter().map(|h| (h - mean).abs()).fold(0.0, f64::max);
    Ok((mean, spread))
}

/// `max_k |(p_{k+1} - 2p_k + p_{k-1})/h² - ∇U(p_k)|` over `k = 0..M-1`, with
/// the odd reflection supplying `p_{-1}`.
pub fn el_residual(spec: &ProblemSpec, traj: &OddTrajectory) -> Result<f64> {
    el_residual_strided(spec, traj, 1)
}

/// The same residual with the stencil widened to `stride` grid steps.
///
/// A stationary point of the discrete action solves the stride-1 scheme
/// exactly, so its stride-1 residual only reflects the optimizer tolerance.
/// The stride-2 residual measures the `O(h²)` consistency with the
/// continuous equation instead.
pub fn el_residual_strided(spec: &ProblemSpec, traj: &OddTrajectory, stride: usize) -> Result<f64> {
    let m = traj.node_count();
    if stride == 0 || m < 2 * stride + 1 {
        return Err(Error::ParameterRange(format!(
            "need M >= {} for stride {stride}, got {m}",
            2 * stride + 1
        )));
    }
    let s = stride as isize;
    let hh = (stride as f64 * traj.step()).powi(2);
    let mut worst: f64 = 0.0;
    for k in 0..=(m as isize - s) {
        let p = traj.node(k);
        let acc = (traj.node(k + s) - p * 2.0 + traj.node(k - s)) / hh;
        worst = worst.max((acc - spec.grad_potential(&p)?).norm());
    }
    Ok(worst)
}

/// `|(p_M - p_{M-1})/h + (h/2)∇U(p_M)|`: zero for a stationary point of the
/// discrete action, whose free endpoint enforces exactly this relation.
pub fn natural_bc_defect(spec: &ProblemSpec, traj: &OddTrajectory) -> Result<f64> {
    let m = traj.node_count() as isize;
    let h = traj.step();
    let last = traj.node(m);
    let v = (last - traj.node(m - 1)) / h;
    Ok((v + spec.grad_potential(&last)? * (0.5 * h)).norm())
}

/// Per-node margin `U(p) - (2|p|² + 1/2)^{-α/2}` for `p_0..p_M`.
pub fn zero_energy_kinetic_bound(spec: &ProblemSpec, traj: &OddTrajectory) -> Result<Vec<f64>> {
    traj.anchored_nodes().map(|p| kinetic_bound_margin(spec, &p)).collect()
}

/// `U(p) - (2|p|² + 1/2)^{-α/2}` at a single point. Nonnegative for every
/// feasible point when `μ = 1/2`.
pub fn kinetic_bound_margin(spec: &ProblemSpec, p: &Point) -> Result<f64> {
    let u = spec.potential(p)?;
    Ok(u - (2.0 * p.norm_squared() + 0.5).powf(-0.5 * spec.alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BoundMargins {
    /// `c·n^θ - a_n`.
    pub action: f64,
    /// `(c/2)·n^{θ-1} - h_n`.
    pub energy: f64,
    /// `‖q‖∞² - bound`; `None` when the bound is not positive.
    pub sup_norm: Option<f64>,
}

/// One horizon of a continuation sweep.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ContinuationRow {
    pub n: f64,
    #[serde(rename = "M")]
    pub m: usize,
    pub a_n: f64,
    pub h_n: f64,
    pub energy_spread: f64,
    pub sup_norm: f64,
    pub min_speed: f64,
    pub el_residual: f64,
    pub terminal_speed: f64,
    pub bound_margins: BoundMargins,
    pub converged: bool,
    pub el_residual_stride2: f64,
    pub natural_bc_defect: f64,
    pub iterations: usize,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationReport {
    pub schema: String,
    pub alpha: f64,
    /// Exponent of the comparison path used for the certificate.
    pub beta: f64,
    pub theta: f64,
    pub c: f64,
    pub rows: Vec<ContinuationRow>,
    /// Least-squares slope of `log a_n` against `log n` over converged rows.
    pub fitted_theta: Option<f64>,
    pub beta_init: f64,
    pub window: [f64; 2],
    pub window_deltas: Vec<f64>,
    pub kinetic_prefactor_stated: f64,
}

impl ContinuationReport {
    pub fn constants(&self) -> BoundConstants {
        BoundConstants {
            beta: self.beta,
            theta: self.theta,
            c: self.c,
        }
    }

    /// CSV `n,M,a_n,h_n,energy_spread,sup_norm,min_speed,el_residual,terminal_speed`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        use crate::trajectory::fmt17;
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "n",
            "M",
            "a_n",
            "h_n",
            "energy_spread",
            "sup_norm",
            "min_speed",
            "el_residual",
            "terminal_speed",
        ])?;
        for r in &self.rows {
            w.write_record([
                fmt17(r.n),
                r.m.to_string(),
                fmt17(r.a_n),
                fmt17(r.h_n),
                fmt17(r.energy_spread),
                fmt17(r.sup_norm),
                fmt17(r.min_speed),
                fmt17(r.el_residual),
                fmt17(r.terminal_speed),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Margin {
    pub n: f64,
    pub threshold: f64,
    pub margin: f64,
    pub ok: bool,
}

/// `c·n^θ - a_n` per row; a row passes when the margin exceeds `-10⁻²·c·n^θ`.
pub fn certify_action_bound(rows: &[ContinuationRow], k: &BoundConstants) -> Vec<Margin> {
    rows.iter()
        .map(|r| {
            let threshold = k.action_threshold(r.n);
            let margin = threshold - r.a_n;
            Margin {
                n: r.n,
                threshold,
                margin,
                ok: margin > -1e-2 * threshold,
            }
        })
        .collect()
}

/// `(c/2)·n^{θ-1} - h_n` per row; a row passes when the margin is
/// nonnegative and `h_n < 0` (the free endpoint gives `h = -U(q(n))`).
pub fn certify_energy_bound(rows: &[ContinuationRow], k: &BoundConstants) -> Vec<Margin> {
    rows.iter()
        .map(|r| {
            let threshold = k.energy_threshold(r.n);
            let margin = threshold - r.h_n;
            Margin {
                n: r.n,
                threshold,
                margin,
                ok: margin >= 0.0 && r.h_n < 0.0,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupNormCertificate {
    /// `‖q‖∞² - bound`, `None` where the bound is vacuous.
    pub margins: Vec<Option<f64>>,
    /// Sup-norms nondecreasing across rows within 1% slack.
    pub monotone: bool,
}

impl SupNormCertificate {
    pub fn ok(&self) -> bool {
        self.monotone && self.margins.iter().flatten().all(|m| *m >= 0.0)
    }
}

pub fn certify_supnorm_growth(rows: &[ContinuationRow], k: &BoundConstants, alpha: f64) -> SupNormCertificate {
    let margins = rows
        .iter()
        .map(|r| {
            let bound = k.sup_norm_sq_bound(r.n, alpha);
            (bound > 0.0).then_some(r.sup_norm * r.sup_norm - bound)
        })
        .collect();
    let monotone = rows.windows(2).all(|w| w[1].sup_norm >= 0.99 * w[0].sup_norm);
    SupNormCertificate { margins, monotone }
}

/// `sup_t |q_{k+1}(t) - q_k(t)|` over a 64-per-unit grid on `[a, b]` for
/// consecutive trajectories.
pub fn window_convergence(trajs: &[OddTrajectory], a: f64, b: f64) -> Result<Vec<f64>> {
    if !(a < b) {
        return Err(Error::ParameterRange(format!("window [{a}, {b}] is empty")));
    }
    let smallest = trajs.iter().map(|t| t.horizon()).fold(f64::INFINITY, f64::min);
    if a.abs().max(b.abs()) > smallest {
        return Err(Error::Window { a, b, horizon: smallest });
    }
    let count = ((b - a) * WINDOW_SAMPLES_PER_UNIT).round().max(1.0) as usize;
    let times: Vec<f64> = (0..=count).map(|j| a + (b - a) * j as f64 / count as f64).collect();
    trajs
        .windows(2)
        .map(|w| {
            times
                .iter()
                .try_fold(0.0f64, |acc, &t| Ok(acc.max((w[1].value_at(t)? - w[0].value_at(t)?).norm())))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdePath {
    pub dt: f64,
    pub positions: Vec<Point>,
    pub velocities: Vec<Point>,
    /// `|h(T) - h(0)|`.
    pub energy_drift: f64,
}

impl OdePath {
    pub fn energy(&self, spec: &ProblemSpec, i: usize) -> Result<f64> {
        spec.energy(&self.positions[i], &self.velocities[i])
    }
}

/// Classical fourth-order Runge–Kutta for `q̈ = ∇U(q)`, sampled every `dt`
/// up to `duration`.
pub fn integrate_ode(spec: &ProblemSpec, q0: Point, v0: Point, duration: f64, dt: f64) -> Result<OdePath> {
    if !(dt > 0.0) || !(duration >= 0.0) {
        return Err(Error::ParameterRange(format!(
            "need dt > 0 and T >= 0, got dt = {dt}, T = {duration}"
        )));
    }
    let h0 = spec.energy(&q0, &v0)?;
    let steps = (duration / dt).round() as usize;
    let mut positions = Vec::with_capacity(steps + 1);
    let mut velocities = Vec::with_capacity(steps + 1);
    let (mut q, mut v) = (q0, v0);
    positions.push(q);
    velocities.push(v);
    let force = |p: &Point| spec.grad_potential(p);
    for _ in 0..steps {
        let a1 = force(&q)?;
        let (q2, v2) = (q + v * (0.5 * dt), v + a1 * (0.5 * dt));
        let a2 = force(&q2)?;
        let (q3, v3) = (q + v2 * (0.5 * dt), v + a2 * (0.5 * dt));
        let a3 = force(&q3)?;
        let (q4, v4) = (q + v3 * dt, v + a3 * dt);
        let a4 = force(&q4)?;
        q += (v + v2 * 2.0 + v3 * 2.0 + v4) * (dt / 6.0);
        v += (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (dt / 6.0);
        if !spec.is_feasible(&q) {
            return Err(Error::Collision {
                point: q,
                delta: spec.collision_delta,
            });
        }
        positions.push(q);
        velocities.push(v);
    }
    let energy_drift = (spec.energy(&q, &v)? - h0).abs();
    Ok(OdePath {
        dt,
        positions,
        velocities,
        energy_drift,
    })
}

/// Least-squares slope of `ln a` against `ln n` over `(n, a)` pairs.
pub fn fit_growth_exponent(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: points.len(),
        });
    }
    if points.iter().any(|&(n, a)| !(n > 0.0 && a > 0.0)) {
        return Err(Error::ParameterRange("growth fit needs positive n and a_n".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let len = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / len;
    let my = ys.iter().sum::<f64>() / len;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::ParameterRange("growth fit needs distinct horizons".into()));
    }
    Ok(sxy / sxx)
}

/// Largest error between the analytic action gradient and central
/// differences over the listed `(node, coordinate)` components, relative to
/// `max(|g|, 1)` so that near-stationary paths are not judged on noise.
pub fn gradient_check(spec: &ProblemSpec, traj: &OddTrajectory, components: &[(usize, usize)]) -> Result<f64> {
    let eval = action(spec, traj)?;
    let mut worst: f64 = 0.0;
    for &(k, j) in components {
        let base = traj.nodes()[k][j];
        let e = 1e-6 * base.abs().max(1.0);
        let shifted = |delta: f64| -> Result<f64> {
            let mut nodes = traj.nodes().to_vec();
            nodes[k][j] = base + delta;
            Ok(action(spec, &OddTrajectory::new(traj.horizon(), nodes)?)?.value)
        };
        let fd = (shifted(e)? - shifted(-e)?) / (2.0 * e);
        let g = eval.gradient[k][j];
        worst = worst.max((g - fd).abs() / g.abs().max(1.0));
    }
    Ok(worst)
}

/// Everything that can be recomputed from a stored trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDiagnostics {
    pub n: f64,
    #[serde(rename = "M")]
    pub m: usize,
    pub step: f64,
    pub action: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub sobolev_norm: f64,
    pub sup_norm: f64,
    pub min_center_distance: f64,
    pub min_speed: f64,
    pub min_speed_time: f64,
    pub terminal_speed: f64,
    pub natural_bc_defect: f64,
    pub energy_mean: f64,
    pub energy_spread: f64,
    pub el_residual: f64,
    pub el_residual_stride2: Option<f64>,
    pub kinetic_bound_min_margin: f64,
    pub kinetic_prefactor_used: f64,
    pub kinetic_prefactor_stated: f64,
    pub certificate: BoundConstants,
    pub beta_odd_rational: bool,
    pub action_threshold: f64,
    pub bound_margin: f64,
    pub energy_threshold: f64,
    pub energy_bound_margin: f64,
    pub sup_norm_sq_bound: f64,
    pub sup_norm_margin: Option<f64>,
    pub gradient_check: Option<f64>,
}

pub fn diagnose(
    spec: &ProblemSpec,
    traj: &OddTrajectory,
    k: &BoundConstants,
    grad_components: &[(usize, usize)],
) -> Result<TrajectoryDiagnostics> {
    let eval = action(spec, traj)?;
    let (energy_mean, energy_spread) = energy_stats(spec, traj)?;
    let n = traj.horizon();
    let sup_norm = traj.sup_norm();
    let kinetic_bound_min_margin = zero_energy_kinetic_bound(spec, traj)?.into_iter().fold(f64::INFINITY, f64::min);
    let el = if traj.node_count() >= 3 { el_residual(spec, traj)? } else { 0.0 };
    let el2 = el_residual_strided(spec, traj, 2).ok();
    let action_threshold = k.action_threshold(n);
    let energy_threshold = k.energy_threshold(n);
    let sup_norm_sq_bound = k.sup_norm_sq_bound(n, spec.alpha);
    Ok(TrajectoryDiagnostics {
        n,
        m: traj.node_count(),
        step: traj.step(),
        action: eval.value,
        kinetic: eval.kinetic,
        potential: eval.potential,
        sobolev_norm: traj.sobolev_norm(),
        sup_norm,
        min_center_distance: traj.min_center_distance(spec),
        min_speed: traj.min_node_speed(),
        min_speed_time: (traj.min_speed_segment() as f64 + 0.5) * traj.step(),
        terminal_speed: traj.terminal_speed(),
        natural_bc_defect: natural_bc_defect(spec, traj)?,
        energy_mean,
        energy_spread,
        el_residual: el,
        el_residual_stride2: el2,
        kinetic_bound_min_margin,
        kinetic_prefactor_used: 1.0,
        kinetic_prefactor_stated: stated_kinetic_prefactor(spec.alpha),
        certificate: *k,
        beta_odd_rational: odd_rational(k.beta).is_some(),
        action_threshold,
        bound_margin: action_threshold - eval.value,
        energy_threshold,
        energy_bound_margin: energy_threshold - energy_mean,
        sup_norm_sq_bound,
        sup_norm_margin: (sup_norm_sq_bound > 0.0).then_some(sup_norm * sup_norm - sup_norm_sq_bound),
        gradient_check: if grad_components.is_empty() {
            None
        } else {
            Some(gradient_check(spec, traj, grad_components)?)
        },
    })
}
