//! Horizon sweeps: one minimization per `n`, assembled into a
//! [`ContinuationReport`].

use rayon::prelude::*;

use crate::action::BoundConstants;
use crate::diagnostics::{
    certify_action_bound, certify_energy_bound, certify_supnorm_growth, el_residual, el_residual_strided, fit_growth_exponent,
    natural_bc_defect, stated_kinetic_prefactor, window_convergence, BoundMargins, ContinuationReport, ContinuationRow,
};
use crate::error::{Error, Result};
use crate::optimizer::{minimize, MinimizeOptions, MinimizeReport};
use crate::problem::ProblemSpec;
use crate::trajectory::{Initializer, OddTrajectory};
use crate::SCHEMA;

pub const DEFAULT_NODES_PER_UNIT: usize = 16;
pub const DEFAULT_HORIZONS: [f64; 4] = [10.0, 20.0, 40.0, 80.0];
pub const DEFAULT_WINDOW: (f64, f64) = (-5.0, 5.0);

/// Number of free nodes for horizon `n` at the given density.
pub fn node_count(n: f64, nodes_per_unit: usize) -> Result<usize> {
    let m = (n * nodes_per_unit as f64).round();
    if !(m >= 2.0) {
        return Err(Error::ParameterRange(format!(
            "n = {n} at {nodes_per_unit} nodes per unit gives fewer than 2 nodes"
        )));
    }
    Ok(m as usize)
}

/// Minimizes the action on `[-n, n]` starting from the y-power path `t^β`.
pub fn solve_horizon(spec: &ProblemSpec, n: f64, nodes_per_unit: usize, beta_init: f64, opts: &MinimizeOptions) -> Result<MinimizeReport> {
    let m = node_count(n, nodes_per_unit)?;
    let start = OddTrajectory::make_uniform(spec, n, m, Initializer::YPower { beta: beta_init })?;
    minimize(spec, &start, opts)
}

pub fn row_from_report(spec: &ProblemSpec, report: &MinimizeReport, k: &BoundConstants) -> Result<ContinuationRow> {
    let t = &report.trajectory;
    let mut row = ContinuationRow {
        n: t.horizon(),
        m: t.node_count(),
        a_n: report.action_value,
        h_n: report.energy_mean,
        energy_spread: report.energy_spread,
        sup_norm: t.sup_norm(),
        min_speed: t.min_node_speed(),
        el_residual: el_residual(spec, t)?,
        terminal_speed: report.terminal_speed,
        bound_margins: BoundMargins::default(),
        converged: report.converged,
        el_residual_stride2: el_residual_strided(spec, t, 2)?,
        natural_bc_defect: natural_bc_defect(spec, t)?,
        iterations: report.iterations,
        grad_norm: report.grad_norm,
    };
    let one = std::slice::from_ref(&row);
    row.bound_margins = BoundMargins {
        action: certify_action_bound(one, k)[0].margin,
        energy: certify_energy_bound(one, k)[0].margin,
        sup_norm: certify_supnorm_growth(one, k, spec.alpha).margins[0],
    };
    Ok(row)
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub horizons: Vec<f64>,
    pub nodes_per_unit: usize,
    pub beta_init: f64,
    pub certificate: BoundConstants,
    pub options: MinimizeOptions,
    pub window: (f64, f64),
}

#[derive(Debug)]
pub struct SweepResult {
    pub report: ContinuationReport,
    /// Final iterate per horizon, in row order.
    pub trajectories: Vec<OddTrajectory>,
    /// Horizons whose minimization failed, with the failure.
    pub failures: Vec<(f64, Error)>,
}

/// Runs one minimization per horizon (concurrently on the current rayon
/// pool) and assembles the report. Failed horizons appear as rows with
/// `converged = false` when the optimizer produced a last iterate.
pub fn run_sweep(spec: &ProblemSpec, cfg: &SweepConfig) -> Result<SweepResult> {
    let mut horizons = cfg.horizons.clone();
    horizons.sort_by(f64::total_cmp);
    horizons.dedup();
    if horizons.len() < 2 {
        return Err(Error::ParameterRange("a sweep needs at least two distinct horizons".into()));
    }
    let smallest = horizons[0];
    let (wa, wb) = cfg.window;
    if wa.abs().max(wb.abs()) > smallest {
        return Err(Error::Window {
            a: wa,
            b: wb,
            horizon: smallest,
        });
    }
    for &n in &horizons {
        node_count(n, cfg.nodes_per_unit)?;
    }

    let runs: Vec<Result<MinimizeReport>> = horizons
        .par_iter()
        .map(|&n| solve_horizon(spec, n, cfg.nodes_per_unit, cfg.beta_init, &cfg.options))
        .collect();

    let mut rows = Vec::new();
    let mut trajectories = Vec::new();
    let mut failures = Vec::new();
    for (n, run) in horizons.iter().zip(runs) {
        let report = match run {
            Ok(r) => r,
            Err(e) => {
                let partial = e.partial_report().cloned();
                failures.push((*n, e));
                match partial {
                    Some(r) => r,
                    None => continue,
                }
            }
        };
        rows.push(row_from_report(spec, &report, &cfg.certificate)?);
        trajectories.push(report.trajectory);
    }

    let converged: Vec<(f64, f64)> = rows.iter().filter(|r| r.converged).map(|r| (r.n, r.a_n)).collect();
    let fitted_theta = fit_growth_exponent(&converged).ok();
    let ok_trajs: Vec<OddTrajectory> = rows
        .iter()
        .zip(&trajectories)
        .filter(|(r, _)| r.converged)
        .map(|(_, t)| t.clone())
        .collect();
    let window_deltas = if ok_trajs.len() >= 2 {
        window_convergence(&ok_trajs, wa, wb)?
    } else {
        Vec::new()
    };

    let k = cfg.certificate;
    Ok(SweepResult {
        report: ContinuationReport {
            schema: SCHEMA.to_string(),
            alpha: spec.alpha,
            beta: k.beta,
            theta: k.theta,
            c: k.c,
            rows,
            fitted_theta,
            beta_init: cfg.beta_init,
            window: [wa, wb],
            window_deltas,
            kinetic_prefactor_stated: stated_kinetic_prefactor(spec.alpha),
        },
        trajectories,
        failures,
    })
}
