//! Plot-ready data files.

use std::io::Write;

use parabolic_orbits::diagnostics::ContinuationReport;
use parabolic_orbits::trajectory::fmt17;
use parabolic_orbits::OddTrajectory;

/// `log n, log a_n, n, a_n` per converged row.
pub fn write_an_vs_n<W: Write>(mut w: W, report: &ContinuationReport) -> std::io::Result<()> {
    writeln!(w, "# log_n log_a_n n a_n")?;
    for r in report.rows.iter().filter(|r| r.converged) {
        writeln!(w, "{} {} {} {}", fmt17(r.n.ln()), fmt17(r.a_n.ln()), fmt17(r.n), fmt17(r.a_n))?;
    }
    w.flush()
}

/// `n, h_n, (c/2) n^(θ-1)` per converged row.
pub fn write_h_vs_n<W: Write>(mut w: W, report: &ContinuationReport) -> std::io::Result<()> {
    let k = report.constants();
    writeln!(w, "# n h_n energy_bound")?;
    for r in report.rows.iter().filter(|r| r.converged) {
        writeln!(w, "{} {} {}", fmt17(r.n), fmt17(r.h_n), fmt17(k.energy_threshold(r.n)))?;
    }
    w.flush()
}

/// One gnuplot index block per trajectory, `t x y` over the full grid.
pub fn write_overlay<W: Write>(mut w: W, trajs: &[OddTrajectory]) -> std::io::Result<()> {
    for (i, t) in trajs.iter().enumerate() {
        if i > 0 {
            writeln!(w, "\n")?;
        }
        writeln!(w, "# n={} M={}", t.horizon(), t.node_count())?;
        let m = t.node_count() as isize;
        for k in -m..=m {
            let time = if k < 0 { -t.time(k.unsigned_abs()) } else { t.time(k as usize) };
            let p = t.node(k);
            writeln!(w, "{} {} {}", fmt17(time), fmt17(p.x), fmt17(p.y))?;
        }
    }
    w.flush()
}

pub struct TestfnRow {
    pub beta: f64,
    pub n: f64,
    pub m: usize,
    pub odd_rational: bool,
    pub valid: bool,
    pub value: f64,
    pub bound: f64,
    pub ok: bool,
}

/// CSV `alpha,beta,n,M,odd_rational,valid,action,bound,ok`; invalid rows
/// leave the numeric columns empty.
pub fn write_testfn<W: Write>(mut w: W, alpha: f64, rows: &[TestfnRow]) -> std::io::Result<()> {
    writeln!(w, "alpha,beta,n,M,odd_rational,valid,action,bound,ok")?;
    for r in rows {
        let (value, bound) = if r.valid {
            (fmt17(r.value), fmt17(r.bound))
        } else {
            (String::new(), String::new())
        };
        writeln!(
            w,
            "{alpha},{},{},{},{},{},{value},{bound},{}",
            r.beta, r.n, r.m, r.odd_rational, r.valid, r.ok
        )?;
    }
    w.flush()
}
