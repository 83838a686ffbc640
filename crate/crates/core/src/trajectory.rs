//! Odd piecewise-linear trajectories on `[-n, n]`.
//!
//! Only the free nodes `p_1..p_M` at `t = k·step` are stored. The origin
//! anchor `p_0 = 0` and the reflection `p_{-k} = -p_k` are implicit, and the
//! last node `p_M` carries no boundary condition.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{Point, ProblemSpec};

/// Tolerance on `q(-t) + q(t)` when reading a materialized trajectory.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddTrajectory {
    horizon: f64,
    nodes: Vec<Point>,
}

/// Named initial shapes for [`OddTrajectory::make_uniform`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Initializer {
    /// Every node at the origin.
    ZeroOffset,
    /// `q(t) = (0, sign(t)|t|^β)`.
    YPower { beta: f64 },
    /// `q(t) = v·t`.
    LinearRay { velocity: Point },
}

impl Initializer {
    fn eval(&self, t: f64) -> Point {
        match *self {
            Initializer::ZeroOffset => Point::zeros(),
            Initializer::YPower { beta } => Point::new(0.0, t.signum() * t.abs().powf(beta)),
            Initializer::LinearRay { velocity } => velocity * t,
        }
    }
}

impl OddTrajectory {
    pub fn new(horizon: f64, nodes: Vec<Point>) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::ParameterRange(format!("horizon {horizon} must be positive and finite")));
        }
        if nodes.len() < 2 {
            return Err(Error::ParameterRange(format!("need at least 2 nodes, got {}", nodes.len())));
        }
        if nodes.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::ParameterRange("non-finite node".into()));
        }
        Ok(OddTrajectory { horizon, nodes })
    }

    /// Uniform grid of `m` free nodes on `(0, n]` sampled from `init`.
    pub fn make_uniform(spec: &ProblemSpec, n: f64, m: usize, init: Initializer) -> Result<Self> {
        if !(n > 0.0 && n.is_finite()) || m < 2 {
            return Err(Error::ParameterRange(format!("need n > 0 and M >= 2, got n = {n}, M = {m}")));
        }
        let step = n / m as f64;
        let nodes: Vec<Point> = (1..=m).map(|k| init.eval(grid_time(n, step, m, k))).collect();
        if let Some(index) = nodes.iter().position(|p| !spec.is_feasible(p)) {
            return Err(Error::InfeasibleInit { index: index + 1 });
        }
        Self::new(n, nodes)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.nodes.len() as f64
    }

    /// Free nodes `p_1..p_M`.
    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    /// Node `p_k` for `k ∈ [-M, M]`, with `p_0 = 0` and odd reflection.
    pub fn node(&self, k: isize) -> Point {
        match k {
            0 => Point::zeros(),
            k if k > 0 => self.nodes[k as usize - 1],
            k => -self.nodes[(-k) as usize - 1],
        }
    }

    /// Time of node `k ∈ [0, M]`.
    pub fn time(&self, k: usize) -> f64 {
        grid_time(self.horizon, self.step(), self.nodes.len(), k)
    }

    /// Nodes `p_0..p_M` including the origin anchor.
    pub fn anchored_nodes(&self) -> impl Iterator<Item = Point> + '_ {
        std::iter::once(Point::zeros()).chain(self.nodes.iter().copied())
    }

    /// Segment differences `p_{k+1} - p_k` for `k = 0..M-1`.
    pub fn segments(&self) -> impl Iterator<Item = Point> + '_ {
        self.anchored_nodes().zip(self.nodes.iter()).map(|(a, b)| b - a)
    }

    /// Piecewise-linear interpolant, reflected for negative times.
    pub fn value_at(&self, t: f64) -> Result<Point> {
        if !(t.abs() <= self.horizon) {
            return Err(Error::OutOfRange { t, horizon: self.horizon });
        }
        if t < 0.0 {
            return Ok(-self.value_at_nonneg(-t));
        }
        Ok(self.value_at_nonneg(t))
    }

    fn value_at_nonneg(&self, t: f64) -> Point {
        let m = self.nodes.len();
        let s = t / self.step();
        let k = (s.floor() as usize).min(m);
        if k == m {
            return self.nodes[m - 1];
        }
        let frac = s - k as f64;
        let a = self.node(k as isize);
        let b = self.node(k as isize + 1);
        a + (b - a) * frac
    }

    /// `(∫_{-n}^{n} |q̇|² dt)^{1/2}`, exact for the piecewise-linear interpolant.
    pub fn sobolev_norm(&self) -> f64 {
        let sum: f64 = self.segments().map(|d| d.norm_squared()).sum();
        (2.0 * sum / self.step()).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.nodes.iter().map(|p| p.norm()).fold(0.0, f64::max)
    }

    /// Smallest distance from any node (both halves, origin included) to a center.
    pub fn min_center_distance(&self, spec: &ProblemSpec) -> f64 {
        self.anchored_nodes()
            .flat_map(|p| [p, -p])
            .map(|p| spec.center_distance(&p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest one-sided difference quotient `|p_{k+1} - p_k| / step`.
    pub fn min_node_speed(&self) -> f64 {
        let h = self.step();
        self.segments().map(|d| d.norm() / h).fold(f64::INFINITY, f64::min)
    }

    /// Index `k` (segment `[k, k+1]`) where [`Self::min_node_speed`] is attained.
    pub fn min_speed_segment(&self) -> usize {
        let mut best = (0, f64::INFINITY);
        for (k, d) in self.segments().enumerate() {
            let v = d.norm();
            if v < best.1 {
                best = (k, v);
            }
        }
        best.0
    }

    /// `|p_M - p_{M-1}| / step`.
    pub fn terminal_speed(&self) -> f64 {
        let m = self.nodes.len() as isize;
        (self.node(m) - self.node(m - 1)).norm() / self.step()
    }

    /// Linear subdivision of every segment into `factor` pieces.
    pub fn refine(&self, factor: usize) -> Result<Self> {
        if factor < 2 {
            return Err(Error::ParameterRange(format!("refine factor {factor} must be >= 2")));
        }
        let mut nodes = Vec::with_capacity(self.nodes.len() * factor);
        for (k, b) in self.nodes.iter().enumerate() {
            let a = self.node(k as isize);
            for j in 1..factor {
                nodes.push(a + (b - a) * (j as f64 / factor as f64));
            }
            nodes.push(*b);
        }
        Self::new(self.horizon, nodes)
    }

    pub fn all_feasible(&self, spec: &ProblemSpec) -> bool {
        self.nodes.iter().all(|p| spec.is_feasible(p))
    }

    /// Apply `(x, y) → (sx·x, sy·y)` to every node.
    pub fn reflect(&self, sx: f64, sy: f64) -> Self {
        let nodes = self.nodes.iter().map(|p| Point::new(sx * p.x, sy * p.y)).collect();
        OddTrajectory {
            horizon: self.horizon,
            nodes,
        }
    }

    /// Write rows `t,x,y` for every grid time in `-n..n` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "x", "y"])?;
        let m = self.nodes.len() as isize;
        for k in -m..=m {
            let t = if k < 0 { -self.time((-k) as usize) } else { self.time(k as usize) };
            let p = self.node(k);
            w.write_record([fmt17(t), fmt17(p.x), fmt17(p.y)])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Inverse of [`Self::write_csv`]. Checks the header, the row count, the
    /// uniform grid and odd symmetry.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let header = r.headers()?.clone();
        if header.iter().map(str::trim).collect::<Vec<_>>() != ["t", "x", "y"] {
            return Err(Error::Format(format!("expected header t,x,y, got {:?}", header)));
        }
        let mut rows: Vec<[f64; 3]> = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            if rec.len() != 3 {
                return Err(Error::Format(format!("row {} has {} fields", i + 1, rec.len())));
            }
            let mut row = [0.0; 3];
            for (j, field) in rec.iter().enumerate() {
                row[j] = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::Format(format!("row {}: cannot parse {field:?}", i + 1)))?;
            }
            rows.push(row);
        }
        if rows.len() < 5 || rows.len().is_multiple_of(2) {
            return Err(Error::Format(format!("row count {} is not 2M+1 with M >= 2", rows.len())));
        }
        let m = (rows.len() - 1) / 2;
        let horizon = rows[2 * m][0];
        if !(horizon > 0.0) || rows[0][0] != -horizon {
            return Err(Error::Format(format!(
                "time column must run from -n to n, got {} .. {}",
                rows[0][0], horizon
            )));
        }
        let step = horizon / m as f64;
        for (i, row) in rows.iter().enumerate() {
            let expected = (i as f64 - m as f64) * step;
            if (row[0] - expected).abs() > 1e-9 * horizon.max(1.0) {
                return Err(Error::Format(format!(
                    "row {}: time {} off the uniform grid ({expected})",
                    i + 1,
                    row[0]
                )));
            }
        }
        let centre = rows[m];
        if centre[1] != 0.0 || centre[2] != 0.0 {
            return Err(Error::Symmetry(format!("q(0) = ({}, {}) is not the origin", centre[1], centre[2])));
        }
        for k in 1..=m {
            let (a, b) = (rows[m + k], rows[m - k]);
            let defect = ((a[1] + b[1]).powi(2) + (a[2] + b[2]).powi(2)).sqrt();
            if defect > SYMMETRY_TOLERANCE {
                return Err(Error::Symmetry(format!("|q(-t) + q(t)| = {defect:e} at t = {}", a[0])));
            }
        }
        let nodes = (1..=m).map(|k| Point::new(rows[m + k][1], rows[m + k][2])).collect();
        Self::new(horizon, nodes)
    }
}

fn grid_time(horizon: f64, step: f64, m: usize, k: usize) -> f64 {
    // The last grid time is the horizon itself so that it survives a CSV round trip.
    if k == m {
        horizon
    } else {
        k as f64 * step
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> ProblemSpec {
        ProblemSpec::symmetric(1.0).unwrap()
    }

    fn uniform(n: f64, m: usize, init: Initializer) -> OddTrajectory {
        OddTrajectory::make_uniform(&spec(), n, m, init).unwrap()
    }

    #[test]
    fn initializers() {
        let t = uniform(1.0, 4, Initializer::YPower { beta: 0.6 });
        for (k, p) in t.nodes().iter().enumerate() {
            assert_eq!(p.x, 0.0);
            assert!((p.y - ((k + 1) as f64 / 4.0).powf(0.6)).abs() < 1e-15);
        }
        let t = uniform(
            1.0,
            4,
            Initializer::LinearRay {
                velocity: Point::new(0.0, 1.0),
            },
        );
        assert_eq!(t.nodes()[2], Point::new(0.0, 0.75));
        let t = uniform(1.0, 4, Initializer::ZeroOffset);
        assert!(t.nodes().iter().all(|p| *p == Point::zeros()));
    }

    #[test]
    fn infeasible_init_is_rejected() {
        // Ray along the x-axis hits the center (1/2, 0) at t = 1/2.
        let err = OddTrajectory::make_uniform(
            &spec(),
            1.0,
            4,
            Initializer::LinearRay {
                velocity: Point::new(1.0, 0.0),
            },
        );
        assert!(matches!(err, Err(Error::InfeasibleInit { index: 2 })));
        assert!(OddTrajectory::make_uniform(&spec(), 1.0, 1, Initializer::ZeroOffset).is_err());
        assert!(OddTrajectory::make_uniform(&spec(), -1.0, 4, Initializer::ZeroOffset).is_err());
    }

    #[test]
    fn value_at_anchor_reflection_and_midpoints() {
        let t = uniform(2.0, 8, Initializer::YPower { beta: 0.7 });
        assert_eq!(t.value_at(0.0).unwrap(), Point::zeros());
        for s in [0.1, 0.25, 0.8, 1.3, 2.0] {
            assert_eq!(t.value_at(-s).unwrap(), -t.value_at(s).unwrap());
        }
        let mid = t.value_at(0.75 + 0.125).unwrap();
        let expected = (t.nodes()[2] + t.nodes()[3]) / 2.0;
        assert!((mid - expected).norm() < 1e-15);
        assert_eq!(t.value_at(0.5).unwrap(), t.nodes()[1]);
        assert_eq!(t.value_at(2.0).unwrap(), t.nodes()[7]);
        assert!(matches!(t.value_at(2.0 + 1e-12), Err(Error::OutOfRange { .. })));
        assert!(t.value_at(f64::NAN).is_err());
    }

    #[test]
    fn norms_on_simple_paths() {
        let z = uniform(3.0, 6, Initializer::ZeroOffset);
        assert_eq!(z.sobolev_norm(), 0.0);
        assert_eq!(z.sup_norm(), 0.0);
        assert_eq!(z.min_center_distance(&spec()), 0.5);
        assert_eq!(z.min_node_speed(), 0.0);

        let ray = uniform(
            2.0,
            8,
            Initializer::LinearRay {
                velocity: Point::new(0.0, 1.0),
            },
        );
        assert!((ray.sobolev_norm().powi(2) - 4.0).abs() < 1e-12);
        assert!((ray.sup_norm() - 2.0).abs() < 1e-15);
        assert!((ray.min_node_speed() - 1.0).abs() < 1e-12);

        let fast = uniform(
            2.0,
            8,
            Initializer::LinearRay {
                velocity: Point::new(0.6, -0.8) * 3.0,
            },
        );
        assert!((fast.sobolev_norm().powi(2) - 2.0 * 2.0 * 9.0).abs() < 1e-10);
    }

    #[test]
    fn y_power_norm_converges_to_closed_form() {
        // ∫_{-1}^{1} β² |t|^{2β-2} dt = 2β²/(2β-1). The derivative is singular
        // at t = 0, so the first segment limits convergence to order h^{2β-1}.
        let beta = 0.6;
        let exact = 2.0 * beta * beta / (2.0 * beta - 1.0);
        let err = |m: usize| {
            let t = uniform(1.0, m, Initializer::YPower { beta });
            (exact - t.sobolev_norm().powi(2)) / exact
        };
        let mut prev = err(256);
        for m in [512, 1024, 2048, 4096] {
            let e = err(m);
            assert!(e > 0.0 && e < prev);
            let rate = (prev / e).log2();
            assert!((rate - (2.0 * beta - 1.0)).abs() < 0.02, "rate {rate}");
            prev = e;
        }
        assert!(prev < 0.09, "rel {prev}");
    }

    #[test]
    fn y_power_min_speed_on_last_segment() {
        let beta = 0.6;
        let t = uniform(1.0, 4096, Initializer::YPower { beta });
        assert_eq!(t.min_speed_segment(), 4095);
        assert!((t.min_node_speed() - beta).abs() < 1e-3);
        assert_eq!(t.min_node_speed(), t.terminal_speed());
    }

    #[test]
    fn refine_preserves_interpolant() {
        let t = uniform(3.0, 12, Initializer::YPower { beta: 0.55 });
        let r = t.refine(3).unwrap();
        assert_eq!(r.node_count(), 36);
        for k in 0..=12 {
            let s = t.time(k);
            assert!((r.value_at(s).unwrap() - t.value_at(s).unwrap()).norm() < 1e-14);
        }
        let rel = (r.sobolev_norm() - t.sobolev_norm()).abs() / t.sobolev_norm();
        assert!(rel < 1e-12);
        let z = uniform(1.0, 4, Initializer::ZeroOffset).refine(2).unwrap();
        assert_eq!(z.node_count(), 8);
        assert!(z.nodes().iter().all(|p| *p == Point::zeros()));
        assert!(t.refine(1).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let t = uniform(0.3, 7, Initializer::YPower { beta: 2.0 / 3.0 }).reflect(1.0, -1.0);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,x,y\n"));
        assert_eq!(text.lines().count(), 1 + 15);
        let back = OddTrajectory::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.step().to_bits(), t.step().to_bits());
    }

    #[test]
    fn csv_rejects_bad_files() {
        let t = uniform(1.0, 4, Initializer::YPower { beta: 0.6 });
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();

        let dropped = [&lines[..3], &lines[4..]].concat().join("\n");
        assert!(matches!(OddTrajectory::read_csv(dropped.as_bytes()), Err(Error::Format(_))));

        let header = text.replacen("t,x,y", "time,x,y", 1);
        assert!(matches!(OddTrajectory::read_csv(header.as_bytes()), Err(Error::Format(_))));

        let mut skewed: Vec<String> = lines.iter().map(|s| s.to_string()).collect();
        skewed[1] = format!("{},{},{}", -1.0, 0.0, -0.9);
        assert!(matches!(
            OddTrajectory::read_csv(skewed.join("\n").as_bytes()),
            Err(Error::Symmetry(_))
        ));

        let garbage = text.replacen("t,x,y\n", "t,x,y\nfoo,1,2\n", 1);
        assert!(OddTrajectory::read_csv(garbage.as_bytes()).is_err());
    }
}
