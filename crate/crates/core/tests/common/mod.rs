#![allow(dead_code)]

use parabolic_orbits::{OddTrajectory, Point};
use rand::Rng;

/// Equal-mass potential written out directly, centers at (±1/2, 0).
pub fn reference_potential(alpha: f64, x: f64, y: f64) -> f64 {
    let a = ((x + 0.5).powi(2) + y * y).powf(-alpha / 2.0);
    let b = ((x - 0.5).powi(2) + y * y).powf(-alpha / 2.0);
    0.5 * a + 0.5 * b
}

/// Discrete action over the full materialized path on [-n, n]: exact
/// kinetic energy of the linear interpolant plus the trapezoid rule for the
/// potential. Independent of the library's half-interval evaluation.
pub fn reference_action(alpha: f64, n: f64, nodes: &[(f64, f64)]) -> f64 {
    let m = nodes.len();
    let h = n / m as f64;
    let mut path = Vec::with_capacity(2 * m + 1);
    path.extend(nodes.iter().rev().map(|&(x, y)| (-x, -y)));
    path.push((0.0, 0.0));
    path.extend_from_slice(nodes);
    let mut kinetic = 0.0;
    for w in path.windows(2) {
        let (dx, dy) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
        kinetic += 0.5 * (dx * dx + dy * dy) / (h * h) * h;
    }
    let last = path.len() - 1;
    let mut potential = 0.0;
    for (i, &(x, y)) in path.iter().enumerate() {
        let w = if i == 0 || i == last { 0.5 * h } else { h };
        potential += w * reference_potential(alpha, x, y);
    }
    kinetic + potential
}

/// Central finite-difference gradient of [`reference_action`].
pub fn reference_gradient(alpha: f64, n: f64, nodes: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut work = nodes.to_vec();
    let mut out = Vec::with_capacity(nodes.len());
    for k in 0..nodes.len() {
        let mut g = [0.0; 2];
        for (j, gj) in g.iter_mut().enumerate() {
            let base = if j == 0 { nodes[k].0 } else { nodes[k].1 };
            let e = 1e-6 * base.abs().max(1.0);
            let set = |w: &mut Vec<(f64, f64)>, v: f64| if j == 0 { w[k].0 = v } else { w[k].1 = v };
            set(&mut work, base + e);
            let fp = reference_action(alpha, n, &work);
            set(&mut work, base - e);
            let fm = reference_action(alpha, n, &work);
            set(&mut work, base);
            *gj = (fp - fm) / (2.0 * e);
        }
        out.push((g[0], g[1]));
    }
    out
}

pub fn as_pairs(t: &OddTrajectory) -> Vec<(f64, f64)> {
    t.nodes().iter().map(|p| (p.x, p.y)).collect()
}

/// Random point in [-r, r]² at least `clearance` away from both centers.
pub fn random_feasible_point<R: Rng>(rng: &mut R, r: f64, clearance: f64) -> Point {
    loop {
        let p = Point::new(rng.gen_range(-r..r), rng.gen_range(-r..r));
        let d = (p - Point::new(0.5, 0.0)).norm().min((p + Point::new(0.5, 0.0)).norm());
        if d > clearance {
            return p;
        }
    }
}

/// Random odd trajectory with nodes kept clear of the centers.
pub fn random_trajectory<R: Rng>(rng: &mut R) -> OddTrajectory {
    let n = rng.gen_range(0.5..6.0);
    let m = rng.gen_range(3..40);
    let nodes = (0..m).map(|_| random_feasible_point(rng, 3.0, 0.05)).collect();
    OddTrajectory::new(n, nodes).unwrap()
}
