//! Potential, force and energy of the two-fixed-center problem.
//!
//! Sign convention: `U` is the positive (attractive) potential and the
//! equations of motion read `q̈ = ∇U(q)`. The physical potential energy is
//! `V = -U`.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point (or vector) in the configuration plane.
pub type Point = Vector2<f64>;

pub const DEFAULT_COLLISION_DELTA: f64 = 1e-6;

/// Exponent `α`, mass split `μ` and the two fixed centers
/// `(-μ, 0)` (mass `1-μ`) and `(1-μ, 0)` (mass `μ`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub alpha: f64,
    pub mu: f64,
    pub center1: Point,
    pub center2: Point,
    /// Radius of the exclusion ball around each center.
    pub collision_delta: f64,
}

impl ProblemSpec {
    pub fn new(alpha: f64, mu: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::ParameterRange(format!("alpha = {alpha} must lie in (0, 2)")));
        }
        if !(mu > 0.0 && mu < 1.0) {
            return Err(Error::ParameterRange(format!("mu = {mu} must lie in (0, 1)")));
        }
        Ok(ProblemSpec {
            alpha,
            mu,
            center1: Point::new(-mu, 0.0),
            center2: Point::new(1.0 - mu, 0.0),
            collision_delta: DEFAULT_COLLISION_DELTA,
        })
    }

    /// Equal masses, centers at `(±1/2, 0)`.
    pub fn symmetric(alpha: f64) -> Result<Self> {
        Self::new(alpha, 0.5)
    }

    pub fn with_collision_delta(mut self, delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::ParameterRange(format!("collision delta {delta} must be positive")));
        }
        self.collision_delta = delta;
        Ok(self)
    }

    pub fn is_symmetric(&self) -> bool {
        self.mu == 0.5
    }

    pub fn require_symmetric(&self) -> Result<()> {
        if self.is_symmetric() {
            Ok(())
        } else {
            Err(Error::Symmetry(format!(
                "odd-symmetric machinery requires mu = 1/2, got {}",
                self.mu
            )))
        }
    }

    fn masses(&self) -> [(f64, Point); 2] {
        [(1.0 - self.mu, self.center1), (self.mu, self.center2)]
    }

    pub fn center_distance(&self, point: &Point) -> f64 {
        (point - self.center1).norm().min((point - self.center2).norm())
    }

    pub fn is_feasible(&self, point: &Point) -> bool {
        self.center_distance(point) > self.collision_delta
    }

    fn check(&self, point: &Point) -> Result<()> {
        if self.is_feasible(point) {
            Ok(())
        } else {
            Err(Error::Collision {
                point: *point,
                delta: self.collision_delta,
            })
        }
    }

    /// `U(q)` without the collision check. Callers must have checked feasibility.
    pub(crate) fn potential_unchecked(&self, point: &Point) -> f64 {
        let half = -0.5 * self.alpha;
        self.masses().iter().map(|(m, c)| m * (point - c).norm_squared().powf(half)).sum()
    }

    pub(crate) fn grad_unchecked(&self, point: &Point) -> Point {
        let expo = -0.5 * self.alpha - 1.0;
        let mut g = Point::zeros();
        for (m, c) in self.masses() {
            let d = point - c;
            g -= d * (self.alpha * m * d.norm_squared().powf(expo));
        }
        g
    }

    /// `U(q) = (1-μ)/|q-q¹|^α + μ/|q-q²|^α`.
    pub fn potential(&self, point: &Point) -> Result<f64> {
        self.check(point)?;
        Ok(self.potential_unchecked(point))
    }

    /// `∂U/∂q = -α Σ mᵢ (q-qⁱ)/|q-qⁱ|^{α+2}`.
    pub fn grad_potential(&self, point: &Point) -> Result<Point> {
        self.check(point)?;
        Ok(self.grad_unchecked(point))
    }

    /// Energy constant `h = ½|q̇|² - U(q)`.
    pub fn energy(&self, point: &Point, velocity: &Point) -> Result<f64> {
        Ok(0.5 * velocity.norm_squared() - self.potential(point)?)
    }
}

/// Right-hand side of the one-dimensional reference equation
/// `z̈ = -α z / (z² + r²)^{α/2+1}` for motion along the symmetry axis of a
/// pair of primaries at distance `r` from the axis.
pub fn sitnikov_rhs(alpha: f64, r: f64, z: f64) -> Result<f64> {
    if r == 0.0 && z == 0.0 {
        return Err(Error::Degenerate);
    }
    Ok(-alpha * z * (z * z + r * r).powf(-0.5 * alpha - 1.0))
}
