//! Manufactured Poisson problems with pure Neumann data.

use nalgebra::Vector2;

use crate::enrichment::CrackTip;
use crate::error::Result;
use crate::mesh::Point;

/// `-Lap u = f` in the domain, `du/dn = g` on its boundary, with `u` known.
pub trait Problem: Sync {
    fn name(&self) -> &'static str;

    fn exact(&self, x: &Point) -> Result<f64>;

    fn exact_grad(&self, x: &Point) -> Result<Vector2<f64>>;

    fn source(&self, x: &Point) -> f64;

    /// Neumann datum for the outward unit normal `normal`.
    fn flux(&self, x: &Point, normal: &Vector2<f64>) -> Result<f64> {
        Ok(self.exact_grad(x)?.dot(normal))
    }
}

/// `u = exp(2x + y)` on the unit square.
#[derive(Clone, Copy, Debug, Default)]
pub struct SmoothProblem;

impl Problem for SmoothProblem {
    fn name(&self) -> &'static str {
        "smooth"
    }

    fn exact(&self, x: &Point) -> Result<f64> {
        Ok((2.0 * x.x + x.y).exp())
    }

    fn exact_grad(&self, x: &Point) -> Result<Vector2<f64>> {
        let u = (2.0 * x.x + x.y).exp();
        Ok(Vector2::new(2.0 * u, u))
    }

    fn source(&self, x: &Point) -> f64 {
        -5.0 * (2.0 * x.x + x.y).exp()
    }
}

/// `u = r^(1/2) sin(theta/2) + r^(3/2) sin(3 theta/2)` around the crack tip.
/// Both terms are harmonic and have zero normal derivative on the crack faces.
#[derive(Clone, Copy, Debug)]
pub struct CrackProblem {
    pub tip: CrackTip,
}

impl CrackProblem {
    pub fn new() -> Self {
        Self { tip: CrackTip { tip: Point::zeros(), tangent: Vector2::new(1.0, 0.0) } }
    }
}

impl Default for CrackProblem {
    fn default() -> Self {
        Self::new()
    }
}

impl Problem for CrackProblem {
    fn name(&self) -> &'static str {
        "crack"
    }

    fn exact(&self, x: &Point) -> Result<f64> {
        let (r, theta) = self.tip.polar(x);
        Ok(r.sqrt() * (0.5 * theta).sin() + r.powf(1.5) * (1.5 * theta).sin())
    }

    fn exact_grad(&self, x: &Point) -> Result<Vector2<f64>> {
        let (_, g1) = self.tip.singular_term(x, 0.5)?;
        let (_, g3) = self.tip.singular_term(x, 1.5)?;
        Ok(g1 + g3)
    }

    fn source(&self, _x: &Point) -> f64 {
        0.0
    }
}

/// `u = c + a . x`; reproduced exactly by every space here.
#[derive(Clone, Copy, Debug)]
pub struct LinearProblem {
    pub constant: f64,
    pub gradient: Vector2<f64>,
}

impl Problem for LinearProblem {
    fn name(&self) -> &'static str {
        "linear"
    }

    fn exact(&self, x: &Point) -> Result<f64> {
        Ok(self.constant + self.gradient.dot(x))
    }

    fn exact_grad(&self, _x: &Point) -> Result<Vector2<f64>> {
        Ok(self.gradient)
    }

    fn source(&self, _x: &Point) -> f64 {
        0.0
    }
}
