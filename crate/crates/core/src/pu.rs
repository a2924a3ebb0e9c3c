//! Partitions of unity on quadrilateral meshes: the bilinear hat functions
//! and the element-wise flat-top construction.
//!
//! Evaluation is element-scoped: callers pass an [`ElementPoint`], and a node
//! that is not a corner of that element contributes exact zeros.

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::mesh::{bilinear_shape, ElementPoint, Mesh, REFERENCE_CORNERS};

/// Value and physical gradient of a scalar function at a point.
pub type ValueGrad = (f64, Vector2<f64>);

/// Hat values and physical gradients of the four corners of `pt.element`.
pub fn hat_corners(pt: &ElementPoint) -> [ValueGrad; 4] {
    let (values, grads) = bilinear_shape(&pt.reference);
    std::array::from_fn(|a| (values[a], pt.physical_gradient(grads[a])))
}

/// Hat function of node `i` at `pt`.
pub fn hat_eval(mesh: &Mesh, i: usize, pt: &ElementPoint) -> ValueGrad {
    match mesh.element(pt.element).iter().position(|&c| c == i) {
        Some(a) => hat_corners(pt)[a],
        None => (0.0, Vector2::zeros()),
    }
}

/// One-dimensional flat-top pair on the reference interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlatTop1d {
    pub left: f64,
    pub right: f64,
    pub d_left: f64,
    pub d_right: f64,
}

/// Flat-top PU parameters: `sigma` sets the width of the flat zones and
/// `exponent` the shape of the blend between them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlatTop {
    sigma: f64,
    exponent: u32,
}

impl Default for FlatTop {
    fn default() -> Self {
        Self { sigma: 0.2, exponent: 1 }
    }
}

impl FlatTop {
    pub fn new(sigma: f64, exponent: u32) -> Result<Self> {
        if !(0.0..0.5).contains(&sigma) {
            return Err(Error::InvalidParameter(format!("flat-top sigma must lie in [0, 0.5), got {sigma}")));
        }
        if exponent == 0 {
            return Err(Error::InvalidParameter("flat-top exponent must be positive".into()));
        }
        Ok(Self { sigma, exponent })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn exponent(&self) -> u32 {
        self.exponent
    }

    /// Reference coordinates where the 1D functions switch pieces.
    pub fn breakpoints(&self) -> [f64; 2] {
        [-1.0 + 2.0 * self.sigma, 1.0 - 2.0 * self.sigma]
    }

    /// `Q_L` is 1 on `[-1, -1 + 2 sigma]`, 0 on `[1 - 2 sigma, 1]` and
    /// `(1 - s^l)^l` in between, with `s` the affine coordinate of the
    /// middle piece; `Q_R = 1 - Q_L`.
    pub fn eval_1d(&self, xi: f64) -> FlatTop1d {
        let [lo, hi] = self.breakpoints();
        let (left, d_left) = if xi <= lo {
            (1.0, 0.0)
        } else if xi >= hi {
            (0.0, 0.0)
        } else {
            let width = 2.0 * (1.0 - 2.0 * self.sigma);
            let s = (xi - lo) / width;
            let l = self.exponent as i32;
            let sl = s.powi(l);
            let base = 1.0 - sl;
            let value = base.powi(l);
            let ds = if l == 1 { 1.0 } else { l as f64 * s.powi(l - 1) };
            let deriv = -(l as f64) * base.powi(l - 1) * ds / width;
            (value, deriv)
        };
        FlatTop1d { left, right: 1.0 - left, d_left, d_right: -d_left }
    }

    /// Flat-top values and physical gradients of the four corners of `pt.element`.
    pub fn corners(&self, pt: &ElementPoint) -> [ValueGrad; 4] {
        let fx = self.eval_1d(pt.reference.x);
        let fy = self.eval_1d(pt.reference.y);
        std::array::from_fn(|a| {
            let c = REFERENCE_CORNERS[a];
            let (vx, dx) = if c[0] < 0.0 { (fx.left, fx.d_left) } else { (fx.right, fx.d_right) };
            let (vy, dy) = if c[1] < 0.0 { (fy.left, fy.d_left) } else { (fy.right, fy.d_right) };
            (vx * vy, pt.physical_gradient(Vector2::new(dx * vy, vx * dy)))
        })
    }

    /// Flat-top function of node `i` at `pt`.
    pub fn eval(&self, mesh: &Mesh, i: usize, pt: &ElementPoint) -> ValueGrad {
        match mesh.element(pt.element).iter().position(|&c| c == i) {
            Some(a) => self.corners(pt)[a],
            None => (0.0, Vector2::zeros()),
        }
    }
}

/// Free-function form of [`FlatTop::eval_1d`] with parameter validation.
pub fn flat_top_1d_eval(xi: f64, sigma: f64, exponent: u32) -> Result<FlatTop1d> {
    Ok(FlatTop::new(sigma, exponent)?.eval_1d(xi))
}
