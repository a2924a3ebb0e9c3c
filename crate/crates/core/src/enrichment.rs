//! Local approximation spaces attached to mesh nodes: scaled monomials for
//! the smooth problem and crack-tip functions for the slit domain.

use std::f64::consts::PI;

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::mesh::{CrackMesh, CrackNodeClass, Mesh, Point};
use crate::pu::ValueGrad;

/// One basis function of a local space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnrichmentFunction {
    /// `((x - x_i) / h)^alpha`
    Monomial { px: u32, py: u32 },
    /// `sqrt(r) sin(theta / 2)` in tip polar coordinates.
    SingularHalf,
    /// `SingularHalf * <x - x_i, t> / h` with `t` the crack tangent.
    SingularHalfTangential,
    /// `+1` for `y >= 0`, `-1` below.
    Heaviside,
}

/// Geometry of a straight crack ending at `tip` and lying along `-tangent`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrackTip {
    pub tip: Point,
    pub tangent: Vector2<f64>,
}

impl CrackTip {
    pub fn of(crack: &CrackMesh) -> Self {
        Self { tip: crack.tip(), tangent: crack.tangent() }
    }

    /// Polar coordinates `(r, theta)` around the tip, `theta` in `(-pi, pi]`
    /// measured from the tangent; the branch cut is the crack itself.
    pub fn polar(&self, x: &Point) -> (f64, f64) {
        let d = x - self.tip;
        let normal = Vector2::new(-self.tangent.y, self.tangent.x);
        let along = d.dot(&self.tangent);
        let across = d.dot(&normal);
        let mut theta = across.atan2(along);
        if across == 0.0 && theta == -PI {
            theta = PI;
        }
        (d.norm(), theta)
    }

    /// `r^a sin(a theta)` and its gradient. `a` is a positive half-integer
    /// exponent here; the gradient is singular at the tip for `a < 1`.
    pub fn singular_term(&self, x: &Point, a: f64) -> Result<ValueGrad> {
        let (r, theta) = self.polar(x);
        if r == 0.0 {
            if a < 1.0 {
                return Err(Error::SingularPoint);
            }
            return Ok((0.0, Vector2::zeros()));
        }
        let value = r.powf(a) * (a * theta).sin();
        // Im(z^a) has gradient (Im, Re) of a z^(a-1) in the local frame
        let s = a * r.powf(a - 1.0);
        let g_along = s * ((a - 1.0) * theta).sin();
        let g_across = s * ((a - 1.0) * theta).cos();
        let normal = Vector2::new(-self.tangent.y, self.tangent.x);
        Ok((value, self.tangent * g_along + normal * g_across))
    }

    /// `+1` on and above the crack line, `-1` below it.
    pub fn heaviside(&self, x: &Point) -> f64 {
        let normal = Vector2::new(-self.tangent.y, self.tangent.x);
        if (x - self.tip).dot(&normal) >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// The crack enrichments available to [`crack_enrichment_eval`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CrackEnrichment {
    SingularHalf,
    SingularHalfTangential,
    Heaviside,
}

/// Evaluates one crack enrichment attached to a node at `center` with scale `h`.
pub fn crack_enrichment_eval(
    kind: CrackEnrichment,
    x: &Point,
    center: &Point,
    h: f64,
    tip: &CrackTip,
) -> Result<ValueGrad> {
    match kind {
        CrackEnrichment::SingularHalf => tip.singular_term(x, 0.5),
        CrackEnrichment::SingularHalfTangential => {
            let (s, gs) = tip.singular_term(x, 0.5)?;
            let t = (x - center).dot(&tip.tangent) / h;
            Ok((s * t, gs * t + tip.tangent * (s / h)))
        }
        CrackEnrichment::Heaviside => Ok((tip.heaviside(x), Vector2::zeros())),
    }
}

/// Exponents of the scaled monomials of total degree at most `k`, ordered by
/// degree and then by decreasing power of `x`.
pub fn monomial_exponents(k: u32) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for d in 0..=k {
        for py in 0..=d {
            out.push((d - py, py));
        }
    }
    out
}

/// `binomial(k + 2, k)`
pub fn polynomial_dimension(k: u32) -> usize {
    ((k + 1) * (k + 2) / 2) as usize
}

/// A local space `V_i`: a node, its scale and an ordered basis.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalEnrichmentSpace {
    pub node: usize,
    pub center: Point,
    pub h: f64,
    pub functions: Vec<EnrichmentFunction>,
    pub tip: Option<CrackTip>,
}

impl LocalEnrichmentSpace {
    pub fn dim(&self) -> usize {
        self.functions.len()
    }

    /// Highest monomial degree in the basis.
    pub fn polynomial_degree(&self) -> u32 {
        self.functions
            .iter()
            .filter_map(|f| match f {
                EnrichmentFunction::Monomial { px, py } => Some(px + py),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    /// Writes basis values into `values` (and gradients when requested).
    pub fn eval_into(&self, x: &Point, values: &mut [f64], mut grads: Option<&mut [Vector2<f64>]>) -> Result<()> {
        let s = (x - self.center) / self.h;
        let inv_h = 1.0 / self.h;
        let max_deg = self.polynomial_degree() as usize;
        let mut pow_x = [1.0; 8];
        let mut pow_y = [1.0; 8];
        for d in 1..=max_deg.min(7) {
            pow_x[d] = pow_x[d - 1] * s.x;
            pow_y[d] = pow_y[d - 1] * s.y;
        }
        let need_grad = grads.is_some();
        let mut singular: Option<ValueGrad> = None;
        for (j, f) in self.functions.iter().enumerate() {
            let (v, g) = match *f {
                EnrichmentFunction::Monomial { px, py } => {
                    let (px, py) = (px as usize, py as usize);
                    let v = pow_x[px] * pow_y[py];
                    let g = if need_grad {
                        let gx = if px > 0 { px as f64 * pow_x[px - 1] * pow_y[py] * inv_h } else { 0.0 };
                        let gy = if py > 0 { py as f64 * pow_x[px] * pow_y[py - 1] * inv_h } else { 0.0 };
                        Vector2::new(gx, gy)
                    } else {
                        Vector2::zeros()
                    };
                    (v, g)
                }
                EnrichmentFunction::Heaviside => (self.tip()?.heaviside(x), Vector2::zeros()),
                EnrichmentFunction::SingularHalf | EnrichmentFunction::SingularHalfTangential => {
                    let tip = self.tip()?;
                    let (sv, sg) = match singular {
                        Some(s) => s,
                        None => {
                            let s = if need_grad {
                                tip.singular_term(x, 0.5)?
                            } else {
                                let (r, theta) = tip.polar(x);
                                (r.sqrt() * (0.5 * theta).sin(), Vector2::zeros())
                            };
                            singular = Some(s);
                            s
                        }
                    };
                    if *f == EnrichmentFunction::SingularHalf {
                        (sv, sg)
                    } else {
                        let t = (x - self.center).dot(&tip.tangent) * inv_h;
                        (sv * t, sg * t + tip.tangent * (sv * inv_h))
                    }
                }
            };
            values[j] = v;
            if let Some(gs) = grads.as_deref_mut() {
                gs[j] = g;
            }
        }
        Ok(())
    }

    /// Basis values only.
    pub fn values(&self, x: &Point) -> Result<Vec<f64>> {
        let mut v = vec![0.0; self.dim()];
        self.eval_into(x, &mut v, None)?;
        Ok(v)
    }

    fn tip(&self) -> Result<&CrackTip> {
        self.tip
            .as_ref()
            .ok_or_else(|| Error::Invariant(format!("node {} has crack enrichments but no crack geometry", self.node)))
    }
}

/// Scaled monomials of total degree `<= k` centred at `center`.
pub fn monomial_basis(node: usize, k: u32, center: Point, h: f64) -> Result<LocalEnrichmentSpace> {
    if k < 1 {
        return Err(Error::InvalidParameter(format!("polynomial degree must be >= 1, got {k}")));
    }
    let functions = monomial_exponents(k).into_iter().map(|(px, py)| EnrichmentFunction::Monomial { px, py }).collect();
    Ok(LocalEnrichmentSpace { node, center, h, functions, tip: None })
}

/// Which local spaces to attach to nodes.
#[derive(Clone, Copy, Debug)]
pub enum LocalProblem<'a> {
    /// `P_k` at every node.
    Smooth { degree: u32 },
    /// Linears everywhere, plus the singular function in the tip square and
    /// its tangential companion on nodes of cut elements.
    Crack(&'a CrackMesh),
}

/// The local space of node `i`.
pub fn local_space_for_node(mesh: &Mesh, problem: LocalProblem<'_>, i: usize) -> Result<LocalEnrichmentSpace> {
    let center = mesh.node(i);
    match problem {
        LocalProblem::Smooth { degree } => monomial_basis(i, degree, center, mesh.h()),
        LocalProblem::Crack(crack) => {
            if crack.is_tip_node(i) && !crack.in_cut_neighborhood(i) {
                return Err(Error::Invariant(format!("tip node {i} is missing from the cut neighbourhood")));
            }
            let mut space = monomial_basis(i, 1, center, mesh.h())?;
            space.tip = Some(CrackTip::of(crack));
            match crack.node_class(i) {
                CrackNodeClass::Regular => {}
                CrackNodeClass::SingularSquare => space.functions.push(EnrichmentFunction::SingularHalf),
                CrackNodeClass::CutNeighborhood => {
                    space.functions.push(EnrichmentFunction::SingularHalf);
                    space.functions.push(EnrichmentFunction::SingularHalfTangential);
                }
            }
            Ok(space)
        }
    }
}
