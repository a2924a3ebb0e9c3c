//! Element and boundary quadrature.
//!
//! Rules are produced in reference coordinates; physical weights come from
//! the geometry of the space being integrated. Elements are first cut into
//! rectangles along flat-top breakpoints and, on the crack domain, along the
//! crack line. Around the tip, cells are refined dyadically toward the tip,
//! and the innermost cell (the one with the tip as a corner) gets a Duffy
//! rule that absorbs the `1/r` behaviour of the integrand.

use std::sync::OnceLock;

use nalgebra::Vector2;

use crate::mesh::{BoundaryEdge, CrackMesh, Point};
use crate::spaces::ApproximationSpace;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Purpose {
    Assembly,
    Error,
}

/// Depths and orders used to build element rules.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuadratureSettings {
    pub tip_depth_assembly: usize,
    pub tip_depth_error: usize,
    /// Minimum Gauss order on cells of the crack region.
    pub crack_order: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self { tip_depth_assembly: 8, tip_depth_error: 12, crack_order: 5 }
    }
}

impl QuadratureSettings {
    pub fn tip_depth(&self, purpose: Purpose) -> usize {
        match purpose {
            Purpose::Assembly => self.tip_depth_assembly,
            Purpose::Error => self.tip_depth_error,
        }
    }
}

/// Quadrature on one element, in reference coordinates.
#[derive(Clone, Debug, Default)]
pub struct QuadratureRule {
    pub element: usize,
    pub points: Vec<Point>,
    /// Reference-measure weights; multiply by `det J` for physical ones.
    pub weights: Vec<f64>,
    /// Deepest dyadic refinement level used.
    pub depth: usize,
    /// Whether the element was split along the crack.
    pub cut: bool,
    /// Sub-cells dropped for having (near) zero area.
    pub dropped: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Gauss-Legendre points and weights on `[-1, 1]`, by Newton iteration on
/// the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp;
        loop {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j - 1) as f64 * z * p2 - (j - 1) as f64 * p3) / j as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() <= 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn cached_gauss(n: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static TABLE: OnceLock<Vec<(Vec<f64>, Vec<f64>)>> = OnceLock::new();
    let table = TABLE.get_or_init(|| (0..=24).map(|k| if k == 0 { (vec![], vec![]) } else { gauss_legendre(k) }).collect());
    &table[n.clamp(1, 24)]
}

#[derive(Clone, Copy, Debug)]
struct Rect {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Rect {
    fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    fn size(&self) -> f64 {
        (self.x1 - self.x0).max(self.y1 - self.y0)
    }

    fn distance(&self, p: &Point) -> f64 {
        let dx = (self.x0 - p.x).max(p.x - self.x1).max(0.0);
        let dy = (self.y0 - p.y).max(p.y - self.y1).max(0.0);
        dx.hypot(dy)
    }

    fn corners(&self) -> [Point; 4] {
        [
            Point::new(self.x0, self.y0),
            Point::new(self.x1, self.y0),
            Point::new(self.x1, self.y1),
            Point::new(self.x0, self.y1),
        ]
    }

    fn children(&self) -> [Rect; 4] {
        let xm = 0.5 * (self.x0 + self.x1);
        let ym = 0.5 * (self.y0 + self.y1);
        [
            Rect { x0: self.x0, x1: xm, y0: self.y0, y1: ym },
            Rect { x0: xm, x1: self.x1, y0: self.y0, y1: ym },
            Rect { x0: xm, x1: self.x1, y0: ym, y1: self.y1 },
            Rect { x0: self.x0, x1: xm, y0: ym, y1: self.y1 },
        ]
    }
}

fn push_gauss(rule: &mut QuadratureRule, r: &Rect, q: usize) {
    let (x, w) = cached_gauss(q);
    let hx = 0.5 * (r.x1 - r.x0);
    let hy = 0.5 * (r.y1 - r.y0);
    let cx = 0.5 * (r.x0 + r.x1);
    let cy = 0.5 * (r.y0 + r.y1);
    for (j, yj) in x.iter().enumerate() {
        for (i, xi) in x.iter().enumerate() {
            rule.points.push(Point::new(cx + hx * xi, cy + hy * yj));
            rule.weights.push(w[i] * w[j] * hx * hy);
        }
    }
}

/// Two collapsed-square rules on the triangles with apex `apex` covering `r`.
fn push_duffy(rule: &mut QuadratureRule, r: &Rect, apex: Point, q: usize) {
    let (x, w) = cached_gauss(q);
    let c = r.corners();
    let k = c.iter().position(|p| (p - apex).norm() <= 1e-15 * r.size().max(1.0)).unwrap_or(0);
    let p1 = c[(k + 1) % 4];
    let opp = c[(k + 2) % 4];
    let p3 = c[(k + 3) % 4];
    for (a, b) in [(p1, opp), (opp, p3)] {
        let e1 = a - apex;
        let e2 = b - a;
        let det = (e1.x * e2.y - e1.y * e2.x).abs();
        for (j, vj) in x.iter().enumerate() {
            let v = 0.5 * (vj + 1.0);
            for (i, ui) in x.iter().enumerate() {
                let u = 0.5 * (ui + 1.0);
                rule.points.push(apex + e1 * u + e2 * (u * v));
                rule.weights.push(0.25 * w[i] * w[j] * u * det);
            }
        }
    }
}

fn refine_toward(rule: &mut QuadratureRule, r: Rect, target: Point, level: usize, depth: usize, q: usize) {
    rule.depth = rule.depth.max(level);
    let corner = r.corners().into_iter().any(|c| (c - target).norm() <= 1e-15);
    if level >= depth {
        if corner {
            push_duffy(rule, &r, target, q);
        } else {
            push_gauss(rule, &r, q);
        }
        return;
    }
    if r.distance(&target) < r.size() {
        for child in r.children() {
            refine_toward(rule, child, target, level + 1, depth, q);
        }
    } else {
        push_gauss(rule, &r, q);
    }
}

fn split_lines(extra: &[f64]) -> Vec<f64> {
    let mut v = vec![-1.0, 1.0];
    v.extend(extra.iter().copied().filter(|t| *t > -1.0 && *t < 1.0));
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-14);
    v
}

/// Reference coordinates of the crack tip seen from element `e` of the
/// (uniform, affine) crack mesh.
fn tip_reference(crack: &CrackMesh, e: usize) -> Point {
    let m = crack.mesh();
    let c = m.element(e).map(|i| m.node(i));
    let centre = (c[0] + c[2]) * 0.5;
    let half = Vector2::new(0.5 * (c[2].x - c[0].x), 0.5 * (c[2].y - c[0].y));
    let d = crack.tip() - centre;
    Point::new(d.x / half.x, d.y / half.y)
}

/// Quadrature for element `e` of `space`.
pub fn element_quadrature(
    space: &ApproximationSpace,
    crack: Option<&CrackMesh>,
    e: usize,
    purpose: Purpose,
    settings: &QuadratureSettings,
) -> QuadratureRule {
    let k = space.degree() as usize;
    let mut q = match purpose {
        Purpose::Assembly => k + 2,
        Purpose::Error => k + 3,
    };
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    if let Some(ft) = space.flat_top() {
        let [lo, hi] = ft.breakpoints();
        xs.extend([lo, hi]);
        ys.extend([lo, hi]);
    }
    let mut rule = QuadratureRule { element: e, ..Default::default() };
    let mut near_tip = None;
    if let Some(crack) = crack {
        let o = tip_reference(crack, e);
        if crack.is_cut(e) {
            rule.cut = true;
            ys.push(o.y);
            if e == crack.tip_element() {
                xs.push(o.x);
            }
        }
        if crack.near_tip_elements().contains(&e) {
            near_tip = Some(o);
        }
        q = q.max(settings.crack_order);
    }
    let xs = split_lines(&xs);
    let ys = split_lines(&ys);
    let depth = settings.tip_depth(purpose);
    for wy in ys.windows(2) {
        for wx in xs.windows(2) {
            let r = Rect { x0: wx[0], x1: wx[1], y0: wy[0], y1: wy[1] };
            if r.area() < 1e-16 {
                rule.dropped += 1;
                continue;
            }
            match near_tip {
                Some(o) => refine_toward(&mut rule, r, o, 0, depth, q),
                None => push_gauss(&mut rule, &r, q),
            }
        }
    }
    rule
}

/// Rules for every element.
pub fn quadrature_rules(
    space: &ApproximationSpace,
    crack: Option<&CrackMesh>,
    purpose: Purpose,
    settings: &QuadratureSettings,
) -> Vec<QuadratureRule> {
    use rayon::prelude::*;
    (0..space.mesh().element_count())
        .into_par_iter()
        .map(|e| element_quadrature(space, crack, e, purpose, settings))
        .collect()
}

/// 1D rule `(t, weight)` on `[-1, 1]` for a boundary side, split where the
/// integrand has kinks or jumps.
pub fn edge_rule(space: &ApproximationSpace, crack: Option<&CrackMesh>, edge: &BoundaryEdge, q: usize) -> Vec<(f64, f64)> {
    let mut splits = Vec::new();
    if let Some(ft) = space.flat_top() {
        splits.extend(ft.breakpoints());
    }
    if let Some(crack) = crack {
        if crack.is_cut(edge.element) {
            let o = tip_reference(crack, edge.element);
            // reference coordinate along the side, mapped to t
            match edge.local_side {
                1 => splits.push(o.y),
                3 => splits.push(-o.y),
                _ => {}
            }
        }
    }
    let lines = split_lines(&splits);
    let (x, w) = cached_gauss(q);
    let mut out = Vec::with_capacity(q * (lines.len() - 1));
    for s in lines.windows(2) {
        let half = 0.5 * (s[1] - s[0]);
        let mid = 0.5 * (s[1] + s[0]);
        for (xi, wi) in x.iter().zip(w) {
            out.push((mid + half * xi, wi * half));
        }
    }
    out
}
