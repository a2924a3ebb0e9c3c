//! Structured quadrilateral meshes on squares.
//!
//! Three flavours are built here: the uniform lattice mesh, a randomly
//! perturbed variant with fixed boundary nodes, and the slit-domain mesh used
//! by the crack problem. The crack is never meshed; it is described by index
//! sets and a geometric predicate, and all discontinuities live in the
//! enrichment functions.
//!
//! Nodes are numbered lattice-row-major (`iy * (N + 1) + ix`), elements the
//! same way (`ey * N + ex`), and every element lists its corners
//! counterclockwise starting from the lower-left one.

use std::io::Write;

use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type Point = Vector2<f64>;

/// Corners of the reference square `[-1, 1]^2`, in element corner order.
pub const REFERENCE_CORNERS: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

/// Axis-aligned square domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Square {
    pub origin: Point,
    pub side: f64,
}

impl Square {
    pub fn new(x0: f64, y0: f64, side: f64) -> Result<Self> {
        if !(side > 0.0) || !side.is_finite() {
            return Err(Error::InvalidParameter(format!("square side must be positive, got {side}")));
        }
        Ok(Self { origin: Point::new(x0, y0), side })
    }

    /// `[0, 1]^2`
    pub fn unit() -> Self {
        Self { origin: Point::new(0.0, 0.0), side: 1.0 }
    }

    /// `[-half, half]^2`
    pub fn centered(half: f64) -> Self {
        Self { origin: Point::new(-half, -half), side: 2.0 * half }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MeshKind {
    Uniform,
    Perturbed { magnitude: f64, seed: u64 },
}

/// A point inside a specific element, together with the element map data
/// needed to turn reference derivatives into physical ones.
#[derive(Clone, Debug)]
pub struct ElementPoint {
    pub element: usize,
    pub reference: Point,
    pub physical: Point,
    /// `d x / d xi`, column `j` is the derivative along reference axis `j`.
    pub jacobian: Matrix2<f64>,
    pub det: f64,
    pub inv_jacobian: Matrix2<f64>,
}

impl ElementPoint {
    pub fn new(element: usize, reference: Point, physical: Point, jacobian: Matrix2<f64>) -> Self {
        let det = jacobian.determinant();
        let inv_jacobian = jacobian.try_inverse().unwrap_or_else(Matrix2::zeros);
        Self { element, reference, physical, jacobian, det, inv_jacobian }
    }

    /// Maps a gradient taken in reference coordinates to physical coordinates.
    #[inline]
    pub fn physical_gradient(&self, reference_gradient: Vector2<f64>) -> Vector2<f64> {
        self.inv_jacobian.transpose() * reference_gradient
    }
}

/// One side of an element lying on the domain boundary. Local side `s` runs
/// from corner `s` to corner `(s + 1) % 4`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub element: usize,
    pub local_side: usize,
}

impl BoundaryEdge {
    /// Reference coordinates of the side at parameter `t` in `[-1, 1]`, and
    /// the reference tangent (direction of increasing `t`).
    pub fn reference_point(&self, t: f64) -> (Point, Point) {
        match self.local_side {
            0 => (Point::new(t, -1.0), Point::new(1.0, 0.0)),
            1 => (Point::new(1.0, t), Point::new(0.0, 1.0)),
            2 => (Point::new(-t, 1.0), Point::new(-1.0, 0.0)),
            _ => (Point::new(-1.0, -t), Point::new(0.0, -1.0)),
        }
    }
}

/// Values and reference gradients of the four bilinear shape functions.
pub fn bilinear_shape(xi: &Point) -> ([f64; 4], [Vector2<f64>; 4]) {
    let mut values = [0.0; 4];
    let mut grads = [Vector2::zeros(); 4];
    for (a, c) in REFERENCE_CORNERS.iter().enumerate() {
        let fx = 1.0 + c[0] * xi.x;
        let fy = 1.0 + c[1] * xi.y;
        values[a] = 0.25 * fx * fy;
        grads[a] = Vector2::new(0.25 * c[0] * fy, 0.25 * c[1] * fx);
    }
    (values, grads)
}

#[derive(Clone, Debug)]
pub struct Mesh {
    domain: Square,
    divisions: usize,
    h: f64,
    nodes: Vec<Point>,
    elements: Vec<[usize; 4]>,
    patches: Vec<Vec<usize>>,
    kind: MeshKind,
}

impl Mesh {
    /// `(N + 1)^2` lattice nodes and `N^2` square elements on `domain`.
    pub fn uniform(divisions: usize, domain: Square) -> Result<Self> {
        if divisions < 2 {
            return Err(Error::InvalidParameter(format!("mesh needs N >= 2, got {divisions}")));
        }
        let n = divisions;
        let mut nodes = Vec::with_capacity((n + 1) * (n + 1));
        for iy in 0..=n {
            for ix in 0..=n {
                nodes.push(lattice_point(&domain, n, ix, iy));
            }
        }
        let mut elements = Vec::with_capacity(n * n);
        for ey in 0..n {
            for ex in 0..n {
                let a = ey * (n + 1) + ex;
                elements.push([a, a + 1, a + n + 2, a + n + 1]);
            }
        }
        let patches = build_patches(nodes.len(), &elements);
        Ok(Self { domain, divisions: n, h: domain.side / n as f64, nodes, elements, patches, kind: MeshKind::Uniform })
    }

    /// Uniform mesh with every interior node moved by `magnitude * h * eps`,
    /// `eps` uniform on `[-0.5, 0.5]^2`.
    ///
    /// Each node draws from its own ChaCha8 stream: the generator is seeded
    /// with `seed` and the stream id is `(ix << 32) | iy`, so coordinates do
    /// not depend on traversal order or platform.
    pub fn perturbed(divisions: usize, domain: Square, magnitude: f64, seed: u64) -> Result<Self> {
        if !(0.0..=0.25).contains(&magnitude) {
            return Err(Error::InvalidParameter(format!(
                "perturbation magnitude must lie in [0, 0.25], got {magnitude}"
            )));
        }
        let mut mesh = Self::uniform(divisions, domain)?;
        if magnitude == 0.0 {
            return Ok(mesh);
        }
        let n = divisions;
        let h = mesh.h;
        for iy in 1..n {
            for ix in 1..n {
                let eps = lattice_noise(seed, ix as u64, iy as u64);
                mesh.nodes[iy * (n + 1) + ix] += eps * (magnitude * h);
            }
        }
        mesh.kind = MeshKind::Perturbed { magnitude, seed };
        mesh.check_jacobians()?;
        Ok(mesh)
    }

    pub fn domain(&self) -> Square {
        self.domain
    }

    /// Number of element layers per side (`N`).
    pub fn divisions(&self) -> usize {
        self.divisions
    }

    /// Nominal mesh parameter `side / N`.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn kind(&self) -> MeshKind {
        self.kind
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> Point {
        self.nodes[i]
    }

    pub fn elements(&self) -> &[[usize; 4]] {
        &self.elements
    }

    pub fn element(&self, e: usize) -> [usize; 4] {
        self.elements[e]
    }

    /// Elements incident to node `i` (the support of its hat function), ascending.
    pub fn patch(&self, i: usize) -> &[usize] {
        &self.patches[i]
    }

    pub fn node_index(&self, ix: usize, iy: usize) -> usize {
        iy * (self.divisions + 1) + ix
    }

    pub fn node_lattice(&self, i: usize) -> (usize, usize) {
        (i % (self.divisions + 1), i / (self.divisions + 1))
    }

    pub fn element_index(&self, ex: usize, ey: usize) -> usize {
        ey * self.divisions + ex
    }

    pub fn element_lattice(&self, e: usize) -> (usize, usize) {
        (e % self.divisions, e / self.divisions)
    }

    /// Whether every element is an axis-aligned rectangle.
    pub fn is_rectangular(&self) -> bool {
        let tol = 1e-13 * self.h();
        self.elements.iter().all(|el| {
            let p = el.map(|i| self.nodes[i]);
            (p[0].y - p[1].y).abs() <= tol
                && (p[3].y - p[2].y).abs() <= tol
                && (p[0].x - p[3].x).abs() <= tol
                && (p[1].x - p[2].x).abs() <= tol
        })
    }

    pub fn is_boundary_node(&self, i: usize) -> bool {
        let (ix, iy) = self.node_lattice(i);
        ix == 0 || iy == 0 || ix == self.divisions || iy == self.divisions
    }

    /// Nodes joined to `i` by an element side.
    pub fn side_neighbors(&self, i: usize) -> Vec<usize> {
        let (ix, iy) = self.node_lattice(i);
        let n = self.divisions;
        let mut out = Vec::with_capacity(4);
        if iy > 0 {
            out.push(self.node_index(ix, iy - 1));
        }
        if ix > 0 {
            out.push(self.node_index(ix - 1, iy));
        }
        if ix < n {
            out.push(self.node_index(ix + 1, iy));
        }
        if iy < n {
            out.push(self.node_index(ix, iy + 1));
        }
        out
    }

    /// Bilinear map of element `e` at reference point `xi` and its Jacobian.
    pub fn reference_map(&self, e: usize, xi: &Point) -> (Point, Matrix2<f64>) {
        let (values, grads) = bilinear_shape(xi);
        let mut x = Point::zeros();
        let mut jac = Matrix2::zeros();
        for (a, &node) in self.elements[e].iter().enumerate() {
            let p = self.nodes[node];
            x += p * values[a];
            jac += p * grads[a].transpose();
        }
        (x, jac)
    }

    pub fn element_point(&self, e: usize, xi: Point) -> ElementPoint {
        let (x, jac) = self.reference_map(e, &xi);
        ElementPoint::new(e, xi, x, jac)
    }

    /// Element area from the shoelace formula (exact for bilinear quads).
    pub fn element_area(&self, e: usize) -> f64 {
        let c = self.elements[e].map(|i| self.nodes[i]);
        let mut s = 0.0;
        for a in 0..4 {
            let p = c[a];
            let q = c[(a + 1) % 4];
            s += p.x * q.y - q.x * p.y;
        }
        0.5 * s
    }

    /// The bilinear Jacobian determinant is affine in each reference
    /// variable, so positivity at the four corners implies positivity on
    /// the whole element.
    pub fn check_jacobians(&self) -> Result<()> {
        for e in 0..self.elements.len() {
            for c in REFERENCE_CORNERS {
                let (_, jac) = self.reference_map(e, &Point::new(c[0], c[1]));
                let det = jac.determinant();
                if !(det > 0.0) {
                    return Err(Error::DegenerateMesh { element: e, det });
                }
            }
        }
        Ok(())
    }

    /// Newton inversion of the bilinear map of element `e`.
    pub fn invert_map(&self, e: usize, x: &Point) -> Option<Point> {
        let mut xi = Point::zeros();
        for _ in 0..20 {
            let (y, jac) = self.reference_map(e, &xi);
            let step = jac.try_inverse()? * (x - y);
            xi += step;
            if step.norm() <= 1e-12 {
                return Some(xi);
            }
        }
        None
    }

    /// Finds an element containing `x` (closed elements; the lowest index
    /// wins on shared edges).
    pub fn locate(&self, x: &Point) -> Option<ElementPoint> {
        let n = self.divisions as isize;
        let rel = (x - self.domain.origin) / self.h;
        let ex0 = rel.x.floor() as isize;
        let ey0 = rel.y.floor() as isize;
        let mut best: Option<usize> = None;
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (ex, ey) = (ex0 + dx, ey0 + dy);
                if ex < 0 || ey < 0 || ex >= n || ey >= n {
                    continue;
                }
                let e = self.element_index(ex as usize, ey as usize);
                if let Some(xi) = self.invert_map(e, x) {
                    let tol = 1e-10;
                    if xi.x.abs() <= 1.0 + tol && xi.y.abs() <= 1.0 + tol && best.is_none_or(|b| e < b) {
                        best = Some(e);
                    }
                }
            }
        }
        best.map(|e| {
            let xi = self.invert_map(e, x).unwrap();
            self.element_point(e, xi)
        })
    }

    pub fn boundary_edges(&self) -> Vec<BoundaryEdge> {
        let n = self.divisions;
        let mut out = Vec::with_capacity(4 * n);
        for ex in 0..n {
            out.push(BoundaryEdge { element: self.element_index(ex, 0), local_side: 0 });
        }
        for ey in 0..n {
            out.push(BoundaryEdge { element: self.element_index(n - 1, ey), local_side: 1 });
        }
        for ex in (0..n).rev() {
            out.push(BoundaryEdge { element: self.element_index(ex, n - 1), local_side: 2 });
        }
        for ey in (0..n).rev() {
            out.push(BoundaryEdge { element: self.element_index(0, ey), local_side: 3 });
        }
        out
    }

    /// Plain-text listing: one `i x y` line per node, then one
    /// `s i0 i1 i2 i3` line per element.
    pub fn write_listing<W: Write>(&self, mut w: W) -> Result<()> {
        for (i, p) in self.nodes.iter().enumerate() {
            writeln!(w, "{i} {:.17e} {:.17e}", p.x, p.y)?;
        }
        for (s, el) in self.elements.iter().enumerate() {
            writeln!(w, "{s} {} {} {} {}", el[0], el[1], el[2], el[3])?;
        }
        Ok(())
    }
}

fn lattice_point(domain: &Square, n: usize, ix: usize, iy: usize) -> Point {
    Point::new(
        domain.origin.x + domain.side * ix as f64 / n as f64,
        domain.origin.y + domain.side * iy as f64 / n as f64,
    )
}

/// Deterministic per-lattice-site noise, uniform on `[-0.5, 0.5)^2`.
pub(crate) fn lattice_noise(seed: u64, ix: u64, iy: u64) -> Point {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((ix << 32) | (iy & 0xffff_ffff));
    let a: f64 = rng.random_range(-0.5..0.5);
    let b: f64 = rng.random_range(-0.5..0.5);
    Point::new(a, b)
}

fn build_patches(node_count: usize, elements: &[[usize; 4]]) -> Vec<Vec<usize>> {
    let mut patches = vec![Vec::new(); node_count];
    for (e, el) in elements.iter().enumerate() {
        for &i in el {
            patches[i].push(e);
        }
    }
    patches
}

/// Classification of a node of the crack mesh by its local enrichment space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CrackNodeClass {
    /// Outside both enrichment sets: linear polynomials only.
    Regular,
    /// In the tip square but not touching the crack.
    SingularSquare,
    /// Node of an element cut by the crack (includes the tip element).
    CutNeighborhood,
}

/// Mesh of `[-1, 1]^2` with a straight slit along `{y = 0, -1 <= x <= 0}`
/// ending at the tip `O = (0, 0)`.
#[derive(Clone, Debug)]
pub struct CrackMesh {
    mesh: Mesh,
    radius: f64,
    tip: Point,
    tip_element: usize,
    tip_nodes: [usize; 4],
    cut_elements: Vec<usize>,
    cut_neighborhood: Vec<usize>,
    singular_square: Vec<usize>,
    in_cut_neighborhood: Vec<bool>,
    in_singular_square: Vec<bool>,
    is_tip_node: Vec<bool>,
    is_cut: Vec<bool>,
}

impl CrackMesh {
    /// `n x n` elements with `n` odd, so that no element edge runs along
    /// the crack and the tip sits at the centre of an element.
    pub fn new(n: usize, radius: f64) -> Result<Self> {
        if n.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "crack mesh needs an odd number of divisions, got {n}"
            )));
        }
        if n < 5 {
            return Err(Error::InvalidParameter(format!("crack mesh needs n >= 5, got {n}")));
        }
        if !(radius > 0.0 && radius < 1.0) {
            return Err(Error::InvalidParameter(format!("enrichment radius must lie in (0, 1), got {radius}")));
        }
        let mesh = Mesh::uniform(n, Square::centered(1.0))?;
        let tip = Point::zeros();

        let bbox = |e: usize| {
            let c = mesh.element(e).map(|i| mesh.node(i));
            (c[0].x, c[2].x, c[0].y, c[2].y)
        };
        let mut is_cut = vec![false; mesh.element_count()];
        let mut cut_elements = Vec::new();
        let mut tip_element = None;
        for e in 0..mesh.element_count() {
            let (x0, x1, y0, y1) = bbox(e);
            if y0 < 0.0 && y1 > 0.0 && x0 < 0.0 {
                is_cut[e] = true;
                cut_elements.push(e);
                if x1 > 0.0 {
                    tip_element = Some(e);
                }
            }
        }
        let tip_element =
            tip_element.ok_or_else(|| Error::Invariant("crack tip is not inside any element".into()))?;
        let tip_nodes = mesh.element(tip_element);

        let nn = mesh.node_count();
        let mut in_cut_neighborhood = vec![false; nn];
        for &e in &cut_elements {
            for i in mesh.element(e) {
                in_cut_neighborhood[i] = true;
            }
        }
        let mut in_singular_square = vec![false; nn];
        for (i, p) in mesh.nodes().iter().enumerate() {
            if (p.x - tip.x).abs() <= radius && (p.y - tip.y).abs() <= radius {
                in_singular_square[i] = true;
            }
        }
        let mut is_tip_node = vec![false; nn];
        for i in tip_nodes {
            is_tip_node[i] = true;
        }
        let collect = |flags: &[bool]| flags.iter().enumerate().filter(|(_, &f)| f).map(|(i, _)| i).collect();
        Ok(Self {
            cut_neighborhood: collect(&in_cut_neighborhood),
            singular_square: collect(&in_singular_square),
            mesh,
            radius,
            tip,
            tip_element,
            tip_nodes,
            cut_elements,
            in_cut_neighborhood,
            in_singular_square,
            is_tip_node,
            is_cut,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn tip(&self) -> Point {
        self.tip
    }

    /// Unit normal to the crack line.
    pub fn normal(&self) -> Vector2<f64> {
        Vector2::new(0.0, 1.0)
    }

    /// Unit tangent to the crack line, pointing away from the slit.
    pub fn tangent(&self) -> Vector2<f64> {
        Vector2::new(1.0, 0.0)
    }

    pub fn tip_element(&self) -> usize {
        self.tip_element
    }

    /// Nodes of the element containing the tip.
    pub fn tip_nodes(&self) -> [usize; 4] {
        self.tip_nodes
    }

    pub fn cut_elements(&self) -> &[usize] {
        &self.cut_elements
    }

    pub fn is_cut(&self, e: usize) -> bool {
        self.is_cut[e]
    }

    /// Nodes of elements intersected by the crack, ascending.
    pub fn cut_neighborhood(&self) -> &[usize] {
        &self.cut_neighborhood
    }

    /// Nodes inside the closed square of half-side `radius` around the tip, ascending.
    pub fn singular_square(&self) -> &[usize] {
        &self.singular_square
    }

    pub fn in_cut_neighborhood(&self, i: usize) -> bool {
        self.in_cut_neighborhood[i]
    }

    pub fn in_singular_square(&self, i: usize) -> bool {
        self.in_singular_square[i]
    }

    pub fn is_tip_node(&self, i: usize) -> bool {
        self.is_tip_node[i]
    }

    pub fn node_class(&self, i: usize) -> CrackNodeClass {
        if self.in_cut_neighborhood[i] {
            CrackNodeClass::CutNeighborhood
        } else if self.in_singular_square[i] {
            CrackNodeClass::SingularSquare
        } else {
            CrackNodeClass::Regular
        }
    }

    /// True for points on the closed slit.
    pub fn on_crack(&self, x: &Point) -> bool {
        x.y == self.tip.y && x.x <= self.tip.x && x.x >= -1.0
    }

    /// The tip element and its (up to eight) lattice neighbours.
    pub fn near_tip_elements(&self) -> Vec<usize> {
        let (tx, ty) = self.mesh.element_lattice(self.tip_element);
        let n = self.mesh.divisions() as isize;
        let mut out = Vec::with_capacity(9);
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                let (ex, ey) = (tx as isize + dx, ty as isize + dy);
                if ex >= 0 && ey >= 0 && ex < n && ey < n {
                    out.push(self.mesh.element_index(ex as usize, ey as usize));
                }
            }
        }
        out
    }
}
