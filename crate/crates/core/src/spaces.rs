//! Approximation spaces: DOF tables and element-wise shape function evaluation.
//!
//! Every space hands out, for a point inside element `e`, the values and
//! physical gradients of exactly the DOFs listed in [`ApproximationSpace::element_dofs`],
//! in that order. Geometry is bilinear except for FEM of degree `k > 1`, which
//! maps elements isoparametrically through its own degree-`k` node lattice.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{DVector, Matrix2, Vector2};

use crate::condensation::CondensedBasis;
use crate::enrichment::{monomial_basis, CrackTip, EnrichmentFunction, LocalEnrichmentSpace, LocalProblem};
use crate::error::{Error, Result};
use crate::mesh::{lattice_noise, CrackMesh, ElementPoint, Mesh, MeshKind, Point};
use crate::pu::{hat_corners, FlatTop, ValueGrad};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Fem,
    FtGfem,
    Sgfem,
    Cgfem,
    CrackGfem,
}

impl Method {
    pub const SMOOTH: [Method; 4] = [Method::Fem, Method::FtGfem, Method::Sgfem, Method::Cgfem];
    pub const CRACK: [Method; 3] = [Method::Fem, Method::CrackGfem, Method::Cgfem];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Fem => "fem",
            Method::FtGfem => "ftgfem",
            Method::Sgfem => "sgfem",
            Method::Cgfem => "cgfem",
            Method::CrackGfem => "crack_gfem",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fem" => Ok(Method::Fem),
            "ftgfem" | "ft_gfem" | "ft-gfem" => Ok(Method::FtGfem),
            "sgfem" => Ok(Method::Sgfem),
            "cgfem" => Ok(Method::Cgfem),
            "crack_gfem" | "crack-gfem" | "gfem" => Ok(Method::CrackGfem),
            other => Err(Error::InvalidParameter(format!("unknown method '{other}'"))),
        }
    }
}

/// Which partition of unity a DOF is built on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PuFactor {
    Lagrange,
    Hat,
    FlatTop,
    Condensed,
}

/// The local factor multiplying the PU function of a DOF.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocalFactor {
    /// Degree-`k` Lagrange function of fine lattice site `(gx, gy)`.
    Lagrange { gx: usize, gy: usize },
    One,
    Monomial { px: u32, py: u32 },
    /// `P - I_h P` for the monomial `P`.
    Corrected { px: u32, py: u32 },
    Heaviside,
    SingularHalf,
    /// `psi_l` as a whole.
    Condensed,
}

/// Shape-table entry. For Lagrange DOFs `node` is the fine lattice index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DofInfo {
    pub pu: PuFactor,
    pub local: LocalFactor,
    pub node: usize,
}

#[derive(Clone, Debug)]
enum Geometry {
    Bilinear,
    Lagrange { order: usize, stride: usize, nodes: Vec<Point> },
}

#[derive(Clone, Debug)]
enum Kind {
    Lagrange {
        order: usize,
    },
    /// Node blocks `[Q_i P_i^alpha]`.
    FlatTop {
        pu: FlatTop,
        local: Vec<LocalEnrichmentSpace>,
    },
    /// Node blocks `[N_i, Q_i (P - I_h P) for |alpha| >= 2]`.
    Stable {
        pu: FlatTop,
        local: Vec<LocalEnrichmentSpace>,
    },
    /// Node blocks `[N_i, N_i H?, N_i S?]`.
    CrackGfem {
        tip: CrackTip,
        heaviside: Vec<bool>,
        singular: Vec<bool>,
    },
    Condensed {
        basis: CondensedBasis,
        /// For element `e` and corner `a`, the position in `element_dofs(e)`
        /// of every support node of that corner.
        slots: Vec<[Vec<usize>; 4]>,
    },
}

/// A finite-dimensional trial space over a quadrilateral mesh.
#[derive(Clone, Debug)]
pub struct ApproximationSpace {
    method: Method,
    degree: u32,
    mesh: Mesh,
    geometry: Geometry,
    kind: Kind,
    element_dofs: Vec<Vec<usize>>,
    dofs: Vec<DofInfo>,
    constant: DVector<f64>,
}

/// Values and derivatives of the equispaced 1D Lagrange basis of degree `k` on `[-1, 1]`.
pub fn lagrange_1d(k: usize, t: f64) -> ([f64; 4], [f64; 4]) {
    let mut v = [0.0; 4];
    let mut d = [0.0; 4];
    let node = |a: usize| -1.0 + 2.0 * a as f64 / k as f64;
    for a in 0..=k {
        let mut value = 1.0;
        let mut deriv = 0.0;
        for b in 0..=k {
            if b == a {
                continue;
            }
            let denom = node(a) - node(b);
            let factor = (t - node(b)) / denom;
            deriv = deriv * factor + value / denom;
            value *= factor;
        }
        v[a] = value;
        d[a] = deriv;
    }
    (v, d)
}

fn geometry_seed(seed: u64, k: usize) -> u64 {
    seed.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(k as u64))
}

impl ApproximationSpace {
    /// Tensor-product Lagrange elements of degree `k` with equispaced nodes,
    /// `(kN + 1)^2` DOFs.
    ///
    /// On a perturbed mesh the geometry is isoparametric of the same degree:
    /// the fine lattice sites that are not mesh vertices are perturbed like
    /// the vertices, scaled by the fine spacing `h / k` (boundary sites stay
    /// on the straight sides).
    pub fn fem(mesh: &Mesh, k: u32) -> Result<Self> {
        if !(1..=3).contains(&k) {
            return Err(Error::InvalidParameter(format!("FEM degree must be 1, 2 or 3, got {k}")));
        }
        let order = k as usize;
        let n = mesh.divisions();
        let stride = order * n + 1;
        let geometry = if order == 1 {
            Geometry::Bilinear
        } else {
            let domain = mesh.domain();
            let mut nodes = Vec::with_capacity(stride * stride);
            for gy in 0..stride {
                for gx in 0..stride {
                    let p = domain.origin
                        + Point::new(gx as f64, gy as f64) * (domain.side / (stride - 1) as f64);
                    let vertex = gx % order == 0 && gy % order == 0;
                    let interior = gx > 0 && gy > 0 && gx + 1 < stride && gy + 1 < stride;
                    let q = if vertex {
                        mesh.node(mesh.node_index(gx / order, gy / order))
                    } else if let (true, MeshKind::Perturbed { magnitude, seed }) = (interior, mesh.kind()) {
                        p + lattice_noise(geometry_seed(seed, order), gx as u64, gy as u64) * (magnitude * mesh.h() / order as f64)
                    } else {
                        p
                    };
                    nodes.push(q);
                }
            }
            Geometry::Lagrange { order, stride, nodes }
        };
        let mut element_dofs = Vec::with_capacity(mesh.element_count());
        for e in 0..mesh.element_count() {
            let (ex, ey) = mesh.element_lattice(e);
            let mut d = Vec::with_capacity((order + 1) * (order + 1));
            for b in 0..=order {
                for a in 0..=order {
                    d.push((order * ey + b) * stride + order * ex + a);
                }
            }
            element_dofs.push(d);
        }
        let dofs = (0..stride * stride)
            .map(|g| DofInfo { pu: PuFactor::Lagrange, local: LocalFactor::Lagrange { gx: g % stride, gy: g / stride }, node: g })
            .collect();
        let space = Self {
            method: Method::Fem,
            degree: k,
            mesh: mesh.clone(),
            geometry,
            kind: Kind::Lagrange { order },
            element_dofs,
            dofs,
            constant: DVector::from_element(stride * stride, 1.0),
        };
        space.check_geometry()?;
        Ok(space)
    }

    /// Flat-top PU times the scaled monomials of degree `<= k` at every node.
    pub fn ftgfem(mesh: &Mesh, k: u32, pu: FlatTop) -> Result<Self> {
        let local = (0..mesh.node_count())
            .map(|i| monomial_basis(i, k, mesh.node(i), mesh.h()))
            .collect::<Result<Vec<_>>>()?;
        let mut dofs = Vec::new();
        let mut offsets = Vec::with_capacity(mesh.node_count() + 1);
        let mut constant = Vec::new();
        for sp in &local {
            offsets.push(dofs.len());
            for f in &sp.functions {
                if let EnrichmentFunction::Monomial { px, py } = *f {
                    dofs.push(DofInfo { pu: PuFactor::FlatTop, local: LocalFactor::Monomial { px, py }, node: sp.node });
                    constant.push(if px + py == 0 { 1.0 } else { 0.0 });
                }
            }
        }
        offsets.push(dofs.len());
        let element_dofs = block_element_dofs(mesh, &offsets);
        Ok(Self {
            method: Method::FtGfem,
            degree: k,
            mesh: mesh.clone(),
            geometry: Geometry::Bilinear,
            kind: Kind::FlatTop { pu, local },
            element_dofs,
            dofs,
            constant: DVector::from_vec(constant),
        })
    }

    /// Hat functions plus flat-top PU times `P - I_h P` for the monomials of
    /// degree 2 to `k`. For `k = 1` this is bilinear FEM. On meshes of
    /// axis-aligned rectangles `I_h` reproduces `xy`, so that monomial is
    /// left out there as well.
    pub fn sgfem(mesh: &Mesh, k: u32, pu: FlatTop) -> Result<Self> {
        let rectangular = mesh.is_rectangular();
        let mut local = Vec::with_capacity(mesh.node_count());
        for i in 0..mesh.node_count() {
            let mut sp = monomial_basis(i, k, mesh.node(i), mesh.h())?;
            sp.functions.retain(|f| {
                matches!(f, EnrichmentFunction::Monomial { px, py }
                    if px + py >= 2 && !(rectangular && *px <= 1 && *py <= 1))
            });
            local.push(sp);
        }
        let mut dofs = Vec::new();
        let mut offsets = Vec::with_capacity(mesh.node_count() + 1);
        let mut constant = Vec::new();
        for sp in &local {
            offsets.push(dofs.len());
            dofs.push(DofInfo { pu: PuFactor::Hat, local: LocalFactor::One, node: sp.node });
            constant.push(1.0);
            for f in &sp.functions {
                if let EnrichmentFunction::Monomial { px, py } = *f {
                    dofs.push(DofInfo { pu: PuFactor::FlatTop, local: LocalFactor::Corrected { px, py }, node: sp.node });
                    constant.push(0.0);
                }
            }
        }
        offsets.push(dofs.len());
        let element_dofs = block_element_dofs(mesh, &offsets);
        Ok(Self {
            method: Method::Sgfem,
            degree: k,
            mesh: mesh.clone(),
            geometry: Geometry::Bilinear,
            kind: Kind::Stable { pu, local },
            element_dofs,
            dofs,
            constant: DVector::from_vec(constant),
        })
    }

    /// One condensed shape function per node.
    pub fn cgfem(mesh: &Mesh, basis: CondensedBasis, degree: u32) -> Result<Self> {
        if basis.node_count() != mesh.node_count() {
            return Err(Error::InvalidParameter(format!(
                "condensed basis has {} nodes, mesh has {}",
                basis.node_count(),
                mesh.node_count()
            )));
        }
        let mut element_dofs = Vec::with_capacity(mesh.element_count());
        let mut slots = Vec::with_capacity(mesh.element_count());
        for e in 0..mesh.element_count() {
            let corners = mesh.element(e);
            let mut d: Vec<usize> = corners.iter().flat_map(|&i| basis.support(i).iter().copied()).collect();
            d.sort_unstable();
            d.dedup();
            let s: [Vec<usize>; 4] = std::array::from_fn(|a| {
                basis.support(corners[a]).iter().map(|l| d.binary_search(l).unwrap()).collect()
            });
            element_dofs.push(d);
            slots.push(s);
        }
        let n = mesh.node_count();
        let dofs = (0..n).map(|l| DofInfo { pu: PuFactor::Condensed, local: LocalFactor::Condensed, node: l }).collect();
        Ok(Self {
            method: Method::Cgfem,
            degree,
            mesh: mesh.clone(),
            geometry: Geometry::Bilinear,
            kind: Kind::Condensed { basis, slots },
            element_dofs,
            dofs,
            constant: DVector::from_element(n, 1.0),
        })
    }

    /// Builds the condensed basis with `P_k` local spaces and wraps it.
    pub fn cgfem_smooth(mesh: &Mesh, k: u32) -> Result<Self> {
        let basis = CondensedBasis::build(mesh, LocalProblem::Smooth { degree: k })?;
        Self::cgfem(mesh, basis, k)
    }

    /// Condensed space with the crack local spaces.
    pub fn crack_cgfem(crack: &CrackMesh) -> Result<Self> {
        let basis = CondensedBasis::build(crack.mesh(), LocalProblem::Crack(crack))?;
        Self::cgfem(crack.mesh(), basis, 1)
    }

    /// Hat functions, plus `N_i H` on nodes of cut elements away from the tip
    /// element, plus `N_i S` on the nodes of the tip square.
    pub fn crack_gfem(crack: &CrackMesh) -> Result<Self> {
        let mesh = crack.mesh();
        let nn = mesh.node_count();
        let heaviside: Vec<bool> = (0..nn).map(|i| crack.in_cut_neighborhood(i) && !crack.is_tip_node(i)).collect();
        let singular: Vec<bool> = (0..nn).map(|i| crack.in_singular_square(i)).collect();
        let mut dofs = Vec::new();
        let mut offsets = Vec::with_capacity(nn + 1);
        let mut constant = Vec::new();
        for i in 0..nn {
            offsets.push(dofs.len());
            dofs.push(DofInfo { pu: PuFactor::Hat, local: LocalFactor::One, node: i });
            constant.push(1.0);
            if heaviside[i] {
                dofs.push(DofInfo { pu: PuFactor::Hat, local: LocalFactor::Heaviside, node: i });
                constant.push(0.0);
            }
            if singular[i] {
                dofs.push(DofInfo { pu: PuFactor::Hat, local: LocalFactor::SingularHalf, node: i });
                constant.push(0.0);
            }
        }
        offsets.push(dofs.len());
        let element_dofs = block_element_dofs(mesh, &offsets);
        Ok(Self {
            method: Method::CrackGfem,
            degree: 1,
            mesh: mesh.clone(),
            geometry: Geometry::Bilinear,
            kind: Kind::CrackGfem { tip: CrackTip::of(crack), heaviside, singular },
            element_dofs,
            dofs,
            constant: DVector::from_vec(constant),
        })
    }

    /// Dispatches on the method for the smooth problem.
    pub fn smooth(method: Method, mesh: &Mesh, k: u32, pu: FlatTop) -> Result<Self> {
        match method {
            Method::Fem => Self::fem(mesh, k),
            Method::FtGfem => Self::ftgfem(mesh, k, pu),
            Method::Sgfem => Self::sgfem(mesh, k, pu),
            Method::Cgfem => Self::cgfem_smooth(mesh, k),
            Method::CrackGfem => Err(Error::InvalidParameter("crack_gfem needs the crack problem".into())),
        }
    }

    /// Dispatches on the method for the crack problem (degree 1).
    pub fn for_crack(method: Method, crack: &CrackMesh) -> Result<Self> {
        match method {
            Method::Fem => Self::fem(crack.mesh(), 1),
            Method::CrackGfem => Self::crack_gfem(crack),
            Method::Cgfem => Self::crack_cgfem(crack),
            m => Err(Error::InvalidParameter(format!("{m} is not available for the crack problem"))),
        }
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn dof_count(&self) -> usize {
        self.dofs.len()
    }

    pub fn dof_info(&self, d: usize) -> DofInfo {
        self.dofs[d]
    }

    pub fn element_dofs(&self, e: usize) -> &[usize] {
        &self.element_dofs[e]
    }

    pub fn max_element_dofs(&self) -> usize {
        self.element_dofs.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Coefficients of the constant function 1.
    pub fn constant_vector(&self) -> &DVector<f64> {
        &self.constant
    }

    /// Reference breakpoints of the flat-top PU, if the space uses one.
    pub fn flat_top(&self) -> Option<FlatTop> {
        match &self.kind {
            Kind::FlatTop { pu, .. } | Kind::Stable { pu, .. } => Some(*pu),
            _ => None,
        }
    }

    pub fn condensed_basis(&self) -> Option<&CondensedBasis> {
        match &self.kind {
            Kind::Condensed { basis, .. } => Some(basis),
            _ => None,
        }
    }

    /// Whether elements are mapped by a polynomial of degree `> 1`.
    pub fn is_high_order_geometry(&self) -> bool {
        matches!(self.geometry, Geometry::Lagrange { .. })
    }

    /// Maps reference point `xi` of element `e` through the space geometry.
    pub fn element_point(&self, e: usize, xi: Point) -> ElementPoint {
        match &self.geometry {
            Geometry::Bilinear => self.mesh.element_point(e, xi),
            Geometry::Lagrange { order, stride, nodes } => {
                let (ex, ey) = self.mesh.element_lattice(e);
                let (vx, dx) = lagrange_1d(*order, xi.x);
                let (vy, dy) = lagrange_1d(*order, xi.y);
                let mut x = Point::zeros();
                let mut jac = Matrix2::zeros();
                for b in 0..=*order {
                    for a in 0..=*order {
                        let p = nodes[(order * ey + b) * stride + order * ex + a];
                        x += p * (vx[a] * vy[b]);
                        jac += p * Vector2::new(dx[a] * vy[b], vx[a] * dy[b]).transpose();
                    }
                }
                ElementPoint::new(e, xi, x, jac)
            }
        }
    }

    fn check_geometry(&self) -> Result<()> {
        if !self.is_high_order_geometry() {
            return Ok(());
        }
        let samples = 7;
        for e in 0..self.mesh.element_count() {
            for a in 0..samples {
                for b in 0..samples {
                    let t = |k: usize| -1.0 + 2.0 * k as f64 / (samples - 1) as f64;
                    let pt = self.element_point(e, Point::new(t(a), t(b)));
                    if !(pt.det > 0.0) {
                        return Err(Error::DegenerateMesh { element: e, det: pt.det });
                    }
                }
            }
        }
        Ok(())
    }

    /// Values and physical gradients of the DOFs of `pt.element`, in
    /// [`element_dofs`](Self::element_dofs) order.
    pub fn eval(&self, pt: &ElementPoint, values: &mut Vec<f64>, grads: &mut Vec<Vector2<f64>>) -> Result<()> {
        let e = pt.element;
        let m = self.element_dofs[e].len();
        values.clear();
        values.resize(m, 0.0);
        grads.clear();
        grads.resize(m, Vector2::zeros());
        let corners = self.mesh.element(e);
        match &self.kind {
            Kind::Lagrange { order } => {
                let (vx, dx) = lagrange_1d(*order, pt.reference.x);
                let (vy, dy) = lagrange_1d(*order, pt.reference.y);
                let mut s = 0;
                for b in 0..=*order {
                    for a in 0..=*order {
                        values[s] = vx[a] * vy[b];
                        grads[s] = pt.physical_gradient(Vector2::new(dx[a] * vy[b], vx[a] * dy[b]));
                        s += 1;
                    }
                }
            }
            Kind::FlatTop { pu, local } => {
                let q = pu.corners(pt);
                let mut s = 0;
                for (a, &i) in corners.iter().enumerate() {
                    let sp = &local[i];
                    let n = sp.dim();
                    sp.eval_into(&pt.physical, &mut values[s..s + n], Some(&mut grads[s..s + n]))?;
                    let (qv, qg) = q[a];
                    for j in s..s + n {
                        grads[j] = qg * values[j] + grads[j] * qv;
                        values[j] *= qv;
                    }
                    s += n;
                }
            }
            Kind::Stable { pu, local } => {
                let hats = hat_corners(pt);
                let q = pu.corners(pt);
                let mut s = 0;
                let mut buf = [0.0; 16];
                let mut node_vals = [[0.0; 16]; 4];
                for (a, &i) in corners.iter().enumerate() {
                    values[s] = hats[a].0;
                    grads[s] = hats[a].1;
                    s += 1;
                    let sp = &local[i];
                    let n = sp.dim();
                    if n == 0 {
                        continue;
                    }
                    sp.eval_into(&pt.physical, &mut values[s..s + n], Some(&mut grads[s..s + n]))?;
                    for (b, &j) in corners.iter().enumerate() {
                        sp.eval_into(&self.mesh.node(j), &mut buf[..n], None)?;
                        node_vals[b][..n].copy_from_slice(&buf[..n]);
                    }
                    let (qv, qg) = q[a];
                    for f in 0..n {
                        let mut iv = 0.0;
                        let mut ig = Vector2::zeros();
                        for b in 0..4 {
                            iv += hats[b].0 * node_vals[b][f];
                            ig += hats[b].1 * node_vals[b][f];
                        }
                        let v = values[s + f] - iv;
                        let g = grads[s + f] - ig;
                        values[s + f] = qv * v;
                        grads[s + f] = qg * v + g * qv;
                    }
                    s += n;
                }
            }
            Kind::CrackGfem { tip, heaviside, singular } => {
                let hats = hat_corners(pt);
                let need_s = corners.iter().any(|&i| singular[i]);
                let sing = if need_s { Some(tip.singular_term(&pt.physical, 0.5)?) } else { None };
                let hv = tip.heaviside(&pt.physical);
                let mut s = 0;
                for (a, &i) in corners.iter().enumerate() {
                    let (nv, ng) = hats[a];
                    values[s] = nv;
                    grads[s] = ng;
                    s += 1;
                    if heaviside[i] {
                        values[s] = nv * hv;
                        grads[s] = ng * hv;
                        s += 1;
                    }
                    if singular[i] {
                        let (sv, sg) = sing.unwrap();
                        values[s] = nv * sv;
                        grads[s] = ng * sv + sg * nv;
                        s += 1;
                    }
                }
            }
            Kind::Condensed { basis, slots } => {
                let hats = hat_corners(pt);
                let mut xv = [0.0; 64];
                let mut xg = [Vector2::zeros(); 64];
                for (a, &i) in corners.iter().enumerate() {
                    let fit = basis.fit(i);
                    let m = fit.support.len();
                    if m > xv.len() {
                        return Err(Error::Invariant(format!("node {i} has {m} support nodes, more than 64")));
                    }
                    fit.eval_all(&pt.physical, &mut xv[..m], &mut xg[..m])?;
                    let (nv, ng) = hats[a];
                    for (c, &slot) in slots[e][a].iter().enumerate() {
                        values[slot] += nv * xv[c];
                        grads[slot] += ng * xv[c] + xg[c] * nv;
                    }
                }
            }
        }
        Ok(())
    }

    /// Value and gradient of `sum_d coeffs[d] phi_d` at `pt`.
    pub fn eval_function(&self, coeffs: &[f64], pt: &ElementPoint) -> Result<ValueGrad> {
        let mut v = Vec::new();
        let mut g = Vec::new();
        self.eval(pt, &mut v, &mut g)?;
        let mut value = 0.0;
        let mut grad = Vector2::zeros();
        for (k, &d) in self.element_dofs[pt.element].iter().enumerate() {
            value += coeffs[d] * v[k];
            grad += g[k] * coeffs[d];
        }
        Ok((value, grad))
    }

    /// Value and gradient of one shape function; zero if it is inactive on `pt.element`.
    pub fn eval_dof(&self, d: usize, pt: &ElementPoint) -> Result<ValueGrad> {
        match self.element_dofs[pt.element].iter().position(|&x| x == d) {
            None => Ok((0.0, Vector2::zeros())),
            Some(k) => {
                let mut v = Vec::new();
                let mut g = Vec::new();
                self.eval(pt, &mut v, &mut g)?;
                Ok((v[k], g[k]))
            }
        }
    }

    /// `method,k,dof_count,max_element_dofs`
    pub fn summary_line(&self) -> String {
        format!("{},{},{},{}", self.method, self.degree, self.dof_count(), self.max_element_dofs())
    }

    pub fn write_summary<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "method,k,dof_count,max_element_dofs")?;
        writeln!(w, "{}", self.summary_line())?;
        Ok(())
    }
}

fn block_element_dofs(mesh: &Mesh, offsets: &[usize]) -> Vec<Vec<usize>> {
    (0..mesh.element_count())
        .map(|e| mesh.element(e).iter().flat_map(|&i| offsets[i]..offsets[i + 1]).collect())
        .collect()
}
