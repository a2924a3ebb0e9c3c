//! Least-squares condensation of a GFEM space onto one shape function per node.
//!
//! For every node `i` the local space `V_i` is fitted to nodal values on a
//! unisolvent node set `X_i`. The fit is linear in the data, so it defines
//! local basis functions `xi_i^l(x) = Q_i(x)^T G_i^{-1} Q_i(x_l)`, one per
//! node `l` of `X_i`. Multiplying by the hat function `N_i` and regrouping
//! by `l` gives the condensed shape function
//! `psi_l = sum_{i : l in X_i} N_i xi_i^l`.
//!
//! Node sets start from the prescribed pattern (side neighbours, the patch,
//! or recursive element rings) and are grown one ring at a time until the
//! Gram matrix is positive definite with condition number at most
//! [`CONDITION_GATE`]. The number of extra rings is recorded per node.

use std::io::Write;

use nalgebra::{DMatrix, DVector, Vector2};
use rayon::prelude::*;

use crate::enrichment::{local_space_for_node, LocalEnrichmentSpace, LocalProblem};
use crate::error::{Error, Result};
use crate::mesh::{ElementPoint, Mesh, Point};
use crate::pu::{hat_corners, ValueGrad};

/// Largest accepted 2-norm condition number of a Gram matrix.
pub const CONDITION_GATE: f64 = 1e12;

/// Initial node-set pattern around a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SupportRule {
    /// The node and the nodes sharing an element side with it.
    SideNeighbors,
    /// All nodes of the elements around the node.
    Patch,
    /// The patch grown `rings` times by "all nodes of elements touching the set".
    Rings(u32),
}

impl SupportRule {
    pub fn for_problem(problem: LocalProblem<'_>) -> Self {
        match problem {
            LocalProblem::Smooth { degree: 1 } => SupportRule::SideNeighbors,
            LocalProblem::Smooth { degree: 2 } => SupportRule::Patch,
            LocalProblem::Smooth { degree } => SupportRule::Rings(degree.saturating_sub(2)),
            LocalProblem::Crack(_) => SupportRule::Patch,
        }
    }
}

/// Grows a node set by the nodes of every element touching it. Sorted output.
pub fn expand_node_set<P, E>(set: &[usize], patch_of: P, nodes_of: E) -> Vec<usize>
where
    P: Fn(usize) -> Vec<usize>,
    E: Fn(usize) -> Vec<usize>,
{
    let mut out: Vec<usize> = set
        .iter()
        .flat_map(|&j| patch_of(j))
        .flat_map(nodes_of)
        .chain(set.iter().copied())
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

fn expand_on_mesh(mesh: &Mesh, set: &[usize]) -> Vec<usize> {
    expand_node_set(set, |j| mesh.patch(j).to_vec(), |e| mesh.element(e).to_vec())
}

/// The pattern-prescribed node set of node `i`, before any gating.
pub fn initial_node_set(mesh: &Mesh, i: usize, rule: SupportRule) -> Vec<usize> {
    let mut set = match rule {
        SupportRule::SideNeighbors => {
            let mut s = mesh.side_neighbors(i);
            s.push(i);
            s
        }
        SupportRule::Patch | SupportRule::Rings(_) => {
            mesh.patch(i).iter().flat_map(|&e| mesh.element(e)).collect()
        }
    };
    set.sort_unstable();
    set.dedup();
    if let SupportRule::Rings(r) = rule {
        for _ in 0..r {
            set = expand_on_mesh(mesh, &set);
        }
    }
    set
}

/// Gram matrix of a local basis sampled at a node set, with its Cholesky
/// factor and spectral data.
#[derive(Clone, Debug)]
pub struct GramFit {
    pub gram: DMatrix<f64>,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub condition: f64,
    cholesky: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
}

impl GramFit {
    pub fn is_positive_definite(&self) -> bool {
        self.cholesky.is_some() && self.min_eigenvalue > 0.0
    }

    pub fn passes_gate(&self) -> bool {
        self.is_positive_definite() && self.condition <= CONDITION_GATE
    }

    /// Solves `G x = b`.
    pub fn solve(&self, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        self.cholesky.as_ref().map(|c| c.solve(b))
    }
}

/// `G = sum_l Q(x_l) Q(x_l)^T` from a sample matrix whose row `l` is
/// `Q(x_l)^T`. Entries are summed in the same order for `(a, b)` and `(b, a)`,
/// so `G` is exactly symmetric.
pub fn gram_matrix(samples: &DMatrix<f64>) -> GramFit {
    let n = samples.ncols();
    let mut gram = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let mut s = 0.0;
            for l in 0..samples.nrows() {
                s += samples[(l, a)] * samples[(l, b)];
            }
            gram[(a, b)] = s;
            gram[(b, a)] = s;
        }
    }
    let eig = nalgebra::SymmetricEigen::new(gram.clone());
    let min_eigenvalue = eig.eigenvalues.min();
    let max_eigenvalue = eig.eigenvalues.max();
    let condition = if min_eigenvalue > 0.0 { max_eigenvalue / min_eigenvalue } else { f64::INFINITY };
    let cholesky = nalgebra::Cholesky::new(gram.clone());
    GramFit { gram, min_eigenvalue, max_eigenvalue, condition, cholesky }
}

/// The accepted least-squares fit of one node.
#[derive(Clone, Debug)]
pub struct NodeFit {
    pub space: LocalEnrichmentSpace,
    /// `X_i`, ascending node indices.
    pub support: Vec<usize>,
    /// Number of rings added beyond the prescribed pattern.
    pub expansion_depth: usize,
    pub gram: GramFit,
    /// `G_i^{-1} Q_i(x_l)` stored column-wise, one column per support node.
    pub coefficients: DMatrix<f64>,
}

impl NodeFit {
    pub fn node(&self) -> usize {
        self.space.node
    }

    pub fn position(&self, l: usize) -> Option<usize> {
        self.support.binary_search(&l).ok()
    }

    /// Values and gradients of `xi_i^l` for every `l` in the support, in support order.
    pub fn eval_all(&self, x: &Point, values: &mut [f64], grads: &mut [Vector2<f64>]) -> Result<()> {
        let n = self.space.dim();
        let mut q = [0.0; 16];
        let mut dq = [Vector2::zeros(); 16];
        self.space.eval_into(x, &mut q[..n], Some(&mut dq[..n]))?;
        for (col, (v, g)) in values.iter_mut().zip(grads.iter_mut()).enumerate() {
            let c = self.coefficients.column(col);
            let mut sv = 0.0;
            let mut sg = Vector2::zeros();
            for a in 0..n {
                sv += q[a] * c[a];
                sg += dq[a] * c[a];
            }
            *v = sv;
            *g = sg;
        }
        Ok(())
    }
}

/// `G^{-1} S^T` for the sample matrix `S`, computed as `R^{-1} Q^T` from a
/// thin QR factorization of `S` rather than through the normal equations.
pub fn least_squares_coefficients(samples: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let qr = samples.clone().qr();
    qr.r().solve_upper_triangular(&qr.q().transpose())
}

fn sample_matrix(mesh: &Mesh, space: &LocalEnrichmentSpace, nodes: &[usize]) -> Result<DMatrix<f64>> {
    let mut samples = DMatrix::zeros(nodes.len(), space.dim());
    let mut row = vec![0.0; space.dim()];
    for (r, &l) in nodes.iter().enumerate() {
        space.eval_into(&mesh.node(l), &mut row, None)?;
        for (c, v) in row.iter().enumerate() {
            samples[(r, c)] = *v;
        }
    }
    Ok(samples)
}

/// Builds `X_i` by the rule, then grows it until the Gram matrix passes the
/// conditioning gate.
pub fn unisolvent_set(mesh: &Mesh, space: &LocalEnrichmentSpace, rule: SupportRule) -> Result<NodeFit> {
    let i = space.node;
    let mut set = initial_node_set(mesh, i, rule);
    let mut depth = 0;
    loop {
        if set.len() >= space.dim() {
            let samples = sample_matrix(mesh, space, &set)?;
            let gram = gram_matrix(&samples);
            if gram.passes_gate() {
                let coefficients = least_squares_coefficients(&samples)
                    .ok_or_else(|| Error::Invariant(format!("sample matrix of node {i} is rank deficient")))?;
                return Ok(NodeFit { space: space.clone(), support: set, expansion_depth: depth, gram, coefficients });
            }
        }
        let grown = expand_on_mesh(mesh, &set);
        if grown.len() == set.len() {
            return Err(Error::Unisolvence {
                node: i,
                reason: format!("{} nodes after {depth} expansions do not determine a {}-dimensional space", set.len(), space.dim()),
            });
        }
        set = grown;
        depth += 1;
    }
}

/// `L_l = { i : l in X_i }` for every node `l`, each ascending.
pub fn invert_adjacency(supports: &[&[usize]], node_count: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); node_count];
    for (i, s) in supports.iter().enumerate() {
        for &l in s.iter() {
            out[l].push(i);
        }
    }
    out
}

/// All node fits of a mesh and the inverted adjacency.
#[derive(Clone, Debug)]
pub struct CondensedBasis {
    fits: Vec<NodeFit>,
    adjacency: Vec<Vec<usize>>,
}

impl CondensedBasis {
    /// Fits every node in parallel; the result does not depend on the thread count.
    pub fn build(mesh: &Mesh, problem: LocalProblem<'_>) -> Result<Self> {
        let rule = SupportRule::for_problem(problem);
        let fits = (0..mesh.node_count())
            .into_par_iter()
            .map(|i| {
                let space = local_space_for_node(mesh, problem, i)?;
                unisolvent_set(mesh, &space, rule)
            })
            .collect::<Result<Vec<_>>>()?;
        let supports: Vec<&[usize]> = fits.iter().map(|f| f.support.as_slice()).collect();
        let adjacency = invert_adjacency(&supports, mesh.node_count());
        Ok(Self { fits, adjacency })
    }

    pub fn node_count(&self) -> usize {
        self.fits.len()
    }

    pub fn fit(&self, i: usize) -> &NodeFit {
        &self.fits[i]
    }

    pub fn fits(&self) -> &[NodeFit] {
        &self.fits
    }

    /// `X_i`
    pub fn support(&self, i: usize) -> &[usize] {
        &self.fits[i].support
    }

    /// `L_l`
    pub fn adjacency(&self, l: usize) -> &[usize] {
        &self.adjacency[l]
    }

    /// `max_i |X_i|`
    pub fn overlap_cap(&self) -> usize {
        self.fits.iter().map(|f| f.support.len()).max().unwrap_or(0)
    }

    /// `xi_i^l` at a physical point.
    pub fn ls_basis_eval(&self, i: usize, l: usize, x: &Point) -> Result<ValueGrad> {
        let fit = &self.fits[i];
        let col = fit.position(l).ok_or(Error::NotInSupport { i, l })?;
        let n = fit.space.dim();
        let mut q = vec![0.0; n];
        let mut dq = vec![Vector2::zeros(); n];
        fit.space.eval_into(x, &mut q, Some(&mut dq))?;
        let c = fit.coefficients.column(col);
        let value = DVector::from_vec(q).dot(&c);
        let grad = dq.iter().zip(c.iter()).map(|(g, w)| g * *w).sum();
        Ok((value, grad))
    }

    /// `psi_l` at a point of a known element.
    pub fn condensed_shape_eval(&self, mesh: &Mesh, l: usize, pt: &ElementPoint) -> Result<ValueGrad> {
        let hats = hat_corners(pt);
        let mut value = 0.0;
        let mut grad = Vector2::zeros();
        for (a, &i) in mesh.element(pt.element).iter().enumerate() {
            if self.fits[i].position(l).is_none() {
                continue;
            }
            let (xv, xg) = self.ls_basis_eval(i, l, &pt.physical)?;
            let (nv, ng) = hats[a];
            value += nv * xv;
            grad += ng * xv + xg * nv;
        }
        Ok((value, grad))
    }

    /// Largest `|xi_i^l|` and `h |grad xi_i^l|` over the patches, sampled on
    /// a `samples x samples` grid of reference points per element.
    pub fn regularity(&self, mesh: &Mesh, samples: usize) -> Result<(f64, f64)> {
        let h = mesh.h();
        let per_node: Vec<(f64, f64)> = (0..self.fits.len())
            .into_par_iter()
            .map(|i| {
                let fit = &self.fits[i];
                let m = fit.support.len();
                let mut vals = vec![0.0; m];
                let mut grads = vec![Vector2::zeros(); m];
                let (mut vmax, mut gmax) = (0.0f64, 0.0f64);
                for &e in mesh.patch(i) {
                    for a in 0..samples {
                        for b in 0..samples {
                            let t = |k: usize| -1.0 + 2.0 * (k as f64 + 0.5) / samples as f64;
                            let pt = mesh.element_point(e, Point::new(t(a), t(b)));
                            fit.eval_all(&pt.physical, &mut vals, &mut grads)?;
                            for (v, g) in vals.iter().zip(&grads) {
                                vmax = vmax.max(v.abs());
                                gmax = gmax.max(g.norm() * h);
                            }
                        }
                    }
                }
                Ok((vmax, gmax))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(per_node.into_iter().fold((0.0f64, 0.0f64), |acc, (v, g)| (acc.0.max(v), acc.1.max(g))))
    }

    /// Per-node diagnostics as CSV: `node,support_size,expansion_depth,condition`.
    pub fn write_diagnostics<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "node,support_size,expansion_depth,condition")?;
        for f in &self.fits {
            writeln!(w, "{},{},{},{:.6e}", f.node(), f.support.len(), f.expansion_depth, f.gram.condition)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enrichment::monomial_exponents;
    use crate::mesh::{CrackMesh, Square};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn one_d_samples(offsets: &[f64], k: u32) -> DMatrix<f64> {
        DMatrix::from_fn(offsets.len(), k as usize + 1, |r, c| offsets[r].powi(c as i32))
    }

    #[test]
    fn one_d_gram() {
        let g = gram_matrix(&one_d_samples(&[-1.0, 0.0, 1.0], 1));
        assert_eq!(g.gram, DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 2.0]));
        assert!(g.passes_gate());
    }

    #[test]
    fn one_d_ls_basis() {
        let samples = one_d_samples(&[-1.0, 0.0, 1.0], 1);
        let g = gram_matrix(&samples);
        let coeffs = g.solve(&samples.transpose()).unwrap();
        // xi^l(t) = 1/3 + (t_l / 2) t
        for (col, tl) in [-1.0, 0.0, 1.0].iter().enumerate() {
            assert_relative_eq!(coeffs[(0, col)], 1.0 / 3.0, epsilon = 1e-15);
            assert_relative_eq!(coeffs[(1, col)], tl / 2.0, epsilon = 1e-15);
        }
        // psi_l(x_l) on a uniform 1D mesh with k = 1: only N_l is nonzero at
        // x_l, and xi_l^l(x_l) = 1/3
        let psi_at_own_node = 1.0 * coeffs[(0, 1)];
        assert_relative_eq!(psi_at_own_node, 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn one_d_ring_expansion() {
        // 1D line mesh with 9 nodes; elements are segments (e, e + 1)
        let patch = |j: usize| {
            let mut p = Vec::new();
            if j > 0 {
                p.push(j - 1);
            }
            if j < 8 {
                p.push(j);
            }
            p
        };
        let nodes = |e: usize| vec![e, e + 1];
        let k2 = expand_node_set(&[4], patch, nodes);
        assert_eq!(k2, vec![3, 4, 5]);
        let k3 = expand_node_set(&k2, patch, nodes);
        assert_eq!(k3, vec![2, 3, 4, 5, 6]);
    }

    #[test]
    fn duplicate_rows_keep_gram_semidefinite() {
        let g = gram_matrix(&one_d_samples(&[0.0, 0.0], 1));
        assert!(!g.passes_gate());
        assert!(g.min_eigenvalue >= -1e-15);
        assert_eq!(g.gram, g.gram.transpose());
    }

    #[test]
    fn interior_support_sizes() {
        let m = Mesh::uniform(8, Square::unit()).unwrap();
        let i = m.node_index(4, 4);
        for (k, expect) in [(1, 5), (2, 9), (3, 25)] {
            let b = CondensedBasis::build(&m, LocalProblem::Smooth { degree: k }).unwrap();
            assert_eq!(b.support(i).len(), expect);
            assert_eq!(b.fit(i).expansion_depth, 0);
        }
    }

    #[test]
    fn corner_patches_are_expanded() {
        let m = Mesh::uniform(8, Square::unit()).unwrap();
        let b = CondensedBasis::build(&m, LocalProblem::Smooth { degree: 2 }).unwrap();
        assert_eq!(b.support(0).len(), 9);
        assert_eq!(b.fit(0).expansion_depth, 1);
        assert!(b.fits().iter().all(|f| f.gram.passes_gate()));
    }

    #[test]
    fn adjacency_is_exact_inverse() {
        let m = Mesh::uniform(4, Square::unit()).unwrap();
        let b = CondensedBasis::build(&m, LocalProblem::Smooth { degree: 2 }).unwrap();
        for i in 0..m.node_count() {
            for l in 0..m.node_count() {
                assert_eq!(b.adjacency(l).contains(&i), b.support(i).contains(&l));
            }
        }
        let m = Mesh::uniform(8, Square::unit()).unwrap();
        let b = CondensedBasis::build(&m, LocalProblem::Smooth { degree: 2 }).unwrap();
        assert_eq!(b.adjacency(m.node_index(4, 4)).len(), 9);
        // the corner node is in the plain patches of its three neighbours
        // and in the expanded sets of the corner and both edge nodes next to it
        let corner: Vec<usize> = b.adjacency(0).to_vec();
        let expect: Vec<usize> = {
            let mut v: Vec<usize> = (0..m.node_count()).filter(|&i| b.support(i).contains(&0)).collect();
            v.sort_unstable();
            v
        };
        assert_eq!(corner, expect);
        for &(ix, iy) in &[(0, 0), (1, 0), (0, 1), (1, 1)] {
            assert!(corner.contains(&m.node_index(ix, iy)));
        }
    }

    #[test]
    fn ls_basis_errors_outside_support() {
        let m = Mesh::uniform(8, Square::unit()).unwrap();
        let b = CondensedBasis::build(&m, LocalProblem::Smooth { degree: 1 }).unwrap();
        let far = m.node_index(8, 8);
        assert!(matches!(b.ls_basis_eval(0, far, &Point::zeros()), Err(Error::NotInSupport { .. })));
    }

    #[test]
    fn reproduction_on_patch() {
        let m = Mesh::perturbed(8, Square::unit(), 0.1, 3).unwrap();
        let b = CondensedBasis::build(&m, LocalProblem::Smooth { degree: 1 }).unwrap();
        let i = m.node_index(3, 5);
        let xi = m.node(i);
        let h = m.h();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let e = m.patch(i)[rng.random_range(0..4)];
            let pt = m.element_point(e, Point::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let mut s = 0.0;
            let mut ones = 0.0;
            for &l in b.support(i) {
                let (v, _) = b.ls_basis_eval(i, l, &pt.physical).unwrap();
                s += (m.node(l).x - xi.x) / h * v;
                ones += v;
            }
            assert!((s - (pt.physical.x - xi.x) / h).abs() <= 1e-10);
            assert!((ones - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn crack_supports_pass_gate() {
        let crack = CrackMesh::new(9, 0.25).unwrap();
        let b = CondensedBasis::build(crack.mesh(), LocalProblem::Crack(&crack)).unwrap();
        for f in b.fits() {
            assert!(f.gram.passes_gate());
        }
        let mut buf = Vec::new();
        b.write_diagnostics(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), crack.mesh().node_count() + 1);
    }

    #[test]
    fn gram_eigenvalue_is_mesh_independent_inside() {
        let mut prev = None;
        for n in [8, 16, 32, 64] {
            let m = Mesh::uniform(n, Square::unit()).unwrap();
            let i = m.node_index(n / 2, n / 2);
            let space = crate::enrichment::monomial_basis(i, 2, m.node(i), m.h()).unwrap();
            let fit = unisolvent_set(&m, &space, SupportRule::Patch).unwrap();
            if let Some(p) = prev {
                let r: f64 = fit.gram.min_eigenvalue / p;
                assert!((0.8..=1.25).contains(&r));
            }
            prev = Some(fit.gram.min_eigenvalue);
            assert_eq!(monomial_exponents(2).len(), fit.space.dim());
        }
    }
}
