//! Stiffness and load assembly for the Neumann Poisson problem.
//!
//! Element matrices are computed in parallel and merged into the global
//! matrix in element order, so the result does not depend on the number of
//! worker threads. Each element matrix is formed on its upper triangle and
//! mirrored, which makes the global matrix bit-for-bit symmetric.

use nalgebra::{DMatrix, DVector, Vector2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::mesh::CrackMesh;
use crate::problems::Problem;
use crate::quadrature::{edge_rule, QuadratureRule, QuadratureSettings};
use crate::spaces::ApproximationSpace;

const CHUNK: usize = 512;

fn in_element(e: usize, err: Error) -> Error {
    match err {
        Error::SingularPoint => Error::Invariant(format!("shape function evaluated at the crack tip in element {e}")),
        other => other,
    }
}

/// Sparsity pattern: row `m` holds every DOF sharing an element with `m`.
pub fn sparsity_pattern(space: &ApproximationSpace) -> Vec<Vec<usize>> {
    let n = space.dof_count();
    let mut elements_of = vec![Vec::new(); n];
    for e in 0..space.mesh().element_count() {
        for &d in space.element_dofs(e) {
            elements_of[d].push(e);
        }
    }
    elements_of
        .into_par_iter()
        .map(|els| {
            let mut row: Vec<usize> = els.iter().flat_map(|&e| space.element_dofs(e).iter().copied()).collect();
            row.sort_unstable();
            row.dedup();
            row
        })
        .collect()
}

/// `K_e[a][b] = sum_q w_q grad phi_a . grad phi_b`
pub fn element_stiffness(space: &ApproximationSpace, rule: &QuadratureRule) -> Result<DMatrix<f64>> {
    let e = rule.element;
    let m = space.element_dofs(e).len();
    let mut k = DMatrix::zeros(m, m);
    let mut values = Vec::with_capacity(m);
    let mut grads = Vec::with_capacity(m);
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let pt = space.element_point(e, *p);
        space.eval(&pt, &mut values, &mut grads).map_err(|err| in_element(e, err))?;
        let wq = w * pt.det;
        for b in 0..m {
            let gb = grads[b] * wq;
            for a in 0..=b {
                k[(a, b)] += grads[a].dot(&gb);
            }
        }
    }
    for b in 0..m {
        for a in 0..b {
            k[(b, a)] = k[(a, b)];
        }
    }
    Ok(k)
}

/// Global stiffness matrix.
pub fn assemble_stiffness(space: &ApproximationSpace, rules: &[QuadratureRule]) -> Result<CsrMatrix> {
    let mut a = CsrMatrix::from_pattern(sparsity_pattern(space));
    for chunk in rules.chunks(CHUNK) {
        let locals = chunk.par_iter().map(|r| element_stiffness(space, r)).collect::<Result<Vec<_>>>()?;
        for (rule, k) in chunk.iter().zip(locals) {
            let dofs = space.element_dofs(rule.element);
            let positions: Vec<Vec<usize>> =
                dofs.iter().map(|&r| dofs.iter().map(|&c| a.position(r, c).unwrap()).collect()).collect();
            let values = a.values_mut();
            for (ra, pos) in positions.iter().enumerate() {
                for (cb, &p) in pos.iter().enumerate() {
                    values[p] += k[(ra, cb)];
                }
            }
        }
    }
    Ok(a)
}

/// `b[m] = int f phi_m + int_boundary g phi_m`
pub fn assemble_load(
    space: &ApproximationSpace,
    problem: &dyn Problem,
    rules: &[QuadratureRule],
    crack: Option<&CrackMesh>,
    settings: &QuadratureSettings,
) -> Result<DVector<f64>> {
    let mut b = DVector::zeros(space.dof_count());
    let volume = rules
        .par_iter()
        .map(|rule| {
            let e = rule.element;
            let m = space.element_dofs(e).len();
            let mut local = vec![0.0; m];
            let mut values = Vec::with_capacity(m);
            let mut grads = Vec::with_capacity(m);
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let pt = space.element_point(e, *p);
                let f = problem.source(&pt.physical);
                if f == 0.0 {
                    continue;
                }
                space.eval(&pt, &mut values, &mut grads).map_err(|err| in_element(e, err))?;
                for (l, v) in local.iter_mut().zip(&values) {
                    *l += w * pt.det * f * v;
                }
            }
            Ok(local)
        })
        .collect::<Result<Vec<_>>>()?;
    for (rule, local) in rules.iter().zip(volume) {
        for (&d, v) in space.element_dofs(rule.element).iter().zip(local) {
            b[d] += v;
        }
    }
    let q = (space.degree() as usize + 2).max(if crack.is_some() { settings.crack_order } else { 0 });
    let edges = space.mesh().boundary_edges();
    let boundary = edges
        .par_iter()
        .map(|edge| {
            let e = edge.element;
            let m = space.element_dofs(e).len();
            let mut local = vec![0.0; m];
            let mut values = Vec::with_capacity(m);
            let mut grads = Vec::with_capacity(m);
            for (t, w) in edge_rule(space, crack, edge, q) {
                let (xi, tangent_ref) = edge.reference_point(t);
                let pt = space.element_point(e, xi);
                let tangent = pt.jacobian * tangent_ref;
                let ds = tangent.norm();
                let normal = Vector2::new(tangent.y, -tangent.x) / ds;
                let g = problem.flux(&pt.physical, &normal)?;
                space.eval(&pt, &mut values, &mut grads).map_err(|err| in_element(e, err))?;
                for (l, v) in local.iter_mut().zip(&values) {
                    *l += w * ds * g * v;
                }
            }
            Ok(local)
        })
        .collect::<Result<Vec<_>>>()?;
    for (edge, local) in edges.iter().zip(boundary) {
        for (&d, v) in space.element_dofs(edge.element).iter().zip(local) {
            b[d] += v;
        }
    }
    Ok(b)
}
