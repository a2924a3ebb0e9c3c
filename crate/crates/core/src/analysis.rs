//! Relative energy error, scaled condition number and convergence slopes.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{dense_eigenvalues, lanczos_max, project_out, CsrMatrix, SkylineCholesky};
use crate::problems::Problem;
use crate::quadrature::QuadratureRule;
use crate::spaces::ApproximationSpace;

/// Above this dimension the dense eigen-solve is not offered as a fallback.
pub const DENSE_LIMIT: usize = 3000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyError {
    /// `|u - u_h|_E`
    pub absolute: f64,
    /// `|u|_E`
    pub exact_norm: f64,
}

impl EnergyError {
    pub fn relative(&self) -> f64 {
        self.absolute / self.exact_norm
    }
}

/// Energy seminorm of `u - u_h` and of `u`, with the given (error-purpose) rules.
pub fn energy_error(
    space: &ApproximationSpace,
    coeffs: &[f64],
    problem: &dyn Problem,
    rules: &[QuadratureRule],
) -> Result<EnergyError> {
    let parts = rules
        .par_iter()
        .map(|rule| {
            let e = rule.element;
            let dofs = space.element_dofs(e);
            let mut values = Vec::new();
            let mut grads = Vec::new();
            let (mut err, mut norm) = (0.0, 0.0);
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let pt = space.element_point(e, *p);
                space.eval(&pt, &mut values, &mut grads)?;
                let gh = dofs.iter().zip(&grads).map(|(&d, g)| g * coeffs[d]).sum::<nalgebra::Vector2<f64>>();
                let gu = problem.exact_grad(&pt.physical)?;
                let wq = w * pt.det;
                err += wq * (gu - gh).norm_squared();
                norm += wq * gu.norm_squared();
            }
            Ok((err, norm))
        })
        .collect::<Result<Vec<_>>>()?;
    let (err, norm) = parts.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(EnergyError { absolute: err.sqrt(), exact_norm: norm.sqrt() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EigenPath {
    Lanczos,
    Dense,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScnReport {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub path: EigenPath,
}

impl ScnReport {
    pub fn scn(&self) -> f64 {
        self.lambda_max / self.lambda_min
    }
}

/// `D^{-1/2}` for the diagonal of `a`.
fn inverse_sqrt_diagonal(a: &CsrMatrix) -> Result<DVector<f64>> {
    let d = a.diagonal();
    if let Some(i) = d.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::Invariant(format!("diagonal entry {i} is not positive")));
    }
    Ok(d.map(|v| 1.0 / v.sqrt()))
}

/// Scaled null vector `D^{1/2} c`.
fn scaled_null(a: &CsrMatrix, null: &DVector<f64>) -> DVector<f64> {
    a.diagonal().zip_map(null, |d, c| d.sqrt() * c)
}

/// Dense eigenvalues of `D^{-1/2} A D^{-1/2}` on the complement of the
/// scaled null vector, via a Householder basis of that complement.
pub fn scaled_condition_number_dense(a: &CsrMatrix, null: Option<&DVector<f64>>) -> Result<ScnReport> {
    let n = a.dim();
    let s = a.scaled(&inverse_sqrt_diagonal(a)?).to_dense();
    let eig = match null {
        None => dense_eigenvalues(&s),
        Some(c) => {
            let z = scaled_null(a, c).normalize();
            // H z = -sign(z_0) e_0
            let v = if z[0] >= 0.0 {
                let mut v = z.clone();
                v[0] += 1.0;
                v
            } else {
                let mut v = z.clone();
                v[0] -= 1.0;
                v
            };
            let vv = v.dot(&v);
            let h = DMatrix::identity(n, n) - (&v * v.transpose()) * (2.0 / vv);
            let b = &h * s * &h;
            dense_eigenvalues(&b.view((1, 1), (n - 1, n - 1)).into_owned())
        }
    };
    let lambda_min = eig[0];
    let lambda_max = eig[eig.len() - 1];
    if !(lambda_min > 0.0) {
        return Err(Error::EigenFailure { lower: lambda_min, upper: lambda_max });
    }
    Ok(ScnReport { lambda_min, lambda_max, path: EigenPath::Dense })
}

fn remove_index(a: &CsrMatrix, p: usize) -> CsrMatrix {
    let n = a.dim();
    let shift = |j: usize| if j > p { j - 1 } else { j };
    let mut rows = Vec::with_capacity(n - 1);
    let mut vals = Vec::with_capacity(n - 1);
    for i in (0..n).filter(|&i| i != p) {
        let (cols, v) = a.row(i);
        let mut rc = Vec::with_capacity(cols.len());
        let mut rv = Vec::with_capacity(cols.len());
        for (&j, &x) in cols.iter().zip(v) {
            if j != p {
                rc.push(shift(j));
                rv.push(x);
            }
        }
        rows.push(rc);
        vals.push(rv);
    }
    let mut m = CsrMatrix::from_pattern(rows);
    let flat: Vec<f64> = vals.into_iter().flatten().collect();
    m.values_mut().copy_from_slice(&flat);
    m
}

/// `lambda_max / lambda_min` of the Jacobi-scaled matrix on the complement
/// of the scaled null vector.
///
/// `lambda_max` comes from Lanczos on the scaled operator. `lambda_min` is
/// the reciprocal of the largest eigenvalue of the pseudo-inverse, which is
/// applied by a profile Cholesky factorization of the scaled matrix with one
/// DOF removed followed by a projection onto the complement.
pub fn scaled_condition_number(a: &CsrMatrix, null: Option<&DVector<f64>>) -> Result<ScnReport> {
    let n = a.dim();
    let tol = 1e-8;
    let steps = 800;
    let s = a.scaled(&inverse_sqrt_diagonal(a)?);
    let z = null.map(|c| scaled_null(a, c));
    let zs = z.as_ref().map(|v| v.as_slice());
    let lambda_max = lanczos_max(n, |x, y| s.mul_vec_into(x, y), zs, tol, steps)?;
    let lambda_min = match &z {
        None => {
            let f = SkylineCholesky::factor_leading(&s, n)?;
            let inv = lanczos_max(
                n,
                |x, y| {
                    y.copy_from_slice(x);
                    f.solve_in_place(y);
                },
                None,
                tol,
                steps,
            )?;
            1.0 / inv
        }
        Some(z) => {
            let p = z.iter().enumerate().fold(0, |best, (i, v)| if v.abs() >= z[best].abs() { i } else { best });
            let reduced = remove_index(&s, p);
            let f = SkylineCholesky::factor_leading(&reduced, n - 1)?;
            let zs = z.as_slice();
            let inv = lanczos_max(
                n,
                |x, y| {
                    let mut b: Vec<f64> = x.to_vec();
                    project_out(&mut b, zs);
                    b.remove(p);
                    f.solve_in_place(&mut b);
                    b.insert(p, 0.0);
                    project_out(&mut b, zs);
                    y.copy_from_slice(&b);
                },
                Some(zs),
                tol,
                steps,
            )?;
            1.0 / inv
        }
    };
    Ok(ScnReport { lambda_min, lambda_max, path: EigenPath::Lanczos })
}

/// Least-squares slope of `log y` against `log h`.
pub fn convergence_slope(h: &[f64], y: &[f64]) -> Result<f64> {
    if h.len() != y.len() || h.len() < 2 {
        return Err(Error::DegenerateData(format!("need at least two (h, y) pairs, got {}", h.len().min(y.len()))));
    }
    if y.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::DegenerateData("exact".into()));
    }
    if h.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::DegenerateData("mesh sizes must be positive".into()));
    }
    let lx: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateData("mesh sizes are not distinct".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Slope over the `count` smallest mesh sizes.
pub fn finest_slope(points: &[(f64, f64)], count: usize) -> Result<f64> {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a.0.total_cmp(&b.0));
    p.truncate(count);
    let (h, y): (Vec<f64>, Vec<f64>) = p.into_iter().unzip();
    convergence_slope(&h, &y)
}
