//! Full-order solves `A^μ u = f^μ`, norms, and exact discrete stability
//! constants.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::{AffineProblem, CsrMatrix, Error, ParameterPoint, Result};

/// Relative algebraic residual every truth solve must reach.
pub const SOLVE_TOLERANCE: f64 = 1e-12;

/// Residual truth solves aim for once [`SOLVE_TOLERANCE`] is met. The
/// output `fᵀu` inherits the algebraic error to first order, so validation
/// of output errors near `1e-6` needs more than the required digits.
pub const SOLVE_TARGET: f64 = 1e-15;

/// Largest system the dense generalized eigensolve accepts.
pub const DENSE_EIGEN_LIMIT: usize = 5000;

const MAX_RESTARTS: usize = 8;

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: DVector<f64>,
    pub iterations: usize,
    /// True relative residual `‖b - A x‖₂ / ‖b‖₂`.
    pub residual: f64,
    /// `‖b - A x‖₂ / ‖|A| |x|‖₂`, the scale at which rounding `x` to
    /// binary64 already leaves a residual of order machine epsilon.
    pub backward_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CgFailure {
    NonPositivePivot { index: usize, value: f64 },
    NonPositiveCurvature { value: f64, iteration: usize },
    Stalled { residual: f64, iterations: usize },
}

impl CgFailure {
    pub fn into_error(self, mu: &[f64]) -> Error {
        let mu = mu.to_vec();
        match self {
            CgFailure::NonPositivePivot { index, value } => Error::SolverBreakdown {
                mu,
                detail: format!("non-positive diagonal pivot A[{index},{index}] = {value:e}"),
            },
            CgFailure::NonPositiveCurvature { value, iteration } => Error::SolverBreakdown {
                mu,
                detail: format!("non-positive curvature p^T A p = {value:e} at iteration {iteration}"),
            },
            CgFailure::Stalled { residual, iterations } => Error::NotConverged { mu, residual, iterations },
        }
    }
}

/// Jacobi-preconditioned conjugate gradients on an SPD matrix, iterating
/// until the true relative residual is at most `tol`. At most `10·n`
/// iterations are spent in total.
///
/// For strongly varying coefficients `‖|A||x|‖` can exceed `‖b‖` by orders
/// of magnitude, and even the correctly rounded solution then misses `tol`
/// relative to `‖b‖`. Once restarts stop making progress, a solve whose
/// residual is below `tol · ‖|A||x|‖` is accepted as well.
pub fn pcg(a: &CsrMatrix, b: &DVector<f64>, tol: f64) -> core::result::Result<CgOutcome, CgFailure> {
    pcg_refined(a, b, tol, tol)
}

/// [`pcg`] that keeps restarting towards `target < tol` for as long as each
/// restart still halves the true residual. Fails only if `tol` is missed.
pub fn pcg_refined(a: &CsrMatrix, b: &DVector<f64>, tol: f64, target: f64) -> core::result::Result<CgOutcome, CgFailure> {
    let target = target.min(tol);
    let n = a.nrows();
    let b_norm = b.norm();
    if b_norm == 0.0 {
        return Ok(CgOutcome {
            x: DVector::zeros(n),
            iterations: 0,
            residual: 0.0,
            backward_error: 0.0,
        });
    }
    let diag = a.diagonal();
    if let Some((index, &value)) = diag.iter().enumerate().find(|(_, d)| !(**d > 0.0)) {
        return Err(CgFailure::NonPositivePivot { index, value });
    }
    let inv_diag: Vec<f64> = diag.iter().map(|d| 1.0 / d).collect();
    let budget = 10 * n.max(1);

    let mut x = DVector::zeros(n);
    let mut r = b.clone();
    let mut ap = DVector::zeros(n);
    let mut iterations = 0;
    let mut residual = 1.0;
    let mut best: Option<CgOutcome> = None;
    for _ in 0..=MAX_RESTARTS {
        let goal = 0.1 * target * b_norm;
        let mut z = r.component_mul(&DVector::from_column_slice(&inv_diag));
        let mut p = z.clone();
        let mut rz = r.dot(&z);
        while r.norm() > goal && iterations < budget {
            a.mul_into(p.as_slice(), ap.as_mut_slice());
            let curvature = p.dot(&ap);
            if !(curvature > 0.0) {
                return Err(CgFailure::NonPositiveCurvature {
                    value: curvature,
                    iteration: iterations,
                });
            }
            let alpha = rz / curvature;
            x.axpy(alpha, &p, 1.0);
            r.axpy(-alpha, &ap, 1.0);
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            let rz_next = r.dot(&z);
            let beta = rz_next / rz;
            rz = rz_next;
            p *= beta;
            p += &z;
            iterations += 1;
        }
        // replace the recursive residual by the true one
        a.mul_into(x.as_slice(), ap.as_mut_slice());
        r = b - &ap;
        let r_norm = r.norm();
        residual = r_norm / b_norm;
        let backward_error = r_norm / abs_product_norm(a, &x);
        let stalled = best.as_ref().is_some_and(|b| residual > 0.5 * b.residual);
        if best.as_ref().is_none_or(|b| residual < b.residual) {
            best = Some(CgOutcome {
                x: x.clone(),
                iterations,
                residual,
                backward_error,
            });
        }
        let best_ok = best.as_ref().is_some_and(|b| b.residual <= tol || b.backward_error <= tol);
        if residual <= target || iterations >= budget || (stalled && best_ok) {
            break;
        }
    }
    match best {
        Some(mut b) if b.residual <= tol || b.backward_error <= tol => {
            b.iterations = iterations;
            Ok(b)
        }
        _ => Err(CgFailure::Stalled { residual, iterations }),
    }
}

/// `‖|A| |x|‖₂`
fn abs_product_norm(a: &CsrMatrix, x: &DVector<f64>) -> f64 {
    let mut sum = 0.0;
    for i in 0..a.nrows() {
        let row: f64 = a.row(i).map(|(j, v)| (v * x[j]).abs()).sum();
        sum += row * row;
    }
    libm::sqrt(sum)
}

#[derive(Debug, Clone)]
pub struct TruthSolution {
    pub mu: ParameterPoint,
    pub u: DVector<f64>,
    /// Compliant output `s = uᵀ f^μ`.
    pub s: f64,
    pub solve_residual: f64,
    pub iterations: usize,
}

pub fn solve_fom(problem: &AffineProblem, mu: &ParameterPoint) -> Result<TruthSolution> {
    let (theta_a, theta_f) = problem.eval_thetas(mu)?;
    let a = problem.operator_for(&theta_a);
    let f = problem.load_for(&theta_f);
    let out = pcg_refined(&a, &f, SOLVE_TOLERANCE, SOLVE_TARGET).map_err(|e| e.into_error(mu.values()))?;
    Ok(TruthSolution {
        mu: mu.clone(),
        s: out.x.dot(&f),
        u: out.x,
        solve_residual: out.residual,
        iterations: out.iterations,
    })
}

/// Solves with the inner-product matrix (Riesz maps and oracles).
pub fn solve_x(problem: &AffineProblem, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    pcg_refined(problem.x(), rhs, SOLVE_TOLERANCE, SOLVE_TARGET)
        .map(|o| o.x)
        .map_err(|e| e.into_error(problem.mu_bar().values()))
}

fn checked_sqrt(value: f64, scale: f64) -> Result<f64> {
    if value < -1e-14 * scale {
        return Err(Error::NegativeForm { value });
    }
    Ok(libm::sqrt(value.max(0.0)))
}

/// `‖u‖_V = (uᵀ X u)^{1/2}`
pub fn v_norm(problem: &AffineProblem, u: &DVector<f64>) -> Result<f64> {
    check_len(problem, u)?;
    let q = problem.x().quad_form(u);
    checked_sqrt(q, problem.x().max_abs() * u.norm_squared())
}

/// Energy norm `‖u‖_μ = (uᵀ A^μ u)^{1/2}`.
pub fn mu_norm(problem: &AffineProblem, u: &DVector<f64>, mu: &ParameterPoint) -> Result<f64> {
    check_len(problem, u)?;
    let a = problem.operator(mu)?;
    let q = a.quad_form(u);
    checked_sqrt(q, a.max_abs() * u.norm_squared())
}

fn check_len(problem: &AffineProblem, u: &DVector<f64>) -> Result<()> {
    if u.len() != problem.dim() {
        return Err(Error::Dimension(format!(
            "vector of length {} for a problem of dimension {}",
            u.len(),
            problem.dim()
        )));
    }
    Ok(())
}

/// Extreme generalized eigenvalues of `(A^μ, X)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityConstants {
    pub alpha_delta: f64,
    pub gamma_delta: f64,
}

/// Dense oracle for the generalized symmetric eigenproblem `A^μ v = λ X v`.
///
/// With `X = L Lᵀ`, every block is transformed once into `C_q = L⁻¹ A_q L⁻ᵀ`;
/// each parameter then costs one dense symmetric eigenvalue solve of
/// `Σ θ_a^q(μ) C_q`.
#[derive(Debug, Clone)]
pub struct GeneralizedEigenOracle {
    transformed: Vec<DMatrix<f64>>,
}

impl GeneralizedEigenOracle {
    pub fn new(problem: &AffineProblem) -> Result<Self> {
        let n = problem.dim();
        if n > DENSE_EIGEN_LIMIT {
            return Err(Error::TooLarge {
                dim: n,
                limit: DENSE_EIGEN_LIMIT,
            });
        }
        let chol = problem.x().to_dense().cholesky().ok_or(Error::NegativeForm { value: f64::NAN })?;
        let l = chol.l();
        let transformed = problem
            .a_blocks()
            .iter()
            .map(|a| {
                let m = l.solve_lower_triangular(&a.to_dense()).expect("nonsingular factor");
                let c = l.solve_lower_triangular(&m.transpose()).expect("nonsingular factor");
                (&c + c.transpose()) * 0.5
            })
            .collect();
        Ok(Self { transformed })
    }

    pub fn constants_for(&self, theta_a: &[f64]) -> StabilityConstants {
        let mut c = self.transformed[0].clone() * theta_a[0];
        for (t, cq) in theta_a.iter().zip(&self.transformed).skip(1) {
            c.zip_apply(cq, |a, b| *a += t * b);
        }
        let eig = c.symmetric_eigenvalues();
        StabilityConstants {
            alpha_delta: eig.min(),
            gamma_delta: eig.max(),
        }
    }

    pub fn constants(&self, problem: &AffineProblem, mu: &ParameterPoint) -> Result<StabilityConstants> {
        Ok(self.constants_for(&problem.eval_thetas(mu)?.0))
    }
}

/// One-shot version of [`GeneralizedEigenOracle`]; prefer the oracle when
/// many parameters are audited against the same problem.
pub fn stability_constants(problem: &AffineProblem, mu: &ParameterPoint) -> Result<StabilityConstants> {
    GeneralizedEigenOracle::new(problem)?.constants(problem, mu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::make_thermal_block;
    use alloc::vec;

    #[test]
    fn analytic_outputs_on_single_block() {
        for n in [1, 3, 8] {
            let pb = make_thermal_block(n, 1, 0.1, 10.0).unwrap();
            let sol = solve_fom(&pb, &ParameterPoint(vec![1.0])).unwrap();
            assert!((sol.s - 1.0).abs() < 1e-10, "n = {n}: {}", sol.s);
            assert!(sol.solve_residual <= SOLVE_TOLERANCE);
            let sol = solve_fom(&pb, &ParameterPoint(vec![4.0])).unwrap();
            assert!((sol.s - 0.25).abs() < 1e-10);
            let sol = solve_fom(&pb, &ParameterPoint(vec![2.0])).unwrap();
            assert!((sol.s - 0.5).abs() < 1e-10);
        }
    }

    #[test]
    fn reproduces_affine_solution_nodewise() {
        let n = 8;
        let pb = make_thermal_block(n, 1, 0.1, 10.0).unwrap();
        let sol = solve_fom(&pb, &ParameterPoint(vec![1.0])).unwrap();
        // free dofs are the nodes below the top row, row-major
        for (dof, u) in sol.u.iter().enumerate() {
            let y = (dof / (n + 1)) as f64 / n as f64;
            assert!((u - (1.0 - y)).abs() < 1e-10);
        }
    }

    #[test]
    fn norms() {
        let pb = make_thermal_block(4, 2, 0.1, 10.0).unwrap();
        let zero = DVector::zeros(pb.dim());
        assert_eq!(v_norm(&pb, &zero).unwrap(), 0.0);
        for k in 0..50 {
            let u = DVector::from_fn(pb.dim(), |i, _| libm::sin((i * 7 + k * 13) as f64));
            let a = v_norm(&pb, &u).unwrap();
            let b = mu_norm(&pb, &u, pb.mu_bar()).unwrap();
            assert!((a - b).abs() <= 1e-14 * a);
        }
        assert!(v_norm(&pb, &DVector::zeros(3)).is_err());
    }

    #[test]
    fn breakdown_names_mu() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, -1.0)]).unwrap();
        let err = pcg(&a, &DVector::from_vec(vec![1.0, 1.0]), 1e-12).unwrap_err();
        assert_eq!(err, CgFailure::NonPositivePivot { index: 1, value: -1.0 });
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]).unwrap();
        let err = pcg(&a, &DVector::from_vec(vec![1.0, -1.0]), 1e-12).unwrap_err();
        assert!(matches!(err, CgFailure::NonPositiveCurvature { .. }));
        let msg = alloc::format!("{}", err.into_error(&[0.5, 2.0]));
        assert!(msg.contains("0.5") && msg.contains("curvature"));
    }

    #[test]
    fn constants_at_reference_and_scaled() {
        let pb = make_thermal_block(6, 1, 0.1, 10.0).unwrap();
        let oracle = GeneralizedEigenOracle::new(&pb).unwrap();
        let c = oracle.constants(&pb, pb.mu_bar()).unwrap();
        assert!((c.alpha_delta - 1.0).abs() < 1e-10 && (c.gamma_delta - 1.0).abs() < 1e-10);
        let c = oracle.constants(&pb, &ParameterPoint(vec![3.5])).unwrap();
        assert!((c.alpha_delta - 3.5).abs() < 1e-9 && (c.gamma_delta - 3.5).abs() < 1e-9);
    }

    #[test]
    fn min_max_theta_sandwich() {
        let pb = make_thermal_block(8, 2, 0.1, 10.0).unwrap();
        let c = stability_constants(&pb, &ParameterPoint(vec![0.5, 2.0, 1.0, 1.0])).unwrap();
        assert!(c.alpha_delta >= 0.5 * (1.0 - 1e-12));
        assert!(c.gamma_delta <= 2.0 * (1.0 + 1e-12));
        assert!(c.alpha_delta < c.gamma_delta);
    }
}
