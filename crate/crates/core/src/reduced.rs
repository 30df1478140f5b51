//! Offline Galerkin projection onto a reduced basis and the online solve,
//! whose cost depends on `N`, `Q_a` and `Q_f` only.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::problem::ParameterDomain;
use crate::sparse::{dot2, Dot2};
use crate::{AffineProblem, Error, ParameterPoint, ReducedBasis, Result, ThetaExpression};

/// Everything the online stage needs; nothing of the truth dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedModel {
    pub(crate) a_rb: Vec<DMatrix<f64>>,
    pub(crate) f_rb: Vec<DVector<f64>>,
    pub(crate) theta_a: Vec<ThetaExpression>,
    pub(crate) theta_f: Vec<ThetaExpression>,
    pub(crate) domain: ParameterDomain,
    pub(crate) mu_bar: ParameterPoint,
    pub(crate) theta_a_ref: Vec<f64>,
    pub(crate) parametrically_coercive: bool,
    pub(crate) problem_fingerprint: u64,
    /// Fingerprints of the nested sub-bases `ξ_1..ξ_k`, `k = 0..=N`.
    pub(crate) basis_fingerprints: Vec<u64>,
}

/// Online state stored or loaded without access to the problem; see
/// [`ReducedModel::from_parts`].
#[derive(Debug, Clone)]
pub struct ReducedModelParts {
    pub a_rb: Vec<DMatrix<f64>>,
    pub f_rb: Vec<DVector<f64>>,
    pub theta_a: Vec<ThetaExpression>,
    pub theta_f: Vec<ThetaExpression>,
    pub domain: ParameterDomain,
    pub mu_bar: ParameterPoint,
    pub parametrically_coercive: bool,
    pub problem_fingerprint: u64,
    pub basis_fingerprints: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RbSolution {
    pub mu: ParameterPoint,
    pub coefficients: DVector<f64>,
    /// `s_rb = u_rbᵀ f_rb^μ`
    pub s_rb: f64,
    pub theta_a: Vec<f64>,
    pub theta_f: Vec<f64>,
    pub out_of_domain: bool,
}

impl ReducedModel {
    pub fn empty(problem: &AffineProblem, basis: &ReducedBasis) -> Self {
        Self {
            a_rb: (0..problem.q_a()).map(|_| DMatrix::zeros(0, 0)).collect(),
            f_rb: (0..problem.q_f()).map(|_| DVector::zeros(0)).collect(),
            theta_a: problem.theta_a().to_vec(),
            theta_f: problem.theta_f().to_vec(),
            domain: problem.domain().clone(),
            mu_bar: problem.mu_bar().clone(),
            theta_a_ref: problem.theta_a_ref().to_vec(),
            parametrically_coercive: problem.is_parametrically_coercive(),
            problem_fingerprint: problem.fingerprint(),
            basis_fingerprints: alloc::vec![basis.prefix_fingerprint(0)],
        }
    }

    pub fn from_parts(parts: ReducedModelParts) -> Result<Self> {
        let n = parts
            .basis_fingerprints
            .len()
            .checked_sub(1)
            .ok_or_else(|| Error::Dimension("missing basis fingerprints".into()))?;
        if parts.a_rb.len() != parts.theta_a.len() || parts.f_rb.len() != parts.theta_f.len() {
            return Err(Error::Dimension("reduced blocks and coefficient functions disagree".into()));
        }
        if parts.a_rb.iter().any(|a| a.shape() != (n, n)) || parts.f_rb.iter().any(|f| f.len() != n) {
            return Err(Error::Dimension(alloc::format!("reduced blocks are not all of size N = {n}")));
        }
        let p = parts.domain.dim();
        for e in parts.theta_a.iter().chain(&parts.theta_f) {
            if let Some(index) = e.max_param_index().filter(|&i| i >= p) {
                return Err(Error::IndexOutOfBounds { index, p });
            }
        }
        let theta_a_ref = parts.theta_a.iter().map(|e| e.eval(parts.mu_bar.values())).collect();
        Ok(Self {
            a_rb: parts.a_rb,
            f_rb: parts.f_rb,
            theta_a: parts.theta_a,
            theta_f: parts.theta_f,
            domain: parts.domain,
            mu_bar: parts.mu_bar,
            theta_a_ref,
            parametrically_coercive: parts.parametrically_coercive,
            problem_fingerprint: parts.problem_fingerprint,
            basis_fingerprints: parts.basis_fingerprints,
        })
    }

    pub fn n(&self) -> usize {
        self.basis_fingerprints.len() - 1
    }

    pub fn q_a(&self) -> usize {
        self.a_rb.len()
    }

    pub fn q_f(&self) -> usize {
        self.f_rb.len()
    }

    pub fn p(&self) -> usize {
        self.domain.dim()
    }

    pub fn a_rb(&self) -> &[DMatrix<f64>] {
        &self.a_rb
    }

    pub fn f_rb(&self) -> &[DVector<f64>] {
        &self.f_rb
    }

    pub fn theta_a(&self) -> &[ThetaExpression] {
        &self.theta_a
    }

    pub fn theta_f(&self) -> &[ThetaExpression] {
        &self.theta_f
    }

    pub fn domain(&self) -> &ParameterDomain {
        &self.domain
    }

    pub fn mu_bar(&self) -> &ParameterPoint {
        &self.mu_bar
    }

    pub fn theta_a_ref(&self) -> &[f64] {
        &self.theta_a_ref
    }

    pub fn is_parametrically_coercive(&self) -> bool {
        self.parametrically_coercive
    }

    pub fn problem_fingerprint(&self) -> u64 {
        self.problem_fingerprint
    }

    pub fn basis_fingerprint(&self) -> u64 {
        *self.basis_fingerprints.last().expect("never empty")
    }

    pub fn basis_fingerprints(&self) -> &[u64] {
        &self.basis_fingerprints
    }

    /// The model of the nested sub-basis `ξ_1..ξ_n` (leading sub-matrices).
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.n());
        let mut out = self.clone();
        out.a_rb = self.a_rb.iter().map(|a| a.view((0, 0), (n, n)).into_owned()).collect();
        out.f_rb = self.f_rb.iter().map(|f| f.rows(0, n).into_owned()).collect();
        out.basis_fingerprints.truncate(n + 1);
        out
    }

    /// Evaluates the coefficient functions; non-finite values are errors.
    pub fn eval_thetas(&self, mu: &ParameterPoint) -> Result<(Vec<f64>, Vec<f64>)> {
        if mu.dim() != self.p() {
            return Err(Error::Dimension(alloc::format!(
                "parameter has {} components, model expects {}",
                mu.dim(),
                self.p()
            )));
        }
        let eval = |exprs: &[ThetaExpression], which| {
            exprs
                .iter()
                .enumerate()
                .map(|(index, e)| {
                    let value = e.eval(mu.values());
                    if value.is_finite() {
                        Ok(value)
                    } else {
                        Err(Error::Evaluation { which, index, value })
                    }
                })
                .collect::<Result<Vec<f64>>>()
        };
        Ok((eval(&self.theta_a, "theta_a")?, eval(&self.theta_f, "theta_f")?))
    }

    /// `A_rb^μ = Σ θ_a^q A_rb^q`
    pub fn assemble_matrix(&self, theta_a: &[f64]) -> DMatrix<f64> {
        let n = self.n();
        let mut a = DMatrix::zeros(n, n);
        for (t, aq) in theta_a.iter().zip(&self.a_rb) {
            a.zip_apply(aq, |x, y| *x += t * y);
        }
        a
    }

    /// `f_rb^μ = Σ θ_f^q f_rb^q`
    pub fn assemble_load(&self, theta_f: &[f64]) -> DVector<f64> {
        let mut f = DVector::zeros(self.n());
        for (t, fq) in theta_f.iter().zip(&self.f_rb) {
            f.axpy(*t, fq, 1.0);
        }
        f
    }
}

/// Builds the parameter-independent reduced blocks
/// `(A_rb^q)_{mn} = ξ_mᵀ A_q ξ_n`, `(f_rb^q)_i = ξ_iᵀ f_q`.
pub fn project(problem: &AffineProblem, basis: &ReducedBasis) -> Result<ReducedModel> {
    let mut model = ReducedModel::empty(problem, basis);
    for k in 0..basis.len() {
        model = extend_projection(&model, problem, &basis.truncated(k + 1))?;
    }
    Ok(model)
}

/// Appends one row and column per block for the last vector of `basis`.
/// The result is bitwise identical to [`project`] on the same basis.
pub fn extend_projection(model: &ReducedModel, problem: &AffineProblem, basis: &ReducedBasis) -> Result<ReducedModel> {
    let n = model.n();
    if model.problem_fingerprint != problem.fingerprint() {
        return Err(Error::Fingerprint {
            expected: model.problem_fingerprint,
            found: problem.fingerprint(),
        });
    }
    if basis.len() != n + 1 {
        return Err(Error::Dimension(alloc::format!(
            "extending a model of size {n} needs a basis of size {}, got {}",
            n + 1,
            basis.len()
        )));
    }
    if basis.prefix_fingerprint(n) != model.basis_fingerprint() {
        return Err(Error::Fingerprint {
            expected: model.basis_fingerprint(),
            found: basis.prefix_fingerprint(n),
        });
    }
    let new = basis.vector(n);
    let mut out = model.clone();
    for (q, a) in problem.a_blocks().iter().enumerate() {
        // compensated sums keep the Galerkin orthogonality of the reduced
        // solution, and with it the output identity, near full precision
        let a_new = a.mul_vec_compensated(new);
        let old = &model.a_rb[q];
        let mut grown = DMatrix::zeros(n + 1, n + 1);
        grown.view_mut((0, 0), (n, n)).copy_from(old);
        let diagonal = dot2(new.as_slice(), a_new.as_slice());
        let scale = old.amax().max(diagonal.abs());
        for m in 0..n {
            let xm = basis.vector(m);
            let upper = dot2(xm.as_slice(), a_new.as_slice()); // ξ_mᵀ A ξ_new
            let lower = dot2(new.as_slice(), a.mul_vec_compensated(xm).as_slice()); // ξ_newᵀ A ξ_m
            if (upper - lower).abs() > 1e-12 * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::Asymmetric {
                    index: q,
                    asymmetry: (upper - lower).abs(),
                    scale,
                });
            }
            let v = 0.5 * (upper + lower);
            grown[(m, n)] = v;
            grown[(n, m)] = v;
        }
        grown[(n, n)] = diagonal;
        out.a_rb[q] = grown;
    }
    for (q, f) in problem.f_blocks().iter().enumerate() {
        let mut grown = DVector::zeros(n + 1);
        grown.rows_mut(0, n).copy_from(&model.f_rb[q]);
        grown[n] = dot2(new.as_slice(), f.as_slice());
        out.f_rb[q] = grown;
    }
    out.basis_fingerprints.push(basis.prefix_fingerprint(n + 1));
    Ok(out)
}

const REFINEMENT_STEPS: usize = 2;

/// `f - A c` with each row accumulated in twice the working precision.
fn compensated_residual(a: &DMatrix<f64>, c: &DVector<f64>, f: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(f.len(), |i, _| {
        let mut acc = Dot2::new();
        acc.add_product(f[i], 1.0);
        for j in 0..c.len() {
            acc.add_product(-a[(i, j)], c[j]);
        }
        acc.value()
    })
}

/// Solves `A_rb^μ u_rb = f_rb^μ` by a dense Cholesky factorization (LU for
/// indefinite systems of non-coercive problems).
pub fn rb_solve(model: &ReducedModel, mu: &ParameterPoint) -> Result<RbSolution> {
    let (theta_a, theta_f) = model.eval_thetas(mu)?;
    let out_of_domain = !model.domain.contains(mu);
    if out_of_domain {
        log::warn!("mu = {mu} lies outside the parameter domain; extrapolating");
    }
    let a = model.assemble_matrix(&theta_a);
    let f = model.assemble_load(&theta_f);
    let coefficients = if model.n() == 0 {
        DVector::zeros(0)
    } else if let Some(chol) = a.clone().cholesky() {
        let mut c = chol.solve(&f);
        // the output inherits the solve error to first order
        for _ in 0..REFINEMENT_STEPS {
            let r = compensated_residual(&a, &c, &f);
            c += chol.solve(&r);
        }
        c
    } else {
        a.lu()
            .solve(&f)
            .filter(|c| c.iter().all(|v| v.is_finite()))
            .ok_or_else(|| Error::SingularReduced { theta: theta_a.clone() })?
    };
    let s_rb = coefficients.dot(&f);
    Ok(RbSolution {
        mu: mu.clone(),
        coefficients,
        s_rb,
        theta_a,
        theta_f,
        out_of_domain,
    })
}

/// `u_rb = Σ_i c_i ξ_i` in the truth space. Validation only.
pub fn lift(basis: &ReducedBasis, coefficients: &DVector<f64>) -> Result<DVector<f64>> {
    if coefficients.len() > basis.len() {
        return Err(Error::Dimension(alloc::format!(
            "{} coefficients for a basis of size {}",
            coefficients.len(),
            basis.len()
        )));
    }
    Ok(basis.lift(coefficients))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{make_thermal_block, SamplingStrategy};
    use crate::truth::solve_fom;
    use alloc::vec;

    fn greedy_like_basis(pb: &AffineProblem, count: usize) -> ReducedBasis {
        let mut b = ReducedBasis::empty(pb.fingerprint());
        for mu in pb.domain().sample(count, SamplingStrategy::Random, 5) {
            let u = solve_fom(pb, &mu).unwrap().u;
            b.try_extend(&u, pb.x()).unwrap().unwrap();
        }
        b
    }

    #[test]
    fn single_vector_blocks() {
        let pb = make_thermal_block(4, 1, 0.1, 10.0).unwrap();
        let b = greedy_like_basis(&pb, 1);
        let m = project(&pb, &b).unwrap();
        let xi = b.vector(0);
        let a0 = pb.a_blocks()[0].mul_vec(xi);
        assert!((m.a_rb()[0][(0, 0)] - xi.dot(&a0)).abs() <= 1e-14 * xi.dot(&a0).abs());
        assert!((m.f_rb()[0][0] - xi.dot(&pb.f_blocks()[0])).abs() <= 1e-14 * m.f_rb()[0][0].abs().max(1e-300));
        // A_1 = X here, so the block is the squared X-norm
        assert!((m.a_rb()[0][(0, 0)] - 1.0).abs() < 1e-12);
        let sol = rb_solve(&m, &ParameterPoint(vec![2.0])).unwrap();
        let expect = m.f_rb()[0][0] / (2.0 * m.a_rb()[0][(0, 0)]);
        assert!((sol.coefficients[0] - expect).abs() <= 1e-15 * expect.abs());
    }

    #[test]
    fn reference_parameter_gives_identity() {
        let pb = make_thermal_block(6, 2, 0.1, 10.0).unwrap();
        let b = greedy_like_basis(&pb, 5);
        let m = project(&pb, &b).unwrap();
        let a = m.assemble_matrix(pb.theta_a_ref());
        assert!((a - DMatrix::identity(5, 5)).amax() < 1e-10);
        for aq in m.a_rb() {
            assert!((aq - aq.transpose()).amax() <= 1e-12);
        }
    }

    #[test]
    fn extension_is_bitwise_identical_to_fresh_projection() {
        let pb = make_thermal_block(6, 2, 0.1, 10.0).unwrap();
        let b = greedy_like_basis(&pb, 3);
        let fresh = project(&pb, &b).unwrap();
        let mut grown = project(&pb, &b.truncated(0)).unwrap();
        for k in 1..=3 {
            grown = extend_projection(&grown, &pb, &b.truncated(k)).unwrap();
        }
        assert_eq!(grown, fresh);
        assert_eq!(fresh.truncated(2), project(&pb, &b.truncated(2)).unwrap());
    }

    #[test]
    fn extension_rejects_foreign_basis() {
        let pb = make_thermal_block(6, 2, 0.1, 10.0).unwrap();
        let b = greedy_like_basis(&pb, 2);
        let m = project(&pb, &b.truncated(1)).unwrap();
        let mut other = ReducedBasis::empty(pb.fingerprint());
        other.try_extend(b.vector(1), pb.x()).unwrap().unwrap();
        other.try_extend(b.vector(0), pb.x()).unwrap().unwrap();
        assert!(matches!(extend_projection(&m, &pb, &other), Err(Error::Fingerprint { .. })));
    }

    #[test]
    fn exact_manifold_on_single_block() {
        let pb = make_thermal_block(8, 1, 0.1, 10.0).unwrap();
        let mut b = ReducedBasis::empty(pb.fingerprint());
        b.try_extend(&solve_fom(&pb, pb.mu_bar()).unwrap().u, pb.x()).unwrap().unwrap();
        let m = project(&pb, &b).unwrap();
        for mu in pb.domain().sample(25, SamplingStrategy::Grid, 0) {
            let s = rb_solve(&m, &mu).unwrap().s_rb;
            assert!((s * mu.0[0] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn compliance_inequality_and_monotonicity() {
        let pb = make_thermal_block(6, 2, 0.1, 10.0).unwrap();
        let b = greedy_like_basis(&pb, 6);
        let full = project(&pb, &b).unwrap();
        for mu in pb.domain().sample(100, SamplingStrategy::Random, 77) {
            let s_delta = solve_fom(&pb, &mu).unwrap().s;
            let mut previous = f64::NEG_INFINITY;
            for n in 1..=6 {
                let s = rb_solve(&full.truncated(n), &mu).unwrap().s_rb;
                assert!(s_delta >= s - 1e-12);
                assert!(s >= previous - 1e-12);
                previous = s;
            }
        }
    }

    #[test]
    fn lift_roundtrip() {
        let pb = make_thermal_block(4, 2, 0.1, 10.0).unwrap();
        let b = greedy_like_basis(&pb, 3);
        let e1 = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        assert_eq!(lift(&b, &e1).unwrap(), b.vector(0).clone());
        let c = DVector::from_vec(vec![0.3, -1.2, 2.0]);
        let back = b.coefficients(&lift(&b, &c).unwrap());
        assert!((back - c).amax() < 1e-12);
        assert!(lift(&b, &DVector::zeros(4)).is_err());
    }

    #[test]
    fn out_of_domain_is_flagged_not_refused() {
        let pb = make_thermal_block(4, 1, 0.1, 10.0).unwrap();
        let b = greedy_like_basis(&pb, 1);
        let m = project(&pb, &b).unwrap();
        let sol = rb_solve(&m, &ParameterPoint(vec![50.0])).unwrap();
        assert!(sol.out_of_domain);
        assert!(!rb_solve(&m, &ParameterPoint(vec![5.0])).unwrap().out_of_domain);
        assert!(rb_solve(&m, &ParameterPoint(vec![5.0, 1.0])).is_err());
    }
}
