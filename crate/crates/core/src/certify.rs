//! A-posteriori certification of reduced solutions.
//!
//! The residual `r(v; μ) = f(v; μ) − a(u_rb(μ), v; μ)` is affine in the
//! products `θ_f^q` and `θ_a^q c_n`, so its Riesz representer is a fixed
//! combination of the representers of `f_q` and of `A_q ξ_n`. Offline, those
//! representers are X-orthonormalized (two-pass Gram–Schmidt) into an upper
//! triangular factor `R`; online, the dual norm is `‖R w‖₂` for the
//! coefficient vector `w = [θ_f; −θ_a ⊗ c]`. The Gram blocks `G = RᵀR`
//! remain available, and the classical quadratic form `wᵀ G w` is reported
//! alongside. That form loses about half the significant digits to
//! cancellation near convergence; the factored form does not.
//!
//! Stability bounds use the min-theta construction, which is rigorous when
//! `X = Σ θ_a^q(μ̄) A_q` with every `A_q` positive semidefinite and
//! `θ_a^q > 0` on the domain.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::reduced::rb_solve;
use crate::truth::{solve_x, GeneralizedEigenOracle, TruthSolution};
use crate::{AffineProblem, Error, ParameterPoint, ReducedBasis, ReducedModel, Result};

/// Dual norms below this fraction of `‖f^μ‖_{V'}` are flagged as being
/// below the accuracy floor of offline/online evaluation.
pub const CANCELLATION_FLOOR: f64 = 1e-7;

/// True errors below this fraction of the corresponding solution norm make
/// an effectivity indeterminate.
pub const INDETERMINATE_THRESHOLD: f64 = 1e-10;

/// Slack factor of the effectivity ceilings.
pub const CEILING_SLACK: f64 = 1.0 + 1e-8;

/// Absolute slack on the error side of the rigor inequalities.
pub const RIGOR_SLACK: f64 = 1e-10;

const RAYLEIGH_PROBES: usize = 32;

/// Offline residual data: the factored Gram matrix of the Riesz
/// representers, ordered `f_1..f_{Q_f}` and then `A_q ξ_n` with `n` outer and
/// `q` inner, so that growing the basis appends columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualData {
    q_a: usize,
    q_f: usize,
    factor: DMatrix<f64>,
    problem_fingerprint: u64,
    basis_fingerprints: Vec<u64>,
}

impl ResidualData {
    pub fn from_parts(
        q_a: usize,
        q_f: usize,
        factor: DMatrix<f64>,
        problem_fingerprint: u64,
        basis_fingerprints: Vec<u64>,
    ) -> Result<Self> {
        let n = basis_fingerprints
            .len()
            .checked_sub(1)
            .ok_or_else(|| Error::Dimension("missing basis fingerprints".into()))?;
        let k = q_f + q_a * n;
        if factor.shape() != (k, k) {
            return Err(Error::Dimension(alloc::format!(
                "residual factor is {:?}, expected {k}x{k}",
                factor.shape()
            )));
        }
        Ok(Self {
            q_a,
            q_f,
            factor,
            problem_fingerprint,
            basis_fingerprints,
        })
    }

    pub fn n(&self) -> usize {
        self.basis_fingerprints.len() - 1
    }

    pub fn q_a(&self) -> usize {
        self.q_a
    }

    pub fn q_f(&self) -> usize {
        self.q_f
    }

    /// Upper triangular `R` with `G = RᵀR`.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
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

    fn width(&self, n: usize) -> usize {
        self.q_f + self.q_a * n
    }

    /// Index of the representer of `A_q ξ_n` in the Gram ordering.
    pub fn a_index(&self, q: usize, n: usize) -> usize {
        self.q_f + n * self.q_a + q
    }

    pub fn gram(&self) -> DMatrix<f64> {
        self.factor.tr_mul(&self.factor)
    }

    /// `G_ff[q, q'] = (f̂_q, f̂_q')_V`
    pub fn g_ff(&self) -> DMatrix<f64> {
        self.gram().view((0, 0), (self.q_f, self.q_f)).into_owned()
    }

    /// `G_fa[q, (q', n)]` with column index `n·Q_a + q'`.
    pub fn g_fa(&self) -> DMatrix<f64> {
        let k = self.width(self.n());
        self.gram().view((0, self.q_f), (self.q_f, k - self.q_f)).into_owned()
    }

    /// `G_aa[(q, n), (q', n')]` with index `n·Q_a + q`.
    pub fn g_aa(&self) -> DMatrix<f64> {
        let k = self.width(self.n());
        self.gram().view((self.q_f, self.q_f), (k - self.q_f, k - self.q_f)).into_owned()
    }

    /// Residual data of the nested sub-basis `ξ_1..ξ_n`.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.n());
        let k = self.width(n);
        Self {
            q_a: self.q_a,
            q_f: self.q_f,
            factor: self.factor.view((0, 0), (k, k)).into_owned(),
            problem_fingerprint: self.problem_fingerprint,
            basis_fingerprints: self.basis_fingerprints[..=n].to_vec(),
        }
    }
}

/// Offline state for growing [`ResidualData`] one basis vector at a time.
/// Holds the X-orthonormal representers, which are of truth size.
#[derive(Debug, Clone)]
pub struct ResidualBuilder {
    data: ResidualData,
    representers: Vec<DVector<f64>>,
    x_images: Vec<DVector<f64>>,
}

impl ResidualBuilder {
    /// Residual data for the empty basis: only the load representers.
    pub fn new(problem: &AffineProblem, basis: &ReducedBasis) -> Result<Self> {
        let mut builder = Self {
            data: ResidualData {
                q_a: problem.q_a(),
                q_f: problem.q_f(),
                factor: DMatrix::zeros(0, 0),
                problem_fingerprint: problem.fingerprint(),
                basis_fingerprints: alloc::vec![basis.prefix_fingerprint(0)],
            },
            representers: Vec::new(),
            x_images: Vec::new(),
        };
        for f in problem.f_blocks() {
            let riesz = solve_x(problem, f)?;
            builder.append(problem, riesz);
        }
        Ok(builder)
    }

    pub fn data(&self) -> &ResidualData {
        &self.data
    }

    pub fn into_data(self) -> ResidualData {
        self.data
    }

    /// Adds the representers of `A_q ξ_{N+1}` for the last vector of `basis`.
    pub fn extend(&mut self, problem: &AffineProblem, basis: &ReducedBasis) -> Result<()> {
        let n = self.data.n();
        if basis.len() != n + 1 || basis.prefix_fingerprint(n) != self.data.basis_fingerprint() {
            return Err(Error::Fingerprint {
                expected: self.data.basis_fingerprint(),
                found: basis.prefix_fingerprint(n.min(basis.len())),
            });
        }
        if problem.fingerprint() != self.data.problem_fingerprint {
            return Err(Error::Fingerprint {
                expected: self.data.problem_fingerprint,
                found: problem.fingerprint(),
            });
        }
        let xi = basis.vector(n);
        for a in problem.a_blocks() {
            let riesz = solve_x(problem, &a.mul_vec(xi))?;
            self.append(problem, riesz);
        }
        self.data.basis_fingerprints.push(basis.prefix_fingerprint(n + 1));
        Ok(())
    }

    /// Orthonormalizes one representer against the stored ones and grows
    /// the triangular factor by one column.
    fn append(&mut self, problem: &AffineProblem, mut v: DVector<f64>) {
        let x = problem.x();
        let k = self.representers.len();
        let original = libm::sqrt(x.quad_form(&v).max(0.0));
        let mut column = DVector::zeros(k + 1);
        let mut passes = 0;
        let mut norm;
        loop {
            for (j, (z, xz)) in self.representers.iter().zip(&self.x_images).enumerate() {
                let c = xz.dot(&v);
                column[j] += c;
                v.axpy(-c, z, 1.0);
            }
            passes += 1;
            norm = libm::sqrt(x.quad_form(&v).max(0.0));
            // nearly dependent representers get extra passes so that the
            // normalized remainder is still orthogonal to the rest
            if passes >= 2 && (norm > 1e-8 * original || passes >= 4) {
                break;
            }
        }
        column[k] = norm;
        if norm > 0.0 {
            v /= norm;
        }
        let mut grown = DMatrix::zeros(k + 1, k + 1);
        grown.view_mut((0, 0), (k, k)).copy_from(&self.data.factor);
        grown.set_column(k, &column);
        self.data.factor = grown;
        self.x_images.push(x.mul_vec(&v));
        self.representers.push(v);
    }
}

/// Residual data for the whole basis.
pub fn riesz_offline(problem: &AffineProblem, basis: &ReducedBasis) -> Result<ResidualData> {
    let mut builder = ResidualBuilder::new(problem, basis)?;
    for k in 0..basis.len() {
        builder.extend(problem, &basis.truncated(k + 1))?;
    }
    Ok(builder.into_data())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualNorm {
    /// `‖r̂(μ)‖_V` from the factored representation.
    pub value: f64,
    /// The classical Gram quadratic form before clamping.
    pub gram_raw: f64,
    /// `√max(gram_raw, 0)`.
    pub gram_value: f64,
    /// `‖f^μ‖_{V'} = (θ_fᵀ G_ff θ_f)^{1/2}`.
    pub scale: f64,
    /// The Gram form went negative beyond round-off and was clamped.
    pub cancellation: bool,
    /// `value < CANCELLATION_FLOOR · scale`.
    pub below_floor: bool,
}

/// Dual norm of the residual for reduced coefficients `c`
/// (`c.len() ≤ N`; shorter vectors use the nested sub-basis).
pub fn residual_dual_norm(data: &ResidualData, theta_a: &[f64], theta_f: &[f64], coefficients: &DVector<f64>) -> Result<DualNorm> {
    let n = coefficients.len();
    if n > data.n() || theta_a.len() != data.q_a || theta_f.len() != data.q_f {
        return Err(Error::Dimension(alloc::format!(
            "residual data (N = {}, Q_a = {}, Q_f = {}) evaluated with {} coefficients, {} theta_a, {} theta_f",
            data.n(),
            data.q_a,
            data.q_f,
            n,
            theta_a.len(),
            theta_f.len()
        )));
    }
    let k = data.width(n);
    let mut w = DVector::zeros(k);
    for (q, t) in theta_f.iter().enumerate() {
        w[q] = *t;
    }
    for (i, c) in coefficients.iter().enumerate() {
        for (q, t) in theta_a.iter().enumerate() {
            w[data.a_index(q, i)] = -t * c;
        }
    }
    let r = data.factor.view((0, 0), (k, k));
    let value = (r * &w).norm();

    let gram = r.tr_mul(&r);
    let qf = data.q_f;
    let wf = w.rows(0, qf);
    let wa = w.rows(qf, k - qf);
    let ff = (wf.transpose() * gram.view((0, 0), (qf, qf)) * wf)[(0, 0)];
    let fa = (wf.transpose() * gram.view((0, qf), (qf, k - qf)) * wa)[(0, 0)];
    let aa = (wa.transpose() * gram.view((qf, qf), (k - qf, k - qf)) * wa)[(0, 0)];
    // w_a already carries the minus sign
    let gram_raw = ff + 2.0 * fa + aa;
    let scale = libm::sqrt(ff.max(0.0));
    Ok(DualNorm {
        value,
        gram_raw,
        gram_value: libm::sqrt(gram_raw.max(0.0)),
        scale,
        cancellation: gram_raw < -1e-12 * ff,
        below_floor: value < CANCELLATION_FLOOR * scale,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityBounds {
    pub alpha_lb: f64,
    pub gamma_ub: f64,
    pub rigorous: bool,
}

/// `(min_q θ_a^q(μ)/θ_a^q(μ̄), max_q θ_a^q(μ)/θ_a^q(μ̄))`
pub fn min_max_theta(theta_a: &[f64], theta_ref: &[f64]) -> (f64, f64) {
    theta_a
        .iter()
        .zip(theta_ref)
        .map(|(t, r)| t / r)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Min-theta bounds for parametrically coercive problems. Otherwise the
/// extremes of Rayleigh quotients `vᵀA^μv / vᵀXv` over seeded random
/// vectors, flagged non-rigorous.
pub fn stability_bounds(problem: &AffineProblem, mu: &ParameterPoint) -> Result<StabilityBounds> {
    let (theta_a, _) = problem.eval_thetas(mu)?;
    if problem.is_parametrically_coercive() {
        let (alpha_lb, gamma_ub) = min_max_theta(&theta_a, problem.theta_a_ref());
        return Ok(StabilityBounds {
            alpha_lb,
            gamma_ub,
            rigorous: true,
        });
    }
    let a = problem.operator_for(&theta_a);
    let mut rng = ChaCha8Rng::seed_from_u64(0x7a11_e1e3);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..RAYLEIGH_PROBES {
        let v = DVector::from_fn(problem.dim(), |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let q = a.quad_form(&v) / problem.x().quad_form(&v);
        lo = lo.min(q);
        hi = hi.max(q);
    }
    Ok(StabilityBounds {
        alpha_lb: lo,
        gamma_ub: hi,
        rigorous: false,
    })
}

/// Online counterpart of [`stability_bounds`]: min-theta when rigorous,
/// otherwise the extreme eigenvalues of `A_rb^μ`, i.e. the extreme Rayleigh
/// quotients over the reduced space.
pub fn reduced_stability_bounds(model: &ReducedModel, theta_a: &[f64]) -> StabilityBounds {
    if model.is_parametrically_coercive() {
        let (alpha_lb, gamma_ub) = min_max_theta(theta_a, model.theta_a_ref());
        return StabilityBounds {
            alpha_lb,
            gamma_ub,
            rigorous: true,
        };
    }
    if model.n() == 0 {
        return StabilityBounds {
            alpha_lb: f64::NAN,
            gamma_ub: f64::NAN,
            rigorous: false,
        };
    }
    let eig = model.assemble_matrix(theta_a).symmetric_eigenvalues();
    StabilityBounds {
        alpha_lb: eig.min(),
        gamma_ub: eig.max(),
        rigorous: false,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub mu: ParameterPoint,
    pub coefficients: DVector<f64>,
    pub s_rb: f64,
    /// `‖u_rb‖_V = ‖c‖₂` for an X-orthonormal basis.
    pub u_rb_norm: f64,
    pub r_norm: f64,
    pub alpha_lb: f64,
    pub gamma_ub: f64,
    pub eta_en: f64,
    pub eta_s: f64,
    /// `None` when `s_rb ≤ 0`.
    pub eta_s_rel: Option<f64>,
    pub eta_v: f64,
    pub eta_v_rel: f64,
    pub eta_v_rel_valid: bool,
    /// Bounds are rigorous (min-theta on a parametrically coercive problem).
    pub rigorous: bool,
    pub out_of_domain: bool,
    pub dual_norm: DualNorm,
}

impl Certificate {
    /// The estimator used by the greedy search, `η_en / ‖u_rb‖_V`.
    pub fn relative_energy_estimate(&self) -> f64 {
        if self.u_rb_norm > 0.0 {
            self.eta_en / self.u_rb_norm
        } else {
            f64::INFINITY
        }
    }
}

/// Estimators from already computed ingredients.
pub fn estimators(solution: &crate::RbSolution, dual_norm: DualNorm, bounds: StabilityBounds) -> Certificate {
    let r = dual_norm.value;
    let alpha = bounds.alpha_lb;
    let u_rb_norm = solution.coefficients.norm();
    let (eta_en, eta_s, eta_v) = if alpha > 0.0 {
        (r / libm::sqrt(alpha), r * r / alpha, r / alpha)
    } else {
        (f64::INFINITY, f64::INFINITY, f64::INFINITY)
    };
    let eta_s_rel = (solution.s_rb > 0.0).then(|| eta_s / solution.s_rb);
    let eta_v_rel = if u_rb_norm > 0.0 { 2.0 * eta_v / u_rb_norm } else { f64::INFINITY };
    Certificate {
        mu: solution.mu.clone(),
        coefficients: solution.coefficients.clone(),
        s_rb: solution.s_rb,
        u_rb_norm,
        r_norm: r,
        alpha_lb: alpha,
        gamma_ub: bounds.gamma_ub,
        eta_en,
        eta_s,
        eta_s_rel,
        eta_v,
        eta_v_rel,
        eta_v_rel_valid: eta_v_rel <= 1.0,
        rigorous: bounds.rigorous,
        out_of_domain: solution.out_of_domain,
        dual_norm,
    }
}

/// Online solve plus all five estimators. Touches only reduced-size data.
pub fn certificate(model: &ReducedModel, data: &ResidualData, mu: &ParameterPoint) -> Result<Certificate> {
    if data.problem_fingerprint != model.problem_fingerprint() {
        return Err(Error::Fingerprint {
            expected: model.problem_fingerprint(),
            found: data.problem_fingerprint,
        });
    }
    let n = model.n();
    if n > data.n() || data.basis_fingerprints[n] != model.basis_fingerprint() {
        return Err(Error::Fingerprint {
            expected: model.basis_fingerprint(),
            found: data.basis_fingerprints.get(n).copied().unwrap_or(0),
        });
    }
    let solution = rb_solve(model, mu)?;
    let dual = residual_dual_norm(data, &solution.theta_a, &solution.theta_f, &solution.coefficients)?;
    let bounds = reduced_stability_bounds(model, &solution.theta_a);
    Ok(estimators(&solution, dual, bounds))
}

/// True errors and effectivities at one parameter, against a truth solve
/// and the dense eigensolve oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectivityReport {
    pub certificate: Certificate,
    pub s_delta: f64,
    /// `‖u_δ − u_rb‖_μ`
    pub err_mu: f64,
    /// `‖u_δ − u_rb‖_V`
    pub err_v: f64,
    /// `s_δ − s_rb`
    pub output_error: f64,
    pub u_delta_mu_norm: f64,
    pub u_delta_v_norm: f64,
    pub alpha_delta: f64,
    pub gamma_delta: f64,
    /// `None` marks an indeterminate ratio (true error below the
    /// [`INDETERMINATE_THRESHOLD`] fraction of the solution scale).
    pub eff_en: Option<f64>,
    pub eff_s: Option<f64>,
    pub eff_s_rel: Option<f64>,
    pub eff_v: Option<f64>,
    pub eff_v_rel: Option<f64>,
}

/// Outcome of the bound and ceiling checks for one report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EffectivityChecks {
    pub energy_bound: bool,
    pub output_bound: bool,
    pub relative_output_bound: bool,
    pub v_bound: bool,
    /// `None` when `η_V,rel > 1`, where no bound is claimed.
    pub relative_v_bound: Option<bool>,
    pub ceiling_en: bool,
    pub ceiling_s: bool,
    pub ceiling_s_rel: bool,
    pub ceiling_v: bool,
    pub ceiling_v_rel: Option<bool>,
}

impl EffectivityChecks {
    pub fn rigor(&self) -> bool {
        self.energy_bound && self.output_bound && self.relative_output_bound && self.v_bound && self.relative_v_bound != Some(false)
    }

    pub fn ceilings(&self) -> bool {
        self.ceiling_en && self.ceiling_s && self.ceiling_s_rel && self.ceiling_v && self.ceiling_v_rel != Some(false)
    }
}

impl EffectivityReport {
    /// Upper bounds on the five effectivities in terms of `γ_δ / α_LB`.
    pub fn ceilings(&self) -> [f64; 5] {
        let ratio = self.gamma_delta / self.certificate.alpha_lb;
        let eta_s_rel = self.certificate.eta_s_rel.unwrap_or(f64::INFINITY);
        [libm::sqrt(ratio), ratio, (1.0 + eta_s_rel) * ratio, ratio, 3.0 * ratio]
    }

    pub fn effectivities(&self) -> [Option<f64>; 5] {
        [self.eff_en, self.eff_s, self.eff_s_rel, self.eff_v, self.eff_v_rel]
    }

    pub fn checks(&self) -> EffectivityChecks {
        let c = &self.certificate;
        let ceil = self.ceilings();
        let below = |eff: Option<f64>, ceiling: f64| eff.is_none_or(|e| e <= ceiling * CEILING_SLACK);
        let rel_err = |err: f64, norm: f64| if norm > 0.0 { err / norm } else { 0.0 };
        EffectivityChecks {
            energy_bound: self.err_mu <= c.eta_en + RIGOR_SLACK,
            output_bound: self.output_error <= c.eta_s + RIGOR_SLACK,
            relative_output_bound: c
                .eta_s_rel
                .is_none_or(|eta| rel_err(self.output_error, self.s_delta) <= eta + RIGOR_SLACK),
            v_bound: self.err_v <= c.eta_v + RIGOR_SLACK,
            relative_v_bound: c
                .eta_v_rel_valid
                .then(|| rel_err(self.err_v, self.u_delta_v_norm) <= c.eta_v_rel + RIGOR_SLACK),
            ceiling_en: below(self.eff_en, ceil[0]),
            ceiling_s: below(self.eff_s, ceil[1]),
            ceiling_s_rel: below(self.eff_s_rel, ceil[2]),
            ceiling_v: below(self.eff_v, ceil[3]),
            ceiling_v_rel: c.eta_v_rel_valid.then(|| below(self.eff_v_rel, ceil[4])),
        }
    }
}

/// Builds the effectivity report from a certificate and a matching truth
/// solution.
pub fn effectivity_report(
    problem: &AffineProblem,
    basis: &ReducedBasis,
    certificate: Certificate,
    truth: &TruthSolution,
    oracle: &GeneralizedEigenOracle,
) -> Result<EffectivityReport> {
    let theta_a = problem.eval_thetas(&certificate.mu)?.0;
    let a = problem.operator_for(&theta_a);
    let x = problem.x();
    let u_rb = crate::reduced::lift(basis, &certificate.coefficients)?;
    let e = &truth.u - &u_rb;
    let err_mu = libm::sqrt(a.quad_form(&e).max(0.0));
    let err_v = libm::sqrt(x.quad_form(&e).max(0.0));
    let u_delta_mu_norm = libm::sqrt(a.quad_form(&truth.u).max(0.0));
    let u_delta_v_norm = libm::sqrt(x.quad_form(&truth.u).max(0.0));
    let output_error = truth.s - certificate.s_rb;
    let constants = oracle.constants_for(&theta_a);

    let ratio = |eta: f64, err: f64, scale: f64| (err > INDETERMINATE_THRESHOLD * scale).then(|| eta / err);
    let output_scale = truth.s.abs();
    let eff_en = ratio(certificate.eta_en, err_mu, u_delta_mu_norm);
    let eff_s = ratio(certificate.eta_s, output_error, output_scale);
    let eff_s_rel = certificate
        .eta_s_rel
        .and_then(|eta| ratio(eta * truth.s, output_error, output_scale));
    let eff_v = ratio(certificate.eta_v, err_v, u_delta_v_norm);
    let eff_v_rel = ratio(certificate.eta_v_rel * u_delta_v_norm, err_v, u_delta_v_norm);

    Ok(EffectivityReport {
        certificate,
        s_delta: truth.s,
        err_mu,
        err_v,
        output_error,
        u_delta_mu_norm,
        u_delta_v_norm,
        alpha_delta: constants.alpha_delta,
        gamma_delta: constants.gamma_delta,
        eff_en,
        eff_s,
        eff_s_rel,
        eff_v,
        eff_v_rel,
    })
}

/// Certificate, truth solve, eigensolve and all effectivities at `μ`.
/// Desk scale only; builds a fresh eigen oracle on every call, so prefer
/// [`effectivity_report`] with a shared oracle in loops.
pub fn effectivities(
    problem: &AffineProblem,
    model: &ReducedModel,
    data: &ResidualData,
    basis: &ReducedBasis,
    mu: &ParameterPoint,
) -> Result<EffectivityReport> {
    let oracle = GeneralizedEigenOracle::new(problem)?;
    let cert = certificate(model, data, mu)?;
    let truth = crate::truth::solve_fom(problem, mu)?;
    effectivity_report(problem, basis, cert, &truth, &oracle)
}

/// Direct full-order evaluation of `‖r̂‖_V`: solve `X r̂ = f^μ − A^μ u_rb`.
pub fn residual_dual_norm_direct(
    problem: &AffineProblem,
    basis: &ReducedBasis,
    mu: &ParameterPoint,
    coefficients: &DVector<f64>,
) -> Result<f64> {
    let (theta_a, theta_f) = problem.eval_thetas(mu)?;
    let u_rb = crate::reduced::lift(basis, coefficients)?;
    let residual = problem.load_for(&theta_f) - problem.operator_for(&theta_a).mul_vec(&u_rb);
    let riesz = solve_x(problem, &residual)?;
    Ok(libm::sqrt(problem.x().quad_form(&riesz).max(0.0)))
}
