//! Affinely parametrized problems `a(·,·;μ) = Σ θ_a^q(μ) a_q`, `f(·;μ) = Σ θ_f^q(μ) f_q`.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{self, DofMap};
use crate::fingerprint::Fnv1a;
use crate::{CsrMatrix, Error, Result, ThetaExpression};

/// Domain points checked for positivity of `θ_a` when classifying a problem.
pub const COERCIVITY_SAMPLES: usize = 1000;
const PSD_PROBES: usize = 16;
const COERCIVITY_SEED: u64 = 0x5eed_c0e7;

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterPoint(pub Vec<f64>);

impl ParameterPoint {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl From<Vec<f64>> for ParameterPoint {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl fmt::Display for ParameterPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub scale: Scale,
}

impl Interval {
    pub fn new(lo: f64, hi: f64, scale: Scale) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Config(alloc::format!("interval [{lo}, {hi}] needs lo < hi")));
        }
        if scale == Scale::Log && !(lo > 0.0) {
            return Err(Error::Config(alloc::format!("logarithmic interval [{lo}, {hi}] needs lo > 0")));
        }
        Ok(Self { lo, hi, scale })
    }

    /// Maps `t ∈ [0, 1]` onto the interval on its sampling scale. The end
    /// points are returned exactly.
    pub fn at(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.lo;
        }
        if t >= 1.0 {
            return self.hi;
        }
        match self.scale {
            Scale::Linear => self.lo + t * (self.hi - self.lo),
            Scale::Log => {
                let (a, b) = (libm::log(self.lo), libm::log(self.hi));
                libm::exp(a + t * (b - a))
            }
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterDomain {
    pub intervals: Vec<Interval>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingStrategy {
    Grid,
    Random,
}

impl ParameterDomain {
    pub fn new(intervals: Vec<Interval>) -> Self {
        Self { intervals }
    }

    pub fn uniform(p: usize, lo: f64, hi: f64, scale: Scale) -> Result<Self> {
        Ok(Self::new(vec![Interval::new(lo, hi, scale)?; p]))
    }

    pub fn dim(&self) -> usize {
        self.intervals.len()
    }

    pub fn contains(&self, mu: &ParameterPoint) -> bool {
        mu.dim() == self.dim() && self.intervals.iter().zip(mu.values()).all(|(iv, &v)| iv.contains(v))
    }

    /// Midpoint of every interval on its sampling scale.
    pub fn midpoint(&self) -> ParameterPoint {
        ParameterPoint(self.intervals.iter().map(|iv| iv.at(0.5)).collect())
    }

    /// `grid`: tensor grid with `⌈count^{1/p}⌉` points per axis, first
    /// component varying slowest. `random`: independent uniform draws on
    /// each axis' scale, reproducible from `seed`.
    pub fn sample(&self, count: usize, strategy: SamplingStrategy, seed: u64) -> Vec<ParameterPoint> {
        let p = self.dim();
        if count == 0 || p == 0 {
            return Vec::new();
        }
        match strategy {
            SamplingStrategy::Grid => {
                let k = points_per_axis(count, p);
                let axes: Vec<Vec<f64>> = self
                    .intervals
                    .iter()
                    .map(|iv| {
                        if k == 1 {
                            vec![iv.at(0.5)]
                        } else {
                            (0..k).map(|i| iv.at(i as f64 / (k - 1) as f64)).collect()
                        }
                    })
                    .collect();
                let total = k.pow(p as u32);
                (0..total)
                    .map(|mut idx| {
                        let mut v = vec![0.0; p];
                        for d in (0..p).rev() {
                            v[d] = axes[d][idx % k];
                            idx /= k;
                        }
                        ParameterPoint(v)
                    })
                    .collect()
            }
            SamplingStrategy::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..count)
                    .map(|_| ParameterPoint(self.intervals.iter().map(|iv| iv.at(rng.random::<f64>())).collect()))
                    .collect()
            }
        }
    }
}

/// Smallest `k` with `k^p >= count`.
fn points_per_axis(count: usize, p: usize) -> usize {
    let mut k = libm::floor(libm::pow(count as f64, 1.0 / p as f64)).max(1.0) as usize;
    while k.checked_pow(p as u32).is_some_and(|t| t < count) {
        k += 1;
    }
    while k > 1 && (k - 1).checked_pow(p as u32).is_some_and(|t| t >= count) {
        k -= 1;
    }
    k
}

pub fn sample_parameters(domain: &ParameterDomain, count: usize, strategy: SamplingStrategy, seed: u64) -> Vec<ParameterPoint> {
    domain.sample(count, strategy, seed)
}

/// Construction parameters of the built-in thermal block benchmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalBlockConfig {
    pub n: usize,
    pub blocks: usize,
    pub mu_lo: f64,
    pub mu_hi: f64,
}

/// Raw ingredients of an affine problem, validated by [`AffineProblem::new`].
#[derive(Debug, Clone)]
pub struct AffineParts {
    pub a_blocks: Vec<CsrMatrix>,
    pub f_blocks: Vec<DVector<f64>>,
    pub theta_a: Vec<ThetaExpression>,
    pub theta_f: Vec<ThetaExpression>,
    pub domain: ParameterDomain,
    pub mu_bar: ParameterPoint,
    /// Inner product; `Σ θ_a^q(μ̄) A_q` when absent.
    pub x: Option<CsrMatrix>,
}

#[derive(Debug, Clone)]
pub struct AffineProblem {
    a_blocks: Vec<CsrMatrix>,
    f_blocks: Vec<DVector<f64>>,
    theta_a: Vec<ThetaExpression>,
    theta_f: Vec<ThetaExpression>,
    domain: ParameterDomain,
    mu_bar: ParameterPoint,
    theta_a_ref: Vec<f64>,
    x: CsrMatrix,
    parametrically_coercive: bool,
    thermal: Option<ThermalBlockConfig>,
    fingerprint: u64,
}

impl AffineProblem {
    pub fn new(parts: AffineParts) -> Result<Self> {
        let AffineParts {
            a_blocks,
            f_blocks,
            theta_a,
            theta_f,
            domain,
            mu_bar,
            x,
        } = parts;
        if a_blocks.is_empty() || f_blocks.is_empty() {
            return Err(Error::Dimension("need at least one operator and one load".into()));
        }
        if a_blocks.len() != theta_a.len() || f_blocks.len() != theta_f.len() {
            return Err(Error::Dimension(alloc::format!(
                "{} operators / {} theta_a, {} loads / {} theta_f",
                a_blocks.len(),
                theta_a.len(),
                f_blocks.len(),
                theta_f.len()
            )));
        }
        let n = a_blocks[0].nrows();
        for (q, a) in a_blocks.iter().enumerate() {
            if a.nrows() != n || a.ncols() != n {
                return Err(Error::Dimension(alloc::format!(
                    "A[{q}] is {}x{}, expected {n}x{n}",
                    a.nrows(),
                    a.ncols()
                )));
            }
            let scale = a.max_abs();
            let asym = a.asymmetry();
            if asym > 1e-12 * scale {
                return Err(Error::Asymmetric {
                    index: q,
                    asymmetry: asym,
                    scale,
                });
            }
        }
        for (q, f) in f_blocks.iter().enumerate() {
            if f.len() != n {
                return Err(Error::Dimension(alloc::format!("f[{q}] has length {}, expected {n}", f.len())));
            }
        }
        let p = domain.dim();
        if mu_bar.dim() != p {
            return Err(Error::Dimension(alloc::format!(
                "mu_bar has {} components, domain has {p}",
                mu_bar.dim()
            )));
        }
        for e in theta_a.iter().chain(&theta_f) {
            if let Some(index) = e.max_param_index().filter(|&i| i >= p) {
                return Err(Error::IndexOutOfBounds { index, p });
            }
        }

        let theta_a_ref = eval_all(&theta_a, mu_bar.values(), "theta_a")?;
        let x = match x {
            Some(x) => {
                if x.nrows() != n || x.ncols() != n {
                    return Err(Error::Dimension(alloc::format!(
                        "X is {}x{}, expected {n}x{n}",
                        x.nrows(),
                        x.ncols()
                    )));
                }
                x
            }
            None => assembly::assemble_inner_product(&a_blocks, &theta_a_ref)?,
        };

        let parametrically_coercive = classify_coercivity(&a_blocks, &theta_a, &theta_a_ref, &domain);

        let mut problem = Self {
            a_blocks,
            f_blocks,
            theta_a,
            theta_f,
            domain,
            mu_bar,
            theta_a_ref,
            x,
            parametrically_coercive,
            thermal: None,
            fingerprint: 0,
        };
        problem.fingerprint = problem.compute_fingerprint();
        Ok(problem)
    }

    pub fn a_blocks(&self) -> &[CsrMatrix] {
        &self.a_blocks
    }

    pub fn f_blocks(&self) -> &[DVector<f64>] {
        &self.f_blocks
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

    /// `θ_a(μ̄)`, the coefficients defining the inner product.
    pub fn theta_a_ref(&self) -> &[f64] {
        &self.theta_a_ref
    }

    pub fn x(&self) -> &CsrMatrix {
        &self.x
    }

    pub fn dim(&self) -> usize {
        self.x.nrows()
    }

    pub fn q_a(&self) -> usize {
        self.a_blocks.len()
    }

    pub fn q_f(&self) -> usize {
        self.f_blocks.len()
    }

    pub fn p(&self) -> usize {
        self.domain.dim()
    }

    /// Output and load functionals coincide.
    pub fn is_compliant(&self) -> bool {
        true
    }

    pub fn is_parametrically_coercive(&self) -> bool {
        self.parametrically_coercive
    }

    pub fn thermal_config(&self) -> Option<ThermalBlockConfig> {
        self.thermal
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Evaluates all coefficient functions. Points outside the domain are
    /// evaluated anyway (with a warning); non-finite values are errors.
    pub fn eval_thetas(&self, mu: &ParameterPoint) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_arity(mu)?;
        if !self.domain.contains(mu) {
            log::warn!("mu = {mu} lies outside the parameter domain; extrapolating");
        }
        Ok((
            eval_all(&self.theta_a, mu.values(), "theta_a")?,
            eval_all(&self.theta_f, mu.values(), "theta_f")?,
        ))
    }

    pub fn check_arity(&self, mu: &ParameterPoint) -> Result<()> {
        if mu.dim() != self.p() {
            return Err(Error::Dimension(alloc::format!(
                "parameter has {} components, problem expects {}",
                mu.dim(),
                self.p()
            )));
        }
        Ok(())
    }

    /// `A^μ = Σ θ_a^q A_q` for given coefficients.
    pub fn operator_for(&self, theta_a: &[f64]) -> CsrMatrix {
        let terms: Vec<_> = theta_a.iter().copied().zip(self.a_blocks.iter()).collect();
        CsrMatrix::linear_combination(&terms).expect("blocks share one shape")
    }

    pub fn load_for(&self, theta_f: &[f64]) -> DVector<f64> {
        let mut f = DVector::zeros(self.dim());
        for (t, fq) in theta_f.iter().zip(&self.f_blocks) {
            f.axpy(*t, fq, 1.0);
        }
        f
    }

    pub fn operator(&self, mu: &ParameterPoint) -> Result<CsrMatrix> {
        Ok(self.operator_for(&self.eval_thetas(mu)?.0))
    }

    pub fn load(&self, mu: &ParameterPoint) -> Result<DVector<f64>> {
        Ok(self.load_for(&self.eval_thetas(mu)?.1))
    }

    fn compute_fingerprint(&self) -> u64 {
        let mut h = Fnv1a::new();
        h.write_u64(self.dim() as u64);
        for a in self.a_blocks.iter().chain(core::iter::once(&self.x)) {
            h.write_u64(a.nnz() as u64);
            for (i, j, v) in a.triplets() {
                h.write_u64(i as u64);
                h.write_u64(j as u64);
                h.write_f64s(&[v]);
            }
        }
        for f in &self.f_blocks {
            h.write_f64s(f.as_slice());
        }
        for e in self.theta_a.iter().chain(&self.theta_f) {
            h.write(e.to_string().as_bytes());
            h.write(b";");
        }
        for iv in &self.domain.intervals {
            h.write_f64s(&[iv.lo, iv.hi]);
            h.write(&[iv.scale as u8]);
        }
        h.write_f64s(self.mu_bar.values());
        h.finish()
    }
}

fn eval_all(exprs: &[ThetaExpression], mu: &[f64], which: &'static str) -> Result<Vec<f64>> {
    exprs
        .iter()
        .enumerate()
        .map(|(index, e)| {
            let value = e.eval(mu);
            if value.is_finite() {
                Ok(value)
            } else {
                Err(Error::Evaluation { which, index, value })
            }
        })
        .collect()
}

/// Positivity of every `θ_a^q` on [`COERCIVITY_SAMPLES`] domain points (plus
/// `μ̄` and the domain corners of the grid), and a positive-semidefinite
/// spot check of every `A_q`.
fn classify_coercivity(a_blocks: &[CsrMatrix], theta_a: &[ThetaExpression], theta_a_ref: &[f64], domain: &ParameterDomain) -> bool {
    if theta_a_ref.iter().any(|&t| !(t > 0.0)) {
        return false;
    }
    let mut points = domain.sample(COERCIVITY_SAMPLES, SamplingStrategy::Random, COERCIVITY_SEED);
    if domain.dim() <= 10 {
        points.extend(domain.sample(1 << domain.dim(), SamplingStrategy::Grid, 0));
    }
    for mu in &points {
        for e in theta_a {
            let v = e.eval(mu.values());
            if !(v > 0.0 && v.is_finite()) {
                return false;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(COERCIVITY_SEED);
    for a in a_blocks {
        if a.diagonal().iter().any(|&d| d < 0.0) {
            return false;
        }
        let scale = a.max_abs();
        for _ in 0..PSD_PROBES {
            let v = DVector::from_fn(a.nrows(), |_, _| rng.random::<f64>() * 2.0 - 1.0);
            if a.quad_form(&v) < -1e-12 * scale * v.norm_squared() {
                return false;
            }
        }
    }
    true
}

/// The `B × B` thermal block on the unit square: one conductivity `μ_q` per
/// block, unit flux through the base, zero temperature on the top edge.
pub fn make_thermal_block(n: usize, blocks: usize, mu_lo: f64, mu_hi: f64) -> Result<AffineProblem> {
    if !(mu_lo > 0.0 && mu_lo < mu_hi) {
        return Err(Error::Config(alloc::format!(
            "thermal block needs 0 < mu_lo < mu_hi (got {mu_lo}, {mu_hi})"
        )));
    }
    let mesh = assembly::build_mesh(n, blocks)?;
    let dofmap = DofMap::dirichlet_top(&mesh);
    let (a_blocks, f_blocks) = assembly::assemble_thermal_block_operators(&mesh, &dofmap)?;
    let p = blocks * blocks;
    let mut problem = AffineProblem::new(AffineParts {
        a_blocks,
        f_blocks,
        theta_a: (0..p).map(ThetaExpression::param).collect(),
        theta_f: vec![ThetaExpression::constant(1.0)],
        domain: ParameterDomain::uniform(p, mu_lo, mu_hi, Scale::Log)?,
        mu_bar: ParameterPoint(vec![1.0; p]),
        x: None,
    })?;
    problem.thermal = Some(ThermalBlockConfig { n, blocks, mu_lo, mu_hi });
    Ok(problem)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::build_mesh;

    #[test]
    fn thermal_block_shape() {
        let pb = make_thermal_block(16, 2, 0.1, 10.0).unwrap();
        assert_eq!((pb.p(), pb.q_a(), pb.q_f()), (4, 4, 1));
        assert!(pb.is_parametrically_coercive());
        assert_eq!(pb.theta_a_ref(), &[1.0; 4]);
        assert_eq!(pb.dim(), 17 * 16);
    }

    #[test]
    fn identity_coefficients() {
        let pb = make_thermal_block(4, 2, 0.1, 10.0).unwrap();
        let (ta, tf) = pb.eval_thetas(&ParameterPoint(vec![0.3, 2.0, 1.0, 5.0])).unwrap();
        assert_eq!(ta, vec![0.3, 2.0, 1.0, 5.0]);
        assert_eq!(tf, vec![1.0]);
        let (ta, _) = pb.eval_thetas(pb.mu_bar()).unwrap();
        assert_eq!(ta, pb.theta_a_ref());
    }

    #[test]
    fn non_finite_theta_is_an_error() {
        let mesh = build_mesh(2, 1).unwrap();
        let dm = DofMap::dirichlet_top(&mesh);
        let (a, f) = assembly::assemble_thermal_block_operators(&mesh, &dm).unwrap();
        let pb = AffineProblem::new(AffineParts {
            a_blocks: a,
            f_blocks: f,
            theta_a: vec![ThetaExpression::parse("1/mu[0]", 1).unwrap()],
            theta_f: vec![ThetaExpression::constant(1.0)],
            domain: ParameterDomain::uniform(1, 0.1, 10.0, Scale::Log).unwrap(),
            mu_bar: ParameterPoint(vec![1.0]),
            x: None,
        })
        .unwrap();
        assert_eq!(
            pb.eval_thetas(&ParameterPoint(vec![0.0])).unwrap_err(),
            Error::Evaluation {
                which: "theta_a",
                index: 0,
                value: f64::INFINITY
            }
        );
    }

    #[test]
    fn sign_change_disables_coercivity() {
        let mesh = build_mesh(2, 1).unwrap();
        let dm = DofMap::dirichlet_top(&mesh);
        let (a, f) = assembly::assemble_thermal_block_operators(&mesh, &dm).unwrap();
        let pb = AffineProblem::new(AffineParts {
            a_blocks: a,
            f_blocks: f,
            theta_a: vec![ThetaExpression::parse("mu[0]-5", 1).unwrap()],
            theta_f: vec![ThetaExpression::constant(1.0)],
            domain: ParameterDomain::uniform(1, 0.1, 10.0, Scale::Log).unwrap(),
            mu_bar: ParameterPoint(vec![6.0]),
            x: None,
        })
        .unwrap();
        assert!(!pb.is_parametrically_coercive());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mesh = build_mesh(2, 1).unwrap();
        let dm = DofMap::dirichlet_top(&mesh);
        let (a, _) = assembly::assemble_thermal_block_operators(&mesh, &dm).unwrap();
        let err = AffineProblem::new(AffineParts {
            a_blocks: a,
            f_blocks: vec![DVector::zeros(5)],
            theta_a: vec![ThetaExpression::param(0)],
            theta_f: vec![ThetaExpression::constant(1.0)],
            domain: ParameterDomain::uniform(1, 0.1, 10.0, Scale::Log).unwrap(),
            mu_bar: ParameterPoint(vec![1.0]),
            x: None,
        })
        .unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }

    #[test]
    fn affine_reconstruction_matches_one_shot_assembly() {
        let mesh = build_mesh(8, 2).unwrap();
        let dm = DofMap::dirichlet_top(&mesh);
        let pb = make_thermal_block(8, 2, 0.1, 10.0).unwrap();
        for mu in pb.domain().sample(10, SamplingStrategy::Random, 3) {
            let combined = pb.operator(&mu).unwrap();
            let direct = assembly::assemble_stiffness(&mesh, &dm, mu.values()).unwrap();
            let scale = direct.max_abs();
            let diff = (combined.to_dense() - direct.to_dense()).abs().max();
            assert!(diff <= 1e-14 * scale, "{diff}");
        }
    }

    #[test]
    fn log_grid_in_one_dimension() {
        let d = ParameterDomain::uniform(1, 0.1, 10.0, Scale::Log).unwrap();
        let pts = d.sample(3, SamplingStrategy::Grid, 0);
        let v: Vec<f64> = pts.iter().map(|p| p.0[0]).collect();
        assert_eq!(v[0], 0.1);
        assert!((v[1] - 1.0).abs() < 1e-15);
        assert_eq!(v[2], 10.0);
    }

    #[test]
    fn grid_in_two_dimensions() {
        let d = ParameterDomain::uniform(2, 0.0, 1.0, Scale::Linear).unwrap();
        let pts = d.sample(9, SamplingStrategy::Grid, 0);
        assert_eq!(pts.len(), 9);
        assert_eq!(pts[1].0, vec![0.0, 0.5]);
        assert_eq!(pts[3].0, vec![0.5, 0.0]);
        assert_eq!(points_per_axis(10, 2), 4);
        assert_eq!(points_per_axis(49, 4), 3);
        assert_eq!(points_per_axis(1, 3), 1);
    }

    #[test]
    fn random_sampling_is_reproducible() {
        let d = ParameterDomain::uniform(3, 0.1, 10.0, Scale::Log).unwrap();
        let a = d.sample(50, SamplingStrategy::Random, 42);
        let b = d.sample(50, SamplingStrategy::Random, 42);
        assert_eq!(a, b);
        assert_ne!(a, d.sample(50, SamplingStrategy::Random, 43));
        assert!(a.iter().all(|m| d.contains(m)));
    }

    #[test]
    fn interval_validation() {
        assert!(Interval::new(1.0, 1.0, Scale::Linear).is_err());
        assert!(Interval::new(0.0, 1.0, Scale::Log).is_err());
        assert!(Interval::new(-1.0, 1.0, Scale::Linear).is_ok());
    }
}
