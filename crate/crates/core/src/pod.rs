//! Proper orthogonal decomposition through the `M × M` snapshot
//! correlation matrix.
//!
//! With `C_mq = (ψ_m, ψ_q)_V / M` and `C v_i = λ_i v_i`, the basis is
//! `ξ_i = (M λ_i)^{-1/2} Σ_m (v_i)_m ψ_m`. In exact arithmetic these vectors
//! are already X-orthonormal; numerically the modes with small `λ_i` drift,
//! so each one is normalized and re-orthogonalized against its predecessors.
//! Snapshots are not mean-centred.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::basis::{BasisProvenance, Orthonormalization};
use crate::truth::solve_fom;
use crate::{AffineProblem, CsrMatrix, Error, ParameterPoint, ReducedBasis, Result};

/// Eigenvalues below this fraction of `λ_1` count as zero and are never
/// inverted.
pub const RANK_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SnapshotSet {
    pub parameters: Vec<ParameterPoint>,
    pub snapshots: Vec<DVector<f64>>,
    pub solve_residuals: Vec<f64>,
    pub problem_fingerprint: u64,
}

impl SnapshotSet {
    /// Solves the truth problem at every parameter.
    pub fn collect(problem: &AffineProblem, parameters: &[ParameterPoint]) -> Result<Self> {
        if parameters.is_empty() {
            return Err(Error::Config("snapshot set needs at least one parameter".into()));
        }
        let mut snapshots = Vec::with_capacity(parameters.len());
        let mut solve_residuals = Vec::with_capacity(parameters.len());
        for mu in parameters {
            let sol = solve_fom(problem, mu)?;
            snapshots.push(sol.u);
            solve_residuals.push(sol.solve_residual);
        }
        Ok(Self {
            parameters: parameters.to_vec(),
            snapshots,
            solve_residuals,
            problem_fingerprint: problem.fingerprint(),
        })
    }

    /// Snapshots computed elsewhere (or synthetic vectors in tests).
    pub fn from_vectors(problem_fingerprint: u64, parameters: Vec<ParameterPoint>, snapshots: Vec<DVector<f64>>) -> Result<Self> {
        if snapshots.is_empty() || parameters.len() != snapshots.len() {
            return Err(Error::Dimension(alloc::format!(
                "{} parameters for {} snapshots",
                parameters.len(),
                snapshots.len()
            )));
        }
        let n = snapshots[0].len();
        if snapshots.iter().any(|s| s.len() != n) {
            return Err(Error::Dimension("snapshots of different lengths".into()));
        }
        let m = snapshots.len();
        Ok(Self {
            parameters,
            snapshots,
            solve_residuals: alloc::vec![0.0; m],
            problem_fingerprint,
        })
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }
}

/// `C_mq = ψ_mᵀ X ψ_q / M`; the upper triangle is computed once and mirrored.
pub fn correlation_matrix(snapshots: &SnapshotSet, x: &CsrMatrix) -> DMatrix<f64> {
    let m = snapshots.len();
    let images: Vec<DVector<f64>> = snapshots.snapshots.iter().map(|s| x.mul_vec(s)).collect();
    let mut c = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = snapshots.snapshots[i].dot(&images[j]) / m as f64;
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    c
}

#[derive(Debug, Clone, PartialEq)]
pub struct PodSpectrum {
    /// `λ_1 ≥ … ≥ λ_M ≥ 0`.
    pub eigenvalues: Vec<f64>,
    /// Column `i` is `v_i`.
    pub eigenvectors: DMatrix<f64>,
    /// Number of modes kept in the basis.
    pub retained: usize,
    /// Count of `λ_i > RANK_THRESHOLD · λ_1`.
    pub rank: usize,
    /// Largest magnitude among eigenvalues that came out negative and were
    /// set to zero.
    pub clamped: f64,
}

impl PodSpectrum {
    pub fn total_energy(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    /// `Σ_{i>n} λ_i`, the mean squared projection error of the first `n` modes.
    pub fn tail(&self, n: usize) -> f64 {
        self.eigenvalues[n.min(self.eigenvalues.len())..].iter().sum()
    }
}

/// Eigen-decomposes the correlation matrix, sorted by decreasing eigenvalue.
pub fn pod_spectrum(snapshots: &SnapshotSet, x: &CsrMatrix) -> PodSpectrum {
    let c = correlation_matrix(snapshots, x);
    let m = c.nrows();
    let eig = c.symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut eigenvalues = Vec::with_capacity(m);
    let mut eigenvectors = DMatrix::zeros(m, m);
    let mut clamped = 0.0_f64;
    for (k, &i) in order.iter().enumerate() {
        let lambda = eig.eigenvalues[i];
        if lambda < 0.0 {
            clamped = clamped.max(-lambda);
        }
        eigenvalues.push(lambda.max(0.0));
        let mut v = eig.eigenvectors.column(i).into_owned();
        // sign convention: largest entry positive
        if v.iter().fold(0.0_f64, |a, &b| if b.abs() > a.abs() { b } else { a }) < 0.0 {
            v = -v;
        }
        eigenvectors.set_column(k, &v);
    }
    if clamped > RANK_THRESHOLD * eigenvalues[0] {
        log::warn!("correlation matrix has a negative eigenvalue of size {clamped:e}");
    }
    let floor = RANK_THRESHOLD * eigenvalues[0];
    let rank = eigenvalues.iter().take_while(|&&l| l > floor).count();
    PodSpectrum {
        eigenvalues,
        eigenvectors,
        retained: 0,
        rank,
        clamped,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PodCriterion {
    /// Exactly this many modes.
    Fixed(usize),
    /// Smallest `N` with `Σ_{i≤N} λ_i ≥ (1 - ε) Σ_i λ_i`, capped at the rank.
    RetainedEnergy(f64),
}

pub fn select_size(spectrum: &PodSpectrum, criterion: PodCriterion) -> Result<usize> {
    match criterion {
        PodCriterion::Fixed(n) if n > spectrum.rank => Err(Error::Rank {
            requested: n,
            rank: spectrum.rank,
        }),
        PodCriterion::Fixed(n) => Ok(n),
        PodCriterion::RetainedEnergy(eps) => {
            if !(0.0..1.0).contains(&eps) {
                return Err(Error::Config(alloc::format!("energy tolerance {eps} must lie in [0, 1)")));
            }
            let target = (1.0 - eps) * spectrum.total_energy();
            let mut partial = 0.0;
            for (i, l) in spectrum.eigenvalues[..spectrum.rank].iter().enumerate() {
                partial += l;
                if partial >= target {
                    return Ok(i + 1);
                }
            }
            Ok(spectrum.rank)
        }
    }
}

pub fn pod_basis(snapshots: &SnapshotSet, x: &CsrMatrix, criterion: PodCriterion) -> Result<ReducedBasis> {
    let mut spectrum = pod_spectrum(snapshots, x);
    let n = select_size(&spectrum, criterion)?;
    let m = snapshots.len();
    let mut basis = ReducedBasis::empty(snapshots.problem_fingerprint);
    for i in 0..n {
        let scale = 1.0 / libm::sqrt(m as f64 * spectrum.eigenvalues[i]);
        let mut xi = DVector::zeros(snapshots.snapshots[0].len());
        for (k, psi) in snapshots.snapshots.iter().enumerate() {
            xi.axpy(scale * spectrum.eigenvectors[(k, i)], psi, 1.0);
        }
        match basis.orthonormalize(&xi, x) {
            Orthonormalization::Accepted(v) => basis.push_orthonormal(v, x)?,
            Orthonormalization::Rejected(_) => return Err(Error::Rank { requested: n, rank: i }),
        }
    }
    spectrum.retained = n;
    basis.provenance = BasisProvenance::Pod(spectrum);
    Ok(basis)
}

/// `P_N w = Σ_i (w, ξ_i)_V ξ_i`.
pub fn project_onto_basis(basis: &ReducedBasis, w: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    basis.project(w)
}

/// `(1/M) Σ_m ‖ψ_m − P_N ψ_m‖_V²` for the first `n` basis vectors.
pub fn mean_projection_error(snapshots: &SnapshotSet, basis: &ReducedBasis, x: &CsrMatrix, n: usize) -> f64 {
    let sub = basis.truncated(n);
    let total: f64 = snapshots
        .snapshots
        .iter()
        .map(|psi| {
            let (_, p) = sub.project(psi);
            x.quad_form(&(psi - p))
        })
        .sum();
    total / snapshots.len() as f64
}
