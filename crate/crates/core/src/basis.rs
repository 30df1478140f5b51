//! X-orthonormal reduced bases `V_rb = span{ξ_1, …, ξ_N}`.

use alloc::vec::Vec;

use nalgebra::DVector;

use crate::fingerprint::Fnv1a;
use crate::{CsrMatrix, Error, GreedyHistory, PodSpectrum, Result};

/// Relative norm below which a Gram–Schmidt remainder counts as dependent.
pub const DEPENDENCE_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum BasisProvenance {
    Pod(PodSpectrum),
    Greedy(GreedyHistory),
    /// Built by hand, e.g. from explicitly chosen snapshots.
    Manual,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Orthonormalization {
    Accepted(DVector<f64>),
    Rejected(Dependence),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dependence {
    /// `‖c‖_X` before projection.
    pub input_norm: f64,
    /// `‖c - P c‖_X` after both Gram–Schmidt passes.
    pub remainder_norm: f64,
}

impl Dependence {
    pub fn is_zero_input(&self) -> bool {
        self.input_norm == 0.0
    }
}

#[derive(Debug, Clone)]
pub struct ReducedBasis {
    vectors: Vec<DVector<f64>>,
    /// `X ξ_i`, cached for inner products.
    x_images: Vec<DVector<f64>>,
    prefix_fingerprints: Vec<u64>,
    pub provenance: BasisProvenance,
}

impl ReducedBasis {
    /// An empty basis tied to the problem with the given fingerprint.
    pub fn empty(problem_fingerprint: u64) -> Self {
        let mut h = Fnv1a::new();
        h.write_u64(problem_fingerprint);
        Self {
            vectors: Vec::new(),
            x_images: Vec::new(),
            prefix_fingerprints: alloc::vec![h.finish()],
            provenance: BasisProvenance::Manual,
        }
    }

    /// Wraps vectors that are already X-orthonormal.
    pub fn from_orthonormal(
        problem_fingerprint: u64,
        vectors: Vec<DVector<f64>>,
        x: &CsrMatrix,
        provenance: BasisProvenance,
    ) -> Result<Self> {
        let mut basis = Self::empty(problem_fingerprint);
        for v in vectors {
            basis.push_orthonormal(v, x)?;
        }
        basis.provenance = provenance;
        Ok(basis)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.vectors.first().map(|v| v.len())
    }

    pub fn vectors(&self) -> &[DVector<f64>] {
        &self.vectors
    }

    pub fn vector(&self, i: usize) -> &DVector<f64> {
        &self.vectors[i]
    }

    pub fn fingerprint(&self) -> u64 {
        *self.prefix_fingerprints.last().expect("never empty")
    }

    /// Fingerprint of the nested sub-basis `ξ_1..ξ_n`.
    pub fn prefix_fingerprint(&self, n: usize) -> u64 {
        self.prefix_fingerprints[n]
    }

    /// Appends a vector assumed X-orthonormal to the current basis.
    pub fn push_orthonormal(&mut self, xi: DVector<f64>, x: &CsrMatrix) -> Result<()> {
        if xi.len() != x.nrows() || self.dim().is_some_and(|d| d != xi.len()) {
            return Err(Error::Dimension(alloc::format!(
                "basis vector of length {} (inner product of size {})",
                xi.len(),
                x.nrows()
            )));
        }
        let mut h = Fnv1a::resume(self.fingerprint());
        h.write_f64s(xi.as_slice());
        self.prefix_fingerprints.push(h.finish());
        self.x_images.push(x.mul_vec(&xi));
        self.vectors.push(xi);
        Ok(())
    }

    /// Two passes of modified Gram–Schmidt in the X inner product followed by
    /// normalization. Rejects the candidate when less than
    /// [`DEPENDENCE_THRESHOLD`] of its X-norm survives the projection.
    pub fn orthonormalize(&self, candidate: &DVector<f64>, x: &CsrMatrix) -> Orthonormalization {
        let input_norm = libm::sqrt(x.quad_form(candidate).max(0.0));
        if input_norm == 0.0 {
            return Orthonormalization::Rejected(Dependence {
                input_norm,
                remainder_norm: 0.0,
            });
        }
        let mut v = candidate.clone();
        for _pass in 0..2 {
            for (xi, x_xi) in self.vectors.iter().zip(&self.x_images) {
                let c = x_xi.dot(&v);
                v.axpy(-c, xi, 1.0);
            }
        }
        let remainder_norm = libm::sqrt(x.quad_form(&v).max(0.0));
        if !(remainder_norm >= DEPENDENCE_THRESHOLD * input_norm) {
            return Orthonormalization::Rejected(Dependence {
                input_norm,
                remainder_norm,
            });
        }
        v /= remainder_norm;
        Orthonormalization::Accepted(v)
    }

    /// Orthonormalizes and appends; returns the dependence diagnostic when
    /// the candidate is rejected.
    pub fn try_extend(&mut self, candidate: &DVector<f64>, x: &CsrMatrix) -> Result<core::result::Result<(), Dependence>> {
        match self.orthonormalize(candidate, x) {
            Orthonormalization::Accepted(xi) => {
                self.push_orthonormal(xi, x)?;
                Ok(Ok(()))
            }
            Orthonormalization::Rejected(d) => Ok(Err(d)),
        }
    }

    /// The nested sub-basis of the first `n` vectors.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            vectors: self.vectors[..n].to_vec(),
            x_images: self.x_images[..n].to_vec(),
            prefix_fingerprints: self.prefix_fingerprints[..=n].to_vec(),
            provenance: self.provenance.clone(),
        }
    }

    /// `max_ij |ξ_iᵀ X ξ_j - δ_ij|`
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst = 0.0_f64;
        for (i, xi) in self.vectors.iter().enumerate() {
            for (j, x_xj) in self.x_images.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((xi.dot(x_xj) - target).abs());
            }
        }
        worst
    }

    /// `c_i = ξ_iᵀ X w`
    pub fn coefficients(&self, w: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.x_images.iter().map(|x_xi| x_xi.dot(w)))
    }

    /// `Σ_i c_i ξ_i` over the first `c.len()` vectors. Reintroduces the
    /// truth dimension; validation only.
    pub fn lift(&self, coefficients: &DVector<f64>) -> DVector<f64> {
        assert!(coefficients.len() <= self.len(), "more coefficients than basis vectors");
        let mut out = DVector::zeros(self.dim().unwrap_or(0));
        for (c, xi) in coefficients.iter().zip(&self.vectors) {
            out.axpy(*c, xi, 1.0);
        }
        out
    }

    /// X-orthogonal projection: coefficients and the projected vector.
    pub fn project(&self, w: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let c = self.coefficients(w);
        let p = if self.is_empty() { DVector::zeros(w.len()) } else { self.lift(&c) };
        (c, p)
    }
}
