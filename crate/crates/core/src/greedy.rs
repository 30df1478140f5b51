//! Estimator-driven greedy basis construction.
//!
//! Each iteration solves the truth problem at the selected parameter,
//! X-orthonormalizes the snapshot into the basis, extends the reduced model
//! and the residual data hierarchically, and then scans the training set
//! with the online estimator only. The next parameter is the argmax of the
//! relative energy estimator `η_en(μ) / ‖u_rb(μ)‖_V`.

use alloc::vec::Vec;

use crate::basis::Orthonormalization;
use crate::certify::{certificate, ResidualBuilder, ResidualData};
use crate::problem::SamplingStrategy;
use crate::reduced::{extend_projection, ReducedModel};
use crate::truth::solve_fom;
use crate::{AffineProblem, BasisProvenance, Error, ParameterPoint, ReducedBasis, Result};

/// Default training set size.
pub const DEFAULT_TRAINING_SIZE: usize = 500;

/// Default seed of the training set.
pub const DEFAULT_TRAINING_SEED: u64 = 0x6ee_d7a1;

/// Estimators within this relative distance of the maximum count as ties.
const TIE_TOLERANCE: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StoppingReason {
    Tolerance,
    NMax,
    /// The selected snapshot was numerically dependent on the basis.
    Stagnation,
}

impl StoppingReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StoppingReason::Tolerance => "tolerance",
            StoppingReason::NMax => "n_max",
            StoppingReason::Stagnation => "stagnation",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyHistory {
    pub selected_parameters: Vec<ParameterPoint>,
    /// Maximum relative estimator over the training set after each
    /// accepted basis vector.
    pub max_estimator_per_iteration: Vec<f64>,
    pub stopping_reason: StoppingReason,
    pub training_set_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyOptions {
    pub tol: f64,
    pub n_max: usize,
    /// First parameter; the domain midpoint when `None`.
    pub mu_1: Option<ParameterPoint>,
}

impl Default for GreedyOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            n_max: 50,
            mu_1: None,
        }
    }
}

/// Seeded random training set, log-uniform on log-scaled axes.
pub fn default_training_set(problem: &AffineProblem, seed: u64) -> Vec<ParameterPoint> {
    problem.domain().sample(DEFAULT_TRAINING_SIZE, SamplingStrategy::Random, seed)
}

#[derive(Debug, Clone)]
pub struct GreedyOutput {
    /// Carries the history as its provenance.
    pub basis: ReducedBasis,
    pub model: ReducedModel,
    pub residual: ResidualData,
    pub history: GreedyHistory,
}

/// State exposed to an observer after each training-set scan.
pub struct GreedyIteration<'a> {
    pub basis: &'a ReducedBasis,
    pub model: &'a ReducedModel,
    pub residual: &'a ResidualData,
    pub training_set: &'a [ParameterPoint],
    /// Relative estimator at each training parameter.
    pub estimators: &'a [f64],
}

pub fn greedy_build(problem: &AffineProblem, training_set: &[ParameterPoint], options: &GreedyOptions) -> Result<GreedyOutput> {
    greedy_build_observed(problem, training_set, options, |_| Ok(()))
}

/// [`greedy_build`] with a callback after every scan, e.g. for auditing
/// the estimators against truth solves.
pub fn greedy_build_observed<F>(
    problem: &AffineProblem,
    training_set: &[ParameterPoint],
    options: &GreedyOptions,
    mut observer: F,
) -> Result<GreedyOutput>
where
    F: FnMut(&GreedyIteration<'_>) -> Result<()>,
{
    if !problem.is_parametrically_coercive() {
        return Err(Error::NotCoercive);
    }
    if training_set.is_empty() {
        return Err(Error::Config("greedy training set is empty".into()));
    }
    if !(options.tol > 0.0) || options.n_max == 0 {
        return Err(Error::Config(alloc::format!(
            "greedy needs tol > 0 and n_max >= 1 (tol = {}, n_max = {})",
            options.tol,
            options.n_max
        )));
    }
    for mu in training_set {
        problem.check_arity(mu)?;
    }
    let mut mu = options.mu_1.clone().unwrap_or_else(|| problem.domain().midpoint());
    problem.check_arity(&mu)?;

    let mut basis = ReducedBasis::empty(problem.fingerprint());
    let mut model = ReducedModel::empty(problem, &basis);
    let mut builder = ResidualBuilder::new(problem, &basis)?;
    let mut selected = Vec::new();
    let mut maxima = Vec::new();
    let mut estimators = alloc::vec![0.0; training_set.len()];

    let stopping_reason = loop {
        let truth = solve_fom(problem, &mu)?;
        match basis.orthonormalize(&truth.u, problem.x()) {
            Orthonormalization::Accepted(xi) => basis.push_orthonormal(xi, problem.x())?,
            Orthonormalization::Rejected(dep) => {
                log::warn!(
                    "greedy stagnated at N = {}: snapshot at {} is dependent (remainder {:.3e} of {:.3e})",
                    basis.len(),
                    mu,
                    dep.remainder_norm,
                    dep.input_norm
                );
                break StoppingReason::Stagnation;
            }
        }
        model = extend_projection(&model, problem, &basis)?;
        builder.extend(problem, &basis)?;
        selected.push(mu.clone());

        for (eta, candidate) in estimators.iter_mut().zip(training_set) {
            *eta = certificate(&model, builder.data(), candidate)?.relative_energy_estimate();
        }
        let (best, max) = argmax(&estimators);
        maxima.push(max);
        log::info!("greedy N = {}: max estimator {:.3e} at {}", basis.len(), max, training_set[best]);
        observer(&GreedyIteration {
            basis: &basis,
            model: &model,
            residual: builder.data(),
            training_set,
            estimators: &estimators,
        })?;

        if max <= options.tol {
            break StoppingReason::Tolerance;
        }
        if basis.len() >= options.n_max {
            break StoppingReason::NMax;
        }
        mu = training_set[best].clone();
    };

    let history = GreedyHistory {
        selected_parameters: selected,
        max_estimator_per_iteration: maxima,
        stopping_reason,
        training_set_size: training_set.len(),
    };
    basis.provenance = BasisProvenance::Greedy(history.clone());
    Ok(GreedyOutput {
        basis,
        model,
        residual: builder.into_data(),
        history,
    })
}

/// Index and value of the maximum; NaN counts as larger than everything,
/// and near-ties resolve to the lowest index.
fn argmax(values: &[f64]) -> (usize, f64) {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        let current = values[best];
        if current.is_nan() {
            break;
        }
        if v.is_nan() || v > current + TIE_TOLERANCE * current.abs() {
            best = i;
        }
    }
    (best, values[best])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::make_thermal_block;
    use alloc::vec;

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]).0, 1);
        assert_eq!(argmax(&[1.0, 3.0, 3.0 * (1.0 + 1e-16), 2.0]).0, 1);
        assert_eq!(argmax(&[1.0, 3.0, 3.1]).0, 2);
        assert_eq!(argmax(&[1.0, f64::NAN, 3.1]).0, 1);
    }

    #[test]
    fn single_training_point_is_reproduced() {
        let pb = make_thermal_block(6, 2, 0.1, 10.0).unwrap();
        let mu = ParameterPoint(vec![0.3, 2.0, 5.0, 0.7]);
        let opts = GreedyOptions {
            tol: 1e-6,
            n_max: 10,
            mu_1: Some(mu.clone()),
        };
        let out = greedy_build(&pb, &[mu], &opts).unwrap();
        assert_eq!(out.basis.len(), 1);
        assert_eq!(out.history.stopping_reason, StoppingReason::Tolerance);
        assert!(out.history.max_estimator_per_iteration[0] <= 1e-12);
    }

    #[test]
    fn single_block_needs_one_vector() {
        let pb = make_thermal_block(8, 1, 0.1, 10.0).unwrap();
        let train = default_training_set(&pb, 4);
        let out = greedy_build(&pb, &train, &GreedyOptions::default()).unwrap();
        assert_eq!(out.basis.len(), 1);
        assert!(out.history.max_estimator_per_iteration[0] <= 1e-9);
    }

    #[test]
    fn refuses_non_coercive_and_empty_input() {
        let pb = make_thermal_block(4, 2, 0.1, 10.0).unwrap();
        assert!(matches!(greedy_build(&pb, &[], &GreedyOptions::default()), Err(Error::Config(_))));
        let bad = GreedyOptions {
            n_max: 0,
            ..GreedyOptions::default()
        };
        assert!(greedy_build(&pb, &[pb.mu_bar().clone()], &bad).is_err());
    }

    #[test]
    fn deterministic_and_nested() {
        let pb = make_thermal_block(6, 2, 0.1, 10.0).unwrap();
        let train = default_training_set(&pb, 9);
        let opts = GreedyOptions {
            tol: 1e-4,
            n_max: 8,
            mu_1: None,
        };
        let a = greedy_build(&pb, &train, &opts).unwrap();
        let b = greedy_build(&pb, &train, &opts).unwrap();
        assert_eq!(a.history, b.history);
        assert!(a.basis.orthonormality_error() <= 1e-10);
        let h = &a.history;
        assert_eq!(h.selected_parameters.len(), h.max_estimator_per_iteration.len());
        assert_eq!(h.selected_parameters.len(), a.basis.len());
    }
}
