//! Offline drivers shared by the command line and the tests.

use romkit_core::certify::riesz_offline;
use romkit_core::greedy::{greedy_build, GreedyOptions};
use romkit_core::pod::{pod_basis, PodCriterion, SnapshotSet};
use romkit_core::problem::SamplingStrategy;
use romkit_core::reduced::project;
use romkit_core::{AffineProblem, BasisProvenance, ParameterPoint};

use crate::archive::ModelArchive;
use crate::WorkbenchError;

pub fn greedy_archive(
    problem: AffineProblem,
    training_set: &[ParameterPoint],
    options: &GreedyOptions,
) -> Result<ModelArchive, WorkbenchError> {
    let out = greedy_build(&problem, training_set, options)?;
    Ok(ModelArchive {
        problem,
        basis: out.basis,
        model: out.model,
        residual: out.residual,
    })
}

pub fn pod_archive(problem: AffineProblem, parameters: &[ParameterPoint], criterion: PodCriterion) -> Result<ModelArchive, WorkbenchError> {
    let snapshots = SnapshotSet::collect(&problem, parameters)?;
    let basis = pod_basis(&snapshots, problem.x(), criterion)?;
    if let BasisProvenance::Pod(s) = &basis.provenance {
        log::info!("{} snapshots, rank {}, kept {} modes", snapshots.len(), s.rank, s.retained);
    }
    let model = project(&problem, &basis)?;
    let residual = riesz_offline(&problem, &basis)?;
    Ok(ModelArchive {
        problem,
        basis,
        model,
        residual,
    })
}

pub fn parse_strategy(s: &str) -> Result<SamplingStrategy, WorkbenchError> {
    match s {
        "grid" => Ok(SamplingStrategy::Grid),
        "random" => Ok(SamplingStrategy::Random),
        other => Err(WorkbenchError::Usage(format!("unknown sampling '{other}' (grid or random)"))),
    }
}
