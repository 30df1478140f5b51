//! Affine problems assembled elsewhere, described by a JSON manifest that
//! points at Matrix Market files.
//!
//! ```json
//! { "p": 1, "domain": [[0.1, 10.0, "log"]], "mu_bar": [1.0],
//!   "theta_a": ["mu[0]"], "theta_f": ["1"],
//!   "A": ["a0.mtx"], "f": ["f0.mtx"], "X": "x.mtx" }
//! ```
//!
//! Relative paths are resolved against the manifest's directory. `X` is
//! optional and defaults to `Σ_q θ_a^q(μ̄) A_q`.

use std::fs;
use std::path::{Path, PathBuf};

use romkit_core::problem::{AffineParts, Interval};
use romkit_core::{AffineProblem, ParameterDomain, ParameterPoint, Scale, ThetaExpression};
use serde::{Deserialize, Serialize};

use crate::{mtx, WorkbenchError};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalManifest {
    pub p: usize,
    pub domain: Vec<(f64, f64, String)>,
    pub mu_bar: Vec<f64>,
    pub theta_a: Vec<String>,
    pub theta_f: Vec<String>,
    #[serde(rename = "A")]
    pub a: Vec<String>,
    pub f: Vec<String>,
    #[serde(rename = "X", default, skip_serializing_if = "Option::is_none")]
    pub x: Option<String>,
}

fn manifest_error(path: &Path, message: impl Into<String>) -> WorkbenchError {
    WorkbenchError::Manifest {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn parse_scale(path: &Path, s: &str) -> Result<Scale, WorkbenchError> {
    match s {
        "lin" | "linear" => Ok(Scale::Linear),
        "log" => Ok(Scale::Log),
        other => Err(manifest_error(
            path,
            format!("unknown sampling scale '{other}' (use \"lin\" or \"log\")"),
        )),
    }
}

fn scale_name(s: Scale) -> &'static str {
    match s {
        Scale::Linear => "lin",
        Scale::Log => "log",
    }
}

pub fn read_manifest(path: &Path) -> Result<ExternalManifest, WorkbenchError> {
    let text = fs::read_to_string(path).map_err(|e| WorkbenchError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| manifest_error(path, e.to_string()))
}

pub fn load_external(manifest_path: &Path) -> Result<AffineProblem, WorkbenchError> {
    let m = read_manifest(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let resolve = |rel: &str| -> PathBuf { base.join(rel) };

    if m.domain.len() != m.p || m.mu_bar.len() != m.p {
        return Err(manifest_error(
            manifest_path,
            format!(
                "p = {} but domain has {} intervals and mu_bar {} entries",
                m.p,
                m.domain.len(),
                m.mu_bar.len()
            ),
        ));
    }
    if m.a.len() != m.theta_a.len() || m.f.len() != m.theta_f.len() {
        return Err(manifest_error(
            manifest_path,
            format!(
                "{} operators for {} theta_a, {} loads for {} theta_f",
                m.a.len(),
                m.theta_a.len(),
                m.f.len(),
                m.theta_f.len()
            ),
        ));
    }
    let intervals = m
        .domain
        .iter()
        .map(|(lo, hi, s)| Ok(Interval::new(*lo, *hi, parse_scale(manifest_path, s)?)?))
        .collect::<Result<Vec<_>, WorkbenchError>>()?;
    let parse_all = |exprs: &[String]| -> Result<Vec<ThetaExpression>, WorkbenchError> {
        exprs.iter().map(|e| Ok(ThetaExpression::parse(e, m.p)?)).collect()
    };
    let theta_a = parse_all(&m.theta_a)?;
    let theta_f = parse_all(&m.theta_f)?;
    let a_blocks = m.a.iter().map(|p| mtx::read_matrix(&resolve(p))).collect::<Result<Vec<_>, _>>()?;
    let f_blocks = m.f.iter().map(|p| mtx::read_vector(&resolve(p))).collect::<Result<Vec<_>, _>>()?;
    let x = m.x.as_deref().map(|p| mtx::read_matrix(&resolve(p))).transpose()?;

    Ok(AffineProblem::new(AffineParts {
        a_blocks,
        f_blocks,
        theta_a,
        theta_f,
        domain: ParameterDomain::new(intervals),
        mu_bar: ParameterPoint(m.mu_bar),
        x,
    })?)
}

/// Writes `problem` as a manifest plus Matrix Market files into `dir`,
/// including the inner-product matrix. Loading the result reproduces the
/// problem bit for bit.
pub fn write_external(problem: &AffineProblem, dir: &Path) -> Result<PathBuf, WorkbenchError> {
    fs::create_dir_all(dir).map_err(|e| WorkbenchError::io(dir, e))?;
    let mut a = Vec::new();
    for (q, block) in problem.a_blocks().iter().enumerate() {
        let name = format!("a{q}.mtx");
        mtx::write_matrix(&dir.join(&name), block, false)?;
        a.push(name);
    }
    let mut f = Vec::new();
    for (q, block) in problem.f_blocks().iter().enumerate() {
        let name = format!("f{q}.mtx");
        mtx::write_vector(&dir.join(&name), block)?;
        f.push(name);
    }
    mtx::write_matrix(&dir.join("x.mtx"), problem.x(), false)?;
    let manifest = ExternalManifest {
        p: problem.p(),
        domain: problem
            .domain()
            .intervals
            .iter()
            .map(|iv| (iv.lo, iv.hi, scale_name(iv.scale).to_string()))
            .collect(),
        mu_bar: problem.mu_bar().values().to_vec(),
        theta_a: problem.theta_a().iter().map(ToString::to_string).collect(),
        theta_f: problem.theta_f().iter().map(ToString::to_string).collect(),
        a,
        f,
        x: Some("x.mtx".into()),
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|e| WorkbenchError::io(&path, e))?;
    Ok(path)
}
