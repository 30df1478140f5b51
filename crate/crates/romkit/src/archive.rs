//! Model archives: a directory with `manifest.json` and binary payloads.
//!
//! Payload layout (`.rbm`): the magic bytes `RBM1`, the row count and the
//! column count as little-endian `u64`, then `rows · cols` little-endian
//! binary64 values in row-major order. The manifest records every
//! payload's shape and FNV-1a 64 checksum.
//!
//! The online loader reads only reduced-size payloads and records each read
//! in an access log, so callers can check that the basis never leaves disk.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use romkit_core::certify::ResidualData;
use romkit_core::fingerprint::fnv1a64;
use romkit_core::problem::{make_thermal_block, Interval, ThermalBlockConfig};
use romkit_core::reduced::ReducedModelParts;
use romkit_core::{
    AffineProblem, BasisProvenance, GreedyHistory, ParameterDomain, ParameterPoint, PodSpectrum, ReducedBasis, ReducedModel, Scale,
    StoppingReason, ThetaExpression,
};
use serde::{Deserialize, Serialize};

use crate::external::{load_external, write_external, MANIFEST_FILE};
use crate::WorkbenchError;

pub const FORMAT_VERSION: &str = "1";
pub const MAGIC: [u8; 4] = *b"RBM1";
const HEADER_LEN: usize = 20;
const PROBLEM_DIR: &str = "problem";

pub const BASIS_PAYLOAD: &str = "basis";
pub const RESIDUAL_PAYLOAD: &str = "residual_factor";
pub const POD_PAYLOAD: &str = "pod_eigenvectors";

pub fn encode_payload(rows: usize, cols: usize, row_major: &[f64]) -> Vec<u8> {
    assert_eq!(rows * cols, row_major.len(), "payload shape does not match its data");
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * row_major.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&(rows as u64).to_le_bytes());
    out.extend_from_slice(&(cols as u64).to_le_bytes());
    for v in row_major {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn encode_matrix(m: &DMatrix<f64>) -> Vec<u8> {
    // DMatrix is column-major; the transpose's storage is row-major
    encode_payload(m.nrows(), m.ncols(), m.transpose().as_slice())
}

/// Decodes a payload into `(rows, cols, row-major values)`.
pub fn decode_payload(bytes: &[u8], file: &Path) -> Result<(usize, usize, Vec<f64>), WorkbenchError> {
    let bad = |message: String| WorkbenchError::Payload {
        file: file.to_path_buf(),
        message,
    };
    if bytes.len() < HEADER_LEN || bytes[..4] != MAGIC {
        return Err(bad("missing RBM1 header".into()));
    }
    let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
    let (rows, cols) = (word(4) as usize, word(12) as usize);
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| bad(format!("shape {rows}x{cols} overflows")))?;
    if bytes.len() - HEADER_LEN != count.saturating_mul(8) {
        return Err(bad(format!(
            "{rows}x{cols} payload needs {} data bytes, found {}",
            count * 8,
            bytes.len() - HEADER_LEN
        )));
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((rows, cols, values))
}

pub fn write_matrix_payload(path: &Path, m: &DMatrix<f64>) -> Result<u64, WorkbenchError> {
    let bytes = encode_matrix(m);
    fs::write(path, &bytes).map_err(|e| WorkbenchError::io(path, e))?;
    Ok(fnv1a64(&bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProblemDescriptor {
    Thermal {
        n: usize,
        blocks: usize,
        mu_lo: f64,
        mu_hi: f64,
    },
    /// A copy of the problem lives under `problem/` inside the archive.
    External {
        manifest: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum ProvenanceRecord {
    Greedy {
        selected_parameters: Vec<Vec<f64>>,
        max_estimator_per_iteration: Vec<f64>,
        stopping_reason: String,
        training_set_size: usize,
    },
    Pod {
        eigenvalues: Vec<f64>,
        retained: usize,
        rank: usize,
        clamped: f64,
    },
    Manual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayloadEntry {
    pub file: String,
    pub rows: usize,
    pub cols: usize,
    /// FNV-1a 64 of the payload bytes, 16 hex digits.
    pub checksum: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveManifest {
    pub format_version: String,
    pub problem: ProblemDescriptor,
    pub problem_fingerprint: String,
    pub basis_fingerprints: Vec<String>,
    pub n: usize,
    pub n_delta: usize,
    pub q_a: usize,
    pub q_f: usize,
    pub theta_a: Vec<String>,
    pub theta_f: Vec<String>,
    pub domain: Vec<(f64, f64, String)>,
    pub mu_bar: Vec<f64>,
    pub parametrically_coercive: bool,
    pub provenance: ProvenanceRecord,
    pub payloads: BTreeMap<String, PayloadEntry>,
}

/// Everything produced offline, plus the problem it belongs to.
#[derive(Debug, Clone)]
pub struct ModelArchive {
    pub problem: AffineProblem,
    pub basis: ReducedBasis,
    pub model: ReducedModel,
    pub residual: ResidualData,
}

fn hex(v: u64) -> String {
    format!("{v:016x}")
}

fn unhex(path: &Path, s: &str) -> Result<u64, WorkbenchError> {
    u64::from_str_radix(s, 16).map_err(|_| WorkbenchError::Manifest {
        path: path.to_path_buf(),
        message: format!("bad fingerprint '{s}'"),
    })
}

fn a_name(q: usize) -> String {
    format!("a_rb_{q}")
}

fn f_name(q: usize) -> String {
    format!("f_rb_{q}")
}

fn provenance_record(p: &BasisProvenance) -> ProvenanceRecord {
    match p {
        BasisProvenance::Greedy(h) => ProvenanceRecord::Greedy {
            selected_parameters: h.selected_parameters.iter().map(|m| m.0.clone()).collect(),
            max_estimator_per_iteration: h.max_estimator_per_iteration.clone(),
            stopping_reason: h.stopping_reason.as_str().into(),
            training_set_size: h.training_set_size,
        },
        BasisProvenance::Pod(s) => ProvenanceRecord::Pod {
            eigenvalues: s.eigenvalues.clone(),
            retained: s.retained,
            rank: s.rank,
            clamped: s.clamped,
        },
        BasisProvenance::Manual => ProvenanceRecord::Manual,
    }
}

fn scale_name(s: Scale) -> &'static str {
    match s {
        Scale::Linear => "lin",
        Scale::Log => "log",
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), WorkbenchError> {
    let text = serde_json::to_string_pretty(value).expect("manifest serializes");
    fs::write(path, text + "\n").map_err(|e| WorkbenchError::io(path, e))
}

/// Writes the archive into `dir`, creating it if needed. Saving the same
/// archive twice yields identical bytes.
pub fn save_model(archive: &ModelArchive, dir: &Path) -> Result<ArchiveManifest, WorkbenchError> {
    let ModelArchive {
        problem,
        basis,
        model,
        residual,
    } = archive;
    fs::create_dir_all(dir).map_err(|e| WorkbenchError::io(dir, e))?;
    let mut payloads = BTreeMap::new();
    let mut put = |name: String, m: DMatrix<f64>| -> Result<(), WorkbenchError> {
        let file = format!("{name}.rbm");
        let checksum = write_matrix_payload(&dir.join(&file), &m)?;
        payloads.insert(
            name,
            PayloadEntry {
                file,
                rows: m.nrows(),
                cols: m.ncols(),
                checksum: hex(checksum),
            },
        );
        Ok(())
    };

    let n = basis.len();
    let n_delta = problem.dim();
    let mut basis_matrix = DMatrix::zeros(n, if n == 0 { 0 } else { n_delta });
    for (i, xi) in basis.vectors().iter().enumerate() {
        basis_matrix.set_row(i, &xi.transpose());
    }
    put(BASIS_PAYLOAD.into(), basis_matrix)?;
    for (q, a) in model.a_rb().iter().enumerate() {
        put(a_name(q), a.clone())?;
    }
    for (q, f) in model.f_rb().iter().enumerate() {
        put(f_name(q), DMatrix::from_column_slice(f.len(), 1, f.as_slice()))?;
    }
    put(RESIDUAL_PAYLOAD.into(), residual.factor().clone())?;
    if let BasisProvenance::Pod(s) = &basis.provenance {
        put(POD_PAYLOAD.into(), s.eigenvectors.clone())?;
    }

    let descriptor = match problem.thermal_config() {
        Some(ThermalBlockConfig { n, blocks, mu_lo, mu_hi }) => ProblemDescriptor::Thermal { n, blocks, mu_lo, mu_hi },
        None => {
            write_external(problem, &dir.join(PROBLEM_DIR))?;
            ProblemDescriptor::External {
                manifest: format!("{PROBLEM_DIR}/{MANIFEST_FILE}"),
            }
        }
    };

    let manifest = ArchiveManifest {
        format_version: FORMAT_VERSION.into(),
        problem: descriptor,
        problem_fingerprint: hex(model.problem_fingerprint()),
        basis_fingerprints: model.basis_fingerprints().iter().map(|&f| hex(f)).collect(),
        n,
        n_delta,
        q_a: model.q_a(),
        q_f: model.q_f(),
        theta_a: model.theta_a().iter().map(ToString::to_string).collect(),
        theta_f: model.theta_f().iter().map(ToString::to_string).collect(),
        domain: model
            .domain()
            .intervals
            .iter()
            .map(|iv| (iv.lo, iv.hi, scale_name(iv.scale).into()))
            .collect(),
        mu_bar: model.mu_bar().values().to_vec(),
        parametrically_coercive: model.is_parametrically_coercive(),
        provenance: provenance_record(&basis.provenance),
        payloads,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// One payload read, as recorded by [`ArchiveReader`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PayloadAccess {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

/// Reads payloads named in a manifest, verifying checksums and shapes, and
/// logs every access.
#[derive(Debug)]
pub struct ArchiveReader {
    dir: PathBuf,
    manifest: ArchiveManifest,
    log: RefCell<Vec<PayloadAccess>>,
}

impl ArchiveReader {
    pub fn open(dir: &Path) -> Result<Self, WorkbenchError> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| WorkbenchError::io(&path, e))?;
        let raw: serde_json::Value = serde_json::from_str(&text).map_err(|e| WorkbenchError::Manifest {
            path: path.clone(),
            message: e.to_string(),
        })?;
        // check the version before the schema so newer archives get a clear message
        match raw.get("format_version").and_then(|v| v.as_str()) {
            Some(FORMAT_VERSION) => {}
            Some(other) => return Err(WorkbenchError::UnsupportedVersion { found: other.into() }),
            None => {
                return Err(WorkbenchError::Manifest {
                    path,
                    message: "missing format_version".into(),
                })
            }
        }
        let manifest = serde_json::from_value(raw).map_err(|e| WorkbenchError::Manifest {
            path: path.clone(),
            message: e.to_string(),
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
            log: RefCell::new(Vec::new()),
        })
    }

    pub fn manifest(&self) -> &ArchiveManifest {
        &self.manifest
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn access_log(&self) -> Vec<PayloadAccess> {
        self.log.borrow().clone()
    }

    pub fn read(&self, name: &str) -> Result<DMatrix<f64>, WorkbenchError> {
        let entry = self.manifest.payloads.get(name).ok_or_else(|| WorkbenchError::Manifest {
            path: self.dir.join(MANIFEST_FILE),
            message: format!("no payload named '{name}'"),
        })?;
        let path = self.dir.join(&entry.file);
        let bytes = fs::read(&path).map_err(|e| WorkbenchError::io(&path, e))?;
        let found = hex(fnv1a64(&bytes));
        if found != entry.checksum {
            return Err(WorkbenchError::Checksum {
                file: path,
                expected: entry.checksum.clone(),
                found,
            });
        }
        let (rows, cols, values) = decode_payload(&bytes, &path)?;
        if (rows, cols) != (entry.rows, entry.cols) {
            return Err(WorkbenchError::Payload {
                file: path,
                message: format!("shape {rows}x{cols} disagrees with the manifest's {}x{}", entry.rows, entry.cols),
            });
        }
        self.log.borrow_mut().push(PayloadAccess {
            name: name.into(),
            rows,
            cols,
        });
        Ok(DMatrix::from_row_slice(rows, cols, &values))
    }

    fn manifest_error(&self, message: String) -> WorkbenchError {
        WorkbenchError::Manifest {
            path: self.dir.join(MANIFEST_FILE),
            message,
        }
    }

    fn fingerprints(&self) -> Result<(u64, Vec<u64>), WorkbenchError> {
        let path = self.dir.join(MANIFEST_FILE);
        let problem = unhex(&path, &self.manifest.problem_fingerprint)?;
        let basis = self
            .manifest
            .basis_fingerprints
            .iter()
            .map(|s| unhex(&path, s))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((problem, basis))
    }

    /// The reduced model and residual data; touches no truth-size payload.
    pub fn reduced(&self) -> Result<(ReducedModel, ResidualData), WorkbenchError> {
        let m = &self.manifest;
        let (problem_fingerprint, basis_fingerprints) = self.fingerprints()?;
        let p = m.domain.len();
        let parse = |exprs: &[String]| -> Result<Vec<ThetaExpression>, WorkbenchError> {
            exprs.iter().map(|e| Ok(ThetaExpression::parse(e, p)?)).collect()
        };
        let intervals = m
            .domain
            .iter()
            .map(|(lo, hi, s)| {
                let scale = match s.as_str() {
                    "lin" => Scale::Linear,
                    "log" => Scale::Log,
                    other => return Err(self.manifest_error(format!("unknown scale '{other}'"))),
                };
                Ok(Interval::new(*lo, *hi, scale)?)
            })
            .collect::<Result<Vec<_>, WorkbenchError>>()?;
        let a_rb = (0..m.q_a).map(|q| self.read(&a_name(q))).collect::<Result<Vec<_>, _>>()?;
        let f_rb = (0..m.q_f)
            .map(|q| self.read(&f_name(q)).map(|f| DVector::from_column_slice(f.as_slice())))
            .collect::<Result<Vec<_>, _>>()?;
        let model = ReducedModel::from_parts(ReducedModelParts {
            a_rb,
            f_rb,
            theta_a: parse(&m.theta_a)?,
            theta_f: parse(&m.theta_f)?,
            domain: ParameterDomain::new(intervals),
            mu_bar: ParameterPoint(m.mu_bar.clone()),
            parametrically_coercive: m.parametrically_coercive,
            problem_fingerprint,
            basis_fingerprints: basis_fingerprints.clone(),
        })?;
        let residual = ResidualData::from_parts(m.q_a, m.q_f, self.read(RESIDUAL_PAYLOAD)?, problem_fingerprint, basis_fingerprints)?;
        Ok((model, residual))
    }

    /// Rebuilds the problem from the embedded descriptor.
    pub fn problem(&self) -> Result<AffineProblem, WorkbenchError> {
        let problem = match &self.manifest.problem {
            ProblemDescriptor::Thermal { n, blocks, mu_lo, mu_hi } => make_thermal_block(*n, *blocks, *mu_lo, *mu_hi)?,
            ProblemDescriptor::External { manifest } => load_external(&self.dir.join(manifest))?,
        };
        let (expected, _) = self.fingerprints()?;
        if problem.fingerprint() != expected {
            return Err(romkit_core::Error::Fingerprint {
                expected,
                found: problem.fingerprint(),
            }
            .into());
        }
        Ok(problem)
    }

    pub fn provenance(&self) -> Result<BasisProvenance, WorkbenchError> {
        Ok(match &self.manifest.provenance {
            ProvenanceRecord::Greedy {
                selected_parameters,
                max_estimator_per_iteration,
                stopping_reason,
                training_set_size,
            } => BasisProvenance::Greedy(GreedyHistory {
                selected_parameters: selected_parameters.iter().cloned().map(ParameterPoint).collect(),
                max_estimator_per_iteration: max_estimator_per_iteration.clone(),
                stopping_reason: match stopping_reason.as_str() {
                    "tolerance" => StoppingReason::Tolerance,
                    "n_max" => StoppingReason::NMax,
                    "stagnation" => StoppingReason::Stagnation,
                    other => return Err(self.manifest_error(format!("unknown stopping reason '{other}'"))),
                },
                training_set_size: *training_set_size,
            }),
            ProvenanceRecord::Pod {
                eigenvalues,
                retained,
                rank,
                clamped,
            } => BasisProvenance::Pod(PodSpectrum {
                eigenvalues: eigenvalues.clone(),
                eigenvectors: self.read(POD_PAYLOAD)?,
                retained: *retained,
                rank: *rank,
                clamped: *clamped,
            }),
            ProvenanceRecord::Manual => BasisProvenance::Manual,
        })
    }

    /// Loads the basis payload; validation and re-saving only.
    pub fn basis(&self, problem: &AffineProblem) -> Result<ReducedBasis, WorkbenchError> {
        let b = self.read(BASIS_PAYLOAD)?;
        if b.nrows() > 0 && b.ncols() != problem.dim() {
            return Err(self.manifest_error(format!("basis vectors have length {}, problem has {}", b.ncols(), problem.dim())));
        }
        let vectors = b.row_iter().map(|r| r.transpose()).collect();
        let basis = ReducedBasis::from_orthonormal(problem.fingerprint(), vectors, problem.x(), self.provenance()?)?;
        let (_, fingerprints) = self.fingerprints()?;
        if fingerprints.last() != Some(&basis.fingerprint()) {
            return Err(romkit_core::Error::Fingerprint {
                expected: fingerprints.last().copied().unwrap_or(0),
                found: basis.fingerprint(),
            }
            .into());
        }
        Ok(basis)
    }
}

/// Online view of an archive: the reduced model, residual data and the
/// log of payloads read to build them.
pub struct OnlineModel {
    pub model: ReducedModel,
    pub residual: ResidualData,
    pub access_log: Vec<PayloadAccess>,
}

pub fn load_online(dir: &Path) -> Result<OnlineModel, WorkbenchError> {
    let reader = ArchiveReader::open(dir)?;
    let (model, residual) = reader.reduced()?;
    Ok(OnlineModel {
        model,
        residual,
        access_log: reader.access_log(),
    })
}

pub fn load_model(dir: &Path) -> Result<ModelArchive, WorkbenchError> {
    let reader = ArchiveReader::open(dir)?;
    let problem = reader.problem()?;
    let basis = reader.basis(&problem)?;
    let (model, residual) = reader.reduced()?;
    Ok(ModelArchive {
        problem,
        basis,
        model,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn payload_layout_is_exact() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let bytes = encode_matrix(&m);
        assert_eq!(&bytes[..4], &[0x52, 0x42, 0x4D, 0x31]);
        assert_eq!(&bytes[4..12], &2u64.to_le_bytes());
        assert_eq!(&bytes[12..20], &3u64.to_le_bytes());
        assert_eq!(&bytes[20..28], &1.0f64.to_le_bytes());
        assert_eq!(&bytes[28..36], &2.0f64.to_le_bytes());
        assert_eq!(bytes.len(), 20 + 6 * 8);
        let (r, c, v) = decode_payload(&bytes, Path::new("m.rbm")).unwrap();
        assert_eq!(DMatrix::from_row_slice(r, c, &v), m);
        assert!(decode_payload(&bytes[..30], Path::new("m.rbm")).is_err());
    }

    #[test]
    fn empty_payload() {
        let bytes = encode_matrix(&DMatrix::zeros(0, 0));
        assert_eq!(bytes.len(), 20);
        assert_eq!(decode_payload(&bytes, Path::new("e.rbm")).unwrap(), (0, 0, vec![]));
    }
}
