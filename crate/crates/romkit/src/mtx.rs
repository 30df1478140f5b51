//! Matrix Market reading and writing.
//!
//! Supported: `matrix coordinate real {general|symmetric}` for operators and
//! both `coordinate` and `array` storage for vectors (one column). Integer
//! fields are accepted and read as reals.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DVector;
use romkit_core::CsrMatrix;

use crate::WorkbenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
}

struct Header {
    layout: Layout,
    symmetry: Symmetry,
}

fn parse_error(path: &Path, line: usize, msg: impl Into<String>) -> WorkbenchError {
    WorkbenchError::MatrixMarket {
        path: path.to_path_buf(),
        line,
        message: msg.into(),
    }
}

fn parse_header(path: &Path, line: &str) -> Result<Header, WorkbenchError> {
    let words: Vec<String> = line.split_whitespace().map(|w| w.to_ascii_lowercase()).collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(parse_error(path, 1, "expected '%%MatrixMarket matrix <layout> <field> <symmetry>'"));
    }
    let layout = match words[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(parse_error(path, 1, format!("unsupported layout '{other}'"))),
    };
    match words[3].as_str() {
        "real" | "double" | "integer" => {}
        other => return Err(parse_error(path, 1, format!("unsupported field '{other}'"))),
    }
    let symmetry = match words[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => return Err(parse_error(path, 1, format!("unsupported symmetry '{other}'"))),
    };
    Ok(Header { layout, symmetry })
}

struct Parsed {
    rows: usize,
    cols: usize,
    triplets: Vec<(usize, usize, f64)>,
}

fn parse(path: &Path) -> Result<Parsed, WorkbenchError> {
    let text = fs::read_to_string(path).map_err(|e| WorkbenchError::io(path, e))?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines.next().ok_or_else(|| parse_error(path, 1, "empty file"))?;
    let header = parse_header(path, first)?;
    let mut body = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });

    let (size_line, size) = body.next().ok_or_else(|| parse_error(path, 2, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|e| parse_error(path, size_line, format!("bad size line: {e}")))?;
    let expected = if header.layout == Layout::Coordinate { 3 } else { 2 };
    if dims.len() != expected {
        return Err(parse_error(path, size_line, format!("size line needs {expected} integers")));
    }
    let (rows, cols) = (dims[0], dims[1]);
    if header.symmetry == Symmetry::Symmetric && rows != cols {
        return Err(parse_error(path, size_line, "symmetric storage of a non-square matrix"));
    }

    let mut triplets = Vec::new();
    match header.layout {
        Layout::Coordinate => {
            let nnz = dims[2];
            triplets.reserve(nnz);
            let mut count = 0;
            for (line, entry) in body.by_ref().take(nnz) {
                count += 1;
                let mut it = entry.split_whitespace();
                let mut next = |what: &str| it.next().ok_or_else(|| parse_error(path, line, format!("missing {what}")));
                let i: usize = next("row")?.parse().map_err(|e| parse_error(path, line, format!("bad row: {e}")))?;
                let j: usize = next("column")?
                    .parse()
                    .map_err(|e| parse_error(path, line, format!("bad column: {e}")))?;
                let v: f64 = next("value")?
                    .parse()
                    .map_err(|e| parse_error(path, line, format!("bad value: {e}")))?;
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(parse_error(path, line, format!("entry ({i}, {j}) outside {rows}x{cols}")));
                }
                triplets.push((i - 1, j - 1, v));
                if header.symmetry == Symmetry::Symmetric && i != j {
                    triplets.push((j - 1, i - 1, v));
                }
            }
            if count != nnz {
                return Err(parse_error(path, size_line, format!("declared {nnz} entries, found {count}")));
            }
        }
        Layout::Array => {
            // column-major; symmetric arrays store the lower triangle
            let mut positions = Vec::new();
            for j in 0..cols {
                let start = if header.symmetry == Symmetry::Symmetric { j } else { 0 };
                for i in start..rows {
                    positions.push((i, j));
                }
            }
            let mut count = 0;
            for ((line, entry), (i, j)) in body.by_ref().zip(&positions) {
                let v: f64 = entry
                    .trim()
                    .parse()
                    .map_err(|e| parse_error(path, line, format!("bad value: {e}")))?;
                triplets.push((*i, *j, v));
                if header.symmetry == Symmetry::Symmetric && i != j {
                    triplets.push((*j, *i, v));
                }
                count += 1;
            }
            if count != positions.len() {
                return Err(parse_error(
                    path,
                    size_line,
                    format!("expected {} values, found {count}", positions.len()),
                ));
            }
        }
    }
    if let Some((line, _)) = body.next() {
        return Err(parse_error(path, line, "trailing data after the declared entries"));
    }
    Ok(Parsed { rows, cols, triplets })
}

pub fn read_matrix(path: &Path) -> Result<CsrMatrix, WorkbenchError> {
    let p = parse(path)?;
    CsrMatrix::from_triplets(p.rows, p.cols, &p.triplets).map_err(WorkbenchError::from)
}

/// Reads an `n × 1` (or `1 × n`) matrix as a vector.
pub fn read_vector(path: &Path) -> Result<DVector<f64>, WorkbenchError> {
    let p = parse(path)?;
    let n = match (p.rows, p.cols) {
        (n, 1) | (1, n) => n,
        (r, c) => return Err(parse_error(path, 2, format!("expected a vector, found a {r}x{c} matrix"))),
    };
    let mut v = DVector::zeros(n);
    for (i, j, x) in p.triplets {
        v[i.max(j)] += x;
    }
    Ok(v)
}

/// Writes `m` in coordinate format. Symmetric matrices are stored as their
/// lower triangle.
pub fn write_matrix(path: &Path, m: &CsrMatrix, symmetric: bool) -> Result<(), WorkbenchError> {
    let entries: Vec<(usize, usize, f64)> = m.triplets().filter(|&(i, j, _)| !symmetric || i >= j).collect();
    let kind = if symmetric { "symmetric" } else { "general" };
    let mut out = format!(
        "%%MatrixMarket matrix coordinate real {kind}\n{} {} {}\n",
        m.nrows(),
        m.ncols(),
        entries.len()
    );
    for (i, j, v) in entries {
        // `{:e}` is the shortest representation that round-trips
        let _ = writeln!(out, "{} {} {:e}", i + 1, j + 1, v);
    }
    fs::write(path, out).map_err(|e| WorkbenchError::io(path, e))
}

pub fn write_vector(path: &Path, v: &DVector<f64>) -> Result<(), WorkbenchError> {
    let mut out = format!("%%MatrixMarket matrix array real general\n{} 1\n", v.len());
    for x in v.iter() {
        let _ = writeln!(out, "{x:e}");
    }
    fs::write(path, out).map_err(|e| WorkbenchError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_coordinate_is_expanded() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.mtx");
        fs::write(
            &path,
            "%%MatrixMarket matrix coordinate real symmetric\n% comment\n3 3 4\n1 1 2.0\n2 1 -1\n2 2 2\n3 3 1.5e0\n",
        )
        .unwrap();
        let a = read_matrix(&path).unwrap();
        assert_eq!(a.get(0, 1), -1.0);
        assert_eq!(a.get(1, 0), -1.0);
        assert_eq!(a.nnz(), 5);
    }

    #[test]
    fn roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 0.1), (1, 0, 1.0 / 3.0), (0, 1, 1.0 / 3.0), (1, 1, 1e-300)]).unwrap();
        let path = dir.path().join("a.mtx");
        write_matrix(&path, &a, true).unwrap();
        assert_eq!(read_matrix(&path).unwrap(), a);
        let v = DVector::from_vec(vec![core::f64::consts::PI, -0.0, 7.0]);
        let vp = dir.path().join("v.mtx");
        write_vector(&vp, &v).unwrap();
        assert_eq!(read_vector(&vp).unwrap(), v);
    }

    #[test]
    fn malformed_files_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.mtx");
        fs::write(&path, "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n").unwrap();
        let err = read_matrix(&path).unwrap_err().to_string();
        assert!(err.contains("bad.mtx") && err.contains("line 3"), "{err}");
        fs::write(&path, "%%MatrixMarket matrix coordinate complex general\n").unwrap();
        assert!(read_matrix(&path).is_err());
    }
}
