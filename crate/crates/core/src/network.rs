//! Synthetic network generation and persistence.
//!
//! Generation is exact and counter-based: covariate coordinates, community
//! labels, and edge indicators are each pure functions of
//! `(seed, purpose, indices)`. A consequence worth spelling out: sampling an
//! arbitrary sub-block of the adjacency matrix through
//! [`sample_adjacency_block`] yields bitwise the same entries as materializing
//! the full matrix and slicing it. The Monte Carlo harness relies on this to
//! run large-`N` replications without ever holding an `N x N` matrix.
//!
//! Undirected structure is enforced at the source: each unordered pair is
//! drawn once in canonical orientation (smaller index first) and mirrored;
//! the diagonal is structurally zero.

use std::io::{BufRead, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::rng::{self, purpose};

/// How edge indicators are produced.
#[derive(Debug, Clone, Copy)]
pub enum EdgeMode {
    /// Independent Bernoulli draws keyed on `(seed, pair)`.
    Bernoulli { seed: u64 },
    /// Deterministic rounding of the expected adjacency: an edge is present
    /// iff its probability is at least 1/2. Used by noiseless diagnostics.
    RoundedExpectation,
}

/// A fully materialized sample from a covariate block model.
#[derive(Debug, Clone)]
pub struct Network {
    /// `N x d` covariates.
    pub covariates: Array2<f64>,
    /// Hidden community labels in `0..G`.
    pub labels: Vec<usize>,
    /// `N x N` symmetric 0/1 adjacency with zero diagonal.
    pub adjacency: Array2<u8>,
    /// Seed the network was generated from.
    pub seed: u64,
}

impl Network {
    pub fn n(&self) -> usize {
        self.covariates.nrows()
    }

    /// Generate `n` nodes from `spec` with the given seed.
    pub fn generate(spec: &ModelSpec, n: usize, seed: u64) -> Result<Network> {
        let covariates = sample_covariates(spec, n, seed);
        let labels = sample_communities(spec, &covariates, seed)?;
        let adjacency =
            sample_adjacency(spec, &covariates, &labels, EdgeMode::Bernoulli { seed })?;
        Ok(Network {
            covariates,
            labels,
            adjacency,
            seed,
        })
    }
}

/// Draw covariates i.i.d. from the model's covariate law.
pub fn sample_covariates(spec: &ModelSpec, n: usize, seed: u64) -> Array2<f64> {
    let support = spec.covariates.support();
    let mut x = Array2::zeros((n, spec.dim));
    for i in 0..n {
        for c in 0..spec.dim {
            let u = rng::unit_from_key(&[seed, purpose::COVARIATES, i as u64, c as u64]);
            x[[i, c]] = support.lower[c] + u * (support.upper[c] - support.lower[c]);
        }
    }
    x
}

/// Draw one community label per node from `pi(x(i))` by inverse CDF.
///
/// Each `pi(x(i))` must lie on the simplex; a defective vector aborts with the
/// offending node index rather than silently renormalizing.
pub fn sample_communities(
    spec: &ModelSpec,
    covariates: &Array2<f64>,
    seed: u64,
) -> Result<Vec<usize>> {
    let n = covariates.nrows();
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let x = covariates.row(i);
        let pi = spec.pi(x.as_slice().expect("row is contiguous"));
        let sum: f64 = pi.iter().sum();
        if pi.iter().any(|p| *p < 0.0) || (sum - 1.0).abs() > 1e-12 {
            return Err(Error::NotASimplex { node: i, sum });
        }
        let u = rng::unit_from_key(&[seed, purpose::LABELS, i as u64]);
        // Inverse CDF walk; the final community absorbs any rounding slack.
        let mut acc = 0.0;
        let mut g = spec.groups - 1;
        for (h, p) in pi.iter().enumerate() {
            acc += p;
            if u < acc {
                g = h;
                break;
            }
        }
        labels.push(g);
    }
    Ok(labels)
}

/// The edge indicator for one unordered pair, in canonical orientation.
///
/// Returns 0 on the diagonal. The probability is always evaluated with the
/// smaller index first so both orientations agree bitwise.
pub fn edge_indicator(
    spec: &ModelSpec,
    covariates: &Array2<f64>,
    labels: &[usize],
    mode: EdgeMode,
    i: usize,
    j: usize,
) -> Result<u8> {
    if i == j {
        return Ok(0);
    }
    let (a, b) = if i < j { (i, j) } else { (j, i) };
    let xa = covariates.row(a);
    let xb = covariates.row(b);
    let p = spec.edge_probability(
        labels[a],
        labels[b],
        xa.as_slice().expect("row is contiguous"),
        xb.as_slice().expect("row is contiguous"),
    )?;
    Ok(match mode {
        EdgeMode::Bernoulli { seed } => {
            let u = rng::unit_from_key(&[seed, purpose::EDGES, a as u64, b as u64]);
            u8::from(u < p)
        }
        EdgeMode::RoundedExpectation => u8::from(p >= 0.5),
    })
}

/// Sample the full symmetric adjacency matrix.
pub fn sample_adjacency(
    spec: &ModelSpec,
    covariates: &Array2<f64>,
    labels: &[usize],
    mode: EdgeMode,
) -> Result<Array2<u8>> {
    let n = covariates.nrows();
    if labels.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} nodes",
            labels.len(),
            n
        )));
    }
    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let e = edge_indicator(spec, covariates, labels, mode, i, j)?;
            a[[i, j]] = e;
            a[[j, i]] = e;
        }
    }
    Ok(a)
}

/// Sample only the `rows x cols` block of the adjacency matrix, bitwise equal
/// to the same block of [`sample_adjacency`]'s output.
pub fn sample_adjacency_block(
    spec: &ModelSpec,
    covariates: &Array2<f64>,
    labels: &[usize],
    mode: EdgeMode,
    rows: &[usize],
    cols: &[usize],
) -> Result<Array2<u8>> {
    let mut a = Array2::zeros((rows.len(), cols.len()));
    for (r, &i) in rows.iter().enumerate() {
        for (c, &j) in cols.iter().enumerate() {
            a[[r, c]] = edge_indicator(spec, covariates, labels, mode, i, j)?;
        }
    }
    Ok(a)
}

// ---------------------------------------------------------------------------
// Persistence.
//
// edges.csv       header "i,j"; one row per undirected edge with i < j,
//                 sorted; 0-based indices.
// covariates.csv  header "x0,...,x{d-1}"; one row per node. Floats printed
//                 with Rust's shortest round-trip formatting, so reading the
//                 file back reproduces the doubles bit for bit.
// labels.csv      header "g"; one 0-based community per node. Optional.
// model.json      the ModelSpec, pretty-printed.
// ---------------------------------------------------------------------------

/// Write `edges.csv`, `covariates.csv`, `labels.csv`, and `model.json` into
/// `dir` (created if needed).
pub fn write_network(dir: &Path, network: &Network, spec: &ModelSpec) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_edges(&dir.join("edges.csv"), &network.adjacency)?;
    write_covariates(&dir.join("covariates.csv"), &network.covariates)?;
    write_labels(&dir.join("labels.csv"), &network.labels)?;
    let json = serde_json::to_string_pretty(spec)?;
    std::fs::write(dir.join("model.json"), json + "\n")?;
    Ok(())
}

pub fn write_edges(path: &Path, adjacency: &Array2<u8>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "i,j")?;
    let n = adjacency.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if adjacency[[i, j]] != 0 {
                writeln!(out, "{i},{j}")?;
            }
        }
    }
    Ok(())
}

pub fn write_covariates(path: &Path, covariates: &Array2<f64>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let d = covariates.ncols();
    let header: Vec<String> = (0..d).map(|c| format!("x{c}")).collect();
    writeln!(out, "{}", header.join(","))?;
    for row in covariates.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "g")?;
    for g in labels {
        writeln!(out, "{g}")?;
    }
    Ok(())
}

/// Read an edge list back into a dense symmetric adjacency matrix over `n`
/// nodes.
pub fn read_edges(path: &Path, n: usize) -> Result<Array2<u8>> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut a = Array2::zeros((n, n));
    let parse_err = |line_no: usize, msg: String| Error::Parse {
        file: path.display().to_string(),
        message: format!("line {}: {msg}", line_no + 1),
    };
    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        if line_no == 0 {
            if line.trim() != "i,j" {
                return Err(parse_err(line_no, format!("expected header 'i,j', got '{line}'")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let (i, j) = match (parts.next(), parts.next(), parts.next()) {
            (Some(i), Some(j), None) => (i.trim(), j.trim()),
            _ => return Err(parse_err(line_no, "expected two comma-separated indices".into())),
        };
        let i: usize = i
            .parse()
            .map_err(|e| parse_err(line_no, format!("bad index '{i}': {e}")))?;
        let j: usize = j
            .parse()
            .map_err(|e| parse_err(line_no, format!("bad index '{j}': {e}")))?;
        if i >= n || j >= n {
            return Err(parse_err(line_no, format!("edge ({i}, {j}) outside 0..{n}")));
        }
        if i == j {
            return Err(parse_err(line_no, format!("self-loop at node {i}")));
        }
        a[[i, j]] = 1;
        a[[j, i]] = 1;
    }
    Ok(a)
}

/// Read covariates; the node count and dimension come from the file itself.
pub fn read_covariates(path: &Path) -> Result<Array2<f64>> {
    let content = std::fs::read_to_string(path)?;
    let mut lines = content.lines();
    let header = lines.next().ok_or_else(|| Error::Parse {
        file: path.display().to_string(),
        message: "empty file".into(),
    })?;
    let d = header.split(',').count();
    let mut values: Vec<f64> = Vec::new();
    let mut n = 0;
    for (line_no, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<&str> = line.split(',').collect();
        if row.len() != d {
            return Err(Error::Parse {
                file: path.display().to_string(),
                message: format!("line {}: expected {d} columns, got {}", line_no + 2, row.len()),
            });
        }
        for cell in row {
            values.push(cell.trim().parse().map_err(|e| Error::Parse {
                file: path.display().to_string(),
                message: format!("line {}: bad float '{cell}': {e}", line_no + 2),
            })?);
        }
        n += 1;
    }
    Array2::from_shape_vec((n, d), values).map_err(|e| Error::Parse {
        file: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let content = std::fs::read_to_string(path)?;
    let mut labels = Vec::new();
    for (line_no, line) in content.lines().enumerate() {
        if line_no == 0 || line.trim().is_empty() {
            continue;
        }
        labels.push(line.trim().parse().map_err(|e| Error::Parse {
            file: path.display().to_string(),
            message: format!("line {}: bad label '{line}': {e}", line_no + 1),
        })?);
    }
    Ok(labels)
}

/// Node degrees of a full adjacency matrix (used for the default `tau`).
pub fn degrees(adjacency: &Array2<u8>) -> Array1<f64> {
    adjacency.map_axis(ndarray::Axis(1), |row| {
        row.iter().map(|&v| v as f64).sum()
    })
}
