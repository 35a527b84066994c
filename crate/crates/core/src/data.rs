//! Datasets: LIBSVM text format, column normalization, seeded synthetic
//! generation.

use std::fmt::Write as _;
use std::io::{self, BufRead};
use std::path::Path;

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("empty dataset")]
    Empty,
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: feature index {index} is not strictly increasing")]
    NonIncreasing { line: usize, index: usize },
    #[error("unsupported label set {labels:?}; expected {{-1,+1}}, {{0,1}} or {{1,2}}")]
    Labels { labels: Vec<f64> },
    #[error("column {index} is zero and cannot be normalized")]
    ZeroColumn { index: usize },
    #[error("invalid shape: {0}")]
    Shape(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Dense `d x q` data matrix, stored column-major (column `i` is sample
/// `a_i`), with labels in `{-1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    d: usize,
    q: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    column_norms: Vec<f64>,
}

impl Dataset {
    pub fn new(d: usize, q: usize, a: Vec<f64>, b: Vec<f64>) -> Result<Self, DataError> {
        if d == 0 || q == 0 {
            return Err(DataError::Empty);
        }
        if a.len() != d * q || b.len() != q {
            return Err(DataError::Shape(format!(
                "expected {} entries and {} labels, got {} and {}",
                d * q,
                q,
                a.len(),
                b.len()
            )));
        }
        if let Some(bad) = b.iter().find(|v| **v != 1.0 && **v != -1.0) {
            return Err(DataError::Labels { labels: vec![*bad] });
        }
        let column_norms = a.chunks_exact(d).map(crate::vecops::norm).collect();
        Ok(Self {
            d,
            q,
            a,
            b,
            column_norms,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.a[i * self.d..(i + 1) * self.d]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.a.chunks_exact(self.d)
    }

    /// Column-major entries.
    pub fn matrix(&self) -> &[f64] {
        &self.a
    }

    pub fn labels(&self) -> &[f64] {
        &self.b
    }

    pub fn column_norms(&self) -> &[f64] {
        &self.column_norms
    }

    /// Hex SHA-256 over `d`, `q`, the column-major entries and the labels
    /// (all little-endian).
    pub fn checksum(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.d as u64).to_le_bytes());
        hasher.update((self.q as u64).to_le_bytes());
        for v in self.a.iter().chain(&self.b) {
            hasher.update(v.to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }
}

// ---------------------------------------------------------------------------
// LIBSVM
// ---------------------------------------------------------------------------

/// Parses LIBSVM text. Labels `{1, 2}` map to `{+1, -1}` and `{0, 1}` to
/// `{-1, +1}`.
pub fn libsvm_parse<R: BufRead>(reader: R) -> Result<Dataset, DataError> {
    let mut samples: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut raw_labels = Vec::new();
    let mut d = 0;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let line = line.trim_end_matches('\r');
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_ascii_whitespace();
        let label_tok = tokens.next().unwrap_or_default();
        let label: f64 = label_tok.parse().map_err(|_| DataError::Malformed {
            line: lineno,
            reason: format!("bad label {label_tok:?}"),
        })?;
        if !label.is_finite() {
            return Err(DataError::Malformed {
                line: lineno,
                reason: format!("bad label {label_tok:?}"),
            });
        }
        let mut features = Vec::new();
        let mut last = 0;
        for tok in tokens {
            let (idx, val) = tok.split_once(':').ok_or_else(|| DataError::Malformed {
                line: lineno,
                reason: format!("expected index:value, got {tok:?}"),
            })?;
            let idx: usize = idx.parse().map_err(|_| DataError::Malformed {
                line: lineno,
                reason: format!("bad feature index {idx:?}"),
            })?;
            if idx == 0 {
                return Err(DataError::Malformed {
                    line: lineno,
                    reason: "feature indices are 1-based".into(),
                });
            }
            let val: f64 = val.parse().map_err(|_| DataError::Malformed {
                line: lineno,
                reason: format!("bad feature value {val:?}"),
            })?;
            if !val.is_finite() {
                return Err(DataError::Malformed {
                    line: lineno,
                    reason: format!("non-finite feature value {val:?}"),
                });
            }
            if idx <= last {
                return Err(DataError::NonIncreasing {
                    line: lineno,
                    index: idx,
                });
            }
            last = idx;
            features.push((idx, val));
        }
        d = d.max(last);
        samples.push(features);
        raw_labels.push(label);
    }
    if samples.is_empty() || d == 0 {
        return Err(DataError::Empty);
    }

    let labels = remap_labels(&raw_labels)?;
    let q = samples.len();
    let mut a = vec![0.0; d * q];
    for (i, features) in samples.iter().enumerate() {
        for &(idx, val) in features {
            a[i * d + idx - 1] = val;
        }
    }
    Dataset::new(d, q, a, labels)
}

fn remap_labels(raw: &[f64]) -> Result<Vec<f64>, DataError> {
    let mut distinct: Vec<f64> = Vec::new();
    for &l in raw {
        if !distinct.contains(&l) {
            distinct.push(l);
        }
    }
    distinct.sort_by(f64::total_cmp);
    let within = |set: &[f64]| distinct.iter().all(|l| set.contains(l));
    if within(&[-1.0, 1.0]) {
        Ok(raw.to_vec())
    } else if within(&[1.0, 2.0]) {
        log::info!("remapping labels {{1, 2}} to {{+1, -1}}");
        Ok(raw.iter().map(|&l| if l == 1.0 { 1.0 } else { -1.0 }).collect())
    } else if within(&[0.0, 1.0]) {
        log::info!("remapping labels {{0, 1}} to {{-1, +1}}");
        Ok(raw.iter().map(|&l| if l == 1.0 { 1.0 } else { -1.0 }).collect())
    } else {
        Err(DataError::Labels { labels: distinct })
    }
}

pub fn libsvm_read(path: &Path) -> Result<Dataset, DataError> {
    let file = std::fs::File::open(path)?;
    libsvm_parse(io::BufReader::new(file))
}

/// LIBSVM text for `data`. Zero entries are omitted, except that the last
/// feature is always written once so that `d` survives a round trip.
pub fn libsvm_serialize(data: &Dataset) -> String {
    let d = data.d();
    let last_feature_present = data.columns().any(|c| c[d - 1] != 0.0);
    let mut out = String::new();
    for (i, (col, label)) in data.columns().zip(data.labels()).enumerate() {
        out.push_str(if *label > 0.0 { "+1" } else { "-1" });
        for (j, v) in col.iter().enumerate() {
            let force = i == 0 && j == d - 1 && !last_feature_present;
            if *v != 0.0 || force {
                let _ = write!(out, " {}:{}", j + 1, v);
            }
        }
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// Normalization and synthetic data
// ---------------------------------------------------------------------------

/// Scales every column to unit Euclidean norm.
pub fn normalize_columns(data: &Dataset) -> Result<Dataset, DataError> {
    let mut a = data.a.clone();
    for (i, (col, norm)) in a.chunks_exact_mut(data.d).zip(&data.column_norms).enumerate() {
        if *norm == 0.0 {
            return Err(DataError::ZeroColumn { index: i });
        }
        if *norm != 1.0 {
            col.iter_mut().for_each(|v| *v /= norm);
        }
    }
    Dataset::new(data.d, data.q, a, data.b.clone())
}

/// Stream of the dataset generator.
pub const DATA_STREAM: u64 = 1;
/// Stream of the initial point.
pub const INIT_STREAM: u64 = 2;

/// Seeded generator: ChaCha20 keyed by the 64-bit seed (expanded with
/// PCG32 as in `SeedableRng::seed_from_u64`), with independent 64-bit
/// stream ids for independent consumers.
#[derive(Debug, Clone)]
pub struct Rng {
    inner: ChaCha20Rng,
}

impl Rng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha20Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    pub fn sign(&mut self) -> f64 {
        if self.inner.gen::<bool>() {
            1.0
        } else {
            -1.0
        }
    }

    pub fn uniform_vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.uniform()).collect()
    }
}

/// Uniform `[0, 1)` entries (column by column), uniform signs, then column
/// normalization.
pub fn synthetic_generate(d: usize, q: usize, rng: &mut Rng) -> Result<Dataset, DataError> {
    if d == 0 || q == 0 {
        return Err(DataError::Empty);
    }
    let a = rng.uniform_vec(d * q);
    let b = (0..q).map(|_| rng.sign()).collect();
    normalize_columns(&Dataset::new(d, q, a, b)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn parses_the_format_example() {
        let ds = libsvm_parse("+1 1:0.5 3:2.0\n-1 2:1.0".as_bytes()).unwrap();
        assert_eq!((ds.d(), ds.q()), (3, 2));
        assert_eq!(ds.column(0), &[0.5, 0.0, 2.0]);
        assert_eq!(ds.column(1), &[0.0, 1.0, 0.0]);
        assert_eq!(ds.labels(), &[1.0, -1.0]);
    }

    #[test]
    fn remaps_label_conventions() {
        let ds = libsvm_parse("1 1:1\n2 1:2\n".as_bytes()).unwrap();
        assert_eq!(ds.labels(), &[1.0, -1.0]);
        let ds = libsvm_parse("0 1:1\r\n1 1:2\r\n".as_bytes()).unwrap();
        assert_eq!(ds.labels(), &[-1.0, 1.0]);
        assert!(matches!(
            libsvm_parse("3 1:1\n1 1:1\n".as_bytes()),
            Err(DataError::Labels { .. })
        ));
    }

    #[test]
    fn reports_line_numbers() {
        match libsvm_parse("+1 1:1\n\n-1 2:x\n".as_bytes()) {
            Err(DataError::Malformed { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match libsvm_parse("+1 2:1 2:3\n".as_bytes()) {
            Err(DataError::NonIncreasing { line, index }) => assert_eq!((line, index), (1, 2)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            libsvm_parse("+1 0:1\n".as_bytes()),
            Err(DataError::Malformed { .. })
        ));
        assert!(matches!(libsvm_parse("".as_bytes()), Err(DataError::Empty)));
        assert!(matches!(libsvm_parse("\n# only\n".as_bytes()), Err(DataError::Empty)));
    }

    #[test]
    fn normalizes_columns() {
        let ds = Dataset::new(2, 1, vec![3.0, 4.0], vec![1.0]).unwrap();
        let n = normalize_columns(&ds).unwrap();
        assert_relative_eq!(n.column(0)[0], 0.6);
        assert_relative_eq!(n.column(0)[1], 0.8);
        let zero = Dataset::new(2, 2, vec![1.0, 0.0, 0.0, 0.0], vec![1.0, -1.0]).unwrap();
        assert!(matches!(
            normalize_columns(&zero),
            Err(DataError::ZeroColumn { index: 1 })
        ));
    }

    #[test]
    fn serialize_round_trip_keeps_trailing_zero_feature() {
        let ds = libsvm_parse("+1 1:0.5 3:0\n-1 2:1e-300\n".as_bytes()).unwrap();
        assert_eq!(ds.d(), 3);
        let again = libsvm_parse(libsvm_serialize(&ds).as_bytes()).unwrap();
        assert_eq!(ds, again);
    }

    #[test]
    fn synthetic_is_deterministic_and_normalized() {
        let a = synthetic_generate(30, 7, &mut Rng::new(5, DATA_STREAM)).unwrap();
        let b = synthetic_generate(30, 7, &mut Rng::new(5, DATA_STREAM)).unwrap();
        assert_eq!(a, b);
        let c = synthetic_generate(30, 7, &mut Rng::new(6, DATA_STREAM)).unwrap();
        assert_ne!(a.checksum(), c.checksum());
        for n in a.column_norms() {
            assert!((n - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn streams_are_independent() {
        let x = Rng::new(1, DATA_STREAM).uniform_vec(4);
        let y = Rng::new(1, INIT_STREAM).uniform_vec(4);
        assert_ne!(x, y);
    }
}
