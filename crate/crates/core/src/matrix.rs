//! Dense square matrices and the plain-text matrix file format.
//!
//! The file format is one line holding `n`, followed by `n` lines of `n`
//! whitespace-separated decimals in row-major order. Lines starting with
//! `#` are comments; a leading `# days=...` line is used as a manifest by
//! correlation files.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        SquareMatrix { n, data }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            data.extend(row);
        }
        Ok(SquareMatrix { n, data })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        SquareMatrix::from_fn(self.n, |i, j| self.get(j, i))
    }

    /// First `(i, j)` whose entry is NaN or infinite.
    pub fn first_non_finite(&self) -> Option<(usize, usize)> {
        self.data
            .iter()
            .position(|v| !v.is_finite())
            .map(|k| (k / self.n, k % self.n))
    }

    /// First `(i, j)` with `|a_ij - a_ji| > tol`.
    pub fn first_asymmetry(&self, tol: f64) -> Option<(usize, usize)> {
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if (self.get(i, j) - self.get(j, i)).abs() > tol {
                    return Some((i, j));
                }
            }
        }
        None
    }

    /// `(A + Aᵀ) / 2`.
    pub fn symmetrized(&self) -> Self {
        SquareMatrix::from_fn(self.n, |i, j| 0.5 * (self.get(i, j) + self.get(j, i)))
    }

    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(out.len(), self.n);
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    /// Quadratic form `xᵀ A x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        (0..self.n)
            .map(|i| x[i] * self.row(i).iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
            .sum()
    }
}

/// Parses the text matrix format. Returns the manifest (content of a
/// `# days=` line, if any) alongside the matrix.
pub fn parse_matrix(text: &str, path: &Path) -> Result<(SquareMatrix, Option<String>)> {
    let mut manifest = None;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k as u64 + 1, l.trim()))
        .filter(|(_, l)| {
            if let Some(rest) = l.strip_prefix('#') {
                if let Some(days) = rest.trim().strip_prefix("days=") {
                    manifest = Some(days.to_string());
                }
                false
            } else {
                !l.is_empty()
            }
        });

    let (line_no, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "missing dimension line"))?;
    let n: usize = header
        .parse()
        .map_err(|_| Error::parse(path, line_no, format!("bad dimension `{header}`")))?;

    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let (line_no, line) = lines
            .next()
            .ok_or_else(|| Error::parse(path, line_no, format!("expected {n} matrix rows")))?;
        let row = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|_| Error::parse(path, line_no, format!("bad number `{tok}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != n {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected {n} entries, found {}", row.len()),
            ));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse(path, line_no, "non-finite entry"));
        }
        rows.push(row);
    }
    if let Some((line_no, _)) = lines.next() {
        return Err(Error::parse(path, line_no, "trailing data after matrix"));
    }
    drop(lines);
    Ok((SquareMatrix::from_rows(rows)?, manifest))
}

pub fn read_matrix(path: &Path) -> Result<(SquareMatrix, Option<String>)> {
    let text = std::fs::read_to_string(path)?;
    parse_matrix(&text, path)
}

pub fn format_matrix(m: &SquareMatrix, manifest: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(days) = manifest {
        let _ = writeln!(out, "# days={days}");
    }
    let _ = writeln!(out, "{}", m.n());
    for i in 0..m.n() {
        let row: Vec<String> = m.row(i).iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

pub fn write_matrix(path: &Path, m: &SquareMatrix, manifest: Option<&str>) -> Result<()> {
    std::fs::write(path, format_matrix(m, manifest))?;
    Ok(())
}
