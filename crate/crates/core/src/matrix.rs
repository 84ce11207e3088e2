//! Dense feature matrices, a CSR view for the sparse learners, and the
//! labeled-matrix text format.
//!
//! Text format: first line `rows cols`, then one line per row holding `cols`
//! numbers followed by the label, whitespace separated. The label is the
//! remainder of the line, so it may itself contain spaces.

use std::io::{BufRead, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("matrix line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        FeatureMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length must be rows * cols");
        FeatureMatrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        FeatureMatrix { rows: rows.len(), cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols;
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn select_rows(&self, idx: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix { rows: idx.len(), cols: self.cols, data }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_sparse(&self) -> SparseMatrix {
        let mut indptr = Vec::with_capacity(self.rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for r in 0..self.rows {
            for (c, &v) in self.row(r).iter().enumerate() {
                if v != 0.0 {
                    indices.push(c as u32);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        SparseMatrix { rows: self.rows, cols: self.cols, indptr, indices, values }
    }
}

/// Borrowed view of one sparse row; indices ascend.
#[derive(Debug, Clone, Copy)]
pub struct SparseRow<'a> {
    pub indices: &'a [u32],
    pub values: &'a [f64],
}

impl<'a> SparseRow<'a> {
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + 'a {
        self.indices.iter().map(|&i| i as usize).zip(self.values.iter().copied())
    }
}

/// Owned sparse vector, used when converting single dense inputs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVec {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseVec {
    pub fn from_dense(x: &[f64]) -> Self {
        let mut v = SparseVec::default();
        for (i, &x) in x.iter().enumerate() {
            if x != 0.0 {
                v.indices.push(i as u32);
                v.values.push(x);
            }
        }
        v
    }

    pub fn view(&self) -> SparseRow<'_> {
        SparseRow { indices: &self.indices, values: &self.values }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Empty matrix with `cols` columns; fill it with `push_row`.
    pub fn new(cols: usize) -> Self {
        SparseMatrix { rows: 0, cols, indptr: vec![0], indices: Vec::new(), values: Vec::new() }
    }

    /// Appends a row given as (column, value) pairs in ascending column order.
    pub fn push_row<I: IntoIterator<Item = (u32, f64)>>(&mut self, entries: I) {
        for (c, v) in entries {
            debug_assert!((c as usize) < self.cols);
            if v != 0.0 {
                self.indices.push(c);
                self.values.push(v);
            }
        }
        self.indptr.push(self.indices.len());
        self.rows += 1;
    }

    pub fn to_dense(&self) -> FeatureMatrix {
        let mut m = FeatureMatrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            let out = m.row_mut(r);
            for (c, v) in self.row(r).iter() {
                out[c] = v;
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> SparseRow<'_> {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        SparseRow { indices: &self.indices[a..b], values: &self.values[a..b] }
    }

    /// Divides each column by its largest absolute value. Returns the
    /// per-column factors, or `None` (and leaves the matrix alone) when
    /// every non-empty column already peaks at 1.
    pub fn max_abs_scale(&self) -> Option<(SparseMatrix, Vec<f64>)> {
        let mut peak = vec![0.0f64; self.cols];
        for (&c, &v) in self.indices.iter().zip(&self.values) {
            peak[c as usize] = peak[c as usize].max(v.abs());
        }
        if peak.iter().all(|&m| m == 0.0 || m == 1.0) {
            return None;
        }
        let factor: Vec<f64> = peak.iter().map(|&m| if m == 0.0 { 1.0 } else { 1.0 / m }).collect();
        let mut scaled = self.clone();
        for (&c, v) in scaled.indices.iter().zip(scaled.values.iter_mut()) {
            *v *= factor[c as usize];
        }
        Some((scaled, factor))
    }
}

/// Feature rows with one string label each.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledMatrix {
    pub features: FeatureMatrix,
    pub labels: Vec<String>,
}

impl LabeledMatrix {
    pub fn new(features: FeatureMatrix, labels: Vec<String>) -> Self {
        assert_eq!(features.rows(), labels.len(), "one label per row");
        LabeledMatrix { features, labels }
    }

    pub fn write_text<W: Write>(&self, mut out: W) -> Result<(), MatrixError> {
        writeln!(out, "{} {}", self.features.rows(), self.features.cols())?;
        let mut line = String::new();
        for (r, label) in self.labels.iter().enumerate() {
            line.clear();
            for v in self.features.row(r) {
                line.push_str(&v.to_string());
                line.push(' ');
            }
            line.push_str(label);
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<LabeledMatrix, MatrixError> {
        let mut lines = input.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| MatrixError::Parse { line: 1, reason: format!("bad `rows cols` header: {e}") })?;
        let [rows, cols] = dims[..] else {
            return Err(MatrixError::Parse { line: 1, reason: format!("expected `rows cols`, found {header:?}") });
        };
        let mut data = Vec::with_capacity(rows * cols);
        let mut labels = Vec::with_capacity(rows);
        for r in 0..rows {
            let line_no = r + 2;
            let line = lines
                .next()
                .transpose()?
                .ok_or_else(|| MatrixError::Parse { line: line_no, reason: "missing row".into() })?;
            let mut rest = line.trim_start();
            for c in 0..cols {
                let end = rest.find(char::is_whitespace).ok_or_else(|| MatrixError::Parse {
                    line: line_no,
                    reason: format!("expected {cols} values and a label, found {c} tokens"),
                })?;
                let v: f64 = rest[..end]
                    .parse()
                    .map_err(|e| MatrixError::Parse { line: line_no, reason: format!("bad value: {e}") })?;
                data.push(v);
                rest = rest[end..].trim_start();
            }
            let label = rest.trim_end();
            if label.is_empty() {
                return Err(MatrixError::Parse { line: line_no, reason: "missing label".into() });
            }
            labels.push(label.to_string());
        }
        Ok(LabeledMatrix { features: FeatureMatrix::from_vec(rows, cols, data), labels })
    }
}
