use std::fmt::Write as _;
use std::ops::{Add, Sub};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::IndexSet;
use crate::error::{Error, Result};

/// Dense real matrix stored row-major. All entries are finite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

#[derive(Deserialize)]
struct RawMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl TryFrom<RawMatrix> for Matrix {
    type Error = Error;

    fn try_from(raw: RawMatrix) -> Result<Self> {
        Matrix::new(raw.rows, raw.cols, raw.entries)
    }
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidMatrix(format!(
                "dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if entries.len() != rows * cols {
            return Err(Error::InvalidMatrix(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        if let Some(pos) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix(format!(
                "non-finite entry at ({}, {})",
                pos / cols + 1,
                pos % cols + 1
            )));
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            entries: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        let mut out = Self::zeros(rows, cols);
        out.entries.iter_mut().for_each(|v| *v = value);
        out
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diag(n, n, &vec![1.0; n])
    }

    /// Rectangular matrix with `diag` on its main diagonal.
    pub fn from_diag(rows: usize, cols: usize, diag: &[f64]) -> Self {
        assert!(diag.len() <= rows.min(cols));
        let mut out = Self::zeros(rows, cols);
        for (i, &d) in diag.iter().enumerate() {
            out.entries[i * cols + i] = d;
        }
        out
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != ncols) {
            return Err(Error::InvalidMatrix("ragged rows".into()));
        }
        let entries = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Self::new(nrows, ncols, entries)
    }

    /// Builds a matrix from a generator over 0-based `(row, col)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        Self::new(rows, cols, entries)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn min_dim(&self) -> usize {
        self.rows.min(self.cols)
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<f64> {
        self.entries
    }

    /// Entry at 0-based `(i, j)`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    #[inline]
    pub(crate) fn set(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.entries[j * self.rows + i] = self.get(i, j);
            }
        }
        out
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|v| v * c).collect(),
        }
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Matrix::from_nalgebra(&(self.to_nalgebra() * other.to_nalgebra())))
    }

    pub fn try_sub(&self, other: &Matrix) -> Result<Matrix> {
        self.check_same_shape(other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    pub fn try_add(&self, other: &Matrix) -> Result<Matrix> {
        self.check_same_shape(other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn check_same_shape(&self, other: &Matrix) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Dimension(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_sq().sqrt()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.min_dim()).map(|i| self.get(i, i)).sum()
    }

    /// Frobenius inner product.
    pub fn inner(&self, other: &Matrix) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self.entries.iter().zip(&other.entries).map(|(a, b)| a * b).sum())
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let scale = self.max_abs().max(1.0);
        (0..self.rows).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol * scale))
    }

    /// 1-based indices of rows holding at least one nonzero entry.
    pub fn row_support(&self) -> Vec<usize> {
        (0..self.rows)
            .filter(|&i| self.row(i).iter().any(|&v| v != 0.0))
            .map(|i| i + 1)
            .collect()
    }

    /// 1-based indices of columns holding at least one nonzero entry.
    pub fn col_support(&self) -> Vec<usize> {
        (0..self.cols)
            .filter(|&j| (0..self.rows).any(|i| self.get(i, j) != 0.0))
            .map(|j| j + 1)
            .collect()
    }

    /// Restriction of the matrix to `rows x cols`, order preserved.
    pub fn submatrix(&self, rows: &IndexSet, cols: &IndexSet) -> Result<Matrix> {
        if rows.universe() > self.rows || cols.universe() > self.cols {
            check_within(rows, self.rows, "row")?;
            check_within(cols, self.cols, "column")?;
        }
        if rows.is_empty() || cols.is_empty() {
            return Err(Error::Index("empty index set".into()));
        }
        let r: Vec<usize> = rows.zero_based().collect();
        let c: Vec<usize> = cols.zero_based().collect();
        Ok(self.select(&r, &c))
    }

    /// Restriction to 0-based row and column lists (no validation beyond bounds).
    pub(crate) fn select(&self, rows: &[usize], cols: &[usize]) -> Matrix {
        let mut entries = Vec::with_capacity(rows.len() * cols.len());
        for &i in rows {
            let row = self.row(i);
            entries.extend(cols.iter().map(|&j| row[j]));
        }
        Matrix {
            rows: rows.len(),
            cols: cols.len(),
            entries,
        }
    }

    /// Places `self` at `rows x cols` of a `p x m` zero matrix.
    pub fn block_embed(&self, p: usize, m: usize, rows: &IndexSet, cols: &IndexSet) -> Result<Matrix> {
        if rows.len() != self.rows || cols.len() != self.cols {
            return Err(Error::Dimension(format!(
                "block is {}x{} but index sets have sizes {}x{}",
                self.rows,
                self.cols,
                rows.len(),
                cols.len()
            )));
        }
        if p == 0 || m == 0 {
            return Err(Error::Dimension("target dimensions must be positive".into()));
        }
        check_within(rows, p, "row").map_err(|e| Error::Dimension(e.to_string()))?;
        check_within(cols, m, "column").map_err(|e| Error::Dimension(e.to_string()))?;
        let mut out = Matrix::zeros(p, m);
        for (bi, i) in rows.zero_based().enumerate() {
            for (bj, j) in cols.zero_based().enumerate() {
                out.set(i, j, self.get(bi, bj));
            }
        }
        Ok(out)
    }

    /// Keeps entries in `rows x cols` (0-based), zeroes the rest.
    pub(crate) fn mask(&self, rows: &[usize], cols: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(self.rows, self.cols);
        for &i in rows {
            for &j in cols {
                out.set(i, j, self.get(i, j));
            }
        }
        out
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.entries)
    }

    pub fn from_nalgebra(m: &DMatrix<f64>) -> Matrix {
        let (rows, cols) = m.shape();
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(m[(i, j)]);
            }
        }
        Matrix { rows, cols, entries }
    }

    /// CSV text: one line per row, `.` decimal separator, no header.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.rows {
            for (j, v) in self.row(i).iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                write!(out, "{}", fmt_real(*v)).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Matrix> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|tok| {
                    tok.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("line {}: {tok:?}: {e}", lineno + 1)))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Parse("empty CSV matrix".into()));
        }
        Matrix::from_rows(&rows)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("matrix serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Matrix> {
        Ok(serde_json::from_str(text)?)
    }
}

fn check_within(set: &IndexSet, bound: usize, what: &str) -> Result<()> {
    match set.members().last() {
        Some(&last) if last > bound => Err(Error::Index(format!(
            "{what} index {last} exceeds dimension {bound}"
        ))),
        _ => Ok(()),
    }
}

/// Fixed 17-significant-digit scientific formatting used for all text output.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

impl Add for &Matrix {
    type Output = Matrix;

    fn add(self, rhs: &Matrix) -> Matrix {
        self.try_add(rhs).expect("matrix shapes must agree")
    }
}

impl Sub for &Matrix {
    type Output = Matrix;

    fn sub(self, rhs: &Matrix) -> Matrix {
        self.try_sub(rhs).expect("matrix shapes must agree")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ix(universe: usize, members: &[usize]) -> IndexSet {
        IndexSet::new(universe, members.to_vec()).unwrap()
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(matches!(Matrix::new(2, 2, vec![1.0; 3]), Err(Error::InvalidMatrix(_))));
        assert!(matches!(
            Matrix::new(1, 2, vec![1.0, f64::NAN]),
            Err(Error::InvalidMatrix(_))
        ));
        assert!(Matrix::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn submatrix_examples() {
        let a = Matrix::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 9.0]]).unwrap();
        let s = a.submatrix(&ix(3, &[1]), &ix(3, &[1])).unwrap();
        assert_eq!(s, Matrix::from_rows(&[[1.0]]).unwrap());
        let full = IndexSet::full(3);
        assert_eq!(a.submatrix(&full, &full).unwrap(), a);

        let b = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let s = b.submatrix(&ix(2, &[2]), &ix(2, &[1, 2])).unwrap();
        assert_eq!(s, Matrix::from_rows(&[[3.0, 4.0]]).unwrap());
    }

    #[test]
    fn submatrix_out_of_range() {
        let b = Matrix::zeros(2, 2);
        assert!(matches!(
            b.submatrix(&ix(3, &[3]), &ix(2, &[1])),
            Err(Error::Index(_))
        ));
    }

    #[test]
    fn block_embed_examples() {
        let a = Matrix::from_rows(&[[1.0]]).unwrap();
        let e = a.block_embed(2, 2, &ix(2, &[2]), &ix(2, &[2])).unwrap();
        assert_eq!(e, Matrix::from_rows(&[[0.0, 0.0], [0.0, 1.0]]).unwrap());

        let z = Matrix::zeros(2, 3).block_embed(5, 6, &ix(5, &[1, 4]), &ix(6, &[2, 3, 6])).unwrap();
        assert_eq!(z, Matrix::zeros(5, 6));

        assert!(matches!(
            a.block_embed(2, 2, &ix(2, &[1, 2]), &ix(2, &[1])),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            a.block_embed(2, 2, &ix(3, &[3]), &ix(2, &[1])),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn csv_and_json_round_trip() {
        let a = Matrix::from_rows(&[[1.5, -2.0e-12], [3.0, 0.1]]).unwrap();
        assert_eq!(Matrix::from_csv(&a.to_csv()).unwrap(), a);
        assert_eq!(Matrix::from_json(&a.to_json()).unwrap(), a);
        assert!(Matrix::from_json(r#"{"rows":2,"cols":2,"entries":[1,2,3]}"#).is_err());
    }

    #[test]
    fn supports() {
        let a = Matrix::from_rows(&[[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [2.0, 0.0, 0.0]]).unwrap();
        assert_eq!(a.row_support(), vec![1, 3]);
        assert_eq!(a.col_support(), vec![1, 3]);
    }
}
