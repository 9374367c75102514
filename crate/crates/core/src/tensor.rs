//! Dense row-major 2-D `f64` tensors.
//!
//! Every operation here is untracked; [`crate::tape::Tape`] records the same
//! operations for reverse-mode differentiation and evaluates them through
//! these methods, so taped and untaped values agree bitwise.
//!
//! Element-wise binary operations broadcast within two dimensions: each
//! operand dimension must either match or be `1`.

use crate::error::{Error, Result};
use std::fmt;

#[derive(Clone, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor({}x{})[", self.rows, self.cols)?;
        for r in 0..self.rows {
            if r > 0 {
                write!(f, "; ")?;
            }
            for c in 0..self.cols {
                if c > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", self.data[r * self.cols + c])?;
            }
        }
        write!(f, "]")
    }
}

/// Output shape of broadcasting `a` against `b`, if the shapes conform.
pub(crate) fn broadcast_shape(a: (usize, usize), b: (usize, usize)) -> Option<(usize, usize)> {
    fn dim(x: usize, y: usize) -> Option<usize> {
        if x == y {
            Some(x)
        } else if x == 1 {
            Some(y)
        } else if y == 1 {
            Some(x)
        } else {
            None
        }
    }
    Some((dim(a.0, b.0)?, dim(a.1, b.1)?))
}

impl Tensor {
    /// Builds a leaf tensor, rejecting wrong lengths and non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim(
                "Tensor::new",
                format!("{} values for a {rows}x{cols} tensor", data.len()),
            ));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("Tensor::new at flat index {pos}")));
        }
        Ok(Self { rows, cols, data })
    }

    /// Internal constructor for computed results; skips the finiteness check.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(n * m);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != m {
                return Err(Error::dim("Tensor::from_rows", format!("row {i} has {} entries, expected {m}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Self::new(n, m, data)
    }

    pub fn full(rows: usize, cols: usize, value: f64) -> Self {
        Self::from_raw(rows, cols, vec![value; rows * cols])
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::full(rows, cols, 0.0)
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        Self::full(rows, cols, 1.0)
    }

    pub fn scalar(value: f64) -> Self {
        Self::from_raw(1, 1, vec![value])
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(n, n);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    /// Column vector (`n x 1`).
    pub fn column(values: &[f64]) -> Self {
        Self::from_raw(values.len(), 1, values.to_vec())
    }

    /// Row vector (`1 x n`).
    pub fn row_vector(values: &[f64]) -> Self {
        Self::from_raw(1, values.len(), values.to_vec())
    }

    /// `n x n` permutation matrix with a one at `(i, perm[i])`.
    pub fn permutation_matrix(perm: &[usize]) -> Self {
        let n = perm.len();
        let mut t = Self::zeros(n, n);
        for (i, &j) in perm.iter().enumerate() {
            t.data[i * n + j] = 1.0;
        }
        t
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

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub(crate) fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// The single value of a `1 x 1` tensor.
    pub fn as_scalar(&self) -> Result<f64> {
        if self.shape() != (1, 1) {
            return Err(Error::dim("as_scalar", format!("shape {:?} is not 1x1", self.shape())));
        }
        Ok(self.data[0])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }

    /// Selects rows by index, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self::from_raw(idx.len(), self.cols, data)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.rows, self.cols, self.data.iter().map(|&x| f(x)).collect())
    }

    fn zip_broadcast(&self, other: &Tensor, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let (r, c) = broadcast_shape(self.shape(), other.shape()).ok_or_else(|| {
            Error::dim(op, format!("cannot broadcast {:?} with {:?}", self.shape(), other.shape()))
        })?;
        if self.shape() == other.shape() {
            let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
            return Ok(Self::from_raw(r, c, data));
        }
        let mut data = Vec::with_capacity(r * c);
        for i in 0..r {
            let (ia, ib) = (if self.rows == 1 { 0 } else { i }, if other.rows == 1 { 0 } else { i });
            for j in 0..c {
                let (ja, jb) = (if self.cols == 1 { 0 } else { j }, if other.cols == 1 { 0 } else { j });
                data.push(f(self.get(ia, ja), other.get(ib, jb)));
            }
        }
        Ok(Self::from_raw(r, c, data))
    }

    pub fn add(&self, other: &Tensor) -> Result<Self> {
        self.zip_broadcast(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Self> {
        self.zip_broadcast(other, "sub", |a, b| a - b)
    }

    /// Element-wise (Hadamard) product.
    pub fn mul(&self, other: &Tensor) -> Result<Self> {
        self.zip_broadcast(other, "mul", |a, b| a * b)
    }

    pub(crate) fn div(&self, other: &Tensor) -> Result<Self> {
        self.zip_broadcast(other, "div", |a, b| a / b)
    }

    pub fn matmul(&self, other: &Tensor) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::dim(
                "matmul",
                format!("{:?} x {:?}", self.shape(), other.shape()),
            ));
        }
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let out_row = &mut out[i * m..(i + 1) * m];
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[p * m..(p + 1) * m];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(Self::from_raw(n, m, out))
    }

    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self.get(i, j));
            }
        }
        Self::from_raw(self.cols, self.rows, data)
    }

    pub fn exp(&self) -> Self {
        self.map(f64::exp)
    }

    pub fn ln(&self) -> Self {
        self.map(f64::ln)
    }

    pub fn relu(&self) -> Self {
        self.map(|x| if x > 0.0 { x } else { 0.0 })
    }

    pub fn sqrt(&self) -> Self {
        self.map(f64::sqrt)
    }

    pub fn scale(&self, k: f64) -> Self {
        self.map(|x| k * x)
    }

    /// Sum of all entries as a `1 x 1` tensor.
    pub fn sum(&self) -> Self {
        Self::scalar(self.data.iter().sum())
    }

    /// Per-row sums as an `n x 1` column.
    pub fn row_sum(&self) -> Self {
        Self::from_raw(self.rows, 1, (0..self.rows).map(|i| self.row(i).iter().sum()).collect())
    }

    fn row_extreme(&self, better: impl Fn(f64, f64) -> bool) -> (Self, Vec<usize>) {
        let mut vals = Vec::with_capacity(self.rows);
        let mut args = Vec::with_capacity(self.rows);
        for i in 0..self.rows {
            let row = self.row(i);
            let mut best = 0;
            for (j, &x) in row.iter().enumerate().skip(1) {
                // strict comparison keeps the first attaining index on ties
                if better(x, row[best]) {
                    best = j;
                }
            }
            vals.push(row[best]);
            args.push(best);
        }
        (Self::from_raw(self.rows, 1, vals), args)
    }

    /// Per-row minima and their first attaining column.
    pub fn row_min(&self) -> (Self, Vec<usize>) {
        self.row_extreme(|a, b| a < b)
    }

    /// Per-row maxima and their first attaining column.
    pub fn row_max(&self) -> (Self, Vec<usize>) {
        self.row_extreme(|a, b| a > b)
    }

    /// Divides each row by its Euclidean norm; returns the norms as well.
    pub fn row_l2_normalize_with_norms(&self) -> Result<(Self, Vec<f64>)> {
        let mut data = self.data.clone();
        let mut norms = Vec::with_capacity(self.rows);
        for i in 0..self.rows {
            let row = &mut data[i * self.cols..(i + 1) * self.cols];
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::Degenerate(format!("row {i} has zero norm")));
            }
            row.iter_mut().for_each(|x| *x /= norm);
            norms.push(norm);
        }
        Ok((Self::from_raw(self.rows, self.cols, data), norms))
    }

    pub fn row_l2_normalize(&self) -> Result<Self> {
        Ok(self.row_l2_normalize_with_norms()?.0)
    }

    /// Sums `self` down to `shape`, undoing a broadcast.
    pub(crate) fn reduce_to(&self, shape: (usize, usize)) -> Self {
        if self.shape() == shape {
            return self.clone();
        }
        let mut out = Self::zeros(shape.0, shape.1);
        for i in 0..self.rows {
            let oi = if shape.0 == 1 { 0 } else { i };
            for j in 0..self.cols {
                let oj = if shape.1 == 1 { 0 } else { j };
                out.data[oi * shape.1 + oj] += self.get(i, j);
            }
        }
        out
    }

    pub(crate) fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape(), other.shape());
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += b);
    }
}
