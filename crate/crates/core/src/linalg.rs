//! Small dense linear algebra: row-major matrices, Cholesky with rank
//! detection and modified Gram-Schmidt least squares.

use crate::num::Real;

/// Relative pivot tolerance for declaring a column linearly dependent.
pub const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `Xᵀ diag(w) X`; `w = None` means unit weights.
    pub fn weighted_gram(&self, w: Option<&[T]>) -> Matrix<T> {
        let p = self.cols;
        let mut g = Matrix::zeros(p, p);
        for (i, r) in self.data.chunks_exact(p.max(1)).enumerate().take(self.rows) {
            let wi = w.map_or(T::one(), |w| w[i]);
            for a in 0..p {
                let ra = r[a] * wi;
                if ra == T::zero() {
                    continue;
                }
                let dst = &mut g.data[a * p + a..(a + 1) * p];
                for (d, &rb) in dst.iter_mut().zip(&r[a..]) {
                    *d = *d + ra * rb;
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                g.data[a * p + b] = g.data[b * p + a];
            }
        }
        g
    }

    /// `Xᵀ v`.
    pub fn transpose_mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &x) in out.iter_mut().zip(self.row(i)) {
                *o = *o + x * vi;
            }
        }
        out
    }

    /// Copy keeping only the listed columns.
    pub fn select_columns(&self, keep: &[usize]) -> Matrix<T> {
        Matrix::from_fn(self.rows, keep.len(), |i, j| self.get(i, keep[j]))
    }
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    l: Matrix<T>,
}

impl<T: Real> Cholesky<T> {
    /// Factors `a`, or returns the first column whose pivot falls below
    /// `RANK_TOL` times its diagonal entry.
    pub fn new(a: &Matrix<T>) -> Result<Self, usize> {
        let p = a.rows();
        assert_eq!(p, a.cols());
        let tol = T::lit(RANK_TOL);
        let mut l = Matrix::zeros(p, p);
        for j in 0..p {
            let mut d = a.get(j, j);
            for k in 0..j {
                d = d - l.get(j, k) * l.get(j, k);
            }
            if !(d > tol * a.get(j, j).abs()) || !(d > T::zero()) {
                return Err(j);
            }
            let djj = d.sqrt();
            l.set(j, j, djj);
            for i in j + 1..p {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s = s - l.get(i, k) * l.get(j, k);
                }
                l.set(i, j, s / djj);
            }
        }
        Ok(Self { l })
    }

    /// Solves `L z = b`.
    pub fn forward(&self, b: &[T]) -> Vec<T> {
        let p = self.l.rows();
        let mut z = vec![T::zero(); p];
        for i in 0..p {
            let mut s = b[i];
            for k in 0..i {
                s = s - self.l.get(i, k) * z[k];
            }
            z[i] = s / self.l.get(i, i);
        }
        z
    }

    /// Solves `Lᵀ x = z`.
    pub fn backward(&self, z: &[T]) -> Vec<T> {
        let p = self.l.rows();
        let mut x = vec![T::zero(); p];
        for i in (0..p).rev() {
            let mut s = z[i];
            for k in i + 1..p {
                s = s - self.l.get(k, i) * x[k];
            }
            x[i] = s / self.l.get(i, i);
        }
        x
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        self.backward(&self.forward(b))
    }

    pub fn log_det(&self) -> T {
        (0..self.l.rows()).fold(T::zero(), |acc, i| acc + self.l.get(i, i).ln()) * T::lit(2.0)
    }
}

/// Least-squares solution by modified Gram-Schmidt.
#[derive(Debug, Clone)]
pub struct LeastSquares<T> {
    /// Coefficients; entries for dependent columns are zero.
    pub coefficients: Vec<T>,
    pub residuals: Vec<T>,
    pub rss: T,
    pub rank: usize,
    /// Columns kept as linearly independent, in order.
    pub independent: Vec<usize>,
}

pub fn least_squares<T: Real>(x: &Matrix<T>, y: &[T]) -> LeastSquares<T> {
    let (n, p) = (x.rows(), x.cols());
    assert_eq!(y.len(), n);
    let tol = T::lit(RANK_TOL);
    let mut q: Vec<Vec<T>> = Vec::with_capacity(p);
    let mut r: Vec<Vec<T>> = Vec::with_capacity(p);
    let mut independent = Vec::with_capacity(p);
    for j in 0..p {
        let mut v = x.column(j);
        let norm0 = dot(&v, &v).sqrt();
        let mut rj = vec![T::zero(); q.len()];
        for (k, qk) in q.iter().enumerate() {
            let c = dot(qk, &v);
            rj[k] = c;
            for (vi, &qi) in v.iter_mut().zip(qk) {
                *vi = *vi - c * qi;
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm0 == T::zero() || norm <= tol * norm0 {
            continue;
        }
        for vi in v.iter_mut() {
            *vi = *vi / norm;
        }
        rj.push(norm);
        q.push(v);
        r.push(rj);
        independent.push(j);
    }
    let mut resid = y.to_vec();
    let mut qty = Vec::with_capacity(q.len());
    for qk in &q {
        let c = dot(qk, &resid);
        for (ri, &qi) in resid.iter_mut().zip(qk) {
            *ri = *ri - c * qi;
        }
        qty.push(c);
    }
    // back substitution R b = Qᵀy over the independent columns
    let k = q.len();
    let mut b = vec![T::zero(); k];
    for i in (0..k).rev() {
        let mut s = qty[i];
        for j in i + 1..k {
            s = s - r[j][i] * b[j];
        }
        b[i] = s / r[i][i];
    }
    let mut coefficients = vec![T::zero(); p];
    for (pos, &j) in independent.iter().enumerate() {
        coefficients[j] = b[pos];
    }
    let rss = dot(&resid, &resid);
    LeastSquares {
        coefficients,
        residuals: resid,
        rss,
        rank: k,
        independent,
    }
}
