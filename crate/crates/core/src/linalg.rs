//! Dense helpers layered over faer: index gathers, matrix-vector products and
//! an LU factorization that carries a reciprocal condition estimate.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::{Mat, MatRef};

/// Reciprocal 1-norm condition estimates below this are treated as singular.
pub const SINGULAR_RCOND: f64 = 1e-13;

/// Column `j` of a column-major matrix as a slice.
pub(crate) fn column(m: MatRef<'_, f64>, j: usize) -> &[f64] {
    m.col(j)
        .try_as_col_major()
        .expect("column-major storage")
        .as_slice()
}

/// Mutable column `j` of an owned matrix as a slice.
pub(crate) fn column_mut(m: &mut Mat<f64>, j: usize) -> &mut [f64] {
    m.as_mut()
        .col_mut(j)
        .try_as_col_major_mut()
        .expect("owned matrix")
        .as_slice_mut()
}

/// `m[rows, cols]` as a new matrix.
pub fn gather(m: MatRef<'_, f64>, rows: &[usize], cols: &[usize]) -> Mat<f64> {
    let mut out = Mat::<f64>::zeros(rows.len(), cols.len());
    for (j, &c) in cols.iter().enumerate() {
        let src = column(m, c);
        for (d, &r) in column_mut(&mut out, j).iter_mut().zip(rows) {
            *d = src[r];
        }
    }
    out
}

/// `m[rows, :]`.
pub fn gather_rows(m: MatRef<'_, f64>, rows: &[usize]) -> Mat<f64> {
    Mat::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

pub fn matvec(m: MatRef<'_, f64>, x: &[f64]) -> Vec<f64> {
    debug_assert_eq!(m.ncols(), x.len());
    let mut y = vec![0.0; m.nrows()];
    for (j, &xj) in x.iter().enumerate() {
        if xj == 0.0 {
            continue;
        }
        let col = m.col(j);
        for (yi, a) in y.iter_mut().zip(col.iter()) {
            *yi += a * xj;
        }
    }
    y
}

/// `a * b`, skipping the zero entries of `b`; pays off when `b` is mostly
/// zeros.
pub fn mul_sparse_rhs(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Mat<f64> {
    assert_eq!(a.ncols(), b.nrows(), "inner dimensions");
    let mut out = Mat::<f64>::zeros(a.nrows(), b.ncols());
    for j in 0..b.ncols() {
        let bj = column(b, j);
        let dst = out
            .as_mut()
            .col_mut(j)
            .try_as_col_major_mut()
            .expect("owned matrix")
            .as_slice_mut();
        for (k, &bkj) in bj.iter().enumerate() {
            if bkj == 0.0 {
                continue;
            }
            for (d, &aik) in dst.iter_mut().zip(column(a, k)) {
                *d += aik * bkj;
            }
        }
    }
    out
}

pub fn norm_1(m: MatRef<'_, f64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.col(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Bytes held by a dense `f64` matrix.
pub fn mat_bytes(m: &Mat<f64>) -> usize {
    m.nrows() * m.ncols() * std::mem::size_of::<f64>()
}

/// Partial-pivoting LU of a square matrix together with an estimate of its
/// reciprocal 1-norm condition number.
pub struct Factorization {
    lu: PartialPivLu<f64>,
    rcond: f64,
}

impl std::fmt::Debug for Factorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Factorization")
            .field("n", &self.dim())
            .field("rcond", &self.rcond)
            .finish()
    }
}

impl Factorization {
    pub fn new(a: MatRef<'_, f64>) -> Self {
        assert_eq!(a.nrows(), a.ncols(), "factorization needs a square matrix");
        let anorm = norm_1(a);
        let lu = a.partial_piv_lu();
        let n = a.nrows();
        let u = lu.U();
        let has_zero_pivot = (0..n).any(|i| u[(i, i)] == 0.0 || !u[(i, i)].is_finite());
        let mut fact = Self { lu, rcond: 0.0 };
        fact.rcond = if n == 0 {
            1.0
        } else if has_zero_pivot || anorm == 0.0 {
            0.0
        } else {
            let inv_norm = fact.estimate_inverse_norm_1();
            if inv_norm.is_finite() && inv_norm > 0.0 {
                1.0 / (anorm * inv_norm)
            } else {
                0.0
            }
        };
        fact
    }

    pub fn rcond(&self) -> f64 {
        self.rcond
    }

    pub fn is_singular(&self) -> bool {
        self.rcond.is_nan() || self.rcond < SINGULAR_RCOND
    }

    pub fn dim(&self) -> usize {
        self.lu.U().nrows()
    }

    /// `A⁻¹ · rhs`.
    pub fn solve(&self, rhs: MatRef<'_, f64>) -> Mat<f64> {
        self.lu.solve(rhs)
    }

    pub fn solve_vec(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(rhs.len(), n, "right-hand side length");
        let fwd = self.lu.P().arrays().0;
        let mut x: Vec<f64> = fwd.iter().map(|&i| rhs[i]).collect();
        let (l, u) = (self.lu.L(), self.lu.U());
        for j in 0..n {
            let xj = x[j];
            if xj != 0.0 {
                let col = column(l, j);
                for i in j + 1..n {
                    x[i] -= col[i] * xj;
                }
            }
        }
        for j in (0..n).rev() {
            let col = column(u, j);
            x[j] /= col[j];
            let xj = x[j];
            for i in 0..j {
                x[i] -= col[i] * xj;
            }
        }
        x
    }

    fn solve_transpose_vec(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let (l, u) = (self.lu.L(), self.lu.U());
        let mut w = rhs.to_vec();
        for j in 0..n {
            let col = column(u, j);
            let dot: f64 = col[..j].iter().zip(&w[..j]).map(|(a, b)| a * b).sum();
            w[j] = (w[j] - dot) / col[j];
        }
        for j in (0..n).rev() {
            let col = column(l, j);
            let dot: f64 = col[j + 1..n]
                .iter()
                .zip(&w[j + 1..n])
                .map(|(a, b)| a * b)
                .sum();
            w[j] -= dot;
        }
        let fwd = self.lu.P().arrays().0;
        let mut z = vec![0.0; n];
        for (i, &k) in fwd.iter().enumerate() {
            z[k] = w[i];
        }
        z
    }

    /// Explicit inverse.
    pub fn inverse(&self) -> Mat<f64> {
        let n = self.dim();
        self.solve(Mat::<f64>::identity(n, n).as_ref())
    }

    /// Bytes held by the stored factors.
    pub fn bytes(&self) -> usize {
        let n = self.dim();
        n * n * std::mem::size_of::<f64>() + n * std::mem::size_of::<usize>()
    }
}

impl Factorization {
    /// Hager–Higham estimate of `‖A⁻¹‖₁`.
    fn estimate_inverse_norm_1(&self) -> f64 {
        let fact = self;
        let n = self.dim();
        let mut x = vec![1.0 / n as f64; n];
        let mut est = 0.0f64;
        let mut last_j = usize::MAX;
        for _ in 0..5 {
            let y = fact.solve_vec(&x);
            est = y.iter().map(|v| v.abs()).sum();
            let xi: Vec<f64> = y
                .iter()
                .map(|&v| if v >= 0.0 { 1.0 } else { -1.0 })
                .collect();
            let z = fact.solve_transpose_vec(&xi);
            let (j, zmax) = z.iter().enumerate().fold((0, 0.0f64), |(bj, bv), (i, v)| {
                if v.abs() > bv {
                    (i, v.abs())
                } else {
                    (bj, bv)
                }
            });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
            if zmax <= ztx || j == last_j {
                break;
            }
            x.iter_mut().for_each(|v| *v = 0.0);
            x[j] = 1.0;
            last_j = j;
        }
        // alternating test vector guards against the classic counterexamples
        let alt: Vec<f64> = (0..n)
            .map(|i| {
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                s * (1.0 + i as f64 / (n.max(2) - 1) as f64)
            })
            .collect();
        let y = fact.solve_vec(&alt);
        let alt_est = 2.0 * y.iter().map(|v| v.abs()).sum::<f64>() / (3.0 * n as f64);
        est.max(alt_est)
    }
}
