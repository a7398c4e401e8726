//! Independent reference solver for the integration tests: global Chebyshev
//! collocation on a whole rectangle, built from textbook closed forms
//! (second-kind Chebyshev points, the explicit differentiation matrix and
//! the closed-form barycentric weights) without using the crate's spectral
//! or leaf code.

#![allow(dead_code)]

use faer::linalg::solvers::Solve;
use faer::Mat;
use std::f64::consts::PI;

/// Chebyshev points of the second kind mapped to `[a, b]`, ascending.
pub fn cheb_points(n: usize, a: f64, b: f64) -> Vec<f64> {
    (0..n)
        .map(|j| {
            let t = -(PI * j as f64 / (n - 1) as f64).cos();
            0.5 * (a + b) + 0.5 * (b - a) * t
        })
        .collect()
}

/// Explicit differentiation matrix on second-kind Chebyshev points
/// (ascending ordering), scaled to `[a, b]`.
pub fn cheb_diff(n: usize, a: f64, b: f64) -> Vec<Vec<f64>> {
    let m = n - 1;
    // descending reference nodes cos(pi j / m)
    let x: Vec<f64> = (0..n).map(|j| (PI * j as f64 / m as f64).cos()).collect();
    let c = |j: usize| {
        let s = if j.is_multiple_of(2) { 1.0 } else { -1.0 };
        if j == 0 || j == m {
            2.0 * s
        } else {
            s
        }
    };
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                d[i][j] = c(i) / c(j) / (x[i] - x[j]);
            }
        }
    }
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = -row
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, v)| v)
            .sum::<f64>();
    }
    // ascending node i is descending node m - i
    let scale = 2.0 / (b - a);
    (0..n)
        .map(|i| (0..n).map(|j| scale * d[m - i][m - j]).collect())
        .collect()
}

/// Closed-form barycentric interpolation row on second-kind Chebyshev
/// points.
pub fn cheb_interp_row(nodes: &[f64], y: f64) -> Vec<f64> {
    let n = nodes.len();
    if let Some(k) = nodes.iter().position(|&x| x == y) {
        let mut r = vec![0.0; n];
        r[k] = 1.0;
        return r;
    }
    let w = |j: usize| {
        let s = if j.is_multiple_of(2) { 1.0 } else { -1.0 };
        if j == 0 || j == n - 1 {
            0.5 * s
        } else {
            s
        }
    };
    let terms: Vec<f64> = (0..n).map(|j| w(j) / (y - nodes[j])).collect();
    let total: f64 = terms.iter().sum();
    terms.iter().map(|t| t / total).collect()
}

pub type Coefficients = dyn Fn(f64, f64) -> [f64; 6];

/// Solution of `A u = g` on a rectangle with `u = f` on the boundary,
/// collocated on an `nx x ny` Chebyshev tensor grid.
pub struct DenseCollocation {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Values, `k = iy * nx + ix`.
    pub u: Vec<f64>,
    dx: Vec<Vec<f64>>,
    dy: Vec<Vec<f64>>,
}

impl DenseCollocation {
    /// `coeffs(x, y) = [c11, c12, c22, c1, c2, c]` for
    /// `A = -c11 dxx - 2 c12 dxy - c22 dyy + c1 dx + c2 dy + c`.
    pub fn solve(
        rect: [f64; 4],
        nx: usize,
        ny: usize,
        coeffs: &Coefficients,
        g: &dyn Fn(f64, f64) -> f64,
        f: &dyn Fn(f64, f64) -> f64,
    ) -> Self {
        let [x0, x1, y0, y1] = rect;
        let xs = cheb_points(nx, x0, x1);
        let ys = cheb_points(ny, y0, y1);
        let dx = cheb_diff(nx, x0, x1);
        let dy = cheb_diff(ny, y0, y1);
        let dxx = square(&dx);
        let dyy = square(&dy);
        let n = nx * ny;
        let mut a = Mat::<f64>::zeros(n, n);
        let mut rhs = Mat::<f64>::zeros(n, 1);
        for iy in 0..ny {
            for ix in 0..nx {
                let k = iy * nx + ix;
                let (x, y) = (xs[ix], ys[iy]);
                if ix == 0 || iy == 0 || ix == nx - 1 || iy == ny - 1 {
                    a[(k, k)] = 1.0;
                    rhs[(k, 0)] = f(x, y);
                    continue;
                }
                let [c11, c12, c22, c1, c2, c0] = coeffs(x, y);
                for m in 0..nx {
                    a[(k, iy * nx + m)] += -c11 * dxx[ix][m] + c1 * dx[ix][m];
                }
                for m in 0..ny {
                    a[(k, m * nx + ix)] += -c22 * dyy[iy][m] + c2 * dy[iy][m];
                }
                for my in 0..ny {
                    for mx in 0..nx {
                        a[(k, my * nx + mx)] -= 2.0 * c12 * dx[ix][mx] * dy[iy][my];
                    }
                }
                a[(k, k)] += c0;
                rhs[(k, 0)] = g(x, y);
            }
        }
        let sol = a.partial_piv_lu().solve(&rhs);
        Self {
            xs,
            ys,
            u: (0..n).map(|k| sol[(k, 0)]).collect(),
            dx,
            dy,
        }
    }

    pub fn laplace(rect: [f64; 4], nx: usize, ny: usize, f: &dyn Fn(f64, f64) -> f64) -> Self {
        Self::solve(
            rect,
            nx,
            ny,
            &|_, _| [1.0, 0.0, 1.0, 0.0, 0.0, 0.0],
            &|_, _| 0.0,
            f,
        )
    }

    fn tensor_eval(&self, vals: &[f64], x: f64, y: f64) -> f64 {
        let lx = cheb_interp_row(&self.xs, x);
        let ly = cheb_interp_row(&self.ys, y);
        let nx = self.xs.len();
        ly.iter()
            .enumerate()
            .map(|(iy, wy)| wy * (0..nx).map(|ix| lx[ix] * vals[iy * nx + ix]).sum::<f64>())
            .sum()
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        self.tensor_eval(&self.u, x, y)
    }

    pub fn du_dx(&self, x: f64, y: f64) -> f64 {
        let nx = self.xs.len();
        let d: Vec<f64> = (0..self.u.len())
            .map(|k| {
                let (ix, iy) = (k % nx, k / nx);
                (0..nx).map(|m| self.dx[ix][m] * self.u[iy * nx + m]).sum()
            })
            .collect();
        self.tensor_eval(&d, x, y)
    }

    pub fn du_dy(&self, x: f64, y: f64) -> f64 {
        let nx = self.xs.len();
        let ny = self.ys.len();
        let d: Vec<f64> = (0..self.u.len())
            .map(|k| {
                let (ix, iy) = (k % nx, k / nx);
                (0..ny).map(|m| self.dy[iy][m] * self.u[m * nx + ix]).sum()
            })
            .collect();
        self.tensor_eval(&d, x, y)
    }
}

fn square(d: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = d.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).map(|k| d[i][k] * d[k][j]).sum())
                .collect()
        })
        .collect()
}

/// Max-abs of a slice.
pub fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_reproduces_a_smooth_harmonic_field() {
        let u = |x: f64, y: f64| x.exp() * y.cos();
        let sol = DenseCollocation::laplace([0.0, 2.0, 0.0, 1.0], 30, 20, &u);
        for &(x, y) in &[(0.3, 0.4), (1.7, 0.9), (1.0, 0.5)] {
            assert!((sol.value(x, y) - u(x, y)).abs() < 1e-11);
            assert!((sol.du_dx(x, y) - u(x, y)).abs() < 1e-9);
            assert!((sol.du_dy(x, y) + x.exp() * y.sin()).abs() < 1e-9);
        }
    }
}
