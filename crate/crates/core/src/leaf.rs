//! Leaf-level spectral collocation: the local operator on a `p x p`
//! Chebyshev grid, the leaf Dirichlet-to-Neumann matrix on the `4q` boundary
//! Gauss nodes, and the body-load operators.
//!
//! Chebyshev grid nodes are numbered `k = iy * p + ix` (x fastest).
//! Gauss boundary vectors follow the leaf ordering of the tree: South, East,
//! North, West, each ascending.

use std::sync::Arc;

use faer::Mat;

use crate::error::{HpsError, Result};
use crate::geometry::{BoxNode, Rect};
use crate::linalg::{column_mut, gather, mul_sparse_rhs, Factorization};
use crate::problem::Problem;
use crate::spectral::{
    barycentric_weights, cheb_nodes, diff_matrix, gauss_nodes, interp_matrix, lagrange_row,
    NodeSet1D,
};

/// Tensor Chebyshev grid on a rectangle with its 1D differentiation matrices.
#[derive(Debug, Clone)]
pub struct ChebGrid {
    pub rect: Rect,
    pub p: usize,
    pub xs: NodeSet1D,
    pub ys: NodeSet1D,
    pub dx: Mat<f64>,
    pub dy: Mat<f64>,
}

impl ChebGrid {
    pub fn new(rect: Rect, p: usize) -> Result<Self> {
        let xs = cheb_nodes(p, (rect.x0, rect.x1))?;
        let ys = cheb_nodes(p, (rect.y0, rect.y1))?;
        let dx = diff_matrix(&xs)?;
        let dy = diff_matrix(&ys)?;
        Ok(Self {
            rect,
            p,
            xs,
            ys,
            dx,
            dy,
        })
    }

    pub fn len(&self) -> usize {
        self.p * self.p
    }

    pub fn is_empty(&self) -> bool {
        self.p == 0
    }

    pub fn point(&self, k: usize) -> [f64; 2] {
        [self.xs.points()[k % self.p], self.ys.points()[k / self.p]]
    }

    pub fn is_boundary(&self, k: usize) -> bool {
        let (ix, iy) = (k % self.p, k / self.p);
        ix == 0 || iy == 0 || ix == self.p - 1 || iy == self.p - 1
    }

    /// Boundary (`4(p-1)`) and interior (`(p-2)²`) node indices, ascending.
    pub fn partition(&self) -> (Vec<usize>, Vec<usize>) {
        (0..self.len()).partition(|&k| self.is_boundary(k))
    }

    /// Evaluates the tensor interpolant of grid values `u` at `(x, y)`.
    pub fn interpolate(&self, u: &[f64], x: f64, y: f64) -> f64 {
        let lx = lagrange_row(&self.xs, &barycentric_weights(&self.xs), x);
        let ly = lagrange_row(&self.ys, &barycentric_weights(&self.ys), y);
        let p = self.p;
        ly.iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(iy, wy)| wy * (0..p).map(|ix| lx[ix] * u[iy * p + ix]).sum::<f64>())
            .sum()
    }
}

/// Discrete operator on one leaf's Chebyshev grid.
#[derive(Debug)]
pub struct LocalOperator {
    pub node: usize,
    pub grid: ChebGrid,
    /// `p² x p²` collocation matrix.
    pub a_full: Mat<f64>,
    pub j_ext: Vec<usize>,
    pub j_int: Vec<usize>,
    /// Factorization of `a_full[j_int, j_int]`.
    pub factor_ii: Factorization,
}

/// Assembles the collocation matrix of the problem's operator on a leaf and
/// factorizes its interior block.
pub fn assemble_local_operator(
    problem: &Problem,
    leaf: &BoxNode,
    p: usize,
) -> Result<LocalOperator> {
    if p < 4 {
        return Err(HpsError::InvalidCount {
            what: "chebyshev nodes per leaf side",
            value: p,
            min: 4,
        });
    }
    let grid = ChebGrid::new(leaf.rect, p)?;
    let (dx, dy) = (&grid.dx, &grid.dy);
    let dxx = dx * dx;
    let dyy = dy * dy;
    let n = p * p;
    let coeff = |f: &crate::problem::Field| -> Vec<f64> {
        (0..n)
            .map(|k| {
                let [x, y] = grid.point(k);
                f.eval(x, y)
            })
            .collect()
    };
    let (c11, c12, c22) = (
        coeff(&problem.c11),
        coeff(&problem.c12),
        coeff(&problem.c22),
    );
    let (c1, c2, c0) = (coeff(&problem.c1), coeff(&problem.c2), coeff(&problem.c));
    let has_cross = c12.iter().any(|&v| v != 0.0);

    // filled by columns: column j = (jx, jy) couples to rows in grid row jy
    // through d/dx, rows in grid column jx through d/dy, and all rows
    // through the mixed term
    let mut a = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        let (jx, jy) = (j % p, j / p);
        let col = column_mut(&mut a, j);
        for ix in 0..p {
            let k = jy * p + ix;
            col[k] += -c11[k] * dxx[(ix, jx)] + c1[k] * dx[(ix, jx)];
        }
        for iy in 0..p {
            let k = iy * p + jx;
            col[k] += -c22[k] * dyy[(iy, jy)] + c2[k] * dy[(iy, jy)];
        }
        if has_cross {
            for iy in 0..p {
                let dyv = dy[(iy, jy)];
                for ix in 0..p {
                    let k = iy * p + ix;
                    col[k] -= 2.0 * c12[k] * dx[(ix, jx)] * dyv;
                }
            }
        }
        col[j] += c0[j];
    }
    let (j_ext, j_int) = grid.partition();
    let factor_ii = Factorization::new(gather(a.as_ref(), &j_int, &j_int).as_ref());
    if factor_ii.is_singular() {
        return Err(HpsError::SingularInteriorBlock {
            node: leaf.index,
            rcond: factor_ii.rcond(),
        });
    }
    Ok(LocalOperator {
        node: leaf.index,
        grid,
        a_full: a,
        j_ext,
        j_int,
        factor_ii,
    })
}

/// Particular-solution operators for body loads.
#[derive(Debug, Clone)]
pub struct LeafBodyOperators {
    /// `p² x (p-2)²`: load at interior nodes to zero-boundary solution.
    pub f_c_ci: Mat<f64>,
    /// `4q x (p-2)²`: load at interior nodes to boundary Gauss fluxes.
    pub h_ge_ci: Mat<f64>,
}

#[derive(Debug, Clone)]
pub struct LeafOperators {
    /// `4q x 4q` Dirichlet-to-Neumann matrix.
    pub t: Mat<f64>,
    /// `p² x 4q`: boundary Gauss values to full Chebyshev grid values.
    pub s_c_ge: Mat<f64>,
    /// `4q x p²`: differentiate on the grid and retabulate to boundary Gauss
    /// nodes; shared by leaves of equal size.
    pub d_ge_c: Arc<Mat<f64>>,
    pub body: Option<LeafBodyOperators>,
}

/// Gauss nodes along the x and y sides of a rectangle.
fn side_gauss(rect: Rect, q: usize) -> Result<(NodeSet1D, NodeSet1D)> {
    Ok((
        gauss_nodes(q, (rect.x0, rect.x1))?,
        gauss_nodes(q, (rect.y0, rect.y1))?,
    ))
}

/// `4(p-1) x 4q` map from boundary Gauss values to boundary Chebyshev values.
/// Corners get the mean of the two adjacent sides' extrapolations.
pub fn gauss_to_cheb_boundary(grid: &ChebGrid, j_ext: &[usize], q: usize) -> Result<Mat<f64>> {
    let p = grid.p;
    let (gx, gy) = side_gauss(grid.rect, q)?;
    let ix_map = interp_matrix(&gx, &grid.xs)?;
    let iy_map = interp_matrix(&gy, &grid.ys)?;
    let mut l1 = Mat::<f64>::zeros(j_ext.len(), 4 * q);
    for (r, &k) in j_ext.iter().enumerate() {
        let (ix, iy) = (k % p, k / p);
        // (side block, interpolation row)
        let mut sides: Vec<(usize, &Mat<f64>, usize)> = Vec::with_capacity(2);
        if iy == 0 {
            sides.push((0, &ix_map, ix));
        }
        if ix == p - 1 {
            sides.push((1, &iy_map, iy));
        }
        if iy == p - 1 {
            sides.push((2, &ix_map, ix));
        }
        if ix == 0 {
            sides.push((3, &iy_map, iy));
        }
        let w = 1.0 / sides.len() as f64;
        for (block, m, row) in sides {
            for j in 0..q {
                l1[(r, block * q + j)] += w * m[(row, j)];
            }
        }
    }
    Ok(l1)
}

/// `4q x p²` map: `d/dx2` on horizontal sides and `d/dx1` on vertical sides
/// of the grid, then each side retabulated from `p` Chebyshev to `q` Gauss
/// points.
pub fn flux_to_gauss(grid: &ChebGrid, q: usize) -> Result<Mat<f64>> {
    let p = grid.p;
    let (gx, gy) = side_gauss(grid.rect, q)?;
    let bx = interp_matrix(&grid.xs, &gx)?;
    let by = interp_matrix(&grid.ys, &gy)?;
    let (dx, dy) = (&grid.dx, &grid.dy);
    let mut d = Mat::<f64>::zeros(4 * q, p * p);
    for g in 0..q {
        for i in 0..p {
            for m in 0..p {
                // South (iy = 0) and North (iy = p-1): row ix = i, derivative in y
                d[(g, m * p + i)] += bx[(g, i)] * dy[(0, m)];
                d[(2 * q + g, m * p + i)] += bx[(g, i)] * dy[(p - 1, m)];
                // East (ix = p-1) and West (ix = 0): row iy = i, derivative in x
                d[(q + g, i * p + m)] += by[(g, i)] * dx[(p - 1, m)];
                d[(3 * q + g, i * p + m)] += by[(g, i)] * dx[(0, m)];
            }
        }
    }
    Ok(d)
}

/// Boundary retabulation maps of a leaf. They depend only on the leaf's
/// size, so leaves of equal size can share one copy.
#[derive(Debug, Clone)]
pub struct BoundaryMaps {
    /// Gauss-to-Chebyshev boundary map, see [`gauss_to_cheb_boundary`].
    pub l1: Mat<f64>,
    /// Flux map, see [`flux_to_gauss`].
    pub d_ge_c: Arc<Mat<f64>>,
}

impl BoundaryMaps {
    pub fn new(grid: &ChebGrid, q: usize) -> Result<Self> {
        let (j_ext, _) = grid.partition();
        Ok(Self {
            l1: gauss_to_cheb_boundary(grid, &j_ext, q)?,
            d_ge_c: Arc::new(flux_to_gauss(grid, q)?),
        })
    }

    pub fn q(&self) -> usize {
        self.l1.ncols() / 4
    }
}

/// Builds the leaf Dirichlet-to-Neumann matrix as the product of four maps:
/// Gauss-to-Chebyshev boundary retabulation, interior spectral solve,
/// spectral differentiation, and Chebyshev-to-Gauss retabulation.
pub fn build_leaf_dtn(local: &LocalOperator, q: usize) -> Result<LeafOperators> {
    let maps = BoundaryMaps::new(&local.grid, q)?;
    Ok(build_leaf_dtn_with(local, &maps))
}

/// [`build_leaf_dtn`] with precomputed boundary maps for the leaf's size.
pub fn build_leaf_dtn_with(local: &LocalOperator, maps: &BoundaryMaps) -> LeafOperators {
    let grid = &local.grid;
    let q = maps.q();
    let l1 = &maps.l1;
    let a_ie = gather(local.a_full.as_ref(), &local.j_int, &local.j_ext);
    let interior = local
        .factor_ii
        .solve(mul_sparse_rhs(a_ie.as_ref(), l1.as_ref()).as_ref());

    // boundary rows from L1, interior rows from -A_ii⁻¹ A_ie L1
    let mut s_c_ge = Mat::<f64>::zeros(grid.len(), 4 * q);
    for j in 0..4 * q {
        for (r, &k) in local.j_ext.iter().enumerate() {
            s_c_ge[(k, j)] = l1[(r, j)];
        }
        for (r, &k) in local.j_int.iter().enumerate() {
            s_c_ge[(k, j)] = -interior[(r, j)];
        }
    }
    let t = &*maps.d_ge_c * &s_c_ge;
    LeafOperators {
        t,
        s_c_ge,
        d_ge_c: maps.d_ge_c.clone(),
        body: None,
    }
}

/// Particular-solution operators `F = [0; A_ii⁻¹]` (rows placed at the
/// grid's interior nodes) and `H = D_ge,c · F`.
pub fn build_leaf_body_ops(local: &LocalOperator, ops: &LeafOperators) -> LeafBodyOperators {
    let inv = local.factor_ii.inverse();
    let mut f_c_ci = Mat::<f64>::zeros(local.grid.len(), local.j_int.len());
    for (r, &k) in local.j_int.iter().enumerate() {
        f_c_ci.row_mut(k).copy_from(inv.row(r));
    }
    let h_ge_ci = &*ops.d_ge_c * &f_c_ci;
    LeafBodyOperators { f_c_ci, h_ge_ci }
}

/// Coordinates of a leaf's `4q` boundary Gauss nodes in S, E, N, W order.
pub fn leaf_gauss_points(rect: Rect, q: usize) -> Result<Vec<[f64; 2]>> {
    let (gx, gy) = side_gauss(rect, q)?;
    let mut pts = Vec::with_capacity(4 * q);
    pts.extend(gx.points().iter().map(|&x| [x, rect.y0]));
    pts.extend(gy.points().iter().map(|&y| [rect.x1, y]));
    pts.extend(gx.points().iter().map(|&x| [x, rect.y1]));
    pts.extend(gy.points().iter().map(|&y| [rect.x0, y]));
    Ok(pts)
}
