//! One-dimensional spectral primitives.
//!
//! Chebyshev–Lobatto and Gauss–Legendre node sets on an arbitrary interval,
//! differentiation matrices for the interpolating polynomial through a node
//! set, and barycentric interpolation matrices between node sets.

use std::f64::consts::PI;

use faer::Mat;

use crate::error::{HpsError, Result};

/// Family a [`NodeSet1D`] was generated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    /// Chebyshev extreme points, endpoints included.
    Chebyshev,
    /// Roots of the Legendre polynomial, endpoints excluded.
    GaussLegendre,
    Arbitrary,
}

/// Ordered set of points on an interval `[a, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet1D {
    points: Vec<f64>,
    interval: (f64, f64),
    kind: NodeKind,
}

impl NodeSet1D {
    /// Wraps user supplied points. Points must be strictly increasing and lie
    /// inside `interval`.
    pub fn arbitrary(points: Vec<f64>, interval: (f64, f64)) -> Result<Self> {
        check_interval(interval)?;
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(HpsError::DuplicateNodes);
        }
        if points
            .iter()
            .any(|&x| x < interval.0 || x > interval.1 || !x.is_finite())
        {
            return Err(HpsError::InvalidParams(format!(
                "node set points must lie in [{}, {}]",
                interval.0, interval.1
            )));
        }
        Ok(Self {
            points,
            interval,
            kind: NodeKind::Arbitrary,
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn kind(&self) -> NodeKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn check_interval((a, b): (f64, f64)) -> Result<()> {
    if !a.is_finite() || !b.is_finite() || a >= b {
        return Err(HpsError::DegenerateInterval { a, b });
    }
    Ok(())
}

/// The `p` Chebyshev extreme points mapped to `[a, b]`, ascending.
pub fn cheb_nodes(p: usize, interval: (f64, f64)) -> Result<NodeSet1D> {
    if p < 2 {
        return Err(HpsError::InvalidCount {
            what: "chebyshev nodes",
            value: p,
            min: 2,
        });
    }
    check_interval(interval)?;
    let (a, b) = interval;
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    let m = (p - 1) as f64;
    // sin form gives nodes that are exactly antisymmetric about the midpoint
    let points = (0..p)
        .map(|k| {
            let t = (PI * (2.0 * k as f64 - m) / (2.0 * m)).sin();
            if k == 0 {
                a
            } else if k == p - 1 {
                b
            } else {
                mid + half * t
            }
        })
        .collect();
    Ok(NodeSet1D {
        points,
        interval,
        kind: NodeKind::Chebyshev,
    })
}

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// The `q` Gauss–Legendre points mapped to `[a, b]`, ascending.
pub fn gauss_nodes(q: usize, interval: (f64, f64)) -> Result<NodeSet1D> {
    if q < 1 {
        return Err(HpsError::InvalidCount {
            what: "gauss nodes",
            value: q,
            min: 1,
        });
    }
    check_interval(interval)?;
    let (a, b) = interval;
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));

    // roots on [-1, 1], descending, computed for the upper half and mirrored
    let mut roots = vec![0.0; q];
    let nf = q as f64;
    for i in 0..q.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(q, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= 1e-15 {
                break;
            }
        }
        roots[i] = x;
        roots[q - 1 - i] = -x;
    }
    if q % 2 == 1 {
        roots[q / 2] = 0.0;
    }
    let points = roots.iter().rev().map(|&t| mid + half * t).collect();
    Ok(NodeSet1D {
        points,
        interval,
        kind: NodeKind::GaussLegendre,
    })
}

/// Barycentric weights of the node set, normalized to keep products O(1)
/// regardless of interval length.
pub fn barycentric_weights(nodes: &NodeSet1D) -> Vec<f64> {
    let (a, b) = nodes.interval;
    let scale = 4.0 / (b - a);
    let x = &nodes.points;
    let mut w: Vec<f64> = (0..x.len())
        .map(|j| {
            let prod: f64 = (0..x.len())
                .filter(|&k| k != j)
                .map(|k| (x[j] - x[k]) * scale)
                .product();
            1.0 / prod
        })
        .collect();
    let wmax = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    w.iter_mut().for_each(|v| *v /= wmax);
    w
}

fn check_distinct(points: &[f64]) -> Result<()> {
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if points[i] == points[j] {
                return Err(HpsError::DuplicateNodes);
            }
        }
    }
    Ok(())
}

/// Differentiation matrix on the node set: `D · f(x)` is the derivative of
/// the interpolating polynomial of `f` evaluated at the same nodes.
pub fn diff_matrix(nodes: &NodeSet1D) -> Result<Mat<f64>> {
    let n = nodes.len();
    if n < 2 {
        return Err(HpsError::InvalidCount {
            what: "differentiation nodes",
            value: n,
            min: 2,
        });
    }
    check_distinct(&nodes.points)?;
    let x = &nodes.points;
    let w = barycentric_weights(nodes);
    let mut d = Mat::<f64>::zeros(n, n);
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                let v = (w[j] / w[i]) / (x[i] - x[j]);
                d[(i, j)] = v;
                diag -= v;
            }
        }
        d[(i, i)] = diag;
    }
    Ok(d)
}

/// Lagrange basis of `source` evaluated at a single point.
pub fn lagrange_row(source: &NodeSet1D, weights: &[f64], y: f64) -> Vec<f64> {
    let x = &source.points;
    let mut row = vec![0.0; x.len()];
    if let Some(j) = x.iter().position(|&xj| xj == y) {
        row[j] = 1.0;
        return row;
    }
    let mut denom = 0.0;
    for j in 0..x.len() {
        let t = weights[j] / (y - x[j]);
        row[j] = t;
        denom += t;
    }
    row.iter_mut().for_each(|v| *v /= denom);
    row
}

/// Matrix mapping values at `source` nodes to values of the interpolating
/// polynomial at `target` nodes.
pub fn interp_matrix(source: &NodeSet1D, target: &NodeSet1D) -> Result<Mat<f64>> {
    check_distinct(&source.points)?;
    let w = barycentric_weights(source);
    let mut m = Mat::<f64>::zeros(target.len(), source.len());
    for (i, &y) in target.points.iter().enumerate() {
        for (j, v) in lagrange_row(source, &w, y).into_iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    Ok(m)
}
