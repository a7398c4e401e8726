//! Merging two sibling Dirichlet-to-Neumann maps into the parent's map and
//! interface solution operator, plus the body-load update of the upward pass.
//!
//! With `J1`, `J2` the non-shared exterior nodes of `alpha` and `beta` and
//! `J3` their shared interface, equating the (global-frame) fluxes of both
//! children on `J3` gives
//!
//! ```text
//! (T33a - T33b) u3 = -T31a u1 + T32b u2 + (h3b - h3a)
//! ```
//!
//! so the pivot is a difference, not a sum.

use faer::Mat;

use crate::error::{HpsError, Result};
use crate::geometry::SiblingPartition;
use crate::linalg::{column, column_mut, matvec, Factorization};

/// Operators stored for a parent box.
#[derive(Debug)]
pub struct ParentOperators {
    /// `|J3| x (|J1| + |J2|)` interface solution operator.
    pub s_gi_ge: Mat<f64>,
    /// Parent DtN on `[J1; J2]`. Released once the grandparent is built,
    /// except at the root.
    pub t_ge_ge: Option<Mat<f64>>,
    /// Factorization of `T33a - T33b` (applies `X = (T33a - T33b)⁻¹`);
    /// kept only for body loads.
    pub x_gi_gi: Option<Factorization>,
    /// `[T13a; T23b]`, kept only for body loads.
    pub t13_t23: Option<Mat<f64>>,
}

impl ParentOperators {
    pub fn has_body(&self) -> bool {
        self.x_gi_gi.is_some() && self.t13_t23.is_some()
    }

    pub fn bytes(&self) -> usize {
        use crate::linalg::mat_bytes;
        mat_bytes(&self.s_gi_ge)
            + self.t_ge_ge.as_ref().map_or(0, mat_bytes)
            + self.x_gi_gi.as_ref().map_or(0, |f| f.bytes())
            + self.t13_t23.as_ref().map_or(0, mat_bytes)
    }
}

/// Merges the DtN maps of `alpha` and `beta` (indexed by their exterior
/// vectors) into those of their parent box `node`.
pub fn merge_siblings(
    t_alpha: &Mat<f64>,
    t_beta: &Mat<f64>,
    part: &SiblingPartition,
    keep_body: bool,
    node: usize,
) -> Result<ParentOperators> {
    let (n1, n2, n3) = (part.j1_local.len(), part.j2_local.len(), part.j3.len());
    let expect_alpha = n1 + n3;
    if t_alpha.nrows() != expect_alpha || t_alpha.ncols() != expect_alpha {
        return Err(HpsError::ShapeMismatch {
            expected: expect_alpha,
            got: t_alpha.nrows(),
        });
    }
    if t_beta.nrows() != n2 + n3 || t_beta.ncols() != n2 + n3 {
        return Err(HpsError::ShapeMismatch {
            expected: n2 + n3,
            got: t_beta.nrows(),
        });
    }
    if n3 == 0 {
        return Err(HpsError::ShapeMismatch {
            expected: 1,
            got: 0,
        });
    }
    let (ta, tb) = (t_alpha.as_ref(), t_beta.as_ref());
    let (j1, j2, j3a, j3b) = (
        &part.j1_local,
        &part.j2_local,
        &part.j3_alpha_local,
        &part.j3_beta_local,
    );

    let mut pivot = Mat::<f64>::zeros(n3, n3);
    for (j, (&ca, &cb)) in j3a.iter().zip(j3b).enumerate() {
        let (ca, cb) = (column(ta, ca), column(tb, cb));
        for (d, (&ra, &rb)) in column_mut(&mut pivot, j)
            .iter_mut()
            .zip(j3a.iter().zip(j3b))
        {
            *d = ca[ra] - cb[rb];
        }
    }
    let fact = Factorization::new(pivot.as_ref());
    if fact.is_singular() {
        return Err(HpsError::SingularInterfaceOperator {
            node,
            rcond: fact.rcond(),
        });
    }

    // [-T31a | T32b]
    let mut rhs = Mat::<f64>::zeros(n3, n1 + n2);
    for (j, &c) in j1.iter().enumerate() {
        let src = column(ta, c);
        for (d, &r) in column_mut(&mut rhs, j).iter_mut().zip(j3a) {
            *d = -src[r];
        }
    }
    for (j, &c) in j2.iter().enumerate() {
        let src = column(tb, c);
        for (d, &r) in column_mut(&mut rhs, n1 + j).iter_mut().zip(j3b) {
            *d = src[r];
        }
    }
    let s_gi_ge = fact.solve(rhs.as_ref());

    // [T13a; T23b]
    let mut coupling = Mat::<f64>::zeros(n1 + n2, n3);
    for (j, (&ca, &cb)) in j3a.iter().zip(j3b).enumerate() {
        let (ca, cb) = (column(ta, ca), column(tb, cb));
        let (top, bottom) = column_mut(&mut coupling, j).split_at_mut(n1);
        for (d, &r) in top.iter_mut().zip(j1) {
            *d = ca[r];
        }
        for (d, &r) in bottom.iter_mut().zip(j2) {
            *d = cb[r];
        }
    }

    // blockdiag(T11a, T22b) + [T13a; T23b] S
    let mut t = &coupling * &s_gi_ge;
    for (c, &jc) in j1.iter().enumerate() {
        let src = column(ta, jc);
        for (d, &r) in column_mut(&mut t, c)[..n1].iter_mut().zip(j1) {
            *d += src[r];
        }
    }
    for (c, &jc) in j2.iter().enumerate() {
        let src = column(tb, jc);
        for (d, &r) in column_mut(&mut t, n1 + c)[n1..].iter_mut().zip(j2) {
            *d += src[r];
        }
    }

    Ok(ParentOperators {
        s_gi_ge,
        t_ge_ge: Some(t),
        x_gi_gi: keep_body.then_some(fact),
        t13_t23: keep_body.then_some(coupling),
    })
}

/// Upward-pass update for a parent with body load: returns the particular
/// solution on the interface `w_gi = X (h3b - h3a)` and its exterior flux
/// `h_ge = [h1a; h2b] + [T13a; T23b] w_gi`.
pub fn upward_body_update(
    parent: &ParentOperators,
    h3_alpha: &[f64],
    h3_beta: &[f64],
    h1_alpha: &[f64],
    h2_beta: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (Some(x), Some(coupling)) = (&parent.x_gi_gi, &parent.t13_t23) else {
        return Err(HpsError::CacheMissingBodyOperators);
    };
    let n3 = x.dim();
    for v in [h3_alpha, h3_beta] {
        if v.len() != n3 {
            return Err(HpsError::ShapeMismatch {
                expected: n3,
                got: v.len(),
            });
        }
    }
    let n_ext = coupling.nrows();
    if h1_alpha.len() + h2_beta.len() != n_ext {
        return Err(HpsError::ShapeMismatch {
            expected: n_ext,
            got: h1_alpha.len() + h2_beta.len(),
        });
    }
    let jump: Vec<f64> = h3_beta.iter().zip(h3_alpha).map(|(b, a)| b - a).collect();
    let w_gi = if jump.iter().all(|v| *v == 0.0) {
        vec![0.0; n3]
    } else {
        x.solve_vec(&jump)
    };
    let mut h_ge = matvec(coupling.as_ref(), &w_gi);
    for (h, src) in h_ge.iter_mut().zip(h1_alpha.iter().chain(h2_beta)) {
        *h += src;
    }
    Ok((w_gi, h_ge))
}
