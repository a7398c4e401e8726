//! Elliptic operator, boundary data and body load, plus a catalogue of
//! manufactured problems with known exact solutions.
//!
//! The operator is
//!
//! ```text
//! A u = -c11 u_xx - 2 c12 u_xy - c22 u_yy + c1 u_x + c2 u_y + c u
//! ```
//!
//! with Dirichlet data `u = f` on the boundary and body load `A u = g`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{HpsError, Result};
use crate::geometry::{BoxNode, Rect};
use crate::leaf::{assemble_local_operator, ChebGrid};

type ScalarFn = dyn Fn(f64, f64) -> f64 + Send + Sync;

/// Real-valued field over the plane. Constant fields are kept symbolic so
/// that an identically zero body load can be recognized.
#[derive(Clone)]
pub enum Field {
    Constant(f64),
    Function(Arc<ScalarFn>),
}

impl Field {
    pub fn new(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Field::Function(Arc::new(f))
    }

    pub fn zero() -> Self {
        Field::Constant(0.0)
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Field::Constant(c) => *c,
            Field::Function(f) => f(x, y),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Field::Constant(c) if *c == 0.0)
    }

    pub fn scaled(&self, s: f64) -> Field {
        match self {
            Field::Constant(c) => Field::Constant(c * s),
            Field::Function(f) => {
                let f = f.clone();
                Field::new(move |x, y| s * f(x, y))
            }
        }
    }
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::Constant(c) => write!(f, "Field::Constant({c})"),
            Field::Function(_) => f.write_str("Field::Function(..)"),
        }
    }
}

impl From<f64> for Field {
    fn from(c: f64) -> Self {
        Field::Constant(c)
    }
}

/// Exact solution with first and second derivatives.
#[derive(Clone)]
pub struct ExactSolution {
    pub value: Arc<ScalarFn>,
    pub gradient: Arc<dyn Fn(f64, f64) -> [f64; 2] + Send + Sync>,
    /// `[u_xx, u_xy, u_yy]`
    pub hessian: Arc<dyn Fn(f64, f64) -> [f64; 3] + Send + Sync>,
}

impl fmt::Debug for ExactSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ExactSolution { .. }")
    }
}

/// What to do when the ellipticity check fails at a collocation node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EllipticityPolicy {
    #[default]
    Error,
    Warn,
}

#[derive(Debug, Clone)]
pub struct Problem {
    pub domain: Rect,
    pub c11: Field,
    pub c12: Field,
    pub c22: Field,
    pub c1: Field,
    pub c2: Field,
    pub c: Field,
    /// Dirichlet data.
    pub f: Field,
    /// Body load.
    pub g: Field,
    pub exact: Option<ExactSolution>,
}

impl Problem {
    /// `-Δu = 0` on `domain` with the given Dirichlet data.
    pub fn laplace(domain: Rect, f: Field) -> Self {
        Self {
            domain,
            c11: 1.0.into(),
            c12: 0.0.into(),
            c22: 1.0.into(),
            c1: 0.0.into(),
            c2: 0.0.into(),
            c: 0.0.into(),
            f,
            g: Field::zero(),
            exact: None,
        }
    }

    /// Pointwise operator applied to the exact solution.
    pub fn apply_exact(&self, x: f64, y: f64) -> Option<f64> {
        let e = self.exact.as_ref()?;
        let u = (e.value)(x, y);
        let [ux, uy] = (e.gradient)(x, y);
        let [uxx, uxy, uyy] = (e.hessian)(x, y);
        Some(
            -self.c11.eval(x, y) * uxx
                - 2.0 * self.c12.eval(x, y) * uxy
                - self.c22.eval(x, y) * uyy
                + self.c1.eval(x, y) * ux
                + self.c2.eval(x, y) * uy
                + self.c.eval(x, y) * u,
        )
    }

    /// Checks `c11 > 0`, `c22 > 0`, `c11 c22 - c12² > 0` at the given points.
    pub fn check_ellipticity(
        &self,
        points: impl IntoIterator<Item = (f64, f64)>,
        policy: EllipticityPolicy,
    ) -> Result<()> {
        for (x, y) in points {
            let (c11, c12, c22) = (
                self.c11.eval(x, y),
                self.c12.eval(x, y),
                self.c22.eval(x, y),
            );
            if !(c11 > 0.0 && c22 > 0.0 && c11 * c22 - c12 * c12 > 0.0) {
                let err = HpsError::NotElliptic {
                    x,
                    y,
                    c11,
                    c12,
                    c22,
                };
                match policy {
                    EllipticityPolicy::Error => return Err(err),
                    EllipticityPolicy::Warn => {
                        log::warn!("{err}");
                        return Ok(());
                    }
                }
            }
        }
        Ok(())
    }
}

/// A problem whose exact solution is known.
#[derive(Debug, Clone)]
pub struct ManufacturedCase {
    pub name: String,
    pub problem: Problem,
}

impl ManufacturedCase {
    pub fn exact(&self) -> &ExactSolution {
        self.problem
            .exact
            .as_ref()
            .expect("manufactured cases carry an exact solution")
    }

    pub fn exact_value(&self, x: f64, y: f64) -> f64 {
        (self.exact().value)(x, y)
    }

    /// `A u* - g` at a point; zero up to rounding for a consistent case.
    pub fn pointwise_residual(&self, x: f64, y: f64) -> f64 {
        self.problem.apply_exact(x, y).unwrap() - self.problem.g.eval(x, y)
    }
}

pub const CATALOGUE: [&str; 4] = [
    "laplace_harmonic",
    "poisson_trig",
    "helmholtz_variable",
    "convection_dominated",
];

pub type Params = BTreeMap<String, f64>;

fn take_params(name: &str, params: &Params, allowed: &[(&str, f64)]) -> Result<Vec<f64>> {
    if let Some(k) = params.keys().find(|k| !allowed.iter().any(|(a, _)| a == k)) {
        return Err(HpsError::InvalidParams(format!(
            "case {name} has no parameter `{k}` (known: {})",
            allowed
                .iter()
                .map(|(a, _)| *a)
                .collect::<Vec<_>>()
                .join(", ")
        )));
    }
    let vals: Vec<f64> = allowed
        .iter()
        .map(|(k, d)| params.get(*k).copied().unwrap_or(*d))
        .collect();
    if let Some(((k, _), v)) = allowed.iter().zip(&vals).find(|(_, v)| !v.is_finite()) {
        return Err(HpsError::InvalidParams(format!("{k} = {v} is not finite")));
    }
    Ok(vals)
}

fn exact(
    value: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    gradient: impl Fn(f64, f64) -> [f64; 2] + Send + Sync + 'static,
    hessian: impl Fn(f64, f64) -> [f64; 3] + Send + Sync + 'static,
) -> ExactSolution {
    ExactSolution {
        value: Arc::new(value),
        gradient: Arc::new(gradient),
        hessian: Arc::new(hessian),
    }
}

/// Smooth weight used by the variable Helmholtz case: dips from 1 to 0.5 at
/// the centre of the unit square.
fn helmholtz_weight(x: f64, y: f64) -> f64 {
    1.0 - 0.5 * (-20.0 * ((x - 0.5).powi(2) + (y - 0.5).powi(2))).exp()
}

/// Looks up a manufactured case on the unit square.
///
/// * `laplace_harmonic` (`k`, default 2): `u = sin(kx) sinh(ky)`, `-Δu = 0`.
/// * `poisson_trig` (`a`, `b`, default 1): `u = sin(aπx) sin(bπy)`, `-Δu = g`.
/// * `helmholtz_variable` (`kappa`, default 20π; `theta`, default 0.3):
///   `-Δu - κ² b(x) u = g` with a plane wave `u = sin(κ (x cos θ + y sin θ))`.
/// * `convection_dominated` (`lambda`, default 1e3; `vx`, `vy`, default 1,
///   0.5): `-Δu + λ (vx u_x + vy u_y) = g` with `u = sin(πx) cos(πy)`.
pub fn catalogue(name: &str, params: &Params) -> Result<ManufacturedCase> {
    let domain = Rect::unit();
    let problem = match name {
        "laplace_harmonic" => {
            let [k] = take_params(name, params, &[("k", 2.0)])?[..] else {
                unreachable!()
            };
            let u = exact(
                move |x, y| (k * x).sin() * (k * y).sinh(),
                move |x, y| {
                    [
                        k * (k * x).cos() * (k * y).sinh(),
                        k * (k * x).sin() * (k * y).cosh(),
                    ]
                },
                move |x, y| {
                    let (s, c) = (k * x).sin_cos();
                    [
                        -k * k * s * (k * y).sinh(),
                        k * k * c * (k * y).cosh(),
                        k * k * s * (k * y).sinh(),
                    ]
                },
            );
            let value = u.value.clone();
            Problem {
                f: Field::Function(value),
                exact: Some(u),
                ..Problem::laplace(domain, Field::zero())
            }
        }
        "poisson_trig" => {
            let [a, b] = take_params(name, params, &[("a", 1.0), ("b", 1.0)])?[..] else {
                unreachable!()
            };
            let (ka, kb) = (a * PI, b * PI);
            let u = exact(
                move |x, y| (ka * x).sin() * (kb * y).sin(),
                move |x, y| {
                    [
                        ka * (ka * x).cos() * (kb * y).sin(),
                        kb * (ka * x).sin() * (kb * y).cos(),
                    ]
                },
                move |x, y| {
                    let (sx, cx) = (ka * x).sin_cos();
                    let (sy, cy) = (kb * y).sin_cos();
                    [-ka * ka * sx * sy, ka * kb * cx * cy, -kb * kb * sx * sy]
                },
            );
            let value = u.value.clone();
            let lap = ka * ka + kb * kb;
            Problem {
                f: Field::Function(value.clone()),
                g: Field::new(move |x, y| lap * value(x, y)),
                exact: Some(u),
                ..Problem::laplace(domain, Field::zero())
            }
        }
        "helmholtz_variable" => {
            let [kappa, theta] =
                take_params(name, params, &[("kappa", 20.0 * PI), ("theta", 0.3)])?[..]
            else {
                unreachable!()
            };
            if kappa <= 0.0 {
                return Err(HpsError::InvalidParams(format!(
                    "kappa must be positive, got {kappa}"
                )));
            }
            let (kx, ky) = (kappa * theta.cos(), kappa * theta.sin());
            let u = exact(
                move |x, y| (kx * x + ky * y).sin(),
                move |x, y| {
                    let c = (kx * x + ky * y).cos();
                    [kx * c, ky * c]
                },
                move |x, y| {
                    let s = (kx * x + ky * y).sin();
                    [-kx * kx * s, -kx * ky * s, -ky * ky * s]
                },
            );
            let value = u.value.clone();
            let k2 = kappa * kappa;
            let value_g = value.clone();
            Problem {
                c: Field::new(move |x, y| -k2 * helmholtz_weight(x, y)),
                f: Field::Function(value),
                // -Δu = κ² u for the plane wave
                g: Field::new(move |x, y| k2 * (1.0 - helmholtz_weight(x, y)) * value_g(x, y)),
                exact: Some(u),
                ..Problem::laplace(domain, Field::zero())
            }
        }
        "convection_dominated" => {
            let [lambda, vx, vy] =
                take_params(name, params, &[("lambda", 1e3), ("vx", 1.0), ("vy", 0.5)])?[..]
            else {
                unreachable!()
            };
            if lambda < 0.0 {
                return Err(HpsError::InvalidParams(format!(
                    "lambda must be non-negative, got {lambda}"
                )));
            }
            let u = exact(
                |x, y| (PI * x).sin() * (PI * y).cos(),
                |x, y| {
                    [
                        PI * (PI * x).cos() * (PI * y).cos(),
                        -PI * (PI * x).sin() * (PI * y).sin(),
                    ]
                },
                |x, y| {
                    let (sx, cx) = (PI * x).sin_cos();
                    let (sy, cy) = (PI * y).sin_cos();
                    [-PI * PI * sx * cy, -PI * PI * cx * sy, -PI * PI * sx * cy]
                },
            );
            let value = u.value.clone();
            let grad = u.gradient.clone();
            let (bx, by) = (lambda * vx, lambda * vy);
            Problem {
                c1: Field::Constant(bx),
                c2: Field::Constant(by),
                f: Field::Function(value.clone()),
                g: Field::new(move |x, y| {
                    let [ux, uy] = grad(x, y);
                    2.0 * PI * PI * value(x, y) + bx * ux + by * uy
                }),
                exact: Some(u),
                ..Problem::laplace(domain, Field::zero())
            }
        }
        other => return Err(HpsError::UnknownCase(other.to_string())),
    };
    Ok(ManufacturedCase {
        name: name.to_string(),
        problem,
    })
}

/// `A_local · u - g` at the interior Chebyshev nodes of a leaf, where
/// `u_values` is tabulated on the leaf's `p x p` grid (x fastest).
pub fn residual(problem: &Problem, u_values: &[f64], leaf: &BoxNode, p: usize) -> Result<Vec<f64>> {
    if u_values.len() != p * p {
        return Err(HpsError::ShapeMismatch {
            expected: p * p,
            got: u_values.len(),
        });
    }
    let grid = ChebGrid::new(leaf.rect, p)?;
    let local = assemble_local_operator(problem, leaf, p)?;
    Ok(local
        .j_int
        .iter()
        .map(|&k| {
            let row = local.a_full.row(k);
            let au: f64 = row.iter().zip(u_values).map(|(a, u)| a * u).sum();
            let [x, y] = grid.point(k);
            au - problem.g.eval(x, y)
        })
        .collect())
}
