//! End-to-end acceptance suite: prints one PASS/FAIL line per criterion and
//! fails if any criterion fails.

mod common;

use common::{max_abs, DenseCollocation};
use hps::cli::{cmd_bench, run_case, with_threads, RunConfig};
use hps::geometry::EdgeOrientation;
use hps::leaf::{assemble_local_operator, build_leaf_dtn, leaf_gauss_points};
use hps::linalg::matvec;
use hps::spectral::{cheb_nodes, diff_matrix, gauss_nodes, interp_matrix, NodeSet1D};
use hps::{build, build_tree, solve, BuildOptions, Field, HpsError, Params, Problem, Rect};
use std::f64::consts::PI;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn params(kv: &[(&str, f64)]) -> Params {
    kv.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

/// Monomial-free test polynomial: a Chebyshev series with unit coefficients
/// alternating in sign, evaluated through the three-term recurrence.
fn cheb_series(degree: usize, t: f64) -> (f64, f64) {
    // returns (value, derivative) of sum_k (-1)^k T_k(t)
    let (mut t0, mut t1) = (1.0, t);
    let (mut d0, mut d1) = (0.0, 1.0);
    let (mut v, mut dv) = (1.0, 0.0);
    for k in 1..=degree {
        let s = if k % 2 == 0 { 1.0 } else { -1.0 };
        v += s * t1;
        dv += s * d1;
        let t2 = 2.0 * t * t1 - t0;
        let d2 = 2.0 * t1 + 2.0 * t * d1 - d0;
        (t0, t1, d0, d1) = (t1, t2, d1, d2);
    }
    (v, dv)
}

fn spectral_primitives() -> Outcome {
    let (a, b) = (-0.7, 1.9);
    let to_ref = |x: f64| (2.0 * x - a - b) / (b - a);
    let mut worst = 0.0f64;
    for n in 4..=24 {
        let deg = n - 1;
        let f = |x: f64| cheb_series(deg, to_ref(x)).0;
        let df = |x: f64| cheb_series(deg, to_ref(x)).1 * 2.0 / (b - a);
        let check = |src: &NodeSet1D, dst: &NodeSet1D| {
            let m = interp_matrix(src, dst).unwrap();
            let vals: Vec<f64> = src.points().iter().map(|&x| f(x)).collect();
            let out = matvec(m.as_ref(), &vals);
            let exact: Vec<f64> = dst.points().iter().map(|&x| f(x)).collect();
            max_abs(out.iter().zip(&exact).map(|(o, e)| o - e)) / max_abs(exact)
        };
        let cheb = cheb_nodes(n, (a, b)).unwrap();
        let gauss = gauss_nodes(n, (a, b)).unwrap();
        let fine = cheb_nodes(31, (a, b)).unwrap();
        for nodes in [&cheb, &gauss] {
            let d = diff_matrix(nodes).unwrap();
            let vals: Vec<f64> = nodes.points().iter().map(|&x| f(x)).collect();
            let du = matvec(d.as_ref(), &vals);
            let exact: Vec<f64> = nodes.points().iter().map(|&x| df(x)).collect();
            let scale = max_abs(exact.iter().copied());
            worst = worst.max(max_abs(du.iter().zip(&exact).map(|(u, e)| u - e)) / scale);
            worst = worst.max(check(nodes, &fine));
        }
        worst = worst.max(check(&cheb, &gauss)).max(check(&gauss, &cheb));
    }
    Outcome::new(
        worst <= 1e-10,
        format!("max relative error {worst:.2e} over node counts 4..=24"),
    )
}

/// Real and imaginary parts of `(x + iy)^n` with their gradients.
fn harmonic(n: usize, x: f64, y: f64) -> [(f64, f64, f64); 2] {
    let pow = |n: usize| (0..n).fold((1.0, 0.0), |(re, im), _| (re * x - im * y, re * y + im * x));
    let (re, im) = pow(n);
    let (dre, dim) = if n == 0 { (0.0, 0.0) } else { pow(n - 1) };
    let nf = n as f64;
    // d/dx z^n = n z^(n-1), d/dy z^n = i n z^(n-1)
    [(re, nf * dre, -nf * dim), (im, nf * dim, nf * dre)]
}

fn leaf_dtn_exactness() -> Outcome {
    let rect = Rect::new(0.25, 0.75, -0.5, 0.125).unwrap();
    let mut worst = 0.0f64;
    for q in [6, 10, 14, 18] {
        let p = q + 1;
        let (tree, _) = build_tree(rect, 1, 1, q).unwrap();
        let problem = Problem::laplace(rect, Field::zero());
        let local = assemble_local_operator(&problem, tree.root(), p).unwrap();
        let ops = build_leaf_dtn(&local, q).unwrap();
        let pts = leaf_gauss_points(rect, q).unwrap();
        for n in 0..=p - 3 {
            for part in 0..2 {
                let data: Vec<f64> = pts
                    .iter()
                    .map(|&[x, y]| harmonic(n, x, y)[part].0)
                    .collect();
                let flux = matvec(ops.t.as_ref(), &data);
                let exact: Vec<f64> = pts
                    .iter()
                    .enumerate()
                    .map(|(i, &[x, y])| {
                        let (_, ux, uy) = harmonic(n, x, y)[part];
                        // sides in S, E, N, W order; E and W are vertical
                        if (q..2 * q).contains(&i) || i >= 3 * q {
                            ux
                        } else {
                            uy
                        }
                    })
                    .collect();
                let scale = max_abs(exact.iter().copied()).max(max_abs(data.iter().copied()));
                if scale == 0.0 {
                    continue;
                }
                worst = worst.max(max_abs(flux.iter().zip(&exact).map(|(a, b)| a - b)) / scale);
            }
        }
    }
    Outcome::new(
        worst <= 1e-9,
        format!("max relative flux error {worst:.2e}, q in {{6, 10, 14, 18}}"),
    )
}

fn merge_vs_oracle() -> Outcome {
    let domain = [0.0, 2.0, 0.0, 1.0];
    let rect = Rect::new(0.0, 2.0, 0.0, 1.0).unwrap();
    let h = |x: f64, y: f64| (0.7 * x).exp() * (0.7 * y).cos() + x * y;
    let q = 12;
    let (tree, grid) = build_tree(rect, 2, 1, q).unwrap();
    let cache = build(
        &Problem::laplace(rect, Field::zero()),
        tree,
        grid,
        BuildOptions::for_q(q),
    )
    .unwrap();
    let root = cache.tree().root();
    let data: Vec<f64> = root
        .i_ext
        .iter()
        .map(|&k| {
            let [x, y] = cache.grid().point(k);
            h(x, y)
        })
        .collect();
    let flux = matvec(cache.root_dtn().as_ref(), &data);
    let oracle = DenseCollocation::laplace(domain, 44, 26, &h);
    let reference: Vec<f64> = root
        .i_ext
        .iter()
        .map(|&k| {
            let [x, y] = cache.grid().point(k);
            match cache.grid().orientation(k) {
                EdgeOrientation::Vertical => oracle.du_dx(x, y),
                EdgeOrientation::Horizontal => oracle.du_dy(x, y),
            }
        })
        .collect();
    let err = max_abs(flux.iter().zip(&reference).map(|(a, b)| a - b))
        / max_abs(reference.iter().copied());
    Outcome::new(
        err <= 1e-8,
        format!("merged 2x1 DtN vs 44x26 collocation: relative error {err:.2e}"),
    )
}

fn spectral_convergence() -> Outcome {
    let err_at = |q: usize| {
        let cfg = RunConfig {
            leaves_x: 8,
            leaves_y: 8,
            q,
            ..RunConfig::default()
        };
        run_case(&cfg, 1).unwrap().row.max_error_gauss
    };
    let errs: Vec<f64> = [6, 10, 14, 16].iter().map(|&q| err_at(q)).collect();
    let ratios = [errs[0] / errs[1], errs[1] / errs[2]];
    let pass = ratios.iter().all(|&r| r >= 1e2) && errs[3] <= 1e-9;
    Outcome::new(
        pass,
        format!(
            "errors q=6,10,14,16: {:.2e} {:.2e} {:.2e} {:.2e}; ratios {:.1e} {:.1e}",
            errs[0], errs[1], errs[2], errs[3], ratios[0], ratios[1]
        ),
    )
}

fn body_load() -> Outcome {
    let cfg = RunConfig {
        case: "poisson_trig".into(),
        body: true,
        ..RunConfig::default()
    };
    let outcome = run_case(&cfg, 1).unwrap();
    let row = &outcome.row;
    let problem = &outcome.case.problem;
    let cache = &outcome.cache;
    let full = &outcome.solution.u;
    let f = Field::new(|x, y| (x - 2.0 * y).cos() + x * y);
    let combined = solve(cache, &f, &problem.g).unwrap().u;
    let hom = solve(cache, &f, &Field::zero()).unwrap().u;
    let part = solve(cache, &Field::zero(), &problem.g).unwrap().u;
    let sup = max_abs((0..full.len()).map(|k| combined[k] - hom[k] - part[k]))
        / max_abs(combined.iter().copied());
    let pass = row.max_error_gauss <= 1e-7 && row.max_error_random_points <= 1e-7 && sup <= 1e-11;
    Outcome::new(
        pass,
        format!(
            "gauss {:.2e}, random {:.2e}, superposition {:.2e}",
            row.max_error_gauss, row.max_error_random_points, sup
        ),
    )
}

fn helmholtz_desk_scale() -> Outcome {
    // kappa = 20π on the unit square: ten wavelengths per side
    let cfg = RunConfig {
        case: "helmholtz_variable".into(),
        params: params(&[("kappa", 20.0 * PI)]),
        leaves_x: 8,
        leaves_y: 8,
        q: 20,
        body: true,
        ..RunConfig::default()
    };
    let row = run_case(&cfg, 1).unwrap().row;
    let err = row.max_error_gauss.max(row.max_error_random_points);
    Outcome::new(
        err <= 1e-6,
        format!(
            "10x10 wavelengths, 8x8 leaves, q=20: gauss {:.2e}, random {:.2e}",
            row.max_error_gauss, row.max_error_random_points
        ),
    )
}

fn complexity_slopes() -> Outcome {
    let cfg = RunConfig {
        q: 8,
        threads: Some(1),
        ..RunConfig::default()
    };
    let (rows, summary) = with_threads(Some(1), || cmd_bench(&cfg, &[3, 4, 5, 6]))
        .unwrap()
        .unwrap();
    let build = summary.build_slope.unwrap_or(f64::NAN);
    let solve = summary.solve_slope.unwrap_or(f64::NAN);
    let pass = (1.2..=1.8).contains(&build) && (0.9..=1.3).contains(&solve);
    let times: Vec<String> = rows
        .iter()
        .filter_map(|r| r.row())
        .map(|r| format!("N={} {:.3}s/{:.4}s", r.n, r.build_seconds, r.solve_seconds))
        .collect();
    Outcome::new(
        pass,
        format!(
            "build slope {build:.3}, solve slope {solve:.3} ({})",
            times.join(", ")
        ),
    )
}

fn resonance() -> Outcome {
    // 8π² is the first Dirichlet eigenvalue of the 0.5 x 0.5 boxes of a 4x4 tree
    let mut problem = Problem::laplace(Rect::unit(), Field::new(|x, y| x + y));
    problem.c = Field::Constant(-8.0 * PI * PI);
    let (tree, grid) = build_tree(problem.domain, 4, 4, 16).unwrap();
    match build(&problem, tree, grid, BuildOptions::for_q(16)) {
        Err(e @ HpsError::SingularInterfaceOperator { .. }) => {
            Outcome::new(e.node().is_some(), format!("{}: {e}", e.code()))
        }
        Err(e) => Outcome::new(false, format!("unexpected error {e}")),
        Ok(_) => Outcome::new(false, "build succeeded at a resonant wavenumber"),
    }
}

fn convection_dominated() -> Outcome {
    let cfg = RunConfig {
        case: "convection_dominated".into(),
        params: params(&[("lambda", 1e3)]),
        leaves_x: 16,
        leaves_y: 16,
        q: 20,
        body: true,
        ..RunConfig::default()
    };
    let row = run_case(&cfg, 1).unwrap().row;
    let err = row.max_error_gauss.max(row.max_error_random_points);
    Outcome::new(
        err <= 1e-6,
        format!(
            "lambda=1e3, 16x16 leaves, q=20: gauss {:.2e}, random {:.2e}",
            row.max_error_gauss, row.max_error_random_points
        ),
    )
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 9] = [
        (
            "spectral primitives exact on polynomials",
            spectral_primitives,
        ),
        ("leaf DtN exact on harmonic polynomials", leaf_dtn_exactness),
        ("merged DtN matches dense collocation", merge_vs_oracle),
        ("end-to-end spectral convergence", spectral_convergence),
        ("body load and superposition", body_load),
        (
            "variable Helmholtz at 10x10 wavelengths",
            helmholtz_desk_scale,
        ),
        ("build and solve complexity slopes", complexity_slopes),
        ("resonance reported as singular interface", resonance),
        ("convection-dominated robustness", convection_dominated),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {}: {status} - {name}: {}", i + 1, o.detail);
        if !o.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
