mod common;

use common::{max_abs, DenseCollocation};
use hps::geometry::EdgeOrientation;
use hps::linalg::matvec;
use hps::{build, build_tree, solve, BuildOptions, Field, Problem, Rect};
use std::f64::consts::PI;

const UNION: [f64; 4] = [0.0, 2.0, 0.0, 1.0];

fn union_rect() -> Rect {
    Rect::new(UNION[0], UNION[1], UNION[2], UNION[3]).unwrap()
}

#[test]
fn merged_dtn_matches_dense_collocation_on_union() {
    let h = |x: f64, y: f64| (0.7 * x).exp() * (0.7 * y).cos() + x * y;
    let q = 12;
    let (tree, grid) = build_tree(union_rect(), 2, 1, q).unwrap();
    let problem = Problem::laplace(union_rect(), Field::zero());
    let cache = build(&problem, tree, grid, BuildOptions::for_q(q)).unwrap();
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

    let oracle = DenseCollocation::laplace(UNION, 44, 26, &h);
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
    let scale = max_abs(reference.iter().copied());
    let err = max_abs(flux.iter().zip(&reference).map(|(a, b)| a - b));
    assert!(
        err <= 1e-8 * scale,
        "relative flux error {:.3e}",
        err / scale
    );
}

/// `u* = sin(x + 2y)` for a variable-coefficient operator with a matching
/// body load, so the solution is smooth up to the corners.
#[test]
fn variable_coefficient_merge_matches_oracle() {
    let q = 14;
    let c11 = |x: f64, _: f64| 1.0 + 0.3 * x;
    let c22 = |_: f64, y: f64| 1.5 + 0.5 * (PI * y).sin();
    let (c12, c0) = (0.2, -2.0);
    let c1 = |_: f64, y: f64| y;
    let u = |x: f64, y: f64| (x + 2.0 * y).sin();
    let g = move |x: f64, y: f64| {
        let (s, c) = ((x + 2.0 * y).sin(), (x + 2.0 * y).cos());
        c11(x, y) * s + 4.0 * c12 * s + 4.0 * c22(x, y) * s + c1(x, y) * c + c0 * s
    };
    let mut problem = Problem::laplace(union_rect(), Field::new(u));
    problem.c11 = Field::new(c11);
    problem.c22 = Field::new(c22);
    problem.c12 = Field::Constant(c12);
    problem.c1 = Field::new(c1);
    problem.c = Field::Constant(c0);
    problem.g = Field::new(g);
    let (tree, grid) = build_tree(union_rect(), 2, 1, q).unwrap();
    let cache = build(&problem, tree, grid, BuildOptions::for_q(q).with_body(true)).unwrap();
    let sol = solve(&cache, &problem.f, &problem.g).unwrap();
    let root = cache.tree().root();
    let data: Vec<f64> = root.i_ext.iter().map(|&k| sol.u[k]).collect();
    let h_ge = sol.body.as_ref().unwrap().h_ge[0].as_ref().unwrap();
    let flux: Vec<f64> = matvec(cache.root_dtn().as_ref(), &data)
        .iter()
        .zip(h_ge)
        .map(|(a, b)| a + b)
        .collect();

    let coeffs = move |x: f64, y: f64| [c11(x, y), c12, c22(x, y), c1(x, y), 0.0, c0];
    let oracle = DenseCollocation::solve(UNION, 44, 28, &coeffs, &g, &u);
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
    let scale = max_abs(reference.iter().copied());
    let err = max_abs(flux.iter().zip(&reference).map(|(a, b)| a - b));
    assert!(
        err <= 1e-8 * scale,
        "relative flux error {:.3e}",
        err / scale
    );

    let interface_err = max_abs(root.i_int.iter().map(|&k| {
        let [x, y] = cache.grid().point(k);
        sol.u[k] - oracle.value(x, y)
    }));
    assert!(interface_err <= 1e-9, "interface error {interface_err:.3e}");
}

#[test]
fn interface_particular_solution_matches_oracle() {
    let q = 20;
    // odd about every edge, so the zero-boundary solution is smooth
    let g = |x: f64, y: f64| {
        (PI * x).sin() * (2.0 * PI * y).sin() + 0.5 * (1.5 * PI * x).sin() * (3.0 * PI * y).sin()
    };
    let mut problem = Problem::laplace(union_rect(), Field::zero());
    problem.g = Field::new(g);
    let (tree, grid) = build_tree(union_rect(), 2, 1, q).unwrap();
    let cache = build(&problem, tree, grid, BuildOptions::for_q(q).with_body(true)).unwrap();
    let sol = solve(&cache, &Field::zero(), &problem.g).unwrap();
    let body = sol.body.as_ref().expect("body-load state");
    let w_gi = body.w_gi[0].as_ref().expect("root interface solution");
    let h_ge = body.h_ge[0].as_ref().expect("root particular flux");

    let oracle = DenseCollocation::solve(
        UNION,
        44,
        26,
        &|_, _| [1.0, 0.0, 1.0, 0.0, 0.0, 0.0],
        &g,
        &|_, _| 0.0,
    );
    let root = cache.tree().root();
    let w_ref: Vec<f64> = root
        .i_int
        .iter()
        .map(|&k| {
            let [x, y] = cache.grid().point(k);
            oracle.value(x, y)
        })
        .collect();
    let scale = max_abs(w_ref.iter().copied());
    let err = max_abs(w_gi.iter().zip(&w_ref).map(|(a, b)| a - b));
    assert!(
        err <= 1e-8 * scale,
        "w_gi relative error {:.3e}",
        err / scale
    );

    let h_ref: Vec<f64> = root
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
    let scale = max_abs(h_ref.iter().copied());
    let err = max_abs(h_ge.iter().zip(&h_ref).map(|(a, b)| a - b));
    assert!(
        err <= 1e-8 * scale,
        "h_ge relative error {:.3e}",
        err / scale
    );

    // the interface values of the full solution are exactly w_gi when f = 0
    for (&k, w) in root.i_int.iter().zip(w_gi) {
        assert!((sol.u[k] - w).abs() <= 1e-14 * scale.max(1.0));
    }
}
