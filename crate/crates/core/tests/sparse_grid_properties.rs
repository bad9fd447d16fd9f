use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stochdom::sparse_grid::{
    evaluate_difference_form, index_set, Density, IndexRule, RuleKind, SparseGrid,
};

const KINDS: [RuleKind; 4] = [RuleKind::TP, RuleKind::TD, RuleKind::HC, RuleKind::SM];

/// Random polynomial spanned by monomials with multi-degree in the rule's space.
fn random_polynomial(rule: &IndexRule, n: usize, rng: &mut ChaCha8Rng) -> Vec<(Vec<usize>, f64)> {
    let mut degrees = Vec::new();
    let bound = 9;
    let mut p = vec![0usize; n];
    loop {
        if rule.polynomial_space_contains(&p) {
            degrees.push(p.clone());
        }
        let mut d = 0;
        while d < n {
            p[d] += 1;
            if p[d] <= bound {
                break;
            }
            p[d] = 0;
            d += 1;
        }
        if d == n {
            break;
        }
    }
    degrees
        .into_iter()
        .map(|p| (p, rng.gen_range(-1.0..1.0)))
        .collect()
}

fn eval_poly(poly: &[(Vec<usize>, f64)], y: &[f64]) -> f64 {
    poly.iter()
        .map(|(p, c)| c * p.iter().zip(y).map(|(&d, v)| v.powi(d as i32)).product::<f64>())
        .sum()
}

#[test]
fn exact_on_polynomial_space() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for kind in KINDS {
        for n in 1..=3 {
            for w in 0..=3 {
                let rule = IndexRule::new(kind, w);
                let grid = SparseGrid::build(rule, n, Density::Uniform).unwrap();
                for _ in 0..5 {
                    let poly = random_polynomial(&rule, n, &mut rng);
                    let v: Vec<f64> = grid.nodes().iter().map(|y| eval_poly(&poly, y)).collect();
                    for _ in 0..20 {
                        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                        let err = (grid.interpolate(&v, &y).unwrap() - eval_poly(&poly, &y)).abs();
                        assert!(err < 1e-10, "{kind:?} n={n} w={w} err={err}");
                    }
                }
            }
        }
    }
}

#[test]
fn combination_and_difference_forms_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for kind in KINDS {
        for n in 1..=3 {
            for w in [2, 4] {
                let rule = IndexRule::new(kind, w);
                let grid = SparseGrid::build(rule, n, Density::Uniform).unwrap();
                let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.5)).collect();
                let f = |y: &[f64]| {
                    let s: f64 = y.iter().zip(&a).map(|(y, a)| a * y).sum();
                    1.0 / (2.0 + s.sin())
                };
                let v: Vec<f64> = grid.nodes().iter().map(|y| f(y)).collect();
                let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let comb = grid.interpolate(&v, &y).unwrap();
                let diff = evaluate_difference_form(&rule, n, f, &y).unwrap();
                assert!((comb - diff).abs() < 1e-12, "{kind:?} n={n} w={w}");
            }
        }
    }
}

#[test]
fn smolyak_grids_are_nested() {
    for n in 1..=4 {
        for w in 0..4 {
            let coarse = SparseGrid::build(IndexRule::smolyak(w), n, Density::Uniform).unwrap();
            let fine = SparseGrid::build(IndexRule::smolyak(w + 1), n, Density::Uniform).unwrap();
            for y in coarse.nodes() {
                assert!(fine.find_node(y).is_some());
            }
        }
    }
}

#[test]
fn lower_dimensional_grid_embeds_with_zero_padding() {
    let small = SparseGrid::build(IndexRule::smolyak(3), 2, Density::Uniform).unwrap();
    let big = SparseGrid::build(IndexRule::smolyak(3), 5, Density::Uniform).unwrap();
    for y in small.nodes() {
        let mut padded = y.clone();
        padded.resize(5, 0.0);
        assert!(big.find_node(&padded).is_some());
    }
}

#[test]
fn telescoping_between_levels() {
    // S_w - S_{w-1} equals the difference-form terms with g(i) = w
    let n = 2;
    let f = |y: &[f64]| (y[0] - 0.3 * y[1]).cos();
    let y = [0.37, -0.81];
    for kind in [RuleKind::SM, RuleKind::TD] {
        for w in 1..4 {
            let hi = evaluate_difference_form(&IndexRule::new(kind, w), n, f, &y).unwrap();
            let lo = evaluate_difference_form(&IndexRule::new(kind, w - 1), n, f, &y).unwrap();
            let g_hi = SparseGrid::build(IndexRule::new(kind, w), n, Density::Uniform).unwrap();
            let g_lo = SparseGrid::build(IndexRule::new(kind, w - 1), n, Density::Uniform).unwrap();
            let v_hi: Vec<f64> = g_hi.nodes().iter().map(|p| f(p)).collect();
            let v_lo: Vec<f64> = g_lo.nodes().iter().map(|p| f(p)).collect();
            let d = g_hi.interpolate(&v_hi, &y).unwrap() - g_lo.interpolate(&v_lo, &y).unwrap();
            assert!((d - (hi - lo)).abs() < 1e-12);
            let top = index_set(&IndexRule::new(kind, w), n)
                .into_iter()
                .filter(|i| IndexRule::new(kind, w).g(i) == w)
                .count();
            assert!(top > 0);
        }
    }
}

#[test]
fn cosine_product_quadrature_converges() {
    // int prod cos(y_n) under the uniform density = sin(1)^N
    let n = 3;
    let exact = 1f64.sin().powi(n as i32);
    let mut last = f64::INFINITY;
    for w in 1..6 {
        let g = SparseGrid::build(IndexRule::smolyak(w), n, Density::Uniform).unwrap();
        let v: Vec<f64> = g.nodes().iter().map(|y| y.iter().map(|t| t.cos()).product()).collect();
        let err = (g.quadrature(&v).unwrap() - exact).abs();
        eprintln!("w={w} err={err:e}");
        assert!(err < last || err < 1e-14, "w={w} err={err}");
        last = err;
    }
    assert!(last < 1e-6, "final error {last}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn weights_sum_to_one_and_are_symmetric(kind in 0usize..4, n in 1usize..4, w in 0usize..4) {
        let grid = SparseGrid::build(IndexRule::new(KINDS[kind], w), n, Density::Uniform).unwrap();
        prop_assert!((grid.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (y, wt) in grid.nodes().iter().zip(grid.weights()) {
            let mirror: Vec<f64> = y.iter().map(|v| -v).collect();
            let k = grid.find_node(&mirror).unwrap();
            prop_assert!((grid.weights()[k] - wt).abs() < 1e-13);
        }
    }

    #[test]
    fn interpolation_is_linear(
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        y0 in -1.0f64..1.0,
        y1 in -1.0f64..1.0,
        w in 0usize..4,
    ) {
        let grid = SparseGrid::build(IndexRule::smolyak(w), 2, Density::Uniform).unwrap();
        let f: Vec<f64> = grid.nodes().iter().map(|y| (y[0] * y[1]).exp()).collect();
        let g: Vec<f64> = grid.nodes().iter().map(|y| (3.0 * y[0]).sin() + y[1]).collect();
        let h: Vec<f64> = f.iter().zip(&g).map(|(f, g)| a * f + b * g).collect();
        let y = [y0, y1];
        let lhs = grid.interpolate(&h, &y).unwrap();
        let rhs = a * grid.interpolate(&f, &y).unwrap() + b * grid.interpolate(&g, &y).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn combination_coefficients_sum_to_one(kind in 0usize..4, n in 1usize..6, w in 0usize..5) {
        let c = stochdom::sparse_grid::combination_coefficients(&IndexRule::new(KINDS[kind], w), n);
        prop_assert_eq!(c.iter().map(|(_, c)| c).sum::<i64>(), 1);
    }
}
