use mbal_core::datagen::{build_grid_polytope, build_pricing_polytope};
use mbal_core::losses::{spo_loss, spo_plus_loss, spo_plus_subgradient};
use mbal_core::polytope::{NormKind, Polytope};
use proptest::prelude::*;

fn triangle() -> Polytope {
    Polytope::new("triangle", vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()
}

fn poly(which: usize) -> Polytope {
    match which {
        0 => triangle(),
        1 => build_grid_polytope(3).unwrap(),
        _ => build_pricing_polytope(),
    }
}

fn cost(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, d)
}

/// Polytope index together with two cost vectors of its dimension.
fn two_costs() -> impl Strategy<Value = (usize, Vec<f64>, Vec<f64>)> {
    (0usize..3).prop_flat_map(|i| {
        let d = poly(i).dim();
        (Just(i), cost(d), cost(d))
    })
}

fn nu(p: &Polytope, c: &[f64]) -> f64 {
    p.distance_to_degeneracy(c, NormKind::L2, None).unwrap()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Direct evaluation over every vertex, independent of the library routine.
fn nu_brute(p: &Polytope, c: &[f64]) -> f64 {
    let value = |v: &[f64]| v.iter().zip(c).map(|(a, b)| a * b).sum::<f64>();
    let best = (0..p.num_vertices())
        .min_by(|&a, &b| value(p.vertex(a)).total_cmp(&value(p.vertex(b))))
        .unwrap();
    let w = p.vertex(best);
    (0..p.num_vertices())
        .filter(|&j| p.vertex(j) != w)
        .map(|j| {
            let diff: Vec<f64> = p.vertex(j).iter().zip(w).map(|(a, b)| a - b).collect();
            value(&diff) / diff.iter().map(|x| x * x).sum::<f64>().sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn nu_matches_vertex_enumeration((i, c, _) in two_costs()) {
        let p = poly(i);
        prop_assert!((nu(&p, &c) - nu_brute(&p, &c)).abs() < 1e-12);
    }

    #[test]
    fn nu_is_one_lipschitz((i, a, b) in two_costs()) {
        let p = poly(i);
        prop_assert!((nu(&p, &a) - nu(&p, &b)).abs() <= dist(&a, &b) + 1e-9);
    }

    #[test]
    fn nu_is_positively_homogeneous((i, c, _) in two_costs(), k in 0.01f64..50.0) {
        let p = poly(i);
        let scaled: Vec<f64> = c.iter().map(|x| k * x).collect();
        prop_assert!((nu(&p, &scaled) - k * nu(&p, &c)).abs() <= 1e-9 * (1.0 + k * nu(&p, &c)));
    }

    #[test]
    fn decisions_agree_within_the_larger_margin((i, a, b) in two_costs()) {
        let p = poly(i);
        let gap = dist(&a, &b);
        if gap < nu(&p, &a).max(nu(&p, &b)) {
            let wa = p.solve_lo(&a).unwrap().index;
            let wb = p.solve_lo(&b).unwrap().index;
            prop_assert_eq!(p.vertex(wa), p.vertex(wb));
        }
    }

    #[test]
    fn spo_plus_dominates_spo((i, c_hat, c) in two_costs()) {
        let p = poly(i);
        let spo = spo_loss(&p, &c_hat, &c).unwrap();
        prop_assert!(spo >= -1e-9);
        prop_assert!(spo_plus_loss(&p, &c_hat, &c).unwrap() >= spo - 1e-9);
    }

    #[test]
    fn spo_plus_is_convex_in_prediction((i, a, c) in two_costs(), other in cost(12), t in 0.0f64..1.0) {
        let p = poly(i);
        let b: Vec<f64> = other.into_iter().take(p.dim()).collect();
        let b = if b.len() == p.dim() { b } else { a.iter().map(|x| -x).collect() };
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| t * x + (1.0 - t) * y).collect();
        let l = |v: &[f64]| spo_plus_loss(&p, v, &c).unwrap();
        prop_assert!(l(&mid) <= t * l(&a) + (1.0 - t) * l(&b) + 1e-9);
    }

    #[test]
    fn subgradient_inequality((i, a, c) in two_costs(), shift in cost(12)) {
        let p = poly(i);
        let b: Vec<f64> = a.iter().zip(&shift).map(|(x, s)| x + s).collect();
        let g = spo_plus_subgradient(&p, &a, &c).unwrap();
        let lin: f64 = g.iter().zip(b.iter().zip(&a)).map(|(gi, (bi, ai))| gi * (bi - ai)).sum();
        prop_assert!(spo_plus_loss(&p, &b, &c).unwrap() >= spo_plus_loss(&p, &a, &c).unwrap() + lin - 1e-9);
    }
}

#[test]
fn perturbation_past_the_margin_flips_the_decision() {
    let p = build_grid_polytope(3).unwrap();
    let c = vec![1.0, 2.0, 1.5, 0.5, 3.0, 1.0, 2.5, 0.7, 1.1, 1.9, 0.4, 2.2];
    let v = nu(&p, &c);
    let w = p.solve_lo(&c).unwrap().index;
    let j = p.nearest_competitor(&c, NormKind::L2).unwrap().unwrap();
    let diff: Vec<f64> = p.vertex(j).iter().zip(p.vertex(w)).map(|(a, b)| a - b).collect();
    let n = diff.iter().map(|x| x * x).sum::<f64>().sqrt();
    let at = |scale: f64| -> Vec<f64> { c.iter().zip(&diff).map(|(a, d)| a - scale * v * d / n).collect() };
    assert_eq!(p.solve_lo(&at(0.99)).unwrap().index, w);
    assert_eq!(p.solve_lo(&at(1.01)).unwrap().index, j);
}

#[test]
fn single_vertex_has_infinite_margin() {
    let p = Polytope::new("point", vec![vec![1.0, 2.0]]).unwrap();
    assert_eq!(nu(&p, &[0.3, -4.0]), f64::INFINITY);
}
