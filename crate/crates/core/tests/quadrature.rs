mod common;

use dodlab::lagrange::derivative_matrix;
use dodlab::{LagrangeOperators, NodeKind, QuadratureRule};
use proptest::prelude::*;

use common::{closed_form_nodes, closed_form_weights};

/// `P_n(x)` by the three-term recurrence, written out here to stay independent of the library.
fn legendre(n: usize, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return 1.0;
    }
    for k in 1..n {
        let p2 = ((2 * k + 1) as f64 * x * p1 - k as f64 * p0) / (k + 1) as f64;
        p0 = p1;
        p1 = p2;
    }
    p1
}

fn monomial_integral(k: usize) -> f64 {
    if k % 2 == 1 {
        0.0
    } else {
        2.0 / (k + 1) as f64
    }
}

#[test]
fn low_degree_rules_match_closed_forms() {
    for (gll, kind) in [(false, NodeKind::GaussLegendre), (true, NodeKind::GaussLobattoLegendre)] {
        for p in (if gll { 1 } else { 0 })..=2 {
            let r = QuadratureRule::new(kind, p).unwrap();
            for (a, b) in r.nodes().iter().zip(closed_form_nodes(gll, p)) {
                assert!((a - b).abs() < 1e-15, "{kind:?} p={p}: node {a} vs {b}");
            }
            for (a, b) in r.weights().iter().zip(closed_form_weights(gll, p)) {
                assert!((a - b).abs() < 1e-15, "{kind:?} p={p}: weight {a} vs {b}");
            }
        }
    }
}

#[test]
fn gauss_nodes_are_legendre_roots() {
    for p in 0..=30 {
        let r = QuadratureRule::new(NodeKind::GaussLegendre, p).unwrap();
        for &x in r.nodes() {
            // P_n has slope up to n² near the ends; compare the residual against it
            let scale = ((p + 1) * (p + 1)) as f64;
            assert!(legendre(p + 1, x).abs() < 1e-13 * scale, "p={p} x={x}");
        }
        // strictly increasing inside (-1, 1)
        assert!(r.nodes().windows(2).all(|w| w[0] < w[1]));
        assert!(r.nodes()[0] > -1.0 && r.nodes()[p] < 1.0);
    }
}

#[test]
fn rules_are_symmetric_and_sum_to_two() {
    for kind in NodeKind::ALL {
        for p in 1..=30 {
            let r = QuadratureRule::new(kind, p).unwrap();
            let n = r.len();
            let sum: f64 = r.weights().iter().sum();
            assert!((sum - 2.0).abs() < 1e-13, "{kind:?} p={p}: sum {sum}");
            for k in 0..n {
                assert!((r.nodes()[k] + r.nodes()[n - 1 - k]).abs() < 1e-14);
                assert!((r.weights()[k] - r.weights()[n - 1 - k]).abs() < 1e-14);
                assert!(r.weights()[k] > 0.0);
            }
        }
    }
}

#[test]
fn gl_ten_integrates_x20() {
    // composite trapezoid on a fine grid as the reference value
    let n = 200_000;
    let h = 2.0 / n as f64;
    let trap: f64 = (0..=n)
        .map(|k| {
            let x = -1.0 + k as f64 * h;
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            w * x.powi(20)
        })
        .sum::<f64>()
        * h;
    let r = QuadratureRule::new(NodeKind::GaussLegendre, 10).unwrap();
    let q = r.integrate(|x| x.powi(20));
    assert!((q - 2.0 / 21.0).abs() < 1e-14);
    assert!((q - trap).abs() < 1e-8);
}

#[test]
fn lobatto_misses_degree_2p() {
    for p in 1..=10 {
        let r = QuadratureRule::new(NodeKind::GaussLobattoLegendre, p).unwrap();
        let q = r.integrate(|x| x.powi(2 * p as i32));
        assert!((q - monomial_integral(2 * p)).abs() > 1e-6, "p={p}");
    }
}

#[test]
fn invalid_requests_are_rejected() {
    assert!(QuadratureRule::new(NodeKind::GaussLobattoLegendre, 0).is_err());
    assert!(QuadratureRule::new(NodeKind::GaussLegendre, 31).is_err());
    assert!(QuadratureRule::with_max_degree(NodeKind::GaussLegendre, 40, 40).is_ok());
    let fallback = QuadratureRule::for_scheme(NodeKind::GaussLobattoLegendre, 0).unwrap();
    assert_eq!(fallback.nodes(), &[0.0]);
    assert_eq!(fallback.weights(), &[2.0]);
}

#[test]
fn lemma_bounds_hold_with_stable_constants() {
    for kind in NodeKind::ALL {
        let start = if kind == NodeKind::GaussLobattoLegendre { 2 } else { 1 };
        for p in start..=30 {
            let r = QuadratureRule::new(kind, p).unwrap();
            assert!(r.weight_quotient_max() <= 2.0 * p as f64, "{kind:?} p={p}");
            assert!(r.min_node_distance() * (p as f64).powi(3) >= 1.0, "{kind:?} p={p}");
        }
    }
}

proptest! {
    #[test]
    fn exact_for_degree_bound(p in 1usize..=12, coeffs in prop::collection::vec(-1.0f64..1.0, 26), gll in any::<bool>()) {
        let (kind, exact) = if gll {
            (NodeKind::GaussLobattoLegendre, 2 * p - 1)
        } else {
            (NodeKind::GaussLegendre, 2 * p + 1)
        };
        let r = QuadratureRule::new(kind, p).unwrap();
        let c = &coeffs[..=exact];
        let q = r.integrate(|x| c.iter().rev().fold(0.0, |acc, ck| acc * x + ck));
        let reference: f64 = c.iter().enumerate().map(|(k, ck)| ck * monomial_integral(k)).sum();
        prop_assert!((q - reference).abs() < 1e-13, "{:?} p={} q={} ref={}", kind, p, q, reference);
    }

    #[test]
    fn derivative_matrix_is_exact(p in 1usize..=10, k in 0usize..=10, gll in any::<bool>()) {
        prop_assume!(k <= p);
        let kind = if gll { NodeKind::GaussLobattoLegendre } else { NodeKind::GaussLegendre };
        let r = QuadratureRule::new(kind, p).unwrap();
        let d = derivative_matrix(r.nodes());
        for (i, &xi) in r.nodes().iter().enumerate() {
            let du: f64 = r.nodes().iter().enumerate().map(|(j, xj)| d[(i, j)] * xj.powi(k as i32)).sum();
            let exact = if k == 0 { 0.0 } else { k as f64 * xi.powi(k as i32 - 1) };
            prop_assert!((du - exact).abs() < 1e-11 * (p * p) as f64);
        }
    }

    #[test]
    fn extension_reproduces_polynomials(p in 0usize..=8, k in 0usize..=8, alpha in 1e-6f64..0.5, gll in any::<bool>()) {
        prop_assume!(k <= p);
        let kind = if gll { NodeKind::GaussLobattoLegendre } else { NodeKind::GaussLegendre };
        let r = QuadratureRule::for_scheme(kind, p).unwrap();
        let ops = LagrangeOperators::new(&r);
        let ci = ops.cut_interpolation(alpha).unwrap();
        let u: Vec<f64> = r.nodes().iter().map(|x| x.powi(k as i32)).collect();
        for (l, &xi) in ci.image_nodes.iter().enumerate() {
            let v: f64 = (0..=p).map(|j| ci.interp[(l, j)] * u[j]).sum();
            prop_assert!((v - xi.powi(k as i32)).abs() < 1e-10);
            // images of the cut-cell nodes lie in [1, 1 + 2α]
            prop_assert!((1.0..=1.0 + 2.0 * alpha).contains(&xi));
        }
        let bj: f64 = (0..=p).map(|j| ci.b_j[j] * u[j]).sum();
        prop_assert!((bj - (1.0 + 2.0 * alpha).powi(k as i32)).abs() < 1e-10);
        let right: f64 = (0..=p).map(|j| ops.r_hat[j] * u[j]).sum();
        let left: f64 = (0..=p).map(|j| ops.l_hat[j] * u[j]).sum();
        prop_assert!((right - 1.0).abs() < 1e-12);
        prop_assert!((left - (-1.0f64).powi(k as i32)).abs() < 1e-12);
    }
}
