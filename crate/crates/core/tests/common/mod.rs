//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;

/// Table 1 of the reference study, `p = 0..=5`.
pub const TABLE1_GLL: [f64; 6] = [1.0, 0.87665, 0.53986, 0.32132, 0.22302, 0.16104];
pub const TABLE1_GL: [f64; 6] = [1.0, 0.78913, 0.44159, 0.27871, 0.19529, 0.14927];

/// Closed-form reference nodes for `p ≤ 2`, kept separate from the library's Newton solver.
pub fn closed_form_nodes(gll: bool, p: usize) -> Vec<f64> {
    match (gll, p) {
        (_, 0) => vec![0.0],
        (false, 1) => vec![-1.0 / 3f64.sqrt(), 1.0 / 3f64.sqrt()],
        (false, 2) => vec![-(0.6f64).sqrt(), 0.0, (0.6f64).sqrt()],
        (true, 1) => vec![-1.0, 1.0],
        (true, 2) => vec![-1.0, 0.0, 1.0],
        _ => panic!("closed forms only for p <= 2"),
    }
}

pub fn closed_form_weights(gll: bool, p: usize) -> Vec<f64> {
    match (gll, p) {
        (_, 0) => vec![2.0],
        (false, 1) | (true, 1) => vec![1.0, 1.0],
        (false, 2) => vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0],
        (true, 2) => vec![1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0],
        _ => panic!("closed forms only for p <= 2"),
    }
}

/// Five-point Gauss–Legendre rule on [-1, 1].
fn gauss5() -> ([f64; 5], [f64; 5]) {
    let a = (5.0 - 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
    let b = (5.0 + 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
    let wa = (322.0 + 13.0 * 70f64.sqrt()) / 900.0;
    let wb = (322.0 - 13.0 * 70f64.sqrt()) / 900.0;
    ([-b, -a, 0.0, a, b], [wb, wa, 128.0 / 225.0, wa, wb])
}

/// `∫_lo^hi f` with the five-point rule (exact to degree 9).
fn integrate<F: Fn(f64) -> f64>(lo: f64, hi: f64, f: F) -> f64 {
    let (x, w) = gauss5();
    let h = 0.5 * (hi - lo);
    let m = 0.5 * (hi + lo);
    x.iter().zip(w).map(|(t, wt)| wt * h * f(m + h * t)).sum()
}

/// Lagrange polynomial through physical nodes, in product form; defined on all of ℝ.
#[derive(Clone)]
struct Basis {
    nodes: Vec<f64>,
    k: usize,
}

impl Basis {
    fn value(&self, x: f64) -> f64 {
        let xk = self.nodes[self.k];
        self.nodes
            .iter()
            .enumerate()
            .filter(|(m, _)| *m != self.k)
            .map(|(_, xm)| (x - xm) / (xk - xm))
            .product()
    }

    fn derivative(&self, x: f64) -> f64 {
        let xk = self.nodes[self.k];
        let mut sum = 0.0;
        for (l, xl) in self.nodes.iter().enumerate() {
            if l == self.k {
                continue;
            }
            let rest: f64 = self
                .nodes
                .iter()
                .enumerate()
                .filter(|(m, _)| *m != self.k && *m != l)
                .map(|(_, xm)| (x - xm) / (xk - xm))
                .product();
            sum += rest / (xk - xl);
        }
        sum
    }
}

/// Brute-force semidiscrete operator `-M⁻¹A` with
/// `A_{(i,k),(j,m)} = a_h(φ_jm, φ_ik) + J⁰(φ_jm, φ_ik) + J¹(φ_jm, φ_ik)`
/// evaluated cell by cell with exact quadrature. `M` is the nodal
/// (quadrature) mass of the scheme.
///
/// `vertices` has `N + 1` entries and the cut cell is `cut` (zero-based).
pub fn weak_form_operator(gll: bool, p: usize, vertices: &[f64], cut: usize, eta: f64, a: f64) -> DMatrix<f64> {
    let n = vertices.len() - 1;
    let ref_nodes = closed_form_nodes(gll, p);
    let ref_weights = closed_form_weights(gll, p);
    let m = p + 1;
    let basis: Vec<Vec<Basis>> = (0..n)
        .map(|i| {
            let (lo, hi) = (vertices[i], vertices[i + 1]);
            let nodes: Vec<f64> = ref_nodes.iter().map(|t| 0.5 * (lo + hi) + 0.5 * (hi - lo) * t).collect();
            (0..m).map(|k| Basis { nodes: nodes.clone(), k }).collect()
        })
        .collect();
    let idx = |cell: usize, k: usize| cell * m + k;
    let dof = n * m;

    // u|_{E_c}(x) for a basis function owned by `owner`
    let restrict = |owner: usize, b: &Basis, cell: usize, x: f64| if owner == cell { b.value(x) } else { 0.0 };
    let restrict_d = |owner: usize, b: &Basis, cell: usize, x: f64| if owner == cell { b.derivative(x) } else { 0.0 };
    // v_h(x_i)|_{E_i} - v_h(x_i)|_{E_{i+1}}, periodic
    let jump = |owner: usize, b: &Basis, i: usize| {
        let x = vertices[i + 1];
        let right = (i + 1) % n;
        let x_right = if right == 0 { vertices[0] } else { x };
        restrict(owner, b, i, x) - restrict(owner, b, right, x_right)
    };
    // extension of the restriction to cell c-1
    let ext = |owner: usize, b: &Basis, x: f64| if owner == cut - 1 { b.value(x) } else { 0.0 };
    let ext_d = |owner: usize, b: &Basis, x: f64| if owner == cut - 1 { b.derivative(x) } else { 0.0 };

    let mut form = DMatrix::zeros(dof, dof);
    for ti in 0..n {
        for tk in 0..m {
            let v = &basis[ti][tk];
            for ui in 0..n {
                for uk in 0..m {
                    let u = &basis[ui][uk];
                    let mut val = 0.0;
                    for cell in 0..n {
                        val -= a * integrate(vertices[cell], vertices[cell + 1], |x| {
                            restrict(ui, u, cell, x) * restrict_d(ti, v, cell, x)
                        });
                        let xr = vertices[cell + 1];
                        val += a * restrict(ui, u, cell, xr) * jump(ti, v, cell);
                    }
                    let xc = vertices[cut + 1];
                    val += eta * a * (ext(ui, u, xc) - restrict(ui, u, cut, xc)) * jump(ti, v, cut);
                    val += eta
                        * integrate(vertices[cut], vertices[cut + 1], |x| {
                            a * (ext(ui, u, x) - restrict(ui, u, cut, x))
                                * (ext_d(ti, v, x) - restrict_d(ti, v, cut, x))
                        });
                    form[(idx(ti, tk), idx(ui, uk))] = val;
                }
            }
        }
    }
    let mut l = DMatrix::zeros(dof, dof);
    for i in 0..n {
        let h = vertices[i + 1] - vertices[i];
        for k in 0..m {
            let mass = ref_weights[k] * h / 2.0;
            for c in 0..dof {
                l[(idx(i, k), c)] = -form[(idx(i, k), c)] / mass;
            }
        }
    }
    l
}

/// Max of `‖Au‖_w / ‖u‖_w` over random directions, then polished by power
/// steps `u ← W⁻¹AᵀWAu` from the best sample. Every iterate is a lower bound
/// for the induced norm.
pub fn monte_carlo_norm(a: &DMatrix<f64>, w: &[f64], samples: usize, seed: u64) -> f64 {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = w.len();
    let norm = |v: &[f64]| v.iter().zip(w).map(|(x, wk)| wk * x * x).sum::<f64>().sqrt();
    let mul = |u: &[f64]| -> Vec<f64> { (0..n).map(|i| (0..n).map(|j| a[(i, j)] * u[j]).sum()).collect() };
    let quotient = |u: &[f64]| norm(&mul(u)) / norm(u);
    let mut best_u = vec![1.0; n];
    let mut best = quotient(&best_u);
    for _ in 0..samples {
        let u: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let q = quotient(&u);
        if q > best {
            best = q;
            best_u = u;
        }
    }
    let mut u = best_u;
    for _ in 0..5_000 {
        let au = mul(&u);
        let wau: Vec<f64> = au.iter().zip(w).map(|(x, wk)| x * wk).collect();
        let mut next: Vec<f64> = (0..n).map(|j| (0..n).map(|i| a[(i, j)] * wau[i]).sum::<f64>() / w[j]).collect();
        let s = norm(&next);
        if s == 0.0 {
            break;
        }
        next.iter_mut().for_each(|x| *x /= s);
        u = next;
        best = best.max(quotient(&u));
    }
    best
}
