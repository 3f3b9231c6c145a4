//! Gauss–Legendre and Gauss–Lobatto–Legendre rules on the reference element `[-1, 1]`.
//!
//! Nodes are computed by Newton iteration on the three-term Legendre recurrence,
//! seeded with Chebyshev-type guesses. Only the lower half of the nodes is
//! iterated; the upper half is obtained by reflection, so the returned rules are
//! exactly symmetric.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest degree accepted by [`QuadratureRule::new`].
pub const DEFAULT_MAX_DEGREE: usize = 30;

const NEWTON_MAX_ITER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    GaussLegendre,
    GaussLobattoLegendre,
}

impl NodeKind {
    pub const ALL: [NodeKind; 2] = [NodeKind::GaussLegendre, NodeKind::GaussLobattoLegendre];

    /// Short lowercase tag used in files and on the command line.
    pub fn tag(self) -> &'static str {
        match self {
            NodeKind::GaussLegendre => "gl",
            NodeKind::GaussLobattoLegendre => "gll",
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for NodeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gl" | "gauss" | "gauss-legendre" | "gausslegendre" => Ok(NodeKind::GaussLegendre),
            "gll" | "lobatto" | "gauss-lobatto" | "gauss-lobatto-legendre" | "gausslobattolegendre" => {
                Ok(NodeKind::GaussLobattoLegendre)
            }
            other => Err(Error::InvalidArgument(format!("unknown node kind `{other}` (expected gl or gll)"))),
        }
    }
}

/// Nodes and weights of a `p+1` point rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    kind: NodeKind,
    degree: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Builds the rule of the given kind with `degree + 1` nodes.
    ///
    /// Gauss–Lobatto–Legendre needs at least two points, so `degree = 0` is rejected
    /// for that kind.
    pub fn new(kind: NodeKind, degree: usize) -> Result<Self> {
        Self::with_max_degree(kind, degree, DEFAULT_MAX_DEGREE)
    }

    pub fn with_max_degree(kind: NodeKind, degree: usize, max_degree: usize) -> Result<Self> {
        if degree > max_degree {
            return Err(Error::InvalidRule(format!(
                "degree {degree} exceeds the configured maximum {max_degree}"
            )));
        }
        let (nodes, weights) = match kind {
            NodeKind::GaussLegendre => gauss_legendre(degree + 1),
            NodeKind::GaussLobattoLegendre => {
                if degree == 0 {
                    return Err(Error::InvalidRule(
                        "Gauss-Lobatto-Legendre rules need degree >= 1 (two points)".into(),
                    ));
                }
                gauss_lobatto(degree)
            }
        };
        Ok(Self {
            kind,
            degree,
            nodes,
            weights,
        })
    }

    /// Rule used for the degree-`p` scheme of the given node family.
    ///
    /// For `p = 0` both families describe the same one-point collocation scheme
    /// (midpoint node, weight 2), so a Lobatto request falls back to the
    /// one-point Gauss rule instead of failing.
    pub fn for_scheme(kind: NodeKind, degree: usize) -> Result<Self> {
        if degree == 0 {
            return Self::new(NodeKind::GaussLegendre, 0);
        }
        Self::new(kind, degree)
    }

    pub fn kind(&self) -> NodeKind {
        self.kind
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Applies the rule to `f` on `[-1, 1]`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Largest ratio `ω_i / ω_j` over all weight pairs.
    pub fn weight_quotient_max(&self) -> f64 {
        let max = self.weights.iter().cloned().fold(f64::MIN, f64::max);
        let min = self.weights.iter().cloned().fold(f64::MAX, f64::min);
        max / min
    }

    /// Smallest gap between consecutive nodes; infinite for a one-point rule.
    pub fn min_node_distance(&self) -> f64 {
        self.nodes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

/// Values `(P_n(x), P_{n-1}(x))` from the three-term recurrence.
pub fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut prev, mut cur) = (1.0, x);
    for k in 1..n {
        let k = k as f64;
        let next = ((2.0 * k + 1.0) * x * cur - k * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

/// Legendre polynomial `P_n(x)` and its derivative. Valid for `|x| < 1`.
pub fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (pn, pnm1) = legendre_pair(n, x);
    if n == 0 {
        return (pn, 0.0);
    }
    let dp = n as f64 * (pnm1 - x * pn) / (1.0 - x * x);
    (pn, dp)
}

fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n / 2;
    for j in 0..half {
        let mut x = -(PI * (j as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..NEWTON_MAX_ITER {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= 1e-16 * (1.0 + x.abs()) {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[j] = x;
        nodes[n - 1 - j] = -x;
        weights[j] = w;
        weights[n - 1 - j] = w;
    }
    if n % 2 == 1 {
        let (_, dp) = legendre_with_derivative(n, 0.0);
        nodes[half] = 0.0;
        weights[half] = 2.0 / (dp * dp);
    }
    (nodes, weights)
}

fn gauss_lobatto(p: usize) -> (Vec<f64>, Vec<f64>) {
    let n = p + 1;
    let pf = p as f64;
    let scale = 2.0 / (pf * (pf + 1.0));
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    nodes[0] = -1.0;
    nodes[p] = 1.0;
    weights[0] = scale;
    weights[p] = scale;
    // interior nodes are the zeros of P'_p; iterate on q(x) = (1 - x²) P'_p(x)
    // whose derivative is -p(p+1) P_p(x)
    for j in 1..n / 2 {
        let mut x = -(PI * j as f64 / pf).cos();
        for _ in 0..NEWTON_MAX_ITER {
            let (pp, ppm1) = legendre_pair(p, x);
            let q = pf * (ppm1 - x * pp);
            let dx = q / (pf * (pf + 1.0) * pp);
            x += dx;
            if dx.abs() <= 1e-16 * (1.0 + x.abs()) {
                break;
            }
        }
        let (pp, _) = legendre_pair(p, x);
        let w = scale / (pp * pp);
        nodes[j] = x;
        nodes[p - j] = -x;
        weights[j] = w;
        weights[p - j] = w;
    }
    if n % 2 == 1 {
        let (pp, _) = legendre_pair(p, 0.0);
        nodes[p / 2] = 0.0;
        weights[p / 2] = scale / (pp * pp);
    }
    (nodes, weights)
}
