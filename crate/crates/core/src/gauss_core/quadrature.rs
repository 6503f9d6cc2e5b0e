//! One-dimensional Gauss rules and their tensor products.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Largest tensor grid (total node count) built without Monte Carlo.
pub const TENSOR_BUDGET: usize = 1 << 22;

/// Nodes and weights of the Gauss rule for `N(0, 1)`; weights sum to one.
///
/// Nodes come from the Golub–Welsch eigenproblem and are polished by Newton
/// steps on the normalised Hermite recurrence; weights use the Christoffel
/// formula `1 / Σ_{k<m} h_k(x)²`.
pub fn gauss_hermite(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1, "quadrature order must be positive");
    if order == 1 {
        return (vec![0.0], vec![1.0]);
    }
    let jac = DMatrix::from_fn(order, order, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = jac.symmetric_eigen().eigenvalues.iter().cloned().collect();
    nodes.sort_by(f64::total_cmp);
    let mut weights = Vec::with_capacity(order);
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let (h, hm1) = normalized_pair(order, *x);
            let dh = (order as f64).sqrt() * hm1;
            if dh == 0.0 {
                break;
            }
            let step = h / dh;
            *x -= step;
            if step.abs() < 1e-16 * (1.0 + x.abs()) {
                break;
            }
        }
        let mut s = 0.0;
        let (mut a, mut b) = (1.0, *x);
        s += a * a;
        if order > 1 {
            s += b * b;
        }
        for k in 1..order - 1 {
            let c = (*x * b - (k as f64).sqrt() * a) / ((k + 1) as f64).sqrt();
            a = b;
            b = c;
            s += b * b;
        }
        weights.push(1.0 / s);
    }
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
    (nodes, weights)
}

/// `(h_m(x), h_{m-1}(x))` for the normalised probabilists' Hermite functions.
fn normalized_pair(m: usize, x: f64) -> (f64, f64) {
    let (mut a, mut b) = (1.0, x);
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 1..m {
        let c = (x * b - (k as f64).sqrt() * a) / ((k + 1) as f64).sqrt();
        a = b;
        b = c;
    }
    (b, a)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1, "quadrature order must be positive");
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pnm1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Tensor product of one rule over `dim` axes.
pub struct TensorRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    dim: usize,
}

impl TensorRule {
    pub fn new(nodes: Vec<f64>, weights: Vec<f64>, dim: usize) -> Result<Self> {
        let m = nodes.len();
        let total = (m as f64).powi(dim as i32);
        if total > TENSOR_BUDGET as f64 {
            return Err(Error::TensorBudgetExceeded {
                dim,
                nodes: m,
                budget: TENSOR_BUDGET,
            });
        }
        Ok(TensorRule { nodes, weights, dim })
    }

    pub fn gauss_hermite(order: usize, dim: usize) -> Result<Self> {
        let (n, w) = gauss_hermite(order);
        Self::new(n, w, dim)
    }

    pub fn len(&self) -> usize {
        self.nodes.len().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Calls `f(point, weight)` on every tensor node, in a fixed order.
    pub fn for_each(&self, mut f: impl FnMut(&[f64], f64)) {
        let m = self.nodes.len();
        let mut idx = vec![0usize; self.dim];
        let mut point: Vec<f64> = vec![self.nodes[0]; self.dim];
        if self.dim == 0 {
            f(&point, 1.0);
            return;
        }
        loop {
            let w: f64 = idx.iter().map(|&i| self.weights[i]).product();
            f(&point, w);
            let mut axis = 0;
            loop {
                idx[axis] += 1;
                if idx[axis] < m {
                    point[axis] = self.nodes[idx[axis]];
                    break;
                }
                idx[axis] = 0;
                point[axis] = self.nodes[0];
                axis += 1;
                if axis == self.dim {
                    return;
                }
            }
        }
    }
}

/// `∫_a^b f(t) dt` on a log-spaced partition with Gauss–Legendre panels.
pub fn integrate_log_panels(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    assert!(a > 0.0 && b > a);
    let (x, w) = gauss_legendre(order);
    let (la, lb) = (a.ln(), b.ln());
    let h = (lb - la) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = la + h * p as f64;
        for (xi, wi) in x.iter().zip(&w) {
            let u = lo + 0.5 * h * (xi + 1.0);
            let t = u.exp();
            total += 0.5 * h * wi * t * f(t);
        }
    }
    total
}
