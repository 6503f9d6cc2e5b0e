//! Scalar and Cameron–Martin vector fields with value, gradient and Hessian
//! callbacks.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::rng::SamplerState;
use crate::error::{Error, Result};

pub type ValueFn = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type HessianFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Smoothness {
    Smooth,
    Lipschitz,
}

/// Where the derivative callbacks come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DerivativeSource {
    Analytic,
    /// Analytic gradient, Hessian by central differences of the gradient.
    FiniteDifferenceHessian,
    /// Gradient and Hessian both by central differences.
    FiniteDifference,
}

#[derive(Clone)]
pub struct ScalarField {
    label: String,
    dim: usize,
    value: ValueFn,
    gradient: GradientFn,
    hessian: HessianFn,
    smoothness: Smoothness,
    derivatives: DerivativeSource,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("smoothness", &self.smoothness)
            .field("derivatives", &self.derivatives)
            .finish()
    }
}

/// Central-difference step used by validators and fallbacks.
pub fn fd_step(x: &DVector<f64>) -> f64 {
    1e-5 * (1.0 + x.norm())
}

pub fn fd_gradient(value: &dyn Fn(&DVector<f64>) -> f64, x: &DVector<f64>) -> DVector<f64> {
    let h = fd_step(x);
    let mut g = DVector::zeros(x.len());
    let mut y = x.clone();
    for k in 0..x.len() {
        y[k] = x[k] + h;
        let fp = value(&y);
        y[k] = x[k] - h;
        let fm = value(&y);
        y[k] = x[k];
        g[k] = (fp - fm) / (2.0 * h);
    }
    g
}

pub fn fd_hessian(gradient: &dyn Fn(&DVector<f64>) -> DVector<f64>, x: &DVector<f64>) -> DMatrix<f64> {
    let n = x.len();
    let h = fd_step(x);
    let mut m = DMatrix::zeros(n, n);
    let mut y = x.clone();
    for k in 0..n {
        y[k] = x[k] + h;
        let gp = gradient(&y);
        y[k] = x[k] - h;
        let gm = gradient(&y);
        y[k] = x[k];
        for i in 0..n {
            m[(i, k)] = (gp[i] - gm[i]) / (2.0 * h);
        }
    }
    (&m + m.transpose()) * 0.5
}

/// Second differences of the value, with a larger step suited to them.
fn fd_hessian_from_value(value: &dyn Fn(&DVector<f64>) -> f64, x: &DVector<f64>) -> DMatrix<f64> {
    let n = x.len();
    let h = 1e-4 * (1.0 + x.norm());
    let f0 = value(x);
    let mut m = DMatrix::zeros(n, n);
    let mut y = x.clone();
    for i in 0..n {
        y[i] = x[i] + h;
        let fp = value(&y);
        y[i] = x[i] - h;
        let fm = value(&y);
        y[i] = x[i];
        m[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in 0..i {
            let mut s = 0.0;
            for (si, sj, sign) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                y[i] = x[i] + si * h;
                y[j] = x[j] + sj * h;
                s += sign * value(&y);
            }
            y[i] = x[i];
            y[j] = x[j];
            m[(i, j)] = s / (4.0 * h * h);
            m[(j, i)] = m[(i, j)];
        }
    }
    m
}

impl ScalarField {
    pub fn new(
        label: impl Into<String>,
        dim: usize,
        value: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        hessian: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        ScalarField {
            label: label.into(),
            dim,
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            hessian: Arc::new(hessian),
            smoothness: Smoothness::Smooth,
            derivatives: DerivativeSource::Analytic,
        }
    }

    /// Analytic value and gradient; the Hessian is differenced.
    pub fn with_gradient(
        label: impl Into<String>,
        dim: usize,
        value: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        let gradient: GradientFn = Arc::new(gradient);
        let g = gradient.clone();
        ScalarField {
            label: label.into(),
            dim,
            value: Arc::new(value),
            gradient,
            hessian: Arc::new(move |x| fd_hessian(&*g, x)),
            smoothness: Smoothness::Smooth,
            derivatives: DerivativeSource::FiniteDifferenceHessian,
        }
    }

    /// Only the value is known; derivatives are differenced.
    pub fn from_value(
        label: impl Into<String>,
        dim: usize,
        value: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
    ) -> Self {
        let value: ValueFn = Arc::new(value);
        let v1 = value.clone();
        let v2 = value.clone();
        ScalarField {
            label: label.into(),
            dim,
            value,
            gradient: Arc::new(move |x| fd_gradient(&*v1, x)),
            hessian: Arc::new(move |x| fd_hessian_from_value(&*v2, x)),
            smoothness: Smoothness::Smooth,
            derivatives: DerivativeSource::FiniteDifference,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_smoothness(mut self, smoothness: Smoothness) -> Self {
        self.smoothness = smoothness;
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    pub fn derivative_source(&self) -> DerivativeSource {
        self.derivatives
    }

    #[inline]
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        (self.value)(x)
    }

    #[inline]
    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.gradient)(x)
    }

    #[inline]
    pub fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        (self.hessian)(x)
    }

    pub fn value_fn(&self) -> ValueFn {
        self.value.clone()
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        ScalarField::new(
            format!("{c}"),
            dim,
            move |_| c,
            move |_| DVector::zeros(dim),
            move |_| DMatrix::zeros(dim, dim),
        )
    }

    /// `x ↦ x_k` (zero-based `k`).
    pub fn coordinate(dim: usize, k: usize) -> Self {
        Self::coordinate_power(dim, k, 1)
    }

    /// `x ↦ x_k^m`.
    pub fn coordinate_power(dim: usize, k: usize, m: u32) -> Self {
        assert!(k < dim, "coordinate index {k} out of range for dimension {dim}");
        let label = if m == 1 {
            format!("x{}", k + 1)
        } else {
            format!("x{}^{m}", k + 1)
        };
        let mf = m as f64;
        ScalarField::new(
            label,
            dim,
            move |x| x[k].powi(m as i32),
            move |x| {
                let mut g = DVector::zeros(dim);
                if m >= 1 {
                    g[k] = mf * x[k].powi(m as i32 - 1);
                }
                g
            },
            move |x| {
                let mut h = DMatrix::zeros(dim, dim);
                if m >= 2 {
                    h[(k, k)] = mf * (mf - 1.0) * x[k].powi(m as i32 - 2);
                }
                h
            },
        )
    }

    /// `x ↦ ⟨a, x⟩ + b`.
    pub fn affine(a: DVector<f64>, b: f64) -> Self {
        let dim = a.len();
        let a1 = a.clone();
        let a2 = a.clone();
        ScalarField::new(
            "affine",
            dim,
            move |x| a1.dot(x) + b,
            move |_| a2.clone(),
            move |_| DMatrix::zeros(dim, dim),
        )
    }

    /// `x ↦ exp(-a‖x‖²)`.
    pub fn gaussian_bump(dim: usize, a: f64) -> Self {
        ScalarField::new(
            format!("exp(-{a}|x|^2)"),
            dim,
            move |x| (-a * x.norm_squared()).exp(),
            move |x| x * (-2.0 * a * (-a * x.norm_squared()).exp()),
            move |x| {
                let e = (-a * x.norm_squared()).exp();
                let mut h = x * x.transpose() * (4.0 * a * a * e);
                for i in 0..dim {
                    h[(i, i)] -= 2.0 * a * e;
                }
                h
            },
        )
    }

    /// `x ↦ ‖x − center‖² − r²`.
    pub fn squared_distance(center: DVector<f64>, r: f64) -> Self {
        let dim = center.len();
        let c1 = center.clone();
        let c2 = center;
        ScalarField::new(
            "sqdist",
            dim,
            move |x| (x - &c1).norm_squared() - r * r,
            move |x| (x - &c2) * 2.0,
            move |_| DMatrix::identity(dim, dim) * 2.0,
        )
    }

    pub fn scaled(&self, c: f64) -> Self {
        let f = self.clone();
        let g = self.clone();
        let h = self.clone();
        ScalarField {
            label: format!("{c}*{}", self.label),
            dim: self.dim,
            value: Arc::new(move |x| c * f.value(x)),
            gradient: Arc::new(move |x| g.gradient(x) * c),
            hessian: Arc::new(move |x| h.hessian(x) * c),
            smoothness: self.smoothness,
            derivatives: self.derivatives,
        }
    }

    pub fn sum(a: &ScalarField, b: &ScalarField) -> Self {
        assert_eq!(a.dim, b.dim, "field dimensions differ");
        let (a1, b1, a2, b2, a3, b3) = (a.clone(), b.clone(), a.clone(), b.clone(), a.clone(), b.clone());
        ScalarField {
            label: format!("({}+{})", a.label, b.label),
            dim: a.dim,
            value: Arc::new(move |x| a1.value(x) + b1.value(x)),
            gradient: Arc::new(move |x| a2.gradient(x) + b2.gradient(x)),
            hessian: Arc::new(move |x| a3.hessian(x) + b3.hessian(x)),
            smoothness: weaker(a.smoothness, b.smoothness),
            derivatives: coarser(a.derivatives, b.derivatives),
        }
    }

    pub fn product(a: &ScalarField, b: &ScalarField) -> Self {
        assert_eq!(a.dim, b.dim, "field dimensions differ");
        let (a1, b1, a2, b2, a3, b3) = (a.clone(), b.clone(), a.clone(), b.clone(), a.clone(), b.clone());
        ScalarField {
            label: format!("{}*{}", a.label, b.label),
            dim: a.dim,
            value: Arc::new(move |x| a1.value(x) * b1.value(x)),
            gradient: Arc::new(move |x| a2.gradient(x) * b2.value(x) + b2.gradient(x) * a2.value(x)),
            hessian: Arc::new(move |x| {
                let (fa, fb) = (a3.value(x), b3.value(x));
                let (ga, gb) = (a3.gradient(x), b3.gradient(x));
                a3.hessian(x) * fb + b3.hessian(x) * fa + &ga * gb.transpose() + &gb * ga.transpose()
            }),
            smoothness: weaker(a.smoothness, b.smoothness),
            derivatives: coarser(a.derivatives, b.derivatives),
        }
    }

    /// `x ↦ ψ(f(x))` for a one-variable `ψ` given with its first two
    /// derivatives.
    pub fn compose(
        &self,
        label: impl Into<String>,
        psi: impl Fn(f64) -> (f64, f64, f64) + Send + Sync + 'static,
    ) -> Self {
        let psi = Arc::new(psi);
        let (p1, p2, p3) = (psi.clone(), psi.clone(), psi);
        let (f1, f2, f3) = (self.clone(), self.clone(), self.clone());
        ScalarField {
            label: label.into(),
            dim: self.dim,
            value: Arc::new(move |x| p1(f1.value(x)).0),
            gradient: Arc::new(move |x| f2.gradient(x) * p2(f2.value(x)).1),
            hessian: Arc::new(move |x| {
                let (_, d1, d2) = p3(f3.value(x));
                let g = f3.gradient(x);
                f3.hessian(x) * d1 + &g * g.transpose() * d2
            }),
            smoothness: self.smoothness,
            derivatives: self.derivatives,
        }
    }
}

fn weaker(a: Smoothness, b: Smoothness) -> Smoothness {
    if a == Smoothness::Lipschitz || b == Smoothness::Lipschitz {
        Smoothness::Lipschitz
    } else {
        Smoothness::Smooth
    }
}

fn coarser(a: DerivativeSource, b: DerivativeSource) -> DerivativeSource {
    use DerivativeSource::*;
    match (a, b) {
        (FiniteDifference, _) | (_, FiniteDifference) => FiniteDifference,
        (FiniteDifferenceHessian, _) | (_, FiniteDifferenceHessian) => FiniteDifferenceHessian,
        _ => Analytic,
    }
}

/// Vector field `Φ = Σ φ_k v_k` given by its Cameron–Martin coefficients.
#[derive(Clone, Debug)]
pub struct VectorFieldH {
    components: Vec<ScalarField>,
}

impl VectorFieldH {
    pub fn new(dim: usize, components: Vec<ScalarField>) -> Result<Self> {
        if components.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: components.len(),
            });
        }
        if let Some(c) = components.iter().find(|c| c.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: c.dim(),
            });
        }
        Ok(VectorFieldH { components })
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.components.iter().map(|c| c.value(x)))
    }
}

/// Random probe points `N(0, scale² I)`.
pub fn random_probes(dim: usize, state: SamplerState, count: usize, scale: f64) -> Vec<DVector<f64>> {
    let mut rng = state.rng();
    (0..count)
        .map(|_| DVector::from_fn(dim, |_, _| scale * rng.sample::<f64, _>(StandardNormal)))
        .collect()
}

fn rel_err(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(1.0)
}

/// Largest relative discrepancy between the gradient callback and central
/// differences of the value, normalised by `max(1, ‖∇f‖∞)`.
pub fn check_gradient(f: &ScalarField, probes: &[DVector<f64>]) -> f64 {
    let vf = f.value_fn();
    probes
        .iter()
        .map(|x| {
            let g = f.gradient(x);
            let fd = fd_gradient(&*vf, x);
            let scale = g.amax();
            g.iter()
                .zip(fd.iter())
                .map(|(a, b)| rel_err(*a, *b, scale))
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// Same as [`check_gradient`] for the Hessian against differences of the
/// gradient.
pub fn check_hessian(f: &ScalarField, probes: &[DVector<f64>]) -> f64 {
    let ff = f.clone();
    let grad = move |x: &DVector<f64>| ff.gradient(x);
    probes
        .iter()
        .map(|x| {
            let h = f.hessian(x);
            let fd = fd_hessian(&grad, x);
            let scale = h.amax();
            h.iter()
                .zip(fd.iter())
                .map(|(a, b)| rel_err(*a, *b, scale))
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probes(dim: usize) -> Vec<DVector<f64>> {
        random_probes(dim, SamplerState::new(7, 0), 100, 1.5)
    }

    #[test]
    fn library_fields_pass_derivative_checks() {
        let fields = vec![
            ScalarField::constant(3, 2.0),
            ScalarField::coordinate(3, 1),
            ScalarField::coordinate_power(3, 2, 2),
            ScalarField::coordinate_power(3, 0, 3),
            ScalarField::gaussian_bump(3, 0.25),
            ScalarField::squared_distance(DVector::from_vec(vec![0.1, 0.0, -0.2]), 1.0),
            ScalarField::product(&ScalarField::coordinate(3, 0), &ScalarField::gaussian_bump(3, 0.25)),
            ScalarField::gaussian_bump(3, 0.25).compose("sin", |u| (u.sin(), u.cos(), -u.sin())),
        ];
        let p = probes(3);
        for f in &fields {
            assert!(check_gradient(f, &p) <= 1e-5, "{}", f.label());
            assert!(check_hessian(f, &p) <= 1e-5, "{}", f.label());
        }
    }

    #[test]
    fn fd_fallback_is_flagged_and_accurate() {
        let f = ScalarField::from_value("cube", 2, |x| x[0].powi(3) * x[1]);
        assert_eq!(f.derivative_source(), DerivativeSource::FiniteDifference);
        let x = DVector::from_vec(vec![0.7, -1.1]);
        let g = f.gradient(&x);
        assert!((g[0] - 3.0 * 0.49 * -1.1).abs() < 1e-7);
        let h = f.hessian(&x);
        assert!((h[(0, 1)] - 3.0 * 0.49).abs() < 1e-4);
    }

    #[test]
    fn vector_field_dimension_checked() {
        let c = vec![ScalarField::constant(2, 1.0)];
        assert!(VectorFieldH::new(2, c).is_err());
    }
}
