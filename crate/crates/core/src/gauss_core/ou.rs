//! Ornstein–Uhlenbeck generator, Mehler semigroup and Gaussian divergence.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use super::field::{ScalarField, VectorFieldH};
use super::quadrature::TensorRule;
use super::rng::SamplerState;
use super::space::GaussianSpace;
use crate::error::{Error, Result};

/// Dimension up to which the Mehler integral uses tensor quadrature by default.
pub const MEHLER_TENSOR_MAX_DIM: usize = 6;
/// Sample count of the Monte Carlo Mehler fallback.
pub const MEHLER_MC_SAMPLES: usize = 100_000;

/// `L f(x) = Σ λ_k ∂_kk f(x) − Σ x_k ∂_k f(x)`.
pub fn ou_apply(space: &GaussianSpace, f: &ScalarField, x: &DVector<f64>) -> Result<f64> {
    space.check_point(x)?;
    let h = f.hessian(x);
    let g = f.gradient(x);
    let mut v = 0.0;
    for k in 0..space.dim() {
        v += space.eigenvalues()[k] * h[(k, k)] - x[k] * g[k];
    }
    Ok(v)
}

/// `T(t) f(x) = ∫ f(e^{−t}x + √(1−e^{−2t}) y) μ(dy)` by tensor Gauss quadrature
/// with `quad_order` nodes per axis (exact for polynomials of degree below
/// `2·quad_order`).
pub fn mehler_apply(
    space: &GaussianSpace,
    f: &ScalarField,
    t: f64,
    x: &DVector<f64>,
    quad_order: usize,
) -> Result<f64> {
    check_time(t)?;
    space.check_point(x)?;
    if quad_order == 0 {
        return Err(Error::invalid("quad_order must be at least 1"));
    }
    if t == 0.0 {
        return Ok(f.value(x));
    }
    let n = space.dim();
    if n > MEHLER_TENSOR_MAX_DIM {
        return Err(Error::TensorBudgetExceeded {
            dim: n,
            nodes: quad_order,
            budget: super::quadrature::TENSOR_BUDGET,
        });
    }
    let rule = TensorRule::gauss_hermite(quad_order, n)?;
    let (a, b) = mehler_coefficients(t);
    let s = space.sqrt_eigenvalues();
    let mut y = DVector::zeros(n);
    let mut total = 0.0;
    rule.for_each(|z, w| {
        for k in 0..n {
            y[k] = a * x[k] + b * s[k] * z[k];
        }
        total += w * f.value(&y);
    });
    Ok(total)
}

/// Monte Carlo version of [`mehler_apply`] for dimensions beyond the tensor
/// budget. Returns the estimate and its standard error.
pub fn mehler_apply_mc(
    space: &GaussianSpace,
    f: &ScalarField,
    t: f64,
    x: &DVector<f64>,
    state: SamplerState,
    count: usize,
) -> Result<(f64, f64)> {
    check_time(t)?;
    space.check_point(x)?;
    if count < 2 {
        return Err(Error::invalid("Monte Carlo Mehler needs at least two samples"));
    }
    let n = space.dim();
    let (a, b) = mehler_coefficients(t);
    let s = space.sqrt_eigenvalues();
    let mut rng = state.rng();
    let mut y = DVector::zeros(n);
    let (mut mean, mut m2) = (0.0, 0.0);
    for i in 0..count {
        for k in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            y[k] = a * x[k] + b * s[k] * z;
        }
        let v = f.value(&y);
        let d = v - mean;
        mean += d / (i + 1) as f64;
        m2 += d * (v - mean);
    }
    Ok((mean, (m2 / (count - 1) as f64 / count as f64).sqrt()))
}

/// Quadrature when the dimension allows it, otherwise Monte Carlo with
/// [`MEHLER_MC_SAMPLES`] draws.
pub fn mehler_apply_auto(
    space: &GaussianSpace,
    f: &ScalarField,
    t: f64,
    x: &DVector<f64>,
    quad_order: usize,
    state: SamplerState,
) -> Result<f64> {
    match mehler_apply(space, f, t, x, quad_order) {
        Err(Error::TensorBudgetExceeded { .. }) => Ok(mehler_apply_mc(space, f, t, x, state, MEHLER_MC_SAMPLES)?.0),
        other => other,
    }
}

fn mehler_coefficients(t: f64) -> (f64, f64) {
    let a = (-t).exp();
    // 1 − e^{−2t} without cancellation for small t
    let b = (-(-2.0 * t).exp_m1()).sqrt();
    (a, b)
}

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("time must be nonnegative, got {t}")))
    }
}

/// `div Φ(x) = Σ (D_k φ_k(x) − φ_k(x) v̂_k(x))`.
pub fn gaussian_divergence(space: &GaussianSpace, phi: &VectorFieldH, x: &DVector<f64>) -> Result<f64> {
    if phi.dim() != space.dim() {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            got: phi.dim(),
        });
    }
    space.check_point(x)?;
    let s = space.sqrt_eigenvalues();
    let mut v = 0.0;
    for (k, c) in phi.components().iter().enumerate() {
        v += s[k] * c.gradient(x)[k] - c.value(x) * x[k] / s[k];
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss_core::hermite::HermiteExpansion;

    #[test]
    fn generator_examples() {
        let s = GaussianSpace::standard(2).unwrap();
        let g = ScalarField::squared_distance(DVector::zeros(2), 1.0);
        let x = DVector::from_vec(vec![1.0, 0.0]);
        assert!((ou_apply(&s, &g, &x).unwrap() - 2.0).abs() < 1e-14);
        let a = DVector::from_vec(vec![0.3, -2.0]);
        let lin = ScalarField::affine(a.clone(), 0.0);
        let y = DVector::from_vec(vec![1.1, 0.4]);
        assert!((ou_apply(&s, &lin, &y).unwrap() + a.dot(&y)).abs() < 1e-14);
    }

    #[test]
    fn hermite_modes_are_eigenfunctions() {
        let s = GaussianSpace::diagonal(vec![3.0, 0.5]).unwrap();
        let f = HermiteExpansion::basis(&s, vec![2, 3]).unwrap().to_field("H");
        for x in crate::gauss_core::field::random_probes(2, SamplerState::new(1, 0), 10, 1.0) {
            let lf = ou_apply(&s, &f, &x).unwrap();
            assert!((lf + 5.0 * f.value(&x)).abs() < 1e-10 * (1.0 + f.value(&x).abs()));
        }
    }

    #[test]
    fn mehler_on_modes_and_constants() {
        let s = GaussianSpace::standard(1).unwrap();
        let x = DVector::from_vec(vec![0.9]);
        for k in 0..8u32 {
            let f = HermiteExpansion::axis_mode(&s, 0, k).unwrap().to_field("h");
            for t in [0.0, 0.1, 1.3] {
                let v = mehler_apply(&s, &f, t, &x, k as usize + 1).unwrap();
                let want = (-(k as f64) * t).exp() * f.value(&x);
                assert!((v - want).abs() <= 1e-10 * want.abs().max(1e-3), "k {k} t {t}");
            }
        }
        let one = ScalarField::constant(1, 1.0);
        assert!((mehler_apply(&s, &one, 2.0, &x, 3).unwrap() - 1.0).abs() < 1e-15);
        assert!(mehler_apply(&s, &one, -1.0, &x, 3).is_err());
    }

    #[test]
    fn mehler_mc_fallback() {
        let s = GaussianSpace::standard(8).unwrap();
        let f = ScalarField::coordinate_power(8, 0, 2);
        let x = DVector::from_element(8, 0.5);
        assert!(matches!(
            mehler_apply(&s, &f, 0.5, &x, 4),
            Err(Error::TensorBudgetExceeded { .. })
        ));
        let (v, se) = mehler_apply_mc(&s, &f, 0.5, &x, SamplerState::new(9, 0), 100_000).unwrap();
        let a = (-0.5f64).exp();
        let want = a * a * 0.25 + 1.0 - a * a;
        assert!((v - want).abs() < 4.0 * se);
    }

    #[test]
    fn divergence_examples() {
        let s = GaussianSpace::standard(2).unwrap();
        let radial: Vec<ScalarField> = (0..2)
            .map(|k| {
                ScalarField::with_gradient(
                    "x/|x|",
                    2,
                    move |x| x[k] / x.norm(),
                    move |x| {
                        let r = x.norm();
                        let mut g = -x * (x[k] / r.powi(3));
                        g[k] += 1.0 / r;
                        g
                    },
                )
            })
            .collect();
        let phi = VectorFieldH::new(2, radial).unwrap();
        let sv = 0.7;
        let x = DVector::from_vec(vec![sv, 0.0]);
        assert!((gaussian_divergence(&s, &phi, &x).unwrap() - (1.0 / sv - sv)).abs() < 1e-12);

        let constant =
            VectorFieldH::new(2, vec![ScalarField::constant(2, 1.0), ScalarField::constant(2, 0.0)]).unwrap();
        let y = DVector::from_vec(vec![0.4, -1.0]);
        assert!((gaussian_divergence(&s, &constant, &y).unwrap() + 0.4).abs() < 1e-15);
        let minus = VectorFieldH::new(2, vec![ScalarField::constant(2, -1.0), ScalarField::constant(2, 0.0)]).unwrap();
        assert!((gaussian_divergence(&s, &minus, &y).unwrap() - 0.4).abs() < 1e-15);
    }
}
