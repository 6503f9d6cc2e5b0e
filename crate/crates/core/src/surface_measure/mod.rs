//! The Gaussian surface measure `ρ` on level sets `{G = ξ}`.
//!
//! Two independent routes are provided: weighted quadrature on an explicit
//! parametrization of the level set ([`surface_integral`]), and kernel density
//! estimates of the pushforward `φμ ∘ G^{-1}` ([`qphi_estimate`]).

mod coarea;
mod marching;
mod quadrature;

pub use coarea::{
    coarea_surface_integral, maggl1_check, phi1_field, phi1_value, pushforward_sample, qphi_derivative_check,
    qphi_estimate, rho_total_via_identity, route_pair, Bandwidth, DensityCurve, DerivativeCheck, KdeOptions,
    L1BoundCheck, PushforwardSample,
};
pub use quadrature::{
    band_quadrature, surface_integral, surface_integral_fn, surface_quadrature, QuadratureMethod, SurfaceQuadrature,
};

use nalgebra::DVector;

use crate::domains::LevelSetDomain;
use crate::error::{Error, Result};
use crate::gauss_core::GaussianSpace;

/// Density of `ρ` against Euclidean surface measure at a point of a level set:
///
/// `exp(−⟨Q^{-1}x, x⟩/2) / ((det Q)^{1/2} (2π)^{n/2}) · ‖Q^{1/2}∇G‖ / ‖∇G‖`.
pub fn surface_weight(space: &GaussianSpace, domain: &LevelSetDomain, x: &DVector<f64>) -> Result<f64> {
    space.check_point(x)?;
    let grad = domain.g().gradient(x);
    surface_weight_from_gradient(space, x, &grad)
}

pub(crate) fn surface_weight_from_gradient(
    space: &GaussianSpace,
    x: &DVector<f64>,
    grad: &DVector<f64>,
) -> Result<f64> {
    let en = grad.norm();
    if !(en > 1e-12) {
        return Err(Error::Degenerate(format!(
            "vanishing gradient of G at {:?}",
            x.as_slice()
        )));
    }
    let hn = grad
        .iter()
        .zip(space.eigenvalues())
        .map(|(g, l)| g * g * l)
        .sum::<f64>()
        .sqrt();
    Ok(space.density(x) * hn / en)
}

/// Writes `(xi, value, stderr)` rows.
pub fn write_curve_csv(path: &std::path::Path, xi: &[f64], value: &[f64], stderr: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["xi", "value", "stderr"])?;
    for i in 0..xi.len() {
        w.write_record([xi[i].to_string(), value[i].to_string(), stderr[i].to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::{make_ball, make_halfspace};

    #[test]
    fn weight_examples() {
        let s = GaussianSpace::standard(1).unwrap();
        let d = make_halfspace(&s, &[1.0]).unwrap();
        let w = surface_weight(&s, &d, &DVector::from_vec(vec![0.0])).unwrap();
        assert!((w - (2.0 * std::f64::consts::PI).sqrt().recip()).abs() < 1e-15);

        let s = GaussianSpace::standard(2).unwrap();
        let d = make_ball(&s, 1.0).unwrap();
        let want = (-0.5f64).exp() / (2.0 * std::f64::consts::PI);
        for th in [0.0, 1.0, 2.5] {
            let x = DVector::from_vec(vec![f64::cos(th), f64::sin(th)]);
            assert!((surface_weight(&s, &d, &x).unwrap() - want).abs() < 1e-15);
        }
        assert!(matches!(
            surface_weight(&s, &d, &DVector::zeros(2)),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn metric_factor_for_anisotropic_hyperplane() {
        // G = −x_1/√λ_1: the metric factor is √λ_1.
        let s = GaussianSpace::diagonal(vec![4.0, 1.0]).unwrap();
        let d = make_halfspace(&s, &[1.0, 0.0]).unwrap();
        let x = DVector::from_vec(vec![0.0, 0.3]);
        let w = surface_weight(&s, &d, &x).unwrap();
        assert!((w - 2.0 * s.density(&x)).abs() < 1e-15);
    }
}
