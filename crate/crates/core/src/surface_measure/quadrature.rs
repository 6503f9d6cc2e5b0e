//! Weighted point sets on level sets and the parametrized surface integral.

use std::f64::consts::PI;

use nalgebra::DVector;

use super::marching::marching_squares;
use super::surface_weight_from_gradient;
use crate::domains::{DomainParams, LevelSetDomain};
use crate::error::{Error, Result};
use crate::gauss_core::quadrature::{gauss_legendre, TensorRule};
use crate::gauss_core::{GaussianSpace, SamplerState};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuadratureMethod {
    /// Closed-form parametrization (hyperplane, graph, sphere, ellipsoid).
    Parametrized,
    /// Polygonal approximation of a planar level curve.
    Marching,
    /// Weighted Monte Carlo samples from a thin band around the level set.
    McBand,
}

/// Points on `{G = ξ}` with weights realising `∫ · dρ`.
#[derive(Clone, Debug)]
pub struct SurfaceQuadrature {
    pub points: Vec<DVector<f64>>,
    pub weights: Vec<f64>,
    pub level: f64,
    pub method: QuadratureMethod,
}

impl SurfaceQuadrature {
    pub fn integrate(&self, f: impl Fn(&DVector<f64>) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(p)).sum()
    }

    /// Total mass, `ρ({G = ξ})` on the covered patch.
    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    fn empty(level: f64) -> Self {
        SurfaceQuadrature {
            points: Vec::new(),
            weights: Vec::new(),
            level,
            method: QuadratureMethod::Parametrized,
        }
    }
}

/// Builds the quadrature at resolution `m` (nodes per parameter axis; for
/// planar curves handled by marching squares, `4m` cells per side).
pub fn surface_quadrature(
    space: &GaussianSpace,
    domain: &LevelSetDomain,
    level: f64,
    resolution: usize,
) -> Result<SurfaceQuadrature> {
    if resolution < 2 {
        return Err(Error::invalid("surface resolution must be at least 2"));
    }
    let n = space.dim();
    if domain.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: domain.dim(),
        });
    }
    // Each parametrization yields points with Euclidean area weights.
    let (points, areas, method) = match domain.params() {
        DomainParams::Halfspace { hhat } => {
            let (p, a) = hyperplane(space, hhat, level, resolution)?;
            (p, a, QuadratureMethod::Parametrized)
        }
        DomainParams::GraphRegion { h_index, graph } => {
            let (p, a) = graph_surface(space, *h_index, graph, level, resolution)?;
            (p, a, QuadratureMethod::Parametrized)
        }
        DomainParams::Ball { radius, center } if n <= 3 => {
            let r2 = radius * radius + level;
            if r2 <= 0.0 {
                return Ok(SurfaceQuadrature::empty(level));
            }
            let scale = DVector::from_element(n, r2.sqrt());
            let (p, a) = ellipsoid_surface(&scale, resolution);
            (
                p.into_iter().map(|x| x + center).collect(),
                a,
                QuadratureMethod::Parametrized,
            )
        }
        DomainParams::Ellipsoid(e) if n <= 3 => {
            if e.alphas.contains(&0.0) {
                return Err(Error::Unsupported(
                    "ellipsoid with a zero coefficient is unbounded".into(),
                ));
            }
            let r2 = e.radius * e.radius + level;
            if r2 <= 0.0 {
                return Ok(SurfaceQuadrature::empty(level));
            }
            let scale = DVector::from_iterator(n, e.alphas.iter().map(|a| (r2 / a).sqrt()));
            let (p, a) = ellipsoid_surface(&scale, resolution);
            (p, a, QuadratureMethod::Parametrized)
        }
        _ if n == 2 => {
            let (p, a) = marching_squares(space, domain, level, 4 * resolution)?;
            (p, a, QuadratureMethod::Marching)
        }
        _ => {
            return Err(Error::Unsupported(format!(
                "no surface parametrization for {} in dimension {n}; use the coarea route",
                domain.label()
            )))
        }
    };
    let mut weights = Vec::with_capacity(points.len());
    for (p, a) in points.iter().zip(&areas) {
        let grad = domain.g().gradient(p);
        weights.push(a * surface_weight_from_gradient(space, p, &grad)?);
    }
    Ok(SurfaceQuadrature {
        points,
        weights,
        level,
        method,
    })
}

/// `∫_{G=ξ} f dρ` at resolutions `m` and `2m`; returns the finer value and
/// `|I_{2m} − I_m|`.
pub fn surface_integral_fn(
    space: &GaussianSpace,
    domain: &LevelSetDomain,
    level: f64,
    resolution: usize,
    f: &dyn Fn(&DVector<f64>) -> f64,
) -> Result<(f64, f64)> {
    let coarse = surface_quadrature(space, domain, level, resolution)?.integrate(f);
    let fine = surface_quadrature(space, domain, level, 2 * resolution)?.integrate(f);
    Ok((fine, (fine - coarse).abs()))
}

/// `∫_{G=ξ} φ dρ` with a Richardson error estimate.
pub fn surface_integral(
    space: &GaussianSpace,
    domain: &LevelSetDomain,
    phi: &crate::gauss_core::ScalarField,
    level: f64,
    resolution: usize,
) -> Result<(f64, f64)> {
    surface_integral_fn(space, domain, level, resolution, &|x| phi.value(x))
}

/// Band quadrature: samples of `μ` with `|G − ξ| < ε/2`, weighted by
/// `|D_H G| / (ε N)`. By the coarea formula its integrals average
/// `∫_{G=s} · dρ` over `s` in the band.
pub fn band_quadrature(
    space: &GaussianSpace,
    domain: &LevelSetDomain,
    level: f64,
    eps: f64,
    state: SamplerState,
    count: usize,
) -> Result<SurfaceQuadrature> {
    if !(eps > 0.0) {
        return Err(Error::invalid("band width must be positive"));
    }
    let samples = crate::gauss_core::sample_gaussian(space, state, count);
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for c in 0..count {
        let x = samples.column(c).into_owned();
        let j = domain.jet(space, &x);
        if (j.value - level).abs() < eps / 2.0 {
            weights.push(j.norm_h / (eps * count as f64));
            points.push(x);
        }
    }
    Ok(SurfaceQuadrature {
        points,
        weights,
        level,
        method: QuadratureMethod::McBand,
    })
}

/// Orthonormal basis of the orthogonal complement of a unit vector.
fn complement_basis(a: &DVector<f64>) -> Vec<DVector<f64>> {
    let n = a.len();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i].abs().total_cmp(&a[j].abs()));
    for &k in &order {
        if basis.len() == n - 1 {
            break;
        }
        let mut v = DVector::zeros(n);
        v[k] = 1.0;
        v -= a * a[k];
        for b in &basis {
            let c = b.dot(&v);
            v -= b * c;
        }
        let norm = v.norm();
        if norm > 1e-8 {
            basis.push(v / norm);
        }
    }
    basis
}

/// Points and Euclidean area weights for `{⟨c, x⟩ = −ξ}`, parametrized in
/// whitened coordinates and integrated with a Gauss rule in the tangential
/// variables.
fn hyperplane(space: &GaussianSpace, c: &DVector<f64>, level: f64, m: usize) -> Result<(Vec<DVector<f64>>, Vec<f64>)> {
    let n = space.dim();
    // whitened normal a = Q^{1/2} c, unit by construction of the halfspace
    let a = space.color(c);
    let a = &a / a.norm();
    // ⟨c, x⟩ = ⟨a, z⟩ |Q^{1/2}c| and |Q^{1/2}c| = 1 for normalised halfspaces
    let cn = space.color(c).norm();
    let z0 = &a * (-level / cn);
    // area scaling of x = Q^{1/2} z restricted to the plane
    let det_sqrt: f64 = space.sqrt_eigenvalues().iter().product();
    let area_factor = det_sqrt * space.whiten(&a).norm();
    if n == 1 {
        return Ok((vec![space.color(&z0)], vec![1.0]));
    }
    let basis = complement_basis(&a);
    let rule = TensorRule::gauss_hermite(m, n - 1)?;
    let mut pts = Vec::with_capacity(rule.len());
    let mut wts = Vec::with_capacity(rule.len());
    let log_norm = 0.5 * (n - 1) as f64 * (2.0 * PI).ln();
    rule.for_each(|u, w| {
        let mut z = z0.clone();
        let mut u2 = 0.0;
        for (ui, b) in u.iter().zip(&basis) {
            z += b * *ui;
            u2 += ui * ui;
        }
        pts.push(space.color(&z));
        // Lebesgue du = N(0, I)(du) / φ(u)
        wts.push(w * area_factor * (0.5 * u2 + log_norm).exp());
    });
    Ok((pts, wts))
}

fn graph_surface(
    space: &GaussianSpace,
    j: usize,
    graph: &crate::gauss_core::ScalarField,
    level: f64,
    m: usize,
) -> Result<(Vec<DVector<f64>>, Vec<f64>)> {
    let n = space.dim();
    let sj = space.sqrt_eigenvalues()[j];
    let others: Vec<usize> = (0..n).filter(|&k| k != j).collect();
    let sy: Vec<f64> = others.iter().map(|&k| space.sqrt_eigenvalues()[k]).collect();
    let jac: f64 = sy.iter().product();
    let rule = TensorRule::gauss_hermite(m, n - 1)?;
    let log_norm = 0.5 * (n - 1) as f64 * (2.0 * PI).ln();
    let mut pts = Vec::with_capacity(rule.len());
    let mut wts = Vec::with_capacity(rule.len());
    rule.for_each(|w_node, w| {
        let y = DVector::from_iterator(n - 1, w_node.iter().zip(&sy).map(|(a, b)| a * b));
        let f = graph.value(&y);
        let gy = graph.gradient(&y);
        let mut x = DVector::zeros(n);
        for (i, &k) in others.iter().enumerate() {
            x[k] = y[i];
        }
        x[j] = sj * (f + level);
        let area = (1.0 + sj * sj * gy.norm_squared()).sqrt();
        let u2: f64 = w_node.iter().map(|v| v * v).sum();
        pts.push(x);
        wts.push(w * jac * area * (0.5 * u2 + log_norm).exp());
    });
    Ok((pts, wts))
}

/// Surface `{Σ x_k² / s_k² = 1}` for `n ≤ 3` as the image of the unit sphere
/// under `diag(s)`, with area element `|det D| ‖D^{-1} ω‖ dS(ω)`.
fn ellipsoid_surface(scale: &DVector<f64>, m: usize) -> (Vec<DVector<f64>>, Vec<f64>) {
    let n = scale.len();
    let det: f64 = scale.iter().product();
    let stretch = |w: &DVector<f64>| -> (DVector<f64>, f64) {
        let x = DVector::from_fn(n, |k, _| scale[k] * w[k]);
        let inv = DVector::from_fn(n, |k, _| w[k] / scale[k]).norm();
        (x, det * inv)
    };
    let mut pts = Vec::new();
    let mut wts = Vec::new();
    match n {
        1 => {
            for s in [-1.0, 1.0] {
                pts.push(DVector::from_vec(vec![s * scale[0]]));
                wts.push(1.0);
            }
        }
        2 => {
            let h = 2.0 * PI / m as f64;
            for i in 0..m {
                let th = h * i as f64;
                let w = DVector::from_vec(vec![th.cos(), th.sin()]);
                let (x, a) = stretch(&w);
                pts.push(x);
                wts.push(h * a);
            }
        }
        3 => {
            let (u, wu) = gauss_legendre(m);
            let mp = 2 * m;
            let h = 2.0 * PI / mp as f64;
            for (ui, wi) in u.iter().zip(&wu) {
                let rho = (1.0 - ui * ui).sqrt();
                for k in 0..mp {
                    let ph = h * k as f64;
                    let w = DVector::from_vec(vec![rho * ph.cos(), rho * ph.sin(), *ui]);
                    let (x, a) = stretch(&w);
                    pts.push(x);
                    wts.push(wi * h * a);
                }
            }
        }
        _ => unreachable!("closed-form spheres are limited to n ≤ 3"),
    }
    (pts, wts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::{make_ball, make_custom, make_ellipsoid, make_graph_region, make_halfspace, EllipsoidSpec};
    use crate::gauss_core::ScalarField;

    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

    #[test]
    fn sphere_mass_closed_form() {
        let s = GaussianSpace::standard(2).unwrap();
        let d = make_ball(&s, 1.0).unwrap();
        let (v, e) = surface_integral(&s, &d, &ScalarField::constant(2, 1.0), 0.0, 32).unwrap();
        assert!((v - (-0.5f64).exp()).abs() < 1e-12);
        assert!(e < 1e-12);
        let odd = ScalarField::coordinate(2, 0);
        assert!(surface_integral(&s, &d, &odd, 0.0, 32).unwrap().0.abs() < 1e-14);
    }

    #[test]
    fn sphere_three_dimensions_closed_form() {
        // ρ(∂B_r) for Q = I, n = 3: 4π r² e^{-r²/2} (2π)^{-3/2}
        let s = GaussianSpace::standard(3).unwrap();
        let d = make_ball(&s, 1.0).unwrap();
        let q = surface_quadrature(&s, &d, 0.0, 16).unwrap();
        let want = 4.0 * PI * (-0.5f64).exp() * (2.0 * PI).powf(-1.5);
        assert!((q.total() - want).abs() < 1e-12);
        assert!(q.points.iter().all(|p| (d.g().value(p)).abs() < 1e-12));
    }

    #[test]
    fn hyperplane_mass_matches_whitened_form() {
        for (lam, c) in [
            (vec![1.0, 1.0], vec![1.0, 0.0]),
            (vec![2.0, 0.5], vec![1.0, 1.0]),
            (vec![1.0, 0.6, 0.3], vec![0.2, -1.0, 0.5]),
        ] {
            let s = GaussianSpace::diagonal(lam).unwrap();
            let d = make_halfspace(&s, &c).unwrap();
            for xi in [0.0, 0.3] {
                let q = surface_quadrature(&s, &d, xi, 8).unwrap();
                let want = INV_SQRT_2PI * (-0.5 * xi * xi).exp();
                assert!((q.total() - want).abs() < 1e-13, "{} vs {want}", q.total());
                assert!(q.points.iter().all(|p| (d.g().value(p) - xi).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn one_dimensional_point_masses() {
        let s = GaussianSpace::standard(1).unwrap();
        let d = make_halfspace(&s, &[1.0]).unwrap();
        let q = surface_quadrature(&s, &d, 0.0, 4).unwrap();
        assert_eq!(q.points.len(), 1);
        assert!((q.total() - INV_SQRT_2PI).abs() < 1e-15);
        let b = make_ball(&s, 1.0).unwrap();
        let q = surface_quadrature(&s, &b, 0.0, 4).unwrap();
        assert!((q.total() - 2.0 * INV_SQRT_2PI * (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn flat_graph_matches_hyperplane() {
        let s = GaussianSpace::diagonal(vec![1.3, 0.4]).unwrap();
        let g = make_graph_region(&s, 0, ScalarField::constant(1, 0.2)).unwrap();
        let q = surface_quadrature(&s, &g, 0.0, 12).unwrap();
        let want = INV_SQRT_2PI * (-0.5f64 * 0.04).exp();
        assert!((q.total() - want).abs() < 1e-13);
    }

    #[test]
    fn ellipsoid_unit_alphas_match_ball() {
        let s = GaussianSpace::diagonal(vec![1.0, 0.5]).unwrap();
        let e = make_ellipsoid(&s, &EllipsoidSpec::new(vec![1.0, 1.0], 1.0).unwrap()).unwrap();
        let b = make_ball(&s, 1.0).unwrap();
        let f = ScalarField::coordinate_power(2, 1, 2);
        let (ve, _) = surface_integral(&s, &e, &f, 0.0, 32).unwrap();
        let (vb, _) = surface_integral(&s, &b, &f, 0.0, 32).unwrap();
        assert!((ve - vb).abs() < 1e-13);
    }

    #[test]
    fn marching_squares_matches_sphere() {
        let s = GaussianSpace::diagonal(vec![1.0, 0.5]).unwrap();
        let b = make_ball(&s, 1.0).unwrap();
        let custom = make_custom(&s, ScalarField::squared_distance(DVector::zeros(2), 1.0), 0.5).unwrap();
        let f = ScalarField::gaussian_bump(2, 0.25);
        let (want, _) = surface_integral(&s, &b, &f, 0.0, 32).unwrap();
        let (got, err) = surface_integral(&s, &custom, &f, 0.0, 64).unwrap();
        assert!((got - want).abs() < 1e-4, "{got} vs {want}");
        assert!((got - want).abs() <= 3.0 * err + 1e-9, "{got} vs {want} err {err}");
    }

    #[test]
    fn unsupported_without_parametrization() {
        let s = GaussianSpace::standard(3).unwrap();
        let custom = make_custom(&s, ScalarField::squared_distance(DVector::zeros(3), 1.0), 0.5).unwrap();
        assert!(matches!(
            surface_quadrature(&s, &custom, 0.0, 8),
            Err(Error::Unsupported(_))
        ));
    }
}
