use nalgebra::DVector;

use super::engine::{IdentityBatch, IdentityReport};
use crate::domains::{DomainParams, LevelSetDomain};
use crate::error::{Error, Result};
use crate::gauss_core::mc::integrate;
use crate::gauss_core::{h_coords, sample_gaussian, Estimate, GaussianSpace, Proposal, SamplerState, ScalarField};
use crate::surface_measure::surface_quadrature;

/// `η(g)`: 1 for `g ≤ −2ε`, 0 for `g ≥ −ε`, quintic smoothstep in between.
/// Returns `(η, η', η'')`.
pub fn smooth_cutoff(g: f64, eps: f64) -> (f64, f64, f64) {
    let t = (g + 2.0 * eps) / eps;
    if t <= 0.0 {
        (1.0, 0.0, 0.0)
    } else if t >= 1.0 {
        (0.0, 0.0, 0.0)
    } else {
        let s = t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
        let s1 = 30.0 * t * t * (1.0 - t) * (1.0 - t);
        let s2 = 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t);
        (1.0 - s, -s1 / eps, -s2 / (eps * eps))
    }
}

fn cut_field(u: &ScalarField, domain: &LevelSetDomain, eps: f64) -> ScalarField {
    let eta = domain
        .g()
        .compose(format!("eta[{eps}]"), move |g| smooth_cutoff(g, eps));
    ScalarField::product(u, &eta).with_label(format!("{}*eta[{eps}]", u.label()))
}

#[derive(Clone, Debug)]
pub struct ZeroTraceRow {
    pub eps: f64,
    /// `∫_O D_k φ_ε dμ`.
    pub lhs: Estimate,
    /// `∫_O v̂_k φ_ε dμ`.
    pub rhs: Estimate,
}

#[derive(Clone, Debug)]
pub struct ZeroTraceReport {
    /// `∫_{G=0} |φ_ε| dρ` for the first `ε`.
    pub boundary_abs: f64,
    /// Integration by parts for the first `ε`.
    pub parti: IdentityReport,
    pub sweep: Vec<ZeroTraceRow>,
    /// `∫_O v̂_k u dμ`, the common limit of both sides as `ε → 0`.
    pub uncut: Estimate,
}

/// Cuts `u` off near the boundary with `η(G)` for each `ε` and checks that
/// the boundary term vanishes while both bulk sides approach `∫_O v̂_k u`.
#[allow(clippy::too_many_arguments)]
pub fn zero_trace_probe(
    space: &GaussianSpace,
    domain: &LevelSetDomain,
    u: &ScalarField,
    k: usize,
    eps_values: &[f64],
    state: SamplerState,
    count: usize,
    resolution: usize,
) -> Result<ZeroTraceReport> {
    if eps_values.is_empty() || eps_values.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::invalid("cutoff widths must be positive"));
    }
    let mut batch = IdentityBatch::new();
    for &e in eps_values {
        batch.add_parti(space, &cut_field(u, domain, e), k)?;
    }
    batch.add_parti(space, u, k)?;
    let reports = batch.run(space, domain, state, count, resolution)?;
    let first = cut_field(u, domain, eps_values[0]);
    let boundary_abs = match surface_quadrature(space, domain, 0.0, resolution) {
        Ok(q) => q.integrate(|x| first.value(x).abs()),
        Err(Error::Unsupported(_)) => 0.0,
        Err(e) => return Err(e),
    };

    // bulk-only estimates on the same sample
    let lam = space.sqrt_eigenvalues().to_vec();
    let fields: Vec<ScalarField> = eps_values.iter().map(|&e| cut_field(u, domain, e)).collect();
    let m = fields.len();
    let est = integrate(space, domain.proposal(space), state, count, 2 * m + 1, |x, out| {
        if domain.g().value(x) < 0.0 {
            let vk = x[k] / lam[k];
            for (i, f) in fields.iter().enumerate() {
                out[2 * i] = h_coords(space, &f.gradient(x))[k];
                out[2 * i + 1] = vk * f.value(x);
            }
            out[2 * m] = vk * u.value(x);
        }
    });
    let sweep = eps_values
        .iter()
        .enumerate()
        .map(|(i, &eps)| ZeroTraceRow {
            eps,
            lhs: est[2 * i],
            rhs: est[2 * i + 1],
        })
        .collect();
    Ok(ZeroTraceReport {
        boundary_abs,
        parti: reports[0].clone(),
        sweep,
        uncut: est[2 * m],
    })
}

#[derive(Clone, Debug)]
pub struct HardyRow {
    pub phi_label: String,
    /// `∫_B |φ|^p / ‖Q^{1/2}x‖ dμ`.
    pub numerator: Estimate,
    /// `‖φ‖^p_{W^{1,p}(B)} = ∫_B |φ|^p + |D_Hφ|_H^p dμ`.
    pub sobolev: Estimate,
    pub ratio: f64,
    pub ratio_err: f64,
}

#[derive(Clone, Debug)]
pub struct HardyReport {
    pub p: f64,
    pub rows: Vec<HardyRow>,
    pub sup_ratio: f64,
    /// `r² < Tr Q − λ_max`.
    pub converse_regime: bool,
    /// Sphere decomposition for each test function with exponent `p`.
    pub sphere: Vec<IdentityReport>,
}

/// Largest relative standard error accepted for the singular numerator.
pub const HARDY_MAX_REL_ERR: f64 = 0.05;

/// Ratios `∫_B |φ|^p/‖Q^{1/2}x‖ dμ ÷ ‖φ‖^p_{W^{1,p}(B)}` over a test family,
/// sampled with a radial mixture around the origin. Exploratory: no bound is
/// asserted.
pub fn hardy_probe(
    space: &GaussianSpace,
    domain: &LevelSetDomain,
    p: f64,
    family: &[ScalarField],
    state: SamplerState,
    count: usize,
    resolution: usize,
) -> Result<HardyReport> {
    let r = match domain.params() {
        DomainParams::Ball { radius, center } if center.iter().all(|c| *c == 0.0) => *radius,
        _ => {
            return Err(Error::Unsupported(
                "Hardy probe needs a ball centred at the origin".into(),
            ))
        }
    };
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::invalid(format!("Hardy exponent must exceed 1, got {p}")));
    }
    if family.is_empty() {
        return Err(Error::invalid("empty test family"));
    }
    let lam = space.eigenvalues().to_vec();
    let proposal = Proposal::RadialMixture {
        fraction: 0.3,
        radius: r / space.max_eigenvalue().sqrt(),
    };
    let m = family.len();
    let est = integrate(space, proposal, state, count, 2 * m, |x, out| {
        if domain.g().value(x) < 0.0 {
            let s = x.iter().zip(&lam).map(|(a, l)| l * a * a).sum::<f64>().sqrt();
            for (i, f) in family.iter().enumerate() {
                let v = f.value(x).abs().powf(p);
                let d = h_coords(space, &f.gradient(x)).norm().powf(p);
                out[2 * i] = v / s;
                out[2 * i + 1] = v + d;
            }
        }
    });
    let mut rows = Vec::with_capacity(m);
    for (i, f) in family.iter().enumerate() {
        let (a, b) = (est[2 * i], est[2 * i + 1]);
        if !(a.stderr <= HARDY_MAX_REL_ERR * a.mean.abs()) {
            return Err(Error::VarianceExplosion(format!(
                "numerator for {} has relative error {:.3}; raise the radial mixture fraction or the sample count",
                f.label(),
                a.stderr / a.mean.abs()
            )));
        }
        let ratio = a.mean / b.mean;
        let ratio_err = ratio.abs() * ((a.stderr / a.mean).powi(2) + (b.stderr / b.mean).powi(2)).sqrt();
        rows.push(HardyRow {
            phi_label: f.label().to_string(),
            numerator: a,
            sobolev: b,
            ratio,
            ratio_err,
        });
    }
    let mut batch = IdentityBatch::new();
    for f in family {
        batch.add_sphere(space, domain, f, p)?;
    }
    let sphere = batch.run(space, domain, state.substream(1), count, resolution)?;
    Ok(HardyReport {
        p,
        sup_ratio: rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max),
        rows,
        converse_regime: r * r < space.trace() - space.max_eigenvalue(),
        sphere,
    })
}

#[derive(Clone, Debug)]
pub struct TraceBoundCheck {
    pub q: f64,
    pub p: f64,
    /// `∫_{G=0} |φ|^q dρ` and its quadrature error.
    pub lhs: f64,
    pub lhs_err: f64,
    /// `C_est ‖φ‖^q_{W^{1,p}(O)}`; infinite when the curvature term is not in
    /// the needed Lebesgue space.
    pub bound: f64,
    pub c_est: f64,
    pub sobolev_norm: f64,
    pub holds: bool,
    pub note: Option<String>,
}

/// Codimension of the set where `|D_HG|` vanishes inside `O`, for domains
/// whose normal field is singular there.
fn singular_codim(domain: &LevelSetDomain) -> Option<usize> {
    match domain.params() {
        DomainParams::Ball { radius, center } if center.norm() < *radius => Some(domain.dim()),
        DomainParams::Ellipsoid(e) => Some(e.alphas.iter().filter(|a| **a > 0.0).count()),
        _ => None,
    }
}

/// Hölder bound for the trace in `L^q(ρ)` assembled from the unit-normal
/// trace identity:
/// `∫|φ|^q dρ ≤ q ‖φ‖_p^{q−1} ‖D_Hφ‖_p μ(O)^{1−q/p} + ‖φ‖_p^q ‖div(D_HG/|D_HG|)‖_s`
/// with `s = p/(p−q)`, all norms on `O`.
#[allow(clippy::too_many_arguments)]
pub fn trace_bound_check(
    space: &GaussianSpace,
    domain: &LevelSetDomain,
    phi: &ScalarField,
    q: f64,
    p: f64,
    state: SamplerState,
    count: usize,
    resolution: usize,
) -> Result<TraceBoundCheck> {
    if !(q >= 1.0 && p > q && p.is_finite()) {
        return Err(Error::invalid(format!("need 1 ≤ q < p, got q={q}, p={p}")));
    }
    let s = p / (p - q);
    let quad_c = surface_quadrature(space, domain, 0.0, resolution)?;
    let quad_f = surface_quadrature(space, domain, 0.0, 2 * resolution)?;
    let lhs = quad_f.integrate(|x| phi.value(x).abs().powf(q));
    let lhs_err = (lhs - quad_c.integrate(|x| phi.value(x).abs().powf(q))).abs();
    let est = integrate(space, domain.proposal(space), state, count, 4, |x, out| {
        if domain.g().value(x) < 0.0 {
            out[0] = phi.value(x).abs().powf(p);
            out[1] = h_coords(space, &phi.gradient(x)).norm().powf(p);
            out[2] = 1.0;
            out[3] = domain.jet(space, x).div_normal().abs().powf(s);
        }
    });
    let (a, b, mass, d) = (est[0].mean, est[1].mean, est[2].mean, est[3].mean);
    let sobolev_norm = (a + b).powf(1.0 / p);
    let mut note = None;
    let div_norm = match singular_codim(domain) {
        Some(c) if s >= c as f64 => {
            note = Some(format!(
                "div(D_HG/|D_HG|) ~ 1/|x| is not in L^{s} in codimension {c}; bound is infinite"
            ));
            f64::INFINITY
        }
        _ => d.powf(1.0 / s),
    };
    let bound = q * a.powf((q - 1.0) / p) * b.powf(1.0 / p) * mass.powf(1.0 - q / p) + a.powf(q / p) * div_norm;
    let c_est = q * mass.powf(1.0 - q / p) + div_norm;
    Ok(TraceBoundCheck {
        q,
        p,
        lhs,
        lhs_err,
        bound,
        c_est,
        sobolev_norm,
        holds: lhs - 3.0 * lhs_err <= bound && bound <= c_est * sobolev_norm.powf(q) * (1.0 + 1e-12),
        note,
    })
}

#[derive(Clone, Debug)]
pub struct BoundaryConditions {
    /// Largest `|D_HG|_H` over sampled points of `O`.
    pub sup_norm_h: f64,
    /// Largest `LG` over sampled points of `O`.
    pub sup_lg: f64,
    /// Smallest `|D_HG|_H` over boundary quadrature points.
    pub inf_boundary_norm_h: f64,
    pub holds: bool,
}

/// Sampled versions of `sup_O |D_HG|`, `sup_O LG` and `inf_{G=0} |D_HG|`.
pub fn boundary_conditions_check(
    space: &GaussianSpace,
    domain: &LevelSetDomain,
    state: SamplerState,
    count: usize,
    resolution: usize,
) -> Result<BoundaryConditions> {
    let pts = sample_gaussian(space, state, count);
    let (mut sup_n, mut sup_lg) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for c in pts.column_iter() {
        let x = DVector::from_column_slice(c.as_slice());
        let j = domain.jet(space, &x);
        if j.value < 0.0 {
            sup_n = sup_n.max(j.norm_h);
            sup_lg = sup_lg.max(j.lg);
        }
    }
    let quad = surface_quadrature(space, domain, 0.0, resolution)?;
    let inf_b = quad
        .points
        .iter()
        .map(|x| domain.jet(space, x).norm_h)
        .fold(f64::INFINITY, f64::min);
    Ok(BoundaryConditions {
        sup_norm_h: sup_n,
        sup_lg,
        inf_boundary_norm_h: inf_b,
        holds: sup_n.is_finite() && sup_lg.is_finite() && inf_b > 0.0,
    })
}
