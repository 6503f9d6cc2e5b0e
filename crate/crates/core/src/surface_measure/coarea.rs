//! Pushforward densities `q_φ` of `φμ ∘ G^{-1}` by Gaussian kernel estimates.
//!
//! By the coarea formula `q_φ(ξ) = ∫_{G=ξ} φ / |D_H G|_H dρ`, so these curves
//! give a second, sampling-based route to surface integrals.

use std::f64::consts::PI;

use nalgebra::DVector;
use rayon::prelude::*;

use super::quadrature::surface_integral_fn;
use crate::domains::LevelSetDomain;
use crate::error::{Error, Result};
use crate::gauss_core::mc::{draw, integrate_one};
use crate::gauss_core::rng::CHUNK_SIZE;
use crate::gauss_core::{h_gradient, Estimate, GaussianSpace, Proposal, SamplerState, ScalarField};

/// Smallest sample size accepted by the kernel estimators.
pub const MIN_KDE_SAMPLES: usize = 10_000;
/// Kernel contributions beyond this many bandwidths are dropped.
const KERNEL_CUTOFF: f64 = 9.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bandwidth {
    /// `1.06 σ̂ N^{-1/5}` with `σ̂` the sample deviation of `G`.
    Silverman,
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KdeOptions {
    pub bandwidth: Bandwidth,
    /// Number of grid points strictly inside `(−δ, δ)`.
    pub grid_points: usize,
}

impl Default for KdeOptions {
    fn default() -> Self {
        KdeOptions {
            bandwidth: Bandwidth::Silverman,
            grid_points: 41,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DensityCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub phi_label: String,
    pub bandwidth: f64,
}

impl DensityCurve {
    /// Trapezoid rule for `∫ |q|` over the grid.
    pub fn l1_norm(&self) -> f64 {
        trapezoid(&self.grid, &self.values.iter().map(|v| v.abs()).collect::<Vec<_>>())
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        super::write_curve_csv(path, &self.grid, &self.values, &self.stderr)
    }
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(a, b)| 0.5 * (a[1] - a[0]) * (b[0] + b[1]))
        .sum()
}

/// Values of `G` and of a few functions at `N` draws of `μ`, sorted by `G`.
#[derive(Clone, Debug)]
pub struct PushforwardSample {
    pub g: Vec<f64>,
    pub columns: Vec<Vec<f64>>,
    pub count: usize,
    pub g_sd: f64,
}

type SampleFn<'a> = &'a (dyn Fn(&DVector<f64>, f64) -> f64 + Sync);

/// Draws `count` points of `μ` and records `G` and `f_i(x, G(x))` for each
/// column function.
pub fn pushforward_sample(
    space: &GaussianSpace,
    domain: &LevelSetDomain,
    columns: &[SampleFn<'_>],
    state: SamplerState,
    count: usize,
) -> PushforwardSample {
    let n = space.dim();
    let k = columns.len();
    let chunks = count.div_ceil(CHUNK_SIZE);
    let parts: Vec<(Vec<f64>, Vec<f64>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK_SIZE.min(count - c * CHUNK_SIZE);
            let mut rng = state.chunk_rng(c as u64);
            let mut z = DVector::zeros(n);
            let mut g = Vec::with_capacity(len);
            let mut v = Vec::with_capacity(len * k);
            for _ in 0..len {
                draw(&mut rng, n, &Proposal::Gaussian, &mut z);
                let x = space.color(&z);
                let gx = domain.g().value(&x);
                g.push(gx);
                for f in columns {
                    v.push(f(&x, gx));
                }
            }
            (g, v)
        })
        .collect();
    let mut g = Vec::with_capacity(count);
    let mut flat = Vec::with_capacity(count * k);
    for (a, b) in parts {
        g.extend(a);
        flat.extend(b);
    }
    let mut order: Vec<usize> = (0..count).collect();
    order.sort_by(|&a, &b| g[a].total_cmp(&g[b]).then(a.cmp(&b)));
    let mean = g.iter().sum::<f64>() / count as f64;
    let var = g.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count as f64 - 1.0).max(1.0);
    let sorted_g = order.iter().map(|&i| g[i]).collect();
    let cols = (0..k)
        .map(|c| order.iter().map(|&i| flat[i * k + c]).collect())
        .collect();
    PushforwardSample {
        g: sorted_g,
        columns: cols,
        count,
        g_sd: var.sqrt(),
    }
}

#[inline]
fn kernel(u: f64, h: f64) -> f64 {
    (-0.5 * (u / h).powi(2)).exp() / (h * (2.0 * PI).sqrt())
}

impl PushforwardSample {
    pub fn bandwidth(&self, b: Bandwidth) -> Result<f64> {
        match b {
            Bandwidth::Silverman => Ok(1.06 * self.g_sd * (self.count as f64).powf(-0.2)),
            Bandwidth::Fixed(h) if h > 0.0 && h.is_finite() => Ok(h),
            Bandwidth::Fixed(h) => Err(Error::invalid(format!("bandwidth must be positive, got {h}"))),
        }
    }

    fn window(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let a = self.g.partition_point(|v| *v < lo);
        let b = self.g.partition_point(|v| *v <= hi);
        a..b
    }

    /// Mean and standard error of `Σ_j c_j · col_j(x) · K_h(ξ_j − G(x))`,
    /// for terms `(column, ξ_j, c_j)`.
    pub fn functional(&self, terms: &[(usize, f64, f64)], h: f64) -> Estimate {
        let lo = terms.iter().map(|t| t.1).fold(f64::INFINITY, f64::min) - KERNEL_CUTOFF * h;
        let hi = terms.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max) + KERNEL_CUTOFF * h;
        let (mut s1, mut s2) = (0.0, 0.0);
        for i in self.window(lo, hi) {
            let gi = self.g[i];
            let mut y = 0.0;
            for &(col, xi, c) in terms {
                let v = self.columns[col][i];
                if v != 0.0 {
                    y += c * v * kernel(xi - gi, h);
                }
            }
            s1 += y;
            s2 += y * y;
        }
        finish(s1, s2, self.count)
    }

    /// `q` on a grid for column `col`, accumulating the positive and negative
    /// parts of the column separately and differencing them.
    pub fn curve(&self, col: usize, grid: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
        let mut values = Vec::with_capacity(grid.len());
        let mut errs = Vec::with_capacity(grid.len());
        for &xi in grid {
            let (mut plus, mut minus, mut s2) = (0.0, 0.0, 0.0);
            for i in self.window(xi - KERNEL_CUTOFF * h, xi + KERNEL_CUTOFF * h) {
                let v = self.columns[col][i];
                let k = kernel(xi - self.g[i], h);
                if v >= 0.0 {
                    plus += v * k;
                } else {
                    minus += -v * k;
                }
                s2 += (v * k).powi(2);
            }
            let e = finish(plus - minus, s2, self.count);
            values.push(e.mean);
            errs.push(e.stderr);
        }
        (values, errs)
    }
}

fn finish(s1: f64, s2: f64, n: usize) -> Estimate {
    let nf = n as f64;
    let mean = s1 / nf;
    let var = ((s2 / nf - mean * mean) * nf / (nf - 1.0)).max(0.0);
    Estimate {
        mean,
        stderr: (var / nf).sqrt(),
        count: n as u64,
    }
}

fn band_grid(delta: f64, m: usize) -> Vec<f64> {
    (1..=m)
        .map(|i| -delta + 2.0 * delta * i as f64 / (m + 1) as f64)
        .collect()
}

fn check_kde_inputs(count: usize, options: &KdeOptions) -> Result<()> {
    if count < MIN_KDE_SAMPLES {
        return Err(Error::invalid(format!(
            "kernel estimates need at least {MIN_KDE_SAMPLES} samples, got {count}"
        )));
    }
    if let Bandwidth::Fixed(h) = options.bandwidth {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::invalid(format!("bandwidth must be positive, got {h}")));
        }
    }
    if options.grid_points < 3 {
        return Err(Error::invalid("density grid needs at least 3 points"));
    }
    Ok(())
}

/// Kernel estimate of `q_φ` on a grid strictly inside `(−δ, δ)`.
pub fn qphi_estimate(
    space: &GaussianSpace,
    domain: &LevelSetDomain,
    phi: &ScalarField,
    state: SamplerState,
    count: usize,
    options: &KdeOptions,
) -> Result<DensityCurve> {
    check_kde_inputs(count, options)?;
    let f = |x: &DVector<f64>, _g: f64| phi.value(x);
    let sample = pushforward_sample(space, domain, &[&f], state, count);
    let h = sample.bandwidth(options.bandwidth)?;
    let grid = band_grid(domain.band_delta(), options.grid_points);
    let (values, stderr) = sample.curve(0, &grid, h);
    Ok(DensityCurve {
        grid,
        values,
        stderr,
        phi_label: phi.label().to_string(),
        bandwidth: h,
    })
}

/// `φ₁ = (LG/|D_HG|² − 2⟨D²_HG D_HG, D_HG⟩/|D_HG|⁴) φ + ⟨D_HG, D_Hφ⟩/|D_HG|²`,
/// the function whose pushforward density is `q_φ'`.
pub fn phi1_value(space: &GaussianSpace, domain: &LevelSetDomain, phi: &ScalarField, x: &DVector<f64>) -> Result<f64> {
    let j = domain.jet(space, x);
    if !(j.norm_h >= 1e-12) {
        return Err(Error::Degenerate(format!(
            "|D_H G| = {:e} below 1e-12 at {:?}",
            j.norm_h,
            x.as_slice()
        )));
    }
    let n2 = j.norm_h * j.norm_h;
    let dphi = h_gradient(space, phi, x)?;
    Ok((j.lg / n2 - 2.0 * j.hess_term / (n2 * n2)) * phi.value(x) + j.d_h.dot(&dphi) / n2)
}

/// [`phi1_value`] as a field. Its derivatives are finite differences, and its
/// value is NaN where `|D_H G| < 1e-12`.
pub fn phi1_field(space: &GaussianSpace, domain: &LevelSetDomain, phi: &ScalarField) -> ScalarField {
    let (s, d, p) = (space.clone(), domain.clone(), phi.clone());
    ScalarField::from_value(format!("phi1[{}]", phi.label()), space.dim(), move |x| {
        phi1_value(&s, &d, &p, x).unwrap_or(f64::NAN)
    })
}

#[derive(Clone, Debug)]
pub struct DerivativeCheck {
    /// Interior grid points where both sides are compared.
    pub grid: Vec<f64>,
    /// Central differences of the `q_φ` estimate.
    pub fd: Vec<Estimate>,
    /// Estimates of `q_{φ₁}`.
    pub q_phi1: Vec<Estimate>,
    /// Estimates of `fd − q_{φ₁}` with their paired standard errors.
    pub paired_diff: Vec<Estimate>,
    /// `max |fd − q_{φ₁}| / sqrt(se_fd² + se_q²)`.
    pub max_ratio: f64,
    /// Trapezoid integral of `q_{φ₁}` minus the endpoint difference of `q_φ`.
    pub ftc_residual: Estimate,
    pub curve: DensityCurve,
    pub bandwidth: f64,
}

impl DerivativeCheck {
    pub fn passes(&self, k: f64) -> bool {
        self.max_ratio <= k && self.ftc_residual.agrees_with(0.0, 3.0)
    }
}

/// Compares finite differences of `q_φ` with `q_{φ₁}`, both estimated with the
/// same kernel and bandwidth from one sample.
pub fn qphi_derivative_check(
    space: &GaussianSpace,
    domain: &LevelSetDomain,
    phi: &ScalarField,
    state: SamplerState,
    count: usize,
    options: &KdeOptions,
) -> Result<DerivativeCheck> {
    check_kde_inputs(count, options)?;
    let delta = domain.band_delta();
    let reach = 2.0 * delta;
    let f0 = |x: &DVector<f64>, _g: f64| phi.value(x);
    let f1 = |x: &DVector<f64>, g: f64| {
        if g.abs() < reach {
            phi1_value(space, domain, phi, x).unwrap_or(f64::NAN)
        } else {
            0.0
        }
    };
    let sample = pushforward_sample(space, domain, &[&f0, &f1], state, count);
    if sample.columns[1].iter().any(|v| v.is_nan()) {
        return Err(Error::Degenerate("|D_H G| vanishes near the level band".into()));
    }
    let h = match options.bandwidth {
        Bandwidth::Silverman => sample.bandwidth(Bandwidth::Silverman)?.min(delta / KERNEL_CUTOFF),
        b => sample.bandwidth(b)?,
    };
    if KERNEL_CUTOFF * h > delta {
        return Err(Error::invalid("bandwidth too large for the level band"));
    }
    let grid = band_grid(delta, options.grid_points);
    let (values, stderr) = sample.curve(0, &grid, h);
    let dx = grid[1] - grid[0];
    let m = grid.len();
    let mut fd = Vec::new();
    let mut q1 = Vec::new();
    let mut paired = Vec::new();
    let mut max_ratio: f64 = 0.0;
    for i in 1..m - 1 {
        let c = 1.0 / (2.0 * dx);
        let a = sample.functional(&[(0, grid[i + 1], c), (0, grid[i - 1], -c)], h);
        let b = sample.functional(&[(1, grid[i], 1.0)], h);
        let d = sample.functional(&[(0, grid[i + 1], c), (0, grid[i - 1], -c), (1, grid[i], -1.0)], h);
        let comb = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
        max_ratio = max_ratio.max((a.mean - b.mean).abs() / comb);
        fd.push(a);
        q1.push(b);
        paired.push(d);
    }
    let mut terms: Vec<(usize, f64, f64)> = Vec::new();
    for i in 0..m {
        let w = if i == 0 || i == m - 1 { dx / 2.0 } else { dx };
        terms.push((1, grid[i], w));
    }
    terms.push((0, grid[m - 1], -1.0));
    terms.push((0, grid[0], 1.0));
    let ftc = sample.functional(&terms, h);
    Ok(DerivativeCheck {
        grid: grid[1..m - 1].to_vec(),
        fd,
        q_phi1: q1,
        paired_diff: paired,
        max_ratio,
        ftc_residual: ftc,
        curve: DensityCurve {
            grid,
            values,
            stderr,
            phi_label: phi.label().to_string(),
            bandwidth: h,
        },
        bandwidth: h,
    })
}

#[derive(Clone, Debug)]
pub struct L1BoundCheck {
    /// Trapezoid integral of `|q_φ|` over the grid.
    pub l1: f64,
    /// `∫_{|G|<δ} |φ| dμ`.
    pub bound: Estimate,
    pub holds: bool,
}

/// `∫_{−δ}^{δ} |q_φ| ≤ ∫_{|G|<δ} |φ| dμ`, up to three standard errors.
pub fn maggl1_check(
    space: &GaussianSpace,
    domain: &LevelSetDomain,
    phi: &ScalarField,
    state: SamplerState,
    count: usize,
    options: &KdeOptions,
) -> Result<L1BoundCheck> {
    let curve = qphi_estimate(space, domain, phi, state, count, options)?;
    let delta = domain.band_delta();
    let bound = integrate_one(space, Proposal::Gaussian, state.substream(1), count, |x| {
        if domain.g().value(x).abs() < delta {
            phi.value(x).abs()
        } else {
            0.0
        }
    });
    let l1 = curve.l1_norm();
    Ok(L1BoundCheck {
        l1,
        bound,
        holds: l1 <= bound.mean + 3.0 * bound.stderr,
    })
}

/// `ρ(G^{-1}(0)) = ∫_O div(D_HG/|D_HG|) dμ`.
pub fn rho_total_via_identity(
    space: &GaussianSpace,
    domain: &LevelSetDomain,
    state: SamplerState,
    count: usize,
) -> Result<Estimate> {
    let e = integrate_one(space, domain.proposal(space), state, count, |x| {
        let j = domain.jet(space, x);
        if j.value < 0.0 {
            j.div_normal()
        } else {
            0.0
        }
    });
    if !e.mean.is_finite() {
        return Err(Error::Degenerate("div(D_HG/|D_HG|) is not finite on the sample".into()));
    }
    Ok(e)
}

/// `∫_{G=0} f dρ` as `q_ψ(0)` with `ψ = f |D_H G|`. The reported error
/// combines the sampling error with the bandwidth bias estimated from a
/// half-bandwidth rerun.
pub fn coarea_surface_integral(
    space: &GaussianSpace,
    domain: &LevelSetDomain,
    f: &(dyn Fn(&DVector<f64>) -> f64 + Sync),
    state: SamplerState,
    count: usize,
) -> Result<Estimate> {
    if count < MIN_KDE_SAMPLES {
        return Err(Error::invalid("coarea route needs at least 10^4 samples"));
    }
    let psi = |x: &DVector<f64>, g: f64| {
        if g.abs() < domain.band_delta() {
            f(x) * domain.jet(space, x).norm_h
        } else {
            0.0
        }
    };
    let sample = pushforward_sample(space, domain, &[&psi], state, count);
    let h = sample
        .bandwidth(Bandwidth::Silverman)?
        .min(domain.band_delta() / KERNEL_CUTOFF);
    let a = sample.functional(&[(0, 0.0, 1.0)], h);
    let b = sample.functional(&[(0, 0.0, 1.0)], h / 2.0);
    let bias = (a.mean - b.mean).abs() * 4.0 / 3.0;
    Ok(Estimate {
        mean: a.mean,
        stderr: (a.stderr.powi(2) + bias * bias).sqrt(),
        count: a.count,
    })
}

/// Both routes for `q_φ(0)`: quadrature of `φ/|D_H G|` on the surface and the
/// kernel estimate.
pub fn route_pair(
    space: &GaussianSpace,
    domain: &LevelSetDomain,
    phi: &ScalarField,
    state: SamplerState,
    count: usize,
    resolution: usize,
) -> Result<((f64, f64), Estimate)> {
    let quad = surface_integral_fn(space, domain, 0.0, resolution, &|x| {
        phi.value(x) / domain.jet(space, x).norm_h
    })?;
    let kde = coarea_surface_integral(
        space,
        domain,
        &|x| phi.value(x) / domain.jet(space, x).norm_h,
        state,
        count,
    )?;
    Ok((quad, kde))
}
