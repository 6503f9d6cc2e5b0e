//! Sampling inside domains and the mass and nondegeneracy probes.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{EllipsoidSpec, LevelSetDomain};
use crate::error::{Error, Result};
use crate::gauss_core::mc::{integrate, integrate_one};
use crate::gauss_core::rng::CHUNK_SIZE;
use crate::gauss_core::{Estimate, GaussianSpace, Proposal, SamplerState};

/// Maximum number of proposals drawn by [`sample_domain`].
pub const REJECTION_CAP: u64 = 1_000_000_000;
const MIN_ACCEPTANCE: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct DomainSample {
    pub points: Vec<DVector<f64>>,
    pub trials: u64,
    /// `accepted / trials`, an estimate of `μ(O)`.
    pub acceptance_rate: f64,
}

/// Draws `count` points of `μ` conditioned on `O` by rejection.
pub fn sample_domain(
    domain: &LevelSetDomain,
    space: &GaussianSpace,
    state: SamplerState,
    count: usize,
) -> Result<DomainSample> {
    let n = space.dim();
    let mut points = Vec::with_capacity(count);
    let mut trials: u64 = 0;
    let mut z = DVector::zeros(n);
    let mut chunk = 0u64;
    while points.len() < count {
        let mut rng = state.chunk_rng(chunk);
        chunk += 1;
        for _ in 0..CHUNK_SIZE {
            for k in 0..n {
                z[k] = rng.sample(StandardNormal);
            }
            trials += 1;
            let x = space.color(&z);
            if domain.contains(&x) {
                points.push(x);
                if points.len() == count {
                    break;
                }
            }
        }
        let accepted = points.len() as u64;
        let rate = accepted as f64 / trials as f64;
        let starving = trials >= 1_000_000 && rate < MIN_ACCEPTANCE;
        if points.len() < count && (starving || trials >= REJECTION_CAP) {
            return Err(Error::Starvation { accepted, trials, rate });
        }
    }
    let acceptance_rate = points.len() as f64 / trials as f64;
    Ok(DomainSample {
        points,
        trials,
        acceptance_rate,
    })
}

/// `μ(O)` by plain Monte Carlo.
pub fn estimate_mass(domain: &LevelSetDomain, space: &GaussianSpace, state: SamplerState, count: usize) -> Estimate {
    integrate_one(space, Proposal::Gaussian, state, count, |x| {
        if domain.contains(x) {
            1.0
        } else {
            0.0
        }
    })
}

/// Monte Carlo estimates of `μ(E_r)` and of `μ̃(B(0, r))`, where `μ̃` has
/// covariance `diag(λ_k α_k)`. The two use independent streams.
pub fn ellipsoid_mass_identity(
    space: &GaussianSpace,
    spec: &EllipsoidSpec,
    state: SamplerState,
    count: usize,
) -> Result<(Estimate, Estimate)> {
    let spec = EllipsoidSpec::new(spec.alphas.clone(), spec.radius)?;
    if spec.alphas.len() != space.dim() {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            got: spec.alphas.len(),
        });
    }
    if spec.alphas.contains(&0.0) {
        return Err(Error::invalid("every α_k must be positive for the change of variables"));
    }
    let r2 = spec.radius * spec.radius;
    let a = spec.alphas.clone();
    let lhs = integrate_one(space, Proposal::Gaussian, state.substream(1), count, |x| {
        let q: f64 = x.iter().zip(&a).map(|(v, a)| a * v * v).sum();
        if q < r2 {
            1.0
        } else {
            0.0
        }
    });
    let tilde = GaussianSpace::diagonal(
        space
            .eigenvalues()
            .iter()
            .zip(&spec.alphas)
            .map(|(l, a)| l * a)
            .collect(),
    )?;
    let rhs = integrate_one(&tilde, Proposal::Gaussian, state.substream(2), count, |y| {
        if y.norm_squared() < r2 {
            1.0
        } else {
            0.0
        }
    });
    Ok((lhs, rhs))
}

#[derive(Clone, Debug)]
pub struct NondegeneracyReport {
    /// Fraction of samples in `O`.
    pub hit_rate: f64,
    /// Fraction of samples in the band `{|G| < δ}`.
    pub band_rate: f64,
    /// Smallest `|D_H G|_H` seen in the band.
    pub min_norm: f64,
    /// `∫_{band} |D_H G|^{-2} dμ` over the full sample.
    pub inv_norm2: Estimate,
    /// `∫_{band} |D_H G|^{-4} dμ` over the full sample.
    pub inv_norm4: Estimate,
    /// Same as `inv_norm4` on the first half of the sample.
    pub inv_norm4_half: Estimate,
}

impl NondegeneracyReport {
    /// Ratio of the full-sample to half-sample estimate of the fourth inverse
    /// moment.
    pub fn doubling_ratio(&self) -> f64 {
        self.inv_norm4.mean / self.inv_norm4_half.mean
    }

    pub fn holds(&self) -> bool {
        let r = self.doubling_ratio();
        self.hit_rate > 0.0 && self.min_norm > f64::MIN_POSITIVE && (0.5..=2.0).contains(&r)
    }
}

/// Checks that `O` has positive mass and that `1/|D_H G|` has stable moments on
/// the band `{|G| < δ}`.
pub fn nondegeneracy_probe(
    domain: &LevelSetDomain,
    space: &GaussianSpace,
    state: SamplerState,
    count: usize,
) -> NondegeneracyReport {
    let delta = domain.band_delta();
    let eval = |x: &DVector<f64>, o: &mut [f64]| {
        let j = domain.jet(space, x);
        if j.value < 0.0 {
            o[0] = 1.0;
        }
        if j.value.abs() < delta {
            o[1] = 1.0;
            o[2] = j.norm_h.powi(-2);
            o[3] = j.norm_h.powi(-4);
            o[4] = -j.norm_h;
        } else {
            o[4] = f64::NEG_INFINITY;
        }
    };
    let full = integrate(space, Proposal::Gaussian, state, count, 4, |x, o| {
        let mut b = [0.0; 5];
        eval(x, &mut b);
        o.copy_from_slice(&b[..4]);
    });
    let half = integrate(space, Proposal::Gaussian, state, count / 2, 4, |x, o| {
        let mut b = [0.0; 5];
        eval(x, &mut b);
        o.copy_from_slice(&b[..4]);
    });
    // minimum over a smaller deterministic sample of the band
    let mut rng = state.substream(9).rng();
    let mut min_norm = f64::INFINITY;
    let mut z = DVector::zeros(space.dim());
    for _ in 0..count.min(200_000) {
        for k in 0..space.dim() {
            z[k] = rng.sample(StandardNormal);
        }
        let x = space.color(&z);
        let j = domain.jet(space, &x);
        if j.value.abs() < delta {
            min_norm = min_norm.min(j.norm_h);
        }
    }
    NondegeneracyReport {
        hit_rate: full[0].mean,
        band_rate: full[1].mean,
        min_norm,
        inv_norm2: full[2],
        inv_norm4: full[3],
        inv_norm4_half: half[3],
    }
}
