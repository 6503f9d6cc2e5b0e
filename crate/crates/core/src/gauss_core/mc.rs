//! Chunked Monte Carlo integration against `μ`, optionally with a radial
//! importance-sampling component for integrands singular at the origin.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::rng::{SamplerState, CHUNK_SIZE};
use super::space::GaussianSpace;

/// A Monte Carlo mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub count: u64,
}

impl Estimate {
    pub fn exact(v: f64) -> Self {
        Estimate {
            mean: v,
            stderr: 0.0,
            count: 0,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Estimate {
            mean: self.mean * c,
            stderr: self.stderr * c.abs(),
            count: self.count,
        }
    }

    /// True when `|self − target| ≤ k · stderr`.
    pub fn agrees_with(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr
    }
}

/// Sampling distribution in whitened coordinates `z = Q^{-1/2}x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Proposal {
    /// `z ~ N(0, I)`.
    Gaussian,
    /// `(1 − fraction) N(0, I) + fraction · q`, with `q` uniform in the radius
    /// `|z| ∈ [0, radius]` and uniform in direction. Its density behaves like
    /// `|z|^{1−n}` near the origin, which bounds the weighted integrand of
    /// `1/|z|`-type singularities.
    RadialMixture { fraction: f64, radius: f64 },
}

#[derive(Clone)]
struct Moments {
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    fn new(k: usize) -> Self {
        Moments {
            n: 0.0,
            mean: vec![0.0; k],
            m2: vec![0.0; k],
        }
    }

    fn push(&mut self, v: &[f64]) {
        self.n += 1.0;
        for i in 0..v.len() {
            let d = v[i] - self.mean[i];
            self.mean[i] += d / self.n;
            self.m2[i] += d * (v[i] - self.mean[i]);
        }
    }

    fn merge(&mut self, o: &Moments) {
        if o.n == 0.0 {
            return;
        }
        let n = self.n + o.n;
        for i in 0..self.mean.len() {
            let d = o.mean[i] - self.mean[i];
            self.mean[i] += d * o.n / n;
            self.m2[i] += o.m2[i] + d * d * self.n * o.n / n;
        }
        self.n = n;
    }
}

/// Surface area of the unit sphere in `R^n` (`2` for `n = 1`).
pub fn unit_sphere_area(n: usize) -> f64 {
    // 2 π^{n/2} / Γ(n/2)
    let mut gamma_half = if n.is_multiple_of(2) {
        1.0
    } else {
        std::f64::consts::PI.sqrt()
    };
    let mut a = if n.is_multiple_of(2) { 1.0 } else { 0.5 };
    while a < n as f64 / 2.0 - 1e-9 {
        gamma_half *= a;
        a += 1.0;
    }
    2.0 * std::f64::consts::PI.powf(n as f64 / 2.0) / gamma_half
}

/// Draws one whitened point from `proposal` and returns it with its weight
/// `dμ/dq`.
pub(crate) fn draw(rng: &mut impl Rng, n: usize, proposal: &Proposal, z: &mut DVector<f64>) -> f64 {
    match *proposal {
        Proposal::Gaussian => {
            for k in 0..n {
                z[k] = rng.sample(StandardNormal);
            }
            1.0
        }
        Proposal::RadialMixture { fraction, radius } => {
            let u: f64 = rng.random();
            for k in 0..n {
                z[k] = rng.sample(StandardNormal);
            }
            if u < fraction {
                let s = radius * rng.random::<f64>();
                let norm = z.norm();
                *z *= s / norm;
            }
            let r = z.norm();
            if r >= radius {
                return 1.0 / (1.0 - fraction);
            }
            let log_phi = -0.5 * r * r - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
            let q = 1.0 / (radius * unit_sphere_area(n) * r.powi(n as i32 - 1));
            let ratio = q / log_phi.exp();
            1.0 / ((1.0 - fraction) + fraction * ratio)
        }
    }
}

/// Estimates `∫ f_i dμ` for `i < outputs` from `count` draws.
///
/// `f` receives the point in eigen coordinates and a zeroed output buffer.
/// Chunks are evaluated in parallel and reduced in chunk order, so the result
/// depends only on `(state, count, proposal)`.
pub fn integrate<F>(
    space: &GaussianSpace,
    proposal: Proposal,
    state: SamplerState,
    count: usize,
    outputs: usize,
    f: F,
) -> Vec<Estimate>
where
    F: Fn(&DVector<f64>, &mut [f64]) + Sync,
{
    let n = space.dim();
    let chunks = count.div_ceil(CHUNK_SIZE);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK_SIZE.min(count - c * CHUNK_SIZE);
            let mut rng = state.chunk_rng(c as u64);
            let mut m = Moments::new(outputs);
            let mut z = DVector::zeros(n);
            let mut buf = vec![0.0; outputs];
            for _ in 0..len {
                let w = draw(&mut rng, n, &proposal, &mut z);
                let x = space.color(&z);
                buf.iter_mut().for_each(|b| *b = 0.0);
                f(&x, &mut buf);
                if w != 1.0 {
                    buf.iter_mut().for_each(|b| *b *= w);
                }
                m.push(&buf);
            }
            m
        })
        .collect();
    let mut total = Moments::new(outputs);
    for p in &parts {
        total.merge(p);
    }
    let nf = total.n;
    (0..outputs)
        .map(|i| Estimate {
            mean: total.mean[i],
            stderr: if nf > 1.0 {
                (total.m2[i] / (nf - 1.0) / nf).sqrt()
            } else {
                f64::INFINITY
            },
            count: nf as u64,
        })
        .collect()
}

/// Single-output convenience wrapper around [`integrate`].
pub fn integrate_one<F>(space: &GaussianSpace, proposal: Proposal, state: SamplerState, count: usize, f: F) -> Estimate
where
    F: Fn(&DVector<f64>) -> f64 + Sync,
{
    integrate(space, proposal, state, count, 1, |x, out| out[0] = f(x))[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_areas() {
        assert!((unit_sphere_area(1) - 2.0).abs() < 1e-15);
        assert!((unit_sphere_area(2) - 2.0 * std::f64::consts::PI).abs() < 1e-14);
        assert!((unit_sphere_area(3) - 4.0 * std::f64::consts::PI).abs() < 1e-13);
        assert!((unit_sphere_area(4) - 2.0 * std::f64::consts::PI.powi(2)).abs() < 1e-13);
    }

    #[test]
    fn gaussian_moments() {
        let s = GaussianSpace::diagonal(vec![4.0, 1.0]).unwrap();
        let e = integrate(&s, Proposal::Gaussian, SamplerState::new(42, 0), 200_000, 3, |x, o| {
            o[0] = x[0] * x[0];
            o[1] = x[1] * x[1];
            o[2] = x[0] * x[1];
        });
        assert!(e[0].agrees_with(4.0, 4.0));
        assert!(e[1].agrees_with(1.0, 4.0));
        assert!(e[2].agrees_with(0.0, 4.0));
    }

    #[test]
    fn mixture_is_unbiased_for_singular_integrand() {
        // E[1/|z|] in two dimensions is sqrt(pi/2).
        let s = GaussianSpace::standard(2).unwrap();
        let p = Proposal::RadialMixture {
            fraction: 0.3,
            radius: 1.0,
        };
        let e = integrate_one(&s, p, SamplerState::new(5, 1), 200_000, |x| 1.0 / x.norm());
        assert!(e.agrees_with((std::f64::consts::PI / 2.0).sqrt(), 4.0), "{e:?}");
        let m = integrate_one(&s, p, SamplerState::new(5, 2), 200_000, |_| 1.0);
        assert!(m.agrees_with(1.0, 4.0));
    }

    #[test]
    fn reduction_is_deterministic() {
        let s = GaussianSpace::standard(3).unwrap();
        let a = integrate_one(&s, Proposal::Gaussian, SamplerState::new(1, 1), 50_000, |x| x[0].exp());
        let b = integrate_one(&s, Proposal::Gaussian, SamplerState::new(1, 1), 50_000, |x| x[0].exp());
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    }
}
