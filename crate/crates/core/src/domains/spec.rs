//! Serializable domain descriptions and the truncated Dirichlet–Laplacian
//! spectra.

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{make_ball_centered, make_ellipsoid, make_graph_region, make_halfspace, EllipsoidSpec, LevelSetDomain};
use crate::error::{Error, Result};
use crate::gauss_core::{GaussianSpace, ScalarField};

/// Graph functions `F` on `Y` that can be written in a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum GraphSpec {
    Constant {
        value: f64,
    },
    /// `F(y) = offset + ⟨coeffs, y⟩`.
    Linear {
        offset: f64,
        coeffs: Vec<f64>,
    },
    /// `F(y) = offset + amplitude · sin(frequency · y_axis)`.
    Sine {
        offset: f64,
        amplitude: f64,
        frequency: f64,
        axis: usize,
    },
}

impl GraphSpec {
    pub fn build(&self, ydim: usize) -> Result<ScalarField> {
        match self {
            GraphSpec::Constant { value } => Ok(ScalarField::constant(ydim, *value)),
            GraphSpec::Linear { offset, coeffs } => {
                if coeffs.len() != ydim {
                    return Err(Error::config("domain.graph.coeffs", format!("expected {ydim} entries")));
                }
                Ok(ScalarField::affine(DVector::from_vec(coeffs.clone()), *offset))
            }
            GraphSpec::Sine {
                offset,
                amplitude,
                frequency,
                axis,
            } => {
                if *axis >= ydim {
                    return Err(Error::config("domain.graph.axis", format!("must be below {ydim}")));
                }
                let (o, a, w) = (*offset, *amplitude, *frequency);
                Ok(
                    ScalarField::coordinate(ydim, *axis).compose(format!("{o}+{a}sin({w}y)"), move |u| {
                        let (s, c) = (w * u).sin_cos();
                        (o + a * s, a * w * c, -a * w * w * s)
                    }),
                )
            }
        }
    }
}

/// A domain description independent of any built field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    Halfspace {
        hhat: Vec<f64>,
        #[serde(default)]
        band_delta: Option<f64>,
    },
    Ball {
        radius: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
        #[serde(default)]
        band_delta: Option<f64>,
    },
    Ellipsoid {
        alphas: Vec<f64>,
        radius: f64,
        #[serde(default)]
        band_delta: Option<f64>,
    },
    GraphRegion {
        h_index: usize,
        graph: GraphSpec,
        #[serde(default)]
        band_delta: Option<f64>,
    },
}

impl DomainSpec {
    pub fn build(&self, space: &GaussianSpace) -> Result<LevelSetDomain> {
        let n = space.dim();
        let (dom, delta) = match self {
            DomainSpec::Halfspace { hhat, band_delta } => (make_halfspace(space, hhat)?, band_delta),
            DomainSpec::Ball {
                radius,
                center,
                band_delta,
            } => {
                let c = match center {
                    Some(c) => {
                        if c.len() != n {
                            return Err(Error::config("domain.center", format!("expected {n} entries")));
                        }
                        DVector::from_vec(c.clone())
                    }
                    None => DVector::zeros(n),
                };
                (make_ball_centered(space, *radius, c)?, band_delta)
            }
            DomainSpec::Ellipsoid {
                alphas,
                radius,
                band_delta,
            } => (
                make_ellipsoid(space, &EllipsoidSpec::new(alphas.clone(), *radius)?)?,
                band_delta,
            ),
            DomainSpec::GraphRegion {
                h_index,
                graph,
                band_delta,
            } => {
                if n < 2 {
                    return Err(Error::config("domain.kind", "graph regions need dimension at least 2"));
                }
                (make_graph_region(space, *h_index, graph.build(n - 1)?)?, band_delta)
            }
        };
        match delta {
            Some(d) => dom.with_band_delta(*d),
            None => Ok(dom),
        }
    }
}

/// Which spectrum of the Dirichlet Laplacian on `(0, 1)` defines `Q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirichletCase {
    /// `λ_k = 1 / (2π²k²)`.
    Laplacian,
    /// `λ_k = 1 / (2π⁴k⁴)`.
    Bilaplacian,
}

/// Covariance spectrum truncated to the first `n` modes.
pub fn dirichlet_space(case: DirichletCase, n: usize) -> Result<GaussianSpace> {
    let l = (1..=n)
        .map(|k| {
            let k = k as f64;
            match case {
                DirichletCase::Laplacian => 1.0 / (2.0 * PI * PI * k * k),
                DirichletCase::Bilaplacian => 1.0 / (2.0 * PI.powi(4) * k.powi(4)),
            }
        })
        .collect();
    GaussianSpace::diagonal(l)
}

/// `α_k = (πk)^{4β}`.
pub fn dirichlet_alphas(beta: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|k| (PI * k as f64).powf(4.0 * beta)).collect()
}

/// `Σ λ_k α_k`, finite exactly when the truncations stay bounded.
pub fn ns_sum(space: &GaussianSpace, spec: &EllipsoidSpec) -> f64 {
    space.eigenvalues().iter().zip(&spec.alphas).map(|(l, a)| l * a).sum()
}
