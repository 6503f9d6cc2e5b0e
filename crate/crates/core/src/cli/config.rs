use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domains::{dirichlet_space, DirichletCase, DomainSpec};
use crate::error::{Error, Result};
use crate::gauss_core::GaussianSpace;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    IbpSuite,
    SurfaceRoutes,
    QphiStudy,
    HalfspaceNorms,
    ExtensionBound,
    HardySweep,
    EllipsoidIdentity,
}

impl Experiment {
    pub fn as_str(&self) -> &'static str {
        match self {
            Experiment::IbpSuite => "ibp_suite",
            Experiment::SurfaceRoutes => "surface_routes",
            Experiment::QphiStudy => "qphi_study",
            Experiment::HalfspaceNorms => "halfspace_norms",
            Experiment::ExtensionBound => "extension_bound",
            Experiment::HardySweep => "hardy_sweep",
            Experiment::EllipsoidIdentity => "ellipsoid_identity",
        }
    }

    /// Exploratory experiments never affect the exit status.
    pub fn gates(&self) -> bool {
        !matches!(self, Experiment::HardySweep)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedSpectrum {
    /// `Q = I`.
    Identity,
    /// `Q = I/n`.
    ScaledIdentity,
    DirichletLaplacian,
    DirichletBilaplacian,
}

/// `[space]`: dimension plus explicit eigenvalues or a named spectrum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenvalues: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<NamedSpectrum>,
}

impl SpaceSpec {
    pub fn standard(dim: usize) -> Self {
        SpaceSpec {
            dim,
            eigenvalues: None,
            spectrum: None,
        }
    }

    /// The space with the same spectrum rule in another dimension. Explicit
    /// eigenvalue lists cannot be resized.
    pub fn with_dim(&self, dim: usize) -> Result<Self> {
        if self.eigenvalues.is_some() {
            return Err(Error::config(
                "space.eigenvalues",
                "explicit eigenvalues fix the dimension",
            ));
        }
        Ok(SpaceSpec { dim, ..self.clone() })
    }

    pub fn build(&self) -> Result<GaussianSpace> {
        if self.dim == 0 {
            return Err(Error::config("space.dim", "must be positive"));
        }
        match (&self.eigenvalues, self.spectrum) {
            (Some(_), Some(_)) => Err(Error::config(
                "space",
                "give either `eigenvalues` or `spectrum`, not both",
            )),
            (Some(l), None) => {
                if l.len() != self.dim {
                    return Err(Error::config(
                        "space.eigenvalues",
                        format!("expected {} entries, got {}", self.dim, l.len()),
                    ));
                }
                if let Some((i, v)) = l.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
                    return Err(Error::config(
                        "space.eigenvalues",
                        format!("entry {i} is {v}; eigenvalues must be positive"),
                    ));
                }
                GaussianSpace::diagonal(l.clone())
            }
            (None, s) => match s.unwrap_or(NamedSpectrum::Identity) {
                NamedSpectrum::Identity => GaussianSpace::standard(self.dim),
                NamedSpectrum::ScaledIdentity => GaussianSpace::diagonal(vec![1.0 / self.dim as f64; self.dim]),
                NamedSpectrum::DirichletLaplacian => dirichlet_space(DirichletCase::Laplacian, self.dim),
                NamedSpectrum::DirichletBilaplacian => dirichlet_space(DirichletCase::Bilaplacian, self.dim),
            },
        }
    }
}

/// `[[options.ellipsoids]]` entries for the mass identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EllipsoidCase {
    pub eigenvalues: Vec<f64>,
    pub alphas: Vec<f64>,
    pub radius: f64,
}

/// `[options]`: experiment-specific knobs, all optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    /// Highest Hermite degree for the halfspace experiments (default 12).
    pub max_degree: Option<u32>,
    /// Normal direction for the halfspace experiments (default 0).
    pub h_index: Option<usize>,
    /// Fixed kernel bandwidth; Silverman's rule when absent.
    pub bandwidth: Option<f64>,
    /// Density grid size (default 41).
    pub grid_points: Option<usize>,
    /// Exponent for the Hardy probe (default 2).
    pub hardy_p: Option<f64>,
    /// Dimensions for the Hardy sweep (default 2..=10).
    pub dims: Option<Vec<usize>>,
    /// Replicates per point of a samples sweep (default 64).
    pub replicates: Option<usize>,
    pub ellipsoids: Option<Vec<EllipsoidCase>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub samples: usize,
    pub seed: u64,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default = "default_output")]
    pub output_path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<SpaceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainSpec>,
    #[serde(default)]
    pub options: Options,
}

fn default_resolution() -> usize {
    32
}

fn default_output() -> String {
    "out".into()
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let c: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .map(|s| {
                    let line = text[..s.start.min(text.len())].matches('\n').count() + 1;
                    format!("line {line}")
                })
                .unwrap_or_else(|| "config".into());
            Error::config(field, e.message().to_string())
        })?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path)?;
        Ok((Self::from_toml_str(&text)?, text))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::config("samples", "must be positive"));
        }
        if self.resolution == 0 {
            return Err(Error::config("resolution", "must be positive"));
        }
        if self.output_path.is_empty() {
            return Err(Error::config("output_path", "must not be empty"));
        }
        if let Some(s) = &self.space {
            s.build()?;
        }
        if let (Some(s), Some(d)) = (&self.space, &self.domain) {
            d.build(&s.build()?).map_err(|e| match e {
                Error::Config { .. } => e,
                other => Error::config("domain", other.to_string()),
            })?;
        }
        let o = &self.options;
        if let Some(b) = o.bandwidth {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::config("options.bandwidth", "must be positive"));
            }
        }
        if let Some(g) = o.grid_points {
            if g < 3 {
                return Err(Error::config("options.grid_points", "must be at least 3"));
            }
        }
        if let Some(p) = o.hardy_p {
            if !(p > 1.0 && p.is_finite()) {
                return Err(Error::config("options.hardy_p", "must exceed 1"));
            }
        }
        if let Some(d) = &o.dims {
            if d.is_empty() || d.contains(&0) {
                return Err(Error::config("options.dims", "dimensions must be positive"));
            }
        }
        if o.replicates == Some(0) {
            return Err(Error::config("options.replicates", "must be positive"));
        }
        if let Some(es) = &o.ellipsoids {
            for (i, e) in es.iter().enumerate() {
                if e.eigenvalues.len() != e.alphas.len() || e.eigenvalues.is_empty() {
                    return Err(Error::config(
                        format!("options.ellipsoids[{i}]"),
                        "eigenvalues and alphas need the same positive length",
                    ));
                }
                if e.eigenvalues.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
                    return Err(Error::config(
                        format!("options.ellipsoids[{i}].eigenvalues"),
                        "must be positive",
                    ));
                }
            }
        }
        Ok(())
    }
}
