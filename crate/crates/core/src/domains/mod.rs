//! Sublevel domains `O = {G < 0}`: halfspaces, regions below graphs, balls,
//! ellipsoids and user-supplied level functions.

mod probes;
mod spec;

pub use probes::{
    ellipsoid_mass_identity, estimate_mass, nondegeneracy_probe, sample_domain, DomainSample, NondegeneracyReport,
    REJECTION_CAP,
};
pub use spec::{dirichlet_alphas, dirichlet_space, ns_sum, DirichletCase, DomainSpec, GraphSpec};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gauss_core::{GaussianSpace, Proposal, ScalarField};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainKind {
    Halfspace,
    GraphRegion,
    Ball,
    Ellipsoid,
    Custom,
}

impl DomainKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DomainKind::Halfspace => "halfspace",
            DomainKind::GraphRegion => "graph_region",
            DomainKind::Ball => "ball",
            DomainKind::Ellipsoid => "ellipsoid",
            DomainKind::Custom => "custom",
        }
    }
}

/// `E_r = {Σ α_k x_k² < r²}`.
#[derive(Clone, Debug, PartialEq)]
pub struct EllipsoidSpec {
    pub alphas: Vec<f64>,
    pub radius: f64,
}

impl EllipsoidSpec {
    pub fn new(alphas: Vec<f64>, radius: f64) -> Result<Self> {
        if alphas.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::invalid("ellipsoid coefficients must be nonnegative"));
        }
        if alphas.iter().all(|a| *a == 0.0) {
            return Err(Error::invalid("ellipsoid coefficients are all zero"));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid("ellipsoid radius must be positive"));
        }
        Ok(EllipsoidSpec { alphas, radius })
    }
}

/// Kind-specific data of a domain. Vectors are in eigen coordinates.
#[derive(Clone, Debug)]
pub enum DomainParams {
    /// `ĥ(x) = ⟨c, x⟩` normalised so that `|Qc|_H = 1`; `G = −ĥ`.
    Halfspace {
        hhat: DVector<f64>,
    },
    Ball {
        radius: f64,
        center: DVector<f64>,
    },
    Ellipsoid(EllipsoidSpec),
    /// `G(x) = x_j/√λ_j − F(y)`, `y` the remaining coordinates.
    GraphRegion {
        h_index: usize,
        graph: ScalarField,
    },
    Custom,
}

/// Derivatives of `G` at a point expressed in Cameron–Martin terms.
#[derive(Clone, Debug)]
pub struct LevelJet {
    pub value: f64,
    /// Euclidean gradient.
    pub grad: DVector<f64>,
    /// `D_k G = √λ_k ∂_k G`.
    pub d_h: DVector<f64>,
    /// `|D_H G|_H`.
    pub norm_h: f64,
    /// `L G`.
    pub lg: f64,
    /// `⟨D²_H G · D_H G, D_H G⟩`.
    pub hess_term: f64,
}

impl LevelJet {
    /// `div(D_H G / |D_H G|) = LG/|D_HG| − ⟨D²_HG D_HG, D_HG⟩/|D_HG|³`.
    pub fn div_normal(&self) -> f64 {
        self.lg / self.norm_h - self.hess_term / self.norm_h.powi(3)
    }
}

#[derive(Clone, Debug)]
pub struct LevelSetDomain {
    g: ScalarField,
    kind: DomainKind,
    band_delta: f64,
    params: DomainParams,
    label: String,
    dim: usize,
}

impl LevelSetDomain {
    pub fn g(&self) -> &ScalarField {
        &self.g
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn band_delta(&self) -> f64 {
        self.band_delta
    }

    pub fn params(&self) -> &DomainParams {
        &self.params
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_band_delta(mut self, delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::invalid("band width must be positive"));
        }
        self.band_delta = delta;
        Ok(self)
    }

    #[inline]
    pub fn contains(&self, x: &DVector<f64>) -> bool {
        self.g.value(x) < 0.0
    }

    /// Whether a closed-form parametrization of the level sets exists for this
    /// dimension.
    pub fn has_closed_form_surface(&self) -> bool {
        match &self.params {
            DomainParams::Halfspace { .. } | DomainParams::GraphRegion { .. } => true,
            DomainParams::Ball { .. } | DomainParams::Ellipsoid(_) => self.dim <= 3,
            DomainParams::Custom => false,
        }
    }

    /// True when `|D_H G|` vanishes somewhere inside `O` (balls and
    /// ellipsoids, at their center).
    pub fn singular_inside(&self) -> bool {
        matches!(self.params, DomainParams::Ball { .. } | DomainParams::Ellipsoid(_))
    }

    /// Default proposal for integrals over `O`: a radial mixture around the
    /// origin for centred balls and ellipsoids, plain `μ` otherwise.
    pub fn proposal(&self, space: &GaussianSpace) -> Proposal {
        match &self.params {
            DomainParams::Ball { radius, center } if center.iter().all(|c| *c == 0.0) => Proposal::RadialMixture {
                fraction: 0.3,
                radius: radius / space.max_eigenvalue().sqrt(),
            },
            DomainParams::Ellipsoid(e) => {
                let m = e
                    .alphas
                    .iter()
                    .zip(space.eigenvalues())
                    .map(|(a, l)| a * l)
                    .fold(0.0, f64::max);
                Proposal::RadialMixture {
                    fraction: 0.3,
                    radius: e.radius / m.sqrt(),
                }
            }
            _ => Proposal::Gaussian,
        }
    }

    /// Cameron–Martin derivatives of `G` at `x`.
    pub fn jet(&self, space: &GaussianSpace, x: &DVector<f64>) -> LevelJet {
        let value = self.g.value(x);
        let grad = self.g.gradient(x);
        let hess = self.g.hessian(x);
        jet_from_parts(space, x, value, grad, &hess)
    }
}

pub(crate) fn jet_from_parts(
    space: &GaussianSpace,
    x: &DVector<f64>,
    value: f64,
    grad: DVector<f64>,
    hess: &DMatrix<f64>,
) -> LevelJet {
    let n = space.dim();
    let lam = space.eigenvalues();
    let s = space.sqrt_eigenvalues();
    let d_h = DVector::from_fn(n, |k, _| s[k] * grad[k]);
    let mut lg = 0.0;
    for k in 0..n {
        lg += lam[k] * hess[(k, k)] - x[k] * grad[k];
    }
    // Σ_{h,k} (√λ_h √λ_k ∂_hk G) D_h G D_k G
    let mut hess_term = 0.0;
    for h in 0..n {
        for k in 0..n {
            hess_term += s[h] * s[k] * hess[(h, k)] * d_h[h] * d_h[k];
        }
    }
    LevelJet {
        value,
        norm_h: d_h.norm(),
        grad,
        d_h,
        lg,
        hess_term,
    }
}

/// Halfspace `{ĥ > 0}` with `ĥ(x) = ⟨hhat, x⟩` rescaled to unit `L²(μ)` norm.
pub fn make_halfspace(space: &GaussianSpace, hhat: &[f64]) -> Result<LevelSetDomain> {
    let n = space.dim();
    if hhat.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: hhat.len(),
        });
    }
    let norm: f64 = hhat
        .iter()
        .zip(space.eigenvalues())
        .map(|(c, l)| c * c * l)
        .sum::<f64>()
        .sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::invalid("halfspace functional must be nonzero"));
    }
    let c = DVector::from_iterator(n, hhat.iter().map(|v| v / norm));
    let g = ScalarField::affine(-c.clone(), 0.0).with_label("-hhat");
    Ok(LevelSetDomain {
        g,
        kind: DomainKind::Halfspace,
        band_delta: 0.5,
        params: DomainParams::Halfspace { hhat: c },
        label: format!("halfspace{n}d"),
        dim: n,
    })
}

/// Centred ball `{‖x‖ < r}`.
pub fn make_ball(space: &GaussianSpace, r: f64) -> Result<LevelSetDomain> {
    make_ball_centered(space, r, DVector::zeros(space.dim()))
}

/// Ball `{‖x − center‖ < r}` (center in eigen coordinates).
pub fn make_ball_centered(space: &GaussianSpace, r: f64, center: DVector<f64>) -> Result<LevelSetDomain> {
    let n = space.dim();
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::invalid("ball radius must be positive"));
    }
    if center.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: center.len(),
        });
    }
    Ok(LevelSetDomain {
        g: ScalarField::squared_distance(center.clone(), r).with_label("|x|^2-r^2"),
        kind: DomainKind::Ball,
        band_delta: r * r / 2.0,
        params: DomainParams::Ball { radius: r, center },
        label: format!("ball{n}d"),
        dim: n,
    })
}

/// `{Σ α_k x_k² < r²}`.
pub fn make_ellipsoid(space: &GaussianSpace, spec: &EllipsoidSpec) -> Result<LevelSetDomain> {
    let n = space.dim();
    let spec = EllipsoidSpec::new(spec.alphas.clone(), spec.radius)?;
    if spec.alphas.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: spec.alphas.len(),
        });
    }
    let (a1, a2, a3) = (spec.alphas.clone(), spec.alphas.clone(), spec.alphas.clone());
    let r = spec.radius;
    let g = ScalarField::new(
        "sum a_k x_k^2-r^2",
        n,
        move |x| x.iter().zip(&a1).map(|(v, a)| a * v * v).sum::<f64>() - r * r,
        move |x| DVector::from_fn(n, |k, _| 2.0 * a2[k] * x[k]),
        move |_| DMatrix::from_fn(n, n, |i, j| if i == j { 2.0 * a3[i] } else { 0.0 }),
    );
    Ok(LevelSetDomain {
        g,
        kind: DomainKind::Ellipsoid,
        band_delta: r * r / 2.0,
        params: DomainParams::Ellipsoid(spec),
        label: format!("ellipsoid{n}d"),
        dim: n,
    })
}

/// Region below the graph of `F` over the complement of axis `h_index`:
/// `G(x) = x_j/√λ_j − F(y)`.
pub fn make_graph_region(space: &GaussianSpace, h_index: usize, graph: ScalarField) -> Result<LevelSetDomain> {
    let n = space.dim();
    space.check_index(h_index)?;
    if graph.dim() != n - 1 {
        return Err(Error::DimensionMismatch {
            expected: n - 1,
            got: graph.dim(),
        });
    }
    let sj = space.sqrt_eigenvalues()[h_index];
    let split = move |x: &DVector<f64>| -> DVector<f64> {
        DVector::from_iterator(n - 1, (0..n).filter(|&k| k != h_index).map(|k| x[k]))
    };
    let (f1, f2, f3) = (graph.clone(), graph.clone(), graph.clone());
    let g = ScalarField::new(
        "t-F(y)",
        n,
        move |x| x[h_index] / sj - f1.value(&split(x)),
        move |x| {
            let gy = f2.gradient(&split(x));
            let mut g = DVector::zeros(n);
            let mut i = 0;
            for k in 0..n {
                if k == h_index {
                    g[k] = 1.0 / sj;
                } else {
                    g[k] = -gy[i];
                    i += 1;
                }
            }
            g
        },
        move |x| {
            let hy = f3.hessian(&split(x));
            let idx: Vec<usize> = (0..n).filter(|&k| k != h_index).collect();
            let mut h = DMatrix::zeros(n, n);
            for (a, &i) in idx.iter().enumerate() {
                for (b, &j) in idx.iter().enumerate() {
                    h[(i, j)] = -hy[(a, b)];
                }
            }
            h
        },
    );
    Ok(LevelSetDomain {
        g,
        kind: DomainKind::GraphRegion,
        band_delta: 0.5,
        params: DomainParams::GraphRegion { h_index, graph },
        label: format!("graph{n}d"),
        dim: n,
    })
}

/// Domain from an arbitrary level function.
pub fn make_custom(space: &GaussianSpace, g: ScalarField, band_delta: f64) -> Result<LevelSetDomain> {
    if g.dim() != space.dim() {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            got: g.dim(),
        });
    }
    let n = space.dim();
    LevelSetDomain {
        g,
        kind: DomainKind::Custom,
        band_delta: 1.0,
        params: DomainParams::Custom,
        label: format!("custom{n}d"),
        dim: n,
    }
    .with_band_delta(band_delta)
}
