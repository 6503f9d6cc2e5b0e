use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::engine::{IdentityBatch, IdentityReport, PowerVariant};
use crate::domains::{
    make_ball, make_ellipsoid, make_graph_region, make_halfspace, DomainKind, DomainParams, EllipsoidSpec,
    LevelSetDomain,
};
use crate::error::Result;
use crate::gauss_core::{GaussianSpace, SamplerState, ScalarField, VectorFieldH};

pub const REPORT_HEADER: [&str; 9] = [
    "identity_id",
    "domain",
    "phi_label",
    "k_or_q",
    "lhs",
    "rhs",
    "lhs_err",
    "rhs_err",
    "pass",
];

#[derive(Clone, Debug)]
pub struct SuiteDomain {
    pub space: GaussianSpace,
    pub domain: LevelSetDomain,
}

/// The built-in domains: 1D and 2D halfspaces, spheres in 2D and 3D, a 2D
/// region below a sine graph and a 2D ellipsoid.
pub fn default_suite_domains() -> Result<Vec<SuiteDomain>> {
    let mut out = Vec::new();

    let s = GaussianSpace::standard(1)?;
    let d = make_halfspace(&s, &[1.0])?.with_label("halfspace1d");
    out.push(SuiteDomain { space: s, domain: d });

    let s = GaussianSpace::diagonal(vec![2.0, 0.5])?;
    let d = make_halfspace(&s, &[1.0, 1.0])?.with_label("halfspace2d");
    out.push(SuiteDomain { space: s, domain: d });

    let s = GaussianSpace::standard(2)?;
    let d = make_ball(&s, 1.0)?.with_label("sphere2d");
    out.push(SuiteDomain { space: s, domain: d });

    let s = GaussianSpace::diagonal(vec![1.0, 0.6, 0.3])?;
    let d = make_ball(&s, 1.0)?.with_label("sphere3d");
    out.push(SuiteDomain { space: s, domain: d });

    let s = GaussianSpace::standard(2)?;
    let graph = ScalarField::new(
        "0.25+0.4sin(y)",
        1,
        |y| 0.25 + 0.4 * y[0].sin(),
        |y| DVector::from_element(1, 0.4 * y[0].cos()),
        |y| DMatrix::from_element(1, 1, -0.4 * y[0].sin()),
    );
    let d = make_graph_region(&s, 0, graph)?.with_label("graph2d");
    out.push(SuiteDomain { space: s, domain: d });

    let s = GaussianSpace::diagonal(vec![1.0, 0.5])?;
    let d = make_ellipsoid(&s, &EllipsoidSpec::new(vec![1.0, 2.0], 1.0)?)?.with_label("ellipsoid2d");
    out.push(SuiteDomain { space: s, domain: d });

    Ok(out)
}

/// `1`, `x_j`, `x_j²` for every coordinate, and `exp(−‖x‖²/4)`.
pub fn suite_fields(n: usize) -> Vec<ScalarField> {
    let mut v = vec![ScalarField::constant(n, 1.0)];
    v.extend((0..n).map(|j| ScalarField::coordinate(n, j)));
    v.extend((0..n).map(|j| ScalarField::coordinate_power(n, j, 2)));
    v.push(ScalarField::gaussian_bump(n, 0.25));
    v
}

/// All identities of the default suite that apply to `domain`.
pub fn suite_batch(space: &GaussianSpace, domain: &LevelSetDomain) -> Result<IdentityBatch> {
    let n = space.dim();
    let fields = suite_fields(n);
    let one = &fields[0];
    let x1 = &fields[1];
    let x1sq = &fields[1 + n];
    let bump = &fields[2 * n + 1];
    let mut b = IdentityBatch::new();

    for f in &fields {
        for k in 0..n {
            b.add_parti(space, f, k)?;
        }
    }
    for variant in [PowerVariant::Weighted, PowerVariant::Unit] {
        for f in &fields {
            for q in [1.0, 2.0] {
                b.add_power(space, f, q, variant)?;
            }
        }
    }

    for f in [one, bump] {
        for k in 0..n {
            let comps = (0..n)
                .map(|j| {
                    if j == k {
                        f.clone()
                    } else {
                        ScalarField::constant(n, 0.0)
                    }
                })
                .collect();
            b.add_campi(
                space,
                &VectorFieldH::new(n, comps)?,
                &format!("{}*v{}", f.label(), k + 1),
            )?;
        }
    }
    b.add_campi_normal();
    if n >= 2 {
        let s = space.sqrt_eigenvalues();
        let mut comps = vec![
            ScalarField::coordinate(n, 1)
                .scaled(-1.0 / s[0])
                .with_label("-x2/sqrt(l1)"),
            ScalarField::coordinate(n, 0)
                .scaled(1.0 / s[1])
                .with_label("x1/sqrt(l2)"),
        ];
        comps.extend((2..n).map(|_| ScalarField::constant(n, 0.0)));
        b.add_campi(space, &VectorFieldH::new(n, comps)?, "rotation")?;
    }

    for (phi, psi) in [(x1, x1), (bump, x1sq), (x1, one)] {
        for k in 0..n {
            b.add_product_rule(space, phi, psi, k)?;
        }
    }

    let mut dirs = vec![("uniform".to_string(), DVector::from_element(n, 1.0 / (n as f64).sqrt()))];
    if n >= 2 {
        let mut e = DVector::zeros(n);
        e[n - 1] = 1.0;
        dirs.push((format!("v{n}"), e));
    }
    for (label, h) in &dirs {
        for f in [one, x1, bump] {
            b.add_partial_h(space, f, h, label)?;
        }
    }

    if domain.kind() == DomainKind::Halfspace {
        for f in &fields {
            for k in 0..n {
                b.add_halfspace_parti(space, domain, f, k)?;
            }
            for p in [1.0, 2.0] {
                b.add_halfspace_trace(space, domain, f, p)?;
            }
        }
    }
    if let DomainParams::Ball { center, .. } = domain.params() {
        if center.iter().all(|c| *c == 0.0) {
            for f in &fields {
                for p in [1.0, 2.0] {
                    b.add_sphere(space, domain, f, p)?;
                }
            }
        }
    }
    Ok(b)
}

/// Runs [`suite_batch`] on each domain with substream `i` of `state`.
pub fn run_suite(
    domains: &[SuiteDomain],
    state: SamplerState,
    count: usize,
    resolution: usize,
) -> Result<Vec<IdentityReport>> {
    let mut out = Vec::new();
    for (i, d) in domains.iter().enumerate() {
        let batch = suite_batch(&d.space, &d.domain)?;
        out.extend(batch.run(&d.space, &d.domain, state.substream(i as u64), count, resolution)?);
    }
    Ok(out)
}

pub fn write_reports_csv(path: &Path, reports: &[IdentityReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(REPORT_HEADER)?;
    for r in reports {
        w.write_record([
            r.id.as_str().to_string(),
            r.domain.clone(),
            r.phi_label.clone(),
            r.k_or_q.clone(),
            r.lhs.to_string(),
            r.rhs.to_string(),
            r.lhs_err.to_string(),
            r.rhs_err.to_string(),
            r.pass.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
