//! Monte Carlo verification of integration-by-parts and trace identities on
//! sublevel domains.
//!
//! Each identity is split into a left and a right side, each a bulk integral
//! over `O` plus a surface integral over `G^{-1}(0)`. Identities that share a
//! domain are evaluated on one sample of `μ` through an [`IdentityBatch`].
//! The trace of a smooth function is its restriction to the boundary.

mod engine;
mod probes;
mod suite;

pub use engine::{
    passes, FieldJet, IdentityBatch, IdentityId, IdentityReport, Integrand, NamedTerm, Plan, PointCtx, PowerVariant,
    Side, ROUNDOFF_FLOOR,
};
pub use probes::{
    boundary_conditions_check, hardy_probe, smooth_cutoff, trace_bound_check, zero_trace_probe, BoundaryConditions,
    HardyReport, HardyRow, TraceBoundCheck, ZeroTraceReport, ZeroTraceRow,
};
pub use suite::{
    default_suite_domains, run_suite, suite_batch, suite_fields, write_reports_csv, SuiteDomain, REPORT_HEADER,
};

use nalgebra::DVector;

use crate::domains::LevelSetDomain;
use crate::error::Result;
use crate::gauss_core::{GaussianSpace, SamplerState, ScalarField, VectorFieldH};

fn run_single(
    batch: IdentityBatch,
    space: &GaussianSpace,
    domain: &LevelSetDomain,
    state: SamplerState,
    count: usize,
    resolution: usize,
) -> Result<IdentityReport> {
    let mut r = batch.run(space, domain, state, count, resolution)?;
    Ok(r.remove(0))
}

/// `∫_O D_kφ dμ = ∫_O v̂_kφ dμ + ∫_{G=0} φ D_kG/|D_HG| dρ` (zero-based `k`).
pub fn verify_parti(
    space: &GaussianSpace,
    domain: &LevelSetDomain,
    phi: &ScalarField,
    k: usize,
    state: SamplerState,
    count: usize,
    resolution: usize,
) -> Result<IdentityReport> {
    let mut b = IdentityBatch::new();
    b.add_parti(space, phi, k)?;
    run_single(b, space, domain, state, count, resolution)
}

/// The `|φ|^q` trace identities, with `|D_HG|` on the surface
/// ([`PowerVariant::Weighted`]) or without it ([`PowerVariant::Unit`]).
#[allow(clippy::too_many_arguments)]
pub fn verify_power_identity(
    space: &GaussianSpace,
    domain: &LevelSetDomain,
    phi: &ScalarField,
    q: f64,
    variant: PowerVariant,
    state: SamplerState,
    count: usize,
    resolution: usize,
) -> Result<IdentityReport> {
    let mut b = IdentityBatch::new();
    b.add_power(space, phi, q, variant)?;
    run_single(b, space, domain, state, count, resolution)
}

/// `∫_O div Φ dμ = ∫_{G=0} ⟨Φ, D_HG/|D_HG|⟩_H dρ`.
pub fn verify_divergence_theorem(
    space: &GaussianSpace,
    domain: &LevelSetDomain,
    field: &VectorFieldH,
    label: &str,
    state: SamplerState,
    count: usize,
    resolution: usize,
) -> Result<IdentityReport> {
    let mut b = IdentityBatch::new();
    b.add_campi(space, field, label)?;
    run_single(b, space, domain, state, count, resolution)
}

/// Product rule with boundary term `∫ φψ D_kG/|D_HG| dρ`.
#[allow(clippy::too_many_arguments)]
pub fn verify_product_rule(
    space: &GaussianSpace,
    domain: &LevelSetDomain,
    phi: &ScalarField,
    psi: &ScalarField,
    k: usize,
    state: SamplerState,
    count: usize,
    resolution: usize,
) -> Result<IdentityReport> {
    let mut b = IdentityBatch::new();
    b.add_product_rule(space, phi, psi, k)?;
    run_single(b, space, domain, state, count, resolution)
}

/// `∫_O (∂_hφ − ĥφ) dμ = ∫_{G=0} φ ∂_hG/|D_HG| dρ` for `h = Σ h_k v_k`.
#[allow(clippy::too_many_arguments)]
pub fn verify_partial_h(
    space: &GaussianSpace,
    domain: &LevelSetDomain,
    phi: &ScalarField,
    h: &DVector<f64>,
    label: &str,
    state: SamplerState,
    count: usize,
    resolution: usize,
) -> Result<IdentityReport> {
    let mut b = IdentityBatch::new();
    b.add_partial_h(space, phi, h, label)?;
    run_single(b, space, domain, state, count, resolution)
}

/// Halfspace form of the integration-by-parts formula.
pub fn verify_halfspace_parti(
    space: &GaussianSpace,
    domain: &LevelSetDomain,
    phi: &ScalarField,
    k: usize,
    state: SamplerState,
    count: usize,
    resolution: usize,
) -> Result<IdentityReport> {
    let mut b = IdentityBatch::new();
    b.add_halfspace_parti(space, domain, phi, k)?;
    run_single(b, space, domain, state, count, resolution)
}

/// Halfspace form of the `|φ|^p` trace identity.
pub fn verify_halfspace_trace(
    space: &GaussianSpace,
    domain: &LevelSetDomain,
    phi: &ScalarField,
    p: f64,
    state: SamplerState,
    count: usize,
    resolution: usize,
) -> Result<IdentityReport> {
    let mut b = IdentityBatch::new();
    b.add_halfspace_trace(space, domain, phi, p)?;
    run_single(b, space, domain, state, count, resolution)
}

/// Three-term decomposition of `∫_{‖x‖=r} |φ|^p dρ` on a centred ball.
pub fn verify_sphere_decomposition(
    space: &GaussianSpace,
    domain: &LevelSetDomain,
    phi: &ScalarField,
    p: f64,
    state: SamplerState,
    count: usize,
    resolution: usize,
) -> Result<IdentityReport> {
    let mut b = IdentityBatch::new();
    b.add_sphere(space, domain, phi, p)?;
    run_single(b, space, domain, state, count, resolution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::{make_ball, make_ellipsoid, make_halfspace, EllipsoidSpec};

    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    const N: usize = 200_000;

    fn line() -> (GaussianSpace, LevelSetDomain) {
        let s = GaussianSpace::standard(1).unwrap();
        let d = make_halfspace(&s, &[1.0]).unwrap();
        (s, d)
    }

    fn disc() -> (GaussianSpace, LevelSetDomain) {
        let s = GaussianSpace::standard(2).unwrap();
        let d = make_ball(&s, 1.0).unwrap();
        (s, d)
    }

    #[test]
    fn ids_round_trip() {
        for id in IdentityId::ALL {
            assert_eq!(id.as_str().parse::<IdentityId>().unwrap(), id);
        }
        assert!("nope".parse::<IdentityId>().is_err());
    }

    #[test]
    fn pass_rule() {
        assert!(passes(1.0, 1.0 + 2.9e-3, 1e-3, 0.0));
        assert!(!passes(1.0, 1.0 + 3.1e-3, 1e-3, 0.0));
        assert!(passes(1.0, 1.0, 0.0, 0.0));
        assert!(!passes(f64::NAN, 1.0, 1.0, 1.0));
    }

    #[test]
    fn parti_on_line() {
        let (s, d) = line();
        let st = SamplerState::new(3, 0);
        let r = verify_parti(&s, &d, &ScalarField::constant(1, 1.0), 0, st, N, 16).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert!(r.pass && r.rhs.abs() < 4.0 * r.rhs_err, "{r:?}");
        let r = verify_parti(&s, &d, &ScalarField::coordinate(1, 0), 0, st, N, 16).unwrap();
        assert!((r.lhs - 0.5).abs() < 4.0 * r.lhs_err);
        assert!((r.rhs - 0.5).abs() < 4.0 * r.rhs_err);
        assert!(r.pass);
    }

    #[test]
    fn power_identities() {
        let (s, d) = line();
        let st = SamplerState::new(4, 0);
        let one = ScalarField::constant(1, 1.0);
        let r = verify_power_identity(&s, &d, &one, 1.0, PowerVariant::Weighted, st, N, 16).unwrap();
        assert!((r.lhs - INV_SQRT_2PI).abs() < 1e-12);
        assert!(r.pass);
        let (s, d) = disc();
        let one = ScalarField::constant(2, 1.0);
        let r = verify_power_identity(&s, &d, &one, 2.0, PowerVariant::Unit, st, N, 32).unwrap();
        assert!((r.lhs - (-0.5f64).exp()).abs() < 1e-10);
        assert!(r.pass, "{r:?}");
        let r = verify_power_identity(
            &s,
            &d,
            &ScalarField::coordinate(2, 0),
            2.0,
            PowerVariant::Unit,
            st,
            N,
            32,
        )
        .unwrap();
        assert!((r.lhs - 0.5 * (-0.5f64).exp()).abs() < 1e-10);
        assert!(r.pass);
        assert!(verify_power_identity(&s, &d, &one, 0.5, PowerVariant::Unit, st, N, 32).is_err());
    }

    #[test]
    fn batch_consistency() {
        let (s, d) = disc();
        let phi = ScalarField::gaussian_bump(2, 0.25);
        let mut b = IdentityBatch::new();
        b.add_parti(&s, &phi, 1).unwrap();
        let comps = vec![ScalarField::constant(2, 0.0), phi.clone()];
        b.add_campi(&s, &VectorFieldH::new(2, comps).unwrap(), "bump*v2")
            .unwrap();
        b.add_product_rule(&s, &phi, &ScalarField::constant(2, 1.0), 1).unwrap();
        b.add_parti(&s, &phi.scaled(-2.5).with_label("scaled"), 1).unwrap();
        let r = b.run(&s, &d, SamplerState::new(5, 0), N, 32).unwrap();
        assert!(r.iter().all(|x| x.pass));
        assert!((r[0].residual() - r[1].residual()).abs() < 1e-12);
        assert!((r[0].residual() - r[2].residual()).abs() < 1e-12);
        assert!((r[3].lhs + 2.5 * r[0].lhs).abs() < 1e-12);
        assert!((r[3].rhs + 2.5 * r[0].rhs).abs() < 1e-12);
    }

    #[test]
    fn divergence_theorem_examples() {
        let (s, d) = disc();
        let mut b = IdentityBatch::new();
        b.add_campi_normal();
        let comps = vec![
            ScalarField::coordinate(2, 1).scaled(-1.0),
            ScalarField::coordinate(2, 0),
        ];
        b.add_campi(&s, &VectorFieldH::new(2, comps).unwrap(), "rotation")
            .unwrap();
        let r = b.run(&s, &d, SamplerState::new(6, 0), N, 32).unwrap();
        assert!((r[0].rhs - (-0.5f64).exp()).abs() < 1e-10);
        assert!(r[0].pass);
        assert!(r[1].rhs.abs() < 1e-12);
        assert!(r[1].pass);
    }

    #[test]
    fn halfspace_forms_match_general_ones() {
        let s = GaussianSpace::diagonal(vec![2.0, 0.5]).unwrap();
        let d = make_halfspace(&s, &[1.0, 1.0]).unwrap();
        let phi = ScalarField::coordinate_power(2, 0, 2);
        let mut b = IdentityBatch::new();
        b.add_parti(&s, &phi, 0).unwrap();
        b.add_halfspace_parti(&s, &d, &phi, 0).unwrap();
        b.add_power(&s, &phi, 2.0, PowerVariant::Unit).unwrap();
        b.add_halfspace_trace(&s, &d, &phi, 2.0).unwrap();
        let r = b.run(&s, &d, SamplerState::new(7, 0), N, 24).unwrap();
        assert!(r.iter().all(|x| x.pass));
        assert!((r[0].rhs - r[1].rhs).abs() < 1e-10);
        assert!((r[2].rhs - r[3].rhs).abs() < 1e-10);
        assert!(r[1].notes.iter().any(|n| n.contains("μ_Y")));
        let (bs, bd) = disc();
        let bphi = ScalarField::constant(2, 1.0);
        assert!(verify_halfspace_parti(&bs, &bd, &bphi, 0, SamplerState::new(1, 0), 1000, 8).is_err());
    }

    #[test]
    fn sphere_decomposition_terms() {
        let s = GaussianSpace::diagonal(vec![1.0, 0.4]).unwrap();
        let d = make_ball(&s, 1.0).unwrap();
        let r = verify_sphere_decomposition(
            &s,
            &d,
            &ScalarField::coordinate(2, 0),
            2.0,
            SamplerState::new(8, 0),
            N,
            32,
        )
        .unwrap();
        assert!(r.pass, "{r:?}");
        let t = |n: &str| r.term(n).unwrap().value;
        assert!((t("gradient_term") + t("trace_term") - t("curvature_term") - r.rhs).abs() < 1e-12);
        let e = make_ellipsoid(&s, &EllipsoidSpec::new(vec![1.0, 2.0], 1.0).unwrap()).unwrap();
        assert!(verify_sphere_decomposition(
            &s,
            &e,
            &ScalarField::constant(2, 1.0),
            2.0,
            SamplerState::new(8, 0),
            N,
            32
        )
        .is_err());
    }

    #[test]
    fn zero_trace() {
        let (s, d) = disc();
        let u = ScalarField::constant(2, 1.0);
        let eps = [0.2, 0.1, 0.05, 0.02];
        let z = zero_trace_probe(&s, &d, &u, 0, &eps, SamplerState::new(9, 0), N, 32).unwrap();
        assert!(z.boundary_abs <= 1e-12);
        assert!(z.parti.pass);
        let dev = |i: usize| (z.sweep[i].rhs.mean - z.uncut.mean).abs();
        assert!(dev(3) <= dev(0));
        let u = ScalarField::coordinate(2, 0);
        let z = zero_trace_probe(&s, &d, &u, 0, &eps, SamplerState::new(9, 1), N, 32).unwrap();
        let dev = |i: usize| (z.sweep[i].rhs.mean - z.uncut.mean).abs();
        assert!(dev(3) < dev(0));
        assert!((z.sweep[3].lhs.mean - z.uncut.mean).abs() < (z.sweep[0].lhs.mean - z.uncut.mean).abs());
    }

    #[test]
    fn hardy_constant_function() {
        let (s, d) = disc();
        let fam = [ScalarField::constant(2, 1.0), ScalarField::coordinate(2, 0)];
        let h = hardy_probe(&s, &d, 2.0, &fam, SamplerState::new(10, 0), N, 32).unwrap();
        let r = &h.rows[0];
        assert!(r.numerator.agrees_with(0.855_624_391_892_149, 4.0), "{r:?}");
        assert!(r.sobolev.agrees_with(1.0 - (-0.5f64).exp(), 4.0));
        assert!((r.ratio - 2.1746).abs() < 4.0 * r.ratio_err + 1e-4);
        // ∫_B x1²/|x| dμ = ½ ∫_0^1 s² e^{-s²/2} ds
        let x1_num = 0.5 * 0.249_093_732_179_515;
        assert!(h.rows[1].numerator.agrees_with(x1_num, 4.0), "{:?}", h.rows[1]);
        assert!(h.sphere.iter().all(|r| r.pass));
        assert!(!h.converse_regime);
        let e = make_ellipsoid(&s, &EllipsoidSpec::new(vec![1.0, 2.0], 1.0).unwrap()).unwrap();
        assert!(hardy_probe(&s, &e, 2.0, &fam, SamplerState::new(10, 0), N, 32).is_err());
    }

    #[test]
    fn trace_bounds() {
        let (s, d) = line();
        let phi = ScalarField::gaussian_bump(1, 0.25);
        for q in [1.0, 2.0] {
            let c = trace_bound_check(&s, &d, &phi, q, 4.0, SamplerState::new(11, 0), N, 16).unwrap();
            assert!(c.holds && c.bound.is_finite(), "{c:?}");
        }
        let (s, d) = disc();
        let phi = ScalarField::coordinate(2, 0);
        let c = trace_bound_check(&s, &d, &phi, 1.0, 4.0, SamplerState::new(11, 1), N, 32).unwrap();
        assert!(c.holds && c.bound.is_finite());
        let c = trace_bound_check(&s, &d, &phi, 2.0, 4.0, SamplerState::new(11, 1), N, 32).unwrap();
        assert!(c.holds && c.bound.is_infinite() && c.note.is_some());
    }

    #[test]
    fn boundary_conditions() {
        for sd in default_suite_domains().unwrap() {
            if matches!(
                sd.domain.kind(),
                crate::domains::DomainKind::Halfspace | crate::domains::DomainKind::GraphRegion
            ) {
                let c = boundary_conditions_check(&sd.space, &sd.domain, SamplerState::new(12, 0), 20_000, 16).unwrap();
                assert!(c.holds, "{c:?}");
            }
        }
    }

    #[test]
    fn suite_csv_round_trip() {
        let (s, d) = line();
        let r = suite_batch(&s, &d)
            .unwrap()
            .run(&s, &d, SamplerState::new(13, 0), 20_000, 8)
            .unwrap();
        let dir = std::env::temp_dir().join(format!("gt-suite-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("suite.csv");
        write_reports_csv(&p, &r).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().next().unwrap(), REPORT_HEADER.join(","));
        assert_eq!(text.lines().count(), r.len() + 1);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
