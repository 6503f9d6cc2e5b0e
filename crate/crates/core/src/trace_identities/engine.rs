use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DVector;

use crate::domains::{DomainParams, LevelJet, LevelSetDomain};
use crate::error::{Error, Result};
use crate::gauss_core::mc::integrate;
use crate::gauss_core::{h_coords, GaussianSpace, SamplerState, ScalarField, VectorFieldH};
use crate::surface_measure::{coarea_surface_integral, surface_quadrature};

/// Relative slack added to the pass tolerance for floating-point roundoff.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IdentityId {
    Parti,
    Partitraccia,
    Partitraccia2,
    Campi,
    Particlassica,
    PartialH,
    Partisemispazio,
    Tracciasemispazio,
    Sfera,
}

impl IdentityId {
    pub const ALL: [IdentityId; 9] = [
        IdentityId::Parti,
        IdentityId::Partitraccia,
        IdentityId::Partitraccia2,
        IdentityId::Campi,
        IdentityId::Particlassica,
        IdentityId::PartialH,
        IdentityId::Partisemispazio,
        IdentityId::Tracciasemispazio,
        IdentityId::Sfera,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            IdentityId::Parti => "parti",
            IdentityId::Partitraccia => "partitraccia",
            IdentityId::Partitraccia2 => "partitraccia2",
            IdentityId::Campi => "campi",
            IdentityId::Particlassica => "particlassica",
            IdentityId::PartialH => "partial_h",
            IdentityId::Partisemispazio => "partisemispazio",
            IdentityId::Tracciasemispazio => "tracciasemispazio",
            IdentityId::Sfera => "sfera",
        }
    }
}

impl FromStr for IdentityId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        IdentityId::ALL
            .iter()
            .copied()
            .find(|i| i.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown identity `{s}`")))
    }
}

impl std::fmt::Display for IdentityId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which `|φ|^q` identity to check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PowerVariant {
    /// Surface integrand `|φ|^q |D_HG|`, bulk uses `LG`.
    Weighted,
    /// Surface integrand `|φ|^q`, bulk uses `div(D_HG/|D_HG|)`.
    Unit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NamedTerm {
    pub name: String,
    pub value: f64,
    pub err: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdentityReport {
    pub id: IdentityId,
    pub domain: String,
    pub phi_label: String,
    pub k_or_q: String,
    pub lhs: f64,
    pub rhs: f64,
    pub lhs_err: f64,
    pub rhs_err: f64,
    pub pass: bool,
    /// Individual terms reported alongside the two sides.
    pub terms: Vec<NamedTerm>,
    pub notes: Vec<String>,
}

/// `|lhs − rhs| ≤ 3 sqrt(lhs_err² + rhs_err²)`, plus a roundoff floor of
/// [`ROUNDOFF_FLOOR`] relative to the magnitudes involved.
pub fn passes(lhs: f64, rhs: f64, lhs_err: f64, rhs_err: f64) -> bool {
    let comb = (lhs_err * lhs_err + rhs_err * rhs_err).sqrt();
    let tol = 3.0 * comb + ROUNDOFF_FLOOR * (1.0 + lhs.abs() + rhs.abs());
    (lhs - rhs).abs() <= tol
}

impl IdentityReport {
    pub fn new(
        id: IdentityId,
        domain: impl Into<String>,
        phi_label: impl Into<String>,
        k_or_q: impl Into<String>,
        lhs: (f64, f64),
        rhs: (f64, f64),
    ) -> Self {
        IdentityReport {
            id,
            domain: domain.into(),
            phi_label: phi_label.into(),
            k_or_q: k_or_q.into(),
            lhs: lhs.0,
            rhs: rhs.0,
            lhs_err: lhs.1,
            rhs_err: rhs.1,
            pass: passes(lhs.0, rhs.0, lhs.1, rhs.1),
            terms: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn combined_error(&self) -> f64 {
        self.lhs_err.hypot(self.rhs_err)
    }

    pub fn residual(&self) -> f64 {
        self.lhs - self.rhs
    }

    pub fn term(&self, name: &str) -> Option<&NamedTerm> {
        self.terms.iter().find(|t| t.name == name)
    }
}

/// Value and H-gradient of a registered field at a point.
#[derive(Clone, Debug)]
pub struct FieldJet {
    pub value: f64,
    pub dh: DVector<f64>,
}

/// Everything an integrand may need at one point.
pub struct PointCtx {
    pub x: DVector<f64>,
    pub jet: LevelJet,
    /// `v̂_k(x) = x_k/√λ_k`.
    pub vhat: DVector<f64>,
    pub fields: Vec<FieldJet>,
}

pub type Integrand = Arc<dyn Fn(&PointCtx) -> f64 + Send + Sync>;

#[derive(Clone, Default)]
pub struct Side {
    pub bulk: Option<Integrand>,
    pub surface: Option<Integrand>,
}

impl Side {
    fn bulk(f: impl Fn(&PointCtx) -> f64 + Send + Sync + 'static) -> Self {
        Side {
            bulk: Some(Arc::new(f)),
            surface: None,
        }
    }

    fn surface(f: impl Fn(&PointCtx) -> f64 + Send + Sync + 'static) -> Self {
        Side {
            bulk: None,
            surface: Some(Arc::new(f)),
        }
    }

    fn both(
        b: impl Fn(&PointCtx) -> f64 + Send + Sync + 'static,
        s: impl Fn(&PointCtx) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Side {
            bulk: Some(Arc::new(b)),
            surface: Some(Arc::new(s)),
        }
    }
}

/// One identity: two sides plus optional named bulk terms.
#[derive(Clone)]
pub struct Plan {
    pub id: IdentityId,
    pub phi_label: String,
    pub k_or_q: String,
    pub lhs: Side,
    pub rhs: Side,
    pub extras: Vec<(String, Integrand)>,
    pub notes: Vec<String>,
}

/// `|φ|^{q−2}φ`, taken as 0 where `φ = 0`.
#[inline]
pub(crate) fn signed_power(v: f64, q: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v.abs().powf(q - 1.0) * v.signum()
    }
}

const RHO_NOTE: &str = "hyperplane surface measure is (2π)^{-1/2} μ_Y";

/// Identities sharing one domain and one Monte Carlo sample.
#[derive(Clone, Default)]
pub struct IdentityBatch {
    fields: Vec<ScalarField>,
    plans: Vec<Plan>,
}

impl IdentityBatch {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.plans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plans.is_empty()
    }

    /// Registers a field and returns its slot; fields are shared by label.
    pub fn field(&mut self, f: &ScalarField) -> usize {
        if let Some(i) = self.fields.iter().position(|g| g.label() == f.label()) {
            return i;
        }
        self.fields.push(f.clone());
        self.fields.len() - 1
    }

    pub fn push(&mut self, plan: Plan) {
        self.plans.push(plan);
    }

    fn check(space: &GaussianSpace, f: &ScalarField, k: Option<usize>) -> Result<()> {
        if f.dim() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                got: f.dim(),
            });
        }
        if let Some(k) = k {
            if k >= space.dim() {
                return Err(Error::IndexOutOfRange {
                    index: k,
                    dim: space.dim(),
                });
            }
        }
        Ok(())
    }

    fn plan(id: IdentityId, phi: &str, k_or_q: String, lhs: Side, rhs: Side) -> Plan {
        Plan {
            id,
            phi_label: phi.to_string(),
            k_or_q,
            lhs,
            rhs,
            extras: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn add_parti(&mut self, space: &GaussianSpace, phi: &ScalarField, k: usize) -> Result<()> {
        Self::check(space, phi, Some(k))?;
        let i = self.field(phi);
        self.push(Self::plan(
            IdentityId::Parti,
            phi.label(),
            format!("k={}", k + 1),
            Side::bulk(move |c| c.fields[i].dh[k]),
            Side::both(
                move |c| c.vhat[k] * c.fields[i].value,
                move |c| c.fields[i].value * c.jet.d_h[k] / c.jet.norm_h,
            ),
        ));
        Ok(())
    }

    pub fn add_power(&mut self, space: &GaussianSpace, phi: &ScalarField, q: f64, variant: PowerVariant) -> Result<()> {
        Self::check(space, phi, None)?;
        if !(q >= 1.0 && q.is_finite()) {
            return Err(Error::invalid(format!("exponent q must be at least 1, got {q}")));
        }
        let i = self.field(phi);
        let plan = match variant {
            PowerVariant::Weighted => Self::plan(
                IdentityId::Partitraccia,
                phi.label(),
                format!("q={q}"),
                Side::surface(move |c| c.fields[i].value.abs().powf(q) * c.jet.norm_h),
                Side::bulk(move |c| {
                    let f = &c.fields[i];
                    q * signed_power(f.value, q) * f.dh.dot(&c.jet.d_h) + c.jet.lg * f.value.abs().powf(q)
                }),
            ),
            PowerVariant::Unit => Self::plan(
                IdentityId::Partitraccia2,
                phi.label(),
                format!("q={q}"),
                Side::surface(move |c| c.fields[i].value.abs().powf(q)),
                Side::bulk(move |c| {
                    let f = &c.fields[i];
                    q * signed_power(f.value, q) * f.dh.dot(&c.jet.d_h) / c.jet.norm_h
                        + f.value.abs().powf(q) * c.jet.div_normal()
                }),
            ),
        };
        self.push(plan);
        Ok(())
    }

    pub fn add_campi(&mut self, space: &GaussianSpace, field: &VectorFieldH, label: &str) -> Result<()> {
        if field.dim() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                got: field.dim(),
            });
        }
        let slots: Vec<usize> = field.components().iter().map(|f| self.field(f)).collect();
        let s2 = slots.clone();
        self.push(Self::plan(
            IdentityId::Campi,
            label,
            "-".into(),
            Side::bulk(move |c| {
                slots
                    .iter()
                    .enumerate()
                    .map(|(k, &i)| c.fields[i].dh[k] - c.fields[i].value * c.vhat[k])
                    .sum()
            }),
            Side::surface(move |c| {
                s2.iter()
                    .enumerate()
                    .map(|(k, &i)| c.fields[i].value * c.jet.d_h[k])
                    .sum::<f64>()
                    / c.jet.norm_h
            }),
        ));
        Ok(())
    }

    /// Divergence theorem for the unit normal field `D_HG/|D_HG|`, whose
    /// flux density is 1: both sides equal `ρ(G^{-1}(0))`.
    pub fn add_campi_normal(&mut self) {
        self.push(Self::plan(
            IdentityId::Campi,
            "D_HG/|D_HG|",
            "-".into(),
            Side::bulk(|c| c.jet.div_normal()),
            Side::surface(|_| 1.0),
        ));
    }

    pub fn add_product_rule(
        &mut self,
        space: &GaussianSpace,
        phi: &ScalarField,
        psi: &ScalarField,
        k: usize,
    ) -> Result<()> {
        Self::check(space, phi, Some(k))?;
        Self::check(space, psi, None)?;
        let i = self.field(phi);
        let j = self.field(psi);
        self.push(Self::plan(
            IdentityId::Particlassica,
            format!("{}*{}", phi.label(), psi.label()).as_str(),
            format!("k={}", k + 1),
            Side::bulk(move |c| c.fields[i].dh[k] * c.fields[j].value),
            Side::both(
                move |c| {
                    let (a, b) = (&c.fields[i], &c.fields[j]);
                    -b.dh[k] * a.value + c.vhat[k] * a.value * b.value
                },
                move |c| c.fields[i].value * c.fields[j].value * c.jet.d_h[k] / c.jet.norm_h,
            ),
        ));
        Ok(())
    }

    pub fn add_partial_h(
        &mut self,
        space: &GaussianSpace,
        phi: &ScalarField,
        h: &DVector<f64>,
        label: &str,
    ) -> Result<()> {
        Self::check(space, phi, None)?;
        if h.len() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                got: h.len(),
            });
        }
        let i = self.field(phi);
        let (h1, h2) = (h.clone(), h.clone());
        self.push(Self::plan(
            IdentityId::PartialH,
            phi.label(),
            format!("h={label}"),
            Side::bulk(move |c| {
                let f = &c.fields[i];
                f.dh.dot(&h1) - c.vhat.dot(&h1) * f.value
            }),
            Side::surface(move |c| c.fields[i].value * c.jet.d_h.dot(&h2) / c.jet.norm_h),
        ));
        Ok(())
    }

    fn halfspace_h(space: &GaussianSpace, domain: &LevelSetDomain) -> Result<DVector<f64>> {
        match domain.params() {
            DomainParams::Halfspace { hhat } => Ok(h_coords(space, hhat)),
            _ => Err(Error::Unsupported(format!(
                "halfspace identity on a {} domain",
                domain.kind().as_str()
            ))),
        }
    }

    /// `∫_O D_kφ dμ = ∫_O v̂_kφ dμ − ⟨v_k, h⟩_H ∫_Y φ dρ`.
    pub fn add_halfspace_parti(
        &mut self,
        space: &GaussianSpace,
        domain: &LevelSetDomain,
        phi: &ScalarField,
        k: usize,
    ) -> Result<()> {
        Self::check(space, phi, Some(k))?;
        let hk = Self::halfspace_h(space, domain)?[k];
        let i = self.field(phi);
        let mut p = Self::plan(
            IdentityId::Partisemispazio,
            phi.label(),
            format!("k={}", k + 1),
            Side::bulk(move |c| c.fields[i].dh[k]),
            Side::both(move |c| c.vhat[k] * c.fields[i].value, move |c| -hk * c.fields[i].value),
        );
        p.notes.push(RHO_NOTE.into());
        if hk == 0.0 {
            p.notes.push("tangential direction: no boundary term".into());
        }
        self.push(p);
        Ok(())
    }

    /// `∫_Y |φ|^p dρ = −p ∫_O |φ|^{p−2}φ ⟨h, D_Hφ⟩ dμ + ∫_O ĥ |φ|^p dμ`.
    pub fn add_halfspace_trace(
        &mut self,
        space: &GaussianSpace,
        domain: &LevelSetDomain,
        phi: &ScalarField,
        p: f64,
    ) -> Result<()> {
        Self::check(space, phi, None)?;
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::invalid(format!("exponent p must be at least 1, got {p}")));
        }
        let h = Self::halfspace_h(space, domain)?;
        let i = self.field(phi);
        let mut plan = Self::plan(
            IdentityId::Tracciasemispazio,
            phi.label(),
            format!("q={p}"),
            Side::surface(move |c| c.fields[i].value.abs().powf(p)),
            Side::bulk(move |c| {
                let f = &c.fields[i];
                -p * signed_power(f.value, p) * h.dot(&f.dh) + c.vhat.dot(&h) * f.value.abs().powf(p)
            }),
        );
        plan.notes.push(RHO_NOTE.into());
        self.push(plan);
        Ok(())
    }

    /// `∫_{‖x‖=r} |φ|^p dρ = p∫|φ|^{p−2}φ⟨D_Hφ,Qx⟩_H/‖Q^{1/2}x‖
    /// + ∫(TrQ − ‖x‖²)|φ|^p/‖Q^{1/2}x‖ − ∫‖Qx‖²|φ|^p/‖Q^{1/2}x‖³` on `B(0,r)`.
    pub fn add_sphere(
        &mut self,
        space: &GaussianSpace,
        domain: &LevelSetDomain,
        phi: &ScalarField,
        p: f64,
    ) -> Result<()> {
        Self::check(space, phi, None)?;
        match domain.params() {
            DomainParams::Ball { center, .. } if center.iter().all(|c| *c == 0.0) => {}
            _ => {
                return Err(Error::Unsupported(
                    "sphere decomposition needs a ball centred at the origin".into(),
                ))
            }
        }
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::invalid(format!("exponent p must be at least 1, got {p}")));
        }
        let i = self.field(phi);
        let lam: Arc<Vec<f64>> = Arc::new(space.eigenvalues().to_vec());
        let tr = space.trace();
        let geo = {
            let lam = lam.clone();
            move |x: &DVector<f64>| {
                let mut qh = 0.0;
                let mut q2 = 0.0;
                for (k, l) in lam.iter().enumerate() {
                    qh += l * x[k] * x[k];
                    q2 += l * l * x[k] * x[k];
                }
                (qh.sqrt(), q2)
            }
        };
        let sl: Arc<Vec<f64>> = Arc::new(space.sqrt_eigenvalues().to_vec());
        let t1 = {
            let (geo, sl) = (geo.clone(), sl.clone());
            move |c: &PointCtx| {
                let f = &c.fields[i];
                let (s, _) = geo(&c.x);
                let dq: f64 = (0..sl.len()).map(|k| f.dh[k] * sl[k] * c.x[k]).sum();
                p * signed_power(f.value, p) * dq / s
            }
        };
        let t2 = {
            let geo = geo.clone();
            move |c: &PointCtx| {
                let (s, _) = geo(&c.x);
                (tr - c.x.norm_squared()) * c.fields[i].value.abs().powf(p) / s
            }
        };
        let t3 = {
            let geo = geo.clone();
            move |c: &PointCtx| {
                let (s, q2) = geo(&c.x);
                q2 * c.fields[i].value.abs().powf(p) / (s * s * s)
            }
        };
        let (a, b, d) = (t1.clone(), t2.clone(), t3.clone());
        let mut plan = Self::plan(
            IdentityId::Sfera,
            phi.label(),
            format!("q={p}"),
            Side::surface(move |c| c.fields[i].value.abs().powf(p)),
            Side::bulk(move |c| a(c) + b(c) - d(c)),
        );
        plan.extras.push(("gradient_term".into(), Arc::new(t1)));
        plan.extras.push(("trace_term".into(), Arc::new(t2)));
        plan.extras.push(("curvature_term".into(), Arc::new(t3)));
        self.push(plan);
        Ok(())
    }

    fn ctx(&self, space: &GaussianSpace, domain: &LevelSetDomain, x: &DVector<f64>) -> PointCtx {
        let s = space.sqrt_eigenvalues();
        PointCtx {
            jet: domain.jet(space, x),
            vhat: DVector::from_iterator(x.len(), x.iter().zip(s).map(|(a, b)| a / b)),
            fields: self
                .fields
                .iter()
                .map(|f| FieldJet {
                    value: f.value(x),
                    dh: h_coords(space, &f.gradient(x)),
                })
                .collect(),
            x: x.clone(),
        }
    }

    /// Evaluates every plan on `count` draws and on a surface quadrature of
    /// resolution `resolution` (compared against `2 resolution` for the
    /// error). Without a surface quadrature, surface terms use the kernel
    /// route on an independent substream.
    pub fn run(
        &self,
        space: &GaussianSpace,
        domain: &LevelSetDomain,
        state: SamplerState,
        count: usize,
        resolution: usize,
    ) -> Result<Vec<IdentityReport>> {
        if domain.dim() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                got: domain.dim(),
            });
        }
        for f in &self.fields {
            Self::check(space, f, None)?;
        }
        if count < 2 {
            return Err(Error::invalid("need at least two samples"));
        }
        if resolution == 0 {
            return Err(Error::invalid("surface resolution must be positive"));
        }

        // bulk integrands in a flat list
        let mut bulk: Vec<Integrand> = Vec::new();
        let mut bulk_slot = Vec::with_capacity(self.plans.len());
        for p in &self.plans {
            let mut slot = [None, None];
            for (s, side) in [&p.lhs, &p.rhs].into_iter().enumerate() {
                if let Some(f) = &side.bulk {
                    slot[s] = Some(bulk.len());
                    bulk.push(f.clone());
                }
            }
            let first_extra = bulk.len();
            bulk.extend(p.extras.iter().map(|e| e.1.clone()));
            bulk_slot.push((slot, first_extra));
        }
        let estimates = if bulk.is_empty() {
            Vec::new()
        } else {
            integrate(space, domain.proposal(space), state, count, bulk.len(), |x, out| {
                if domain.g().value(x) < 0.0 {
                    let c = self.ctx(space, domain, x);
                    for (o, f) in out.iter_mut().zip(&bulk) {
                        *o = f(&c);
                    }
                }
            })
        };

        let mut surf: Vec<Integrand> = Vec::new();
        let mut surf_slot = Vec::with_capacity(self.plans.len());
        for p in &self.plans {
            let mut slot = [None, None];
            for (s, side) in [&p.lhs, &p.rhs].into_iter().enumerate() {
                if let Some(f) = &side.surface {
                    slot[s] = Some(surf.len());
                    surf.push(f.clone());
                }
            }
            surf_slot.push(slot);
        }
        let mut kernel_route = false;
        let surface_vals: Vec<(f64, f64)> = if surf.is_empty() {
            Vec::new()
        } else {
            match self.surface_by_quadrature(space, domain, &surf, resolution) {
                Ok(v) => v,
                Err(Error::Unsupported(_)) => {
                    kernel_route = true;
                    let sub = state.substream(0x5u64);
                    surf.iter()
                        .enumerate()
                        .map(|(i, f)| {
                            let e = coarea_surface_integral(
                                space,
                                domain,
                                &|x| f(&self.ctx(space, domain, x)),
                                sub.substream(i as u64),
                                count,
                            )?;
                            Ok((e.mean, e.stderr))
                        })
                        .collect::<Result<_>>()?
                }
                Err(e) => return Err(e),
            }
        };

        let mut out = Vec::with_capacity(self.plans.len());
        for (pi, p) in self.plans.iter().enumerate() {
            let (bslot, first_extra) = bulk_slot[pi];
            let sslot = surf_slot[pi];
            let side = |s: usize| {
                let (mut v, mut e2) = (0.0, 0.0);
                if let Some(b) = bslot[s] {
                    v += estimates[b].mean;
                    e2 += estimates[b].stderr.powi(2);
                }
                if let Some(t) = sslot[s] {
                    v += surface_vals[t].0;
                    e2 += surface_vals[t].1.powi(2);
                }
                (v, e2.sqrt())
            };
            let mut r = IdentityReport::new(p.id, domain.label(), &p.phi_label, &p.k_or_q, side(0), side(1));
            for (j, (name, _)) in p.extras.iter().enumerate() {
                let e = estimates[first_extra + j];
                r.terms.push(NamedTerm {
                    name: name.clone(),
                    value: e.mean,
                    err: e.stderr,
                });
            }
            r.notes = p.notes.clone();
            if kernel_route && (sslot[0].is_some() || sslot[1].is_some()) {
                r.notes.push("surface term by kernel density route".into());
            }
            out.push(r);
        }
        Ok(out)
    }

    fn surface_by_quadrature(
        &self,
        space: &GaussianSpace,
        domain: &LevelSetDomain,
        surf: &[Integrand],
        resolution: usize,
    ) -> Result<Vec<(f64, f64)>> {
        let eval = |m: usize| -> Result<Vec<f64>> {
            let quad = surface_quadrature(space, domain, 0.0, m)?;
            let mut acc = vec![0.0; surf.len()];
            for (x, w) in quad.points.iter().zip(&quad.weights) {
                let c = self.ctx(space, domain, x);
                for (a, f) in acc.iter_mut().zip(surf) {
                    *a += w * f(&c);
                }
            }
            Ok(acc)
        };
        let coarse = eval(resolution)?;
        let fine = eval(2 * resolution)?;
        Ok(fine.iter().zip(&coarse).map(|(f, c)| (*f, (f - c).abs())).collect())
    }
}
