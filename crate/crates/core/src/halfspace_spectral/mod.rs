//! Halfspaces `O = {ĥ > 0}`: the splitting `X = span{h} ⊕ Y`, trace-space
//! norms on `Y`, the Mehler extension operator `E f(t, y) = e^{t²L_Y} f(y)`
//! and the boundary projection `P u = u − E(Tr u)`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::domains::{make_halfspace, LevelSetDomain};
use crate::error::{Error, Result};
use crate::gauss_core::hermite::hermite_table;
use crate::gauss_core::mc::integrate;
use crate::gauss_core::quadrature::{integrate_log_panels, TensorRule};
use crate::gauss_core::{mehler_apply, Estimate, GaussianSpace, HermiteExpansion, Proposal, SamplerState, ScalarField};

/// Coordinates `x = t h + y` with `h = v_j` a Cameron–Martin basis vector,
/// `t = x_j/√λ_j ~ N(0,1)` and `y` the remaining eigen coordinates.
#[derive(Clone, Debug)]
pub struct SplitSpace {
    parent: GaussianSpace,
    h_index: usize,
    y_space: GaussianSpace,
    y_indices: Vec<usize>,
}

/// Splits `space` along `v_{h_index}`.
pub fn split(space: &GaussianSpace, h_index: usize) -> Result<SplitSpace> {
    SplitSpace::new(space, h_index)
}

impl SplitSpace {
    pub fn new(space: &GaussianSpace, h_index: usize) -> Result<Self> {
        if h_index >= space.dim() {
            return Err(Error::IndexOutOfRange {
                index: h_index,
                dim: space.dim(),
            });
        }
        if space.dim() < 2 {
            return Err(Error::invalid("splitting needs dimension at least 2"));
        }
        let y_indices: Vec<usize> = (0..space.dim()).filter(|&k| k != h_index).collect();
        Ok(SplitSpace {
            parent: space.clone(),
            h_index,
            y_space: space.restrict(&y_indices)?,
            y_indices,
        })
    }

    pub fn parent(&self) -> &GaussianSpace {
        &self.parent
    }

    pub fn h_index(&self) -> usize {
        self.h_index
    }

    pub fn y_space(&self) -> &GaussianSpace {
        &self.y_space
    }

    pub fn y_dim(&self) -> usize {
        self.y_indices.len()
    }

    pub fn to_split(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        let t = x[self.h_index] / self.parent.sqrt_eigenvalues()[self.h_index];
        (
            t,
            DVector::from_iterator(self.y_dim(), self.y_indices.iter().map(|&k| x[k])),
        )
    }

    pub fn from_split(&self, t: f64, y: &DVector<f64>) -> DVector<f64> {
        let mut x = DVector::zeros(self.parent.dim());
        x[self.h_index] = t * self.parent.sqrt_eigenvalues()[self.h_index];
        for (i, &k) in self.y_indices.iter().enumerate() {
            x[k] = y[i];
        }
        x
    }

    /// `O = {t > 0}` as a level-set domain.
    pub fn halfspace(&self) -> Result<LevelSetDomain> {
        let mut c = vec![0.0; self.parent.dim()];
        c[self.h_index] = 1.0;
        make_halfspace(&self.parent, &c)
    }

    fn check_y(&self, f: &HermiteExpansion) -> Result<()> {
        if f.dim() != self.y_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.y_dim(),
                got: f.dim(),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TpMode {
    /// `∫_0^∞ t^{−(p+1)/2} ‖e^{tL}f − f‖_p^p dt`.
    Interp1,
    /// `∫_0^∞ t^{(p−1)/2} ‖L e^{tL}f‖_p^p dt`.
    Interp2,
    /// `∫_0^∞ λ^{(p−3)/2} ‖L(λ − L)^{-1}f‖_p^p dλ`.
    Interp3,
}

impl TpMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            TpMode::Interp1 => "interp1",
            TpMode::Interp2 => "interp2",
            TpMode::Interp3 => "interp3",
        }
    }
}

/// Log-spaced integration range. Contributions outside `[t_min, t_max]`
/// (`[t_min, lambda_max]` for the resolvent form) come from asymptotic
/// expansions of the integrand.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub lambda_max: f64,
    pub panels: usize,
    pub order: usize,
}

impl Default for TimeGrid {
    fn default() -> Self {
        TimeGrid {
            t_min: 1e-6,
            t_max: 50.0,
            lambda_max: 1e6,
            panels: 48,
            order: 16,
        }
    }
}

/// The `p`-th root of the trace-space seminorm integral in the given form.
/// Returns `+∞` when the integral does not come out finite.
pub fn tp_seminorm(split: &SplitSpace, f: &HermiteExpansion, p: f64, mode: TpMode, grid: &TimeGrid) -> Result<f64> {
    split.check_y(f)?;
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::invalid(format!("exponent p must exceed 1, got {p}")));
    }
    if !(grid.t_min > 0.0 && grid.t_max > grid.t_min && grid.lambda_max > grid.t_min) || grid.panels == 0 {
        return Err(Error::invalid("invalid time grid"));
    }
    let total = if p == 2.0 {
        spectral_p2(f, mode, grid)
    } else {
        lp_integral(split, f, p, mode, grid)?
    };
    let v = total.max(0.0).powf(1.0 / p);
    Ok(if v.is_finite() { v } else { f64::INFINITY })
}

fn spectral_p2(f: &HermiteExpansion, mode: TpMode, g: &TimeGrid) -> f64 {
    let w = f.degree_norms_sq();
    let modes: Vec<(f64, f64)> = w
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, c)| **c != 0.0)
        .map(|(k, c)| (k as f64, *c))
        .collect();
    let (a, b) = (g.t_min, g.t_max);
    match mode {
        TpMode::Interp1 => {
            let body = integrate_log_panels(
                |t| modes.iter().map(|(k, c)| c * (-(-k * t).exp_m1()).powi(2)).sum::<f64>() * t.powf(-1.5),
                a,
                b,
                g.panels,
                g.order,
            );
            let head: f64 = modes
                .iter()
                .map(|(k, c)| {
                    c * (k * k * 2.0 / 3.0 * a.powf(1.5) - k.powi(3) * 0.4 * a.powf(2.5)
                        + 7.0 / 12.0 * k.powi(4) * 2.0 / 7.0 * a.powf(3.5))
                })
                .sum();
            let tail = 2.0 / b.sqrt() * modes.iter().map(|m| m.1).sum::<f64>();
            head + body + tail
        }
        TpMode::Interp2 => {
            let body = integrate_log_panels(
                |t| modes.iter().map(|(k, c)| c * k * k * (-2.0 * k * t).exp()).sum::<f64>() * t.sqrt(),
                a,
                b,
                g.panels,
                g.order,
            );
            let head: f64 = modes
                .iter()
                .map(|(k, c)| c * k * k * (2.0 / 3.0 * a.powf(1.5) - 0.8 * k * a.powf(2.5)))
                .sum();
            head + body
        }
        TpMode::Interp3 => {
            let b = g.lambda_max;
            let panels = g.panels * 2;
            let body = integrate_log_panels(
                |l| modes.iter().map(|(k, c)| c * (k / (l + k)).powi(2)).sum::<f64>() / l.sqrt(),
                a,
                b,
                panels,
                g.order,
            );
            let head: f64 = modes
                .iter()
                .map(|(k, c)| c * (2.0 * a.sqrt() - 4.0 / 3.0 * a.powf(1.5) / k + 1.2 * a.powf(2.5) / (k * k)))
                .sum();
            let tail: f64 = modes
                .iter()
                .map(|(k, c)| {
                    c * k * k * (2.0 / 3.0 * b.powf(-1.5) - 0.8 * k * b.powf(-2.5) + 6.0 / 7.0 * k * k * b.powf(-3.5))
                })
                .sum();
            head + body + tail
        }
    }
}

/// `‖g‖_p^p` over `μ_Y` by tensor Gauss–Hermite quadrature, for `g` given
/// by its degree components tabulated at the quadrature nodes.
struct NodeTable {
    weights: Vec<f64>,
    /// `parts[i][k]`: degree-`k` component of `f` at node `i`.
    parts: Vec<Vec<f64>>,
}

impl NodeTable {
    fn new(y: &GaussianSpace, f: &HermiteExpansion, order: usize) -> Result<Self> {
        let rule = TensorRule::gauss_hermite(order, y.dim())?;
        let deg = f.max_degree();
        let mut weights = Vec::with_capacity(rule.len());
        let mut parts = Vec::with_capacity(rule.len());
        rule.for_each(|z, w| {
            let tabs: Vec<Vec<f64>> = z.iter().map(|&u| hermite_table(deg, u)).collect();
            let mut row = vec![0.0; deg + 1];
            for (a, c) in f.coeffs() {
                let d: usize = a.iter().map(|m| *m as usize).sum();
                row[d] += c * a.iter().enumerate().map(|(k, &m)| tabs[k][m as usize]).product::<f64>();
            }
            weights.push(w);
            parts.push(row);
        });
        Ok(NodeTable { weights, parts })
    }

    /// `∫ |Σ_k m(k) f_k|^p dμ_Y`.
    fn lp(&self, p: f64, m: impl Fn(f64) -> f64) -> f64 {
        let mult: Vec<f64> = (0..self.parts.first().map_or(0, |r| r.len()))
            .map(|k| m(k as f64))
            .collect();
        self.parts
            .iter()
            .zip(&self.weights)
            .map(|(row, w)| w * row.iter().zip(&mult).map(|(a, b)| a * b).sum::<f64>().abs().powf(p))
            .sum()
    }
}

fn lp_integral(split: &SplitSpace, f: &HermiteExpansion, p: f64, mode: TpMode, g: &TimeGrid) -> Result<f64> {
    let order = (2 * f.max_degree() + 24).min(64);
    let tab = NodeTable::new(split.y_space(), f, order)?;
    let (a, b) = (g.t_min, g.t_max);
    let lf = tab.lp(p, |k| k);
    let centred = tab.lp(p, |k| if k == 0.0 { 0.0 } else { 1.0 });
    Ok(match mode {
        TpMode::Interp1 => {
            let body = integrate_log_panels(
                |t| t.powf(-(p + 1.0) / 2.0) * tab.lp(p, |k| (-k * t).exp_m1()),
                a,
                b,
                g.panels,
                g.order,
            );
            lf * 2.0 / (p + 1.0) * a.powf((p + 1.0) / 2.0) + body + centred * 2.0 / (p - 1.0) * b.powf((1.0 - p) / 2.0)
        }
        TpMode::Interp2 => {
            let body = integrate_log_panels(
                |t| t.powf((p - 1.0) / 2.0) * tab.lp(p, |k| k * (-k * t).exp()),
                a,
                b,
                g.panels,
                g.order,
            );
            lf * 2.0 / (p + 1.0) * a.powf((p + 1.0) / 2.0) + body
        }
        TpMode::Interp3 => {
            let b = g.lambda_max;
            let body = integrate_log_panels(
                |l| l.powf((p - 3.0) / 2.0) * tab.lp(p, |k| k / (l + k)),
                a,
                b,
                g.panels * 2,
                g.order,
            );
            centred * 2.0 / (p - 1.0) * a.powf((p - 1.0) / 2.0) + body + lf * 2.0 / (p + 1.0) * b.powf(-(p + 1.0) / 2.0)
        }
    })
}

/// `(‖f‖² + Σ_k k^{1/2} ‖I_k f‖²)^{1/2}` on `L²(μ_Y)`.
pub fn t2_norm_spectral(split: &SplitSpace, f: &HermiteExpansion) -> Result<f64> {
    split.check_y(f)?;
    Ok(t2_norm(f))
}

fn t2_norm(f: &HermiteExpansion) -> f64 {
    f.degree_norms_sq()
        .iter()
        .enumerate()
        .map(|(k, w)| (1.0 + (k as f64).sqrt()) * w)
        .sum::<f64>()
        .sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceNormReport {
    pub f_label: String,
    pub interp1: f64,
    pub interp2: f64,
    pub interp3: f64,
    pub interp4: f64,
    /// Largest quotient `a/b` over ordered pairs of the four values, or NaN
    /// when one of them vanishes.
    pub ratio_max: f64,
}

impl TraceNormReport {
    pub fn values(&self) -> [f64; 4] {
        [self.interp1, self.interp2, self.interp3, self.interp4]
    }
}

/// The three seminorms and the spectral norm at `p = 2` for each function.
pub fn trace_norm_table(
    split: &SplitSpace,
    family: &[(String, HermiteExpansion)],
    grid: &TimeGrid,
) -> Result<Vec<TraceNormReport>> {
    family
        .iter()
        .map(|(label, f)| {
            let v = [
                tp_seminorm(split, f, 2.0, TpMode::Interp1, grid)?,
                tp_seminorm(split, f, 2.0, TpMode::Interp2, grid)?,
                tp_seminorm(split, f, 2.0, TpMode::Interp3, grid)?,
                t2_norm_spectral(split, f)?,
            ];
            let ratio_max = if v.iter().all(|x| *x > 0.0 && x.is_finite()) {
                let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
                hi / lo
            } else {
                f64::NAN
            };
            Ok(TraceNormReport {
                f_label: label.clone(),
                interp1: v[0],
                interp2: v[1],
                interp3: v[2],
                interp4: v[3],
                ratio_max,
            })
        })
        .collect()
}

pub fn write_trace_norms_csv(path: &Path, rows: &[TraceNormReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["f_label", "interp1", "interp2", "interp3", "interp4", "ratio_max"])?;
    for r in rows {
        w.write_record([
            r.f_label.clone(),
            r.interp1.to_string(),
            r.interp2.to_string(),
            r.interp3.to_string(),
            r.interp4.to_string(),
            r.ratio_max.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `h_k` along the first axis of `Y` for `k = 0..=max_degree`, labelled `h{k}`.
pub fn hermite_family(split: &SplitSpace, max_degree: u32) -> Result<Vec<(String, HermiteExpansion)>> {
    (0..=max_degree)
        .map(|k| Ok((format!("h{k}"), HermiteExpansion::axis_mode(split.y_space(), 0, k)?)))
        .collect()
}

/// `terms` Hermite modes of total degree in `1..=max_degree` on `Y` with
/// standard normal coefficients.
pub fn random_combination(
    split: &SplitSpace,
    terms: usize,
    max_degree: usize,
    state: SamplerState,
) -> Result<HermiteExpansion> {
    if max_degree == 0 {
        return Err(Error::invalid("random combinations need max_degree ≥ 1"));
    }
    let mut rng = state.rng();
    let d = split.y_dim();
    let mut e = HermiteExpansion::new(split.y_space(), max_degree);
    for _ in 0..terms {
        let deg = rng.random_range(1..=max_degree);
        let mut a = vec![0u32; d];
        for _ in 0..deg {
            a[rng.random_range(0..d)] += 1;
        }
        let c: f64 = rng.sample(rand_distr::StandardNormal);
        e.add_term(a, c)?;
    }
    Ok(e)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// `E f(t, y) = (T_Y(t²) f)(y)` by Mehler quadrature on `Y`.
pub fn extension_apply(
    split: &SplitSpace,
    f: &ScalarField,
    t: f64,
    y: &DVector<f64>,
    quad_order: usize,
) -> Result<f64> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("extension needs t ≥ 0, got {t}")));
    }
    if f.dim() != split.y_dim() {
        return Err(Error::DimensionMismatch {
            expected: split.y_dim(),
            got: f.dim(),
        });
    }
    mehler_apply(split.y_space(), f, t * t, y, quad_order)
}

/// `E f(t, y) = Σ e^{−|α|t²} c_α H_α(y)` for a Hermite expansion on `Y`.
pub fn extension_spectral(f: &HermiteExpansion, t: f64, y: &DVector<f64>) -> f64 {
    f.semigroup(t * t).eval(y)
}

/// `E f` as a field on `X`, with analytic gradient.
pub fn extension_field(split: &SplitSpace, f: &HermiteExpansion) -> Result<ScalarField> {
    split.check_y(f)?;
    let (s1, s2) = (split.clone(), split.clone());
    let (f1, f2) = (f.clone(), f.clone());
    let sj = split.parent().sqrt_eigenvalues()[split.h_index()];
    Ok(ScalarField::with_gradient(
        "E f",
        split.parent().dim(),
        move |x| {
            let (t, y) = s1.to_split(x);
            f1.semigroup(t * t).eval(&y)
        },
        move |x| {
            let (t, y) = s2.to_split(x);
            let g = f2.semigroup(t * t);
            let dt = 2.0 * t * g.ou().eval(&y);
            let gy = g.gradient(&y);
            let mut out = DVector::zeros(s2.parent().dim());
            out[s2.h_index()] = dt / sj;
            for (i, &k) in s2.y_indices.iter().enumerate() {
                out[k] = gy[i];
            }
            out
        },
    ))
}

/// `Tr u(y) = u(0, y)` as a field on `Y`.
pub fn trace_field(split: &SplitSpace, u: &ScalarField) -> ScalarField {
    let s = split.clone();
    let u2 = u.clone();
    ScalarField::from_value(format!("Tr {}", u.label()), split.y_dim(), move |y| {
        u2.value(&s.from_split(0.0, y))
    })
}

/// `P u (x) = u(x) − E(Tr u)(x)`.
pub fn projection_apply(split: &SplitSpace, u: &ScalarField, x: &DVector<f64>, quad_order: usize) -> Result<f64> {
    if u.dim() != split.parent().dim() {
        return Err(Error::DimensionMismatch {
            expected: split.parent().dim(),
            got: u.dim(),
        });
    }
    let (t, y) = split.to_split(x);
    if t < 0.0 {
        return Err(Error::invalid("projection is defined on t ≥ 0"));
    }
    Ok(u.value(x) - extension_apply(split, &trace_field(split, u), t, &y, quad_order)?)
}

/// [`projection_apply`] as a field (derivatives by finite differences).
pub fn projection_field(split: &SplitSpace, u: &ScalarField, quad_order: usize) -> ScalarField {
    let (s, u2) = (split.clone(), u.clone());
    ScalarField::from_value(format!("P {}", u.label()), split.parent().dim(), move |x| {
        let (t, y) = s.to_split(x);
        u2.value(x) - mehler_apply(s.y_space(), &trace_field(&s, &u2), t * t, &y, quad_order).unwrap_or(f64::NAN)
    })
}

#[derive(Clone, Debug)]
pub struct ExtensionRow {
    pub label: String,
    pub degree: usize,
    /// `‖E f‖²_{L²(O)}`.
    pub l2_sq: Estimate,
    /// `‖D_H E f‖²_{L²(O)}`.
    pub grad_sq: Estimate,
    /// `‖E f‖_{L²(O)} + ‖D_H E f‖_{L²(O)}`.
    pub w12_norm: f64,
    pub t2_norm: f64,
    pub ratio: f64,
    pub ratio_err: f64,
}

#[derive(Clone, Debug)]
pub struct ExtensionBoundReport {
    pub rows: Vec<ExtensionRow>,
    pub max_ratio: f64,
    /// Log-log slope of the ratio against degree over rows of degree ≥ 1.
    pub slope: f64,
}

/// `‖E f‖_{W^{1,2}(O)} / ‖f‖_{T_2}` for each function: Monte Carlo in the
/// normal variable `t` and Gauss–Hermite quadrature over `Y`.
pub fn verify_extension_bound(
    split: &SplitSpace,
    family: &[(String, HermiteExpansion)],
    state: SamplerState,
    count: usize,
) -> Result<ExtensionBoundReport> {
    let line = GaussianSpace::standard(1)?;
    let ys = split.y_space().sqrt_eigenvalues().to_vec();
    let mut rows = Vec::with_capacity(family.len());
    for (i, (label, f)) in family.iter().enumerate() {
        split.check_y(f)?;
        let deg = f.max_degree();
        let rule = TensorRule::gauss_hermite(deg + 2, split.y_dim())?;
        // degree components of value and H-gradient at each node
        let mut nodes: Vec<(f64, DMatrix<f64>)> = Vec::with_capacity(rule.len());
        rule.for_each(|z, w| {
            let y = DVector::from_iterator(z.len(), z.iter().zip(&ys).map(|(a, b)| a * b));
            let mut m = DMatrix::zeros(deg + 1, 1 + y.len());
            for k in 0..=deg {
                let fk = f.map_degree(|d| if d == k { 1.0 } else { 0.0 });
                m[(k, 0)] = fk.eval(&y);
                let g = fk.gradient(&y);
                for j in 0..y.len() {
                    m[(k, 1 + j)] = g[j] * ys[j];
                }
            }
            nodes.push((w, m));
        });
        let est = integrate(
            &line,
            Proposal::Gaussian,
            state.substream(i as u64),
            count,
            2,
            |x, out| {
                let t = x[0];
                if t <= 0.0 {
                    return;
                }
                let decay: Vec<f64> = (0..=deg).map(|k| (-(k as f64) * t * t).exp()).collect();
                let (mut a, mut b) = (0.0, 0.0);
                for (w, m) in &nodes {
                    let mut v = 0.0;
                    let mut dt = 0.0;
                    let mut gy = vec![0.0; m.ncols() - 1];
                    for k in 0..=deg {
                        v += decay[k] * m[(k, 0)];
                        dt += -2.0 * t * k as f64 * decay[k] * m[(k, 0)];
                        for (j, g) in gy.iter_mut().enumerate() {
                            *g += decay[k] * m[(k, 1 + j)];
                        }
                    }
                    a += w * v * v;
                    b += w * (dt * dt + gy.iter().map(|g| g * g).sum::<f64>());
                }
                out[0] = a;
                out[1] = b;
            },
        );
        let (l2, gr) = (est[0], est[1]);
        let (na, nb) = (l2.mean.sqrt(), gr.mean.sqrt());
        let w12 = na + nb;
        let ea = if na > 0.0 { l2.stderr / (2.0 * na) } else { 0.0 };
        let eb = if nb > 0.0 { gr.stderr / (2.0 * nb) } else { 0.0 };
        let t2 = t2_norm(f);
        rows.push(ExtensionRow {
            label: label.clone(),
            degree: f.degree(),
            l2_sq: l2,
            grad_sq: gr,
            w12_norm: w12,
            t2_norm: t2,
            ratio: w12 / t2,
            ratio_err: ea.hypot(eb) / t2,
        });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.degree >= 1)
        .map(|r| (r.degree as f64, r.ratio))
        .unzip();
    let slope = if xs.len() >= 2 {
        loglog_slope(&xs, &ys)
    } else {
        f64::NAN
    };
    Ok(ExtensionBoundReport {
        max_ratio: rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max),
        rows,
        slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn plane() -> SplitSpace {
        split(&GaussianSpace::standard(2).unwrap(), 0).unwrap()
    }

    fn closed_forms(k: u32) -> [f64; 3] {
        let s = (k as f64).sqrt();
        let c1 = 2.0 * PI.sqrt() * (2.0 - 2f64.sqrt());
        let c2 = 0.5 * PI.sqrt() * 2f64.powf(-1.5);
        let c3 = PI / 2.0;
        [(c1 * s).sqrt(), (c2 * s).sqrt(), (c3 * s).sqrt()]
    }

    #[test]
    fn split_coordinates() {
        let s = GaussianSpace::diagonal(vec![1.0, 4.0, 9.0]).unwrap();
        let sp = split(&s, 1).unwrap();
        assert_eq!(sp.y_space().eigenvalues(), &[1.0, 9.0]);
        let x = DVector::from_vec(vec![0.3, -1.7, 2.2]);
        let (t, y) = sp.to_split(&x);
        assert!((t + 0.85).abs() < 1e-15);
        assert!((sp.from_split(t, &y) - &x).norm() < 1e-14);
        assert!(split(&s, 3).is_err());
        assert!(split(&GaussianSpace::standard(1).unwrap(), 0).is_err());
        let d = sp.halfspace().unwrap();
        assert!(d.contains(&DVector::from_vec(vec![0.0, 0.1, 0.0])));
        assert!(!d.contains(&DVector::from_vec(vec![0.0, -0.1, 0.0])));
    }

    #[test]
    fn seminorms_of_modes_match_closed_forms() {
        let sp = plane();
        let g = TimeGrid::default();
        for k in [1u32, 2, 5, 12] {
            let f = HermiteExpansion::axis_mode(sp.y_space(), 0, k).unwrap();
            let want = closed_forms(k);
            for (m, w) in [TpMode::Interp1, TpMode::Interp2, TpMode::Interp3]
                .into_iter()
                .zip(want)
            {
                let v = tp_seminorm(&sp, &f, 2.0, m, &g).unwrap();
                assert!((v - w).abs() < 1e-8 * w, "{m:?} k={k}: {v} vs {w}");
            }
        }
        let one = HermiteExpansion::axis_mode(sp.y_space(), 0, 0).unwrap();
        for m in [TpMode::Interp1, TpMode::Interp2, TpMode::Interp3] {
            assert_eq!(tp_seminorm(&sp, &one, 2.0, m, &g).unwrap(), 0.0);
        }
        let h1 = HermiteExpansion::axis_mode(sp.y_space(), 0, 1).unwrap();
        assert!(tp_seminorm(&sp, &h1, 1.0, TpMode::Interp1, &g).is_err());
    }

    #[test]
    fn quadrature_route_agrees_with_spectral_at_p2() {
        let sp = plane();
        let g = TimeGrid::default();
        let f = HermiteExpansion::from_terms(sp.y_space(), 3, [(vec![1], 0.7), (vec![3], -0.4)]).unwrap();
        for m in [TpMode::Interp1, TpMode::Interp2, TpMode::Interp3] {
            let a = tp_seminorm(&sp, &f, 2.0, m, &g).unwrap();
            let b = lp_integral(&sp, &f, 2.0, m, &g).unwrap().sqrt();
            assert!((a - b).abs() < 1e-7 * a, "{m:?}: {a} vs {b}");
        }
        let v = tp_seminorm(&sp, &f, 3.0, TpMode::Interp2, &g).unwrap();
        assert!(v.is_finite() && v > 0.0);
    }

    #[test]
    fn t2_examples() {
        let sp = plane();
        let h3 = HermiteExpansion::axis_mode(sp.y_space(), 0, 3).unwrap();
        assert!((t2_norm_spectral(&sp, &h3).unwrap() - (1.0 + 3f64.sqrt()).sqrt()).abs() < 1e-12);
        let one = HermiteExpansion::axis_mode(sp.y_space(), 0, 0).unwrap();
        assert_eq!(t2_norm_spectral(&sp, &one).unwrap(), 1.0);
        let f = HermiteExpansion::from_terms(sp.y_space(), 4, [(vec![1], 1.0), (vec![4], 1.0)]).unwrap();
        assert!((t2_norm_spectral(&sp, &f).unwrap() - 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn homogeneity() {
        let sp = plane();
        let g = TimeGrid::default();
        let f = random_combination(&sp, 5, 6, SamplerState::new(1, 0)).unwrap();
        let c = -2.75;
        let fc = f.scaled(c);
        for m in [TpMode::Interp1, TpMode::Interp2, TpMode::Interp3] {
            let a = tp_seminorm(&sp, &f, 2.0, m, &g).unwrap();
            let b = tp_seminorm(&sp, &fc, 2.0, m, &g).unwrap();
            assert!((b - c.abs() * a).abs() < 1e-10 * b);
        }
        let a = t2_norm_spectral(&sp, &f).unwrap();
        assert!((t2_norm_spectral(&sp, &fc).unwrap() - c.abs() * a).abs() < 1e-10 * a);
    }

    #[test]
    fn extension_and_projection() {
        let sp = plane();
        let f = HermiteExpansion::axis_mode(sp.y_space(), 0, 2).unwrap();
        let ff = f.to_field("h2");
        for (t, y) in [(0.0, 0.4), (0.5, -1.1), (1.3, 2.0)] {
            let y = DVector::from_vec(vec![y]);
            let e = extension_apply(&sp, &ff, t, &y, 8).unwrap();
            let want = (-2.0 * t * t).exp() * f.eval(&y);
            assert!((e - want).abs() < 1e-12);
            assert!((extension_spectral(&f, t, &y) - want).abs() < 1e-12);
        }
        assert!(extension_apply(&sp, &ff, -0.1, &DVector::zeros(1), 8).is_err());
        let ef = extension_field(&sp, &f).unwrap();
        let probes = crate::gauss_core::field::random_probes(2, SamplerState::new(2, 0), 10, 1.0);
        assert!(crate::gauss_core::field::check_gradient(&ef, &probes) < 1e-7);

        // u = t + h1(y)
        let h1 = HermiteExpansion::axis_mode(sp.y_space(), 0, 1).unwrap();
        let u = ScalarField::from_value("t+h1", 2, |x| x[0] + x[1]);
        for (t, y) in [(0.0, 0.3), (0.7, -0.4), (1.5, 1.2)] {
            let yv = DVector::from_vec(vec![y]);
            let x = sp.from_split(t, &yv);
            let pu = projection_apply(&sp, &u, &x, 8).unwrap();
            let want = t + h1.eval(&yv) - (-t * t).exp() * h1.eval(&yv);
            assert!((pu - want).abs() < 1e-12);
            let pf = projection_field(&sp, &u, 8);
            let ppu = projection_apply(&sp, &pf, &x, 8).unwrap();
            assert!((ppu - pu).abs() < 1e-10);
            assert!(projection_apply(&sp, &pf, &sp.from_split(0.0, &yv), 8).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn extension_bound_examples() {
        let sp = plane();
        let fam = hermite_family(&sp, 4).unwrap();
        let r = verify_extension_bound(&sp, &fam, SamplerState::new(3, 0), 200_000).unwrap();
        assert!((r.rows[0].ratio - 0.5f64.sqrt()).abs() < 4.0 * r.rows[0].ratio_err);
        for row in &r.rows {
            let k = row.degree as f64;
            let l2 = 0.5 / (1.0 + 4.0 * k).sqrt();
            let gr = 2.0 * k * k * (1.0 + 4.0 * k).powf(-1.5) + 0.5 * k / (1.0 + 4.0 * k).sqrt();
            assert!(row.l2_sq.agrees_with(l2, 4.0), "{row:?}");
            assert!(row.grad_sq.agrees_with(gr, 4.0), "{row:?}");
        }
    }

    #[test]
    fn slope_fit() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.5)).collect();
        assert!((loglog_slope(&x, &y) + 0.5).abs() < 1e-12);
    }
}
