//! Normalised Hermite polynomials and finite Hermite expansions.
//!
//! On `N(0, Q)` the basis is `H_α(x) = Π_k h_{α_k}(x_k / √λ_k)`, with `h_m` the
//! probabilists' Hermite polynomial scaled to unit `L²(N(0,1))` norm. These are
//! orthonormal in `L²(μ)` and satisfy `L H_α = −|α| H_α`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::field::ScalarField;
use super::quadrature::TensorRule;
use super::space::GaussianSpace;
use crate::error::{Error, Result};

pub type MultiIndex = Vec<u32>;

/// `[h_0(u), …, h_m(u)]`.
pub fn hermite_table(m: usize, u: f64) -> Vec<f64> {
    let mut t = Vec::with_capacity(m + 1);
    t.push(1.0);
    if m >= 1 {
        t.push(u);
    }
    for k in 1..m {
        let next = (u * t[k] - (k as f64).sqrt() * t[k - 1]) / ((k + 1) as f64).sqrt();
        t.push(next);
    }
    t
}

pub fn hermite_normalized(m: usize, u: f64) -> f64 {
    hermite_table(m, u)[m]
}

/// Values, first and second derivatives of `h_0..h_m` at `u`.
fn hermite_jet(m: usize, u: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let t = hermite_table(m, u);
    let d1 = (0..=m)
        .map(|k| if k >= 1 { (k as f64).sqrt() * t[k - 1] } else { 0.0 })
        .collect();
    let d2 = (0..=m)
        .map(|k| {
            if k >= 2 {
                ((k * (k - 1)) as f64).sqrt() * t[k - 2]
            } else {
                0.0
            }
        })
        .collect();
    (t, d1, d2)
}

/// All multi-indices of length `dim` with total degree at most `max_degree`,
/// ordered by degree and then lexicographically.
pub fn multi_indices(dim: usize, max_degree: usize) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    for d in 0..=max_degree {
        let mut cur = vec![0u32; dim];
        fill(&mut out, &mut cur, 0, d as u32);
    }
    out
}

fn fill(out: &mut Vec<MultiIndex>, cur: &mut MultiIndex, pos: usize, left: u32) {
    if pos + 1 == cur.len() {
        cur[pos] = left;
        out.push(cur.clone());
        return;
    }
    if cur.is_empty() {
        if left == 0 {
            out.push(Vec::new());
        }
        return;
    }
    for a in (0..=left).rev() {
        cur[pos] = a;
        fill(out, cur, pos + 1, left - a);
    }
    cur[pos] = 0;
}

#[derive(Clone, Debug, PartialEq)]
pub struct HermiteExpansion {
    sqrt_eigs: Vec<f64>,
    max_degree: usize,
    coeffs: BTreeMap<MultiIndex, f64>,
}

impl HermiteExpansion {
    pub fn new(space: &GaussianSpace, max_degree: usize) -> Self {
        HermiteExpansion {
            sqrt_eigs: space.sqrt_eigenvalues().to_vec(),
            max_degree,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn from_terms(
        space: &GaussianSpace,
        max_degree: usize,
        terms: impl IntoIterator<Item = (MultiIndex, f64)>,
    ) -> Result<Self> {
        let mut e = Self::new(space, max_degree);
        for (a, c) in terms {
            e.add_term(a, c)?;
        }
        Ok(e)
    }

    /// A single basis element `H_α`.
    pub fn basis(space: &GaussianSpace, alpha: MultiIndex) -> Result<Self> {
        let d = alpha.iter().sum::<u32>() as usize;
        Self::from_terms(space, d, [(alpha, 1.0)])
    }

    /// `h_k` along axis `axis`.
    pub fn axis_mode(space: &GaussianSpace, axis: usize, k: u32) -> Result<Self> {
        space.check_index(axis)?;
        let mut a = vec![0; space.dim()];
        a[axis] = k;
        Self::basis(space, a)
    }

    pub fn add_term(&mut self, alpha: MultiIndex, c: f64) -> Result<()> {
        if alpha.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: alpha.len(),
            });
        }
        let d = alpha.iter().sum::<u32>() as usize;
        if d > self.max_degree {
            return Err(Error::invalid(format!(
                "multi-index of degree {d} exceeds truncation degree {}",
                self.max_degree
            )));
        }
        *self.coeffs.entry(alpha).or_insert(0.0) += c;
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.sqrt_eigs.len()
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn coeffs(&self) -> &BTreeMap<MultiIndex, f64> {
        &self.coeffs
    }

    pub fn coeff(&self, alpha: &[u32]) -> f64 {
        self.coeffs.get(alpha).copied().unwrap_or(0.0)
    }

    /// Highest degree carrying a nonzero coefficient.
    pub fn degree(&self) -> usize {
        self.coeffs
            .iter()
            .filter(|(_, c)| **c != 0.0)
            .map(|(a, _)| a.iter().sum::<u32>() as usize)
            .max()
            .unwrap_or(0)
    }

    /// `‖I_k f‖²` for `k = 0..=max_degree`.
    pub fn degree_norms_sq(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.max_degree + 1];
        for (a, c) in &self.coeffs {
            v[a.iter().sum::<u32>() as usize] += c * c;
        }
        v
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs.values().map(|c| c * c).sum()
    }

    /// Multiplies the coefficient of each `H_α` by `m(|α|)`; this applies any
    /// function of the Ornstein–Uhlenbeck operator.
    pub fn map_degree(&self, m: impl Fn(usize) -> f64) -> Self {
        let mut e = self.clone();
        for (a, c) in e.coeffs.iter_mut() {
            *c *= m(a.iter().sum::<u32>() as usize);
        }
        e
    }

    /// `T(t) f = Σ e^{−|α|t} c_α H_α`.
    pub fn semigroup(&self, t: f64) -> Self {
        self.map_degree(|k| (-(k as f64) * t).exp())
    }

    /// `L f = −Σ |α| c_α H_α`.
    pub fn ou(&self) -> Self {
        self.map_degree(|k| -(k as f64))
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map_degree(|_| s)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if other.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        let mut e = self.clone();
        e.max_degree = self.max_degree.max(other.max_degree);
        for (a, c) in &other.coeffs {
            *e.coeffs.entry(a.clone()).or_insert(0.0) += c;
        }
        Ok(e)
    }

    fn tables(&self, x: &DVector<f64>) -> Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        (0..self.dim())
            .map(|k| hermite_jet(self.max_degree, x[k] / self.sqrt_eigs[k]))
            .collect()
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        let tabs: Vec<Vec<f64>> = (0..self.dim())
            .map(|k| hermite_table(self.max_degree, x[k] / self.sqrt_eigs[k]))
            .collect();
        self.coeffs
            .iter()
            .map(|(a, c)| c * a.iter().enumerate().map(|(k, &m)| tabs[k][m as usize]).product::<f64>())
            .sum()
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let tabs = self.tables(x);
        let mut g = DVector::zeros(n);
        for (a, c) in &self.coeffs {
            for j in 0..n {
                let mut p = *c / self.sqrt_eigs[j];
                for (k, &m) in a.iter().enumerate() {
                    p *= if k == j {
                        tabs[k].1[m as usize]
                    } else {
                        tabs[k].0[m as usize]
                    };
                }
                g[j] += p;
            }
        }
        g
    }

    pub fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim();
        let tabs = self.tables(x);
        let mut h = DMatrix::zeros(n, n);
        for (a, c) in &self.coeffs {
            for i in 0..n {
                for j in 0..=i {
                    let mut p = *c / (self.sqrt_eigs[i] * self.sqrt_eigs[j]);
                    for (k, &m) in a.iter().enumerate() {
                        let m = m as usize;
                        p *= if i == j && k == i {
                            tabs[k].2[m]
                        } else if k == i || k == j {
                            tabs[k].1[m]
                        } else {
                            tabs[k].0[m]
                        };
                    }
                    h[(i, j)] += p;
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                h[(j, i)] = h[(i, j)];
            }
        }
        h
    }

    /// The represented polynomial as a field with analytic derivatives.
    pub fn to_field(&self, label: impl Into<String>) -> ScalarField {
        let (a, b, c) = (self.clone(), self.clone(), self.clone());
        ScalarField::new(
            label,
            self.dim(),
            move |x| a.eval(x),
            move |x| b.gradient(x),
            move |x| c.hessian(x),
        )
    }
}

/// `H_α` as a field.
pub fn hermite_basis_field(space: &GaussianSpace, alpha: MultiIndex) -> Result<ScalarField> {
    let label = format!("H{alpha:?}");
    Ok(HermiteExpansion::basis(space, alpha)?.to_field(label))
}

/// Coefficients `⟨f, H_α⟩_{L²(μ)}` for `|α| ≤ max_degree`, by tensor Gauss
/// quadrature of order `quad_order` per axis.
pub fn hermite_transform(
    space: &GaussianSpace,
    f: &ScalarField,
    max_degree: usize,
    quad_order: usize,
) -> Result<HermiteExpansion> {
    if quad_order <= max_degree {
        return Err(Error::invalid(format!(
            "quad_order ({quad_order}) must exceed max_degree ({max_degree})"
        )));
    }
    let n = space.dim();
    let rule = TensorRule::gauss_hermite(quad_order, n)?;
    let indices = multi_indices(n, max_degree);
    let mut acc = vec![0.0; indices.len()];
    let s = space.sqrt_eigenvalues();
    rule.for_each(|z, w| {
        let x = DVector::from_iterator(n, z.iter().zip(s).map(|(a, b)| a * b));
        let fx = f.value(&x) * w;
        let tabs: Vec<Vec<f64>> = z.iter().map(|&u| hermite_table(max_degree, u)).collect();
        for (slot, a) in acc.iter_mut().zip(&indices) {
            *slot += fx * a.iter().enumerate().map(|(k, &m)| tabs[k][m as usize]).product::<f64>();
        }
    });
    let mut e = HermiteExpansion::new(space, max_degree);
    for (a, c) in indices.into_iter().zip(acc) {
        if c != 0.0 {
            e.coeffs.insert(a, c);
        }
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss_core::field::{check_gradient, check_hessian, random_probes};
    use crate::gauss_core::SamplerState;

    #[test]
    fn table_matches_explicit_polynomials() {
        let u: f64 = 0.83;
        let t = hermite_table(4, u);
        assert!((t[2] - (u * u - 1.0) / 2f64.sqrt()).abs() < 1e-15);
        assert!((t[3] - (u.powi(3) - 3.0 * u) / 6f64.sqrt()).abs() < 1e-15);
        assert!((t[4] - (u.powi(4) - 6.0 * u * u + 3.0) / 24f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn multi_index_count() {
        // C(n + D, D)
        assert_eq!(multi_indices(3, 4).len(), 35);
        assert_eq!(multi_indices(1, 5).len(), 6);
        assert!(multi_indices(2, 3).iter().all(|a| a.iter().sum::<u32>() <= 3));
    }

    #[test]
    fn transform_examples() {
        let s = GaussianSpace::standard(1).unwrap();
        let e = hermite_transform(&s, &ScalarField::coordinate(1, 0), 4, 6).unwrap();
        assert!((e.coeff(&[1]) - 1.0).abs() < 1e-14);
        assert!(e.coeff(&[0]).abs() < 1e-14 && e.coeff(&[2]).abs() < 1e-14);
        let e = hermite_transform(&s, &ScalarField::coordinate_power(1, 0, 2), 4, 6).unwrap();
        assert!((e.coeff(&[0]) - 1.0).abs() < 1e-14);
        assert!((e.coeff(&[2]) - 2f64.sqrt()).abs() < 1e-14);
        let e = hermite_transform(&s, &ScalarField::constant(1, 1.0), 4, 6).unwrap();
        assert!((e.coeff(&[0]) - 1.0).abs() < 1e-14);
        assert!(e
            .coeffs()
            .iter()
            .filter(|(a, _)| a[0] != 0)
            .all(|(_, c)| c.abs() < 1e-14));
        assert!(hermite_transform(&s, &ScalarField::constant(1, 1.0), 4, 4).is_err());
    }

    #[test]
    fn expansion_field_derivatives() {
        let s = GaussianSpace::diagonal(vec![2.0, 0.5]).unwrap();
        let e =
            HermiteExpansion::from_terms(&s, 5, [(vec![2, 1], 0.7), (vec![0, 3], -1.2), (vec![5, 0], 0.3)]).unwrap();
        let f = e.to_field("p");
        let probes = random_probes(2, SamplerState::new(3, 0), 50, 1.0);
        assert!(check_gradient(&f, &probes) < 1e-5);
        assert!(check_hessian(&f, &probes) < 1e-5);
    }

    #[test]
    fn anisotropic_transform_reconstructs() {
        let s = GaussianSpace::diagonal(vec![4.0, 0.25]).unwrap();
        let e =
            HermiteExpansion::from_terms(&s, 4, [(vec![1, 2], 1.5), (vec![0, 0], 0.2), (vec![3, 1], -0.4)]).unwrap();
        let back = hermite_transform(&s, &e.to_field("p"), 4, 6).unwrap();
        for a in multi_indices(2, 4) {
            assert!((back.coeff(&a) - e.coeff(&a)).abs() < 1e-12, "{a:?}");
        }
    }
}
