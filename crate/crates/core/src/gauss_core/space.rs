//! The Gaussian measure `N(0, Q)` and its Cameron–Martin geometry.
//!
//! Points are expressed in the eigenbasis of `Q`, so coordinate `k` of a point
//! is `⟨x, e_k⟩`. The eigenvector matrix is kept only to translate ambient
//! vectors in and out of these coordinates.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::field::ScalarField;
use super::rng::{SamplerState, CHUNK_SIZE};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct GaussianSpace {
    eigenvalues: Vec<f64>,
    sqrt_eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

const ORTHOGONALITY_TOL: f64 = 1e-12;

impl GaussianSpace {
    /// Builds a space from a spectrum and orthonormal eigenvectors (columns).
    pub fn new(eigenvalues: Vec<f64>, eigenvectors: DMatrix<f64>) -> Result<Self> {
        let n = eigenvalues.len();
        if n == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if let Some((k, l)) = eigenvalues
            .iter()
            .enumerate()
            .find(|(_, l)| !(l.is_finite() && **l > 0.0))
        {
            return Err(Error::invalid(format!(
                "eigenvalue {} is {l}; all eigenvalues must be positive",
                k + 1
            )));
        }
        if eigenvectors.nrows() != n || eigenvectors.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: eigenvectors.ncols(),
            });
        }
        let gram = eigenvectors.transpose() * &eigenvectors;
        let defect = (gram - DMatrix::<f64>::identity(n, n)).amax();
        if defect > ORTHOGONALITY_TOL {
            return Err(Error::invalid(format!(
                "eigenvector matrix is not orthogonal (defect {defect:.3e})"
            )));
        }
        let sqrt_eigenvalues = eigenvalues.iter().map(|l| l.sqrt()).collect();
        Ok(GaussianSpace {
            eigenvalues,
            sqrt_eigenvalues,
            eigenvectors,
        })
    }

    /// Covariance already diagonal in the standard basis.
    pub fn diagonal(eigenvalues: Vec<f64>) -> Result<Self> {
        let n = eigenvalues.len();
        Self::new(eigenvalues, DMatrix::identity(n.max(1), n.max(1)))
    }

    pub fn standard(n: usize) -> Result<Self> {
        Self::diagonal(vec![1.0; n])
    }

    /// Eigendecomposition of a symmetric positive definite covariance.
    /// Eigenvalues are sorted in decreasing order.
    pub fn from_covariance(q: &DMatrix<f64>) -> Result<Self> {
        if q.nrows() != q.ncols() {
            return Err(Error::invalid("covariance must be square"));
        }
        let asym = (q - q.transpose()).amax();
        if asym > 1e-12 * q.amax().max(1.0) {
            return Err(Error::invalid("covariance must be symmetric"));
        }
        let eig = q.clone().symmetric_eigen();
        let n = q.nrows();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        Self::new(values, vectors)
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn sqrt_eigenvalues(&self) -> &[f64] {
        &self.sqrt_eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().cloned().fold(f64::MIN, f64::max)
    }

    pub fn log_det(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.ln()).sum()
    }

    /// Cameron–Martin basis vector `v_k = √λ_k e_k` in eigen coordinates.
    pub fn cm_basis_vector(&self, k: usize) -> Result<DVector<f64>> {
        self.check_index(k)?;
        let mut v = DVector::zeros(self.dim());
        v[k] = self.sqrt_eigenvalues[k];
        Ok(v)
    }

    /// `⟨a, b⟩_H = ⟨Q^{-1/2}a, Q^{-1/2}b⟩` for vectors in eigen coordinates.
    pub fn h_inner(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        a.iter()
            .zip(b.iter())
            .zip(&self.eigenvalues)
            .map(|((x, y), l)| x * y / l)
            .sum()
    }

    pub fn to_eigen_coords(&self, ambient: &DVector<f64>) -> DVector<f64> {
        self.eigenvectors.tr_mul(ambient)
    }

    pub fn to_ambient_coords(&self, eigen: &DVector<f64>) -> DVector<f64> {
        &self.eigenvectors * eigen
    }

    /// `z = Q^{-1/2} x`.
    pub fn whiten(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.dim(), x.iter().zip(&self.sqrt_eigenvalues).map(|(a, s)| a / s))
    }

    /// `x = Q^{1/2} z`.
    pub fn color(&self, z: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.dim(), z.iter().zip(&self.sqrt_eigenvalues).map(|(a, s)| a * s))
    }

    /// Lebesgue density of `N(0, Q)` at `x`.
    pub fn density(&self, x: &DVector<f64>) -> f64 {
        let n = self.dim() as f64;
        let quad: f64 = x.iter().zip(&self.eigenvalues).map(|(a, l)| a * a / l).sum();
        (-0.5 * quad - 0.5 * self.log_det() - 0.5 * n * (2.0 * std::f64::consts::PI).ln()).exp()
    }

    /// Restriction to the coordinates listed in `keep`.
    pub fn restrict(&self, keep: &[usize]) -> Result<GaussianSpace> {
        for &k in keep {
            self.check_index(k)?;
        }
        GaussianSpace::diagonal(keep.iter().map(|&k| self.eigenvalues[k]).collect())
    }

    pub(crate) fn check_index(&self, k: usize) -> Result<()> {
        if k < self.dim() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index: k,
                dim: self.dim(),
            })
        }
    }

    pub(crate) fn check_point(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() == self.dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            })
        }
    }
}

/// Draws `count` independent samples of `N(0, Q)`, one per column, in eigen
/// coordinates.
pub fn sample_gaussian(space: &GaussianSpace, state: SamplerState, count: usize) -> DMatrix<f64> {
    let n = space.dim();
    let mut out = DMatrix::zeros(n, count);
    let chunks = count.div_ceil(CHUNK_SIZE);
    let blocks: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK_SIZE.min(count - c * CHUNK_SIZE);
            let mut rng = state.chunk_rng(c as u64);
            let mut v = Vec::with_capacity(len * n);
            for _ in 0..len {
                for k in 0..n {
                    let z: f64 = rng.sample(StandardNormal);
                    v.push(z * space.sqrt_eigenvalues[k]);
                }
            }
            v
        })
        .collect();
    for (c, block) in blocks.iter().enumerate() {
        for (j, col) in block.chunks(n).enumerate() {
            out.column_mut(c * CHUNK_SIZE + j).copy_from_slice(col);
        }
    }
    out
}

/// `v̂_k(x) = ⟨x, e_k⟩ / √λ_k`.
pub fn vhat_eval(space: &GaussianSpace, k: usize, x: &DVector<f64>) -> Result<f64> {
    space.check_index(k)?;
    space.check_point(x)?;
    Ok(x[k] / space.sqrt_eigenvalues[k])
}

/// H-gradient coordinates `D_k f(x) = √λ_k ∂_k f(x)`.
pub fn h_gradient(space: &GaussianSpace, f: &ScalarField, x: &DVector<f64>) -> Result<DVector<f64>> {
    space.check_point(x)?;
    Ok(h_coords(space, &f.gradient(x)))
}

/// Converts a Euclidean gradient to H-gradient coordinates.
pub fn h_coords(space: &GaussianSpace, grad: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(
        space.dim(),
        grad.iter().zip(space.sqrt_eigenvalues()).map(|(g, s)| g * s),
    )
}

/// Converts a Euclidean Hessian to `D_h D_k f = √λ_h √λ_k ∂_h ∂_k f`.
pub fn h_hessian_coords(space: &GaussianSpace, hess: &DMatrix<f64>) -> DMatrix<f64> {
    let s = space.sqrt_eigenvalues();
    DMatrix::from_fn(space.dim(), space.dim(), |i, j| hess[(i, j)] * s[i] * s[j])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nonpositive_spectrum() {
        assert!(GaussianSpace::diagonal(vec![1.0, 0.0]).is_err());
        assert!(GaussianSpace::diagonal(vec![-1.0]).is_err());
        assert!(GaussianSpace::diagonal(vec![]).is_err());
    }

    #[test]
    fn rejects_non_orthogonal_basis() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(GaussianSpace::new(vec![1.0, 2.0], m).is_err());
    }

    #[test]
    fn cm_basis_is_h_orthonormal() {
        let s = GaussianSpace::diagonal(vec![4.0, 1.0, 0.25]).unwrap();
        for j in 0..3 {
            for k in 0..3 {
                let ip = s.h_inner(&s.cm_basis_vector(j).unwrap(), &s.cm_basis_vector(k).unwrap());
                let want = if j == k { 1.0 } else { 0.0 };
                assert!((ip - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn covariance_round_trip() {
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let s = GaussianSpace::from_covariance(&q).unwrap();
        let v = s.eigenvectors();
        let d = DMatrix::from_diagonal(&DVector::from_vec(s.eigenvalues().to_vec()));
        let back = v * d * v.transpose();
        assert!((back - q).amax() < 1e-12);
        assert!(s.eigenvalues()[0] >= s.eigenvalues()[1]);
        let x = DVector::from_vec(vec![0.3, -1.2]);
        assert!((s.to_ambient_coords(&s.to_eigen_coords(&x)) - x).amax() < 1e-14);
    }

    #[test]
    fn vhat_examples() {
        let s = GaussianSpace::diagonal(vec![1.0, 4.0]).unwrap();
        assert_eq!(vhat_eval(&s, 0, &DVector::from_vec(vec![1.0, 0.0])).unwrap(), 1.0);
        assert_eq!(vhat_eval(&s, 1, &DVector::from_vec(vec![0.0, 2.0])).unwrap(), 1.0);
        assert!(matches!(
            vhat_eval(&s, 2, &DVector::zeros(2)),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn density_integrates_to_gaussian_normalisation() {
        let s = GaussianSpace::diagonal(vec![4.0]).unwrap();
        let x = DVector::from_vec(vec![0.0]);
        let want = 1.0 / (2.0 * (2.0 * std::f64::consts::PI).sqrt());
        assert!((s.density(&x) - want).abs() < 1e-15);
    }
}
