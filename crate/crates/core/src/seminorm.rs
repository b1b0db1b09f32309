//! Hilbertian seminorms on `R^n`, stored as symmetric positive semidefinite
//! Gram matrices.
//!
//! A [`GramForm`] caches its spectral decomposition at construction. Rank and
//! kernel decisions use the relative cutoff `psd_tol * lambda_max`; eigenvalues
//! at or below the cutoff belong to the kernel.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::de::Deserializer;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::extended::Extended;
use crate::linalg;
use crate::tolerances::{PSD_TOL, SYMMETRY_TOL};

/// Component of a functional on `ker(q)` (relative to its Euclidean norm)
/// above which the functional is declared discontinuous.
const KERNEL_COMPONENT_TOL: f64 = 1e-9;

#[derive(Clone)]
pub struct GramForm {
    gram: DMatrix<f64>,
    psd_tol: f64,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl fmt::Debug for GramForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GramForm")
            .field("dim", &self.dim())
            .field("gram", &self.gram)
            .field("psd_tol", &self.psd_tol)
            .finish()
    }
}

impl PartialEq for GramForm {
    fn eq(&self, other: &Self) -> bool {
        self.gram == other.gram && self.psd_tol == other.psd_tol
    }
}

impl GramForm {
    pub fn new(gram: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(gram, PSD_TOL)
    }

    pub fn with_tolerance(gram: DMatrix<f64>, psd_tol: f64) -> Result<Self> {
        if gram.nrows() != gram.ncols() {
            return Err(Error::DimensionMismatch { expected: gram.nrows(), got: gram.ncols() });
        }
        if gram.nrows() == 0 {
            return Err(Error::Invalid("a Gram form needs dimension >= 1".into()));
        }
        if gram.iter().any(|x| !x.is_finite()) {
            return Err(Error::Invalid("Gram matrix has non-finite entries".into()));
        }
        let scale = linalg::max_abs(&gram).max(1.0);
        let asym = linalg::max_asymmetry(&gram);
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::NotSymmetric(asym));
        }
        let gram = linalg::symmetrize(&gram);
        let (mut eigenvalues, eigenvectors) = linalg::sym_eigen(&gram);
        let lmax = eigenvalues.iter().fold(0.0f64, |a, &x| a.max(x));
        let floor = psd_tol * lmax.max(1.0);
        for v in eigenvalues.iter_mut() {
            if *v < -floor {
                return Err(Error::NotPsd(*v));
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Ok(GramForm { gram, psd_tol, eigenvalues, eigenvectors })
    }

    pub fn identity(n: usize) -> Self {
        Self::new(DMatrix::identity(n, n)).expect("identity is PSD")
    }

    pub fn diagonal(entries: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(entries)))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        for r in rows {
            Error::check_dim(n, r.len())?;
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn psd_tol(&self) -> f64 {
        self.psd_tol
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim()).map(|i| self.gram.row(i).iter().copied().collect()).collect()
    }

    /// Eigenvalues in ascending order (tiny negatives clamped to zero).
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[self.dim() - 1]
    }

    fn cutoff(&self) -> f64 {
        self.psd_tol * self.lambda_max()
    }

    fn is_kernel_eigenvalue(&self, lambda: f64) -> bool {
        lambda <= self.cutoff()
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.iter().filter(|&&l| !self.is_kernel_eigenvalue(l)).count()
    }

    pub fn has_trivial_kernel(&self) -> bool {
        self.rank() == self.dim()
    }

    /// Multiply the seminorm by `c` (the Gram matrix by `c^2`).
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::with_tolerance(&self.gram * (c * c), self.psd_tol)
    }

    /// Restriction to the subspace with the given basis (columns of `basis`);
    /// the result is a form on `R^k`, `k` the number of columns.
    pub fn restrict(&self, basis: &DMatrix<f64>) -> Result<Self> {
        Error::check_dim(self.dim(), basis.nrows())?;
        Self::with_tolerance(basis.transpose() * &self.gram * basis, self.psd_tol)
    }

    /// Restriction to a set of coordinates (principal sub-matrix).
    pub fn restrict_coords(&self, coords: &[usize]) -> Result<Self> {
        let k = coords.len();
        Self::with_tolerance(DMatrix::from_fn(k, k, |i, j| self.gram[(coords[i], coords[j])]), self.psd_tol)
    }

    /// `v^T G w`.
    pub fn inner(&self, v: &DVector<f64>, w: &DVector<f64>) -> Result<f64> {
        Error::check_dim(self.dim(), v.len())?;
        Error::check_dim(self.dim(), w.len())?;
        Ok(v.dot(&(&self.gram * w)))
    }

    pub fn evaluate(&self, v: &DVector<f64>) -> Result<f64> {
        Ok(self.squared(v)?.sqrt())
    }

    /// `p(v)^2`, with round-off negatives clamped to zero.
    pub fn squared(&self, v: &DVector<f64>) -> Result<f64> {
        let raw = self.inner(v, v)?;
        let floor = self.psd_tol * self.lambda_max().max(1.0) * v.norm_squared();
        if raw < -floor {
            return Err(Error::NotPsd(raw));
        }
        Ok(raw.max(0.0))
    }

    /// Bilinear form recovered from the seminorm via polarization.
    pub fn polarize(&self, v: &DVector<f64>, w: &DVector<f64>) -> Result<f64> {
        Error::check_dim(self.dim(), w.len())?;
        let sum = self.squared(&(v + w))?;
        let a = self.squared(v)?;
        let b = self.squared(w)?;
        Ok(0.5 * (sum - a - b))
    }

    /// Euclidean-orthonormal basis of `ker(p)`.
    pub fn kernel_basis(&self) -> Vec<DVector<f64>> {
        (0..self.dim())
            .filter(|&k| self.is_kernel_eigenvalue(self.eigenvalues[k]))
            .map(|k| self.eigenvectors.column(k).clone_owned())
            .collect()
    }

    fn range_indices(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&k| !self.is_kernel_eigenvalue(self.eigenvalues[k])).collect()
    }

    /// Columns form a complete `p`-orthonormal system of a complement of the
    /// kernel: `W^T G W = I`.
    pub fn whitening(&self) -> DMatrix<f64> {
        let idx = self.range_indices();
        let mut w = DMatrix::zeros(self.dim(), idx.len());
        for (c, &k) in idx.iter().enumerate() {
            let col = self.eigenvectors.column(k) / self.eigenvalues[k].sqrt();
            w.set_column(c, &col);
        }
        w
    }

    /// Spectral pseudo-inverse of the Gram matrix.
    pub fn pseudo_inverse(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        for k in self.range_indices() {
            let u = self.eigenvectors.column(k);
            out += (u * u.transpose()) / self.eigenvalues[k];
        }
        out
    }

    /// Whether `v` is a null vector up to the kernel cutoff.
    pub fn is_null(&self, v: &DVector<f64>) -> Result<bool> {
        Ok(self.squared(v)? <= self.cutoff() * v.norm_squared())
    }

    /// Operator norm `sup { |l(v)| : p(v) <= 1 }` of a linear functional.
    pub fn dual_norm(&self, l: &DualFunctional) -> Result<Extended> {
        Error::check_dim(self.dim(), l.dim())?;
        let c = &l.coeffs;
        let scale = c.norm();
        if scale == 0.0 {
            return Ok(Extended::Finite(0.0));
        }
        let mut total = 0.0;
        for k in 0..self.dim() {
            let comp = self.eigenvectors.column(k).dot(c);
            if self.is_kernel_eigenvalue(self.eigenvalues[k]) {
                if comp.abs() > KERNEL_COMPONENT_TOL * scale {
                    return Ok(Extended::Infinite);
                }
            } else {
                total += comp * comp / self.eigenvalues[k];
            }
        }
        Ok(Extended::Finite(total.sqrt()))
    }

    /// Vector attaining the dual norm: `G^+ c`.
    pub fn dual_maximizer(&self, l: &DualFunctional) -> Result<DVector<f64>> {
        Error::check_dim(self.dim(), l.dim())?;
        Ok(self.pseudo_inverse() * &l.coeffs)
    }

    /// Modified Gram-Schmidt with respect to this form. Vectors whose residual
    /// norm falls below the kernel cutoff are dropped; their input indices are
    /// returned alongside the system.
    pub fn gram_schmidt(&self, vectors: &[DVector<f64>]) -> Result<(OrthonormalSystem, Vec<usize>)> {
        let mut out: Vec<DVector<f64>> = Vec::new();
        let mut dropped = Vec::new();
        let lmax = self.lambda_max();
        for (i, v) in vectors.iter().enumerate() {
            Error::check_dim(self.dim(), v.len())?;
            let mut r = v.clone();
            for _pass in 0..2 {
                for e in &out {
                    let c = self.inner(&r, e)?;
                    r -= e * c;
                }
            }
            let norm = self.evaluate(&r)?;
            let threshold = (self.psd_tol * lmax).sqrt() * v.norm().max(f64::MIN_POSITIVE) + f64::MIN_POSITIVE;
            if norm <= threshold || lmax == 0.0 {
                dropped.push(i);
            } else {
                out.push(r / norm);
            }
        }
        let complete = out.len() == self.rank();
        Ok((OrthonormalSystem { form: self.clone(), vectors: out, complete }, dropped))
    }

    /// Whether every null vector of `self` is a null vector of `p`.
    pub fn kernel_contained_in(&self, p: &GramForm) -> Result<bool> {
        Ok(self.kernel_violation(p)?.is_none())
    }

    /// Largest `p(v)^2` over the kernel basis of `self`, if it exceeds the
    /// cutoff `psd_tol * lambda_max(G_p)`.
    pub(crate) fn kernel_violation(&self, p: &GramForm) -> Result<Option<f64>> {
        Error::check_dim(self.dim(), p.dim())?;
        let cutoff = p.psd_tol * p.lambda_max();
        let mut worst: Option<f64> = None;
        for k in self.kernel_basis() {
            let val = p.squared(&k)?;
            if val > cutoff {
                worst = Some(worst.map_or(val, |w: f64| w.max(val)));
            }
        }
        Ok(worst)
    }

    /// `sup { v^T m v : p(v) <= 1 }` for a symmetric PSD matrix `m`: the
    /// largest generalized eigenvalue of `m` relative to this form, infinite
    /// when `m` charges a null direction of the form beyond `psd_tol`.
    pub fn sup_quadratic(&self, m: &DMatrix<f64>) -> Result<Extended> {
        Error::check_dim(self.dim(), m.nrows())?;
        let mscale = linalg::lambda_max(m).max(0.0);
        if mscale == 0.0 {
            return Ok(Extended::Finite(0.0));
        }
        let kernel = self.kernel_basis();
        if !kernel.is_empty() {
            let k = DMatrix::from_columns(&kernel);
            let on_kernel = linalg::lambda_max(&(k.transpose() * m * &k));
            if on_kernel > self.psd_tol * mscale {
                return Ok(Extended::Infinite);
            }
        }
        let w = self.whitening();
        if w.ncols() == 0 {
            return Ok(Extended::Finite(0.0));
        }
        Ok(Extended::Finite(linalg::lambda_max(&(w.transpose() * m * &w)).max(0.0)))
    }

    /// Complete `self`-orthonormal system whose members are mutually
    /// `p`-orthogonal. Columns are ordered by ascending `p`-norm.
    pub fn simultaneous_diagonalize(&self, p: &GramForm) -> Result<OrthonormalSystem> {
        if let Some(v) = self.kernel_violation(p)? {
            return Err(Error::KernelNotContained(v));
        }
        let w = self.whitening();
        let whitened = w.transpose() * p.gram() * &w;
        let (_, vecs) = linalg::sym_eigen(&whitened);
        let basis = &w * vecs;
        let vectors = basis.column_iter().map(|c| c.clone_owned()).collect();
        Ok(OrthonormalSystem { form: self.clone(), vectors, complete: true })
    }
}

impl Serialize for GramForm {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for GramForm {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        GramForm::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// A linear functional `l(v) = coeffs . v` on `R^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<f64>", into = "Vec<f64>")]
pub struct DualFunctional {
    pub coeffs: DVector<f64>,
}

impl From<Vec<f64>> for DualFunctional {
    fn from(v: Vec<f64>) -> Self {
        DualFunctional { coeffs: DVector::from_vec(v) }
    }
}

impl From<DualFunctional> for Vec<f64> {
    fn from(l: DualFunctional) -> Self {
        l.coeffs.iter().copied().collect()
    }
}

impl DualFunctional {
    pub fn new(coeffs: DVector<f64>) -> Self {
        DualFunctional { coeffs }
    }

    pub fn from_slice(c: &[f64]) -> Self {
        DualFunctional { coeffs: DVector::from_column_slice(c) }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn apply(&self, v: &DVector<f64>) -> Result<f64> {
        Error::check_dim(self.dim(), v.len())?;
        Ok(self.coeffs.dot(v))
    }
}

/// An ordered family of vectors, orthonormal with respect to `form`.
#[derive(Debug, Clone)]
pub struct OrthonormalSystem {
    pub form: GramForm,
    pub vectors: Vec<DVector<f64>>,
    /// The vectors span a complement of `ker(form)`.
    pub complete: bool,
}

impl OrthonormalSystem {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Vectors as the columns of an `n x k` matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        if self.vectors.is_empty() {
            DMatrix::zeros(self.form.dim(), 0)
        } else {
            DMatrix::from_columns(&self.vectors)
        }
    }

    /// Gram matrix of the system under an arbitrary form.
    pub fn gram_under(&self, other: &GramForm) -> DMatrix<f64> {
        let m = self.matrix();
        m.transpose() * other.gram() * m
    }

    /// Largest entry of `|<e_i, e_j>_form - delta_ij|`.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.gram_under(&self.form);
        let k = g.nrows();
        let mut worst = 0.0f64;
        for i in 0..k {
            for j in 0..k {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn evaluate_examples() {
        assert_relative_eq!(GramForm::identity(2).evaluate(&v(&[3.0, 4.0])).unwrap(), 5.0);
        let p = GramForm::diagonal(&[1.0, 0.0]).unwrap();
        assert_eq!(p.evaluate(&v(&[0.0, 7.0])).unwrap(), 0.0);
        let p = GramForm::diagonal(&[1.0, 4.0]).unwrap();
        // direct quadratic form: 1*1 + 4*1
        assert_relative_eq!(p.evaluate(&v(&[1.0, 1.0])).unwrap(), 5f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn evaluate_rejects_wrong_dimension() {
        let err = GramForm::identity(2).evaluate(&v(&[1.0])).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { expected: 2, got: 1 });
    }

    #[test]
    fn construction_errors() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(GramForm::new(asym), Err(Error::NotSymmetric(_))));
        let neg = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(GramForm::new(neg), Err(Error::NotPsd(_))));
        // round-off negativity is clamped
        let tiny = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-14]);
        let f = GramForm::new(tiny).unwrap();
        assert_eq!(f.rank(), 1);
    }

    #[test]
    fn polarize_examples() {
        let id = GramForm::identity(2);
        assert_relative_eq!(id.polarize(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 0.0);
        assert_relative_eq!(id.polarize(&v(&[1.0, 0.0]), &v(&[1.0, 0.0])).unwrap(), 1.0);
        let p = GramForm::diagonal(&[1.0, 4.0]).unwrap();
        assert_relative_eq!(p.polarize(&v(&[1.0, 1.0]), &v(&[1.0, -1.0])).unwrap(), -3.0, epsilon = 1e-14);
    }

    #[test]
    fn kernel_examples() {
        assert!(GramForm::identity(2).kernel_basis().is_empty());
        let k = GramForm::diagonal(&[1.0, 0.0]).unwrap().kernel_basis();
        assert_eq!(k.len(), 1);
        assert_relative_eq!(k[0][0].abs(), 0.0);
        assert_relative_eq!(k[0][1].abs(), 1.0);
        let ones = GramForm::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let k = ones.kernel_basis();
        assert_eq!(k.len(), 1);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(k[0][0].abs(), s, epsilon = 1e-12);
        assert_relative_eq!(k[0][0] + k[0][1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn dual_norm_examples() {
        let id = GramForm::identity(2);
        assert_eq!(id.dual_norm(&DualFunctional::from_slice(&[3.0, 4.0])).unwrap(), Extended::Finite(5.0));
        let q = GramForm::diagonal(&[1.0, 0.0]).unwrap();
        assert_eq!(q.dual_norm(&DualFunctional::from_slice(&[0.0, 1.0])).unwrap(), Extended::Infinite);
        // sup of x over the ellipse 4x^2 + y^2 <= 1 is 1/2
        let q = GramForm::diagonal(&[4.0, 1.0]).unwrap();
        let d = q.dual_norm(&DualFunctional::from_slice(&[1.0, 0.0])).unwrap().finite().unwrap();
        assert_relative_eq!(d, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn dual_norm_attained_at_pseudo_inverse() {
        let q = GramForm::from_rows(&[vec![2.0, 0.5, 0.0], vec![0.5, 1.0, 0.2], vec![0.0, 0.2, 3.0]]).unwrap();
        let l = DualFunctional::from_slice(&[1.0, -2.0, 0.5]);
        let d = q.dual_norm(&l).unwrap().finite().unwrap();
        let x = q.dual_maximizer(&l).unwrap();
        let ratio = l.apply(&x).unwrap() / q.evaluate(&x).unwrap();
        assert_relative_eq!(ratio, d, epsilon = 1e-12);
    }

    #[test]
    fn gram_schmidt_examples() {
        let id = GramForm::identity(2);
        let (sys, dropped) = id.gram_schmidt(&[v(&[1.0, 0.0]), v(&[1.0, 1.0])]).unwrap();
        assert!(dropped.is_empty() && sys.complete);
        assert_relative_eq!((&sys.vectors[0] - v(&[1.0, 0.0])).norm(), 0.0, epsilon = 1e-15);
        assert_relative_eq!((&sys.vectors[1] - v(&[0.0, 1.0])).norm(), 0.0, epsilon = 1e-15);

        let q = GramForm::diagonal(&[1.0, 0.0]).unwrap();
        let (sys, dropped) = q.gram_schmidt(&[v(&[0.0, 1.0])]).unwrap();
        assert!(sys.is_empty());
        assert_eq!(dropped, vec![0]);

        let q = GramForm::diagonal(&[1.0, 4.0]).unwrap();
        let (sys, _) = q.gram_schmidt(&[v(&[1.0, 0.0]), v(&[0.0, 1.0])]).unwrap();
        assert_relative_eq!((&sys.vectors[1] - v(&[0.0, 0.5])).norm(), 0.0, epsilon = 1e-15);
        assert!(sys.orthonormality_error() < 1e-14);
    }

    #[test]
    fn simultaneous_diagonalize_examples() {
        let id = GramForm::identity(2);
        let sys = id.simultaneous_diagonalize(&id).unwrap();
        assert!(sys.orthonormality_error() < 1e-12);

        let p = GramForm::diagonal(&[1.0, 4.0]).unwrap();
        let sys = id.simultaneous_diagonalize(&p).unwrap();
        assert_relative_eq!(sys.vectors[0][0].abs(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(sys.vectors[1][1].abs(), 1.0, epsilon = 1e-12);

        let ones = GramForm::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let sys = id.simultaneous_diagonalize(&ones).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // ascending p-norm: (1,-1)/sqrt2 first, then (1,1)/sqrt2
        assert_relative_eq!(sys.vectors[0][0].abs(), s, epsilon = 1e-12);
        assert_relative_eq!(sys.vectors[0][0] + sys.vectors[0][1], 0.0, epsilon = 1e-12);
        assert_relative_eq!(sys.vectors[1][0], sys.vectors[1][1], epsilon = 1e-12);
        let off = sys.gram_under(&ones)[(0, 1)];
        assert!(off.abs() < 1e-12);
    }

    #[test]
    fn simultaneous_diagonalize_requires_kernel_containment() {
        let q = GramForm::diagonal(&[1.0, 0.0]).unwrap();
        let p = GramForm::identity(2);
        assert!(matches!(q.simultaneous_diagonalize(&p), Err(Error::KernelNotContained(_))));
    }

    #[test]
    fn json_is_row_major() {
        let p = GramForm::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, "[[2.0,1.0],[1.0,3.0]]");
        let back: GramForm = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<GramForm>("[[1.0,2.0],[0.0,1.0]]").is_err());
    }
}
