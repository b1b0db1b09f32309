//! Graded Hilbertian seminorms on the homogeneous slices `S(R^n)_d`.
//!
//! A seminorm `s` on the generators is extended to degree `d` through a
//! [`Frame`]: an `s`-orthonormal basis `b_1..b_r` of a complement of the
//! kernel, completed by kernel vectors. A homogeneous element is rewritten as a
//! polynomial in the frame vectors and its norm is the Euclidean norm of the
//! coefficients of monomials built from the `b_k` only. Monomials with a kernel
//! factor carry weight zero.
//!
//! Products of distinct frame vectors are therefore orthonormal. The value does
//! depend on the frame when `s` has repeated eigenvalues or when two frames are
//! related by a non-permutation rotation, so the frame is part of the data. The
//! default frame diagonalizes the Gram matrix, using the coordinate basis when
//! the matrix is already diagonal.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::algebra::{monomials_of_degree, AlgebraElement, MultiIndex};
use crate::error::{Error, Result};
use crate::extended::Extended;
use crate::seminorm::{DualFunctional, GramForm};
use crate::tolerances::INEQUALITY_SLACK;
use crate::trace;

/// An `s`-orthonormal frame with its kernel completion.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    form: GramForm,
    range: Vec<DVector<f64>>,
    kernel: Vec<DVector<f64>>,
    /// Row `k` is `b_k^T G`, the coordinate functional of `b_k`.
    coords: DMatrix<f64>,
}

impl Frame {
    /// Builds a frame from `s`-orthonormal range vectors and kernel vectors.
    pub fn from_parts(form: &GramForm, range: Vec<DVector<f64>>, kernel: Vec<DVector<f64>>) -> Result<Self> {
        let n = form.dim();
        for v in range.iter().chain(&kernel) {
            Error::check_dim(n, v.len())?;
        }
        if range.len() + kernel.len() != n {
            return Err(Error::IncompleteSystem(format!(
                "frame has {} range and {} kernel vectors in dimension {n}",
                range.len(),
                kernel.len()
            )));
        }
        let mut coords = DMatrix::zeros(range.len(), n);
        for (k, b) in range.iter().enumerate() {
            let row = b.transpose() * form.gram();
            coords.row_mut(k).copy_from(&row);
        }
        Ok(Frame { form: form.clone(), range, kernel, coords })
    }

    /// The default frame of `s`.
    pub fn canonical(s: &GramForm) -> Self {
        let n = s.dim();
        let g = s.gram();
        let cutoff = s.psd_tol() * s.lambda_max();
        let is_diagonal = (0..n).all(|i| (0..n).all(|j| i == j || g[(i, j)] == 0.0));
        let mut range = Vec::new();
        let mut kernel = Vec::new();
        if is_diagonal {
            for i in 0..n {
                let e = DVector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 });
                let lam = g[(i, i)];
                if lam > cutoff && lam > 0.0 {
                    range.push(e / lam.sqrt());
                } else {
                    kernel.push(e);
                }
            }
        } else {
            let vals = s.eigenvalues();
            let vecs = s.eigenvectors();
            for k in (0..n).rev() {
                let u = vecs.column(k).clone_owned();
                if vals[k] > cutoff && vals[k] > 0.0 {
                    range.push(u / vals[k].sqrt());
                } else {
                    kernel.push(u);
                }
            }
        }
        Frame::from_parts(s, range, kernel).expect("eigenbasis is complete")
    }

    pub fn form(&self) -> &GramForm {
        &self.form
    }

    pub fn range(&self) -> &[DVector<f64>] {
        &self.range
    }

    pub fn kernel(&self) -> &[DVector<f64>] {
        &self.kernel
    }

    pub fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }

    /// The element rewritten in the range vectors of the frame, kernel parts dropped.
    pub fn expand(&self, a: &AlgebraElement) -> Result<AlgebraElement> {
        Error::check_dim(self.form.dim(), a.dim())?;
        a.linear_change(&self.coords)
    }

    /// `T` with `s~(a)^2 = |T c|^2` for `a = sum_alpha c_alpha x^alpha` of degree `d`.
    /// Rows follow range-frame monomials, columns the coordinate monomials, both in graded order.
    pub fn monomial_transform(&self, d: usize) -> Result<DMatrix<f64>> {
        let n = self.form.dim();
        let cols = monomials_of_degree(n, d);
        let rows = monomials_of_degree(self.range.len(), d);
        let mut t = DMatrix::zeros(rows.len(), cols.len());
        for (j, alpha) in cols.iter().enumerate() {
            let mono = AlgebraElement::monomial(n, d, alpha.clone(), 1.0)?;
            let expanded = self.expand(&mono)?;
            for (i, beta) in rows.iter().enumerate() {
                t[(i, j)] = expanded.coeff(beta);
            }
        }
        Ok(t)
    }

    /// The graded seminorm on `S(R^n)_d` as a Gram matrix over coordinate monomials.
    pub fn graded_form(&self, d: usize) -> Result<GramForm> {
        let t = self.monomial_transform(d)?;
        GramForm::with_tolerance(t.transpose() * t, self.form.psd_tol())
    }

    /// `s~^(d)(a_d)` in this frame.
    pub fn graded_norm(&self, d: usize, a: &AlgebraElement) -> Result<f64> {
        if !a.is_homogeneous_of(d) {
            return Err(Error::NotHomogeneous);
        }
        let expanded = self.expand(a)?;
        Ok(expanded.terms().values().map(|c| c * c).sum::<f64>().sqrt())
    }
}

/// `s~^(d)(a_d)` in the canonical frame of `s`.
pub fn graded_norm(s: &GramForm, d: usize, a: &AlgebraElement) -> Result<f64> {
    Frame::canonical(s).graded_norm(d, a)
}

/// Product `v_1 ... v_k` of degree-one elements given as vectors.
pub fn product_of_vectors(vectors: &[&DVector<f64>], max_degree: usize) -> Result<AlgebraElement> {
    let n = vectors.first().map(|v| v.len()).unwrap_or(0);
    let mut out = AlgebraElement::one(n, max_degree);
    for v in vectors {
        let lin = AlgebraElement::linear(v.as_slice(), max_degree);
        out = out.multiply(&lin)?;
    }
    Ok(out)
}

/// One degree of a [`GradedSeminormTower`].
#[derive(Debug, Clone)]
pub struct TowerLevel {
    pub degree: usize,
    pub p: GramForm,
    pub q: GramForm,
    pub trace: Extended,
    /// `q`-orthonormal vectors diagonalizing `p`, in ascending `p`-norm.
    pub q_system: Vec<DVector<f64>>,
    pub p_frame: Frame,
    pub q_frame: Frame,
}

impl TowerLevel {
    fn new(degree: usize, p: GramForm, q: GramForm) -> Result<Self> {
        Error::check_dim(p.dim(), q.dim())?;
        let tr = trace::trace(&p, &q)?.value;
        if !tr.is_finite() {
            return Ok(TowerLevel {
                degree,
                p_frame: Frame::canonical(&p),
                q_frame: Frame::canonical(&q),
                p,
                q,
                trace: tr,
                q_system: Vec::new(),
            });
        }
        let system = q.simultaneous_diagonalize(&p)?;
        let q_kernel = q.kernel_basis();
        let q_frame = Frame::from_parts(&q, system.vectors.clone(), q_kernel.clone())?;

        let norms: Vec<f64> = system.vectors.iter().map(|e| p.evaluate(e)).collect::<Result<_>>()?;
        let top = norms.iter().fold(0.0f64, |m, &x| m.max(x * x));
        let mut range = Vec::new();
        let mut kernel = q_kernel;
        for (e, &pn) in system.vectors.iter().zip(&norms) {
            if pn * pn > p.psd_tol() * top && pn > 0.0 {
                range.push(e / pn);
            } else {
                kernel.push(e.clone());
            }
        }
        let p_frame = Frame::from_parts(&p, range, kernel)?;
        Ok(TowerLevel { degree, p, q, trace: tr, q_system: system.vectors, p_frame, q_frame })
    }
}

/// The truncated data behind `p~` and `q~`: pairs `(p_2d, q_2d)` for
/// `d = 1..=D`, weights `lambda_d`, `eta_d` for `d = 0..=D` and constants `C_d`.
#[derive(Debug, Clone)]
pub struct GradedSeminormTower {
    dim: usize,
    levels: Vec<TowerLevel>,
    lambda: Vec<f64>,
    eta: Vec<f64>,
    constants: Vec<f64>,
}

impl GradedSeminormTower {
    /// `forms[d-1] = (p_2d, q_2d)`, `lambda`/`eta` of length `D + 1`, `constants` of length `D`.
    pub fn new(forms: Vec<(GramForm, GramForm)>, lambda: Vec<f64>, eta: Vec<f64>, constants: Vec<f64>) -> Result<Self> {
        let depth = forms.len();
        if depth == 0 {
            return Err(Error::Invalid("tower needs at least one degree".into()));
        }
        Error::check_dim(depth + 1, lambda.len())?;
        Error::check_dim(depth + 1, eta.len())?;
        Error::check_dim(depth, constants.len())?;
        if lambda.iter().chain(&eta).any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::Invalid("tower weights must be positive and finite".into()));
        }
        if constants.iter().any(|&c| !(c >= 0.0 && c.is_finite())) {
            return Err(Error::NotContinuous);
        }
        let dim = forms[0].0.dim();
        let levels = forms
            .into_iter()
            .enumerate()
            .map(|(i, (p, q))| {
                Error::check_dim(dim, p.dim())?;
                TowerLevel::new(i + 1, p, q)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GradedSeminormTower { dim, levels, lambda, eta, constants })
    }

    /// All weights 1, all constants 1, the same pair at every degree.
    pub fn uniform(p: GramForm, q: GramForm, depth: usize) -> Result<Self> {
        Self::new(vec![(p, q); depth], vec![1.0; depth + 1], vec![1.0; depth + 1], vec![1.0; depth])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_degree(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[TowerLevel] {
        &self.levels
    }

    pub fn level(&self, d: usize) -> &TowerLevel {
        &self.levels[d - 1]
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn constants(&self) -> &[f64] {
        &self.constants
    }

    pub fn with_constants(mut self, constants: Vec<f64>) -> Result<Self> {
        Error::check_dim(self.levels.len(), constants.len())?;
        if constants.iter().any(|&c| !(c >= 0.0 && c.is_finite())) {
            return Err(Error::NotContinuous);
        }
        self.constants = constants;
        Ok(self)
    }

    /// `sum_{d=0}^{D} lambda_d^{-2}`.
    pub fn lambda_inverse_square_sum(&self) -> f64 {
        self.lambda.iter().map(|l| l.powi(-2)).sum()
    }

    fn check_degree(&self, a: &AlgebraElement) -> Result<()> {
        Error::check_dim(self.dim, a.dim())?;
        if a.degree() > self.max_degree() {
            return Err(Error::DegreeOverflow { got: a.degree(), max: self.max_degree() });
        }
        Ok(())
    }

    pub fn p_tilde(&self, a: &AlgebraElement) -> Result<f64> {
        self.check_degree(a)?;
        let a0 = a.coeff(&MultiIndex::zero(self.dim));
        let mut total = (self.lambda[0] * a0).powi(2);
        for level in &self.levels {
            let d = level.degree;
            let comp = a.component(d);
            if comp.is_zero() {
                continue;
            }
            let norm = level.p_frame.graded_norm(d, &comp)?;
            total += self.lambda[d].powi(2) * self.constants[d - 1] * norm * norm;
        }
        Ok(total.sqrt())
    }

    pub fn q_tilde(&self, a: &AlgebraElement) -> Result<f64> {
        self.check_degree(a)?;
        let a0 = a.coeff(&MultiIndex::zero(self.dim));
        let mut total = (self.eta[0] * a0).powi(2);
        for level in &self.levels {
            let d = level.degree;
            let comp = a.component(d);
            if comp.is_zero() {
                continue;
            }
            let norm = level.q_frame.graded_norm(d, &comp)?;
            total += self.eta[d].powi(2) * norm * norm;
        }
        Ok(total.sqrt())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TildeTraceReport {
    pub truncation: usize,
    pub formula: f64,
    /// Sum of `p~^2` over ordered products `eta_d^{-1} e_{i_1} ... e_{i_d}`.
    pub direct: f64,
    /// Same sum over sorted products only (each monomial once).
    pub direct_symmetric: f64,
    pub relative_gap: f64,
    pub agree: bool,
}

/// Evaluates `tr(p~/q~)` two ways on the truncation `D`.
pub fn tilde_trace_identity(tower: &GradedSeminormTower, depth: usize) -> Result<TildeTraceReport> {
    if depth > tower.max_degree() {
        return Err(Error::DegreeOverflow { got: depth, max: tower.max_degree() });
    }
    let base = (tower.lambda[0] / tower.eta[0]).powi(2);
    let mut formula = base;
    let mut direct = base;
    let mut direct_symmetric = base;
    for level in &tower.levels[..depth] {
        let d = level.degree;
        let tr = level.trace.finite().ok_or(Error::InfiniteTrace)?;
        let weight = (tower.lambda[d] / tower.eta[d]).powi(2) * tower.constants[d - 1];
        formula += weight * tr.powi(d as i32);

        let m = level.q_system.len();
        let mut ordered = 0.0;
        let mut sorted = 0.0;
        for k in 0..m.pow(d as u32) {
            let idx: Vec<usize> = (0..d).map(|t| (k / m.pow(t as u32)) % m).collect();
            let vecs: Vec<&DVector<f64>> = idx.iter().map(|&i| &level.q_system[i]).collect();
            let elem = product_of_vectors(&vecs, d)?.scale(1.0 / tower.eta[d]);
            let val = tower.p_tilde(&elem)?.powi(2);
            ordered += val;
            if idx.windows(2).all(|w| w[0] >= w[1]) {
                sorted += val;
            }
        }
        direct += ordered;
        direct_symmetric += sorted;
    }
    let relative_gap = (formula - direct).abs() / formula.abs().max(f64::MIN_POSITIVE);
    Ok(TildeTraceReport { truncation: depth, formula, direct, direct_symmetric, relative_gap, agree: relative_gap <= 1e-8 })
}

#[derive(Debug, Clone, Serialize)]
pub struct CharacterBoundReport {
    pub value: f64,
    pub dual_norm: f64,
    pub trace: f64,
    pub graded_norm: f64,
    /// `(r'(l) tr(r/s))^d s~(a_d)`.
    pub bound: f64,
    /// `(r'(l) sqrt(tr(r/s)))^d s~(a_d)`, valid in every case.
    pub sharp_bound: f64,
    pub holds: bool,
    pub sharp_holds: bool,
}

/// Compares `|alpha_l(a_d)|` with `(r'(l) tr(r/s))^d s~^(d)(a_d)`.
///
/// The bound can fail when `tr(r/s) < 1`; `sharp_bound` replaces the trace by its
/// square root and always holds.
pub fn character_norm_bound(
    l: &DualFunctional,
    r: &GramForm,
    s: &GramForm,
    d: usize,
    a: &AlgebraElement,
) -> Result<CharacterBoundReport> {
    Error::check_dim(r.dim(), s.dim())?;
    Error::check_dim(r.dim(), l.dim())?;
    if let Some(v) = s.kernel_violation(r)? {
        return Err(Error::KernelNotContained(v));
    }
    let tr = trace::trace(r, s)?.value.finite().ok_or(Error::InfiniteTrace)?;
    let dual = r.dual_norm(l)?.finite().ok_or(Error::NotContinuous)?;
    if !a.is_homogeneous_of(d) {
        return Err(Error::NotHomogeneous);
    }
    let value = a.evaluate(l.coeffs.as_slice())?;
    let norm = graded_norm(s, d, a)?;
    let bound = (dual * tr).powi(d as i32) * norm;
    let sharp_bound = (dual * tr.sqrt()).powi(d as i32) * norm;
    let slack = |b: f64| INEQUALITY_SLACK * b.abs().max(1.0);
    Ok(CharacterBoundReport {
        value,
        dual_norm: dual,
        trace: tr,
        graded_norm: norm,
        bound,
        sharp_bound,
        holds: value.abs() <= bound + slack(bound),
        sharp_holds: value.abs() <= sharp_bound + slack(sharp_bound),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PolarizationReport {
    pub degree: usize,
    pub constant: f64,
    pub hypothesis_holds: bool,
    /// Largest observed `|L(v_1..v_d)| / (r(v_1)..r(v_d))`.
    pub max_ratio: f64,
    pub holds: bool,
}

/// `d^d / d!`.
pub fn polarization_constant(d: usize) -> f64 {
    let d_f = d as f64;
    (1..=d).map(|k| d_f / k as f64).product()
}

/// Samples random tuples and checks `|L(v_1..v_d)| <= d^d/d! r(v_1)..r(v_d)`,
/// after testing the diagonal hypothesis `|L(v^d)| <= r(v)^d` on the same sample.
pub fn polarization_bound_check<F>(l: F, r: &GramForm, d: usize, samples: usize, seed: u64) -> Result<PolarizationReport>
where
    F: Fn(&AlgebraElement) -> Result<f64>,
{
    let n = r.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || DVector::<f64>::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    let constant = polarization_constant(d);
    let mut hypothesis_holds = true;
    let mut max_ratio: f64 = 0.0;
    let mut holds = true;
    for _ in 0..samples {
        let v = draw();
        let rv = r.evaluate(&v)?;
        let diag = l(&product_of_vectors(&vec![&v; d], d)?)?;
        let rhs = rv.powi(d as i32);
        if diag.abs() > rhs + INEQUALITY_SLACK * rhs.max(1.0) {
            hypothesis_holds = false;
        }

        let tuple: Vec<DVector<f64>> = (0..d).map(|_| draw()).collect();
        let refs: Vec<&DVector<f64>> = tuple.iter().collect();
        let val = l(&product_of_vectors(&refs, d)?)?;
        let prod: f64 = tuple.iter().map(|v| r.evaluate(v)).product::<Result<f64>>()?;
        let bound = constant * prod;
        if prod > 0.0 {
            max_ratio = max_ratio.max(val.abs() / prod);
        }
        if val.abs() > bound + INEQUALITY_SLACK * bound.max(1.0) {
            holds = false;
        }
    }
    Ok(PolarizationReport { degree: d, constant, hypothesis_holds, max_ratio, holds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn x(n: usize, d: usize, i: usize) -> AlgebraElement {
        AlgebraElement::variable(n, d, i)
    }

    #[test]
    fn graded_norm_examples() {
        let s = GramForm::identity(2);
        let x1x2 = x(2, 2, 0).multiply(&x(2, 2, 1)).unwrap();
        assert_relative_eq!(graded_norm(&s, 2, &x1x2).unwrap(), 1.0, epsilon = 1e-14);
        let x1sq = x(2, 2, 0).pow(2).unwrap();
        assert_relative_eq!(graded_norm(&s, 2, &x1sq).unwrap(), 1.0, epsilon = 1e-14);
        let sum = x1sq.add(&x(2, 2, 1).pow(2).unwrap()).unwrap();
        assert_relative_eq!(graded_norm(&s, 2, &sum).unwrap(), 2f64.sqrt(), epsilon = 1e-14);
        assert_eq!(graded_norm(&s, 2, &sum.add(&x(2, 2, 0)).unwrap()).unwrap_err(), Error::NotHomogeneous);
    }

    #[test]
    fn kernel_factors_vanish() {
        let s = GramForm::diagonal(&[4.0, 0.0]).unwrap();
        let a = x(2, 2, 0).multiply(&x(2, 2, 1)).unwrap();
        assert_eq!(graded_norm(&s, 2, &a).unwrap(), 0.0);
        // x1 = 2 * (x1 / 2) with x1/2 the unit vector
        assert_relative_eq!(graded_norm(&s, 2, &x(2, 2, 0).pow(2).unwrap()).unwrap(), 4.0, epsilon = 1e-14);
    }

    #[test]
    fn monomial_transform_matches_direct() {
        let s = GramForm::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let f = Frame::canonical(&s);
        let g = f.graded_form(2).unwrap();
        let a = x(2, 2, 0).pow(2).unwrap().add(&x(2, 2, 0).multiply(&x(2, 2, 1)).unwrap().scale(-3.0)).unwrap();
        let c = DVector::from_vec(vec![1.0, -3.0, 0.0]);
        assert_relative_eq!(g.evaluate(&c).unwrap(), f.graded_norm(2, &a).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn p_tilde_examples() {
        let tower = GradedSeminormTower::new(
            vec![(GramForm::identity(1), GramForm::identity(1))],
            vec![1.0, 2.0],
            vec![1.0, 1.0],
            vec![3.0],
        )
        .unwrap();
        assert_relative_eq!(tower.p_tilde(&AlgebraElement::one(1, 1)).unwrap(), 1.0);
        assert_relative_eq!(tower.p_tilde(&x(1, 1, 0)).unwrap(), 2.0 * 3f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(tower.q_tilde(&AlgebraElement::one(1, 1)).unwrap(), 1.0);
        assert_relative_eq!(tower.q_tilde(&x(1, 1, 0)).unwrap(), 1.0);
    }

    #[test]
    fn tilde_trace_examples() {
        let t = GradedSeminormTower::uniform(GramForm::identity(1), GramForm::identity(1), 1).unwrap();
        let r = tilde_trace_identity(&t, 1).unwrap();
        assert_relative_eq!(r.formula, 2.0);
        assert_relative_eq!(r.direct, 2.0, epsilon = 1e-12);

        let t = GradedSeminormTower::uniform(GramForm::diagonal(&[1.0, 4.0]).unwrap(), GramForm::identity(2), 2).unwrap();
        let r = tilde_trace_identity(&t, 2).unwrap();
        assert_relative_eq!(r.formula, 1.0 + 5.0 + 25.0);
        assert_relative_eq!(r.direct, 31.0, epsilon = 1e-10);
        // sorted monomials give h_2(1, 4) = 1 + 4 + 16
        assert_relative_eq!(r.direct_symmetric, 1.0 + 5.0 + 21.0, epsilon = 1e-10);
        assert!(r.agree);

        let t = GradedSeminormTower::uniform(GramForm::identity(3), GramForm::identity(3), 3).unwrap();
        let r = tilde_trace_identity(&t, 3).unwrap();
        assert_relative_eq!(r.direct, 1.0 + 3.0 + 9.0 + 27.0, epsilon = 1e-10);
    }

    #[test]
    fn tilde_trace_infinite() {
        let t = GradedSeminormTower::uniform(GramForm::identity(2), GramForm::diagonal(&[1.0, 0.0]).unwrap(), 1).unwrap();
        assert_eq!(tilde_trace_identity(&t, 1).unwrap_err(), Error::InfiniteTrace);
    }

    #[test]
    fn character_bound_examples() {
        let l = DualFunctional::from_slice(&[1.0, 0.0]);
        let i2 = GramForm::identity(2);
        let r = character_norm_bound(&l, &i2, &i2, 2, &x(2, 2, 0).pow(2).unwrap()).unwrap();
        assert_eq!(r.value, 1.0);
        assert_relative_eq!(r.bound, 4.0, epsilon = 1e-12);
        assert!(r.holds);
        let r = character_norm_bound(&l, &i2, &i2, 2, &AlgebraElement::zero(2, 2)).unwrap();
        assert_eq!((r.value, r.bound), (0.0, 0.0));
        assert!(r.holds);
    }

    #[test]
    fn character_bound_fails_below_unit_trace() {
        // r(x) = 0.1|x|, s(x) = |x|: tr = 0.01, r'(1) = 10, so (r' tr)^d = 0.1^d.
        let r = GramForm::diagonal(&[0.01]).unwrap();
        let s = GramForm::identity(1);
        let l = DualFunctional::from_slice(&[1.0]);
        let a = x(1, 3, 0).pow(3).unwrap();
        let rep = character_norm_bound(&l, &r, &s, 3, &a).unwrap();
        assert!(!rep.holds);
        assert!(rep.sharp_holds);
    }

    #[test]
    fn polarization_constants() {
        assert_eq!(polarization_constant(1), 1.0);
        assert_eq!(polarization_constant(2), 2.0);
        assert_relative_eq!(polarization_constant(3), 4.5, epsilon = 1e-14);
    }

    #[test]
    fn polarization_point_mass() {
        let c = [0.6, -0.8];
        let eval = |a: &AlgebraElement| a.evaluate(&c);
        let r = GramForm::identity(2);
        for d in 1..=3 {
            let rep = polarization_bound_check(eval, &r, d, 200, 7).unwrap();
            assert!(rep.hypothesis_holds && rep.holds, "{rep:?}");
        }
    }
}
