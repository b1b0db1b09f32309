//! Normalized linear functionals on the truncated symmetric algebra, stored
//! through their moments `L(x^alpha)`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::algebra::{monomials_up_to, monomials_of_degree, AlgebraElement, MultiIndex};
use crate::error::{Error, Result};
use crate::extended::Extended;
use crate::graded::{Frame, GradedSeminormTower};
use crate::linalg;
use crate::measure::DiscreteMeasure;
use crate::seminorm::{DualFunctional, GramForm};
use crate::tolerances::{INEQUALITY_SLACK, MOMENT_MATCH_TOL, PSD_TOL};

/// `L` on `S(R^n)` truncated at `max_degree`, with `L(1) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentFunctional {
    dim: usize,
    max_degree: usize,
    moments: BTreeMap<MultiIndex, f64>,
    source: Option<DiscreteMeasure>,
}

impl MomentFunctional {
    /// Missing moments are zero; `moments[0]` must be 1.
    pub fn new(dim: usize, max_degree: usize, moments: BTreeMap<MultiIndex, f64>) -> Result<Self> {
        let mut dense = BTreeMap::new();
        for alpha in monomials_up_to(dim, max_degree) {
            dense.insert(alpha, 0.0);
        }
        for (alpha, v) in moments {
            Error::check_dim(dim, alpha.dim())?;
            if alpha.degree() > max_degree {
                return Err(Error::DegreeOverflow { got: alpha.degree(), max: max_degree });
            }
            if !v.is_finite() {
                return Err(Error::Invalid(format!("moment {:?} is not finite", alpha.0)));
            }
            dense.insert(alpha, v);
        }
        let m0 = dense[&MultiIndex::zero(dim)];
        if (m0 - 1.0).abs() > 1e-12 {
            return Err(Error::Invalid(format!("L(1) = {m0}, expected 1")));
        }
        Ok(MomentFunctional { dim, max_degree, moments: dense, source: None })
    }

    /// One-variable functional from `(m_0, m_1, ..., m_K)`.
    pub fn univariate(sequence: &[f64]) -> Result<Self> {
        if sequence.is_empty() {
            return Err(Error::Invalid("empty moment sequence".into()));
        }
        let moments = sequence.iter().enumerate().map(|(k, &m)| (MultiIndex(vec![k as u32]), m)).collect();
        Self::new(1, sequence.len() - 1, moments)
    }

    /// `L(a) = sum_j w_j a(atom_j)`.
    pub fn from_measure(nu: &DiscreteMeasure, max_degree: usize) -> Self {
        let moments = monomials_up_to(nu.dim(), max_degree)
            .into_iter()
            .map(|alpha| {
                let v = nu.integrate(|x| alpha.eval(x));
                (alpha, v)
            })
            .collect();
        MomentFunctional { dim: nu.dim(), max_degree, moments, source: Some(nu.clone()) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn moments(&self) -> &BTreeMap<MultiIndex, f64> {
        &self.moments
    }

    pub fn source(&self) -> Option<&DiscreteMeasure> {
        self.source.as_ref()
    }

    pub fn moment(&self, alpha: &MultiIndex) -> Result<f64> {
        Error::check_dim(self.dim, alpha.dim())?;
        self.moments
            .get(alpha)
            .copied()
            .ok_or(Error::DegreeOverflow { got: alpha.degree(), max: self.max_degree })
    }

    /// Recomputes moments to a higher degree from the source measure.
    pub fn extended(&self, max_degree: usize) -> Result<Self> {
        if max_degree <= self.max_degree {
            return Ok(self.clone());
        }
        match &self.source {
            Some(nu) => Ok(Self::from_measure(nu, max_degree)),
            None => Err(Error::DegreeOverflow { got: max_degree, max: self.max_degree }),
        }
    }

    /// The moment sequence restricted to the coordinates in `coords`.
    pub fn marginal(&self, coords: &[usize]) -> Result<Self> {
        let k = coords.len();
        let mut moments = BTreeMap::new();
        for alpha in monomials_up_to(k, self.max_degree) {
            let mut full = vec![0u32; self.dim];
            for (slot, &c) in coords.iter().enumerate() {
                if c >= self.dim {
                    return Err(Error::DimensionMismatch { expected: self.dim, got: c + 1 });
                }
                full[c] += alpha.0[slot];
            }
            moments.insert(alpha, self.moments[&MultiIndex(full)]);
        }
        let source = match &self.source {
            Some(nu) => {
                let atoms = nu.atoms().iter().map(|a| coords.iter().map(|&c| a[c]).collect()).collect();
                Some(DiscreteMeasure::new(atoms, nu.weights().to_vec())?)
            }
            None => None,
        };
        Ok(MomentFunctional { dim: k, max_degree: self.max_degree, moments, source })
    }

    pub fn apply(&self, a: &AlgebraElement) -> Result<f64> {
        Error::check_dim(self.dim, a.dim())?;
        if a.degree() > self.max_degree {
            return Err(Error::DegreeOverflow { got: a.degree(), max: self.max_degree });
        }
        Ok(a.terms().iter().map(|(alpha, c)| c * self.moments[alpha]).sum())
    }

    fn apply_scale(&self, a: &AlgebraElement) -> f64 {
        a.terms().iter().map(|(alpha, c)| (c * self.moments.get(alpha).copied().unwrap_or(0.0)).abs()).sum()
    }

    /// `M[alpha, beta] = L(x^(alpha+beta))` over monomials of degree `<= d`.
    pub fn moment_matrix(&self, d: usize) -> Result<DMatrix<f64>> {
        self.localizing_matrix(&AlgebraElement::one(self.dim, 0), d)
    }

    /// `M_g[alpha, beta] = L(g x^(alpha+beta))`.
    pub fn localizing_matrix(&self, g: &AlgebraElement, d: usize) -> Result<DMatrix<f64>> {
        Error::check_dim(self.dim, g.dim())?;
        let need = 2 * d + g.degree();
        if need > self.max_degree {
            return Err(Error::DegreeOverflow { got: need, max: self.max_degree });
        }
        let basis = monomials_up_to(self.dim, d);
        let k = basis.len();
        let mut m = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in i..k {
                let shift = basis[i].add(&basis[j]);
                let v: f64 = g.terms().iter().map(|(gamma, c)| c * self.moments[&gamma.add(&shift)]).sum();
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(m)
    }

    /// Smallest eigenvalue of the degree-`d` moment matrix and whether it passes the PSD tolerance.
    pub fn positivity(&self, d: usize) -> Result<PsdCertificate> {
        Ok(PsdCertificate::of(&self.moment_matrix(d)?))
    }

    /// `s_L(a) = sqrt(L(a^2))`.
    pub fn s_l(&self, a: &AlgebraElement) -> Result<f64> {
        let d = a.degree();
        let cert = self.positivity(d)?;
        if !cert.psd {
            return Err(Error::NotSquarePositive(cert.min_eigenvalue));
        }
        let sq = a.clone().with_max_degree(2 * d)?.pow(2)?;
        let v = self.apply(&sq)?;
        if v < 0.0 {
            let tol = PSD_TOL * (1.0 + self.apply_scale(&sq));
            if v < -tol {
                return Err(Error::NotSquarePositive(v));
            }
            return Ok(0.0);
        }
        Ok(v.sqrt())
    }

    /// `L(ab)^2 <= L(a^2) L(b^2)` with relative slack.
    pub fn cbs_check(&self, a: &AlgebraElement, b: &AlgebraElement) -> Result<bool> {
        let deg = a.degree().max(b.degree());
        let a2 = a.clone().with_max_degree(2 * deg)?;
        let b2 = b.clone().with_max_degree(2 * deg)?;
        let lab = self.apply(&a2.multiply(&b2)?)?;
        let laa = self.apply(&a2.pow(2)?)?;
        let lbb = self.apply(&b2.pow(2)?)?;
        let rhs = laa * lbb;
        Ok(lab * lab <= rhs + INEQUALITY_SLACK * rhs.abs().max(lab * lab).max(1e-300))
    }

    /// Values `L(x^alpha)` over the degree-`d` monomials, in graded order.
    fn slice_vector(&self, d: usize) -> Result<DVector<f64>> {
        if d > self.max_degree {
            return Err(Error::DegreeOverflow { got: d, max: self.max_degree });
        }
        let basis = monomials_of_degree(self.dim, d);
        Ok(DVector::from_iterator(basis.len(), basis.iter().map(|a| self.moments[a])))
    }

    /// Smallest `C` with `|L(b)| <= C s~^(d)(b)` on `S(R^n)_d`, the graded norm taken in `frame`.
    pub fn continuity_constant_in_frame(&self, frame: &Frame, d: usize) -> Result<Extended> {
        Error::check_dim(self.dim, frame.form().dim())?;
        let ell = self.slice_vector(d)?;
        let form = frame.graded_form(d)?;
        form.dual_norm(&DualFunctional::new(ell))
    }

    /// `C_{L,2d}`: continuity of `L` on the degree-`2d` slice w.r.t. the graded norm of `p_2d`.
    pub fn continuity_constant(&self, p: &GramForm, d: usize) -> Result<Extended> {
        self.continuity_constant_in_frame(&Frame::canonical(p), 2 * d)
    }

    /// Smallest `C` with `L(b^2) <= C s~^(d)(b)^2` for homogeneous `b` of degree `d`.
    pub fn square_constant_in_frame(&self, frame: &Frame, d: usize) -> Result<Extended> {
        Error::check_dim(self.dim, frame.form().dim())?;
        if 2 * d > self.max_degree {
            return Err(Error::DegreeOverflow { got: 2 * d, max: self.max_degree });
        }
        let basis = monomials_of_degree(self.dim, d);
        let k = basis.len();
        let m = DMatrix::from_fn(k, k, |i, j| self.moments[&basis[i].add(&basis[j])]);
        frame.graded_form(d)?.sup_quadratic(&m)
    }

    /// Tower whose constants make `p~` dominate `L`:
    /// `C_d = max(C_{L,2d}, square constant at degree d)`, both in the tower's frame of `p_2d`.
    pub fn tower(&self, forms: Vec<(GramForm, GramForm)>, lambda: Vec<f64>, eta: Vec<f64>) -> Result<GradedSeminormTower> {
        let depth = forms.len();
        let tower = GradedSeminormTower::new(forms, lambda, eta, vec![1.0; depth])?;
        let mut constants = Vec::with_capacity(depth);
        for level in tower.levels() {
            let d = level.degree;
            let c = self.continuity_constant_in_frame(&level.p_frame, 2 * d)?;
            let s = self.square_constant_in_frame(&level.p_frame, d)?;
            match (c, s) {
                (Extended::Finite(c), Extended::Finite(s)) => constants.push(c.max(s)),
                _ => return Err(Error::NotContinuous),
            }
        }
        tower.with_constants(constants)
    }

    /// `|L(a)|^2` and `L(a^2)` against `(sum_d lambda_d^-2) p~(a)^2`.
    pub fn tower_bound_check(&self, tower: &GradedSeminormTower, a: &AlgebraElement) -> Result<TowerBoundReport> {
        let value = self.apply(a)?;
        let deg = a.degree();
        let sq = a.clone().with_max_degree(2 * deg)?.pow(2)?;
        let square = self.apply(&sq)?;
        let pt = tower.p_tilde(a)?;
        let bound = tower.lambda_inverse_square_sum() * pt * pt;
        let slack = INEQUALITY_SLACK * bound.max(1.0);
        Ok(TowerBoundReport {
            value_squared: value * value,
            square,
            bound,
            holds: value * value <= bound + slack && square <= bound + slack,
        })
    }

    /// Differences against another functional over the shared degree range.
    pub fn max_moment_gap(&self, other: &MomentFunctional) -> Result<f64> {
        Error::check_dim(self.dim, other.dim)?;
        let d = self.max_degree.min(other.max_degree);
        Ok(monomials_up_to(self.dim, d)
            .iter()
            .map(|a| (self.moments[a] - other.moments[a]).abs())
            .fold(0.0, f64::max))
    }

    pub fn matches(&self, other: &MomentFunctional) -> Result<bool> {
        Ok(self.max_moment_gap(other)? <= MOMENT_MATCH_TOL)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsdCertificate {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub psd: bool,
}

impl PsdCertificate {
    pub fn of(m: &DMatrix<f64>) -> Self {
        if m.is_empty() {
            return PsdCertificate { min_eigenvalue: 0.0, max_eigenvalue: 0.0, psd: true };
        }
        let (vals, _) = linalg::sym_eigen(&linalg::symmetrize(m));
        let min = vals[0];
        let max = vals[vals.len() - 1];
        PsdCertificate { min_eigenvalue: min, max_eigenvalue: max, psd: min >= -PSD_TOL * max.abs().max(f64::MIN_POSITIVE) }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TowerBoundReport {
    pub value_squared: f64,
    pub square: f64,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMoment {
    alpha: Vec<u32>,
    value: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMomentFile {
    dim: usize,
    max_degree: usize,
    moments: Vec<RawMoment>,
}

impl Serialize for MomentFunctional {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RawMomentFile {
            dim: self.dim,
            max_degree: self.max_degree,
            moments: self.moments.iter().map(|(a, v)| RawMoment { alpha: a.0.clone(), value: *v }).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MomentFunctional {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawMomentFile::deserialize(d)?;
        let moments = raw.moments.into_iter().map(|m| (MultiIndex(m.alpha), m.value)).collect();
        MomentFunctional::new(raw.dim, raw.max_degree, moments).map_err(serde::de::Error::custom)
    }
}

/// Finitely generated quadratic module, described by its generators `g_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct QuadraticModuleSpec {
    pub generators: Vec<AlgebraElement>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LocalizingCertificate {
    pub generator: usize,
    pub degree: usize,
    pub certificate: PsdCertificate,
}

impl QuadraticModuleSpec {
    pub fn new(generators: Vec<AlgebraElement>) -> Self {
        QuadraticModuleSpec { generators }
    }

    /// `c in K_Q`, i.e. `g_i(c) >= -tol` for every generator.
    pub fn contains(&self, point: &[f64], tol: f64) -> Result<bool> {
        for g in &self.generators {
            if g.evaluate(point)? < -tol {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Generators restricted to the coordinates in `coords`, keeping those that only involve them.
    pub fn restrict(&self, coords: &[usize]) -> Result<QuadraticModuleSpec> {
        let mut out = Vec::new();
        for g in &self.generators {
            let inside = g.terms().keys().all(|alpha| {
                alpha.0.iter().enumerate().all(|(i, &e)| e == 0 || coords.contains(&i))
            });
            if !inside {
                continue;
            }
            let terms = g.terms().iter().map(|(alpha, &c)| (MultiIndex(coords.iter().map(|&i| alpha.0[i]).collect()), c));
            out.push(AlgebraElement::from_terms(coords.len(), g.max_degree(), terms)?);
        }
        Ok(QuadraticModuleSpec { generators: out })
    }

    /// Moment matrix plus one localizing matrix per generator, each at the largest admissible degree.
    pub fn certificates(&self, l: &MomentFunctional) -> Result<Vec<LocalizingCertificate>> {
        let mut out = vec![LocalizingCertificate {
            generator: 0,
            degree: l.max_degree() / 2,
            certificate: l.positivity(l.max_degree() / 2)?,
        }];
        for (i, g) in self.generators.iter().enumerate() {
            if g.degree() > l.max_degree() {
                return Err(Error::DegreeOverflow { got: g.degree(), max: l.max_degree() });
            }
            let d = (l.max_degree() - g.degree()) / 2;
            out.push(LocalizingCertificate {
                generator: i + 1,
                degree: d,
                certificate: PsdCertificate::of(&l.localizing_matrix(g, d)?),
            });
        }
        Ok(out)
    }
}
