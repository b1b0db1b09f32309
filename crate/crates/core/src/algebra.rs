//! Degree-truncated symmetric algebra `S(R^n)`, realized as sparse
//! polynomials in the coordinate vectors `x_1, ..., x_n` of `R^n`.
//!
//! Multi-indices iterate in graded order: total degree first, then within a
//! degree `x_1^2 < x_1 x_2 < x_2^2`. This is the graded lexicographic order with
//! variable priority `x_n > ... > x_1`, a monomial order, so it is preserved
//! under multiplication.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    pub fn unit(n: usize, i: usize) -> Self {
        let mut v = vec![0; n];
        v[i] = 1;
        MultiIndex(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `self - other` when `other` divides `self`.
    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| a.checked_sub(b))
            .collect::<Option<Vec<_>>>()
            .map(MultiIndex)
    }

    /// `prod_i c_i^{alpha_i}`.
    pub fn eval(&self, c: &[f64]) -> f64 {
        self.0.iter().zip(c).map(|(&e, &x)| x.powi(e as i32)).product()
    }

    /// `alpha! = prod_i alpha_i!`.
    pub fn factorial(&self) -> f64 {
        self.0.iter().map(|&e| (1..=e).map(f64::from).product::<f64>()).product()
    }

    /// Factor positions with multiplicity, e.g. `x_1^2 x_3 -> [0, 0, 2]`.
    pub fn factors(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.degree());
        for (i, &e) in self.0.iter().enumerate() {
            out.extend(std::iter::repeat_n(i, e as usize));
        }
        out
    }

    pub fn from_factors(n: usize, factors: &[usize]) -> Self {
        let mut v = vec![0; n];
        for &i in factors {
            v[i] += 1;
        }
        MultiIndex(v)
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| self.0.iter().rev().cmp(other.0.iter().rev()))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// All multi-indices in `n` variables of total degree exactly `d`, in graded order.
pub fn monomials_of_degree(n: usize, d: usize) -> Vec<MultiIndex> {
    fn rec(n: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if prefix.len() == n - 1 {
            prefix.push(left);
            out.push(MultiIndex(prefix.clone()));
            prefix.pop();
            return;
        }
        for e in (0..=left).rev() {
            prefix.push(e);
            rec(n, left - e, prefix, out);
            prefix.pop();
        }
    }
    if n == 0 {
        return if d == 0 { vec![MultiIndex(vec![])] } else { vec![] };
    }
    let mut out = Vec::new();
    rec(n, d as u32, &mut Vec::with_capacity(n), &mut out);
    out.sort();
    out
}

/// All multi-indices of total degree `<= d`, in graded order.
pub fn monomials_up_to(n: usize, d: usize) -> Vec<MultiIndex> {
    (0..=d).flat_map(|k| monomials_of_degree(n, k)).collect()
}

/// A truncated element `a = sum_alpha c_alpha x^alpha` with `|alpha| <= max_degree`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraElement {
    dim: usize,
    max_degree: usize,
    terms: BTreeMap<MultiIndex, f64>,
}

impl AlgebraElement {
    pub fn zero(dim: usize, max_degree: usize) -> Self {
        AlgebraElement { dim, max_degree, terms: BTreeMap::new() }
    }

    pub fn constant(dim: usize, max_degree: usize, c: f64) -> Self {
        let mut a = Self::zero(dim, max_degree);
        a.add_term(MultiIndex::zero(dim), c);
        a
    }

    pub fn one(dim: usize, max_degree: usize) -> Self {
        Self::constant(dim, max_degree, 1.0)
    }

    /// The generator `x_i` (0-based).
    pub fn variable(dim: usize, max_degree: usize, i: usize) -> Self {
        let mut a = Self::zero(dim, max_degree);
        a.add_term(MultiIndex::unit(dim, i), 1.0);
        a
    }

    /// The degree-one element `sum_i v_i x_i`, i.e. the vector `v` itself.
    pub fn linear(v: &[f64], max_degree: usize) -> Self {
        let n = v.len();
        let mut a = Self::zero(n, max_degree);
        for (i, &c) in v.iter().enumerate() {
            a.add_term(MultiIndex::unit(n, i), c);
        }
        a
    }

    pub fn monomial(dim: usize, max_degree: usize, alpha: MultiIndex, c: f64) -> Result<Self> {
        let mut a = Self::zero(dim, max_degree);
        a.insert_checked(alpha, c)?;
        Ok(a)
    }

    pub fn from_terms<I>(dim: usize, max_degree: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (MultiIndex, f64)>,
    {
        let mut a = Self::zero(dim, max_degree);
        for (alpha, c) in terms {
            a.insert_checked(alpha, c)?;
        }
        Ok(a)
    }

    fn insert_checked(&mut self, alpha: MultiIndex, c: f64) -> Result<()> {
        Error::check_dim(self.dim, alpha.dim())?;
        if alpha.degree() > self.max_degree {
            return Err(Error::DegreeOverflow { got: alpha.degree(), max: self.max_degree });
        }
        self.add_term(alpha, c);
        Ok(())
    }

    fn add_term(&mut self, alpha: MultiIndex, c: f64) {
        if c == 0.0 {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(alpha) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if *e.get() == 0.0 {
                    e.remove();
                }
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn with_max_degree(mut self, d: usize) -> Result<Self> {
        if self.degree() > d {
            return Err(Error::DegreeOverflow { got: self.degree(), max: d });
        }
        self.max_degree = d;
        Ok(self)
    }

    pub fn terms(&self) -> &BTreeMap<MultiIndex, f64> {
        &self.terms
    }

    pub fn coeff(&self, alpha: &MultiIndex) -> f64 {
        self.terms.get(alpha).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Actual degree (0 for the zero element).
    pub fn degree(&self) -> usize {
        self.terms.keys().map(MultiIndex::degree).max().unwrap_or(0)
    }

    /// Homogeneous component `a^(d)`.
    pub fn component(&self, d: usize) -> AlgebraElement {
        let terms = self.terms.iter().filter(|(k, _)| k.degree() == d).map(|(k, v)| (k.clone(), *v)).collect();
        AlgebraElement { dim: self.dim, max_degree: self.max_degree, terms }
    }

    /// `(a^(0), a^(1), ..., a^(D))`.
    pub fn graded_components(&self) -> Vec<AlgebraElement> {
        (0..=self.max_degree).map(|d| self.component(d)).collect()
    }

    /// `Some(d)` when every term has degree `d` (zero is homogeneous of any degree).
    pub fn homogeneous_degree(&self) -> Option<usize> {
        let mut degs = self.terms.keys().map(MultiIndex::degree);
        match degs.next() {
            None => Some(0),
            Some(d) => degs.all(|e| e == d).then_some(d),
        }
    }

    pub fn is_homogeneous_of(&self, d: usize) -> bool {
        self.is_zero() || self.homogeneous_degree() == Some(d)
    }

    fn check_same_space(&self, other: &AlgebraElement) -> Result<()> {
        Error::check_dim(self.dim, other.dim)
    }

    pub fn add(&self, other: &AlgebraElement) -> Result<AlgebraElement> {
        self.check_same_space(other)?;
        let mut out = self.clone();
        out.max_degree = self.max_degree.max(other.max_degree);
        for (k, v) in &other.terms {
            out.add_term(k.clone(), *v);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &AlgebraElement) -> Result<AlgebraElement> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, c: f64) -> AlgebraElement {
        let mut out = AlgebraElement::zero(self.dim, self.max_degree);
        for (k, v) in &self.terms {
            out.add_term(k.clone(), v * c);
        }
        out
    }

    /// Product in `S(R^n)`; errors when the product leaves the truncation.
    pub fn multiply(&self, other: &AlgebraElement) -> Result<AlgebraElement> {
        self.check_same_space(other)?;
        let max = self.max_degree.max(other.max_degree);
        if !self.is_zero() && !other.is_zero() && self.degree() + other.degree() > max {
            return Err(Error::DegreeOverflow { got: self.degree() + other.degree(), max });
        }
        let mut out = AlgebraElement::zero(self.dim, max);
        for (ka, va) in &self.terms {
            for (kb, vb) in &other.terms {
                out.add_term(ka.add(kb), va * vb);
            }
        }
        Ok(out)
    }

    pub fn pow(&self, k: usize) -> Result<AlgebraElement> {
        let mut out = AlgebraElement::one(self.dim, self.max_degree);
        for _ in 0..k {
            out = out.multiply(self)?;
        }
        Ok(out)
    }

    /// Polynomial evaluation at `c`.
    pub fn evaluate(&self, c: &[f64]) -> Result<f64> {
        Error::check_dim(self.dim, c.len())?;
        Ok(self.terms.iter().map(|(k, v)| v * k.eval(c)).sum())
    }

    /// Change of variables `x_i -> sum_k m[(k, i)] y_k`: the result is
    /// the same element written in the basis whose dual coordinates are the
    /// rows of `m` applied to `x`. `m` is `r x n`; the output has `r` variables.
    pub fn linear_change(&self, m: &DMatrix<f64>) -> Result<AlgebraElement> {
        Error::check_dim(self.dim, m.ncols())?;
        let r = m.nrows();
        let images: Vec<AlgebraElement> = (0..self.dim)
            .map(|i| {
                let col: Vec<f64> = m.column(i).iter().copied().collect();
                AlgebraElement::linear(&col, self.max_degree)
            })
            .collect();
        let mut out = AlgebraElement::zero(r, self.max_degree);
        let mut power_cache: BTreeMap<(usize, u32), AlgebraElement> = BTreeMap::new();
        for (alpha, c) in &self.terms {
            let mut prod = AlgebraElement::constant(r, self.max_degree, *c);
            for (i, &e) in alpha.0.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let pw = match power_cache.get(&(i, e)) {
                    Some(p) => p.clone(),
                    None => {
                        let p = images[i].pow(e as usize)?;
                        power_cache.insert((i, e), p.clone());
                        p
                    }
                };
                prod = prod.multiply(&pw)?;
            }
            for (k, v) in prod.terms {
                out.add_term(k, v);
            }
        }
        Ok(out)
    }
}

impl fmt::Display for AlgebraElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let mut first = true;
        for (k, v) in &self.terms {
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            write!(f, "{v}")?;
            for (i, &e) in k.0.iter().enumerate() {
                match e {
                    0 => {}
                    1 => write!(f, "*x{}", i + 1)?,
                    _ => write!(f, "*x{}^{e}", i + 1)?,
                }
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTerm {
    alpha: Vec<u32>,
    c: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawElement {
    dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_degree: Option<usize>,
    terms: Vec<RawTerm>,
}

impl Serialize for AlgebraElement {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RawElement {
            dim: self.dim,
            max_degree: None,
            terms: self.terms.iter().map(|(k, v)| RawTerm { alpha: k.0.clone(), c: *v }).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for AlgebraElement {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawElement::deserialize(d)?;
        let degree = raw.terms.iter().map(|t| t.alpha.iter().sum::<u32>() as usize).max().unwrap_or(0);
        let max_degree = raw.max_degree.unwrap_or(degree);
        AlgebraElement::from_terms(raw.dim, max_degree, raw.terms.into_iter().map(|t| (MultiIndex(t.alpha), t.c)))
            .map_err(serde::de::Error::custom)
    }
}

/// A character of `S(R^n)`: evaluation at a point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Character {
    pub point: Vec<f64>,
}

impl Character {
    pub fn new(point: Vec<f64>) -> Self {
        Character { point }
    }

    pub fn from_vector(v: &DVector<f64>) -> Self {
        Character { point: v.iter().copied().collect() }
    }

    pub fn dim(&self) -> usize {
        self.point.len()
    }

    pub fn evaluate(&self, a: &AlgebraElement) -> Result<f64> {
        a.evaluate(&self.point)
    }
}

pub fn evaluate_character(alpha: &Character, a: &AlgebraElement) -> Result<f64> {
    alpha.evaluate(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn x(i: usize) -> AlgebraElement {
        AlgebraElement::variable(2, 4, i)
    }

    #[test]
    fn graded_order() {
        let m = monomials_up_to(2, 2);
        let got: Vec<Vec<u32>> = m.iter().map(|a| a.0.clone()).collect();
        assert_eq!(got, vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert_eq!(monomials_of_degree(3, 3).len(), 10);
    }

    #[test]
    fn multiply_examples() {
        let p = x(0).multiply(&x(1)).unwrap();
        assert_eq!(p.coeff(&MultiIndex(vec![1, 1])), 1.0);
        assert_eq!(p.terms().len(), 1);

        let one_plus = AlgebraElement::one(2, 4).add(&x(0)).unwrap();
        let sq = one_plus.pow(2).unwrap();
        assert_eq!(sq.coeff(&MultiIndex(vec![0, 0])), 1.0);
        assert_eq!(sq.coeff(&MultiIndex(vec![1, 0])), 2.0);
        assert_eq!(sq.coeff(&MultiIndex(vec![2, 0])), 1.0);

        let a = x(0).add(&x(1)).unwrap();
        let b = x(0).sub(&x(1)).unwrap();
        let d = a.multiply(&b).unwrap();
        assert_eq!(d.terms().len(), 2);
        assert_eq!(d.coeff(&MultiIndex(vec![2, 0])), 1.0);
        assert_eq!(d.coeff(&MultiIndex(vec![0, 2])), -1.0);
    }

    #[test]
    fn multiply_overflow() {
        let a = AlgebraElement::variable(1, 2, 0).pow(2).unwrap();
        assert_eq!(a.multiply(&a).unwrap_err(), Error::DegreeOverflow { got: 4, max: 2 });
    }

    #[test]
    fn evaluate_examples() {
        let c = Character::new(vec![2.0, 5.0]);
        assert_eq!(c.evaluate(&AlgebraElement::one(2, 2)).unwrap(), 1.0);
        assert_eq!(c.evaluate(&x(0).pow(2).unwrap()).unwrap(), 4.0);
        let a = x(0).multiply(&x(1)).unwrap().add(&x(1).pow(2).unwrap()).unwrap();
        assert_eq!(Character::new(vec![1.0, 3.0]).evaluate(&a).unwrap(), 12.0);
        assert!(Character::new(vec![1.0]).evaluate(&a).is_err());
    }

    #[test]
    fn components_and_homogeneity() {
        let a = AlgebraElement::one(2, 4).add(&x(0)).unwrap().pow(3).unwrap();
        let comps = a.graded_components();
        assert_eq!(comps.len(), 5);
        let back = comps.iter().try_fold(AlgebraElement::zero(2, 4), |acc, c| acc.add(c)).unwrap();
        assert_eq!(back, a);
        assert_eq!(comps[2].homogeneous_degree(), Some(2));
        assert_eq!(a.homogeneous_degree(), None);
    }

    #[test]
    fn linear_change_rotation() {
        // x1 = (y1 + y2)/sqrt2, x2 = (y1 - y2)/sqrt2 => x1 x2 = (y1^2 - y2^2)/2
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let m = DMatrix::from_row_slice(2, 2, &[s, s, s, -s]);
        let p = x(0).multiply(&x(1)).unwrap().linear_change(&m).unwrap();
        assert_relative_eq!(p.coeff(&MultiIndex(vec![2, 0])), 0.5, epsilon = 1e-15);
        assert_relative_eq!(p.coeff(&MultiIndex(vec![0, 2])), -0.5, epsilon = 1e-15);
        assert!(p.coeff(&MultiIndex(vec![1, 1])).abs() < 1e-15);
    }

    #[test]
    fn json_is_graded() {
        let a = x(1).add(&AlgebraElement::one(2, 4)).unwrap().add(&x(0).pow(2).unwrap()).unwrap();
        let s = serde_json::to_string(&a).unwrap();
        assert_eq!(
            s,
            r#"{"dim":2,"terms":[{"alpha":[0,0],"c":1.0},{"alpha":[0,1],"c":1.0},{"alpha":[2,0],"c":1.0}]}"#
        );
        let back: AlgebraElement = serde_json::from_str(&s).unwrap();
        assert_eq!(back.terms(), a.terms());
    }
}
