use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const NORMALIZATION_TOL: f64 = 1e-12;

/// A probability measure with finitely many atoms in `R^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure", into = "RawMeasure")]
pub struct DiscreteMeasure {
    dim: usize,
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeasure {
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl TryFrom<RawMeasure> for DiscreteMeasure {
    type Error = Error;
    fn try_from(raw: RawMeasure) -> Result<Self> {
        DiscreteMeasure::new(raw.atoms, raw.weights)
    }
}

impl From<DiscreteMeasure> for RawMeasure {
    fn from(m: DiscreteMeasure) -> Self {
        RawMeasure { atoms: m.atoms, weights: m.weights }
    }
}

impl DiscreteMeasure {
    /// Weights must be nonnegative and sum to one within `1e-12`.
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Invalid("a measure needs at least one atom".into()));
        }
        Error::check_dim(atoms.len(), weights.len())?;
        let dim = atoms[0].len();
        if dim == 0 {
            return Err(Error::Invalid("atoms must have dimension >= 1".into()));
        }
        for a in &atoms {
            Error::check_dim(dim, a.len())?;
            if a.iter().any(|x| !x.is_finite()) {
                return Err(Error::Invalid("non-finite atom coordinate".into()));
            }
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::Invalid(format!("negative or non-finite weight {w}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Invalid(format!("weights sum to {total}, expected 1")));
        }
        Ok(DiscreteMeasure { dim, atoms, weights })
    }

    /// Rescales nonnegative weights to total mass one.
    pub fn normalized(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Invalid("total mass must be positive".into()));
        }
        let w = weights.iter().map(|x| x / total).collect();
        Self::new(atoms, w)
    }

    pub fn dirac(point: Vec<f64>) -> Result<Self> {
        Self::new(vec![point], vec![1.0])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn atom_vector(&self, j: usize) -> DVector<f64> {
        DVector::from_column_slice(&self.atoms[j])
    }

    /// Atoms carrying positive weight.
    pub fn support(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.atoms.iter().zip(&self.weights).filter(|(_, &w)| w > 0.0).map(|(a, &w)| (a.as_slice(), w))
    }

    /// `sum_j w_j f(atom_j)`.
    pub fn integrate<F: FnMut(&[f64]) -> f64>(&self, mut f: F) -> f64 {
        self.atoms.iter().zip(&self.weights).map(|(a, &w)| w * f(a)).sum()
    }

    /// Exact mass of the atoms satisfying `pred`.
    pub fn mass_where<F: FnMut(&[f64]) -> bool>(&self, mut pred: F) -> f64 {
        self.atoms.iter().zip(&self.weights).filter(|(a, _)| pred(a)).map(|(_, &w)| w).sum()
    }

    /// Uncentered second-moment matrix `sum_j w_j c_j c_j^T`.
    pub fn second_moment_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (a, &w) in self.atoms.iter().zip(&self.weights) {
            let c = DVector::from_column_slice(a);
            m += (&c * c.transpose()) * w;
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(DiscreteMeasure::new(vec![vec![0.0]], vec![0.5]).is_err());
        assert!(DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![1.5, -0.5]).is_err());
        assert!(DiscreteMeasure::new(vec![vec![0.0], vec![1.0, 2.0]], vec![0.5, 0.5]).is_err());
        let m = DiscreteMeasure::normalized(vec![vec![1.0], vec![-1.0]], vec![2.0, 2.0]).unwrap();
        assert_eq!(m.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn second_moments() {
        let m = DiscreteMeasure::new(vec![vec![1.0, 2.0], vec![-1.0, 0.0]], vec![0.5, 0.5]).unwrap();
        let s = m.second_moment_matrix();
        assert_eq!(s, DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 2.0]));
    }

    #[test]
    fn json_shape() {
        let m = DiscreteMeasure::new(vec![vec![1.0], vec![-1.0]], vec![0.5, 0.5]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"atoms":[[1.0],[-1.0]],"weights":[0.5,0.5]}"#);
        let back: DiscreteMeasure = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<DiscreteMeasure>(r#"{"atoms":[[1.0]],"weights":[0.3]}"#).is_err());
    }
}
