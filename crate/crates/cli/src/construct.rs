//! Building a dominating form `q` from a complete `p`-orthonormal system and a
//! square-summable weight sequence.

use moment_core::trace::trace;
use moment_core::{Error, GramForm, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Orthonormality error tolerated in the input system and the output check.
pub const SYSTEM_TOL: f64 = 1e-10;

/// Positive weights `lambda_1..lambda_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightSequence {
    values: Vec<f64>,
}

impl TryFrom<Vec<f64>> for WeightSequence {
    type Error = Error;
    fn try_from(values: Vec<f64>) -> Result<Self> {
        WeightSequence::new(values)
    }
}

impl From<WeightSequence> for Vec<f64> {
    fn from(w: WeightSequence) -> Self {
        w.values
    }
}

impl WeightSequence {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::Invalid("weights must be positive and finite".into()));
        }
        Ok(WeightSequence { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn square_sum(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstructedQ {
    pub q: GramForm,
    pub trace: f64,
    /// `sum lambda_n^2`.
    pub expected: f64,
    pub trace_error: f64,
    /// Largest entry of `|Gram_q(lambda_n e_n) - I|`.
    pub orthonormality_error: f64,
    pub holds: bool,
}

/// `q(v)^2 = sum_n lambda_n^-2 <v, e_n>_p^2`, so that `tr(p/q) = sum_n lambda_n^2`.
pub fn construct_q(p: &GramForm, system: &[DVector<f64>], lambda: &WeightSequence) -> Result<ConstructedQ> {
    let n = p.dim();
    if system.len() != lambda.len() {
        return Err(Error::IncompleteSystem(format!("{} vectors for {} weights", system.len(), lambda.len())));
    }
    for e in system {
        if e.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: e.len() });
        }
    }
    if system.len() != p.rank() {
        return Err(Error::IncompleteSystem(format!("{} vectors for a form of rank {}", system.len(), p.rank())));
    }
    let g = p.gram();
    let e = DMatrix::from_columns(system);
    let input_error = (e.transpose() * g * &e - DMatrix::identity(system.len(), system.len())).amax();
    if input_error > SYSTEM_TOL {
        return Err(Error::IncompleteSystem(format!("system is not p-orthonormal (error {input_error:e})")));
    }

    let mut gq = DMatrix::zeros(n, n);
    for (en, &l) in system.iter().zip(lambda.values()) {
        let ge = g * en;
        gq += &ge * ge.transpose() / (l * l);
    }
    let gq = (&gq + gq.transpose()) * 0.5;
    let q = GramForm::new(gq)?;

    let tr = trace(p, &q)?.finite().ok_or(Error::InfiniteTrace)?;
    let expected = lambda.square_sum();
    let trace_error = (tr - expected).abs();
    let scaled = DMatrix::from_columns(&system.iter().zip(lambda.values()).map(|(en, &l)| en * l).collect::<Vec<_>>());
    let orthonormality_error = (scaled.transpose() * q.gram() * &scaled - DMatrix::identity(system.len(), system.len())).amax();
    let holds = trace_error <= SYSTEM_TOL * expected.max(1.0) && orthonormality_error < SYSTEM_TOL;
    Ok(ConstructedQ { q, trace: tr, expected, trace_error, orthonormality_error, holds })
}
