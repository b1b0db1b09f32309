//! Relative trace `tr(p/q)` of one Hilbertian seminorm with respect to another.
//!
//! When `ker(q)` is contained in `ker(p)` the trace equals `sum p(e)^2` over
//! any complete `q`-orthonormal system `e`; otherwise it is infinite. The
//! operator route computes the same number as the trace of `G_q^+ G_p`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extended::Extended;
use crate::linalg;
use crate::seminorm::{GramForm, OrthonormalSystem};
use crate::tolerances::{INEQUALITY_SLACK, TRACE_AGREEMENT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceMethod {
    OrthonormalSum,
    OperatorTrace,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceReport {
    pub value: Extended,
    pub method: TraceMethod,
    #[serde(skip)]
    pub witness_basis: Option<OrthonormalSystem>,
}

impl TraceReport {
    pub fn finite(&self) -> Option<f64> {
        self.value.finite()
    }

    fn infinite(method: TraceMethod) -> Self {
        TraceReport { value: Extended::Infinite, method, witness_basis: None }
    }
}

/// `tr(p/q)` as the sum of `p(e)^2` over the whitening basis of `q`.
pub fn trace(p: &GramForm, q: &GramForm) -> Result<TraceReport> {
    Error::check_dim(q.dim(), p.dim())?;
    if !q.kernel_contained_in(p)? {
        return Ok(TraceReport::infinite(TraceMethod::OrthonormalSum));
    }
    let w = q.whitening();
    let vectors: Vec<DVector<f64>> = w.column_iter().map(|c| c.clone_owned()).collect();
    let system = OrthonormalSystem { form: q.clone(), vectors, complete: true };
    let value = trace_in_basis(p, &system)?;
    Ok(TraceReport { value: Extended::Finite(value), method: TraceMethod::OrthonormalSum, witness_basis: Some(system) })
}

/// `sum_{e in E} p(e)^2` for an arbitrary finite system `E`.
pub fn trace_in_basis(p: &GramForm, system: &OrthonormalSystem) -> Result<f64> {
    system.vectors.iter().map(|e| p.squared(e)).sum()
}

/// `tr(G_q^+ G_p)`, computed without forming an orthonormal system.
pub fn operator_trace(p: &GramForm, q: &GramForm) -> Result<TraceReport> {
    Error::check_dim(q.dim(), p.dim())?;
    if !q.kernel_contained_in(p)? {
        return Ok(TraceReport::infinite(TraceMethod::OperatorTrace));
    }
    let value = if q.has_trivial_kernel() {
        match q.gram().clone().cholesky() {
            Some(chol) => chol.solve(p.gram()).trace(),
            None => (q.pseudo_inverse() * p.gram()).trace(),
        }
    } else {
        (q.pseudo_inverse() * p.gram()).trace()
    };
    Ok(TraceReport { value: Extended::Finite(value.max(0.0)), method: TraceMethod::OperatorTrace, witness_basis: None })
}

fn finite_trace(p: &GramForm, q: &GramForm) -> Result<f64> {
    trace(p, q)?.finite().ok_or(Error::InfiniteTrace)
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Computes `tr(eps p / delta q)` from the scaled forms and compares it with
/// `(eps/delta)^2 tr(p/q)`.
pub fn trace_scaling_check(p: &GramForm, q: &GramForm, eps: f64, delta: f64) -> Result<bool> {
    if !(eps > 0.0 && delta > 0.0) {
        return Err(Error::Invalid("scaling factors must be positive".into()));
    }
    let base = finite_trace(p, q)?;
    let scaled = finite_trace(&p.scaled(eps)?, &q.scaled(delta)?)?;
    let formula = (eps / delta).powi(2) * base;
    Ok(rel_close(scaled, formula, TRACE_AGREEMENT) || (scaled - formula).abs() < 1e-300)
}

/// Trace of the restrictions of `p` and `q` to `span(w)`.
pub fn restricted_trace(p: &GramForm, q: &GramForm, w: &[DVector<f64>]) -> Result<Extended> {
    Error::check_dim(q.dim(), p.dim())?;
    for v in w {
        Error::check_dim(p.dim(), v.len())?;
    }
    let basis = linalg::orthonormal_span(w, p.dim(), 1e-12);
    if basis.ncols() == 0 {
        return Ok(Extended::Finite(0.0));
    }
    Ok(trace(&p.restrict(&basis)?, &q.restrict(&basis)?)?.value)
}

/// `tr(p|_W / q|_W) <= tr(p/q)` up to relative slack.
pub fn trace_restriction_check(p: &GramForm, q: &GramForm, w: &[DVector<f64>]) -> Result<bool> {
    let full = finite_trace(p, q)?;
    Ok(match restricted_trace(p, q, w)? {
        Extended::Finite(r) => r <= full + INEQUALITY_SLACK * full.max(1.0),
        Extended::Infinite => false,
    })
}

/// Verifies `p(v)^2 <= tr(p/q) q(v)^2` through the largest eigenvalue of the
/// whitened `p`, on a deterministic grid of vectors and on `samples` seeded
/// random vectors.
pub fn dominance_check(p: &GramForm, q: &GramForm, samples: usize) -> Result<bool> {
    let tr = finite_trace(p, q)?;
    let slack = |x: f64| x + INEQUALITY_SLACK * x.abs().max(1e-300);
    let w = q.whitening();
    let lmax = linalg::lambda_max(&(w.transpose() * p.gram() * &w));
    if lmax > slack(tr) {
        return Ok(false);
    }
    let n = p.dim();
    let mut probes: Vec<DVector<f64>> = Vec::new();
    for i in 0..n {
        probes.push(DVector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 }));
        for j in (i + 1)..n {
            probes.push(DVector::from_fn(n, |k, _| if k == i || k == j { 1.0 } else { 0.0 }));
            probes.push(DVector::from_fn(n, |k, _| if k == i { 1.0 } else if k == j { -1.0 } else { 0.0 }));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x7ace);
    for _ in 0..samples {
        probes.push(DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)));
    }
    for v in &probes {
        let lhs = p.squared(v)?;
        let rhs = tr * q.squared(v)?;
        if lhs > slack(rhs) + 1e-14 * v.norm_squared() * p.lambda_max() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Diagonal seminorms `p_1 <= p_2 <= ...` on `R^N` with consecutive traces
/// `sum_{n <= N} n^-2`.
#[derive(Debug, Clone)]
pub struct SeminormTower {
    pub dim: usize,
    pub forms: Vec<GramForm>,
}

impl SeminormTower {
    pub fn consecutive_traces(&self) -> Result<Vec<f64>> {
        self.forms.windows(2).map(|w| finite_trace(&w[0], &w[1])).collect()
    }
}

pub fn nuclear_tower(dim: usize, levels: usize) -> Result<SeminormTower> {
    if dim < 1 || levels < 2 {
        return Err(Error::Invalid("nuclear tower needs dim >= 1 and at least two levels".into()));
    }
    let forms = (1..=levels)
        .map(|k| {
            let diag = DVector::from_fn(dim, |i, _| ((i + 1) as f64).powi(2 * k as i32));
            // exact diagonal forms; a relative kernel cutoff would swallow the
            // small entries once the dynamic range exceeds 1/psd_tol
            GramForm::with_tolerance(DMatrix::from_diagonal(&diag), 0.0)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SeminormTower { dim, forms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn trace_examples() {
        let p = GramForm::diagonal(&[1.0, 4.0]).unwrap();
        let id = GramForm::identity(2);
        assert_relative_eq!(trace(&p, &id).unwrap().finite().unwrap(), 5.0, epsilon = 1e-14);
        let id5 = GramForm::identity(5);
        assert_relative_eq!(trace(&id5, &id5).unwrap().finite().unwrap(), 5.0, epsilon = 1e-14);
        let q = GramForm::diagonal(&[1.0, 0.0]).unwrap();
        assert_eq!(trace(&id, &q).unwrap().value, Extended::Infinite);
        assert_eq!(operator_trace(&id, &q).unwrap().value, Extended::Infinite);
    }

    #[test]
    fn degenerate_q_with_contained_kernel() {
        let q = GramForm::diagonal(&[2.0, 0.0]).unwrap();
        let p = GramForm::diagonal(&[3.0, 0.0]).unwrap();
        assert_relative_eq!(trace(&p, &q).unwrap().finite().unwrap(), 1.5, epsilon = 1e-14);
        assert_relative_eq!(operator_trace(&p, &q).unwrap().finite().unwrap(), 1.5, epsilon = 1e-14);
    }

    #[test]
    fn report_json() {
        let id = GramForm::identity(2);
        let q = GramForm::diagonal(&[1.0, 0.0]).unwrap();
        let r = trace(&id, &q).unwrap();
        assert_eq!(serde_json::to_string(&r).unwrap(), r#"{"value":"infinite","method":"orthonormal_sum"}"#);
        let r = trace(&id, &id).unwrap();
        assert_eq!(serde_json::to_string(&r).unwrap(), r#"{"value":2.0,"method":"orthonormal_sum"}"#);
    }

    #[test]
    fn scaling_examples() {
        let p = GramForm::diagonal(&[1.0, 4.0]).unwrap();
        let id = GramForm::identity(2);
        assert!(trace_scaling_check(&p, &id, 2.0, 0.5).unwrap());
        let scaled = finite_trace(&p.scaled(2.0).unwrap(), &id.scaled(0.5).unwrap()).unwrap();
        assert_relative_eq!(scaled, 80.0, epsilon = 1e-12);
        assert!(trace_scaling_check(&p, &id, 1.0, 1.0).unwrap());
    }

    #[test]
    fn restriction_examples() {
        let p = GramForm::diagonal(&[1.0, 4.0]).unwrap();
        let id = GramForm::identity(2);
        let e1 = DVector::from_column_slice(&[1.0, 0.0]);
        let e2 = DVector::from_column_slice(&[0.0, 1.0]);
        let r = restricted_trace(&p, &id, std::slice::from_ref(&e1)).unwrap().finite().unwrap();
        assert_relative_eq!(r, 1.0, epsilon = 1e-14);
        assert!(trace_restriction_check(&p, &id, std::slice::from_ref(&e1)).unwrap());
        let full = restricted_trace(&p, &id, &[e1, e2]).unwrap().finite().unwrap();
        assert_relative_eq!(full, 5.0, epsilon = 1e-13);
    }

    #[test]
    fn dominance_examples() {
        let p = GramForm::diagonal(&[1.0, 4.0]).unwrap();
        let id = GramForm::identity(2);
        assert!(dominance_check(&p, &id, 64).unwrap());
        assert!(dominance_check(&id, &id, 64).unwrap());
        let c = 3.0;
        let pc = id.scaled(c).unwrap();
        assert_relative_eq!(finite_trace(&pc, &id).unwrap(), c * c * 2.0, epsilon = 1e-13);
        assert!(dominance_check(&pc, &id, 64).unwrap());
    }

    #[test]
    fn nuclear_tower_examples() {
        let t = nuclear_tower(3, 3).unwrap();
        for tr in t.consecutive_traces().unwrap() {
            assert_relative_eq!(tr, 49.0 / 36.0, epsilon = 1e-14);
        }
        let t = nuclear_tower(1, 2).unwrap();
        assert_relative_eq!(t.consecutive_traces().unwrap()[0], 1.0);
        let t = nuclear_tower(100, 2).unwrap();
        let oracle: f64 = (1..=100).map(|n| 1.0 / (n as f64).powi(2)).sum();
        let tr = t.consecutive_traces().unwrap()[0];
        assert_relative_eq!(tr, oracle, epsilon = 1e-12);
        assert!(tr < std::f64::consts::PI.powi(2) / 6.0);
        assert!(nuclear_tower(3, 1).is_err());
    }
}
