//! Heuristic quasi-analyticity diagnostics for a moment functional along a
//! direction `v`: the Carleman series `sum_n L(v^2n)^(-1/2n)` and the growth
//! sequences `m_k`, `z_k`.
//!
//! Divergence of a series cannot be decided from finitely many terms, so the
//! verdict is a three-way classification driven by the decay exponent of the
//! terms fitted over the last half of the range.

use nalgebra::DVector;
use serde::Serialize;

use crate::algebra::AlgebraElement;
use crate::error::{Error, Result};
use crate::extended::Extended;
use crate::graded::{product_of_vectors, Frame};
use crate::moment::MomentFunctional;
use crate::seminorm::GramForm;
use crate::tolerances::INEQUALITY_SLACK;

pub const DEFAULT_MARGIN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CarlemanVerdict {
    DivergentLikely,
    ConvergentLikely,
    Undetermined,
}

#[derive(Debug, Clone, Serialize)]
pub struct CarlemanDiagnostic {
    /// `t_n = L(v^2n)^(-1/2n)` for `n = 1..=N`.
    pub terms: Vec<Extended>,
    pub partial_sums: Vec<Extended>,
    /// Slope of `log t_n` against `log n` over the last half of the range.
    pub fitted_decay_exponent: Option<f64>,
    /// Partial sum plus an integral tail estimate, when the fit decays faster than `1/n`.
    pub extrapolated_sum: Option<f64>,
    pub margin: f64,
    pub verdict: CarlemanVerdict,
}

/// Diagnostic from `log L(v^2n)` for `n = 1..=N`; `-inf` encodes a zero moment.
pub fn carleman_from_log_moments(log_moments: &[f64], margin: f64) -> Result<CarlemanDiagnostic> {
    if log_moments.is_empty() {
        return Err(Error::Invalid("Carleman diagnostic needs at least one moment".into()));
    }
    let log_terms: Vec<f64> = log_moments
        .iter()
        .enumerate()
        .map(|(i, &lm)| -lm / (2.0 * (i + 1) as f64))
        .collect();
    let mut terms = Vec::with_capacity(log_terms.len());
    let mut partial_sums = Vec::with_capacity(log_terms.len());
    let mut acc = Extended::Finite(0.0);
    for &lt in &log_terms {
        let t = if lt.is_finite() { Extended::Finite(lt.exp()) } else { Extended::Infinite };
        acc = match (acc, t) {
            (Extended::Finite(a), Extended::Finite(b)) => Extended::Finite(a + b),
            _ => Extended::Infinite,
        };
        terms.push(t);
        partial_sums.push(acc);
    }

    if !acc.is_finite() {
        return Ok(CarlemanDiagnostic {
            terms,
            partial_sums,
            fitted_decay_exponent: None,
            extrapolated_sum: None,
            margin,
            verdict: CarlemanVerdict::DivergentLikely,
        });
    }

    let n_total = log_terms.len();
    let start = n_total / 2;
    let pts: Vec<(f64, f64)> = (start..n_total).map(|i| (((i + 1) as f64).ln(), log_terms[i])).collect();
    let slope = fit_slope(&pts);

    let verdict = match slope {
        Some(s) if s >= -1.0 + margin => CarlemanVerdict::DivergentLikely,
        Some(s) if s <= -1.0 - margin => CarlemanVerdict::ConvergentLikely,
        _ => CarlemanVerdict::Undetermined,
    };
    let extrapolated_sum = match (slope, acc) {
        (Some(s), Extended::Finite(sum)) if s < -1.0 => {
            // tail of t_N (n/N)^s beyond N: t_N N / (|s| - 1)
            let last = log_terms[n_total - 1].exp();
            Some(sum + last * n_total as f64 / (-s - 1.0))
        }
        _ => None,
    };
    Ok(CarlemanDiagnostic { terms, partial_sums, fitted_decay_exponent: slope, extrapolated_sum, margin, verdict })
}

fn fit_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// `log L(v^2n)` for `n = 1..=cutoff`: exact log-sum-exp over the source measure when
/// there is one, otherwise from the stored moments.
pub fn log_even_moments(l: &MomentFunctional, v: &DVector<f64>, cutoff: usize) -> Result<Vec<f64>> {
    Error::check_dim(l.dim(), v.len())?;
    if let Some(nu) = l.source() {
        let proj: Vec<(f64, f64)> = nu
            .support()
            .filter(|(_, w)| *w > 0.0)
            .map(|(a, w)| (w.ln(), a.iter().zip(v.iter()).map(|(x, y)| x * y).sum::<f64>().abs().ln()))
            .collect();
        return Ok((1..=cutoff)
            .map(|n| {
                let exps: Vec<f64> = proj.iter().map(|(lw, la)| lw + 2.0 * n as f64 * la).collect();
                log_sum_exp(&exps)
            })
            .collect());
    }
    if 2 * cutoff > l.max_degree() {
        return Err(Error::DegreeOverflow { got: 2 * cutoff, max: l.max_degree() });
    }
    let lin = AlgebraElement::linear(v.as_slice(), 2 * cutoff);
    let mut power = AlgebraElement::one(l.dim(), 2 * cutoff);
    let mut out = Vec::with_capacity(cutoff);
    for n in 1..=cutoff {
        power = power.multiply(&lin)?.multiply(&lin)?;
        let m = l.apply(&power)?;
        if m < 0.0 {
            let scale: f64 = power.terms().iter().map(|(a, c)| (c * l.moments()[a]).abs()).sum();
            if m < -INEQUALITY_SLACK * scale.max(1.0) {
                return Err(Error::NegativeEvenMoment { power: 2 * n, value: m });
            }
        }
        out.push(if m > 0.0 { m.ln() } else { f64::NEG_INFINITY });
    }
    Ok(out)
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub fn carleman_diagnostic(l: &MomentFunctional, v: &DVector<f64>, cutoff: usize) -> Result<CarlemanDiagnostic> {
    carleman_from_log_moments(&log_even_moments(l, v, cutoff)?, DEFAULT_MARGIN)
}

#[derive(Debug, Clone, Serialize)]
pub struct CompositeBoundCheck {
    pub coefficients: Vec<f64>,
    pub k: usize,
    /// `L(v^2k)^(1/2k)`.
    pub lhs: f64,
    /// `K_v m_2k^(1/2k)` with `K_v = 1 + sum |lambda_i|`.
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthChecks {
    pub m_below_z: Vec<bool>,
    pub log_convex: Vec<bool>,
    pub increasing_roots: Vec<bool>,
    pub composite: Vec<CompositeBoundCheck>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthSequences {
    /// `m_k` for `k = 1..=N` (`m_0 = 1` implicit).
    pub m: Vec<f64>,
    pub z: Vec<Extended>,
    pub checks: GrowthChecks,
}

/// `m_k = sqrt(max |L(v_1..v_2k)|)` over `2k`-tuples from `e`,
/// `z_k = (max_{v in e} p_2k(v))^k sqrt(C_{L,2k})`.
///
/// `forms[k-1]` is `p_2k`. `combos` are coefficient vectors `lambda` for `v = sum lambda_i e_i`;
/// the composite bound is checked for every `k` with `4k <= max_degree`.
pub fn bks_growth_sequences(
    l: &MomentFunctional,
    e: &[DVector<f64>],
    forms: &[GramForm],
    cutoff: usize,
    combos: &[Vec<f64>],
) -> Result<GrowthSequences> {
    if e.is_empty() {
        return Err(Error::Invalid("empty generating family".into()));
    }
    Error::check_dim(cutoff, forms.len())?;
    if 2 * cutoff > l.max_degree() {
        return Err(Error::DegreeOverflow { got: 2 * cutoff, max: l.max_degree() });
    }
    let n = l.dim();
    let max_deg = l.max_degree();
    // m over multisets, computed up to degree max_degree / 2 pairs for the composite bound
    let kmax = max_deg / 2;
    let mut m = Vec::with_capacity(kmax);
    for k in 1..=kmax {
        let mut best: f64 = 0.0;
        for_each_multiset(e.len(), 2 * k, &mut |idx| {
            let vecs: Vec<&DVector<f64>> = idx.iter().map(|&i| &e[i]).collect();
            let prod = product_of_vectors(&vecs, 2 * k)?;
            best = best.max(l.apply(&prod)?.abs());
            Ok(())
        })?;
        m.push(best.sqrt());
    }

    let mut z = Vec::with_capacity(cutoff);
    for k in 1..=cutoff {
        let p = &forms[k - 1];
        Error::check_dim(n, p.dim())?;
        let sup = e.iter().map(|v| p.evaluate(v)).collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
        let c = l.continuity_constant_in_frame(&Frame::canonical(p), 2 * k)?;
        z.push(match c {
            Extended::Finite(c) => Extended::Finite(sup.powi(k as i32) * c.sqrt()),
            Extended::Infinite => Extended::Infinite,
        });
    }

    let tol = |x: f64| INEQUALITY_SLACK * x.abs().max(1.0);
    let m_below_z = (0..cutoff).map(|i| bounded_by(m[i] - tol(m[i]), &z[i])).collect();
    let mk = |k: usize| if k == 0 { 1.0 } else { m[k - 1] };
    let log_convex = (1..kmax).map(|k| mk(k).powi(2) <= mk(k - 1) * mk(k + 1) + tol(mk(k).powi(2))).collect();
    let increasing_roots = (1..kmax)
        .map(|k| {
            let a = mk(k).powf(1.0 / k as f64);
            let b = mk(k + 1).powf(1.0 / (k + 1) as f64);
            a <= b + tol(b)
        })
        .collect();

    let mut composite = Vec::new();
    for lambda in combos {
        Error::check_dim(e.len(), lambda.len())?;
        let v = e.iter().zip(lambda).fold(DVector::zeros(n), |acc, (ei, &c)| acc + ei * c);
        let kv = 1.0 + lambda.iter().map(|c| c.abs()).sum::<f64>();
        for k in 1..=kmax / 2 {
            let lin = AlgebraElement::linear(v.as_slice(), 2 * k);
            let val = l.apply(&lin.pow(2 * k)?)?;
            let lhs = val.max(0.0).powf(1.0 / (2 * k) as f64);
            let rhs = kv * mk(2 * k).powf(1.0 / (2 * k) as f64);
            composite.push(CompositeBoundCheck { coefficients: lambda.clone(), k, lhs, rhs, holds: lhs <= rhs + tol(rhs) });
        }
    }

    Ok(GrowthSequences {
        m: m[..cutoff.min(m.len())].to_vec(),
        z,
        checks: GrowthChecks { m_below_z, log_convex, increasing_roots, composite },
    })
}

fn bounded_by(value: f64, bound: &Extended) -> bool {
    match bound {
        Extended::Finite(b) => value <= *b,
        Extended::Infinite => true,
    }
}

fn for_each_multiset<F>(m: usize, k: usize, f: &mut F) -> Result<()>
where
    F: FnMut(&[usize]) -> Result<()>,
{
    fn rec<F: FnMut(&[usize]) -> Result<()>>(m: usize, k: usize, start: usize, cur: &mut Vec<usize>, f: &mut F) -> Result<()> {
        if cur.len() == k {
            return f(cur);
        }
        for i in start..m {
            cur.push(i);
            rec(m, k, i, cur, f)?;
            cur.pop();
        }
        Ok(())
    }
    rec(m, k, 0, &mut Vec::with_capacity(k), f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::DiscreteMeasure;
    use approx::assert_relative_eq;

    fn log_double_factorial(n: usize) -> f64 {
        // (2n-1)!! = (2n)! / (2^n n!)
        libm::lgamma(2.0 * n as f64 + 1.0) - n as f64 * 2f64.ln() - libm::lgamma(n as f64 + 1.0)
    }

    #[test]
    fn gaussian_diverges() {
        let logs: Vec<f64> = (1..=200).map(log_double_factorial).collect();
        let d = carleman_from_log_moments(&logs, DEFAULT_MARGIN).unwrap();
        assert_eq!(d.verdict, CarlemanVerdict::DivergentLikely);
        let s = d.fitted_decay_exponent.unwrap();
        assert!((s + 0.5).abs() < 0.05, "{s}");
    }

    #[test]
    fn lognormal_converges() {
        let logs: Vec<f64> = (1..=200).map(|n| 2.0 * (n * n) as f64).collect();
        let d = carleman_from_log_moments(&logs, DEFAULT_MARGIN).unwrap();
        assert_eq!(d.verdict, CarlemanVerdict::ConvergentLikely);
        let sum = d.partial_sums.last().unwrap().finite().unwrap();
        assert_relative_eq!(sum, 1.0 / (std::f64::consts::E - 1.0), epsilon = 1e-12);
    }

    #[test]
    fn compact_support_diverges() {
        let nu = DiscreteMeasure::new(vec![vec![-0.9], vec![0.4], vec![1.0]], vec![0.3, 0.3, 0.4]).unwrap();
        let l = MomentFunctional::from_measure(&nu, 2);
        let d = carleman_diagnostic(&l, &DVector::from_vec(vec![1.0]), 200).unwrap();
        assert_eq!(d.verdict, CarlemanVerdict::DivergentLikely);
        assert!(d.terms.iter().all(|t| t.finite().unwrap() >= 1.0));
    }

    #[test]
    fn stored_moments_match_source() {
        let nu = DiscreteMeasure::new(vec![vec![-2.0, 1.0], vec![0.5, 3.0]], vec![0.25, 0.75]).unwrap();
        let with_source = MomentFunctional::from_measure(&nu, 8);
        let stored: MomentFunctional = serde_json::from_str(&serde_json::to_string(&with_source).unwrap()).unwrap();
        let v = DVector::from_vec(vec![0.3, -0.2]);
        let a = log_even_moments(&with_source, &v, 4).unwrap();
        let b = log_even_moments(&stored, &v, 4).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_relative_eq!(x, y, epsilon = 1e-12);
        }
        assert!(log_even_moments(&stored, &v, 5).is_err());
    }

    #[test]
    fn negative_even_moment() {
        let l = MomentFunctional::univariate(&[1.0, 0.0, -1.0]).unwrap();
        assert!(matches!(
            carleman_diagnostic(&l, &DVector::from_vec(vec![1.0]), 1),
            Err(Error::NegativeEvenMoment { power: 2, .. })
        ));
    }

    #[test]
    fn growth_sequences_examples() {
        let e = vec![DVector::from_vec(vec![1.0])];
        let p: Vec<GramForm> = (0..3).map(|_| GramForm::identity(1)).collect();
        let nu = DiscreteMeasure::new(vec![vec![-1.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
        let l = MomentFunctional::from_measure(&nu, 12);
        let g = bks_growth_sequences(&l, &e, &p, 3, &[vec![0.5]]).unwrap();
        assert_eq!(g.m, vec![1.0, 1.0, 1.0]);
        assert!(g.checks.log_convex.iter().all(|&b| b));
        assert!(g.checks.composite.iter().all(|c| c.holds));

        // Gaussian moments: m_k = sqrt((2k-1)!!)
        let gauss: Vec<f64> = (0..=12).map(|k| if k % 2 == 1 { 0.0 } else { log_double_factorial(k / 2).exp() }).collect();
        let l = MomentFunctional::univariate(&gauss).unwrap();
        let g = bks_growth_sequences(&l, &e, &p, 3, &[]).unwrap();
        for (k, mk) in g.m.iter().enumerate() {
            assert_relative_eq!(*mk, log_double_factorial(k + 1).exp().sqrt(), epsilon = 1e-9);
        }
        assert!(g.checks.m_below_z.iter().all(|&b| b));

        let c = 1.7;
        let l = MomentFunctional::from_measure(&DiscreteMeasure::dirac(vec![c]).unwrap(), 6);
        let g = bks_growth_sequences(&l, &e, &p, 3, &[]).unwrap();
        for (k, mk) in g.m.iter().enumerate() {
            assert_relative_eq!(*mk, c.powi(k as i32 + 1), epsilon = 1e-12);
            assert!(bounded_by(*mk * (1.0 - 1e-12), &g.z[k]));
        }
    }
}
