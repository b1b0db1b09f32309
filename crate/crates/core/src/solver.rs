//! Recovery of finitely atomic representing measures from truncated moments.
//!
//! One variable: smallest singular Hankel matrix gives the rank, the
//! Stieltjes recurrence gives the Jacobi matrix, and its eigenpairs give atoms
//! and weights. Several variables: factor the moment matrix, pick a monomial
//! basis of its column space greedily in graded order, build multiplication
//! matrices by normal-form reduction and diagonalize a seeded random
//! combination of them through a real Schur decomposition.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, Schur};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::algebra::{monomials_up_to, MultiIndex};
use crate::error::{Error, Result};
use crate::linalg;
use crate::measure::DiscreteMeasure;
use crate::moment::{MomentFunctional, PsdCertificate};
use crate::tolerances::{FLAT_RANK_TOL, MAX_CONDITION, NEGATIVE_WEIGHT_TOL};

/// Residual above which a rank-deficient but non-flat extraction is rejected.
pub const NON_FLAT_RESIDUAL_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Serialize)]
pub struct SolverResult {
    pub measure: DiscreteMeasure,
    /// Largest absolute mismatch over all input moments.
    pub residual: f64,
    /// `(rank M_{d-1}, rank M_d)`.
    pub rank_profile: (usize, usize),
    pub flat: bool,
}

fn hankel(m: &[f64], k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(k + 1, k + 1, |i, j| m[i + j])
}

fn nearly_singular(h: &DMatrix<f64>) -> bool {
    let sv = h.singular_values();
    let max = sv.max();
    max <= 0.0 || sv.min() <= FLAT_RANK_TOL * max
}

fn univariate_residual(m: &[f64], atoms: &[f64], weights: &[f64]) -> f64 {
    m.iter()
        .enumerate()
        .map(|(k, mk)| {
            let v: f64 = atoms.iter().zip(weights).map(|(x, w)| w * x.powi(k as i32)).sum();
            (v - mk).abs()
        })
        .fold(0.0, f64::max)
}

/// Atomic measure with moments `m_0..m_K`, `m_0 = 1`.
pub fn solve_univariate(m: &[f64]) -> Result<SolverResult> {
    if m.is_empty() || (m[0] - 1.0).abs() > 1e-12 {
        return Err(Error::Invalid("moment sequence must start with m_0 = 1".into()));
    }
    let kmax = m.len() - 1;
    let nmax = kmax / 2;
    let top = hankel(m, nmax);
    let cert = PsdCertificate::of(&top);
    if !cert.psd {
        return Err(Error::NotPsd(cert.min_eigenvalue));
    }

    let singular_at = (0..=nmax).find(|&k| nearly_singular(&hankel(m, k)));
    let rank_top = linalg::numerical_rank(&top, FLAT_RANK_TOL);
    let rank_prev = if nmax == 0 { 0 } else { linalg::numerical_rank(&hankel(m, nmax - 1), FLAT_RANK_TOL) };
    let r = match singular_at {
        Some(k) => {
            if rank_top != k {
                return Err(Error::RankNotFlat(format!("H_{k} is singular but rank H_{nmax} = {rank_top}")));
            }
            k
        }
        None if kmax % 2 == 1 => nmax + 1,
        None => {
            return Err(Error::RankNotFlat(format!(
                "H_{nmax} has full rank {rank_top} and {} moments leave no room for a Gauss rule",
                m.len()
            )))
        }
    };
    if r == 0 {
        return Err(Error::RankNotFlat("zero moment matrix".into()));
    }

    // Stieltjes recurrence for monic orthogonal polynomials under <f, g> = L(fg).
    let inner = |f: &[f64], g: &[f64]| -> f64 {
        let mut s = 0.0;
        for (i, a) in f.iter().enumerate() {
            for (j, b) in g.iter().enumerate() {
                s += a * b * m[i + j];
            }
        }
        s
    };
    let shift = |f: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0];
        out.extend_from_slice(f);
        out
    };
    let mut alpha = Vec::with_capacity(r);
    let mut beta = Vec::with_capacity(r);
    let mut prev: Vec<f64> = Vec::new();
    let mut cur = vec![1.0];
    let mut norm_prev = 1.0;
    for k in 0..r {
        let nk = inner(&cur, &cur);
        if nk <= 0.0 {
            return Err(Error::IllConditioned(nk));
        }
        let xk = shift(&cur);
        let a = inner(&xk, &cur) / nk;
        alpha.push(a);
        if k > 0 {
            beta.push(nk / norm_prev);
        }
        if k + 1 < r {
            let mut next = xk;
            for (i, c) in cur.iter().enumerate() {
                next[i] -= a * c;
            }
            if k > 0 {
                for (i, c) in prev.iter().enumerate() {
                    next[i] -= beta[k - 1] * c;
                }
            }
            prev = cur;
            cur = next;
            norm_prev = nk;
        }
    }
    let jacobi = DMatrix::from_fn(r, r, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j || j + 1 == i {
            beta[i.min(j)].sqrt()
        } else {
            0.0
        }
    });
    let (vals, vecs) = linalg::sym_eigen(&jacobi);
    let atoms: Vec<f64> = vals.iter().copied().collect();
    let weights: Vec<f64> = (0..r).map(|j| m[0] * vecs[(0, j)].powi(2)).collect();
    let residual = univariate_residual(m, &atoms, &weights);
    let measure = DiscreteMeasure::normalized(atoms.iter().map(|&x| vec![x]).collect(), weights)?;
    Ok(SolverResult { measure, residual, rank_profile: (rank_prev, rank_top), flat: singular_at.is_some() })
}

/// Rank-`r` factor `M = V V^T`.
fn psd_factor(m: &DMatrix<f64>, r: usize) -> DMatrix<f64> {
    let (vals, vecs) = linalg::sym_eigen(m);
    let n = m.nrows();
    DMatrix::from_fn(n, r, |i, k| {
        let idx = n - 1 - k;
        vecs[(i, idx)] * vals[idx].max(0.0).sqrt()
    })
}

/// Greedy choice of independent rows in graded order.
fn select_basis(v: &DMatrix<f64>, r: usize) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::with_capacity(r);
    let scale = v.amax().max(f64::MIN_POSITIVE);
    let mut q: Vec<DVector<f64>> = Vec::with_capacity(r);
    for i in 0..v.nrows() {
        if chosen.len() == r {
            break;
        }
        let mut row = v.row(i).transpose();
        for _ in 0..2 {
            for b in &q {
                let c = b.dot(&row);
                row -= b * c;
            }
        }
        let nrm = row.norm();
        if nrm > 1e-7 * scale {
            q.push(row / nrm);
            chosen.push(i);
        }
    }
    chosen
}

struct NormalForm<'a> {
    index: HashMap<MultiIndex, usize>,
    monomials: &'a [MultiIndex],
    basis: &'a [usize],
    u: DMatrix<f64>,
    cache: HashMap<MultiIndex, Option<DVector<f64>>>,
}

impl NormalForm<'_> {
    /// Coordinates of `x^gamma` on the support in the chosen basis, if reducible.
    fn reduce(&mut self, gamma: &MultiIndex) -> Option<DVector<f64>> {
        if let Some(hit) = self.cache.get(gamma) {
            return hit.clone();
        }
        let out = if let Some(&row) = self.index.get(gamma) {
            Some(self.u.row(row).transpose())
        } else {
            // factor gamma = alpha + eta with alpha a stored non-basis monomial
            let mut found = None;
            for (row, alpha) in self.monomials.iter().enumerate().rev() {
                if self.basis.contains(&row) {
                    continue;
                }
                if let Some(eta) = gamma.checked_sub(alpha) {
                    found = Some((row, eta));
                    break;
                }
            }
            match found {
                None => None,
                Some((row, eta)) => {
                    let coeffs = self.u.row(row).transpose();
                    let mut acc = DVector::zeros(self.basis.len());
                    let mut ok = true;
                    for (k, &b) in self.basis.iter().enumerate() {
                        let c = coeffs[k];
                        // greedy selection makes a dependent row a combination of earlier basis rows only
                        if c == 0.0 || b > row {
                            continue;
                        }
                        let next = self.monomials[b].add(&eta);
                        match self.reduce(&next) {
                            Some(v) => acc += v * c,
                            None => {
                                ok = false;
                                break;
                            }
                        }
                    }
                    ok.then_some(acc)
                }
            }
        };
        self.cache.insert(gamma.clone(), out.clone());
        out
    }
}

/// Nonnegative least squares (Lawson-Hanson active set).
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-12 * a.amax().max(1.0) * b.amax().max(1.0);
    for _ in 0..(3 * n + 10) {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n).filter(|&j| !passive[j] && w[j] > tol).max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = candidate else { break };
        passive[j] = true;
        loop {
            let idx: Vec<usize> = (0..n).filter(|&k| passive[k]).collect();
            let ap = a.select_columns(&idx);
            let z_p = ap.clone().svd(true, true).solve(b, 1e-14).unwrap_or_else(|_| DVector::zeros(idx.len()));
            if z_p.iter().all(|&v| v > 0.0) {
                for (k, &c) in idx.iter().enumerate() {
                    x[c] = z_p[k];
                }
                break;
            }
            let mut step = f64::INFINITY;
            for (k, &c) in idx.iter().enumerate() {
                if z_p[k] <= 0.0 {
                    step = step.min(x[c] / (x[c] - z_p[k]));
                }
            }
            for (k, &c) in idx.iter().enumerate() {
                x[c] += step * (z_p[k] - x[c]);
                if x[c].abs() < 1e-15 {
                    x[c] = 0.0;
                    passive[c] = false;
                }
            }
        }
    }
    x
}

/// Atomic measure matching `L` up to its stored degree, read from the moment matrix of order `d`.
pub fn solve_multivariate(l: &MomentFunctional, d: usize, seed: u64) -> Result<SolverResult> {
    let n = l.dim();
    let md = l.moment_matrix(d)?;
    let cert = PsdCertificate::of(&md);
    if !cert.psd {
        return Err(Error::NotPsd(cert.min_eigenvalue));
    }
    let r = linalg::numerical_rank(&md, FLAT_RANK_TOL);
    let r_prev = if d == 0 { 0 } else { linalg::numerical_rank(&l.moment_matrix(d - 1)?, FLAT_RANK_TOL) };
    let flat = d > 0 && r == r_prev;
    if r == 0 {
        return Err(Error::RankNotFlat("zero moment matrix".into()));
    }

    let monomials = monomials_up_to(n, d);
    let v = psd_factor(&md, r);
    let basis = select_basis(&v, r);
    if basis.len() < r {
        return Err(Error::IllConditioned(f64::INFINITY));
    }
    let vb = v.select_rows(&basis);
    let cond = linalg::condition_number(&vb);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::IllConditioned(cond));
    }
    let vb_inv = vb.try_inverse().ok_or(Error::IllConditioned(f64::INFINITY))?;
    let u = &v * vb_inv;

    let mut nf = NormalForm {
        index: monomials.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect(),
        monomials: &monomials,
        basis: &basis,
        u,
        cache: HashMap::new(),
    };
    let mut mult = Vec::with_capacity(n);
    for i in 0..n {
        let mut ni = DMatrix::zeros(r, r);
        for (row, &b) in basis.iter().enumerate() {
            let gamma = monomials[b].add(&MultiIndex::unit(n, i));
            let red = nf.reduce(&gamma).ok_or_else(|| {
                Error::RankNotFlat(format!("rank M_{} = {r_prev}, rank M_{d} = {r}; x^{:?} not reducible", d.saturating_sub(1), gamma.0))
            })?;
            ni.row_mut(row).copy_from(&red.transpose());
        }
        mult.push(ni);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = coeffs.iter().sum();
    let combo = mult.iter().zip(&coeffs).fold(DMatrix::zeros(r, r), |acc, (m, c)| acc + m * (c / total));
    let (q, t) = Schur::new(combo).unpack();
    for j in 0..r.saturating_sub(1) {
        if t[(j + 1, j)].abs() > 1e-8 * t.amax().max(1.0) {
            return Err(Error::IllConditioned(t[(j + 1, j)].abs()));
        }
    }
    let atoms: Vec<Vec<f64>> = (0..r)
        .map(|j| {
            let qj = q.column(j);
            mult.iter().map(|ni| (qj.transpose() * ni * qj)[(0, 0)]).collect()
        })
        .collect();

    let all = monomials_up_to(n, l.max_degree());
    let a = DMatrix::from_fn(all.len(), r, |row, j| all[row].eval(&atoms[j]));
    let b = DVector::from_iterator(all.len(), all.iter().map(|m| l.moments()[m]));
    let mut w = a.clone().svd(true, true).solve(&b, 1e-14).map_err(|e| Error::Invalid(e.to_string()))?;
    if w.iter().any(|&x| x < -NEGATIVE_WEIGHT_TOL) {
        w = nnls(&a, &b);
    }
    let weights: Vec<f64> = w.iter().map(|&x| if (-1e-10..0.0).contains(&x) { 0.0 } else { x }).collect();
    if weights.iter().any(|&x| x < 0.0) {
        return Err(Error::NotPsd(weights.iter().copied().fold(0.0, f64::min)));
    }
    let residual = (&a * DVector::from_vec(weights.clone()) - &b).amax();
    if !flat && residual > NON_FLAT_RESIDUAL_TOL {
        return Err(Error::RankNotFlat(format!("rank M_{} = {r_prev}, rank M_{d} = {r}; residual {residual:e}", d - 1)));
    }
    let measure = DiscreteMeasure::normalized(atoms, weights)?;
    Ok(SolverResult { measure, residual, rank_profile: (r_prev, r), flat })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sorted(res: &SolverResult) -> Vec<(Vec<f64>, f64)> {
        let mut v: Vec<(Vec<f64>, f64)> = res.measure.support().map(|(a, w)| (a.to_vec(), w)).collect();
        v.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        v
    }

    #[test]
    fn univariate_fixtures() {
        let r = solve_univariate(&[1.0, 0.0, 1.0, 0.0, 1.0]).unwrap();
        let s = sorted(&r);
        assert_relative_eq!(s[0].0[0], -1.0, epsilon = 1e-10);
        assert_relative_eq!(s[1].0[0], 1.0, epsilon = 1e-10);
        assert_relative_eq!(s[0].1, 0.5, epsilon = 1e-10);
        assert!(r.residual < 1e-8 && r.flat);

        let r = solve_univariate(&[1.0, 0.0, 1.0, 0.0, 3.0, 0.0]).unwrap();
        let s = sorted(&r);
        let root3 = 3f64.sqrt();
        for ((a, w), (ea, ew)) in s.iter().zip([(-root3, 1.0 / 6.0), (0.0, 2.0 / 3.0), (root3, 1.0 / 6.0)]) {
            assert_relative_eq!(a[0], ea, epsilon = 1e-10);
            assert_relative_eq!(*w, ew, epsilon = 1e-10);
        }

        let c: f64 = -0.7;
        let seq: Vec<f64> = (0..6).map(|k| c.powi(k)).collect();
        let r = solve_univariate(&seq).unwrap();
        assert_eq!(r.measure.len(), 1);
        assert_relative_eq!(r.measure.atoms()[0][0], c, epsilon = 1e-10);
    }

    #[test]
    fn univariate_errors() {
        assert!(matches!(solve_univariate(&[1.0, 0.0, -1.0]), Err(Error::NotPsd(_))));
        assert!(matches!(solve_univariate(&[1.0, 0.0, 1.0, 0.0, 3.0]), Err(Error::RankNotFlat(_))));
    }

    #[test]
    fn multivariate_fixtures() {
        let nu = DiscreteMeasure::new(vec![vec![1.0, 2.0], vec![-1.0, 0.0]], vec![0.5, 0.5]).unwrap();
        let l = MomentFunctional::from_measure(&nu, 4);
        let r = solve_multivariate(&l, 2, 1).unwrap();
        let s = sorted(&r);
        assert!((s[0].0[0] + 1.0).abs() < 1e-8 && s[0].0[1].abs() < 1e-8);
        assert!((s[1].0[0] - 1.0).abs() < 1e-8 && (s[1].0[1] - 2.0).abs() < 1e-8);

        let origin = MomentFunctional::from_measure(&DiscreteMeasure::dirac(vec![0.0, 0.0]).unwrap(), 4);
        let r = solve_multivariate(&origin, 2, 1).unwrap();
        assert_eq!(r.measure.len(), 1);
        assert!(r.measure.atoms()[0].iter().all(|x| x.abs() < 1e-10));

        let pm = [-1.0, 1.0];
        let atoms: Vec<Vec<f64>> = pm.iter().flat_map(|&a| pm.iter().map(move |&b| vec![a, b])).collect();
        let prod = DiscreteMeasure::new(atoms, vec![0.25; 4]).unwrap();
        let l = MomentFunctional::from_measure(&prod, 4);
        let r = solve_multivariate(&l, 2, 3).unwrap();
        assert_eq!(r.measure.len(), 4);
        assert_eq!(r.rank_profile, (3, 4));
        assert!(r.measure.weights().iter().all(|w| (w - 0.25).abs() < 1e-10));
        assert!(r.residual < 1e-10);
    }

    #[test]
    fn nnls_matches_plain_when_feasible() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let x = nnls(&a, &b);
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(x[1], 2.0, epsilon = 1e-12);
        let b = DVector::from_vec(vec![-1.0, 2.0, 1.0]);
        assert!(nnls(&a, &b).iter().all(|&v| v >= 0.0));
    }
}
