//! Gaussian measures attached to a Hilbertian seminorm, Monte-Carlo
//! estimators over reproducible streams, and the quantitative concentration
//! lemma for discrete measures on the dual space.
//!
//! Sampling partitions the sample index range into `streams` contiguous
//! blocks. Block `b` draws from the ChaCha8 stream `b` of the configured seed,
//! so a block's output does not depend on which thread runs it, and the
//! per-block partial sums are merged in block order.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};


use crate::error::{Error, Result};
use crate::extended::Extended;
use crate::measure::DiscreteMeasure;
use crate::seminorm::{DualFunctional, GramForm};
use crate::tolerances::MC_SIGMAS;
use crate::trace;

/// Gaussian measure `d gamma = (2 pi)^{-n/2} exp(-q(v)^2 / 2) d lambda`.
#[derive(Debug, Clone)]
pub struct GaussianMeasure {
    q: GramForm,
    /// Columns: a complete `q`-orthonormal system.
    whitening: DMatrix<f64>,
}

impl GaussianMeasure {
    pub fn new(q: &GramForm) -> Result<Self> {
        if !q.has_trivial_kernel() {
            return Err(Error::SingularForm);
        }
        Ok(Self::on_quotient(q))
    }

    /// Gaussian measure on a complement of `ker(q)`.
    pub fn on_quotient(q: &GramForm) -> Self {
        GaussianMeasure { q: q.clone(), whitening: q.whitening() }
    }

    pub fn form(&self) -> &GramForm {
        &self.q
    }

    pub fn whitening(&self) -> &DMatrix<f64> {
        &self.whitening
    }

    pub fn dim(&self) -> usize {
        self.q.dim()
    }

    /// Materializes every sample `v = W z`, in sample-index order.
    pub fn sample(&self, cfg: &McConfig) -> Result<Vec<DVector<f64>>> {
        cfg.validate()?;
        let mut out = Vec::with_capacity(cfg.samples);
        for block in 0..cfg.streams {
            let (start, end) = cfg.block_range(block);
            let mut rng = cfg.block_rng(block);
            for _ in start..end {
                out.push(self.draw(&mut rng));
            }
        }
        Ok(out)
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> DVector<f64> {
        let z = DVector::from_fn(self.whitening.ncols(), |_, _| StandardNormal.sample(rng));
        &self.whitening * z
    }

    /// Mean and standard error of `f(v)` under the measure.
    pub fn estimate<F>(&self, cfg: &McConfig, f: F) -> Result<McEstimate>
    where
        F: Fn(&DVector<f64>) -> f64 + Sync,
    {
        self.estimate_coords(cfg, |z| f(&(&self.whitening * z)))
    }

    /// Like [`estimate`](Self::estimate) but `f` receives the standard-normal
    /// coordinates `z` with `v = W z`.
    pub fn estimate_coords<F>(&self, cfg: &McConfig, f: F) -> Result<McEstimate>
    where
        F: Fn(&DVector<f64>) -> f64 + Sync,
    {
        cfg.validate()?;
        let r = self.whitening.ncols();
        let partials: Vec<(f64, f64, usize)> = (0..cfg.streams)
            .into_par_iter()
            .map(|block| {
                let (start, end) = cfg.block_range(block);
                let mut rng = cfg.block_rng(block);
                let mut z = DVector::zeros(r);
                let (mut s, mut s2) = (0.0, 0.0);
                for _ in start..end {
                    for k in 0..r {
                        z[k] = StandardNormal.sample(&mut rng);
                    }
                    let x = f(&z);
                    s += x;
                    s2 += x * x;
                }
                (s, s2, end - start)
            })
            .collect();
        let (mut s, mut s2, mut n) = (0.0, 0.0, 0usize);
        for (a, b, c) in partials {
            s += a;
            s2 += b;
            n += c;
        }
        let nf = n as f64;
        let mean = s / nf;
        let var = if n > 1 { ((s2 - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
        Ok(McEstimate { estimate: mean, stderr: (var / nf).sqrt(), samples: n })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub seed: u64,
    pub samples: usize,
    pub streams: usize,
}

impl McConfig {
    pub fn new(seed: u64, samples: usize, streams: usize) -> Self {
        McConfig { seed, samples, streams }
    }

    fn validate(&self) -> Result<()> {
        if self.samples == 0 || self.streams == 0 {
            return Err(Error::Invalid("samples and streams must be positive".into()));
        }
        if self.streams > self.samples {
            return Err(Error::Invalid("more streams than samples".into()));
        }
        Ok(())
    }

    /// Contiguous index range `[start, end)` of block `b`.
    pub fn block_range(&self, b: usize) -> (usize, usize) {
        let base = self.samples / self.streams;
        let extra = self.samples % self.streams;
        let start = b * base + b.min(extra);
        let len = base + usize::from(b < extra);
        (start, start + len)
    }

    fn block_rng(&self, b: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(b as u64);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl McEstimate {
    /// `|estimate - target| <= sigmas * stderr`.
    pub fn brackets(&self, target: f64, sigmas: f64) -> bool {
        (self.estimate - target).abs() <= sigmas * self.stderr
    }
}

/// Standard normal upper tail `1 - Phi(x)`.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, Serialize)]
pub struct SecondMomentReport {
    pub exact: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub bound: f64,
    pub certified: bool,
    pub seed: u64,
}

/// Monte-Carlo and closed-form values of `int <v, w>_q^2 d gamma` for the
/// `q`-normalized direction `w / q(w)`.
pub fn second_moment_check(g: &GaussianMeasure, w: &DVector<f64>, cfg: &McConfig) -> Result<SecondMomentReport> {
    let qw = g.q.evaluate(w)?;
    if qw == 0.0 {
        return Err(Error::ZeroNormDirection);
    }
    let unit = w / qw;
    // <W z, u>_q = z . (W^T G u)
    let c = g.whitening.transpose() * (g.q.gram() * &unit);
    let exact = c.norm_squared();
    let est = g.estimate_coords(cfg, |z| {
        let t = z.dot(&c);
        t * t
    })?;
    Ok(SecondMomentReport {
        exact,
        estimate: est.estimate,
        stderr: est.stderr,
        bound: 1.0,
        certified: est.brackets(1.0, MC_SIGMAS) && (exact - 1.0).abs() < 1e-12,
        seed: cfg.seed,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TailReport {
    pub dual_norm: Extended,
    pub exact: f64,
    pub bound: f64,
    pub ok: bool,
}

/// `gamma(|l(v)| >= 1) = 2 (1 - Phi(1 / q'(l)))`, valid because `l(v)` is a
/// centered normal with standard deviation `q'(l)`.
pub fn tail_lower_bound_check(g: &GaussianMeasure, l: &DualFunctional) -> Result<TailReport> {
    let dn = g.q.dual_norm(l)?;
    let exact = match dn {
        Extended::Infinite => 1.0,
        Extended::Finite(s) if s < 1.0 => {
            return Err(Error::NotInScope(format!("q'(l) = {s} < 1")));
        }
        Extended::Finite(s) => 2.0 * normal_sf(1.0 / s),
    };
    let bound = 1.0 / 7.0;
    Ok(TailReport { dual_norm: dn, exact, bound, ok: exact >= bound })
}

/// Monte-Carlo cross-check of `gamma(|l(v)| >= 1)`.
pub fn tail_probability_mc(g: &GaussianMeasure, l: &DualFunctional, cfg: &McConfig) -> Result<McEstimate> {
    let c = g.whitening.transpose() * &l.coeffs;
    g.estimate_coords(cfg, |z| if z.dot(&c).abs() >= 1.0 { 1.0 } else { 0.0 })
}

#[derive(Debug, Clone, Serialize)]
pub struct OutsideBallReport {
    pub mc: f64,
    pub stderr: f64,
    pub bound: f64,
    pub ok: bool,
    pub seed: u64,
}

/// `gamma(V \ B_delta(p)) <= delta^-2 tr(p/q)`.
pub fn chebyshev_outside_ball(g: &GaussianMeasure, p: &GramForm, delta: f64, cfg: &McConfig) -> Result<OutsideBallReport> {
    if !(delta > 0.0) {
        return Err(Error::Invalid("delta must be positive".into()));
    }
    let tr = match trace::trace(p, &g.q)?.value {
        Extended::Finite(t) => t,
        Extended::Infinite => return Err(Error::KernelNotContained(f64::INFINITY)),
    };
    let bound = tr / (delta * delta);
    let pw = g.whitening.transpose() * p.gram() * &g.whitening;
    let d2 = delta * delta;
    let est = g.estimate_coords(cfg, |z| if z.dot(&(&pw * z)) > d2 { 1.0 } else { 0.0 })?;
    Ok(OutsideBallReport {
        mc: est.estimate,
        stderr: est.stderr,
        bound,
        ok: est.estimate <= bound + MC_SIGMAS * est.stderr,
        seed: cfg.seed,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FundamentalLemmaReport {
    /// `delta^2 * sup_{p(v) <= 1} sum_j w_j l_j(v)^2`.
    pub hypothesis_value: Extended,
    pub epsilon: f64,
    pub delta: f64,
    pub certified: bool,
    pub trace: f64,
    /// Exact `mu(B_1(q'))`.
    pub mass_in_dual_ball: f64,
    /// `1 - 7 (eps + tr(p / delta q))`.
    pub bound: f64,
    pub conclusion_holds: bool,
}

/// Evaluates every part of the lemma without deciding whether the
/// hypothesis certificate succeeded.
pub fn fundamental_lemma_evaluate(
    mu: &DiscreteMeasure,
    p: &GramForm,
    q: &GramForm,
    eps: f64,
    delta: f64,
) -> Result<FundamentalLemmaReport> {
    Error::check_dim(p.dim(), mu.dim())?;
    Error::check_dim(p.dim(), q.dim())?;
    if !(eps > 0.0 && delta > 0.0) {
        return Err(Error::Invalid("eps and delta must be positive".into()));
    }
    let tr = trace::trace(p, q)?.finite().ok_or(Error::InfiniteTrace)?;
    let hypothesis_value = match p.sup_quadratic(&mu.second_moment_matrix())? {
        Extended::Finite(s) => Extended::Finite(delta * delta * s),
        Extended::Infinite => Extended::Infinite,
    };
    let certified = hypothesis_value.le(eps * (1.0 + 1e-12));
    let mut mass = 0.0;
    for (j, &w) in mu.weights().iter().enumerate() {
        let l = DualFunctional::new(mu.atom_vector(j));
        if q.dual_norm(&l)?.le(1.0 + 1e-12) {
            mass += w;
        }
    }
    let bound = 1.0 - 7.0 * (eps + tr / (delta * delta));
    Ok(FundamentalLemmaReport {
        hypothesis_value,
        epsilon: eps,
        delta,
        certified,
        trace: tr,
        mass_in_dual_ball: mass,
        bound,
        conclusion_holds: mass >= bound - 1e-12,
    })
}

/// The concentration lemma for a discrete probability measure `mu` on the
/// dual: if `mu(|l(v)| >= 1) <= eps` on `B_delta(p)` (certified through
/// Chebyshev), then `mu(B_1(q')) >= 1 - 7 (eps + tr(p / delta q))`.
pub fn fundamental_lemma_check(
    mu: &DiscreteMeasure,
    p: &GramForm,
    q: &GramForm,
    eps: f64,
    delta: f64,
) -> Result<FundamentalLemmaReport> {
    let report = fundamental_lemma_evaluate(mu, p, q, eps, delta)?;
    if !report.certified {
        return Err(Error::HypothesisUnverifiable(format!(
            "Chebyshev certificate {} exceeds eps = {eps}",
            report.hypothesis_value
        )));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn singular_form_needs_quotient() {
        let q = GramForm::diagonal(&[1.0, 0.0]).unwrap();
        assert!(matches!(GaussianMeasure::new(&q), Err(Error::SingularForm)));
        let g = GaussianMeasure::on_quotient(&q);
        let s = g.sample(&McConfig::new(1, 10, 2)).unwrap();
        assert!(s.iter().all(|v| v[1] == 0.0));
    }

    #[test]
    fn block_ranges_cover_everything() {
        let cfg = McConfig::new(0, 103, 7);
        let mut next = 0;
        for b in 0..7 {
            let (s, e) = cfg.block_range(b);
            assert_eq!(s, next);
            next = e;
        }
        assert_eq!(next, 103);
    }

    #[test]
    fn unit_variance_in_one_dimension() {
        let g = GaussianMeasure::new(&GramForm::identity(1)).unwrap();
        let est = g.estimate(&McConfig::new(7, 1_000_000, 8), |v| v[0] * v[0]).unwrap();
        assert!(est.brackets(1.0, 4.0), "{est:?}");
    }

    #[test]
    fn independent_coordinates() {
        let g = GaussianMeasure::new(&GramForm::identity(2)).unwrap();
        let est = g.estimate(&McConfig::new(3, 200_000, 4), |v| v[0] * v[1]).unwrap();
        assert!(est.brackets(0.0, 4.0), "{est:?}");
    }

    #[test]
    fn whitened_coordinate_variance() {
        // q = diag(4, 1): v_1 = z_1 / 2
        let g = GaussianMeasure::new(&GramForm::diagonal(&[4.0, 1.0]).unwrap()).unwrap();
        let est = g.estimate(&McConfig::new(11, 400_000, 4), |v| v[0] * v[0]).unwrap();
        assert!(est.brackets(0.25, 4.0), "{est:?}");
    }

    #[test]
    fn estimates_do_not_depend_on_thread_count() {
        let g = GaussianMeasure::new(&GramForm::diagonal(&[2.0, 1.0, 0.5]).unwrap()).unwrap();
        let cfg = McConfig::new(42, 50_000, 5);
        let f = |v: &DVector<f64>| v.norm_squared();
        let a = g.estimate(&cfg, f).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| g.estimate(&cfg, f).unwrap());
        assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    }

    #[test]
    fn second_moment_is_scale_free() {
        let q = GramForm::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let g = GaussianMeasure::new(&q).unwrap();
        let w = DVector::from_column_slice(&[1.0, -2.0]);
        let cfg = McConfig::new(5, 100_000, 4);
        let a = second_moment_check(&g, &w, &cfg).unwrap();
        let b = second_moment_check(&g, &(w * 3.0), &cfg).unwrap();
        assert_relative_eq!(a.exact, 1.0, epsilon = 1e-12);
        assert_relative_eq!(b.exact, 1.0, epsilon = 1e-12);
        assert!(a.certified);
        assert!(matches!(
            second_moment_check(&g, &DVector::zeros(2), &cfg),
            Err(Error::ZeroNormDirection)
        ));
    }

    #[test]
    fn tail_examples() {
        let g = GaussianMeasure::new(&GramForm::identity(1)).unwrap();
        let r = tail_lower_bound_check(&g, &DualFunctional::from_slice(&[1.0])).unwrap();
        assert!((r.exact - 0.317_310_507_862_914_1).abs() < 1e-12, "{:.17}", r.exact);
        assert!(r.ok);
        let r = tail_lower_bound_check(&g, &DualFunctional::from_slice(&[1e9])).unwrap();
        assert!(r.exact > 1.0 - 1e-8);
        assert!(matches!(
            tail_lower_bound_check(&g, &DualFunctional::from_slice(&[0.5])),
            Err(Error::NotInScope(_))
        ));
    }

    #[test]
    fn tail_mc_agrees_with_closed_form() {
        let q = GramForm::diagonal(&[0.25, 1.0]).unwrap();
        let g = GaussianMeasure::new(&q).unwrap();
        let l = DualFunctional::from_slice(&[0.6, 0.3]);
        let exact = tail_lower_bound_check(&g, &l).unwrap().exact;
        let mc = tail_probability_mc(&g, &l, &McConfig::new(9, 200_000, 4)).unwrap();
        assert!(mc.brackets(exact, 4.0), "{mc:?} vs {exact}");
    }

    #[test]
    fn outside_ball_examples() {
        let id = GramForm::identity(1);
        let g = GaussianMeasure::new(&id).unwrap();
        let cfg = McConfig::new(1, 100_000, 4);
        let r = chebyshev_outside_ball(&g, &id, 10.0, &cfg).unwrap();
        assert_relative_eq!(r.bound, 0.01);
        assert_eq!(r.mc, 0.0);
        let g2 = GaussianMeasure::new(&GramForm::identity(2)).unwrap();
        let p = GramForm::diagonal(&[1.0, 4.0]).unwrap();
        let r = chebyshev_outside_ball(&g2, &p, 5.0, &cfg).unwrap();
        assert_relative_eq!(r.bound, 0.2, epsilon = 1e-14);
        assert!(r.ok && r.mc < 0.2);
        let bad = GramForm::diagonal(&[1.0, 0.0]).unwrap();
        let gq = GaussianMeasure::on_quotient(&bad);
        assert!(chebyshev_outside_ball(&gq, &GramForm::identity(2), 1.0, &cfg).is_err());
    }

    #[test]
    fn fundamental_lemma_point_mass_at_zero() {
        let mu = DiscreteMeasure::dirac(vec![0.0, 0.0]).unwrap();
        let id = GramForm::identity(2);
        let r = fundamental_lemma_check(&mu, &id, &id, 0.1, 0.1).unwrap();
        assert_eq!(r.mass_in_dual_ball, 1.0);
        assert!(r.conclusion_holds);
    }

    #[test]
    fn fundamental_lemma_two_atoms() {
        // second moment 0.5 * 0.25 + 0.5 * 9 = 4.625; times delta^2 = 0.04625
        let mu = DiscreteMeasure::new(vec![vec![0.5], vec![3.0]], vec![0.5, 0.5]).unwrap();
        let id = GramForm::identity(1);
        let r = fundamental_lemma_evaluate(&mu, &id, &id, 0.047, 0.1).unwrap();
        assert_relative_eq!(r.hypothesis_value.finite().unwrap(), 0.04625, epsilon = 1e-15);
        assert!(r.certified);
        assert_eq!(r.mass_in_dual_ball, 0.5);
        assert_relative_eq!(r.bound, 1.0 - 7.0 * (0.047 + 100.0), epsilon = 1e-12);
        assert!(r.conclusion_holds);
        assert!(matches!(
            fundamental_lemma_check(&mu, &id, &id, 0.04, 0.1),
            Err(Error::HypothesisUnverifiable(_))
        ));
    }

    #[test]
    fn fundamental_lemma_kernel_escape_is_unverifiable() {
        let mu = DiscreteMeasure::dirac(vec![0.0, 1.0]).unwrap();
        let p = GramForm::diagonal(&[1.0, 0.0]).unwrap();
        let q = GramForm::identity(2);
        let r = fundamental_lemma_evaluate(&mu, &p, &q, 0.5, 0.1).unwrap();
        assert_eq!(r.hypothesis_value, Extended::Infinite);
        assert!(!r.certified);
    }
}
