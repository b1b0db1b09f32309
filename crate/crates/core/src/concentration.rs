//! Families of marginal measures `{nu_S}` indexed by coordinate subalgebras,
//! and exact checks of `p`-concentration and compact-mass bounds.
//!
//! Every probability of the form `nu_S(|a^| >= t)` is a weight sum over atoms.
//! The `(eps, delta)` certificate is the Chebyshev bound
//! `sup_{p(a) <= delta} int a^2 dnu_S = delta^2 lambda_max(M_S | p_S)`, where
//! `M_S` is the second-moment matrix of `nu_S`; random probes on the
//! `delta`-sphere are reported separately as falsification attempts.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::Character;
use crate::error::{Error, Result};
use crate::extended::Extended;
use crate::measure::DiscreteMeasure;
use crate::moment::MomentFunctional;
use crate::seminorm::{DualFunctional, GramForm, OrthonormalSystem};
use crate::tolerances::{INEQUALITY_SLACK, MOMENT_MATCH_TOL};
use crate::trace;

/// Largest dimension for which the full lattice of coordinate subsets is enumerated.
pub const FULL_LATTICE_MAX_DIM: usize = 12;

/// A coordinate subalgebra `<span(e_i : i in coords)>`, 0-based and sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubalgebraIndex {
    coords: Vec<usize>,
}

impl SubalgebraIndex {
    pub fn new(mut coords: Vec<usize>) -> Result<Self> {
        coords.sort_unstable();
        coords.dedup();
        if coords.is_empty() {
            return Err(Error::Invalid("empty coordinate subset".into()));
        }
        Ok(SubalgebraIndex { coords })
    }

    pub fn full(n: usize) -> Self {
        SubalgebraIndex { coords: (0..n).collect() }
    }

    pub fn coords(&self) -> &[usize] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn is_subset_of(&self, other: &SubalgebraIndex) -> bool {
        self.coords.iter().all(|c| other.coords.binary_search(c).is_ok())
    }

    /// Positions of `self`'s coordinates inside `other`.
    pub fn positions_in(&self, other: &SubalgebraIndex) -> Result<Vec<usize>> {
        self.coords
            .iter()
            .map(|c| other.coords.binary_search(c).map_err(|_| Error::NotSubset(self.to_string(), other.to_string())))
            .collect()
    }

    /// All nonempty subsets of `{0..n}`, smallest first.
    pub fn lattice(n: usize) -> Result<Vec<SubalgebraIndex>> {
        if n > FULL_LATTICE_MAX_DIM {
            return Err(Error::Invalid(format!(
                "full subset lattice capped at n = {FULL_LATTICE_MAX_DIM}; pass an explicit sub-lattice"
            )));
        }
        let mut out: Vec<SubalgebraIndex> = (1u32..(1 << n))
            .map(|mask| SubalgebraIndex { coords: (0..n).filter(|i| mask & (1 << i) != 0).collect() })
            .collect();
        out.sort();
        Ok(out)
    }
}

impl Ord for SubalgebraIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.coords.len().cmp(&other.coords.len()).then_with(|| self.coords.cmp(&other.coords))
    }
}

impl PartialOrd for SubalgebraIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl std::fmt::Display for SubalgebraIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}", self.coords)
    }
}

/// Projects atoms of `nu` (living on the coordinates of `from`) onto `to`,
/// merging atoms whose images coincide exactly.
pub fn pushforward(nu: &DiscreteMeasure, from: &SubalgebraIndex, to: &SubalgebraIndex) -> Result<DiscreteMeasure> {
    Error::check_dim(from.len(), nu.dim())?;
    let pos = to.positions_in(from)?;
    let mut atoms: Vec<Vec<f64>> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for (a, w) in nu.support() {
        let img: Vec<f64> = pos.iter().map(|&i| a[i]).collect();
        match atoms.iter().position(|b| b.iter().zip(&img).all(|(x, y)| x.to_bits() == y.to_bits())) {
            Some(k) => weights[k] += w,
            None => {
                atoms.push(img);
                weights.push(w);
            }
        }
    }
    DiscreteMeasure::normalized(atoms, weights)
}

/// A finite family `{nu_S}` of probability measures, `nu_S` on `R^|S|`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureFamily {
    dim: usize,
    entries: BTreeMap<SubalgebraIndex, DiscreteMeasure>,
}

impl MeasureFamily {
    pub fn new(dim: usize, entries: BTreeMap<SubalgebraIndex, DiscreteMeasure>) -> Result<Self> {
        for (s, nu) in &entries {
            if s.coords().iter().any(|&c| c >= dim) {
                return Err(Error::DimensionMismatch { expected: dim, got: s.coords().last().copied().unwrap_or(0) + 1 });
            }
            Error::check_dim(s.len(), nu.dim())?;
        }
        Ok(MeasureFamily { dim, entries })
    }

    /// Marginals of a global measure on the given subsets.
    pub fn marginals(nu: &DiscreteMeasure, lattice: &[SubalgebraIndex]) -> Result<Self> {
        let full = SubalgebraIndex::full(nu.dim());
        let entries = lattice
            .par_iter()
            .map(|s| Ok((s.clone(), pushforward(nu, &full, s)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(nu.dim(), entries.into_iter().collect())
    }

    /// Marginals on every nonempty coordinate subset.
    pub fn full_lattice(nu: &DiscreteMeasure) -> Result<Self> {
        Self::marginals(nu, &SubalgebraIndex::lattice(nu.dim())?)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &BTreeMap<SubalgebraIndex, DiscreteMeasure> {
        &self.entries
    }

    pub fn get(&self, s: &SubalgebraIndex) -> Option<&DiscreteMeasure> {
        self.entries.get(s)
    }

    pub fn insert(&mut self, s: SubalgebraIndex, nu: DiscreteMeasure) -> Result<()> {
        Error::check_dim(s.len(), nu.dim())?;
        self.entries.insert(s, nu);
        Ok(())
    }

    /// Pairs `S ⊊ T` both present in the family.
    pub fn nested_pairs(&self) -> Vec<(&SubalgebraIndex, &SubalgebraIndex)> {
        let keys: Vec<&SubalgebraIndex> = self.entries.keys().collect();
        let mut out = Vec::new();
        for t in &keys {
            for s in &keys {
                if s != t && s.is_subset_of(t) {
                    out.push((*s, *t));
                }
            }
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    coords: Vec<usize>,
    measure: DiscreteMeasure,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFamily {
    dim: usize,
    entries: Vec<RawEntry>,
}

impl Serialize for MeasureFamily {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RawFamily {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .map(|(k, v)| RawEntry { coords: k.coords.clone(), measure: v.clone() })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MeasureFamily {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawFamily::deserialize(d)?;
        let entries = raw
            .entries
            .into_iter()
            .map(|e| Ok((SubalgebraIndex::new(e.coords)?, e.measure)))
            .collect::<Result<BTreeMap<_, _>>>()
            .map_err(serde::de::Error::custom)?;
        MeasureFamily::new(raw.dim, entries).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyReport {
    pub degree: usize,
    pub pairs_checked: usize,
    pub max_moment_gap: f64,
    pub consistent: bool,
}

/// For each `S ⊆ T` present, compares moments of `pi_{S,T} nu_T` and `nu_S` up to `degree`.
pub fn consistency_check(fam: &MeasureFamily, degree: usize) -> Result<ConsistencyReport> {
    let pairs = fam.nested_pairs();
    let gaps = pairs
        .par_iter()
        .map(|(s, t)| {
            let projected = pushforward(&fam.entries[*t], t, s)?;
            let a = MomentFunctional::from_measure(&projected, degree);
            let b = MomentFunctional::from_measure(&fam.entries[*s], degree);
            a.max_moment_gap(&b)
        })
        .collect::<Result<Vec<f64>>>()?;
    let max_moment_gap = gaps.into_iter().fold(0.0, f64::max);
    Ok(ConsistencyReport { degree, pairs_checked: pairs.len(), max_moment_gap, consistent: max_moment_gap <= MOMENT_MATCH_TOL })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConcentrationMode {
    EpsDelta,
    EpsGamma,
}

#[derive(Debug, Clone, Serialize)]
pub struct SubsetConcentration {
    pub coords: Vec<usize>,
    /// `delta^2 lambda_max(M_S | p_S)`, an upper bound on every `nu_S(|a^| >= 1)` over the ball.
    pub chebyshev_bound: f64,
    /// Largest exact tail `nu_S(|a^| >= 1)` over random probes on the `delta`-sphere.
    pub max_probe_tail: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConcentrationReport {
    pub mode: ConcentrationMode,
    pub epsilon: f64,
    /// `delta` in `eps_delta` mode, `gamma` in `eps_gamma` mode.
    pub parameter: f64,
    pub certified_pairs: Vec<(f64, f64)>,
    pub exact: bool,
    pub certified: bool,
    /// Some probe exceeded `eps` (only possible when not certified).
    pub falsified: bool,
    pub subsets: Vec<SubsetConcentration>,
}

fn second_moment_sup(nu: &DiscreteMeasure, p_s: &GramForm, coords: &[usize]) -> Result<f64> {
    match p_s.sup_quadratic(&nu.second_moment_matrix())? {
        Extended::Finite(v) => Ok(v),
        Extended::Infinite => {
            let kernel = p_s.kernel_basis();
            let mass = nu.mass_where(|a| {
                kernel.iter().any(|b| {
                    let v: f64 = a.iter().zip(b.iter()).map(|(x, y)| x * y).sum();
                    v.abs() > INEQUALITY_SLACK * a.iter().map(|x| x.abs()).fold(1.0, f64::max)
                })
            });
            Err(Error::KernelIssue { subset: format!("{coords:?}"), mass })
        }
    }
}

/// Exact `nu(|<a, x>| >= t)`.
pub fn exact_tail(nu: &DiscreteMeasure, a: &DVector<f64>, t: f64) -> f64 {
    nu.mass_where(|x| x.iter().zip(a.iter()).map(|(u, v)| u * v).sum::<f64>().abs() >= t)
}

fn probe_rng(seed: u64, s: &SubalgebraIndex) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let key = s.coords.iter().fold(0u64, |acc, &c| acc | (1u64 << (c % 64)));
    rng.set_stream(key);
    rng
}

fn random_direction(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

fn slack(x: f64) -> f64 {
    INEQUALITY_SLACK * x.abs().max(1.0)
}

/// `(eps, delta)` certificate plus `probes` random probes per subset.
pub fn concentration_check(
    fam: &MeasureFamily,
    p: &GramForm,
    eps: f64,
    delta: f64,
    probes: usize,
    seed: u64,
) -> Result<ConcentrationReport> {
    Error::check_dim(fam.dim(), p.dim())?;
    if !(eps > 0.0 && delta > 0.0) {
        return Err(Error::Invalid("eps and delta must be positive".into()));
    }
    let subsets = fam
        .entries()
        .par_iter()
        .map(|(s, nu)| {
            let p_s = p.restrict_coords(s.coords())?;
            let lam = second_moment_sup(nu, &p_s, s.coords())?;
            let mut rng = probe_rng(seed, s);
            let mut max_probe_tail: f64 = 0.0;
            for _ in 0..probes {
                let w = random_direction(&mut rng, s.len());
                let pw = p_s.evaluate(&w)?;
                if pw <= 0.0 {
                    continue;
                }
                let a = w * (delta / pw);
                max_probe_tail = max_probe_tail.max(exact_tail(nu, &a, 1.0));
            }
            Ok(SubsetConcentration { coords: s.coords().to_vec(), chebyshev_bound: delta * delta * lam, max_probe_tail })
        })
        .collect::<Result<Vec<_>>>()?;
    let certified = subsets.iter().all(|s| s.chebyshev_bound <= eps + slack(eps));
    let falsified = subsets.iter().any(|s| s.max_probe_tail > eps);
    Ok(ConcentrationReport {
        mode: ConcentrationMode::EpsDelta,
        epsilon: eps,
        parameter: delta,
        certified_pairs: if certified { vec![(eps, delta)] } else { Vec::new() },
        exact: true,
        certified,
        falsified,
        subsets,
    })
}

/// `(eps, gamma)` certificate: `nu_S(|a^| <= gamma p(a)) >= 1 - eps` for every `a`.
///
/// For `p(a) > 0` Chebyshev gives the bound `lambda_max / gamma^2`; for `p(a) = 0` the
/// exact mass of atoms vanishing on each kernel direction of `p_S` is computed.
pub fn concentration_gamma_check(
    fam: &MeasureFamily,
    p: &GramForm,
    eps: f64,
    gamma: f64,
    probes: usize,
    seed: u64,
) -> Result<ConcentrationReport> {
    Error::check_dim(fam.dim(), p.dim())?;
    let subsets = fam
        .entries()
        .par_iter()
        .map(|(s, nu)| {
            let p_s = p.restrict_coords(s.coords())?;
            let lam = second_moment_sup(nu, &p_s, s.coords())?;
            let mut worst: f64 = 0.0;
            for b in p_s.kernel_basis() {
                // p(b) = 0: the atom must satisfy alpha(b) = 0
                let scale = b.amax().max(1.0);
                let off = nu.mass_where(|x| x.iter().zip(b.iter()).map(|(u, v)| u * v).sum::<f64>().abs() > INEQUALITY_SLACK * scale);
                worst = worst.max(off);
            }
            let mut rng = probe_rng(seed ^ 0x9a33, s);
            for _ in 0..probes {
                let a = random_direction(&mut rng, s.len());
                let pa = p_s.evaluate(&a)?;
                let outside = nu.mass_where(|x| x.iter().zip(a.iter()).map(|(u, v)| u * v).sum::<f64>().abs() > gamma * pa);
                worst = worst.max(outside);
            }
            Ok(SubsetConcentration { coords: s.coords().to_vec(), chebyshev_bound: (lam / (gamma * gamma)).max(worst), max_probe_tail: worst })
        })
        .collect::<Result<Vec<_>>>()?;
    let certified = subsets.iter().all(|s| s.chebyshev_bound <= eps + slack(eps));
    let falsified = subsets.iter().any(|s| s.max_probe_tail > eps);
    Ok(ConcentrationReport {
        mode: ConcentrationMode::EpsGamma,
        epsilon: eps,
        parameter: gamma,
        certified_pairs: if certified { vec![(eps, gamma)] } else { Vec::new() },
        exact: true,
        certified,
        falsified,
        subsets,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceEntry {
    pub epsilon: f64,
    pub delta: f64,
    pub eps_delta_certified: bool,
    /// `gamma = 1/delta'` with `delta' = delta/2`.
    pub gamma: f64,
    pub forward: bool,
    /// `eps_delta` at `1/gamma` recovered from the `eps_gamma` certificate.
    pub converse: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    pub entries: Vec<EquivalenceEntry>,
    pub holds: bool,
}

/// Both directions of the `eps-delta` / `eps-gamma` characterization on a grid.
pub fn concentration_equivalence_check(
    fam: &MeasureFamily,
    p: &GramForm,
    grid: &[(f64, f64)],
    probes: usize,
    seed: u64,
) -> Result<EquivalenceReport> {
    let mut entries = Vec::with_capacity(grid.len());
    for &(eps, delta) in grid {
        let ed = concentration_check(fam, p, eps, delta, probes, seed)?;
        let gamma = 2.0 / delta;
        let (forward, converse) = if ed.certified {
            let eg = concentration_gamma_check(fam, p, eps, gamma, probes, seed)?;
            let back = if eg.certified { concentration_check(fam, p, eps, 1.0 / gamma, probes, seed)?.certified } else { false };
            (eg.certified && !eg.falsified, back)
        } else {
            (true, true)
        };
        entries.push(EquivalenceEntry { epsilon: eps, delta, eps_delta_certified: ed.certified, gamma, forward, converse });
    }
    let holds = entries.iter().all(|e| e.forward && e.converse);
    Ok(EquivalenceReport { entries, holds })
}

#[derive(Debug, Clone, Serialize)]
pub struct OffsetCertificate {
    pub constant: f64,
    pub offset: f64,
    pub delta: f64,
    /// `C delta^2 + eps_0`.
    pub certified_epsilon: f64,
    pub hypothesis_holds: bool,
    pub holds: bool,
}

/// Concentration from `L(a^2) <= C p(a)^2 + eps_0` restricted to the `delta`-ball:
/// certifies `eps = C delta^2 + eps_0`.
pub fn offset_concentration_check(fam: &MeasureFamily, p: &GramForm, c: f64, eps0: f64, delta: f64) -> Result<OffsetCertificate> {
    let certified_epsilon = c * delta * delta + eps0;
    let mut hypothesis_holds = true;
    let mut holds = true;
    for (s, nu) in fam.entries() {
        let p_s = p.restrict_coords(s.coords())?;
        let sup = delta * delta * second_moment_sup(nu, &p_s, s.coords())?;
        if sup > c * delta * delta + eps0 + slack(certified_epsilon) {
            hypothesis_holds = false;
        }
        if sup > certified_epsilon + slack(certified_epsilon) {
            holds = false;
        }
    }
    Ok(OffsetCertificate { constant: c, offset: eps0, delta, certified_epsilon, hypothesis_holds, holds })
}

/// Every supported atom of every `nu_S` vanishes on `ker(p_S)`.
pub fn vanish_on_kernel_check(fam: &MeasureFamily, p: &GramForm) -> Result<bool> {
    for (s, nu) in fam.entries() {
        let p_s = p.restrict_coords(s.coords())?;
        for b in p_s.kernel_basis() {
            for (a, _) in nu.support() {
                let v: f64 = a.iter().zip(b.iter()).map(|(x, y)| x * y).sum();
                let scale = a.iter().map(|x| x.abs()).fold(1.0, f64::max);
                if v.abs() > INEQUALITY_SLACK * scale {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Serialize)]
pub struct SubsetMass {
    pub coords: Vec<usize>,
    pub mass: f64,
    pub bound: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProkhorovReport {
    pub epsilon: f64,
    pub delta: f64,
    pub trace: f64,
    /// `tr(p / delta r_eps)`, equal to `eps` by construction.
    pub identity_value: f64,
    pub identity_holds: bool,
    pub subsets: Vec<SubsetMass>,
    pub nesting_holds: bool,
    pub holds: bool,
}

/// `r_eps = q sqrt(tr(p/q)) / (delta sqrt(eps))` as a Gram form.
pub fn r_epsilon(p: &GramForm, q: &GramForm, eps: f64, delta: f64) -> Result<GramForm> {
    let tr = trace::trace(p, q)?.value.finite().ok_or(Error::InfiniteTrace)?;
    q.scaled(tr.sqrt() / (delta * eps.sqrt()))
}

fn in_compact(r_s: &GramForm, atom: &[f64]) -> Result<bool> {
    Ok(r_s.dual_norm(&DualFunctional::from_slice(atom))?.le(1.0 + INEQUALITY_SLACK))
}

/// Exact `nu_S(K^(S)) >= 1 - 14 eps` for each `S` and nesting of the compacta.
pub fn prokhorov_mass_check(fam: &MeasureFamily, p: &GramForm, q: &GramForm, eps: f64, delta: f64) -> Result<ProkhorovReport> {
    let cert = concentration_check(fam, p, eps, delta, 0, 0)?;
    if !cert.certified {
        return Err(Error::HypothesisNotCertified(format!("concentration at eps = {eps}, delta = {delta}")));
    }
    let tr = trace::trace(p, q)?.value.finite().ok_or(Error::InfiniteTrace)?;
    let r = r_epsilon(p, q, eps, delta)?;
    let identity_value = trace::trace(p, &r.scaled(delta)?)?.value.finite().ok_or(Error::InfiniteTrace)?;
    let identity_holds = identity_value <= eps * (1.0 + INEQUALITY_SLACK);

    let bound = 1.0 - 14.0 * eps;
    let subsets = fam
        .entries()
        .par_iter()
        .map(|(s, nu)| {
            let r_s = r.restrict_coords(s.coords())?;
            let mut mass = 0.0;
            for (a, w) in nu.support() {
                if in_compact(&r_s, a)? {
                    mass += w;
                }
            }
            Ok(SubsetMass { coords: s.coords().to_vec(), mass, bound, ok: mass >= bound - INEQUALITY_SLACK })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut nesting_holds = true;
    for (s, t) in fam.nested_pairs() {
        let r_s = r.restrict_coords(s.coords())?;
        let r_t = r.restrict_coords(t.coords())?;
        let pos = s.positions_in(t)?;
        for (a, _) in fam.entries()[t].support() {
            if in_compact(&r_t, a)? {
                let img: Vec<f64> = pos.iter().map(|&i| a[i]).collect();
                if !in_compact(&r_s, &img)? {
                    nesting_holds = false;
                }
            }
        }
    }
    let holds = identity_holds && nesting_holds && subsets.iter().all(|s| s.ok);
    Ok(ProkhorovReport { epsilon: eps, delta, trace: tr, identity_value, identity_holds, subsets, nesting_holds, holds })
}

#[derive(Debug, Clone, Serialize)]
pub struct CapReport {
    pub sum: f64,
    pub dual_norm: Extended,
    pub radius: f64,
    pub in_ball: bool,
    pub holds: bool,
}

/// `sum_{e in E} alpha(e)^2 <= n^2` for `alpha` in the `q'`-ball of radius `n`.
pub fn orthonormal_cap_check(q: &GramForm, system: &OrthonormalSystem, radius: f64, alpha: &Character) -> Result<CapReport> {
    Error::check_dim(q.dim(), alpha.dim())?;
    let c = DVector::from_column_slice(&alpha.point);
    let dual_norm = q.dual_norm(&DualFunctional::new(c.clone()))?;
    let sum: f64 = system.vectors.iter().map(|e| c.dot(e).powi(2)).sum();
    let bound = radius * radius;
    let in_ball = dual_norm.le(radius * (1.0 + INEQUALITY_SLACK));
    Ok(CapReport { sum, dual_norm, radius, in_ball, holds: sum <= bound + slack(bound) })
}

#[derive(Debug, Clone, Serialize)]
pub struct ReverseSeminormReport {
    pub cutoff: usize,
    pub gram: Vec<Vec<f64>>,
    pub trace: f64,
    pub bound: f64,
    pub holds: bool,
}

/// `p(v)^2 = sum_{n=1}^{N} n^-4 int_{K_n} v^2 dnu` with `K_n = {q'(alpha) <= n}`.
pub fn reverse_seminorm_construction(nu: &DiscreteMeasure, q: &GramForm, cutoff: usize) -> Result<(GramForm, ReverseSeminormReport)> {
    Error::check_dim(q.dim(), nu.dim())?;
    let n = nu.dim();
    let mut g = DMatrix::zeros(n, n);
    for (a, w) in nu.support() {
        let v = DVector::from_column_slice(a);
        let norm = q.dual_norm(&DualFunctional::new(v.clone()))?;
        let Extended::Finite(norm) = norm else { continue };
        let first = (norm.ceil() as usize).max(1);
        let coef: f64 = (first..=cutoff).map(|k| (k as f64).powi(-4)).sum();
        if coef > 0.0 {
            g += &v * v.transpose() * (w * coef);
        }
    }
    let p = GramForm::new(g)?;
    let tr = trace::trace(&p, q)?.value.finite().ok_or(Error::InfiniteTrace)?;
    let report = ReverseSeminormReport { cutoff, gram: p.rows(), trace: tr, bound: 2.0, holds: tr <= 2.0 };
    Ok((p, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_atom() -> DiscreteMeasure {
        DiscreteMeasure::new(vec![vec![1.0, 2.0], vec![-1.0, 0.0]], vec![0.5, 0.5]).unwrap()
    }

    fn idx(c: &[usize]) -> SubalgebraIndex {
        SubalgebraIndex::new(c.to_vec()).unwrap()
    }

    #[test]
    fn pushforward_examples() {
        let nu = pushforward(&two_atom(), &idx(&[0, 1]), &idx(&[0])).unwrap();
        assert_eq!(nu.atoms(), &[vec![1.0], vec![-1.0]]);
        assert_eq!(nu.weights(), &[0.5, 0.5]);
        let merged = DiscreteMeasure::new(vec![vec![1.0, 2.0], vec![1.0, 3.0]], vec![0.5, 0.5]).unwrap();
        let nu = pushforward(&merged, &idx(&[0, 1]), &idx(&[0])).unwrap();
        assert_eq!(nu.atoms(), &[vec![1.0]]);
        assert_eq!(nu.weights(), &[1.0]);
        assert!(matches!(pushforward(&nu, &idx(&[0]), &idx(&[1])), Err(Error::NotSubset(..))));
    }

    #[test]
    fn lattice_order() {
        let l = SubalgebraIndex::lattice(3).unwrap();
        let got: Vec<Vec<usize>> = l.iter().map(|s| s.coords().to_vec()).collect();
        assert_eq!(got, vec![vec![0], vec![1], vec![2], vec![0, 1], vec![0, 2], vec![1, 2], vec![0, 1, 2]]);
        assert!(SubalgebraIndex::lattice(13).is_err());
    }

    #[test]
    fn consistency_examples() {
        let fam = MeasureFamily::full_lattice(&two_atom()).unwrap();
        assert!(consistency_check(&fam, 4).unwrap().consistent);

        let mut bad = fam.clone();
        let perturbed = DiscreteMeasure::new(vec![vec![1.0], vec![-1.0]], vec![0.501, 0.499]).unwrap();
        bad.insert(idx(&[0]), perturbed).unwrap();
        assert!(!consistency_check(&bad, 4).unwrap().consistent);

        let single = MeasureFamily::marginals(&two_atom(), &[idx(&[1])]).unwrap();
        let r = consistency_check(&single, 4).unwrap();
        assert!(r.consistent && r.pairs_checked == 0);
    }

    #[test]
    fn concentration_examples() {
        let origin = DiscreteMeasure::dirac(vec![0.0, 0.0]).unwrap();
        let fam = MeasureFamily::full_lattice(&origin).unwrap();
        let p = GramForm::identity(2);
        for (eps, delta) in [(0.01, 100.0), (0.5, 1e3)] {
            assert!(concentration_check(&fam, &p, eps, delta, 20, 1).unwrap().certified);
        }

        // L(a^2) <= C p(a)^2 with C = lambda_max of the second-moment matrix
        let fam = MeasureFamily::full_lattice(&two_atom()).unwrap();
        let m = two_atom().second_moment_matrix();
        let c = crate::linalg::lambda_max(&m);
        for eps in [0.01, 0.1, 0.3] {
            let r = concentration_check(&fam, &p, eps, (eps / c).sqrt(), 50, 3).unwrap();
            assert!(r.certified && !r.falsified, "{r:?}");
        }

        // atom escapes along the p-null direction e_2
        let pk = GramForm::diagonal(&[1.0, 0.0]).unwrap();
        assert!(matches!(concentration_check(&fam, &pk, 0.1, 0.1, 0, 0), Err(Error::KernelIssue { .. })));
    }

    #[test]
    fn equivalence_examples() {
        let fam = MeasureFamily::full_lattice(&two_atom()).unwrap();
        let p = GramForm::identity(2);
        let r = concentration_equivalence_check(&fam, &p, &[(0.1, 0.1), (0.2, 0.25)], 50, 9).unwrap();
        assert!(r.holds && r.entries.iter().all(|e| e.eps_delta_certified));
        assert!(concentration_equivalence_check(&fam, &p, &[], 10, 0).unwrap().holds);

        // p vanishes on e_2, atoms too: the p(b) = 0 branch
        let flat = DiscreteMeasure::new(vec![vec![1.0, 0.0], vec![-0.5, 0.0]], vec![0.5, 0.5]).unwrap();
        let fam = MeasureFamily::full_lattice(&flat).unwrap();
        let pk = GramForm::diagonal(&[1.0, 0.0]).unwrap();
        let r = concentration_equivalence_check(&fam, &pk, &[(0.1, 0.2)], 20, 4).unwrap();
        assert!(r.holds);
        assert!(vanish_on_kernel_check(&fam, &pk).unwrap());
    }

    #[test]
    fn prokhorov_examples() {
        let p = GramForm::identity(1);
        let nu = DiscreteMeasure::new(vec![vec![-1.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
        let fam = MeasureFamily::full_lattice(&nu).unwrap();
        let (eps, delta) = (0.05, 0.05f64.sqrt());
        let r = prokhorov_mass_check(&fam, &p, &p, eps, delta).unwrap();
        // r_eps = |x| / (delta sqrt eps) = 20 |x|, atoms have dual norm 1/20
        assert_eq!(r.subsets[0].mass, 1.0);
        assert!(r.holds && r.identity_holds);
        assert_relative_eq!(r.identity_value, eps, epsilon = 1e-15);

        let dirac = MeasureFamily::full_lattice(&DiscreteMeasure::dirac(vec![0.0, 0.0]).unwrap()).unwrap();
        let r = prokhorov_mass_check(&dirac, &GramForm::identity(2), &GramForm::identity(2).scaled(2.0).unwrap(), 0.01, 1.0).unwrap();
        assert!(r.holds && r.subsets.iter().all(|s| s.mass == 1.0));

        assert!(matches!(prokhorov_mass_check(&fam, &p, &p, 0.01, 1.0), Err(Error::HypothesisNotCertified(_))));
    }

    #[test]
    fn cap_examples() {
        let q = GramForm::diagonal(&[1.0, 4.0]).unwrap();
        let (system, _) = q.gram_schmidt(&[DVector::from_vec(vec![1.0, 0.0]), DVector::from_vec(vec![0.0, 1.0])]).unwrap();
        let zero = orthonormal_cap_check(&q, &system, 2.0, &Character::new(vec![0.0, 0.0])).unwrap();
        assert_eq!(zero.sum, 0.0);
        // q'(c) = sqrt(c1^2 + c2^2/4); pick c on the sphere of radius 2
        let c = Character::new(vec![1.2, 3.2]);
        let r = orthonormal_cap_check(&q, &system, 2.0, &c).unwrap();
        assert_relative_eq!(r.sum, 4.0, epsilon = 1e-12);
        assert!(r.in_ball && r.holds);
    }

    #[test]
    fn reverse_construction_examples() {
        let q = GramForm::identity(2);
        let (_, r) = reverse_seminorm_construction(&DiscreteMeasure::dirac(vec![0.0, 0.0]).unwrap(), &q, 50).unwrap();
        assert_eq!(r.trace, 0.0);

        let nu = DiscreteMeasure::new(vec![vec![0.6, 0.8], vec![-0.3, 0.1]], vec![0.5, 0.5]).unwrap();
        let (p, r) = reverse_seminorm_construction(&nu, &q, 50).unwrap();
        let zeta: f64 = (1..=50).map(|k| (k as f64).powi(-4)).sum();
        let expected = nu.second_moment_matrix() * zeta;
        assert!((p.gram() - expected).amax() < 1e-15);
        assert!(r.holds && r.trace < (1..=50).map(|k| (k as f64).powi(-2)).sum::<f64>());

        let far = DiscreteMeasure::new(vec![vec![1.5, 0.0], vec![0.0, -1.9]], vec![0.5, 0.5]).unwrap();
        assert!(reverse_seminorm_construction(&far, &q, 50).unwrap().1.holds);
    }
}
