//! End-to-end pipeline: from a target measure to a checked projective family
//! of representing measures.
//!
//! Every stage records its own data and status. A failing stage does not stop
//! the pipeline; stages whose inputs are missing are marked skipped.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::concentration::{concentration_check, consistency_check, prokhorov_mass_check, MeasureFamily, SubalgebraIndex};
use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::moment::{MomentFunctional, QuadraticModuleSpec};
use crate::seminorm::{DualFunctional, GramForm};
use crate::solver::solve_multivariate;
use crate::tolerances::MOMENT_MATCH_TOL;
use crate::trace;

/// Tolerance for `g(c) >= 0` membership tests of atoms in `K_Q`.
pub const MODULE_MEMBERSHIP_TOL: f64 = 1e-9;

pub const STAGE_NAMES: [&str; 9] = [
    "moment_functional",
    "s_l_gram",
    "trace",
    "subalgebra_lattice",
    "consistency",
    "concentration",
    "prokhorov",
    "support",
    "representation",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub status: StageStatus,
    pub data: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub stages: Vec<Stage>,
    /// `tr(s_L|_V / q)`, when finite.
    pub trace: Option<f64>,
    /// Target atoms outside `K_Q`.
    pub module_violations: Vec<usize>,
    pub passed: bool,
}

impl ScenarioReport {
    pub fn stage(&self, name: &str) -> Option<&Stage> {
        self.stages.iter().find(|s| s.name == name)
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioInput {
    pub target: DiscreteMeasure,
    pub q: GramForm,
    pub module: QuadraticModuleSpec,
    /// Truncation degree of the moment functional (at least 2).
    pub degree: usize,
    pub epsilons: Vec<f64>,
    /// Random probes per subset in the concentration stage.
    pub probes: usize,
    pub seed: u64,
}

fn stage(name: &str, outcome: Result<(bool, Value)>) -> Stage {
    match outcome {
        Ok((ok, data)) => Stage { name: name.into(), status: if ok { StageStatus::Pass } else { StageStatus::Fail }, data },
        Err(e) => Stage { name: name.into(), status: StageStatus::Fail, data: json!({ "error": e.to_string() }) },
    }
}

fn skipped(name: &str, missing: &str) -> Stage {
    Stage { name: name.into(), status: StageStatus::Skipped, data: json!({ "missing": missing }) }
}

fn to_value<T: Serialize>(x: &T) -> Result<Value> {
    serde_json::to_value(x).map_err(|e| Error::Invalid(e.to_string()))
}

/// Runs all nine stages on `input`.
pub fn verify_main_theorem_scenario(input: &ScenarioInput) -> Result<ScenarioReport> {
    let n = input.target.dim();
    Error::check_dim(n, input.q.dim())?;
    if input.degree < 2 {
        return Err(Error::Invalid("the moment degree must be at least 2".into()));
    }
    if input.epsilons.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
        return Err(Error::Invalid("epsilons must lie in (0, 1)".into()));
    }
    let mut stages = Vec::with_capacity(STAGE_NAMES.len());

    // (1) moment functional and its positivity certificates
    let l = MomentFunctional::from_measure(&input.target, input.degree);
    stages.push(stage(
        STAGE_NAMES[0],
        input.module.certificates(&l).and_then(|certs| {
            let ok = certs.iter().all(|c| c.certificate.psd);
            Ok((ok, json!({ "dim": n, "max_degree": input.degree, "certificates": to_value(&certs)? })))
        }),
    ));

    // (2) s_L on the degree-one slice
    let s_l = GramForm::new(input.target.second_moment_matrix());
    stages.push(stage(
        STAGE_NAMES[1],
        s_l.as_ref().map_err(Clone::clone).map(|p| (true, json!({ "gram": p.rows(), "rank": p.rank() }))),
    ));
    let s_l = s_l.ok();

    // (3) relative trace against q
    let mut tr = None;
    match &s_l {
        Some(p) => stages.push(stage(
            STAGE_NAMES[2],
            trace::trace(p, &input.q).map(|r| {
                tr = r.finite();
                (tr.is_some(), json!({ "value": r.value, "method": r.method }))
            }),
        )),
        None => stages.push(skipped(STAGE_NAMES[2], "s_l_gram")),
    }

    // (4) marginals over the full coordinate lattice
    let family = SubalgebraIndex::lattice(n).and_then(|lat| MeasureFamily::marginals(&input.target, &lat));
    stages.push(stage(
        STAGE_NAMES[3],
        family.as_ref().map_err(Clone::clone).map(|f| {
            let subsets: Vec<Value> = f.entries().iter().map(|(s, nu)| json!({ "coords": s.coords(), "atoms": nu.len() })).collect();
            (true, json!({ "subsets": subsets }))
        }),
    ));
    let family = family.ok();

    // (5) projective consistency
    match &family {
        Some(f) => stages.push(stage(STAGE_NAMES[4], consistency_check(f, input.degree).and_then(|r| Ok((r.consistent, to_value(&r)?))))),
        None => stages.push(skipped(STAGE_NAMES[4], "subalgebra_lattice")),
    }

    // (6) s_L-concentration with delta = sqrt(eps)
    let mut certified = Vec::new();
    match (&family, &s_l) {
        (Some(f), Some(p)) => {
            let outcome = input
                .epsilons
                .iter()
                .map(|&eps| concentration_check(f, p, eps, eps.sqrt(), input.probes, input.seed))
                .collect::<Result<Vec<_>>>()
                .and_then(|reports| {
                    let ok = reports.iter().all(|r| r.certified);
                    certified = reports.iter().map(|r| r.certified).collect();
                    Ok((ok, json!({ "reports": to_value(&reports)? })))
                });
            stages.push(stage(STAGE_NAMES[5], outcome));
        }
        _ => stages.push(skipped(STAGE_NAMES[5], "subalgebra_lattice or s_l_gram")),
    }

    // (7) compact-mass bound per eps
    match (&family, &s_l, tr) {
        (Some(f), Some(p), Some(_)) if certified.len() == input.epsilons.len() => {
            let outcome = input
                .epsilons
                .iter()
                .zip(&certified)
                .filter(|(_, &c)| c)
                .map(|(&eps, _)| prokhorov_mass_check(f, p, &input.q, eps, eps.sqrt()))
                .collect::<Result<Vec<_>>>()
                .and_then(|reports| {
                    let ok = reports.len() == input.epsilons.len() && reports.iter().all(|r| r.holds);
                    Ok((ok, json!({ "reports": to_value(&reports)? })))
                });
            stages.push(stage(STAGE_NAMES[6], outcome));
        }
        _ => stages.push(skipped(STAGE_NAMES[6], "concentration or finite trace")),
    }

    // (8) support: q-continuity of atoms and membership in K_Q
    let mut module_violations = Vec::new();
    let support = (|| -> Result<(bool, Value)> {
        let mut atoms = Vec::with_capacity(input.target.len());
        let mut continuous = true;
        for (j, (a, w)) in input.target.support().enumerate() {
            let dual = input.q.dual_norm(&DualFunctional::from_slice(a))?;
            let inside = input.module.contains(a, MODULE_MEMBERSHIP_TOL)?;
            continuous &= dual.is_finite();
            if !inside {
                module_violations.push(j);
            }
            atoms.push(json!({ "atom": a, "weight": w, "dual_norm": dual, "in_k_q": inside }));
        }
        let ok = continuous && module_violations.is_empty();
        Ok((ok, json!({ "atoms": atoms, "q_continuous": continuous, "k_q_violations": module_violations.clone() })))
    })();
    stages.push(stage(STAGE_NAMES[7], support));

    // (9) each nu_S represents L restricted to S; the solver recovers nu_S from moments alone
    match &family {
        Some(f) => {
            let outcome = (|| -> Result<(bool, Value)> {
                let mut rows = Vec::with_capacity(f.len());
                let mut ok = true;
                for (s, nu) in f.entries() {
                    let expected = l.marginal(s.coords())?;
                    let gap = MomentFunctional::from_measure(nu, input.degree).max_moment_gap(&expected)?;
                    let represents = gap <= MOMENT_MATCH_TOL;
                    ok &= represents;
                    let recovery = match solve_multivariate(&expected, input.degree / 2, input.seed) {
                        Ok(sol) => json!({
                            "atoms": sol.measure.len(),
                            "residual": sol.residual,
                            "rank_profile": sol.rank_profile,
                            "flat": sol.flat,
                        }),
                        Err(e) => json!({ "error": e.to_string() }),
                    };
                    rows.push(json!({ "coords": s.coords(), "max_moment_gap": gap, "represents": represents, "solver": recovery }));
                }
                Ok((ok, json!({ "subsets": rows })))
            })();
            stages.push(stage(STAGE_NAMES[8], outcome));
        }
        None => stages.push(skipped(STAGE_NAMES[8], "subalgebra_lattice")),
    }

    let passed = stages.iter().all(|s| s.status == StageStatus::Pass);
    Ok(ScenarioReport { stages, trace: tr, module_violations, passed })
}
