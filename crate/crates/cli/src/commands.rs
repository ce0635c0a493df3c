//! The four subcommands. Each returns whether a falsification was observed.

use std::path::Path;

use maxineq::blocks::{horizon, MAX_INDEX};
use maxineq::maxineq::{
    calibrate_constant, check_theorem_exact, lhs_exceedance_exact, lhs_exceedance_mc, precondition_b, rhs_bound, PreconditionReport,
    TheoremRhsBreakdown, TheoremVerdict, INEQUALITY_SLACK,
};
use maxineq::model::{FiniteJointModel, Marginal};
use maxineq::numeric::le_with_slack;
use maxineq::scheme::NormingScheme;
use maxineq::sequence::{FiniteSequence, SequenceLaw, StationarySequence};
use maxineq::slln::{self, ConditionId, ConditionReport};
use maxineq::stats::ProportionEstimate;
use serde::Serialize;
use serde_json::json;

use crate::config::{ConditionParams, ModelConfig, RunConfig};
use crate::error::CliError;
use crate::output::{document, to_json, write_csv, write_json};

pub struct Outcome {
    pub falsified: bool,
    pub summary: String,
}

fn missing(section: &str) -> CliError {
    CliError::Config(format!("the config has no \"{section}\" section"))
}

fn finite_model(cfg: &RunConfig) -> Result<Option<FiniteJointModel>, CliError> {
    match &cfg.model {
        ModelConfig::Finite { spec } => Ok(Some(FiniteJointModel::build(spec, cfg.budget()?)?)),
        ModelConfig::Copula { .. } => Ok(None),
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct LhsReport {
    method: &'static str,
    value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    interval: Option<ProportionEstimate>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct VerifyEntry {
    epsilon: f64,
    precondition: PreconditionReport,
    lhs: LhsReport,
    rhs: TheoremRhsBreakdown,
    verdict: TheoremVerdict,
}

/// Precondition, both sides and a verdict for every ε of the ladder.
/// Monte Carlo left sides count as a violation only when the lower
/// confidence limit exceeds the bound.
pub fn verify(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let params = cfg.verify.as_ref().ok_or_else(|| missing("verify"))?;
    let scheme = &cfg.scheme;
    let n = params.n;
    let calibration = calibrate_constant(scheme, n)?;
    let constant = params.constant.unwrap_or(calibration.constant);
    let mut entries = Vec::new();
    if let Some(model) = finite_model(cfg)? {
        for &eps in &params.epsilons {
            let c = check_theorem_exact(&model, eps, scheme, n, constant, cfg.budget()?)?;
            entries.push(VerifyEntry {
                epsilon: eps,
                precondition: c.precondition,
                lhs: LhsReport { method: "exact", value: c.lhs, interval: None },
                rhs: c.rhs,
                verdict: c.verdict,
            });
        }
    } else {
        let (model, eval) = cfg.model.copula()?.expect("copula model");
        let len = horizon(scheme.r(), n)?;
        let law = StationarySequence::new(model.clone(), Some(len), eval)?;
        let sampler = model.sampler(len as usize)?;
        let means = vec![model.mean()?; len as usize];
        for &eps in &params.epsilons {
            let precondition = precondition_b(&law, scheme, n, eps)?;
            let est = lhs_exceedance_mc(&sampler, &means, eps, scheme, n, params.replicas, params.seed)?;
            let rhs = rhs_bound(&law, eps, scheme, n, constant)?;
            let verdict = if !precondition.satisfied {
                TheoremVerdict::PreconditionUnmet
            } else if le_with_slack(est.lower, rhs.total, INEQUALITY_SLACK) {
                TheoremVerdict::Verified
            } else {
                TheoremVerdict::Violated
            };
            entries.push(VerifyEntry {
                epsilon: eps,
                precondition,
                lhs: LhsReport { method: "montecarlo", value: est.estimate, interval: Some(est) },
                rhs,
                verdict,
            });
        }
    }
    let falsified = entries.iter().any(|e| e.verdict == TheoremVerdict::Violated);
    let verdicts: Vec<String> = entries.iter().map(|e| format!("ε = {}: {:?}", e.epsilon, e.verdict)).collect();
    let doc = document(
        "verify-max-ineq",
        &json!({
            "n": n,
            "r": scheme.r(),
            "constant": constant,
            "calibration": calibration,
            "results": serde_json::to_value(&entries).expect("serializable"),
            "falsified": falsified,
        }),
    )?;
    write_json(out, "verify.json", &doc)?;
    Ok(Outcome { falsified, summary: verdicts.join("\n") })
}

fn file_stem(id: ConditionId) -> String {
    let s = serde_json::to_value(id).expect("id").as_str().expect("string id").to_string();
    format!("condition-{}", s.replace('\'', "-prime").replace('.', "_"))
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct SummaryRow {
    condition_id: ConditionId,
    verdict: Option<slln::Verdict>,
    last_cutoff: Option<u64>,
    last_value: Option<f64>,
    limit_estimate: Option<f64>,
    side_checks_pass: Option<bool>,
    skipped: Option<String>,
}

impl SummaryRow {
    fn from_report(r: &ConditionReport) -> Self {
        let last = r.partial_sums.last();
        Self {
            condition_id: r.condition_id,
            verdict: Some(r.verdict),
            last_cutoff: last.map(|p| p.cutoff),
            last_value: last.map(|p| p.value),
            limit_estimate: r.limit_estimate,
            side_checks_pass: Some(r.side_checks_pass()),
            skipped: None,
        }
    }

    fn skipped(id: ConditionId, reason: impl Into<String>) -> Self {
        Self {
            condition_id: id,
            verdict: None,
            last_cutoff: None,
            last_value: None,
            limit_estimate: None,
            side_checks_pass: None,
            skipped: Some(reason.into()),
        }
    }
}

/// Largest `m` with `r^{m+1} ≤ len`.
fn fitting_scale(r: u64, len: u64) -> Option<u32> {
    (0..64u32).take_while(|m| horizon(r, *m).is_ok_and(|h| h <= len)).last()
}

/// Skippable errors: the statement does not apply to this model.
fn not_applicable(e: &maxineq::Error) -> bool {
    matches!(e, maxineq::Error::Unsupported(_) | maxineq::Error::Domain(_))
}

fn run_conditions(
    law: &dyn SequenceLaw,
    scheme: &NormingScheme,
    p: &ConditionParams,
    envelope: Option<Marginal>,
) -> Result<(Vec<ConditionReport>, Vec<SummaryRow>, Option<slln::MomentFamilyReport>), CliError> {
    let tol = p.tolerance;
    let r = scheme.r();
    let mut reps = Vec::new();
    let mut skipped = Vec::new();
    reps.push(slln::check_condition_a(scheme, 0..=p.growth_max_n, tol)?);
    match &envelope {
        Some(env) => {
            reps.push(slln::check_growth_conditions(scheme, env, 0..=p.growth_max_n, tol)?.1);
            reps.extend(slln::check_series_conditions(env, scheme, p.series_cutoff, tol)?);
        }
        None => {
            for id in [ConditionId::BPrime, ConditionId::C, ConditionId::D, ConditionId::E] {
                skipped.push(SummaryRow::skipped(id, "needs an envelope for a non-identically distributed model"));
            }
        }
    }
    // Scales that index the sequence stop at the largest m with r^{m+1}
    // within the model length, or within the index cap.
    let cap = fitting_scale(r, law.len().unwrap_or(MAX_INDEX).min(MAX_INDEX));
    // Stationary covariance series work with real-valued spans.
    let cov_cap = if law.len().is_some() { cap.unwrap_or(0) } else { u32::MAX };
    match cap {
        Some(cap) => {
            reps.push(slln::check_condition_b(law, scheme, 0..=p.condition_b_max_n.min(cap), tol)?);
            let (f, g) = slln::check_covariance_conditions(law, scheme, p.covariance_cutoff.min(cov_cap), tol)?;
            reps.extend([f, g]);
        }
        None => {
            for id in [ConditionId::B, ConditionId::F, ConditionId::G] {
                skipped.push(SummaryRow::skipped(id, format!("model shorter than r = {r}")));
            }
        }
    }
    // Pair series of stationary laws use closed-form weight sums and reach
    // further than indexed scales.
    let pair_cap = match law.len() {
        Some(_) => cap.map_or(1, |c| c.saturating_add(1)),
        None => (1..64u32).take_while(|m| r.checked_pow(*m).is_some_and(|h| h <= slln::PAIR_HORIZON_CAP)).last().unwrap_or(1),
    };
    match scheme {
        NormingScheme::Power { p: pp, alpha, r } => {
            let cut = pair_cap.min(p.corollary_cutoff).max(1);
            reps.push(slln::check_corollary_condition(law, *pp, *alpha, *r, cut, tol)?);
            match slln::check_pqd_series(law, *pp, *alpha, *r, pair_cap.min(p.pqd_cutoff).max(1), tol) {
                Ok(rep) => reps.push(rep),
                Err(e) if not_applicable(&e) => skipped.push(SummaryRow::skipped(ConditionId::PqdSeries, e.to_string())),
                Err(e) => return Err(e.into()),
            }
        }
        NormingScheme::Table { .. } => {
            for id in [ConditionId::PairWeighted, ConditionId::PqdSeries] {
                skipped.push(SummaryRow::skipped(id, "needs a power scheme"));
            }
        }
    }
    let shells = slln::scheme_shells(scheme, p.moment_shells)?;
    let ranges = match law.len() {
        Some(len) if law.window_covariance_sum(1.0, &maxineq::transform::Transform::Identity).is_none() => slln::default_ranges(len),
        Some(len) => (1..=len.min(p.moment_max_length)).map(|l| (1, l)).collect(),
        None => (1..=p.moment_max_length).map(|l| (1, l)).collect(),
    };
    let family = slln::check_moment_family(law, &shells, &ranges, tol)?;
    reps.extend(family.reports.iter().cloned());
    Ok((reps, skipped, Some(family)))
}

/// One report per condition, the moment-family detail and a summary table.
pub fn check_conditions(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let params = cfg.conditions.clone().unwrap_or_default();
    let model = finite_model(cfg)?;
    let finite_law;
    let stationary_law;
    let law: &dyn SequenceLaw = match &model {
        Some(m) => {
            finite_law = FiniteSequence::new(m)?;
            &finite_law
        }
        None => {
            let (m, eval) = cfg.model.copula()?.expect("copula model");
            stationary_law = StationarySequence::new(m, None, eval)?;
            &stationary_law
        }
    };
    let envelope = match &params.envelope {
        Some(e) => Some(e.clone()),
        None if law.identically_distributed() => Some(law.marginal(1)?.clone()),
        None => None,
    };
    let (reports, skipped, family) = run_conditions(law, &cfg.scheme, &params, envelope)?;
    for r in &reports {
        write_json(out, &format!("{}.json", file_stem(r.condition_id)), &document("check-conditions", r)?)?;
    }
    let mut falsified = false;
    if let Some(f) = &family {
        falsified |= !f.h_relations_hold();
        write_json(out, "moment-family.json", &document("check-conditions", f)?)?;
    }
    let mut rows: Vec<SummaryRow> = reports.iter().map(SummaryRow::from_report).collect();
    rows.extend(skipped);
    rows.sort_by_key(|r| r.condition_id);
    let text = rows
        .iter()
        .map(|r| match (&r.verdict, &r.skipped) {
            (Some(v), _) => format!("{}: {}", serde_json::to_value(r.condition_id).unwrap().as_str().unwrap(), serde_json::to_value(v).unwrap().as_str().unwrap()),
            (None, Some(why)) => format!("{}: skipped ({why})", serde_json::to_value(r.condition_id).unwrap().as_str().unwrap()),
            _ => unreachable!(),
        })
        .collect::<Vec<_>>()
        .join("\n");
    write_json(out, "summary.json", &document("check-conditions", &json!({ "conditions": serde_json::to_value(&rows).unwrap(), "hRelationFalsified": falsified }))?)?;
    Ok(Outcome { falsified, summary: text })
}

/// Trajectory CSV and JSON for a copula model.
pub fn slln_experiment(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let params = cfg.experiment.as_ref().ok_or_else(|| missing("experiment"))?;
    let Some((model, _)) = cfg.model.copula()? else {
        return Err(CliError::Config("slln-experiment needs a copula model".into()));
    };
    let p = match (params.p, cfg.scheme.p()) {
        (Some(p), _) | (None, Some(p)) => p,
        (None, None) => return Err(CliError::Config("experiment.p is required with a table scheme".into())),
    };
    let stats = slln::slln_trajectory(&model, p, &params.checkpoints, &params.seeds, &params.eps_ladder)?;
    write_csv(out, "trajectory.csv", &stats.csv_header(), &stats.csv_records())?;
    write_json(out, "trajectory.json", &document("slln-experiment", &stats)?)?;
    let summary = stats
        .summary
        .iter()
        .map(|s| format!("n = {}: median {:.4e}, q10 {:.4e}, q90 {:.4e}", s.n, s.median, s.q10, s.q90))
        .collect::<Vec<_>>()
        .join("\n");
    Ok(Outcome { falsified: false, summary })
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct CoverageRow {
    epsilon: f64,
    exact: f64,
    replicas: u64,
    meta_replications: u64,
    covered: u64,
    coverage: f64,
}

/// Monte Carlo intervals against the exact probability over seeded
/// meta-replications. Prints JSON; also writes it when `out` is given.
pub fn oracle_compare(cfg: &RunConfig, out: Option<&Path>) -> Result<Outcome, CliError> {
    let params = cfg.oracle.as_ref().ok_or_else(|| missing("oracle"))?;
    let Some(model) = finite_model(cfg)? else {
        return Err(CliError::Config("oracle-compare needs a finite model".into()));
    };
    let budget = cfg.budget()?;
    let sampler = model.sampler();
    let means = model.means();
    let mut rows = Vec::new();
    for &eps in &params.epsilons {
        let exact = lhs_exceedance_exact(&model, eps, &cfg.scheme, params.n, budget)?.exact_probability;
        let mut covered = 0;
        for i in 0..params.meta_replications {
            let seed = params.seed.wrapping_add(i);
            let est = lhs_exceedance_mc(&sampler, &means, eps, &cfg.scheme, params.n, params.replicas, seed)?;
            covered += u64::from(est.lower <= exact && exact <= est.upper);
        }
        rows.push(CoverageRow {
            epsilon: eps,
            exact,
            replicas: params.replicas,
            meta_replications: params.meta_replications,
            covered,
            coverage: covered as f64 / params.meta_replications as f64,
        });
    }
    let doc = document("oracle-compare", &json!({ "n": params.n, "rows": serde_json::to_value(&rows).unwrap() }))?;
    if let Some(dir) = out {
        write_json(dir, "oracle-compare.json", &doc)?;
    }
    Ok(Outcome { falsified: false, summary: to_json(&doc) })
}
