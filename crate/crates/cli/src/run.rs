//! Analyses behind each subcommand and the artifact writer for `run`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use robustinfo::baselines::{compare, format_g10, RealizedBaseline, CSV_COLUMNS};
use robustinfo::designer::DesignOptions;
use robustinfo::equilibrium::RealizedEvaluation;
use robustinfo::instances::{random_instances, InstanceSpec};
use robustinfo::lp::{build_lp, extract_policy, kkt_residuals, KktResiduals, LpSolution, LpStatus};
use robustinfo::seqpolicy::ObedienceReport;
use robustinfo::{
    check_policy, design, design_bce_optimistic, design_with, evaluate_bce_realized, evaluate_policy_realized,
    to_sequential_policy, BaselinePolicy, ComparisonRecord, Environment, Error, EvaluationMode, InvitationSequence,
    PolicyRef, SequentialPolicy, ThresholdPolicy, WelfareSpec,
};
use serde::Serialize;

use crate::error::CliError;
use crate::scenario::{Mode, ScenarioConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Obedience tolerance.
    pub tol: f64,
    /// Fail on violated assumptions and reject zero-welfare scores.
    pub strict: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            strict: false,
        }
    }
}

/// Returns an assumption error in strict mode when any assumption fails.
pub fn check_strict(config: &ScenarioConfig, opts: &RunOptions) -> Result<(), CliError> {
    if !opts.strict {
        return Ok(());
    }
    let env = config.environment(config.cost)?;
    let report = env.check_assumptions(&config.welfare()?)?;
    if report.all_hold() {
        Ok(())
    } else {
        Err(CliError::Assumption(report.warnings()))
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact serializes");
    s.push('\n');
    s
}

fn csv_string<I, R>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

/// Robust design at the scenario's cost. When only universal defection is
/// implementable the threshold policy is absent and the policy never invites.
#[derive(Debug, Clone)]
pub struct DesignOutcome {
    pub threshold: Option<ThresholdPolicy>,
    pub policy: SequentialPolicy,
    pub infeasible: Option<String>,
}

#[derive(Serialize)]
struct InfeasibleDesign<'a> {
    status: &'static str,
    message: &'a str,
    expected_welfare: f64,
}

impl DesignOutcome {
    pub fn to_json(&self) -> String {
        match (&self.threshold, &self.infeasible) {
            (Some(tp), _) => to_json(tp),
            (None, msg) => to_json(&InfeasibleDesign {
                status: "INFEASIBLE",
                message: msg.as_deref().unwrap_or_default(),
                expected_welfare: 0.0,
            }),
        }
    }

    /// Rank-ordered score series: `rank,state,label,score,invite_probability`.
    pub fn scores_csv(&self) -> String {
        let header = ["rank", "state", "label", "score", "invite_probability"];
        let rows: Vec<Vec<String>> = match &self.threshold {
            Some(tp) => tp
                .order
                .iter()
                .enumerate()
                .map(|(rank, &s)| {
                    vec![
                        rank.to_string(),
                        s.to_string(),
                        tp.labels[s].clone(),
                        format_g10(tp.scores[s]),
                        format_g10(tp.invite_probability[s]),
                    ]
                })
                .collect(),
            None => Vec::new(),
        };
        csv_string(&header, rows)
    }
}

pub fn design_outcome(config: &ScenarioConfig, opts: &RunOptions) -> Result<DesignOutcome, CliError> {
    let env = config.environment(config.cost)?;
    let w = config.welfare()?;
    match design_with(&env, &w, DesignOptions { strict: opts.strict }) {
        Ok(tp) => {
            let policy = to_sequential_policy(&tp, &env);
            Ok(DesignOutcome {
                threshold: Some(tp),
                policy,
                infeasible: None,
            })
        }
        Err(Error::Infeasible(msg)) => Ok(DesignOutcome {
            threshold: None,
            policy: silent_policy(&env),
            infeasible: Some(msg),
        }),
        Err(e) => Err(e.into()),
    }
}

fn silent_policy(env: &Environment) -> SequentialPolicy {
    let mut p = SequentialPolicy::new(env.labels().to_vec());
    for s in 0..env.n_states() {
        p.set(s, InvitationSequence::empty(), 1.0);
    }
    p
}

pub fn obedience(config: &ScenarioConfig, policy: &SequentialPolicy, opts: &RunOptions) -> Result<ObedienceReport, CliError> {
    let env = config.environment(config.cost)?;
    Ok(check_policy(policy, &env, opts.tol)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct LpArtifact {
    pub n_vars: usize,
    pub n_eq_rows: usize,
    pub n_ineq_rows: usize,
    pub solution: LpSolution,
    pub kkt: Option<KktResiduals>,
    pub extracted_policy_passes: Option<bool>,
    pub designer_welfare: f64,
    pub abs_difference: f64,
}

/// Exact LP with its diagnostics and the CPLEX-format model text.
pub fn lp_outcome(config: &ScenarioConfig, opts: &RunOptions) -> Result<(LpArtifact, String), CliError> {
    let env = config.environment(config.cost)?;
    let w = config.welfare()?;
    let lp = build_lp(&env, &w)?;
    let solution = robustinfo::solve(&lp)?;
    let (kkt, passes) = if solution.status == LpStatus::Optimal {
        let policy = extract_policy(&solution, &lp)?;
        (
            Some(kkt_residuals(&lp, &solution)?),
            Some(check_policy(&policy, &env, opts.tol.max(1e-7))?.pass),
        )
    } else {
        (None, None)
    };
    let designer_welfare = designer_welfare(&env, &w)?;
    let artifact = LpArtifact {
        n_vars: lp.n_vars(),
        n_eq_rows: lp.eq_constraints.len(),
        n_ineq_rows: lp.ineq_constraints.len(),
        abs_difference: (solution.value - designer_welfare).abs(),
        solution,
        kkt,
        extracted_policy_passes: passes,
        designer_welfare,
    };
    Ok((artifact, lp.to_lp_format()))
}

fn designer_welfare(env: &Environment, w: &WelfareSpec) -> Result<f64, CliError> {
    match design(env, w) {
        Ok(tp) => Ok(tp.expected_welfare),
        Err(Error::Infeasible(_)) => Ok(0.0),
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RandomVerification {
    pub seed: u64,
    pub instances: usize,
    pub max_abs_difference: f64,
    pub disagreements: Vec<usize>,
}

/// LP optimum against the threshold rule on seeded random convex instances.
pub fn verify_random(count: usize, seed: u64) -> Result<RandomVerification, CliError> {
    let instances = random_instances(seed, count, &InstanceSpec::default());
    let diffs: Vec<f64> = instances
        .par_iter()
        .map(|(env, w)| -> Result<f64, CliError> {
            let sol = robustinfo::solve(&build_lp(env, w)?)?;
            Ok((sol.value - designer_welfare(env, w)?).abs())
        })
        .collect::<Result<_, _>>()?;
    Ok(RandomVerification {
        seed,
        instances: count,
        max_abs_difference: diffs.iter().copied().fold(0.0, f64::max),
        disagreements: (0..count).filter(|&i| diffs[i] > 1e-6).collect(),
    })
}

pub fn comparison(config: &ScenarioConfig) -> Result<ComparisonRecord, CliError> {
    let env = config.environment(config.cost)?;
    Ok(compare(&env, &config.welfare()?)?)
}

pub fn comparison_csv<'a>(records: impl IntoIterator<Item = &'a ComparisonRecord>) -> String {
    csv_string(&CSV_COLUMNS, records.into_iter().map(|r| r.csv_fields()))
}

#[derive(Debug, Clone, Serialize)]
pub struct BaselineEvaluation {
    pub policy: BaselinePolicy,
    pub realized: RealizedBaseline,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluationArtifact {
    pub robust_private: RealizedEvaluation,
    pub robust_public: RealizedEvaluation,
    pub bce: BaselineEvaluation,
}

/// Realized welfare of a policy under one disclosure mode.
pub fn evaluate(config: &ScenarioConfig, policy: &SequentialPolicy, mode: EvaluationMode) -> Result<RealizedEvaluation, CliError> {
    let env = config.environment(config.cost)?;
    Ok(evaluate_policy_realized(PolicyRef::Sequential(policy), &env, &config.welfare()?, mode)?)
}

pub fn evaluation_artifact(config: &ScenarioConfig, policy: &SequentialPolicy) -> Result<EvaluationArtifact, CliError> {
    let env = config.environment(config.cost)?;
    let w = config.welfare()?;
    let bp = design_bce_optimistic(&env, &w)?;
    let realized = evaluate_bce_realized(&bp, &env, &w)?;
    Ok(EvaluationArtifact {
        robust_private: evaluate(config, policy, EvaluationMode::PrivateSequential)?,
        robust_public: evaluate(config, policy, EvaluationMode::Public)?,
        bce: BaselineEvaluation { policy: bp, realized },
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub record: ComparisonRecord,
    pub robust_invites_all: bool,
}

/// Comparison at every sweep cost, computed in parallel and returned in
/// cost order.
pub fn sweep(config: &ScenarioConfig) -> Result<Vec<SweepPoint>, CliError> {
    let w = config.welfare()?;
    config
        .sweep_costs()?
        .into_par_iter()
        .map(|cost| {
            let env = config.environment(cost)?;
            let record = compare(&env, &w)?;
            let robust_invites_all = match design(&env, &w) {
                Ok(tp) => tp.invite_probability.iter().all(|&p| p >= 1.0 - 1e-12),
                Err(_) => false,
            };
            Ok(SweepPoint {
                record,
                robust_invites_all,
            })
        })
        .collect()
}

pub fn welfare_curves_csv(points: &[SweepPoint]) -> String {
    let header = ["cost", "robust", "bce_optimistic", "bce_realized"];
    csv_string(
        &header,
        points.iter().map(|p| {
            let r = &p.record;
            [r.cost, r.robust_welfare, r.bce_predicted, r.bce_realized].map(format_g10)
        }),
    )
}

/// Regime boundaries read off a sweep.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SweepSummary {
    pub points: usize,
    /// Largest cost up to which the robust policy invites every state.
    pub robust_invites_all_through: Option<f64>,
    /// Largest cost up to which the three welfare curves coincide.
    pub curves_coincide_through: Option<f64>,
    pub robust_zero_from: Option<f64>,
    pub optimistic_zero_from: Option<f64>,
    pub realized_zero_from: Option<f64>,
    /// First cost from which every curve stays at zero.
    pub all_zero_from: Option<f64>,
}

fn prefix_through(points: &[SweepPoint], pred: impl Fn(&SweepPoint) -> bool) -> Option<f64> {
    let k = points.iter().take_while(|p| pred(p)).count();
    (k > 0).then(|| points[k - 1].record.cost)
}

fn suffix_from(points: &[SweepPoint], pred: impl Fn(&SweepPoint) -> bool) -> Option<f64> {
    let k = points.iter().rev().take_while(|p| pred(p)).count();
    (k > 0).then(|| points[points.len() - k].record.cost)
}

pub fn summarize(points: &[SweepPoint]) -> SweepSummary {
    const EPS: f64 = 1e-9;
    let zero = |x: f64| x.abs() <= 1e-12;
    SweepSummary {
        points: points.len(),
        robust_invites_all_through: prefix_through(points, |p| p.robust_invites_all),
        curves_coincide_through: prefix_through(points, |p| {
            let r = &p.record;
            (r.robust_welfare - r.bce_predicted).abs() <= EPS && (r.robust_welfare - r.bce_realized).abs() <= EPS
        }),
        robust_zero_from: suffix_from(points, |p| zero(p.record.robust_welfare)),
        optimistic_zero_from: suffix_from(points, |p| zero(p.record.bce_predicted)),
        realized_zero_from: suffix_from(points, |p| zero(p.record.bce_realized)),
        all_zero_from: suffix_from(points, |p| {
            zero(p.record.robust_welfare) && zero(p.record.bce_predicted) && zero(p.record.bce_realized)
        }),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub schema: u32,
    pub name: String,
    pub modes: Vec<String>,
    pub artifacts: Vec<String>,
    pub notes: Vec<String>,
    /// Only field that differs between identical runs.
    pub generated_unix: u64,
}

/// Everything `run` produced, by file name.
#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub files: BTreeMap<String, String>,
    pub notes: Vec<String>,
}

/// Computes every enabled analysis. Nothing touches the filesystem.
pub fn run_in_memory(config: &ScenarioConfig, opts: &RunOptions) -> Result<RunReport, CliError> {
    check_strict(config, opts)?;
    let mut report = RunReport::default();
    let needs_policy = config.has(Mode::Design) || config.has(Mode::Check) || config.has(Mode::PublicCounterfactual);
    let outcome = if needs_policy {
        Some(design_outcome(config, opts)?)
    } else {
        None
    };

    if config.has(Mode::Design) {
        let d = outcome.as_ref().expect("design computed");
        report.files.insert("design.json".into(), d.to_json());
        let policy_json = to_json(&d.policy);
        // round-trip integrity: the emitted document must reload to the
        // same policy and still pass the checks
        let reloaded = SequentialPolicy::from_json(&policy_json)?;
        if reloaded != d.policy || !obedience(config, &reloaded, opts)?.pass {
            return Err(CliError::Verification("policy.json does not round-trip to an obedient policy".into()));
        }
        report.files.insert("policy.json".into(), policy_json);
        report.files.insert("figdata_scores.csv".into(), d.scores_csv());
        if let Some(msg) = &d.infeasible {
            report.notes.push(format!("design: {msg}"));
        }
    }
    if config.has(Mode::Check) {
        let d = outcome.as_ref().expect("design computed");
        report
            .files
            .insert("obedience.json".into(), to_json(&obedience(config, &d.policy, opts)?));
    }
    if config.has(Mode::Lp) {
        match lp_outcome(config, opts) {
            Ok((artifact, model)) => {
                report.files.insert("lp.json".into(), to_json(&artifact));
                report.files.insert("lp_model.lp".into(), model);
            }
            Err(CliError::Capacity(msg)) => report.notes.push(format!("lp skipped: {msg}")),
            Err(e) => return Err(e),
        }
    }
    if config.has(Mode::Baselines) {
        report
            .files
            .insert("comparison.csv".into(), comparison_csv([&comparison(config)?]));
    }
    if config.has(Mode::PublicCounterfactual) {
        let d = outcome.as_ref().expect("design computed");
        report
            .files
            .insert("evaluation.json".into(), to_json(&evaluation_artifact(config, &d.policy)?));
    }
    if config.has(Mode::Sweep) {
        if config.sweep.is_some() {
            let points = sweep(config)?;
            report.files.insert(
                "sweep.csv".into(),
                comparison_csv(points.iter().map(|p| &p.record)),
            );
            report.files.insert("figdata_welfare.csv".into(), welfare_curves_csv(&points));
            report.files.insert("sweep_summary.json".into(), to_json(&summarize(&points)));
        } else {
            report.notes.push("sweep skipped: scenario has no sweep".into());
        }
    }
    Ok(report)
}

pub fn manifest(config: &ScenarioConfig, report: &RunReport) -> Manifest {
    Manifest {
        schema: crate::scenario::SCHEMA_VERSION,
        name: config.name.clone(),
        modes: config.modes.iter().map(Mode::to_string).collect(),
        artifacts: report.files.keys().cloned().collect(),
        notes: report.notes.clone(),
        generated_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
    }
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

/// Runs every enabled analysis and writes its artifacts plus
/// `manifest.json` into `out_dir`.
pub fn run(config: &ScenarioConfig, out_dir: &Path, opts: &RunOptions) -> Result<RunReport, CliError> {
    let report = run_in_memory(config, opts)?;
    for (name, contents) in &report.files {
        write_file(out_dir, name, contents)?;
    }
    write_file(out_dir, "manifest.json", &to_json(&manifest(config, &report)))?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(cost: f64, robust: f64, predicted: f64, realized: f64, all: bool) -> SweepPoint {
        SweepPoint {
            record: ComparisonRecord {
                cost,
                robust_welfare: robust,
                bce_predicted: predicted,
                bce_realized: realized,
                theta_star: None,
                p_star: None,
                bce_threshold: None,
                optimism_gap: predicted - robust,
                robustness_gain: robust - realized,
            },
            robust_invites_all: all,
        }
    }

    #[test]
    fn summary_reads_prefixes_and_suffixes() {
        let points = [
            point(1.0, 5.0, 5.0, 5.0, true),
            point(1.5, 4.0, 5.0, 0.0, false),
            point(2.0, 0.0, 2.0, 0.0, false),
            point(2.5, 0.0, 0.0, 0.0, false),
        ];
        let s = summarize(&points);
        assert_eq!(s.robust_invites_all_through, Some(1.0));
        assert_eq!(s.curves_coincide_through, Some(1.0));
        assert_eq!(s.robust_zero_from, Some(2.0));
        assert_eq!(s.realized_zero_from, Some(1.5));
        assert_eq!(s.optimistic_zero_from, Some(2.5));
        assert_eq!(s.all_zero_from, Some(2.5));
    }

    #[test]
    fn summary_of_never_zero_sweep() {
        let s = summarize(&[point(1.0, 1.0, 1.0, 0.5, false)]);
        assert_eq!(s.robust_invites_all_through, None);
        assert_eq!(s.curves_coincide_through, None);
        assert_eq!(s.robust_zero_from, None);
        assert_eq!(s.realized_zero_from, None);
    }

    #[test]
    fn csv_uses_lf_and_g10() {
        let text = welfare_curves_csv(&[point(1.0, 1.0 / 3.0, 2.0, 0.0, true)]);
        assert_eq!(text, "cost,robust,bce_optimistic,bce_realized\n1,0.3333333333,2,0\n");
    }

    #[test]
    fn infeasible_design_document() {
        let d = DesignOutcome {
            threshold: None,
            policy: SequentialPolicy::new(vec!["K".into()]),
            infeasible: Some("no state".into()),
        };
        let doc: serde_json::Value = serde_json::from_str(&d.to_json()).unwrap();
        assert_eq!(doc["status"], "INFEASIBLE");
        assert_eq!(d.scores_csv(), "rank,state,label,score,invite_probability\n");
    }
}
