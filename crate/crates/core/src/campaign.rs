//! The campaign loop: generate a source program, derive a follow-up through
//! a chain of transformations, execute both, check the expected output
//! relation, and keep the pairs that violate it.
//!
//! Iteration `i` draws all of its randomness from its own seed (see
//! [`iteration_seed`]), so every pair can be regenerated on its own and
//! removing one iteration never changes another. Reports written with a pair-count budget are byte-reproducible;
//! wall-clock measurements go to a separate `timing.json`.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{mpsc, Arc, OnceLock};
use std::time::{Duration, Instant};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{bind, ExecutionOutcome, Phase, Platform, Simulator};
use crate::circuit::Program;
use crate::compare::{check_relation, FollowUpOutcome, Verdict, VerdictKind, DEFAULT_THRESHOLD};
use crate::defects::DefectSet;
use crate::generator::{generate_program, rng_from_seed, GenConfig, GenConfigError};
use crate::qasm;
use crate::transforms::{chain_transforms, FollowUp, TransformChainPolicy, TransformContext, TransformId, TransformRecord};

/// Report schema identifier written into every JSON file.
pub const SCHEMA: &str = "morphq-report/1";

/// When to stop generating pairs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    /// Wall-clock seconds.
    Seconds(f64),
    /// A fixed number of pairs (reproducible).
    Pairs(u64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub budget: Budget,
    /// Generator settings; `gen.seed` is the campaign seed.
    pub gen: GenConfig,
    pub chain: TransformChainPolicy,
    pub threshold: f64,
    pub workers: usize,
    /// Planted defects of the platform under test (empty = correct).
    #[serde(default)]
    pub defects: DefectSet,
    /// Where to write the report, if anywhere.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            budget: Budget::Pairs(100),
            gen: GenConfig::default(),
            chain: TransformChainPolicy::default(),
            threshold: DEFAULT_THRESHOLD,
            workers: 1,
            defects: DefectSet::none(),
            out_dir: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("invalid generator configuration: {0}")]
    Gen(#[from] GenConfigError),
    #[error("budget must be positive")]
    Budget,
    #[error("workers must be at least 1")]
    Workers,
    #[error("threshold must lie in (0, 1)")]
    Threshold,
    #[error("max_transforms must be at least 1")]
    Chain,
    #[error("backend '{0}' is not registered")]
    UnknownBackend(String),
    #[error("cannot write report: {0}")]
    Io(#[from] io::Error),
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<(), CampaignError> {
        self.gen.validate()?;
        match self.budget {
            Budget::Seconds(s) if s.is_nan() || s <= 0.0 => return Err(CampaignError::Budget),
            Budget::Pairs(0) => return Err(CampaignError::Budget),
            _ => {}
        }
        if self.workers == 0 {
            return Err(CampaignError::Workers);
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(CampaignError::Threshold);
        }
        if self.chain.max_transforms == 0 {
            return Err(CampaignError::Chain);
        }
        let known = Platform::standard().backend_ids();
        if let Some(bad) = self.gen.backend_choices.iter().find(|b| !known.contains(b)) {
            return Err(CampaignError::UnknownBackend(bad.clone()));
        }
        Ok(())
    }

    /// The platform under test: the standard simulators the generator may
    /// choose from, with the configured defects.
    pub fn platform(&self) -> Platform {
        platform_for(&self.gen.backend_choices, &self.defects)
    }
}

fn platform_for(backends: &[String], defects: &DefectSet) -> Platform {
    let sims: Vec<Arc<dyn Simulator>> = vec![
        Arc::new(crate::backend::DenseSimulator::default()),
        Arc::new(crate::backend::UnitarySimulator::default()),
    ];
    let chosen = sims.into_iter().filter(|s| backends.iter().any(|b| b == s.id())).collect();
    Platform::with_backends(chosen, defects.clone())
}

/// Wall-clock time spent in each phase of one iteration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimes {
    pub generation: f64,
    pub transformation: f64,
    pub execution: f64,
}

impl PhaseTimes {
    fn add(&mut self, o: &PhaseTimes) {
        self.generation += o.generation;
        self.transformation += o.transformation;
        self.execution += o.execution;
    }
}

/// Everything one iteration produced.
#[derive(Clone, Debug, PartialEq)]
pub struct PairResult {
    pub iteration: u64,
    pub seed: u64,
    pub source: Program,
    pub follow_up: FollowUp,
    pub transforms: Vec<TransformRecord>,
    pub source_outcome: ExecutionOutcome,
    pub followup_outcome: FollowUpOutcome,
    pub verdict: Verdict,
    pub times: PhaseTimes,
}

impl PairResult {
    pub fn pair_id(&self) -> String {
        pair_id(self.iteration)
    }
}

pub fn pair_id(iteration: u64) -> String {
    format!("pair-{iteration:06}")
}

fn secs(since: Instant) -> f64 {
    since.elapsed().as_secs_f64()
}

/// Executes the follow-up side.
pub fn execute_follow_up(platform: &Platform, follow: &FollowUp) -> FollowUpOutcome {
    match follow {
        FollowUp::Single { program } => FollowUpOutcome::Single { outcome: platform.execute(program) },
        FollowUp::Partitioned { a, b } => FollowUpOutcome::Partitioned { a: platform.execute(a), b: platform.execute(b) },
    }
}

/// Generates the source and follow-up programs of iteration `seed`.
pub fn derive_pair(
    gen: &GenConfig,
    chain: &TransformChainPolicy,
    ctx: &TransformContext,
    seed: u64,
) -> (Program, FollowUp, Vec<TransformRecord>) {
    let mut rng = rng_from_seed(seed);
    let source = generate_program(gen, &mut rng);
    let (follow, records) = chain_transforms(&source, chain, &mut rng, ctx);
    (source, follow, records)
}

/// Seed of iteration `i`: the scrambled campaign seed XOR `i`.
///
/// Scrambling (one SplitMix64 step) keeps campaigns with nearby seeds from
/// testing the same pairs: with a plain `seed ^ i`, seeds 2 and 3 would
/// share every iteration seed below 2^k up to order.
pub fn iteration_seed(campaign_seed: u64, iteration: u64) -> u64 {
    let mut z = campaign_seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    (z ^ (z >> 31)) ^ iteration
}

/// Runs one iteration of the campaign loop.
pub fn run_pair(cfg: &CampaignConfig, platform: &Platform, iteration: u64) -> PairResult {
    let seed = iteration_seed(cfg.gen.seed, iteration);
    let ctx = TransformContext::new(platform.backend_ids());
    let mut rng = rng_from_seed(seed);
    let t = Instant::now();
    let source = generate_program(&cfg.gen, &mut rng);
    let generation = secs(t);
    let t = Instant::now();
    let (follow_up, transforms) = chain_transforms(&source, &cfg.chain, &mut rng, &ctx);
    let transformation = secs(t);
    let t = Instant::now();
    let source_outcome = platform.execute(&source);
    let followup_outcome = execute_follow_up(platform, &follow_up);
    let execution = secs(t);
    let verdict = check_relation(&transforms, &source_outcome, &followup_outcome, cfg.threshold);
    PairResult {
        iteration,
        seed,
        source,
        follow_up,
        transforms,
        source_outcome,
        followup_outcome,
        verdict,
        times: PhaseTimes { generation, transformation, execution },
    }
}

/// Replaces program-specific references (paths and file names, quoted
/// identifiers, numbers) with placeholders so that messages of one failure
/// class compare equal.
pub fn abstract_message(raw: &str) -> String {
    MessageAbstractor::standard().apply(raw)
}

/// An ordered list of `(pattern, placeholder)` rewrite rules.
#[derive(Clone, Debug)]
pub struct MessageAbstractor {
    rules: Vec<(Regex, String)>,
}

impl MessageAbstractor {
    pub fn new(rules: &[(&str, &str)]) -> Result<Self, regex::Error> {
        let rules = rules.iter().map(|(p, r)| Ok((Regex::new(p)?, r.to_string()))).collect::<Result<_, _>>()?;
        Ok(MessageAbstractor { rules })
    }

    /// Paths → ⟨PATH⟩, quoted identifiers → ⟨ID⟩, integers → ⟨N⟩.
    pub fn standard() -> &'static MessageAbstractor {
        static STANDARD: OnceLock<MessageAbstractor> = OnceLock::new();
        STANDARD.get_or_init(|| {
            MessageAbstractor::new(&[
                (r"(?:[A-Za-z]:)?(?:[\w.-]*/)+[\w.-]+|\bfile[\w.-]*|\b[\w-]+\.(?:qasm|inc|py|rs|json|txt)\b", "⟨PATH⟩"),
                (r#"'[^']*'|"[^"]*"|`[^`]*`"#, "⟨ID⟩"),
                (r"\d+", "⟨N⟩"),
            ])
            .expect("built-in patterns compile")
        })
    }

    pub fn apply(&self, raw: &str) -> String {
        self.rules.iter().fold(raw.to_string(), |s, (re, rep)| re.replace_all(&s, rep.as_str()).into_owned())
    }
}

/// Crash-difference warnings sharing one abstracted message.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrashCluster {
    pub abstracted_message: String,
    pub phases: Vec<Phase>,
    pub members: Vec<String>,
    /// Shortest transformation chain among the members.
    pub min_chain_length: usize,
}

/// A pair whose outputs violate the expected relation, with everything
/// needed to reproduce it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WarningRecord {
    pub schema: String,
    pub pair_id: String,
    pub iteration: u64,
    /// Seed of the iteration, see [`iteration_seed`].
    pub seed: u64,
    pub gen: GenConfig,
    pub chain_policy: TransformChainPolicy,
    pub threshold: f64,
    pub defects: DefectSet,
    pub backends: Vec<String>,
    pub source: Program,
    pub follow_up: FollowUp,
    pub transforms: Vec<TransformRecord>,
    pub source_outcome: ExecutionOutcome,
    pub followup_outcome: FollowUpOutcome,
    pub verdict: Verdict,
}

impl WarningRecord {
    pub fn crash_message(&self) -> Option<(Phase, &str)> {
        match &self.verdict.kind {
            VerdictKind::CrashDifference { phase, message, .. } => Some((*phase, message.as_str())),
            _ => None,
        }
    }
}

/// Groups crash-difference warnings by abstracted message, largest first.
pub fn cluster_warnings(warnings: &[WarningRecord]) -> Vec<CrashCluster> {
    let mut by_message: BTreeMap<String, CrashCluster> = BTreeMap::new();
    for w in warnings {
        let Some((phase, message)) = w.crash_message() else { continue };
        let key = abstract_message(message);
        let cluster = by_message.entry(key.clone()).or_insert_with(|| CrashCluster {
            abstracted_message: key,
            phases: Vec::new(),
            members: Vec::new(),
            min_chain_length: usize::MAX,
        });
        if !cluster.phases.contains(&phase) {
            cluster.phases.push(phase);
            cluster.phases.sort();
        }
        cluster.members.push(w.pair_id.clone());
        cluster.min_chain_length = cluster.min_chain_length.min(w.transforms.len());
    }
    let mut clusters: Vec<CrashCluster> = by_message.into_values().collect();
    clusters.sort_by(|a, b| b.members.len().cmp(&a.members.len()).then_with(|| a.abstracted_message.cmp(&b.abstracted_message)));
    clusters
}

/// Involvement of one transformation kind in the campaign.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformStats {
    pub applied: u64,
    pub in_pairs: u64,
    pub in_crash_differences: u64,
    pub in_distribution_differences: u64,
}

/// Deterministic campaign summary (counts only).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema: String,
    pub seed: u64,
    pub tested_pairs: u64,
    pub source_crashes: u64,
    pub followup_crashes: u64,
    pub successes: u64,
    pub distribution_differences: u64,
    pub warnings: u64,
    pub crash_clusters: u64,
    pub source_crash_pct: f64,
    pub followup_crash_pct: f64,
    pub success_pct: f64,
    pub distribution_difference_pct: f64,
    pub chain_lengths: BTreeMap<usize, u64>,
    pub transforms: BTreeMap<String, TransformStats>,
    pub defects: DefectSet,
    pub threshold: f64,
}

/// Wall-clock breakdown (not reproducible, kept out of the summary).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub schema: String,
    pub wall_seconds: f64,
    pub totals: PhaseTimes,
    pub mean_ms_per_pair: PhaseTimes,
    /// (generation + transformation) / execution.
    pub gen_transform_to_execution_ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CampaignReport {
    pub summary: Summary,
    pub timing: Timing,
    pub warnings: Vec<WarningRecord>,
    pub clusters: Vec<CrashCluster>,
}

fn pct(part: u64, whole: u64) -> f64 {
    if whole == 0 {
        0.0
    } else {
        100.0 * part as f64 / whole as f64
    }
}

fn to_warning(cfg: &CampaignConfig, backends: &[String], r: PairResult) -> WarningRecord {
    WarningRecord {
        schema: SCHEMA.into(),
        pair_id: r.pair_id(),
        iteration: r.iteration,
        seed: r.seed,
        gen: cfg.gen.clone(),
        chain_policy: cfg.chain,
        threshold: cfg.threshold,
        defects: cfg.defects.clone(),
        backends: backends.to_vec(),
        source: r.source,
        follow_up: r.follow_up,
        transforms: r.transforms,
        source_outcome: r.source_outcome,
        followup_outcome: r.followup_outcome,
        verdict: r.verdict,
    }
}

/// Runs the campaign loop until the budget is spent, then writes the report
/// if `cfg.out_dir` is set.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignReport, CampaignError> {
    run_campaign_with(cfg, |_| {})
}

/// [`run_campaign`] with a callback invoked (in iteration order) for every
/// pair, e.g. for progress output.
pub fn run_campaign_with(
    cfg: &CampaignConfig,
    mut on_pair: impl FnMut(&PairResult),
) -> Result<CampaignReport, CampaignError> {
    cfg.validate()?;
    let platform = cfg.platform();
    let start = Instant::now();
    let deadline = match cfg.budget {
        Budget::Seconds(s) => Some(start + Duration::from_secs_f64(s)),
        Budget::Pairs(_) => None,
    };
    let limit = match cfg.budget {
        Budget::Pairs(n) => n,
        Budget::Seconds(_) => u64::MAX,
    };
    let next = AtomicU64::new(0);
    let (tx, rx) = mpsc::channel::<PairResult>();
    let mut results: Vec<PairResult> = Vec::new();
    std::thread::scope(|scope| {
        for _ in 0..cfg.workers {
            let tx = tx.clone();
            let (next, platform) = (&next, &platform);
            scope.spawn(move || loop {
                if deadline.is_some_and(|d| Instant::now() >= d) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= limit {
                    break;
                }
                if tx.send(run_pair(cfg, platform, i)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        results.extend(rx);
    });
    results.sort_by_key(|r| r.iteration);
    let wall = secs(start);
    results.iter().for_each(&mut on_pair);
    let report = build_report(cfg, &platform, results, wall);
    if let Some(dir) = &cfg.out_dir {
        write_report(&report, dir)?;
    }
    Ok(report)
}

fn build_report(cfg: &CampaignConfig, platform: &Platform, results: Vec<PairResult>, wall: f64) -> CampaignReport {
    let backends = platform.backend_ids();
    let tested = results.len() as u64;
    let mut source_crashes = 0;
    let mut followup_crashes = 0;
    let mut successes = 0;
    let mut dist_diffs = 0;
    let mut chain_lengths: BTreeMap<usize, u64> = BTreeMap::new();
    let mut transforms: BTreeMap<String, TransformStats> =
        TransformId::ALL.iter().map(|t| (t.title().to_string(), TransformStats::default())).collect();
    let mut totals = PhaseTimes::default();
    let mut warnings = Vec::new();
    for r in results {
        totals.add(&r.times);
        *chain_lengths.entry(r.transforms.len()).or_insert(0) += 1;
        let source_crashed = r.source_outcome.is_crash();
        let follow_crashed = r.followup_outcome.crash().is_some();
        if source_crashed {
            source_crashes += 1;
        } else if follow_crashed {
            followup_crashes += 1;
        } else {
            successes += 1;
        }
        let is_dist = matches!(r.verdict.kind, VerdictKind::DistributionDifference { .. });
        let is_crash = matches!(r.verdict.kind, VerdictKind::CrashDifference { .. });
        dist_diffs += u64::from(is_dist);
        let mut seen = std::collections::BTreeSet::new();
        for t in &r.transforms {
            let stats = transforms.get_mut(&t.name).expect("all kinds listed");
            stats.applied += 1;
            if seen.insert(t.name.clone()) {
                stats.in_pairs += 1;
                stats.in_crash_differences += u64::from(is_crash);
                stats.in_distribution_differences += u64::from(is_dist);
            }
        }
        if r.verdict.is_warning() {
            warnings.push(to_warning(cfg, &backends, r));
        }
    }
    let clusters = cluster_warnings(&warnings);
    let n = tested.max(1) as f64;
    let summary = Summary {
        schema: SCHEMA.into(),
        seed: cfg.gen.seed,
        tested_pairs: tested,
        source_crashes,
        followup_crashes,
        successes,
        distribution_differences: dist_diffs,
        warnings: warnings.len() as u64,
        crash_clusters: clusters.len() as u64,
        source_crash_pct: pct(source_crashes, tested),
        followup_crash_pct: pct(followup_crashes, tested),
        success_pct: pct(successes, tested),
        distribution_difference_pct: pct(dist_diffs, tested),
        chain_lengths,
        transforms,
        defects: cfg.defects.clone(),
        threshold: cfg.threshold,
    };
    let mean = PhaseTimes {
        generation: 1e3 * totals.generation / n,
        transformation: 1e3 * totals.transformation / n,
        execution: 1e3 * totals.execution / n,
    };
    let ratio = if totals.execution > 0.0 { (totals.generation + totals.transformation) / totals.execution } else { 0.0 };
    let timing = Timing {
        schema: SCHEMA.into(),
        wall_seconds: wall,
        totals,
        mean_ms_per_pair: mean,
        gen_transform_to_execution_ratio: ratio,
    };
    CampaignReport { summary, timing, warnings, clusters }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

/// OpenQASM text of a program's bound circuit, or a comment explaining why
/// it cannot be exported.
fn qasm_dump(p: &Program) -> String {
    match qasm::emit(&bind(&p.circuit, &p.bindings)) {
        Ok(text) => text,
        Err(e) => format!("// {e}\n"),
    }
}

/// Writes `summary.json`, `timing.json`, `clusters.json` and, per warning,
/// `warnings/<pair_id>.json` plus QASM dumps of both sides.
pub fn write_report(report: &CampaignReport, out_dir: &Path) -> io::Result<()> {
    let warn_dir = out_dir.join("warnings");
    fs::create_dir_all(&warn_dir)?;
    fs::write(out_dir.join("summary.json"), to_json(&report.summary))?;
    fs::write(out_dir.join("timing.json"), to_json(&report.timing))?;
    fs::write(out_dir.join("clusters.json"), to_json(&report.clusters))?;
    for w in &report.warnings {
        fs::write(warn_dir.join(format!("{}.json", w.pair_id)), to_json(w))?;
        fs::write(warn_dir.join(format!("{}.source.qasm", w.pair_id)), qasm_dump(&w.source))?;
        match &w.follow_up {
            FollowUp::Single { program } => {
                fs::write(warn_dir.join(format!("{}.followup.qasm", w.pair_id)), qasm_dump(program))?;
            }
            FollowUp::Partitioned { a, b } => {
                fs::write(warn_dir.join(format!("{}.followup_a.qasm", w.pair_id)), qasm_dump(a))?;
                fs::write(warn_dir.join(format!("{}.followup_b.qasm", w.pair_id)), qasm_dump(b))?;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("not a {SCHEMA} warning record: {0}")]
    SchemaMismatch(String),
    #[error("cannot read warning file: {0}")]
    Io(#[from] io::Error),
}

/// Reads and checks a warning file.
pub fn load_warning(path: &Path) -> Result<WarningRecord, ReplayError> {
    let text = fs::read_to_string(path)?;
    let record: WarningRecord = serde_json::from_str(&text).map_err(|e| ReplayError::SchemaMismatch(e.to_string()))?;
    if record.schema != SCHEMA {
        return Err(ReplayError::SchemaMismatch(format!("schema '{}'", record.schema)));
    }
    Ok(record)
}

/// Result of re-running a recorded pair.
#[derive(Clone, Debug, PartialEq)]
pub struct Replay {
    pub verdict: Verdict,
    /// The recorded programs regenerate bit-exactly from the embedded seed.
    pub programs_regenerated: bool,
    pub matches_recorded: bool,
}

/// Regenerates the pair from its seed, re-executes it on a platform with
/// the recorded backends and defects, and re-checks the relation.
pub fn replay(w: &WarningRecord) -> Replay {
    let platform = platform_for(&w.backends, &w.defects);
    let ctx = TransformContext::new(platform.backend_ids());
    let (source, follow, transforms) = derive_pair(&w.gen, &w.chain_policy, &ctx, w.seed);
    let programs_regenerated = source == w.source && follow == w.follow_up && transforms == w.transforms;
    let source_outcome = platform.execute(&w.source);
    let followup_outcome = execute_follow_up(&platform, &w.follow_up);
    let verdict = check_relation(&w.transforms, &source_outcome, &followup_outcome, w.threshold);
    let matches_recorded = verdict == w.verdict;
    Replay { verdict, programs_regenerated, matches_recorded }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn abstraction_examples() {
        let a = abstract_message("Duplicate declaration for gate 'ryy', line 4, fileA");
        let b = abstract_message("Duplicate declaration for gate 'ryy', line 5, fileB");
        assert_eq!(a, b);
        assert_eq!(a, "Duplicate declaration for gate ⟨ID⟩, line ⟨N⟩, ⟨PATH⟩");
        assert_eq!(abstract_message("nothing specific here"), "nothing specific here");
        assert_eq!(abstract_message("see /tmp/x/out.qasm:12"), "see ⟨PATH⟩:⟨N⟩");
    }

    #[test]
    fn iteration_seeds_differ_across_nearby_campaigns() {
        let a: std::collections::BTreeSet<u64> = (0..1000).map(|i| iteration_seed(2, i)).collect();
        let b: std::collections::BTreeSet<u64> = (0..1000).map(|i| iteration_seed(3, i)).collect();
        assert_eq!(a.len(), 1000);
        assert!(a.is_disjoint(&b));
        assert_eq!(iteration_seed(2, 5) ^ iteration_seed(2, 0), 5);
    }

    #[test]
    fn clusters_group_by_abstraction() {
        let cfg = CampaignConfig::default();
        let p = crate::generator::generate_program(&cfg.gen, &mut rng_from_seed(1));
        let make = |i: u64, msg: &str| WarningRecord {
            schema: SCHEMA.into(),
            pair_id: pair_id(i),
            iteration: i,
            seed: i,
            gen: cfg.gen.clone(),
            chain_policy: cfg.chain,
            threshold: 0.05,
            defects: DefectSet::none(),
            backends: vec![],
            source: p.clone(),
            follow_up: FollowUp::Single { program: p.clone() },
            transforms: vec![],
            source_outcome: ExecutionOutcome::Crash { phase: Phase::Qasm, message: msg.into() },
            followup_outcome: FollowUpOutcome::Single {
                outcome: ExecutionOutcome::Crash { phase: Phase::Qasm, message: msg.into() },
            },
            verdict: Verdict {
                kind: VerdictKind::CrashDifference {
                    side: crate::compare::Side::Followup,
                    phase: Phase::Qasm,
                    message: msg.into(),
                },
                relation_used: crate::transforms::OutputRelation::Equivalence,
            },
        };
        let ws = vec![make(0, "line 3: bad 'a'"), make(1, "line 9: bad 'b'"), make(2, "other")];
        let clusters = cluster_warnings(&ws);
        assert_eq!(clusters.len(), 2);
        assert_eq!(clusters[0].members, ["pair-000000", "pair-000001"]);
        assert_eq!(clusters.iter().map(|c| c.members.len()).sum::<usize>(), 3);
        assert!(cluster_warnings(&[]).is_empty());
    }

    #[test]
    fn small_campaign_is_clean_and_deterministic() {
        let cfg = CampaignConfig {
            budget: Budget::Pairs(40),
            gen: GenConfig { max_qubits: 5, seed: 3, ..GenConfig::default() },
            ..CampaignConfig::default()
        };
        let a = run_campaign(&cfg).unwrap();
        assert_eq!(a.summary.tested_pairs, 40);
        assert_eq!(a.summary.source_crashes, 0);
        assert_eq!(a.summary.followup_crashes, 0, "{:?}", a.warnings.first().map(|w| &w.verdict));
        assert_eq!(a.summary.tested_pairs, a.summary.source_crashes + a.summary.followup_crashes + a.summary.successes);
        let b = run_campaign(&CampaignConfig { workers: 3, ..cfg }).unwrap();
        assert_eq!(a.summary, b.summary);
        assert_eq!(a.warnings, b.warnings);
    }
}
