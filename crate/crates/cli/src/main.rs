//! `qmorph`: run metamorphic testing campaigns against the bundled quantum
//! toolchain, replay recorded warnings, and inspect generated programs.
//!
//! Exit codes: 0 = clean, 1 = findings, 2 = usage or input error.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use qmorph::backend::{measurement_probabilities, DenseSimulator, Simulator};
use qmorph::campaign::{
    abstract_message, load_warning, replay, run_campaign, run_pair, Budget, CampaignConfig, CampaignReport,
};
use qmorph::circuit::Circuit;
use qmorph::compare::{Verdict, VerdictKind};
use qmorph::generator::{generate_program, rng_from_seed, GenConfig};
use qmorph::qasm;
use qmorph::transforms::TransformChainPolicy;

const CLEAN: u8 = 0;
const FINDINGS: u8 = 1;
const USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "qmorph", version, about = "Metamorphic testing for quantum circuit toolchains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate and check program pairs until the budget is spent.
    #[command(group(ArgGroup::new("budget_kind").required(true).args(["budget", "pairs"])))]
    Campaign {
        /// Wall-clock budget in seconds.
        #[arg(long)]
        budget: Option<f64>,
        /// Number of pairs to test (reproducible).
        #[arg(long)]
        pairs: Option<u64>,
        #[command(flatten)]
        gen: GenArgs,
        #[command(flatten)]
        check: CheckArgs,
        /// Number of worker threads.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Report directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run a recorded warning and compare the verdict.
    Replay {
        /// A `warnings/<pair>.json` file from a campaign report.
        warning_file: PathBuf,
    },
    /// Print a generated source program.
    Gen {
        #[command(flatten)]
        gen: GenArgs,
        /// Output format.
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Parse, export and re-parse an OpenQASM 2.0 file.
    QasmRoundtrip {
        file: PathBuf,
    },
    /// Run a single iteration of the campaign loop and print its verdict.
    PairCheck {
        #[command(flatten)]
        gen: GenArgs,
        #[command(flatten)]
        check: CheckArgs,
        /// Iteration index within the campaign of `--seed`.
        #[arg(long, default_value_t = 0)]
        iteration: u64,
    },
}

#[derive(Args)]
struct GenArgs {
    /// Campaign seed.
    #[arg(long, env = "MORPHQ_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = GenConfig::default().max_qubits)]
    max_qubits: usize,
    #[arg(long, default_value_t = GenConfig::default().max_gates)]
    max_gates: usize,
}

impl GenArgs {
    fn config(&self) -> GenConfig {
        GenConfig { seed: self.seed, max_qubits: self.max_qubits, max_gates: self.max_gates, ..GenConfig::default() }
    }
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long, default_value_t = TransformChainPolicy::default().max_transforms)]
    max_transforms: usize,
    /// p-value below which distributions count as different.
    #[arg(long, default_value_t = qmorph::compare::DEFAULT_THRESHOLD)]
    threshold: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Qasm,
}

fn fail(message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(USAGE)
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Campaign { budget, pairs, gen, check, workers, out } => {
            let budget = match (budget, pairs) {
                (Some(s), None) => Budget::Seconds(s),
                (None, Some(n)) => Budget::Pairs(n),
                _ => unreachable!("clap enforces exactly one budget"),
            };
            let cfg = CampaignConfig {
                budget,
                gen: gen.config(),
                chain: TransformChainPolicy { max_transforms: check.max_transforms, ..TransformChainPolicy::default() },
                threshold: check.threshold,
                workers,
                out_dir: Some(out.clone()),
                ..CampaignConfig::default()
            };
            match run_campaign(&cfg) {
                Ok(report) => {
                    print_campaign(&report, &out);
                    ExitCode::from(if report.warnings.is_empty() { CLEAN } else { FINDINGS })
                }
                Err(e) => fail(e),
            }
        }
        Command::Replay { warning_file } => {
            let record = match load_warning(&warning_file) {
                Ok(r) => r,
                Err(e) => return fail(e),
            };
            let result = replay(&record);
            println!("pair:     {}", record.pair_id);
            println!("recorded: {}", describe(&record.verdict));
            println!("replayed: {}", describe(&result.verdict));
            if !result.programs_regenerated {
                println!("note: recorded programs differ from what the embedded seed regenerates");
            }
            ExitCode::from(if result.matches_recorded { CLEAN } else { FINDINGS })
        }
        Command::Gen { gen, format } => {
            let cfg = gen.config();
            if let Err(e) = cfg.validate() {
                return fail(e);
            }
            let program = generate_program(&cfg, &mut rng_from_seed(cfg.seed));
            match format {
                Format::Json => println!("{}", program.to_canonical_json()),
                Format::Qasm => match qasm::emit(&program.circuit) {
                    Ok(text) => print!("{text}"),
                    Err(e) => return fail(e),
                },
            }
            ExitCode::from(CLEAN)
        }
        Command::QasmRoundtrip { file } => qasm_roundtrip(&file),
        Command::PairCheck { gen, check, iteration } => {
            let cfg = CampaignConfig {
                budget: Budget::Pairs(1),
                gen: gen.config(),
                chain: TransformChainPolicy { max_transforms: check.max_transforms, ..TransformChainPolicy::default() },
                threshold: check.threshold,
                ..CampaignConfig::default()
            };
            if let Err(e) = cfg.validate() {
                return fail(e);
            }
            let result = run_pair(&cfg, &cfg.platform(), iteration);
            let chain: Vec<&str> = result.transforms.iter().map(|t| t.name.as_str()).collect();
            println!("pair:       {}", result.pair_id());
            println!("seed:       {}", result.seed);
            println!("transforms: {}", chain.join(" -> "));
            println!("verdict:    {}", describe(&result.verdict));
            ExitCode::from(if result.verdict.is_warning() { FINDINGS } else { CLEAN })
        }
    }
}

fn describe(v: &Verdict) -> String {
    match &v.kind {
        VerdictKind::Ok => "ok".into(),
        VerdictKind::CrashDifference { side, phase, message } => {
            format!("crash difference ({side:?} side, {phase} phase): {}", abstract_message(message))
        }
        VerdictKind::DistributionDifference { statistic, p_value } => {
            format!("distribution difference (D = {statistic:.4}, p = {p_value:.3e})")
        }
    }
}

fn print_campaign(report: &CampaignReport, out: &std::path::Path) {
    let s = &report.summary;
    println!("tested pairs:             {}", s.tested_pairs);
    println!("source crashes:           {} ({:.1}%)", s.source_crashes, s.source_crash_pct);
    println!("follow-up crashes:        {} ({:.1}%)", s.followup_crashes, s.followup_crash_pct);
    println!("successes:                {} ({:.1}%)", s.successes, s.success_pct);
    println!("distribution differences: {} ({:.1}%)", s.distribution_differences, s.distribution_difference_pct);
    println!("warnings:                 {}", s.warnings);
    for c in &report.clusters {
        println!("  [{}] {}", c.members.len(), c.abstracted_message);
    }
    let t = &report.timing.mean_ms_per_pair;
    println!(
        "mean ms/pair: generation {:.2}, transformation {:.2}, execution {:.2}",
        t.generation, t.transformation, t.execution
    );
    println!("report written to {}", out.display());
}

fn qasm_roundtrip(file: &std::path::Path) -> ExitCode {
    let text = match fs::read_to_string(file) {
        Ok(t) => t,
        Err(e) => return fail(format!("{}: {e}", file.display())),
    };
    let first = match qasm::parse(&text) {
        Ok(c) => c,
        Err(e) => return fail(format!("{}: {e}", file.display())),
    };
    let emitted = match qasm::emit(&first) {
        Ok(t) => t,
        Err(e) => return fail(e),
    };
    let second = match qasm::parse(&emitted) {
        Ok(c) => c,
        Err(e) => {
            println!("re-import of exported text failed: {e}");
            return ExitCode::from(FINDINGS);
        }
    };
    let fixpoint = qasm::emit(&second).as_deref() == Ok(emitted.as_str());
    println!("qubits: {}, clbits: {}, gates: {}", first.n_qubits, first.n_clbits, first.gate_count());
    println!("export fixpoint: {}", if fixpoint { "yes" } else { "no" });
    let equivalent = match equivalence(&first, &second) {
        Some(diff) => {
            println!("max output probability difference: {diff:.3e}");
            diff < 1e-9
        }
        None => {
            println!("too wide to simulate; semantic check skipped");
            true
        }
    };
    ExitCode::from(if fixpoint && equivalent { CLEAN } else { FINDINGS })
}

/// Largest difference between the two circuits' exact output
/// probabilities (all qubits, if nothing is measured).
fn equivalence(a: &Circuit, b: &Circuit) -> Option<f64> {
    let sim = DenseSimulator::default();
    let probs = |c: &Circuit| {
        let sv = sim.simulate(c).ok()?;
        let flat = c.flattened().ok()?;
        let mut wiring = flat.measurements();
        let mut n_bits = c.n_clbits;
        if wiring.is_empty() {
            wiring = (0..c.n_qubits).map(|q| (q, q)).collect();
            n_bits = c.n_qubits;
        }
        Some(measurement_probabilities(&sv, &wiring, n_bits))
    };
    Some(probs(a)?.max_abs_diff(&probs(b)?))
}
