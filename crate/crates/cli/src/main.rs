use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rc_sentinel::io::fixtures;
use rc_sentinel::io::report::{self, to_json, Timings};
use rc_sentinel::io::{parse_schedule, parse_workload, print_schedule, print_workload};
use rc_sentinel::model::{validate_workload, Granularity, Workload};
use rc_sentinel::schedule::{build_rlc_schedule, robust_oracle, DEFAULT_MAX_OPS};
use rc_sentinel::template_robust::{is_robust_templates, TemplateVerdict};
use rc_sentinel::tools::{
    apply_setting, maximal_robust_subsets, minimal_promotions, promote, promotion_candidates, AnalysisSetting,
    PromotionSet, UpdateMode,
};
use rc_sentinel::tx_robust::{is_robust_transactions, TxVerdict};

/// Robustness analysis of transaction templates against Read Committed.
#[derive(Parser)]
#[command(name = "rc-sentinel", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether a workload is robust; exit 0 robust, 1 not robust.
    Check {
        file: PathBuf,
        #[command(flatten)]
        setting: SettingArgs,
        #[command(flatten)]
        out: OutputArgs,
        /// Write the counterexample schedule to this file.
        #[arg(long, value_name = "OUT")]
        counterexample: Option<PathBuf>,
    },
    /// List the maximal robust subsets of templates.
    Subsets {
        file: PathBuf,
        #[command(flatten)]
        setting: SettingArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Promote reads to updates and print the promoted workload.
    Promote {
        file: PathBuf,
        /// Every minimum-size promotion set that restores robustness (default).
        #[arg(long, conflicts_with = "all")]
        minimal: bool,
        /// Promote every read operation.
        #[arg(long)]
        all: bool,
        #[command(flatten)]
        setting: SettingArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Check a schedule file; exit 0 serializable, 1 not serializable.
    CheckSchedule {
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Enumerate every RC schedule of the transactions in a schedule file.
    Oracle {
        file: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MAX_OPS)]
        max_ops: usize,
        #[arg(long)]
        json: bool,
    },
    /// Print a built-in benchmark workload.
    Bench { name: BenchName },
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchName {
    Smallbank,
    TpccKv,
}

#[derive(Clone, Copy, ValueEnum)]
enum GranularityArg {
    Attribute,
    Tuple,
}

#[derive(Clone, Copy, ValueEnum)]
enum UpdatesArg {
    Atomic,
    Split,
}

#[derive(Args)]
struct SettingArgs {
    #[arg(long, value_enum, default_value = "attribute")]
    granularity: GranularityArg,
    #[arg(long, value_enum, default_value = "atomic")]
    updates: UpdatesArg,
}

impl SettingArgs {
    fn setting(&self) -> AnalysisSetting {
        let g = match self.granularity {
            GranularityArg::Attribute => Granularity::Attribute,
            GranularityArg::Tuple => Granularity::Tuple,
        };
        let u = match self.updates {
            UpdatesArg::Atomic => UpdateMode::Atomic,
            UpdatesArg::Split => UpdateMode::Split,
        };
        AnalysisSetting::new(g, u)
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Print a JSON report instead of text.
    #[arg(long)]
    json: bool,
    /// Include wall-clock timings in the report.
    #[arg(long)]
    timings: bool,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_workload(path: &Path) -> Result<Workload> {
    let text = read(path)?;
    let w = parse_workload(&text).map_err(|e| anyhow!("{}:{e}", path.display()))?;
    if let Err(diags) = validate_workload(&w) {
        let lines: Vec<String> = diags.iter().map(|d| format!("  {d}")).collect();
        bail!("{} is not a valid workload:\n{}", path.display(), lines.join("\n"));
    }
    Ok(w)
}

fn timings(enabled: bool, start: Instant) -> Option<Timings> {
    enabled.then(|| Timings { analysis_ms: start.elapsed().as_secs_f64() * 1000.0 })
}

fn check(file: &Path, setting: AnalysisSetting, out: &OutputArgs, cx_path: Option<&Path>) -> Result<u8> {
    let w = apply_setting(&load_workload(file)?, setting);
    let start = Instant::now();
    let verdict = is_robust_templates(&w)?;
    let mut rep = report::check_report(&w, setting, &verdict);
    rep.timings = timings(out.timings, start);
    if let (Some(path), TemplateVerdict::NotRobust(cx)) = (cx_path, &verdict) {
        fs::write(path, print_schedule(&cx.schedule)).with_context(|| format!("cannot write {}", path.display()))?;
    }
    if out.json {
        print!("{}", to_json(&rep));
    } else {
        match &verdict {
            TemplateVerdict::Robust => println!("robust under {setting}"),
            TemplateVerdict::NotRobust(cx) => {
                println!("not robust under {setting}");
                println!("witness: {}", cx.chain.describe(&w));
                println!("counterexample:");
                print!("{}", print_schedule(&cx.schedule));
                let v = rep.verification.as_ref().expect("not-robust reports are verified");
                println!("rc_allowed: {}", v.rc_allowed);
                println!("serializable: {}", v.serializable);
                if let Some(cycle) = &v.cycle {
                    println!("cycle: {}", cycle.join(" -> "));
                }
            }
        }
        if let Some(t) = &rep.timings {
            println!("analysis: {:.3} ms", t.analysis_ms);
        }
    }
    Ok(if verdict.is_robust() { 0 } else { 1 })
}

fn subsets(file: &Path, setting: AnalysisSetting, out: &OutputArgs) -> Result<u8> {
    let w = load_workload(file)?;
    let start = Instant::now();
    let sets = maximal_robust_subsets(&w, setting)?;
    let mut rep = report::subsets_report(&w, setting, sets);
    rep.timings = timings(out.timings, start);
    if out.json {
        print!("{}", to_json(&rep));
    } else {
        println!("maximal robust subsets under {setting}:");
        for s in &rep.maximal_robust_subsets {
            println!("  {{{}}}", s.join(", "));
        }
        if let Some(t) = &rep.timings {
            println!("analysis: {:.3} ms", t.analysis_ms);
        }
    }
    Ok(0)
}

fn promote_cmd(file: &Path, all: bool, setting: AnalysisSetting, out: &OutputArgs) -> Result<u8> {
    let w = load_workload(file)?;
    let start = Instant::now();
    let sets: Vec<PromotionSet> =
        if all { vec![promotion_candidates(&w).into_iter().collect()] } else { minimal_promotions(&w, setting)? };
    let promoted = sets.iter().map(|s| promote(&w, s)).collect::<Result<Vec<_>, _>>()?;
    let mut rep = report::promote_report(setting, if all { "all" } else { "minimal" }, &sets, &promoted);
    rep.timings = timings(out.timings, start);
    if out.json {
        print!("{}", to_json(&rep));
    } else {
        for (i, (set, pw)) in sets.iter().zip(&promoted).enumerate() {
            if i > 0 {
                println!();
            }
            println!("# promotion {} of {} under {setting}: {set}", i + 1, sets.len());
            print!("{}", print_workload(pw));
        }
        if let Some(t) = &rep.timings {
            println!("# analysis: {:.3} ms", t.analysis_ms);
        }
    }
    Ok(0)
}

fn check_schedule(file: &Path, json: bool) -> Result<u8> {
    let parsed = parse_schedule(&read(file)?).map_err(|e| anyhow!("{}:{e}", file.display()))?;
    let schedule = build_rlc_schedule(parsed.transactions, parsed.interleaving)?;
    let rep = report::schedule_report(&schedule);
    if json {
        print!("{}", to_json(&rep));
    } else {
        println!("rc_allowed: {}", rep.rc_allowed);
        if let Some(v) = &rep.rc_violation {
            println!("rc_violation: {v}");
        }
        println!("serializable: {}", rep.serializable);
        if let Some(cycle) = &rep.cycle {
            println!("cycle: {}", cycle.join(" -> "));
        }
    }
    Ok(if rep.serializable { 0 } else { 1 })
}

fn oracle(file: &Path, max_ops: usize, json: bool) -> Result<u8> {
    let parsed = parse_schedule(&read(file)?).map_err(|e| anyhow!("{}:{e}", file.display()))?;
    let txs = parsed.transactions;
    let verdict = robust_oracle(txs.clone(), max_ops)?;
    let algorithm = is_robust_transactions(&txs);
    let rep = report::oracle_report(&txs, &verdict, &algorithm);
    if json {
        print!("{}", to_json(&rep));
    } else {
        println!("oracle: {} ({} schedules explored)", rep.verdict.replace('_', " "), rep.schedules_explored);
        if let Some(sched) = &rep.counterexample {
            println!("counterexample:");
            for op in sched {
                println!("  {} {}", op.tx, op.operation);
            }
            println!("cycle: {}", rep.cycle.as_ref().expect("cycle accompanies counterexample").join(" -> "));
        }
        let witness = match &algorithm {
            TxVerdict::Robust => String::new(),
            TxVerdict::NotRobust(w) => format!(" ({})", w.describe(&txs)),
        };
        println!("algorithm: {}{witness}", rep.algorithm_verdict.replace('_', " "));
        println!("agree: {}", rep.agree);
    }
    if !rep.agree {
        bail!("oracle and algorithm disagree");
    }
    Ok(if verdict.is_robust() { 0 } else { 1 })
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("RC_SENTINEL_THREADS") {
        let n: usize = v.trim().parse().with_context(|| format!("RC_SENTINEL_THREADS={v} is not a number"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8> {
    configure_threads()?;
    match cli.command {
        Command::Check { file, setting, out, counterexample } => {
            check(&file, setting.setting(), &out, counterexample.as_deref())
        }
        Command::Subsets { file, setting, out } => subsets(&file, setting.setting(), &out),
        Command::Promote { file, minimal: _, all, setting, out } => promote_cmd(&file, all, setting.setting(), &out),
        Command::CheckSchedule { file, json } => check_schedule(&file, json),
        Command::Oracle { file, max_ops, json } => oracle(&file, max_ops, json),
        Command::Bench { name } => {
            print!("{}", match name {
                BenchName::Smallbank => fixtures::SMALLBANK,
                BenchName::TpccKv => fixtures::TPCC_KV,
            });
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
