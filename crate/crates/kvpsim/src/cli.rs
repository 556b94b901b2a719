//! Command-line front end: single runs, batch/length sweeps, capacity
//! reports and side-by-side variant comparison. All outputs are
//! machine-readable and byte-stable across repeated invocations.
//!
//! Exit codes: 0 success, 2 usage/config error, 1 internal failure.

use crate::config::{
    self, parse_scenario, scenario_from_value, AllocationPolicy, ConfigError, Scenario, VariantKind,
};
use crate::kernelsim::{run_kernel, KernelSim};
use crate::kvlayout;
use crate::metrics::{self, MetricSet};
use clap::{Args, Parser, Subcommand};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "kvpsim",
    version,
    about = "Paged KV-cache access simulator with asynchronous L2 prefetching",
    after_help = "Scenario files are JSON documents with sections model/hardware/workload/variant.\n\
                  Flags override the file; --set section.key=value overrides apply last.\n\
                  KVPSIM_SEED supplies the shuffle seed when neither --seed nor the scenario sets one."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate one scenario and print its metrics.
    Run(RunArgs),
    /// Run a batch x output-tokens grid, baseline vs prefetch, as CSV.
    Sweep(SweepArgs),
    /// Print block footprint and L2 residency analytics as JSON.
    Capacity(CapacityArgs),
    /// Run several kernel variants on one scenario, side by side.
    Compare(CompareArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario file (JSON). Optional when --model is given.
    scenario: Option<PathBuf>,
    /// Model preset name or a JSON file with a model section.
    #[arg(long)]
    model: Option<String>,
    /// Hardware preset name or a JSON file with a hardware section.
    #[arg(long)]
    hardware: Option<String>,
    /// Override one field, e.g. --set workload.batch=4 (repeatable).
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
    /// Seed for the shuffled allocation policy.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long)]
    batch: Option<u64>,
    /// Sequence length (tokens) at the simulated decode step.
    #[arg(long = "output-tokens")]
    output_tokens: Option<u64>,
    /// baseline, prefetch_k or prefetch_kv.
    #[arg(long)]
    variant: Option<String>,
    /// Emit JSON instead of a table.
    #[arg(long)]
    json: bool,
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Stream per-line memory events (JSON lines) to this file.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Stream per-warp phase transitions (JSON lines) to this file.
    #[arg(long)]
    timeline: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Batch sizes, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    batch: Vec<u64>,
    /// Output token counts, comma separated.
    #[arg(long = "output-tokens", value_delimiter = ',', required = true)]
    output_tokens: Vec<u64>,
    /// Prefetch variant to compare against baseline.
    #[arg(long, default_value = "prefetch_kv")]
    variant: String,
    /// Worker threads for independent sweep cells.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CapacityArgs {
    /// Model preset name or a JSON file with a model section.
    #[arg(long, required = true)]
    model: String,
    /// Hardware preset name or a JSON file with a hardware section.
    #[arg(long, default_value = "h20")]
    hardware: String,
    #[arg(long, default_value_t = 1)]
    batch: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Variants to run side by side, e.g. baseline,prefetch_k,prefetch_kv.
    /// Speedups are reported against the first.
    #[arg(long, value_delimiter = ',', required = true)]
    variants: Vec<String>,
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long)]
    batch: Option<u64>,
    #[arg(long = "output-tokens")]
    output_tokens: Option<u64>,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum CliError {
    Config(ConfigError),
    Internal(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

/// Parses args and runs; returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap uses exit code 2 for usage errors, 0 for --help/--version.
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.cmd {
        Cmd::Run(args) => cmd_run(args),
        Cmd::Sweep(args) => cmd_sweep(args),
        Cmd::Capacity(args) => cmd_capacity(args),
        Cmd::Compare(args) => cmd_compare(args),
    };
    match result {
        Ok(()) => 0,
        Err(CliError::Config(e)) => {
            eprintln!("error: {e}");
            2
        }
        Err(CliError::Internal(e)) => {
            eprintln!("internal error: {e}");
            1
        }
    }
}

/// Resolves a --model/--hardware value: preset name first, then a JSON file
/// containing just that section.
fn section_from_flag(value: &str, presets: &[&str]) -> Result<serde_json::Value, ConfigError> {
    if presets.contains(&value) {
        return Ok(serde_json::json!({ "preset": value }));
    }
    if Path::new(value).is_file() {
        let text = fs::read_to_string(value)?;
        return serde_json::from_str(&text).map_err(|e| ConfigError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        });
    }
    Err(ConfigError::UnknownPreset(value.to_string()))
}

fn build_scenario(
    args: &ScenarioArgs,
    batch: Option<u64>,
    output_tokens: Option<u64>,
    variant: Option<&str>,
) -> Result<Scenario, ConfigError> {
    let mut doc: serde_json::Value = match &args.scenario {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            // Surface syntax errors with positions before any overrides.
            parse_scenario(&text).map(|_| ()).or_else(|e| match e {
                ConfigError::Syntax { .. } => Err(e),
                _ => Ok(()),
            })?;
            serde_json::from_str(&text).unwrap()
        }
        None => serde_json::json!({}),
    };
    let obj = doc.as_object_mut().expect("document is an object");
    if let Some(model) = &args.model {
        obj.insert(
            "model".into(),
            section_from_flag(model, config::MODEL_PRESETS)?,
        );
    }
    if let Some(hw) = &args.hardware {
        obj.insert(
            "hardware".into(),
            section_from_flag(hw, config::HARDWARE_PRESETS)?,
        );
    }
    if let Some(b) = batch {
        config::apply_override(&mut doc, &format!("workload.batch={b}"))?;
    }
    if let Some(t) = output_tokens {
        config::apply_override(&mut doc, &format!("workload.seq_len={t}"))?;
    }
    if let Some(v) = variant {
        let kind: VariantKind = v.parse()?;
        config::apply_override(&mut doc, &format!("variant.kind={kind}"))?;
    }
    for spec in &args.set {
        config::apply_override(&mut doc, spec)?;
    }
    let mut scenario = scenario_from_value(&doc)?;
    if let AllocationPolicy::Shuffled { seed } = &mut scenario.workload.allocation_policy {
        if let Some(s) = args.seed {
            *seed = s;
        } else if *seed == 0 {
            if let Some(s) = std::env::var("KVPSIM_SEED")
                .ok()
                .and_then(|v| v.parse().ok())
            {
                *seed = s;
            }
        }
    }
    Ok(scenario)
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, content).map_err(|e| CliError::Internal(e.to_string())),
        None => {
            print!("{content}");
            std::io::stdout()
                .flush()
                .map_err(|e| CliError::Internal(e.to_string()))
        }
    }
}

fn file_sink(path: &Option<PathBuf>) -> Result<Option<Box<dyn Write + Send>>, CliError> {
    match path {
        None => Ok(None),
        Some(p) => {
            let f = fs::File::create(p).map_err(|e| CliError::Internal(e.to_string()))?;
            Ok(Some(Box::new(std::io::BufWriter::new(f))))
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let scenario = build_scenario(
        &args.scenario,
        args.batch,
        args.output_tokens,
        args.variant.as_deref(),
    )?;
    let mut sim = KernelSim::new(&scenario)?;
    sim.set_mem_trace(file_sink(&args.trace)?);
    sim.set_timeline(file_sink(&args.timeline)?);
    let report = sim.run();
    let m = metrics::derive_metrics(&report, &scenario.hardware);
    let content = if args.json {
        let mut v = serde_json::to_value(m).map_err(|e| CliError::Internal(e.to_string()))?;
        v.as_object_mut().unwrap().insert(
            "variant".into(),
            serde_json::json!(scenario.variant.kind.to_string()),
        );
        format!("{}\n", serde_json::to_string_pretty(&v).unwrap())
    } else {
        metrics::render_table(&[(&scenario.variant.kind.to_string(), &m)])
    };
    emit(&args.out, &content)
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let kind: VariantKind = args.variant.parse()?;
    if kind == VariantKind::Baseline {
        return Err(ConfigError::Invalid {
            field: "variant".into(),
            rule: "sweep compares a prefetch variant against baseline".into(),
        }
        .into());
    }
    let base = build_scenario(&args.scenario, None, None, None)?;
    let mut batches = args.batch.clone();
    let mut tokens = args.output_tokens.clone();
    batches.sort_unstable();
    batches.dedup();
    tokens.sort_unstable();
    tokens.dedup();
    let cells: Vec<(u64, u64)> = batches
        .iter()
        .flat_map(|&b| tokens.iter().map(move |&t| (b, t)))
        .collect();

    let run_cell = |&(batch, seq_len): &(u64, u64)| -> Result<(u64, u64, u64, u64), ConfigError> {
        let mut s = base.clone();
        s.workload.batch = batch;
        s.workload.seq_len = seq_len;
        s.variant.kind = VariantKind::Baseline;
        let baseline = run_kernel(&s)?;
        s.variant.kind = kind;
        let prefetch = run_kernel(&s)?;
        Ok((
            batch,
            seq_len,
            baseline.duration_cycles,
            prefetch.duration_cycles,
        ))
    };

    let results: Result<Vec<_>, ConfigError> = if args.jobs > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(args.jobs)
            .build()
            .map_err(|e| CliError::Internal(e.to_string()))?;
        pool.install(|| cells.par_iter().map(run_cell).collect())
    } else {
        cells.iter().map(run_cell).collect()
    };

    let mut csv = String::from("batch,output_tokens,duration_baseline,duration_prefetch,speedup\n");
    for (batch, seq_len, base_dur, pref_dur) in results? {
        let speedup = base_dur as f64 / pref_dur as f64;
        csv.push_str(&format!(
            "{batch},{seq_len},{base_dur},{pref_dur},{speedup:.6}\n"
        ));
    }
    emit(&args.out, &csv)
}

fn cmd_capacity(args: CapacityArgs) -> Result<(), CliError> {
    let model_section = section_from_flag(&args.model, config::MODEL_PRESETS)?;
    let hw_section = section_from_flag(&args.hardware, config::HARDWARE_PRESETS)?;
    let doc = serde_json::json!({ "model": model_section, "hardware": hw_section });
    let scenario = scenario_from_value(&doc)?;
    let report = kvlayout::capacity_report(&scenario.model, &scenario.hardware, args.batch);
    let content = format!("{}\n", serde_json::to_string_pretty(&report).unwrap());
    emit(&args.out, &content)
}

fn cmd_compare(args: CompareArgs) -> Result<(), CliError> {
    let kinds: Vec<VariantKind> = args
        .variants
        .iter()
        .map(|v| v.parse())
        .collect::<Result<_, _>>()?;
    if kinds.len() < 2 {
        return Err(ConfigError::Invalid {
            field: "variants".into(),
            rule: "compare needs at least two variants".into(),
        }
        .into());
    }
    let base = build_scenario(&args.scenario, args.batch, args.output_tokens, None)?;
    let mut columns: Vec<(String, MetricSet)> = Vec::new();
    for kind in &kinds {
        let mut s = base.clone();
        s.variant.kind = *kind;
        let report = run_kernel(&s)?;
        columns.push((
            kind.to_string(),
            metrics::derive_metrics(&report, &s.hardware),
        ));
    }
    let reference = columns[0].1;
    for (_, m) in columns.iter_mut() {
        m.speedup = Some(metrics::speedup(&reference, m));
    }
    let content = if args.json {
        let rows: Vec<serde_json::Value> = columns
            .iter()
            .map(|(name, m)| serde_json::json!({ "variant": name, "metrics": m }))
            .collect();
        format!("{}\n", serde_json::to_string_pretty(&rows).unwrap())
    } else {
        let refs: Vec<(&str, &MetricSet)> = columns.iter().map(|(n, m)| (n.as_str(), m)).collect();
        metrics::render_table(&refs)
    };
    emit(&args.out, &content)
}
