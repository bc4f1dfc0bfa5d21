use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use qgp_core::controller::{AblationFlags, ControllerConfig, ControllerKind, DEFAULT_NO_PROGRESS_LIMIT};
use qgp_core::dataops::{self, BacklogConfig, DataSources};
use qgp_core::episode::RunRecord;
use qgp_core::metrics::{self, GroupKey, RunMetrics};
use qgp_core::policy::{PolicySpec, DEFAULT_TIMEOUT_MS};
use qgp_core::reposcan::{self, GenerationConfig, SnapshotSource};
use qgp_core::runner::{self, Manifest, Runner};
use qgp_core::task::BudgetTable;
use rayon::prelude::*;

mod config;

use config::RunConfig;

#[derive(Parser)]
#[command(name = "qgp", version, about = "Generate, run and analyse count-goal agent tasks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic reference snapshots and data sources.
    Fixtures {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Generate an artifact-retrieval manifest from repository snapshots.
    GenReposcan {
        /// Snapshot root; repeat for several snapshots.
        #[arg(long = "snapshot", required = true)]
        snapshots: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values_t = BudgetTable::reposcan().targets())]
        targets: Vec<u32>,
        #[arg(long, default_value_t = 9)]
        instances: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a work-unit backlog manifest from a data-source directory.
    GenDataops {
        #[arg(long)]
        sources: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = BudgetTable::dataops().targets())]
        targets: Vec<u32>,
        #[arg(long, default_value_t = 6)]
        backlogs: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one policy under one controller over every task of a manifest.
    Run(RunArgs),
    /// Aggregate run records into a CSV of grouped means.
    Aggregate {
        #[arg(long = "records", required = true, num_args = 1..)]
        records: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "controller,policy,target_count")]
        group_by: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Paired bootstrap success delta between two record files.
    Delta {
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
        #[arg(long, default_value_t = metrics::DEFAULT_RESAMPLES)]
        resamples: usize,
        #[arg(long, default_value_t = metrics::DEFAULT_CONFIDENCE)]
        confidence: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check hidden-set consistency, leak-freedom and backlog solvability.
    Smoke {
        #[arg(long)]
        manifest: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration; replaces the other run flags.
    #[arg(long, conflicts_with_all = ["manifest", "controller", "policy", "policy_cmd"])]
    config: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    manifest: Option<PathBuf>,
    /// standard, verifier_gated, state_qgp, unit_qgp or ablation.
    #[arg(long, default_value = "standard")]
    controller: String,
    /// dedupe_only, page_memory_only or dedupe_plus_page_no_buffer.
    #[arg(long)]
    ablation: Option<String>,
    #[arg(long, default_value_t = DEFAULT_NO_PROGRESS_LIMIT)]
    no_progress_limit: u32,
    /// Scripted policy name.
    #[arg(long, conflicts_with = "policy_cmd")]
    policy: Option<String>,
    /// Shell command for an external policy adapter.
    #[arg(long)]
    policy_cmd: Option<String>,
    #[arg(long, default_value_t = DEFAULT_TIMEOUT_MS)]
    policy_timeout_ms: u64,
    #[arg(long)]
    stop_step: Option<u32>,
    #[arg(long)]
    claim_count: Option<u64>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, required_unless_present = "config")]
    out: Option<PathBuf>,
    /// Also write the resolved configuration to this file.
    #[arg(long)]
    save_config: Option<PathBuf>,
}

/// Output files are never overwritten.
fn create_new(path: &Path) -> Result<File> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
    }
    OpenOptions::new()
        .write(true)
        .create_new(true)
        .open(path)
        .with_context(|| format!("cannot create {} (outputs are never overwritten)", path.display()))
}

fn write_new(path: &Path, content: &str) -> Result<()> {
    let mut f = create_new(path)?;
    f.write_all(content.as_bytes())
        .with_context(|| format!("cannot write {}", path.display()))
}

fn controller_config(args: &RunArgs) -> Result<ControllerConfig> {
    let config = match (args.controller.as_str(), &args.ablation) {
        ("ablation", Some(flags)) => ControllerConfig::ablation(
            AblationFlags::parse(flags).with_context(|| format!("unknown ablation flags {flags}"))?,
        ),
        ("ablation", None) => bail!("--controller ablation needs --ablation"),
        (_, Some(_)) => bail!("--ablation is only valid with --controller ablation"),
        (label, None) => ControllerConfig::parse(label)
            .with_context(|| format!("unknown controller {label}"))?,
    };
    Ok(match config.kind {
        ControllerKind::UnitQgp => ControllerConfig::unit_qgp(args.no_progress_limit),
        _ => config,
    })
}

fn policy_spec(args: &RunArgs) -> Result<PolicySpec> {
    if let Some(command) = &args.policy_cmd {
        return Ok(PolicySpec::External {
            command: command.clone(),
            timeout_ms: args.policy_timeout_ms,
        });
    }
    let name = args
        .policy
        .as_deref()
        .context("one of --policy or --policy-cmd is required")?;
    let mut spec = PolicySpec::scripted(name).with_context(|| format!("unknown policy {name}"))?;
    match &mut spec {
        PolicySpec::EarlyStopper { stop_step } => {
            *stop_step = args.stop_step.unwrap_or(*stop_step);
        }
        PolicySpec::FalseCompleter {
            stop_step,
            claim_count,
        } => {
            *stop_step = args.stop_step.unwrap_or(*stop_step);
            *claim_count = args.claim_count.or(*claim_count);
        }
        _ => {}
    }
    Ok(spec)
}

fn run_config(args: &RunArgs) -> Result<RunConfig> {
    let config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig {
            manifest: args.manifest.clone().expect("clap requires --manifest"),
            out: args.out.clone().expect("clap requires --out"),
            jobs: args.jobs,
            controller: controller_config(args)?,
            policy: policy_spec(args)?,
        },
    };
    config.resolve()
}

fn cmd_run(args: &RunArgs) -> Result<ExitCode> {
    let config = run_config(args)?;
    if let Some(path) = &args.save_config {
        write_new(path, &config.to_toml())?;
    }
    let runner = Runner::open(&config.manifest)
        .with_context(|| format!("cannot load {}", config.manifest.display()))?;
    let mut out = create_new(&config.out)?;
    let tasks = runner.tasks();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .context("cannot start worker pool")?;
    let results: Vec<_> = pool.install(|| {
        tasks
            .par_iter()
            .map(|task| runner.run(task, &config.controller, &config.policy))
            .collect()
    });
    let mut aborted = 0;
    for (task, result) in tasks.iter().zip(results) {
        let episode = result.with_context(|| format!("run of {} failed", task.task_id))?;
        if episode.record.outcome.is_none() {
            aborted += 1;
        }
        writeln!(out, "{}", episode.record.to_line())
            .with_context(|| format!("cannot write {}", config.out.display()))?;
    }
    eprintln!(
        "wrote {} records to {}{}",
        tasks.len(),
        config.out.display(),
        if aborted > 0 { format!(" ({aborted} aborted)") } else { String::new() }
    );
    Ok(if aborted > 0 { ExitCode::FAILURE } else { ExitCode::SUCCESS })
}

fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            RunRecord::parse_line(l).with_context(|| format!("{}:{}: bad record", path.display(), i + 1))
        })
        .collect()
}

fn read_metrics(path: &Path) -> Result<Vec<RunMetrics>> {
    read_records(path)?
        .iter()
        .map(|r| metrics::compute_run_metrics(r).with_context(|| format!("in {}", path.display())))
        .collect()
}

fn condition_label(rows: &[RunMetrics], path: &Path) -> String {
    match rows.first() {
        Some(first)
            if rows
                .iter()
                .all(|r| r.controller == first.controller && r.policy == first.policy) =>
        {
            format!("{}/{}", first.controller, first.policy)
        }
        _ => path.display().to_string(),
    }
}

/// Snapshot roots are stored relative to the manifest when they sit beneath
/// its directory, so manifests stay valid when the tree is moved.
fn relative_root(root: &Path, manifest_dir: &Path) -> String {
    let (Ok(root), Ok(dir)) = (root.canonicalize(), manifest_dir.canonicalize()) else {
        return root.display().to_string();
    };
    match root.strip_prefix(&dir) {
        Ok(rel) => rel.display().to_string(),
        Err(_) => root.display().to_string(),
    }
}

fn manifest_dir(out: &Path) -> Result<PathBuf> {
    let dir = out
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    Ok(dir.to_path_buf())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Fixtures { out, seed } => {
            let layout = qgp_core::fixtures::write_fixtures(&out, seed)?;
            for s in &layout.snapshots {
                println!("snapshot {}", s.display());
            }
            println!("sources {}", layout.sources.display());
        }
        Command::GenReposcan {
            snapshots,
            targets,
            instances,
            seed,
            out,
        } => {
            for s in &snapshots {
                if !s.is_dir() {
                    bail!("snapshot {} does not exist", s.display());
                }
            }
            let sources: Vec<SnapshotSource> =
                snapshots.iter().map(SnapshotSource::from_path).collect();
            let config = GenerationConfig {
                targets,
                instances_per_target: instances,
                seed,
                ..GenerationConfig::default()
            };
            let mut manifest = reposcan::generate_manifest(&sources, &config)?;
            let dir = manifest_dir(&out)?;
            for (info, path) in manifest.metadata.snapshots.iter_mut().zip(&snapshots) {
                info.root = relative_root(path, &dir);
            }
            write_new(&out, &Manifest::Reposcan(manifest).to_json())?;
            println!("{}  {}", runner::sha256_file(&out)?, out.display());
        }
        Command::GenDataops {
            sources,
            targets,
            backlogs,
            seed,
            out,
        } => {
            let data = DataSources::load(&sources)?;
            let config = BacklogConfig {
                targets,
                backlogs_per_target: backlogs,
                seed,
                ..BacklogConfig::default()
            };
            let manifest = dataops::generate_manifest(&data, &config)?;
            write_new(&out, &Manifest::Dataops(manifest).to_json())?;
            println!("{}  {}", runner::sha256_file(&out)?, out.display());
        }
        Command::Run(args) => return cmd_run(&args),
        Command::Aggregate {
            records,
            group_by,
            out,
        } => {
            let keys = group_by
                .iter()
                .map(|k| GroupKey::parse(k).with_context(|| format!("unknown group key {k}")))
                .collect::<Result<Vec<_>>>()?;
            let mut rows = Vec::new();
            for path in &records {
                rows.extend(read_metrics(path)?);
            }
            let table = metrics::aggregate(&rows, &keys);
            write_new(&out, &metrics::aggregate_csv(&table, &keys)?)?;
        }
        Command::Delta {
            left,
            right,
            resamples,
            confidence,
            seed,
            out,
        } => {
            let l = read_metrics(&left)?;
            let r = read_metrics(&right)?;
            let delta = metrics::paired_bootstrap(
                &condition_label(&l, &left),
                &metrics::by_task(&l)?,
                &condition_label(&r, &right),
                &metrics::by_task(&r)?,
                resamples,
                confidence,
                seed,
            )?;
            write_new(&out, &metrics::delta_csv(&[delta])?)?;
        }
        Command::Smoke { manifest } => {
            let runner = Runner::open(&manifest)
                .with_context(|| format!("cannot load {}", manifest.display()))?;
            let checks = runner::smoke(&runner)?;
            let failed: Vec<_> = checks.iter().filter(|c| !c.passed).collect();
            for c in &failed {
                println!("FAIL {}: {}", c.name, c.detail);
            }
            println!("{} checks, {} failed", checks.len(), failed.len());
            if !failed.is_empty() {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
