use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use planbench::harness::{
    compare_reports, episode_for, load_transcripts, registry_json, run_episode, run_suite, transcript_name,
    BackendKind, PlannerKind, Report, RunConfig, RunContext, SuiteFilter,
};
use planbench_core::digest::canonical_json;
use planbench_core::executor::LoopMode;
use planbench_core::sim::registry;
use serde_json::Value;

#[derive(Parser)]
#[command(name = "planbench", version, about = "Closed-loop tabletop task planning benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a task suite and write transcripts and reports.
    Run(RunArgs),
    /// Run a single episode.
    Episode(EpisodeArgs),
    /// Put several reports side by side.
    Compare(CompareArgs),
    /// Re-execute a previous run from its cached responses.
    Replay(ReplayArgs),
    /// List the task registry.
    Tasks {
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// JSON config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    suite: Option<SuiteFilter>,
    /// Comma-separated task ids.
    #[arg(long, value_delimiter = ',')]
    tasks: Option<Vec<String>>,
    #[arg(long, value_enum)]
    planner: Option<PlannerKind>,
    #[arg(long, value_enum)]
    backend: Option<BackendKind>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<LoopMode>,
    #[arg(long)]
    episodes: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Pick/place failure probability.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    max_steps: Option<u32>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Record mock backend responses into the cache.
    #[arg(long)]
    record: bool,
    /// Scripted backend response (repeatable, used in order).
    #[arg(long = "script")]
    script: Vec<String>,
    #[arg(long)]
    script_repeat: bool,
    #[arg(long)]
    requests_per_minute: Option<u32>,
}

fn parse_mode(s: &str) -> Result<LoopMode, String> {
    match s {
        "closed" => Ok(LoopMode::Closed),
        "open" => Ok(LoopMode::Open),
        _ => Err(format!("expected closed or open, got {s}")),
    }
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f.clone() { c.$f = v; } )* };
        }
        set!(suite, tasks, planner, backend, mode, episodes, seed, out, jobs, max_steps, model, endpoint);
        if self.noise.is_some() {
            c.noise = self.noise;
        }
        if self.cache_dir.is_some() {
            c.cache_dir = self.cache_dir.clone();
        }
        if self.requests_per_minute.is_some() {
            c.requests_per_minute = self.requests_per_minute;
        }
        if !self.script.is_empty() {
            c.script = self.script.clone();
        }
        c.record |= self.record;
        c.script_repeat |= self.script_repeat;
        Ok(c)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
}

#[derive(Args)]
struct EpisodeArgs {
    #[arg(long)]
    task: String,
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Write the transcript here.
    #[arg(long)]
    transcript: Option<PathBuf>,
    /// Write the generated episode here as canonical JSON.
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// report.json files, one column each.
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    /// Directory for comparison.md, comparison.csv and comparison.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    /// Directory of the run to replay (holds report.json).
    #[arg(long)]
    from: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Cache directory; defaults to `<from>/cache`.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run(a) => {
            let cfg = a.cfg.resolve()?;
            let report = run_suite(&cfg)?;
            print!("{}", report.to_markdown());
            eprintln!("wrote {} transcripts to {}", report.transcripts.len(), cfg.out.display());
        }
        Command::Episode(a) => {
            let mut cfg = a.cfg.resolve()?;
            cfg.tasks = vec![a.task.clone()];
            cfg.validate()?;
            let seed = cfg.seed;
            if let Some(p) = &a.dump {
                let ep = episode_for(&cfg, &a.task, seed)?;
                fs::write(p, canonical_json(&ep)).with_context(|| format!("writing {}", p.display()))?;
            }
            let t = run_episode(&cfg, &RunContext::new(&cfg)?, &a.task, seed)?;
            if let Some(p) = &a.transcript {
                fs::write(p, serde_json::to_string_pretty(&t)? + "\n")
                    .with_context(|| format!("writing {}", p.display()))?;
            }
            for s in &t.steps {
                let exec = s.executed.as_deref().unwrap_or("(no action)");
                println!("{:>2}. {exec}", s.t);
            }
            let class = t.failure_class.map(|c| format!(" ({})", c.name())).unwrap_or_default();
            println!("{}: {:?}{class} after {} steps", t.task_id, t.outcome, t.step_count);
        }
        Command::Compare(a) => {
            let reports = a.reports.iter().map(|p| Report::load(p)).collect::<Result<Vec<_>, _>>()?;
            let cmp = compare_reports(&reports)?;
            if let Some(dir) = &a.out {
                fs::create_dir_all(dir)?;
                fs::write(dir.join("comparison.md"), cmp.to_markdown())?;
                fs::write(dir.join("comparison.csv"), cmp.to_csv())?;
                fs::write(dir.join("comparison.json"), serde_json::to_string_pretty(&cmp)? + "\n")?;
            }
            print!("{}", cmp.to_markdown());
        }
        Command::Replay(a) => return replay(&a),
        Command::Tasks { json } => {
            if json {
                print!("{}", registry_json());
            } else {
                for t in registry() {
                    println!(
                        "{:<28} {:<12} {:<7} {}",
                        t.task_id,
                        format!("{:?}", t.suite),
                        format!("{:?}", t.split),
                        t.instruction_template
                    );
                }
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn strip_backend(mut v: Value) -> Value {
    if let Value::Object(m) = &mut v {
        m.remove("backend");
    }
    v
}

fn replay(a: &ReplayArgs) -> Result<ExitCode> {
    let original = Report::load(&a.from.join("report.json"))?;
    let mut cfg: RunConfig = serde_json::from_value(original.config.clone()).context("config echo in report.json")?;
    if !cfg.uses_backend() {
        bail!("the {:?} planner makes no backend calls; rerun it with `run` instead", cfg.planner);
    }
    cfg.backend = BackendKind::Replay;
    cfg.record = false;
    cfg.out = a.out.clone();
    cfg.cache_dir = Some(a.cache_dir.clone().unwrap_or_else(|| a.from.join("cache")));
    cfg.jobs = a.jobs.unwrap_or(0);
    let report = run_suite(&cfg)?;
    let mut mismatches = 0;
    for t in load_transcripts(&a.from)? {
        let name = transcript_name(&t.task_id, t.seed);
        let replayed = read_json(&a.out.join(&name))?;
        if strip_backend(serde_json::to_value(&t)?) != strip_backend(replayed) {
            mismatches += 1;
            eprintln!("differs: {name}");
        }
    }
    print!("{}", report.to_markdown());
    if mismatches > 0 {
        eprintln!("{mismatches} transcripts differ from the original run");
        return Ok(ExitCode::from(1));
    }
    eprintln!("all {} transcripts match the original run", report.transcripts.len());
    Ok(ExitCode::SUCCESS)
}

fn read_json(p: &Path) -> Result<Value> {
    Ok(serde_json::from_str(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?)
}
