//! Suite runner, reports and report comparison.
//!
//! A run expands its config into (task, seed) pairs, executes each episode
//! on a worker pool, writes one transcript per episode and aggregates the
//! transcripts into a report. Aggregation is a pure function of the
//! transcript set, so `report_from_transcripts` can rebuild any report.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use planbench_core::affordance::{Affordance, AffordanceConfig, Detector, GroundTruth};
use planbench_core::chat::{ChatBackend, OracleBacked, Scripted};
use planbench_core::executor::{
    run_closed_loop, run_open_loop, ExecConfig, FailureClass, LoopMode, Outcome, Transcript, DEFAULT_MAX_STEPS,
    SCHEMA_VERSION,
};
use planbench_core::planners::{
    BeliefOracleScorer, GdPlanner, Planner, PromptPlanner, SayCanPlanner, TrieMarginalScorer, DEFAULT_BEAM_WIDTH,
};
use planbench_core::sim::{generate_episode, registry, task, Episode, Noise, Split, Suite, TaskSpec};
use planbench_core::{Observer, TextObserver};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::vlm::{CachingBackend, LiveBackend, RateLimiter, ReplayBackend, ResponseCache};
use crate::ImageObserver;

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_EPISODES: u32 = 20;
pub const DEFAULT_MODEL: &str = "gpt-4o";
pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SuiteFilter {
    /// The 16 Blocks & Bowls and Letters tasks.
    #[default]
    Benchmark,
    BlocksBowls,
    Letters,
    Feedback,
    ImageGoal,
    All,
}

impl SuiteFilter {
    fn admits(self, t: &TaskSpec) -> bool {
        match self {
            SuiteFilter::Benchmark => matches!(t.suite, Suite::BlocksBowls | Suite::Letters),
            SuiteFilter::BlocksBowls => t.suite == Suite::BlocksBowls,
            SuiteFilter::Letters => t.suite == Suite::Letters,
            SuiteFilter::Feedback => t.suite == Suite::Feedback,
            SuiteFilter::ImageGoal => t.suite == Suite::ImageGoal,
            SuiteFilter::All => true,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    #[default]
    Vila,
    Saycan,
    Gd,
    Llm,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Live,
    Replay,
    Scripted,
    #[default]
    Oracle,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum AffordanceKind {
    GroundTruth,
    #[default]
    Detector,
}

/// Everything a run depends on. The JSON config file mirrors these fields;
/// CLI flags override them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub suite: SuiteFilter,
    /// Explicit task ids; overrides `suite` when non-empty.
    pub tasks: Vec<String>,
    pub planner: PlannerKind,
    pub backend: BackendKind,
    pub mode: LoopMode,
    pub episodes: u32,
    /// Episode e of each task uses generator seed `seed + e`.
    pub seed: u64,
    /// Pick/place failure probability applied to every episode.
    pub noise: Option<f64>,
    pub out: PathBuf,
    /// Worker threads; 0 means one per available core.
    pub jobs: usize,
    pub max_steps: u32,
    pub early_stop: bool,
    pub model: String,
    pub endpoint: String,
    /// Response cache; defaults to `<out>/cache`.
    pub cache_dir: Option<PathBuf>,
    /// Record mock backend answers into the cache so the run can be replayed.
    pub record: bool,
    pub requests_per_minute: Option<u32>,
    /// Responses for the scripted backend, in order.
    pub script: Vec<String>,
    /// Keep answering with the last scripted response.
    pub script_repeat: bool,
    /// Attach rendered images to observations (prompt planners only).
    pub images: bool,
    /// Whether the text-only planner sees the scene description.
    pub llm_scene_text: bool,
    pub affordance: AffordanceKind,
    pub affordance_config: AffordanceConfig,
    pub beam_width: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            suite: SuiteFilter::default(),
            tasks: Vec::new(),
            planner: PlannerKind::default(),
            backend: BackendKind::default(),
            mode: LoopMode::Closed,
            episodes: DEFAULT_EPISODES,
            seed: 0,
            noise: None,
            out: PathBuf::from("runs/latest"),
            jobs: 0,
            max_steps: DEFAULT_MAX_STEPS,
            early_stop: false,
            model: DEFAULT_MODEL.into(),
            endpoint: DEFAULT_ENDPOINT.into(),
            cache_dir: None,
            record: false,
            requests_per_minute: None,
            script: Vec::new(),
            script_repeat: false,
            images: true,
            llm_scene_text: true,
            affordance: AffordanceKind::default(),
            affordance_config: AffordanceConfig::default(),
            beam_width: DEFAULT_BEAM_WIDTH,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("episodes must be at least 1")]
    NoEpisodes,
    #[error("max_steps must be at least 1")]
    NoSteps,
    #[error("beam width must be at least 1")]
    NoBeam,
    #[error("unknown task id: {0}")]
    UnknownTask(String),
    #[error("no tasks selected")]
    NoTasks,
    #[error("noise must lie in [0, 1], got {0}")]
    Noise(f64),
    #[error("affordance rates must lie in [0, 1]")]
    Affordance,
    #[error("the scripted backend needs a non-empty script")]
    EmptyScript,
    #[error(transparent)]
    Backend(#[from] planbench_core::chat::BackendError),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config parse error: {0}")]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ConfigError + '_ {
    move |source| ConfigError::Io { path: path.to_path_buf(), source }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Selected tasks in registry order.
    pub fn selected_tasks(&self) -> Result<Vec<TaskSpec>, ConfigError> {
        let picked: Vec<TaskSpec> = if self.tasks.is_empty() {
            registry().into_iter().filter(|t| self.suite.admits(t)).collect()
        } else {
            for id in &self.tasks {
                if task(id).is_none() {
                    return Err(ConfigError::UnknownTask(id.clone()));
                }
            }
            registry().into_iter().filter(|t| self.tasks.contains(&t.task_id)).collect()
        };
        if picked.is_empty() {
            return Err(ConfigError::NoTasks);
        }
        Ok(picked)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.episodes == 0 {
            return Err(ConfigError::NoEpisodes);
        }
        if self.max_steps == 0 {
            return Err(ConfigError::NoSteps);
        }
        if self.beam_width == 0 {
            return Err(ConfigError::NoBeam);
        }
        if let Some(p) = self.noise.filter(|p| !(0.0..=1.0).contains(p)) {
            return Err(ConfigError::Noise(p));
        }
        if !self.affordance_config.is_valid() {
            return Err(ConfigError::Affordance);
        }
        if self.uses_backend() && self.backend == BackendKind::Scripted && self.script.is_empty() {
            return Err(ConfigError::EmptyScript);
        }
        if self.uses_backend() && self.backend == BackendKind::Live {
            LiveBackend::from_env(self.endpoint.clone())?;
        }
        self.selected_tasks().map(|_| ())
    }

    /// SayCan and GD score with a local model and ignore the chat backend.
    pub fn uses_backend(&self) -> bool {
        matches!(self.planner, PlannerKind::Vila | PlannerKind::Llm)
    }

    pub fn cache_path(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(|| self.out.join("cache"))
    }

    fn exec(&self) -> ExecConfig {
        ExecConfig { max_steps: self.max_steps, early_stop: self.early_stop }
    }

    /// Column label for comparisons.
    pub fn label(&self) -> String {
        let mode = match self.mode {
            LoopMode::Closed => "closed",
            LoopMode::Open => "open",
        };
        let source = if self.uses_backend() { enum_name(&self.backend) } else { enum_name(&self.affordance) };
        format!("{}/{}/{}", enum_name(&self.planner), source, mode)
    }

    /// The config as echoed in reports. Output location and worker count
    /// do not affect results, so they are left out.
    pub fn echo(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Value::Object(m) = &mut v {
            m.remove("out");
            m.remove("jobs");
            m.remove("cache_dir");
        }
        v
    }
}

fn enum_name<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

/// Shared per-run resources handed to every worker.
#[derive(Clone)]
pub struct RunContext {
    cache: Option<ResponseCache>,
    limiter: Option<Arc<RateLimiter>>,
}

impl RunContext {
    pub fn new(cfg: &RunConfig) -> Result<Self, ConfigError> {
        let needs_cache =
            cfg.uses_backend() && (matches!(cfg.backend, BackendKind::Live | BackendKind::Replay) || cfg.record);
        let cache = if needs_cache {
            let dir = cfg.cache_path();
            Some(ResponseCache::new(&dir).map_err(io_err(&dir))?)
        } else {
            None
        };
        let limiter = cfg.requests_per_minute.map(|r| Arc::new(RateLimiter::per_minute(r)));
        Ok(RunContext { cache, limiter })
    }
}

fn build_backend(cfg: &RunConfig, ctx: &RunContext) -> Result<Box<dyn ChatBackend>, ConfigError> {
    let record = |b: Box<dyn ChatBackend>| -> Box<dyn ChatBackend> {
        match (&ctx.cache, cfg.record) {
            (Some(c), true) => Box::new(CachingBackend::new(b, c.clone())),
            _ => b,
        }
    };
    Ok(match cfg.backend {
        BackendKind::Oracle => record(Box::new(OracleBacked::new())),
        BackendKind::Scripted => record(Box::new(Scripted::new(cfg.script.clone()).with_repeat(cfg.script_repeat))),
        BackendKind::Replay => Box::new(ReplayBackend::new(ctx.cache.clone().expect("replay runs open a cache"))),
        BackendKind::Live => {
            let mut live = LiveBackend::from_env(cfg.endpoint.clone())?;
            if let Some(c) = &ctx.cache {
                live = live.with_cache(c.clone());
            }
            if let Some(l) = &ctx.limiter {
                live = live.with_limiter(l.clone());
            }
            Box::new(live)
        }
    })
}

fn build_affordance(cfg: &RunConfig, episode: &Episode) -> Box<dyn Affordance> {
    match cfg.affordance {
        AffordanceKind::GroundTruth => Box::new(GroundTruth),
        AffordanceKind::Detector => Box::new(Detector::new(cfg.affordance_config.clone(), episode.seed)),
    }
}

fn build_planner(cfg: &RunConfig, ctx: &RunContext, episode: &Episode) -> Result<Box<dyn Planner>, ConfigError> {
    Ok(match cfg.planner {
        PlannerKind::Vila => Box::new(PromptPlanner::vila(build_backend(cfg, ctx)?, cfg.model.clone())),
        PlannerKind::Llm => {
            Box::new(PromptPlanner::llm_only(build_backend(cfg, ctx)?, cfg.model.clone(), cfg.llm_scene_text))
        }
        PlannerKind::Saycan => {
            Box::new(SayCanPlanner::new(Box::new(BeliefOracleScorer::default()), build_affordance(cfg, episode)))
        }
        PlannerKind::Gd => Box::new(GdPlanner::new(
            Box::new(TrieMarginalScorer::new(Box::new(BeliefOracleScorer::default()))),
            build_affordance(cfg, episode),
            cfg.beam_width,
        )),
    })
}

/// The episode a config runs for `(task_id, seed)`, noise override applied.
pub fn episode_for(cfg: &RunConfig, task_id: &str, seed: u64) -> Result<Episode, planbench_core::sim::GenerationError> {
    let mut ep = generate_episode(task_id, seed)?;
    if let Some(p) = cfg.noise {
        ep.noise = Noise::pick_place(p);
    }
    Ok(ep)
}

/// Run one episode. Generation failures become failure transcripts.
pub fn run_episode(cfg: &RunConfig, ctx: &RunContext, task_id: &str, seed: u64) -> Result<Transcript, ConfigError> {
    let episode = match episode_for(cfg, task_id, seed) {
        Ok(ep) => ep,
        Err(e) => return Ok(error_transcript(cfg, task_id, seed, &e.to_string())),
    };
    let mut planner = build_planner(cfg, ctx, &episode)?;
    let image_obs = ImageObserver;
    let text_obs = TextObserver;
    let observer: &dyn Observer = if cfg.images && cfg.planner == PlannerKind::Vila { &image_obs } else { &text_obs };
    let exec = cfg.exec();
    Ok(match cfg.mode {
        LoopMode::Closed => run_closed_loop(&episode, &mut *planner, observer, &exec),
        LoopMode::Open => run_open_loop(&episode, &mut *planner, observer, &exec),
    })
}

fn error_transcript(cfg: &RunConfig, task_id: &str, seed: u64, message: &str) -> Transcript {
    Transcript {
        schema_version: SCHEMA_VERSION,
        task_id: task_id.into(),
        seed,
        mode: cfg.mode,
        planner: enum_name(&cfg.planner),
        backend: enum_name(&cfg.backend),
        instruction: String::new(),
        objects: Vec::new(),
        relevant: Vec::new(),
        steps: Vec::new(),
        outcome: Outcome::Failure,
        failure_class: None,
        step_count: 0,
        evidence: vec![format!("episode error: {message}")],
        wall_time_ms: 0,
    }
}

pub fn transcript_name(task_id: &str, seed: u64) -> String {
    format!("transcripts/{task_id}__{seed}.json")
}

fn to_json_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ConfigError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, bytes).map_err(io_err(path))
}

pub fn worker_count(jobs: usize) -> usize {
    if jobs > 0 {
        jobs
    } else {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    }
}

/// Run every selected (task, seed) episode and return the transcripts in
/// registry order, then seed order. Nothing is written to disk.
pub fn run_transcripts(cfg: &RunConfig) -> Result<Vec<Transcript>, ConfigError> {
    cfg.validate()?;
    let ctx = RunContext::new(cfg)?;
    let work: Vec<(usize, String, u64)> = cfg
        .selected_tasks()?
        .into_iter()
        .enumerate()
        .flat_map(|(k, t)| (0..cfg.episodes as u64).map(move |e| (k, t.task_id.clone(), cfg.seed + e)))
        .collect();
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, u64, Transcript)>> = Mutex::new(Vec::with_capacity(work.len()));
    let first_error: Mutex<Option<ConfigError>> = Mutex::new(None);
    std::thread::scope(|s| {
        for _ in 0..worker_count(cfg.jobs).min(work.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((k, id, seed)) = work.get(i) else { break };
                let started = std::time::Instant::now();
                match run_episode(cfg, &ctx, id, *seed) {
                    Ok(mut t) => {
                        t.wall_time_ms = started.elapsed().as_millis() as u64;
                        results.lock().unwrap_or_else(|e| e.into_inner()).push((*k, *seed, t));
                    }
                    Err(e) => {
                        first_error.lock().unwrap_or_else(|e| e.into_inner()).get_or_insert(e);
                        next.store(work.len(), Ordering::Relaxed);
                        break;
                    }
                }
            });
        }
    });
    if let Some(e) = first_error.into_inner().unwrap_or_else(|e| e.into_inner()) {
        return Err(e);
    }
    let mut results = results.into_inner().unwrap_or_else(|e| e.into_inner());
    results.sort_by_key(|(k, seed, _)| (*k, *seed));
    Ok(results.into_iter().map(|(_, _, t)| t).collect())
}

/// Run the suite, write transcripts and reports under `cfg.out`.
pub fn run_suite(cfg: &RunConfig) -> Result<Report, ConfigError> {
    let transcripts = run_transcripts(cfg)?;
    for t in &transcripts {
        write_file(&cfg.out.join(transcript_name(&t.task_id, t.seed)), &to_json_bytes(t))?;
    }
    let report = report_from_transcripts(&transcripts, cfg);
    write_report(&report, &cfg.out)?;
    Ok(report)
}

pub fn write_report(report: &Report, out: &Path) -> Result<(), ConfigError> {
    write_file(&out.join("report.json"), &to_json_bytes(report))?;
    write_file(&out.join("report.csv"), report.to_csv().as_bytes())?;
    write_file(&out.join("report.md"), report.to_markdown().as_bytes())
}

pub fn load_transcripts(dir: &Path) -> Result<Vec<Transcript>, ConfigError> {
    let tdir = dir.join("transcripts");
    let mut paths: Vec<PathBuf> = fs::read_dir(&tdir)
        .map_err(io_err(&tdir))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths.iter().map(|p| Ok(serde_json::from_str(&fs::read_to_string(p).map_err(io_err(p))?)?)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskRow {
    pub task_id: String,
    pub suite: Option<Suite>,
    pub split: Option<Split>,
    pub episodes: u32,
    pub successes: u32,
    pub success_rate: f64,
    pub mean_steps: f64,
    pub failures: BTreeMap<String, u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryRow {
    pub category: String,
    pub tasks: u32,
    /// Unweighted mean of the per-task rates.
    pub success_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub label: String,
    pub config: Value,
    pub tasks: Vec<TaskRow>,
    pub categories: Vec<CategoryRow>,
    /// Failure class counts over every unsuccessful episode.
    pub failures: BTreeMap<String, u32>,
    pub transcripts: Vec<String>,
}

pub const UNCLASSIFIED: &str = "unclassified";

fn category_of(t: &TaskSpec) -> &'static str {
    match (t.suite, t.split) {
        (Suite::BlocksBowls, Split::Seen) => "blocks_bowls/seen",
        (Suite::BlocksBowls, Split::Unseen) => "blocks_bowls/unseen",
        (Suite::Letters, Split::Seen) => "letters/seen",
        (Suite::Letters, Split::Unseen) => "letters/unseen",
        (Suite::Feedback, _) => "feedback",
        (Suite::ImageGoal, _) => "image_goal",
    }
}

const CATEGORY_ORDER: [&str; 6] =
    ["blocks_bowls/seen", "blocks_bowls/unseen", "letters/seen", "letters/unseen", "feedback", "image_goal"];

fn zero_histogram() -> BTreeMap<String, u32> {
    FailureClass::ALL.iter().map(|c| (c.name().to_string(), 0)).collect()
}

/// Aggregate transcripts. Pure: the same transcript set and config always
/// give the same report, whatever order the transcripts come in.
pub fn report_from_transcripts(transcripts: &[Transcript], cfg: &RunConfig) -> Report {
    let reg = registry();
    let order = |id: &str| reg.iter().position(|t| t.task_id == id).unwrap_or(usize::MAX);
    let mut sorted: Vec<&Transcript> = transcripts.iter().collect();
    sorted.sort_by(|a, b| (order(&a.task_id), &a.task_id, a.seed).cmp(&(order(&b.task_id), &b.task_id, b.seed)));

    let mut failures = zero_histogram();
    let mut rows: Vec<TaskRow> = Vec::new();
    for t in &sorted {
        if rows.last().is_none_or(|r| r.task_id != t.task_id) {
            let spec = reg.iter().find(|s| s.task_id == t.task_id);
            rows.push(TaskRow {
                task_id: t.task_id.clone(),
                suite: spec.map(|s| s.suite),
                split: spec.map(|s| s.split),
                episodes: 0,
                successes: 0,
                success_rate: 0.0,
                mean_steps: 0.0,
                failures: zero_histogram(),
            });
        }
        let row = rows.last_mut().expect("row pushed above");
        row.episodes += 1;
        row.mean_steps += t.step_count as f64;
        if t.outcome == Outcome::Success {
            row.successes += 1;
        } else {
            let name = t.failure_class.map_or(UNCLASSIFIED, FailureClass::name).to_string();
            *row.failures.entry(name.clone()).or_insert(0) += 1;
            *failures.entry(name).or_insert(0) += 1;
        }
    }
    for r in &mut rows {
        r.success_rate = r.successes as f64 / r.episodes as f64;
        r.mean_steps /= r.episodes as f64;
    }

    let categories = CATEGORY_ORDER
        .iter()
        .filter_map(|cat| {
            let rates: Vec<f64> = rows
                .iter()
                .filter(|r| reg.iter().any(|s| s.task_id == r.task_id && category_of(s) == *cat))
                .map(|r| r.success_rate)
                .collect();
            (!rates.is_empty()).then(|| CategoryRow {
                category: cat.to_string(),
                tasks: rates.len() as u32,
                success_rate: rates.iter().sum::<f64>() / rates.len() as f64,
            })
        })
        .collect();

    Report {
        schema_version: REPORT_SCHEMA_VERSION,
        label: cfg.label(),
        config: cfg.echo(),
        tasks: rows,
        categories,
        failures,
        transcripts: sorted.iter().map(|t| transcript_name(&t.task_id, t.seed)).collect(),
    }
}

fn pct(r: f64) -> String {
    format!("{:.1}%", r * 100.0)
}

impl Report {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Ok(serde_json::from_str(&text)?)
    }

    fn failure_columns(&self) -> Vec<String> {
        let mut cols: Vec<String> = FailureClass::ALL.iter().map(|c| c.name().to_string()).collect();
        if self.failures.get(UNCLASSIFIED).is_some_and(|n| *n > 0) {
            cols.push(UNCLASSIFIED.into());
        }
        cols
    }

    pub fn to_csv(&self) -> String {
        let cols = self.failure_columns();
        let mut out = format!("task_id,category,episodes,successes,success_rate,mean_steps,{}\n", cols.join(","));
        for r in &self.tasks {
            let cat = task(&r.task_id).map(|s| category_of(&s)).unwrap_or("");
            let counts: Vec<String> =
                cols.iter().map(|c| r.failures.get(c).copied().unwrap_or(0).to_string()).collect();
            let _ = writeln!(
                out,
                "{},{},{},{},{:.4},{:.2},{}",
                r.task_id,
                cat,
                r.episodes,
                r.successes,
                r.success_rate,
                r.mean_steps,
                counts.join(",")
            );
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!("# Run report: {}\n\n", self.label);
        out.push_str("| task | episodes | success | mean steps |\n|---|---:|---:|---:|\n");
        for r in &self.tasks {
            let _ = writeln!(out, "| {} | {} | {} | {:.2} |", r.task_id, r.episodes, pct(r.success_rate), r.mean_steps);
        }
        out.push_str("\n| category | tasks | success |\n|---|---:|---:|\n");
        for c in &self.categories {
            let _ = writeln!(out, "| {} | {} | {} |", c.category, c.tasks, pct(c.success_rate));
        }
        out.push_str("\n| failure class | episodes |\n|---|---:|\n");
        for c in self.failure_columns() {
            let _ = writeln!(out, "| {} | {} |", c, self.failures.get(&c).copied().unwrap_or(0));
        }
        out
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CompareError {
    #[error("nothing to compare")]
    Empty,
    #[error("report {index} has schema version {found}, expected {expected}")]
    SchemaMismatch { index: usize, expected: u32, found: u32 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    /// "task" or "category".
    pub kind: String,
    pub name: String,
    /// One entry per report; `None` where a report lacks the row.
    pub rates: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub schema_version: u32,
    pub columns: Vec<String>,
    pub rows: Vec<CompareRow>,
    /// Per report: failure class counts over its unsuccessful episodes.
    pub failures: Vec<BTreeMap<String, u32>>,
}

/// Side-by-side table: one column per report, rows for tasks then
/// categories, plus the failure breakdown of each column.
pub fn compare_reports(reports: &[Report]) -> Result<Comparison, CompareError> {
    let first = reports.first().ok_or(CompareError::Empty)?;
    for (index, r) in reports.iter().enumerate() {
        if r.schema_version != first.schema_version || r.schema_version != REPORT_SCHEMA_VERSION {
            return Err(CompareError::SchemaMismatch {
                index,
                expected: REPORT_SCHEMA_VERSION,
                found: r.schema_version,
            });
        }
    }
    let mut columns: Vec<String> = Vec::new();
    for r in reports {
        let mut label = r.label.clone();
        let mut k = 2;
        while columns.contains(&label) {
            label = format!("{} #{k}", r.label);
            k += 1;
        }
        columns.push(label);
    }
    let mut rows = Vec::new();
    let mut seen: Vec<String> = Vec::new();
    for r in reports {
        for t in &r.tasks {
            if !seen.contains(&t.task_id) {
                seen.push(t.task_id.clone());
            }
        }
    }
    for name in seen {
        let rates =
            reports.iter().map(|r| r.tasks.iter().find(|t| t.task_id == name).map(|t| t.success_rate)).collect();
        rows.push(CompareRow { kind: "task".into(), name, rates });
    }
    for cat in CATEGORY_ORDER {
        let rates: Vec<Option<f64>> =
            reports.iter().map(|r| r.categories.iter().find(|c| c.category == cat).map(|c| c.success_rate)).collect();
        if rates.iter().any(Option::is_some) {
            rows.push(CompareRow { kind: "category".into(), name: cat.into(), rates });
        }
    }
    Ok(Comparison {
        schema_version: REPORT_SCHEMA_VERSION,
        columns,
        rows,
        failures: reports.iter().map(|r| r.failures.clone()).collect(),
    })
}

impl Comparison {
    pub fn to_markdown(&self) -> String {
        let cell = |r: &Option<f64>| r.map_or_else(|| "-".to_string(), pct);
        let mut out = format!("| | {} |\n|---|{}\n", self.columns.join(" | "), "---:|".repeat(self.columns.len()));
        for row in &self.rows {
            let name = if row.kind == "category" { format!("**{}**", row.name) } else { row.name.clone() };
            let cells: Vec<String> = row.rates.iter().map(cell).collect();
            let _ = writeln!(out, "| {} | {} |", name, cells.join(" | "));
        }
        // Failure breakdown: share of each class among a column's failures.
        out.push_str("\n| failure class | ");
        out.push_str(&self.columns.join(" | "));
        let _ = writeln!(out, " |\n|---|{}", "---:|".repeat(self.columns.len()));
        for class in self.failure_classes() {
            let cells: Vec<String> = self
                .failures
                .iter()
                .map(|f| {
                    let total: u32 = f.values().sum();
                    let n = f.get(&class).copied().unwrap_or(0);
                    if total == 0 {
                        "-".to_string()
                    } else {
                        format!("{} ({})", n, pct(n as f64 / total as f64))
                    }
                })
                .collect();
            let _ = writeln!(out, "| {} | {} |", class, cells.join(" | "));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            format!("kind,name,{}\n", self.columns.iter().map(|c| csv_field(c)).collect::<Vec<_>>().join(","));
        for row in &self.rows {
            let cells: Vec<String> =
                row.rates.iter().map(|r| r.map_or_else(String::new, |v| format!("{v:.4}"))).collect();
            let _ = writeln!(out, "{},{},{}", row.kind, row.name, cells.join(","));
        }
        for class in self.failure_classes() {
            let cells: Vec<String> =
                self.failures.iter().map(|f| f.get(&class).copied().unwrap_or(0).to_string()).collect();
            let _ = writeln!(out, "failure,{},{}", class, cells.join(","));
        }
        out
    }

    fn failure_classes(&self) -> Vec<String> {
        let mut classes: Vec<String> = FailureClass::ALL.iter().map(|c| c.name().to_string()).collect();
        for f in &self.failures {
            for (k, n) in f {
                if *n > 0 && !classes.contains(k) {
                    classes.push(k.clone());
                }
            }
        }
        classes
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Registry as JSON: id, suite, split, template and generator parameters.
pub fn registry_json() -> String {
    String::from_utf8(to_json_bytes(&registry())).expect("utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(tasks: &[&str], episodes: u32) -> RunConfig {
        RunConfig { tasks: tasks.iter().map(|s| s.to_string()).collect(), episodes, jobs: 2, ..RunConfig::default() }
    }

    #[test]
    fn config_validation() {
        assert!(matches!(cfg(&[], 0).validate(), Err(ConfigError::NoEpisodes)));
        assert!(matches!(cfg(&["nope"], 1).validate(), Err(ConfigError::UnknownTask(_))));
        let c = RunConfig { noise: Some(1.5), ..cfg(&[], 1) };
        assert!(matches!(c.validate(), Err(ConfigError::Noise(_))));
        let c = RunConfig { backend: BackendKind::Scripted, ..cfg(&[], 1) };
        assert!(matches!(c.validate(), Err(ConfigError::EmptyScript)));
        assert_eq!(cfg(&[], 1).selected_tasks().unwrap().len(), 16);
    }

    #[test]
    fn config_json_round_trips_and_rejects_unknown_fields() {
        let c = cfg(&["bb_stack"], 3);
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert!(serde_json::from_str::<RunConfig>(r#"{"episodez": 3}"#).is_err());
        let partial: RunConfig = serde_json::from_str(r#"{"planner": "gd", "mode": "open"}"#).unwrap();
        assert_eq!((partial.planner, partial.mode, partial.episodes), (PlannerKind::Gd, LoopMode::Open, 20));
    }

    #[test]
    fn oracle_run_is_perfect_and_rates_are_exact() {
        let c = RunConfig { images: false, ..cfg(&["bb_pick_place", "letters_alpha"], 3) };
        let ts = run_transcripts(&c).unwrap();
        assert_eq!(ts.len(), 6);
        let r = report_from_transcripts(&ts, &c);
        assert!(r.tasks.iter().all(|t| t.successes == 3 && t.success_rate == 1.0));
        assert_eq!(r.categories.len(), 2);
        assert_eq!(r.failures.values().sum::<u32>(), 0);
        assert_eq!(r.transcripts[0], "transcripts/bb_pick_place__0.json");
    }

    #[test]
    fn report_ignores_transcript_order() {
        let c = RunConfig { images: false, ..cfg(&["bb_stack"], 3) };
        let mut ts = run_transcripts(&c).unwrap();
        let a = report_from_transcripts(&ts, &c);
        ts.reverse();
        assert_eq!(report_from_transcripts(&ts, &c), a);
    }

    #[test]
    fn category_mean_is_unweighted() {
        let c = cfg(&[], 1);
        let mk = |id: &str, seed: u64, ok: bool| Transcript {
            outcome: if ok { Outcome::Success } else { Outcome::Failure },
            failure_class: (!ok).then_some(FailureClass::Understanding),
            ..error_transcript(&c, id, seed, "x")
        };
        // bb_pick_place 1/1, bb_matching 1/3: mean of rates is 2/3, pooled would be 1/2.
        let ts = vec![
            mk("bb_pick_place", 0, true),
            mk("bb_matching", 0, true),
            mk("bb_matching", 1, false),
            mk("bb_matching", 2, false),
        ];
        let r = report_from_transcripts(&ts, &c);
        let seen = r.categories.iter().find(|c| c.category == "blocks_bowls/seen").unwrap();
        assert!((seen.success_rate - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.failures["understanding"], 2);
    }

    #[test]
    fn comparison_shapes() {
        let c = RunConfig { images: false, ..cfg(&["fb_pack_reversion"], 2) };
        let closed = report_from_transcripts(&run_transcripts(&c).unwrap(), &c);
        let oc = RunConfig { mode: LoopMode::Open, ..c.clone() };
        let open = report_from_transcripts(&run_transcripts(&oc).unwrap(), &oc);
        let single = compare_reports(std::slice::from_ref(&closed)).unwrap();
        assert_eq!(single.columns, ["vila/oracle/closed"]);
        assert_eq!(single.rows[0].rates, [Some(1.0)]);
        let both = compare_reports(&[open.clone(), closed.clone()]).unwrap();
        assert_eq!(both.rows[0].rates, [Some(0.0), Some(1.0)]);
        assert!(both.to_markdown().contains("| fb_pack_reversion | 0.0% | 100.0% |"));
        assert!(both.to_csv().starts_with("kind,name,vila/oracle/open,vila/oracle/closed\n"));
        let mut bad = open;
        bad.schema_version = 99;
        assert_eq!(
            compare_reports(&[closed, bad]),
            Err(CompareError::SchemaMismatch { index: 1, expected: 1, found: 99 })
        );
        assert_eq!(compare_reports(&[]), Err(CompareError::Empty));
    }
}
