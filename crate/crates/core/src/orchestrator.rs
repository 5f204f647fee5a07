//! The closed teach/learn loop: explore, label, train, evaluate, feed back.

use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::evaluator::{evaluate_with, EvalReport, EvalSettings};
use crate::explorer::{round_dir, run_round, ExploreMode, LoadError, RoundConfig};
use crate::feedback::{analyze, collect_rollouts, generate_feedback, generate_feedback_llm, Feedback, FeedbackError};
use crate::policy::llm::{ChatClient, LlmEndpointConfig};
use crate::policy::{condition_on_feedback, BobFactory, PolicyFactory, ScriptedExpertConfig};
use crate::seeds::derive;
use crate::skillgen::{build_records, export_jsonl, import_jsonl, pair_count, valid_ratio, Labeler, SkillRecord, SkillgenError};
use crate::store::{file_sha256, read_json, sha256_hex, to_json_bytes, write_json, StoreError};
use crate::trainer::{assemble_dataset, examples_from_records, train, DataMode, LinearSoftmaxModel, TrainConfig, TrainError};

pub const RUNREPORT_SCHEMA: &str = "runreport.v1";
pub const DEFAULT_ITERATIONS: u32 = 3;
pub const SELF_PLAY_EPSILON: f64 = 0.3;
pub const FEEDBACK_ROLLOUTS: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopMode {
    /// Exploration-first with feedback.
    Exif,
    EfNoFeedback,
    PfBaseline,
    /// Alice is the previous Bob (zero-initialized at first) plus exploration noise.
    SelfPlay,
}

impl LoopMode {
    pub const ALL: [LoopMode; 4] = [LoopMode::Exif, LoopMode::EfNoFeedback, LoopMode::PfBaseline, LoopMode::SelfPlay];

    pub fn name(self) -> &'static str {
        match self {
            LoopMode::Exif => "exif",
            LoopMode::EfNoFeedback => "ef_no_feedback",
            LoopMode::PfBaseline => "pf_baseline",
            LoopMode::SelfPlay => "self_play",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }

    fn explore_mode(self) -> ExploreMode {
        match self {
            LoopMode::PfBaseline => ExploreMode::ProposalFirst,
            _ => ExploreMode::ExploreFirst,
        }
    }

    pub fn uses_feedback(self) -> bool {
        self == LoopMode::Exif
    }
}

/// Who plays Alice: the scripted expert, or a chat endpoint for exploration, labels and feedback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Teacher {
    Scripted(ScriptedExpertConfig),
    Llm(LlmEndpointConfig),
}

impl Default for Teacher {
    fn default() -> Self {
        Teacher::Scripted(ScriptedExpertConfig::survival_default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub iterations: u32,
    pub mode: LoopMode,
    pub master_seed: u64,
    /// Template; `round`, `base_seed` and `mode` are set per iteration.
    pub round: RoundConfig,
    pub train: TrainConfig,
    pub eval: EvalSettings,
    pub teacher: Teacher,
    pub feedback_rollouts: u32,
    pub self_play_epsilon: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            iterations: DEFAULT_ITERATIONS,
            mode: LoopMode::Exif,
            master_seed: 0,
            round: RoundConfig::default(),
            train: TrainConfig::default(),
            eval: EvalSettings::default(),
            teacher: Teacher::default(),
            feedback_rollouts: FEEDBACK_ROLLOUTS,
            self_play_epsilon: SELF_PLAY_EPSILON,
        }
    }
}

impl RunConfig {
    pub fn hash(&self) -> String {
        sha256_hex(&to_json_bytes(self))
    }

    pub fn check(&self) -> Result<(), RunError> {
        if self.iterations == 0 {
            return Err(RunError::Config("iterations must be positive".into()));
        }
        if self.round.episodes == 0 {
            return Err(RunError::Config("a round needs at least one episode".into()));
        }
        if !(0.0..=1.0).contains(&self.self_play_epsilon) {
            return Err(RunError::Config("self-play epsilon outside [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.round.infeasible_ratio) {
            return Err(RunError::Config("infeasible ratio outside [0, 1]".into()));
        }
        if let Teacher::Scripted(e) = &self.teacher {
            e.check().map_err(|e| RunError::Config(e.to_string()))?;
        }
        self.train.check().map_err(|e| RunError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn round_config(&self, k: u32) -> RoundConfig {
        RoundConfig {
            round: k,
            base_seed: derive(self.master_seed, &format!("round/{k}")),
            mode: self.mode.explore_mode(),
            ..self.round.clone()
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0} is locked by another run; remove the lock file if that run is gone")]
    Locked(PathBuf),
    #[error("{0} holds a run with a different config; pass a fresh directory")]
    ConfigMismatch(PathBuf),
    #[error("{0} already holds a run; use --resume")]
    Exists(PathBuf),
    #[error("iteration {iteration}: {message}")]
    Stage { iteration: u32, message: String },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Records(#[from] SkillgenError),
    #[error(transparent)]
    Feedback(#[from] FeedbackError),
}

impl RunError {
    pub fn is_config(&self) -> bool {
        matches!(self, RunError::Config(_) | RunError::ConfigMismatch(_) | RunError::Exists(_))
    }
}

/// Everything recorded about one completed iteration; also its checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: u32,
    pub round_config_hash: String,
    pub policy_id: String,
    pub feedback_in: Option<String>,
    pub records: usize,
    pub valid_records: usize,
    pub valid_ratio: f64,
    pub pairs: usize,
    pub records_sha256: String,
    pub dataset_hash: String,
    pub train_examples: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub model_sha256: String,
    pub ns: u32,
    pub ap_mean: f64,
    pub ap_stderr: f64,
    pub eval_sha256: String,
    pub feedback_out: Option<String>,
    pub target_skills: Vec<crate::craftworld::AchievementId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: String,
    pub mode: LoopMode,
    pub data_mode: DataMode,
    pub master_seed: u64,
    pub config_hash: String,
    pub iterations: Vec<IterationReport>,
    /// False when stopped early.
    pub complete: bool,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub resume: bool,
    /// Return after this many iterations, leaving checkpoints for a resume.
    pub stop_after: Option<u32>,
}

struct Lock(PathBuf);

impl Lock {
    fn acquire(root: &Path) -> Result<Self, RunError> {
        std::fs::create_dir_all(root).map_err(|e| StoreError::io(root, e))?;
        let path = root.join("run.lock");
        let mut f = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|_| RunError::Locked(path.clone()))?;
        let _ = writeln!(f, "{}", std::process::id());
        Ok(Lock(path))
    }
}

impl Drop for Lock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.0);
    }
}

fn checkpoint_path(root: &Path, k: u32) -> PathBuf {
    root.join("checkpoints").join(format!("iter_{k}.json"))
}

pub fn model_path(root: &Path, k: u32) -> PathBuf {
    root.join("models").join(format!("iter_{k}.skfm"))
}

pub fn eval_path(root: &Path, k: u32) -> PathBuf {
    root.join("evals").join(format!("iter_{k}.json"))
}

pub fn feedback_path(root: &Path, k: u32) -> PathBuf {
    root.join("feedback").join(format!("iter_{k}.json"))
}

pub fn records_path(root: &Path, k: u32) -> PathBuf {
    round_dir(root, k).join("records.jsonl")
}

/// State carried from one iteration into the next.
struct Carry {
    rounds: Vec<Vec<SkillRecord>>,
    model: Option<LinearSoftmaxModel>,
    /// Feedback from the previous iteration, if any.
    feedback: Option<Feedback>,
}

fn restore(root: &Path, report: &IterationReport) -> Result<(Vec<SkillRecord>, LinearSoftmaxModel, Option<Feedback>), RunError> {
    let k = report.iteration;
    let stale = |what: &str| RunError::Stage { iteration: k, message: format!("{what} does not match its checkpoint") };
    if file_sha256(&records_path(root, k))? != report.records_sha256 {
        return Err(stale("records"));
    }
    if file_sha256(&model_path(root, k))? != report.model_sha256 {
        return Err(stale("model"));
    }
    let records = import_jsonl(&records_path(root, k))?;
    let model = LinearSoftmaxModel::load(&model_path(root, k))?;
    let feedback = match &report.feedback_out {
        Some(_) => Some(read_json(&feedback_path(root, k))?),
        None => None,
    };
    Ok((records, model, feedback))
}

/// The exploration policy for a mode, given the previous iteration's feedback and model.
pub fn alice(cfg: &RunConfig, feedback: Option<&Feedback>, model: Option<&LinearSoftmaxModel>) -> Arc<dyn PolicyFactory> {
    if cfg.mode == LoopMode::SelfPlay {
        let bob = model.cloned().unwrap_or_else(|| LinearSoftmaxModel::zeros(cfg.train.dim));
        return Arc::new(BobFactory::new(bob, cfg.self_play_epsilon));
    }
    match &cfg.teacher {
        Teacher::Scripted(expert) => match feedback {
            Some(fb) if cfg.mode.uses_feedback() => Arc::new(condition_on_feedback(expert, fb)),
            _ => Arc::new(expert.clone()),
        },
        Teacher::Llm(endpoint) => Arc::new(ChatClient::new(endpoint.clone())),
    }
}

fn run_iteration(cfg: &RunConfig, root: &Path, k: u32, carry: &mut Carry) -> Result<IterationReport, RunError> {
    let stage = |message: String| RunError::Stage { iteration: k, message };
    let round = cfg.round_config(k);
    let factory = alice(cfg, carry.feedback.as_ref(), carry.model.as_ref());
    let feedback_in = if cfg.mode.uses_feedback() { carry.feedback.as_ref() } else { None };
    tracing::info!(iteration = k, policy = %factory.id(), "exploring");
    let store = run_round(&round, factory.as_ref(), feedback_in, root)?;

    let client = match &cfg.teacher {
        Teacher::Llm(endpoint) => Some(ChatClient::new(endpoint.clone())),
        Teacher::Scripted(_) => None,
    };
    let labeler = match &client {
        Some(c) => Labeler::Llm(c),
        None => Labeler::Template,
    };
    let records = build_records(&store.trajectories, k, round.mode, &labeler);
    let ratio = valid_ratio(&records).unwrap_or(0.0);
    let records_sha256 = export_jsonl(&records, &records_path(root, k))?;
    let valid: Vec<SkillRecord> = records.iter().filter(|r| r.valid).cloned().collect();
    tracing::info!(iteration = k, records = records.len(), valid = valid.len(), "labeled");
    carry.rounds.push(valid.clone());

    let dataset = match assemble_dataset(&carry.rounds, k as usize, cfg.train.data_mode) {
        Err(TrainError::NoValidRecords) => Vec::new(),
        r => r?,
    };
    let examples = examples_from_records(&dataset, cfg.train.history, cfg.train.dim);
    let (model, train_report) = match train(&cfg.train, &examples, carry.model.as_ref(), k) {
        Ok(r) => r,
        // A round without valid records leaves Bob as he was.
        Err(TrainError::EmptyDataset) => match &carry.model {
            Some(m) => {
                let r = crate::trainer::TrainReport {
                    initial_loss: 0.0,
                    final_loss: 0.0,
                    epoch_losses: vec![],
                    examples: 0,
                    dataset_hash: m.meta.dataset_hash.clone(),
                };
                (m.clone(), r)
            }
            None => return Err(stage("no valid records to train on".into())),
        },
        Err(e) => return Err(e.into()),
    };
    let model_sha256 = model.save(&model_path(root, k))?;

    let bob = BobFactory::new(model.clone(), 0.0);
    let eval: EvalReport = evaluate_with(&bob, &cfg.eval);
    let eval_sha256 = write_json(&eval_path(root, k), &eval)?;
    tracing::info!(iteration = k, ns = eval.ns.ns, ap = eval.ap.mean, "evaluated");

    let feedback_out = if cfg.mode.uses_feedback() {
        let rollouts = collect_rollouts(&bob, cfg.feedback_rollouts, round.horizon);
        let hist = analyze(&rollouts)?;
        let fb = match &client {
            Some(c) => generate_feedback_llm(c, &hist, &rollouts, k, 3),
            None => generate_feedback(&hist, k),
        };
        fb.validate()?;
        write_json(&feedback_path(root, k), &fb)?;
        Some(fb)
    } else {
        None
    };

    let report = IterationReport {
        iteration: k,
        round_config_hash: store.manifest.config_hash.clone(),
        policy_id: store.manifest.policy_id.clone(),
        feedback_in: feedback_in.map(Feedback::id),
        records: records.len(),
        valid_records: valid.len(),
        valid_ratio: ratio,
        pairs: pair_count(&valid),
        records_sha256,
        dataset_hash: train_report.dataset_hash.clone(),
        train_examples: train_report.examples,
        initial_loss: train_report.initial_loss,
        final_loss: train_report.final_loss,
        model_sha256,
        ns: eval.ns.ns,
        ap_mean: eval.ap.mean,
        ap_stderr: eval.ap.stderr,
        eval_sha256,
        feedback_out: feedback_out.as_ref().map(Feedback::id),
        target_skills: feedback_out.as_ref().map(|f| f.target_skills.clone()).unwrap_or_default(),
    };
    carry.model = Some(model);
    carry.feedback = feedback_out;
    write_json(&checkpoint_path(root, k), &report)?;
    Ok(report)
}

/// Runs (or resumes) a loop under `root`.
pub fn run_loop(cfg: &RunConfig, root: &Path, opts: &RunOptions) -> Result<RunReport, RunError> {
    cfg.check()?;
    let _lock = Lock::acquire(root)?;
    let config_file = root.join("run_config.json");
    let hash = cfg.hash();
    if config_file.exists() {
        let stored: RunConfig = read_json(&config_file)?;
        if stored.hash() != hash {
            return Err(RunError::ConfigMismatch(root.to_path_buf()));
        }
        if !opts.resume {
            return Err(RunError::Exists(root.to_path_buf()));
        }
    } else {
        write_json(&config_file, cfg)?;
    }

    let mut carry = Carry { rounds: Vec::new(), model: None, feedback: None };
    let mut reports = Vec::new();
    let mut resuming = opts.resume;
    for k in 0..cfg.iterations {
        if opts.stop_after.is_some_and(|n| reports.len() as u32 >= n) {
            break;
        }
        let ckpt = checkpoint_path(root, k);
        if resuming && ckpt.exists() {
            let report: IterationReport = read_json(&ckpt)?;
            let (records, model, feedback) = restore(root, &report)?;
            tracing::info!(iteration = k, "restored from checkpoint");
            carry.rounds.push(records.into_iter().filter(|r| r.valid).collect());
            carry.model = Some(model);
            carry.feedback = feedback;
            reports.push(report);
            continue;
        }
        resuming = false;
        reports.push(run_iteration(cfg, root, k, &mut carry)?);
    }
    let report = RunReport {
        schema: RUNREPORT_SCHEMA.into(),
        mode: cfg.mode,
        data_mode: cfg.train.data_mode,
        master_seed: cfg.master_seed,
        config_hash: hash,
        complete: reports.len() as u32 == cfg.iterations,
        iterations: reports,
    };
    write_json(&root.join("run_report.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub name: String,
    pub report: RunReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub master_seed: u64,
    pub rows: Vec<CompareRow>,
}

/// Runs each mode from the same master seed, plus a non-cumulative EXIF variant.
pub fn compare_modes(base: &RunConfig, modes: &[LoopMode], root: &Path, opts: &RunOptions) -> Result<CompareReport, RunError> {
    let mut variants: Vec<(String, RunConfig)> = modes
        .iter()
        .map(|m| (m.name().to_string(), RunConfig { mode: *m, ..base.clone() }))
        .collect();
    if modes.contains(&LoopMode::Exif) {
        let mut cfg = RunConfig { mode: LoopMode::Exif, ..base.clone() };
        cfg.train.data_mode = match base.train.data_mode {
            DataMode::Cumulative => DataMode::NonCumulative,
            DataMode::NonCumulative => DataMode::Cumulative,
        };
        let name = match cfg.train.data_mode {
            DataMode::Cumulative => "exif_cumulative",
            DataMode::NonCumulative => "exif_non_cumulative",
        };
        variants.push((name.to_string(), cfg));
    }
    let mut rows = Vec::new();
    for (name, cfg) in variants {
        let report = run_loop(&cfg, &root.join(&name), opts)?;
        rows.push(CompareRow { name, report });
    }
    let out = CompareReport { master_seed: base.master_seed, rows };
    write_json(&root.join("compare_report.json"), &out)?;
    Ok(out)
}

pub fn render_compare(report: &CompareReport) -> String {
    let mut out = format!("{:<22} {:>4} {:>4} {:>8} {:>8} {:>7}\n", "run", "iter", "NS", "AP (%)", "valid", "pairs");
    for row in &report.rows {
        for it in &row.report.iterations {
            out.push_str(&format!(
                "{:<22} {:>4} {:>4} {:>8.1} {:>8.2} {:>7}\n",
                row.name,
                it.iteration,
                it.ns,
                100.0 * it.ap_mean,
                it.valid_ratio,
                it.pairs
            ));
        }
    }
    out
}
