use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};

use skillforge::evaluator::{evaluate_with, render_table, EvalReport};
use skillforge::explorer::{load_round, run_round};
use skillforge::feedback::{analyze, collect_rollouts, generate_feedback, generate_feedback_llm, Feedback};
use skillforge::orchestrator::{
    alice, compare_modes, eval_path, feedback_path, model_path, records_path, render_compare, run_loop, LoopMode,
    RunConfig, RunError, RunOptions, Teacher,
};
use skillforge::policy::llm::ChatClient;
use skillforge::policy::{BobFactory, PolicyFactory};
use skillforge::skillgen::{build_records, export_jsonl, import_jsonl, pair_count, validate, valid_ratio, Labeler};
use skillforge::store::{read_json, write_json};
use skillforge::trainer::{
    assemble_dataset, examples_from_records, export_training_file, train, LinearSoftmaxModel,
};

#[derive(Parser)]
#[command(name = "skillforge", version, about = "Exploration-first skill discovery in a text survival gridworld")]
struct Cli {
    /// TOML run configuration; unset fields keep their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run directory.
    #[arg(long, global = true, default_value = "runs/default")]
    root: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// exif, ef_no_feedback, pf_baseline or self_play.
    #[arg(long, global = true, value_parser = parse_mode)]
    mode: Option<LoopMode>,
    #[arg(long, global = true)]
    iterations: Option<u32>,
    #[arg(long, global = true)]
    resume: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one exploration round and persist its trajectories.
    Explore {
        #[arg(long, default_value_t = 0)]
        round: u32,
        /// Feedback to condition on (defaults to the previous round's, if present).
        #[arg(long)]
        feedback: Option<PathBuf>,
        /// Bob model for self-play (defaults to the previous round's, if present).
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Segment and relabel a persisted round into skill records.
    Label {
        #[arg(long, default_value_t = 0)]
        round: u32,
    },
    /// Re-check every stored verdict of a round's records.
    Validate {
        #[arg(long, default_value_t = 0)]
        round: u32,
    },
    /// Train Bob on the records available at a round.
    Train {
        #[arg(long, default_value_t = 0)]
        round: u32,
    },
    /// Evaluate a model (or the scripted expert) on NS and AP.
    Eval {
        #[arg(long, default_value_t = 0)]
        round: u32,
        #[arg(long, conflicts_with = "expert")]
        model: Option<PathBuf>,
        #[arg(long)]
        expert: bool,
    },
    /// Roll out a model and write feedback for the next round.
    Feedback {
        #[arg(long, default_value_t = 0)]
        round: u32,
    },
    /// Run the full loop.
    Loop {
        /// Stop after this many iterations (resume later with --resume).
        #[arg(long)]
        stop_after: Option<u32>,
    },
    /// Run several modes from the same seed and print a comparison table.
    Compare {
        #[arg(long, value_delimiter = ',', value_parser = parse_mode)]
        modes: Vec<LoopMode>,
    },
    /// Write the training set at a round as prompt/completion JSONL.
    Export {
        #[arg(long, default_value_t = 0)]
        round: u32,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_mode(s: &str) -> Result<LoopMode, String> {
    LoopMode::from_name(s).ok_or_else(|| {
        let names: Vec<&str> = LoopMode::ALL.iter().map(|m| m.name()).collect();
        format!("unknown mode {s:?}; expected one of {}", names.join(", "))
    })
}

enum Failure {
    Config(anyhow::Error),
    Stage(anyhow::Error),
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        if e.is_config() {
            Failure::Config(e.into())
        } else {
            Failure::Stage(e.into())
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Stage(e)
    }
}

fn load_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(mode) = cli.mode {
        cfg.mode = mode;
    }
    if let Some(k) = cli.iterations {
        cfg.iterations = k;
    }
    cfg.check()?;
    Ok(cfg)
}

fn chat_client(cfg: &RunConfig) -> Option<ChatClient> {
    match &cfg.teacher {
        Teacher::Llm(endpoint) => Some(ChatClient::new(endpoint.clone())),
        Teacher::Scripted(_) => None,
    }
}

fn load_model(path: &Path) -> anyhow::Result<LinearSoftmaxModel> {
    LinearSoftmaxModel::load(path).with_context(|| format!("loading {}", path.display()))
}

fn previous<T>(round: u32, explicit: Option<PathBuf>, path: impl Fn(u32) -> PathBuf, load: impl Fn(&Path) -> anyhow::Result<T>) -> anyhow::Result<Option<T>> {
    let path = match explicit {
        Some(p) => p,
        None if round > 0 && path(round - 1).exists() => path(round - 1),
        None => return Ok(None),
    };
    load(&path).map(Some)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = load_config(&cli).map_err(Failure::Config)?;
    let root = cli.root.as_path();
    match cli.cmd {
        Cmd::Explore { round, feedback, model } => {
            let fb: Option<Feedback> =
                previous(round, feedback, |k| feedback_path(root, k), |p| read_json(p).map_err(Into::into))?;
            let model = previous(round, model, |k| model_path(root, k), load_model)?;
            let factory = alice(&cfg, fb.as_ref(), model.as_ref());
            let round_cfg = cfg.round_config(round);
            let feedback_in = fb.as_ref().filter(|_| cfg.mode.uses_feedback());
            let store = run_round(&round_cfg, factory.as_ref(), feedback_in, root).map_err(anyhow::Error::from)?;
            println!(
                "round {round}: {} episodes, {} steps, {} failed, policy {}",
                store.trajectories.len(),
                store.manifest.total_steps,
                store.manifest.failed,
                store.manifest.policy_id
            );
        }
        Cmd::Label { round } => {
            let store = load_round(root, round).map_err(anyhow::Error::from)?;
            let client = chat_client(&cfg);
            let labeler = client.as_ref().map_or(Labeler::Template, Labeler::Llm);
            let records = build_records(&store.trajectories, round, store.manifest.config.mode, &labeler);
            let path = records_path(root, round);
            export_jsonl(&records, &path).map_err(anyhow::Error::from)?;
            let valid: Vec<_> = records.iter().filter(|r| r.valid).cloned().collect();
            println!(
                "{} records, {} valid (ratio {:.2}), {} pairs -> {}",
                records.len(),
                valid.len(),
                valid_ratio(&records).unwrap_or(0.0),
                pair_count(&valid),
                path.display()
            );
        }
        Cmd::Validate { round } => {
            let records = import_jsonl(&records_path(root, round)).map_err(anyhow::Error::from)?;
            let mut tally = std::collections::BTreeMap::new();
            let mut stale = 0;
            for r in &records {
                let v = validate(r);
                if v.valid != r.valid {
                    stale += 1;
                }
                *tally.entry(format!("{:?}", v.reason)).or_insert(0usize) += 1;
            }
            for (reason, n) in &tally {
                println!("{reason:<24} {n}");
            }
            println!("valid ratio {:.3}", valid_ratio(&records).unwrap_or(0.0));
            if stale > 0 {
                return Err(anyhow!("{stale} stored verdicts disagree with revalidation").into());
            }
        }
        Cmd::Train { round } => {
            let rounds = (0..=round)
                .map(|k| import_jsonl(&records_path(root, k)))
                .collect::<Result<Vec<_>, _>>()
                .map_err(anyhow::Error::from)?;
            let dataset = assemble_dataset(&rounds, round as usize, cfg.train.data_mode).map_err(anyhow::Error::from)?;
            let examples = examples_from_records(&dataset, cfg.train.history, cfg.train.dim);
            let (model, report) = train(&cfg.train, &examples, None, round).map_err(anyhow::Error::from)?;
            let path = model_path(root, round);
            model.save(&path).map_err(anyhow::Error::from)?;
            println!(
                "{} examples, loss {:.4} -> {:.4} -> {}",
                report.examples,
                report.initial_loss,
                report.final_loss,
                path.display()
            );
        }
        Cmd::Eval { round, model, expert } => {
            let factory: Arc<dyn PolicyFactory> = match &cfg.teacher {
                Teacher::Scripted(e) if expert => Arc::new(e.clone()),
                Teacher::Llm(endpoint) if expert => Arc::new(ChatClient::new(endpoint.clone().for_evaluation())),
                _ => {
                    let path = model.unwrap_or_else(|| model_path(root, round));
                    Arc::new(BobFactory::new(load_model(&path)?, 0.0))
                }
            };
            let report: EvalReport = evaluate_with(factory.as_ref(), &cfg.eval);
            if !expert {
                write_json(&eval_path(root, round), &report).map_err(anyhow::Error::from)?;
            }
            print!("{}", render_table(&[(report.policy_id.clone(), &report)]));
        }
        Cmd::Feedback { round } => {
            let bob = BobFactory::new(load_model(&model_path(root, round))?, 0.0);
            let rollouts = collect_rollouts(&bob, cfg.feedback_rollouts, cfg.round.horizon);
            let hist = analyze(&rollouts).map_err(anyhow::Error::from)?;
            let fb = match chat_client(&cfg) {
                Some(c) => generate_feedback_llm(&c, &hist, &rollouts, round, 3),
                None => generate_feedback(&hist, round),
            };
            fb.validate().map_err(anyhow::Error::from)?;
            write_json(&feedback_path(root, round), &fb).map_err(anyhow::Error::from)?;
            println!("{}\n{}\ntargets: {:?}", fb.behavior_analysis, fb.next_iteration_advice, fb.target_skills);
        }
        Cmd::Loop { stop_after } => {
            let report = run_loop(&cfg, root, &RunOptions { resume: cli.resume, stop_after })?;
            for it in &report.iterations {
                println!(
                    "iter {}: {} pairs (valid {:.2}), NS {}, AP {:.1}% ± {:.1}, targets {:?}",
                    it.iteration,
                    it.pairs,
                    it.valid_ratio,
                    it.ns,
                    100.0 * it.ap_mean,
                    100.0 * it.ap_stderr,
                    it.target_skills
                );
            }
        }
        Cmd::Compare { modes } => {
            let modes = if modes.is_empty() { LoopMode::ALL.to_vec() } else { modes };
            let report = compare_modes(&cfg, &modes, root, &RunOptions { resume: cli.resume, stop_after: None })?;
            print!("{}", render_compare(&report));
        }
        Cmd::Export { round, out } => {
            let rounds = (0..=round)
                .map(|k| import_jsonl(&records_path(root, k)))
                .collect::<Result<Vec<_>, _>>()
                .map_err(anyhow::Error::from)?;
            let dataset = assemble_dataset(&rounds, round as usize, cfg.train.data_mode).map_err(anyhow::Error::from)?;
            let n = export_training_file(&dataset, cfg.train.history, &out).map_err(anyhow::Error::from)?;
            println!("{n} lines -> {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Stage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
