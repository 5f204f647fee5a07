//! Exploration rounds: seeded episodes under a policy, persisted as a trajectory store.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::craftworld::{
    new_world_with, observe, randomized_init_with, render_text, AchievementId, Action, InitSpec, Observation,
    StepOutcome, WorldConfig, DEFAULT_TIER_WEIGHTS,
};
use crate::feedback::Feedback;
use crate::policy::{Policy, PolicyContext, PolicyFactory, DEFAULT_HISTORY};
use crate::store::{read_json, sha256_hex, to_json_bytes, write_atomic, StoreError};

pub const TRAJECTORY_SCHEMA: &str = "trajectory.v1";
pub const MANIFEST_SCHEMA: &str = "manifest.v1";
pub const DEFAULT_EPISODES: u32 = 50;
pub const DEFAULT_HORIZON: u32 = 100;
pub const DEFAULT_INFEASIBLE_RATIO: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Horizon,
    Death,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajStep {
    pub obs: Observation,
    pub action: Action,
    pub outcome: StepOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub schema: String,
    pub episode: u32,
    pub seed: u64,
    pub init: InitSpec,
    pub goal: Option<String>,
    pub policy_id: String,
    pub feedback_id: Option<String>,
    pub steps: Vec<TrajStep>,
    pub final_obs: Observation,
    pub termination: Termination,
    pub failure: Option<String>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Observation before step `t`; `t == len()` gives the final observation.
    pub fn obs(&self, t: usize) -> &Observation {
        self.steps.get(t).map_or(&self.final_obs, |s| &s.obs)
    }

    pub fn unlocked(&self) -> &BTreeSet<AchievementId> {
        &self.final_obs.unlocked
    }

    pub fn failed(&self) -> bool {
        self.termination == Termination::Failed
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSetup {
    pub seed: u64,
    pub init: InitSpec,
    pub goal: Option<String>,
    pub horizon: u32,
    pub history: usize,
    pub world: WorldConfig,
}

/// Runs one episode until the horizon, death, or a policy error.
pub fn rollout(
    policy: &mut dyn Policy,
    setup: &EpisodeSetup,
    feedback: Option<&Feedback>,
    episode: u32,
    policy_id: &str,
    feedback_id: Option<String>,
) -> Trajectory {
    let mut world = new_world_with(setup.seed, &setup.init, setup.world).expect("episode init spec is consistent");
    policy.reset(setup.seed);
    let mut ctx = PolicyContext::new(setup.history).with_goal(setup.goal.clone()).with_feedback(feedback.cloned());
    let mut steps = Vec::new();
    let mut failure = None;
    let termination = loop {
        if world.is_terminal() {
            break Termination::Death;
        }
        if steps.len() as u32 >= setup.horizon {
            break Termination::Horizon;
        }
        let obs = observe(&world);
        let action = match policy.decide(&ctx, &obs) {
            Ok(a) => a,
            Err(e) => {
                failure = Some(e.to_string());
                break Termination::Failed;
            }
        };
        let outcome = world.advance(action).expect("world is not terminal");
        ctx.push(render_text(&obs), action);
        steps.push(TrajStep { obs, action, outcome });
    };
    Trajectory {
        schema: TRAJECTORY_SCHEMA.into(),
        episode,
        seed: setup.seed,
        init: setup.init.clone(),
        goal: setup.goal.clone(),
        policy_id: policy_id.to_string(),
        feedback_id,
        steps,
        final_obs: observe(&world),
        termination,
        failure,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExploreMode {
    ExploreFirst,
    ProposalFirst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoundConfig {
    pub round: u32,
    pub episodes: u32,
    pub horizon: u32,
    pub base_seed: u64,
    pub mode: ExploreMode,
    pub history: usize,
    pub infeasible_ratio: f64,
    pub tier_weights: [f64; 4],
    pub world: WorldConfig,
    /// Worker threads; 0 uses the global pool.
    pub workers: usize,
}

impl Default for RoundConfig {
    fn default() -> Self {
        Self {
            round: 0,
            episodes: DEFAULT_EPISODES,
            horizon: DEFAULT_HORIZON,
            base_seed: 0,
            mode: ExploreMode::ExploreFirst,
            history: DEFAULT_HISTORY,
            infeasible_ratio: DEFAULT_INFEASIBLE_RATIO,
            tier_weights: DEFAULT_TIER_WEIGHTS,
            world: WorldConfig::default(),
            workers: 0,
        }
    }
}

impl RoundConfig {
    pub fn hash(&self) -> String {
        sha256_hex(&to_json_bytes(self))
    }

    pub fn episode_seed(&self, index: u32) -> u64 {
        self.base_seed.wrapping_add(index as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskProposal {
    pub text: String,
    pub feasible: bool,
}

#[derive(Debug, Deserialize)]
struct PfCatalog {
    feasible: Vec<String>,
    infeasible: Vec<String>,
}

fn catalog() -> &'static PfCatalog {
    static CATALOG: OnceLock<PfCatalog> = OnceLock::new();
    CATALOG.get_or_init(|| toml::from_str(include_str!("../data/pf_tasks.toml")).expect("task catalog parses"))
}

pub fn feasible_catalog() -> &'static [String] {
    &catalog().feasible
}

pub fn infeasible_catalog() -> &'static [String] {
    &catalog().infeasible
}

/// Samples task texts for the proposal-first baseline, infeasible with probability `ratio`.
pub fn propose_tasks<R: Rng>(rng: &mut R, n: usize, infeasible_ratio: f64) -> Vec<TaskProposal> {
    let cat = catalog();
    (0..n)
        .map(|_| {
            let infeasible = rng.gen::<f64>() < infeasible_ratio;
            let pool = if infeasible { &cat.infeasible } else { &cat.feasible };
            TaskProposal { text: pool[rng.gen_range(0..pool.len())].clone(), feasible: !infeasible }
        })
        .collect()
}

/// Setup of episode `index`: seed `base_seed + index`, randomized start, and in
/// proposal-first mode a proposed task as the goal.
pub fn episode_setup(config: &RoundConfig, index: u32) -> EpisodeSetup {
    let seed = config.episode_seed(index);
    let (_, init) = randomized_init_with(seed, &config.tier_weights);
    let goal = match config.mode {
        ExploreMode::ExploreFirst => None,
        ExploreMode::ProposalFirst => {
            let mut rng = crate::seeds::rng(seed, "proposal");
            propose_tasks(&mut rng, 1, config.infeasible_ratio).pop().map(|p| p.text)
        }
    };
    EpisodeSetup { seed, init, goal, horizon: config.horizon, history: config.history, world: config.world }
}

pub fn run_episode(
    config: &RoundConfig,
    factory: &dyn PolicyFactory,
    feedback: Option<&Feedback>,
    index: u32,
) -> Trajectory {
    let setup = episode_setup(config, index);
    let mut policy = factory.make();
    rollout(policy.as_mut(), &setup, feedback, index, &factory.id(), feedback.map(Feedback::id))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub episode: u32,
    pub seed: u64,
    pub steps: usize,
    pub termination: Termination,
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub round: u32,
    pub config_hash: String,
    pub config: RoundConfig,
    pub policy_id: String,
    pub feedback_id: Option<String>,
    pub episodes: Vec<ManifestEntry>,
    pub failed: usize,
    pub total_steps: usize,
    /// False while the round is being written.
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStore {
    pub manifest: Manifest,
    pub trajectories: Vec<Trajectory>,
}

pub fn round_dir(root: &Path, round: u32) -> PathBuf {
    root.join("rounds").join(round.to_string())
}

/// Runs all episodes of a round (in parallel, gathered in index order).
pub fn collect_round(config: &RoundConfig, factory: &dyn PolicyFactory, feedback: Option<&Feedback>) -> Vec<Trajectory> {
    let run = || -> Vec<Trajectory> {
        (0..config.episodes).into_par_iter().map(|i| run_episode(config, factory, feedback, i)).collect()
    };
    if config.workers > 0 {
        match rayon::ThreadPoolBuilder::new().num_threads(config.workers).build() {
            Ok(pool) => pool.install(run),
            Err(_) => run(),
        }
    } else {
        run()
    }
}

/// Runs a round and persists it under `root/rounds/<k>/`.
pub fn run_round(
    config: &RoundConfig,
    factory: &dyn PolicyFactory,
    feedback: Option<&Feedback>,
    root: &Path,
) -> Result<TrajectoryStore, StoreError> {
    let trajectories = collect_round(config, factory, feedback);
    let manifest = persist_round(config, &factory.id(), feedback.map(Feedback::id), &trajectories, root)?;
    Ok(TrajectoryStore { manifest, trajectories })
}

pub fn persist_round(
    config: &RoundConfig,
    policy_id: &str,
    feedback_id: Option<String>,
    trajectories: &[Trajectory],
    root: &Path,
) -> Result<Manifest, StoreError> {
    let dir = round_dir(root, config.round);
    let mut manifest = Manifest {
        schema: MANIFEST_SCHEMA.into(),
        round: config.round,
        config_hash: config.hash(),
        config: config.clone(),
        policy_id: policy_id.to_string(),
        feedback_id,
        episodes: Vec::new(),
        failed: trajectories.iter().filter(|t| t.failed()).count(),
        total_steps: trajectories.iter().map(Trajectory::len).sum(),
        complete: false,
    };
    write_atomic(&dir.join("manifest.json"), &to_json_bytes(&manifest))?;
    for t in trajectories {
        let file = format!("ep{}.json", t.episode);
        let bytes = to_json_bytes(t);
        write_atomic(&dir.join(&file), &bytes)?;
        manifest.episodes.push(ManifestEntry {
            episode: t.episode,
            seed: t.seed,
            steps: t.len(),
            termination: t.termination,
            file,
            sha256: sha256_hex(&bytes),
        });
    }
    manifest.complete = true;
    write_atomic(&dir.join("manifest.json"), &to_json_bytes(&manifest))?;
    Ok(manifest)
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("round {0} was not completely written")]
    Incomplete(u32),
    #[error("{0} does not match its manifest hash")]
    HashMismatch(String),
}

pub fn load_round(root: &Path, round: u32) -> Result<TrajectoryStore, LoadError> {
    let dir = round_dir(root, round);
    let manifest: Manifest = read_json(&dir.join("manifest.json"))?;
    if !manifest.complete {
        return Err(LoadError::Incomplete(round));
    }
    let mut trajectories = Vec::with_capacity(manifest.episodes.len());
    for e in &manifest.episodes {
        let path = dir.join(&e.file);
        let bytes = std::fs::read(&path).map_err(|err| StoreError::io(&path, err))?;
        if sha256_hex(&bytes) != e.sha256 {
            return Err(LoadError::HashMismatch(path.display().to_string()));
        }
        trajectories.push(read_json(&path)?);
    }
    Ok(TrajectoryStore { manifest, trajectories })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::ScriptedExpertConfig;

    #[test]
    fn infeasible_ratio_is_respected() {
        let mut rng = crate::seeds::rng(1, "t");
        let props = propose_tasks(&mut rng, 1000, 0.7);
        let bad = props.iter().filter(|p| !p.feasible).count();
        assert!((670..=730).contains(&bad), "{bad}");
        assert!(propose_tasks(&mut rng, 200, 0.0).iter().all(|p| p.feasible));
        assert_eq!(infeasible_catalog().len(), 12);
        assert_eq!(feasible_catalog().len(), 22);
    }

    #[test]
    fn zero_horizon_gives_empty_trajectory() {
        let cfg = RoundConfig { episodes: 1, horizon: 0, ..Default::default() };
        let trajs = collect_round(&cfg, &ScriptedExpertConfig::default(), None);
        assert_eq!(trajs.len(), 1);
        assert!(trajs[0].is_empty());
        assert_eq!(trajs[0].termination, Termination::Horizon);
    }

    #[test]
    fn store_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RoundConfig { episodes: 3, horizon: 20, base_seed: 7, ..Default::default() };
        let store = run_round(&cfg, &ScriptedExpertConfig::default(), None, dir.path()).unwrap();
        assert_eq!(store.manifest.episodes.len(), 3);
        let back = load_round(dir.path(), 0).unwrap();
        assert_eq!(back, store);
        for t in &back.trajectories {
            assert_eq!(to_json_bytes(t), std::fs::read(round_dir(dir.path(), 0).join(format!("ep{}.json", t.episode))).unwrap());
        }
    }
}
