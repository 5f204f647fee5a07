//! The two skill metrics: NS (instructed per-skill success) and AP (open-ended progress).

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::craftworld::{AchievementId, EntityKind, InitSpec, Inventory, ItemKind, TileKind, WorldConfig};
use crate::explorer::{rollout, EpisodeSetup, Trajectory};
use crate::policy::{PolicyFactory, DEFAULT_HISTORY};
use crate::skillgen::template;

pub const EVALREPORT_SCHEMA: &str = "evalreport.v1";
pub const EVAL_SEED_BASE: u64 = 42;
pub const NS_TRIALS: u32 = 10;
pub const AP_TRIALS: u32 = 20;
pub const TASK_BUDGET: u32 = 100;
pub const AP_HORIZON: u32 = 100;
/// Inclusive success-rate threshold for counting a skill as learned.
pub const NS_THRESHOLD: f64 = 0.5;
pub const AP_INSTRUCTION: &str =
    "Advance in the Crafter world by strategically collecting resources, crafting tools, and overcoming environmental challenges.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub skill: AchievementId,
    pub instruction: String,
    pub init: InitSpec,
    pub budget: u32,
}

fn inv(items: &[(ItemKind, u8)]) -> Inventory {
    items.iter().fold(Inventory::new(), |acc, (i, n)| acc.with(*i, *n))
}

/// Starting conditions that make `skill` reachable within the budget.
pub fn task_init(skill: AchievementId) -> InitSpec {
    use AchievementId as A;
    use ItemKind as I;
    let mut spec = InitSpec::bare();
    let wp = (I::WoodPickaxe, 1);
    let sp = (I::StonePickaxe, 1);
    let ip = (I::IronPickaxe, 1);
    match skill {
        A::CollectSapling | A::WakeUp => {}
        A::PlacePlant => spec.inventory = inv(&[(I::Sapling, 1)]),
        A::EatPlant => spec.plant = true,
        A::EatCow => spec.companion = Some(EntityKind::Cow),
        A::CollectDrink => spec.landmark = Some(TileKind::Water),
        A::CollectWood => spec.landmark = Some(TileKind::Tree),
        A::PlaceTable => spec.inventory = inv(&[(I::Wood, 1)]),
        A::MakeWoodPickaxe | A::MakeWoodSword => {
            spec.inventory = inv(&[(I::Wood, 1)]);
            spec.table = true;
        }
        A::CollectStone => {
            spec.inventory = inv(&[wp]);
            spec.landmark = Some(TileKind::Stone);
        }
        A::MakeStonePickaxe | A::MakeStoneSword => {
            spec.inventory = inv(&[wp, (I::Wood, 1), (I::Stone, 1)]);
            spec.table = true;
        }
        A::PlaceStone => spec.inventory = inv(&[wp, (I::Stone, 1)]),
        A::CollectCoal => {
            spec.inventory = inv(&[wp]);
            spec.landmark = Some(TileKind::Coal);
        }
        A::PlaceFurnace => {
            spec.inventory = inv(&[wp, (I::Stone, 1)]);
            spec.table = true;
        }
        A::CollectIron => {
            spec.inventory = inv(&[wp, sp]);
            spec.landmark = Some(TileKind::Iron);
        }
        A::MakeIronPickaxe | A::MakeIronSword => {
            spec.inventory = inv(&[wp, sp, (I::Wood, 1), (I::Coal, 1), (I::Iron, 1)]);
            spec.table = true;
            spec.furnace = true;
        }
        A::CollectDiamond => {
            spec.inventory = inv(&[wp, sp, ip]);
            spec.landmark = Some(TileKind::Diamond);
        }
        A::DefeatZombie => spec.companion = Some(EntityKind::Zombie),
        A::DefeatSkeleton => spec.companion = Some(EntityKind::Skeleton),
    }
    if skill == A::WakeUp {
        spec.status.energy = 7;
    }
    spec
}

pub fn task_specs() -> Vec<TaskSpec> {
    AchievementId::ALL
        .iter()
        .map(|a| TaskSpec { skill: *a, instruction: template(*a).to_string(), init: task_init(*a), budget: TASK_BUDGET })
        .collect()
}

pub fn ns_setup(task: &TaskSpec, trial: u32) -> EpisodeSetup {
    EpisodeSetup {
        seed: EVAL_SEED_BASE + trial as u64,
        init: task.init.clone(),
        goal: Some(task.instruction.clone()),
        horizon: task.budget,
        history: DEFAULT_HISTORY,
        world: WorldConfig::default(),
    }
}

pub fn ap_setup(trial: u32, horizon: u32) -> EpisodeSetup {
    EpisodeSetup {
        seed: EVAL_SEED_BASE + trial as u64,
        init: InitSpec::bare(),
        goal: Some(AP_INSTRUCTION.to_string()),
        horizon,
        history: DEFAULT_HISTORY,
        world: WorldConfig::default(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NsTrial {
    pub skill: AchievementId,
    pub seed: u64,
    pub success: bool,
    /// Step at which the target unlocked.
    pub solved_at: Option<u32>,
    pub steps: u32,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApTrial {
    pub seed: u64,
    pub unlocked: BTreeSet<AchievementId>,
    pub steps: u32,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NsReport {
    pub rates: BTreeMap<AchievementId, f64>,
    pub ns: u32,
    pub trials: Vec<NsTrial>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApReport {
    pub mean: f64,
    pub stderr: f64,
    pub trials: Vec<ApTrial>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: String,
    pub policy_id: String,
    pub ns: NsReport,
    pub ap: ApReport,
    pub seeds: Vec<u64>,
}

fn ns_trial(task: &TaskSpec, traj: &Trajectory) -> NsTrial {
    let solved_at = traj
        .steps
        .iter()
        .enumerate()
        .find(|(_, s)| s.outcome.unlocked.contains(&task.skill))
        .map(|(t, _)| t as u32);
    NsTrial {
        skill: task.skill,
        seed: traj.seed,
        success: solved_at.is_some(),
        solved_at,
        steps: traj.len() as u32,
        failed: traj.failed(),
    }
}

/// Per-skill rates and the NS count, from trial logs alone.
pub fn summarize_ns(trials: Vec<NsTrial>) -> NsReport {
    let mut tally: BTreeMap<AchievementId, (u32, u32)> = BTreeMap::new();
    for t in &trials {
        let e = tally.entry(t.skill).or_default();
        e.1 += 1;
        if t.success {
            e.0 += 1;
        }
    }
    let rates: BTreeMap<AchievementId, f64> =
        tally.into_iter().map(|(k, (s, n))| (k, if n == 0 { 0.0 } else { s as f64 / n as f64 })).collect();
    let ns = rates.values().filter(|r| **r >= NS_THRESHOLD).count() as u32;
    NsReport { rates, ns, trials }
}

pub fn summarize_ap(trials: Vec<ApTrial>) -> ApReport {
    let n = trials.len() as f64;
    let progress: Vec<f64> = trials.iter().map(|t| t.unlocked.len() as f64 / AchievementId::COUNT as f64).collect();
    let mean = if trials.is_empty() { 0.0 } else { progress.iter().sum::<f64>() / n };
    let stderr = if trials.len() < 2 {
        0.0
    } else {
        let var = progress.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    };
    ApReport { mean, stderr, trials }
}

pub fn eval_ns_with(factory: &dyn PolicyFactory, tasks: &[TaskSpec], trials: u32) -> NsReport {
    let id = factory.id();
    let jobs: Vec<(usize, u32)> = (0..tasks.len()).flat_map(|k| (0..trials).map(move |i| (k, i))).collect();
    let logs: Vec<NsTrial> = jobs
        .par_iter()
        .map(|&(k, i)| {
            let task = &tasks[k];
            let mut policy = factory.make();
            let traj = rollout(policy.as_mut(), &ns_setup(task, i), None, i, &id, None);
            ns_trial(task, &traj)
        })
        .collect();
    summarize_ns(logs)
}

pub fn eval_ns(factory: &dyn PolicyFactory) -> NsReport {
    eval_ns_with(factory, &task_specs(), NS_TRIALS)
}

pub fn ap_trial(traj: &Trajectory) -> ApTrial {
    ApTrial { seed: traj.seed, unlocked: traj.unlocked().clone(), steps: traj.len() as u32, failed: traj.failed() }
}

pub fn eval_ap_with(factory: &dyn PolicyFactory, episodes: u32, horizon: u32) -> ApReport {
    let id = factory.id();
    let logs: Vec<ApTrial> = (0..episodes)
        .into_par_iter()
        .map(|i| {
            let mut policy = factory.make();
            ap_trial(&rollout(policy.as_mut(), &ap_setup(i, horizon), None, i, &id, None))
        })
        .collect();
    summarize_ap(logs)
}

pub fn eval_ap(factory: &dyn PolicyFactory) -> ApReport {
    eval_ap_with(factory, AP_TRIALS, AP_HORIZON)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSettings {
    pub ns_trials: u32,
    pub ap_trials: u32,
    pub ap_horizon: u32,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self { ns_trials: NS_TRIALS, ap_trials: AP_TRIALS, ap_horizon: AP_HORIZON }
    }
}

pub fn evaluate_with(factory: &dyn PolicyFactory, settings: &EvalSettings) -> EvalReport {
    let ns = eval_ns_with(factory, &task_specs(), settings.ns_trials);
    let ap = eval_ap_with(factory, settings.ap_trials, settings.ap_horizon);
    let seeds = (0..settings.ns_trials.max(settings.ap_trials)).map(|i| EVAL_SEED_BASE + i as u64).collect();
    EvalReport { schema: EVALREPORT_SCHEMA.into(), policy_id: factory.id(), ns, ap, seeds }
}

pub fn evaluate(factory: &dyn PolicyFactory) -> EvalReport {
    evaluate_with(factory, &EvalSettings::default())
}

/// Table mirroring the NS/AP columns.
pub fn render_table(rows: &[(String, &EvalReport)]) -> String {
    let mut out = format!("{:<28} {:>4} {:>14}\n", "run", "NS", "AP (%)");
    for (name, r) in rows {
        out.push_str(&format!(
            "{:<28} {:>4} {:>8.1} ± {:<4.1}\n",
            name,
            r.ns.ns,
            100.0 * r.ap.mean,
            100.0 * r.ap.stderr
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::NoopPolicy;

    #[test]
    fn every_task_spec_is_consistent() {
        let specs = task_specs();
        assert_eq!(specs.len(), 22);
        for s in &specs {
            s.init.check().unwrap();
        }
    }

    #[test]
    fn threshold_is_inclusive() {
        let trials: Vec<NsTrial> = (0..10)
            .map(|i| NsTrial {
                skill: AchievementId::CollectWood,
                seed: 42 + i,
                success: i < 5,
                solved_at: None,
                steps: 1,
                failed: false,
            })
            .collect();
        assert_eq!(summarize_ns(trials).ns, 1);
    }

    #[test]
    fn noop_scores_nothing() {
        let ap = eval_ap_with(&NoopPolicy, 4, 30);
        assert_eq!(ap.mean, 0.0);
        let tasks: Vec<TaskSpec> = task_specs().into_iter().take(3).collect();
        assert_eq!(eval_ns_with(&NoopPolicy, &tasks, 2).ns, 0);
    }

    #[test]
    fn noiseless_expert_solves_every_task() {
        let expert = crate::policy::ScriptedExpertConfig::survival_default();
        let ns = eval_ns_with(&expert, &task_specs(), NS_TRIALS);
        let missed: Vec<_> = ns.rates.iter().filter(|(_, r)| **r < NS_THRESHOLD).collect();
        assert_eq!(ns.ns, 22, "{missed:?}");
    }
}
