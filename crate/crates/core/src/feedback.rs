//! Feedback on Bob's open-ended rollouts: a rule-based analyzer plus an optional
//! chat-endpoint composer.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::craftworld::{AchievementId, TaskType};
use crate::explorer::{rollout, EpisodeSetup, Trajectory};
use crate::evaluator::{ap_setup, AP_TRIALS};
use crate::policy::llm::{ChatClient, ChatMessage, FEEDBACK_PROMPT};
use crate::policy::PolicyFactory;
use crate::skillgen::{detect_changes, parse_skill};

pub const FEEDBACK_SCHEMA: &str = "feedback.v1";
pub const ADVICE_PREFIX: &str = "Focus on";
pub const MAX_TARGETS: usize = 3;
/// Success rate at or above which an achieved skill counts as stable.
pub const STABLE_RATE: f64 = 0.5;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FeedbackError {
    #[error("no rollouts to analyze")]
    EmptyInput,
    #[error("feedback field `{0}` is missing or empty")]
    MissingField(&'static str),
    #[error("advice must start with \"{ADVICE_PREFIX}\": {0:?}")]
    BadPrefix(String),
    #[error("unsupported feedback schema {0:?}")]
    Schema(String),
    #[error("reply is not a JSON object: {0}")]
    Json(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feedback {
    pub schema: String,
    pub iteration: u32,
    pub behavior_analysis: String,
    pub next_iteration_advice: String,
    pub target_skills: Vec<AchievementId>,
    /// Set when the chat endpoint failed and the rule-based composer was used instead.
    #[serde(default)]
    pub fallback: bool,
}

impl Feedback {
    pub fn new(iteration: u32, analysis: String, advice: String, targets: Vec<AchievementId>) -> Self {
        Self {
            schema: FEEDBACK_SCHEMA.into(),
            iteration,
            behavior_analysis: analysis,
            next_iteration_advice: advice,
            target_skills: targets,
            fallback: false,
        }
    }

    #[cfg(test)]
    pub(crate) fn for_test(targets: Vec<AchievementId>) -> Self {
        Self::new(0, "test".into(), "Focus on testing.".into(), targets)
    }

    pub fn validate(&self) -> Result<(), FeedbackError> {
        if self.schema != FEEDBACK_SCHEMA {
            return Err(FeedbackError::Schema(self.schema.clone()));
        }
        check_fields(&self.behavior_analysis, &self.next_iteration_advice)
    }

    /// Short content hash used to reference this feedback from trajectories.
    pub fn id(&self) -> String {
        let json = serde_json::to_string(self).expect("feedback serializes");
        crate::store::sha256_hex(json.as_bytes())[..16].to_string()
    }
}

fn check_fields(analysis: &str, advice: &str) -> Result<(), FeedbackError> {
    if analysis.trim().is_empty() {
        return Err(FeedbackError::MissingField("behavior_analysis"));
    }
    if advice.trim().is_empty() {
        return Err(FeedbackError::MissingField("next_iteration_advice"));
    }
    if !advice.starts_with(ADVICE_PREFIX) {
        return Err(FeedbackError::BadPrefix(advice.to_string()));
    }
    Ok(())
}

/// Per-skill unlock counts over a set of rollouts. Every rollout counts as one attempt
/// at every skill.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillHistogram {
    pub attempts: u32,
    pub successes: BTreeMap<AchievementId, u32>,
}

impl SkillHistogram {
    pub fn from_unlocks<'a>(unlocks: impl IntoIterator<Item = &'a BTreeSet<AchievementId>>) -> Result<Self, FeedbackError> {
        let mut successes: BTreeMap<AchievementId, u32> = AchievementId::ALL.iter().map(|a| (*a, 0)).collect();
        let mut attempts = 0;
        for set in unlocks {
            attempts += 1;
            for a in set {
                *successes.get_mut(a).expect("all skills present") += 1;
            }
        }
        if attempts == 0 {
            return Err(FeedbackError::EmptyInput);
        }
        Ok(Self { attempts, successes })
    }

    /// Builds a histogram from explicit rates over `attempts` rollouts (rates are rounded down).
    pub fn from_rates(attempts: u32, rates: &[(AchievementId, f64)]) -> Self {
        let mut successes: BTreeMap<AchievementId, u32> = AchievementId::ALL.iter().map(|a| (*a, 0)).collect();
        for (a, r) in rates {
            successes.insert(*a, ((r * attempts as f64).floor() as u32).min(attempts));
        }
        Self { attempts, successes }
    }

    pub fn count(&self, skill: AchievementId) -> u32 {
        self.successes.get(&skill).copied().unwrap_or(0)
    }

    pub fn rate(&self, skill: AchievementId) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.count(skill) as f64 / self.attempts as f64
        }
    }

    pub fn achieved(&self) -> BTreeSet<AchievementId> {
        AchievementId::ALL.iter().copied().filter(|a| self.count(*a) > 0).collect()
    }

    /// Unachieved skills whose prerequisite skills are all achieved.
    pub fn frontier(&self) -> BTreeSet<AchievementId> {
        AchievementId::ALL
            .iter()
            .copied()
            .filter(|a| self.count(*a) == 0 && a.prerequisites().iter().all(|p| self.count(*p) > 0))
            .collect()
    }

    /// Frontier plus achieved skills below the stable rate whose prerequisites are achieved.
    pub fn candidates(&self) -> BTreeSet<AchievementId> {
        let mut out = self.frontier();
        for a in self.achieved() {
            if self.rate(a) < STABLE_RATE && a.prerequisites().iter().all(|p| self.count(*p) > 0) {
                out.insert(a);
            }
        }
        out
    }
}

pub fn analyze(rollouts: &[Trajectory]) -> Result<SkillHistogram, FeedbackError> {
    SkillHistogram::from_unlocks(rollouts.iter().map(|t| t.unlocked()))
}

/// Open-ended episodes used as feedback material: same setup as the AP evaluation.
pub fn collect_rollouts(factory: &dyn PolicyFactory, n: u32, horizon: u32) -> Vec<Trajectory> {
    use rayon::prelude::*;
    let id = factory.id();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let setup: EpisodeSetup = ap_setup(i, horizon);
            let mut policy = factory.make();
            rollout(policy.as_mut(), &setup, None, i, &id, None)
        })
        .collect()
}

pub fn default_rollouts(factory: &dyn PolicyFactory, horizon: u32) -> Vec<Trajectory> {
    collect_rollouts(factory, AP_TRIALS, horizon)
}

/// Highest tier with an achieved skill (0 if none).
pub fn reached_tier(hist: &SkillHistogram) -> u8 {
    hist.achieved().iter().map(|a| a.tier()).max().unwrap_or(0)
}

fn ancestors(skill: AchievementId) -> BTreeSet<AchievementId> {
    let mut out = BTreeSet::new();
    let mut stack = skill.prerequisites().to_vec();
    while let Some(p) = stack.pop() {
        if out.insert(p) {
            stack.extend_from_slice(p.prerequisites());
        }
    }
    out
}

/// Skills some strictly higher-tier skill depends on, directly or not.
pub fn gateways() -> BTreeSet<AchievementId> {
    AchievementId::ALL
        .iter()
        .flat_map(|d| ancestors(*d).into_iter().filter(move |a| a.tier() < d.tier()))
        .collect()
}

/// Highest tier `t` such that every gateway below `t` is achieved.
pub fn gateway_tier(hist: &SkillHistogram) -> u8 {
    let open = gateways();
    (0..=3u8)
        .rev()
        .find(|t| open.iter().filter(|g| g.tier() < *t).all(|g| hist.count(*g) > 0))
        .unwrap_or(0)
}

/// The tier feedback may not fall below: reached, with every way up from lower tiers open.
pub fn floor_tier(hist: &SkillHistogram) -> u8 {
    reached_tier(hist).min(gateway_tier(hist))
}

/// The lowest frontier tier at or above the floor, else the highest frontier tier. With an
/// empty frontier, the same rule over the remaining (unstable) candidates.
pub fn focus_tier(hist: &SkillHistogram) -> Option<u8> {
    let floor = floor_tier(hist);
    let pick = |skills: BTreeSet<AchievementId>| {
        let tiers: BTreeSet<u8> = skills.iter().map(|a| a.tier()).collect();
        tiers.range(floor..).next().or_else(|| tiers.iter().next_back()).copied()
    };
    pick(hist.frontier()).or_else(|| pick(hist.candidates()))
}

/// Up to three candidates of the focus tier, lowest success rate first (frontier skills
/// have rate 0), ties in tech-tree order.
pub fn select_targets(hist: &SkillHistogram) -> Vec<AchievementId> {
    let Some(tier) = focus_tier(hist) else {
        return Vec::new();
    };
    let mut pool: Vec<AchievementId> = hist.candidates().into_iter().filter(|a| a.tier() == tier).collect();
    pool.sort_by(|a, b| hist.rate(*a).total_cmp(&hist.rate(*b)).then(a.cmp(b)));
    pool.truncate(MAX_TARGETS);
    pool
}

fn phrase(skill: AchievementId) -> String {
    skill.name().replace('_', " ")
}

fn join(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {}", init.join(", "), last),
    }
}

fn theme(task: TaskType) -> &'static str {
    match task {
        TaskType::Harvest => "growing and harvesting plants",
        TaskType::Status => "keeping food, water and energy topped up",
        TaskType::Wood => "gathering wood and crafting at a table",
        TaskType::Stone => "mining stone and upgrading to stone tools",
        TaskType::Iron => "preparing coal, iron and a furnace for iron tools",
        TaskType::Hunt => "fighting hostile creatures",
    }
}

fn tier_name(tier: u8) -> &'static str {
    match tier {
        0 => "basic survival",
        1 => "wood",
        2 => "stone",
        _ => "iron",
    }
}

pub fn generate_feedback(hist: &SkillHistogram, iteration: u32) -> Feedback {
    let targets = select_targets(hist);
    let achieved = hist.achieved();
    let mut analysis = String::new();
    if achieved.is_empty() {
        let _ = write!(analysis, "Across {} rollouts the agent unlocked no achievements.", hist.attempts);
    } else {
        let stable: Vec<String> =
            achieved.iter().filter(|a| hist.rate(**a) >= STABLE_RATE).map(|a| phrase(*a)).collect();
        let shaky: Vec<String> =
            achieved.iter().filter(|a| hist.rate(**a) < STABLE_RATE).map(|a| phrase(*a)).collect();
        let top = achieved.iter().map(|a| a.tier()).max().unwrap_or(0);
        let _ = write!(
            analysis,
            "Across {} rollouts the agent unlocked {} of 22 achievements, reaching the {} tier.",
            hist.attempts,
            achieved.len(),
            tier_name(top)
        );
        if !stable.is_empty() {
            let _ = write!(analysis, " Reliable: {}.", join(&stable));
        }
        if !shaky.is_empty() {
            let _ = write!(analysis, " Occasional: {}.", join(&shaky));
        }
    }
    let advice = if targets.is_empty() {
        format!("{ADVICE_PREFIX} repeating the full crafting chain until every step is reliable.")
    } else {
        let task = targets[0].task_type();
        let names: Vec<String> = targets.iter().map(|a| phrase(*a)).collect();
        format!("{ADVICE_PREFIX} {}, especially {}.", theme(task), join(&names))
    };
    Feedback::new(iteration, analysis, advice, targets)
}

/// Reduced rollout view for the chat prompt: only the steps where something changed.
pub fn reduced_view(rollouts: &[Trajectory]) -> String {
    let mut out = String::new();
    for (i, traj) in rollouts.iter().enumerate() {
        let _ = writeln!(out, "Episode {}:", i + 1);
        for ev in detect_changes(traj) {
            let action = traj.steps[ev.t as usize].action;
            let _ = writeln!(out, "- step {}: {} -> {}", ev.t, action, ev.after);
        }
    }
    out
}

#[derive(Deserialize)]
struct LlmFeedback {
    behavior_analysis: Option<String>,
    next_iteration_advice: Option<String>,
}

/// Parses and validates a chat reply; target skills come from the advice text when it names
/// a candidate skill, otherwise from the rule-based selection.
pub fn parse_llm_feedback(reply: &str, hist: &SkillHistogram, iteration: u32) -> Result<Feedback, FeedbackError> {
    let start = reply.find('{').ok_or_else(|| FeedbackError::Json(reply.to_string()))?;
    let end = reply.rfind('}').ok_or_else(|| FeedbackError::Json(reply.to_string()))?;
    let parsed: LlmFeedback = serde_json::from_str(&reply[start..=end]).map_err(|e| FeedbackError::Json(e.to_string()))?;
    let analysis = parsed.behavior_analysis.unwrap_or_default();
    let advice = parsed.next_iteration_advice.unwrap_or_default();
    check_fields(&analysis, &advice)?;
    let cands = hist.candidates();
    let targets = match parse_skill(&advice) {
        Some(s) if cands.contains(&s) => vec![s],
        _ => select_targets(hist),
    };
    Ok(Feedback::new(iteration, analysis, advice, targets))
}

/// Asks the chat endpoint for feedback, retrying invalid replies up to `budget` times before
/// falling back to the rule-based composer.
pub fn generate_feedback_llm(
    client: &ChatClient,
    hist: &SkillHistogram,
    rollouts: &[Trajectory],
    iteration: u32,
    budget: u32,
) -> Feedback {
    let messages = [
        ChatMessage::system(FEEDBACK_PROMPT),
        ChatMessage::user(reduced_view(rollouts)),
    ];
    for attempt in 0..budget.max(1) {
        match client.complete(&messages) {
            Ok(reply) => match parse_llm_feedback(&reply, hist, iteration) {
                Ok(f) => return f,
                Err(e) => tracing::warn!(attempt, error = %e, "invalid feedback reply"),
            },
            Err(e) => {
                tracing::warn!(attempt, error = %e, "feedback endpoint failed");
                break;
            }
        }
    }
    let mut fb = generate_feedback(hist, iteration);
    fb.fallback = true;
    fb
}

#[cfg(test)]
mod tests {
    use super::*;
    use AchievementId as A;

    fn set(items: &[A]) -> BTreeSet<A> {
        items.iter().copied().collect()
    }

    #[test]
    fn empty_rollouts_are_an_error() {
        assert_eq!(analyze(&[]), Err(FeedbackError::EmptyInput));
    }

    #[test]
    fn nothing_unlocked_gives_prerequisite_free_frontier() {
        let h = SkillHistogram::from_unlocks([&set(&[]), &set(&[])]).unwrap();
        let want: BTreeSet<A> = A::ALL.iter().copied().filter(|a| a.prerequisites().is_empty()).collect();
        assert_eq!(h.frontier(), want);
    }

    #[test]
    fn wood_mastered_targets_stone_tier() {
        let wood = set(&[A::CollectWood, A::PlaceTable, A::MakeWoodPickaxe, A::MakeWoodSword]);
        let h = SkillHistogram::from_unlocks([&wood, &wood]).unwrap();
        assert!(h.frontier().contains(&A::CollectStone) && h.frontier().contains(&A::CollectCoal));
        let fb = generate_feedback(&h, 1);
        fb.validate().unwrap();
        assert_eq!(fb.target_skills, vec![A::CollectStone, A::CollectCoal]);
        assert!(fb.next_iteration_advice.starts_with("Focus on"));
    }

    #[test]
    fn stone_mastered_targets_iron_tier() {
        let s = set(&[
            A::CollectWood,
            A::PlaceTable,
            A::MakeWoodPickaxe,
            A::CollectStone,
            A::CollectCoal,
            A::MakeStonePickaxe,
            A::MakeStoneSword,
            A::PlaceStone,
        ]);
        let h = SkillHistogram::from_unlocks([&s, &s, &s]).unwrap();
        let fb = generate_feedback(&h, 2);
        assert!(!fb.target_skills.is_empty());
        assert!(fb.target_skills.iter().all(|a| a.tier() == 3), "{:?}", fb.target_skills);
    }

    #[test]
    fn histogram_matches_recount() {
        let sets = [set(&[A::CollectWood]), set(&[A::CollectWood, A::EatCow]), set(&[])];
        let h = SkillHistogram::from_unlocks(sets.iter()).unwrap();
        for a in A::ALL {
            let n = sets.iter().filter(|s| s.contains(&a)).count() as u32;
            assert_eq!(h.count(a), n);
        }
        assert_eq!(h.attempts, 3);
    }

    #[test]
    fn llm_reply_validation() {
        let h = SkillHistogram::from_unlocks([&set(&[A::CollectWood])]).unwrap();
        let missing = r#"{"behavior_analysis": "chopped trees"}"#;
        assert_eq!(parse_llm_feedback(missing, &h, 1), Err(FeedbackError::MissingField("next_iteration_advice")));
        let wrong = r#"{"behavior_analysis": "x", "next_iteration_advice": "Try stone"}"#;
        assert!(matches!(parse_llm_feedback(wrong, &h, 1), Err(FeedbackError::BadPrefix(_))));
        let ok = r#"Sure: {"behavior_analysis": "x", "next_iteration_advice": "Focus on placing a table."}"#;
        let fb = parse_llm_feedback(ok, &h, 1).unwrap();
        assert_eq!(fb.target_skills, vec![A::PlaceTable]);
    }

    #[test]
    fn gateways_are_the_tool_chain() {
        let want = set(&[
            A::CollectWood,
            A::PlaceTable,
            A::MakeWoodPickaxe,
            A::CollectStone,
            A::CollectCoal,
            A::MakeStonePickaxe,
        ]);
        assert_eq!(gateways(), want);
    }

    #[test]
    fn furnace_without_stone_pickaxe_stays_on_stone_tier() {
        let s = set(&[A::CollectWood, A::PlaceTable, A::MakeWoodPickaxe, A::CollectStone, A::PlaceFurnace]);
        let h = SkillHistogram::from_unlocks([&s, &s]).unwrap();
        assert_eq!(reached_tier(&h), 3);
        assert_eq!(floor_tier(&h), 2);
        assert_eq!(select_targets(&h), vec![A::MakeStonePickaxe, A::MakeStoneSword, A::PlaceStone]);
    }

    #[test]
    fn unstable_skills_fill_the_focus_tier() {
        let wood = set(&[A::CollectWood, A::PlaceTable, A::DefeatZombie, A::DefeatSkeleton]);
        let only = set(&[A::CollectWood, A::DefeatZombie, A::DefeatSkeleton]);
        let h = SkillHistogram::from_unlocks([&wood, &only, &only]).unwrap();
        assert_eq!(focus_tier(&h), Some(1));
        assert_eq!(select_targets(&h), vec![A::MakeWoodPickaxe, A::MakeWoodSword, A::PlaceTable]);
    }
}
