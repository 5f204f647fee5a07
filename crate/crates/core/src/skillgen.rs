//! From trajectories to the skill dataset: change detection, 4-step segments, instruction
//! labels and validity checks.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{BufRead, Write as _};
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::craftworld::effects::{attribute, required_items, Snapshot};
use crate::craftworld::{render_text, AchievementId, Action};
use crate::explorer::{ExploreMode, Trajectory};
use crate::policy::llm::{ChatClient, ChatMessage, RELABEL_PROMPT};
use crate::store::{write_atomic, StoreError};

pub const SKILLDATA_SCHEMA: &str = "skilldata.v1";
pub const SEGMENT_LEN: usize = 4;
pub const TEMPLATE_LABELER: &str = "template";
pub const PROPOSAL_LABELER: &str = "proposal";
pub const LLM_LABELER: &str = "llm";

#[derive(Debug, thiserror::Error)]
pub enum SkillgenError {
    #[error("segment shows no attributable change")]
    NoChange,
    #[error("valid ratio of an empty record set")]
    Empty,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Store(#[from] StoreError),
}

// ---------------------------------------------------------------------------------------
// Lexicon and templates

#[derive(Deserialize)]
struct LexiconFile {
    foreign: Vec<String>,
    skills: BTreeMap<String, Vec<String>>,
}

struct Lexicon {
    foreign: Vec<Vec<String>>,
    /// (skill, groups of alternatives)
    patterns: Vec<(AchievementId, Vec<Vec<String>>)>,
}

fn groups(pattern: &str) -> Vec<Vec<String>> {
    pattern.split_whitespace().map(|g| g.split('|').map(str::to_string).collect()).collect()
}

fn lexicon() -> &'static Lexicon {
    static LEX: OnceLock<Lexicon> = OnceLock::new();
    LEX.get_or_init(|| {
        let file: LexiconFile = toml::from_str(include_str!("../data/lexicon.toml")).expect("lexicon parses");
        let mut patterns = Vec::new();
        for (name, pats) in &file.skills {
            let skill = AchievementId::from_name(name).unwrap_or_else(|| panic!("unknown skill {name} in lexicon"));
            for p in pats {
                patterns.push((skill, groups(p)));
            }
        }
        Lexicon { foreign: file.foreign.iter().map(|f| f.split('|').map(str::to_string).collect()).collect(), patterns }
    })
}

fn words(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !c.is_ascii_alphanumeric()).filter(|w| !w.is_empty()).map(str::to_ascii_lowercase).collect()
}

/// True when the text mentions something this world does not have (torches, smelting, ...).
pub fn mentions_foreign_concept(text: &str) -> bool {
    let w = words(text);
    lexicon().foreign.iter().any(|alts| alts.iter().any(|a| w.contains(a)))
}

/// Maps an instruction to its skill: the skill with the most specific matching pattern,
/// or `None` when nothing matches or two skills tie.
pub fn parse_skill(text: &str) -> Option<AchievementId> {
    let w = words(text);
    let mut best: BTreeMap<AchievementId, usize> = BTreeMap::new();
    for (skill, pattern) in &lexicon().patterns {
        if pattern.iter().all(|alts| alts.iter().any(|a| w.contains(a))) {
            let e = best.entry(*skill).or_insert(0);
            *e = (*e).max(pattern.len());
        }
    }
    let top = *best.values().max()?;
    let mut winners = best.iter().filter(|(_, n)| **n == top);
    let (skill, _) = winners.next()?;
    if winners.next().is_some() {
        return None;
    }
    Some(*skill)
}

fn templates() -> &'static BTreeMap<AchievementId, String> {
    static T: OnceLock<BTreeMap<AchievementId, String>> = OnceLock::new();
    T.get_or_init(|| {
        let raw: BTreeMap<String, String> = toml::from_str(include_str!("../data/templates.toml")).expect("templates parse");
        let map: BTreeMap<AchievementId, String> = raw
            .into_iter()
            .map(|(k, v)| (AchievementId::from_name(&k).unwrap_or_else(|| panic!("unknown skill {k}")), v))
            .collect();
        assert_eq!(map.len(), AchievementId::COUNT, "one template per skill");
        map
    })
}

pub fn template(skill: AchievementId) -> &'static str {
    &templates()[&skill]
}

// ---------------------------------------------------------------------------------------
// Change detection and segmentation

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeKind {
    StatusChange,
    InventoryChange,
    AchievementUnlock,
    FacingEntityChange,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeEvent {
    /// Index of the action that caused the change.
    pub t: u32,
    pub kinds: Vec<ChangeKind>,
    pub before: String,
    pub after: String,
}

pub fn summarize(s: &Snapshot) -> String {
    let st = s.status;
    let mut out = format!("health {}, food {}, drink {}, energy {}", st.health, st.food, st.drink, st.energy);
    let inv: Vec<String> = s.inventory.iter().map(|(i, n)| format!("{} {n}", i.name())).collect();
    if !inv.is_empty() {
        let _ = write!(out, "; inventory {}", inv.join(", "));
    }
    if let Some(f) = s.facing {
        let _ = write!(out, "; facing {}", f.name());
    }
    out
}

fn change_kinds(before: &Snapshot, after: &Snapshot) -> Vec<ChangeKind> {
    let mut kinds = Vec::new();
    if before.status != after.status {
        kinds.push(ChangeKind::StatusChange);
    }
    if before.inventory != after.inventory {
        kinds.push(ChangeKind::InventoryChange);
    }
    if before.unlocked != after.unlocked {
        kinds.push(ChangeKind::AchievementUnlock);
    }
    if before.facing_entity() != after.facing_entity() {
        kinds.push(ChangeKind::FacingEntityChange);
    }
    kinds
}

/// Snapshot before step `t` and after it.
fn transition(traj: &Trajectory, t: usize) -> (Snapshot, Snapshot) {
    (Snapshot::of(traj.obs(t)), Snapshot::of(traj.obs(t + 1)))
}

/// Every step whose observation differs from the next one, without merging.
pub fn raw_changes(traj: &Trajectory) -> Vec<ChangeEvent> {
    (0..traj.len())
        .filter_map(|t| {
            let (b, a) = transition(traj, t);
            let kinds = change_kinds(&b, &a);
            (!kinds.is_empty()).then(|| ChangeEvent { t: t as u32, kinds, before: summarize(&b), after: summarize(&a) })
        })
        .collect()
}

/// Runs of events with the same kinds at adjacent steps collapse onto the last step.
pub fn merge_adjacent(events: Vec<ChangeEvent>) -> Vec<ChangeEvent> {
    let mut out: Vec<ChangeEvent> = Vec::with_capacity(events.len());
    for ev in events {
        if let Some(last) = out.last() {
            if last.t + 1 == ev.t && last.kinds == ev.kinds {
                out.pop();
            }
        }
        out.push(ev);
    }
    out
}

pub fn detect_changes(traj: &Trajectory) -> Vec<ChangeEvent> {
    merge_adjacent(raw_changes(traj))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepText {
    pub obs: String,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub before: Snapshot,
    pub after: Snapshot,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub episode: u32,
    /// Step index of the final pair.
    pub end: u32,
    pub steps: Vec<StepText>,
    pub transition: Transition,
}

impl Segment {
    pub fn start(&self) -> u32 {
        self.end + 1 - self.steps.len() as u32
    }

    pub fn last_action(&self) -> Action {
        self.steps.last().expect("segments are non-empty").action
    }
}

/// The up-to-four pairs ending at step `end`.
pub fn window(traj: &Trajectory, end: usize) -> Segment {
    let start = (end + 1).saturating_sub(SEGMENT_LEN);
    let steps = (start..=end).map(|t| StepText { obs: render_text(&traj.steps[t].obs), action: traj.steps[t].action }).collect();
    let (before, after) = transition(traj, end);
    Segment { episode: traj.episode, end: end as u32, steps, transition: Transition { before, after } }
}

/// A change is informative when the action at that step demonstrably exercised a skill;
/// meter decay, wandering mobs and failed attempts are dropped.
pub fn is_informative(traj: &Trajectory, t: usize) -> bool {
    let (b, a) = transition(traj, t);
    attribute(&b, &a, traj.steps[t].action).is_some()
}

pub fn segment(traj: &Trajectory) -> Vec<Segment> {
    detect_changes(traj)
        .into_iter()
        .filter(|ev| is_informative(traj, ev.t as usize))
        .map(|ev| window(traj, ev.t as usize))
        .collect()
}

// ---------------------------------------------------------------------------------------
// Records, labeling and validation

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reason {
    Ok,
    InfeasibleInstruction,
    MisalignedTrajectory,
    UnparseableInstruction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityVerdict {
    pub valid: bool,
    pub reason: Reason,
}

impl ValidityVerdict {
    fn of(reason: Reason) -> Self {
        Self { valid: reason == Reason::Ok, reason }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Source {
    pub round: u32,
    pub episode: u32,
    pub t: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillRecord {
    pub schema: String,
    pub instruction: String,
    pub skill: Option<AchievementId>,
    pub steps: Vec<StepText>,
    pub source: Source,
    pub labeler: String,
    /// Agent state around the final action, kept so validity can be re-checked offline.
    pub transition: Transition,
    pub valid: bool,
    pub reason: Option<Reason>,
}

impl SkillRecord {
    fn new(instruction: String, skill: Option<AchievementId>, seg: Segment, round: u32, labeler: &str) -> Self {
        Self {
            schema: SKILLDATA_SCHEMA.into(),
            instruction,
            skill,
            source: Source { round, episode: seg.episode, t: seg.end },
            steps: seg.steps,
            labeler: labeler.into(),
            transition: seg.transition,
            valid: false,
            reason: None,
        }
    }

    pub fn with_verdict(mut self) -> Self {
        let v = validate(&self);
        self.valid = v.valid;
        self.reason = Some(v.reason);
        self
    }

    pub fn last_action(&self) -> Option<Action> {
        self.steps.last().map(|s| s.action)
    }
}

pub enum Labeler<'a> {
    Template,
    Llm(&'a ChatClient),
}

fn render_segment(seg: &Segment) -> String {
    let mut out = String::new();
    for (i, s) in seg.steps.iter().enumerate() {
        let _ = write!(out, "Turn {}:\n{}\nAction: {}\n\n", i + 1, s.obs, s.action);
    }
    out
}

pub fn label(seg: Segment, labeler: &Labeler<'_>, round: u32) -> Result<SkillRecord, SkillgenError> {
    let t = &seg.transition;
    let skill = attribute(&t.before, &t.after, seg.last_action());
    match labeler {
        Labeler::Template => {
            let skill = skill.ok_or(SkillgenError::NoChange)?;
            Ok(SkillRecord::new(template(skill).to_string(), Some(skill), seg, round, TEMPLATE_LABELER))
        }
        Labeler::Llm(client) => {
            let messages = [ChatMessage::system(RELABEL_PROMPT), ChatMessage::user(render_segment(&seg))];
            match client.complete(&messages) {
                Ok(reply) => {
                    let text = reply.lines().find(|l| !l.trim().is_empty()).unwrap_or("").trim().to_string();
                    let parsed = parse_skill(&text);
                    Ok(SkillRecord::new(text, parsed, seg, round, LLM_LABELER))
                }
                Err(e) => {
                    tracing::warn!(error = %e, "relabel request failed");
                    Ok(SkillRecord::new(String::new(), None, seg, round, LLM_LABELER))
                }
            }
        }
    }
}

pub fn validate(record: &SkillRecord) -> ValidityVerdict {
    if mentions_foreign_concept(&record.instruction) {
        return ValidityVerdict::of(Reason::InfeasibleInstruction);
    }
    let Some(skill) = record.skill else {
        return ValidityVerdict::of(Reason::UnparseableInstruction);
    };
    let before = &record.transition.before;
    if required_items(skill).iter().any(|i| !before.inventory.has(*i)) {
        return ValidityVerdict::of(Reason::InfeasibleInstruction);
    }
    let Some(action) = record.last_action() else {
        return ValidityVerdict::of(Reason::MisalignedTrajectory);
    };
    if attribute(before, &record.transition.after, action) != Some(skill) {
        return ValidityVerdict::of(Reason::MisalignedTrajectory);
    }
    ValidityVerdict::of(Reason::Ok)
}

/// The proposal-first record of an episode: the goal text paired with the window ending at
/// the first step that exercised the parsed skill, or the last window when none did.
pub fn proposal_record(traj: &Trajectory, round: u32) -> Option<SkillRecord> {
    if traj.is_empty() {
        return None;
    }
    let goal = traj.goal.clone().unwrap_or_default();
    let skill = parse_skill(&goal);
    let end = skill
        .and_then(|s| {
            (0..traj.len()).find(|&t| {
                let (b, a) = transition(traj, t);
                attribute(&b, &a, traj.steps[t].action) == Some(s)
            })
        })
        .unwrap_or(traj.len() - 1);
    Some(SkillRecord::new(goal, skill, window(traj, end), round, PROPOSAL_LABELER).with_verdict())
}

/// Labels and validates a whole round.
pub fn build_records(trajs: &[Trajectory], round: u32, mode: ExploreMode, labeler: &Labeler<'_>) -> Vec<SkillRecord> {
    let mut out = Vec::new();
    for traj in trajs {
        match mode {
            ExploreMode::ProposalFirst => out.extend(proposal_record(traj, round)),
            ExploreMode::ExploreFirst => {
                for seg in segment(traj) {
                    if let Ok(r) = label(seg, labeler, round) {
                        out.push(r.with_verdict());
                    }
                }
            }
        }
    }
    out
}

pub fn valid_ratio(records: &[SkillRecord]) -> Result<f64, SkillgenError> {
    if records.is_empty() {
        return Err(SkillgenError::Empty);
    }
    Ok(records.iter().filter(|r| r.valid).count() as f64 / records.len() as f64)
}

/// Number of (observation, action) pairs across records.
pub fn pair_count(records: &[SkillRecord]) -> usize {
    records.iter().map(|r| r.steps.len()).sum()
}

pub fn to_jsonl(records: &[SkillRecord]) -> Vec<u8> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r).expect("record serializes");
        buf.write_all(b"\n").expect("vec write");
    }
    buf
}

pub fn export_jsonl(records: &[SkillRecord], path: &Path) -> Result<String, SkillgenError> {
    let bytes = to_jsonl(records);
    write_atomic(path, &bytes)?;
    Ok(crate::store::sha256_hex(&bytes))
}

pub fn import_jsonl(path: &Path) -> Result<Vec<SkillRecord>, SkillgenError> {
    let f = std::fs::File::open(path).map_err(|e| StoreError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| StoreError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| SkillgenError::Parse { line: i + 1, message: e.to_string() })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_skill_examples() {
        assert_eq!(parse_skill("Collect iron"), Some(AchievementId::CollectIron));
        assert_eq!(parse_skill("Smelt raw beef into cooked beef using coal in the furnace"), None);
        assert_eq!(parse_skill(""), None);
        assert_eq!(parse_skill("make_stone_pickaxe"), Some(AchievementId::MakeStonePickaxe));
    }

    #[test]
    fn every_template_parses_to_its_skill() {
        for a in AchievementId::ALL {
            assert_eq!(parse_skill(template(a)), Some(a), "{}", template(a));
            assert!(!mentions_foreign_concept(template(a)));
        }
    }

    #[test]
    fn catalog_phrasings_parse() {
        for (text, a) in crate::explorer::feasible_catalog().iter().zip(AchievementId::ALL) {
            assert_eq!(parse_skill(text), Some(a), "{text}");
        }
        for text in crate::explorer::infeasible_catalog() {
            assert!(mentions_foreign_concept(text), "{text}");
        }
    }

    #[test]
    fn merge_keeps_the_last_of_a_run() {
        let ev = |t: u32, kinds: Vec<ChangeKind>| ChangeEvent { t, kinds, before: String::new(), after: String::new() };
        let inv = vec![ChangeKind::InventoryChange];
        let st = vec![ChangeKind::StatusChange];
        let merged = merge_adjacent(vec![ev(2, inv.clone()), ev(3, inv.clone()), ev(4, st.clone()), ev(6, st.clone())]);
        assert_eq!(merged.iter().map(|e| e.t).collect::<Vec<_>>(), vec![3, 4, 6]);
    }

    #[test]
    fn valid_ratio_needs_records() {
        assert!(matches!(valid_ratio(&[]), Err(SkillgenError::Empty)));
    }
}
