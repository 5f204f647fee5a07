//! Hashed sparse features over (instruction, history, observation) text.

use std::collections::BTreeMap;
use std::hash::Hasher;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

use crate::craftworld::Action;

pub const DEFAULT_DIM: usize = 1 << 16;

const W_INSTR: f64 = 1.0;
const W_OBS: f64 = 0.5;
const W_HIST_TEXT: f64 = 0.2;
const W_HIST_ACTION: f64 = 1.0;
const W_LINE: f64 = 1.0;
const W_CROSS: f64 = 1.5;

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub dim: usize,
    pub idx: Vec<u32>,
    pub val: Vec<f64>,
}

impl FeatureVector {
    pub fn nnz(&self) -> usize {
        self.idx.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.idx.iter().map(|i| *i as usize).zip(self.val.iter().copied())
    }

    pub fn norm(&self) -> f64 {
        self.val.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Lowercase alphanumeric runs, lightly stemmed.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| stem(&t.to_ascii_lowercase()))
        .collect()
}

/// Strips "-ing" and plural "-s" so "collecting tools" meets "collect" and "tool".
fn stem(t: &str) -> String {
    if t.len() > 5 && t.ends_with("ing") {
        t[..t.len() - 3].to_string()
    } else if t.len() > 3 && t.ends_with('s') && !t.ends_with("ss") && !t.ends_with("us") {
        t[..t.len() - 1].to_string()
    } else {
        t.to_string()
    }
}

pub fn hash_feature(name: &str, dim: usize) -> u32 {
    let mut h = FnvHasher::default();
    h.write(name.as_bytes());
    (h.finish() % dim as u64) as u32
}

struct Builder {
    dim: usize,
    acc: BTreeMap<u32, f64>,
}

impl Builder {
    fn add(&mut self, name: &str, weight: f64) {
        let i = hash_feature(name, self.dim);
        let slot = self.acc.entry(i).or_insert(0.0);
        if weight > *slot {
            *slot = weight;
        }
    }

    fn ngrams(&mut self, prefix: &str, tokens: &[String], weight: f64, bigrams: bool) {
        for t in tokens {
            self.add(&format!("{prefix}{t}"), weight);
        }
        if bigrams {
            for w in tokens.windows(2) {
                self.add(&format!("{prefix}{}_{}", w[0], w[1]), weight);
            }
        }
    }

    fn finish(self) -> FeatureVector {
        let norm = self.acc.values().map(|v| v * v).sum::<f64>().sqrt();
        let (idx, val) = if norm > 0.0 {
            self.acc.into_iter().map(|(i, v)| (i, v / norm)).unzip()
        } else {
            (Vec::new(), Vec::new())
        };
        FeatureVector { dim: self.dim, idx, val }
    }
}

fn bucket(distance: u32) -> &'static str {
    match distance {
        0 | 1 => "adj",
        2 | 3 => "near",
        _ => "far",
    }
}

/// Structured readings of the rendered observation lines.
fn line_features(obs_text: &str) -> Vec<String> {
    let mut out = vec!["bias".to_string()];
    let mut section = "";
    for line in obs_text.lines() {
        if line.starts_with("Your status") {
            section = "status";
        } else if line.starts_with("Your inventory") {
            section = "inventory";
        } else if line.starts_with("You see") {
            section = "see";
        } else if let Some(rest) = line.strip_prefix("You are facing ") {
            let what = rest.split(" at your front").next().unwrap_or("");
            out.push(format!("face:{what}"));
            if let Some(dir) = rest.split('(').nth(1).and_then(|d| d.split(' ').next()) {
                out.push(format!("facedir:{dir}"));
            }
        } else if let Some(item) = line.strip_prefix("- ") {
            match section {
                "status" => {
                    let (name, value) = item.split_once(": ").unwrap_or((item, ""));
                    let v: u32 = value.split('/').next().and_then(|v| v.parse().ok()).unwrap_or(9);
                    if v < 3 {
                        out.push(format!("low:{name}"));
                    } else if v < 9 {
                        out.push(format!("short:{name}"));
                    }
                }
                "inventory" => {
                    let (name, count) = item.split_once(": ").unwrap_or((item, "0"));
                    out.push(format!("inv:{name}"));
                    let n: u32 = count.parse().unwrap_or(0);
                    out.push(format!("inv:{name}:{}", n.min(3)));
                }
                "see" => {
                    let parts: Vec<&str> = item.split(' ').collect();
                    if let [kind, dist, "steps", "to", "your", dir] = parts.as_slice() {
                        let d: u32 = dist.parse().unwrap_or(9);
                        out.push(format!("see:{kind}"));
                        out.push(format!("see:{kind}:{dir}"));
                        out.push(format!("see:{kind}:{dir}:{}", bucket(d)));
                    }
                }
                _ => {}
            }
        }
    }
    out
}

/// Features for one decision. `history` is oldest first.
pub fn featurize(instruction: &str, history: &[(String, Action)], obs_text: &str, dim: usize) -> FeatureVector {
    let mut b = Builder { dim, acc: BTreeMap::new() };
    let instr_tokens = tokenize(instruction);
    b.ngrams("i:", &instr_tokens, W_INSTR, true);
    b.ngrams("o:", &tokenize(obs_text), W_OBS, true);
    let n = history.len();
    for (k, (text, action)) in history.iter().enumerate() {
        let slot = n - k;
        b.ngrams(&format!("h{slot}:"), &tokenize(text), W_HIST_TEXT, false);
        b.add(&format!("ha{slot}:{}", action.name()), W_HIST_ACTION);
    }
    let mut lines = line_features(obs_text);
    if let Some((prev_text, prev_action)) = history.last() {
        lines.push(format!("prev:{}", prev_action.name()));
        if prev_text == obs_text {
            lines.push(format!("stuck:{}", prev_action.name()));
        }
    }
    let goal = instr_tokens.join("_");
    for f in &lines {
        b.add(f, W_LINE);
        b.add(&format!("x:{goal}|{f}"), W_CROSS);
    }
    b.finish()
}

/// Upper bound on `featurize` non-zeros: two n-grams per token, three line readings
/// per text line plus bias/prev/stuck, each line reading doubled by its goal cross.
pub fn feature_bound(instruction: &str, history: &[(String, Action)], obs_text: &str) -> usize {
    let tokens = tokenize(instruction).len()
        + tokenize(obs_text).len()
        + history.iter().map(|(t, _)| tokenize(t).len() + 1).sum::<usize>();
    2 * tokens + 2 * (3 * obs_text.lines().count() + 3)
}

#[cfg(test)]
mod tests {
    use super::*;

    const OBS: &str = "### Current Observation\nYour status:\n- health: 9/9\n- food: 2/9\n- drink: 9/9\n- energy: 9/9\n\nYour inventory:\n- wood: 4\n\nYou see:\n- tree 2 steps to your north-east\n\nYou are facing grass at your front (south direction)";

    #[test]
    fn lines_are_read() {
        let f = line_features(OBS);
        for want in ["low:food", "inv:wood", "inv:wood:3", "see:tree:north-east:near", "face:grass", "facedir:south"] {
            assert!(f.iter().any(|x| x == want), "{want} missing from {f:?}");
        }
    }

    #[test]
    fn deterministic_and_normalized() {
        let h = vec![("prev".to_string(), Action::Do)];
        let a = featurize("Collect wood", &h, OBS, DEFAULT_DIM);
        assert_eq!(a, featurize("Collect wood", &h, OBS, DEFAULT_DIM));
        assert!((a.norm() - 1.0).abs() < 1e-12);
        assert!(a.idx.windows(2).all(|w| w[0] < w[1]));
        assert!(a.nnz() <= feature_bound("Collect wood", &h, OBS));
    }
}
