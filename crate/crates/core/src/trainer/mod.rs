//! Behavior cloning of Bob: a linear softmax over hashed text features trained on the
//! skill dataset with the summed negative log-likelihood of the demonstrated actions.

mod features;

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use features::{featurize, feature_bound, hash_feature, tokenize, FeatureVector, DEFAULT_DIM};

use crate::craftworld::Action;
use crate::policy::llm::{render_system, render_turn, TemplateId};
use crate::policy::PolicyContext;
use crate::skillgen::SkillRecord;
use crate::store::{sha256_hex, write_atomic, StoreError};

const A: usize = Action::COUNT;
pub const MODEL_MAGIC: &[u8; 4] = b"SKFM";
pub const MODEL_VERSION: u32 = 1;
pub const SFT_SCHEMA: &str = "sft.v1";

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("no valid records in the selected rounds")]
    NoValidRecords,
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: u32, loss: f64 },
    #[error("final loss {final_loss} exceeds initial loss {initial}")]
    NoProgress { initial: f64, final_loss: f64 },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("feature dimension {got} does not match model dimension {want}")]
    Dimension { got: usize, want: usize },
    #[error("malformed model file: {0}")]
    Format(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataMode {
    Cumulative,
    NonCumulative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: u32,
    pub batch_size: usize,
    pub l2: f64,
    pub seed: u64,
    pub data_mode: DataMode,
    pub from_scratch: bool,
    pub dim: usize,
    pub history: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 10.0,
            epochs: 40,
            batch_size: 32,
            l2: 1e-5,
            seed: 0,
            data_mode: DataMode::Cumulative,
            from_scratch: true,
            dim: DEFAULT_DIM,
            history: crate::policy::DEFAULT_HISTORY,
        }
    }
}

impl TrainConfig {
    pub fn check(&self) -> Result<(), TrainError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::Config("learning rate must be positive".into()));
        }
        if self.batch_size == 0 || self.dim == 0 {
            return Err(TrainError::Config("batch size and dimension must be positive".into()));
        }
        if self.l2 < 0.0 || self.l2 * self.learning_rate >= 1.0 {
            return Err(TrainError::Config("l2 must satisfy 0 <= l2 * lr < 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainExample {
    pub features: FeatureVector,
    pub action: Action,
}

impl TrainExample {
    fn digest(&self) -> String {
        let mut bytes = Vec::with_capacity(self.features.nnz() * 12 + 1);
        bytes.push(self.action.index() as u8);
        for (i, v) in self.features.iter() {
            bytes.extend_from_slice(&(i as u32).to_le_bytes());
            bytes.extend_from_slice(&v.to_bits().to_le_bytes());
        }
        sha256_hex(&bytes)
    }
}

/// Order-independent hash of a dataset.
pub fn dataset_hash(examples: &[TrainExample]) -> String {
    let mut digests: Vec<String> = examples.iter().map(TrainExample::digest).collect();
    digests.sort();
    sha256_hex(digests.concat().as_bytes())
}

/// One example per (observation, action) pair; history comes from earlier steps of the
/// same segment.
pub fn examples_from_records(records: &[SkillRecord], history: usize, dim: usize) -> Vec<TrainExample> {
    let mut out = Vec::new();
    for r in records {
        for (j, step) in r.steps.iter().enumerate() {
            let from = j.saturating_sub(history);
            let hist: Vec<(String, Action)> = r.steps[from..j].iter().map(|s| (s.obs.clone(), s.action)).collect();
            out.push(TrainExample { features: featurize(&r.instruction, &hist, &step.obs, dim), action: step.action });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub iteration: u32,
    pub dataset_hash: String,
    pub examples: usize,
    pub config: TrainConfig,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub actions: Vec<String>,
}

impl Default for ModelMeta {
    fn default() -> Self {
        Self {
            iteration: 0,
            dataset_hash: String::new(),
            examples: 0,
            config: TrainConfig::default(),
            initial_loss: 0.0,
            final_loss: 0.0,
            actions: Action::ALL.iter().map(|a| a.name().to_string()).collect(),
        }
    }
}

/// Weights are stored feature-major: entry `i * 17 + a` is the weight of feature `i` for
/// action `a` in canonical action order.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSoftmaxModel {
    pub dim: usize,
    pub weights: Vec<f64>,
    pub meta: ModelMeta,
}

impl LinearSoftmaxModel {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, weights: vec![0.0; dim * A], meta: ModelMeta::default() }
    }

    pub fn get(&self, action: usize, feature: usize) -> f64 {
        self.weights[feature * A + action]
    }

    pub fn set(&mut self, action: usize, feature: usize, value: f64) {
        self.weights[feature * A + action] = value;
    }

    pub fn logits(&self, x: &FeatureVector) -> [f64; A] {
        let mut z = [0.0; A];
        for (i, v) in x.iter() {
            let col = &self.weights[i * A..(i + 1) * A];
            for a in 0..A {
                z[a] += col[a] * v;
            }
        }
        z
    }

    pub fn probs(&self, x: &FeatureVector) -> [f64; A] {
        softmax(self.logits(x))
    }

    /// Argmax with ties going to the earliest action in canonical order.
    pub fn predict(&self, x: &FeatureVector) -> Action {
        let z = self.logits(x);
        let mut best = 0;
        for a in 1..A {
            if z[a] > z[best] {
                best = a;
            }
        }
        Action::ALL[best]
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.is_finite())
    }

    pub fn l2_penalty(&self, l2: f64) -> f64 {
        0.5 * l2 * self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let meta = serde_json::to_vec(&self.meta).expect("meta serializes");
        let mut out = Vec::new();
        out.extend_from_slice(MODEL_MAGIC);
        for v in [MODEL_VERSION, self.dim as u32, A as u32, meta.len() as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&meta);
        let cols: Vec<usize> =
            (0..self.dim).filter(|i| self.weights[i * A..(i + 1) * A].iter().any(|w| *w != 0.0)).collect();
        out.extend_from_slice(&(cols.len() as u32).to_le_bytes());
        for i in cols {
            out.extend_from_slice(&(i as u32).to_le_bytes());
            for w in &self.weights[i * A..(i + 1) * A] {
                out.extend_from_slice(&w.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TrainError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MODEL_MAGIC {
            return Err(TrainError::Format("bad magic".into()));
        }
        let version = r.u32()?;
        let dim = r.u32()? as usize;
        let actions = r.u32()? as usize;
        if version != MODEL_VERSION || actions != A {
            return Err(TrainError::Format(format!("version {version}, {actions} actions")));
        }
        let meta_len = r.u32()? as usize;
        let meta: ModelMeta =
            serde_json::from_slice(r.take(meta_len)?).map_err(|e| TrainError::Format(e.to_string()))?;
        let ncols = r.u32()? as usize;
        let mut model = LinearSoftmaxModel { dim, weights: vec![0.0; dim * A], meta };
        for _ in 0..ncols {
            let i = r.u32()? as usize;
            if i >= dim {
                return Err(TrainError::Format(format!("column {i} out of range")));
            }
            for a in 0..A {
                model.weights[i * A + a] = f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
            }
        }
        if r.pos != bytes.len() {
            return Err(TrainError::Format("trailing bytes".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<String, TrainError> {
        let bytes = self.to_bytes();
        write_atomic(path, &bytes)?;
        Ok(sha256_hex(&bytes))
    }

    pub fn load(path: &Path) -> Result<Self, TrainError> {
        let bytes = std::fs::read(path).map_err(|e| StoreError::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], TrainError> {
        let s = self.bytes.get(self.pos..self.pos + n).ok_or_else(|| TrainError::Format("truncated".into()))?;
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, TrainError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

pub fn softmax(z: [f64; A]) -> [f64; A] {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p = [0.0; A];
    let mut s = 0.0;
    for a in 0..A {
        p[a] = (z[a] - m).exp();
        s += p[a];
    }
    for v in &mut p {
        *v /= s;
    }
    p
}

fn log_softmax_at(z: &[f64; A], a: usize) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    z[a] - lse
}

fn check_dims(model: &LinearSoftmaxModel, data: &[TrainExample]) -> Result<(), TrainError> {
    if data.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if let Some(e) = data.iter().find(|e| e.features.dim != model.dim) {
        return Err(TrainError::Dimension { got: e.features.dim, want: model.dim });
    }
    Ok(())
}

/// Summed negative log-likelihood of the demonstrated actions. The L2 term is separate,
/// see [`LinearSoftmaxModel::l2_penalty`].
pub fn sft_loss(model: &LinearSoftmaxModel, data: &[TrainExample]) -> Result<f64, TrainError> {
    check_dims(model, data)?;
    Ok(compensated_sum(data.iter().map(|e| -log_softmax_at(&model.logits(&e.features), e.action.index()))))
}

/// Neumaier summation.
fn compensated_sum(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for x in xs {
        let t = sum + x;
        c += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
        sum = t;
    }
    sum + c
}

/// Dense gradient of [`sft_loss`] in the model's weight layout.
pub fn grad(model: &LinearSoftmaxModel, data: &[TrainExample]) -> Result<Vec<f64>, TrainError> {
    check_dims(model, data)?;
    let mut g = vec![0.0; model.dim * A];
    for e in data {
        let p = model.probs(&e.features);
        let y = e.action.index();
        for (i, v) in e.features.iter() {
            for a in 0..A {
                let d = p[a] - if a == y { 1.0 } else { 0.0 };
                g[i * A + a] += d * v;
            }
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub epoch_losses: Vec<f64>,
    pub examples: usize,
    pub dataset_hash: String,
}

/// Mini-batch gradient descent on the batch-mean loss with L2 weight decay.
///
/// Examples are put into a canonical order (by content hash) and reshuffled each epoch
/// from the seed and the dataset hash, so record order does not matter. Decay is applied
/// lazily through a global scale factor.
pub fn train(
    cfg: &TrainConfig,
    data: &[TrainExample],
    prev: Option<&LinearSoftmaxModel>,
    iteration: u32,
) -> Result<(LinearSoftmaxModel, TrainReport), TrainError> {
    cfg.check()?;
    let mut model = match prev {
        Some(p) if !cfg.from_scratch => p.clone(),
        _ => LinearSoftmaxModel::zeros(cfg.dim),
    };
    check_dims(&model, data)?;
    let hash = dataset_hash(data);
    let mut keyed: Vec<(String, usize)> = data.iter().enumerate().map(|(i, e)| (e.digest(), i)).collect();
    keyed.sort();
    let canonical: Vec<&TrainExample> = keyed.iter().map(|(_, i)| &data[*i]).collect();
    let initial = sft_loss(&model, data)?;
    let mut rng = crate::seeds::rng(cfg.seed ^ crate::seeds::derive(0, &hash), "train");
    let mut order: Vec<usize> = (0..canonical.len()).collect();
    let mut scale = 1.0f64;
    let decay = 1.0 - cfg.learning_rate * cfg.l2;
    let mut epoch_losses = Vec::new();
    for epoch in 0..cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let mut g: BTreeMap<usize, [f64; A]> = BTreeMap::new();
            for &k in batch {
                let e = canonical[k];
                let mut z = model.logits(&e.features);
                for v in &mut z {
                    *v *= scale;
                }
                let p = softmax(z);
                let y = e.action.index();
                for (i, v) in e.features.iter() {
                    let col = g.entry(i).or_insert([0.0; A]);
                    for a in 0..A {
                        col[a] += (p[a] - if a == y { 1.0 } else { 0.0 }) * v;
                    }
                }
            }
            scale *= decay;
            let step = cfg.learning_rate / batch.len() as f64 / scale;
            for (i, col) in g {
                for (w, c) in model.weights[i * A..(i + 1) * A].iter_mut().zip(col) {
                    *w -= step * c;
                }
            }
            if scale < 1e-8 {
                model.weights.iter_mut().for_each(|w| *w *= scale);
                scale = 1.0;
            }
        }
        let mut snapshot = model.clone();
        snapshot.weights.iter_mut().for_each(|w| *w *= scale);
        let loss = sft_loss(&snapshot, data)?;
        if !loss.is_finite() || !snapshot.is_finite() {
            return Err(TrainError::Diverged { epoch, loss });
        }
        epoch_losses.push(loss);
    }
    model.weights.iter_mut().for_each(|w| *w *= scale);
    let final_loss = sft_loss(&model, data)?;
    if final_loss > initial {
        return Err(TrainError::NoProgress { initial, final_loss });
    }
    model.meta = ModelMeta {
        iteration,
        dataset_hash: hash.clone(),
        examples: data.len(),
        config: cfg.clone(),
        initial_loss: initial,
        final_loss,
        ..ModelMeta::default()
    };
    let report = TrainReport { initial_loss: initial, final_loss, epoch_losses, examples: data.len(), dataset_hash: hash };
    Ok((model, report))
}

/// Valid records of round `k` alone, or of rounds `0..=k` in cumulative mode.
pub fn assemble_dataset(rounds: &[Vec<SkillRecord>], k: usize, mode: DataMode) -> Result<Vec<SkillRecord>, TrainError> {
    let range = match mode {
        DataMode::Cumulative => 0..=k,
        DataMode::NonCumulative => k..=k,
    };
    let out: Vec<SkillRecord> = rounds
        .iter()
        .enumerate()
        .filter(|(i, _)| range.contains(i))
        .flat_map(|(_, r)| r.iter().filter(|rec| rec.valid).cloned())
        .collect();
    if out.is_empty() {
        return Err(TrainError::NoValidRecords);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SftLine {
    pub schema: String,
    pub prompt: String,
    pub completion: String,
}

/// Prompt/completion pairs rendered with the evaluation template.
pub fn sft_lines(records: &[SkillRecord], history: usize) -> Vec<SftLine> {
    let mut out = Vec::new();
    for r in records {
        for (j, step) in r.steps.iter().enumerate() {
            let mut ctx = PolicyContext::new(history).with_goal(Some(r.instruction.clone()));
            for s in &r.steps[j.saturating_sub(history)..j] {
                ctx.push(s.obs.clone(), s.action);
            }
            let system = render_system(TemplateId::Evaluate, &ctx);
            let prompt = format!("{system}\n{}", render_turn(&ctx, &step.obs));
            out.push(SftLine { schema: SFT_SCHEMA.into(), prompt, completion: step.action.name().into() });
        }
    }
    out
}

pub fn export_training_file(records: &[SkillRecord], history: usize, path: &Path) -> Result<usize, TrainError> {
    let lines = sft_lines(records, history);
    let mut buf = Vec::new();
    for l in &lines {
        serde_json::to_writer(&mut buf, l).expect("line serializes");
        buf.write_all(b"\n").expect("vec write");
    }
    write_atomic(path, &buf)?;
    Ok(lines.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(idx: &[u32], action: Action, dim: usize) -> TrainExample {
        let n = (idx.len() as f64).sqrt();
        TrainExample {
            features: FeatureVector { dim, idx: idx.to_vec(), val: vec![1.0 / n; idx.len()] },
            action,
        }
    }

    #[test]
    fn zero_model_loss_is_ln17_per_example() {
        let m = LinearSoftmaxModel::zeros(8);
        let one = [ex(&[1], Action::Do, 8)];
        assert!((sft_loss(&m, &one).unwrap() - 17f64.ln()).abs() < 1e-12);
        let two = [ex(&[1], Action::Do, 8), ex(&[1], Action::Do, 8)];
        assert_eq!(sft_loss(&m, &two).unwrap(), 2.0 * sft_loss(&m, &one).unwrap());
        assert!(matches!(sft_loss(&m, &[]), Err(TrainError::EmptyDataset)));
    }

    #[test]
    fn zero_model_predicts_first_action() {
        let m = LinearSoftmaxModel::zeros(8);
        assert_eq!(m.predict(&ex(&[2, 3], Action::Do, 8).features), Action::MoveLeft);
    }

    #[test]
    fn model_bytes_round_trip() {
        let mut m = LinearSoftmaxModel::zeros(16);
        m.set(3, 7, 0.25);
        m.set(16, 2, -1.5);
        m.meta.iteration = 2;
        let back = LinearSoftmaxModel::from_bytes(&m.to_bytes()).unwrap();
        assert_eq!(back, m);
        assert!(LinearSoftmaxModel::from_bytes(b"nope").is_err());
    }

    #[test]
    fn training_is_deterministic_and_reduces_loss() {
        let data: Vec<TrainExample> =
            (0..40).map(|i| ex(&[i % 5, 5 + i % 3], if i % 5 < 2 { Action::Do } else { Action::Sleep }, 16)).collect();
        let cfg = TrainConfig { dim: 16, epochs: 5, ..Default::default() };
        let (a, ra) = train(&cfg, &data, None, 0).unwrap();
        let (b, _) = train(&cfg, &data, None, 0).unwrap();
        assert_eq!(a, b);
        assert!(ra.final_loss < ra.initial_loss);
    }
}
