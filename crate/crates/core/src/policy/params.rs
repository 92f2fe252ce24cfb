//! Flat parameter storage and the checkpoint format.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::candidates::CANDIDATE_FEATURES;
use crate::policy::features::MIN_DIM;
use crate::policy::templates::TEMPLATE_COUNT;

pub const CHECKPOINT_FORMAT: &str = "raglab-policy/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    /// Feature dimension D.
    pub dim: usize,
    pub hash_seed: u64,
    /// Width of the optional tanh layer; 0 keeps the heads linear in the features.
    pub hidden: usize,
    /// Seed for the hidden layer's initial weights.
    pub init_seed: u64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            dim: 1024,
            hash_seed: 0x5eed_0f_da7a_u64,
            hidden: 0,
            init_seed: 17,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim < MIN_DIM {
            return Err(Error::Config(format!("policy.dim must be at least {MIN_DIM}")));
        }
        Ok(())
    }
}

/// Offsets of each block inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamLayout {
    pub dim: usize,
    pub hidden: usize,
    /// Width of the representation the heads read (D, or H with a hidden layer).
    pub rep: usize,
    pub trunk_w: usize,
    pub trunk_b: usize,
    pub decision: usize,
    pub rewrite: usize,
    pub answer: usize,
    pub value: usize,
    pub total: usize,
}

impl ParamLayout {
    pub fn new(dim: usize, hidden: usize) -> Self {
        let rep = if hidden > 0 { hidden } else { dim };
        let trunk_w = 0;
        let trunk_b = trunk_w + hidden * dim;
        let decision = trunk_b + hidden;
        let rewrite = decision + 2 * rep;
        let answer = rewrite + TEMPLATE_COUNT * rep;
        let value = answer + CANDIDATE_FEATURES + rep;
        let total = value + rep;
        ParamLayout { dim, hidden, rep, trunk_w, trunk_b, decision, rewrite, answer, value, total }
    }

    /// `(name, shape, offset)` in checkpoint order.
    pub fn blocks(&self) -> Vec<(&'static str, Vec<usize>, usize)> {
        let mut v = Vec::new();
        if self.hidden > 0 {
            v.push(("trunk_w", vec![self.hidden, self.dim], self.trunk_w));
            v.push(("trunk_b", vec![self.hidden], self.trunk_b));
        }
        v.push(("decision", vec![2, self.rep], self.decision));
        v.push(("rewrite", vec![TEMPLATE_COUNT, self.rep], self.rewrite));
        v.push(("answer", vec![CANDIDATE_FEATURES + self.rep], self.answer));
        v.push(("value", vec![self.rep], self.value));
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub config: PolicyConfig,
    pub layout: ParamLayout,
    pub values: Vec<f64>,
}

impl PolicyParams {
    /// All heads zero; a hidden layer, if any, gets small seeded uniform weights.
    pub fn init(config: PolicyConfig) -> Self {
        let layout = ParamLayout::new(config.dim, config.hidden);
        let mut values = vec![0.0; layout.total];
        if layout.hidden > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
            let scale = 1.0 / (config.dim as f64).sqrt();
            for v in &mut values[layout.trunk_w..layout.trunk_b] {
                *v = rng.gen_range(-scale..scale);
            }
        }
        PolicyParams { config, layout, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn decision_row(&self, kind: usize) -> &[f64] {
        let o = self.layout.decision + kind * self.layout.rep;
        &self.values[o..o + self.layout.rep]
    }

    pub fn rewrite_row(&self, t: usize) -> &[f64] {
        let o = self.layout.rewrite + t * self.layout.rep;
        &self.values[o..o + self.layout.rep]
    }

    pub fn answer_weights(&self) -> &[f64] {
        &self.values[self.layout.answer..self.layout.value]
    }

    pub fn value_weights(&self) -> &[f64] {
        &self.values[self.layout.value..self.layout.total]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Copies the answer-head block from `other`.
    pub fn with_answer_head_of(&self, other: &PolicyParams) -> Result<PolicyParams> {
        if self.layout != other.layout || self.config != other.config {
            return Err(Error::Config("checkpoints do not share a configuration".into()));
        }
        let mut out = self.clone();
        let r = self.layout.answer..self.layout.value;
        out.values[r.clone()].copy_from_slice(&other.values[r]);
        Ok(out)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_owned(),
            config: self.config,
            dims: CheckpointDims {
                dim: self.layout.dim,
                hidden: self.layout.hidden,
                templates: TEMPLATE_COUNT,
                candidate_features: CANDIDATE_FEATURES,
            },
            blocks: self
                .layout
                .blocks()
                .into_iter()
                .map(|(name, shape, offset)| {
                    let n: usize = shape.iter().product();
                    WeightBlock {
                        name: name.to_owned(),
                        shape,
                        values: self.values[offset..offset + n].to_vec(),
                    }
                })
                .collect(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Config(format!("unsupported checkpoint format {}", ck.format)));
        }
        ck.config.validate()?;
        let layout = ParamLayout::new(ck.config.dim, ck.config.hidden);
        if ck.dims.dim != layout.dim
            || ck.dims.hidden != layout.hidden
            || ck.dims.templates != TEMPLATE_COUNT
            || ck.dims.candidate_features != CANDIDATE_FEATURES
        {
            return Err(Error::Config("checkpoint dimensions disagree with its config".into()));
        }
        let expected = layout.blocks();
        if expected.len() != ck.blocks.len() {
            return Err(Error::Config("checkpoint block count mismatch".into()));
        }
        let mut values = vec![0.0; layout.total];
        for ((name, shape, offset), block) in expected.into_iter().zip(&ck.blocks) {
            let n: usize = shape.iter().product();
            if block.name != name || block.shape != shape || block.values.len() != n {
                return Err(Error::Config(format!("checkpoint block {} is malformed", block.name)));
            }
            values[offset..offset + n].copy_from_slice(&block.values);
        }
        let params = PolicyParams { config: ck.config, layout, values };
        if !params.is_finite() {
            return Err(Error::Numeric("checkpoint contains non-finite weights".into()));
        }
        Ok(params)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_checkpoint())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_checkpoint(&serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub config: PolicyConfig,
    pub dims: CheckpointDims,
    pub blocks: Vec<WeightBlock>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointDims {
    pub dim: usize,
    pub hidden: usize,
    pub templates: usize,
    pub candidate_features: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightBlock {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}
