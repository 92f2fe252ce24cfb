//! Run configuration: a TOML file, dotted `section.key=value` overrides, and
//! a seed fallback from the environment.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::eval::{EvalOptions, SWEEP_POINTS};
use crate::policy::PolicyConfig;
use crate::text::derive_seed;
use crate::training::{BcConfig, PpoConfig, TrainSettings, WarmupConfig};
use crate::worldgen::{IngestOptions, WorldSpec};

/// Environment variable consulted when neither the file nor the flags set a seed.
pub const SEED_ENV: &str = "SMARTRAG_LAB_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub iters: usize,
    /// Save a checkpoint every this many iterations; 0 keeps only the final one.
    pub checkpoint_every: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection { iters: 20, checkpoint_every: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    /// Answer-logit threshold; greedy decoding when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    pub hit_all_episodes: bool,
    pub sweep_points: usize,
    /// Also run both ablations during `eval`.
    pub ablations: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection { tau: None, hit_all_episodes: false, sweep_points: SWEEP_POINTS, ablations: false }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    /// World bundle directory; generated from `[world]` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub world: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warmup_checkpoint: Option<PathBuf>,
    /// Line-delimited QA file; with `corpus`, the world is ingested instead of generated.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qa: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
    /// Held-out world bundle for `transfer`; generated from `[transfer]` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transfer_world: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Worker threads; 0 means one per core.
    pub workers: usize,
    pub world: WorldSpec,
    /// World generated for `transfer` when no bundle is given.
    pub transfer: WorldSpec,
    pub env: EnvConfig,
    pub policy: PolicyConfig,
    pub warmup: WarmupConfig,
    pub bc: BcConfig,
    pub ppo: PpoConfig,
    pub train: TrainSection,
    pub eval: EvalSection,
    pub ingest: IngestOptions,
    pub paths: PathsSection,
}

/// Default fractions of the held-out transfer world. Its seed is derived from
/// the run seed and kept below 2^63 so it fits a TOML integer.
pub fn default_transfer_spec() -> WorldSpec {
    WorldSpec { p_known: 0.4, p_known_wrong: 0.15, p_covered: 0.6, p_ambiguous: 0.1, ..WorldSpec::default() }
}

impl RunConfig {
    pub fn new(seed: u64) -> Self {
        RunConfig {
            seed,
            out_dir: PathBuf::from("runs/latest"),
            workers: 0,
            world: WorldSpec { seed, ..WorldSpec::default() },
            transfer: WorldSpec { seed: derive_seed(seed, "transfer") >> 1, ..default_transfer_spec() },
            env: EnvConfig::default(),
            policy: PolicyConfig::default(),
            warmup: WarmupConfig::default(),
            bc: BcConfig::default(),
            ppo: PpoConfig::default(),
            train: TrainSection::default(),
            eval: EvalSection::default(),
            ingest: IngestOptions::default(),
            paths: PathsSection::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.transfer.validate()?;
        self.settings().validate()?;
        if self.paths.qa.is_some() != self.paths.corpus.is_some() {
            return Err(Error::Config("paths.qa and paths.corpus must be given together".into()));
        }
        if self.eval.sweep_points == 0 {
            return Err(Error::Config("eval.sweep_points must be positive".into()));
        }
        Ok(())
    }

    pub fn eval_options(&self) -> EvalOptions {
        EvalOptions { hit_all_episodes: self.eval.hit_all_episodes, seed: derive_seed(self.seed, "eval") }
    }

    pub fn settings(&self) -> TrainSettings {
        TrainSettings {
            seed: self.seed,
            env: self.env,
            policy: self.policy,
            warmup: self.warmup,
            bc: self.bc,
            ppo: self.ppo,
            iters: self.train.iters,
            eval: self.eval_options(),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    /// Every settable dotted key with its default value.
    pub fn keys() -> Vec<(String, String)> {
        let v = Value::try_from(RunConfig::new(0)).expect("config serializes");
        let mut out = Vec::new();
        flatten("", &v, &mut out);
        for k in [
            "paths.world",
            "paths.qa",
            "paths.corpus",
            "paths.checkpoint",
            "paths.warmup_checkpoint",
            "paths.transfer_world",
            "eval.tau",
        ] {
            out.push((k.to_owned(), "(unset)".to_owned()));
        }
        out.sort();
        out
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        other => out.push((prefix.to_owned(), other.to_string())),
    }
}

/// Parses an override value as a TOML literal, falling back to a bare string.
pub fn parse_value(raw: &str) -> Value {
    match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.to_owned())),
        Err(_) => Value::String(raw.to_owned()),
    }
}

/// Sets `key` (dotted) in `table`, creating sections as needed.
pub fn set_dotted(table: &mut Table, key: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("malformed key `{key}`")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("`{p}` in `{key}` is not a section")))?;
    }
    cur.insert(parts[parts.len() - 1].to_owned(), value);
    Ok(())
}

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Builds a config from an optional file, then overrides in order (last wins),
/// then the seed fallback. `env_seed` is the value of [`SEED_ENV`], if set.
pub fn resolve(file: Option<&Path>, overrides: &[(String, Value)], env_seed: Option<&str>) -> Result<RunConfig> {
    let mut table = match file {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?;
            text.parse::<Table>()
                .map_err(|e| Error::Config(format!("{}: {}", p.display(), e.to_string().trim())))?
        }
        None => Table::new(),
    };
    for (k, v) in overrides {
        set_dotted(&mut table, k, v.clone())?;
    }
    let seed = match table.get("seed") {
        Some(Value::Integer(s)) if *s >= 0 => *s as u64,
        Some(_) => return Err(Error::Config("field `seed` must be a non-negative integer".into())),
        None => match env_seed {
            Some(s) => s
                .trim()
                .parse::<u64>()
                .map_err(|_| Error::Config(format!("{SEED_ENV}={s:?} is not a non-negative integer")))?,
            None => {
                return Err(Error::Config(format!(
                    "missing required field `seed` (set it in the config, pass --seed, or export {SEED_ENV})"
                )))
            }
        },
    };
    let seed_value = i64::try_from(seed).map_err(|_| Error::Config("field `seed` is too large".into()))?;
    table.insert("seed".into(), Value::Integer(seed_value));

    let mut full = match Value::try_from(RunConfig::new(seed)).expect("config serializes") {
        Value::Table(t) => t,
        _ => unreachable!("config serializes to a table"),
    };
    merge(&mut full, table);
    let cfg: RunConfig = Value::Table(full)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string().trim().replace('\n', " ")))?;
    cfg.validate()?;
    Ok(cfg)
}
