//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use ensat_core::eval::{PredictorConfig, SplitFractions};
use ensat_core::experiment::RunSettings;
use ensat_core::synth::SynthConfig;
use ensat_core::{MaskMode, ModelConfig, TrainConfig, Variant, WalkConfig};

/// Which synthetic process `synth` generates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    Periodic,
    Recency,
}

/// Every knob of every command. All fields have defaults; files and flags
/// override them by key.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub data: Option<PathBuf>,
    pub dataset: Option<String>,
    /// Number of windows the event stream is cut into.
    pub snapshots: usize,
    /// History length; defaults to all snapshots but the last.
    pub history: Option<usize>,
    pub binarize: bool,
    pub directed: bool,
    pub checkpoint: Option<PathBuf>,

    pub model: ModelConfig,
    pub walk: WalkConfig,
    pub train: TrainConfig,

    pub synth_kind: SynthKind,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("runs/default"),
            data: None,
            dataset: None,
            snapshots: 10,
            history: None,
            binarize: false,
            directed: false,
            checkpoint: None,
            model: ModelConfig::default(),
            walk: WalkConfig::default(),
            train: TrainConfig::default(),
            synth_kind: SynthKind::Periodic,
            synth: SynthConfig::default(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow!("invalid value `{value}` for `{key}`: {e}"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => bail!("invalid value `{value}` for `{key}`: expected true or false"),
    }
}

impl RunConfig {
    /// Sets one key. Unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        let value = value.trim();
        match key {
            "seed" => self.seed = parse(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "data" => self.data = (!value.is_empty()).then(|| PathBuf::from(value)),
            "dataset" => self.dataset = (!value.is_empty()).then(|| value.to_string()),
            "snapshots" => self.snapshots = parse(key, value)?,
            "history" => self.history = if value == "auto" { None } else { Some(parse(key, value)?) },
            "binarize" => self.binarize = parse_bool(key, value)?,
            "directed" => self.directed = parse_bool(key, value)?,
            "checkpoint" => self.checkpoint = (!value.is_empty()).then(|| PathBuf::from(value)),

            "dim" => {
                let d = parse(key, value)?;
                self.model.input_dim = d;
                self.model.local_dim = d;
                self.model.global_dim = d;
                self.model.embed_dim = d;
            }
            "input_dim" => self.model.input_dim = parse(key, value)?,
            "local_dim" => self.model.local_dim = parse(key, value)?,
            "global_dim" => self.model.global_dim = parse(key, value)?,
            "embed_dim" => self.model.embed_dim = parse(key, value)?,
            "heads" => self.model.heads = parse(key, value)?,
            "leaky_relu_slope" => self.model.leaky_relu_slope = parse(key, value)?,
            "position_embedding" => self.model.use_position_embedding = parse_bool(key, value)?,
            "mask" => self.model.mask = parse::<MaskMode>(key, value)?,
            "variant" => self.model.variant = parse::<Variant>(key, value)?,
            "one_hot" => self.model.one_hot = parse_bool(key, value)?,

            "walk_length" => self.walk.walk_length = parse(key, value)?,
            "walks_per_node" => self.walk.walks_per_node = parse(key, value)?,
            "context_window" => self.walk.context_window = parse(key, value)?,
            "negatives_per_positive" => self.walk.negatives_per_positive = parse(key, value)?,

            "epochs" => self.train.epochs = parse(key, value)?,
            "lr" => self.train.lr = parse(key, value)?,
            "negative_weight" => self.train.negative_weight = parse(key, value)?,
            "batch_size" => self.train.batch_size = parse(key, value)?,
            "patience" => self.train.patience = parse(key, value)?,
            "frozen_samples" => self.train.frozen_samples = parse_bool(key, value)?,
            "predictor_epochs" => self.train.predictor.epochs = parse(key, value)?,
            "predictor_lr" => self.train.predictor.lr = parse(key, value)?,
            "split_train" => self.train.split.train = parse(key, value)?,
            "split_val" => self.train.split.val = parse(key, value)?,

            "synth_kind" => {
                self.synth_kind = match value {
                    "periodic" => SynthKind::Periodic,
                    "recency" => SynthKind::Recency,
                    _ => bail!("invalid value `{value}` for `synth_kind`: expected periodic or recency"),
                }
            }
            "synth_nodes" => self.synth.num_nodes = parse(key, value)?,
            "synth_steps" => self.synth.steps = parse(key, value)?,
            "period" => self.synth.period = parse(key, value)?,
            "blocks" => self.synth.blocks = parse(key, value)?,
            "intra_prob" => self.synth.intra_prob = parse(key, value)?,
            "birth_rate" => self.synth.birth_rate = parse(key, value)?,
            "survival" => self.synth.survival = parse(key, value)?,
            _ => bail!("unknown configuration key `{key}`"),
        }
        Ok(())
    }

    /// Applies a `KEY=VALUE` assignment.
    pub fn apply(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| anyhow!("expected KEY=VALUE, got `{assignment}`"))?;
        self.set(k, v)
    }

    /// Applies a config file: one `key = value` per line, `#` comments.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            self.apply(line).with_context(|| format!("config line {}", i + 1))?;
        }
        Ok(())
    }

    /// Every key with its current value.
    pub fn entries(&self) -> BTreeMap<String, String> {
        let m = &self.model;
        let opt = |p: &Option<PathBuf>| p.as_ref().map_or(String::new(), |p| p.display().to_string());
        let mut e = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            e.insert(k.to_string(), v);
        };
        put("seed", self.seed.to_string());
        put("out", self.out.display().to_string());
        put("data", opt(&self.data));
        put("dataset", self.dataset.clone().unwrap_or_default());
        put("snapshots", self.snapshots.to_string());
        put("history", self.history.map_or("auto".into(), |h| h.to_string()));
        put("binarize", self.binarize.to_string());
        put("directed", self.directed.to_string());
        put("checkpoint", opt(&self.checkpoint));
        put("input_dim", m.input_dim.to_string());
        put("local_dim", m.local_dim.to_string());
        put("global_dim", m.global_dim.to_string());
        put("embed_dim", m.embed_dim.to_string());
        put("heads", m.heads.to_string());
        put("leaky_relu_slope", m.leaky_relu_slope.to_string());
        put("position_embedding", m.use_position_embedding.to_string());
        put("mask", m.mask.to_string());
        put("variant", m.variant.to_string());
        put("one_hot", m.one_hot.to_string());
        put("walk_length", self.walk.walk_length.to_string());
        put("walks_per_node", self.walk.walks_per_node.to_string());
        put("context_window", self.walk.context_window.to_string());
        put("negatives_per_positive", self.walk.negatives_per_positive.to_string());
        put("epochs", self.train.epochs.to_string());
        put("lr", self.train.lr.to_string());
        put("negative_weight", self.train.negative_weight.to_string());
        put("batch_size", self.train.batch_size.to_string());
        put("patience", self.train.patience.to_string());
        put("frozen_samples", self.train.frozen_samples.to_string());
        put("predictor_epochs", self.train.predictor.epochs.to_string());
        put("predictor_lr", self.train.predictor.lr.to_string());
        put("split_train", self.train.split.train.to_string());
        put("split_val", self.train.split.val.to_string());
        put(
            "synth_kind",
            match self.synth_kind {
                SynthKind::Periodic => "periodic",
                SynthKind::Recency => "recency",
            }
            .into(),
        );
        put("synth_nodes", self.synth.num_nodes.to_string());
        put("synth_steps", self.synth.steps.to_string());
        put("period", self.synth.period.to_string());
        put("blocks", self.synth.blocks.to_string());
        put("intra_prob", self.synth.intra_prob.to_string());
        put("birth_rate", self.synth.birth_rate.to_string());
        put("survival", self.synth.survival.to_string());
        e
    }

    /// The effective configuration as config-file text.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            writeln!(out, "{k} = {v}").unwrap();
        }
        out
    }

    /// Model, walk and training settings with the root seed applied.
    pub fn settings(&self) -> RunSettings {
        let mut train = self.train.clone();
        train.seed = self.seed;
        let mut walk = self.walk.clone();
        walk.seed = self.seed;
        RunSettings {
            model: self.model.clone(),
            walk,
            train,
        }
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            seed: self.seed,
            ..self.synth.clone()
        }
    }

    pub fn predictor(&self) -> PredictorConfig {
        self.train.predictor
    }

    pub fn split(&self) -> SplitFractions {
        self.train.split
    }
}
