//! Flat `key = value` run configuration for `liveness train`.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use liveness_core::train::DEFAULT_EPOCHS;
use liveness_core::{ArchConfig, InputScaling, OptimizerConfig, OptimizerKind, TrainConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub lr: f64,
    pub momentum: f64,
    pub flip: bool,
    pub conv_dropout: f64,
    pub head_dropout: f64,
    pub hidden_width: usize,
    pub input_scaling: InputScaling,
    pub data: Option<PathBuf>,
    pub out: PathBuf,
    /// Train on this many samples of the train split (half per class) and
    /// skip dev evaluation.
    pub overfit: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let arch = ArchConfig::default();
        let train = TrainConfig::default();
        Self {
            seed: 0,
            epochs: DEFAULT_EPOCHS,
            batch_size: train.batch_size,
            optimizer: train.optimizer.kind,
            lr: train.optimizer.lr,
            momentum: 0.9,
            flip: train.flip,
            conv_dropout: arch.conv_dropout,
            head_dropout: arch.head_dropout,
            hidden_width: arch.hidden_width,
            input_scaling: arch.input_scaling,
            data: None,
            out: PathBuf::from("model.lvw"),
            overfit: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow::anyhow!("bad value {value:?} for {key}: {e}"))
}

impl RunConfig {
    /// Applies `key = value` lines on top of `self`. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .with_context(|| format!("line {}: expected key = value", n + 1))?;
            self.set(key.trim(), value.trim())
                .with_context(|| format!("line {}", n + 1))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)
            .with_context(|| format!("config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => self.seed = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "optimizer" => self.optimizer = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "momentum" => self.momentum = parse(key, value)?,
            "flip" => self.flip = parse(key, value)?,
            "conv_dropout" => self.conv_dropout = parse(key, value)?,
            "head_dropout" => self.head_dropout = parse(key, value)?,
            "hidden_width" => self.hidden_width = parse(key, value)?,
            "input_scaling" => self.input_scaling = parse(key, value)?,
            "data" => self.data = Some(PathBuf::from(value)),
            "out" => self.out = PathBuf::from(value),
            "overfit" => self.overfit = Some(parse(key, value)?),
            other => bail!("unknown config key {other:?}"),
        }
        Ok(())
    }

    pub fn arch(&self) -> ArchConfig {
        ArchConfig {
            conv_dropout: self.conv_dropout,
            head_dropout: self.head_dropout,
            hidden_width: self.hidden_width,
            input_scaling: self.input_scaling,
            ..ArchConfig::default()
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let optimizer = match self.optimizer {
            OptimizerKind::Adam => OptimizerConfig::adam(self.lr),
            OptimizerKind::Sgd => OptimizerConfig::sgd(self.lr, self.momentum),
        };
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            optimizer,
            seed: self.seed,
            flip: self.flip,
        }
    }

    /// Checks ranges and that input paths exist before any work starts.
    pub fn validate(&self) -> Result<()> {
        self.train_config().validate()?;
        self.arch().validate()?;
        if self.overfit == Some(0) || self.overfit == Some(1) {
            bail!("overfit needs at least 2 samples");
        }
        let data = self
            .data
            .as_ref()
            .context("no data directory given (--data or data = ...)")?;
        if !data.is_dir() {
            bail!("data directory {} does not exist", data.display());
        }
        if let Some(parent) = self.out.parent().filter(|p| !p.as_os_str().is_empty()) {
            if !parent.is_dir() {
                bail!("output directory {} does not exist", parent.display());
            }
        }
        Ok(())
    }

    pub fn log_path(&self) -> PathBuf {
        let mut name = self.out.as_os_str().to_owned();
        name.push(".log");
        PathBuf::from(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_overrides_defaults() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("# comment\nseed = 7\n\nlr=0.01  # inline\noptimizer = sgd\nflip = false\n")
            .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.lr, 0.01);
        assert_eq!(cfg.optimizer, OptimizerKind::Sgd);
        assert!(!cfg.flip);
        assert_eq!(cfg.train_config().optimizer.momentum, 0.9);
        assert_eq!(cfg.batch_size, 32);
    }

    #[test]
    fn bad_lines_are_reported() {
        let mut cfg = RunConfig::default();
        let err = cfg.apply_text("seed = 1\nwhat\n").unwrap_err();
        assert!(format!("{err:#}").contains("line 2"));
        assert!(cfg.apply_text("colour = red").is_err());
        assert!(cfg.apply_text("epochs = many").is_err());
    }

    #[test]
    fn log_path_appends_suffix() {
        let cfg = RunConfig {
            out: PathBuf::from("runs/m.lvw"),
            ..RunConfig::default()
        };
        assert_eq!(cfg.log_path(), PathBuf::from("runs/m.lvw.log"));
    }

    #[test]
    fn zero_epochs_invalid() {
        let cfg = RunConfig {
            epochs: 0,
            data: Some(std::env::temp_dir()),
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
