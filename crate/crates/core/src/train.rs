//! Mini-batch training with per-epoch dev evaluation and best-dev checkpointing.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Label};
use crate::error::{Error, Result};
use crate::layers::{softmax, softmax_cross_entropy};
use crate::metrics::{compute_report, select_threshold, EvalReport, ScoredSample};
use crate::net::LivenessNet;
use crate::optim::{Optimizer, OptimizerConfig};
use crate::tensor::Tensor;

pub const DEFAULT_EPOCHS: usize = 50;
pub const DEFAULT_BATCH_SIZE: usize = 32;
const EVAL_CHUNK: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    /// Drives weight init, shuffling, dropout masks and augmentation.
    pub seed: u64,
    /// Mirror each training sample left-right with probability 1/2.
    pub flip: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH_SIZE,
            optimizer: OptimizerConfig::default(),
            seed: 0,
            flip: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.optimizer.lr.is_finite() && self.optimizer.lr > 0.0) {
            return Err(Error::Config(format!(
                "learning rate {} must be positive",
                self.optimizer.lr
            )));
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean train-mode cross-entropy over the epoch's batches.
    pub train_loss: f64,
    pub dev_acer: Option<f64>,
    /// Infer-mode cross-entropy on dev; breaks ties between equal dev ACERs.
    pub dev_loss: Option<f64>,
    pub dev_threshold: Option<f64>,
    pub best: bool,
}

impl fmt::Display for EpochLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "epoch={} train_loss={:.6}", self.epoch, self.train_loss)?;
        if let (Some(acer), Some(t), Some(loss)) = (self.dev_acer, self.dev_threshold, self.dev_loss) {
            write!(f, " dev_acer={acer:.6} dev_threshold={t} dev_loss={loss:.6}")?;
        }
        write!(f, " best={}", self.best)
    }
}

impl EpochLog {
    /// Parses a line written by `Display`.
    pub fn parse(line: &str) -> Result<Self> {
        let mut log = EpochLog {
            epoch: 0,
            train_loss: f64::NAN,
            dev_acer: None,
            dev_threshold: None,
            dev_loss: None,
            best: false,
        };
        let bad = || Error::Data(format!("bad training log line {line:?}"));
        for field in line.split_whitespace() {
            let (k, v) = field.split_once('=').ok_or_else(bad)?;
            match k {
                "epoch" => log.epoch = v.parse().map_err(|_| bad())?,
                "train_loss" => log.train_loss = v.parse().map_err(|_| bad())?,
                "dev_acer" => log.dev_acer = Some(v.parse().map_err(|_| bad())?),
                "dev_threshold" => log.dev_threshold = Some(v.parse().map_err(|_| bad())?),
                "dev_loss" => log.dev_loss = Some(v.parse().map_err(|_| bad())?),
                "best" => log.best = v.parse().map_err(|_| bad())?,
                _ => return Err(bad()),
            }
        }
        Ok(log)
    }
}

pub struct TrainOutcome {
    /// Best-dev checkpoint with its dev-selected threshold, or the final
    /// weights (threshold 0.5) when no dev set was given.
    pub best: LivenessNet,
    pub logs: Vec<EpochLog>,
}

/// `P(bona fide)` for every sample, in dataset order.
pub fn score_dataset(net: &LivenessNet, data: &Dataset) -> Result<Vec<ScoredSample>> {
    let mut out = Vec::with_capacity(data.len());
    let idx: Vec<usize> = (0..data.len()).collect();
    for chunk in idx.chunks(EVAL_CHUNK) {
        let scores = net.scores(&data.gather(chunk)?)?;
        for (&i, score) in chunk.iter().zip(scores) {
            out.push(ScoredSample::new(score.clamp(0.0, 1.0), data.attack_types[i])?);
        }
    }
    Ok(out)
}

/// Infer-mode mean cross-entropy over a dataset.
pub fn dataset_loss(net: &LivenessNet, data: &Dataset) -> Result<f64> {
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut total = 0.0;
    for chunk in idx.chunks(EVAL_CHUNK) {
        let logits = net.logits(&data.gather(chunk)?)?;
        let labels: Vec<usize> = chunk.iter().map(|&i| data.labels[i].class_index()).collect();
        let (loss, _) = softmax_cross_entropy(&logits, &labels)?;
        total += loss as f64 * chunk.len() as f64;
    }
    Ok(total / data.len() as f64)
}

/// Selects the threshold on `dev` and reports at it.
pub fn evaluate_dev(net: &LivenessNet, dev: &Dataset) -> Result<EvalReport> {
    let scored = score_dataset(net, dev)?;
    let t = select_threshold(&scored)?;
    compute_report(&scored, t)
}

/// `evaluate_dev` and `dataset_loss` from a single forward pass.
fn dev_pass(net: &LivenessNet, dev: &Dataset) -> Result<(EvalReport, f64)> {
    let bona = Label::BonaFide.class_index();
    let mut scored = Vec::with_capacity(dev.len());
    let mut total = 0.0;
    let idx: Vec<usize> = (0..dev.len()).collect();
    for chunk in idx.chunks(EVAL_CHUNK) {
        let logits = net.logits(&dev.gather(chunk)?)?;
        let labels: Vec<usize> = chunk.iter().map(|&i| dev.labels[i].class_index()).collect();
        let (loss, _) = softmax_cross_entropy(&logits, &labels)?;
        total += loss as f64 * chunk.len() as f64;
        let probs = softmax(&logits)?;
        for (&i, row) in chunk.iter().zip(probs.data().chunks_exact(net.arch().classes)) {
            scored.push(ScoredSample::new(
                f64::from(row[bona]).clamp(0.0, 1.0),
                dev.attack_types[i],
            )?);
        }
    }
    let report = compute_report(&scored, select_threshold(&scored)?)?;
    Ok((report, total / dev.len() as f64))
}

/// Reverses the last axis of the selected `[N, C, H, W]` rows.
pub fn mirror_rows(batch: &mut Tensor<f32>, rows: &[bool]) -> Result<()> {
    let (n, c, h, w) = batch.dims4()?;
    if rows.len() != n {
        return Err(Error::shape("mirror mask", n, rows.len()));
    }
    let plane = c * h * w;
    for (i, _) in rows.iter().enumerate().filter(|(_, &m)| m) {
        for line in batch.data_mut()[i * plane..(i + 1) * plane].chunks_exact_mut(w) {
            line.reverse();
        }
    }
    Ok(())
}

/// Trains `net` in place. `on_epoch` sees each log record as it is produced.
///
/// Batches of a single sample are skipped: batch statistics need two rows.
pub fn train(
    net: &mut LivenessNet,
    train_set: &Dataset,
    dev_set: Option<&Dataset>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.len() < 2 {
        return Err(Error::Data(format!(
            "training set has {} samples, need at least 2",
            train_set.len()
        )));
    }
    let mut optimizer = Optimizer::new(cfg.optimizer);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x000d_20b0u64);
    let mut flip_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x000f_11b0u64);
    let mut logs = Vec::with_capacity(cfg.epochs);
    let mut best: Option<((f64, f64), LivenessNet)> = None;

    for epoch in 0..cfg.epochs {
        let (mut loss_sum, mut seen) = (0.0f64, 0usize);
        for batch in train_set.batches(cfg.batch_size, cfg.seed, epoch as u64) {
            let mut batch = batch?;
            if batch.labels.len() < 2 {
                continue;
            }
            if cfg.flip {
                let mask: Vec<bool> = batch.labels.iter().map(|_| flip_rng.gen()).collect();
                mirror_rows(&mut batch.inputs, &mask)?;
            }
            let loss = net.train_step_gradients(&batch.inputs, &batch.labels, &mut dropout_rng)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite("loss".into()));
            }
            optimizer.step(net.params_and_grads_mut())?;
            loss_sum += loss as f64 * batch.labels.len() as f64;
            seen += batch.labels.len();
        }
        let mut log = EpochLog {
            epoch: epoch + 1,
            train_loss: loss_sum / seen as f64,
            dev_acer: None,
            dev_threshold: None,
            dev_loss: None,
            best: false,
        };
        if let Some(dev) = dev_set {
            let (report, loss) = dev_pass(net, dev)?;
            log.dev_acer = Some(report.acer);
            log.dev_threshold = Some(report.threshold);
            log.dev_loss = Some(loss);
            let key = (report.acer, loss);
            if best.as_ref().is_none_or(|(b, _)| key < *b) {
                let mut snapshot = net.clone();
                snapshot.threshold = report.threshold;
                best = Some((key, snapshot));
                log.best = true;
            }
        }
        on_epoch(&log);
        logs.push(log);
    }

    let best = match best {
        Some((_, b)) => b,
        None => net.clone(),
    };
    Ok(TrainOutcome { best, logs })
}
