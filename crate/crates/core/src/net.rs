//! The liveness network:
//!
//! ```text
//! [Conv3x3(16), BN, ReLU] ×4 → MaxPool 2×2 → Dropout
//! [Conv3x3(32), BN, ReLU] ×4 → MaxPool 2×2 → Dropout
//! Flatten (latent vector, 8·8·32 = 2048)
//! Linear(2048 → hidden) → ReLU → BN → Dropout → Linear(hidden → 2) → Softmax
//! ```
//!
//! With the default `hidden_width = 64` the trainable parameter count is
//! 171,570.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};
use crate::layers::{
    softmax, softmax_cross_entropy, BatchNorm, Conv3x3, Dropout, Layer, Linear, MaxPool2x2, Mode, Relu,
};
use crate::tensor::{Real, Tensor};

/// Decision threshold on `P(bona fide)` used when none was selected on a
/// development split.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// How 8-bit pixels are mapped to network inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputScaling {
    /// `v / 255`, inputs in `[0, 1]`.
    Unit,
    /// Raw `0..=255` values.
    Raw,
}

impl InputScaling {
    pub fn factor(self) -> f32 {
        match self {
            InputScaling::Unit => 1.0 / 255.0,
            InputScaling::Raw => 1.0,
        }
    }
}

impl std::str::FromStr for InputScaling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit" => Ok(Self::Unit),
            "raw" => Ok(Self::Raw),
            other => Err(Error::Config(format!("unknown input scaling {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub input_size: usize,
    pub input_channels: usize,
    pub block1_channels: usize,
    pub block1_convs: usize,
    pub block2_channels: usize,
    pub block2_convs: usize,
    pub hidden_width: usize,
    pub classes: usize,
    pub conv_dropout: f64,
    pub head_dropout: f64,
    pub bn_epsilon: f64,
    pub bn_momentum: f64,
    pub input_scaling: InputScaling,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            input_size: 32,
            input_channels: 3,
            block1_channels: 16,
            block1_convs: 4,
            block2_channels: 32,
            block2_convs: 4,
            hidden_width: 64,
            classes: 2,
            conv_dropout: 0.25,
            head_dropout: 0.5,
            bn_epsilon: 1e-5,
            bn_momentum: 0.9,
            input_scaling: InputScaling::Unit,
        }
    }
}

impl ArchConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("input_size", self.input_size),
            ("input_channels", self.input_channels),
            ("block1_channels", self.block1_channels),
            ("block1_convs", self.block1_convs),
            ("block2_channels", self.block2_channels),
            ("block2_convs", self.block2_convs),
            ("hidden_width", self.hidden_width),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.classes < 2 {
            return Err(Error::Config("classes must be at least 2".into()));
        }
        if !self.input_size.is_multiple_of(4) {
            return Err(Error::Config(format!(
                "input size {} gives an odd intermediate spatial size before pooling",
                self.input_size
            )));
        }
        for (name, rate) in [("conv_dropout", self.conv_dropout), ("head_dropout", self.head_dropout)] {
            if !(0.0..1.0).contains(&rate) {
                return Err(Error::Config(format!("{name} {rate} outside [0, 1)")));
            }
        }
        if self.bn_epsilon.is_nan() || self.bn_epsilon <= 0.0 || !(0.0..1.0).contains(&self.bn_momentum) {
            return Err(Error::Config("batchnorm epsilon/momentum out of range".into()));
        }
        Ok(())
    }

    /// Width of the flattened conv output.
    pub fn latent_width(&self) -> usize {
        let side = self.input_size / 4;
        side * side * self.block2_channels
    }

    pub fn input_shape(&self) -> [usize; 3] {
        [self.input_channels, self.input_size, self.input_size]
    }
}

#[derive(Clone, Debug)]
pub struct NamedLayer<T: Real> {
    pub name: String,
    pub layer: Layer<T>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub label: Label,
    /// `P(bona fide)`.
    pub score: f64,
}

/// Layer stack plus the architecture it was built from and the decision
/// threshold that travels with saved weights.
#[derive(Clone, Debug)]
pub struct LivenessNet<T: Real = f32> {
    arch: ArchConfig,
    layers: Vec<NamedLayer<T>>,
    /// Index of the first head layer; everything before it produces the
    /// latent vector.
    head_start: usize,
    pub threshold: f64,
}

impl<T: Real> LivenessNet<T> {
    /// Builds the network with seeded Kaiming-uniform init.
    pub fn build(arch: ArchConfig, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::new();
        let mut push = |name: String, layer: Layer<T>| layers.push(NamedLayer { name, layer });

        let mut channels = arch.input_channels;
        let blocks = [
            (arch.block1_channels, arch.block1_convs),
            (arch.block2_channels, arch.block2_convs),
        ];
        for (b, (width, convs)) in blocks.into_iter().enumerate() {
            let block = b + 1;
            for i in 0..convs {
                push(
                    format!("block{block}.conv{i}"),
                    Layer::Conv(Conv3x3::init(channels, width, &mut rng)),
                );
                push(
                    format!("block{block}.bn{i}"),
                    Layer::BatchNorm(BatchNorm::new(width, arch.bn_epsilon, arch.bn_momentum)),
                );
                push(format!("block{block}.relu{i}"), Layer::Relu(Relu::new()));
                channels = width;
            }
            push(format!("block{block}.pool"), Layer::MaxPool(MaxPool2x2::new()));
            push(
                format!("block{block}.dropout"),
                Layer::Dropout(Dropout::new(arch.conv_dropout)?),
            );
        }
        push("flatten".into(), Layer::Flatten(None));
        let head_start = layers.len();
        let mut push = |name: &str, layer: Layer<T>| {
            layers.push(NamedLayer {
                name: name.to_string(),
                layer,
            })
        };
        push(
            "head.fc0",
            Layer::Linear(Linear::init(arch.latent_width(), arch.hidden_width, &mut rng)),
        );
        push("head.relu", Layer::Relu(Relu::new()));
        push(
            "head.bn",
            Layer::BatchNorm(BatchNorm::new(arch.hidden_width, arch.bn_epsilon, arch.bn_momentum)),
        );
        push("head.dropout", Layer::Dropout(Dropout::new(arch.head_dropout)?));
        push(
            "head.fc1",
            Layer::Linear(Linear::init(arch.hidden_width, arch.classes, &mut rng)),
        );

        Ok(Self {
            arch,
            layers,
            head_start,
            threshold: DEFAULT_THRESHOLD,
        })
    }

    pub fn arch(&self) -> &ArchConfig {
        &self.arch
    }

    pub fn layers(&self) -> &[NamedLayer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [NamedLayer<T>] {
        &mut self.layers
    }

    /// Trainable scalars; BatchNorm running statistics are not counted.
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.layer.param_count()).sum()
    }

    /// `(name, tensor)` for every parameter and buffer, in file order.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        for l in &self.layers {
            for (suffix, t) in l.layer.params().into_iter().chain(l.layer.buffers()) {
                out.push((format!("{}.{suffix}", l.name), t));
            }
        }
        out
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            let name = &l.name;
            for (suffix, t) in l.layer.tensors_mut() {
                out.push((format!("{name}.{suffix}"), t));
            }
        }
        out
    }

    /// Every trainable tensor with its latest gradient, in a stable order.
    pub fn params_and_grads_mut(&mut self) -> Vec<(&mut Tensor<T>, &Tensor<T>)> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.layer.params_and_grads_mut())
            .collect()
    }

    fn check_batch(&self, batch: &Tensor<T>) -> Result<()> {
        let [c, h, w] = self.arch.input_shape();
        match batch.shape() {
            [_, bc, bh, bw] if (*bc, *bh, *bw) == (c, h, w) => Ok(()),
            other => Err(Error::shape("network input", format!("[N, {c}, {h}, {w}]"), other)),
        }
    }

    /// Logits for a batch, caching activations for [`Self::backward`].
    /// Errors name the first layer that produced a non-finite value.
    pub fn forward(&mut self, batch: &Tensor<T>, mode: Mode, rng: &mut ChaCha8Rng) -> Result<Tensor<T>> {
        self.check_batch(batch)?;
        let mut h = batch.clone();
        for l in &mut self.layers {
            h = l.layer.forward(&h, mode, rng).map_err(|e| name_error(e, &l.name))?;
            h.ensure_finite(&l.name)?;
        }
        Ok(h)
    }

    pub fn backward(&mut self, grad_logits: &Tensor<T>) -> Result<()> {
        let mut g = grad_logits.clone();
        for l in self.layers.iter_mut().rev() {
            g = l.layer.backward(&g).map_err(|e| name_error(e, &l.name))?;
        }
        Ok(())
    }

    /// Forward + backward on one batch; returns the mean cross-entropy.
    pub fn train_step_gradients(&mut self, batch: &Tensor<T>, labels: &[usize], rng: &mut ChaCha8Rng) -> Result<T> {
        let logits = self.forward(batch, Mode::Train, rng)?;
        let (loss, grad) = softmax_cross_entropy(&logits, labels)?;
        self.backward(&grad)?;
        Ok(loss)
    }

    fn run_infer(&self, layers: &[NamedLayer<T>], x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut h = x.clone();
        for l in layers {
            h = l.layer.infer(&h).map_err(|e| name_error(e, &l.name))?;
            h.ensure_finite(&l.name)?;
        }
        Ok(h)
    }

    /// Infer-mode logits; `&self` only, safe to share across threads.
    pub fn logits(&self, batch: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_batch(batch)?;
        self.run_infer(&self.layers, batch)
    }

    /// Infer-mode class probabilities `[N, classes]`.
    pub fn predict_proba(&self, batch: &Tensor<T>) -> Result<Tensor<T>> {
        softmax(&self.logits(batch)?)
    }

    /// The flattened conv activations `[N, latent_width]` (infer mode).
    pub fn extract_features(&self, batch: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_batch(batch)?;
        self.run_infer(&self.layers[..self.head_start], batch)
    }

    /// Head applied to latent vectors, returning probabilities.
    pub fn head_proba(&self, features: &Tensor<T>) -> Result<Tensor<T>> {
        let (_, d) = features.dims2()?;
        if d != self.arch.latent_width() {
            return Err(Error::shape("latent vector", self.arch.latent_width(), d));
        }
        softmax(&self.run_infer(&self.layers[self.head_start..], features)?)
    }

    /// `P(bona fide)` for each sample of a batch.
    pub fn scores(&self, batch: &Tensor<T>) -> Result<Vec<f64>> {
        let probs = self.predict_proba(batch)?;
        let k = self.arch.classes;
        Ok(probs
            .data()
            .chunks_exact(k)
            .map(|row| row[Label::BonaFide.class_index()].as_f64())
            .collect())
    }

    /// Classify a single `[C, H, W]` face; bona fide iff score ≥ threshold.
    pub fn predict(&self, face: &Tensor<T>, threshold: Option<f64>) -> Result<Prediction> {
        let mut shape = vec![1];
        shape.extend_from_slice(face.shape());
        let score = self.scores(&face.clone().reshape(&shape)?)?[0];
        let threshold = threshold.unwrap_or(self.threshold);
        Ok(Prediction {
            label: Label::from_score(score, threshold),
            score,
        })
    }

    /// Copy of the network in another scalar type (drops forward caches).
    pub fn cast<U: Real>(&self) -> LivenessNet<U> {
        LivenessNet {
            arch: self.arch.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| NamedLayer {
                    name: l.name.clone(),
                    layer: l.layer.cast(),
                })
                .collect(),
            head_start: self.head_start,
            threshold: self.threshold,
        }
    }
}

fn name_error(e: Error, layer: &str) -> Error {
    match e {
        Error::NonFinite(_) => Error::NonFinite(layer.to_string()),
        Error::Shape {
            context,
            expected,
            actual,
        } => Error::Shape {
            context: format!("{layer}: {context}"),
            expected,
            actual,
        },
        Error::State(msg) => Error::State(format!("{layer}: {msg}")),
        other => other,
    }
}

/// Closed-form trainable parameter count for an architecture, computed
/// without building any layers.
pub fn expected_param_count(arch: &ArchConfig) -> usize {
    let conv = |cin: usize, cout: usize| cin * cout * 9 + cout;
    let bn = |c: usize| 2 * c;
    let mut total = 0;
    let mut cin = arch.input_channels;
    for (width, convs) in [
        (arch.block1_channels, arch.block1_convs),
        (arch.block2_channels, arch.block2_convs),
    ] {
        for _ in 0..convs {
            total += conv(cin, width) + bn(width);
            cin = width;
        }
    }
    total += arch.latent_width() * arch.hidden_width + arch.hidden_width;
    total += bn(arch.hidden_width);
    total += arch.hidden_width * arch.classes + arch.classes;
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn default_layer_sequence() {
        let net = LivenessNet::<f32>::build(ArchConfig::default(), 0).unwrap();
        let names: Vec<&str> = net.layers().iter().map(|l| l.name.as_str()).collect();
        assert_eq!(names.len(), 12 + 2 + 12 + 2 + 1 + 5);
        assert_eq!(&names[..3], ["block1.conv0", "block1.bn0", "block1.relu0"]);
        assert_eq!(names[12], "block1.pool");
        assert_eq!(names[13], "block1.dropout");
        assert_eq!(names[28], "flatten");
        assert_eq!(
            &names[29..],
            ["head.fc0", "head.relu", "head.bn", "head.dropout", "head.fc1"]
        );
    }

    #[test]
    fn default_param_count() {
        let arch = ArchConfig::default();
        let net = LivenessNet::<f32>::build(arch.clone(), 0).unwrap();
        assert_eq!(net.param_count(), 171_570);
        assert_eq!(expected_param_count(&arch), 171_570);
        assert_eq!(arch.latent_width(), 2048);
    }

    #[test]
    fn odd_intermediate_size_rejected() {
        for size in [30, 33, 6] {
            let arch = ArchConfig {
                input_size: size,
                ..ArchConfig::default()
            };
            assert!(matches!(LivenessNet::<f32>::build(arch, 0), Err(Error::Config(_))));
        }
    }

    #[test]
    fn wrong_input_shape_rejected() {
        let net = LivenessNet::<f32>::build(ArchConfig::default(), 0).unwrap();
        let err = net.predict_proba(&Tensor::zeros(&[1, 3, 28, 28])).unwrap_err();
        assert!(matches!(err, Error::Shape { .. }));
    }

    #[test]
    fn probabilities_are_normalized_and_deterministic() {
        let net = LivenessNet::<f32>::build(ArchConfig::default(), 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Tensor::<f32>::from_fn(&[4, 3, 32, 32], |_| rng.gen());
        let p = net.predict_proba(&x).unwrap();
        assert_eq!(p.shape(), [4, 2]);
        for row in p.data().chunks_exact(2) {
            assert!((row[0] + row[1] - 1.0).abs() <= 1e-6);
        }
        assert_eq!(p, net.predict_proba(&x).unwrap());
        let zero = net.predict_proba(&Tensor::zeros(&[1, 3, 32, 32])).unwrap();
        assert!(zero.data().iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn features_then_head_equals_forward() {
        let net = LivenessNet::<f32>::build(ArchConfig::default(), 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Tensor::<f32>::from_fn(&[3, 3, 32, 32], |_| rng.gen());
        let feats = net.extract_features(&x).unwrap();
        assert_eq!(feats.shape(), [3, 2048]);
        let via_head = net.head_proba(&feats).unwrap();
        let direct = net.predict_proba(&x).unwrap();
        for (a, b) in via_head.data().iter().zip(direct.data()) {
            assert!((a - b).abs() <= 1e-6);
        }
    }

    #[test]
    fn zero_model_zero_input_gives_zero_features() {
        let mut net = LivenessNet::<f32>::build(ArchConfig::default(), 0).unwrap();
        for (_, t) in net.named_tensors_mut() {
            if t.shape().len() != 1 {
                t.data_mut().fill(0.0);
            }
        }
        // Biases are already zero; BN with running stats (0, 1) maps 0 → beta = 0.
        let feats = net.extract_features(&Tensor::zeros(&[2, 3, 32, 32])).unwrap();
        assert!(feats.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn threshold_tie_goes_to_bona_fide() {
        assert_eq!(Label::from_score(0.9, 0.5), Label::BonaFide);
        assert_eq!(Label::from_score(0.5, 0.5), Label::BonaFide);
        assert_eq!(Label::from_score(0.49, 0.5), Label::Attack);
    }

    #[test]
    fn seeded_build_is_reproducible() {
        let a = LivenessNet::<f32>::build(ArchConfig::default(), 42).unwrap();
        let b = LivenessNet::<f32>::build(ArchConfig::default(), 42).unwrap();
        let c = LivenessNet::<f32>::build(ArchConfig::default(), 43).unwrap();
        let flat = |n: &LivenessNet| -> Vec<f32> {
            n.named_tensors()
                .into_iter()
                .flat_map(|(_, t)| t.data().to_vec())
                .collect()
        };
        assert_eq!(flat(&a), flat(&b));
        assert_ne!(flat(&a), flat(&c));
    }
}
