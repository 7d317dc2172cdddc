use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use liveness_core::gradcheck::{gradient_check, DEFAULT_STEP};
use liveness_core::layers::Layer;
use liveness_core::{ArchConfig, LivenessNet, Mode, Tensor};

/// The full layer sequence at a reduced size, in binary64.
fn small_network(seed: u64) -> Vec<Layer<f64>> {
    let arch = ArchConfig {
        input_size: 8,
        block1_channels: 3,
        block1_convs: 2,
        block2_channels: 4,
        block2_convs: 2,
        hidden_width: 5,
        ..ArchConfig::default()
    };
    let net = LivenessNet::<f64>::build(arch, seed).unwrap();
    let mut layers: Vec<Layer<f64>> = net.layers().iter().map(|l| l.layer.clone()).collect();
    // Zero biases put pre-activations of all-zero patches exactly on a ReLU kink.
    let mut rng = ChaCha8Rng::seed_from_u64(!seed);
    for layer in &mut layers {
        for (name, t) in layer.tensors_mut() {
            let range = match name {
                "gamma" | "running_var" => 0.5..1.5,
                "bias" | "running_mean" => -0.5..0.5,
                _ => continue,
            };
            for v in t.data_mut() {
                *v = rng.gen_range(range.clone());
            }
        }
    }
    layers
}

#[test]
fn whole_network_gradients_match_central_differences() {
    for seed in 0..3 {
        let mut layers = small_network(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Tensor::from_fn(&[4, 3, 8, 8], |_| rng.gen_range(0.0..1.0));
        let report = gradient_check(&mut layers, &x, Mode::Train, DEFAULT_STEP, seed).unwrap();
        assert!(report.passes(1e-3), "seed {seed}: {report:?}");
        assert_eq!(report.params.len(), 2 * 4 + 2 * 4 + 2 + 2 + 2);
    }
}

#[test]
fn infer_mode_network_gradients() {
    let mut layers = small_network(7);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = Tensor::from_fn(&[2, 3, 8, 8], |_| rng.gen_range(0.0..1.0));
    let report = gradient_check(&mut layers, &x, Mode::Infer, DEFAULT_STEP, 7).unwrap();
    assert!(report.passes(1e-3), "{report:?}");
}
