use liveness_core::data::synth::{generate, SynthConfig};
use liveness_core::train::score_dataset;
use liveness_core::weights::{checksum_hex, to_bytes};
use liveness_core::{ArchConfig, Dataset, Error, FaceSample, InputScaling, LivenessNet, Split, Tensor, TrainConfig};

fn corpus(seed: u64) -> (Dataset, Dataset) {
    let all = generate(&SynthConfig {
        seed,
        n_subjects: 6,
        per_class: 4,
        ..SynthConfig::default()
    })
    .unwrap();
    let pick = |split| {
        let s: Vec<FaceSample> = all
            .iter()
            .filter(|g| g.split == split)
            .map(|g| g.sample.clone())
            .collect();
        Dataset::from_samples(&s, InputScaling::Unit).unwrap()
    };
    (pick(Split::Train), pick(Split::Dev))
}

fn short(epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs,
        seed,
        ..TrainConfig::default()
    }
}

#[test]
fn training_reduces_loss_and_keeps_best_dev_checkpoint() {
    let (train_set, dev_set) = corpus(3);
    let mut net = LivenessNet::build(ArchConfig::default(), 3).unwrap();
    let mut seen = Vec::new();
    let out = liveness_core::train(&mut net, &train_set, Some(&dev_set), &short(6, 3), |l| {
        seen.push(l.clone())
    })
    .unwrap();
    assert_eq!(seen, out.logs);
    let (first, last) = (out.logs[0].train_loss, out.logs.last().unwrap().train_loss);
    assert!(last < first, "train loss {first} -> {last}");

    let min = out
        .logs
        .iter()
        .map(|l| l.dev_acer.unwrap())
        .fold(f64::INFINITY, f64::min);
    let best = out.logs.iter().rfind(|l| l.best).unwrap();
    assert_eq!(best.dev_acer.unwrap(), min);
    assert_eq!(out.best.threshold, best.dev_threshold.unwrap());
    assert!(out.logs[0].best);

    let scored = score_dataset(&out.best, &dev_set).unwrap();
    let report = liveness_core::compute_report(&scored, out.best.threshold).unwrap();
    assert!((report.acer - min).abs() < 1e-12);
}

#[test]
fn identical_runs_give_identical_weights() {
    let (train_set, dev_set) = corpus(5);
    let run = || {
        let mut net = LivenessNet::build(ArchConfig::default(), 9).unwrap();
        let out = liveness_core::train(&mut net, &train_set, Some(&dev_set), &short(2, 9), |_| {}).unwrap();
        checksum_hex(&to_bytes(&out.best)).unwrap()
    };
    assert_eq!(run(), run());

    let mut other = LivenessNet::build(ArchConfig::default(), 9).unwrap();
    let out = liveness_core::train(&mut other, &train_set, Some(&dev_set), &short(2, 10), |_| {}).unwrap();
    assert_ne!(checksum_hex(&to_bytes(&out.best)).unwrap(), run());
}

#[test]
fn non_finite_weights_abort_naming_the_layer() {
    let (train_set, _) = corpus(1);
    let mut net = LivenessNet::build(ArchConfig::default(), 1).unwrap();
    for (name, t) in net.named_tensors_mut() {
        if name == "block2.conv0.weight" {
            t.data_mut()[0] = f32::NAN;
        }
    }
    match liveness_core::train(&mut net, &train_set, None, &short(1, 1), |_| {}) {
        Err(Error::NonFinite(layer)) => assert_eq!(layer, "block2.conv0"),
        other => panic!("expected a non-finite error, got {:?}", other.map(|o| o.logs)),
    }
}

#[test]
fn without_dev_the_final_weights_are_returned() {
    let (train_set, _) = corpus(2);
    let mut net = LivenessNet::build(ArchConfig::default(), 2).unwrap();
    let out = liveness_core::train(&mut net, &train_set, None, &short(2, 2), |_| {}).unwrap();
    assert_eq!(to_bytes(&out.best), to_bytes(&net));
    assert_eq!(out.best.threshold, 0.5);
    assert!(out.logs.iter().all(|l| !l.best && l.dev_acer.is_none()));
}

#[test]
fn single_sample_training_set_rejected() {
    let (train_set, _) = corpus(2);
    let one = train_set.subset(&[0]).unwrap();
    let mut net = LivenessNet::build(ArchConfig::default(), 2).unwrap();
    assert!(matches!(
        liveness_core::train(&mut net, &one, None, &short(1, 2), |_| {}),
        Err(Error::Data(_))
    ));
}

#[test]
fn f64_copy_agrees_with_f32_network() {
    let net = LivenessNet::build(ArchConfig::default(), 4).unwrap();
    let wide = net.cast::<f64>();
    let x: Tensor<f32> = Tensor::from_fn(&[3, 3, 32, 32], |i| ((i * 37) % 101) as f32 / 101.0);
    let a = net.predict_proba(&x).unwrap();
    let b = wide.predict_proba(&x.cast::<f64>()).unwrap();
    for (p, q) in a.data().iter().zip(b.data()) {
        assert!((*p as f64 - q).abs() < 1e-4, "{p} vs {q}");
    }
}
