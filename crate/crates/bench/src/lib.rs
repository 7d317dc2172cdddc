//! Fixtures shared by the benchmarks in `benches/`.

use image::RgbImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use liveness_core::data::resize_bilinear;
use liveness_core::data::synth::render_frame;
use liveness_core::{ArchConfig, AttackType, BBox, Distance, LivenessNet, Tensor};

pub fn network(seed: u64) -> LivenessNet {
    LivenessNet::build(ArchConfig::default(), seed).expect("default architecture is valid")
}

/// Uniform `[0, 1)` batch of network inputs.
pub fn input_batch(n: usize, seed: u64) -> Tensor<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [c, h, w] = ArchConfig::default().input_shape();
    Tensor::from_fn(&[n, c, h, w], |_| rng.gen())
}

pub fn labels(n: usize) -> Vec<usize> {
    (0..n).map(|i| i % 2).collect()
}

/// A 640×480 synthetic camera frame and its face box.
pub fn camera_frame() -> (RgbImage, BBox) {
    let frame = render_frame(0, 0, AttackType::None, Distance::Mid, 0, 96);
    let (sx, sy) = (640.0 / 96.0, 480.0 / 96.0);
    let b = frame.bbox;
    let bbox = BBox {
        x: (b.x as f32 * sx) as i32,
        y: (b.y as f32 * sy) as i32,
        w: (b.w as f32 * sx) as i32,
        h: (b.h as f32 * sy) as i32,
    };
    (resize_bilinear(&frame.image, 640, 480), bbox)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_have_network_shapes() {
        assert_eq!(input_batch(4, 0).shape(), [4, 3, 32, 32]);
        let (frame, bbox) = camera_frame();
        assert_eq!(frame.dimensions(), (640, 480));
        assert!(bbox.intersects_frame(640, 480));
        assert_eq!(network(0).param_count(), 171_570);
    }
}
