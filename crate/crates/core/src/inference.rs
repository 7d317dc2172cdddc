//! Decode → crop → normalize → classify, shared by the CLI and the service.

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::data::{crop_face, normalize_face, BBox, Label};
use crate::error::{Error, Result};
use crate::net::LivenessNet;

/// Frames smaller than the network input are rejected.
pub const MIN_FRAME_SIDE: u32 = 32;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub label: Label,
    /// `P(bona fide)`.
    pub score: f64,
    pub bbox: BBox,
}

/// Decodes PNG or JPEG bytes to RGB.
pub fn decode_image(bytes: &[u8]) -> Result<RgbImage> {
    let img = image::load_from_memory(bytes).map_err(|e| Error::BadImage(e.to_string()))?;
    let rgb = img.to_rgb8();
    if rgb.width() < MIN_FRAME_SIDE || rgb.height() < MIN_FRAME_SIDE {
        return Err(Error::BadImage(format!(
            "image is {}x{}, need at least {MIN_FRAME_SIDE}x{MIN_FRAME_SIDE}",
            rgb.width(),
            rgb.height()
        )));
    }
    Ok(rgb)
}

/// Classifies the face at `bbox`. `threshold` defaults to the model's own.
pub fn analyze(
    net: &LivenessNet,
    frame: &RgbImage,
    bbox: BBox,
    padding_fraction: f64,
    threshold: Option<f64>,
) -> Result<Verdict> {
    let crop = crop_face(frame, bbox, padding_fraction)?;
    let face = normalize_face(&crop, net.arch().input_scaling);
    let p = net.predict(&face, threshold)?;
    Ok(Verdict {
        label: p.label,
        score: p.score,
        bbox,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::ArchConfig;
    use image::{ImageFormat, Rgb};
    use std::io::Cursor;

    fn png(img: &RgbImage) -> Vec<u8> {
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, ImageFormat::Png).unwrap();
        out.into_inner()
    }

    #[test]
    fn garbage_is_bad_image() {
        assert!(matches!(decode_image(b"not an image"), Err(Error::BadImage(_))));
    }

    #[test]
    fn tiny_image_rejected() {
        let bytes = png(&RgbImage::new(16, 40));
        assert!(matches!(decode_image(&bytes), Err(Error::BadImage(_))));
    }

    #[test]
    fn analyze_matches_direct_prediction() {
        let net = LivenessNet::build(ArchConfig::default(), 4).unwrap();
        let frame = RgbImage::from_fn(80, 60, |x, y| Rgb([(x * 3) as u8, (y * 4) as u8, 90]));
        let decoded = decode_image(&png(&frame)).unwrap();
        assert_eq!(decoded, frame);
        let bbox = BBox::new(20, 10, 30, 30).unwrap();
        let v = analyze(&net, &decoded, bbox, 0.3, None).unwrap();
        let face = normalize_face(&crop_face(&frame, bbox, 0.3).unwrap(), net.arch().input_scaling);
        let p = net.predict(&face, None).unwrap();
        assert_eq!(v.score.to_bits(), p.score.to_bits());
        assert_eq!(v.label, p.label);
        assert_eq!(v.bbox, bbox);
    }
}
