use image::{Rgb, RgbImage};

use crate::data::BBox;
use crate::error::{Error, Result};
use crate::net::InputScaling;
use crate::tensor::Tensor;

/// Side length of the network input.
pub const FACE_SIZE: u32 = 32;

/// Pixel rectangle `(x0, y0, x1, y1)`, end-exclusive, that a crop of `bbox`
/// with the given padding covers: the box grown by
/// `padding_fraction · max(w, h)` on every side, clamped to the frame.
pub fn crop_region(
    frame_width: u32,
    frame_height: u32,
    bbox: BBox,
    padding_fraction: f64,
) -> Result<(u32, u32, u32, u32)> {
    bbox.validate()?;
    if !padding_fraction.is_finite() || padding_fraction < 0.0 {
        return Err(Error::Config(format!(
            "padding fraction {padding_fraction} must be finite and non-negative"
        )));
    }
    if !bbox.intersects_frame(frame_width, frame_height) {
        return Err(Error::BBoxOutsideFrame(bbox.to_string()));
    }
    let pad = padding_fraction * bbox.w.max(bbox.h) as f64;
    let clamp = |v: f64, hi: u32| v.clamp(0.0, hi as f64) as u32;
    let x0 = clamp((bbox.x as f64 - pad).floor(), frame_width);
    let y0 = clamp((bbox.y as f64 - pad).floor(), frame_height);
    let x1 = clamp((bbox.x as f64 + bbox.w as f64 + pad).ceil(), frame_width);
    let y1 = clamp((bbox.y as f64 + bbox.h as f64 + pad).ceil(), frame_height);
    debug_assert!(x1 > x0 && y1 > y0);
    Ok((x0, y0, x1, y1))
}

/// Crop around `bbox` with background padding and resize to 32×32.
pub fn crop_face(frame: &RgbImage, bbox: BBox, padding_fraction: f64) -> Result<RgbImage> {
    crop_face_sized(frame, bbox, padding_fraction, FACE_SIZE)
}

pub fn crop_face_sized(frame: &RgbImage, bbox: BBox, padding_fraction: f64, size: u32) -> Result<RgbImage> {
    let (x0, y0, x1, y1) = crop_region(frame.width(), frame.height(), bbox, padding_fraction)?;
    let region = image::imageops::crop_imm(frame, x0, y0, x1 - x0, y1 - y0).to_image();
    Ok(resize_bilinear(&region, size, size))
}

/// Bilinear resampling with pixel-center alignment and edge clamping.
pub fn resize_bilinear(src: &RgbImage, width: u32, height: u32) -> RgbImage {
    let (sw, sh) = (src.width(), src.height());
    let sx = sw as f32 / width as f32;
    let sy = sh as f32 / height as f32;
    let axis = |dst: u32, scale: f32, len: u32| -> (u32, u32, f32) {
        let pos = ((dst as f32 + 0.5) * scale - 0.5).clamp(0.0, (len - 1) as f32);
        let lo = pos.floor() as u32;
        let hi = (lo + 1).min(len - 1);
        (lo, hi, pos - lo as f32)
    };
    let cols: Vec<_> = (0..width).map(|x| axis(x, sx, sw)).collect();
    let mut out = RgbImage::new(width, height);
    for y in 0..height {
        let (y0, y1, fy) = axis(y, sy, sh);
        for (x, &(x0, x1, fx)) in cols.iter().enumerate() {
            let p = |xx, yy| src.get_pixel(xx, yy).0;
            let (a, b, c, d) = (p(x0, y0), p(x1, y0), p(x0, y1), p(x1, y1));
            let mut px = [0u8; 3];
            for ch in 0..3 {
                let top = a[ch] as f32 + (b[ch] as f32 - a[ch] as f32) * fx;
                let bottom = c[ch] as f32 + (d[ch] as f32 - c[ch] as f32) * fx;
                px[ch] = (top + (bottom - top) * fy).round().clamp(0.0, 255.0) as u8;
            }
            out.put_pixel(x as u32, y, Rgb(px));
        }
    }
    out
}

/// HWC 8-bit image → CHW tensor, scaled per `scaling`.
pub fn normalize_face(image: &RgbImage, scaling: InputScaling) -> Tensor<f32> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    let mut data = vec![0.0f32; 3 * h * w];
    for (i, px) in image.pixels().enumerate() {
        for ch in 0..3 {
            let v = px.0[ch] as f32;
            data[ch * h * w + i] = match scaling {
                InputScaling::Unit => v / 255.0,
                InputScaling::Raw => v,
            };
        }
    }
    Tensor::new(vec![3, h, w], data).expect("length matches shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient_frame(w: u32, h: u32) -> RgbImage {
        RgbImage::from_fn(w, h, |x, y| Rgb([(x * 3 % 256) as u8, (y * 5 % 256) as u8, 77]))
    }

    #[test]
    fn no_padding_crops_exact_box() {
        let frame = gradient_frame(64, 48);
        let bbox = BBox::new(10, 8, 32, 32).unwrap();
        assert_eq!(crop_region(64, 48, bbox, 0.0).unwrap(), (10, 8, 42, 40));
        // Same-size resize is the identity.
        let crop = crop_face(&frame, bbox, 0.0).unwrap();
        let direct = image::imageops::crop_imm(&frame, 10, 8, 32, 32).to_image();
        assert_eq!(crop, direct);
    }

    #[test]
    fn padding_expands_by_fraction_of_larger_side() {
        let bbox = BBox::new(16, 16, 32, 32).unwrap();
        assert_eq!(crop_region(64, 64, bbox, 0.5).unwrap(), (0, 0, 64, 64));
    }

    #[test]
    fn corner_box_is_clamped() {
        let frame = gradient_frame(50, 40);
        let bbox = BBox::new(-5, 30, 20, 20).unwrap();
        let (x0, y0, x1, y1) = crop_region(50, 40, bbox, 0.3).unwrap();
        assert_eq!((x0, y0), (0, 24));
        assert!(x1 <= 50 && y1 <= 40);
        let crop = crop_face(&frame, bbox, 0.3).unwrap();
        assert_eq!(crop.dimensions(), (32, 32));
    }

    #[test]
    fn box_outside_frame_rejected() {
        let frame = gradient_frame(20, 20);
        let bbox = BBox::new(25, 0, 10, 10).unwrap();
        assert!(matches!(crop_face(&frame, bbox, 0.3), Err(Error::BBoxOutsideFrame(_))));
        assert!(crop_face(&frame, BBox::new(0, 0, 10, 10).unwrap(), -0.1).is_err());
    }

    #[test]
    fn resize_constant_image_stays_constant() {
        let src = RgbImage::from_pixel(37, 53, Rgb([12, 200, 99]));
        let out = resize_bilinear(&src, 32, 32);
        assert!(out.pixels().all(|p| p.0 == [12, 200, 99]));
    }

    #[test]
    fn normalization_range_and_layout() {
        let img = RgbImage::from_fn(32, 32, |x, y| Rgb([x as u8, y as u8, 255]));
        let t = normalize_face(&img, InputScaling::Unit);
        assert_eq!(t.shape(), [3, 32, 32]);
        assert_eq!(t.data()[2 * 1024], 1.0);
        assert_eq!(t.data()[5], 5.0 / 255.0);
        assert_eq!(t.data()[1024 + 32 * 3], 3.0 / 255.0);
        assert!(t.data().iter().all(|v| (0.0..=1.0).contains(v)));
        let zero = normalize_face(&RgbImage::new(32, 32), InputScaling::Unit);
        assert!(zero.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn normalization_is_exactly_invertible() {
        let img = RgbImage::from_fn(16, 16, |x, y| {
            let v = (y * 16 + x) as u8;
            Rgb([v, v, v])
        });
        let t = normalize_face(&img, InputScaling::Unit);
        let mut prev = -1.0f32;
        for v in 0..256usize {
            let scaled = t.data()[v];
            assert_eq!(scaled * 255.0, v as f32, "value {v}");
            assert!(scaled > prev);
            prev = scaled;
        }
    }
}
