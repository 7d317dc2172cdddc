//! Procedural spoof corpus.
//!
//! Each subject gets a parametric face (skin tone, oval proportions, eye and
//! mouth geometry, hair). Bona fide frames put that face in front of a room-like
//! background. Attack frames show the same face through a presentation medium:
//! photo paper with a white margin and halftone dots, a phone screen with bezel,
//! moiré and scanlines, or a paper mask wrapped around a head form.

use std::f32::consts::PI;
use std::path::Path;

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{
    crop_face, split_by_subject, AttackType, BBox, CorpusManifest, Distance, FaceSample, ManifestRecord, Split,
    DEFAULT_PADDING_FRACTION, DEFAULT_RATIOS,
};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_subjects: usize,
    /// Frames per subject per class; every frame yields a padded and a tight crop.
    pub per_class: usize,
    pub padding_fraction: f64,
    pub ratios: [usize; 3],
    pub frame_size: u32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_subjects: 20,
            per_class: 25,
            padding_fraction: DEFAULT_PADDING_FRACTION,
            ratios: DEFAULT_RATIOS,
            frame_size: 96,
        }
    }
}

/// A full camera frame with the face box a detector would report.
#[derive(Clone, Debug)]
pub struct SyntheticFrame {
    pub image: RgbImage,
    pub bbox: BBox,
    pub subject_id: String,
    pub attack_type: AttackType,
    pub distance: Distance,
}

/// One generated crop with its split and per-class frame index.
#[derive(Clone, Debug)]
pub struct GeneratedSample {
    pub split: Split,
    pub index: usize,
    pub sample: FaceSample,
}

impl GeneratedSample {
    pub fn record(&self) -> ManifestRecord {
        let s = &self.sample;
        ManifestRecord {
            path: ManifestRecord::canonical_path(self.split, &s.subject_id, s.attack_type, self.index, s.padded),
            split: self.split,
            label: s.label,
            attack_type: s.attack_type,
            subject_id: s.subject_id.clone(),
            distance: s.distance,
            padded: s.padded,
        }
    }
}

pub fn subject_id(index: usize) -> String {
    format!("s{index:03}")
}

/// Attack type of the `index`-th attack frame of a subject.
pub fn attack_for_index(index: usize) -> AttackType {
    AttackType::ATTACKS[index % AttackType::ATTACKS.len()]
}

/// Every third frame is captured close up.
pub fn distance_for_index(index: usize) -> Distance {
    if index % 3 == 2 {
        Distance::Close
    } else {
        Distance::Mid
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn rng_for(parts: &[u64]) -> ChaCha8Rng {
    let seed = parts.iter().fold(0x51_7cc1_b727_220a_u64, |acc, &p| splitmix(acc ^ p));
    ChaCha8Rng::seed_from_u64(seed)
}

fn attack_tag(a: AttackType) -> u64 {
    match a {
        AttackType::None => 0,
        AttackType::NormalPrint => 1,
        AttackType::GlossyPrint => 2,
        AttackType::VideoReplay => 3,
        AttackType::NormalPrintMask => 4,
        AttackType::GlossyPrintMask => 5,
    }
}

type Px = [f32; 3];

struct Canvas {
    w: usize,
    h: usize,
    px: Vec<Px>,
}

impl Canvas {
    fn new(w: usize, h: usize, fill: Px) -> Self {
        Self {
            w,
            h,
            px: vec![fill; w * h],
        }
    }

    fn get(&self, x: usize, y: usize) -> Px {
        self.px[y * self.w + x]
    }

    fn set(&mut self, x: usize, y: usize, v: Px) {
        self.px[y * self.w + x] = v;
    }

    fn sample(&self, x: f32, y: f32) -> Px {
        let x = x.clamp(0.0, (self.w - 1) as f32);
        let y = y.clamp(0.0, (self.h - 1) as f32);
        let (x0, y0) = (x.floor() as usize, y.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(self.w - 1), (y0 + 1).min(self.h - 1));
        let (fx, fy) = (x - x0 as f32, y - y0 as f32);
        let (a, b, c, d) = (self.get(x0, y0), self.get(x1, y0), self.get(x0, y1), self.get(x1, y1));
        std::array::from_fn(|i| {
            let top = a[i] + (b[i] - a[i]) * fx;
            let bottom = c[i] + (d[i] - c[i]) * fx;
            top + (bottom - top) * fy
        })
    }

    fn blend(&mut self, x: usize, y: usize, color: Px, alpha: f32) {
        let p = &mut self.px[y * self.w + x];
        for i in 0..3 {
            p[i] += (color[i] - p[i]) * alpha;
        }
    }

    /// Filled ellipse with a one-pixel soft edge.
    fn ellipse(&mut self, cx: f32, cy: f32, rx: f32, ry: f32, color: Px) {
        let (x0, x1) = (
            (cx - rx - 1.0).floor().max(0.0) as usize,
            ((cx + rx + 2.0).ceil() as usize).min(self.w),
        );
        let (y0, y1) = (
            (cy - ry - 1.0).floor().max(0.0) as usize,
            ((cy + ry + 2.0).ceil() as usize).min(self.h),
        );
        for y in y0..y1 {
            for x in x0..x1 {
                let dx = (x as f32 + 0.5 - cx) / rx;
                let dy = (y as f32 + 0.5 - cy) / ry;
                let r = (dx * dx + dy * dy).sqrt();
                let alpha = ((1.0 - r) * rx.min(ry)).clamp(0.0, 1.0);
                if alpha > 0.0 {
                    self.blend(x, y, color, alpha);
                }
            }
        }
    }

    fn to_image(&self) -> RgbImage {
        RgbImage::from_fn(self.w as u32, self.h as u32, |x, y| {
            let p = self.get(x as usize, y as usize);
            Rgb(p.map(|v| v.round().clamp(0.0, 255.0) as u8))
        })
    }
}

fn rand_color(rng: &mut ChaCha8Rng, lo: f32, hi: f32) -> Px {
    std::array::from_fn(|_| rng.gen_range(lo..hi))
}

/// Fixed appearance of one synthetic person.
#[derive(Clone, Debug)]
struct Subject {
    skin: Px,
    hair: Px,
    iris: Px,
    lips: Px,
    aspect: f32,
    eye_dx: f32,
    eye_y: f32,
    eye_r: f32,
    mouth_w: f32,
    mouth_y: f32,
    hair_cover: f32,
}

impl Subject {
    fn new(seed: u64, index: usize) -> Self {
        let mut rng = rng_for(&[seed, 0x5b, index as u64]);
        let tone = rng.gen_range(0.35f32..1.0);
        let skin = [
            90.0 + 150.0 * tone + rng.gen_range(-10.0..10.0),
            60.0 + 120.0 * tone + rng.gen_range(-10.0..10.0),
            45.0 + 100.0 * tone + rng.gen_range(-10.0..10.0),
        ];
        Self {
            skin,
            hair: rand_color(&mut rng, 10.0, 120.0),
            iris: rand_color(&mut rng, 20.0, 110.0),
            lips: [
                rng.gen_range(120.0..190.0),
                rng.gen_range(50.0..90.0),
                rng.gen_range(50.0..90.0),
            ],
            aspect: rng.gen_range(0.68..0.85),
            eye_dx: rng.gen_range(0.32..0.45),
            eye_y: rng.gen_range(-0.25..-0.1),
            eye_r: rng.gen_range(0.09..0.14),
            mouth_w: rng.gen_range(0.25..0.45),
            mouth_y: rng.gen_range(0.4..0.55),
            hair_cover: rng.gen_range(0.2..0.55),
        }
    }
}

/// Room-like backdrop: a vertical gradient with a few soft shapes.
fn paint_background(canvas: &mut Canvas, rng: &mut ChaCha8Rng) {
    let top = rand_color(rng, 30.0, 230.0);
    let bottom = rand_color(rng, 20.0, 200.0);
    for y in 0..canvas.h {
        let t = y as f32 / (canvas.h - 1) as f32;
        let c: Px = std::array::from_fn(|i| top[i] + (bottom[i] - top[i]) * t);
        for x in 0..canvas.w {
            canvas.set(x, y, c);
        }
    }
    for _ in 0..rng.gen_range(2..6) {
        let color = rand_color(rng, 20.0, 240.0);
        let (cx, cy) = (rng.gen_range(0.0..canvas.w as f32), rng.gen_range(0.0..canvas.h as f32));
        let (rx, ry) = (rng.gen_range(6.0..30.0), rng.gen_range(6.0..30.0));
        canvas.ellipse(cx, cy, rx, ry, color);
    }
}

/// Face centered at `(cx, cy)` with half-height `ry`; returns the face box.
fn paint_face(
    canvas: &mut Canvas,
    s: &Subject,
    cx: f32,
    cy: f32,
    ry: f32,
    rng: &mut ChaCha8Rng,
) -> (f32, f32, f32, f32) {
    let rx = ry * s.aspect;
    canvas.ellipse(cx, cy - ry * 0.25, rx * 1.12, ry * 0.95, s.hair);
    canvas.ellipse(cx, cy, rx, ry, s.skin);
    let cover_y = cy - ry * (1.0 - s.hair_cover);
    canvas.ellipse(cx, cover_y - ry * 0.35, rx * 1.02, ry * 0.45, s.hair);
    let ey = cy + s.eye_y * ry;
    let er = s.eye_r * ry;
    for side in [-1.0f32, 1.0] {
        let ex = cx + side * s.eye_dx * rx;
        canvas.ellipse(ex, ey, er * 1.5, er, [235.0, 235.0, 230.0]);
        canvas.ellipse(ex, ey, er * 0.8, er * 0.8, s.iris);
        canvas.ellipse(ex, ey - er * 1.9, er * 1.6, er * 0.35, s.hair);
    }
    let nose: Px = s.skin.map(|v| v * 0.82);
    canvas.ellipse(cx, cy + 0.15 * ry, rx * 0.12, ry * 0.16, nose);
    canvas.ellipse(cx, cy + s.mouth_y * ry, s.mouth_w * rx, ry * 0.07, s.lips);

    // Directional light across the face.
    let angle = rng.gen_range(0.0..2.0 * PI);
    let strength = rng.gen_range(0.0..0.25);
    let (x0, x1) = ((cx - rx).max(0.0) as usize, ((cx + rx).ceil() as usize).min(canvas.w));
    let (y0, y1) = ((cy - ry).max(0.0) as usize, ((cy + ry).ceil() as usize).min(canvas.h));
    for y in y0..y1 {
        for x in x0..x1 {
            let (dx, dy) = ((x as f32 + 0.5 - cx) / rx, (y as f32 + 0.5 - cy) / ry);
            let inside = (1.0 - (dx * dx + dy * dy).sqrt()).clamp(0.0, 0.2) * 5.0;
            let u = ((x as f32 - cx) * angle.cos() + (y as f32 - cy) * angle.sin()) / ry;
            let gain = 1.0 + strength * u * inside;
            let p = canvas.get(x, y);
            canvas.set(x, y, p.map(|v| v * gain));
        }
    }
    (cx - rx, cy - ry, 2.0 * rx, 2.0 * ry)
}

fn add_sensor_noise(canvas: &mut Canvas, rng: &mut ChaCha8Rng, amplitude: f32) {
    for p in canvas.px.iter_mut() {
        for v in p.iter_mut() {
            *v += (rng.gen::<f32>() + rng.gen::<f32>() - 1.0) * amplitude;
        }
    }
}

fn box_blur(canvas: &Canvas, x0: usize, y0: usize, x1: usize, y1: usize) -> Canvas {
    let mut out = Canvas {
        w: canvas.w,
        h: canvas.h,
        px: canvas.px.clone(),
    };
    for y in y0..y1 {
        for x in x0..x1 {
            let mut acc = [0.0f32; 3];
            let mut n = 0.0;
            for yy in y.saturating_sub(1)..(y + 2).min(canvas.h) {
                for xx in x.saturating_sub(1)..(x + 2).min(canvas.w) {
                    let p = canvas.get(xx, yy);
                    for i in 0..3 {
                        acc[i] += p[i];
                    }
                    n += 1.0;
                }
            }
            out.set(x, y, acc.map(|v| v / n));
        }
    }
    out
}

/// Reprints a photo pixel: compressed contrast, paper tint, halftone dots.
fn print_pixel(p: Px, x: usize, y: usize, period: f32, dots: f32, glossy: bool) -> Px {
    let (u, v) = (x as f32 * 2.0 * PI / period, y as f32 * 2.0 * PI / period);
    let dot = 0.5 + 0.25 * (u.cos() + v.cos());
    let (contrast, lift) = if glossy { (0.85, 25.0) } else { (0.7, 50.0) };
    let tint = [1.0, 0.97, 0.88];
    std::array::from_fn(|i| (p[i] * contrast + lift) * tint[i] * (1.0 - dots * dot))
}

fn specular_streak(canvas: &mut Canvas, rect: (usize, usize, usize, usize), rng: &mut ChaCha8Rng, intensity: f32) {
    let (x0, y0, x1, y1) = rect;
    let slope = rng.gen_range(-1.5f32..1.5);
    let offset = rng.gen_range(x0 as f32..x1.max(x0 + 1) as f32);
    let width = rng.gen_range(3.0..7.0);
    let cy = (y0 + y1) as f32 / 2.0;
    for y in y0..y1 {
        for x in x0..x1 {
            let d = (x as f32 - offset - slope * (y as f32 - cy)).abs();
            let a = (1.0 - d / width).max(0.0);
            if a > 0.0 {
                let p = canvas.get(x, y);
                canvas.set(x, y, p.map(|v| v + intensity * a));
            }
        }
    }
}

fn clamp_rect(x0: f32, y0: f32, x1: f32, y1: f32, w: usize, h: usize) -> (usize, usize, usize, usize) {
    let cx = |v: f32| v.round().clamp(0.0, w as f32) as usize;
    let cy = |v: f32| v.round().clamp(0.0, h as f32) as usize;
    (cx(x0), cy(y0), cx(x1), cy(y1))
}

/// Renders one frame. Pure function of its arguments.
pub fn render_frame(
    seed: u64,
    subject_index: usize,
    attack_type: AttackType,
    distance: Distance,
    index: usize,
    frame_size: u32,
) -> SyntheticFrame {
    let subject = Subject::new(seed, subject_index);
    let mut rng = rng_for(&[seed, subject_index as u64, attack_tag(attack_type), index as u64]);
    let n = frame_size as usize;
    let size = n as f32;
    let ry = match distance {
        Distance::Mid => rng.gen_range(0.14..0.18) * size,
        Distance::Close => rng.gen_range(0.23..0.27) * size,
    };
    let margin = ry * 1.1;
    let cx = rng.gen_range(margin..size - margin);
    let cy = rng.gen_range(margin..size - margin);

    // The person (or the photographed person) in their own surroundings.
    let mut scene = Canvas::new(n, n, [0.0; 3]);
    paint_background(&mut scene, &mut rng);
    let face = paint_face(&mut scene, &subject, cx, cy, ry, &mut rng);

    let frame = if attack_type == AttackType::None {
        scene
    } else {
        let mut room = Canvas::new(n, n, [0.0; 3]);
        paint_background(&mut room, &mut rng);
        match attack_type {
            AttackType::NormalPrint | AttackType::GlossyPrint => {
                compose_print(&scene, room, face, attack_type == AttackType::GlossyPrint, &mut rng)
            }
            AttackType::VideoReplay => compose_screen(&scene, room, face, &mut rng),
            _ => compose_mask(&scene, room, face, attack_type == AttackType::GlossyPrintMask, &mut rng),
        }
    };
    let mut frame = frame;
    // Per-capture exposure and white balance.
    let exposure = rng.gen_range(0.75f32..1.25);
    let balance: Px = std::array::from_fn(|_| exposure * rng.gen_range(0.88f32..1.12));
    for p in frame.px.iter_mut() {
        for (v, g) in p.iter_mut().zip(balance) {
            *v *= g;
        }
    }
    add_sensor_noise(&mut frame, &mut rng, 6.0);

    let (fx, fy, fw, fh) = face;
    SyntheticFrame {
        image: frame.to_image(),
        bbox: BBox {
            x: fx.round() as i32,
            y: fy.round() as i32,
            w: (fw.round() as i32).max(1),
            h: (fh.round() as i32).max(1),
        },
        subject_id: subject_id(subject_index),
        attack_type,
        distance,
    }
}

type FaceRect = (f32, f32, f32, f32);

fn medium_rect(face: FaceRect, rng: &mut ChaCha8Rng, n: usize) -> (usize, usize, usize, usize) {
    let (fx, fy, fw, fh) = face;
    let grow = |r: &mut ChaCha8Rng| r.gen_range(0.15f32..0.45) * fw.max(fh);
    let (l, t, r, b) = (grow(rng), grow(rng), grow(rng), grow(rng));
    clamp_rect(fx - l, fy - t, fx + fw + r, fy + fh + b, n, n)
}

fn compose_print(scene: &Canvas, mut room: Canvas, face: FaceRect, glossy: bool, rng: &mut ChaCha8Rng) -> Canvas {
    let rect = medium_rect(face, rng, room.w);
    let (x0, y0, x1, y1) = rect;
    let margin = rng.gen_range(2..5);
    let paper = [
        rng.gen_range(225.0..250.0),
        rng.gen_range(225.0..248.0),
        rng.gen_range(210.0..235.0),
    ];
    let period = rng.gen_range(3.0..4.0);
    let dots = if glossy {
        rng.gen_range(0.12..0.18)
    } else {
        rng.gen_range(0.2..0.3)
    };
    let blurred = box_blur(scene, x0, y0, x1, y1);
    for y in y0..y1 {
        for x in x0..x1 {
            let edge = x < x0 + margin || x + margin >= x1 || y < y0 + margin || y + margin >= y1;
            let p = if edge {
                paper
            } else {
                print_pixel(blurred.get(x, y), x, y, period, dots, glossy)
            };
            room.set(x, y, p);
        }
    }
    if glossy {
        let intensity = rng.gen_range(60.0..100.0);
        specular_streak(&mut room, rect, rng, intensity);
    }
    room
}

fn compose_screen(scene: &Canvas, mut room: Canvas, face: FaceRect, rng: &mut ChaCha8Rng) -> Canvas {
    let rect = medium_rect(face, rng, room.w);
    let (x0, y0, x1, y1) = rect;
    let bezel = rng.gen_range(3..7);
    let bezel_color = rand_color(rng, 10.0, 35.0);
    let (f1, f2) = (rng.gen_range(0.18f32..0.3), rng.gen_range(0.2f32..0.33));
    let (a1, a2) = (rng.gen_range(0.0..PI), rng.gen_range(0.0..PI));
    let moire = rng.gen_range(18.0..30.0);
    let blurred = box_blur(scene, x0, y0, x1, y1);
    for y in y0..y1 {
        for x in x0..x1 {
            let edge = x < x0 + bezel || x + bezel >= x1 || y < y0 + bezel || y + bezel >= y1;
            let p = if edge {
                bezel_color
            } else {
                let (xf, yf) = (x as f32, y as f32);
                let g1 = (2.0 * PI * f1 * (xf * a1.cos() + yf * a1.sin())).sin();
                let g2 = (2.0 * PI * f2 * (xf * a2.cos() + yf * a2.sin())).sin();
                let scan = if y % 2 == 0 { 0.9 } else { 1.0 };
                let q = blurred.get(x, y);
                let cast = [0.88, 0.97, 1.12];
                std::array::from_fn(|i| (q[i] * 0.85 + 20.0) * cast[i] * scan + moire * g1 * g2)
            };
            room.set(x, y, p);
        }
    }
    let intensity = rng.gen_range(30.0..60.0);
    specular_streak(
        &mut room,
        (x0 + bezel, y0 + bezel, x1 - bezel, y1 - bezel),
        rng,
        intensity,
    );
    room
}

fn compose_mask(scene: &Canvas, mut room: Canvas, face: FaceRect, glossy: bool, rng: &mut ChaCha8Rng) -> Canvas {
    let (fx, fy, fw, fh) = face;
    let (cx, cy, rx, ry) = (fx + fw / 2.0, fy + fh / 2.0, fw / 2.0, fh / 2.0);
    // Head form behind the mask.
    let head = rand_color(rng, 60.0, 160.0);
    room.ellipse(cx, cy + ry * 0.15, rx * 1.25, ry * 1.2, head);
    let rim = rng.gen_range(1.08f32..1.16);
    let paper = [
        rng.gen_range(225.0..250.0),
        rng.gen_range(225.0..248.0),
        rng.gen_range(210.0..235.0),
    ];
    let period = rng.gen_range(3.0..4.0);
    let dots = if glossy {
        rng.gen_range(0.12..0.18)
    } else {
        rng.gen_range(0.2..0.3)
    };
    let (x0, y0, x1, y1) = clamp_rect(
        cx - rx * rim,
        cy - ry * rim,
        cx + rx * rim + 1.0,
        cy + ry * rim + 1.0,
        room.w,
        room.h,
    );
    for y in y0..y1 {
        for x in x0..x1 {
            let u = (x as f32 + 0.5 - cx) / rx;
            let v = (y as f32 + 0.5 - cy) / ry;
            let r = (u * u + v * v).sqrt();
            if r >= rim {
                continue;
            }
            let p = if r >= 1.0 {
                paper
            } else {
                // Flat print wrapped around a cylinder.
                let us = u.clamp(-1.0, 1.0).asin() / (PI / 2.0);
                let shade = 1.0 - 0.3 * u * u;
                let q = scene.sample(cx + us * rx - 0.5, y as f32);
                print_pixel(q, x, y, period, dots, glossy).map(|c| c * shade)
            };
            room.set(x, y, p);
        }
    }
    if glossy {
        let intensity = rng.gen_range(60.0..100.0);
        specular_streak(&mut room, (x0, y0, x1, y1), rng, intensity);
    }
    room
}

/// Generates every crop of the corpus in memory, in manifest order.
pub fn generate(cfg: &SynthConfig) -> Result<Vec<GeneratedSample>> {
    if cfg.n_subjects == 0 {
        return Err(Error::Config("synthetic corpus needs at least one subject".into()));
    }
    if cfg.per_class == 0 {
        return Err(Error::Config(
            "synthetic corpus needs at least one image per class".into(),
        ));
    }
    if cfg.frame_size < 48 {
        return Err(Error::Config(format!("frame size {} is below 48", cfg.frame_size)));
    }
    let ids: Vec<String> = (0..cfg.n_subjects).map(subject_id).collect();
    let splits: Vec<Split> = if ids.len() < 3 {
        vec![Split::Train; ids.len()]
    } else {
        let s = split_by_subject(&ids, cfg.ratios, cfg.seed)?;
        ids.iter()
            .map(|id| {
                if s.train.contains(id) {
                    Split::Train
                } else if s.dev.contains(id) {
                    Split::Dev
                } else {
                    Split::Test
                }
            })
            .collect()
    };

    let mut out = Vec::with_capacity(cfg.n_subjects * cfg.per_class * 4);
    for (si, split) in splits.into_iter().enumerate() {
        for index in 0..cfg.per_class {
            for attack_type in [AttackType::None, attack_for_index(index)] {
                let frame = render_frame(
                    cfg.seed,
                    si,
                    attack_type,
                    distance_for_index(index),
                    index,
                    cfg.frame_size,
                );
                for padded in [false, true] {
                    let pad = if padded { cfg.padding_fraction } else { 0.0 };
                    let crop = crop_face(&frame.image, frame.bbox, pad)?;
                    out.push(GeneratedSample {
                        split,
                        index,
                        sample: FaceSample::new(crop, attack_type, frame.subject_id.clone(), frame.distance, padded)?,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Writes the corpus as PNG files plus `manifest.tsv` under `root`.
pub fn write_corpus(root: impl AsRef<Path>, cfg: &SynthConfig) -> Result<CorpusManifest> {
    let root = root.as_ref();
    let samples = generate(cfg)?;
    let mut records = Vec::with_capacity(samples.len());
    for g in &samples {
        let record = g.record();
        let path = root.join(&record.path);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        g.sample.image.save(&path)?;
        records.push(record);
    }
    let manifest = CorpusManifest {
        root: root.to_path_buf(),
        records,
    };
    manifest.write()?;
    Ok(manifest)
}
