//! Dataset schema, cropping and normalization, subject-disjoint splits,
//! batching, and the synthetic spoof corpus.

mod dataset;
mod face;
mod manifest;
mod split;
pub mod synth;

pub use dataset::{epoch_order, iterate_batches, Batch, Dataset};
pub use face::{crop_face, crop_face_sized, crop_region, normalize_face, resize_bilinear, FACE_SIZE};
pub use manifest::{CorpusManifest, ManifestRecord, MANIFEST_FILE};
pub use split::{split_by_subject, SubjectSplit, DEFAULT_RATIOS};

use std::fmt;
use std::str::FromStr;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default background margin added around a face box before cropping,
/// as a fraction of the box's larger side.
pub const DEFAULT_PADDING_FRACTION: f64 = 0.3;

macro_rules! string_enum {
    ($ty:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self {
                    $($ty::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($ty::$variant),)+
                    other => Err(Error::Data(format!(
                        concat!("unknown ", stringify!($ty), " {:?}"),
                        other
                    ))),
                }
            }
        }
    };
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    BonaFide,
    Attack,
}

string_enum!(Label { BonaFide => "bona_fide", Attack => "attack" });

impl Label {
    /// Output unit of the classifier for this label.
    pub fn class_index(self) -> usize {
        match self {
            Label::BonaFide => 0,
            Label::Attack => 1,
        }
    }

    /// Bona fide iff `score >= threshold`.
    pub fn from_score(score: f64, threshold: f64) -> Self {
        if score >= threshold {
            Label::BonaFide
        } else {
            Label::Attack
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackType {
    None,
    NormalPrint,
    GlossyPrint,
    VideoReplay,
    NormalPrintMask,
    GlossyPrintMask,
}

string_enum!(AttackType {
    None => "none",
    NormalPrint => "normal_print",
    GlossyPrint => "glossy_print",
    VideoReplay => "video_replay",
    NormalPrintMask => "normal_print_mask",
    GlossyPrintMask => "glossy_print_mask",
});

impl AttackType {
    pub const ATTACKS: [AttackType; 5] = [
        AttackType::NormalPrint,
        AttackType::GlossyPrint,
        AttackType::VideoReplay,
        AttackType::NormalPrintMask,
        AttackType::GlossyPrintMask,
    ];

    pub fn label(self) -> Label {
        if self == AttackType::None {
            Label::BonaFide
        } else {
            Label::Attack
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    Mid,
    Close,
}

string_enum!(Distance { Mid => "mid", Close => "close" });

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Dev,
    Test,
}

string_enum!(Split { Train => "train", Dev => "dev", Test => "test" });

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];
}

/// Face box in frame pixel coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub x: i32,
    pub y: i32,
    pub w: i32,
    pub h: i32,
}

impl BBox {
    pub fn new(x: i32, y: i32, w: i32, h: i32) -> Result<Self> {
        let b = Self { x, y, w, h };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.w <= 0 || self.h <= 0 {
            return Err(Error::Data(format!("bbox {self} must have positive width and height")));
        }
        Ok(())
    }

    pub fn intersects_frame(&self, width: u32, height: u32) -> bool {
        let (x1, y1) = (self.x as i64 + self.w as i64, self.y as i64 + self.h as i64);
        (self.x as i64) < width as i64 && (self.y as i64) < height as i64 && x1 > 0 && y1 > 0
    }

    /// Centered square of side `0.8 · min(width, height)`.
    pub fn center_square(width: u32, height: u32) -> Self {
        let side = ((width.min(height) as f64) * 0.8).floor().max(1.0) as i32;
        Self {
            x: (width as i32 - side) / 2,
            y: (height as i32 - side) / 2,
            w: side,
            h: side,
        }
    }
}

impl fmt::Display for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.x, self.y, self.w, self.h)
    }
}

impl FromStr for BBox {
    type Err = Error;

    /// Parses `x,y,w,h`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<_> = s.split(',').map(|p| p.trim().parse::<i32>()).collect();
        match parts[..] {
            [Ok(x), Ok(y), Ok(w), Ok(h)] => BBox::new(x, y, w, h),
            _ => Err(Error::Data(format!("bbox {s:?} is not x,y,w,h"))),
        }
    }
}

/// One labeled face crop.
#[derive(Clone, Debug)]
pub struct FaceSample {
    pub image: RgbImage,
    pub label: Label,
    pub attack_type: AttackType,
    pub subject_id: String,
    pub distance: Distance,
    pub padded: bool,
}

impl FaceSample {
    pub fn new(
        image: RgbImage,
        attack_type: AttackType,
        subject_id: impl Into<String>,
        distance: Distance,
        padded: bool,
    ) -> Result<Self> {
        let subject_id = subject_id.into();
        if subject_id.is_empty() {
            return Err(Error::Data("subject id must be non-empty".into()));
        }
        Ok(Self {
            image,
            label: attack_type.label(),
            attack_type,
            subject_id,
            distance,
            padded,
        })
    }
}
