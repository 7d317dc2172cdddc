//! Corpus manifest: one tab-separated record per image under the corpus root.
//!
//! ```text
//! # liveness-manifest v1
//! path  split  label  attack_type  subject  distance  padded
//! train/s003/attack/video_replay/0007_padded.png  train  attack  video_replay  s003  close  true
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::data::{AttackType, Distance, Label, Split};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.tsv";
const HEADER: &str = "# liveness-manifest v1";
const COLUMNS: &str = "path\tsplit\tlabel\tattack_type\tsubject\tdistance\tpadded";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestRecord {
    /// Relative to the corpus root, `/`-separated.
    pub path: String,
    pub split: Split,
    pub label: Label,
    pub attack_type: AttackType,
    pub subject_id: String,
    pub distance: Distance,
    pub padded: bool,
}

impl ManifestRecord {
    /// `<split>/<subject>/<class>/<attack_type>/<index>_<padded|tight>.png`
    pub fn canonical_path(
        split: Split,
        subject_id: &str,
        attack_type: AttackType,
        index: usize,
        padded: bool,
    ) -> String {
        format!(
            "{split}/{subject_id}/{}/{attack_type}/{index:04}_{}.png",
            attack_type.label(),
            if padded { "padded" } else { "tight" }
        )
    }

    fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.path, self.split, self.label, self.attack_type, self.subject_id, self.distance, self.padded
        )
    }

    fn parse(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.split('\t').collect();
        let [path, split, label, attack, subject, distance, padded] = fields[..] else {
            return Err(Error::Data(format!(
                "manifest line has {} fields: {line:?}",
                fields.len()
            )));
        };
        let record = Self {
            path: path.to_string(),
            split: split.parse()?,
            label: label.parse()?,
            attack_type: attack.parse()?,
            subject_id: subject.to_string(),
            distance: distance.parse()?,
            padded: padded
                .parse()
                .map_err(|_| Error::Data(format!("padded flag {padded:?}")))?,
        };
        if record.label != record.attack_type.label() {
            return Err(Error::Data(format!(
                "label {} inconsistent with attack type {}",
                record.label, record.attack_type
            )));
        }
        if record.subject_id.is_empty() || record.path.is_empty() {
            return Err(Error::Data(format!("empty subject or path: {line:?}")));
        }
        Ok(record)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorpusManifest {
    pub root: PathBuf,
    pub records: Vec<ManifestRecord>,
}

impl CorpusManifest {
    pub fn manifest_path(&self) -> PathBuf {
        self.root.join(MANIFEST_FILE)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{HEADER}").unwrap();
        writeln!(out, "{COLUMNS}").unwrap();
        for r in &self.records {
            writeln!(out, "{}", r.to_line()).unwrap();
        }
        out
    }

    pub fn parse(root: impl Into<PathBuf>, text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(HEADER) {
            return Err(Error::Data("manifest header missing".into()));
        }
        if lines.next() != Some(COLUMNS) {
            return Err(Error::Data("manifest column line missing".into()));
        }
        let records = lines
            .filter(|l| !l.trim().is_empty())
            .map(ManifestRecord::parse)
            .collect::<Result<Vec<_>>>()?;
        let manifest = Self {
            root: root.into(),
            records,
        };
        manifest.check_disjoint()?;
        Ok(manifest)
    }

    pub fn write(&self) -> Result<PathBuf> {
        let path = self.manifest_path();
        std::fs::write(&path, self.to_text()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    /// Reads `<root>/manifest.tsv` and checks that every referenced file exists.
    pub fn load(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref();
        let path = root.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest = Self::parse(root, &text)?;
        if let Some(missing) = manifest
            .records
            .iter()
            .map(|r| root.join(&r.path))
            .find(|p| !p.is_file())
        {
            return Err(Error::Data(format!(
                "manifest references missing file {}",
                missing.display()
            )));
        }
        Ok(manifest)
    }

    pub fn records_for(&self, split: Split) -> impl Iterator<Item = &ManifestRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn subjects(&self, split: Split) -> BTreeSet<&str> {
        self.records_for(split).map(|r| r.subject_id.as_str()).collect()
    }

    /// Fails if any subject appears in more than one split.
    pub fn check_disjoint(&self) -> Result<()> {
        let mut owner: BTreeMap<&str, Split> = BTreeMap::new();
        for r in &self.records {
            if let Some(prev) = owner.insert(&r.subject_id, r.split) {
                if prev != r.split {
                    return Err(Error::Data(format!(
                        "subject {} appears in both {prev} and {}",
                        r.subject_id, r.split
                    )));
                }
            }
        }
        Ok(())
    }

    /// CRC-32 of the manifest text, as 8 hex digits.
    pub fn checksum_hex(&self) -> String {
        format!("{:08x}", crc32fast::hash(self.to_text().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(split: Split, subject: &str, attack: AttackType, idx: usize) -> ManifestRecord {
        ManifestRecord {
            path: ManifestRecord::canonical_path(split, subject, attack, idx, idx % 2 == 1),
            split,
            label: attack.label(),
            attack_type: attack,
            subject_id: subject.into(),
            distance: Distance::Mid,
            padded: idx % 2 == 1,
        }
    }

    #[test]
    fn text_roundtrip() {
        let m = CorpusManifest {
            root: "/tmp/x".into(),
            records: vec![
                record(Split::Train, "s000", AttackType::None, 0),
                record(Split::Dev, "s001", AttackType::VideoReplay, 3),
            ],
        };
        assert_eq!(m.records[1].path, "dev/s001/attack/video_replay/0003_padded.png");
        assert_eq!(CorpusManifest::parse("/tmp/x", &m.to_text()).unwrap(), m);
    }

    #[test]
    fn shared_subject_rejected() {
        let m = CorpusManifest {
            root: "/tmp/x".into(),
            records: vec![
                record(Split::Train, "s000", AttackType::None, 0),
                record(Split::Test, "s000", AttackType::None, 1),
            ],
        };
        assert!(CorpusManifest::parse("/tmp/x", &m.to_text()).is_err());
    }

    #[test]
    fn inconsistent_label_rejected() {
        let text = format!("{HEADER}\n{COLUMNS}\na.png\ttrain\tbona_fide\tvideo_replay\ts0\tmid\tfalse\n");
        assert!(CorpusManifest::parse("/", &text).is_err());
    }

    #[test]
    fn missing_file_detected_on_load() {
        let dir = tempfile::tempdir().unwrap();
        let m = CorpusManifest {
            root: dir.path().into(),
            records: vec![record(Split::Train, "s000", AttackType::None, 0)],
        };
        m.write().unwrap();
        assert!(CorpusManifest::load(dir.path()).is_err());
    }
}
