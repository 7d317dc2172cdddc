use image::RgbImage;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{normalize_face, AttackType, CorpusManifest, FaceSample, Label, Split};
use crate::error::{Error, Result};
use crate::net::InputScaling;
use crate::tensor::Tensor;

/// Normalized face tensors held in memory, plus their labels.
#[derive(Clone, Debug)]
pub struct Dataset {
    sample_shape: [usize; 3],
    inputs: Vec<f32>,
    pub labels: Vec<Label>,
    pub attack_types: Vec<AttackType>,
    pub subjects: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Batch {
    pub inputs: Tensor<f32>,
    pub labels: Vec<usize>,
    /// Positions of the batch rows in the dataset.
    pub indices: Vec<usize>,
}

impl Dataset {
    pub fn from_samples(samples: &[FaceSample], scaling: InputScaling) -> Result<Self> {
        let mut ds = Self::empty();
        for s in samples {
            ds.push(&s.image, s.attack_type, &s.subject_id, scaling)?;
        }
        Ok(ds)
    }

    /// Loads every image of `split` listed in the manifest.
    pub fn from_manifest(manifest: &CorpusManifest, split: Split, scaling: InputScaling) -> Result<Self> {
        let mut ds = Self::empty();
        for r in manifest.records_for(split) {
            let path = manifest.root.join(&r.path);
            let image = image::open(&path)
                .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?
                .to_rgb8();
            ds.push(&image, r.attack_type, &r.subject_id, scaling)?;
        }
        Ok(ds)
    }

    fn empty() -> Self {
        Self {
            sample_shape: [0; 3],
            inputs: Vec::new(),
            labels: Vec::new(),
            attack_types: Vec::new(),
            subjects: Vec::new(),
        }
    }

    pub fn push(
        &mut self,
        image: &RgbImage,
        attack_type: AttackType,
        subject: &str,
        scaling: InputScaling,
    ) -> Result<()> {
        let t = normalize_face(image, scaling);
        let shape: [usize; 3] = t.shape().try_into().expect("rank 3");
        if self.labels.is_empty() {
            self.sample_shape = shape;
        } else if shape != self.sample_shape {
            return Err(Error::shape("dataset sample", self.sample_shape, shape));
        }
        self.inputs.extend_from_slice(t.data());
        self.labels.push(attack_type.label());
        self.attack_types.push(attack_type);
        self.subjects.push(subject.to_string());
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample_shape(&self) -> [usize; 3] {
        self.sample_shape
    }

    /// Stacks the given rows into one `[n, C, H, W]` tensor.
    pub fn gather(&self, indices: &[usize]) -> Result<Tensor<f32>> {
        let stride: usize = self.sample_shape.iter().product();
        let mut data = Vec::with_capacity(stride * indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::shape("dataset index", self.len(), i));
            }
            data.extend_from_slice(&self.inputs[i * stride..(i + 1) * stride]);
        }
        let [c, h, w] = self.sample_shape;
        Tensor::new(vec![indices.len(), c, h, w], data)
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let stride: usize = self.sample_shape.iter().product();
        let gathered = self.gather(indices)?;
        debug_assert_eq!(gathered.len(), stride * indices.len());
        Ok(Self {
            sample_shape: self.sample_shape,
            inputs: gathered.into_data(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            attack_types: indices.iter().map(|&i| self.attack_types[i]).collect(),
            subjects: indices.iter().map(|&i| self.subjects[i].clone()).collect(),
        })
    }

    /// The first `n / 2` samples of each class (in dataset order); `n` rounded
    /// down to even. Used for overfit sanity runs.
    pub fn balanced_prefix(&self, n: usize) -> Result<Self> {
        let per_class = n / 2;
        let pick = |label| -> Vec<usize> {
            (0..self.len())
                .filter(|&i| self.labels[i] == label)
                .take(per_class)
                .collect()
        };
        let (bona, attack) = (pick(Label::BonaFide), pick(Label::Attack));
        if bona.len() < per_class || attack.len() < per_class || per_class == 0 {
            return Err(Error::Data(format!(
                "cannot draw {per_class} samples per class from {} bona fide / {} attack",
                bona.len(),
                attack.len()
            )));
        }
        let mut idx: Vec<usize> = bona.into_iter().chain(attack).collect();
        idx.sort_unstable();
        self.subset(&idx)
    }

    pub fn batches(&self, batch_size: usize, seed: u64, epoch: u64) -> impl Iterator<Item = Result<Batch>> + '_ {
        let order = epoch_order(self.len(), seed, epoch);
        let size = batch_size.max(1);
        let chunks: Vec<Vec<usize>> = order.chunks(size).map(<[usize]>::to_vec).collect();
        chunks.into_iter().map(move |indices| {
            Ok(Batch {
                inputs: self.gather(&indices)?,
                labels: indices.iter().map(|&i| self.labels[i].class_index()).collect(),
                indices,
            })
        })
    }
}

/// Sample order for one epoch; a pure function of `(len, seed, epoch)`.
pub fn epoch_order(len: usize, seed: u64, epoch: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut rng);
    order
}

/// One shuffled pass over a manifest split in batches of `batch_size`; the
/// last batch may be short.
pub fn iterate_batches(
    manifest: &CorpusManifest,
    split: Split,
    batch_size: usize,
    seed: u64,
    epoch: u64,
    scaling: InputScaling,
) -> Result<Vec<Batch>> {
    if batch_size == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    let ds = Dataset::from_manifest(manifest, split, scaling)?;
    ds.batches(batch_size, seed, epoch).collect()
}
