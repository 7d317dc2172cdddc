//! LVW1 weight files.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic        4 bytes  "LVW1"
//! version      u32      1
//! arch_len     u32      byte length of the arch blob
//! arch blob             8 × u32  input_size, input_channels, block1_channels,
//!                                block1_convs, block2_channels, block2_convs,
//!                                hidden_width, classes
//!                       4 × f64  conv_dropout, head_dropout, bn_epsilon, bn_momentum
//!                       u8       input scaling (0 = unit, 1 = raw)
//!                       f64      decision threshold
//! count        u32      number of tensor records
//! per tensor:  u32 name length, UTF-8 name, u32 rank, rank × u32 dims,
//!              product(dims) × f32 payload
//! crc32        u32      CRC-32 (IEEE) of every preceding byte
//! ```
//!
//! Tensor records appear in network order: each layer's parameters, then
//! its buffers (BatchNorm running mean/variance).

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::net::{ArchConfig, InputScaling, LivenessNet};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"LVW1";
pub const FORMAT_VERSION: u32 = 1;
const ARCH_BLOB_LEN: u32 = 8 * 4 + 4 * 8 + 1 + 8;

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn to_u32(v: usize, what: &str) -> u32 {
    u32::try_from(v).unwrap_or_else(|_| panic!("{what} {v} does not fit in u32"))
}

pub fn to_bytes(net: &LivenessNet) -> Vec<u8> {
    let arch = net.arch();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, FORMAT_VERSION);
    put_u32(&mut out, ARCH_BLOB_LEN);
    for v in [
        arch.input_size,
        arch.input_channels,
        arch.block1_channels,
        arch.block1_convs,
        arch.block2_channels,
        arch.block2_convs,
        arch.hidden_width,
        arch.classes,
    ] {
        put_u32(&mut out, to_u32(v, "arch field"));
    }
    for v in [arch.conv_dropout, arch.head_dropout, arch.bn_epsilon, arch.bn_momentum] {
        put_f64(&mut out, v);
    }
    out.push(match arch.input_scaling {
        InputScaling::Unit => 0,
        InputScaling::Raw => 1,
    });
    put_f64(&mut out, net.threshold);

    let tensors = net.named_tensors();
    put_u32(&mut out, to_u32(tensors.len(), "tensor count"));
    for (name, t) in tensors {
        put_u32(&mut out, to_u32(name.len(), "name length"));
        out.extend_from_slice(name.as_bytes());
        put_u32(&mut out, to_u32(t.rank(), "rank"));
        for &d in t.shape() {
            put_u32(&mut out, to_u32(d, "dim"));
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    put_u32(&mut out, crc);
    out
}

/// Trailing CRC-32 of a serialized model, as 8 lowercase hex digits.
pub fn checksum_hex(bytes: &[u8]) -> Option<String> {
    let tail = bytes.len().checked_sub(4)?;
    let crc = u32::from_le_bytes(bytes[tail..].try_into().ok()?);
    Some(format!("{crc:08x}"))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Data("weight file ends inside a record".into()))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn usize(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<LivenessNet> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::Magic);
    }
    if bytes.len() < 12 {
        return Err(Error::Checksum);
    }
    let (payload, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    if crc32fast::hash(payload) != stored {
        return Err(Error::Checksum);
    }

    let mut cur = Cursor { bytes: payload, pos: 4 };
    let version = cur.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Version(version));
    }
    let arch_len = cur.u32()?;
    if arch_len != ARCH_BLOB_LEN {
        return Err(Error::Data(format!(
            "arch blob length {arch_len}, expected {ARCH_BLOB_LEN}"
        )));
    }
    let arch = ArchConfig {
        input_size: cur.usize()?,
        input_channels: cur.usize()?,
        block1_channels: cur.usize()?,
        block1_convs: cur.usize()?,
        block2_channels: cur.usize()?,
        block2_convs: cur.usize()?,
        hidden_width: cur.usize()?,
        classes: cur.usize()?,
        conv_dropout: cur.f64()?,
        head_dropout: cur.f64()?,
        bn_epsilon: cur.f64()?,
        bn_momentum: cur.f64()?,
        input_scaling: match cur.take(1)?[0] {
            0 => InputScaling::Unit,
            1 => InputScaling::Raw,
            other => return Err(Error::Data(format!("unknown input scaling tag {other}"))),
        },
    };
    let threshold = cur.f64()?;

    let mut net = LivenessNet::build(arch, 0)?;
    net.threshold = threshold;
    let count = cur.usize()?;
    let mut slots = net.named_tensors_mut();
    if count != slots.len() {
        return Err(Error::shape("weight file tensor count", slots.len(), count));
    }
    for (expected_name, slot) in slots.iter_mut() {
        let name_len = cur.usize()?;
        let name =
            std::str::from_utf8(cur.take(name_len)?).map_err(|_| Error::Data("tensor name is not UTF-8".into()))?;
        if name != expected_name.as_str() {
            return Err(Error::shape("weight file tensor order", &*expected_name, name));
        }
        let rank = cur.usize()?;
        let dims = (0..rank).map(|_| cur.usize()).collect::<Result<Vec<_>>>()?;
        if dims != slot.shape() {
            return Err(Error::shape(format!("tensor {name}"), slot.shape(), &dims));
        }
        let raw = cur.take(slot.len() * 4)?;
        let values: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        **slot = Tensor::new(dims, values)?;
    }
    drop(slots);
    if cur.pos != payload.len() {
        return Err(Error::Data("trailing bytes after last tensor".into()));
    }
    Ok(net)
}

pub fn save_weights<W: Write>(net: &LivenessNet, mut sink: W) -> std::io::Result<()> {
    sink.write_all(&to_bytes(net))?;
    sink.flush()
}

pub fn load_weights<R: Read>(mut source: R) -> Result<LivenessNet> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes).map_err(|e| Error::io("<weights>", e))?;
    from_bytes(&bytes)
}

pub fn save_to_path(net: &LivenessNet, path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = to_bytes(net);
    std::fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
    Ok(checksum_hex(&bytes).expect("non-empty file"))
}

/// Loads a model and returns it with its checksum.
pub fn load_from_path(path: impl AsRef<Path>) -> Result<(LivenessNet, String)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let net = from_bytes(&bytes)?;
    Ok((net, checksum_hex(&bytes).expect("validated file")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample_net() -> LivenessNet {
        let mut net = LivenessNet::build(ArchConfig::default(), 17).unwrap();
        net.threshold = 0.4375;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // Perturb the running stats so buffers round-trip non-trivially.
        for (name, t) in net.named_tensors_mut() {
            if name.ends_with("running_mean") || name.ends_with("running_var") {
                t.data_mut().iter_mut().for_each(|v| *v += rng.gen_range(0.0..0.5));
            }
        }
        net
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let net = sample_net();
        let bytes = to_bytes(&net);
        let back = from_bytes(&bytes).unwrap();
        assert_eq!(back.arch(), net.arch());
        assert_eq!(back.threshold, net.threshold);
        assert_eq!(to_bytes(&back), bytes);
        let x = Tensor::<f32>::from_fn(&[2, 3, 32, 32], |i| ((i * 7919) % 255) as f32 / 255.0);
        let a = net.predict_proba(&x).unwrap();
        let b = back.predict_proba(&x).unwrap();
        let bits = |t: &Tensor<f32>| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn truncated_file_fails_checksum() {
        let bytes = to_bytes(&sample_net());
        for cut in [bytes.len() - 1, bytes.len() / 2, 13] {
            assert!(matches!(from_bytes(&bytes[..cut]), Err(Error::Checksum)), "cut {cut}");
        }
    }

    #[test]
    fn flipped_bit_fails_checksum() {
        let mut bytes = to_bytes(&sample_net());
        bytes[100] ^= 0x10;
        assert!(matches!(from_bytes(&bytes), Err(Error::Checksum)));
    }

    fn reseal(bytes: &mut Vec<u8>) {
        bytes.truncate(bytes.len() - 4);
        let crc = crc32fast::hash(bytes);
        bytes.extend_from_slice(&crc.to_le_bytes());
    }

    #[test]
    fn unknown_version_rejected() {
        let mut bytes = to_bytes(&sample_net());
        bytes[4..8].copy_from_slice(&999u32.to_le_bytes());
        reseal(&mut bytes);
        assert!(matches!(from_bytes(&bytes), Err(Error::Version(999))));
    }

    #[test]
    fn shape_mismatch_rejected() {
        // Claim hidden_width 32 while the payload still holds 64-wide tensors.
        let mut bytes = to_bytes(&sample_net());
        let hidden_at = 12 + 6 * 4;
        bytes[hidden_at..hidden_at + 4].copy_from_slice(&32u32.to_le_bytes());
        reseal(&mut bytes);
        assert!(matches!(from_bytes(&bytes), Err(Error::Shape { .. })));
    }

    #[test]
    fn bad_magic_rejected() {
        assert!(matches!(from_bytes(b"PNG\0rest"), Err(Error::Magic)));
    }

    #[test]
    fn checksum_hex_matches_trailer() {
        let bytes = to_bytes(&sample_net());
        let crc = crc32fast::hash(&bytes[..bytes.len() - 4]);
        assert_eq!(checksum_hex(&bytes).unwrap(), format!("{crc:08x}"));
    }
}
