//! Versioned binary model container.
//!
//! All integers and floats are little-endian. Layout (version 1):
//!
//! ```text
//! magic            8 bytes  "EXIFFIMD"
//! version          u32
//! scalar width     u8       4 = f32, 8 = f64
//! params           n_trees u32, sample_size u32,
//!                  max_depth tag u8 (0 auto, 1 fixed) + u32,
//!                  mode u8 (0 if, 1 eif, 2 eif+), eta f64,
//!                  contamination tag u8 (0 auto, 1 fixed) + f64, seed u64
//! n_features       u32
//! feature names    n_features x (len u32, utf-8 bytes)
//! sample_size      u32      effective subsample size
//! threshold        u8 present flag + scalar
//! n_trees          u32
//! per tree         subsample len u32 + u32 row indices,
//!                  node count u32, then per node:
//!                    kind u8 (0 leaf, 1 internal), depth u32, n_node u32
//!                    internal only: left u32, right u32, n_left u32, n_right u32,
//!                                   normal [scalar; p], intercept [scalar; p]
//! checksum         32 bytes SHA-256 of every preceding byte
//! ```
//!
//! The version is checked before the checksum so files from newer writers
//! fail with [`Error::Version`] rather than a checksum error.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::forest::{Contamination, Forest, ForestParams, MaxDepth, Mode, Node, Split, Tree};
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 8] = b"EXIFFIMD";
pub const FORMAT_VERSION: u32 = 1;
const CHECKSUM_LEN: usize = 32;

pub fn save_model<T: Scalar>(forest: &Forest<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_model(forest)).map_err(|e| Error::io(path, e))
}

pub fn load_model<T: Scalar>(path: impl AsRef<Path>) -> Result<Forest<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_model(&bytes)
}

pub fn write_model<T: Scalar>(forest: &Forest<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, FORMAT_VERSION);
    out.push(T::WIDTH);

    let params = &forest.params;
    put_u32(&mut out, params.n_trees as u32);
    put_u32(&mut out, params.sample_size as u32);
    match params.max_depth {
        MaxDepth::Auto => {
            out.push(0);
            put_u32(&mut out, 0);
        }
        MaxDepth::Fixed(d) => {
            out.push(1);
            put_u32(&mut out, d as u32);
        }
    }
    out.push(match params.mode {
        Mode::If => 0,
        Mode::Eif => 1,
        Mode::EifPlus => 2,
    });
    out.extend_from_slice(&params.eta.to_le_bytes());
    match params.contamination {
        Contamination::Auto => {
            out.push(0);
            out.extend_from_slice(&0f64.to_le_bytes());
        }
        Contamination::Fixed(c) => {
            out.push(1);
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    out.extend_from_slice(&params.seed.to_le_bytes());

    put_u32(&mut out, forest.n_features as u32);
    for name in &forest.feature_names {
        put_u32(&mut out, name.len() as u32);
        out.extend_from_slice(name.as_bytes());
    }
    put_u32(&mut out, forest.sample_size as u32);
    match forest.threshold {
        Some(t) => {
            out.push(1);
            t.write_le(&mut out);
        }
        None => {
            out.push(0);
            T::zero().write_le(&mut out);
        }
    }

    put_u32(&mut out, forest.trees.len() as u32);
    for tree in &forest.trees {
        put_u32(&mut out, tree.subsample.len() as u32);
        for &r in &tree.subsample {
            put_u32(&mut out, r as u32);
        }
        put_u32(&mut out, tree.nodes.len() as u32);
        for node in &tree.nodes {
            out.push(u8::from(node.split.is_some()));
            put_u32(&mut out, node.depth as u32);
            put_u32(&mut out, node.n_node as u32);
            if let Some(s) = &node.split {
                for v in [s.left, s.right, s.n_left, s.n_right] {
                    put_u32(&mut out, v as u32);
                }
                for &v in s.normal.iter().chain(&s.intercept) {
                    v.write_le(&mut out);
                }
            }
        }
    }

    let digest = Sha256::digest(&out);
    out.extend_from_slice(digest.as_slice());
    out
}

pub fn read_model<T: Scalar>(bytes: &[u8]) -> Result<Forest<T>> {
    if bytes.len() < MAGIC.len() + 4 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::Corruption("missing magic bytes".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    if bytes.len() < 12 + CHECKSUM_LEN {
        return Err(Error::Corruption("file truncated".into()));
    }
    let (body, checksum) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
    if Sha256::digest(body).as_slice() != checksum {
        return Err(Error::Corruption("checksum mismatch".into()));
    }

    let mut r = Reader { buf: body, pos: 12 };
    let width = r.u8()?;
    if width != T::WIDTH {
        return Err(Error::Corruption(format!(
            "model stores {}-byte scalars, reader expects {}",
            width,
            T::WIDTH
        )));
    }
    let n_trees = r.u32()? as usize;
    let sample_size = r.u32()? as usize;
    let max_depth = match (r.u8()?, r.u32()?) {
        (0, _) => MaxDepth::Auto,
        (1, d) => MaxDepth::Fixed(d as usize),
        (tag, _) => return Err(Error::Corruption(format!("bad max_depth tag {tag}"))),
    };
    let mode = match r.u8()? {
        0 => Mode::If,
        1 => Mode::Eif,
        2 => Mode::EifPlus,
        tag => return Err(Error::Corruption(format!("bad mode tag {tag}"))),
    };
    let eta = r.f64()?;
    let contamination = match (r.u8()?, r.f64()?) {
        (0, _) => Contamination::Auto,
        (1, c) => Contamination::Fixed(c),
        (tag, _) => return Err(Error::Corruption(format!("bad contamination tag {tag}"))),
    };
    let seed = r.u64()?;
    let params = ForestParams {
        n_trees,
        sample_size,
        max_depth,
        mode,
        eta,
        contamination,
        seed,
    };

    let p = r.u32()? as usize;
    let mut feature_names = Vec::with_capacity(p.min(1 << 16));
    for _ in 0..p {
        let len = r.u32()? as usize;
        let raw = r.take(len)?;
        let name = std::str::from_utf8(raw)
            .map_err(|_| Error::Corruption("feature name is not utf-8".into()))?;
        feature_names.push(name.to_string());
    }
    let effective_sample_size = r.u32()? as usize;
    let has_threshold = r.u8()?;
    let threshold_value = r.scalar::<T>()?;
    let threshold = match has_threshold {
        0 => None,
        1 => Some(threshold_value),
        tag => return Err(Error::Corruption(format!("bad threshold flag {tag}"))),
    };

    let tree_count = r.u32()? as usize;
    let mut trees = Vec::with_capacity(tree_count.min(1 << 16));
    for _ in 0..tree_count {
        let sub_len = r.u32()? as usize;
        let mut subsample = Vec::with_capacity(sub_len.min(1 << 20));
        for _ in 0..sub_len {
            subsample.push(r.u32()? as usize);
        }
        let node_count = r.u32()? as usize;
        let mut nodes = Vec::with_capacity(node_count.min(1 << 20));
        for _ in 0..node_count {
            let kind = r.u8()?;
            let depth = r.u32()? as usize;
            let n_node = r.u32()? as usize;
            match kind {
                0 => nodes.push(Node::leaf(depth, n_node)),
                1 => {
                    let left = r.u32()? as usize;
                    let right = r.u32()? as usize;
                    let n_left = r.u32()? as usize;
                    let n_right = r.u32()? as usize;
                    let normal = (0..p).map(|_| r.scalar::<T>()).collect::<Result<Vec<_>>>()?;
                    let intercept = (0..p).map(|_| r.scalar::<T>()).collect::<Result<Vec<_>>>()?;
                    let split = Split::new(normal, intercept, left, right, n_left, n_right);
                    nodes.push(Node::internal(depth, n_node, split));
                }
                tag => return Err(Error::Corruption(format!("bad node kind {tag}"))),
            }
        }
        trees.push(Tree::from_nodes(nodes, subsample, p)?);
    }
    if r.pos != body.len() {
        return Err(Error::Corruption("trailing bytes after last tree".into()));
    }
    Forest::from_trees(params, trees, feature_names, effective_sample_size, threshold)
        .map_err(|e| match e {
            Error::Corruption(_) => e,
            other => Error::Corruption(other.to_string()),
        })
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Corruption("unexpected end of model data".into()))?;
        let slice = &self.buf[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn scalar<T: Scalar>(&mut self) -> Result<T> {
        Ok(T::read_le(self.take(T::WIDTH as usize)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn forest<T: Scalar>(mode: Mode) -> (Forest<T>, Dataset<T>) {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows: Vec<Vec<T>> = (0..300)
            .map(|_| (0..3).map(|_| T::from_f64_lossy(rng.random::<f64>() * 10.0)).collect())
            .collect();
        let d = Dataset::from_rows(&rows, None).unwrap();
        let params = ForestParams::default()
            .with_mode(mode)
            .with_trees(12)
            .with_contamination(Contamination::Fixed(0.1));
        (Forest::fit(&d, &params).unwrap(), d)
    }

    #[test]
    fn round_trip_is_exact() {
        for mode in [Mode::If, Mode::Eif, Mode::EifPlus] {
            let (f, d) = forest::<f64>(mode);
            let back: Forest<f64> = read_model(&write_model(&f)).unwrap();
            assert_eq!(back, f);
            assert_eq!(back.score_batch(&d).unwrap(), f.score_batch(&d).unwrap());
        }
        let (f, _) = forest::<f32>(Mode::Eif);
        assert_eq!(read_model::<f32>(&write_model(&f)).unwrap(), f);
    }

    #[test]
    fn precision_mismatch_is_rejected() {
        let (f, _) = forest::<f32>(Mode::If);
        assert!(matches!(read_model::<f64>(&write_model(&f)), Err(Error::Corruption(_))));
    }

    #[test]
    fn truncated_file_is_corruption() {
        let (f, _) = forest::<f64>(Mode::EifPlus);
        let bytes = write_model(&f);
        for cut in [13, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(read_model::<f64>(&bytes[..cut]), Err(Error::Corruption(_))));
        }
    }

    #[test]
    fn flipped_byte_is_corruption() {
        let (f, _) = forest::<f64>(Mode::Eif);
        let mut bytes = write_model(&f);
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        assert!(matches!(read_model::<f64>(&bytes), Err(Error::Corruption(_))));
    }

    #[test]
    fn future_version_is_rejected() {
        let (f, _) = forest::<f64>(Mode::If);
        let mut bytes = write_model(&f);
        bytes[8..12].copy_from_slice(&(FORMAT_VERSION + 1).to_le_bytes());
        assert!(matches!(
            read_model::<f64>(&bytes),
            Err(Error::Version { found: 2, supported: 1 })
        ));
    }
}
