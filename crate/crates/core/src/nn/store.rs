//! Named parameter storage with a versioned binary checkpoint format.
//!
//! Layout (little-endian): magic `VQSP`, format version u32, a
//! length-prefixed UTF-8 metadata string (JSON, caller-defined), entry
//! count u32, then per entry: name, ndim, dims, and f32 data.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{ArrayD, IxDyn};

use crate::error::{Error, Result};

use super::Scalar;

const MAGIC: &[u8; 4] = b"VQSP";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Handle to one parameter in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

pub struct ParamStore<F: Scalar> {
    names: Vec<String>,
    values: Vec<ArrayD<F>>,
}

impl<F: Scalar> Default for ParamStore<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Scalar> ParamStore<F> {
    pub fn new() -> Self {
        ParamStore {
            names: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, value: ArrayD<F>) -> ParamId {
        let name = name.into();
        assert!(
            !self.names.contains(&name),
            "duplicate parameter name {name}"
        );
        self.names.push(name);
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, id: ParamId) -> &ArrayD<F> {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut ArrayD<F> {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }

    /// Write all parameters plus a caller metadata string.
    pub fn save(&self, path: &Path, metadata: &str) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut w = BufWriter::new(file);
        let io_err = |e: std::io::Error| Error::io(path.display().to_string(), e);
        w.write_all(MAGIC).map_err(io_err)?;
        w.write_u32::<LittleEndian>(CHECKPOINT_VERSION).map_err(io_err)?;
        let meta = metadata.as_bytes();
        w.write_u64::<LittleEndian>(meta.len() as u64).map_err(io_err)?;
        w.write_all(meta).map_err(io_err)?;
        w.write_u32::<LittleEndian>(self.values.len() as u32)
            .map_err(io_err)?;
        for (name, value) in self.names.iter().zip(self.values.iter()) {
            let nb = name.as_bytes();
            w.write_u32::<LittleEndian>(nb.len() as u32).map_err(io_err)?;
            w.write_all(nb).map_err(io_err)?;
            w.write_u32::<LittleEndian>(value.ndim() as u32).map_err(io_err)?;
            for &d in value.shape() {
                w.write_u64::<LittleEndian>(d as u64).map_err(io_err)?;
            }
            for &v in value.iter() {
                w.write_f32::<LittleEndian>(v.to_f64() as f32).map_err(io_err)?;
            }
        }
        w.flush().map_err(io_err)?;
        Ok(())
    }

    /// Read a checkpoint written by [`ParamStore::save`]; returns the store
    /// and the metadata string.
    pub fn load(path: &Path) -> Result<(Self, String)> {
        let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut r = BufReader::new(file);
        let io_err = |e: std::io::Error| Error::io(path.display().to_string(), e);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io_err)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint(format!(
                "{}: bad magic {:?}",
                path.display(),
                magic
            )));
        }
        let version = r.read_u32::<LittleEndian>().map_err(io_err)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "{}: unsupported checkpoint version {version} (expected {CHECKPOINT_VERSION})",
                path.display()
            )));
        }
        let meta_len = r.read_u64::<LittleEndian>().map_err(io_err)? as usize;
        let mut meta = vec![0u8; meta_len];
        r.read_exact(&mut meta).map_err(io_err)?;
        let metadata = String::from_utf8(meta)
            .map_err(|e| Error::Checkpoint(format!("{}: metadata not UTF-8: {e}", path.display())))?;
        let count = r.read_u32::<LittleEndian>().map_err(io_err)? as usize;
        let mut store = ParamStore::new();
        for _ in 0..count {
            let name_len = r.read_u32::<LittleEndian>().map_err(io_err)? as usize;
            let mut name = vec![0u8; name_len];
            r.read_exact(&mut name).map_err(io_err)?;
            let name = String::from_utf8(name)
                .map_err(|e| Error::Checkpoint(format!("{}: name not UTF-8: {e}", path.display())))?;
            let ndim = r.read_u32::<LittleEndian>().map_err(io_err)? as usize;
            let mut dims = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                dims.push(r.read_u64::<LittleEndian>().map_err(io_err)? as usize);
            }
            let n: usize = dims.iter().product();
            let mut data = Vec::with_capacity(n);
            for _ in 0..n {
                data.push(F::from_f64(r.read_f32::<LittleEndian>().map_err(io_err)? as f64));
            }
            let arr = ArrayD::from_shape_vec(IxDyn(&dims), data)
                .map_err(|e| Error::Checkpoint(format!("{}: bad shape: {e}", path.display())))?;
            store.add(name, arr);
        }
        Ok((store, metadata))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("test.ckpt");
        let mut store = ParamStore::<f32>::new();
        store.add("layer.w", arr2(&[[1.0f32, 2.0], [3.0, 4.0]]).into_dyn());
        store.add("layer.b", ndarray::arr1(&[0.5f32]).into_dyn());
        store.save(&path, "{\"kind\":\"test\"}").unwrap();

        let (loaded, meta) = ParamStore::<f32>::load(&path).unwrap();
        assert_eq!(meta, "{\"kind\":\"test\"}");
        assert_eq!(loaded.len(), 2);
        let id = loaded.id_of("layer.w").unwrap();
        assert_eq!(loaded.value(id).shape(), &[2, 2]);
        assert_eq!(loaded.value(id)[[1, 0]], 3.0);
    }

    #[test]
    fn rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        std::fs::write(&path, b"NOPE").unwrap();
        assert!(ParamStore::<f32>::load(&path).is_err());
    }
}
