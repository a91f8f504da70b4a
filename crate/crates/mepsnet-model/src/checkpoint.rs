//! Checkpoint container: magic "MEPS", format version, a JSON metadata
//! block, then named tensors as little-endian f32. The same container holds
//! model checkpoints (metadata = architecture config) and optimizer state
//! (metadata = step counter).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use tensor_core::{Element, Tensor};

use crate::config::MepsNetConfig;
use crate::error::ModelError;
use crate::model::MepsNet;
use crate::Result;

pub const MAGIC: &[u8; 4] = b"MEPS";
pub const FORMAT_VERSION: u32 = 1;

fn write_u32(w: &mut impl Write, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

/// Writes a container. Tensor values pass through f32, the storage
/// precision.
pub fn write_container<'a, T: Element>(
    path: &Path,
    meta_json: &str,
    tensors: impl Iterator<Item = (&'a str, &'a Tensor<T>)>,
    count: usize,
) -> Result<()> {
    let file = File::create(path).map_err(|e| ModelError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| ModelError::io(path, e);

    w.write_all(MAGIC).map_err(io_err)?;
    write_u32(&mut w, FORMAT_VERSION).map_err(io_err)?;
    write_u32(&mut w, meta_json.len() as u32).map_err(io_err)?;
    w.write_all(meta_json.as_bytes()).map_err(io_err)?;
    write_u32(&mut w, count as u32).map_err(io_err)?;

    let mut written = 0usize;
    for (name, tensor) in tensors {
        write_u32(&mut w, name.len() as u32).map_err(io_err)?;
        w.write_all(name.as_bytes()).map_err(io_err)?;
        write_u32(&mut w, tensor.shape().len() as u32).map_err(io_err)?;
        for &d in tensor.shape() {
            write_u32(&mut w, d as u32).map_err(io_err)?;
        }
        for v in tensor.data() {
            w.write_all(&(v.into_f64() as f32).to_le_bytes())
                .map_err(io_err)?;
        }
        written += 1;
    }
    if written != count {
        return Err(ModelError::Checkpoint(format!(
            "declared {count} tensors, wrote {written}"
        )));
    }
    w.flush().map_err(io_err)
}

/// Reads a container back: (metadata JSON, named f32 tensors in file order).
pub fn read_container(path: &Path) -> Result<(String, Vec<(String, Tensor<f32>)>)> {
    let file = File::open(path).map_err(|e| ModelError::io(path, e))?;
    let mut r = BufReader::new(file);
    let io_err = |e| ModelError::io(path, e);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io_err)?;
    if &magic != MAGIC {
        return Err(ModelError::Checkpoint(format!(
            "bad magic {magic:?}, not a checkpoint"
        )));
    }
    let version = read_u32(&mut r).map_err(io_err)?;
    if version != FORMAT_VERSION {
        return Err(ModelError::Checkpoint(format!(
            "format version {version} unsupported (expected {FORMAT_VERSION})"
        )));
    }
    let meta_len = read_u32(&mut r).map_err(io_err)? as usize;
    let mut meta = vec![0u8; meta_len];
    r.read_exact(&mut meta).map_err(io_err)?;
    let meta = String::from_utf8(meta)
        .map_err(|e| ModelError::Checkpoint(format!("metadata not UTF-8: {e}")))?;

    let count = read_u32(&mut r).map_err(io_err)? as usize;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = read_u32(&mut r).map_err(io_err)? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name).map_err(io_err)?;
        let name = String::from_utf8(name)
            .map_err(|e| ModelError::Checkpoint(format!("tensor name not UTF-8: {e}")))?;
        let rank = read_u32(&mut r).map_err(io_err)? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(read_u32(&mut r).map_err(io_err)? as usize);
        }
        let numel: usize = shape.iter().product();
        let mut data = Vec::with_capacity(numel);
        let mut buf = [0u8; 4];
        for _ in 0..numel {
            r.read_exact(&mut buf).map_err(io_err)?;
            data.push(f32::from_le_bytes(buf));
        }
        let tensor = Tensor::new(shape, data)
            .map_err(|e| ModelError::Checkpoint(format!("tensor {name}: {e}")))?;
        tensors.push((name, tensor));
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing).map_err(io_err)? != 0 {
        return Err(ModelError::Checkpoint("trailing bytes after tensors".into()));
    }
    Ok((meta, tensors))
}

pub fn save_model<T: Element>(path: &Path, model: &MepsNet<T>) -> Result<()> {
    let meta = serde_json::to_string(model.config())?;
    let count = model.params().len();
    write_container(path, &meta, model.params().iter(), count)
}

/// Loads a checkpoint, validating that its tensors exactly populate the
/// architecture named in the metadata.
pub fn load_model<T: Element>(path: &Path) -> Result<MepsNet<T>> {
    let (meta, tensors) = read_container(path)?;
    let config: MepsNetConfig = serde_json::from_str(&meta)?;
    let mut model = MepsNet::<T>::new(config)?;
    if tensors.len() != model.params().len() {
        return Err(ModelError::Checkpoint(format!(
            "checkpoint has {} tensors, architecture needs {}",
            tensors.len(),
            model.params().len()
        )));
    }
    for (name, stored) in tensors {
        let param = model
            .params_mut()
            .try_get_mut(&name)
            .ok_or_else(|| ModelError::Checkpoint(format!("unknown tensor {name}")))?;
        if param.shape() != stored.shape() {
            return Err(ModelError::Checkpoint(format!(
                "tensor {name}: shape {:?} does not match {:?}",
                stored.shape(),
                param.shape()
            )));
        }
        *param = stored.cast::<T>();
    }
    Ok(model)
}
