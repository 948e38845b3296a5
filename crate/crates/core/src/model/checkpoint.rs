//! Binary model checkpoints: spec header, f32 parameters, training log.
//!
//! Little-endian throughout. Layout:
//!
//! ```text
//! magic "LSMD", version u16
//! arch u8, input_len u32
//! n_hidden u8, hidden sizes u32...
//! conv: channels u32, kernel u32, n_dilations u8, dilations u32..., dropout f64
//! best_epoch u32
//! n_params u64, params f32...
//! n_epochs u32, (train f64, val f64)...
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Arch, ConvSpec, EpochLog, ModelError, ModelSpec, TrainedModel};

const MAGIC: &[u8; 4] = b"LSMD";
const VERSION: u16 = 1;

fn arch_tag(arch: Arch) -> u8 {
    match arch {
        Arch::Linear => 0,
        Arch::Mlp => 1,
        Arch::DilatedConv => 2,
    }
}

fn arch_from_tag(tag: u8) -> Result<Arch, ModelError> {
    match tag {
        0 => Ok(Arch::Linear),
        1 => Ok(Arch::Mlp),
        2 => Ok(Arch::DilatedConv),
        other => Err(ModelError::BadCheckpoint(format!("unknown arch tag {other}"))),
    }
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<(), ModelError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[arch_tag(model.spec.arch)])?;
    w.write_all(&(model.spec.input_len as u32).to_le_bytes())?;
    w.write_all(&[model.spec.hidden_sizes.len() as u8])?;
    for &h in &model.spec.hidden_sizes {
        w.write_all(&(h as u32).to_le_bytes())?;
    }
    let conv = &model.spec.conv;
    w.write_all(&(conv.channels as u32).to_le_bytes())?;
    w.write_all(&(conv.kernel as u32).to_le_bytes())?;
    w.write_all(&[conv.dilations.len() as u8])?;
    for &d in &conv.dilations {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    w.write_all(&conv.dropout.to_le_bytes())?;
    w.write_all(&(model.best_epoch as u32).to_le_bytes())?;
    w.write_all(&(model.params.len() as u64).to_le_bytes())?;
    for &p in &model.params {
        w.write_all(&p.to_le_bytes())?;
    }
    w.write_all(&(model.training_log.len() as u32).to_le_bytes())?;
    for e in &model.training_log {
        w.write_all(&e.train_loss.to_le_bytes())?;
        w.write_all(&e.val_loss.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_exact<const N: usize>(r: &mut impl Read) -> Result<[u8; N], ModelError> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_u32(r: &mut impl Read) -> Result<u32, ModelError> {
    Ok(u32::from_le_bytes(read_exact::<4>(r)?))
}

pub fn load_model(path: &Path) -> Result<TrainedModel, ModelError> {
    let mut r = BufReader::new(File::open(path)?);
    let magic = read_exact::<4>(&mut r)?;
    if &magic != MAGIC {
        return Err(ModelError::BadCheckpoint("bad magic".into()));
    }
    let version = u16::from_le_bytes(read_exact::<2>(&mut r)?);
    if version != VERSION {
        return Err(ModelError::BadCheckpoint(format!(
            "unsupported version {version}"
        )));
    }
    let arch = arch_from_tag(read_exact::<1>(&mut r)?[0])?;
    let input_len = read_u32(&mut r)? as usize;
    let n_hidden = read_exact::<1>(&mut r)?[0] as usize;
    let mut hidden_sizes = Vec::with_capacity(n_hidden);
    for _ in 0..n_hidden {
        hidden_sizes.push(read_u32(&mut r)? as usize);
    }
    let channels = read_u32(&mut r)? as usize;
    let kernel = read_u32(&mut r)? as usize;
    let n_dil = read_exact::<1>(&mut r)?[0] as usize;
    let mut dilations = Vec::with_capacity(n_dil);
    for _ in 0..n_dil {
        dilations.push(read_u32(&mut r)? as usize);
    }
    let dropout = f64::from_le_bytes(read_exact::<8>(&mut r)?);
    let best_epoch = read_u32(&mut r)? as usize;
    let n_params = u64::from_le_bytes(read_exact::<8>(&mut r)?) as usize;
    let spec = ModelSpec {
        arch,
        input_len,
        hidden_sizes,
        conv: ConvSpec {
            channels,
            kernel,
            dilations,
            dropout,
        },
    };
    if n_params != super::param_count(&spec) {
        return Err(ModelError::BadCheckpoint(format!(
            "parameter count {n_params} does not match the spec ({})",
            super::param_count(&spec)
        )));
    }
    let mut params = Vec::with_capacity(n_params);
    for _ in 0..n_params {
        params.push(f32::from_le_bytes(read_exact::<4>(&mut r)?));
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(ModelError::BadCheckpoint("non-finite parameters".into()));
    }
    let n_epochs = read_u32(&mut r)? as usize;
    let mut training_log = Vec::with_capacity(n_epochs);
    for _ in 0..n_epochs {
        training_log.push(EpochLog {
            train_loss: f64::from_le_bytes(read_exact::<8>(&mut r)?),
            val_loss: f64::from_le_bytes(read_exact::<8>(&mut r)?),
        });
    }
    Ok(TrainedModel {
        spec,
        params,
        training_log,
        best_epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_checkpoint() {
        let model = TrainedModel {
            spec: ModelSpec::dilated_conv(32),
            params: (0..super::super::param_count(&ModelSpec::dilated_conv(32)))
                .map(|i| i as f32 * 0.01 - 3.0)
                .collect(),
            training_log: vec![
                EpochLog {
                    train_loss: 0.5,
                    val_loss: 0.6,
                },
                EpochLog {
                    train_loss: 0.3,
                    val_loss: 0.4,
                },
            ],
            best_epoch: 1,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded, model);
    }

    #[test]
    fn rejects_corrupt_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.bin");
        std::fs::write(&path, b"not a checkpoint").unwrap();
        assert!(matches!(
            load_model(&path),
            Err(ModelError::BadCheckpoint(_)) | Err(ModelError::Io(_))
        ));
    }
}
