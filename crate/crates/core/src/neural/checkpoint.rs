//! Binary checkpoints.
//!
//! Layout (all integers and floats little-endian):
//!
//! | bytes | content |
//! |-------|---------|
//! | 8     | magic `CRNKCKPT` |
//! | 4     | format version (`u32`, currently 1) |
//! | 8     | length `L` of the config JSON (`u64`) |
//! | L     | `NetworkConfig` as UTF-8 JSON |
//! | 8     | number `P` of floats (`u64`) |
//! | 8·P   | `f64` values |
//!
//! Floats are written per hidden layer as weight (row-major, input × output),
//! bias, gamma, beta, running mean, running variance; then the output weight
//! and bias.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::network::{Network, NetworkConfig};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"CRNKCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(net: &Network, mut out: W) -> Result<()> {
    let config = serde_json::to_vec(&net.config)?;
    let mut values: Vec<f64> = Vec::new();
    for l in &net.hidden {
        for part in [&l.bias, &l.gamma, &l.beta, &l.running_mean, &l.running_var] {
            debug_assert!(part.is_standard_layout());
        }
        values.extend(l.weight.iter());
        values.extend(l.bias.iter());
        values.extend(l.gamma.iter());
        values.extend(l.beta.iter());
        values.extend(l.running_mean.iter());
        values.extend(l.running_var.iter());
    }
    values.extend(net.output.weight.iter());
    values.extend(net.output.bias.iter());

    out.write_all(CHECKPOINT_MAGIC)?;
    out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    out.write_all(&(config.len() as u64).to_le_bytes())?;
    out.write_all(&config)?;
    out.write_all(&(values.len() as u64).to_le_bytes())?;
    for v in values {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<Network> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("not a censrank checkpoint".into()));
    }
    let version = u32::from_le_bytes(read_array(&mut input)?);
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
    }
    let config_len = u64::from_le_bytes(read_array(&mut input)?) as usize;
    if config_len > 1 << 20 {
        return Err(Error::Checkpoint("config block too large".into()));
    }
    let mut config = vec![0u8; config_len];
    input.read_exact(&mut config)?;
    let config: NetworkConfig = serde_json::from_slice(&config)?;

    let mut net = Network::new(config)?;
    let expected = net.num_params()
        + net.hidden.iter().map(|l| 2 * l.bias.len()).sum::<usize>();
    let count = u64::from_le_bytes(read_array(&mut input)?) as usize;
    if count != expected {
        return Err(Error::Checkpoint(format!(
            "checkpoint holds {count} values, config implies {expected}"
        )));
    }
    let mut next = || -> Result<f64> { Ok(f64::from_le_bytes(read_array(&mut input)?)) };
    for l in &mut net.hidden {
        fill2(&mut l.weight, &mut next)?;
        for part in [&mut l.bias, &mut l.gamma, &mut l.beta, &mut l.running_mean, &mut l.running_var] {
            fill1(part, &mut next)?;
        }
    }
    fill2(&mut net.output.weight, &mut next)?;
    fill1(&mut net.output.bias, &mut next)?;
    Ok(net)
}

pub fn save_checkpoint(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    write_checkpoint(net, BufWriter::new(File::create(path)?))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Network> {
    read_checkpoint(BufReader::new(File::open(path)?))
}

fn read_array<const N: usize, R: Read>(input: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    input.read_exact(&mut buf)?;
    Ok(buf)
}

fn fill1(a: &mut Array1<f64>, next: &mut impl FnMut() -> Result<f64>) -> Result<()> {
    for v in a.iter_mut() {
        *v = next()?;
    }
    Ok(())
}

fn fill2(a: &mut Array2<f64>, next: &mut impl FnMut() -> Result<f64>) -> Result<()> {
    for v in a.iter_mut() {
        *v = next()?;
    }
    Ok(())
}
