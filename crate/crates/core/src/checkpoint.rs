//! Binary checkpoints: magic header, format version, little-endian payload,
//! trailing SHA-256 over everything before the digest. Round trips are
//! bit-exact, including RNG stream positions, which is what makes resumed
//! runs reproduce uninterrupted trajectories.

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use sha2::{Digest, Sha256};

use crate::config::RawConfig;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"ACGN";
const VERSION: u32 = 1;
/// Sanity bound on vector lengths, so a corrupt length field fails cleanly
/// instead of attempting a huge allocation.
const MAX_VEC: u64 = 1 << 32;

/// Optimizer moment buffers plus step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptSnapshot {
    pub step_count: u64,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
}

/// One discriminator's parameters and optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscSnapshot {
    pub params: Vec<f64>,
    pub opt: OptSnapshot,
}

/// Complete training state at one iteration boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: RawConfig,
    pub iteration: u64,
    pub gen_params: Vec<f64>,
    pub gen_opt: OptSnapshot,
    pub discs: Vec<DiscSnapshot>,
    pub bandit_q: Vec<f64>,
    pub bandit_pi: Vec<f64>,
    pub bandit_t: u64,
    pub rng_seed: u64,
    pub rng_positions: Vec<u128>,
}

fn write_f64s(buf: &mut Vec<u8>, values: &[f64]) {
    buf.write_u64::<LittleEndian>(values.len() as u64).unwrap();
    for v in values {
        buf.write_f64::<LittleEndian>(*v).unwrap();
    }
}

fn read_f64s(r: &mut impl Read) -> Result<Vec<f64>> {
    let len = r.read_u64::<LittleEndian>()?;
    if len > MAX_VEC {
        return Err(Error::Checkpoint(format!("implausible vector length {len}")));
    }
    let mut out = Vec::with_capacity(len as usize);
    for _ in 0..len {
        out.push(r.read_f64::<LittleEndian>()?);
    }
    Ok(out)
}

fn write_opt(buf: &mut Vec<u8>, opt: &OptSnapshot) {
    buf.write_u64::<LittleEndian>(opt.step_count).unwrap();
    write_f64s(buf, &opt.first_moment);
    write_f64s(buf, &opt.second_moment);
}

fn read_opt(r: &mut impl Read) -> Result<OptSnapshot> {
    Ok(OptSnapshot {
        step_count: r.read_u64::<LittleEndian>()?,
        first_moment: read_f64s(r)?,
        second_moment: read_f64s(r)?,
    })
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.write_u32::<LittleEndian>(VERSION).unwrap();

        let config_text = self.config.to_toml_string()?;
        buf.write_u64::<LittleEndian>(config_text.len() as u64).unwrap();
        buf.extend_from_slice(config_text.as_bytes());

        buf.write_u64::<LittleEndian>(self.iteration).unwrap();
        write_f64s(&mut buf, &self.gen_params);
        write_opt(&mut buf, &self.gen_opt);

        buf.write_u64::<LittleEndian>(self.discs.len() as u64).unwrap();
        for d in &self.discs {
            write_f64s(&mut buf, &d.params);
            write_opt(&mut buf, &d.opt);
        }

        write_f64s(&mut buf, &self.bandit_q);
        write_f64s(&mut buf, &self.bandit_pi);
        buf.write_u64::<LittleEndian>(self.bandit_t).unwrap();

        buf.write_u64::<LittleEndian>(self.rng_seed).unwrap();
        buf.write_u64::<LittleEndian>(self.rng_positions.len() as u64).unwrap();
        for p in &self.rng_positions {
            buf.write_u64::<LittleEndian>(*p as u64).unwrap();
            buf.write_u64::<LittleEndian>((*p >> 64) as u64).unwrap();
        }

        let digest = Sha256::digest(&buf);
        buf.extend_from_slice(&digest);
        Ok(buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() + 4 + 32 {
            return Err(Error::Checkpoint(format!(
                "checkpoint truncated: {} bytes",
                bytes.len()
            )));
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        let want = Sha256::digest(body);
        if digest != want.as_slice() {
            return Err(Error::Checkpoint("checksum mismatch, file corrupted".into()));
        }
        let mut r = body;
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint(format!("bad magic {magic:?}")));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {version}, expected {VERSION}"
            )));
        }

        let config_len = r.read_u64::<LittleEndian>()?;
        if config_len > MAX_VEC {
            return Err(Error::Checkpoint(format!("implausible config length {config_len}")));
        }
        let mut config_bytes = vec![0u8; config_len as usize];
        r.read_exact(&mut config_bytes)?;
        let config_text = String::from_utf8(config_bytes)
            .map_err(|e| Error::Checkpoint(format!("config block is not UTF-8: {e}")))?;
        let config = RawConfig::from_toml_str(&config_text)
            .map_err(|e| Error::Checkpoint(format!("config block unparsable: {e}")))?;

        let iteration = r.read_u64::<LittleEndian>()?;
        let gen_params = read_f64s(&mut r)?;
        let gen_opt = read_opt(&mut r)?;

        let n_disc = r.read_u64::<LittleEndian>()?;
        if n_disc > 1024 {
            return Err(Error::Checkpoint(format!("implausible ensemble size {n_disc}")));
        }
        let mut discs = Vec::with_capacity(n_disc as usize);
        for _ in 0..n_disc {
            discs.push(DiscSnapshot {
                params: read_f64s(&mut r)?,
                opt: read_opt(&mut r)?,
            });
        }

        let bandit_q = read_f64s(&mut r)?;
        let bandit_pi = read_f64s(&mut r)?;
        let bandit_t = r.read_u64::<LittleEndian>()?;

        let rng_seed = r.read_u64::<LittleEndian>()?;
        let n_streams = r.read_u64::<LittleEndian>()?;
        if n_streams > 64 {
            return Err(Error::Checkpoint(format!("implausible stream count {n_streams}")));
        }
        let mut rng_positions = Vec::with_capacity(n_streams as usize);
        for _ in 0..n_streams {
            let lo = r.read_u64::<LittleEndian>()? as u128;
            let hi = r.read_u64::<LittleEndian>()? as u128;
            rng_positions.push(lo | (hi << 64));
        }

        if !r.is_empty() {
            return Err(Error::Checkpoint(format!(
                "{} trailing bytes after payload",
                r.len()
            )));
        }
        Ok(Self {
            config,
            iteration,
            gen_params,
            gen_opt,
            discs,
            bandit_q,
            bandit_pi,
            bandit_t,
            rng_seed,
            rng_positions,
        })
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let bytes = ckpt.to_bytes()?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path)?;
    Checkpoint::from_bytes(&bytes)
}
