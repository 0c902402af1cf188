//! Binary checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "SPIQGAN-CKPT"          12-byte magic
//! u32                     format version
//! u64 + bytes             config block (UTF-8 key = value text)
//! u64 x 3                 seed, generator steps, critic updates
//! tensor                  generator angles
//! u64, tensor, tensor     generator Adam step, m, v
//! tensor                  critic weights
//! u64, tensor, tensor     critic Adam step, m, v
//! u32                     CRC-32 of every preceding byte
//! ```
//!
//! A tensor is a `u64` element count followed by IEEE-754 doubles.

use std::fs;
use std::path::Path;

use crate::critic::CriticParams;
use crate::error::{Error, Result};
use crate::generator::GeneratorParams;
use crate::optim::AdamState;
use crate::training::{ModelConfig, TrainState};

pub const MAGIC: &[u8; 12] = b"SPIQGAN-CKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub state: TrainState,
}

impl Checkpoint {
    pub fn new(config: ModelConfig, state: TrainState) -> Self {
        Self { config, state }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let block = self.config.to_kv_string();
        put_u64(&mut out, block.len() as u64);
        out.extend_from_slice(block.as_bytes());
        put_u64(&mut out, self.config.training.seed);
        put_u64(&mut out, self.state.gen_steps);
        put_u64(&mut out, self.state.critic_updates);
        put_tensor(&mut out, self.state.gen_params.as_slice());
        put_adam(&mut out, &self.state.gen_adam);
        put_tensor(&mut out, self.state.critic_params.as_slice());
        put_adam(&mut out, &self.state.critic_adam);
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let header = MAGIC.len() + 4;
        if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
            return Err(Error::Parse("not a checkpoint (bad magic)".into()));
        }
        if bytes.len() < header + 4 {
            return Err(truncated());
        }
        let version = u32::from_le_bytes(bytes[MAGIC.len()..header].try_into().unwrap());
        if version != VERSION {
            return Err(Error::Version {
                found: version,
                supported: VERSION,
            });
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().unwrap());
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(Error::Checksum { stored, computed });
        }

        let mut r = Reader {
            buf: body,
            pos: header,
        };
        let block_len = r.u64()? as usize;
        let block = std::str::from_utf8(r.take(block_len)?)
            .map_err(|_| Error::Parse("config block is not UTF-8".into()))?;
        let config = ModelConfig::from_kv_str(block)?;
        let seed = r.u64()?;
        if seed != config.training.seed {
            return Err(Error::Parse("seed field disagrees with the config block".into()));
        }
        let gen_steps = r.u64()?;
        let critic_updates = r.u64()?;
        let gen_params = GeneratorParams::from_vec(&config.generator, r.tensor()?)?;
        let gen_adam = r.adam()?;
        let critic_params = CriticParams::from_vec(config.generator.output_len(), r.tensor()?)?;
        let critic_adam = r.adam()?;
        if r.pos != body.len() {
            return Err(Error::Parse("trailing bytes after checkpoint body".into()));
        }
        if gen_adam.len() != gen_params.len() || critic_adam.len() != critic_params.as_slice().len() {
            return Err(Error::Shape("optimizer state does not match parameters".into()));
        }
        Ok(Self {
            config,
            state: TrainState {
                gen_params,
                critic_params,
                gen_adam,
                critic_adam,
                gen_steps,
                critic_updates,
            },
        })
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, ckpt.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}

fn truncated() -> Error {
    Error::Parse("checkpoint is truncated".into())
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_tensor(out: &mut Vec<u8>, values: &[f64]) {
    put_u64(out, values.len() as u64);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn put_adam(out: &mut Vec<u8>, st: &AdamState) {
    put_u64(out, st.step);
    put_tensor(out, &st.m);
    put_tensor(out, &st.v);
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).ok_or_else(truncated)?;
        let slice = self.buf.get(self.pos..end).ok_or_else(truncated)?;
        self.pos = end;
        Ok(slice)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn tensor(&mut self) -> Result<Vec<f64>> {
        let len = self.u64()? as usize;
        let bytes = self.take(len.checked_mul(8).ok_or_else(truncated)?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn adam(&mut self) -> Result<AdamState> {
        let step = self.u64()?;
        let m = self.tensor()?;
        let v = self.tensor()?;
        if m.len() != v.len() {
            return Err(Error::Shape("adam moments differ in length".into()));
        }
        Ok(AdamState { m, v, step })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_checkpoint(seed: u64) -> Checkpoint {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cfg = ModelConfig::new(rng.gen_range(1..4), rng.gen_range(1..3));
        cfg.training.seed = rng.gen();
        cfg.training.lr_gen = rng.gen_range(1e-4..1.0);
        let mut state = TrainState::init(&cfg);
        for v in state.gen_adam.m.iter_mut().chain(state.critic_adam.v.iter_mut()) {
            *v = rng.gen_range(-1e3..1e3);
        }
        state.gen_adam.step = rng.gen_range(0..1000);
        state.gen_steps = rng.gen();
        state.critic_updates = rng.gen();
        Checkpoint::new(cfg, state)
    }

    #[test]
    fn file_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let ckpt = random_checkpoint(1);
        save_checkpoint(&ckpt, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back, ckpt);
        assert_eq!(back.to_bytes(), ckpt.to_bytes());
        assert!(fs::read(&path).unwrap().starts_with(b"SPIQGAN-CKPT"));
    }

    #[test]
    fn truncation_is_detected() {
        let bytes = random_checkpoint(2).to_bytes();
        for cut in [bytes.len() - 1, bytes.len() - 9, bytes.len() / 2, 20] {
            let err = Checkpoint::from_bytes(&bytes[..cut]).unwrap_err();
            assert!(matches!(err, Error::Checksum { .. }), "cut {cut}: {err}");
        }
        assert!(Checkpoint::from_bytes(&bytes[..10]).is_err());
    }

    #[test]
    fn corruption_is_detected() {
        let mut bytes = random_checkpoint(3).to_bytes();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(Error::Checksum { .. })));
    }

    #[test]
    fn newer_version_is_rejected() {
        let mut bytes = random_checkpoint(4).to_bytes();
        bytes[12..16].copy_from_slice(&2u32.to_le_bytes());
        let body_len = bytes.len() - 4;
        let crc = crc32fast::hash(&bytes[..body_len]);
        bytes[body_len..].copy_from_slice(&crc.to_le_bytes());
        assert!(matches!(
            Checkpoint::from_bytes(&bytes),
            Err(Error::Version { found: 2, supported: 1 })
        ));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(load_checkpoint("/nonexistent/x.ckpt"), Err(Error::Io { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn bytes_round_trip(seed in any::<u64>()) {
            let ckpt = random_checkpoint(seed);
            prop_assert_eq!(Checkpoint::from_bytes(&ckpt.to_bytes()).unwrap(), ckpt);
        }
    }
}
