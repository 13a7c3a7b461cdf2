use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Real;

use super::config::ModelConfig;
use super::layers::Visitor;
use super::network::Network;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorBlob {
    pub shape: Vec<usize>,
    /// Little-endian values, base64.
    pub data: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsBlob {
    pub mean: String,
    pub var: String,
}

/// Enough of a ChaCha8 stream to resume it exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: String,
    pub stream: u64,
    pub word_pos: String,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        RngState {
            seed: B64.encode(rng.get_seed()),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    pub fn restore(&self) -> Result<ChaCha8Rng> {
        let bytes = B64
            .decode(&self.seed)
            .map_err(|e| Error::Checkpoint(format!("rng seed: {e}")))?;
        let seed: [u8; 32] = bytes
            .try_into()
            .map_err(|_| Error::Checkpoint("rng seed must be 32 bytes".into()))?;
        let pos: u128 = self
            .word_pos
            .parse()
            .map_err(|_| Error::Checkpoint(format!("rng word position `{}`", self.word_pos)))?;
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(pos);
        Ok(rng)
    }
}

/// Self-describing model snapshot: config echo, parameters and running
/// statistics keyed by layer path, plus training bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub dtype: String,
    pub config: ModelConfig,
    pub epoch: usize,
    pub dev_loss: f64,
    pub dev_eer: f64,
    pub rng: Option<RngState>,
    pub params: BTreeMap<String, TensorBlob>,
    pub buffers: BTreeMap<String, StatsBlob>,
}

fn encode<T: Real>(values: &[T]) -> String {
    let mut bytes = Vec::with_capacity(values.len() * T::BYTES);
    for &v in values {
        v.write_le(&mut bytes);
    }
    B64.encode(bytes)
}

fn decode<T: Real>(name: &str, text: &str, expect: usize) -> Result<Vec<T>> {
    let bytes = B64
        .decode(text)
        .map_err(|e| Error::Checkpoint(format!("{name}: {e}")))?;
    if bytes.len() != expect * T::BYTES {
        return Err(Error::Checkpoint(format!(
            "{name}: {} bytes, expected {} values of {}",
            bytes.len(),
            expect,
            T::DTYPE
        )));
    }
    Ok(bytes.chunks_exact(T::BYTES).map(T::read_le).collect())
}

impl Checkpoint {
    pub fn capture<T: Real>(
        net: &Network<T>,
        epoch: usize,
        dev_loss: f64,
        dev_eer: f64,
        rng: Option<&ChaCha8Rng>,
    ) -> Self {
        let mut v = Visitor::new();
        net.visit(&mut v);
        let params = v
            .params
            .iter()
            .map(|p| {
                (
                    p.name.clone(),
                    TensorBlob {
                        shape: p.tensor.shape().to_vec(),
                        data: encode(&p.tensor.data()),
                    },
                )
            })
            .collect();
        let buffers = v
            .buffers
            .iter()
            .map(|(name, stats)| {
                let s = stats.lock().unwrap();
                (
                    name.clone(),
                    StatsBlob {
                        mean: encode(&s.mean),
                        var: encode(&s.var),
                    },
                )
            })
            .collect();
        Checkpoint {
            format_version: FORMAT_VERSION,
            dtype: T::DTYPE.to_owned(),
            config: net.config.clone(),
            epoch,
            dev_loss,
            dev_eer,
            rng: rng.map(RngState::capture),
            params,
            buffers,
        }
    }

    /// Copy the snapshot into a network built from the same config.
    pub fn restore_into<T: Real>(&self, net: &Network<T>) -> Result<()> {
        if self.dtype != T::DTYPE {
            return Err(Error::Checkpoint(format!(
                "checkpoint holds {} values, network uses {}",
                self.dtype,
                T::DTYPE
            )));
        }
        let mut v = Visitor::new();
        net.visit(&mut v);
        if v.params.len() != self.params.len() || v.buffers.len() != self.buffers.len() {
            return Err(Error::Checkpoint(format!(
                "layout mismatch: checkpoint has {} tensors / {} buffers, network {} / {}",
                self.params.len(),
                self.buffers.len(),
                v.params.len(),
                v.buffers.len()
            )));
        }
        for p in &v.params {
            let blob = self
                .params
                .get(&p.name)
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor `{}`", p.name)))?;
            if blob.shape != p.tensor.shape() {
                return Err(Error::Checkpoint(format!(
                    "`{}`: shape {:?}, network expects {:?}",
                    p.name,
                    blob.shape,
                    p.tensor.shape()
                )));
            }
            p.tensor.set_data(&decode::<T>(&p.name, &blob.data, p.tensor.numel())?)?;
        }
        for (name, stats) in &v.buffers {
            let blob = self
                .buffers
                .get(name)
                .ok_or_else(|| Error::Checkpoint(format!("missing buffer `{name}`")))?;
            let mut s = stats.lock().unwrap();
            let c = s.mean.len();
            s.mean = decode::<T>(name, &blob.mean, c)?;
            s.var = decode::<T>(name, &blob.var, c)?;
        }
        Ok(())
    }

    pub fn to_network<T: Real>(&self) -> Result<Network<T>> {
        let net = Network::build(&self.config)?;
        self.restore_into(&net)?;
        Ok(net)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if c.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "format version {} not supported (expected {FORMAT_VERSION})",
                c.format_version
            )));
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        Checkpoint::from_json(&text)
    }
}
