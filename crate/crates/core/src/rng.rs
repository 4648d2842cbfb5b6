//! Counter-addressed random draws.
//!
//! Every draw is keyed by `(seed, replicate, index)`: the ChaCha8 key is the
//! little-endian seed followed by the little-endian replicate number, and the
//! symbol index selects the ChaCha stream. A draw therefore never depends on
//! how many other draws were made before it, which keeps parallel replicates
//! order-independent.
//!
//! Gaussian variates use `rand_distr::StandardNormal` (the ZIGNOR ziggurat
//! rejection sampler). Rademacher variates take one uniform bit. The centered
//! uniform law is `U(-√3, √3)`, which has unit variance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean-zero, unit-variance entry laws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    Gaussian,
    Rademacher,
    UniformCentered,
}

impl std::str::FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "gaussian" | "normal" => Ok(Self::Gaussian),
            "rademacher" => Ok(Self::Rademacher),
            "uniform_centered" | "uniform" => Ok(Self::UniformCentered),
            other => Err(Error::InvalidArgument(format!("unknown distribution `{other}`"))),
        }
    }
}

impl std::fmt::Display for Distribution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Gaussian => "gaussian",
            Self::Rademacher => "rademacher",
            Self::UniformCentered => "uniform_centered",
        })
    }
}

/// Source of i.i.d. symbol entries addressed by index.
pub trait SymbolSource {
    fn sample(&self, index: u64) -> f64;
}

impl<F> SymbolSource for F
where
    F: Fn(u64) -> f64,
{
    fn sample(&self, index: u64) -> f64 {
        self(index)
    }
}

/// The seeded stream for replicate `replicate` of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeededStream {
    pub seed: u64,
    pub replicate: u64,
    pub dist: Distribution,
}

impl SeededStream {
    pub fn new(seed: u64, replicate: u64, dist: Distribution) -> Self {
        Self {
            seed,
            replicate,
            dist,
        }
    }

    /// A raw generator positioned at the start of stream `index`.
    pub fn generator(&self, index: u64) -> ChaCha8Rng {
        keyed_generator(self.seed, self.replicate, index)
    }
}

impl SymbolSource for SeededStream {
    fn sample(&self, index: u64) -> f64 {
        let mut rng = self.generator(index);
        draw(&mut rng, self.dist)
    }
}

pub(crate) fn keyed_generator(seed: u64, replicate: u64, stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&replicate.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}

pub(crate) fn draw<R: Rng + ?Sized>(rng: &mut R, dist: Distribution) -> f64 {
    match dist {
        Distribution::Gaussian => StandardNormal.sample(rng),
        Distribution::Rademacher => {
            if rng.random::<bool>() {
                1.0
            } else {
                -1.0
            }
        }
        Distribution::UniformCentered => {
            let r3 = 3f64.sqrt();
            rng.random_range(-r3..r3)
        }
    }
}
