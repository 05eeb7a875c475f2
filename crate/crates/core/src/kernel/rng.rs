use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream labels used by the simulator. Each concern draws from its own
/// stream so that changing one mechanism leaves the others' draws intact.
pub mod labels {
    pub const TOPOLOGY: &str = "topology";
    pub const FAILURE: &str = "failure";
    pub const DIAGNOSIS: &str = "diagnosis";
    pub const REPAIR: &str = "repair";
    pub const REGENERATION: &str = "regeneration";
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Combines a parent seed with a child index into a new seed.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    splitmix64(parent ^ splitmix64(index.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

/// A labelled, deterministic random stream.
///
/// `(base_seed, replication)` pick the ChaCha key; the label picks the
/// ChaCha stream, so differently labelled streams never overlap.
#[derive(Debug, Clone)]
pub struct RngStream {
    label: String,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(base_seed: u64, replication: u64, label: &str) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(base_seed, replication));
        rng.set_stream(fnv1a(label));
        Self {
            label: label.to_owned(),
            rng,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Uniform draw on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Exponential draw by inverse transform. A zero rate never fires and
    /// yields `+inf`.
    pub fn exponential(&mut self, rate: f64) -> f64 {
        if rate <= 0.0 {
            return f64::INFINITY;
        }
        // 1 - u lies in (0, 1], so the log is finite.
        -(1.0 - self.uniform()).ln() / rate
    }

    /// True with probability `p`.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Uniform index in `0..n`. Panics if `n == 0`.
    pub fn choose_index(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    pub(crate) fn inner(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// A lifetime distribution for failure and repair clocks.
///
/// Only the exponential ships; other shapes can be plugged in by
/// implementing this trait.
pub trait Lifetime {
    fn sample(&self, rng: &mut RngStream) -> f64;
    fn mean(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponential {
    pub rate: f64,
}

impl Exponential {
    pub fn with_mean(mean: f64) -> Self {
        Self { rate: 1.0 / mean }
    }
}

impl Lifetime for Exponential {
    fn sample(&self, rng: &mut RngStream) -> f64 {
        rng.exponential(self.rate)
    }

    fn mean(&self) -> f64 {
        1.0 / self.rate
    }
}
