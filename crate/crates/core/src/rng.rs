//! Deterministic random streams.
//!
//! Every stochastic step draws from its own ChaCha stream, addressed by a
//! `(seed, stream_id)` pair. Stream ids are built from a chain index and a
//! stable [`Step`] slot, so adding a step never shifts the draws seen by
//! the existing ones.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stable slots for the sampling steps. Never renumber an existing slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u16)]
pub enum Step {
    Intercept = 1,
    InterceptVariance = 2,
    Gamma = 3,
    Beta = 4,
    Volatility = 5,
    AgentDraws = 6,
    TreesGamma = 7,
    TreesBeta = 8,
    HorseshoeGamma = 9,
    HorseshoeBeta = 10,
    RwVariance = 11,
    Predict = 12,
    Simulation = 13,
    AgentFit = 14,
    Init = 15,
    Evaluation = 16,
}

#[derive(Debug, Clone)]
pub struct RngHandle {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngHandle {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    /// Stream for one sampling step of one chain.
    pub fn for_step(seed: u64, chain: u32, step: Step) -> Self {
        Self::new(seed, stream_key(chain as u64, step as u64, 0))
    }

    /// Stream for a sub-task (an origin, an agent) of a step.
    pub fn for_task(seed: u64, chain: u32, step: Step, task: u64) -> Self {
        Self::new(seed, stream_key(chain as u64, step as u64, task + 1))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in (0, 1); never returns zero.
    pub fn uniform_open(&mut self) -> f64 {
        loop {
            let u = self.uniform();
            if u > 0.0 {
                return u;
            }
        }
    }

    /// Uniform integer in [0, n).
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        // Lemire's multiply-shift; bias is negligible for the n used here.
        ((self.inner.next_u64() as u128 * n as u128) >> 64) as usize
    }
}

fn stream_key(chain: u64, step: u64, task: u64) -> u64 {
    (chain << 48) ^ (step << 40) ^ task
}

impl RngCore for RngHandle {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
