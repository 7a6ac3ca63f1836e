use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named random substreams of one master seed.
///
/// Every source of randomness in a run draws from its own stream, so
/// toggling the auxiliary task (or augmentation) cannot perturb episode
/// draws, batch sampling, or policy noise in the other streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Env = 1,
    AgentInit = 2,
    Batch = 3,
    Permutation = 4,
    ActionNoise = 5,
    UpdateNoise = 6,
    Augment = 7,
    /// The auxiliary task's own augmentation draws, separate from the
    /// critic's so enabling it never shifts the critic stream.
    CmidAugment = 8,
}

/// Stream `s` of master seed `master`.
pub fn stream_rng(master: u64, s: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(s as u64);
    rng
}

/// Fresh evaluation stream for a given environment step; evaluation never
/// consumes from the training streams.
pub fn eval_rng(master: u64, env_step: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream((9u64 << 32) | env_step);
    rng
}
