//! Seeded inputs shared by the benchmarks.

use ordnorm::testkit::{random_beta, random_instance, BetaKind};
use ordnorm::{Instance, LogWeights, WeightVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dirichlet weights and log-weights spread over `[-10, 10)`.
pub fn projection_input(d: usize, seed: u64) -> (WeightVector, LogWeights) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights =
        WeightVector::new(random_beta(d, BetaKind::Dirichlet, &mut rng)).expect("valid weights");
    let logs =
        LogWeights::new((0..d).map(|_| rng.gen_range(-10.0..10.0)).collect()).expect("finite logs");
    (weights, logs)
}

/// Vertex-list instance with at most three vertices per customer.
pub fn instance(n: usize, d: usize, seed: u64) -> Instance {
    random_instance(n, d, 3, seed)
        .build()
        .expect("generated instances are valid")
}
