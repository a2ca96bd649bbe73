//! Seeded random instances for the test suites: valid network specs with
//! connected routing, and birth-death MDPs with increasing concave rates.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use nortonq_core::mdp::AggregatedMdp;
use nortonq_core::network::QueueingNetworkSpec;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random valid spec with up to `max_queues` queues and capacity up to
/// `max_capacity`. Every queue receives external flow and routes to the
/// outside with probability at least 0.2, so connectivity always holds.
pub fn random_spec(rng: &mut ChaCha8Rng, max_queues: usize, max_capacity: usize) -> QueueingNetworkSpec {
    let n = rng.gen_range(1..=max_queues);
    let capacity = rng.gen_range(1..=max_capacity);
    let service_rates: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..3.0)).collect();
    let arrival_rate = rng.gen_range(0.3..2.0);

    let mut routing = vec![vec![0.0; n + 1]; n + 1];
    routing[0] = random_row(rng, n + 1, &[0]);
    for i in 1..=n {
        let mut row = random_row(rng, n + 1, &[]);
        // Guarantee an exit path.
        let exit = 0.2 + 0.8 * row[0];
        let scale = (1.0 - exit) / (1.0 - row[0]).max(1e-12);
        for (j, value) in row.iter_mut().enumerate() {
            if j == 0 {
                *value = exit;
            } else {
                *value *= scale;
            }
        }
        routing[i] = row;
    }

    let spec = QueueingNetworkSpec {
        n_queues: n,
        service_rates,
        routing,
        arrival_rate,
        capacity,
        rejection_cost: rng.gen_range(0.0..10.0),
        holding_cost: rng.gen_range(0.0..2.0),
        uniformization: 0.0,
    };
    let mut spec = spec;
    spec.uniformization = spec.uniformization_bound() * rng.gen_range(1.0..1.3);
    debug_assert!(spec.validate().is_empty(), "{:?}", spec.validate());
    spec
}

/// A random distribution over `len` slots with the listed slots forced to
/// zero and every other slot strictly positive.
fn random_row(rng: &mut ChaCha8Rng, len: usize, zeros: &[usize]) -> Vec<f64> {
    let mut row: Vec<f64> = (0..len)
        .map(|j| {
            if zeros.contains(&j) {
                0.0
            } else {
                rng.gen_range(0.05..1.0)
            }
        })
        .collect();
    let total: f64 = row.iter().sum();
    for value in row.iter_mut() {
        *value /= total;
    }
    row
}

/// A random aggregated MDP with increasing, concave, positive rates, built
/// directly (no network behind it).
pub fn random_mdp(rng: &mut ChaCha8Rng, max_capacity: usize) -> AggregatedMdp {
    let capacity = rng.gen_range(1..=max_capacity);
    let mut rates: Vec<f64> = Vec::with_capacity(capacity + 1);
    rates.push(0.0);
    let mut increment = rng.gen_range(0.5..2.0);
    let mut level = 0.0f64;
    for _ in 1..=capacity {
        level += increment;
        rates.push(level);
        increment *= rng.gen_range(0.4..1.0);
    }
    let arrival_rate = rng.gen_range(0.1..1.5) * rates[1].min(rates[capacity]);
    let uniformization = (arrival_rate + rates[capacity]) * rng.gen_range(1.0..1.4);
    AggregatedMdp::new(
        arrival_rate,
        rates,
        uniformization,
        rng.gen_range(0.0..10.0),
        rng.gen_range(0.0..2.0),
    )
    .expect("generated MDP is valid by construction")
}

/// A random threshold in `0..=capacity`.
pub fn random_threshold(rng: &mut ChaCha8Rng, capacity: usize) -> usize {
    rng.gen_range(0..=capacity)
}
