//! Seeded random instances satisfying the convexity assumptions
//! (`λ ≥ 0`, power welfare with `β ≥ 1`), for property checks and the
//! CLI's random LP verification.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::env::{Environment, StateParams, WelfareSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceSpec {
    /// Inclusive population range.
    pub agents: (usize, usize),
    /// Inclusive state-count range.
    pub states: (usize, usize),
    /// Force at least one state where cooperation is dominant (`b > c`).
    pub require_dominant: bool,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        Self {
            agents: (2, 4),
            states: (1, 3),
            require_dominant: false,
        }
    }
}

pub fn random_instance<R: Rng + ?Sized>(rng: &mut R, spec: &InstanceSpec) -> (Environment, WelfareSpec) {
    let n = rng.gen_range(spec.agents.0..=spec.agents.1);
    let k = rng.gen_range(spec.states.0..=spec.states.1);
    let cost = rng.gen_range(0.5..2.5);

    let weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut prior: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let head: f64 = prior[..k - 1].iter().sum();
    prior[k - 1] = 1.0 - head;

    let mut benefit: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..3.0)).collect();
    if spec.require_dominant && benefit.iter().all(|&b| b <= cost) {
        let s = rng.gen_range(0..k);
        benefit[s] = cost + rng.gen_range(0.05..1.0);
    }
    let states = (0..k)
        .map(|s| StateParams::new(format!("s{s}"), prior[s], benefit[s], rng.gen_range(0.0..1.5)))
        .collect();
    let alpha = (0..k).map(|_| rng.gen_range(0.5..10.0)).collect();
    let beta = rng.gen_range(1.0..3.0);

    let env = Environment::new(n, states, cost).expect("generated primitives are valid");
    let welfare = WelfareSpec::power(n, alpha, beta).expect("generated welfare is valid");
    (env, welfare)
}

/// `count` instances from a ChaCha stream seeded with `seed`.
pub fn random_instances(seed: u64, count: usize, spec: &InstanceSpec) -> Vec<(Environment, WelfareSpec)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_instance(&mut rng, spec)).collect()
}
