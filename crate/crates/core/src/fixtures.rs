//! Reference environments and policies from the running examples and the
//! two case studies. Agents are 0-indexed here: the worked examples' agent
//! `k` is index `k - 1`.

use crate::env::{Environment, StateParams, WelfareSpec};
use crate::seqpolicy::{InvitationSequence, SequentialPolicy};

/// Vaccination case: three agents, states `L` and `H` with a uniform prior,
/// `(b, λ) = (1, 0.1)` and `(2.4, 0.5)`, cost 2.
pub fn case1_env() -> Environment {
    case1_env_with_cost(2.0)
}

pub fn case1_env_with_cost(cost: f64) -> Environment {
    Environment::new(
        3,
        vec![
            StateParams::new("L", 0.5, 1.0, 0.1),
            StateParams::new("H", 0.5, 2.4, 0.5),
        ],
        cost,
    )
    .expect("case 1 primitives are valid")
}

/// Power welfare with `α = (6, 12)` and `β = 1.5`.
pub fn case1_welfare() -> WelfareSpec {
    WelfareSpec::power(3, vec![6.0, 12.0], 1.5).expect("case 1 welfare is valid")
}

/// Readiness grid `θ = 0.01, …, 1.00` used by the technology-adoption case.
pub fn case2_thetas() -> Vec<(String, f64)> {
    (1..=100u32)
        .map(|k| (format!("{}.{:02}", k / 100, k % 100), f64::from(k) / 100.0))
        .collect()
}

/// Technology adoption: ten agents, uniform prior over the readiness grid,
/// `b = 0.5 + 1.5θ`, `λ = 0.1 + 0.7θ`.
pub fn case2_env(cost: f64) -> Environment {
    let states = case2_thetas()
        .into_iter()
        .map(|(label, theta)| StateParams::new(label, 0.01, 0.5 + 1.5 * theta, 0.1 + 0.7 * theta))
        .collect();
    Environment::new(10, states, cost).expect("case 2 primitives are valid")
}

/// `α = 6 + 6θ`, `β = 1.5`.
pub fn case2_welfare() -> WelfareSpec {
    let alpha = case2_thetas().into_iter().map(|(_, t)| 6.0 + 6.0 * t).collect();
    WelfareSpec::power(10, alpha, 1.5).expect("case 2 welfare is valid")
}

/// Mixed sequential policy over `L`/`H`: `(1,3)` w.p. 0.6 and `(2,3)` w.p.
/// 0.4 in `L`; `(3,1,2)` in `H`.
pub fn example1_policy() -> SequentialPolicy {
    let mut p = SequentialPolicy::new(vec!["L".into(), "H".into()]);
    p.set(0, InvitationSequence::from_order(vec![0, 2]), 0.6);
    p.set(0, InvitationSequence::from_order(vec![1, 2]), 0.4);
    p.set(1, InvitationSequence::from_order(vec![2, 0, 1]), 1.0);
    p
}

/// Single state `K` with `(b, λ, c) = (1, 1.5, 2)`.
pub fn example3_env() -> Environment {
    Environment::new(3, vec![StateParams::new("K", 1.0, 1.0, 1.5)], 2.0)
        .expect("example 3 primitives are valid")
}

/// Linear welfare `n / N` for the single-state example.
pub fn example3_welfare() -> WelfareSpec {
    WelfareSpec::power(3, vec![1.0], 1.0).expect("linear welfare is valid")
}

/// Always invite everyone in the fixed order `(1,2,3)`.
pub fn example3_policy() -> SequentialPolicy {
    let mut p = SequentialPolicy::new(vec!["K".into()]);
    p.set(0, InvitationSequence::from_order(vec![0, 1, 2]), 1.0);
    p
}
