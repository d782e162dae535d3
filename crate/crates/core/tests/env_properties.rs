use proptest::prelude::*;
use robustinfo::{Environment, Heterogeneity, StateParams, WelfareSpec};

fn env_strategy() -> impl Strategy<Value = Environment> {
    (2usize..=5, prop::collection::vec((0.0..3.0f64, 0.0..2.0f64), 1..=3), 0.1..3.0f64).prop_map(
        |(n, params, cost)| {
            let k = params.len();
            let states = params
                .into_iter()
                .enumerate()
                .map(|(s, (b, l))| StateParams::new(format!("s{s}"), 1.0 / k as f64, b, l))
                .collect::<Vec<_>>();
            Environment::new_unchecked(n, states, cost)
        },
    )
}

fn profiles(n: usize) -> impl Iterator<Item = Vec<bool>> {
    (0..1usize << n).map(move |m| (0..n).map(|j| m & (1 << j) != 0).collect())
}

proptest! {
    #[test]
    fn potential_difference_identity(env in env_strategy()) {
        let n = env.n_agents();
        for s in 0..env.n_states() {
            for profile in profiles(n) {
                for i in 0..n {
                    let mut on = profile.clone();
                    on[i] = true;
                    let mut off = profile.clone();
                    off[i] = false;
                    let du = env.utility(i, &on, s).unwrap() - env.utility(i, &off, s).unwrap();
                    let others = off.iter().filter(|&&a| a).count();
                    let df = env.potential(s, others + 1).unwrap() - env.potential(s, others).unwrap();
                    prop_assert!((du - df).abs() <= 1e-12, "state {s} agent {i} profile {profile:?}");
                }
            }
        }
    }

    #[test]
    fn complementarity_is_monotone_and_potential_convex(env in env_strategy()) {
        let n = env.n_agents();
        for s in 0..env.n_states() {
            for k in 0..n - 1 {
                prop_assert!(env.marginal_gain(0, k + 1, s).unwrap() >= env.marginal_gain(0, k, s).unwrap());
            }
            let step = env.complementarity()[s] / (n - 1) as f64;
            for k in 0..n - 1 {
                let d2 = env.potential(s, k + 2).unwrap() - 2.0 * env.potential(s, k + 1).unwrap()
                    + env.potential(s, k).unwrap();
                prop_assert!((d2 - step).abs() <= 1e-12);
                prop_assert!(d2 >= 0.0);
            }
        }
    }

    #[test]
    fn heterogeneity_never_moves_gains(env in env_strategy(), seed in any::<u64>()) {
        let n = env.n_agents();
        let k = env.n_states();
        let table = Heterogeneity::from_fn(n, k, |agent, others: &[bool], state| {
            let bits = others.iter().filter(|&&a| a).count() as u64;
            let h = seed ^ ((agent as u64) << 8) ^ ((state as u64) << 16) ^ (bits << 24);
            (h % 1000) as f64 / 100.0 - 5.0
        })
        .unwrap();
        let with = env.clone().with_heterogeneity(table).unwrap();
        for s in 0..k {
            for c in 0..n {
                prop_assert_eq!(
                    env.marginal_gain(0, c, s).unwrap().to_bits(),
                    with.marginal_gain(0, c, s).unwrap().to_bits()
                );
            }
        }
    }

    #[test]
    fn power_welfare_is_convex(n in 1usize..=8, alpha in 0.1..20.0f64, beta in 1.0..3.0f64) {
        let w = WelfareSpec::power(n, vec![alpha], beta).unwrap();
        for k in 0..=n {
            let v = w.value(0, k).unwrap();
            prop_assert!(v <= k as f64 / n as f64 * w.value(0, n).unwrap() + 1e-9);
        }
        for k in 0..n.saturating_sub(1) {
            let d2 = w.value(0, k + 2).unwrap() - 2.0 * w.value(0, k + 1).unwrap() + w.value(0, k).unwrap();
            prop_assert!(d2 >= -1e-9);
        }
    }
}
