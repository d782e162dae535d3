use proptest::prelude::*;
use robustinfo::equilibrium::{expected_gain, smallest_equilibrium, Belief};
use robustinfo::{Environment, StateParams};

fn instance() -> impl Strategy<Value = (Environment, Belief)> {
    (2usize..=4, prop::collection::vec((0.01..1.0f64, 0.0..3.0f64, 0.0..2.0f64), 1..=3), 0.1..3.0f64).prop_map(
        |(n, params, cost)| {
            let k = params.len();
            let total: f64 = params.iter().map(|p| p.0).sum();
            let belief = Belief::new({
                let mut b: Vec<f64> = params.iter().map(|p| p.0 / total).collect();
                let head: f64 = b[..k - 1].iter().sum();
                b[k - 1] = 1.0 - head;
                b
            })
            .unwrap();
            let states = params
                .into_iter()
                .enumerate()
                .map(|(s, (_, b, l))| StateParams::new(format!("s{s}"), 1.0 / k as f64, b, l))
                .collect::<Vec<_>>();
            (Environment::new_unchecked(n, states, cost), belief)
        },
    )
}

/// Cooperation counts of every pure profile that is an equilibrium.
fn brute_force(env: &Environment, belief: &Belief) -> Vec<usize> {
    let n = env.n_agents();
    let tol = 1e-12;
    let mut counts: Vec<usize> = (0..1usize << n)
        .filter(|&mask| {
            (0..n).all(|i| {
                let others = (mask & !(1 << i)).count_ones() as usize;
                let g = expected_gain(env, belief, others).unwrap();
                if mask & (1 << i) != 0 {
                    g >= -tol
                } else {
                    g <= tol
                }
            })
        })
        .map(|mask| mask.count_ones() as usize)
        .collect();
    counts.sort_unstable();
    counts.dedup();
    counts
}

proptest! {
    #[test]
    fn symmetric_scan_matches_profiles((env, belief) in instance()) {
        let out = smallest_equilibrium(&env, &belief).unwrap();
        prop_assert_eq!(&out.all_equilibria, &brute_force(&env, &belief));
        prop_assert_eq!(Some(&out.coop_count), out.all_equilibria.iter().min());
    }

    #[test]
    fn best_responses_climb_monotonically((env, belief) in instance()) {
        let out = smallest_equilibrium(&env, &belief).unwrap();
        prop_assert!(out.rounds.len() <= env.n_agents());
        for r in &out.rounds {
            prop_assert!(r.next_count >= r.count);
        }
        let n = out.coop_count;
        // fixed point of the best-response map
        prop_assert!(n == env.n_agents() || expected_gain(&env, &belief, n).unwrap() <= 1e-12);
        prop_assert!(out.all_equilibria.iter().all(|&e| n <= e));
    }

    #[test]
    fn dominant_belief_means_everyone((env, _) in instance(), extra in 0.01..2.0f64) {
        let n = env.n_agents();
        let states = vec![StateParams::new("d", 1.0, env.cost() + extra, env.complementarity()[0])];
        let dominant = Environment::new(n, states, env.cost()).unwrap();
        let out = smallest_equilibrium(&dominant, &Belief::point(1, 0).unwrap()).unwrap();
        prop_assert_eq!(out.coop_count, n);
    }
}
