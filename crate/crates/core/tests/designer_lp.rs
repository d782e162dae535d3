use robustinfo::designer::{design_instrumented, to_sequential_policy, DesignOptions};
use robustinfo::instances::{random_instances, InstanceSpec};
use robustinfo::lp::{build_lp, extract_policy, kkt_residuals, solve, LpStatus, Sense};
use robustinfo::{check_policy, design, Environment, Error, StateParams, WelfareSpec};

fn designer_value(env: &Environment, w: &WelfareSpec) -> f64 {
    match design(env, w) {
        Ok(tp) => tp.expected_welfare,
        Err(Error::Infeasible(_)) => 0.0,
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn lp_optimum_equals_threshold_rule() {
    for (idx, (env, w)) in random_instances(2024, 200, &InstanceSpec::default()).into_iter().enumerate() {
        let lp = build_lp(&env, &w).unwrap();
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal, "instance {idx}");
        let d = designer_value(&env, &w);
        assert!((sol.value - d).abs() <= 1e-6, "instance {idx}: lp {} designer {d}", sol.value);

        let policy = extract_policy(&sol, &lp).unwrap();
        assert!(check_policy(&policy, &env, 1e-7).unwrap().pass, "instance {idx}");
        assert!((policy.expected_welfare(&env, &w).unwrap() - sol.value).abs() <= 1e-7);
        let kkt = kkt_residuals(&lp, &sol).unwrap();
        assert!(kkt.max() <= 1e-7, "instance {idx}: {kkt:?}");
    }
}

#[test]
fn constructed_optimum_satisfies_every_lp_row() {
    let spec = InstanceSpec {
        require_dominant: true,
        ..InstanceSpec::default()
    };
    for (env, w) in random_instances(99, 100, &spec) {
        let tp = design(&env, &w).unwrap();
        let explicit = to_sequential_policy(&tp, &env).expanded(env.n_agents()).unwrap();
        let lp = build_lp(&env, &w).unwrap();
        let mut x = vec![0.0; lp.n_vars()];
        for (j, key) in lp.var_index.iter().enumerate() {
            x[j] = explicit.mass(key.state, &key.sequence);
        }
        let dot = |c: &[f64]| c.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
        for row in &lp.eq_constraints {
            assert!((dot(&row.coeffs) - row.rhs).abs() <= 1e-9);
        }
        for row in &lp.ineq_constraints {
            let lhs = dot(&row.coeffs);
            match row.sense {
                Sense::Ge => assert!(lhs >= row.rhs - 1e-9, "{} = {lhs}", row.name),
                Sense::Le => assert!(lhs <= row.rhs + 1e-9, "{} = {lhs}", row.name),
            }
        }
        let best = solve(&lp).unwrap().value;
        assert!((lp.objective_value(&x) - best).abs() <= 1e-6);
    }
}

#[test]
fn threshold_structure_is_a_step() {
    for (env, w) in random_instances(5, 200, &InstanceSpec { agents: (2, 50), states: (1, 12), require_dominant: true }) {
        let tp = design(&env, &w).unwrap();
        let ranked = tp.invitation_by_rank();
        let first_positive = ranked.iter().position(|&p| p > 0.0).unwrap();
        assert!(ranked[..first_positive].iter().all(|&p| p == 0.0));
        assert!(ranked[first_positive + 1..].iter().all(|&p| p == 1.0), "{ranked:?}");
        assert_eq!(ranked[first_positive], tp.mixing_weight);
    }
}

#[test]
fn welfare_scale_and_prior_rescale_invariance() {
    for (env, w) in random_instances(17, 100, &InstanceSpec { agents: (2, 30), states: (1, 8), require_dominant: true }) {
        let base = design(&env, &w).unwrap();
        let scaled = design(&env, &w.scaled(3.7).unwrap()).unwrap();
        assert_eq!(base.threshold_state, scaled.threshold_state);
        assert!((base.mixing_weight - scaled.mixing_weight).abs() <= 1e-12);
        assert!((scaled.expected_welfare - 3.7 * base.expected_welfare).abs() <= 1e-9);

        let states: Vec<_> = (0..env.n_states())
            .map(|s| {
                let mu = env.prior()[s] * 5.0;
                StateParams::new(env.label(s), mu, env.benefit()[s], env.complementarity()[s])
            })
            .collect();
        let total: f64 = states.iter().map(|s| s.prior).sum();
        let renormalized: Vec<_> = states
            .into_iter()
            .map(|mut s| {
                s.prior /= total;
                s
            })
            .collect();
        let env2 = Environment::new(env.n_agents(), renormalized, env.cost()).unwrap();
        let again = design(&env2, &w).unwrap();
        assert_eq!(base.threshold_state, again.threshold_state);
        assert!((base.mixing_weight - again.mixing_weight).abs() <= 1e-9);
        assert!((base.expected_welfare - again.expected_welfare).abs() <= 1e-9);
    }
}

#[test]
fn operation_count_ignores_population() {
    let states = |_: usize| {
        vec![
            StateParams::new("a", 0.3, 1.0, 0.1),
            StateParams::new("b", 0.3, 2.4, 0.5),
            StateParams::new("c", 0.4, 1.7, 0.3),
        ]
    };
    let counts: Vec<_> = [3usize, 10, 1000]
        .into_iter()
        .map(|n| {
            let env = Environment::new(n, states(n), 2.0).unwrap();
            let w = WelfareSpec::power(n, vec![6.0, 12.0, 9.0], 1.5).unwrap();
            design_instrumented(&env, &w, DesignOptions::default()).unwrap().1
        })
        .collect();
    assert!(counts.windows(2).all(|p| p[0] == p[1]), "{counts:?}");
}

#[test]
fn lp_value_nonincreasing_in_cost() {
    let states = vec![
        StateParams::new("L", 0.4, 1.0, 0.3),
        StateParams::new("M", 0.3, 1.8, 0.6),
        StateParams::new("H", 0.3, 2.6, 0.2),
    ];
    let w = WelfareSpec::power(3, vec![5.0, 8.0, 11.0], 2.0).unwrap();
    let mut last = f64::INFINITY;
    for step in 0..=30 {
        let cost = 0.5 + 0.1 * step as f64;
        let env = Environment::new(3, states.clone(), cost).unwrap();
        let v = solve(&build_lp(&env, &w).unwrap()).unwrap().value;
        assert!(v <= last + 1e-9, "cost {cost}: {v} > {last}");
        last = v;
    }
    assert_eq!(last, 0.0);
}
