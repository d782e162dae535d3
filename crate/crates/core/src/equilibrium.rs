//! Posterior beliefs, the smallest equilibrium, and realized welfare of a
//! policy when agents play conservatively.
//!
//! Payoffs are anonymous, so equilibria are scanned over cooperation counts.
//! Agents cooperate only on a strictly positive expected gain (above
//! [`Scalar::gain_tol`]); indifference keeps them out.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::designer::{to_sequential_policy, ThresholdPolicy};
use crate::env::{ensure_compatible, Environment, WelfareSpec};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seqpolicy::{check_policy, InvitationSequence, ObedienceReport, SequentialPolicy};

/// Largest population for which uniform-over-orderings mass is expanded
/// explicitly when tracing private play.
pub const PRIVATE_EXPANSION_LIMIT: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Belief<T = f64> {
    posterior: Vec<T>,
}

impl<T: Scalar> Belief<T> {
    pub fn new(posterior: Vec<T>) -> Result<Self> {
        if posterior.iter().any(|&p| !(p >= T::zero())) {
            return Err(Error::Domain("belief has a negative or non-finite entry".into()));
        }
        let total: T = posterior.iter().copied().sum();
        if (total - T::one()).abs() > T::prior_tol() {
            return Err(Error::Domain(format!("belief sums to {total}, not 1")));
        }
        Ok(Self { posterior })
    }

    pub fn prior(env: &Environment<T>) -> Self {
        Self {
            posterior: env.prior().to_vec(),
        }
    }

    pub fn point(n_states: usize, state: usize) -> Result<Self> {
        crate::error::check_index("state", state, n_states)?;
        let mut posterior = vec![T::zero(); n_states];
        posterior[state] = T::one();
        Ok(Self { posterior })
    }

    pub fn probs(&self) -> &[T] {
        &self.posterior
    }
}

/// Bayes update of the prior on an event with per-state likelihood
/// `event_prob`.
pub fn posterior_from_event<T: Scalar>(env: &Environment<T>, event_prob: &[T]) -> Result<Belief<T>> {
    if event_prob.len() != env.n_states() {
        return Err(Error::Argument(format!(
            "event has {} likelihoods for {} states",
            event_prob.len(),
            env.n_states()
        )));
    }
    if let Some(s) = event_prob
        .iter()
        .position(|&e| !(e >= T::zero() && e <= T::one() + T::feas_tol()))
    {
        return Err(Error::Domain(format!("event likelihood of state {s} is outside [0, 1]")));
    }
    let joint: Vec<T> = env.prior().iter().zip(event_prob).map(|(&m, &e)| m * e).collect();
    let total: T = joint.iter().copied().sum();
    if total <= T::zero() {
        return Err(Error::Domain("conditioning on an event of probability zero".into()));
    }
    Ok(Belief {
        posterior: joint.into_iter().map(|j| j / total).collect(),
    })
}

fn check_belief<T: Scalar>(env: &Environment<T>, belief: &Belief<T>) -> Result<()> {
    if belief.posterior.len() != env.n_states() {
        return Err(Error::Argument(format!(
            "belief covers {} states, environment has {}",
            belief.posterior.len(),
            env.n_states()
        )));
    }
    Ok(())
}

/// Belief-weighted marginal gain with `others` cooperators.
pub fn expected_gain<T: Scalar>(env: &Environment<T>, belief: &Belief<T>, others: usize) -> Result<T> {
    check_belief(env, belief)?;
    if others >= env.n_agents() {
        return Err(Error::OutOfRange {
            what: "cooperating others",
            index: others,
            len: env.n_agents(),
        });
    }
    Ok(gain_under(env, belief.probs(), others))
}

fn gain_under<T: Scalar>(env: &Environment<T>, posterior: &[T], others: usize) -> T {
    posterior
        .iter()
        .enumerate()
        .map(|(s, &p)| p * env.gain(s, others))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Selection {
    Smallest,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestResponseRound<T = f64> {
    pub round: usize,
    pub count: usize,
    pub gain: T,
    pub next_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumOutcome<T = f64> {
    pub coop_count: usize,
    pub all_equilibria: Vec<usize>,
    pub selected: Selection,
    /// Belief-weighted welfare at the selected count, when a welfare
    /// specification was supplied.
    pub welfare: Option<T>,
    pub rounds: Vec<BestResponseRound<T>>,
}

pub fn smallest_equilibrium<T: Scalar>(env: &Environment<T>, belief: &Belief<T>) -> Result<EquilibriumOutcome<T>> {
    smallest_equilibrium_with(env, belief, T::gain_tol())
}

/// Best responses from universal inaction, one entrant per round, with
/// strict-gain threshold `tol`.
pub fn smallest_equilibrium_with<T: Scalar>(env: &Environment<T>, belief: &Belief<T>, tol: T) -> Result<EquilibriumOutcome<T>> {
    check_belief(env, belief)?;
    let (coop_count, rounds) = climb(env, belief.probs(), 0, tol);
    Ok(EquilibriumOutcome {
        coop_count,
        all_equilibria: symmetric_equilibria(env, belief.probs(), tol),
        selected: Selection::Smallest,
        welfare: None,
        rounds,
    })
}

/// [`smallest_equilibrium`] with the welfare of the selected count filled in.
pub fn smallest_equilibrium_welfare<T: Scalar>(
    env: &Environment<T>,
    welfare: &WelfareSpec<T>,
    belief: &Belief<T>,
) -> Result<EquilibriumOutcome<T>> {
    ensure_compatible(env, welfare)?;
    let mut out = smallest_equilibrium(env, belief)?;
    out.welfare = Some(
        belief
            .probs()
            .iter()
            .enumerate()
            .map(|(s, &p)| p * welfare.value_at(s, out.coop_count))
            .sum(),
    );
    Ok(out)
}

fn climb<T: Scalar>(env: &Environment<T>, posterior: &[T], start: usize, tol: T) -> (usize, Vec<BestResponseRound<T>>) {
    let n = env.n_agents();
    let mut count = start;
    let mut rounds = Vec::new();
    while count < n {
        let gain = gain_under(env, posterior, count);
        let next = if gain > tol { count + 1 } else { count };
        rounds.push(BestResponseRound {
            round: rounds.len(),
            count,
            gain,
            next_count: next,
        });
        if next == count {
            break;
        }
        count = next;
    }
    (count, rounds)
}

/// Counts `n` where no cooperator gains by leaving and no defector gains
/// strictly by joining.
fn symmetric_equilibria<T: Scalar>(env: &Environment<T>, posterior: &[T], tol: T) -> Vec<usize> {
    let n = env.n_agents();
    (0..=n)
        .filter(|&k| {
            let outsiders_stay = k == n || gain_under(env, posterior, k) <= tol;
            let insiders_stay = k == 0 || gain_under(env, posterior, k - 1) >= -tol;
            outsiders_stay && insiders_stay
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EvaluationMode {
    PrivateSequential,
    Public,
}

#[derive(Debug, Clone, Copy)]
pub enum PolicyRef<'a, T = f64> {
    Sequential(&'a SequentialPolicy<T>),
    Threshold(&'a ThresholdPolicy<T>),
}

/// Realized play for one `(state, sequence)` draw of a private policy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrivateDraw<T = f64> {
    pub state: usize,
    /// `None` stands for the uniform distribution over full orderings.
    pub sequence: Option<InvitationSequence>,
    pub mass: T,
    pub realized_count: usize,
    /// Position of the first invitee who refused, if any.
    pub broken_at: Option<usize>,
}

/// One commonly observed invitation set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PublicEvent<T = f64> {
    pub invited: Vec<usize>,
    pub likelihood: Vec<T>,
    pub posterior: Vec<T>,
    pub outcome: EquilibriumOutcome<T>,
    pub welfare: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealizedEvaluation<T = f64> {
    pub mode: EvaluationMode,
    /// Designer objective assuming every recommendation is followed.
    pub predicted_welfare: T,
    pub expected_welfare: T,
    pub obedience: Option<ObedienceReport<T>>,
    pub private_draws: Vec<PrivateDraw<T>>,
    pub public_events: Vec<PublicEvent<T>>,
}

pub fn evaluate_policy_realized<T: Scalar>(
    policy: PolicyRef<'_, T>,
    env: &Environment<T>,
    welfare: &WelfareSpec<T>,
    mode: EvaluationMode,
) -> Result<RealizedEvaluation<T>> {
    ensure_compatible(env, welfare)?;
    let converted;
    let policy = match policy {
        PolicyRef::Sequential(p) => p,
        PolicyRef::Threshold(tp) => {
            converted = to_sequential_policy(tp, env);
            &converted
        }
    };
    let predicted = policy.expected_welfare(env, welfare)?;
    match mode {
        EvaluationMode::Public => evaluate_public(policy, env, welfare, predicted),
        EvaluationMode::PrivateSequential => evaluate_private(policy, env, welfare, predicted),
    }
}

fn evaluate_public<T: Scalar>(
    policy: &SequentialPolicy<T>,
    env: &Environment<T>,
    welfare: &WelfareSpec<T>,
    predicted: T,
) -> Result<RealizedEvaluation<T>> {
    let n_states = env.n_states();
    let mut events: BTreeMap<Vec<usize>, Vec<T>> = BTreeMap::new();
    for (state, seq, p) in policy.entries() {
        let mut key = seq.agents().to_vec();
        key.sort_unstable();
        events.entry(key).or_insert_with(|| vec![T::zero(); n_states])[state] += p;
    }
    for (state, p) in policy.uniform_full() {
        events
            .entry((0..env.n_agents()).collect())
            .or_insert_with(|| vec![T::zero(); n_states])[state] += p;
    }

    let mut public_events = Vec::new();
    let mut total = T::zero();
    for (invited, likelihood) in events {
        let reach: T = env.prior().iter().zip(&likelihood).map(|(&m, &l)| m * l).sum();
        if reach <= T::zero() {
            continue;
        }
        let belief = posterior_from_event(env, &likelihood)?;
        let outcome = smallest_equilibrium_welfare(env, welfare, &belief)?;
        let w = (0..n_states)
            .map(|s| env.prior()[s] * likelihood[s] * welfare.value_at(s, outcome.coop_count))
            .sum();
        total += w;
        public_events.push(PublicEvent {
            invited,
            likelihood,
            posterior: belief.posterior,
            outcome,
            welfare: w,
        });
    }
    Ok(RealizedEvaluation {
        mode: EvaluationMode::Public,
        predicted_welfare: predicted,
        expected_welfare: total,
        obedience: None,
        private_draws: Vec::new(),
        public_events,
    })
}

fn evaluate_private<T: Scalar>(
    policy: &SequentialPolicy<T>,
    env: &Environment<T>,
    welfare: &WelfareSpec<T>,
    predicted: T,
) -> Result<RealizedEvaluation<T>> {
    let tol = T::feas_tol();
    let report = check_policy(policy, env, tol)?;
    let n = env.n_agents();

    let mut draws = Vec::new();
    if report.pass {
        for (state, seq, p) in policy.entries() {
            draws.push(PrivateDraw {
                state,
                sequence: Some(seq.clone()),
                mass: p,
                realized_count: seq.len(),
                broken_at: None,
            });
        }
        for (state, p) in policy.uniform_full() {
            draws.push(PrivateDraw {
                state,
                sequence: None,
                mass: p,
                realized_count: n,
                broken_at: None,
            });
        }
        return Ok(RealizedEvaluation {
            mode: EvaluationMode::PrivateSequential,
            predicted_welfare: predicted,
            expected_welfare: predicted,
            obedience: Some(report),
            private_draws: draws,
            public_events: Vec::new(),
        });
    }

    // Obedience fails somewhere: walk each draw, break the chain at the
    // first invitee whose constraint is violated and let the rest respond
    // from there under that invitee's belief.
    let explicit;
    let walk_policy = if policy.has_uniform_full() && n <= PRIVATE_EXPANSION_LIMIT {
        explicit = policy.expanded(n)?;
        &explicit
    } else {
        policy
    };
    let invitee_beliefs = invitee_posteriors(walk_policy, env);
    let refuses = |agent: usize| report.so_c[agent] < -tol;
    let joins_uninvited = |agent: usize| report.so_n[agent] > tol;

    let resume = |agent: usize, from: usize| -> usize {
        match &invitee_beliefs[agent] {
            Some(posterior) => climb(env, posterior, from, T::gain_tol()).0,
            None => from,
        }
    };

    let mut total = T::zero();
    for (state, seq, p) in walk_policy.entries() {
        let broken_at = seq.agents().iter().position(|&a| refuses(a));
        let realized = match broken_at {
            Some(pos) => resume(seq.agents()[pos], pos),
            None => seq.len() + (0..n).filter(|&a| !seq.contains(a) && joins_uninvited(a)).count(),
        };
        total += env.prior()[state] * p * welfare.value_at(state, realized);
        draws.push(PrivateDraw {
            state,
            sequence: Some(seq.clone()),
            mass: p,
            realized_count: realized,
            broken_at,
        });
    }
    for (state, p) in walk_policy.uniform_full() {
        // too many orderings to walk: any refusing agent breaks the chain
        // at the very start
        let first_refuser = (0..n).find(|&a| refuses(a));
        let realized = match first_refuser {
            Some(a) => resume(a, 0),
            None => n,
        };
        total += env.prior()[state] * p * welfare.value_at(state, realized);
        draws.push(PrivateDraw {
            state,
            sequence: None,
            mass: p,
            realized_count: realized,
            broken_at: first_refuser.map(|_| 0),
        });
    }
    Ok(RealizedEvaluation {
        mode: EvaluationMode::PrivateSequential,
        predicted_welfare: predicted,
        expected_welfare: total,
        obedience: Some(report),
        private_draws: draws,
        public_events: Vec::new(),
    })
}

/// Posterior of each agent conditional on being invited, `None` for agents
/// never invited.
fn invitee_posteriors<T: Scalar>(policy: &SequentialPolicy<T>, env: &Environment<T>) -> Vec<Option<Vec<T>>> {
    let n = env.n_agents();
    let mut likelihood = vec![vec![T::zero(); env.n_states()]; n];
    for (state, seq, p) in policy.entries() {
        for &a in seq.agents() {
            likelihood[a][state] += p;
        }
    }
    for (state, p) in policy.uniform_full() {
        for row in likelihood.iter_mut() {
            row[state] += p;
        }
    }
    likelihood
        .into_iter()
        .map(|l| posterior_from_event(env, &l).ok().map(|b| b.posterior))
        .collect()
}
