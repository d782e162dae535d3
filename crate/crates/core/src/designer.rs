//! Constructive threshold rule for the optimal perfectly coordinated
//! sequential policy.
//!
//! States are scored by `S(θ) = F_θ(N) / V(1, θ)` and sorted. Walking down
//! from the highest score, full-cooperation potentials are accumulated
//! (weighted by the prior) until the running total would drop to zero; the
//! state where that happens is the threshold and is invited with the
//! probability that balances the total exactly. Everything above it is
//! always invited, everything below never.
//!
//! The work is one sort of `|Θ|` scores plus linear passes; nothing depends
//! on the population size.

use std::cell::Cell;
use std::cmp::Ordering;

use serde::{Serialize, Serializer};

use crate::env::{ensure_compatible, Environment, WelfareSpec};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seqpolicy::{InvitationSequence, SequentialPolicy};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DesignOptions {
    /// Reject states with non-positive full-cooperation welfare instead of
    /// scoring them `±∞`.
    pub strict: bool,
}

/// Work performed by one threshold construction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct OpCounts {
    pub score_evaluations: usize,
    pub sort_comparisons: usize,
    pub balance_steps: usize,
}

/// Result of the balance procedure on generic per-state weights.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Balance<T> {
    pub scores: Vec<T>,
    /// State indices by nondecreasing score.
    pub order: Vec<usize>,
    pub threshold: usize,
    pub mixing: T,
    pub invite: Vec<T>,
    pub degenerate: bool,
    pub ops: OpCounts,
}

fn ratio_score<T: Scalar>(weight: T, value: T, state: usize, strict: bool) -> Result<T> {
    if value > T::zero() {
        return Ok(weight / value);
    }
    if strict {
        return Err(Error::Domain(format!(
            "full-cooperation welfare of state {state} is {value}; score undefined"
        )));
    }
    // zero-welfare states: free obedience slack if the weight is positive,
    // never worth inviting otherwise
    Ok(if weight > T::zero() {
        T::infinity()
    } else {
        T::neg_infinity()
    })
}

/// Scores, sorts and balances `Σ prior·weight` at zero. Requires at least
/// one state with positive weight.
pub(crate) fn balance<T: Scalar>(prior: &[T], weight: &[T], value: &[T], strict: bool) -> Result<Balance<T>> {
    let n = prior.len();
    let mut ops = OpCounts::default();

    let mut scores = Vec::with_capacity(n);
    for s in 0..n {
        scores.push(ratio_score(weight[s], value[s], s, strict)?);
        ops.score_evaluations += 1;
    }
    if !weight.iter().any(|&w| w > T::zero()) {
        return Err(Error::Infeasible(
            "no state has positive full-cooperation potential; only universal defection is implementable".into(),
        ));
    }

    let comparisons = Cell::new(0usize);
    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal scores keep input order
    order.sort_by(|&a, &b| {
        comparisons.set(comparisons.get() + 1);
        scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal)
    });
    ops.sort_comparisons = comparisons.get();

    let mut invite = vec![T::zero(); n];
    let mut cumulative = T::zero();
    let mut crossing = None;
    let mut lowest_eligible = None;
    for &s in order.iter().rev() {
        if scores[s] == T::neg_infinity() {
            break;
        }
        ops.balance_steps += 1;
        lowest_eligible = Some(s);
        let contribution = prior[s] * weight[s];
        let next = cumulative + contribution;
        if next <= T::zero() && contribution < T::zero() {
            let p = (cumulative / -contribution).max(T::zero()).min(T::one());
            crossing = Some((s, p));
            break;
        }
        invite[s] = T::one();
        cumulative = next;
    }

    let (threshold, mixing, degenerate) = match crossing {
        Some((s, p)) => {
            invite[s] = p;
            (s, p, false)
        }
        // the balance never reaches zero: invite every eligible state
        None => (
            lowest_eligible.expect("a positive-weight state is always eligible"),
            T::one(),
            true,
        ),
    };

    Ok(Balance {
        scores,
        order,
        threshold,
        mixing,
        invite,
        degenerate,
        ops,
    })
}

fn serialize_scores<T: Scalar + Serialize, S: Serializer>(scores: &[T], ser: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = ser.serialize_seq(Some(scores.len()))?;
    for &s in scores {
        if s.is_finite() {
            seq.serialize_element(&s)?;
        } else if s > T::zero() {
            seq.serialize_element("inf")?;
        } else {
            seq.serialize_element("-inf")?;
        }
    }
    seq.end()
}

/// Compact description of the optimal threshold policy.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Scalar + Serialize"))]
pub struct ThresholdPolicy<T = f64> {
    pub labels: Vec<String>,
    #[serde(serialize_with = "serialize_scores")]
    pub scores: Vec<T>,
    pub order: Vec<usize>,
    pub threshold_state: usize,
    pub threshold_label: String,
    pub mixing_weight: T,
    pub expected_welfare: T,
    /// Probability of inviting everyone, per state.
    pub invite_probability: Vec<T>,
    /// The balance never reached zero; every eligible state is invited.
    pub degenerate: bool,
    pub warnings: Vec<String>,
}

impl<T: Scalar> ThresholdPolicy<T> {
    pub fn to_json(&self) -> String
    where
        T: Serialize,
    {
        serde_json::to_string_pretty(self).expect("threshold policy serializes")
    }

    /// Invitation probability along the score order.
    pub fn invitation_by_rank(&self) -> Vec<T> {
        self.order.iter().map(|&s| self.invite_probability[s]).collect()
    }
}

/// `S(θ) = F_θ(N) / V(1, θ)`.
pub fn score<T: Scalar>(env: &Environment<T>, welfare: &WelfareSpec<T>, state: usize, strict: bool) -> Result<T> {
    ensure_compatible(env, welfare)?;
    crate::error::check_index("state", state, env.n_states())?;
    ratio_score(env.full_potential(state), welfare.full_value(state), state, strict)
}

pub fn design<T: Scalar>(env: &Environment<T>, welfare: &WelfareSpec<T>) -> Result<ThresholdPolicy<T>> {
    design_with(env, welfare, DesignOptions::default())
}

pub fn design_with<T: Scalar>(env: &Environment<T>, welfare: &WelfareSpec<T>, options: DesignOptions) -> Result<ThresholdPolicy<T>> {
    design_instrumented(env, welfare, options).map(|(tp, _)| tp)
}

/// [`design_with`] that also reports how much work the construction did.
pub fn design_instrumented<T: Scalar>(
    env: &Environment<T>,
    welfare: &WelfareSpec<T>,
    options: DesignOptions,
) -> Result<(ThresholdPolicy<T>, OpCounts)> {
    ensure_compatible(env, welfare)?;
    let warnings = env.check_assumptions(welfare)?.warnings();
    let potentials: Vec<T> = (0..env.n_states()).map(|s| env.full_potential(s)).collect();
    let values: Vec<T> = (0..env.n_states()).map(|s| welfare.full_value(s)).collect();
    let b = balance(env.prior(), &potentials, &values, options.strict)?;

    let expected_welfare = (0..env.n_states())
        .map(|s| env.prior()[s] * b.invite[s] * values[s])
        .sum();
    let tp = ThresholdPolicy {
        labels: env.labels().to_vec(),
        scores: b.scores,
        order: b.order,
        threshold_state: b.threshold,
        threshold_label: env.label(b.threshold).to_owned(),
        mixing_weight: b.mixing,
        expected_welfare,
        invite_probability: b.invite,
        degenerate: b.degenerate,
        warnings,
    };
    Ok((tp, b.ops))
}

/// Expands a threshold policy into a sequential policy: uniform over all
/// full orderings with the state's invitation probability, the rest on the
/// empty sequence.
pub fn to_sequential_policy<T: Scalar>(tp: &ThresholdPolicy<T>, env: &Environment<T>) -> SequentialPolicy<T> {
    let mut policy = SequentialPolicy::new(env.labels().to_vec());
    for (s, &p) in tp.invite_probability.iter().enumerate() {
        policy.set_uniform_full(s, p);
        policy.set(s, InvitationSequence::empty(), T::one() - p);
    }
    policy
}
