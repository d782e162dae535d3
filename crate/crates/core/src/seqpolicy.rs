//! Sequential information policies over ordered invitation sequences and
//! the feasibility / sequential-obedience checks that certify them.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::env::{ensure_compatible, Environment, WelfareSpec};
use crate::error::{check_index, Error, Result};
use crate::scalar::Scalar;

/// Maximum number of sequences (or explicit orderings) that will be
/// materialized. Beyond this the exact LP is not a desk-scale oracle.
pub const ENUMERATION_LIMIT: u128 = 2_000_000;

/// Ordered list of distinct agents, invited to cooperate in that order.
///
/// Ordering is canonical: by length first, then lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct InvitationSequence(Vec<usize>);

impl InvitationSequence {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// Validates that the entries are distinct.
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(order.len());
        if let Some(dup) = order.iter().find(|a| !seen.insert(**a)) {
            return Err(Error::Argument(format!("agent {dup} appears twice in invitation sequence")));
        }
        Ok(Self(order))
    }

    /// # Panics
    /// If `order` repeats an agent.
    pub fn from_order(order: Vec<usize>) -> Self {
        Self::new(order).expect("invitation sequence with distinct agents")
    }

    /// The identity ordering `(0, 1, …, n-1)`.
    pub fn full(n_agents: usize) -> Self {
        Self((0..n_agents).collect())
    }

    pub fn agents(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, agent: usize) -> bool {
        self.0.contains(&agent)
    }

    pub fn position(&self, agent: usize) -> Option<usize> {
        self.0.iter().position(|&a| a == agent)
    }

    /// Number of others a cautious `agent` expects to cooperate: those invited
    /// strictly before it, or every invitee when it is not invited.
    pub fn predecessors(&self, agent: usize) -> usize {
        self.position(agent).unwrap_or(self.0.len())
    }

    /// Applies an agent relabelling `agent -> perm[agent]`.
    pub fn relabel(&self, perm: &[usize]) -> Self {
        Self(self.0.iter().map(|&a| perm[a]).collect())
    }

    fn check_agents(&self, n_agents: usize) -> Result<()> {
        self.0
            .iter()
            .try_for_each(|&a| check_index("agent", a, n_agents))
    }
}

impl Ord for InvitationSequence {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for InvitationSequence {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl TryFrom<Vec<usize>> for InvitationSequence {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<InvitationSequence> for Vec<usize> {
    fn from(s: InvitationSequence) -> Self {
        s.0
    }
}

/// `Σ_{k=0}^{N} N!/(N-k)!`, saturating at `u128::MAX`.
pub fn sequence_count(n_agents: usize) -> u128 {
    let mut total: u128 = 1;
    let mut falling: u128 = 1;
    for k in 0..n_agents {
        falling = falling.saturating_mul((n_agents - k) as u128);
        total = total.saturating_add(falling);
    }
    total
}

pub(crate) fn factorial(n: usize) -> u128 {
    (1..=n as u128).fold(1u128, |acc, k| acc.saturating_mul(k))
}

/// All ordered subsequences of `n_agents` agents, including the empty one,
/// in canonical order.
pub fn enumerate_sequences(n_agents: usize) -> Result<Vec<InvitationSequence>> {
    let count = sequence_count(n_agents);
    if count > ENUMERATION_LIMIT {
        return Err(Error::Capacity {
            what: "invitation sequence enumeration",
            requested: count,
            limit: ENUMERATION_LIMIT,
        });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut prefix = Vec::with_capacity(n_agents);
    let mut used = vec![false; n_agents];
    for len in 0..=n_agents {
        permutations_of_len(len, &mut prefix, &mut used, &mut out);
    }
    Ok(out)
}

fn permutations_of_len(
    len: usize,
    prefix: &mut Vec<usize>,
    used: &mut [bool],
    out: &mut Vec<InvitationSequence>,
) {
    if prefix.len() == len {
        out.push(InvitationSequence(prefix.clone()));
        return;
    }
    for agent in 0..used.len() {
        if used[agent] {
            continue;
        }
        used[agent] = true;
        prefix.push(agent);
        permutations_of_len(len, prefix, used, out);
        prefix.pop();
        used[agent] = false;
    }
}

/// All `N!` full orderings in lexicographic order.
pub fn full_orderings(n_agents: usize) -> Result<Vec<InvitationSequence>> {
    let count = factorial(n_agents);
    if count > ENUMERATION_LIMIT {
        return Err(Error::Capacity {
            what: "full ordering enumeration",
            requested: count,
            limit: ENUMERATION_LIMIT,
        });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut prefix = Vec::with_capacity(n_agents);
    let mut used = vec![false; n_agents];
    permutations_of_len(n_agents, &mut prefix, &mut used, &mut out);
    Ok(out)
}

/// Per-state distribution over invitation sequences.
///
/// Only nonzero masses are stored. The uniform distribution over all `N!`
/// full orderings is kept implicitly as a single per-state mass in
/// `uniform_full`; the checkers evaluate it in closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "PolicyDocument<T>",
    into = "PolicyDocument<T>",
    bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>")
)]
pub struct SequentialPolicy<T = f64> {
    states: Vec<String>,
    entries: BTreeMap<(usize, InvitationSequence), T>,
    uniform_full: BTreeMap<usize, T>,
}

impl<T: Scalar> SequentialPolicy<T> {
    pub fn new(states: Vec<String>) -> Self {
        Self {
            states,
            entries: BTreeMap::new(),
            uniform_full: BTreeMap::new(),
        }
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    /// Sets `π(seq | state)`; a zero mass removes the entry.
    pub fn set(&mut self, state: usize, seq: InvitationSequence, prob: T) {
        if prob == T::zero() {
            self.entries.remove(&(state, seq));
        } else {
            self.entries.insert((state, seq), prob);
        }
    }

    /// Adds `prob` to `π(seq | state)`.
    pub fn add(&mut self, state: usize, seq: InvitationSequence, prob: T) {
        let slot = self.entries.entry((state, seq)).or_insert_with(T::zero);
        *slot += prob;
    }

    /// Sets the mass spread uniformly over all full orderings in `state`.
    pub fn set_uniform_full(&mut self, state: usize, prob: T) {
        if prob == T::zero() {
            self.uniform_full.remove(&state);
        } else {
            self.uniform_full.insert(state, prob);
        }
    }

    pub fn mass(&self, state: usize, seq: &InvitationSequence) -> T {
        // BTreeMap lookup needs an owned key
        self.entries
            .get(&(state, seq.clone()))
            .copied()
            .unwrap_or_else(T::zero)
    }

    pub fn uniform_full_mass(&self, state: usize) -> T {
        self.uniform_full.get(&state).copied().unwrap_or_else(T::zero)
    }

    /// Explicit entries in canonical `(state, sequence)` order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, &InvitationSequence, T)> + '_ {
        self.entries.iter().map(|((s, q), &p)| (*s, q, p))
    }

    pub fn uniform_full(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        self.uniform_full.iter().map(|(&s, &p)| (s, p))
    }

    pub fn has_uniform_full(&self) -> bool {
        !self.uniform_full.is_empty()
    }

    /// Total mass assigned in `state`.
    pub fn state_mass(&self, state: usize) -> T {
        self.entries
            .range((state, InvitationSequence::empty())..)
            .take_while(|((s, _), _)| *s == state)
            .map(|(_, &p)| p)
            .sum::<T>()
            + self.uniform_full_mass(state)
    }

    /// Probability that every agent is invited in `state`.
    pub fn full_invitation_mass(&self, n_agents: usize, state: usize) -> T {
        self.entries()
            .filter(|(s, q, _)| *s == state && q.len() == n_agents)
            .map(|(_, _, p)| p)
            .sum::<T>()
            + self.uniform_full_mass(state)
    }

    /// Checks that states and agents referenced by the policy exist in `env`.
    pub fn validate_against(&self, env: &Environment<T>) -> Result<()> {
        if self.states.len() != env.n_states() {
            return Err(Error::Argument(format!(
                "policy covers {} states, environment has {}",
                self.states.len(),
                env.n_states()
            )));
        }
        for (state, seq) in self.entries.keys() {
            check_index("state", *state, env.n_states())?;
            seq.check_agents(env.n_agents())?;
        }
        for state in self.uniform_full.keys() {
            check_index("state", *state, env.n_states())?;
        }
        Ok(())
    }

    /// Replaces the implicit uniform-full masses with `N!` explicit entries.
    pub fn expanded(&self, n_agents: usize) -> Result<Self> {
        let mut out = Self {
            states: self.states.clone(),
            entries: self.entries.clone(),
            uniform_full: BTreeMap::new(),
        };
        if self.uniform_full.is_empty() {
            return Ok(out);
        }
        let orderings = full_orderings(n_agents)?;
        let share = T::one() / T::of_usize(orderings.len());
        for (&state, &mass) in &self.uniform_full {
            for seq in &orderings {
                out.add(state, seq.clone(), mass * share);
            }
        }
        Ok(out)
    }

    /// Designer objective `Σ_θ μ(θ) Σ_γ π(γ|θ) V(|γ|, θ)`.
    pub fn expected_welfare(&self, env: &Environment<T>, welfare: &WelfareSpec<T>) -> Result<T> {
        ensure_compatible(env, welfare)?;
        self.validate_against(env)?;
        let mut total = T::zero();
        for (state, seq, p) in self.entries() {
            total += env.prior()[state] * p * welfare.value_at(state, seq.len());
        }
        for (state, p) in self.uniform_full() {
            total += env.prior()[state] * p * welfare.full_value(state);
        }
        Ok(total)
    }

    /// Applies an agent relabelling to every explicit sequence.
    pub fn relabel_agents(&self, perm: &[usize]) -> Self {
        Self {
            states: self.states.clone(),
            entries: self
                .entries
                .iter()
                .map(|((s, q), &p)| ((*s, q.relabel(perm)), p))
                .collect(),
            uniform_full: self.uniform_full.clone(),
        }
    }

    pub fn to_json(&self) -> String
    where
        T: Serialize,
    {
        serde_json::to_string_pretty(self).expect("policy serializes")
    }

    pub fn from_json(text: &str) -> Result<Self>
    where
        T: for<'de> Deserialize<'de>,
    {
        serde_json::from_str(text).map_err(|e| Error::Document(e.to_string()))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryDoc<T> {
    state: usize,
    sequence: InvitationSequence,
    prob: T,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UniformDoc<T> {
    state: usize,
    prob: T,
}

/// Wire form: `{"states": [...], "entries": [...], "uniform_full": [...]}`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicyDocument<T> {
    states: Vec<String>,
    entries: Vec<EntryDoc<T>>,
    #[serde(default)]
    uniform_full: Vec<UniformDoc<T>>,
}

impl<T: Scalar> From<SequentialPolicy<T>> for PolicyDocument<T> {
    fn from(p: SequentialPolicy<T>) -> Self {
        Self {
            states: p.states,
            entries: p
                .entries
                .into_iter()
                .map(|((state, sequence), prob)| EntryDoc { state, sequence, prob })
                .collect(),
            uniform_full: p
                .uniform_full
                .into_iter()
                .map(|(state, prob)| UniformDoc { state, prob })
                .collect(),
        }
    }
}

impl<T: Scalar> TryFrom<PolicyDocument<T>> for SequentialPolicy<T> {
    type Error = Error;
    fn try_from(doc: PolicyDocument<T>) -> Result<Self> {
        let n_states = doc.states.len();
        let mut policy = SequentialPolicy::new(doc.states);
        for e in doc.entries {
            check_index("state", e.state, n_states)?;
            if policy.entries.contains_key(&(e.state, e.sequence.clone())) {
                return Err(Error::Document(format!(
                    "duplicate entry for state {} and sequence {:?}",
                    e.state,
                    e.sequence.agents()
                )));
            }
            policy.set(e.state, e.sequence, e.prob);
        }
        for u in doc.uniform_full {
            check_index("state", u.state, n_states)?;
            if policy.uniform_full.contains_key(&u.state) {
                return Err(Error::Document(format!("duplicate uniform_full entry for state {}", u.state)));
            }
            policy.set_uniform_full(u.state, u.prob);
        }
        Ok(policy)
    }
}

/// Outcome of the feasibility and sequential-obedience checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObedienceReport<T = f64> {
    /// Left-hand side of the cooperation constraint per agent (needs `>= 0`).
    pub so_c: Vec<T>,
    /// Left-hand side of the non-cooperation constraint per agent (needs `<= 0`).
    pub so_n: Vec<T>,
    pub feasible: Vec<bool>,
    pub pass: bool,
    pub tol: T,
}

impl<T: Scalar> ObedienceReport<T> {
    /// Agents whose cooperation constraint fails, in index order.
    pub fn so_c_violations(&self) -> Vec<usize> {
        (0..self.so_c.len()).filter(|&i| self.so_c[i] < -self.tol).collect()
    }

    pub fn so_n_violations(&self) -> Vec<usize> {
        (0..self.so_n.len()).filter(|&i| self.so_n[i] > self.tol).collect()
    }
}

/// Per-state validity of the policy as a probability distribution.
pub fn check_feasibility<T: Scalar>(policy: &SequentialPolicy<T>, env: &Environment<T>) -> Result<Vec<bool>> {
    policy.validate_against(env)?;
    let tol = T::feas_tol();
    let mut sums = vec![T::zero(); env.n_states()];
    let mut valid = vec![true; env.n_states()];
    let masses = policy
        .entries()
        .map(|(s, _, p)| (s, p))
        .chain(policy.uniform_full());
    for (state, p) in masses {
        if !(p >= T::zero() && p <= T::one() + tol) {
            valid[state] = false;
        }
        sums[state] += p;
    }
    Ok(valid
        .into_iter()
        .zip(sums)
        .map(|(ok, sum)| ok && (sum - T::one()).abs() <= tol)
        .collect())
}

/// Both obedience left-hand sides for every agent, in one pass over the
/// policy's support.
pub fn obedience_values<T: Scalar>(policy: &SequentialPolicy<T>, env: &Environment<T>) -> Result<(Vec<T>, Vec<T>)> {
    policy.validate_against(env)?;
    let n = env.n_agents();
    let mut so_c = vec![T::zero(); n];
    let mut so_n = vec![T::zero(); n];
    let mut invited = vec![false; n];
    for (state, seq, p) in policy.entries() {
        let w = env.prior()[state] * p;
        for (pos, &agent) in seq.agents().iter().enumerate() {
            so_c[agent] += w * env.gain(state, pos);
            invited[agent] = true;
        }
        if seq.len() < n {
            let outsider_gain = w * env.gain(state, seq.len());
            for agent in 0..n {
                if !invited[agent] {
                    so_n[agent] += outsider_gain;
                }
            }
        }
        for &agent in seq.agents() {
            invited[agent] = false;
        }
    }
    // uniform over N! orderings: the average gain telescopes to F(N)/N
    for (state, p) in policy.uniform_full() {
        let avg = env.full_potential(state) / T::of_usize(n);
        let w = env.prior()[state] * p;
        for v in so_c.iter_mut() {
            *v += w * avg;
        }
    }
    Ok((so_c, so_n))
}

pub fn so_c_value<T: Scalar>(policy: &SequentialPolicy<T>, env: &Environment<T>, agent: usize) -> Result<T> {
    check_index("agent", agent, env.n_agents())?;
    Ok(obedience_values(policy, env)?.0[agent])
}

pub fn so_n_value<T: Scalar>(policy: &SequentialPolicy<T>, env: &Environment<T>, agent: usize) -> Result<T> {
    check_index("agent", agent, env.n_agents())?;
    Ok(obedience_values(policy, env)?.1[agent])
}

/// Feasibility plus both sequential-obedience families at tolerance `tol`.
pub fn check_policy<T: Scalar>(policy: &SequentialPolicy<T>, env: &Environment<T>, tol: T) -> Result<ObedienceReport<T>> {
    let feasible = check_feasibility(policy, env)?;
    let (so_c, so_n) = obedience_values(policy, env)?;
    let pass = feasible.iter().all(|&f| f)
        && so_c.iter().all(|&v| v >= -tol)
        && so_n.iter().all(|&v| v <= tol);
    Ok(ObedienceReport {
        so_c,
        so_n,
        feasible,
        pass,
        tol,
    })
}
