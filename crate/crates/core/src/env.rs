//! Game primitives: the binary-action environment with anonymous
//! complementarities, its exact potential, and the designer's welfare.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{check_index, Error, Result};
use crate::scalar::Scalar;

/// Largest population for which a dense heterogeneity table is accepted.
pub const MAX_HETEROGENEITY_AGENTS: usize = 16;

/// Per-state parameters supplied when constructing an [`Environment`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateParams<T = f64> {
    pub label: String,
    pub prior: T,
    pub benefit: T,
    pub complementarity: T,
}

impl<T: Scalar> StateParams<T> {
    pub fn new(label: impl Into<String>, prior: T, benefit: T, complementarity: T) -> Self {
        Self {
            label: label.into(),
            prior,
            benefit,
            complementarity,
        }
    }
}

/// Additive per-agent payoff term `κ_i(a_{-i}, θ)`.
///
/// Stored densely over profiles of the *other* agents, so it cannot depend
/// on the agent's own action.
#[derive(Debug, Clone, PartialEq)]
pub struct Heterogeneity<T = f64> {
    n_agents: usize,
    n_states: usize,
    // [agent][state][profile mask with the agent's own bit cleared]
    values: Vec<T>,
}

impl<T: Scalar> Heterogeneity<T> {
    /// Tabulates `f(agent, others, state)`. `others[agent]` is always `false`.
    pub fn from_fn<F>(n_agents: usize, n_states: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, &[bool], usize) -> T,
    {
        if n_agents > MAX_HETEROGENEITY_AGENTS {
            return Err(Error::Capacity {
                what: "heterogeneity table",
                requested: 1u128 << n_agents,
                limit: 1u128 << MAX_HETEROGENEITY_AGENTS,
            });
        }
        let profiles = 1usize << n_agents;
        let mut values = vec![T::zero(); n_agents * n_states * profiles];
        let mut others = vec![false; n_agents];
        for agent in 0..n_agents {
            for state in 0..n_states {
                for mask in 0..profiles {
                    if mask & (1 << agent) != 0 {
                        continue;
                    }
                    for (j, slot) in others.iter_mut().enumerate() {
                        *slot = mask & (1 << j) != 0;
                    }
                    let v = f(agent, &others, state);
                    if !v.is_finite() {
                        return Err(Error::InvalidEnvironment(format!(
                            "heterogeneity term for agent {agent}, state {state} is not finite"
                        )));
                    }
                    values[(agent * n_states + state) * profiles + mask] = v;
                }
            }
        }
        Ok(Self {
            n_agents,
            n_states,
            values,
        })
    }

    fn value(&self, agent: usize, profile: &[bool], state: usize) -> T {
        let mask = profile
            .iter()
            .enumerate()
            .filter(|&(j, &a)| a && j != agent)
            .fold(0usize, |m, (j, _)| m | (1 << j));
        self.values[(agent * self.n_states + state) * (1 << self.n_agents) + mask]
    }
}

/// Finite-state environment of the cooperation game.
///
/// Validated on construction; immutable afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment<T = f64> {
    n_agents: usize,
    labels: Vec<String>,
    prior: Vec<T>,
    benefit: Vec<T>,
    complementarity: Vec<T>,
    cost: T,
    heterogeneity: Option<Heterogeneity<T>>,
}

impl<T: Scalar> Environment<T> {
    /// Builds and validates an environment. The first violated invariant is
    /// reported.
    pub fn new(n_agents: usize, states: Vec<StateParams<T>>, cost: T) -> Result<Self> {
        let env = Self::new_unchecked(n_agents, states, cost);
        env.validate()?;
        Ok(env)
    }

    /// Builds an environment without validation. Intended for diagnostics on
    /// deliberately broken primitives (e.g. negative complementarity fed to
    /// [`check_assumptions`](Self::check_assumptions)).
    pub fn new_unchecked(n_agents: usize, states: Vec<StateParams<T>>, cost: T) -> Self {
        let mut labels = Vec::with_capacity(states.len());
        let mut prior = Vec::with_capacity(states.len());
        let mut benefit = Vec::with_capacity(states.len());
        let mut complementarity = Vec::with_capacity(states.len());
        for s in states {
            labels.push(s.label);
            prior.push(s.prior);
            benefit.push(s.benefit);
            complementarity.push(s.complementarity);
        }
        Self {
            n_agents,
            labels,
            prior,
            benefit,
            complementarity,
            cost,
            heterogeneity: None,
        }
    }

    fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidEnvironment(msg));
        if self.n_agents == 0 {
            return fail("n_agents must be at least 1".into());
        }
        if self.labels.is_empty() {
            return fail("state space must be nonempty".into());
        }
        let mut seen = HashSet::new();
        for label in &self.labels {
            if !seen.insert(label.as_str()) {
                return fail(format!("duplicate state label {label:?}"));
            }
        }
        for (i, &p) in self.prior.iter().enumerate() {
            if !p.is_finite() || p < T::zero() {
                return fail(format!(
                    "prior of state {:?} must be a nonnegative number, got {p}",
                    self.labels[i]
                ));
            }
        }
        let total: T = self.prior.iter().copied().sum();
        if (total - T::one()).abs() > T::prior_tol() {
            return fail(format!("prior must sum to 1, sums to {total}"));
        }
        for (i, (&b, &l)) in self.benefit.iter().zip(&self.complementarity).enumerate() {
            if !b.is_finite() {
                return fail(format!("benefit of state {:?} is not finite", self.labels[i]));
            }
            if !l.is_finite() || l < T::zero() {
                return fail(format!(
                    "complementarity of state {:?} must be >= 0, got {l}",
                    self.labels[i]
                ));
            }
        }
        if !self.cost.is_finite() || self.cost <= T::zero() {
            return fail(format!("cost must be > 0, got {}", self.cost));
        }
        Ok(())
    }

    /// Attaches a heterogeneity table. It only enters [`utility`](Self::utility).
    pub fn with_heterogeneity(mut self, table: Heterogeneity<T>) -> Result<Self> {
        if table.n_agents != self.n_agents || table.n_states != self.n_states() {
            return Err(Error::InvalidEnvironment(format!(
                "heterogeneity table is {}x{} (agents x states), environment is {}x{}",
                table.n_agents,
                table.n_states,
                self.n_agents,
                self.n_states()
            )));
        }
        self.heterogeneity = Some(table);
        Ok(self)
    }

    /// Same primitives with a different cooperation cost.
    pub fn with_cost(&self, cost: T) -> Result<Self> {
        let mut env = self.clone();
        env.cost = cost;
        env.validate()?;
        Ok(env)
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn n_states(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, state: usize) -> &str {
        &self.labels[state]
    }

    pub fn prior(&self) -> &[T] {
        &self.prior
    }

    pub fn benefit(&self) -> &[T] {
        &self.benefit
    }

    pub fn complementarity(&self) -> &[T] {
        &self.complementarity
    }

    pub fn cost(&self) -> T {
        self.cost
    }

    pub fn heterogeneity(&self) -> Option<&Heterogeneity<T>> {
        self.heterogeneity.as_ref()
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Payoff of `agent` at `profile` in `state`.
    pub fn utility(&self, agent: usize, profile: &[bool], state: usize) -> Result<T> {
        if profile.len() != self.n_agents {
            return Err(Error::Argument(format!(
                "profile has {} entries, expected {}",
                profile.len(),
                self.n_agents
            )));
        }
        check_index("agent", agent, self.n_agents)?;
        check_index("state", state, self.n_states())?;
        let others = profile
            .iter()
            .enumerate()
            .filter(|&(j, &a)| a && j != agent)
            .count();
        let own = if profile[agent] {
            self.benefit[state] + self.complementarity_term(state, others) - self.cost
        } else {
            T::zero()
        };
        let kappa = self
            .heterogeneity
            .as_ref()
            .map_or(T::zero(), |h| h.value(agent, profile, state));
        Ok(own + kappa)
    }

    /// Gain from switching to cooperation with `others_cooperating` other
    /// cooperators. Anonymous: `agent` is validated but does not enter.
    pub fn marginal_gain(&self, agent: usize, others_cooperating: usize, state: usize) -> Result<T> {
        check_index("agent", agent, self.n_agents)?;
        check_index("state", state, self.n_states())?;
        if others_cooperating >= self.n_agents {
            return Err(Error::OutOfRange {
                what: "cooperating-others count",
                index: others_cooperating,
                len: self.n_agents,
            });
        }
        Ok(self.gain(state, others_cooperating))
    }

    /// Unchecked marginal gain; callers guarantee the indices.
    pub(crate) fn gain(&self, state: usize, others: usize) -> T {
        self.benefit[state] - self.cost + self.complementarity_term(state, others)
    }

    fn complementarity_term(&self, state: usize, others: usize) -> T {
        if self.n_agents < 2 {
            // no other agents to complement
            return T::zero();
        }
        self.complementarity[state] * T::of_usize(others) / T::of_usize(self.n_agents - 1)
    }

    /// Potential `F_θ(n)` as a function of the cooperation count.
    pub fn potential(&self, state: usize, n: usize) -> Result<T> {
        check_index("state", state, self.n_states())?;
        if n > self.n_agents {
            return Err(Error::OutOfRange {
                what: "cooperation count",
                index: n,
                len: self.n_agents + 1,
            });
        }
        Ok(self.potential_at(state, n))
    }

    pub(crate) fn potential_at(&self, state: usize, n: usize) -> T {
        let linear = (self.benefit[state] - self.cost) * T::of_usize(n);
        if self.n_agents < 2 {
            return linear;
        }
        let pairs = T::of_usize(n * n.saturating_sub(1));
        linear + self.complementarity[state] * pairs / T::of_usize(2 * (self.n_agents - 1))
    }

    /// Potential at universal cooperation, `F_θ(N)`.
    pub fn full_potential(&self, state: usize) -> T {
        self.potential_at(state, self.n_agents)
    }

    /// Gain of the last joiner under universal cooperation, `G(1, θ)`.
    pub fn full_gain(&self, state: usize) -> T {
        self.gain(state, self.n_agents - 1)
    }

    /// Evaluates the dominance, convex-welfare and convex-potential
    /// assumptions. Failures are reported, never raised.
    pub fn check_assumptions(&self, welfare: &WelfareSpec<T>) -> Result<AssumptionReport> {
        ensure_compatible(self, welfare)?;
        let n = self.n_agents;
        let tol = T::feas_tol();

        let dominance = match (0..self.n_states()).find(|&s| self.benefit[s] - self.cost > T::zero()) {
            Some(s) => AssumptionFinding::holds(Witness::state(self, s)),
            None => {
                // closest-to-dominant state as the witness
                let best = (0..self.n_states())
                    .max_by(|&a, &b| {
                        self.benefit[a]
                            .partial_cmp(&self.benefit[b])
                            .unwrap_or(std::cmp::Ordering::Equal)
                    })
                    .expect("nonempty state space");
                AssumptionFinding::fails(Witness::state(self, best))
            }
        };

        let mut convex_welfare = AssumptionFinding::vacuous();
        'welfare: for s in 0..self.n_states() {
            let full = welfare.full_value(s);
            for k in 0..=n {
                let bound = T::of_usize(k) / T::of_usize(n) * full;
                if welfare.value_at(s, k) > bound + tol {
                    convex_welfare = AssumptionFinding::fails(Witness::at(self, s, k));
                    break 'welfare;
                }
            }
        }

        let mut convex_potential = AssumptionFinding::vacuous();
        'potential: for s in 0..self.n_states() {
            for k in 0..n.saturating_sub(1) {
                let d0 = self.potential_at(s, k + 1) - self.potential_at(s, k);
                let d1 = self.potential_at(s, k + 2) - self.potential_at(s, k + 1);
                if d1 < d0 - tol {
                    convex_potential = AssumptionFinding::fails(Witness::at(self, s, k));
                    break 'potential;
                }
            }
        }

        Ok(AssumptionReport {
            dominance,
            convex_welfare,
            convex_potential,
        })
    }
}

pub(crate) fn ensure_compatible<T: Scalar>(env: &Environment<T>, welfare: &WelfareSpec<T>) -> Result<()> {
    if env.n_agents() != welfare.n_agents() || env.n_states() != welfare.n_states() {
        return Err(Error::Argument(format!(
            "welfare is defined for {} agents and {} states, environment has {} and {}",
            welfare.n_agents(),
            welfare.n_states(),
            env.n_agents(),
            env.n_states()
        )));
    }
    Ok(())
}

/// A state (and optionally a cooperation count) singled out by a finding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub state: usize,
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
}

impl Witness {
    fn state<T: Scalar>(env: &Environment<T>, state: usize) -> Self {
        Self {
            state,
            label: env.label(state).to_owned(),
            n: None,
        }
    }

    fn at<T: Scalar>(env: &Environment<T>, state: usize, n: usize) -> Self {
        Self {
            n: Some(n),
            ..Self::state(env, state)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssumptionFinding {
    pub holds: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

impl AssumptionFinding {
    fn holds(witness: Witness) -> Self {
        Self {
            holds: true,
            witness: Some(witness),
        }
    }

    fn fails(witness: Witness) -> Self {
        Self {
            holds: false,
            witness: Some(witness),
        }
    }

    fn vacuous() -> Self {
        Self {
            holds: true,
            witness: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub dominance: AssumptionFinding,
    pub convex_welfare: AssumptionFinding,
    pub convex_potential: AssumptionFinding,
}

impl AssumptionReport {
    pub fn all_hold(&self) -> bool {
        self.dominance.holds && self.convex_welfare.holds && self.convex_potential.holds
    }

    /// Human-readable descriptions of the failed assumptions.
    pub fn warnings(&self) -> Vec<String> {
        let describe = |name: &str, f: &AssumptionFinding| {
            let at = f.witness.as_ref().map_or(String::new(), |w| match w.n {
                Some(n) => format!(" (state {:?}, n = {n})", w.label),
                None => format!(" (state {:?})", w.label),
            });
            format!("{name} assumption violated{at}")
        };
        let mut out = Vec::new();
        if !self.dominance.holds {
            out.push(describe("dominance", &self.dominance));
        }
        if !self.convex_welfare.holds {
            out.push(describe("convex-welfare", &self.convex_welfare));
        }
        if !self.convex_potential.holds {
            out.push(describe("convex-potential", &self.convex_potential));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WelfareKind<T = f64> {
    /// `α_θ (n/N)^β`
    Power { alpha: Vec<T>, beta: T },
    /// `v_θ(n)` for `n = 0..=N`
    Tabulated { values: Vec<Vec<T>> },
}

/// Designer welfare as a function of the state and the cooperation count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelfareSpec<T = f64> {
    n_agents: usize,
    kind: WelfareKind<T>,
}

impl<T: Scalar> WelfareSpec<T> {
    pub fn power(n_agents: usize, alpha: Vec<T>, beta: T) -> Result<Self> {
        if n_agents == 0 {
            return Err(Error::InvalidWelfare("n_agents must be at least 1".into()));
        }
        if let Some((s, a)) = alpha
            .iter()
            .enumerate()
            .find(|(_, a)| !a.is_finite() || **a <= T::zero())
        {
            return Err(Error::InvalidWelfare(format!(
                "scale of state {s} must be > 0, got {a}"
            )));
        }
        if !beta.is_finite() || beta < T::one() {
            return Err(Error::InvalidWelfare(format!("exponent must be >= 1, got {beta}")));
        }
        Ok(Self {
            n_agents,
            kind: WelfareKind::Power { alpha, beta },
        })
    }

    /// Per-state tables of length `N + 1`, normalized at zero and weakly
    /// increasing. Convexity is *not* required here; it is reported by
    /// [`Environment::check_assumptions`].
    pub fn tabulated(n_agents: usize, values: Vec<Vec<T>>) -> Result<Self> {
        for (s, row) in values.iter().enumerate() {
            if row.len() != n_agents + 1 {
                return Err(Error::InvalidWelfare(format!(
                    "table for state {s} has {} entries, expected {}",
                    row.len(),
                    n_agents + 1
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidWelfare(format!("table for state {s} is not finite")));
            }
            if row[0] != T::zero() {
                return Err(Error::InvalidWelfare(format!(
                    "welfare at zero cooperation must be 0 in state {s}, got {}",
                    row[0]
                )));
            }
            if let Some(k) = (1..row.len()).find(|&k| row[k] < row[k - 1]) {
                return Err(Error::InvalidWelfare(format!(
                    "welfare decreases from n = {} to n = {k} in state {s}",
                    k - 1
                )));
            }
        }
        Ok(Self {
            n_agents,
            kind: WelfareKind::Tabulated { values },
        })
    }

    pub fn kind(&self) -> &WelfareKind<T> {
        &self.kind
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn n_states(&self) -> usize {
        match &self.kind {
            WelfareKind::Power { alpha, .. } => alpha.len(),
            WelfareKind::Tabulated { values } => values.len(),
        }
    }

    pub fn value(&self, state: usize, n: usize) -> Result<T> {
        check_index("state", state, self.n_states())?;
        if n > self.n_agents {
            return Err(Error::OutOfRange {
                what: "cooperation count",
                index: n,
                len: self.n_agents + 1,
            });
        }
        Ok(self.value_at(state, n))
    }

    pub(crate) fn value_at(&self, state: usize, n: usize) -> T {
        match &self.kind {
            WelfareKind::Power { alpha, beta } => {
                if n == 0 {
                    T::zero()
                } else {
                    alpha[state] * (T::of_usize(n) / T::of_usize(self.n_agents)).powf(*beta)
                }
            }
            WelfareKind::Tabulated { values } => values[state][n],
        }
    }

    /// `V(1, θ)`.
    pub fn full_value(&self, state: usize) -> T {
        self.value_at(state, self.n_agents)
    }

    /// Multiplies every welfare value by `factor > 0`.
    pub fn scaled(&self, factor: T) -> Result<Self> {
        match &self.kind {
            WelfareKind::Power { alpha, beta } => Self::power(
                self.n_agents,
                alpha.iter().map(|&a| a * factor).collect(),
                *beta,
            ),
            WelfareKind::Tabulated { values } => Self::tabulated(
                self.n_agents,
                values
                    .iter()
                    .map(|row| row.iter().map(|&v| v * factor).collect())
                    .collect(),
            ),
        }
    }
}
