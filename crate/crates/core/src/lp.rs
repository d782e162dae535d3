//! Exact linear-programming oracle over sequential policies.
//!
//! [`build_lp`] writes the designer's problem with one variable per
//! `(state, invitation sequence)` pair; [`solve`] runs a dense two-phase
//! primal simplex with Bland's rule. Both are only meant for small
//! populations, where the sequence space can be enumerated.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::env::{ensure_compatible, Environment, WelfareSpec};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seqpolicy::{enumerate_sequences, sequence_count, InvitationSequence, SequentialPolicy, ENUMERATION_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<=")]
    Le,
}

impl Sense {
    fn symbol(self) -> &'static str {
        match self {
            Sense::Ge => ">=",
            Sense::Le => "<=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqRow<T = f64> {
    pub name: String,
    pub coeffs: Vec<T>,
    pub rhs: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IneqRow<T = f64> {
    pub name: String,
    pub coeffs: Vec<T>,
    pub sense: Sense,
    pub rhs: T,
}

/// Variable identity: the probability of `sequence` in `state`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarKey {
    pub state: usize,
    pub sequence: InvitationSequence,
}

impl VarKey {
    fn name(&self) -> String {
        let mut s = format!("x_{}", self.state);
        if self.sequence.is_empty() {
            s.push_str("_e");
        }
        for a in self.sequence.agents() {
            let _ = write!(s, "_{a}");
        }
        s
    }
}

/// Maximization LP with nonnegative variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram<T = f64> {
    pub state_labels: Vec<String>,
    pub objective: Vec<T>,
    pub eq_constraints: Vec<EqRow<T>>,
    pub ineq_constraints: Vec<IneqRow<T>>,
    pub var_index: Vec<VarKey>,
}

impl<T: Scalar> LinearProgram<T> {
    pub fn new(state_labels: Vec<String>, var_index: Vec<VarKey>, objective: Vec<T>) -> Result<Self> {
        if var_index.len() != objective.len() {
            return Err(Error::Argument(format!(
                "{} variables but {} objective coefficients",
                var_index.len(),
                objective.len()
            )));
        }
        Ok(Self {
            state_labels,
            objective,
            eq_constraints: Vec::new(),
            ineq_constraints: Vec::new(),
            var_index,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn n_rows(&self) -> usize {
        self.eq_constraints.len() + self.ineq_constraints.len()
    }

    pub fn add_eq(&mut self, name: impl Into<String>, coeffs: Vec<T>, rhs: T) -> Result<()> {
        self.check_width(coeffs.len())?;
        self.eq_constraints.push(EqRow {
            name: name.into(),
            coeffs,
            rhs,
        });
        Ok(())
    }

    pub fn add_ineq(&mut self, name: impl Into<String>, coeffs: Vec<T>, sense: Sense, rhs: T) -> Result<()> {
        self.check_width(coeffs.len())?;
        self.ineq_constraints.push(IneqRow {
            name: name.into(),
            coeffs,
            sense,
            rhs,
        });
        Ok(())
    }

    fn check_width(&self, width: usize) -> Result<()> {
        if width != self.n_vars() {
            return Err(Error::Argument(format!(
                "row has {width} coefficients, LP has {} variables",
                self.n_vars()
            )));
        }
        Ok(())
    }

    /// Removes inequality rows identical to an earlier one.
    pub fn dedup_rows(&mut self) {
        let mut kept: Vec<IneqRow<T>> = Vec::with_capacity(self.ineq_constraints.len());
        for row in self.ineq_constraints.drain(..) {
            let dup = kept
                .iter()
                .any(|k| k.sense == row.sense && k.rhs == row.rhs && k.coeffs == row.coeffs);
            if !dup {
                kept.push(row);
            }
        }
        self.ineq_constraints = kept;
    }

    /// Objective value of a dense assignment.
    pub fn objective_value(&self, x: &[T]) -> T {
        self.objective.iter().zip(x).map(|(&c, &v)| c * v).sum()
    }

    /// Plain-text dump in CPLEX LP format, readable by common external solvers.
    pub fn to_lp_format(&self) -> String {
        let names: Vec<String> = self.var_index.iter().map(VarKey::name).collect();
        let mut out = String::new();
        out.push_str("\\ objective, rows, senses and right-hand sides of the sequential-policy LP\n");
        out.push_str("Maximize\n obj:");
        write_terms(&mut out, &self.objective, &names);
        out.push_str("\nSubject To\n");
        for row in &self.eq_constraints {
            let _ = write!(out, " {}:", row.name);
            write_terms(&mut out, &row.coeffs, &names);
            let _ = writeln!(out, " = {}", row.rhs);
        }
        for row in &self.ineq_constraints {
            let _ = write!(out, " {}:", row.name);
            write_terms(&mut out, &row.coeffs, &names);
            let _ = writeln!(out, " {} {}", row.sense.symbol(), row.rhs);
        }
        out.push_str("Bounds\n");
        for name in &names {
            let _ = writeln!(out, " {name} >= 0");
        }
        out.push_str("End\n");
        out
    }
}

fn write_terms<T: Scalar>(out: &mut String, coeffs: &[T], names: &[String]) {
    let mut any = false;
    for (c, name) in coeffs.iter().zip(names) {
        if *c == T::zero() {
            continue;
        }
        if *c < T::zero() {
            let _ = write!(out, " - {} {name}", -*c);
        } else {
            let _ = write!(out, " + {c} {name}");
        }
        any = true;
    }
    if !any {
        out.push_str(" 0 x_0_e");
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BuildOptions {
    /// Collapse obedience rows that are exact duplicates (symmetric instances).
    pub dedup_rows: bool,
}

/// Designer's LP: maximize expected welfare subject to feasibility and both
/// sequential-obedience families, one row per agent and family.
pub fn build_lp<T: Scalar>(env: &Environment<T>, welfare: &WelfareSpec<T>) -> Result<LinearProgram<T>> {
    build_lp_with(env, welfare, BuildOptions::default())
}

pub fn build_lp_with<T: Scalar>(env: &Environment<T>, welfare: &WelfareSpec<T>, options: BuildOptions) -> Result<LinearProgram<T>> {
    ensure_compatible(env, welfare)?;
    let n = env.n_agents();
    let n_states = env.n_states();
    let per_state = sequence_count(n);
    let total = per_state.saturating_mul(n_states as u128);
    if total > ENUMERATION_LIMIT {
        return Err(Error::Capacity {
            what: "LP variables",
            requested: total,
            limit: ENUMERATION_LIMIT,
        });
    }
    let seqs = enumerate_sequences(n)?;
    let mut var_index = Vec::with_capacity(total as usize);
    let mut objective = Vec::with_capacity(total as usize);
    for s in 0..n_states {
        for q in &seqs {
            objective.push(env.prior()[s] * welfare.value_at(s, q.len()));
            var_index.push(VarKey {
                state: s,
                sequence: q.clone(),
            });
        }
    }
    let mut lp = LinearProgram::new(env.labels().to_vec(), var_index, objective)?;
    let width = lp.n_vars();

    for s in 0..n_states {
        let mut row = vec![T::zero(); width];
        let base = s * seqs.len();
        for v in &mut row[base..base + seqs.len()] {
            *v = T::one();
        }
        lp.add_eq(format!("feas_{s}"), row, T::one())?;
    }
    for agent in 0..n {
        let mut coop = vec![T::zero(); width];
        let mut non = vec![T::zero(); width];
        for (j, key) in lp.var_index.iter().enumerate() {
            let g = env.prior()[key.state] * env.gain(key.state, key.sequence.predecessors(agent));
            if key.sequence.contains(agent) {
                coop[j] = g;
            } else {
                non[j] = g;
            }
        }
        lp.add_ineq(format!("soc_{agent}"), coop, Sense::Ge, T::zero())?;
        lp.add_ineq(format!("son_{agent}"), non, Sense::Le, T::zero())?;
    }
    if options.dedup_rows {
        lp.dedup_rows();
    }
    Ok(lp)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment<T = f64> {
    pub state: usize,
    pub sequence: InvitationSequence,
    pub prob: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution<T = f64> {
    pub status: LpStatus,
    pub value: T,
    /// Nonzero variables.
    pub assignment: Vec<Assignment<T>>,
    /// Per constraint (equalities first): residual for equalities, distance
    /// to the bound for inequalities.
    pub slacks: Vec<T>,
    /// Dual prices per constraint, in the same order as `slacks`.
    pub duals: Vec<T>,
    pub primal: Vec<T>,
    /// Final (or last, when the iteration cap hit) basis over the
    /// standard-form columns: variables, then slacks, then artificials.
    pub basis: Vec<usize>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions<T = f64> {
    /// Defaults to `100 · (rows + columns)` of the standard form.
    pub max_iterations: Option<usize>,
    pub pivot_tol: T,
}

impl<T: Scalar> Default for SolveOptions<T> {
    fn default() -> Self {
        Self {
            max_iterations: None,
            pivot_tol: T::pivot_tol(),
        }
    }
}

pub fn solve<T: Scalar>(lp: &LinearProgram<T>) -> Result<LpSolution<T>> {
    solve_with(lp, SolveOptions::default())
}

struct Tableau<T> {
    rows: Vec<Vec<T>>,
    rhs: Vec<T>,
    reduced: Vec<T>,
    basis: Vec<usize>,
}

enum PivotOutcome {
    Optimal,
    Unbounded(usize),
    IterationLimit,
}

impl<T: Scalar> Tableau<T> {
    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.rows[row][col];
        for v in self.rows[row].iter_mut() {
            *v /= piv;
        }
        self.rhs[row] /= piv;
        let pivot_row = self.rows[row].clone();
        let pivot_rhs = self.rhs[row];
        for r in 0..self.rows.len() {
            if r == row {
                continue;
            }
            let f = self.rows[r][col];
            if f == T::zero() {
                continue;
            }
            for (v, &p) in self.rows[r].iter_mut().zip(&pivot_row) {
                *v -= f * p;
            }
            self.rows[r][col] = T::zero();
            self.rhs[r] -= f * pivot_rhs;
        }
        let f = self.reduced[col];
        if f != T::zero() {
            for (v, &p) in self.reduced.iter_mut().zip(&pivot_row) {
                *v -= f * p;
            }
            self.reduced[col] = T::zero();
        }
        self.basis[row] = col;
    }

    fn price(&mut self, costs: &[T]) {
        self.reduced = costs.to_vec();
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = costs[b];
            if cb == T::zero() {
                continue;
            }
            for (d, &a) in self.reduced.iter_mut().zip(&self.rows[r]) {
                *d -= cb * a;
            }
        }
    }

    /// Bland's rule: lowest-index improving column, ties in the ratio test
    /// broken by lowest basic index.
    fn run(&mut self, enterable: usize, tol: T, iterations: &mut usize, cap: usize) -> PivotOutcome {
        loop {
            let Some(col) = (0..enterable).find(|&j| self.reduced[j] > tol) else {
                return PivotOutcome::Optimal;
            };
            if *iterations >= cap {
                return PivotOutcome::IterationLimit;
            }
            let mut leave: Option<(usize, T)> = None;
            for r in 0..self.rows.len() {
                let a = self.rows[r][col];
                if a <= tol {
                    continue;
                }
                let ratio = self.rhs[r] / a;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((lr, lratio)) => {
                        if ratio < lratio || (ratio == lratio && self.basis[r] < self.basis[lr]) {
                            Some((r, ratio))
                        } else {
                            Some((lr, lratio))
                        }
                    }
                };
            }
            let Some((row, _)) = leave else {
                return PivotOutcome::Unbounded(col);
            };
            self.pivot(row, col);
            *iterations += 1;
        }
    }
}

pub fn solve_with<T: Scalar>(lp: &LinearProgram<T>, options: SolveOptions<T>) -> Result<LpSolution<T>> {
    let n = lp.n_vars();
    let n_eq = lp.eq_constraints.len();
    let n_ineq = lp.ineq_constraints.len();
    let m = n_eq + n_ineq;
    for row in &lp.eq_constraints {
        lp.check_width(row.coeffs.len())?;
    }
    for row in &lp.ineq_constraints {
        lp.check_width(row.coeffs.len())?;
    }
    let tol = options.pivot_tol;

    // standard form: [x | slacks | artificials]
    let slack_of = |r: usize| n + (r - n_eq);
    let mut flipped = vec![false; m];
    let mut rows: Vec<Vec<T>> = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    for (r, row) in lp.eq_constraints.iter().enumerate() {
        let mut v = row.coeffs.clone();
        v.resize(n + n_ineq, T::zero());
        let mut b = row.rhs;
        if b < T::zero() {
            v.iter_mut().for_each(|a| *a = -*a);
            b = -b;
            flipped[r] = true;
        }
        rows.push(v);
        rhs.push(b);
    }
    for (k, row) in lp.ineq_constraints.iter().enumerate() {
        let r = n_eq + k;
        let mut v = row.coeffs.clone();
        v.resize(n + n_ineq, T::zero());
        v[slack_of(r)] = match row.sense {
            Sense::Le => T::one(),
            Sense::Ge => -T::one(),
        };
        let mut b = row.rhs;
        if b < T::zero() {
            v.iter_mut().for_each(|a| *a = -*a);
            b = -b;
            flipped[r] = true;
        }
        rows.push(v);
        rhs.push(b);
    }

    // identity column per row: a +1 slack when available, else an artificial
    let mut identity_col = vec![0usize; m];
    let mut n_art = 0;
    for r in 0..m {
        if r >= n_eq && rows[r][slack_of(r)] == T::one() {
            identity_col[r] = slack_of(r);
        } else {
            identity_col[r] = n + n_ineq + n_art;
            n_art += 1;
        }
    }
    let n_cols = n + n_ineq + n_art;
    for r in 0..m {
        rows[r].resize(n_cols, T::zero());
        rows[r][identity_col[r]] = T::one();
    }
    let cap = options.max_iterations.unwrap_or(100 * (m + n_cols));
    let original = (rows.clone(), rhs.clone());

    let mut tab = Tableau {
        rows,
        rhs,
        reduced: vec![T::zero(); n_cols],
        basis: identity_col.clone(),
    };
    let mut iterations = 0usize;

    let art_start = n + n_ineq;
    if n_art > 0 {
        let mut phase1 = vec![T::zero(); n_cols];
        for c in phase1[art_start..].iter_mut() {
            *c = -T::one();
        }
        tab.price(&phase1);
        match tab.run(n_cols, tol, &mut iterations, cap) {
            PivotOutcome::Optimal => {}
            PivotOutcome::IterationLimit => {
                return Ok(non_optimal(lp, &tab, LpStatus::IterationLimit, iterations));
            }
            PivotOutcome::Unbounded(_) => {
                return Err(Error::State("phase 1 cannot be unbounded".into()));
            }
        }
        let infeasibility: T = tab
            .basis
            .iter()
            .zip(&tab.rhs)
            .filter(|(&b, _)| b >= art_start)
            .map(|(_, &v)| v)
            .sum();
        if infeasibility > T::feas_tol() {
            return Ok(non_optimal(lp, &tab, LpStatus::Infeasible, iterations));
        }
        // drive zero-level artificials out of the basis where possible
        for r in 0..m {
            if tab.basis[r] < art_start {
                continue;
            }
            if let Some(col) = (0..art_start).find(|&j| tab.rows[r][j].abs() > tol) {
                tab.pivot(r, col);
                iterations += 1;
            }
        }
    }

    let mut phase2 = vec![T::zero(); n_cols];
    phase2[..n].copy_from_slice(&lp.objective);
    tab.price(&phase2);
    match tab.run(art_start, tol, &mut iterations, cap) {
        PivotOutcome::Optimal => {}
        PivotOutcome::IterationLimit => {
            return Ok(non_optimal(lp, &tab, LpStatus::IterationLimit, iterations));
        }
        PivotOutcome::Unbounded(col) => {
            return Err(Error::Unbounded(format!("column {col} improves without bound")));
        }
    }

    // Recompute the vertex from the original rows so round-off accumulated
    // over the pivots does not leak into the reported solution.
    let (a, b) = original;
    let basis_cols = |r: usize, k: usize| a[r][tab.basis[k]];
    let (primal, y_std) = match (
        lu_solve(m, basis_cols, &b),
        lu_solve(m, |k, r| basis_cols(r, k), &tab.basis.iter().map(|&j| phase2[j]).collect::<Vec<_>>()),
    ) {
        (Some(x_b), Some(y)) => {
            let mut x = vec![T::zero(); n];
            for (k, &j) in tab.basis.iter().enumerate() {
                if j < n {
                    x[j] = x_b[k].max(T::zero());
                }
            }
            (x, y)
        }
        _ => (
            primal_values(&tab, n),
            identity_col.iter().map(|&c| -tab.reduced[c]).collect(),
        ),
    };
    let duals = y_std
        .into_iter()
        .zip(&flipped)
        .map(|(y, &f)| if f { -y } else { y })
        .collect();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        value: lp.objective_value(&primal),
        assignment: assignment_of(lp, &primal),
        slacks: constraint_slacks(lp, &primal),
        duals,
        primal,
        basis: tab.basis,
        iterations,
    })
}

/// Dense Gaussian elimination with partial pivoting on the `m × m` matrix
/// `at(r, c)`; `None` when it is numerically singular.
fn lu_solve<T: Scalar>(m: usize, at: impl Fn(usize, usize) -> T, rhs: &[T]) -> Option<Vec<T>> {
    let mut a: Vec<Vec<T>> = (0..m).map(|r| (0..m).map(|c| at(r, c)).collect()).collect();
    let mut b = rhs.to_vec();
    for col in 0..m {
        let piv = (col..m).max_by(|&i, &j| {
            a[i][col]
                .abs()
                .partial_cmp(&a[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[piv][col].abs() <= T::epsilon() {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..m {
            let f = a[r][col] / a[col][col];
            if f == T::zero() {
                continue;
            }
            for c in col..m {
                let v = a[col][c];
                a[r][c] -= f * v;
            }
            let v = b[col];
            b[r] -= f * v;
        }
    }
    let mut x = vec![T::zero(); m];
    for r in (0..m).rev() {
        let tail: T = (r + 1..m).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - tail) / a[r][r];
    }
    Some(x)
}

fn primal_values<T: Scalar>(tab: &Tableau<T>, n: usize) -> Vec<T> {
    let mut x = vec![T::zero(); n];
    for (r, &b) in tab.basis.iter().enumerate() {
        if b < n {
            // round-off can leave basic values a hair below zero
            x[b] = tab.rhs[r].max(T::zero());
        }
    }
    x
}

fn assignment_of<T: Scalar>(lp: &LinearProgram<T>, x: &[T]) -> Vec<Assignment<T>> {
    lp.var_index
        .iter()
        .zip(x)
        .filter(|(_, &v)| v > T::zero())
        .map(|(k, &v)| Assignment {
            state: k.state,
            sequence: k.sequence.clone(),
            prob: v,
        })
        .collect()
}

fn dot<T: Scalar>(a: &[T], x: &[T]) -> T {
    a.iter().zip(x).map(|(&a, &b)| a * b).sum()
}

fn constraint_slacks<T: Scalar>(lp: &LinearProgram<T>, x: &[T]) -> Vec<T> {
    lp.eq_constraints
        .iter()
        .map(|r| dot(&r.coeffs, x) - r.rhs)
        .chain(lp.ineq_constraints.iter().map(|r| match r.sense {
            Sense::Ge => dot(&r.coeffs, x) - r.rhs,
            Sense::Le => r.rhs - dot(&r.coeffs, x),
        }))
        .collect()
}

fn non_optimal<T: Scalar>(lp: &LinearProgram<T>, tab: &Tableau<T>, status: LpStatus, iterations: usize) -> LpSolution<T> {
    let primal = primal_values(tab, lp.n_vars());
    LpSolution {
        status,
        value: lp.objective_value(&primal),
        assignment: Vec::new(),
        slacks: constraint_slacks(lp, &primal),
        duals: Vec::new(),
        primal,
        basis: tab.basis.clone(),
        iterations,
    }
}

/// Largest violations of the optimality conditions for a solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KktResiduals<T = f64> {
    pub primal_infeasibility: T,
    pub dual_infeasibility: T,
    pub complementary_slackness: T,
    pub duality_gap: T,
}

impl<T: Scalar> KktResiduals<T> {
    pub fn max(&self) -> T {
        self.primal_infeasibility
            .max(self.dual_infeasibility)
            .max(self.complementary_slackness)
            .max(self.duality_gap)
    }
}

/// Checks primal/dual feasibility and complementary slackness of an optimal
/// solution against the LP it came from.
pub fn kkt_residuals<T: Scalar>(lp: &LinearProgram<T>, sol: &LpSolution<T>) -> Result<KktResiduals<T>> {
    if sol.status != LpStatus::Optimal {
        return Err(Error::State(format!("solution status is {:?}", sol.status)));
    }
    let n_eq = lp.eq_constraints.len();
    let x = &sol.primal;
    let y = &sol.duals;
    let mut primal_inf = x.iter().fold(T::zero(), |acc, &v| acc.max(-v));
    for (r, &s) in sol.slacks.iter().enumerate() {
        primal_inf = primal_inf.max(if r < n_eq { s.abs() } else { -s });
    }
    let mut dual_inf = T::zero();
    let mut comp = T::zero();
    for (k, row) in lp.ineq_constraints.iter().enumerate() {
        let yr = y[n_eq + k];
        let wrong_sign = match row.sense {
            Sense::Le => -yr,
            Sense::Ge => yr,
        };
        dual_inf = dual_inf.max(wrong_sign);
        comp = comp.max((yr * sol.slacks[n_eq + k]).abs());
    }
    for j in 0..lp.n_vars() {
        let mut reduced = lp.objective[j];
        for (r, row) in lp.eq_constraints.iter().enumerate() {
            reduced -= y[r] * row.coeffs[j];
        }
        for (k, row) in lp.ineq_constraints.iter().enumerate() {
            reduced -= y[n_eq + k] * row.coeffs[j];
        }
        dual_inf = dual_inf.max(reduced);
        comp = comp.max((reduced * x[j]).abs());
    }
    let dual_obj: T = lp
        .eq_constraints
        .iter()
        .map(|r| r.rhs)
        .chain(lp.ineq_constraints.iter().map(|r| r.rhs))
        .zip(y)
        .map(|(b, &yr)| b * yr)
        .sum();
    Ok(KktResiduals {
        primal_infeasibility: primal_inf,
        dual_infeasibility: dual_inf,
        complementary_slackness: comp,
        duality_gap: (dual_obj - sol.value).abs(),
    })
}

/// Reads an optimal LP solution back as a sequential policy.
pub fn extract_policy<T: Scalar>(sol: &LpSolution<T>, lp: &LinearProgram<T>) -> Result<SequentialPolicy<T>> {
    if sol.status != LpStatus::Optimal {
        return Err(Error::State(format!(
            "cannot extract a policy from a {:?} solution",
            sol.status
        )));
    }
    let mut policy = SequentialPolicy::new(lp.state_labels.clone());
    for a in &sol.assignment {
        policy.add(a.state, a.sequence.clone(), a.prob);
    }
    Ok(policy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::StateParams;
    use crate::fixtures::*;
    use crate::seqpolicy::check_policy;
    use approx::assert_abs_diff_eq;

    #[test]
    fn case1_dimensions_and_coefficients() {
        let lp = build_lp(&case1_env(), &case1_welfare()).unwrap();
        assert_eq!(lp.n_vars(), 32);
        assert_eq!(lp.eq_constraints.len(), 2);
        assert_eq!(lp.ineq_constraints.len(), 6);
        let full_h = lp
            .var_index
            .iter()
            .position(|k| k.state == 1 && k.sequence.agents() == [0, 1, 2])
            .unwrap();
        assert_abs_diff_eq!(lp.objective[full_h], 6.0, epsilon = 1e-12);
    }

    #[test]
    fn single_agent_dimensions() {
        let env = Environment::new(1, vec![StateParams::new("s", 1.0, 2.0, 0.0)], 1.0).unwrap();
        let w = WelfareSpec::power(1, vec![1.0], 1.0).unwrap();
        let lp = build_lp(&env, &w).unwrap();
        assert_eq!((lp.n_vars(), lp.eq_constraints.len(), lp.ineq_constraints.len()), (2, 1, 2));
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_abs_diff_eq!(sol.value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn case1_optimum() {
        let (env, w) = (case1_env(), case1_welfare());
        let lp = build_lp(&env, &w).unwrap();
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_abs_diff_eq!(sol.value, 6.0 + 3.0 * 1.95 / 2.85, epsilon = 1e-9);
        let policy = extract_policy(&sol, &lp).unwrap();
        assert!(check_policy(&policy, &env, 1e-9).unwrap().pass);
        assert_abs_diff_eq!(policy.expected_welfare(&env, &w).unwrap(), sol.value, epsilon = 1e-9);
        assert!(kkt_residuals(&lp, &sol).unwrap().max() <= 1e-7);
    }

    #[test]
    fn zero_welfare_has_zero_value() {
        let env = case1_env();
        let w = WelfareSpec::tabulated(3, vec![vec![0.0; 4], vec![0.0; 4]]).unwrap();
        let sol = solve(&build_lp(&env, &w).unwrap()).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_abs_diff_eq!(sol.value, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn example3_lp_is_zero() {
        // F(1) = -1, F(2) = -1.25, F(3) = -0.75: no invited prefix pays
        let env = example3_env();
        assert_abs_diff_eq!(env.potential(0, 1).unwrap(), -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(env.potential(0, 2).unwrap(), -1.25, epsilon = 1e-12);
        assert_abs_diff_eq!(env.potential(0, 3).unwrap(), -0.75, epsilon = 1e-12);
        let lp = build_lp(&env, &example3_welfare()).unwrap();
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_abs_diff_eq!(sol.value, 0.0, epsilon = 1e-12);
        let policy = extract_policy(&sol, &lp).unwrap();
        assert_abs_diff_eq!(policy.mass(0, &InvitationSequence::empty()), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn infeasible_and_iteration_limit() {
        let mut lp = LinearProgram::new(
            vec!["s".into()],
            vec![VarKey {
                state: 0,
                sequence: InvitationSequence::empty(),
            }],
            vec![1.0],
        )
        .unwrap();
        lp.add_eq("one", vec![1.0], 1.0).unwrap();
        lp.add_ineq("two", vec![1.0], Sense::Ge, 2.0).unwrap();
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
        assert!(extract_policy(&sol, &lp).is_err());

        let big = build_lp(&case1_env(), &case1_welfare()).unwrap();
        let capped = solve_with(
            &big,
            SolveOptions {
                max_iterations: Some(1),
                ..SolveOptions::default()
            },
        )
        .unwrap();
        assert_eq!(capped.status, LpStatus::IterationLimit);
        assert_eq!(capped.basis.len(), big.n_rows());
    }

    #[test]
    fn unbounded_is_an_error() {
        let mut lp = LinearProgram::new(
            vec!["s".into()],
            vec![VarKey {
                state: 0,
                sequence: InvitationSequence::empty(),
            }],
            vec![1.0],
        )
        .unwrap();
        lp.add_ineq("free", vec![1.0], Sense::Ge, 0.0).unwrap();
        assert!(matches!(solve(&lp), Err(Error::Unbounded(_))));
    }

    #[test]
    fn negative_rhs_and_le_rows() {
        // max x + y s.t. x + y <= 4, -x <= -1 (x >= 1), y <= 2
        let keys = (0..2)
            .map(|a| VarKey {
                state: 0,
                sequence: InvitationSequence::from_order(vec![a]),
            })
            .collect();
        let mut lp = LinearProgram::new(vec!["s".into()], keys, vec![1.0, 2.0]).unwrap();
        lp.add_ineq("cap", vec![1.0, 1.0], Sense::Le, 4.0).unwrap();
        lp.add_ineq("xmin", vec![-1.0, 0.0], Sense::Le, -1.0).unwrap();
        lp.add_ineq("ymax", vec![0.0, 1.0], Sense::Le, 2.0).unwrap();
        let sol = solve(&lp).unwrap();
        assert_abs_diff_eq!(sol.value, 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.primal[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.primal[1], 2.0, epsilon = 1e-12);
        assert!(kkt_residuals(&lp, &sol).unwrap().max() <= 1e-9);
    }

    #[test]
    fn guard_rejects_large_populations() {
        let env = case2_env(2.0);
        assert!(matches!(build_lp(&env, &case2_welfare()), Err(Error::Capacity { .. })));
    }

    #[test]
    fn dedup_keeps_optimum() {
        let env = Environment::new(
            2,
            vec![StateParams::new("a", 0.5, 1.0, 0.5), StateParams::new("b", 0.5, 3.0, 0.5)],
            2.0,
        )
        .unwrap();
        let w = WelfareSpec::power(2, vec![1.0, 2.0], 2.0).unwrap();
        let plain = build_lp(&env, &w).unwrap();
        let dedup = build_lp_with(&env, &w, BuildOptions { dedup_rows: true }).unwrap();
        assert!(dedup.ineq_constraints.len() <= plain.ineq_constraints.len());
        assert_abs_diff_eq!(solve(&plain).unwrap().value, solve(&dedup).unwrap().value, epsilon = 1e-12);
    }

    #[test]
    fn lp_dump_lists_every_row() {
        let lp = build_lp(&case1_env(), &case1_welfare()).unwrap();
        let text = lp.to_lp_format();
        assert!(text.starts_with("\\"));
        for name in ["feas_0", "feas_1", "soc_0", "son_2"] {
            assert!(text.contains(&format!(" {name}:")), "{name} missing");
        }
        assert!(text.contains("x_1_0_1_2"));
        assert!(text.contains(" x_0_e >= 0"));
        assert!(text.trim_end().ends_with("End"));
    }

    #[test]
    fn solves_are_bitwise_deterministic() {
        let lp = build_lp(&case1_env(), &case1_welfare()).unwrap();
        let a = solve(&lp).unwrap();
        let b = solve(&lp).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a, b);
    }
}
