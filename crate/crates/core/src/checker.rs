//! Model checking of instantiated models.
//!
//! Reachability uses interval iteration: a lower bound starting at 0 and an
//! upper bound starting at 1 are refined by Gauss–Seidel sweeps until they are
//! within [`EPS_VI`]. For maximal probabilities the maximal end components of
//! the undecided states are collapsed first, which is what makes the upper
//! bound converge. Expected costs use optimistic value iteration: once the
//! lower bound stalls, a guessed upper bound is verified with one Bellman step.
//! A value whose bounds straddle the threshold is settled by solving the
//! linear system of the induced Markov chain.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph;
use crate::linsolve::{self, Singular};
use crate::model::{
    ConcreteModel, Direction, InstantiateOptions, ModelError, ParametricModel, PolicyObjective,
    SpecKind, Specification, Topology, Valuation,
};

/// Absolute gap between the bounds at which value iteration stops (relative
/// for expected costs larger than 1).
pub const EPS_VI: f64 = 1e-8;
const MAX_SWEEPS: usize = 10_000_000;
const MAX_POLICY_ROUNDS: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CheckError {
    #[error("the target set is empty")]
    EmptyTarget,
    #[error("expected cost is not well defined: {0}")]
    ExpectedCostIllDefined(String),
    #[error("the model has no costs")]
    MissingCosts,
    #[error("value iteration did not converge within {0} sweeps")]
    NotConverged(usize),
    #[error("the scenario LP is only defined for upper bounds on probabilities")]
    UnsupportedLp,
    #[error("LP solver failed: {0}")]
    Lp(String),
    #[error(transparent)]
    Singular(#[from] Singular),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Update plan for the undecided states of one objective.
#[derive(Debug, Clone)]
struct Plan {
    /// Representative whose value a state shares (itself outside end components).
    rep: Vec<usize>,
    /// Initial lower/upper bound; equal for decided states.
    lower0: Vec<f64>,
    upper0: Vec<f64>,
    order: Vec<usize>,
    /// `choices[start[k]..start[k+1]]` are the choices optimized over for `order[k]`.
    start: Vec<usize>,
    choices: Vec<usize>,
    mecs: Vec<graph::Mec>,
    mec_of: Vec<usize>,
}

/// Qualitative information about a model, valid for every graph-preserving
/// instantiation.
#[derive(Debug, Clone)]
pub struct GraphAnalysis {
    pub target: Vec<bool>,
    /// States with no path to the target.
    pub cannot_reach_target: Vec<bool>,
    /// States where some policy avoids the target surely.
    pub prob0e: Vec<bool>,
    pub goal: Option<Vec<bool>>,
    /// States from which every policy reaches the goal almost surely.
    pub goal_almost_sure_all: Option<Vec<bool>>,
    /// States from which some policy reaches the goal almost surely.
    pub goal_almost_sure_some: Option<Vec<bool>>,
    min_plan: Plan,
    max_plan: Plan,
}

/// Sweep order: strongly connected components in reverse topological order,
/// breadth-first distance from `from` inside each.
fn bfs_order(t: &Topology, from: &[bool], members: &[bool]) -> Vec<usize> {
    let pred = t.predecessors(|_| true);
    let mut seen = from.to_vec();
    let mut queue: std::collections::VecDeque<usize> =
        (0..t.num_states).filter(|&s| from[s]).collect();
    let mut order = Vec::new();
    while let Some(s) = queue.pop_front() {
        if members[s] {
            order.push(s);
        }
        for &p in &pred[s] {
            if !seen[p] {
                seen[p] = true;
                queue.push_back(p);
            }
        }
    }
    // members the search did not reach (they cannot reach `from`) go last
    for s in 0..t.num_states {
        if members[s] && !seen[s] {
            order.push(s);
        }
    }
    // successor components first; on acyclic parts one sweep is exact
    let edge_start: Vec<usize> = t.state_start.iter().map(|&c| t.choice_start[c]).collect();
    let scc = graph::sccs(t.num_states, &edge_start, &t.edge_succ);
    order.sort_by_key(|&s| scc[s]);
    order
}

impl GraphAnalysis {
    /// Analyses the digraph of `t` for target set `target` and optional goal.
    pub fn new(t: &Topology, target: &[usize], goal: Option<&[usize]>) -> Result<Self, CheckError> {
        if target.is_empty() {
            return Err(CheckError::EmptyTarget);
        }
        let n = t.num_states;
        let mut tmask = vec![false; n];
        for &s in target {
            tmask[s] = true;
        }
        let reach = graph::can_reach(t, &tmask);
        let cannot: Vec<bool> = reach.iter().map(|r| !r).collect();
        let prob0e = graph::prob0e(t, &tmask);

        let min_maybe: Vec<bool> = (0..n).map(|s| !tmask[s] && !prob0e[s]).collect();
        let min_plan = {
            let order = bfs_order(t, &tmask, &min_maybe);
            let mut start = vec![0];
            let mut choices = Vec::new();
            for &s in &order {
                choices.extend(t.choices(s));
                start.push(choices.len());
            }
            let lower0 = (0..n).map(|s| if tmask[s] { 1.0 } else { 0.0 }).collect();
            let upper0 = (0..n)
                .map(|s| if tmask[s] || min_maybe[s] { 1.0 } else { 0.0 })
                .collect();
            Plan {
                rep: (0..n).collect(),
                lower0,
                upper0,
                order,
                start,
                choices,
                mecs: Vec::new(),
                mec_of: vec![usize::MAX; n],
            }
        };

        let max_maybe: Vec<bool> = (0..n).map(|s| !tmask[s] && reach[s]).collect();
        let max_plan = {
            let mecs = graph::mecs(t, &max_maybe, |_| true);
            let mut rep: Vec<usize> = (0..n).collect();
            let mut mec_of = vec![usize::MAX; n];
            let mut internal = vec![false; t.num_choices()];
            for (i, m) in mecs.iter().enumerate() {
                for &s in &m.states {
                    rep[s] = m.states[0];
                    mec_of[s] = i;
                }
                for &c in &m.choices {
                    internal[c] = true;
                }
            }
            let order: Vec<usize> = bfs_order(t, &tmask, &max_maybe)
                .into_iter()
                .filter(|&s| rep[s] == s)
                .collect();
            let mut start = vec![0];
            let mut choices = Vec::new();
            for &s in &order {
                match mec_of[s] {
                    usize::MAX => choices.extend(t.choices(s)),
                    i => {
                        for &m in &mecs[i].states {
                            choices.extend(t.choices(m).filter(|&c| !internal[c]));
                        }
                    }
                }
                start.push(choices.len());
            }
            let lower0 = (0..n).map(|s| if tmask[s] { 1.0 } else { 0.0 }).collect();
            let upper0 = (0..n)
                .map(|s| if tmask[s] || max_maybe[s] { 1.0 } else { 0.0 })
                .collect();
            Plan {
                rep,
                lower0,
                upper0,
                order,
                start,
                choices,
                mecs,
                mec_of,
            }
        };

        let (goal_mask, all, some) = match goal {
            None => (None, None, None),
            Some(g) => {
                let mut gmask = vec![false; n];
                for &s in g {
                    gmask[s] = true;
                }
                let all = graph::prob1a(t, &gmask);
                let some = graph::prob1e(t, &gmask);
                (Some(gmask), Some(all), Some(some))
            }
        };
        Ok(GraphAnalysis {
            target: tmask,
            cannot_reach_target: cannot,
            prob0e,
            goal: goal_mask,
            goal_almost_sure_all: all,
            goal_almost_sure_some: some,
            min_plan,
            max_plan,
        })
    }

    /// Checks that expected costs from `init` are well defined. Maximal costs
    /// need every policy to reach the goal almost surely; minimal costs need
    /// one such policy (policies that never reach the goal are then excluded,
    /// and end components outside the goal must carry positive cost, which is
    /// checked per instantiation).
    pub fn check_cost_well_defined(
        &self,
        init: usize,
        objective: PolicyObjective,
    ) -> Result<(), CheckError> {
        let (all, some) = match (&self.goal_almost_sure_all, &self.goal_almost_sure_some) {
            (Some(a), Some(s)) => (a, s),
            _ => return Err(CheckError::ExpectedCostIllDefined("no goal set".into())),
        };
        match objective {
            PolicyObjective::Max if !all[init] => Err(CheckError::ExpectedCostIllDefined(
                "some policy avoids the goal with positive probability".into(),
            )),
            PolicyObjective::Min if !some[init] => Err(CheckError::ExpectedCostIllDefined(
                "no policy reaches the goal almost surely".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Qualitative preprocessing of a parametric model for target `target` and,
/// for expected-cost properties, goal `goal` under `objective`.
pub fn graph_preprocess(
    m: &ParametricModel,
    target: &[usize],
    goal: Option<&[usize]>,
    objective: PolicyObjective,
) -> Result<GraphAnalysis, CheckError> {
    let t = m.topology()?;
    let a = GraphAnalysis::new(t, target, goal)?;
    if goal.is_some() {
        let objective = if m.is_mc() {
            PolicyObjective::Max
        } else {
            objective
        };
        a.check_cost_well_defined(m.initial(), objective)?;
    }
    Ok(a)
}

/// Values per state together with the bounds they come from.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueResult {
    pub values: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Chosen choice (global index) per state.
    pub policy: Vec<usize>,
    pub sweeps: usize,
}

fn better(objective: PolicyObjective, a: f64, b: f64) -> bool {
    match objective {
        PolicyObjective::Min => a < b,
        PolicyObjective::Max => a > b,
    }
}

fn worst(objective: PolicyObjective) -> f64 {
    match objective {
        PolicyObjective::Min => f64::INFINITY,
        PolicyObjective::Max => f64::NEG_INFINITY,
    }
}

#[inline]
fn choice_value(c: &ConcreteModel, rep: &[usize], x: &[f64], choice: usize) -> f64 {
    let t = c.topology();
    let probs = c.probs();
    let mut acc = 0.0;
    for e in t.edges(choice) {
        acc += probs[e] * x[rep[t.edge_succ[e]]];
    }
    acc
}

/// Reachability probabilities of `analysis.target` under the optimal policy.
pub fn reachability_value(
    c: &ConcreteModel,
    analysis: &GraphAnalysis,
    objective: PolicyObjective,
) -> Result<ValueResult, CheckError> {
    let plan = match objective {
        PolicyObjective::Min => &analysis.min_plan,
        PolicyObjective::Max => &analysis.max_plan,
    };
    let mut lo = plan.lower0.clone();
    let mut hi = plan.upper0.clone();
    let mut sweeps = 0;
    let mut converged = plan.order.is_empty();
    while !converged {
        sweeps += 1;
        if sweeps > MAX_SWEEPS {
            return Err(CheckError::NotConverged(MAX_SWEEPS));
        }
        let mut gap: f64 = 0.0;
        for (k, &s) in plan.order.iter().enumerate() {
            let (mut bl, mut bh) = (worst(objective), worst(objective));
            for &ch in &plan.choices[plan.start[k]..plan.start[k + 1]] {
                let l = choice_value(c, &plan.rep, &lo, ch);
                let h = choice_value(c, &plan.rep, &hi, ch);
                if better(objective, l, bl) {
                    bl = l;
                }
                if better(objective, h, bh) {
                    bh = h;
                }
            }
            // rounding must never push the bounds past each other
            lo[s] = bl.max(lo[s]).min(1.0);
            hi[s] = bh.min(hi[s]).max(lo[s]);
            gap = gap.max(hi[s] - lo[s]);
        }
        converged = gap < EPS_VI;
    }
    for s in 0..lo.len() {
        let r = plan.rep[s];
        lo[s] = lo[r];
        hi[s] = hi[r];
    }
    let values: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| 0.5 * (l + h)).collect();
    let policy = reach_policy(c, analysis, plan, objective, &values);
    Ok(ValueResult {
        values,
        lower: lo,
        upper: hi,
        policy,
        sweeps,
    })
}

fn reach_policy(
    c: &ConcreteModel,
    analysis: &GraphAnalysis,
    plan: &Plan,
    objective: PolicyObjective,
    values: &[f64],
) -> Vec<usize> {
    let t = c.topology();
    let n = t.num_states;
    let identity: Vec<usize> = (0..n).collect();
    let greedy = |choices: &mut dyn Iterator<Item = usize>| -> usize {
        let mut best = usize::MAX;
        let mut best_v = worst(objective);
        for ch in choices {
            let v = choice_value(c, &identity, values, ch);
            if best == usize::MAX
                || better(
                    objective,
                    v,
                    best_v
                        + if objective == PolicyObjective::Min {
                            -1e-12
                        } else {
                            1e-12
                        },
                )
            {
                best = ch;
                best_v = v;
            }
        }
        best
    };
    let mut policy: Vec<usize> = (0..n).map(|s| t.choices(s).start).collect();
    let choice_state = t.choice_state();
    match objective {
        PolicyObjective::Min => {
            for s in 0..n {
                if analysis.prob0e[s] {
                    // stay among states that avoid the target surely
                    if let Some(ch) = t
                        .choices(s)
                        .find(|&ch| t.edges(ch).all(|e| analysis.prob0e[t.edge_succ[e]]))
                    {
                        policy[s] = ch;
                    }
                } else if !analysis.target[s] {
                    policy[s] = greedy(&mut t.choices(s));
                }
            }
        }
        PolicyObjective::Max => {
            for (k, &s) in plan.order.iter().enumerate() {
                let best = greedy(
                    &mut plan.choices[plan.start[k]..plan.start[k + 1]]
                        .iter()
                        .copied(),
                );
                match plan.mec_of[s] {
                    usize::MAX => policy[s] = best,
                    i => {
                        // walk inside the end component towards the state owning the exit
                        let mec = &plan.mecs[i];
                        let exit_state = choice_state[best];
                        policy[exit_state] = best;
                        let mut done = vec![false; n];
                        done[exit_state] = true;
                        loop {
                            let next: Vec<(usize, usize)> = mec
                                .states
                                .iter()
                                .filter(|&&m| !done[m])
                                .filter_map(|&m| {
                                    t.choices(m)
                                        .find(|&ch| {
                                            mec.choices.binary_search(&ch).is_ok()
                                                && t.edges(ch).any(|e| done[t.edge_succ[e]])
                                        })
                                        .map(|ch| (m, ch))
                                })
                                .collect();
                            if next.is_empty() {
                                break;
                            }
                            for (m, ch) in next {
                                policy[m] = ch;
                                done[m] = true;
                            }
                        }
                    }
                }
            }
        }
    }
    policy
}

/// Solves the Markov chain induced by `policy` for reachability of the target.
pub fn reachability_linear_solve(
    c: &ConcreteModel,
    analysis: &GraphAnalysis,
    policy: &[usize],
    objective: PolicyObjective,
) -> Result<Vec<f64>, CheckError> {
    let t = c.topology();
    let n = t.num_states;
    let zero: &[bool] = match objective {
        PolicyObjective::Min => &analysis.prob0e,
        PolicyObjective::Max => &analysis.cannot_reach_target,
    };
    let unknown: Vec<usize> = (0..n)
        .filter(|&s| !analysis.target[s] && !zero[s])
        .collect();
    let mut idx = vec![usize::MAX; n];
    for (i, &s) in unknown.iter().enumerate() {
        idx[s] = i;
    }
    let mut trip = Vec::new();
    let mut b = vec![0.0; unknown.len()];
    for (i, &s) in unknown.iter().enumerate() {
        trip.push((i, i, 1.0));
        for e in t.edges(policy[s]) {
            let succ = t.edge_succ[e];
            let p = c.probs()[e];
            if analysis.target[succ] {
                b[i] += p;
            } else if idx[succ] != usize::MAX {
                trip.push((i, idx[succ], -p));
            }
        }
    }
    let x = linsolve::solve(unknown.len(), &trip, &b)?;
    let mut out: Vec<f64> = (0..n)
        .map(|s| if analysis.target[s] { 1.0 } else { 0.0 })
        .collect();
    for (i, &s) in unknown.iter().enumerate() {
        out[s] = x[i].clamp(0.0, 1.0);
    }
    Ok(out)
}

/// Expected cost to reach the goal, with cost 0 on the goal.
pub fn expected_cost_value(
    c: &ConcreteModel,
    analysis: &GraphAnalysis,
    objective: PolicyObjective,
) -> Result<ValueResult, CheckError> {
    let costs = c.costs().ok_or(CheckError::MissingCosts)?;
    let t = c.topology();
    let n = t.num_states;
    let goal = analysis
        .goal
        .as_ref()
        .ok_or_else(|| CheckError::ExpectedCostIllDefined("no goal set".into()))?;
    let objective = if c.is_mc() {
        PolicyObjective::Max
    } else {
        objective
    };
    let finite = match objective {
        PolicyObjective::Max => analysis.goal_almost_sure_all.as_ref().unwrap(),
        PolicyObjective::Min => analysis.goal_almost_sure_some.as_ref().unwrap(),
    };
    let allowed = |ch: usize| t.edges(ch).all(|e| finite[t.edge_succ[e]]);
    if objective == PolicyObjective::Min {
        let region: Vec<bool> = (0..n).map(|s| finite[s] && !goal[s]).collect();
        if let Some(ec) = graph::mecs(t, &region, |ch| allowed(ch) && costs[ch] == 0.0).first() {
            return Err(CheckError::ExpectedCostIllDefined(format!(
                "the states {:?} can cycle forever at zero cost without reaching the goal",
                ec.states
            )));
        }
    }
    let members: Vec<bool> = (0..n).map(|s| finite[s] && !goal[s]).collect();
    let order = bfs_order(t, goal, &members);
    let choices: Vec<Vec<usize>> = order
        .iter()
        .map(|&s| t.choices(s).filter(|&ch| allowed(ch)).collect())
        .collect();
    let identity: Vec<usize> = (0..n).collect();
    let init_value = |s: usize| {
        if goal[s] || finite[s] {
            0.0
        } else {
            f64::INFINITY
        }
    };
    let mut lo: Vec<f64> = (0..n).map(init_value).collect();
    let bellman = |x: &[f64], k: usize| -> (f64, usize) {
        let mut best = worst(objective);
        let mut arg = usize::MAX;
        for &ch in &choices[k] {
            let v = costs[ch] + choice_value(c, &identity, x, ch);
            if arg == usize::MAX || better(objective, v, best) {
                best = v;
                arg = ch;
            }
        }
        (best, arg)
    };

    let mut sweeps = 0;
    let mut precision = 1e-6;
    let mut hi: Vec<f64>;
    let mut delta = vec![0.0; n];
    let mut prev_change = f64::INFINITY;
    'outer: loop {
        // lower bound until it stalls at the current precision
        let mut rho;
        loop {
            sweeps += 1;
            if sweeps > MAX_SWEEPS {
                return Err(CheckError::NotConverged(MAX_SWEEPS));
            }
            let mut change: f64 = 0.0;
            for k in 0..order.len() {
                let s = order[k];
                let (v, _) = bellman(&lo, k);
                let v = v.max(lo[s]);
                delta[s] = v - lo[s];
                change = change.max((v - lo[s]) / v.max(1.0));
                lo[s] = v;
            }
            rho = if prev_change > 0.0 {
                (change / prev_change).min(0.999_999)
            } else {
                0.0
            };
            prev_change = change;
            if change < precision {
                break;
            }
        }
        // guess an upper bound from the observed contraction and verify it
        // with one Bellman step; a single relative margin keeps neighbours
        // consistent, and widening it is cheaper than more lower sweeps
        let factor = 2.0 * rho / (1.0 - rho);
        let margin = order
            .iter()
            .map(|&s| factor * delta[s] / lo[s].max(1.0))
            .fold(precision, f64::max);
        hi = lo.clone();
        let mut verified = false;
        for widen in [1.0, 10.0, 100.0, 1000.0] {
            for &s in &order {
                hi[s] = lo[s] + widen * margin * lo[s].max(1.0);
            }
            sweeps += 1;
            if (0..order.len()).all(|k| bellman(&hi, k).0 <= hi[order[k]]) {
                verified = true;
                break;
            }
        }
        if verified {
            loop {
                let mut gap: f64 = 0.0;
                for k in 0..order.len() {
                    let s = order[k];
                    let l = bellman(&lo, k).0.max(lo[s]);
                    let h = bellman(&hi, k).0.min(hi[s]).max(l);
                    lo[s] = l;
                    hi[s] = h;
                    gap = gap.max((h - l) / l.max(1.0));
                }
                sweeps += 1;
                if gap < EPS_VI {
                    break 'outer;
                }
                if sweeps > MAX_SWEEPS {
                    return Err(CheckError::NotConverged(MAX_SWEEPS));
                }
            }
        }
        precision *= 0.01;
        if precision < 1e-9 {
            // a uniform margin cannot be certified where no choice leaks to
            // the goal directly, so solve exactly instead
            let (values, rounds) =
                cost_policy_iteration(c, costs, goal, &order, &choices, objective)?;
            sweeps += rounds;
            lo = values.clone();
            hi = values;
            break;
        }
    }
    let values: Vec<f64> = lo
        .iter()
        .zip(&hi)
        .map(|(l, h)| if l.is_infinite() { *l } else { 0.5 * (l + h) })
        .collect();
    let mut policy: Vec<usize> = (0..n).map(|s| t.choices(s).start).collect();
    for k in 0..order.len() {
        // lowest index among choices within tolerance of the optimum
        let target_v = bellman(&values, k).0;
        let tol = 1e-12 * target_v.abs().max(1.0);
        policy[order[k]] = choices[k]
            .iter()
            .copied()
            .find(|&ch| {
                (costs[ch] + choice_value(c, &identity, &values, ch) - target_v).abs() <= tol
            })
            .unwrap_or(choices[k][0]);
    }
    Ok(ValueResult {
        values,
        lower: lo,
        upper: hi,
        policy,
        sweeps,
    })
}

/// Exact optimal expected costs by policy iteration over the states in
/// `order`, whose allowed choices are `choices`. Returns the values and the
/// number of policy evaluations.
fn cost_policy_iteration(
    c: &ConcreteModel,
    costs: &[f64],
    goal: &[bool],
    order: &[usize],
    choices: &[Vec<usize>],
    objective: PolicyObjective,
) -> Result<(Vec<f64>, usize), CheckError> {
    let t = c.topology();
    let n = t.num_states;
    let mut idx = vec![usize::MAX; n];
    for (i, &s) in order.iter().enumerate() {
        idx[s] = i;
    }
    // start from a policy that reaches the goal almost surely: each state
    // takes a choice with an edge one layer closer to the goal
    let mut layered = goal.to_vec();
    let mut pol = vec![usize::MAX; order.len()];
    let mut pending: Vec<usize> = (0..order.len()).collect();
    while !pending.is_empty() {
        let mut next_layer = Vec::new();
        pending.retain(|&k| {
            match choices[k]
                .iter()
                .copied()
                .find(|&ch| t.edges(ch).any(|e| layered[t.edge_succ[e]]))
            {
                Some(ch) => {
                    pol[k] = ch;
                    next_layer.push(order[k]);
                    false
                }
                None => true,
            }
        });
        if next_layer.is_empty() {
            return Err(CheckError::ExpectedCostIllDefined(
                "no policy reaches the goal almost surely".into(),
            ));
        }
        for s in next_layer {
            layered[s] = true;
        }
    }
    let identity: Vec<usize> = (0..n).collect();
    for round in 1..=MAX_POLICY_ROUNDS {
        let mut trip = Vec::new();
        let mut b = vec![0.0; order.len()];
        for (k, &ch) in pol.iter().enumerate() {
            trip.push((k, k, 1.0));
            b[k] = costs[ch];
            for e in t.edges(ch) {
                let j = idx[t.edge_succ[e]];
                if j != usize::MAX {
                    trip.push((k, j, -c.probs()[e]));
                }
            }
        }
        let x = linsolve::solve(order.len(), &trip, &b)?;
        let mut values: Vec<f64> = (0..n)
            .map(|s| if goal[s] { 0.0 } else { f64::INFINITY })
            .collect();
        for (k, &s) in order.iter().enumerate() {
            values[s] = x[k].max(0.0);
        }
        let mut changed = false;
        for k in 0..order.len() {
            let current = costs[pol[k]] + choice_value(c, &identity, &values, pol[k]);
            let tol = 1e-12 * current.abs().max(1.0);
            for &ch in &choices[k] {
                let v = costs[ch] + choice_value(c, &identity, &values, ch);
                if better(objective, v, current) && (v - current).abs() > tol {
                    pol[k] = ch;
                    changed = true;
                    break;
                }
            }
        }
        if !changed {
            return Ok((values, round));
        }
    }
    Err(CheckError::NotConverged(MAX_POLICY_ROUNDS))
}

/// Solves the Markov chain induced by `policy` for expected costs.
pub fn cost_linear_solve(
    c: &ConcreteModel,
    analysis: &GraphAnalysis,
    policy: &[usize],
    objective: PolicyObjective,
) -> Result<Vec<f64>, CheckError> {
    let costs = c.costs().ok_or(CheckError::MissingCosts)?;
    let t = c.topology();
    let n = t.num_states;
    let goal = analysis
        .goal
        .as_ref()
        .ok_or_else(|| CheckError::ExpectedCostIllDefined("no goal set".into()))?;
    let objective = if c.is_mc() {
        PolicyObjective::Max
    } else {
        objective
    };
    let finite = match objective {
        PolicyObjective::Max => analysis.goal_almost_sure_all.as_ref().unwrap(),
        PolicyObjective::Min => analysis.goal_almost_sure_some.as_ref().unwrap(),
    };
    let unknown: Vec<usize> = (0..n).filter(|&s| finite[s] && !goal[s]).collect();
    let mut idx = vec![usize::MAX; n];
    for (i, &s) in unknown.iter().enumerate() {
        idx[s] = i;
    }
    let mut trip = Vec::new();
    let mut b = vec![0.0; unknown.len()];
    for (i, &s) in unknown.iter().enumerate() {
        trip.push((i, i, 1.0));
        b[i] = costs[policy[s]];
        for e in t.edges(policy[s]) {
            let succ = t.edge_succ[e];
            if idx[succ] != usize::MAX {
                trip.push((i, idx[succ], -c.probs()[e]));
            }
        }
    }
    let x = linsolve::solve(unknown.len(), &trip, &b)?;
    let mut out: Vec<f64> = (0..n)
        .map(|s| {
            if goal[s] || finite[s] {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .collect();
    for (i, &s) in unknown.iter().enumerate() {
        out[s] = x[i].max(0.0);
    }
    Ok(out)
}

/// Outcome of checking one instantiation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleVerdict {
    pub index: usize,
    pub value_at_init: f64,
    pub satisfied: bool,
    /// Action name per state for MDPs, when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy: Option<Vec<String>>,
    /// The bounds straddled the threshold and a linear solve decided.
    pub resolved_exactly: bool,
    #[serde(skip)]
    pub wall_time_ms: f64,
}

/// A specification bound to a model, with the qualitative analysis cached.
#[derive(Debug, Clone)]
pub struct Checker<'m> {
    model: &'m ParametricModel,
    spec: Specification,
    analysis: GraphAnalysis,
    keep_policy: bool,
}

impl<'m> Checker<'m> {
    pub fn new(model: &'m ParametricModel, spec: Specification) -> Result<Self, CheckError> {
        let (target, goal) = Self::target_and_goal(model, &spec)?;
        let analysis = graph_preprocess(model, target, goal, spec.objective)?;
        Ok(Checker {
            model,
            spec,
            analysis,
            keep_policy: false,
        })
    }

    fn target_and_goal<'a>(
        model: &'a ParametricModel,
        spec: &Specification,
    ) -> Result<(&'a [usize], Option<&'a [usize]>), CheckError> {
        match spec.kind {
            SpecKind::Reachability => Ok((model.target(), None)),
            SpecKind::ExpectedCost => {
                if !model.has_costs() {
                    return Err(CheckError::MissingCosts);
                }
                let g = model.goal().unwrap_or(model.target());
                Ok((g, Some(g)))
            }
        }
    }

    /// Also report the optimal policy of every sample.
    pub fn with_policies(mut self, keep: bool) -> Self {
        self.keep_policy = keep;
        self
    }

    pub fn model(&self) -> &'m ParametricModel {
        self.model
    }

    pub fn spec(&self) -> &Specification {
        &self.spec
    }

    pub fn analysis(&self) -> &GraphAnalysis {
        &self.analysis
    }

    pub fn instantiate(&self, u: &Valuation) -> Result<ConcreteModel, CheckError> {
        let opts = InstantiateOptions {
            transitions_only: self.spec.kind == SpecKind::Reachability,
            ..Default::default()
        };
        Ok(self.model.instantiate_with(u, opts)?)
    }

    /// Values of every state of an instantiation.
    pub fn values(&self, c: &ConcreteModel) -> Result<ValueResult, CheckError> {
        match self.spec.kind {
            SpecKind::Reachability => reachability_value(c, &self.analysis, self.spec.objective),
            SpecKind::ExpectedCost => expected_cost_value(c, &self.analysis, self.spec.objective),
        }
    }

    /// Checks the specification on the instantiation `u`.
    pub fn check(&self, index: usize, u: &Valuation) -> Result<SampleVerdict, CheckError> {
        let start = Instant::now();
        let c = self.instantiate(u)?;
        let mut v = self.check_concrete(index, &c)?;
        v.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
        Ok(v)
    }

    /// Like [`Checker::check`], but also accepts valuations that zero some
    /// edges; the graph analyses then run on the instantiation's own digraph.
    pub fn check_any(&self, index: usize, u: &Valuation) -> Result<SampleVerdict, CheckError> {
        match self.check(index, u) {
            Err(CheckError::Model(ModelError::NotGraphPreserving { .. })) => {}
            r => return r,
        }
        let start = Instant::now();
        let opts = InstantiateOptions {
            allow_zero_edges: true,
            transitions_only: self.spec.kind == SpecKind::Reachability,
        };
        let c = self.model.instantiate_with(u, opts)?.pruned();
        let (target, goal) = Self::target_and_goal(self.model, &self.spec)?;
        let analysis = GraphAnalysis::new(c.topology(), target, goal)?;
        if goal.is_some() {
            let objective = if c.is_mc() {
                PolicyObjective::Max
            } else {
                self.spec.objective
            };
            analysis.check_cost_well_defined(c.initial(), objective)?;
        }
        let mut v = self.verdict(index, &c, &analysis)?;
        v.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
        Ok(v)
    }

    pub fn check_concrete(
        &self,
        index: usize,
        c: &ConcreteModel,
    ) -> Result<SampleVerdict, CheckError> {
        self.verdict(index, c, &self.analysis)
    }

    fn verdict(
        &self,
        index: usize,
        c: &ConcreteModel,
        analysis: &GraphAnalysis,
    ) -> Result<SampleVerdict, CheckError> {
        let start = Instant::now();
        let r = match self.spec.kind {
            SpecKind::Reachability => reachability_value(c, analysis, self.spec.objective)?,
            SpecKind::ExpectedCost => expected_cost_value(c, analysis, self.spec.objective)?,
        };
        let init = c.initial();
        let (lo, hi) = (r.lower[init], r.upper[init]);
        let lambda = self.spec.threshold;
        let mut value = r.values[init];
        let mut exact = false;
        let decided = match self.spec.direction {
            Direction::AtMost => hi <= lambda || lo > lambda,
            Direction::AtLeast => lo >= lambda || hi < lambda,
        };
        if !decided {
            let solved = match self.spec.kind {
                SpecKind::Reachability => {
                    reachability_linear_solve(c, analysis, &r.policy, self.spec.objective)?
                }
                SpecKind::ExpectedCost => {
                    cost_linear_solve(c, analysis, &r.policy, self.spec.objective)?
                }
            };
            value = solved[init];
            exact = true;
        }
        let policy = (self.keep_policy && !c.is_mc()).then(|| {
            r.policy
                .iter()
                .map(|&ch| self.model.actions()[c.topology().choice_action[ch]].clone())
                .collect()
        });
        Ok(SampleVerdict {
            index,
            value_at_init: value,
            satisfied: self.spec.holds_for(value),
            policy,
            resolved_exactly: exact,
            wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        })
    }

    /// Checks every valuation in parallel; the result is ordered by index.
    pub fn check_all(&self, samples: &[Valuation]) -> Result<Vec<SampleVerdict>, CheckError> {
        samples
            .par_iter()
            .enumerate()
            .map(|(i, u)| self.check(i, u))
            .collect()
    }
}

/// Convenience wrapper: instantiate, preprocess and check in one call.
pub fn check_sample(
    m: &ParametricModel,
    u: &Valuation,
    spec: Specification,
) -> Result<SampleVerdict, CheckError> {
    Checker::new(m, spec)?.check(0, u)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioLpResult {
    pub feasible: bool,
    pub tau: f64,
    /// No samples: τ = 0 and feasibility holds vacuously.
    pub degenerate: bool,
    pub values: Vec<f64>,
}

/// The scenario program over a set of samples. The only variables shared
/// between samples are τ and the threshold, so the joint LP splits into one
/// model-checking problem per sample and τ is the worst value at the initial
/// state (the maximum for upper bounds, the minimum for lower bounds).
pub fn scenario_lp_reach(
    checker: &Checker,
    samples: &[Valuation],
) -> Result<ScenarioLpResult, CheckError> {
    if samples.is_empty() {
        return Ok(ScenarioLpResult {
            feasible: true,
            tau: 0.0,
            degenerate: true,
            values: Vec::new(),
        });
    }
    let verdicts = checker.check_all(samples)?;
    let values: Vec<f64> = verdicts.iter().map(|v| v.value_at_init).collect();
    let spec = checker.spec();
    let tau = match spec.direction {
        Direction::AtMost => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        Direction::AtLeast => values.iter().copied().fold(f64::INFINITY, f64::min),
    };
    Ok(ScenarioLpResult {
        feasible: spec.holds_for(tau),
        tau,
        degenerate: false,
        values,
    })
}

/// The same program assembled as one LP over all samples and solved directly.
/// Meant for cross-checking on small instances.
pub fn scenario_lp_reach_monolithic(
    checker: &Checker,
    samples: &[Valuation],
) -> Result<f64, CheckError> {
    use microlp::{ComparisonOp, OptimizationDirection, Problem};
    let spec = checker.spec();
    if spec.kind != SpecKind::Reachability || spec.direction != Direction::AtMost {
        return Err(CheckError::UnsupportedLp);
    }
    let a = checker.analysis();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let tau = lp.add_var(1.0, (0.0, 1.0));
    for u in samples {
        let c = checker.instantiate(u)?;
        let t = c.topology();
        let n = t.num_states;
        let init = t.initial;
        let mc = c.is_mc();
        if spec.objective == PolicyObjective::Min && !mc {
            // occupation measures: min reachability is the least expected number
            // of target hits over the flows a policy can induce
            if a.target[init] || a.prob0e[init] {
                let v = if a.target[init] { 1.0 } else { 0.0 };
                lp.add_constraint([(tau, 1.0)], ComparisonOp::Ge, v);
                continue;
            }
            let maybe: Vec<bool> = (0..n).map(|s| !a.target[s] && !a.prob0e[s]).collect();
            let mut x = vec![None; t.num_choices()];
            for s in (0..n).filter(|&s| maybe[s]) {
                for ch in t.choices(s) {
                    x[ch] = Some(lp.add_var(0.0, (0.0, f64::INFINITY)));
                }
            }
            let mut inflow: Vec<Vec<(microlp::Variable, f64)>> = vec![Vec::new(); n];
            let mut reach = crate::lp::RowBuilder::default();
            for s in (0..n).filter(|&s| maybe[s]) {
                for ch in t.choices(s) {
                    let var = x[ch].unwrap();
                    let mut to_target = 0.0;
                    for e in t.edges(ch) {
                        let succ = t.edge_succ[e];
                        if maybe[succ] {
                            inflow[succ].push((var, c.probs()[e]));
                        } else if a.target[succ] {
                            to_target += c.probs()[e];
                        }
                    }
                    if to_target > 0.0 {
                        reach.add(var, to_target);
                    }
                }
            }
            for s in (0..n).filter(|&s| maybe[s]) {
                let mut row = crate::lp::RowBuilder::default();
                for ch in t.choices(s) {
                    row.add(x[ch].unwrap(), 1.0);
                }
                for &(var, p) in &inflow[s] {
                    row.add(var, -p);
                }
                lp.add_constraint(
                    row.finish(),
                    ComparisonOp::Eq,
                    if s == init { 1.0 } else { 0.0 },
                );
            }
            reach.add(tau, -1.0);
            lp.add_constraint(reach.finish(), ComparisonOp::Le, 0.0);
        } else {
            // p_s = 1 on the target, 0 where it is unreachable, and
            // p_s (=|>=) sum_s' P(s, a, s') p_s' elsewhere
            let fixed = |s: usize| {
                if a.target[s] {
                    Some(1.0)
                } else if a.cannot_reach_target[s] {
                    Some(0.0)
                } else {
                    None
                }
            };
            let mut p = vec![None; n];
            for s in 0..n {
                if fixed(s).is_none() {
                    p[s] = Some(lp.add_var(0.0, (0.0, 1.0)));
                }
            }
            for s in 0..n {
                let Some(ps) = p[s] else { continue };
                for ch in t.choices(s) {
                    let mut row = crate::lp::RowBuilder::default();
                    row.add(ps, 1.0);
                    let mut rhs = 0.0;
                    for e in t.edges(ch) {
                        let succ = t.edge_succ[e];
                        match p[succ] {
                            Some(v) => row.add(v, -c.probs()[e]),
                            None => rhs += c.probs()[e] * fixed(succ).unwrap(),
                        }
                    }
                    let op = if mc {
                        ComparisonOp::Eq
                    } else {
                        ComparisonOp::Ge
                    };
                    lp.add_constraint(row.finish(), op, rhs);
                }
            }
            match p[init] {
                Some(v) => lp.add_constraint([(tau, 1.0), (v, -1.0)], ComparisonOp::Ge, 0.0),
                None => lp.add_constraint([(tau, 1.0)], ComparisonOp::Ge, fixed(init).unwrap()),
            }
        }
    }
    let sol = lp
        .solve()
        .map_err(|e| CheckError::Lp(e.to_string()))?
        .into_solution()
        .map_err(|_| CheckError::Lp("interrupted".into()))?;
    Ok(sol[tau])
}
