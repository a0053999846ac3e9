//! Synthesis of controllable cost parameters.
//!
//! Costs are affine in the controllable parameters `w`, with coefficients that
//! may depend on the sampled parameters. The program minimizes the worst
//! expected cost τ over all samples. For a fixed policy the expected cost at
//! the initial state is an affine function of `w`, obtained from one adjoint
//! solve `yᵀ(I − P) = e_init` per sample. The reduced program then only has
//! the variables `(w, τ)`. The monolithic program keeps every `c^u_s` as a
//! variable and is meant for cross-checking.
//!
//! On MDPs the policy depends on `w`. Maximal costs are a pointwise maximum of
//! affine functions, so cutting planes from optimal policies converge to the
//! exact optimum. Minimal costs are a pointwise minimum, which makes the
//! program nonconvex; there the policies and `w` are improved alternately until
//! the policies stop changing, which yields a locally optimal `w`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checker::{expected_cost_value, CheckError, GraphAnalysis};
use crate::linsolve;
use crate::lp::{Cmp, Lp, LpError};
use crate::model::{
    ConcreteModel, Direction, InstantiateOptions, ParametricModel, PolicyObjective, Specification,
    Valuation,
};
use crate::modelio::UncertainModel;
use crate::polynomial::CompiledPolynomial;
use crate::sampling::{self, SamplingError};
use crate::scenario::{self, ConfidenceResult, EstimateMode, ScenarioError};

/// Default upper end of the box on every controllable parameter.
pub const DEFAULT_W_MAX: f64 = 1000.0;
/// Samples above which the reduced program is used by default.
pub const MONOLITHIC_MAX_SAMPLES: usize = 50;
const MAX_ROUNDS: usize = 200;

/// LP objective, duality gap and row count.
type LpData = (f64, f64, usize);
/// Costs, LP objective, duality gap, rows and rounds.
type CutSolution = (Vec<f64>, f64, f64, usize, usize);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostSynError {
    #[error("the cost of action {action} in state {state} is not affine in the cost parameters")]
    NonAffineCost { state: String, action: String },
    #[error(
        "the cost of action {action} in state {state} can be negative inside the parameter box"
    )]
    NegativeCost { state: String, action: String },
    #[error("the specification must be an upper bound on expected cost")]
    WrongSpecification,
    #[error("bad bounds for cost parameter {0}")]
    BadBounds(String),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("the monolithic program is not available for minimal costs on MDPs")]
    UnsupportedMode,
    #[error("LP: {0}")]
    Lp(#[from] LpError),
    #[error("LP solver: {0}")]
    Microlp(String),
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BuildMode {
    /// Reduced program for many samples, monolithic for few.
    Auto,
    Reduced,
    Monolithic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostSynOptions {
    /// Box per cost parameter, in the order of [`ParametricModel::cost_parameters`].
    /// Empty means `[0, DEFAULT_W_MAX]` for every parameter.
    pub bounds: Vec<(f64, f64)>,
    /// Optional lower bound on the sum of the cost parameters.
    pub budget: Option<f64>,
    pub mode: BuildMode,
}

impl Default for CostSynOptions {
    fn default() -> Self {
        CostSynOptions {
            bounds: Vec::new(),
            budget: None,
            mode: BuildMode::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult {
    /// Synthesized value per cost parameter.
    pub w: Vec<(String, f64)>,
    /// Worst expected cost over the samples at `w`.
    pub tau: f64,
    /// Optimum reported by the LP, equal to `tau` up to solver tolerance.
    pub lp_objective: f64,
    pub per_sample_costs: Vec<f64>,
    pub kappa: f64,
    /// Samples whose expected cost exceeds κ.
    pub violating: usize,
    /// `tau ≤ κ`: every sample meets the specification.
    pub feasible: bool,
    pub mode: BuildMode,
    pub lp_rows: usize,
    pub lp_columns: usize,
    /// Primal-dual gap of the final reduced program.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duality_gap: Option<f64>,
    pub rounds: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<ConfidenceResult>,
}

/// Per-choice cost `base + Σ_i coef[i] · w_i` of one sample.
#[derive(Debug, Clone)]
struct SampleCosts {
    model: ConcreteModel,
    base: Vec<f64>,
    coef: Vec<Vec<f64>>,
}

impl SampleCosts {
    fn at(&self, w: &[f64]) -> Vec<f64> {
        let mut c = self.base.clone();
        for (i, wi) in w.iter().enumerate() {
            for (x, k) in c.iter_mut().zip(&self.coef[i]) {
                *x += wi * k;
            }
        }
        c
    }
}

/// The cost program over a fixed sample set, before solving.
#[derive(Debug, Clone)]
pub struct CostLp<'m> {
    model: &'m ParametricModel,
    spec: Specification,
    names: Vec<String>,
    bounds: Vec<(f64, f64)>,
    budget: Option<f64>,
    analysis: GraphAnalysis,
    objective: PolicyObjective,
    samples: Vec<SampleCosts>,
}

/// Affine function `a0 + a·w` of the cost parameters.
#[derive(Debug, Clone, PartialEq)]
struct Affine {
    a0: f64,
    a: Vec<f64>,
}

/// Prepares the cost program: checks affinity, evaluates the cost
/// coefficients of every sample and checks that costs are well defined.
pub fn build_cost_lp<'m>(
    m: &'m ParametricModel,
    samples: &[Valuation],
    spec: Specification,
    opts: &CostSynOptions,
) -> Result<CostLp<'m>, CostSynError> {
    if spec.kind != crate::model::SpecKind::ExpectedCost || spec.direction != Direction::AtMost {
        return Err(CostSynError::WrongSpecification);
    }
    let names: Vec<String> = m.cost_parameters().iter().map(|s| s.to_string()).collect();
    let bounds = if opts.bounds.is_empty() {
        vec![(0.0, DEFAULT_W_MAX); names.len()]
    } else {
        opts.bounds.clone()
    };
    if bounds.len() != names.len() {
        return Err(CostSynError::BadBounds(format!(
            "{} boxes for {} parameters",
            bounds.len(),
            names.len()
        )));
    }
    for (n, &(lo, hi)) in names.iter().zip(&bounds) {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(CostSynError::BadBounds(n.clone()));
        }
    }
    if let Some(b) = opts.budget {
        if b > bounds.iter().map(|x| x.1).sum::<f64>() {
            return Err(CostSynError::BadBounds(format!(
                "budget {b} exceeds the box"
            )));
        }
    }
    let t = m.topology().map_err(CheckError::from)?;
    let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    let index: std::collections::HashMap<String, usize> = m
        .parameters()
        .iter()
        .enumerate()
        .map(|(i, p)| (p.name.clone(), i))
        .collect();
    // compiled (base, coefficients) per choice
    let mut parts: Vec<(CompiledPolynomial, Vec<CompiledPolynomial>)> =
        Vec::with_capacity(t.num_choices());
    for (s, row) in m.parts().choices.iter().enumerate() {
        for ch in row {
            let poly = ch
                .cost
                .clone()
                .unwrap_or_else(crate::polynomial::Polynomial::zero);
            let (base, coefs) =
                poly.affine_split(&refs)
                    .ok_or_else(|| CostSynError::NonAffineCost {
                        state: m.states()[s].clone(),
                        action: m.actions()[ch.action].clone(),
                    })?;
            if coefs
                .iter()
                .any(|c| names.iter().any(|n| c.parameters().contains(n)))
            {
                return Err(CostSynError::NonAffineCost {
                    state: m.states()[s].clone(),
                    action: m.actions()[ch.action].clone(),
                });
            }
            let compile = |p: &crate::polynomial::Polynomial| {
                p.compile(&index).expect("validated parameters")
            };
            parts.push((compile(&base), coefs.iter().map(compile).collect()));
        }
    }
    let goal = m.goal().unwrap_or(m.target());
    let analysis = GraphAnalysis::new(t, m.target(), Some(goal))?;
    let objective = if m.is_mc() {
        PolicyObjective::Max
    } else {
        spec.objective
    };
    analysis.check_cost_well_defined(m.initial(), objective)?;
    let choice_state = t.choice_state();
    let opts_tr = InstantiateOptions {
        transitions_only: true,
        ..Default::default()
    };
    let mut out = Vec::with_capacity(samples.len());
    for u in samples {
        let model = m.instantiate_with(u, opts_tr).map_err(CheckError::from)?;
        let vals = u.values();
        let base: Vec<f64> = parts.iter().map(|p| p.0.eval(vals)).collect();
        let coef: Vec<Vec<f64>> = (0..names.len())
            .map(|i| parts.iter().map(|p| p.1[i].eval(vals)).collect())
            .collect();
        for c in 0..base.len() {
            let worst = base[c]
                + (0..names.len())
                    .map(|i| (coef[i][c] * bounds[i].0).min(coef[i][c] * bounds[i].1))
                    .sum::<f64>();
            if base[c].is_nan() || worst < -1e-12 {
                let s = choice_state[c];
                return Err(CostSynError::NegativeCost {
                    state: m.states()[s].clone(),
                    action: m.actions()[t.choice_action[c]].clone(),
                });
            }
        }
        out.push(SampleCosts { model, base, coef });
    }
    Ok(CostLp {
        model: m,
        spec,
        names,
        bounds,
        budget: opts.budget,
        analysis,
        objective,
        samples: out,
    })
}

impl CostLp<'_> {
    pub fn num_samples(&self) -> usize {
        self.samples.len()
    }

    pub fn num_cost_parameters(&self) -> usize {
        self.names.len()
    }

    /// Rows and columns of the monolithic program.
    pub fn monolithic_size(&self) -> (usize, usize) {
        let t = self.samples.first().map(|s| s.model.topology().clone());
        let Some(t) = t else {
            return (0, self.names.len() + 1);
        };
        let finite = self.finite();
        let goal = self.analysis.goal.as_ref().expect("goal");
        let unknown = (0..t.num_states).filter(|&s| finite[s] && !goal[s]).count();
        let rows: usize = (0..t.num_states)
            .filter(|&s| finite[s] && !goal[s])
            .map(|s| t.choices(s).len())
            .sum();
        (
            self.samples.len() * (rows + 1),
            self.names.len() + 1 + self.samples.len() * unknown,
        )
    }

    fn finite(&self) -> &[bool] {
        match self.objective {
            PolicyObjective::Max => self.analysis.goal_almost_sure_all.as_ref().expect("goal"),
            PolicyObjective::Min => self.analysis.goal_almost_sure_some.as_ref().expect("goal"),
        }
    }

    /// Optimal value and policy of every sample at `w`.
    fn evaluate(&self, w: &[f64]) -> Result<Vec<(f64, Vec<usize>)>, CostSynError> {
        use rayon::prelude::*;
        self.samples
            .par_iter()
            .map(|s| {
                let mut c = s.model.clone();
                c.set_costs(s.at(w));
                let r = expected_cost_value(&c, &self.analysis, self.objective)?;
                Ok((r.values[c.initial()], r.policy))
            })
            .collect()
    }

    /// Expected cost at the initial state under `policy` as a function of `w`.
    fn affine_map(&self, s: &SampleCosts, policy: &[usize]) -> Result<Affine, CostSynError> {
        let t = s.model.topology();
        let finite = self.finite();
        let goal = self.analysis.goal.as_ref().expect("goal");
        let unknown: Vec<usize> = (0..t.num_states)
            .filter(|&x| finite[x] && !goal[x])
            .collect();
        let w = self.names.len();
        let init = t.initial;
        if goal[init] {
            return Ok(Affine {
                a0: 0.0,
                a: vec![0.0; w],
            });
        }
        let mut idx = vec![usize::MAX; t.num_states];
        for (i, &x) in unknown.iter().enumerate() {
            idx[x] = i;
        }
        // transposed system (I − P_π)ᵀ y = e_init
        let mut trip = Vec::new();
        for (i, &x) in unknown.iter().enumerate() {
            trip.push((i, i, 1.0));
            for e in t.edges(policy[x]) {
                let succ = t.edge_succ[e];
                if idx[succ] != usize::MAX {
                    trip.push((idx[succ], i, -s.model.probs()[e]));
                }
            }
        }
        let mut rhs = vec![0.0; unknown.len()];
        rhs[idx[init]] = 1.0;
        let y = linsolve::solve(unknown.len(), &trip, &rhs).map_err(CheckError::from)?;
        let dot = |v: &[f64]| {
            unknown
                .iter()
                .zip(&y)
                .map(|(&x, yi)| yi * v[policy[x]])
                .sum::<f64>()
        };
        Ok(Affine {
            a0: dot(&s.base),
            a: s.coef.iter().map(|c| dot(c)).collect(),
        })
    }

    /// Minimizes τ subject to `τ ≥ f(w)` for every cut, over the box and budget.
    fn solve_reduced(&self, cuts: &[Affine]) -> Result<(Vec<f64>, f64, f64, usize), CostSynError> {
        let w = self.names.len();
        // variables: w' = w − lo (w of them), then τ
        let mut obj = vec![0.0; w + 1];
        obj[w] = 1.0;
        let mut lp = Lp::new(obj);
        for cut in cuts {
            let mut row: Vec<f64> = cut.a.clone();
            row.push(-1.0);
            let shift: f64 = cut.a.iter().zip(&self.bounds).map(|(a, b)| a * b.0).sum();
            lp.add_row(row, Cmp::Le, -(cut.a0 + shift));
        }
        for i in 0..w {
            let mut row = vec![0.0; w + 1];
            row[i] = 1.0;
            lp.add_row(row, Cmp::Le, self.bounds[i].1 - self.bounds[i].0);
        }
        if let Some(b) = self.budget {
            let mut row = vec![1.0; w + 1];
            row[w] = 0.0;
            lp.add_row(
                row,
                Cmp::Ge,
                b - self.bounds.iter().map(|x| x.0).sum::<f64>(),
            );
        }
        let sol = lp.solve()?;
        let gap = sol.duality_gap(&lp);
        let wv = (0..w).map(|i| sol.x[i] + self.bounds[i].0).collect();
        Ok((wv, sol.objective, gap, lp.rows.len()))
    }

    /// A feasible starting point: the lower corner, raised evenly to meet the budget.
    fn start(&self) -> Vec<f64> {
        let mut w: Vec<f64> = self.bounds.iter().map(|b| b.0).collect();
        if let Some(b) = self.budget {
            let mut missing = b - w.iter().sum::<f64>();
            for (i, x) in w.iter_mut().enumerate() {
                if missing <= 0.0 {
                    break;
                }
                let room = self.bounds[i].1 - *x;
                let step = room.min(missing);
                *x += step;
                missing -= step;
            }
        }
        w
    }

    pub fn solve(&self, mode: BuildMode) -> Result<SynthesisResult, CostSynError> {
        let mode = match mode {
            BuildMode::Auto
                if self.samples.len() <= MONOLITHIC_MAX_SAMPLES
                    && self.objective == PolicyObjective::Max =>
            {
                BuildMode::Monolithic
            }
            BuildMode::Auto => BuildMode::Reduced,
            m => m,
        };
        let (w, lp_objective, gap, rows, cols, rounds) = match mode {
            BuildMode::Monolithic => {
                let (w, obj) = self.solve_monolithic()?;
                let (r, c) = self.monolithic_size();
                (w, obj, None, r, c, 1)
            }
            _ => {
                let (w, obj, gap, rows, rounds) = self.solve_by_cuts()?;
                (w, obj, Some(gap), rows, self.names.len() + 1, rounds)
            }
        };
        let values: Vec<f64> = self.evaluate(&w)?.into_iter().map(|v| v.0).collect();
        let tau = values.iter().copied().fold(0.0, f64::max);
        let kappa = self.spec.threshold;
        Ok(SynthesisResult {
            w: self.names.iter().cloned().zip(w).collect(),
            tau,
            lp_objective,
            violating: values.iter().filter(|&&v| !self.spec.holds_for(v)).count(),
            per_sample_costs: values,
            kappa,
            feasible: self.spec.holds_for(tau),
            mode,
            lp_rows: rows,
            lp_columns: cols,
            duality_gap: gap,
            rounds,
            certificate: None,
        })
    }

    fn solve_by_cuts(&self) -> Result<CutSolution, CostSynError> {
        let mut w = self.start();
        let mut cuts: Vec<Affine> = Vec::new();
        // LP objective, duality gap and row count of the program that produced `w`
        let mut current: Option<LpData> = None;
        // best (true τ, w, LP data) seen so far, for minimal costs
        let mut best: Option<(f64, Vec<f64>, LpData)> = None;
        let mut last_policies: Option<Vec<Vec<usize>>> = None;
        let mut rounds = 0;
        for round in 1..=MAX_ROUNDS {
            rounds = round;
            let evals = self.evaluate(&w)?;
            let true_tau = evals.iter().map(|e| e.0).fold(0.0, f64::max);
            match self.objective {
                PolicyObjective::Max => {
                    // add the cut of every sample whose value the program underestimates
                    let lp_tau = current.map_or(f64::NEG_INFINITY, |c| c.0);
                    let mut added = 0;
                    for (s, e) in self.samples.iter().zip(&evals) {
                        if e.0 > lp_tau + 1e-9 * lp_tau.abs().max(1.0) {
                            let cut = self.affine_map(s, &e.1)?;
                            if !cuts.contains(&cut) {
                                cuts.push(cut);
                                added += 1;
                            }
                        }
                    }
                    if added == 0 {
                        if let Some((obj, gap, rows)) = current {
                            return Ok((w, obj, gap, rows, round));
                        }
                    }
                }
                PolicyObjective::Min => {
                    if let Some(cur) = current {
                        if best.as_ref().is_none_or(|b| true_tau < b.0) {
                            best = Some((true_tau, w.clone(), cur));
                        }
                    }
                    let policies: Vec<Vec<usize>> = evals.into_iter().map(|e| e.1).collect();
                    if last_policies.as_ref() == Some(&policies) {
                        break;
                    }
                    cuts = self
                        .samples
                        .iter()
                        .zip(&policies)
                        .map(|(s, p)| self.affine_map(s, p))
                        .collect::<Result<_, _>>()?;
                    last_policies = Some(policies);
                }
            }
            let (next, obj, gap, rows) = self.solve_reduced(&cuts)?;
            current = Some((obj, gap, rows));
            w = next;
        }
        match best {
            Some((_, w, (obj, gap, rows))) => Ok((w, obj, gap, rows, rounds)),
            None => {
                let (obj, gap, rows) = current.expect("at least one round");
                Ok((w, obj, gap, rows, rounds))
            }
        }
    }

    /// The program with every per-sample expected cost as a variable.
    fn solve_monolithic(&self) -> Result<(Vec<f64>, f64), CostSynError> {
        use microlp::{ComparisonOp, OptimizationDirection, Problem};
        let mc = self.model.is_mc();
        if !mc && self.objective == PolicyObjective::Min {
            return Err(CostSynError::UnsupportedMode);
        }
        let mut lp = Problem::new(OptimizationDirection::Minimize);
        let wv: Vec<_> = self.bounds.iter().map(|&b| lp.add_var(0.0, b)).collect();
        let tau = lp.add_var(1.0, (0.0, f64::INFINITY));
        if let Some(b) = self.budget {
            let expr: Vec<_> = wv.iter().map(|&v| (v, 1.0)).collect();
            lp.add_constraint(&expr[..], ComparisonOp::Ge, b);
        }
        let finite = self.finite();
        let goal = self.analysis.goal.as_ref().expect("goal");
        for s in &self.samples {
            let t = s.model.topology();
            let n = t.num_states;
            let cvar: Vec<Option<_>> = (0..n)
                .map(|x| (finite[x] && !goal[x]).then(|| lp.add_var(0.0, (0.0, f64::INFINITY))))
                .collect();
            for x in 0..n {
                let Some(cx) = cvar[x] else { continue };
                for ch in t.choices(x) {
                    if !t.edges(ch).all(|e| finite[t.edge_succ[e]]) {
                        continue;
                    }
                    // c_x − Σ P c_succ − Σ coef_i w_i (=|≥) base
                    let mut row = crate::lp::RowBuilder::default();
                    row.add(cx, 1.0);
                    for e in t.edges(ch) {
                        if let Some(v) = cvar[t.edge_succ[e]] {
                            row.add(v, -s.model.probs()[e]);
                        }
                    }
                    for (i, &v) in wv.iter().enumerate() {
                        if s.coef[i][ch] != 0.0 {
                            row.add(v, -s.coef[i][ch]);
                        }
                    }
                    let op = if mc {
                        ComparisonOp::Eq
                    } else {
                        ComparisonOp::Ge
                    };
                    lp.add_constraint(row.finish(), op, s.base[ch]);
                }
            }
            if let Some(ci) = cvar[t.initial] {
                lp.add_constraint([(tau, 1.0), (ci, -1.0)], ComparisonOp::Ge, 0.0);
            }
        }
        let sol = lp
            .solve()
            .map_err(|e| CostSynError::Microlp(e.to_string()))?
            .into_solution()
            .map_err(|_| CostSynError::Microlp("interrupted".into()))?;
        Ok((wv.iter().map(|&v| sol[v]).collect(), sol[tau]))
    }
}

/// Solves the cost program on the given samples.
pub fn synthesize(
    m: &ParametricModel,
    samples: &[Valuation],
    spec: Specification,
    opts: &CostSynOptions,
) -> Result<SynthesisResult, CostSynError> {
    build_cost_lp(m, samples, spec, opts)?.solve(opts.mode)
}

/// Draws K samples, synthesizes the cost parameters and certifies the result:
/// samples exceeding κ at the synthesized `w` are counted as discarded.
pub fn synthesize_and_certify(
    um: &UncertainModel,
    spec: Specification,
    k: usize,
    seed: u64,
    alpha_target: f64,
    opts: &CostSynOptions,
) -> Result<SynthesisResult, CostSynError> {
    let w = um.model.cost_parameters().len();
    if k < (w + 1).max(2) {
        return Err(CostSynError::TooFewSamples {
            needed: (w + 1).max(2),
            got: k,
        });
    }
    let samples = sampling::draw(&um.distribution, &um.model, k, seed)?;
    let mut result = synthesize(&um.model, &samples.samples, spec, opts)?;
    result.certificate = Some(scenario::confidence(
        k,
        result.violating,
        w,
        EstimateMode::FixedAlpha(alpha_target),
    )?);
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Choice, ModelParts};
    use crate::polynomial::{Parameter, Polynomial};

    fn poly(s: &str) -> Polynomial {
        Polynomial::parse(s).unwrap()
    }

    /// s0 --(p)--> g, s0 --(1-p)--> s0 with cost `cost` at s0.
    fn geometric(cost: &str, with_w: bool) -> ParametricModel {
        let mut parameters = vec![Parameter::uncontrollable("p")];
        if with_w {
            parameters.push(Parameter::cost("w1"));
        }
        ParametricModel::new(ModelParts {
            name: "geo".into(),
            states: vec!["s0".into(), "g".into(), "x".into()],
            actions: vec!["a".into()],
            choices: vec![
                vec![Choice {
                    action: 0,
                    transitions: vec![(1, poly("p")), (0, poly("1 - p"))],
                    cost: Some(poly(cost)),
                }],
                vec![Choice {
                    action: 0,
                    transitions: vec![(1, poly("1"))],
                    cost: None,
                }],
                vec![Choice {
                    action: 0,
                    transitions: vec![(1, poly("1"))],
                    cost: None,
                }],
            ],
            initial: 0,
            parameters,
            target: vec![1],
            goal: Some(vec![1]),
            declared_mc: true,
        })
        .unwrap()
    }

    #[test]
    fn geometric_series_optimum() {
        let m = geometric("1 + 2*w1", true);
        let us = vec![m.valuation([("p", 0.5)]), m.valuation([("p", 0.25)])];
        let spec = Specification::cost_at_most(10.0).unwrap();
        for mode in [BuildMode::Reduced, BuildMode::Monolithic] {
            let opts = CostSynOptions {
                mode,
                ..Default::default()
            };
            let r = synthesize(&m, &us, spec, &opts).unwrap();
            assert!((r.tau - 4.0).abs() < 1e-6, "{mode:?}: {}", r.tau);
            assert!((r.lp_objective - 4.0).abs() < 1e-6);
            assert!(r.w[0].1.abs() < 1e-9);
            assert!(r.feasible);
            assert_eq!(r.per_sample_costs.len(), 2);
        }
        // a budget pushes w1 up: w1 = 3 -> (1 + 6) / 0.25 = 28
        let opts = CostSynOptions {
            budget: Some(3.0),
            mode: BuildMode::Reduced,
            ..Default::default()
        };
        let r = synthesize(&m, &us, spec, &opts).unwrap();
        assert!((r.tau - 28.0).abs() < 1e-6);
        assert!(!r.feasible);
        assert_eq!(r.violating, 2);
        assert!(r.duality_gap.unwrap() < 1e-7);
    }

    #[test]
    fn without_cost_parameters_the_program_evaluates() {
        let m = geometric("3", false);
        let us: Vec<Valuation> = [0.2, 0.5, 0.9]
            .iter()
            .map(|&p| m.valuation([("p", p)]))
            .collect();
        let spec = Specification::cost_at_most(100.0).unwrap();
        let r = synthesize(&m, &us, spec, &CostSynOptions::default()).unwrap();
        assert!((r.tau - 15.0).abs() < 1e-6);
        assert!(r.w.is_empty());
    }

    #[test]
    fn non_affine_costs_are_rejected() {
        let m = geometric("w1*w1", true);
        let us = vec![m.valuation([("p", 0.5)])];
        let spec = Specification::cost_at_most(1.0).unwrap();
        assert!(matches!(
            synthesize(&m, &us, spec, &CostSynOptions::default()),
            Err(CostSynError::NonAffineCost { .. })
        ));
        let m = geometric("1 - w1", true);
        assert!(matches!(
            synthesize(&m, &us, spec, &CostSynOptions::default()),
            Err(CostSynError::NegativeCost { .. })
        ));
    }

    #[test]
    fn too_few_samples() {
        let m = geometric("1 + w1", true);
        let um = UncertainModel {
            distribution: crate::sampling::ParameterDistribution::uniform("p", 0.2, 0.8),
            model: m,
        };
        let spec = Specification::cost_at_most(10.0).unwrap();
        let r = synthesize_and_certify(&um, spec, 1, 0, 0.05, &CostSynOptions::default());
        assert!(matches!(r, Err(CostSynError::TooFewSamples { .. })));
        let r = synthesize_and_certify(&um, spec, 2, 0, 0.05, &CostSynOptions::default()).unwrap();
        assert!(r.certificate.is_some());
    }
}
