//! Parametric MDPs and their instantiations.
//!
//! A [`ParametricModel`] keeps the symbolic description (polynomial edge labels
//! and costs) together with a compiled sparse form: the topology is shared
//! behind an `Arc`, and the distinct polynomials are interned so an
//! instantiation evaluates each of them once and then fills the edge array.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::polynomial::{CompiledPolynomial, Parameter, ParameterKind, Polynomial};

/// Tolerance on |Σ_s' P(s,α,s') − 1|.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Diagnostic {
    NoEnabledAction {
        state: String,
    },
    EmptyTransition {
        state: String,
        action: String,
    },
    SuccessorOutOfRange {
        state: String,
        action: String,
        index: usize,
    },
    DuplicateAction {
        state: String,
        action: String,
    },
    DuplicateParameter {
        name: String,
    },
    UnknownParameter {
        name: String,
    },
    ControllableInTransition {
        state: String,
        action: String,
        successor: String,
    },
    InitialOutOfRange {
        index: usize,
    },
    LabelOutOfRange {
        index: usize,
    },
    NotAnMc {
        state: String,
    },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::NoEnabledAction { state } => write!(f, "state `{state}` has no enabled action"),
            Diagnostic::EmptyTransition { state, action } => {
                write!(f, "`{state}` --{action}--> has no successor with nonzero probability")
            }
            Diagnostic::SuccessorOutOfRange { state, action, index } => {
                write!(f, "`{state}` --{action}--> refers to state index {index}, which does not exist")
            }
            Diagnostic::DuplicateAction { state, action } => {
                write!(f, "action `{action}` is declared twice in state `{state}`")
            }
            Diagnostic::DuplicateParameter { name } => write!(f, "parameter `{name}` is declared twice"),
            Diagnostic::UnknownParameter { name } => write!(f, "parameter `{name}` is not declared"),
            Diagnostic::ControllableInTransition { state, action, successor } => write!(
                f,
                "transition `{state}` --{action}--> `{successor}` uses a controllable cost parameter"
            ),
            Diagnostic::InitialOutOfRange { index } => write!(f, "initial state index {index} out of range"),
            Diagnostic::LabelOutOfRange { index } => write!(f, "labelled state index {index} out of range"),
            Diagnostic::NotAnMc { state } => {
                write!(f, "model is declared as an MC but state `{state}` has several actions")
            }
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("row ({state}, {action}) sums to {row_sum}, not 1")]
    NotWellDefined {
        state: String,
        action: String,
        row_sum: f64,
    },
    #[error("edge {from} --{action}--> {to} evaluates to {value}, outside (0, 1]")]
    NotGraphPreserving {
        from: String,
        action: String,
        to: String,
        value: f64,
    },
    #[error("parameter `{0}` has no value")]
    MissingParameter(String),
    #[error("cost of ({state}, {action}) evaluates to {value} < 0")]
    NegativeCost {
        state: String,
        action: String,
        value: f64,
    },
    #[error("model is structurally invalid: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
}

/// One enabled action of a state.
#[derive(Debug, Clone, PartialEq)]
pub struct Choice {
    pub action: usize,
    pub transitions: Vec<(usize, Polynomial)>,
    pub cost: Option<Polynomial>,
}

/// Everything needed to describe a pMDP, before compilation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelParts {
    pub name: String,
    pub states: Vec<String>,
    pub actions: Vec<String>,
    pub choices: Vec<Vec<Choice>>,
    pub initial: usize,
    pub parameters: Vec<Parameter>,
    pub target: Vec<usize>,
    pub goal: Option<Vec<usize>>,
    /// The document declared the model as a Markov chain.
    pub declared_mc: bool,
}

/// Sparse state/choice/edge layout shared by a parametric model and all of its
/// instantiations.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub num_states: usize,
    pub initial: usize,
    /// `state_start[s]..state_start[s+1]` are the choices of `s`.
    pub state_start: Vec<usize>,
    pub choice_action: Vec<usize>,
    /// `choice_start[c]..choice_start[c+1]` are the edges of choice `c`.
    pub choice_start: Vec<usize>,
    pub edge_succ: Vec<usize>,
}

impl Topology {
    #[inline]
    pub fn choices(&self, s: usize) -> std::ops::Range<usize> {
        self.state_start[s]..self.state_start[s + 1]
    }

    #[inline]
    pub fn edges(&self, c: usize) -> std::ops::Range<usize> {
        self.choice_start[c]..self.choice_start[c + 1]
    }

    pub fn num_choices(&self) -> usize {
        self.choice_action.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edge_succ.len()
    }

    pub fn choice_state(&self) -> Vec<usize> {
        let mut out = vec![0; self.num_choices()];
        for s in 0..self.num_states {
            for c in self.choices(s) {
                out[c] = s;
            }
        }
        out
    }

    /// Predecessor lists of the digraph restricted to edges where `keep` holds.
    pub fn predecessors(&self, keep: impl Fn(usize) -> bool) -> Vec<Vec<usize>> {
        let mut pred = vec![Vec::new(); self.num_states];
        for s in 0..self.num_states {
            for c in self.choices(s) {
                for e in self.edges(c) {
                    if keep(e) {
                        pred[self.edge_succ[e]].push(s);
                    }
                }
            }
        }
        for p in &mut pred {
            p.sort_unstable();
            p.dedup();
        }
        pred
    }
}

#[derive(Debug, Clone)]
struct Compiled {
    topology: Arc<Topology>,
    polys: Vec<CompiledPolynomial>,
    /// Interned polynomial used by each edge.
    edge_poly: Vec<u32>,
    /// Interned cost polynomial of each choice (the zero polynomial when absent).
    choice_cost: Vec<u32>,
    has_costs: bool,
}

/// An assignment of values to the parameters of a model, aligned with
/// [`ParametricModel::parameters`]. Unassigned entries are NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Valuation(pub Vec<f64>);

impl Valuation {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        self.0.get(i).copied().filter(|x| !x.is_nan())
    }

    /// This valuation with unset entries taken from `other`.
    pub fn filled_from(&self, other: &Valuation) -> Valuation {
        Valuation(
            self.0
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    if x.is_nan() {
                        other.0.get(i).copied().unwrap_or(f64::NAN)
                    } else {
                        x
                    }
                })
                .collect(),
        )
    }
}

/// Parametric MDP (or MC when every state has exactly one enabled action).
#[derive(Debug, Clone)]
pub struct ParametricModel {
    parts: ModelParts,
    param_index: HashMap<String, usize>,
    compiled: Option<Compiled>,
}

impl PartialEq for ParametricModel {
    fn eq(&self, other: &Self) -> bool {
        self.parts == other.parts
    }
}

impl ParametricModel {
    /// Normalizes the parts (merging duplicate successors, dropping zero
    /// edges) and compiles them when they pass [`validate`](Self::validate).
    pub fn from_parts(mut parts: ModelParts) -> Self {
        for row in &mut parts.choices {
            for choice in row.iter_mut() {
                let mut merged: Vec<(usize, Polynomial)> =
                    Vec::with_capacity(choice.transitions.len());
                for (succ, p) in choice.transitions.drain(..) {
                    match merged.iter_mut().find(|(s, _)| *s == succ) {
                        Some((_, q)) => *q = &*q + &p,
                        None => merged.push((succ, p)),
                    }
                }
                merged.retain(|(_, p)| !p.is_zero());
                choice.transitions = merged;
                if choice.cost.as_ref().is_some_and(|c| c.is_zero()) {
                    choice.cost = None;
                }
            }
        }
        parts.target.sort_unstable();
        parts.target.dedup();
        if let Some(g) = &mut parts.goal {
            g.sort_unstable();
            g.dedup();
        }
        if parts.goal.as_ref().is_some_and(|g| g.is_empty()) {
            parts.goal = None;
        }
        let param_index = parts
            .parameters
            .iter()
            .enumerate()
            .map(|(i, p)| (p.name.clone(), i))
            .collect();
        let mut model = ParametricModel {
            parts,
            param_index,
            compiled: None,
        };
        if model.validate().is_empty() {
            model.compiled = Some(model.compile());
        }
        model
    }

    /// Builds the model and fails with every structural violation found.
    pub fn new(parts: ModelParts) -> Result<Self, ModelError> {
        let m = Self::from_parts(parts);
        let diags = m.validate();
        if diags.is_empty() {
            Ok(m)
        } else {
            Err(ModelError::Invalid(diags))
        }
    }

    fn compile(&self) -> Compiled {
        let mut intern: HashMap<Polynomial, u32> = HashMap::new();
        let mut polys = Vec::new();
        let zero = Polynomial::zero();
        let mut id = |p: &Polynomial, polys: &mut Vec<CompiledPolynomial>| -> u32 {
            // every polynomial was checked against the declared parameters by validate
            if let Some(&i) = intern.get(p) {
                return i;
            }
            *intern.entry(p.clone()).or_insert_with(|| {
                polys.push(p.compile(&self.param_index).expect("validated parameters"));
                (polys.len() - 1) as u32
            })
        };
        let mut state_start = vec![0];
        let mut choice_action = Vec::new();
        let mut choice_start = vec![0];
        let mut choice_cost = Vec::new();
        let mut edge_succ = Vec::new();
        let mut edge_poly = Vec::new();
        let mut has_costs = false;
        for row in &self.parts.choices {
            for choice in row {
                choice_action.push(choice.action);
                for (succ, p) in &choice.transitions {
                    edge_succ.push(*succ);
                    edge_poly.push(id(p, &mut polys));
                }
                choice_start.push(edge_succ.len());
                let cost = choice.cost.as_ref().unwrap_or(&zero);
                has_costs |= choice.cost.is_some();
                choice_cost.push(id(cost, &mut polys));
            }
            state_start.push(choice_action.len());
        }
        Compiled {
            topology: Arc::new(Topology {
                num_states: self.parts.states.len(),
                initial: self.parts.initial,
                state_start,
                choice_action,
                choice_start,
                edge_succ,
            }),
            polys,
            edge_poly,
            choice_cost,
            has_costs,
        }
    }

    /// All structural violations; an empty list means the model is valid.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let p = &self.parts;
        let mut out = Vec::new();
        let n = p.states.len();
        let state_name = |i: usize| p.states.get(i).cloned().unwrap_or_else(|| format!("#{i}"));
        let action_name = |i: usize| p.actions.get(i).cloned().unwrap_or_else(|| format!("#{i}"));
        let mut seen = BTreeSet::new();
        for par in &p.parameters {
            if !seen.insert(par.name.as_str()) {
                out.push(Diagnostic::DuplicateParameter {
                    name: par.name.clone(),
                });
            }
        }
        let kind_of = |name: &str| self.param_index.get(name).map(|&i| p.parameters[i].kind);
        let mut unknown = BTreeSet::new();
        if p.initial >= n {
            out.push(Diagnostic::InitialOutOfRange { index: p.initial });
        }
        for &t in p.target.iter().chain(p.goal.iter().flatten()) {
            if t >= n {
                out.push(Diagnostic::LabelOutOfRange { index: t });
            }
        }
        for s in 0..n {
            let row = p.choices.get(s).map(Vec::as_slice).unwrap_or(&[]);
            if row.is_empty() {
                out.push(Diagnostic::NoEnabledAction {
                    state: state_name(s),
                });
            }
            if p.declared_mc && row.len() > 1 {
                out.push(Diagnostic::NotAnMc {
                    state: state_name(s),
                });
            }
            let mut actions = BTreeSet::new();
            for choice in row {
                if !actions.insert(choice.action) {
                    out.push(Diagnostic::DuplicateAction {
                        state: state_name(s),
                        action: action_name(choice.action),
                    });
                }
                if choice.transitions.is_empty() {
                    out.push(Diagnostic::EmptyTransition {
                        state: state_name(s),
                        action: action_name(choice.action),
                    });
                }
                for (succ, poly) in &choice.transitions {
                    if *succ >= n {
                        out.push(Diagnostic::SuccessorOutOfRange {
                            state: state_name(s),
                            action: action_name(choice.action),
                            index: *succ,
                        });
                    }
                    for name in poly.parameters() {
                        match kind_of(&name) {
                            None => {
                                unknown.insert(name);
                            }
                            Some(ParameterKind::ControllableCost) => {
                                out.push(Diagnostic::ControllableInTransition {
                                    state: state_name(s),
                                    action: action_name(choice.action),
                                    successor: state_name(*succ),
                                })
                            }
                            Some(ParameterKind::Uncontrollable) => {}
                        }
                    }
                }
                if let Some(cost) = &choice.cost {
                    for name in cost.parameters() {
                        if kind_of(&name).is_none() {
                            unknown.insert(name);
                        }
                    }
                }
            }
        }
        out.extend(
            unknown
                .into_iter()
                .map(|name| Diagnostic::UnknownParameter { name }),
        );
        out
    }

    fn compiled(&self) -> Result<&Compiled, ModelError> {
        self.compiled
            .as_ref()
            .ok_or_else(|| ModelError::Invalid(self.validate()))
    }

    pub fn parts(&self) -> &ModelParts {
        &self.parts
    }

    pub fn name(&self) -> &str {
        &self.parts.name
    }

    pub fn states(&self) -> &[String] {
        &self.parts.states
    }

    pub fn num_states(&self) -> usize {
        self.parts.states.len()
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.parts.states.iter().position(|s| s == name)
    }

    pub fn actions(&self) -> &[String] {
        &self.parts.actions
    }

    pub fn choices(&self, s: usize) -> &[Choice] {
        &self.parts.choices[s]
    }

    pub fn initial(&self) -> usize {
        self.parts.initial
    }

    pub fn parameters(&self) -> &[Parameter] {
        &self.parts.parameters
    }

    pub fn parameter_index(&self, name: &str) -> Option<usize> {
        self.param_index.get(name).copied()
    }

    pub fn cost_parameters(&self) -> Vec<&str> {
        self.parts
            .parameters
            .iter()
            .filter(|p| p.kind == ParameterKind::ControllableCost)
            .map(|p| p.name.as_str())
            .collect()
    }

    pub fn target(&self) -> &[usize] {
        &self.parts.target
    }

    pub fn goal(&self) -> Option<&[usize]> {
        self.parts.goal.as_deref()
    }

    pub fn has_costs(&self) -> bool {
        self.parts
            .choices
            .iter()
            .flatten()
            .any(|c| c.cost.is_some())
    }

    pub fn is_mc(&self) -> bool {
        self.parts.choices.iter().all(|row| row.len() == 1)
    }

    pub fn num_transitions(&self) -> usize {
        self.parts
            .choices
            .iter()
            .flatten()
            .map(|c| c.transitions.len())
            .sum()
    }

    pub fn topology(&self) -> Result<&Arc<Topology>, ModelError> {
        Ok(&self.compiled()?.topology)
    }

    /// Number of distinct polynomials after interning.
    pub fn num_distinct_polynomials(&self) -> usize {
        self.compiled.as_ref().map_or(0, |c| c.polys.len())
    }

    /// The edges (state, action, successor) whose polynomial is not identically zero.
    pub fn digraph(&self) -> BTreeSet<(usize, usize, usize)> {
        let mut out = BTreeSet::new();
        for (s, row) in self.parts.choices.iter().enumerate() {
            for c in row {
                for (succ, _) in &c.transitions {
                    out.insert((s, c.action, *succ));
                }
            }
        }
        out
    }

    /// Builds a valuation from name/value pairs. Unknown names are ignored.
    pub fn valuation<'a>(&self, pairs: impl IntoIterator<Item = (&'a str, f64)>) -> Valuation {
        let mut values = vec![f64::NAN; self.parts.parameters.len()];
        for (name, x) in pairs {
            if let Some(&i) = self.param_index.get(name) {
                values[i] = x;
            }
        }
        Valuation(values)
    }

    /// Instantiates transitions and, when every cost parameter is assigned, costs.
    pub fn instantiate(&self, u: &Valuation) -> Result<ConcreteModel, ModelError> {
        self.instantiate_with(u, InstantiateOptions::default())
    }

    pub fn instantiate_with(
        &self,
        u: &Valuation,
        opts: InstantiateOptions,
    ) -> Result<ConcreteModel, ModelError> {
        let comp = self.compiled()?;
        let topo = &comp.topology;
        for (i, par) in self.parts.parameters.iter().enumerate() {
            if par.kind == ParameterKind::Uncontrollable && u.get(i).is_none() {
                return Err(ModelError::MissingParameter(par.name.clone()));
            }
        }
        let values = u.values();
        let poly_vals: Vec<f64> = comp.polys.iter().map(|p| p.eval(values)).collect();
        let mut probs = Vec::with_capacity(topo.num_edges());
        for s in 0..topo.num_states {
            for c in topo.choices(s) {
                let mut sum = 0.0;
                for e in topo.edges(c) {
                    let p = poly_vals[comp.edge_poly[e] as usize];
                    let ok = if opts.allow_zero_edges {
                        (0.0..=1.0).contains(&p)
                    } else {
                        p > 0.0 && p <= 1.0
                    };
                    if !ok {
                        return Err(ModelError::NotGraphPreserving {
                            from: self.parts.states[s].clone(),
                            action: self.parts.actions[topo.choice_action[c]].clone(),
                            to: self.parts.states[topo.edge_succ[e]].clone(),
                            value: p,
                        });
                    }
                    sum += p;
                    probs.push(p);
                }
                if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                    return Err(ModelError::NotWellDefined {
                        state: self.parts.states[s].clone(),
                        action: self.parts.actions[topo.choice_action[c]].clone(),
                        row_sum: sum,
                    });
                }
            }
        }
        let costs = if !comp.has_costs || opts.transitions_only {
            None
        } else {
            let mut costs = Vec::with_capacity(topo.num_choices());
            for s in 0..topo.num_states {
                for c in topo.choices(s) {
                    let x = poly_vals[comp.choice_cost[c] as usize];
                    if x.is_nan() {
                        let missing = self
                            .parts
                            .parameters
                            .iter()
                            .enumerate()
                            .find(|(i, _)| {
                                u.get(*i).is_none()
                                    && comp.polys[comp.choice_cost[c] as usize].uses(*i)
                            })
                            .map(|(_, p)| p.name.clone())
                            .unwrap_or_default();
                        return Err(ModelError::MissingParameter(missing));
                    }
                    if x < 0.0 {
                        return Err(ModelError::NegativeCost {
                            state: self.parts.states[s].clone(),
                            action: self.parts.actions[topo.choice_action[c]].clone(),
                            value: x,
                        });
                    }
                    costs.push(x);
                }
            }
            Some(costs)
        };
        Ok(ConcreteModel {
            topology: topo.clone(),
            probs,
            costs,
            valuation: u.clone(),
        })
    }

    /// Evaluates the transition polynomial of an edge given by its flat index.
    pub fn edge_polynomial(&self, s: usize, action: usize, succ: usize) -> Option<&Polynomial> {
        self.parts
            .choices
            .get(s)?
            .iter()
            .find(|c| c.action == action)?
            .transitions
            .iter()
            .find(|(t, _)| *t == succ)
            .map(|(_, p)| p)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct InstantiateOptions {
    /// Accept edges that evaluate to exactly 0 (non-graph-preserving points such
    /// as the boundary of the parameter space). Rows must still sum to 1.
    pub allow_zero_edges: bool,
    /// Leave costs uninstantiated.
    pub transitions_only: bool,
}

/// An MDP/MC with real probabilities and costs, produced by instantiation.
#[derive(Debug, Clone)]
pub struct ConcreteModel {
    topology: Arc<Topology>,
    probs: Vec<f64>,
    costs: Option<Vec<f64>>,
    valuation: Valuation,
}

impl ConcreteModel {
    /// Builds a concrete model directly; rows must sum to 1 within tolerance and
    /// every probability must lie in (0, 1].
    pub fn from_rows(
        initial: usize,
        rows: Vec<Vec<Vec<(usize, f64)>>>,
        costs: Option<Vec<Vec<f64>>>,
    ) -> Result<Self, ModelError> {
        let mut state_start = vec![0];
        let mut choice_action = Vec::new();
        let mut choice_start = vec![0];
        let mut edge_succ = Vec::new();
        let mut probs = Vec::new();
        let n = rows.len();
        for (s, row) in rows.iter().enumerate() {
            if row.is_empty() {
                return Err(ModelError::Invalid(vec![Diagnostic::NoEnabledAction {
                    state: format!("#{s}"),
                }]));
            }
            for (a, edges) in row.iter().enumerate() {
                let mut sum = 0.0;
                for &(t, p) in edges {
                    if t >= n {
                        return Err(ModelError::Invalid(vec![Diagnostic::SuccessorOutOfRange {
                            state: format!("#{s}"),
                            action: format!("#{a}"),
                            index: t,
                        }]));
                    }
                    if !(p > 0.0 && p <= 1.0) {
                        return Err(ModelError::NotGraphPreserving {
                            from: format!("#{s}"),
                            action: format!("#{a}"),
                            to: format!("#{t}"),
                            value: p,
                        });
                    }
                    sum += p;
                    edge_succ.push(t);
                    probs.push(p);
                }
                if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                    return Err(ModelError::NotWellDefined {
                        state: format!("#{s}"),
                        action: format!("#{a}"),
                        row_sum: sum,
                    });
                }
                choice_action.push(a);
                choice_start.push(edge_succ.len());
            }
            state_start.push(choice_action.len());
        }
        let costs = costs.map(|c| c.into_iter().flatten().collect::<Vec<_>>());
        if let Some(c) = &costs {
            assert_eq!(c.len(), choice_action.len(), "one cost per choice");
        }
        Ok(ConcreteModel {
            topology: Arc::new(Topology {
                num_states: n,
                initial,
                state_start,
                choice_action,
                choice_start,
                edge_succ,
            }),
            probs,
            costs,
            valuation: Valuation(Vec::new()),
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn num_states(&self) -> usize {
        self.topology.num_states
    }

    pub fn initial(&self) -> usize {
        self.topology.initial
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn costs(&self) -> Option<&[f64]> {
        self.costs.as_deref()
    }

    pub fn set_costs(&mut self, costs: Vec<f64>) {
        assert_eq!(costs.len(), self.topology.num_choices());
        self.costs = Some(costs);
    }

    pub fn valuation(&self) -> &Valuation {
        &self.valuation
    }

    /// (successor, probability) pairs of a choice.
    #[inline]
    pub fn edges(&self, c: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.topology
            .edges(c)
            .map(move |e| (self.topology.edge_succ[e], self.probs[e]))
    }

    pub fn is_mc(&self) -> bool {
        (0..self.num_states()).all(|s| self.topology.choices(s).len() == 1)
    }

    /// The same model with zero-probability edges removed, so graph analyses
    /// see the digraph of this particular instantiation.
    pub fn pruned(&self) -> ConcreteModel {
        let t = &self.topology;
        let mut choice_start = vec![0];
        let mut edge_succ = Vec::new();
        let mut probs = Vec::new();
        for c in 0..t.num_choices() {
            for e in t.edges(c) {
                if self.probs[e] > 0.0 {
                    edge_succ.push(t.edge_succ[e]);
                    probs.push(self.probs[e]);
                }
            }
            choice_start.push(edge_succ.len());
        }
        ConcreteModel {
            topology: Arc::new(Topology {
                num_states: t.num_states,
                initial: t.initial,
                state_start: t.state_start.clone(),
                choice_action: t.choice_action.clone(),
                choice_start,
                edge_succ,
            }),
            probs,
            costs: self.costs.clone(),
            valuation: self.valuation.clone(),
        }
    }

    /// Edges with positive probability.
    pub fn digraph(&self) -> BTreeSet<(usize, usize, usize)> {
        let t = &self.topology;
        let mut out = BTreeSet::new();
        for s in 0..t.num_states {
            for c in t.choices(s) {
                for e in t.edges(c) {
                    if self.probs[e] > 0.0 {
                        out.insert((s, t.choice_action[c], t.edge_succ[e]));
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpecKind {
    Reachability,
    ExpectedCost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    AtMost,
    AtLeast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyObjective {
    Min,
    Max,
}

/// `P_{≤λ}(◇T)`, `P_{≥λ}(◇T)`, `E_{≤κ}(◇G)` or `E_{≥κ}(◇G)`, together with the
/// policy quantifier used on MDPs. Targets come from the model's labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Specification {
    pub kind: SpecKind,
    pub threshold: f64,
    pub direction: Direction,
    pub objective: PolicyObjective,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("reachability threshold {0} is outside [0, 1]")]
    BadProbability(f64),
    #[error("expected-cost threshold {0} is negative")]
    BadCost(f64),
}

impl Specification {
    /// Defaults the policy objective to the one that makes the check a synthesis
    /// question: minimize for upper bounds, maximize for lower bounds.
    pub fn new(kind: SpecKind, threshold: f64, direction: Direction) -> Result<Self, SpecError> {
        let objective = match direction {
            Direction::AtMost => PolicyObjective::Min,
            Direction::AtLeast => PolicyObjective::Max,
        };
        Self::with_objective(kind, threshold, direction, objective)
    }

    pub fn with_objective(
        kind: SpecKind,
        threshold: f64,
        direction: Direction,
        objective: PolicyObjective,
    ) -> Result<Self, SpecError> {
        match kind {
            SpecKind::Reachability if !(0.0..=1.0).contains(&threshold) => {
                Err(SpecError::BadProbability(threshold))
            }
            SpecKind::ExpectedCost if threshold.is_nan() || threshold < 0.0 => {
                Err(SpecError::BadCost(threshold))
            }
            _ => Ok(Specification {
                kind,
                threshold,
                direction,
                objective,
            }),
        }
    }

    pub fn reach_at_most(lambda: f64) -> Result<Self, SpecError> {
        Self::new(SpecKind::Reachability, lambda, Direction::AtMost)
    }

    pub fn reach_at_least(lambda: f64) -> Result<Self, SpecError> {
        Self::new(SpecKind::Reachability, lambda, Direction::AtLeast)
    }

    pub fn cost_at_most(kappa: f64) -> Result<Self, SpecError> {
        Self::new(SpecKind::ExpectedCost, kappa, Direction::AtMost)
    }

    pub fn holds_for(&self, value: f64) -> bool {
        match self.direction {
            Direction::AtMost => value <= self.threshold,
            Direction::AtLeast => value >= self.threshold,
        }
    }
}
