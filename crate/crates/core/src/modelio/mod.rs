//! The `.umdp` text format and built-in model generators.
//!
//! ```text
//! umdp 1 mc "coin"
//! param v ~ uniform(0, 1)
//! state s0 init
//! state s1 target
//! state s2
//! s0 --> { s1: v, s2: 1 - v }
//! s1 --> { s1: 1 }
//! s2 --> { s2: 1 }
//! ```
//!
//! The full grammar is in `docs/format.md` at the repository root.

mod builtin;
pub mod uav;

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::model::{Choice, Diagnostic, ModelParts, ParametricModel};
use crate::polynomial::{Parameter, ParameterKind, PolyError, Polynomial};
use crate::sampling::{Block, Marginal, ParameterDistribution};

pub use builtin::{analog_models, generate_fig1, FIG1_LAMBDA};
pub use uav::{generate_uav, UavConfig, UavPreset, HORIZON_SLACK};

/// Name of the action used by `s --> { ... }`.
pub const DEFAULT_ACTION: &str = "tau";
pub const FORMAT_VERSION: u32 = 1;

/// A parametric model paired with the distribution of its uncontrollable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertainModel {
    pub model: ParametricModel,
    pub distribution: ParameterDistribution,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax {
        line: usize,
        col: usize,
        msg: String,
    },
    #[error("{0}")]
    Semantic(SemanticError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SemanticError {
    #[error("state `{0}` is declared twice")]
    DuplicateState(String),
    #[error("line {line}: state `{name}` is not declared")]
    UnknownState { name: String, line: usize },
    #[error("parameter `{0}` is declared twice")]
    DuplicateParameter(String),
    #[error("group `{0}` is declared twice")]
    DuplicateGroup(String),
    #[error("line {line}: group `{name}` is not declared")]
    UnknownGroup { name: String, line: usize },
    #[error("line {line}: action `{action}` of state `{state}` is defined twice")]
    DuplicateTransition {
        state: String,
        action: String,
        line: usize,
    },
    #[error("line {line}: cost of ({state}, {action}) is defined twice")]
    DuplicateCost {
        state: String,
        action: String,
        line: usize,
    },
    #[error("line {line}: cost given for ({state}, {action}), which has no transitions")]
    CostWithoutTransition {
        state: String,
        action: String,
        line: usize,
    },
    #[error("no state is labelled `init`")]
    MissingInitial,
    #[error("several states are labelled `init`: {0:?}")]
    MultipleInitial(Vec<String>),
    #[error("distribution: {0}")]
    Distribution(String),
    #[error("{}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Model(Vec<Diagnostic>),
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse { path: String, source: ParseError },
}

/// Reads and parses a model file.
pub fn load(path: &Path) -> Result<UncertainModel, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse(&text).map_err(|source| LoadError::Parse {
        path: path.display().to_string(),
        source,
    })
}

/// Parses a `.umdp` document.
pub fn parse(text: &str) -> Result<UncertainModel, ParseError> {
    let doc = Parser { src: text, pos: 0 }.document()?;
    doc.resolve(text)
}

#[derive(Debug, Default)]
struct Document {
    declared_mc: bool,
    name: String,
    actions: Vec<String>,
    params: Vec<(Parameter, Option<ParamDist>)>,
    groups: Vec<(String, Vec<f64>, usize)>,
    states: Vec<(String, Vec<String>, usize)>,
    transitions: Vec<Transition>,
    costs: Vec<(String, String, Polynomial, usize)>,
}

#[derive(Debug)]
enum ParamDist {
    Marginal(Marginal),
    Simplex(String, usize),
}

#[derive(Debug)]
struct Transition {
    state: String,
    action: String,
    succ: Vec<(String, Polynomial, usize)>,
    at: usize,
}

fn line_of(text: &str, pos: usize) -> usize {
    text[..pos.min(text.len())]
        .bytes()
        .filter(|b| *b == b'\n')
        .count()
        + 1
}

impl Document {
    fn resolve(self, text: &str) -> Result<UncertainModel, ParseError> {
        let sem = |e| Err(ParseError::Semantic(e));
        let mut state_index = HashMap::new();
        for (i, (name, _, _)) in self.states.iter().enumerate() {
            if state_index.insert(name.clone(), i).is_some() {
                return sem(SemanticError::DuplicateState(name.clone()));
            }
        }
        let lookup = |name: &str, at: usize| {
            state_index.get(name).copied().ok_or_else(|| {
                ParseError::Semantic(SemanticError::UnknownState {
                    name: name.into(),
                    line: line_of(text, at),
                })
            })
        };

        let mut parameters = Vec::new();
        let mut seen = HashMap::new();
        for (p, _) in &self.params {
            if seen.insert(p.name.clone(), ()).is_some() {
                return sem(SemanticError::DuplicateParameter(p.name.clone()));
            }
            parameters.push(p.clone());
        }

        let mut blocks = Vec::new();
        let mut group_block: HashMap<&str, usize> = HashMap::new();
        for (name, weights, _) in &self.groups {
            if group_block.contains_key(name.as_str()) {
                return sem(SemanticError::DuplicateGroup(name.clone()));
            }
            group_block.insert(name, blocks.len());
            blocks.push(Block::Dirichlet {
                group: name.clone(),
                weights: weights.clone(),
                params: Vec::new(),
            });
        }
        for (p, dist) in &self.params {
            match dist {
                None => {}
                Some(ParamDist::Marginal(m)) => blocks.push(Block::Single {
                    param: p.name.clone(),
                    marginal: m.clone(),
                }),
                Some(ParamDist::Simplex(group, at)) => match group_block.get(group.as_str()) {
                    Some(&b) => {
                        if let Block::Dirichlet { params, .. } = &mut blocks[b] {
                            params.push(p.name.clone());
                        }
                    }
                    None => {
                        return sem(SemanticError::UnknownGroup {
                            name: group.clone(),
                            line: line_of(text, *at),
                        })
                    }
                },
            }
        }

        let mut actions = self.actions.clone();
        let mut action_index: HashMap<String, usize> = actions
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), i))
            .collect();
        let n = self.states.len();
        let mut choices: Vec<Vec<Choice>> = vec![Vec::new(); n];
        for t in &self.transitions {
            let s = lookup(&t.state, t.at)?;
            let a = *action_index.entry(t.action.clone()).or_insert_with(|| {
                actions.push(t.action.clone());
                actions.len() - 1
            });
            if choices[s].iter().any(|c| c.action == a) {
                return sem(SemanticError::DuplicateTransition {
                    state: t.state.clone(),
                    action: t.action.clone(),
                    line: line_of(text, t.at),
                });
            }
            let mut trans = Vec::with_capacity(t.succ.len());
            for (name, p, at) in &t.succ {
                trans.push((lookup(name, *at)?, p.clone()));
            }
            choices[s].push(Choice {
                action: a,
                transitions: trans,
                cost: None,
            });
        }
        for (state, action, poly, at) in &self.costs {
            let s = lookup(state, *at)?;
            let choice = action_index
                .get(action)
                .and_then(|a| choices[s].iter_mut().find(|c| c.action == *a))
                .ok_or_else(|| {
                    ParseError::Semantic(SemanticError::CostWithoutTransition {
                        state: state.clone(),
                        action: action.clone(),
                        line: line_of(text, *at),
                    })
                })?;
            if choice.cost.is_some() {
                return sem(SemanticError::DuplicateCost {
                    state: state.clone(),
                    action: action.clone(),
                    line: line_of(text, *at),
                });
            }
            choice.cost = Some(poly.clone());
        }

        let has = |label: &str| -> Vec<usize> {
            self.states
                .iter()
                .enumerate()
                .filter(|(_, s)| s.1.iter().any(|l| l == label))
                .map(|(i, _)| i)
                .collect()
        };
        let init = has("init");
        let initial = match init.as_slice() {
            [] => return sem(SemanticError::MissingInitial),
            [i] => *i,
            many => {
                return sem(SemanticError::MultipleInitial(
                    many.iter().map(|&i| self.states[i].0.clone()).collect(),
                ))
            }
        };
        let goal = has("goal");
        let parts = ModelParts {
            name: self.name,
            states: self.states.iter().map(|s| s.0.clone()).collect(),
            actions,
            choices,
            initial,
            parameters,
            target: has("target"),
            goal: if goal.is_empty() { None } else { Some(goal) },
            declared_mc: self.declared_mc,
        };
        let model = ParametricModel::new(parts).map_err(|e| match e {
            crate::model::ModelError::Invalid(d) => ParseError::Semantic(SemanticError::Model(d)),
            other => ParseError::Semantic(SemanticError::Distribution(other.to_string())),
        })?;
        let distribution = ParameterDistribution::new(blocks);
        distribution
            .validate(&model)
            .map_err(|e| ParseError::Semantic(SemanticError::Distribution(e.to_string())))?;
        Ok(UncertainModel {
            model,
            distribution,
        })
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

fn is_ident_start(c: u8) -> bool {
    c.is_ascii_alphabetic() || c == b'_'
}

fn is_ident_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_'
}

impl<'a> Parser<'a> {
    fn err<T>(&self, pos: usize, msg: impl Into<String>) -> Result<T, ParseError> {
        let before = &self.src[..pos.min(self.src.len())];
        let line = before.bytes().filter(|b| *b == b'\n').count() + 1;
        let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        Err(ParseError::Syntax {
            line,
            col,
            msg: msg.into(),
        })
    }

    fn bytes(&self) -> &'a [u8] {
        self.src.as_bytes()
    }

    fn peek_raw(&self) -> Option<u8> {
        self.bytes().get(self.pos).copied()
    }

    /// Skips whitespace and comments, including newlines.
    fn skip(&mut self) {
        while let Some(c) = self.peek_raw() {
            if c == b'#' {
                while self.peek_raw().is_some_and(|c| c != b'\n') {
                    self.pos += 1;
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    /// Skips blanks on the current line only.
    fn skip_inline(&mut self) {
        while self
            .peek_raw()
            .is_some_and(|c| c == b' ' || c == b'\t' || c == b'\r')
        {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip();
        self.peek_raw()
    }

    fn at_ident(&mut self) -> bool {
        self.peek().is_some_and(is_ident_start)
    }

    fn ident(&mut self, what: &str) -> Result<&'a str, ParseError> {
        self.skip();
        let start = self.pos;
        if !self.peek_raw().is_some_and(is_ident_start) {
            return self.err(start, format!("expected {what}"));
        }
        while self.peek_raw().is_some_and(is_ident_char) {
            self.pos += 1;
        }
        Ok(&self.src[start..self.pos])
    }

    fn expect(&mut self, tok: &str) -> Result<(), ParseError> {
        self.skip();
        if self.src[self.pos..].starts_with(tok) {
            self.pos += tok.len();
            Ok(())
        } else {
            self.err(self.pos, format!("expected `{tok}`"))
        }
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.skip();
        if self.src[self.pos..].starts_with(tok) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        self.skip();
        let start = self.pos;
        while self
            .peek_raw()
            .is_some_and(|c| c.is_ascii_digit() || matches!(c, b'.' | b'e' | b'E' | b'+' | b'-'))
        {
            self.pos += 1;
        }
        self.src[start..self.pos]
            .parse()
            .or_else(|_| self.err(start, "expected a number"))
    }

    /// A polynomial running up to (not including) one of `stops` at bracket depth 0.
    fn expr(&mut self, stops: &[u8]) -> Result<Polynomial, ParseError> {
        self.skip_inline();
        let start = self.pos;
        let mut depth = 0i32;
        while let Some(c) = self.peek_raw() {
            if depth == 0 && stops.contains(&c) {
                break;
            }
            match c {
                b'(' => depth += 1,
                b')' => depth -= 1,
                _ => {}
            }
            self.pos += 1;
        }
        Polynomial::parse(&self.src[start..self.pos]).or_else(|e| match e {
            PolyError::Parse { offset, msg } => self.err(start + offset, msg),
            other => self.err(start, other.to_string()),
        })
    }

    fn document(mut self) -> Result<Document, ParseError> {
        let mut doc = Document::default();
        self.skip();
        let at = self.pos;
        if !self.at_ident() || self.ident("header")? != "umdp" {
            return self.err(at, "expected header");
        }
        let vat = self.pos;
        let version = self.number()?;
        if version != FORMAT_VERSION as f64 {
            return self.err(vat, format!("unsupported format version {version}"));
        }
        let kat = self.pos;
        doc.declared_mc = match self.ident("model kind")? {
            "mc" => true,
            "mdp" => false,
            other => {
                return self.err(
                    kat,
                    format!("unknown model kind `{other}`, expected `mc` or `mdp`"),
                )
            }
        };
        doc.name = self.quoted()?;

        while self.peek().is_some() {
            let at = self.pos;
            let word = self.ident("a declaration or transition")?;
            match word {
                "param" => self.param(&mut doc)?,
                "group" => {
                    let name = self.ident("group name")?.to_string();
                    self.expect("~")?;
                    let dat = self.pos;
                    if self.ident("distribution")? != "dirichlet" {
                        return self.err(dat, "groups take a `dirichlet(...)` distribution");
                    }
                    let weights = self.number_list(b'(', b')')?;
                    doc.groups.push((name, weights, at));
                }
                "actions" => {
                    self.skip_inline();
                    while self.peek_raw().is_some_and(is_ident_start) {
                        let a = self.ident("action")?.to_string();
                        doc.actions.push(a);
                        self.skip_inline();
                    }
                }
                "state" => {
                    let name = self.ident("state name")?.to_string();
                    let mut labels = Vec::new();
                    self.skip_inline();
                    while self.peek_raw().is_some_and(is_ident_start) {
                        let lat = self.pos;
                        let label = self.ident("label")?;
                        if !matches!(label, "init" | "target" | "goal") {
                            return self.err(lat, format!("unknown label `{label}`"));
                        }
                        labels.push(label.to_string());
                        self.skip_inline();
                    }
                    doc.states.push((name, labels, at));
                }
                "cost" if self.peek() == Some(b'(') => {
                    self.expect("(")?;
                    let state = self.ident("state name")?.to_string();
                    self.expect(",")?;
                    let action = self.ident("action name")?.to_string();
                    self.expect(")")?;
                    self.expect("=")?;
                    let poly = self.expr(b"\n#")?;
                    doc.costs.push((state, action, poly, at));
                }
                state => {
                    let state = state.to_string();
                    self.expect("--")?;
                    let action = if self.src[self.pos..].starts_with('>') {
                        self.pos += 1;
                        DEFAULT_ACTION.to_string()
                    } else {
                        let a = self.ident("action name or `>`")?.to_string();
                        self.expect("-->")?;
                        a
                    };
                    self.expect("{")?;
                    let mut succ = Vec::new();
                    loop {
                        if self.eat("}") {
                            break;
                        }
                        let sat = self.pos;
                        let name = self.ident("successor state")?.to_string();
                        self.expect(":")?;
                        let poly = self.expr(b",}")?;
                        succ.push((name, poly, sat));
                        if !self.eat(",") {
                            self.expect("}")?;
                            break;
                        }
                    }
                    doc.transitions.push(Transition {
                        state,
                        action,
                        succ,
                        at,
                    });
                }
            }
        }
        Ok(doc)
    }

    fn quoted(&mut self) -> Result<String, ParseError> {
        self.skip();
        let start = self.pos;
        if self.peek_raw() != Some(b'"') {
            return self.err(start, "expected a quoted model name");
        }
        self.pos += 1;
        while let Some(c) = self.peek_raw() {
            self.pos += 1;
            if c == b'"' {
                return Ok(self.src[start + 1..self.pos - 1].to_string());
            }
            if c == b'\n' {
                break;
            }
        }
        self.err(start, "unterminated model name")
    }

    fn number_list(&mut self, open: u8, close: u8) -> Result<Vec<f64>, ParseError> {
        self.expect(std::str::from_utf8(&[open]).unwrap())?;
        let close = std::str::from_utf8(std::slice::from_ref(&close))
            .unwrap()
            .to_string();
        let mut out = Vec::new();
        if self.eat(&close) {
            return Ok(out);
        }
        loop {
            out.push(self.number()?);
            if !self.eat(",") {
                self.expect(&close)?;
                return Ok(out);
            }
        }
    }

    fn param(&mut self, doc: &mut Document) -> Result<(), ParseError> {
        let name = self.ident("parameter name")?.to_string();
        self.skip_inline();
        if self.src[self.pos..].starts_with("cost") {
            self.ident("cost")?;
            doc.params.push((Parameter::cost(name), None));
            return Ok(());
        }
        if !self.src[self.pos..].starts_with('~') {
            doc.params.push((Parameter::uncontrollable(name), None));
            return Ok(());
        }
        self.expect("~")?;
        let at = self.pos;
        let dist = match self.ident("distribution")? {
            "uniform" => {
                let args = self.number_list(b'(', b')')?;
                if args.len() != 2 {
                    return self.err(at, "uniform takes two bounds");
                }
                ParamDist::Marginal(Marginal::Uniform {
                    low: args[0],
                    high: args[1],
                })
            }
            "discrete" => {
                self.expect("{")?;
                let mut pairs = Vec::new();
                loop {
                    let v = self.number()?;
                    self.expect(":")?;
                    let w = self.number()?;
                    pairs.push((v, w));
                    if !self.eat(",") {
                        self.expect("}")?;
                        break;
                    }
                }
                ParamDist::Marginal(Marginal::Discrete(pairs))
            }
            "simplex" => {
                let gat = self.pos;
                ParamDist::Simplex(self.ident("group name")?.to_string(), gat)
            }
            other => return self.err(at, format!("unknown distribution `{other}`")),
        };
        doc.params
            .push((Parameter::uncontrollable(name), Some(dist)));
        Ok(())
    }
}

fn join_f64(xs: &[f64]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Writes a model in the `.umdp` format; `parse(&serialize(m)) == m`.
pub fn serialize(um: &UncertainModel) -> String {
    let m = &um.model;
    let mut out = String::new();
    let kind = if m.parts().declared_mc { "mc" } else { "mdp" };
    writeln!(out, "umdp {FORMAT_VERSION} {kind} \"{}\"", m.name()).unwrap();
    writeln!(out, "actions {}", m.actions().join(" ")).unwrap();

    let mut single: HashMap<&str, &Marginal> = HashMap::new();
    let mut member: HashMap<&str, (&str, &[f64])> = HashMap::new();
    for b in &um.distribution.blocks {
        match b {
            Block::Single { param, marginal } => {
                single.insert(param, marginal);
            }
            Block::Dirichlet {
                group,
                weights,
                params,
            } => {
                for p in params {
                    member.insert(p, (group, weights));
                }
            }
        }
    }
    let mut groups_done = BTreeMap::new();
    for p in m.parameters() {
        let name = p.name.as_str();
        if p.kind == ParameterKind::ControllableCost {
            writeln!(out, "param {name} cost").unwrap();
        } else if let Some(marg) = single.get(name) {
            match marg {
                Marginal::Uniform { low, high } => {
                    writeln!(out, "param {name} ~ uniform({low}, {high})").unwrap()
                }
                Marginal::Discrete(pairs) => {
                    let body: Vec<String> =
                        pairs.iter().map(|(v, w)| format!("{v}: {w}")).collect();
                    writeln!(out, "param {name} ~ discrete{{{}}}", body.join(", ")).unwrap()
                }
            }
        } else if let Some((group, weights)) = member.get(name) {
            if groups_done.insert(*group, ()).is_none() {
                writeln!(out, "group {group} ~ dirichlet({})", join_f64(weights)).unwrap();
            }
            writeln!(out, "param {name} ~ simplex {group}").unwrap();
        } else {
            writeln!(out, "param {name}").unwrap();
        }
    }
    // groups without members still round-trip
    for b in &um.distribution.blocks {
        if let Block::Dirichlet {
            group,
            weights,
            params,
        } = b
        {
            if params.is_empty() {
                writeln!(out, "group {group} ~ dirichlet({})", join_f64(weights)).unwrap();
            }
        }
    }

    let target: std::collections::HashSet<usize> = m.target().iter().copied().collect();
    let goal: std::collections::HashSet<usize> = m.goal().unwrap_or(&[]).iter().copied().collect();
    for (i, s) in m.states().iter().enumerate() {
        write!(out, "state {s}").unwrap();
        if i == m.initial() {
            out.push_str(" init");
        }
        if target.contains(&i) {
            out.push_str(" target");
        }
        if goal.contains(&i) {
            out.push_str(" goal");
        }
        out.push('\n');
    }
    for (i, s) in m.states().iter().enumerate() {
        for c in m.choices(i) {
            let action = &m.actions()[c.action];
            let arrow = if action == DEFAULT_ACTION {
                "-->".to_string()
            } else {
                format!("--{action}-->")
            };
            let body: Vec<String> = c
                .transitions
                .iter()
                .map(|(t, p)| format!("{}: {p}", m.states()[*t]))
                .collect();
            writeln!(out, "{s} {arrow} {{ {} }}", body.join(", ")).unwrap();
        }
    }
    for (i, s) in m.states().iter().enumerate() {
        for c in m.choices(i) {
            if let Some(cost) = &c.cost {
                writeln!(out, "cost({s}, {}) = {cost}", m.actions()[c.action]).unwrap();
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const COIN: &str = r#"
# a biased coin
umdp 1 mc "coin"
param v ~ uniform(0, 1)
state s0 init
state s1 target
state s2
s0 --> { s1: v, s2: 1 - v }
s1 --> { s1: 1 }
s2 --> { s2: 1 }
"#;

    #[test]
    fn parses_a_small_chain() {
        let um = parse(COIN).unwrap();
        assert_eq!(um.model.num_states(), 3);
        assert!(um.model.is_mc());
        assert_eq!(um.model.target(), &[1]);
        assert_eq!(
            um.distribution,
            ParameterDistribution::uniform("v", 0.0, 1.0)
        );
    }

    #[test]
    fn empty_document() {
        assert_eq!(
            parse("").unwrap_err(),
            ParseError::Syntax {
                line: 1,
                col: 1,
                msg: "expected header".into()
            }
        );
        assert!(matches!(
            parse("   # nothing\n"),
            Err(ParseError::Syntax {
                line: 2,
                col: 1,
                ..
            })
        ));
    }

    #[test]
    fn duplicate_state() {
        let text = COIN.replace("state s2\n", "state s2\nstate s1\n");
        assert_eq!(
            parse(&text).unwrap_err(),
            ParseError::Semantic(SemanticError::DuplicateState("s1".into()))
        );
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let text = COIN.replace("s1: v,", "s1: v +,");
        match parse(&text).unwrap_err() {
            ParseError::Syntax { line, col, .. } => assert_eq!((line, col), (8, 17)),
            other => panic!("{other:?}"),
        }
        let text = COIN.replace("s1: v,", "s1: 1/v,");
        match parse(&text).unwrap_err() {
            ParseError::Syntax { msg, .. } => assert!(msg.contains("non-constant"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn semantic_errors() {
        let text = COIN.replace("s2 --> { s2: 1 }", "s2 --> { s9: 1 }");
        assert_eq!(
            parse(&text).unwrap_err(),
            ParseError::Semantic(SemanticError::UnknownState {
                name: "s9".into(),
                line: 10
            })
        );
        let text = COIN.replace("s2 --> { s2: 1 }\n", "");
        assert!(matches!(
            parse(&text),
            Err(ParseError::Semantic(SemanticError::Model(_)))
        ));
        let text = COIN.replace("state s0 init", "state s0");
        assert_eq!(
            parse(&text).unwrap_err(),
            ParseError::Semantic(SemanticError::MissingInitial)
        );
        let text = COIN.replace("param v ~ uniform(0, 1)", "param v");
        assert!(matches!(
            parse(&text),
            Err(ParseError::Semantic(SemanticError::Distribution(_)))
        ));
    }

    #[test]
    fn mdp_with_costs_round_trips() {
        let text = r#"umdp 1 mdp "grid"
param p ~ discrete{0.25: 1, 0.5: 3}
group g ~ dirichlet(1, 5, 1)
param a ~ simplex g
param b ~ simplex g
param w cost
state s0 init
state s1 goal target
state s2
s0 --go--> { s1: p, s0: 1 - p }
s0 --jump--> { s1: a, s2: b, s0: 1 - a - b }
s1 --> { s1: 1 }
s2 --back--> { s0: 1 }
cost(s0, go) = 1 + 2*w
cost(s0, jump) = 1/3
cost(s2, back) = 0.5 * w^2
"#;
        let um = parse(text).unwrap();
        assert!(!um.model.is_mc());
        assert_eq!(um.model.goal(), Some(&[1][..]));
        let again = parse(&serialize(&um)).unwrap();
        assert_eq!(again, um);
        assert_eq!(serialize(&again), serialize(&um));
    }

    #[test]
    fn controllable_parameter_in_transition_is_rejected() {
        let text = COIN.replace("param v ~ uniform(0, 1)", "param v cost");
        match parse(&text).unwrap_err() {
            ParseError::Semantic(SemanticError::Model(d)) => {
                assert!(d
                    .iter()
                    .any(|x| matches!(x, Diagnostic::ControllableInTransition { .. })))
            }
            other => panic!("{other:?}"),
        }
    }
}
