//! Oracles and random model generators shared by the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use scenverify::model::{Choice, ConcreteModel, ModelParts};
use scenverify::modelio::UncertainModel;
use scenverify::sampling::{Block, Marginal, ParameterDistribution};
use scenverify::{Parameter, ParametricModel, Polynomial};

/// Reachability of the bundled running example, from enumerating its paths by hand.
pub fn fig1_curve(v: f64) -> f64 {
    let w = 1.0 - v;
    0.5 * v.powi(3) * w + 0.1 * v.powi(6) * w + 0.1 * v * w.powi(3) + 0.1 * w * w + 0.04 + 0.05 * v
}

/// Points in [0, 1] where the curve crosses `lambda`, by bisection between grid sign changes.
pub fn fig1_crossings(lambda: f64) -> Vec<f64> {
    let n = 10_000;
    let g = |i: usize| i as f64 / n as f64;
    let mut out = Vec::new();
    for i in 0..n {
        let (mut a, mut b) = (g(i), g(i + 1));
        if (fig1_curve(a) - lambda).signum() == (fig1_curve(b) - lambda).signum() {
            continue;
        }
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            if (fig1_curve(a) - lambda).signum() == (fig1_curve(m) - lambda).signum() {
                a = m;
            } else {
                b = m;
            }
        }
        out.push(0.5 * (a + b));
    }
    out
}

/// Lebesgue measure of {v in [0, 1] : curve(v) ≤ lambda}.
pub fn fig1_satisfaction(lambda: f64) -> f64 {
    let mut edges = vec![0.0];
    edges.extend(fig1_crossings(lambda));
    edges.push(1.0);
    edges
        .windows(2)
        .filter(|w| fig1_curve(0.5 * (w[0] + w[1])) <= lambda)
        .map(|w| w[1] - w[0])
        .sum()
}

/// Confidence for tolerance ν = p / 2^bits from its defining sum, in exact
/// integer arithmetic scaled by 2^(bits·K), rounded once at the end.
pub fn dyadic_alpha(k: usize, l: usize, w: usize, p: u64, bits: u32) -> f64 {
    fn choose(n: usize, r: usize) -> BigInt {
        let mut acc = BigInt::one();
        for j in 1..=r {
            acc = acc * BigInt::from(n + 1 - j) / BigInt::from(j);
        }
        acc
    }
    let one = BigInt::one() << bits;
    let nu = BigInt::from(p);
    let q = &one - &nu;
    let top = (l + w + 1).min(k);
    let mut q_pow = vec![BigInt::one(); k + 1];
    for i in 1..=k {
        q_pow[i] = &q_pow[i - 1] * &q;
    }
    let mut sum = BigInt::zero();
    let mut nu_pow = BigInt::one();
    for i in 0..=top {
        sum += choose(k, i) * &q_pow[k - i] * &nu_pow;
        nu_pow *= &nu;
    }
    let scale = BigInt::one() << (bits as usize * k);
    BigRational::new(choose(l + w + 1, l) * sum, scale)
        .to_f64()
        .expect("finite")
}

/// Random MDP as rows of choices, each a list of (successor, probability).
/// State `n - 1` is the target and `n - 2` an absorbing trap.
pub fn random_mdp(
    rng: &mut ChaCha8Rng,
    n: usize,
    max_actions: usize,
) -> Vec<Vec<Vec<(usize, f64)>>> {
    let mut rows = Vec::with_capacity(n);
    for s in 0..n {
        if s + 2 >= n {
            rows.push(vec![vec![(s, 1.0)]]);
            continue;
        }
        let actions = rng.random_range(1..=max_actions);
        let mut row = Vec::with_capacity(actions);
        for _ in 0..actions {
            let mut succ: Vec<usize> = (0..n).collect();
            succ.shuffle(rng);
            succ.truncate(rng.random_range(1..=3.min(n)));
            let weights: Vec<f64> = succ.iter().map(|_| rng.random_range(0.05..1.0)).collect();
            let total: f64 = weights.iter().sum();
            let mut choice: Vec<(usize, f64)> = succ
                .into_iter()
                .zip(weights)
                .map(|(t, w)| (t, w / total))
                .collect();
            // exact row sums
            let rest: f64 = choice[1..].iter().map(|e| e.1).sum();
            choice[0].1 = 1.0 - rest;
            row.push(choice);
        }
        rows.push(row);
    }
    rows
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Every memoryless deterministic policy, as one choice index per state.
pub fn all_policies(rows: &[Vec<Vec<(usize, f64)>>]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for row in rows {
        out = out
            .into_iter()
            .flat_map(|p| (0..row.len()).map(move |a| [p.clone(), vec![a]].concat()))
            .collect();
    }
    out
}

/// States that reach one of `goal` in the chain a policy induces.
fn reaches(rows: &[Vec<Vec<(usize, f64)>>], policy: &[usize], goal: &[bool]) -> Vec<bool> {
    let n = rows.len();
    let mut can = goal.to_vec();
    loop {
        let mut changed = false;
        for s in 0..n {
            if !can[s] && rows[s][policy[s]].iter().any(|&(t, p)| p > 0.0 && can[t]) {
                can[s] = true;
                changed = true;
            }
        }
        if !changed {
            return can;
        }
    }
}

/// Probability of reaching `target` from every state under a fixed policy.
pub fn policy_reachability(
    rows: &[Vec<Vec<(usize, f64)>>],
    policy: &[usize],
    target: usize,
) -> Vec<f64> {
    let n = rows.len();
    let mut goal = vec![false; n];
    goal[target] = true;
    let can = reaches(rows, policy, &goal);
    let maybe: Vec<usize> = (0..n).filter(|&s| can[s] && s != target).collect();
    let pos = |s: usize| maybe.iter().position(|&m| m == s);
    let mut a = vec![vec![0.0; maybe.len()]; maybe.len()];
    let mut b = vec![0.0; maybe.len()];
    for (i, &s) in maybe.iter().enumerate() {
        a[i][i] += 1.0;
        for &(t, p) in &rows[s][policy[s]] {
            if t == target {
                b[i] += p;
            } else if let Some(j) = pos(t) {
                a[i][j] -= p;
            }
        }
    }
    let x = dense_solve(a, b);
    let mut out = vec![0.0; n];
    out[target] = 1.0;
    for (i, &s) in maybe.iter().enumerate() {
        out[s] = x[i];
    }
    out
}

/// Expected cost to reach `goal` under a fixed policy, or None where the goal
/// is missed with positive probability.
pub fn policy_cost(
    rows: &[Vec<Vec<(usize, f64)>>],
    costs: &[Vec<f64>],
    policy: &[usize],
    goal: usize,
) -> Vec<Option<f64>> {
    let n = rows.len();
    let mut at_goal = vec![false; n];
    at_goal[goal] = true;
    let bad: Vec<bool> = reaches(rows, policy, &at_goal)
        .iter()
        .map(|&c| !c)
        .collect();
    let risky = reaches(rows, policy, &bad);
    let sure: Vec<usize> = (0..n).filter(|&s| s != goal && !risky[s]).collect();
    let pos = |s: usize| sure.iter().position(|&m| m == s);
    let mut a = vec![vec![0.0; sure.len()]; sure.len()];
    let mut b = vec![0.0; sure.len()];
    for (i, &s) in sure.iter().enumerate() {
        a[i][i] += 1.0;
        b[i] = costs[s][policy[s]];
        for &(t, p) in &rows[s][policy[s]] {
            if let Some(j) = pos(t) {
                a[i][j] -= p;
            }
        }
    }
    let x = dense_solve(a, b);
    let mut out = vec![None; n];
    out[goal] = Some(0.0);
    for (i, &s) in sure.iter().enumerate() {
        out[s] = Some(x[i]);
    }
    out
}

pub fn concrete(rows: Vec<Vec<Vec<(usize, f64)>>>, costs: Option<Vec<Vec<f64>>>) -> ConcreteModel {
    ConcreteModel::from_rows(0, rows, costs).expect("generated rows are stochastic")
}

fn poly(s: &str) -> Polynomial {
    Polynomial::parse(s).unwrap_or_else(|e| panic!("{s}: {e}"))
}

/// Random pMC or pMDP over parameters p and q, each uniform on [0.1, 0.9].
/// Every transition stays positive on that box. State `n - 1` is the target.
pub fn random_parametric(rng: &mut ChaCha8Rng, n: usize, mdp: bool) -> UncertainModel {
    let templates: [&[&str]; 4] = [
        &["1/4 + p/4", "3/4 - p/4"],
        &["p/2", "1/2", "1/2 - p/2"],
        &["p*q", "1 - p*q"],
        &["1/3", "q/3 + 1/6", "1/2 - q/3"],
    ];
    let mut choices = Vec::with_capacity(n);
    for s in 0..n {
        if s + 2 >= n {
            choices.push(vec![Choice {
                action: 0,
                transitions: vec![(s, poly("1"))],
                cost: None,
            }]);
            continue;
        }
        let actions = if mdp { rng.random_range(1..=3) } else { 1 };
        let mut row = Vec::with_capacity(actions);
        for a in 0..actions {
            let t = templates[rng.random_range(0..templates.len())];
            // mostly forward edges, so the target stays likely reachable
            let succ: Vec<usize> = (0..t.len())
                .map(|_| {
                    if rng.random_bool(0.8) {
                        rng.random_range(s + 1..n)
                    } else {
                        rng.random_range(0..n)
                    }
                })
                .collect();
            let transitions = t.iter().zip(succ).map(|(p, x)| (x, poly(p))).collect();
            row.push(Choice {
                action: a,
                transitions,
                cost: None,
            });
        }
        choices.push(row);
    }
    let model = ParametricModel::new(ModelParts {
        name: format!("random{n}"),
        states: (0..n).map(|s| format!("s{s}")).collect(),
        actions: vec!["a".into(), "b".into(), "c".into()],
        choices,
        initial: 0,
        parameters: vec![
            Parameter::uncontrollable("p"),
            Parameter::uncontrollable("q"),
        ],
        target: vec![n - 1],
        goal: None,
        declared_mc: !mdp,
    })
    .expect("generated model is valid");
    let uniform = |param: &str| Block::Single {
        param: param.into(),
        marginal: Marginal::Uniform {
            low: 0.1,
            high: 0.9,
        },
    };
    let distribution = ParameterDistribution::new(vec![uniform("p"), uniform("q")]);
    UncertainModel {
        model,
        distribution,
    }
}

/// Chain s0 → s1 → … → s_{n-1} where the first step succeeds with probability
/// p and fails into an absorbing trap otherwise. Reachability of the end is p
/// whatever the length.
pub fn chain(n: usize) -> UncertainModel {
    assert!(n >= 3);
    let end = n - 2;
    let trap = n - 1;
    let mut choices = Vec::with_capacity(n);
    choices.push(vec![Choice {
        action: 0,
        transitions: vec![(1, poly("p")), (trap, poly("1 - p"))],
        cost: None,
    }]);
    for s in 1..n - 1 {
        let next = if s == end { s } else { s + 1 };
        choices.push(vec![Choice {
            action: 0,
            transitions: vec![(next, poly("1"))],
            cost: None,
        }]);
    }
    choices.push(vec![Choice {
        action: 0,
        transitions: vec![(trap, poly("1"))],
        cost: None,
    }]);
    let model = ParametricModel::new(ModelParts {
        name: format!("chain{n}"),
        states: (0..n).map(|s| format!("s{s}")).collect(),
        actions: vec!["tau".into()],
        choices,
        initial: 0,
        parameters: vec![Parameter::uncontrollable("p")],
        target: vec![end],
        goal: None,
        declared_mc: true,
    })
    .expect("chain is valid");
    UncertainModel {
        model,
        distribution: ParameterDistribution::uniform("p", 0.0, 1.0),
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}
