//! Quick end-to-end checks of the worked examples, runnable from the binary.

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::checker::{self, Checker, GraphAnalysis};
use crate::costsyn::{self, BuildMode, CostSynOptions};
use crate::model::{
    Choice, ConcreteModel, ModelParts, ParametricModel, PolicyObjective, Specification,
};
use crate::modelio::{self, analog_models, generate_fig1, FIG1_LAMBDA};
use crate::polynomial::{Parameter, Polynomial};
use crate::sampling;
use crate::scenario::{self, ConfidenceResult};

pub type Check = (&'static str, fn() -> Result<(), String>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(a: f64, b: f64, tol: f64, what: &str) -> Result<(), String> {
    ensure((a - b).abs() <= tol, || format!("{what}: {a} vs {b}"))
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Reachability of the running example as a closed form in v.
pub fn fig1_curve(v: f64) -> f64 {
    0.5 * v.powi(3) * (1.0 - v)
        + 0.1 * v.powi(6) * (1.0 - v)
        + 0.1 * v * (1.0 - v).powi(3)
        + 0.1 * (1.0 - v).powi(2)
        + 0.04
        + 0.05 * v
}

fn fig1_verdicts() -> Result<(), String> {
    let um = generate_fig1();
    let m = &um.model;
    let ck =
        Checker::new(m, Specification::reach_at_most(FIG1_LAMBDA).map_err(err)?).map_err(err)?;
    for (v, sat) in [(0.3, true), (0.7, false), (0.95, true), (0.5, true)] {
        let r = ck.check(0, &m.valuation([("v", v)])).map_err(err)?;
        close(
            r.value_at_init,
            fig1_curve(v),
            1e-7,
            &format!("value at v = {v}"),
        )?;
        ensure(r.satisfied == sat, || format!("verdict at v = {v}"))?;
    }
    let unreachable: Vec<&str> = (0..m.num_states())
        .filter(|&s| ck.analysis().cannot_reach_target[s])
        .map(|s| m.states()[s].as_str())
        .collect();
    ensure(unreachable == ["s6", "s7"], || {
        format!("states that cannot reach the target: {unreachable:?}")
    })
}

fn fig1_linear_solve() -> Result<(), String> {
    let um = generate_fig1();
    let m = &um.model;
    let ck =
        Checker::new(m, Specification::reach_at_most(FIG1_LAMBDA).map_err(err)?).map_err(err)?;
    let c = ck.instantiate(&m.valuation([("v", 0.5)])).map_err(err)?;
    let r = checker::reachability_value(&c, ck.analysis(), PolicyObjective::Min).map_err(err)?;
    let exact =
        checker::reachability_linear_solve(&c, ck.analysis(), &r.policy, PolicyObjective::Min)
            .map_err(err)?;
    close(exact[0], 0.12828125, 1e-12, "linear solve at v = 0.5")?;
    close(r.values[0], exact[0], 1e-8, "iteration vs linear solve")
}

fn chain(rows: Vec<Vec<Vec<(usize, f64)>>>, costs: Vec<Vec<f64>>) -> Result<ConcreteModel, String> {
    ConcreteModel::from_rows(0, rows, Some(costs)).map_err(err)
}

fn expected_costs() -> Result<(), String> {
    let c = chain(
        vec![vec![vec![(1, 1.0)]], vec![vec![(1, 1.0)]]],
        vec![vec![3.0], vec![0.0]],
    )?;
    let a = GraphAnalysis::new(c.topology(), &[1], Some(&[1])).map_err(err)?;
    let r = checker::expected_cost_value(&c, &a, PolicyObjective::Max).map_err(err)?;
    close(r.values[0], 3.0, 1e-8, "one-step cost")?;
    close(r.values[1], 0.0, 0.0, "cost at the goal")?;
    let c = chain(
        vec![vec![vec![(1, 0.25), (0, 0.75)]], vec![vec![(1, 1.0)]]],
        vec![vec![1.0], vec![0.0]],
    )?;
    let a = GraphAnalysis::new(c.topology(), &[1], Some(&[1])).map_err(err)?;
    let r = checker::expected_cost_value(&c, &a, PolicyObjective::Max).map_err(err)?;
    close(r.values[0], 4.0, 4e-8, "geometric cost")
}

fn ill_defined_cost() -> Result<(), String> {
    let c = chain(
        vec![
            vec![vec![(1, 0.5), (2, 0.5)]],
            vec![vec![(1, 1.0)]],
            vec![vec![(2, 1.0)]],
        ],
        vec![vec![1.0], vec![0.0], vec![0.0]],
    )?;
    let a = GraphAnalysis::new(c.topology(), &[1], Some(&[1])).map_err(err)?;
    ensure(
        a.check_cost_well_defined(0, PolicyObjective::Max).is_err(),
        || "trap not detected".into(),
    )
}

fn confidence_formulas() -> Result<(), String> {
    close(
        scenario::alpha_t1(2, 0.0).map_err(err)?,
        1.0,
        0.0,
        "K = 2, nu = 0",
    )?;
    close(
        scenario::alpha_t1(10, 0.5).map_err(err)?,
        11.0 / 1024.0,
        1e-15,
        "K = 10, nu = 0.5",
    )?;
    let a = scenario::alpha_t1(100, 0.05).map_err(err)?;
    close(
        a,
        0.95f64.powi(100) + 100.0 * 0.95f64.powi(99) * 0.05,
        1e-14,
        "K = 100, nu = 0.05",
    )?;
    for &(k, l, w, p) in &[
        (100usize, 10usize, 0usize, 1229i64),
        (50, 0, 3, 410),
        (200, 5, 2, 819),
    ] {
        let nu = p as f64 / 4096.0;
        let exact = scenario::exact_alpha(
            k,
            l,
            w,
            &BigRational::new(BigInt::from(p), BigInt::from(4096)),
        );
        let exact = scenario::rational_to_f64(&exact).min(1.0);
        let got = ConfidenceResult::for_nu(k, l, w, nu).map_err(err)?.alpha;
        ensure(((got - exact) / exact).abs() < 1e-12, || {
            format!("({k}, {l}, {w}, {nu}): {got} vs {exact}")
        })?;
    }
    close(
        scenario::alpha_t2(300, 0, 0.1).map_err(err)?,
        scenario::alpha_t1(300, 0.1).map_err(err)?,
        0.0,
        "T2 at L = 0",
    )?;
    close(
        scenario::alpha_t4(300, 4, 0, 0.1).map_err(err)?,
        scenario::alpha_t2(300, 4, 0.1).map_err(err)?,
        0.0,
        "T4 at W = 0",
    )
}

fn bisection() -> Result<(), String> {
    for &(k, l, target) in &[(100usize, 0usize, 0.05), (1000, 30, 1e-6)] {
        let nu = scenario::solve_nu(k, l, 0, target).map_err(err)?;
        let at = ConfidenceResult::for_nu(k, l, 0, nu).map_err(err)?.alpha;
        let below = ConfidenceResult::for_nu(k, l, 0, nu - 1e-6)
            .map_err(err)?
            .alpha;
        ensure(at <= target && below > target, || {
            format!("bisection for K = {k}, L = {l}")
        })?;
    }
    Ok(())
}

fn scenario_program() -> Result<(), String> {
    let um = generate_fig1();
    let m = &um.model;
    let ck =
        Checker::new(m, Specification::reach_at_most(FIG1_LAMBDA).map_err(err)?).map_err(err)?;
    let us: Vec<_> = [0.2, 0.3, 0.4]
        .iter()
        .map(|&v| m.valuation([("v", v)]))
        .collect();
    let r = checker::scenario_lp_reach(&ck, &us).map_err(err)?;
    ensure(r.feasible, || {
        "samples 0.2, 0.3, 0.4 should be feasible".into()
    })?;
    close(r.tau, fig1_curve(0.2), 1e-7, "tau")?;
    let mono = checker::scenario_lp_reach_monolithic(&ck, &us).map_err(err)?;
    close(mono, r.tau, 1e-6, "monolithic tau")?;
    let us: Vec<_> = [0.3, 0.7]
        .iter()
        .map(|&v| m.valuation([("v", v)]))
        .collect();
    ensure(
        !checker::scenario_lp_reach(&ck, &us).map_err(err)?.feasible,
        || "0.7 should violate".into(),
    )?;
    let empty = checker::scenario_lp_reach(&ck, &[]).map_err(err)?;
    ensure(
        empty.feasible && empty.degenerate && empty.tau == 0.0,
        || "empty sample set".into(),
    )
}

fn cost_synthesis() -> Result<(), String> {
    let p = |s: &str| Polynomial::parse(s).map_err(err);
    let m = ParametricModel::new(ModelParts {
        name: "geo".into(),
        states: vec!["s0".into(), "g".into()],
        actions: vec!["a".into()],
        choices: vec![
            vec![Choice {
                action: 0,
                transitions: vec![(1, p("p")?), (0, p("1 - p")?)],
                cost: Some(p("1 + 2*w1")?),
            }],
            vec![Choice {
                action: 0,
                transitions: vec![(1, p("1")?)],
                cost: None,
            }],
        ],
        initial: 0,
        parameters: vec![Parameter::uncontrollable("p"), Parameter::cost("w1")],
        target: vec![1],
        goal: Some(vec![1]),
        declared_mc: true,
    })
    .map_err(err)?;
    let us = vec![m.valuation([("p", 0.5)]), m.valuation([("p", 0.25)])];
    let spec = Specification::cost_at_most(10.0).map_err(err)?;
    for mode in [BuildMode::Reduced, BuildMode::Monolithic] {
        let r = costsyn::synthesize(
            &m,
            &us,
            spec,
            &CostSynOptions {
                mode,
                ..Default::default()
            },
        )
        .map_err(err)?;
        close(r.tau, 4.0, 1e-6, &format!("{mode:?} optimum"))?;
    }
    Ok(())
}

fn sampling_determinism() -> Result<(), String> {
    let um = generate_fig1();
    let a = sampling::draw(&um.distribution, &um.model, 50, 9).map_err(err)?;
    let b = sampling::draw(&um.distribution, &um.model, 50, 9).map_err(err)?;
    let c = sampling::draw_range(&um.distribution, &um.model, 0..20, 9).map_err(err)?;
    ensure(a == b, || "same seed, different samples".into())?;
    ensure(a.samples[..20] == c.samples[..], || {
        "prefix property".into()
    })
}

fn bundled_models() -> Result<(), String> {
    for b in analog_models() {
        let um = b.load();
        let text = modelio::serialize(&um);
        let again = modelio::parse(&text).map_err(err)?;
        ensure(modelio::serialize(&again) == text, || {
            format!("{} does not round-trip", b.name)
        })?;
        Checker::new(&um.model, b.spec).map_err(err)?;
    }
    Ok(())
}

/// Every check with its name.
pub fn checks() -> Vec<Check> {
    vec![
        ("fig1 verdicts", fig1_verdicts),
        ("fig1 linear solve", fig1_linear_solve),
        ("expected costs", expected_costs),
        ("ill-defined expected cost", ill_defined_cost),
        ("confidence formulas", confidence_formulas),
        ("tolerance bisection", bisection),
        ("scenario program", scenario_program),
        ("cost synthesis", cost_synthesis),
        ("sampling determinism", sampling_determinism),
        ("bundled models", bundled_models),
    ]
}

#[cfg(test)]
mod tests {
    #[test]
    fn every_check_passes() {
        for (name, f) in super::checks() {
            if let Err(e) = f() {
                panic!("{name}: {e}");
            }
        }
    }
}
