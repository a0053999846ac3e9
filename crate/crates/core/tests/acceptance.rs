//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Tolerances and runtime budgets are pinned below. The process exits 0 and
//! prints a summary so that the remaining test targets still run; set
//! `ACCEPTANCE_STRICT=1` to turn any FAIL into a nonzero exit status.

mod common;

use std::time::{Duration, Instant};

use common::{
    all_policies, chain, concrete, dyadic_alpha, fig1_crossings, fig1_curve, fig1_satisfaction,
    policy_cost, policy_reachability, random_mdp, random_parametric, rng,
};
use rand::Rng;
use scenverify::checker::{self, Checker, GraphAnalysis};
use scenverify::costsyn::{self, BuildMode, CostSynOptions};
use scenverify::model::{Choice, Direction, ModelParts, PolicyObjective, SpecKind};
use scenverify::modelio::uav::{generate_uav, UavConfig, UavPreset};
use scenverify::modelio::{analog_models, generate_fig1, parse, FIG1_LAMBDA};
use scenverify::scenario::{self, EstimateMode, EstimateOptions, EstimationReport};
use scenverify::{sampling, Parameter, ParametricModel, Polynomial, Specification};

/// Satisfying set and satisfaction probability stated for the running example.
const STATED_ENDPOINTS: [f64; 3] = [0.13, 0.525, 0.89];
const STATED_F: f64 = 0.505;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within_budget(elapsed: Duration, secs: f64) -> bool {
    elapsed.as_secs_f64() < secs
}

/// Curve of the running example on a 101-point grid and its satisfying set.
fn fig1_reproduction() -> Outcome {
    let start = Instant::now();
    let um = generate_fig1();
    let m = &um.model;
    let ck = Checker::new(m, Specification::reach_at_most(FIG1_LAMBDA).unwrap()).unwrap();
    let value = |v: f64| {
        ck.check_any(0, &m.valuation([("v", v)]))
            .unwrap()
            .value_at_init
    };
    let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    let values: Vec<f64> = grid.iter().map(|&v| value(v)).collect();
    let max_err = grid
        .iter()
        .zip(&values)
        .map(|(&v, &x)| (x - fig1_curve(v)).abs())
        .fold(0.0, f64::max);
    // sign changes of value − λ on the grid, refined by bisection
    let mut crossings = Vec::new();
    for i in 0..100 {
        let (fa, fb) = (values[i] - FIG1_LAMBDA, values[i + 1] - FIG1_LAMBDA);
        if (fa > 0.0) == (fb > 0.0) {
            continue;
        }
        let (mut a, mut b) = (grid[i], grid[i + 1]);
        for _ in 0..40 {
            let mid = 0.5 * (a + b);
            if (value(mid) - FIG1_LAMBDA > 0.0) == (fa > 0.0) {
                a = mid;
            } else {
                b = mid;
            }
        }
        crossings.push(0.5 * (a + b));
    }
    let elapsed = start.elapsed();
    let endpoints_ok = crossings.len() == 3
        && crossings
            .iter()
            .zip(STATED_ENDPOINTS)
            .all(|(c, e)| (c - e).abs() <= 0.005)
        && values[100] <= FIG1_LAMBDA;
    let oracle: Vec<String> = fig1_crossings(FIG1_LAMBDA)
        .iter()
        .map(|c| format!("{c:.5}"))
        .collect();
    let found: Vec<String> = crossings.iter().map(|c| format!("{c:.5}")).collect();
    outcome(
        max_err <= 1e-7 && endpoints_ok && within_budget(elapsed, 1.0),
        format!(
            "max |value - oracle| = {max_err:.2e}; satisfying set [{}] and [{}, 1] vs stated [0.13, 0.525] and [0.89, 1] (oracle crossings {})",
            found.first().map_or("-".into(), |c| format!("{c}, {}", found.get(1).map_or("-", |s| s.as_str()))),
            found.get(2).map_or("-", |s| s.as_str()),
            oracle.join(", ")
        ),
    )
}

/// Monte Carlo satisfaction probability of the running example.
fn satisfaction_ground_truth() -> Outcome {
    let start = Instant::now();
    let um = generate_fig1();
    let ck = Checker::new(
        &um.model,
        Specification::reach_at_most(FIG1_LAMBDA).unwrap(),
    )
    .unwrap();
    let samples = sampling::draw(&um.distribution, &um.model, 100_000, 2024).unwrap();
    let verdicts = ck.check_all(&samples.samples).unwrap();
    let f_hat = verdicts.iter().filter(|v| v.satisfied).count() as f64 / 100_000.0;
    let elapsed = start.elapsed();
    let exact = fig1_satisfaction(FIG1_LAMBDA);
    outcome(
        (f_hat - STATED_F).abs() <= 0.006 && within_budget(elapsed, 30.0),
        format!(
            "estimate {f_hat:.5} vs stated {STATED_F} +- 0.006; the model's exact F is {exact:.5} (|diff| = {:.5})",
            (f_hat - exact).abs()
        ),
    )
}

/// Log-space confidence against exact integer arithmetic.
fn confidence_exactness() -> Outcome {
    let start = Instant::now();
    let mut r = rng(3);
    let mut worst: f64 = 0.0;
    let mut tuples = 0;
    let mut clamped = 0;
    while tuples < 200 {
        let k = r.random_range(2..=1000usize);
        let w = r.random_range(0..=3usize);
        let l = if r.random_bool(0.3) {
            0
        } else {
            r.random_range(0..=60usize.min(k))
        };
        if l + w + 1 >= k {
            continue;
        }
        // tolerances around (L + W + 1) / K keep α away from 0 and 1
        let scale = (l + w + 1) as f64 / k as f64 * r.random_range(0.8..6.0);
        let p = ((scale.min(0.999) * 4096.0) as u64).clamp(1, 4095);
        let nu = p as f64 / 4096.0;
        let exact = dyadic_alpha(k, l, w, p, 12);
        if exact < 1e-300 {
            continue;
        }
        let got = match (l, w) {
            (0, 0) => scenario::alpha_t1(k, nu),
            (_, 0) => scenario::alpha_t2(k, l, nu),
            (0, _) => scenario::alpha_t3(k, w, nu),
            _ => scenario::alpha_t4(k, l, w, nu),
        }
        .unwrap();
        if exact >= 1.0 {
            clamped += 1;
        }
        let want = exact.min(1.0);
        worst = worst.max(((got - want) / want).abs());
        tuples += 1;
    }
    let elapsed = start.elapsed();
    outcome(
        worst < 1e-12 && within_budget(elapsed, 10.0),
        format!("{tuples} tuples with K <= 1000 ({clamped} at the clamp); worst relative error {worst:.2e}"),
    )
}

/// Frequency with which the reported bound overshoots the true probability.
fn coverage() -> Outcome {
    let start = Instant::now();
    let um = generate_fig1();
    let spec = Specification::reach_at_most(FIG1_LAMBDA).unwrap();
    let exact = fig1_satisfaction(FIG1_LAMBDA);
    let (mut over_stated, mut over_exact) = (0, 0);
    let trials = 500;
    for t in 0..trials {
        let opts = EstimateOptions::new(100, 1_000_000 + t, EstimateMode::FixedAlpha(0.05));
        let bound = scenario::estimate(&um, spec, &opts)
            .unwrap()
            .report
            .satisfaction_lower_bound;
        over_stated += usize::from(bound > STATED_F);
        over_exact += usize::from(bound > exact);
    }
    let elapsed = start.elapsed();
    let freq = over_stated as f64 / trials as f64;
    outcome(
        freq <= 0.08 && within_budget(elapsed, 300.0),
        format!(
            "bound above {STATED_F} in {over_stated}/{trials} trials ({freq:.3}); above the exact F {exact:.5} in {over_exact}/{trials}"
        ),
    )
}

/// Joint scenario LP against the per-sample decomposition.
fn scenario_decomposition() -> Outcome {
    let start = Instant::now();
    let mut r = rng(17);
    let mut worst: f64 = 0.0;
    let mut sizes = Vec::new();
    for i in 0..20 {
        let n = 5 + i * 25;
        let mdp = i % 2 == 1;
        let um = random_parametric(&mut r, n, mdp);
        let objective = if i % 4 == 3 {
            PolicyObjective::Max
        } else {
            PolicyObjective::Min
        };
        let spec = Specification::with_objective(
            SpecKind::Reachability,
            0.5,
            Direction::AtMost,
            objective,
        )
        .unwrap();
        let ck = Checker::new(&um.model, spec).unwrap();
        let us = sampling::draw(&um.distribution, &um.model, 10, i as u64)
            .unwrap()
            .samples;
        let joint = checker::scenario_lp_reach_monolithic(&ck, &us).unwrap();
        let split = checker::scenario_lp_reach(&ck, &us).unwrap().tau;
        worst = worst.max((joint - split).abs());
        sizes.push(n);
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-6 && within_budget(elapsed, 120.0),
        format!(
            "20 models with {} to {} states x 10 samples; worst |joint - max| = {worst:.2e}",
            sizes[0], sizes[19]
        ),
    )
}

/// Iterative values against exhaustive enumeration of memoryless policies.
fn policy_optimality() -> Outcome {
    let start = Instant::now();
    let mut r = rng(6);
    let (mut worst_reach, mut worst_cost): (f64, f64) = (0.0, 0.0);
    let mut mismatched_domains = 0;
    for _ in 0..200 {
        let n = r.random_range(2..=6usize);
        let rows = random_mdp(&mut r, n, 3);
        let costs: Vec<Vec<f64>> = rows
            .iter()
            .map(|row| row.iter().map(|_| r.random_range(0.0..5.0)).collect())
            .collect();
        let target = n - 1;
        let policies = all_policies(&rows);
        let reach: Vec<Vec<f64>> = policies
            .iter()
            .map(|p| policy_reachability(&rows, p, target))
            .collect();
        let cost: Vec<Option<f64>> = policies
            .iter()
            .map(|p| policy_cost(&rows, &costs, p, target)[0])
            .collect();
        let c = concrete(rows, Some(costs));
        let a = GraphAnalysis::new(c.topology(), &[target], Some(&[target])).unwrap();
        for obj in [PolicyObjective::Min, PolicyObjective::Max] {
            let v = checker::reachability_value(&c, &a, obj).unwrap();
            for s in 0..n {
                let col = reach.iter().map(|x| x[s]);
                let best = match obj {
                    PolicyObjective::Min => col.fold(f64::INFINITY, f64::min),
                    PolicyObjective::Max => col.fold(f64::NEG_INFINITY, f64::max),
                };
                worst_reach = worst_reach.max((v.values[s] - best).abs());
            }
            let best = match obj {
                PolicyObjective::Min => {
                    cost.iter().flatten().copied().fold(f64::INFINITY, f64::min)
                }
                PolicyObjective::Max if cost.iter().all(Option::is_some) => cost
                    .iter()
                    .flatten()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max),
                PolicyObjective::Max => f64::INFINITY,
            };
            match (a.check_cost_well_defined(0, obj), best.is_finite()) {
                (Ok(()), true) => {
                    let v = checker::expected_cost_value(&c, &a, obj).unwrap();
                    worst_cost = worst_cost.max((v.values[0] - best).abs() / best.max(1.0));
                }
                (Err(_), false) => {}
                _ => mismatched_domains += 1,
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst_reach <= 1e-8 && worst_cost <= 1e-8 && mismatched_domains == 0 && within_budget(elapsed, 60.0),
        format!(
            "200 MDPs with <= 6 states and <= 3 actions; worst reachability error {worst_reach:.2e}, worst relative cost error {worst_cost:.2e}, {mismatched_domains} disagreements on finiteness"
        ),
    )
}

/// Cost synthesis: evaluation without cost parameters, closed form, mode agreement.
fn cost_synthesis() -> Outcome {
    let start = Instant::now();
    let maintenance = analog_models()
        .into_iter()
        .find(|b| b.name == "maintenance")
        .unwrap();
    let max_spec = |kappa| {
        Specification::with_objective(
            SpecKind::ExpectedCost,
            kappa,
            Direction::AtMost,
            PolicyObjective::Max,
        )
        .unwrap()
    };

    // no cost parameters: the program evaluates the samples
    let text = maintenance
        .source
        .replace("param wa cost\n", "")
        .replace("param wb cost\n", "");
    let fixed = parse(
        &text
            .replace("wa/2", "1/4")
            .replace("wa", "1/2")
            .replace("wb", "3/2"),
    )
    .unwrap();
    let us = sampling::draw(&fixed.distribution, &fixed.model, 20, 4)
        .unwrap()
        .samples;
    let mut w0_err: f64 = 0.0;
    for (spec, mode) in [
        (
            Specification::cost_at_most(12.0).unwrap(),
            BuildMode::Reduced,
        ),
        (max_spec(12.0), BuildMode::Reduced),
        (max_spec(12.0), BuildMode::Monolithic),
    ] {
        let ck = Checker::new(&fixed.model, spec).unwrap();
        let r = costsyn::synthesize(
            &fixed.model,
            &us,
            spec,
            &CostSynOptions {
                mode,
                ..Default::default()
            },
        )
        .unwrap();
        let values: Vec<f64> = us
            .iter()
            .enumerate()
            .map(|(i, u)| ck.check(i, u).unwrap().value_at_init)
            .collect();
        for (a, b) in r.per_sample_costs.iter().zip(&values) {
            w0_err = w0_err.max((a - b).abs());
        }
        let worst = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        w0_err = w0_err
            .max((r.tau - worst).abs())
            .max((r.lp_objective - worst).abs());
    }

    // three-state chain with cost 1 + 2 w1: τ* = (1 + 2·0) / 0.25
    let p = |s: &str| Polynomial::parse(s).unwrap();
    let geo = ParametricModel::new(ModelParts {
        name: "geometric".into(),
        states: vec!["s0".into(), "g".into(), "x".into()],
        actions: vec!["a".into()],
        choices: vec![
            vec![Choice {
                action: 0,
                transitions: vec![(1, p("p")), (0, p("1 - p"))],
                cost: Some(p("1 + 2*w1")),
            }],
            vec![Choice {
                action: 0,
                transitions: vec![(1, p("1"))],
                cost: None,
            }],
            vec![Choice {
                action: 0,
                transitions: vec![(1, p("1"))],
                cost: None,
            }],
        ],
        initial: 0,
        parameters: vec![Parameter::uncontrollable("p"), Parameter::cost("w1")],
        target: vec![1],
        goal: Some(vec![1]),
        declared_mc: true,
    })
    .unwrap();
    let gs = vec![geo.valuation([("p", 0.5)]), geo.valuation([("p", 0.25)])];
    let mut geo_err: f64 = 0.0;
    for mode in [BuildMode::Reduced, BuildMode::Monolithic] {
        let r = costsyn::synthesize(
            &geo,
            &gs,
            Specification::cost_at_most(10.0).unwrap(),
            &CostSynOptions {
                mode,
                ..Default::default()
            },
        )
        .unwrap();
        geo_err = geo_err
            .max((r.tau - 4.0).abs())
            .max((r.lp_objective - 4.0).abs());
    }

    // reduced against monolithic with two cost parameters
    let um = maintenance.load();
    let mut mode_err: f64 = 0.0;
    for (seed, budget) in [(1, None), (2, Some(3.0)), (3, Some(10.0)), (4, Some(0.5))] {
        let us = sampling::draw(&um.distribution, &um.model, 25, seed)
            .unwrap()
            .samples;
        let run = |mode| {
            costsyn::synthesize(
                &um.model,
                &us,
                max_spec(12.0),
                &CostSynOptions {
                    mode,
                    budget,
                    ..Default::default()
                },
            )
            .unwrap()
            .lp_objective
        };
        mode_err = mode_err.max((run(BuildMode::Reduced) - run(BuildMode::Monolithic)).abs());
    }
    let elapsed = start.elapsed();
    outcome(
        w0_err <= 1e-6 && geo_err <= 1e-6 && mode_err <= 1e-6 && within_budget(elapsed, 60.0),
        format!("W = 0 error {w0_err:.2e}; geometric optimum error {geo_err:.2e}; reduced vs monolithic {mode_err:.2e}"),
    )
}

/// UAV gridworld at desk scale, full run plus the preset ordering.
fn uav_desk_scale() -> Outcome {
    let spec = Specification::reach_at_least(0.9).unwrap();
    let start = Instant::now();
    let um = generate_uav(&UavConfig::desk()).unwrap();
    let opts = EstimateOptions::new(1000, 1, EstimateMode::FixedAlpha(1e-6));
    let report = scenario::estimate(&um, spec, &opts).unwrap().report;
    let full = start.elapsed();
    let parsed: EstimationReport = serde_json::from_str(&report.to_json()).unwrap();
    let valid = parsed == report
        && report.k == 1000
        && report.sat.alpha <= 1e-6
        && (0.0..=1.0).contains(&report.satisfaction_lower_bound)
        && report.satisfaction_lower_bound <= report.empirical_satisfaction;

    // five seeds per preset at a smaller sample size
    let k = 200;
    let mut means = Vec::new();
    for preset in [UavPreset::Uniform, UavPreset::BiasY, UavPreset::BiasNegX] {
        let mut cfg = UavConfig::desk();
        cfg.preset = preset;
        let um = generate_uav(&cfg).unwrap();
        let rates: Vec<f64> = (1..=5)
            .map(|seed| {
                let opts = EstimateOptions::new(k, seed, EstimateMode::FixedAlpha(1e-6));
                scenario::estimate(&um, spec, &opts)
                    .unwrap()
                    .report
                    .empirical_satisfaction
            })
            .collect();
        means.push((preset.name(), rates.iter().sum::<f64>() / 5.0));
    }
    let ordered = means[0].1 >= means[1].1 && means[0].1 >= means[2].1;
    let summary: Vec<String> = means.iter().map(|(n, m)| format!("{n} {m:.3}")).collect();
    outcome(
        valid && ordered && within_budget(full, 600.0),
        format!(
            "{} states; K = 1000 run in {:.1} s, {} of 1000 satisfy, bound {:.4} at alpha {:.1e}; mean satisfaction over 5 seeds at K = {k}: {}",
            um.model.num_states(),
            full.as_secs_f64(),
            1000 - report.l,
            report.satisfaction_lower_bound,
            report.sat.alpha,
            summary.join(", ")
        ),
    )
}

/// The confidence computed for a 10-state and a 10 000-state model.
fn scale_independence() -> Outcome {
    let start = Instant::now();
    let spec = Specification::reach_at_most(0.8).unwrap();
    let opts = EstimateOptions::new(200, 9, EstimateMode::FixedNu(0.3));
    let small = scenario::estimate(&chain(10), spec, &opts).unwrap().report;
    let large = scenario::estimate(&chain(10_000), spec, &opts)
        .unwrap()
        .report;
    let elapsed = start.elapsed();
    outcome(
        small.l == large.l
            && small.sat.alpha.to_bits() == large.sat.alpha.to_bits()
            && within_budget(elapsed, 1.0),
        format!(
            "L = {} and {}; alpha {:e} and {:e}",
            small.l, large.l, small.sat.alpha, large.sat.alpha
        ),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        (
            "running example curve and satisfying set",
            fig1_reproduction,
        ),
        (
            "satisfaction probability ground truth",
            satisfaction_ground_truth,
        ),
        ("confidence formula exactness", confidence_exactness),
        ("coverage of the reported bound", coverage),
        ("scenario LP decomposition", scenario_decomposition),
        ("policy optimality", policy_optimality),
        ("cost synthesis", cost_synthesis),
        ("UAV desk-scale run", uav_desk_scale),
        ("scale independence of the confidence", scale_independence),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!o.pass);
        println!(
            "{verdict} {} {name} ({:.2} s): {}",
            i + 1,
            start.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some_and(|v| v == "1") {
        std::process::exit(1);
    }
}
