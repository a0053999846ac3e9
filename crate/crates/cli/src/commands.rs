//! The subcommands.

use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use scenverify::checker::{Checker, SampleVerdict};
use scenverify::costsyn::{self, BuildMode, CostSynOptions, SynthesisResult};
use scenverify::model::{Direction, PolicyObjective, SpecKind};
use scenverify::modelio::{
    self, analog_models, generate_uav, UavConfig, UavPreset, UncertainModel,
};
use scenverify::scenario::{self, EstimateMode, EstimateOptions, EstimationReport};
use scenverify::{selftest, ParameterKind, Specification, Valuation};

use crate::args::*;
use crate::failure::{usage, Failure};

/// Default confidence level of `estimate`.
pub const DEFAULT_ALPHA: f64 = 1e-6;

pub fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Check(a) => check(a),
        Command::Estimate(a) => estimate(a),
        Command::Costsyn(a) => costsyn(a),
        Command::GenUav(a) => gen_uav(a),
        Command::Bench(a) => bench(a),
        Command::Selftest => run_selftest(),
    }
}

/// A loaded model and the property it ships with, if any.
pub struct Loaded {
    pub um: UncertainModel,
    pub spec: Option<Specification>,
}

pub const EXTRA_BUILTINS: [&str; 2] = ["uav", "uav-cost"];

pub fn load_model(source: &str) -> Result<Loaded, Failure> {
    let Some(name) = source.strip_prefix("builtin:") else {
        return Ok(Loaded {
            um: modelio::load(Path::new(source))?,
            spec: None,
        });
    };
    if let Some(b) = analog_models().into_iter().find(|b| b.name == name) {
        return Ok(Loaded {
            um: b.load(),
            spec: Some(b.spec),
        });
    }
    let (cfg, spec) = match name {
        "uav" => (UavConfig::desk(), Specification::reach_at_least(0.9)?),
        "uav-cost" => (UavConfig::desk_cost(), Specification::cost_at_most(20.0)?),
        _ => {
            let mut names: Vec<&str> = analog_models().iter().map(|b| b.name).collect();
            names.extend(EXTRA_BUILTINS);
            return Err(usage(format!(
                "unknown built-in model `{name}`; available: {}",
                names.join(", ")
            )));
        }
    };
    Ok(Loaded {
        um: generate_uav(&cfg)?,
        spec: Some(spec),
    })
}

/// Combines the spec flags with the model's own property.
pub fn resolve_spec(
    a: &SpecArgs,
    bundled: Option<Specification>,
) -> Result<Specification, Failure> {
    let any = a.kind.is_some()
        || a.lambda.is_some()
        || a.kappa.is_some()
        || a.direction.is_some()
        || a.policy.is_some();
    if let (false, Some(s)) = (any, bundled) {
        return Ok(s);
    }
    let kind = match (a.kind, a.lambda, a.kappa) {
        (Some(SpecKindArg::Reach), _, _) | (None, Some(_), None) => SpecKind::Reachability,
        (Some(SpecKindArg::Cost), _, _) | (None, None, Some(_)) => SpecKind::ExpectedCost,
        (None, Some(_), Some(_)) => return Err(usage("give either --lambda or --kappa, not both")),
        (None, None, None) => bundled.map_or(SpecKind::Reachability, |s| s.kind),
    };
    let base = bundled.filter(|s| s.kind == kind);
    let threshold = match kind {
        SpecKind::Reachability if a.kappa.is_some() => {
            return Err(usage("--kappa belongs to cost properties"))
        }
        SpecKind::ExpectedCost if a.lambda.is_some() => {
            return Err(usage("--lambda belongs to reachability properties"))
        }
        SpecKind::Reachability => a
            .lambda
            .or(base.map(|s| s.threshold))
            .ok_or_else(|| usage("--lambda is required"))?,
        SpecKind::ExpectedCost => a
            .kappa
            .or(base.map(|s| s.threshold))
            .ok_or_else(|| usage("--kappa is required"))?,
    };
    let direction = match a.direction {
        Some(DirectionArg::Le) => Direction::AtMost,
        Some(DirectionArg::Ge) => Direction::AtLeast,
        None => base.map_or(Direction::AtMost, |s| s.direction),
    };
    let objective = match a.policy {
        Some(PolicyArg::Min) => PolicyObjective::Min,
        Some(PolicyArg::Max) => PolicyObjective::Max,
        None => match base {
            Some(s) if s.direction == direction => s.objective,
            _ => Specification::new(kind, threshold, direction)?.objective,
        },
    };
    Ok(Specification::with_objective(
        kind, threshold, direction, objective,
    )?)
}

/// Parses `NAME=VALUE` pairs against the model's parameters.
pub fn parse_assignments(
    um: &UncertainModel,
    set: &[String],
) -> Result<Vec<(String, f64)>, Failure> {
    set.iter()
        .map(|s| {
            let (name, value) = s
                .split_once('=')
                .ok_or_else(|| usage(format!("expected NAME=VALUE, got `{s}`")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| usage(format!("`{value}` is not a number")))?;
            if um.model.parameter_index(name.trim()).is_none() {
                return Err(usage(format!("the model has no parameter `{name}`")));
            }
            Ok((name.trim().to_string(), value))
        })
        .collect()
}

fn valuation(um: &UncertainModel, pairs: &[(String, f64)]) -> Valuation {
    um.model
        .valuation(pairs.iter().map(|(n, v)| (n.as_str(), *v)))
}

pub fn configure_threads(t: &ThreadArgs) -> Result<(), Failure> {
    if let Some(n) = t.threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        // a second call fails harmlessly when the pool already exists
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    Ok(())
}

fn progress(t: &ThreadArgs, msg: impl FnOnce() -> String) {
    if !t.quiet {
        eprintln!("{}", msg());
    }
}

pub fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| Failure::Io(e.to_string()))
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("outputs serialize");
    s.push('\n');
    s
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Failure::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    String::from_utf8(w.into_inner().map_err(|e| Failure::Io(e.to_string()))?)
        .map_err(|e| Failure::Io(e.to_string()))
}

fn spec_label(s: &Specification) -> String {
    let op = match s.direction {
        Direction::AtMost => "<=",
        Direction::AtLeast => ">=",
    };
    let obj = match s.objective {
        PolicyObjective::Min => "min",
        PolicyObjective::Max => "max",
    };
    match s.kind {
        SpecKind::Reachability => format!("P{op}{} (F target), {obj}", s.threshold),
        SpecKind::ExpectedCost => format!("E{op}{} (cost to goal), {obj}", s.threshold),
    }
}

#[derive(Serialize)]
struct CheckOutput<'a> {
    model: &'a str,
    spec: Specification,
    valuation: std::collections::BTreeMap<String, f64>,
    value: f64,
    satisfied: bool,
    resolved_exactly: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    policy: Option<Vec<String>>,
}

#[derive(Serialize)]
struct CurvePoint {
    value: f64,
    reach: f64,
    satisfied: bool,
}

fn check(a: CheckArgs) -> Result<(), Failure> {
    configure_threads(&a.threads)?;
    let loaded = load_model(a.model.source())?;
    let um = &loaded.um;
    let spec = resolve_spec(&a.spec, loaded.spec)?;
    let pairs = parse_assignments(um, &a.set)?;
    let checker = Checker::new(&um.model, spec)?.with_policies(a.show_policy);
    if let Some(param) = &a.sweep {
        let i = um
            .model
            .parameter_index(param)
            .ok_or_else(|| usage(format!("the model has no parameter `{param}`")))?;
        if um.model.parameters()[i].kind != ParameterKind::Uncontrollable {
            return Err(usage(format!("`{param}` is a cost parameter")));
        }
        if a.points < 2 {
            return Err(usage("--points must be at least 2"));
        }
        let us: Vec<Valuation> = (0..a.points)
            .map(|j| {
                let x = j as f64 / (a.points - 1) as f64;
                let mut p = pairs.clone();
                p.retain(|(n, _)| n != param);
                p.push((param.clone(), x));
                valuation(um, &p)
            })
            .collect();
        progress(&a.threads, || {
            format!("checking {} points of `{param}`", us.len())
        });
        let verdicts: Vec<SampleVerdict> = us
            .par_iter()
            .enumerate()
            .map(|(i, u)| checker.check_any(i, u))
            .collect::<Result<_, _>>()?;
        let points: Vec<CurvePoint> = verdicts
            .iter()
            .enumerate()
            .map(|(j, v)| CurvePoint {
                value: j as f64 / (a.points - 1) as f64,
                reach: v.value_at_init,
                satisfied: v.satisfied,
            })
            .collect();
        let text = match a.format {
            Format::Json => to_json(&points),
            Format::Csv | Format::Table => csv_text(
                &[param.as_str(), "value", "satisfied"],
                &points
                    .iter()
                    .map(|p| {
                        vec![
                            p.value.to_string(),
                            p.reach.to_string(),
                            p.satisfied.to_string(),
                        ]
                    })
                    .collect::<Vec<_>>(),
            )?,
        };
        return emit(a.out.as_deref(), &text);
    }
    let u = valuation(um, &pairs);
    let v: SampleVerdict = checker.check(0, &u)?;
    let out = CheckOutput {
        model: um.model.name(),
        spec,
        valuation: pairs.into_iter().collect(),
        value: v.value_at_init,
        satisfied: v.satisfied,
        resolved_exactly: v.resolved_exactly,
        policy: v.policy,
    };
    let text = match a.format {
        Format::Json => to_json(&out),
        Format::Csv => csv_text(
            &["model", "value", "satisfied", "resolved_exactly"],
            &[vec![
                out.model.to_string(),
                out.value.to_string(),
                out.satisfied.to_string(),
                out.resolved_exactly.to_string(),
            ]],
        )?,
        Format::Table => {
            let mut s = format!(
                "model: {}\nproperty: {}\nvalue: {}\nsatisfied: {}\n",
                out.model,
                spec_label(&spec),
                out.value,
                if out.satisfied { "yes" } else { "no" }
            );
            if out.resolved_exactly {
                s.push_str("verdict confirmed by an exact linear solve\n");
            }
            if let Some(policy) = &out.policy {
                for (state, action) in um.model.states().iter().zip(policy) {
                    s.push_str(&format!("  {state}: {action}\n"));
                }
            }
            s
        }
    };
    emit(a.out.as_deref(), &text)
}

fn report_csv(r: &EstimationReport) -> Result<String, Failure> {
    let alpha =
        |c: Option<&scenario::ConfidenceResult>| c.map_or(String::new(), |c| c.alpha.to_string());
    let nu = |c: Option<&scenario::ConfidenceResult>| c.map_or(String::new(), |c| c.nu.to_string());
    csv_text(
        &[
            "model",
            "K",
            "L",
            "empirical_satisfaction",
            "alpha_sat",
            "alpha_unsat",
            "nu_sat",
            "nu_unsat",
            "satisfaction_lower_bound",
            "confidence",
            "time_s",
        ],
        &[vec![
            r.model.clone(),
            r.k.to_string(),
            r.l.to_string(),
            r.empirical_satisfaction.to_string(),
            alpha(Some(&r.sat)),
            alpha(r.unsat.as_ref()),
            nu(Some(&r.sat)),
            nu(r.unsat.as_ref()),
            r.satisfaction_lower_bound.to_string(),
            r.confidence.to_string(),
            r.wall_time_s.map_or(String::new(), |t| t.to_string()),
        ]],
    )
}

fn estimate(a: EstimateArgs) -> Result<(), Failure> {
    if a.k < 2 {
        return Err(usage(format!("--K must be at least 2, got {}", a.k)));
    }
    configure_threads(&a.threads)?;
    let loaded = load_model(a.model.source())?;
    let um = &loaded.um;
    let spec = resolve_spec(&a.spec, loaded.spec)?;
    let pairs = parse_assignments(um, &a.set)?;
    for (name, _) in &pairs {
        let i = um.model.parameter_index(name).expect("checked");
        if um.model.parameters()[i].kind == ParameterKind::Uncontrollable {
            return Err(usage(format!(
                "`{name}` is sampled; only cost parameters can be fixed"
            )));
        }
    }
    let mode = match a.nu {
        Some(nu) => EstimateMode::FixedNu(nu),
        None => EstimateMode::FixedAlpha(a.alpha.unwrap_or(DEFAULT_ALPHA)),
    };
    let mut opts = EstimateOptions::new(a.k, a.seed, mode);
    opts.nu_unsat = a.nu_unsat;
    opts.timing = a.timing;
    if !pairs.is_empty() {
        opts.fixed = Some(valuation(um, &pairs));
    }
    progress(&a.threads, || {
        format!(
            "estimating {} with {} samples ({})",
            um.model.name(),
            a.k,
            spec_label(&spec)
        )
    });
    let start = Instant::now();
    let run = scenario::estimate(um, spec, &opts)?;
    progress(&a.threads, || {
        format!(
            "{} of {} samples violate the property ({:.2} s)",
            run.report.l,
            run.report.k,
            start.elapsed().as_secs_f64()
        )
    });
    let report = &run.report;
    if let Some(p) = &a.out {
        emit(Some(p), &format!("{}\n", report.to_json()))?;
    }
    if let Some(p) = &a.verdicts_csv {
        let rows: Vec<Vec<String>> = run
            .verdicts
            .iter()
            .map(|v| {
                vec![
                    v.index.to_string(),
                    v.value_at_init.to_string(),
                    v.satisfied.to_string(),
                    v.resolved_exactly.to_string(),
                ]
            })
            .collect();
        emit(
            Some(p),
            &csv_text(&["index", "value", "satisfied", "resolved_exactly"], &rows)?,
        )?;
    }
    if let Some(p) = &a.samples_out {
        #[derive(Serialize)]
        struct Samples {
            seed: u64,
            rejected: u64,
            samples: Vec<std::collections::BTreeMap<String, f64>>,
        }
        let s = Samples {
            seed: run.samples.seed,
            rejected: run.samples.rejected_count,
            samples: run.samples.as_maps(),
        };
        emit(Some(p), &to_json(&s))?;
    }
    let text = match a.format {
        Format::Json => format!("{}\n", report.to_json()),
        Format::Csv => report_csv(report)?,
        Format::Table => {
            let mut s = format!("property: {}\n", spec_label(&spec));
            s.push_str(&format!(
                "satisfied: {}/{} ({:.4})\nwith confidence 1 - {:.3e}, the satisfaction probability is at least {:.6}\n",
                report.k - report.l,
                report.k,
                report.empirical_satisfaction,
                report.sat.alpha,
                report.satisfaction_lower_bound
            ));
            if report.sat.vacuous {
                s.push_str("the bound is vacuous: too many samples violate the property\n");
            }
            s.push_str(&report.to_table());
            s
        }
    };
    emit(None, &text)
}

fn synthesis_table(r: &SynthesisResult) -> String {
    let mut s = String::new();
    for (name, v) in &r.w {
        s.push_str(&format!("{name} = {v}\n"));
    }
    s.push_str(&format!(
        "worst sampled expected cost: {} (kappa {}, {})\n",
        r.tau,
        r.kappa,
        if r.feasible { "met" } else { "exceeded" }
    ));
    s.push_str(&format!(
        "samples above kappa: {}/{}\n",
        r.violating,
        r.per_sample_costs.len()
    ));
    s.push_str(&format!(
        "program: {:?}, {} rows, {} columns, {} rounds\n",
        r.mode, r.lp_rows, r.lp_columns, r.rounds
    ));
    if let Some(c) = &r.certificate {
        s.push_str(&format!(
            "with confidence 1 - {:.3e}, a fresh sample meets kappa with probability at least {:.6}\n",
            c.alpha,
            1.0 - c.nu
        ));
    }
    s
}

fn costsyn(a: CostsynArgs) -> Result<(), Failure> {
    configure_threads(&a.threads)?;
    let loaded = load_model(a.model.source())?;
    let um = &loaded.um;
    let spec = resolve_spec(&a.spec, loaded.spec)?;
    let n = um.model.cost_parameters().len();
    if !um.model.has_costs() {
        return Err(usage("costsyn needs a model with a cost block"));
    }
    let opts = CostSynOptions {
        bounds: vec![(a.w_min, a.w_max); n],
        budget: a.budget,
        mode: match a.mode {
            ModeArg::Auto => BuildMode::Auto,
            ModeArg::Reduced => BuildMode::Reduced,
            ModeArg::Monolithic => BuildMode::Monolithic,
        },
    };
    progress(&a.threads, || {
        format!(
            "synthesizing {n} cost parameters of {} from {} samples",
            um.model.name(),
            a.k
        )
    });
    let r = costsyn::synthesize_and_certify(um, spec, a.k, a.seed, a.alpha, &opts)?;
    let text = match a.format {
        Format::Json => to_json(&r),
        Format::Table => synthesis_table(&r),
        Format::Csv => {
            let mut header: Vec<&str> = r.w.iter().map(|(n, _)| n.as_str()).collect();
            header.extend(["tau", "kappa", "violating", "feasible", "alpha", "nu"]);
            let mut row: Vec<String> = r.w.iter().map(|(_, v)| v.to_string()).collect();
            row.extend([
                r.tau.to_string(),
                r.kappa.to_string(),
                r.violating.to_string(),
                r.feasible.to_string(),
                r.certificate
                    .as_ref()
                    .map_or(String::new(), |c| c.alpha.to_string()),
                r.certificate
                    .as_ref()
                    .map_or(String::new(), |c| c.nu.to_string()),
            ]);
            csv_text(&header, &[row])?
        }
    };
    emit(a.out.as_deref(), &text)
}

fn gen_uav(a: GenUavArgs) -> Result<(), Failure> {
    let mut cfg = UavConfig::new(a.nx, a.ny, a.nz, a.weathers);
    if let Some(zx) = a.zones_x {
        cfg.zones.0 = zx;
    }
    if let Some(zy) = a.zones_y {
        cfg.zones.1 = zy;
    }
    cfg.preset = match a.preset {
        PresetArg::Uniform => UavPreset::Uniform,
        PresetArg::BiasY => UavPreset::BiasY,
        PresetArg::BiasNegX => UavPreset::BiasNegX,
    };
    cfg.cost_mode = a.cost;
    cfg.horizon = if a.cost || a.unbounded {
        None
    } else {
        Some(a.horizon.unwrap_or_else(|| cfg.default_horizon()))
    };
    let um = generate_uav(&cfg)?;
    eprintln!(
        "{}: {} states, {} random parameters",
        um.model.name(),
        um.model.num_states(),
        um.model
            .parameters()
            .iter()
            .filter(|p| p.kind == ParameterKind::Uncontrollable)
            .count()
    );
    emit(a.out.as_deref(), &modelio::serialize(&um))
}

/// One line of the benchmark table.
struct BenchRow {
    model: String,
    k: usize,
    alpha_sat: f64,
    alpha_unsat: f64,
    nu_sat: f64,
    nu_unsat: f64,
    time_s: f64,
}

/// α for `l` violations at tolerance `nu`; a tolerance of 1 claims nothing.
fn bench_alpha(k: usize, l: usize, w: usize, nu: f64) -> Result<f64, Failure> {
    if nu >= 1.0 {
        return Ok(0.0);
    }
    Ok(scenario::confidence(k, l, w, EstimateMode::FixedNu(nu))?.alpha)
}

fn bench_model(name: &str, a: &BenchArgs) -> Result<Vec<BenchRow>, Failure> {
    let loaded = load_model(&format!("builtin:{name}"))?;
    let um = &loaded.um;
    let spec = loaded.spec.expect("bundled models carry a property");
    let w = scenario::cost_dimension(um, &spec);
    // cost parameters sit at the lower end of the default box
    let fixed = um
        .model
        .valuation(um.model.cost_parameters().into_iter().map(|n| (n, 0.0)));
    let options = |k: usize, seed: u64| {
        let mut o = EstimateOptions::new(k, seed, EstimateMode::FixedNu(0.5));
        o.fixed = Some(fixed.clone());
        o
    };
    let reference = scenario::estimate(um, spec, &options(a.k_ref, a.seed))?;
    let rate = reference.report.empirical_satisfaction;
    let nu_sat = (1.0 - rate + a.margin).clamp(0.0, 1.0);
    let nu_unsat = (rate + a.margin).clamp(0.0, 1.0);
    progress(&a.threads, || {
        format!(
            "{name}: reference satisfaction {rate:.4} from {} samples",
            a.k_ref
        )
    });
    let mut rows = Vec::new();
    for &k in &a.ks {
        let (mut sat, mut unsat, mut time) = (0.0, 0.0, 0.0);
        for rep in 0..a.reps {
            let start = Instant::now();
            let seed = a.seed.wrapping_add(1 + rep as u64);
            let run = scenario::estimate(um, spec, &options(k, seed))?;
            time += start.elapsed().as_secs_f64();
            let l = run.report.l;
            sat += bench_alpha(k, l, w, nu_sat)?;
            unsat += bench_alpha(k, k - l, w, nu_unsat)?;
        }
        let reps = a.reps as f64;
        progress(&a.threads, || format!("{name}: K = {k} done"));
        rows.push(BenchRow {
            model: name.to_string(),
            k,
            alpha_sat: sat / reps,
            alpha_unsat: unsat / reps,
            nu_sat,
            nu_unsat,
            time_s: time / reps,
        });
    }
    Ok(rows)
}

fn bench(a: BenchArgs) -> Result<(), Failure> {
    configure_threads(&a.threads)?;
    if a.reps == 0 || a.ks.iter().any(|&k| k < 2) || a.k_ref < 2 {
        return Err(usage(
            "--reps must be positive and every sample size at least 2",
        ));
    }
    let all: Vec<&str> = analog_models().iter().map(|b| b.name).collect();
    let names: Vec<String> = if a.models.is_empty() {
        all.iter().map(|s| s.to_string()).collect()
    } else {
        a.models.clone()
    };
    for n in &names {
        if !all.contains(&n.as_str()) {
            return Err(usage(format!(
                "unknown bundled model `{n}`; available: {}",
                all.join(", ")
            )));
        }
    }
    let mut rows = Vec::new();
    for name in &names {
        match bench_model(name, &a) {
            Ok(r) => rows.extend(r),
            Err(e) => {
                eprintln!("{name}: {e}");
                for &k in &a.ks {
                    rows.push(BenchRow {
                        model: name.clone(),
                        k,
                        alpha_sat: f64::NAN,
                        alpha_unsat: f64::NAN,
                        nu_sat: f64::NAN,
                        nu_unsat: f64::NAN,
                        time_s: f64::NAN,
                    });
                }
            }
        }
    }
    let records: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.model.clone(),
                r.k.to_string(),
                format!("{:.4e}", r.alpha_sat),
                format!("{:.4e}", r.alpha_unsat),
                format!("{:.6}", r.nu_sat),
                format!("{:.6}", r.nu_unsat),
                format!("{:.4}", r.time_s),
            ]
        })
        .collect();
    let text = csv_text(
        &[
            "model",
            "K",
            "alpha_sat",
            "alpha_unsat",
            "nu_sat",
            "nu_unsat",
            "time_s",
        ],
        &records,
    )?;
    emit(a.out.as_deref(), &text)
}

fn run_selftest() -> Result<(), Failure> {
    for (name, f) in selftest::checks() {
        match f() {
            Ok(()) => println!("ok    {name}"),
            Err(e) => {
                println!("FAIL  {name}");
                return Err(Failure::Failed(format!("{name}: {e}")));
            }
        }
    }
    Ok(())
}
