//! Confidence bounds from scenario optimization and the estimation pipeline.
//!
//! With K sampled instantiations of which L violate the specification and W
//! controllable cost parameters, the satisfaction probability F satisfies
//! `F ≥ 1 − ν` with probability at least `1 − α`, where
//!
//! ```text
//! α = C(L+W+1, L) · Σ_{i=0}^{L+W+1} C(K, i) (1−ν)^{K−i} ν^i
//! ```
//!
//! The four classical cases (no discarding and no cost parameters, discarding
//! only, cost parameters only, both) are special cases of this expression.
//! Everything is evaluated in log space so K in the tens of thousands is fine.

use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checker::{CheckError, Checker, SampleVerdict};
use crate::model::{SpecKind, Specification, Valuation};
use crate::modelio::UncertainModel;
use crate::sampling::{self, SampleSet, SamplingError};

/// Bisection stops once the bracket on ν is this narrow.
pub const NU_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Theorem {
    T1,
    T2,
    T3,
    T4,
}

impl Theorem {
    /// The formula that applies to L discarded samples and W cost parameters.
    pub fn select(l: usize, w: usize) -> Theorem {
        match (w, l) {
            (0, 0) => Theorem::T1,
            (0, _) => Theorem::T2,
            (_, 0) => Theorem::T3,
            _ => Theorem::T4,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("{0}")]
    Domain(String),
    #[error("no tolerance in [0, 1) reaches confidence {0}")]
    NoSolution(f64),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Check(#[from] CheckError),
}

fn check_domain(k: usize, l: usize, w: usize, nu: f64) -> Result<(), ScenarioError> {
    if !(0.0..1.0).contains(&nu) {
        return Err(ScenarioError::Domain(format!(
            "tolerance {nu} is outside [0, 1)"
        )));
    }
    if k < 2 {
        return Err(ScenarioError::Domain(format!(
            "need at least 2 samples, got {k}"
        )));
    }
    if w > 0 && l == 0 && k < w + 1 {
        return Err(ScenarioError::Domain(format!(
            "need at least {} samples for {w} cost parameters",
            w + 1
        )));
    }
    if l > 0 && l + w + 1 > k {
        return Err(ScenarioError::Domain(format!(
            "{l} discarded samples leave too few of {k}"
        )));
    }
    Ok(())
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (1..=k).map(|j| ((n - k + j) as f64 / j as f64).ln()).sum()
}

/// `ln α` without clamping.
fn ln_alpha(k: usize, l: usize, w: usize, nu: f64) -> f64 {
    let top = (l + w + 1).min(k);
    let coef = ln_binomial(l + w + 1, l);
    if nu == 0.0 {
        return coef;
    }
    let ln_ratio = nu.ln() - (-nu).ln_1p();
    let mut terms = Vec::with_capacity(top + 1);
    let mut t = k as f64 * (-nu).ln_1p();
    terms.push(t);
    for i in 0..top {
        t += ((k - i) as f64 / (i + 1) as f64).ln() + ln_ratio;
        terms.push(t);
    }
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // Neumaier summation of the shifted terms
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for &x in &terms {
        let v = (x - max).exp();
        let s = sum + v;
        comp += if sum.abs() >= v.abs() {
            (sum - s) + v
        } else {
            (v - s) + sum
        };
        sum = s;
    }
    coef + max + (sum + comp).ln()
}

/// A confidence bound together with the inputs that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceResult {
    pub theorem: Theorem,
    pub k: usize,
    pub l: usize,
    pub w: usize,
    pub nu: f64,
    pub alpha: f64,
    /// The formula exceeded 1 and was clamped, or its preconditions failed:
    /// the bound carries no information.
    pub vacuous: bool,
}

impl ConfidenceResult {
    /// Confidence `1 − α_ν` for tolerance ν.
    pub fn for_nu(k: usize, l: usize, w: usize, nu: f64) -> Result<Self, ScenarioError> {
        check_domain(k, l, w, nu)?;
        let ln = ln_alpha(k, l, w, nu);
        Ok(ConfidenceResult {
            theorem: Theorem::select(l, w),
            k,
            l,
            w,
            nu,
            alpha: ln.exp().min(1.0),
            vacuous: ln > 0.0,
        })
    }

    /// Smallest tolerance reaching confidence `1 − alpha`.
    pub fn for_alpha(k: usize, l: usize, w: usize, alpha: f64) -> Result<Self, ScenarioError> {
        let nu = solve_nu(k, l, w, alpha)?;
        Self::for_nu(k, l, w, nu)
    }

    /// The bound `F ≥ 1 − ν` that holds with probability `1 − α`.
    pub fn satisfaction_lower_bound(&self) -> f64 {
        1.0 - self.nu
    }

    pub fn confidence(&self) -> f64 {
        1.0 - self.alpha
    }
}

/// Confidence for K samples and no discarding.
pub fn alpha_t1(k: usize, nu: f64) -> Result<f64, ScenarioError> {
    Ok(ConfidenceResult::for_nu(k, 0, 0, nu)?.alpha)
}

/// Confidence for K samples after discarding L violating ones.
pub fn alpha_t2(k: usize, l: usize, nu: f64) -> Result<f64, ScenarioError> {
    if l >= k {
        return Err(ScenarioError::Domain(format!(
            "cannot discard {l} of {k} samples"
        )));
    }
    Ok(ConfidenceResult::for_nu(k, l, 0, nu)?.alpha)
}

/// Confidence for K samples with W controllable cost parameters.
pub fn alpha_t3(k: usize, w: usize, nu: f64) -> Result<f64, ScenarioError> {
    if k < w + 1 {
        return Err(ScenarioError::Domain(format!(
            "need at least {} samples for {w} cost parameters",
            w + 1
        )));
    }
    if !(0.0..1.0).contains(&nu) {
        return Err(ScenarioError::Domain(format!(
            "tolerance {nu} is outside [0, 1)"
        )));
    }
    let ln = ln_alpha(k, 0, w, nu);
    Ok(ln.exp().min(1.0))
}

/// Confidence with both discarding and cost parameters.
pub fn alpha_t4(k: usize, l: usize, w: usize, nu: f64) -> Result<f64, ScenarioError> {
    if k < 2 || l + w + 1 >= k {
        return Err(ScenarioError::Domain(format!(
            "need L + W + 1 < K, got L = {l}, W = {w}, K = {k}"
        )));
    }
    Ok(ConfidenceResult::for_nu(k, l, w, nu)?.alpha)
}

/// Smallest ν (to [`NU_TOLERANCE`]) with `α_ν ≤ alpha_target`, by bisection.
pub fn solve_nu(k: usize, l: usize, w: usize, alpha_target: f64) -> Result<f64, ScenarioError> {
    if !(alpha_target > 0.0 && alpha_target < 1.0) {
        return Err(ScenarioError::Domain(format!(
            "confidence level {alpha_target} is outside (0, 1)"
        )));
    }
    check_domain(k, l, w, 0.0)?;
    let target = alpha_target.ln();
    let mut lo = 0.0;
    let mut hi = 1.0 - f64::EPSILON;
    if ln_alpha(k, l, w, hi) > target {
        return Err(ScenarioError::NoSolution(alpha_target));
    }
    while hi - lo > NU_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if ln_alpha(k, l, w, mid) <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Exact α as a rational number. Slow; used to validate the log-space path.
pub fn exact_alpha(k: usize, l: usize, w: usize, nu: &BigRational) -> BigRational {
    let one = BigRational::one();
    let q = &one - nu;
    let top = (l + w + 1).min(k);
    let binom = |n: usize, r: usize| -> BigInt {
        let mut acc = BigInt::one();
        for j in 1..=r {
            acc = acc * BigInt::from(n - r + j) / BigInt::from(j);
        }
        acc
    };
    let mut sum = BigRational::zero();
    for i in 0..=top {
        let term = BigRational::from_integer(binom(k, i)) * pow(&q, k - i) * pow(nu, i);
        sum += term;
    }
    BigRational::from_integer(binom(l + w + 1, l)) * sum
}

fn pow(x: &BigRational, e: usize) -> BigRational {
    num_traits::pow::pow(x.clone(), e)
}

/// f64 view of an exact rational.
pub fn rational_to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// How the confidence pair is reported.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateMode {
    /// Given ν, report α.
    FixedNu(f64),
    /// Given α, report the smallest ν.
    FixedAlpha(f64),
}

/// Confidence for `l` violations under `mode`. When the formula's
/// preconditions fail because too many samples were discarded, the result is
/// vacuous (ν = 1 or α = 1) instead of an error.
pub fn confidence(
    k: usize,
    l: usize,
    w: usize,
    mode: EstimateMode,
) -> Result<ConfidenceResult, ScenarioError> {
    if k < 2 {
        return Err(ScenarioError::Domain(format!(
            "need at least 2 samples, got {k}"
        )));
    }
    let too_many = l > 0 && l + w + 1 > k;
    match mode {
        EstimateMode::FixedNu(nu) if too_many => {
            check_domain(k, 0, 0, nu)?;
            Ok(ConfidenceResult {
                theorem: Theorem::select(l, w),
                k,
                l,
                w,
                nu,
                alpha: 1.0,
                vacuous: true,
            })
        }
        EstimateMode::FixedAlpha(_) if too_many => Ok(ConfidenceResult {
            theorem: Theorem::select(l, w),
            k,
            l,
            w,
            nu: 1.0,
            alpha: 0.0,
            vacuous: true,
        }),
        EstimateMode::FixedNu(nu) => ConfidenceResult::for_nu(k, l, w, nu),
        EstimateMode::FixedAlpha(alpha) => match ConfidenceResult::for_alpha(k, l, w, alpha) {
            Err(ScenarioError::NoSolution(_)) => Ok(ConfidenceResult {
                theorem: Theorem::select(l, w),
                k,
                l,
                w,
                nu: 1.0,
                alpha,
                vacuous: true,
            }),
            r => r,
        },
    }
}

/// Settings of one estimation run.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateOptions {
    pub k: usize,
    pub seed: u64,
    pub mode: EstimateMode,
    /// Tolerance for the negated specification in `FixedNu` mode.
    pub nu_unsat: Option<f64>,
    /// Values for parameters the distribution does not cover (cost parameters).
    pub fixed: Option<Valuation>,
    /// Report policies in the verdicts.
    pub policies: bool,
    /// Record wall time in the report (makes it nondeterministic).
    pub timing: bool,
}

impl EstimateOptions {
    pub fn new(k: usize, seed: u64, mode: EstimateMode) -> Self {
        EstimateOptions {
            k,
            seed,
            mode,
            nu_unsat: None,
            fixed: None,
            policies: false,
            timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub model: String,
    pub spec: Specification,
    pub seed: u64,
    pub k: usize,
    /// Samples violating the specification (discarded).
    pub l: usize,
    pub rejected_samples: u64,
    pub mode: EstimateMode,
    /// Fraction of samples that satisfy the specification.
    pub empirical_satisfaction: f64,
    /// Bound `1 − ν` on the satisfaction probability.
    pub satisfaction_lower_bound: f64,
    /// Probability `1 − α` with which the bound holds.
    pub confidence: f64,
    pub sat: ConfidenceResult,
    /// The same statistics for the negated specification.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unsat: Option<ConfidenceResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

impl EstimationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Human-readable summary in the layout of the confidence tables.
    pub fn to_table(&self) -> String {
        let fmt = |r: Option<&ConfidenceResult>| {
            r.map_or("-".to_string(), |r| format!("{:.3e}", r.alpha))
        };
        let nu = |r: Option<&ConfidenceResult>| {
            r.map_or("-".to_string(), |r| format!("{:.6}", 1.0 - r.nu))
        };
        let mut out = String::new();
        out.push_str(&format!(
            "model: {}  seed: {}  violating: {}/{}\n",
            self.model, self.seed, self.l, self.k
        ));
        out.push_str(&format!(
            "{:>10}  {:>12}  {:>12}  {:>12}  {:>12}  {:>10}\n",
            "samples", "alpha sat", "alpha unsat", "1-nu sat", "1-nu unsat", "time (s)"
        ));
        out.push_str(&format!(
            "{:>10}  {:>12}  {:>12}  {:>12}  {:>12}  {:>10}\n",
            self.k,
            fmt(Some(&self.sat)),
            fmt(self.unsat.as_ref()),
            nu(Some(&self.sat)),
            nu(self.unsat.as_ref()),
            self.wall_time_s
                .map_or("-".to_string(), |t| format!("{t:.2}")),
        ));
        out
    }
}

/// Everything an estimation run produced.
#[derive(Debug, Clone)]
pub struct EstimationRun {
    pub report: EstimationReport,
    pub samples: SampleSet,
    pub verdicts: Vec<SampleVerdict>,
}

/// Number of controllable cost parameters that enter the confidence bound.
pub fn cost_dimension(um: &UncertainModel, spec: &Specification) -> usize {
    match spec.kind {
        SpecKind::Reachability => 0,
        SpecKind::ExpectedCost => um.model.cost_parameters().len(),
    }
}

/// Draws K samples, checks each, discards the violating ones and reports the
/// resulting confidence pair.
pub fn estimate(
    um: &UncertainModel,
    spec: Specification,
    opts: &EstimateOptions,
) -> Result<EstimationRun, ScenarioError> {
    let start = Instant::now();
    if opts.k < 2 {
        return Err(ScenarioError::Domain(format!(
            "need at least 2 samples, got {}",
            opts.k
        )));
    }
    let checker = Checker::new(&um.model, spec)?.with_policies(opts.policies);
    let mut samples = sampling::draw(&um.distribution, &um.model, opts.k, opts.seed)?;
    if let Some(fixed) = &opts.fixed {
        for u in &mut samples.samples {
            *u = u.filled_from(fixed);
        }
    }
    let verdicts = checker.check_all(&samples.samples)?;
    let l = verdicts.iter().filter(|v| !v.satisfied).count();
    let k = opts.k;
    let w = cost_dimension(um, &spec);
    let sat = confidence(k, l, w, opts.mode)?;
    let unsat = match (opts.mode, opts.nu_unsat) {
        (EstimateMode::FixedAlpha(_), _) => Some(confidence(k, k - l, w, opts.mode)?),
        (EstimateMode::FixedNu(_), Some(nu)) => {
            Some(confidence(k, k - l, w, EstimateMode::FixedNu(nu))?)
        }
        (EstimateMode::FixedNu(_), None) => None,
    };
    let report = EstimationReport {
        model: um.model.name().to_string(),
        spec,
        seed: opts.seed,
        k,
        l,
        rejected_samples: samples.rejected_count,
        mode: opts.mode,
        empirical_satisfaction: (k - l) as f64 / k as f64,
        satisfaction_lower_bound: sat.satisfaction_lower_bound(),
        confidence: sat.confidence(),
        sat,
        unsat,
        wall_time_s: opts.timing.then(|| start.elapsed().as_secs_f64()),
    };
    Ok(EstimationRun {
        report,
        samples,
        verdicts,
    })
}
