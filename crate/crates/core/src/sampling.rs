//! Reproducible i.i.d. sampling of parameter valuations.
//!
//! Sample `i` of a run with seed `s` is drawn from a ChaCha8 stream keyed by
//! `s` with stream number `i`, so samples do not depend on each other, on the
//! number of samples requested, or on how the work is scheduled.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{InstantiateOptions, ModelError, ParametricModel, Valuation};
use crate::polynomial::ParameterKind;

/// Distribution of a single parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Marginal {
    Uniform {
        low: f64,
        high: f64,
    },
    /// `(value, weight)` pairs; weights are normalized.
    Discrete(Vec<(f64, f64)>),
}

/// An independent block of the joint distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Block {
    Single {
        param: String,
        marginal: Marginal,
    },
    /// A point of the probability simplex with Dirichlet weights. `params`
    /// names the coordinates in order; when it has one entry fewer than
    /// `weights` the last coordinate is implicit (one minus the others).
    Dirichlet {
        group: String,
        weights: Vec<f64>,
        params: Vec<String>,
    },
}

impl Block {
    pub fn params(&self) -> Vec<&str> {
        match self {
            Block::Single { param, .. } => vec![param.as_str()],
            Block::Dirichlet { params, .. } => params.iter().map(String::as_str).collect(),
        }
    }
}

/// Product of independent blocks.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParameterDistribution {
    pub blocks: Vec<Block>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplingError {
    #[error("sample count must be at least 1")]
    ZeroSamples,
    #[error("parameter `{0}` is not covered by the distribution")]
    Uncovered(String),
    #[error("parameter `{0}` is covered by more than one block")]
    CoveredTwice(String),
    #[error("distribution refers to `{0}`, which is not an uncontrollable parameter of the model")]
    NotUncontrollable(String),
    #[error("invalid distribution: {0}")]
    BadDistribution(String),
    #[error("more than {budget} consecutive draws for sample {index} were rejected")]
    RejectionBudgetExceeded { index: usize, budget: u64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl ParameterDistribution {
    pub fn new(blocks: Vec<Block>) -> Self {
        ParameterDistribution { blocks }
    }

    pub fn uniform(param: &str, low: f64, high: f64) -> Self {
        Self::new(vec![Block::Single {
            param: param.into(),
            marginal: Marginal::Uniform { low, high },
        }])
    }

    /// Checks that the blocks are well formed and cover every uncontrollable
    /// parameter of `m` exactly once.
    pub fn validate(&self, m: &ParametricModel) -> Result<(), SamplingError> {
        let mut covered: HashMap<&str, usize> = HashMap::new();
        for block in &self.blocks {
            match block {
                Block::Single { param, marginal } => match marginal {
                    Marginal::Uniform { low, high } => {
                        if !(low.is_finite() && high.is_finite() && low < high) {
                            return Err(SamplingError::BadDistribution(format!(
                                "uniform({low}, {high}) for `{param}`"
                            )));
                        }
                    }
                    Marginal::Discrete(pairs) => {
                        let total: f64 = pairs.iter().map(|p| p.1).sum();
                        if pairs.is_empty()
                            || pairs.iter().any(|&(v, w)| {
                                !v.is_finite() || w.is_nan() || w < 0.0 || !w.is_finite()
                            })
                            || total.is_nan()
                            || total <= 0.0
                        {
                            return Err(SamplingError::BadDistribution(format!(
                                "discrete weights for `{param}`"
                            )));
                        }
                    }
                },
                Block::Dirichlet {
                    group,
                    weights,
                    params,
                } => {
                    if weights.len() < 2
                        || weights
                            .iter()
                            .any(|w| w.is_nan() || *w <= 0.0 || !w.is_finite())
                    {
                        return Err(SamplingError::BadDistribution(format!(
                            "group `{group}` needs at least two positive weights"
                        )));
                    }
                    if params.len() != weights.len() && params.len() + 1 != weights.len() {
                        return Err(SamplingError::BadDistribution(format!(
                            "group `{group}` has {} weights but {} parameters",
                            weights.len(),
                            params.len()
                        )));
                    }
                }
            }
            for p in block.params() {
                *covered.entry(p).or_default() += 1;
            }
        }
        for (name, count) in &covered {
            match m.parameter_index(name) {
                Some(i) if m.parameters()[i].kind == ParameterKind::Uncontrollable => {}
                _ => return Err(SamplingError::NotUncontrollable(name.to_string())),
            }
            if *count > 1 {
                return Err(SamplingError::CoveredTwice(name.to_string()));
            }
        }
        for p in m.parameters() {
            if p.kind == ParameterKind::Uncontrollable && !covered.contains_key(p.name.as_str()) {
                return Err(SamplingError::Uncovered(p.name.clone()));
            }
        }
        Ok(())
    }

    /// Draws one raw valuation (no graph-preservation check). Parameters not
    /// covered by a block are left as NaN.
    fn draw_raw(&self, plan: &[(Block, Vec<usize>)], n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut out = vec![f64::NAN; n];
        for (block, idx) in plan {
            match block {
                Block::Single {
                    marginal: Marginal::Uniform { low, high },
                    ..
                } => {
                    let u: f64 = rng.random();
                    out[idx[0]] = low + (high - low) * u;
                }
                Block::Single {
                    marginal: Marginal::Discrete(pairs),
                    ..
                } => {
                    let total: f64 = pairs.iter().map(|p| p.1).sum();
                    let mut x = rng.random::<f64>() * total;
                    let mut chosen = pairs.last().expect("validated").0;
                    for &(v, w) in pairs {
                        if x < w {
                            chosen = v;
                            break;
                        }
                        x -= w;
                    }
                    out[idx[0]] = chosen;
                }
                Block::Dirichlet { weights, .. } => {
                    let draws: Vec<f64> = weights
                        .iter()
                        .map(|&a| Gamma::new(a, 1.0).expect("validated").sample(rng))
                        .collect();
                    let total: f64 = draws.iter().sum();
                    for (k, &i) in idx.iter().enumerate() {
                        out[i] = draws[k] / total;
                    }
                }
            }
        }
        out
    }
}

/// K valuations drawn with a fixed seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub seed: u64,
    pub parameters: Vec<String>,
    pub samples: Vec<Valuation>,
    pub rejected_count: u64,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Samples as name → value maps, for export.
    pub fn as_maps(&self) -> Vec<BTreeMap<String, f64>> {
        self.samples
            .iter()
            .map(|u| {
                self.parameters
                    .iter()
                    .zip(u.values())
                    .filter(|(_, v)| !v.is_nan())
                    .map(|(n, v)| (n.clone(), *v))
                    .collect()
            })
            .collect()
    }
}

/// Draws K graph-preserving valuations for `m`.
pub fn draw(
    dist: &ParameterDistribution,
    m: &ParametricModel,
    k: usize,
    seed: u64,
) -> Result<SampleSet, SamplingError> {
    draw_range(dist, m, 0..k, seed)
}

/// Draws the samples with indices in `range`; `draw_range(.., 0..k, s)` is `draw(.., k, s)`.
pub fn draw_range(
    dist: &ParameterDistribution,
    m: &ParametricModel,
    range: std::ops::Range<usize>,
    seed: u64,
) -> Result<SampleSet, SamplingError> {
    if range.is_empty() {
        return Err(SamplingError::ZeroSamples);
    }
    dist.validate(m)?;
    m.topology()?;
    let plan: Vec<(Block, Vec<usize>)> = dist
        .blocks
        .iter()
        .map(|b| {
            (
                b.clone(),
                b.params()
                    .iter()
                    .map(|p| m.parameter_index(p).expect("validated"))
                    .collect(),
            )
        })
        .collect();
    let budget = 1000 * range.end as u64;
    let n = m.parameters().len();
    let results: Vec<Result<(Valuation, u64), SamplingError>> = range
        .into_par_iter()
        .map(|index| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(index as u64);
            let mut rejected = 0u64;
            loop {
                let u = Valuation(dist.draw_raw(&plan, n, &mut rng));
                match m.instantiate_with(
                    &u,
                    InstantiateOptions {
                        transitions_only: true,
                        ..Default::default()
                    },
                ) {
                    Ok(_) => return Ok((u, rejected)),
                    Err(
                        ModelError::NotGraphPreserving { .. } | ModelError::NotWellDefined { .. },
                    ) => {
                        rejected += 1;
                        if rejected > budget {
                            return Err(SamplingError::RejectionBudgetExceeded { index, budget });
                        }
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        })
        .collect();
    let mut samples = Vec::with_capacity(results.len());
    let mut rejected_count = 0;
    for r in results {
        let (u, rej) = r?;
        samples.push(u);
        rejected_count += rej;
    }
    Ok(SampleSet {
        seed,
        parameters: m.parameters().iter().map(|p| p.name.clone()).collect(),
        samples,
        rejected_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Choice, ModelParts};
    use crate::polynomial::{Parameter, Polynomial};

    fn coin(params: &[&str]) -> ParametricModel {
        // s0 -> s_i with probability params[i] (last one implicit).
        let n = params.len() + 1;
        let mut trans = Vec::new();
        let mut rest = Polynomial::one();
        for (i, p) in params.iter().enumerate() {
            trans.push((i + 1, Polynomial::var(p)));
            rest = rest - Polynomial::var(p);
        }
        trans.push((n, rest));
        let mut choices = vec![vec![Choice {
            action: 0,
            transitions: trans,
            cost: None,
        }]];
        for s in 1..=n {
            choices.push(vec![Choice {
                action: 0,
                transitions: vec![(s, Polynomial::one())],
                cost: None,
            }]);
        }
        ParametricModel::new(ModelParts {
            name: "coin".into(),
            states: (0..=n).map(|i| format!("s{i}")).collect(),
            actions: vec!["a".into()],
            choices,
            initial: 0,
            parameters: params
                .iter()
                .map(|p| Parameter::uncontrollable(*p))
                .collect(),
            target: vec![1],
            goal: None,
            declared_mc: true,
        })
        .unwrap()
    }

    #[test]
    fn zero_samples_rejected() {
        let m = coin(&["v"]);
        let d = ParameterDistribution::uniform("v", 0.0, 1.0);
        assert_eq!(draw(&d, &m, 0, 1).unwrap_err(), SamplingError::ZeroSamples);
    }

    #[test]
    fn deterministic_and_prefix_closed() {
        let m = coin(&["v"]);
        let d = ParameterDistribution::uniform("v", 0.0, 1.0);
        let a = draw(&d, &m, 50, 9).unwrap();
        let b = draw(&d, &m, 50, 9).unwrap();
        assert_eq!(a, b);
        let c = draw(&d, &m, 20, 9).unwrap();
        for (x, y) in a.samples.iter().zip(&c.samples) {
            assert_eq!(x.0[0].to_bits(), y.0[0].to_bits());
        }
        let tail = draw_range(&d, &m, 20..50, 9).unwrap();
        assert_eq!(&a.samples[20..], &tail.samples[..]);
        assert_ne!(draw(&d, &m, 50, 10).unwrap().samples, a.samples);
    }

    #[test]
    fn dirichlet_points_are_interior() {
        let m = coin(&["a", "b", "c"]);
        let d = ParameterDistribution::new(vec![Block::Dirichlet {
            group: "g".into(),
            weights: vec![1.0, 5.0, 1.0, 1.0],
            params: vec!["a".into(), "b".into(), "c".into()],
        }]);
        let s = draw(&d, &m, 2000, 3).unwrap();
        let mut mean_b = 0.0;
        for u in &s.samples {
            let v = u.values();
            assert!(v.iter().all(|x| *x > 0.0) && v.iter().sum::<f64>() < 1.0);
            mean_b += v[1];
        }
        mean_b /= 2000.0;
        // E[b] = 5/8
        assert!((mean_b - 0.625).abs() < 0.02, "{mean_b}");
    }

    #[test]
    fn discrete_rejection_is_counted() {
        let m = coin(&["v"]);
        let d = ParameterDistribution::new(vec![Block::Single {
            param: "v".into(),
            marginal: Marginal::Discrete(vec![(0.0, 1.0), (0.5, 1.0)]),
        }]);
        let s = draw(&d, &m, 200, 5).unwrap();
        assert!(s.samples.iter().all(|u| u.0[0] == 0.5));
        assert!(
            s.rejected_count > 50 && s.rejected_count < 400,
            "{}",
            s.rejected_count
        );

        let bad = ParameterDistribution::new(vec![Block::Single {
            param: "v".into(),
            marginal: Marginal::Discrete(vec![(1.0, 1.0)]),
        }]);
        assert!(matches!(
            draw(&bad, &m, 1, 5),
            Err(SamplingError::RejectionBudgetExceeded { .. })
        ));
    }

    #[test]
    fn coverage_is_checked() {
        let m = coin(&["a", "b"]);
        let d = ParameterDistribution::uniform("a", 0.0, 0.5);
        assert_eq!(d.validate(&m), Err(SamplingError::Uncovered("b".into())));
        let mut d2 = d.clone();
        d2.blocks.push(Block::Single {
            param: "a".into(),
            marginal: Marginal::Uniform {
                low: 0.0,
                high: 0.5,
            },
        });
        d2.blocks.push(Block::Single {
            param: "b".into(),
            marginal: Marginal::Uniform {
                low: 0.0,
                high: 0.5,
            },
        });
        assert_eq!(
            d2.validate(&m),
            Err(SamplingError::CoveredTwice("a".into()))
        );
        let d3 = ParameterDistribution::uniform("zz", 0.0, 1.0);
        assert_eq!(
            d3.validate(&m),
            Err(SamplingError::NotUncontrollable("zz".into()))
        );
    }
}
