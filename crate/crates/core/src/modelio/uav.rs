//! UAV gridworld: a drone moves through a 3-D grid while random wind pushes
//! it around. States are (cell, weather, wind direction); the weather follows
//! a parametric Markov chain and each (zone, weather) pair owns a parametric
//! distribution over the eight horizontal wind directions.

use std::collections::{HashMap, HashSet};
use std::str::FromStr;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Choice, ModelParts, ParametricModel};
use crate::polynomial::{Parameter, Polynomial};
use crate::sampling::{Block, ParameterDistribution};

use super::UncertainModel;

/// Horizontal wind directions, clockwise from +y.
pub const WIND: [(i64, i64); 8] = [
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
];

/// Steps beyond the start-to-target distance in the default horizon.
pub const HORIZON_SLACK: usize = 3;

/// Cost of hitting an obstacle in cost mode.
pub const CRASH_COST: i64 = 100;

/// Wind-direction weather presets: Dirichlet weights over the eight directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UavPreset {
    /// Every direction equally likely a priori.
    Uniform,
    /// Wind towards +y five times more likely.
    BiasY,
    /// Wind towards −x five times more likely.
    BiasNegX,
}

impl UavPreset {
    pub fn weights(self) -> [f64; 8] {
        let mut w = [1.0; 8];
        match self {
            UavPreset::Uniform => {}
            UavPreset::BiasY => w[0] = 5.0,
            UavPreset::BiasNegX => w[6] = 5.0,
        }
        w
    }

    pub fn name(self) -> &'static str {
        match self {
            UavPreset::Uniform => "uniform",
            UavPreset::BiasY => "bias-y",
            UavPreset::BiasNegX => "bias-neg-x",
        }
    }

    pub const ALL: [UavPreset; 3] = [UavPreset::Uniform, UavPreset::BiasY, UavPreset::BiasNegX];
}

impl FromStr for UavPreset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        UavPreset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown preset `{s}` (expected uniform, bias-y or bias-neg-x)"))
    }
}

pub type Cell = [usize; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavConfig {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub weathers: usize,
    /// Number of wind zones along x and y; the grid is split into blocks.
    pub zones: (usize, usize),
    pub initial: Cell,
    pub targets: Vec<Cell>,
    pub obstacles: Vec<Cell>,
    /// Adds a step counter; states that run out of time become absorbing.
    pub horizon: Option<usize>,
    /// Obstacles cost 100 and send the drone back to the start instead of
    /// being absorbing; moves along x and y cost `1 + wx` and `1 + wy`.
    pub cost_mode: bool,
    pub preset: UavPreset,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("grid dimensions and weather count must be at least 1")]
    EmptyGrid,
    #[error("zones {0:?} do not fit a {1}x{2} grid")]
    InconsistentZones((usize, usize), usize, usize),
    #[error("cell {0:?} lies outside the grid")]
    OutsideGrid(Cell),
    #[error("the initial cell is an obstacle")]
    InitialIsObstacle,
    #[error("no target cell")]
    NoTarget,
    #[error("a target cell is also an obstacle")]
    TargetIsObstacle,
    #[error("expected costs with a horizon are not supported")]
    HorizonWithCosts,
}

impl UavConfig {
    /// A grid with the default layout: start in the (−x, +y) corner on the
    /// ground, target column in the (+x, −y) corner, and a few obstacles
    /// between them.
    pub fn new(nx: usize, ny: usize, nz: usize, weathers: usize) -> Self {
        let mut obstacles = Vec::new();
        if nx >= 4 && ny >= 4 {
            // a wall across the diagonal with a gap, plus low buildings
            for i in 1..nx.min(ny) - 1 {
                let (x, y) = (i, ny - 1 - i);
                if i % 3 != 2 {
                    for z in 0..nz.saturating_sub(1).max(1) {
                        obstacles.push([x, y, z]);
                    }
                }
            }
        }
        let targets = (0..nz).map(|z| [nx.saturating_sub(1), 0, z]).collect();
        UavConfig {
            nx,
            ny,
            nz,
            weathers,
            zones: (nx.min(2), ny.min(2)),
            initial: [0, ny.saturating_sub(1), 0],
            targets,
            obstacles,
            horizon: None,
            cost_mode: false,
            preset: UavPreset::Uniform,
        }
    }

    /// The desk-scale benchmark: 6×6×2 grid, 2 weather conditions and 13
    /// steps to reach the target. Without a deadline the drone can always
    /// wait for calm weather and every sample satisfies P ≥ 0.9 trivially.
    pub fn desk() -> Self {
        let mut c = Self::new(6, 6, 2, 2);
        c.horizon = Some(c.default_horizon());
        c
    }

    /// Horizontal distance from the start to the nearest target plus
    /// [`HORIZON_SLACK`].
    pub fn default_horizon(&self) -> usize {
        let dist = |t: &Cell| t[0].abs_diff(self.initial[0]) + t[1].abs_diff(self.initial[1]);
        self.targets.iter().map(dist).min().unwrap_or(0) + HORIZON_SLACK
    }

    /// A 2-D variant for expected costs: 6×6×1 grid, 2 weather conditions,
    /// crashes cost 100 and restart the mission.
    pub fn desk_cost() -> Self {
        let mut c = Self::new(6, 6, 1, 2);
        c.cost_mode = true;
        c
    }

    /// A configuration close to the large case study (about 269 000 states
    /// and 2 500 parameters). Not used by default: it is slow to check.
    pub fn large_scale() -> Self {
        let mut c = Self::new(30, 28, 10, 4);
        c.zones = (9, 10);
        c
    }

    pub fn num_zones(&self) -> usize {
        self.zones.0 * self.zones.1
    }

    pub fn zone(&self, x: usize, y: usize) -> usize {
        let zx = x * self.zones.0 / self.nx;
        let zy = y * self.zones.1 / self.ny;
        zx * self.zones.1 + zy
    }

    /// Number of states of the generated model.
    pub fn num_states(&self) -> usize {
        self.nx * self.ny * self.nz * self.weathers * WIND.len() * self.horizon.map_or(1, |h| h + 1)
    }

    /// Number of uncontrollable parameters of the generated model.
    pub fn num_parameters(&self) -> usize {
        self.num_zones() * self.weathers * (WIND.len() - 1) + self.weathers * (self.weathers - 1)
    }

    fn check(&self) -> Result<(), ConfigError> {
        if self.nx == 0 || self.ny == 0 || self.nz == 0 || self.weathers == 0 {
            return Err(ConfigError::EmptyGrid);
        }
        let (zx, zy) = self.zones;
        if zx == 0 || zy == 0 || zx > self.nx || zy > self.ny {
            return Err(ConfigError::InconsistentZones(self.zones, self.nx, self.ny));
        }
        let inside = |c: &Cell| c[0] < self.nx && c[1] < self.ny && c[2] < self.nz;
        for c in std::iter::once(&self.initial)
            .chain(&self.targets)
            .chain(&self.obstacles)
        {
            if !inside(c) {
                return Err(ConfigError::OutsideGrid(*c));
            }
        }
        if self.targets.is_empty() {
            return Err(ConfigError::NoTarget);
        }
        if self.obstacles.contains(&self.initial) {
            return Err(ConfigError::InitialIsObstacle);
        }
        if self.targets.iter().any(|t| self.obstacles.contains(t)) {
            return Err(ConfigError::TargetIsObstacle);
        }
        if self.cost_mode && self.horizon.is_some() {
            return Err(ConfigError::HorizonWithCosts);
        }
        Ok(())
    }
}

fn frac(n: i64, d: i64) -> Polynomial {
    Polynomial::constant(BigRational::new(n.into(), d.into()))
}

const MOVES: [(&str, [i64; 3]); 7] = [
    ("north", [0, 1, 0]),
    ("south", [0, -1, 0]),
    ("east", [1, 0, 0]),
    ("west", [-1, 0, 0]),
    ("up", [0, 0, 1]),
    ("down", [0, 0, -1]),
    ("hover", [0, 0, 0]),
];

/// Generates the UAV model and its parameter distribution.
pub fn generate_uav(cfg: &UavConfig) -> Result<UncertainModel, ConfigError> {
    cfg.check()?;
    let nw = cfg.weathers;
    let nd = WIND.len();
    let steps = cfg.horizon.map_or(1, |h| h + 1);

    // parameters and distribution
    let mut parameters = Vec::new();
    let mut blocks = Vec::new();
    let mut weather = vec![vec![Polynomial::one(); nw]; nw];
    for w in 0..nw {
        if nw == 1 {
            break;
        }
        let names: Vec<String> = (0..nw - 1).map(|v| format!("q_w{w}_{v}")).collect();
        let mut rest = Polynomial::one();
        for (v, n) in names.iter().enumerate() {
            parameters.push(Parameter::uncontrollable(n));
            weather[w][v] = Polynomial::var(n);
            rest = rest - Polynomial::var(n);
        }
        weather[w][nw - 1] = rest;
        blocks.push(Block::Dirichlet {
            group: format!("weather_w{w}"),
            weights: vec![1.0; nw],
            params: names,
        });
    }
    let mut wind = vec![vec![vec![Polynomial::one(); nd]; nw]; cfg.num_zones()];
    for (z, zone) in wind.iter_mut().enumerate() {
        for (w, dist) in zone.iter_mut().enumerate() {
            let names: Vec<String> = (0..nd - 1).map(|d| format!("p_z{z}_w{w}_d{d}")).collect();
            let mut rest = Polynomial::one();
            for (d, n) in names.iter().enumerate() {
                parameters.push(Parameter::uncontrollable(n));
                dist[d] = Polynomial::var(n);
                rest = rest - Polynomial::var(n);
            }
            dist[nd - 1] = rest;
            blocks.push(Block::Dirichlet {
                group: format!("wind_z{z}_w{w}"),
                weights: cfg.preset.weights().to_vec(),
                params: names,
            });
        }
    }
    if cfg.cost_mode {
        parameters.push(Parameter::cost("wx"));
        parameters.push(Parameter::cost("wy"));
    }

    let index = |c: Cell, w: usize, d: usize, t: usize| {
        (((((c[0] * cfg.ny + c[1]) * cfg.nz + c[2]) * nw + w) * nd + d) * steps) + t
    };
    let mut states = vec![String::new(); cfg.num_states()];
    for x in 0..cfg.nx {
        for y in 0..cfg.ny {
            for z in 0..cfg.nz {
                for w in 0..nw {
                    for d in 0..nd {
                        for t in 0..steps {
                            let name = if cfg.horizon.is_some() {
                                format!("x{x}_y{y}_z{z}_w{w}_d{d}_t{t}")
                            } else {
                                format!("x{x}_y{y}_z{z}_w{w}_d{d}")
                            };
                            states[index([x, y, z], w, d, t)] = name;
                        }
                    }
                }
            }
        }
    }

    let mut actions: Vec<String> = MOVES.iter().map(|m| m.0.to_string()).collect();
    actions.push("stay".into());
    actions.push("reset".into());
    let (stay, reset) = (MOVES.len(), MOVES.len() + 1);

    let targets: HashSet<Cell> = cfg.targets.iter().copied().collect();
    let obstacles: HashSet<Cell> = cfg.obstacles.iter().copied().collect();
    // probability of an extra push in weather w
    let strength: Vec<Polynomial> = (0..nw)
        .map(|w| frac(w as i64 + 1, 2 * (nw as i64 + 1)))
        .collect();
    // product of weather change and new wind direction, cached per (w, zone, w', d')
    let mut env: HashMap<(usize, usize, usize, usize), Polynomial> = HashMap::new();
    let mut env_prob = |w: usize, zone: usize, w2: usize, d2: usize| -> Polynomial {
        env.entry((w, zone, w2, d2))
            .or_insert_with(|| &weather[w][w2] * &wind[zone][w2][d2])
            .clone()
    };
    let clamp = |v: i64, n: usize| v.clamp(0, n as i64 - 1) as usize;
    let cost_x = Polynomial::one() + Polynomial::var("wx");
    let cost_y = Polynomial::one() + Polynomial::var("wy");

    let mut choices = vec![Vec::new(); states.len()];
    let mut target_states = Vec::new();
    for x in 0..cfg.nx {
        for y in 0..cfg.ny {
            for z in 0..cfg.nz {
                let cell = [x, y, z];
                let zone = cfg.zone(x, y);
                for w in 0..nw {
                    for d in 0..nd {
                        for t in 0..steps {
                            let s = index(cell, w, d, t);
                            let self_loop = || {
                                vec![Choice {
                                    action: stay,
                                    transitions: vec![(s, Polynomial::one())],
                                    cost: None,
                                }]
                            };
                            if targets.contains(&cell) {
                                target_states.push(s);
                                choices[s] = self_loop();
                                continue;
                            }
                            if obstacles.contains(&cell) {
                                if cfg.cost_mode {
                                    let start = cfg.initial;
                                    let zs = cfg.zone(start[0], start[1]);
                                    let mut trans = Vec::new();
                                    for w2 in 0..nw {
                                        for d2 in 0..nd {
                                            trans.push((
                                                index(start, w2, d2, 0),
                                                env_prob(w, zs, w2, d2),
                                            ));
                                        }
                                    }
                                    choices[s] = vec![Choice {
                                        action: reset,
                                        transitions: trans,
                                        cost: Some(frac(CRASH_COST, 1)),
                                    }];
                                } else {
                                    choices[s] = self_loop();
                                }
                                continue;
                            }
                            if cfg.horizon.is_some_and(|h| t == h) {
                                choices[s] = self_loop();
                                continue;
                            }
                            let t2 = if cfg.horizon.is_some() { t + 1 } else { 0 };
                            let mut row = Vec::new();
                            for (a, (_, m)) in MOVES.iter().enumerate() {
                                if (m[2] == 1 && z + 1 == cfg.nz) || (m[2] == -1 && z == 0) {
                                    continue;
                                }
                                let moved = [
                                    clamp(x as i64 + m[0], cfg.nx),
                                    clamp(y as i64 + m[1], cfg.ny),
                                    clamp(z as i64 + m[2], cfg.nz),
                                ];
                                let (wx, wy) = WIND[d];
                                let pushed = [
                                    clamp(moved[0] as i64 + wx, cfg.nx),
                                    clamp(moved[1] as i64 + wy, cfg.ny),
                                    moved[2],
                                ];
                                let mut trans = Vec::with_capacity(2 * nw * nd);
                                for w2 in 0..nw {
                                    for d2 in 0..nd {
                                        let e = env_prob(w, zone, w2, d2);
                                        let no_push =
                                            &(Polynomial::one() - strength[w].clone()) * &e;
                                        trans.push((index(moved, w2, d2, t2), no_push));
                                        trans.push((index(pushed, w2, d2, t2), &strength[w] * &e));
                                    }
                                }
                                let cost = if !cfg.cost_mode {
                                    None
                                } else if m[0] != 0 {
                                    Some(cost_x.clone())
                                } else if m[1] != 0 {
                                    Some(cost_y.clone())
                                } else {
                                    Some(Polynomial::one())
                                };
                                row.push(Choice {
                                    action: a,
                                    transitions: trans,
                                    cost,
                                });
                            }
                            choices[s] = row;
                        }
                    }
                }
            }
        }
    }

    let initial = index(cfg.initial, 0, 0, 0);
    target_states.sort_unstable();
    let name = format!(
        "uav-{}x{}x{}-w{}-{}{}",
        cfg.nx,
        cfg.ny,
        cfg.nz,
        cfg.weathers,
        cfg.preset.name(),
        if cfg.cost_mode { "-cost" } else { "" }
    );
    let parts = ModelParts {
        name,
        states,
        actions,
        choices,
        initial,
        parameters,
        target: target_states.clone(),
        goal: if cfg.cost_mode {
            Some(target_states)
        } else {
            None
        },
        declared_mc: false,
    };
    let model = ParametricModel::new(parts).expect("generated UAV models are valid");
    Ok(UncertainModel {
        model,
        distribution: ParameterDistribution::new(blocks),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_horizon() {
        let cfg = UavConfig::desk();
        assert_eq!(cfg.horizon, Some(13));
        assert_eq!(cfg.num_states(), 6 * 6 * 2 * 2 * 8 * 14);
        assert!(UavConfig::desk_cost().horizon.is_none());
    }

    #[test]
    fn state_and_parameter_counts() {
        let mut cfg = UavConfig::new(4, 4, 1, 2);
        cfg.zones = (1, 1);
        let um = generate_uav(&cfg).unwrap();
        assert_eq!(um.model.num_states(), 4 * 4 * 2 * 8);
        assert_eq!(cfg.num_parameters(), 7 * 2 + 2);
        assert_eq!(um.model.parameters().len(), cfg.num_parameters());
        assert!(um.distribution.validate(&um.model).is_ok());
    }

    #[test]
    fn config_errors() {
        assert_eq!(
            generate_uav(&UavConfig::new(0, 4, 1, 2)).unwrap_err(),
            ConfigError::EmptyGrid
        );
        assert_eq!(
            generate_uav(&UavConfig::new(4, 4, 0, 2)).unwrap_err(),
            ConfigError::EmptyGrid
        );
        let mut cfg = UavConfig::new(4, 4, 1, 2);
        cfg.zones = (5, 1);
        assert!(matches!(
            generate_uav(&cfg),
            Err(ConfigError::InconsistentZones(..))
        ));
        let mut cfg = UavConfig::new(4, 4, 1, 2);
        cfg.obstacles.push(cfg.initial);
        assert_eq!(
            generate_uav(&cfg).unwrap_err(),
            ConfigError::InitialIsObstacle
        );
        let mut cfg = UavConfig::new(4, 4, 1, 2);
        cfg.targets = vec![[4, 0, 0]];
        assert!(matches!(
            generate_uav(&cfg),
            Err(ConfigError::OutsideGrid(_))
        ));
        let mut cfg = UavConfig::new(4, 4, 1, 2);
        cfg.cost_mode = true;
        cfg.horizon = Some(3);
        assert_eq!(
            generate_uav(&cfg).unwrap_err(),
            ConfigError::HorizonWithCosts
        );
    }

    #[test]
    fn presets_parse() {
        for p in UavPreset::ALL {
            assert_eq!(p.name().parse::<UavPreset>().unwrap(), p);
        }
        assert!("west".parse::<UavPreset>().is_err());
    }
}
