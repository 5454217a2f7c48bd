//! Flat `key = value` experiment configuration.
//!
//! Blank lines and `#` comments are ignored. Unknown keys are errors.
//! `alpha0_grid` takes a comma-separated list whose items are plain numbers,
//! powers of two (`2^-3`), or power-of-two ranges (`2^-8..2^3`).

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::envs::{CartPoleConfig, PuddleWorldConfig};
use crate::error::{Error, Result};
use crate::learners::TdVariant;
use crate::stepsize::StepSizeSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    PuddleWorld,
    CartPole,
    RandomMrp,
}

impl Domain {
    pub fn as_str(&self) -> &'static str {
        match self {
            Domain::PuddleWorld => "puddle_world",
            Domain::CartPole => "cart_pole",
            Domain::RandomMrp => "random_mrp",
        }
    }
}

impl FromStr for Domain {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "puddle_world" => Ok(Domain::PuddleWorld),
            "cart_pole" => Ok(Domain::CartPole),
            "random_mrp" => Ok(Domain::RandomMrp),
            _ => Err(Error::Config(format!("unknown domain `{s}`"))),
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    TdStandard,
    TdImplicit,
    SarsaStandard,
    SarsaImplicit,
    SarsaAlphaBound,
    SarsaImplicitAlphaBound,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::TdStandard,
        Algorithm::TdImplicit,
        Algorithm::SarsaStandard,
        Algorithm::SarsaImplicit,
        Algorithm::SarsaAlphaBound,
        Algorithm::SarsaImplicitAlphaBound,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::TdStandard => "td_standard",
            Algorithm::TdImplicit => "td_implicit",
            Algorithm::SarsaStandard => "sarsa_standard",
            Algorithm::SarsaImplicit => "sarsa_implicit",
            Algorithm::SarsaAlphaBound => "sarsa_alpha_bound",
            Algorithm::SarsaImplicitAlphaBound => "sarsa_implicit_alpha_bound",
        }
    }

    pub fn variant(&self) -> TdVariant {
        match self {
            Algorithm::TdStandard | Algorithm::SarsaStandard | Algorithm::SarsaAlphaBound => TdVariant::Standard,
            Algorithm::TdImplicit | Algorithm::SarsaImplicit | Algorithm::SarsaImplicitAlphaBound => {
                TdVariant::Implicit
            }
        }
    }

    /// Control algorithms improve an ε-greedy policy; the TD ones evaluate a
    /// fixed (uniformly random) policy.
    pub fn is_control(&self) -> bool {
        !matches!(self, Algorithm::TdStandard | Algorithm::TdImplicit)
    }

    pub fn schedule(&self, alpha0: f64) -> Result<StepSizeSchedule> {
        match self {
            Algorithm::SarsaAlphaBound | Algorithm::SarsaImplicitAlphaBound => StepSizeSchedule::alpha_bound(alpha0),
            _ => StepSizeSchedule::constant(alpha0),
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}`")))
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub domain: Domain,
    pub algorithm: Algorithm,
    pub alpha0_grid: Vec<f64>,
    pub lambda: f64,
    pub gamma: f64,
    pub fourier_order: usize,
    pub total_steps: usize,
    pub n_seeds: usize,
    pub eval_window: usize,
    pub epsilon: f64,
    pub base_seed: u64,
    /// Audit sampling period, in transitions.
    pub audit_every: usize,
    pub mrp_states: usize,
    pub mrp_reward_scale: f64,
    pub puddle: PuddleWorldConfig,
    pub cart_pole: CartPoleConfig,
}

/// α₀ ∈ {2⁻⁸, 2⁻⁷, …, 2³}.
pub fn default_alpha_grid() -> Vec<f64> {
    (-8..=3).map(|p| 2f64.powi(p)).collect()
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            domain: Domain::PuddleWorld,
            algorithm: Algorithm::SarsaImplicit,
            alpha0_grid: default_alpha_grid(),
            lambda: 0.5,
            gamma: 0.99,
            fourier_order: 3,
            total_steps: 40_000,
            n_seeds: 5,
            eval_window: 4_000,
            epsilon: crate::control::DEFAULT_EPSILON,
            base_seed: 0,
            audit_every: 1,
            mrp_states: 5,
            mrp_reward_scale: 1.0,
            puddle: PuddleWorldConfig::default(),
            cart_pole: CartPoleConfig::default(),
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn parse_pow2(item: &str) -> Option<i32> {
    item.strip_prefix("2^").and_then(|p| p.parse().ok())
}

fn parse_grid(value: &str) -> Result<Vec<f64>> {
    let mut grid = Vec::new();
    for item in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((lo, hi)) = item.split_once("..") {
            let (lo, hi) = parse_pow2(lo.trim())
                .zip(parse_pow2(hi.trim()))
                .ok_or_else(|| Error::Config(format!("`alpha0_grid`: bad range `{item}`")))?;
            grid.extend((lo..=hi).map(|p| 2f64.powi(p)));
        } else if let Some(p) = parse_pow2(item) {
            grid.push(2f64.powi(p));
        } else {
            grid.push(parse_num("alpha0_grid", item)?);
        }
    }
    Ok(grid)
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            config.set(key.trim(), value.trim())?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "domain" => self.domain = value.parse()?,
            "algorithm" => self.algorithm = value.parse()?,
            "alpha0_grid" => self.alpha0_grid = parse_grid(value)?,
            "lambda" => self.lambda = parse_num(key, value)?,
            "gamma" => self.gamma = parse_num(key, value)?,
            "fourier_order" => self.fourier_order = parse_num(key, value)?,
            "total_steps" => self.total_steps = parse_num(key, value)?,
            "n_seeds" => self.n_seeds = parse_num(key, value)?,
            "eval_window" => self.eval_window = parse_num(key, value)?,
            "epsilon" => self.epsilon = parse_num(key, value)?,
            "seed" => self.base_seed = parse_num(key, value)?,
            "audit_every" => self.audit_every = parse_num(key, value)?,
            "mrp_states" => self.mrp_states = parse_num(key, value)?,
            "mrp_reward_scale" => self.mrp_reward_scale = parse_num(key, value)?,
            "puddle.step_length" => self.puddle.step_length = parse_num(key, value)?,
            "puddle.noise_std" => self.puddle.noise_std = parse_num(key, value)?,
            "puddle.goal_sum" => self.puddle.goal_sum = parse_num(key, value)?,
            "puddle.max_steps" => self.puddle.max_steps = parse_num(key, value)?,
            "cart_pole.dt" => self.cart_pole.dt = parse_num(key, value)?,
            "cart_pole.force" => self.cart_pole.force = parse_num(key, value)?,
            "cart_pole.max_steps" => self.cart_pole.max_steps = parse_num(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies `key=value` overrides, then re-validates.
    pub fn apply_overrides<'a>(&mut self, overrides: impl IntoIterator<Item = &'a str>) -> Result<()> {
        for item in overrides {
            let (k, v) =
                item.split_once('=').ok_or_else(|| Error::Config(format!("override `{item}` is not key=value")))?;
            self.set(k.trim(), v.trim())?;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if let Some(a) = self.alpha0_grid.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            return fail(format!("alpha0_grid values must be positive, got {a}"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return fail(format!("gamma must lie in (0,1), got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return fail(format!("lambda must lie in [0,1], got {}", self.lambda));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return fail(format!("epsilon must lie in [0,1], got {}", self.epsilon));
        }
        if self.n_seeds == 0 {
            return fail("n_seeds must be >= 1".into());
        }
        if self.total_steps == 0 {
            return fail("total_steps must be >= 1".into());
        }
        if self.eval_window == 0 || self.eval_window > self.total_steps {
            return fail(format!("eval_window must lie in [1, total_steps], got {}", self.eval_window));
        }
        if self.audit_every == 0 {
            return fail("audit_every must be >= 1".into());
        }
        if self.domain == Domain::RandomMrp {
            if self.algorithm.is_control() {
                return fail(format!("{} needs an environment with actions, not random_mrp", self.algorithm));
            }
            if self.mrp_states < 2 {
                return fail("mrp_states must be >= 2".into());
            }
        }
        if self.puddle.noise_std < 0.0 || self.puddle.max_steps == 0 || self.cart_pole.max_steps == 0 {
            return fail("environment parameters out of range".into());
        }
        Ok(())
    }
}
