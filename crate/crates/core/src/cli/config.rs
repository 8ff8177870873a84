use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::entropy::{ChiParams, HitParams, RoutePreference, Scale};
use crate::error::{Error, Result};
use crate::extraction::{CoverParams, ExtractionParams, Proposal, SelectionParams};
use crate::matrices::BallSampler;
use crate::moments::MomentSpec;
use crate::zones::{microstate_zone, Zone};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Seed and chunk plan; together they fix every random draw.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSettings {
    pub seed: u64,
    pub chunks: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self { seed: 0, chunks: 8 }
    }
}

pub trait ExperimentConfig: Serialize + DeserializeOwned + Default {
    fn run_settings(&mut self) -> &mut RunSettings;
    fn schema_version(&self) -> u32;
    fn validate(&self) -> Result<()>;

    fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        if c.schema_version() != CONFIG_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported config schema version {}",
                c.schema_version()
            )));
        }
        c.validate()?;
        Ok(c)
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn check_grid(name: &str, ks: &[usize]) -> Result<()> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(config_err(format!("{name} must be a nonempty list of positive sizes")));
    }
    if ks.windows(2).any(|w| w[1] <= w[0]) {
        return Err(config_err(format!("{name} must be strictly increasing")));
    }
    Ok(())
}

fn check_gamma(name: &str, g: f64) -> Result<()> {
    if !(g.is_finite() && g > 0.0) {
        return Err(config_err(format!("{name} must be positive")));
    }
    Ok(())
}

fn mc_params(samples: usize) -> ChiParams {
    ChiParams {
        route: RoutePreference::MonteCarlo,
        reference_radius: Some(1.05),
        hits: HitParams::with_samples(samples),
        ..ChiParams::default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EntropyConfig {
    pub schema_version: u32,
    pub run: RunSettings,
    pub zone: Zone,
    /// Cartesian powers Z^p of the zone to estimate.
    pub powers: Vec<usize>,
    pub scale: Scale,
    pub m: usize,
    pub gamma: f64,
    pub exact_k_grid: Vec<usize>,
    pub mc_k_grid: Vec<usize>,
    pub monte_carlo: ChiParams,
    /// Cells for the single-variable density comparisons.
    pub density_cells: usize,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            run: RunSettings::default(),
            zone: Zone::ball(1, 1.0).expect("unit ball"),
            powers: vec![1, 2],
            scale: Scale::default(),
            m: 1,
            gamma: 0.1,
            exact_k_grid: vec![2, 4, 8, 16, 24, 32],
            mc_k_grid: vec![2, 4, 8],
            monte_carlo: mc_params(100_000),
            density_cells: 4000,
        }
    }
}

impl ExperimentConfig for EntropyConfig {
    fn run_settings(&mut self) -> &mut RunSettings {
        &mut self.run
    }

    fn schema_version(&self) -> u32 {
        self.schema_version
    }

    fn validate(&self) -> Result<()> {
        if self.powers.is_empty() || self.powers.contains(&0) {
            return Err(config_err("powers must be positive"));
        }
        check_grid("exact_k_grid", &self.exact_k_grid)?;
        check_grid("mc_k_grid", &self.mc_k_grid)?;
        check_gamma("gamma", self.gamma)?;
        if self.m == 0 || self.density_cells < 10 {
            return Err(config_err("m must be positive and density_cells ≥ 10"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConcentrationConfig {
    pub schema_version: u32,
    pub run: RunSettings,
    pub n: usize,
    /// Degree of the moment neighborhood.
    pub m0: usize,
    pub gamma0: f64,
    pub k_list: Vec<usize>,
    pub samples: usize,
    /// Matrix size and sample count for the empirical-limit reference.
    pub reference_k: usize,
    pub reference_samples: usize,
    pub radius: f64,
    pub sampler: BallSampler,
    pub bootstrap: usize,
    pub level: f64,
}

impl Default for ConcentrationConfig {
    fn default() -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            run: RunSettings::default(),
            n: 1,
            m0: 2,
            gamma0: 0.1,
            k_list: vec![8, 16, 32],
            samples: 10_000,
            reference_k: 64,
            reference_samples: 200,
            radius: 1.0,
            sampler: BallSampler::default(),
            bootstrap: 1000,
            level: 0.95,
        }
    }
}

impl ExperimentConfig for ConcentrationConfig {
    fn run_settings(&mut self) -> &mut RunSettings {
        &mut self.run
    }

    fn schema_version(&self) -> u32 {
        self.schema_version
    }

    fn validate(&self) -> Result<()> {
        check_grid("k_list", &self.k_list)?;
        check_gamma("gamma0", self.gamma0)?;
        if self.n == 0 || self.m0 == 0 || self.reference_k == 0 {
            return Err(config_err("n, m0 and reference_k must be positive"));
        }
        if self.samples < 100 || self.reference_samples == 0 || self.bootstrap < 200 {
            return Err(config_err("need ≥ 100 samples, ≥ 1 reference sample, ≥ 200 bootstrap resamples"));
        }
        if !(self.radius > 0.0) || !(self.level > 0.0 && self.level < 1.0) {
            return Err(config_err("radius must be positive and level in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ensemble {
    Gue,
    UniformBall,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdditivityConfig {
    pub factor: Zone,
    pub copies: usize,
    pub k_grid: Vec<usize>,
    pub m: usize,
    pub gamma: f64,
    pub scale: Scale,
    pub monte_carlo: ChiParams,
}

impl Default for AdditivityConfig {
    fn default() -> Self {
        Self {
            factor: Zone::ball(1, 1.0).expect("unit ball"),
            copies: 2,
            k_grid: vec![2, 4],
            m: 1,
            gamma: 0.1,
            scale: Scale::default(),
            monte_carlo: mc_params(20_000),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FreenessConfig {
    pub ensemble: Ensemble,
    /// Entry variance of GUE draws.
    pub variance: f64,
    pub blocks: usize,
    /// Variables per block.
    pub block_n: usize,
    pub m0: usize,
    pub gamma0: f64,
    pub k_list: Vec<usize>,
    pub draws: usize,
    pub min_fraction: f64,
}

impl Default for FreenessConfig {
    fn default() -> Self {
        Self {
            ensemble: Ensemble::Gue,
            variance: 1.0,
            blocks: 2,
            block_n: 1,
            m0: 2,
            gamma0: 0.2,
            k_list: vec![8, 16, 32, 64],
            draws: 100,
            min_fraction: 0.9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProductFreenessConfig {
    pub schema_version: u32,
    pub run: RunSettings,
    pub additivity: AdditivityConfig,
    pub freeness: FreenessConfig,
}

impl Default for ProductFreenessConfig {
    fn default() -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            run: RunSettings::default(),
            additivity: AdditivityConfig::default(),
            freeness: FreenessConfig::default(),
        }
    }
}

impl ExperimentConfig for ProductFreenessConfig {
    fn run_settings(&mut self) -> &mut RunSettings {
        &mut self.run
    }

    fn schema_version(&self) -> u32 {
        self.schema_version
    }

    fn validate(&self) -> Result<()> {
        let a = &self.additivity;
        check_grid("additivity.k_grid", &a.k_grid)?;
        check_gamma("additivity.gamma", a.gamma)?;
        if a.copies == 0 || a.m == 0 {
            return Err(config_err("additivity needs copies ≥ 1 and m ≥ 1"));
        }
        let f = &self.freeness;
        check_grid("freeness.k_list", &f.k_list)?;
        check_gamma("freeness.gamma0", f.gamma0)?;
        if f.blocks < 2 || f.block_n == 0 || f.m0 == 0 || f.draws == 0 {
            return Err(config_err("freeness needs ≥ 2 blocks, block_n ≥ 1, m0 ≥ 1, draws ≥ 1"));
        }
        if !(f.variance > 0.0) {
            return Err(config_err("freeness.variance must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtractConfig {
    pub schema_version: u32,
    pub run: RunSettings,
    pub zone: Zone,
    pub scale: Scale,
    pub extraction: ExtractionParams,
    pub selection: SelectionParams,
    /// Stages (m, k_m).
    pub schedule: Vec<(usize, usize)>,
    /// Moment function the extracted values are compared against.
    pub reference: Option<MomentSpec>,
    /// A previous extraction.json to resume from.
    pub resume: Option<PathBuf>,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        let semicircle = MomentSpec::semicircle();
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            run: RunSettings::default(),
            zone: microstate_zone(&semicircle, Some(1.0)).expect("semicircle zone"),
            scale: Scale::default(),
            extraction: ExtractionParams {
                cover: CoverParams::default(),
                words: 4,
            },
            selection: SelectionParams {
                proposal: Proposal::Gue,
                ..SelectionParams::default()
            },
            schedule: (1..=3).map(|m| (m, 16 << m)).collect(),
            reference: Some(semicircle),
            resume: None,
        }
    }
}

impl ExperimentConfig for ExtractConfig {
    fn run_settings(&mut self) -> &mut RunSettings {
        &mut self.run
    }

    fn schema_version(&self) -> u32 {
        self.schema_version
    }

    fn validate(&self) -> Result<()> {
        if self.extraction.words == 0 {
            return Err(config_err("extraction.words must be positive"));
        }
        if self.schedule.iter().any(|&(m, k)| m == 0 || k == 0) {
            return Err(config_err("schedule stages need m ≥ 1 and k ≥ 1"));
        }
        if self.schedule.iter().any(|&(m, _)| m > self.extraction.words) {
            return Err(config_err("schedule m exceeds the extracted word count"));
        }
        if let Some(r) = &self.reference {
            if r.n() != self.zone.n() {
                return Err(config_err("reference and zone have different n"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateConfig {
    pub schema_version: u32,
    pub run: RunSettings,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            run: RunSettings::default(),
        }
    }
}

impl ExperimentConfig for ValidateConfig {
    fn run_settings(&mut self) -> &mut RunSettings {
        &mut self.run
    }

    fn schema_version(&self) -> u32 {
        self.schema_version
    }

    fn validate(&self) -> Result<()> {
        Ok(())
    }
}
