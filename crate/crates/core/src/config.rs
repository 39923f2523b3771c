//! Run configuration read from a single JSON file. Every field has a
//! default; the fully resolved configuration is echoed next to each
//! command's outputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dct::CoeffSelection;
use crate::design::{uniform_grid, DesignSpec};
use crate::error::{Error, Result};
use crate::forward::{ToyWatercut, Transform};
use crate::posterior::Hyperparams;
use crate::sampler::{ChainConfig, MoveProbs};
use crate::upscale::CoarseGeometry;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub grid: GridConfig,
    pub selection: CoeffSelection,
    pub design: DesignConfig,
    pub forward: ForwardConfig,
    pub hyperparams: Hyperparams,
    pub chain: ChainSection,
    pub fit: FitConfig,
    pub files: FilesConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 1,
            grid: GridConfig::default(),
            selection: CoeffSelection::Triangle(5),
            design: DesignConfig::default(),
            forward: ForwardConfig::default(),
            hyperparams: Hyperparams::default(),
            chain: ChainSection::default(),
            fit: FitConfig::default(),
            files: FilesConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub rows: usize,
    pub cols: usize,
    pub coarse_rows: usize,
    pub coarse_cols: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            rows: 25,
            cols: 25,
            coarse_rows: 5,
            coarse_cols: 5,
        }
    }
}

impl GridConfig {
    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn coarse_geometry(&self) -> Result<CoarseGeometry> {
        CoarseGeometry::over(self.dims(), self.coarse_rows, self.coarse_cols)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignConfig {
    pub n_candidates: usize,
    pub n_select: usize,
    pub gamma: Option<f64>,
    /// Explicit known-input grid; overrides `n_pvi`.
    pub pvi_grid: Option<Vec<f64>>,
    /// Size of the default grid `1/n, ..., 1`.
    pub n_pvi: usize,
}

impl Default for DesignConfig {
    fn default() -> Self {
        Self {
            n_candidates: 1000,
            n_select: 100,
            gamma: None,
            pvi_grid: None,
            n_pvi: 50,
        }
    }
}

impl DesignConfig {
    pub fn spec(&self, seed: u64) -> DesignSpec {
        DesignSpec {
            n_candidates: self.n_candidates,
            n_select: self.n_select,
            gamma: self.gamma,
            pvi_grid: self.pvi_grid.clone().unwrap_or_else(|| uniform_grid(self.n_pvi)),
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    ToyWatercut,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForwardConfig {
    pub model: ModelKind,
    pub a: f64,
    pub c0: f64,
    pub c1: f64,
    pub band_row: Option<usize>,
    /// Noise sd added on the transformed scale by `simulate`.
    pub noise_sd: f64,
    pub transform: Transform,
}

impl Default for ForwardConfig {
    fn default() -> Self {
        let toy = ToyWatercut::default();
        Self {
            model: ModelKind::ToyWatercut,
            a: toy.a,
            c0: toy.c0,
            c1: toy.c1,
            band_row: toy.band_row,
            noise_sd: 0.0,
            transform: Transform::Logit,
        }
    }
}

impl ForwardConfig {
    pub fn toy(&self) -> Result<ToyWatercut> {
        let m = ToyWatercut {
            a: self.a,
            c0: self.c0,
            c1: self.c1,
            band_row: self.band_row,
        };
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainSection {
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub h: Vec<f64>,
    pub move_probs: MoveProbs,
    pub adapt_h: bool,
    /// `None`: hold `tau_z = 1` when there are no observed outputs (`fit`)
    /// and sample it otherwise (`calibrate`).
    pub fix_tau: Option<bool>,
    pub n_chains: usize,
}

impl Default for ChainSection {
    fn default() -> Self {
        let c = ChainConfig::default();
        Self {
            n_iter: c.n_iter,
            burn_in: c.burn_in,
            thin: c.thin,
            h: c.h,
            move_probs: c.move_probs,
            adapt_h: c.adapt_h,
            fix_tau: None,
            n_chains: 1,
        }
    }
}

impl ChainSection {
    pub fn chain_config(&self, seed: u64, has_observed: bool) -> Result<ChainConfig> {
        if self.n_chains == 0 {
            return Err(Error::InvalidConfig("n_chains must be >= 1".into()));
        }
        let cfg = ChainConfig {
            n_iter: self.n_iter,
            burn_in: self.burn_in,
            thin: self.thin,
            h: self.h.clone(),
            seed,
            move_probs: self.move_probs,
            adapt_h: self.adapt_h,
            fix_tau: self.fix_tau.unwrap_or(!has_observed),
        };
        cfg.validate()?;
        if cfg.h.iter().any(|h| *h <= 0.0) {
            return Err(Error::InvalidConfig("theta jump scale h must be positive".into()));
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Fraction of field ids, taken from the end, held out as test data.
    pub test_fraction: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { test_fraction: 0.1 }
    }
}

/// Input and output locations. Relative paths resolve against the config
/// file's directory; unset inputs default to files a previous command
/// wrote into the output directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilesConfig {
    /// Coarse field CSV (`design`, `calibrate`).
    pub coarse: Option<PathBuf>,
    pub deck: Option<PathBuf>,
    pub outputs: Option<PathBuf>,
    /// Observed outputs CSV with columns `pvi,raw` (`calibrate`).
    pub observed: Option<PathBuf>,
    /// Fine observations CSV with columns `row,col,value` (`calibrate`).
    pub fine: Option<PathBuf>,
    pub snapshot: Option<PathBuf>,
    /// Held-out samples CSV (`validate`).
    pub test: Option<PathBuf>,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Config = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Json(j) => Error::parse(path, j.line(), j.to_string()),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.selection.check_fits(self.grid.rows, self.grid.cols)?;
        self.grid.coarse_geometry()?;
        self.hyperparams.validate()?;
        self.forward.toy()?;
        if !(self.forward.noise_sd >= 0.0 && self.forward.noise_sd.is_finite()) {
            return Err(Error::InvalidConfig("forward.noise_sd must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.fit.test_fraction) {
            return Err(Error::InvalidConfig("fit.test_fraction must lie in [0, 1)".into()));
        }
        self.design.spec(self.seed).validate()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Resolves every relative path in `files` against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let f = &mut self.files;
        for p in [
            &mut f.coarse,
            &mut f.deck,
            &mut f.outputs,
            &mut f.observed,
            &mut f.fine,
            &mut f.snapshot,
            &mut f.test,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}
