//! TOML experiment configuration.
//!
//! Every section is optional and unknown keys are rejected. Command-line
//! `--output` and `--seed` override the file.

use std::path::{Path, PathBuf};

use mwt_core::criterion::{GradientMode, LambdaMode};
use mwt_core::inversion::{Algorithm, InitMode, InversionOptions};
use mwt_core::model::{ImagingSetup, PhantomKind};
use mwt_core::{Error, Result};
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub phantom: Option<String>,
    pub snr_db: Option<f64>,
    /// Measurement file to invert instead of simulating from `phantom`.
    pub data: Option<PathBuf>,
    /// Reference contrast for `Δ_x` when `data` is given.
    pub truth: Option<PathBuf>,
    #[serde(default)]
    pub setup: SetupSection,
    #[serde(default)]
    pub inversion: InversionSection,
    pub sweep: Option<SweepSection>,
    pub reg_study: Option<RegStudySection>,
    pub race: Option<RaceSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetupSection {
    pub grid_side: Option<usize>,
    pub num_emitters: Option<usize>,
    pub num_receivers: Option<usize>,
    pub frequency_hz: Option<f64>,
    /// Defaults to one wavelength.
    pub domain_side_m: Option<f64>,
    /// Defaults to one wavelength.
    pub ring_radius_m: Option<f64>,
}

/// `lambda = 0.01` or `lambda = "csi"`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum LambdaSpec {
    Value(f64),
    Name(String),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InversionSection {
    pub algorithm: Option<String>,
    pub lambda: Option<LambdaSpec>,
    pub lambda_reg: Option<f64>,
    /// `exact` or `csi-approx`.
    pub gradient: Option<String>,
    pub inner_reduction: Option<f64>,
    pub inner_max_iters: Option<usize>,
    pub overrelax_w: Option<f64>,
    pub overrelax_x: Option<f64>,
    pub init: Option<String>,
    pub parallel_w: Option<bool>,
    pub identity_preconditioner: Option<bool>,
    pub max_outer: Option<usize>,
    pub grad_floor: Option<f64>,
    pub f_rel_floor: Option<f64>,
    pub f_rel_window: Option<usize>,
    pub op_budget: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub lambdas: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegStudySection {
    pub lambda_reg: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RaceSection {
    /// Overrides applied on top of `[inversion]`, one per contender.
    pub runs: Vec<InversionSection>,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl InversionSection {
    pub fn apply(&self, o: &mut InversionOptions) -> Result<()> {
        if let Some(a) = &self.algorithm {
            o.algorithm = a.parse()?;
        }
        match &self.lambda {
            Some(LambdaSpec::Value(v)) => o.lambda_mode = LambdaMode::Fixed(*v),
            Some(LambdaSpec::Name(s)) if s == "csi" => o.lambda_mode = LambdaMode::CsiAdaptive,
            Some(LambdaSpec::Name(s)) => return Err(config_err(format!("lambda must be a number or \"csi\", got {s:?}"))),
            None => {}
        }
        if let Some(g) = &self.gradient {
            o.gradient_mode = match g.as_str() {
                "exact" => GradientMode::Exact,
                "csi-approx" => GradientMode::CsiApprox,
                other => return Err(config_err(format!("gradient must be exact or csi-approx, got {other:?}"))),
            };
        }
        if let Some(i) = &self.init {
            o.init = i.parse::<InitMode>()?;
        }
        set(&mut o.lambda_reg, self.lambda_reg);
        set(&mut o.inner_reduction, self.inner_reduction);
        set(&mut o.inner_max_iters, self.inner_max_iters);
        set(&mut o.overrelax_w, self.overrelax_w);
        set(&mut o.overrelax_x, self.overrelax_x);
        set(&mut o.parallel_w, self.parallel_w);
        set(&mut o.identity_preconditioner, self.identity_preconditioner);
        set(&mut o.outer_stop.max_outer, self.max_outer);
        set(&mut o.outer_stop.grad_floor, self.grad_floor);
        set(&mut o.outer_stop.f_rel_floor, self.f_rel_floor);
        set(&mut o.outer_stop.f_rel_window, self.f_rel_window);
        if self.op_budget.is_some() {
            o.outer_stop.op_budget = self.op_budget;
        }
        Ok(())
    }
}

fn set<T: Copy>(dst: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *dst = v;
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub setup: ImagingSetup,
    pub phantom: PhantomKind,
    pub snr_db: f64,
    pub inversion: InversionOptions,
    pub output_dir: PathBuf,
    pub data: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub lambdas: Vec<f64>,
    pub reg_lambda: f64,
    /// Contender options for the race; empty means CSI against ACG.
    pub race: Vec<InversionOptions>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            setup: ImagingSetup::wavelength_square(16, 16, 16),
            phantom: PhantomKind::SmallSquare,
            snr_db: 20.0,
            inversion: InversionOptions::default(),
            output_dir: PathBuf::from("out"),
            data: None,
            truth: None,
            lambdas: (-4..=1).map(|e| 10f64.powi(e)).collect(),
            reg_lambda: 0.001,
            race: Vec::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| config_err(format!("invalid config: {e}")))?;
        Self::from_file(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_file(file: ConfigFile) -> Result<Self> {
        let mut cfg = Self::default();
        let s = &file.setup;
        let mut setup = ImagingSetup::wavelength_square(
            s.grid_side.unwrap_or(cfg.setup.grid_side),
            s.num_emitters.unwrap_or(cfg.setup.num_emitters),
            s.num_receivers.unwrap_or(cfg.setup.num_receivers),
        );
        if let Some(f) = s.frequency_hz {
            setup.frequency = f;
            setup.domain_side = setup.wavelength();
            setup.ring_radius = setup.wavelength();
        }
        set(&mut setup.domain_side, s.domain_side_m);
        set(&mut setup.ring_radius, s.ring_radius_m);
        set(&mut setup.seed, file.seed);
        cfg.setup = setup;
        if let Some(p) = &file.phantom {
            cfg.phantom = p.parse()?;
        }
        set(&mut cfg.snr_db, file.snr_db);
        file.inversion.apply(&mut cfg.inversion)?;
        if let Some(dir) = file.output_dir {
            cfg.output_dir = dir;
        }
        cfg.data = file.data;
        cfg.truth = file.truth;
        if let Some(sweep) = file.sweep {
            cfg.lambdas = sweep.lambdas;
        }
        if let Some(reg) = file.reg_study {
            cfg.reg_lambda = reg.lambda_reg;
        }
        if let Some(race) = file.race {
            cfg.race = race
                .runs
                .iter()
                .map(|r| {
                    let mut o = cfg.inversion.clone();
                    r.apply(&mut o)?;
                    Ok(o)
                })
                .collect::<Result<_>>()?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.setup.validate()?;
        self.inversion.validate()?;
        for o in &self.race {
            o.validate()?;
        }
        if self.snr_db.is_nan() {
            return Err(config_err("snr_db must be a number"));
        }
        if self.lambdas.is_empty() {
            return Err(config_err("lambda grid is empty"));
        }
        if self.lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(config_err("lambda grid values must be finite and > 0"));
        }
        if self.lambdas.windows(2).any(|p| p[1] <= p[0]) {
            return Err(config_err("lambda grid must be strictly increasing"));
        }
        if !(self.reg_lambda >= 0.0 && self.reg_lambda.is_finite()) {
            return Err(config_err("reg_study.lambda_reg must be >= 0"));
        }
        Ok(())
    }

    /// The race contenders, defaulting to CSI against ACG.
    pub fn race_options(&self) -> Vec<InversionOptions> {
        if !self.race.is_empty() {
            return self.race.clone();
        }
        [Algorithm::Csi, Algorithm::AcgCsi]
            .into_iter()
            .map(|a| InversionOptions { algorithm: a, ..self.inversion.clone() })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg.setup.grid_side, 16);
        assert_eq!(cfg.phantom, PhantomKind::SmallSquare);
        assert_eq!(cfg.lambdas.len(), 6);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml("sead = 3").is_err());
        assert!(ExperimentConfig::from_toml("[inversion]\nlamda = 0.1").is_err());
    }

    #[test]
    fn lambda_accepts_number_or_csi() {
        let cfg = ExperimentConfig::from_toml("[inversion]\nlambda = 0.5\n").unwrap();
        assert_eq!(cfg.inversion.lambda_mode, LambdaMode::Fixed(0.5));
        let cfg = ExperimentConfig::from_toml("[inversion]\nalgorithm = \"csi\"\nlambda = \"csi\"\n").unwrap();
        assert_eq!(cfg.inversion.lambda_mode, LambdaMode::CsiAdaptive);
        assert!(ExperimentConfig::from_toml("[inversion]\nlambda = \"big\"\n").is_err());
    }

    #[test]
    fn sweep_grid_must_increase() {
        assert!(ExperimentConfig::from_toml("[sweep]\nlambdas = [0.1, 0.01]\n").is_err());
        assert!(ExperimentConfig::from_toml("[sweep]\nlambdas = [0.1, 0.1]\n").is_err());
        assert!(ExperimentConfig::from_toml("[sweep]\nlambdas = [0.01, 0.1]\n").is_ok());
    }

    #[test]
    fn race_runs_overlay_the_base_options() {
        let text = "[inversion]\nlambda_reg = 0.002\n[race]\nruns = [{ algorithm = \"csi\" }, { algorithm = \"acg-csi\", inner_reduction = 20.0 }]\n";
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.race.len(), 2);
        assert_eq!(cfg.race[0].algorithm, Algorithm::Csi);
        assert_eq!(cfg.race[1].inner_reduction, 20.0);
        assert!(cfg.race.iter().all(|o| o.lambda_reg == 0.002));
    }
}
