//! Experiment configuration: a TOML file plus command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Bivariate,
    Blr,
    BlrOverfit,
    Logistic,
    Multiclass,
    CauchyPpca,
    /// Nonlinear 11-parameter regression under a flat prior, compared with
    /// the Laplace approximation over repeated train/test splits.
    FlatRegression,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::Bivariate,
        ExperimentKind::Blr,
        ExperimentKind::BlrOverfit,
        ExperimentKind::Logistic,
        ExperimentKind::Multiclass,
        ExperimentKind::CauchyPpca,
        ExperimentKind::FlatRegression,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Bivariate => "bivariate",
            ExperimentKind::Blr => "blr",
            ExperimentKind::BlrOverfit => "blr-overfit",
            ExperimentKind::Logistic => "logistic",
            ExperimentKind::Multiclass => "multiclass",
            ExperimentKind::CauchyPpca => "cauchy-ppca",
            ExperimentKind::FlatRegression => "flat-regression",
        }
    }

    /// Default number of training draws.
    pub fn default_samples(self) -> usize {
        match self {
            ExperimentKind::Bivariate => 50,
            ExperimentKind::Blr | ExperimentKind::BlrOverfit => 100,
            ExperimentKind::Logistic | ExperimentKind::Multiclass => 200,
            ExperimentKind::CauchyPpca => 10,
            ExperimentKind::FlatRegression => 1000,
        }
    }

    pub fn default_max_iter(self) -> usize {
        match self {
            ExperimentKind::CauchyPpca => 20,
            ExperimentKind::BlrOverfit => 300,
            _ => 1000,
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Self::ALL.iter().map(|k| k.name()).collect();
                CliError::Config(format!("unknown experiment kind '{s}' (expected one of {})", names.join(", ")))
            })
    }
}

/// Per-experiment model and data settings. Unset fields take the
/// experiment's defaults.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSettings {
    pub n_train: Option<usize>,
    pub n_test: Option<usize>,
    /// Number of RBF centres (taken from the first training inputs).
    pub centres: Option<usize>,
    /// RBF width `r`.
    pub width: Option<f64>,
    pub classes: Option<usize>,
    /// Blob separation (two-class) or circle radius (k-class), in standard
    /// deviations.
    pub separation: Option<f64>,
    /// Number of synthetic train/test splits.
    pub splits: Option<usize>,
    /// Posterior draws for predictive distributions.
    pub predictive_draws: Option<usize>,
    pub image_height: Option<usize>,
    pub image_width: Option<usize>,
    pub latent_dim: Option<usize>,
    pub corruption: Option<f64>,
    pub noise_sd: Option<f64>,
    /// Holdout-bound decline (fraction of its range) flagged as overfitting.
    pub overfit_margin: Option<f64>,
    /// Bivariate only: indices (0-2) of the reference targets to run.
    pub targets: Option<Vec<usize>>,
    pub csv_header: Option<bool>,
}

/// Values as read from a config file; every field may be overridden.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartialConfig {
    pub experiment: Option<ExperimentKind>,
    pub seed: Option<u64>,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub samples: Option<usize>,
    pub holdout_samples: Option<usize>,
    pub inner_iters: Option<usize>,
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
    pub model: ModelSettings,
}

impl PartialConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Fields set in `other` replace those in `self`.
    pub fn merge(mut self, other: PartialConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(experiment, seed, data, out, samples, holdout_samples, inner_iters, max_iter, tol);
        if other.model != ModelSettings::default() {
            self.model = other.model;
        }
        self
    }

    pub fn resolve(self) -> Result<ExperimentConfig> {
        let experiment = self
            .experiment
            .ok_or_else(|| CliError::Config("no experiment kind given".into()))?;
        let seed = self
            .seed
            .ok_or_else(|| CliError::Config("a seed is required".into()))?;
        let samples = self.samples.unwrap_or(experiment.default_samples());
        let holdout_samples = self.holdout_samples.unwrap_or(5 * samples);
        let cfg = ExperimentConfig {
            experiment,
            seed,
            data: self.data,
            out: self.out.unwrap_or_else(|| PathBuf::from("runs").join(experiment.name())),
            samples,
            holdout_samples,
            inner_iters: self.inner_iters.unwrap_or(10),
            max_iter: self.max_iter.unwrap_or(experiment.default_max_iter()),
            tol: self.tol.unwrap_or(1e-4),
            model: self.model,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub data: Option<PathBuf>,
    pub out: PathBuf,
    pub samples: usize,
    /// 0 disables holdout monitoring.
    pub holdout_samples: usize,
    pub inner_iters: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub model: ModelSettings,
}

impl ExperimentConfig {
    /// Defaults for `kind` with the given seed.
    pub fn new(experiment: ExperimentKind, seed: u64) -> Self {
        PartialConfig {
            experiment: Some(experiment),
            seed: Some(seed),
            ..Default::default()
        }
        .resolve()
        .expect("defaults are valid")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.samples == 0 {
            return bad("samples must be at least 1".into());
        }
        if self.holdout_samples > 0 && self.holdout_samples <= self.samples {
            return bad(format!(
                "holdout samples ({}) must exceed samples ({}) when monitoring is enabled",
                self.holdout_samples, self.samples
            ));
        }
        if self.inner_iters == 0 || self.max_iter == 0 {
            return bad("inner_iters and max_iter must be at least 1".into());
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad(format!("tolerance must be positive, got {}", self.tol));
        }
        let m = &self.model;
        if m.width.is_some_and(|w| !(w > 0.0)) {
            return bad("width must be positive".into());
        }
        if m.corruption.is_some_and(|c| !(0.0..=1.0).contains(&c)) {
            return bad("corruption must be a fraction in [0, 1]".into());
        }
        if m.noise_sd.is_some_and(|s| !(s >= 0.0)) {
            return bad("noise_sd must be non-negative".into());
        }
        if m.classes.is_some_and(|k| k < 2) {
            return bad("classes must be at least 2".into());
        }
        if m.splits == Some(0) || m.predictive_draws == Some(0) || m.n_train == Some(0) || m.n_test == Some(0) {
            return bad("counts must be at least 1".into());
        }
        if m.targets.as_ref().is_some_and(|t| t.iter().any(|&i| i > 2)) {
            return bad("bivariate targets are indexed 0, 1, 2".into());
        }
        Ok(())
    }

    pub fn fit_config(&self) -> fsvi::FitConfig {
        fsvi::FitConfig {
            samples: self.samples,
            holdout_samples: self.holdout_samples,
            inner_iters: self.inner_iters,
            max_iter: self.max_iter,
            tolerance: self.tol,
            ..fsvi::FitConfig::with_samples(self.samples)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_full_file() {
        let text = r#"
            experiment = "blr-overfit"
            seed = 3
            samples = 10
            holdout_samples = 500
            [model]
            n_train = 60
            width = 1.0
        "#;
        let cfg = PartialConfig::from_toml_str(text).unwrap().resolve().unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::BlrOverfit);
        assert_eq!(cfg.samples, 10);
        assert_eq!(cfg.model.n_train, Some(60));
    }

    #[test]
    fn defaults_follow_the_experiment() {
        let cfg = ExperimentConfig::new(ExperimentKind::Logistic, 1);
        assert_eq!(cfg.samples, 200);
        assert_eq!(cfg.holdout_samples, 1000);
        assert_eq!(cfg.inner_iters, 10);
        assert_eq!(cfg.tol, 1e-4);
    }

    #[test]
    fn seed_is_mandatory() {
        let p = PartialConfig {
            experiment: Some(ExperimentKind::Blr),
            ..Default::default()
        };
        assert!(matches!(p.resolve(), Err(CliError::Config(_))));
    }

    #[test]
    fn holdout_must_exceed_samples() {
        let p = PartialConfig {
            experiment: Some(ExperimentKind::Blr),
            seed: Some(1),
            samples: Some(100),
            holdout_samples: Some(50),
            ..Default::default()
        };
        assert!(p.resolve().is_err());
    }

    #[test]
    fn unknown_kind_and_fields_are_rejected() {
        assert!("nope".parse::<ExperimentKind>().is_err());
        assert!(PartialConfig::from_toml_str("experiment = \"nope\"").is_err());
        assert!(PartialConfig::from_toml_str("sede = 1").is_err());
    }

    #[test]
    fn overrides_win() {
        let file = PartialConfig::from_toml_str("experiment = \"blr\"\nseed = 1\nsamples = 30").unwrap();
        let flags = PartialConfig {
            samples: Some(40),
            ..Default::default()
        };
        let cfg = file.merge(flags).resolve().unwrap();
        assert_eq!(cfg.samples, 40);
        assert_eq!(cfg.seed, 1);
    }
}
