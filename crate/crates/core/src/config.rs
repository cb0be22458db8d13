//! Run configuration read from TOML, with a stable digest of its canonical form.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::digest::sha256_hex;
use crate::error::{Error, Result};
use crate::greeks::{AssetModel, Payoff};
use crate::malliavin::CameronMartin;
use crate::model::{Baseline, HawkesModel, Kernel, Nonlinearity};
use crate::sde::{CosSin, JumpSde, LinearScalar, LinearSystem, SdePreset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    Exponential { alpha: f64, beta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearityConfig {
    Linear,
    SaturatingTanh { cap: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub baseline: Baseline,
    pub kernel: KernelConfig,
    pub nonlinearity: NonlinearityConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            baseline: Baseline::Constant { rate: 1.0 },
            kernel: KernelConfig::Exponential {
                alpha: 0.5,
                beta: 1.0,
            },
            nonlinearity: NonlinearityConfig::Linear,
        }
    }
}

impl ModelConfig {
    /// Builds the model; failing clauses surface as [`Error::Assumption`].
    pub fn build(&self) -> Result<HawkesModel> {
        let kernel = match self.kernel {
            KernelConfig::Exponential { alpha, beta } => Kernel::exponential(alpha, beta),
        };
        let nonlinearity = match self.nonlinearity {
            NonlinearityConfig::Linear => Nonlinearity::Linear,
            NonlinearityConfig::SaturatingTanh { cap } => Nonlinearity::SaturatingTanh { cap },
        };
        HawkesModel::new(self.baseline.clone(), kernel, nonlinearity)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DirectionConfig {
    #[default]
    Linear,
    Cosine {
        k: u32,
    },
    Sine {
        k: u32,
    },
}

impl DirectionConfig {
    pub fn build(&self, horizon: f64) -> Result<CameronMartin> {
        match *self {
            DirectionConfig::Linear => CameronMartin::linear(horizon),
            DirectionConfig::Cosine { k } => CameronMartin::cosine(horizon, k),
            DirectionConfig::Sine { k } => CameronMartin::sine(horizon, k),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DensityConfig {
    /// Jump count to condition on.
    pub n: usize,
}

impl Default for DensityConfig {
    fn default() -> Self {
        Self { n: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PayoffConfig {
    Digital { strike: f64 },
    Tanh { strike: f64 },
    Call { strike: f64 },
    Constant { value: f64 },
    Identity,
}

impl PayoffConfig {
    pub fn build(&self) -> Payoff {
        match *self {
            PayoffConfig::Digital { strike } => Payoff::digital(strike),
            PayoffConfig::Tanh { strike } => Payoff::tanh(strike),
            PayoffConfig::Call { strike } => Payoff::call(strike),
            PayoffConfig::Constant { value } => Payoff::constant(value),
            PayoffConfig::Identity => Payoff::identity(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreeksConfig {
    pub x0: f64,
    pub rate: f64,
    pub sigma: f64,
    pub payoff: PayoffConfig,
    /// Finite-difference bump; defaults to 1% of `x0` for discontinuous
    /// payoffs and `1e-4 x0` otherwise.
    pub bump: Option<f64>,
    /// Path-budget multiplier of the finite-difference baseline for
    /// discontinuous payoffs.
    pub fd_path_multiplier: usize,
}

impl Default for GreeksConfig {
    fn default() -> Self {
        Self {
            x0: 100.0,
            rate: 0.05,
            sigma: 0.3,
            payoff: PayoffConfig::Digital { strike: 100.0 },
            bump: None,
            fd_path_multiplier: 10,
        }
    }
}

impl GreeksConfig {
    pub fn asset(&self, hawkes: HawkesModel) -> Result<AssetModel> {
        AssetModel::new(self.x0, self.rate, self.sigma, hawkes)
    }

    pub fn discontinuous(&self) -> bool {
        matches!(
            self.payoff,
            PayoffConfig::Digital { .. } | PayoffConfig::Call { .. }
        )
    }

    pub fn bump(&self) -> f64 {
        self.bump
            .unwrap_or(if self.discontinuous() { 1e-2 } else { 1e-4 } * self.x0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SdeConfig {
    /// `linear-scalar`, `cos-sin` or `linear-d2`.
    pub preset: String,
    /// Initial state of the scalar presets.
    pub x0: f64,
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub beta: f64,
    /// `ℓ`: spanning is checked on `{N_T ≥ ℓ}`.
    pub level: usize,
}

impl Default for SdeConfig {
    fn default() -> Self {
        Self {
            preset: "cos-sin".into(),
            x0: 0.5,
            a: 1.0,
            b: 1.0,
            alpha: 1.0,
            beta: 1.0,
            level: 1,
        }
    }
}

impl SdeConfig {
    pub fn build(&self) -> Result<Box<dyn JumpSde>> {
        Ok(match SdePreset::parse(&self.preset)? {
            SdePreset::LinearScalar => Box::new(LinearScalar {
                a: self.a,
                b: self.b,
                alpha: self.alpha,
                beta: self.beta,
                x0: self.x0,
            }),
            SdePreset::CosSin => Box::new(CosSin { x0: self.x0 }),
            SdePreset::LinearD2 => Box::new(LinearSystem::two_dimensional_example()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentsConfig {
    pub grid: usize,
    pub eps: Vec<f64>,
    pub functionals: Vec<String>,
}

impl Default for ExperimentsConfig {
    fn default() -> Self {
        Self {
            grid: 32,
            eps: vec![1e-1, 1e-2, 1e-3],
            functionals: ["one", "tbar1", "exp_neg_tbar1", "tbar1_tbar2"]
                .map(String::from)
                .to_vec(),
        }
    }
}

/// Everything a command needs. Parallelism is deliberately absent: it never
/// changes results, so it is not part of the digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: usize,
    pub horizon: f64,
    /// Output directory; `--out` takes precedence.
    pub output: Option<String>,
    pub model: ModelConfig,
    pub direction: DirectionConfig,
    pub density: DensityConfig,
    pub greeks: GreeksConfig,
    pub sde: SdeConfig,
    pub experiments: ExperimentsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 20_240_917,
            paths: 100_000,
            horizon: 5.0,
            output: None,
            model: ModelConfig::default(),
            direction: DirectionConfig::default(),
            density: DensityConfig::default(),
            greeks: GreeksConfig::default(),
            sde: SdeConfig::default(),
            experiments: ExperimentsConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.check()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Field-level sanity checks; model admissibility is checked separately.
    pub fn check(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return fail(format!(
                "horizon: must be positive and finite, got {}",
                self.horizon
            ));
        }
        if self.paths < 2 {
            return fail(format!("paths: need at least 2, got {}", self.paths));
        }
        if self.experiments.grid == 0 {
            return fail("experiments.grid: must be at least 1".into());
        }
        if self.experiments.eps.iter().any(|e| !(*e >= 0.0)) {
            return fail("experiments.eps: entries must be nonnegative".into());
        }
        if self.greeks.fd_path_multiplier == 0 {
            return fail("greeks.fd_path_multiplier: must be at least 1".into());
        }
        if self.density.n == 0 {
            return fail("density.n: must be at least 1".into());
        }
        SdePreset::parse(&self.sde.preset)
            .map_err(|e| Error::Config(format!("sde.preset: {e}")))?;
        Ok(())
    }

    /// TOML with every default filled in; the digest input.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("run configuration serializes")
    }

    pub fn digest(&self) -> String {
        sha256_hex(&self.canonical())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_reference_setup() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c, RunConfig::default());
        let model = c.model.build().unwrap();
        assert!((model.validate().margin - 0.5).abs() < 1e-15);
    }

    #[test]
    fn canonical_form_round_trips() {
        let c = RunConfig::default();
        let back = RunConfig::from_toml(&c.canonical()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.digest(), c.digest());
    }

    #[test]
    fn blocks_parse() {
        let text = r#"
            seed = 7
            paths = 1000
            [model.baseline]
            family = "sinusoidal"
            level = 1.0
            amplitude = 0.5
            period = 2.0
            [model.kernel]
            family = "exponential"
            alpha = 0.2
            beta = 2.0
            [model.nonlinearity]
            family = "saturating_tanh"
            cap = 1.5
            [greeks.payoff]
            kind = "tanh"
            strike = 100.0
        "#;
        let c = RunConfig::from_toml(text).unwrap();
        assert_eq!(c.seed, 7);
        assert!(c.model.build().is_ok());
        assert!(!c.greeks.discontinuous());
        assert_eq!(c.greeks.bump(), 1e-2);
    }

    #[test]
    fn errors_name_the_clause() {
        let err = RunConfig::from_toml("horizon = -1.0")
            .unwrap_err()
            .to_string();
        assert!(err.contains("horizon"), "{err}");
        let err = RunConfig::from_toml("bogus = 1").unwrap_err().to_string();
        assert!(err.contains("bogus"), "{err}");
        let explosive = "[model.kernel]\nfamily = \"exponential\"\nalpha = 2.0\nbeta = 1.0\n";
        let c = RunConfig::from_toml(explosive).unwrap();
        assert!(matches!(c.model.build(), Err(Error::Assumption(_))));
    }
}
