//! JSON experiment configuration.
//!
//! ```json
//! {
//!   "generator": { "family": "laplacian_1d", "n": 8 },
//!   "intensity": { "marks": ["a", "b"], "weights": [1.0, 3.0] },
//!   "integrand": {
//!     "family": "spectral_power",
//!     "partition": [0.0, 0.5, 1.0],
//!     "piece_scales": [1.0, -0.5],
//!     "decay": 1.5,
//!     "mark_amplitudes": [1.0, -0.6]
//!   },
//!   "norm_exponent": 2.0,
//!   "p": 2.0, "q": 2.0, "theta": 0.25, "horizon": 1.0,
//!   "paths": 10000, "seed": 7,
//!   "martingale_type_constant": 1.0
//! }
//! ```
//!
//! `generator` may instead list `"eigenvalues"`; `intensity` may instead be
//! `{ "eps": .., "density": { "form": .. } }`; `integrand` may instead give
//! `"partition"` and explicit `"pieces"`. The only optional key is
//! `grid_points` (default [`DEFAULT_GRID_POINTS`]), the number of uniform
//! times in exported paths.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mark_space::{Density, IntensityMeasure, MarkSpace};
use crate::montecarlo::{McSettings, MIN_PATHS};
use crate::semigroup::DiagonalGenerator;
use crate::stochastic_integral::{MarkMap, StepIntegrand};

pub const DEFAULT_GRID_POINTS: usize = 101;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorFamily {
    /// `λ_k = k²`.
    #[serde(rename = "laplacian_1d")]
    Laplacian1d,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GeneratorConfig {
    Family { family: GeneratorFamily, n: usize },
    Explicit { eigenvalues: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IntensityConfig {
    Finite { marks: Vec<String>, weights: Vec<f64> },
    Interval { eps: f64, density: Density },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegrandFamily {
    /// `ξ_j(x)_k = piece_scales[j] · a(x) · k^{-decay}`, with `a` the label
    /// amplitude or `x^{mark_exponent}`.
    SpectralPower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IntegrandConfig {
    Family {
        family: IntegrandFamily,
        partition: Vec<f64>,
        piece_scales: Vec<f64>,
        decay: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mark_amplitudes: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mark_exponent: Option<f64>,
    },
    Explicit {
        partition: Vec<f64>,
        pieces: Vec<MarkMap>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub generator: GeneratorConfig,
    pub intensity: IntensityConfig,
    pub integrand: IntegrandConfig,
    pub norm_exponent: f64,
    pub p: f64,
    pub q: f64,
    pub theta: f64,
    pub horizon: f64,
    pub paths: usize,
    pub seed: u64,
    pub martingale_type_constant: f64,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
}

fn default_grid_points() -> usize {
    DEFAULT_GRID_POINTS
}

fn config_err(key: impl Into<String>, expected: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        expected: expected.into(),
    }
}

/// Hint for keys whose value can take several shapes.
fn shape_hint(path: &str) -> Option<&'static str> {
    match path {
        "generator" => Some(r#"{"family": "laplacian_1d", "n": <int>} or {"eigenvalues": [..]}"#),
        "intensity" => Some(
            r#"{"marks": [..], "weights": [..]} or {"eps": <0<eps<1>, "density": {"form": ..}}"#,
        ),
        "integrand" => Some(
            r#"{"family": "spectral_power", "partition", "piece_scales", "decay", "mark_amplitudes" | "mark_exponent"} or {"partition", "pieces"}"#,
        ),
        _ => None,
    }
}

impl ExperimentConfig {
    /// Parses and validates, naming the offending key on failure.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let expected = match shape_hint(&path) {
                Some(hint) => hint.to_string(),
                None => e.inner().to_string(),
            };
            let msg = e.inner().to_string();
            let missing = msg
                .strip_prefix("missing field `")
                .and_then(|rest| rest.split('`').next());
            let key = match (path.as_str(), missing) {
                (".", Some(field)) => field.to_string(),
                (".", None) => "<root>".to_string(),
                (_, Some(field)) => format!("{path}.{field}"),
                (_, None) => path,
            };
            let expected = if missing.is_some() {
                "a value for this required key".to_string()
            } else if let Some(rest) = msg.strip_prefix("unknown field") {
                let known = rest.split_once(", expected ").map_or("", |(_, k)| k);
                format!("a known key, {known}")
            } else {
                expected
            };
            config_err(key, expected)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.p;
        if !(p > 1.0 && p <= 2.0) {
            return Err(config_err("p", format!("1 < p <= 2, got {p}")));
        }
        if !(self.q >= 1.0 && self.q.is_finite()) {
            return Err(config_err("q", format!("finite q >= 1, got {}", self.q)));
        }
        if !(self.theta > 0.0 && self.theta < 1.0 - 1.0 / p) {
            return Err(config_err(
                "theta",
                format!("0 < theta < 1 - 1/p = {}, got {}", 1.0 - 1.0 / p, self.theta),
            ));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(config_err("horizon", format!("finite T > 0, got {}", self.horizon)));
        }
        if self.paths < MIN_PATHS {
            return Err(config_err(
                "paths",
                format!("at least {MIN_PATHS}, got {}", self.paths),
            ));
        }
        if !(self.martingale_type_constant > 0.0 && self.martingale_type_constant.is_finite()) {
            return Err(config_err(
                "martingale_type_constant",
                format!("finite L > 0, got {}", self.martingale_type_constant),
            ));
        }
        if !(self.norm_exponent >= 1.0 && self.norm_exponent.is_finite()) {
            return Err(config_err(
                "norm_exponent",
                format!("finite r >= 1, got {}", self.norm_exponent),
            ));
        }
        if self.grid_points < 2 {
            return Err(config_err("grid_points", "at least 2"));
        }
        self.build().map(|_| ())
    }

    /// SHA-256 of the canonical serialization (keys sorted), hex encoded.
    pub fn hash(&self) -> Result<String> {
        let value = serde_json::to_value(self)?;
        let canonical = serde_json::to_string(&value)?;
        Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
    }

    pub fn settings(&self) -> McSettings {
        McSettings::new(self.paths, self.seed)
    }

    /// Number of modes of the generator config.
    pub fn modes(&self) -> usize {
        match &self.generator {
            GeneratorConfig::Family { n, .. } => *n,
            GeneratorConfig::Explicit { eigenvalues } => eigenvalues.len(),
        }
    }

    /// Copy with `n` modes, when both the generator and the integrand are
    /// given as families.
    pub fn with_modes(&self, n: usize) -> Result<Self> {
        let generator = match &self.generator {
            GeneratorConfig::Family { family, .. } => GeneratorConfig::Family { family: *family, n },
            GeneratorConfig::Explicit { .. } => {
                return Err(config_err("generator", "a family to change the mode count"))
            }
        };
        if !matches!(self.integrand, IntegrandConfig::Family { .. }) {
            return Err(config_err("integrand", "a family to change the mode count"));
        }
        let cfg = Self {
            generator,
            ..self.clone()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn build(&self) -> Result<Experiment> {
        let gen = build_generator(&self.generator)?;
        let nu = build_intensity(&self.intensity)?;
        let xi = build_integrand(&self.integrand, &nu, &gen, self)?;
        Ok(Experiment {
            gen,
            nu,
            xi,
            config: self.clone(),
        })
    }
}

fn relabel(e: Error, prefix: &str) -> Error {
    match e {
        Error::InvalidParameter { name, expected, got } => {
            config_err(format!("{prefix}.{name}"), format!("{expected}, got {got}"))
        }
        Error::Config { .. } => e,
        other => config_err(prefix, other.to_string()),
    }
}

fn build_generator(cfg: &GeneratorConfig) -> Result<DiagonalGenerator> {
    match cfg {
        GeneratorConfig::Family { n, .. } => {
            if *n == 0 {
                return Err(config_err("generator.n", "n >= 1"));
            }
            DiagonalGenerator::laplacian_1d(*n).map_err(|e| relabel(e, "generator"))
        }
        GeneratorConfig::Explicit { eigenvalues } => DiagonalGenerator::new(eigenvalues.clone())
            .map_err(|_| config_err("generator.eigenvalues", "non-empty list of finite values > 0")),
    }
}

fn build_intensity(cfg: &IntensityConfig) -> Result<IntensityMeasure> {
    match cfg {
        IntensityConfig::Finite { marks, weights } => {
            IntensityMeasure::finite(marks.iter().cloned(), weights.clone())
                .map_err(|e| relabel(e, "intensity"))
        }
        IntensityConfig::Interval { eps, density } => {
            IntensityMeasure::interval(*eps, *density).map_err(|e| relabel(e, "intensity"))
        }
    }
}

fn build_integrand(
    integrand: &IntegrandConfig,
    nu: &IntensityMeasure,
    gen: &DiagonalGenerator,
    cfg: &ExperimentConfig,
) -> Result<StepIntegrand> {
    let (partition, pieces) = match integrand {
        IntegrandConfig::Explicit { partition, pieces } => {
            for (j, piece) in pieces.iter().enumerate() {
                if piece.dim() != gen.dim() {
                    return Err(config_err(
                        format!("integrand.pieces[{j}]"),
                        format!("vectors of the generator dimension {}", gen.dim()),
                    ));
                }
            }
            (partition.clone(), pieces.clone())
        }
        IntegrandConfig::Family {
            partition,
            piece_scales,
            decay,
            mark_amplitudes,
            mark_exponent,
            ..
        } => {
            if piece_scales.len() + 1 != partition.len() {
                return Err(config_err(
                    "integrand.piece_scales",
                    format!("one scale per partition interval ({})", partition.len().saturating_sub(1)),
                ));
            }
            if !decay.is_finite() {
                return Err(config_err("integrand.decay", "a finite number"));
            }
            let base: Vec<f64> = (1..=gen.dim()).map(|k| (k as f64).powf(-decay)).collect();
            let scaled = |c: f64| base.iter().map(|b| c * b).collect::<Vec<_>>();
            let pieces = match (nu.space(), mark_amplitudes, mark_exponent) {
                (MarkSpace::Finite { labels }, Some(amps), None) => {
                    if amps.len() != labels.len() {
                        return Err(config_err(
                            "integrand.mark_amplitudes",
                            format!("one amplitude per mark ({})", labels.len()),
                        ));
                    }
                    piece_scales
                        .iter()
                        .map(|s| MarkMap::Table(amps.iter().map(|a| scaled(s * a)).collect()))
                        .collect()
                }
                (MarkSpace::Interval { .. }, None, Some(exponent)) => piece_scales
                    .iter()
                    .map(|s| MarkMap::Power {
                        vector: scaled(*s),
                        exponent: *exponent,
                    })
                    .collect(),
                (MarkSpace::Finite { .. }, _, _) => {
                    return Err(config_err(
                        "integrand.mark_amplitudes",
                        "amplitudes (and no mark_exponent) for a finite mark space",
                    ))
                }
                (MarkSpace::Interval { .. }, _, _) => {
                    return Err(config_err(
                        "integrand.mark_exponent",
                        "an exponent (and no mark_amplitudes) for an interval mark space",
                    ))
                }
            };
            (partition.clone(), pieces)
        }
    };
    StepIntegrand::new(partition, pieces, cfg.horizon, cfg.norm_exponent)
        .map_err(|e| relabel(e, "integrand"))
}

/// A validated configuration with its built objects.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub gen: DiagonalGenerator,
    pub nu: IntensityMeasure,
    pub xi: StepIntegrand,
    pub config: ExperimentConfig,
}

impl Experiment {
    pub fn settings(&self) -> McSettings {
        self.config.settings()
    }

    /// Same experiment with `ξ` replaced by `c·ξ`.
    pub fn with_scaled_integrand(&self, c: f64) -> Self {
        Self {
            xi: self.xi.scaled(c),
            ..self.clone()
        }
    }

    /// Uniform grid of `grid_points` times on `[0, T]`.
    pub fn grid(&self) -> Vec<f64> {
        let n = self.config.grid_points - 1;
        (0..=n)
            .map(|i| self.config.horizon * i as f64 / n as f64)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const STANDARD: &str = r#"{
        "generator": {"family": "laplacian_1d", "n": 8},
        "intensity": {"marks": ["a", "b"], "weights": [1.0, 3.0]},
        "integrand": {"family": "spectral_power", "partition": [0.0, 0.5, 1.0],
                      "piece_scales": [1.0, -0.5], "decay": 1.5, "mark_amplitudes": [1.0, -0.6]},
        "norm_exponent": 2.0, "p": 2.0, "q": 2.0, "theta": 0.25, "horizon": 1.0,
        "paths": 1000, "seed": 7, "martingale_type_constant": 1.0
    }"#;

    fn with(key: &str, value: serde_json::Value) -> String {
        let mut v: serde_json::Value = serde_json::from_str(STANDARD).unwrap();
        v[key] = value;
        v.to_string()
    }

    fn err_key(text: &str) -> String {
        match ExperimentConfig::from_json_str(text) {
            Err(Error::Config { key, .. }) => key,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn standard_config_builds() {
        let cfg = ExperimentConfig::from_json_str(STANDARD).unwrap();
        let exp = cfg.build().unwrap();
        assert_eq!(exp.gen.eigenvalues()[7], 64.0);
        assert_eq!(exp.nu.total_mass(), 4.0);
        assert_eq!(exp.xi.dim(), 8);
        assert_eq!(cfg.grid_points, DEFAULT_GRID_POINTS);
        assert_eq!(exp.grid().len(), DEFAULT_GRID_POINTS);
    }

    #[test]
    fn hash_is_stable_under_key_order() {
        let a = ExperimentConfig::from_json_str(STANDARD).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(STANDARD).unwrap();
        let reordered: serde_json::Map<String, serde_json::Value> = v
            .as_object_mut()
            .unwrap()
            .iter()
            .rev()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        let b = ExperimentConfig::from_json_str(&serde_json::Value::Object(reordered).to_string())
            .unwrap();
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        let c = ExperimentConfig::from_json_str(&with("seed", 8.into())).unwrap();
        assert_ne!(a.hash().unwrap(), c.hash().unwrap());
    }

    #[test]
    fn errors_name_the_key() {
        assert_eq!(err_key(&with("p", 2.5.into())), "p");
        assert_eq!(err_key(&with("theta", 0.6.into())), "theta");
        assert_eq!(err_key(&with("paths", 10.into())), "paths");
        assert_eq!(err_key(&with("horizon", "one".into())), "horizon");
        assert_eq!(err_key(&with("generator", serde_json::json!({"n": 3}))), "generator");
        assert_eq!(
            err_key(&with("intensity", serde_json::json!({"marks": ["a"], "weights": [-1.0]}))),
            "intensity.weights"
        );
        assert_eq!(err_key(&with("bogus", 1.into())), "bogus");
        let mut v: serde_json::Value = serde_json::from_str(STANDARD).unwrap();
        v["integrand"]["piece_scales"] = serde_json::json!([1.0]);
        assert_eq!(err_key(&v.to_string()), "integrand.piece_scales");
        v["integrand"]["piece_scales"] = serde_json::json!([1.0, 2.0]);
        v["integrand"]["mark_amplitudes"] = serde_json::json!([1.0]);
        assert_eq!(err_key(&v.to_string()), "integrand.mark_amplitudes");
        let mut v: serde_json::Value = serde_json::from_str(STANDARD).unwrap();
        v.as_object_mut().unwrap().remove("seed");
        assert_eq!(err_key(&v.to_string()), "seed");
    }

    #[test]
    fn explicit_forms_and_mode_changes() {
        let text = with(
            "integrand",
            serde_json::json!({"partition": [0.0, 1.0], "pieces": [{"constant": [1.0, 0.0, 0.0]}]}),
        );
        let text = {
            let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
            v["generator"] = serde_json::json!({"eigenvalues": [1.0, 2.0, 3.0]});
            v.to_string()
        };
        let cfg = ExperimentConfig::from_json_str(&text).unwrap();
        assert_eq!(cfg.build().unwrap().xi.dim(), 3);
        assert!(cfg.with_modes(5).is_err());
        let std = ExperimentConfig::from_json_str(STANDARD).unwrap();
        assert_eq!(std.with_modes(32).unwrap().build().unwrap().xi.dim(), 32);
    }
}
