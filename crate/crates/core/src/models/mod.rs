//! Binary classifiers that emit scores in `[0, 1]`.

pub mod forest;
pub mod map;

use serde::{Deserialize, Serialize};

pub use forest::{best_split, fit_forest, forest_score, ForestParams, Node, RandomForestModel, SplitChoice};
pub use map::{fit_map, map_decision_threshold, map_score, GaussianMapModel};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::real::Real;

/// Feature used by the MAP baseline when none is given.
pub const DEFAULT_MAP_FEATURE: &str = "energy_db";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    /// Column name. A `_db` suffix on a linear channel column (`energy`,
    /// `min_mag`, `max_mag`) converts it on the fly.
    pub feature: String,
    /// Decide with the positive-exponent threshold instead of the posterior.
    #[serde(default)]
    pub literal_threshold: bool,
}

impl Default for MapSpec {
    fn default() -> Self {
        MapSpec {
            feature: DEFAULT_MAP_FEATURE.to_string(),
            literal_threshold: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum ModelSpec {
    Forest(ForestParams),
    Map(MapSpec),
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::Forest(ForestParams::default())
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Forest(p) => p.validate(),
            ModelSpec::Map(m) if m.feature.is_empty() => Err(Error::config("MAP feature name is empty")),
            ModelSpec::Map(_) => Ok(()),
        }
    }

    pub fn fit<F: Real>(&self, train: &Dataset<F>, seed: u64) -> Result<FittedModel<F>> {
        match self {
            ModelSpec::Forest(p) => Ok(FittedModel::Forest(fit_forest(train, p, seed)?)),
            ModelSpec::Map(spec) => {
                let column = MapColumn::resolve(train.feature_names(), &spec.feature)?;
                let xs: Vec<F> = train.rows().map(|r| column.value(r)).collect();
                Ok(FittedModel::Map(MapFit {
                    model: fit_map(&xs, train.labels())?,
                    feature: spec.feature.clone(),
                    column,
                    literal_threshold: spec.literal_threshold,
                }))
            }
        }
    }
}

/// How the MAP input is read from a row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapColumn {
    pub index: usize,
    /// `Some(k)` applies `k·log10(max(v, tiny))`.
    pub decibel_scale: Option<f64>,
}

impl MapColumn {
    pub fn resolve(names: &[String], feature: &str) -> Result<Self> {
        if let Some(index) = names.iter().position(|n| n == feature) {
            return Ok(MapColumn {
                index,
                decibel_scale: None,
            });
        }
        let converted = feature.strip_suffix("_db").and_then(|base| {
            let scale = match base {
                "energy" => 10.0,
                "min_mag" | "max_mag" => 20.0,
                _ => return None,
            };
            names.iter().position(|n| n == base).map(|index| MapColumn {
                index,
                decibel_scale: Some(scale),
            })
        });
        converted.ok_or_else(|| Error::config(format!("MAP feature '{feature}' is not a dataset column")))
    }

    pub fn value<F: Real>(&self, row: &[F]) -> F {
        let v = row[self.index];
        match self.decibel_scale {
            Some(k) => F::of(k) * v.max(F::min_positive_value()).log10(),
            None => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapFit<F> {
    pub model: GaussianMapModel<F>,
    pub feature: String,
    pub column: MapColumn,
    pub literal_threshold: bool,
}

impl<F: Real> MapFit<F> {
    pub fn score(&self, row: &[F]) -> Result<F> {
        let x = self.column.value(row);
        if !self.literal_threshold {
            return Ok(map_score(&self.model, x));
        }
        // Hard decision from the literal threshold, kept for comparison runs.
        let t = self.model.literal_threshold()?;
        let one = if self.model.mu1 > self.model.mu0 { x >= t } else { x <= t };
        Ok(if one { F::one() } else { F::zero() })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel<F> {
    Forest(RandomForestModel<F>),
    Map(MapFit<F>),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PersistedMap<F> {
    format: String,
    version: u32,
    feature: String,
    #[serde(default)]
    literal_threshold: bool,
    model: GaussianMapModel<F>,
}

const MAP_FORMAT_TAG: &str = "gaussian-map";

impl<F: Real> FittedModel<F> {
    pub fn score(&self, row: &[F]) -> Result<F> {
        match self {
            FittedModel::Forest(m) => m.score(row),
            FittedModel::Map(m) => m.score(row),
        }
    }

    pub fn score_all(&self, dataset: &Dataset<F>) -> Result<Vec<F>> {
        dataset.rows().map(|r| self.score(r)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        match self {
            FittedModel::Forest(m) => m.to_json(),
            FittedModel::Map(m) => Ok(serde_json::to_string(&PersistedMap {
                format: MAP_FORMAT_TAG.to_string(),
                version: forest::MODEL_FORMAT_VERSION,
                feature: m.feature.clone(),
                literal_threshold: m.literal_threshold,
                model: m.model,
            })?),
        }
    }

    /// Loads a saved model; `feature_names` resolves the MAP input column.
    pub fn from_json(text: &str, feature_names: &[String]) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        if v.get("format").and_then(|f| f.as_str()) == Some(MAP_FORMAT_TAG) {
            let p: PersistedMap<F> = serde_json::from_value(v)?;
            if p.version != forest::MODEL_FORMAT_VERSION {
                return Err(Error::data(format!("unsupported MAP model version {}", p.version)));
            }
            p.model.validate()?;
            return Ok(FittedModel::Map(MapFit {
                column: MapColumn::resolve(feature_names, &p.feature)?,
                model: p.model,
                feature: p.feature,
                literal_threshold: p.literal_threshold,
            }));
        }
        let m = RandomForestModel::from_json(text)?;
        if m.n_features() != feature_names.len() {
            return Err(Error::data(format!(
                "model expects {} features, dataset has {}",
                m.n_features(),
                feature_names.len()
            )));
        }
        Ok(FittedModel::Forest(m))
    }
}
