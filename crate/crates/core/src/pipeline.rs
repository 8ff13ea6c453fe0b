//! Run descriptions and the end-to-end dataset and evaluation pipeline.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{synthesize_cfr, CfrParams, LinkField, OfdmGrid, PropagationSettings};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::eval::{cross_validate, CvConfig, CvReport};
use crate::events::EventConfig;
use crate::features::{channel_stats, compute_features, to_decibels, FeatureConfig, FeatureKind};
use crate::io::{CfrRecord, Provenance};
use crate::labeling::{label_by_gain_field, label_by_radius, Label, RadiusRule};
use crate::models::{MapSpec, ModelSpec};
use crate::real::Real;
use crate::rng::{self, purpose};
use crate::scenario::{
    generate_path_trace, generate_scenario, GeoBounds, MobilityPath, Normalizer, Placement, Point, Scenario,
    ScenarioConfig,
};

pub const CONFIG_VERSION: u32 = 1;

pub const PRESETS: [&str; 8] = ["d1", "d2a", "d2b", "d2c", "d2d", "d3a", "d3b", "d3c"];

/// How ground-truth labels are attached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum LabelRule {
    /// One iff the best micro link gain reaches `alpha_db`.
    Gain { alpha_db: f64 },
    /// One iff the normalized position lies within `radius` of a micro
    /// station. Positions default to the scenario's micro stations.
    Radius {
        #[serde(default = "default_radius")]
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        micro_positions_normalized: Option<Vec<Point>>,
    },
}

fn default_radius() -> f64 {
    RadiusRule::DEFAULT_RADIUS
}

/// UEs taken from a measurement walk instead of the scenario's own UEs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceConfig {
    pub path: MobilityPath,
    pub repeats_per_position: usize,
}

fn default_version() -> u32 {
    CONFIG_VERSION
}

fn default_attach() -> f64 {
    -120.0
}

fn default_events() -> EventConfig {
    EventConfig {
        gamma_dbm: -100.0,
        delta_db: 3.0,
        gamma1_dbm: -105.0,
        gamma2_dbm: -110.0,
        ttt_s: 0.32,
    }
}

/// Everything needed to reproduce a run, apart from the root seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    pub scenario: ScenarioConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<TraceConfig>,
    #[serde(default)]
    pub propagation: PropagationSettings,
    pub grid: OfdmGrid,
    #[serde(default)]
    pub cfr: CfrParams,
    /// UEs whose serving-macro gain is below this are not measured.
    #[serde(default = "default_attach")]
    pub attach_threshold_db: f64,
    pub labeling: LabelRule,
    #[serde(default = "FeatureConfig::all")]
    pub features: FeatureConfig,
    /// Convert linear channel columns to dB after extraction.
    #[serde(default)]
    pub decibels: bool,
    #[serde(default)]
    pub cv: CvConfig,
    #[serde(default)]
    pub model: ModelSpec,
    /// Scalar model evaluated by the MAP comparison run.
    #[serde(default)]
    pub map_baseline: MapSpec,
    #[serde(default = "default_events")]
    pub events: EventConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn city(macros: usize, micros: usize, ues: usize, f_p: f64, f_s: f64, side_m: f64, alpha_db: f64) -> PipelineConfig {
    let mut scenario = ScenarioConfig::uniform(macros, micros, ues, f_p, f_s);
    scenario.bounds = GeoBounds::square(side_m).expect("positive side");
    PipelineConfig {
        version: CONFIG_VERSION,
        scenario,
        trace: None,
        propagation: PropagationSettings::default(),
        grid: OfdmGrid::compact(f_p),
        cfr: CfrParams::default(),
        attach_threshold_db: default_attach(),
        labeling: LabelRule::Gain { alpha_db },
        features: FeatureConfig::all(),
        decibels: false,
        cv: CvConfig::default(),
        model: ModelSpec::default(),
        map_baseline: MapSpec::default(),
        events: default_events(),
        seed: 0,
        output_dir: None,
    }
}

/// Sounder walk for `d1`: a street loop with hot spots at the corners and
/// halfway along two sides.
fn d1() -> PipelineConfig {
    let bounds = GeoBounds::new(-250.0, 250.0, -250.0, 250.0).expect("valid bounds");
    let loop_pts = [(-200.0, -200.0), (200.0, -200.0), (200.0, 200.0), (-200.0, 200.0), (-200.0, -200.0)];
    let hot_spots = [(-200.0, -200.0), (200.0, -200.0), (200.0, 200.0), (-200.0, 200.0), (0.0, -200.0), (0.0, 200.0)];
    let pts = |v: &[(f64, f64)]| v.iter().map(|&(x, y)| Point::new(x, y)).collect::<Vec<_>>();
    let mut scenario = ScenarioConfig::uniform(1, hot_spots.len(), 0, 1.27e9, 3.5e9);
    scenario.bounds = bounds;
    scenario.placement = Placement::Fixed {
        macros: vec![Point::ORIGIN],
        micros: pts(&hot_spots),
        ues: Vec::new(),
    };
    let mut cfg = city(1, hot_spots.len(), 0, 1.27e9, 3.5e9, 1.0, 0.0);
    cfg.scenario = scenario;
    cfg.trace = Some(TraceConfig {
        path: MobilityPath {
            waypoints: pts(&loop_pts),
            step_m: 5.0,
        },
        repeats_per_position: 5,
    });
    cfg.grid = OfdmGrid::sounder();
    cfg.labeling = LabelRule::Radius {
        radius: RadiusRule::DEFAULT_RADIUS,
        micro_positions_normalized: None,
    };
    cfg.features = FeatureConfig::channel_only();
    cfg.attach_threshold_db = -200.0;
    cfg
}

impl PipelineConfig {
    /// Named preset: `d1`, `d2a`-`d2d`, `d3a`-`d3c`.
    pub fn preset(name: &str) -> Result<Self> {
        const D2: (f64, f64, f64, f64) = (0.9e9, 2.0e9, 1500.0, -91.0);
        const D3: (f64, f64, f64, f64) = (3.5e9, 28.0e9, 1500.0, -102.0);
        let (m, u, ues, (fp, fs, side, alpha)) = match name {
            "d1" => return Ok(d1()),
            "d2a" => (75, 5, 1000, D2),
            "d2b" => (70, 10, 1000, D2),
            "d2c" => (40, 40, 1000, D2),
            "d2d" => (10, 70, 1000, D2),
            "d3a" => (50, 10, 100_000, D3),
            "d3b" => (30, 30, 100_000, D3),
            "d3c" => (20, 40, 100_000, D3),
            _ => {
                return Err(Error::config(format!(
                    "unknown preset '{name}', expected one of {}",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(city(m, u, ues, fp, fs, side, alpha))
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::config(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        self.scenario.validate()?;
        self.propagation.validate()?;
        self.grid.validate()?;
        if self.cfr.taps == 0 || !(self.cfr.delay_spread_s > 0.0) || !self.cfr.ue_tx_power_dbm.is_finite() {
            return Err(Error::config("cfr needs taps >= 1, a positive delay spread and a finite UE power"));
        }
        if self.attach_threshold_db.is_nan() {
            return Err(Error::config("attach_threshold_db must be a number"));
        }
        match &self.labeling {
            LabelRule::Gain { alpha_db } if !alpha_db.is_finite() => {
                return Err(Error::config("alpha_db must be finite"))
            }
            LabelRule::Radius { radius, .. } if !(*radius > 0.0) || !radius.is_finite() => {
                return Err(Error::config("label radius must be positive"))
            }
            _ => {}
        }
        if let Some(t) = &self.trace {
            if t.repeats_per_position == 0 {
                return Err(Error::config("repeats_per_position must be positive"));
            }
        }
        if self.cv.k < 2 {
            return Err(Error::config(format!("k must be at least 2, got {}", self.cv.k)));
        }
        self.model.validate()?;
        ModelSpec::Map(self.map_baseline.clone()).validate()?;
        self.events.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// SHA-256 of the canonical JSON with seed and output directory cleared.
    pub fn hash(&self) -> String {
        let canonical = PipelineConfig {
            seed: 0,
            output_dir: None,
            ..self.clone()
        };
        let json = serde_json::to_string(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn provenance(&self, seed: u64) -> Provenance {
        Provenance {
            config_hash: self.hash(),
            seed,
        }
    }

    /// Micro positions for the radius rule, normalized.
    fn radius_rule(&self, scenario: Option<&Scenario>) -> Result<Option<RadiusRule>> {
        let LabelRule::Radius {
            radius,
            micro_positions_normalized,
        } = &self.labeling
        else {
            return Ok(None);
        };
        let positions = match (micro_positions_normalized, scenario) {
            (Some(p), _) => p.clone(),
            (None, Some(s)) => {
                let n = Normalizer::new(s.bounds)?;
                s.micros().map(|m| n.apply(&m.position)).collect()
            }
            (None, None) => match &self.scenario.placement {
                Placement::Fixed { micros, .. } => {
                    let n = Normalizer::new(self.scenario.bounds)?;
                    micros.iter().map(|p| n.apply(p)).collect()
                }
                Placement::Uniform => {
                    return Err(Error::config(
                        "radius labels need micro_positions_normalized or fixed micro placement",
                    ))
                }
            },
        };
        Ok(Some(RadiusRule {
            radius: *radius,
            micro_positions_normalized: positions,
        }))
    }
}

/// Deployment for `config`, with trace UEs substituted when configured.
pub fn build_scenario(config: &PipelineConfig, seed: u64) -> Result<Scenario> {
    config.validate()?;
    let mut scenario = generate_scenario(&config.scenario, seed)?;
    if let Some(t) = &config.trace {
        scenario.ues = generate_path_trace(&t.path, t.repeats_per_position)?;
        scenario.validate()?;
    }
    scenario.config_hash = Some(config.hash());
    Ok(scenario)
}

/// A labeled dataset plus what happened to each UE.
#[derive(Debug, Clone)]
pub struct BuiltDataset<F> {
    pub dataset: Dataset<F>,
    /// UE id of each row.
    pub ue_ids: Vec<u32>,
    /// UEs below the attach threshold.
    pub dropped: usize,
    /// Responses of the kept UEs, when requested.
    pub responses: Option<Vec<CfrRecord<F>>>,
}

impl<F> BuiltDataset<F> {
    /// Warning for degenerate label sets.
    pub fn warning(&self) -> Option<String>
    where
        F: Real,
    {
        let r = self.dataset.class_ratio();
        if r.ones == 0 {
            Some(format!("all {} labels are 0 (class ratio 0)", r.zeros))
        } else if r.zeros == 0 {
            Some(format!("all {} labels are 1 (class ratio infinite)", r.ones))
        } else {
            None
        }
    }
}

/// Feature row, label and response of one attached UE.
type Measured<F> = (Vec<F>, Label, CfrRecord<F>);

/// Measures every attached UE at its serving macro, extracts features and
/// labels it. UEs are processed in parallel; each draws fading from its own
/// stream so the output does not depend on scheduling.
pub fn build_dataset<F: Real>(
    scenario: &Scenario,
    config: &PipelineConfig,
    seed: u64,
    keep_responses: bool,
) -> Result<BuiltDataset<F>> {
    config.validate()?;
    scenario.validate()?;
    let field = LinkField::new(config.propagation, seed)?;
    let radius = config.radius_rule(Some(scenario))?;
    let norm = Normalizer::new(scenario.bounds)?;
    let stations = &scenario.base_stations;

    let per_ue = scenario
        .ues
        .par_iter()
        .map(|ue| -> Result<Option<Measured<F>>> {
            let (serving, gain) = field
                .serving_cell(ue, stations)
                .ok_or_else(|| Error::data("scenario has no macro station"))?;
            if gain.gain_db < config.attach_threshold_db {
                return Ok(None);
            }
            let mut rng = rng::stream(seed, &[purpose::FADING, ue.id as u64]);
            let cfr = synthesize_cfr::<F, _>(
                gain,
                &config.grid,
                &config.cfr,
                config.propagation.noise_floor_dbm,
                &mut rng,
            )?;
            let row = compute_features(&cfr, ue, scenario, serving.id)?.to_row(&config.features)?;
            let label = match (&config.labeling, &radius) {
                (LabelRule::Gain { alpha_db }, _) => label_by_gain_field(&field, ue, stations, *alpha_db),
                (LabelRule::Radius { .. }, Some(rule)) => label_by_radius(&norm.apply(&ue.position), rule),
                (LabelRule::Radius { .. }, None) => unreachable!("radius rule resolved above"),
            };
            Ok(Some((
                row,
                label,
                CfrRecord {
                    ue_id: ue.id,
                    position: ue.position,
                    cfr,
                },
            )))
        })
        .collect::<Vec<_>>();

    let mut dataset = Dataset::empty(config.features.column_names())?;
    let mut ue_ids = Vec::new();
    let mut responses = keep_responses.then(Vec::new);
    let mut dropped = 0;
    for item in per_ue {
        match item? {
            None => dropped += 1,
            Some((row, label, rec)) => {
                dataset.push(&row, label)?;
                ue_ids.push(rec.ue_id);
                if let Some(r) = responses.as_mut() {
                    r.push(rec);
                }
            }
        }
    }
    if dataset.is_empty() {
        return Err(Error::data(format!(
            "no UE reaches the attach threshold of {} dB",
            config.attach_threshold_db
        )));
    }
    if config.decibels {
        dataset = to_decibels(&dataset)?;
    }
    Ok(BuiltDataset {
        dataset,
        ue_ids,
        dropped,
        responses,
    })
}

/// Channel features and radius labels for externally measured responses.
pub fn import_dataset<F: Real>(records: &[CfrRecord<F>], config: &PipelineConfig) -> Result<Dataset<F>> {
    config.validate()?;
    if let Some(k) = config.features.enabled().iter().find(|k| !k.is_channel()) {
        return Err(Error::config(format!(
            "feature '{k}' needs deployment geometry and cannot be computed for imported data"
        )));
    }
    let rule = config
        .radius_rule(None)?
        .ok_or_else(|| Error::config("imported data can only be labeled with the radius rule"))?;
    let norm = Normalizer::new(config.scenario.bounds)?;
    let mut ds = Dataset::empty(config.features.column_names())?;
    for rec in records {
        if rec.cfr.n_antennas() != config.grid.n_antennas || rec.cfr.n_subcarriers() != config.grid.usable() {
            return Err(Error::data(format!(
                "UE {}: response is {}x{}, the configured grid expects {}x{}",
                rec.ue_id,
                rec.cfr.n_antennas(),
                rec.cfr.n_subcarriers(),
                config.grid.n_antennas,
                config.grid.usable()
            )));
        }
        let stats = channel_stats(&rec.cfr);
        let row: Vec<F> = config
            .features
            .enabled()
            .iter()
            .map(|k| match k {
                FeatureKind::Energy => stats.energy,
                FeatureKind::MinMag => stats.min_mag,
                FeatureKind::MaxMag => stats.max_mag,
                _ => unreachable!("non-channel features rejected above"),
            })
            .collect();
        ds.push(&row, label_by_radius(&norm.apply(&rec.position), &rule))?;
    }
    if ds.is_empty() {
        return Err(Error::data("no records to import"));
    }
    if config.decibels {
        ds = to_decibels(&ds)?;
    }
    Ok(ds)
}

/// Cross-validates `spec` under the configured fold and sampling settings.
pub fn evaluate<F: Real>(dataset: &Dataset<F>, config: &PipelineConfig, spec: &ModelSpec, seed: u64) -> Result<CvReport<F>> {
    cross_validate(dataset, spec, &config.cv, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub ones: usize,
    pub zeros: usize,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub model: ModelSpec,
    pub k: usize,
    pub rows: usize,
    pub class_counts: ClassCounts,
    pub fold_aurocs: Vec<f64>,
    pub mean_auroc: f64,
    pub std_auroc: f64,
    pub seed: u64,
    pub config_hash: String,
    pub config: PipelineConfig,
}

impl Summary {
    pub fn new<F: Real>(report: &CvReport<F>, dataset: &Dataset<F>, spec: &ModelSpec, config: &PipelineConfig, seed: u64) -> Self {
        let r = dataset.class_ratio();
        Summary {
            model: spec.clone(),
            k: config.cv.k,
            rows: dataset.len(),
            class_counts: ClassCounts {
                ones: r.ones,
                zeros: r.zeros,
            },
            fold_aurocs: report.mean.aurocs.clone(),
            mean_auroc: report.mean.mean_auroc,
            std_auroc: report.mean.std_auroc,
            seed,
            config_hash: config.hash(),
            config: PipelineConfig {
                seed,
                output_dir: None,
                ..config.clone()
            },
        }
    }
}
