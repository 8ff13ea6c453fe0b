//! Features derived at the serving macro from the uplink channel response
//! and the deployment geometry.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelFrequencyResponse;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::real::Real;
use crate::scenario::{Normalizer, Point, Scenario, UserEquipment};

/// Feature groups, in declared column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Energy,
    MinMag,
    MaxMag,
    #[serde(rename = "dist_macro_to_nearest_micro_m")]
    DistMacroToNearestMicro,
    ServingMacroXy,
    NearestMicroXy,
    SectorId,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 7] = [
        FeatureKind::Energy,
        FeatureKind::MinMag,
        FeatureKind::MaxMag,
        FeatureKind::DistMacroToNearestMicro,
        FeatureKind::ServingMacroXy,
        FeatureKind::NearestMicroXy,
        FeatureKind::SectorId,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Energy => "energy",
            FeatureKind::MinMag => "min_mag",
            FeatureKind::MaxMag => "max_mag",
            FeatureKind::DistMacroToNearestMicro => "dist_macro_to_nearest_micro_m",
            FeatureKind::ServingMacroXy => "serving_macro_xy",
            FeatureKind::NearestMicroXy => "nearest_micro_xy",
            FeatureKind::SectorId => "sector_id",
        }
    }

    pub fn columns(self) -> &'static [&'static str] {
        match self {
            FeatureKind::Energy => &["energy"],
            FeatureKind::MinMag => &["min_mag"],
            FeatureKind::MaxMag => &["max_mag"],
            FeatureKind::DistMacroToNearestMicro => &["dist_macro_to_nearest_micro_m"],
            FeatureKind::ServingMacroXy => &["serving_macro_x", "serving_macro_y"],
            FeatureKind::NearestMicroXy => &["nearest_micro_x", "nearest_micro_y"],
            FeatureKind::SectorId => &["sector_id"],
        }
    }

    /// Derived from the channel response alone.
    pub fn is_channel(self) -> bool {
        matches!(self, FeatureKind::Energy | FeatureKind::MinMag | FeatureKind::MaxMag)
    }

    pub fn needs_micro(self) -> bool {
        matches!(self, FeatureKind::DistMacroToNearestMicro | FeatureKind::NearestMicroXy)
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config(format!("unknown feature '{s}'")))
    }
}

/// Non-empty set of enabled feature groups, always iterated in declared order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<FeatureKind>", into = "Vec<FeatureKind>")]
pub struct FeatureConfig {
    enabled: Vec<FeatureKind>,
}

impl FeatureConfig {
    pub fn new(kinds: impl IntoIterator<Item = FeatureKind>) -> Result<Self> {
        let mut enabled: Vec<FeatureKind> = kinds.into_iter().collect();
        enabled.sort();
        enabled.dedup();
        if enabled.is_empty() {
            return Err(Error::config("at least one feature must be enabled"));
        }
        Ok(FeatureConfig { enabled })
    }

    pub fn all() -> Self {
        FeatureConfig {
            enabled: FeatureKind::ALL.to_vec(),
        }
    }

    pub fn channel_only() -> Self {
        FeatureConfig {
            enabled: vec![FeatureKind::Energy, FeatureKind::MinMag, FeatureKind::MaxMag],
        }
    }

    pub fn enabled(&self) -> &[FeatureKind] {
        &self.enabled
    }

    pub fn contains(&self, kind: FeatureKind) -> bool {
        self.enabled.contains(&kind)
    }

    pub fn column_names(&self) -> Vec<String> {
        self.enabled
            .iter()
            .flat_map(|k| k.columns().iter().map(|c| c.to_string()))
            .collect()
    }
}

impl TryFrom<Vec<FeatureKind>> for FeatureConfig {
    type Error = Error;

    fn try_from(v: Vec<FeatureKind>) -> Result<Self> {
        FeatureConfig::new(v)
    }
}

impl From<FeatureConfig> for Vec<FeatureKind> {
    fn from(c: FeatureConfig) -> Self {
        c.enabled
    }
}

/// Energy and magnitude extremes of a channel response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelStats<F> {
    pub energy: F,
    pub min_mag: F,
    pub max_mag: F,
}

/// Statistics pooled over every antenna and usable subcarrier.
pub fn channel_stats<F: Real>(cfr: &ChannelFrequencyResponse<F>) -> ChannelStats<F> {
    let mut energy = F::zero();
    let mut min_mag = F::infinity();
    let mut max_mag = F::zero();
    for h in cfr.samples() {
        let p = h.norm_sqr();
        energy += p;
        let m = p.sqrt();
        min_mag = min_mag.min(m);
        max_mag = max_mag.max(m);
    }
    ChannelStats {
        energy,
        min_mag,
        max_mag,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MicroContext<F> {
    pub dist_macro_to_nearest_micro_m: F,
    pub nearest_micro_xy: (F, F),
}

/// Every feature for one UE. `micro` is absent when the deployment has no
/// micro station.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector<F> {
    pub channel: ChannelStats<F>,
    pub serving_macro_xy: (F, F),
    pub sector_id: u32,
    pub micro: Option<MicroContext<F>>,
}

impl<F: Real> FeatureVector<F> {
    /// Values of the enabled columns in declared order.
    pub fn to_row(&self, config: &FeatureConfig) -> Result<Vec<F>> {
        let mut row = Vec::with_capacity(9);
        for &kind in config.enabled() {
            match kind {
                FeatureKind::Energy => row.push(self.channel.energy),
                FeatureKind::MinMag => row.push(self.channel.min_mag),
                FeatureKind::MaxMag => row.push(self.channel.max_mag),
                FeatureKind::ServingMacroXy => {
                    row.extend([self.serving_macro_xy.0, self.serving_macro_xy.1])
                }
                FeatureKind::SectorId => row.push(F::of(self.sector_id as f64)),
                FeatureKind::DistMacroToNearestMicro | FeatureKind::NearestMicroXy => {
                    let m = self.micro.ok_or_else(|| {
                        Error::config(format!("feature '{kind}' needs a micro station in the scenario"))
                    })?;
                    if kind == FeatureKind::NearestMicroXy {
                        row.extend([m.nearest_micro_xy.0, m.nearest_micro_xy.1]);
                    } else {
                        row.push(m.dist_macro_to_nearest_micro_m);
                    }
                }
            }
        }
        Ok(row)
    }
}

/// Sector of the serving macro facing `ue_pos`. Sector `k` covers bearings
/// in `(k·w − w/2, k·w + w/2]` with `w = 360°/sector_count`, so sector 0 is
/// centred on the +x axis. Coincident positions map to sector 0.
pub fn sector_of(ue_pos: &Point, macro_pos: &Point, sector_count: u32) -> u32 {
    if sector_count <= 1 || ue_pos == macro_pos {
        return 0;
    }
    let n = sector_count as f64;
    let theta = (ue_pos.y - macro_pos.y).atan2(ue_pos.x - macro_pos.x);
    let mut x = (theta / std::f64::consts::TAU * n + 0.5).rem_euclid(n);
    let nearest = x.round();
    if (x - nearest).abs() < 1e-9 {
        x = nearest;
    }
    let s = x.ceil() as i64 - 1;
    s.rem_euclid(sector_count as i64) as u32
}

/// Computes every feature of `ue` given its uplink response at the serving
/// macro. Coordinates are normalized against the scenario bounds; the
/// macro-to-micro distance stays in meters.
pub fn compute_features<F: Real>(
    cfr: &ChannelFrequencyResponse<F>,
    ue: &UserEquipment,
    scenario: &Scenario,
    serving_macro_id: u32,
) -> Result<FeatureVector<F>> {
    let serving = scenario
        .station(serving_macro_id)
        .filter(|b| b.is_macro())
        .ok_or_else(|| Error::data(format!("no macro station with id {serving_macro_id}")))?;
    let norm = Normalizer::new(scenario.bounds)?;
    let xy = |p: &Point| {
        let q = norm.apply(p);
        (F::of(q.x), F::of(q.y))
    };
    let micro = scenario
        .micros()
        .map(|m| (m, m.position.distance(&serving.position)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.id.cmp(&b.0.id)))
        .map(|(m, d)| MicroContext {
            dist_macro_to_nearest_micro_m: F::of(d),
            nearest_micro_xy: xy(&m.position),
        });
    Ok(FeatureVector {
        channel: channel_stats(cfr),
        serving_macro_xy: xy(&serving.position),
        sector_id: sector_of(&ue.position, &serving.position, serving.sector_count.unwrap_or(1)),
        micro,
    })
}

/// Enabled feature columns for one UE.
pub fn extract_features<F: Real>(
    cfr: &ChannelFrequencyResponse<F>,
    ue: &UserEquipment,
    scenario: &Scenario,
    serving_macro_id: u32,
    config: &FeatureConfig,
) -> Result<Vec<F>> {
    compute_features(cfr, ue, scenario, serving_macro_id)?.to_row(config)
}

/// Replaces linear channel columns by their decibel values: `energy` becomes
/// `energy_db` (10·log10) and the magnitudes `min_mag_db`/`max_mag_db`
/// (20·log10). Zeros are floored at the smallest positive value.
pub fn to_decibels<F: Real>(dataset: &Dataset<F>) -> Result<Dataset<F>> {
    let scale: Vec<Option<F>> = dataset
        .feature_names()
        .iter()
        .map(|n| match n.as_str() {
            "energy" => Some(F::of(10.0)),
            "min_mag" | "max_mag" => Some(F::of(20.0)),
            _ => None,
        })
        .collect();
    let names = dataset
        .feature_names()
        .iter()
        .zip(&scale)
        .map(|(n, s)| if s.is_some() { format!("{n}_db") } else { n.clone() })
        .collect();
    let mut out = Dataset::empty(names)?;
    let mut buf = Vec::with_capacity(dataset.n_features());
    for (i, row) in dataset.rows().enumerate() {
        buf.clear();
        buf.extend(row.iter().zip(&scale).map(|(&v, s)| match s {
            Some(k) => *k * v.max(F::min_positive_value()).log10(),
            None => v,
        }));
        out.push_with_origin(&buf, dataset.label(i), dataset.origins()[i])?;
    }
    Ok(out)
}
