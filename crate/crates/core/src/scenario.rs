//! Deployment geometry: bounded regions, macro/micro base stations, UE
//! placements and mobility traces.

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, purpose};

/// FR1 carrier range in Hz.
pub const FR1_HZ: (f64, f64) = (410.0e6, 7125.0e6);
/// FR2 carrier range in Hz.
pub const FR2_HZ: (f64, f64) = (24_250.0e6, 52_600.0e6);

/// Rejects carriers outside both 3GPP frequency ranges.
pub fn validate_frequency(freq_hz: f64) -> Result<()> {
    let inside = |(lo, hi): (f64, f64)| freq_hz >= lo && freq_hz <= hi;
    if freq_hz.is_finite() && (inside(FR1_HZ) || inside(FR2_HZ)) {
        Ok(())
    } else {
        Err(Error::FrequencyOutOfRange(freq_hz))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Axis-aligned rectangle in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeoBounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl GeoBounds {
    /// The normalized square `[-1, 1]²`.
    pub const UNIT: GeoBounds = GeoBounds {
        x_min: -1.0,
        x_max: 1.0,
        y_min: -1.0,
        y_max: 1.0,
    };

    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let b = GeoBounds {
            x_min,
            x_max,
            y_min,
            y_max,
        };
        b.validate()?;
        Ok(b)
    }

    /// Square region `[0, side] × [0, side]`.
    pub fn square(side_m: f64) -> Result<Self> {
        Self::new(0.0, side_m, 0.0, side_m)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.x_min >= self.x_max || self.y_min >= self.y_max {
            return Err(Error::config(format!(
                "degenerate bounds [{}, {}] x [{}, {}]",
                self.x_min, self.x_max, self.y_min, self.y_max
            )));
        }
        Ok(())
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        Point {
            x: rng.random_range(self.x_min..=self.x_max),
            y: rng.random_range(self.y_min..=self.y_max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BsKind {
    Macro,
    Micro,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseStation {
    pub id: u32,
    pub kind: BsKind,
    pub position: Point,
    pub carrier_freq_hz: f64,
    pub tx_power_dbm: f64,
    /// Present for macro stations only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sector_count: Option<u32>,
}

impl BaseStation {
    pub fn is_macro(&self) -> bool {
        self.kind == BsKind::Macro
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserEquipment {
    pub id: u32,
    pub position: Point,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub bounds: GeoBounds,
    pub base_stations: Vec<BaseStation>,
    pub ues: Vec<UserEquipment>,
    pub seed: u64,
    /// Hash of the configuration that produced this scenario, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl Scenario {
    pub fn macros(&self) -> impl Iterator<Item = &BaseStation> {
        self.base_stations.iter().filter(|b| b.kind == BsKind::Macro)
    }

    pub fn micros(&self) -> impl Iterator<Item = &BaseStation> {
        self.base_stations.iter().filter(|b| b.kind == BsKind::Micro)
    }

    pub fn station(&self, id: u32) -> Option<&BaseStation> {
        self.base_stations.iter().find(|b| b.id == id)
    }

    /// Checks every structural invariant; used after loading from JSON.
    pub fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        if self.macros().next().is_none() {
            return Err(Error::config("scenario needs at least one macro base station"));
        }
        let mut bs_ids = HashSet::new();
        for bs in &self.base_stations {
            if !bs_ids.insert(bs.id) {
                return Err(Error::data(format!("duplicate base station id {}", bs.id)));
            }
            validate_frequency(bs.carrier_freq_hz)?;
            if !self.bounds.contains(&bs.position) {
                return Err(Error::data(format!("base station {} lies outside bounds", bs.id)));
            }
            if let Some(0) = bs.sector_count {
                return Err(Error::data(format!("base station {} has zero sectors", bs.id)));
            }
        }
        for m in self.macros() {
            if self.micros().any(|u| u.position == m.position) {
                return Err(Error::data(format!(
                    "macro {} is colocated with a micro station",
                    m.id
                )));
            }
        }
        let mut ue_ids = HashSet::new();
        for ue in &self.ues {
            if !ue_ids.insert(ue.id) {
                return Err(Error::data(format!("duplicate UE id {}", ue.id)));
            }
            if !self.bounds.contains(&ue.position) {
                return Err(Error::data(format!("UE {} lies outside bounds", ue.id)));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }
}

/// How stations and UEs are positioned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum Placement {
    Uniform,
    Fixed {
        macros: Vec<Point>,
        micros: Vec<Point>,
        ues: Vec<Point>,
    },
}

fn default_region() -> GeoBounds {
    GeoBounds {
        x_min: 0.0,
        x_max: 2000.0,
        y_min: 0.0,
        y_max: 2000.0,
    }
}

fn default_placement() -> Placement {
    Placement::Uniform
}

fn default_macro_power() -> f64 {
    46.0
}

fn default_micro_power() -> f64 {
    30.0
}

fn default_sectors() -> u32 {
    3
}

fn default_separation() -> f64 {
    10.0
}

fn default_max_entities() -> usize {
    1_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_region")]
    pub bounds: GeoBounds,
    pub macro_count: usize,
    pub micro_count: usize,
    pub ue_count: usize,
    #[serde(default = "default_placement")]
    pub placement: Placement,
    pub macro_freq_hz: f64,
    pub micro_freq_hz: f64,
    #[serde(default = "default_macro_power")]
    pub macro_tx_power_dbm: f64,
    #[serde(default = "default_micro_power")]
    pub micro_tx_power_dbm: f64,
    #[serde(default = "default_sectors")]
    pub macro_sectors: u32,
    #[serde(default = "default_separation")]
    pub min_bs_separation_m: f64,
    /// Upper limit on each of the three counts.
    #[serde(default = "default_max_entities")]
    pub max_entities: usize,
}

impl ScenarioConfig {
    /// Uniform placement over the default 2 km square.
    pub fn uniform(
        macro_count: usize,
        micro_count: usize,
        ue_count: usize,
        macro_freq_hz: f64,
        micro_freq_hz: f64,
    ) -> Self {
        ScenarioConfig {
            bounds: default_region(),
            macro_count,
            micro_count,
            ue_count,
            placement: Placement::Uniform,
            macro_freq_hz,
            micro_freq_hz,
            macro_tx_power_dbm: default_macro_power(),
            micro_tx_power_dbm: default_micro_power(),
            macro_sectors: default_sectors(),
            min_bs_separation_m: default_separation(),
            max_entities: default_max_entities(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        if self.macro_count == 0 {
            return Err(Error::config("at least one macro base station is required"));
        }
        for (what, n) in [
            ("macro", self.macro_count),
            ("micro", self.micro_count),
            ("UE", self.ue_count),
        ] {
            if n > self.max_entities {
                return Err(Error::config(format!(
                    "{what} count {n} exceeds the configured maximum {}",
                    self.max_entities
                )));
            }
        }
        validate_frequency(self.macro_freq_hz)?;
        validate_frequency(self.micro_freq_hz)?;
        if self.macro_sectors == 0 {
            return Err(Error::config("macro_sectors must be positive"));
        }
        if !(self.min_bs_separation_m >= 0.0) {
            return Err(Error::config("min_bs_separation_m must be non-negative"));
        }
        if let Placement::Fixed { macros, micros, ues } = &self.placement {
            if macros.len() != self.macro_count
                || micros.len() != self.micro_count
                || ues.len() != self.ue_count
            {
                return Err(Error::config(
                    "fixed placement lists must match the configured counts",
                ));
            }
        }
        Ok(())
    }
}

const MAX_PLACEMENT_ATTEMPTS: usize = 100_000;

/// Builds a deployment. Identical `(config, seed)` always yields an identical
/// scenario.
pub fn generate_scenario(config: &ScenarioConfig, seed: u64) -> Result<Scenario> {
    config.validate()?;
    let mut rng = rng::stream(seed, &[purpose::SCENARIO]);

    let (macro_pos, micro_pos, ue_pos) = match &config.placement {
        Placement::Fixed { macros, micros, ues } => (macros.clone(), micros.clone(), ues.clone()),
        Placement::Uniform => {
            let mut placed: Vec<Point> = Vec::with_capacity(config.macro_count + config.micro_count);
            for _ in 0..config.macro_count + config.micro_count {
                let p = place_separated(&config.bounds, &placed, config.min_bs_separation_m, &mut rng)?;
                placed.push(p);
            }
            let micros = placed.split_off(config.macro_count);
            let ues = (0..config.ue_count)
                .map(|_| config.bounds.sample(&mut rng))
                .collect();
            (placed, micros, ues)
        }
    };

    let mut base_stations = Vec::with_capacity(macro_pos.len() + micro_pos.len());
    for (i, position) in macro_pos.into_iter().enumerate() {
        base_stations.push(BaseStation {
            id: i as u32,
            kind: BsKind::Macro,
            position,
            carrier_freq_hz: config.macro_freq_hz,
            tx_power_dbm: config.macro_tx_power_dbm,
            sector_count: Some(config.macro_sectors),
        });
    }
    for (i, position) in micro_pos.into_iter().enumerate() {
        base_stations.push(BaseStation {
            id: (config.macro_count + i) as u32,
            kind: BsKind::Micro,
            position,
            carrier_freq_hz: config.micro_freq_hz,
            tx_power_dbm: config.micro_tx_power_dbm,
            sector_count: None,
        });
    }
    let ues = ue_pos
        .into_iter()
        .enumerate()
        .map(|(i, position)| UserEquipment {
            id: i as u32,
            position,
            timestamp: None,
        })
        .collect();

    let scenario = Scenario {
        bounds: config.bounds,
        base_stations,
        ues,
        seed,
        config_hash: None,
    };
    scenario.validate()?;
    Ok(scenario)
}

fn place_separated<R: Rng + ?Sized>(
    bounds: &GeoBounds,
    placed: &[Point],
    min_sep: f64,
    rng: &mut R,
) -> Result<Point> {
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let p = bounds.sample(rng);
        if placed.iter().all(|q| q.distance(&p) >= min_sep && *q != p) {
            return Ok(p);
        }
    }
    Err(Error::config(format!(
        "could not place {} base stations {} m apart inside the bounds",
        placed.len() + 1,
        min_sep
    )))
}

/// Polyline followed by a moving transmitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MobilityPath {
    pub waypoints: Vec<Point>,
    pub step_m: f64,
}

/// Samples `path` every `step_m` meters and repeats each position
/// `repeats_per_position` times. Timestamps count measurements in seconds.
pub fn generate_path_trace(path: &MobilityPath, repeats_per_position: usize) -> Result<Vec<UserEquipment>> {
    if path.waypoints.len() < 2 {
        return Err(Error::config("a mobility path needs at least two waypoints"));
    }
    if !(path.step_m > 0.0) || !path.step_m.is_finite() {
        return Err(Error::config("step_m must be positive"));
    }
    if repeats_per_position == 0 {
        return Err(Error::config("repeats_per_position must be positive"));
    }
    let segments: Vec<(Point, Point, f64)> = path
        .waypoints
        .windows(2)
        .map(|w| (w[0], w[1], w[0].distance(&w[1])))
        .filter(|&(_, _, len)| len > 0.0)
        .collect();
    let total: f64 = segments.iter().map(|s| s.2).sum();
    if segments.is_empty() {
        return Err(Error::config("degenerate mobility path: all waypoints coincide"));
    }

    let n_positions = (total / path.step_m + 1e-9).floor() as usize + 1;
    let mut out = Vec::with_capacity(n_positions * repeats_per_position);
    let mut seg = 0usize;
    let mut seg_start = 0.0f64;
    for i in 0..n_positions {
        let s = (i as f64 * path.step_m).min(total);
        while seg + 1 < segments.len() && s > seg_start + segments[seg].2 {
            seg_start += segments[seg].2;
            seg += 1;
        }
        let (a, b, len) = segments[seg];
        let t = ((s - seg_start) / len).clamp(0.0, 1.0);
        let position = Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
        for _ in 0..repeats_per_position {
            let id = out.len() as u32;
            out.push(UserEquipment {
                id,
                position,
                timestamp: Some(id as f64),
            });
        }
    }
    Ok(out)
}

/// Per-axis affine map from a bounding box onto `[-1, 1]²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalizer {
    bounds: GeoBounds,
}

impl Normalizer {
    pub fn new(bounds: GeoBounds) -> Result<Self> {
        bounds.validate()?;
        Ok(Normalizer { bounds })
    }

    /// Normalizer for the bounding box of `points`.
    pub fn fit(points: &[Point]) -> Result<Self> {
        let mut b = GeoBounds {
            x_min: f64::INFINITY,
            x_max: f64::NEG_INFINITY,
            y_min: f64::INFINITY,
            y_max: f64::NEG_INFINITY,
        };
        for p in points {
            b.x_min = b.x_min.min(p.x);
            b.x_max = b.x_max.max(p.x);
            b.y_min = b.y_min.min(p.y);
            b.y_max = b.y_max.max(p.y);
        }
        Self::new(b)
    }

    pub fn apply(&self, p: &Point) -> Point {
        if self.bounds == GeoBounds::UNIT {
            return *p;
        }
        let b = &self.bounds;
        Point {
            x: 2.0 * (p.x - b.x_min) / b.width() - 1.0,
            y: 2.0 * (p.y - b.y_min) / b.height() - 1.0,
        }
    }
}

/// Maps every position of `scenario` onto `[-1, 1]²`, each axis independently.
pub fn normalize_coordinates(scenario: &Scenario) -> Result<Scenario> {
    let n = Normalizer::new(scenario.bounds)?;
    let mut out = scenario.clone();
    out.bounds = GeoBounds::UNIT;
    for bs in &mut out.base_stations {
        bs.position = n.apply(&bs.position);
    }
    for ue in &mut out.ues {
        ue.position = n.apply(&ue.position);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d2a() -> ScenarioConfig {
        ScenarioConfig::uniform(75, 5, 1000, 0.9e9, 2.0e9)
    }

    #[test]
    fn d2a_counts() {
        let s = generate_scenario(&d2a(), 1).unwrap();
        assert_eq!(s.base_stations.len(), 80);
        assert_eq!(s.macros().count(), 75);
        assert_eq!(s.micros().count(), 5);
        assert_eq!(s.ues.len(), 1000);
    }

    #[test]
    fn minimal_scenario() {
        let s = generate_scenario(&ScenarioConfig::uniform(1, 0, 0, 0.9e9, 2.0e9), 0).unwrap();
        assert_eq!(s.base_stations.len(), 1);
        assert!(s.ues.is_empty());
    }

    #[test]
    fn same_seed_same_scenario() {
        let cfg = ScenarioConfig::uniform(20, 40, 100, 3.5e9, 28.0e9);
        let a = generate_scenario(&cfg, 7).unwrap();
        let b = generate_scenario(&cfg, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert_ne!(a, generate_scenario(&cfg, 8).unwrap());
    }

    #[test]
    fn rejects_bad_configs() {
        let zero_macro = ScenarioConfig::uniform(0, 3, 10, 0.9e9, 2.0e9);
        assert!(matches!(generate_scenario(&zero_macro, 0), Err(Error::Config(_))));

        let bad_freq = ScenarioConfig::uniform(1, 1, 1, 10.0e9, 2.0e9);
        assert!(matches!(
            generate_scenario(&bad_freq, 0),
            Err(Error::FrequencyOutOfRange(_))
        ));

        let mut too_many = d2a();
        too_many.max_entities = 500;
        assert!(generate_scenario(&too_many, 0).is_err());
    }

    #[test]
    fn fr_ranges() {
        assert!(validate_frequency(0.9e9).is_ok());
        assert!(validate_frequency(28.0e9).is_ok());
        assert!(validate_frequency(410.0e6).is_ok());
        assert!(validate_frequency(400.0e6).is_err());
        assert!(validate_frequency(8.0e9).is_err());
        assert!(validate_frequency(f64::NAN).is_err());
    }

    #[test]
    fn fixed_placement_is_used_verbatim() {
        let mut cfg = ScenarioConfig::uniform(1, 1, 1, 0.9e9, 2.0e9);
        cfg.placement = Placement::Fixed {
            macros: vec![Point::new(10.0, 10.0)],
            micros: vec![Point::new(20.0, 30.0)],
            ues: vec![Point::new(5.0, 5.0)],
        };
        let s = generate_scenario(&cfg, 0).unwrap();
        assert_eq!(s.base_stations[1].position, Point::new(20.0, 30.0));
        assert_eq!(s.ues[0].position, Point::new(5.0, 5.0));
    }

    #[test]
    fn colocated_fixed_placement_rejected() {
        let mut cfg = ScenarioConfig::uniform(1, 1, 0, 0.9e9, 2.0e9);
        cfg.placement = Placement::Fixed {
            macros: vec![Point::new(10.0, 10.0)],
            micros: vec![Point::new(10.0, 10.0)],
            ues: vec![],
        };
        assert!(generate_scenario(&cfg, 0).is_err());
    }

    #[test]
    fn json_round_trip() {
        let s = generate_scenario(&ScenarioConfig::uniform(3, 2, 5, 0.9e9, 2.0e9), 4).unwrap();
        let back = Scenario::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn straight_path_trace() {
        let path = MobilityPath {
            waypoints: vec![Point::new(0.0, 0.0), Point::new(10.0, 0.0)],
            step_m: 1.0,
        };
        let ues = generate_path_trace(&path, 5).unwrap();
        assert_eq!(ues.len(), 55);
        assert_eq!(ues[54].position, Point::new(10.0, 0.0));
        assert!(ues.windows(2).all(|w| w[0].timestamp < w[1].timestamp));
        assert!(ues[..5].iter().all(|u| u.position == Point::ORIGIN));
    }

    #[test]
    fn path_trace_follows_corners() {
        let path = MobilityPath {
            waypoints: vec![Point::new(0.0, 0.0), Point::new(2.0, 0.0), Point::new(2.0, 2.0)],
            step_m: 1.0,
        };
        let pos: Vec<Point> = generate_path_trace(&path, 1).unwrap().iter().map(|u| u.position).collect();
        assert_eq!(
            pos,
            vec![
                Point::new(0.0, 0.0),
                Point::new(1.0, 0.0),
                Point::new(2.0, 0.0),
                Point::new(2.0, 1.0),
                Point::new(2.0, 2.0)
            ]
        );
    }

    #[test]
    fn degenerate_path_rejected() {
        let path = MobilityPath {
            waypoints: vec![Point::new(3.0, 3.0), Point::new(3.0, 3.0)],
            step_m: 1.0,
        };
        assert!(generate_path_trace(&path, 5).is_err());
    }

    #[test]
    fn normalization_examples() {
        let n = Normalizer::new(GeoBounds::square(100.0).unwrap()).unwrap();
        assert_eq!(n.apply(&Point::new(50.0, 50.0)), Point::ORIGIN);
        assert_eq!(n.apply(&Point::new(100.0, 0.0)), Point::new(1.0, -1.0));

        let sym = Normalizer::new(GeoBounds::new(-300.0, 300.0, -80.0, 80.0).unwrap()).unwrap();
        assert_eq!(sym.apply(&Point::ORIGIN), Point::ORIGIN);
    }

    #[test]
    fn normalize_is_idempotent() {
        let s = generate_scenario(&ScenarioConfig::uniform(4, 4, 50, 0.9e9, 2.0e9), 2).unwrap();
        let once = normalize_coordinates(&s).unwrap();
        let twice = normalize_coordinates(&once).unwrap();
        assert_eq!(once, twice);
        assert_eq!(once.bounds, GeoBounds::UNIT);
        assert!(once.ues.iter().all(|u| GeoBounds::UNIT.contains(&u.position)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn generated_positions_inside_and_disjoint(
            seed in any::<u64>(),
            macros in 1usize..6,
            micros in 0usize..6,
            ues in 0usize..8,
            w in 50.0f64..5000.0,
            h in 50.0f64..5000.0,
            x0 in -1000.0f64..1000.0,
        ) {
            let mut cfg = ScenarioConfig::uniform(macros, micros, ues, 0.9e9, 2.0e9);
            cfg.bounds = GeoBounds::new(x0, x0 + w, 0.0, h).unwrap();
            let s = generate_scenario(&cfg, seed).unwrap();
            prop_assert!(s.base_stations.iter().all(|b| cfg.bounds.contains(&b.position)));
            prop_assert!(s.ues.iter().all(|u| cfg.bounds.contains(&u.position)));
            for m in s.macros() {
                prop_assert!(s.micros().all(|u| u.position != m.position));
            }
        }
    }
}
