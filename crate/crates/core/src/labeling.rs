//! Ground-truth labels for secondary-carrier availability.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{link_gain, LinkField, PropagationConfig};
use crate::scenario::{BaseStation, Point, UserEquipment};

/// Binary class: `One` means the secondary carrier is reachable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Label {
    Zero,
    One,
}

impl Label {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Label::One
        } else {
            Label::Zero
        }
    }

    pub fn is_one(self) -> bool {
        self == Label::One
    }

    pub fn flip(self) -> Self {
        match self {
            Label::Zero => Label::One,
            Label::One => Label::Zero,
        }
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        l.as_u8()
    }
}

impl TryFrom<u8> for Label {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, String> {
        match v {
            0 => Ok(Label::Zero),
            1 => Ok(Label::One),
            _ => Err(format!("label must be 0 or 1, got {v}")),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// Coverage disc of a given radius around each micro station, in
/// normalized coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadiusRule {
    pub radius: f64,
    pub micro_positions_normalized: Vec<Point>,
}

impl RadiusRule {
    pub const DEFAULT_RADIUS: f64 = 0.08;
}

/// One iff the position lies within `rule.radius` of any micro station
/// (boundary inclusive).
pub fn label_by_radius(ue_pos_normalized: &Point, rule: &RadiusRule) -> Label {
    Label::from_bool(
        rule.micro_positions_normalized
            .iter()
            .any(|b| ue_pos_normalized.distance(b) <= rule.radius),
    )
}

/// One iff the best micro link gain reaches `alpha_db`. Gains are drawn from
/// `rng` once per micro station in slice order.
pub fn label_by_gain<R: Rng + ?Sized>(
    ue: &UserEquipment,
    micro_stations: &[BaseStation],
    alpha_db: f64,
    config: &PropagationConfig,
    rng: &mut R,
) -> Label {
    let best = micro_stations
        .iter()
        .map(|bs| link_gain(ue, bs, config, rng).gain_db)
        .fold(f64::NEG_INFINITY, f64::max);
    Label::from_bool(!micro_stations.is_empty() && best >= alpha_db)
}

/// Best secondary-carrier gain seen by `ue` over the micro layer of a
/// deployment, or `None` without micro stations.
pub fn best_micro_gain(field: &LinkField, ue: &UserEquipment, stations: &[BaseStation]) -> Option<f64> {
    stations
        .iter()
        .filter(|b| !b.is_macro())
        .map(|bs| field.gain(ue, bs).gain_db)
        .reduce(f64::max)
}

/// [`label_by_gain`] against a deterministic [`LinkField`].
pub fn label_by_gain_field(field: &LinkField, ue: &UserEquipment, stations: &[BaseStation], alpha_db: f64) -> Label {
    Label::from_bool(best_micro_gain(field, ue, stations).is_some_and(|g| g >= alpha_db))
}

/// Ones-to-zeros count ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassRatio {
    pub ones: usize,
    pub zeros: usize,
}

impl ClassRatio {
    /// `None` when there are no zeros, i.e. the ratio is infinite.
    pub fn value(&self) -> Option<f64> {
        (self.zeros > 0).then(|| self.ones as f64 / self.zeros as f64)
    }

    pub fn is_infinite(&self) -> bool {
        self.zeros == 0
    }

    pub fn total(&self) -> usize {
        self.ones + self.zeros
    }
}

impl fmt::Display for ClassRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.value() {
            Some(v) => write!(f, "{} ones / {} zeros = {v}", self.ones, self.zeros),
            None => write!(f, "{} ones / 0 zeros = inf", self.ones),
        }
    }
}

pub fn class_ratio(labels: &[Label]) -> ClassRatio {
    let ones = labels.iter().filter(|l| l.is_one()).count();
    ClassRatio {
        ones,
        zeros: labels.len() - ones,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::PropagationSettings;
    use crate::scenario::{generate_scenario, BsKind, ScenarioConfig};
    use crate::rng;
    use proptest::prelude::*;

    fn rule(points: &[(f64, f64)]) -> RadiusRule {
        RadiusRule {
            radius: 0.08,
            micro_positions_normalized: points.iter().map(|&(x, y)| Point::new(x, y)).collect(),
        }
    }

    #[test]
    fn radius_examples() {
        assert_eq!(label_by_radius(&Point::ORIGIN, &rule(&[(0.05, 0.05)])), Label::One);
        assert_eq!(label_by_radius(&Point::ORIGIN, &rule(&[(0.08, 0.0)])), Label::One);
        assert_eq!(label_by_radius(&Point::new(0.5, 0.5), &rule(&[(0.8, 0.5)])), Label::Zero);
        assert_eq!(label_by_radius(&Point::ORIGIN, &rule(&[])), Label::Zero);
    }

    #[test]
    fn gain_examples() {
        let micro = BaseStation {
            id: 1,
            kind: BsKind::Micro,
            position: Point::new(0.0, 0.0),
            carrier_freq_hz: 2e9,
            tx_power_dbm: 30.0,
            sector_count: None,
        };
        let cfg = PropagationConfig {
            ref_loss_db: 60.0,
            ref_distance_m: 1.0,
            path_loss_exponent: 2.0,
            shadow_sigma_db: 0.0,
            noise_floor_dbm: -94.0,
        };
        let ue = UserEquipment {
            id: 0,
            position: Point::ORIGIN,
            timestamp: None,
        };
        let mut r = rng::stream(0, &[]);
        assert_eq!(label_by_gain(&ue, std::slice::from_ref(&micro), -100.0, &cfg, &mut r), Label::One);
        assert_eq!(label_by_gain(&ue, &[micro], 1e9, &cfg, &mut r), Label::Zero);
        assert_eq!(label_by_gain(&ue, &[], -1e9, &cfg, &mut r), Label::Zero);
    }

    #[test]
    fn gain_labels_monotone_in_alpha() {
        let s = generate_scenario(&ScenarioConfig::uniform(10, 10, 1000, 0.9e9, 2.0e9), 3).unwrap();
        let field = LinkField::new(PropagationSettings::default(), 3).unwrap();
        let gains: Vec<Option<f64>> = s.ues.iter().map(|u| best_micro_gain(&field, u, &s.base_stations)).collect();
        let mut prev = usize::MAX;
        for alpha in (0..=60).map(|i| -140.0 + i as f64) {
            let ones = s
                .ues
                .iter()
                .filter(|u| label_by_gain_field(&field, u, &s.base_stations, alpha).is_one())
                .count();
            let direct = gains.iter().filter(|g| g.is_some_and(|g| g >= alpha)).count();
            assert_eq!(ones, direct);
            assert!(ones <= prev);
            prev = ones;
        }
        assert!(prev < 1000);
    }

    #[test]
    fn ratio_examples() {
        let mut labels = vec![Label::One; 53];
        labels.extend(vec![Label::Zero; 100]);
        assert_eq!(class_ratio(&labels).value(), Some(0.53));
        assert_eq!(class_ratio(&[Label::Zero; 10]).value(), Some(0.0));
        let r = class_ratio(&[Label::One; 10]);
        assert!(r.is_infinite());
        assert_eq!(r.value(), None);
    }

    #[test]
    fn label_serde_is_numeric() {
        assert_eq!(serde_json::to_string(&Label::One).unwrap(), "1");
        assert_eq!(serde_json::from_str::<Label>("0").unwrap(), Label::Zero);
        assert!(serde_json::from_str::<Label>("2").is_err());
    }

    proptest! {
        #[test]
        fn radius_rule_ignores_order(
            q in (-1.0f64..1.0, -1.0f64..1.0),
            pts in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 0..12),
            r in 0.01f64..0.5,
        ) {
            let p = Point::new(q.0, q.1);
            let mut rule = rule(&pts);
            rule.radius = r;
            let before = label_by_radius(&p, &rule);
            rule.micro_positions_normalized.reverse();
            prop_assert_eq!(before, label_by_radius(&p, &rule));
        }

        #[test]
        fn huge_radius_labels_everything(
            q in (-1.0f64..=1.0, -1.0f64..=1.0),
            pts in prop::collection::vec((-1.0f64..=1.0, -1.0f64..=1.0), 1..6),
        ) {
            let mut rule = rule(&pts);
            rule.radius = 2.0 * 2f64.sqrt();
            prop_assert_eq!(label_by_radius(&Point::new(q.0, q.1), &rule), Label::One);
        }

        #[test]
        fn complement_inverts_ratio(ones in 1usize..200, zeros in 1usize..200) {
            let mut labels = vec![Label::One; ones];
            labels.extend(vec![Label::Zero; zeros]);
            let flipped: Vec<Label> = labels.iter().map(|l| l.flip()).collect();
            let a = class_ratio(&labels).value().unwrap();
            let b = class_ratio(&flipped).value().unwrap();
            prop_assert!((a - 1.0 / b).abs() <= 1e-12 * a.max(1.0));
        }
    }
}
