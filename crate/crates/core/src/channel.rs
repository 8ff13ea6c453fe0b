//! Link budgets and uplink channel synthesis.
//!
//! Path loss follows a log-distance law with log-normal shadowing. Shadowing
//! for the link between UE `u` and station `b` is
//! `σ·(√ρ·z_u + √(1−ρ)·z_ub)`, where `z_u` is shared by all links of the UE.
//! The common term correlates the primary-carrier link seen at the serving
//! macro with the secondary-carrier links to the micro layer.

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::rng::{self, purpose};
use crate::scenario::{BaseStation, BsKind, UserEquipment};

/// Free-space loss at 1 m for a 1 GHz carrier.
pub const FSPL_1M_1GHZ_DB: f64 = 32.4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagationConfig {
    pub ref_loss_db: f64,
    pub ref_distance_m: f64,
    pub path_loss_exponent: f64,
    pub shadow_sigma_db: f64,
    pub noise_floor_dbm: f64,
}

impl PropagationConfig {
    /// Log-distance model anchored at free-space loss 1 m from a carrier at
    /// `carrier_freq_hz`.
    pub fn log_distance(carrier_freq_hz: f64, path_loss_exponent: f64, shadow_sigma_db: f64) -> Self {
        PropagationConfig {
            ref_loss_db: FSPL_1M_1GHZ_DB + 20.0 * (carrier_freq_hz / 1e9).log10(),
            ref_distance_m: 1.0,
            path_loss_exponent,
            shadow_sigma_db,
            noise_floor_dbm: -94.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ref_distance_m > 0.0) {
            return Err(Error::config("ref_distance_m must be positive"));
        }
        if !(self.path_loss_exponent >= 1.0) {
            return Err(Error::config("path_loss_exponent must be at least 1"));
        }
        if !(self.shadow_sigma_db >= 0.0) {
            return Err(Error::config("shadow_sigma_db must be non-negative"));
        }
        if !self.ref_loss_db.is_finite() || !self.noise_floor_dbm.is_finite() {
            return Err(Error::config("ref_loss_db and noise_floor_dbm must be finite"));
        }
        Ok(())
    }

    /// Loss without shadowing; distances below the reference are clamped.
    pub fn median_loss_db(&self, distance_m: f64) -> f64 {
        let d = distance_m.max(self.ref_distance_m);
        self.ref_loss_db + 10.0 * self.path_loss_exponent * (d / self.ref_distance_m).log10()
    }

    /// Loss with a shadowing term of `shadow_z` standard deviations.
    pub fn loss_with_shadow_db(&self, distance_m: f64, shadow_z: f64) -> f64 {
        self.median_loss_db(distance_m) + self.shadow_sigma_db * shadow_z
    }
}

/// Path loss in dB with a fresh shadowing draw from `rng`.
pub fn path_loss_db<R: Rng + ?Sized>(distance_m: f64, config: &PropagationConfig, rng: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    config.loss_with_shadow_db(distance_m, z)
}

/// Received power relative to transmitted power, in dB. Identical for uplink
/// and downlink on the same carrier.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct LinkGain {
    pub gain_db: f64,
}

impl LinkGain {
    pub fn linear(&self) -> f64 {
        10f64.powf(self.gain_db / 10.0)
    }
}

pub fn link_gain<R: Rng + ?Sized>(
    ue: &UserEquipment,
    bs: &BaseStation,
    config: &PropagationConfig,
    rng: &mut R,
) -> LinkGain {
    LinkGain {
        gain_db: -path_loss_db(ue.position.distance(&bs.position), config, rng),
    }
}

/// Station with the largest gain; ties go to the lowest id.
pub fn best_station<'a, I, G>(stations: I, mut gain: G) -> Option<(&'a BaseStation, LinkGain)>
where
    I: IntoIterator<Item = &'a BaseStation>,
    G: FnMut(&BaseStation) -> LinkGain,
{
    let mut best: Option<(&BaseStation, LinkGain)> = None;
    for bs in stations {
        let g = gain(bs);
        best = match best {
            Some((b, bg)) if bg.gain_db > g.gain_db || (bg.gain_db == g.gain_db && b.id < bs.id) => Some((b, bg)),
            _ => Some((bs, g)),
        };
    }
    best
}

/// Macro station serving `ue`: maximum link gain, ties broken by lowest id.
/// One shadowing draw per station is taken from `rng` in slice order.
pub fn serving_cell<R: Rng + ?Sized>(
    ue: &UserEquipment,
    macro_stations: &[BaseStation],
    config: &PropagationConfig,
    rng: &mut R,
) -> Result<u32> {
    best_station(macro_stations.iter().filter(|b| b.is_macro()), |bs| link_gain(ue, bs, config, rng))
        .map(|(bs, _)| bs.id)
        .ok_or_else(|| Error::data("no macro station to serve the UE"))
}

/// Exponent and shadowing of one station layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerModel {
    pub path_loss_exponent: f64,
    pub shadow_sigma_db: f64,
}

fn default_ref_loss() -> f64 {
    FSPL_1M_1GHZ_DB
}

fn default_noise_floor() -> f64 {
    -94.0
}

fn default_correlation() -> f64 {
    0.5
}

/// Deployment-wide propagation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagationSettings {
    pub macro_layer: LayerModel,
    pub micro_layer: LayerModel,
    #[serde(default = "default_ref_loss")]
    pub ref_loss_1m_1ghz_db: f64,
    #[serde(default = "default_noise_floor")]
    pub noise_floor_dbm: f64,
    /// Correlation between the shadowing of any two links of one UE.
    #[serde(default = "default_correlation")]
    pub shadow_correlation: f64,
}

impl Default for PropagationSettings {
    fn default() -> Self {
        PropagationSettings {
            macro_layer: LayerModel {
                path_loss_exponent: 3.0,
                shadow_sigma_db: 6.0,
            },
            micro_layer: LayerModel {
                path_loss_exponent: 2.5,
                shadow_sigma_db: 6.0,
            },
            ref_loss_1m_1ghz_db: FSPL_1M_1GHZ_DB,
            noise_floor_dbm: default_noise_floor(),
            shadow_correlation: default_correlation(),
        }
    }
}

impl PropagationSettings {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.shadow_correlation) {
            return Err(Error::config("shadow_correlation must lie in [0, 1]"));
        }
        self.config_for(BsKind::Macro, 1e9).validate()?;
        self.config_for(BsKind::Micro, 1e9).validate()
    }

    pub fn config_for(&self, kind: BsKind, carrier_freq_hz: f64) -> PropagationConfig {
        let layer = match kind {
            BsKind::Macro => self.macro_layer,
            BsKind::Micro => self.micro_layer,
        };
        PropagationConfig {
            ref_loss_db: self.ref_loss_1m_1ghz_db + 20.0 * (carrier_freq_hz / 1e9).log10(),
            ref_distance_m: 1.0,
            path_loss_exponent: layer.path_loss_exponent,
            shadow_sigma_db: layer.shadow_sigma_db,
            noise_floor_dbm: self.noise_floor_dbm,
        }
    }
}

/// Deterministic shadowed link gains for a whole deployment. The gain of a
/// `(ue, station)` pair depends only on the seed and the two ids, so it can
/// be evaluated in any order and from any thread.
#[derive(Debug, Clone, Copy)]
pub struct LinkField {
    settings: PropagationSettings,
    seed: u64,
}

const UE_COMMON_KEY: u64 = u64::MAX;

impl LinkField {
    pub fn new(settings: PropagationSettings, seed: u64) -> Result<Self> {
        settings.validate()?;
        Ok(LinkField { settings, seed })
    }

    pub fn settings(&self) -> &PropagationSettings {
        &self.settings
    }

    fn normal(&self, ue: u32, key: u64) -> f64 {
        let mut s = rng::stream(self.seed, &[purpose::SHADOWING, ue as u64, key]);
        StandardNormal.sample(&mut s)
    }

    /// Shadowing of the link in standard deviations.
    pub fn shadow_z(&self, ue: &UserEquipment, bs: &BaseStation) -> f64 {
        let rho = self.settings.shadow_correlation;
        let common = if rho > 0.0 { self.normal(ue.id, UE_COMMON_KEY) } else { 0.0 };
        let own = if rho < 1.0 { self.normal(ue.id, bs.id as u64) } else { 0.0 };
        rho.sqrt() * common + (1.0 - rho).sqrt() * own
    }

    pub fn gain(&self, ue: &UserEquipment, bs: &BaseStation) -> LinkGain {
        let cfg = self.settings.config_for(bs.kind, bs.carrier_freq_hz);
        let d = ue.position.distance(&bs.position);
        LinkGain {
            gain_db: -cfg.loss_with_shadow_db(d, self.shadow_z(ue, bs)),
        }
    }

    /// Serving macro and its gain.
    pub fn serving_cell<'a>(
        &self,
        ue: &UserEquipment,
        stations: &'a [BaseStation],
    ) -> Option<(&'a BaseStation, LinkGain)> {
        best_station(stations.iter().filter(|b| b.is_macro()), |bs| self.gain(ue, bs))
    }
}

/// OFDM numerology of the uplink sounding signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfdmGrid {
    pub n_subcarriers: usize,
    pub guard_fraction: f64,
    /// Overrides the count derived from `guard_fraction`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usable_subcarriers: Option<usize>,
    pub bandwidth_hz: f64,
    pub carrier_freq_hz: f64,
    pub n_antennas: usize,
}

impl OfdmGrid {
    /// 8x8 sounder array with 56 working elements, 20 MHz over 1024
    /// subcarriers at 1.27 GHz and 924 usable subcarriers.
    pub fn sounder() -> Self {
        OfdmGrid {
            n_subcarriers: 1024,
            guard_fraction: 0.1,
            usable_subcarriers: Some(924),
            bandwidth_hz: 20e6,
            carrier_freq_hz: 1.27e9,
            n_antennas: 56,
        }
    }

    /// Reduced grid used for large simulated deployments.
    pub fn compact(carrier_freq_hz: f64) -> Self {
        OfdmGrid {
            n_subcarriers: 64,
            guard_fraction: 0.1,
            usable_subcarriers: None,
            bandwidth_hz: 20e6,
            carrier_freq_hz,
            n_antennas: 8,
        }
    }

    pub fn usable(&self) -> usize {
        self.usable_subcarriers.unwrap_or_else(|| {
            self.n_subcarriers - (self.guard_fraction * self.n_subcarriers as f64).round() as usize
        })
    }

    pub fn subcarrier_spacing_hz(&self) -> f64 {
        self.bandwidth_hz / self.n_subcarriers as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_subcarriers == 0 || self.n_antennas == 0 {
            return Err(Error::config("OFDM grid needs subcarriers and antennas"));
        }
        if !(0.0..1.0).contains(&self.guard_fraction) {
            return Err(Error::config("guard_fraction must lie in [0, 1)"));
        }
        let usable = self.usable();
        if usable == 0 || usable > self.n_subcarriers {
            return Err(Error::config(format!(
                "usable subcarrier count {usable} must lie in 1..={}",
                self.n_subcarriers
            )));
        }
        if !(self.bandwidth_hz > 0.0) {
            return Err(Error::config("bandwidth must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fading {
    /// Complex Gaussian taps.
    Rayleigh,
    /// Deterministic tap magnitudes with uniformly random phases.
    PhaseOnly,
}

fn default_taps() -> usize {
    8
}

fn default_delay_spread() -> f64 {
    100e-9
}

fn default_ue_power() -> f64 {
    23.0
}

fn default_fading() -> Fading {
    Fading::Rayleigh
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CfrParams {
    #[serde(default = "default_taps")]
    pub taps: usize,
    #[serde(default = "default_delay_spread")]
    pub delay_spread_s: f64,
    #[serde(default = "default_ue_power")]
    pub ue_tx_power_dbm: f64,
    #[serde(default = "default_fading")]
    pub fading: Fading,
}

impl Default for CfrParams {
    fn default() -> Self {
        CfrParams {
            taps: default_taps(),
            delay_spread_s: default_delay_spread(),
            ue_tx_power_dbm: default_ue_power(),
            fading: default_fading(),
        }
    }
}

/// Per-antenna uplink frequency response over the usable subcarriers,
/// stored antenna-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelFrequencyResponse<F> {
    n_antennas: usize,
    n_subcarriers: usize,
    samples: Vec<Complex<F>>,
    pub snr_db_per_antenna: Vec<F>,
}

impl<F: Real> ChannelFrequencyResponse<F> {
    pub fn new(
        n_antennas: usize,
        n_subcarriers: usize,
        samples: Vec<Complex<F>>,
        snr_db_per_antenna: Vec<F>,
    ) -> Result<Self> {
        if n_antennas == 0 || n_subcarriers == 0 {
            return Err(Error::data("channel response needs antennas and subcarriers"));
        }
        if samples.len() != n_antennas * n_subcarriers || snr_db_per_antenna.len() != n_antennas {
            return Err(Error::data(format!(
                "channel response dimensions do not match {n_antennas} x {n_subcarriers}"
            )));
        }
        if samples.iter().any(|c| !c.re.is_finite() || !c.im.is_finite())
            || snr_db_per_antenna.iter().any(|s| !s.is_finite())
        {
            return Err(Error::data("channel response contains non-finite values"));
        }
        Ok(ChannelFrequencyResponse {
            n_antennas,
            n_subcarriers,
            samples,
            snr_db_per_antenna,
        })
    }

    /// Every sample equal to `value`; SNR zero.
    pub fn constant(n_antennas: usize, n_subcarriers: usize, value: Complex<F>) -> Result<Self> {
        Self::new(
            n_antennas,
            n_subcarriers,
            vec![value; n_antennas * n_subcarriers],
            vec![F::zero(); n_antennas],
        )
    }

    pub fn n_antennas(&self) -> usize {
        self.n_antennas
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_subcarriers
    }

    pub fn samples(&self) -> &[Complex<F>] {
        &self.samples
    }

    pub fn antenna(&self, a: usize) -> &[Complex<F>] {
        &self.samples[a * self.n_subcarriers..(a + 1) * self.n_subcarriers]
    }

    pub fn get(&self, antenna: usize, subcarrier: usize) -> Complex<F> {
        self.samples[antenna * self.n_subcarriers + subcarrier]
    }

    pub fn map_samples(&self, f: impl Fn(usize, usize, Complex<F>) -> Complex<F>) -> Self {
        let n = self.n_subcarriers;
        let samples = self
            .samples
            .iter()
            .enumerate()
            .map(|(i, &c)| f(i / n, i % n, c))
            .collect();
        ChannelFrequencyResponse {
            samples,
            ..self.clone()
        }
    }
}

/// Draws a tapped-delay-line channel with exponential power-delay profile
/// whose total mean power equals the link gain, and evaluates it on the
/// usable subcarriers of every antenna.
pub fn synthesize_cfr<F: Real, R: Rng + ?Sized>(
    gain: LinkGain,
    grid: &OfdmGrid,
    params: &CfrParams,
    noise_floor_dbm: f64,
    rng: &mut R,
) -> Result<ChannelFrequencyResponse<F>> {
    if !gain.gain_db.is_finite() {
        return Err(Error::data("link gain must be finite"));
    }
    if params.taps == 0 {
        return Err(Error::config("at least one tap is required"));
    }
    if !(params.delay_spread_s > 0.0) {
        return Err(Error::config("delay spread must be positive"));
    }
    grid.validate()?;

    let sample_period = 1.0 / grid.bandwidth_hz;
    let profile: Vec<f64> = (0..params.taps)
        .map(|l| (-(l as f64) * sample_period / params.delay_spread_s).exp())
        .collect();
    let norm = gain.linear() / profile.iter().sum::<f64>();
    let tap_power: Vec<f64> = profile.iter().map(|p| p * norm).collect();

    let usable = grid.usable();
    let spacing = grid.subcarrier_spacing_hz();
    let centre = usable as f64 / 2.0;
    // Twiddles e^{-j2π f_k τ_l}, subcarrier-major.
    let mut twiddle = Vec::with_capacity(usable * params.taps);
    for k in 0..usable {
        let f = (k as f64 - centre) * spacing;
        for l in 0..params.taps {
            let phase = -2.0 * std::f64::consts::PI * f * l as f64 * sample_period;
            twiddle.push(Complex::new(phase.cos(), phase.sin()));
        }
    }

    let mut samples = Vec::with_capacity(grid.n_antennas * usable);
    let mut snr = Vec::with_capacity(grid.n_antennas);
    let mut taps = vec![Complex::new(0.0, 0.0); params.taps];
    for _ in 0..grid.n_antennas {
        for (tap, &p) in taps.iter_mut().zip(&tap_power) {
            *tap = match params.fading {
                Fading::Rayleigh => {
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    Complex::new(re, im) * (p / 2.0).sqrt()
                }
                Fading::PhaseOnly => {
                    let phi = rng.random_range(0.0..std::f64::consts::TAU);
                    Complex::from_polar(p.sqrt(), phi)
                }
            };
        }
        let mut power = 0.0;
        for k in 0..usable {
            let row = &twiddle[k * params.taps..(k + 1) * params.taps];
            let h: Complex<f64> = taps.iter().zip(row).map(|(t, w)| t * w).sum();
            power += h.norm_sqr();
            samples.push(Complex::new(F::of(h.re), F::of(h.im)));
        }
        let rx_dbm = params.ue_tx_power_dbm + 10.0 * (power / usable as f64).log10();
        snr.push(F::of(rx_dbm - noise_floor_dbm));
    }
    ChannelFrequencyResponse::new(grid.n_antennas, usable, samples, snr)
}
