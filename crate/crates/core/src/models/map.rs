//! Maximum a-posteriori baseline for a scalar feature whose class-conditional
//! likelihoods are Gaussians with a shared variance.
//!
//! Choosing class one when `P(C=1|x) ≥ P(C=0|x)` with densities
//! `exp(−(x−μ_c)²/2σ²)` gives, for `μ₁ > μ₀`, the rule `x ≥ x*` with
//!
//! ```text
//! x* = σ²·ln((1−p)/p) / (μ₁ − μ₀) + (μ₀ + μ₁)/2
//! ```
//!
//! and `x ≤ x*` when `μ₁ < μ₀`. Writing the exponents with a positive sign
//! flips the denominator to `μ₀ − μ₁`; that variant is kept as
//! [`GaussianMapModel::literal_threshold`] for comparison only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeling::Label;
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianMapModel<F> {
    pub mu0: F,
    pub mu1: F,
    pub sigma: F,
    /// Prior probability of class one.
    pub prior: F,
}

impl<F: Real> GaussianMapModel<F> {
    pub fn new(mu0: F, mu1: F, sigma: F, prior: F) -> Result<Self> {
        let m = GaussianMapModel { mu0, mu1, sigma, prior };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > F::zero()) || !self.sigma.is_finite() {
            return Err(Error::data("MAP model needs a positive finite sigma"));
        }
        if !(self.prior > F::zero() && self.prior < F::one()) {
            return Err(Error::data("MAP prior must lie strictly between 0 and 1"));
        }
        if !self.mu0.is_finite() || !self.mu1.is_finite() {
            return Err(Error::data("MAP means must be finite"));
        }
        Ok(())
    }

    /// Log prior odds `ln(p/(1−p))`.
    fn log_prior_odds(&self) -> F {
        (self.prior / (F::one() - self.prior)).ln()
    }

    /// Posterior log-odds `ln P(C=1|x) − ln P(C=0|x)`.
    pub fn log_odds(&self, x: F) -> F {
        let two = F::of(2.0);
        let d0 = x - self.mu0;
        let d1 = x - self.mu1;
        self.log_prior_odds() + (d0 * d0 - d1 * d1) / (two * self.sigma * self.sigma)
    }

    /// Point where both posteriors are equal.
    pub fn threshold(&self) -> Result<F> {
        if self.mu0 == self.mu1 {
            return Err(Error::data("MAP threshold undefined for equal class means"));
        }
        let s2 = self.sigma * self.sigma;
        let ln_odds = ((F::one() - self.prior) / self.prior).ln();
        Ok(s2 * ln_odds / (self.mu1 - self.mu0) + (self.mu0 + self.mu1) / F::of(2.0))
    }

    /// Threshold obtained from positive-exponent "densities".
    pub fn literal_threshold(&self) -> Result<F> {
        if self.mu0 == self.mu1 {
            return Err(Error::data("MAP threshold undefined for equal class means"));
        }
        let s2 = self.sigma * self.sigma;
        let ln_odds = ((F::one() - self.prior) / self.prior).ln();
        Ok(s2 * ln_odds / (self.mu0 - self.mu1) + (self.mu0 + self.mu1) / F::of(2.0))
    }

    /// Class chosen by the closed-form threshold.
    pub fn decide(&self, x: F) -> Result<Label> {
        let t = self.threshold()?;
        Ok(Label::from_bool(if self.mu1 > self.mu0 { x >= t } else { x <= t }))
    }

    /// `P(C=1|x)`.
    pub fn posterior(&self, x: F) -> F {
        let z = self.log_odds(x);
        if z >= F::zero() {
            F::one() / (F::one() + (-z).exp())
        } else {
            let e = z.exp();
            e / (F::one() + e)
        }
    }
}

/// Class means, pooled within-class standard deviation and the fraction of
/// ones.
pub fn fit_map<F: Real>(xs: &[F], ys: &[Label]) -> Result<GaussianMapModel<F>> {
    if xs.len() != ys.len() {
        return Err(Error::data("feature and label counts differ"));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::data("MAP feature contains non-finite values"));
    }
    let mut sum = [F::zero(); 2];
    let mut count = [0usize; 2];
    for (&x, &y) in xs.iter().zip(ys) {
        sum[y.as_u8() as usize] += x;
        count[y.as_u8() as usize] += 1;
    }
    if count.iter().any(|&c| c < 2) {
        return Err(Error::SingleClass(format!(
            "MAP fit needs two samples per class, got {} zeros and {} ones",
            count[0], count[1]
        )));
    }
    let mu = [sum[0] / F::of_usize(count[0]), sum[1] / F::of_usize(count[1])];
    let ss: F = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let d = x - mu[y.as_u8() as usize];
            d * d
        })
        .sum();
    let var = ss / F::of_usize(xs.len() - 2);
    if !(var > F::zero()) {
        return Err(Error::data("MAP fit has zero pooled variance"));
    }
    GaussianMapModel::new(mu[0], mu[1], var.sqrt(), F::of_usize(count[1]) / F::of_usize(xs.len()))
}

pub fn map_decision_threshold<F: Real>(model: &GaussianMapModel<F>) -> Result<F> {
    model.threshold()
}

pub fn map_score<F: Real>(model: &GaussianMapModel<F>, x: F) -> F {
    model.posterior(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand_distr::{Distribution, Normal};

    fn labels(v: &[u8]) -> Vec<Label> {
        v.iter().map(|&b| Label::try_from(b).unwrap()).collect()
    }

    #[test]
    fn fit_examples() {
        // Two-point classes at {0,0} and {2,2} have zero spread.
        assert!(fit_map(&[0.0, 0.0, 2.0, 2.0], &labels(&[0, 0, 1, 1])).is_err());

        let m = fit_map(&[-1.0, 1.0, 1.0, 3.0], &labels(&[0, 0, 1, 1])).unwrap();
        assert_eq!((m.mu0, m.mu1, m.prior), (0.0, 2.0, 0.5));
        assert!((m.sigma - 2f64.sqrt()).abs() < 1e-15);

        assert!(matches!(fit_map(&[1.0, 2.0, 3.0], &labels(&[1, 1, 1])), Err(Error::SingleClass(_))));
    }

    #[test]
    fn fit_converges() {
        let mut r = rng::stream(21, &[]);
        let (mu0, mu1, sigma, p) = (-1.0, 2.5, 1.5, 0.3);
        let n = 20_000;
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for i in 0..n {
            let y = (i as f64) < p * n as f64;
            let mu = if y { mu1 } else { mu0 };
            xs.push(Normal::new(mu, sigma).unwrap().sample(&mut r));
            ys.push(Label::from_bool(y));
        }
        let m = fit_map(&xs, &ys).unwrap();
        let tol = |k: f64| 3.0 * sigma / (k * n as f64).sqrt();
        assert!((m.mu0 - mu0).abs() < tol(1.0 - p));
        assert!((m.mu1 - mu1).abs() < tol(p));
        assert!((m.sigma - sigma).abs() < tol(0.5));
        assert_eq!(m.prior, p);
    }

    #[test]
    fn threshold_examples() {
        let m = GaussianMapModel::new(0.0, 2.0, 1.0, 0.5).unwrap();
        assert_eq!(m.threshold().unwrap(), 1.0);

        // ln((1−p)/p) = −1.
        let p = 1.0 / (1.0 + (-1f64).exp());
        let m = GaussianMapModel::new(0.0, 2.0, 1.0, p).unwrap();
        let t = m.threshold().unwrap();
        assert!((t - 0.5).abs() < 1e-12);
        // Grid search for the posterior crossing.
        let crossing = (0..=200_000)
            .map(|i| -2.0 + i as f64 * 2e-5)
            .min_by(|a, b| (m.posterior(*a) - 0.5).abs().total_cmp(&(m.posterior(*b) - 0.5).abs()))
            .unwrap();
        assert!((crossing - 0.5).abs() < 1e-4);

        let strong = GaussianMapModel::new(0.0, 2.0, 1.0, 1.0 - 1e-12).unwrap();
        assert!(strong.threshold().unwrap() < -12.0);
        let stronger = GaussianMapModel::new(0.0, 2.0, 1.0, 1.0 - 1e-15).unwrap();
        assert!(stronger.threshold().unwrap() < strong.threshold().unwrap());

        assert!(GaussianMapModel::new(1.0, 1.0, 1.0, 0.5).unwrap().threshold().is_err());
    }

    #[test]
    fn literal_threshold_mirrors_prior_term() {
        let p = 0.2;
        let m = GaussianMapModel::new(0.0f64, 2.0, 1.0, p).unwrap();
        let mid = 1.0;
        let t = m.threshold().unwrap();
        let lit = m.literal_threshold().unwrap();
        assert!(((t - mid) + (lit - mid)).abs() < 1e-12);
    }

    #[test]
    fn score_examples() {
        let m = GaussianMapModel::new(0.0f64, 4.0, 1.0, 0.5).unwrap();
        assert!((m.posterior(m.threshold().unwrap()) - 0.5).abs() < 1e-15);
        let expected = 1.0 / (1.0 + (-8f64).exp());
        assert!((map_score(&m, 4.0) - expected).abs() < 1e-15);
        let f32_model = GaussianMapModel::new(0.0f32, 4.0, 1.0, 0.5).unwrap();
        assert!((f32_model.posterior(4.0) - expected as f32).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn posteriors_sum_to_one(mu0 in -5.0f64..5.0, mu1 in -5.0f64..5.0, s in 0.1f64..4.0, p in 0.01f64..0.99, x in -20.0f64..20.0) {
            let m = GaussianMapModel::new(mu0, mu1, s, p).unwrap();
            let q1 = m.posterior(x);
            let flipped = GaussianMapModel::new(mu1, mu0, s, 1.0 - p).unwrap();
            prop_assert!((q1 + flipped.posterior(x) - 1.0).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&q1));
        }

        #[test]
        fn posterior_monotone(mu0 in -5.0f64..0.0, gap in 0.1f64..5.0, s in 0.1f64..4.0, p in 0.01f64..0.99, x in -20.0f64..20.0, dx in 0.0f64..5.0) {
            let m = GaussianMapModel::new(mu0, mu0 + gap, s, p).unwrap();
            prop_assert!(m.posterior(x + dx) >= m.posterior(x));
        }

        #[test]
        fn threshold_matches_posterior_argmax(mu0 in -10.0f64..10.0, gap in 1e-3f64..10.0, up in any::<bool>(), s in 0.1f64..5.0, p in 0.01f64..0.99, x in -25.0f64..25.0) {
            let mu1 = if up { mu0 + gap } else { mu0 - gap };
            let m = GaussianMapModel::new(mu0, mu1, s, p).unwrap();
            prop_assume!((x - m.threshold().unwrap()).abs() > 1e-9);
            let d1 = p.ln() - (x - mu1).powi(2) / (2.0 * s * s);
            let d0 = (1.0 - p).ln() - (x - mu0).powi(2) / (2.0 * s * s);
            prop_assert_eq!(m.decide(x).unwrap(), Label::from_bool(d1 >= d0));
        }
    }
}
