use serde::{Deserialize, Serialize};

use crate::error::{PpoError, Result};

/// Step sizes of the loop. `alpha` and `beta` are constant in `t` once the
/// horizon `iterations` is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schedules {
    pub iterations: usize,
    pub c_alpha: f64,
    pub c_beta: f64,
    pub eta: f64,
    pub lambda: f64,
}

impl Default for Schedules {
    fn default() -> Self {
        Self {
            iterations: 200,
            c_alpha: 1.0,
            c_beta: 1.0,
            eta: 1.0,
            lambda: 1.0,
        }
    }
}

impl Schedules {
    pub fn new(iterations: usize, lambda: f64) -> Self {
        Self {
            iterations,
            lambda,
            ..Self::default()
        }
    }

    pub fn with_eta(self, eta: f64) -> Self {
        Self { eta, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &'static str, value: f64| Err(PpoError::Schedule { field, value });
        if !(self.c_alpha > 0.0 && self.c_alpha.is_finite()) {
            return bad("c_alpha", self.c_alpha);
        }
        if !(self.c_beta > 0.0 && self.c_beta.is_finite()) {
            return bad("c_beta", self.c_beta);
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad("eta", self.eta);
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad("lambda", self.lambda);
        }
        Ok(())
    }

    /// Flow mixing rate `min(1, c_alpha T^{-2/3})`.
    pub fn alpha(&self, _t: usize) -> f64 {
        let t = self.iterations.max(1) as f64;
        (self.c_alpha * t.powf(-2.0 / 3.0)).min(1.0)
    }

    /// Uniform mixing rate `c_beta / T` clipped into `(0, 1/2]`.
    pub fn beta(&self, _t: usize) -> f64 {
        let t = self.iterations.max(1) as f64;
        (self.c_beta / t).min(0.5)
    }

    /// Natural log of the contraction-derived step size, which is far below
    /// `f64` range for realistic horizons.
    pub fn theoretical_log_eta(lambda: f64, horizon: usize, actions: usize) -> f64 {
        let h = horizon as f64;
        let log_b = h * (1.0 + lambda * (actions as f64).ln()) / lambda;
        // ln(B - 1) = log_b + ln(1 - e^{-log_b})
        let log_b_minus_one = log_b + (-(-log_b).exp()).ln_1p();
        let log_gamma = log_b.ln() - log_b - log_b_minus_one;
        let gamma = log_gamma.exp();
        let log_beta = (-gamma).ln_1p() + (h - 2.0).max(0.0) * log_gamma
            - (-(((h - 1.0) * log_gamma).exp())).ln_1p();
        log_beta - lambda.ln()
    }

    /// Schedules with `eta` set to the theoretical preset (may underflow to zero,
    /// in which case [`Schedules::validate`] rejects it).
    pub fn theoretical(iterations: usize, lambda: f64, horizon: usize, actions: usize) -> Self {
        Self::new(iterations, lambda)
            .with_eta(Self::theoretical_log_eta(lambda, horizon, actions).exp())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rates_are_clipped() {
        let s = Schedules::new(1, 1.0);
        assert_eq!(s.alpha(1), 1.0);
        assert_eq!(s.beta(1), 0.5);
        let s = Schedules::new(1000, 1.0);
        assert!((s.alpha(3) - 0.01).abs() < 1e-12);
        assert!((s.beta(3) - 0.001).abs() < 1e-15);
    }

    #[test]
    fn theoretical_eta_matches_direct_formula_when_representable() {
        let (lambda, h, a) = (5.0, 3usize, 2usize);
        let b = (h as f64 * (1.0 + lambda * (a as f64).ln()) / lambda).exp();
        let gamma = b.ln() / (b * (b - 1.0));
        let beta = (1.0 - gamma) * gamma.powi(h as i32 - 2) / (1.0 - gamma.powi(h as i32 - 1));
        let eta = beta / lambda;
        let log_eta = Schedules::theoretical_log_eta(lambda, h, a);
        assert!(
            (log_eta - eta.ln()).abs() < 1e-10,
            "{log_eta} vs {}",
            eta.ln()
        );
        assert!(Schedules::theoretical(10, 1.0, 50, 2).validate().is_err());
    }
}
