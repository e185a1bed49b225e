//! Privacy accounting under zero-concentrated DP.
//!
//! Each noisy step with noise multiplier `sigma` (relative to the clipping
//! norm) is `1 / (2 sigma^2)`-zCDP; costs add over steps, and `rho`-zCDP
//! converts to `(rho + 2 sqrt(rho ln(1/delta)), delta)`-DP.

use crate::error::{NnError, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrivacySpend {
    pub steps: u64,
    pub noise_multiplier: f64,
}

impl PrivacySpend {
    pub fn new(noise_multiplier: f64) -> Self {
        PrivacySpend { steps: 0, noise_multiplier }
    }

    pub fn record_step(&mut self) {
        self.steps += 1;
    }

    /// Accumulated zCDP parameter; infinite without noise.
    pub fn rho(&self) -> f64 {
        zcdp_rho(self.steps, self.noise_multiplier)
    }

    pub fn epsilon(&self, delta: f64) -> Result<f64> {
        account_epsilon(self.steps, self.noise_multiplier, delta)
    }
}

pub fn zcdp_rho(steps: u64, noise_multiplier: f64) -> f64 {
    if steps == 0 {
        return 0.0;
    }
    if noise_multiplier <= 0.0 {
        return f64::INFINITY;
    }
    steps as f64 / (2.0 * noise_multiplier * noise_multiplier)
}

/// Epsilon after `steps` noisy updates at failure probability `delta`.
pub fn account_epsilon(steps: u64, noise_multiplier: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(NnError::Config(format!("delta {delta} outside (0, 1)")));
    }
    if noise_multiplier.is_nan() || noise_multiplier < 0.0 {
        return Err(NnError::Config(format!("noise multiplier {noise_multiplier} is negative")));
    }
    let rho = zcdp_rho(steps, noise_multiplier);
    if rho.is_infinite() {
        return Ok(f64::INFINITY);
    }
    Ok(rho + 2.0 * (rho * (1.0 / delta).ln()).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_noise_is_infinite() {
        assert_eq!(account_epsilon(10, 0.0, 1e-5).unwrap(), f64::INFINITY);
        assert_eq!(account_epsilon(0, 0.0, 1e-5).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_delta() {
        assert!(account_epsilon(1, 1.0, 0.0).is_err());
        assert!(account_epsilon(1, 1.0, 1.0).is_err());
    }
}
