//! Seeded channel realizations.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::{ChannelModel, ChannelSection, ScenarioConfig};
use crate::error::Result;
use crate::metrics::ChannelRealization;
use crate::model::OfdmConfig;

pub fn generate_channel(config: &ScenarioConfig) -> Result<ChannelRealization> {
    generate_channel_for(&config.ofdm_config()?, &config.channel)
}

/// Draws a channel for `cfg`.
///
/// `flat` is all-ones. The Rayleigh models have unit average power per
/// carrier before being scaled so that uniform allocation sees a mean
/// per-carrier SNR of `snr_db`.
pub fn generate_channel_for(cfg: &OfdmConfig, spec: &ChannelSection) -> Result<ChannelRealization> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut cn = || {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    };
    let unit: Vec<Complex64> = match spec.model {
        ChannelModel::Flat => return ChannelRealization::new(vec![Complex64::new(1.0, 0.0); cfg.k], cfg),
        ChannelModel::RayleighIid => (0..cfg.k).map(|_| cn()).collect(),
        ChannelModel::RayleighExpPdp => {
            let weights: Vec<f64> = (0..spec.pdp_taps).map(|l| (-(l as f64) / spec.pdp_decay).exp()).collect();
            let total: f64 = weights.iter().sum();
            let taps: Vec<Complex64> = weights.iter().map(|w| cn() * (w / total).sqrt()).collect();
            (0..cfg.k)
                .map(|k| {
                    taps.iter()
                        .enumerate()
                        .map(|(l, a)| a * Complex64::from_polar(1.0, -2.0 * PI * (k * l) as f64 / cfg.k as f64))
                        .sum()
                })
                .collect()
        }
    };
    // Mean of (p_total / k) * |h|^2 / (n0 df) equals the target SNR.
    let snr = 10f64.powf(spec.snr_db / 10.0);
    let scale = (snr * cfg.n0 * cfg.delta_f * cfg.k as f64 / cfg.p_total).sqrt();
    ChannelRealization::new(unit.into_iter().map(|h| h * scale).collect(), cfg)
}
