//! Communication and sensing figures of merit.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{expected_range_profile, OfdmConfig, PowerAllocation, RangeProfile};

/// Per-carrier complex channel gains.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    h: Vec<Complex64>,
    gain_over_noise: Vec<f64>,
}

impl ChannelRealization {
    pub fn new(h: Vec<Complex64>, cfg: &OfdmConfig) -> Result<Self> {
        if h.len() != cfg.k {
            return Err(Error::DimensionMismatch {
                expected: cfg.k,
                found: h.len(),
            });
        }
        if let Some(k) = h.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(format!("channel gain {k} is not finite")));
        }
        let scale = 1.0 / (cfg.n0 * cfg.delta_f);
        let gain_over_noise = h.iter().map(|c| c.norm_sqr() * scale).collect();
        Ok(Self { h, gain_over_noise })
    }

    /// Channel specified directly by `g_k = |h_k|^2 / (n0 df)`, with real
    /// non-negative `h` chosen to match.
    pub fn from_gain_over_noise(g: Vec<f64>, cfg: &OfdmConfig) -> Result<Self> {
        if g.len() != cfg.k {
            return Err(Error::DimensionMismatch {
                expected: cfg.k,
                found: g.len(),
            });
        }
        if let Some(k) = g.iter().position(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument(format!("gain {k} must be finite and >= 0")));
        }
        let scale = cfg.n0 * cfg.delta_f;
        let h = g.iter().map(|v| Complex64::new((v * scale).sqrt(), 0.0)).collect();
        Ok(Self {
            h,
            gain_over_noise: g,
        })
    }

    pub fn h(&self) -> &[Complex64] {
        &self.h
    }

    pub fn gain_over_noise(&self) -> &[f64] {
        &self.gain_over_noise
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }
}

/// Shannon capacity in bits per channel use summed across the carriers.
pub fn capacity(alloc: &PowerAllocation, chan: &ChannelRealization, cfg: &OfdmConfig) -> Result<f64> {
    alloc.check_len(cfg.k)?;
    if chan.len() != cfg.k {
        return Err(Error::DimensionMismatch {
            expected: cfg.k,
            found: chan.len(),
        });
    }
    Ok(capacity_raw(alloc.as_slice(), chan.gain_over_noise()))
}

pub(crate) fn capacity_raw(p: &[f64], g: &[f64]) -> f64 {
    p.iter().zip(g).map(|(p, g)| (p * g).ln_1p()).sum::<f64>() / std::f64::consts::LN_2
}

/// Peak side-lobe level in dB relative to the main-lobe peak (20 log10 of
/// the amplitude ratio). Returns `-inf` when every side-lobe bin is zero.
pub fn psl_db(profile: &RangeProfile) -> Result<f64> {
    if profile.sidelobe_bins.is_empty() {
        return Err(Error::EmptySidelobes);
    }
    let worst = profile
        .sidelobe_bins
        .iter()
        .map(|&i| profile.magnitude[i])
        .fold(0.0, f64::max);
    Ok(amplitude_db(worst / profile.peak()))
}

pub(crate) fn amplitude_db(ratio: f64) -> f64 {
    if ratio > 0.0 {
        20.0 * ratio.log10()
    } else {
        f64::NEG_INFINITY
    }
}

/// Edge-weighted accuracy proxy `sum_k (k - K/2)^2 P_k`; larger means a
/// lower bound on delay-estimation variance.
pub fn accuracy_proxy(alloc: &PowerAllocation) -> f64 {
    let half = alloc.len() as f64 / 2.0;
    alloc
        .as_slice()
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let d = k as f64 - half;
            d * d * p
        })
        .sum()
}

/// 3-dB main-lobe width in (fractional) delay bins.
///
/// Walks outward from the peak until the magnitude drops below
/// `peak / sqrt(2)` and linearly interpolates each crossing. The walk may
/// reach the local minimum bounding the lobe but not go past it.
pub fn mlw_3db(profile: &RangeProfile) -> Result<f64> {
    let peak = profile.peak();
    if !(peak > 0.0) {
        return Err(Error::DegenerateProfile);
    }
    let level = peak / std::f64::consts::SQRT_2;
    let (left, right) = profile.lobe_extent();
    let crossing = |dir: isize, extent: usize| -> Result<f64> {
        let mut prev = peak;
        for step in 1..=extent + 1 {
            let cur = profile.at_offset(dir * step as isize);
            if cur < level {
                return Ok((step - 1) as f64 + (prev - level) / (prev - cur));
            }
            prev = cur;
        }
        Err(Error::FlatMainLobe)
    };
    Ok(crossing(1, right)? + crossing(-1, left)?)
}

/// Fraction of the water-filling capacity given up, `(c_wf - c) / c_wf`.
pub fn capacity_loss(c: f64, c_wf: f64) -> Result<f64> {
    if !(c_wf > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "reference capacity must be positive, got {c_wf}"
        )));
    }
    let loss = (c_wf - c) / c_wf;
    Ok(if loss < 0.0 && loss.abs() < 1e-12 { 0.0 } else { loss })
}

/// Percentage increase of the main-lobe width over a reference width.
pub fn accuracy_loss_pct(mlw: f64, mlw_ref: f64) -> Result<f64> {
    if !(mlw_ref > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "reference main-lobe width must be positive, got {mlw_ref}"
        )));
    }
    Ok((mlw - mlw_ref) / mlw_ref * 100.0)
}

/// Baseline the losses in a [`SensingReport`] are measured against,
/// normally the water-filling allocation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Reference {
    pub capacity_bits: f64,
    pub mlw_bins: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensingReport {
    pub capacity_bits: f64,
    pub psl_db: f64,
    pub accuracy_proxy: f64,
    pub mlw_bins: f64,
    pub capacity_loss: f64,
    pub accuracy_loss_pct: f64,
    pub suppression_db: f64,
}

impl SensingReport {
    /// Measures `alloc`; losses are zero until a reference is attached.
    pub fn measure(cfg: &OfdmConfig, chan: &ChannelRealization, alloc: &PowerAllocation) -> Result<Self> {
        let profile = expected_range_profile(cfg, alloc)?;
        Self::from_profile(cfg, chan, alloc, &profile)
    }

    pub fn from_profile(
        cfg: &OfdmConfig,
        chan: &ChannelRealization,
        alloc: &PowerAllocation,
        profile: &RangeProfile,
    ) -> Result<Self> {
        let psl = psl_db(profile)?;
        Ok(Self {
            capacity_bits: capacity(alloc, chan, cfg)?,
            psl_db: psl,
            accuracy_proxy: accuracy_proxy(alloc),
            mlw_bins: mlw_3db(profile)?,
            capacity_loss: 0.0,
            accuracy_loss_pct: 0.0,
            suppression_db: -psl,
        })
    }

    pub fn reference(&self) -> Reference {
        Reference {
            capacity_bits: self.capacity_bits,
            mlw_bins: self.mlw_bins,
        }
    }

    pub fn against(mut self, reference: &Reference) -> Result<Self> {
        self.capacity_loss = capacity_loss(self.capacity_bits, reference.capacity_bits)?;
        self.accuracy_loss_pct = accuracy_loss_pct(self.mlw_bins, reference.mlw_bins)?;
        Ok(self)
    }

    /// Capacity in bit/s, treating each carrier use as lasting `1/df`.
    pub fn capacity_bps(&self, cfg: &OfdmConfig) -> f64 {
        self.capacity_bits * cfg.delta_f
    }
}
