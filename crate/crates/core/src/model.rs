//! Delay-domain model of an OFDM power allocation.
//!
//! Averaged over unit-variance data symbols, the pulse-compression output of
//! an OFDM echo is the (oversampled) inverse DFT of the per-carrier power
//! profile:
//!
//! ```text
//! r_n = sum_k P_k exp(-j 2 pi k df tau) exp(j 2 pi n k / N),   n = 0..N-1
//! ```
//!
//! with `N = oversample * K`. Everything downstream (PSL, main-lobe width)
//! is a ratio, so the global scale of `r` is irrelevant and no prefactor is
//! applied.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};

/// Static parameters of the OFDM system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OfdmConfig {
    /// Number of sub-carriers.
    pub k: usize,
    /// Sub-carrier spacing in Hz.
    pub delta_f: f64,
    /// Noise power spectral density in W/Hz.
    pub n0: f64,
    /// Total power budget in W.
    pub p_total: f64,
    /// Delay-domain oversampling factor; the profile has `oversample * k` bins.
    pub oversample: usize,
    /// Reference echo delay in seconds.
    pub tau: f64,
}

impl OfdmConfig {
    pub const DEFAULT_OVERSAMPLE: usize = 16;

    pub fn new(k: usize, delta_f: f64, n0: f64, p_total: f64, oversample: usize) -> Result<Self> {
        let cfg = Self {
            k,
            delta_f,
            n0,
            p_total,
            oversample,
            tau: 0.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// 128 sub-carriers over 1 MHz, 1 W budget, thermal noise floor.
    pub fn reference() -> Self {
        Self {
            k: 128,
            delta_f: 1.0e6 / 128.0,
            n0: 4.0e-21,
            p_total: 1.0,
            oversample: Self::DEFAULT_OVERSAMPLE,
            tau: 0.0,
        }
    }

    pub fn with_tau(mut self, tau: f64) -> Result<Self> {
        self.tau = tau;
        self.validate()?;
        Ok(self)
    }

    pub fn with_oversample(mut self, oversample: usize) -> Result<Self> {
        self.oversample = oversample;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.k < 2 {
            return bad("k must be at least 2");
        }
        if !(self.delta_f > 0.0 && self.delta_f.is_finite()) {
            return bad("delta_f must be positive");
        }
        if !(self.n0 > 0.0 && self.n0.is_finite()) {
            return bad("n0 must be positive");
        }
        if !(self.p_total > 0.0 && self.p_total.is_finite()) {
            return bad("p_total must be positive");
        }
        if self.oversample < 1 {
            return bad("oversample must be at least 1");
        }
        if !(self.tau >= 0.0 && self.tau * self.delta_f < 1.0) {
            return bad("tau must lie in [0, 1/delta_f)");
        }
        Ok(())
    }

    /// Number of delay bins `N`.
    pub fn n_bins(&self) -> usize {
        self.k * self.oversample
    }

    pub fn bandwidth(&self) -> f64 {
        self.k as f64 * self.delta_f
    }

    /// Duration of one delay bin in seconds.
    pub fn bin_duration(&self) -> f64 {
        1.0 / (self.n_bins() as f64 * self.delta_f)
    }
}

/// Non-negative per-carrier powers summing to the budget.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct PowerAllocation(Vec<f64>);

impl PowerAllocation {
    /// Relative tolerance on the budget constraint.
    pub const BUDGET_RTOL: f64 = 1e-9;

    pub fn new(p: Vec<f64>, p_total: f64) -> Result<Self> {
        if let Some((k, v)) = p.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidAllocation(format!("entry {k} is {v}")));
        }
        let sum: f64 = p.iter().sum();
        if (sum - p_total).abs() > Self::BUDGET_RTOL * p_total {
            return Err(Error::InvalidAllocation(format!(
                "powers sum to {sum}, budget is {p_total}"
            )));
        }
        Ok(Self(p))
    }

    /// Builds an allocation for `cfg`, checking the length as well as the budget.
    pub fn for_config(p: Vec<f64>, cfg: &OfdmConfig) -> Result<Self> {
        if p.len() != cfg.k {
            return Err(Error::DimensionMismatch {
                expected: cfg.k,
                found: p.len(),
            });
        }
        Self::new(p, cfg.p_total)
    }

    /// Equal power on every carrier.
    pub fn uniform(cfg: &OfdmConfig) -> Self {
        Self(vec![cfg.p_total / cfg.k as f64; cfg.k])
    }

    pub(crate) fn from_raw(p: Vec<f64>) -> Self {
        Self(p)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub(crate) fn check_len(&self, k: usize) -> Result<()> {
        if self.0.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: self.0.len(),
            });
        }
        Ok(())
    }
}

/// Magnitude of the expected pulse-compression output, split into main lobe
/// and side lobes.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeProfile {
    pub magnitude: Vec<f64>,
    pub peak_index: usize,
    /// Main-lobe bins in circular order, from the left edge to the right edge.
    pub mainlobe_bins: Vec<usize>,
    /// Remaining bins in ascending order.
    pub sidelobe_bins: Vec<usize>,
    /// Number of main-lobe bins left and right of the peak.
    lobe_extent: (usize, usize),
}

impl RangeProfile {
    pub fn from_magnitude(magnitude: Vec<f64>) -> Result<Self> {
        let split = LobeSplit::locate(&magnitude)?;
        let n = magnitude.len();
        let mainlobe_bins = split.mainlobe_bins(n);
        let mut in_main = vec![false; n];
        for &i in &mainlobe_bins {
            in_main[i] = true;
        }
        let sidelobe_bins = (0..n).filter(|&i| !in_main[i]).collect();
        Ok(Self {
            magnitude,
            peak_index: split.peak,
            mainlobe_bins,
            sidelobe_bins,
            lobe_extent: (split.left, split.right),
        })
    }

    pub fn n_bins(&self) -> usize {
        self.magnitude.len()
    }

    pub fn peak(&self) -> f64 {
        self.magnitude[self.peak_index]
    }

    /// Bins on the left/right of the peak that belong to the main lobe.
    pub fn lobe_extent(&self) -> (usize, usize) {
        self.lobe_extent
    }

    /// Value `offset` bins away from the peak, wrapping circularly.
    pub fn at_offset(&self, offset: isize) -> f64 {
        let n = self.n_bins() as isize;
        let i = (self.peak_index as isize + offset).rem_euclid(n) as usize;
        self.magnitude[i]
    }
}

/// Circular null-to-null extent of the main lobe around the peak.
///
/// `left` and `right` count main-lobe bins on each side of the peak; the
/// bounding local minima themselves are not part of the lobe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct LobeSplit {
    pub peak: usize,
    pub left: usize,
    pub right: usize,
}

impl LobeSplit {
    pub fn locate(mag: &[f64]) -> Result<Self> {
        let n = mag.len();
        if n < 3 {
            return Err(Error::InvalidArgument(format!(
                "profile needs at least 3 bins, got {n}"
            )));
        }
        let mut peak = 0;
        for (i, &v) in mag.iter().enumerate() {
            if v > mag[peak] {
                peak = i;
            }
        }
        if mag.iter().all(|&v| v == mag[peak]) {
            return Err(Error::DegenerateProfile);
        }
        let at = |off: isize| mag[(peak as isize + off).rem_euclid(n as isize) as usize];

        // Steps until the first local minimum on each side.
        let mut r = 0usize;
        while r < n - 1 && at(r as isize + 1) < at(r as isize) {
            r += 1;
        }
        let mut l = 0usize;
        while l < n - 1 && at(-(l as isize) - 1) < at(-(l as isize)) {
            l += 1;
        }
        Ok(Self {
            peak,
            left: l.saturating_sub(1),
            right: r.saturating_sub(1),
        })
    }

    pub fn mainlobe_bins(&self, n: usize) -> Vec<usize> {
        let left = self.left as isize;
        (-left..=self.right as isize)
            .map(|off| (self.peak as isize + off).rem_euclid(n as isize) as usize)
            .collect()
    }

    /// Whether `bin` belongs to the main lobe after clipping it to at most
    /// `guard` bins on either side of the peak.
    pub fn in_guarded_lobe(&self, bin: usize, n: usize, guard: usize) -> bool {
        let fwd = (bin + n - self.peak) % n;
        let back = (self.peak + n - bin) % n;
        (fwd <= self.right && fwd <= guard) || (back <= self.left && back <= guard)
    }
}

/// Main-lobe/side-lobe split of a magnitude profile.
///
/// The main lobe runs from the first local minimum left of the peak to the
/// first local minimum right of it, walking circularly; the minima belong to
/// the side-lobe set. Ties for the peak go to the lowest index.
pub fn mainlobe_partition(magnitude: &[f64]) -> Result<(Vec<usize>, Vec<usize>)> {
    let profile = RangeProfile::from_magnitude(magnitude.to_vec())?;
    Ok((profile.mainlobe_bins, profile.sidelobe_bins))
}

/// Oversampled inverse DFT from carrier powers to delay bins, planned once.
#[derive(Clone)]
pub struct DelayTransform {
    k: usize,
    n: usize,
    fft: Arc<dyn Fft<f64>>,
    /// Per-carrier delay phase `exp(-j 2 pi k df tau)`.
    phase: Vec<Complex64>,
}

impl std::fmt::Debug for DelayTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DelayTransform")
            .field("k", &self.k)
            .field("n", &self.n)
            .finish()
    }
}

impl DelayTransform {
    pub fn new(cfg: &OfdmConfig) -> Self {
        let n = cfg.n_bins();
        let fft = FftPlanner::new().plan_fft_inverse(n);
        let phase = (0..cfg.k)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 * cfg.delta_f * cfg.tau))
            .collect();
        Self {
            k: cfg.k,
            n,
            fft,
            phase,
        }
    }

    pub fn n_bins(&self) -> usize {
        self.n
    }

    pub fn n_carriers(&self) -> usize {
        self.k
    }

    /// Complex response `r_n` for the powers `p`.
    pub fn response(&self, p: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(p.len(), self.k);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.n];
        for ((b, &pk), &ph) in buf.iter_mut().zip(p).zip(&self.phase) {
            *b = ph * pk;
        }
        self.fft.process(&mut buf);
        buf
    }

    /// Real adjoint: `out_k = Re(phase_k * sum_n weights_n exp(j 2 pi n k / N))`.
    ///
    /// With `weights_n = conj(r_n) / |r_n|` this is the gradient of `|r_n|`
    /// with respect to the powers, summed over the weighted bins.
    pub fn adjoint(&self, weights: &[Complex64]) -> Vec<f64> {
        debug_assert_eq!(weights.len(), self.n);
        let mut buf = weights.to_vec();
        self.fft.process(&mut buf);
        buf.iter()
            .zip(&self.phase)
            .take(self.k)
            .map(|(b, ph)| (ph * b).re)
            .collect()
    }

    /// Gradient of `|r_bin|` with respect to the powers, evaluated directly.
    pub fn bin_gradient(&self, r_bin: Complex64, bin: usize) -> Vec<f64> {
        let mag = r_bin.norm();
        if mag == 0.0 {
            return vec![0.0; self.k];
        }
        let unit = r_bin.conj() / mag;
        (0..self.k)
            .map(|k| {
                let w = Complex64::from_polar(1.0, 2.0 * PI * ((bin * k) % self.n) as f64 / self.n as f64);
                (unit * self.phase[k] * w).re
            })
            .collect()
    }

    pub fn profile(&self, p: &[f64]) -> Result<RangeProfile> {
        let mag = self.response(p).iter().map(|c| c.norm()).collect();
        RangeProfile::from_magnitude(mag)
    }
}

/// Complex expected pulse-compression output for `alloc`.
pub fn expected_response(cfg: &OfdmConfig, alloc: &PowerAllocation) -> Result<Vec<Complex64>> {
    alloc.check_len(cfg.k)?;
    Ok(DelayTransform::new(cfg).response(alloc.as_slice()))
}

/// Magnitude profile of the expected pulse-compression output, partitioned
/// into main lobe and side lobes.
pub fn expected_range_profile(cfg: &OfdmConfig, alloc: &PowerAllocation) -> Result<RangeProfile> {
    alloc.check_len(cfg.k)?;
    DelayTransform::new(cfg).profile(alloc.as_slice())
}
