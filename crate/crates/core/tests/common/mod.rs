//! Reference implementations used as test oracles. They are written for
//! clarity, not speed, and share no code with the library.
#![allow(dead_code)]

use std::f64::consts::PI;

use isac_power::harness::config::{ChannelModel, ChannelSection};
use isac_power::harness::generate_channel_for;
use isac_power::{ChannelRealization, OfdmConfig, Thresholds};
use num_complex::Complex64;

/// `sum_k p_k exp(-j 2 pi k df tau) exp(j 2 pi n k / N)` by direct summation.
pub fn direct_response(cfg: &OfdmConfig, p: &[f64]) -> Vec<Complex64> {
    let n_bins = cfg.k * cfg.oversample;
    (0..n_bins)
        .map(|n| {
            p.iter()
                .enumerate()
                .map(|(k, &pk)| {
                    let delay = -2.0 * PI * k as f64 * cfg.delta_f * cfg.tau;
                    let bin = 2.0 * PI * (n * k) as f64 / n_bins as f64;
                    Complex64::from_polar(pk, delay + bin)
                })
                .sum()
        })
        .collect()
}

pub fn direct_magnitude(cfg: &OfdmConfig, p: &[f64]) -> Vec<f64> {
    direct_response(cfg, p).iter().map(|c| c.norm()).collect()
}

/// Peak index (first maximum) and the main-lobe membership mask: bins on the
/// strictly descending runs either side of the peak, minus the minima that
/// end those runs.
pub fn main_lobe_mask(mag: &[f64]) -> (usize, Vec<bool>) {
    let n = mag.len();
    let mut peak = 0;
    for i in 1..n {
        if mag[i] > mag[peak] {
            peak = i;
        }
    }
    let mut mask = vec![false; n];
    mask[peak] = true;
    for dir in [1isize, -1] {
        let idx = |s: isize| (peak as isize + dir * s).rem_euclid(n as isize) as usize;
        let mut s = 1;
        // Bin `s` is in the lobe when the walk keeps descending past it.
        while (s as usize) < n && mag[idx(s)] < mag[idx(s - 1)] && mag[idx(s + 1)] < mag[idx(s)] {
            mask[idx(s)] = true;
            s += 1;
        }
    }
    (peak, mask)
}

pub fn oracle_psl_db(mag: &[f64]) -> f64 {
    let (peak, mask) = main_lobe_mask(mag);
    let worst = (0..mag.len()).filter(|&i| !mask[i]).map(|i| mag[i]).fold(0.0, f64::max);
    20.0 * (worst / mag[peak]).log10()
}

pub fn oracle_capacity(p: &[f64], g: &[f64]) -> f64 {
    p.iter().zip(g).map(|(p, g)| (1.0 + p * g).log2()).sum()
}

pub fn oracle_proxy(p: &[f64]) -> f64 {
    let c = p.len() as f64 / 2.0;
    p.iter().enumerate().map(|(k, pk)| (k as f64 - c).powi(2) * pk).sum()
}

/// Water-filling by bisection on the water level.
pub fn oracle_water_filling(g: &[f64], p_total: f64) -> (Vec<f64>, f64) {
    let fill = |mu: f64| -> Vec<f64> {
        g.iter().map(|&gk| if gk > 0.0 { (mu - 1.0 / gk).max(0.0) } else { 0.0 }).collect()
    };
    let mut lo = 0.0;
    let mut hi = p_total + g.iter().filter(|&&v| v > 0.0).map(|v| 1.0 / v).fold(0.0, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if fill(mid).iter().sum::<f64>() > p_total {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mu = 0.5 * (lo + hi);
    (fill(mu), mu)
}

/// All symmetric allocations `p_k = p_{K-1-k}` (K even) whose entries are
/// multiples of `res * p_total`.
pub fn symmetric_grid(k: usize, p_total: f64, res: f64) -> Vec<Vec<f64>> {
    let half = k / 2;
    let units = (0.5 / res).round() as usize;
    let mut out = Vec::new();
    let mut counts = vec![0usize; half];
    fn rec(i: usize, left: usize, counts: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i + 1 == counts.len() {
            counts[i] = left;
            out.push(counts.clone());
            return;
        }
        for c in 0..=left {
            counts[i] = c;
            rec(i + 1, left - c, counts, out);
        }
    }
    let mut raw = Vec::new();
    rec(0, units, &mut counts, &mut raw);
    for c in raw {
        let mut p = vec![0.0; k];
        for (i, &ci) in c.iter().enumerate() {
            let share = ci as f64 / units as f64 * p_total / 2.0;
            p[i] = share;
            p[k - 1 - i] = share;
        }
        out.push(p);
    }
    out
}

/// What an exhaustive scan of the epsilon grid decides.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Verdict {
    CommOnly,
    Isac(f64),
}

/// The ISAC decision by exhaustive epsilon-grid scan, on the reference
/// metrics above.
pub struct Oracle<'a> {
    cfg: &'a OfdmConfig,
    chan: &'a ChannelRealization,
    pub wf: Vec<f64>,
    pub c_wf: f64,
}

impl<'a> Oracle<'a> {
    pub fn new(cfg: &'a OfdmConfig, chan: &'a ChannelRealization) -> Self {
        let (wf, _) = oracle_water_filling(chan.gain_over_noise(), cfg.p_total);
        let c_wf = oracle_capacity(&wf, chan.gain_over_noise());
        Self { cfg, chan, wf, c_wf }
    }

    /// (psl ok, accuracy ok, capacity ok) for powers `p`.
    pub fn checks(&self, p: &[f64], th: &Thresholds) -> (bool, bool, bool) {
        let psl = oracle_psl_db(&direct_magnitude(self.cfg, p));
        let loss = (self.c_wf - oracle_capacity(p, self.chan.gain_over_noise())) / self.c_wf;
        (
            psl <= th.gamma_psl_db,
            oracle_proxy(p) >= th.gamma_acc,
            loss <= th.gamma_c + 1e-12,
        )
    }

    pub fn decide(&self, th: &Thresholds, edges: &[f64], psl_opt: &[f64]) -> Verdict {
        self.decide_on_grid(th, edges, psl_opt, (1.0 / th.epsilon).round() as usize)
    }

    /// As [`Oracle::decide`] with the blend weight scanned in `steps` equal
    /// increments.
    pub fn decide_on_grid(&self, th: &Thresholds, edges: &[f64], psl_opt: &[f64], steps: usize) -> Verdict {
        let (psl_ok, acc_ok, _) = self.checks(&self.wf, th);
        if !psl_ok && !acc_ok {
            return Verdict::CommOnly;
        }
        if psl_ok && acc_ok {
            return Verdict::Isac(0.0);
        }
        let target = if psl_ok { edges } else { psl_opt };
        for i in 0..=steps {
            let a = i as f64 / steps as f64;
            let p: Vec<f64> = self.wf.iter().zip(target).map(|(w, t)| (1.0 - a) * w + a * t).collect();
            let (x, y, z) = self.checks(&p, th);
            if x && y && z {
                return Verdict::Isac(a);
            }
        }
        Verdict::CommOnly
    }
}

pub fn rayleigh(cfg: &OfdmConfig, seed: u64, snr_db: f64) -> ChannelRealization {
    let spec = ChannelSection {
        model: ChannelModel::RayleighIid,
        seed,
        snr_db,
        ..ChannelSection::default()
    };
    generate_channel_for(cfg, &spec).unwrap()
}

pub fn config(k: usize, oversample: usize) -> OfdmConfig {
    OfdmConfig::new(k, 1.0e6 / k as f64, 4e-21, 1.0, oversample).unwrap()
}

/// Whether `xs` never increases, up to `tol`.
pub fn non_increasing(xs: &[f64], tol: f64) -> bool {
    xs.windows(2).all(|w| w[1] <= w[0] + tol)
}

pub fn non_decreasing(xs: &[f64], tol: f64) -> bool {
    xs.windows(2).all(|w| w[1] >= w[0] - tol)
}
