mod common;

use common::*;
use isac_power::{
    accuracy_loss_pct, accuracy_proxy, capacity, edges_allocation, expected_range_profile, expected_response,
    hann_allocation, mainlobe_partition, mlw_3db, psl_db, ChannelRealization, OfdmConfig, PowerAllocation,
};
use proptest::prelude::*;

fn alloc(p: Vec<f64>) -> PowerAllocation {
    let s = p.iter().sum();
    PowerAllocation::new(p, s).unwrap()
}

fn powers(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, k)
}

fn rel_err(a: &[num_complex::Complex64], b: &[num_complex::Complex64]) -> f64 {
    let scale = b.iter().map(|c| c.norm()).fold(0.0, f64::max);
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fft_matches_direct_sum(k in 2usize..17, os in 1usize..9, frac in 0.0f64..1.0, seed in powers(16)) {
        let df = 1e6 / k as f64;
        let cfg = OfdmConfig::new(k, df, 1.0, 1.0, os).unwrap().with_tau(frac / df).unwrap();
        let p = alloc(seed[..k].to_vec());
        let fast = expected_response(&cfg, &p).unwrap();
        let slow = direct_response(&cfg, p.as_slice());
        prop_assert!(rel_err(&fast, &slow) <= 1e-10);
    }

    #[test]
    fn response_is_linear(a in 0.1f64..3.0, b in 0.1f64..3.0, p1 in powers(12), p2 in powers(12), tau in 0.0f64..1e-5) {
        let cfg = config(12, 4).with_tau(tau).unwrap();
        let mix: Vec<f64> = p1.iter().zip(&p2).map(|(x, y)| a * x + b * y).collect();
        let r1 = expected_response(&cfg, &alloc(p1)).unwrap();
        let r2 = expected_response(&cfg, &alloc(p2)).unwrap();
        let rm = expected_response(&cfg, &alloc(mix)).unwrap();
        // The allocations were renormalised to their own sums only for the
        // budget check; the response uses raw powers, so linearity is exact.
        let combined: Vec<_> = r1.iter().zip(&r2).map(|(x, y)| x * a + y * b).collect();
        prop_assert!(rel_err(&rm, &combined) <= 1e-12);
    }

    #[test]
    fn oversampled_bins_decimate_to_critical(p in powers(16), os in 2usize..9) {
        let base = config(16, 1);
        let fine = config(16, os);
        let p = alloc(p);
        let coarse = expected_response(&base, &p).unwrap();
        let dense = expected_response(&fine, &p).unwrap();
        let decimated: Vec<_> = dense.iter().step_by(os).copied().collect();
        prop_assert!(rel_err(&decimated, &coarse) <= 1e-12);
    }

    #[test]
    fn delay_by_whole_bins_shifts_the_magnitude(p in powers(16), shift in 0usize..64) {
        let cfg = config(16, 4);
        let delayed = cfg.clone().with_tau(shift as f64 * cfg.bin_duration()).unwrap();
        let p = alloc(p);
        let m0 = expected_range_profile(&cfg, &p).unwrap().magnitude;
        let m1 = expected_range_profile(&delayed, &p).unwrap().magnitude;
        let n = m0.len();
        for i in 0..n {
            prop_assert!((m1[(i + shift) % n] - m0[i]).abs() <= 1e-9 * m0[0]);
        }
    }

    #[test]
    fn psl_is_scale_invariant(p in powers(32), scale in 0.01f64..100.0) {
        let cfg = config(32, 8);
        let a = alloc(p.clone());
        let b = alloc(p.iter().map(|v| v * scale).collect());
        let pa = psl_db(&expected_range_profile(&cfg, &a).unwrap()).unwrap();
        let pb = psl_db(&expected_range_profile(&cfg, &b).unwrap()).unwrap();
        prop_assert!((pa - pb).abs() <= 1e-9);
    }

    #[test]
    fn psl_matches_oracle(p in powers(12), tau in 0.0f64..1e-5) {
        let cfg = config(12, 8).with_tau(tau).unwrap();
        let p = alloc(p);
        let lib = psl_db(&expected_range_profile(&cfg, &p).unwrap()).unwrap();
        let ora = oracle_psl_db(&direct_magnitude(&cfg, p.as_slice()));
        prop_assert!((lib - ora).abs() <= 1e-8, "{lib} vs {ora}");
    }

    #[test]
    fn partition_matches_oracle(mag in prop::collection::vec(0.0f64..1.0, 3..80)) {
        prop_assume!(mag.iter().any(|&v| v != mag[0]));
        let (main, side) = mainlobe_partition(&mag).unwrap();
        let (_, mask) = main_lobe_mask(&mag);
        for &i in &main {
            prop_assert!(mask[i]);
        }
        for &i in &side {
            prop_assert!(!mask[i]);
        }
        prop_assert_eq!(main.len() + side.len(), mag.len());
    }

    #[test]
    fn accuracy_proxy_is_linear(a in 0.0f64..5.0, b in 0.0f64..5.0, p1 in powers(20), p2 in powers(20)) {
        let mix: Vec<f64> = p1.iter().zip(&p2).map(|(x, y)| a * x + b * y).collect();
        prop_assume!(mix.iter().sum::<f64>() > 0.0);
        let lhs = accuracy_proxy(&alloc(mix.clone()));
        let rhs = a * accuracy_proxy(&alloc(p1.clone())) + b * accuracy_proxy(&alloc(p2.clone()));
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
        prop_assert!((lhs - oracle_proxy(&mix)).abs() <= 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn capacity_is_increasing_and_concave(p1 in powers(8), p2 in powers(8), g in prop::collection::vec(0.1f64..10.0, 8), t in 0.05f64..0.95) {
        let cfg = OfdmConfig::new(8, 1.0, 1.0, 1.0, 1).unwrap();
        let chan = ChannelRealization::from_gain_over_noise(g.clone(), &cfg).unwrap();
        let cap = |p: &[f64]| {
            let s: f64 = p.iter().sum();
            let c = OfdmConfig::new(8, 1.0, 1.0, s, 1).unwrap();
            capacity(&PowerAllocation::for_config(p.to_vec(), &c).unwrap(), &chan, &c).unwrap()
        };
        let mid: Vec<f64> = p1.iter().zip(&p2).map(|(x, y)| t * x + (1.0 - t) * y).collect();
        prop_assert!(cap(&mid) >= t * cap(&p1) + (1.0 - t) * cap(&p2) - 1e-12);
        prop_assert!((cap(&p1) - oracle_capacity(&p1, &g)).abs() <= 1e-12 * cap(&p1));
        for k in 0..8 {
            let mut bumped = p1.clone();
            bumped[k] += 1e-3;
            prop_assert!(cap(&bumped) > cap(&p1));
        }
    }
}

#[test]
fn uniform_psl_anchor() {
    let cfg = OfdmConfig::reference();
    let psl = psl_db(&expected_range_profile(&cfg, &PowerAllocation::uniform(&cfg)).unwrap()).unwrap();
    assert!((psl + 13.26).abs() <= 0.05, "{psl}");
}

#[test]
fn hann_psl_anchor() {
    for k in [64, 128] {
        let cfg = OfdmConfig::reference();
        let cfg = OfdmConfig::new(k, cfg.delta_f, cfg.n0, cfg.p_total, 16).unwrap();
        let psl = psl_db(&expected_range_profile(&cfg, &hann_allocation(&cfg)).unwrap()).unwrap();
        assert!((psl + 31.5).abs() <= 0.5, "K={k}: {psl}");
    }
}

#[test]
fn edges_psl_anchor_is_a_grating_lobe() {
    let cfg = OfdmConfig::reference();
    let profile = expected_range_profile(&cfg, &edges_allocation(&cfg)).unwrap();
    assert!(psl_db(&profile).unwrap().abs() <= 0.05);
    // Grating-lobe maxima near multiples of N/(K-1) are side lobes.
    let n = cfg.n_bins() as f64;
    let spacing = n / (cfg.k - 1) as f64;
    for m in 1..4 {
        let bin = (m as f64 * spacing).round() as usize;
        assert!(profile.sidelobe_bins.contains(&bin));
    }
}

#[test]
fn uniform_main_lobe_spans_first_nulls() {
    let cfg = OfdmConfig::reference();
    let profile = expected_range_profile(&cfg, &PowerAllocation::uniform(&cfg)).unwrap();
    let null = cfg.oversample;
    let n = cfg.n_bins();
    let main = &profile.mainlobe_bins;
    assert_eq!(main.len(), 2 * null - 1);
    assert_eq!(main[0], n - null + 1);
    assert_eq!(*main.last().unwrap(), null - 1);
    assert!(profile.sidelobe_bins.contains(&null) && profile.sidelobe_bins.contains(&(n - null)));
}

#[test]
fn mlw_anchors() {
    let cfg = OfdmConfig::reference();
    let cell = cfg.oversample as f64;
    let width = |p: &PowerAllocation| mlw_3db(&expected_range_profile(&cfg, p).unwrap()).unwrap();
    let uni = width(&PowerAllocation::uniform(&cfg));
    let hann = width(&hann_allocation(&cfg));
    let edges = width(&edges_allocation(&cfg));
    assert!((uni / (0.886 * cell) - 1.0).abs() <= 0.02, "uniform {uni}");
    assert!((hann / (1.44 * cell) - 1.0).abs() <= 0.03, "hann {hann}");
    assert!(edges < uni && edges < hann);
    let loss = accuracy_loss_pct(hann, uni).unwrap();
    assert!((loss - 62.0).abs() <= 5.0, "{loss}");
}

#[test]
fn uniform_mlw_shrinks_with_bandwidth() {
    let widths: Vec<f64> = [16, 32, 64, 128]
        .iter()
        .map(|&k| {
            let cfg = config(k, 16);
            mlw_3db(&expected_range_profile(&cfg, &PowerAllocation::uniform(&cfg)).unwrap()).unwrap()
                / cfg.n_bins() as f64
        })
        .collect();
    assert!(widths.windows(2).all(|w| w[1] < w[0]), "{widths:?}");
}

#[test]
fn edges_beat_uniform_on_accuracy_proxy() {
    let cfg = OfdmConfig::reference();
    let e = accuracy_proxy(&edges_allocation(&cfg));
    let u = accuracy_proxy(&PowerAllocation::uniform(&cfg));
    assert!(e > u);
    assert!((e - 0.5 * (64.0f64.powi(2) + 63.0f64.powi(2))).abs() < 1e-9);
}
