//! Canonical power allocations: water-filling, edges-only, minimum-PSL and
//! PSL-constrained capacity maximisation.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{amplitude_db, capacity_raw, psl_db, ChannelRealization};
use crate::model::{DelayTransform, LobeSplit, OfdmConfig, PowerAllocation};

/// Knobs shared by the iterative solvers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverSettings {
    pub max_iters: usize,
    /// Initial step length in W.
    pub step_init: f64,
    /// Relative convergence threshold.
    pub tol: f64,
    /// Seed for randomised restarts of the minimum-PSL search.
    pub seed: u64,
    /// Geometric decay of the subgradient step.
    pub decay: f64,
    /// Largest main-lobe half-width, in resolution cells (`oversample` bins),
    /// the solvers may exclude from the side-lobe set.
    pub guard_cells: f64,
    /// Maximum number of penalty-weight doublings.
    pub penalty_rounds: usize,
    /// Extra random starting points for the minimum-PSL search.
    pub restarts: usize,
}

impl SolverSettings {
    pub fn for_config(cfg: &OfdmConfig) -> Self {
        Self {
            max_iters: 20_000,
            step_init: cfg.p_total / cfg.k as f64,
            tol: 1e-9,
            seed: 0,
            decay: 0.99,
            guard_cells: 2.0,
            penalty_rounds: 20,
            restarts: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.max_iters < 1 {
            return bad("max_iters must be at least 1");
        }
        if !(self.step_init > 0.0) {
            return bad("step_init must be positive");
        }
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return bad("decay must lie in (0, 1)");
        }
        if !(self.guard_cells > 0.0) {
            return bad("guard_cells must be positive");
        }
        Ok(())
    }

    fn guard_bins(&self, cfg: &OfdmConfig) -> usize {
        (self.guard_cells * cfg.oversample as f64).round().max(1.0) as usize
    }
}

/// Result of an iterative allocator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solution {
    pub allocation: PowerAllocation,
    /// PSL of `allocation` under the null-to-null side-lobe definition.
    pub psl_db: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Euclidean projection of `v` onto `{p >= 0, sum p = total}`.
pub fn project_simplex(v: &[f64], total: f64) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cumsum += ui;
        let t = (cumsum - total) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Capacity-optimal allocation `P_k = max(0, mu - 1/g_k)`.
pub fn water_filling(chan: &ChannelRealization, cfg: &OfdmConfig) -> Result<PowerAllocation> {
    water_filling_with_level(chan, cfg).map(|(p, _)| p)
}

/// Water-filling allocation together with its water level `mu`.
pub fn water_filling_with_level(
    chan: &ChannelRealization,
    cfg: &OfdmConfig,
) -> Result<(PowerAllocation, f64)> {
    let g = chan.gain_over_noise();
    if g.len() != cfg.k {
        return Err(Error::DimensionMismatch {
            expected: cfg.k,
            found: g.len(),
        });
    }
    let mut floors: Vec<f64> = g.iter().filter(|&&v| v > 0.0).map(|v| 1.0 / v).collect();
    if floors.is_empty() {
        return Err(Error::NoUsableChannel);
    }
    floors.sort_by(f64::total_cmp);

    // Grow the active set in order of increasing floor until the level
    // stops exceeding the next floor.
    let mut sum_floor = 0.0;
    let mut level = 0.0;
    for (m, &floor) in floors.iter().enumerate() {
        let candidate = (cfg.p_total + sum_floor + floor) / (m + 1) as f64;
        if candidate <= floor {
            break;
        }
        sum_floor += floor;
        level = candidate;
    }
    let p = g
        .iter()
        .map(|&v| if v > 0.0 { (level - 1.0 / v).max(0.0) } else { 0.0 })
        .collect();
    Ok((PowerAllocation::new(p, cfg.p_total)?, level))
}

/// Half the budget on each edge carrier.
pub fn edges_allocation(cfg: &OfdmConfig) -> PowerAllocation {
    let mut p = vec![0.0; cfg.k];
    p[0] = cfg.p_total / 2.0;
    p[cfg.k - 1] += cfg.p_total / 2.0;
    PowerAllocation::from_raw(p)
}

/// Hann-shaped power profile `0.5 (1 - cos(2 pi k / (K - 1)))`.
pub fn hann_allocation(cfg: &OfdmConfig) -> PowerAllocation {
    let denom = (cfg.k - 1) as f64;
    let w: Vec<f64> = (0..cfg.k)
        .map(|k| 0.5 * (1.0 - (2.0 * PI * k as f64 / denom).cos()))
        .collect();
    let s: f64 = w.iter().sum();
    PowerAllocation::from_raw(w.iter().map(|v| v / s * cfg.p_total).collect())
}

/// Largest side-lobe magnitude, where the main lobe is clipped to `guard`
/// bins on each side of the peak. Bins inside the clipped lobe are skipped.
fn worst_guarded_bin(mag: &[f64], guard: usize) -> Option<(usize, f64)> {
    let n = mag.len();
    let split = LobeSplit::locate(mag).ok()?;
    (0..n)
        .filter(|&i| !split.in_guarded_lobe(i, n, guard))
        .map(|i| (i, mag[i]))
        .fold(None, |acc, (i, v)| match acc {
            Some((_, best)) if best >= v => acc,
            _ => Some((i, v)),
        })
}

/// PSL the solvers optimise: side lobes are every bin outside the null-to-null
/// main lobe clipped to the guard window. Never below [`psl_db`].
pub fn guarded_psl_db(mag: &[f64], guard_bins: usize) -> Result<f64> {
    let split = LobeSplit::locate(mag)?;
    let worst = worst_guarded_bin(mag, guard_bins).ok_or(Error::EmptySidelobes)?;
    Ok(amplitude_db(worst.1 / mag[split.peak]))
}

fn metric_psl(t: &DelayTransform, p: &[f64]) -> Result<f64> {
    psl_db(&t.profile(p)?)
}

/// Allocation minimising the peak side-lobe level under the power budget.
///
/// Projected subgradient descent on the simplex: each iterate steps against
/// the gradient of the worst side-lobe bin (side-lobe set recomputed from
/// the current profile), with a geometrically shrinking normalised step.
/// The best iterate seen is returned.
pub fn psl_min_allocation(cfg: &OfdmConfig, settings: &SolverSettings) -> Result<Solution> {
    cfg.validate()?;
    settings.validate()?;
    let t = DelayTransform::new(cfg);
    let guard = settings.guard_bins(cfg);

    let mut starts = vec![PowerAllocation::uniform(cfg).into_inner()];
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    for _ in 0..settings.restarts {
        let raw: Vec<f64> = (0..cfg.k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let s: f64 = raw.iter().sum();
        starts.push(raw.iter().map(|v| v / s * cfg.p_total).collect());
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut converged = true;
    let mut iterations = 0;
    for start in starts {
        let run = subgradient_run(&t, start, cfg.p_total, guard, settings);
        converged &= run.converged;
        iterations += run.iterations;
        if best.as_ref().is_none_or(|(v, _)| run.objective < *v) {
            best = Some((run.objective, run.p));
        }
    }
    let (_, p) = best.expect("at least one start");
    let allocation = PowerAllocation::new(p, cfg.p_total)?;
    Ok(Solution {
        psl_db: metric_psl(&t, allocation.as_slice())?,
        allocation,
        converged,
        iterations,
    })
}

struct SubgradientRun {
    p: Vec<f64>,
    objective: f64,
    converged: bool,
    iterations: usize,
}

fn subgradient_run(
    t: &DelayTransform,
    mut p: Vec<f64>,
    p_total: f64,
    guard: usize,
    settings: &SolverSettings,
) -> SubgradientRun {
    let mut step = settings.step_init;
    let floor = settings.tol * settings.step_init;
    let mut best = (f64::INFINITY, p.clone());
    let mut converged = false;
    let mut iterations = 0;
    while iterations < settings.max_iters {
        iterations += 1;
        let r = t.response(&p);
        let mag: Vec<f64> = r.iter().map(|c| c.norm()).collect();
        let Some((bin, worst)) = worst_guarded_bin(&mag, guard) else {
            break;
        };
        let peak = mag.iter().cloned().fold(0.0, f64::max);
        let ratio = worst / peak;
        if ratio < best.0 {
            best = (ratio, p.clone());
        }
        if worst == 0.0 {
            converged = true;
            break;
        }
        let g = t.bin_gradient(r[bin], bin);
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            converged = true;
            break;
        }
        let moved: Vec<f64> = p.iter().zip(&g).map(|(pk, gk)| pk - step * gk / norm).collect();
        p = project_simplex(&moved, p_total);
        step *= settings.decay;
        if step < floor {
            converged = true;
            break;
        }
    }
    SubgradientRun {
        p: best.1,
        objective: best.0,
        converged,
        iterations,
    }
}

/// Maximises capacity subject to a peak side-lobe bound of `gamma_psl_db`.
pub fn psl_constrained_capacity(
    chan: &ChannelRealization,
    cfg: &OfdmConfig,
    gamma_psl_db: f64,
    settings: &SolverSettings,
) -> Result<Solution> {
    let frontier = psl_min_allocation(cfg, settings)?;
    psl_constrained_capacity_with(chan, cfg, gamma_psl_db, settings, &frontier)
}

/// As [`psl_constrained_capacity`], reusing a precomputed minimum-PSL
/// solution as the feasibility frontier.
///
/// Projected gradient ascent (Armijo backtracking) on capacity minus a
/// quadratic exterior penalty on side-lobe excess; the penalty weight doubles
/// each round the bound is still violated. If the penalty rounds end short of
/// the bound, the iterate is blended toward the frontier until it complies.
pub fn psl_constrained_capacity_with(
    chan: &ChannelRealization,
    cfg: &OfdmConfig,
    gamma_psl_db: f64,
    settings: &SolverSettings,
    frontier: &Solution,
) -> Result<Solution> {
    settings.validate()?;
    if !(gamma_psl_db <= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "PSL bound must be <= 0 dB, got {gamma_psl_db}"
        )));
    }
    frontier.allocation.check_len(cfg.k)?;
    let t = DelayTransform::new(cfg);
    let wf = water_filling(chan, cfg)?;
    let wf_psl = metric_psl(&t, wf.as_slice())?;
    if wf_psl <= gamma_psl_db {
        return Ok(Solution {
            allocation: wf,
            psl_db: wf_psl,
            converged: true,
            iterations: 0,
        });
    }
    if gamma_psl_db < frontier.psl_db {
        return Err(Error::Infeasible {
            gamma_psl_db,
            frontier_db: frontier.psl_db,
        });
    }

    let problem = PenaltyProblem {
        t: &t,
        g: chan.gain_over_noise(),
        p_total: cfg.p_total,
        bound: 10f64.powf(gamma_psl_db / 20.0),
        guard: settings.guard_bins(cfg),
    };
    // Penalty rounds stop once the bound holds to this margin.
    const ROUND_MARGIN_DB: f64 = 0.01;
    const ACCEPT_MARGIN_DB: f64 = 0.1;

    let mut p = wf.into_inner();
    let mut weight = capacity_raw(&p, problem.g).max(1.0);
    let mut iterations = 0;
    let mut psl = wf_psl;
    for _ in 0..settings.penalty_rounds.max(1) {
        let budget = settings.max_iters.saturating_sub(iterations);
        if budget == 0 {
            break;
        }
        let (next, used) = problem.ascend(p, weight, settings, budget);
        p = next;
        iterations += used;
        psl = metric_psl(&t, &p)?;
        if psl <= gamma_psl_db + ROUND_MARGIN_DB {
            break;
        }
        weight *= 2.0;
    }

    let mut converged = psl <= gamma_psl_db + ACCEPT_MARGIN_DB;
    if !converged {
        // Frontier allocation satisfies the bound; bisect on the blend weight.
        let target = frontier.allocation.as_slice();
        let mix = |beta: f64| -> Vec<f64> {
            p.iter().zip(target).map(|(a, b)| (1.0 - beta) * a + beta * b).collect()
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if metric_psl(&t, &mix(mid))? <= gamma_psl_db {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        p = mix(hi);
        psl = metric_psl(&t, &p)?;
        converged = false;
    }
    Ok(Solution {
        allocation: PowerAllocation::new(p, cfg.p_total)?,
        psl_db: psl,
        converged,
        iterations,
    })
}

struct PenaltyProblem<'a> {
    t: &'a DelayTransform,
    g: &'a [f64],
    p_total: f64,
    /// Side-lobe amplitude bound relative to the peak.
    bound: f64,
    guard: usize,
}

impl PenaltyProblem<'_> {
    /// Penalised objective and its gradient.
    fn evaluate(&self, p: &[f64], weight: f64) -> (f64, Vec<f64>) {
        let r = self.t.response(p);
        let mag: Vec<f64> = r.iter().map(|c| c.norm()).collect();
        let n = mag.len();
        let mut weights = vec![Complex64::new(0.0, 0.0); n];
        let mut excess_sq = 0.0;
        if let Ok(split) = LobeSplit::locate(&mag) {
            for i in 0..n {
                if split.in_guarded_lobe(i, n, self.guard) {
                    continue;
                }
                let excess = mag[i] / self.p_total - self.bound;
                if excess > 0.0 {
                    excess_sq += excess * excess;
                    weights[i] = r[i].conj() * (excess / mag[i]);
                }
            }
        }
        let pen_grad = self.t.adjoint(&weights);
        let scale = 2.0 * weight / self.p_total;
        let grad = p
            .iter()
            .zip(self.g)
            .zip(&pen_grad)
            .map(|((pk, gk), pg)| gk / (LN_2 * (1.0 + pk * gk)) - scale * pg)
            .collect();
        (capacity_raw(p, self.g) - weight * excess_sq, grad)
    }

    fn ascend(
        &self,
        mut p: Vec<f64>,
        weight: f64,
        settings: &SolverSettings,
        budget: usize,
    ) -> (Vec<f64>, usize) {
        let min_step = settings.step_init * 1e-14;
        let mut step = settings.step_init;
        let (mut f, mut grad) = self.evaluate(&p, weight);
        let mut used = 0;
        while used < budget {
            used += 1;
            let mut accepted = None;
            while step >= min_step {
                let trial: Vec<f64> = p.iter().zip(&grad).map(|(a, g)| a + step * g).collect();
                let q = project_simplex(&trial, self.p_total);
                let (fq, gq) = self.evaluate(&q, weight);
                let predicted: f64 = grad.iter().zip(q.iter().zip(&p)).map(|(g, (a, b))| g * (a - b)).sum();
                if fq >= f + 1e-4 * predicted {
                    accepted = Some((q, fq, gq));
                    break;
                }
                step *= 0.5;
            }
            let Some((q, fq, gq)) = accepted else {
                break;
            };
            let done = (fq - f).abs() <= settings.tol * f.abs().max(1.0);
            p = q;
            f = fq;
            grad = gq;
            step *= 2.0;
            if done {
                break;
            }
        }
        (p, used)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(k: usize, p_total: f64) -> OfdmConfig {
        OfdmConfig::new(k, 1.0, 1.0, p_total, 1).unwrap()
    }

    fn chan(g: &[f64], c: &OfdmConfig) -> ChannelRealization {
        ChannelRealization::from_gain_over_noise(g.to_vec(), c).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn water_filling_examples() {
        let c = cfg(2, 2.0);
        let p = water_filling(&chan(&[1.0, 1.0], &c), &c).unwrap();
        assert!(close(p.as_slice(), &[1.0, 1.0], 1e-12));

        let c = cfg(2, 1.0);
        let (p, mu) = water_filling_with_level(&chan(&[1.0, 0.5], &c), &c).unwrap();
        assert!(close(p.as_slice(), &[1.0, 0.0], 1e-12));
        assert!((mu - 2.0).abs() < 1e-12);

        let c = cfg(3, 0.25);
        let (p, mu) = water_filling_with_level(&chan(&[2.0, 1.0, 1.0], &c), &c).unwrap();
        assert!(close(p.as_slice(), &[0.25, 0.0, 0.0], 1e-12));
        assert!((mu - 0.75).abs() < 1e-12);
    }

    #[test]
    fn water_filling_skips_dead_carriers() {
        let c = cfg(3, 1.0);
        let p = water_filling(&chan(&[0.0, 1.0, 1.0], &c), &c).unwrap();
        assert!(close(p.as_slice(), &[0.0, 0.5, 0.5], 1e-12));
        assert!(matches!(
            water_filling(&chan(&[0.0, 0.0, 0.0], &c), &c),
            Err(Error::NoUsableChannel)
        ));
    }

    #[test]
    fn edges_examples() {
        assert_eq!(edges_allocation(&cfg(4, 4.0)).as_slice(), &[2.0, 0.0, 0.0, 2.0]);
        assert_eq!(edges_allocation(&cfg(2, 1.0)).as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn hann_examples() {
        let p = hann_allocation(&cfg(3, 2.0));
        assert!(close(p.as_slice(), &[0.0, 2.0, 0.0], 1e-15));
        let p = hann_allocation(&cfg(64, 3.0));
        assert!((p.total() - 3.0).abs() < 1e-12);
        assert!(p.as_slice().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn projection_examples() {
        assert!(close(&project_simplex(&[0.5, 0.5], 1.0), &[0.5, 0.5], 1e-15));
        assert!(close(&project_simplex(&[2.0, 0.0], 1.0), &[1.0, 0.0], 1e-15));
        assert!(close(&project_simplex(&[0.0, 0.0, 0.0], 3.0), &[1.0, 1.0, 1.0], 1e-15));
        assert!(close(&project_simplex(&[-5.0, 1.0, 0.5], 1.0), &[0.0, 0.75, 0.25], 1e-15));
    }

    #[test]
    fn settings_validation() {
        let c = cfg(8, 1.0);
        let mut s = SolverSettings::for_config(&c);
        assert!(s.validate().is_ok());
        s.tol = 0.0;
        assert!(s.validate().is_err());
        let mut s = SolverSettings::for_config(&c);
        s.max_iters = 0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn guarded_psl_never_beats_metric_psl() {
        let c = OfdmConfig::new(16, 1.0, 1.0, 1.0, 8).unwrap();
        let t = DelayTransform::new(&c);
        for p in [PowerAllocation::uniform(&c), hann_allocation(&c), edges_allocation(&c)] {
            let prof = t.profile(p.as_slice()).unwrap();
            let metric = psl_db(&prof).unwrap();
            let guarded = guarded_psl_db(&prof.magnitude, 4).unwrap();
            assert!(guarded >= metric - 1e-12);
        }
    }

    #[test]
    fn constrained_rejects_positive_bound() {
        let c = OfdmConfig::new(8, 1.0, 1.0, 1.0, 4).unwrap();
        let s = SolverSettings::for_config(&c);
        let ch = chan(&[1.0; 8], &c);
        let frontier = psl_min_allocation(&c, &s).unwrap();
        assert!(psl_constrained_capacity_with(&ch, &c, 1.0, &s, &frontier).is_err());
    }

    #[test]
    fn constrained_reports_infeasible_bounds() {
        let c = OfdmConfig::new(8, 1.0, 1.0, 1.0, 4).unwrap();
        let s = SolverSettings::for_config(&c);
        let ch = chan(&[3.0, 1.0, 2.0, 0.5, 1.0, 4.0, 1.0, 2.0], &c);
        let frontier = psl_min_allocation(&c, &s).unwrap();
        let err = psl_constrained_capacity_with(&ch, &c, frontier.psl_db - 1.0, &s, &frontier).unwrap_err();
        assert!(matches!(err, Error::Infeasible { .. }));
    }
}
