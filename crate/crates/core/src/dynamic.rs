//! Dynamic choice between ISAC and communication-only operation.
//!
//! Starting from water-filling, the allocator checks the side-lobe and
//! accuracy constraints. If both fail it falls back to communication only.
//! If exactly one fails it blends water-filling toward the allocation that
//! is optimal for the failing metric (edges-only for accuracy, minimum-PSL
//! for side lobes) and searches the blend weight alpha for the smallest
//! value meeting every constraint, including the capacity-loss budget.

use std::sync::OnceLock;

use serde::Serialize;

use crate::allocators::{edges_allocation, psl_min_allocation, water_filling, SolverSettings};
use crate::error::{Error, Result};
use crate::metrics::{ChannelRealization, Reference, SensingReport};
use crate::model::{DelayTransform, OfdmConfig, PowerAllocation};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Thresholds {
    /// Upper bound on the peak side-lobe level, dB.
    pub gamma_psl_db: f64,
    /// Lower bound on the accuracy proxy.
    pub gamma_acc: f64,
    /// Upper bound on the capacity-loss ratio.
    pub gamma_c: f64,
    /// Resolution of the blend-weight search.
    pub epsilon: f64,
    /// Push toward edges-only as far as the other constraints allow, even
    /// when water-filling already meets the accuracy bound.
    pub improve_accuracy_when_satisfied: bool,
}

impl Thresholds {
    pub fn new(gamma_psl_db: f64, gamma_acc: f64, gamma_c: f64) -> Self {
        Self {
            gamma_psl_db,
            gamma_acc,
            gamma_c,
            epsilon: 0.01,
            improve_accuracy_when_satisfied: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(self.gamma_psl_db <= 0.0) {
            return bad("gamma_psl_db must be <= 0");
        }
        if !(self.gamma_acc > 0.0) {
            return bad("gamma_acc must be positive");
        }
        if !(self.gamma_c > 0.0 && self.gamma_c < 1.0) {
            return bad("gamma_c must lie in (0, 1)");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad("epsilon must lie in (0, 1)");
        }
        Ok(())
    }
}

/// What "accurate enough" means for a candidate allocation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum AccuracyCriterion {
    /// Accuracy proxy at least this large.
    Proxy { min: f64 },
    /// 3-dB main-lobe width at most this many bins.
    MainLobeWidth { max_bins: f64 },
}

impl AccuracyCriterion {
    pub fn holds(&self, report: &SensingReport) -> bool {
        match *self {
            AccuracyCriterion::Proxy { min } => report.accuracy_proxy >= min,
            AccuracyCriterion::MainLobeWidth { max_bins } => report.mlw_bins <= max_bins,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Mode {
    #[serde(rename = "isac")]
    Isac,
    #[serde(rename = "comm_only")]
    CommOnly,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Isac => "isac",
            Mode::CommOnly => "comm_only",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    BothViolated,
    BlendTowardEdges,
    BlendTowardPslOpt,
    WfAlreadyFeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecisionOutcome {
    pub mode: Mode,
    pub allocation: PowerAllocation,
    pub alpha: f64,
    pub branch: Branch,
    /// Metrics of `allocation`, losses measured against water-filling.
    pub report: SensingReport,
    /// Whether `allocation` meets all three sensing/capacity constraints.
    pub feasible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchResult {
    pub alpha: f64,
    pub found: bool,
}

impl SearchResult {
    const NOT_FOUND: Self = Self {
        alpha: 0.0,
        found: false,
    };

    fn at(alpha: f64) -> Self {
        Self { alpha, found: true }
    }
}

/// Entry-wise convex combination `(1 - alpha) * base + alpha * target`.
pub fn blend(base: &PowerAllocation, target: &PowerAllocation, alpha: f64) -> Result<PowerAllocation> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside [0, 1]")));
    }
    base.check_len(target.len())?;
    if alpha == 0.0 {
        return Ok(base.clone());
    }
    if alpha == 1.0 {
        return Ok(target.clone());
    }
    let p = base
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(b, t)| (1.0 - alpha) * b + alpha * t)
        .collect();
    Ok(PowerAllocation::from_raw(p))
}

/// Constraint status of one candidate allocation.
#[derive(Debug, Clone, Copy)]
struct Checks {
    psl: bool,
    accuracy: bool,
    capacity: bool,
}

impl Checks {
    fn all(&self) -> bool {
        self.psl && self.accuracy && self.capacity
    }
}

/// Evaluates blends between water-filling and one sensing-optimal endpoint.
struct BlendLine<'a> {
    cfg: &'a OfdmConfig,
    chan: &'a ChannelRealization,
    transform: DelayTransform,
    base: &'a PowerAllocation,
    target: &'a PowerAllocation,
    reference: Reference,
    th: &'a Thresholds,
    criterion: AccuracyCriterion,
}

impl<'a> BlendLine<'a> {
    #[allow(clippy::too_many_arguments)]
    fn new(
        cfg: &'a OfdmConfig,
        chan: &'a ChannelRealization,
        base: &'a PowerAllocation,
        target: &'a PowerAllocation,
        reference: Reference,
        th: &'a Thresholds,
        criterion: AccuracyCriterion,
    ) -> Result<Self> {
        base.check_len(cfg.k)?;
        target.check_len(cfg.k)?;
        Ok(Self {
            cfg,
            chan,
            transform: DelayTransform::new(cfg),
            base,
            target,
            reference,
            th,
            criterion,
        })
    }

    fn report(&self, alpha: f64) -> Result<(PowerAllocation, SensingReport)> {
        let p = blend(self.base, self.target, alpha)?;
        let profile = self.transform.profile(p.as_slice())?;
        let report = SensingReport::from_profile(self.cfg, self.chan, &p, &profile)?.against(&self.reference)?;
        Ok((p, report))
    }

    fn checks(&self, alpha: f64) -> Result<Checks> {
        let (_, r) = self.report(alpha)?;
        Ok(check_report(&r, self.th, self.criterion))
    }

    fn alpha_grid(&self) -> impl Iterator<Item = f64> {
        let eps = self.th.epsilon;
        let steps = (1.0 / eps).ceil() as usize;
        (0..=steps).map(move |i| (i as f64 * eps).min(1.0))
    }

    /// Smallest alpha meeting every constraint.
    ///
    /// `primary` is the constraint the blend is meant to repair. When it is
    /// monotone along the line (false, then true) its threshold is bisected
    /// to width epsilon and the remaining constraints are checked from there
    /// forward; capacity loss only grows with alpha, so the scan stops as
    /// soon as it is exceeded. Otherwise the whole epsilon grid is scanned.
    fn smallest_feasible(&self, primary: fn(&Checks) -> bool, monotone: bool) -> Result<SearchResult> {
        if self.checks(0.0)?.all() {
            return Ok(SearchResult::at(0.0));
        }
        if !monotone {
            for alpha in self.alpha_grid() {
                if self.checks(alpha)?.all() {
                    return Ok(SearchResult::at(alpha));
                }
            }
            return Ok(SearchResult::NOT_FOUND);
        }
        if !primary(&self.checks(1.0)?) {
            return Ok(SearchResult::NOT_FOUND);
        }
        let (mut left, mut right) = (0.0f64, 1.0f64);
        while right - left > self.th.epsilon {
            let mid = left + (right - left) / 2.0;
            if primary(&self.checks(mid)?) {
                right = mid;
            } else {
                left = mid;
            }
        }
        let mut alpha = right;
        loop {
            let c = self.checks(alpha)?;
            if c.all() {
                return Ok(SearchResult::at(alpha));
            }
            if !c.capacity || alpha >= 1.0 {
                return Ok(SearchResult::NOT_FOUND);
            }
            alpha = (alpha + self.th.epsilon).min(1.0);
        }
    }

    /// Largest alpha meeting every constraint, assuming the feasible set is
    /// an interval starting at alpha = 0.
    fn largest_feasible(&self) -> Result<SearchResult> {
        if !self.checks(0.0)?.all() {
            return Ok(SearchResult::NOT_FOUND);
        }
        if self.checks(1.0)?.all() {
            return Ok(SearchResult::at(1.0));
        }
        let (mut left, mut right) = (0.0f64, 1.0f64);
        while right - left > self.th.epsilon {
            let mid = left + (right - left) / 2.0;
            if self.checks(mid)?.all() {
                left = mid;
            } else {
                right = mid;
            }
        }
        Ok(SearchResult::at(left))
    }

    /// Whether `metric` along a 32-point coarse grid never moves against
    /// `decreasing`'s direction.
    fn probe_monotone(&self, metric: fn(&SensingReport) -> f64, decreasing: bool) -> Result<bool> {
        const PROBES: usize = 32;
        let mut prev: Option<f64> = None;
        for i in 0..PROBES {
            let alpha = i as f64 / (PROBES - 1) as f64;
            let v = metric(&self.report(alpha)?.1);
            if let Some(pv) = prev {
                let tol = 1e-9 * pv.abs().max(1.0);
                let against = if decreasing { v > pv + tol } else { v < pv - tol };
                if against {
                    return Ok(false);
                }
            }
            prev = Some(v);
        }
        Ok(true)
    }
}

fn check_report(r: &SensingReport, th: &Thresholds, criterion: AccuracyCriterion) -> Checks {
    Checks {
        psl: r.psl_db <= th.gamma_psl_db,
        accuracy: criterion.holds(r),
        capacity: r.capacity_loss <= th.gamma_c,
    }
}

fn search_toward_edges(line: &BlendLine<'_>, improve: bool) -> Result<SearchResult> {
    if improve && line.checks(0.0)?.all() {
        return line.largest_feasible();
    }
    let monotone = match line.criterion {
        // The proxy is linear in alpha.
        AccuracyCriterion::Proxy { .. } => true,
        AccuracyCriterion::MainLobeWidth { .. } => line.probe_monotone(|r| r.mlw_bins, true)?,
    };
    line.smallest_feasible(|c| c.accuracy, monotone)
}

fn search_toward_psl_opt(line: &BlendLine<'_>) -> Result<SearchResult> {
    let monotone = line.probe_monotone(|r| r.psl_db, true)?;
    line.smallest_feasible(|c| c.psl, monotone)
}

fn wf_reference(cfg: &OfdmConfig, chan: &ChannelRealization, p_wf: &PowerAllocation) -> Result<Reference> {
    Ok(SensingReport::measure(cfg, chan, p_wf)?.reference())
}

/// Blend weight toward edges-only that repairs the accuracy constraint
/// while keeping the side-lobe and capacity-loss constraints.
pub fn binary_search_crb(
    p_wf: &PowerAllocation,
    p_edges: &PowerAllocation,
    chan: &ChannelRealization,
    cfg: &OfdmConfig,
    th: &Thresholds,
) -> Result<SearchResult> {
    th.validate()?;
    let reference = wf_reference(cfg, chan, p_wf)?;
    let criterion = AccuracyCriterion::Proxy { min: th.gamma_acc };
    let line = BlendLine::new(cfg, chan, p_wf, p_edges, reference, th, criterion)?;
    search_toward_edges(&line, th.improve_accuracy_when_satisfied)
}

/// Blend weight toward the minimum-PSL allocation that repairs the side-lobe
/// constraint while keeping the accuracy and capacity-loss constraints.
pub fn binary_search_psl(
    p_wf: &PowerAllocation,
    p_psl_opt: &PowerAllocation,
    chan: &ChannelRealization,
    cfg: &OfdmConfig,
    th: &Thresholds,
) -> Result<SearchResult> {
    th.validate()?;
    let reference = wf_reference(cfg, chan, p_wf)?;
    let criterion = AccuracyCriterion::Proxy { min: th.gamma_acc };
    let line = BlendLine::new(cfg, chan, p_wf, p_psl_opt, reference, th, criterion)?;
    search_toward_psl_opt(&line)
}

/// Channel-independent endpoints of the blend search, shared across many
/// channel realizations.
#[derive(Debug)]
pub struct DynamicAllocator {
    cfg: OfdmConfig,
    settings: SolverSettings,
    edges: PowerAllocation,
    psl_opt: OnceLock<PowerAllocation>,
}

impl DynamicAllocator {
    pub fn new(cfg: &OfdmConfig, settings: &SolverSettings) -> Result<Self> {
        cfg.validate()?;
        settings.validate()?;
        Ok(Self {
            cfg: cfg.clone(),
            settings: settings.clone(),
            edges: edges_allocation(cfg),
            psl_opt: OnceLock::new(),
        })
    }

    /// Uses a precomputed minimum-PSL allocation instead of solving for it.
    pub fn with_psl_opt(cfg: &OfdmConfig, settings: &SolverSettings, psl_opt: PowerAllocation) -> Result<Self> {
        psl_opt.check_len(cfg.k)?;
        let this = Self::new(cfg, settings)?;
        let _ = this.psl_opt.set(psl_opt);
        Ok(this)
    }

    pub fn config(&self) -> &OfdmConfig {
        &self.cfg
    }

    pub fn edges(&self) -> &PowerAllocation {
        &self.edges
    }

    pub fn psl_opt(&self) -> Result<&PowerAllocation> {
        if let Some(p) = self.psl_opt.get() {
            return Ok(p);
        }
        let solved = psl_min_allocation(&self.cfg, &self.settings)?.allocation;
        Ok(self.psl_opt.get_or_init(|| solved))
    }

    pub fn allocate(&self, chan: &ChannelRealization, th: &Thresholds) -> Result<DecisionOutcome> {
        self.allocate_with(chan, th, AccuracyCriterion::Proxy { min: th.gamma_acc })
    }

    pub fn allocate_with(
        &self,
        chan: &ChannelRealization,
        th: &Thresholds,
        criterion: AccuracyCriterion,
    ) -> Result<DecisionOutcome> {
        th.validate()?;
        let cfg = &self.cfg;
        let p_wf = water_filling(chan, cfg)?;
        let wf_report = SensingReport::measure(cfg, chan, &p_wf)?;
        let reference = wf_report.reference();
        let wf_report = wf_report.against(&reference)?;
        let wf_checks = check_report(&wf_report, th, criterion);

        let comm_only = |branch: Branch| DecisionOutcome {
            mode: Mode::CommOnly,
            allocation: p_wf.clone(),
            alpha: 0.0,
            branch,
            report: wf_report.clone(),
            feasible: wf_checks.all(),
        };

        if !wf_checks.psl && !wf_checks.accuracy {
            return Ok(comm_only(Branch::BothViolated));
        }

        let (branch, target, search) = if wf_checks.psl {
            if wf_checks.accuracy && !th.improve_accuracy_when_satisfied {
                return Ok(DecisionOutcome {
                    mode: Mode::Isac,
                    allocation: p_wf.clone(),
                    alpha: 0.0,
                    branch: Branch::WfAlreadyFeasible,
                    feasible: true,
                    report: wf_report,
                });
            }
            let line = BlendLine::new(cfg, chan, &p_wf, &self.edges, reference, th, criterion)?;
            let found = search_toward_edges(&line, th.improve_accuracy_when_satisfied)?;
            (Branch::BlendTowardEdges, &self.edges, found)
        } else {
            let target = self.psl_opt()?;
            let line = BlendLine::new(cfg, chan, &p_wf, target, reference, th, criterion)?;
            (Branch::BlendTowardPslOpt, target, search_toward_psl_opt(&line)?)
        };

        if !search.found {
            return Ok(comm_only(branch));
        }
        let allocation = blend(&p_wf, target, search.alpha)?;
        let report = SensingReport::measure(cfg, chan, &allocation)?.against(&reference)?;
        let feasible = check_report(&report, th, criterion).all();
        debug_assert!(feasible);
        Ok(DecisionOutcome {
            mode: Mode::Isac,
            allocation,
            alpha: search.alpha,
            branch,
            report,
            feasible,
        })
    }
}

/// Runs the dynamic allocation for one channel, solving for the minimum-PSL
/// endpoint with default solver settings when it is needed.
pub fn dynamic_allocate(chan: &ChannelRealization, cfg: &OfdmConfig, th: &Thresholds) -> Result<DecisionOutcome> {
    DynamicAllocator::new(cfg, &SolverSettings::for_config(cfg))?.allocate(chan, th)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pa(p: &[f64]) -> PowerAllocation {
        PowerAllocation::new(p.to_vec(), p.iter().sum()).unwrap()
    }

    #[test]
    fn blend_examples() {
        let a = pa(&[1.0, 0.0]);
        let b = pa(&[0.0, 1.0]);
        assert_eq!(blend(&a, &b, 0.0).unwrap(), a);
        assert_eq!(blend(&a, &b, 1.0).unwrap(), b);
        assert_eq!(blend(&a, &b, 0.5).unwrap().as_slice(), &[0.5, 0.5]);
        assert!(blend(&a, &b, 1.5).is_err());
        assert!(blend(&a, &b, -0.1).is_err());
        assert!(blend(&a, &pa(&[1.0]), 0.5).is_err());
    }

    #[test]
    fn threshold_validation() {
        assert!(Thresholds::new(-20.0, 10.0, 0.1).validate().is_ok());
        assert!(Thresholds::new(3.0, 10.0, 0.1).validate().is_err());
        assert!(Thresholds::new(-20.0, 0.0, 0.1).validate().is_err());
        assert!(Thresholds::new(-20.0, 10.0, 1.0).validate().is_err());
    }

    #[test]
    fn mode_display() {
        assert_eq!(Mode::Isac.to_string(), "isac");
        assert_eq!(Mode::CommOnly.to_string(), "comm_only");
    }
}
