//! Sweep drivers. Each returns structured results; `tables` flattens them
//! into the fixed output schemas.

use rayon::prelude::*;
use serde::Serialize;

use super::channel::generate_channel;
use super::config::ScenarioConfig;
use super::emit::{Cell, Table};
use crate::allocators::{
    edges_allocation, hann_allocation, psl_constrained_capacity_with, psl_min_allocation, water_filling,
    Solution,
};
use crate::dynamic::{blend, AccuracyCriterion, Branch, DecisionOutcome, DynamicAllocator, Mode, Thresholds};
use crate::error::{Error, Result};
use crate::metrics::{ChannelRealization, SensingReport};
use crate::model::{expected_range_profile, OfdmConfig, PowerAllocation, RangeProfile};
use crate::SPEED_OF_LIGHT;

/// Round-trip distance in meters covered by `bins` delay bins.
pub fn bins_to_meters(cfg: &OfdmConfig, bins: f64) -> f64 {
    SPEED_OF_LIGHT * bins * cfg.bin_duration() / 2.0
}

/// Mean power of the outer eighth on each side over the mean power of the
/// central quarter of the band.
pub fn edge_center_ratio(p: &PowerAllocation) -> f64 {
    let p = p.as_slice();
    let k = p.len();
    let edge_n = (k / 8).max(1);
    let center_n = (k / 4).max(1);
    let edge: f64 = p[..edge_n].iter().chain(&p[k - edge_n..]).sum::<f64>() / (2 * edge_n) as f64;
    let start = (k - center_n) / 2;
    let center: f64 = p[start..start + center_n].iter().sum::<f64>() / center_n as f64;
    edge / center
}

fn allocation_table(name: &str, p: &PowerAllocation, chan: &ChannelRealization) -> Table {
    let mut t = Table::new(name, &["k", "p_k", "h_abs2"]);
    for (k, (pk, h)) in p.as_slice().iter().zip(chan.h()).enumerate() {
        t.push(vec![k.into(), (*pk).into(), h.norm_sqr().into()]);
    }
    t
}

fn profile_table(name: &str, profile: &RangeProfile, cfg: &OfdmConfig, distance: bool) -> Table {
    let mut cols = vec!["n", "magnitude"];
    if distance {
        cols.push("distance_m");
    }
    let mut t = Table::new(name, &cols);
    for (n, m) in profile.magnitude.iter().enumerate() {
        let mut row: Vec<Cell> = vec![n.into(), (*m).into()];
        if distance {
            row.push(bins_to_meters(cfg, n as f64).into());
        }
        t.push(row);
    }
    t
}

fn tag(v: f64) -> String {
    format!("{v}")
}

/// The channel draw and its water-filling baseline, shared by every sweep.
#[derive(Debug, Clone)]
pub struct Baseline {
    pub cfg: OfdmConfig,
    pub channel: ChannelRealization,
    pub wf: PowerAllocation,
    pub wf_report: SensingReport,
}

impl Baseline {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        let cfg = config.ofdm_config()?;
        let channel = generate_channel(config)?;
        let wf = water_filling(&channel, &cfg)?;
        let report = SensingReport::measure(&cfg, &channel, &wf)?;
        let wf_report = report.clone().against(&report.reference())?;
        Ok(Self {
            cfg,
            channel,
            wf,
            wf_report,
        })
    }

    fn measure(&self, p: &PowerAllocation) -> Result<SensingReport> {
        SensingReport::measure(&self.cfg, &self.channel, p)?.against(&self.wf_report.reference())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PslPoint {
    pub gamma_psl_db: f64,
    /// False when the bound is tighter than the minimum achievable PSL; the
    /// row then carries the minimum-PSL allocation's metrics.
    pub feasible: bool,
    pub allocation: PowerAllocation,
    pub report: SensingReport,
}

#[derive(Debug, Clone)]
pub struct PslSweep {
    pub baseline: Baseline,
    pub frontier: Solution,
    pub points: Vec<PslPoint>,
}

pub fn run_psl_sweep(config: &ScenarioConfig) -> Result<PslSweep> {
    let baseline = Baseline::new(config)?;
    let settings = config.solver_settings()?;
    let frontier = psl_min_allocation(&baseline.cfg, &settings)?;
    let points = config
        .sweep
        .gamma_psl_db
        .par_iter()
        .map(|&gamma| {
            let (allocation, feasible) =
                match psl_constrained_capacity_with(&baseline.channel, &baseline.cfg, gamma, &settings, &frontier) {
                    Ok(sol) => (sol.allocation, true),
                    Err(Error::Infeasible { .. }) => (frontier.allocation.clone(), false),
                    Err(e) => return Err(e),
                };
            Ok(PslPoint {
                gamma_psl_db: gamma,
                feasible,
                report: baseline.measure(&allocation)?,
                allocation,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PslSweep {
        baseline,
        frontier,
        points,
    })
}

impl PslSweep {
    /// The sweep table, then water-filling and per-bound allocation and
    /// profile dumps.
    pub fn tables(&self, distance: bool) -> Result<Vec<Table>> {
        let b = &self.baseline;
        let mut cols = vec![
            "gamma_psl_db",
            "feasible",
            "capacity_bits",
            "capacity_loss",
            "psl_db",
            "mlw_bins",
            "accuracy_loss_pct",
        ];
        if distance {
            cols.push("mlw_m");
        }
        let mut sweep = Table::new("psl_sweep", &cols);
        for p in &self.points {
            let r = &p.report;
            let mut row: Vec<Cell> = vec![
                p.gamma_psl_db.into(),
                p.feasible.into(),
                r.capacity_bits.into(),
                r.capacity_loss.into(),
                r.psl_db.into(),
                r.mlw_bins.into(),
                r.accuracy_loss_pct.into(),
            ];
            if distance {
                row.push(bins_to_meters(&b.cfg, r.mlw_bins).into());
            }
            sweep.push(row);
        }
        let mut out = vec![sweep];
        out.push(allocation_table("allocation_wf", &b.wf, &b.channel));
        out.push(profile_table(
            "profile_wf",
            &expected_range_profile(&b.cfg, &b.wf)?,
            &b.cfg,
            distance,
        ));
        for p in &self.points {
            let g = tag(p.gamma_psl_db);
            out.push(allocation_table(&format!("allocation_psl_{g}"), &p.allocation, &b.channel));
            let profile = expected_range_profile(&b.cfg, &p.allocation)?;
            out.push(profile_table(&format!("profile_psl_{g}"), &profile, &b.cfg, distance));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BlendDirection {
    TowardEdges,
    TowardPslOpt,
}

impl BlendDirection {
    pub fn as_str(&self) -> &'static str {
        match self {
            BlendDirection::TowardEdges => "toward_edges",
            BlendDirection::TowardPslOpt => "toward_psl_opt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaPoint {
    pub direction: BlendDirection,
    pub alpha: f64,
    pub capacity_ratio: f64,
    /// Side-lobe suppression gained over water-filling, in dB.
    pub suppression_db: f64,
    pub mlw_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct AlphaSweep {
    pub baseline: Baseline,
    pub points: Vec<AlphaPoint>,
}

/// Blends water-filling toward each requested endpoint over the alpha grid.
pub fn run_alpha_sweep(config: &ScenarioConfig, directions: &[BlendDirection]) -> Result<AlphaSweep> {
    let baseline = Baseline::new(config)?;
    let settings = config.solver_settings()?;
    let mut points = Vec::new();
    for &direction in directions {
        let target = match direction {
            BlendDirection::TowardEdges => edges_allocation(&baseline.cfg),
            BlendDirection::TowardPslOpt => psl_min_allocation(&baseline.cfg, &settings)?.allocation,
        };
        let base = &baseline.wf_report;
        let rows = config
            .sweep
            .alpha
            .par_iter()
            .map(|&alpha| {
                let r = baseline.measure(&blend(&baseline.wf, &target, alpha)?)?;
                Ok(AlphaPoint {
                    direction,
                    alpha,
                    capacity_ratio: r.capacity_bits / base.capacity_bits,
                    suppression_db: base.psl_db - r.psl_db,
                    mlw_ratio: r.mlw_bins / base.mlw_bins,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        points.extend(rows);
    }
    Ok(AlphaSweep { baseline, points })
}

impl AlphaSweep {
    pub fn tables(&self) -> Vec<Table> {
        let mut t = Table::new(
            "alpha_sweep",
            &["direction", "alpha", "capacity_ratio", "suppression_db", "mlw_ratio"],
        );
        for p in &self.points {
            t.push(vec![
                p.direction.as_str().into(),
                p.alpha.into(),
                p.capacity_ratio.into(),
                p.suppression_db.into(),
                p.mlw_ratio.into(),
            ]);
        }
        vec![t]
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SurfaceCell {
    pub gamma_psl_db: f64,
    pub mlw_bound_bins: f64,
    pub mode: Mode,
    pub branch: Branch,
    pub capacity_bits: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone)]
pub struct CapacitySurface {
    pub baseline: Baseline,
    /// Row-major: `cells[i * n_mlw + j]` is PSL bound `i`, MLW bound `j`.
    pub cells: Vec<SurfaceCell>,
    pub n_psl: usize,
    pub n_mlw: usize,
}

/// Runs the dynamic decision on every (PSL bound, MLW bound) pair. The
/// accuracy constraint is the 3-dB main-lobe width itself.
pub fn run_capacity_surface(config: &ScenarioConfig) -> Result<CapacitySurface> {
    let baseline = Baseline::new(config)?;
    let settings = config.solver_settings()?;
    let allocator = DynamicAllocator::new(&baseline.cfg, &settings)?;
    allocator.psl_opt()?;
    let psl = &config.sweep.surface_gamma_psl_db;
    let mlw = &config.sweep.surface_mlw_bins;
    let base_th = config.thresholds();
    let grid: Vec<(f64, f64)> = psl.iter().flat_map(|&g| mlw.iter().map(move |&m| (g, m))).collect();
    let cells = grid
        .par_iter()
        .map(|&(gamma_psl_db, mlw_bound_bins)| {
            let th = Thresholds {
                gamma_psl_db,
                ..base_th.clone()
            };
            let out: DecisionOutcome = allocator.allocate_with(
                &baseline.channel,
                &th,
                AccuracyCriterion::MainLobeWidth {
                    max_bins: mlw_bound_bins,
                },
            )?;
            Ok(SurfaceCell {
                gamma_psl_db,
                mlw_bound_bins,
                mode: out.mode,
                branch: out.branch,
                capacity_bits: out.report.capacity_bits,
                alpha: out.alpha,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CapacitySurface {
        baseline,
        cells,
        n_psl: psl.len(),
        n_mlw: mlw.len(),
    })
}

impl CapacitySurface {
    pub fn cell(&self, i: usize, j: usize) -> &SurfaceCell {
        &self.cells[i * self.n_mlw + j]
    }

    pub fn c_wf(&self) -> f64 {
        self.baseline.wf_report.capacity_bits
    }

    /// Loosening either bound never moves a cell down the ranking
    /// "communication-only, then ISAC by capacity". Within ISAC cells this is
    /// plain capacity monotonicity; `tol` is relative to `c_wf`.
    pub fn is_monotone(&self, tol: f64) -> bool {
        let slack = tol * self.c_wf();
        let le = |a: &SurfaceCell, b: &SurfaceCell| match (a.mode, b.mode) {
            (Mode::CommOnly, _) => true,
            (Mode::Isac, Mode::CommOnly) => false,
            (Mode::Isac, Mode::Isac) => a.capacity_bits <= b.capacity_bits + slack,
        };
        (0..self.n_psl).all(|i| {
            (0..self.n_mlw).all(|j| {
                (i + 1 >= self.n_psl || le(self.cell(i, j), self.cell(i + 1, j)))
                    && (j + 1 >= self.n_mlw || le(self.cell(i, j), self.cell(i, j + 1)))
            })
        })
    }

    pub fn tables(&self, distance: bool) -> Vec<Table> {
        let mut cols = vec!["gamma_psl_db", "mlw_bound_bins", "mode", "capacity_bits", "alpha"];
        if distance {
            cols.push("mlw_bound_m");
        }
        let mut t = Table::new("surface", &cols);
        for c in &self.cells {
            let mut row: Vec<Cell> = vec![
                c.gamma_psl_db.into(),
                c.mlw_bound_bins.into(),
                c.mode.to_string().into(),
                c.capacity_bits.into(),
                c.alpha.into(),
            ];
            if distance {
                row.push(bins_to_meters(&self.baseline.cfg, c.mlw_bound_bins).into());
            }
            t.push(row);
        }
        vec![t]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Wf,
    Uniform,
    Edges,
    Hann,
    PslMin,
    PslConstrained,
    Dynamic,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Wf => "wf",
            Scheme::Uniform => "uniform",
            Scheme::Edges => "edges",
            Scheme::Hann => "hann",
            Scheme::PslMin => "psl_min",
            Scheme::PslConstrained => "psl_constrained",
            Scheme::Dynamic => "dynamic",
        }
    }
}

#[derive(Debug, Clone)]
pub struct AllocationRun {
    pub baseline: Baseline,
    pub scheme: Scheme,
    /// Set for the dynamic scheme.
    pub mode: Option<Mode>,
    pub alpha: Option<f64>,
    pub allocation: PowerAllocation,
    pub report: SensingReport,
}

/// Computes one allocation for the configured channel. `gamma_psl_db`
/// overrides the configured PSL threshold for the constrained and dynamic
/// schemes.
pub fn run_allocate(config: &ScenarioConfig, scheme: Scheme, gamma_psl_db: Option<f64>) -> Result<AllocationRun> {
    let baseline = Baseline::new(config)?;
    let settings = config.solver_settings()?;
    let cfg = &baseline.cfg;
    let mut th = config.thresholds();
    if let Some(g) = gamma_psl_db {
        th.gamma_psl_db = g;
    }
    let mut mode = None;
    let mut alpha = None;
    let allocation = match scheme {
        Scheme::Wf => baseline.wf.clone(),
        Scheme::Uniform => PowerAllocation::uniform(cfg),
        Scheme::Edges => edges_allocation(cfg),
        Scheme::Hann => hann_allocation(cfg),
        Scheme::PslMin => psl_min_allocation(cfg, &settings)?.allocation,
        Scheme::PslConstrained => {
            let frontier = psl_min_allocation(cfg, &settings)?;
            psl_constrained_capacity_with(&baseline.channel, cfg, th.gamma_psl_db, &settings, &frontier)?.allocation
        }
        Scheme::Dynamic => {
            let out = DynamicAllocator::new(cfg, &settings)?.allocate(&baseline.channel, &th)?;
            mode = Some(out.mode);
            alpha = Some(out.alpha);
            out.allocation
        }
    };
    let report = baseline.measure(&allocation)?;
    Ok(AllocationRun {
        baseline,
        scheme,
        mode,
        alpha,
        allocation,
        report,
    })
}

impl AllocationRun {
    pub fn tables(&self, distance: bool) -> Result<Vec<Table>> {
        let b = &self.baseline;
        let mut summary = Table::new(
            "allocation_report",
            &[
                "scheme",
                "mode",
                "alpha",
                "capacity_bits",
                "capacity_loss",
                "psl_db",
                "mlw_bins",
                "accuracy_proxy",
                "accuracy_loss_pct",
            ],
        );
        let r = &self.report;
        summary.push(vec![
            self.scheme.as_str().into(),
            self.mode.map_or_else(|| "none".to_string(), |m| m.to_string()).into(),
            self.alpha.unwrap_or(0.0).into(),
            r.capacity_bits.into(),
            r.capacity_loss.into(),
            r.psl_db.into(),
            r.mlw_bins.into(),
            r.accuracy_proxy.into(),
            r.accuracy_loss_pct.into(),
        ]);
        let profile = expected_range_profile(&b.cfg, &self.allocation)?;
        Ok(vec![
            summary,
            allocation_table("allocation", &self.allocation, &b.channel),
            profile_table("profile", &profile, &b.cfg, distance),
        ])
    }
}

/// Channel dump: `k,h_re,h_im,h_abs2,gain_over_noise`.
pub fn channel_table(config: &ScenarioConfig) -> Result<Table> {
    let chan = generate_channel(config)?;
    let mut t = Table::new("channel", &["k", "h_re", "h_im", "h_abs2", "gain_over_noise"]);
    for (k, (h, g)) in chan.h().iter().zip(chan.gain_over_noise()).enumerate() {
        t.push(vec![k.into(), h.re.into(), h.im.into(), h.norm_sqr().into(), (*g).into()]);
    }
    Ok(t)
}
