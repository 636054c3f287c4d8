//! Monte Carlo snapshot campaigns, single and paired.
//!
//! Snapshot `k` of a campaign seeded with `m` uses the seed
//! `derive_seed(m, "snapshot/k")` for both the drop and the shadowing, so a
//! baseline and a green scenario that differ only in their `greens` list see
//! the same users on the same channels. Snapshots run on the ambient rayon
//! pool and are merged in index order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{
    compare_runs, filter_population, ComparisonReport, MetricsError, PopulationFilter, RunSummary,
};
use crate::powerctl::{
    associate, Association, PowerControlProblem, PowerControlResult, SolverOptions,
};
use crate::propagation::{build_gain_matrix, LinkGainMatrix};
use crate::scenario::{drop_mobiles, Combining, MobileStation, Scenario, ScenarioError};
use crate::seed::snapshot_seed;

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("pairing violated: {0}")]
    Pairing(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub seed: u64,
    pub snapshots: usize,
    pub combining: Combining,
    pub filter: Option<PopulationFilter>,
    pub target_dbm: f64,
    pub solver: SolverOptions,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            snapshots: 10,
            combining: Combining::Mrc,
            filter: None,
            target_dbm: 4.0,
            solver: SolverOptions::default(),
        }
    }
}

/// One drop with its channels and solved powers.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub seed: u64,
    pub mobiles: Vec<MobileStation>,
    pub gains: LinkGainMatrix,
    pub association: Association,
    pub result: PowerControlResult,
}

pub fn run_snapshot(
    s: &Scenario,
    seed: u64,
    combining: Combining,
    solver: &SolverOptions,
) -> Result<Snapshot, ScenarioError> {
    let mobiles = drop_mobiles(s, seed)?;
    let gains = build_gain_matrix(s, &mobiles, seed);
    Ok(solve_snapshot(s, seed, mobiles, gains, combining, solver))
}

fn solve_snapshot(
    s: &Scenario,
    seed: u64,
    mobiles: Vec<MobileStation>,
    gains: LinkGainMatrix,
    combining: Combining,
    solver: &SolverOptions,
) -> Snapshot {
    let association = associate(&gains);
    let result = PowerControlProblem::from_scenario(s, &mobiles, &gains, &association, combining)
        .solve(solver);
    Snapshot {
        seed,
        mobiles,
        gains,
        association,
        result,
    }
}

#[derive(Debug, Clone)]
pub struct CampaignOutcome {
    /// Filtered transmit powers, snapshot by snapshot.
    pub samples: Vec<f64>,
    pub summary: RunSummary,
}

fn counts(results: &[&PowerControlResult]) -> (f64, usize) {
    let total: usize = results.iter().map(|r| r.outage.len()).sum();
    let outages: usize = results
        .iter()
        .map(|r| r.outage.iter().filter(|o| **o).count())
        .sum();
    let unconverged = results.iter().filter(|r| !r.converged).count();
    let fraction = if total == 0 {
        0.0
    } else {
        outages as f64 / total as f64
    };
    (fraction, unconverged)
}

pub fn run_campaign(s: &Scenario, cfg: &CampaignConfig) -> Result<CampaignOutcome, CampaignError> {
    let snapshots: Vec<Snapshot> = (0..cfg.snapshots)
        .into_par_iter()
        .map(|k| run_snapshot(s, snapshot_seed(cfg.seed, k), cfg.combining, &cfg.solver))
        .collect::<Result<_, _>>()?;
    let samples: Vec<f64> = snapshots
        .iter()
        .flat_map(|snap| filter_population(&snap.mobiles, &snap.result, cfg.filter.as_ref()))
        .collect();
    let mut summary = RunSummary::from_samples(&samples, cfg.target_dbm)?;
    let results: Vec<&PowerControlResult> = snapshots.iter().map(|s| &s.result).collect();
    (summary.outage_fraction, summary.unconverged_snapshots) = counts(&results);
    summary.snapshots = cfg.snapshots;
    summary.filter = cfg.filter;
    Ok(CampaignOutcome { samples, summary })
}

/// Checks that two scenarios differ in nothing but their green antennas.
pub fn check_pairing(baseline: &Scenario, green: &Scenario) -> Result<(), CampaignError> {
    let (a, b) = (baseline.without_greens(), green.without_greens());
    let mismatch = if a.sites != b.sites {
        Some("sites")
    } else if a.clutter != b.clutter {
        Some("clutter")
    } else if a.radio != b.radio {
        Some("radio")
    } else if a.traffic != b.traffic {
        Some("traffic")
    } else {
        None
    };
    match mismatch {
        Some(key) => Err(CampaignError::Pairing(format!(
            "scenarios differ in `{key}`, only `greens` may differ"
        ))),
        None => Ok(()),
    }
}

/// Both halves of one paired snapshot.
#[derive(Debug, Clone)]
pub struct PairedSnapshot {
    pub baseline: Snapshot,
    pub green: Snapshot,
}

/// Runs one paired snapshot and verifies that the drop and every baseline
/// channel are bit-identical in the green run.
pub fn run_paired_snapshot(
    baseline: &Scenario,
    green: &Scenario,
    seed: u64,
    combining: Combining,
    solver: &SolverOptions,
) -> Result<PairedSnapshot, CampaignError> {
    let base_mobiles = drop_mobiles(baseline, seed)?;
    let green_mobiles = drop_mobiles(green, seed)?;
    if base_mobiles != green_mobiles {
        return Err(CampaignError::Pairing(format!(
            "drops differ for seed {seed}"
        )));
    }
    let base_gains = build_gain_matrix(baseline, &base_mobiles, seed);
    let green_gains = build_gain_matrix(green, &green_mobiles, seed);
    if base_gains.dl_rx_dbm != green_gains.dl_rx_dbm {
        return Err(CampaignError::Pairing(format!(
            "downlink gains differ for seed {seed}"
        )));
    }
    for (b, rp) in base_gains.receive_points.iter().enumerate() {
        let g = green_gains
            .receive_points
            .iter()
            .position(|other| other.id == rp.id)
            .ok_or_else(|| {
                CampaignError::Pairing(format!("receive point `{}` missing in green run", rp.id))
            })?;
        let same = base_gains
            .ul_gain_db
            .iter()
            .zip(&green_gains.ul_gain_db)
            .all(|(x, y)| x[b].to_bits() == y[g].to_bits());
        if !same {
            return Err(CampaignError::Pairing(format!(
                "uplink gains at `{}` differ for seed {seed}",
                rp.id
            )));
        }
    }
    Ok(PairedSnapshot {
        baseline: solve_snapshot(baseline, seed, base_mobiles, base_gains, combining, solver),
        green: solve_snapshot(green, seed, green_mobiles, green_gains, combining, solver),
    })
}

#[derive(Debug, Clone)]
pub struct PairedOutcome {
    pub report: ComparisonReport,
    pub baseline: CampaignOutcome,
    pub green: CampaignOutcome,
}

pub fn run_paired(
    baseline: &Scenario,
    green: &Scenario,
    cfg: &CampaignConfig,
) -> Result<PairedOutcome, CampaignError> {
    check_pairing(baseline, green)?;
    let pairs: Vec<PairedSnapshot> = (0..cfg.snapshots)
        .into_par_iter()
        .map(|k| {
            run_paired_snapshot(
                baseline,
                green,
                snapshot_seed(cfg.seed, k),
                cfg.combining,
                &cfg.solver,
            )
        })
        .collect::<Result<_, _>>()?;

    let outcome =
        |pick: fn(&PairedSnapshot) -> &Snapshot| -> Result<CampaignOutcome, CampaignError> {
            let samples: Vec<f64> = pairs
                .iter()
                .map(pick)
                .flat_map(|snap| {
                    filter_population(&snap.mobiles, &snap.result, cfg.filter.as_ref())
                })
                .collect();
            let mut summary = RunSummary::from_samples(&samples, cfg.target_dbm)?;
            let results: Vec<&PowerControlResult> = pairs.iter().map(|p| &pick(p).result).collect();
            (summary.outage_fraction, summary.unconverged_snapshots) = counts(&results);
            summary.snapshots = cfg.snapshots;
            summary.filter = cfg.filter;
            Ok(CampaignOutcome { samples, summary })
        };
    let base = outcome(|p| &p.baseline)?;
    let grn = outcome(|p| &p.green)?;
    let mut report = compare_runs(&base.samples, &grn.samples, cfg.target_dbm)?;
    report.snapshots = cfg.snapshots;
    report.filter = cfg.filter;
    Ok(PairedOutcome {
        report,
        baseline: base,
        green: grn,
    })
}
