//! Uplink association, receive-branch sets and the closed-loop power-control
//! fixed point.
//!
//! Each mobile associates with the sector whose pilot it hears strongest and
//! is then received on every branch of that sector: the sector's own antenna
//! plus any green antenna attached to it. Powers follow the multiplicative
//! update `p ← clamp(p·γ/SINR(p))`, evaluated Jacobi-style so the result
//! never depends on the order in which mobiles are visited.
//!
//! Interference at a branch excludes the mobile itself. It is accumulated
//! from prefix and suffix sums rather than `total − own`, so every quantity
//! is a sum of non-negative terms and the update stays monotone in floating
//! point, not only on paper.

use serde::{Deserialize, Serialize};

use crate::propagation::LinkGainMatrix;
use crate::scenario::{Combining, MobileStation, Scenario};

/// A pinned mobile is in outage when it misses its target by more than this.
pub const OUTAGE_MARGIN_DB: f64 = 0.5;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Association {
    /// Serving sector index per mobile.
    pub serving: Vec<usize>,
    /// Downlink pilot power received from the serving sector, dBm.
    pub serving_dl_dbm: Vec<f64>,
}

/// Strongest-downlink association; ties go to the lowest sector index.
pub fn associate(gm: &LinkGainMatrix) -> Association {
    let mut serving = Vec::with_capacity(gm.dl_rx_dbm.len());
    let mut serving_dl_dbm = Vec::with_capacity(gm.dl_rx_dbm.len());
    for row in &gm.dl_rx_dbm {
        let mut best = 0;
        for (k, v) in row.iter().enumerate().skip(1) {
            if *v > row[best] {
                best = k;
            }
        }
        serving.push(best);
        serving_dl_dbm.push(row[best]);
    }
    Association {
        serving,
        serving_dl_dbm,
    }
}

/// Receive points (matrix column indices) listening for each sector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchSet {
    pub per_sector: Vec<Vec<usize>>,
}

impl BranchSet {
    pub fn for_sector(&self, sector: usize) -> &[usize] {
        &self.per_sector[sector]
    }
}

/// Own antenna first, then attached greens in declaration order. A green
/// attached to several sectors appears in each of their sets.
pub fn receive_branches(s: &Scenario) -> BranchSet {
    let sectors = s.sector_count();
    let mut per_sector: Vec<Vec<usize>> = (0..sectors).map(|k| vec![k]).collect();
    for (g, green) in s.greens.iter().enumerate() {
        for id in &green.attached_sectors {
            if let Some(k) = s.sector_index(id) {
                if !per_sector[k].contains(&(sectors + g)) {
                    per_sector[k].push(sectors + g);
                }
            }
        }
    }
    BranchSet { per_sector }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLimits {
    pub min_dbm: f64,
    pub max_dbm: f64,
}

impl PowerLimits {
    pub fn min_mw(&self) -> f64 {
        db_to_linear(self.min_dbm)
    }

    pub fn max_mw(&self) -> f64 {
        db_to_linear(self.max_dbm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stop once no mobile's power moved by this much in one iteration.
    pub tolerance_db: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance_db: 1e-11,
            max_iterations: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerControlResult {
    pub tx_power_dbm: Vec<f64>,
    pub sinr_db: Vec<f64>,
    pub outage: Vec<bool>,
    pub iterations: usize,
    pub converged: bool,
}

/// A fully linearized snapshot: everything the fixed-point iteration reads.
#[derive(Debug, Clone)]
pub struct PowerControlProblem {
    points: usize,
    /// Row-major `[ms][receive point]`, linear.
    gain: Vec<f64>,
    noise_mw: Vec<f64>,
    branches: Vec<Vec<usize>>,
    targets_db: Vec<f64>,
    targets: Vec<f64>,
    processing_gain: f64,
    limits: PowerLimits,
    combining: Combining,
}

impl PowerControlProblem {
    /// Builds a problem from raw tables.
    ///
    /// `gain_db[i][r]` is the uplink gain of mobile `i` at receive point `r`,
    /// `branches[i]` the receive points combined for mobile `i`.
    pub fn from_parts(
        gain_db: &[Vec<f64>],
        noise_dbm: &[f64],
        branches: Vec<Vec<usize>>,
        targets_db: Vec<f64>,
        limits: PowerLimits,
        processing_gain_db: f64,
        combining: Combining,
    ) -> Self {
        let points = noise_dbm.len();
        assert_eq!(gain_db.len(), branches.len(), "one branch list per mobile");
        assert_eq!(gain_db.len(), targets_db.len(), "one target per mobile");
        let mut gain = Vec::with_capacity(gain_db.len() * points);
        for row in gain_db {
            assert_eq!(
                row.len(),
                points,
                "gain row width must match receive points"
            );
            gain.extend(row.iter().map(|g| db_to_linear(*g)));
        }
        for b in &branches {
            assert!(!b.is_empty(), "every mobile needs at least one branch");
            assert!(b.iter().all(|r| *r < points), "branch index out of range");
        }
        Self {
            points,
            gain,
            noise_mw: noise_dbm.iter().map(|n| db_to_linear(*n)).collect(),
            branches,
            targets: targets_db.iter().map(|t| db_to_linear(*t)).collect(),
            targets_db,
            processing_gain: db_to_linear(processing_gain_db),
            limits,
            combining,
        }
    }

    pub fn new(
        gm: &LinkGainMatrix,
        assoc: &Association,
        branch_set: &BranchSet,
        targets_db: Vec<f64>,
        limits: PowerLimits,
        processing_gain_db: f64,
        combining: Combining,
    ) -> Self {
        let noise: Vec<f64> = gm.receive_points.iter().map(|rp| rp.noise_dbm).collect();
        let branches = assoc
            .serving
            .iter()
            .map(|k| branch_set.for_sector(*k).to_vec())
            .collect();
        Self::from_parts(
            &gm.ul_gain_db,
            &noise,
            branches,
            targets_db,
            limits,
            processing_gain_db,
            combining,
        )
    }

    pub fn from_scenario(
        s: &Scenario,
        mobiles: &[MobileStation],
        gm: &LinkGainMatrix,
        assoc: &Association,
        combining: Combining,
    ) -> Self {
        Self::new(
            gm,
            assoc,
            &receive_branches(s),
            mobiles.iter().map(|m| m.sinr_target_db).collect(),
            PowerLimits {
                min_dbm: s.radio.p_min_dbm,
                max_dbm: s.radio.p_max_dbm,
            },
            s.radio.processing_gain_db,
            combining,
        )
    }

    pub fn mobile_count(&self) -> usize {
        self.branches.len()
    }

    pub fn limits(&self) -> PowerLimits {
        self.limits
    }

    pub fn combining(&self) -> Combining {
        self.combining
    }

    pub fn with_combining(mut self, combining: Combining) -> Self {
        self.combining = combining;
        self
    }

    fn g(&self, ms: usize, rp: usize) -> f64 {
        self.gain[ms * self.points + rp]
    }

    /// Interference plus noise at every branch of every mobile, the mobile's
    /// own contribution excluded. Returned in the layout of `self.branches`.
    fn impairments(&self, powers: &[f64]) -> Vec<Vec<f64>> {
        let n = self.mobile_count();
        assert_eq!(powers.len(), n);
        let mut out: Vec<Vec<f64>> = self.branches.iter().map(|b| vec![0.0; b.len()]).collect();
        let mut suffix = vec![0.0; n + 1];
        for r in 0..self.points {
            for j in (0..n).rev() {
                suffix[j] = suffix[j + 1] + powers[j] * self.g(j, r);
            }
            let mut prefix = 0.0;
            for i in 0..n {
                for (slot, b) in self.branches[i].iter().enumerate() {
                    if *b == r {
                        out[i][slot] = (prefix + suffix[i + 1]) + self.noise_mw[r];
                    }
                }
                prefix += powers[i] * self.g(i, r);
            }
        }
        out
    }

    /// Combined SINR per milliwatt of the mobile's own power.
    fn unit_sinr(&self, ms: usize, impairment: &[f64]) -> f64 {
        let branches = &self.branches[ms];
        let combined = match self.combining {
            Combining::Mrc => branches
                .iter()
                .zip(impairment)
                .map(|(r, d)| self.g(ms, *r) / d)
                .sum::<f64>(),
            Combining::Selection => branches
                .iter()
                .zip(impairment)
                .map(|(r, d)| self.g(ms, *r) / d)
                .fold(0.0, f64::max),
            Combining::Egc => {
                let amplitude: f64 = branches.iter().map(|r| self.g(ms, *r).sqrt()).sum();
                amplitude * amplitude / impairment.iter().sum::<f64>()
            }
        };
        self.processing_gain * combined
    }

    /// Linear combined SINR of every mobile.
    pub fn sinrs(&self, powers: &[f64]) -> Vec<f64> {
        let imp = self.impairments(powers);
        (0..self.mobile_count())
            .map(|i| powers[i] * self.unit_sinr(i, &imp[i]))
            .collect()
    }

    /// Combined SINR of one mobile in dB.
    pub fn effective_sinr(&self, ms: usize, powers: &[f64]) -> f64 {
        let imp = self.impairments(powers);
        linear_to_db(powers[ms] * self.unit_sinr(ms, &imp[ms]))
    }

    /// The unclamped update `p·γ/SINR(p)`. The own power cancels, so it is
    /// evaluated as `γ / (SINR per mW)`.
    pub fn interference_map(&self, powers: &[f64]) -> Vec<f64> {
        let imp = self.impairments(powers);
        (0..self.mobile_count())
            .map(|i| self.targets[i] / self.unit_sinr(i, &imp[i]))
            .collect()
    }

    /// One Jacobi step of closed-loop power control, clamped to the limits.
    pub fn power_control_step(&self, powers: &[f64]) -> Vec<f64> {
        let (lo, hi) = (self.limits.min_mw(), self.limits.max_mw());
        self.interference_map(powers)
            .into_iter()
            .map(|p| p.clamp(lo, hi))
            .collect()
    }

    pub fn solve(&self, opts: &SolverOptions) -> PowerControlResult {
        self.solve_observed(opts, |_, _| {})
    }

    /// Like [`solve`](Self::solve), calling `observe(k, powers)` after every iteration.
    pub fn solve_observed(
        &self,
        opts: &SolverOptions,
        mut observe: impl FnMut(usize, &[f64]),
    ) -> PowerControlResult {
        let hi = self.limits.max_mw();
        let mut powers = vec![self.limits.min_mw(); self.mobile_count()];
        let mut iterations = 0;
        let mut converged = self.mobile_count() == 0;
        while !converged && iterations < opts.max_iterations {
            let next = self.power_control_step(&powers);
            iterations += 1;
            let change = next
                .iter()
                .zip(&powers)
                .map(|(a, b)| linear_to_db(a / b).abs())
                .fold(0.0, f64::max);
            powers = next;
            observe(iterations, &powers);
            converged = change < opts.tolerance_db;
        }

        let sinrs = self.sinrs(&powers);
        let sinr_db: Vec<f64> = sinrs.iter().map(|s| linear_to_db(*s)).collect();
        let outage = powers
            .iter()
            .zip(&sinr_db)
            .zip(&self.targets_db)
            .map(|((p, s), t)| *p >= hi && *s < t - OUTAGE_MARGIN_DB)
            .collect();
        let tx_power_dbm = powers
            .iter()
            .map(|p| linear_to_db(*p).clamp(self.limits.min_dbm, self.limits.max_dbm))
            .collect();
        PowerControlResult {
            tx_power_dbm,
            sinr_db,
            outage,
            iterations,
            converged,
        }
    }
}

/// Solves one snapshot with the default solver options.
pub fn solve_power_control(
    s: &Scenario,
    mobiles: &[MobileStation],
    gm: &LinkGainMatrix,
    assoc: &Association,
    combining: Combining,
) -> PowerControlResult {
    PowerControlProblem::from_scenario(s, mobiles, gm, assoc, combining)
        .solve(&SolverOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagation::{AntennaPattern, ReceivePoint, ReceivePointKind};
    use crate::scenario::{load_scenario, Point};
    use approx::assert_abs_diff_eq;

    const LIMITS: PowerLimits = PowerLimits {
        min_dbm: -50.0,
        max_dbm: 24.0,
    };

    fn sector_point(id: &str, k: usize) -> ReceivePoint {
        ReceivePoint {
            kind: ReceivePointKind::SectorAntenna,
            id: id.into(),
            position: Point::new(0.0, 0.0),
            azimuth_deg: 0.0,
            antenna: AntennaPattern::omni(0.0),
            sectors: vec![k],
            noise_dbm: -104.0,
        }
    }

    fn dl_only(dl: Vec<Vec<f64>>) -> LinkGainMatrix {
        let sectors = dl[0].len();
        LinkGainMatrix {
            ul_gain_db: dl.iter().map(|_| vec![-100.0; sectors]).collect(),
            dl_rx_dbm: dl,
            receive_points: (0..sectors)
                .map(|k| sector_point(&format!("s{k}"), k))
                .collect(),
            seed: 0,
        }
    }

    #[test]
    fn association_picks_strongest_pilot() {
        let a = associate(&dl_only(vec![vec![-90.0], vec![-60.0]]));
        assert_eq!(a.serving, vec![0, 0]);
        let a = associate(&dl_only(vec![vec![-70.0, -80.0], vec![-80.0, -70.0]]));
        assert_eq!(a.serving, vec![0, 1]);
        assert_eq!(a.serving_dl_dbm, vec![-70.0, -70.0]);
        // ties go to the lower index
        let a = associate(&dl_only(vec![vec![-75.0, -75.0, -80.0]]));
        assert_eq!(a.serving, vec![0]);
    }

    fn scenario_with_greens(greens: &str) -> Scenario {
        load_scenario(&format!(
            r#"{{
              "sites": [
                {{ "id": "A", "position": [0, 0], "sectors": [ {{ "id": "a" }} ] }},
                {{ "id": "B", "position": [800, 0], "sectors": [ {{ "id": "b", "azimuth_deg": 270 }} ] }}
              ],
              "greens": [ {greens} ],
              "clutter": {{ "bounds": {{ "min": [-2000, -2000], "max": [2000, 2000] }} }}
            }}"#
        ))
        .unwrap()
    }

    #[test]
    fn branch_sets_follow_attachment() {
        let s = scenario_with_greens("");
        assert_eq!(receive_branches(&s).per_sector, vec![vec![0], vec![1]]);

        let s = scenario_with_greens(
            r#"{ "id": "g", "position": [400, 0], "attached_sectors": ["a"] }"#,
        );
        assert_eq!(receive_branches(&s).per_sector, vec![vec![0, 2], vec![1]]);

        let s = scenario_with_greens(
            r#"{ "id": "g", "position": [400, 0], "attached_sectors": ["a", "b"] }"#,
        );
        assert_eq!(
            receive_branches(&s).per_sector,
            vec![vec![0, 2], vec![1, 2]]
        );
    }

    /// One mobile, two branches, both at exactly 0 dB SINR with zero interference.
    fn two_equal_branches(combining: Combining) -> PowerControlProblem {
        PowerControlProblem::from_parts(
            &[vec![-100.0, -100.0]],
            &[-100.0, -100.0],
            vec![vec![0, 1]],
            vec![0.0],
            LIMITS,
            0.0,
            combining,
        )
    }

    #[test]
    fn combining_rules_on_equal_branches() {
        let p = [1.0];
        assert_abs_diff_eq!(
            two_equal_branches(Combining::Mrc).effective_sinr(0, &p),
            3.010299956639812,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            two_equal_branches(Combining::Selection).effective_sinr(0, &p),
            0.0,
            epsilon = 1e-12
        );
        // (2·√S)² / 2N = 2 S/N
        assert_abs_diff_eq!(
            two_equal_branches(Combining::Egc).effective_sinr(0, &p),
            3.010299956639812,
            epsilon = 1e-12
        );
    }

    #[test]
    fn single_branch_rules_agree() {
        let gains = vec![vec![-95.0, -120.0], vec![-118.0, -97.0]];
        let branches = vec![vec![0], vec![1]];
        let powers = [0.3, 2.0];
        let values: Vec<f64> = [Combining::Mrc, Combining::Selection, Combining::Egc]
            .into_iter()
            .map(|c| {
                PowerControlProblem::from_parts(
                    &gains,
                    &[-104.0, -104.0],
                    branches.clone(),
                    vec![0.0, 0.0],
                    LIMITS,
                    0.0,
                    c,
                )
                .effective_sinr(0, &powers)
            })
            .collect();
        assert_eq!(values[0], values[1]);
        assert_eq!(values[0], values[2]);
    }

    fn single(target_db: f64) -> PowerControlProblem {
        PowerControlProblem::from_parts(
            &[vec![-100.0]],
            &[-104.0],
            vec![vec![0]],
            vec![target_db],
            LIMITS,
            0.0,
            Combining::Mrc,
        )
    }

    #[test]
    fn step_keeps_power_at_target() {
        // SINR at p = 0 dBm is 4 dB
        let next = single(4.0).power_control_step(&[1.0]);
        assert_abs_diff_eq!(linear_to_db(next[0]), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn step_raises_by_the_shortfall() {
        let next = single(7.0).power_control_step(&[1.0]);
        assert_abs_diff_eq!(linear_to_db(next[0]), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn step_clamps_to_the_maximum() {
        // needs +30 dBm
        let next = single(34.0).power_control_step(&[1.0]);
        assert_eq!(next[0], LIMITS.max_mw());
    }

    #[test]
    fn single_mobile_closed_form() {
        let r = single(0.0).solve(&SolverOptions::default());
        assert!(r.converged);
        assert_abs_diff_eq!(r.tx_power_dbm[0], -4.0, epsilon = 1e-6);
        assert_abs_diff_eq!(r.sinr_db[0], 0.0, epsilon = 1e-6);
        assert!(!r.outage[0]);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let opts = SolverOptions {
            tolerance_db: 0.0,
            max_iterations: 5,
        };
        let r = single(0.0).solve(&opts);
        assert_eq!(r.iterations, 5);
        assert!(!r.converged);
    }

    #[test]
    fn symmetric_pair_closed_form() {
        let p = PowerControlProblem::from_parts(
            &[vec![-100.0, -110.0], vec![-110.0, -100.0]],
            &[-104.0, -104.0],
            vec![vec![0], vec![1]],
            vec![0.0, 0.0],
            LIMITS,
            0.0,
            Combining::Mrc,
        );
        let r = p.solve(&SolverOptions::default());
        let expected = linear_to_db(db_to_linear(-104.0) / (1e-10 - 1e-11));
        for v in &r.tx_power_dbm {
            assert_abs_diff_eq!(*v, expected, epsilon = 1e-6);
        }
        assert_abs_diff_eq!(expected, -3.54, epsilon = 0.005);
    }

    #[test]
    fn infeasible_pair_pins_and_flags_outage() {
        let p = PowerControlProblem::from_parts(
            &[vec![-125.0, -125.0], vec![-125.0, -125.0]],
            &[-104.0, -104.0],
            vec![vec![0], vec![1]],
            vec![0.0, 0.0],
            LIMITS,
            0.0,
            Combining::Mrc,
        );
        let r = p.solve(&SolverOptions::default());
        assert!(r.converged);
        assert_eq!(r.tx_power_dbm, vec![24.0, 24.0]);
        assert_eq!(r.outage, vec![true, true]);
        assert!(r.sinr_db.iter().all(|s| *s < -0.5));
    }
}
