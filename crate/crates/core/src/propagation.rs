//! Channel gains between mobiles and receive points.
//!
//! Uplink gains cover every receive point (sector antennas first, then green
//! antennas); the downlink table only covers sectors since green antennas
//! never transmit. Shadowing comes from per-link labeled streams, so a matrix
//! built with an extra green antenna shares every pre-existing entry bit for bit.

use std::io::{self, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::scenario::{DlShadowingMode, MobileStation, PathLossModel, Point, Scenario, Violation};
use crate::seed::labeled_rng;

/// Near-field clamp applied before the log-distance law.
pub const MIN_DISTANCE_M: f64 = 10.0;

/// Mobile antenna gain.
pub const MS_ANTENNA_GAIN_DBI: f64 = 0.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AntennaKind {
    Omni,
    Sector,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AntennaPattern {
    pub kind: AntennaKind,
    pub gain_dbi: f64,
    #[serde(default = "default_theta_3db")]
    pub theta_3db_deg: f64,
    #[serde(default = "default_front_to_back")]
    pub front_to_back_db: f64,
}

fn default_theta_3db() -> f64 {
    65.0
}

fn default_front_to_back() -> f64 {
    20.0
}

impl AntennaPattern {
    pub fn omni(gain_dbi: f64) -> Self {
        Self {
            kind: AntennaKind::Omni,
            gain_dbi,
            theta_3db_deg: default_theta_3db(),
            front_to_back_db: default_front_to_back(),
        }
    }

    pub fn sector(gain_dbi: f64, theta_3db_deg: f64, front_to_back_db: f64) -> Self {
        Self {
            kind: AntennaKind::Sector,
            gain_dbi,
            theta_3db_deg,
            front_to_back_db,
        }
    }

    pub fn default_sector() -> Self {
        Self::sector(15.0, 65.0, 20.0)
    }

    pub fn default_green() -> Self {
        Self::omni(5.0)
    }

    pub(crate) fn check(&self, path: &str, out: &mut Vec<Violation>) {
        if !self.gain_dbi.is_finite() {
            out.push(Violation {
                path: format!("{path}.gain_dbi"),
                message: "gain must be finite".into(),
            });
        }
        if self.kind == AntennaKind::Sector {
            if !(self.theta_3db_deg > 0.0 && self.theta_3db_deg.is_finite()) {
                out.push(Violation {
                    path: format!("{path}.theta_3db_deg"),
                    message: "half-power beamwidth must be positive".into(),
                });
            }
            if !(self.front_to_back_db >= 0.0 && self.front_to_back_db.is_finite()) {
                out.push(Violation {
                    path: format!("{path}.front_to_back_db"),
                    message: "front-to-back ratio must be non-negative".into(),
                });
            }
        }
    }
}

/// Log-distance path loss with the near-field clamp.
pub fn path_loss(model: &PathLossModel, distance_m: f64) -> f64 {
    let d = distance_m.max(MIN_DISTANCE_M);
    model.pl0_db + 10.0 * model.exponent * (d / model.d0_m).log10()
}

/// Gain towards a bearing given in degrees off boresight.
pub fn antenna_gain(p: &AntennaPattern, bearing_deg: f64) -> f64 {
    match p.kind {
        AntennaKind::Omni => p.gain_dbi,
        AntennaKind::Sector => {
            let theta = wrap_degrees(bearing_deg);
            let attenuation = 12.0 * (theta / p.theta_3db_deg).powi(2);
            p.gain_dbi - attenuation.min(p.front_to_back_db)
        }
    }
}

/// Wraps an angle into (-180, 180].
fn wrap_degrees(a: f64) -> f64 {
    let r = (a + 180.0).rem_euclid(360.0) - 180.0;
    if r == -180.0 {
        180.0
    } else {
        r
    }
}

/// Compass bearing (clockwise from +y) of `to` seen from `from`.
fn compass_bearing(from: &Point, to: &Point) -> f64 {
    (to.x - from.x).atan2(to.y - from.y).to_degrees()
}

/// Zero-mean Gaussian shadowing in dB, determined by `(seed, link_label)`.
pub fn shadowing_sample(seed: u64, link_label: &str, sigma_db: f64) -> f64 {
    if sigma_db == 0.0 {
        return 0.0;
    }
    let z: f64 = labeled_rng(seed, link_label).sample(StandardNormal);
    sigma_db * z
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReceivePointKind {
    SectorAntenna,
    GreenAntenna,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceivePoint {
    pub kind: ReceivePointKind,
    pub id: String,
    pub position: Point,
    pub azimuth_deg: f64,
    pub antenna: AntennaPattern,
    /// Owning sector for a sector antenna; attached sectors for a green antenna.
    pub sectors: Vec<usize>,
    /// Thermal noise plus this branch's noise figure.
    pub noise_dbm: f64,
}

/// Every receive point in matrix column order: all sector antennas, then greens.
pub fn receive_points(s: &Scenario) -> Vec<ReceivePoint> {
    let mut out: Vec<ReceivePoint> = s
        .sectors()
        .enumerate()
        .map(|(index, (site, sector))| ReceivePoint {
            kind: ReceivePointKind::SectorAntenna,
            id: sector.id.clone(),
            position: site.position,
            azimuth_deg: sector.azimuth_deg,
            antenna: sector.antenna,
            sectors: vec![index],
            noise_dbm: s.radio.thermal_noise_dbm + sector.noise_figure_db,
        })
        .collect();
    out.extend(s.greens.iter().map(|g| {
        ReceivePoint {
            kind: ReceivePointKind::GreenAntenna,
            id: g.id.clone(),
            position: g.position,
            azimuth_deg: g.azimuth_deg,
            antenna: g.antenna,
            sectors: g
                .attached_sectors
                .iter()
                .filter_map(|id| s.sector_index(id))
                .collect(),
            noise_dbm: s.radio.thermal_noise_dbm + g.noise_figure_db,
        }
    }));
    out
}

fn ul_label(ms: &MobileStation, rp: &ReceivePoint) -> String {
    format!("ul/ms{}/{}", ms.id, rp.id)
}

fn dl_label(ms: &MobileStation, rp: &ReceivePoint) -> String {
    format!("dl/ms{}/{}", ms.id, rp.id)
}

/// Channel gain without shadowing: path loss, both antennas and penetration.
fn deterministic_gain(ms: &MobileStation, rp: &ReceivePoint, s: &Scenario) -> f64 {
    let class = s.clutter.class_at(&ms.position);
    let pl = path_loss(
        s.radio.pathloss.get(class),
        ms.position.distance(&rp.position),
    );
    let off_boresight = compass_bearing(&rp.position, &ms.position) - rp.azimuth_deg;
    let penetration = match (ms.indoor, ms.building) {
        (true, Some(b)) => s.clutter.buildings[b].penetration_loss_db,
        _ => 0.0,
    };
    -pl + MS_ANTENNA_GAIN_DBI + antenna_gain(&rp.antenna, off_boresight) - penetration
}

fn sigma_for(ms: &MobileStation, s: &Scenario) -> f64 {
    *s.radio
        .shadowing_sigma_db
        .get(s.clutter.class_at(&ms.position))
}

/// Uplink channel gain in dB from `ms` to `rp`.
pub fn link_gain(ms: &MobileStation, rp: &ReceivePoint, s: &Scenario, seed: u64) -> f64 {
    deterministic_gain(ms, rp, s) + shadowing_sample(seed, &ul_label(ms, rp), sigma_for(ms, s))
}

/// Downlink channel gain in dB from the sector behind `rp` to `ms`.
pub fn dl_link_gain(ms: &MobileStation, rp: &ReceivePoint, s: &Scenario, seed: u64) -> f64 {
    let label = match s.radio.dl_shadowing_mode {
        DlShadowingMode::Independent => dl_label(ms, rp),
        DlShadowingMode::Reciprocal => ul_label(ms, rp),
    };
    deterministic_gain(ms, rp, s) + shadowing_sample(seed, &label, sigma_for(ms, s))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkGainMatrix {
    /// `[ms][receive point]`, dB.
    pub ul_gain_db: Vec<Vec<f64>>,
    /// `[ms][sector]`, dBm received from each sector's pilot.
    pub dl_rx_dbm: Vec<Vec<f64>>,
    pub receive_points: Vec<ReceivePoint>,
    pub seed: u64,
}

impl LinkGainMatrix {
    pub fn mobile_count(&self) -> usize {
        self.ul_gain_db.len()
    }

    pub fn receive_point_count(&self) -> usize {
        self.receive_points.len()
    }

    pub fn sector_count(&self) -> usize {
        self.receive_points
            .iter()
            .filter(|rp| rp.kind == ReceivePointKind::SectorAntenna)
            .count()
    }

    /// Writes `ms,direction,point,value_db` rows; downlink values are received pilot power.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "ms,direction,point,value_db")?;
        for (i, row) in self.ul_gain_db.iter().enumerate() {
            for (rp, g) in self.receive_points.iter().zip(row) {
                writeln!(w, "{i},ul,{},{g:.6}", rp.id)?;
            }
        }
        for (i, row) in self.dl_rx_dbm.iter().enumerate() {
            for (rp, p) in self.receive_points.iter().zip(row) {
                writeln!(w, "{i},dl,{},{p:.6}", rp.id)?;
            }
        }
        Ok(())
    }
}

/// Fills the uplink and downlink tables for one drop.
pub fn build_gain_matrix(s: &Scenario, mobiles: &[MobileStation], seed: u64) -> LinkGainMatrix {
    let points = receive_points(s);
    let sectors = s.sector_count();
    let pilots: Vec<f64> = s.sectors().map(|(_, sector)| sector.tx_power_dbm).collect();
    let rows: Vec<(Vec<f64>, Vec<f64>)> = mobiles
        .par_iter()
        .map(|ms| {
            let ul = points.iter().map(|rp| link_gain(ms, rp, s, seed)).collect();
            let dl = points[..sectors]
                .iter()
                .zip(&pilots)
                .map(|(rp, pilot)| pilot + dl_link_gain(ms, rp, s, seed))
                .collect();
            (ul, dl)
        })
        .collect();
    let (ul_gain_db, dl_rx_dbm) = rows.into_iter().unzip();
    LinkGainMatrix {
        ul_gain_db,
        dl_rx_dbm,
        receive_points: points,
        seed,
    }
}
