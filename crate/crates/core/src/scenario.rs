//! Simulation worlds: transceiver sites, receive-only green antennas, the
//! clutter/building map, radio limits and traffic mix, plus seeded mobile drops.
//!
//! Scenarios are read from a JSON document with the top-level keys `sites`,
//! `greens`, `clutter`, `radio` and `traffic`. Unknown keys are rejected and
//! every omitted field takes the default documented on its type. See
//! `docs/scenario-schema.md` in the repository for the full schema.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::propagation::AntennaPattern;
use crate::seed::labeled_rng;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("invalid scenario: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("infeasible drop: {0}")]
    InfeasibleDrop(String),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// One broken invariant, located by a JSON-path-like string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl Violation {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Planar position in meters. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Point {
    fn from(v: [f64; 2]) -> Self {
        Point::new(v[0], v[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub sites: Vec<Site>,
    #[serde(default)]
    pub greens: Vec<GreenAntenna>,
    #[serde(default)]
    pub clutter: ClutterMap,
    #[serde(default)]
    pub radio: RadioParams,
    #[serde(default)]
    pub traffic: TrafficParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Site {
    pub id: String,
    pub position: Point,
    /// An empty list is expanded to three sectors at 0/120/240 degrees.
    #[serde(default)]
    pub sectors: Vec<Sector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sector {
    pub id: String,
    /// Boresight, degrees clockwise from north (+y).
    #[serde(default)]
    pub azimuth_deg: f64,
    #[serde(default = "AntennaPattern::default_sector")]
    pub antenna: AntennaPattern,
    /// Downlink pilot power.
    #[serde(default = "default_pilot_dbm")]
    pub tx_power_dbm: f64,
    #[serde(default)]
    pub noise_figure_db: f64,
}

fn default_pilot_dbm() -> f64 {
    43.0
}

/// Receive-only antenna forwarding what it hears to its attached sectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreenAntenna {
    pub id: String,
    pub position: Point,
    #[serde(default)]
    pub azimuth_deg: f64,
    #[serde(default = "AntennaPattern::default_green")]
    pub antenna: AntennaPattern,
    #[serde(default)]
    pub attached_sectors: Vec<String>,
    #[serde(default)]
    pub noise_figure_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClutterClass {
    Open,
    Suburban,
    Urban,
}

/// One value per clutter class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerClass<T> {
    pub open: T,
    pub suburban: T,
    pub urban: T,
}

impl<T> PerClass<T> {
    pub fn get(&self, class: ClutterClass) -> &T {
        match class {
            ClutterClass::Open => &self.open,
            ClutterClass::Suburban => &self.suburban,
            ClutterClass::Urban => &self.urban,
        }
    }

    fn iter(&self) -> impl Iterator<Item = (&'static str, &T)> {
        [
            ("open", &self.open),
            ("suburban", &self.suburban),
            ("urban", &self.urban),
        ]
        .into_iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub min: Point,
    pub max: Point,
}

impl Bounds {
    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }
}

/// Rectangle overriding the default clutter class on every cell whose center it covers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClutterRegion {
    pub min: Point,
    pub max: Point,
    pub class: ClutterClass,
}

/// Axis-aligned building footprint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Building {
    pub id: String,
    pub min: Point,
    pub max: Point,
    #[serde(default = "default_penetration_db")]
    pub penetration_loss_db: f64,
}

fn default_penetration_db() -> f64 {
    20.0
}

impl Building {
    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn area(&self) -> f64 {
        (self.max.x - self.min.x).max(0.0) * (self.max.y - self.min.y).max(0.0)
    }
}

/// Regular grid of identical buildings, expanded into `buildings` at load time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildingBlocks {
    pub id_prefix: String,
    pub min: Point,
    pub max: Point,
    /// Distance between consecutive footprint origins along x and y.
    pub pitch_m: [f64; 2],
    pub footprint_m: [f64; 2],
    #[serde(default = "default_penetration_db")]
    pub penetration_loss_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClutterMap {
    pub bounds: Bounds,
    #[serde(default = "default_cell_size")]
    pub cell_size_m: f64,
    #[serde(default = "default_clutter_class")]
    pub default_class: ClutterClass,
    #[serde(default)]
    pub regions: Vec<ClutterRegion>,
    #[serde(default)]
    pub buildings: Vec<Building>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub building_blocks: Vec<BuildingBlocks>,
    #[serde(skip)]
    cells: Vec<ClutterClass>,
    #[serde(skip)]
    columns: usize,
    #[serde(skip)]
    rows: usize,
}

fn default_cell_size() -> f64 {
    50.0
}

fn default_clutter_class() -> ClutterClass {
    ClutterClass::Urban
}

impl Default for ClutterMap {
    fn default() -> Self {
        Self {
            bounds: Bounds {
                min: Point::new(-5000.0, -5000.0),
                max: Point::new(5000.0, 5000.0),
            },
            cell_size_m: default_cell_size(),
            default_class: default_clutter_class(),
            regions: Vec::new(),
            buildings: Vec::new(),
            building_blocks: Vec::new(),
            cells: Vec::new(),
            columns: 0,
            rows: 0,
        }
    }
}

impl ClutterMap {
    /// Expands building blocks and rasterizes regions onto the cell grid.
    /// Called by [`load_scenario`]; call it again after editing a map in place.
    pub fn resolve(&mut self) {
        for block in std::mem::take(&mut self.building_blocks) {
            let [px, py] = block.pitch_m;
            let [w, h] = block.footprint_m;
            if !(px > 0.0 && py > 0.0 && w > 0.0 && h > 0.0) {
                self.building_blocks.push(block);
                continue;
            }
            let mut k = 0usize;
            let mut y = block.min.y;
            while y + h <= block.max.y + 1e-9 {
                let mut x = block.min.x;
                while x + w <= block.max.x + 1e-9 {
                    self.buildings.push(Building {
                        id: format!("{}{}", block.id_prefix, k),
                        min: Point::new(x, y),
                        max: Point::new(x + w, y + h),
                        penetration_loss_db: block.penetration_loss_db,
                    });
                    k += 1;
                    x += px;
                }
                y += py;
            }
        }

        if !(self.cell_size_m > 0.0) || !(self.bounds.width() > 0.0 && self.bounds.height() > 0.0) {
            self.cells.clear();
            self.columns = 0;
            self.rows = 0;
            return;
        }
        self.columns = (self.bounds.width() / self.cell_size_m).ceil().max(1.0) as usize;
        self.rows = (self.bounds.height() / self.cell_size_m).ceil().max(1.0) as usize;
        self.cells = vec![self.default_class; self.columns * self.rows];
        for row in 0..self.rows {
            for col in 0..self.columns {
                let center = Point::new(
                    self.bounds.min.x + (col as f64 + 0.5) * self.cell_size_m,
                    self.bounds.min.y + (row as f64 + 0.5) * self.cell_size_m,
                );
                // later regions win
                for region in &self.regions {
                    if center.x >= region.min.x
                        && center.x <= region.max.x
                        && center.y >= region.min.y
                        && center.y <= region.max.y
                    {
                        self.cells[row * self.columns + col] = region.class;
                    }
                }
            }
        }
    }

    /// Clutter class of the cell containing `p` (clamped to the grid edge).
    pub fn class_at(&self, p: &Point) -> ClutterClass {
        if self.cells.is_empty() {
            return self.default_class;
        }
        let col = ((p.x - self.bounds.min.x) / self.cell_size_m).floor();
        let row = ((p.y - self.bounds.min.y) / self.cell_size_m).floor();
        let col = (col.max(0.0) as usize).min(self.columns - 1);
        let row = (row.max(0.0) as usize).min(self.rows - 1);
        self.cells[row * self.columns + col]
    }

    /// Index of the first building whose footprint contains `p`.
    pub fn building_at(&self, p: &Point) -> Option<usize> {
        self.buildings.iter().position(|b| b.contains(p))
    }
}

/// Log-distance path-loss parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathLossModel {
    pub pl0_db: f64,
    pub d0_m: f64,
    pub exponent: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DlShadowingMode {
    /// Downlink shadowing drawn from its own stream.
    #[default]
    Independent,
    /// Downlink reuses the uplink draw of the same link.
    Reciprocal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combining {
    #[default]
    Mrc,
    #[serde(alias = "sel")]
    Selection,
    Egc,
}

impl Combining {
    pub fn label(&self) -> &'static str {
        match self {
            Combining::Mrc => "mrc",
            Combining::Selection => "sel",
            Combining::Egc => "egc",
        }
    }
}

impl std::str::FromStr for Combining {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mrc" => Ok(Combining::Mrc),
            "sel" | "selection" => Ok(Combining::Selection),
            "egc" => Ok(Combining::Egc),
            other => Err(format!(
                "unknown combining mode `{other}` (expected mrc, sel or egc)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioParams {
    pub p_min_dbm: f64,
    pub p_max_dbm: f64,
    /// Per receive branch; a branch's own noise figure is added on top.
    pub thermal_noise_dbm: f64,
    /// Despreading/coding gain applied to every combined SINR before it is
    /// compared with a service target.
    pub processing_gain_db: f64,
    pub pathloss: PerClass<PathLossModel>,
    pub shadowing_sigma_db: PerClass<f64>,
    pub dl_shadowing_mode: DlShadowingMode,
    pub combining: Combining,
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            p_min_dbm: -50.0,
            p_max_dbm: 24.0,
            thermal_noise_dbm: -104.0,
            processing_gain_db: 25.0,
            pathloss: PerClass {
                open: PathLossModel {
                    pl0_db: 110.0,
                    d0_m: 1000.0,
                    exponent: 3.3,
                },
                suburban: PathLossModel {
                    pl0_db: 120.0,
                    d0_m: 1000.0,
                    exponent: 3.5,
                },
                urban: PathLossModel {
                    pl0_db: 128.1,
                    d0_m: 1000.0,
                    exponent: 3.76,
                },
            },
            shadowing_sigma_db: PerClass {
                open: 5.0,
                suburban: 6.0,
                urban: 6.0,
            },
            dl_shadowing_mode: DlShadowingMode::Independent,
            combining: Combining::Mrc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Service {
    Voice,
    Data,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinrTargets {
    pub voice: f64,
    pub data: f64,
}

impl SinrTargets {
    pub fn for_service(&self, service: Service) -> f64 {
        match service {
            Service::Voice => self.voice,
            Service::Data => self.data,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrafficParams {
    pub mobiles_per_sector: u32,
    pub indoor_fraction: f64,
    pub voice_fraction: f64,
    pub sinr_target_db: SinrTargets,
}

impl Default for TrafficParams {
    fn default() -> Self {
        Self {
            mobiles_per_sector: 10,
            indoor_fraction: 0.0,
            voice_fraction: 0.5,
            sinr_target_db: SinrTargets {
                voice: 2.0,
                data: 8.0,
            },
        }
    }
}

/// A dropped user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobileStation {
    pub id: usize,
    pub position: Point,
    pub indoor: bool,
    /// Index into `clutter.buildings` when indoor.
    pub building: Option<usize>,
    pub service: Service,
    pub sinr_target_db: f64,
}

impl Scenario {
    /// All sectors in declaration order; the position in this list is the sector index.
    pub fn sectors(&self) -> impl Iterator<Item = (&Site, &Sector)> {
        self.sites
            .iter()
            .flat_map(|site| site.sectors.iter().map(move |sector| (site, sector)))
    }

    pub fn sector_count(&self) -> usize {
        self.sites.iter().map(|s| s.sectors.len()).sum()
    }

    pub fn sector_index(&self, id: &str) -> Option<usize> {
        self.sectors().position(|(_, s)| s.id == id)
    }

    /// Copy of the scenario with no green antennas.
    pub fn without_greens(&self) -> Scenario {
        Scenario {
            greens: Vec::new(),
            ..self.clone()
        }
    }

    /// Fills defaults that depend on other fields and rasterizes the clutter map.
    pub fn resolve(&mut self) {
        for site in &mut self.sites {
            if site.sectors.is_empty() {
                site.sectors = (0..3)
                    .map(|k| Sector {
                        id: format!("{}-{}", site.id, k),
                        azimuth_deg: 120.0 * k as f64,
                        antenna: AntennaPattern::default_sector(),
                        tx_power_dbm: default_pilot_dbm(),
                        noise_figure_db: 0.0,
                    })
                    .collect();
            }
        }
        self.clutter.resolve();
    }
}

/// Parses, resolves and validates a scenario document.
pub fn load_scenario(config_text: &str) -> Result<Scenario, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(config_text);
    let mut scenario: Scenario =
        serde_path_to_error::deserialize(de).map_err(|e| ScenarioError::Parse {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
    scenario.resolve();
    let violations = validate_scenario(&scenario);
    if violations.is_empty() {
        Ok(scenario)
    } else {
        Err(ScenarioError::Invalid(violations))
    }
}

pub fn load_scenario_file(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_scenario(&text)
}

/// Every invariant violation in `s`, in document order.
pub fn validate_scenario(s: &Scenario) -> Vec<Violation> {
    let mut out = Vec::new();
    let bounds = &s.clutter.bounds;

    if s.sites.is_empty() {
        out.push(Violation::new("sites", "at least one site is required"));
    }
    let mut sector_ids = HashSet::new();
    for (i, site) in s.sites.iter().enumerate() {
        let path = format!("sites[{i}]");
        if !site.position.is_finite() || !bounds.contains(&site.position) {
            out.push(Violation::new(
                format!("{path}.position"),
                format!("site `{}` lies outside the clutter bounds", site.id),
            ));
        }
        if site.sectors.is_empty() {
            out.push(Violation::new(
                format!("{path}.sectors"),
                format!("site `{}` has no sectors", site.id),
            ));
        }
        for (k, sector) in site.sectors.iter().enumerate() {
            let path = format!("{path}.sectors[{k}]");
            if !sector_ids.insert(sector.id.as_str()) {
                out.push(Violation::new(
                    format!("{path}.id"),
                    format!("duplicate sector id `{}`", sector.id),
                ));
            }
            if !(sector.azimuth_deg >= 0.0 && sector.azimuth_deg < 360.0) {
                out.push(Violation::new(
                    format!("{path}.azimuth_deg"),
                    format!("azimuth {} outside [0, 360)", sector.azimuth_deg),
                ));
            }
            if !sector.tx_power_dbm.is_finite() {
                out.push(Violation::new(
                    format!("{path}.tx_power_dbm"),
                    "pilot power must be finite",
                ));
            }
            if !sector.noise_figure_db.is_finite() {
                out.push(Violation::new(
                    format!("{path}.noise_figure_db"),
                    "noise figure must be finite",
                ));
            }
            sector.antenna.check(&format!("{path}.antenna"), &mut out);
        }
    }

    let mut green_ids = HashSet::new();
    for (i, green) in s.greens.iter().enumerate() {
        let path = format!("greens[{i}]");
        if !green_ids.insert(green.id.as_str()) || sector_ids.contains(green.id.as_str()) {
            out.push(Violation::new(
                format!("{path}.id"),
                format!("duplicate receive point id `{}`", green.id),
            ));
        }
        if !green.position.is_finite() || !bounds.contains(&green.position) {
            out.push(Violation::new(
                format!("{path}.position"),
                format!("green `{}` lies outside the clutter bounds", green.id),
            ));
        }
        if !(green.azimuth_deg >= 0.0 && green.azimuth_deg < 360.0) {
            out.push(Violation::new(
                format!("{path}.azimuth_deg"),
                format!("azimuth {} outside [0, 360)", green.azimuth_deg),
            ));
        }
        if green.attached_sectors.is_empty() {
            out.push(Violation::new(
                format!("{path}.attached_sectors"),
                format!("green `{}` is not attached to any sector", green.id),
            ));
        }
        for (k, id) in green.attached_sectors.iter().enumerate() {
            if !sector_ids.contains(id.as_str()) {
                out.push(Violation::new(
                    format!("{path}.attached_sectors[{k}]"),
                    format!("unknown sector `{id}`"),
                ));
            }
        }
        if !green.noise_figure_db.is_finite() {
            out.push(Violation::new(
                format!("{path}.noise_figure_db"),
                "noise figure must be finite",
            ));
        }
        green.antenna.check(&format!("{path}.antenna"), &mut out);
    }

    let clutter = &s.clutter;
    if !(bounds.min.is_finite()
        && bounds.max.is_finite()
        && bounds.width() > 0.0
        && bounds.height() > 0.0)
    {
        out.push(Violation::new(
            "clutter.bounds",
            "bounds must be a non-empty rectangle",
        ));
    }
    if !(clutter.cell_size_m > 0.0 && clutter.cell_size_m.is_finite()) {
        out.push(Violation::new(
            "clutter.cell_size_m",
            "cell size must be positive",
        ));
    }
    for (i, block) in clutter.building_blocks.iter().enumerate() {
        out.push(Violation::new(
            format!("clutter.building_blocks[{i}]"),
            format!(
                "block `{}` needs positive pitch and footprint",
                block.id_prefix
            ),
        ));
    }
    for (i, b) in clutter.buildings.iter().enumerate() {
        let path = format!("clutter.buildings[{i}]");
        let proper =
            b.min.is_finite() && b.max.is_finite() && b.min.x < b.max.x && b.min.y < b.max.y;
        if !proper || !bounds.contains(&b.min) || !bounds.contains(&b.max) {
            out.push(Violation::new(
                path.clone(),
                format!(
                    "building `{}` is not a rectangle inside the clutter bounds",
                    b.id
                ),
            ));
        }
        if !(b.penetration_loss_db >= 0.0 && b.penetration_loss_db.is_finite()) {
            out.push(Violation::new(
                format!("{path}.penetration_loss_db"),
                format!("building `{}` has negative penetration loss", b.id),
            ));
        }
    }

    let radio = &s.radio;
    if !(radio.p_min_dbm.is_finite()
        && radio.p_max_dbm.is_finite()
        && radio.p_min_dbm < radio.p_max_dbm)
    {
        out.push(Violation::new(
            "radio.p_max_dbm",
            "p_min_dbm must be below p_max_dbm",
        ));
    } else if radio.p_max_dbm - radio.p_min_dbm < 60.0 {
        out.push(Violation::new(
            "radio.p_min_dbm",
            format!(
                "power-control dynamic range {} dB is below 60 dB",
                radio.p_max_dbm - radio.p_min_dbm
            ),
        ));
    }
    if !radio.thermal_noise_dbm.is_finite() {
        out.push(Violation::new("radio.thermal_noise_dbm", "must be finite"));
    }
    if !radio.processing_gain_db.is_finite() {
        out.push(Violation::new("radio.processing_gain_db", "must be finite"));
    }
    for (class, model) in radio.pathloss.iter() {
        if !(model.exponent > 0.0 && model.exponent.is_finite()) {
            out.push(Violation::new(
                format!("radio.pathloss.{class}.exponent"),
                "exponent must be positive",
            ));
        }
        if !(model.d0_m > 0.0 && model.d0_m.is_finite()) {
            out.push(Violation::new(
                format!("radio.pathloss.{class}.d0_m"),
                "reference distance must be positive",
            ));
        }
        if !model.pl0_db.is_finite() {
            out.push(Violation::new(
                format!("radio.pathloss.{class}.pl0_db"),
                "must be finite",
            ));
        }
    }
    for (class, sigma) in radio.shadowing_sigma_db.iter() {
        if !(*sigma >= 0.0 && sigma.is_finite()) {
            out.push(Violation::new(
                format!("radio.shadowing_sigma_db.{class}"),
                "sigma must be non-negative",
            ));
        }
    }

    let traffic = &s.traffic;
    for (name, v) in [
        ("indoor_fraction", traffic.indoor_fraction),
        ("voice_fraction", traffic.voice_fraction),
    ] {
        if !(0.0..=1.0).contains(&v) {
            out.push(Violation::new(
                format!("traffic.{name}"),
                format!("{v} outside [0, 1]"),
            ));
        }
    }
    for (name, v) in [
        ("voice", traffic.sinr_target_db.voice),
        ("data", traffic.sinr_target_db.data),
    ] {
        if !v.is_finite() {
            out.push(Violation::new(
                format!("traffic.sinr_target_db.{name}"),
                "must be finite",
            ));
        }
    }
    out
}

const OUTDOOR_ATTEMPTS: usize = 10_000;

/// Drops `mobiles_per_sector × sectors` users. A pure function of `(s, seed)`.
///
/// Indoor users are uniform over the union of building footprints, outdoor
/// users uniform over the map outside every footprint.
pub fn drop_mobiles(s: &Scenario, seed: u64) -> Result<Vec<MobileStation>, ScenarioError> {
    let traffic = &s.traffic;
    let clutter = &s.clutter;
    let count = traffic.mobiles_per_sector as usize * s.sector_count();

    let areas: Vec<f64> = clutter.buildings.iter().map(Building::area).collect();
    let total_area: f64 = areas.iter().sum();
    if traffic.indoor_fraction > 0.0 && count > 0 && !(total_area > 0.0) {
        return Err(ScenarioError::InfeasibleDrop(format!(
            "indoor_fraction is {} but the map has no buildings",
            traffic.indoor_fraction
        )));
    }

    let mut rng = labeled_rng(seed, "drops");
    let bounds = &clutter.bounds;
    let mut mobiles = Vec::with_capacity(count);
    for id in 0..count {
        let indoor = rng.random::<f64>() < traffic.indoor_fraction;
        let service = if rng.random::<f64>() < traffic.voice_fraction {
            Service::Voice
        } else {
            Service::Data
        };
        let (position, building) = if indoor {
            let mut pick = rng.random::<f64>() * total_area;
            let mut index = areas.len() - 1;
            for (k, a) in areas.iter().enumerate() {
                if pick < *a {
                    index = k;
                    break;
                }
                pick -= a;
            }
            // zero-area footprints can only be picked through rounding at the tail
            while areas[index] <= 0.0 {
                index -= 1;
            }
            let b = &clutter.buildings[index];
            let p = Point::new(
                b.min.x + rng.random::<f64>() * (b.max.x - b.min.x),
                b.min.y + rng.random::<f64>() * (b.max.y - b.min.y),
            );
            (p, Some(index))
        } else {
            let mut found = None;
            for _ in 0..OUTDOOR_ATTEMPTS {
                let p = Point::new(
                    bounds.min.x + rng.random::<f64>() * bounds.width(),
                    bounds.min.y + rng.random::<f64>() * bounds.height(),
                );
                if clutter.building_at(&p).is_none() {
                    found = Some(p);
                    break;
                }
            }
            let p = found.ok_or_else(|| {
                ScenarioError::InfeasibleDrop("no outdoor area left outside buildings".into())
            })?;
            (p, None)
        };
        mobiles.push(MobileStation {
            id,
            position,
            indoor,
            building,
            service,
            sinr_target_db: traffic.sinr_target_db.for_service(service),
        });
    }
    Ok(mobiles)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{ "sites": [ { "id": "A", "position": [0, 0] } ] }"#;

    fn two_site_doc(extra_green: &str) -> String {
        format!(
            r#"{{
              "sites": [
                {{ "id": "A", "position": [0, 0], "sectors": [ {{ "id": "s1" }} ] }},
                {{ "id": "B", "position": [500, 0], "sectors": [ {{ "id": "s2", "azimuth_deg": 180 }} ] }}
              ],
              "greens": [ {extra_green} ],
              "clutter": {{
                "bounds": {{ "min": [-1000, -1000], "max": [1500, 1000] }},
                "buildings": [ {{ "id": "b0", "min": [100, 100], "max": [200, 160] }} ]
              }},
              "traffic": {{ "indoor_fraction": 0.3 }}
            }}"#
        )
    }

    #[test]
    fn minimal_document_gets_defaults() {
        let s = load_scenario(MINIMAL).unwrap();
        assert_eq!(s.sites.len(), 1);
        assert_eq!(s.sector_count(), 3);
        assert!(s.greens.is_empty());
        assert_eq!(s.radio.p_min_dbm, -50.0);
        assert_eq!(s.radio.p_max_dbm, 24.0);
        assert_eq!(s.traffic.mobiles_per_sector, 10);
        assert_eq!(s.traffic.sinr_target_db.voice, 2.0);
        assert_eq!(s.traffic.sinr_target_db.data, 8.0);
        assert!(validate_scenario(&s).is_empty());
    }

    #[test]
    fn default_power_limits_span_74_db() {
        let r = RadioParams::default();
        assert_eq!(r.p_max_dbm - r.p_min_dbm, 74.0);
        let doc = r#"{ "sites": [ { "id": "A", "position": [0, 0] } ],
                       "radio": { "p_min_dbm": -50, "p_max_dbm": 24 } }"#;
        assert!(load_scenario(doc).is_ok());
    }

    #[test]
    fn dangling_attachment_names_the_sector() {
        let green = r#"{ "id": "g1", "position": [250, 0], "attached_sectors": ["s9"] }"#;
        let err = load_scenario(&two_site_doc(green)).unwrap_err();
        let ScenarioError::Invalid(v) = &err else {
            panic!("expected validation error, got {err}");
        };
        assert_eq!(v.len(), 1);
        assert!(v[0].message.contains("s9"));
        assert_eq!(v[0].path, "greens[0].attached_sectors[0]");
    }

    #[test]
    fn unknown_keys_are_rejected_with_path() {
        let doc = r#"{ "sites": [ { "id": "A", "position": [0, 0], "hieght": 30 } ] }"#;
        match load_scenario(doc) {
            Err(ScenarioError::Parse { path, message }) => {
                assert_eq!(path, "sites[0].hieght");
                assert!(message.contains("hieght"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
        let doc = r#"{ "sites": [], "extra": 1 }"#;
        assert!(matches!(
            load_scenario(doc),
            Err(ScenarioError::Parse { .. })
        ));
    }

    #[test]
    fn malformed_document_is_a_parse_error() {
        assert!(matches!(
            load_scenario("{ \"sites\": [ "),
            Err(ScenarioError::Parse { .. })
        ));
    }

    #[test]
    fn building_outside_bounds_is_one_violation() {
        let mut s = load_scenario(&two_site_doc("")).unwrap();
        s.clutter.buildings.push(Building {
            id: "far".into(),
            min: Point::new(5000.0, 5000.0),
            max: Point::new(5100.0, 5100.0),
            penetration_loss_db: 10.0,
        });
        let v = validate_scenario(&s);
        assert_eq!(v.len(), 1);
        assert!(v[0].message.contains("far"));
    }

    #[test]
    fn green_without_attachment_is_one_violation() {
        let green = r#"{ "id": "g1", "position": [250, 0] }"#;
        let mut s = load_scenario(&two_site_doc("")).unwrap();
        let g: GreenAntenna = serde_json::from_str(green).unwrap();
        s.greens.push(g);
        let v = validate_scenario(&s);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].path, "greens[0].attached_sectors");
    }

    #[test]
    fn each_invariant_is_reported_alone() {
        let base = load_scenario(&two_site_doc(
            r#"{ "id": "g1", "position": [250, 0], "attached_sectors": ["s1", "s2"] }"#,
        ))
        .unwrap();
        assert!(validate_scenario(&base).is_empty());

        type Mutation = (&'static str, Box<dyn Fn(&mut Scenario)>);
        let mutations: Vec<Mutation> = vec![
            (
                "sites[1].position",
                Box::new(|s| s.sites[1].position = Point::new(9e3, 0.0)),
            ),
            (
                "sites[0].sectors[0].azimuth_deg",
                Box::new(|s| s.sites[0].sectors[0].azimuth_deg = 360.0),
            ),
            (
                "sites[0].sectors[0].tx_power_dbm",
                Box::new(|s| s.sites[0].sectors[0].tx_power_dbm = f64::NAN),
            ),
            (
                "greens[0].position",
                Box::new(|s| s.greens[0].position = Point::new(0.0, -2e3)),
            ),
            (
                "clutter.cell_size_m",
                Box::new(|s| s.clutter.cell_size_m = 0.0),
            ),
            (
                "clutter.buildings[0].penetration_loss_db",
                Box::new(|s| s.clutter.buildings[0].penetration_loss_db = -1.0),
            ),
            ("radio.p_max_dbm", Box::new(|s| s.radio.p_max_dbm = -60.0)),
            ("radio.p_min_dbm", Box::new(|s| s.radio.p_min_dbm = -20.0)),
            (
                "radio.pathloss.urban.exponent",
                Box::new(|s| s.radio.pathloss.urban.exponent = 0.0),
            ),
            (
                "radio.shadowing_sigma_db.open",
                Box::new(|s| s.radio.shadowing_sigma_db.open = -1.0),
            ),
            (
                "traffic.indoor_fraction",
                Box::new(|s| s.traffic.indoor_fraction = 1.5),
            ),
            (
                "traffic.voice_fraction",
                Box::new(|s| s.traffic.voice_fraction = -0.1),
            ),
            (
                "sites[0].sectors[0].antenna.theta_3db_deg",
                Box::new(|s| s.sites[0].sectors[0].antenna.theta_3db_deg = 0.0),
            ),
        ];
        for (path, mutate) in mutations {
            let mut s = base.clone();
            mutate(&mut s);
            let v = validate_scenario(&s);
            assert_eq!(v.len(), 1, "{path}: {v:?}");
            assert_eq!(v[0].path, path);
        }
    }

    #[test]
    fn building_blocks_expand_on_load() {
        let doc = r#"{
          "sites": [ { "id": "A", "position": [0, 0] } ],
          "clutter": {
            "bounds": { "min": [-500, -500], "max": [500, 500] },
            "building_blocks": [ { "id_prefix": "blk", "min": [0, 0], "max": [200, 100],
                                   "pitch_m": [100, 100], "footprint_m": [60, 40] } ]
          }
        }"#;
        let s = load_scenario(doc).unwrap();
        assert_eq!(s.clutter.buildings.len(), 2);
        assert_eq!(s.clutter.buildings[1].id, "blk1");
        assert_eq!(s.clutter.buildings[1].min, Point::new(100.0, 0.0));
        assert_eq!(s.clutter.buildings[1].penetration_loss_db, 20.0);
    }

    #[test]
    fn clutter_regions_override_cells() {
        let doc = r#"{
          "sites": [ { "id": "A", "position": [0, 0] } ],
          "clutter": {
            "bounds": { "min": [0, 0], "max": [400, 400] },
            "cell_size_m": 100, "default_class": "suburban",
            "regions": [ { "min": [0, 0], "max": [200, 200], "class": "open" } ]
          }
        }"#;
        let s = load_scenario(doc).unwrap();
        assert_eq!(
            s.clutter.class_at(&Point::new(50.0, 50.0)),
            ClutterClass::Open
        );
        assert_eq!(
            s.clutter.class_at(&Point::new(350.0, 50.0)),
            ClutterClass::Suburban
        );
        assert_eq!(
            s.clutter.class_at(&Point::new(400.0, 400.0)),
            ClutterClass::Suburban
        );
    }

    #[test]
    fn drops_are_deterministic_and_sized() {
        let s = load_scenario(&two_site_doc("")).unwrap();
        let a = drop_mobiles(&s, 11).unwrap();
        let b = drop_mobiles(&s, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 20);
        assert_ne!(a, drop_mobiles(&s, 12).unwrap());
    }

    #[test]
    fn no_indoor_users_when_fraction_is_zero() {
        let mut s = load_scenario(&two_site_doc("")).unwrap();
        s.traffic.indoor_fraction = 0.0;
        for seed in 0..20 {
            assert!(drop_mobiles(&s, seed).unwrap().iter().all(|m| !m.indoor));
        }
    }

    #[test]
    fn indoor_without_buildings_is_infeasible() {
        let mut s = load_scenario(MINIMAL).unwrap();
        s.traffic.indoor_fraction = 0.2;
        assert!(matches!(
            drop_mobiles(&s, 1),
            Err(ScenarioError::InfeasibleDrop(_))
        ));
    }

    #[test]
    fn indoor_flag_matches_footprint() {
        let s = load_scenario(&two_site_doc("")).unwrap();
        for seed in 0..50 {
            for m in drop_mobiles(&s, seed).unwrap() {
                match m.building {
                    Some(b) => {
                        assert!(m.indoor);
                        assert!(s.clutter.buildings[b].contains(&m.position));
                    }
                    None => {
                        assert!(!m.indoor);
                        assert!(s.clutter.building_at(&m.position).is_none());
                    }
                }
            }
        }
    }
}
