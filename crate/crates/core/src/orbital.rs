//! Walker constellation generation, circular two-body propagation and
//! ground-visibility geometry.
//!
//! Positions are Earth-centred inertial (ECI) kilometres on a spherical Earth.
//! Ground sites rotate with the Earth about the inertial z axis starting from
//! zero hour angle at the constellation epoch. Times are seconds, either as an
//! absolute timestamp (same clock as `epoch_s`) or as a duration.

use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean equatorial Earth radius, km.
pub const EARTH_RADIUS_KM: f64 = 6378.137;
/// Earth gravitational parameter, km^3/s^2.
pub const MU_EARTH_KM3_S2: f64 = 398_600.441_8;
/// Speed of light in vacuum, km/s.
pub const SPEED_OF_LIGHT_KM_S: f64 = 299_792.458;
/// Sidereal rotation rate of the Earth, deg/s.
pub const EARTH_ROTATION_DEG_S: f64 = 360.0 / 86_164.1;
/// Elevation mask applied when a site does not specify one.
pub const DEFAULT_MIN_ELEVATION_DEG: f64 = 10.0;

pub type Position = Vector3<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrbitalError {
    #[error("invalid constellation: {0}")]
    InvalidConstellation(String),
    #[error("invalid ground site {site}: {reason}")]
    InvalidSite { site: String, reason: String },
    #[error("time {t} s precedes constellation epoch {epoch} s")]
    BeforeEpoch { t: f64, epoch: f64 },
    #[error("invalid sampling: {0}")]
    InvalidSampling(String),
}

/// Walker-style constellation of circular orbits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstellationConfig {
    /// Altitude above the mean equatorial radius, km.
    pub altitude_km: f64,
    pub inclination_deg: f64,
    pub num_planes: u32,
    pub sats_per_plane: u32,
    /// Walker F parameter.
    #[serde(default)]
    pub phasing_factor: u32,
    /// 360 for a Walker delta pattern, 180 for a star pattern.
    #[serde(default = "default_raan_spread")]
    pub raan_spread_deg: f64,
    #[serde(default)]
    pub epoch_s: f64,
}

fn default_raan_spread() -> f64 {
    360.0
}

impl ConstellationConfig {
    pub fn new(altitude_km: f64, inclination_deg: f64, num_planes: u32, sats_per_plane: u32, phasing_factor: u32) -> Self {
        Self {
            altitude_km,
            inclination_deg,
            num_planes,
            sats_per_plane,
            phasing_factor,
            raan_spread_deg: 360.0,
            epoch_s: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), OrbitalError> {
        let fail = |m: String| Err(OrbitalError::InvalidConstellation(m));
        if !(self.altitude_km > 0.0) || !self.altitude_km.is_finite() {
            return fail(format!("altitude must be positive, got {}", self.altitude_km));
        }
        if self.num_planes < 1 {
            return fail("num_planes must be at least 1".into());
        }
        if self.sats_per_plane < 1 {
            return fail("sats_per_plane must be at least 1".into());
        }
        if self.phasing_factor >= self.num_planes {
            return fail(format!(
                "phasing_factor {} must be below num_planes {}",
                self.phasing_factor, self.num_planes
            ));
        }
        if !self.inclination_deg.is_finite() || !self.raan_spread_deg.is_finite() || !self.epoch_s.is_finite() {
            return fail("angles and epoch must be finite".into());
        }
        Ok(())
    }

    pub fn semi_major_axis_km(&self) -> f64 {
        EARTH_RADIUS_KM + self.altitude_km
    }

    /// Mean motion, rad/s.
    pub fn angular_rate(&self) -> f64 {
        (MU_EARTH_KM3_S2 / self.semi_major_axis_km().powi(3)).sqrt()
    }

    pub fn period_s(&self) -> f64 {
        2.0 * PI / self.angular_rate()
    }

    pub fn total_satellites(&self) -> usize {
        self.num_planes as usize * self.sats_per_plane as usize
    }

    /// Satellite identifiers in ascending order.
    pub fn sat_ids(&self) -> impl Iterator<Item = SatId> + '_ {
        (0..self.num_planes).flat_map(move |plane| (0..self.sats_per_plane).map(move |slot| SatId::new(plane, slot)))
    }

    pub fn index_of(&self, sat: SatId) -> Option<usize> {
        (sat.plane < self.num_planes && sat.slot < self.sats_per_plane)
            .then(|| sat.plane as usize * self.sats_per_plane as usize + sat.slot as usize)
    }

    /// Inertial position of one satellite.
    pub fn position(&self, sat: SatId, t: f64) -> Position {
        let a = self.semi_major_axis_km();
        let planes = self.num_planes as f64;
        let per_plane = self.sats_per_plane as f64;
        let raan = (sat.plane as f64 * self.raan_spread_deg / planes).to_radians();
        let phase_step = self.phasing_factor as f64 * 360.0 / (planes * per_plane);
        let anomaly0 = sat.slot as f64 * 360.0 / per_plane + sat.plane as f64 * phase_step;
        let u = anomaly0.to_radians() + self.angular_rate() * (t - self.epoch_s);
        let inc = self.inclination_deg.to_radians();
        let (su, cu) = u.sin_cos();
        let (so, co) = raan.sin_cos();
        let (si, ci) = inc.sin_cos();
        Position::new(a * (co * cu - so * su * ci), a * (so * cu + co * su * ci), a * su * si)
    }
}

/// Satellite identifier; ordering is plane-major, matching the global index.
/// Serialized as `sat-<plane>-<slot>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SatId {
    pub plane: u32,
    pub slot: u32,
}

impl SatId {
    pub const fn new(plane: u32, slot: u32) -> Self {
        Self { plane, slot }
    }
}

impl std::fmt::Display for SatId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "sat-{}-{}", self.plane, self.slot)
    }
}

impl std::str::FromStr for SatId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("expected sat-<plane>-<slot>, got {s:?}");
        let rest = s.strip_prefix("sat-").ok_or_else(bad)?;
        let (p, q) = rest.split_once('-').ok_or_else(bad)?;
        Ok(SatId::new(p.parse().map_err(|_| bad())?, q.parse().map_err(|_| bad())?))
    }
}

impl TryFrom<String> for SatId {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<SatId> for String {
    fn from(s: SatId) -> String {
        s.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SatelliteState {
    pub sat_id: SatId,
    pub position: Position,
    pub time: f64,
}

impl SatelliteState {
    /// Geocentric latitude, degrees.
    pub fn latitude_deg(&self) -> f64 {
        (self.position.z / self.position.norm()).asin().to_degrees()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteRole {
    Gateway,
    Core,
    Smo,
    DataNetwork,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundSite {
    pub site_id: String,
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    pub role: SiteRole,
    #[serde(default = "default_min_elevation")]
    pub min_elevation_deg: f64,
}

fn default_min_elevation() -> f64 {
    DEFAULT_MIN_ELEVATION_DEG
}

impl GroundSite {
    pub fn new(site_id: impl Into<String>, latitude_deg: f64, longitude_deg: f64, role: SiteRole) -> Self {
        Self {
            site_id: site_id.into(),
            latitude_deg,
            longitude_deg,
            role,
            min_elevation_deg: DEFAULT_MIN_ELEVATION_DEG,
        }
    }

    pub fn validate(&self) -> Result<(), OrbitalError> {
        let fail = |reason: &str| {
            Err(OrbitalError::InvalidSite {
                site: self.site_id.clone(),
                reason: reason.to_string(),
            })
        };
        if self.site_id.is_empty() {
            return fail("empty site id");
        }
        if !(-90.0..=90.0).contains(&self.latitude_deg) {
            return fail("latitude outside [-90, 90]");
        }
        if !(self.longitude_deg > -180.0 && self.longitude_deg <= 180.0) {
            return fail("longitude outside (-180, 180]");
        }
        if !(0.0..90.0).contains(&self.min_elevation_deg) {
            return fail("min_elevation outside [0, 90)");
        }
        Ok(())
    }

    /// Earth-fixed position, km.
    pub fn ecef(&self) -> Position {
        let lat = self.latitude_deg.to_radians();
        let lon = self.longitude_deg.to_radians();
        EARTH_RADIUS_KM * Position::new(lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin())
    }

    /// Inertial position at `t`, rotating the Earth from zero hour angle at `epoch`.
    pub fn eci(&self, t: f64, epoch: f64) -> Position {
        let theta = (EARTH_ROTATION_DEG_S * (t - epoch)).to_radians();
        let (s, c) = theta.sin_cos();
        let p = self.ecef();
        Position::new(c * p.x - s * p.y, s * p.x + c * p.y, p.z)
    }

    /// Largest slant range at which a satellite of the given orbit radius
    /// can be seen above this site's mask.
    pub fn max_slant_range_km(&self, orbit_radius_km: f64) -> f64 {
        let e = self.min_elevation_deg.to_radians();
        let r = EARTH_RADIUS_KM;
        (orbit_radius_km.powi(2) - (r * e.cos()).powi(2)).sqrt() - r * e.sin()
    }
}

/// Propagates every satellite of the constellation to time `t`.
pub fn propagate(config: &ConstellationConfig, t: f64) -> Result<Vec<SatelliteState>, OrbitalError> {
    config.validate()?;
    if t < config.epoch_s {
        return Err(OrbitalError::BeforeEpoch { t, epoch: config.epoch_s });
    }
    Ok(config
        .sat_ids()
        .map(|sat_id| SatelliteState {
            sat_id,
            position: config.position(sat_id, t),
            time: t,
        })
        .collect())
}

/// One-way free-space propagation delay between two points, seconds.
pub fn propagation_delay(a: &Position, b: &Position) -> f64 {
    (a - b).norm() / SPEED_OF_LIGHT_KM_S
}

/// Elevation of an inertial point above the site's local horizon at time `t`, degrees.
pub fn elevation_deg(sat_position: &Position, site: &GroundSite, t: f64, epoch: f64) -> f64 {
    let site_pos = site.eci(t, epoch);
    let up = site_pos.normalize();
    let los = sat_position - site_pos;
    let range = los.norm();
    if range == 0.0 {
        return 90.0;
    }
    (los.dot(&up) / range).clamp(-1.0, 1.0).asin().to_degrees()
}

/// Whether `sat` is above the site's elevation mask. The Earth rotation is
/// referenced to `epoch`.
pub fn visible(sat: &SatelliteState, site: &GroundSite, epoch: f64) -> bool {
    elevation_deg(&sat.position, site, sat.time, epoch) >= site.min_elevation_deg
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibilityWindow {
    pub sat_id: SatId,
    pub start: f64,
    pub end: f64,
}

impl VisibilityWindow {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Collapses a sampled boolean series into maximal runs. Each run is reported
/// as (first true sample time, last true sample time).
pub fn runs_from_samples(times: &[f64], flags: &[bool]) -> Vec<(f64, f64)> {
    debug_assert_eq!(times.len(), flags.len());
    let mut out = Vec::new();
    let mut open: Option<(f64, f64)> = None;
    for (&t, &on) in times.iter().zip(flags) {
        match (on, open.as_mut()) {
            (true, Some(run)) => run.1 = t,
            (true, None) => open = Some((t, t)),
            (false, Some(_)) => out.extend(open.take()),
            (false, None) => {}
        }
    }
    out.extend(open);
    out
}

/// Sample grid `epoch, epoch + step, ..` up to and including `epoch + horizon`.
pub fn sample_grid(start: f64, horizon: f64, step: f64) -> Result<Vec<f64>, OrbitalError> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(OrbitalError::InvalidSampling(format!("step must be positive, got {step}")));
    }
    if !(horizon >= step) || !horizon.is_finite() {
        return Err(OrbitalError::InvalidSampling(format!("horizon {horizon} must be at least step {step}")));
    }
    let n = (horizon / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| start + k as f64 * step).collect())
}

/// Visibility windows of every satellite over `site` during `[epoch, epoch + horizon]`.
///
/// Window boundaries are the first and last visible sample on the step grid,
/// so a window that is open for the whole horizon spans `[epoch, epoch + horizon]`.
/// Windows are sorted by satellite then start time.
pub fn visibility_windows(
    config: &ConstellationConfig,
    site: &GroundSite,
    horizon: f64,
    step: f64,
) -> Result<Vec<VisibilityWindow>, OrbitalError> {
    config.validate()?;
    site.validate()?;
    let times = sample_grid(config.epoch_s, horizon, step)?;
    let mut out = Vec::new();
    for sat_id in config.sat_ids() {
        let flags: Vec<bool> = times
            .iter()
            .map(|&t| elevation_deg(&config.position(sat_id, t), site, t, config.epoch_s) >= site.min_elevation_deg)
            .collect();
        out.extend(
            runs_from_samples(&times, &flags)
                .into_iter()
                .map(|(start, end)| VisibilityWindow { sat_id, start, end }),
        );
    }
    Ok(out)
}

/// Great-circle distance between two ground sites on the spherical Earth, km.
pub fn ground_distance_km(a: &GroundSite, b: &GroundSite) -> f64 {
    let cos = a.ecef().normalize().dot(&b.ecef().normalize()).clamp(-1.0, 1.0);
    EARTH_RADIUS_KM * cos.acos()
}
