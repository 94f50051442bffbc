//! Constellation and user-terminal geometry on a spherical Earth.
//!
//! Satellites sit at a common altitude on a regular central-angle grid around a
//! reference sub-satellite point; user terminals (UTs) are drawn uniformly from
//! the union of the satellites' coverage caps. A UT is served by a satellite
//! whenever its slant range does not exceed the coverage radius `D_max`.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{deg_to_rad, rad_to_deg, Real};

/// Mean Earth radius (km).
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Upper bound on rejection-sampling attempts for the whole UT population.
pub const MAX_SAMPLING_ATTEMPTS: usize = 1_000_000;

/// Fraction of the coverage diameter shared by adjacent caps in the default layout.
pub const DEFAULT_CAP_OVERLAP: f64 = 0.3;

/// Missing fields take the [`ScenarioConfig::standard`] values; a missing
/// `satellite_spacing_deg` is derived from the (possibly overridden) geometry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "ScenarioConfigInput")]
pub struct ScenarioConfig {
    pub earth_radius_km: f64,
    pub altitude_km: f64,
    pub max_nadir_deg: f64,
    pub num_satellites: usize,
    pub num_uts: usize,
    /// Central-angle pitch of the satellite grid (deg).
    pub satellite_spacing_deg: f64,
    pub rng_seed: u64,
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ScenarioConfigInput {
    earth_radius_km: f64,
    altitude_km: f64,
    max_nadir_deg: f64,
    num_satellites: usize,
    num_uts: usize,
    satellite_spacing_deg: Option<f64>,
    rng_seed: u64,
}

impl Default for ScenarioConfigInput {
    fn default() -> Self {
        let std = ScenarioConfig::default();
        ScenarioConfigInput {
            earth_radius_km: std.earth_radius_km,
            altitude_km: std.altitude_km,
            max_nadir_deg: std.max_nadir_deg,
            num_satellites: std.num_satellites,
            num_uts: std.num_uts,
            satellite_spacing_deg: None,
            rng_seed: std.rng_seed,
        }
    }
}

impl From<ScenarioConfigInput> for ScenarioConfig {
    fn from(i: ScenarioConfigInput) -> Self {
        let mut cfg = ScenarioConfig {
            earth_radius_km: i.earth_radius_km,
            altitude_km: i.altitude_km,
            max_nadir_deg: i.max_nadir_deg,
            num_satellites: i.num_satellites,
            num_uts: i.num_uts,
            satellite_spacing_deg: 0.0,
            rng_seed: i.rng_seed,
        };
        cfg.satellite_spacing_deg = i.satellite_spacing_deg.unwrap_or_else(|| cfg.default_spacing_deg());
        cfg
    }
}

impl Default for ScenarioConfig {
    /// Four satellites and six UTs in the standard geometry.
    fn default() -> Self {
        Self::standard(4, 6, 0)
    }
}

impl ScenarioConfig {
    /// 600 km altitude, 30° nadir limit, caps overlapping by 30% of their diameter.
    pub fn standard(num_satellites: usize, num_uts: usize, rng_seed: u64) -> Self {
        let mut cfg = ScenarioConfig {
            earth_radius_km: EARTH_RADIUS_KM,
            altitude_km: 600.0,
            max_nadir_deg: 30.0,
            num_satellites,
            num_uts,
            satellite_spacing_deg: 0.0,
            rng_seed,
        };
        cfg.satellite_spacing_deg = cfg.default_spacing_deg();
        cfg
    }

    /// Grid pitch giving [`DEFAULT_CAP_OVERLAP`] between neighbouring caps.
    pub fn default_spacing_deg(&self) -> f64 {
        coverage_geometry(self.altitude_km, self.max_nadir_deg, self.earth_radius_km)
            .map(|c| 2.0 * c.central_angle_deg * (1.0 - DEFAULT_CAP_OVERLAP))
            .unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.altitude_km > 0.0) {
            return Err(Error::invalid("altitude must be positive"));
        }
        if !(self.earth_radius_km > 0.0) {
            return Err(Error::invalid("earth radius must be positive"));
        }
        if !(self.max_nadir_deg > 0.0 && self.max_nadir_deg < 90.0) {
            return Err(Error::invalid("max nadir angle must lie in (0°, 90°)"));
        }
        if self.num_satellites == 0 || self.num_uts == 0 {
            return Err(Error::invalid("need at least one satellite and one UT"));
        }
        if !(self.satellite_spacing_deg >= 0.0) {
            return Err(Error::invalid("satellite spacing must be non-negative"));
        }
        Ok(())
    }
}

/// Coverage cap implied by a nadir-angle limit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoverageGeometry<T> {
    /// Maximum slant range `D_max` (km).
    pub max_slant_range_km: T,
    /// Earth-central half angle of the cap (deg).
    pub central_angle_deg: T,
    /// Elevation seen from the cap boundary (deg).
    pub min_elevation_deg: T,
}

/// Maximum slant range for a satellite at `altitude` with nadir limit `max_nadir_deg`.
///
/// Solves the Earth-centre/satellite/UT triangle with the law of sines, taking
/// the obtuse interior angle at the UT.
pub fn max_slant_range<T: Real>(altitude: T, max_nadir_deg: T, earth_radius: T) -> Result<T> {
    coverage_geometry(altitude, max_nadir_deg, earth_radius).map(|c| c.max_slant_range_km)
}

pub fn coverage_geometry<T: Real>(altitude: T, max_nadir_deg: T, earth_radius: T) -> Result<CoverageGeometry<T>> {
    if !(altitude > T::zero()) || !(earth_radius > T::zero()) {
        return Err(Error::invalid("altitude and earth radius must be positive"));
    }
    if !(max_nadir_deg > T::zero() && max_nadir_deg < T::lit(90.0)) {
        return Err(Error::invalid("nadir angle must lie in (0°, 90°)"));
    }
    let nadir = deg_to_rad(max_nadir_deg);
    let ratio = (earth_radius + altitude) / earth_radius * nadir.sin();
    if ratio > T::one() {
        return Err(Error::BeyondHorizon {
            altitude_km: altitude.as_f64(),
            nadir_deg: max_nadir_deg.as_f64(),
        });
    }
    let ut_angle = T::pi() - ratio.asin();
    let central = T::pi() - nadir - ut_angle;
    let d_max = earth_radius * central.sin() / nadir.sin();
    Ok(CoverageGeometry {
        max_slant_range_km: d_max,
        central_angle_deg: rad_to_deg(central),
        min_elevation_deg: rad_to_deg(ut_angle - T::frac_pi_2()),
    })
}

/// Elevation (deg) of `sat` above the local horizontal plane at `ut`.
pub fn elevation_angle<T: Real>(sat: &[T; 3], ut: &[T; 3]) -> T {
    let s = Vector3::from(*sat);
    let u = Vector3::from(*ut);
    let ray = s - u;
    let up = u.normalize();
    let sine = (ray.dot(&up) / ray.norm()).clamp(-T::one(), T::one());
    rad_to_deg(sine.asin())
}

/// Departure angles `(θx, θy)` (rad) of the satellite→UT ray in the satellite's
/// array frame: x axis east, y axis north, boresight at nadir.
///
/// The directional cosines follow as `qx = sin θy cos θx`, `qy = cos θy`.
pub fn departure_angles<T: Real>(sat: &[T; 3], ut: &[T; 3]) -> (T, T) {
    let p = Vector3::from(*sat);
    let up = p.normalize();
    let pole = Vector3::new(T::zero(), T::zero(), T::one());
    let mut east = pole.cross(&up);
    if east.norm() < T::lit(1e-12) {
        east = Vector3::new(T::one(), T::zero(), T::zero());
    }
    let east = east.normalize();
    let north = up.cross(&east);
    let dir = (Vector3::from(*ut) - p).normalize();
    let qx = dir.dot(&east);
    let qy = dir.dot(&north).clamp(-T::one(), T::one());
    let theta_y = qy.acos();
    let sin_y = theta_y.sin();
    let theta_x = if sin_y > T::lit(1e-15) {
        (qx / sin_y).clamp(-T::one(), T::one()).acos()
    } else {
        T::zero()
    };
    (theta_x, theta_y)
}

/// Satellite/UT association sets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Association {
    /// `served_uts[s]` = UTs inside the coverage of satellite `s`.
    pub served_uts: Vec<Vec<usize>>,
    /// `serving_sats[k]` = satellites covering UT `k`.
    pub serving_sats: Vec<Vec<usize>>,
}

/// Thresholds slant ranges (`distances[k][s]`) against `max_range`.
pub fn associate<T: Real>(distances: &[Vec<T>], max_range: T) -> Result<Association> {
    let num_sats = distances.first().map_or(0, Vec::len);
    let mut served = vec![Vec::new(); num_sats];
    let mut serving = Vec::with_capacity(distances.len());
    for (k, row) in distances.iter().enumerate() {
        if row.len() != num_sats {
            return Err(Error::invalid("ragged distance matrix"));
        }
        if row.iter().any(|d| !d.is_finite()) {
            return Err(Error::invalid("non-finite distance"));
        }
        let sats: Vec<usize> = (0..num_sats).filter(|&s| row[s] <= max_range).collect();
        if sats.is_empty() {
            return Err(Error::Uncovered { ut: k });
        }
        for &s in &sats {
            served[s].push(k);
        }
        serving.push(sats);
    }
    Ok(Association {
        served_uts: served,
        serving_sats: serving,
    })
}

/// A realized constellation/UT layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario<T> {
    pub config: ScenarioConfig,
    pub max_slant_range_km: T,
    pub satellite_positions: Vec<[T; 3]>,
    pub ut_positions: Vec<[T; 3]>,
    /// `distances_km[k][s]`.
    pub distances_km: Vec<Vec<T>>,
    /// `elevations_deg[k][s]`.
    pub elevations_deg: Vec<Vec<T>>,
    pub association: Association,
}

impl<T: Real> Scenario<T> {
    /// Completes a scenario from explicit positions (km, Earth-centred).
    pub fn from_positions(
        config: ScenarioConfig,
        satellite_positions: Vec<[T; 3]>,
        ut_positions: Vec<[T; 3]>,
    ) -> Result<Self> {
        let cov = coverage_geometry(
            T::lit(config.altitude_km),
            T::lit(config.max_nadir_deg),
            T::lit(config.earth_radius_km),
        )?;
        let distances: Vec<Vec<T>> = ut_positions
            .iter()
            .map(|u| {
                satellite_positions
                    .iter()
                    .map(|s| (Vector3::from(*s) - Vector3::from(*u)).norm())
                    .collect()
            })
            .collect();
        let elevations = ut_positions
            .iter()
            .map(|u| satellite_positions.iter().map(|s| elevation_angle(s, u)).collect())
            .collect();
        let association = associate(&distances, cov.max_slant_range_km)?;
        Ok(Scenario {
            config,
            max_slant_range_km: cov.max_slant_range_km,
            satellite_positions,
            ut_positions,
            distances_km: distances,
            elevations_deg: elevations,
            association,
        })
    }

    pub fn num_satellites(&self) -> usize {
        self.satellite_positions.len()
    }

    pub fn num_uts(&self) -> usize {
        self.ut_positions.len()
    }

    /// `mask[s][k]` is true iff satellite `s` may carry UT `k`'s private stream.
    pub fn association_mask(&self) -> Vec<Vec<bool>> {
        let mut mask = vec![vec![false; self.num_uts()]; self.num_satellites()];
        for (s, uts) in self.association.served_uts.iter().enumerate() {
            for &k in uts {
                mask[s][k] = true;
            }
        }
        mask
    }

    /// Index of the satellite with the shortest slant range to UT `k`.
    pub fn nearest_satellite(&self, k: usize) -> usize {
        let row = &self.distances_km[k];
        (0..row.len())
            .min_by(|&a, &b| row[a].partial_cmp(&row[b]).expect("finite distances"))
            .expect("at least one satellite")
    }

    pub fn departure_angles(&self, k: usize, s: usize) -> (T, T) {
        departure_angles(&self.satellite_positions[s], &self.ut_positions[k])
    }
}

fn unit_from_lat_lon(lat: f64, lon: f64) -> Vector3<f64> {
    Vector3::new(lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin())
}

/// Sub-satellite points on a near-square latitude/longitude grid centred on (0°, 0°).
fn satellite_grid(num: usize, spacing_rad: f64) -> Vec<Vector3<f64>> {
    let cols = (num as f64).sqrt().ceil() as usize;
    let rows = num.div_ceil(cols);
    (0..num)
        .map(|idx| {
            let (i, j) = (idx % cols, idx / cols);
            let in_row = if j + 1 == rows { num - j * cols } else { cols };
            let lon = (i as f64 - (in_row as f64 - 1.0) / 2.0) * spacing_rad;
            let lat = (j as f64 - (rows as f64 - 1.0) / 2.0) * spacing_rad;
            unit_from_lat_lon(lat, lon)
        })
        .collect()
}

/// Builds a scenario; deterministic in `config.rng_seed`.
pub fn build_scenario<T: Real>(config: &ScenarioConfig) -> Result<Scenario<T>> {
    config.validate()?;
    let re = config.earth_radius_km;
    let cov = coverage_geometry(config.altitude_km, config.max_nadir_deg, re)?;
    let cap = cov.central_angle_deg.to_radians();
    let sub_points = satellite_grid(config.num_satellites, config.satellite_spacing_deg.to_radians());
    let sat_pos: Vec<Vector3<f64>> = sub_points.iter().map(|u| u * (re + config.altitude_km)).collect();

    // Bounding cap around the grid centre that contains every coverage cap.
    let centre = Vector3::new(1.0, 0.0, 0.0);
    let reach = sub_points
        .iter()
        .map(|u| u.dot(&centre).clamp(-1.0, 1.0).acos())
        .fold(0.0f64, f64::max);
    let bound = (reach + cap).min(std::f64::consts::PI);
    let cos_bound = bound.cos();

    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut uts = Vec::with_capacity(config.num_uts);
    let mut attempts = 0usize;
    while uts.len() < config.num_uts {
        if attempts >= MAX_SAMPLING_ATTEMPTS {
            return Err(Error::SamplingExhausted { attempts });
        }
        attempts += 1;
        let cos_t = 1.0 - rng.random::<f64>() * (1.0 - cos_bound);
        let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
        let phi = 2.0 * std::f64::consts::PI * rng.random::<f64>();
        // Cap sampled around +z, rotated so +z maps onto the grid centre (+x).
        let p = Vector3::new(cos_t, sin_t * phi.cos(), sin_t * phi.sin()) * re;
        if sat_pos.iter().any(|s| (s - p).norm() <= cov.max_slant_range_km) {
            uts.push(p);
        }
    }

    let to_t = |v: &Vector3<f64>| [T::lit(v.x), T::lit(v.y), T::lit(v.z)];
    Scenario::from_positions(
        config.clone(),
        sat_pos.iter().map(to_t).collect(),
        uts.iter().map(to_t).collect(),
    )
}
