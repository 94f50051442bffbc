//! Array responses, per-link statistical CSI and channel sampling.
//!
//! Each satellite→UT link is rank one, `H_{k,s} = d_{k,s} g_{k,s}ᴴ`, with a
//! deterministic transmit response `g` and a Rician receive response
//! `d = √(βκ/(κ+1))·d0 + √(β/(κ+1))·d̂`, `d̂ ~ CN(0, Σ)`. The statistics
//! `{β, κ, g, d0, Σ}` of all links of a UT determine the effective channel
//! `Ĥ_k = (G_k D̂_k G_kᴴ)^{1/2}` through which the closed-form rate bounds are
//! evaluated.
//!
//! Steering vectors are unit norm (`1/√n` prefix) so that `E[‖d‖²] = β`.

mod schema;

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use schema::{EffectiveChannelDocument, StatisticsDocument, SCHEMA_VERSION};

use crate::error::{Error, Result};
use crate::geometry::Scenario;
use crate::linalg::{checked_psd_eigen, kron, CMat, CVec};
use crate::scalar::{deg_to_rad, real, unit_phasor, Cplx, Real};

pub const BOLTZMANN: f64 = 1.380649e-23;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Antenna arrays, carrier and link-budget constants. Missing fields take their
/// [`Default`] values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArrayConfig {
    /// `[M_x, M_y]` satellite UPA size.
    pub sat_antennas: [usize; 2],
    /// `[N_x', N_y']` UT UPA size.
    pub ut_antennas: [usize; 2],
    /// Satellite element spacing in wavelengths.
    pub sat_spacing_wl: [f64; 2],
    /// UT element spacing in wavelengths.
    pub ut_spacing_wl: [f64; 2],
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub noise_temperature_k: f64,
    pub sat_gain_dbi: f64,
    pub ut_gain_dbi: f64,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        ArrayConfig {
            sat_antennas: [5, 5],
            ut_antennas: [4, 4],
            sat_spacing_wl: [1.0, 1.0],
            ut_spacing_wl: [0.5, 0.5],
            carrier_hz: 2e9,
            bandwidth_hz: 50e6,
            noise_temperature_k: 290.0,
            sat_gain_dbi: 6.0,
            ut_gain_dbi: 0.0,
        }
    }
}

impl ArrayConfig {
    pub fn num_sat_antennas(&self) -> usize {
        self.sat_antennas[0] * self.sat_antennas[1]
    }

    pub fn num_ut_antennas(&self) -> usize {
        self.ut_antennas[0] * self.ut_antennas[1]
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn noise_variance(&self) -> f64 {
        noise_variance(self.noise_temperature_k, self.bandwidth_hz)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sat_antennas.contains(&0) || self.ut_antennas.contains(&0) {
            return Err(Error::invalid("antenna counts must be at least 1"));
        }
        let spacings = self.sat_spacing_wl.iter().chain(&self.ut_spacing_wl);
        if spacings.clone().any(|&d| !(d > 0.0)) {
            return Err(Error::invalid("antenna spacings must be positive"));
        }
        if !(self.carrier_hz > 0.0 && self.bandwidth_hz > 0.0 && self.noise_temperature_k >= 0.0) {
            return Err(Error::invalid("carrier, bandwidth and noise temperature out of range"));
        }
        Ok(())
    }
}

/// Elevation-binned Rician factors (linear scale).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RicianTable {
    pub bin_width_deg: f64,
    /// `kappa[i]` applies to elevations in `[i·w, (i+1)·w)`.
    pub kappa: Vec<f64>,
}

impl Default for RicianTable {
    fn default() -> Self {
        RicianTable {
            bin_width_deg: 10.0,
            kappa: vec![2.0, 2.8, 3.9, 5.3, 7.0, 9.2, 12.0, 15.5, 20.0, 25.0],
        }
    }
}

impl RicianTable {
    /// Factor for an elevation in degrees; out-of-range elevations use the edge bins.
    pub fn kappa_at(&self, elevation_deg: f64) -> f64 {
        let last = self.kappa.len().saturating_sub(1);
        let bin = (elevation_deg.max(0.0) / self.bin_width_deg).floor() as usize;
        self.kappa[bin.min(last)]
    }

    pub fn validate(&self) -> Result<()> {
        if self.kappa.is_empty() || !(self.bin_width_deg > 0.0) {
            return Err(Error::invalid("rician table needs bins and a positive width"));
        }
        if self.kappa.iter().any(|&k| !(k > 0.0)) {
            return Err(Error::invalid("rician factors must be positive"));
        }
        Ok(())
    }
}

/// Unit-norm uniform-linear-array steering vector,
/// `(1/√n)·exp(−j2π·(d/λ)·q·i)` for `i = 0..n`.
pub fn steering_vector<T: Real>(n: usize, spacing_wl: T, cosine: T) -> CVec<T> {
    let scale = real(T::one() / T::from_usize(n).expect("antenna count").sqrt());
    let step = -T::two_pi() * spacing_wl * cosine;
    CVec::from_fn(n, |i, _| unit_phasor(step * T::from_usize(i).expect("index")) * scale)
}

fn upa_response<T: Real>(dims: [usize; 2], spacing: [f64; 2], angle_x: T, angle_y: T) -> CVec<T> {
    let qx = angle_y.sin() * angle_x.cos();
    let qy = angle_y.cos();
    kron(
        &steering_vector(dims[0], T::lit(spacing[0]), qx),
        &steering_vector(dims[1], T::lit(spacing[1]), qy),
    )
}

/// Satellite transmit response `g = e_x(qx) ⊗ e_y(qy)` from departure angles (rad).
pub fn transmit_response<T: Real>(arrays: &ArrayConfig, theta_x: T, theta_y: T) -> CVec<T> {
    upa_response(arrays.sat_antennas, arrays.sat_spacing_wl, theta_x, theta_y)
}

/// UT receive response from arrival angles (rad).
pub fn receive_response<T: Real>(arrays: &ArrayConfig, phi_x: T, phi_y: T) -> CVec<T> {
    upa_response(arrays.ut_antennas, arrays.ut_spacing_wl, phi_x, phi_y)
}

/// Free-space average channel power `G_sat·G_ut / (4πD/λ)²` (distance and
/// wavelength in the same unit).
pub fn path_gain<T: Real>(distance: T, wavelength: T, sat_gain_dbi: T, ut_gain_dbi: T) -> T {
    let gain = T::lit(10.0).powf((sat_gain_dbi + ut_gain_dbi) / T::lit(10.0));
    let fspl = T::lit(4.0) * T::pi() * distance / wavelength;
    gain / (fspl * fspl)
}

/// Thermal noise power `k_B·T_n·B` (W).
pub fn noise_variance<T: Real>(temperature_k: T, bandwidth_hz: T) -> T {
    T::lit(BOLTZMANN) * temperature_k * bandwidth_hz
}

/// Samples LoS arrival angles consistent with `sin φx' · sin φy' = sin α`
/// and returns the corresponding receive response.
pub fn los_receive_response<T: Real, R: Rng + ?Sized>(arrays: &ArrayConfig, elevation_deg: T, rng: &mut R) -> CVec<T> {
    let (phi_x, phi_y) = los_arrival_angles(elevation_deg, rng);
    receive_response(arrays, phi_x, phi_y)
}

/// Arrival angles `(φx', φy')` (rad) solving the LoS elevation constraint.
pub fn los_arrival_angles<T: Real, R: Rng + ?Sized>(elevation_deg: T, rng: &mut R) -> (T, T) {
    let alpha = deg_to_rad(elevation_deg).clamp(-T::frac_pi_2(), T::frac_pi_2());
    let target = alpha.sin();
    // |sin φy'| must be at least |sin α| for φx' to be real.
    let low = target.abs().asin();
    let high = T::pi() - low;
    let phi_y = low + (high - low) * T::lit(rng.random::<f64>());
    let sin_y = phi_y.sin();
    let principal = if sin_y.abs() > T::lit(1e-15) {
        (target / sin_y).clamp(-T::one(), T::one()).asin()
    } else {
        T::zero()
    };
    let phi_x = if rng.random::<bool>() {
        principal
    } else {
        T::pi() - principal
    };
    (phi_x, phi_y)
}

/// Diagonal NLoS covariance with i.i.d. `U(0,1)` weights normalized to unit trace.
pub fn nlos_covariance<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat<T> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    let diag = DVector::from_iterator(n, raw.iter().map(|&x| real(T::lit(x / total))));
    CMat::from_diagonal(&diag)
}

/// Statistical CSI of one satellite→UT link.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkStatistics<T: Real> {
    /// Average channel power.
    pub beta: T,
    /// Rician factor (linear).
    pub kappa: T,
    /// Transmit response (length `M`).
    pub g: CVec<T>,
    /// LoS receive response (length `N`).
    pub d0: CVec<T>,
    /// NLoS covariance (`N × N`, unit trace).
    pub sigma: CMat<T>,
}

impl<T: Real> LinkStatistics<T> {
    pub fn validate(&self) -> Result<()> {
        let tol = T::lit(1e-9);
        if !(self.beta > T::zero()) || !(self.kappa > T::zero()) {
            return Err(Error::invalid("β and κ must be positive"));
        }
        if (self.g.norm() - T::one()).abs() > tol || (self.d0.norm() - T::one()).abs() > tol {
            return Err(Error::invalid("array responses must be unit norm"));
        }
        if !self.sigma.is_square() || self.sigma.nrows() != self.d0.len() {
            return Err(Error::invalid("NLoS covariance dimension mismatch"));
        }
        if (self.sigma.trace().re - T::one()).abs() > tol {
            return Err(Error::invalid("NLoS covariance must have unit trace"));
        }
        checked_psd_eigen(&self.sigma)?;
        Ok(())
    }

    /// LoS amplitude `√(βκ/(κ+1))`.
    pub fn los_amplitude(&self) -> T {
        (self.beta * self.kappa / (self.kappa + T::one())).sqrt()
    }

    /// NLoS amplitude `√(β/(κ+1))`.
    pub fn nlos_amplitude(&self) -> T {
        (self.beta / (self.kappa + T::one())).sqrt()
    }

    /// Same link with β multiplied by `power_scale`.
    pub fn scaled(&self, power_scale: T) -> Self {
        LinkStatistics {
            beta: self.beta * power_scale,
            ..self.clone()
        }
    }
}

/// Statistics of every (UT, satellite) link, indexed `links[k][s]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelStatistics<T: Real> {
    pub num_sat_antennas: usize,
    pub num_ut_antennas: usize,
    pub links: Vec<Vec<LinkStatistics<T>>>,
}

impl<T: Real> ChannelStatistics<T> {
    pub fn num_uts(&self) -> usize {
        self.links.len()
    }

    pub fn num_satellites(&self) -> usize {
        self.links.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.num_satellites();
        for row in &self.links {
            if row.len() != s {
                return Err(Error::invalid("ragged link table"));
            }
            for link in row {
                if link.g.len() != self.num_sat_antennas || link.d0.len() != self.num_ut_antennas {
                    return Err(Error::invalid("link response dimension mismatch"));
                }
                link.validate()?;
            }
        }
        Ok(())
    }

    /// Divides every β by `noise_var`, so that the noise power becomes one.
    /// All rates are invariant under this joint scaling.
    pub fn normalized_by_noise(&self, noise_var: T) -> Self {
        let scale = T::one() / noise_var;
        ChannelStatistics {
            links: self
                .links
                .iter()
                .map(|row| row.iter().map(|l| l.scaled(scale)).collect())
                .collect(),
            ..self.clone()
        }
    }

    /// Keeps only the listed satellites (in the given order).
    pub fn restrict_satellites(&self, sats: &[usize]) -> Self {
        ChannelStatistics {
            links: self
                .links
                .iter()
                .map(|row| sats.iter().map(|&s| row[s].clone()).collect())
                .collect(),
            ..self.clone()
        }
    }

    pub fn restrict_uts(&self, uts: &[usize]) -> Self {
        ChannelStatistics {
            links: uts.iter().map(|&k| self.links[k].clone()).collect(),
            ..self.clone()
        }
    }
}

/// Generates link statistics for every (UT, satellite) pair of a scenario.
///
/// β follows from the slant range, κ from the elevation bin, `g` from the
/// departure geometry; `d0` and Σ are drawn from `seed`.
pub fn generate_statistics<T: Real>(
    scenario: &Scenario<T>,
    arrays: &ArrayConfig,
    rician: &RicianTable,
    seed: u64,
) -> Result<ChannelStatistics<T>> {
    arrays.validate()?;
    rician.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let wavelength = T::lit(arrays.wavelength_m());
    let mut links = Vec::with_capacity(scenario.num_uts());
    for k in 0..scenario.num_uts() {
        let mut row = Vec::with_capacity(scenario.num_satellites());
        for s in 0..scenario.num_satellites() {
            let distance_m = scenario.distances_km[k][s] * T::lit(1e3);
            let elevation = scenario.elevations_deg[k][s];
            let (tx, ty) = scenario.departure_angles(k, s);
            row.push(LinkStatistics {
                beta: path_gain(
                    distance_m,
                    wavelength,
                    T::lit(arrays.sat_gain_dbi),
                    T::lit(arrays.ut_gain_dbi),
                ),
                kappa: T::lit(rician.kappa_at(elevation.as_f64())),
                g: transmit_response(arrays, tx, ty),
                d0: los_receive_response(arrays, elevation, &mut rng),
                sigma: nlos_covariance(arrays.num_ut_antennas(), &mut rng),
            });
        }
        links.push(row);
    }
    Ok(ChannelStatistics {
        num_sat_antennas: arrays.num_sat_antennas(),
        num_ut_antennas: arrays.num_ut_antennas(),
        links,
    })
}

/// The deterministic sCSI surrogate of a UT's aggregated channel.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveChannel<T: Real> {
    /// `Ĥ_k`, Hermitian PSD (`MS × MS`).
    pub h_hat: CMat<T>,
    /// `D̂_k = E[D_kᴴ D_k]` (`S × S`).
    pub d_hat: CMat<T>,
    /// Block-diagonal transmit map `G_k` (`MS × S`).
    pub g_block: CMat<T>,
}

/// Block-diagonal stacking of the per-satellite transmit responses.
pub fn transmit_block<T: Real>(links: &[LinkStatistics<T>]) -> CMat<T> {
    let m = links.first().map_or(0, |l| l.g.len());
    let mut g = CMat::zeros(m * links.len(), links.len());
    for (s, link) in links.iter().enumerate() {
        g.view_mut((s * m, s), (m, 1)).copy_from(&link.g);
    }
    g
}

/// `D̂_k = diag(β) + D_LoS` with off-diagonal LoS cross terms.
pub fn receive_correlation<T: Real>(links: &[LinkStatistics<T>]) -> CMat<T> {
    let s = links.len();
    CMat::from_fn(s, s, |a, b| {
        if a == b {
            real(links[a].beta)
        } else {
            links[a].d0.dotc(&links[b].d0) * real(links[a].los_amplitude() * links[b].los_amplitude())
        }
    })
}

fn effective_from_correlation<T: Real>(links: &[LinkStatistics<T>], d_hat: CMat<T>) -> Result<EffectiveChannel<T>> {
    if links.is_empty() {
        return Err(Error::invalid("effective channel needs at least one link"));
    }
    let g_block = transmit_block(links);
    // G_k has orthonormal columns (disjoint blocks, unit-norm g), so the square
    // root of G D̂ Gᴴ is G D̂^{1/2} Gᴴ.
    let (vecs, vals) = checked_psd_eigen(&d_hat)?;
    let mut root = vecs.clone();
    for (j, mut col) in root.column_iter_mut().enumerate() {
        col *= real(vals[j].sqrt());
    }
    let d_root = &root * vecs.adjoint();
    let h_hat = &g_block * d_root * g_block.adjoint();
    Ok(EffectiveChannel { h_hat, d_hat, g_block })
}

/// Effective channel of UT `k` from the statistics of all its links (one per satellite).
pub fn effective_channel<T: Real>(links: &[LinkStatistics<T>]) -> Result<EffectiveChannel<T>> {
    effective_from_correlation(links, receive_correlation(links))
}

/// Directional-CSI variant: the diagonal of `D̂` keeps only the LoS power
/// `κβ/(κ+1)`; cross terms are unchanged.
pub fn effective_channel_los_only<T: Real>(links: &[LinkStatistics<T>]) -> Result<EffectiveChannel<T>> {
    let mut d_hat = receive_correlation(links);
    for (s, link) in links.iter().enumerate() {
        let a = link.los_amplitude();
        d_hat[(s, s)] = real(a * a);
    }
    effective_from_correlation(links, d_hat)
}

/// One draw of all receive responses.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization<T: Real> {
    /// `D_k` (`N × S`) per UT.
    pub d: Vec<CMat<T>>,
    /// `H_k = D_k G_kᴴ` (`N × MS`) per UT.
    pub h: Vec<CMat<T>>,
}

/// Precomputed sampler for the receive responses of one link.
#[derive(Clone, Debug)]
pub struct LinkSampler<T: Real> {
    los: CVec<T>,
    nlos: NlosFactor<T>,
}

#[derive(Clone, Debug)]
enum NlosFactor<T: Real> {
    /// Per-entry standard deviation of the real and imaginary parts.
    Diagonal(Vec<T>),
    /// `√(β/(κ+1)) · Σ^{1/2} / √2`.
    Full(CMat<T>),
}

impl<T: Real> LinkSampler<T> {
    pub fn new(link: &LinkStatistics<T>) -> Result<Self> {
        let amp = link.nlos_amplitude();
        let n = link.sigma.nrows();
        let half = T::lit(0.5).sqrt();
        let off_diag = (0..n).any(|i| (0..n).any(|j| i != j && link.sigma[(i, j)].norm_sqr() > T::zero()));
        let nlos = if off_diag {
            let root = crate::linalg::hermitian_psd_sqrt(&link.sigma)?;
            NlosFactor::Full(root * real(amp * half))
        } else {
            NlosFactor::Diagonal(
                (0..n)
                    .map(|i| amp * (link.sigma[(i, i)].re.max(T::zero()) * T::lit(0.5)).sqrt())
                    .collect(),
            )
        };
        Ok(LinkSampler {
            los: &link.d0 * real(link.los_amplitude()),
            nlos,
        })
    }

    /// Writes one draw of `d = LoS + NLoS` into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, mut out: nalgebra::DVectorViewMut<'_, Cplx<T>>) {
        match &self.nlos {
            NlosFactor::Diagonal(std) => {
                for (i, sd) in std.iter().enumerate() {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    out[i] = self.los[i] + Cplx::new(T::lit(re), T::lit(im)) * real(*sd);
                }
            }
            NlosFactor::Full(root) => {
                let w = CVec::from_fn(root.ncols(), |_, _| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Cplx::new(T::lit(re), T::lit(im))
                });
                out.copy_from(&(&self.los + root * w));
            }
        }
    }
}

/// Samplers for every link of one UT, producing `D_k` column by column.
#[derive(Clone, Debug)]
pub struct ReceiveSampler<T: Real> {
    links: Vec<LinkSampler<T>>,
    n: usize,
}

impl<T: Real> ReceiveSampler<T> {
    pub fn new(links: &[LinkStatistics<T>]) -> Result<Self> {
        let n = links.first().map_or(0, |l| l.d0.len());
        Ok(ReceiveSampler {
            links: links.iter().map(LinkSampler::new).collect::<Result<_>>()?,
            n,
        })
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut CMat<T>) {
        for (s, link) in self.links.iter().enumerate() {
            link.sample_into(rng, out.column_mut(s));
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CMat<T> {
        let mut d = CMat::zeros(self.n, self.links.len());
        self.sample_into(rng, &mut d);
        d
    }
}

/// Draws one realization of every UT's receive matrix and aggregated channel.
pub fn sample_realization<T: Real, R: Rng + ?Sized>(
    stats: &ChannelStatistics<T>,
    rng: &mut R,
) -> Result<ChannelRealization<T>> {
    let mut d = Vec::with_capacity(stats.num_uts());
    let mut h = Vec::with_capacity(stats.num_uts());
    for row in &stats.links {
        let dk = ReceiveSampler::new(row)?.sample(rng);
        h.push(&dk * transmit_block(row).adjoint());
        d.push(dk);
    }
    Ok(ChannelRealization { d, h })
}

#[cfg(test)]
mod tests;
