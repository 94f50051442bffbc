//! Rate and MSE mathematics: instantaneous and ergodic rates, the closed-form
//! upper bounds, MMSE combiners and weights, and the common-rate split that
//! turns per-UT rates into a max-min fair rate (MMFR).
//!
//! Every formula here depends on a channel matrix `C_k` only through the
//! products `C_k·b` with the beams `b`. Callers may therefore pass the
//! instantaneous `H_k` (`N × MS`), the effective `Ĥ_k` (`MS × MS`), or the
//! reduced form `G_kᴴĤ_k` (`S × MS`), which has the same Gram matrix as `Ĥ_k`
//! and yields identical rates at a fraction of the cost.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{transmit_block, ChannelStatistics, EffectiveChannel, ReceiveSampler};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, mat_from_pairs, mat_to_pairs, norm_sqr, CMat, CVec, Pair};
use crate::scalar::{real, Real};

/// Monte Carlo samples per RNG substream.
pub const MC_CHUNK: usize = 64;

/// Precoder `Q = [q_c, q_{p,1}, …, q_{p,K}]` with its satellite-access mask.
#[derive(Clone, Debug, PartialEq)]
pub struct PrecodingMatrix<T: Real> {
    q: CMat<T>,
    /// `mask[s][k]`: satellite `s` may carry UT `k`'s private stream.
    mask: Vec<Vec<bool>>,
    antennas_per_satellite: usize,
}

impl<T: Real> PrecodingMatrix<T> {
    /// Validates shapes and that masked-out blocks are exactly zero.
    pub fn new(q: CMat<T>, mask: Vec<Vec<bool>>, antennas_per_satellite: usize) -> Result<Self> {
        let s = mask.len();
        let k = mask.first().map_or(0, Vec::len);
        if s == 0 || k == 0 || mask.iter().any(|row| row.len() != k) {
            return Err(Error::invalid("mask must be a nonempty S × K table"));
        }
        if q.nrows() != s * antennas_per_satellite || q.ncols() != k + 1 {
            return Err(Error::invalid(format!(
                "precoder is {}×{}, expected {}×{}",
                q.nrows(),
                q.ncols(),
                s * antennas_per_satellite,
                k + 1
            )));
        }
        let p = PrecodingMatrix {
            q,
            mask,
            antennas_per_satellite,
        };
        for sat in 0..s {
            for ut in 0..k {
                if !p.mask[sat][ut] && p.block(ut + 1, sat).iter().any(|z| z.norm_sqr() != T::zero()) {
                    return Err(Error::invalid(format!("masked block (s={sat}, k={ut}) is nonzero")));
                }
            }
        }
        Ok(p)
    }

    pub fn zeros(mask: Vec<Vec<bool>>, antennas_per_satellite: usize) -> Result<Self> {
        let s = mask.len();
        let k = mask.first().map_or(0, Vec::len);
        Self::new(
            CMat::zeros(s * antennas_per_satellite, k + 1),
            mask,
            antennas_per_satellite,
        )
    }

    /// Builds from arbitrary `q` and zeroes the masked blocks.
    pub fn masked(mut q: CMat<T>, mask: Vec<Vec<bool>>, antennas_per_satellite: usize) -> Result<Self> {
        let m = antennas_per_satellite;
        for (s, row) in mask.iter().enumerate() {
            for (k, &allowed) in row.iter().enumerate() {
                if !allowed && (s + 1) * m <= q.nrows() && k + 1 < q.ncols() {
                    q.view_mut((s * m, k + 1), (m, 1)).fill(real(T::zero()));
                }
            }
        }
        Self::new(q, mask, antennas_per_satellite)
    }

    pub fn matrix(&self) -> &CMat<T> {
        &self.q
    }

    pub fn mask(&self) -> &[Vec<bool>] {
        &self.mask
    }

    pub fn num_satellites(&self) -> usize {
        self.mask.len()
    }

    pub fn num_uts(&self) -> usize {
        self.q.ncols() - 1
    }

    pub fn antennas_per_satellite(&self) -> usize {
        self.antennas_per_satellite
    }

    pub fn common(&self) -> CVec<T> {
        self.q.column(0).into_owned()
    }

    pub fn private(&self, k: usize) -> CVec<T> {
        self.q.column(k + 1).into_owned()
    }

    /// The `M` entries of column `col` that satellite `s` transmits.
    pub fn block(&self, col: usize, s: usize) -> CVec<T> {
        let m = self.antennas_per_satellite;
        self.q.column(col).rows(s * m, m).into_owned()
    }

    /// `p_s(Q)`: squared Frobenius norm of satellite `s`'s row block.
    pub fn satellite_power(&self, s: usize) -> T {
        let m = self.antennas_per_satellite;
        self.q
            .view((s * m, 0), (m, self.q.ncols()))
            .iter()
            .fold(T::zero(), |acc, z| acc + z.norm_sqr())
    }

    pub fn satellite_powers(&self) -> Vec<T> {
        (0..self.num_satellites()).map(|s| self.satellite_power(s)).collect()
    }

    /// Multiplies satellite `s`'s row block by `factor`.
    pub fn scale_satellite(&mut self, s: usize, factor: T) {
        let m = self.antennas_per_satellite;
        let cols = self.q.ncols();
        self.q.view_mut((s * m, 0), (m, cols)).scale_mut(factor);
    }

    /// Stream layout with a single common stream decoded by every UT.
    pub fn layout(&self) -> StreamLayout<T> {
        StreamLayout {
            beams: self.q.clone(),
            num_common: 1,
            common_of: vec![Some(0); self.num_uts()],
        }
    }

    pub fn to_document(&self) -> PrecodingDocument {
        PrecodingDocument {
            antennas_per_satellite: self.antennas_per_satellite,
            mask: self.mask.clone(),
            q: mat_to_pairs(&self.q),
        }
    }
}

/// JSON form of a [`PrecodingMatrix`]; complex entries are `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecodingDocument {
    pub antennas_per_satellite: usize,
    pub mask: Vec<Vec<bool>>,
    pub q: Vec<Vec<Pair>>,
}

impl PrecodingDocument {
    pub fn to_precoder<T: Real>(&self) -> Result<PrecodingMatrix<T>> {
        PrecodingMatrix::new(mat_from_pairs(&self.q)?, self.mask.clone(), self.antennas_per_satellite)
    }
}

/// Beams and decoding roles: columns `0..num_common` are common streams,
/// column `num_common + k` is UT `k`'s private stream, and UT `k` decodes
/// common stream `common_of[k]` (if any) before its private stream. Common
/// streams a UT does not decode are treated as interference.
#[derive(Clone, Debug, PartialEq)]
pub struct StreamLayout<T: Real> {
    pub beams: CMat<T>,
    pub num_common: usize,
    pub common_of: Vec<Option<usize>>,
}

impl<T: Real> StreamLayout<T> {
    pub fn new(beams: CMat<T>, num_common: usize, common_of: Vec<Option<usize>>) -> Result<Self> {
        if beams.ncols() != num_common + common_of.len() {
            return Err(Error::invalid("beam count differs from common streams plus UTs"));
        }
        if common_of.iter().flatten().any(|&g| g >= num_common) {
            return Err(Error::invalid("UT assigned to a nonexistent common stream"));
        }
        Ok(StreamLayout {
            beams,
            num_common,
            common_of,
        })
    }

    pub fn num_uts(&self) -> usize {
        self.common_of.len()
    }

    pub fn private_column(&self, k: usize) -> usize {
        self.num_common + k
    }
}

/// Which of a UT's two streams a quantity refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Common,
    Private,
}

/// Per-UT rates with their common-rate split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport<T> {
    pub f_c: Vec<T>,
    pub f_p: Vec<T>,
    pub f_c_stderr: Vec<T>,
    pub f_p_stderr: Vec<T>,
    pub r_c_alloc: Vec<T>,
    pub mmfr: T,
    pub mmfr_stderr: T,
}

impl<T: Real> RateReport<T> {
    /// Report for exactly known rates (zero standard errors).
    pub fn exact(f_c: Vec<T>, f_p: Vec<T>, common_of: &[Option<usize>]) -> Self {
        let (r_c_alloc, mmfr) = allocate_grouped(&f_c, &f_p, common_of);
        let k = f_c.len();
        RateReport {
            f_c,
            f_p,
            f_c_stderr: vec![T::zero(); k],
            f_p_stderr: vec![T::zero(); k],
            r_c_alloc,
            mmfr,
            mmfr_stderr: T::zero(),
        }
    }

    /// Per-UT totals `R_c,k + f_p,k`.
    pub fn user_rates(&self) -> Vec<T> {
        self.r_c_alloc.iter().zip(&self.f_p).map(|(&a, &b)| a + b).collect()
    }
}

/// Combiners `u` and weights `v = 1/e` for both streams of every UT.
#[derive(Clone, Debug, PartialEq)]
pub struct CombinerSet<T: Real> {
    pub u_c: Vec<CVec<T>>,
    pub u_p: Vec<CVec<T>>,
    pub v_c: Vec<T>,
    pub v_p: Vec<T>,
    /// MSEs at the returned combiners.
    pub e_c: Vec<T>,
    pub e_p: Vec<T>,
}

fn check_noise<T: Real>(noise: T) -> Result<()> {
    if noise > T::zero() && noise.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("noise variance must be positive"))
    }
}

/// Quantities of one UT's decoding chain given its received beams `hb = C_k·B`.
struct UserTerms<T: Real> {
    /// `Σ_c⁻¹`-whitened own common and private beams (`L⁻¹ h`, with `Σ_p = LLᴴ`).
    white_c: Option<CVec<T>>,
    white_p: CVec<T>,
    chol: nalgebra::Cholesky<crate::scalar::Cplx<T>, nalgebra::Dyn>,
}

impl<T: Real> UserTerms<T> {
    fn new(hb: &CMat<T>, layout: &StreamLayout<T>, k: usize, noise: T) -> Result<Self> {
        let own_c = layout.common_of[k];
        let own_p = layout.private_column(k);
        // Σ_p = σ²I + every beam except the UT's own common and private ones.
        let mut interference = hb.clone();
        interference.column_mut(own_p).fill(real(T::zero()));
        if let Some(g) = own_c {
            interference.column_mut(g).fill(real(T::zero()));
        }
        let mut sigma = &interference * interference.adjoint();
        for i in 0..hb.nrows() {
            sigma[(i, i)] += real(noise);
        }
        let chol = cholesky(sigma)?;
        let white = |j: usize| {
            let mut v: CVec<T> = hb.column(j).into_owned();
            chol.l_dirty().solve_lower_triangular_mut(&mut v);
            v
        };
        Ok(UserTerms {
            white_c: own_c.map(white),
            white_p: white(own_p),
            chol,
        })
    }

    /// `(SINR_c, SINR_p)`.
    fn sinrs(&self) -> (T, T) {
        let d = norm_sqr(&self.white_p);
        let sinr_c = self.white_c.as_ref().map_or(T::zero(), |x| {
            let a = norm_sqr(x);
            let b = x.dotc(&self.white_p).norm_sqr();
            (a - b / (T::one() + d)).max(T::zero())
        });
        (sinr_c, d)
    }
}

fn log2_1p<T: Real>(x: T) -> T {
    x.ln_1p() / T::ln_2()
}

/// `(f_c, f_p)` of every UT for channel matrices `C_k` and the given layout.
pub fn instantaneous_rates<T: Real>(
    channels: &[CMat<T>],
    layout: &StreamLayout<T>,
    noise: T,
) -> Result<(Vec<T>, Vec<T>)> {
    check_noise(noise)?;
    if channels.len() != layout.num_uts() {
        return Err(Error::invalid("one channel matrix per UT required"));
    }
    let mut f_c = Vec::with_capacity(channels.len());
    let mut f_p = Vec::with_capacity(channels.len());
    for (k, c) in channels.iter().enumerate() {
        if c.ncols() != layout.beams.nrows() {
            return Err(Error::invalid("channel width differs from beam length"));
        }
        let (sc, sp) = UserTerms::new(&(c * &layout.beams), layout, k, noise)?.sinrs();
        f_c.push(log2_1p(sc));
        f_p.push(log2_1p(sp));
    }
    Ok((f_c, f_p))
}

/// `G_kᴴĤ_k` (`S × MS`): same Gram matrix as `Ĥ_k`, so the same rates.
pub fn reduced_channel<T: Real>(channel: &EffectiveChannel<T>) -> CMat<T> {
    channel.g_block.adjoint() * &channel.h_hat
}

/// Closed-form upper bounds `(f_c^UB, f_p^UB)` from the effective channels.
pub fn rate_upper_bounds<T: Real>(
    channels: &[EffectiveChannel<T>],
    layout: &StreamLayout<T>,
    noise: T,
) -> Result<(Vec<T>, Vec<T>)> {
    let reduced: Vec<CMat<T>> = channels.iter().map(reduced_channel).collect();
    instantaneous_rates(&reduced, layout, noise)
}

/// `e = |1 − uᴴC_k b_own|² + uᴴΣu` for UT `k`'s `stream`.
pub fn mse<T: Real>(u: &CVec<T>, layout: &StreamLayout<T>, channel: &CMat<T>, k: usize, noise: T, stream: Stream) -> T {
    let hb = channel * &layout.beams;
    let own_c = layout.common_of[k];
    let own_p = layout.private_column(k);
    let own = match stream {
        Stream::Common => own_c,
        Stream::Private => Some(own_p),
    };
    let mut e = noise * norm_sqr(u);
    for j in 0..hb.ncols() {
        let uh = u.dotc(&hb.column(j));
        if Some(j) == own {
            e += (real(T::one()) - uh).norm_sqr();
        } else if stream == Stream::Common || Some(j) != own_c {
            e += uh.norm_sqr();
        }
    }
    if own.is_none() {
        e += T::one();
    }
    e
}

/// MMSE combiners and weights `v = 1/e = 1 + SINR` for every UT and stream.
pub fn optimal_combiners_weights<T: Real>(
    channels: &[CMat<T>],
    layout: &StreamLayout<T>,
    noise: T,
) -> Result<CombinerSet<T>> {
    check_noise(noise)?;
    let k_total = layout.num_uts();
    let mut set = CombinerSet {
        u_c: Vec::with_capacity(k_total),
        u_p: Vec::with_capacity(k_total),
        v_c: Vec::with_capacity(k_total),
        v_p: Vec::with_capacity(k_total),
        e_c: Vec::with_capacity(k_total),
        e_p: Vec::with_capacity(k_total),
    };
    for (k, c) in channels.iter().enumerate() {
        let hb = c * &layout.beams;
        let terms = UserTerms::new(&hb, layout, k, noise)?;
        let (sinr_c, sinr_p) = terms.sinrs();
        let l = terms.chol.l_dirty();
        // u_p = Σ_p⁻¹h_p / (1 + h_pᴴΣ_p⁻¹h_p)
        let mut u_p = terms.white_p.clone();
        l.adjoint().solve_upper_triangular_mut(&mut u_p);
        u_p /= real(T::one() + sinr_p);
        // u_c = Σ_c⁻¹h_c / (1 + SINR_c), Σ_c = Σ_p + h_p h_pᴴ
        let u_c = match layout.common_of[k] {
            Some(g) => {
                let hc: CVec<T> = hb.column(g).into_owned();
                let hp: CVec<T> = hb.column(layout.private_column(k)).into_owned();
                let solve = |v: &CVec<T>| terms.chol.solve(v);
                let a = solve(&hc);
                let b = solve(&hp);
                let coef = hp.dotc(&a) / real(T::one() + sinr_p);
                let sc_inv_hc = a - b * coef;
                sc_inv_hc / real(T::one() + sinr_c)
            }
            None => CVec::zeros(hb.nrows()),
        };
        set.u_c.push(u_c);
        set.u_p.push(u_p);
        set.v_c.push(T::one() + sinr_c);
        set.v_p.push(T::one() + sinr_p);
        set.e_c.push(T::one() / (T::one() + sinr_c));
        set.e_p.push(T::one() / (T::one() + sinr_p));
    }
    Ok(set)
}

/// Lifts combiners from the reduced `S`-dimensional space to the `MS`-dimensional
/// effective-channel space (`u = G_k ũ`).
pub fn lift_combiners<T: Real>(set: &CombinerSet<T>, channels: &[EffectiveChannel<T>]) -> CombinerSet<T> {
    let lift = |u: &[CVec<T>]| u.iter().zip(channels).map(|(v, ch)| &ch.g_block * v).collect();
    CombinerSet {
        u_c: lift(&set.u_c),
        u_p: lift(&set.u_p),
        ..set.clone()
    }
}

/// Water-filling split of the common budget `min_k f_c` maximizing
/// `min_k (R_c,k + f_p,k)`. Returns `(R_c_alloc, mmfr)`.
pub fn allocate_common_rate<T: Real>(f_c: &[T], f_p: &[T]) -> (Vec<T>, T) {
    let budget = f_c
        .iter()
        .fold(T::max_value().expect("bounded real type"), |m, &v| m.min(v))
        .max(T::zero());
    water_fill(f_p, budget)
}

fn water_fill<T: Real>(f_p: &[T], budget: T) -> (Vec<T>, T) {
    if f_p.is_empty() {
        return (Vec::new(), T::zero());
    }
    let mut sorted = f_p.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite rates"));
    let mut acc = budget;
    let mut level = sorted[sorted.len() - 1];
    for (j, &p) in sorted.iter().enumerate() {
        acc += p;
        let candidate = acc / T::from_usize(j + 1).unwrap();
        if j + 1 == sorted.len() || candidate <= sorted[j + 1] {
            level = candidate;
            break;
        }
    }
    let mut alloc: Vec<T> = f_p.iter().map(|&p| (level - p).max(T::zero())).collect();
    // Rounding must never overspend the budget.
    let spent = alloc.iter().fold(T::zero(), |a, &v| a + v);
    if spent > budget && spent > T::zero() {
        let shrink = budget / spent;
        alloc.iter_mut().for_each(|v| *v *= shrink);
    }
    let mmfr = f_p
        .iter()
        .zip(&alloc)
        .fold(T::max_value().unwrap(), |m, (&p, &a)| m.min(p + a));
    (alloc, mmfr)
}

/// Common-rate split when UTs decode different common streams: each group
/// splits its own budget (`min` of its members' `f_c`); UTs without a common
/// stream keep `f_p`. Returns the allocation and the overall MMFR.
pub fn allocate_grouped<T: Real>(f_c: &[T], f_p: &[T], common_of: &[Option<usize>]) -> (Vec<T>, T) {
    let mut alloc = vec![T::zero(); f_p.len()];
    let groups = common_of.iter().flatten().copied().max().map_or(0, |g| g + 1);
    for g in 0..groups {
        let members: Vec<usize> = (0..f_p.len()).filter(|&k| common_of[k] == Some(g)).collect();
        let gc: Vec<T> = members.iter().map(|&k| f_c[k]).collect();
        let gp: Vec<T> = members.iter().map(|&k| f_p[k]).collect();
        let (a, _) = allocate_common_rate(&gc, &gp);
        for (&k, v) in members.iter().zip(a) {
            alloc[k] = v;
        }
    }
    let mmfr = f_p
        .iter()
        .zip(&alloc)
        .fold(T::max_value().unwrap(), |m, (&p, &a)| m.min(p + a));
    (alloc, if f_p.is_empty() { T::zero() } else { mmfr })
}

/// Linearization of the MMFR around the mean rates: for the group attaining
/// the minimum, the water level is `(f_c,k* + Σ_active f_p) / |active|`.
/// Returns the weight on each UT's `f_c` and `f_p`.
fn mmfr_gradient<T: Real>(f_c: &[T], f_p: &[T], common_of: &[Option<usize>]) -> (Vec<T>, Vec<T>) {
    let (alloc, mmfr) = allocate_grouped(f_c, f_p, common_of);
    let n = f_p.len();
    let (mut wc, mut wp) = (vec![T::zero(); n], vec![T::zero(); n]);
    let Some(worst) = (0..n).min_by(|&a, &b| {
        (alloc[a] + f_p[a])
            .partial_cmp(&(alloc[b] + f_p[b]))
            .expect("finite rates")
    }) else {
        return (wc, wp);
    };
    let tol = T::lit(1e-12) * T::one().max(mmfr.abs());
    match common_of[worst] {
        None => wp[worst] = T::one(),
        Some(g) => {
            let members: Vec<usize> = (0..n).filter(|&k| common_of[k] == Some(g)).collect();
            let bottleneck = *members
                .iter()
                .min_by(|&&a, &&b| f_c[a].partial_cmp(&f_c[b]).expect("finite rates"))
                .expect("nonempty group");
            let active: Vec<usize> = members.iter().copied().filter(|&k| f_p[k] <= mmfr + tol).collect();
            let share = T::one() / T::from_usize(active.len().max(1)).unwrap();
            wc[bottleneck] = share;
            for k in active {
                wp[k] = share;
            }
        }
    }
    (wc, wp)
}

/// Ergodic rates by Monte Carlo over `n_samples` channel draws.
///
/// Draws are split into chunks of [`MC_CHUNK`]; chunk `i` uses the ChaCha8
/// stream `i` of `seed`, and chunk results are reduced in index order, so the
/// output is bit-identical for any thread count.
pub fn ergodic_rates_mc<T: Real>(
    stats: &ChannelStatistics<T>,
    layout: &StreamLayout<T>,
    noise: T,
    n_samples: usize,
    seed: u64,
) -> Result<RateReport<T>> {
    check_noise(noise)?;
    if n_samples < 2 {
        return Err(Error::invalid("at least two Monte Carlo samples are required"));
    }
    if stats.num_uts() != layout.num_uts() {
        return Err(Error::invalid("statistics and layout disagree on the UT count"));
    }
    let samplers: Vec<ReceiveSampler<T>> = stats
        .links
        .iter()
        .map(|row| ReceiveSampler::new(row))
        .collect::<Result<_>>()?;
    // A_k = G_kᴴB, so that H_kB = D_k A_k.
    let projected: Vec<CMat<T>> = stats
        .links
        .iter()
        .map(|row| transmit_block(row).adjoint() * &layout.beams)
        .collect();
    let k_total = layout.num_uts();
    let chunks = n_samples.div_ceil(MC_CHUNK);
    let per_chunk: Vec<Result<Vec<(Vec<T>, Vec<T>)>>> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = mc_stream(seed, chunk);
            let count = MC_CHUNK.min(n_samples - chunk * MC_CHUNK);
            let mut out = Vec::with_capacity(count);
            let mut d: Vec<CMat<T>> = samplers
                .iter()
                .zip(&stats.links)
                .map(|(_, row)| CMat::zeros(stats.num_ut_antennas, row.len()))
                .collect();
            for _ in 0..count {
                let mut f_c = Vec::with_capacity(k_total);
                let mut f_p = Vec::with_capacity(k_total);
                for k in 0..k_total {
                    samplers[k].sample_into(&mut rng, &mut d[k]);
                    let hb = &d[k] * &projected[k];
                    let (sc, sp) = UserTerms::new(&hb, layout, k, noise)?.sinrs();
                    f_c.push(log2_1p(sc));
                    f_p.push(log2_1p(sp));
                }
                out.push((f_c, f_p));
            }
            Ok(out)
        })
        .collect();
    let mut samples = Vec::with_capacity(n_samples);
    for chunk in per_chunk {
        samples.extend(chunk?);
    }
    Ok(summarize_samples(&samples, &layout.common_of))
}

/// RNG for Monte Carlo chunk `chunk` of `seed`.
pub fn mc_stream(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// Means, standard errors and the MMFR of per-draw `(f_c, f_p)` samples.
pub fn summarize_samples<T: Real>(samples: &[(Vec<T>, Vec<T>)], common_of: &[Option<usize>]) -> RateReport<T> {
    let n = samples.len();
    let k_total = common_of.len();
    let nt = T::from_usize(n).unwrap();
    let mean = |pick: &dyn Fn(&(Vec<T>, Vec<T>)) -> &Vec<T>| {
        let mut m = vec![T::zero(); k_total];
        for s in samples {
            for (acc, &v) in m.iter_mut().zip(pick(s)) {
                *acc += v;
            }
        }
        m.iter_mut().for_each(|v| *v /= nt);
        m
    };
    let f_c = mean(&|s| &s.0);
    let f_p = mean(&|s| &s.1);
    let stderr_of = |values: &mut dyn Iterator<Item = T>, mu: T| {
        let ss = values.fold(T::zero(), |a, v| a + (v - mu) * (v - mu));
        (ss / (nt - T::one()) / nt).sqrt()
    };
    let f_c_stderr = (0..k_total)
        .map(|k| stderr_of(&mut samples.iter().map(|s| s.0[k]), f_c[k]))
        .collect();
    let f_p_stderr = (0..k_total)
        .map(|k| stderr_of(&mut samples.iter().map(|s| s.1[k]), f_p[k]))
        .collect();
    let (r_c_alloc, mmfr) = allocate_grouped(&f_c, &f_p, common_of);
    let (wc, wp) = mmfr_gradient(&f_c, &f_p, common_of);
    let lin = |s: &(Vec<T>, Vec<T>)| (0..k_total).fold(T::zero(), |a, k| a + wc[k] * s.0[k] + wp[k] * s.1[k]);
    let lin_mean = samples.iter().fold(T::zero(), |a, s| a + lin(s)) / nt;
    let mmfr_stderr = stderr_of(&mut samples.iter().map(lin), lin_mean);
    RateReport {
        f_c,
        f_p,
        f_c_stderr,
        f_p_stderr,
        r_c_alloc,
        mmfr,
        mmfr_stderr,
    }
}
