//! The compared designs: cooperative sCSI, LoS-only (dCSI), per-satellite
//! (non-cooperative) and per-realization (iCSI), each with and without a
//! common stream.

use rayon::prelude::*;

use super::{design, initialize_precoder, Csi, DesignProblem, IterationTrace, Optimized, OptimizerSettings, Variant};
use crate::channel::{
    effective_channel, effective_channel_los_only, sample_realization, ChannelStatistics, EffectiveChannel,
};
use crate::error::{Error, Result};
use crate::linalg::{norm_sqr, CMat};
use crate::rates::{allocate_grouped, mc_stream, rate_upper_bounds, PrecodingMatrix, StreamLayout};
use crate::scalar::{real, Real};

/// Fraction of each satellite's power moved into the injected common beam.
pub const INJECTED_COMMON_FRACTION: f64 = 0.1;

/// Everything a variant may use at design time.
#[derive(Clone, Debug)]
pub struct VariantInputs<'a, T: Real> {
    pub stats: &'a ChannelStatistics<T>,
    /// `mask[s][k]`.
    pub mask: &'a [Vec<bool>],
    /// Nearest satellite of every UT.
    pub nearest: &'a [usize],
    pub noise: T,
    /// Realizations designed for by the iCSI variants.
    pub design_realizations: usize,
    /// Seed of the iCSI realizations.
    pub seed: u64,
}

/// Mean and standard error of the per-realization MMFR of an iCSI design.
#[derive(Clone, Debug, PartialEq)]
pub struct IcsiSummary<T> {
    pub mmfr: Vec<T>,
    pub mean: T,
    pub stderr: T,
}

/// A designed transmission strategy.
#[derive(Clone, Debug)]
pub struct VariantResult<T: Real> {
    pub variant: Variant,
    /// Beams and decoding roles. For iCSI, those of the first realization.
    pub layout: StreamLayout<T>,
    /// Single-common-stream precoder, when the variant has one.
    pub precoder: Option<PrecodingMatrix<T>>,
    /// Upper-bound MMFR of `layout` under the true statistics. For iCSI, the
    /// mean designed instantaneous MMFR.
    pub mmfr_ub: T,
    pub iterations: usize,
    pub converged: bool,
    pub trace: IterationTrace,
    pub icsi: Option<IcsiSummary<T>>,
}

fn effective_channels<T: Real>(stats: &ChannelStatistics<T>, los_only: bool) -> Result<Vec<EffectiveChannel<T>>> {
    stats
        .links
        .iter()
        .map(|row| {
            if los_only {
                effective_channel_los_only(row)
            } else {
                effective_channel(row)
            }
        })
        .collect()
}

/// Copy of `sdma` with a common beam added: every satellite moves
/// [`INJECTED_COMMON_FRACTION`] of its power into the common column, along
/// the initializer's common direction.
pub fn inject_common<T: Real>(
    problem: &DesignProblem<T>,
    sdma: &PrecodingMatrix<T>,
    power_budget: T,
) -> Result<PrecodingMatrix<T>> {
    let m = problem.antennas_per_satellite;
    let init = initialize_precoder(problem, power_budget, true)?;
    let eps = T::lit(INJECTED_COMMON_FRACTION);
    let mut q = sdma.matrix().clone();
    for s in 0..problem.num_satellites() {
        let direction = init.block(0, s);
        let dir_power = norm_sqr(&direction);
        if dir_power == T::zero() {
            continue;
        }
        let power = sdma.satellite_power(s);
        let common_power = if power > T::zero() {
            eps * power
        } else {
            eps * power_budget
        };
        let keep = (T::one() - eps).sqrt();
        if power > T::zero() {
            q.view_mut((s * m, 1), (m, q.ncols() - 1)).scale_mut(keep);
        }
        let beam = direction * real((common_power / dir_power).sqrt());
        q.view_mut((s * m, 0), (m, 1)).copy_from(&beam);
    }
    PrecodingMatrix::new(q, sdma.mask().to_vec(), m)
}

fn upper_bound<T: Real>(channels: &[EffectiveChannel<T>], layout: &StreamLayout<T>, noise: T) -> Result<T> {
    let (f_c, f_p) = rate_upper_bounds(channels, layout, noise)?;
    Ok(allocate_grouped(&f_c, &f_p, &layout.common_of).1)
}

fn from_optimized<T: Real>(
    variant: Variant,
    opt: Optimized<T>,
    truth: &[EffectiveChannel<T>],
    noise: T,
) -> Result<VariantResult<T>> {
    let layout = opt.precoder.layout();
    Ok(VariantResult {
        variant,
        mmfr_ub: upper_bound(truth, &layout, noise)?,
        layout,
        precoder: Some(opt.precoder),
        iterations: opt.iterations,
        converged: opt.converged,
        trace: opt.trace,
        icsi: None,
    })
}

fn settings_for(settings: &OptimizerSettings, variant: Variant) -> OptimizerSettings {
    OptimizerSettings { variant, ..*settings }
}

/// Designs a group of variants that share channel knowledge. SDMA is designed
/// first (when any member needs it) and reused as a start for RSMA.
fn statistical_group<T: Real>(
    inputs: &VariantInputs<'_, T>,
    settings: &OptimizerSettings,
    csi: Csi,
    wanted: &[Variant],
) -> Result<Vec<VariantResult<T>>> {
    let truth = effective_channels(inputs.stats, false)?;
    let design_channels = if csi == Csi::Directional {
        effective_channels(inputs.stats, true)?
    } else {
        truth.clone()
    };
    let m = inputs.stats.num_sat_antennas;
    let problem = DesignProblem::from_effective(&design_channels, inputs.mask.to_vec(), m, inputs.noise)?;
    let sdma_variant = wanted[0].sdma();
    let sdma = design(&problem, &settings_for(settings, sdma_variant), false, None)?;
    let mut out = Vec::new();
    for &v in wanted {
        let opt = if v.is_rsma() {
            design(&problem, &settings_for(settings, v), true, Some(&sdma))?
        } else {
            sdma.clone()
        };
        out.push(from_optimized(v, opt, &truth, inputs.noise)?);
    }
    Ok(out)
}

/// Each satellite designs alone for the UTs it is nearest to; the per-satellite
/// designs are stacked into one layout with one common stream per satellite.
fn noncooperative<T: Real>(
    inputs: &VariantInputs<'_, T>,
    settings: &OptimizerSettings,
    variant: Variant,
) -> Result<VariantResult<T>> {
    let stats = inputs.stats;
    let (sats, k_total, m) = (stats.num_satellites(), stats.num_uts(), stats.num_sat_antennas);
    if inputs.nearest.len() != k_total || inputs.nearest.iter().any(|&s| s >= sats) {
        return Err(Error::invalid("nearest-satellite table does not match the statistics"));
    }
    let rsma = variant.is_rsma();
    let groups: Vec<(usize, Vec<usize>)> = (0..sats)
        .map(|s| (s, (0..k_total).filter(|&k| inputs.nearest[k] == s).collect::<Vec<_>>()))
        .filter(|(_, uts)| !uts.is_empty())
        .collect();
    let num_common = if rsma { groups.len() } else { 0 };
    let mut beams = CMat::zeros(m * sats, num_common + k_total);
    let mut common_of = vec![None; k_total];
    let mut trace = IterationTrace::default();
    let (mut iterations, mut converged) = (0, true);
    let local_settings = settings_for(settings, variant);
    for (g, (s, uts)) in groups.iter().enumerate() {
        let local = stats.restrict_uts(uts).restrict_satellites(&[*s]);
        let eff = effective_channels(&local, false)?;
        let problem = DesignProblem::from_effective(&eff, vec![vec![true; uts.len()]], m, inputs.noise)?;
        let opt = design(&problem, &local_settings, rsma, None)?;
        let q = opt.precoder.matrix();
        if rsma {
            beams.view_mut((s * m, g), (m, 1)).copy_from(&q.column(0));
        }
        for (i, &k) in uts.iter().enumerate() {
            beams
                .view_mut((s * m, num_common + k), (m, 1))
                .copy_from(&q.column(i + 1));
            if rsma {
                common_of[k] = Some(g);
            }
        }
        iterations = iterations.max(opt.iterations);
        converged &= opt.converged;
        if g == 0 {
            trace = opt.trace;
        }
    }
    let layout = StreamLayout::new(beams, num_common, common_of)?;
    let truth = effective_channels(stats, false)?;
    Ok(VariantResult {
        variant,
        mmfr_ub: upper_bound(&truth, &layout, inputs.noise)?,
        layout,
        precoder: None,
        iterations,
        converged,
        trace,
        icsi: None,
    })
}

/// Designs on instantaneous channels, one WMMSE run per realization.
fn instantaneous<T: Real>(
    inputs: &VariantInputs<'_, T>,
    settings: &OptimizerSettings,
    wanted: &[Variant],
) -> Result<Vec<VariantResult<T>>> {
    if inputs.design_realizations < 2 {
        return Err(Error::invalid("iCSI needs at least two design realizations"));
    }
    let m = inputs.stats.num_sat_antennas;
    let want_rsma = wanted.iter().any(|v| v.is_rsma());
    let per_draw: Vec<Result<(Optimized<T>, Option<Optimized<T>>, T, Option<T>)>> = (0..inputs.design_realizations)
        .into_par_iter()
        .map(|r| {
            let mut rng = mc_stream(inputs.seed, r);
            let draw = sample_realization(inputs.stats, &mut rng)?;
            let problem = DesignProblem::new(draw.h, inputs.mask.to_vec(), m, inputs.noise)?;
            let sdma = design(&problem, &settings_for(settings, Variant::SdmaIcsi), false, None)?;
            let sdma_mmfr = sdma.objective;
            let rsma = if want_rsma {
                Some(design(
                    &problem,
                    &settings_for(settings, Variant::RsmaIcsi),
                    true,
                    Some(&sdma),
                )?)
            } else {
                None
            };
            let rsma_mmfr = rsma.as_ref().map(|o| o.objective);
            Ok((sdma, rsma, sdma_mmfr, rsma_mmfr))
        })
        .collect();
    let draws: Vec<_> = per_draw.into_iter().collect::<Result<_>>()?;
    let summary = |values: Vec<T>| {
        let n = T::from_usize(values.len()).unwrap();
        let mean = values.iter().fold(T::zero(), |a, &v| a + v) / n;
        let ss = values.iter().fold(T::zero(), |a, &v| a + (v - mean) * (v - mean));
        IcsiSummary {
            stderr: (ss / (n - T::one()) / n).sqrt(),
            mean,
            mmfr: values,
        }
    };
    let mut out = Vec::new();
    for &v in wanted {
        let pick = |d: &(Optimized<T>, Option<Optimized<T>>, T, Option<T>)| -> Optimized<T> {
            if v.is_rsma() {
                d.1.clone().expect("RSMA designed")
            } else {
                d.0.clone()
            }
        };
        let values: Vec<T> = draws
            .iter()
            .map(|d| if v.is_rsma() { d.3.expect("RSMA designed") } else { d.2 })
            .collect();
        let first = pick(&draws[0]);
        let icsi = summary(values);
        out.push(VariantResult {
            variant: v,
            layout: first.precoder.layout(),
            precoder: Some(first.precoder),
            mmfr_ub: icsi.mean,
            iterations: draws.iter().map(|d| pick(d).iterations).max().unwrap_or(0),
            converged: draws.iter().all(|d| pick(d).converged),
            trace: first.trace,
            icsi: Some(icsi),
        });
    }
    Ok(out)
}

/// Designs one variant (`settings.variant`).
pub fn optimize_variant<T: Real>(
    inputs: &VariantInputs<'_, T>,
    settings: &OptimizerSettings,
) -> Result<VariantResult<T>> {
    optimize_variants(inputs, &[settings.variant], settings).map(|mut v| v.remove(0))
}

/// Designs several variants, sharing work between those with the same channel
/// knowledge. Results follow the order of `variants`.
pub fn optimize_variants<T: Real>(
    inputs: &VariantInputs<'_, T>,
    variants: &[Variant],
    settings: &OptimizerSettings,
) -> Result<Vec<VariantResult<T>>> {
    settings.validate()?;
    inputs.stats.validate()?;
    if variants.is_empty() {
        return Err(Error::invalid("no variants requested"));
    }
    let mut results: Vec<Option<VariantResult<T>>> = vec![None; variants.len()];
    for csi in [
        Csi::Statistical,
        Csi::Directional,
        Csi::NonCooperative,
        Csi::Instantaneous,
    ] {
        let idx: Vec<usize> = (0..variants.len()).filter(|&i| variants[i].csi() == csi).collect();
        if idx.is_empty() {
            continue;
        }
        let wanted: Vec<Variant> = idx.iter().map(|&i| variants[i]).collect();
        let group = match csi {
            Csi::Statistical | Csi::Directional => statistical_group(inputs, settings, csi, &wanted)?,
            Csi::NonCooperative => wanted
                .iter()
                .map(|&v| noncooperative(inputs, settings, v))
                .collect::<Result<_>>()?,
            Csi::Instantaneous => instantaneous(inputs, settings, &wanted)?,
        };
        for (i, r) in idx.into_iter().zip(group) {
            results[i] = Some(r);
        }
    }
    Ok(results
        .into_iter()
        .map(|r| r.expect("every variant designed"))
        .collect())
}
