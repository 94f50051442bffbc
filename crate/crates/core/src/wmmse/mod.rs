//! WMMSE precoder optimization: alternating closed-form combiner/weight
//! updates with a convex (SOCP) precoder update, plus the baseline variants.

mod subproblem;
mod variants;

pub use subproblem::{build_subproblem, satellite_bases, Subproblem, SUBSPACE_TOL};
pub use variants::{inject_common, optimize_variant, optimize_variants, IcsiSummary, VariantInputs, VariantResult};

use serde::{Deserialize, Serialize};

use crate::channel::EffectiveChannel;
use crate::error::{Error, Result};
use crate::linalg::{dominant_eigenvector, CMat};
use crate::rates::{
    allocate_common_rate, instantaneous_rates, optimal_combiners_weights, reduced_channel, PrecodingMatrix,
};
use crate::scalar::{real, Real};
use crate::socp::{ConicSolver, InteriorPoint, SolveStatus, SolverSettings};

/// Fraction of `P` each satellite uses at initialization.
pub const INIT_POWER_FRACTION: f64 = 1.0 - 1e-6;

/// The designs compared in the experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    RsmaScsi,
    SdmaScsi,
    RsmaDcsi,
    SdmaDcsi,
    RsmaNoncoop,
    SdmaNoncoop,
    RsmaIcsi,
    SdmaIcsi,
}

/// Channel knowledge a variant designs with.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Csi {
    /// Full statistics (`Ĥ_k`).
    Statistical,
    /// LoS components only.
    Directional,
    /// Statistics, but each UT served by its nearest satellite alone.
    NonCooperative,
    /// Instantaneous realizations.
    Instantaneous,
}

impl Variant {
    pub const ALL: [Variant; 8] = [
        Variant::RsmaScsi,
        Variant::SdmaScsi,
        Variant::RsmaDcsi,
        Variant::SdmaDcsi,
        Variant::RsmaNoncoop,
        Variant::SdmaNoncoop,
        Variant::RsmaIcsi,
        Variant::SdmaIcsi,
    ];

    pub fn is_rsma(self) -> bool {
        matches!(
            self,
            Variant::RsmaScsi | Variant::RsmaDcsi | Variant::RsmaNoncoop | Variant::RsmaIcsi
        )
    }

    pub fn csi(self) -> Csi {
        match self {
            Variant::RsmaScsi | Variant::SdmaScsi => Csi::Statistical,
            Variant::RsmaDcsi | Variant::SdmaDcsi => Csi::Directional,
            Variant::RsmaNoncoop | Variant::SdmaNoncoop => Csi::NonCooperative,
            Variant::RsmaIcsi | Variant::SdmaIcsi => Csi::Instantaneous,
        }
    }

    /// The SDMA counterpart with the same channel knowledge.
    pub fn sdma(self) -> Variant {
        match self.csi() {
            Csi::Statistical => Variant::SdmaScsi,
            Csi::Directional => Variant::SdmaDcsi,
            Csi::NonCooperative => Variant::SdmaNoncoop,
            Csi::Instantaneous => Variant::SdmaIcsi,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::RsmaScsi => "rsma-scsi",
            Variant::SdmaScsi => "sdma-scsi",
            Variant::RsmaDcsi => "rsma-dcsi",
            Variant::SdmaDcsi => "sdma-dcsi",
            Variant::RsmaNoncoop => "rsma-noncoop",
            Variant::SdmaNoncoop => "sdma-noncoop",
            Variant::RsmaIcsi => "rsma-icsi",
            Variant::SdmaIcsi => "sdma-icsi",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown variant `{s}`")))
    }
}

/// Loop controls and the power budget of one optimization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    pub max_iters: usize,
    pub rel_obj_tol: f64,
    pub solver_tol: f64,
    /// Per-satellite power budget `P` in watts.
    pub power_budget: f64,
    pub variant: Variant,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            max_iters: 100,
            rel_obj_tol: 1e-5,
            solver_tol: 1e-7,
            power_budget: 10f64.powf(1.5),
            variant: Variant::RsmaScsi,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if !(self.rel_obj_tol > 0.0 && self.solver_tol > 0.0) {
            return Err(Error::invalid("tolerances must be positive"));
        }
        if !(self.power_budget > 0.0 && self.power_budget.is_finite()) {
            return Err(Error::invalid("power budget must be positive"));
        }
        Ok(())
    }
}

/// Per-iteration record of one WMMSE run. Index 0 is the starting point.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    /// Upper-bound MMFR (bits/s/Hz).
    pub objective: Vec<f64>,
    /// Per-satellite transmit powers (W).
    pub satellite_powers: Vec<Vec<f64>>,
    pub solver_status: Vec<SolveStatus>,
    pub solver_iterations: Vec<usize>,
    /// `max(primal residual, dual residual, relative gap)` of each solve.
    pub kkt_residual: Vec<f64>,
    /// Optimal `t` of each subproblem.
    pub subproblem_value: Vec<f64>,
}

impl IterationTrace {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// What one design run sees: a channel matrix `C_k` per UT (any row count;
/// see [`crate::rates`]), the access mask and the noise power.
#[derive(Clone, Debug)]
pub struct DesignProblem<T: Real> {
    pub channels: Vec<CMat<T>>,
    /// `mask[s][k]`.
    pub mask: Vec<Vec<bool>>,
    pub antennas_per_satellite: usize,
    pub noise: T,
}

impl<T: Real> DesignProblem<T> {
    pub fn new(channels: Vec<CMat<T>>, mask: Vec<Vec<bool>>, antennas_per_satellite: usize, noise: T) -> Result<Self> {
        let k = channels.len();
        let s = mask.len();
        if k == 0 || s == 0 || mask.iter().any(|r| r.len() != k) {
            return Err(Error::invalid("mask must be S × K with K ≥ 1"));
        }
        if channels.iter().any(|c| c.ncols() != s * antennas_per_satellite) {
            return Err(Error::invalid("channel width must be M·S"));
        }
        if !(noise > T::zero()) {
            return Err(Error::invalid("noise variance must be positive"));
        }
        if let Some(ut) = (0..k).find(|&ut| mask.iter().all(|row| !row[ut])) {
            return Err(Error::Uncovered { ut });
        }
        Ok(DesignProblem {
            channels,
            mask,
            antennas_per_satellite,
            noise,
        })
    }

    /// Design from effective channels, using their reduced `S × MS` form.
    pub fn from_effective(
        channels: &[EffectiveChannel<T>],
        mask: Vec<Vec<bool>>,
        antennas_per_satellite: usize,
        noise: T,
    ) -> Result<Self> {
        Self::new(
            channels.iter().map(reduced_channel).collect(),
            mask,
            antennas_per_satellite,
            noise,
        )
    }

    pub fn num_uts(&self) -> usize {
        self.channels.len()
    }

    pub fn num_satellites(&self) -> usize {
        self.mask.len()
    }

    /// `(f_c, f_p)` of a precoder on the design channels.
    pub fn rates(&self, q: &PrecodingMatrix<T>) -> Result<(Vec<T>, Vec<T>)> {
        instantaneous_rates(&self.channels, &q.layout(), self.noise)
    }

    /// Max-min fair rate of a precoder on the design channels.
    pub fn objective(&self, q: &PrecodingMatrix<T>) -> Result<T> {
        let (f_c, f_p) = self.rates(q)?;
        Ok(allocate_common_rate(&f_c, &f_p).1)
    }
}

/// `p_s(Q)`.
pub fn per_satellite_power<T: Real>(q: &PrecodingMatrix<T>, s: usize) -> T {
    q.satellite_power(s)
}

/// Deterministic feasible start: each private column is the dominant
/// eigenvector of `C_kᴴC_k` restricted to the satellites allowed by the mask,
/// the common column (RSMA only) the dominant eigenvector of `Σ_k C_kᴴC_k`.
/// Every satellite block is then scaled to power `P·(1 − 1e−6)`; satellites
/// that carry no stream stay silent.
pub fn initialize_precoder<T: Real>(
    problem: &DesignProblem<T>,
    power_budget: T,
    rsma: bool,
) -> Result<PrecodingMatrix<T>> {
    let m = problem.antennas_per_satellite;
    let ms = m * problem.num_satellites();
    let k_total = problem.num_uts();
    let mut q = CMat::zeros(ms, k_total + 1);
    if rsma {
        let mut total = CMat::zeros(ms, ms);
        for c in &problem.channels {
            total += c.adjoint() * c;
        }
        q.set_column(0, &dominant_eigenvector(&total).1);
    }
    for (k, c) in problem.channels.iter().enumerate() {
        let mut gram = c.adjoint() * c;
        for (s, row) in problem.mask.iter().enumerate() {
            if !row[k] {
                gram.view_mut((s * m, 0), (m, ms)).fill(real(T::zero()));
                gram.view_mut((0, s * m), (ms, m)).fill(real(T::zero()));
            }
        }
        let (_, mut v) = dominant_eigenvector(&gram);
        for (s, row) in problem.mask.iter().enumerate() {
            if !row[k] {
                v.rows_mut(s * m, m).fill(real(T::zero()));
            }
        }
        q.set_column(k + 1, &v);
    }
    let mut p = PrecodingMatrix::masked(q, problem.mask.clone(), m)?;
    let target = power_budget * T::lit(INIT_POWER_FRACTION);
    for s in 0..problem.num_satellites() {
        let power = p.satellite_power(s);
        if power > T::zero() {
            p.scale_satellite(s, (target / power).sqrt());
        }
    }
    if p.satellite_powers().iter().all(|&x| x == T::zero()) {
        return Err(Error::invalid("initial precoder is identically zero"));
    }
    Ok(p)
}

/// Outcome of one WMMSE run.
#[derive(Clone, Debug)]
pub struct Optimized<T: Real> {
    pub precoder: PrecodingMatrix<T>,
    /// Upper-bound MMFR of `precoder`.
    pub objective: T,
    pub f_c: Vec<T>,
    pub f_p: Vec<T>,
    /// Rate variables of the last subproblem.
    pub r_c: Vec<T>,
    pub r_p: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    pub trace: IterationTrace,
}

fn record<T: Real>(trace: &mut IterationTrace, objective: T, q: &PrecodingMatrix<T>) {
    trace.objective.push(objective.as_f64());
    trace
        .satellite_powers
        .push(q.satellite_powers().into_iter().map(Real::as_f64).collect());
}

/// Alternates the closed-form `(u, v)` update with the convex `(Q, R)` update
/// from `start` until the relative objective change drops below
/// `rel_obj_tol` or `max_iters` updates have run. Returns the best iterate.
pub fn wmmse_optimize<T: Real>(
    problem: &DesignProblem<T>,
    start: PrecodingMatrix<T>,
    settings: &OptimizerSettings,
    rsma: bool,
) -> Result<Optimized<T>> {
    settings.validate()?;
    let power = T::lit(settings.power_budget);
    let solver = InteriorPoint::new(SolverSettings {
        tol: T::lit(settings.solver_tol),
        ..SolverSettings::default()
    });
    let bases = satellite_bases(problem);
    let mut trace = IterationTrace::default();
    let mut q = start;
    let mut objective = problem.objective(&q)?;
    record(&mut trace, objective, &q);
    let mut best = (q.clone(), objective);
    let (mut r_c, mut r_p) = (Vec::new(), Vec::new());
    let mut converged = false;
    let mut iterations = 0;
    for iteration in 1..=settings.max_iters {
        let combiners = optimal_combiners_weights(&problem.channels, &q.layout(), problem.noise)?;
        let sub = subproblem::build_with_bases(problem, &combiners, power, rsma, bases.clone())?;
        let sol = solver.solve(&sub.program).map_err(|e| Error::Solver {
            status: e.status(),
            iteration,
        })?;
        trace.solver_status.push(sol.status);
        trace.solver_iterations.push(sol.iterations);
        trace.kkt_residual.push(
            sol.primal_residual
                .max(sol.dual_residual)
                .max(sol.relative_gap())
                .as_f64(),
        );
        trace.subproblem_value.push((-sol.primal_objective).as_f64());
        let next = sub.precoder(&sol.x)?;
        let (rc, rp, _) = sub.rates(&sol.x);
        r_c = rc;
        r_p = rp;
        let next_objective = problem.objective(&next)?;
        record(&mut trace, next_objective, &next);
        iterations = iteration;
        let change = (next_objective - objective).abs() / objective.abs().max(T::lit(1e-12));
        q = next;
        objective = next_objective;
        if objective > best.1 {
            best = (q.clone(), objective);
        }
        if change < T::lit(settings.rel_obj_tol) {
            converged = true;
            break;
        }
    }
    let (precoder, objective) = best;
    let (f_c, f_p) = problem.rates(&precoder)?;
    Ok(Optimized {
        precoder,
        objective,
        f_c,
        f_p,
        r_c,
        r_p,
        iterations,
        converged,
        trace,
    })
}

/// One design with the chosen stream structure.
///
/// SDMA runs from the matched-filter start with `q_c = 0`. RSMA runs from the
/// matched-filter start; since every SDMA precoder is also an RSMA precoder,
/// the SDMA design (given or computed) is a candidate too, and when it beats
/// the RSMA run a second RSMA run starts from it with a common beam injected.
/// The best candidate is returned.
pub fn design<T: Real>(
    problem: &DesignProblem<T>,
    settings: &OptimizerSettings,
    rsma: bool,
    sdma: Option<&Optimized<T>>,
) -> Result<Optimized<T>> {
    let power = T::lit(settings.power_budget);
    if !rsma {
        let start = initialize_precoder(problem, power, false)?;
        return wmmse_optimize(problem, start, settings, false);
    }
    let computed;
    let sdma = match sdma {
        Some(s) => s,
        None => {
            computed = design(problem, settings, false, None)?;
            &computed
        }
    };
    let start = initialize_precoder(problem, power, true)?;
    let mut best = wmmse_optimize(problem, start, settings, true)?;
    if best.objective < sdma.objective {
        let injected = inject_common(problem, &sdma.precoder, power)?;
        let restarted = wmmse_optimize(problem, injected, settings, true)?;
        if restarted.objective > best.objective {
            best = restarted;
        }
        if sdma.objective > best.objective {
            let mut fallback = sdma.clone();
            fallback.trace = best.trace.clone();
            fallback.iterations = best.iterations;
            best = fallback;
        }
    }
    Ok(best)
}
