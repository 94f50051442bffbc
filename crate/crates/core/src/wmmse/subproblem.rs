//! The convex block update of the WMMSE iteration as a second-order cone program.
//!
//! Each satellite's precoder blocks only act on the UTs through
//! `C_k[:, block s]`, so every block is parametrized in an orthonormal basis
//! `B_s` of the span of those rows: `q_{j,s} = √P·B_s·c_{j,s}`. Components
//! outside that span cost power and change no rate, so the reduction is exact.
//! Masked blocks get no variables at all and are therefore exactly zero.

use nalgebra::SymmetricEigen;

use super::DesignProblem;
use crate::error::Result;
use crate::linalg::{hermitian_part, norm_sqr, CMat, CVec};
use crate::rates::{CombinerSet, PrecodingMatrix};
use crate::scalar::{real, Cplx, Real};
use crate::socp::{quadratic_leq_as_cone, Affine, ConicProgram};

/// Relative eigenvalue threshold for the per-satellite signal subspaces.
pub const SUBSPACE_TOL: f64 = 1e-10;

/// Orthonormal bases `B_s` (`M × r_s`) of the per-satellite signal subspaces.
pub fn satellite_bases<T: Real>(problem: &DesignProblem<T>) -> Vec<CMat<T>> {
    let m = problem.antennas_per_satellite;
    (0..problem.num_satellites())
        .map(|s| {
            let mut gram = CMat::zeros(m, m);
            for c in &problem.channels {
                let block = c.columns(s * m, m);
                gram += block.adjoint() * block;
            }
            let eig = SymmetricEigen::new(hermitian_part(&gram));
            let max = eig.eigenvalues.iter().fold(T::zero(), |a, &v| a.max(v));
            let keep: Vec<usize> = (0..m)
                .filter(|&i| max > T::zero() && eig.eigenvalues[i] > T::lit(SUBSPACE_TOL) * max)
                .collect();
            CMat::from_fn(m, keep.len(), |r, c| eig.eigenvectors[(r, keep[c])])
        })
        .collect()
}

/// Location of one `(column, satellite)` block in the decision vector.
#[derive(Clone, Debug)]
struct BlockVars {
    column: usize,
    satellite: usize,
    /// First of `2·r_s` variables: real parts then imaginary parts.
    start: usize,
    rank: usize,
}

/// A built subproblem and the map back to a precoder.
#[derive(Clone, Debug)]
pub struct Subproblem<T: Real> {
    pub program: ConicProgram<T>,
    blocks: Vec<BlockVars>,
    bases: Vec<CMat<T>>,
    power_budget: T,
    pub r_c: Option<std::ops::Range<usize>>,
    pub r_p: std::ops::Range<usize>,
    pub t: usize,
    mask: Vec<Vec<bool>>,
    antennas_per_satellite: usize,
    num_uts: usize,
}

fn allowed(mask: &[Vec<bool>], column: usize, satellite: usize) -> bool {
    column == 0 || mask[satellite][column - 1]
}

/// `aᴴc` for `c = x + iy` as `(Re, Im)` affine forms.
fn inner_affine<T: Real>(a: &CVec<T>, start: usize, rank: usize, re: &mut Affine<T>, im: &mut Affine<T>) {
    for i in 0..rank {
        let (alpha, beta) = (a[i].re, a[i].im);
        re.terms.push((start + i, alpha));
        re.terms.push((start + rank + i, beta));
        im.terms.push((start + rank + i, alpha));
        im.terms.push((start + i, -beta));
    }
}

/// Builds the block update for fixed combiners and weights.
///
/// Variables: precoder coefficients, `R_c,k ≥ 0` (RSMA only), `R_p,k ≥ 0`, `t`.
/// Objective: maximize `t` subject to `t ≤ R_c,k + R_p,k` and, per UT,
/// `v·e(Q) ≤ 1 + ln v − ln2·(rate)` for each decoded stream, plus
/// `p_s(Q) ≤ P` per satellite.
pub fn build_subproblem<T: Real>(
    problem: &DesignProblem<T>,
    combiners: &CombinerSet<T>,
    power_budget: T,
    rsma: bool,
) -> Result<Subproblem<T>> {
    let bases = satellite_bases(problem);
    build_with_bases(problem, combiners, power_budget, rsma, bases)
}

pub(super) fn build_with_bases<T: Real>(
    problem: &DesignProblem<T>,
    combiners: &CombinerSet<T>,
    power_budget: T,
    rsma: bool,
    bases: Vec<CMat<T>>,
) -> Result<Subproblem<T>> {
    let k_total = problem.num_uts();
    let sats = problem.num_satellites();
    let m = problem.antennas_per_satellite;
    let mut prog = ConicProgram::new();
    let mut blocks = Vec::new();
    let first_col = if rsma { 0 } else { 1 };
    for column in first_col..=k_total {
        for (s, basis) in bases.iter().enumerate() {
            let rank = basis.ncols();
            if rank > 0 && allowed(&problem.mask, column, s) {
                let range = prog.add_variables(format!("q[{column}][{s}]"), 2 * rank);
                blocks.push(BlockVars {
                    column,
                    satellite: s,
                    start: range.start,
                    rank,
                });
            }
        }
    }
    let r_c = rsma.then(|| prog.add_variables("r_c", k_total));
    let r_p = prog.add_variables("r_p", k_total);
    let t = prog.add_variables("t", 1).start;
    prog.set_cost(t, -T::one());

    let sqrt_p = power_budget.sqrt();
    let ln2 = T::ln_2();
    let noise = problem.noise;
    // (Re, Im) of wᴴq_j for every column, given w = C_kᴴu.
    let column_forms = |u: &CVec<T>, k: usize| {
        let w: CVec<T> = problem.channels[k].adjoint() * u;
        let a: Vec<CVec<T>> = bases
            .iter()
            .enumerate()
            .map(|(s, b)| b.adjoint() * w.rows(s * m, m) * real(sqrt_p))
            .collect();
        let mut forms = vec![(Affine::constant(T::zero()), Affine::constant(T::zero())); k_total + 1];
        for blk in &blocks {
            let (re, im) = &mut forms[blk.column];
            inner_affine(&a[blk.satellite], blk.start, blk.rank, re, im);
        }
        forms
    };

    for k in 0..k_total {
        // Private stream: own column k+1, interference from other private columns.
        let (u, v) = (&combiners.u_p[k], combiners.v_p[k]);
        let sv = v.sqrt();
        let forms = column_forms(u, k);
        let mut terms = Vec::with_capacity(2 * k_total);
        for (j, (re, im)) in forms.iter().enumerate().skip(1) {
            if j == k + 1 {
                terms.push(re.clone().scaled(-sv).offset(sv));
                terms.push(im.clone().scaled(-sv));
            } else {
                terms.push(re.clone().scaled(sv));
                terms.push(im.clone().scaled(sv));
            }
        }
        let bound = Affine::constant(T::one() + v.ln() - v * noise * norm_sqr(u)).term(r_p.start + k, -ln2);
        prog.add_second_order(&quadratic_leq_as_cone(&prune(terms), &bound));

        if let Some(r_c) = &r_c {
            let (u, v) = (&combiners.u_c[k], combiners.v_c[k]);
            let sv = v.sqrt();
            let forms = column_forms(u, k);
            let mut terms = Vec::with_capacity(2 * (k_total + 1));
            for (j, (re, im)) in forms.iter().enumerate() {
                if j == 0 {
                    terms.push(re.clone().scaled(-sv).offset(sv));
                    terms.push(im.clone().scaled(-sv));
                } else {
                    terms.push(re.clone().scaled(sv));
                    terms.push(im.clone().scaled(sv));
                }
            }
            let mut bound = Affine::constant(T::one() + v.ln() - v * noise * norm_sqr(u));
            for l in r_c.clone() {
                bound = bound.term(l, -ln2);
            }
            prog.add_second_order(&quadratic_leq_as_cone(&prune(terms), &bound));
        }
    }

    for k in 0..k_total {
        let mut sum = Affine::var(r_p.start + k).term(t, -T::one());
        if let Some(r_c) = &r_c {
            sum = sum.term(r_c.start + k, T::one());
            prog.add_nonneg(&Affine::var(r_c.start + k));
        }
        prog.add_nonneg(&Affine::var(r_p.start + k));
        prog.add_nonneg(&sum);
    }

    for s in 0..sats {
        let mut rows = vec![Affine::constant(T::one())];
        for blk in blocks.iter().filter(|b| b.satellite == s) {
            rows.extend((blk.start..blk.start + 2 * blk.rank).map(Affine::var));
        }
        if rows.len() > 1 {
            prog.add_second_order(&rows);
        }
    }

    Ok(Subproblem {
        program: prog,
        blocks,
        bases,
        power_budget,
        r_c,
        r_p,
        t,
        mask: problem.mask.clone(),
        antennas_per_satellite: m,
        num_uts: k_total,
    })
}

/// Drops forms with no terms and a zero constant (they add nothing to a norm).
fn prune<T: Real>(terms: Vec<Affine<T>>) -> Vec<Affine<T>> {
    let kept: Vec<Affine<T>> = terms
        .into_iter()
        .filter(|a| a.constant != T::zero() || a.terms.iter().any(|&(_, c)| c != T::zero()))
        .collect();
    if kept.is_empty() {
        vec![Affine::constant(T::zero())]
    } else {
        kept
    }
}

impl<T: Real> Subproblem<T> {
    /// Precoder encoded by a decision vector, with each satellite block scaled
    /// down if rounding pushed its power above the budget.
    pub fn precoder(&self, x: &[T]) -> Result<PrecodingMatrix<T>> {
        let m = self.antennas_per_satellite;
        let sats = self.bases.len();
        let mut q = CMat::zeros(m * sats, self.num_uts + 1);
        let sqrt_p = self.power_budget.sqrt();
        for blk in &self.blocks {
            let c = CVec::from_fn(blk.rank, |i, _| {
                Cplx::new(x[blk.start + i], x[blk.start + blk.rank + i])
            });
            let block = &self.bases[blk.satellite] * c * real(sqrt_p);
            q.view_mut((blk.satellite * m, blk.column), (m, 1)).copy_from(&block);
        }
        let mut p = PrecodingMatrix::new(q, self.mask.clone(), m)?;
        for s in 0..sats {
            let power = p.satellite_power(s);
            if power > self.power_budget {
                p.scale_satellite(s, (self.power_budget / power).sqrt());
            }
        }
        Ok(p)
    }

    /// Decision vector representing `q` (projected onto the subspaces) with the
    /// given rate variables.
    pub fn encode(&self, q: &PrecodingMatrix<T>, r_c: &[T], r_p: &[T], t: T) -> Vec<T> {
        let m = self.antennas_per_satellite;
        let mut x = vec![T::zero(); self.program.num_vars];
        let inv = T::one() / self.power_budget.sqrt();
        for blk in &self.blocks {
            let c = self.bases[blk.satellite].adjoint() * q.matrix().view((blk.satellite * m, blk.column), (m, 1));
            for i in 0..blk.rank {
                x[blk.start + i] = c[i].re * inv;
                x[blk.start + blk.rank + i] = c[i].im * inv;
            }
        }
        if let Some(range) = &self.r_c {
            for (i, j) in range.clone().enumerate() {
                x[j] = r_c[i];
            }
        }
        for (i, j) in self.r_p.clone().enumerate() {
            x[j] = r_p[i];
        }
        x[self.t] = t;
        x
    }

    pub fn rates(&self, x: &[T]) -> (Vec<T>, Vec<T>, T) {
        let r_c = self
            .r_c
            .as_ref()
            .map_or(vec![T::zero(); self.num_uts], |r| x[r.clone()].to_vec());
        (r_c, x[self.r_p.clone()].to_vec(), x[self.t])
    }
}
