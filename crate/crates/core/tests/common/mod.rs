//! Fixtures and an independent first-order conic solver for integration tests.

use leo_rsma::channel::ArrayConfig;
use leo_rsma::experiments::{build_drop, DropSeeds, ExperimentConfig, ScenarioDraw};
use leo_rsma::geometry::ScenarioConfig;
use leo_rsma::linalg::CMat;
use leo_rsma::rates::PrecodingMatrix;
use leo_rsma::socp::{ConeKind, ConicProgram};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// 2×2 arrays at both ends (M = N = 4).
pub fn small_arrays() -> ArrayConfig {
    ArrayConfig {
        sat_antennas: [2, 2],
        ut_antennas: [2, 2],
        ..ArrayConfig::default()
    }
}

pub fn config(sats: usize, uts: usize, arrays: ArrayConfig) -> ExperimentConfig {
    ExperimentConfig {
        scenario: ScenarioConfig::standard(sats, uts, 0),
        arrays,
        ..ExperimentConfig::default()
    }
}

/// Noise-normalized drop `index` of the geometric scenario family.
pub fn drop(cfg: &ExperimentConfig, index: usize) -> ScenarioDraw {
    build_drop(cfg, cfg.scenario.num_satellites, &DropSeeds::new(cfg.seed, index)).expect("drop")
}

/// Random masked precoder with satellite `s` radiating `power·u_s`, `u_s ∈ [0.3, 1]`.
pub fn random_feasible_precoder(mask: &[Vec<bool>], m: usize, power: f64, r: &mut ChaCha8Rng) -> PrecodingMatrix<f64> {
    let s = mask.len();
    let k = mask[0].len();
    let q = CMat::from_fn(s * m, k + 1, |_, _| {
        Complex::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))
    });
    let mut p = PrecodingMatrix::masked(q, mask.to_vec(), m).expect("precoder");
    for sat in 0..s {
        let target = power * r.random_range(0.3..1.0);
        let now = p.satellite_power(sat);
        p.scale_satellite(sat, (target / now).sqrt());
    }
    p
}

/// Terminal state of [`pdhg`].
#[derive(Clone, Debug)]
pub struct Reference {
    pub objective: f64,
    pub converged: bool,
}

fn project_cone(program: &ConicProgram<f64>, z: &mut [f64]) {
    for c in &program.cones {
        let v = &mut z[c.range()];
        match c.kind {
            ConeKind::NonNeg => v.iter_mut().for_each(|x| *x = x.max(0.0)),
            ConeKind::SecondOrder => {
                let t = v[0];
                let norm = v[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm <= t {
                    continue;
                }
                if norm <= -t {
                    v.iter_mut().for_each(|x| *x = 0.0);
                    continue;
                }
                let a = 0.5 * (t + norm);
                v[0] = a;
                v[1..].iter_mut().for_each(|x| *x *= a / norm);
            }
        }
    }
}

fn mul(rows: &[Vec<(usize, f64)>], x: &[f64]) -> Vec<f64> {
    rows.iter().map(|r| r.iter().map(|&(i, a)| a * x[i]).sum()).collect()
}

fn mul_t(rows: &[Vec<(usize, f64)>], y: &[f64], out: &mut [f64]) {
    for (r, &yi) in rows.iter().zip(y) {
        for &(i, a) in r {
            out[i] += a * yi;
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Primal-dual hybrid gradient on the saddle point of
/// `cᵀx + yᵀ(Ax − b) + zᵀ(Gx − h)`, `z ∈ K`.
///
/// Stops when primal residual, dual residual and gap all fall below `tol`
/// (relative to the data scale) or after `max_iter` steps.
pub fn pdhg(program: &ConicProgram<f64>, tol: f64, max_iter: usize) -> Reference {
    let n = program.num_vars;
    let a = &program.eq_rows;
    let g = &program.cone_rows;
    let me = a.len();
    let mc = g.len();
    let apply = |x: &[f64]| {
        let mut out = mul(a, x);
        out.extend(mul(g, x));
        out
    };
    let apply_t = |w: &[f64]| {
        let mut out = vec![0.0; n];
        mul_t(a, &w[..me], &mut out);
        mul_t(g, &w[me..], &mut out);
        out
    };
    // Operator norm by power iteration.
    let mut v = vec![1.0; n];
    let mut op_norm = 0.0;
    for _ in 0..200 {
        let w = apply_t(&apply(&v));
        let nw = norm(&w);
        op_norm = nw.sqrt();
        v = w.iter().map(|x| x / nw).collect();
    }
    let step = 0.95 / op_norm;
    let c = &program.objective;
    let rhs: Vec<f64> = program.eq_rhs.iter().chain(&program.cone_rhs).copied().collect();
    let scale = 1.0 + norm(c).max(norm(&rhs));
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; me + mc];
    let mut it = 0;
    let mut converged = false;
    while it < max_iter {
        it += 1;
        let grad = apply_t(&w);
        let x_new: Vec<f64> = (0..n).map(|i| x[i] - step * (c[i] + grad[i])).collect();
        let extrap: Vec<f64> = (0..n).map(|i| 2.0 * x_new[i] - x[i]).collect();
        let kx = apply(&extrap);
        for j in 0..me + mc {
            w[j] += step * (kx[j] - rhs[j]);
        }
        project_cone(program, &mut w[me..]);
        x = x_new;
        if it % 50 == 0 {
            let kx = apply(&x);
            let eq_res: Vec<f64> = (0..me).map(|j| kx[j] - rhs[j]).collect();
            let mut slack: Vec<f64> = (0..mc).map(|j| rhs[me + j] - kx[me + j]).collect();
            let raw = slack.clone();
            project_cone(program, &mut slack);
            let cone_res: Vec<f64> = raw.iter().zip(&slack).map(|(r, p)| r - p).collect();
            let dual: Vec<f64> = apply_t(&w).iter().zip(c).map(|(g, c)| g + c).collect();
            let primal_obj: f64 = c.iter().zip(&x).map(|(a, b)| a * b).sum();
            let dual_obj: f64 = -rhs.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
            let pres = (norm(&eq_res).powi(2) + norm(&cone_res).powi(2)).sqrt();
            let gap = (primal_obj - dual_obj).abs();
            if pres.max(norm(&dual)).max(gap) <= tol * scale {
                converged = true;
                break;
            }
        }
    }
    Reference {
        objective: c.iter().zip(&x).map(|(a, b)| a * b).sum(),
        converged,
    }
}
