//! Homogeneous self-dual interior-point method with Nesterov–Todd scaling
//! and a Mehrotra predictor–corrector.

use nalgebra::{DMatrix, DVector};

use super::cones::{self, BlockScaling, Scaling};
use super::program::{ConeKind, ConicProgram};
use super::{ConicSolver, Solution, SolveError, SolveStatus};
use crate::scalar::Real;

/// Fraction of the distance to the cone boundary taken per step.
const STEP_FRACTION: f64 = 0.99;
/// Shortest step accepted before the method is declared stalled.
const MIN_STEP: f64 = 1e-10;

#[derive(Clone, Copy, Debug)]
pub struct SolverSettings<T> {
    /// Relative tolerance for residuals, gap and certificates.
    pub tol: T,
    pub max_iter: usize,
    /// Static regularization of the reduced KKT system, relative to each
    /// diagonal entry (floored at one).
    pub regularization: T,
    /// Iterative-refinement passes per KKT solve.
    pub refine: usize,
}

impl<T: Real> Default for SolverSettings<T> {
    fn default() -> Self {
        SolverSettings {
            tol: T::lit(1e-7),
            max_iter: 100,
            regularization: T::lit(1e-13).max(T::eps() * T::lit(100.0)),
            refine: 8,
        }
    }
}

/// Dense interior-point solver.
#[derive(Clone, Debug)]
pub struct InteriorPoint<T> {
    pub settings: SolverSettings<T>,
}

impl<T: Real> InteriorPoint<T> {
    pub fn new(settings: SolverSettings<T>) -> Self {
        InteriorPoint { settings }
    }
}

impl<T: Real> Default for InteriorPoint<T> {
    fn default() -> Self {
        Self::new(SolverSettings::default())
    }
}

impl<T: Real> ConicSolver<T> for InteriorPoint<T> {
    fn solve(&self, program: &ConicProgram<T>) -> Result<Solution<T>, SolveError<T>> {
        program.validate().map_err(|e| SolveError::Numerical(e.to_string()))?;
        Problem::new(program).run(&self.settings)
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

fn axpy<T: Real>(y: &mut [T], a: T, x: &[T]) {
    y.iter_mut().zip(x).for_each(|(yi, &xi)| *yi += a * xi);
}

/// Dense copy of the program data plus per-cone structure reused by every
/// KKT assembly.
struct Problem<'a, T: Real> {
    prog: &'a ConicProgram<T>,
    a: DMatrix<T>,
    g: DMatrix<T>,
    b: Vec<T>,
    h: Vec<T>,
    c: Vec<T>,
    blocks: Vec<ConeData<T>>,
}

/// Rows of `G` belonging to one cone, restricted to the columns they touch.
struct ConeData<T: Real> {
    cols: Vec<usize>,
    local: DMatrix<T>,
    /// `GᵀJG` on `cols` for second-order cones.
    gjg: Option<DMatrix<T>>,
}

enum Factor<T: Real> {
    Cholesky(nalgebra::Cholesky<T, nalgebra::Dyn>),
    Lu(nalgebra::LU<T, nalgebra::Dyn, nalgebra::Dyn>),
}

struct Kkt<'a, T: Real> {
    prob: &'a Problem<'a, T>,
    scaling: &'a Scaling<T>,
    factor: Factor<T>,
    refine: usize,
}

impl<'a, T: Real> Problem<'a, T> {
    fn new(prog: &'a ConicProgram<T>) -> Self {
        let n = prog.num_vars;
        let dense = |rows: &[Vec<(usize, T)>]| {
            let mut m = DMatrix::zeros(rows.len(), n);
            for (r, row) in rows.iter().enumerate() {
                for &(j, v) in row {
                    m[(r, j)] += v;
                }
            }
            m
        };
        let g = dense(&prog.cone_rows);
        let blocks = prog
            .cones
            .iter()
            .map(|cone| {
                let mut cols: Vec<usize> = prog.cone_rows[cone.range()].iter().flatten().map(|&(j, _)| j).collect();
                cols.sort_unstable();
                cols.dedup();
                let local = DMatrix::from_fn(cone.len, cols.len(), |r, c| g[(cone.start + r, cols[c])]);
                let gjg = (cone.kind == ConeKind::SecondOrder).then(|| {
                    let mut jg = local.clone();
                    for r in 1..cone.len {
                        jg.row_mut(r).neg_mut();
                    }
                    local.tr_mul(&jg)
                });
                ConeData { cols, local, gjg }
            })
            .collect();
        Problem {
            prog,
            a: dense(&prog.eq_rows),
            g,
            b: prog.eq_rhs.clone(),
            h: prog.cone_rhs.clone(),
            c: prog.objective.clone(),
            blocks,
        }
    }

    fn n(&self) -> usize {
        self.c.len()
    }

    fn p(&self) -> usize {
        self.b.len()
    }

    fn m(&self) -> usize {
        self.h.len()
    }

    fn mul(m: &DMatrix<T>, v: &[T]) -> Vec<T> {
        (m * DVector::from_column_slice(v)).as_slice().to_vec()
    }

    fn mul_t(m: &DMatrix<T>, v: &[T]) -> Vec<T> {
        m.tr_mul(&DVector::from_column_slice(v)).as_slice().to_vec()
    }

    /// `GᵀW⁻²G`, assembled cone by cone; for a second-order cone
    /// `W⁻² = η⁻²(2(Jw)(Jw)ᵀ − J)`.
    fn hessian(&self, scaling: &Scaling<T>) -> DMatrix<T> {
        let n = self.n();
        let mut hess = DMatrix::zeros(n, n);
        for (data, block) in self.blocks.iter().zip(scaling.blocks()) {
            let k = data.cols.len();
            let mut local = DMatrix::zeros(k, k);
            match block {
                BlockScaling::NonNeg(d) => {
                    for (r, &dr) in d.iter().enumerate() {
                        let row = data.local.row(r);
                        local.ger(T::one() / (dr * dr), &row.transpose(), &row.transpose(), T::one());
                    }
                }
                BlockScaling::SecondOrder { eta, w } => {
                    let mut jw = DVector::from_column_slice(w);
                    for x in jw.iter_mut().skip(1) {
                        *x = -*x;
                    }
                    let v = data.local.tr_mul(&jw);
                    let inv_eta2 = T::one() / (*eta * *eta);
                    local.copy_from(data.gjg.as_ref().expect("second-order data"));
                    local.ger(T::lit(2.0), &v, &v, -T::one());
                    local *= inv_eta2;
                }
            }
            for (a, &ca) in data.cols.iter().enumerate() {
                for (b, &cb) in data.cols.iter().enumerate() {
                    hess[(ca, cb)] += local[(a, b)];
                }
            }
        }
        hess
    }

    fn factor<'b>(&'b self, scaling: &'b Scaling<T>, settings: &SolverSettings<T>) -> Option<Kkt<'b, T>> {
        let (n, p) = (self.n(), self.p());
        let hess = self.hessian(scaling);
        let delta: Vec<T> = (0..n)
            .map(|i| settings.regularization * hess[(i, i)].max(T::one()))
            .collect();
        let factor = if p == 0 {
            let mut k = hess;
            for i in 0..n {
                k[(i, i)] += delta[i];
            }
            match k.clone().cholesky() {
                Some(ch) => Factor::Cholesky(ch),
                None => Factor::Lu(k.lu()),
            }
        } else {
            let mut k = DMatrix::zeros(n + p, n + p);
            k.view_mut((0, 0), (n, n)).copy_from(&hess);
            for i in 0..n {
                k[(i, i)] += delta[i];
            }
            k.view_mut((n, 0), (p, n)).copy_from(&self.a);
            k.view_mut((0, n), (n, p)).copy_from(&self.a.transpose());
            for i in 0..p {
                k[(n + i, n + i)] = -settings.regularization;
            }
            Factor::Lu(k.lu())
        };
        if let Factor::Lu(lu) = &factor {
            if !lu.is_invertible() {
                return None;
            }
        }
        Some(Kkt {
            prob: self,
            scaling,
            factor,
            refine: settings.refine,
        })
    }

    fn run(&self, settings: &SolverSettings<T>) -> Result<Solution<T>, SolveError<T>> {
        let (n, p, m) = (self.n(), self.p(), self.m());
        let cones = &self.prog.cones;
        let nu = T::from_usize(self.prog.degree()).unwrap();
        let tol = settings.tol;
        let step_fraction = T::lit(STEP_FRACTION);
        let numerical = |what: &str| SolveError::Numerical(what.to_string());

        let bh_norm = T::one().max((dot(&self.b, &self.b) + dot(&self.h, &self.h)).sqrt());
        let c_norm = T::one().max(norm(&self.c));

        // Starting point: least-squares solves with the identity scaling.
        let identity = Scaling::identity(cones);
        let kkt = self
            .factor(&identity, settings)
            .ok_or_else(|| numerical("singular KKT system at start"))?;
        let (mut x, _, zp) = kkt.solve(&vec![T::zero(); n], &self.b, &self.h);
        let mut s: Vec<T> = zp.iter().map(|&v| -v).collect();
        let neg_c: Vec<T> = self.c.iter().map(|&v| -v).collect();
        let (_, mut y, mut z) = kkt.solve(&neg_c, &vec![T::zero(); p], &vec![T::zero(); m]);
        drop(kkt);
        for v in [&mut s, &mut z] {
            let margin = cones::interior_margin(cones, v);
            let scale = T::one().max(norm(v));
            if margin >= -T::lit(1e-8) * scale {
                cones::add_identity(cones, v, T::one() + margin);
            }
        }
        let (mut tau, mut kappa) = (T::one(), T::one());

        for iter in 0..=settings.max_iter {
            let ax = Self::mul(&self.a, &x);
            let gx = Self::mul(&self.g, &x);
            let aty = Self::mul_t(&self.a, &y);
            let gtz = Self::mul_t(&self.g, &z);
            let cx = dot(&self.c, &x);
            let by_hz = dot(&self.b, &y) + dot(&self.h, &z);

            let rx: Vec<T> = (0..n).map(|i| aty[i] + gtz[i] + self.c[i] * tau).collect();
            let ry: Vec<T> = (0..p).map(|i| ax[i] - self.b[i] * tau).collect();
            let rz: Vec<T> = (0..m).map(|i| gx[i] + s[i] - self.h[i] * tau).collect();
            let rt = kappa + cx + by_hz;
            let sz = dot(&s, &z);
            let mu = (sz + tau * kappa) / (nu + T::one());

            let pres = norm(&ry).max(norm(&rz)) / tau / bh_norm;
            let dres = norm(&rx) / tau / c_norm;
            let pcost = cx / tau;
            let dcost = -by_hz / tau;
            let sol = Solution {
                status: SolveStatus::Optimal,
                x: x.iter().map(|&v| v / tau).collect(),
                y: y.iter().map(|&v| v / tau).collect(),
                z: z.iter().map(|&v| v / tau).collect(),
                s: s.iter().map(|&v| v / tau).collect(),
                primal_objective: pcost,
                dual_objective: dcost,
                iterations: iter,
                primal_residual: pres,
                dual_residual: dres,
                complementarity: sz / (tau * tau),
            };
            if !(pres.is_finite() && dres.is_finite() && mu.is_finite()) {
                return Err(numerical("non-finite iterate"));
            }
            if pres <= tol && dres <= tol && sol.relative_gap() <= tol {
                return Ok(sol);
            }
            if tau < kappa {
                let dual_ray = norm(&(0..n).map(|i| aty[i] + gtz[i]).collect::<Vec<_>>());
                if by_hz < T::zero() && dual_ray / -by_hz <= tol {
                    return Err(SolveError::Infeasible {
                        residual: dual_ray / -by_hz,
                    });
                }
                if cx < T::zero() {
                    let primal_ray = (dot(&ax, &ax)
                        + (0..m)
                            .map(|i| (gx[i] + s[i]) * (gx[i] + s[i]))
                            .fold(T::zero(), |a, v| a + v))
                    .sqrt();
                    if primal_ray / -cx <= tol {
                        return Err(SolveError::Unbounded {
                            residual: primal_ray / -cx,
                        });
                    }
                }
            }
            if iter == settings.max_iter {
                let mut best = sol;
                best.status = SolveStatus::MaxIter;
                return Err(SolveError::MaxIter(Box::new(best)));
            }

            let Some((scaling, lambda)) = Scaling::new(cones, &s, &z) else {
                // Rounding pushed the iterate onto the boundary.
                let mut best = sol;
                best.status = SolveStatus::NumericalFailure;
                return Err(SolveError::MaxIter(Box::new(best)));
            };
            let Some(kkt) = self.factor(&scaling, settings) else {
                return Err(numerical("singular KKT system"));
            };
            let (v1x, v1y, v1z) = kkt.solve(&neg_c, &self.b, &self.h);
            let lam_sq = cones::jordan_product(cones, &lambda, &lambda);

            // Returns (dx, dy, dz, ds, dtau, dkappa) for reduction factor `gamma`
            // and complementarity targets `xi_s`, `xi_tau`.
            let direction = |gamma: T, xi_s: &[T], xi_tau: T| {
                let f = -(T::one() - gamma);
                let mut w_xi = cones::jordan_div(cones, &lambda, xi_s);
                scaling.apply_w(&mut w_xi);
                let bx: Vec<T> = rx.iter().map(|&v| f * v).collect();
                let by: Vec<T> = ry.iter().map(|&v| f * v).collect();
                let bz: Vec<T> = (0..m).map(|i| f * rz[i] - w_xi[i]).collect();
                let (v2x, v2y, v2z) = kkt.solve(&bx, &by, &bz);
                let denom = -kappa / tau + dot(&self.c, &v1x) + dot(&self.b, &v1y) + dot(&self.h, &v1z);
                let numer = f * rt - xi_tau / tau - dot(&self.c, &v2x) - dot(&self.b, &v2y) - dot(&self.h, &v2z);
                let dtau = numer / denom;
                let mut dx = v2x;
                axpy(&mut dx, dtau, &v1x);
                let mut dy = v2y;
                axpy(&mut dy, dtau, &v1y);
                let mut dz = v2z;
                axpy(&mut dz, dtau, &v1z);
                let dkappa = (xi_tau - kappa * dtau) / tau;
                // ds = W(λ\ξ) − W²dz
                let mut w2dz = dz.clone();
                scaling.apply_w(&mut w2dz);
                scaling.apply_w(&mut w2dz);
                let ds: Vec<T> = (0..m).map(|i| w_xi[i] - w2dz[i]).collect();
                (dx, dy, dz, ds, dtau, dkappa)
            };
            let max_step = |ds: &[T], dz: &[T], dtau: T, dkappa: T| {
                let mut a = cones::max_step(cones, &s, ds).min(cones::max_step(cones, &z, dz));
                if dtau < T::zero() {
                    a = a.min(-tau / dtau);
                }
                if dkappa < T::zero() {
                    a = a.min(-kappa / dkappa);
                }
                a
            };

            // Predictor.
            let xi_aff: Vec<T> = lam_sq.iter().map(|&v| -v).collect();
            let (_, _, dz_a, ds_a, dtau_a, dkappa_a) = direction(T::zero(), &xi_aff, -tau * kappa);
            let alpha_aff = T::one().min(max_step(&ds_a, &dz_a, dtau_a, dkappa_a));
            let sigma = (T::one() - alpha_aff).powi(3);

            // Corrector.
            let mut winv_ds = ds_a;
            scaling.apply_winv(&mut winv_ds);
            let mut w_dz = dz_a;
            scaling.apply_w(&mut w_dz);
            let second = cones::jordan_product(cones, &winv_ds, &w_dz);
            let mut xi_s: Vec<T> = (0..m).map(|i| -lam_sq[i] - second[i]).collect();
            cones::add_identity(cones, &mut xi_s, sigma * mu);
            let xi_tau = -tau * kappa + sigma * mu - dtau_a * dkappa_a;
            let (dx, dy, dz, ds, dtau, dkappa) = direction(sigma, &xi_s, xi_tau);
            let alpha = T::one().min(step_fraction * max_step(&ds, &dz, dtau, dkappa));
            if !(alpha >= T::lit(MIN_STEP)) {
                let mut best = sol;
                best.status = SolveStatus::NumericalFailure;
                return Err(SolveError::MaxIter(Box::new(best)));
            }

            axpy(&mut x, alpha, &dx);
            axpy(&mut y, alpha, &dy);
            axpy(&mut z, alpha, &dz);
            axpy(&mut s, alpha, &ds);
            tau += alpha * dtau;
            kappa += alpha * dkappa;
        }
        unreachable!("loop returns at max_iter")
    }
}

impl<T: Real> Kkt<'_, T> {
    /// Solves `[0 Aᵀ Gᵀ; A 0 0; G 0 −W²] (x, y, z) = (bx, by, bz)`.
    fn solve(&self, bx: &[T], by: &[T], bz: &[T]) -> (Vec<T>, Vec<T>, Vec<T>) {
        let (mut x, mut y, mut z) = self.solve_reduced(bx, by, bz);
        let mut last = T::max_value().unwrap_or(T::one() / T::eps());
        for _ in 0..self.refine {
            let (ex, ey, ez) = self.residual(&x, &y, &z, bx, by, bz);
            let size = norm(&ex).max(norm(&ey)).max(norm(&ez));
            // Stop once refinement no longer helps.
            if !(size < last) || size == T::zero() {
                break;
            }
            last = size;
            let (cx, cy, cz) = self.solve_reduced(&ex, &ey, &ez);
            axpy(&mut x, T::one(), &cx);
            axpy(&mut y, T::one(), &cy);
            axpy(&mut z, T::one(), &cz);
        }
        (x, y, z)
    }

    fn solve_reduced(&self, bx: &[T], by: &[T], bz: &[T]) -> (Vec<T>, Vec<T>, Vec<T>) {
        let (n, p) = (bx.len(), by.len());
        let mut w2bz = bz.to_vec();
        self.scaling.apply_winv(&mut w2bz);
        self.scaling.apply_winv(&mut w2bz);
        let gtw = Problem::mul_t(&self.prob.g, &w2bz);
        let mut rhs = DVector::zeros(n + p);
        for i in 0..n {
            rhs[i] = bx[i] + gtw[i];
        }
        for i in 0..p {
            rhs[n + i] = by[i];
        }
        let sol = match &self.factor {
            Factor::Cholesky(ch) => ch.solve(&rhs),
            Factor::Lu(lu) => lu.solve(&rhs).expect("factor checked invertible"),
        };
        let x: Vec<T> = sol.as_slice()[..n].to_vec();
        let y: Vec<T> = sol.as_slice()[n..].to_vec();
        // z = W⁻²(G x − bz)
        let mut z = Problem::mul(&self.prob.g, &x);
        z.iter_mut().zip(bz).for_each(|(zi, &b)| *zi -= b);
        self.scaling.apply_winv(&mut z);
        self.scaling.apply_winv(&mut z);
        (x, y, z)
    }

    fn residual(&self, x: &[T], y: &[T], z: &[T], bx: &[T], by: &[T], bz: &[T]) -> (Vec<T>, Vec<T>, Vec<T>) {
        let prob = self.prob;
        let aty = Problem::mul_t(&prob.a, y);
        let gtz = Problem::mul_t(&prob.g, z);
        let ex = (0..bx.len()).map(|i| bx[i] - aty[i] - gtz[i]).collect();
        let ax = Problem::mul(&prob.a, x);
        let ey = (0..by.len()).map(|i| by[i] - ax[i]).collect();
        let gx = Problem::mul(&prob.g, x);
        let mut w2z = z.to_vec();
        self.scaling.apply_w(&mut w2z);
        self.scaling.apply_w(&mut w2z);
        let ez = (0..bz.len()).map(|i| bz[i] - gx[i] + w2z[i]).collect();
        (ex, ey, ez)
    }
}
