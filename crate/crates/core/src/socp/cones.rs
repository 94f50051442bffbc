//! Cone algebra for the interior-point method: Nesterov–Todd scalings,
//! Jordan products and step-to-boundary computations.

use super::program::{ConeBlock, ConeKind};
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub(super) enum BlockScaling<T> {
    /// `W = diag(d)`, `d = √(s/z)`.
    NonNeg(Vec<T>),
    /// `W = η [w0, w1ᵀ; w1, I + w1w1ᵀ/(1+w0)]`.
    SecondOrder { eta: T, w: Vec<T> },
}

/// Block-diagonal Nesterov–Todd scaling `W` with `W z = W⁻¹ s = λ`.
#[derive(Clone, Debug)]
pub(super) struct Scaling<T> {
    cones: Vec<ConeBlock>,
    blocks: Vec<BlockScaling<T>>,
}

fn soc_det<T: Real>(v: &[T]) -> T {
    let tail = v[1..].iter().fold(T::zero(), |a, &x| a + x * x);
    v[0] * v[0] - tail
}

impl<T: Real> Scaling<T> {
    /// Scaling at strictly interior `(s, z)`; `None` if either left the cone interior.
    pub(super) fn new(cones: &[ConeBlock], s: &[T], z: &[T]) -> Option<(Self, Vec<T>)> {
        let mut blocks = Vec::with_capacity(cones.len());
        let mut lambda = vec![T::zero(); s.len()];
        for c in cones {
            let (sb, zb) = (&s[c.range()], &z[c.range()]);
            match c.kind {
                ConeKind::NonNeg => {
                    let mut d = Vec::with_capacity(c.len);
                    for (i, (&si, &zi)) in sb.iter().zip(zb).enumerate() {
                        if !(si > T::zero() && zi > T::zero()) {
                            return None;
                        }
                        d.push((si / zi).sqrt());
                        lambda[c.start + i] = (si * zi).sqrt();
                    }
                    blocks.push(BlockScaling::NonNeg(d));
                }
                ConeKind::SecondOrder => {
                    let (ds, dz) = (soc_det(sb), soc_det(zb));
                    if !(ds > T::zero() && dz > T::zero() && sb[0] > T::zero() && zb[0] > T::zero()) {
                        return None;
                    }
                    let (ns, nz) = (ds.sqrt(), dz.sqrt());
                    let sbar: Vec<T> = sb.iter().map(|&x| x / ns).collect();
                    let zbar: Vec<T> = zb.iter().map(|&x| x / nz).collect();
                    let dot = sbar.iter().zip(&zbar).fold(T::zero(), |a, (&p, &q)| a + p * q);
                    let gamma = ((T::one() + dot) / T::lit(2.0)).sqrt();
                    let two_gamma = T::lit(2.0) * gamma;
                    let mut w: Vec<T> = sbar.iter().zip(&zbar).map(|(&p, &q)| (p - q) / two_gamma).collect();
                    w[0] = (sbar[0] + zbar[0]) / two_gamma;
                    let eta = (ds / dz).sqrt().sqrt();
                    blocks.push(BlockScaling::SecondOrder { eta, w });
                }
            }
        }
        let scaling = Scaling {
            cones: cones.to_vec(),
            blocks,
        };
        let mut lam = z.to_vec();
        scaling.apply_w(&mut lam);
        for c in cones.iter().filter(|c| c.kind == ConeKind::SecondOrder) {
            lambda[c.range()].copy_from_slice(&lam[c.range()]);
        }
        Some((scaling, lambda))
    }

    pub(super) fn blocks(&self) -> &[BlockScaling<T>] {
        &self.blocks
    }

    /// The identity scaling.
    pub(super) fn identity(cones: &[ConeBlock]) -> Self {
        let blocks = cones
            .iter()
            .map(|c| match c.kind {
                ConeKind::NonNeg => BlockScaling::NonNeg(vec![T::one(); c.len]),
                ConeKind::SecondOrder => {
                    let mut w = vec![T::zero(); c.len];
                    w[0] = T::one();
                    BlockScaling::SecondOrder { eta: T::one(), w }
                }
            })
            .collect();
        Scaling {
            cones: cones.to_vec(),
            blocks,
        }
    }

    fn apply(&self, v: &mut [T], inverse: bool) {
        for (c, b) in self.cones.iter().zip(&self.blocks) {
            let vb = &mut v[c.range()];
            match b {
                BlockScaling::NonNeg(d) => {
                    for (x, &di) in vb.iter_mut().zip(d) {
                        if inverse {
                            *x /= di;
                        } else {
                            *x *= di;
                        }
                    }
                }
                BlockScaling::SecondOrder { eta, w } => {
                    let (w0, w1) = (w[0], &w[1..]);
                    let v0 = vb[0];
                    let dot = w1.iter().zip(&vb[1..]).fold(T::zero(), |a, (&p, &q)| a + p * q);
                    let (head, coef, scale) = if inverse {
                        (w0 * v0 - dot, -v0 + dot / (T::one() + w0), T::one() / *eta)
                    } else {
                        (w0 * v0 + dot, v0 + dot / (T::one() + w0), *eta)
                    };
                    vb[0] = scale * head;
                    for (x, &wi) in vb[1..].iter_mut().zip(w1) {
                        *x = scale * (*x + coef * wi);
                    }
                }
            }
        }
    }

    pub(super) fn apply_w(&self, v: &mut [T]) {
        self.apply(v, false);
    }

    pub(super) fn apply_winv(&self, v: &mut [T]) {
        self.apply(v, true);
    }
}

/// Jordan product `u ∘ v`.
pub(super) fn jordan_product<T: Real>(cones: &[ConeBlock], u: &[T], v: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); u.len()];
    for c in cones {
        let r = c.range();
        let (ub, vb) = (&u[r.clone()], &v[r.clone()]);
        match c.kind {
            ConeKind::NonNeg => {
                for i in 0..c.len {
                    out[c.start + i] = ub[i] * vb[i];
                }
            }
            ConeKind::SecondOrder => {
                out[c.start] = ub.iter().zip(vb).fold(T::zero(), |a, (&p, &q)| a + p * q);
                for i in 1..c.len {
                    out[c.start + i] = ub[0] * vb[i] + vb[0] * ub[i];
                }
            }
        }
    }
    out
}

/// Solves `λ ∘ x = v` for `x`.
pub(super) fn jordan_div<T: Real>(cones: &[ConeBlock], lambda: &[T], v: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); v.len()];
    for c in cones {
        let r = c.range();
        let (lb, vb) = (&lambda[r.clone()], &v[r.clone()]);
        match c.kind {
            ConeKind::NonNeg => {
                for i in 0..c.len {
                    out[c.start + i] = vb[i] / lb[i];
                }
            }
            ConeKind::SecondOrder => {
                let det = soc_det(lb);
                let dot = lb[1..].iter().zip(&vb[1..]).fold(T::zero(), |a, (&p, &q)| a + p * q);
                let x0 = (lb[0] * vb[0] - dot) / det;
                out[c.start] = x0;
                for i in 1..c.len {
                    out[c.start + i] = (vb[i] - x0 * lb[i]) / lb[0];
                }
            }
        }
    }
    out
}

/// Adds `a·e` (the cone identity) to `v`.
pub(super) fn add_identity<T: Real>(cones: &[ConeBlock], v: &mut [T], a: T) {
    for c in cones {
        match c.kind {
            ConeKind::NonNeg => v[c.range()].iter_mut().for_each(|x| *x += a),
            ConeKind::SecondOrder => v[c.start] += a,
        }
    }
}

/// Smallest `a` such that `v + a·e` lies in the (closed) cone.
pub(super) fn interior_margin<T: Real>(cones: &[ConeBlock], v: &[T]) -> T {
    let mut worst = -T::max_value().expect("bounded real type");
    for c in cones {
        let vb = &v[c.range()];
        let need = match c.kind {
            ConeKind::NonNeg => vb.iter().fold(-T::max_value().unwrap(), |m, &x| m.max(-x)),
            ConeKind::SecondOrder => {
                let tail = vb[1..].iter().fold(T::zero(), |a, &x| a + x * x).sqrt();
                tail - vb[0]
            }
        };
        worst = worst.max(need);
    }
    worst
}

/// Largest `α ≥ 0` with `u + α·d` in the cone (`T::max_value()` if unbounded).
pub(super) fn max_step<T: Real>(cones: &[ConeBlock], u: &[T], d: &[T]) -> T {
    let big = T::max_value().expect("bounded real type");
    let mut alpha = big;
    for c in cones {
        let (ub, db) = (&u[c.range()], &d[c.range()]);
        match c.kind {
            ConeKind::NonNeg => {
                for (&ui, &di) in ub.iter().zip(db) {
                    if di < T::zero() {
                        alpha = alpha.min(-ui / di);
                    }
                }
            }
            ConeKind::SecondOrder => alpha = alpha.min(soc_max_step(ub, db)),
        }
    }
    alpha
}

fn soc_max_step<T: Real>(u: &[T], d: &[T]) -> T {
    let big = T::max_value().expect("bounded real type");
    let mut alpha = big;
    if d[0] < T::zero() {
        alpha = -u[0] / d[0];
    }
    // (u0 + α d0)² − ‖u1 + α d1‖² ≥ 0
    let a = soc_det(d);
    let b = T::lit(2.0) * (u[0] * d[0] - u[1..].iter().zip(&d[1..]).fold(T::zero(), |s, (&p, &q)| s + p * q));
    let c = soc_det(u).max(T::zero());
    let root = if a == T::zero() {
        if b < T::zero() {
            -c / b
        } else {
            big
        }
    } else {
        let disc = b * b - T::lit(4.0) * a * c;
        if disc < T::zero() {
            big
        } else {
            let sq = disc.sqrt();
            // numerically stable pair of roots
            let q = if b >= T::zero() {
                -(b + sq) / T::lit(2.0)
            } else {
                (sq - b) / T::lit(2.0)
            };
            let r1 = if a != T::zero() { q / a } else { big };
            let r2 = if q != T::zero() { c / q } else { big };
            [r1, r2]
                .into_iter()
                .filter(|&r| r > T::zero())
                .fold(big, |m, r| m.min(r))
        }
    };
    alpha.min(root)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blocks() -> Vec<ConeBlock> {
        vec![
            ConeBlock {
                kind: ConeKind::NonNeg,
                start: 0,
                len: 2,
            },
            ConeBlock {
                kind: ConeKind::SecondOrder,
                start: 2,
                len: 4,
            },
        ]
    }

    #[test]
    fn nesterov_todd_identities() {
        let cones = blocks();
        let s: [f64; 6] = [0.7, 2.0, 3.0, 1.0, -0.5, 2.2];
        let z = [1.3, 0.1, 2.0, -0.4, 0.9, 0.3];
        let (w, lambda) = Scaling::new(&cones, &s, &z).unwrap();
        let mut wz = z.to_vec();
        w.apply_w(&mut wz);
        let mut winv_s = s.to_vec();
        w.apply_winv(&mut winv_s);
        for i in 0..6 {
            assert!((wz[i] - lambda[i]).abs() < 1e-12, "{i}: {wz:?} {lambda:?}");
            assert!((winv_s[i] - lambda[i]).abs() < 1e-12, "{i}: {winv_s:?} {lambda:?}");
        }
        let mut round: [f64; 6] = [0.3, -1.0, 0.5, 0.25, -2.0, 1.0];
        let orig = round;
        w.apply_w(&mut round);
        w.apply_winv(&mut round);
        for i in 0..6 {
            assert!((round[i] - orig[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn jordan_division_inverts_product() {
        let cones = blocks();
        let lambda: [f64; 6] = [1.0, 2.0, 3.0, 0.5, 1.0, -1.5];
        let x = [0.3, -0.2, 1.0, 2.0, -1.0, 0.5];
        let v = jordan_product(&cones, &lambda, &x);
        let back = jordan_div(&cones, &lambda, &v);
        for i in 0..6 {
            assert!((back[i] - x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn step_to_boundary() {
        let cones = blocks();
        let u: [f64; 6] = [1.0, 1.0, 2.0, 0.0, 0.0, 0.0];
        let d = [-1.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        assert!((max_step(&cones, &u, &d) - 1.0).abs() < 1e-12);
        let d = [0.0, 0.0, 0.0, 4.0, 0.0, 0.0];
        assert!((max_step(&cones, &u, &d) - 0.5).abs() < 1e-12);
        let d = [1.0, 1.0, 1.0, 0.0, 0.0, 0.0];
        assert_eq!(max_step(&cones, &u, &d), f64::MAX);
    }

    #[test]
    fn margin_and_shift() {
        let cones = blocks();
        let mut v: [f64; 6] = [-1.0, 0.5, 1.0, 3.0, 0.0, 4.0];
        let m = interior_margin(&cones, &v);
        assert!((m - 4.0).abs() < 1e-12);
        add_identity(&cones, &mut v, m + 1.0);
        assert!(interior_margin(&cones, &v) < 0.0);
    }
}
