use std::ops::Range;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Affine expression `Σ coef·x[idx] + constant`.
#[derive(Clone, Debug, PartialEq)]
pub struct Affine<T> {
    pub terms: Vec<(usize, T)>,
    pub constant: T,
}

impl<T: Real> Affine<T> {
    pub fn constant(c: T) -> Self {
        Affine {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(idx: usize) -> Self {
        Affine {
            terms: vec![(idx, T::one())],
            constant: T::zero(),
        }
    }

    pub fn term(mut self, idx: usize, coef: T) -> Self {
        self.terms.push((idx, coef));
        self
    }

    pub fn plus(mut self, other: &Affine<T>) -> Self {
        self.terms.extend_from_slice(&other.terms);
        self.constant += other.constant;
        self
    }

    pub fn scaled(mut self, k: T) -> Self {
        self.terms.iter_mut().for_each(|(_, c)| *c *= k);
        self.constant *= k;
        self
    }

    pub fn offset(mut self, k: T) -> Self {
        self.constant += k;
        self
    }

    pub fn eval(&self, x: &[T]) -> T {
        self.terms.iter().fold(self.constant, |acc, &(i, c)| acc + c * x[i])
    }

    /// Merges duplicate indices and drops exact zeros.
    fn compact(&self) -> Vec<(usize, T)> {
        let mut t = self.terms.clone();
        t.sort_by_key(|&(i, _)| i);
        let mut out: Vec<(usize, T)> = Vec::with_capacity(t.len());
        for (i, c) in t {
            match out.last_mut() {
                Some((j, acc)) if *j == i => *acc += c,
                _ => out.push((i, c)),
            }
        }
        out.retain(|&(_, c)| c != T::zero());
        out
    }
}

/// Rows encoding `‖terms‖² ≤ bound` as the second-order cone
/// `‖(2·terms, bound − 1)‖ ≤ bound + 1`.
pub fn quadratic_leq_as_cone<T: Real>(terms: &[Affine<T>], bound: &Affine<T>) -> Vec<Affine<T>> {
    let two = T::lit(2.0);
    let mut rows = Vec::with_capacity(terms.len() + 2);
    rows.push(bound.clone().offset(T::one()));
    rows.extend(terms.iter().map(|t| t.clone().scaled(two)));
    rows.push(bound.clone().offset(-T::one()));
    rows
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConeKind {
    NonNeg,
    SecondOrder,
}

/// A cone occupying rows `start..start + len` of the slack vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConeBlock {
    pub kind: ConeKind,
    pub start: usize,
    pub len: usize,
}

impl ConeBlock {
    pub fn range(&self) -> Range<usize> {
        self.start..self.start + self.len
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VariableBlock {
    pub name: String,
    pub range: Range<usize>,
}

/// Sparse standard-form conic program.
#[derive(Clone, Debug, PartialEq)]
pub struct ConicProgram<T> {
    pub num_vars: usize,
    pub objective: Vec<T>,
    pub eq_rows: Vec<Vec<(usize, T)>>,
    pub eq_rhs: Vec<T>,
    pub cone_rows: Vec<Vec<(usize, T)>>,
    pub cone_rhs: Vec<T>,
    pub cones: Vec<ConeBlock>,
    pub variables: Vec<VariableBlock>,
}

impl<T: Real> Default for ConicProgram<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> ConicProgram<T> {
    pub fn new() -> Self {
        ConicProgram {
            num_vars: 0,
            objective: Vec::new(),
            eq_rows: Vec::new(),
            eq_rhs: Vec::new(),
            cone_rows: Vec::new(),
            cone_rhs: Vec::new(),
            cones: Vec::new(),
            variables: Vec::new(),
        }
    }

    /// Appends a named block of `count` variables.
    pub fn add_variables(&mut self, name: impl Into<String>, count: usize) -> Range<usize> {
        let range = self.num_vars..self.num_vars + count;
        self.num_vars += count;
        self.objective.resize(self.num_vars, T::zero());
        self.variables.push(VariableBlock {
            name: name.into(),
            range: range.clone(),
        });
        range
    }

    pub fn variable(&self, name: &str) -> Option<Range<usize>> {
        self.variables.iter().find(|v| v.name == name).map(|v| v.range.clone())
    }

    pub fn set_cost(&mut self, idx: usize, coef: T) {
        self.objective[idx] = coef;
    }

    /// `expr = 0`.
    pub fn add_equality(&mut self, expr: &Affine<T>) {
        self.eq_rows.push(expr.compact());
        self.eq_rhs.push(-expr.constant);
    }

    fn push_cone_row(&mut self, expr: &Affine<T>) {
        // s = expr(x) = h − Gx  ⇒  G = −coefs, h = constant
        self.cone_rows
            .push(expr.compact().into_iter().map(|(i, c)| (i, -c)).collect());
        self.cone_rhs.push(expr.constant);
    }

    /// `expr ≥ 0`.
    pub fn add_nonneg(&mut self, expr: &Affine<T>) {
        let start = self.cone_rows.len();
        self.push_cone_row(expr);
        match self.cones.last_mut() {
            Some(last) if last.kind == ConeKind::NonNeg && last.start + last.len == start => last.len += 1,
            _ => self.cones.push(ConeBlock {
                kind: ConeKind::NonNeg,
                start,
                len: 1,
            }),
        }
    }

    /// `rows[0] ≥ ‖rows[1..]‖`.
    pub fn add_second_order(&mut self, rows: &[Affine<T>]) {
        let start = self.cone_rows.len();
        for r in rows {
            self.push_cone_row(r);
        }
        self.cones.push(ConeBlock {
            kind: ConeKind::SecondOrder,
            start,
            len: rows.len(),
        });
    }

    pub fn num_cone_rows(&self) -> usize {
        self.cone_rows.len()
    }

    /// Cone degree `ν`: one per orthant row plus one per second-order cone.
    pub fn degree(&self) -> usize {
        self.cones
            .iter()
            .map(|c| match c.kind {
                ConeKind::NonNeg => c.len,
                ConeKind::SecondOrder => 1,
            })
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.objective.len() != self.num_vars {
            return Err(Error::invalid("objective length differs from variable count"));
        }
        let in_range = |rows: &[Vec<(usize, T)>]| rows.iter().flatten().all(|&(i, _)| i < self.num_vars);
        if !in_range(&self.eq_rows) || !in_range(&self.cone_rows) {
            return Err(Error::invalid("constraint references an unknown variable"));
        }
        let mut next = 0;
        for c in &self.cones {
            if c.start != next || c.len == 0 {
                return Err(Error::invalid("cone blocks must partition the slack rows"));
            }
            if c.kind == ConeKind::SecondOrder && c.len < 1 {
                return Err(Error::invalid("empty second-order cone"));
            }
            next += c.len;
        }
        if next != self.cone_rows.len() || self.cone_rhs.len() != next || self.eq_rhs.len() != self.eq_rows.len() {
            return Err(Error::invalid("cone blocks must partition the slack rows"));
        }
        Ok(())
    }

    /// Whether `slack` (indexed like the cone rows) lies in `K` up to `tol`.
    pub fn slack_in_cone(&self, slack: &[T], tol: T) -> bool {
        self.cones.iter().all(|c| {
            let v = &slack[c.range()];
            match c.kind {
                ConeKind::NonNeg => v.iter().all(|&x| x >= -tol),
                ConeKind::SecondOrder => {
                    let tail = v[1..].iter().fold(T::zero(), |a, &x| a + x * x).sqrt();
                    v[0] >= tail - tol
                }
            }
        })
    }

    /// Slack `h − Gx` for a candidate point.
    pub fn slack(&self, x: &[T]) -> Vec<T> {
        self.cone_rows
            .iter()
            .zip(&self.cone_rhs)
            .map(|(row, &h)| row.iter().fold(h, |acc, &(i, g)| acc - g * x[i]))
            .collect()
    }
}
