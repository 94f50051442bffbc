//! Plain-text standard-form dump for cross-checking with external solvers.
//!
//! Layout (one item per line, whitespace separated):
//!
//! ```text
//! socp <num_vars> <num_eq_rows> <num_cone_rows> <num_cones>
//! c <j> <value>                 nonzero objective entries
//! A <row> <j> <value>           equality matrix
//! b <row> <value>
//! G <row> <j> <value>           cone matrix (Gx + s = h)
//! h <row> <value>
//! cone l|q <start> <len>
//! var <name> <start> <len>
//! ```

use std::io::{self, Write};

use super::program::{ConeKind, ConicProgram};
use crate::scalar::Real;

pub fn write_standard_form<T: Real, W: Write>(program: &ConicProgram<T>, mut out: W) -> io::Result<()> {
    writeln!(
        out,
        "socp {} {} {} {}",
        program.num_vars,
        program.eq_rows.len(),
        program.cone_rows.len(),
        program.cones.len()
    )?;
    for (j, &c) in program.objective.iter().enumerate() {
        if c != T::zero() {
            writeln!(out, "c {j} {:e}", c.as_f64())?;
        }
    }
    for (r, row) in program.eq_rows.iter().enumerate() {
        for &(j, v) in row {
            writeln!(out, "A {r} {j} {:e}", v.as_f64())?;
        }
    }
    for (r, &v) in program.eq_rhs.iter().enumerate() {
        writeln!(out, "b {r} {:e}", v.as_f64())?;
    }
    for (r, row) in program.cone_rows.iter().enumerate() {
        for &(j, v) in row {
            writeln!(out, "G {r} {j} {:e}", v.as_f64())?;
        }
    }
    for (r, &v) in program.cone_rhs.iter().enumerate() {
        writeln!(out, "h {r} {:e}", v.as_f64())?;
    }
    for cone in &program.cones {
        let tag = match cone.kind {
            ConeKind::NonNeg => 'l',
            ConeKind::SecondOrder => 'q',
        };
        writeln!(out, "cone {tag} {} {}", cone.start, cone.len)?;
    }
    for v in &program.variables {
        writeln!(out, "var {} {} {}", v.name, v.range.start, v.range.len())?;
    }
    Ok(())
}
