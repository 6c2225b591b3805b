//! Memory-coefficient solvers.
//!
//! All solvers work on a coefficient grid (usually twice as fine as the
//! propagation grid, so Runge–Kutta substages of the propagators fall on
//! nodes) and share the convention that node `k` is time `k·h`.

mod finite_t;
mod master_ft;
mod sources;
mod zero_t;

pub use finite_t::{solve_finite_t, FiniteTCoeffs, FiniteTOptions};
pub use master_ft::{solve_master_coeffs_ft, MasterCoeffsFT, MasterFtOptions, SweepReport};
pub use zero_t::{
    refinement_error, solve_zero_t, solve_zero_t_converged, solve_zero_t_ou_fast, ZeroTCoeffs, ZeroTOptions,
};

use crate::grid::cubic_stencil;
use crate::linalg::{CMat, CVec, C64, ZERO};
use std::io::Write;

/// Default memory ceiling for stored two-time tables.
pub const DEFAULT_MEMORY_BUDGET: usize = 1 << 30;

/// Cubic interpolation of node vectors at time `t` on spacing `h`.
pub(crate) fn interp_vec(nodes: &[CVec], h: f64, t: f64) -> CVec {
    let (start, w, order) = cubic_stencil(nodes.len(), t / h);
    let mut out = CVec::zeros(nodes[0].len());
    for j in 0..order {
        out.axpy(C64::new(w[j], 0.0), &nodes[start + j], C64::new(1.0, 0.0));
    }
    out
}

pub(crate) fn interp_mat(nodes: &[CMat], h: f64, t: f64) -> CMat {
    let (start, w, order) = cubic_stencil(nodes.len(), t / h);
    let mut out = CMat::zeros(nodes[0].nrows(), nodes[0].ncols());
    for j in 0..order {
        out += &nodes[start + j] * C64::new(w[j], 0.0);
    }
    out
}

/// Writes `t` plus `_re`/`_im` column pairs.
pub(crate) fn write_complex_csv<W: Write>(
    out: W,
    names: &[String],
    times: &[f64],
    row: impl Fn(usize) -> Vec<C64>,
) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(out);
    write!(w, "t")?;
    for n in names {
        write!(w, ",{n}_re,{n}_im")?;
    }
    writeln!(w)?;
    for (k, &t) in times.iter().enumerate() {
        write!(w, "{t}")?;
        let vals = row(k);
        debug_assert_eq!(vals.len(), names.len());
        for v in vals {
            write!(w, ",{},{}", v.re, v.im)?;
        }
        writeln!(w)?;
    }
    w.flush()
}

pub(crate) fn max_abs_vec_diff(a: &CVec, b: &CVec) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub(crate) fn conj_dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).fold(ZERO, |acc, (x, y)| acc + x.conj() * y)
}
