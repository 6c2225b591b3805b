//! Readouts of density matrices: Wigner functions, rotated-cat fidelity,
//! negativity, photon numbers and purity.
//!
//! Wigner convention: W(β) = (2/π) Tr[ρ D(β) Π D(β)†] with parity Π and
//! β = x + ip, so the vacuum is (2/π) e^{−2|β|²} and ∫∫W dx dp = Tr ρ.

use crate::error::{Error, Result};
use crate::exec::map_indexed;
use crate::hilbert::{coherent_amplitudes, number_op, partial_trace, partial_transpose, HilbertSpec, Rho};
use crate::linalg::{hermitian_eigenvalues, CMat, CVec, C64, ZERO};
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

/// Rectangular phase-space grid, inclusive of both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSpaceGrid {
    pub x_range: (f64, f64),
    pub p_range: (f64, f64),
    pub nx: usize,
    pub np: usize,
}

impl Default for PhaseSpaceGrid {
    fn default() -> Self {
        PhaseSpaceGrid {
            x_range: (-2.5, 2.5),
            p_range: (-2.5, 2.5),
            nx: 101,
            np: 101,
        }
    }
}

impl PhaseSpaceGrid {
    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.np < 2 {
            return Err(Error::invalid("Wigner grid needs at least 2 points per axis"));
        }
        if !(self.x_range.1 > self.x_range.0 && self.p_range.1 > self.p_range.0) {
            return Err(Error::invalid("Wigner grid ranges must be increasing"));
        }
        Ok(())
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_range.0 + (self.x_range.1 - self.x_range.0) * i as f64 / (self.nx - 1) as f64
    }

    pub fn p(&self, j: usize) -> f64 {
        self.p_range.0 + (self.p_range.1 - self.p_range.0) * j as f64 / (self.np - 1) as f64
    }

    fn max_radius(&self) -> f64 {
        let xm = self.x_range.0.abs().max(self.x_range.1.abs());
        let pm = self.p_range.0.abs().max(self.p_range.1.abs());
        xm.hypot(pm)
    }
}

/// W(x, p) sampled on a [`PhaseSpaceGrid`]; `values[j * nx + i]` is at (x_i, p_j).
#[derive(Debug, Clone)]
pub struct WignerGrid {
    pub grid: PhaseSpaceGrid,
    pub values: Vec<f64>,
}

impl WignerGrid {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.grid.nx + i]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Trapezoid integral over the grid.
    pub fn integral(&self) -> f64 {
        let g = &self.grid;
        let dx = (g.x_range.1 - g.x_range.0) / (g.nx - 1) as f64;
        let dp = (g.p_range.1 - g.p_range.0) / (g.np - 1) as f64;
        let edge = |k: usize, n: usize| if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
        let mut acc = 0.0;
        for j in 0..g.np {
            for i in 0..g.nx {
                acc += edge(i, g.nx) * edge(j, g.np) * self.at(i, j);
            }
        }
        acc * dx * dp
    }

    /// ∫W dp at each x_i.
    pub fn x_marginal(&self) -> Vec<f64> {
        let g = &self.grid;
        let dp = (g.p_range.1 - g.p_range.0) / (g.np - 1) as f64;
        (0..g.nx)
            .map(|i| {
                (0..g.np)
                    .map(|j| if j == 0 || j == g.np - 1 { 0.5 } else { 1.0 } * self.at(i, j))
                    .sum::<f64>()
                    * dp
            })
            .collect()
    }

    /// Rows `t,x,p,W`; with `header` the column names come first.
    pub fn write_csv<W: Write>(&self, out: W, t: f64, header: bool) -> std::io::Result<()> {
        let mut w = std::io::BufWriter::new(out);
        if header {
            writeln!(w, "t,x,p,W")?;
        }
        for j in 0..self.grid.np {
            for i in 0..self.grid.nx {
                writeln!(w, "{t},{},{},{}", self.grid.x(i), self.grid.p(j), self.at(i, j))?;
            }
        }
        w.flush()
    }

    pub fn save_csv(&self, path: &Path, t: f64) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?, t, true)?;
        Ok(())
    }
}

/// Generalized Laguerre polynomials L_n^{(k)}(x) for n = 0..len.
fn laguerre_row(len: usize, k: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let kf = k as f64;
    let (mut prev, mut cur) = (0.0, 1.0);
    for n in 0..len {
        out.push(cur);
        let nf = n as f64;
        let next = ((2.0 * nf + 1.0 + kf - x) * cur - (nf + kf) * prev) / (nf + 1.0);
        prev = cur;
        cur = next;
    }
    out
}

/// ⟨m|D(γ)|n⟩ for all m, n < d.
fn displacement_elements(d: usize, gamma: C64) -> CMat {
    let r2 = gamma.norm_sqr();
    let env = (-0.5 * r2).exp();
    let mut out = CMat::zeros(d, d);
    for k in 0..d {
        let lag = laguerre_row(d - k, k, r2);
        for n in 0..d - k {
            let m = n + k;
            // √(n!/m!) γ^k
            let mut pref = C64::new(env, 0.0);
            for j in n + 1..=m {
                pref *= gamma / (j as f64).sqrt();
            }
            out[(m, n)] = pref * lag[n];
            if k > 0 {
                // ⟨n|D(γ)|m⟩ = √(n!/m!) (−γ*)^k L_n^{(k)}
                let mut pref2 = C64::new(env, 0.0);
                for j in n + 1..=m {
                    pref2 *= -gamma.conj() / (j as f64).sqrt();
                }
                out[(n, m)] = pref2 * lag[n];
            }
        }
    }
    out
}

fn single_mode(rho: &Rho) -> Result<&CMat> {
    if rho.spec().n_cavities() != 1 {
        return Err(Error::invalid(format!(
            "expected a single-mode state, got {} cavities (take the partial trace first)",
            rho.spec().n_cavities()
        )));
    }
    Ok(rho.matrix())
}

/// W at one phase-space point.
pub fn wigner_point(rho: &CMat, beta: C64) -> f64 {
    let d = rho.nrows();
    // D(β)ΠD(β)† = D(2β)Π
    let disp = displacement_elements(d, beta * 2.0);
    let mut acc = ZERO;
    for n in 0..d {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        for m in 0..d {
            acc += rho[(n, m)] * disp[(m, n)] * sign;
        }
    }
    2.0 / PI * acc.re
}

/// W(x, p) of a single-mode state on `grid`.
pub fn wigner(rho: &Rho, grid: &PhaseSpaceGrid) -> Result<WignerGrid> {
    grid.validate()?;
    let m = single_mode(rho)?;
    let d = m.nrows();
    // the highest kept Fock state reaches |β| ≈ √(d − 1/2)
    if grid.max_radius() > (d as f64).sqrt() + 1.0 {
        log::warn!(
            "Wigner range |β| ≤ {:.2} exceeds what d={d} resolves; values near the edge are truncation-limited",
            grid.max_radius()
        );
    }
    let rows = map_indexed(grid.np, |j| {
        (0..grid.nx)
            .map(|i| wigner_point(m, C64::new(grid.x(i), grid.p(j))))
            .collect::<Vec<f64>>()
    });
    Ok(WignerGrid {
        grid: *grid,
        values: rows.concat(),
    })
}

/// Wigner function of cavity `i` after tracing out the others.
pub fn cavity_wigner(rho: &Rho, i: usize, grid: &PhaseSpaceGrid) -> Result<WignerGrid> {
    wigner(&partial_trace(rho, &[i])?, grid)
}

/// Best rotated-cat overlap and the angle that attains it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatFidelity {
    pub fidelity: f64,
    pub theta: f64,
}

const COARSE_ANGLES: usize = 256;
const THETA_TOL: f64 = 1e-6;

/// max over θ ∈ [0, 2π) of ⟨cat_θ|ρ|cat_θ⟩ with
/// |cat_θ⟩ ∝ |αe^{−iθ}⟩ + |−αe^{−iθ}⟩, normalized in the truncated space.
/// Coarse scan then golden-section refinement; ties go to the smallest θ.
pub fn cat_fidelity(rho: &Rho, alpha: C64) -> Result<CatFidelity> {
    let m = single_mode(rho)?;
    if alpha == ZERO {
        return Err(Error::invalid("cat amplitude must be nonzero"));
    }
    let d = m.nrows();
    let (plus, _) = coherent_amplitudes(d, alpha);
    let (minus, _) = coherent_amplitudes(d, -alpha);
    let mut cat = CVec::from_iterator(d, plus.iter().zip(&minus).map(|(a, b)| a + b));
    let norm = cat.norm();
    cat.unscale_mut(norm);
    // F(θ) = Σ_k A_k e^{ikθ}, A_k = Σ_{m−n=k} c_m* ρ_mn c_n
    let mut harmonics = vec![ZERO; 2 * d - 1];
    for r in 0..d {
        for c in 0..d {
            harmonics[r + d - 1 - c] += cat[r].conj() * m[(r, c)] * cat[c];
        }
    }
    let f = |theta: f64| -> f64 {
        harmonics
            .iter()
            .enumerate()
            .map(|(idx, a)| (a * C64::from_polar(1.0, (idx as f64 - (d - 1) as f64) * theta)).re)
            .sum()
    };
    let step = 2.0 * PI / COARSE_ANGLES as f64;
    let mut best = (0.0, f(0.0));
    for k in 1..COARSE_ANGLES {
        let th = k as f64 * step;
        let v = f(th);
        if v > best.1 + 1e-12 {
            best = (th, v);
        }
    }
    // golden section on [θ* − step, θ* + step]
    let (mut a, mut b) = (best.0 - step, best.0 + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut e = a + g * (b - a);
    let (mut fc, mut fe) = (f(c), f(e));
    while b - a > THETA_TOL {
        if fc >= fe {
            b = e;
            e = c;
            fe = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + g * (b - a);
            fe = f(e);
        }
    }
    let th = 0.5 * (a + b);
    let v = f(th);
    let (theta, fidelity) = if v > best.1 + 1e-12 { (th, v) } else { best };
    Ok(CatFidelity {
        fidelity: fidelity.clamp(0.0, 1.0),
        theta: theta.rem_euclid(2.0 * PI),
    })
}

/// Cat fidelity of cavity `i` after tracing out the others.
pub fn cavity_cat_fidelity(rho: &Rho, i: usize, alpha: C64) -> Result<CatFidelity> {
    cat_fidelity(&partial_trace(rho, &[i])?, alpha)
}

/// Negativity between cavity sets `a` and `b`; cavities in neither are traced
/// out first, then `a` is partially transposed. N = Σ |negative eigenvalues|.
pub fn negativity(rho: &Rho, a: &[usize], b: &[usize]) -> Result<f64> {
    if a.is_empty() || b.is_empty() || a.iter().any(|i| b.contains(i)) {
        return Err(Error::invalid("negativity needs two disjoint, non-empty cavity sets"));
    }
    let mut keep: Vec<usize> = a.iter().chain(b).copied().collect();
    keep.sort_unstable();
    let reduced = partial_trace(rho, &keep)?;
    // positions of `a` inside the reduced space
    let a_local: Vec<usize> = a.iter().map(|i| keep.iter().position(|k| k == i).unwrap()).collect();
    let pt = partial_transpose(&reduced, &a_local)?;
    Ok(hermitian_eigenvalues(&pt)
        .iter()
        .filter(|&&x| x < 0.0)
        .map(|x| -x)
        .sum())
}

/// ⟨a_i† a_i⟩ for every cavity.
pub fn mode_occupations(rho: &Rho) -> Result<Vec<f64>> {
    (0..rho.spec().n_cavities())
        .map(|i| Ok(rho.expectation(&number_op(rho.spec(), i)?).re))
        .collect()
}

pub fn purity(rho: &Rho) -> f64 {
    rho.purity()
}

/// Which channels to record.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSpec {
    /// Cat amplitude for the fidelity channels; `None` disables them.
    pub cat_alpha: Option<C64>,
    /// Cavity pairs for negativity channels.
    pub negativity_pairs: Vec<(usize, usize)>,
    pub occupations: bool,
    pub purity: bool,
}

impl ObservableSpec {
    /// Column names, with 1-based cavity labels.
    pub fn channel_names(&self, n_cavities: usize) -> Vec<String> {
        let mut names = Vec::new();
        if self.cat_alpha.is_some() {
            names.extend((1..=n_cavities).map(|i| format!("fidelity_{i}")));
            names.extend((1..=n_cavities).map(|i| format!("theta_{i}")));
        }
        names.extend(
            self.negativity_pairs
                .iter()
                .map(|(i, j)| format!("negativity_{}_{}", i + 1, j + 1)),
        );
        if self.occupations {
            names.extend((1..=n_cavities).map(|i| format!("occupation_{i}")));
        }
        if self.purity {
            names.push("purity".into());
        }
        names
    }

    pub fn evaluate(&self, rho: &Rho) -> Result<Vec<f64>> {
        let n = rho.spec().n_cavities();
        let mut row = Vec::new();
        if let Some(alpha) = self.cat_alpha {
            let fits: Vec<CatFidelity> = (0..n)
                .map(|i| cavity_cat_fidelity(rho, i, alpha))
                .collect::<Result<_>>()?;
            row.extend(fits.iter().map(|f| f.fidelity));
            row.extend(fits.iter().map(|f| f.theta));
        }
        for &(i, j) in &self.negativity_pairs {
            row.push(negativity(rho, &[i], &[j])?);
        }
        if self.occupations {
            row.extend(mode_occupations(rho)?);
        }
        if self.purity {
            row.push(purity(rho));
        }
        Ok(row)
    }
}

/// Real-valued channels on a common time base.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSeries {
    pub times: Vec<f64>,
    pub names: Vec<String>,
    /// rows[k][c] is channel c at times[k].
    pub rows: Vec<Vec<f64>>,
}

impl ObservableSeries {
    pub fn compute<'a>(
        spec: &ObservableSpec,
        hilbert: &HilbertSpec,
        states: impl IntoIterator<Item = (f64, &'a CMat)>,
    ) -> Result<Self> {
        let states: Vec<(f64, &CMat)> = states.into_iter().collect();
        let rows = map_indexed(states.len(), |k| {
            spec.evaluate(&Rho::new(hilbert.clone(), states[k].1.clone())?)
        });
        Ok(ObservableSeries {
            times: states.iter().map(|s| s.0).collect(),
            names: spec.channel_names(hilbert.n_cavities()),
            rows: rows.into_iter().collect::<Result<_>>()?,
        })
    }

    pub fn channel(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.names.iter().position(|n| n == name)?;
        Some(self.rows.iter().map(|r| r[c]).collect())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = std::io::BufWriter::new(out);
        write!(w, "t")?;
        for n in &self.names {
            write!(w, ",{n}")?;
        }
        writeln!(w)?;
        for (t, row) in self.times.iter().zip(&self.rows) {
            write!(w, "{t}")?;
            for v in row {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        w.flush()
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)?;
        Ok(())
    }
}
