//! Zero-temperature memory coefficients P_i(t) = ∫₀^t α(t,s) p_i(t,s) ds,
//! where ∂_t p_i(t,s) = i(M p)_i + (Σ_j l_j* p_j) P_i(t) and p_i(t,t) = l_i.

use super::{conj_dot, interp_vec, write_complex_csv, DEFAULT_MEMORY_BUDGET};
use crate::error::{Error, Result};
use crate::grid::{QuadTable, TimeGrid};
use crate::linalg::{CMat, CVec, C64, TWO, ZERO};
use crate::model::{BathSpec, CavityChainModel, EffectiveKernel};
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Copy)]
pub struct ZeroTOptions {
    /// Keep the full lower triangle p_i(t_k, s_j).
    pub store_two_time: bool,
    pub memory_budget_bytes: usize,
}

impl Default for ZeroTOptions {
    fn default() -> Self {
        ZeroTOptions {
            store_two_time: false,
            memory_budget_bytes: DEFAULT_MEMORY_BUDGET,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ZeroTCoeffs {
    grid: TimeGrid,
    memory: Vec<CVec>,
    /// Row k holds p(t_k, s_j) for j = 0..=k.
    two_time: Option<Vec<Vec<CVec>>>,
}

impl ZeroTCoeffs {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_cavities(&self) -> usize {
        self.memory[0].len()
    }

    /// P(t_k).
    pub fn memory_node(&self, k: usize) -> &CVec {
        &self.memory[k]
    }

    pub fn memory_nodes(&self) -> &[CVec] {
        &self.memory
    }

    /// P(t), cubic interpolation between nodes.
    pub fn memory_at(&self, t: f64) -> CVec {
        interp_vec(&self.memory, self.grid.dt(), t)
    }

    pub fn two_time(&self, k: usize, j: usize) -> Option<&CVec> {
        self.two_time.as_ref().and_then(|rows| rows.get(k)).and_then(|r| r.get(j))
    }

    pub fn has_two_time(&self) -> bool {
        self.two_time.is_some()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let names: Vec<String> = (1..=self.n_cavities()).map(|i| format!("P{i}")).collect();
        write_complex_csv(out, &names, &self.grid.times(), |k| self.memory[k].iter().copied().collect())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)?;
        Ok(())
    }
}

fn zero_t_kernel(bath: &BathSpec) -> Result<EffectiveKernel> {
    bath.validate()?;
    if bath.alpha2().is_some_and(|k| !k.is_zero()) {
        return Err(Error::invalid(
            "zero-temperature coefficients requested for a bath with a nonzero second kernel",
        ));
    }
    let k = bath.alpha1();
    if k.is_markov() {
        return Err(Error::UnsupportedKernel(
            "a Markov delta kernel has no memory coefficients; use the Lindblad propagator".into(),
        ));
    }
    Ok(k)
}

/// Generic two-time Volterra solver.
///
/// Every s-slice is marched in t with classical RK4 on the grid. At a
/// stage time τ ∈ (t_n, t_{n+1}] the memory integral uses fourth-order
/// Gregory weights over the nodes s_0..s_n plus the sliver [t_n, τ], on
/// which p(τ,·) is the quadratic through s_{n−1}, s_n and the diagonal
/// value p(τ,τ) = l.
pub fn solve_zero_t(
    model: &CavityChainModel,
    bath: &BathSpec,
    grid: &TimeGrid,
    opts: ZeroTOptions,
) -> Result<ZeroTCoeffs> {
    solve_zero_t_with_kernel(model, &zero_t_kernel(bath)?, grid, opts)
}

pub(crate) fn solve_zero_t_with_kernel(
    model: &CavityChainModel,
    kernel: &EffectiveKernel,
    grid: &TimeGrid,
    opts: ZeroTOptions,
) -> Result<ZeroTCoeffs> {
    let n_cav = model.n_cavities();
    let n = grid.n_steps();
    let h = grid.dt();
    if opts.store_two_time {
        let bytes = (n + 1) * (n + 2) / 2 * n_cav * std::mem::size_of::<C64>();
        if bytes > opts.memory_budget_bytes {
            return Err(Error::MemoryBudget {
                required_bytes: bytes,
                budget_bytes: opts.memory_budget_bytes,
            });
        }
    }

    let m = model.single_particle_matrix();
    let l: Vec<C64> = model.couplings().to_vec();
    let quad = QuadTable::new(n + 1);

    // α at lags that are multiples of h/2
    let alpha_half: Vec<C64> = (0..=2 * n + 2)
        .map(|q| kernel.eval(q as f64 * 0.5 * h, 0.0))
        .collect::<Result<_>>()?;

    let mut memory = Vec::with_capacity(n + 1);
    memory.push(CVec::zeros(n_cav));
    let mut two_time: Option<Vec<Vec<CVec>>> = opts.store_two_time.then(|| {
        let mut rows = Vec::with_capacity(n + 1);
        rows.push(vec![CVec::from_column_slice(&l)]);
        rows
    });

    // slices[j*N..(j+1)*N] = p(t_n, s_j)
    let mut slices: Vec<C64> = l.clone();
    let mut stage = Vec::new();
    let mut acc = Vec::new();
    let mut ks: [Vec<C64>; 4] = Default::default();

    for step in 0..n {
        let n_sl = step + 1;
        let len = n_sl * n_cav;
        stage.resize(len, ZERO);
        acc.resize(len, ZERO);
        for k in ks.iter_mut() {
            k.resize(len, ZERO);
        }
        let t_n = step as f64 * h;

        let stage_offsets = [0.0, 0.5, 0.5, 1.0];
        for (si, &frac) in stage_offsets.iter().enumerate() {
            // stage input
            if si == 0 {
                stage.copy_from_slice(&slices);
            } else {
                let scale = C64::new(frac * h, 0.0);
                for ((st, &base), &kprev) in stage.iter_mut().zip(&slices).zip(&ks[si - 1]) {
                    *st = base + scale * kprev;
                }
            }
            let tau = t_n + frac * h;
            let half_lag = (2.0 * frac).round() as usize;
            let p_mem = stage_memory(
                &stage, n_cav, step, h, tau, &l, &alpha_half, half_lag, &quad, kernel,
            )?;
            let out = &mut ks[si];
            slice_rhs(&m, &l, &p_mem, &stage, out, n_cav);
        }
        for j in 0..len {
            slices[j] += C64::new(h / 6.0, 0.0) * (ks[0][j] + 2.0 * ks[1][j] + 2.0 * ks[2][j] + ks[3][j]);
        }
        slices.extend_from_slice(&l);

        // reported P(t_{n+1}) over all n+2 nodes
        let k_new = step + 1;
        let w = quad.weights(k_new);
        let mut p = CVec::zeros(n_cav);
        for j in 0..=k_new {
            let a = alpha_half[2 * (k_new - j)] * (w[j] * h);
            for i in 0..n_cav {
                p[i] += a * slices[j * n_cav + i];
            }
        }
        memory.push(p);
        if let Some(rows) = two_time.as_mut() {
            rows.push(slices.chunks(n_cav).map(CVec::from_column_slice).collect());
        }
    }

    Ok(ZeroTCoeffs {
        grid: *grid,
        memory,
        two_time,
    })
}

/// P(τ) from stage slice values at nodes 0..=step plus the sliver to τ.
#[allow(clippy::too_many_arguments)]
fn stage_memory(
    stage: &[C64],
    n_cav: usize,
    step: usize,
    h: f64,
    tau: f64,
    l: &[C64],
    alpha_half: &[C64],
    half_lag: usize,
    quad: &QuadTable,
    kernel: &EffectiveKernel,
) -> Result<CVec> {
    let mut p = CVec::zeros(n_cav);
    if step > 0 {
        let w = quad.weights(step);
        for j in 0..=step {
            let a = alpha_half[2 * (step - j) + half_lag] * (w[j] * h);
            for i in 0..n_cav {
                p[i] += a * stage[j * n_cav + i];
            }
        }
    }
    let t_n = step as f64 * h;
    let width = tau - t_n;
    if width > 0.0 {
        let s_mid = t_n + 0.5 * width;
        let last = &stage[step * n_cav..(step + 1) * n_cav];
        let prev = (step > 0).then(|| &stage[(step - 1) * n_cav..step * n_cav]);
        let a_n = kernel.eval(tau, t_n)?;
        let a_mid = kernel.eval(tau, s_mid)?;
        let a_tau = kernel.eval(tau, tau)?;
        for i in 0..n_cav {
            let mid = match prev {
                // quadratic through (t_n − h, prev), (t_n, last), (τ, l) at s_mid
                Some(prev) => {
                    let (x0, x1, x2) = (t_n - h, t_n, tau);
                    let x = s_mid;
                    let l0 = (x - x1) * (x - x2) / ((x0 - x1) * (x0 - x2));
                    let l1 = (x - x0) * (x - x2) / ((x1 - x0) * (x1 - x2));
                    let l2 = (x - x0) * (x - x1) / ((x2 - x0) * (x2 - x1));
                    prev[i] * l0 + last[i] * l1 + l[i] * l2
                }
                None => (last[i] + l[i]) * 0.5,
            };
            p[i] += (a_n * last[i] + a_mid * mid * 4.0 + a_tau * l[i]) * (width / 6.0);
        }
    }
    Ok(p)
}

/// ∂_t p = i M p + (l*·p) P for every slice.
fn slice_rhs(m: &CMat, l: &[C64], p_mem: &CVec, slices: &[C64], out: &mut [C64], n_cav: usize) {
    for (src, dst) in slices.chunks(n_cav).zip(out.chunks_mut(n_cav)) {
        let c = conj_dot(l, src);
        for i in 0..n_cav {
            let mut acc = ZERO;
            for k in 0..n_cav {
                acc += m[(i, k)] * src[k];
            }
            dst[i] = C64::new(-acc.im, acc.re) + c * p_mem[i];
        }
    }
}

/// Closed ODE for exponential-sum kernels α(τ) = Σ_r c_r e^{−κ_r τ}:
/// with P = Σ_r P^r, dP^r/dt = c_r l − κ_r P^r + i M P^r + (l*·P^r) P.
pub fn solve_zero_t_ou_fast(model: &CavityChainModel, bath: &BathSpec, grid: &TimeGrid) -> Result<ZeroTCoeffs> {
    let kernel = zero_t_kernel(bath)?;
    let terms = kernel.exp_terms().ok_or_else(|| {
        Error::UnsupportedKernel("the closed-ODE path needs an exponential (OU) kernel".into())
    })?;
    let n_cav = model.n_cavities();
    let m = model.single_particle_matrix();
    let l = CVec::from_column_slice(model.couplings());
    let h = grid.dt();
    let r = terms.len();

    let deriv = |state: &[CVec]| -> Vec<CVec> {
        let total: CVec = state.iter().fold(CVec::zeros(n_cav), |a, b| a + b);
        state
            .iter()
            .zip(&terms)
            .map(|(pr, term)| {
                let c = l.dotc(pr);
                &l * term.amplitude - pr * term.rate + (&m * pr) * crate::linalg::I + &total * c
            })
            .collect()
    };

    let mut state: Vec<CVec> = vec![CVec::zeros(n_cav); r];
    let mut memory = Vec::with_capacity(grid.n_points());
    memory.push(CVec::zeros(n_cav));
    let half = C64::new(0.5 * h, 0.0);
    let full = C64::new(h, 0.0);
    for _ in 0..grid.n_steps() {
        let k1 = deriv(&state);
        let s2: Vec<CVec> = state.iter().zip(&k1).map(|(s, k)| s + k * half).collect();
        let k2 = deriv(&s2);
        let s3: Vec<CVec> = state.iter().zip(&k2).map(|(s, k)| s + k * half).collect();
        let k3 = deriv(&s3);
        let s4: Vec<CVec> = state.iter().zip(&k3).map(|(s, k)| s + k * full).collect();
        let k4 = deriv(&s4);
        for q in 0..r {
            state[q] += (&k1[q] + &k2[q] * TWO + &k3[q] * TWO + &k4[q]) * C64::new(h / 6.0, 0.0);
        }
        memory.push(state.iter().fold(CVec::zeros(n_cav), |a, b| a + b));
    }
    Ok(ZeroTCoeffs {
        grid: *grid,
        memory,
        two_time: None,
    })
}

/// max_i |P_i^coarse(t_max) − P_i^fine(t_max)|.
pub fn refinement_error(coarse: &ZeroTCoeffs, fine: &ZeroTCoeffs) -> f64 {
    let a = coarse.memory.last().unwrap();
    let b = fine.memory.last().unwrap();
    super::max_abs_vec_diff(a, b)
}

/// Solves on `grid` and on the grid with halved step; fails with
/// [`Error::NonConvergence`] when the end-time coefficients differ by more
/// than `tol`.
pub fn solve_zero_t_converged(
    model: &CavityChainModel,
    bath: &BathSpec,
    grid: &TimeGrid,
    tol: f64,
) -> Result<ZeroTCoeffs> {
    let solve = |g: &TimeGrid| match bath.alpha1().exp_terms() {
        Some(_) => solve_zero_t_ou_fast(model, bath, g),
        None => solve_zero_t(model, bath, g, ZeroTOptions::default()),
    };
    let coarse = solve(grid)?;
    let fine = solve(&grid.refined(2))?;
    let err = refinement_error(&coarse, &fine);
    if err > tol {
        return Err(Error::NonConvergence {
            what: "zero-temperature memory coefficients under step halving",
            achieved: err,
        });
    }
    Ok(coarse)
}
