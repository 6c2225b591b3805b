//! Linear quantum state diffusion: coloured-noise sampling, single
//! trajectories and ensemble means.
//!
//! Trajectories solve the *linear* (unnormalized) QSD equation, so a single
//! ψ(t) is not a physical state and its norm drifts; only the ensemble mean
//! M[|ψ⟩⟨ψ|] is. Noise paths live on the coefficient grid, which must refine
//! the propagation grid by an even factor so every RK4 stage reads a node.

use crate::coeffs::{FiniteTCoeffs, ZeroTCoeffs};
use crate::error::{Error, Result};
use crate::exec::map_indexed;
use crate::grid::{quad_weights, TimeGrid};
use crate::hilbert::{annihilation_op, HilbertSpec, Ket};
use crate::linalg::{CMat, CVec, SparseOp, C64, I, ONE, TWO, ZERO};
use crate::model::{build_collective_l, build_hamiltonian, BathSpec, CavityChainModel, CorrelationKernel, EffectiveKernel};
use crate::propagators::write_rho_csv;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::io::Write;
use std::path::Path;

/// ‖ψ‖² above this aborts a trajectory.
pub const NORM_LIMIT: f64 = 1e6;

/// Range the ensemble mean of ‖ψ‖² should stay in; leaving it usually means
/// the step is too coarse for the memory coefficients.
pub const MEAN_NORM_RANGE: (f64, f64) = (0.5, 2.0);

/// The RNG for one trajectory: ChaCha8 seeded by the master seed, on the
/// stream given by the trajectory index. Independent of scheduling.
pub fn trajectory_rng(seed: u64, trajectory: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trajectory);
    rng
}

/// Complex Gaussian with E|ξ|² = var and E ξ² = 0.
fn complex_normal<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let s = (0.5 * var).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * s, im * s)
}

#[derive(Debug, Clone)]
enum Backend {
    Zero,
    /// Exact AR(1) discretization of a stationary OU process.
    Ou { decay: f64, innovation_var: f64, stationary_var: f64 },
    /// Lower Cholesky factor of the covariance on the grid.
    Cholesky(CMat),
}

/// Gaussian process sampler with M[z_t z_s*] = α(t,s), M[z_t z_s] = 0.
#[derive(Debug, Clone)]
pub struct NoiseSampler {
    grid: TimeGrid,
    backend: Backend,
}

impl NoiseSampler {
    /// OU kernels use the exact recursion; tabulated kernels go through a
    /// Cholesky factorization of the grid covariance.
    pub fn new(kernel: &EffectiveKernel, grid: &TimeGrid) -> Result<Self> {
        if kernel.is_zero() {
            return Ok(NoiseSampler {
                grid: *grid,
                backend: Backend::Zero,
            });
        }
        match &kernel.base {
            CorrelationKernel::OrnsteinUhlenbeck { gamma } => {
                if kernel.scale < 0.0 {
                    return Err(Error::invalid("noise kernel scale must be non-negative"));
                }
                // real kernel: conjugation is a no-op
                let decay = (-gamma * grid.dt()).exp();
                let stationary_var = 0.5 * gamma * kernel.scale;
                Ok(NoiseSampler {
                    grid: *grid,
                    backend: Backend::Ou {
                        decay,
                        innovation_var: stationary_var * (1.0 - decay * decay),
                        stationary_var,
                    },
                })
            }
            CorrelationKernel::MarkovDelta { .. } => Err(Error::UnsupportedKernel(
                "a delta kernel is white noise; trajectories need a coloured kernel".into(),
            )),
            CorrelationKernel::Tabulated { .. } => Self::cholesky(kernel, grid),
        }
    }

    /// Generic backend for any kernel with pointwise values.
    pub fn cholesky(kernel: &EffectiveKernel, grid: &TimeGrid) -> Result<Self> {
        let n = grid.n_points();
        let mut cov = CMat::zeros(n, n);
        for r in 0..n {
            for c in 0..=r {
                let v = kernel.eval(grid.time(r), grid.time(c))?;
                cov[(r, c)] = v;
                cov[(c, r)] = v.conj();
            }
        }
        // nalgebra takes complex square roots of negative pivots, so a
        // valid factor is recognised by its real positive diagonal.
        let factor = |m: CMat| -> Option<CMat> {
            let l = nalgebra::Cholesky::new(m)?.unpack();
            l.diagonal()
                .iter()
                .all(|d| d.re > 0.0 && d.im.abs() <= 1e-12 * d.re)
                .then_some(l)
        };
        let lower = match factor(cov.clone()) {
            Some(l) => l,
            None => {
                // positive semidefinite kernels can be singular on the grid
                let jitter = 1e-12 * cov.diagonal().iter().map(|z| z.re).fold(0.0, f64::max).max(1e-300);
                for k in 0..n {
                    cov[(k, k)] += jitter;
                }
                factor(cov).ok_or_else(|| {
                    Error::Factorization("noise covariance is not positive semidefinite on the grid".into())
                })?
            }
        };
        Ok(NoiseSampler {
            grid: *grid,
            backend: Backend::Cholesky(lower),
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// One path z_t at the grid nodes.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<C64> {
        let n = self.grid.n_points();
        match &self.backend {
            Backend::Zero => vec![ZERO; n],
            Backend::Ou {
                decay,
                innovation_var,
                stationary_var,
            } => {
                let mut z = Vec::with_capacity(n);
                let mut cur = complex_normal(rng, *stationary_var);
                z.push(cur);
                for _ in 1..n {
                    cur = cur * *decay + complex_normal(rng, *innovation_var);
                    z.push(cur);
                }
                z
            }
            Backend::Cholesky(lower) => {
                let xi = CVec::from_fn(n, |_, _| complex_normal(rng, 1.0));
                (lower * xi).iter().copied().collect()
            }
        }
    }
}

/// Noise realization of one trajectory: z_t for the α₁ channel and, at
/// finite temperature, w_t for α₂. Values are stored as z_t; equations use z_t*.
#[derive(Debug, Clone)]
pub struct NoisePath {
    pub grid: TimeGrid,
    pub z: Vec<C64>,
    pub w: Option<Vec<C64>>,
    pub seed: u64,
    pub trajectory: u64,
}

impl NoisePath {
    pub fn z_conj(&self, k: usize) -> C64 {
        self.z[k].conj()
    }

    pub fn w_conj(&self, k: usize) -> C64 {
        self.w.as_ref().map_or(ZERO, |w| w[k].conj())
    }
}

/// Samplers for both noise channels of a bath.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    z: NoiseSampler,
    w: Option<NoiseSampler>,
}

impl NoiseSource {
    pub fn new(bath: &BathSpec, grid: &TimeGrid) -> Result<Self> {
        bath.validate()?;
        Ok(NoiseSource {
            z: NoiseSampler::new(&bath.alpha1(), grid)?,
            w: bath.alpha2().map(|k| NoiseSampler::new(&k, grid)).transpose()?,
        })
    }

    pub fn path(&self, seed: u64, trajectory: u64) -> NoisePath {
        let mut rng = trajectory_rng(seed, trajectory);
        let z = self.z.sample(&mut rng);
        let w = self.w.as_ref().map(|s| s.sample(&mut rng));
        NoisePath {
            grid: self.z.grid,
            z,
            w,
            seed,
            trajectory,
        }
    }
}

/// Single-channel path for `kernel` (trajectory index 0 of `seed`).
pub fn sample_noise(kernel: &EffectiveKernel, grid: &TimeGrid, seed: u64) -> Result<NoisePath> {
    let z = NoiseSampler::new(kernel, grid)?.sample(&mut trajectory_rng(seed, 0));
    Ok(NoisePath {
        grid: *grid,
        z,
        w: None,
        seed,
        trajectory: 0,
    })
}

/// Sampled kets of one trajectory.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub kets: Vec<CVec>,
}

impl Trajectory {
    pub fn norms_sqr(&self) -> Vec<f64> {
        self.kets.iter().map(|k| k.norm_squared()).collect()
    }
}

struct QsdOperators {
    h: SparseOp,
    l: SparseOp,
    l_dag: SparseOp,
    a: Vec<SparseOp>,
    a_dag: Vec<SparseOp>,
}

impl QsdOperators {
    fn new(model: &CavityChainModel, spec: &HilbertSpec) -> Result<Self> {
        if spec.n_cavities() != model.n_cavities() {
            return Err(Error::DimensionMismatch {
                context: "Hilbert space vs model cavities",
                expected: model.n_cavities(),
                found: spec.n_cavities(),
            });
        }
        let l = build_collective_l(model, spec)?;
        let a: Vec<SparseOp> = (0..spec.n_cavities())
            .map(|i| annihilation_op(spec, i))
            .collect::<Result<_>>()?;
        Ok(QsdOperators {
            h: build_hamiltonian(model, spec)?,
            l_dag: l.adjoint(),
            l,
            a_dag: a.iter().map(|x| x.adjoint()).collect(),
            a,
        })
    }
}

/// Maps propagation steps onto coefficient/noise nodes.
fn stage_factor(grid: &TimeGrid, fine: &TimeGrid) -> Result<usize> {
    let ratio = grid.dt() / fine.dt();
    let f = ratio.round() as usize;
    if (ratio - f as f64).abs() > 1e-9 * ratio || f == 0 || !f.is_multiple_of(2) {
        return Err(Error::GridMismatch(format!(
            "coefficient step {} must divide the propagation step {} an even number of times",
            fine.dt(),
            grid.dt()
        )));
    }
    if grid.t_max() > fine.t_max() * (1.0 + 1e-12) + 1e-12 {
        return Err(Error::GridMismatch(format!(
            "propagation to t={} but coefficients end at t={}",
            grid.t_max(),
            fine.t_max()
        )));
    }
    Ok(f)
}

/// RK4 for dψ/dt = D(node)ψ with the drift evaluated at coefficient nodes.
fn integrate(
    psi0: &CVec,
    grid: &TimeGrid,
    factor: usize,
    sample_every: usize,
    trajectory: u64,
    drift: impl Fn(usize, &CVec, &mut CVec),
) -> Result<Trajectory> {
    let n = psi0.len();
    let every = sample_every.max(1);
    let dt = grid.dt();
    let mut psi = psi0.clone();
    let mut stage = CVec::zeros(n);
    let mut k = [CVec::zeros(n), CVec::zeros(n), CVec::zeros(n), CVec::zeros(n)];
    let mut out = Trajectory {
        times: vec![0.0],
        kets: vec![psi.clone()],
    };
    for step in 0..grid.n_steps() {
        let base = step * factor;
        let nodes = [base, base + factor / 2, base + factor / 2, base + factor];
        let fracs = [0.0, 0.5, 0.5, 1.0];
        for s in 0..4 {
            if s == 0 {
                stage.copy_from(&psi);
            } else {
                stage.copy_from(&psi);
                stage.axpy(C64::new(fracs[s] * dt, 0.0), &k[s - 1], ONE);
            }
            drift(nodes[s], &stage, &mut k[s]);
        }
        let w = C64::new(dt / 6.0, 0.0);
        psi.axpy(w, &k[0], ONE);
        psi.axpy(w * TWO, &k[1], ONE);
        psi.axpy(w * TWO, &k[2], ONE);
        psi.axpy(w, &k[3], ONE);
        let norm = psi.norm_squared();
        let t = grid.time(step + 1);
        if !(norm <= NORM_LIMIT) {
            return Err(Error::NormOverflow { trajectory, t, norm });
        }
        if (step + 1) % every == 0 || step + 1 == grid.n_steps() {
            out.times.push(t);
            out.kets.push(psi.clone());
        }
    }
    Ok(out)
}

fn check_ket(spec: &HilbertSpec, psi0: &Ket) -> Result<()> {
    if psi0.spec() != spec {
        return Err(Error::DimensionMismatch {
            context: "initial ket vs trajectory Hilbert space",
            expected: spec.dim(),
            found: psi0.spec().dim(),
        });
    }
    Ok(())
}

fn check_noise_grid(noise: &NoisePath, coeff_grid: &TimeGrid) -> Result<()> {
    if noise.grid != *coeff_grid {
        return Err(Error::GridMismatch("noise path and coefficients must share a grid".into()));
    }
    Ok(())
}

/// Zero-temperature trajectories:
/// dψ/dt = (−iH + L z_t* − L†Ō)ψ with Ō = Σ_i P_i(t) a_i.
pub struct ZeroTQsd<'a> {
    ops: QsdOperators,
    spec: HilbertSpec,
    memory: &'a [CVec],
    coeff_grid: TimeGrid,
}

impl<'a> ZeroTQsd<'a> {
    pub fn new(model: &CavityChainModel, spec: &HilbertSpec, coeffs: &'a ZeroTCoeffs) -> Result<Self> {
        Self::from_nodes(model, spec, coeffs.memory_nodes(), coeffs.grid())
    }

    pub(crate) fn from_nodes(
        model: &CavityChainModel,
        spec: &HilbertSpec,
        memory: &'a [CVec],
        grid: &TimeGrid,
    ) -> Result<Self> {
        if memory.first().map(|p| p.len()) != Some(model.n_cavities()) {
            return Err(Error::DimensionMismatch {
                context: "memory coefficients vs model cavities",
                expected: model.n_cavities(),
                found: memory.first().map_or(0, |p| p.len()),
            });
        }
        Ok(ZeroTQsd {
            ops: QsdOperators::new(model, spec)?,
            spec: spec.clone(),
            memory,
            coeff_grid: *grid,
        })
    }

    pub fn run(&self, noise: &NoisePath, psi0: &Ket, grid: &TimeGrid, sample_every: usize) -> Result<Trajectory> {
        check_ket(&self.spec, psi0)?;
        check_noise_grid(noise, &self.coeff_grid)?;
        let factor = stage_factor(grid, &self.coeff_grid)?;
        let ops = &self.ops;
        let mut scratch = CVec::zeros(self.spec.dim());
        let scratch = std::cell::RefCell::new(&mut scratch);
        integrate(psi0.amplitudes(), grid, factor, sample_every, noise.trajectory, |node, psi, out| {
            let mut o = scratch.borrow_mut();
            out.fill(ZERO);
            ops.h.mul_vec_acc(-I, psi.as_slice(), out.as_mut_slice());
            ops.l.mul_vec_acc(noise.z_conj(node), psi.as_slice(), out.as_mut_slice());
            o.fill(ZERO);
            for (a, p) in ops.a.iter().zip(self.memory[node].iter()) {
                a.mul_vec_acc(*p, psi.as_slice(), o.as_mut_slice());
            }
            ops.l_dag.mul_vec_acc(-ONE, o.as_slice(), out.as_mut_slice());
        })
    }
}

/// Finite-temperature trajectories:
/// dψ/dt = (−iH + L z_t* + L† w_t* − L†Ō₁ − LŌ₂)ψ with
/// Ō₁ = Σ_i P_i a_i + ∫₀^t Q(t,s') w*_{s'} ds' and
/// Ō₂ = Σ_i X_i a_i† + ∫₀^t Y(t,s') z*_{s'} ds'.
/// The noise integrals are scalars, so they shift the effective noises:
/// z̃* = z* − ∫Y z* and w̃* = w* − ∫Q w*.
pub struct FiniteTQsd<'a> {
    ops: QsdOperators,
    spec: HilbertSpec,
    coeffs: &'a FiniteTCoeffs,
}

impl<'a> FiniteTQsd<'a> {
    pub fn new(model: &CavityChainModel, spec: &HilbertSpec, coeffs: &'a FiniteTCoeffs) -> Result<Self> {
        if coeffs.n_cavities() != model.n_cavities() {
            return Err(Error::DimensionMismatch {
                context: "finite-T coefficients vs model cavities",
                expected: model.n_cavities(),
                found: coeffs.n_cavities(),
            });
        }
        Ok(FiniteTQsd {
            ops: QsdOperators::new(model, spec)?,
            spec: spec.clone(),
            coeffs,
        })
    }

    /// ∫₀^{t_k} row(s') v*_{s'} ds' for every node up to `last`.
    fn noise_integrals(&self, row: impl Fn(usize) -> &'a [C64], noise: impl Fn(usize) -> C64, last: usize) -> Vec<C64> {
        let h = self.coeffs.grid().dt();
        (0..=last)
            .map(|k| {
                let w = quad_weights(k);
                row(k)
                    .iter()
                    .zip(&w)
                    .enumerate()
                    .map(|(m, (r, wm))| r * noise(m) * (wm * h))
                    .sum()
            })
            .collect()
    }

    pub fn run(&self, noise: &NoisePath, psi0: &Ket, grid: &TimeGrid, sample_every: usize) -> Result<Trajectory> {
        check_ket(&self.spec, psi0)?;
        let cgrid = *self.coeffs.grid();
        check_noise_grid(noise, &cgrid)?;
        let factor = stage_factor(grid, &cgrid)?;
        let last = grid.n_steps() * factor;
        let coeffs = self.coeffs;
        let shift_z = self.noise_integrals(|k| coeffs.y_row(k), |m| noise.z_conj(m), last);
        let shift_w = self.noise_integrals(|k| coeffs.q_row(k), |m| noise.w_conj(m), last);
        let ops = &self.ops;
        let mut scratch = CVec::zeros(self.spec.dim());
        let scratch = std::cell::RefCell::new(&mut scratch);
        integrate(psi0.amplitudes(), grid, factor, sample_every, noise.trajectory, |node, psi, out| {
            let mut o = scratch.borrow_mut();
            let v = psi.as_slice();
            out.fill(ZERO);
            ops.h.mul_vec_acc(-I, v, out.as_mut_slice());
            ops.l.mul_vec_acc(noise.z_conj(node) - shift_z[node], v, out.as_mut_slice());
            ops.l_dag.mul_vec_acc(noise.w_conj(node) - shift_w[node], v, out.as_mut_slice());
            o.fill(ZERO);
            for (a, p) in ops.a.iter().zip(coeffs.p_node(node).iter()) {
                a.mul_vec_acc(*p, v, o.as_mut_slice());
            }
            ops.l_dag.mul_vec_acc(-ONE, o.as_slice(), out.as_mut_slice());
            o.fill(ZERO);
            for (ad, x) in ops.a_dag.iter().zip(coeffs.x_node(node).iter()) {
                ad.mul_vec_acc(*x, v, o.as_mut_slice());
            }
            ops.l.mul_vec_acc(-ONE, o.as_slice(), out.as_mut_slice());
        })
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleOptions {
    pub n_traj: usize,
    pub seed: u64,
    /// Trajectories run concurrently per batch; results are folded in index
    /// order, so the mean does not depend on the batch size or thread count.
    pub batch_size: usize,
    /// Also keep the mean over the first n trajectories for each n listed.
    pub checkpoints: Vec<usize>,
    /// Keep every `sample_every`-th propagation step.
    pub sample_every: usize,
    /// Keep per-trajectory ‖ψ‖² series.
    pub keep_norms: bool,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        EnsembleOptions {
            n_traj: 1000,
            seed: 0,
            batch_size: 64,
            checkpoints: Vec::new(),
            sample_every: 1,
            keep_norms: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub spec: HilbertSpec,
    pub times: Vec<f64>,
    pub n_traj: usize,
    /// (1/n) Σ |ψ⟩⟨ψ| per sampled time.
    pub mean: Vec<CMat>,
    /// (1/n) Σ ‖ψ‖² per sampled time.
    pub mean_norm_sqr: Vec<f64>,
    /// (n, prefix mean) for each requested checkpoint.
    pub checkpoints: Vec<(usize, Vec<CMat>)>,
    pub norms: Option<Vec<Vec<f64>>>,
}

impl EnsembleResult {
    /// True when the mean squared norm left [`MEAN_NORM_RANGE`].
    pub fn norm_drift_flagged(&self) -> bool {
        self.mean_norm_sqr
            .iter()
            .any(|&n| n < MEAN_NORM_RANGE.0 || n > MEAN_NORM_RANGE.1)
    }

    pub fn write_csv<W: Write>(&self, out: W, select: Option<&[f64]>) -> std::io::Result<()> {
        write_rho_csv(out, &self.spec, self.times.iter().copied().zip(self.mean.iter()), select)
    }

    pub fn save_csv(&self, path: &Path, select: Option<&[f64]>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?, select)?;
        Ok(())
    }

    /// t, mean ‖ψ‖², then one column per kept trajectory.
    pub fn write_norms_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = std::io::BufWriter::new(out);
        write!(w, "t,mean_norm_sqr")?;
        let norms = self.norms.as_deref().unwrap_or(&[]);
        for k in 0..norms.len() {
            write!(w, ",traj_{k}")?;
        }
        writeln!(w)?;
        for (i, t) in self.times.iter().enumerate() {
            write!(w, "{t},{}", self.mean_norm_sqr[i])?;
            for n in norms {
                write!(w, ",{}", n[i])?;
            }
            writeln!(w)?;
        }
        w.flush()
    }
}

struct Accumulator {
    times: Vec<f64>,
    sum: Vec<CMat>,
    norm_sum: Vec<f64>,
    count: usize,
    norms: Option<Vec<Vec<f64>>>,
}

impl Accumulator {
    fn new(keep_norms: bool) -> Self {
        Accumulator {
            times: Vec::new(),
            sum: Vec::new(),
            norm_sum: Vec::new(),
            count: 0,
            norms: keep_norms.then(Vec::new),
        }
    }

    fn add(&mut self, traj: &Trajectory) -> Result<()> {
        if self.count == 0 {
            let dim = traj.kets[0].len();
            self.times = traj.times.clone();
            self.sum = vec![CMat::zeros(dim, dim); traj.times.len()];
            self.norm_sum = vec![0.0; traj.times.len()];
        } else if traj.times.len() != self.times.len() {
            return Err(Error::GridMismatch("trajectories sampled on different time bases".into()));
        }
        for ((acc, ket), ns) in self.sum.iter_mut().zip(&traj.kets).zip(self.norm_sum.iter_mut()) {
            acc.gerc(ONE, ket, ket, ONE);
            *ns += ket.norm_squared();
        }
        if let Some(n) = self.norms.as_mut() {
            n.push(traj.norms_sqr());
        }
        self.count += 1;
        Ok(())
    }

    fn mean(&self) -> Vec<CMat> {
        let inv = C64::new(1.0 / self.count as f64, 0.0);
        self.sum.iter().map(|m| m * inv).collect()
    }
}

/// M[|ψ⟩⟨ψ|] over the given trajectories, which must share a time base.
pub fn ensemble_average(spec: &HilbertSpec, trajectories: &[Trajectory]) -> Result<EnsembleResult> {
    if trajectories.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let mut acc = Accumulator::new(false);
    for t in trajectories {
        acc.add(t)?;
    }
    Ok(finish(spec, acc, Vec::new()))
}

fn finish(spec: &HilbertSpec, acc: Accumulator, checkpoints: Vec<(usize, Vec<CMat>)>) -> EnsembleResult {
    let n = acc.count as f64;
    EnsembleResult {
        spec: spec.clone(),
        mean: acc.mean(),
        mean_norm_sqr: acc.norm_sum.iter().map(|s| s / n).collect(),
        times: acc.times,
        n_traj: acc.count,
        checkpoints,
        norms: acc.norms,
    }
}

/// Runs `run(i)` for i = 0..n_traj and averages the projectors.
pub fn run_ensemble(
    spec: &HilbertSpec,
    opts: &EnsembleOptions,
    run: impl Fn(u64) -> Result<Trajectory> + Sync + Send,
) -> Result<EnsembleResult> {
    if opts.n_traj == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let batch = opts.batch_size.max(1);
    let mut acc = Accumulator::new(opts.keep_norms);
    let mut checkpoints = Vec::new();
    let mut start = 0;
    while start < opts.n_traj {
        let len = batch.min(opts.n_traj - start);
        let trajs = map_indexed(len, |i| run((start + i) as u64));
        for t in trajs {
            acc.add(&t?)?;
            if opts.checkpoints.contains(&acc.count) {
                checkpoints.push((acc.count, acc.mean()));
            }
        }
        start += len;
    }
    let result = finish(spec, acc, checkpoints);
    if result.norm_drift_flagged() {
        log::warn!(
            "mean squared trajectory norm left [{}, {}]; consider a smaller step",
            MEAN_NORM_RANGE.0,
            MEAN_NORM_RANGE.1
        );
    }
    Ok(result)
}

pub fn qsd_ensemble_zero_t(
    model: &CavityChainModel,
    bath: &BathSpec,
    coeffs: &ZeroTCoeffs,
    psi0: &Ket,
    grid: &TimeGrid,
    opts: &EnsembleOptions,
) -> Result<EnsembleResult> {
    let engine = ZeroTQsd::new(model, psi0.spec(), coeffs)?;
    let noise = NoiseSource::new(bath, coeffs.grid())?;
    run_ensemble(psi0.spec(), opts, |i| {
        engine.run(&noise.path(opts.seed, i), psi0, grid, opts.sample_every)
    })
}

pub fn qsd_ensemble_finite_t(
    model: &CavityChainModel,
    bath: &BathSpec,
    coeffs: &FiniteTCoeffs,
    psi0: &Ket,
    grid: &TimeGrid,
    opts: &EnsembleOptions,
) -> Result<EnsembleResult> {
    let engine = FiniteTQsd::new(model, psi0.spec(), coeffs)?;
    let noise = NoiseSource::new(bath, coeffs.grid())?;
    run_ensemble(psi0.spec(), opts, |i| {
        engine.run(&noise.path(opts.seed, i), psi0, grid, opts.sample_every)
    })
}
