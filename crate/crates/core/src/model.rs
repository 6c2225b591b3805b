//! Cavity chain Hamiltonian, collective bath coupling and bath correlation
//! kernels. Units: ħ = 1, frequencies in units of the reference ω = 1.

use crate::error::{Error, Result};
use crate::hilbert::{annihilation_op, number_op, HilbertSpec};
use crate::linalg::{CMat, SparseOp, C64, ONE, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Open chain: the last hopping entry is ignored.
    Open,
    /// Ring: the last hopping entry couples cavity N back to cavity 1.
    Periodic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CavityChainModel {
    omegas: Vec<f64>,
    lambdas: Vec<f64>,
    boundary: Boundary,
    couplings: Vec<C64>,
}

impl CavityChainModel {
    /// `lambdas[i]` couples cavity `i` to cavity `i+1` (cavity 0 for the
    /// last entry under periodic boundaries).
    pub fn new(omegas: Vec<f64>, lambdas: Vec<f64>, boundary: Boundary, couplings: Vec<C64>) -> Result<Self> {
        let n = omegas.len();
        if n == 0 {
            return Err(Error::invalid("model needs at least one cavity"));
        }
        for (name, len) in [("lambdas", lambdas.len()), ("couplings", couplings.len())] {
            if len != n {
                return Err(Error::invalid(format!("{name} has length {len}, expected N={n}")));
            }
        }
        let finite = omegas.iter().chain(&lambdas).all(|x| x.is_finite())
            && couplings.iter().all(|z| z.is_finite());
        if !finite {
            return Err(Error::invalid("model parameters must be finite"));
        }
        Ok(CavityChainModel {
            omegas,
            lambdas,
            boundary,
            couplings,
        })
    }

    pub fn n_cavities(&self) -> usize {
        self.omegas.len()
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn couplings(&self) -> &[C64] {
        &self.couplings
    }

    /// Nearest-neighbour bonds `(i, j, λ)` that actually enter H.
    pub fn bonds(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n_cavities();
        (0..n)
            .filter_map(|i| {
                let j = i + 1;
                if j < n {
                    Some((i, j, self.lambdas[i]))
                } else if self.boundary == Boundary::Periodic && n > 1 {
                    Some((i, 0, self.lambdas[i]))
                } else {
                    None
                }
            })
            .filter(|&(_, _, lam)| lam != 0.0)
            .collect()
    }

    /// N×N one-excitation matrix: H = Σ_{ij} M_ij a_i† a_j.
    pub fn single_particle_matrix(&self) -> CMat {
        let n = self.n_cavities();
        let mut m = CMat::zeros(n, n);
        for (i, &w) in self.omegas.iter().enumerate() {
            m[(i, i)] += C64::new(w, 0.0);
        }
        for (i, j, lam) in self.bonds() {
            m[(i, j)] += C64::new(lam, 0.0);
            m[(j, i)] += C64::new(lam, 0.0);
        }
        m
    }

    /// Same model with every bath coupling set to zero.
    pub fn decoupled(&self) -> Self {
        CavityChainModel {
            couplings: vec![ZERO; self.n_cavities()],
            ..self.clone()
        }
    }

    fn check_spec(&self, spec: &HilbertSpec) -> Result<()> {
        if spec.n_cavities() != self.n_cavities() {
            return Err(Error::DimensionMismatch {
                context: "model vs Hilbert space cavity count",
                expected: self.n_cavities(),
                found: spec.n_cavities(),
            });
        }
        Ok(())
    }
}

/// H_s = Σ ω_i a_i†a_i + Σ λ_i (a_i†a_{i+1} + a_i a_{i+1}†).
pub fn build_hamiltonian(model: &CavityChainModel, spec: &HilbertSpec) -> Result<SparseOp> {
    model.check_spec(spec)?;
    let dim = spec.dim();
    let mut h = SparseOp::zeros(dim);
    for (i, &w) in model.omegas().iter().enumerate() {
        if w != 0.0 {
            h = SparseOp::lincomb(dim, [(ONE, &h), (C64::new(w, 0.0), &number_op(spec, i)?)]);
        }
    }
    for (i, j, lam) in model.bonds() {
        let ai = annihilation_op(spec, i)?;
        let aj = annihilation_op(spec, j)?;
        let hop = ai.adjoint().matmul(&aj);
        let hop_back = hop.adjoint();
        let lam = C64::new(lam, 0.0);
        h = SparseOp::lincomb(dim, [(ONE, &h), (lam, &hop), (lam, &hop_back)]);
    }
    Ok(h)
}

/// L = Σ l_i a_i.
pub fn build_collective_l(model: &CavityChainModel, spec: &HilbertSpec) -> Result<SparseOp> {
    model.check_spec(spec)?;
    let ops = (0..model.n_cavities())
        .map(|i| annihilation_op(spec, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(SparseOp::lincomb(
        spec.dim(),
        model.couplings().iter().copied().zip(ops.iter()),
    ))
}

/// Bath correlation function α(t,s), stationary in t − s.
#[derive(Debug, Clone, PartialEq)]
pub enum CorrelationKernel {
    /// (γ/2) e^{−γ|t−s|}
    OrnsteinUhlenbeck { gamma: f64 },
    /// Γ δ(t−s); its area ∫₀^∞ is Γ/2 (half the delta).
    MarkovDelta { rate: f64 },
    /// α(τ) at τ = k·dt for τ ≥ 0, linearly interpolated; α(−τ) = α(τ)*.
    /// Zero beyond the last entry.
    Tabulated { dt: f64, values: Vec<C64> },
}

/// One exponential term c·e^{−κτ} of a kernel for τ = t − s ≥ 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpTerm {
    pub amplitude: C64,
    pub rate: C64,
}

impl CorrelationKernel {
    pub fn validate(&self) -> Result<()> {
        match self {
            CorrelationKernel::OrnsteinUhlenbeck { gamma } if !(*gamma > 0.0 && gamma.is_finite()) => {
                Err(Error::invalid(format!("OU gamma must be positive, got {gamma}")))
            }
            CorrelationKernel::MarkovDelta { rate } if !(*rate >= 0.0 && rate.is_finite()) => {
                Err(Error::invalid(format!("Markov rate must be non-negative, got {rate}")))
            }
            CorrelationKernel::Tabulated { dt, values } => {
                if !(*dt > 0.0) || values.is_empty() {
                    return Err(Error::invalid("tabulated kernel needs dt > 0 and at least one value"));
                }
                if values[0].im.abs() > 1e-12 * values[0].norm().max(1.0) {
                    return Err(Error::invalid(
                        "tabulated kernel value at zero lag must be real (Hermitian symmetry)",
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// α(τ) for τ ≥ 0.
    fn lag(&self, tau: f64) -> Result<C64> {
        match self {
            CorrelationKernel::OrnsteinUhlenbeck { gamma } => {
                Ok(C64::new(0.5 * gamma * (-gamma * tau).exp(), 0.0))
            }
            CorrelationKernel::MarkovDelta { .. } => Err(Error::PointwiseDelta),
            CorrelationKernel::Tabulated { dt, values } => {
                let last = (values.len() - 1) as f64;
                let x = tau / dt;
                // lags that overshoot the last entry by rounding still hit it
                if x > last + 1e-9 {
                    return Ok(ZERO);
                }
                let x = x.min(last);
                let k = (x.floor() as usize).min(values.len().saturating_sub(2));
                if values.len() == 1 {
                    return Ok(values[0]);
                }
                let f = x - k as f64;
                Ok(values[k] * (1.0 - f) + values[k + 1] * f)
            }
        }
    }

    pub fn exp_terms(&self) -> Option<Vec<ExpTerm>> {
        match self {
            CorrelationKernel::OrnsteinUhlenbeck { gamma } => Some(vec![ExpTerm {
                amplitude: C64::new(0.5 * gamma, 0.0),
                rate: C64::new(*gamma, 0.0),
            }]),
            _ => None,
        }
    }

    /// ∫₀^∞ α(τ) dτ.
    pub fn area(&self) -> C64 {
        match self {
            CorrelationKernel::OrnsteinUhlenbeck { .. } => C64::new(0.5, 0.0),
            CorrelationKernel::MarkovDelta { rate } => C64::new(0.5 * rate, 0.0),
            CorrelationKernel::Tabulated { dt, values } => {
                let n = values.len();
                if n < 2 {
                    return ZERO;
                }
                let inner: C64 = values[1..n - 1].iter().sum();
                (inner + (values[0] + values[n - 1]) * 0.5) * *dt
            }
        }
    }
}

/// A kernel scaled by a real factor and optionally complex-conjugated:
/// `scale · α(t,s)` or `scale · α(t,s)*`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveKernel {
    pub base: CorrelationKernel,
    pub scale: f64,
    pub conjugate: bool,
}

impl EffectiveKernel {
    pub fn plain(base: CorrelationKernel) -> Self {
        EffectiveKernel {
            base,
            scale: 1.0,
            conjugate: false,
        }
    }

    pub fn eval(&self, t: f64, s: f64) -> Result<C64> {
        kernel_eval(&self.base, t, s).map(|v| {
            let v = if self.conjugate { v.conj() } else { v };
            v * self.scale
        })
    }

    /// Exponential decomposition valid for t ≥ s.
    pub fn exp_terms(&self) -> Option<Vec<ExpTerm>> {
        self.base.exp_terms().map(|terms| {
            terms
                .into_iter()
                .map(|e| {
                    let (a, r) = if self.conjugate {
                        (e.amplitude.conj(), e.rate.conj())
                    } else {
                        (e.amplitude, e.rate)
                    };
                    ExpTerm {
                        amplitude: a * self.scale,
                        rate: r,
                    }
                })
                .collect()
        })
    }

    pub fn area(&self) -> C64 {
        let a = self.base.area();
        (if self.conjugate { a.conj() } else { a }) * self.scale
    }

    pub fn is_markov(&self) -> bool {
        matches!(self.base, CorrelationKernel::MarkovDelta { .. })
    }

    pub fn is_zero(&self) -> bool {
        self.scale == 0.0
    }
}

/// α(t,s) for t, s ≥ 0 with α(t,s) = α(s,t)*.
pub fn kernel_eval(kernel: &CorrelationKernel, t: f64, s: f64) -> Result<C64> {
    if t < 0.0 || s < 0.0 {
        return Err(Error::invalid(format!("kernel times must be non-negative, got ({t}, {s})")));
    }
    if t >= s {
        kernel.lag(t - s)
    } else {
        kernel.lag(s - t).map(|v| v.conj())
    }
}

/// Markov-limit rate matched to a kernel: Γ = 2 Re ∫₀^∞ α(τ) dτ. For OU
/// this is 1 independent of γ.
pub fn matched_markov_rate(kernel: &CorrelationKernel) -> f64 {
    2.0 * kernel.area().re
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TemperatureMode {
    Zero,
    /// Flat mean thermal occupation n̄ of the bath modes.
    Finite { nbar: f64 },
}

/// Bath description. `kernel1` is the zero-temperature correlation function;
/// at finite temperature the noise kernels are α₁ = (n̄+1)·kernel1 and
/// α₂ = `kernel2` if given, else n̄·kernel1*.
#[derive(Debug, Clone, PartialEq)]
pub struct BathSpec {
    pub kernel1: CorrelationKernel,
    pub kernel2: Option<CorrelationKernel>,
    pub temperature: TemperatureMode,
}

impl BathSpec {
    pub fn zero_t(kernel: CorrelationKernel) -> Self {
        BathSpec {
            kernel1: kernel,
            kernel2: None,
            temperature: TemperatureMode::Zero,
        }
    }

    pub fn finite_t(kernel: CorrelationKernel, nbar: f64) -> Self {
        BathSpec {
            kernel1: kernel,
            kernel2: None,
            temperature: TemperatureMode::Finite { nbar },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel1.validate()?;
        match (&self.temperature, &self.kernel2) {
            (TemperatureMode::Zero, Some(_)) => {
                Err(Error::invalid("a zero-temperature bath must not carry a second kernel"))
            }
            (TemperatureMode::Finite { nbar }, k2) => {
                if !(*nbar >= 0.0 && nbar.is_finite()) {
                    return Err(Error::invalid(format!("nbar must be non-negative, got {nbar}")));
                }
                if let Some(k) = k2 {
                    k.validate()?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn nbar(&self) -> f64 {
        match self.temperature {
            TemperatureMode::Zero => 0.0,
            TemperatureMode::Finite { nbar } => nbar,
        }
    }

    pub fn alpha1(&self) -> EffectiveKernel {
        EffectiveKernel {
            base: self.kernel1.clone(),
            scale: self.nbar() + 1.0,
            conjugate: false,
        }
    }

    /// `None` at zero temperature.
    pub fn alpha2(&self) -> Option<EffectiveKernel> {
        match (&self.temperature, &self.kernel2) {
            (TemperatureMode::Zero, _) => None,
            (TemperatureMode::Finite { .. }, Some(k)) => Some(EffectiveKernel::plain(k.clone())),
            (TemperatureMode::Finite { nbar }, None) => Some(EffectiveKernel {
                base: self.kernel1.clone(),
                scale: *nbar,
                conjugate: true,
            }),
        }
    }
}
