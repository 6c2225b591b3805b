//! Truncated multi-mode Fock space.
//!
//! Cavities are indexed from 0 in the library API. In a product basis state
//! the first cavity is the slowest-varying digit, so the flat index of
//! `|n_0 n_1 … n_{N-1}⟩` is `Σ n_i · stride_i` with `stride_{N-1} = 1`.

use crate::error::{Error, Result};
use crate::linalg::{trace, CMat, CVec, SparseOp, C64, ONE, ZERO};

/// Default ceiling on the total dimension D = Π d_i.
pub const DEFAULT_SIZE_BUDGET: usize = 4096;

const TAIL_WARN: f64 = 1e-6;
const TAIL_ERROR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HilbertSpec {
    dims: Vec<usize>,
    strides: Vec<usize>,
    total: usize,
}

impl HilbertSpec {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        Self::with_budget(dims, DEFAULT_SIZE_BUDGET)
    }

    pub fn with_budget(dims: Vec<usize>, budget: usize) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::invalid("a Hilbert space needs at least one cavity"));
        }
        if let Some(&d) = dims.iter().find(|&&d| d < 2) {
            return Err(Error::invalid(format!("truncation dimension {d} < 2")));
        }
        let total = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|&t| t <= budget)
            .ok_or_else(|| {
                Error::invalid(format!("total dimension of {dims:?} exceeds the size budget {budget}"))
            })?;
        let mut strides = vec![1usize; dims.len()];
        for i in (0..dims.len() - 1).rev() {
            strides[i] = strides[i + 1] * dims[i + 1];
        }
        Ok(HilbertSpec {
            dims,
            strides,
            total,
        })
    }

    pub fn uniform(n_cavities: usize, d: usize) -> Result<Self> {
        Self::new(vec![d; n_cavities])
    }

    pub fn n_cavities(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.total
    }

    pub fn stride(&self, i: usize) -> usize {
        self.strides[i]
    }

    pub fn check_cavity(&self, i: usize) -> Result<()> {
        if i >= self.dims.len() {
            return Err(Error::IndexOutOfRange {
                what: "cavity",
                index: i,
                len: self.dims.len(),
            });
        }
        Ok(())
    }

    /// Occupation of cavity `i` in flat basis index `idx`.
    pub fn occupation(&self, idx: usize, i: usize) -> usize {
        (idx / self.strides[i]) % self.dims[i]
    }

    pub fn index_of(&self, occupations: &[usize]) -> Result<usize> {
        if occupations.len() != self.dims.len() {
            return Err(Error::DimensionMismatch {
                context: "Fock occupations",
                expected: self.dims.len(),
                found: occupations.len(),
            });
        }
        let mut idx = 0;
        for (i, (&n, &d)) in occupations.iter().zip(&self.dims).enumerate() {
            if n >= d {
                return Err(Error::invalid(format!(
                    "occupation {n} of cavity {i} exceeds truncation d={d}"
                )));
            }
            idx += n * self.strides[i];
        }
        Ok(idx)
    }

    /// Spec of the sub-system formed by `keep` (sorted, deduplicated).
    pub fn subsystem(&self, keep: &[usize]) -> Result<HilbertSpec> {
        let keep = self.normalize_subset(keep)?;
        HilbertSpec::with_budget(keep.iter().map(|&i| self.dims[i]).collect(), usize::MAX)
    }

    fn normalize_subset(&self, set: &[usize]) -> Result<Vec<usize>> {
        if set.is_empty() {
            return Err(Error::invalid("empty cavity subset"));
        }
        let mut v = set.to_vec();
        v.sort_unstable();
        v.dedup();
        for &i in &v {
            self.check_cavity(i)?;
        }
        Ok(v)
    }
}

/// Single-mode lowering matrix of size `d`.
pub fn lowering_matrix(d: usize) -> CMat {
    let mut a = CMat::zeros(d, d);
    for m in 1..d {
        a[(m - 1, m)] = C64::new((m as f64).sqrt(), 0.0);
    }
    a
}

/// `I ⊗ … ⊗ a ⊗ … ⊗ I` with `a` in slot `i`.
pub fn annihilation_op(spec: &HilbertSpec, i: usize) -> Result<SparseOp> {
    spec.check_cavity(i)?;
    let stride = spec.stride(i);
    let trip = (0..spec.dim())
        .filter_map(|idx| {
            let n = spec.occupation(idx, i);
            (n > 0).then(|| (idx - stride, idx, C64::new((n as f64).sqrt(), 0.0)))
        })
        .collect();
    Ok(SparseOp::from_triplets(spec.dim(), trip))
}

/// `a_i† a_i` as a diagonal operator.
pub fn number_op(spec: &HilbertSpec, i: usize) -> Result<SparseOp> {
    spec.check_cavity(i)?;
    let trip = (0..spec.dim())
        .map(|idx| (idx, idx, C64::new(spec.occupation(idx, i) as f64, 0.0)))
        .collect();
    Ok(SparseOp::from_triplets(spec.dim(), trip))
}

/// Unnormalized truncated coherent amplitudes e^{−|α|²/2} αⁿ/√n!, n < d,
/// together with the population left outside the truncation.
pub fn coherent_amplitudes(d: usize, alpha: C64) -> (Vec<C64>, f64) {
    let prefactor = (-0.5 * alpha.norm_sqr()).exp();
    let mut amps = Vec::with_capacity(d);
    let mut term = C64::new(prefactor, 0.0);
    for n in 0..d {
        if n > 0 {
            term = term * alpha / (n as f64).sqrt();
        }
        amps.push(term);
    }
    // Poisson tail Σ_{n≥d} e^{−|α|²}|α|^{2n}/n!, summed directly so tiny
    // tails are not lost to cancellation against 1.
    let x = alpha.norm_sqr();
    let mut p = amps[d - 1].norm_sqr();
    let mut tail = 0.0;
    for n in d..d + 400 {
        p *= x / n as f64;
        tail += p;
        if p < 1e-300 || p < tail * 1e-17 {
            break;
        }
    }
    (amps, tail)
}

fn check_tail(d: usize, tail: f64) -> Result<()> {
    if tail > TAIL_ERROR {
        return Err(Error::TruncationTail {
            dim: d,
            population: tail,
        });
    }
    if tail > TAIL_WARN {
        log::warn!("Fock truncation d={d} leaves tail population {tail:.2e}");
    }
    Ok(())
}

/// Normalized single-mode coherent state vector.
pub fn coherent_vector(d: usize, alpha: C64) -> Result<CVec> {
    let (amps, tail) = coherent_amplitudes(d, alpha);
    check_tail(d, tail)?;
    Ok(CVec::from_vec(amps).normalize())
}

/// Single-mode cat vector (|α⟩+|−α⟩)/√Z and Z = ‖|α⟩+|−α⟩‖² computed from
/// the truncated, un-renormalized coherent amplitudes.
pub fn cat_vector(d: usize, alpha: C64) -> Result<(CVec, f64)> {
    if alpha == ZERO {
        return Err(Error::invalid("cat amplitude must be nonzero"));
    }
    let (plus, tail) = coherent_amplitudes(d, alpha);
    check_tail(d, tail)?;
    let (minus, _) = coherent_amplitudes(d, -alpha);
    let v = CVec::from_iterator(d, plus.iter().zip(&minus).map(|(a, b)| a + b));
    let z = v.norm_squared();
    Ok((v.unscale(z.sqrt()), z))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ket {
    spec: HilbertSpec,
    amps: CVec,
}

impl Ket {
    pub fn new(spec: HilbertSpec, amps: CVec) -> Result<Self> {
        if amps.len() != spec.dim() {
            return Err(Error::DimensionMismatch {
                context: "ket amplitudes",
                expected: spec.dim(),
                found: amps.len(),
            });
        }
        Ok(Ket { spec, amps })
    }

    /// Product state from one vector per cavity.
    pub fn product(spec: &HilbertSpec, factors: &[CVec]) -> Result<Self> {
        if factors.len() != spec.n_cavities() {
            return Err(Error::DimensionMismatch {
                context: "product-state factors",
                expected: spec.n_cavities(),
                found: factors.len(),
            });
        }
        for (f, &d) in factors.iter().zip(spec.dims()) {
            if f.len() != d {
                return Err(Error::DimensionMismatch {
                    context: "product-state factor",
                    expected: d,
                    found: f.len(),
                });
            }
        }
        let amps = CVec::from_fn(spec.dim(), |idx, _| {
            factors
                .iter()
                .enumerate()
                .map(|(i, f)| f[spec.occupation(idx, i)])
                .product()
        });
        Ket::new(spec.clone(), amps)
    }

    pub fn vacuum(spec: &HilbertSpec) -> Self {
        let mut amps = CVec::zeros(spec.dim());
        amps[0] = ONE;
        Ket {
            spec: spec.clone(),
            amps,
        }
    }

    pub fn fock(spec: &HilbertSpec, occupations: &[usize]) -> Result<Self> {
        let mut amps = CVec::zeros(spec.dim());
        amps[spec.index_of(occupations)?] = ONE;
        Ket::new(spec.clone(), amps)
    }

    /// Normalized Σ c_k |n_k⟩ over Fock basis states.
    pub fn fock_superposition(spec: &HilbertSpec, terms: &[(Vec<usize>, C64)]) -> Result<Self> {
        let mut amps = CVec::zeros(spec.dim());
        for (occ, c) in terms {
            amps[spec.index_of(occ)?] += *c;
        }
        let norm = amps.norm();
        if norm == 0.0 {
            return Err(Error::invalid("Fock superposition has zero norm"));
        }
        Ket::new(spec.clone(), amps.unscale(norm))
    }

    pub fn spec(&self) -> &HilbertSpec {
        &self.spec
    }

    pub fn amplitudes(&self) -> &CVec {
        &self.amps
    }

    pub fn into_amplitudes(self) -> CVec {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.norm_squared()
    }

    pub fn projector(&self) -> Rho {
        Rho {
            spec: self.spec.clone(),
            matrix: &self.amps * self.amps.adjoint(),
        }
    }
}

fn single_mode_ket(spec: &HilbertSpec, i: usize, v: CVec) -> Result<Ket> {
    spec.check_cavity(i)?;
    let factors: Vec<CVec> = spec
        .dims()
        .iter()
        .enumerate()
        .map(|(k, &d)| {
            if k == i {
                v.clone()
            } else {
                let mut e = CVec::zeros(d);
                e[0] = ONE;
                e
            }
        })
        .collect();
    Ket::product(spec, &factors)
}

/// Coherent state |α⟩ in cavity `i`, vacuum elsewhere.
pub fn coherent_ket(spec: &HilbertSpec, i: usize, alpha: C64) -> Result<Ket> {
    spec.check_cavity(i)?;
    single_mode_ket(spec, i, coherent_vector(spec.dims()[i], alpha)?)
}

/// Cat state (|α⟩+|−α⟩)/√Z in cavity `i`, vacuum elsewhere. Returns Z too.
pub fn cat_ket_with_norm(spec: &HilbertSpec, i: usize, alpha: C64) -> Result<(Ket, f64)> {
    spec.check_cavity(i)?;
    let (v, z) = cat_vector(spec.dims()[i], alpha)?;
    Ok((single_mode_ket(spec, i, v)?, z))
}

pub fn cat_ket(spec: &HilbertSpec, i: usize, alpha: C64) -> Result<Ket> {
    cat_ket_with_norm(spec, i, alpha).map(|(k, _)| k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rho {
    spec: HilbertSpec,
    matrix: CMat,
}

impl Rho {
    pub fn new(spec: HilbertSpec, matrix: CMat) -> Result<Self> {
        if matrix.nrows() != spec.dim() || matrix.ncols() != spec.dim() {
            return Err(Error::DimensionMismatch {
                context: "density matrix",
                expected: spec.dim(),
                found: matrix.nrows(),
            });
        }
        Ok(Rho { spec, matrix })
    }

    pub fn spec(&self) -> &HilbertSpec {
        &self.spec
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    pub fn trace(&self) -> C64 {
        trace(&self.matrix)
    }

    pub fn purity(&self) -> f64 {
        // Tr ρ² = Σ_{rc} ρ_rc ρ_cr = Σ |ρ_rc|² for Hermitian ρ
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn expectation(&self, op: &SparseOp) -> C64 {
        op.triplets().map(|(r, c, v)| v * self.matrix[(c, r)]).sum()
    }
}

/// Partial trace onto the cavities in `keep` (order of the result follows
/// the original cavity order).
pub fn partial_trace(rho: &Rho, keep: &[usize]) -> Result<Rho> {
    let spec = rho.spec();
    let keep = spec.normalize_subset(keep)?;
    let traced: Vec<usize> = (0..spec.n_cavities()).filter(|i| !keep.contains(i)).collect();
    let sub = spec.subsystem(&keep)?;

    let offsets = |modes: &[usize]| -> Vec<usize> {
        let size: usize = modes.iter().map(|&i| spec.dims()[i]).product();
        (0..size)
            .map(|flat| {
                let mut rem = flat;
                let mut off = 0;
                for &i in modes.iter().rev() {
                    let d = spec.dims()[i];
                    off += (rem % d) * spec.stride(i);
                    rem /= d;
                }
                off
            })
            .collect()
    };
    let kept_off = offsets(&keep);
    let traced_off = if traced.is_empty() { vec![0] } else { offsets(&traced) };

    let m = rho.matrix();
    let dk = kept_off.len();
    let out = CMat::from_fn(dk, dk, |r, c| {
        traced_off
            .iter()
            .map(|&e| m[(kept_off[r] + e, kept_off[c] + e)])
            .sum()
    });
    Rho::new(sub, out)
}

/// Partial transpose over the cavities in `subset`.
pub fn partial_transpose(rho: &Rho, subset: &[usize]) -> Result<CMat> {
    let spec = rho.spec();
    let subset = spec.normalize_subset(subset)?;
    let m = rho.matrix();
    let n = spec.dim();
    let mut out = CMat::zeros(n, n);
    for c in 0..n {
        for r in 0..n {
            let (mut r2, mut c2) = (r, c);
            for &i in &subset {
                let s = spec.stride(i);
                let nr = spec.occupation(r, i);
                let nc = spec.occupation(c, i);
                r2 = r2 - nr * s + nc * s;
                c2 = c2 - nc * s + nr * s;
            }
            out[(r2, c2)] = m[(r, c)];
        }
    }
    Ok(out)
}
