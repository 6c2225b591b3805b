//! Finite-temperature master-equation coefficients f, g, u, v and their
//! memory integrals F, G, U, V.
//!
//! For fixed t the s-equations couple (f, v) and (g, u) in pairs. Writing X
//! for f or g and Y for v or u (N×N, column j carried along), with
//! φ = Σ_k l_k X_k· and χ = Σ_k l_k* Y_k·:
//!
//! ∂_s X = −iM X + l* ⊗ (A − I₁ − J₂),  ∂_s Y = iM Y + l ⊗ (−B + J₁ + I₂)
//!
//! A = ∫₀^t α₂*(s,s')χ*(s') ds'   B = ∫₀^t α₁*(s,s')φ*(s') ds'
//! I₁ = ∫₀^s α₁(s,s')φ(s') ds'    J₁ = ∫_s^t α₁(s',s)χ(s') ds'
//! I₂ = ∫₀^s α₂(s,s')χ(s') ds'    J₂ = ∫_s^t α₂(s',s)φ(s') ds'
//!
//! with X(t,t), Y(t,t) equal to (I, 0) for (f, v) and (0, I) for (g, u).
//!
//! Scheme: X is causal in I₁, so it is shot forward from s = 0 using the
//! t-independent resolvent of the homogeneous Volterra equation; Y is
//! anti-causal in J₁ and is marched backward from s = t. The remaining
//! window integrals (A, J₂ for X and I₂ for Y) are taken from the previous
//! sweep, starting from zero, until successive sweeps agree.

use super::sources::{accumulate, conj_terms, Direction, HalfTable};
use super::{interp_mat, write_complex_csv, DEFAULT_MEMORY_BUDGET};
use crate::error::{Error, Result};
use crate::exec::map_indexed;
use crate::grid::{QuadTable, TimeGrid};
use crate::linalg::{CMat, CVec, C64, I, ONE, TWO, ZERO};
use crate::model::{BathSpec, CavityChainModel, EffectiveKernel, ExpTerm};
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Copy)]
pub struct MasterFtOptions {
    /// Successive-sweep tolerance on the coefficient tables.
    pub tol: f64,
    pub max_sweeps: usize,
    /// When false, stop after `max_sweeps` without reporting an error.
    pub require_convergence: bool,
    pub store_two_time: bool,
    pub memory_budget_bytes: usize,
}

impl Default for MasterFtOptions {
    fn default() -> Self {
        MasterFtOptions {
            tol: 1e-9,
            max_sweeps: 50,
            require_convergence: true,
            store_two_time: false,
            memory_budget_bytes: DEFAULT_MEMORY_BUDGET,
        }
    }
}

/// Fixed-point history at one t for one coefficient pair.
#[derive(Debug, Clone)]
pub struct SweepReport {
    pub t: f64,
    /// "fv" or "gu".
    pub pair: &'static str,
    /// max |Δ| between successive sweeps; entry 0 is measured against zero.
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TwoTimeMaster {
    /// `f[k][j]` = f(t_k, s_j), likewise for the others.
    pub f: Vec<Vec<CMat>>,
    pub g: Vec<Vec<CMat>>,
    pub u: Vec<Vec<CMat>>,
    pub v: Vec<Vec<CMat>>,
}

#[derive(Debug, Clone)]
pub struct MasterCoeffsFT {
    grid: TimeGrid,
    couplings: Vec<C64>,
    f_int: Vec<CMat>,
    g_int: Vec<CMat>,
    u_int: Vec<CMat>,
    v_int: Vec<CMat>,
    two_time: Option<TwoTimeMaster>,
    sweeps: Vec<SweepReport>,
}

/// The four generator vectors at one time: (Σ_i l_i F_ij)_j, (Σ_i l_i G_ij)_j,
/// (Σ_i l_i* U_ij)_j, (Σ_i l_i* V_ij)_j.
#[derive(Debug, Clone)]
pub struct MasterVectors {
    pub f: CVec,
    pub g: CVec,
    pub u: CVec,
    pub v: CVec,
}

impl MasterCoeffsFT {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Number of solved nodes (t_final / h + 1).
    pub fn n_nodes(&self) -> usize {
        self.f_int.len()
    }

    pub fn f_node(&self, k: usize) -> &CMat {
        &self.f_int[k]
    }
    pub fn g_node(&self, k: usize) -> &CMat {
        &self.g_int[k]
    }
    pub fn u_node(&self, k: usize) -> &CMat {
        &self.u_int[k]
    }
    pub fn v_node(&self, k: usize) -> &CMat {
        &self.v_int[k]
    }

    pub fn two_time(&self) -> Option<&TwoTimeMaster> {
        self.two_time.as_ref()
    }

    pub fn sweep_reports(&self) -> &[SweepReport] {
        &self.sweeps
    }

    pub fn vectors_node(&self, k: usize) -> MasterVectors {
        self.vectors_from(&self.f_int[k], &self.g_int[k], &self.u_int[k], &self.v_int[k])
    }

    pub fn vectors_at(&self, t: f64) -> MasterVectors {
        let h = self.grid.dt();
        self.vectors_from(
            &interp_mat(&self.f_int, h, t),
            &interp_mat(&self.g_int, h, t),
            &interp_mat(&self.u_int, h, t),
            &interp_mat(&self.v_int, h, t),
        )
    }

    fn vectors_from(&self, f: &CMat, g: &CMat, u: &CMat, v: &CMat) -> MasterVectors {
        let l = CVec::from_column_slice(&self.couplings);
        let lc = l.conjugate();
        MasterVectors {
            f: f.transpose() * &l,
            g: g.transpose() * &l,
            u: u.transpose() * &lc,
            v: v.transpose() * &lc,
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let n = self.couplings.len();
        let mut names = Vec::new();
        for tag in ["F", "G", "U", "V"] {
            for i in 1..=n {
                for j in 1..=n {
                    names.push(format!("{tag}{i}{j}"));
                }
            }
        }
        let times: Vec<f64> = (0..self.n_nodes()).map(|k| self.grid.time(k)).collect();
        write_complex_csv(out, &names, &times, |k| {
            let mut row = Vec::with_capacity(4 * n * n);
            for m in [&self.f_int[k], &self.g_int[k], &self.u_int[k], &self.v_int[k]] {
                for i in 0..n {
                    for j in 0..n {
                        row.push(m[(i, j)]);
                    }
                }
            }
            row
        })
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)?;
        Ok(())
    }
}

struct Setup {
    n: usize,
    h: f64,
    /// Single-particle matrix, column-major.
    m: Vec<C64>,
    l: Vec<C64>,
    lc: Vec<C64>,
    terms1: Vec<ExpTerm>,
    terms1_conj: Vec<ExpTerm>,
    terms2: Vec<ExpTerm>,
    terms2_conj: Vec<ExpTerm>,
    alpha2_zero: bool,
    alpha1_lag: Vec<C64>,
    alpha2_lag: Vec<C64>,
    quad: QuadTable,
    /// Homogeneous forward solution with U(0) = I, n×n blocks per node.
    resolvent: Vec<C64>,
}

fn exp_terms_of(k: &EffectiveKernel, which: &str) -> Result<Vec<ExpTerm>> {
    k.exp_terms().ok_or_else(|| {
        Error::UnsupportedKernel(format!(
            "finite-temperature master coefficients need exponential-sum kernels ({which} is not)"
        ))
    })
}

pub fn solve_master_coeffs_ft(
    model: &CavityChainModel,
    bath: &BathSpec,
    grid: &TimeGrid,
    t_final: f64,
    opts: MasterFtOptions,
) -> Result<MasterCoeffsFT> {
    bath.validate()?;
    let k_final = grid
        .index_of(t_final)
        .ok_or_else(|| Error::GridMismatch(format!("t_final={t_final} is not a node of the coefficient grid")))?;
    let alpha1 = bath.alpha1();
    let alpha2 = bath.alpha2().unwrap_or(EffectiveKernel {
        base: bath.kernel1.clone(),
        scale: 0.0,
        conjugate: true,
    });
    let terms1 = exp_terms_of(&alpha1, "alpha1")?;
    let terms2 = exp_terms_of(&alpha2, "alpha2")?;
    let n = model.n_cavities();
    if opts.store_two_time {
        let bytes = (k_final + 1) * (k_final + 2) / 2 * 4 * n * n * std::mem::size_of::<C64>();
        if bytes > opts.memory_budget_bytes {
            return Err(Error::MemoryBudget {
                required_bytes: bytes,
                budget_bytes: opts.memory_budget_bytes,
            });
        }
    }
    let h = grid.dt();
    let lag = |k: &EffectiveKernel| -> Result<Vec<C64>> { (0..=k_final).map(|q| k.eval(q as f64 * h, 0.0)).collect() };

    let mut setup = Setup {
        n,
        h,
        m: model.single_particle_matrix().as_slice().to_vec(),
        l: model.couplings().to_vec(),
        lc: model.couplings().iter().map(|z| z.conj()).collect(),
        terms1_conj: conj_terms(&terms1),
        terms2_conj: conj_terms(&terms2),
        alpha2_zero: alpha2.is_zero(),
        terms1,
        terms2,
        alpha1_lag: lag(&alpha1)?,
        alpha2_lag: lag(&alpha2)?,
        quad: QuadTable::new(k_final),
        resolvent: Vec::new(),
    };
    let zero_src = HalfTable::zeros(k_final, n);
    setup.resolvent = march(&setup, Sweep::Forward, CMat::identity(n, n).as_slice(), &zero_src, k_final);

    let per_t: Vec<Result<PerT>> = map_indexed(k_final + 1, |k| solve_at(&setup, k, &opts));
    let mut out = MasterCoeffsFT {
        grid: *grid,
        couplings: model.couplings().to_vec(),
        f_int: Vec::with_capacity(k_final + 1),
        g_int: Vec::with_capacity(k_final + 1),
        u_int: Vec::with_capacity(k_final + 1),
        v_int: Vec::with_capacity(k_final + 1),
        two_time: opts.store_two_time.then(|| TwoTimeMaster {
            f: Vec::new(),
            g: Vec::new(),
            u: Vec::new(),
            v: Vec::new(),
        }),
        sweeps: Vec::new(),
    };
    for r in per_t {
        let r = r?;
        let [f, g, u, v] = r.ints;
        out.f_int.push(f);
        out.g_int.push(g);
        out.u_int.push(u);
        out.v_int.push(v);
        out.sweeps.extend(r.reports);
        if let (Some(tt), Some([f, g, u, v])) = (out.two_time.as_mut(), r.tables) {
            let split = |flat: Vec<C64>| -> Vec<CMat> { flat.chunks(n * n).map(|c| CMat::from_column_slice(n, n, c)).collect() };
            tt.f.push(split(f));
            tt.g.push(split(g));
            tt.u.push(split(u));
            tt.v.push(split(v));
        }
    }
    Ok(out)
}

struct PerT {
    /// F, G, U, V at this t.
    ints: [CMat; 4],
    tables: Option<[Vec<C64>; 4]>,
    reports: Vec<SweepReport>,
}

fn solve_at(setup: &Setup, k: usize, opts: &MasterFtOptions) -> Result<PerT> {
    let n = setup.n;
    let id = CMat::identity(n, n);
    let zero = CMat::zeros(n, n);
    if k == 0 {
        return Ok(PerT {
            ints: [zero.clone(), zero.clone(), zero.clone(), zero.clone()],
            tables: opts.store_two_time.then(|| {
                [id.as_slice().to_vec(), zero.as_slice().to_vec(), id.as_slice().to_vec(), zero.as_slice().to_vec()]
            }),
            reports: Vec::new(),
        });
    }
    let t = k as f64 * setup.h;
    let (f, v, rep_fv) = solve_pair(setup, k, &id, &zero, opts, t, "fv")?;
    let (g, u, rep_gu) = solve_pair(setup, k, &zero, &id, opts, t, "gu")?;

    let nn = n * n;
    let integrate = |table: &[C64], lag: &[C64]| -> CMat {
        let w = setup.quad.weights(k);
        let mut acc = vec![ZERO; nn];
        for (j, block) in table.chunks(nn).enumerate() {
            let c = lag[k - j] * (w[j] * setup.h);
            for (a, x) in acc.iter_mut().zip(block) {
                *a += c * x;
            }
        }
        CMat::from_column_slice(n, n, &acc)
    };
    let ints = [
        integrate(&f, &setup.alpha1_lag),
        integrate(&g, &setup.alpha1_lag),
        integrate(&u, &setup.alpha2_lag),
        integrate(&v, &setup.alpha2_lag),
    ];
    Ok(PerT {
        ints,
        tables: opts.store_two_time.then_some([f, g, u, v]),
        reports: vec![rep_fv, rep_gu],
    })
}

type Pair = (Vec<C64>, Vec<C64>, SweepReport);

/// Row vectors Σ_i w_i B_ij(s) of a flat table of n×n blocks, optionally
/// conjugated.
fn contract(table: &[C64], w: &[C64], n: usize, conj: bool, out: &mut Vec<C64>) {
    out.clear();
    for block in table.chunks(n * n) {
        for col in block.chunks(n) {
            let v: C64 = col.iter().zip(w).map(|(b, wi)| wi * b).sum();
            out.push(if conj { v.conj() } else { v });
        }
    }
}

fn solve_pair(
    setup: &Setup,
    k: usize,
    x_end: &CMat,
    y_end: &CMat,
    opts: &MasterFtOptions,
    t: f64,
    tag: &'static str,
) -> Result<Pair> {
    let n = setup.n;
    let nn = n * n;
    let h = setup.h;
    let mut x_prev = vec![ZERO; (k + 1) * nn];
    let mut y_prev = vec![ZERO; (k + 1) * nn];
    let mut residuals = Vec::new();
    let u_end = CMat::from_column_slice(n, n, &setup.resolvent[k * nn..(k + 1) * nn]).lu();
    let mut x_src = HalfTable::zeros(k, n);
    let mut y_src = HalfTable::zeros(k, n);
    let (mut g1, mut g2) = (Vec::new(), Vec::new());
    let window = !setup.alpha2_zero;

    for sweep in 0..opts.max_sweeps.max(1) {
        // window integrals lagging one sweep behind
        x_src.clear();
        if window && sweep > 0 {
            contract(&y_prev, &setup.lc, n, true, &mut g1);
            contract(&x_prev, &setup.l, n, false, &mut g2);
            // anticausal part acts on χ* − φ
            for (d, c) in g2.iter_mut().zip(&g1) {
                *d = c - *d;
            }
            accumulate(&mut x_src, Direction::Causal, &setup.terms2_conj, &g1, h, ONE);
            accumulate(&mut x_src, Direction::Anticausal, &setup.terms2, &g2, h, ONE);
        }
        let mut x = march(setup, Sweep::Forward, &vec![ZERO; nn], &x_src, k);
        let rhs = x_end - CMat::from_column_slice(n, n, &x[k * nn..]);
        let c = u_end
            .solve(&rhs)
            .ok_or_else(|| Error::Factorization(format!("resolvent singular at t={t}")))?;
        for (xb, ub) in x.chunks_mut(nn).zip(setup.resolvent.chunks(nn)) {
            for col in 0..n {
                for row in 0..n {
                    let mut acc = ZERO;
                    for mid in 0..n {
                        acc += ub[row + mid * n] * c[(mid, col)];
                    }
                    xb[row + col * n] += acc;
                }
            }
        }

        y_src.clear();
        contract(&x, &setup.l, n, true, &mut g1);
        accumulate(&mut y_src, Direction::Causal, &setup.terms1_conj, &g1, h, -ONE);
        accumulate(&mut y_src, Direction::Anticausal, &setup.terms1, &g1, h, -ONE);
        if window && sweep > 0 {
            contract(&y_prev, &setup.lc, n, false, &mut g2);
            accumulate(&mut y_src, Direction::Causal, &setup.terms2, &g2, h, ONE);
        }
        let y = march(setup, Sweep::Backward, y_end.as_slice(), &y_src, k);

        let res = x
            .iter()
            .zip(&x_prev)
            .chain(y.iter().zip(&y_prev))
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        residuals.push(res);
        x_prev = x;
        y_prev = y;
        if !window || (sweep > 0 && res < opts.tol) {
            return Ok((x_prev, y_prev, SweepReport { t, pair: tag, residuals }));
        }
    }
    if opts.require_convergence {
        return Err(Error::FixedPoint {
            t,
            residual: *residuals.last().unwrap(),
            sweeps: residuals.len(),
        });
    }
    Ok((x_prev, y_prev, SweepReport { t, pair: tag, residuals }))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Sweep {
    /// ∂_s X = −iMX + l*⊗(src − I₁) from s = 0, I₁ carried as one auxiliary
    /// row per α₁ term.
    Forward,
    /// ∂_s Y = iMY + l⊗(src + J₁) from s = s_k down to 0, with
    /// ∂_s J = −cχ + κJ and J(s_k) = 0.
    Backward,
}

/// State layout: the n×n block (column-major) followed by the auxiliary rows.
fn rates(setup: &Setup, dir: Sweep, st: &[C64], src: &[C64], out: &mut [C64], row: &mut [C64], drive: &mut [C64]) {
    let n = setup.n;
    let nn = n * n;
    let (x, aux) = st.split_at(nn);
    let (dx, daux) = out.split_at_mut(nn);
    let (weights, outer_col, sign) = match dir {
        Sweep::Forward => (&setup.l, &setup.lc, -ONE),
        Sweep::Backward => (&setup.lc, &setup.l, ONE),
    };
    // φ (forward) or χ (backward)
    for (j, r) in row.iter_mut().enumerate() {
        *r = x[j * n..(j + 1) * n].iter().zip(weights).map(|(b, w)| w * b).sum();
    }
    drive.copy_from_slice(src);
    for a in aux.chunks(n) {
        for (d, v) in drive.iter_mut().zip(a) {
            *d += sign * v;
        }
    }
    // −iM (forward) or +iM (backward)
    let rot = sign * I;
    for j in 0..n {
        let xc = &x[j * n..(j + 1) * n];
        for i in 0..n {
            let mut acc = ZERO;
            for (m_idx, xv) in xc.iter().enumerate() {
                acc += setup.m[i + m_idx * n] * xv;
            }
            dx[i + j * n] = rot * acc + outer_col[i] * drive[j];
        }
    }
    for ((term, a), da) in setup.terms1.iter().zip(aux.chunks(n)).zip(daux.chunks_mut(n)) {
        for j in 0..n {
            da[j] = -sign * (term.amplitude * row[j] - term.rate * a[j]);
        }
    }
}

fn march(setup: &Setup, dir: Sweep, init: &[C64], src: &HalfTable, k: usize) -> Vec<C64> {
    let n = setup.n;
    let nn = n * n;
    let size = nn + setup.terms1.len() * n;
    let mut st = vec![ZERO; size];
    st[..nn].copy_from_slice(init);
    let mut stage = vec![ZERO; size];
    let mut kk = [vec![ZERO; size], vec![ZERO; size], vec![ZERO; size], vec![ZERO; size]];
    let mut row = vec![ZERO; n];
    let mut drive = vec![ZERO; n];
    let mut out = vec![ZERO; (k + 1) * nn];
    let (h, first) = match dir {
        Sweep::Forward => (setup.h, 0),
        Sweep::Backward => (-setup.h, k),
    };
    out[first * nn..(first + 1) * nn].copy_from_slice(&st[..nn]);
    for i in 0..k {
        // interval [step, step + 1]
        let (step, from, to) = match dir {
            Sweep::Forward => (i, i, i + 1),
            Sweep::Backward => (k - 1 - i, k - i, k - 1 - i),
        };
        let srcs = [src.at(from, false), src.at(step, true), src.at(step, true), src.at(to, false)];
        let fracs = [0.0, 0.5, 0.5, 1.0];
        for s in 0..4 {
            if s == 0 {
                stage.copy_from_slice(&st);
            } else {
                let c = C64::new(h * fracs[s], 0.0);
                for ((v, base), d) in stage.iter_mut().zip(&st).zip(&kk[s - 1]) {
                    *v = base + c * d;
                }
            }
            rates(setup, dir, &stage, srcs[s], &mut kk[s], &mut row, &mut drive);
        }
        let w = C64::new(h / 6.0, 0.0);
        for (j, v) in st.iter_mut().enumerate() {
            *v += w * (kk[0][j] + TWO * (kk[1][j] + kk[2][j]) + kk[3][j]);
        }
        out[to * nn..(to + 1) * nn].copy_from_slice(&st[..nn]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::zero_t::{solve_zero_t_with_kernel, ZeroTOptions};
    use crate::coeffs::{solve_zero_t_ou_fast, max_abs_vec_diff};
    use crate::linalg::max_abs_diff;
    use crate::model::{Boundary, CorrelationKernel};

    fn two_cavity(l: Vec<C64>, lam: f64) -> CavityChainModel {
        CavityChainModel::new(vec![1.0, 1.2], vec![lam, 0.0], Boundary::Open, l).unwrap()
    }

    #[test]
    fn terminal_values_and_zero_start() {
        let md = two_cavity(vec![ONE, C64::new(0.7, 0.2)], 0.4);
        let bath = BathSpec::finite_t(CorrelationKernel::OrnsteinUhlenbeck { gamma: 0.2 }, 0.5);
        let grid = TimeGrid::with_step(2.0, 0.02).unwrap();
        let opts = MasterFtOptions {
            store_two_time: true,
            ..Default::default()
        };
        let c = solve_master_coeffs_ft(&md, &bath, &grid, 2.0, opts).unwrap();
        let id = CMat::identity(2, 2);
        let tt = c.two_time().unwrap();
        for k in 0..c.n_nodes() {
            assert!(max_abs_diff(&tt.f[k][k], &id) < 1e-12);
            assert!(max_abs_diff(&tt.u[k][k], &id) < 1e-12);
            assert!(tt.g[k][k].iter().all(|z| z.norm() < 1e-12));
            assert_eq!(tt.v[k][k], CMat::zeros(2, 2));
        }
        for m in [c.f_node(0), c.g_node(0), c.u_node(0), c.v_node(0)] {
            assert_eq!(m, &CMat::zeros(2, 2));
        }
    }

    #[test]
    fn zero_temperature_contraction_matches_memory_coefficients() {
        // Σ_i l_i F_ij(t) = P_j(t) when α₂ ≡ 0.
        let md = two_cavity(vec![ONE, C64::new(0.6, -0.3)], 0.5);
        let ou = CorrelationKernel::OrnsteinUhlenbeck { gamma: 0.3 };
        let grid = TimeGrid::with_step(6.0, 0.01).unwrap();
        let c = solve_master_coeffs_ft(&md, &BathSpec::finite_t(ou.clone(), 0.0), &grid, 6.0, Default::default())
            .unwrap();
        let p = solve_zero_t_ou_fast(&md, &BathSpec::zero_t(ou), &grid).unwrap();
        for k in (0..c.n_nodes()).step_by(50) {
            let v = c.vectors_node(k);
            assert!(max_abs_vec_diff(&v.f, p.memory_node(k)) < 1e-8, "k={k}");
            assert!(v.g.norm() < 1e-14 && v.u.norm() == 0.0 && v.v.norm() == 0.0);
        }
    }

    #[test]
    fn first_sweep_is_the_volterra_solution() {
        // With the window terms zeroed, Σ_i l_i f_ij(t,s) solves the t-marched
        // Volterra problem driven by α₁ alone.
        let md = two_cavity(vec![ONE, ONE], 0.0);
        let bath = BathSpec::finite_t(CorrelationKernel::OrnsteinUhlenbeck { gamma: 0.2 }, 0.5);
        let grid = TimeGrid::with_step(3.0, 0.01).unwrap();
        let opts = MasterFtOptions {
            max_sweeps: 1,
            require_convergence: false,
            store_two_time: true,
            ..Default::default()
        };
        let c = solve_master_coeffs_ft(&md, &bath, &grid, 3.0, opts).unwrap();
        let zt = solve_zero_t_with_kernel(
            &md,
            &bath.alpha1(),
            &grid,
            ZeroTOptions {
                store_two_time: true,
                ..Default::default()
            },
        )
        .unwrap();
        let tt = c.two_time().unwrap();
        let l = CVec::from_column_slice(md.couplings());
        for k in [100usize, 300] {
            for j in [0usize, k / 3, k - 1] {
                let contracted = tt.f[k][j].transpose() * &l;
                let want = zt.two_time(k, j).unwrap();
                assert!(max_abs_vec_diff(&contracted, want) < 1e-7, "k={k} j={j}");
            }
            assert!(tt.g[k].iter().all(|m| m.iter().all(|z| *z == ZERO)));
        }
    }

    #[test]
    fn weak_coupling_iteration_contracts() {
        let md = two_cavity(vec![ONE, ONE], 0.0);
        let bath = BathSpec::finite_t(CorrelationKernel::OrnsteinUhlenbeck { gamma: 0.2 }, 0.5);
        let grid = TimeGrid::with_step(4.0, 0.02).unwrap();
        let c = solve_master_coeffs_ft(&md, &bath, &grid, 4.0, Default::default()).unwrap();
        let mut checked = 0;
        for rep in c.sweep_reports() {
            assert!(*rep.residuals.last().unwrap() < 1e-9);
            for w in rep.residuals.windows(2).skip(1) {
                assert!(w[1] <= w[0] * 1.0000001 + 1e-15, "{:?}", rep.residuals);
            }
            checked += 1;
        }
        assert_eq!(checked, 2 * grid.n_steps());
    }

    #[test]
    fn nonconvergence_is_reported() {
        let md = two_cavity(vec![ONE, ONE], 0.0);
        let bath = BathSpec::finite_t(CorrelationKernel::OrnsteinUhlenbeck { gamma: 0.2 }, 0.5);
        let grid = TimeGrid::with_step(2.0, 0.05).unwrap();
        let opts = MasterFtOptions {
            max_sweeps: 2,
            ..Default::default()
        };
        assert!(matches!(
            solve_master_coeffs_ft(&md, &bath, &grid, 2.0, opts),
            Err(Error::FixedPoint { .. })
        ));
    }

    #[test]
    fn tabulated_kernels_are_rejected() {
        let md = two_cavity(vec![ONE, ONE], 0.0);
        let bath = BathSpec::finite_t(
            CorrelationKernel::Tabulated {
                dt: 0.1,
                values: vec![ONE; 10],
            },
            0.5,
        );
        let grid = TimeGrid::with_step(1.0, 0.05).unwrap();
        assert!(matches!(
            solve_master_coeffs_ft(&md, &bath, &grid, 1.0, Default::default()),
            Err(Error::UnsupportedKernel(_))
        ));
    }
}
