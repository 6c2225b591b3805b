//! Finite-temperature QSD coefficients.
//!
//! Two-time vectors p(t,s), x(t,s) and three-time scalars q(t,s,s'),
//! y(t,s,s') obey, with c_p = Σ_j l_j* p_j and c_x = Σ_j l_j x_j,
//!
//! ∂_t p_i = i(Mp)_i + c_p P_i + l_i Σ_j p_j X_j − l_i Y(t,s)
//! ∂_t x_i = −i(Mx)_i − l_i* Σ_j P_j x_j − c_x X_i − l_i* Q(t,s)
//! ∂_t q(t,s,s') = c_p(t,s) Q(t,s')
//! ∂_t y(t,s,s') = −c_x(t,s) Y(t,s')
//!
//! where P = ∫₀^t α₁ p ds, X = ∫₀^t α₂ x ds, Q(t,s') = ∫₀^t α₁ q(t,s,s') ds
//! and Y(t,s') = ∫₀^t α₂ y(t,s,s') ds. Boundary data: p(t,t) = l,
//! x(t,t) = l*, q = y = 0 on the row s = t, q(t,s,t) = −c_p(t,s) and
//! y(t,s,t) = c_x(t,s) on the column s' = t.
//!
//! q and y jump across s = s' by a time-independent amount (the right-hand
//! sides do not involve q, y): the stored diagonal is the row value and
//! the s < s' side is recovered as q − Σ|l|² and y + Σ|l|². Quadrature
//! over s is split at s' accordingly.

use super::{interp_vec, write_complex_csv, DEFAULT_MEMORY_BUDGET};
use crate::error::{Error, Result};
use crate::grid::{QuadTable, TimeGrid};
use crate::linalg::{CMat, CVec, C64, I, TWO, ZERO};
use crate::model::{BathSpec, CavityChainModel, EffectiveKernel};
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Copy)]
pub struct FiniteTOptions {
    /// Keep p(t_k, s_j) and x(t_k, s_j).
    pub store_two_time: bool,
    /// Keep q and y at every node (cubic memory).
    pub store_three_time: bool,
    pub memory_budget_bytes: usize,
}

impl Default for FiniteTOptions {
    fn default() -> Self {
        FiniteTOptions {
            store_two_time: false,
            store_three_time: false,
            memory_budget_bytes: DEFAULT_MEMORY_BUDGET,
        }
    }
}

/// q or y at one node t_k: entry (j, m) is the value at (s_j, s'_m), with the
/// diagonal holding the row (s ≥ s') branch.
#[derive(Debug, Clone)]
pub struct ThreeTimeSlice {
    size: usize,
    data: Vec<C64>,
}

impl ThreeTimeSlice {
    pub fn get(&self, j: usize, m: usize) -> C64 {
        self.data[m * self.size + j]
    }

    pub fn size(&self) -> usize {
        self.size
    }
}

#[derive(Debug, Clone)]
pub struct FiniteTCoeffs {
    grid: TimeGrid,
    couplings: Vec<C64>,
    p_int: Vec<CVec>,
    x_int: Vec<CVec>,
    /// Row k: Q(t_k, s'_m), m = 0..=k.
    q_int: Vec<Vec<C64>>,
    y_int: Vec<Vec<C64>>,
    p_two: Option<Vec<Vec<CVec>>>,
    x_two: Option<Vec<Vec<CVec>>>,
    q_three: Option<Vec<ThreeTimeSlice>>,
    y_three: Option<Vec<ThreeTimeSlice>>,
}

impl FiniteTCoeffs {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_cavities(&self) -> usize {
        self.couplings.len()
    }

    pub fn couplings(&self) -> &[C64] {
        &self.couplings
    }

    /// P(t_k).
    pub fn p_node(&self, k: usize) -> &CVec {
        &self.p_int[k]
    }

    /// X(t_k).
    pub fn x_node(&self, k: usize) -> &CVec {
        &self.x_int[k]
    }

    pub fn p_at(&self, t: f64) -> CVec {
        interp_vec(&self.p_int, self.grid.dt(), t)
    }

    pub fn x_at(&self, t: f64) -> CVec {
        interp_vec(&self.x_int, self.grid.dt(), t)
    }

    /// Q(t_k, s'_m) for m = 0..=k.
    pub fn q_row(&self, k: usize) -> &[C64] {
        &self.q_int[k]
    }

    /// Y(t_k, s'_m) for m = 0..=k.
    pub fn y_row(&self, k: usize) -> &[C64] {
        &self.y_int[k]
    }

    pub fn p_two_time(&self, k: usize, j: usize) -> Option<&CVec> {
        self.p_two.as_ref().and_then(|r| r.get(k)).and_then(|r| r.get(j))
    }

    pub fn x_two_time(&self, k: usize, j: usize) -> Option<&CVec> {
        self.x_two.as_ref().and_then(|r| r.get(k)).and_then(|r| r.get(j))
    }

    pub fn q_three_time(&self, k: usize) -> Option<&ThreeTimeSlice> {
        self.q_three.as_ref().and_then(|r| r.get(k))
    }

    pub fn y_three_time(&self, k: usize) -> Option<&ThreeTimeSlice> {
        self.y_three.as_ref().and_then(|r| r.get(k))
    }

    /// Columns t, P1.., X1.. as Re/Im pairs.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let n = self.n_cavities();
        let names: Vec<String> = (1..=n)
            .map(|i| format!("P{i}"))
            .chain((1..=n).map(|i| format!("X{i}")))
            .collect();
        write_complex_csv(out, &names, &self.grid.times(), |k| {
            self.p_int[k].iter().chain(self.x_int[k].iter()).copied().collect()
        })
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)?;
        Ok(())
    }
}

fn dot(a: &[C64], b: &CVec) -> C64 {
    a.iter().zip(b.iter()).fold(ZERO, |acc, (x, y)| acc + x * y)
}

fn required_bytes(n: usize, n_cav: usize, opts: &FiniteTOptions) -> usize {
    let c = std::mem::size_of::<C64>();
    let s = n + 1;
    // working q, y plus the Q, Y triangles
    let mut bytes = 2 * s * s * c + s * (s + 1) * c;
    if opts.store_two_time {
        bytes += s * (s + 1) * n_cav * c;
    }
    if opts.store_three_time {
        bytes += 2 * (s * (s + 1) * (2 * s + 1) / 6) * c;
    }
    bytes
}

/// Kernel values needed by the stage integrals.
struct KernelTable {
    /// α(q·h/2).
    half: Vec<C64>,
    /// α(h/4), the sliver midpoint lag for half steps.
    quarter: C64,
}

impl KernelTable {
    fn new(k: &EffectiveKernel, n: usize, h: f64) -> Result<Self> {
        Ok(KernelTable {
            half: (0..=2 * n + 2).map(|q| k.eval(q as f64 * 0.5 * h, 0.0)).collect::<Result<_>>()?,
            quarter: k.eval(0.25 * h, 0.0)?,
        })
    }
}

/// Rank-one stage offset: value(j, m) = stored(j, m) + scale·row[j]·col[m].
struct RankOne<'a> {
    scale: C64,
    row: &'a [C64],
    col: &'a [C64],
}

struct Stage {
    cp: Vec<C64>,
    cx: Vec<C64>,
    p_mem: CVec,
    x_mem: CVec,
    q_mem: Vec<C64>,
    y_mem: Vec<C64>,
}

struct Solver<'a> {
    n_cav: usize,
    h: f64,
    stride: usize,
    l: &'a [C64],
    lc: Vec<C64>,
    jump: f64,
    m: CMat,
    a1: KernelTable,
    a2: KernelTable,
    quad: QuadTable,
}

impl Solver<'_> {
    /// Integrals at τ = t_n + frac·h from stage values on nodes 0..=n.
    /// `frac = 0` gives the plain node quadrature.
    #[allow(clippy::too_many_arguments)]
    fn integrals(
        &self,
        n: usize,
        frac: f64,
        p: &[CVec],
        x: &[CVec],
        q: &[C64],
        y: &[C64],
        dq: Option<RankOne>,
        dy: Option<RankOne>,
    ) -> Stage {
        let h = self.h;
        let half_lag = (2.0 * frac).round() as usize;
        let cp: Vec<C64> = p.iter().map(|v| dot(&self.lc, v)).collect();
        let cx: Vec<C64> = x.iter().map(|v| dot(self.l, v)).collect();
        let a1: Vec<C64> = (0..=n).map(|j| self.a1.half[2 * (n - j) + half_lag]).collect();
        let a2: Vec<C64> = (0..=n).map(|j| self.a2.half[2 * (n - j) + half_lag]).collect();

        let width = frac * h;
        // sliver [t_n, τ]: Simpson with the midpoint from the quadratic
        // through s_{n−1}, s_n and τ (linear when s_{n−1} is unavailable)
        let (lq0, lq1, lq2) = {
            let (x0, x1, x2) = (-h, 0.0, width);
            let s = 0.5 * width;
            (
                (s - x1) * (s - x2) / ((x0 - x1) * (x0 - x2)),
                (s - x0) * (s - x2) / ((x1 - x0) * (x1 - x2)),
                (s - x0) * (s - x1) / ((x2 - x0) * (x2 - x1)),
            )
        };
        let sliver = |a: &KernelTable, prev: Option<C64>, last: C64, edge: C64| -> C64 {
            if width == 0.0 {
                return ZERO;
            }
            let a_n = a.half[half_lag];
            let a_mid = if half_lag == 1 { a.quarter } else { a.half[1] };
            let a_tau = a.half[0];
            let mid = match prev {
                Some(pv) => pv * lq0 + last * lq1 + edge * lq2,
                None => (last + edge) * 0.5,
            };
            (a_n * last + a_mid * mid * 4.0 + a_tau * edge) * (width / 6.0)
        };

        let w = self.quad.weights(n);
        let mut p_mem = CVec::zeros(self.n_cav);
        let mut x_mem = CVec::zeros(self.n_cav);
        for j in 0..=n {
            p_mem.axpy(a1[j] * (w[j] * h), &p[j], C64::new(1.0, 0.0));
            x_mem.axpy(a2[j] * (w[j] * h), &x[j], C64::new(1.0, 0.0));
        }
        for i in 0..self.n_cav {
            let prev = |v: &[CVec]| (n > 0).then(|| v[n - 1][i]);
            p_mem[i] += sliver(&self.a1, prev(p), p[n][i], self.l[i]);
            x_mem[i] += sliver(&self.a2, prev(x), x[n][i], self.lc[i]);
        }

        let column = |store: &[C64], corr: &Option<RankOne>, a: &[C64], kt: &KernelTable, jump: f64, m: usize| {
            let col = &store[m * self.stride..m * self.stride + n + 1];
            let val = |j: usize| match corr {
                Some(c) => col[j] + c.scale * c.row[j] * c.col[m],
                None => col[j],
            };
            let wl = self.quad.weights(m);
            let wu = self.quad.weights(n - m);
            let mut acc = ZERO;
            for j in 0..m {
                acc += a[j] * val(j) * wl[j];
            }
            acc += a[m] * (val(m) * (wl[m] + wu[0]) + jump * wl[m]);
            for j in m + 1..=n {
                acc += a[j] * val(j) * wu[j - m];
            }
            acc *= h;
            let prev = (m < n).then(|| val(n - 1));
            acc + sliver(kt, prev, val(n), ZERO)
        };
        let q_mem = (0..=n).map(|m| column(q, &dq, &a1, &self.a1, -self.jump, m)).collect();
        let y_mem = (0..=n).map(|m| column(y, &dy, &a2, &self.a2, self.jump, m)).collect();
        Stage {
            cp,
            cx,
            p_mem,
            x_mem,
            q_mem,
            y_mem,
        }
    }

    fn slice_rates(&self, st: &Stage, p: &[CVec], x: &[CVec]) -> (Vec<CVec>, Vec<CVec>) {
        let l = CVec::from_column_slice(self.l);
        let lc = CVec::from_column_slice(&self.lc);
        let dp = p
            .iter()
            .enumerate()
            .map(|(j, pj)| {
                let px = dot(pj.as_slice(), &st.x_mem);
                (&self.m * pj) * I + &st.p_mem * st.cp[j] + &l * (px - st.y_mem[j])
            })
            .collect();
        let dx = x
            .iter()
            .enumerate()
            .map(|(j, xj)| {
                let px = dot(st.p_mem.as_slice(), xj);
                (&self.m * xj) * (-I) - &st.x_mem * st.cx[j] - &lc * (px + st.q_mem[j])
            })
            .collect();
        (dp, dx)
    }
}

pub fn solve_finite_t(
    model: &CavityChainModel,
    bath: &BathSpec,
    grid: &TimeGrid,
    opts: FiniteTOptions,
) -> Result<FiniteTCoeffs> {
    bath.validate()?;
    let alpha2 = bath.alpha2().ok_or_else(|| {
        Error::invalid("finite-temperature coefficients need a finite-temperature bath")
    })?;
    let alpha1 = bath.alpha1();
    if alpha1.is_markov() || alpha2.is_markov() {
        return Err(Error::UnsupportedKernel(
            "a Markov delta kernel has no memory coefficients; use the Lindblad propagator".into(),
        ));
    }
    let n_steps = grid.n_steps();
    let n_cav = model.n_cavities();
    let required = required_bytes(n_steps, n_cav, &opts);
    if required > opts.memory_budget_bytes {
        return Err(Error::MemoryBudget {
            required_bytes: required,
            budget_bytes: opts.memory_budget_bytes,
        });
    }
    let h = grid.dt();
    let l = model.couplings();
    let solver = Solver {
        n_cav,
        h,
        stride: n_steps + 1,
        l,
        lc: l.iter().map(|z| z.conj()).collect(),
        jump: l.iter().map(|z| z.norm_sqr()).sum(),
        m: model.single_particle_matrix(),
        a1: KernelTable::new(&alpha1, n_steps, h)?,
        a2: KernelTable::new(&alpha2, n_steps, h)?,
        quad: QuadTable::new(n_steps + 1),
    };
    let lv = CVec::from_column_slice(l);
    let lcv = lv.conjugate();
    let stride = solver.stride;

    let mut p: Vec<CVec> = vec![lv.clone()];
    let mut x: Vec<CVec> = vec![lcv.clone()];
    let mut q = vec![ZERO; stride * stride];
    let mut y = vec![ZERO; stride * stride];
    let mut out = FiniteTCoeffs {
        grid: *grid,
        couplings: l.to_vec(),
        p_int: vec![CVec::zeros(n_cav)],
        x_int: vec![CVec::zeros(n_cav)],
        q_int: vec![vec![ZERO]],
        y_int: vec![vec![ZERO]],
        p_two: opts.store_two_time.then(|| vec![p.clone()]),
        x_two: opts.store_two_time.then(|| vec![x.clone()]),
        q_three: opts.store_three_time.then(Vec::new),
        y_three: opts.store_three_time.then(Vec::new),
    };
    let snapshot = |store: &[C64], n: usize| ThreeTimeSlice {
        size: n + 1,
        data: (0..=n).flat_map(|m| store[m * stride..m * stride + n + 1].to_vec()).collect(),
    };
    if let (Some(qs), Some(ys)) = (out.q_three.as_mut(), out.y_three.as_mut()) {
        qs.push(snapshot(&q, 0));
        ys.push(snapshot(&y, 0));
    }

    let shifted = |base: &[CVec], d: &[CVec], s: f64| -> Vec<CVec> {
        base.iter().zip(d).map(|(b, k)| b + k * C64::new(s, 0.0)).collect()
    };

    for n in 0..n_steps {
        let s1 = solver.integrals(n, 0.0, &p, &x, &q, &y, None, None);
        let (k1p, k1x) = solver.slice_rates(&s1, &p, &x);

        let (p2, x2) = (shifted(&p, &k1p, 0.5 * h), shifted(&x, &k1x, 0.5 * h));
        let ny1: Vec<C64> = s1.cx.iter().map(|c| -c).collect();
        let s2 = solver.integrals(
            n,
            0.5,
            &p2,
            &x2,
            &q,
            &y,
            Some(RankOne { scale: C64::new(0.5 * h, 0.0), row: &s1.cp, col: &s1.q_mem }),
            Some(RankOne { scale: C64::new(0.5 * h, 0.0), row: &ny1, col: &s1.y_mem }),
        );
        let (k2p, k2x) = solver.slice_rates(&s2, &p2, &x2);

        let (p3, x3) = (shifted(&p, &k2p, 0.5 * h), shifted(&x, &k2x, 0.5 * h));
        let ny2: Vec<C64> = s2.cx.iter().map(|c| -c).collect();
        let s3 = solver.integrals(
            n,
            0.5,
            &p3,
            &x3,
            &q,
            &y,
            Some(RankOne { scale: C64::new(0.5 * h, 0.0), row: &s2.cp, col: &s2.q_mem }),
            Some(RankOne { scale: C64::new(0.5 * h, 0.0), row: &ny2, col: &s2.y_mem }),
        );
        let (k3p, k3x) = solver.slice_rates(&s3, &p3, &x3);

        let (p4, x4) = (shifted(&p, &k3p, h), shifted(&x, &k3x, h));
        let ny3: Vec<C64> = s3.cx.iter().map(|c| -c).collect();
        let s4 = solver.integrals(
            n,
            1.0,
            &p4,
            &x4,
            &q,
            &y,
            Some(RankOne { scale: C64::new(h, 0.0), row: &s3.cp, col: &s3.q_mem }),
            Some(RankOne { scale: C64::new(h, 0.0), row: &ny3, col: &s3.y_mem }),
        );
        let (k4p, k4x) = solver.slice_rates(&s4, &p4, &x4);

        let w6 = C64::new(h / 6.0, 0.0);
        for j in 0..=n {
            p[j] += (&k1p[j] + &k2p[j] * TWO + &k3p[j] * TWO + &k4p[j]) * w6;
            x[j] += (&k1x[j] + &k2x[j] * TWO + &k3x[j] * TWO + &k4x[j]) * w6;
        }
        let stages = [(&s1, 1.0), (&s2, 2.0), (&s3, 2.0), (&s4, 1.0)];
        for m in 0..=n {
            let (qc, yc) = (&mut q[m * stride..m * stride + n + 1], &mut y[m * stride..m * stride + n + 1]);
            for (st, wt) in stages {
                let qm = st.q_mem[m] * (wt * h / 6.0);
                let ym = st.y_mem[m] * (wt * h / 6.0);
                for j in 0..=n {
                    qc[j] += st.cp[j] * qm;
                    yc[j] -= st.cx[j] * ym;
                }
            }
        }

        // new diagonal slice and column s' = t_{n+1}; the row s = t_{n+1}
        // is already zero
        let k = n + 1;
        p.push(lv.clone());
        x.push(lcv.clone());
        for j in 0..k {
            q[k * stride + j] = -dot(&solver.lc, &p[j]);
            y[k * stride + j] = dot(l, &x[j]);
        }

        let node = solver.integrals(k, 0.0, &p, &x, &q, &y, None, None);
        out.p_int.push(node.p_mem);
        out.x_int.push(node.x_mem);
        out.q_int.push(node.q_mem);
        out.y_int.push(node.y_mem);
        if let (Some(pt), Some(xt)) = (out.p_two.as_mut(), out.x_two.as_mut()) {
            pt.push(p.clone());
            xt.push(x.clone());
        }
        if let (Some(qs), Some(ys)) = (out.q_three.as_mut(), out.y_three.as_mut()) {
            qs.push(snapshot(&q, k));
            ys.push(snapshot(&y, k));
        }
    }
    Ok(out)
}
