//! Memory convolutions with exponential-sum kernels, tabulated at grid
//! nodes and half-step midpoints.
//!
//! For node values g(s_k), k = 0..=m, on spacing h:
//! causal:      C(s) = Σ_r ∫₀^s c_r e^{−κ_r (s−s')} g(s') ds'
//! anticausal:  A(s) = Σ_r ∫_s^{s_m} c_r e^{−κ_r (s'−s)} g(s') ds'
//! Each panel integral uses three-point Gauss–Legendre with g taken from
//! the local cubic interpolant, so the tables are fourth-order accurate.

use crate::grid::cubic_stencil;
use crate::linalg::{C64, ZERO};
use crate::model::ExpTerm;

const GL_X: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const GL_W: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

/// Row vectors of fixed width at nodes s_k and at midpoints s_k + h/2,
/// stored flat.
#[derive(Debug, Clone)]
pub(crate) struct HalfTable {
    width: usize,
    nodes: Vec<C64>,
    mids: Vec<C64>,
}

impl HalfTable {
    pub fn zeros(m: usize, width: usize) -> Self {
        HalfTable {
            width,
            nodes: vec![ZERO; (m + 1) * width],
            mids: vec![ZERO; m * width],
        }
    }

    pub fn clear(&mut self) {
        self.nodes.fill(ZERO);
        self.mids.fill(ZERO);
    }

    /// Value at node k (`half = false`) or k + ½ (`half = true`).
    pub fn at(&self, k: usize, half: bool) -> &[C64] {
        let w = self.width;
        if half {
            &self.mids[k * w..(k + 1) * w]
        } else {
            &self.nodes[k * w..(k + 1) * w]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Direction {
    /// C(s) = Σ_r ∫₀^s c_r e^{−κ_r (s−s')} g(s') ds'
    Causal,
    /// A(s) = Σ_r ∫_s^{s_m} c_r e^{−κ_r (s'−s)} g(s') ds'
    Anticausal,
}

/// Stencil weights for ∫_a^b c e^{−κ|anchor − s'|} g(s') ds' over one
/// interval [k, k+1] (a, b, anchor measured from k, in units of h), for
/// each possible offset of k inside the interpolation stencil.
fn panel_weights(term: &ExpTerm, h: f64, n_nodes: usize, a: f64, b: f64, anchor: f64) -> [[C64; 4]; 3] {
    let mut out = [[ZERO; 4]; 3];
    let order = n_nodes.min(4);
    for (offset, slot) in out.iter_mut().enumerate().take(order.saturating_sub(1)) {
        let half = 0.5 * (b - a);
        let centre = 0.5 * (a + b);
        for (x, w) in GL_X.iter().zip(GL_W) {
            let s = centre + half * x;
            let weight = term.amplitude * (-term.rate * ((anchor - s).abs() * h)).exp() * (w * half * h);
            // stencil over `order` nodes starting `offset` below the interval
            let (_, sw, _) = cubic_stencil(order, s + offset as f64);
            for j in 0..order {
                slot[j] += weight * sw[j];
            }
        }
    }
    out
}

/// table += scale · conv(g), g given at the m + 1 nodes as flat rows.
pub(crate) fn accumulate(table: &mut HalfTable, dir: Direction, terms: &[ExpTerm], g: &[C64], h: f64, scale: C64) {
    let width = table.width;
    let n_nodes = g.len() / width;
    let m = n_nodes - 1;
    let mut running = vec![ZERO; width];
    let mut panel = vec![ZERO; width];
    for term in terms {
        let decay_full = (-term.rate * h).exp();
        let decay_half = (-term.rate * (0.5 * h)).exp();
        let (full, half) = match dir {
            Direction::Causal => (
                panel_weights(term, h, n_nodes, 0.0, 1.0, 1.0),
                panel_weights(term, h, n_nodes, 0.0, 0.5, 0.5),
            ),
            Direction::Anticausal => (
                panel_weights(term, h, n_nodes, 0.0, 1.0, 0.0),
                panel_weights(term, h, n_nodes, 0.5, 1.0, 0.5),
            ),
        };
        let eval = |k: usize, weights: &[[C64; 4]; 3], out: &mut [C64]| {
            let (start, _, order) = cubic_stencil(n_nodes, k as f64 + 0.5);
            let w = &weights[k - start];
            out.fill(ZERO);
            for (j, wj) in w.iter().enumerate().take(order) {
                let row = &g[(start + j) * width..(start + j + 1) * width];
                for (o, v) in out.iter_mut().zip(row) {
                    *o += wj * v;
                }
            }
        };
        running.fill(ZERO);
        let steps: Box<dyn Iterator<Item = usize>> = match dir {
            Direction::Causal => Box::new(0..m),
            Direction::Anticausal => Box::new((0..m).rev()),
        };
        for k in steps {
            eval(k, &half, &mut panel);
            let mid = &mut table.mids[k * width..(k + 1) * width];
            for ((t, r), p) in mid.iter_mut().zip(&running).zip(&panel) {
                *t += scale * (r * decay_half + p);
            }
            eval(k, &full, &mut panel);
            for (r, p) in running.iter_mut().zip(&panel) {
                *r = *r * decay_full + p;
            }
            let node = match dir {
                Direction::Causal => k + 1,
                Direction::Anticausal => k,
            };
            for (t, r) in table.nodes[node * width..(node + 1) * width].iter_mut().zip(&running) {
                *t += scale * r;
            }
        }
    }
}

pub(crate) fn conj_terms(terms: &[ExpTerm]) -> Vec<ExpTerm> {
    terms
        .iter()
        .map(|t| ExpTerm {
            amplitude: t.amplitude.conj(),
            rate: t.rate.conj(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(term: &ExpTerm, f: impl Fn(f64) -> f64, lo: f64, hi: f64, anchor: f64) -> C64 {
        let n = 20_000;
        let dx = (hi - lo) / n as f64;
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..=n {
            let s = lo + j as f64 * dx;
            let w = if j == 0 || j == n { 1.0 } else if j % 2 == 1 { 4.0 } else { 2.0 };
            acc += term.amplitude * (-term.rate * (anchor - s).abs()).exp() * f(s) * w;
        }
        acc * (dx / 3.0)
    }

    #[test]
    fn tables_match_direct_quadrature() {
        let term = ExpTerm {
            amplitude: C64::new(0.3, 0.1),
            rate: C64::new(0.7, -0.4),
        };
        let f = |s: f64| (1.1 * s).cos() + 0.2 * s;
        let h = 0.05;
        let m = 60;
        let g: Vec<C64> = (0..=m).map(|k| C64::new(f(k as f64 * h), 0.0)).collect();
        let mut c = HalfTable::zeros(m, 1);
        accumulate(&mut c, Direction::Causal, &[term], &g, h, C64::new(1.0, 0.0));
        let mut a = HalfTable::zeros(m, 1);
        accumulate(&mut a, Direction::Anticausal, &[term], &g, h, C64::new(1.0, 0.0));
        let t_end = m as f64 * h;
        for &k in &[0usize, 7, 31, 60] {
            let s = k as f64 * h;
            assert!((c.at(k, false)[0] - brute(&term, f, 0.0, s, s)).norm() < 1e-7);
            assert!((a.at(k, false)[0] - brute(&term, f, s, t_end, s)).norm() < 1e-7);
        }
        for &k in &[0usize, 13, 59] {
            let s = (k as f64 + 0.5) * h;
            assert!((c.at(k, true)[0] - brute(&term, f, 0.0, s, s)).norm() < 1e-7);
            assert!((a.at(k, true)[0] - brute(&term, f, s, t_end, s)).norm() < 1e-7);
        }
    }
}
