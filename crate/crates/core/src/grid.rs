//! Uniform time grids, endpoint-corrected quadrature and local interpolation.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_max: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_max: f64, n_steps: usize) -> Result<Self> {
        if !(t_max > 0.0 && t_max.is_finite()) || n_steps == 0 {
            return Err(Error::invalid(format!(
                "time grid needs t_max > 0 and n_steps ≥ 1 (got {t_max}, {n_steps})"
            )));
        }
        Ok(TimeGrid { t_max, n_steps })
    }

    /// Grid with step `dt`; `t_max` must be an integer multiple of it.
    pub fn with_step(t_max: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::invalid(format!("dt must be positive, got {dt}")));
        }
        let n = (t_max / dt).round();
        if n < 1.0 || (n * dt - t_max).abs() > 1e-9 * t_max.max(1.0) {
            return Err(Error::invalid(format!(
                "t_max={t_max} is not an integer multiple of dt={dt}"
            )));
        }
        Self::new(t_max, n as usize)
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_points(&self) -> usize {
        self.n_steps + 1
    }

    pub fn dt(&self) -> f64 {
        self.t_max / self.n_steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.time(k)).collect()
    }

    /// Grid with every step split into `factor` substeps.
    pub fn refined(&self, factor: usize) -> TimeGrid {
        TimeGrid {
            t_max: self.t_max,
            n_steps: self.n_steps * factor,
        }
    }

    /// Node index of `t`, if `t` lies on the grid.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let x = t / self.dt();
        let k = x.round();
        ((x - k).abs() < 1e-7 && k >= 0.0 && k as usize <= self.n_steps).then_some(k as usize)
    }

    /// True when `other` is this grid refined by an integer factor.
    pub fn refinement_factor(&self, finer: &TimeGrid) -> Option<usize> {
        if (self.t_max - finer.t_max).abs() > 1e-9 * self.t_max.max(1.0) {
            return None;
        }
        finer.n_steps.is_multiple_of(self.n_steps).then(|| finer.n_steps / self.n_steps)
    }
}

/// Quadrature weights (unit spacing) on `n` intervals: trapezoid, Simpson
/// and 3/8 rules for n ≤ 4, fourth-order Gregory end corrections beyond.
pub fn quad_weights(n: usize) -> Vec<f64> {
    match n {
        0 => vec![0.0],
        1 => vec![0.5, 0.5],
        2 => vec![1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0],
        3 => vec![3.0 / 8.0, 9.0 / 8.0, 9.0 / 8.0, 3.0 / 8.0],
        4 => vec![14.0 / 45.0, 64.0 / 45.0, 24.0 / 45.0, 64.0 / 45.0, 14.0 / 45.0],
        _ => {
            let mut w = vec![1.0; n + 1];
            let ends = [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0];
            for (k, &e) in ends.iter().enumerate() {
                w[k] = e;
                w[n - k] = e;
            }
            w
        }
    }
}

/// Cached weight rows for every window length up to `n_max`.
#[derive(Debug, Clone)]
pub struct QuadTable {
    rows: Vec<Vec<f64>>,
}

impl QuadTable {
    pub fn new(n_max: usize) -> Self {
        QuadTable {
            rows: (0..=n_max).map(quad_weights).collect(),
        }
    }

    pub fn weights(&self, n: usize) -> &[f64] {
        &self.rows[n]
    }
}

/// Lagrange weights for the 4-node stencil covering `x` (in units of the
/// node spacing), clamped to the available `n_nodes`. Returns the first
/// node index and its weights; falls back to fewer nodes on tiny grids.
pub fn cubic_stencil(n_nodes: usize, x: f64) -> (usize, [f64; 4], usize) {
    let order = n_nodes.min(4);
    if order == 1 {
        return (0, [1.0, 0.0, 0.0, 0.0], 1);
    }
    let k = x.floor().max(0.0) as isize;
    let start = (k - (order as isize / 2 - 1)).clamp(0, (n_nodes - order) as isize) as usize;
    let mut w = [0.0; 4];
    for (j, wj) in w.iter_mut().enumerate().take(order) {
        let xj = (start + j) as f64;
        let mut l = 1.0;
        for m in 0..order {
            if m != j {
                let xm = (start + m) as f64;
                l *= (x - xm) / (xj - xm);
            }
        }
        *wj = l;
    }
    (start, w, order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn grid_step_must_divide() {
        assert!(TimeGrid::with_step(1.0, 0.3).is_err());
        let g = TimeGrid::with_step(35.0, 0.02).unwrap();
        assert_eq!(g.n_steps(), 1750);
        assert_eq!(g.index_of(22.0), Some(1100));
        assert_eq!(g.index_of(22.01), None);
        assert_eq!(g.refinement_factor(&g.refined(2)), Some(2));
    }

    #[test]
    fn weights_integrate_quartics_exactly() {
        // Gregory with these end corrections is exact for cubics; Simpson,
        // 3/8 and Boole windows likewise.
        for n in 1..30 {
            let w = quad_weights(n);
            for p in 0..=3 {
                let approx: f64 = w.iter().enumerate().map(|(k, wk)| wk * (k as f64).powi(p)).sum();
                let exact = (n as f64).powi(p + 1) / (p + 1) as f64;
                if n >= 2 || p <= 1 {
                    assert!((approx - exact).abs() < 1e-9 * exact.max(1.0), "n={n} p={p}");
                }
            }
        }
    }

    #[test]
    fn gregory_is_fourth_order() {
        let f = |x: f64| (1.3 * x).sin() * (-0.4 * x).exp();
        let exact = {
            // ∫₀^3 e^{−0.4x} sin(1.3x) dx
            let (a, b) = (-0.4f64, 1.3f64);
            let prim = |x: f64| (a * x).exp() * (a * (b * x).sin() - b * (b * x).cos()) / (a * a + b * b);
            prim(3.0) - prim(0.0)
        };
        let err = |n: usize| {
            let h = 3.0 / n as f64;
            let w = quad_weights(n);
            (w.iter().enumerate().map(|(k, wk)| wk * f(k as f64 * h)).sum::<f64>() * h - exact).abs()
        };
        let ratio = err(40) / err(80);
        assert!(ratio > 12.0, "convergence ratio {ratio}");
    }

    proptest! {
        #[test]
        fn cubic_stencil_reproduces_cubics(n in 4usize..50, x in 0.0f64..1.0, c in proptest::array::uniform4(-2.0f64..2.0)) {
            let x = x * (n - 1) as f64;
            let p = |t: f64| c[0] + c[1] * t + c[2] * t * t + c[3] * t * t * t;
            let (start, w, order) = cubic_stencil(n, x);
            prop_assert_eq!(order, 4);
            prop_assert!(start + 3 < n);
            let v: f64 = (0..4).map(|j| w[j] * p((start + j) as f64)).sum();
            prop_assert!((v - p(x)).abs() < 1e-8 * (1.0 + p(x).abs()) * (n as f64).powi(3));
        }
    }
}
