//! Browser bindings for three small explorations: the Wigner function of a
//! cat state, the two-cavity cat transfer through a shared memory bath, and
//! the memory coefficient P(t) of a single cavity.
//!
//! Each export returns a flat `Float64Array`; the layouts are documented per
//! function. Errors come back as JS exceptions carrying the library message.

use cavity_qsd::coeffs::solve_zero_t_ou_fast;
use cavity_qsd::grid::TimeGrid;
use cavity_qsd::hilbert::{cat_ket, cat_vector, coherent_vector, HilbertSpec, Ket};
use cavity_qsd::linalg::{C64, ONE, ZERO};
use cavity_qsd::model::{BathSpec, Boundary, CavityChainModel, CorrelationKernel};
use cavity_qsd::observables::{cavity_cat_fidelity, cavity_wigner, mode_occupations, wigner, PhaseSpaceGrid};
use cavity_qsd::propagators::{propagate, PropagateOptions, ZeroTGenerator};
use cavity_qsd::Result;
use wasm_bindgen::prelude::*;

fn js(e: cavity_qsd::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Fock cutoff that keeps a cat's dropped tail below 1e-8.
fn cutoff(alpha: f64) -> usize {
    let n = alpha * alpha;
    ((n + 6.0 * n.sqrt() + 10.0).ceil() as usize).clamp(6, 40)
}

fn square_grid(half_width: f64, points: usize) -> PhaseSpaceGrid {
    PhaseSpaceGrid {
        x_range: (-half_width, half_width),
        p_range: (-half_width, half_width),
        nx: points,
        np: points,
    }
}

/// W(x, p) of the even cat |α⟩ + |−α⟩ with α = re + i·im on a square grid of
/// `points`² values, row-major in p (`values[j * points + i]` at x_i, p_j).
pub fn cat_wigner(re: f64, im: f64, half_width: f64, points: usize) -> Result<Vec<f64>> {
    let alpha = C64::new(re, im);
    let spec = HilbertSpec::uniform(1, cutoff(alpha.norm()))?;
    let rho = cat_ket(&spec, 0, alpha)?.projector();
    Ok(wigner(&rho, &square_grid(half_width, points))?.values)
}

/// Two resonant cavities (ω = 1, hopping `lambda`) sharing one OU bath with
/// rate `gamma`; cavity 1 starts in the cat |α⟩ + |−α⟩ (α real), cavity 2 in
/// vacuum. Rows of 5 values every `sample_dt`:
/// t, cat fidelity of cavity 1, of cavity 2, occupation 1, occupation 2.
pub fn cat_transfer(gamma: f64, lambda: f64, alpha: f64, t_max: f64, sample_dt: f64) -> Result<Vec<f64>> {
    let dt = 0.02;
    let d = cutoff(alpha).min(9);
    let model = CavityChainModel::new(vec![1.0, 1.0], vec![lambda, 0.0], Boundary::Open, vec![ONE, ONE])?;
    let spec = HilbertSpec::uniform(2, d)?;
    let a = C64::new(alpha, 0.0);
    let psi0 = Ket::product(&spec, &[cat_vector(d, a)?.0, coherent_vector(d, ZERO)?])?;
    let grid = TimeGrid::with_step(t_max, dt)?;
    let bath = BathSpec::zero_t(CorrelationKernel::OrnsteinUhlenbeck { gamma });
    let coeffs = solve_zero_t_ou_fast(&model, &bath, &grid.refined(2))?;
    let generator = ZeroTGenerator::new(&model, &spec, &coeffs)?;
    let opts = PropagateOptions {
        sample_every: ((sample_dt / dt).round() as usize).max(1),
        check_positivity: false,
    };
    let mut rows = Vec::new();
    propagate(&generator, &psi0.projector(), &grid, opts, |_, t, m| {
        let rho = cavity_qsd::hilbert::Rho::new(spec.clone(), m.clone())?;
        let occ = mode_occupations(&rho)?;
        rows.extend([
            t,
            cavity_cat_fidelity(&rho, 0, a)?.fidelity,
            cavity_cat_fidelity(&rho, 1, a)?.fidelity,
            occ[0],
            occ[1],
        ]);
        Ok(())
    })?;
    Ok(rows)
}

/// Wigner function of cavity 2 at time `t` in the [`cat_transfer`] setup,
/// laid out like [`cat_wigner`].
pub fn transfer_wigner(
    gamma: f64,
    lambda: f64,
    alpha: f64,
    t: f64,
    half_width: f64,
    points: usize,
) -> Result<Vec<f64>> {
    let dt = 0.02;
    let d = cutoff(alpha).min(9);
    let model = CavityChainModel::new(vec![1.0, 1.0], vec![lambda, 0.0], Boundary::Open, vec![ONE, ONE])?;
    let spec = HilbertSpec::uniform(2, d)?;
    let a = C64::new(alpha, 0.0);
    let psi0 = Ket::product(&spec, &[cat_vector(d, a)?.0, coherent_vector(d, ZERO)?])?;
    let steps = ((t / dt).round() as usize).max(1);
    let grid = TimeGrid::new(steps as f64 * dt, steps)?;
    let bath = BathSpec::zero_t(CorrelationKernel::OrnsteinUhlenbeck { gamma });
    let coeffs = solve_zero_t_ou_fast(&model, &bath, &grid.refined(2))?;
    let generator = ZeroTGenerator::new(&model, &spec, &coeffs)?;
    let opts = PropagateOptions {
        sample_every: steps,
        check_positivity: false,
    };
    let mut last = None;
    propagate(&generator, &psi0.projector(), &grid, opts, |_, _, m| {
        last = Some(m.clone());
        Ok(())
    })?;
    let rho = cavity_qsd::hilbert::Rho::new(spec, last.expect("final state is always sampled"))?;
    Ok(cavity_wigner(&rho, 1, &square_grid(half_width, points))?.values)
}

/// Memory coefficient of one cavity (ω = `omega`, coupling 1) in an OU bath
/// of rate `gamma`. Rows of 3 values: t, Re P, Im P.
pub fn memory_coefficient(gamma: f64, omega: f64, t_max: f64, dt: f64) -> Result<Vec<f64>> {
    let model = CavityChainModel::new(vec![omega], vec![0.0], Boundary::Open, vec![ONE])?;
    let grid = TimeGrid::with_step(t_max, dt)?;
    let bath = BathSpec::zero_t(CorrelationKernel::OrnsteinUhlenbeck { gamma });
    let coeffs = solve_zero_t_ou_fast(&model, &bath, &grid)?;
    let mut rows = Vec::with_capacity(3 * grid.n_points());
    for (k, p) in coeffs.memory_nodes().iter().enumerate() {
        rows.extend([grid.time(k), p[0].re, p[0].im]);
    }
    Ok(rows)
}

// JS entry points; errors become exceptions carrying the library message.

#[wasm_bindgen(js_name = catWigner)]
pub fn js_cat_wigner(re: f64, im: f64, half_width: f64, points: usize) -> Result<Vec<f64>, JsError> {
    cat_wigner(re, im, half_width, points).map_err(js)
}

#[wasm_bindgen(js_name = catTransfer)]
pub fn js_cat_transfer(gamma: f64, lambda: f64, alpha: f64, t_max: f64, sample_dt: f64) -> Result<Vec<f64>, JsError> {
    cat_transfer(gamma, lambda, alpha, t_max, sample_dt).map_err(js)
}

#[wasm_bindgen(js_name = transferWigner)]
pub fn js_transfer_wigner(
    gamma: f64,
    lambda: f64,
    alpha: f64,
    t: f64,
    half_width: f64,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    transfer_wigner(gamma, lambda, alpha, t, half_width, points).map_err(js)
}

#[wasm_bindgen(js_name = memoryCoefficient)]
pub fn js_memory_coefficient(gamma: f64, omega: f64, t_max: f64, dt: f64) -> Result<Vec<f64>, JsError> {
    memory_coefficient(gamma, omega, t_max, dt).map_err(js)
}
