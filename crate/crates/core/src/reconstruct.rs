//! Back-substitution from the minimizer to the coefficient: rebuild the full
//! field `q = p + m`, integrate down to the bottom wavenumber, evaluate the
//! pointwise Riccati expression there, and post-process into the final
//! profile plus contrast estimates.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::functional::BoundaryLift;
use crate::grid::{d_x, tail_integral_k, ComplexField, SpatialGrid, WavenumberGrid};
use crate::tail::TailFunction;

/// Whether the sought coefficient sits above or below the unit background.
/// This is prior knowledge supplied by the user, not detected from data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ContrastMode {
    AboveUnity,
    BelowUnity,
}

/// Smoothing window for the averaging step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SmoothingWindow {
    /// Node plus both neighbours (symmetric; the default).
    ThreePoint,
    /// Node plus right neighbour.
    TwoPoint,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ReconstructionResult {
    pub c_tilde: Vec<f64>,
    pub c_comp: Vec<f64>,
    pub mode: ContrastMode,
    pub p_tilde: f64,
    pub c_bckgr_range: (f64, f64),
    pub c_est_range: (f64, f64),
}

/// `v(x, k_lo) = -∫_{k_lo}^{k_hi} q dτ + V(x)` with `q = p + m`.
pub fn recover_v_at_klo(
    p_final: &ComplexField,
    lift: &BoundaryLift,
    tail: &TailFunction,
    kgrid: &WavenumberGrid,
) -> Vec<Complex64> {
    assert_eq!(p_final.n_x(), lift.m.n_x());
    assert_eq!(p_final.n_k(), lift.m.n_k());
    let (n_x, n_k) = (p_final.n_x(), p_final.n_k());
    let mut q = ComplexField::zeros(n_x, n_k);
    for m in 0..n_k {
        let (pm, lm) = (p_final.slice_k(m), lift.m.slice_k(m));
        let qm = q.slice_k_mut(m);
        for j in 0..n_x {
            qm[j] = pm[j] + lm[j];
        }
    }
    let integral = tail_integral_k(&q, 0, kgrid);
    (0..n_x).map(|j| -integral[j] + tail.v[j]).collect()
}

/// Pointwise coefficient from `v` at the bottom wavenumber:
/// `|-v'' - k² (v')² + 2ik v'|` added to or subtracted from 1 per mode.
pub fn coefficient_from_v(v: &[Complex64], k_lo: f64, mode: ContrastMode, h_x: f64) -> Vec<f64> {
    assert!(k_lo > 0.0);
    let v1 = d_x(v, 1, h_x);
    let v2 = d_x(v, 2, h_x);
    let i = Complex64::I;
    (0..v.len())
        .map(|j| {
            let r = (-v2[j] - k_lo * k_lo * v1[j] * v1[j] + 2.0 * i * k_lo * v1[j]).norm();
            match mode {
                ContrastMode::AboveUnity => r + 1.0,
                ContrastMode::BelowUnity => 1.0 - r,
            }
        })
        .collect()
}

/// Post-processing. Above unity: smooth with the averaging window, then keep
/// only nodes reaching 80% of the maximum (everything else snaps to the
/// background). Below unity: keep raw values inside (0.1, 1), background
/// elsewhere.
pub fn postprocess(c_tilde: &[f64], mode: ContrastMode, window: SmoothingWindow) -> Vec<f64> {
    let n = c_tilde.len();
    match mode {
        ContrastMode::AboveUnity => {
            let smoothed: Vec<f64> = (0..n)
                .map(|j| {
                    let (lo, hi) = match window {
                        SmoothingWindow::ThreePoint => (j.saturating_sub(1), (j + 1).min(n - 1)),
                        SmoothingWindow::TwoPoint => (j, (j + 1).min(n - 1)),
                    };
                    c_tilde[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
                })
                .collect();
            let max = smoothed.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            smoothed
                .iter()
                .map(|&v| if v >= 0.8 * max { v } else { 1.0 })
                .collect()
        }
        ContrastMode::BelowUnity => c_tilde
            .iter()
            .map(|&v| if v > 0.1 && v < 1.0 { v } else { 1.0 })
            .collect(),
    }
}

/// Contrast `P̃` (max above unity, min below) and the physical estimate
/// range `c_bckgr · P̃`. Profiles crossing 1 after post-processing are
/// rejected as mode-ambiguous.
pub fn estimate_contrast(
    c_comp: &[f64],
    mode: ContrastMode,
    c_bckgr_range: (f64, f64),
) -> Result<(f64, (f64, f64))> {
    let tol = 1e-12;
    let p_tilde = match mode {
        ContrastMode::AboveUnity => {
            if c_comp.iter().any(|&v| v < 1.0 - tol) {
                return Err(Error::AmbiguousMode);
            }
            c_comp.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        }
        ContrastMode::BelowUnity => {
            if c_comp.iter().any(|&v| v > 1.0 + tol) {
                return Err(Error::AmbiguousMode);
            }
            c_comp.iter().cloned().fold(f64::INFINITY, f64::min)
        }
    };
    let (lo, hi) = c_bckgr_range;
    Ok((p_tilde, (lo * p_tilde, hi * p_tilde)))
}

/// Full back-substitution from the final iterate to the reported result.
pub fn reconstruct(
    p_final: &ComplexField,
    lift: &BoundaryLift,
    tail: &TailFunction,
    grid: &SpatialGrid,
    kgrid: &WavenumberGrid,
    mode: ContrastMode,
    c_bckgr_range: (f64, f64),
) -> Result<ReconstructionResult> {
    let v = recover_v_at_klo(p_final, lift, tail, kgrid);
    let c_tilde = coefficient_from_v(&v, kgrid.k_lo(), mode, grid.h_x());
    let c_comp = postprocess(&c_tilde, mode, SmoothingWindow::ThreePoint);
    let (p_tilde, c_est_range) = estimate_contrast(&c_comp, mode, c_bckgr_range)?;
    Ok(ReconstructionResult {
        c_tilde,
        c_comp,
        mode,
        p_tilde,
        c_bckgr_range,
        c_est_range,
    })
}
