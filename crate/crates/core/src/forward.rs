//! Forward scattering solver: the 1-D Helmholtz problem with a point source,
//! reformulated as the Lippmann-Schwinger integral equation on `[0, 1]` and
//! discretized by a trapezoidal Nystrom scheme.
//!
//! Data generation runs on a quadrature grid far finer than the inversion
//! grid (`quad_n` panels, default 2000) and the inversion never calls back
//! into this module, so no inverse crime.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{trapz_weights, SpatialGrid, WavenumberGrid};
use crate::par;

const COND_LIMIT: f64 = 1e12;

/// Step inclusion `c = contrast` on `(x_loc - d/2, x_loc + d/2)`, 1 elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StepTarget {
    pub x_loc: f64,
    pub d: f64,
    pub contrast: f64,
}

impl StepTarget {
    pub fn new(x_loc: f64, d: f64, contrast: f64) -> Self {
        let t = Self { x_loc, d, contrast };
        t.validate();
        t
    }

    pub fn validate(&self) {
        assert!(self.d >= 0.0, "inclusion width must be nonnegative");
        assert!(
            self.x_loc - 0.5 * self.d > 0.0 && self.x_loc + 0.5 * self.d < 1.0,
            "inclusion ({}, {}) must sit inside (0,1)",
            self.x_loc - 0.5 * self.d,
            self.x_loc + 0.5 * self.d
        );
        assert!(self.contrast > 0.0, "contrast must be positive");
    }
}

/// Real coefficient sampled on a [`SpatialGrid`]; background 1 outside `[0,1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MediumProfile {
    values: Vec<f64>,
}

impl MediumProfile {
    pub fn new(values: Vec<f64>, grid: &SpatialGrid) -> Self {
        assert_eq!(values.len(), grid.n_x(), "profile/grid size mismatch");
        assert!(values.iter().all(|&v| v > 0.0), "c must stay positive");
        let eps = 1e-12;
        assert!(
            (values[0] - 1.0).abs() < eps && (values[values.len() - 1] - 1.0).abs() < eps,
            "c must equal 1 at x = 0 and x = 1"
        );
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Medium description accepted by the forward solver.
#[derive(Debug, Clone)]
pub enum Profile {
    /// `c ≡ 1`.
    Uniform,
    /// Sharp step inclusion, evaluated exactly on the quadrature grid. A
    /// quadrature node landing exactly on an inclusion edge takes the mean of
    /// the two one-sided values, which keeps the trapezoidal rule second-order
    /// accurate across the jump.
    Step(StepTarget),
    /// Grid samples, linearly interpolated between nodes.
    Grid(MediumProfile),
}

impl Profile {
    pub fn value_at(&self, x: f64) -> f64 {
        match self {
            Profile::Uniform => 1.0,
            Profile::Step(t) => {
                if t.d <= 0.0 {
                    return 1.0;
                }
                let (a, b) = (t.x_loc - 0.5 * t.d, t.x_loc + 0.5 * t.d);
                let tol = 1e-12;
                if (x - a).abs() < tol || (x - b).abs() < tol {
                    0.5 * (1.0 + t.contrast)
                } else if x > a && x < b {
                    t.contrast
                } else {
                    1.0
                }
            }
            Profile::Grid(p) => {
                if !(0.0..=1.0).contains(&x) {
                    return 1.0;
                }
                let n = p.values.len();
                let h = 1.0 / (n - 1) as f64;
                let pos = (x / h).min((n - 1) as f64);
                let j = (pos.floor() as usize).min(n - 2);
                let t = pos - j as f64;
                (1.0 - t) * p.values[j] + t * p.values[j + 1]
            }
        }
    }

    /// Profile sampled on the grid nodes (strict interior rule for steps, so
    /// an edge exactly on a node reads the background side).
    pub fn sample(&self, grid: &SpatialGrid) -> Vec<f64> {
        match self {
            Profile::Step(t) => grid
                .nodes()
                .iter()
                .map(|&x| {
                    let (a, b) = (t.x_loc - 0.5 * t.d, t.x_loc + 0.5 * t.d);
                    if x > a && x < b {
                        t.contrast
                    } else {
                        1.0
                    }
                })
                .collect(),
            _ => grid.nodes().iter().map(|&x| self.value_at(x)).collect(),
        }
    }
}

/// Per-k boundary data `g0(k) = u(0,k)/u0(0,k)` with the noise bookkeeping
/// needed for reproducibility.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterData {
    pub g0: Vec<Complex64>,
    pub noise_level: f64,
    pub seed: u64,
}

/// Incident field `u0(x,k) = exp(-ik|x - x0|) / (2ik)`.
pub fn incident_field(x: f64, k: f64, x0: f64) -> Result<Complex64> {
    if k <= 0.0 {
        return Err(Error::NonPositiveWavenumber(k));
    }
    let i = Complex64::I;
    Ok((-i * k * (x - x0).abs()).exp() / (2.0 * i * k))
}

/// Nystrom solve of `u = u0 + k² ∫ G (c - 1) u dξ` on `quad_n` trapezoidal
/// panels, restricted to the spatial grid nodes.
///
/// The kernel column vanishes wherever `c = 1`, so the dense solve runs on
/// the inclusion support only and the answer is exact for `c ≡ 1`.
pub fn solve_forward(
    profile: &Profile,
    grid: &SpatialGrid,
    k: f64,
    quad_n: usize,
) -> Result<Vec<Complex64>> {
    let u_quad = solve_on_quadrature(profile, grid.x0_source(), k, quad_n)?;
    let n_q = quad_n + 1;
    let h_q = 1.0 / quad_n as f64;
    let wq = trapz_weights(n_q, h_q);
    let i = Complex64::I;
    let kernel_scale = k * k / (2.0 * i * k);

    // Nystrom interpolation back onto the spatial nodes.
    let out = grid
        .nodes()
        .iter()
        .map(|&x| {
            let mut acc = incident_field(x, k, grid.x0_source())?;
            for (j, uj) in u_quad.iter().enumerate() {
                let xi = j as f64 * h_q;
                let beta = profile.value_at(xi) - 1.0;
                if beta != 0.0 {
                    acc += kernel_scale * wq[j] * beta * (-i * k * (x - xi).abs()).exp() * uj;
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(out)
}

fn solve_on_quadrature(
    profile: &Profile,
    x0: f64,
    k: f64,
    quad_n: usize,
) -> Result<Vec<Complex64>> {
    assert!(quad_n >= 4, "need at least 4 quadrature panels");
    if k <= 0.0 {
        return Err(Error::NonPositiveWavenumber(k));
    }
    let n_q = quad_n + 1;
    let h_q = 1.0 / quad_n as f64;
    let wq = trapz_weights(n_q, h_q);
    let i = Complex64::I;
    let kernel_scale = k * k / (2.0 * i * k);

    let beta: Vec<f64> = (0..n_q)
        .map(|j| profile.value_at(j as f64 * h_q) - 1.0)
        .collect();
    let support: Vec<usize> = (0..n_q).filter(|&j| beta[j] != 0.0).collect();

    let u0: Vec<Complex64> = (0..n_q)
        .map(|j| incident_field(j as f64 * h_q, k, x0))
        .collect::<Result<Vec<_>>>()?;

    if support.is_empty() {
        return Ok(u0);
    }

    // (I - K_SS) u_S = u0_S on the support nodes.
    let ns = support.len();
    let mut a = DMatrix::<Complex64>::zeros(ns, ns);
    for (r, &jr) in support.iter().enumerate() {
        let xr = jr as f64 * h_q;
        for (cidx, &jc) in support.iter().enumerate() {
            let xc = jc as f64 * h_q;
            let kij = kernel_scale * wq[jc] * beta[jc] * (-i * k * (xr - xc).abs()).exp();
            a[(r, cidx)] = if r == cidx {
                Complex64::ONE - kij
            } else {
                -kij
            };
        }
    }
    let rhs = nalgebra::DVector::from_iterator(ns, support.iter().map(|&j| u0[j]));

    let norm_a = one_norm(&a);
    let lu = a.lu();
    let u_s = lu.solve(&rhs).ok_or(Error::IllConditioned {
        k,
        cond: f64::INFINITY,
    })?;
    let cond = norm_a * inv_one_norm_estimate(&lu, ns);
    if !cond.is_finite() || cond > COND_LIMIT {
        return Err(Error::IllConditioned { k, cond });
    }

    // Fill the full grid through the integral representation.
    let mut u = u0;
    for (r, ur) in u.iter_mut().enumerate() {
        let xr = r as f64 * h_q;
        let mut acc = Complex64::ZERO;
        for (cidx, &jc) in support.iter().enumerate() {
            let xc = jc as f64 * h_q;
            acc += kernel_scale * wq[jc] * beta[jc] * (-i * k * (xr - xc).abs()).exp() * u_s[cidx];
        }
        *ur += acc;
    }
    // Exact on the support nodes by construction.
    for (cidx, &jc) in support.iter().enumerate() {
        u[jc] = u_s[cidx];
    }
    Ok(u)
}

fn one_norm(a: &DMatrix<Complex64>) -> f64 {
    (0..a.ncols())
        .map(|c| a.column(c).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Hager-style lower estimate of `‖A⁻¹‖₁` from a handful of LU solves.
fn inv_one_norm_estimate(
    lu: &nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
    n: usize,
) -> f64 {
    let mut x = nalgebra::DVector::from_element(n, Complex64::new(1.0 / n as f64, 0.0));
    let mut est = 0.0;
    for _ in 0..4 {
        let y = match lu.solve(&x) {
            Some(y) => y,
            None => return f64::INFINITY,
        };
        let norm = y.iter().map(|z| z.norm()).sum::<f64>();
        if norm <= est {
            break;
        }
        est = norm;
        // steepest direction for the next sweep
        let mut idx = 0;
        let mut best = 0.0;
        for (j, z) in y.iter().enumerate() {
            if z.norm() > best {
                best = z.norm();
                idx = j;
            }
        }
        x = nalgebra::DVector::zeros(n);
        x[idx] = Complex64::ONE;
    }
    est
}

/// Boundary data `g0(k_m)` for every node of the wavenumber grid. Solves per
/// k are independent and run in parallel.
pub fn synthesize_data(
    profile: &Profile,
    grid: &SpatialGrid,
    kgrid: &WavenumberGrid,
    quad_n: usize,
) -> Result<ScatterData> {
    let g0 = par::map_slice(kgrid.nodes(), |&k| -> Result<Complex64> {
        let u = solve_on_quadrature(profile, grid.x0_source(), k, quad_n)?;
        Ok(u[0] / incident_field(0.0, k, grid.x0_source())?)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(ScatterData {
        g0,
        noise_level: 0.0,
        seed: 0,
    })
}

/// `|u(0, k)|` over an arbitrary wavenumber sweep (for spectrum plots).
pub fn origin_field_sweep(
    profile: &Profile,
    grid: &SpatialGrid,
    ks: &[f64],
    quad_n: usize,
) -> Result<Vec<f64>> {
    par::map_slice(ks, |&k| -> Result<f64> {
        let u = solve_on_quadrature(profile, grid.x0_source(), k, quad_n)?;
        Ok(u[0].norm())
    })
    .into_iter()
    .collect()
}

/// Multiplicative noise `g0 · (1 + level (σ1 + iσ2))` with `σ1, σ2` uniform
/// on (-1, 1) from a seeded generator. `level = 0` returns the input bits.
pub fn add_noise(data: &ScatterData, level: f64, seed: u64) -> ScatterData {
    assert!(level >= 0.0, "noise level must be nonnegative");
    if level == 0.0 {
        return ScatterData {
            g0: data.g0.clone(),
            noise_level: 0.0,
            seed,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g0 = data
        .g0
        .iter()
        .map(|&g| {
            let s1: f64 = rng.gen_range(-1.0..1.0);
            let s2: f64 = rng.gen_range(-1.0..1.0);
            g * (Complex64::ONE + level * Complex64::new(s1, s2))
        })
        .collect();
    ScatterData {
        g0,
        noise_level: level,
        seed,
    }
}
