//! Exact field for piecewise-constant media, assembled by marching interface
//! conditions region by region. Serves as the reference solution the Nystrom
//! solver is validated against; the inversion pipeline never touches it.
//!
//! Convention: time factor `e^{+iωt}`, so `e^{-ikx}` travels right and
//! `e^{+ikx}` travels left. Radiation conditions select `A e^{ikx}` left of
//! the source and `T e^{-ikx}` right of the slab. The point source at
//! `x0 < 0` pins the right-going amplitude on `(x0, 0)` to `e^{ikx0}/(2ik)`.

use num_complex::Complex64;

/// Piecewise-constant profile on `[0, 1]`: `boundaries[0] = 0`,
/// `boundaries[last] = 1`, `c[i]` on `(boundaries[i], boundaries[i+1])`,
/// background 1 outside.
#[derive(Debug, Clone)]
pub struct LayeredProfile {
    boundaries: Vec<f64>,
    c: Vec<f64>,
}

impl LayeredProfile {
    pub fn new(boundaries: Vec<f64>, c: Vec<f64>) -> Self {
        assert!(boundaries.len() >= 2, "need at least [0, 1]");
        assert_eq!(c.len() + 1, boundaries.len(), "one c value per layer");
        assert_eq!(boundaries[0], 0.0);
        assert_eq!(*boundaries.last().unwrap(), 1.0);
        assert!(
            boundaries.windows(2).all(|w| w[0] < w[1]),
            "boundaries must increase"
        );
        assert!(c.iter().all(|&v| v > 0.0), "c must be positive");
        Self { boundaries, c }
    }

    /// Single inclusion of value `contrast` on `(x_loc - d/2, x_loc + d/2)`.
    pub fn slab(x_loc: f64, d: f64, contrast: f64) -> Self {
        let (a, b) = (x_loc - 0.5 * d, x_loc + 0.5 * d);
        assert!(
            0.0 < a && b < 1.0,
            "inclusion must sit strictly inside (0,1)"
        );
        Self::new(vec![0.0, a, b, 1.0], vec![1.0, contrast, 1.0])
    }

    pub fn uniform() -> Self {
        Self::new(vec![0.0, 1.0], vec![1.0])
    }
}

struct Region {
    right: f64,
    kappa: f64,
    // u = alpha e^{-i kappa x} + beta e^{+i kappa x}
    alpha: Complex64,
    beta: Complex64,
}

fn march(profile: &LayeredProfile, k: f64, x0: f64) -> Vec<Region> {
    let i = Complex64::I;
    let mut regions: Vec<Region> = Vec::with_capacity(profile.c.len() + 2);
    regions.push(Region {
        right: profile.boundaries[0],
        kappa: k,
        alpha: Complex64::ZERO,
        beta: Complex64::ZERO,
    });
    for (idx, &cv) in profile.c.iter().enumerate() {
        regions.push(Region {
            right: profile.boundaries[idx + 1],
            kappa: k * cv.sqrt(),
            alpha: Complex64::ZERO,
            beta: Complex64::ZERO,
        });
    }
    regions.push(Region {
        right: f64::INFINITY,
        kappa: k,
        alpha: Complex64::ONE,
        beta: Complex64::ZERO,
    });

    // March right-to-left matching u and u' at each interface.
    for r in (0..regions.len() - 1).rev() {
        let b = regions[r].right;
        let (kr, ar, br) = (
            regions[r + 1].kappa,
            regions[r + 1].alpha,
            regions[r + 1].beta,
        );
        let kl = regions[r].kappa;
        let em = (-i * kr * b).exp();
        let ep = (i * kr * b).exp();
        let u = ar * em + br * ep;
        let du = -i * kr * ar * em + i * kr * br * ep;
        let p = 0.5 * (u + i * du / kl);
        let q = 0.5 * (u - i * du / kl);
        regions[r].alpha = p * (i * kl * b).exp();
        regions[r].beta = q * (-i * kl * b).exp();
    }

    // Source condition: right-going amplitude next to the source.
    let pinned = (i * k * x0).exp() / (2.0 * i * k);
    let scale = pinned / regions[0].alpha;
    for r in &mut regions {
        r.alpha *= scale;
        r.beta *= scale;
    }
    regions
}

/// Exact `u(x, k)` at the requested coordinates (all must satisfy `x >= x0`).
pub fn solve(profile: &LayeredProfile, k: f64, x0: f64, xs: &[f64]) -> Vec<Complex64> {
    assert!(k > 0.0, "layered::solve needs k > 0");
    assert!(x0 < 0.0);
    let i = Complex64::I;
    let regions = march(profile, k, x0);
    xs.iter()
        .map(|&x| {
            assert!(x >= x0, "evaluation point {x} left of the source");
            let r = regions
                .iter()
                .find(|r| x <= r.right + 1e-14)
                .unwrap_or_else(|| regions.last().unwrap());
            r.alpha * (-i * r.kappa * x).exp() + r.beta * (i * r.kappa * x).exp()
        })
        .collect()
}

/// Exact normalized boundary datum `g0(k) = u(0,k) / u0(0,k)`.
pub fn g0(profile: &LayeredProfile, k: f64, x0: f64) -> Complex64 {
    let u = solve(profile, k, x0, &[0.0])[0];
    let i = Complex64::I;
    let u0 = (i * k * x0).exp() / (2.0 * i * k);
    u / u0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn uniform_medium_reproduces_incident_field() {
        let prof = LayeredProfile::uniform();
        let (k, x0) = (1.3, -1.0);
        let xs = [0.0, 0.17, 0.5, 1.0];
        let u = solve(&prof, k, x0, &xs);
        let i = Complex64::I;
        for (&x, got) in xs.iter().zip(&u) {
            let want = (-i * k * (x - x0)).exp() / (2.0 * i * k);
            assert_relative_eq!(got.re, want.re, epsilon = 1e-13);
            assert_relative_eq!(got.im, want.im, epsilon = 1e-13);
        }
        assert_relative_eq!(g0(&prof, k, x0).re, 1.0, epsilon = 1e-13);
        assert!(g0(&prof, k, x0).im.abs() < 1e-13);
    }

    #[test]
    fn field_is_continuous_across_interfaces() {
        let prof = LayeredProfile::slab(0.3, 0.1, 7.0);
        let k = 1.1;
        for edge in [0.25, 0.35] {
            let u = solve(&prof, k, -1.0, &[edge - 1e-9, edge + 1e-9]);
            assert_relative_eq!(u[0].re, u[1].re, epsilon = 1e-6);
            assert_relative_eq!(u[0].im, u[1].im, epsilon = 1e-6);
        }
    }

    #[test]
    fn outgoing_wave_on_the_right() {
        // |u| is constant for x > 1 (pure right-going wave).
        let prof = LayeredProfile::slab(0.3, 0.1, 7.0);
        let u = solve(&prof, 0.9, -1.0, &[1.0, 1.5, 2.0]);
        assert_relative_eq!(u[0].norm(), u[1].norm(), epsilon = 1e-12);
        assert_relative_eq!(u[1].norm(), u[2].norm(), epsilon = 1e-12);
    }
}
