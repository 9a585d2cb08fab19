//! Uniform grids, trapezoidal quadrature, finite-difference stencils and the
//! discrete norms shared by every other module.
//!
//! Derivatives are second-order: central stencils at interior nodes and
//! one-sided three/four/five-point closures at the boundaries, so first and
//! second differences are exact on quadratics everywhere, endpoints included.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Uniform spatial grid on `[0, 1]` plus the source coordinate `x0 < 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    n_x: usize,
    h_x: f64,
    x0_source: f64,
    nodes: Vec<f64>,
}

impl SpatialGrid {
    /// `n_x` nodes on `[0, 1]`, spacing `1 / (n_x - 1)`.
    ///
    /// Panics if `n_x < 5` (the one-sided stencils need five nodes) or if the
    /// source is not strictly left of the domain.
    pub fn new(n_x: usize, x0_source: f64) -> Self {
        assert!(n_x >= 5, "spatial grid needs at least 5 nodes, got {n_x}");
        assert!(
            x0_source < 0.0,
            "source must sit left of [0,1], got x0 = {x0_source}"
        );
        let h_x = 1.0 / (n_x - 1) as f64;
        let nodes = (0..n_x).map(|j| j as f64 * h_x).collect();
        Self {
            n_x,
            h_x,
            x0_source,
            nodes,
        }
    }

    /// 51 nodes (spacing 0.02), source at -1.
    pub fn default_51() -> Self {
        Self::new(51, -1.0)
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn h_x(&self) -> f64 {
        self.h_x
    }

    pub fn x0_source(&self) -> f64 {
        self.x0_source
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
}

/// Uniform wavenumber grid on `[k_lo, k_hi]`, `0 < k_lo < k_hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct WavenumberGrid {
    k_lo: f64,
    k_hi: f64,
    n_k: usize,
    h_k: f64,
    nodes: Vec<f64>,
}

impl WavenumberGrid {
    pub fn new(k_lo: f64, k_hi: f64, n_k: usize) -> Self {
        assert!(
            k_lo > 0.0 && k_hi > k_lo,
            "need 0 < k_lo < k_hi, got [{k_lo}, {k_hi}]"
        );
        assert!(n_k >= 2, "wavenumber grid needs at least 2 nodes");
        let h_k = (k_hi - k_lo) / (n_k - 1) as f64;
        let nodes = (0..n_k).map(|m| k_lo + m as f64 * h_k).collect();
        Self {
            k_lo,
            k_hi,
            n_k,
            h_k,
            nodes,
        }
    }

    /// `[0.5, 1.5]` with spacing 0.1.
    pub fn default_band() -> Self {
        Self::new(0.5, 1.5, 11)
    }

    pub fn k_lo(&self) -> f64 {
        self.k_lo
    }

    pub fn k_hi(&self) -> f64 {
        self.k_hi
    }

    pub fn n_k(&self) -> usize {
        self.n_k
    }

    pub fn h_k(&self) -> f64 {
        self.h_k
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
}

/// Complex lattice function on `SpatialGrid x WavenumberGrid`, stored as
/// contiguous per-k columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    n_x: usize,
    n_k: usize,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(n_x: usize, n_k: usize) -> Self {
        Self {
            n_x,
            n_k,
            values: vec![Complex64::ZERO; n_x * n_k],
        }
    }

    pub fn from_fn(n_x: usize, n_k: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut out = Self::zeros(n_x, n_k);
        for m in 0..n_k {
            for j in 0..n_x {
                out[(j, m)] = f(j, m);
            }
        }
        out
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_k(&self) -> usize {
        self.n_k
    }

    /// The k-slice `f(., k_m)` as a contiguous column.
    pub fn slice_k(&self, m: usize) -> &[Complex64] {
        &self.values[m * self.n_x..(m + 1) * self.n_x]
    }

    pub fn slice_k_mut(&mut self, m: usize) -> &mut [Complex64] {
        &mut self.values[m * self.n_x..(m + 1) * self.n_x]
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            n_x: self.n_x,
            n_k: self.n_k,
            values: self.values.iter().map(|z| z * factor).collect(),
        }
    }

    /// `self - gamma * other`, used by the descent loop.
    pub fn axpy(&self, gamma: f64, other: &Self) -> Self {
        assert_eq!(self.n_x, other.n_x);
        assert_eq!(self.n_k, other.n_k);
        Self {
            n_x: self.n_x,
            n_k: self.n_k,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - gamma * b)
                .collect(),
        }
    }
}

impl std::ops::Index<(usize, usize)> for ComplexField {
    type Output = Complex64;
    fn index(&self, (j, m): (usize, usize)) -> &Complex64 {
        &self.values[m * self.n_x + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexField {
    fn index_mut(&mut self, (j, m): (usize, usize)) -> &mut Complex64 {
        &mut self.values[m * self.n_x + j]
    }
}

/// Composite trapezoidal weights for `n` nodes with spacing `h`.
pub fn trapz_weights(n: usize, h: f64) -> Vec<f64> {
    assert!(n >= 2);
    let mut w = vec![h; n];
    w[0] = 0.5 * h;
    w[n - 1] = 0.5 * h;
    w
}

/// Trapezoidal rule over an arbitrary uniformly spaced sample.
pub fn trapz(values: &[Complex64], h: f64) -> Complex64 {
    assert!(values.len() >= 2, "trapezoid needs at least 2 samples");
    let inner: Complex64 = values[1..values.len() - 1].iter().sum();
    (0.5 * (values[0] + values[values.len() - 1]) + inner) * h
}

/// Trapezoidal `∫ f dk` over the wavenumber grid.
pub fn trapz_k(f: &[Complex64], kgrid: &WavenumberGrid) -> Complex64 {
    assert_eq!(
        f.len(),
        kgrid.n_k(),
        "trapz_k: sequence length {} does not match grid ({} nodes)",
        f.len(),
        kgrid.n_k()
    );
    trapz(f, kgrid.h_k())
}

/// Trapezoidal `∫_{k_m}^{k_hi} f(x, τ) dτ` for every x node. Zero when
/// `m` is the last node.
pub fn tail_integral_k(f: &ComplexField, m: usize, kgrid: &WavenumberGrid) -> Vec<Complex64> {
    assert_eq!(f.n_k(), kgrid.n_k(), "tail_integral_k: field/grid mismatch");
    assert!(m < kgrid.n_k(), "tail_integral_k: index {m} out of range");
    let n_x = f.n_x();
    let mut out = vec![Complex64::ZERO; n_x];
    let h = kgrid.h_k();
    for mu in m..kgrid.n_k() - 1 {
        let lo = f.slice_k(mu);
        let hi = f.slice_k(mu + 1);
        for j in 0..n_x {
            out[j] += 0.5 * h * (lo[j] + hi[j]);
        }
    }
    out
}

/// All suffix integrals `I_m = ∫_{k_m}^{k_hi} f dτ` in one backward sweep.
pub fn cumulative_tail_integrals(f: &ComplexField, kgrid: &WavenumberGrid) -> ComplexField {
    assert_eq!(f.n_k(), kgrid.n_k());
    let (n_x, n_k) = (f.n_x(), f.n_k());
    let h = kgrid.h_k();
    let mut out = ComplexField::zeros(n_x, n_k);
    for m in (0..n_k - 1).rev() {
        let lo = f.slice_k(m);
        let hi = f.slice_k(m + 1);
        for j in 0..n_x {
            let panel = 0.5 * h * (lo[j] + hi[j]);
            let next = out[(j, m + 1)];
            out[(j, m)] = next + panel;
        }
    }
    out
}

/// First or second finite-difference derivative of a per-x sequence.
/// Central stencils inside, one-sided second-order closures at the ends.
pub fn d_x(f: &[Complex64], order: usize, h: f64) -> Vec<Complex64> {
    let n = f.len();
    assert!(n >= 5, "d_x needs at least 5 samples, got {n}");
    let mut out = vec![Complex64::ZERO; n];
    match order {
        1 => {
            let s = 1.0 / (2.0 * h);
            out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) * s;
            for j in 1..n - 1 {
                out[j] = (f[j + 1] - f[j - 1]) * s;
            }
            out[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) * s;
        }
        2 => {
            let s = 1.0 / (h * h);
            out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) * s;
            for j in 1..n - 1 {
                out[j] = (f[j - 1] - 2.0 * f[j] + f[j + 1]) * s;
            }
            out[n - 1] = (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) * s;
        }
        _ => panic!("d_x: order must be 1 or 2, got {order}"),
    }
    out
}

/// Dense matrix form of the `d_x` stencils (orders 1-3). Order 3 is the
/// five-point second-order stencil set used by the H^3 seminorm.
pub(crate) fn diff_matrix(n: usize, h: f64, order: usize) -> DMatrix<f64> {
    assert!(n >= 5);
    let mut d = DMatrix::zeros(n, n);
    match order {
        1 => {
            let s = 1.0 / (2.0 * h);
            for (c, v) in [(0, -3.0), (1, 4.0), (2, -1.0)] {
                d[(0, c)] = v * s;
            }
            for j in 1..n - 1 {
                d[(j, j - 1)] = -s;
                d[(j, j + 1)] = s;
            }
            for (c, v) in [(n - 1, 3.0), (n - 2, -4.0), (n - 3, 1.0)] {
                d[(n - 1, c)] = v * s;
            }
        }
        2 => {
            let s = 1.0 / (h * h);
            for (c, v) in [(0, 2.0), (1, -5.0), (2, 4.0), (3, -1.0)] {
                d[(0, c)] = v * s;
            }
            for j in 1..n - 1 {
                d[(j, j - 1)] = s;
                d[(j, j)] = -2.0 * s;
                d[(j, j + 1)] = s;
            }
            for (c, v) in [(n - 1, 2.0), (n - 2, -5.0), (n - 3, 4.0), (n - 4, -1.0)] {
                d[(n - 1, c)] = v * s;
            }
        }
        3 => {
            let s = 1.0 / (h * h * h);
            let left0 = [-2.5, 9.0, -12.0, 7.0, -1.5];
            let left1 = [-1.5, 5.0, -6.0, 3.0, -0.5];
            for c in 0..5 {
                d[(0, c)] = left0[c] * s;
                d[(1, c)] = left1[c] * s;
            }
            for j in 2..n - 2 {
                d[(j, j - 2)] = -0.5 * s;
                d[(j, j - 1)] = s;
                d[(j, j + 1)] = -s;
                d[(j, j + 2)] = 0.5 * s;
            }
            // mirrored closures (odd derivative: negate and reverse)
            for c in 0..5 {
                d[(n - 2, n - 1 - c)] = -left1[c] * s;
                d[(n - 1, n - 1 - c)] = -left0[c] * s;
            }
        }
        _ => panic!("diff_matrix: order must be 1, 2 or 3"),
    }
    d
}

/// Discrete `H^2(0,1)` squared norm: trapezoidal `‖f‖² + ‖f'‖² + ‖f''‖²`,
/// real and imaginary parts summed.
pub fn h2_norm_sq(f: &[Complex64], h: f64) -> f64 {
    let w = trapz_weights(f.len(), h);
    let d1 = d_x(f, 1, h);
    let d2 = d_x(f, 2, h);
    let mut acc = 0.0;
    for j in 0..f.len() {
        acc += w[j] * (f[j].norm_sqr() + d1[j].norm_sqr() + d2[j].norm_sqr());
    }
    acc
}

/// Norm of the search space: `[∫ ‖f(., k)‖²_{H²} dk]^{1/2}`.
pub fn h_norm(f: &ComplexField, grid: &SpatialGrid, kgrid: &WavenumberGrid) -> f64 {
    assert_eq!(f.n_x(), grid.n_x(), "h_norm: field/grid mismatch in x");
    assert_eq!(f.n_k(), kgrid.n_k(), "h_norm: field/grid mismatch in k");
    let wk = trapz_weights(kgrid.n_k(), kgrid.h_k());
    let mut acc = 0.0;
    for m in 0..kgrid.n_k() {
        acc += wk[m] * h2_norm_sq(f.slice_k(m), grid.h_x());
    }
    acc.sqrt()
}

/// The inner product inducing [`h_norm`]. Complex slices are treated as
/// pairs of real functions, so this is real-valued.
pub fn h_inner(
    a: &ComplexField,
    b: &ComplexField,
    grid: &SpatialGrid,
    kgrid: &WavenumberGrid,
) -> f64 {
    assert_eq!(a.n_x(), b.n_x());
    assert_eq!(a.n_k(), b.n_k());
    let h = grid.h_x();
    let wx = trapz_weights(grid.n_x(), h);
    let wk = trapz_weights(kgrid.n_k(), kgrid.h_k());
    let mut acc = 0.0;
    for m in 0..kgrid.n_k() {
        let (fa, fb) = (a.slice_k(m), b.slice_k(m));
        let (da1, db1) = (d_x(fa, 1, h), d_x(fb, 1, h));
        let (da2, db2) = (d_x(fa, 2, h), d_x(fb, 2, h));
        let mut s = 0.0;
        for j in 0..grid.n_x() {
            s += wx[j]
                * (fa[j].re * fb[j].re
                    + fa[j].im * fb[j].im
                    + da1[j].re * db1[j].re
                    + da1[j].im * db1[j].im
                    + da2[j].re * db2[j].re
                    + da2[j].im * db2[j].im);
        }
        acc += wk[m] * s;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn trapz_constant_is_exact() {
        let kg = WavenumberGrid::default_band();
        let f = vec![c(1.0); kg.n_k()];
        assert_relative_eq!(trapz_k(&f, &kg).re, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn trapz_linear_is_exact() {
        let kg = WavenumberGrid::default_band();
        let f: Vec<_> = kg.nodes().iter().map(|&k| c(k)).collect();
        assert_relative_eq!(trapz_k(&f, &kg).re, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn trapz_quadratic_matches_closed_form() {
        // ∫_{0.5}^{1.5} k² dk = 13/12; the composite rule at h = 0.1 carries
        // the exact error (b-a) h² f''/12 = 1/600, so the discrete value is
        // 13/12 + 1/600 = 1.085.
        let kg = WavenumberGrid::default_band();
        let f: Vec<_> = kg.nodes().iter().map(|&k| c(k * k)).collect();
        let got = trapz_k(&f, &kg).re;
        assert_relative_eq!(got, 1.085, max_relative = 1e-13);
        assert!((got - 13.0 / 12.0).abs() < 2e-3);
    }

    #[test]
    fn tail_integral_at_top_is_zero() {
        let kg = WavenumberGrid::default_band();
        let f = ComplexField::from_fn(7, kg.n_k(), |j, m| c((j + m) as f64));
        let top = tail_integral_k(&f, kg.n_k() - 1, &kg);
        assert!(top.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn tail_integral_constant_and_linear() {
        let kg = WavenumberGrid::default_band();
        let ones = ComplexField::from_fn(5, kg.n_k(), |_, _| c(1.0));
        for z in tail_integral_k(&ones, 0, &kg) {
            assert_relative_eq!(z.re, 1.0, max_relative = 1e-14);
        }
        // f(x,k) = k integrates to (k_hi² - k_lo²)/2 = 1 exactly.
        let lin = ComplexField::from_fn(5, kg.n_k(), |_, m| c(kg.nodes()[m]));
        for z in tail_integral_k(&lin, 0, &kg) {
            assert_relative_eq!(z.re, 1.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn cumulative_integrals_match_single_calls() {
        let kg = WavenumberGrid::default_band();
        let f = ComplexField::from_fn(9, kg.n_k(), |j, m| {
            Complex64::new((j as f64).sin(), (m as f64).cos())
        });
        let all = cumulative_tail_integrals(&f, &kg);
        for m in 0..kg.n_k() {
            let single = tail_integral_k(&f, m, &kg);
            for j in 0..9 {
                assert_relative_eq!(all[(j, m)].re, single[j].re, epsilon = 1e-14);
                assert_relative_eq!(all[(j, m)].im, single[j].im, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn d_x_exact_on_quadratics_everywhere() {
        let g = SpatialGrid::default_51();
        let f: Vec<_> = g.nodes().iter().map(|&x| c(x * x)).collect();
        let d2 = d_x(&f, 2, g.h_x());
        for z in &d2 {
            assert_relative_eq!(z.re, 2.0, max_relative = 1e-9);
        }
        let d1 = d_x(&f, 1, g.h_x());
        for (z, &x) in d1.iter().zip(g.nodes()) {
            assert_relative_eq!(z.re, 2.0 * x, epsilon = 1e-10);
        }
    }

    #[test]
    fn d_x_constant_has_zero_slope() {
        let g = SpatialGrid::default_51();
        let f = vec![c(3.25); g.n_x()];
        for z in d_x(&f, 1, g.h_x()) {
            assert!(z.norm() < 1e-12);
        }
    }

    #[test]
    fn d_x_sine_derivative_at_midpoint() {
        let g = SpatialGrid::default_51();
        let f: Vec<_> = g
            .nodes()
            .iter()
            .map(|&x| c((std::f64::consts::PI * x).sin()))
            .collect();
        let d1 = d_x(&f, 1, g.h_x());
        // pi*cos(pi/2) = 0 at the center node
        assert!(d1[25].norm() < 1e-3);
    }

    #[test]
    #[should_panic(expected = "at least 5 samples")]
    fn d_x_rejects_short_input() {
        d_x(&[c(0.0); 4], 1, 0.1);
    }

    #[test]
    fn diff_matrix_agrees_with_d_x() {
        let g = SpatialGrid::new(17, -1.0);
        let f: Vec<_> = g
            .nodes()
            .iter()
            .map(|&x| Complex64::new((3.0 * x).sin(), x * x * x))
            .collect();
        for order in [1, 2] {
            let m = diff_matrix(g.n_x(), g.h_x(), order);
            let direct = d_x(&f, order, g.h_x());
            for j in 0..g.n_x() {
                let mut acc = Complex64::ZERO;
                for l in 0..g.n_x() {
                    acc += m[(j, l)] * f[l];
                }
                assert_relative_eq!(acc.re, direct[j].re, epsilon = 1e-9);
                assert_relative_eq!(acc.im, direct[j].im, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn third_difference_exact_on_cubics() {
        let g = SpatialGrid::new(21, -1.0);
        let d3 = diff_matrix(g.n_x(), g.h_x(), 3);
        let f = nalgebra::DVector::from_iterator(
            g.n_x(),
            g.nodes().iter().map(|&x| x * x * x - 0.5 * x * x),
        );
        let out = &d3 * &f;
        for v in out.iter() {
            assert_relative_eq!(*v, 6.0, max_relative = 1e-7);
        }
    }

    #[test]
    fn h2_norm_examples() {
        let g = SpatialGrid::default_51();
        let zeros = vec![Complex64::ZERO; g.n_x()];
        assert_eq!(h2_norm_sq(&zeros, g.h_x()), 0.0);

        let ones = vec![c(1.0); g.n_x()];
        assert_relative_eq!(h2_norm_sq(&ones, g.h_x()), 1.0, epsilon = 1e-12);

        // f(x) = x: ∫x² + ∫1 = 1/3 + 1 = 4/3, plus the O(h²) trapezoid error
        // on the first term.
        let lin: Vec<_> = g.nodes().iter().map(|&x| c(x)).collect();
        assert!((h2_norm_sq(&lin, g.h_x()) - 4.0 / 3.0).abs() < 1e-3);
    }

    #[test]
    fn h_norm_examples() {
        let g = SpatialGrid::default_51();
        let kg = WavenumberGrid::default_band();
        let zeros = ComplexField::zeros(g.n_x(), kg.n_k());
        assert_eq!(h_norm(&zeros, &g, &kg), 0.0);

        let ones = ComplexField::from_fn(g.n_x(), kg.n_k(), |_, _| c(1.0));
        assert_relative_eq!(h_norm(&ones, &g, &kg), 1.0, epsilon = 1e-12);

        let f = ComplexField::from_fn(g.n_x(), kg.n_k(), |_, m| c(kg.nodes()[m]));
        assert!((h_norm(&f, &g, &kg) - (13.0f64 / 12.0).sqrt()).abs() < 1e-3);
    }

    #[test]
    fn h_inner_is_consistent_with_h_norm() {
        let g = SpatialGrid::new(31, -1.0);
        let kg = WavenumberGrid::new(0.5, 1.5, 6);
        let f = ComplexField::from_fn(g.n_x(), kg.n_k(), |j, m| {
            Complex64::new((j as f64 * 0.3).sin(), (m as f64 - 2.0) * 0.1)
        });
        let n2 = h_norm(&f, &g, &kg).powi(2);
        assert_relative_eq!(h_inner(&f, &f, &g, &kg), n2, max_relative = 1e-12);
    }
}
