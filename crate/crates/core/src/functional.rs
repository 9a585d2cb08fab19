//! The Carleman-weighted cost functional.
//!
//! For a candidate `p` with homogeneous boundary data, `q = p + m` carries the
//! measured values through the polynomial lift `m`. The residual operator is
//!
//! ```text
//! L(p) = q'' - 2ik q' + 2k² q' e - 2i e + 2k e²,
//! e(x,k) = -∫_k^{k_hi} q'(x,τ) dτ + V'(x)
//! ```
//!
//! and the cost is `J_λ(p) = e^{2λ} ∫∫ |L(p)|² e^{-2λx} dx dk`. The weight
//! concentrates the fit near the measured boundary, which is what makes the
//! functional strictly convex on balls for λ large enough.
//!
//! Gradients are computed in two stages: reverse accumulation through the
//! discrete operator gives the exact nodal partials of the discrete cost, and
//! a per-slice solve with the discrete `H²`-mass matrix turns them into the
//! Riesz representative in the search space `H` (restricted to the subspace
//! satisfying the boundary constraints). The iteration `p - γ g` therefore
//! stays in the constraint space, and `⟨g, h⟩_H` equals the directional
//! derivative for every admissible `h`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;

use crate::grid::{
    cumulative_tail_integrals, diff_matrix, h_norm, trapz_weights, ComplexField, SpatialGrid,
    WavenumberGrid,
};
use crate::tail::TailFunction;

/// Polynomial boundary lift `m(x,k) = (x²-1)² p0(k) + x (x²-1)² p1(k)` with
/// analytic x-derivatives.
#[derive(Debug, Clone)]
pub struct BoundaryLift {
    pub m: ComplexField,
    pub m1: ComplexField,
    pub m2: ComplexField,
}

/// Build the lift from the two boundary coefficient sequences.
pub fn build_lift(p0: &[Complex64], p1: &[Complex64], grid: &SpatialGrid) -> BoundaryLift {
    assert_eq!(p0.len(), p1.len(), "p0/p1 length mismatch");
    let (n_x, n_k) = (grid.n_x(), p0.len());
    let mut m = ComplexField::zeros(n_x, n_k);
    let mut m1 = ComplexField::zeros(n_x, n_k);
    let mut m2 = ComplexField::zeros(n_x, n_k);
    for (j, &x) in grid.nodes().iter().enumerate() {
        let w = x * x - 1.0;
        let s0 = w * w;
        let s0d = 4.0 * x * w;
        let s0dd = 12.0 * x * x - 4.0;
        let s1 = x * w * w;
        let s1d = w * (5.0 * x * x - 1.0);
        let s1dd = 20.0 * x * x * x - 12.0 * x;
        for mm in 0..n_k {
            m[(j, mm)] = s0 * p0[mm] + s1 * p1[mm];
            m1[(j, mm)] = s0d * p0[mm] + s1d * p1[mm];
            m2[(j, mm)] = s0dd * p0[mm] + s1dd * p1[mm];
        }
    }
    BoundaryLift { m, m1, m2 }
}

/// Candidate optimization variable: a field satisfying the discrete boundary
/// constraints `p(0,k) = 0` and one-sided `p'(0,k) = p'(1,k) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateP {
    field: ComplexField,
}

impl CandidateP {
    pub fn zeros(grid: &SpatialGrid, kgrid: &WavenumberGrid) -> Self {
        Self {
            field: ComplexField::zeros(grid.n_x(), kgrid.n_k()),
        }
    }

    /// Orthogonal projection of an arbitrary field onto the constraint space.
    pub fn project(field: ComplexField, grid: &SpatialGrid) -> Self {
        let mut field = field;
        project_constraints(&mut field, grid.n_x());
        Self { field }
    }

    /// Wrap a field that already satisfies the constraints (debug-checked,
    /// relative to the field magnitude; non-finite fields pass through so the
    /// divergence detector can report them).
    pub fn from_constrained(field: ComplexField, grid: &SpatialGrid) -> Self {
        #[cfg(debug_assertions)]
        {
            let scale = field
                .values()
                .iter()
                .map(|z| z.norm())
                .fold(1.0f64, f64::max);
            debug_assert!(
                !scale.is_finite() || constraint_violation(&field, grid) < 1e-8 * scale,
                "field violates the boundary constraints"
            );
        }
        Self { field }
    }

    pub fn field(&self) -> &ComplexField {
        &self.field
    }

    pub fn into_field(self) -> ComplexField {
        self.field
    }
}

/// Largest absolute violation of the three discrete constraints.
pub fn constraint_violation(field: &ComplexField, grid: &SpatialGrid) -> f64 {
    let n = grid.n_x();
    let s = 1.0 / (2.0 * grid.h_x());
    let mut worst: f64 = 0.0;
    for m in 0..field.n_k() {
        let f = field.slice_k(m);
        let v0 = f[0].norm();
        let d_left = ((-3.0 * f[0] + 4.0 * f[1] - f[2]) * s).norm();
        let d_right = ((3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) * s).norm();
        worst = worst.max(v0).max(d_left).max(d_right);
    }
    worst
}

/// l²-orthogonal projection onto the homogeneous constraint space, slice by
/// slice. The constraint rows are `p_0 = 0`, `-3p_0 + 4p_1 - p_2 = 0` and
/// `3p_{n-1} - 4p_{n-2} + p_{n-3} = 0`; the 3x3 Gram system is solved in
/// closed form per slice.
fn project_constraints(field: &mut ComplexField, n: usize) {
    assert!(n >= 6, "constraint projection needs n_x >= 6");
    // Rows touch disjoint node sets after eliminating p_0 = 0 first.
    for m in 0..field.n_k() {
        let f = field.slice_k_mut(m);
        f[0] = Complex64::ZERO;
        // left row a = (4, -1) on nodes (1, 2), |a|² = 17
        let r_left = (4.0 * f[1] - f[2]) / 17.0;
        f[1] -= 4.0 * r_left;
        f[2] += r_left;
        // right row a = (1, -4, 3) on nodes (n-3, n-2, n-1), |a|² = 26
        let r_right = (f[n - 3] - 4.0 * f[n - 2] + 3.0 * f[n - 1]) / 26.0;
        f[n - 3] -= r_right;
        f[n - 2] += 4.0 * r_right;
        f[n - 1] -= 3.0 * r_right;
    }
}

/// Carleman weight parameters and the cached nodal weights
/// `e^{2λ} e^{-2λ x_j} = e^{2λ(1 - x_j)} ≥ 1`.
#[derive(Debug, Clone)]
pub struct CarlemanParams {
    pub lambda: f64,
    pub radius: f64,
    weights: Vec<f64>,
}

impl CarlemanParams {
    pub fn new(lambda: f64, radius: f64, grid: &SpatialGrid) -> Self {
        assert!(lambda >= 0.0, "lambda must be nonnegative");
        assert!(radius > 0.0, "ball radius must be positive");
        let weights = grid
            .nodes()
            .iter()
            .map(|&x| (2.0 * lambda * (1.0 - x)).exp())
            .collect();
        Self {
            lambda,
            radius,
            weights,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Radial projection onto the closed ball of radius `params.radius` in `H`.
pub fn project_ball(
    p: &CandidateP,
    params: &CarlemanParams,
    grid: &SpatialGrid,
    kgrid: &WavenumberGrid,
) -> CandidateP {
    let norm = h_norm(p.field(), grid, kgrid);
    if norm <= params.radius {
        p.clone()
    } else {
        CandidateP {
            field: p.field().scale(params.radius / norm),
        }
    }
}

/// Assembled cost functional for one data set (lift + tail slope + weights).
/// Caches the derivative matrices and the Cholesky factor of the reduced
/// `H²`-mass matrix used by the Riesz solve.
pub struct CostFunctional<'a> {
    grid: &'a SpatialGrid,
    kgrid: &'a WavenumberGrid,
    lift: &'a BoundaryLift,
    tail_slope: Vec<Complex64>,
    params: CarlemanParams,
    d1: DMatrix<f64>,
    d2: DMatrix<f64>,
    wx: Vec<f64>,
    wk: Vec<f64>,
    basis: DMatrix<f64>,
    riesz: Cholesky<f64, Dyn>,
}

impl<'a> CostFunctional<'a> {
    pub fn new(
        grid: &'a SpatialGrid,
        kgrid: &'a WavenumberGrid,
        lift: &'a BoundaryLift,
        tail: &'a TailFunction,
        params: CarlemanParams,
    ) -> Self {
        assert_eq!(lift.m.n_x(), grid.n_x());
        assert_eq!(lift.m.n_k(), kgrid.n_k());
        assert_eq!(tail.v1.len(), grid.n_x());
        let (n, h) = (grid.n_x(), grid.h_x());
        let d1 = diff_matrix(n, h, 1);
        let d2 = diff_matrix(n, h, 2);
        let wx = trapz_weights(n, h);
        let wk = trapz_weights(kgrid.n_k(), kgrid.h_k());

        // H²-mass matrix restricted to the constraint space.
        let w = DMatrix::from_diagonal(&DVector::from_vec(wx.clone()));
        let mass = &w + d1.transpose() * &w * &d1 + d2.transpose() * &w * &d2;
        let basis = constraint_basis(n);
        let reduced = basis.transpose() * &mass * &basis;
        let riesz = Cholesky::new(reduced).expect("H²-mass matrix must be SPD");

        Self {
            grid,
            kgrid,
            lift,
            tail_slope: tail.v1.clone(),
            params,
            d1,
            d2,
            wx,
            wk,
            basis,
            riesz,
        }
    }

    pub fn params(&self) -> &CarlemanParams {
        &self.params
    }

    fn n_x(&self) -> usize {
        self.grid.n_x()
    }

    fn n_k(&self) -> usize {
        self.kgrid.n_k()
    }

    fn apply_d(&self, d: &DMatrix<f64>, f: &[Complex64], out: &mut [Complex64]) {
        let n = f.len();
        for j in 0..n {
            let mut acc = Complex64::ZERO;
            // stencils are banded except the one-sided closures; row scan is
            // cheap at these sizes
            for l in 0..n {
                let c = d[(j, l)];
                if c != 0.0 {
                    acc += c * f[l];
                }
            }
            out[j] = acc;
        }
    }

    /// `s = q' = p' + m'` and `t = q'' = p'' + m''` for all slices.
    fn derivatives(&self, p: &ComplexField) -> (ComplexField, ComplexField) {
        let (n_x, n_k) = (self.n_x(), self.n_k());
        let mut s = ComplexField::zeros(n_x, n_k);
        let mut t = ComplexField::zeros(n_x, n_k);
        let mut buf = vec![Complex64::ZERO; n_x];
        for m in 0..n_k {
            self.apply_d(&self.d1, p.slice_k(m), &mut buf);
            let (sm, lm) = (s.slice_k_mut(m), self.lift.m1.slice_k(m));
            for j in 0..n_x {
                sm[j] = buf[j] + lm[j];
            }
            self.apply_d(&self.d2, p.slice_k(m), &mut buf);
            let (tm, lm2) = (t.slice_k_mut(m), self.lift.m2.slice_k(m));
            for j in 0..n_x {
                tm[j] = buf[j] + lm2[j];
            }
        }
        (s, t)
    }

    /// The residual field `L(p)` on the lattice.
    pub fn residual(&self, p: &CandidateP) -> ComplexField {
        self.residual_field(p.field())
    }

    /// Residual of an arbitrary field (diagnostics: consistency checks feed
    /// exact solutions whose discrete boundary differences only vanish to
    /// truncation order).
    pub fn residual_field(&self, field: &ComplexField) -> ComplexField {
        let (s, t) = self.derivatives(field);
        self.residual_from_parts(&s, &t).0
    }

    /// Cost of an arbitrary field (see [`Self::residual_field`]).
    pub fn value_field(&self, field: &ComplexField) -> f64 {
        let (s, t) = self.derivatives(field);
        let (l, _) = self.residual_from_parts(&s, &t);
        let mut acc = 0.0;
        for m in 0..self.n_k() {
            let lm = l.slice_k(m);
            let mut slice = 0.0;
            for j in 0..self.n_x() {
                slice += self.wx[j] * self.params.weights[j] * lm[j].norm_sqr();
            }
            acc += self.wk[m] * slice;
        }
        acc
    }

    fn residual_from_parts(
        &self,
        s: &ComplexField,
        t: &ComplexField,
    ) -> (ComplexField, ComplexField) {
        let (n_x, n_k) = (self.n_x(), self.n_k());
        let integrals = cumulative_tail_integrals(s, self.kgrid);
        let i = Complex64::I;
        let mut l = ComplexField::zeros(n_x, n_k);
        let mut e_field = ComplexField::zeros(n_x, n_k);
        for m in 0..n_k {
            let k = self.kgrid.nodes()[m];
            for j in 0..n_x {
                let e = -integrals[(j, m)] + self.tail_slope[j];
                let sv = s[(j, m)];
                l[(j, m)] = t[(j, m)] - 2.0 * i * k * sv + 2.0 * k * k * sv * e - 2.0 * i * e
                    + 2.0 * k * e * e;
                e_field[(j, m)] = e;
            }
        }
        (l, e_field)
    }

    /// `J_λ(p)`: weighted double trapezoidal sum of `|L(p)|²`.
    pub fn value(&self, p: &CandidateP) -> f64 {
        self.value_field(p.field())
    }

    /// Exact nodal partials of the discrete cost with respect to `(Re p,
    /// Im p)` at the free nodes, projected onto the constraint space and
    /// packed as a complex field (`∂J/∂Re + i ∂J/∂Im`). Satisfies
    /// `dJ(p)[h] = Σ Re(conj(g) h)` for every admissible direction `h`.
    pub fn nodal_gradient(&self, p: &CandidateP) -> ComplexField {
        let mut g = self.raw_nodal_gradient(p.field());
        project_constraints(&mut g, self.n_x());
        g
    }

    fn raw_nodal_gradient(&self, p: &ComplexField) -> ComplexField {
        let (n_x, n_k) = (self.n_x(), self.n_k());
        let (s, t) = self.derivatives(p);
        let (l, e_field) = self.residual_from_parts(&s, &t);
        let i = Complex64::I;
        let h_k = self.kgrid.h_k();

        // dJ = Σ c |L|² with c = wx * wk * weight: adjoint seeds
        let mut g_l = ComplexField::zeros(n_x, n_k);
        for m in 0..n_k {
            for j in 0..n_x {
                let c = self.wx[j] * self.params.weights[j] * self.wk[m];
                g_l[(j, m)] = 2.0 * c * l[(j, m)];
            }
        }

        // L = t - 2ik s + 2k² s e - 2i e + 2k e²  (holomorphic in t, s, e)
        let mut g_s = ComplexField::zeros(n_x, n_k);
        let mut g_e = ComplexField::zeros(n_x, n_k);
        for m in 0..n_k {
            let k = self.kgrid.nodes()[m];
            for j in 0..n_x {
                let gl = g_l[(j, m)];
                let e = e_field[(j, m)];
                let sv = s[(j, m)];
                g_s[(j, m)] = (-2.0 * i * k + 2.0 * k * k * e).conj() * gl;
                g_e[(j, m)] = (2.0 * k * k * sv - 2.0 * i + 4.0 * k * e).conj() * gl;
            }
        }

        // e = -I(s) + V': adjoint of the suffix trapezoid. I_m integrates s
        // over [k_m, k_hi] with half panels at μ = m and μ = n_k - 1, so the
        // transposed weights are g_s[μ] += Σ_{m ≤ min(μ, n_k-2)} w(m,μ) gI[m].
        for mu in 0..n_k {
            for m in 0..=mu.min(n_k - 2) {
                let w = if mu == m || mu == n_k - 1 {
                    0.5 * h_k
                } else {
                    h_k
                };
                for j in 0..n_x {
                    g_s[(j, mu)] -= w * g_e[(j, m)];
                }
            }
        }

        // s = D1 p + m', t = D2 p + m'': pull back through the transposes.
        let mut g_p = ComplexField::zeros(n_x, n_k);
        let mut buf = vec![Complex64::ZERO; n_x];
        for m in 0..n_k {
            let gs = g_s.slice_k(m);
            for j in 0..n_x {
                let mut acc = Complex64::ZERO;
                for l in 0..n_x {
                    let c = self.d1[(l, j)];
                    if c != 0.0 {
                        acc += c * gs[l];
                    }
                }
                buf[j] = acc;
            }
            let gl = g_l.slice_k(m);
            let gp = g_p.slice_k_mut(m);
            for j in 0..n_x {
                let mut acc = Complex64::ZERO;
                for l in 0..n_x {
                    let c = self.d2[(l, j)];
                    if c != 0.0 {
                        acc += c * gl[l];
                    }
                }
                gp[j] = buf[j] + acc;
            }
        }
        g_p
    }

    /// Gradient as an element of `H`: the Riesz representative of the
    /// directional derivative, obtained from the nodal partials by a
    /// per-slice solve with the reduced `H²`-mass matrix. Satisfies
    /// `⟨g, h⟩_H = dJ(p)[h]` for admissible `h` and lies in the constraint
    /// space, so descent steps preserve the boundary conditions.
    pub fn gradient(&self, p: &CandidateP) -> ComplexField {
        let raw = self.raw_nodal_gradient(p.field());
        let (n_x, n_k) = (self.n_x(), self.n_k());
        let nf = n_x - 3;
        let mut out = ComplexField::zeros(n_x, n_k);
        let mut rhs_re = DVector::<f64>::zeros(nf);
        let mut rhs_im = DVector::<f64>::zeros(nf);
        for m in 0..n_k {
            let gm = raw.slice_k(m);
            // rhs = Zᵀ g / wk_m
            for c in 0..nf {
                let mut re = 0.0;
                let mut im = 0.0;
                for r in 0..n_x {
                    let z = self.basis[(r, c)];
                    if z != 0.0 {
                        re += z * gm[r].re;
                        im += z * gm[r].im;
                    }
                }
                rhs_re[c] = re / self.wk[m];
                rhs_im[c] = im / self.wk[m];
            }
            let y_re = self.riesz.solve(&rhs_re);
            let y_im = self.riesz.solve(&rhs_im);
            let om = out.slice_k_mut(m);
            for r in 0..n_x {
                let mut re = 0.0;
                let mut im = 0.0;
                for c in 0..nf {
                    let z = self.basis[(r, c)];
                    if z != 0.0 {
                        re += z * y_re[c];
                        im += z * y_im[c];
                    }
                }
                om[r] = Complex64::new(re, im);
            }
        }
        out
    }
}

/// Basis of the homogeneous constraint space used for the reduced solves
/// (free nodes `2..=n-2`; nodes 0, 1, n-1 are dependent).
fn constraint_basis(n: usize) -> DMatrix<f64> {
    assert!(n >= 6);
    let nf = n - 3;
    let mut z = DMatrix::zeros(n, nf);
    for i in 0..nf {
        z[(2 + i, i)] = 1.0;
    }
    z[(1, 0)] = 0.25;
    z[(n - 1, nf - 1)] = 4.0 / 3.0;
    z[(n - 1, nf - 2)] = -1.0 / 3.0;
    z
}
