//! Gradient descent on the weighted cost functional, optionally projected
//! onto a ball in `H` each step. The step size is fixed; the iteration is
//! deterministic, so identical configs produce bitwise-identical traces.

use crate::error::{Error, Result};
use crate::functional::{project_ball, CandidateP, CostFunctional};
use crate::grid::{h_norm, SpatialGrid, WavenumberGrid};

/// Ball constraint for the projected variant.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Radius {
    /// Plain gradient method; no projection.
    Unbounded,
    /// Project onto the closed ball of this radius every step.
    Ball(f64),
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct MinimizerConfig {
    /// Step size γ.
    pub gamma: f64,
    pub max_iter: usize,
    /// Early stop once the gradient H-norm falls below this.
    pub grad_tol: Option<f64>,
    /// Record every n-th iteration (iteration 0 and the last always logged).
    pub log_every: usize,
    pub radius: Radius,
    /// Armijo backtracking from γ (sufficient-decrease halving). Off by
    /// default: the reference runs use the fixed step.
    pub armijo: bool,
}

impl Default for MinimizerConfig {
    fn default() -> Self {
        Self {
            gamma: 1e-5,
            max_iter: 5000,
            grad_tol: Some(1e-9),
            log_every: 1,
            radius: Radius::Unbounded,
            armijo: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub j: f64,
    pub grad_norm: f64,
    pub p_norm: f64,
}

/// Iteration history plus the final iterate.
#[derive(Debug, Clone)]
pub struct MinimizeTrace {
    pub records: Vec<TraceRecord>,
    pub final_p: CandidateP,
    pub stopped_early: bool,
}

impl MinimizeTrace {
    pub fn last(&self) -> &TraceRecord {
        self.records.last().expect("trace is never empty")
    }
}

/// Gradient descent `p ← Q(p - γ g)` from `p_init` (projection `Q` only when
/// the radius is finite). Stops at `max_iter` or once the gradient H-norm
/// drops under `grad_tol`. Non-finite values or a 1e6-fold cost increase
/// raise a divergence error carrying the partial trace.
pub fn run(
    functional: &CostFunctional,
    p_init: &CandidateP,
    config: &MinimizerConfig,
    grid: &SpatialGrid,
    kgrid: &WavenumberGrid,
) -> Result<MinimizeTrace> {
    assert!(config.gamma > 0.0, "step size must be positive");
    assert!(config.max_iter >= 1, "max_iter must be at least 1");
    let log_every = config.log_every.max(1);

    let mut p = p_init.clone();
    let mut records = Vec::new();
    let mut j0 = None;

    for iter in 0..=config.max_iter {
        let j = functional.value(&p);
        let g = functional.gradient(&p);
        let grad_norm = h_norm(&g, grid, kgrid);
        let p_norm = h_norm(p.field(), grid, kgrid);
        let record = TraceRecord {
            iter,
            j,
            grad_norm,
            p_norm,
        };
        if iter % log_every == 0 || iter == config.max_iter {
            records.push(record);
        }

        let j0 = *j0.get_or_insert(j);
        let blown_up =
            !j.is_finite() || !grad_norm.is_finite() || j > 1e6 * j0.max(f64::MIN_POSITIVE);
        if blown_up {
            if records.last().map(|r| r.iter) != Some(iter) {
                records.push(record);
            }
            return Err(Error::Diverged {
                iter,
                reason: if j.is_finite() {
                    format!("cost grew to {j:.3e} from {j0:.3e}")
                } else {
                    "non-finite cost or gradient".into()
                },
                trace: Box::new(MinimizeTrace {
                    records,
                    final_p: p,
                    stopped_early: false,
                }),
            });
        }

        if let Some(tol) = config.grad_tol {
            if grad_norm < tol {
                if records.last().map(|r| r.iter) != Some(iter) {
                    records.push(record);
                }
                return Ok(MinimizeTrace {
                    records,
                    final_p: p,
                    stopped_early: true,
                });
            }
        }
        if iter == config.max_iter {
            break;
        }

        let step = if config.armijo {
            // halve from γ until J(p - step g) ≤ J(p) - c1 step ⟨g, g⟩_H
            let c1 = 1e-4;
            let slope = grad_norm * grad_norm;
            let mut step = config.gamma;
            for _ in 0..40 {
                let trial = CandidateP::from_constrained(p.field().axpy(step, &g), grid);
                if functional.value(&trial) <= j - c1 * step * slope {
                    break;
                }
                step *= 0.5;
            }
            step
        } else {
            config.gamma
        };

        let stepped = CandidateP::from_constrained(p.field().axpy(step, &g), grid);
        p = match config.radius {
            Radius::Unbounded => stepped,
            Radius::Ball(r) => {
                let params =
                    crate::functional::CarlemanParams::new(functional.params().lambda, r, grid);
                project_ball(&stepped, &params, grid, kgrid)
            }
        };
    }

    Ok(MinimizeTrace {
        records,
        final_p: p,
        stopped_early: false,
    })
}

/// Projected variant: identical to [`run`] but the ball radius must be
/// finite.
pub fn run_projected(
    functional: &CostFunctional,
    p_init: &CandidateP,
    config: &MinimizerConfig,
    grid: &SpatialGrid,
    kgrid: &WavenumberGrid,
) -> Result<MinimizeTrace> {
    assert!(
        matches!(config.radius, Radius::Ball(_)),
        "run_projected needs a finite ball radius"
    );
    run(functional, p_init, config, grid, kgrid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataprep;
    use crate::forward::{synthesize_data, Profile, StepTarget};
    use crate::functional::{build_lift, constraint_violation, CarlemanParams, CostFunctional};
    use crate::tail::{choose_alpha, qrm_tail};

    struct Fixture {
        grid: SpatialGrid,
        kgrid: WavenumberGrid,
        lift: crate::functional::BoundaryLift,
        tail: crate::tail::TailFunction,
    }

    fn step_fixture() -> Fixture {
        let grid = SpatialGrid::default_51();
        let kgrid = WavenumberGrid::default_band();
        let profile = Profile::Step(StepTarget::new(0.3, 0.1, 7.0));
        let data = synthesize_data(&profile, &grid, &kgrid, 1000).unwrap();
        let prepared = dataprep::prepare(&data, &kgrid).unwrap();
        let tail = qrm_tail(&prepared, &grid, &kgrid, choose_alpha(0.0));
        let lift = build_lift(&prepared.p0, &prepared.p1, &grid);
        Fixture {
            grid,
            kgrid,
            lift,
            tail,
        }
    }

    #[test]
    fn uniform_medium_stops_immediately() {
        // c ≡ 1 gives unit data, zero lift and zero tail: p = 0 is already
        // stationary, so the trace holds the single starting record.
        let grid = SpatialGrid::default_51();
        let kgrid = WavenumberGrid::default_band();
        let data = synthesize_data(&Profile::Uniform, &grid, &kgrid, 400).unwrap();
        let prepared = dataprep::prepare(&data, &kgrid).unwrap();
        let tail = qrm_tail(&prepared, &grid, &kgrid, choose_alpha(0.0));
        let lift = build_lift(&prepared.p0, &prepared.p1, &grid);
        let f = CostFunctional::new(
            &grid,
            &kgrid,
            &lift,
            &tail,
            CarlemanParams::new(3.0, 10.0, &grid),
        );
        let trace = run(
            &f,
            &CandidateP::zeros(&grid, &kgrid),
            &MinimizerConfig {
                grad_tol: Some(1e-8),
                ..Default::default()
            },
            &grid,
            &kgrid,
        )
        .unwrap();
        assert_eq!(trace.records.len(), 1);
        assert!(trace.stopped_early);
        assert!(trace.records[0].grad_norm < 1e-8);
    }

    #[test]
    fn gradient_norm_decreases_on_step_target() {
        let fx = step_fixture();
        let f = CostFunctional::new(
            &fx.grid,
            &fx.kgrid,
            &fx.lift,
            &fx.tail,
            CarlemanParams::new(3.0, 10.0, &fx.grid),
        );
        let config = MinimizerConfig {
            max_iter: 400,
            grad_tol: None,
            log_every: 10,
            ..Default::default()
        };
        let trace = run(
            &f,
            &CandidateP::zeros(&fx.grid, &fx.kgrid),
            &config,
            &fx.grid,
            &fx.kgrid,
        )
        .unwrap();
        let first = trace.records.first().unwrap();
        let last = trace.last();
        assert!(last.grad_norm < first.grad_norm);
        assert!(last.j < first.j);
        // descent is monotone in J at this step size
        for w in trace.records.windows(2) {
            assert!(w[1].j <= w[0].j * (1.0 + 1e-9), "{} -> {}", w[0].j, w[1].j);
        }
    }

    #[test]
    fn iterates_respect_constraints_and_ball() {
        let fx = step_fixture();
        let f = CostFunctional::new(
            &fx.grid,
            &fx.kgrid,
            &fx.lift,
            &fx.tail,
            CarlemanParams::new(3.0, 0.05, &fx.grid),
        );
        let config = MinimizerConfig {
            max_iter: 150,
            grad_tol: None,
            log_every: 1,
            radius: Radius::Ball(0.05),
            ..Default::default()
        };
        let trace = run_projected(
            &f,
            &CandidateP::zeros(&fx.grid, &fx.kgrid),
            &config,
            &fx.grid,
            &fx.kgrid,
        )
        .unwrap();
        for r in &trace.records {
            assert!(
                r.p_norm <= 0.05 + 1e-10,
                "iterate left the ball: {}",
                r.p_norm
            );
        }
        assert!(constraint_violation(trace.final_p.field(), &fx.grid) < 1e-9);
    }

    #[test]
    fn huge_ball_matches_unconstrained_run() {
        let fx = step_fixture();
        let f = CostFunctional::new(
            &fx.grid,
            &fx.kgrid,
            &fx.lift,
            &fx.tail,
            CarlemanParams::new(3.0, 1e6, &fx.grid),
        );
        let base = MinimizerConfig {
            max_iter: 120,
            grad_tol: None,
            log_every: 1,
            ..Default::default()
        };
        let free = run(
            &f,
            &CandidateP::zeros(&fx.grid, &fx.kgrid),
            &base,
            &fx.grid,
            &fx.kgrid,
        )
        .unwrap();
        let balled = run_projected(
            &f,
            &CandidateP::zeros(&fx.grid, &fx.kgrid),
            &MinimizerConfig {
                radius: Radius::Ball(1e6),
                ..base
            },
            &fx.grid,
            &fx.kgrid,
        )
        .unwrap();
        for (a, b) in free.records.iter().zip(&balled.records) {
            assert!((a.j - b.j).abs() <= 1e-12 * a.j.abs().max(1.0));
            assert!((a.p_norm - b.p_norm).abs() < 1e-12);
        }
    }

    #[test]
    fn contraction_toward_the_long_run_limit() {
        // distance to a longer reference run shrinks on average over the tail
        // of the iteration
        let fx = step_fixture();
        let f = CostFunctional::new(
            &fx.grid,
            &fx.kgrid,
            &fx.lift,
            &fx.tail,
            CarlemanParams::new(3.0, 10.0, &fx.grid),
        );
        let reference = run(
            &f,
            &CandidateP::zeros(&fx.grid, &fx.kgrid),
            &MinimizerConfig {
                max_iter: 2000,
                grad_tol: None,
                log_every: 2000,
                ..Default::default()
            },
            &fx.grid,
            &fx.kgrid,
        )
        .unwrap();
        let p_ref = reference.final_p;

        let mut p = CandidateP::zeros(&fx.grid, &fx.kgrid);
        let mut dists = Vec::new();
        for _ in 0..500 {
            let g = f.gradient(&p);
            p = CandidateP::from_constrained(p.field().axpy(1e-5, &g), &fx.grid);
            let diff = p.field().axpy(1.0, p_ref.field());
            dists.push(h_norm(&diff, &fx.grid, &fx.kgrid));
        }
        let tail = &dists[400..];
        let mean_ratio: f64 =
            tail.windows(2).map(|w| w[1] / w[0]).sum::<f64>() / (tail.len() - 1) as f64;
        assert!(mean_ratio < 1.0, "mean contraction ratio {mean_ratio}");
    }

    #[test]
    fn determinism_bitwise() {
        let fx = step_fixture();
        let f = CostFunctional::new(
            &fx.grid,
            &fx.kgrid,
            &fx.lift,
            &fx.tail,
            CarlemanParams::new(3.0, 10.0, &fx.grid),
        );
        let config = MinimizerConfig {
            max_iter: 60,
            grad_tol: None,
            ..Default::default()
        };
        let a = run(
            &f,
            &CandidateP::zeros(&fx.grid, &fx.kgrid),
            &config,
            &fx.grid,
            &fx.kgrid,
        )
        .unwrap();
        let b = run(
            &f,
            &CandidateP::zeros(&fx.grid, &fx.kgrid),
            &config,
            &fx.grid,
            &fx.kgrid,
        )
        .unwrap();
        assert_eq!(a.final_p.field(), b.final_p.field());
        assert_eq!(a.records, b.records);
    }
}
