//! Experiment configuration: one TOML file with `key = value` sections, no
//! environment variables. Defaults reproduce the reference simulation setup
//! (51-node grid at 0.02, band [0.5, 1.5] at 0.1, source at -1, contrast-7
//! step at 0.3, 5% noise, λ = 3, γ = 1e-5, 5000 iterations).

use serde::{Deserialize, Serialize};

use scatter1d::forward::StepTarget;
use scatter1d::grid::{SpatialGrid, WavenumberGrid};
use scatter1d::minimize::Radius;
use scatter1d::pipeline::{AlphaRule, InversionSettings};
use scatter1d::reconstruct::ContrastMode;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub n_x: usize,
    pub x0_source: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            n_x: 51,
            x0_source: -1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WavenumberSection {
    pub k_lo: f64,
    pub k_hi: f64,
    pub n_k: usize,
}

impl Default for WavenumberSection {
    fn default() -> Self {
        Self {
            k_lo: 0.5,
            k_hi: 1.5,
            n_k: 11,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForwardSection {
    /// Trapezoidal panels of the data-generation quadrature.
    pub quad_n: usize,
    /// Range of the spectrum sweep written by `simulate`.
    pub sweep_k_max: f64,
}

impl Default for ForwardSection {
    fn default() -> Self {
        Self {
            quad_n: 2000,
            sweep_k_max: 3.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetSection {
    pub x_loc: f64,
    pub d: f64,
    pub contrast: f64,
}

impl Default for TargetSection {
    fn default() -> Self {
        Self {
            x_loc: 0.3,
            d: 0.1,
            contrast: 7.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub path: String,
    #[serde(default = "one")]
    pub calibration: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub level: f64,
    pub seed: u64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            level: 0.05,
            seed: 42,
        }
    }
}

/// `alpha = "delta-rule"` or a positive number.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaChoice {
    Rule(String),
    Fixed(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TailSection {
    pub alpha: AlphaChoice,
}

impl Default for TailSection {
    fn default() -> Self {
        Self {
            alpha: AlphaChoice::Rule("delta-rule".into()),
        }
    }
}

/// `radius = "unbounded"` or a positive number.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RadiusChoice {
    Named(String),
    Ball(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CarlemanSection {
    pub lambda: f64,
    pub radius: RadiusChoice,
}

impl Default for CarlemanSection {
    fn default() -> Self {
        Self {
            lambda: 3.0,
            radius: RadiusChoice::Named("unbounded".into()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinimizerSection {
    pub gamma: f64,
    pub max_iter: usize,
    pub grad_tol: f64,
    pub log_every: usize,
}

impl Default for MinimizerSection {
    fn default() -> Self {
        Self {
            gamma: 1e-5,
            max_iter: 5000,
            grad_tol: 1e-9,
            log_every: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructionSection {
    /// "above-unity" or "below-unity".
    pub mode: String,
    pub c_bckgr: [f64; 2],
}

impl Default for ReconstructionSection {
    fn default() -> Self {
        Self {
            mode: "above-unity".into(),
            c_bckgr: [1.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridSection,
    pub wavenumbers: WavenumberSection,
    pub forward: ForwardSection,
    pub target: TargetSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<DataSection>,
    pub noise: NoiseSection,
    pub tail: TailSection,
    pub carleman: CarlemanSection,
    pub minimizer: MinimizerSection,
    pub reconstruction: ReconstructionSection,
    pub output: OutputSection,
}

/// Field-path validation error (exit code 2).
#[derive(Debug)]
pub struct ValidationError {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for ValidationError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error at `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ValidationError {}

impl ExperimentConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, Box<dyn std::error::Error>> {
        let text = std::fs::read_to_string(path)?;
        let config: Self = toml::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        let fail = |field: &str, message: String| {
            Err(ValidationError {
                field: field.into(),
                message,
            })
        };
        if self.grid.n_x < 5 {
            return fail(
                "grid.n_x",
                format!("need at least 5 nodes, got {}", self.grid.n_x),
            );
        }
        if self.grid.x0_source >= 0.0 {
            return fail("grid.x0_source", "source must be negative".into());
        }
        if !(self.wavenumbers.k_lo > 0.0 && self.wavenumbers.k_hi > self.wavenumbers.k_lo) {
            return fail("wavenumbers", "need 0 < k_lo < k_hi".into());
        }
        if self.wavenumbers.n_k < 2 {
            return fail("wavenumbers.n_k", "need at least 2 nodes".into());
        }
        if self.forward.quad_n < self.grid.n_x {
            return fail("forward.quad_n", "must be at least grid.n_x".into());
        }
        if self.target.contrast <= 0.0 {
            return fail("target.contrast", "must be positive".into());
        }
        let (a, b) = (
            self.target.x_loc - 0.5 * self.target.d,
            self.target.x_loc + 0.5 * self.target.d,
        );
        if !(a > 0.0 && b < 1.0) {
            return fail(
                "target",
                format!("inclusion ({a}, {b}) must sit inside (0,1)"),
            );
        }
        if !(0.0..=1.0).contains(&self.noise.level) {
            return fail("noise.level", "must be in [0, 1]".into());
        }
        if let AlphaChoice::Rule(name) = &self.tail.alpha {
            if name != "delta-rule" {
                return fail(
                    "tail.alpha",
                    format!("expected \"delta-rule\" or a number, got \"{name}\""),
                );
            }
        }
        if let AlphaChoice::Fixed(a) = self.tail.alpha {
            if a <= 0.0 {
                return fail("tail.alpha", "must be positive".into());
            }
        }
        if self.carleman.lambda < 0.0 {
            return fail("carleman.lambda", "must be nonnegative".into());
        }
        if let RadiusChoice::Named(name) = &self.carleman.radius {
            if name != "unbounded" {
                return fail(
                    "carleman.radius",
                    format!("expected \"unbounded\" or a number, got \"{name}\""),
                );
            }
        }
        if let RadiusChoice::Ball(r) = self.carleman.radius {
            if r <= 0.0 {
                return fail("carleman.radius", "must be positive".into());
            }
        }
        if self.minimizer.gamma <= 0.0 {
            return fail("minimizer.gamma", "must be positive".into());
        }
        if self.minimizer.max_iter == 0 {
            return fail("minimizer.max_iter", "must be at least 1".into());
        }
        match self.reconstruction.mode.as_str() {
            "above-unity" | "below-unity" => {}
            other => {
                return fail(
                    "reconstruction.mode",
                    format!("expected \"above-unity\" or \"below-unity\", got \"{other}\""),
                )
            }
        }
        if self.reconstruction.c_bckgr[0] > self.reconstruction.c_bckgr[1] {
            return fail(
                "reconstruction.c_bckgr",
                "interval endpoints out of order".into(),
            );
        }
        Ok(())
    }

    pub fn spatial_grid(&self) -> SpatialGrid {
        SpatialGrid::new(self.grid.n_x, self.grid.x0_source)
    }

    pub fn wavenumber_grid(&self) -> WavenumberGrid {
        WavenumberGrid::new(
            self.wavenumbers.k_lo,
            self.wavenumbers.k_hi,
            self.wavenumbers.n_k,
        )
    }

    pub fn step_target(&self) -> StepTarget {
        StepTarget::new(self.target.x_loc, self.target.d, self.target.contrast)
    }

    pub fn contrast_mode(&self) -> ContrastMode {
        match self.reconstruction.mode.as_str() {
            "below-unity" => ContrastMode::BelowUnity,
            _ => ContrastMode::AboveUnity,
        }
    }

    pub fn inversion_settings(&self) -> InversionSettings {
        InversionSettings {
            alpha: match self.tail.alpha {
                AlphaChoice::Fixed(a) => AlphaRule::Fixed(a),
                AlphaChoice::Rule(_) => AlphaRule::FromNoise,
            },
            lambda: self.carleman.lambda,
            gamma: self.minimizer.gamma,
            max_iter: self.minimizer.max_iter,
            grad_tol: if self.minimizer.grad_tol > 0.0 {
                Some(self.minimizer.grad_tol)
            } else {
                None
            },
            log_every: self.minimizer.log_every.max(1),
            radius: match self.carleman.radius {
                RadiusChoice::Ball(r) => Radius::Ball(r),
                RadiusChoice::Named(_) => Radius::Unbounded,
            },
            mode: self.contrast_mode(),
            c_bckgr: (
                self.reconstruction.c_bckgr[0],
                self.reconstruction.c_bckgr[1],
            ),
        }
    }

    /// Full resolved config as TOML, used for the reproducibility headers.
    pub fn echo(&self) -> String {
        toml::to_string_pretty(self).unwrap_or_else(|_| "<unserializable>".into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_reproduce_reference_setup() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        let g = c.spatial_grid();
        assert_eq!(g.n_x(), 51);
        assert!((g.h_x() - 0.02).abs() < 1e-15);
        assert_eq!(g.x0_source(), -1.0);
        let kg = c.wavenumber_grid();
        assert_eq!((kg.k_lo(), kg.k_hi(), kg.n_k()), (0.5, 1.5, 11));
        assert!((kg.h_k() - 0.1).abs() < 1e-15);
        assert_eq!(c.noise.level, 0.05);
        assert_eq!(c.carleman.lambda, 3.0);
        assert_eq!(c.minimizer.gamma, 1e-5);
        assert_eq!(c.minimizer.max_iter, 5000);
    }

    #[test]
    fn parses_partial_toml_and_validates() {
        let c: ExperimentConfig = toml::from_str(
            r#"
            [target]
            x_loc = 0.2
            d = 0.1
            contrast = 5.0

            [carleman]
            lambda = 2.0
            radius = 10.0

            [tail]
            alpha = 1e-6
            "#,
        )
        .unwrap();
        c.validate().unwrap();
        assert!(matches!(c.tail.alpha, AlphaChoice::Fixed(_)));
        assert!(matches!(c.carleman.radius, RadiusChoice::Ball(_)));

        let bad: ExperimentConfig =
            toml::from_str("[target]\nx_loc = 0.01\nd = 0.1\ncontrast = 7.0").unwrap();
        let err = bad.validate().unwrap_err();
        assert_eq!(err.field, "target");
    }

    #[test]
    fn rejects_unknown_fields() {
        let parsed: Result<ExperimentConfig, _> = toml::from_str("[grid]\nnx = 51");
        assert!(parsed.is_err());
    }
}
