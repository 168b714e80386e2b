//! Dense two-frame motion estimation by polynomial expansion.
//!
//! Each frame is approximated around every pixel by a quadratic
//! `f(x) ~ x^T A x + b^T x + c`. A translation `d` between two such signals
//! shows up as `b2 = b1 - 2 A d`, so the displacement can be read off the
//! expansion coefficients. Locally this becomes a small weighted least-squares
//! problem per pixel, refined iteratively and coarse-to-fine.

mod estimate;
mod poly;
mod pyramid;
mod system;

pub use estimate::{estimate_flow, upscale_flow, FlowEstimator};
pub use poly::{poly_expand, poly_expand_with_kernel};
pub use pyramid::gaussian_pyramid;
pub use system::{build_system, build_system_weighted, residual, solve_point};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetric 2x2 matrix `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub const ZERO: Sym2 = Sym2 {
        xx: 0.0,
        xy: 0.0,
        yy: 0.0,
    };
    pub const IDENTITY: Sym2 = Sym2 {
        xx: 1.0,
        xy: 0.0,
        yy: 1.0,
    };

    pub fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Self { xx, xy, yy }
    }

    #[inline]
    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    #[inline]
    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    #[inline]
    pub fn mul_vec(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.xx * v[0] + self.xy * v[1],
            self.xy * v[0] + self.yy * v[1],
        ]
    }

    /// `A^T A`, which is `A^2` for a symmetric matrix.
    #[inline]
    pub fn gram(&self) -> Sym2 {
        Sym2 {
            xx: self.xx * self.xx + self.xy * self.xy,
            xy: self.xy * (self.xx + self.yy),
            yy: self.xy * self.xy + self.yy * self.yy,
        }
    }
}

/// Quadratic expansion coefficients at one pixel, in pixel-centered
/// coordinates (`x` to the right, `y` down).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PolyCoeffs {
    pub a: Sym2,
    pub b: [f64; 2],
    pub c: f64,
}

/// Per-pixel expansion of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyField {
    pub width: usize,
    pub height: usize,
    pub coeffs: Vec<PolyCoeffs>,
}

impl PolyField {
    #[inline]
    pub fn at(&self, x: usize, y: usize) -> &PolyCoeffs {
        &self.coeffs[y * self.width + x]
    }
}

/// Dense displacement field from frame 1 to frame 2 (`+x` right, `+y` down),
/// with the minimized residual and a validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub width: usize,
    pub height: usize,
    pub d: Vec<[f64; 2]>,
    pub e: Vec<f64>,
    pub valid: Vec<bool>,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            d: vec![[0.0; 2]; width * height],
            e: vec![0.0; width * height],
            valid: vec![true; width * height],
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> [f64; 2] {
        self.d[y * self.width + x]
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.valid[y * self.width + x]
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }
}

/// Aggregated normal equations `G d = h` per pixel, plus the weighted sum of
/// `|delta b|^2` needed for the residual.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalSystem {
    pub width: usize,
    pub height: usize,
    pub g: Vec<Sym2>,
    pub h: Vec<[f64; 2]>,
    pub bb: Vec<f64>,
    /// False where the prior displacement pointed outside the image.
    pub valid: Vec<bool>,
}

/// Tuning of the estimator. Both weight functions are truncated Gaussians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowParams {
    pub expansion_sigma: f64,
    pub expansion_radius: usize,
    pub neighborhood_sigma: f64,
    pub neighborhood_radius: usize,
    pub pyramid_levels: usize,
    pub pyramid_scale: f64,
    pub iterations_per_level: usize,
    pub singularity_epsilon: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            expansion_sigma: 1.5,
            expansion_radius: 5,
            neighborhood_sigma: 2.4,
            neighborhood_radius: 7,
            pyramid_levels: 3,
            pyramid_scale: 0.5,
            iterations_per_level: 3,
            singularity_epsilon: 1e-6,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.expansion_radius < 1 {
            return bad("expansion_radius must be >= 1");
        }
        if !(self.expansion_sigma > 0.0 && self.neighborhood_sigma > 0.0) {
            return bad("sigmas must be positive");
        }
        if !(self.pyramid_scale > 0.0 && self.pyramid_scale < 1.0) {
            return bad("pyramid_scale must lie in (0, 1)");
        }
        if self.pyramid_levels < 1 || self.iterations_per_level < 1 {
            return bad("pyramid_levels and iterations_per_level must be >= 1");
        }
        if !(self.singularity_epsilon >= 0.0) {
            return bad("singularity_epsilon must be nonnegative");
        }
        Ok(())
    }
}
