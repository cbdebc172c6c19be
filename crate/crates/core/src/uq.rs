//! Posterior summaries: mean flow, per-pixel Gaussian fits and their
//! confidence ellipses.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::grid_ops::{FlowField, GridSpec};
use crate::sampler::ChainResult;

/// Default confidence level for ellipses.
pub const DEFAULT_CONFIDENCE: f64 = 0.95;

/// Gaussian fit of the `(u, v)` draws at one pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelUQ {
    pub mu: [f64; 2],
    /// Unbiased sample covariance.
    pub sigma: [[f64; 2]; 2],
    pub count: usize,
}

/// Confidence region `{z : (z − μ)ᵀ Σ⁻¹ (z − μ) ≤ χ²₂(q)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub center: [f64; 2],
    /// `[major, minor]`, descending.
    pub semi_axes: [f64; 2],
    /// Angle of the major axis from the u-axis, in `(−π/2, π/2]`.
    pub orientation: f64,
    /// Set when Σ is (numerically) singular; the minor axis is then zero.
    pub degenerate: bool,
}

impl Ellipse {
    /// Boundary point at parameter angle `t`.
    pub fn boundary_point(&self, t: f64) -> [f64; 2] {
        let (s, c) = (libm::sin(self.orientation), libm::cos(self.orientation));
        let a = self.semi_axes[0] * libm::cos(t);
        let b = self.semi_axes[1] * libm::sin(t);
        [self.center[0] + c * a - s * b, self.center[1] + s * a + c * b]
    }
}

/// Per-pixel UQ over a whole grid at confidence level `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct UQField {
    pub grid: GridSpec,
    /// Indexed like the vectorized grid.
    pub pixels: Vec<PixelUQ>,
    pub q: f64,
}

impl UQField {
    pub fn from_chain(result: &ChainResult, grid: &GridSpec, q: f64) -> Result<Self> {
        check_level(q)?;
        let stats = &result.stats;
        if stats.pixels() != grid.len() {
            return Err(Error::GridMismatch);
        }
        let mean = stats.mean();
        let m = grid.len();
        let pixels = (0..m)
            .map(|i| {
                stats
                    .covariance(i)
                    .map(|sigma| PixelUQ {
                        mu: [mean[i], mean[i + m]],
                        sigma,
                        count: stats.count(),
                    })
                    .ok_or(Error::InsufficientData {
                        needed: 2,
                        have: stats.count(),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { grid: *grid, pixels, q })
    }

    pub fn at(&self, i: usize, j: usize) -> &PixelUQ {
        &self.pixels[self.grid.index(i, j)]
    }

    pub fn ellipse(&self, i: usize, j: usize) -> Ellipse {
        confidence_ellipse(self.at(i, j), self.q).expect("q validated at construction")
    }

    /// Mean of [`uncertainty_area`] over all pixels.
    pub fn mean_area(&self) -> f64 {
        let total: f64 = self
            .pixels
            .iter()
            .map(|p| uncertainty_area(p, self.q).expect("q validated at construction"))
            .sum();
        total / self.pixels.len() as f64
    }
}

fn check_level(q: f64) -> Result<()> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain { name: "q", value: q })
    }
}

/// Mean and unbiased covariance of 2-vectors.
pub fn pixel_stats(samples: &[[f64; 2]]) -> Result<PixelUQ> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, have: n });
    }
    if samples.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("samples"));
    }
    let nf = n as f64;
    let mu = [
        samples.iter().map(|s| s[0]).sum::<f64>() / nf,
        samples.iter().map(|s| s[1]).sum::<f64>() / nf,
    ];
    let mut sigma = [[0.0; 2]; 2];
    for s in samples {
        let d = [s[0] - mu[0], s[1] - mu[1]];
        for r in 0..2 {
            for c in 0..2 {
                sigma[r][c] += d[r] * d[c];
            }
        }
    }
    for row in &mut sigma {
        for v in row {
            *v /= nf - 1.0;
        }
    }
    Ok(PixelUQ { mu, sigma, count: n })
}

/// Quantile of the chi-squared distribution with two degrees of freedom,
/// `−2 ln(1 − q)`.
pub fn chi2_quantile_2dof(q: f64) -> Result<f64> {
    check_level(q)?;
    Ok(-2.0 * libm::log1p(-q))
}

/// Eigenvalues (descending) and major-axis angle of a symmetric 2×2 matrix.
fn sym_eigen(s: &[[f64; 2]; 2]) -> ([f64; 2], f64) {
    let (a, b, c) = (s[0][0], 0.5 * (s[0][1] + s[1][0]), s[1][1]);
    let mid = 0.5 * (a + c);
    let rad = libm::hypot(0.5 * (a - c), b);
    let theta = if b == 0.0 && a == c {
        0.0
    } else {
        0.5 * libm::atan2(2.0 * b, a - c)
    };
    // keep the range half-open at −π/2
    let theta = if theta <= -FRAC_PI_2 { theta + PI } else { theta };
    ([mid + rad, mid - rad], theta)
}

/// Confidence ellipse of a pixel fit at level `q`.
///
/// Semi-axis `i` is `√(eigenvalue_i · χ²₂(q))`. A covariance whose smaller
/// eigenvalue is at most `1e−14 ×` the larger is flagged degenerate and gets a
/// zero minor axis.
pub fn confidence_ellipse(p: &PixelUQ, q: f64) -> Result<Ellipse> {
    let chi2 = chi2_quantile_2dof(q)?;
    let ([major, minor], theta) = sym_eigen(&p.sigma);
    let degenerate = !(major > 0.0) || minor <= 1e-14 * major;
    let major = major.max(0.0);
    let minor = if degenerate { 0.0 } else { minor };
    Ok(Ellipse {
        center: p.mu,
        semi_axes: [libm::sqrt(major * chi2), libm::sqrt(minor * chi2)],
        orientation: theta,
        degenerate,
    })
}

/// Area `π χ²₂(q) √det Σ` of the confidence ellipse (zero for singular Σ).
pub fn uncertainty_area(p: &PixelUQ, q: f64) -> Result<f64> {
    let chi2 = chi2_quantile_2dof(q)?;
    let det = p.sigma[0][0] * p.sigma[1][1] - p.sigma[0][1] * p.sigma[1][0];
    Ok(PI * chi2 * libm::sqrt(det.max(0.0)))
}

/// Posterior mean flow from the post-burn-in draws of a chain.
pub fn mean_flow(result: &ChainResult, grid: &GridSpec) -> Result<FlowField> {
    let stats = &result.stats;
    if stats.count() == 0 {
        return Err(Error::InsufficientData { needed: 1, have: 0 });
    }
    FlowField::from_stacked(*grid, stats.mean())
}
