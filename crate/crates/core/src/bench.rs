//! Benchmark flow fields, synthetic image pairs and evaluation metrics.

use alloc::vec::Vec;
use core::f64::consts::PI;

use libm::{cos, sin, sqrt};
use rand::Rng;
use rand_distr::{Open01, StandardNormal};

use crate::error::{Error, Result};
use crate::grid_ops::{image_gradients, FlowField, GridSpec, ImageField};

/// One of the five analytic benchmark flows on `[-1, 1]²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FlowSpec(u8);

impl FlowSpec {
    pub const ALL: [FlowSpec; 5] = [FlowSpec(1), FlowSpec(2), FlowSpec(3), FlowSpec(4), FlowSpec(5)];

    pub fn new(id: u8) -> Result<Self> {
        if (1..=5).contains(&id) {
            Ok(Self(id))
        } else {
            Err(Error::Domain {
                name: "flow id",
                value: id as f64,
            })
        }
    }

    #[inline]
    pub fn id(&self) -> u8 {
        self.0
    }

    /// `(U(x, y), V(x, y))`.
    pub fn eval(&self, x: f64, y: f64) -> (f64, f64) {
        match self.0 {
            1 => (x, y),
            2 => (-y, x),
            3 => (y, sin(x)),
            4 => (
                -PI * sin(0.5 * PI * x) * cos(0.5 * PI * y),
                PI * cos(0.5 * PI * x) * sin(0.5 * PI * y),
            ),
            5 => (-PI * sin(PI * x) * cos(PI * y), PI * cos(PI * x) * sin(PI * y)),
            _ => unreachable!("validated in FlowSpec::new"),
        }
    }

    /// The flow sampled on `grid`.
    pub fn field(&self, grid: &GridSpec) -> FlowField {
        FlowField::from_fn(*grid, |x, y| self.eval(x, y))
    }
}

/// Analytic evaluation of benchmark flow `id` at `(x, y)`.
pub fn eval_flow_field(id: u8, x: f64, y: f64) -> Result<(f64, f64)> {
    Ok(FlowSpec::new(id)?.eval(x, y))
}

/// Additive per-pixel noise model, parameterized by its standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSpec {
    None,
    Gaussian {
        sigma: f64,
    },
    /// Uniform on `[−σ√3, σ√3]`.
    Uniform {
        sigma: f64,
    },
    /// Laplace with scale `σ/√2`.
    Laplace {
        sigma: f64,
    },
}

impl NoiseSpec {
    pub fn sigma(&self) -> f64 {
        match *self {
            NoiseSpec::None => 0.0,
            NoiseSpec::Gaussian { sigma } | NoiseSpec::Uniform { sigma } | NoiseSpec::Laplace { sigma } => sigma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.sigma();
        if s >= 0.0 && s.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain {
                name: "sigma",
                value: s,
            })
        }
    }

    /// One noise value.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseSpec::None => 0.0,
            NoiseSpec::Gaussian { sigma } => sigma * rng.sample::<f64, _>(StandardNormal),
            NoiseSpec::Uniform { sigma } => {
                let u: f64 = rng.sample(Open01);
                sigma * sqrt(3.0) * (2.0 * u - 1.0)
            }
            NoiseSpec::Laplace { sigma } => {
                let u: f64 = rng.sample::<f64, _>(Open01) - 0.5;
                let scale = sigma / sqrt(2.0);
                -scale * u.signum() * libm::log(1.0 - 2.0 * u.abs())
            }
        }
    }
}

/// Synthetic first image `F(x, y) = ½[cos(πx) cos(πy) + 1]`.
pub fn make_first_image(grid: &GridSpec) -> ImageField {
    ImageField::from_fn(*grid, |x, y| 0.5 * (cos(PI * x) * cos(PI * y) + 1.0))
}

/// Linearized advection `g = f − f_x⊙u − f_y⊙v + η` with forward-difference
/// gradients of `f`. No clamping is applied.
pub fn advect_image<R: Rng + ?Sized>(
    f: &ImageField,
    flow: &FlowField,
    noise: &NoiseSpec,
    rng: &mut R,
) -> Result<ImageField> {
    noise.validate()?;
    advect(f, flow, || noise.draw(rng))
}

/// Noise-free advection of `f` by `flow` (the reconstructed second image).
pub fn reconstruct_second_image(f: &ImageField, flow: &FlowField) -> Result<ImageField> {
    advect(f, flow, || 0.0)
}

fn advect(f: &ImageField, flow: &FlowField, mut noise: impl FnMut() -> f64) -> Result<ImageField> {
    if f.grid() != flow.grid() {
        return Err(Error::GridMismatch);
    }
    let (fx, fy) = image_gradients(f);
    let fv = f.vectorize();
    let (u, v) = (flow.u().as_slice(), flow.v().as_slice());
    let g: Vec<f64> = (0..fv.len())
        .map(|k| fv[k] - fx[k] * u[k] - fy[k] * v[k] + noise())
        .collect();
    ImageField::from_vec(*f.grid(), &g)
}

/// Average endpoint error `mean ‖(u, v) − (u*, v*)‖`.
pub fn endpoint_error(est: &FlowField, truth: &FlowField) -> Result<f64> {
    if est.grid() != truth.grid() {
        return Err(Error::GridMismatch);
    }
    let m = est.grid().len();
    let (eu, ev) = (est.u().as_slice(), est.v().as_slice());
    let (tu, tv) = (truth.u().as_slice(), truth.v().as_slice());
    let total: f64 = (0..m).map(|k| libm::hypot(eu[k] - tu[k], ev[k] - tv[k])).sum();
    Ok(total / m as f64)
}

/// Root-mean-square difference of two images on the same grid.
pub fn rmse(a: &ImageField, b: &ImageField) -> Result<f64> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch);
    }
    let (x, y) = (a.data().as_slice(), b.data().as_slice());
    let ss: f64 = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
    Ok(sqrt(ss / x.len() as f64))
}

/// Evaluation numbers for one case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// Average endpoint error, if the true flow is known.
    pub aee: Option<f64>,
    pub rmse_g: f64,
    pub rmse_gbar: Option<f64>,
}

/// One pixel of the Ĝ-vs-G / Ĝ-vs-Ḡ scatter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterPoint {
    pub pixel: usize,
    pub ghat: f64,
    pub g: f64,
    pub gbar: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageComparison {
    pub rmse_g: f64,
    pub rmse_gbar: f64,
    pub scatter: Vec<ScatterPoint>,
}

/// Compares a reconstructed image against the noisy and noise-free second images.
pub fn compare_images(g_hat: &ImageField, g_noisy: &ImageField, g_true: &ImageField) -> Result<ImageComparison> {
    let rmse_g = rmse(g_hat, g_noisy)?;
    let rmse_gbar = rmse(g_hat, g_true)?;
    let (h, g, t) = (
        g_hat.data().as_slice(),
        g_noisy.data().as_slice(),
        g_true.data().as_slice(),
    );
    let scatter = (0..h.len())
        .map(|k| ScatterPoint {
            pixel: k,
            ghat: h[k],
            g: g[k],
            gbar: t[k],
        })
        .collect();
    Ok(ImageComparison {
        rmse_g,
        rmse_gbar,
        scatter,
    })
}

/// A generated image pair with known flow.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchCase {
    pub f: ImageField,
    pub flow: FlowSpec,
    pub noise: NoiseSpec,
    pub truth: FlowField,
    /// Noisy second image.
    pub g: ImageField,
    /// Noise-free second image.
    pub gbar: ImageField,
}

impl BenchCase {
    /// Advects `f` by `flow`; `g` and `gbar` differ only in the noise term.
    pub fn from_first_image<R: Rng + ?Sized>(
        f: ImageField,
        flow: FlowSpec,
        noise: NoiseSpec,
        rng: &mut R,
    ) -> Result<Self> {
        let truth = flow.field(f.grid());
        let gbar = reconstruct_second_image(&f, &truth)?;
        let g = advect_image(&f, &truth, &noise, rng)?;
        Ok(Self {
            f,
            flow,
            noise,
            truth,
            g,
            gbar,
        })
    }

    /// Synthetic case on the cosine test image.
    pub fn synthetic<R: Rng + ?Sized>(grid: &GridSpec, flow: FlowSpec, noise: NoiseSpec, rng: &mut R) -> Result<Self> {
        Self::from_first_image(make_first_image(grid), flow, noise, rng)
    }

    pub fn grid(&self) -> &GridSpec {
        self.f.grid()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn flow_definitions() {
        assert_eq!(eval_flow_field(1, 0.5, -0.5).unwrap(), (0.5, -0.5));
        assert_eq!(eval_flow_field(2, 1.0, 0.0).unwrap(), (0.0, 1.0));
        let (u, v) = eval_flow_field(4, 0.0, 0.0).unwrap();
        assert_eq!((u.abs(), v.abs()), (0.0, 0.0));
        let (u, v) = eval_flow_field(3, 0.3, 0.7).unwrap();
        assert_eq!((u, v), (0.7, sin(0.3)));
        let (u, v) = eval_flow_field(5, 0.5, 0.0).unwrap();
        assert!((u + PI).abs() < 1e-15 && v.abs() < 1e-15);
        assert!(eval_flow_field(0, 0.0, 0.0).is_err());
        assert!(eval_flow_field(6, 0.0, 0.0).is_err());
    }

    #[test]
    fn first_image_values() {
        let grid = GridSpec::square(31).unwrap();
        let f = make_first_image(&grid);
        assert!((f.get(15, 15) - 1.0).abs() < 1e-15);
        assert!(f.get(0, 15).abs() < 1e-15);
        assert!(f.get(30, 15).abs() < 1e-15);
        let g30 = make_first_image(&GridSpec::square(30).unwrap());
        assert!(g30.data().min() >= 0.0 && g30.data().max() <= 1.0);
    }

    #[test]
    fn zero_flow_leaves_image_unchanged() {
        let grid = GridSpec::square(8).unwrap();
        let f = make_first_image(&grid);
        let g = reconstruct_second_image(&f, &FlowField::zeros(grid)).unwrap();
        assert_eq!(g, f);
    }

    #[test]
    fn constant_image_is_not_advected() {
        let grid = GridSpec::square(8).unwrap();
        let f = ImageField::constant(grid, 0.4);
        let g = reconstruct_second_image(&f, &FlowSpec::new(5).unwrap().field(&grid)).unwrap();
        assert_eq!(g, f);
    }

    #[test]
    fn advection_matches_scalar_loop() {
        let grid = GridSpec::square(30).unwrap();
        let f = make_first_image(&grid);
        let flow = FlowSpec::new(1).unwrap().field(&grid);
        let g = reconstruct_second_image(&f, &flow).unwrap();
        let (dx, dy) = (grid.dx(), grid.dy());
        for j in 0..30 {
            for i in 0..30 {
                let fx = if i < 29 {
                    f.get(i + 1, j) - f.get(i, j)
                } else {
                    f.get(29, j) - f.get(28, j)
                } / dx;
                let fy = if j < 29 {
                    f.get(i, j + 1) - f.get(i, j)
                } else {
                    f.get(i, 29) - f.get(i, 28)
                } / dy;
                let expected = f.get(i, j) - fx * grid.x(i) - fy * grid.y(j);
                assert!((g.get(i, j) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn noise_kinds_match_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 200_000;
        for noise in [
            NoiseSpec::Gaussian { sigma: 0.05 },
            NoiseSpec::Uniform { sigma: 0.05 },
            NoiseSpec::Laplace { sigma: 0.05 },
        ] {
            let xs: Vec<f64> = (0..n).map(|_| noise.draw(&mut rng)).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let sd = sqrt(xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64);
            assert!(mean.abs() < 1e-3, "{noise:?} mean {mean}");
            assert!((sd / 0.05 - 1.0).abs() < 0.02, "{noise:?} sd {sd}");
        }
        assert!(matches!(
            NoiseSpec::Gaussian { sigma: -1.0 }.validate(),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn endpoint_error_cases() {
        let grid = GridSpec::square(6).unwrap();
        let truth = FlowSpec::new(3).unwrap().field(&grid);
        assert_eq!(endpoint_error(&truth, &truth).unwrap(), 0.0);
        let shifted = FlowField::from_fn(grid, |x, y| {
            let (u, v) = FlowSpec::new(3).unwrap().eval(x, y);
            (u + 1.0, v)
        });
        assert!((endpoint_error(&shifted, &truth).unwrap() - 1.0).abs() < 1e-14);
        let other = FlowField::zeros(GridSpec::square(5).unwrap());
        assert_eq!(endpoint_error(&other, &truth).unwrap_err(), Error::GridMismatch);
    }

    #[test]
    fn rmse_cases() {
        let grid = GridSpec::square(5).unwrap();
        let a = make_first_image(&grid);
        let b = ImageField::from_fn(grid, |x, y| 0.5 * (cos(PI * x) * cos(PI * y) + 1.0) - 0.25);
        let c = compare_images(&a, &a, &b).unwrap();
        assert_eq!(c.rmse_g, 0.0);
        assert!((c.rmse_gbar - 0.25).abs() < 1e-14);
        assert_eq!(c.scatter.len(), 25);
        assert_eq!(c.scatter[7].ghat, a.vectorize()[7]);
    }

    #[test]
    fn bench_case_differs_only_by_noise() {
        let grid = GridSpec::square(10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let case = BenchCase::synthetic(&grid, FlowSpec::new(2).unwrap(), NoiseSpec::None, &mut rng).unwrap();
        assert_eq!(case.g, case.gbar);
        let noisy = BenchCase::synthetic(
            &grid,
            FlowSpec::new(2).unwrap(),
            NoiseSpec::Gaussian { sigma: 0.02 },
            &mut rng,
        )
        .unwrap();
        assert_eq!(noisy.gbar, case.gbar);
        assert_ne!(noisy.g, noisy.gbar);
    }
}
