//! Linear solvers: CG, Tikhonov point estimates, the dense least-squares
//! reference, and exact draws from the Gaussian full conditional of the flow.

mod cg;
mod dense;

pub use cg::{cg_solve, CgConfig, CgOutcome, CgStatus};
pub use dense::{least_squares_dense, PINV_RCOND};

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_len, Error, Result};
use crate::grid_ops::FlowSystem;

/// Regularization weight of the Tikhonov objective `‖Ax − b‖² + α xᵀLx`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TikhonovConfig {
    alpha: f64,
}

impl TikhonovConfig {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::Domain {
                name: "alpha",
                value: alpha,
            });
        }
        Ok(Self { alpha })
    }

    #[inline]
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain { name, value })
    }
}

/// `K = w_data AᵀA + w_reg L`, applied in one sparse pass.
struct NormalOperator<'a> {
    sys: &'a FlowSystem,
    w_data: f64,
    w_reg: f64,
}

impl<'a> NormalOperator<'a> {
    fn new(sys: &'a FlowSystem, w_data: f64, w_reg: f64) -> Self {
        Self { sys, w_data, w_reg }
    }

    fn apply(&mut self, v: &[f64], out: &mut [f64]) {
        self.sys
            .normal()
            .apply_weighted(self.w_data, self.w_reg, v, out)
            .expect("operator is n × n");
    }
}

/// `(λAᵀA + δL) v` without forming the product matrix.
pub fn posterior_precision_apply(sys: &FlowSystem, lambda: f64, delta: f64, v: &[f64]) -> Result<Vec<f64>> {
    check_len(sys.n(), v.len())?;
    let mut out = vec![0.0; sys.n()];
    NormalOperator::new(sys, lambda, delta).apply(v, &mut out);
    Ok(out)
}

/// Solves the regularized normal equations `(AᵀA + αL) x = Aᵀb`.
///
/// The outcome carries the CG status; callers must check it.
pub fn tikhonov_solve(sys: &FlowSystem, cfg: &TikhonovConfig, cg: &CgConfig) -> Result<CgOutcome> {
    let mut op = NormalOperator::new(sys, 1.0, cfg.alpha);
    cg_solve(|v, o| op.apply(v, o), &sys.at_b(), cg)
}

/// Mean of the Gaussian conditional `x | λ, δ, b`: solves
/// `(λAᵀA + δL) x = λAᵀb`.
pub fn conditional_mean(sys: &FlowSystem, lambda: f64, delta: f64, cg: &CgConfig) -> Result<CgOutcome> {
    positive("lambda", lambda)?;
    positive("delta", delta)?;
    let mut rhs = sys.at_b();
    rhs.iter_mut().for_each(|r| *r *= lambda);
    let mut op = NormalOperator::new(sys, lambda, delta);
    cg_solve(|v, o| op.apply(v, o), &rhs, cg)
}

/// Perturbation `w = √λ Aᵀε₁ + √δ Cᵀε₂ ~ N(0, λAᵀA + δL)`.
///
/// `ε₁` (length `m`) is drawn before `ε₂` (length `4m`).
pub fn precision_perturbation<R: Rng + ?Sized>(sys: &FlowSystem, lambda: f64, delta: f64, rng: &mut R) -> Vec<f64> {
    let m = sys.m();
    let sl = libm::sqrt(lambda);
    let sd = libm::sqrt(delta);
    let e1: Vec<f64> = (0..m).map(|_| sl * rng.sample::<f64, _>(StandardNormal)).collect();
    let e2: Vec<f64> = (0..4 * m).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
    let mut w = vec![0.0; sys.n()];
    sys.a().matvec_transpose_add(&e1, &mut w).expect("A is m × n");
    sys.apply_ct_add(&e2, &mut w).expect("C is 4m × n");
    w
}

/// One draw from `N((λAᵀA+δL)⁻¹ λAᵀb, (λAᵀA+δL)⁻¹)` by solving the perturbed
/// system `(λAᵀA + δL) x = λAᵀb + w`.
pub fn sample_conditional_x<R: Rng + ?Sized>(
    sys: &FlowSystem,
    lambda: f64,
    delta: f64,
    cg: &CgConfig,
    rng: &mut R,
) -> Result<CgOutcome> {
    positive("lambda", lambda)?;
    positive("delta", delta)?;
    let mut rhs = precision_perturbation(sys, lambda, delta, rng);
    for (r, atb) in rhs.iter_mut().zip(sys.at_b()) {
        *r += lambda * atb;
    }
    let mut op = NormalOperator::new(sys, lambda, delta);
    cg_solve(|v, o| op.apply(v, o), &rhs, cg)
}
