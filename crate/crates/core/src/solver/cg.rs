//! Unpreconditioned conjugate gradients for symmetric positive (semi)definite
//! operators given only through their action.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};

/// Stopping rule and start vector for [`cg_solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct CgConfig {
    /// Relative residual tolerance `‖A x − r‖ / ‖r‖`.
    pub tol: f64,
    pub max_iter: usize,
    /// Start vector; `None` means all zeros.
    pub x0: Option<Vec<f64>>,
    /// Keep the relative residual of every iteration in [`CgOutcome::history`].
    pub record_history: bool,
}

impl Default for CgConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 500,
            x0: None,
            record_history: false,
        }
    }
}

impl CgConfig {
    pub fn new(tol: f64, max_iter: usize) -> Result<Self> {
        let cfg = Self {
            tol,
            max_iter,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Domain {
                name: "tol",
                value: self.tol,
            });
        }
        if self.max_iter == 0 {
            return Err(Error::Domain {
                name: "max_iter",
                value: 0.0,
            });
        }
        Ok(())
    }
}

/// Why the iteration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgStatus {
    Converged,
    /// Hit `max_iter` before reaching `tol`.
    MaxIterations,
    /// A search direction had non-positive curvature; the operator is singular
    /// (or indefinite) on the current Krylov space.
    Stagnated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Relative residual of the returned iterate.
    pub residual: f64,
    pub status: CgStatus,
    /// Relative residual after each iteration, index 0 being the start vector.
    pub history: Vec<f64>,
}

impl CgOutcome {
    #[inline]
    pub fn converged(&self) -> bool {
        self.status == CgStatus::Converged
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Solves `K x = rhs` where `apply(v, out)` writes `K v` into `out`.
///
/// A zero right-hand side returns the zero vector without iterating.
/// Non-finite intermediate values raise [`Error::Breakdown`].
pub fn cg_solve<F>(mut apply: F, rhs: &[f64], cfg: &CgConfig) -> Result<CgOutcome>
where
    F: FnMut(&[f64], &mut [f64]),
{
    cfg.validate()?;
    let n = rhs.len();
    let rhs_norm = libm::sqrt(dot(rhs, rhs));
    if !rhs_norm.is_finite() {
        return Err(Error::Breakdown { iteration: 0 });
    }
    if rhs_norm == 0.0 {
        return Ok(CgOutcome {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
            status: CgStatus::Converged,
            history: if cfg.record_history { vec![0.0] } else { Vec::new() },
        });
    }

    let mut x = match &cfg.x0 {
        Some(x0) => {
            check_len(n, x0.len())?;
            x0.clone()
        }
        None => vec![0.0; n],
    };
    let mut ap = vec![0.0; n];
    let mut r = rhs.to_vec();
    if cfg.x0.is_some() {
        apply(&x, &mut ap);
        r.iter_mut().zip(&ap).for_each(|(ri, a)| *ri -= a);
    }
    let mut p = r.clone();
    let mut rs = dot(&r, &r);
    let mut history = Vec::new();
    if cfg.record_history {
        history.push(libm::sqrt(rs) / rhs_norm);
    }

    let mut status = CgStatus::MaxIterations;
    let mut iterations = 0;
    if libm::sqrt(rs) <= cfg.tol * rhs_norm {
        status = CgStatus::Converged;
    } else {
        for it in 1..=cfg.max_iter {
            apply(&p, &mut ap);
            let curvature = dot(&p, &ap);
            if !curvature.is_finite() {
                return Err(Error::Breakdown { iteration: it });
            }
            if curvature <= f64::EPSILON * f64::EPSILON * dot(&p, &p) {
                status = CgStatus::Stagnated;
                break;
            }
            let step = rs / curvature;
            x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += step * pi);
            r.iter_mut().zip(&ap).for_each(|(ri, a)| *ri -= step * a);
            let rs_new = dot(&r, &r);
            if !rs_new.is_finite() {
                return Err(Error::Breakdown { iteration: it });
            }
            iterations = it;
            if cfg.record_history {
                history.push(libm::sqrt(rs_new) / rhs_norm);
            }
            if libm::sqrt(rs_new) <= cfg.tol * rhs_norm {
                status = CgStatus::Converged;
                break;
            }
            let beta = rs_new / rs;
            p.iter_mut().zip(&r).for_each(|(pi, ri)| *pi = ri + beta * *pi);
            rs = rs_new;
        }
    }

    Ok(CgOutcome {
        residual: libm::sqrt(dot(&r, &r)) / rhs_norm,
        x,
        iterations,
        status,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_converges_in_one_step() {
        let r = [1.0, -2.0, 0.5];
        let out = cg_solve(|v, o| o.copy_from_slice(v), &r, &CgConfig::default()).unwrap();
        assert!(out.converged());
        assert_eq!(out.iterations, 1);
        assert_eq!(out.x, r.to_vec());
    }

    #[test]
    fn diagonal_solve() {
        let d = [2.0, 4.0];
        let apply = |v: &[f64], o: &mut [f64]| {
            o[0] = d[0] * v[0];
            o[1] = d[1] * v[1];
        };
        let out = cg_solve(apply, &[2.0, 4.0], &CgConfig::default()).unwrap();
        assert!(out.converged());
        assert!((out.x[0] - 1.0).abs() < 1e-12 && (out.x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_rhs_short_circuits() {
        let out = cg_solve(|_, _| panic!("must not apply"), &[0.0; 4], &CgConfig::default()).unwrap();
        assert_eq!(out.x, vec![0.0; 4]);
        assert_eq!(out.iterations, 0);
        assert!(out.converged());
    }

    #[test]
    fn nan_is_a_breakdown() {
        let err = cg_solve(|_, o| o.fill(f64::NAN), &[1.0, 1.0], &CgConfig::default()).unwrap_err();
        assert_eq!(err, Error::Breakdown { iteration: 1 });
    }

    #[test]
    fn singular_direction_is_flagged() {
        // K = diag(1, 0) with rhs outside the range: no solution exists
        let apply = |v: &[f64], o: &mut [f64]| {
            o[0] = v[0];
            o[1] = 0.0;
        };
        let out = cg_solve(apply, &[1.0, 1.0], &CgConfig::default()).unwrap();
        assert_eq!(out.status, CgStatus::Stagnated);
        assert!(out.x.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn iteration_cap_is_reported() {
        let apply = |v: &[f64], o: &mut [f64]| {
            for (i, (oi, vi)) in o.iter_mut().zip(v).enumerate() {
                *oi = (1.0 + i as f64) * vi;
            }
        };
        let cfg = CgConfig {
            max_iter: 2,
            ..CgConfig::default()
        };
        let out = cg_solve(apply, &[1.0; 6], &cfg).unwrap();
        assert_eq!(out.status, CgStatus::MaxIterations);
        assert_eq!(out.iterations, 2);
        assert!(out.residual > cfg.tol);
    }

    #[test]
    fn invalid_config_is_rejected() {
        assert!(CgConfig::new(0.0, 10).is_err());
        assert!(CgConfig::new(1e-6, 0).is_err());
        assert!(CgConfig::new(-1.0, 10).is_err());
    }

    #[test]
    fn warm_start_is_honoured() {
        let cfg = CgConfig {
            x0: Some(vec![1.0, 1.0]),
            ..CgConfig::default()
        };
        let out = cg_solve(|v, o| o.copy_from_slice(v), &[1.0, 1.0], &cfg).unwrap();
        assert_eq!(out.iterations, 0);
        assert!(out.converged());
        let bad = CgConfig {
            x0: Some(vec![1.0]),
            ..CgConfig::default()
        };
        assert!(cg_solve(|v, o| o.copy_from_slice(v), &[1.0, 1.0], &bad).is_err());
    }
}
