//! Regression structure `η = f(x; β)`: values, Jacobian and per-observation
//! Hessians, partitioned as β = (β₁, β₂) with the nuisance block first.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // inherent float methods exist only when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{check_full_column_rank, symmetrize};

/// User-supplied nonlinear predictor evaluated one covariate row at a time.
pub trait CustomPredictor: Send + Sync {
    fn n_params(&self) -> usize;
    fn eta(&self, x: &[f64], beta: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], beta: &[f64]) -> Vec<f64>;
    fn hessian(&self, x: &[f64], beta: &[f64]) -> DMatrix<f64>;
}

#[derive(Clone)]
pub enum Predictor {
    /// `η = Xβ`.
    Linear,
    /// `η = β₁ + β₂ exp(β₃ x)` on a single covariate column.
    ExpCurve,
    Custom(Arc<dyn CustomPredictor>),
}

impl fmt::Debug for Predictor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Predictor {
    pub fn name(&self) -> &'static str {
        match self {
            Predictor::Linear => "linear",
            Predictor::ExpCurve => "expcurve",
            Predictor::Custom(_) => "custom",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RegressionSpec {
    pub predictor: Predictor,
    pub covariates: DMatrix<f64>,
    /// Size of the nuisance block β₁.
    pub q: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignEval {
    pub eta: DVector<f64>,
    pub jac: DMatrix<f64>,
    /// `None` for linear predictors, whose Hessians all vanish.
    pub hess: Option<Vec<DMatrix<f64>>>,
    pub q: usize,
}

impl RegressionSpec {
    pub fn new(predictor: Predictor, covariates: DMatrix<f64>, q: usize) -> Result<Self> {
        let spec = RegressionSpec {
            predictor,
            covariates,
            q,
        };
        if matches!(spec.predictor, Predictor::ExpCurve) && spec.covariates.ncols() != 1 {
            return Err(Error::Dimension(format!(
                "expcurve needs exactly one covariate column, got {}",
                spec.covariates.ncols()
            )));
        }
        let p = spec.p();
        if p == 0 || q >= p {
            return Err(Error::Contract(format!("need 0 <= q < p, got q = {q}, p = {p}")));
        }
        Ok(spec)
    }

    pub fn linear(covariates: DMatrix<f64>, q: usize) -> Result<Self> {
        Self::new(Predictor::Linear, covariates, q)
    }

    pub fn n(&self) -> usize {
        self.covariates.nrows()
    }

    pub fn p(&self) -> usize {
        match &self.predictor {
            Predictor::Linear => self.covariates.ncols(),
            Predictor::ExpCurve => 3,
            Predictor::Custom(c) => c.n_params(),
        }
    }

    /// Same predictor and covariates with a different partition point.
    pub fn with_q(&self, q: usize) -> Result<Self> {
        Self::new(self.predictor.clone(), self.covariates.clone(), q)
    }

    /// Evaluates and checks that the Jacobian has full column rank.
    pub fn evaluate(&self, beta: &DVector<f64>) -> Result<DesignEval> {
        let eval = self.evaluate_raw(beta)?;
        check_full_column_rank(&eval.jac)?;
        Ok(eval)
    }

    /// Evaluates without the rank check.
    pub fn evaluate_raw(&self, beta: &DVector<f64>) -> Result<DesignEval> {
        let p = self.p();
        if beta.len() != p {
            return Err(Error::Dimension(format!(
                "beta has length {}, model has {p} parameters",
                beta.len()
            )));
        }
        let x = &self.covariates;
        let n = x.nrows();
        match &self.predictor {
            Predictor::Linear => Ok(DesignEval {
                eta: x * beta,
                jac: x.clone(),
                hess: None,
                q: self.q,
            }),
            Predictor::ExpCurve => {
                let (b1, b2, b3) = (beta[0], beta[1], beta[2]);
                let mut eta = DVector::zeros(n);
                let mut jac = DMatrix::zeros(n, 3);
                let mut hess = Vec::with_capacity(n);
                for l in 0..n {
                    let xl = x[(l, 0)];
                    let e = (b3 * xl).exp();
                    eta[l] = b1 + b2 * e;
                    jac[(l, 0)] = 1.0;
                    jac[(l, 1)] = e;
                    jac[(l, 2)] = b2 * xl * e;
                    let mut h = DMatrix::zeros(3, 3);
                    h[(1, 2)] = xl * e;
                    h[(2, 1)] = xl * e;
                    h[(2, 2)] = b2 * xl * xl * e;
                    hess.push(h);
                }
                Ok(DesignEval {
                    eta,
                    jac,
                    hess: Some(hess),
                    q: self.q,
                })
            }
            Predictor::Custom(c) => {
                let mut eta = DVector::zeros(n);
                let mut jac = DMatrix::zeros(n, p);
                let mut hess = Vec::with_capacity(n);
                let b = beta.as_slice();
                let mut row = Vec::with_capacity(x.ncols());
                for l in 0..n {
                    row.clear();
                    row.extend(x.row(l).iter().copied());
                    eta[l] = c.eta(&row, b);
                    let grad = c.gradient(&row, b);
                    let h = c.hessian(&row, b);
                    if grad.len() != p || h.nrows() != p || h.ncols() != p {
                        return Err(Error::Dimension(format!(
                            "custom predictor returned wrong derivative shapes at row {l}"
                        )));
                    }
                    for (r, g) in grad.into_iter().enumerate() {
                        jac[(l, r)] = g;
                    }
                    hess.push(symmetrize(&h));
                }
                if !eta.iter().all(|v| v.is_finite()) {
                    return Err(Error::Dimension("custom predictor produced non-finite eta".into()));
                }
                Ok(DesignEval {
                    eta,
                    jac,
                    hess: Some(hess),
                    q: self.q,
                })
            }
        }
    }
}

impl DesignEval {
    pub fn n(&self) -> usize {
        self.jac.nrows()
    }

    pub fn p(&self) -> usize {
        self.jac.ncols()
    }

    pub fn is_linear(&self) -> bool {
        self.hess.is_none()
    }

    /// `X₁*`, the nuisance columns.
    pub fn x1(&self) -> DMatrix<f64> {
        self.jac.columns(0, self.q).into_owned()
    }

    /// `X₂*`, the tested columns.
    pub fn x2(&self) -> DMatrix<f64> {
        self.jac.columns(self.q, self.p() - self.q).into_owned()
    }

    /// `X*ₗ`, zero for linear predictors.
    pub fn hessian(&self, l: usize) -> DMatrix<f64> {
        match &self.hess {
            Some(h) => h[l].clone(),
            None => DMatrix::zeros(self.p(), self.p()),
        }
    }

    /// `X₁₁ₗ*`, the top-left q×q block of `X*ₗ`.
    pub fn hess11(&self, l: usize) -> DMatrix<f64> {
        self.hessian(l).view((0, 0), (self.q, self.q)).into_owned()
    }
}
