//! Likelihood-ratio (S₁), Wald (S₂), score (S₃) and gradient (S₄) statistics.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // inherent float methods exist only when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::family::{Family, Pdm};
use crate::fit::FitResult;
use crate::linalg::{schur_rwr, spd_inverse, spd_solve, weighted_gram};
use crate::specfun::{lgamma, ln_i0, mean_resultant, psi, psi1, ChiSquare};

#[derive(Debug, Clone, PartialEq)]
pub struct TestQuartet {
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
    pub s4: f64,
    pub df: u32,
    /// Upper-tail central χ²_df probabilities, in statistic order.
    pub pvalues: [f64; 4],
    /// `sₗ = φ^{1/2} ṫₗ (−D₂ₗ)^{−1/2}` at the restricted fit (subset tests only).
    pub s_vec: Option<DVector<f64>>,
    /// `R = X₂* − X₁*(X₁*ᵀWX₁*)⁻¹X₁*ᵀWX₂*` at the restricted fit (subset tests only).
    pub r_matrix: Option<DMatrix<f64>>,
    pub notes: Vec<String>,
}

impl TestQuartet {
    fn new(stats: [f64; 4], df: u32) -> Result<Self> {
        let chi = ChiSquare::central(df)?;
        let pvalues = stats.map(|s| chi.sf(s.max(0.0)));
        Ok(TestQuartet {
            s1: stats[0],
            s2: stats[1],
            s3: stats[2],
            s4: stats[3],
            df,
            pvalues,
            s_vec: None,
            r_matrix: None,
            notes: Vec::new(),
        })
    }

    pub fn values(&self) -> [f64; 4] {
        [self.s1, self.s2, self.s3, self.s4]
    }
}

/// Statistics for `H₀: β₂ = β₂₀` from the unrestricted and restricted fits.
pub fn subset_tests(full: &FitResult, restricted: &FitResult) -> Result<TestQuartet> {
    let restriction = restricted
        .restricted
        .as_ref()
        .ok_or_else(|| Error::Contract("second fit is not a restricted fit".into()))?;
    if full.restricted.is_some() {
        return Err(Error::Contract("first fit must be unrestricted".into()));
    }
    if full.family != restricted.family
        || full.link != restricted.link
        || full.y != restricted.y
        || full.spec.covariates != restricted.spec.covariates
        || full.p() != restricted.p()
    {
        return Err(Error::Contract("fits were computed on different data or models".into()));
    }
    let p = full.p();
    let q = restriction.q;
    let df = (p - q) as u32;

    let d = full.beta_hat.rows(q, p - q) - &restriction.beta20;

    let s1 = 2.0 * (full.loglik - restricted.loglik);

    let rwr_hat = schur_rwr(&full.design.jac, &full.w, q)?;
    let s2 = full.phi_hat * (d.transpose() * &rwr_hat * &d)[(0, 0)];

    let phi_t = restricted.phi_hat;
    let x2 = restricted.design.x2();
    let v = x2.transpose() * restricted.theta_d1.component_mul(&restricted.tdot) * phi_t.sqrt();
    let rwr_tilde = schur_rwr(&restricted.design.jac, &restricted.w, q)?;
    let solved = spd_solve(&rwr_tilde, &v, "R'WR at the restricted fit")?;
    let s3 = v.dot(&solved);
    let s4 = phi_t.sqrt() * v.dot(&d);

    let mut quartet = TestQuartet::new([s1, s2, s3, s4], df)?;
    quartet.s_vec = Some(DVector::from_iterator(
        restricted.n(),
        (0..restricted.n()).map(|l| {
            let d2 = restricted.family.d2(restricted.theta[l], phi_t);
            phi_t.sqrt() * restricted.tdot[l] / (-d2).sqrt()
        }),
    ));
    quartet.r_matrix = Some(residual_matrix(&restricted.design.jac, &restricted.w, q)?);
    Ok(quartet)
}

fn residual_matrix(x: &DMatrix<f64>, w: &DVector<f64>, q: usize) -> Result<DMatrix<f64>> {
    let p = x.ncols();
    let x2 = x.columns(q, p - q).into_owned();
    if q == 0 {
        return Ok(x2);
    }
    let x1 = x.columns(0, q).into_owned();
    let inv = spd_inverse(&weighted_gram(&x1, w), "X1'WX1")?;
    let mut wx2 = x2.clone();
    for (mut row, &wl) in wx2.row_iter_mut().zip(w.iter()) {
        row *= wl;
    }
    Ok(&x2 - &x1 * inv * (x1.transpose() * wx2))
}

fn require_pdm(family: Family, operation: &'static str) -> Result<Pdm> {
    family.pdm().ok_or(Error::Unsupported {
        family: family.name(),
        operation,
    })
}

/// Statistics for `H₀: φ = φ₀` at the common β̂.
pub fn precision_tests(family: Family, y: &DVector<f64>, full: &FitResult, phi0: f64) -> Result<TestQuartet> {
    let pdm = require_pdm(family, "precision tests")?;
    if !(phi0 > 0.0 && phi0.is_finite()) {
        return Err(Error::domain("precision_tests", "phi0 > 0", phi0));
    }
    if y.len() != full.theta.len() || full.family != family {
        return Err(Error::Contract("fit does not match the supplied data or family".into()));
    }
    let n = y.len() as f64;
    let phi = full.phi_hat;
    let eps = phi - phi0;
    let mut s1 = 0.0;
    let mut u = 0.0;
    for (&yl, &th) in y.iter().zip(full.theta.iter()) {
        let t = family.t(yl, th);
        s1 += eps * t + family.c(yl, phi) - family.c(yl, phi0);
        u += t + family.c1(yl, phi0);
    }
    s1 *= 2.0;
    let (s2, s3) = match pdm {
        // Both reduce to the same expression; one evaluation keeps them identical.
        Pdm::LogHalf => {
            let r = eps / phi;
            let v = 0.5 * n * r * r;
            (v, v)
        }
        _ => (
            eps * eps * (-n * pdm.a2_2(phi)),
            u * u / (-n * pdm.a2_2(phi0)),
        ),
    };
    let s4 = eps * u;
    let mut quartet = TestQuartet::new([s1, s2, s3, s4], 1)?;
    quartet.notes.push(String::from(
        "S1 = 2{l(phi_hat) - l(phi0)} evaluated at the common beta_hat",
    ));
    if pdm == Pdm::GammaType {
        quartet.notes.push(String::from(
            "S3 squares the summed score before dividing by -alpha2(phi0)",
        ));
    }
    Ok(quartet)
}

/// The a₂-based forms of the precision statistics for a proper dispersion
/// model with `n` observations.
pub fn precision_pdm_forms(pdm: Pdm, n: usize, phi_hat: f64, phi0: f64) -> [f64; 4] {
    let n = n as f64;
    let eps = phi_hat - phi0;
    let d1 = pdm.a2_1(phi0) - pdm.a2_1(phi_hat);
    [
        2.0 * n * (pdm.a2(phi_hat) - pdm.a2(phi0) - eps * pdm.a2_1(phi_hat)),
        -n * eps * eps * pdm.a2_2(phi_hat),
        -n * d1 * d1 / pdm.a2_2(phi0),
        n * d1 * eps,
    ]
}

/// Family-specific closed forms (normal/inverse Gaussian, gamma, von Mises).
pub fn precision_closed_forms(family: Family, n: usize, phi_hat: f64, phi0: f64) -> Result<[f64; 4]> {
    let nf = n as f64;
    let eps = phi_hat - phi0;
    match family {
        Family::Normal | Family::InverseGaussian => {
            let r = eps / phi_hat;
            Ok([
                nf * ((phi_hat / phi0).ln() - r),
                0.5 * nf * r * r,
                0.5 * nf * r * r,
                0.5 * nf * (eps / phi0 - eps / phi_hat),
            ])
        }
        Family::Gamma => {
            let lr = (phi_hat / phi0).ln();
            let dpsi = psi(phi_hat) - psi(phi0);
            Ok([
                2.0 * nf
                    * (phi0 * lr - (lgamma(phi_hat) - lgamma(phi0)) - eps * (1.0 - psi(phi_hat))),
                nf * (phi_hat * psi1(phi_hat) - 1.0) * eps * eps / phi_hat,
                nf * phi0 * (lr - dpsi) * (lr - dpsi) / (phi0 * psi1(phi0) - 1.0),
                nf * eps * (dpsi - lr),
            ])
        }
        Family::VonMises => {
            let r_hat = mean_resultant(phi_hat);
            let r0 = mean_resultant(phi0);
            Ok([
                2.0 * nf * (ln_i0(phi0) - ln_i0(phi_hat) + eps * r_hat),
                -nf * eps * eps * (r_hat * r_hat + r_hat / phi_hat - 1.0),
                -nf * (r0 - r_hat) * (r0 - r_hat) / (r0 * r0 + r0 / phi0 - 1.0),
                nf * (r_hat - r0) * eps,
            ])
        }
        other => Err(Error::Unsupported {
            family: other.name(),
            operation: "closed-form precision statistics",
        }),
    }
}
