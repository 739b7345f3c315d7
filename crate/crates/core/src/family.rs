//! Built-in dispersion families.
//!
//! Each family is described by its position kernel `t(y, θ)`, normalizer
//! `c(y, φ)` and the expected derivatives `D₂ = E[∂²t/∂θ²]`,
//! `D₃ = E[∂³t/∂θ³]` and `D₂' = ∂D₂/∂θ`.

use alloc::string::ToString;
use alloc::vec::Vec;
use core::f64::consts::{LN_2, PI};
use core::fmt;
use core::str::FromStr;

use nalgebra::DVector;
use num_complex::Complex64;
#[allow(unused_imports)] // inherent float methods exist only when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::link::ModelLink;
use crate::specfun::{
    digamma_complex, lgamma, ln_gamma_complex, ln_i0, mean_resultant, psi, psi1, psi2,
    trigamma_complex,
};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Normal,
    InverseGaussian,
    ReciprocalInverseGaussian,
    Gamma,
    ReciprocalGamma,
    LogGamma,
    VonMises,
    GeneralizedHyperbolicSecant,
}

/// The φ-part `a₂(φ)` of a proper dispersion model, `c(y, φ) = a₁(y) + a₂(φ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pdm {
    /// `a₂ = log(φ)/2`
    LogHalf,
    /// `a₂ = φ log φ − ln Γ(φ)`
    GammaType,
    /// `a₂ = −log I₀(φ)`
    VonMises,
}

impl Pdm {
    pub fn a2(self, phi: f64) -> f64 {
        match self {
            Pdm::LogHalf => 0.5 * phi.ln(),
            Pdm::GammaType => phi * phi.ln() - lgamma(phi),
            Pdm::VonMises => -ln_i0(phi),
        }
    }

    pub fn a2_1(self, phi: f64) -> f64 {
        match self {
            Pdm::LogHalf => 0.5 / phi,
            Pdm::GammaType => phi.ln() + 1.0 - psi(phi),
            Pdm::VonMises => -mean_resultant(phi),
        }
    }

    pub fn a2_2(self, phi: f64) -> f64 {
        match self {
            Pdm::LogHalf => -0.5 / (phi * phi),
            Pdm::GammaType => 1.0 / phi - psi1(phi),
            Pdm::VonMises => {
                let r = mean_resultant(phi);
                r * r + r / phi - 1.0
            }
        }
    }

    pub fn a2_3(self, phi: f64) -> f64 {
        match self {
            Pdm::LogHalf => 1.0 / (phi * phi * phi),
            Pdm::GammaType => -1.0 / (phi * phi) - psi2(phi),
            Pdm::VonMises => {
                let r = mean_resultant(phi);
                let dr = 1.0 - r / phi - r * r;
                dr / phi - r / (phi * phi) + 2.0 * r * dr
            }
        }
    }
}

/// Per-observation weight vectors of the power expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct FgeWeights {
    pub w: DVector<f64>,
    pub f: DVector<f64>,
    pub g: DVector<f64>,
    pub e: DVector<f64>,
}

impl Family {
    pub const ALL: [Family; 8] = [
        Family::Normal,
        Family::InverseGaussian,
        Family::ReciprocalInverseGaussian,
        Family::Gamma,
        Family::ReciprocalGamma,
        Family::LogGamma,
        Family::VonMises,
        Family::GeneralizedHyperbolicSecant,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Normal => "normal",
            Family::InverseGaussian => "inverse-gaussian",
            Family::ReciprocalInverseGaussian => "reciprocal-inverse-gaussian",
            Family::Gamma => "gamma",
            Family::ReciprocalGamma => "reciprocal-gamma",
            Family::LogGamma => "log-gamma",
            Family::VonMises => "von-mises",
            Family::GeneralizedHyperbolicSecant => "generalized-hyperbolic-secant",
        }
    }

    pub fn pdm(self) -> Option<Pdm> {
        match self {
            Family::Normal | Family::InverseGaussian | Family::ReciprocalInverseGaussian => {
                Some(Pdm::LogHalf)
            }
            Family::Gamma | Family::ReciprocalGamma | Family::LogGamma => Some(Pdm::GammaType),
            Family::VonMises => Some(Pdm::VonMises),
            Family::GeneralizedHyperbolicSecant => None,
        }
    }

    pub fn is_edm(self) -> bool {
        matches!(
            self,
            Family::Normal
                | Family::Gamma
                | Family::InverseGaussian
                | Family::GeneralizedHyperbolicSecant
        )
    }

    /// Position kernel `t(y, θ)`.
    pub fn t(self, y: f64, theta: f64) -> f64 {
        match self {
            Family::Normal => -0.5 * (y - theta) * (y - theta),
            Family::InverseGaussian => y * theta + (-2.0 * theta).sqrt() - 0.5 / y,
            Family::ReciprocalInverseGaussian => -(y - theta) * (y - theta) / (2.0 * y),
            Family::Gamma => y * theta + (-theta * y).ln(),
            Family::ReciprocalGamma => theta / y + (-theta / y).ln(),
            Family::LogGamma => (y - theta) - (y - theta).exp(),
            Family::VonMises => (y - theta).cos(),
            Family::GeneralizedHyperbolicSecant => y * theta + theta.cos().ln(),
        }
    }

    /// `∂t/∂θ`.
    pub fn dt(self, y: f64, theta: f64) -> f64 {
        match self {
            Family::Normal => y - theta,
            Family::InverseGaussian => y - 1.0 / (-2.0 * theta).sqrt(),
            Family::ReciprocalInverseGaussian => (y - theta) / y,
            Family::Gamma => y + 1.0 / theta,
            Family::ReciprocalGamma => 1.0 / y + 1.0 / theta,
            Family::LogGamma => -1.0 + (y - theta).exp(),
            Family::VonMises => (y - theta).sin(),
            Family::GeneralizedHyperbolicSecant => y - theta.tan(),
        }
    }

    /// `∂²t/∂θ²`.
    pub fn d2t(self, y: f64, theta: f64) -> f64 {
        match self {
            Family::Normal => -1.0,
            Family::InverseGaussian => -(-2.0 * theta).powf(-1.5),
            Family::ReciprocalInverseGaussian => -1.0 / y,
            Family::Gamma | Family::ReciprocalGamma => -1.0 / (theta * theta),
            Family::LogGamma => -(y - theta).exp(),
            Family::VonMises => -(y - theta).cos(),
            Family::GeneralizedHyperbolicSecant => {
                let c = theta.cos();
                -1.0 / (c * c)
            }
        }
    }

    pub fn d2(self, theta: f64, phi: f64) -> f64 {
        match self {
            Family::Normal | Family::LogGamma => -1.0,
            Family::InverseGaussian => -(-2.0 * theta).powf(-1.5),
            Family::ReciprocalInverseGaussian => -1.0 / theta,
            Family::Gamma | Family::ReciprocalGamma => -1.0 / (theta * theta),
            Family::VonMises => -mean_resultant(phi),
            Family::GeneralizedHyperbolicSecant => {
                let c = theta.cos();
                -1.0 / (c * c)
            }
        }
    }

    pub fn d3(self, theta: f64, _phi: f64) -> f64 {
        match self {
            Family::Normal | Family::ReciprocalInverseGaussian | Family::VonMises => 0.0,
            Family::InverseGaussian => -3.0 * (-2.0 * theta).powf(-2.5),
            Family::Gamma | Family::ReciprocalGamma => 2.0 / (theta * theta * theta),
            Family::LogGamma => 1.0,
            Family::GeneralizedHyperbolicSecant => ghs_d2_prime(theta),
        }
    }

    pub fn d2_prime(self, theta: f64, _phi: f64) -> f64 {
        match self {
            Family::Normal | Family::LogGamma | Family::VonMises => 0.0,
            Family::InverseGaussian => -3.0 * (-2.0 * theta).powf(-2.5),
            Family::ReciprocalInverseGaussian => 1.0 / (theta * theta),
            Family::Gamma | Family::ReciprocalGamma => 2.0 / (theta * theta * theta),
            Family::GeneralizedHyperbolicSecant => ghs_d2_prime(theta),
        }
    }

    /// Normalizer `c(y, φ)`.
    pub fn c(self, y: f64, phi: f64) -> f64 {
        match self {
            Family::Normal => 0.5 * phi.ln() - 0.5 * LN_2PI,
            Family::InverseGaussian => 0.5 * phi.ln() - 0.5 * (LN_2PI + 3.0 * y.ln()),
            Family::ReciprocalInverseGaussian => 0.5 * phi.ln() - 0.5 * (LN_2PI + y.ln()),
            Family::Gamma | Family::ReciprocalGamma => Pdm::GammaType.a2(phi) - y.ln(),
            Family::LogGamma => Pdm::GammaType.a2(phi),
            Family::VonMises => -LN_2PI - ln_i0(phi),
            Family::GeneralizedHyperbolicSecant => {
                let z = Complex64::new(0.5 * phi, 0.5 * phi * y);
                phi.ln() + (phi - 2.0) * LN_2 - PI.ln() - lgamma(phi)
                    + 2.0 * ln_gamma_complex(z).re
            }
        }
    }

    /// `∂c/∂φ`.
    pub fn c1(self, y: f64, phi: f64) -> f64 {
        match self.pdm() {
            Some(pdm) => pdm.a2_1(phi),
            None => {
                let u = Complex64::new(1.0, y);
                let z = u * (0.5 * phi);
                1.0 / phi + LN_2 - psi(phi) + (u * digamma_complex(z)).re
            }
        }
    }

    /// `∂²c/∂φ²`.
    pub fn c2(self, y: f64, phi: f64) -> f64 {
        match self.pdm() {
            Some(pdm) => pdm.a2_2(phi),
            None => {
                let u = Complex64::new(1.0, y);
                let z = u * (0.5 * phi);
                -1.0 / (phi * phi) - psi1(phi) + (u * u * 0.5 * trigamma_complex(z)).re
            }
        }
    }

    pub fn theta_in_domain(self, theta: f64) -> bool {
        if !theta.is_finite() {
            return false;
        }
        match self {
            Family::Normal | Family::LogGamma | Family::VonMises => true,
            Family::InverseGaussian | Family::Gamma | Family::ReciprocalGamma => theta < 0.0,
            Family::ReciprocalInverseGaussian => theta > 0.0,
            Family::GeneralizedHyperbolicSecant => theta.abs() < 0.5 * PI,
        }
    }

    pub fn y_in_support(self, y: f64) -> bool {
        if !y.is_finite() {
            return false;
        }
        match self {
            Family::Normal | Family::LogGamma | Family::GeneralizedHyperbolicSecant => true,
            Family::InverseGaussian
            | Family::ReciprocalInverseGaussian
            | Family::Gamma
            | Family::ReciprocalGamma => y > 0.0,
            Family::VonMises => (-PI..=PI).contains(&y),
        }
    }

    /// Canonical representative of θ (von Mises angles wrapped into (−π, π]).
    pub fn normalize_theta(self, theta: f64) -> f64 {
        match self {
            Family::VonMises => wrap_angle(theta),
            _ => theta,
        }
    }

    pub fn check_theta(self, index: usize, theta: f64) -> Result<()> {
        if self.theta_in_domain(theta) {
            Ok(())
        } else {
            Err(Error::ThetaOutOfDomain {
                index,
                theta,
                family: self.name(),
            })
        }
    }

    pub fn check_response(self, index: usize, y: f64) -> Result<()> {
        if self.y_in_support(y) {
            Ok(())
        } else {
            Err(Error::ResponseOutOfSupport {
                index,
                y,
                family: self.name(),
            })
        }
    }

    /// `φ t(y, θ) + c(y, φ)`.
    pub fn log_density(self, y: f64, theta: f64, phi: f64) -> Result<f64> {
        self.check_response(0, y)?;
        self.check_theta(0, theta)?;
        if !(phi > 0.0 && phi.is_finite()) {
            return Err(Error::domain("log_density", "phi > 0", phi));
        }
        let theta = self.normalize_theta(theta);
        Ok(phi * self.t(y, theta) + self.c(y, phi))
    }

    /// Mean `μ(θ)` of an exponential dispersion model.
    pub fn mean(self, theta: f64) -> Option<f64> {
        match self {
            Family::Normal => Some(theta),
            Family::Gamma => Some(-1.0 / theta),
            Family::InverseGaussian => Some(1.0 / (-2.0 * theta).sqrt()),
            Family::GeneralizedHyperbolicSecant => Some(theta.tan()),
            _ => None,
        }
    }

    /// Inverse of [`Family::mean`]; `None` outside the mean space.
    pub fn theta_of_mean(self, mu: f64) -> Option<f64> {
        if !mu.is_finite() {
            return None;
        }
        match self {
            Family::Normal => Some(mu),
            Family::Gamma if mu > 0.0 => Some(-1.0 / mu),
            Family::InverseGaussian if mu > 0.0 => Some(-0.5 / (mu * mu)),
            Family::GeneralizedHyperbolicSecant => Some(mu.atan()),
            _ => None,
        }
    }

    /// Variance function `V(μ)` and its derivative `dV/dμ`.
    pub fn variance(self, mu: f64) -> Option<(f64, f64)> {
        match self {
            Family::Normal => Some((1.0, 0.0)),
            Family::Gamma => Some((mu * mu, 2.0 * mu)),
            Family::InverseGaussian => Some((mu * mu * mu, 3.0 * mu * mu)),
            Family::GeneralizedHyperbolicSecant => Some((1.0 + mu * mu, 2.0 * mu)),
            _ => None,
        }
    }

    /// Crude θ guess from a single response, used for starting values.
    pub(crate) fn pseudo_theta(self, y: f64) -> f64 {
        let tiny = 1e-8;
        match self {
            Family::Normal | Family::LogGamma => y,
            Family::InverseGaussian => -0.5 / (y * y).max(tiny),
            Family::ReciprocalInverseGaussian => y.max(tiny),
            Family::Gamma => -1.0 / y.max(tiny),
            Family::ReciprocalGamma => -y.max(tiny),
            Family::VonMises => y.clamp(-2.0, 2.0),
            Family::GeneralizedHyperbolicSecant => y.atan(),
        }
    }
}

fn ghs_d2_prime(theta: f64) -> f64 {
    let c = theta.cos();
    -2.0 * theta.tan() / (c * c)
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut r = a - two_pi * (a / two_pi).round();
    if r <= -PI {
        r += two_pi;
    } else if r > PI {
        r -= two_pi;
    }
    r
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        Family::ALL
            .iter()
            .copied()
            .find(|f| f.name() == key)
            .ok_or_else(|| Error::UnknownFamily {
                name: s.to_string(),
                available: Family::ALL
                    .iter()
                    .map(|f| f.name())
                    .collect::<Vec<_>>()
                    .join(", "),
            })
    }
}

/// `w = −D₂θ'²`, `f = −θ'θ''D₂ − θ'³D₃`, `g = −θ'θ''D₂`, `e = −θ'³D₂'`,
/// with θ-derivatives taken with respect to η at `η = d(θ)`.
pub fn fge_weights(
    family: Family,
    link: &ModelLink,
    theta: &DVector<f64>,
    phi: f64,
) -> Result<FgeWeights> {
    let n = theta.len();
    let mut out = FgeWeights {
        w: DVector::zeros(n),
        f: DVector::zeros(n),
        g: DVector::zeros(n),
        e: DVector::zeros(n),
    };
    for (l, &th) in theta.iter().enumerate() {
        family.check_theta(l, th)?;
        let eta = link.eta_of_theta(family, th).map_err(|_| Error::ThetaOutOfDomain {
            index: l,
            theta: th,
            family: family.name(),
        })?;
        let d = link.theta_derivs(family, eta)?;
        let (w, f, g, e) = weights_at(family, d.theta, d.d1, d.d2, phi);
        out.w[l] = w;
        out.f[l] = f;
        out.g[l] = g;
        out.e[l] = e;
    }
    Ok(out)
}

pub(crate) fn weights_at(family: Family, theta: f64, d1: f64, d2: f64, phi: f64) -> (f64, f64, f64, f64) {
    let big_d2 = family.d2(theta, phi);
    let big_d3 = family.d3(theta, phi);
    let big_d2p = family.d2_prime(theta, phi);
    let g = -d1 * d2 * big_d2;
    let cube = d1 * d1 * d1;
    (-big_d2 * d1 * d1, g - cube * big_d3, g, -cube * big_d2p)
}
