//! Link functions `d(x) = η` and the model link that maps η to θ.

use alloc::format;
use alloc::string::{String, ToString};
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

#[allow(unused_imports)] // inherent float methods exist only when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::family::Family;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Link {
    Identity,
    Log,
    Reciprocal,
    /// `η = x^c` with rational `c = num/den`.
    Power { num: i32, den: u32 },
    /// `η = tan(x/2)`.
    TanHalf,
}

/// Which quantity the link acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum LinkScale {
    /// `d(θ) = η`.
    #[default]
    Theta,
    /// `d(μ) = η` with `μ = E[Y]`; exponential dispersion models only.
    Mean,
}

/// A link plus the scale it acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelLink {
    pub link: Link,
    pub scale: LinkScale,
}

/// θ and its first two derivatives with respect to η.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaDerivs {
    pub theta: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Link {
    pub fn power(num: i32, den: u32) -> Result<Self> {
        if den == 0 || num == 0 {
            return Err(Error::UnknownLink(format!("power({num}/{den})")));
        }
        let g = gcd(num.unsigned_abs(), den);
        Ok(Link::Power {
            num: num / g as i32,
            den: den / g,
        })
    }

    fn exponent(self) -> f64 {
        match self {
            Link::Power { num, den } => num as f64 / den as f64,
            _ => 1.0,
        }
    }

    /// `d(x)`.
    pub fn eta_of(self, x: f64) -> Result<f64> {
        if !self.x_in_domain(x) {
            return Err(Error::domain("link", "argument inside the link domain", x));
        }
        Ok(match self {
            Link::Identity => x,
            Link::Log => x.ln(),
            Link::Reciprocal => 1.0 / x,
            Link::Power { .. } => x.powf(self.exponent()),
            Link::TanHalf => (0.5 * x).tan(),
        })
    }

    pub fn x_in_domain(self, x: f64) -> bool {
        x.is_finite()
            && match self {
                Link::Identity => true,
                Link::Log | Link::Power { .. } => x > 0.0,
                Link::Reciprocal => x != 0.0,
                Link::TanHalf => x.abs() < PI,
            }
    }

    pub fn eta_in_domain(self, eta: f64) -> bool {
        eta.is_finite()
            && match self {
                Link::Identity | Link::Log | Link::TanHalf => true,
                Link::Reciprocal => eta != 0.0,
                Link::Power { .. } => eta > 0.0,
            }
    }

    /// `x(η)` and its first two derivatives.
    pub fn inverse(self, eta: f64) -> Result<(f64, f64, f64)> {
        if !self.eta_in_domain(eta) {
            return Err(Error::domain("inverse link", "eta inside the link range", eta));
        }
        Ok(match self {
            Link::Identity => (eta, 1.0, 0.0),
            Link::Log => {
                let e = eta.exp();
                (e, e, e)
            }
            Link::Reciprocal => {
                let inv = 1.0 / eta;
                (inv, -inv * inv, 2.0 * inv * inv * inv)
            }
            Link::Power { .. } => {
                let a = 1.0 / self.exponent();
                let x = eta.powf(a);
                (x, a * x / eta, a * (a - 1.0) * x / (eta * eta))
            }
            Link::TanHalf => {
                let s = 1.0 + eta * eta;
                (2.0 * eta.atan(), 2.0 / s, -4.0 * eta / (s * s))
            }
        })
    }
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.max(1)
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Link::Identity => f.write_str("identity"),
            Link::Log => f.write_str("log"),
            Link::Reciprocal => f.write_str("reciprocal"),
            Link::Power { num, den: 1 } => write!(f, "power({num})"),
            Link::Power { num, den } => write!(f, "power({num}/{den})"),
            Link::TanHalf => f.write_str("tan-half"),
        }
    }
}

impl FromStr for Link {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        match key.as_str() {
            "identity" => return Ok(Link::Identity),
            "log" => return Ok(Link::Log),
            "reciprocal" | "inverse" => return Ok(Link::Reciprocal),
            "tan-half" | "tanhalf" => return Ok(Link::TanHalf),
            _ => {}
        }
        let bad = || Error::UnknownLink(s.to_string());
        let inner = key
            .strip_prefix("power(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(bad)?;
        let (num, den) = match inner.split_once('/') {
            Some((a, b)) => (a.trim().parse::<i32>(), b.trim().parse::<u32>()),
            None => (inner.trim().parse::<i32>(), Ok(1)),
        };
        Link::power(num.map_err(|_| bad())?, den.map_err(|_| bad())?).map_err(|_| bad())
    }
}

impl ModelLink {
    pub fn new(link: Link) -> Self {
        ModelLink {
            link,
            scale: LinkScale::Theta,
        }
    }

    pub fn on_mean(link: Link) -> Self {
        ModelLink {
            link,
            scale: LinkScale::Mean,
        }
    }

    pub fn validate(&self, family: Family) -> Result<()> {
        if self.scale == LinkScale::Mean && !family.is_edm() {
            return Err(Error::MeanScaleUnavailable(family.name()));
        }
        Ok(())
    }

    pub fn eta_of_theta(&self, family: Family, theta: f64) -> Result<f64> {
        match self.scale {
            LinkScale::Theta => self.link.eta_of(theta),
            LinkScale::Mean => {
                let mu = family
                    .mean(theta)
                    .ok_or(Error::MeanScaleUnavailable(family.name()))?;
                self.link.eta_of(mu)
            }
        }
    }

    /// θ(η), dθ/dη and d²θ/dη².
    pub fn theta_derivs(&self, family: Family, eta: f64) -> Result<ThetaDerivs> {
        let (x, x1, x2) = self.link.inverse(eta)?;
        match self.scale {
            LinkScale::Theta => Ok(ThetaDerivs {
                theta: x,
                d1: x1,
                d2: x2,
            }),
            LinkScale::Mean => {
                let theta = family
                    .theta_of_mean(x)
                    .ok_or_else(|| Error::domain("mean link", "mean inside the family mean space", x))?;
                let (v, dv) = family
                    .variance(x)
                    .ok_or(Error::MeanScaleUnavailable(family.name()))?;
                Ok(ThetaDerivs {
                    theta,
                    d1: x1 / v,
                    d2: x2 / v - dv * x1 * x1 / (v * v),
                })
            }
        }
    }
}

impl fmt::Display for ModelLink {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.scale {
            LinkScale::Theta => write!(f, "{}", self.link),
            LinkScale::Mean => write!(f, "{} (mean scale)", self.link),
        }
    }
}

impl LinkScale {
    pub fn name(self) -> &'static str {
        match self {
            LinkScale::Theta => "theta",
            LinkScale::Mean => "mean",
        }
    }
}

impl FromStr for LinkScale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "theta" => Ok(LinkScale::Theta),
            "mean" => Ok(LinkScale::Mean),
            other => Err(Error::UnknownLink(String::from("scale ") + other)),
        }
    }
}
