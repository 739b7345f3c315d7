//! Response samplers in the (θ, φ) parameterization of each family.

use std::f64::consts::PI;

use dm_testlab_core::family::wrap_angle;
use dm_testlab_core::Family;
use rand::Rng;
use rand_distr::{Distribution, Gamma, InverseGaussian, StandardNormal};

use crate::error::SimError;

/// One draw from `family` at position `theta` and precision `phi`.
pub fn sample<R: Rng + ?Sized>(family: Family, theta: f64, phi: f64, rng: &mut R) -> Result<f64, SimError> {
    if !(phi > 0.0 && phi.is_finite()) {
        return Err(SimError::Parameter(format!("phi must be positive, got {phi}")));
    }
    if !family.theta_in_domain(theta) {
        return Err(SimError::Parameter(format!(
            "theta = {theta} is outside the {} parameter space",
            family.name()
        )));
    }
    let y = match family {
        Family::Normal => {
            let z: f64 = StandardNormal.sample(rng);
            theta + z / phi.sqrt()
        }
        Family::Gamma => gamma_draw(phi, -1.0 / (phi * theta), rng)?,
        Family::ReciprocalGamma => 1.0 / gamma_draw(phi, -1.0 / (phi * theta), rng)?,
        Family::LogGamma => theta + gamma_draw(phi, 1.0 / phi, rng)?.ln(),
        Family::InverseGaussian => {
            let mean = 1.0 / (-2.0 * theta).sqrt();
            InverseGaussian::new(mean, phi)
                .map_err(|e| SimError::Parameter(e.to_string()))?
                .sample(rng)
        }
        Family::VonMises => von_mises(theta, phi, rng),
        Family::ReciprocalInverseGaussian | Family::GeneralizedHyperbolicSecant => {
            return Err(SimError::UnsupportedSampler(family.name()))
        }
    };
    Ok(y)
}

fn gamma_draw<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> Result<f64, SimError> {
    Ok(Gamma::new(shape, scale)
        .map_err(|e| SimError::Parameter(e.to_string()))?
        .sample(rng))
}

/// Best–Fisher wrapped-Cauchy rejection sampler, result in (−π, π].
pub fn von_mises<R: Rng + ?Sized>(mu: f64, kappa: f64, rng: &mut R) -> f64 {
    if kappa < 1e-8 {
        return wrap_angle(PI * (2.0 * rng.random::<f64>() - 1.0));
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let u3: f64 = rng.random();
            let angle = f.clamp(-1.0, 1.0).acos();
            let signed = if u3 < 0.5 { -angle } else { angle };
            return wrap_angle(mu + signed);
        }
    }
}
