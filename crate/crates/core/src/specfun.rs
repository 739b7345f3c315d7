//! Special functions and chi-square distribution machinery.
//!
//! Gamma-family functions, modified Bessel functions of order 0 and 1, the
//! regularized incomplete gamma function, and central/noncentral chi-square
//! distribution functions. The noncentral chi-square uses the usual
//! parameterization in which a variate with `df` degrees of freedom and
//! noncentrality `λ` is a Poisson(`λ/2`) mixture of central chi-squares
//! with `df + 2j` degrees of freedom.

use num_complex::Complex64;
#[allow(unused_imports)] // inherent float methods exist only when std is linked
use num_traits::Float;

use crate::error::{Error, Result};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Poisson tail mass left out of every noncentral series.
pub const MIXTURE_TAIL_TOLERANCE: f64 = 1e-12;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Natural log of Γ(x) for x > 0.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::domain("ln_gamma", "x > 0 and finite", x));
    }
    Ok(lgamma(x))
}

#[inline]
pub(crate) fn lgamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Digamma function ψ(x) for x > 0.
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::domain("digamma", "x > 0 and finite", x));
    }
    Ok(psi(x))
}

/// Trigamma function ψ'(x) for x > 0.
pub fn trigamma(x: f64) -> Result<f64> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::domain("trigamma", "x > 0 and finite", x));
    }
    Ok(psi1(x))
}

/// Tetragamma function ψ''(x) for x > 0.
pub fn tetragamma(x: f64) -> Result<f64> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::domain("tetragamma", "x > 0 and finite", x));
    }
    Ok(psi2(x))
}

// Recurrence up to x >= 10, then the Bernoulli asymptotic series.
pub(crate) fn psi(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let r = 1.0 / (x * x);
    let series = r
        * (1.0 / 12.0
            - r * (1.0 / 120.0
                - r * (1.0 / 252.0
                    - r * (1.0 / 240.0 - r * (1.0 / 132.0 - r * (691.0 / 32760.0 - r / 12.0))))));
    acc + x.ln() - 0.5 / x - series
}

pub(crate) fn psi1(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let r = inv * inv;
    let series = inv
        * r
        * (1.0 / 6.0
            - r * (1.0 / 30.0
                - r * (1.0 / 42.0
                    - r * (1.0 / 30.0 - r * (5.0 / 66.0 - r * (691.0 / 2730.0 - r * 7.0 / 6.0))))));
    acc + inv + 0.5 * r + series
}

pub(crate) fn psi2(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 2.0 / (x * x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let r = inv * inv;
    let series = r
        * r
        * (0.5
            - r * (1.0 / 6.0
                - r * (1.0 / 6.0
                    - r * (3.0 / 10.0 - r * (5.0 / 6.0 - r * (691.0 / 210.0 - r * 35.0 / 2.0))))));
    acc - r - r * inv - series
}

/// Modified Bessel function of the first kind, order 0 or 1.
pub fn bessel_i(order: u32, x: f64) -> Result<f64> {
    check_bessel(order, x)?;
    if x <= BESSEL_SERIES_LIMIT {
        Ok(bessel_series(order, x))
    } else {
        Ok(bessel_asymptotic_scaled(order, x) * x.exp())
    }
}

/// Exponentially scaled `e^{-x} I_j(x)`, finite for every x ≥ 0.
pub fn bessel_i_scaled(order: u32, x: f64) -> Result<f64> {
    check_bessel(order, x)?;
    Ok(bessel_scaled(order, x))
}

/// Mean resultant length of the von Mises law, `r(x) = I₁(x)/I₀(x)`.
pub fn bessel_ratio(x: f64) -> Result<f64> {
    check_bessel(0, x)?;
    Ok(mean_resultant(x))
}

/// `log I₀(x)` without overflow.
pub fn ln_bessel_i0(x: f64) -> Result<f64> {
    check_bessel(0, x)?;
    Ok(ln_i0(x))
}

const BESSEL_SERIES_LIMIT: f64 = 30.0;

fn check_bessel(order: u32, x: f64) -> Result<()> {
    if order > 1 {
        return Err(Error::domain("bessel_i", "order 0 or 1", order as f64));
    }
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::domain("bessel_i", "x >= 0 and finite", x));
    }
    Ok(())
}

pub(crate) fn bessel_scaled(order: u32, x: f64) -> f64 {
    if x <= BESSEL_SERIES_LIMIT {
        bessel_series(order, x) * (-x).exp()
    } else {
        bessel_asymptotic_scaled(order, x)
    }
}

pub(crate) fn mean_resultant(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    bessel_scaled(1, x) / bessel_scaled(0, x)
}

pub(crate) fn ln_i0(x: f64) -> f64 {
    if x <= BESSEL_SERIES_LIMIT {
        bessel_series(0, x).ln()
    } else {
        bessel_asymptotic_scaled(0, x).ln() + x
    }
}

fn bessel_series(order: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let quarter_sq = half * half;
    let nu = order as f64;
    let mut term = if order == 0 { 1.0 } else { half };
    let mut sum = term;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= quarter_sq / (k * (k + nu));
        sum += term;
        if term <= 1e-17 * sum {
            break;
        }
    }
    sum
}

fn bessel_asymptotic_scaled(order: u32, x: f64) -> f64 {
    let mu = 4.0 * (order * order) as f64;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 0.0;
    loop {
        k += 1.0;
        let odd = 2.0 * k - 1.0;
        let next = term * (odd * odd - mu) / (8.0 * k * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum / (2.0 * core::f64::consts::PI * x).sqrt()
}

/// Regularized lower and upper incomplete gamma functions `(P(a,x), Q(a,x))`.
pub fn regularized_gamma(a: f64, x: f64) -> Result<(f64, f64)> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::domain("regularized_gamma", "a > 0", a));
    }
    if x.is_nan() {
        return Err(Error::domain("regularized_gamma", "x not NaN", x));
    }
    Ok(gamma_pq(a, x))
}

pub(crate) fn gamma_pq(a: f64, x: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    if x == f64::INFINITY {
        return (1.0, 0.0);
    }
    let ln_prefactor = a * x.ln() - x - lgamma(a);
    if x < a + 1.0 {
        let mut ap = a;
        let mut del = 1.0 / a;
        let mut sum = del;
        for _ in 0..100_000 {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        let p = (sum * ln_prefactor.exp()).min(1.0);
        (p, 1.0 - p)
    } else {
        // Modified Lentz evaluation of the continued fraction for Q.
        const TINY: f64 = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..100_000 {
            let i = i as f64;
            let an = -i * (i - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-17 {
                break;
            }
        }
        let q = (ln_prefactor.exp() * h).min(1.0);
        (1.0 - q, q)
    }
}

/// Chi-square law with integer degrees of freedom and noncentrality `λ ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquare {
    df: u32,
    noncentrality: f64,
}

/// A noncentral series evaluation with the Poisson mass it left out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    pub tail_bound: f64,
    pub terms: usize,
}

impl ChiSquare {
    pub fn new(df: u32, noncentrality: f64) -> Result<Self> {
        if df == 0 {
            return Err(Error::domain("ChiSquare::new", "df >= 1", 0.0));
        }
        if !(noncentrality >= 0.0 && noncentrality.is_finite()) {
            return Err(Error::domain(
                "ChiSquare::new",
                "noncentrality >= 0 and finite",
                noncentrality,
            ));
        }
        Ok(ChiSquare { df, noncentrality })
    }

    pub fn central(df: u32) -> Result<Self> {
        Self::new(df, 0.0)
    }

    pub fn df(&self) -> u32 {
        self.df
    }

    pub fn noncentrality(&self) -> f64 {
        self.noncentrality
    }

    /// `G_{df,λ}(x)`, zero for `x ≤ 0`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.cdf_series(x).value
    }

    /// Upper tail `1 − G_{df,λ}(x)` without cancellation.
    pub fn sf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        let half_df = 0.5 * self.df as f64;
        let eval = poisson_mixture(0.5 * self.noncentrality, |j| {
            gamma_pq(half_df + j as f64, 0.5 * x).1
        });
        eval.value.clamp(0.0, 1.0)
    }

    pub fn cdf_series(&self, x: f64) -> SeriesValue {
        if x <= 0.0 || x.is_nan() {
            return SeriesValue {
                value: 0.0,
                tail_bound: 0.0,
                terms: 0,
            };
        }
        let half_df = 0.5 * self.df as f64;
        let mut eval = poisson_mixture(0.5 * self.noncentrality, |j| {
            gamma_pq(half_df + j as f64, 0.5 * x).0
        });
        eval.value = eval.value.clamp(0.0, 1.0);
        eval
    }

    /// Density `g_{df,λ}(x)`.
    pub fn pdf(&self, x: f64) -> Result<f64> {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::domain("noncentral_chisq_pdf", "x > 0 and finite", x));
        }
        Ok(self.pdf_series(x).value)
    }

    pub fn pdf_series(&self, x: f64) -> SeriesValue {
        let df = self.df as f64;
        poisson_mixture(0.5 * self.noncentrality, |j| {
            central_density(df + 2.0 * j as f64, x)
        })
    }
}

fn central_density(k: f64, x: f64) -> f64 {
    let half = 0.5 * k;
    ((half - 1.0) * x.ln() - 0.5 * x - half * core::f64::consts::LN_2 - lgamma(half)).exp()
}

// Sums Σ_j Pois(j; mean) f(j) outward from the mode until the omitted
// Poisson mass is provably below MIXTURE_TAIL_TOLERANCE.
fn poisson_mixture(mean: f64, f: impl Fn(u32) -> f64) -> SeriesValue {
    if mean == 0.0 {
        return SeriesValue {
            value: f(0),
            tail_bound: 0.0,
            terms: 1,
        };
    }
    let budget = 0.5 * MIXTURE_TAIL_TOLERANCE;
    let mode = mean.floor() as u32;
    let mode_f = mode as f64;
    let w_mode = (-mean + mode_f * mean.ln() - lgamma(mode_f + 1.0)).exp();
    let mut sum = w_mode * f(mode);
    let mut terms = 1usize;

    let mut lower_bound = 0.0;
    let mut w = w_mode;
    let mut j = mode;
    while j > 0 {
        w *= j as f64 / mean;
        j -= 1;
        sum += w * f(j);
        terms += 1;
        if j == 0 {
            lower_bound = 0.0;
            break;
        }
        let ratio = j as f64 / mean;
        if ratio < 1.0 {
            lower_bound = w * ratio / (1.0 - ratio);
            if lower_bound < budget {
                break;
            }
        }
    }

    let mut w = w_mode;
    let mut j = mode;
    let upper_bound = loop {
        j += 1;
        w *= mean / j as f64;
        sum += w * f(j);
        terms += 1;
        let ratio = mean / (j as f64 + 1.0);
        if ratio < 1.0 {
            let bound = w * ratio / (1.0 - ratio);
            if bound < budget {
                break bound;
            }
        }
    };

    SeriesValue {
        value: sum,
        tail_bound: lower_bound + upper_bound,
        terms,
    }
}

/// Central chi-square `p`-quantile.
pub fn chisq_quantile(p: f64, df: u32) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain("chisq_quantile", "0 < p < 1", p));
    }
    if df == 0 {
        return Err(Error::domain("chisq_quantile", "df >= 1", 0.0));
    }
    let half_df = 0.5 * df as f64;
    let upper = p > 0.5;
    let target = if upper { 1.0 - p } else { p };
    // Residual on whichever tail is smaller keeps full relative precision.
    let residual = |x: f64| {
        let (lower, upper_tail) = gamma_pq(half_df, 0.5 * x);
        if upper {
            target - upper_tail
        } else {
            lower - target
        }
    };
    let dff = df as f64;
    let mut lo = 1e-12;
    let mut hi = dff + 20.0 * (2.0 * dff).sqrt() + 100.0;
    while residual(lo) > 0.0 && lo > 1e-300 {
        lo *= 1e-3;
    }
    while residual(hi) < 0.0 {
        hi *= 2.0;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..300 {
        let r = residual(x);
        if r == 0.0 {
            return Ok(x);
        }
        if r > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        // Newton step on the cdf, kept inside the bracket.
        let density = central_density(dff, x);
        let newton = x - r / density;
        x = if density > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (hi - lo) <= 1e-15 * x.abs() {
            break;
        }
        if r.abs() <= 1e-16 * target {
            break;
        }
    }
    Ok(x)
}

// Complex log-gamma, digamma and trigamma for Re z > 0; only needed by the
// generalized hyperbolic secant normalizer.
pub(crate) fn ln_gamma_complex(z: Complex64) -> Complex64 {
    let mut z = z;
    let mut shift = Complex64::new(0.0, 0.0);
    while z.re < 15.0 {
        shift += z.ln();
        z += 1.0;
    }
    let inv = z.inv();
    let inv2 = inv * inv;
    let series = inv
        * (1.0 / 12.0
            - inv2
                * (1.0 / 360.0
                    - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0 - inv2 * (1.0 / 1188.0)))));
    (z - 0.5) * z.ln() - z + LN_SQRT_2PI + series - shift
}

pub(crate) fn digamma_complex(z: Complex64) -> Complex64 {
    let mut z = z;
    let mut acc = Complex64::new(0.0, 0.0);
    while z.re < 15.0 {
        acc -= z.inv();
        z += 1.0;
    }
    let inv = z.inv();
    let r = inv * inv;
    let series = r
        * (1.0 / 12.0
            - r * (1.0 / 120.0
                - r * (1.0 / 252.0 - r * (1.0 / 240.0 - r * (1.0 / 132.0)))));
    acc + z.ln() - inv * 0.5 - series
}

pub(crate) fn trigamma_complex(z: Complex64) -> Complex64 {
    let mut z = z;
    let mut acc = Complex64::new(0.0, 0.0);
    while z.re < 15.0 {
        acc += (z * z).inv();
        z += 1.0;
    }
    let inv = z.inv();
    let r = inv * inv;
    let series = inv
        * r
        * (1.0 / 6.0 - r * (1.0 / 30.0 - r * (1.0 / 42.0 - r * (1.0 / 30.0 - r * (5.0 / 66.0)))));
    acc + inv + r * 0.5 + series
}
