//! Maximum likelihood fitting: Fisher scoring (IRLS) for β, a monotone root
//! solve for φ, and restricted fits with β₂ held fixed.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // inherent float methods exist only when std is linked
use num_traits::Float;

use crate::design::{DesignEval, Predictor, RegressionSpec};
use crate::error::{Error, Result};
use crate::family::Family;
use crate::linalg::{check_full_column_rank, spd_solve, weighted_gram};
use crate::link::{LinkScale, ModelLink};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Bound on the largest absolute change in β.
    pub step_tolerance: f64,
    /// Bound on the largest score entry, relative to `1 + |Σt|`.
    pub score_tolerance: f64,
    pub max_halvings: u32,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 200,
            step_tolerance: 1e-10,
            score_tolerance: 1e-8,
            max_halvings: 30,
        }
    }
}

/// One accepted scoring iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IrlsStep {
    pub iteration: usize,
    /// `Σ t(yₗ, θₗ)` after the step.
    pub kernel: f64,
    pub max_step: f64,
    pub score_max: f64,
    pub halvings: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BetaFit {
    pub beta: DVector<f64>,
    pub iterations: usize,
    pub trace: Vec<IrlsStep>,
}

/// β₂ fixed at `beta20`, with `q` nuisance parameters left free.
#[derive(Debug, Clone, PartialEq)]
pub struct Restriction {
    pub q: usize,
    pub beta20: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub family: Family,
    pub link: ModelLink,
    pub spec: RegressionSpec,
    pub y: DVector<f64>,
    pub beta_hat: DVector<f64>,
    pub phi_hat: f64,
    pub design: DesignEval,
    pub eta: DVector<f64>,
    pub theta: DVector<f64>,
    /// dθ/dη per observation.
    pub theta_d1: DVector<f64>,
    /// d²θ/dη² per observation.
    pub theta_d2: DVector<f64>,
    /// `wₗ = −D₂ₗ (dθₗ/dηₗ)²`.
    pub w: DVector<f64>,
    /// `Nₗ = −D₂ₗ⁻¹ (dθₗ/dηₗ)⁻¹`.
    pub n_scale: DVector<f64>,
    pub tdot: DVector<f64>,
    /// `K_β = φ X*ᵀWX*`.
    pub info_beta: DMatrix<f64>,
    /// `α₂ = n a₂''(φ̂)` for proper dispersion models.
    pub alpha2: Option<f64>,
    pub loglik: f64,
    /// `Σ t(yₗ, θ̂ₗ)`.
    pub kernel: f64,
    pub iterations: usize,
    pub converged: bool,
    pub restricted: Option<Restriction>,
    pub trace: Vec<IrlsStep>,
}

impl FitResult {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.beta_hat.len()
    }

    /// Score for β, `φ̂ X*ᵀ(θ' ⊙ ṫ)`.
    pub fn score(&self) -> DVector<f64> {
        self.design.jac.transpose() * self.theta_d1.component_mul(&self.tdot) * self.phi_hat
    }

    /// Standard errors from `K_β⁻¹` and `−1/α₂`.
    pub fn standard_errors(&self) -> Result<(DVector<f64>, Option<f64>)> {
        let inv = crate::linalg::spd_inverse(&self.info_beta, "information matrix")?;
        let se = DVector::from_iterator(self.p(), (0..self.p()).map(|i| inv[(i, i)].sqrt()));
        let se_phi = self.alpha2.map(|a| (-1.0 / a).sqrt());
        Ok((se, se_phi))
    }
}

struct State {
    eval: DesignEval,
    theta: DVector<f64>,
    d1: DVector<f64>,
    d2: DVector<f64>,
    tdot: DVector<f64>,
    kernel: f64,
}

fn state_at(
    family: Family,
    link: &ModelLink,
    spec: &RegressionSpec,
    y: &DVector<f64>,
    beta: &DVector<f64>,
) -> Result<State> {
    let eval = spec.evaluate_raw(beta)?;
    let n = y.len();
    let mut theta = DVector::zeros(n);
    let mut d1 = DVector::zeros(n);
    let mut d2 = DVector::zeros(n);
    let mut tdot = DVector::zeros(n);
    let mut kernel = 0.0;
    for l in 0..n {
        let d = link
            .theta_derivs(family, eval.eta[l])
            .map_err(|_| Error::ThetaOutOfDomain {
                index: l,
                theta: f64::NAN,
                family: family.name(),
            })?;
        family.check_theta(l, d.theta)?;
        let th = family.normalize_theta(d.theta);
        theta[l] = th;
        d1[l] = d.d1;
        d2[l] = d.d2;
        tdot[l] = family.dt(y[l], th);
        kernel += family.t(y[l], th);
    }
    if !kernel.is_finite() {
        return Err(Error::ThetaOutOfDomain {
            index: 0,
            theta: f64::NAN,
            family: family.name(),
        });
    }
    Ok(State {
        eval,
        theta,
        d1,
        d2,
        tdot,
        kernel,
    })
}

fn check_inputs(family: Family, link: &ModelLink, spec: &RegressionSpec, y: &DVector<f64>) -> Result<()> {
    link.validate(family)?;
    if y.len() != spec.n() {
        return Err(Error::Dimension(format!(
            "response has {} entries, covariates have {} rows",
            y.len(),
            spec.n()
        )));
    }
    for (l, &yl) in y.iter().enumerate() {
        family.check_response(l, yl)?;
    }
    Ok(())
}

// Precision used to scale the working weights; only von Mises has a
// φ-dependent D₂, and there it only rescales the step.
fn working_phi(family: Family, y: &DVector<f64>, theta: &DVector<f64>) -> f64 {
    match family {
        Family::VonMises => fit_phi(family, y, theta, 1.0).unwrap_or(1.0),
        _ => 1.0,
    }
}

fn free_score(state: &State, free: usize) -> DVector<f64> {
    let jf = state.eval.jac.columns(0, free);
    jf.transpose() * state.d1.component_mul(&state.tdot)
}

// Scoring over the leading `free` coordinates of β, the rest held fixed.
fn irls(
    family: Family,
    link: &ModelLink,
    spec: &RegressionSpec,
    y: &DVector<f64>,
    start: &DVector<f64>,
    free: usize,
    opts: &FitOptions,
) -> Result<BetaFit> {
    let mut beta = start.clone();
    let mut state = state_at(family, link, spec, y, &beta)?;
    check_full_column_rank(&state.eval.jac.columns(0, free).into_owned())?;
    let mut trace = Vec::new();
    if free == 0 {
        return Ok(BetaFit {
            beta,
            iterations: 0,
            trace,
        });
    }
    let mut last_step = f64::INFINITY;
    for iteration in 1..=opts.max_iterations {
        let phi_w = working_phi(family, y, &state.theta);
        let n = y.len();
        let w = DVector::from_iterator(
            n,
            (0..n).map(|l| -family.d2(state.theta[l], phi_w) * state.d1[l] * state.d1[l]),
        );
        let jf = state.eval.jac.columns(0, free).into_owned();
        let gram = weighted_gram(&jf, &w);
        let rhs = free_score(&state, free);
        let delta = spd_solve(&gram, &rhs, "X'WX")?;

        let mut scale = 1.0;
        let mut halvings = 0;
        let mut accepted = None;
        let mut saw_valid = false;
        let slack = 1e-13 * (1.0 + state.kernel.abs());
        loop {
            let mut candidate = beta.clone();
            for r in 0..free {
                candidate[r] += scale * delta[r];
            }
            if let Ok(next) = state_at(family, link, spec, y, &candidate) {
                saw_valid = true;
                if next.kernel >= state.kernel - slack {
                    accepted = Some((candidate, next));
                    break;
                }
            }
            if halvings == opts.max_halvings {
                break;
            }
            halvings += 1;
            scale *= 0.5;
        }

        let score_bound = opts.score_tolerance * (1.0 + state.kernel.abs());
        let Some((candidate, next)) = accepted else {
            if !saw_valid {
                return Err(Error::DomainExit { iteration });
            }
            // No ascent direction left at working precision.
            let score_max = free_score(&state, free).amax();
            trace.push(IrlsStep {
                iteration,
                kernel: state.kernel,
                max_step: 0.0,
                score_max,
                halvings,
            });
            if score_max <= score_bound {
                return Ok(BetaFit {
                    beta,
                    iterations: iteration,
                    trace,
                });
            }
            return Err(Error::NotConverged {
                iterations: iteration,
                last_step,
                trace,
            });
        };
        let max_step = (0..free)
            .map(|r| (candidate[r] - beta[r]).abs())
            .fold(0.0, f64::max);
        beta = candidate;
        state = next;
        last_step = max_step;
        let score_max = free_score(&state, free).amax();
        trace.push(IrlsStep {
            iteration,
            kernel: state.kernel,
            max_step,
            score_max,
            halvings,
        });
        if max_step <= opts.step_tolerance && score_max <= opts.score_tolerance * (1.0 + state.kernel.abs()) {
            return Ok(BetaFit {
                beta,
                iterations: iteration,
                trace,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: opts.max_iterations,
        last_step,
        trace,
    })
}

/// Fisher scoring for β over all p coordinates. β̂ does not depend on φ.
pub fn fit_beta(
    family: Family,
    link: &ModelLink,
    spec: &RegressionSpec,
    y: &DVector<f64>,
    beta0: &DVector<f64>,
    opts: &FitOptions,
) -> Result<BetaFit> {
    check_inputs(family, link, spec, y)?;
    irls(family, link, spec, y, beta0, spec.p(), opts)
}

/// Solves `Σ{t(yₗ, θₗ) + c⁽¹⁾(yₗ, φ)} = 0` for φ > 0.
pub fn fit_phi(family: Family, y: &DVector<f64>, theta: &DVector<f64>, phi0_guess: f64) -> Result<f64> {
    if y.len() != theta.len() || y.is_empty() {
        return Err(Error::Dimension("fit_phi needs matching non-empty y and theta".into()));
    }
    let n = y.len() as f64;
    let mean_t = y.iter().zip(theta.iter()).map(|(&yl, &th)| family.t(yl, th)).sum::<f64>() / n;
    let guess = if phi0_guess.is_finite() && phi0_guess > 0.0 {
        phi0_guess
    } else {
        1.0
    };
    match family.pdm() {
        Some(crate::family::Pdm::LogHalf) => {
            // a₂' = 1/(2φ) inverts exactly.
            let target = -mean_t;
            if !(target > 0.0) {
                return Err(Error::PhiNoRoot { target });
            }
            Ok(0.5 / target)
        }
        Some(pdm) => {
            let target = -mean_t;
            solve_decreasing(|phi| (pdm.a2_1(phi) - target, pdm.a2_2(phi)), guess, target)
        }
        None => solve_decreasing(
            |phi| {
                let mut f = mean_t;
                let mut df = 0.0;
                for &yl in y.iter() {
                    f += family.c1(yl, phi) / n;
                    df += family.c2(yl, phi) / n;
                }
                (f, df)
            },
            guess,
            -mean_t,
        ),
    }
}

const PHI_MIN: f64 = 1e-8;
const PHI_MAX: f64 = 1e8;

// Root of a decreasing function on [1e-8, 1e8] by bracketed Newton.
fn solve_decreasing(f: impl Fn(f64) -> (f64, f64), guess: f64, target: f64) -> Result<f64> {
    let no_root = || Error::PhiNoRoot { target };
    let mut lo = guess.clamp(PHI_MIN, PHI_MAX);
    let mut hi = lo;
    let mut f_lo = f(lo).0;
    while !(f_lo > 0.0) {
        if lo <= PHI_MIN || f_lo.is_nan() {
            return Err(no_root());
        }
        hi = lo;
        lo = (lo * 0.25).max(PHI_MIN);
        f_lo = f(lo).0;
    }
    let mut f_hi = f(hi).0;
    while !(f_hi < 0.0) {
        if f_hi == 0.0 {
            return Ok(hi);
        }
        if hi >= PHI_MAX || f_hi.is_nan() {
            return Err(no_root());
        }
        lo = hi;
        hi = (hi * 4.0).min(PHI_MAX);
        f_hi = f(hi).0;
    }
    let scale = 1.0 + target.abs();
    let mut x = if guess > lo && guess < hi { guess } else { (lo * hi).sqrt() };
    for _ in 0..500 {
        let (fx, dfx) = f(x);
        if fx.abs() <= 1e-14 * scale {
            return Ok(x);
        }
        if fx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / dfx;
        let next = if dfx < 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 1e-15 * x || hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

/// Method-of-moments style start: family pseudo-θ per response, mapped
/// through the link and regressed on the covariates.
pub fn default_start(
    family: Family,
    link: &ModelLink,
    spec: &RegressionSpec,
    y: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = y.len();
    let eta = DVector::from_iterator(
        n,
        y.iter().map(|&yl| {
            let theta = family.pseudo_theta(yl);
            let x = match link.scale {
                LinkScale::Theta => theta,
                LinkScale::Mean => family.mean(theta).unwrap_or(yl),
            };
            let x = clamp_to_link(link.link, x);
            link.link.eta_of(x).unwrap_or(0.0)
        }),
    );
    match &spec.predictor {
        Predictor::Linear => {
            let x = &spec.covariates;
            let beta = least_squares(x, &eta)?;
            if state_at(family, link, spec, y, &beta).is_ok() {
                return Ok(beta);
            }
            // Fall back to an intercept-only start when the column is constant.
            let p = spec.p();
            if (0..n).all(|l| x[(l, 0)] == x[(0, 0)]) && x[(0, 0)] != 0.0 {
                let mut b = DVector::zeros(p);
                b[0] = eta.mean() / x[(0, 0)];
                if state_at(family, link, spec, y, &b).is_ok() {
                    return Ok(b);
                }
            }
            Ok(beta)
        }
        Predictor::ExpCurve => Ok(DVector::from_vec(alloc::vec![eta.mean(), 1e-3, 1e-3])),
        Predictor::Custom(_) => Err(Error::Contract(
            "custom predictors need an explicit starting beta".into(),
        )),
    }
}

fn clamp_to_link(link: crate::link::Link, x: f64) -> f64 {
    use crate::link::Link;
    match link {
        Link::Log | Link::Power { .. } => x.max(1e-3),
        Link::Reciprocal => {
            if x.abs() < 1e-3 {
                1e-3f64.copysign(x)
            } else {
                x
            }
        }
        Link::TanHalf => x.clamp(-3.0, 3.0),
        Link::Identity => x,
    }
}

fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    check_full_column_rank(x)?;
    let gram = x.transpose() * x;
    spd_solve(&gram, &(x.transpose() * y), "X'X")
}

fn assemble(
    family: Family,
    link: &ModelLink,
    spec: &RegressionSpec,
    y: &DVector<f64>,
    beta: BetaFit,
    restricted: Option<Restriction>,
) -> Result<FitResult> {
    let state = state_at(family, link, spec, y, &beta.beta)?;
    let phi = fit_phi(family, y, &state.theta, 1.0)?;
    let n = y.len();
    let mut w = DVector::zeros(n);
    let mut n_scale = DVector::zeros(n);
    let mut loglik = 0.0;
    for l in 0..n {
        let d2 = family.d2(state.theta[l], phi);
        w[l] = -d2 * state.d1[l] * state.d1[l];
        n_scale[l] = -1.0 / (d2 * state.d1[l]);
        loglik += phi * family.t(y[l], state.theta[l]) + family.c(y[l], phi);
    }
    let info_beta = weighted_gram(&state.eval.jac, &w) * phi;
    Ok(FitResult {
        family,
        link: *link,
        spec: spec.clone(),
        y: y.clone(),
        beta_hat: beta.beta,
        phi_hat: phi,
        eta: state.eval.eta.clone(),
        design: state.eval,
        theta: state.theta,
        theta_d1: state.d1,
        theta_d2: state.d2,
        w,
        n_scale,
        tdot: state.tdot,
        info_beta,
        alpha2: family.pdm().map(|pdm| n as f64 * pdm.a2_2(phi)),
        loglik,
        kernel: state.kernel,
        iterations: beta.iterations,
        converged: true,
        restricted,
        trace: beta.trace,
    })
}

/// Unrestricted fit of (β, φ). Uses [`default_start`] when `beta0` is `None`.
pub fn fit_full(
    family: Family,
    link: &ModelLink,
    spec: &RegressionSpec,
    y: &DVector<f64>,
    beta0: Option<&DVector<f64>>,
    opts: &FitOptions,
) -> Result<FitResult> {
    check_inputs(family, link, spec, y)?;
    let start = match beta0 {
        Some(b) => b.clone(),
        None => default_start(family, link, spec, y)?,
    };
    let beta = irls(family, link, spec, y, &start, spec.p(), opts)?;
    assemble(family, link, spec, y, beta, None)
}

/// Fit with β₂ ≡ `beta20`; `beta1_start` seeds the free block (for instance
/// with the unrestricted β̂₁).
pub fn fit_restricted(
    family: Family,
    link: &ModelLink,
    spec: &RegressionSpec,
    y: &DVector<f64>,
    beta20: &DVector<f64>,
    beta1_start: Option<&DVector<f64>>,
    opts: &FitOptions,
) -> Result<FitResult> {
    check_inputs(family, link, spec, y)?;
    let p = spec.p();
    let q = spec.q;
    if q >= p {
        return Err(Error::Contract(format!("restricted fit needs q < p (q = {q}, p = {p})")));
    }
    if beta20.len() != p - q {
        return Err(Error::Dimension(format!(
            "beta20 has length {}, hypothesis fixes {} parameters",
            beta20.len(),
            p - q
        )));
    }
    let mut start = DVector::zeros(p);
    start.rows_mut(q, p - q).copy_from(beta20);
    match beta1_start {
        Some(b1) if b1.len() == q => start.rows_mut(0, q).copy_from(b1),
        Some(b1) => {
            return Err(Error::Dimension(format!(
                "beta1 start has length {}, expected {q}",
                b1.len()
            )))
        }
        None if q > 0 => {
            let full = default_start(family, link, spec, y)?;
            start.rows_mut(0, q).copy_from(&full.rows(0, q));
        }
        None => {}
    }
    let beta = irls(family, link, spec, y, &start, q, opts)?;
    assemble(
        family,
        link,
        spec,
        y,
        beta,
        Some(Restriction {
            q,
            beta20: beta20.clone(),
        }),
    )
}
