//! Independent oracles shared by the integration tests and the acceptance
//! binary. Nothing here calls the expansion code: predictors, inverses and
//! traces are re-derived with plain loops over observations.

#![allow(dead_code)]

pub mod criteria;

use std::sync::Arc;

use dm_testlab_core::{
    CustomPredictor, DMatrix, DVector, ExpansionInputs, Family, Link, ModelLink, Predictor, RegressionSpec,
};

pub type Rows = [[f64; 3]; 4];

/// A null point plus a local alternative.
#[derive(Debug, Clone)]
pub struct Instance {
    pub family: Family,
    pub link: ModelLink,
    pub spec: RegressionSpec,
    pub beta: DVector<f64>,
    pub phi: f64,
    pub eps: DVector<f64>,
}

impl Instance {
    pub fn label(&self) -> String {
        format!(
            "{} / {} / {} n={} p={} q={}",
            self.family.name(),
            self.link,
            self.spec.predictor.name(),
            self.spec.n(),
            self.spec.p(),
            self.spec.q
        )
    }
}

/// A family/link pairing with an η window that keeps θ in the family domain.
#[derive(Debug, Clone, Copy)]
pub struct Combo {
    pub family: Family,
    pub link: ModelLink,
    pub eta: (f64, f64),
}

fn th(family: Family, link: Link, eta: (f64, f64)) -> Combo {
    Combo { family, link: ModelLink::new(link), eta }
}

fn mu(family: Family, link: Link, eta: (f64, f64)) -> Combo {
    Combo { family, link: ModelLink::on_mean(link), eta }
}

/// Every built-in family with each link that has a usable domain.
pub fn combos() -> Vec<Combo> {
    use Family::*;
    use Link::*;
    let cube = Link::power(-1, 3).unwrap();
    let half = Link::power(-1, 2).unwrap();
    vec![
        th(Normal, Identity, (-2.0, 2.0)),
        th(Normal, Log, (-1.0, 1.0)),
        mu(Normal, Identity, (-2.0, 2.0)),
        mu(Normal, Log, (-1.0, 1.0)),
        th(InverseGaussian, Identity, (-3.0, -0.5)),
        mu(InverseGaussian, Identity, (0.5, 3.0)),
        th(InverseGaussian, Reciprocal, (-3.0, -0.5)),
        mu(InverseGaussian, Log, (-1.0, 1.0)),
        mu(InverseGaussian, Reciprocal, (0.5, 2.0)),
        mu(InverseGaussian, half, (0.5, 2.0)),
        th(ReciprocalInverseGaussian, Identity, (0.5, 3.0)),
        th(ReciprocalInverseGaussian, Log, (-1.0, 1.0)),
        th(Gamma, Identity, (-3.0, -0.5)),
        th(Gamma, Reciprocal, (-3.0, -0.5)),
        mu(Gamma, Log, (-1.0, 1.0)),
        mu(Gamma, Identity, (0.5, 3.0)),
        mu(Gamma, Reciprocal, (0.5, 2.0)),
        mu(Gamma, cube, (0.5, 2.0)),
        th(ReciprocalGamma, Identity, (-3.0, -0.5)),
        th(ReciprocalGamma, Reciprocal, (-3.0, -0.5)),
        th(LogGamma, Identity, (-2.0, 2.0)),
        th(LogGamma, Log, (-1.0, 1.0)),
        th(VonMises, Identity, (-1.0, 1.0)),
        th(VonMises, TanHalf, (-1.0, 1.0)),
        th(GeneralizedHyperbolicSecant, Identity, (-1.0, 1.0)),
        mu(GeneralizedHyperbolicSecant, Identity, (-1.5, 1.5)),
    ]
}

/// `η = β₃ + β₂ exp(β₁ x)`: an exponential curve whose rate sits in the
/// nuisance block, so the β₁₁ Hessian block (and with it `J`) is non-zero.
pub struct RateFirst;

impl CustomPredictor for RateFirst {
    fn n_params(&self) -> usize {
        3
    }

    fn eta(&self, x: &[f64], b: &[f64]) -> f64 {
        b[2] + b[1] * (b[0] * x[0]).exp()
    }

    fn gradient(&self, x: &[f64], b: &[f64]) -> Vec<f64> {
        let e = (b[0] * x[0]).exp();
        vec![b[1] * x[0] * e, e, 1.0]
    }

    fn hessian(&self, x: &[f64], b: &[f64]) -> DMatrix<f64> {
        let e = (b[0] * x[0]).exp();
        let mut h = DMatrix::zeros(3, 3);
        h[(0, 0)] = b[1] * x[0] * x[0] * e;
        h[(0, 1)] = x[0] * e;
        h[(1, 0)] = x[0] * e;
        h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Linear,
    ExpCurve,
    RateFirst,
}

pub const SHAPES: [Shape; 3] = [Shape::Linear, Shape::ExpCurve, Shape::RateFirst];

/// Builds an instance from a stream of U(0,1) draws. `q = None` draws q too.
pub fn instance(
    combo: Combo,
    shape: Shape,
    n: usize,
    p_linear: usize,
    q: Option<usize>,
    u: &mut dyn FnMut() -> f64,
) -> Instance {
    let (lo, hi) = combo.eta;
    let mid = 0.5 * (lo + hi);
    let span = hi - lo;
    let sign = |u: &mut dyn FnMut() -> f64| if u() < 0.5 { -1.0 } else { 1.0 };
    let (predictor, x, beta) = match shape {
        Shape::Linear => {
            let p = p_linear;
            let mut x = DMatrix::from_fn(n, p, |_, j| if j == 0 { 1.0 } else { 0.0 });
            for i in 0..n {
                for j in 1..p {
                    x[(i, j)] = u();
                }
            }
            let mut beta = DVector::zeros(p);
            beta[0] = mid;
            for j in 1..p {
                beta[j] = sign(u) * (0.2 + 0.8 * u()) * span / (4.0 * (p - 1) as f64);
            }
            (Predictor::Linear, x, beta)
        }
        Shape::ExpCurve | Shape::RateFirst => {
            let x = DMatrix::from_fn(n, 1, |_, _| 0.0).map(|_: f64| 3.0 * u() - 1.5);
            let rate = sign(u) * (0.8 + 0.7 * u());
            let amp = sign(u) * (0.3 + 0.7 * u()) * span / (4.0 * (1.5 * rate.abs()).exp());
            if shape == Shape::ExpCurve {
                (Predictor::ExpCurve, x, DVector::from_vec(vec![mid - amp, amp, rate]))
            } else {
                (Predictor::Custom(Arc::new(RateFirst)), x, DVector::from_vec(vec![rate, amp, mid - amp]))
            }
        }
    };
    let p = beta.len();
    let q = q.unwrap_or_else(|| ((u() * p as f64) as usize).min(p - 1));
    let spec = RegressionSpec::new(predictor, x, q).unwrap();
    let phi = 0.5 + 4.5 * u();
    let eps = DVector::from_fn(p - q, |_, _| (u() - 0.5) * 0.8);
    Instance { family: combo.family, link: combo.link, spec, beta, phi, eps }
}

/// Condition number of `X*ᵀWX*` after scaling it to unit diagonal. Two
/// correct evaluations can only be expected to agree to about κ·2⁻⁵²,
/// so the 1e-12 comparisons are restricted to κ ≤ [`MAX_KAPPA`].
pub fn scaled_condition(inst: &Instance) -> f64 {
    let sq = scalar_quantities(inst);
    let eval = inst.spec.evaluate(&inst.beta).unwrap();
    let p = sq.p;
    let mut k = DMatrix::<f64>::zeros(p, p);
    for l in 0..sq.n {
        for r in 0..p {
            for c in 0..p {
                k[(r, c)] += sq.w[l] * eval.jac[(l, r)] * eval.jac[(l, c)];
            }
        }
    }
    let d: Vec<f64> = (0..p).map(|i| 1.0 / k[(i, i)].sqrt()).collect();
    let k = DMatrix::from_fn(p, p, |i, j| d[i] * k[(i, j)] * d[j]);
    let sv = k.singular_values();
    sv.max() / sv.min()
}

pub const MAX_KAPPA: f64 = 1e4;

// ---------------------------------------------------------------------------
// Plain-loop linear algebra.

pub type Mat = Vec<Vec<f64>>;

/// Inverse of a symmetric positive definite matrix: Gauss–Jordan on the
/// unit-diagonal rescaling `D A D`, then undo the scaling.
pub fn inverse(a: &Mat) -> Mat {
    let d: Vec<f64> = (0..a.len()).map(|i| 1.0 / a[i][i].sqrt()).collect();
    let scaled: Mat = (0..a.len()).map(|i| (0..a.len()).map(|j| d[i] * a[i][j] * d[j]).collect()).collect();
    let mut inv = gauss_jordan(&scaled);
    for (i, row) in inv.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v *= d[i] * d[j];
        }
    }
    inv
}

fn gauss_jordan(a: &Mat) -> Mat {
    let n = a.len();
    let mut m: Mat = a.iter().map(|r| r.clone()).collect();
    let mut inv: Mat = (0..n).map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect()).collect();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, piv);
        inv.swap(c, piv);
        let d = m[c][c];
        assert!(d.abs() > 1e-300, "singular matrix in oracle");
        for j in 0..n {
            m[c][j] /= d;
            inv[c][j] /= d;
        }
        for i in 0..n {
            if i != c {
                let f = m[i][c];
                if f != 0.0 {
                    for j in 0..n {
                        m[i][j] -= f * m[c][j];
                        inv[i][j] -= f * inv[c][j];
                    }
                }
            }
        }
    }
    inv
}

fn quad(a: &Mat, x: &[f64], y: &[f64]) -> f64 {
    let mut s = 0.0;
    for (i, xi) in x.iter().enumerate() {
        for (j, yj) in y.iter().enumerate() {
            s += xi * a[i][j] * yj;
        }
    }
    s
}

// ---------------------------------------------------------------------------
// Predictors re-derived by hand.

struct Local {
    eta: f64,
    x: Vec<f64>,
    hess: Vec<Vec<f64>>,
}

fn local(spec: &RegressionSpec, beta: &DVector<f64>, l: usize) -> Local {
    let p = beta.len();
    match spec.predictor {
        Predictor::Linear => {
            let x: Vec<f64> = (0..p).map(|j| spec.covariates[(l, j)]).collect();
            let eta = x.iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
            Local { eta, x, hess: vec![vec![0.0; p]; p] }
        }
        Predictor::ExpCurve => {
            let z = spec.covariates[(l, 0)];
            let ex = (beta[2] * z).exp();
            let mut hess = vec![vec![0.0; 3]; 3];
            hess[1][2] = z * ex;
            hess[2][1] = z * ex;
            hess[2][2] = beta[1] * z * z * ex;
            Local {
                eta: beta[0] + beta[1] * ex,
                x: vec![1.0, ex, beta[1] * z * ex],
                hess,
            }
        }
        // Only `RateFirst` is ever built as a custom predictor.
        Predictor::Custom(_) => {
            let z = spec.covariates[(l, 0)];
            let ex = (beta[0] * z).exp();
            let mut hess = vec![vec![0.0; 3]; 3];
            hess[0][0] = beta[1] * z * z * ex;
            hess[0][1] = z * ex;
            hess[1][0] = z * ex;
            Local {
                eta: beta[2] + beta[1] * ex,
                x: vec![beta[1] * z * ex, ex, 1.0],
                hess,
            }
        }
    }
}

/// Everything the coefficient formulas consume, one entry per observation.
pub struct ScalarQuantities {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub phi: f64,
    pub w: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub e: Vec<f64>,
    pub z: Vec<f64>,
    pub z1: Vec<f64>,
    pub t: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub pp: Vec<f64>,
    pub h: Vec<f64>,
    pub j: Vec<f64>,
    pub u: Vec<f64>,
    pub lambda: f64,
}

pub fn scalar_quantities(inst: &Instance) -> ScalarQuantities {
    let spec = &inst.spec;
    let (n, p, q, phi) = (spec.n(), spec.p(), spec.q, inst.phi);
    let locals: Vec<Local> = (0..n).map(|l| local(spec, &inst.beta, l)).collect();
    let (mut w, mut f, mut g, mut e) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for l in 0..n {
        let d = inst.link.theta_derivs(inst.family, locals[l].eta).unwrap();
        let theta = inst.family.normalize_theta(d.theta);
        let d2 = inst.family.d2(theta, phi);
        let d3 = inst.family.d3(theta, phi);
        let d2p = inst.family.d2_prime(theta, phi);
        w[l] = -d2 * d.d1 * d.d1;
        g[l] = -d.d1 * d.d2 * d2;
        f[l] = g[l] - d.d1 * d.d1 * d.d1 * d3;
        e[l] = -d.d1 * d.d1 * d.d1 * d2p;
    }
    let mut k = vec![vec![0.0; p]; p];
    for l in 0..n {
        for r in 0..p {
            for s in 0..p {
                k[r][s] += w[l] * locals[l].x[r] * locals[l].x[s];
            }
        }
    }
    let kinv = inverse(&k);
    let k11: Mat = (0..q).map(|r| (0..q).map(|s| k[r][s]).collect()).collect();
    let k11inv = if q > 0 { inverse(&k11) } else { Vec::new() };

    let eps: Vec<f64> = inst.eps.iter().copied().collect();
    let mut eps_star = vec![0.0; p];
    for r in 0..q {
        let mut s = 0.0;
        for a in 0..q {
            for bcol in 0..p - q {
                s += k11inv[r][a] * k[a][q + bcol] * eps[bcol];
            }
        }
        eps_star[r] = s;
    }
    for bcol in 0..p - q {
        eps_star[q + bcol] = -eps[bcol];
    }
    let mut delta = vec![0.0; p];
    delta[q..].copy_from_slice(&eps);
    // M = K⁻¹/φ − blockdiag(K₁₁⁻¹/φ, 0); h uses φM.
    let mut phi_m = kinv.clone();
    for r in 0..q {
        for s in 0..q {
            phi_m[r][s] -= k11inv[r][s];
        }
    }

    let mut out = ScalarQuantities {
        n,
        p,
        q,
        phi,
        w,
        f,
        g,
        e,
        z: vec![0.0; n],
        z1: vec![0.0; n],
        t: vec![0.0; n],
        b: vec![0.0; n],
        c: vec![0.0; n],
        pp: vec![0.0; n],
        h: vec![0.0; n],
        j: vec![0.0; n],
        u: vec![0.0; n],
        lambda: 0.0,
    };
    for (l, loc) in locals.iter().enumerate() {
        out.z[l] = quad(&kinv, &loc.x, &loc.x);
        if q > 0 {
            out.z1[l] = quad(&k11inv, &loc.x[..q], &loc.x[..q]);
        }
        out.t[l] = loc.x.iter().zip(&eps_star).map(|(a, b)| a * b).sum();
        out.b[l] = loc.x[q..].iter().zip(&eps).map(|(a, b)| a * b).sum();
        out.c[l] = quad(&loc.hess, &eps_star, &eps_star);
        out.pp[l] = quad(&loc.hess, &delta, &eps_star);
        let he: Vec<f64> = (0..p).map(|r| (0..p).map(|s| loc.hess[r][s] * eps_star[s]).sum()).collect();
        out.h[l] = quad(&phi_m, &loc.x, &he);
        let mut u = 0.0;
        for r in 0..p {
            for s in 0..p {
                u += loc.hess[r][s] * kinv[s][r];
            }
        }
        out.u[l] = u;
        let mut j = 0.0;
        for r in 0..q {
            for s in 0..q {
                j += loc.hess[r][s] * k11inv[s][r];
            }
        }
        out.j[l] = j;
    }
    // λ = φ εᵀ(K₂₂ − K₂₁K₁₁⁻¹K₁₂)ε.
    let mut lam = 0.0;
    for a in 0..p - q {
        for bb in 0..p - q {
            let mut s = k[q + a][q + bb];
            for r in 0..q {
                for t in 0..q {
                    s -= k[q + a][r] * k11inv[r][t] * k[t][q + bb];
                }
            }
            lam += eps[a] * s * eps[bb];
        }
    }
    out.lambda = phi * lam;
    out
}

/// Running sum that also tracks the magnitude of what was added, for
/// cancellation-aware tolerances.
#[derive(Default, Clone, Copy)]
pub struct Acc {
    pub v: f64,
    pub abs: f64,
}

impl Acc {
    fn add(&mut self, x: f64) {
        self.v += x;
        self.abs += x.abs();
    }
}

/// The sixteen coefficients of the general display, term by term.
pub fn scalar_b(sq: &ScalarQuantities) -> ([[f64; 4]; 4], f64) {
    let phi = sq.phi;
    let mut b = [[Acc::default(); 4]; 4];
    for l in 0..sq.n {
        let (w, f, g, e) = (sq.w[l], sq.f[l], sq.g[l], sq.e[l]);
        let (t, bb, c, pp, h, j, u) = (sq.t[l], sq.b[l], sq.c[l], sq.pp[l], sq.h[l], sq.j[l], sq.u[l]);
        let (zd, z1d) = (sq.z[l], sq.z1[l]);
        let t2 = t * t;
        let t3 = t2 * t;
        let zdiff = zd - z1d;
        let head = phi / 2.0 * ((e + 2.0 * g) * bb * t2 + (2.0 * e - f + 2.0 * g) * t3 + w * t * (c + 2.0 * pp));

        b[0][1].add(head + 0.5 * ((2.0 * e - f + 2.0 * g) * z1d * t + w * j * t));
        b[0][2].add(-phi / 6.0 * (3.0 * e - 2.0 * f + 2.0 * g) * t3);

        b[1][1].add(
            head + 0.5
                * ((2.0 * e - f + 2.0 * g) * zd * t + 2.0 * (f - e) * zdiff * t + w * (u * t + 2.0 * h)),
        );
        b[1][2].add(
            phi / 2.0 * ((f - e) * t3 + w * t * c)
                - 0.5 * ((f + 2.0 * g) * zdiff * t + w * t * (u - j) + 2.0 * w * h),
        );
        b[1][3].add(-phi / 6.0 * ((f + 2.0 * g) * t3 + 3.0 * w * t * c));

        b[2][1].add(
            head + 0.5 * ((2.0 * e - f + 2.0 * g) * z1d * t + (3.0 * e - 2.0 * f + 2.0 * g) * zdiff * t + w * t * j),
        );
        b[2][2].add(-0.5 * (3.0 * e - 2.0 * f + 2.0 * g) * zdiff * t);
        b[2][3].add(-phi / 6.0 * (3.0 * e - 2.0 * f + 2.0 * g) * t3);

        b[3][1].add(
            head + 0.25
                * ((6.0 * g - f + 4.0 * e) * z1d * t - (f + 2.0 * g) * zd * t + w * t * (3.0 * j - u)
                    - 2.0 * w * h),
        );
        b[3][2].add(
            -phi / 4.0 * ((2.0 * e - f + 2.0 * g) * t3 + w * t * c)
                + 0.25 * ((f + 2.0 * g) * zdiff * t + w * t * (u - j) + 2.0 * w * h),
        );
        b[3][3].add(phi / 12.0 * ((f + 2.0 * g) * t3 + 3.0 * w * t * c));
    }
    let mut out = [[0.0; 4]; 4];
    let mut scale: f64 = 0.0;
    for i in 0..4 {
        for k in 1..4 {
            out[i][k] = b[i][k].v;
            scale = scale.max(b[i][k].abs);
        }
        out[i][0] = -(out[i][1] + out[i][2] + out[i][3]);
    }
    (out, scale)
}

// ---------------------------------------------------------------------------
// Printed special cases, written against the inputs' per-observation vectors.

fn sum(n: usize, term: impl Fn(usize) -> f64) -> f64 {
    (0..n).map(term).sum()
}

/// `H₀: β = β₀` (q = 0) with `θ = η`.
pub fn identity_q0(inp: &ExpansionInputs) -> Rows {
    let (phi, n) = (inp.phi, inp.n);
    let (w, f, e, t) = (&inp.w, &inp.f, &inp.e, &inp.t_vec);
    let (bv, c, pp, h, j, u, zd) = (&inp.b_vec, &inp.c, &inp.p_vec, &inp.h, &inp.j, &inp.u, &inp.zd);
    let t3 = |l: usize| t[l] * t[l] * t[l];
    let head = phi / 2.0
        * sum(n, |l| e[l] * bv[l] * t[l] * t[l] + (2.0 * e[l] - f[l]) * t3(l) + w[l] * t[l] * (c[l] + 2.0 * pp[l]));
    let b11 = head + 0.5 * sum(n, |l| w[l] * j[l] * t[l]);
    let b12 = -phi / 6.0 * sum(n, |l| (3.0 * e[l] - 2.0 * f[l]) * t3(l));
    let b32 = -0.5 * sum(n, |l| (3.0 * e[l] - 2.0 * f[l]) * zd[l] * t[l]);
    let b21 = head + 0.5 * sum(n, |l| f[l] * zd[l] * t[l] + w[l] * (u[l] * t[l] + 2.0 * h[l]));
    let b22 = phi / 2.0 * sum(n, |l| (f[l] - e[l]) * t3(l) + w[l] * t[l] * c[l])
        - 0.5 * sum(n, |l| f[l] * zd[l] * t[l] + w[l] * t[l] * (u[l] - j[l]) + 2.0 * w[l] * h[l]);
    let b23 = -phi / 6.0 * sum(n, |l| f[l] * t3(l) + 3.0 * w[l] * t[l] * c[l]);
    let b31 = head + 0.5 * sum(n, |l| (3.0 * e[l] - 2.0 * f[l]) * zd[l] * t[l] + w[l] * t[l] * j[l]);
    let b41 = head
        + 0.25 * sum(n, |l| -f[l] * zd[l] * t[l] + w[l] * t[l] * (3.0 * j[l] - u[l]) - 2.0 * w[l] * h[l]);
    let b42 = -phi / 4.0 * sum(n, |l| (2.0 * e[l] - f[l]) * t3(l) + w[l] * t[l] * c[l])
        + 0.25 * sum(n, |l| f[l] * zd[l] * t[l] + w[l] * t[l] * (u[l] - j[l]) + 2.0 * w[l] * h[l]);
    [[b11, b12, 0.0], [b21, b22, b23], [b31, b32, b12], [b41, b42, -b23 / 2.0]]
}

/// Log-gamma, identity link, q = 0.
pub fn log_gamma(inp: &ExpansionInputs) -> Rows {
    let (phi, n) = (inp.phi, inp.n);
    let (w, f, t) = (&inp.w, &inp.f, &inp.t_vec);
    let (c, pp, h, j, u, zd) = (&inp.c, &inp.p_vec, &inp.h, &inp.j, &inp.u, &inp.zd);
    let t3 = |l: usize| t[l] * t[l] * t[l];
    let head = phi / 2.0 * sum(n, |l| -f[l] * t3(l) + w[l] * t[l] * (c[l] + 2.0 * pp[l]));
    let b11 = head + 0.5 * sum(n, |l| w[l] * j[l] * t[l]);
    let b12 = phi / 3.0 * sum(n, |l| f[l] * t3(l));
    let b21 = head + 0.5 * sum(n, |l| f[l] * zd[l] * t[l] + w[l] * (u[l] * t[l] + 2.0 * h[l]));
    let b22 = phi / 2.0 * sum(n, |l| f[l] * t3(l) + w[l] * t[l] * c[l])
        - 0.5 * sum(n, |l| f[l] * zd[l] * t[l] + w[l] * t[l] * (u[l] - j[l]) + 2.0 * w[l] * h[l]);
    let b23 = -phi / 6.0 * sum(n, |l| f[l] * t3(l) + 3.0 * w[l] * t[l] * c[l]);
    let b32 = sum(n, |l| f[l] * zd[l] * t[l]);
    let b31 = head + 0.5 * sum(n, |l| -2.0 * f[l] * zd[l] * t[l] + w[l] * t[l] * j[l]);
    let b41 = head
        + 0.25 * sum(n, |l| -f[l] * zd[l] * t[l] + w[l] * t[l] * (3.0 * j[l] - u[l]) - 2.0 * w[l] * h[l]);
    let b42 = -phi / 4.0 * sum(n, |l| -f[l] * t3(l) + w[l] * t[l] * c[l])
        + 0.25 * sum(n, |l| f[l] * zd[l] * t[l] + w[l] * t[l] * (u[l] - j[l]) + 2.0 * w[l] * h[l]);
    [[b11, b12, 0.0], [b21, b22, b23], [b31, b32, b12], [b41, b42, -b23 / 2.0]]
}

/// Von Mises, identity link, q = 0.
pub fn von_mises(inp: &ExpansionInputs) -> Rows {
    let (phi, n) = (inp.phi, inp.n);
    let (w, t) = (&inp.w, &inp.t_vec);
    let (c, pp, h, j, u) = (&inp.c, &inp.p_vec, &inp.h, &inp.j, &inp.u);
    let head = phi / 2.0 * sum(n, |l| w[l] * t[l] * (c[l] + 2.0 * pp[l]));
    let b11 = head + 0.5 * sum(n, |l| w[l] * j[l] * t[l]);
    let b21 = head + 0.5 * sum(n, |l| w[l] * (u[l] * t[l] + 2.0 * h[l]));
    let b23 = -phi / 2.0 * sum(n, |l| w[l] * t[l] * c[l]);
    let b22 = phi / 2.0 * sum(n, |l| w[l] * t[l] * c[l])
        - 0.5 * sum(n, |l| w[l] * t[l] * (u[l] - j[l]) + 2.0 * w[l] * h[l]);
    let b41 = head + 0.25 * sum(n, |l| w[l] * t[l] * (3.0 * j[l] - u[l]) - 2.0 * w[l] * h[l]);
    [[b11, 0.0, 0.0], [b21, b22, b23], [b11, 0.0, 0.0], [b41, -b22 / 2.0, -b23 / 2.0]]
}

/// GLM `f`, `g` from the variance function and the inverse link on the mean.
pub fn glm_fg(family: Family, link: Link, eta: f64) -> (f64, f64) {
    let (mu, m1, m2) = link.inverse(eta).unwrap();
    let (v, dv) = family.variance(mu).unwrap();
    let f = m1 * m2 / v;
    (f, f - dv * m1 * m1 * m1 / (v * v))
}

/// GLM forms (linear predictor, link on the mean), with `f`, `g` supplied.
pub fn glm(inp: &ExpansionInputs, f: &[f64], g: &[f64]) -> Rows {
    let (phi, n) = (inp.phi, inp.n);
    let (t, bv, zd, z1) = (&inp.t_vec, &inp.b_vec, &inp.zd, &inp.z1d);
    let t3 = |l: usize| t[l] * t[l] * t[l];
    let zdf = |l: usize| zd[l] - z1[l];
    let head = phi / 2.0 * sum(n, |l| (f[l] + g[l]) * bv[l] * t[l] * t[l] + f[l] * t3(l));
    let b11 = head + 0.5 * sum(n, |l| f[l] * z1[l] * t[l]);
    let b12 = -phi / 6.0 * sum(n, |l| (f[l] - g[l]) * t3(l));
    let b21 = head + 0.5 * sum(n, |l| f[l] * zd[l] * t[l] + 2.0 * g[l] * zdf(l) * t[l]);
    let b22 = phi / 2.0 * sum(n, |l| g[l] * t3(l)) - 0.5 * sum(n, |l| (f[l] + 2.0 * g[l]) * zdf(l) * t[l]);
    let b23 = -phi / 6.0 * sum(n, |l| (f[l] + 2.0 * g[l]) * t3(l));
    let b32 = -0.5 * sum(n, |l| (f[l] - g[l]) * zdf(l) * t[l]);
    let b31 = head + 0.5 * sum(n, |l| f[l] * z1[l] * t[l] + (f[l] - g[l]) * zdf(l) * t[l]);
    let b41 = head
        + 0.25 * sum(n, |l| (3.0 * f[l] + 2.0 * g[l]) * z1[l] * t[l] - (f[l] + 2.0 * g[l]) * zd[l] * t[l]);
    let b42 = -phi / 4.0 * sum(n, |l| f[l] * t3(l)) + 0.25 * sum(n, |l| (f[l] + 2.0 * g[l]) * zdf(l) * t[l]);
    [[b11, b12, 0.0], [b21, b22, b23], [b31, b32, b12], [b41, b42, -b23 / 2.0]]
}

/// GLM with identity link: direct forms for b₁₁, b₁₂, b₃₂ and the printed
/// relations for the rest.
pub fn glm_identity(inp: &ExpansionInputs, g: &[f64]) -> Rows {
    let (phi, n) = (inp.phi, inp.n);
    let (t, bv, zd, z1) = (&inp.t_vec, &inp.b_vec, &inp.zd, &inp.z1d);
    let b11 = phi / 2.0 * sum(n, |l| g[l] * bv[l] * t[l] * t[l]);
    let b12 = phi / 6.0 * sum(n, |l| g[l] * t[l] * t[l] * t[l]);
    let b32 = 0.5 * sum(n, |l| g[l] * (zd[l] - z1[l]) * t[l]);
    let b23 = -2.0 * b12;
    [
        [b11, b12, 0.0],
        [b11 + 2.0 * b32, 3.0 * b12 - 2.0 * b32, b23],
        [b11 - b32, b32, b12],
        [b11 - b32, b32, -b23 / 2.0],
    ]
}

/// GLM k-forms (E = F − G, linear predictor).
pub fn glm_k(inp: &ExpansionInputs, f: &[f64], g: &[f64]) -> [f64; 12] {
    let (phi, n) = (inp.phi, inp.n);
    let (t, zd, z1) = (&inp.t_vec, &inp.zd, &inp.z1d);
    let t3 = |l: usize| t[l] * t[l] * t[l];
    let zdf = |l: usize| zd[l] - z1[l];
    let k1 = -0.5 * sum(n, |l| (f[l] + 2.0 * g[l]) * zdf(l) * t[l]);
    let k2 = -phi / 6.0 * sum(n, |l| (f[l] + 2.0 * g[l]) * t3(l));
    let k5 = k1 - sum(n, |l| (f[l] - g[l]) * zdf(l) * t[l]);
    let k6 = -phi / 2.0 * sum(n, |l| f[l] * t3(l));
    let k10 = phi / 3.0 * sum(n, |l| (f[l] - g[l]) * t3(l));
    let k11 = -3.0 * sum(n, |l| g[l] * zdf(l) * t[l]);
    let k12 = -phi * sum(n, |l| g[l] * t3(l));
    [k1, k2, 3.0 * k1, 3.0 * k2, k5, k6, -2.0 * k1, -2.0 * k2, k1 - k5, k10, k11, k12]
}

/// Largest |a − b| over the b₁..b₃ columns.
pub fn max_diff(table: &[[f64; 4]; 4], rows: &Rows) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..4 {
        for k in 0..3 {
            m = m.max((table[i][k + 1] - rows[i][k]).abs());
        }
    }
    m
}

pub fn max_abs(table: &[[f64; 4]; 4]) -> f64 {
    table.iter().flatten().fold(0.0, |m: f64, v| m.max(v.abs()))
}

// ---------------------------------------------------------------------------
// Quadrature.

/// Adaptive Gauss–Kronrod (7/15) on [a, b].
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    const XK: [f64; 8] = [
        0.991_455_371_120_812_6,
        0.949_107_912_342_758_5,
        0.864_864_423_359_769_1,
        0.741_531_185_599_394_4,
        0.586_087_235_467_691_1,
        0.405_845_151_377_397_2,
        0.207_784_955_007_898_5,
        0.0,
    ];
    const WK: [f64; 8] = [
        0.022_935_322_010_529_22,
        0.063_092_092_629_978_55,
        0.104_790_010_322_250_2,
        0.140_653_259_715_525_9,
        0.169_004_726_639_267_9,
        0.190_350_578_064_785_4,
        0.204_432_940_075_298_9,
        0.209_482_141_084_727_8,
    ];
    const WG: [f64; 4] = [
        0.129_484_966_168_869_7,
        0.279_705_391_489_276_7,
        0.381_830_050_505_118_9,
        0.417_959_183_673_469_4,
    ];
    fn gk(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let fc = f(c);
        let mut k = WK[7] * fc;
        let mut g = WG[3] * fc;
        for i in 0..7 {
            let x = h * XK[i];
            let s = f(c - x) + f(c + x);
            k += WK[i] * s;
            if i % 2 == 1 {
                g += WG[i / 2] * s;
            }
        }
        (k * h, (k - g).abs() * h)
    }
    // The tolerance is shared out by panel width. Panels stop early once the
    // error estimate reaches a few ulps of their value, since roundoff would
    // otherwise force bisection all the way down; a non-finite estimate
    // returns at once so the caller sees the NaN.
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, density: f64, depth: u32) -> f64 {
        let (v, err) = gk(f, a, b);
        if !(err > density * (b - a)) || err <= 50.0 * f64::EPSILON * v.abs() || depth == 0 {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, density, depth - 1) + rec(f, m, b, density, depth - 1)
    }
    let (whole, _) = gk(f, a, b);
    let budget = tol.max(4.0 * f64::EPSILON * whole.abs());
    rec(f, a, b, budget / (b - a), 30)
}
