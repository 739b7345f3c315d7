//! Local power expansions of order `n^{-1/2}` under Pitman alternatives.
//!
//! Up to that order, `Pr(Sᵢ ≤ x) = G_{m,λ}(x) + Σₖ bᵢₖ G_{m+2k,λ}(x)` with
//! `m` the degrees of freedom and `G` the noncentral χ² distribution function.
//! Rows are ordered likelihood ratio, Wald, score, gradient.
//!
//! The noncentrality uses the convention of [`ChiSquare`]: Poisson weights
//! with mean `λ/2`, so the subset-test noncentrality is `εᵀ(φRᵀWR)ε` and the
//! precision-test noncentrality is `−α₂ε²`.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::design::RegressionSpec;
use crate::error::{Error, Result};
use crate::family::{weights_at, Family};
use crate::linalg::{schur_rwr, spd_inverse, weighted_gram};
use crate::link::ModelLink;
use crate::specfun::{chisq_quantile, ChiSquare};

pub const STATISTIC_NAMES: [&str; 4] = ["likelihood ratio", "Wald", "score", "gradient"];

/// Everything the subset-test coefficients depend on, evaluated at the null.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionInputs {
    pub phi: f64,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub epsilon: DVector<f64>,
    /// `ε* = [(K₁₁⁻¹K₁₂ε)ᵀ, −εᵀ]ᵀ`.
    pub epsilon_star: DVector<f64>,
    /// `δ = (0ᵀ, εᵀ)ᵀ`.
    pub delta: DVector<f64>,
    /// `blockdiag(K₁₁⁻¹, 0)`.
    pub a_matrix: DMatrix<f64>,
    /// `K_β⁻¹ − A`.
    pub m_matrix: DMatrix<f64>,
    /// Diagonal of `X*(X*ᵀWX*)⁻¹X*ᵀ`.
    pub zd: DVector<f64>,
    /// Diagonal of `X₁*(X₁*ᵀWX₁*)⁻¹X₁*ᵀ`; zero when q = 0.
    pub z1d: DVector<f64>,
    pub w: DVector<f64>,
    pub f: DVector<f64>,
    pub g: DVector<f64>,
    pub e: DVector<f64>,
    /// `t = X*ε*`.
    pub t_vec: DVector<f64>,
    /// `b = X₂*ε`.
    pub b_vec: DVector<f64>,
    pub c: DVector<f64>,
    pub p_vec: DVector<f64>,
    pub h: DVector<f64>,
    pub j: DVector<f64>,
    pub u: DVector<f64>,
    pub lambda: f64,
}

impl ExpansionInputs {
    pub fn df(&self) -> u32 {
        (self.p - self.q) as u32
    }
}

/// `b[i][k]` for statistic `i` (LR, Wald, score, gradient) and shift `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientTable {
    pub b: [[f64; 4]; 4],
    pub lambda: f64,
    pub df: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalPower {
    pub critical_value: f64,
    /// `1 − G_{m,λ}(x_γ)`, shared by all four tests to first order.
    pub first_order: f64,
    pub power: [f64; 4],
    /// Set when the raw expansion left [0, 1] and was clamped.
    pub clamped: [bool; 4],
    pub tail_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Greater,
    Less,
    Equal,
    Indeterminate,
}

impl Verdict {
    pub fn symbol(self) -> &'static str {
        match self {
            Verdict::Greater => ">",
            Verdict::Less => "<",
            Verdict::Equal => "=",
            Verdict::Indeterminate => "?",
        }
    }
}

/// `Πᵢ − Πⱼ = a g_{m+4,λ}(x) + b g_{m+6,λ}(x)` and the sign verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairComparison {
    pub i: usize,
    pub j: usize,
    pub coef_g4: f64,
    pub coef_g6: f64,
    pub difference: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerComparison {
    /// `k₁ … k₁₂`.
    pub k: [f64; 12],
    pub pairs: Vec<PairComparison>,
    /// Ascending order such as `Π2 = Π3 < Π1 < Π4`, when every pair is determinate.
    pub ordering: Option<String>,
    /// Magnitude below which a coefficient counts as zero.
    pub zero_tolerance: f64,
}

/// Pairs `(i, j)` for `(k₁,k₂), (k₃,k₄), …, (k₁₁,k₁₂)`, zero-based.
pub const K_PAIRS: [(usize, usize); 6] = [(0, 3), (1, 3), (2, 3), (0, 1), (0, 2), (1, 2)];

const ZERO_RELATIVE: f64 = 1e-12;

/// Builds the null-point quantities for `H₀: β₂ = β₂₀` against `β₂ = β₂₀ + ε`.
/// `beta_true` is the null parameter (its last p−q entries are β₂₀).
pub fn subset_inputs(
    family: Family,
    link: &ModelLink,
    spec: &RegressionSpec,
    beta_true: &DVector<f64>,
    phi: f64,
    epsilon: &DVector<f64>,
) -> Result<ExpansionInputs> {
    link.validate(family)?;
    if !(phi > 0.0 && phi.is_finite()) {
        return Err(Error::domain("subset_inputs", "phi > 0", phi));
    }
    let p = spec.p();
    let q = spec.q;
    if epsilon.len() != p - q {
        return Err(Error::Dimension(alloc::format!(
            "epsilon has length {}, hypothesis fixes {} parameters",
            epsilon.len(),
            p - q
        )));
    }
    let eval = spec.evaluate(beta_true)?;
    let n = eval.n();
    let x = &eval.jac;

    let mut w = DVector::zeros(n);
    let mut f = DVector::zeros(n);
    let mut g = DVector::zeros(n);
    let mut e = DVector::zeros(n);
    for l in 0..n {
        let d = link.theta_derivs(family, eval.eta[l])?;
        family.check_theta(l, d.theta)?;
        let th = family.normalize_theta(d.theta);
        let (wl, fl, gl, el) = weights_at(family, th, d.d1, d.d2, phi);
        w[l] = wl;
        f[l] = fl;
        g[l] = gl;
        e[l] = el;
    }

    let gram_inv = spd_inverse(&weighted_gram(x, &w), "X'WX")?;
    let x1 = eval.x1();
    let x2 = eval.x2();
    let gram11_inv = spd_inverse(&weighted_gram(&x1, &w), "X1'WX1")?;

    let mut wx2 = x2.clone();
    for (mut row, &wl) in wx2.row_iter_mut().zip(w.iter()) {
        row *= wl;
    }
    let mut epsilon_star = DVector::zeros(p);
    if q > 0 {
        let top = &gram11_inv * (x1.transpose() * &wx2) * epsilon;
        epsilon_star.rows_mut(0, q).copy_from(&top);
    }
    epsilon_star.rows_mut(q, p - q).copy_from(&(-epsilon));
    let mut delta = DVector::zeros(p);
    delta.rows_mut(q, p - q).copy_from(epsilon);

    let mut a_matrix = DMatrix::zeros(p, p);
    a_matrix
        .view_mut((0, 0), (q, q))
        .copy_from(&(&gram11_inv / phi));
    let m_matrix = &gram_inv / phi - &a_matrix;

    let zd = DVector::from_iterator(n, (0..n).map(|l| quad_form(&gram_inv, &x.row(l).transpose())));
    let z1d = DVector::from_iterator(
        n,
        (0..n).map(|l| {
            if q == 0 {
                0.0
            } else {
                quad_form(&gram11_inv, &x1.row(l).transpose())
            }
        }),
    );

    let t_vec = x * &epsilon_star;
    let b_vec = &x2 * epsilon;

    let mut c = DVector::zeros(n);
    let mut p_vec = DVector::zeros(n);
    let mut h = DVector::zeros(n);
    let mut j = DVector::zeros(n);
    let mut u = DVector::zeros(n);
    if let Some(hess) = &eval.hess {
        let phi_m = &m_matrix * phi;
        for (l, xl) in hess.iter().enumerate() {
            let xe = xl * &epsilon_star;
            c[l] = epsilon_star.dot(&xe);
            p_vec[l] = delta.dot(&xe);
            h[l] = x.row(l).transpose().dot(&(&phi_m * &xe));
            u[l] = xl.component_mul(&gram_inv).sum();
            if q > 0 {
                j[l] = xl.view((0, 0), (q, q)).component_mul(&gram11_inv).sum();
            }
        }
    }

    let lambda = phi * quad_form(&schur_rwr(x, &w, q)?, epsilon);

    Ok(ExpansionInputs {
        phi,
        n,
        p,
        q,
        epsilon: epsilon.clone(),
        epsilon_star,
        delta,
        a_matrix,
        m_matrix,
        zd,
        z1d,
        w,
        f,
        g,
        e,
        t_vec,
        b_vec,
        c,
        p_vec,
        h,
        j,
        u,
        lambda: lambda.max(0.0),
    })
}

fn quad_form(a: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    v.dot(&(a * v))
}

// Named traces shared by the coefficient and k formulas. Every trace of a
// product of diagonal matrices is a componentwise sum.
struct Traces {
    common: f64,
    z1_lr: f64,
    wjt: f64,
    zd_wald: f64,
    fe_zdiff: f64,
    wut_2wh: f64,
    fe_t3: f64,
    wtc: f64,
    f2g_zdiff: f64,
    wt_u_minus_j: f64,
    wh: f64,
    f2g_t3: f64,
    score_zdiff: f64,
    score_t3: f64,
    grad_z1: f64,
    f2g_zd: f64,
    lr_t3: f64,
    scale: f64,
}

fn traces(inp: &ExpansionInputs) -> Traces {
    let t = &inp.t_vec;
    let t2 = t.component_mul(t);
    let t3 = t2.component_mul(t);
    let (w, f, g, e) = (&inp.w, &inp.f, &inp.g, &inp.e);
    let zdiff = &inp.zd - &inp.z1d;
    let zdiff_t = zdiff.component_mul(t);
    let z1_t = inp.z1d.component_mul(t);
    let zd_t = inp.zd.component_mul(t);
    let wt = w.component_mul(t);

    let e_2g = e + g * 2.0;
    let lr_kernel = e * 2.0 - f + g * 2.0;
    let score_kernel = e * 3.0 - f * 2.0 + g * 2.0;
    let f_2g = f + g * 2.0;
    let f_e = f - e;

    let cp2 = &inp.c + &inp.p_vec * 2.0;
    let common = e_2g.dot(&inp.b_vec.component_mul(&t2)) + lr_lr(&lr_kernel, &t3) + wt.dot(&cp2);

    let abs_t = t.abs();
    let abs_t3 = t3.abs();
    let fge = f.abs() + g.abs() + e.abs();
    let scale = inp.phi * (fge.dot(&abs_t3) + fge.dot(&inp.b_vec.abs().component_mul(&t2)))
        + fge.dot(&(&inp.zd + &inp.z1d).component_mul(&abs_t))
        + w.abs().dot(
            &(abs_t.component_mul(&(inp.c.abs() + inp.p_vec.abs() + inp.u.abs() + inp.j.abs()))
                * inp.phi.max(1.0)),
        )
        + w.abs().dot(&inp.h.abs());

    Traces {
        common,
        z1_lr: lr_kernel.dot(&z1_t),
        wjt: wt.dot(&inp.j),
        zd_wald: lr_kernel.dot(&zd_t),
        fe_zdiff: f_e.dot(&zdiff_t),
        wut_2wh: wt.dot(&inp.u) + 2.0 * w.dot(&inp.h),
        fe_t3: f_e.dot(&t3),
        wtc: wt.dot(&inp.c),
        f2g_zdiff: f_2g.dot(&zdiff_t),
        wt_u_minus_j: wt.dot(&(&inp.u - &inp.j)),
        wh: w.dot(&inp.h),
        f2g_t3: f_2g.dot(&t3),
        score_zdiff: score_kernel.dot(&zdiff_t),
        score_t3: score_kernel.dot(&t3),
        grad_z1: (g * 6.0 - f + e * 4.0).dot(&z1_t),
        f2g_zd: f_2g.dot(&zd_t),
        lr_t3: lr_kernel.dot(&t3),
        scale,
    }
}

fn lr_lr(kernel: &DVector<f64>, t3: &DVector<f64>) -> f64 {
    kernel.dot(t3)
}

/// The sixteen `bᵢₖ` for the subset hypothesis.
pub fn subset_coefficients(inputs: &ExpansionInputs) -> CoefficientTable {
    let phi = inputs.phi;
    let tr = traces(inputs);
    let head = 0.5 * phi * tr.common;

    let b11 = head + 0.5 * (tr.z1_lr + tr.wjt);
    let b12 = -phi / 6.0 * tr.score_t3;

    let b21 = head + 0.5 * (tr.zd_wald + 2.0 * tr.fe_zdiff + tr.wut_2wh);
    let b22 = 0.5 * phi * (tr.fe_t3 + tr.wtc) - 0.5 * (tr.f2g_zdiff + tr.wt_u_minus_j + 2.0 * tr.wh);
    let b23 = -phi / 6.0 * (tr.f2g_t3 + 3.0 * tr.wtc);

    let b31 = head + 0.5 * (tr.z1_lr + tr.score_zdiff + tr.wjt);
    let b32 = -0.5 * tr.score_zdiff;
    let b33 = -phi / 6.0 * tr.score_t3;

    let wt_3j_minus_u = 3.0 * tr.wjt - (tr.wut_2wh - 2.0 * tr.wh);
    let b41 = head + 0.25 * (tr.grad_z1 - tr.f2g_zd + wt_3j_minus_u - 2.0 * tr.wh);
    let b42 = -0.25 * phi * (tr.lr_t3 + tr.wtc) + 0.25 * (tr.f2g_zdiff + tr.wt_u_minus_j + 2.0 * tr.wh);
    let b43 = phi / 12.0 * (tr.f2g_t3 + 3.0 * tr.wtc);

    table(
        [[b11, b12, 0.0], [b21, b22, b23], [b31, b32, b33], [b41, b42, b43]],
        inputs.lambda,
        inputs.df(),
    )
}

fn table(rows: [[f64; 3]; 4], lambda: f64, df: u32) -> CoefficientTable {
    let mut b = [[0.0; 4]; 4];
    for (i, r) in rows.iter().enumerate() {
        b[i][1] = r[0];
        b[i][2] = r[1];
        b[i][3] = r[2];
        b[i][0] = -(r[0] + r[1] + r[2]);
    }
    CoefficientTable { b, lambda, df }
}

/// `Πᵢ = 1 − [G_{m,λ}(x_γ) + Σₖ bᵢₖ G_{m+2k,λ}(x_γ)]` with `x_γ` the upper
/// γ quantile of the central χ²_m.
pub fn local_power(table: &CoefficientTable, gamma: f64) -> Result<LocalPower> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::domain("local_power", "0 < gamma < 1", gamma));
    }
    let x = chisq_quantile(1.0 - gamma, table.df)?;
    let mut g = [0.0; 4];
    let mut tail_bound: f64 = 0.0;
    for (k, gk) in g.iter_mut().enumerate() {
        let s = ChiSquare::new(table.df + 2 * k as u32, table.lambda)?.cdf_series(x);
        *gk = s.value;
        tail_bound = tail_bound.max(s.tail_bound);
    }
    let first_order = 1.0 - g[0];
    let mut power = [0.0; 4];
    let mut clamped = [false; 4];
    for i in 0..4 {
        let corr: f64 = (0..4).map(|k| table.b[i][k] * g[k]).sum();
        let raw = 1.0 - (g[0] + corr);
        clamped[i] = !(0.0..=1.0).contains(&raw);
        power[i] = raw.clamp(0.0, 1.0);
    }
    Ok(LocalPower {
        critical_value: x,
        first_order,
        power,
        clamped,
        tail_bound,
    })
}

/// `k₁ … k₁₂` for the subset hypothesis.
pub fn subset_k(inputs: &ExpansionInputs) -> [f64; 12] {
    let phi = inputs.phi;
    let tr = traces(inputs);
    let wt_j_minus_u = -tr.wt_u_minus_j;
    let k1 = -0.5 * tr.f2g_zdiff + 0.5 * (wt_j_minus_u - 2.0 * tr.wh);
    let k2 = -phi / 6.0 * tr.f2g_t3 - 0.5 * phi * tr.wtc;
    let k5 = k1 - tr.score_zdiff;
    let k6 = -0.5 * phi * tr.lr_t3 - 0.5 * phi * tr.wtc;
    let k10 = phi / 3.0 * tr.score_t3;
    let k11 = -3.0 * tr.fe_zdiff - (tr.wt_u_minus_j + 2.0 * tr.wh);
    let k12 = -phi * tr.fe_t3 - phi * tr.wtc;
    [k1, k2, 3.0 * k1, 3.0 * k2, k5, k6, -2.0 * k1, -2.0 * k2, k1 - k5, k10, k11, k12]
}

/// k's, pairwise verdicts and the implied ordering at level γ.
pub fn power_differences(inputs: &ExpansionInputs, gamma: f64) -> Result<PowerComparison> {
    let k = subset_k(inputs);
    let tol = ZERO_RELATIVE * traces(inputs).scale;
    compare(k, inputs.df(), inputs.lambda, gamma, tol)
}

fn compare(k: [f64; 12], df: u32, lambda: f64, gamma: f64, tol: f64) -> Result<PowerComparison> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::domain("power_differences", "0 < gamma < 1", gamma));
    }
    let x = chisq_quantile(1.0 - gamma, df)?;
    let g4 = ChiSquare::new(df + 4, lambda)?.pdf_series(x).value;
    let g6 = ChiSquare::new(df + 6, lambda)?.pdf_series(x).value;
    let pairs = K_PAIRS
        .iter()
        .enumerate()
        .map(|(idx, &(i, j))| {
            let (a, b) = (k[2 * idx], k[2 * idx + 1]);
            PairComparison {
                i,
                j,
                coef_g4: a,
                coef_g6: b,
                difference: a * g4 + b * g6,
                verdict: verdict(a, b, tol),
            }
        })
        .collect::<Vec<_>>();
    let ordering = ordering(&pairs);
    Ok(PowerComparison {
        k,
        pairs,
        ordering,
        zero_tolerance: tol,
    })
}

fn verdict(a: f64, b: f64, tol: f64) -> Verdict {
    let za = a.abs() <= tol;
    let zb = b.abs() <= tol;
    if za && zb {
        Verdict::Equal
    } else if (za || a > 0.0) && (zb || b > 0.0) {
        Verdict::Greater
    } else if (za || a < 0.0) && (zb || b < 0.0) {
        Verdict::Less
    } else {
        Verdict::Indeterminate
    }
}

fn ordering(pairs: &[PairComparison]) -> Option<String> {
    // rel[i][j] = sign of Πᵢ − Πⱼ
    let mut rel = [[0i8; 4]; 4];
    for pc in pairs {
        let s = match pc.verdict {
            Verdict::Greater => 1,
            Verdict::Less => -1,
            Verdict::Equal => 0,
            Verdict::Indeterminate => return None,
        };
        rel[pc.i][pc.j] = s;
        rel[pc.j][pc.i] = -s;
    }
    let mut idx = [0usize, 1, 2, 3];
    idx.sort_by_key(|&i| (rel[i].iter().map(|&s| s as i32).sum::<i32>(), i));
    // Consistency: the sorted order must reproduce every pairwise relation.
    for a in 0..4 {
        for b in (a + 1)..4 {
            let (i, j) = (idx[a], idx[b]);
            let ok = match rel[i][j] {
                -1 => true,
                0 => (0..4).all(|m| rel[i][m] == rel[j][m]),
                _ => false,
            };
            if !ok {
                return None;
            }
        }
    }
    let mut out = String::new();
    for (a, &i) in idx.iter().enumerate() {
        if a > 0 {
            out.push_str(if rel[idx[a - 1]][i] == 0 { " = " } else { " < " });
        }
        out.push('Π');
        out.push(char::from(b'1' + i as u8));
    }
    Some(out)
}

/// The α-quantities of the precision expansion at the null φ₀.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionAlphas {
    pub alpha2: f64,
    pub alpha2_prime: f64,
    pub alpha3: f64,
}

pub fn precision_alphas(family: Family, n: usize, phi0: f64) -> Result<PrecisionAlphas> {
    let pdm = family.pdm().ok_or(Error::Unsupported {
        family: family.name(),
        operation: "precision expansion",
    })?;
    if !(phi0 > 0.0 && phi0.is_finite()) {
        return Err(Error::domain("precision_alphas", "phi0 > 0", phi0));
    }
    let nf = n as f64;
    let a3 = nf * pdm.a2_3(phi0);
    Ok(PrecisionAlphas {
        alpha2: nf * pdm.a2_2(phi0),
        alpha2_prime: a3,
        alpha3: a3,
    })
}

/// General-form coefficients for `H₀: φ = φ₀` against `φ = φ₀ + ε`.
pub fn precision_coefficients_general(al: PrecisionAlphas, p: usize, phi0: f64, eps: f64) -> CoefficientTable {
    let (a2, a2p, a3) = (al.alpha2, al.alpha2_prime, al.alpha3);
    let e3 = eps * eps * eps;
    let base = (a2p - a3) * e3 / 2.0 + p as f64 * eps / (2.0 * phi0);
    let s = 2.0 * a3 - 3.0 * a2p;
    table(
        [
            [base, s * e3 / 6.0, 0.0],
            [
                base - a3 * eps / (2.0 * a2),
                -(a2p - a3) * e3 / 2.0 + a3 * eps / (2.0 * a2),
                -a3 * e3 / 6.0,
            ],
            [base + s * eps / (2.0 * a2), -s * eps / (2.0 * a2), s * e3 / 6.0],
            [
                base + a3 * eps / (4.0 * a2),
                -(2.0 * a2p - a3) * e3 / 4.0 - a3 * eps / (4.0 * a2),
                a3 * e3 / 12.0,
            ],
        ],
        -a2 * eps * eps,
        1,
    )
}

/// Precision-test coefficients for a proper dispersion model (general form).
pub fn precision_coefficients(family: Family, n: usize, p: usize, phi0: f64, eps: f64) -> Result<CoefficientTable> {
    let al = precision_alphas(family, n, phi0)?;
    Ok(precision_coefficients_general(al, p, phi0, eps))
}

/// The same table through the simplified proper-dispersion-model forms.
pub fn precision_coefficients_pdm(family: Family, n: usize, p: usize, phi0: f64, eps: f64) -> Result<CoefficientTable> {
    let pdm = family.pdm().ok_or(Error::Unsupported {
        family: family.name(),
        operation: "precision expansion",
    })?;
    let nf = n as f64;
    let a2 = pdm.a2_2(phi0);
    let a3 = pdm.a2_3(phi0);
    let b11 = p as f64 * eps / (2.0 * phi0);
    let b12 = -nf * a3 * eps * eps * eps / 6.0;
    let b21 = b11 - a3 * eps / (2.0 * a2);
    let diff = b11 - b21;
    Ok(table(
        [
            [b11, b12, 0.0],
            [b21, diff, b12],
            [b21, diff, b12],
            [b11 + 0.5 * diff, -0.5 * (diff - 3.0 * b12), -0.5 * b12],
        ],
        -nf * a2 * eps * eps,
        1,
    ))
}

/// `k₁ … k₁₂` for the precision hypothesis.
pub fn precision_k(al: PrecisionAlphas, eps: f64) -> [f64; 12] {
    let (a2, a2p, a3) = (al.alpha2, al.alpha2_prime, al.alpha3);
    let e3 = eps * eps * eps;
    let s = 2.0 * a3 - 3.0 * a2p;
    [
        a3 * eps / (2.0 * a2),
        -a3 * e3 / 6.0,
        3.0 * a3 * eps / (2.0 * a2),
        -a3 * e3 / 2.0,
        -3.0 * (a3 - 2.0 * a2p) * eps / (2.0 * a2),
        (a3 - 2.0 * a2p) * e3 / 2.0,
        -a3 * eps / a2,
        a3 * e3 / 3.0,
        s * eps / a2,
        -s * e3 / 3.0,
        3.0 * (a3 - a2p) * eps / a2,
        -(a3 - a2p) * e3,
    ]
}

/// k's, verdicts and ordering for `H₀: φ = φ₀` when the true precision is φ.
pub fn precision_power_differences(
    family: Family,
    n: usize,
    phi: f64,
    phi0: f64,
    gamma: f64,
) -> Result<PowerComparison> {
    if !(phi > 0.0 && phi.is_finite()) {
        return Err(Error::domain("precision_power_differences", "phi > 0", phi));
    }
    let al = precision_alphas(family, n, phi0)?;
    let eps = phi - phi0;
    let k = precision_k(al, eps);
    let e = eps.abs();
    let tol = ZERO_RELATIVE
        * ((al.alpha3.abs() + al.alpha2_prime.abs()) * (e / al.alpha2.abs() + e * e * e));
    compare(k, 1, -al.alpha2 * eps * eps, gamma, tol)
}

/// `Πᵢ − Πⱼ` coefficients on `(g_{m+4,λ}, g_{m+6,λ})` read directly off a table.
pub fn differences_from_table(table: &CoefficientTable) -> [f64; 12] {
    let mut out = [0.0; 12];
    for (idx, &(i, j)) in K_PAIRS.iter().enumerate() {
        let d2 = table.b[j][2] - table.b[i][2];
        let d3 = table.b[j][3] - table.b[i][3];
        out[2 * idx] = -2.0 * (d2 + d3);
        out[2 * idx + 1] = -2.0 * d3;
    }
    out
}
