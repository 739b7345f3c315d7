//! Checks shared by the integration tests and the acceptance binary. Each
//! returns `Err` with a readable description of the first violation.

use dm_testlab_core::expansion::{differences_from_table, subset_k};
use dm_testlab_core::{
    power_differences, subset_coefficients, subset_inputs, ExpansionInputs, Family, Link, ModelLink,
    PowerComparison, Verdict,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

pub fn draws(seed: u64) -> impl FnMut() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    move || rng.random::<f64>()
}

pub fn inputs(inst: &Instance) -> Result<ExpansionInputs, String> {
    subset_inputs(inst.family, &inst.link, &inst.spec, &inst.beta, inst.phi, &inst.eps)
        .map_err(|e| format!("{}: {e}", inst.label()))
}

pub fn combo(family: Family, link: ModelLink) -> Combo {
    *combos()
        .iter()
        .find(|c| c.family == family && c.link == link)
        .expect("combination is listed")
}

/// A random family/link/shape/size drawn from `u`, with `n ≤ n_max`.
pub fn random_instance(u: &mut dyn FnMut() -> f64, n_min: usize, n_max: usize) -> Instance {
    let all = combos();
    let pick = |u: &mut dyn FnMut() -> f64, k: usize| ((u() * k as f64) as usize).min(k - 1);
    let c = all[pick(u, all.len())];
    let shape = SHAPES[pick(u, SHAPES.len())];
    let n = n_min + pick(u, n_max - n_min + 1);
    let p = 2 + pick(u, 3);
    instance(c, shape, n, p, None, u)
}

/// Row sums, `b₁₃ = 0`, `b₂₃ = −2b₄₃`, closed k formulas against the table and
/// the linear relations among the k's.
pub fn structural(inst: &Instance) -> Result<(), String> {
    let inp = inputs(inst)?;
    let table = subset_coefficients(&inp);
    let b = table.b;
    let tol = 1e-12 * max_abs(&b).max(1.0);
    let label = inst.label();
    for (i, row) in b.iter().enumerate() {
        ensure!(row.iter().sum::<f64>().abs() <= tol, "{label}: row {} sums to {:e}", i + 1, row.iter().sum::<f64>());
    }
    ensure!(b[0][3] == 0.0, "{label}: b13 = {:e}", b[0][3]);
    ensure!((b[1][3] + 2.0 * b[3][3]).abs() <= tol, "{label}: b23 + 2 b43 = {:e}", b[1][3] + 2.0 * b[3][3]);

    let k = differences_from_table(&table);
    let closed = subset_k(&inp);
    let ktol = 1e-12 * k.iter().chain(&closed).fold(1.0f64, |m, v| m.max(v.abs()));
    for (i, (a, c)) in k.iter().zip(&closed).enumerate() {
        ensure!((a - c).abs() <= ktol, "{label}: k{} table {a:e} vs closed {c:e}", i + 1);
    }
    let rel = [
        ("k3 = 3k1", k[2] - 3.0 * k[0]),
        ("k4 = 3k2", k[3] - 3.0 * k[1]),
        ("k7 = -2k1", k[6] + 2.0 * k[0]),
        ("k8 = -2k2", k[7] + 2.0 * k[1]),
        ("k9 = k1 - k5", k[8] - (k[0] - k[4])),
    ];
    for (name, d) in rel {
        ensure!(d.abs() <= ktol, "{label}: {name} off by {d:e}");
    }
    Ok(())
}

/// Matrix-form `b_ik` and λ against the loop re-derivation.
pub fn scalar_sums(inst: &Instance) -> Result<(), String> {
    let table = subset_coefficients(&inputs(inst)?);
    let sq = scalar_quantities(inst);
    let (oracle, scale) = scalar_b(&sq);
    let tol = 1e-12 * scale.max(1.0);
    for i in 0..4 {
        for k in 0..4 {
            ensure!(
                (table.b[i][k] - oracle[i][k]).abs() <= tol,
                "{}: b{}{} = {:e} vs {:e}",
                inst.label(),
                i + 1,
                k,
                table.b[i][k],
                oracle[i][k]
            );
        }
    }
    ensure!(
        (table.lambda - sq.lambda).abs() <= 1e-12 * sq.lambda.max(1.0),
        "{}: lambda {} vs {}",
        inst.label(),
        table.lambda,
        sq.lambda
    );
    Ok(())
}

/// Between them the two nonlinear shapes make every one of C, P, H, J, U
/// non-zero: P needs a tested parameter inside a curved direction, J a curved
/// nuisance block.
pub fn nonlinear_instances() -> Vec<Instance> {
    let c = combo(Family::Gamma, ModelLink::on_mean(Link::Log));
    vec![
        instance(c, Shape::ExpCurve, 20, 3, Some(1), &mut draws(3)),
        instance(c, Shape::RateFirst, 20, 3, Some(2), &mut draws(3)),
    ]
}

pub fn nonlinear_coverage() -> Result<(), String> {
    let inst = nonlinear_instances();
    let exp = inputs(&inst[0])?;
    let rate = inputs(&inst[1])?;
    for (name, v) in [("C", &exp.c), ("P", &exp.p_vec), ("H", &exp.h), ("U", &exp.u)] {
        ensure!(v.amax() > 1e-6, "expcurve: {name} vanishes");
    }
    for (name, v) in [("C", &rate.c), ("H", &rate.h), ("J", &rate.j), ("U", &rate.u)] {
        ensure!(v.amax() > 1e-6, "rate-first curve: {name} vanishes");
    }
    for i in &inst {
        scalar_sums(i)?;
    }
    Ok(())
}

pub fn identity_q0_forms() -> Result<(), String> {
    for family in Family::ALL {
        for (s, pred) in SHAPES.into_iter().enumerate() {
            let inst = instance(
                combo(family, ModelLink::new(Link::Identity)),
                pred,
                18,
                3,
                Some(0),
                &mut draws(11 + s as u64),
            );
            let inp = inputs(&inst)?;
            ensure!(inp.g.iter().all(|&g| g == 0.0), "{}: G not zero", inst.label());
            let table = subset_coefficients(&inp);
            let tol = 1e-12 * max_abs(&table.b).max(1.0);
            let d = max_diff(&table.b, &identity_q0(&inp));
            ensure!(d <= tol, "{}: identity q=0 form off by {d:e}", inst.label());
            if family == Family::LogGamma {
                let d = max_diff(&table.b, &log_gamma(&inp));
                ensure!(d <= tol, "{}: log-gamma form off by {d:e}", inst.label());
            }
            if family == Family::VonMises {
                let d = max_diff(&table.b, &von_mises(&inp));
                ensure!(d <= tol, "{}: von Mises form off by {d:e}", inst.label());
            }
        }
    }
    Ok(())
}

/// Von Mises and normal with identity link and linear predictor: every
/// coefficient is exactly zero.
pub fn vanishing_tables() -> Result<(), String> {
    for family in [Family::VonMises, Family::Normal] {
        for q in [0, 1, 2] {
            let inst = instance(
                combo(family, ModelLink::new(Link::Identity)),
                Shape::Linear,
                25,
                4,
                Some(q),
                &mut draws(5 + q as u64),
            );
            let table = subset_coefficients(&inputs(&inst)?);
            ensure!(table.b.iter().flatten().all(|&v| v == 0.0), "{}: {:?}", inst.label(), table.b);
            ensure!(table.lambda > 0.0, "{}: lambda {}", inst.label(), table.lambda);
        }
    }
    Ok(())
}

pub fn glm_forms() -> Result<(), String> {
    let cube = Link::power(-1, 3).unwrap();
    let half = Link::power(-1, 2).unwrap();
    let cases = [
        (Family::Gamma, Link::Log),
        (Family::Gamma, Link::Reciprocal),
        (Family::Gamma, Link::Identity),
        (Family::Gamma, cube),
        (Family::InverseGaussian, Link::Log),
        (Family::InverseGaussian, Link::Reciprocal),
        (Family::InverseGaussian, half),
        (Family::Normal, Link::Log),
        (Family::Normal, Link::Identity),
    ];
    for (idx, &(family, link)) in cases.iter().enumerate() {
        for q in [0, 2] {
            let inst = instance(
                combo(family, ModelLink::on_mean(link)),
                Shape::Linear,
                22,
                4,
                Some(q),
                &mut draws(100 + idx as u64),
            );
            let label = inst.label();
            let inp = inputs(&inst)?;
            let eta = inst.spec.evaluate(&inst.beta).unwrap().eta;
            let (f, g): (Vec<f64>, Vec<f64>) = eta.iter().map(|&e| glm_fg(family, link, e)).unzip();
            for l in 0..inp.n {
                let s = 1.0 + f[l].abs() + g[l].abs();
                ensure!((inp.f[l] - f[l]).abs() <= 1e-12 * s, "{label}: F at {l}");
                ensure!((inp.g[l] - g[l]).abs() <= 1e-12 * s, "{label}: G at {l}");
                ensure!((inp.e[l] - (inp.f[l] - inp.g[l])).abs() <= 1e-12 * s, "{label}: E = F - G at {l}");
            }
            let table = subset_coefficients(&inp);
            let tol = 1e-12 * max_abs(&table.b).max(1.0);
            let d = max_diff(&table.b, &glm(&inp, &f, &g));
            ensure!(d <= tol, "{label}: GLM form off by {d:e}");
            if link == Link::Identity {
                let d = max_diff(&table.b, &glm_identity(&inp, &g));
                ensure!(d <= tol, "{label}: GLM identity form off by {d:e}");
            }
            let k = subset_k(&inp);
            let kg = glm_k(&inp, &f, &g);
            let ktol = 1e-12 * k.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for (i, (a, b)) in k.iter().zip(&kg).enumerate() {
                ensure!((a - b).abs() <= ktol, "{label}: k{} {a:e} vs GLM {b:e}", i + 1);
            }
        }
    }
    Ok(())
}

fn verdict(cmp: &PowerComparison, i: usize, j: usize) -> Verdict {
    cmp.pairs.iter().find(|p| p.i == i && p.j == j).unwrap().verdict
}

/// Canonical link: Π2 = Π3. `η = μ^{-1/3}`: Π1 = Π2 = Π4. Identity link: Π3 = Π4.
pub fn glm_power_equalities() -> Result<(), String> {
    let run = |family: Family, link: Link, seed: u64| -> Result<_, String> {
        let inst = instance(
            combo(family, ModelLink::on_mean(link)),
            Shape::Linear,
            30,
            3,
            Some(1),
            &mut draws(seed),
        );
        let inp = inputs(&inst)?;
        let k = subset_k(&inp);
        let scale = k.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        Ok((inp, k, scale))
    };
    let zero = |k: &[f64; 12], idx: &[usize], scale: f64| idx.iter().all(|&i| k[i].abs() <= 1e-12 * scale);
    let check = |inp: &ExpansionInputs, i, j, what: &str| -> Result<(), String> {
        let cmp = power_differences(inp, 0.05).map_err(|e| e.to_string())?;
        ensure!(verdict(&cmp, i, j) == Verdict::Equal, "{what}: Π{} vs Π{} not equal", i + 1, j + 1);
        Ok(())
    };

    let (inp, k, s) = run(Family::Gamma, Link::Reciprocal, 1)?;
    ensure!(zero(&k, &[10, 11], s), "canonical link: k11, k12 = {:e}, {:e}", k[10], k[11]);
    check(&inp, 1, 2, "canonical link")?;

    let (inp, k, s) = run(Family::Gamma, Link::power(-1, 3).unwrap(), 2)?;
    ensure!(zero(&k, &[0, 1, 2, 3, 6, 7], s), "cube-root link: {k:?}");
    check(&inp, 0, 3, "cube-root link")?;
    check(&inp, 0, 1, "cube-root link")?;

    let (inp, k, s) = run(Family::InverseGaussian, Link::Identity, 3)?;
    ensure!(zero(&k, &[4, 5], s), "identity link: k5, k6 = {:e}, {:e}", k[4], k[5]);
    check(&inp, 2, 3, "identity link")?;
    Ok(())
}
