//! The exact checks: algebraic identities that must hold symbol for symbol.
//! The Monte Carlo ones live in `sle martingale-test` / `sle restriction`.

use serde_json::{json, Value};

use virloe::coherent::{check_virasoro, martingale_basis, martingale_operator, Rep};
use virloe::deform::{
    build_g, conjugate_ln, conjugate_ln_direct, connection, formal_capped, multi_indices, p_element, p_element_peeled,
};
use virloe::poly::{q, qr};
use virloe::series::compose;
use virloe::verma::{c_kappa, h_kappa, level2_singular_check, singular_check, VermaParams};
use virloe::wick::{self, Example};
use virloe::{sle, Basepoint, Germ, Poly, Var};

type Outcome = Result<String, String>;

fn grading_two() -> Outcome {
    let g = build_g(&Germ::formal(Basepoint::Origin, 2), 2).map_err(|e| e.to_string())?;
    let s = g.unipotent.to_string();
    if s == "1 - f1*L1 + (-f2 + f1^2)*L2 + f1^2/2*L1^2" {
        Ok(s)
    } else {
        Err(s)
    }
}

fn zero_curvature() -> Outcome {
    for k in 1..=3 {
        for l in 1..=3 {
            let ak = connection(Basepoint::Origin, k, 6);
            let al = connection(Basepoint::Origin, l, 6);
            let lhs = al
                .map_coeffs(|p| p.derivative(Var::F(k)))
                .sub(&ak.map_coeffs(|p| p.derivative(Var::F(l))))
                .map_err(|e| e.to_string())?;
            if lhs != ak.commutator(&al).map_err(|e| e.to_string())? {
                return Err(format!("k={k}, l={l}"));
            }
        }
    }
    Ok("k, l ≤ 3, grading ≤ 6".into())
}

fn anti_homomorphism() -> Outcome {
    let n = 6;
    for (i, bp) in [Basepoint::Origin, Basepoint::Infinity].into_iter().enumerate() {
        let sign = if bp == Basepoint::Origin { 1 } else { -1 };
        let f = Germ::from_q(bp, n, &[(sign, qr(1, 2)), (2 * sign, q(-1)), (4 * sign, qr(2, 3))]).map_err(|e| e.to_string())?;
        let g = Germ::from_q(bp, n, &[(sign, q(2)), (3 * sign, qr(-1, 5))]).map_err(|e| e.to_string())?;
        let lhs = build_g(&compose(&f, &g).map_err(|e| e.to_string())?, n).map_err(|e| e.to_string())?;
        let rhs = build_g(&f, n).and_then(|a| a.compose(&build_g(&g, n)?)).map_err(|e| e.to_string())?;
        if lhs.unipotent != rhs.unipotent {
            return Err(format!("pair {i}"));
        }
    }
    Ok("G_(g∘f) = G_f G_g at grading 6".into())
}

fn conjugation() -> Outcome {
    let n = 4;
    let (f, cap) = formal_capped(Basepoint::Origin, n);
    for m in -2..=2 {
        let res = conjugate_ln(&f, m, n).map_err(|e| e.to_string())?.map_coeffs(|p| p.clone().with_trunc(&cap));
        if res != conjugate_ln_direct(m, n).map_err(|e| e.to_string())? {
            return Err(format!("m={m}"));
        }
    }
    Ok("m ∈ −2..2, grading ≤ 4".into())
}

fn peeling() -> Outcome {
    for bp in [Basepoint::Origin, Basepoint::Infinity] {
        for k in multi_indices(bp, 6) {
            let a = p_element(bp, &k);
            for &m in k.keys() {
                if p_element_peeled(bp, &k, m) != a {
                    return Err(format!("{k:?} at {m}"));
                }
            }
        }
    }
    Ok("grading ≤ 6".into())
}

fn singular() -> Outcome {
    for k in [q(2), qr(8, 3), q(3), q(4), q(6), q(8)] {
        if !level2_singular_check(&k).map_err(|e| e.to_string())?.holds {
            return Err(format!("κ = {k}"));
        }
        let bad = VermaParams::rational(c_kappa(&k), h_kappa(&k) + qr(1, 7));
        if singular_check(&bad, &k).holds {
            return Err(format!("perturbed h passes at κ = {k}"));
        }
    }
    Ok("κ ∈ {2, 8/3, 3, 4, 6, 8}".into())
}

fn relations() -> Outcome {
    for r in [Rep::P, Rep::Q, Rep::R] {
        if !check_virasoro(r, &[-2, -1, 0, 1, 2], 4).map_err(|e| e.to_string())?.is_empty() {
            return Err(format!("{r:?}"));
        }
    }
    Ok("P, Q, R for n ∈ −2..2, grading ≤ 4".into())
}

fn martingales() -> Outcome {
    let k = qr(7, 3);
    let b = martingale_basis(&k, 5).map_err(|e| e.to_string())?;
    for r in &b {
        if !martingale_operator(&k, &r.poly, 8).map_err(|e| e.to_string())?.is_zero() {
            return Err(r.polynomial.clone());
        }
    }
    Ok(format!("{} polynomials through level 5", b.len()))
}

fn partition_function() -> Outcome {
    let n = 6;
    let x = Poly::var(Var::X);
    let c = Poly::var(Var::C);
    let (fa, fb) = Example::TwoSlits.germs(Poly::one(), x.clone(), n);
    let z = wick::z_truncated(&fa, &fb, &c, n).map_err(|e| e.to_string())?;
    let lz = wick::log_series(&z, Var::X, 3).ok_or("log")?;
    let lz = lz.terms().fold(Poly::zero(), |acc, (m, k)| &acc + &Poly::monomial(m.clone(), k.clone()));
    let mut want = Poly::zero();
    for k in 1..=3u32 {
        want += &(&c * &x.pow(k)).scale(&qr(3, 24 * k as i64));
    }
    if lz == want {
        Ok("log Z = −(c/8) log(1 − b²/a²) through (b/a)^6".into())
    } else {
        Err(lz.to_string())
    }
}

fn ito() -> Outcome {
    let r = sle::ito_generator_check(6).map_err(|e| e.to_string())?;
    if r.holds {
        Ok(format!("grading 6; drift {}", r.grading2))
    } else {
        Err(format!("{r:?}"))
    }
}

pub fn run() -> Value {
    let checks: [(&str, fn() -> Outcome); 10] = [
        ("G_f through grading 2", grading_two),
        ("zero curvature", zero_curvature),
        ("anti-homomorphism", anti_homomorphism),
        ("conjugation formula", conjugation),
        ("peeling order", peeling),
        ("level-2 singular vector", singular),
        ("coherent Virasoro relations", relations),
        ("martingale polynomials", martingales),
        ("partition function", partition_function),
        ("Ito generator", ito),
    ];
    let mut all = true;
    let rows: Vec<Value> = checks
        .iter()
        .map(|(name, f)| {
            let r = f();
            all &= r.is_ok();
            let (pass, detail) = match r {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            json!({ "name": name, "pass": pass, "detail": detail })
        })
        .collect();
    json!({ "pass": all, "checks": rows })
}
