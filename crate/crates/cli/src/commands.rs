use serde_json::{json, Value};

use virloe::coherent::{self, rep, Rep};
use virloe::deform::{build_g, build_g_inverse, conjugate_ln, conjugate_ln_direct, formal_capped};
use virloe::poly::{fmt_q, parse_q};
use virloe::series::GermLiteral;
use virloe::sle::{self, HalfDisc, JetConfig, RestrictionConfig, SleConfig};
use virloe::verma::{self, c_kappa, h_kappa, singular_check, VermaParams};
use virloe::wick::{self, Example, Interpolation};
use virloe::{AlgebraElement, Basepoint, Germ, Poly, Q};

use crate::{CoherentCmd, Failure, GermArgs, GfCmd, Output, SleCmd, VermaCmd, WickCmd};

fn rational(name: &str, s: &str) -> Result<Q, Failure> {
    parse_q(s).ok_or_else(|| Failure::new("invalid", format!("--{name}: {s:?} is not a rational")))
}

fn basepoint(s: &str) -> Result<Basepoint, Failure> {
    match s {
        "origin" | "0" => Ok(Basepoint::Origin),
        "infinity" | "inf" => Ok(Basepoint::Infinity),
        _ => Err(Failure::new("invalid", format!("--basepoint: {s:?} is neither origin nor infinity"))),
    }
}

/// The germ and whether it is the formal one.
fn germ(a: &GermArgs) -> Result<(Germ, bool), Failure> {
    let Some(src) = &a.germ else {
        return Ok((Germ::formal(basepoint(&a.basepoint)?, a.n), true));
    };
    let text = match src.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path).map_err(|e| Failure::new("io", format!("{path}: {e}")))?,
        None => src.clone(),
    };
    let lit: GermLiteral = serde_json::from_str(&text).map_err(|e| Failure::new("invalid-germ", e.to_string()))?;
    let g = lit.to_germ()?;
    if g.truncation < a.n {
        return Err(virloe::Error::TruncationTooSmall { need: a.n, have: g.truncation }.into());
    }
    Ok((g, false))
}

fn terms(x: &AlgebraElement) -> Value {
    Value::Array(
        x.terms()
            .iter()
            .map(|(w, c)| json!({ "word": if w.is_empty() { "1".to_string() } else { w.to_string() }, "coeff": c.to_string() }))
            .collect(),
    )
}

pub fn gf(cmd: GfCmd) -> Result<Output, Failure> {
    Ok(Output::Json(match cmd {
        GfCmd::Expand { germ: ga, inverse } => {
            let (f, _) = germ(&ga)?;
            let g = if inverse { build_g_inverse(&f, ga.n)? } else { build_g(&f, ga.n)? };
            json!({
                "basepoint": format!("{:?}", f.basepoint).to_lowercase(),
                "truncation": ga.n,
                "inverse": inverse,
                "dilation": g.dilation.to_string(),
                "expansion": g.unipotent.to_string(),
                "terms": terms(&g.unipotent),
            })
        }
        GfCmd::Conjugate { germ: ga, m } => {
            let (f, formal) = germ(&ga)?;
            let conj = conjugate_ln(&f, m, ga.n)?;
            // for the formal germ at 0 the residue formula is checked
            // against PBW normal ordering
            let direct = if formal && f.basepoint == Basepoint::Origin {
                let (fc, cap) = formal_capped(Basepoint::Origin, ga.n);
                let capped = conjugate_ln(&fc, m, ga.n)?.map_coeffs(|p| p.clone().with_trunc(&cap));
                Some(capped == conjugate_ln_direct(m, ga.n)?)
            } else {
                None
            };
            json!({
                "m": m,
                "truncation": ga.n,
                "expansion": conj.to_string(),
                "terms": terms(&conj),
                "agrees_with_direct": direct,
            })
        }
    }))
}

fn params_for(kappa: Option<&str>, c: Option<&str>, h: Option<&str>) -> Result<VermaParams, Failure> {
    match (kappa, c, h) {
        (Some(k), None, None) => Ok(VermaParams::from_kappa(&rational("kappa", k)?)?),
        (None, Some(c), Some(h)) => Ok(VermaParams::rational(rational("c", c)?, rational("h", h)?)),
        (None, None, None) => Ok(VermaParams::formal()),
        _ => Err(Failure::new("invalid", "give either --kappa, or both --c and --h, or neither")),
    }
}

pub fn verma(cmd: VermaCmd) -> Result<Output, Failure> {
    match cmd {
        VermaCmd::Singular { kappa, h_shift } => {
            let k = rational("kappa", &kappa)?;
            if k <= Q::from_integer(0.into()) {
                return Err(Failure::new("invalid", "--kappa must be positive"));
            }
            let mut h = h_kappa(&k);
            if let Some(s) = &h_shift {
                h += rational("h-shift", s)?;
            }
            let r = singular_check(&VermaParams::rational(c_kappa(&k), h), &k);
            Ok(Output::Json(json!({
                "kappa": fmt_q(&k),
                "c": r.c.to_string(),
                "h": r.h.to_string(),
                "pass": r.holds,
                "L1_image": r.l1.to_string(),
                "L2_image": r.l2.to_string(),
            })))
        }
        VermaCmd::Shapovalov { level, kappa, c, h } => {
            let p = params_for(kappa.as_deref(), c.as_deref(), h.as_deref())?;
            Ok(Output::Csv(verma::shapovalov_csv(&p, level)))
        }
    }
}

pub fn coherent(cmd: CoherentCmd) -> Result<Output, Failure> {
    match cmd {
        CoherentCmd::Generators { rep: r, from, to, n, kappa } => {
            let which = match r.to_uppercase().as_str() {
                "P" => Rep::P,
                "Q" => Rep::Q,
                "R" => Rep::R,
                "S" => Rep::S,
                _ => return Err(Failure::new("invalid", format!("--rep: {r:?} is not one of P, Q, R, S"))),
            };
            let spec = match &kappa {
                Some(k) => {
                    let k = rational("kappa", k)?;
                    Some((c_kappa(&k), h_kappa(&k)))
                }
                None => None,
            };
            let mut ops = vec![];
            for m in from..=to {
                if which == Rep::S && m < 1 {
                    continue;
                }
                let mut op = rep(which, m, n)?;
                if let Some((c, h)) = &spec {
                    op = op.specialize(c, h);
                }
                ops.push(json!({ "n": m, "operator": op.to_string() }));
            }
            Ok(Output::Json(json!({ "rep": format!("{which:?}"), "truncation": n, "kappa": kappa, "operators": ops })))
        }
        CoherentCmd::Martingales { kappa, level } => {
            let k = rational("kappa", &kappa)?;
            let text = coherent::martingales_json(&k, level)?;
            Ok(Output::Json(serde_json::from_str(&text).expect("module emits JSON")))
        }
    }
}

fn example(s: &str) -> Result<Example, Failure> {
    Ok(s.parse::<Example>()?)
}

pub fn wick(cmd: WickCmd) -> Result<Output, Failure> {
    match cmd {
        WickCmd::Z { example: ex, a, b, n, c } => {
            let (a, b) = (rational("a", &a)?, rational("b", &b)?);
            let c = match &c {
                Some(c) => Poly::constant(rational("c", c)?),
                None => Poly::var(virloe::Var::C),
            };
            let r = wick::report(example(&ex)?, &a, &b, &c, n, None)?;
            Ok(Output::Json(serde_json::to_value(r).expect("serialisable")))
        }
        WickCmd::L { example: ex, a, b, closed_only, interpolation } => {
            let ex = example(&ex)?;
            let (aq, bq) = (rational("a", &a)?, rational("b", &b)?);
            let closed = wick::l_closed_form(ex, &aq, &bq)?;
            let interp = match interpolation.as_str() {
                "b-linear" => Interpolation::BLinear,
                "b-quadratic" => Interpolation::BQuadratic,
                "a" => Interpolation::A,
                other => return Err(Failure::new("invalid", format!("--interpolation: unknown {other:?}"))),
            };
            let numeric = if closed_only {
                Value::Null
            } else {
                let cfg = virloe::quad::QuadConfig::default();
                // the series solve needs a common annulus (two slits: b < a/2);
                // outside it only the closed form is reported
                match wick::l_numeric(ex, virloe::poly::q_to_f64(&aq), virloe::poly::q_to_f64(&bq), interp, &cfg) {
                    Ok(r) => json!({
                        "value": r.value,
                        "difference": r.value - closed.value,
                        "panels": r.quadrature.panels,
                        "evaluations": r.quadrature.evaluations,
                    }),
                    Err(e) => json!({ "error": { "kind": e.kind(), "message": e.to_string() } }),
                }
            };
            Ok(Output::Json(json!({
                "example": ex,
                "a": fmt_q(&aq),
                "b": fmt_q(&bq),
                "L_closed": closed,
                "L_numeric": numeric,
            })))
        }
    }
}

fn sle_config(mc: &crate::McArgs, coeffs: usize) -> Result<SleConfig, Failure> {
    Ok(SleConfig::new(rational("kappa", &mc.kappa)?, mc.dt, mc.t_max, mc.paths, mc.seed, coeffs)?)
}

pub fn sle(cmd: SleCmd) -> Result<Output, Failure> {
    match cmd {
        SleCmd::Simulate { mc, coeffs, every, csv } => {
            let cfg = sle_config(&mc, coeffs)?;
            let every = every.max(1);
            let keep = |k: usize, len: usize| k % every == 0 || k + 1 == len;
            if csv {
                let mut s = String::from("path,step,t,xi");
                for i in 1..=coeffs {
                    s += &format!(",f_-{i}");
                }
                s.push('\n');
                for p in sle::simulate(&cfg) {
                    for k in (0..p.times.len()).filter(|&k| keep(k, p.times.len())) {
                        s += &format!("{},{k},{},{}", p.id, p.times[k], p.xi[k]);
                        for c in &p.coeffs[k] {
                            s += &format!(",{c}");
                        }
                        s.push('\n');
                    }
                }
                return Ok(Output::Csv(s));
            }
            let paths: Vec<Value> = sle::simulate(&cfg)
                .map(|p| {
                    let idx: Vec<usize> = (0..p.times.len()).filter(|&k| keep(k, p.times.len())).collect();
                    json!({
                        "id": p.id,
                        "t": idx.iter().map(|&k| p.times[k]).collect::<Vec<_>>(),
                        "xi": idx.iter().map(|&k| p.xi[k]).collect::<Vec<_>>(),
                        "coeffs": idx.iter().map(|&k| p.coeffs[k].clone()).collect::<Vec<_>>(),
                    })
                })
                .collect();
            Ok(Output::Json(json!({ "kappa": mc.kappa, "dt": mc.dt, "seed": mc.seed, "paths": paths })))
        }
        SleCmd::MartingaleTest { mc, level, csv } => {
            let cfg = sle_config(&mc, 2)?;
            let obs = sle::standard_observables(&cfg.kappa, level)?;
            let r = sle::martingale_mc_test(&cfg, &obs)?;
            if csv {
                let mut s = String::from("name,control,t,estimate,std_error,prediction,z,pass\n");
                for row in &r.rows {
                    s += &format!(
                        "\"{}\",{},{},{},{},{},{},{}\n",
                        row.name, row.control, row.checkpoint_t, row.estimate, row.std_error, row.prediction, row.z, row.pass
                    );
                }
                return Ok(Output::Csv(s));
            }
            Ok(Output::Json(serde_json::to_value(r).expect("serialisable")))
        }
        SleCmd::Restriction { x0, r, kappa, paths, seed, radius, inner_radius } => {
            let k = virloe::poly::q_to_f64(&rational("kappa", &kappa)?);
            let cfg = RestrictionConfig { kappa: k, n_paths: paths, seed, radii: (radius, inner_radius), ..Default::default() };
            let rep = sle::restriction_experiment(x0, r, &cfg)?;
            Ok(Output::Json(serde_json::to_value(rep).expect("serialisable")))
        }
        SleCmd::Partition { mc, x0, r } => {
            let cfg = sle_config(&mc, 2)?;
            let a = HalfDisc { x0, r };
            if !(x0 > r && r >= 0.0) {
                return Err(Failure::new("invalid", "need x0 > r ≥ 0"));
            }
            let rows = sle::partition_martingale_mc(&a, &cfg, &JetConfig::default())?;
            Ok(Output::Json(json!({ "kappa": mc.kappa, "x0": x0, "r": r, "rows": rows })))
        }
    }
}
