//! Two hulls at once: the uniformization diagram `f_B̃∘f_A = f_Ã∘f_B`, the
//! Virasoro Wick theorem `G_{f_A}⁻¹G_{f_B} = Z·G_{f_B̃}G_{f_Ã}⁻¹`, the
//! partition function `Z(A,B)` and its anomaly integral `L(A,B)`.
//!
//! The exact side weighs the grading-`m` coefficient of `f_A` by `eA^m` and
//! that of `f_B` by `eB^{|m|}`. Every identity is then homogeneous (the
//! `eA^i eB^j` part only multiplies `z^{1+i−j}`), so the diagram is solved
//! order by order with unit pivots and truncating both degrees at `N` is
//! exact.
//!
//! The numeric side solves the same diagram on a circle in the annulus
//! between the hulls and integrates residues over a hull family.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::deform::{build_g, build_g_inverse, dilate};
use crate::error::{Error, Result};
use crate::pbw::Word;
use crate::poly::{fmt_q, q, q_to_f64, qr, Cap, Poly, Trunc, Truncation, Var, Weights, Q};
use crate::quad::{self, QuadConfig, QuadResult};
use crate::series::{self, binom_q, Basepoint, Germ};
use crate::verma::{
    apply_operator, basis, h_kappa, vacuum_expectation, DualVector, QuotientReducer, VermaParams, VermaVector,
    Weighted,
};

/// Caps `deg_eA ≤ n` and `deg_eB ≤ n`.
pub fn eps_trunc(n: usize) -> Trunc {
    Some(Truncation::new(vec![
        Cap { weights: Weights::var(Var::EPS_A), max: n as u32 },
        Cap { weights: Weights::var(Var::EPS_B), max: n as u32 },
    ]))
}

/// Insert the bookkeeping weights into a germ.
pub fn weigh(f: &Germ, tr: &Trunc) -> Result<Germ> {
    let eps = match f.basepoint {
        Basepoint::Origin => Var::EPS_A,
        Basepoint::Infinity => Var::EPS_B,
    };
    let coeffs = f
        .coeffs()
        .iter()
        .map(|(&m, c)| (m, (c * &Poly::var(eps).pow(m.unsigned_abs())).with_trunc(tr)))
        .collect();
    Germ::new(f.basepoint, f.truncation, f.scale.clone().with_trunc(tr), coeffs)
}

/// Set `eA = eB = 1`.
pub fn unweigh(p: &Poly) -> Poly {
    p.subst(&[(Var::EPS_A, Poly::one()), (Var::EPS_B, Poly::one())]).with_trunc(&None)
}

fn unweigh_germ(g: &Germ) -> Result<Germ> {
    let coeffs = g.coeffs().iter().map(|(&m, c)| (m, strip(&unweigh(c)))).collect();
    Germ::new(g.basepoint, g.truncation, strip(&unweigh(&g.scale)), coeffs)
}

fn strip(p: &Poly) -> Poly {
    let mut out = Poly::zero();
    for (m, c) in p.terms() {
        out += &Poly::monomial(m.clone(), c.clone());
    }
    out
}

// Laurent polynomials in z: exponent → coefficient.
type Lp = BTreeMap<i32, Poly>;

fn lp_mul(a: &Lp, b: &Lp) -> Lp {
    let mut out = Lp::new();
    for (ea, ca) in a {
        for (eb, cb) in b {
            let p = ca * cb;
            if !p.is_zero() {
                *out.entry(ea + eb).or_default() += &p;
            }
        }
    }
    out.retain(|_, c| !c.is_zero());
    out
}

fn lp_axpy(acc: &mut Lp, c: &Poly, a: &Lp) {
    for (e, x) in a {
        let p = c * x;
        if !p.is_zero() {
            *acc.entry(*e).or_default() += &p;
        }
    }
}

/// `(1+u)^k` for nilpotent `u`.
struct Binomial {
    upows: Vec<Lp>,
}

impl Binomial {
    fn new(u: Lp, tr: &Trunc) -> Self {
        let mut one = Lp::new();
        one.insert(0, Poly::one().with_trunc(tr));
        let mut upows = vec![one];
        loop {
            let next = lp_mul(upows.last().unwrap(), &u);
            if next.is_empty() {
                break;
            }
            upows.push(next);
        }
        Binomial { upows }
    }
    fn pow(&self, k: i64) -> Lp {
        let mut out = Lp::new();
        for (j, up) in self.upows.iter().enumerate() {
            let b = binom_q(&q(k), j as u32);
            if !b.is_zero() {
                lp_axpy(&mut out, &Poly::constant(b), up);
            }
        }
        out.retain(|_, c| !c.is_zero());
        out
    }
}

fn shift(a: &Lp, s: i32) -> Lp {
    a.iter().map(|(e, c)| (e + s, c.clone())).collect()
}

/// A generic pair of hulls with the completing maps of the diagram.
#[derive(Clone, Debug)]
pub struct HullPair {
    pub n: usize,
    /// `f_A`, `f_B` with bookkeeping weights inserted.
    pub fa: Germ,
    pub fb: Germ,
    pub fat: Germ,
    pub fbt: Germ,
}

impl HullPair {
    /// `f_Ã′(0)`.
    pub fn lambda(&self) -> &Poly {
        &self.fat.scale
    }
    /// `f_Ã`, `f_B̃` with the weights set to 1.
    pub fn unweighted(&self) -> Result<(Germ, Germ)> {
        Ok((unweigh_germ(&self.fat)?, unweigh_germ(&self.fbt)?))
    }
    /// `f_B̃∘f_A − f_Ã∘f_B` as a Laurent polynomial in `z`; empty when the
    /// diagram closes within the caps.
    pub fn residual(&self) -> Result<BTreeMap<i32, Poly>> {
        let d = DiagramTerms::new(&self.fa, &self.fb, self.n)?;
        Ok(d.residual(&self.fat.scale, &self.fat, &self.fbt))
    }
}

struct DiagramTerms {
    n: usize,
    sa: Poly,
    sa_inv: Poly,
    fa_lp: Lp,
    fb_lp: Lp,
    /// `f_A^{m+1}` for `m = −1…−n`.
    fa_pows: BTreeMap<i32, Lp>,
    /// `f_B^{m+1}` for `m = 1…n`.
    fb_pows: BTreeMap<i32, Lp>,
}

impl DiagramTerms {
    fn new(fa: &Germ, fb: &Germ, n: usize) -> Result<Self> {
        let tr = eps_trunc(n);
        let sa = fa.scale.clone();
        let sa_inv = sa.inverse().ok_or_else(|| Error::Genericity(0))?;
        let u: Lp = fa.coeffs().iter().map(|(&m, c)| (m, c.clone())).collect();
        let v: Lp = fb.coeffs().iter().map(|(&m, c)| (m, c.clone())).collect();
        let bu = Binomial::new(u, &tr);
        let bv = Binomial::new(v, &tr);
        let fa_lp = shift(&bu.pow(1), 1).into_iter().map(|(e, c)| (e, &c * &sa)).collect();
        let fb_lp = shift(&bv.pow(1), 1);
        let mut fa_pows = BTreeMap::new();
        for m in -(n as i32)..=-1 {
            let k = m + 1;
            let sk = if k >= 0 { sa.pow(k as u32) } else { sa_inv.pow((-k) as u32) };
            fa_pows.insert(m, shift(&bu.pow(k as i64), k).into_iter().map(|(e, c)| (e, &c * &sk)).collect());
        }
        let mut fb_pows = BTreeMap::new();
        for m in 1..=n as i32 {
            fb_pows.insert(m, shift(&bv.pow((m + 1) as i64), m + 1));
        }
        Ok(DiagramTerms { n, sa, sa_inv, fa_lp, fb_lp, fa_pows, fb_pows })
    }

    fn residual(&self, lam: &Poly, fat: &Germ, fbt: &Germ) -> Lp {
        let mut r = self.fa_lp.clone();
        for (m, c) in fbt.coeffs() {
            if let Some(p) = self.fa_pows.get(m) {
                lp_axpy(&mut r, c, p);
            }
        }
        let mut inner = self.fb_lp.clone();
        for (m, c) in fat.coeffs() {
            if let Some(p) = self.fb_pows.get(m) {
                lp_axpy(&mut inner, c, p);
            }
        }
        lp_axpy(&mut r, &-lam, &inner);
        r.retain(|_, c| !c.is_zero());
        r
    }
}

/// Solve `f_B̃∘f_A = f_Ã∘f_B` for `f_Ã` (fixing 0, any dilation) and `f_B̃`
/// (`z + O(1)` at ∞) through bi-degree `(n, n)`.
pub fn commutative_diagram(fa: &Germ, fb: &Germ, n: usize) -> Result<HullPair> {
    if fa.basepoint != Basepoint::Origin || fb.basepoint != Basepoint::Infinity {
        return Err(Error::BasepointMismatch("diagram needs an origin germ and an infinity germ".into()));
    }
    for g in [fa, fb] {
        if g.truncation < n {
            return Err(Error::TruncationTooSmall { need: n, have: g.truncation });
        }
    }
    if fb.scale != Poly::one() {
        return Err(Error::Invalid("f_B must be z + O(1) at infinity".into()));
    }
    let tr = eps_trunc(n);
    let fa = weigh(&fa.truncated(n), &tr)?;
    let fb = weigh(&fb.truncated(n), &tr)?;
    let terms = DiagramTerms::new(&fa, &fb, n)?;
    let mut lam = terms.sa.clone();
    let mut at: BTreeMap<i32, Poly> = BTreeMap::new();
    let mut bt: BTreeMap<i32, Poly> = BTreeMap::new();
    let build = |lam: &Poly, at: &BTreeMap<i32, Poly>, bt: &BTreeMap<i32, Poly>| -> Result<(Germ, Germ)> {
        Ok((
            Germ::new(Basepoint::Origin, n, lam.clone(), at.clone())?,
            Germ::new(Basepoint::Infinity, n, Poly::one(), bt.clone())?,
        ))
    };
    // Each sweep fixes the residual at its lowest total degree.
    for sweep in 0..=(2 * n + 2) {
        let (fat, fbt) = build(&lam, &at, &bt)?;
        let r = terms.residual(&lam, &fat, &fbt);
        if r.is_empty() {
            return Ok(HullPair { n, fa, fb, fat, fbt });
        }
        let lam_inv = lam.inverse().ok_or(Error::Genericity(sweep as i32))?;
        for (e, c) in r {
            let m = e - 1;
            if m.unsigned_abs() as usize > terms.n {
                return Err(Error::Genericity(m));
            }
            match m.signum() {
                1 => *at.entry(m).or_default() += &(&c * &lam_inv),
                0 => lam += &c,
                _ => {
                    let k = m + 1;
                    let pivot = if k >= 0 { terms.sa_inv.pow(k as u32) } else { terms.sa.pow((-k) as u32) };
                    *bt.entry(m).or_default() -= &(&c * &pivot);
                }
            }
        }
        at.retain(|_, c| !c.is_zero());
        bt.retain(|_, c| !c.is_zero());
    }
    Err(Error::Genericity(n as i32))
}

/// `⟨Ω|G_{f_A}⁻¹G_{f_B}|Ω⟩` through grading `n` on both sides; the dilation
/// of `f_A` is moved onto `G_{f_B}` and then acts trivially on `|Ω⟩`.
pub fn z_truncated(fa: &Germ, fb: &Germ, c: &Poly, n: usize) -> Result<Poly> {
    if fa.basepoint != Basepoint::Origin || fb.basepoint != Basepoint::Infinity {
        return Err(Error::BasepointMismatch("Z(A,B) needs an origin germ and an infinity germ".into()));
    }
    let ga = build_g_inverse(fa, n)?;
    let gb = build_g(fb, n)?;
    vacuum_expectation(&ga.unipotent, &dilate(&gb.unipotent, &ga.dilation)?, c)
}

/// `log(1 + y)` for `z = 1 + y`, truncated at degree `order` in `var`.
pub fn log_series(z: &Poly, var: Var, order: u32) -> Option<Poly> {
    if z.constant_term() != Q::one() {
        return None;
    }
    let tr = Some(Truncation::degree(var, order));
    let y = (z - &Poly::one()).with_trunc(&tr);
    if !y.terms().all(|(m, _)| m.iter().any(|(v, _)| *v == var)) {
        return None;
    }
    let mut acc = Poly::zero().with_trunc(&tr);
    let mut yk = Poly::one().with_trunc(&tr);
    for k in 1..=order as i64 {
        yk = &yk * &y;
        let s = if k % 2 == 1 { qr(1, k) } else { qr(-1, k) };
        acc += &yk.scale(&s);
    }
    Some(acc)
}

/// One Verma matrix element of the two sides of the Wick identity.
#[derive(Clone, Debug)]
pub struct WickEntry {
    pub left: Word,
    pub right: Word,
    pub lhs: Poly,
    pub rhs: Poly,
}

impl WickEntry {
    pub fn holds(&self) -> bool {
        self.lhs == self.rhs
    }
}

/// `⟨y|G_{f_A}⁻¹G_{f_B}|v⟩` against `Z·⟨y|G_{f_B̃}G_{f_Ã}⁻¹|v⟩` in `V(c,h)` with
/// formal `c`, `h`, for basis vectors through `level`, exact through
/// bi-degree `(n, n)`. The common factor `f_A′(0)^h` is divided out.
pub fn wick_residual(fa: &Germ, fb: &Germ, n: usize, level: u32) -> Result<Vec<WickEntry>> {
    let pair = commutative_diagram(fa, fb, n)?;
    let params = VermaParams::formal();
    let z = z_truncated(&pair.fa, &pair.fb, &params.c, n)?;
    let sa = pair.fa.scale.clone();
    let ratio = pair.lambda() * &sa.inverse().ok_or_else(|| Error::NotInvertible("f_A′(0)".into()))?;
    let weight = ratio
        .with_trunc(&eps_trunc(n))
        .pow_formal(&params.h)
        .ok_or_else(|| Error::NotInvertible("f_Ã′(0)/f_A′(0)".into()))?;
    let zw = &z * &weight;
    let ga_inv = build_g_inverse(&pair.fa, n)?;
    let gb = build_g(&pair.fb, n)?;
    let gat_inv = build_g_inverse(&pair.fat, n)?;
    let gbt = build_g(&pair.fbt, n)?;
    let words: Vec<Word> = (0..=level).flat_map(basis).collect();
    let mut out = vec![];
    for v in &words {
        let vv = VermaVector::basis(&params, v.clone());
        let (_, w) = apply_operator(&gb, &vv)?;
        let (_, lhs_vec) = apply_operator(&ga_inv, &w)?;
        let (_, w) = apply_operator(&gat_inv, &vv)?;
        let (_, rhs_vec) = apply_operator(&gbt, &w)?;
        for y in &words {
            let yy = DualVector::basis(&params, y.clone());
            let lhs = yy.pair(&lhs_vec);
            let rhs = &zw * &yy.pair(&rhs_vec);
            out.push(WickEntry { left: y.clone(), right: v.clone(), lhs, rhs });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct OmegaExpectation {
    /// `f_A′(0)`; both sides carry the factor `f_A′(0)^{h_κ}`.
    pub base: Poly,
    /// Pairing in the quotient module, weights kept.
    pub direct: Poly,
    /// `Z·(f_Ã′(0)/f_A′(0))^{h_κ}`, weights kept.
    pub wick: Poly,
    pub agree: bool,
    /// The common value at unit weights.
    pub value: Weighted,
}

/// `⟨ω|G_{f_A}⁻¹G_{f_B}|ω⟩` computed directly in `V(c_κ,h_κ)/⟨singular⟩`
/// and through the Wick theorem as `Z(A,B)·f_Ã′(0)^{h_κ}`.
pub fn omega_expectation(fa: &Germ, fb: &Germ, kappa: &Q, n: usize) -> Result<OmegaExpectation> {
    let pair = commutative_diagram(fa, fb, n)?;
    let params = VermaParams::from_kappa(kappa)?;
    let h = h_kappa(kappa);
    let reducer = QuotientReducer::new(kappa, n as u32)?;
    let ga_inv = build_g_inverse(&pair.fa, n)?;
    let gb = build_g(&pair.fb, n)?;
    let omega = VermaVector::highest(&params);
    let (_, w) = apply_operator(&gb, &omega)?;
    let w = reducer.reduce(&w);
    let (_, w) = apply_operator(&ga_inv, &w)?;
    let direct = reducer.reduce(&w).coeff(&Word::empty());

    let z = z_truncated(&pair.fa, &pair.fb, &params.c, n)?;
    let sa = pair.fa.scale.clone();
    let ratio = pair.lambda() * &sa.inverse().ok_or_else(|| Error::NotInvertible("f_A′(0)".into()))?;
    let weight = ratio
        .with_trunc(&eps_trunc(n))
        .pow_q(&h)
        .ok_or_else(|| Error::NotInvertible("f_Ã′(0)/f_A′(0)".into()))?;
    let wick = &z * &weight;
    let agree = direct == wick;
    let value = Weighted { base: strip(&unweigh(&sa)), value: strip(&unweigh(&direct)) };
    Ok(OmegaExpectation { base: sa, direct, wick, agree, value })
}

/// The two hull families with closed-form anomaly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Example {
    /// `A` = the slit `[ia, i∞)`, `B` = the slit `(0, ib]`.
    TwoSlits,
    /// `A` = the slit `[ia, i∞)`, `B` = the half disc of radius `b` at 0.
    SlitHalfDisc,
}

impl std::str::FromStr for Example {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-slits" | "two_slits" => Ok(Example::TwoSlits),
            "slit-halfdisc" | "slit_halfdisc" | "slit-half-disc" => Ok(Example::SlitHalfDisc),
            _ => Err(Error::Invalid(format!("unknown example {s}"))),
        }
    }
}

impl Example {
    /// `(f_A, f_B)` as germs, from `a^{−2}` and `b²` (rational or formal).
    pub fn germs(self, a_inv_sq: impl Into<Poly>, b_sq: impl Into<Poly>, n: usize) -> (Germ, Germ) {
        let fa = series::slit_from_above(a_inv_sq, n);
        let fb = match self {
            Example::TwoSlits => series::slit_from_origin(b_sq, n),
            Example::SlitHalfDisc => series::half_disc_at_origin(b_sq, n),
        };
        (fa, fb)
    }

    /// Coefficients of `L` as a power series in `x = b²/a²`, from `x¹` to
    /// `x^order`.
    pub fn l_taylor(self, order: u32) -> Vec<Q> {
        (1..=order as i64)
            .map(|k| match self {
                Example::TwoSlits => qr(3, 2 * k),
                Example::SlitHalfDisc => {
                    let alt = if k % 2 == 1 { qr(1, k) } else { qr(-1, k) };
                    qr(3, 4) * (alt + qr(3, k))
                }
            })
            .collect()
    }

    fn f_a(p: f64, z: C64) -> C64 {
        z / (1.0 + p * z * z).sqrt()
    }

    fn f_b(self, beta: f64, z: C64) -> C64 {
        match self {
            Example::TwoSlits => z * (1.0 + beta * beta / (z * z)).sqrt(),
            Example::SlitHalfDisc => z + beta * beta / z,
        }
    }

    /// Coefficients `v_k` of `v_{B_β}(z) = Σ_k v_k z^{−k}`.
    fn v_b(self, beta: f64, terms: usize) -> Vec<(i32, f64)> {
        match self {
            Example::TwoSlits => vec![(1, beta)],
            Example::SlitHalfDisc => {
                // (z − √(z²−4β²))/β = (z/β) Σ_{n≥1} (−1)^{n+1} binom(1/2,n) (4β²/z²)^n
                let mut out = vec![];
                let mut b = 1.0;
                for k in 0..terms {
                    b *= (0.5 - k as f64) / (k as f64 + 1.0);
                    let n = k as i32 + 1;
                    let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
                    out.push((2 * n - 1, sign * b * 4f64.powi(n) * beta.powi(2 * n - 1)));
                }
                out
            }
        }
    }

    /// `max |f_A|` over `B_β` and `min |f_B|` over `A`.
    fn radii(self, p: f64, beta: f64) -> (f64, f64) {
        let rb = if beta == 0.0 { 0.0 } else { Self::f_a(p, C64::new(0.0, beta)).norm() };
        let ra = if p == 0.0 { f64::INFINITY } else { self.f_b(beta, C64::new(0.0, p.powf(-0.5))).norm() };
        (rb, ra)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClosedForm {
    pub expression: String,
    pub value: f64,
}

/// `L(A_a, B_b)` for the two families in closed form.
pub fn l_closed_form(example: Example, a: &Q, b: &Q) -> Result<ClosedForm> {
    if !a.is_positive() || b.is_negative() {
        return Err(Error::Invalid("need a > 0 and b ≥ 0".into()));
    }
    if b >= a {
        return Err(Error::Contact(format!("b = {} ≥ a = {}", fmt_q(b), fmt_q(a))));
    }
    let x = b * b / (a * a);
    let xf = q_to_f64(&x);
    let one = Q::one();
    Ok(match example {
        Example::TwoSlits => ClosedForm {
            expression: format!("-3/2*log({})", fmt_q(&(&one - &x))),
            value: -1.5 * (-xf).ln_1p(),
        },
        Example::SlitHalfDisc => {
            let arg = (&one + &x) / (&one - &x).pow(3);
            ClosedForm { expression: format!("3/4*log({})", fmt_q(&arg)), value: 0.75 * (xf.ln_1p() - 3.0 * (-xf).ln_1p()) }
        }
    })
}

/// Numeric solution of the diagram on a circle `|z| = ρ`:
/// `f_Ã(w) = λ(w + Σ ã_m w^{m+1})`, `f_B̃(u) = u + Σ b̃_m u^{1−m}`.
#[derive(Clone, Debug)]
pub struct NumericDiagram {
    pub rho: f64,
    pub lambda: C64,
    /// `ã_1, ã_2, …`
    pub at: Vec<C64>,
    /// `b̃_{−1}, b̃_{−2}, …`
    pub bt: Vec<C64>,
    /// `max |f_B̃∘f_A − f_Ã∘f_B|` on the circle.
    pub residual: f64,
}

fn eval_origin(lam: C64, at: &[C64], w: C64) -> C64 {
    let mut acc = C64::zero();
    for a in at.iter().rev() {
        acc = (acc + a) * w;
    }
    lam * w * (acc + 1.0)
}

fn eval_infinity(bt: &[C64], u: C64) -> C64 {
    let t = u.inv();
    let mut acc = C64::zero();
    for b in bt.iter().rev() {
        acc = (acc + b) * t;
    }
    u * (acc + 1.0)
}

/// With `u = f_A(z)`, `w = f_B(z)` sampled on the circle, the diagram
/// `Σ b̃_m u^{m+1} − λw − Σ c_m w^{m+1} = −u` (`c_m = λã_m`) is linear. It is
/// projected on the Fourier modes `z^{1−terms} … z^{1+terms}`, one per
/// unknown, and solved by LU.
pub fn solve_diagram_numeric(
    fa: &dyn Fn(C64) -> C64,
    fb: &dyn Fn(C64) -> C64,
    rho: f64,
    terms: usize,
) -> Result<NumericDiagram> {
    let j = (4 * terms + 16).next_power_of_two();
    let zs: Vec<C64> = (0..j).map(|k| C64::from_polar(rho, std::f64::consts::TAU * k as f64 / j as f64)).collect();
    let us: Vec<C64> = zs.iter().map(|&z| fa(z) / rho).collect();
    let ws: Vec<C64> = zs.iter().map(|&z| fb(z) / rho).collect();
    let fft = rustfft::FftPlanner::new().plan_fft_forward(j);
    let project = |col: &mut Vec<C64>| fft.process(col);
    let modes: Vec<usize> = (1 - terms as i64..=1 + terms as i64).map(|e| e.rem_euclid(j as i64) as usize).collect();
    let n = 2 * terms + 1;
    let mut a = nalgebra::DMatrix::<C64>::zeros(n, n);
    let mut put = |col: usize, mut vals: Vec<C64>| {
        project(&mut vals);
        for (row, &k) in modes.iter().enumerate() {
            a[(row, col)] = vals[k] / j as f64;
        }
    };
    // columns: λ, c_1…c_M (scaled), b̃_{−1}…b̃_{−M} (scaled)
    put(0, ws.iter().map(|w| -w).collect());
    for m in 1..=terms as i32 {
        put(m as usize, ws.iter().map(|w| -w.powi(m + 1)).collect());
        put(terms + m as usize, us.iter().map(|u| u.powi(1 - m)).collect());
    }
    let mut rhs: Vec<C64> = us.iter().map(|u| -u).collect();
    project(&mut rhs);
    let b = nalgebra::DVector::from_iterator(n, modes.iter().map(|&k| rhs[k] / j as f64));
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Quadrature(format!("singular diagram system on |z| = {rho}")))?;
    let lambda = x[0];
    let at: Vec<C64> = (1..=terms).map(|m| x[m] * rho.powi(-(m as i32)) / lambda).collect();
    let bt: Vec<C64> = (1..=terms).map(|m| x[terms + m] * rho.powi(m as i32)).collect();
    let residual = zs
        .iter()
        .zip(us.iter().zip(&ws))
        .map(|(_, (u, w))| (eval_infinity(&bt, u * rho) - eval_origin(lambda, &at, w * rho)).norm())
        .fold(0.0, f64::max);
    if !residual.is_finite() || residual > 1e-9 * rho {
        return Err(Error::Quadrature(format!("diagram residual {residual:e} on |z| = {rho}")));
    }
    Ok(NumericDiagram { rho, lambda, at, bt, residual })
}

/// Power-series coefficients of the Schwarzian of `w + Σ c_m w^{m+1}`
/// (`c_m = coeffs[m−1]`), through `w^{len−1}`.
pub fn schwarzian_origin(coeffs: &[C64], len: usize) -> Vec<C64> {
    let deg = coeffs.len() + 1;
    let f: Vec<C64> = (0..=deg).map(|k| if k == 1 { C64::one() } else if k >= 2 { coeffs[k - 2] } else { C64::zero() }).collect();
    let d = |g: &[C64]| -> Vec<C64> { (1..g.len()).map(|k| g[k] * k as f64).collect() };
    let (d1, d2, d3) = {
        let d1 = d(&f);
        let d2 = d(&d1);
        let d3 = d(&d2);
        (d1, d2, d3)
    };
    schwarzian_from_derivs(&d1, &d2, &d3, len)
}

/// Same for the series `u + Σ b_m u^{1−m}` at ∞, in powers of `t = 1/u`.
pub fn schwarzian_infinity(coeffs: &[C64], len: usize) -> Vec<C64> {
    // f′ = 1 + Σ (1−k) b_k t^k, f″ = Σ (1−k)(−k) b_k t^{k+1},
    // f‴ = Σ (1−k)(−k)(−k−1) b_k t^{k+2}
    let n = coeffs.len() + 3;
    let mut d1 = vec![C64::zero(); n];
    let mut d2 = vec![C64::zero(); n];
    let mut d3 = vec![C64::zero(); n];
    d1[0] = C64::one();
    for (i, b) in coeffs.iter().enumerate() {
        let k = (i + 1) as f64;
        d1[i + 1] += b * (1.0 - k);
        d2[i + 2] += b * ((1.0 - k) * -k);
        d3[i + 3] += b * ((1.0 - k) * -k * (-k - 1.0));
    }
    schwarzian_from_derivs(&d1, &d2, &d3, len)
}

fn series_div(a: &[C64], b: &[C64], len: usize) -> Vec<C64> {
    let mut out = vec![C64::zero(); len];
    for k in 0..len {
        let mut s = a.get(k).copied().unwrap_or_default();
        for j in 1..=k.min(b.len().saturating_sub(1)) {
            s -= b[j] * out[k - j];
        }
        out[k] = s / b[0];
    }
    out
}

fn series_mul(a: &[C64], b: &[C64], len: usize) -> Vec<C64> {
    let mut out = vec![C64::zero(); len];
    for (i, x) in a.iter().enumerate().take(len) {
        for (j, y) in b.iter().enumerate().take(len - i) {
            out[i + j] += x * y;
        }
    }
    out
}

fn schwarzian_from_derivs(d1: &[C64], d2: &[C64], d3: &[C64], len: usize) -> Vec<C64> {
    let a = series_div(d3, d1, len);
    let b = series_div(d2, d1, len);
    let b2 = series_mul(&b, &b, len);
    a.iter().zip(&b2).map(|(x, y)| x - y * 1.5).collect()
}

/// Pick the circle radius minimizing the worse of the two convergence ratios
/// and a matching number of series terms.
fn choose_circle(
    fa: &dyn Fn(C64) -> C64,
    fb: &dyn Fn(C64) -> C64,
    rb: f64,
    ra: f64,
    scale: f64,
) -> Result<(f64, usize)> {
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=160 {
        let rho = scale * 10f64.powf(-3.0 + 6.0 * i as f64 / 160.0);
        if rho <= rb {
            continue;
        }
        let mut umin = f64::INFINITY;
        let mut wmax: f64 = 0.0;
        for k in 0..64 {
            let z = C64::from_polar(rho, std::f64::consts::TAU * (k as f64 + 0.5) / 64.0);
            umin = umin.min(fa(z).norm());
            wmax = wmax.max(fb(z).norm());
        }
        let ratio = (rb / umin).max(wmax / ra);
        if ratio < best.0 {
            best = (ratio, rho);
        }
    }
    let (ratio, rho) = best;
    if !(ratio < 0.93) {
        return Err(Error::Contact(format!("no common annulus (ratio {ratio:.3})")));
    }
    let terms = if ratio <= 1e-8 { 8 } else { ((-38.0 / ratio.ln()).ceil() as usize + 6).clamp(8, 600) };
    Ok((rho, terms))
}

/// Which hull is interpolated, and how.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    /// `L = −∫_0^b dβ ∮ v_{B_β} Sf_{A_{a,β}}` with `β = b·s`.
    BLinear,
    /// Same integral with `β = b·s²`.
    BQuadratic,
    /// `L = ∫_0^{a^{−2}} dp ∮ v_{A_p} Sf_{B_{b,p}}` with `A_p` the slit
    /// `[i p^{−1/2}, i∞)`, `v_{A_p}(w) = −w³/2`.
    A,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NumericL {
    pub value: f64,
    pub quadrature: QuadResult,
}

/// Residue `∮ v_{B_β} Sf_{A_{a,β}}` with `f_{A_{a,β}}` from the numeric diagram.
pub fn b_residue(example: Example, a: f64, beta: f64) -> Result<f64> {
    if beta == 0.0 {
        return Ok(0.0);
    }
    let p = 1.0 / (a * a);
    let fa = move |z: C64| Example::f_a(p, z);
    let fb = move |z: C64| example.f_b(beta, z);
    let (rb, ra) = example.radii(p, beta);
    let (rho, terms) = choose_circle(&fa, &fb, rb, ra, a)?;
    let d = solve_diagram_numeric(&fa, &fb, rho, terms)?;
    let s = schwarzian_origin(&d.at, terms.saturating_sub(4).max(2));
    let mut res = C64::zero();
    for (k, vk) in example.v_b(beta, s.len() / 2 + 1) {
        if let Some(sk) = s.get((k - 1) as usize) {
            res += sk * vk;
        }
    }
    Ok(res.re)
}

/// Residue `∮ v_{A_p} Sf_{B_{b,p}} = −½ [w^{−4}] Sf_{B̃}`.
pub fn a_residue(example: Example, p: f64, b: f64) -> Result<f64> {
    if p == 0.0 || b == 0.0 {
        return Ok(0.0);
    }
    let fa = move |z: C64| Example::f_a(p, z);
    let fb = move |z: C64| example.f_b(b, z);
    let (rb, ra) = example.radii(p, b);
    let (rho, terms) = choose_circle(&fa, &fb, rb, ra, p.powf(-0.5))?;
    let d = solve_diagram_numeric(&fa, &fb, rho, terms)?;
    let s = schwarzian_infinity(&d.bt, 5);
    Ok(-0.5 * s[4].re)
}

/// `L(A_a, B_b)` by quadrature over a hull family; the contour integral is
/// always a residue of numerically solved series.
pub fn l_numeric(example: Example, a: f64, b: f64, interp: Interpolation, cfg: &QuadConfig) -> Result<NumericL> {
    if !(a > 0.0 && b >= 0.0) {
        return Err(Error::Invalid("need a > 0 and b ≥ 0".into()));
    }
    if b >= a {
        return Err(Error::Contact(format!("b = {b} ≥ a = {a}")));
    }
    let quadrature = match interp {
        Interpolation::BLinear => quad::integrate(|s| Ok(-b * b_residue(example, a, b * s)?), 0.0, 1.0, cfg)?,
        Interpolation::BQuadratic => {
            quad::integrate(|s| Ok(-2.0 * b * s * b_residue(example, a, b * s * s)?), 0.0, 1.0, cfg)?
        }
        Interpolation::A => quad::integrate(|p| a_residue(example, p, b), 0.0, 1.0 / (a * a), cfg)?,
    };
    Ok(NumericL { value: quadrature.value, quadrature })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WickReport {
    pub example: Example,
    pub a: String,
    pub b: String,
    #[serde(rename = "L_closed")]
    pub l_closed: ClosedForm,
    #[serde(rename = "L_numeric")]
    pub l_numeric: Option<f64>,
    #[serde(rename = "Z_truncated")]
    pub z_truncated: String,
    pub gradings: usize,
}

/// Everything the command line reports for one `(a, b)`.
pub fn report(example: Example, a: &Q, b: &Q, c: &Poly, n: usize, numeric: Option<&QuadConfig>) -> Result<WickReport> {
    let l_closed = l_closed_form(example, a, b)?;
    let (fa, fb) = example.germs(Poly::constant((a * a).recip()), Poly::constant(b * b), n);
    let z = z_truncated(&fa, &fb, c, n)?;
    let l_numeric = match numeric {
        Some(cfg) => Some(l_numeric(example, q_to_f64(a), q_to_f64(b), Interpolation::BLinear, cfg)?.value),
        None => None,
    };
    Ok(WickReport {
        example,
        a: fmt_q(a),
        b: fmt_q(b),
        l_closed,
        l_numeric,
        z_truncated: match z.as_constant() {
            Some(v) => fmt_q(&v),
            None => z.to_string(),
        },
        gradings: n,
    })
}

/// `x ↦ Z` value at `c` as a float, for sweeps.
pub fn z_value(z: &Poly, c: f64) -> f64 {
    z.eval_f64(&|v| if v == Var::C { c } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Poly {
        Poly::var(Var::X)
    }

    #[test]
    fn trivial_diagrams() {
        let fa = Germ::from_q(Basepoint::Origin, 4, &[(1, qr(1, 3)), (2, qr(-2, 5))]).unwrap();
        let fb = Germ::from_q(Basepoint::Infinity, 4, &[(-1, qr(1, 2)), (-3, qr(3, 7))]).unwrap();
        let id_b = Germ::identity(Basepoint::Infinity, 4);
        let id_a = Germ::identity(Basepoint::Origin, 4);
        let p = commutative_diagram(&fa, &id_b, 4).unwrap();
        let (fat, fbt) = p.unweighted().unwrap();
        assert_eq!(fat, fa);
        assert!(fbt.is_identity());
        let p = commutative_diagram(&id_a, &fb, 4).unwrap();
        let (fat, fbt) = p.unweighted().unwrap();
        assert!(fat.is_identity());
        assert_eq!(fbt, fb);
    }

    #[test]
    fn two_slit_diagram() {
        let n = 6;
        let (fa, fb) = Example::TwoSlits.germs(Poly::one(), x(), n);
        let p = commutative_diagram(&fa, &fb, n).unwrap();
        assert!(p.residual().unwrap().is_empty());
        let tr = eps_trunc(n);
        let ea2 = Poly::var(Var::EPS_A).pow(2);
        let eb2 = Poly::var(Var::EPS_B).pow(2);
        let inv = (&Poly::one() - &(&(&x() * &ea2) * &eb2)).with_trunc(&tr).inverse().unwrap();
        // f_Ã = (1 − b²/a²)^{−1} f_{A_γ}, f_B̃ = f_{B_δ}
        assert_eq!(p.fat.scale, inv);
        let fag = series::slit_from_above(&ea2 * &inv, n);
        let fbd = series::slit_from_origin(&(&x() * &eb2) * &inv, n);
        assert_eq!(p.fat.coeffs(), fag.coeffs());
        assert_eq!(p.fbt.coeffs(), fbd.coeffs());
    }

    #[test]
    fn z_low_orders() {
        let c = Poly::var(Var::C);
        let (fa, fb) = Example::TwoSlits.germs(Poly::one(), x(), 2);
        let z = z_truncated(&fa, &fb, &c, 2).unwrap();
        assert_eq!(z, &Poly::one() + &(&c * &x()).scale(&qr(1, 8)));
        let id = Germ::identity(Basepoint::Infinity, 3);
        assert_eq!(z_truncated(&fa.truncated(3), &id, &c, 2).unwrap(), Poly::one());
    }

    #[test]
    fn log_z_matches_anomaly() {
        let c = Poly::var(Var::C);
        let n = 6;
        for ex in [Example::TwoSlits, Example::SlitHalfDisc] {
            let (fa, fb) = ex.germs(Poly::one(), x(), n);
            let z = z_truncated(&fa, &fb, &c, n).unwrap();
            let lz = log_series(&z, Var::X, (n / 2) as u32).unwrap();
            let mut want = Poly::zero();
            for (k, l) in ex.l_taylor((n / 2) as u32).into_iter().enumerate() {
                want += &(&c * &x().pow(k as u32 + 1)).scale(&(l / q(12)));
            }
            assert_eq!(strip(&lz), want, "{ex:?}");
        }
    }

    #[test]
    fn z_invariance() {
        let c = Poly::var(Var::C);
        let n = 4;
        let (fa, fb) = Example::TwoSlits.germs(Poly::constant(qr(1, 2)), Poly::constant(qr(1, 3)), n);
        let z0 = z_truncated(&fa, &fb, &c, n).unwrap();
        // z ↦ 2z/(1 + z/3) fixes 0; translation by 5/7 at ∞.
        let mut m = BTreeMap::new();
        for k in 1..=n as i32 {
            m.insert(k, Poly::constant(qr(-1, 3).pow(k)));
        }
        let h0 = Germ::new(Basepoint::Origin, n, Poly::int(2), m).unwrap();
        let fa2 = series::compose(&fa, &h0).unwrap();
        let t = Germ::from_q(Basepoint::Infinity, n, &[(-1, qr(5, 7))]).unwrap();
        let fb2 = series::compose(&fb, &t).unwrap();
        assert_eq!(z_truncated(&fa2, &fb2, &c, n).unwrap(), z0);
    }

    #[test]
    fn wick_factorization() {
        let n = 3;
        let fa = Germ::new(
            Basepoint::Origin,
            n,
            Poly::constant(qr(3, 2)),
            [(1, Poly::constant(qr(1, 2))), (2, Poly::constant(qr(-1, 3)))].into_iter().collect(),
        )
        .unwrap();
        let fb = Germ::from_q(Basepoint::Infinity, n, &[(-1, qr(2, 5)), (-2, qr(1, 4))]).unwrap();
        let entries = wick_residual(&fa, &fb, n, 2).unwrap();
        let bad: Vec<_> = entries.iter().filter(|e| !e.holds()).collect();
        assert!(bad.is_empty(), "{:?}", bad.first().map(|e| (&e.left, &e.right)));
    }

    #[test]
    fn omega_two_slits() {
        let (fa, fb) = Example::TwoSlits.germs(Poly::one(), Poly::constant(qr(1, 4)), 4);
        let r = omega_expectation(&fa, &fb, &q(2), 4).unwrap();
        assert!(r.agree);
        let id = Germ::identity(Basepoint::Infinity, 4);
        let fa = Germ::new(Basepoint::Origin, 4, Poly::constant(qr(4, 9)), fa.coeffs().clone()).unwrap();
        let r = omega_expectation(&fa, &id, &q(2), 4).unwrap();
        assert!(r.agree);
        assert_eq!(r.value.value, Poly::one());
        assert_eq!(r.value.base, Poly::constant(qr(4, 9)));
    }

    #[test]
    fn closed_forms() {
        let c = l_closed_form(Example::TwoSlits, &q(1), &qr(1, 2)).unwrap();
        assert_eq!(c.expression, "-3/2*log(3/4)");
        assert!((c.value + 1.5 * 0.75f64.ln()).abs() < 1e-15);
        let c = l_closed_form(Example::SlitHalfDisc, &q(1), &qr(1, 2)).unwrap();
        assert_eq!(c.expression, "3/4*log(80/27)");
        assert!(l_closed_form(Example::TwoSlits, &q(1), &q(1)).is_err());
        assert_eq!(l_closed_form(Example::TwoSlits, &q(1), &q(0)).unwrap().value, 0.0);
    }

    #[test]
    fn numeric_diagram_two_slits() {
        // f_Ã = f_{A_γ}/(1 − b²/a²), γ² = a² − b²
        let (a, b) = (1.0, 0.25);
        let fa = move |z: C64| Example::f_a(1.0 / (a * a), z);
        let fb = move |z: C64| Example::TwoSlits.f_b(b, z);
        let (rb, ra) = Example::TwoSlits.radii(1.0, b);
        let (rho, terms) = choose_circle(&fa, &fb, rb, ra, a).unwrap();
        let d = solve_diagram_numeric(&fa, &fb, rho, terms).unwrap();
        let x: f64 = b * b / (a * a);
        assert!((d.lambda.re - 1.0 / (1.0 - x)).abs() < 1e-13);
        let g2 = a * a - b * b;
        assert!((d.at[1].re + 0.5 / g2).abs() < 1e-13);
        assert!((d.at[3].re - 0.375 / (g2 * g2)).abs() < 1e-13);
    }

    #[test]
    fn numeric_l() {
        let cfg = QuadConfig::default();
        for ex in [Example::TwoSlits, Example::SlitHalfDisc] {
            let want = l_closed_form(ex, &q(1), &qr(1, 4)).unwrap().value;
            for interp in [Interpolation::BLinear, Interpolation::BQuadratic, Interpolation::A] {
                let got = l_numeric(ex, 1.0, 0.25, interp, &cfg).unwrap().value;
                assert!((got - want).abs() < 1e-9, "{ex:?} {interp:?}: {got} vs {want}");
            }
        }
        assert_eq!(l_numeric(Example::TwoSlits, 1.0, 0.0, Interpolation::BLinear, &cfg).unwrap().value, 0.0);
    }
}
