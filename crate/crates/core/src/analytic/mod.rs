//! Analytic side: germs over `F_q((t))`, the conjugacy to a truncation, and
//! the exponential growth bound on its coefficients.
//!
//! Norms are never evaluated. With `|t| = ρ < 1` and `γ = ρ^{-W}`, the bound
//! `|φ_n| <= γ^{c_n}` reads `-val(φ_n) <= W c_n`.

mod laurent;

pub use laurent::{LaurentScalar, DEFAULT_PREC};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use serde_json::{json, Value};
use thiserror::Error;

use crate::invariants::{profile, InvariantError, InvariantProfile};
use crate::normalizer::{
    solve_prescribed, verify_conjugacy, ConjugacyWitness, EntryKind, NRule, NormalizerError, RootSolve, TranscriptEntry,
};
use crate::scalar::Scalar;
use crate::series::{Germ1D, Series};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnalyticError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("precision exhausted at coefficient {0}")]
    PrecisionExhausted(usize),
    #[error(transparent)]
    Normalizer(#[from] NormalizerError),
    #[error(transparent)]
    Invariant(#[from] InvariantError),
}

/// Highest `x`-degree kept in the truncation `f̃` of `f`.
pub fn truncation_target(prof: &InvariantProfile) -> usize {
    (prof.q() * (prof.d + prof.floor_pr0() + 1)) as usize - 1
}

/// The truncation of `f` at [`truncation_target`].
pub fn truncation_of<S: Scalar>(f: &Germ1D<S>) -> Result<Germ1D<S>, AnalyticError> {
    let prof = profile(f)?;
    let s = f.series.truncate(truncation_target(&prof));
    Ok(Germ1D::new(Series::exact(s.zero_scalar().clone(), s.coeffs().to_vec())).expect("vanishes at 0"))
}

/// `Φ` with `Φ ∘ f = f̃ ∘ Φ` modulo `x^{t+1}`, `f̃` the truncation of `f`.
///
/// `f` must have `ν_p(d) >= 1` and leading coefficient 1. Fails with
/// `PrescribedMismatch` when `f` is not formally conjugate to its truncation.
pub fn conjugacy_to_truncation_in<S: RootSolve>(f: &Germ1D<S>, t: usize) -> Result<ConjugacyWitness<S>, AnalyticError> {
    let prof = profile(f)?;
    if prof.e == 0 {
        return Err(AnalyticError::Precondition("needs nu_p(d) >= 1".into()));
    }
    let ord = f.series.ord().map_err(NormalizerError::from)?;
    if !f.series.coeff(ord).is_one() {
        return Err(AnalyticError::Precondition("leading coefficient must be 1".into()));
    }
    let ft = truncation_of(f)?;
    let q = prof.q() as usize;
    let d = prof.d as usize;
    let eps: Vec<S> = (0..=prof.floor_pr0() as usize).map(|i| ft.series.get(q * (d + i)).cloned().unwrap_or_else(|| f.series.zero_scalar().clone())).collect();
    let (phi, transcript) = solve_prescribed(f, &eps, &NRule::NDoublePrime, t, false, 0)?;
    let one = f.series.coeff(ord).clone();
    let phi = Series::exact(one.zero_like(), phi);
    let fs = f.series.truncate(t);
    let report = verify_conjugacy(&fs, &ft.series, &phi.shift(1), t)?;
    if let Some(n) = report.first_disagreement {
        return Err(NormalizerError::Internal(format!("conjugacy to truncation fails at order {n}")).into());
    }
    let mut tr = vec![TranscriptEntry { n: 0, kind: EntryKind::Linear, j: None, value: Some(one.clone()), roots_considered: 1, ring: None }];
    tr.extend(transcript);
    Ok(ConjugacyWitness { phi, linear: one, verified_order: report.verified_order, transcript: tr })
}

/// [`conjugacy_to_truncation_in`] over `F_q((t))`, requiring `val(ε_n) >= 0`.
pub fn conjugacy_to_truncation(
    f: &Germ1D<LaurentScalar>,
    t: usize,
) -> Result<ConjugacyWitness<LaurentScalar>, AnalyticError> {
    if let Some(n) = f.series.coeffs().iter().position(|c| c.val().is_some_and(|v| v < 0)) {
        return Err(AnalyticError::Precondition(format!("coefficient of x^{n} has negative valuation")));
    }
    conjugacy_to_truncation_in(f, t)
}

/// `val(ε_{r_0})` for a germ with leading coefficient 1.
pub fn eps_r0_valuation(f: &Germ1D<LaurentScalar>) -> Result<i64, AnalyticError> {
    let prof = profile(f)?;
    let n = (prof.q() * (prof.d + prof.r0())) as usize;
    f.series.coeff(n).val().ok_or(AnalyticError::PrecisionExhausted(n))
}

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// The constants of the growth estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthCertificate {
    pub p: u64,
    pub m: u32,
    pub r0: u64,
    pub s0: u64,
    /// Valuation scale: `γ = ρ^{-W}`.
    pub w: u64,
    pub eta: BigRational,
    pub c: BigRational,
}

impl GrowthCertificate {
    fn kbase(&self) -> u64 {
        self.s0 * (self.p - 1) - self.r0
    }

    pub fn s(&self, h: u32) -> BigInt {
        let ph = BigInt::from(self.p).pow(h);
        &ph * self.s0 - (&ph - 1u32) * self.r0 / (self.p - 1)
    }

    pub fn k(&self, h: u32) -> BigInt {
        BigInt::from(self.p).pow(h) * self.kbase()
    }

    pub fn t(&self, h: u32) -> BigRational {
        let mut t = rat(self.s0 as i64);
        for _ in 0..h {
            t = t * rat(self.p as i64) + &self.eta;
        }
        t
    }

    pub fn delta(&self, h: u32) -> BigRational {
        (&self.c - BigRational::one() - &self.eta) / BigRational::from_integer(self.k(h))
    }

    /// `(h, k)` with `n = s_h + k`, `0 <= k < k_h`, for `n >= s_0`.
    pub fn locate(&self, n: u64) -> (u32, u64) {
        let n = BigInt::from(n);
        let mut h = 0;
        while self.s(h + 1) <= n {
            h += 1;
        }
        (h, (n - self.s(h)).to_u64().unwrap())
    }

    /// `c_n` from the `t_h`, `δ_h` recursion.
    pub fn c_n(&self, n: u64) -> BigRational {
        if n <= self.s0 {
            return rat(n as i64);
        }
        let (h, k) = self.locate(n);
        self.t(h) + rat(k as i64) * (&self.c - self.delta(h))
    }

    /// `c_n = s_0 + c (n - s_0) - k δ_h`.
    pub fn c_n_closed(&self, n: u64) -> BigRational {
        if n <= self.s0 {
            return rat(n as i64);
        }
        let (h, k) = self.locate(n);
        rat(self.s0 as i64) + &self.c * rat(n as i64 - self.s0 as i64) - rat(k as i64) * self.delta(h)
    }

    /// `(A, B)` with `-val(φ_n) <= A + B n`.
    pub fn linear_bound(&self) -> (BigRational, BigRational) {
        let w = rat(self.w as i64);
        (&w * rat(self.s0 as i64) * (BigRational::one() - &self.c), w * &self.c)
    }

    pub fn to_json(&self) -> Value {
        let (a, b) = self.linear_bound();
        json!({
            "p": self.p,
            "m": self.m,
            "r0": self.r0,
            "s0": self.s0,
            "W": self.w,
            "eta": self.eta.to_string(),
            "c": self.c.to_string(),
            "linear_bound": {"A": a.to_string(), "B": b.to_string()},
        })
    }
}

/// Certificate from the valuations of `φ_0 ..= φ_{s_0}` (`None` for zero)
/// and `v = val(ε_{r_0})`.
pub fn certificate(prof: &InvariantProfile, phi_vals: &[Option<i64>], v: i64) -> Result<GrowthCertificate, AnalyticError> {
    if prof.e == 0 {
        return Err(AnalyticError::Precondition("needs nu_p(d) >= 1".into()));
    }
    if v < 0 {
        return Err(AnalyticError::Precondition("val(eps_r0) must be >= 0".into()));
    }
    let p = prof.p;
    let r0 = prof.r0();
    let s0 = prof.floor_pr0() + 1 - r0;
    let mut w: u64 = 1;
    for n in 1..=s0 {
        if let Some(Some(val)) = phi_vals.get(n as usize) {
            w = w.max(((-val).max(0) as u64).div_ceil(n));
        }
    }
    let base = rat((s0 * (p - 1)) as i64);
    let kb = rat((s0 * (p - 1) - r0) as i64);
    loop {
        let eta = BigRational::new(BigInt::from(v), BigInt::from(w) * BigInt::from(prof.q()));
        let c = (&base + &eta) / &kb;
        // η < c - 1, and η <= 1 so that c_{n-1} <= c_n - η at n = s_0
        if eta < &c - BigRational::one() && eta <= BigRational::one() {
            return Ok(GrowthCertificate { p, m: prof.m, r0, s0, w, eta, c });
        }
        w += 1;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthReport {
    pub holds: bool,
    /// `n` with `-val(φ_n) > W c_n`.
    pub violations: Vec<usize>,
    /// `n` whose valuation is unknown for lack of precision.
    pub undetermined: Vec<usize>,
    /// Max of `-val(φ_n) / (W c_n)` over `n >= 1` with `φ_n != 0`.
    pub max_ratio: Option<BigRational>,
    pub checked: usize,
}

/// Check `-val(φ_n) <= W c_n` for the given valuations.
pub fn check_growth_vals(vals: &[Option<i64>], cert: &GrowthCertificate) -> GrowthReport {
    let w = rat(cert.w as i64);
    let mut violations = Vec::new();
    let mut max_ratio: Option<BigRational> = None;
    for (n, v) in vals.iter().enumerate().skip(1) {
        let Some(v) = v else { continue };
        let bound = &w * cert.c_n(n as u64);
        let lhs = rat(-v);
        if lhs > bound {
            violations.push(n);
        }
        let r = lhs / bound;
        if max_ratio.as_ref().is_none_or(|m| r > *m) {
            max_ratio = Some(r);
        }
    }
    GrowthReport { holds: violations.is_empty(), violations, undetermined: vec![], max_ratio, checked: vals.len() }
}

pub fn check_growth(witness: &ConjugacyWitness<LaurentScalar>, cert: &GrowthCertificate) -> GrowthReport {
    let coeffs = witness.phi.coeffs();
    let vals: Vec<Option<i64>> = coeffs.iter().map(|c| c.val()).collect();
    let mut report = check_growth_vals(&vals, cert);
    report.undetermined = coeffs.iter().enumerate().filter(|(_, c)| c.val().is_none() && !c.is_exact()).map(|(n, _)| n).collect();
    report.checked = coeffs.len();
    report
}

/// Witness, certificate and growth report for `f`.
pub fn growth_analysis(
    f: &Germ1D<LaurentScalar>,
    t: usize,
) -> Result<(ConjugacyWitness<LaurentScalar>, GrowthCertificate, GrowthReport), AnalyticError> {
    let prof = profile(f)?;
    let w = conjugacy_to_truncation(f, t)?;
    let vals: Vec<Option<i64>> = w.phi.coeffs().iter().map(|c| c.val()).collect();
    let cert = certificate(&prof, &vals, eps_r0_valuation(f)?)?;
    let report = check_growth(&w, &cert);
    Ok((w, cert, report))
}

/// Per-`n` table: `n`, `val(φ_n)`, `c_n`, `W c_n`, ok.
pub fn growth_table_tsv(witness: &ConjugacyWitness<LaurentScalar>, cert: &GrowthCertificate) -> String {
    let mut out = String::from("n\tval\tc_n\tbound\tok\n");
    let w = rat(cert.w as i64);
    for (n, c) in witness.phi.coeffs().iter().enumerate() {
        let cn = cert.c_n(n as u64);
        let bound = &w * &cn;
        let (val, ok) = match c.val() {
            Some(v) => (v.to_string(), n == 0 || rat(-v) <= bound),
            None => ("inf".to_string(), true),
        };
        out.push_str(&format!("{n}\t{val}\t{cn}\t{bound}\t{}\n", if ok { "yes" } else { "no" }));
    }
    out
}
