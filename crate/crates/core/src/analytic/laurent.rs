//! Truncated Laurent series in `t` over a finite field, as a coefficient ring.

use std::cmp::Ordering;

use serde_json::{json, Value};

use crate::fields::{FieldElement, FieldRef};
use crate::normalizer::{NormalizerError, RootSolve, RootsFound};
use crate::scalar::Scalar;

/// Default number of trusted `t`-digits.
pub const DEFAULT_PREC: u32 = 32;

const EXACT_ABS: i64 = i64::MAX;

/// `t^lo (d_0 + d_1 t + ...)` known modulo `t^abs`.
///
/// Exact values (finite Laurent polynomials) have `abs = +inf`. A value with
/// no known digit is `O(t^abs)` and counts as zero.
#[derive(Clone, Debug)]
pub struct LaurentScalar {
    field: FieldRef,
    lo: i64,
    digits: Vec<FieldElement>,
    abs: i64,
    prec: u32,
}

fn add_abs(a: i64, b: i64) -> i64 {
    if a == EXACT_ABS || b == EXACT_ABS {
        EXACT_ABS
    } else {
        a + b
    }
}

impl LaurentScalar {
    fn build(field: FieldRef, mut lo: i64, mut digits: Vec<FieldElement>, mut abs: i64, prec: u32) -> Self {
        let lead = digits.iter().position(|c| !c.is_zero()).unwrap_or(digits.len());
        digits.drain(..lead);
        lo += lead as i64;
        if abs != EXACT_ABS {
            let keep = (abs - lo).max(0) as usize;
            digits.truncate(keep);
        }
        while digits.last().is_some_and(|c| c.is_zero()) {
            digits.pop();
        }
        if digits.len() > prec as usize {
            digits.truncate(prec as usize);
            abs = abs.min(lo + prec as i64);
            while digits.last().is_some_and(|c| c.is_zero()) {
                digits.pop();
            }
        }
        LaurentScalar { field, lo, digits, abs, prec }
    }

    /// `Σ digits[i] t^{lo+i}`, exact when `abs` is `None`.
    pub fn from_digits(field: FieldRef, lo: i64, digits: Vec<FieldElement>, abs: Option<i64>, prec: u32) -> Self {
        Self::build(field, lo, digits, abs.unwrap_or(EXACT_ABS), prec)
    }

    pub fn constant(c: FieldElement) -> Self {
        Self::monomial(c, 0)
    }

    /// `c t^e`.
    pub fn monomial(c: FieldElement, e: i64) -> Self {
        Self::build(c.field(), e, vec![c], EXACT_ABS, DEFAULT_PREC)
    }

    pub fn t(field: FieldRef) -> Self {
        Self::monomial(field.one(), 1)
    }

    pub fn with_prec(mut self, prec: u32) -> Self {
        self.prec = prec;
        Self::build(self.field, self.lo, self.digits, self.abs, prec)
    }

    pub fn field(&self) -> FieldRef {
        self.field
    }

    /// t-adic valuation; `None` for zero (exact, or with no trusted digit).
    pub fn val(&self) -> Option<i64> {
        (!self.digits.is_empty()).then_some(self.lo)
    }

    /// Digits of the unit part, constant term first.
    pub fn unit(&self) -> &[FieldElement] {
        &self.digits
    }

    /// Known modulo `t^abs`; `None` when exact.
    pub fn abs_prec(&self) -> Option<i64> {
        (self.abs != EXACT_ABS).then_some(self.abs)
    }

    pub fn is_exact(&self) -> bool {
        self.abs == EXACT_ABS
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    fn end(&self) -> i64 {
        self.lo + self.digits.len() as i64
    }

    fn coeff_at(&self, e: i64) -> FieldElement {
        if e < self.lo || e >= self.end() {
            self.field.zero()
        } else {
            self.digits[(e - self.lo) as usize].clone()
        }
    }

    fn zip(&self, rhs: &Self, f: impl Fn(&FieldElement, &FieldElement) -> FieldElement) -> Self {
        assert!(self.field == rhs.field, "Laurent series over different fields");
        let prec = self.prec.min(rhs.prec);
        let abs = self.abs.min(rhs.abs);
        let (lo, hi) = match (self.digits.is_empty(), rhs.digits.is_empty()) {
            (true, true) => return Self::build(self.field, 0, vec![], abs, prec),
            (true, false) => (rhs.lo, rhs.end()),
            (false, true) => (self.lo, self.end()),
            (false, false) => (self.lo.min(rhs.lo), self.end().max(rhs.end())),
        };
        let hi = if abs == EXACT_ABS { hi } else { hi.min(abs) };
        let digits = (lo..hi).map(|e| f(&self.coeff_at(e), &rhs.coeff_at(e))).collect();
        Self::build(self.field, lo, digits, abs, prec)
    }

    /// Inverse of the unit part to `r` digits.
    fn unit_inverse(&self, r: usize) -> Vec<FieldElement> {
        let c0inv = self.digits[0].inv().expect("leading digit is nonzero");
        let mut out: Vec<FieldElement> = Vec::with_capacity(r);
        for n in 0..r {
            let mut s = if n == 0 { self.field.one() } else { self.field.zero() };
            for i in 1..=n.min(self.digits.len() - 1) {
                s = s.sub(&self.digits[i].mul(&out[n - i]));
            }
            out.push(s.mul(&c0inv));
        }
        out
    }

    pub fn to_json_value(&self) -> Value {
        json!({
            "val": self.val(),
            "unit": self.digits.iter().map(|c| c.coeffs().to_vec()).collect::<Vec<_>>(),
            "prec": self.abs_prec().map(|a| a - self.lo).unwrap_or(self.digits.len() as i64),
        })
    }
}

impl PartialEq for LaurentScalar {
    /// Equality to the common known precision.
    fn eq(&self, other: &Self) -> bool {
        self.field == other.field && self.sub(other).is_zero()
    }
}

impl Scalar for LaurentScalar {
    fn zero_like(&self) -> Self {
        Self::build(self.field, 0, vec![], EXACT_ABS, self.prec)
    }
    fn one_like(&self) -> Self {
        Self::build(self.field, 0, vec![self.field.one()], EXACT_ABS, self.prec)
    }
    fn from_u64_like(&self, n: u64) -> Self {
        Self::build(self.field, 0, vec![self.field.from_u64(n)], EXACT_ABS, self.prec)
    }
    fn is_zero(&self) -> bool {
        self.digits.is_empty()
    }
    fn is_exact_zero(&self) -> bool {
        self.digits.is_empty() && self.abs == EXACT_ABS
    }

    fn add(&self, rhs: &Self) -> Self {
        self.zip(rhs, |a, b| a.add(b))
    }
    fn sub(&self, rhs: &Self) -> Self {
        self.zip(rhs, |a, b| a.sub(b))
    }
    fn neg(&self) -> Self {
        let digits = self.digits.iter().map(|c| c.neg()).collect();
        Self::build(self.field, self.lo, digits, self.abs, self.prec)
    }

    fn mul(&self, rhs: &Self) -> Self {
        assert!(self.field == rhs.field, "Laurent series over different fields");
        let prec = self.prec.min(rhs.prec);
        let exact_zero = |x: &Self| x.digits.is_empty() && x.abs == EXACT_ABS;
        if exact_zero(self) || exact_zero(rhs) {
            return self.zero_like();
        }
        match (self.digits.is_empty(), rhs.digits.is_empty()) {
            (true, true) => return Self::build(self.field, 0, vec![], self.abs + rhs.abs, prec),
            (true, false) => return Self::build(self.field, 0, vec![], self.abs + rhs.lo, prec),
            (false, true) => return Self::build(self.field, 0, vec![], rhs.abs + self.lo, prec),
            _ => {}
        }
        let abs = add_abs(self.abs, rhs.lo).min(add_abs(rhs.abs, self.lo));
        let lo = self.lo + rhs.lo;
        // digits past `prec` or past `abs` would be dropped by `build`
        let mut len = (self.digits.len() + rhs.digits.len() - 1).min(prec as usize);
        if abs != EXACT_ABS {
            len = len.min((abs - lo).max(0) as usize);
        }
        let digits = if self.field.k() == 1 {
            let p = self.field.p();
            let a: Vec<u64> = self.digits.iter().map(|c| c.coeffs()[0]).collect();
            let b: Vec<u64> = rhs.digits.iter().map(|c| c.coeffs()[0]).collect();
            let mut acc = vec![0u128; len];
            for (i, &x) in a.iter().enumerate().take(len) {
                for (j, &y) in b.iter().enumerate().take(len - i) {
                    acc[i + j] = (acc[i + j] + x as u128 * y as u128) % p as u128;
                }
            }
            acc.into_iter().map(|c| self.field.from_u64(c as u64)).collect()
        } else {
            let mut digits = vec![self.field.zero(); len];
            for (i, a) in self.digits.iter().enumerate().take(len) {
                for (j, b) in rhs.digits.iter().enumerate().take(len - i) {
                    digits[i + j] = digits[i + j].add(&a.mul(b));
                }
            }
            digits
        };
        let abs = if len < self.digits.len() + rhs.digits.len() - 1 { abs.min(lo + len as i64) } else { abs };
        Self::build(self.field, lo, digits, abs, prec)
    }

    fn inv(&self) -> Option<Self> {
        if self.digits.is_empty() {
            return None;
        }
        if self.is_exact() && self.digits.len() == 1 {
            let c = self.digits[0].inv()?;
            return Some(Self::build(self.field, -self.lo, vec![c], EXACT_ABS, self.prec));
        }
        let rel = if self.is_exact() { self.prec as i64 } else { (self.abs - self.lo).min(self.prec as i64) };
        let digits = self.unit_inverse(rel as usize);
        Some(Self::build(self.field, -self.lo, digits, -self.lo + rel, self.prec))
    }

    fn characteristic(&self) -> u64 {
        self.field.p()
    }

    fn frobenius(&self) -> Self {
        let p = self.field.p() as i64;
        let mut digits = Vec::new();
        for (i, c) in self.digits.iter().enumerate() {
            if i > 0 {
                digits.extend(std::iter::repeat_n(self.field.zero(), p as usize - 1));
            }
            digits.push(c.frobenius());
        }
        let abs = if self.is_exact() { EXACT_ABS } else { self.abs * p };
        Self::build(self.field, self.lo * p, digits, abs, self.prec)
    }

    fn frobenius_root(&self, m: u32) -> Option<Self> {
        let q = (self.field.p() as i64).pow(m);
        let abs = if self.is_exact() { EXACT_ABS } else { self.abs.div_euclid(q) + (self.abs.rem_euclid(q) != 0) as i64 };
        if self.digits.is_empty() {
            return Some(Self::build(self.field, 0, vec![], abs, self.prec));
        }
        if self.lo.rem_euclid(q) != 0 {
            return None;
        }
        let mut digits = Vec::new();
        for (i, c) in self.digits.iter().enumerate() {
            if i as i64 % q == 0 {
                digits.push(c.frobenius_root(m)?);
            } else if !c.is_zero() {
                return None;
            }
        }
        Some(Self::build(self.field, self.lo / q, digits, abs, self.prec))
    }

    fn lift_to(&self, like: &Self) -> Self {
        assert!(self.field == like.field, "Laurent series over different fields");
        self.clone()
    }

    fn canonical_cmp(&self, other: &Self) -> Ordering {
        match (self.digits.is_empty(), other.digits.is_empty()) {
            (true, true) => return Ordering::Equal,
            (true, false) => return Ordering::Less,
            (false, true) => return Ordering::Greater,
            _ => {}
        }
        self.lo
            .cmp(&other.lo)
            .then_with(|| {
                let a = self.digits.iter().map(|c| c.coeffs());
                let b = other.digits.iter().map(|c| c.coeffs());
                a.cmp(b)
            })
    }
}

fn prime_power_exponent(p: u64, mut k: usize) -> Option<u32> {
    let mut s = 0;
    while k > 1 {
        if k as u64 % p != 0 {
            return None;
        }
        k /= p as usize;
        s += 1;
    }
    Some(s)
}

impl RootSolve for LaurentScalar {
    /// Handles the shapes that occur for well-chosen `N(j)`: a vanishing
    /// constant term (root 0 is returned) and `a z^{p^s} + b`.
    fn solve_roots(coeffs: &[Self], _allow_extension: bool, _seed: u64) -> Result<RootsFound<Self>, NormalizerError> {
        let like = coeffs.iter().find(|c| !c.is_zero()).ok_or(NormalizerError::UnsolvableRoot("zero polynomial".into()))?;
        if coeffs[0].is_zero() {
            return Ok(RootsFound { roots: vec![like.zero_like()], extended: false });
        }
        let support: Vec<usize> = (1..coeffs.len()).filter(|&i| !coeffs[i].is_zero()).collect();
        let [k] = support[..] else {
            return Err(NormalizerError::UnsolvableRoot(format!("polynomial with support {:?} over F_q((t))", support)));
        };
        let w = coeffs[0].neg().mul(&coeffs[k].inv().ok_or(NormalizerError::UnsolvableRoot("untrusted leading coefficient".into()))?);
        let s = prime_power_exponent(like.characteristic(), k)
            .ok_or_else(|| NormalizerError::UnsolvableRoot(format!("z^{k} = {:?}", w.to_json_value())))?;
        let z = w
            .frobenius_root(s)
            .ok_or_else(|| NormalizerError::UnsolvableRoot(format!("z^{k} = {} has no root in F_q((t))", w.to_json_value())))?;
        Ok(RootsFound { roots: vec![z], extended: false })
    }

    fn to_json(&self) -> Value {
        self.to_json_value()
    }

    fn ring_json(&self) -> Value {
        json!({ "laurent": self.field.to_json() })
    }
}
