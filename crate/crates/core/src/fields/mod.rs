//! Finite fields `F_{p^k}` in a polynomial basis, with on-demand extensions.
//!
//! Field descriptors are interned: there is exactly one descriptor per
//! `(p, k, modulus)`, and it lives for the whole process. That makes
//! [`FieldRef`] a plain `Copy` handle compared by address.
//!
//! Extensions are always built over the prime field with the default
//! (lowest) irreducible modulus of the target degree; embeddings between
//! descriptors are computed on first use and cached.

mod poly;
mod roots;

pub use poly::{poly_eval, Poly};
pub use roots::{poly_roots, RootSet};

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicU32, Ordering as AtomicOrdering};
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

use crate::scalar::int::{is_prime, mod_inverse, mul_mod};
use crate::scalar::Scalar;

/// Default cap on field sizes: `p^k <= 2^64`.
pub const MAX_FIELD_BITS: u32 = 64;
/// Hard limit for the configurable cap; sizes must fit in a `u128`.
pub const FIELD_BITS_LIMIT: u32 = 127;

static FIELD_BITS: AtomicU32 = AtomicU32::new(MAX_FIELD_BITS);

/// Current cap on `log2(p^k)`.
pub fn max_field_bits() -> u32 {
    FIELD_BITS.load(AtomicOrdering::Relaxed)
}

/// Change the cap on field sizes (process-wide); returns the previous value.
pub fn set_max_field_bits(bits: u32) -> u32 {
    assert!((1..=FIELD_BITS_LIMIT).contains(&bits), "field size cap must be in 1..={FIELD_BITS_LIMIT} bits");
    FIELD_BITS.swap(bits, AtomicOrdering::Relaxed)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("{0} is not prime")]
    CompositeP(u64),
    #[error("modulus {0:?} is not irreducible of the requested degree")]
    ReducibleModulus(Vec<u64>),
    #[error("modulus must be monic of degree {expected}, got {got:?}")]
    BadModulus { expected: u32, got: Vec<u64> },
    #[error("field of size {p}^{k} exceeds the configured size cap")]
    FieldTooLarge { p: u64, k: u32 },
    #[error("division by zero")]
    DivisionByZero,
    #[error("elements live in incompatible fields {0} and {1}")]
    IncompatibleFields(String, String),
    #[error("polynomial has no root in {0}")]
    NoRootInField(String),
    #[error("the zero polynomial has no well-defined root set")]
    ZeroPolynomial,
}

/// Description of `F_p[x]/(modulus)`.
#[derive(Debug)]
pub struct FieldDescriptor {
    pub p: u64,
    pub k: u32,
    /// Monic, low degree first, length `k + 1`.
    pub modulus: Vec<u64>,
}

impl FieldDescriptor {
    pub fn size(&self) -> u128 {
        (self.p as u128).pow(self.k)
    }
}

/// Handle to an interned descriptor.
#[derive(Clone, Copy)]
pub struct FieldRef(&'static FieldDescriptor);

impl FieldRef {
    pub fn p(self) -> u64 {
        self.0.p
    }
    pub fn k(self) -> u32 {
        self.0.k
    }
    pub fn modulus(self) -> &'static [u64] {
        &self.0.modulus
    }
    pub fn descriptor(self) -> &'static FieldDescriptor {
        self.0
    }
    pub fn size(self) -> u128 {
        self.0.size()
    }
    pub fn is_prime_field(self) -> bool {
        self.0.k == 1
    }

    pub fn zero(self) -> FieldElement {
        FieldElement { field: self, coeffs: SmallVec::from_elem(0, self.k() as usize) }
    }
    pub fn one(self) -> FieldElement {
        self.from_u64(1)
    }
    pub fn from_u64(self, n: u64) -> FieldElement {
        let mut e = self.zero();
        e.coeffs[0] = n % self.p();
        e
    }
    pub fn from_i64(self, n: i64) -> FieldElement {
        self.from_u64((n as i128).rem_euclid(self.p() as i128) as u64)
    }
    /// Element with the given coordinates in the polynomial basis (reduced mod p).
    pub fn element(self, coeffs: &[u64]) -> FieldElement {
        assert!(coeffs.len() <= self.k() as usize, "too many coordinates for {self}");
        let mut e = self.zero();
        for (slot, &c) in e.coeffs.iter_mut().zip(coeffs) {
            *slot = c % self.p();
        }
        e
    }
    /// The class of `x` in `F_p[x]/(modulus)`.
    pub fn generator(self) -> FieldElement {
        if self.k() == 1 {
            // x = -modulus[0] in a degree-one quotient
            return self.from_u64((self.p() - self.modulus()[0] % self.p()) % self.p());
        }
        self.element(&[0, 1])
    }
    pub fn random<R: Rng + ?Sized>(self, rng: &mut R) -> FieldElement {
        let mut e = self.zero();
        for c in e.coeffs.iter_mut() {
            *c = rng.gen_range(0..self.p());
        }
        e
    }
    pub fn random_nonzero<R: Rng + ?Sized>(self, rng: &mut R) -> FieldElement {
        loop {
            let e = self.random(rng);
            if !e.is_zero() {
                return e;
            }
        }
    }
    /// All elements, only sensible for small fields.
    pub fn elements(self) -> Vec<FieldElement> {
        let q = self.size();
        assert!(q <= 1 << 20, "refusing to enumerate a field of size {q}");
        (0..q as u64)
            .map(|mut n| {
                let mut e = self.zero();
                for c in e.coeffs.iter_mut() {
                    *c = n % self.p();
                    n /= self.p();
                }
                e
            })
            .collect()
    }
    pub fn prime_field(self) -> FieldRef {
        prime_field(self.p()).expect("p was validated at creation")
    }

    pub fn to_json(self) -> FieldJson {
        FieldJson { p: self.p(), k: self.k(), modulus: self.modulus().to_vec() }
    }
}

impl PartialEq for FieldRef {
    fn eq(&self, other: &Self) -> bool {
        std::ptr::eq(self.0, other.0)
    }
}
impl Eq for FieldRef {}
impl Hash for FieldRef {
    fn hash<H: Hasher>(&self, state: &mut H) {
        (self.0 as *const FieldDescriptor as usize).hash(state)
    }
}
impl fmt::Debug for FieldRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}
impl fmt::Display for FieldRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.k() == 1 {
            write!(f, "F_{}", self.p())
        } else {
            write!(f, "F_{}^{}[mod {:?}]", self.p(), self.k(), self.modulus())
        }
    }
}

/// Serialized field descriptor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldJson {
    pub p: u64,
    pub k: u32,
    pub modulus: Vec<u64>,
}

impl FieldJson {
    pub fn create(&self) -> Result<FieldRef, FieldError> {
        field_create(self.p, self.k, Some(&self.modulus))
    }
}

struct Registry {
    by_modulus: HashMap<(u64, Vec<u64>), FieldRef>,
    defaults: HashMap<(u64, u32), FieldRef>,
    embeddings: HashMap<(FieldRef, FieldRef), Arc<Vec<FieldElement>>>,
}

fn registry() -> &'static Mutex<Registry> {
    static REG: OnceLock<Mutex<Registry>> = OnceLock::new();
    REG.get_or_init(|| {
        Mutex::new(Registry {
            by_modulus: HashMap::new(),
            defaults: HashMap::new(),
            embeddings: HashMap::new(),
        })
    })
}

fn intern(p: u64, k: u32, modulus: Vec<u64>) -> FieldRef {
    let mut reg = registry().lock().unwrap();
    if let Some(&f) = reg.by_modulus.get(&(p, modulus.clone())) {
        return f;
    }
    let leaked: &'static FieldDescriptor =
        Box::leak(Box::new(FieldDescriptor { p, k, modulus: modulus.clone() }));
    let f = FieldRef(leaked);
    reg.by_modulus.insert((p, modulus), f);
    f
}

fn check_size(p: u64, k: u32) -> Result<(), FieldError> {
    let mut q: u128 = 1;
    for _ in 0..k {
        q = q.checked_mul(p as u128).ok_or(FieldError::FieldTooLarge { p, k })?;
    }
    if q > 1u128 << max_field_bits() {
        return Err(FieldError::FieldTooLarge { p, k });
    }
    Ok(())
}

/// The prime field `F_p`, carried with the degenerate modulus `x`.
pub fn prime_field(p: u64) -> Result<FieldRef, FieldError> {
    if !is_prime(p) {
        return Err(FieldError::CompositeP(p));
    }
    Ok(intern(p, 1, vec![0, 1]))
}

/// Create (or look up) `F_{p^k}`. Without a modulus the default one is used:
/// the monic irreducible whose coefficient vector, read as base-p digits
/// with the constant term least significant, is smallest.
pub fn field_create(p: u64, k: u32, modulus: Option<&[u64]>) -> Result<FieldRef, FieldError> {
    if !is_prime(p) {
        return Err(FieldError::CompositeP(p));
    }
    if k == 0 {
        return Err(FieldError::BadModulus { expected: 0, got: modulus.map(|m| m.to_vec()).unwrap_or_default() });
    }
    check_size(p, k)?;
    match modulus {
        None => Ok(default_field(p, k)),
        Some(m) => {
            if m.len() != k as usize + 1 || m[k as usize] % p != 1 {
                return Err(FieldError::BadModulus { expected: k, got: m.to_vec() });
            }
            let m: Vec<u64> = m.iter().map(|c| c % p).collect();
            if k == 1 {
                return Ok(intern(p, 1, m));
            }
            if !poly::is_irreducible_over_prime(p, &m) {
                return Err(FieldError::ReducibleModulus(m));
            }
            Ok(intern(p, k, m))
        }
    }
}

/// Default field of size `p^k`; `p` must be prime and the size within the cap.
pub(crate) fn default_field(p: u64, k: u32) -> FieldRef {
    if let Some(&f) = registry().lock().unwrap().defaults.get(&(p, k)) {
        return f;
    }
    let f = if k == 1 {
        intern(p, 1, vec![0, 1])
    } else {
        let m = search_default_modulus(p, k);
        intern(p, k, m)
    };
    registry().lock().unwrap().defaults.insert((p, k), f);
    f
}

fn search_default_modulus(p: u64, k: u32) -> Vec<u64> {
    let mut digits = vec![0u64; k as usize];
    loop {
        // increment the base-p counter (constant term least significant)
        let mut i = 0;
        loop {
            digits[i] += 1;
            if digits[i] < p {
                break;
            }
            digits[i] = 0;
            i += 1;
            assert!(i < k as usize, "no irreducible polynomial of degree {k} over F_{p}?");
        }
        if digits[0] == 0 {
            continue;
        }
        let mut m = digits.clone();
        m.push(1);
        if poly::is_irreducible_over_prime(p, &m) {
            return m;
        }
    }
}

/// Element of a finite field, coordinates in the polynomial basis.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FieldElement {
    field: FieldRef,
    coeffs: SmallVec<[u64; 2]>,
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.field.k() == 1 {
            return write!(f, "{}", self.coeffs[0]);
        }
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(|(i, &c)| match (i, c) {
                (0, c) => format!("{c}"),
                (1, 1) => "a".to_string(),
                (1, c) => format!("{c}a"),
                (i, 1) => format!("a^{i}"),
                (i, c) => format!("{c}a^{i}"),
            })
            .collect();
        if terms.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", terms.join("+"))
        }
    }
}

/// Binary field operations exposed with explicit error reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldOp {
    Add,
    Mul,
    Inv,
    Pow(u128),
}

impl FieldElement {
    pub fn field(&self) -> FieldRef {
        self.field
    }
    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    /// Checked arithmetic; elements of different fields are first lifted into
    /// the larger one when its degree is a multiple of the smaller's.
    pub fn arith(&self, other: Option<&FieldElement>, op: FieldOp) -> Result<FieldElement, FieldError> {
        match op {
            FieldOp::Inv => self.try_inv(),
            FieldOp::Pow(n) => Ok(self.pow(n)),
            FieldOp::Add | FieldOp::Mul => {
                let other = other.expect("binary operation needs two operands");
                let (a, b) = common_field(self, other)?;
                Ok(if op == FieldOp::Add { a.add(&b) } else { a.mul(&b) })
            }
        }
    }

    pub fn try_inv(&self) -> Result<FieldElement, FieldError> {
        self.inv_inner().ok_or(FieldError::DivisionByZero)
    }

    pub fn pow(&self, mut n: u128) -> FieldElement {
        let mut acc = self.field.one();
        let mut base = self.clone();
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(&base);
            }
            n >>= 1;
            if n > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// `true` iff `self^n = self`.
    pub fn unity_relation(&self, n: u128) -> bool {
        self.pow(n) == *self
    }

    /// The unique `y` with `y^(p^m) = self`.
    pub fn frobenius_root_of(&self, m: u32) -> FieldElement {
        let k = self.field.k();
        let s = (k - m % k) % k;
        self.frobenius_pow(s)
    }

    /// Embed into `target`, whose degree must be a multiple of ours.
    pub fn embed(&self, target: FieldRef) -> Result<FieldElement, FieldError> {
        if self.field == target {
            return Ok(self.clone());
        }
        if self.field.p() != target.p() || target.k() % self.field.k() != 0 {
            return Err(FieldError::IncompatibleFields(self.field.to_string(), target.to_string()));
        }
        if self.field.k() == 1 {
            return Ok(target.from_u64(self.coeffs[0]));
        }
        let images = embedding(self.field, target);
        let mut acc = target.zero();
        for (c, img) in self.coeffs.iter().zip(images.iter()) {
            if *c != 0 {
                acc = acc.add(&img.mul(&target.from_u64(*c)));
            }
        }
        Ok(acc)
    }

    fn inv_inner(&self) -> Option<FieldElement> {
        if self.is_zero() {
            return None;
        }
        let p = self.field.p();
        if self.field.k() == 1 {
            return Some(self.field.from_u64(mod_inverse(self.coeffs[0], p)));
        }
        Some(FieldElement { field: self.field, coeffs: poly_inverse(&self.coeffs, self.field.modulus(), p).into_iter().collect() })
    }

    fn assert_same(&self, other: &FieldElement) {
        assert!(
            self.field == other.field,
            "mixing elements of {} and {}",
            self.field,
            other.field
        );
    }
}

fn common_field(a: &FieldElement, b: &FieldElement) -> Result<(FieldElement, FieldElement), FieldError> {
    if a.field == b.field {
        return Ok((a.clone(), b.clone()));
    }
    if a.field.k() <= b.field.k() {
        Ok((a.embed(b.field)?, b.clone()))
    } else {
        Ok((a.clone(), b.embed(a.field)?))
    }
}

/// Images of the basis `1, a, a^2, ...` of `small` inside `large`.
fn embedding(small: FieldRef, large: FieldRef) -> Arc<Vec<FieldElement>> {
    if let Some(e) = registry().lock().unwrap().embeddings.get(&(small, large)) {
        return e.clone();
    }
    // one choice at a time, so that every choice sees all earlier ones
    static CHOOSING: Mutex<()> = Mutex::new(());
    let _guard = CHOOSING.lock().unwrap();
    if let Some(e) = registry().lock().unwrap().embeddings.get(&(small, large)) {
        return e.clone();
    }
    let known: Vec<((FieldRef, FieldRef), Arc<Vec<FieldElement>>)> =
        registry().lock().unwrap().embeddings.iter().map(|(k, v)| (*k, v.clone())).collect();
    let get = |a: FieldRef, b: FieldRef| known.iter().find(|(k, _)| *k == (a, b)).map(|(_, v)| v.clone());
    let apply = |images: &[FieldElement], x: &FieldElement, target: FieldRef| -> FieldElement {
        x.coeffs.iter().zip(images).fold(target.zero(), |acc, (&c, img)| acc.add(&img.mul(&target.from_u64(c))))
    };
    let powers = |beta: &FieldElement| -> Vec<FieldElement> {
        let mut out = Vec::with_capacity(small.k() as usize);
        let mut acc = large.one();
        for _ in 0..small.k() {
            out.push(acc.clone());
            acc = acc.mul(beta);
        }
        out
    };
    // The generator of `small` maps to a root of its modulus in `large`. Among
    // the roots, keep those that make every triangle with an existing
    // embedding commute, and take the smallest.
    let modulus: Vec<FieldElement> = small.modulus().iter().map(|&c| large.from_u64(c)).collect();
    let roots = poly_roots(&modulus, false, 0).expect("a subfield modulus always splits in the larger field");
    let gen = small.generator();
    let ok = |beta: &FieldElement| -> bool {
        let img = powers(beta);
        for ((a, b), e) in &known {
            // small -> b -> large
            if *a == small && *b != large {
                if let Some(e2) = get(*b, large) {
                    if apply(&e2, &apply(e, &gen, *b), large) != *beta {
                        return false;
                    }
                }
            }
            // a -> small -> large against a -> large
            if *b == small && *a != large {
                if let Some(direct) = get(*a, large) {
                    let x = a.generator();
                    if apply(&img, &apply(e, &x, small), large) != apply(&direct, &x, large) {
                        return false;
                    }
                }
            }
            // small -> large -> b against small -> b
            if *a == large && *b != small {
                if let Some(direct) = get(small, *b) {
                    if apply(e, beta, *b) != apply(&direct, &gen, *b) {
                        return false;
                    }
                }
            }
        }
        true
    };
    let beta = roots.roots.iter().find(|r| ok(r)).cloned().unwrap_or_else(|| {
        panic!("no embedding of {small} into {large} is compatible with the existing ones")
    });
    let images = Arc::new(powers(&beta));
    registry().lock().unwrap().embeddings.insert((small, large), images.clone());
    images
}

impl Scalar for FieldElement {
    fn zero_like(&self) -> Self {
        self.field.zero()
    }
    fn one_like(&self) -> Self {
        self.field.one()
    }
    fn from_u64_like(&self, n: u64) -> Self {
        self.field.from_u64(n)
    }
    fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0)
    }

    fn add(&self, rhs: &Self) -> Self {
        self.assert_same(rhs);
        let p = self.field.p();
        let mut out = self.clone();
        for (a, &b) in out.coeffs.iter_mut().zip(rhs.coeffs.iter()) {
            let s = *a as u128 + b as u128;
            *a = (s % p as u128) as u64;
        }
        out
    }

    fn sub(&self, rhs: &Self) -> Self {
        self.assert_same(rhs);
        let p = self.field.p();
        let mut out = self.clone();
        for (a, &b) in out.coeffs.iter_mut().zip(rhs.coeffs.iter()) {
            *a = if *a >= b { *a - b } else { p - (b - *a) };
        }
        out
    }

    fn mul(&self, rhs: &Self) -> Self {
        self.assert_same(rhs);
        let p = self.field.p();
        let k = self.field.k() as usize;
        if k == 1 {
            return FieldElement { field: self.field, coeffs: SmallVec::from_elem(mul_mod(self.coeffs[0], rhs.coeffs[0], p), 1) };
        }
        let pp = p as u128;
        let mut acc = vec![0u128; 2 * k - 1];
        // with p < 2^32 every product is below 2^64, so k of them cannot overflow
        let small = p < 1 << 32;
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                if small {
                    acc[i + j] += a as u128 * b as u128;
                } else {
                    acc[i + j] = (acc[i + j] + a as u128 * b as u128) % pp;
                }
            }
        }
        let mut red: Vec<u64> = acc.iter().map(|&c| (c % pp) as u64).collect();
        let m = self.field.modulus();
        for top in (k..2 * k - 1).rev() {
            let c = red[top];
            if c == 0 {
                continue;
            }
            red[top] = 0;
            for (j, &mj) in m.iter().take(k).enumerate() {
                if mj == 0 {
                    continue;
                }
                let idx = top - k + j;
                let sub = mul_mod(c, mj, p);
                red[idx] = (red[idx] + p - sub) % p;
            }
        }
        FieldElement { field: self.field, coeffs: red[..k].iter().copied().collect() }
    }

    fn neg(&self) -> Self {
        let p = self.field.p();
        let mut out = self.clone();
        for a in out.coeffs.iter_mut() {
            if *a != 0 {
                *a = p - *a;
            }
        }
        out
    }

    fn inv(&self) -> Option<Self> {
        self.inv_inner()
    }

    fn characteristic(&self) -> u64 {
        self.field.p()
    }

    fn frobenius(&self) -> Self {
        if self.field.k() == 1 {
            return self.clone();
        }
        self.pow(self.field.p() as u128)
    }

    fn frobenius_root(&self, m: u32) -> Option<Self> {
        Some(self.frobenius_root_of(m))
    }

    fn lift_to(&self, like: &Self) -> Self {
        self.embed(like.field).expect("lift between incompatible fields")
    }

    fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.coeffs.as_slice().cmp(other.coeffs.as_slice())
    }
}

fn trim_poly(a: &mut Vec<u64>) {
    while a.last() == Some(&0) {
        a.pop();
    }
}

/// `a - c x^s b` over `F_p`, in place.
fn sub_shifted(a: &mut Vec<u64>, b: &[u64], c: u64, s: usize, p: u64) {
    if a.len() < b.len() + s {
        a.resize(b.len() + s, 0);
    }
    for (i, &bi) in b.iter().enumerate() {
        let t = mul_mod(c, bi, p);
        a[i + s] = (a[i + s] + p - t) % p;
    }
    trim_poly(a);
}

/// Inverse of `a` modulo the monic irreducible `m` by the extended Euclidean algorithm.
fn poly_inverse(a: &[u64], m: &[u64], p: u64) -> Vec<u64> {
    let k = m.len() - 1;
    let (mut r0, mut r1) = (m.to_vec(), a.to_vec());
    trim_poly(&mut r1);
    let (mut s0, mut s1): (Vec<u64>, Vec<u64>) = (vec![], vec![1]);
    while r1.len() > 1 {
        // r0 = q r1 + r, s0 -= q s1
        let inv_lead = mod_inverse(*r1.last().unwrap(), p);
        while r0.len() >= r1.len() {
            let c = mul_mod(*r0.last().unwrap(), inv_lead, p);
            let sh = r0.len() - r1.len();
            sub_shifted(&mut r0, &r1, c, sh, p);
            sub_shifted(&mut s0, &s1, c, sh, p);
        }
        std::mem::swap(&mut r0, &mut r1);
        std::mem::swap(&mut s0, &mut s1);
    }
    let c = mod_inverse(r1[0], p);
    let mut out: Vec<u64> = s1.iter().map(|&x| mul_mod(x, c, p)).collect();
    out.resize(k, 0);
    out
}
