//! Discrete conjugacy invariants `(m, d, e, r)` and the combinatorics of the
//! map `J` that drives the normal-form recursion.

use std::cmp::Ordering;

use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::int::{nu_p, pow_u64};
use crate::scalar::Scalar;
use crate::series::{Germ1D, Series, SeriesError, EXACT};

pub type Rational = Ratio<i64>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InvariantError {
    #[error("germ is not superattracting (d p^m = {0})")]
    NotSuperattracting(u64),
    #[error("truncation {have} does not determine r_0; need at least {need}")]
    InsufficientPrecision { have: usize, need: usize },
    #[error("polynomial degree must be at least 2")]
    DegreeTooSmall,
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// The invariants `(m, d, e, r_0 >= ... >= r_e = 0)` of a superattracting germ.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvariantProfile {
    pub p: u64,
    pub m: u32,
    pub d: u64,
    pub e: u32,
    pub r: Vec<u64>,
}

impl InvariantProfile {
    /// Validates all structural constraints.
    pub fn new(p: u64, m: u32, d: u64, r: Vec<u64>) -> Result<Self, InvariantError> {
        let bad = |s: String| Err(InvariantError::InvalidProfile(s));
        if d == 0 {
            return bad("d must be positive".into());
        }
        let e = nu_p(p, d as i128).unwrap();
        let q = (p as u128).pow(m) * d as u128;
        if q < 2 {
            return Err(InvariantError::NotSuperattracting(q as u64));
        }
        if r.len() != e as usize + 1 {
            return bad(format!("expected {} entries of r, got {}", e + 1, r.len()));
        }
        if r[e as usize] != 0 {
            return bad("r_e must vanish".into());
        }
        for u in 0..e as usize {
            if r[u + 1] > r[u] {
                return bad(format!("r is not non-increasing at {u}"));
            }
            let strict = u == 0 || r[u] < r[u - 1];
            if strict && nu_p(p, r[u] as i128) != Some(u as u32) {
                return bad(format!("r_{u} = {} must have p-adic valuation {u}", r[u]));
            }
        }
        Ok(InvariantProfile { p, m, d, e, r })
    }

    pub fn r0(&self) -> u64 {
        self.r[0]
    }

    /// `p^m`.
    pub fn q(&self) -> u64 {
        pow_u64(self.p, self.m)
    }

    /// `floor(p r_0 / (p - 1))`.
    pub fn floor_pr0(&self) -> u64 {
        self.p * self.r0() / (self.p - 1)
    }

    /// `J_0(n), ..., J_e(n)` and `J(n)`.
    pub fn jays(&self, n: u64) -> (Vec<Rational>, u64) {
        let v = nu_p(self.p, n as i128);
        let mut out = Vec::with_capacity(self.r.len());
        let mut best = Rational::zero();
        for (k, &rk) in self.r.iter().enumerate() {
            let ok = v.map_or(true, |v| k as u32 <= v) && n > rk;
            let val = if ok {
                Rational::new((n - rk) as i64, pow_u64(self.p, k as u32) as i64)
            } else {
                Rational::zero()
            };
            if val > best {
                best = val;
            }
            out.push(val);
        }
        assert!(best.is_integer(), "J({n}) is not an integer for {self:?}");
        (out, best.to_integer() as u64)
    }

    pub fn j(&self, n: u64) -> u64 {
        self.jays(n).1
    }

    /// `min_k r_k + p^k j`.
    pub fn n_prime(&self, j: u64) -> u64 {
        self.r
            .iter()
            .enumerate()
            .map(|(k, &rk)| rk + pow_u64(self.p, k as u32) * j)
            .min()
            .unwrap()
    }

    /// All `n` with `J(n) = j`, in increasing order.
    pub fn fiber(&self, j: u64) -> Vec<u64> {
        // J(n) >= J_0(n) = n - r_0, so the fiber lies below j + r_0
        (0..=j + self.r0()).filter(|&n| self.j(n) == j).collect()
    }

    pub fn preceq_cmp(&self, a: u64, b: u64) -> Ordering {
        preceq_cmp(self.p, self.e, a, b)
    }

    /// The `⪯`-least element of the fiber over `j`.
    pub fn n_doubleprime(&self, j: u64) -> u64 {
        self.fiber(j).into_iter().min_by(|&a, &b| self.preceq_cmp(a, b)).unwrap()
    }

    /// `max_{k >= 1} (r_0 - r_k) / (p^k - 1)`; beyond it fibers are `{r_0 + j}`.
    pub fn stable_threshold(&self) -> Result<Rational, InvariantError> {
        if self.e == 0 {
            return Err(InvariantError::InvalidProfile("stable threshold needs e >= 1".into()));
        }
        Ok((1..=self.e as usize)
            .map(|k| Rational::new((self.r0() - self.r[k]) as i64, pow_u64(self.p, k as u32) as i64 - 1))
            .max()
            .unwrap())
    }

    /// `r_0 / (p - 1)`.
    pub fn r0_over_pm1(&self) -> Rational {
        Rational::new(self.r0() as i64, self.p as i64 - 1)
    }

    pub fn jtable(&self, n_max: u64) -> JTable {
        let rows = (0..n_max).map(|n| {
            let (jk, j) = self.jays(n);
            JRow { n, jk, j }
        });
        JTable { profile: self.clone(), rows: rows.collect() }
    }
}

/// Lexicographic order on `(min(nu_p(n), e), n)` with `nu_p(0) = infinity`.
pub fn preceq_cmp(p: u64, e: u32, a: u64, b: u64) -> Ordering {
    let key = |n: u64| (nu_p(p, n as i128).map_or(e, |v| v.min(e)), n);
    key(a).cmp(&key(b))
}

/// Invariants of a truncated germ. The scan for `r_0` must find its witness
/// inside the truncation, otherwise the answer is not determined.
pub fn profile<S: Scalar>(f: &Germ1D<S>) -> Result<InvariantProfile, InvariantError> {
    let p = f.characteristic();
    let (g, m) = f.series.split_frobenius()?;
    let d = g.ord()? as u64;
    let q = (p as u128).pow(m) * d as u128;
    if q < 2 {
        return Err(InvariantError::NotSuperattracting(q as u64));
    }
    let e = nu_p(p, d as i128).unwrap();
    let last_n = if g.trunc() == EXACT { g.degree_bound().unwrap() as u64 - d } else { g.trunc() as u64 - d };
    let witness = |u: u32, below: u64| -> Option<u64> {
        (0..below.min(last_n + 1)).find(|&n| {
            nu_p(p, (d + n) as i128) == Some(u) && !g.coeff((d + n) as usize).is_zero()
        })
    };
    let mut r = Vec::with_capacity(e as usize + 1);
    let r0 = match witness(0, u64::MAX) {
        Some(n) => n,
        None if g.trunc() == EXACT => {
            // g' vanishes identically only if m was misread, which split_frobenius rules out
            unreachable!("exact germ without a separable term")
        }
        None => {
            let need = (p as usize).pow(m) * (d as usize + last_n as usize + 2) - 1;
            return Err(InvariantError::InsufficientPrecision { have: f.trunc(), need });
        }
    };
    r.push(r0);
    for u in 1..=e {
        let prev = r[u as usize - 1];
        r.push(witness(u, prev).unwrap_or(prev));
    }
    Ok(InvariantProfile { p, m, d, e, r })
}

/// One row of the `J` table.
#[derive(Debug, Clone, PartialEq)]
pub struct JRow {
    pub n: u64,
    pub jk: Vec<Rational>,
    pub j: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JTable {
    pub profile: InvariantProfile,
    pub rows: Vec<JRow>,
}

impl JTable {
    /// One line per `J_k` and a final line for `J`, columns indexed by `n`.
    /// `x` marks `n = r_k` (for `J` any `r_u`); zero entries are blank.
    pub fn to_tsv(&self) -> String {
        let cell = |v: Rational| -> String {
            if v.is_zero() {
                String::new()
            } else if v.is_integer() {
                v.to_integer().to_string()
            } else {
                format!("{}/{}", v.numer(), v.denom())
            }
        };
        let mut lines = Vec::new();
        let mut head = vec!["n".to_string()];
        head.extend(self.rows.iter().map(|r| r.n.to_string()));
        lines.push(head.join("\t"));
        for (k, &rk) in self.profile.r.iter().enumerate() {
            let mut line = vec![format!("J_{k}")];
            for row in &self.rows {
                line.push(if row.n == rk { "x".into() } else { cell(row.jk[k]) });
            }
            lines.push(line.join("\t"));
        }
        let mut line = vec!["J".to_string()];
        for row in &self.rows {
            let marked = self.profile.r.contains(&row.n);
            line.push(if marked { "x".into() } else { cell(Rational::from_integer(row.j as i64)) });
        }
        lines.push(line.join("\t"));
        let mut s = lines.join("\n");
        s.push('\n');
        s
    }
}

/// Predicted invariants of `f'' ∘ f'`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComposeBound {
    pub m: u32,
    pub d: u64,
    pub e: u32,
    pub r_bound: Vec<u64>,
    /// `true` where the bound is known to be attained.
    pub certain: Vec<bool>,
}

/// `inner` is the profile of `f'`, `outer` that of `f''`.
pub fn compose_bound(inner: &InvariantProfile, outer: &InvariantProfile) -> ComposeBound {
    assert_eq!(inner.p, outer.p, "profiles over different characteristics");
    let p = inner.p;
    let e = inner.e + outer.e;
    let mut r_bound = Vec::new();
    let mut certain = Vec::new();
    for u in 0..=e {
        let mut vals = Vec::new();
        for h in 0..=inner.e {
            if h > u || u - h > outer.e {
                continue;
            }
            let k = u - h;
            vals.push(inner.d * outer.r[k as usize] + pow_u64(p, k) * inner.r[h as usize]);
        }
        let min = *vals.iter().min().unwrap();
        let unique = vals.iter().filter(|&&v| v == min).count() == 1;
        r_bound.push(min);
        certain.push(unique || u == 0 || u == e);
    }
    ComposeBound { m: inner.m + outer.m, d: inner.d * outer.d, e, r_bound, certain }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IterateProfile {
    pub m: u64,
    pub d: BigUint,
    pub e: u64,
    pub r0: BigUint,
}

/// Invariants of the `n`-th iterate.
pub fn iterate_profile(prof: &InvariantProfile, n: u32) -> IterateProfile {
    assert!(n >= 1, "iterate count must be positive");
    let d = BigUint::from(prof.d);
    let dn = d.pow(n);
    let r0 = if prof.e == 0 {
        BigUint::zero()
    } else {
        BigUint::from(prof.r0()) * (&dn - BigUint::one()) / (d - BigUint::one())
    };
    IterateProfile { m: prof.m as u64 * n as u64, d: dn, e: prof.e as u64 * n as u64, r0 }
}

/// The germ of `P` at infinity in the coordinate `x = 1/z`, known through `trunc`.
pub fn germ_at_infinity<S: Scalar>(poly: &[S], trunc: usize) -> Result<Germ1D<S>, InvariantError> {
    let deg = poly.iter().rposition(|c| !c.is_zero()).ok_or(InvariantError::DegreeTooSmall)?;
    if deg < 2 {
        return Err(InvariantError::DegreeTooSmall);
    }
    let zero = poly[0].zero_like();
    // 1/P(1/x) = x^D / (c_D + c_{D-1} x + ... + c_0 x^D)
    let rev: Vec<S> = (0..=deg).map(|i| poly[deg - i].clone()).collect();
    let inner_trunc = trunc.checked_sub(deg).ok_or(InvariantError::InsufficientPrecision { have: trunc, need: deg })?;
    let denom = Series::new(zero, rev, inner_trunc);
    let germ = Germ1D::new(denom.reciprocal()?.shift(deg))?;
    if let Ok(prof) = profile(&germ) {
        assert!(prof.r0() <= prof.d, "germ at infinity violates r_0 <= d: {prof:?}");
    }
    Ok(germ)
}
