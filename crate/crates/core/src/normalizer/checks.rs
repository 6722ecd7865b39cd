//! Brute-force verification and shape checks for normal forms.

use num_traits::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{NormalForm, NormalizerError};
use crate::fields::FieldElement;
use crate::scalar::int::nu_p;
use crate::scalar::Scalar;
use crate::series::{Germ1D, Series};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    /// `Φ ∘ f ≡ f̃ ∘ Φ` holds modulo `x^{verified_order + 1}`.
    pub verified_order: usize,
    pub first_disagreement: Option<usize>,
    /// Highest order that could be compared.
    pub checked_to: usize,
}

/// Compare `Φ ∘ f` and `f̃ ∘ Φ` by full truncated composition.
pub fn verify_conjugacy<S: Scalar>(
    f: &Series<S>,
    f_tilde: &Series<S>,
    big_phi: &Series<S>,
    t: usize,
) -> Result<VerifyReport, NormalizerError> {
    if !big_phi.coeff(0).is_zero() || big_phi.coeff(1).is_zero() {
        return Err(NormalizerError::Precondition("Φ must be x φ(x) with φ(0) != 0".into()));
    }
    let lhs = big_phi.compose(f)?;
    let rhs = f_tilde.compose(big_phi)?;
    let upto = t.min(lhs.trunc()).min(rhs.trunc());
    let first = lhs.first_difference(&rhs, upto);
    Ok(VerifyReport {
        verified_order: match first {
            None => upto,
            Some(n) => n.saturating_sub(1),
        },
        first_disagreement: first,
        checked_to: upto,
    })
}

/// Conditions (i)-(iv) on the coefficients of `a`, plus the degree bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NfConditions {
    pub leading_one: bool,
    pub gaps_below_r: bool,
    pub r_nonzero: bool,
    pub n_choices_vanish: bool,
    pub degree_bound: bool,
}

impl NfConditions {
    pub fn all(&self) -> bool {
        self.leading_one && self.gaps_below_r && self.r_nonzero && self.n_choices_vanish && self.degree_bound
    }
}

pub fn check_nf_conditions<S: Scalar>(nf: &NormalForm<S>) -> NfConditions {
    let prof = &nf.profile;
    let p = prof.p;
    let e = prof.e as usize;
    let support: Vec<usize> = (0..nf.a.len()).filter(|&n| !nf.a[n].is_zero()).collect();
    let leading_one = nf.coeff(0).is_one() && nf.coeff(prof.r[e] as usize).is_one();
    if e == 0 {
        return NfConditions {
            leading_one,
            gaps_below_r: true,
            r_nonzero: true,
            n_choices_vanish: true,
            degree_bound: support.iter().all(|&n| n == 0),
        };
    }
    let gaps_below_r = (0..e).all(|u| {
        (1..prof.r[u] as usize)
            .filter(|&n| nu_p(p, n as i128) == Some(u as u32))
            .all(|n| nf.coeff(n).is_zero())
    });
    let r_nonzero = (0..e).all(|u| !nf.coeff(prof.r[u] as usize).is_zero());
    let n_choices_vanish = nf.n_table.iter().all(|&(_, n)| nf.coeff(n as usize).is_zero());
    let degree_bound = support.iter().all(|&n| (n as u64) * (p - 1) < p * prof.r0());
    NfConditions { leading_one, gaps_below_r, r_nonzero, n_choices_vanish, degree_bound }
}

/// `x^{dp^m}(a(x^{p^{m+1}}) + b x^{r_0 p^m})`.
#[derive(Debug, Clone, PartialEq)]
pub struct BhardForm<S> {
    /// Coefficients of `a(z)`.
    pub a_poly: Vec<S>,
    pub b: S,
}

pub fn bhard_extract<S: Scalar>(nf: &NormalForm<S>) -> Result<BhardForm<S>, NormalizerError> {
    let prof = &nf.profile;
    if prof.e == 0 {
        return Err(NormalizerError::Precondition("needs nu_p(d) >= 1".into()));
    }
    if nf.choice != "ndoubleprime" {
        return Err(NormalizerError::Precondition("needs a normal form built with ndoubleprime".into()));
    }
    let p = prof.p as usize;
    let r0 = prof.r0() as usize;
    let mut a_poly = vec![nf.zero.clone()];
    for (n, c) in nf.a.iter().enumerate() {
        if c.is_zero() || n == r0 {
            continue;
        }
        if n % p != 0 {
            return Err(NormalizerError::ShapeViolation(format!("separable exponent {n} besides r_0")));
        }
        let s = n / p;
        if s * (p - 1) >= r0 && !s.is_zero() {
            return Err(NormalizerError::ShapeViolation(format!("a(z) has degree {s} >= r_0/(p-1)")));
        }
        if a_poly.len() <= s {
            a_poly.resize(s + 1, nf.zero.clone());
        }
        a_poly[s] = c.clone();
    }
    Ok(BhardForm { a_poly, b: nf.coeff(r0) })
}

/// `Φ ∘ f ∘ Φ^{-1}` for a seeded random `Φ = c_1 x + ...`, together with `Φ`.
pub fn random_conjugate(
    f: &Germ1D<FieldElement>,
    seed: u64,
    t: usize,
) -> Result<(Germ1D<FieldElement>, Series<FieldElement>), NormalizerError> {
    let field = f.series.zero_scalar().field();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = vec![field.zero(), field.random_nonzero(&mut rng)];
    for _ in 2..=t {
        v.push(field.random(&mut rng));
    }
    let phi = Series::new(field.zero(), v, t);
    Ok((conjugate_by(f, &phi)?, phi))
}

/// `Φ ∘ f ∘ Φ^{-1}`, truncated at the truncation of `Φ`.
pub fn conjugate_by<S: Scalar>(f: &Germ1D<S>, big_phi: &Series<S>) -> Result<Germ1D<S>, NormalizerError> {
    let t = big_phi.trunc();
    let inv = big_phi.truncate(t).compositional_inverse()?;
    let inner = f.series.compose(&inv)?;
    let out = big_phi.compose(&inner)?.truncate(t);
    Ok(Germ1D::new(out)?)
}
