//! The Böttcher coordinate when `gcd(d, p) = 1`, as a finite product.

use num_bigint::BigInt;

use super::{normalize_unit, verify_conjugacy, ConjugacyWitness, EntryKind, NormalizerError, RootSolve, TranscriptEntry};
use crate::invariants::profile;
use crate::series::{binomial_pow, Germ1D, Series};

/// `φ = Π_n (1 + ε^{(n)})^{d^{-n-1}}` with `T^m ε^{(0)} = ε` and
/// `T^m ε^{(n+1)} = ε^{(n)} ∘ g`, conjugating `f` to `x^{dp^m}`.
pub fn bottcher_product<S: RootSolve>(f: &Germ1D<S>, t: usize, seed: u64) -> Result<ConjugacyWitness<S>, NormalizerError> {
    let prof = profile(f)?;
    if prof.e != 0 {
        return Err(NormalizerError::NotCoprime(prof.d));
    }
    if prof.d == 1 {
        // the factors (1 + ε^{(n)})^{1} never approach 1
        return Err(NormalizerError::NotCoprime(1));
    }
    let q = prof.q() as usize;
    let d = prof.d as usize;
    if f.trunc() < t || t < q * (d + 1) {
        return Err(NormalizerError::InsufficientPrecision { have: f.trunc().min(t), need: q * (d + 1) });
    }
    let (fu, lambda, count) = normalize_unit(f, 0, true, seed)?;
    let fu = fu.series.truncate(t);
    let (g, m) = fu.split_frobenius()?;
    let n_max = t / q - d;
    let g = g.truncate(n_max + d);
    let one = Series::one(&lambda);
    // ε(y) = g(y)/y^d - 1
    let eps = Series::new(lambda.zero_like(), g.coeffs().iter().skip(d).cloned().collect(), n_max).sub(&one);

    let mut cur = eps.t_operator_inv(m)?;
    let mut phi = one.truncate(n_max);
    let mut db = BigInt::from(d as u64);
    while cur.ord_lower() <= n_max {
        let factor = binomial_pow(&one.add(&cur).truncate(n_max), &BigInt::from(1), &db)?;
        phi = phi.mul(&factor).truncate(n_max);
        cur = cur.compose(&g)?.truncate(n_max).t_operator_inv(m)?;
        db *= d as u64;
    }

    let phi = Series::exact(lambda.zero_like(), phi.coeffs().to_vec());
    let target = Series::monomial(lambda.one_like(), q * d);
    let report = verify_conjugacy(&fu, &target, &phi.shift(1), t)?;
    if let Some(n) = report.first_disagreement {
        return Err(NormalizerError::Internal(format!("Böttcher product fails at order {n}")));
    }
    let transcript = vec![TranscriptEntry {
        n: 0,
        kind: EntryKind::Linear,
        j: None,
        value: Some(lambda.clone()),
        roots_considered: count,
        ring: None,
    }];
    Ok(ConjugacyWitness { phi, linear: lambda, verified_order: report.verified_order, transcript })
}
