//! Point counts modulo `p^m` and the Poincaré series check.

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use serde_json::{json, Value};

use crate::algebra::{fmt_rat, pow_mod, residue, zr_series, Rat, ZetaRat};
use crate::error::{Error, Result};
use crate::poly::IntPoly2;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountTable {
    pub p: u64,
    /// `N_0 = 1`, then `N_1, ..., N_M`.
    pub counts: Vec<u64>,
}

impl CountTable {
    pub fn max_level(&self) -> usize {
        self.counts.len() - 1
    }

    pub fn to_json(&self) -> Value {
        json!({ "p": self.p, "counts": self.counts })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,count\n");
        for (m, n) in self.counts.iter().enumerate() {
            out.push_str(&format!("{m},{n}\n"));
        }
        out
    }
}

/// Coefficients reduced modulo `modulus`.
fn residues(f: &IntPoly2, modulus: u64) -> Result<Vec<(u64, u32, u32)>> {
    f.terms()
        .iter()
        .map(|(&(i, j), c)| {
            residue(c, modulus)
                .map(|r| (r, i, j))
                .ok_or_else(|| Error::NonUnitDenominator(format!("coefficient {} at x^{i} y^{j}", fmt_rat(c))))
        })
        .collect()
}

fn eval_mod(terms: &[(u64, u32, u32)], x: u64, y: u64, modulus: u64) -> u64 {
    let m = modulus as u128;
    terms.iter().fold(0u128, |acc, &(c, i, j)| {
        let v = c as u128 * pow_mod(x, i as u64, modulus) as u128 % m * pow_mod(y, j as u64, modulus) as u128;
        (acc + v) % m
    }) as u64
}

fn modulus(p: u64, m: u32) -> Result<u64> {
    p.checked_pow(m).ok_or_else(|| {
        let bound = (1..64).take_while(|&k| p.checked_pow(k).is_some()).count();
        Error::LevelTooLarge(m as usize, bound)
    })
}

/// Zeros of `f` modulo `p^m`, lifted branch by branch from the zeros modulo `p`.
pub fn count_solutions(f: &IntPoly2, p: u64, m: u32) -> Result<u64> {
    Ok(count_table(f, p, m)?.counts[m as usize])
}

/// `N_0, ..., N_max` from one pass of residue-tree lifting.
pub fn count_table(f: &IntPoly2, p: u64, max: u32) -> Result<CountTable> {
    if !crate::algebra::is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    let top = modulus(p, max)?;
    let terms = residues(f, top)?;
    let mut counts = vec![1u64];
    let mut layer: Vec<(u64, u64)> = vec![(0, 0)];
    let mut step = 1u64;
    for _ in 0..max {
        let next_mod = step * p;
        let reduced: Vec<(u64, u32, u32)> = terms.iter().map(|&(c, i, j)| (c % next_mod, i, j)).collect();
        let mut next = Vec::new();
        for &(x0, y0) in &layer {
            for a in 0..p {
                let x = x0 + a * step;
                for b in 0..p {
                    let y = y0 + b * step;
                    if eval_mod(&reduced, x, y, next_mod) == 0 {
                        next.push((x, y));
                    }
                }
            }
        }
        counts.push(next.len() as u64);
        layer = next;
        step = next_mod;
    }
    Ok(CountTable { p, counts })
}

/// Full enumeration over `(Z/p^m)^2`.
pub fn count_naive(f: &IntPoly2, p: u64, m: u32) -> Result<u64> {
    let md = modulus(p, m)?;
    let terms = residues(f, md)?;
    let mut n = 0;
    for x in 0..md {
        for y in 0..md {
            if eval_mod(&terms, x, y, md) == 0 {
                n += 1;
            }
        }
    }
    Ok(n)
}

/// `p^{2m}` times the `T^m` coefficient of `(1 - T z)/(1 - T)`.
fn predicted_values(z: &ZetaRat, p: u64, max: usize) -> Result<Vec<Rat>> {
    let coeffs = zr_series(z, p, max)?.coeffs;
    let mut out = vec![Rat::one()];
    let mut partial = Rat::zero();
    for m in 1..=max {
        partial += &coeffs[m - 1];
        let scale = Rat::from_integer(BigInt::from(p).pow(2 * m as u32));
        out.push((Rat::one() - &partial) * scale);
    }
    Ok(out)
}

pub fn predicted_counts(z: &ZetaRat, p: u64, max: usize) -> Result<CountTable> {
    let values = predicted_values(z, p, max)?;
    let mut counts = Vec::with_capacity(values.len());
    for (m, v) in values.iter().enumerate() {
        let n = v
            .is_integer()
            .then(|| v.to_integer().to_u64())
            .flatten()
            .ok_or_else(|| Error::NonIntegralPrediction {
                level: m,
                value: fmt_rat(v),
            })?;
        counts.push(n);
    }
    Ok(CountTable { p, counts })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerifyRow {
    pub m: usize,
    pub predicted: Rat,
    pub counted: u64,
}

impl VerifyRow {
    pub fn ok(&self) -> bool {
        self.predicted == Rat::from_integer(BigInt::from(self.counted))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerifyReport {
    pub p: u64,
    pub rows: Vec<VerifyRow>,
}

impl VerifyReport {
    pub fn first_mismatch(&self) -> Option<usize> {
        self.rows.iter().find(|r| !r.ok()).map(|r| r.m)
    }

    pub fn all_match(&self) -> bool {
        self.first_mismatch().is_none()
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| json!({ "m": r.m, "predicted": fmt_rat(&r.predicted), "counted": r.counted, "ok": r.ok() }))
            .collect();
        json!({
            "p": self.p,
            "rows": rows,
            "all_match": self.all_match(),
            "first_mismatch": self.first_mismatch(),
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,predicted,counted,ok\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{}\n", r.m, fmt_rat(&r.predicted), r.counted, r.ok()));
        }
        out
    }
}

/// Predicted against counted for `m = 1..=max`.
pub fn verify(f: &IntPoly2, p: u64, max: usize, z: &ZetaRat) -> Result<VerifyReport> {
    let predicted = predicted_values(z, p, max)?;
    let counted = count_table(f, p, max as u32)?;
    let rows = (1..=max)
        .map(|m| VerifyRow {
            m,
            predicted: predicted[m].clone(),
            counted: counted.counts[m],
        })
        .collect();
    Ok(VerifyReport { p, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{rint, PolyQT};
    use crate::engine::assemble_zeta;
    use crate::geom::Mode;
    use proptest::prelude::*;

    fn f31() -> IntPoly2 {
        IntPoly2::from_ints(&[(1, 0, 6), (-2, 2, 3), (1, 4, 0), (1, 4, 4)])
    }

    #[test]
    fn small_counts() {
        assert_eq!(count_solutions(&IntPoly2::from_ints(&[(1, 1, 0)]), 3, 2).unwrap(), 9);
        assert_eq!(count_solutions(&IntPoly2::from_ints(&[(1, 1, 1)]), 2, 1).unwrap(), 3);
        assert_eq!(count_solutions(&f31(), 3, 1).unwrap(), 1);
        assert_eq!(count_naive(&f31(), 3, 1).unwrap(), 1);
        assert!(matches!(count_solutions(&f31(), 4, 1), Err(Error::NotPrime(4))));
    }

    #[test]
    fn predictions_for_simple_series() {
        let x = ZetaRat::over(PolyQT::one_minus(crate::algebra::DenFactor::new(1, 0)), &[(1, 1)]);
        assert_eq!(predicted_counts(&x, 3, 4).unwrap().counts, vec![1, 3, 9, 27, 81]);
        assert_eq!(predicted_counts(&ZetaRat::one(), 3, 3).unwrap().counts, vec![1, 0, 0, 0]);
        let half = ZetaRat::constant(crate::algebra::rat(1, 2));
        assert!(matches!(
            predicted_counts(&half, 3, 2),
            Err(Error::NonIntegralPrediction { level: 1, .. })
        ));
    }

    #[test]
    fn assembled_f_matches_counts() {
        let z = assemble_zeta(&f31(), 3, Mode::Simple).unwrap().total;
        let report = verify(&f31(), 3, 5, &z).unwrap();
        assert!(report.all_match(), "{}", report.to_csv());

        let x = IntPoly2::from_ints(&[(1, 1, 0)]);
        let z = assemble_zeta(&x, 3, Mode::Simple).unwrap().total;
        assert!(verify(&x, 3, 4, &z).unwrap().all_match());
    }

    #[test]
    fn perturbation_is_caught() {
        let z = assemble_zeta(&f31(), 3, Mode::Simple).unwrap().total;
        let mut bumped = z.clone();
        let mut extra = PolyQT::zero();
        extra.add_term(0, 3, rint(1));
        bumped.num = &bumped.num + &(&extra * &z.den_product());
        assert_eq!(verify(&f31(), 3, 5, &bumped).unwrap().first_mismatch(), Some(4));
    }

    fn sparse_poly() -> impl Strategy<Value = IntPoly2> {
        prop::collection::vec((-3i64..=3, 0u32..4, 0u32..4), 1..5)
            .prop_map(|ts| IntPoly2::from_ints(&ts))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10))]

        #[test]
        fn lifting_matches_enumeration(f in sparse_poly(), pi in 0usize..3, m in 1u32..=3) {
            let p = [2u64, 3, 5][pi];
            let m = if p == 5 { m.min(2) } else { m };
            prop_assert_eq!(count_solutions(&f, p, m).unwrap(), count_naive(&f, p, m).unwrap());
        }

        #[test]
        fn counts_shrink_per_level(f in sparse_poly(), pi in 0usize..3) {
            let p = [2u64, 3, 5][pi];
            let t = count_table(&f, p, 3).unwrap();
            for m in 0..3 {
                prop_assert!(t.counts[m + 1] <= p * p * t.counts[m]);
            }
        }
    }
}
