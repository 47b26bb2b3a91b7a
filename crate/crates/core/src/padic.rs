//! Truncated p-adic integers.
//!
//! A [`PAdicCode`] is a little-endian digit string `d_0 d_1 … d_{L-1}` standing
//! for `Σ d_i p^i`, i.e. a representative of `Z_p / p^L Z_p`. The first `r`
//! digits address the ball of radius `p^{-r}` containing the code, so ball
//! containment is a prefix test.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut k = 2;
    while k * k <= p {
        if p % k == 0 {
            return false;
        }
        k += 1;
    }
    true
}

/// `p^k`, or `None` on overflow.
pub fn checked_pow(p: u64, k: u32) -> Option<u64> {
    p.checked_pow(k)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PAdicCode {
    p: u32,
    digits: Vec<u32>,
}

impl PAdicCode {
    pub fn new(p: u32, digits: Vec<u32>) -> Result<Self> {
        if !is_prime(p as u64) {
            return Err(Error::NotPrime(p as u64));
        }
        if digits.is_empty() {
            return Err(Error::Argument("a code needs at least one digit".into()));
        }
        if let Some(&d) = digits.iter().find(|&&d| d >= p) {
            return Err(Error::Argument(format!("digit {d} out of range for p = {p}")));
        }
        Ok(Self { p, digits })
    }

    /// Base-`p` expansion of `value` truncated to `precision` digits.
    pub fn from_value(p: u32, value: u64, precision: usize) -> Result<Self> {
        if !is_prime(p as u64) {
            return Err(Error::NotPrime(p as u64));
        }
        if precision == 0 {
            return Err(Error::Argument("a code needs at least one digit".into()));
        }
        let mut rest = value;
        let digits = (0..precision)
            .map(|_| {
                let d = (rest % p as u64) as u32;
                rest /= p as u64;
                d
            })
            .collect();
        Ok(Self { p, digits })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn precision(&self) -> usize {
        self.digits.len()
    }

    pub fn digits(&self) -> &[u32] {
        &self.digits
    }

    /// `Σ digits[i] p^i`.
    pub fn value(&self) -> u64 {
        self.value_mod(self.digits.len())
    }

    /// Value of the first `k` digits, i.e. the integer reduced mod `p^k`.
    pub fn value_mod(&self, k: usize) -> u64 {
        self.digits[..k.min(self.digits.len())]
            .iter()
            .rev()
            .fold(0u64, |acc, &d| acc * self.p as u64 + d as u64)
    }

    /// The first `r` digits, i.e. the address of the radius-`p^{-r}` ball.
    pub fn prefix(&self, r: usize) -> Result<PAdicCode> {
        if r > self.precision() {
            return Err(Error::Precision {
                have: self.precision(),
                need: r,
            });
        }
        if r == 0 {
            return Err(Error::Argument("empty prefix".into()));
        }
        Ok(Self {
            p: self.p,
            digits: self.digits[..r].to_vec(),
        })
    }

    /// The p-adic order of the code, `ord` with `|x|_p = p^{-ord}`.
    pub fn order(&self) -> Order {
        match self.digits.iter().position(|&d| d != 0) {
            Some(i) => Order::Finite(i),
            None => Order::Infinite,
        }
    }

    /// `|x|_p` as a float; zero at this precision gives `0.0`.
    pub fn norm(&self) -> f64 {
        match self.order() {
            Order::Finite(k) => (self.p as f64).powi(-(k as i32)),
            Order::Infinite => 0.0,
        }
    }
}

impl fmt::Display for PAdicCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.p < 10 {
            for d in &self.digits {
                write!(f, "{d}")?;
            }
            Ok(())
        } else {
            let parts: Vec<String> = self.digits.iter().map(|d| d.to_string()).collect();
            write!(f, "{}", parts.join("."))
        }
    }
}

/// p-adic order of a truncated code. `Infinite` means the code is zero at its
/// precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Order {
    Finite(usize),
    Infinite,
}

pub fn padic_order(x: &PAdicCode) -> Order {
    x.order()
}

/// Indicator of the ball `center + p^r Z_p` evaluated at `x`.
pub fn ball_contains(center: &PAdicCode, r: usize, x: &PAdicCode) -> Result<bool> {
    if center.p != x.p {
        return Err(Error::Argument(format!(
            "codes over different primes ({} and {})",
            center.p, x.p
        )));
    }
    for code in [center, x] {
        if code.precision() < r {
            return Err(Error::Precision {
                have: code.precision(),
                need: r,
            });
        }
    }
    Ok(center.digits[..r] == x.digits[..r])
}

/// Representatives `center + c p^N`, `c = 0 … p^{M-N}-1`, of the level-`M`
/// balls inside the level-`N` ball addressed by `center`, ordered by `c`.
///
/// `N` is the precision of `center`.
pub fn refine_ball(center: &PAdicCode, m: usize) -> Result<Vec<PAdicCode>> {
    let n = center.precision();
    if m < n {
        return Err(Error::Argument(format!(
            "refinement level {m} is below the ball level {n}"
        )));
    }
    let p = center.p as u64;
    let count = checked_pow(p, (m - n) as u32)
        .ok_or_else(|| Error::Argument("refinement too large".into()))?;
    let head = &center.digits;
    Ok((0..count)
        .map(|c| {
            let mut digits = head.clone();
            let mut rest = c;
            for _ in n..m {
                digits.push((rest % p) as u32);
                rest /= p;
            }
            PAdicCode {
                p: center.p,
                digits,
            }
        })
        .collect())
}

/// An exact fraction `numerator / p^exponent` in `[0, 1)`, kept reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PFraction {
    numerator: u64,
    p: u32,
    exponent: u32,
}

impl PFraction {
    /// Reduces `numerator / p^exponent` modulo 1.
    pub fn new(numerator: u64, p: u32, exponent: u32) -> Result<Self> {
        let denom = checked_pow(p as u64, exponent)
            .ok_or_else(|| Error::Argument("denominator overflows u64".into()))?;
        Ok(Self::reduce(numerator % denom, p, exponent))
    }

    pub fn zero(p: u32) -> Self {
        Self {
            numerator: 0,
            p,
            exponent: 0,
        }
    }

    fn reduce(mut numerator: u64, p: u32, mut exponent: u32) -> Self {
        if numerator == 0 {
            return Self::zero(p);
        }
        while exponent > 0 && numerator % p as u64 == 0 {
            numerator /= p as u64;
            exponent -= 1;
        }
        Self {
            numerator,
            p,
            exponent,
        }
    }

    pub fn numerator(&self) -> u64 {
        self.numerator
    }

    pub fn exponent(&self) -> u32 {
        self.exponent
    }

    pub fn denominator(&self) -> u64 {
        (self.p as u64).pow(self.exponent)
    }

    pub fn to_f64(&self) -> f64 {
        self.numerator as f64 / self.denominator() as f64
    }

    /// `{self + other}`, the fractional part of the sum.
    pub fn add_mod_one(&self, other: &PFraction) -> Result<PFraction> {
        if self.p != other.p {
            return Err(Error::Argument("fractions over different primes".into()));
        }
        let e = self.exponent.max(other.exponent);
        let a = self.numerator * (self.p as u64).pow(e - self.exponent);
        let b = other.numerator * (self.p as u64).pow(e - other.exponent);
        PFraction::new(a + b, self.p, e)
    }
}

/// `{p^{-N-1} j x}_p = (j·x mod p^{N+1}) / p^{N+1}`.
pub fn fractional_part_scaled(x: &PAdicCode, j: u32, level: usize) -> Result<PFraction> {
    if j == 0 || j >= x.p {
        return Err(Error::Argument(format!(
            "character index j = {j} must lie in 1..{}",
            x.p
        )));
    }
    let k = level + 1;
    if x.precision() < k {
        return Err(Error::Precision {
            have: x.precision(),
            need: k,
        });
    }
    let modulus = checked_pow(x.p as u64, k as u32)
        .ok_or_else(|| Error::Argument("level too large".into()))?;
    let num = (x.value_mod(k) as u128 * j as u128 % modulus as u128) as u64;
    PFraction::new(num, x.p, k as u32)
}

/// `χ_p(y) = exp(2πi{y}_p)` as `(re, im)`. Quarter turns are returned exactly.
pub fn character_eval(f: &PFraction) -> (f64, f64) {
    let denom = f.denominator() as u128;
    let quarter = f.numerator as u128 * 4;
    if quarter % denom == 0 {
        return match quarter / denom {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        };
    }
    let angle = 2.0 * std::f64::consts::PI * f.to_f64();
    (angle.cos(), angle.sin())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn code(p: u32, d: &[u32]) -> PAdicCode {
        PAdicCode::new(p, d.to_vec()).unwrap()
    }

    #[test]
    fn order_examples() {
        assert_eq!(padic_order(&code(2, &[0, 1, 1])), Order::Finite(1));
        assert_eq!(code(2, &[0, 1, 1]).norm(), 0.5);
        assert_eq!(code(2, &[0, 1, 1]).value(), 6);
        assert_eq!(padic_order(&code(3, &[2, 0])), Order::Finite(0));
        assert_eq!(code(3, &[2, 0]).norm(), 1.0);
        assert_eq!(padic_order(&code(2, &[0, 0])), Order::Infinite);
    }

    #[test]
    fn digits_are_validated() {
        assert!(PAdicCode::new(2, vec![0, 2]).is_err());
        assert!(PAdicCode::new(4, vec![0]).is_err());
        assert!(PAdicCode::new(3, vec![]).is_err());
    }

    #[test]
    fn ball_examples() {
        assert!(ball_contains(&code(2, &[1, 0]), 2, &code(2, &[1, 0, 1])).unwrap());
        assert!(!ball_contains(&code(2, &[1, 0]), 1, &code(2, &[0, 0])).unwrap());
        assert!(ball_contains(&code(5, &[3]), 0, &code(5, &[1, 4])).unwrap());
        assert!(matches!(
            ball_contains(&code(2, &[1]), 2, &code(2, &[1, 0])),
            Err(Error::Precision { have: 1, need: 2 })
        ));
    }

    #[test]
    fn refine_examples() {
        assert_eq!(
            refine_ball(&code(2, &[1]), 2).unwrap(),
            vec![code(2, &[1, 0]), code(2, &[1, 1])]
        );
        assert_eq!(refine_ball(&code(2, &[1, 1]), 2).unwrap(), vec![code(2, &[1, 1])]);
        assert_eq!(
            refine_ball(&code(3, &[2]), 2).unwrap(),
            vec![code(3, &[2, 0]), code(3, &[2, 1]), code(3, &[2, 2])]
        );
        assert!(refine_ball(&code(3, &[2, 1]), 1).is_err());
    }

    #[test]
    fn fractional_part_examples() {
        let f = fractional_part_scaled(&code(2, &[1]), 1, 0).unwrap();
        assert_eq!((f.numerator(), f.denominator()), (1, 2));
        let f = fractional_part_scaled(&code(2, &[1, 0]), 1, 1).unwrap();
        assert_eq!((f.numerator(), f.denominator()), (1, 4));
        // 2·2 = 4 = 1·3 + 1, so {4/3} = 1/3
        let f = fractional_part_scaled(&code(3, &[2]), 2, 0).unwrap();
        assert_eq!((f.numerator(), f.denominator()), (1, 3));
        assert!(fractional_part_scaled(&code(3, &[2]), 3, 0).is_err());
        assert!(fractional_part_scaled(&code(3, &[2]), 0, 0).is_err());
        assert!(matches!(
            fractional_part_scaled(&code(3, &[2]), 1, 1),
            Err(Error::Precision { .. })
        ));
    }

    #[test]
    fn character_quarter_turns_are_exact() {
        assert_eq!(character_eval(&PFraction::zero(2)), (1.0, 0.0));
        assert_eq!(character_eval(&PFraction::new(1, 2, 1).unwrap()), (-1.0, 0.0));
        assert_eq!(character_eval(&PFraction::new(1, 2, 2).unwrap()), (0.0, 1.0));
        assert_eq!(character_eval(&PFraction::new(3, 2, 2).unwrap()), (0.0, -1.0));
        let (re, im) = character_eval(&PFraction::new(1, 3, 1).unwrap());
        assert!((re + 0.5).abs() < 1e-15 && (im - 0.75f64.sqrt()).abs() < 1e-15);
    }

    fn prime() -> impl Strategy<Value = u32> {
        prop::sample::select(vec![2u32, 3, 5, 7])
    }

    proptest! {
        #[test]
        fn refinement_partitions_the_ball(p in prime(), n in 1usize..3, extra in 0usize..3, seed in any::<u64>()) {
            let pn = (p as u64).pow(n as u32);
            let center = PAdicCode::from_value(p, seed % pn, n).unwrap();
            let m = n + extra;
            let children = refine_ball(&center, m).unwrap();
            prop_assert_eq!(children.len() as u64, (p as u64).pow(extra as u32));
            // every precision-m code inside the ball appears exactly once
            let pm = (p as u64).pow(m as u32);
            let mut hits = 0;
            for v in 0..pm {
                let x = PAdicCode::from_value(p, v, m).unwrap();
                let inside = ball_contains(&center, n, &x).unwrap();
                let count = children.iter().filter(|c| **c == x).count();
                prop_assert_eq!(count, inside as usize);
                hits += count;
            }
            prop_assert_eq!(hits, children.len());
        }

        #[test]
        fn character_is_multiplicative(p in prime(), a in any::<u64>(), b in any::<u64>(), e1 in 0u32..6, e2 in 0u32..6) {
            let f1 = PFraction::new(a % 100_000, p, e1).unwrap();
            let f2 = PFraction::new(b % 100_000, p, e2).unwrap();
            let (r1, i1) = character_eval(&f1);
            let (r2, i2) = character_eval(&f2);
            let (r, i) = character_eval(&f1.add_mod_one(&f2).unwrap());
            prop_assert!((r1 * r2 - i1 * i2 - r).abs() < 1e-12);
            prop_assert!((r1 * i2 + i1 * r2 - i).abs() < 1e-12);
        }

        #[test]
        fn fractional_part_is_additive(p in prime(), level in 0usize..4, j_seed in any::<u32>(), x in any::<u32>(), y in any::<u32>()) {
            let j = 1 + j_seed % (p - 1);
            let k = level + 1;
            let modulus = (p as u64).pow(k as u32);
            let (x, y) = (x as u64 % modulus, y as u64 % modulus);
            let cx = PAdicCode::from_value(p, x, k).unwrap();
            let cy = PAdicCode::from_value(p, y, k).unwrap();
            let cxy = PAdicCode::from_value(p, (x + y) % modulus, k).unwrap();
            let lhs = fractional_part_scaled(&cxy, j, level).unwrap();
            let rhs = fractional_part_scaled(&cx, j, level).unwrap()
                .add_mod_one(&fractional_part_scaled(&cy, j, level).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn balls_partition_codes(p in prime(), r in 0usize..3) {
            let m = 3;
            let pm = (p as u64).pow(m as u32);
            let codes: Vec<_> = (0..pm).map(|v| PAdicCode::from_value(p, v, m).unwrap()).collect();
            for x in &codes {
                // x lies in exactly one class: the class of its own prefix
                let owners = codes.iter()
                    .filter(|c| c.value() < (p as u64).pow(r as u32))
                    .filter(|c| ball_contains(c, r, x).unwrap())
                    .count();
                prop_assert_eq!(owners, 1);
            }
        }
    }
}
