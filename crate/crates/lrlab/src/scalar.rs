//! Exact rational arithmetic and certified enclosures.
//!
//! Every quantity the crate reports is a [`CertifiedValue`]: a closed
//! interval with `BigRational` endpoints. An enclosure with equal
//! endpoints is *exact*; all interval operations round outward (never
//! toward the center), so containment of the true value is an invariant,
//! not a hope. Denominator growth is controlled by [`CertifiedValue::round_out`],
//! which snaps endpoints to dyadics with a requested number of
//! significant bits, again outward.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow, Signed, ToPrimitive, Zero};
use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeStruct;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;

use crate::{Error, Result};

pub type Rat = BigRational;

/// Default working precision for enclosure endpoints, in bits.
pub const DEFAULT_PRECISION_BITS: u32 = 256;

/// Hard ceiling for precision escalation before giving up.
pub const PRECISION_CAP_BITS: u32 = 16_384;

/// Precision budget for operations that may need to escalate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Precision {
    pub bits: u32,
    pub cap: u32,
}

impl Precision {
    pub fn new(bits: u32) -> Self {
        let bits = bits.max(16);
        Precision {
            bits,
            cap: (bits.saturating_mul(16)).max(PRECISION_CAP_BITS),
        }
    }
}

impl Default for Precision {
    fn default() -> Self {
        Precision::new(DEFAULT_PRECISION_BITS)
    }
}

pub fn rat_i(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// Formats a rational as `p/q` with the denominator always present.
pub fn rat_str(x: &Rat) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

/// Parses `p/q`, plain integers, and decimal literals like `-0.25`.
pub fn parse_rat(s: &str) -> Result<Rat> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::Parse("empty rational literal".into()));
    }
    if let Some((p, q)) = s.split_once('/') {
        let num: BigInt = p
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad numerator in {s:?}")))?;
        let den: BigInt = q
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad denominator in {s:?}")))?;
        if den.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(Rat::new(num, den));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let neg = int.trim_start().starts_with('-');
        let int_part: BigInt = if int == "-" || int.is_empty() {
            BigInt::zero()
        } else {
            int.parse()
                .map_err(|_| Error::Parse(format!("bad integer part in {s:?}")))?
        };
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::Parse(format!("bad fractional part in {s:?}")));
        }
        let frac_num: BigInt = frac
            .parse()
            .map_err(|_| Error::Parse(format!("bad fractional part in {s:?}")))?;
        let scale = BigInt::from(10).pow(frac.len() as u32);
        let frac_rat = Rat::new(frac_num, scale);
        let int_rat = Rat::from_integer(int_part);
        return Ok(if neg {
            int_rat - frac_rat
        } else {
            int_rat + frac_rat
        });
    }
    let n: BigInt = s
        .parse()
        .map_err(|_| Error::Parse(format!("bad rational literal {s:?}")))?;
    Ok(Rat::from_integer(n))
}

/// `x * 2^t` without intermediate blowup.
pub fn mul_pow2(x: &Rat, t: i64) -> Rat {
    if x.is_zero() || t == 0 {
        return x.clone();
    }
    if t > 0 {
        Rat::new(x.numer() << (t as usize), x.denom().clone())
    } else {
        Rat::new(x.numer().clone(), x.denom() << ((-t) as usize))
    }
}

pub fn pow2(t: i64) -> Rat {
    mul_pow2(&Rat::one(), t)
}

/// Largest `e` with `2^e <= x`, for `x > 0`.
pub fn ilog2_floor(x: &Rat) -> i64 {
    debug_assert!(x.is_positive());
    let mut e = x.numer().bits() as i64 - x.denom().bits() as i64;
    // bits() brackets the magnitude within a factor of two; fix up exactly.
    while pow2(e) > *x {
        e -= 1;
    }
    while pow2(e + 1) <= *x {
        e += 1;
    }
    e
}

/// Exact integer power of a rational; `k < 0` requires `x != 0`.
pub fn rat_pow_int(x: &Rat, k: i64) -> Result<Rat> {
    if k == 0 {
        return Ok(Rat::one());
    }
    if x.is_zero() {
        if k < 0 {
            return Err(Error::Domain("0 raised to a negative power".into()));
        }
        return Ok(Rat::zero());
    }
    let mag = u32::try_from(k.unsigned_abs())
        .map_err(|_| Error::Domain(format!("integer exponent {k} too large")))?;
    let num = Pow::pow(x.numer(), mag);
    let den = Pow::pow(x.denom(), mag);
    Ok(if k > 0 {
        Rat::new(num, den)
    } else {
        Rat::new(den, num)
    })
}

#[derive(Clone, Copy, Debug)]
enum Dir {
    Down,
    Up,
}

/// Rounds `x` to a dyadic with about `bits` significant bits.
fn round_dyadic(x: &Rat, bits: u32, dir: Dir) -> Rat {
    if x.is_zero() || x.denom().is_one() {
        return x.clone();
    }
    let e = ilog2_floor(&x.abs());
    let t = bits as i64 - 1 - e;
    let scaled = mul_pow2(x, t);
    if scaled.is_integer() {
        return x.clone();
    }
    let m = match dir {
        Dir::Down => scaled.floor(),
        Dir::Up => scaled.ceil(),
    };
    mul_pow2(&m, -t)
}

/// Fixed-point decimal rendering used by reports; `dir` controls the
/// rounding of the last digit so radii can be rendered outward.
pub fn decimal_str(x: &Rat, frac_digits: u32, outward: bool) -> String {
    let scale = Rat::from_integer(BigInt::from(10).pow(frac_digits));
    let v = x * &scale;
    let n: BigInt = if outward {
        if x.is_negative() {
            v.floor().to_integer()
        } else {
            v.ceil().to_integer()
        }
    } else {
        (v + rat(1, 2)).floor().to_integer()
    };
    let neg = n.is_negative();
    let digits = n.abs().to_string();
    let digits = if digits.len() <= frac_digits as usize {
        format!("{}{}", "0".repeat(frac_digits as usize + 1 - digits.len()), digits)
    } else {
        digits
    };
    let split = digits.len() - frac_digits as usize;
    let (int_part, frac_part) = digits.split_at(split);
    let frac_part = frac_part.trim_end_matches('0');
    let frac_part = if frac_part.is_empty() { "0" } else { frac_part };
    format!("{}{}.{}", if neg { "-" } else { "" }, int_part, frac_part)
}

/// Serde adapter serializing a bare rational as its `p/q` string, for
/// use as `#[serde(with = "crate::scalar::rat_serde")]`.
pub mod rat_serde {
    use super::{parse_rat, rat_str, Rat};
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Rat, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&rat_str(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rat, D::Error> {
        let s = String::deserialize(d)?;
        parse_rat(&s).map_err(|e| de::Error::custom(e.to_string()))
    }
}

/// Serde adapter for `Vec<Rat>` as a list of `p/q` strings.
pub mod rat_vec_serde {
    use super::{parse_rat, rat_str, Rat};
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(xs: &[Rat], s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(xs.iter().map(|x| rat_str(x)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Vec<Rat>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter()
            .map(|s| parse_rat(s).map_err(|e| de::Error::custom(e.to_string())))
            .collect()
    }
}

/// Outcome of comparing two enclosures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    CertainlyLess,
    CertainlyGreater,
    Overlapping,
}

/// A closed interval guaranteed to contain the value it stands for.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CertifiedValue {
    lo: Rat,
    hi: Rat,
}

impl CertifiedValue {
    pub fn exact(x: Rat) -> Self {
        CertifiedValue { lo: x.clone(), hi: x }
    }

    pub fn exact_int(n: i64) -> Self {
        Self::exact(rat_i(n))
    }

    pub fn from_bounds(lo: Rat, hi: Rat) -> Result<Self> {
        if lo > hi {
            return Err(Error::Validation(format!(
                "inverted enclosure [{}, {}]",
                rat_str(&lo),
                rat_str(&hi)
            )));
        }
        Ok(CertifiedValue { lo, hi })
    }

    pub fn zero() -> Self {
        Self::exact(Rat::zero())
    }

    pub fn one() -> Self {
        Self::exact(Rat::one())
    }

    pub fn lo(&self) -> &Rat {
        &self.lo
    }

    pub fn hi(&self) -> &Rat {
        &self.hi
    }

    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }

    pub fn center(&self) -> Rat {
        (&self.lo + &self.hi) / rat_i(2)
    }

    pub fn radius(&self) -> Rat {
        (&self.hi - &self.lo) / rat_i(2)
    }

    pub fn width(&self) -> Rat {
        &self.hi - &self.lo
    }

    pub fn contains(&self, x: &Rat) -> bool {
        self.lo <= *x && *x <= self.hi
    }

    pub fn encloses(&self, other: &CertifiedValue) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn add(&self, rhs: &CertifiedValue) -> CertifiedValue {
        if self.is_exact() && rhs.is_exact() {
            return CertifiedValue::exact(&self.lo + &rhs.lo);
        }
        CertifiedValue {
            lo: &self.lo + &rhs.lo,
            hi: &self.hi + &rhs.hi,
        }
    }

    pub fn sub(&self, rhs: &CertifiedValue) -> CertifiedValue {
        if self.is_exact() && rhs.is_exact() {
            return CertifiedValue::exact(&self.lo - &rhs.lo);
        }
        CertifiedValue {
            lo: &self.lo - &rhs.hi,
            hi: &self.hi - &rhs.lo,
        }
    }

    pub fn neg(&self) -> CertifiedValue {
        CertifiedValue {
            lo: -self.hi.clone(),
            hi: -self.lo.clone(),
        }
    }

    pub fn mul(&self, rhs: &CertifiedValue) -> CertifiedValue {
        if rhs.is_exact() {
            return self.mul_rat(&rhs.lo);
        }
        if self.is_exact() {
            return rhs.mul_rat(&self.lo);
        }
        let cands = [
            &self.lo * &rhs.lo,
            &self.lo * &rhs.hi,
            &self.hi * &rhs.lo,
            &self.hi * &rhs.hi,
        ];
        let lo = cands.iter().min().unwrap().clone();
        let hi = cands.iter().max().unwrap().clone();
        CertifiedValue { lo, hi }
    }

    pub fn mul_rat(&self, c: &Rat) -> CertifiedValue {
        if self.is_exact() {
            return CertifiedValue::exact(&self.lo * c);
        }
        if c.is_negative() {
            CertifiedValue {
                lo: &self.hi * c,
                hi: &self.lo * c,
            }
        } else {
            CertifiedValue {
                lo: &self.lo * c,
                hi: &self.hi * c,
            }
        }
    }

    pub fn recip(&self) -> Result<CertifiedValue> {
        if self.contains(&Rat::zero()) {
            return Err(Error::Domain("reciprocal of enclosure containing 0".into()));
        }
        Ok(CertifiedValue {
            lo: self.hi.recip(),
            hi: self.lo.recip(),
        })
    }

    pub fn div(&self, rhs: &CertifiedValue) -> Result<CertifiedValue> {
        Ok(self.mul(&rhs.recip()?))
    }

    /// Pointwise max with zero.
    pub fn pos_part(&self) -> CertifiedValue {
        let z = Rat::zero();
        CertifiedValue {
            lo: if self.lo < z { z.clone() } else { self.lo.clone() },
            hi: if self.hi < z { z } else { self.hi.clone() },
        }
    }

    pub fn hull(&self, other: &CertifiedValue) -> CertifiedValue {
        CertifiedValue {
            lo: self.lo.clone().min(other.lo.clone()),
            hi: self.hi.clone().max(other.hi.clone()),
        }
    }

    /// Enclosure of `min(x, y)` over the two enclosures.
    pub fn min_with(&self, other: &CertifiedValue) -> CertifiedValue {
        CertifiedValue {
            lo: self.lo.clone().min(other.lo.clone()),
            hi: self.hi.clone().min(other.hi.clone()),
        }
    }

    /// Enclosure of `max(x, y)` over the two enclosures.
    pub fn max_with(&self, other: &CertifiedValue) -> CertifiedValue {
        CertifiedValue {
            lo: self.lo.clone().max(other.lo.clone()),
            hi: self.hi.clone().max(other.hi.clone()),
        }
    }

    /// Exact integer power; negative exponents require 0 outside the interval.
    pub fn pow_int(&self, k: i64) -> Result<CertifiedValue> {
        if k == 0 {
            return Ok(CertifiedValue::one());
        }
        if k < 0 {
            return self.recip()?.pow_int(-k);
        }
        let a = rat_pow_int(&self.lo, k)?;
        let b = rat_pow_int(&self.hi, k)?;
        if k % 2 == 1 {
            return Ok(CertifiedValue { lo: a, hi: b });
        }
        if !self.lo.is_negative() {
            Ok(CertifiedValue { lo: a, hi: b })
        } else if !self.hi.is_positive() {
            Ok(CertifiedValue { lo: b, hi: a })
        } else {
            Ok(CertifiedValue {
                lo: Rat::zero(),
                hi: a.max(b),
            })
        }
    }

    /// Snaps the endpoints outward to dyadics with `bits` significant bits.
    /// Exact values pass through untouched so exactness is never lost.
    pub fn round_out(&self, bits: u32) -> CertifiedValue {
        if self.is_exact() {
            return self.clone();
        }
        CertifiedValue {
            lo: round_dyadic(&self.lo, bits, Dir::Down),
            hi: round_dyadic(&self.hi, bits, Dir::Up),
        }
    }

    /// Enclosure of `self^exponent` for a positive base; exact whenever the
    /// exponent is an integer or the endpoints have exact rational roots.
    pub fn pow(&self, exponent: &Rat, prec: Precision) -> Result<CertifiedValue> {
        if exponent.is_integer() {
            let k = exponent
                .to_integer()
                .to_i64()
                .ok_or_else(|| Error::Domain("integer exponent out of range".into()))?;
            if k < 0 && self.contains(&Rat::zero()) {
                return Err(Error::Domain("negative power of enclosure containing 0".into()));
            }
            if k >= 0 && !self.lo.is_negative() {
                return self.pow_int(k);
            }
            if self.lo.is_positive() || !self.hi.is_positive() {
                return self.pow_int(k);
            }
            return self.pow_int(k);
        }
        if !self.lo.is_positive() {
            return Err(Error::Domain(
                "fractional power requires a strictly positive base".into(),
            ));
        }
        let p = exponent
            .numer()
            .to_i64()
            .ok_or_else(|| Error::Domain("exponent numerator out of range".into()))?;
        let q = exponent
            .denom()
            .to_u32()
            .ok_or_else(|| Error::Domain("exponent denominator out of range".into()))?;
        let base = self.pow_int(p)?;
        let (lo, _) = nth_root_brackets(&base.lo, q, prec.bits)?;
        let (_, hi) = nth_root_brackets(&base.hi, q, prec.bits)?;
        CertifiedValue::from_bounds(lo, hi)
    }

    /// `[max(self, 0)]^s` for `s > 0`, tolerating enclosures that touch
    /// zero (where fractional powers of the endpoint are just 0).
    pub fn pow_nonneg(&self, s: &Rat, prec: Precision) -> Result<CertifiedValue> {
        if !s.is_positive() {
            return Err(Error::Domain("pow_nonneg needs a positive exponent".into()));
        }
        let clip = self.pos_part();
        if s.is_integer() {
            if let Some(k) = s.to_integer().to_i64() {
                return clip.pow_int(k);
            }
        }
        let lo = if clip.lo().is_positive() {
            CertifiedValue::exact(clip.lo().clone())
                .pow(s, prec)?
                .lo()
                .clone()
        } else {
            Rat::zero()
        };
        let hi = if clip.hi().is_positive() {
            CertifiedValue::exact(clip.hi().clone())
                .pow(s, prec)?
                .hi()
                .clone()
        } else {
            Rat::zero()
        };
        CertifiedValue::from_bounds(lo, hi)
    }

    /// Enclosure of the q-th root of a nonnegative enclosure.
    pub fn root(&self, q: u32, prec: Precision) -> Result<CertifiedValue> {
        if self.lo.is_negative() {
            return Err(Error::Domain("root of a negative enclosure".into()));
        }
        let (lo, _) = nth_root_brackets(&self.lo, q, prec.bits)?;
        let (_, hi) = nth_root_brackets(&self.hi, q, prec.bits)?;
        CertifiedValue::from_bounds(lo, hi)
    }
}

/// Compares enclosures; strict separation of the endpoints is required
/// for a definite verdict, anything else is `Overlapping`.
pub fn compare(a: &CertifiedValue, b: &CertifiedValue) -> Verdict {
    if a.hi < b.lo {
        Verdict::CertainlyLess
    } else if b.hi < a.lo {
        Verdict::CertainlyGreater
    } else {
        Verdict::Overlapping
    }
}

/// Decides `lhs <= rhs` by recomputing both sides at escalating precision.
/// Exact ties decide immediately; otherwise precision doubles up to the cap.
pub fn certify_le<F>(mut f: F, prec: Precision, context: &str) -> Result<bool>
where
    F: FnMut(u32) -> Result<(CertifiedValue, CertifiedValue)>,
{
    let mut bits = prec.bits;
    loop {
        let (a, b) = f(bits)?;
        if a.hi <= b.lo {
            return Ok(true);
        }
        if b.hi < a.lo {
            return Ok(false);
        }
        if a.is_exact() && b.is_exact() {
            return Ok(a.lo <= b.lo);
        }
        if bits >= prec.cap {
            return Err(Error::Undecidable(context.to_string()));
        }
        bits = bits.saturating_mul(2).min(prec.cap);
    }
}

/// Strict variant of [`certify_le`].
pub fn certify_lt<F>(mut f: F, prec: Precision, context: &str) -> Result<bool>
where
    F: FnMut(u32) -> Result<(CertifiedValue, CertifiedValue)>,
{
    let mut bits = prec.bits;
    loop {
        let (a, b) = f(bits)?;
        if a.hi < b.lo {
            return Ok(true);
        }
        if b.hi <= a.lo {
            return Ok(false);
        }
        if a.is_exact() && b.is_exact() {
            return Ok(a.lo < b.lo);
        }
        if bits >= prec.cap {
            return Err(Error::Undecidable(context.to_string()));
        }
        bits = bits.saturating_mul(2).min(prec.cap);
    }
}

/// Dyadic bracket `[lo, hi]` with `lo^q <= a <= hi^q`, relative width
/// about `2^-bits`. Perfect rational roots come back exact.
pub fn nth_root_brackets(a: &Rat, q: u32, bits: u32) -> Result<(Rat, Rat)> {
    if q == 0 {
        return Err(Error::Domain("zeroth root".into()));
    }
    if a.is_negative() {
        return Err(Error::Domain("root of a negative value".into()));
    }
    if a.is_zero() {
        return Ok((Rat::zero(), Rat::zero()));
    }
    if q == 1 {
        return Ok((a.clone(), a.clone()));
    }
    let rn = a.numer().nth_root(q);
    let rd = a.denom().nth_root(q);
    if &Pow::pow(&rn, q) == a.numer() && &Pow::pow(&rd, q) == a.denom() {
        let root = Rat::new(rn, rd);
        return Ok((root.clone(), root));
    }
    // Normalize by 2^(q g) so the remaining factor `norm` lies in [1, 2^q)
    // and its q-th root t in [1, 2). A float seed from the top 64 mantissa
    // bits keeps Newton in the quadratic regime for every q, and the final
    // bracket is verified with directed-rounding powers, widening outward
    // on a miss. The clamps at 1 and 2 are sound because t always lies
    // between them, and they guarantee the widening loops terminate.
    let e = ilog2_floor(a);
    let g = e.div_euclid(q as i64);
    let norm = mul_pow2(a, -g * q as i64);
    let one = Rat::one();
    let two = rat_i(2);
    let u = ilog2_floor(&norm);
    let m = mul_pow2(&norm, -u);
    let top = ((m.numer() << 64u32) / m.denom())
        .to_f64()
        .unwrap_or(f64::MAX);
    let t0 = ((u as f64 + (top / 2f64.powi(64)).log2()) / q as f64).exp2();
    let clamp = |v: Rat| -> Rat {
        if v < one {
            one.clone()
        } else if v > two {
            two.clone()
        } else {
            v
        }
    };
    let mut x = clamp(Rat::new(
        BigInt::from((t0 * 2f64.powi(53)) as i64),
        BigInt::one() << 53u32,
    ));
    let qlog = 32 - (q - 1).leading_zeros();
    let target = bits + 16;
    let mut p = 50u32;
    while p < target {
        p = p.saturating_mul(2).min(target);
        let w = p + qlog + 16;
        let xp = pow_dir(&x, q - 1, w, Dir::Down);
        let nx = (&norm / xp + &x * rat_i(q as i64 - 1)) / rat_i(q as i64);
        x = clamp(round_dyadic(&nx, w, Dir::Down));
    }
    let grid = -(bits as i64) - 2;
    let vw = bits + 2 * qlog + 48;
    let mut k = 0;
    let lo = loop {
        let cand = clamp(round_dyadic(&(&x - pow2(grid + k)), bits + 8, Dir::Down));
        if cand == one || pow_dir(&cand, q, vw, Dir::Up) <= norm {
            break cand;
        }
        k += 1;
    };
    k = 0;
    let hi = loop {
        let cand = clamp(round_dyadic(&(&x + pow2(grid + k)), bits + 8, Dir::Up));
        if cand == two || pow_dir(&cand, q, vw, Dir::Down) >= norm {
            break cand;
        }
        k += 1;
    };
    Ok((mul_pow2(&lo, g), mul_pow2(&hi, g)))
}

/// `x^q` by repeated squaring with every intermediate rounded in `dir`,
/// for `x >= 0`: a one-sided bound on the true power.
fn pow_dir(x: &Rat, q: u32, work: u32, dir: Dir) -> Rat {
    debug_assert!(!x.is_negative());
    let mut acc = Rat::one();
    let mut base = x.clone();
    let mut e = q;
    loop {
        if e & 1 == 1 {
            acc = round_dyadic(&(&acc * &base), work, dir);
        }
        e >>= 1;
        if e == 0 {
            break;
        }
        base = round_dyadic(&(&base * &base), work, dir);
    }
    acc
}

/// Enclosure of `atanh` on `[z_lo, z_hi]`, both within `(-1/2, 1/2)`.
///
/// The partial sums run on dyadics rounded in the bound's direction every
/// step, so intermediate denominators stay near `work` bits instead of
/// compounding term by term. `Dir::Up` also adds the geometric tail bound
/// `z^(2T+1) / ((2T+1)(1 - z^2))`; negative arguments go through oddness.
fn atanh_enclosure(z_lo: &Rat, z_hi: &Rat, bits: u32) -> Result<CertifiedValue> {
    let half = rat(1, 2);
    if z_lo.abs() >= half || z_hi.abs() >= half || z_lo > z_hi {
        return Err(Error::Domain("atanh argument outside (-1/2, 1/2)".into()));
    }
    let terms = (bits as usize) / 2 + 4;
    let work = 2 * bits + 32;
    let eval = |z: &Rat, dir: Dir| -> Rat {
        debug_assert!(!z.is_negative());
        let z2 = round_dyadic(&(z * z), work, dir);
        let mut pow = round_dyadic(z, work, dir);
        let mut sum = Rat::zero();
        for j in 0..terms {
            sum = round_dyadic(&(sum + &pow / rat_i(2 * j as i64 + 1)), work, dir);
            pow = round_dyadic(&(pow * &z2), work, dir);
        }
        if let Dir::Up = dir {
            let denom = rat_i(2 * terms as i64 + 1) * (Rat::one() - z2);
            sum = round_dyadic(&(sum + pow / denom), work, Dir::Up);
        }
        sum
    };
    let bound = |z: &Rat, dir: Dir| -> Rat {
        if z.is_negative() {
            let flipped = match dir {
                Dir::Down => Dir::Up,
                Dir::Up => Dir::Down,
            };
            -eval(&-z.clone(), flipped)
        } else {
            eval(z, dir)
        }
    };
    CertifiedValue::from_bounds(bound(z_lo, Dir::Down), bound(z_hi, Dir::Up))
}

/// Enclosure of the natural log of 2 via `2*atanh(1/3)`.
pub fn ln2(bits: u32) -> CertifiedValue {
    let z = rat(1, 3);
    atanh_enclosure(&z, &z, bits)
        .expect("1/3 is in range")
        .mul_rat(&rat_i(2))
        .round_out(bits)
}

/// Enclosure of `ln x` for `x > 0`: argument reduction to `(2/3, 4/3]`
/// by powers of two, then the atanh series.
pub fn ln(x: &Rat, bits: u32) -> Result<CertifiedValue> {
    if !x.is_positive() {
        return Err(Error::Domain("log of a nonpositive value".into()));
    }
    let mut e = ilog2_floor(x);
    let mut m = mul_pow2(x, -e);
    if m > rat(4, 3) {
        e += 1;
        m = mul_pow2(&m, -1);
    }
    let z = (&m - Rat::one()) / (&m + Rat::one());
    let z_lo = round_dyadic(&z, 2 * bits, Dir::Down);
    let z_hi = round_dyadic(&z, 2 * bits, Dir::Up);
    let at = atanh_enclosure(&z_lo, &z_hi, bits)?.mul_rat(&rat_i(2));
    let scaled_ln2 = ln2(bits + 8).mul_rat(&rat_i(e));
    Ok(at.add(&scaled_ln2).round_out(bits))
}

/// Enclosure of `log2 x`.
pub fn log2(x: &Rat, bits: u32) -> Result<CertifiedValue> {
    let num = ln(x, bits + 16)?;
    let den = ln2(bits + 16);
    Ok(num.div(&den)?.round_out(bits))
}

impl fmt::Display for CertifiedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_exact() {
            write!(f, "{}", rat_str(&self.lo))
        } else {
            write!(
                f,
                "[{} ± {}]",
                decimal_str(&self.center(), 40, false),
                decimal_str(&self.radius(), 40, true)
            )
        }
    }
}

const SERIAL_FRAC_DIGITS: u32 = 40;

impl Serialize for CertifiedValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_exact() {
            serializer.serialize_str(&rat_str(&self.lo))
        } else {
            // Pad the radius by one ulp of the decimal grid so the printed
            // ball still covers the enclosure after the center is rounded.
            let pad = Rat::new(BigInt::one(), BigInt::from(10).pow(SERIAL_FRAC_DIGITS));
            let mut st = serializer.serialize_struct("CertifiedValue", 2)?;
            st.serialize_field(
                "center",
                &decimal_str(&self.center(), SERIAL_FRAC_DIGITS, false),
            )?;
            st.serialize_field(
                "radius",
                &decimal_str(&(self.radius() + pad), SERIAL_FRAC_DIGITS, true),
            )?;
            st.end()
        }
    }
}

impl<'de> Deserialize<'de> for CertifiedValue {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = CertifiedValue;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a \"p/q\" string or a {center, radius} object")
            }

            fn visit_str<E: de::Error>(self, s: &str) -> std::result::Result<CertifiedValue, E> {
                parse_rat(s)
                    .map(CertifiedValue::exact)
                    .map_err(|e| E::custom(e.to_string()))
            }

            fn visit_map<A: MapAccess<'de>>(
                self,
                mut map: A,
            ) -> std::result::Result<CertifiedValue, A::Error> {
                let mut center: Option<String> = None;
                let mut radius: Option<String> = None;
                while let Some(key) = map.next_key::<String>()? {
                    match key.as_str() {
                        "center" => center = Some(map.next_value()?),
                        "radius" => radius = Some(map.next_value()?),
                        other => {
                            return Err(de::Error::unknown_field(other, &["center", "radius"]))
                        }
                    }
                }
                let c = parse_rat(&center.ok_or_else(|| de::Error::missing_field("center"))?)
                    .map_err(|e| de::Error::custom(e.to_string()))?;
                let r = parse_rat(&radius.ok_or_else(|| de::Error::missing_field("radius"))?)
                    .map_err(|e| de::Error::custom(e.to_string()))?;
                if r.is_negative() {
                    return Err(de::Error::custom("negative radius"));
                }
                CertifiedValue::from_bounds(&c - &r, &c + &r)
                    .map_err(|e| de::Error::custom(e.to_string()))
            }
        }
        de.deserialize_any(V)
    }
}
