//! Poly-geometric series with certified tails.
//!
//! The sums handled here all have the shape `scale * sum n^a x^n`.
//! For integer `a >= 0` and exact `x` the closed form
//! `P_a(x) / (1-x)^(a+1)` (with `P_a` built by the classical numerator
//! recurrence) gives exact full sums, partial sums and tails. For
//! fractional powers or inexact ratios, summation falls back to exact
//! term-by-term prefixes plus a geometric-domination majorant on the
//! remainder, so results stay certified enclosures either way.

use num_bigint::BigInt;
use num_traits::{One, Pow, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::scalar::{rat_i, rat_pow_int, rat_str, CertifiedValue, Precision, Rat};
use crate::{Error, Result};

/// `scale * sum_{n >= 1} n^power * ratio^n`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeriesSpec {
    #[serde(with = "crate::scalar::rat_serde")]
    pub power: Rat,
    pub ratio: CertifiedValue,
    pub scale: CertifiedValue,
}

impl SeriesSpec {
    pub fn polygeom(power: Rat, ratio: CertifiedValue) -> Self {
        SeriesSpec {
            power,
            ratio,
            scale: CertifiedValue::one(),
        }
    }

    pub fn with_scale(mut self, scale: CertifiedValue) -> Self {
        self.scale = scale;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RatioVerdict {
    Convergent,
    Divergent,
    Inconclusive,
}

/// Coefficients (by ascending degree) of the numerator polynomial `P_a`
/// with `sum_{n>=1} n^a x^n = P_a(x) / (1-x)^(a+1)`; built by
/// `P_a = x * (P'_{a-1} * (1-x) + a * P_{a-1})`, starting from `P_0 = x`.
fn numerator_poly(a: u32) -> Vec<Rat> {
    let mut p = vec![Rat::zero(), Rat::one()];
    for step in 1..=a {
        let deriv: Vec<Rat> = (1..p.len()).map(|i| &p[i] * rat_i(i as i64)).collect();
        // q = deriv * (1 - x) + step * p
        let deg = p.len().max(deriv.len() + 1);
        let mut q = vec![Rat::zero(); deg];
        for (i, c) in deriv.iter().enumerate() {
            q[i] += c;
            q[i + 1] -= c;
        }
        for (i, c) in p.iter().enumerate() {
            q[i] += c * rat_i(step as i64);
        }
        // multiply by x
        let mut next = vec![Rat::zero(); q.len() + 1];
        for (i, c) in q.into_iter().enumerate() {
            next[i + 1] = c;
        }
        while next.len() > 1 && next.last().unwrap().is_zero() {
            next.pop();
        }
        p = next;
    }
    p
}

fn eval_poly(coeffs: &[Rat], x: &Rat) -> Rat {
    let mut acc = Rat::zero();
    for c in coeffs.iter().rev() {
        acc = acc * x + c;
    }
    acc
}

/// Exact full sum `sum_{n >= 1} n^a x^n` for integer `a >= 0`, `|x| < 1`.
pub fn closed_form(a: u32, x: &Rat) -> Result<Rat> {
    if x.abs() >= Rat::one() {
        return Err(Error::Divergent(format!(
            "ratio {} is not inside the unit interval",
            rat_str(x)
        )));
    }
    let p = eval_poly(&numerator_poly(a), x);
    let denom = rat_pow_int(&(Rat::one() - x), a as i64 + 1)?;
    Ok(p / denom)
}

/// Exact `sum_{n=1}^{n_max} n^a x^n` by direct accumulation.
pub fn partial_sum(a: u32, x: &Rat, n_max: u64) -> Rat {
    let mut sum = Rat::zero();
    let mut xp = Rat::one();
    for n in 1..=n_max {
        xp *= x;
        let na = Pow::pow(&BigInt::from(n), a);
        sum += Rat::from_integer(na) * &xp;
    }
    sum
}

/// Exact `sum_{n >= from} n^a x^n`.
///
/// Shifting the index to start at 1 and expanding `(from-1+i)^a`
/// binomially reduces the tail to `a+1` full closed forms, so the cost
/// is independent of `from`.
pub fn tail_exact(a: u32, x: &Rat, from: u64) -> Result<Rat> {
    if from <= 1 {
        return closed_form(a, x);
    }
    let m = Rat::from_integer(BigInt::from(from - 1));
    let mut sum = Rat::zero();
    let mut binom = Rat::one();
    for j in 0..=a {
        let shift_pow = rat_pow_int(&m, (a - j) as i64)?;
        sum += binom.clone() * shift_pow * closed_form(j, x)?;
        binom = binom * rat_i((a - j) as i64) / rat_i(j as i64 + 1);
    }
    Ok(rat_pow_int(x, from as i64 - 1)? * sum)
}

/// Certified enclosure of `scale * sum_{n >= from} n^power ratio^n`.
///
/// Exact when the power is a nonnegative integer and ratio and scale are
/// exact. Otherwise sums exact-arithmetic term enclosures until the
/// majorant remainder drops below `tol` (or a term cap is reached; the
/// result is sound either way, just wider).
pub fn sum_from(
    spec: &SeriesSpec,
    from: u64,
    tol: &Rat,
    prec: Precision,
) -> Result<CertifiedValue> {
    let from = from.max(1);
    if spec.ratio.lo().is_negative() {
        return Err(Error::Domain("series ratio must be nonnegative".into()));
    }
    if spec.ratio.hi() >= &Rat::one() {
        return Err(Error::Divergent(format!(
            "ratio upper bound {} reaches 1",
            rat_str(spec.ratio.hi())
        )));
    }
    if spec.power.is_integer() && !spec.power.is_negative() && spec.ratio.is_exact() {
        let a = spec
            .power
            .to_integer()
            .to_u32()
            .ok_or_else(|| Error::Domain("series power out of range".into()))?;
        let tail = tail_exact(a, spec.ratio.lo(), from)?;
        return Ok(spec.scale.mul_rat(&tail));
    }

    let mut lo = Rat::zero();
    let mut hi = Rat::zero();
    let mut n = from;
    let cap = from + 20_000;
    loop {
        let remainder = majorant_remainder(&spec.power, &spec.ratio, n, prec)?;
        if let Some(bound) = &remainder {
            if bound <= tol || n >= cap {
                hi += bound;
                break;
            }
        } else if n >= cap {
            return Err(Error::Undecidable(
                "series majorant never certified below 1".into(),
            ));
        }
        let term = term_enclosure(&spec.power, &spec.ratio, n, prec)?;
        lo += term.lo();
        hi += term.hi();
        n += 1;
    }
    Ok(spec
        .scale
        .mul(&CertifiedValue::from_bounds(lo, hi)?)
        .round_out(prec.bits))
}

/// Enclosure of the single term `n^power ratio^n`.
fn term_enclosure(power: &Rat, ratio: &CertifiedValue, n: u64, prec: Precision) -> Result<CertifiedValue> {
    let base = CertifiedValue::exact(rat_i(n as i64));
    let np = base.pow(power, prec)?;
    let xn = ratio.pow_int(n as i64)?;
    Ok(np.mul(&xn).round_out(prec.bits))
}

/// Upper bound for `sum_{k >= n} k^power ratio^k` by geometric domination:
/// term ratios are at most `((n+1)/n)^power * ratio_hi`; `None` while that
/// dominating ratio cannot be certified below 1.
fn majorant_remainder(
    power: &Rat,
    ratio: &CertifiedValue,
    n: u64,
    prec: Precision,
) -> Result<Option<Rat>> {
    let step = CertifiedValue::exact(Rat::new(
        BigInt::from(n + 1),
        BigInt::from(n),
    ));
    let growth = if power.is_negative() {
        CertifiedValue::one()
    } else {
        step.pow(power, prec)?
    };
    let rho_hi = growth.hi() * ratio.hi();
    if rho_hi >= Rat::one() {
        return Ok(None);
    }
    let t = term_enclosure(power, ratio, n, prec)?;
    Ok(Some(t.hi() / (Rat::one() - rho_hi)))
}

/// Limit of consecutive-term quotients (`ratio` itself; the `n^power`
/// factors tend to 1) and the convergence verdict it certifies.
pub fn ratio_test(spec: &SeriesSpec) -> (CertifiedValue, RatioVerdict) {
    let one = CertifiedValue::one();
    let verdict = match crate::scalar::compare(&spec.ratio, &one) {
        crate::scalar::Verdict::CertainlyLess => RatioVerdict::Convergent,
        crate::scalar::Verdict::CertainlyGreater => RatioVerdict::Divergent,
        crate::scalar::Verdict::Overlapping => RatioVerdict::Inconclusive,
    };
    (spec.ratio.clone(), verdict)
}

/// Enclosure of `2 * 3^(-r/s)`, the dominating term ratio of the scheme's
/// removed-interval mass series measured in the `s`-mean.
pub fn star_ratio(r: &Rat, s: &Rat, prec: Precision) -> Result<CertifiedValue> {
    if !s.is_positive() || !r.is_positive() {
        return Err(Error::Domain("star ratio needs positive r and s".into()));
    }
    let exponent = -(r / s);
    let three = CertifiedValue::exact_int(3);
    Ok(three.pow(&exponent, prec)?.mul_rat(&rat_i(2)))
}

/// The dominating series for the scheme's mass tail in the `s`-mean:
/// `3^(1/s) * sum k (2 * 3^(-r/s))^k`, from the per-interval term
/// `2 * 2^(k-1) * (3 k^s / 3^(kr))^(1/s)`. The `k^s` under the `1/s`
/// root leaves a first-power polynomial factor for every `s`.
pub fn star_majorant(r: &Rat, s: &Rat, prec: Precision) -> Result<SeriesSpec> {
    let ratio = star_ratio(r, s, prec)?;
    let three = CertifiedValue::exact_int(3);
    let scale = three.pow(&(Rat::one() / s), prec)?;
    Ok(SeriesSpec {
        power: Rat::one(),
        ratio,
        scale,
    })
}
