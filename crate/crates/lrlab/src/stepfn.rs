//! The unbounded step function of the scheme and its integration engine.
//!
//! `F` takes the value `n` on the open core of every stage-`n` removed
//! interval and `0` everywhere else (margins, survivors, endpoints).
//! The engine integrates `[sign * F(y) + p + q*y]_+^s` over subintervals
//! of `[0, 1]` by splitting into an exact affine part plus core
//! corrections: off the cores the integrand equals `[p + q*y]_+^s`,
//! which has a closed-form antiderivative, and each core of rank `k`
//! shifts that by a bounded amount on a set of known measure. Whole
//! subtrees of cores are summed in closed form (exact for integer
//! parameters) or with a geometric majorant tail, and the recursion only
//! splits where an affine slope makes the correction range too wide.

use serde::{Deserialize, Serialize};

use num_bigint::BigInt;
use num_integer::binomial;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::scalar::{pow2, rat, rat_i, rat_pow_int, rat_str, CertifiedValue, Precision, Rat};
use crate::scheme::{Location, Scheme};
use crate::series::{sum_from, SeriesSpec};
use crate::{Error, Result};

/// Sign applied to `F` inside the integrand `[sign*F + affine]_+^s`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

/// The affine part `offset + slope * y` of an integrand.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AffinePart {
    pub offset: Rat,
    pub slope: Rat,
}

impl AffinePart {
    pub fn zero() -> Self {
        AffinePart {
            offset: Rat::zero(),
            slope: Rat::zero(),
        }
    }

    pub fn constant(c: Rat) -> Self {
        AffinePart {
            offset: c,
            slope: Rat::zero(),
        }
    }

    pub fn new(offset: Rat, slope: Rat) -> Self {
        AffinePart { offset, slope }
    }

    pub fn is_zero(&self) -> bool {
        self.offset.is_zero() && self.slope.is_zero()
    }

    pub fn eval(&self, y: &Rat) -> Rat {
        &self.offset + &self.slope * y
    }

    pub fn neg(&self) -> AffinePart {
        AffinePart {
            offset: -self.offset.clone(),
            slope: -self.slope.clone(),
        }
    }

    /// Range of the affine map over an enclosure of positions.
    fn range_over(&self, positions: &CertifiedValue) -> CertifiedValue {
        CertifiedValue::exact(self.offset.clone())
            .add(&positions.mul_rat(&self.slope))
    }
}

/// `x^s` for exact nonnegative `x` (0^s = 0 for s > 0).
fn gen_pow(x: &Rat, s: &Rat, prec: Precision) -> Result<CertifiedValue> {
    debug_assert!(!x.is_negative());
    if x.is_zero() {
        return Ok(CertifiedValue::zero());
    }
    CertifiedValue::exact(x.clone()).pow(s, prec)
}

/// `[v]_+^s` as an enclosure; exact for integer `s`.
fn pos_pow(v: &CertifiedValue, s: &Rat, s_int: Option<i64>, prec: Precision) -> Result<CertifiedValue> {
    if let Some(k) = s_int {
        return v.pos_part().pow_int(k);
    }
    v.pow_nonneg(s, prec)
}

/// Exact-endpoint closed form for `int_a^b [p + q*y]_+^s dy`.
fn affine_plus_integral(
    aff: &AffinePart,
    a: &Rat,
    b: &Rat,
    s: &Rat,
    s_int: Option<i64>,
    prec: Precision,
) -> Result<CertifiedValue> {
    if a >= b {
        return Ok(CertifiedValue::zero());
    }
    let p = &aff.offset;
    let q = &aff.slope;
    if q.is_zero() {
        if !p.is_positive() {
            return Ok(CertifiedValue::zero());
        }
        let val = if let Some(k) = s_int {
            CertifiedValue::exact(p.clone()).pow_int(k)?
        } else {
            gen_pow(p, s, prec)?
        };
        return Ok(val.mul_rat(&(b - a)));
    }
    // positive part of the affine map on [a, b]
    let root = -(p / q);
    let (lo_y, hi_y) = if q.is_positive() {
        (root.max(a.clone()), b.clone())
    } else {
        (a.clone(), root.min(b.clone()))
    };
    if lo_y >= hi_y {
        return Ok(CertifiedValue::zero());
    }
    let s1 = s + rat_i(1);
    let s1_int = s_int.map(|k| k + 1);
    let at = |y: &Rat| -> Result<CertifiedValue> {
        let val = aff.eval(y).max(Rat::zero());
        if let Some(k) = s1_int {
            CertifiedValue::exact(val).pow_int(k)
        } else {
            gen_pow(&val, &s1, prec)
        }
    };
    let f_hi = at(&hi_y)?;
    let f_lo = at(&lo_y)?;
    let denom = q * &s1;
    Ok(f_hi.sub(&f_lo).mul_rat(&denom.recip()))
}

/// A monotone nondecreasing, right-continuous step function given by
/// strictly increasing breakpoints and one more value than breakpoint.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawMonotoneStep")]
pub struct MonotoneStep {
    #[serde(with = "crate::scalar::rat_vec_serde")]
    breakpoints: Vec<Rat>,
    #[serde(with = "crate::scalar::rat_vec_serde")]
    values: Vec<Rat>,
}

#[derive(Deserialize)]
struct RawMonotoneStep {
    #[serde(with = "crate::scalar::rat_vec_serde")]
    breakpoints: Vec<Rat>,
    #[serde(with = "crate::scalar::rat_vec_serde")]
    values: Vec<Rat>,
}

impl TryFrom<RawMonotoneStep> for MonotoneStep {
    type Error = Error;

    fn try_from(raw: RawMonotoneStep) -> Result<Self> {
        MonotoneStep::new(raw.breakpoints, raw.values)
    }
}

impl MonotoneStep {
    pub fn new(breakpoints: Vec<Rat>, values: Vec<Rat>) -> Result<Self> {
        if values.len() != breakpoints.len() + 1 {
            return Err(Error::Validation(format!(
                "need exactly one more value ({}) than breakpoint ({})",
                values.len(),
                breakpoints.len()
            )));
        }
        for w in breakpoints.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::Validation(
                    "breakpoints must be strictly increasing".into(),
                ));
            }
        }
        for w in values.windows(2) {
            if w[0] > w[1] {
                return Err(Error::Validation(
                    "step values must be nondecreasing".into(),
                ));
            }
        }
        Ok(MonotoneStep {
            breakpoints,
            values,
        })
    }

    pub fn flat_zero() -> Self {
        MonotoneStep {
            breakpoints: Vec::new(),
            values: vec![Rat::zero()],
        }
    }

    /// Right-continuous evaluation.
    pub fn value_at(&self, t: &Rat) -> &Rat {
        let idx = self.breakpoints.partition_point(|b| b <= t);
        &self.values[idx]
    }

    pub fn first_value(&self) -> &Rat {
        &self.values[0]
    }

    pub fn last_value(&self) -> &Rat {
        self.values.last().expect("nonempty by construction")
    }

    /// Splits `[a, b]` at interior breakpoints into constant pieces.
    pub fn pieces(&self, a: &Rat, b: &Rat) -> Vec<(Rat, Rat, Rat)> {
        let mut out = Vec::new();
        let mut lo = a.clone();
        for bp in &self.breakpoints {
            if bp <= &lo {
                continue;
            }
            if bp >= b {
                break;
            }
            out.push((lo.clone(), bp.clone(), self.value_at(&lo).clone()));
            lo = bp.clone();
        }
        if lo < *b {
            out.push((lo.clone(), b.clone(), self.value_at(&lo).clone()));
        }
        out
    }
}

/// The scheme's step function with its integration engine.
#[derive(Clone, Debug)]
pub struct StepFn {
    scheme: Scheme,
}

/// Explicit terms kept before the majorant tail in subtree sums.
const SUBTREE_TERMS: u32 = 40;

impl StepFn {
    pub fn new(scheme: Scheme) -> Self {
        StepFn { scheme }
    }

    pub fn scheme(&self) -> &Scheme {
        &self.scheme
    }

    /// Pointwise value of `F`; errors when the point survives past the
    /// depth cap (its membership in `P` is then undecided and `F` has no
    /// finite certified enclosure).
    pub fn value_at(&self, x: &Rat) -> Result<CertifiedValue> {
        match self.scheme.locate(x)? {
            Location::InCore { rank, .. } => Ok(CertifiedValue::exact_int(rank as i64)),
            Location::Outside
            | Location::InMargin { .. }
            | Location::SegmentEndpoint { .. } => Ok(CertifiedValue::zero()),
            Location::Unresolved { depth } => Err(Error::DepthExceeded {
                cap: depth,
                context: format!("pointwise value at {}", rat_str(x)),
            }),
        }
    }

    /// `int_a^b [sign*F + offset + slope*y]_+^s dy` as a certified
    /// enclosure; exact whenever the affine part vanishes and all stage
    /// masses and `k^s` terms are rational.
    pub fn integral_plus_affine(
        &self,
        a: &Rat,
        b: &Rat,
        sign: Sign,
        aff: &AffinePart,
        s: &Rat,
        tol: &Rat,
    ) -> Result<CertifiedValue> {
        if s < &rat_i(1) {
            return Err(Error::Domain(format!(
                "integrand power must be at least 1, got {}",
                rat_str(s)
            )));
        }
        if a > b {
            return Err(Error::Validation("inverted integration range".into()));
        }
        if a.is_negative() || *b > rat_i(1) {
            return Err(Error::Validation(
                "integration range must lie inside [0, 1]".into(),
            ));
        }
        if a == b {
            return Ok(CertifiedValue::zero());
        }
        if !tol.is_positive() {
            return Err(Error::Validation("tolerance must be positive".into()));
        }
        let ctx = EngineCtx::new(&self.scheme, sign, aff.clone(), s.clone())?;
        let base = affine_plus_integral(aff, a, b, s, ctx.s_int, ctx.prec)?;
        let half_tol = tol / rat_i(2);
        let first_core = ctx.excess.mul(&ctx.twelve_inv);
        let cores = ctx.node(
            0,
            &CertifiedValue::zero(),
            &CertifiedValue::one(),
            &CertifiedValue::one(),
            &first_core,
            a,
            b,
            &half_tol,
        )?;
        let total = base.add(&cores).max_with(&CertifiedValue::zero());
        Ok(total.round_out(ctx.prec.bits))
    }

    /// `int_a^b |F + offset + slope*y|^s dy` by splitting the absolute
    /// value into its two disjointly supported positive parts.
    pub fn integral_abs_affine(
        &self,
        a: &Rat,
        b: &Rat,
        aff: &AffinePart,
        s: &Rat,
        tol: &Rat,
    ) -> Result<CertifiedValue> {
        let half_tol = tol / rat_i(2);
        let plus = self.integral_plus_affine(a, b, Sign::Plus, aff, s, &half_tol)?;
        let minus = self.integral_plus_affine(a, b, Sign::Minus, &aff.neg(), s, &half_tol)?;
        Ok(plus.add(&minus))
    }

    /// `int_a^b F^s dy`.
    pub fn integral_pow(&self, a: &Rat, b: &Rat, s: &Rat, tol: &Rat) -> Result<CertifiedValue> {
        self.integral_plus_affine(a, b, Sign::Plus, &AffinePart::zero(), s, tol)
    }

    /// Independent route for `int_0^1 F^s dy`: explicit rank-by-rank
    /// accumulation with a geometric-domination remainder, no series
    /// closed forms involved.
    pub fn norm_pow_enumerated(&self, s: &Rat, ranks: u32) -> Result<CertifiedValue> {
        if ranks == 0 {
            return Err(Error::Validation("need at least one rank".into()));
        }
        let prec = self.scheme.precision();
        let s_int = int_exponent(s);
        let four_r = CertifiedValue::exact_int(4).pow(self.scheme.r(), prec)?;
        let three_r = CertifiedValue::exact_int(3).pow(self.scheme.r(), prec)?;
        let twelve_inv = four_r.mul(&three_r).recip()?;
        let excess = four_r.sub(&CertifiedValue::exact_int(2));

        let mut sum = CertifiedValue::zero();
        let mut mass = excess.mul(&twelve_inv); // 2^(k-1) v_k at k = 1
        let term_at = |k: u32, mass: &CertifiedValue| -> Result<CertifiedValue> {
            let ks = if let Some(si) = s_int {
                CertifiedValue::exact_int(k as i64).pow_int(si)?
            } else {
                gen_pow(&rat_i(k as i64), s, prec)?
            };
            Ok(mass.mul(&ks))
        };
        for k in 1..=ranks {
            sum = sum.add(&term_at(k, &mass)?);
            mass = mass.mul(&twelve_inv).mul_rat(&rat_i(2));
        }
        // remainder: term ratios beyond `ranks` are at most
        // 2 * ((ranks+1)/ranks)^s / 12^r
        let growth = CertifiedValue::exact(rat(ranks as i64 + 1, ranks as i64)).pow(s, prec)?;
        let rho_hi = growth.hi() * twelve_inv.hi() * rat_i(2);
        if rho_hi >= rat_i(1) {
            return Err(Error::Undecidable(
                "remainder ratio not certified below 1; increase ranks".into(),
            ));
        }
        let next = term_at(ranks + 1, &mass)?;
        let rem_hi = next.hi() / (rat_i(1) - rho_hi);
        let rem = CertifiedValue::from_bounds(Rat::zero(), rem_hi)?;
        Ok(sum.add(&rem).round_out(prec.bits))
    }
}

fn int_exponent(s: &Rat) -> Option<i64> {
    if s.is_integer() {
        s.to_integer().to_i64()
    } else {
        None
    }
}

struct EngineCtx {
    sign: Sign,
    aff: AffinePart,
    s: Rat,
    s_int: Option<i64>,
    prec: Precision,
    depth_cap: u32,
    quarter_r: CertifiedValue,
    twelve_inv: CertifiedValue,
    excess: CertifiedValue,
    mass_ratio: CertifiedValue,
}

impl EngineCtx {
    fn new(scheme: &Scheme, sign: Sign, aff: AffinePart, s: Rat) -> Result<Self> {
        let prec = scheme.precision();
        let four_r = CertifiedValue::exact_int(4).pow(scheme.r(), prec)?;
        let three_r = CertifiedValue::exact_int(3).pow(scheme.r(), prec)?;
        let twelve_inv = four_r.mul(&three_r).recip()?;
        let s_int = int_exponent(&s);
        Ok(EngineCtx {
            sign,
            aff,
            s_int,
            s,
            prec,
            depth_cap: scheme.depth_cap(),
            quarter_r: four_r.recip()?,
            excess: four_r.sub(&CertifiedValue::exact_int(2)),
            mass_ratio: twelve_inv.mul_rat(&rat_i(2)),
            twelve_inv,
        })
    }

    fn pos_pow(&self, v: &CertifiedValue) -> Result<CertifiedValue> {
        pos_pow(v, &self.s, self.s_int, self.prec)
    }

    /// Correction of a single core with value `k` over affine range `l`:
    /// `[sign*k + l]_+^s - [l]_+^s`.
    fn core_shift(&self, k: u32, l: &CertifiedValue) -> Result<CertifiedValue> {
        let kv = rat_i(k as i64);
        let shifted = match self.sign {
            Sign::Plus => l.add(&CertifiedValue::exact(kv)),
            Sign::Minus => l.sub(&CertifiedValue::exact(kv)),
        };
        Ok(self.pos_pow(&shifted)?.sub(&self.pos_pow(l)?))
    }

    /// Total core correction over a whole rank-`j` subtree on `[a_enc, b_enc]`.
    fn full_subtree(
        &self,
        j: u32,
        a_enc: &CertifiedValue,
        b_enc: &CertifiedValue,
        tol: &Rat,
    ) -> Result<CertifiedValue> {
        let scale = self.excess.mul_rat(&pow2(-(j as i64) - 1));
        if self.sign == Sign::Plus && self.aff.is_zero() {
            // pure power series: exact closed form when parameters allow
            let spec = SeriesSpec {
                power: self.s.clone(),
                ratio: self.mass_ratio.clone(),
                scale,
            };
            return sum_from(&spec, j as u64 + 1, tol, self.prec);
        }
        if self.aff.slope.is_zero()
            && self.s_int.is_some()
            && self.mass_ratio.is_exact()
            && self.excess.is_exact()
        {
            return self.subtree_constant_exact(j);
        }

        let l_range = self.aff.range_over(&a_enc.hull(b_enc));
        let mut sum = CertifiedValue::zero();
        // mass of rank-k cores inside the subtree, starting at k = j+1
        let mut mass = self
            .excess
            .mul(&self.twelve_inv.pow_int(j as i64 + 1)?)
            .mul_rat(&pow2(-(j as i64) - 1))
            .mul_rat(&pow2(j as i64 + 1));
        // (the two powers of two cancel: 2^(k-j-1) v_k at k = j+1 is just v_{j+1})
        for k in (j + 1)..=(j + SUBTREE_TERMS) {
            let shift = self.core_shift(k, &l_range)?;
            sum = sum.add(&shift.mul(&mass)).round_out(self.prec.bits + 64);
            mass = mass.mul(&self.mass_ratio);
        }
        let from = (j + SUBTREE_TERMS) as u64 + 1;
        let scale_tail = self.excess.mul_rat(&pow2(-(j as i64) - 1));
        let tail = match self.sign {
            Sign::Plus => {
                // each core shift is within [0, (k + Lmax)^s] and
                // (k + Lmax)^s <= (1 + Lmax)^s k^s for k >= 1
                let lmax = l_range.pos_part().hi().clone();
                let factor = gen_pow(&(lmax + rat_i(1)), &self.s, self.prec)?;
                let spec = SeriesSpec {
                    power: self.s.clone(),
                    ratio: self.mass_ratio.clone(),
                    scale: scale_tail,
                };
                let mass_tail = sum_from(&spec, from, tol, self.prec)?;
                CertifiedValue::from_bounds(Rat::zero(), factor.hi() * mass_tail.hi())?
            }
            Sign::Minus => {
                // shifts lie in [-(Lmax_+)^s, 0] and the plain mass tail
                // bounds the measure
                let lmax = l_range.pos_part();
                let lpow = self.pos_pow(&lmax)?;
                let spec = SeriesSpec {
                    power: Rat::zero(),
                    ratio: self.mass_ratio.clone(),
                    scale: scale_tail,
                };
                let mass_tail = sum_from(&spec, from, tol, self.prec)?;
                CertifiedValue::from_bounds(-(lpow.hi() * mass_tail.hi()), Rat::zero())?
            }
        };
        Ok(sum.add(&tail))
    }

    /// Exact subtree total for a constant affine part `c` and integer
    /// exponent: expand `(k + c)^s` binomially over exact power tails.
    fn subtree_constant_exact(&self, j: u32) -> Result<CertifiedValue> {
        let s = self
            .s_int
            .expect("checked by caller")
            .to_u32()
            .ok_or_else(|| Error::Domain("exponent too large".into()))?;
        let c = &self.aff.offset;
        let x = self.mass_ratio.lo().clone();
        let scale = self.excess.lo() * pow2(-(j as i64) - 1);
        let from = j as u64 + 1;
        let c_pos_pow = if c.is_positive() {
            rat_pow_int(c, s as i64)?
        } else {
            Rat::zero()
        };
        let mass_tail = crate::series::tail_exact(0, &x, from)?;
        let total = match self.sign {
            Sign::Plus => {
                // ranks with k + c > 0 contribute (k+c)^s, the rest 0
                let kstart = if c.is_negative() {
                    let min_k = (-c).ceil().to_integer().to_i64().unwrap_or(i64::MAX);
                    from.max(min_k.max(0) as u64)
                } else {
                    from
                };
                let mut binom_sum = Rat::zero();
                for i in 0..=s {
                    let coeff = Rat::from_integer(binomial(BigInt::from(s), BigInt::from(i)));
                    let c_pow = rat_pow_int(c, (s - i) as i64)?;
                    let tail = crate::series::tail_exact(i, &x, kstart)?;
                    binom_sum += coeff * c_pow * tail;
                }
                binom_sum - &c_pos_pow * &mass_tail
            }
            Sign::Minus => {
                // [c - k]_+ vanishes once k reaches c
                let mut pos_sum = Rat::zero();
                let mut k = from;
                let mut xk = rat_pow_int(&x, from as i64)?;
                while rat_i(k as i64) < *c {
                    let diff = c - rat_i(k as i64);
                    pos_sum += &xk * rat_pow_int(&diff, s as i64)?;
                    xk *= &x;
                    k += 1;
                }
                pos_sum - &c_pos_pow * &mass_tail
            }
        };
        Ok(CertifiedValue::exact(total * scale))
    }

    /// Core corrections of the rank-`j` segment `[a_enc, b_enc]`
    /// intersected with the query `[qa, qb]`.
    #[allow(clippy::too_many_arguments)]
    #[allow(clippy::too_many_arguments)]
    fn node(
        &self,
        j: u32,
        a_enc: &CertifiedValue,
        b_enc: &CertifiedValue,
        len: &CertifiedValue,
        core_len: &CertifiedValue,
        qa: &Rat,
        qb: &Rat,
        tol: &Rat,
    ) -> Result<CertifiedValue> {
        // certainly no overlap of positive measure
        if qb <= a_enc.lo() || qa >= b_enc.hi() {
            return Ok(CertifiedValue::zero());
        }
        let covered = qa <= a_enc.lo() && qb >= b_enc.hi();
        if covered {
            let full = self.full_subtree(j, a_enc, b_enc, tol)?;
            if self.aff.slope.is_zero() || full.width() <= *tol || j >= self.depth_cap {
                return Ok(full);
            }
        } else if j >= self.depth_cap {
            // partial overlap at the cap: the subtree total soundly
            // brackets whatever part the query actually meets
            let full = self.full_subtree(j, a_enc, b_enc, tol)?;
            return Ok(full.hull(&CertifiedValue::zero()));
        }

        let child_len = len.mul(&self.quarter_r);
        let rem_lo = a_enc.add(&child_len);
        let rem_hi = b_enc.sub(&child_len);
        let rank = j + 1;

        // clipped core contribution at this rank
        let center = rem_lo.add(&rem_hi).mul_rat(&rat(1, 2));
        let half_core = core_len.mul_rat(&rat(1, 2));
        let core_lo = center.sub(&half_core);
        let core_hi = center.add(&half_core);
        let clip_lo = core_lo.max_with(&CertifiedValue::exact(qa.clone()));
        let clip_hi = core_hi.min_with(&CertifiedValue::exact(qb.clone()));
        let clip_len = clip_hi
            .sub(&clip_lo)
            .pos_part()
            .min_with(&core_len.pos_part());
        let core_contrib = if !clip_len.hi().is_positive() {
            CertifiedValue::zero()
        } else if clip_lo.is_exact() && clip_hi.is_exact() {
            // exact core endpoints: integrate the shifted and unshifted
            // affine parts in closed form
            let shifted = AffinePart {
                offset: match self.sign {
                    Sign::Plus => &self.aff.offset + rat_i(rank as i64),
                    Sign::Minus => &self.aff.offset - rat_i(rank as i64),
                },
                slope: self.aff.slope.clone(),
            };
            let a = clip_lo.lo();
            let b = clip_hi.lo();
            let with_core = affine_plus_integral(&shifted, a, b, &self.s, self.s_int, self.prec)?;
            if self.aff.is_zero() {
                with_core
            } else {
                let without =
                    affine_plus_integral(&self.aff, a, b, &self.s, self.s_int, self.prec)?;
                with_core.sub(&without)
            }
        } else {
            let l_range = self.aff.range_over(&clip_lo.hull(&clip_hi));
            self.core_shift(rank, &l_range)?.mul(&clip_len)
        };

        let child_tol = tol / rat_i(2);
        let next_core = core_len.mul(&self.twelve_inv);
        let left = self.node(rank, a_enc, &rem_lo, &child_len, &next_core, qa, qb, &child_tol)?;
        let right = self.node(rank, &rem_hi, b_enc, &child_len, &next_core, qa, qb, &child_tol)?;
        Ok(core_contrib.add(&left).add(&right))
    }
}
