//! Absolute-continuity stress machinery for the step function on the
//! survivor set.
//!
//! A tagged collection is a finite family of nonoverlapping closed
//! intervals, each carrying a certified survivor point. Its AC sum is
//! `sum_i ((1/|I_i|) int_{I_i} |F|^s)^(1/s)`. For a tolerance `eps` the
//! selection rule picks the smallest rank `n` with
//! `3^(1/r) sum_{k>n} k (2/3)^k < eps` and the admissibility radius
//! `eta = (u_n - v_n)/2`; every admissible collection (total length
//! below `eta`) then satisfies a four-quantity bound chain ending in
//! that closed-form tail. [`chain_verify`] evaluates all four
//! quantities with certified arithmetic and re-checks each geometric
//! hypothesis the chain leans on, and [`adversarial_search`] hunts for
//! admissible collections with large AC sums.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_traits::{Signed, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::{
    compare, log2, pow2, rat, rat_i, rat_pow_int, rat_str, CertifiedValue, Precision, Rat, Verdict,
};
use crate::scheme::{DescentPath, Scheme, Side};
use crate::series::{self, SeriesSpec};
use crate::stepfn::StepFn;
use crate::{Error, Result};

/// How a tagged interval certifies its survivor point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagKind {
    /// Left endpoint of the interval removed from the path's segment.
    LeftEndpoint,
    /// Right endpoint of that removed interval.
    RightEndpoint,
    /// The path's segment left endpoint, the all-Left descent limit
    /// below it (the only way to tag 0).
    Limit,
}

/// One interval of a collection with its survivor-point certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTaggedInterval", into = "RawTaggedInterval")]
pub struct TaggedInterval {
    pub lo: Rat,
    pub hi: Rat,
    pub tag_path: DescentPath,
    pub tag_kind: TagKind,
}

#[derive(Serialize, Deserialize)]
struct RawTaggedInterval {
    interval: [String; 2],
    tag_path: DescentPath,
    tag_kind: TagKind,
}

impl TryFrom<RawTaggedInterval> for TaggedInterval {
    type Error = Error;

    fn try_from(raw: RawTaggedInterval) -> Result<Self> {
        Ok(TaggedInterval {
            lo: crate::scalar::parse_rat(&raw.interval[0])?,
            hi: crate::scalar::parse_rat(&raw.interval[1])?,
            tag_path: raw.tag_path,
            tag_kind: raw.tag_kind,
        })
    }
}

impl From<TaggedInterval> for RawTaggedInterval {
    fn from(t: TaggedInterval) -> Self {
        RawTaggedInterval {
            interval: [rat_str(&t.lo), rat_str(&t.hi)],
            tag_path: t.tag_path,
            tag_kind: t.tag_kind,
        }
    }
}

impl TaggedInterval {
    pub fn new(lo: Rat, hi: Rat, tag_path: DescentPath, tag_kind: TagKind) -> Self {
        TaggedInterval {
            lo,
            hi,
            tag_path,
            tag_kind,
        }
    }

    pub fn length(&self) -> Rat {
        &self.hi - &self.lo
    }

    /// Coordinate of the certified survivor point this interval is
    /// anchored at.
    pub fn tag_point(&self, scheme: &Scheme) -> Result<CertifiedValue> {
        match self.tag_kind {
            TagKind::LeftEndpoint => Ok(scheme.removed_for(&self.tag_path)?.lo),
            TagKind::RightEndpoint => Ok(scheme.removed_for(&self.tag_path)?.hi),
            TagKind::Limit => scheme.endpoint(&self.tag_path, Side::Left),
        }
    }

    fn validate(&self, scheme: &Scheme) -> Result<()> {
        if self.lo >= self.hi {
            return Err(Error::Validation(format!(
                "degenerate interval [{}, {}]",
                rat_str(&self.lo),
                rat_str(&self.hi)
            )));
        }
        if self.lo.is_negative() || self.hi > rat_i(1) {
            return Err(Error::Validation(format!(
                "interval [{}, {}] leaves [0, 1]",
                rat_str(&self.lo),
                rat_str(&self.hi)
            )));
        }
        let p = self.tag_point(scheme)?;
        if *p.hi() < self.lo || *p.lo() > self.hi {
            return Err(Error::Validation(format!(
                "tag point is outside [{}, {}]",
                rat_str(&self.lo),
                rat_str(&self.hi)
            )));
        }
        if !p.is_exact() && (*p.lo() < self.lo || *p.hi() > self.hi) {
            return Err(Error::Undecidable(
                "tag membership in the interval cannot be certified".into(),
            ));
        }
        Ok(())
    }
}

/// A validated family of nonoverlapping tagged intervals. Validation
/// happens once, against the scheme passed to the constructor; the
/// exponent of that scheme is remembered so later consumers can refuse
/// a collection built for a different construction.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct TaggedCollection {
    items: Vec<TaggedInterval>,
    #[serde(skip)]
    exponent: Option<Rat>,
}

impl TaggedCollection {
    pub fn new(items: Vec<TaggedInterval>, scheme: &Scheme) -> Result<Self> {
        for it in &items {
            it.validate(scheme)?;
        }
        let mut spans: Vec<(Rat, Rat)> = items
            .iter()
            .map(|it| (it.lo.clone(), it.hi.clone()))
            .collect();
        spans.sort();
        for w in spans.windows(2) {
            if w[1].0 < w[0].1 {
                return Err(Error::Validation(format!(
                    "intervals [{}, {}] and [{}, {}] overlap",
                    rat_str(&w[0].0),
                    rat_str(&w[0].1),
                    rat_str(&w[1].0),
                    rat_str(&w[1].1)
                )));
            }
        }
        Ok(TaggedCollection {
            items,
            exponent: Some(scheme.r().clone()),
        })
    }

    pub fn empty() -> Self {
        TaggedCollection {
            items: Vec::new(),
            exponent: None,
        }
    }

    pub fn items(&self) -> &[TaggedInterval] {
        &self.items
    }

    /// Exponent of the scheme the items were validated against, absent
    /// for the empty collection.
    pub fn exponent(&self) -> Option<&Rat> {
        self.exponent.as_ref()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn total_length(&self) -> Rat {
        self.items.iter().map(TaggedInterval::length).sum()
    }

    /// One JSON object per line, the collection interchange format.
    pub fn to_json_lines(&self) -> Result<String> {
        let mut out = String::new();
        for it in &self.items {
            let line = serde_json::to_string(it)?;
            let _ = writeln!(out, "{line}");
        }
        Ok(out)
    }

    pub fn from_json_lines(text: &str, scheme: &Scheme) -> Result<Self> {
        let mut items = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            items.push(serde_json::from_str::<TaggedInterval>(line)?);
        }
        Self::new(items, scheme)
    }
}

/// `sum_i ((1/|I_i|) int_{I_i} |F|^s)^(1/s)` as a certified enclosure.
pub fn ac_sum(f: &StepFn, coll: &TaggedCollection, s: &Rat, tol: &Rat) -> Result<CertifiedValue> {
    if *s < rat_i(1) {
        return Err(Error::Domain(format!(
            "mean exponent must be at least 1, got {}",
            rat_str(s)
        )));
    }
    for it in coll.items() {
        it.validate(f.scheme())?;
    }
    let prec = f.scheme().precision();
    let inv_s = rat_i(1) / s;
    let mut sum = CertifiedValue::zero();
    for it in coll.items() {
        let integral = f.integral_pow(&it.lo, &it.hi, s, tol)?;
        let mean = integral.mul_rat(&it.length().recip());
        sum = sum.add(&mean.pow_nonneg(&inv_s, prec)?);
    }
    Ok(sum)
}

/// One exactly evaluated `lhs <= rhs` instance of an inequality lemma.
#[derive(Clone, Debug, Serialize)]
pub struct LemmaInstance {
    #[serde(with = "crate::scalar::rat_serde")]
    pub lhs: Rat,
    #[serde(with = "crate::scalar::rat_serde")]
    pub rhs: Rat,
    pub holds: bool,
}

impl LemmaInstance {
    fn of(lhs: Rat, rhs: Rat) -> Self {
        let holds = lhs <= rhs;
        LemmaInstance { lhs, rhs, holds }
    }

    /// `rhs - lhs`, nonnegative exactly when the instance holds.
    pub fn margin(&self) -> Rat {
        &self.rhs - &self.lhs
    }
}

/// Root subadditivity `(sum_j a_j)^(1/s) <= sum_j a_j^(1/s)` for
/// positive terms and integer `s >= 1`, evaluated exactly by writing
/// each term as `a_j = c_j^s`: the claim becomes
/// `sum_j c_j^s <= (sum_j c_j)^s`, rational on both sides.
pub fn root_subadditivity(roots: &[Rat], s: u32) -> Result<LemmaInstance> {
    if s == 0 {
        return Err(Error::Domain("exponent must be at least 1".into()));
    }
    if roots.is_empty() {
        return Err(Error::Validation("need at least one term".into()));
    }
    let mut power_sum = Rat::zero();
    let mut root_sum = Rat::zero();
    for c in roots {
        if !c.is_positive() {
            return Err(Error::Validation(format!(
                "terms must be positive, got {}",
                rat_str(c)
            )));
        }
        power_sum += rat_pow_int(c, s as i64)?;
        root_sum += c;
    }
    Ok(LemmaInstance::of(power_sum, rat_pow_int(&root_sum, s as i64)?))
}

/// The sum-splitting step for ratios,
/// `(sum_j a_j) / (sum_j b_j) <= sum_j a_j / b_j`
/// for nonnegative numerators and positive denominators, exact.
pub fn ratio_sum_split(parts: &[(Rat, Rat)]) -> Result<LemmaInstance> {
    if parts.is_empty() {
        return Err(Error::Validation("need at least one term".into()));
    }
    let mut num = Rat::zero();
    let mut den = Rat::zero();
    let mut split = Rat::zero();
    for (a, b) in parts {
        if a.is_negative() {
            return Err(Error::Validation(format!(
                "numerators must be nonnegative, got {}",
                rat_str(a)
            )));
        }
        if !b.is_positive() {
            return Err(Error::Validation(format!(
                "denominators must be positive, got {}",
                rat_str(b)
            )));
        }
        num += a;
        den += b;
        split += a / b;
    }
    Ok(LemmaInstance::of(num / den, split))
}

/// Outcome of the rank selection for a continuity tolerance.
#[derive(Clone, Debug, Serialize)]
pub struct EtaSelection {
    pub n: u32,
    /// `(u_n - v_n)/2`, the admissible total length for collections.
    pub eta: CertifiedValue,
    /// The certified closed-form tail `3^(1/r) * 2 (n+3) (2/3)^n`.
    pub tail_bound: CertifiedValue,
}

/// Smallest rank `n` whose closed-form tail drops below `epsilon`,
/// together with the admissibility radius `eta`.
pub fn epsilon_to_eta(scheme: &Scheme, epsilon: &Rat) -> Result<EtaSelection> {
    if !epsilon.is_positive() {
        return Err(Error::Domain("tolerance must be positive".into()));
    }
    let prec = scheme.precision();
    let eps = CertifiedValue::exact(epsilon.clone());
    let mut n = 1u32;
    loop {
        let mut bits = prec.bits;
        let verdict = loop {
            let root = CertifiedValue::exact_int(3).pow(
                &(rat_i(1) / scheme.r()),
                Precision { bits, ..prec },
            )?;
            // exact tail of sum k (2/3)^k from n+1: 2 (n+3) (2/3)^n
            let tail = rat_i(2 * (n as i64 + 3)) * rat_pow_int(&rat(2, 3), n as i64)?;
            let bound = root.mul_rat(&tail);
            match compare(&bound, &eps) {
                Verdict::Overlapping if bits < prec.cap => {
                    bits = bits.saturating_mul(2).min(prec.cap);
                }
                other => break (other, bound),
            }
        };
        match verdict {
            (Verdict::CertainlyLess, bound) => {
                let u = scheme.removed_mass(n)?;
                let v = scheme.core_mass(n)?;
                let eta = u.sub(&v).mul_rat(&rat(1, 2));
                return Ok(EtaSelection {
                    n,
                    eta,
                    tail_bound: bound,
                });
            }
            (Verdict::CertainlyGreater, _) => {}
            (Verdict::Overlapping, _) => {
                return Err(Error::Undecidable(format!(
                    "tail bound at rank {n} straddles the tolerance at the precision cap"
                )));
            }
        }
        n += 1;
        if n > 100_000 {
            return Err(Error::Domain(
                "rank selection did not terminate within 100000 stages".into(),
            ));
        }
    }
}

/// One interval/core incidence evaluated explicitly.
#[derive(Clone, Debug, Serialize)]
pub struct PairRow {
    pub interval_index: usize,
    pub rank: u32,
    /// Path of the segment whose removed interval this core belongs to.
    pub segment_path: DescentPath,
    pub overlap: CertifiedValue,
    /// `|I cap u_k| > (u_k - v_k)/2`, certified.
    pub overlap_ok: bool,
    pub mean: CertifiedValue,
    /// `3 k^s / 3^(kr)`, the local-mean ceiling.
    pub mean_bound: CertifiedValue,
    pub mean_ok: bool,
    pub rooted: CertifiedValue,
}

/// A whole surviving segment swallowed by one interval; its infinite
/// subtree of cores is summed in closed form.
#[derive(Clone, Debug, Serialize)]
pub struct SubtreeRow {
    pub interval_index: usize,
    /// Rank of the covered segment; its cores start one rank deeper.
    pub segment_rank: u32,
    pub segment_path: DescentPath,
    pub mean_sum: CertifiedValue,
    pub root_sum: CertifiedValue,
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainChecks {
    /// No interval meets a core of rank at most `n`.
    pub no_low_rank_core: bool,
    /// Every explicit incidence satisfies the half-gap overlap bound.
    pub overlap_bounds: bool,
    /// Every explicit local mean stays below `3 k^s / 3^(kr)`.
    pub local_mean_bounds: bool,
    /// Incidence counts per rank stay below twice the segment count.
    pub counts_within_majorant: bool,
    /// `lhs <= middle1 <= middle2 <= closed_bound`, certified.
    pub ordered: bool,
}

/// The four quantities of the bound chain plus every hypothesis check.
#[derive(Clone, Debug, Serialize)]
pub struct ChainReport {
    pub rank: u32,
    #[serde(with = "crate::scalar::rat_serde")]
    pub exponent: Rat,
    pub eta: CertifiedValue,
    #[serde(with = "crate::scalar::rat_serde")]
    pub total_length: Rat,
    pub hypothesis_satisfied: bool,
    /// The AC sum of the collection.
    pub lhs: CertifiedValue,
    /// After the double-decker step: per-interval rooted sums of
    /// localized means.
    pub middle1: CertifiedValue,
    /// After root subadditivity: the flat sum of rooted localized means.
    pub middle2: CertifiedValue,
    /// `3^(1/s) sum_{k>n} k (2 * 3^(-r/s))^k`.
    pub closed_bound: CertifiedValue,
    pub truncated: bool,
    pub pairs: Vec<PairRow>,
    pub subtrees: Vec<SubtreeRow>,
    pub checks: ChainChecks,
    /// Hypothesis satisfied and every check passed.
    pub certified: bool,
}

/// Precomputed per-(n, s) context shared across chain evaluations.
pub struct ChainContext {
    n: u32,
    s: Rat,
    inv_s: Rat,
    prec: Precision,
    depth_cap: u32,
    eta: CertifiedValue,
    quarter_r: CertifiedValue,
    twelfth_r: CertifiedValue,
    three_r: CertifiedValue,
    mean_ratio: CertifiedValue,
    root_ratio: CertifiedValue,
    closed_bound: CertifiedValue,
    excess: CertifiedValue,
    series_tol: Rat,
    subtree_cache: RefCell<BTreeMap<u32, (CertifiedValue, CertifiedValue)>>,
    segment_integral_cache: RefCell<BTreeMap<u32, CertifiedValue>>,
}

impl ChainContext {
    pub fn new(scheme: &Scheme, n: u32, s: &Rat) -> Result<Self> {
        if *s < rat_i(1) {
            return Err(Error::Domain(format!(
                "mean exponent must be at least 1, got {}",
                rat_str(s)
            )));
        }
        if n == 0 {
            return Err(Error::Domain("chain rank must be at least 1".into()));
        }
        let prec = scheme.precision();
        let r = scheme.r();
        let four_r = CertifiedValue::exact_int(4).pow(r, prec)?;
        let three_r = CertifiedValue::exact_int(3).pow(r, prec)?;
        let series_tol = pow2(-100);
        let root_ratio = series::star_ratio(r, s, prec)?;
        let closed_spec = series::star_majorant(r, s, prec)?;
        let closed_bound = series::sum_from(&closed_spec, n as u64 + 1, &series_tol, prec)?;
        let u = scheme.removed_mass(n)?;
        let v = scheme.core_mass(n)?;
        let mean_ratio = CertifiedValue::exact_int(2).div(&three_r)?;
        let excess = four_r.sub(&CertifiedValue::exact_int(2));
        let twelfth_r = four_r.mul(&three_r).recip()?;
        Ok(ChainContext {
            n,
            s: s.clone(),
            inv_s: rat_i(1) / s,
            prec,
            depth_cap: scheme.depth_cap(),
            eta: u.sub(&v).mul_rat(&rat(1, 2)),
            quarter_r: four_r.recip()?,
            twelfth_r,
            three_r,
            mean_ratio,
            root_ratio,
            closed_bound,
            excess,
            series_tol,
            subtree_cache: RefCell::new(BTreeMap::new()),
            segment_integral_cache: RefCell::new(BTreeMap::new()),
        })
    }

    pub fn eta(&self) -> &CertifiedValue {
        &self.eta
    }

    pub fn closed_bound(&self) -> &CertifiedValue {
        &self.closed_bound
    }

    /// Closed-form sums over the full core subtree below a covered
    /// segment of rank `j`: localized means and their roots. Cached per
    /// rank; chain evaluations revisit the same few ranks constantly.
    fn subtree_sums(&self, j: u32) -> Result<(CertifiedValue, CertifiedValue)> {
        if let Some(hit) = self.subtree_cache.borrow().get(&j) {
            return Ok(hit.clone());
        }
        let scale = CertifiedValue::exact(pow2(-(j as i64) - 1));
        let mean_spec = SeriesSpec {
            power: self.s.clone(),
            ratio: self.mean_ratio.clone(),
            scale: scale.clone(),
        };
        let root_spec = SeriesSpec {
            power: rat_i(1),
            ratio: self.root_ratio.clone(),
            scale,
        };
        let means = series::sum_from(&mean_spec, j as u64 + 1, &self.series_tol, self.prec)?;
        let roots = series::sum_from(&root_spec, j as u64 + 1, &self.series_tol, self.prec)?;
        self.subtree_cache
            .borrow_mut()
            .insert(j, (means.clone(), roots.clone()));
        Ok((means, roots))
    }

    /// `int |F|^s` over one full rank-`j` segment. Every rank-`j`
    /// segment carries an identical copy of the deeper core structure,
    /// so the value depends on the rank alone: a rank-`k > j` core has
    /// length `(4^r - 2) 12^(-rk)` and the segment holds `2^(k-j-1)`
    /// of them, giving
    /// `(4^r - 2) 2^(-j-1) sum_{k>j} k^s (2 * 12^(-r))^k`.
    fn segment_integral(&self, j: u32) -> Result<CertifiedValue> {
        if let Some(hit) = self.segment_integral_cache.borrow().get(&j) {
            return Ok(hit.clone());
        }
        let spec = SeriesSpec {
            power: self.s.clone(),
            ratio: CertifiedValue::exact_int(2).mul(&self.twelfth_r),
            scale: self.excess.mul_rat(&pow2(-(j as i64) - 1)),
        };
        let value = series::sum_from(&spec, j as u64 + 1, &self.series_tol, self.prec)?;
        self.segment_integral_cache
            .borrow_mut()
            .insert(j, value.clone());
        Ok(value)
    }

    #[allow(clippy::too_many_arguments)]
    fn walk(
        &self,
        idx: usize,
        c: &Rat,
        d: &Rat,
        path: &mut DescentPath,
        seg_lo: &CertifiedValue,
        seg_hi: &CertifiedValue,
        child_len: &CertifiedValue,
        core_half: &CertifiedValue,
        acc: &mut Accum,
    ) -> Result<()> {
        // prune certainly-disjoint segments
        if let Some(ord) = rat_vs(d, seg_lo) {
            if ord != Ordering::Greater {
                return Ok(());
            }
        }
        if let Some(ord) = rat_vs(c, seg_hi) {
            if ord != Ordering::Less {
                return Ok(());
            }
        }
        let j = path.len();
        let covered = matches!(rat_vs(c, seg_lo), Some(Ordering::Less) | Some(Ordering::Equal))
            && matches!(rat_vs(d, seg_hi), Some(Ordering::Greater) | Some(Ordering::Equal));
        if covered {
            if j < self.n {
                acc.low_rank_hit = true;
            }
            let (means, roots) = self.subtree_sums(j)?;
            acc.mean_fin = acc.mean_fin.add(&means);
            acc.root_fin = acc.root_fin.add(&roots);
            acc.int_fin = acc.int_fin.add(&self.segment_integral(j)?);
            acc.subtree_weight += pow2(-(j as i64) - 1);
            acc.subtrees.push(SubtreeRow {
                interval_index: idx,
                segment_rank: j,
                segment_path: path.clone(),
                mean_sum: means,
                root_sum: roots,
            });
            return Ok(());
        }
        if j >= self.depth_cap {
            let (means, roots) = self.subtree_sums(j)?;
            acc.mean_tail += means.hi();
            acc.root_tail += roots.hi();
            acc.int_tail += self.segment_integral(j)?.hi();
            acc.truncated = true;
            return Ok(());
        }

        let q = j + 1;
        let g_lo = seg_lo.add(child_len);
        let g_hi = seg_hi.sub(child_len);
        let center = g_lo.add(&g_hi).mul_rat(&rat(1, 2));
        let core_lo = center.sub(core_half);
        let core_hi = center.add(core_half);

        let meets_core = if certainly_misses(c, d, &core_lo, &core_hi) {
            false
        } else if rat_vs(c, &core_hi) == Some(Ordering::Less)
            && rat_vs(d, &core_lo) == Some(Ordering::Greater)
        {
            true
        } else {
            return Err(Error::Undecidable(format!(
                "cannot certify whether [{}, {}] meets the rank-{q} core",
                rat_str(c),
                rat_str(d)
            )));
        };

        if meets_core {
            if q <= self.n {
                acc.low_rank_hit = true;
            }
            let a = CertifiedValue::exact(c.clone()).max_with(&g_lo);
            let b = CertifiedValue::exact(d.clone()).min_with(&g_hi);
            let overlap = b.sub(&a);
            let cov_lo = CertifiedValue::exact(c.clone()).max_with(&core_lo);
            let cov_hi = CertifiedValue::exact(d.clone()).min_with(&core_hi);
            let core_cov = cov_hi.sub(&cov_lo).pos_part();
            let q_s = CertifiedValue::exact_int(q as i64).pow(&self.s, self.prec)?;
            let weighted = q_s.mul(&core_cov);
            acc.int_fin = acc.int_fin.add(&weighted);
            let mean = weighted.div(&overlap)?;
            let rooted = mean.pow_nonneg(&self.inv_s, self.prec)?;
            let mean_bound = q_s
                .mul_rat(&rat_i(3))
                .div(&self.three_r.pow_int(q as i64)?)?;
            // u_q - v_q = 2 * child_len_next gap... derive from lengths:
            let u_q = g_hi.sub(&g_lo);
            let v_q = core_hi.sub(&core_lo);
            let half_gap = u_q.sub(&v_q).mul_rat(&rat(1, 2));
            let overlap_ok = matches!(compare(&half_gap, &overlap), Verdict::CertainlyLess);
            let mean_ok = mean.hi() <= mean_bound.lo();
            if !overlap_ok {
                acc.overlap_ok = false;
            }
            if !mean_ok {
                acc.mean_ok = false;
            }
            acc.mean_fin = acc.mean_fin.add(&mean);
            acc.root_fin = acc.root_fin.add(&rooted);
            *acc.counts.entry(q).or_insert(0) += 1;
            acc.pairs.push(PairRow {
                interval_index: idx,
                rank: q,
                segment_path: path.clone(),
                overlap,
                overlap_ok,
                mean,
                mean_bound,
                mean_ok,
                rooted,
            });
        }

        let next_child = child_len.mul(&self.quarter_r);
        let next_core = core_half.mul(&self.twelfth_r);
        path.push(Side::Left);
        self.walk(idx, c, d, path, seg_lo, &g_lo, &next_child, &next_core, acc)?;
        path.pop();
        path.push(Side::Right);
        self.walk(idx, c, d, path, &g_hi, seg_hi, &next_child, &next_core, acc)?;
        path.pop();
        Ok(())
    }

    /// Evaluates the full chain for one collection. Item admissibility
    /// (tags in the survivor set, disjointness) is the collection type's
    /// own construction invariant and is not rechecked here; only the
    /// recorded exponent is compared against the step function's.
    pub fn verify(&self, f: &StepFn, coll: &TaggedCollection) -> Result<ChainReport> {
        if let Some(r) = coll.exponent() {
            if r != f.scheme().r() {
                return Err(Error::Validation(format!(
                    "collection was validated for exponent {}, step function has {}",
                    rat_str(r),
                    rat_str(f.scheme().r())
                )));
            }
        }
        let total_length = coll.total_length();
        let hypothesis_satisfied = matches!(
            compare(
                &CertifiedValue::exact(total_length.clone()),
                &self.eta
            ),
            Verdict::CertainlyLess
        );

        let mut lhs = CertifiedValue::zero();
        let mut middle1 = CertifiedValue::zero();
        let mut root_fin = CertifiedValue::zero();
        let mut root_tail = Rat::zero();
        let mut pairs = Vec::new();
        let mut subtrees = Vec::new();
        let mut low_rank_hit = false;
        let mut overlap_ok = true;
        let mut mean_ok = true;
        let mut counts_ok = true;
        let mut truncated = false;

        for (idx, it) in coll.items().iter().enumerate() {
            let mut acc = Accum::new();
            let mut path = DescentPath::root();
            let core_half0 = self.core_half_at_root()?;
            self.walk(
                idx,
                &it.lo,
                &it.hi,
                &mut path,
                &CertifiedValue::zero(),
                &CertifiedValue::one(),
                &self.quarter_r,
                &core_half0,
                &mut acc,
            )?;

            // The walk hits every core meeting the interval exactly once:
            // straddled cores appear as explicit overlaps, cores inside a
            // covered segment are summed by the per-rank closed form, so
            // `int |F|^s` assembles from the walk with no second descent.
            let integral = acc
                .int_fin
                .add(&CertifiedValue::from_bounds(Rat::zero(), acc.int_tail.clone())?);
            let lhs_i = integral
                .mul_rat(&it.length().recip())
                .pow_nonneg(&self.inv_s, self.prec)?;
            lhs = lhs.add(&lhs_i);

            let mean_total = acc
                .mean_fin
                .add(&CertifiedValue::from_bounds(Rat::zero(), acc.mean_tail.clone())?);
            middle1 = middle1.add(&mean_total.pow_nonneg(&self.inv_s, self.prec)?);

            root_fin = root_fin.add(&acc.root_fin);
            root_tail += &acc.root_tail;

            // per-rank incidence majorant: explicit + covered <= 2 * 2^(k-1)
            for (&q, &cnt) in &acc.counts {
                let lhs_count = rat_i(cnt as i64) * pow2(-(q as i64)) + &acc.subtree_weight;
                if lhs_count > rat_i(1) {
                    counts_ok = false;
                }
            }
            if acc.counts.is_empty() && acc.subtree_weight > rat_i(1) {
                counts_ok = false;
            }

            low_rank_hit |= acc.low_rank_hit;
            overlap_ok &= acc.overlap_ok;
            mean_ok &= acc.mean_ok;
            truncated |= acc.truncated;
            pairs.extend(acc.pairs);
            subtrees.extend(acc.subtrees);
        }

        let middle2 = root_fin.add(&CertifiedValue::from_bounds(Rat::zero(), root_tail)?);
        let ordered = lhs.hi() <= middle1.lo()
            && middle1.hi() <= middle2.lo()
            && middle2.hi() <= self.closed_bound.lo();
        let checks = ChainChecks {
            no_low_rank_core: !low_rank_hit,
            overlap_bounds: overlap_ok,
            local_mean_bounds: mean_ok,
            counts_within_majorant: counts_ok,
            ordered,
        };
        let certified = hypothesis_satisfied
            && checks.no_low_rank_core
            && checks.overlap_bounds
            && checks.local_mean_bounds
            && checks.counts_within_majorant
            && checks.ordered;
        Ok(ChainReport {
            rank: self.n,
            exponent: self.s.clone(),
            eta: self.eta.clone(),
            total_length,
            hypothesis_satisfied,
            lhs,
            middle1,
            middle2,
            closed_bound: self.closed_bound.clone(),
            truncated,
            pairs,
            subtrees,
            checks,
            certified,
        })
    }

    fn core_half_at_root(&self) -> Result<CertifiedValue> {
        // v_1 / 2 = (4^r - 2) / (2 * 12^r)
        let four_r = self.quarter_r.recip()?;
        let excess = four_r.sub(&CertifiedValue::exact_int(2));
        Ok(excess.mul(&self.twelfth_r).mul_rat(&rat(1, 2)))
    }
}

fn rat_vs(x: &Rat, v: &CertifiedValue) -> Option<Ordering> {
    if x < v.lo() {
        Some(Ordering::Less)
    } else if x > v.hi() {
        Some(Ordering::Greater)
    } else if v.is_exact() {
        Some(Ordering::Equal)
    } else {
        None
    }
}

fn certainly_misses(c: &Rat, d: &Rat, core_lo: &CertifiedValue, core_hi: &CertifiedValue) -> bool {
    matches!(rat_vs(c, core_hi), Some(Ordering::Greater) | Some(Ordering::Equal))
        || matches!(rat_vs(d, core_lo), Some(Ordering::Less) | Some(Ordering::Equal))
}

struct Accum {
    mean_fin: CertifiedValue,
    mean_tail: Rat,
    root_fin: CertifiedValue,
    root_tail: Rat,
    int_fin: CertifiedValue,
    int_tail: Rat,
    subtree_weight: Rat,
    counts: BTreeMap<u32, u64>,
    pairs: Vec<PairRow>,
    subtrees: Vec<SubtreeRow>,
    low_rank_hit: bool,
    overlap_ok: bool,
    mean_ok: bool,
    truncated: bool,
}

impl Accum {
    fn new() -> Self {
        Accum {
            mean_fin: CertifiedValue::zero(),
            mean_tail: Rat::zero(),
            root_fin: CertifiedValue::zero(),
            root_tail: Rat::zero(),
            int_fin: CertifiedValue::zero(),
            int_tail: Rat::zero(),
            subtree_weight: Rat::zero(),
            counts: BTreeMap::new(),
            pairs: Vec::new(),
            subtrees: Vec::new(),
            low_rank_hit: false,
            overlap_ok: true,
            mean_ok: true,
            truncated: false,
        }
    }
}

/// Full chain verification for one collection at rank `n`, exponent `s`.
pub fn chain_verify(
    f: &StepFn,
    coll: &TaggedCollection,
    n: u32,
    s: &Rat,
) -> Result<ChainReport> {
    let ctx = ChainContext::new(f.scheme(), n, s)?;
    ctx.verify(f, coll)
}

/// Outcome of the seeded search for large-AC-sum collections.
#[derive(Clone, Debug, Serialize)]
pub struct SearchReport {
    pub evaluated: u64,
    pub best: TaggedCollection,
    pub best_sum: CertifiedValue,
    /// Largest upper enclosure endpoint over every evaluated AC sum.
    #[serde(with = "crate::scalar::rat_serde")]
    pub max_upper: Rat,
    pub all_chains_certified: bool,
    pub chains_failed: u64,
    pub best_report: ChainReport,
}

/// Deterministic randomized search over admissible collections
/// (total length below `eta`, every interval anchored at a certified
/// survivor point). Candidates concentrate around removed-interval
/// endpoints a few ranks below `n`, the profitable shape for the chain.
pub fn adversarial_search(
    f: &StepFn,
    n: u32,
    s: &Rat,
    budget: u64,
    seed: u64,
) -> Result<SearchReport> {
    if budget == 0 {
        return Err(Error::Validation("search budget must be positive".into()));
    }
    let scheme = f.scheme();
    let ctx = ChainContext::new(scheme, n, s)?;
    let eta_lo = ctx.eta.lo().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut best: Option<(TaggedCollection, CertifiedValue, ChainReport)> = None;
    let mut max_upper = Rat::zero();
    let mut chains_failed = 0u64;

    for _ in 0..budget {
        let coll = random_collection(scheme, n, &eta_lo, &mut rng)?;
        let report = ctx.verify(f, &coll)?;
        let sum = report.lhs.clone();
        if *sum.hi() > max_upper {
            max_upper = sum.hi().clone();
        }
        if !report.certified {
            chains_failed += 1;
        }
        let better = match &best {
            None => true,
            Some((_, cur, _)) => {
                sum.lo() > cur.lo() || (sum.lo() == cur.lo() && sum.hi() > cur.hi())
            }
        };
        if better {
            best = Some((coll, sum, report));
        }
    }
    let (best, best_sum, best_report) = best.expect("budget is positive");
    Ok(SearchReport {
        evaluated: budget,
        best,
        best_sum,
        max_upper,
        all_chains_certified: chains_failed == 0,
        chains_failed,
        best_report,
    })
}

/// One random admissible candidate: up to three nonoverlapping
/// intervals anchored at survivor points near ranks `n+1 .. n+6`.
fn random_collection(
    scheme: &Scheme,
    n: u32,
    eta_lo: &Rat,
    rng: &mut ChaCha8Rng,
) -> Result<TaggedCollection> {
    let m = 1 + (rng.next_u32() % 3);
    // total length in [eta/4, eta/2], a dyadic multiple of eta
    let frac = rat(((rng.next_u32() >> 13) + (1 << 19)) as i64, 1 << 21);
    let total = eta_lo * frac;
    let per = &total / rat_i(m as i64);

    let mut items: Vec<TaggedInterval> = Vec::new();
    let mut spans: Vec<(Rat, Rat)> = Vec::new();
    for _ in 0..m {
        let k = n + 1 + (rng.next_u32() % 6);
        let mut bits = rng.next_u64();
        let mut sides = Vec::with_capacity(k as usize - 1);
        for _ in 0..(k - 1) {
            sides.push(if bits & 1 == 0 { Side::Left } else { Side::Right });
            bits >>= 1;
        }
        let path = DescentPath::from_sides(sides);
        let kind = match rng.next_u32() % 3 {
            0 => TagKind::LeftEndpoint,
            1 => TagKind::RightEndpoint,
            _ => TagKind::Limit,
        };
        let anchor = match kind {
            TagKind::LeftEndpoint => scheme.removed_for(&path)?.lo,
            TagKind::RightEndpoint => scheme.removed_for(&path)?.hi,
            TagKind::Limit => scheme.endpoint(&path, Side::Left)?,
        };
        if !anchor.is_exact() {
            continue;
        }
        let p = anchor.lo().clone();
        let (lo, hi) = if kind == TagKind::RightEndpoint {
            ((&p - &per).max(Rat::zero()), p)
        } else {
            (p.clone(), (&p + &per).min(rat_i(1)))
        };
        if lo >= hi {
            continue;
        }
        let clash = spans.iter().any(|(a, b)| lo < *b && hi > *a);
        if clash {
            continue;
        }
        spans.push((lo.clone(), hi.clone()));
        items.push(TaggedInterval::new(lo, hi, path, kind));
    }
    TaggedCollection::new(items, scheme)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ThresholdVerdict {
    Convergent,
    Divergent,
    /// The term-ratio enclosure straddles 1 at the precision cap.
    Critical,
}

/// Convergence probe for the bound-chain tail at mean exponent `s`.
#[derive(Clone, Debug, Serialize)]
pub struct ThresholdReport {
    #[serde(with = "crate::scalar::rat_serde")]
    pub s: Rat,
    /// `r * log2(3)`, the exponent where the term ratio crosses 1.
    pub s_star: CertifiedValue,
    /// `2 * 3^(-r/s)`.
    pub ratio_limit: CertifiedValue,
    pub verdict: ThresholdVerdict,
}

/// Where the chain's closed-form tail stops converging: the term ratio
/// `2 * 3^(-r/s)` crosses 1 exactly at `s = r log2(3)`.
pub fn acs_threshold(scheme: &Scheme, s: &Rat) -> Result<ThresholdReport> {
    if *s < rat_i(1) {
        return Err(Error::Domain(format!(
            "mean exponent must be at least 1, got {}",
            rat_str(s)
        )));
    }
    let prec = scheme.precision();
    let s_star = log2(&rat_i(3), prec.bits)?.mul_rat(scheme.r());
    let one = CertifiedValue::one();
    let mut bits = prec.bits;
    let (ratio_limit, verdict) = loop {
        let ratio = series::star_ratio(scheme.r(), s, Precision { bits, ..prec })?;
        match compare(&ratio, &one) {
            Verdict::CertainlyLess => break (ratio, ThresholdVerdict::Convergent),
            Verdict::CertainlyGreater => break (ratio, ThresholdVerdict::Divergent),
            Verdict::Overlapping if bits < prec.cap => {
                bits = bits.saturating_mul(2).min(prec.cap);
            }
            Verdict::Overlapping => break (ratio, ThresholdVerdict::Critical),
        }
    };
    Ok(ThresholdReport {
        s: s.clone(),
        s_star,
        ratio_limit,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::parse_rat;

    fn stepfn(r: i64) -> StepFn {
        StepFn::new(Scheme::with_default_depth(rat_i(r), Precision::default()).unwrap())
    }

    fn tol() -> Rat {
        pow2(-80)
    }

    #[test]
    fn tagged_interval_serde_round_trip() {
        let it = TaggedInterval::new(
            rat(1, 4),
            rat(3, 4),
            DescentPath::root(),
            TagKind::LeftEndpoint,
        );
        let json = serde_json::to_string(&it).unwrap();
        assert_eq!(
            json,
            r#"{"interval":["1/4","3/4"],"tag_path":"","tag_kind":"left_endpoint"}"#
        );
        let back: TaggedInterval = serde_json::from_str(&json).unwrap();
        assert_eq!(back, it);

        let deep: TaggedInterval = serde_json::from_str(
            r#"{"interval":["0/1","1/64"],"tag_path":"LL","tag_kind":"limit"}"#,
        )
        .unwrap();
        assert_eq!(deep.tag_path.to_string(), "LL");
        assert!(serde_json::from_str::<TaggedInterval>(
            r#"{"interval":["0/1","1/2"],"tag_path":"LX","tag_kind":"limit"}"#
        )
        .is_err());
    }

    #[test]
    fn collection_validation() {
        let f = stepfn(1);
        let s = f.scheme();
        // tag 1/4 inside [1/4, 3/4]: fine
        let ok = TaggedInterval::new(rat(1, 4), rat(3, 4), DescentPath::root(), TagKind::LeftEndpoint);
        assert!(TaggedCollection::new(vec![ok.clone()], s).is_ok());
        // tag 1/4 outside [1/2, 3/4]: rejected
        let bad = TaggedInterval::new(rat(1, 2), rat(3, 4), DescentPath::root(), TagKind::LeftEndpoint);
        assert!(TaggedCollection::new(vec![bad], s).is_err());
        // overlapping intervals rejected
        let second = TaggedInterval::new(rat(1, 2), rat(7, 8), DescentPath::root(), TagKind::RightEndpoint);
        assert!(TaggedCollection::new(vec![ok.clone(), second], s).is_err());
        // sharing a single endpoint is allowed
        let third = TaggedInterval::new(rat(3, 4), rat(7, 8), DescentPath::root(), TagKind::RightEndpoint);
        assert!(TaggedCollection::new(vec![ok, third], s).is_ok());
        // degenerate / escaping intervals
        let degen = TaggedInterval::new(rat(1, 4), rat(1, 4), DescentPath::root(), TagKind::LeftEndpoint);
        assert!(TaggedCollection::new(vec![degen], s).is_err());
    }

    #[test]
    fn json_lines_round_trip() {
        let f = stepfn(1);
        let coll = TaggedCollection::new(
            vec![
                TaggedInterval::new(rat_i(0), rat(1, 128), DescentPath::root(), TagKind::Limit),
                TaggedInterval::new(rat(1, 4), rat(3, 4), DescentPath::root(), TagKind::LeftEndpoint),
            ],
            f.scheme(),
        )
        .unwrap();
        let text = coll.to_json_lines().unwrap();
        assert_eq!(text.lines().count(), 2);
        let back = TaggedCollection::from_json_lines(&text, f.scheme()).unwrap();
        assert_eq!(back, coll);
    }

    #[test]
    fn ac_sum_examples() {
        let f = stepfn(1);
        let empty = TaggedCollection::empty();
        let zero = ac_sum(&f, &empty, &rat_i(1), &tol()).unwrap();
        assert!(zero.is_exact());
        assert!(zero.lo().is_zero());

        // [1/4, 3/4] captures the whole rank-1 core: mean = (1/6)/(1/2)
        let coll = TaggedCollection::new(
            vec![TaggedInterval::new(rat(1, 4), rat(3, 4), DescentPath::root(), TagKind::LeftEndpoint)],
            f.scheme(),
        )
        .unwrap();
        let s = ac_sum(&f, &coll, &rat_i(1), &tol()).unwrap();
        assert!(s.is_exact());
        assert_eq!(*s.lo(), rat(1, 3));

        // [0, 1/128] stops exactly at the rank-4 core midpoint:
        // mass = 2^-4 sum_{k>4} k/6^k + 4 * (v_4/2) = 63/259200,
        // mean = 128 * 7/28800 = 7/225
        let coll = TaggedCollection::new(
            vec![TaggedInterval::new(rat_i(0), rat(1, 128), DescentPath::root(), TagKind::Limit)],
            f.scheme(),
        )
        .unwrap();
        let s = ac_sum(&f, &coll, &rat_i(1), &tol()).unwrap();
        assert!(s.is_exact());
        assert_eq!(*s.lo(), rat(7, 225));
    }

    #[test]
    fn eta_selection_r1() {
        let f = stepfn(1);
        let sel = epsilon_to_eta(f.scheme(), &rat(1, 10)).unwrap();
        assert_eq!(sel.n, 18);
        let u = f.scheme().removed_mass(18).unwrap();
        let v = f.scheme().core_mass(18).unwrap();
        assert_eq!(sel.eta.lo(), u.sub(&v).mul_rat(&rat(1, 2)).lo());
        assert!(sel.tail_bound.is_exact());
        assert!(*sel.tail_bound.lo() < rat(1, 10));

        // a huge tolerance still needs rank 4: the rank-1..3 tails are
        // 16, 40/3, 32/3, all above 10
        let sel = epsilon_to_eta(f.scheme(), &rat_i(10)).unwrap();
        assert_eq!(sel.n, 4);
        // the eta formula at rank 1 would give (1/2 - 1/6)/2 = 1/6
        let u1 = f.scheme().removed_mass(1).unwrap();
        let v1 = f.scheme().core_mass(1).unwrap();
        assert_eq!(*u1.sub(&v1).mul_rat(&rat(1, 2)).lo(), rat(1, 6));
    }

    #[test]
    fn eta_selection_r2_needs_fewer_ranks() {
        let f = stepfn(2);
        let sel = epsilon_to_eta(f.scheme(), &rat(1, 10)).unwrap();
        assert_eq!(sel.n, 17);
        assert!(sel.n <= 18);
    }

    #[test]
    fn chain_empty_collection() {
        let f = stepfn(1);
        let rep = chain_verify(&f, &TaggedCollection::empty(), 18, &rat_i(1)).unwrap();
        assert!(rep.hypothesis_satisfied);
        assert!(rep.certified);
        assert!(rep.lhs.lo().is_zero() && rep.lhs.is_exact());
        assert!(rep.middle1.lo().is_zero());
        assert!(rep.middle2.lo().is_zero());
        assert!(*rep.closed_bound.lo() > Rat::zero());
        assert!(!rep.truncated);
    }

    #[test]
    fn chain_tiny_interval_at_zero() {
        let f = stepfn(1);
        let sel = epsilon_to_eta(f.scheme(), &rat(1, 10)).unwrap();
        let half_eta = sel.eta.lo() / rat_i(2);
        let coll = TaggedCollection::new(
            vec![TaggedInterval::new(Rat::zero(), half_eta, DescentPath::root(), TagKind::Limit)],
            f.scheme(),
        )
        .unwrap();
        let rep = chain_verify(&f, &coll, sel.n, &rat_i(1)).unwrap();
        assert!(rep.hypothesis_satisfied);
        assert!(rep.checks.no_low_rank_core);
        assert!(rep.checks.overlap_bounds);
        assert!(rep.checks.local_mean_bounds);
        assert!(rep.checks.counts_within_majorant);
        assert!(rep.checks.ordered, "chain not ordered: {rep:?}");
        assert!(rep.certified);
        // strictly below the closed bound, which itself sits below 1/10
        assert!(rep.lhs.hi() < rep.closed_bound.lo());
        assert!(*rep.closed_bound.hi() < rat(1, 10));
        // the single interval swallows the all-Left rank-19 segment
        assert!(rep.subtrees.iter().any(|s| s.segment_rank == 19));
    }

    #[test]
    fn chain_hypothesis_violation_reported() {
        let f = stepfn(1);
        let coll = TaggedCollection::new(
            vec![TaggedInterval::new(rat(1, 4), rat(3, 4), DescentPath::root(), TagKind::LeftEndpoint)],
            f.scheme(),
        )
        .unwrap();
        let rep = chain_verify(&f, &coll, 18, &rat_i(1)).unwrap();
        assert!(!rep.hypothesis_satisfied);
        assert!(!rep.certified);
        // the rank-1 core is met, far below rank 18
        assert!(!rep.checks.no_low_rank_core);
        assert_eq!(rep.pairs[0].rank, 1);
    }

    #[test]
    fn chain_single_pair_is_tight() {
        // an interval from the removed endpoint into the core: the
        // double-decker and subadditivity steps are exact equalities
        let f = stepfn(1);
        let n = 3u32;
        // rank-4 removed interval under LLL: [1/256, 3/256], core
        // center 1/128; take [1/256, 1/128]
        let coll = TaggedCollection::new(
            vec![TaggedInterval::new(
                rat(1, 256),
                rat(1, 128),
                "LLL".parse().unwrap(),
                TagKind::LeftEndpoint,
            )],
            f.scheme(),
        )
        .unwrap();
        let rep = chain_verify(&f, &coll, n, &rat_i(1)).unwrap();
        assert!(rep.hypothesis_satisfied);
        assert_eq!(rep.pairs.len(), 1);
        assert!(rep.subtrees.is_empty());
        assert!(rep.lhs.is_exact());
        assert_eq!(rep.lhs.lo(), rep.middle1.lo());
        assert_eq!(rep.middle1.lo(), rep.middle2.lo());
        assert!(rep.certified);
    }

    #[test]
    fn chain_diverges_for_large_exponent() {
        let f = stepfn(1);
        let err = chain_verify(&f, &TaggedCollection::empty(), 18, &rat_i(2));
        assert!(matches!(err, Err(Error::Divergent(_))));
    }

    #[test]
    fn refinement_never_decreases_the_sum() {
        let f = stepfn(1);
        let s = rat_i(1);
        let whole = TaggedCollection::new(
            vec![TaggedInterval::new(Rat::zero(), rat(3, 4), DescentPath::root(), TagKind::Limit)],
            f.scheme(),
        )
        .unwrap();
        let split = TaggedCollection::new(
            vec![
                TaggedInterval::new(Rat::zero(), rat(1, 4), DescentPath::root(), TagKind::Limit),
                TaggedInterval::new(rat(1, 4), rat(3, 4), DescentPath::root(), TagKind::LeftEndpoint),
            ],
            f.scheme(),
        )
        .unwrap();
        let a = ac_sum(&f, &whole, &s, &tol()).unwrap();
        let b = ac_sum(&f, &split, &s, &tol()).unwrap();
        assert!(a.hi() <= b.lo(), "refinement lowered the sum");
    }

    #[test]
    fn search_is_deterministic_and_bounded() {
        let f = stepfn(1);
        let sel = epsilon_to_eta(f.scheme(), &rat(1, 10)).unwrap();
        let a = adversarial_search(&f, sel.n, &rat_i(1), 40, 42).unwrap();
        let b = adversarial_search(&f, sel.n, &rat_i(1), 40, 42).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        assert!(a.max_upper < rat(1, 10));
        assert!(a.all_chains_certified, "{} chains failed", a.chains_failed);
        assert!(a.best_sum.lo() <= &a.max_upper);

        let c = adversarial_search(&f, sel.n, &rat_i(1), 40, 43).unwrap();
        // different seed explores different candidates
        assert_ne!(
            serde_json::to_string(&a.best).unwrap(),
            serde_json::to_string(&c.best).unwrap()
        );

        assert!(matches!(
            adversarial_search(&f, sel.n, &rat_i(1), 0, 1),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn search_single_evaluation_matches_direct_sum() {
        let f = stepfn(1);
        let sel = epsilon_to_eta(f.scheme(), &rat(1, 10)).unwrap();
        let rep = adversarial_search(&f, sel.n, &rat_i(1), 1, 7).unwrap();
        assert_eq!(rep.evaluated, 1);
        let direct = ac_sum(&f, &rep.best, &rat_i(1), &tol()).unwrap();
        assert_eq!(rep.best_sum.lo(), direct.lo());
        assert_eq!(rep.best_sum.hi(), direct.hi());
    }

    #[test]
    fn lemma_instances_evaluate_exactly() {
        // (1/4 + 1/9) vs (1/2 + 1/3)^2
        let sub = root_subadditivity(&[rat(1, 2), rat(1, 3)], 2).unwrap();
        assert!(sub.holds);
        assert_eq!(sub.lhs, rat(13, 36));
        assert_eq!(sub.rhs, rat(25, 36));
        assert_eq!(sub.margin(), rat(1, 3));

        // single term and exponent 1 are equality cases
        let one = root_subadditivity(&[rat(7, 5)], 3).unwrap();
        assert!(one.holds && one.margin().is_zero());
        let lin = root_subadditivity(&[rat(1, 2), rat(5, 2)], 1).unwrap();
        assert!(lin.holds && lin.margin().is_zero());

        let split = ratio_sum_split(&[(rat_i(1), rat_i(2)), (rat_i(1), rat_i(3))]).unwrap();
        assert!(split.holds);
        assert_eq!(split.lhs, rat(2, 5));
        assert_eq!(split.rhs, rat(5, 6));
        let single = ratio_sum_split(&[(rat(3, 7), rat(9, 2))]).unwrap();
        assert!(single.holds && single.margin().is_zero());
        // zero numerators are admissible
        let zeros = ratio_sum_split(&[(Rat::zero(), rat_i(1)), (rat_i(2), rat_i(5))]).unwrap();
        assert!(zeros.holds);

        assert!(matches!(root_subadditivity(&[], 2), Err(Error::Validation(_))));
        assert!(matches!(
            root_subadditivity(&[rat_i(1)], 0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            root_subadditivity(&[rat_i(-1)], 2),
            Err(Error::Validation(_))
        ));
        assert!(matches!(ratio_sum_split(&[]), Err(Error::Validation(_))));
        assert!(matches!(
            ratio_sum_split(&[(rat_i(1), Rat::zero())]),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            ratio_sum_split(&[(rat_i(-1), rat_i(1))]),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn chain_lhs_agrees_with_the_engine_route() {
        // the chain assembles interval integrals from its own descent;
        // the quadrature engine must land on the same values
        let f = stepfn(1);
        let s = rat_i(1);
        let n = 10u32;
        let ctx = ChainContext::new(f.scheme(), n, &s).unwrap();
        let eta_lo = ctx.eta().lo().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut exact_agreements = 0u32;
        for _ in 0..25 {
            let coll = random_collection(f.scheme(), n, &eta_lo, &mut rng).unwrap();
            if coll.is_empty() {
                continue;
            }
            let rep = ctx.verify(&f, &coll).unwrap();
            let direct = ac_sum(&f, &coll, &s, &tol()).unwrap();
            assert!(
                rep.lhs.lo() <= direct.hi() && direct.lo() <= rep.lhs.hi(),
                "chain lhs [{}, {}] and engine sum [{}, {}] are disjoint",
                rat_str(rep.lhs.lo()),
                rat_str(rep.lhs.hi()),
                rat_str(direct.lo()),
                rat_str(direct.hi())
            );
            if rep.lhs.is_exact() && direct.is_exact() {
                assert_eq!(rep.lhs.lo(), direct.lo());
                exact_agreements += 1;
            }
        }
        assert!(exact_agreements > 0);
    }

    #[test]
    fn threshold_probe() {
        let f1 = stepfn(1);
        let t = acs_threshold(f1.scheme(), &rat_i(1)).unwrap();
        assert_eq!(t.verdict, ThresholdVerdict::Convergent);
        assert!(t.ratio_limit.is_exact());
        assert_eq!(*t.ratio_limit.lo(), rat(2, 3));
        assert!(*t.s_star.lo() > parse_rat("1.5849").unwrap());
        assert!(*t.s_star.hi() < parse_rat("1.5850").unwrap());

        let t = acs_threshold(f1.scheme(), &rat_i(2)).unwrap();
        assert_eq!(t.verdict, ThresholdVerdict::Divergent);
        assert!(*t.ratio_limit.lo() > parse_rat("1.1547").unwrap());
        assert!(*t.ratio_limit.hi() < parse_rat("1.1548").unwrap());

        // slightly above the threshold: still divergent
        let t = acs_threshold(f1.scheme(), &rat(1585, 1000)).unwrap();
        assert_eq!(t.verdict, ThresholdVerdict::Divergent);

        let f2 = stepfn(2);
        let t = acs_threshold(f2.scheme(), &rat_i(2)).unwrap();
        assert_eq!(t.verdict, ThresholdVerdict::Convergent);
        assert_eq!(*t.ratio_limit.lo(), rat(2, 3));
        let t = acs_threshold(f2.scheme(), &rat_i(1)).unwrap();
        assert_eq!(t.verdict, ThresholdVerdict::Convergent);
        assert_eq!(*t.ratio_limit.lo(), rat(2, 9));

        assert!(acs_threshold(f1.scheme(), &rat(1, 2)).is_err());
    }
}
