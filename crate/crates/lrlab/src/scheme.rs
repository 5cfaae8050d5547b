//! Geometry of the nested-segment scheme on `[0, 1]`.
//!
//! For a parameter `r >= 1`, stage `n` removes from each of the
//! `2^(n-1)` surviving segments a concentric open interval of length
//! `u_n = (4^r - 2) / 4^(rn)`, leaving two children of length
//! `r_n = 4^(-rn)` each. Every removed interval carries a concentric
//! open core of length `v_n = u_n / 3^(rn)`. The survivor set `P` is the
//! intersection of all stages; segment endpoints never get removed, so
//! they witness membership in `P` exactly.
//!
//! All derived masses are [`CertifiedValue`]s: exact whenever `4^r` and
//! `3^r` are rational (integer `r` in particular), sound enclosures
//! otherwise.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use num_traits::Signed;

use crate::scalar::{rat_i, rat_str, CertifiedValue, Precision, Rat};
use crate::{Error, Result};

pub const DEFAULT_DEPTH_CAP: u32 = 64;

/// Which child of a segment a descent step selects.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

/// A finite descent through the segment tree, e.g. `LLRL`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct DescentPath(Vec<Side>);

impl DescentPath {
    pub fn root() -> Self {
        DescentPath(Vec::new())
    }

    pub fn from_sides(sides: Vec<Side>) -> Self {
        DescentPath(sides)
    }

    pub fn push(&mut self, side: Side) {
        self.0.push(side);
    }

    pub fn pop(&mut self) -> Option<Side> {
        self.0.pop()
    }

    pub fn len(&self) -> u32 {
        self.0.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sides(&self) -> &[Side] {
        &self.0
    }

    /// `depth` Left steps, the canonical descent toward a segment's
    /// left endpoint.
    pub fn all_left(depth: u32) -> Self {
        DescentPath(vec![Side::Left; depth as usize])
    }
}

impl fmt::Display for DescentPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            f.write_str(match s {
                Side::Left => "L",
                Side::Right => "R",
            })?;
        }
        Ok(())
    }
}

impl FromStr for DescentPath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut sides = Vec::with_capacity(s.len());
        for c in s.chars() {
            match c {
                'L' => sides.push(Side::Left),
                'R' => sides.push(Side::Right),
                other => {
                    return Err(Error::Parse(format!(
                        "descent path may only contain L and R, got {other:?}"
                    )))
                }
            }
        }
        Ok(DescentPath(sides))
    }
}

impl Serialize for DescentPath {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for DescentPath {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A surviving segment after `rank` removal stages.
#[derive(Clone, Debug)]
pub struct Segment {
    pub rank: u32,
    pub lo: CertifiedValue,
    pub hi: CertifiedValue,
}

/// The open interval removed at stage `rank` from some segment, with its
/// concentric open core.
#[derive(Clone, Debug)]
pub struct RemovedInterval {
    pub rank: u32,
    pub lo: CertifiedValue,
    pub hi: CertifiedValue,
    pub core_lo: CertifiedValue,
    pub core_hi: CertifiedValue,
}

/// Where a point sits relative to the scheme.
#[derive(Clone, Debug, PartialEq)]
pub enum Location {
    /// Not in `[0, 1]`.
    Outside,
    /// A segment endpoint, hence a certified member of `P`.
    SegmentEndpoint { path: DescentPath, side: Side },
    /// Inside the open core of the stage-`rank` removed interval
    /// reached through `path`.
    InCore { rank: u32, path: DescentPath },
    /// Inside the removed interval but not in its open core (the core
    /// boundary counts as margin).
    InMargin { rank: u32, path: DescentPath },
    /// Still interior to a surviving segment at the depth cap; the point
    /// is within `4^(-r * depth)` of `P` but undecided.
    Unresolved { depth: u32 },
}

/// The scheme for a fixed exponent, with cached stage-1 powers.
#[derive(Clone, Debug)]
pub struct Scheme {
    r: Rat,
    prec: Precision,
    depth_cap: u32,
    four_r: CertifiedValue,
    three_r: CertifiedValue,
}

impl Scheme {
    pub fn new(r: Rat, prec: Precision, depth_cap: u32) -> Result<Self> {
        if r < rat_i(1) {
            return Err(Error::Domain(format!(
                "scheme exponent must be at least 1, got {}",
                rat_str(&r)
            )));
        }
        let four_r = CertifiedValue::exact_int(4).pow(&r, prec)?;
        let three_r = CertifiedValue::exact_int(3).pow(&r, prec)?;
        Ok(Scheme {
            r,
            prec,
            depth_cap,
            four_r,
            three_r,
        })
    }

    pub fn with_default_depth(r: Rat, prec: Precision) -> Result<Self> {
        Self::new(r, prec, DEFAULT_DEPTH_CAP)
    }

    pub fn r(&self) -> &Rat {
        &self.r
    }

    pub fn precision(&self) -> Precision {
        self.prec
    }

    pub fn depth_cap(&self) -> u32 {
        self.depth_cap
    }

    pub fn is_exact(&self) -> bool {
        self.four_r.is_exact() && self.three_r.is_exact()
    }

    /// `u_n = (4^r - 2) / 4^(rn)`, the length removed per segment at stage n.
    pub fn removed_mass(&self, n: u32) -> Result<CertifiedValue> {
        let excess = self.four_r.sub(&CertifiedValue::exact_int(2));
        Ok(excess.div(&self.four_r.pow_int(n as i64)?)?)
    }

    /// `v_n = u_n / 3^(rn)`, the core length at stage n.
    pub fn core_mass(&self, n: u32) -> Result<CertifiedValue> {
        self.removed_mass(n)?.div(&self.three_r.pow_int(n as i64)?)
    }

    /// `r_n = 4^(-rn)`, the length of each stage-n surviving segment.
    pub fn residual_mass(&self, n: u32) -> Result<CertifiedValue> {
        self.four_r.pow_int(n as i64)?.recip()
    }

    /// Total length surviving after stage N: `(2 / 4^r)^N`.
    pub fn survivor_measure(&self, n: u32) -> Result<CertifiedValue> {
        let per_stage = CertifiedValue::exact_int(2).div(&self.four_r)?;
        per_stage.pow_int(n as i64)
    }

    /// The mass series `sum_n 2^(n-1) / 4^(rn)` as a certified sum.
    pub fn removed_series(&self, tol: &Rat) -> Result<CertifiedValue> {
        let ratio = CertifiedValue::exact_int(2).div(&self.four_r)?;
        let spec = crate::series::SeriesSpec {
            power: Rat::from_integer(0.into()),
            ratio,
            scale: CertifiedValue::exact(crate::scalar::rat(1, 2)),
        };
        crate::series::sum_from(&spec, 1, tol, self.prec)
    }

    /// Closed form `1 / (4^r - 2)` the mass series must equal.
    pub fn removed_series_target(&self) -> Result<CertifiedValue> {
        self.four_r.sub(&CertifiedValue::exact_int(2)).recip()
    }

    /// The segment reached by following `path` from `[0, 1]`.
    pub fn segment(&self, path: &DescentPath) -> Result<Segment> {
        let mut lo = CertifiedValue::zero();
        let mut hi = CertifiedValue::one();
        let mut len = CertifiedValue::one();
        let quarter_r = self.four_r.recip()?;
        for (i, side) in path.sides().iter().enumerate() {
            len = len.mul(&quarter_r);
            match side {
                Side::Left => hi = lo.add(&len),
                Side::Right => lo = hi.sub(&len),
            }
            if i as u32 >= self.depth_cap {
                return Err(Error::DepthExceeded {
                    cap: self.depth_cap,
                    context: "segment descent".into(),
                });
            }
        }
        Ok(Segment {
            rank: path.len(),
            lo,
            hi,
        })
    }

    /// The interval removed from segment `path` at the next stage,
    /// together with its core.
    pub fn removed_for(&self, path: &DescentPath) -> Result<RemovedInterval> {
        let seg = self.segment(path)?;
        let rank = seg.rank + 1;
        let child = self.residual_mass(rank)?;
        let lo = seg.lo.add(&child);
        let hi = seg.hi.sub(&child);
        let center = lo.add(&hi).mul_rat(&crate::scalar::rat(1, 2));
        let half_core = self.core_mass(rank)?.mul_rat(&crate::scalar::rat(1, 2));
        Ok(RemovedInterval {
            rank,
            core_lo: center.sub(&half_core),
            core_hi: center.add(&half_core),
            lo,
            hi,
        })
    }

    /// Coordinate of a segment endpoint (a certified point of `P`).
    pub fn endpoint(&self, path: &DescentPath, side: Side) -> Result<CertifiedValue> {
        let seg = self.segment(path)?;
        Ok(match side {
            Side::Left => seg.lo,
            Side::Right => seg.hi,
        })
    }

    /// Classifies a rational point against the scheme, escalating
    /// precision when enclosure endpoints are too coarse to decide.
    pub fn locate(&self, x: &Rat) -> Result<Location> {
        if self.is_exact() {
            return self.locate_at(x, self.prec.bits);
        }
        let mut bits = self.prec.bits;
        loop {
            match self.locate_at(x, bits) {
                Err(Error::Undecidable(_)) if bits < self.prec.cap => {
                    bits = bits.saturating_mul(2).min(self.prec.cap);
                }
                other => return other,
            }
        }
    }

    fn locate_at(&self, x: &Rat, bits: u32) -> Result<Location> {
        if x.is_negative() || *x > rat_i(1) {
            return Ok(Location::Outside);
        }
        let prec = Precision { bits, ..self.prec };
        let four_r = CertifiedValue::exact_int(4).pow(&self.r, prec)?;
        let three_r = CertifiedValue::exact_int(3).pow(&self.r, prec)?;
        let quarter_r = four_r.recip()?;

        let mut lo = CertifiedValue::zero();
        let mut hi = CertifiedValue::one();
        let mut len = CertifiedValue::one();
        let mut core_scale = three_r.recip()?; // 3^(-r n) at current rank
        let mut path = DescentPath::root();

        for depth in 0..self.depth_cap {
            match point_vs(x, &lo)? {
                Some(std::cmp::Ordering::Equal) => {
                    return Ok(Location::SegmentEndpoint {
                        path,
                        side: Side::Left,
                    })
                }
                Some(std::cmp::Ordering::Less) => return Ok(Location::Outside),
                _ => {}
            }
            match point_vs(x, &hi)? {
                Some(std::cmp::Ordering::Equal) => {
                    return Ok(Location::SegmentEndpoint {
                        path,
                        side: Side::Right,
                    })
                }
                Some(std::cmp::Ordering::Greater) => return Ok(Location::Outside),
                _ => {}
            }

            let rank = depth + 1;
            let child = len.mul(&quarter_r);
            let rem_lo = lo.add(&child);
            let rem_hi = hi.sub(&child);

            // interior of the removed interval?
            let gt_lo = point_vs(x, &rem_lo)?;
            let lt_hi = point_vs(x, &rem_hi)?;
            let inside_removed = matches!(gt_lo, Some(std::cmp::Ordering::Greater))
                && matches!(lt_hi, Some(std::cmp::Ordering::Less));
            if inside_removed {
                let center = rem_lo.add(&rem_hi).mul_rat(&crate::scalar::rat(1, 2));
                let u = rem_hi.sub(&rem_lo);
                let half_core = u.mul(&core_scale).mul_rat(&crate::scalar::rat(1, 2));
                let core_lo = center.sub(&half_core);
                let core_hi = center.add(&half_core);
                let in_core = matches!(point_vs(x, &core_lo)?, Some(std::cmp::Ordering::Greater))
                    && matches!(point_vs(x, &core_hi)?, Some(std::cmp::Ordering::Less));
                if in_core {
                    return Ok(Location::InCore { rank, path });
                }
                let in_margin = matches!(
                    point_vs(x, &core_lo)?,
                    Some(std::cmp::Ordering::Less | std::cmp::Ordering::Equal)
                ) || matches!(
                    point_vs(x, &core_hi)?,
                    Some(std::cmp::Ordering::Greater | std::cmp::Ordering::Equal)
                );
                if in_margin {
                    return Ok(Location::InMargin { rank, path });
                }
                return Err(Error::Undecidable(format!(
                    "core membership of {} at rank {rank}",
                    rat_str(x)
                )));
            }

            // membership in the removed endpoints themselves ends the
            // descent as segment endpoints of a child at the next pass,
            // so only the straddle case is genuinely ambiguous.
            let go_left = match point_vs(x, &rem_lo)? {
                Some(std::cmp::Ordering::Less | std::cmp::Ordering::Equal) => true,
                Some(std::cmp::Ordering::Greater) => false,
                None => {
                    return Err(Error::Undecidable(format!(
                        "descent direction for {} at rank {rank}",
                        rat_str(x)
                    )))
                }
            };
            if go_left {
                hi = rem_lo;
            } else {
                match point_vs(x, &rem_hi)? {
                    Some(std::cmp::Ordering::Greater | std::cmp::Ordering::Equal) => lo = rem_hi,
                    _ => {
                        return Err(Error::Undecidable(format!(
                            "descent direction for {} at rank {rank}",
                            rat_str(x)
                        )))
                    }
                }
            }
            path.push(if go_left { Side::Left } else { Side::Right });
            len = child;
            core_scale = core_scale.mul(&three_r.recip()?);
        }
        Ok(Location::Unresolved {
            depth: self.depth_cap,
        })
    }
}

/// Compares an exact point against an enclosure: `None` when the point
/// falls strictly inside a non-degenerate enclosure.
fn point_vs(x: &Rat, v: &CertifiedValue) -> Result<Option<std::cmp::Ordering>> {
    if x < v.lo() {
        return Ok(Some(std::cmp::Ordering::Less));
    }
    if x > v.hi() {
        return Ok(Some(std::cmp::Ordering::Greater));
    }
    if v.is_exact() {
        return Ok(Some(std::cmp::Ordering::Equal));
    }
    Ok(None)
}
