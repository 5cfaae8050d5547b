//! Blow-up probes at construction-aligned sites.
//!
//! At a surviving point `x` the rank-`n` removed interval to its right
//! gives a radius `h_n` with `x + h_n` on that interval's right endpoint.
//! Averaging the positive part of `F - (R(x+t) - R(x)) - alpha t` over
//! `[0, h_n]` and dividing by `h_n` once more yields a quantity that the
//! core mass alone pins above `(1/(4 (4^r - 2))) (4/3)^(r n)`, a floor
//! that grows geometrically in `n`. [`divergence_report`] certifies the
//! floor rank by rank for any nondecreasing step `R` and slope `alpha`.

use num_traits::{Signed, ToPrimitive};
use serde::Serialize;

use crate::scalar::{compare, rat, rat_i, rat_pow_int, rat_str, CertifiedValue, Rat, Verdict};
use crate::scheme::{DescentPath, RemovedInterval, Scheme, Side};
use crate::stepfn::{AffinePart, MonotoneStep, Sign, StepFn};
use crate::{Error, Result};

/// A probe site: a certified surviving point `x` together with the exact
/// radius `h` whose far end is the right endpoint of the rank-`n` removed
/// interval concentric with the rank-`(n-1)` segment containing `x`.
///
/// Sites exist only in the exact construction (integer `r`); `x` is the
/// all-left descent limit of its path, which is that segment's left
/// endpoint.
#[derive(Clone, Debug)]
pub struct BlowupSite {
    x: Rat,
    n: u32,
    h: Rat,
    removed: RemovedInterval,
}

impl BlowupSite {
    pub fn x(&self) -> &Rat {
        &self.x
    }

    pub fn rank(&self) -> u32 {
        self.n
    }

    pub fn h(&self) -> &Rat {
        &self.h
    }

    /// The rank-`n` removed interval whose right endpoint is `x + h`.
    pub fn removed(&self) -> &RemovedInterval {
        &self.removed
    }
}

fn exact_rat(v: &CertifiedValue, what: &str) -> Result<Rat> {
    if v.is_exact() {
        Ok(v.lo().clone())
    } else {
        Err(Error::Validation(format!(
            "{what} requires the exact construction (integer exponent)"
        )))
    }
}

/// Builds the rank-`n` site for the path's all-left limit point.
///
/// The descent must go left at position `n` (explicitly, or implicitly
/// past the path's end): only then is the rank-`n` removed interval the
/// one directly to the point's right. For the origin (empty or all-left
/// path) the radius is exactly `r_n + u_n`.
pub fn make_site(scheme: &Scheme, path: &DescentPath, n: u32) -> Result<BlowupSite> {
    if n == 0 {
        return Err(Error::Domain("blow-up rank must be at least 1".into()));
    }
    if n > scheme.depth_cap() {
        return Err(Error::DepthExceeded {
            cap: scheme.depth_cap(),
            context: format!("blow-up site at rank {n}"),
        });
    }
    let sides = path.sides();
    if (n as usize) <= sides.len() && sides[n as usize - 1] == Side::Right {
        return Err(Error::Validation(format!(
            "site ineligible: the descent goes right at rank {n}, so the rank-{n} \
             removed interval does not sit to the point's right"
        )));
    }
    let x = exact_rat(&scheme.segment(path)?.lo, "a blow-up site")?;
    let keep = (n as usize - 1).min(sides.len());
    let mut stem = DescentPath::from_sides(sides[..keep].to_vec());
    while stem.len() < n - 1 {
        stem.push(Side::Left);
    }
    let removed = scheme.removed_for(&stem)?;
    let h = exact_rat(&removed.hi, "a blow-up site")? - &x;
    let child = exact_rat(&scheme.residual_mass(n)?, "a blow-up site")?;
    let gap = exact_rat(&scheme.removed_mass(n)?, "a blow-up site")?;
    let reach = &child + &gap;
    if h < gap || h > reach || reach >= &gap * rat_i(2) {
        return Err(Error::Validation(format!(
            "site geometry violated at rank {n}"
        )));
    }
    Ok(BlowupSite { x, n, h, removed })
}

/// `(1/h^2) int_0^h [F(x+t) - (R(x+t) - R(x)) - alpha t]_+ dt`: the
/// first-power derivate probe at the site with one extra `1/h`.
///
/// `R`'s breakpoints split `[x, x+h]` into pieces where the subtracted
/// step is constant, so each piece is a single positive-part integral
/// with affine part `(R(x) - R(piece) + alpha x) - alpha y`. Exact
/// whenever `alpha = 0`.
pub fn blowup_quantity(
    f: &StepFn,
    site: &BlowupSite,
    alpha: &Rat,
    r_step: &MonotoneStep,
    tol: &Rat,
) -> Result<CertifiedValue> {
    if !tol.is_positive() {
        return Err(Error::Validation("tolerance must be positive".into()));
    }
    let a = site.x.clone();
    let b = &site.x + &site.h;
    let r_at_x = r_step.value_at(&a).clone();
    let pieces = r_step.pieces(&a, &b);
    let h2 = &site.h * &site.h;
    let share = tol * &h2 / rat_i(pieces.len() as i64);
    let one = rat_i(1);
    let mut total = CertifiedValue::zero();
    for (lo, hi, step_val) in &pieces {
        let aff = AffinePart::new(&r_at_x - step_val + alpha * &site.x, -alpha.clone());
        total = total.add(&f.integral_plus_affine(lo, hi, Sign::Plus, &aff, &one, &share)?);
    }
    Ok(total
        .mul_rat(&h2.recip())
        .round_out(f.scheme().precision().bits))
}

/// The divergence floor by two routes: the closed form
/// `(1/(4 (4^r - 2))) (4/3)^(r n)` and the mass identity `v_n / (4 u_n^2)`.
#[derive(Clone, Debug, Serialize)]
pub struct LowerBound {
    pub closed: CertifiedValue,
    pub from_masses: CertifiedValue,
    /// Both routes exact and literally equal.
    pub certified_equal: bool,
}

pub fn blowup_lower_bound(scheme: &Scheme, n: u32) -> Result<LowerBound> {
    if n == 0 {
        return Err(Error::Domain("blow-up rank must be at least 1".into()));
    }
    let prec = scheme.precision();
    let rn = scheme.r() * rat_i(n as i64);
    let excess = scheme.removed_mass(0)?;
    let closed = CertifiedValue::exact(rat(4, 3))
        .pow(&rn, prec)?
        .div(&excess.mul_rat(&rat_i(4)))?;
    let u = scheme.removed_mass(n)?;
    let from_masses = scheme.core_mass(n)?.div(&u.mul(&u).mul_rat(&rat_i(4)))?;
    let certified_equal =
        closed.is_exact() && from_masses.is_exact() && closed.lo() == from_masses.lo();
    if !certified_equal
        && !matches!(compare(&closed, &from_masses), Verdict::Overlapping)
    {
        return Err(Error::Validation(
            "lower-bound routes disagree, which should be impossible".into(),
        ));
    }
    Ok(LowerBound {
        closed,
        from_masses,
        certified_equal,
    })
}

/// One certified rank of a divergence table.
#[derive(Clone, Debug, Serialize)]
pub struct DivergenceRow {
    pub n: u32,
    #[serde(with = "crate::scalar::rat_serde")]
    pub h: Rat,
    pub quantity: CertifiedValue,
    /// `v_n / h_n^2`, the mass the core alone forces.
    pub core_over_h2: CertifiedValue,
    pub closed_bound: CertifiedValue,
    /// The integrand certifiably exceeds 1 everywhere on the rank's core.
    pub pointwise_exceeds_one: bool,
    pub certified: bool,
}

/// A rank left out of the table, with the reason.
#[derive(Clone, Debug, Serialize)]
pub struct SkippedRank {
    pub n: u32,
    pub note: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceVerdict {
    /// Every row certified and the floors grow by `(4/3)^r` each step.
    Diverges,
    Undetermined,
}

#[derive(Clone, Debug, Serialize)]
pub struct DivergenceReport {
    #[serde(with = "crate::scalar::rat_serde")]
    pub alpha: Rat,
    /// Ranks must exceed `R(1) + |alpha| + 1` to enter the table.
    #[serde(with = "crate::scalar::rat_serde")]
    pub eligibility_floor: Rat,
    pub rows: Vec<DivergenceRow>,
    pub skipped: Vec<SkippedRank>,
    /// Exact ratio between consecutive closed bounds, `(4/3)^r`.
    #[serde(with = "crate::scalar::rat_serde")]
    pub growth_ratio: Rat,
    pub growth_certified: bool,
    pub verdict: DivergenceVerdict,
}

impl DivergenceReport {
    /// One line per eligible rank, rationals as `p/q`.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("n,h_n,quantity_lower,quantity_upper,v_n_over_hn2,closed_bound,certified\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                row.n,
                rat_str(&row.h),
                rat_str(row.quantity.lo()),
                rat_str(row.quantity.hi()),
                rat_str(row.core_over_h2.lo()),
                rat_str(row.closed_bound.lo()),
                row.certified,
            ));
        }
        out
    }
}

/// Walks ranks `n_from..=n_to` at the path's limit point and certifies,
/// per eligible rank, the chain
/// `quantity > v_n/h_n^2 >= v_n/(4 u_n^2) = closed bound`, plus the
/// pointwise floor `> 1` on the core. Ineligible ranks (below the
/// `R(1) + |alpha| + 1` threshold, or with a rightward descent at that
/// position) are skipped with a note.
pub fn divergence_report(
    f: &StepFn,
    path: &DescentPath,
    alpha: &Rat,
    r_step: &MonotoneStep,
    n_from: u32,
    n_to: u32,
    tol: &Rat,
) -> Result<DivergenceReport> {
    let scheme = f.scheme();
    if n_from == 0 || n_from > n_to {
        return Err(Error::Domain(
            "rank range must be nonempty and start at 1 or later".into(),
        ));
    }
    if n_to > scheme.depth_cap() {
        return Err(Error::DepthExceeded {
            cap: scheme.depth_cap(),
            context: format!("divergence table up to rank {n_to}"),
        });
    }
    let r_int = if scheme.r().is_integer() {
        scheme.r().to_integer().to_i64()
    } else {
        None
    }
    .ok_or_else(|| {
        Error::Validation("divergence tables require a small integer exponent".into())
    })?;
    let growth_ratio = rat_pow_int(&rat(4, 3), r_int)?;
    let floor = r_step.value_at(&rat_i(1)) + alpha.abs() + rat_i(1);
    let mut rows: Vec<DivergenceRow> = Vec::new();
    let mut skipped = Vec::new();
    for n in n_from..=n_to {
        if rat_i(n as i64) <= floor {
            skipped.push(SkippedRank {
                n,
                note: format!(
                    "rank {n} is not above the eligibility floor R(1) + |alpha| + 1 = {}",
                    rat_str(&floor)
                ),
            });
            continue;
        }
        let site = match make_site(scheme, path, n) {
            Ok(site) => site,
            Err(Error::Validation(note)) => {
                skipped.push(SkippedRank { n, note });
                continue;
            }
            Err(e) => return Err(e),
        };
        let quantity = blowup_quantity(f, &site, alpha, r_step, tol)?;
        let h2 = site.h() * site.h();
        let core_over_h2 = scheme.core_mass(n)?.mul_rat(&h2.recip());
        let bound = blowup_lower_bound(scheme, n)?;
        let core_lo = exact_rat(&site.removed.core_lo, "the core check")?;
        let core_hi = exact_rat(&site.removed.core_hi, "the core check")?;
        let step_gap = r_step.value_at(&core_hi) - r_step.value_at(site.x());
        let drift_lo = alpha * (&core_lo - site.x());
        let drift_hi = alpha * (&core_hi - site.x());
        let pointwise_exceeds_one =
            rat_i(n as i64) - step_gap - drift_lo.max(drift_hi) > rat_i(1);
        let certified = pointwise_exceeds_one
            && matches!(compare(&quantity, &core_over_h2), Verdict::CertainlyGreater)
            && core_over_h2.lo() >= bound.closed.hi()
            && bound.certified_equal;
        rows.push(DivergenceRow {
            n,
            h: site.h().clone(),
            quantity,
            core_over_h2,
            closed_bound: bound.closed,
            pointwise_exceeds_one,
            certified,
        });
    }
    let mut growth_certified = rows.len() >= 2;
    for pair in rows.windows(2) {
        let stepwise = pair[1].n == pair[0].n + 1
            && pair[0].closed_bound.is_exact()
            && pair[1].closed_bound.is_exact()
            && *pair[1].closed_bound.lo() == pair[0].closed_bound.lo() * &growth_ratio;
        if !stepwise {
            growth_certified = false;
        }
    }
    let verdict = if growth_certified && rows.iter().all(|row| row.certified) {
        DivergenceVerdict::Diverges
    } else {
        DivergenceVerdict::Undetermined
    };
    Ok(DivergenceReport {
        alpha: alpha.clone(),
        eligibility_floor: floor,
        rows,
        skipped,
        growth_ratio,
        growth_certified,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Precision;
    use num_traits::Zero;

    fn scheme(r: i64) -> Scheme {
        Scheme::with_default_depth(rat_i(r), Precision::default()).unwrap()
    }

    fn stepfn(r: i64) -> StepFn {
        StepFn::new(scheme(r))
    }

    fn tol() -> Rat {
        rat(1, 1_000_000)
    }

    #[test]
    fn origin_sites_have_closed_form_radii() {
        let sch = scheme(1);
        let site = make_site(&sch, &DescentPath::root(), 1).unwrap();
        assert_eq!(*site.x(), rat_i(0));
        assert_eq!(*site.h(), rat(3, 4));
        assert_eq!(*site.removed().lo.lo(), rat(1, 4));
        assert_eq!(*site.removed().hi.lo(), rat(3, 4));

        let site = make_site(&sch, &DescentPath::root(), 2).unwrap();
        assert_eq!(*site.h(), rat(3, 16));

        // h_1 = r_1 + u_1 = 1/16 + 14/16 for the squared construction
        let site = make_site(&scheme(2), &DescentPath::root(), 1).unwrap();
        assert_eq!(*site.h(), rat(15, 16));
    }

    #[test]
    fn site_geometry_bounds_hold_along_paths() {
        for r in [1i64, 2, 3] {
            let sch = scheme(r);
            for path_str in ["", "L", "LL", "LR", "LRL", "LLLL", "RL"] {
                let path: DescentPath = path_str.parse().unwrap();
                for n in 1..=8u32 {
                    let site = match make_site(&sch, &path, n) {
                        Ok(site) => site,
                        Err(Error::Validation(_)) => continue,
                        Err(e) => panic!("unexpected error: {e}"),
                    };
                    let reach = sch.residual_mass(n).unwrap().lo()
                        + sch.removed_mass(n).unwrap().lo();
                    let twice_gap = sch.removed_mass(n).unwrap().lo() * rat_i(2);
                    assert!(*site.h() <= reach);
                    assert!(reach < twice_gap);
                    assert_eq!(site.x() + site.h(), *site.removed().hi.lo());
                }
            }
        }
    }

    #[test]
    fn site_rejects_rightward_and_out_of_range_ranks() {
        let sch = scheme(1);
        let right: DescentPath = "R".parse().unwrap();
        assert!(matches!(
            make_site(&sch, &right, 1),
            Err(Error::Validation(_))
        ));
        // beyond the path the descent is implicitly left, so rank 2 works
        let site = make_site(&sch, &right, 2).unwrap();
        assert_eq!(*site.x(), rat(3, 4));
        assert_eq!(*site.h(), rat(3, 16));

        let lr: DescentPath = "LR".parse().unwrap();
        assert!(make_site(&sch, &lr, 2).is_err());
        assert_eq!(*make_site(&sch, &lr, 1).unwrap().h(), rat(9, 16));

        assert!(matches!(
            make_site(&sch, &DescentPath::root(), 0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            make_site(&sch, &DescentPath::root(), 65),
            Err(Error::DepthExceeded { .. })
        ));
    }

    #[test]
    fn sites_require_exact_endpoints() {
        // 4^(5/4) is irrational, so every endpoint is a strict bracket
        let sch = Scheme::with_default_depth(rat(5, 4), Precision::default()).unwrap();
        assert!(matches!(
            make_site(&sch, &DescentPath::root(), 1),
            Err(Error::Validation(_))
        ));
        // 4^(3/2) = 8: a half-integer exponent still lands on dyadics
        let sch = Scheme::with_default_depth(rat(3, 2), Precision::default()).unwrap();
        let site = make_site(&sch, &DescentPath::root(), 1).unwrap();
        assert_eq!(*site.h(), rat(7, 8));
    }

    #[test]
    fn quantity_at_origin_matches_hand_integration() {
        // int_0^(3/4) F = 11/300 + 1/6 = 61/300, and (16/9)(61/300) = 244/675
        let f = stepfn(1);
        let site = make_site(f.scheme(), &DescentPath::root(), 1).unwrap();
        let q = blowup_quantity(&f, &site, &Rat::zero(), &MonotoneStep::flat_zero(), &tol())
            .unwrap();
        assert!(q.is_exact());
        assert_eq!(*q.lo(), rat(244, 675));
    }

    #[test]
    fn quantity_exceeds_the_floor_one_rank_down() {
        let f = stepfn(1);
        let site = make_site(f.scheme(), &DescentPath::root(), 2).unwrap();
        let q = blowup_quantity(&f, &site, &Rat::zero(), &MonotoneStep::flat_zero(), &tol())
            .unwrap();
        let bound = blowup_lower_bound(f.scheme(), 2).unwrap();
        assert_eq!(*bound.closed.lo(), rat(2, 9));
        assert!(q.lo() > bound.closed.hi());
    }

    #[test]
    fn monotone_subtraction_keeps_exactness() {
        // a jump of 1/2 at 1/2 only shifts the region right of the site
        let f = stepfn(1);
        let site = make_site(f.scheme(), &DescentPath::root(), 1).unwrap();
        let r_step = MonotoneStep::new(vec![rat(1, 2)], vec![Rat::zero(), rat(1, 2)]).unwrap();
        let q = blowup_quantity(&f, &site, &Rat::zero(), &r_step, &tol()).unwrap();
        assert!(q.is_exact());
        let free = rat(244, 675);
        assert!(*q.lo() < free);
        assert!(*q.lo() > Rat::zero());
    }

    #[test]
    fn steep_slope_leaves_only_deep_mass() {
        // with alpha = 10^6 every shallow core goes negative; what is left
        // is the far tail of the subtree mass, far below 1/1000
        let f = stepfn(1);
        let site = make_site(f.scheme(), &DescentPath::root(), 1).unwrap();
        let q = blowup_quantity(
            &f,
            &site,
            &rat_i(1_000_000),
            &MonotoneStep::flat_zero(),
            &tol(),
        )
        .unwrap();
        assert!(!q.lo().is_negative());
        assert!(*q.hi() < rat(1, 1000));
    }

    #[test]
    fn lower_bound_closed_forms() {
        let one = blowup_lower_bound(&scheme(1), 1).unwrap();
        assert!(one.certified_equal);
        assert_eq!(*one.closed.lo(), rat(1, 6));
        assert_eq!(*one.from_masses.lo(), rat(1, 6));

        let ten = blowup_lower_bound(&scheme(1), 10).unwrap();
        assert_eq!(*ten.closed.lo(), rat(131_072, 59_049));

        let sq = blowup_lower_bound(&scheme(2), 1).unwrap();
        assert_eq!(*sq.closed.lo(), rat(2, 63));
    }

    #[test]
    fn mass_identity_holds_across_ranks() {
        for r in [1i64, 2, 3] {
            let sch = scheme(r);
            for n in 1..=40u32 {
                let bound = blowup_lower_bound(&sch, n).unwrap();
                assert!(bound.certified_equal, "r = {r}, n = {n}");
            }
        }
    }

    #[test]
    fn consecutive_bounds_grow_by_the_fixed_ratio() {
        for r in [1i64, 2, 3] {
            let sch = scheme(r);
            let expected = rat_pow_int(&rat(4, 3), r).unwrap();
            for n in [1u32, 5, 17] {
                let a = blowup_lower_bound(&sch, n).unwrap();
                let b = blowup_lower_bound(&sch, n + 1).unwrap();
                assert_eq!(*b.closed.lo(), a.closed.lo() * &expected);
            }
        }
    }

    #[test]
    fn divergence_table_certifies_and_diverges() {
        let f = stepfn(1);
        let report = divergence_report(
            &f,
            &DescentPath::root(),
            &Rat::zero(),
            &MonotoneStep::flat_zero(),
            1,
            12,
            &tol(),
        )
        .unwrap();
        // rank 1 sits exactly on the floor R(1) + |alpha| + 1 = 1
        assert_eq!(report.skipped.len(), 1);
        assert_eq!(report.skipped[0].n, 1);
        assert_eq!(report.rows.len(), 11);
        for row in &report.rows {
            assert!(row.certified);
            assert!(row.pointwise_exceeds_one);
            assert!(row.quantity.lo() > row.closed_bound.hi());
        }
        assert_eq!(report.growth_ratio, rat(4, 3));
        assert!(report.growth_certified);
        assert_eq!(report.verdict, DivergenceVerdict::Diverges);

        let csv = report.to_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "n,h_n,quantity_lower,quantity_upper,v_n_over_hn2,closed_bound,certified"
        );
        assert_eq!(csv.lines().count(), 12);
        let first = lines.next().unwrap();
        assert!(first.starts_with("2,3/16,"));
        assert!(first.ends_with(",true"));
    }

    #[test]
    fn slope_threshold_delays_the_first_row() {
        let f = stepfn(1);
        let report = divergence_report(
            &f,
            &DescentPath::root(),
            &rat_i(5),
            &MonotoneStep::flat_zero(),
            1,
            8,
            &tol(),
        )
        .unwrap();
        // floor is 0 + 5 + 1 = 6, so rows start at rank 7
        assert_eq!(report.rows.first().unwrap().n, 7);
        assert_eq!(report.skipped.len(), 6);
        assert!(report.rows.iter().all(|row| row.certified));
        assert_eq!(report.verdict, DivergenceVerdict::Diverges);
    }

    #[test]
    fn step_total_shifts_the_threshold() {
        let f = stepfn(1);
        let r_step = MonotoneStep::new(vec![rat(1, 2)], vec![Rat::zero(), rat_i(3)]).unwrap();
        let report = divergence_report(
            &f,
            &DescentPath::root(),
            &Rat::zero(),
            &r_step,
            1,
            7,
            &tol(),
        )
        .unwrap();
        // floor is 3 + 0 + 1 = 4, so rows start at rank 5
        assert_eq!(report.eligibility_floor, rat_i(4));
        assert_eq!(report.rows.first().unwrap().n, 5);
        assert!(report.rows.iter().all(|row| row.certified));
        assert_eq!(report.verdict, DivergenceVerdict::Diverges);
    }

    #[test]
    fn single_row_does_not_claim_divergence() {
        let f = stepfn(1);
        let report = divergence_report(
            &f,
            &DescentPath::root(),
            &Rat::zero(),
            &MonotoneStep::flat_zero(),
            5,
            5,
            &tol(),
        )
        .unwrap();
        assert_eq!(report.rows.len(), 1);
        assert!(report.rows[0].certified);
        assert!(!report.growth_certified);
        assert_eq!(report.verdict, DivergenceVerdict::Undetermined);
    }
}
