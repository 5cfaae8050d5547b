//! Local mean, continuity and differentiation probes for the step
//! function, in the r-mean sense fixed by its scheme.
//!
//! A probe window of radius `h` at `x` is one-sided (`[x, x+h]` or
//! `[x-h, x]`) or two-sided (`[x-h, x+h]`), always clipped to `[0, 1]`
//! while keeping the `1/h` normalization. The deviation mean
//! `((1/h) int |F(y) - c - alpha (y - x)|^r dy)^(1/r)` drives both the
//! continuity modulus (`alpha = 0`, `c = F(x)`) and derivative probes,
//! whose quotients `mean / h` must vanish for differentiability.

use serde::Serialize;

use num_traits::{Signed, Zero};

use crate::scalar::{rat_i, rat_str, CertifiedValue, Rat};
use crate::stepfn::{AffinePart, StepFn};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ProbeSide {
    Left,
    Right,
    TwoSided,
}

/// A single probe outcome: the deviation mean and its `h`-quotient.
#[derive(Clone, Debug, Serialize)]
pub struct ProbeResult {
    #[serde(with = "crate::scalar::rat_serde")]
    pub h: Rat,
    pub mean: CertifiedValue,
    pub quotient: CertifiedValue,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum DecayVerdict {
    /// Every sampled quotient was certified below the floor.
    ConsistentWithDecay,
    /// Some quotient was certified at or above the floor.
    ViolatesFloor {
        #[serde(with = "crate::scalar::rat_serde")]
        witness_h: Rat,
    },
    /// Neither direction could be certified for every sample.
    Inconclusive,
}

/// A sweep of probes over a shrinking schedule of radii.
#[derive(Clone, Debug, Serialize)]
pub struct DecayScan {
    pub rows: Vec<ProbeResult>,
    pub verdict: DecayVerdict,
}

/// The window `[a, b]` a probe integrates over, clipped to `[0, 1]`.
pub fn probe_window(x: &Rat, h: &Rat, side: ProbeSide) -> Result<(Rat, Rat)> {
    if !h.is_positive() {
        return Err(Error::Domain("probe radius must be positive".into()));
    }
    if x.is_negative() || *x > rat_i(1) {
        return Err(Error::Domain(format!(
            "probe center {} outside [0, 1]",
            rat_str(x)
        )));
    }
    let (a, b) = match side {
        ProbeSide::Left => (x - h, x.clone()),
        ProbeSide::Right => (x.clone(), x + h),
        ProbeSide::TwoSided => (x - h, x + h),
    };
    Ok((a.max(Rat::zero()), b.min(rat_i(1))))
}

/// Plain local mean `(1/(b-a)) int_a^b F^s dy`.
pub fn mean_pow(f: &StepFn, a: &Rat, b: &Rat, s: &Rat, tol: &Rat) -> Result<CertifiedValue> {
    if a >= b {
        return Err(Error::Validation("mean needs a nondegenerate interval".into()));
    }
    let integral = f.integral_pow(a, b, s, tol)?;
    Ok(integral.mul_rat(&(b - a).recip()))
}

/// The r-mean of `F` over a probe window, with the scheme's own `r`:
/// `((1/h) int F^r)^(1/r)`.
pub fn lr_mean(f: &StepFn, x: &Rat, h: &Rat, side: ProbeSide, tol: &Rat) -> Result<CertifiedValue> {
    deviation_mean(f, x, &Rat::zero(), &Rat::zero(), h, side, tol)
}

/// `((1/h) int_window |F(y) - c - alpha (y - x)|^r dy)^(1/r)`.
pub fn deviation_mean(
    f: &StepFn,
    x: &Rat,
    c: &Rat,
    alpha: &Rat,
    h: &Rat,
    side: ProbeSide,
    tol: &Rat,
) -> Result<CertifiedValue> {
    let r = f.scheme().r().clone();
    let prec = f.scheme().precision();
    let (a, b) = probe_window(x, h, side)?;
    if a >= b {
        return Ok(CertifiedValue::zero());
    }
    // |F(y) - c - alpha (y - x)| = |F(y) + (alpha x - c) + (-alpha) y|
    let aff = AffinePart::new(alpha * x - c, -alpha.clone());
    let integral = f.integral_abs_affine(&a, &b, &aff, &r, tol)?;
    let scaled = integral.mul_rat(&h.recip());
    scaled.pow_nonneg(&(rat_i(1) / &r), prec)
}

/// Continuity modulus at `x`: the deviation mean with `alpha = 0` and
/// `c = F(x)`. Errors when `F(x)` itself has no certified value.
pub fn continuity_modulus(
    f: &StepFn,
    x: &Rat,
    h: &Rat,
    side: ProbeSide,
    tol: &Rat,
) -> Result<CertifiedValue> {
    let fx = f.value_at(x)?;
    deviation_mean(f, x, fx.lo(), &Rat::zero(), h, side, tol)
}

/// One differentiation probe at slope candidate `alpha`.
pub fn derivate_probe(
    f: &StepFn,
    x: &Rat,
    alpha: &Rat,
    h: &Rat,
    side: ProbeSide,
    tol: &Rat,
) -> Result<ProbeResult> {
    let fx = f.value_at(x)?;
    let mean = deviation_mean(f, x, fx.lo(), alpha, h, side, tol)?;
    let quotient = mean.mul_rat(&h.recip());
    Ok(ProbeResult {
        h: h.clone(),
        mean,
        quotient,
    })
}

/// Probes every radius in `schedule` and compares quotients against
/// `floor`. A certified quotient at or above the floor anywhere refutes
/// the decay hypothesis down to that radius; all-below certifies
/// consistency over the sampled range.
pub fn decay_scan(
    f: &StepFn,
    x: &Rat,
    alpha: &Rat,
    side: ProbeSide,
    schedule: &[Rat],
    floor: &Rat,
    tol: &Rat,
) -> Result<DecayScan> {
    if schedule.is_empty() {
        return Err(Error::Validation("empty probe schedule".into()));
    }
    if !floor.is_positive() {
        return Err(Error::Validation("decay floor must be positive".into()));
    }
    let mut rows = Vec::with_capacity(schedule.len());
    let mut all_below = true;
    let mut witness: Option<Rat> = None;
    for h in schedule {
        let row = derivate_probe(f, x, alpha, h, side, tol)?;
        if row.quotient.lo() >= floor {
            if witness.is_none() {
                witness = Some(h.clone());
            }
        }
        if !(row.quotient.hi() < floor) {
            all_below = false;
        }
        rows.push(row);
    }
    let verdict = if let Some(witness_h) = witness {
        DecayVerdict::ViolatesFloor { witness_h }
    } else if all_below {
        DecayVerdict::ConsistentWithDecay
    } else {
        DecayVerdict::Inconclusive
    };
    Ok(DecayScan { rows, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rat, Precision};
    use crate::scheme::Scheme;

    fn stepfn(r: i64) -> StepFn {
        StepFn::new(Scheme::with_default_depth(rat_i(r), Precision::default()).unwrap())
    }

    fn tol12() -> Rat {
        rat(1, 1_000_000_000_000i64)
    }

    #[test]
    fn windows_clip_to_unit_interval() {
        let (a, b) = probe_window(&rat_i(0), &rat(1, 4), ProbeSide::TwoSided).unwrap();
        assert_eq!(a, rat_i(0));
        assert_eq!(b, rat(1, 4));
        let (a, b) = probe_window(&rat(1, 2), &rat(1, 8), ProbeSide::Left).unwrap();
        assert_eq!(a, rat(3, 8));
        assert_eq!(b, rat(1, 2));
        assert!(probe_window(&rat_i(0), &rat_i(0), ProbeSide::Right).is_err());
        assert!(probe_window(&rat_i(2), &rat(1, 8), ProbeSide::Right).is_err());
    }

    #[test]
    fn plain_means_r1() {
        let f = stepfn(1);
        let m = mean_pow(&f, &rat_i(0), &rat_i(1), &rat_i(1), &tol12()).unwrap();
        assert_eq!(*m.lo(), rat(6, 25));
        // over the left quarter: (11/300) / (1/4)
        let m = mean_pow(&f, &rat_i(0), &rat(1, 4), &rat_i(1), &tol12()).unwrap();
        assert_eq!(*m.lo(), rat(11, 75));
    }

    #[test]
    fn lr_mean_right_sided_r1() {
        let f = stepfn(1);
        let m = lr_mean(&f, &rat_i(0), &rat(3, 4), ProbeSide::Right, &tol12()).unwrap();
        assert!(m.is_exact());
        assert_eq!(*m.lo(), rat(61, 225));
    }

    #[test]
    fn lr_mean_takes_root_for_r2() {
        let f = stepfn(2);
        let m = lr_mean(&f, &rat_i(0), &rat_i(1), ProbeSide::Right, &tol12()).unwrap();
        // square of the enclosure must bracket the exact square mean
        let exact = crate::series::closed_form(2, &rat(1, 72)).unwrap() * rat_i(7);
        let sq = m.pow_int(2).unwrap();
        assert!(sq.contains(&exact));
        assert!(m.width() < rat(1, 1_000_000));
    }

    #[test]
    fn continuity_modulus_shrinks_along_residual_radii() {
        // at x = 0 (a certified P point with F = 0) the modulus at
        // h = 1/4 is 11/75 and at h = 1/16 it is 16/225
        let f = stepfn(1);
        let m1 = continuity_modulus(&f, &rat_i(0), &rat(1, 4), ProbeSide::Right, &tol12()).unwrap();
        assert_eq!(*m1.lo(), rat(11, 75));
        let m2 =
            continuity_modulus(&f, &rat_i(0), &rat(1, 16), ProbeSide::Right, &tol12()).unwrap();
        assert_eq!(*m2.lo(), rat(16, 225));
        assert!(m2.lo() < m1.lo());
    }

    #[test]
    fn derivative_inside_a_core_is_clean() {
        // F is constantly 1 near 1/2; slope 0 fits perfectly
        let f = stepfn(1);
        let p = derivate_probe(
            &f,
            &rat(1, 2),
            &rat_i(0),
            &rat(1, 100),
            ProbeSide::TwoSided,
            &tol12(),
        )
        .unwrap();
        assert!(p.mean.is_exact());
        assert_eq!(*p.mean.lo(), rat_i(0));
        assert_eq!(*p.quotient.lo(), rat_i(0));

        // slope 2 forces mean 2h and quotient 2 exactly
        let p = derivate_probe(
            &f,
            &rat(1, 2),
            &rat_i(2),
            &rat(1, 100),
            ProbeSide::TwoSided,
            &tol12(),
        )
        .unwrap();
        assert!(p.mean.is_exact());
        assert_eq!(*p.mean.lo(), rat(2, 100));
        assert_eq!(*p.quotient.lo(), rat_i(2));
    }

    #[test]
    fn decay_scan_flags_blowup_site() {
        // at x = 0 the quotient over h_n = r_n + u_n is the blow-up
        // quantity; it crosses 1/2 from n = 2 on
        let f = stepfn(1);
        let schedule: Vec<Rat> = (1..=4u32)
            .map(|n| {
                let s = f.scheme();
                let h = s.residual_mass(n).unwrap().lo() + s.removed_mass(n).unwrap().lo();
                h
            })
            .collect();
        assert_eq!(schedule[0], rat(3, 4));
        assert_eq!(schedule[1], rat(3, 16));
        let scan = decay_scan(
            &f,
            &rat_i(0),
            &rat_i(0),
            ProbeSide::Right,
            &schedule,
            &rat(1, 2),
            &tol12(),
        )
        .unwrap();
        assert_eq!(scan.rows.len(), 4);
        assert_eq!(*scan.rows[0].quotient.lo(), rat(244, 675));
        assert_eq!(*scan.rows[1].quotient.lo(), rat(1856, 2025));
        match &scan.verdict {
            DecayVerdict::ViolatesFloor { witness_h } => assert_eq!(*witness_h, rat(3, 16)),
            other => panic!("expected a floor violation, got {other:?}"),
        }
    }

    #[test]
    fn decay_scan_consistent_inside_core() {
        let f = stepfn(1);
        let schedule = vec![rat(1, 50), rat(1, 100), rat(1, 200)];
        let scan = decay_scan(
            &f,
            &rat(1, 2),
            &rat_i(0),
            ProbeSide::TwoSided,
            &schedule,
            &rat(1, 1000),
            &tol12(),
        )
        .unwrap();
        assert_eq!(scan.verdict, DecayVerdict::ConsistentWithDecay);
    }

    #[test]
    fn one_sided_power_mean_domination() {
        // on a mass-one window the s-mean is dominated by the r-mean
        // for s <= r; checked here for s = 1 vs the r = 2 scheme
        let f = stepfn(2);
        for (a, b) in [
            (rat_i(0), rat_i(1)),
            (rat_i(0), rat(1, 16)),
            (rat(1, 32), rat(3, 32)),
        ] {
            let h = &b - &a;
            let m1 = f
                .integral_pow(&a, &b, &rat_i(1), &tol12())
                .unwrap()
                .mul_rat(&h.recip());
            let m2 = f
                .integral_pow(&a, &b, &rat_i(2), &tol12())
                .unwrap()
                .mul_rat(&h.recip())
                .pow_nonneg(&rat(1, 2), f.scheme().precision())
                .unwrap();
            assert!(
                m1.lo() <= m2.hi(),
                "domination failed on [{}, {}]",
                rat_str(&a),
                rat_str(&b)
            );
        }
    }

    #[test]
    fn scan_validation() {
        let f = stepfn(1);
        assert!(decay_scan(
            &f,
            &rat_i(0),
            &rat_i(0),
            ProbeSide::Right,
            &[],
            &rat(1, 2),
            &tol12()
        )
        .is_err());
        assert!(decay_scan(
            &f,
            &rat_i(0),
            &rat_i(0),
            ProbeSide::Right,
            &[rat(1, 4)],
            &rat_i(0),
            &tol12()
        )
        .is_err());
    }
}
