//! Bracket weight ⟨s⟩ = 1 + |s|, the weighted sup-norm machinery, and the
//! explicit constants of the decay estimates.
//!
//! The norm in play is
//! `||H|| = sup ⟨t+|x|⟩^r ⟨t−|x|⟩^(p−r) |H(t,x)|`,
//! which encodes decay `1/t^r` along the light cone and `1/t^p` at timelike
//! infinity. All constants below are the exact closed forms; nothing here is
//! allowed to drift beyond rounding of the formula itself.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::{powr, Real};

/// Japanese bracket ⟨s⟩ = 1 + |s|.
#[inline]
pub fn bracket<R: Real>(s: R) -> R {
    R::one() + s.abs()
}

/// c_p = 1/(2(p−2)), defined for p > 2.
pub fn little_c<R: Real>(p: R) -> Result<R> {
    let two = R::of(2.0);
    if p <= two {
        return Err(Error::invalid("p", format!("c_p needs p > 2, got {p}")));
    }
    Ok((two * (p - two)).recip())
}

/// C¹_p = max(9/(2(p−2)), 4), defined for p > 2.
pub fn big_c1<R: Real>(p: R) -> Result<R> {
    let two = R::of(2.0);
    if p <= two {
        return Err(Error::invalid("p", format!("C1_p needs p > 2, got {p}")));
    }
    Ok((R::of(9.0) / (two * (p - two))).max(R::of(4.0)))
}

/// C²_p = max(3/(p−1), 5), defined for p > 1.
pub fn big_c2<R: Real>(p: R) -> Result<R> {
    if p <= R::one() {
        return Err(Error::invalid("p", format!("C2_p needs p > 1, got {p}")));
    }
    Ok((R::of(3.0) / (p - R::one())).max(R::of(5.0)))
}

/// C_m = max(9/(2(m−2)), 5), defined for m > 2.
pub fn big_cm<R: Real>(m: R) -> Result<R> {
    let two = R::of(2.0);
    if m <= two {
        return Err(Error::invalid("m", format!("C_m needs m > 2, got {m}")));
    }
    Ok((R::of(9.0) / (two * (m - two))).max(R::of(5.0)))
}

/// C_{p,q} = (3/2) · 6^(q−1)/(q−2) · max(2/(p−1), 3), for q > 2, p > 1.
pub fn c_pq<R: Real>(p: R, q: R) -> Result<R> {
    let two = R::of(2.0);
    if q <= two {
        return Err(Error::invalid("q", format!("C_pq needs q > 2, got {q}")));
    }
    if p <= R::one() {
        return Err(Error::invalid("p", format!("C_pq needs p > 1, got {p}")));
    }
    let pow6 = powr(R::of(6.0), q - R::one());
    Ok(R::of(1.5) * pow6 / (q - two) * (two / (p - R::one())).max(R::of(3.0)))
}

/// Exponent pair (r, p) of the space-time weight ⟨t+|x|⟩^r ⟨t−|x|⟩^(p−r).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedNormParams<R> {
    pub r: R,
    pub p: R,
}

impl<R: Real> WeightedNormParams<R> {
    pub fn new(r: R, p: R) -> Result<Self> {
        if !(r >= R::zero() && p >= r) {
            return Err(Error::invalid(
                "(r, p)",
                format!("need p >= r >= 0, got r = {r}, p = {p}"),
            ));
        }
        Ok(Self { r, p })
    }

    /// The usual choice for the decay theorems: r = 1.
    pub fn lightcone(p: R) -> Result<Self> {
        Self::new(R::one(), p)
    }
}

/// ⟨t+x⟩^r ⟨t−x⟩^(p−r) for a point with |x| = x_norm.
pub fn weight<R: Real>(t: R, x_norm: R, params: WeightedNormParams<R>) -> R {
    powr(bracket(t + x_norm), params.r) * powr(bracket(t - x_norm), params.p - params.r)
}

/// Finite set of (t, |x|) evaluation points with field values: the discrete
/// stand-in for the continuum sup norm.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpacetimeSampleSet<R> {
    points: Vec<(R, R)>,
    values: Vec<R>,
}

impl<R: Real> SpacetimeSampleSet<R> {
    pub fn new(points: Vec<(R, R)>, values: Vec<R>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::invalid(
                "values",
                format!("{} points but {} values", points.len(), values.len()),
            ));
        }
        for &(t, x) in &points {
            if t < R::zero() || x < R::zero() {
                return Err(Error::invalid(
                    "points",
                    format!("need t >= 0 and |x| >= 0, got ({t}, {x})"),
                ));
            }
        }
        Ok(Self { points, values })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[(R, R)] {
        &self.points
    }

    pub fn values(&self) -> &[R] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = ((R, R), R)> + '_ {
        self.points.iter().copied().zip(self.values.iter().copied())
    }
}

/// Discrete weighted sup: max over samples of weight(t,x)·|value|.
///
/// This is a lower bound of the continuum sup norm; how well it approximates
/// the sup is entirely a property of the sample set the caller supplies.
pub fn weighted_sup<R: Real>(
    samples: &SpacetimeSampleSet<R>,
    params: WeightedNormParams<R>,
) -> Result<R> {
    if samples.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let mut sup = R::zero();
    for ((t, x), v) in samples.iter() {
        sup = sup.max(weight(t, x, params) * v.abs());
    }
    Ok(sup)
}

/// Everything Theorem-level: the individual constants, the contraction
/// factor δ = C_{p,k}·V₀ and the composite decay constant
/// C = C_m(f₀+f₁+g₀)/(1−δ).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConstantSet<R> {
    pub p: R,
    pub c_p: R,
    pub c1_p: R,
    pub c2_p: R,
    pub c_m: R,
    pub c_pk: R,
    pub delta: R,
    /// `None` when δ >= 1 (the composite constant is meaningless there).
    pub c_total: Option<R>,
    /// δ < 1; when false every consumer must label the run
    /// "outside contraction regime".
    pub contractive: bool,
}

/// Constants of the decay theorem for data amplitudes (f₀, f₁, g₀) with decay
/// exponent m > 3 and a potential of amplitude V₀ >= 0 with decay k > 2.
///
/// δ >= 1 is reported as a status, not an error, so exploratory runs outside
/// the contraction regime remain possible.
pub fn theorem_constants<R: Real>(
    f0: R,
    f1: R,
    g0: R,
    m: R,
    v0: R,
    k: R,
) -> Result<ConstantSet<R>> {
    if m <= R::of(3.0) {
        return Err(Error::invalid("m", format!("need m > 3, got {m}")));
    }
    if k <= R::of(2.0) {
        return Err(Error::invalid("k", format!("need k > 2, got {k}")));
    }
    for (name, a) in [("f0", f0), ("f1", f1), ("g0", g0), ("v0", v0)] {
        if a < R::zero() {
            return Err(Error::invalid("amplitude", format!("{name} must be >= 0, got {a}")));
        }
    }
    let p = k.min(m - R::one());
    let c_pk = c_pq(p, k)?;
    let delta = c_pk * v0;
    let contractive = delta < R::one();
    let c_total = if contractive {
        Some(big_cm(m)? * (f0 + f1 + g0) / (R::one() - delta))
    } else {
        None
    };
    Ok(ConstantSet {
        p,
        c_p: little_c(p)?,
        c1_p: big_c1(p)?,
        c2_p: big_c2(p)?,
        c_m: big_cm(m)?,
        c_pk,
        delta,
        c_total,
        contractive,
    })
}

/// Constants for the sourced problem: p = min(k, m−1, r) and
/// C = (C_m(f₀+f₁+g₀) + C_{r,q}F₀)/(1−δ).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SourceConstants<R> {
    pub p: R,
    pub delta: R,
    pub c_rq: R,
    pub c_total: Option<R>,
    pub contractive: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn corollary_source_constant<R: Real>(
    f0: R,
    f1: R,
    g0: R,
    cap_f0: R,
    m: R,
    k: R,
    q: R,
    r_exp: R,
    v0: R,
) -> Result<SourceConstants<R>> {
    if m <= R::of(3.0) {
        return Err(Error::invalid("m", format!("need m > 3, got {m}")));
    }
    if k <= R::of(2.0) {
        return Err(Error::invalid("k", format!("need k > 2, got {k}")));
    }
    if q <= R::of(2.0) {
        return Err(Error::invalid("q", format!("need q > 2, got {q}")));
    }
    if !(r_exp > R::one() && r_exp <= q) {
        return Err(Error::invalid(
            "r",
            format!("need 1 < r <= q, got r = {r_exp}, q = {q}"),
        ));
    }
    if cap_f0 < R::zero() {
        return Err(Error::invalid("F0", format!("need F0 >= 0, got {cap_f0}")));
    }
    let p = k.min(m - R::one()).min(r_exp);
    let c_pk = c_pq(p, k)?;
    let delta = c_pk * v0;
    let c_rq = c_pq(r_exp, q)?;
    let contractive = delta < R::one();
    let c_total = if contractive {
        Some((big_cm(m)? * (f0 + f1 + g0) + c_rq * cap_f0) / (R::one() - delta))
    } else {
        None
    };
    Ok(SourceConstants {
        p,
        delta,
        c_rq,
        c_total,
        contractive,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bracket_definition() {
        assert_eq!(bracket(0.0_f64), 1.0);
        assert_eq!(bracket(3.0_f64), 4.0);
        assert_eq!(bracket(-2.0_f64), 3.0);
    }

    #[test]
    fn little_c_values() {
        assert_eq!(little_c(4.0_f64).unwrap(), 0.25);
        assert_eq!(little_c(3.0_f64).unwrap(), 0.5);
        assert!(little_c(2.0_f64).is_err());
    }

    #[test]
    fn big_constant_values() {
        assert_eq!(big_c1(4.0_f64).unwrap(), 4.0);
        assert_eq!(big_c1(3.0_f64).unwrap(), 4.5);
        assert_eq!(big_c2(4.0_f64).unwrap(), 5.0);
        assert_eq!(big_cm(4.0_f64).unwrap(), 5.0);
        assert_eq!(big_cm(2.5_f64).unwrap(), 9.0);
    }

    #[test]
    fn c_pq_values() {
        assert_eq!(c_pq(3.0_f64, 3.0).unwrap(), 162.0);
        assert_eq!(c_pq(2.0_f64, 4.0).unwrap(), 486.0);
        assert_eq!(c_pq(5.0_f64, 3.0).unwrap(), 162.0);
        assert!(c_pq(3.0_f64, 2.0).is_err());
        assert!(c_pq(1.0_f64, 3.0).is_err());
    }

    #[test]
    fn theorem_constants_zero_potential() {
        let c = theorem_constants(1.0_f64, 1.0, 1.0, 4.0, 0.0, 3.0).unwrap();
        assert_eq!(c.p, 3.0);
        assert_eq!(c.delta, 0.0);
        assert_eq!(c.c_total.unwrap(), 15.0);
        assert!(c.contractive);
    }

    #[test]
    fn theorem_constants_reference_point() {
        let c = theorem_constants(1.0_f64, 1.0, 1.0, 4.0, 0.003, 3.0).unwrap();
        assert_eq!(c.p, 3.0);
        assert_relative_eq!(c.delta, 0.486, max_relative = 1e-12);
        assert_relative_eq!(c.c_total.unwrap(), 15.0 / 0.514, max_relative = 1e-12);
    }

    #[test]
    fn theorem_constants_zero_data() {
        let c = theorem_constants(0.0_f64, 0.0, 0.0, 4.0, 0.001, 3.0).unwrap();
        assert_eq!(c.c_total.unwrap(), 0.0);
    }

    #[test]
    fn theorem_constants_outside_regime_is_status() {
        let c = theorem_constants(1.0_f64, 1.0, 1.0, 4.0, 1.0, 3.0).unwrap();
        assert!(!c.contractive);
        assert!(c.c_total.is_none());
        assert!(c.delta >= 1.0);
    }

    #[test]
    fn corollary_reduces_to_theorem_when_sourceless() {
        let th = theorem_constants(1.0_f64, 1.0, 1.0, 4.0, 0.003, 3.0).unwrap();
        let co = corollary_source_constant(1.0_f64, 1.0, 1.0, 0.0, 4.0, 3.0, 3.0, 3.0, 0.003)
            .unwrap();
        assert_eq!(co.p, th.p);
        assert_eq!(co.c_total.unwrap(), th.c_total.unwrap());
    }

    #[test]
    fn corollary_reference_point() {
        let co =
            corollary_source_constant(1.0_f64, 1.0, 1.0, 1.0, 4.0, 3.0, 3.0, 3.0, 0.0).unwrap();
        assert_eq!(co.c_total.unwrap(), 177.0);
        assert!(
            corollary_source_constant(1.0_f64, 1.0, 1.0, 1.0, 4.0, 3.0, 3.0, 1.0, 0.0).is_err()
        );
    }

    #[test]
    fn weight_values() {
        let w = WeightedNormParams::new(1.0_f64, 3.0).unwrap();
        assert_eq!(weight(0.0, 0.0, w), 1.0);
        assert_eq!(weight(3.0, 3.0, w), 7.0);
        let w = WeightedNormParams::new(1.0_f64, 4.0).unwrap();
        assert_eq!(weight(5.0, 1.0, w), 875.0);
    }

    #[test]
    fn weighted_sup_basics() {
        let p = WeightedNormParams::new(1.0_f64, 3.0).unwrap();
        let s = SpacetimeSampleSet::new(vec![(0.0, 0.0)], vec![1.0]).unwrap();
        assert_eq!(weighted_sup(&s, p).unwrap(), 1.0);

        let pts = vec![(1.0, 0.5), (2.0, 2.0), (10.0, 1.0)];
        let zeros = SpacetimeSampleSet::new(pts.clone(), vec![0.0; 3]).unwrap();
        assert_eq!(weighted_sup(&zeros, p).unwrap(), 0.0);

        // values = 1/weight at each point makes the sup exactly 1
        let vals: Vec<f64> = pts.iter().map(|&(t, x)| 1.0 / weight(t, x, p)).collect();
        let s = SpacetimeSampleSet::new(pts, vals).unwrap();
        assert_relative_eq!(weighted_sup(&s, p).unwrap(), 1.0, max_relative = 1e-15);

        let empty = SpacetimeSampleSet::<f64>::new(vec![], vec![]).unwrap();
        assert!(matches!(weighted_sup(&empty, p), Err(Error::EmptySampleSet)));
    }

    #[test]
    fn sample_set_validation() {
        assert!(SpacetimeSampleSet::new(vec![(1.0_f64, 1.0)], vec![]).is_err());
        assert!(SpacetimeSampleSet::new(vec![(-1.0_f64, 1.0)], vec![0.0]).is_err());
    }

    #[test]
    fn generic_over_f32() {
        let c = theorem_constants(1.0_f32, 1.0, 1.0, 4.0, 0.0, 3.0).unwrap();
        assert_eq!(c.c_total.unwrap(), 15.0_f32);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn bracket_floor_and_symmetry(s in -1e6_f64..1e6) {
                prop_assert!(bracket(s) >= 1.0);
                prop_assert_eq!(bracket(s), bracket(-s));
            }

            #[test]
            fn weight_at_least_one(
                t in 0.0_f64..1e3,
                x in 0.0_f64..1e3,
                r in 0.0_f64..3.0,
                dp in 0.0_f64..3.0,
            ) {
                let params = WeightedNormParams::new(r, r + dp).unwrap();
                prop_assert!(weight(t, x, params) >= 1.0);
            }

            #[test]
            fn weighted_sup_triangle_inequality(
                pts in proptest::collection::vec((0.0_f64..50.0, 0.0_f64..50.0), 1..20),
                seed in 0_u64..1000,
            ) {
                use rand::{Rng, SeedableRng};
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let a: Vec<f64> = pts.iter().map(|_| rng.gen_range(-5.0..5.0)).collect();
                let b: Vec<f64> = pts.iter().map(|_| rng.gen_range(-5.0..5.0)).collect();
                let ab: Vec<f64> = a.iter().zip(&b).map(|(u, v)| u + v).collect();
                let params = WeightedNormParams::new(1.0, 3.0).unwrap();
                let sa = weighted_sup(&SpacetimeSampleSet::new(pts.clone(), a).unwrap(), params).unwrap();
                let sb = weighted_sup(&SpacetimeSampleSet::new(pts.clone(), b).unwrap(), params).unwrap();
                let sab = weighted_sup(&SpacetimeSampleSet::new(pts, ab).unwrap(), params).unwrap();
                prop_assert!(sab <= sa + sb + 1e-9 * (1.0 + sa + sb));
            }

            #[test]
            fn composite_constant_monotone(
                v0 in 0.0_f64..0.005,
                dv in 1e-6_f64..0.001,
                f0 in 0.0_f64..2.0,
                df in 1e-6_f64..1.0,
            ) {
                let lo = theorem_constants(f0, 1.0, 1.0, 4.0, v0, 3.0).unwrap();
                let hi_v = theorem_constants(f0, 1.0, 1.0, 4.0, v0 + dv, 3.0).unwrap();
                let hi_f = theorem_constants(f0 + df, 1.0, 1.0, 4.0, v0, 3.0).unwrap();
                prop_assert!(hi_v.c_total.unwrap() > lo.c_total.unwrap());
                prop_assert!(hi_f.c_total.unwrap() > lo.c_total.unwrap());
            }
        }
    }
}
