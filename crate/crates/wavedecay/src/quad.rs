//! 1D adaptive Gauss–Kronrod quadrature and the two geometric integrals the
//! estimates are built from: averages over spheres S(x,t) and retarded
//! integrals over backward light cones K(x,t), both reduced to 1D through the
//! λ-substitution λ² = |x|² + t² + 2t|x|χ.
//!
//! The engine is deterministic: panels split in a reproducible order and the
//! final sum runs left-to-right, so results are bit-identical across runs and
//! thread counts.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::real::{powr, Real};
use crate::weights::bracket;

// Gauss 7 / Kronrod 15 nodes and weights on [-1, 1] (positive half).
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Options for the adaptive integrator.
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions<R> {
    pub rel_tol: R,
    pub abs_tol: R,
    pub max_panels: usize,
}

impl<R: Real> Default for QuadOptions<R> {
    fn default() -> Self {
        Self {
            rel_tol: R::of(1e-10),
            abs_tol: R::of(1e-300),
            max_panels: 4096,
        }
    }
}

impl<R: Real> QuadOptions<R> {
    pub fn with_rel_tol(rel_tol: R) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }
}

/// Value and error estimate of a quadrature.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult<R> {
    pub value: R,
    pub abs_error: R,
    pub panels: usize,
}

struct Panel<R> {
    a: R,
    b: R,
    value: R,
    error: R,
    seq: usize,
}

impl<R: Real> PartialEq for Panel<R> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error && self.seq == other.seq
    }
}
impl<R: Real> Eq for Panel<R> {}
impl<R: Real> PartialOrd for Panel<R> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<R: Real> Ord for Panel<R> {
    fn cmp(&self, other: &Self) -> Ordering {
        // max-heap on error; ties broken by insertion order for determinism
        self.error
            .partial_cmp(&other.error)
            .unwrap_or(Ordering::Equal)
            .then(other.seq.cmp(&self.seq))
    }
}

/// One Gauss7/Kronrod15 evaluation on [a, b]: (kronrod, error_estimate).
fn gk15<R: Real, F: Fn(R) -> R>(f: &F, a: R, b: R) -> (R, R) {
    let half = R::of(0.5);
    let center = half * (a + b);
    let half_len = half * (b - a);

    let fc = f(center);
    let mut res_g = R::of(WG[3]) * fc;
    let mut res_k = R::of(WGK[7]) * fc;
    let mut res_abs = R::of(WGK[7]) * fc.abs();

    let mut fv = [R::zero(); 14];
    for j in 0..7 {
        let x = half_len * R::of(XGK[j]);
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv[j] = f1;
        fv[7 + j] = f2;
        let sum = f1 + f2;
        res_k += R::of(WGK[j]) * sum;
        res_abs += R::of(WGK[j]) * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += R::of(WG[j / 2]) * sum;
        }
    }

    let mean = res_k * half;
    let mut res_asc = R::of(WGK[7]) * (fc - mean).abs();
    for j in 0..7 {
        res_asc += R::of(WGK[j]) * ((fv[j] - mean).abs() + (fv[7 + j] - mean).abs());
    }

    let value = res_k * half_len;
    res_abs *= half_len.abs();
    res_asc *= half_len.abs();

    // QUADPACK-style rescaled error estimate
    let mut err = ((res_k - res_g) * half_len).abs();
    if res_asc != R::zero() && err != R::zero() {
        let scale = powr(R::of(200.0) * err / res_asc, R::of(1.5));
        err = if scale < R::one() {
            res_asc * scale
        } else {
            res_asc
        };
    }
    let tiny = R::min_positive_value() / (R::of(50.0) * R::epsilon());
    if res_abs > tiny {
        err = err.max(R::of(50.0) * R::epsilon() * res_abs);
    }
    (value, err)
}

/// Adaptive integral of `f` over [a, b], pre-split at `breakpoints`.
///
/// Breakpoints outside (a, b) are ignored. Fails with the achieved tolerance
/// if `max_panels` is exhausted, and on non-finite integrand values.
pub fn integrate<R: Real, F: Fn(R) -> R>(
    f: F,
    a: R,
    b: R,
    breakpoints: &[R],
    opts: &QuadOptions<R>,
) -> Result<QuadResult<R>> {
    if b <= a {
        if b == a {
            return Ok(QuadResult {
                value: R::zero(),
                abs_error: R::zero(),
                panels: 0,
            });
        }
        return Err(Error::invalid("bounds", format!("need a < b, got [{a}, {b}]")));
    }

    let mut edges: Vec<R> = breakpoints
        .iter()
        .copied()
        .filter(|&x| x > a && x < b)
        .collect();
    edges.sort_by(|u, v| u.partial_cmp(v).unwrap_or(Ordering::Equal));
    edges.dedup();
    edges.insert(0, a);
    edges.push(b);

    let mut heap = BinaryHeap::new();
    let mut seq = 0usize;
    let mut total_val = R::zero();
    let mut total_err = R::zero();
    let mut n_panels = 0usize;

    let push = |heap: &mut BinaryHeap<Panel<R>>,
                    lo: R,
                    hi: R,
                    seq: &mut usize,
                    total_val: &mut R,
                    total_err: &mut R,
                    n: &mut usize|
     -> Result<()> {
        let (v, e) = gk15(&f, lo, hi);
        if !v.is_finite() {
            return Err(Error::invalid(
                "integrand",
                format!("non-finite value integrating over [{lo}, {hi}]"),
            ));
        }
        *total_val += v;
        *total_err += e;
        *n += 1;
        heap.push(Panel {
            a: lo,
            b: hi,
            value: v,
            error: e,
            seq: *seq,
        });
        *seq += 1;
        Ok(())
    };

    for w in edges.windows(2) {
        push(&mut heap, w[0], w[1], &mut seq, &mut total_val, &mut total_err, &mut n_panels)?;
    }

    let span = b - a;
    let min_width = span * R::epsilon() * R::of(16.0);
    loop {
        let budget = opts.abs_tol.max(opts.rel_tol * total_val.abs());
        if total_err <= budget {
            break;
        }
        if n_panels >= opts.max_panels {
            return Err(Error::QuadratureNonConvergence {
                achieved: total_err.as_f64(),
                requested: budget.as_f64(),
                context: format!("{n_panels} panels over [{a}, {b}]"),
            });
        }
        let worst = heap.pop().expect("heap cannot be empty while error > 0");
        if worst.b - worst.a <= min_width {
            // cannot subdivide further; accept this panel's error as floor
            if worst.error > budget {
                return Err(Error::QuadratureNonConvergence {
                    achieved: total_err.as_f64(),
                    requested: budget.as_f64(),
                    context: format!("panel width exhausted near {}", worst.a),
                });
            }
            // push back with zeroed error so it never resurfaces
            total_err -= worst.error;
            heap.push(Panel {
                error: R::zero(),
                ..worst
            });
            continue;
        }
        total_val -= worst.value;
        total_err -= worst.error;
        n_panels -= 1;
        let mid = R::of(0.5) * (worst.a + worst.b);
        push(&mut heap, worst.a, mid, &mut seq, &mut total_val, &mut total_err, &mut n_panels)?;
        push(&mut heap, mid, worst.b, &mut seq, &mut total_val, &mut total_err, &mut n_panels)?;
    }

    // canonical left-to-right summation for reproducibility
    let mut panels: Vec<Panel<R>> = heap.into_vec();
    panels.sort_by(|u, v| u.a.partial_cmp(&v.a).unwrap_or(Ordering::Equal));
    let mut value = R::zero();
    let mut error = R::zero();
    for p in &panels {
        value += p.value;
        error += p.error;
    }
    Ok(QuadResult {
        value,
        abs_error: error,
        panels: panels.len(),
    })
}

/// ∫₀^∞ f(r) dr split as ∫₀¹ f + ∫₀¹ f(1/w)/w² dw.
///
/// `breaks_r` are breakpoints in r-space; the integrand must decay fast
/// enough that f(1/w)/w² stays finite as w → 0.
pub fn integrate_semi_infinite<R: Real, F: Fn(R) -> R>(
    f: F,
    breaks_r: &[R],
    opts: &QuadOptions<R>,
) -> Result<QuadResult<R>> {
    let one = R::one();
    let lower: Vec<R> = breaks_r.iter().copied().filter(|&r| r < one).collect();
    let upper: Vec<R> = breaks_r
        .iter()
        .copied()
        .filter(|&r| r > one)
        .map(|r| one / r)
        .collect();
    let near = integrate(&f, R::zero(), one, &lower, opts)?;
    let far = integrate(
        |w: R| {
            let r = one / w;
            f(r) * r * r
        },
        R::zero(),
        one,
        &upper,
        opts,
    )?;
    Ok(QuadResult {
        value: near.value + far.value,
        abs_error: near.abs_error + far.abs_error,
        panels: near.panels + far.panels,
    })
}

/// Radial integrand profile handed to the sphere/cone integrators.
pub struct RadialKernel<'a, R> {
    eval: &'a (dyn Fn(R) -> R + Sync),
    /// kink/support edges of the profile, used as quadrature breakpoints
    breakpoints: Vec<R>,
    pub description: String,
}

impl<'a, R: Real> RadialKernel<'a, R> {
    pub fn new(description: impl Into<String>, eval: &'a (dyn Fn(R) -> R + Sync)) -> Self {
        Self {
            eval,
            breakpoints: Vec::new(),
            description: description.into(),
        }
    }

    pub fn with_breakpoints(mut self, breakpoints: Vec<R>) -> Self {
        self.breakpoints = breakpoints;
        self
    }

    #[inline]
    pub fn eval(&self, r: R) -> R {
        (self.eval)(r)
    }
}

/// Relative radius below which a sphere is treated as concentric.
pub fn concentric_threshold<R: Real>(t: R) -> R {
    R::of(1e-12) * R::one().max(t)
}

/// (1/4π) ∫_{S(x,t)} kernel(|y|) dσ(y) for a radial kernel.
///
/// For x > 0 this is the 1D integral t/(2|x|) ∫ λ·kernel(λ) dλ over
/// λ ∈ [|t−|x||, t+|x|]; the concentric case x = 0 degenerates to
/// t²·kernel(t).
pub fn sphere_average_radial<R: Real>(
    x_norm: R,
    t: R,
    kernel: &RadialKernel<'_, R>,
    opts: &QuadOptions<R>,
) -> Result<QuadResult<R>> {
    if t <= R::zero() {
        return Err(Error::invalid("t", format!("sphere radius must be positive, got {t}")));
    }
    if x_norm < R::zero() {
        return Err(Error::invalid("x_norm", format!("|x| must be >= 0, got {x_norm}")));
    }
    if x_norm < concentric_threshold(t) {
        return Ok(QuadResult {
            value: t * t * kernel.eval(t),
            abs_error: R::zero(),
            panels: 0,
        });
    }
    let lo = (t - x_norm).abs();
    let hi = t + x_norm;
    let q = integrate(|lam| lam * kernel.eval(lam), lo, hi, &kernel.breakpoints, opts)?;
    let scale = t / (R::of(2.0) * x_norm);
    Ok(QuadResult {
        value: scale * q.value,
        abs_error: scale * q.abs_error,
        panels: q.panels,
    })
}

/// Exact value of (1/4π) ∫_{S(x,t)} ⟨y⟩^(−p) dσ(y) for p > 2, x > 0.
///
/// The λ-integral of λ(1+λ)^(−p) has an elementary antiderivative; it is
/// evaluated here in a cancellation-free arrangement based on expm1/ln_1p so
/// the closed form stays accurate when the two λ-limits are close.
pub fn sphere_integral_closed_form<R: Real>(x_norm: R, t: R, p: R) -> Result<R> {
    let two = R::of(2.0);
    if p <= two {
        return Err(Error::invalid("p", format!("closed form needs p > 2, got {p}")));
    }
    if t <= R::zero() {
        return Err(Error::invalid("t", format!("need t > 0, got {t}")));
    }
    if x_norm <= R::zero() {
        return Err(Error::invalid(
            "x_norm",
            format!("closed form needs |x| > 0 (use the concentric branch at 0), got {x_norm}"),
        ));
    }
    let lo = (t - x_norm).abs();
    let hi = t + x_norm;
    let one_lo = R::one() + lo;
    // L = ln((1+hi)/(1+lo)), computed as ln(1 + (hi-lo)/(1+lo))
    let l = ((hi - lo) / one_lo).ln_1p();
    let e2 = powr(one_lo, two - p) * (-((-(p - two) * l).exp_m1())) / (p - two);
    let e1 = powr(one_lo, R::one() - p) * (-((-(p - R::one()) * l).exp_m1())) / (p - R::one());
    Ok(t / (two * x_norm) * (e2 - e1))
}

/// Exponents of the light-cone kernel 1/((t−s)⟨y⟩^q⟨s+|y|⟩⟨s−|y|⟩^(p−1)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeKernelParams<R> {
    pub p: R,
    pub q: R,
}

impl<R: Real> ConeKernelParams<R> {
    pub fn new(p: R, q: R) -> Result<Self> {
        if q <= R::of(2.0) {
            return Err(Error::invalid("q", format!("cone kernel needs q > 2, got {q}")));
        }
        if p <= R::one() {
            return Err(Error::invalid("p", format!("cone kernel needs p > 1, got {p}")));
        }
        if q < p {
            return Err(Error::invalid(
                "(p, q)",
                format!("cone kernel needs q >= p, got p = {p}, q = {q}"),
            ));
        }
        Ok(Self { p, q })
    }
}

/// Retarded light-cone integral (1/4π) ∫_{K(x,t)} F(s,|y|)/(t−s) dκ(s,y)
/// of a radial-in-space source F.
///
/// The cone splits into time slices; each slice is a sphere S(x, t−s) whose
/// average reduces to a λ-integral. `inner_breaks(s)` supplies λ-kinks of F
/// at slice s. The s-range is split at s = t−|x| where the inner limits
/// collide, plus any caller breakpoints.
pub fn cone_retarded_integral<R, F, B>(
    x_norm: R,
    t: R,
    source: F,
    inner_breaks: B,
    outer_breaks: &[R],
    opts: &QuadOptions<R>,
) -> Result<QuadResult<R>>
where
    R: Real,
    F: Fn(R, R) -> R,
    B: Fn(R) -> Vec<R>,
{
    if t <= R::zero() {
        return Err(Error::invalid("t", format!("cone needs t > 0, got {t}")));
    }
    if x_norm < R::zero() {
        return Err(Error::invalid("x_norm", format!("|x| must be >= 0, got {x_norm}")));
    }

    let inner_opts = QuadOptions {
        rel_tol: opts.rel_tol * R::of(0.5),
        abs_tol: opts.abs_tol * R::of(0.5),
        max_panels: opts.max_panels,
    };
    let concentric = x_norm < concentric_threshold(t);
    let inner_failure: RefCell<Option<Error>> = RefCell::new(None);
    let worst_inner_rel: RefCell<R> = RefCell::new(R::zero());

    let integrand = |s: R| -> R {
        let rho = t - s;
        if rho <= R::zero() {
            return R::zero();
        }
        if concentric {
            return rho * source(s, rho);
        }
        let lo = (rho - x_norm).abs();
        let hi = rho + x_norm;
        let breaks = inner_breaks(s);
        match integrate(|lam| lam * source(s, lam), lo, hi, &breaks, &inner_opts) {
            Ok(q) => {
                if q.value != R::zero() {
                    let rel = (q.abs_error / q.value.abs()).min(R::one());
                    let mut w = worst_inner_rel.borrow_mut();
                    if rel > *w {
                        *w = rel;
                    }
                }
                q.value / (R::of(2.0) * x_norm)
            }
            Err(e) => {
                inner_failure.borrow_mut().get_or_insert(e);
                R::nan()
            }
        }
    };

    let mut breaks: Vec<R> = outer_breaks.to_vec();
    if !concentric {
        breaks.push(t - x_norm);
        breaks.push((t - x_norm) * R::of(0.5));
        breaks.push((t + x_norm) * R::of(0.5));
    }
    let outer = integrate(integrand, R::zero(), t, &breaks, opts);
    if let Some(e) = inner_failure.into_inner() {
        return Err(e);
    }
    let outer = outer?;
    let inner_rel = worst_inner_rel.into_inner();
    Ok(QuadResult {
        value: outer.value,
        abs_error: outer.abs_error + outer.value.abs() * inner_rel,
        panels: outer.panels,
    })
}

/// (1/4π) ∫_{K(x,t)} dκ / ((t−s) ⟨y⟩^q ⟨s+|y|⟩ ⟨s−|y|⟩^(p−1)).
pub fn cone_integral<R: Real>(
    x_norm: R,
    t: R,
    params: ConeKernelParams<R>,
    opts: &QuadOptions<R>,
) -> Result<QuadResult<R>> {
    let ConeKernelParams { p, q } = params;
    cone_retarded_integral(
        x_norm,
        t,
        |s: R, lam: R| {
            (powr(bracket(lam), q) * bracket(s + lam) * powr(bracket(s - lam), p - R::one()))
                .recip()
        },
        // the |s−λ| kink sits at λ = s
        |s: R| vec![s],
        &[],
        opts,
    )
}

/// Default tolerance for sphere quadrature.
pub fn sphere_opts<R: Real>() -> QuadOptions<R> {
    QuadOptions::with_rel_tol(R::of(1e-10))
}

/// Default tolerance for cone quadrature.
pub fn cone_opts<R: Real>() -> QuadOptions<R> {
    QuadOptions::with_rel_tol(R::of(1e-6))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn kernel_pow<'a>(p: f64, f: &'a (dyn Fn(f64) -> f64 + Sync)) -> RadialKernel<'a, f64> {
        RadialKernel::new(format!("1/<r>^{p}"), f)
    }

    #[test]
    fn integrates_polynomials_exactly() {
        let q = integrate(|x: f64| x * x * x - 2.0 * x + 1.0, -1.0, 3.0, &[], &QuadOptions::default())
            .unwrap();
        // antiderivative x^4/4 - x^2 + x
        assert_relative_eq!(q.value, (81.0 / 4.0 - 9.0 + 3.0) - (0.25 - 1.0 - 1.0), epsilon = 1e-13);
    }

    #[test]
    fn respects_breakpoints_for_kinks() {
        let q = integrate(|x: f64| (x - 0.3).abs(), 0.0, 1.0, &[0.3], &QuadOptions::default())
            .unwrap();
        let exact = 0.3_f64.powi(2) / 2.0 + 0.7_f64.powi(2) / 2.0;
        assert_relative_eq!(q.value, exact, max_relative = 1e-12);
    }

    #[test]
    fn reports_non_convergence() {
        let opts = QuadOptions {
            rel_tol: 1e-14,
            abs_tol: 0.0,
            max_panels: 4,
        };
        let r = integrate(|x: f64| (1e4 * x).sin() / (x + 1e-3).sqrt(), 0.0, 1.0, &[], &opts);
        assert!(matches!(r, Err(Error::QuadratureNonConvergence { .. })));
    }

    #[test]
    fn semi_infinite_model_moment() {
        // int_0^inf r (1+r)^-3 dr = 1/2
        let q = integrate_semi_infinite(
            |r: f64| r / (1.0 + r).powi(3),
            &[],
            &QuadOptions::default(),
        )
        .unwrap();
        assert_relative_eq!(q.value, 0.5, max_relative = 1e-12);
    }

    #[test]
    fn sphere_concentric_identity() {
        let f = |r: f64| 1.0 / (1.0 + r).powi(4);
        let k = kernel_pow(4.0, &f);
        let q = sphere_average_radial(0.0, 1.0, &k, &sphere_opts()).unwrap();
        assert_eq!(q.value, 1.0 / 16.0);
    }

    #[test]
    fn sphere_lambda_route_reference_value() {
        let f = |r: f64| 1.0 / (1.0 + r).powi(3);
        let k = kernel_pow(3.0, &f);
        let q = sphere_average_radial(1.0, 1.0, &k, &sphere_opts()).unwrap();
        assert_relative_eq!(q.value, 1.0 / 9.0, max_relative = 1e-12);
    }

    #[test]
    fn sphere_degenerates_as_t_to_zero() {
        let f = |r: f64| 1.0 / (1.0 + r).powi(3);
        let k = kernel_pow(3.0, &f);
        let q = sphere_average_radial(0.5, 1e-8, &k, &sphere_opts()).unwrap();
        assert!(q.value.abs() < 1e-7);
        assert!(sphere_average_radial(0.5, 0.0, &k, &sphere_opts()).is_err());
    }

    /// Independent route: the sphere average via the cos θ parametrization,
    /// (ρ²/2) ∫_{−1}^{1} kernel(√(x²+ρ²+2ρxχ)) dχ with plain Simpson panels.
    fn sphere_chi_oracle(x: f64, t: f64, kernel: impl Fn(f64) -> f64, n: usize) -> f64 {
        let h = 2.0 / n as f64;
        let lam = |chi: f64| (x * x + t * t + 2.0 * t * x * chi).max(0.0).sqrt();
        let mut s = kernel(lam(-1.0)) + kernel(lam(1.0));
        for i in 1..n {
            let chi = -1.0 + i as f64 * h;
            s += kernel(lam(chi)) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        t * t / 2.0 * s * h / 3.0
    }

    #[test]
    fn closed_form_matches_lambda_and_chi_routes() {
        for &(x, t, p) in &[
            (1.0, 1.0, 3.0),
            (2.0, 1.0, 4.0),
            (0.3, 7.0, 2.5),
            (40.0, 55.0, 6.0),
            (0.01, 90.0, 2.1),
        ] {
            let cf = sphere_integral_closed_form(x, t, p).unwrap();
            let f = |r: f64| (1.0 + r).powf(-p);
            let k = RadialKernel::new("pow", &f);
            let quad = sphere_average_radial(x, t, &k, &sphere_opts()).unwrap();
            assert_relative_eq!(cf, quad.value, max_relative = 1e-10);
            // the χ route has a sqrt kink at χ = −1 when t = x, so Simpson
            // only reaches ~1e-6 here; it is a sanity cross-check
            let chi = sphere_chi_oracle(x, t, f, 80_000);
            assert_relative_eq!(cf, chi, max_relative = 5e-6);
        }
    }

    #[test]
    fn closed_form_beats_lemma_bound_at_reference_point() {
        // p=4, x=2, t=1: bound c_4 * t/(x * <t-x>^2) = 1/32
        let v = sphere_integral_closed_form(2.0, 1.0, 4.0).unwrap();
        assert!(v <= 0.03125);
        assert!(v > 0.0);
    }

    #[test]
    fn closed_form_rejects_bad_params() {
        assert!(sphere_integral_closed_form(1.0, 1.0, 2.0).is_err());
        assert!(sphere_integral_closed_form(0.0, 1.0, 3.0).is_err());
        assert!(sphere_integral_closed_form(1.0, 0.0, 3.0).is_err());
    }

    #[test]
    fn closed_form_decreasing_in_p() {
        let mut prev = f64::INFINITY;
        for &p in &[2.2, 2.7, 3.5, 4.5, 6.0, 8.0] {
            let v = sphere_integral_closed_form(1.5, 2.5, p).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn cone_integral_frozen_reference_values() {
        // frozen from two independent quadrature routes (χ-parametrized
        // brute force and nested adaptive λ-integrals)
        let opts = cone_opts();
        let cases = [
            (1.0, 2.0, 3.0, 3.0, 0.023601246527),
            (1.0, 2.0, 2.5, 2.5, 0.039759134728),
            (0.5, 5.0, 3.0, 4.0, 0.002914998620),
            (2.0, 10.0, 2.5, 4.0, 0.000808774273),
        ];
        for &(x, t, p, q, want) in &cases {
            let params = ConeKernelParams::new(p, q).unwrap();
            let got = cone_integral(x, t, params, &opts).unwrap();
            assert_relative_eq!(got.value, want, max_relative = 1e-6);
            assert!(got.abs_error / got.value < 1e-4);
        }
    }

    #[test]
    fn cone_integral_bounded_by_its_estimate() {
        // value at (x=1, t=2, p=q=3) sits under C_{3,3}/(<3><1>^2) = 10.125
        let params = ConeKernelParams::new(3.0, 3.0).unwrap();
        let got = cone_integral(1.0, 2.0, params, &cone_opts()).unwrap();
        assert!(got.value <= 162.0 / 16.0);
        assert!(got.value <= 162.0 / 5.0);
    }

    #[test]
    fn cone_degenerates_as_t_to_zero() {
        let params = ConeKernelParams::new(3.0, 3.0).unwrap();
        let got = cone_integral(1.0, 1e-6, params, &cone_opts()).unwrap();
        assert!(got.value < 1e-6);
        assert!(cone_integral(1.0, 0.0, params, &cone_opts()).is_err());
    }

    #[test]
    fn cone_self_consistency_under_refinement() {
        let params = ConeKernelParams::new(3.0, 4.0).unwrap();
        let coarse =
            cone_integral(1.5_f64, 3.0, params, &QuadOptions::with_rel_tol(1e-5)).unwrap();
        let fine = cone_integral(1.5_f64, 3.0, params, &QuadOptions::with_rel_tol(1e-9)).unwrap();
        assert!((coarse.value - fine.value).abs() <= coarse.abs_error + fine.abs_error);
    }

    #[test]
    fn cone_params_validation() {
        assert!(ConeKernelParams::new(3.0, 2.0).is_err());
        assert!(ConeKernelParams::new(0.5, 3.0).is_err());
        assert!(ConeKernelParams::new(4.0, 3.0).is_err());
    }

    #[test]
    fn concentric_limit_of_lambda_route() {
        // x -> 0+ above the concentric threshold still matches t^2 k(t)
        let f = |r: f64| 1.0 / (1.0 + r).powi(4);
        let k = kernel_pow(4.0, &f);
        for t in [0.5, 1.0, 7.0] {
            let q = sphere_average_radial(1e-6, t, &k, &sphere_opts()).unwrap();
            let exact = t * t * f(t);
            assert_relative_eq!(q.value, exact, max_relative = 1e-8);
        }
    }

    #[test]
    fn cone_integral_nonnegative_rises_then_decays() {
        // the integral follows the shape of its own estimate
        // 1/(<t+x><t-x>^(p-1)): it grows while the cone fills in and decays
        // once <t-x> takes over (peak near t ~ 2 for x = 1, p = q = 3)
        let params = ConeKernelParams::new(3.0, 3.0).unwrap();
        let opts = cone_opts();
        let at = |t: f64| cone_integral(1.0, t, params, &opts).unwrap().value;
        let mut prev = 0.0;
        for t in [0.25_f64, 0.5, 1.0, 2.0] {
            let v = at(t);
            assert!(v >= 0.0);
            assert!(v > prev, "cone integral not increasing at t = {t}");
            prev = v;
        }
        let (peak, late, later) = (at(2.0), at(4.0), at(8.0));
        assert!(late < peak && later < late);
        // frozen from the independent nested-quadrature oracle
        assert_relative_eq!(late, 0.01224103, max_relative = 1e-5);
    }

    /// Fubini cross-check: the nested λ-route against a direct 2D rule that
    /// never uses the λ-substitution (Simpson in s of χ-parametrized sphere
    /// integrals).
    #[test]
    fn cone_integral_matches_2d_brute_force() {
        let (x, t, p, q) = (1.0, 2.0, 3.0, 3.0);
        let n_s = 2000;
        let mut brute = 0.0;
        for i in 0..n_s {
            let s = (i as f64 + 0.5) * t / n_s as f64;
            let rho = t - s;
            let h = |lam: f64| {
                1.0 / ((1.0 + lam).powi(3)
                    * (1.0 + s + lam)
                    * (1.0 + (s - lam).abs()).powi(2))
            };
            // sphere integral of radius rho via the χ route, divided by (t−s)
            let n = 400;
            let dchi = 2.0 / n as f64;
            let lam = |chi: f64| (x * x + rho * rho + 2.0 * rho * x * chi).max(0.0).sqrt();
            let mut sphere = h(lam(-1.0)) + h(lam(1.0));
            for j in 1..n {
                let chi = -1.0 + j as f64 * dchi;
                sphere += h(lam(chi)) * if j % 2 == 1 { 4.0 } else { 2.0 };
            }
            let sphere = rho * rho / 2.0 * sphere * dchi / 3.0;
            brute += sphere / rho;
        }
        brute *= t / n_s as f64;
        let params = ConeKernelParams::new(p, q).unwrap();
        let got = cone_integral(x, t, params, &cone_opts()).unwrap();
        assert_relative_eq!(got.value, brute, max_relative = 1e-4);
    }

    #[test]
    fn engine_is_scalar_generic() {
        // f32 cannot certify much below ~50 eps of the integral scale
        let q = integrate(|x: f32| x * x, 0.0_f32, 1.0, &[], &QuadOptions {
            rel_tol: 1e-4,
            abs_tol: 1e-12,
            max_panels: 256,
        })
        .unwrap();
        assert!((q.value - 1.0 / 3.0).abs() < 1e-5);
        let v = sphere_integral_closed_form(1.0_f32, 1.0, 3.0).unwrap();
        assert!((v - 1.0 / 9.0).abs() < 1e-6);
    }

    #[test]
    fn deterministic_bitwise() {
        let run = || {
            let f = |r: f64| 1.0 / (1.0 + r).powf(2.7);
            let k = RadialKernel::new("pow", &f);
            sphere_average_radial(3.0, 11.0, &k, &sphere_opts()).unwrap().value
        };
        let a = run();
        let b = run();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
