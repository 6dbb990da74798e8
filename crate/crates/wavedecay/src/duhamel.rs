//! Retarded-integral construction of decaying solutions: the free solution
//! from sphere averages of the data, the sourced solution from a light-cone
//! integral, and the contraction iteration
//! u_{n+1} = I₀(f,g) + L₀(F − V·u_n)
//! that solves □u + Vu = F on a fixed (t, r) sample grid.
//!
//! Inside the iteration the cone quadrature is a fixed, deterministic
//! composite Gauss rule aligned with the grid: the iterate is piecewise cubic
//! in r and piecewise linear in t, so per-cell moments of λV(λ)·u are exact
//! polynomials against smooth weights and can be precomputed per time level
//! with prefix sums. A fixed rule keeps the iteration an affine contraction,
//! which converges geometrically all the way to the stopping tolerance
//! instead of stalling at quadrature noise.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{cell_index, hermite, GridField, SolveGrid};
use crate::quad::{
    cone_retarded_integral, concentric_threshold, integrate, QuadOptions, QuadResult,
};
use crate::real::{powr, Real};
use crate::profiles::{sampled_sup, RadialProfile};
use crate::weights::{
    bracket, corollary_source_constant, theorem_constants, weight, weighted_sup,
    WeightedNormParams,
};

/// Slack used when validating declared decay amplitudes against sampling.
fn bound_tolerance<R: Real>() -> R {
    R::of(1.0 + 1e-9)
}

/// Radial initial data (f, g) with the decay exponents and amplitudes of the
/// bounds |f| <= f0/⟨r⟩^(m−1), |f'| <= f1/⟨r⟩^m, |g| <= g0/⟨r⟩^m.
#[derive(Debug, Clone)]
pub struct InitialDataSpec<R: Real> {
    pub f: RadialProfile<R>,
    pub g: RadialProfile<R>,
    pub m: R,
    pub f0: R,
    pub f1: R,
    pub g0: R,
}

impl<R: Real> InitialDataSpec<R> {
    /// Validates the declared amplitudes by dense sampling.
    pub fn new(
        f: RadialProfile<R>,
        g: RadialProfile<R>,
        m: R,
        f0: R,
        f1: R,
        g0: R,
    ) -> Result<Self> {
        if m <= R::of(3.0) {
            return Err(Error::invalid("m", format!("need m > 3, got {m}")));
        }
        // free_solution needs f' in closed form
        f.derivative(R::one())?;
        let spec = Self { f, g, m, f0, f1, g0 };
        for (name, claimed, actual) in [
            ("f0", spec.f0, spec.sampled_f0()?),
            ("f1", spec.f1, spec.sampled_f1()?),
            ("g0", spec.g0, spec.sampled_g0()?),
        ] {
            if actual > claimed * bound_tolerance() {
                return Err(Error::DataBoundViolated {
                    which: format!("{name} (claimed {claimed})"),
                    at: R::nan().as_f64(),
                    ratio: (actual / claimed.max(R::min_positive_value())).as_f64(),
                });
            }
        }
        Ok(spec)
    }

    /// Computes the amplitudes from the profiles themselves.
    pub fn with_fitted_amplitudes(f: RadialProfile<R>, g: RadialProfile<R>, m: R) -> Result<Self> {
        if m <= R::of(3.0) {
            return Err(Error::invalid("m", format!("need m > 3, got {m}")));
        }
        f.derivative(R::one())?;
        let mut spec = Self {
            f,
            g,
            m,
            f0: R::zero(),
            f1: R::zero(),
            g0: R::zero(),
        };
        spec.f0 = spec.sampled_f0()?;
        spec.f1 = spec.sampled_f1()?;
        spec.g0 = spec.sampled_g0()?;
        Ok(spec)
    }

    fn sampled_f0(&self) -> Result<R> {
        let m = self.m;
        Ok(sampled_sup(&self.f, |r| powr(bracket(r), m - R::one())))
    }

    fn sampled_f1(&self) -> Result<R> {
        let m = self.m;
        let fp = derivative_profile(&self.f)?;
        Ok(sampled_sup(&fp, |r| powr(bracket(r), m)))
    }

    fn sampled_g0(&self) -> Result<R> {
        let m = self.m;
        Ok(sampled_sup(&self.g, |r| powr(bracket(r), m)))
    }
}

fn derivative_profile<R: Real>(p: &RadialProfile<R>) -> Result<RadialProfile<R>> {
    let p = p.clone();
    p.derivative(R::one())?;
    let kinks = p.kinks();
    Ok(RadialProfile::Custom {
        name: "derivative".into(),
        value: Arc::new(move |r| p.derivative(r).expect("derivative checked above")),
        kinks,
    })
}

/// Radial potential with |V| <= V0/⟨r⟩^k, k > 2.
#[derive(Debug, Clone)]
pub struct RadialPotential<R: Real> {
    pub v: RadialProfile<R>,
    pub v0: R,
    pub k: R,
}

impl<R: Real> RadialPotential<R> {
    pub fn new(v: RadialProfile<R>, v0: R, k: R) -> Result<Self> {
        if k <= R::of(2.0) {
            return Err(Error::invalid("k", format!("need k > 2, got {k}")));
        }
        let actual = sampled_sup(&v, |r| powr(bracket(r), k));
        if actual > v0 * bound_tolerance() {
            return Err(Error::DataBoundViolated {
                which: format!("V0 (claimed {v0})"),
                at: f64::NAN,
                ratio: (actual / v0.max(R::min_positive_value())).as_f64(),
            });
        }
        Ok(Self { v, v0, k })
    }

    pub fn with_fitted_amplitude(v: RadialProfile<R>, k: R) -> Result<Self> {
        if k <= R::of(2.0) {
            return Err(Error::invalid("k", format!("need k > 2, got {k}")));
        }
        let v0 = sampled_sup(&v, |r| powr(bracket(r), k));
        Ok(Self { v, v0, k })
    }

    pub fn zero() -> Self {
        Self {
            v: RadialProfile::Zero,
            v0: R::zero(),
            k: R::of(3.0),
        }
    }
}

/// Space-time source F(t, r) with
/// |F| <= F0/(⟨r⟩^q ⟨t+r⟩ ⟨t−r⟩^(r_exp−1)).
#[derive(Clone)]
pub struct SourceSpec<R> {
    pub f: Arc<dyn Fn(R, R) -> R + Send + Sync>,
    pub f0: R,
    pub q: R,
    pub r_exp: R,
    /// radial kinks of F at fixed time, used as quadrature breakpoints
    pub radial_kinks: Vec<R>,
}

impl<R: Real> SourceSpec<R> {
    pub fn new(
        f: Arc<dyn Fn(R, R) -> R + Send + Sync>,
        f0: R,
        q: R,
        r_exp: R,
    ) -> Result<Self> {
        if q <= R::of(2.0) {
            return Err(Error::invalid("q", format!("need q > 2, got {q}")));
        }
        if !(r_exp > R::one() && r_exp <= q) {
            return Err(Error::invalid(
                "r",
                format!("need 1 < r <= q, got r = {r_exp}, q = {q}"),
            ));
        }
        let spec = Self {
            f,
            f0,
            q,
            r_exp,
            radial_kinks: Vec::new(),
        };
        // sample the space-time bound on a log grid
        let norm = WeightedNormParams::new(R::one(), r_exp)?;
        let mut worst = R::zero();
        for i in 0..=40 {
            let t = if i == 0 {
                R::zero()
            } else {
                R::of(10f64.powf(-2.0 + 4.0 * (i - 1) as f64 / 39.0))
            };
            for j in 0..=40 {
                let r = if j == 0 {
                    R::zero()
                } else {
                    R::of(10f64.powf(-2.0 + 4.0 * (j - 1) as f64 / 39.0))
                };
                let w = powr(bracket(r), q) * weight(t, r, norm);
                worst = worst.max(w * (spec.f)(t, r).abs());
            }
        }
        if worst > f0 * bound_tolerance() {
            return Err(Error::DataBoundViolated {
                which: format!("F0 (claimed {f0})"),
                at: f64::NAN,
                ratio: (worst / f0.max(R::min_positive_value())).as_f64(),
            });
        }
        Ok(spec)
    }

    pub fn with_radial_kinks(mut self, kinks: Vec<R>) -> Self {
        self.radial_kinks = kinks;
        self
    }

    /// Skips the sampled bound validation; for exploratory sources that sit
    /// outside the decay hypotheses (the solver still runs, the theorem
    /// bound just does not apply).
    pub fn unchecked(f: Arc<dyn Fn(R, R) -> R + Send + Sync>, f0: R, q: R, r_exp: R) -> Self {
        Self {
            f,
            f0,
            q,
            r_exp,
            radial_kinks: Vec::new(),
        }
    }
}

/// I₀(f, g)(t, x): the free solution from sphere averages of the data.
///
/// For radial data the gradient term reduces analytically to
/// f'(λ)(λ² − |x|² + t²)/(2λ) on the sphere, so the whole evaluation is one
/// 1D λ-integral; at x = 0 the concentric limit f(t) + t f'(t) + t g(t) is
/// used, and t = 0 returns f(|x|).
pub fn free_solution<R: Real>(
    data: &InitialDataSpec<R>,
    t: R,
    x_norm: R,
    opts: &QuadOptions<R>,
) -> Result<R> {
    if t < R::zero() {
        return Err(Error::invalid("t", format!("need t >= 0, got {t}")));
    }
    if t == R::zero() {
        return Ok(data.f.value(x_norm));
    }
    if x_norm < concentric_threshold(t) {
        return Ok(data.f.value(t) + t * data.f.derivative(t)? + t * data.g.value(t));
    }
    let lo = (t - x_norm).abs();
    let hi = t + x_norm;
    let mut breaks = data.f.kinks();
    breaks.extend(data.g.kinks());
    let f = &data.f;
    let g = &data.g;
    let half = R::of(0.5);
    let q = integrate(
        |lam: R| {
            let fp = f.derivative(lam).expect("checked at construction");
            lam * g.value(lam)
                + (fp * (lam * lam - x_norm * x_norm + t * t) * half + lam * f.value(lam)) / t
        },
        lo,
        hi,
        &breaks,
        opts,
    )?;
    Ok(q.value / (R::of(2.0) * x_norm))
}

/// L₀(F)(t, x): the retarded light-cone integral of a source.
pub fn source_solution<R: Real>(
    src: &SourceSpec<R>,
    t: R,
    x_norm: R,
    opts: &QuadOptions<R>,
) -> Result<QuadResult<R>> {
    if t < R::zero() {
        return Err(Error::invalid("t", format!("need t >= 0, got {t}")));
    }
    if t == R::zero() {
        return Ok(QuadResult {
            value: R::zero(),
            abs_error: R::zero(),
            panels: 0,
        });
    }
    let f = src.f.clone();
    let kinks = src.radial_kinks.clone();
    cone_retarded_integral(
        x_norm,
        t,
        move |s, lam| f(s, lam),
        move |_s| kinks.clone(),
        &[],
        opts,
    )
}

/// Options of the fixed-point solve.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolveOptions {
    /// stop when the weighted-norm difference falls below this, relative to
    /// the weighted norm of the iterate
    pub stop_rel: f64,
    pub max_iters: usize,
    /// relative tolerance of the sphere/cone quadrature for I₀ and L₀(F)
    pub quad_rel_tol: f64,
    /// contraction budget on top of 1.1·δ accepted before flagging
    pub contraction_slack: f64,
    /// split the outer s-integral where the inner λ-limits cross r-nodes
    pub split_at_crossings: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            stop_rel: 1e-8,
            max_iters: 50,
            quad_rel_tol: 1e-10,
            contraction_slack: 0.05,
            split_at_crossings: true,
        }
    }
}

/// Convergence record of one fixed-point solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationReport<R> {
    pub diffs: Vec<R>,
    pub measured_ratio: Option<R>,
    pub delta_theoretical: R,
    pub converged: bool,
    pub n_iters: usize,
    pub c_empirical: R,
    pub c_theoretical: Option<R>,
    /// false labels the run "outside contraction regime"
    pub contractive: bool,
    pub norm_r: R,
    pub norm_p: R,
}

/// u_{n+1} = I₀(f,g) − L₀(V u_n): decaying solution of □u + Vu = 0.
pub fn solve_fixed_point<'g, R: Real>(
    data: &InitialDataSpec<R>,
    potential: &RadialPotential<R>,
    grid: &'g SolveGrid<R>,
    opts: &SolveOptions,
) -> Result<(GridField<'g, R>, IterationReport<R>)> {
    let c = theorem_constants(data.f0, data.f1, data.g0, data.m, potential.v0, potential.k)?;
    solve_inner(data, potential, None, grid, opts, Regime {
        p: c.p,
        delta: c.delta,
        c_total: c.c_total,
        contractive: c.contractive,
    })
}

/// u_{n+1} = I₀(f,g) + L₀(F) − L₀(V u_n): decaying solution of □u + Vu = F.
///
/// The Duhamel source of □u + Vu = F is F − Vu, so L₀(F) enters with a plus
/// sign; the final decay bound only sees |F| either way.
pub fn solve_with_source<'g, R: Real>(
    data: &InitialDataSpec<R>,
    potential: &RadialPotential<R>,
    src: &SourceSpec<R>,
    grid: &'g SolveGrid<R>,
    opts: &SolveOptions,
) -> Result<(GridField<'g, R>, IterationReport<R>)> {
    let sc = corollary_source_constant(
        data.f0,
        data.f1,
        data.g0,
        src.f0,
        data.m,
        potential.k,
        src.q,
        src.r_exp,
        potential.v0,
    )?;
    solve_inner(data, potential, Some(src), grid, opts, Regime {
        p: sc.p,
        delta: sc.delta,
        c_total: sc.c_total,
        contractive: sc.contractive,
    })
}

/// Contraction-regime summary handed to the iteration core.
struct Regime<R> {
    p: R,
    delta: R,
    c_total: Option<R>,
    contractive: bool,
}

/// Data of the time-differentiated problem: v = ∂_t u solves the same wave
/// equation with v(0) = g and ∂_t v(0) = Δf − Vf, at decay exponent m + 1.
///
/// Needs f with a closed-form second radial derivative and g with a first
/// derivative (g becomes the new position datum). Amplitudes are fitted by
/// sampling; data whose Laplacian violates the m+1 decay (for instance a
/// profile with f'(0) ≠ 0, whose 3D Laplacian blows up at the origin) are
/// rejected.
pub fn time_derivative_data<R: Real>(
    data: &InitialDataSpec<R>,
    potential: &RadialPotential<R>,
) -> Result<InitialDataSpec<R>> {
    data.f.second_derivative(R::one())?;
    // 3D regularity: Δf = f'' + 2f'/r needs f'(0) = 0
    let fp0 = data.f.derivative(R::zero())?;
    let scale = data.f0.max(R::one());
    if fp0.abs() > R::of(1e-12) * scale {
        return Err(Error::invalid(
            "f",
            format!("laplacian is singular at the origin: f'(0) = {fp0} != 0"),
        ));
    }
    let f = data.f.clone();
    let v = potential.v.clone();
    let mut kinks = f.kinks();
    kinks.extend(v.kinks());
    let new_g = RadialProfile::Custom {
        name: "laplacian(f) - V f".into(),
        value: Arc::new(move |r| {
            f.laplacian(r).expect("second derivative checked above") - v.value(r) * f.value(r)
        }),
        kinks,
    };
    let m_new = data.m + R::one();
    let spec = InitialDataSpec::with_fitted_amplitudes(data.g.clone(), new_g, m_new)?;
    Ok(spec)
}

/// Composite Gauss rule: per-cell moments of λV(λ)·(Hermite basis), so that
/// the inner integral of λV·u_n over any full cell is a dot product with the
/// level's (value, slope) pairs.
struct CellKernels<R> {
    /// (A, B, C, D) per r-cell: moment = A·y_j + B·d_j + C·y_{j+1} + D·d_{j+1}
    coef: Vec<[R; 4]>,
}

#[allow(clippy::excessive_precision)]
const GAUSS7_POS: [f64; 7] = [
    -0.949107912342758524526189684047851,
    -0.741531185599394439863864773280788,
    -0.405845151377397166906606412076961,
    0.0,
    0.405845151377397166906606412076961,
    0.741531185599394439863864773280788,
    0.949107912342758524526189684047851,
];
#[allow(clippy::excessive_precision)]
const GAUSS7_W: [f64; 7] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
    0.381830050505118944950369775488975,
    0.279705391489276667901467771423780,
    0.129484966168869693270611432679082,
];

fn hermite_basis<R: Real>(tau: R) -> [R; 4] {
    let t2 = tau * tau;
    let t3 = t2 * tau;
    [
        R::of(2.0) * t3 - R::of(3.0) * t2 + R::one(),
        t3 - R::of(2.0) * t2 + tau,
        -R::of(2.0) * t3 + R::of(3.0) * t2,
        t3 - t2,
    ]
}

impl<R: Real> CellKernels<R> {
    fn build(grid: &SolveGrid<R>, potential: &RadialPotential<R>) -> Self {
        let rs = &grid.r_nodes;
        let mut coef = Vec::with_capacity(rs.len() - 1);
        for j in 0..rs.len() - 1 {
            let a = rs[j];
            let b = rs[j + 1];
            let h = b - a;
            let mut acc = [R::zero(); 4];
            for (gx, gw) in GAUSS7_POS.iter().zip(GAUSS7_W) {
                let lam = a + h * R::of(0.5) * (R::one() + R::of(*gx));
                let tau = (lam - a) / h;
                let basis = hermite_basis(tau);
                let w = R::of(gw) * h * R::of(0.5) * lam * potential.v.value(lam);
                acc[0] += w * basis[0];
                acc[1] += w * basis[1] * h;
                acc[2] += w * basis[2];
                acc[3] += w * basis[3] * h;
            }
            coef.push(acc);
        }
        Self { coef }
    }
}

/// Per-level cumulative cell moments of the current iterate.
struct LevelMoments<R> {
    /// prefix[level][j] = sum of cell moments 0..j
    prefix: Vec<Vec<R>>,
}

impl<R: Real> LevelMoments<R> {
    fn build(field: &GridField<'_, R>, kernels: &CellKernels<R>) -> Self {
        let nr = field.grid.n_nodes();
        let prefix = field
            .values
            .chunks_exact(nr)
            .zip(field.slopes.chunks_exact(nr))
            .map(|(vals, slopes)| {
                let mut acc = R::zero();
                let mut pre = Vec::with_capacity(nr);
                pre.push(R::zero());
                for j in 0..nr - 1 {
                    let k = &kernels.coef[j];
                    acc += k[0] * vals[j] + k[1] * slopes[j] + k[2] * vals[j + 1] + k[3] * slopes[j + 1];
                    pre.push(acc);
                }
                pre
            })
            .collect();
        Self { prefix }
    }
}

struct ConeEngine<'a, R: Real> {
    grid: &'a SolveGrid<R>,
    potential: &'a RadialPotential<R>,
    kernels: CellKernels<R>,
    norm: WeightedNormParams<R>,
    split_at_crossings: bool,
}

impl<'a, R: Real> ConeEngine<'a, R> {
    fn new(
        grid: &'a SolveGrid<R>,
        potential: &'a RadialPotential<R>,
        norm: WeightedNormParams<R>,
        split_at_crossings: bool,
    ) -> Self {
        Self {
            grid,
            potential,
            kernels: CellKernels::build(grid, potential),
            norm,
            split_at_crossings,
        }
    }

    /// Gauss-7 of λV(λ)·u(s,λ) over [α, β] inside cell j, blended between
    /// levels a and a+1 with weight θ.
    #[inline]
    fn partial_segment(
        &self,
        field: &GridField<'_, R>,
        a: usize,
        theta: R,
        j: usize,
        alpha: R,
        beta: R,
    ) -> R {
        if beta <= alpha {
            return R::zero();
        }
        let rs = &self.grid.r_nodes;
        let nr = rs.len();
        let (x0, x1) = (rs[j], rs[j + 1]);
        let half = R::of(0.5);
        let mut acc = R::zero();
        for (gx, gw) in GAUSS7_POS.iter().zip(GAUSS7_W) {
            let lam = alpha + (beta - alpha) * half * (R::one() + R::of(*gx));
            let base = a * nr;
            let mut u = hermite(
                x0,
                x1,
                field.values[base + j],
                field.values[base + j + 1],
                field.slopes[base + j],
                field.slopes[base + j + 1],
                lam,
            );
            if theta > R::zero() {
                let base1 = (a + 1) * nr;
                let u1 = hermite(
                    x0,
                    x1,
                    field.values[base1 + j],
                    field.values[base1 + j + 1],
                    field.slopes[base1 + j],
                    field.slopes[base1 + j + 1],
                    lam,
                );
                u += theta * (u1 - u);
            }
            acc += R::of(gw) * lam * self.potential.v.value(lam) * u;
        }
        acc * (beta - alpha) * half
    }

    /// Decay-profile tail beyond the last r-node.
    #[inline]
    fn tail_segment(&self, field: &GridField<'_, R>, a: usize, theta: R, s: R, hi: R) -> R {
        let rs = &self.grid.r_nodes;
        let nr = rs.len();
        let r_last = rs[nr - 1];
        if hi <= r_last {
            return R::zero();
        }
        let mut edge = field.values[a * nr + nr - 1];
        if theta > R::zero() {
            edge += theta * (field.values[(a + 1) * nr + nr - 1] - edge);
        }
        let scale = edge * weight(s, r_last, self.norm);
        let half = R::of(0.5);
        let mut acc = R::zero();
        for (gx, gw) in GAUSS7_POS.iter().zip(GAUSS7_W) {
            let lam = r_last + (hi - r_last) * half * (R::one() + R::of(*gx));
            acc += R::of(gw) * lam * self.potential.v.value(lam) / weight(s, lam, self.norm);
        }
        scale * acc * (hi - r_last) * half
    }

    /// ∫ λV(λ)·u(s,λ) dλ over [lo, hi], mixing precomputed full-cell moments
    /// with live Gauss on the partial end cells.
    fn inner_integral(
        &self,
        field: &GridField<'_, R>,
        moments: &LevelMoments<R>,
        s: R,
        lo: R,
        hi: R,
    ) -> R {
        let ts = &self.grid.t_levels;
        let rs = &self.grid.r_nodes;
        let nr = rs.len();
        let r_last = rs[nr - 1];
        let a = cell_index(ts, s);
        let theta = ((s - ts[a]) / (ts[a + 1] - ts[a])).max(R::zero()).min(R::one());

        let hi_in = hi.min(r_last);
        let mut total = self.tail_segment(field, a, theta, s, hi);
        if hi_in <= lo {
            return total;
        }
        let jl = cell_index(rs, lo);
        let jh = cell_index(rs, hi_in);
        if jl == jh {
            return total + self.partial_segment(field, a, theta, jl, lo, hi_in);
        }
        total += self.partial_segment(field, a, theta, jl, lo, rs[jl + 1]);
        total += self.partial_segment(field, a, theta, jh, rs[jh], hi_in);
        if jh > jl + 1 {
            let range = |level: usize| -> R {
                moments.prefix[level][jh] - moments.prefix[level][jl + 1]
            };
            let mut full = range(a);
            if theta > R::zero() {
                full += theta * (range(a + 1) - full);
            }
            total += full;
        }
        total
    }

    /// L₀(V u_n)(t, r) by the composite outer rule over s ∈ [0, t].
    fn apply_at(
        &self,
        field: &GridField<'_, R>,
        moments: &LevelMoments<R>,
        t: R,
        r: R,
    ) -> R {
        if t <= R::zero() {
            return R::zero();
        }
        let concentric = r < concentric_threshold(t);

        // outer panel edges: time levels, the s = t−r collision point, and
        // (optionally) every s where a moving λ-limit crosses an r-node
        let mut edges: Vec<R> = vec![R::zero(), t];
        for &tl in &self.grid.t_levels {
            if tl > R::zero() && tl < t {
                edges.push(tl);
            }
        }
        if !concentric && t > r {
            edges.push(t - r);
        }
        if self.split_at_crossings {
            for &rho in &self.grid.r_nodes {
                if rho == R::zero() {
                    continue;
                }
                let candidates = if concentric {
                    [t - rho, R::nan(), R::nan()]
                } else {
                    [t + r - rho, t - r - rho, t - r + rho]
                };
                for c in candidates {
                    if c > R::zero() && c < t {
                        edges.push(c);
                    }
                }
            }
        }
        edges.sort_by(|u, v| u.partial_cmp(v).unwrap());
        edges.dedup_by(|u, v| (*u - *v).abs() <= R::of(1e-12) * t);

        let half = R::of(0.5);
        let mut acc = R::zero();
        for w in edges.windows(2) {
            let (s0, s1) = (w[0], w[1]);
            let hw = (s1 - s0) * half;
            let mut panel = R::zero();
            for (gx, gw) in GAUSS7_POS.iter().zip(GAUSS7_W) {
                let s = s0 + hw * (R::one() + R::of(*gx));
                let rho = t - s;
                let inner = if concentric {
                    rho * self.potential.v.value(rho) * field.eval(s, rho)
                } else {
                    let lo = (rho - r).abs();
                    let hi = rho + r;
                    self.inner_integral(field, moments, s, lo, hi)
                        / (R::of(2.0) * r)
                };
                panel += R::of(gw) * inner;
            }
            acc += panel * hw;
        }
        acc
    }
}

fn solve_inner<'g, R: Real>(
    data: &InitialDataSpec<R>,
    potential: &RadialPotential<R>,
    src: Option<&SourceSpec<R>>,
    grid: &'g SolveGrid<R>,
    opts: &SolveOptions,
    regime: Regime<R>,
) -> Result<(GridField<'g, R>, IterationReport<R>)> {
    let norm = WeightedNormParams::lightcone(regime.p)?;
    let quad = QuadOptions::with_rel_tol(R::of(opts.quad_rel_tol));
    let cone_quad = QuadOptions::with_rel_tol(R::of(opts.quad_rel_tol.max(1e-8)));

    let nt = grid.n_levels();
    let nr = grid.n_nodes();

    // base term I0(f,g) (+ L0(F)) at every tensor point
    let mut base: Vec<R> = (0..nt * nr)
        .into_par_iter()
        .map(|idx| {
            let t = grid.t_levels[idx / nr];
            let r = grid.r_nodes[idx % nr];
            free_solution(data, t, r, &quad)
        })
        .collect::<Result<_>>()?;
    if let Some(src) = src {
        let srcvals: Vec<R> = (0..nt * nr)
            .into_par_iter()
            .map(|idx| {
                let t = grid.t_levels[idx / nr];
                let r = grid.r_nodes[idx % nr];
                Ok(source_solution(src, t, r, &cone_quad)?.value)
            })
            .collect::<Result<_>>()?;
        for (b, s) in base.iter_mut().zip(srcvals) {
            *b += s;
        }
    }

    let engine = ConeEngine::new(grid, potential, norm, opts.split_at_crossings);
    let active = grid.active_points();
    let weights_active: Vec<R> = active
        .iter()
        .map(|&(a, j)| weight(grid.t_levels[a], grid.r_nodes[j], norm))
        .collect();

    let sup_active = |values: &[R]| -> R {
        let mut sup = R::zero();
        for (&(a, j), &w) in active.iter().zip(&weights_active) {
            sup = sup.max(w * values[a * nr + j].abs());
        }
        sup
    };

    let mut field = GridField::new(grid, base.clone(), norm);
    let mut diffs: Vec<R> = Vec::new();
    let mut converged = potential.v0 == R::zero() || potential.v.is_zero();
    let mut n_iters = 0usize;

    if !converged {
        for _iter in 0..opts.max_iters {
            n_iters += 1;
            let moments = LevelMoments::build(&field, &engine.kernels);
            let next: Vec<R> = (0..nt * nr)
                .into_par_iter()
                .map(|idx| {
                    let a = idx / nr;
                    let j = idx % nr;
                    let t = grid.t_levels[a];
                    let r = grid.r_nodes[j];
                    base[idx] - engine.apply_at(&field, &moments, t, r)
                })
                .collect();

            let diff_vec: Vec<R> = next
                .iter()
                .zip(&field.values)
                .map(|(n, o)| *n - *o)
                .collect();
            let diff = sup_active(&diff_vec);
            diffs.push(diff);
            field = GridField::new(grid, next, norm);
            let norm_now = sup_active(&field.values);
            if diff <= R::of(opts.stop_rel) * norm_now.max(R::min_positive_value()) {
                converged = true;
                break;
            }
        }
    }

    if !converged && regime.contractive {
        return Err(Error::IterationStalled {
            iters: n_iters,
            last_diff: diffs.last().copied().unwrap_or(R::zero()).as_f64(),
            delta: regime.delta.as_f64(),
        });
    }

    let measured_ratio = max_consecutive_ratio(&diffs);
    let c_empirical = sup_active(&field.values);
    let report = IterationReport {
        diffs,
        measured_ratio,
        delta_theoretical: regime.delta,
        converged,
        n_iters,
        c_empirical,
        c_theoretical: regime.c_total,
        contractive: regime.contractive,
        norm_r: norm.r,
        norm_p: norm.p,
    };
    Ok((field, report))
}

fn max_consecutive_ratio<R: Real>(diffs: &[R]) -> Option<R> {
    let floor = diffs
        .first()
        .map(|d| *d * R::of(1e3) * R::epsilon())
        .unwrap_or(R::zero());
    let mut worst: Option<R> = None;
    for w in diffs.windows(2) {
        if w[0] > floor && w[0] > R::zero() {
            let q = w[1] / w[0];
            worst = Some(match worst {
                Some(b) => b.max(q),
                None => q,
            });
        }
    }
    worst
}

/// Weighted sup of a field over its own active samples; convenience wrapper.
pub fn field_weighted_sup<R: Real>(field: &GridField<'_, R>) -> Result<R> {
    weighted_sup(&field.sample_set(), field.norm)
}
