//! Independent finite-difference oracle: spherically symmetric evolution of
//! □u + Vu = 0 through the 1D reduction v = r·u (leapfrog, second order),
//! plus energy tracking, bound-state majorants, positivity diagnostics and
//! late-time tail fitting.
//!
//! Nothing here shares code with the retarded-integral solver: the scheme,
//! the grid and the boundary treatment are all different, which is the point
//! of an oracle.

use serde::{Deserialize, Serialize};

use crate::duhamel::{InitialDataSpec, RadialPotential};
use crate::error::{Error, Result};
use crate::profiles::RadialProfile;
use crate::quad::{integrate, QuadOptions};
use crate::real::{powr, Real};

/// Uniform radial grid with its time step. The outer boundary is handled by
/// causal domain sizing: r_max must exceed t_final + observer radius so no
/// boundary artifact can reach an observation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RadialGrid<R> {
    pub dr: R,
    pub n_r: usize,
    pub dt: R,
    pub cfl: R,
}

impl<R: Real> RadialGrid<R> {
    pub fn new(dr: R, r_max: R, cfl: R) -> Result<Self> {
        if dr <= R::zero() || r_max <= dr {
            return Err(Error::invalid("dr", "need 0 < dr < r_max"));
        }
        if !(cfl > R::zero() && cfl <= R::one()) {
            return Err(Error::CflViolation {
                ratio: cfl.as_f64(),
            });
        }
        let n_r = (r_max / dr).round().to_usize().unwrap_or(0);
        if n_r < 8 {
            return Err(Error::invalid("n_r", "grid too small"));
        }
        Ok(Self {
            dr,
            n_r,
            dt: cfl * dr,
            cfl,
        })
    }

    pub fn r_max(&self) -> R {
        self.dr * R::of(self.n_r as f64)
    }

    pub fn radius(&self, i: usize) -> R {
        self.dr * R::of(i as f64)
    }
}

/// Two consecutive field levels of v = r·u at times t − dt and t.
#[derive(Debug, Clone)]
pub struct EvolutionState<R> {
    pub v_prev: Vec<R>,
    pub v_curr: Vec<R>,
    pub t: R,
}

/// Stepper owning the leapfrog recurrence. `v(0) = 0` is pinned at all times
/// (regularity of u at the origin) and the outer node is pinned to zero,
/// which is invisible to causally shielded observers.
pub struct Evolution<'a, R: Real> {
    pub grid: RadialGrid<R>,
    potential_values: Vec<R>,
    pub state: EvolutionState<R>,
    _marker: std::marker::PhantomData<&'a ()>,
}

impl<'a, R: Real> Evolution<'a, R> {
    pub fn new(
        data: &InitialDataSpec<R>,
        potential: &RadialPotential<R>,
        grid: RadialGrid<R>,
    ) -> Result<Self> {
        let n = grid.n_r + 1;
        let dr = grid.dr;
        let dt = grid.dt;
        let mut v0 = vec![R::zero(); n];
        let mut rg = vec![R::zero(); n];
        let mut pot = vec![R::zero(); n];
        for i in 0..n {
            let r = grid.radius(i);
            v0[i] = r * data.f.value(r);
            rg[i] = r * data.g.value(r);
            pot[i] = potential.v.value(r);
        }
        // Taylor start keeps second order from the first step:
        // v(dt) = v0 + dt·r·g + dt²/2 (v0'' − V v0)
        let mut v1 = vec![R::zero(); n];
        let half = R::of(0.5);
        for i in 1..n - 1 {
            let lap = (v0[i + 1] - R::of(2.0) * v0[i] + v0[i - 1]) / (dr * dr);
            v1[i] = v0[i] + dt * rg[i] + half * dt * dt * (lap - pot[i] * v0[i]);
        }
        Ok(Self {
            grid,
            potential_values: pot,
            state: EvolutionState {
                v_prev: v0,
                v_curr: v1,
                t: dt,
            },
            _marker: std::marker::PhantomData,
        })
    }

    /// One leapfrog step.
    pub fn step(&mut self) {
        let n = self.grid.n_r + 1;
        let dt = self.grid.dt;
        let c2 = (dt / self.grid.dr) * (dt / self.grid.dr);
        let dt2 = dt * dt;
        let EvolutionState { v_prev, v_curr, t } = &mut self.state;
        let two = R::of(2.0);
        for i in 1..n - 1 {
            let lap = v_curr[i + 1] - two * v_curr[i] + v_curr[i - 1];
            v_prev[i] = two * v_curr[i] - v_prev[i] + c2 * lap
                - dt2 * self.potential_values[i] * v_curr[i];
        }
        v_prev[0] = R::zero();
        v_prev[n - 1] = R::zero();
        std::mem::swap(v_prev, v_curr);
        *t += dt;
    }

    /// Swap the two stored levels: the leapfrog recurrence is symmetric in
    /// time, so stepping after this runs the evolution backwards.
    pub fn reverse(&mut self) {
        std::mem::swap(&mut self.state.v_prev, &mut self.state.v_curr);
        self.state.t -= self.grid.dt;
    }

    /// u = v/r at an arbitrary radius, linear interpolation of v.
    pub fn u_at(&self, r_obs: R) -> R {
        let dr = self.grid.dr;
        let pos = r_obs / dr;
        let i = pos.floor().to_usize().unwrap_or(0).min(self.grid.n_r - 1);
        let frac = pos - R::of(i as f64);
        let v = self.state.v_curr[i] + frac * (self.state.v_curr[i + 1] - self.state.v_curr[i]);
        if r_obs <= R::zero() {
            return self.u_origin();
        }
        v / r_obs
    }

    /// u(t, 0) by l'Hôpital: v'(0) ≈ v₁/dr.
    pub fn u_origin(&self) -> R {
        self.state.v_curr[1] / self.grid.dr
    }
}

/// Discrete 3D energy 4π ∫ (u_r² + V u² + u_t²) r² dr of a state, written in
/// v = r·u as 4π ∫ ((v_r − v/r)² + V v² + v_t²) dr and evaluated at the
/// midpoint of the two stored levels (centered differences, trapezoid sum).
pub fn energy<R: Real>(
    state: &EvolutionState<R>,
    potential_values: &[R],
    grid: &RadialGrid<R>,
) -> R {
    energy_impl(state, potential_values, grid, true)
}

/// Same quadrature without the potential term: the free energy E₀.
pub fn free_energy<R: Real>(
    state: &EvolutionState<R>,
    potential_values: &[R],
    grid: &RadialGrid<R>,
) -> R {
    energy_impl(state, potential_values, grid, false)
}

fn energy_impl<R: Real>(
    state: &EvolutionState<R>,
    potential_values: &[R],
    grid: &RadialGrid<R>,
    include_potential: bool,
) -> R {
    let n = grid.n_r + 1;
    let dr = grid.dr;
    let dt = grid.dt;
    let half = R::of(0.5);
    let vb: Vec<R> = (0..n)
        .map(|i| half * (state.v_prev[i] + state.v_curr[i]))
        .collect();
    let density = |i: usize| -> R {
        let vt = (state.v_curr[i] - state.v_prev[i]) / dt;
        let w = if i == 0 {
            R::zero()
        } else if i == n - 1 {
            (vb[i] - vb[i - 1]) / dr - vb[i] / grid.radius(i)
        } else {
            (vb[i + 1] - vb[i - 1]) / (R::of(2.0) * dr) - vb[i] / grid.radius(i)
        };
        let mut d = w * w + vt * vt;
        if include_potential {
            d += potential_values[i] * vb[i] * vb[i];
        }
        d
    };
    let mut sum = half * (density(0) + density(n - 1));
    for i in 1..n - 1 {
        sum += density(i);
    }
    R::of(4.0) * R::of(std::f64::consts::PI) * sum * dr
}

/// Energy of the data themselves: 4π ∫ (f'² + V f² + g²) r² dr by adaptive
/// quadrature.
pub fn initial_data_energy<R: Real>(
    data: &InitialDataSpec<R>,
    potential: &RadialPotential<R>,
) -> Result<R> {
    let mut breaks = data.f.kinks();
    breaks.extend(data.g.kinks());
    breaks.extend(potential.v.kinks());
    let f = &data.f;
    let g = &data.g;
    let v = &potential.v;
    let integrand = |r: R| -> R {
        let fp = f.derivative(r).expect("profile with derivative");
        (fp * fp + v.value(r) * f.value(r) * f.value(r) + g.value(r) * g.value(r)) * r * r
    };
    let q = crate::quad::integrate_semi_infinite(integrand, &breaks, &QuadOptions::with_rel_tol(R::of(1e-11)))?;
    Ok(R::of(4.0) * R::of(std::f64::consts::PI) * q.value)
}

/// One recorded energy sample.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EnergySample<R> {
    pub t: R,
    pub energy: R,
    pub free_energy: R,
}

/// Observer series u(t, r_obs).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObserverSeries<R> {
    pub r_obs: R,
    pub times: Vec<R>,
    pub values: Vec<R>,
}

impl<R: Real> ObserverSeries<R> {
    /// Linear interpolation in t; O(dt²), consistent with the scheme.
    pub fn value_at(&self, t: R) -> R {
        let ts = &self.times;
        if t <= ts[0] {
            return self.values[0];
        }
        if t >= *ts.last().unwrap() {
            return *self.values.last().unwrap();
        }
        let i = ts.partition_point(|&x| x <= t) - 1;
        let frac = (t - ts[i]) / (ts[i + 1] - ts[i]);
        self.values[i] + frac * (self.values[i + 1] - self.values[i])
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvolutionResult<R> {
    pub observers: Vec<ObserverSeries<R>>,
    pub energies: Vec<EnergySample<R>>,
    pub dt: R,
    pub n_steps: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    /// record energy every this many steps (0 disables)
    pub energy_every: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { energy_every: 20 }
    }
}

/// Leapfrog evolution to t_final with observer recording.
pub fn evolve<R: Real>(
    data: &InitialDataSpec<R>,
    potential: &RadialPotential<R>,
    grid: RadialGrid<R>,
    t_final: R,
    observers: &[R],
    opts: &EvolveOptions,
) -> Result<EvolutionResult<R>> {
    if t_final <= R::zero() {
        return Err(Error::invalid("t_final", "need t_final > 0"));
    }
    let r_max = grid.r_max();
    for &obs in observers {
        if obs < R::zero() || obs + t_final > r_max * (R::one() + R::of(1e-12)) {
            return Err(Error::CausalityMargin {
                observer: obs.as_f64(),
                r_max: r_max.as_f64(),
            });
        }
    }
    let mut evo = Evolution::new(data, potential, grid)?;
    let n_steps = (t_final / grid.dt).ceil().to_usize().unwrap_or(0);

    let mut observer_values: Vec<Vec<R>> = observers
        .iter()
        .map(|&r| vec![if r == R::zero() { data.f.value(R::zero()) } else { data.f.value(r) }])
        .collect();
    let mut times = vec![R::zero()];
    let mut energies = Vec::new();

    // state currently holds (v(0), v(dt)); record t = dt
    for (k, &r) in observers.iter().enumerate() {
        observer_values[k].push(evo.u_at(r));
    }
    times.push(evo.state.t);
    if opts.energy_every > 0 {
        energies.push(EnergySample {
            t: evo.state.t - grid.dt * R::of(0.5),
            energy: energy(&evo.state, &evo.potential_values, &grid),
            free_energy: free_energy(&evo.state, &evo.potential_values, &grid),
        });
    }

    for step in 1..n_steps {
        evo.step();
        times.push(evo.state.t);
        for (k, &r) in observers.iter().enumerate() {
            observer_values[k].push(evo.u_at(r));
        }
        if opts.energy_every > 0 && step % opts.energy_every == 0 {
            energies.push(EnergySample {
                t: evo.state.t - grid.dt * R::of(0.5),
                energy: energy(&evo.state, &evo.potential_values, &grid),
                free_energy: free_energy(&evo.state, &evo.potential_values, &grid),
            });
        }
    }

    Ok(EvolutionResult {
        observers: observers
            .iter()
            .zip(observer_values)
            .map(|(&r_obs, values)| ObserverSeries {
                r_obs,
                times: times.clone(),
                values,
            })
            .collect(),
        energies,
        dt: grid.dt,
        n_steps,
    })
}

/// Drift of the recorded energy relative to its first sample.
pub fn energy_drift<R: Real>(energies: &[EnergySample<R>]) -> R {
    if energies.len() < 2 {
        return R::zero();
    }
    let e0 = energies[0].energy;
    let mut worst = R::zero();
    for e in energies {
        worst = worst.max((e.energy - e0).abs());
    }
    worst / e0.abs().max(R::min_positive_value())
}

/// E₀(t) <= E₀(t₀)·exp(2 V₀ (t − t₀)) at every recorded sample, with a small
/// slack for the discretization of the energy functional itself.
pub fn free_energy_growth_check<R: Real>(
    energies: &[EnergySample<R>],
    v0: R,
    slack_rel: R,
) -> bool {
    if energies.is_empty() {
        return true;
    }
    let e0 = energies[0].free_energy;
    let t0 = energies[0].t;
    energies.iter().all(|e| {
        e.free_energy
            <= e0 * (R::of(2.0) * v0 * (e.t - t0)).exp() * (R::one() + slack_rel)
    })
}

/// Number-of-bound-states majorant: the numerically evaluated integral and
/// the closed form for the model profile V₀/⟨r⟩^k.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BoundStateBound<R> {
    pub integral: R,
    pub model_majorant: R,
}

/// N <= ∫₀^∞ r|V(r)| dr <= V₀/((k−1)(k−2)).
pub fn bargmann_bound<R: Real>(potential: &RadialPotential<R>) -> Result<BoundStateBound<R>> {
    let k = potential.k;
    let model_majorant = potential.v0 / ((k - R::one()) * (k - R::of(2.0)));
    let integral = moment_integral(&potential.v, |r, v| r * v.abs(), |big_r, a, d| {
        // ∫_R^∞ r·|A|/(1+r)^d dr = |A| [ (1+R)^(2−d)/(d−2) − (1+R)^(1−d)/(d−1) ]
        let one_r = R::one() + big_r;
        a.abs()
            * (powr(one_r, R::of(2.0) - d) / (d - R::of(2.0))
                - powr(one_r, R::one() - d) / (d - R::one()))
    })?;
    Ok(BoundStateBound {
        integral,
        model_majorant,
    })
}

/// N <= (2/π) ∫₀^∞ √|V(r)| dr; the model-profile closed form printed
/// alongside is (2/π)·√V₀/(k−2).
pub fn calogero_bound<R: Real>(potential: &RadialPotential<R>) -> Result<BoundStateBound<R>> {
    let k = potential.k;
    let two_over_pi = R::of(2.0 / std::f64::consts::PI);
    let model_majorant = two_over_pi * potential.v0.sqrt() / (k - R::of(2.0));
    let raw = moment_integral(&potential.v, |_r, v| v.abs().sqrt(), |big_r, a, d| {
        // ∫_R^∞ √(|A|)(1+r)^(−d/2) dr = √|A| (1+R)^(1−d/2)/(d/2−1)
        let half_d = d * R::of(0.5);
        a.abs().sqrt() * powr(R::one() + big_r, R::one() - half_d) / (half_d - R::one())
    })?;
    Ok(BoundStateBound {
        integral: two_over_pi * raw,
        model_majorant,
    })
}

/// ∫₀^∞ f(r, V(r)) dr for a potential profile: adaptive quadrature on a
/// finite range plus an exact tail for the model shape, zero tail for
/// compactly supported shapes.
fn moment_integral<R: Real>(
    v: &RadialProfile<R>,
    integrand: impl Fn(R, R) -> R,
    model_tail: impl Fn(R, R, R) -> R,
) -> Result<R> {
    let opts = QuadOptions::with_rel_tol(R::of(1e-11));
    let (cut, tail) = match v {
        RadialProfile::Zero => return Ok(R::zero()),
        RadialProfile::Model { amplitude, decay } => {
            if *decay <= R::of(2.0) {
                return Err(Error::invalid("k", "moment integral diverges for decay <= 2"));
            }
            let cut = R::of(1e4);
            (cut, model_tail(cut, *amplitude, *decay))
        }
        other => match other.support_radius() {
            Some(s) => (s.max(R::one()), R::zero()),
            None => {
                return Err(Error::invalid(
                    "potential",
                    "moment integral needs a model or compactly supported profile",
                ))
            }
        },
    };
    let q = integrate(|r| integrand(r, v.value(r)), R::zero(), cut, &v.kinks(), &opts)?;
    Ok(q.value + tail)
}

/// Energy-positivity diagnostics for a data/potential pair.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PositivityReport<R> {
    pub v0: R,
    /// V₀ < 1/4: the conserved energy is positive definite
    pub positive_definite_regime: bool,
    /// |⟨f, V f⟩|, numerically
    pub potential_quadratic_form: R,
    /// 4 V₀ ‖∇f‖², numerically
    pub hardy_majorant: R,
    /// quadratic form over majorant; <= 1 whenever the decay bound holds
    pub hardy_ratio: R,
    /// 1 − 4 V₀
    pub coercivity: R,
}

pub fn positivity_checks<R: Real>(
    data: &InitialDataSpec<R>,
    potential: &RadialPotential<R>,
) -> Result<PositivityReport<R>> {
    let opts = QuadOptions::with_rel_tol(R::of(1e-11));
    let four_pi = R::of(4.0) * R::of(std::f64::consts::PI);
    let mut breaks = data.f.kinks();
    breaks.extend(potential.v.kinks());
    let f = &data.f;
    let v = &potential.v;
    let qf = crate::quad::integrate_semi_infinite(
        |r: R| v.value(r) * f.value(r) * f.value(r) * r * r,
        &breaks,
        &opts,
    )?;
    let grad = crate::quad::integrate_semi_infinite(
        |r: R| {
            let fp = f.derivative(r).expect("profile with derivative");
            fp * fp * r * r
        },
        &data.f.kinks(),
        &opts,
    )?;
    let quad_form = (four_pi * qf.value).abs();
    let majorant = R::of(4.0) * potential.v0 * four_pi * grad.value;
    Ok(PositivityReport {
        v0: potential.v0,
        positive_definite_regime: potential.v0 < R::of(0.25),
        potential_quadratic_form: quad_form,
        hardy_majorant: majorant,
        hardy_ratio: quad_form / majorant.max(R::min_positive_value()),
        coercivity: R::one() - R::of(4.0) * potential.v0,
    })
}

/// Late-time power-law fit of an observer series.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TailFit<R> {
    pub exponent: R,
    pub residual_rms: R,
    pub n_points: usize,
    pub used_envelope: bool,
}

/// Least-squares slope of log|u| against log t over the window. If the series
/// changes sign inside the window, the fit runs on the envelope of |u|
/// (local maxima); too few envelope points is an error suggesting a later
/// window.
pub fn tail_exponent_fit<R: Real>(
    series: &ObserverSeries<R>,
    window: (R, R),
) -> Result<TailFit<R>> {
    let (t_lo, t_hi) = window;
    if !(t_hi > t_lo && t_lo > R::zero()) {
        return Err(Error::invalid("window", "need 0 < t_lo < t_hi"));
    }
    let mut ts = Vec::new();
    let mut us = Vec::new();
    for (&t, &u) in series.times.iter().zip(&series.values) {
        if t >= t_lo && t <= t_hi {
            ts.push(t);
            us.push(u);
        }
    }
    if ts.len() < 8 {
        return Err(Error::invalid("window", "fewer than 8 samples in the fit window"));
    }
    let sign_changes = us
        .windows(2)
        .filter(|w| w[0] * w[1] < R::zero())
        .count();
    let mut used_envelope = false;
    let (fit_t, fit_u): (Vec<R>, Vec<R>) = if sign_changes > 0 {
        used_envelope = true;
        let mut pt = Vec::new();
        let mut pu = Vec::new();
        for i in 1..us.len() - 1 {
            let a = us[i].abs();
            if a > us[i - 1].abs() && a >= us[i + 1].abs() {
                pt.push(ts[i]);
                pu.push(a);
            }
        }
        if pt.len() < 5 {
            return Err(Error::SignChangingSeries {
                changes: sign_changes,
            });
        }
        (pt, pu)
    } else {
        (
            ts,
            us.iter().map(|u| u.abs()).collect(),
        )
    };

    let mut xs = Vec::with_capacity(fit_t.len());
    let mut ys = Vec::with_capacity(fit_t.len());
    for (t, u) in fit_t.iter().zip(&fit_u) {
        if *u > R::zero() {
            xs.push(t.ln());
            ys.push(u.ln());
        }
    }
    if xs.len() < 5 {
        return Err(Error::invalid("series", "not enough nonzero samples for a fit"));
    }
    let n = R::of(xs.len() as f64);
    let mx = xs.iter().copied().sum::<R>() / n;
    let my = ys.iter().copied().sum::<R>() / n;
    let mut sxx = R::zero();
    let mut sxy = R::zero();
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (*x - mx) * (*x - mx);
        sxy += (*x - mx) * (*y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut ss = R::zero();
    for (x, y) in xs.iter().zip(&ys) {
        let e = *y - (slope * *x + intercept);
        ss += e * e;
    }
    Ok(TailFit {
        exponent: -slope,
        residual_rms: (ss / n).sqrt(),
        n_points: xs.len(),
        used_envelope,
    })
}

impl<'a, R: Real> Evolution<'a, R> {
    /// Potential samples used by the stepper (exposed for energy recording).
    pub fn potential_values(&self) -> &[R] {
        &self.potential_values
    }
}
