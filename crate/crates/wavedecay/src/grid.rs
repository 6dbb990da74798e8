//! Tensor (t, r) sample grids for the fixed-point iteration, and the
//! interpolation the light-cone quadrature reads iterates through: monotone
//! cubic (Fritsch–Carlson) in r, linear in t.
//!
//! Grid geometry: one master node set, log-spaced with an optional uniform
//! refinement band so the light cone t = r always has nodes nearby, shared by
//! both axes. Sharing guarantees that every time level t_a is also an r-node,
//! which places interpolation nodes exactly on the t = r kink line.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::weights::{weight, SpacetimeSampleSet, WeightedNormParams};

/// Geometry of the solver grid.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    /// largest evolution time
    pub t_max: f64,
    /// largest radius of interest; reported samples satisfy t + r <= t_max + r_active
    pub r_active: f64,
    /// log-spaced node count over [r_min, r_grid]
    pub log_points: usize,
    /// smallest positive node
    pub r_min: f64,
    /// spacing of the uniform refinement band over [1, t_max] (0 disables)
    pub cone_step: f64,
    /// extra nodes to inject on both axes (shared sample coordinates)
    pub extra: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            t_max: 20.0,
            r_active: 10.0,
            log_points: 36,
            r_min: 0.01,
            cone_step: 1.0,
            extra: Vec::new(),
        }
    }
}

impl GridSpec {
    /// Doubled node density, used by refinement studies.
    pub fn refined(&self) -> Self {
        let mut spec = self.clone();
        spec.log_points *= 2;
        if spec.cone_step > 0.0 {
            spec.cone_step /= 2.0;
        }
        spec
    }
}

/// Fixed (t, r) tensor grid. r-nodes reach out to t_max + r_active so the
/// backward cone of every reported sample stays inside the grid.
#[derive(Debug, Clone)]
pub struct SolveGrid<R> {
    pub t_levels: Vec<R>,
    pub r_nodes: Vec<R>,
    pub t_max: R,
    pub r_active: R,
}

fn dedup_sorted<R: Real>(xs: &mut Vec<R>, tol: R) {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup_by(|a, b| (*a - *b).abs() <= tol);
}

impl<R: Real> SolveGrid<R> {
    pub fn new(spec: &GridSpec) -> Result<Self> {
        if spec.t_max <= 0.0 || spec.r_active <= 0.0 {
            return Err(Error::invalid("grid", "t_max and r_active must be positive"));
        }
        if spec.log_points < 8 {
            return Err(Error::invalid("grid", "need at least 8 log-spaced nodes"));
        }
        let r_grid = spec.t_max + spec.r_active;
        let mut nodes: Vec<R> = vec![R::zero()];
        let lo = spec.r_min.ln();
        let hi = r_grid.ln();
        for i in 0..spec.log_points {
            let f = i as f64 / (spec.log_points - 1) as f64;
            nodes.push(R::of((lo + (hi - lo) * f).exp()));
        }
        if spec.cone_step > 0.0 {
            let mut x = 1.0;
            while x < spec.t_max {
                nodes.push(R::of(x));
                x += spec.cone_step;
            }
        }
        for &e in &spec.extra {
            if e > 0.0 && e <= r_grid {
                nodes.push(R::of(e));
            }
        }
        nodes.push(R::of(spec.t_max));
        nodes.push(R::of(r_grid));
        // snap near-coincident nodes onto the exact endpoints before dedup
        for x in nodes.iter_mut() {
            for anchor in [R::of(spec.t_max), R::of(r_grid)] {
                if (*x - anchor).abs() <= R::of(1e-9) * anchor.max(R::one()) {
                    *x = anchor;
                }
            }
        }
        dedup_sorted(&mut nodes, R::of(1e-9));

        let t_max = R::of(spec.t_max);
        let t_levels: Vec<R> = nodes
            .iter()
            .copied()
            .filter(|&x| x <= t_max * (R::one() + R::of(1e-12)))
            .collect();
        Ok(Self {
            t_levels,
            r_nodes: nodes,
            t_max,
            r_active: R::of(spec.r_active),
        })
    }

    pub fn n_levels(&self) -> usize {
        self.t_levels.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.r_nodes.len()
    }

    pub fn n_points(&self) -> usize {
        self.n_levels() * self.n_nodes()
    }

    /// Reported samples: tensor points with t + r <= t_max + r_active, i.e.
    /// those whose backward cone never leaves the grid.
    pub fn active_points(&self) -> Vec<(usize, usize)> {
        let lim = self.t_max + self.r_active;
        let mut out = Vec::new();
        for (a, &t) in self.t_levels.iter().enumerate() {
            for (j, &r) in self.r_nodes.iter().enumerate() {
                if t + r <= lim * (R::one() + R::of(1e-12)) {
                    out.push((a, j));
                }
            }
        }
        out
    }
}

/// Fritsch–Carlson monotone cubic slopes for nodes `xs` with values `ys`.
pub fn pchip_slopes<R: Real>(xs: &[R], ys: &[R]) -> Vec<R> {
    let n = xs.len();
    assert!(n >= 2 && ys.len() == n);
    if n == 2 {
        let d = (ys[1] - ys[0]) / (xs[1] - xs[0]);
        return vec![d, d];
    }
    let h: Vec<R> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<R> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
    let mut d = vec![R::zero(); n];

    for i in 1..n - 1 {
        if delta[i - 1] * delta[i] <= R::zero() {
            d[i] = R::zero();
        } else {
            let w1 = R::of(2.0) * h[i] + h[i - 1];
            let w2 = h[i] + R::of(2.0) * h[i - 1];
            d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }

    let endpoint = |h0: R, h1: R, d0: R, d1: R| -> R {
        let mut s = ((R::of(2.0) * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if s * d0 <= R::zero() {
            s = R::zero();
        } else if d0 * d1 <= R::zero() && s.abs() > R::of(3.0) * d0.abs() {
            s = R::of(3.0) * d0;
        }
        s
    };
    d[0] = endpoint(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = endpoint(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

/// Cubic Hermite evaluation on [x0, x1].
#[inline]
pub fn hermite<R: Real>(x0: R, x1: R, y0: R, y1: R, d0: R, d1: R, x: R) -> R {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = R::of(2.0) * t3 - R::of(3.0) * t2 + R::one();
    let h10 = t3 - R::of(2.0) * t2 + t;
    let h01 = -R::of(2.0) * t3 + R::of(3.0) * t2;
    let h11 = t3 - t2;
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

/// Index i with xs[i] <= x < xs[i+1], clamped to valid cells.
#[inline]
pub fn cell_index<R: Real>(xs: &[R], x: R) -> usize {
    let n = xs.len();
    let i = xs.partition_point(|&v| v <= x);
    i.saturating_sub(1).min(n - 2)
}

/// Field iterate on a [`SolveGrid`]: monotone cubic in r per time level,
/// linear blend between levels, weight-profile extension beyond the last
/// r-node.
pub struct GridField<'g, R> {
    pub grid: &'g SolveGrid<R>,
    /// row-major [level][node]
    pub values: Vec<R>,
    /// PCHIP slopes, same layout
    pub slopes: Vec<R>,
    /// exponent pair of the decay weight used for the outward extension
    pub norm: WeightedNormParams<R>,
}

impl<'g, R: Real> GridField<'g, R> {
    pub fn new(grid: &'g SolveGrid<R>, values: Vec<R>, norm: WeightedNormParams<R>) -> Self {
        assert_eq!(values.len(), grid.n_points());
        let nr = grid.n_nodes();
        let mut slopes = Vec::with_capacity(values.len());
        for level in values.chunks_exact(nr) {
            slopes.extend(pchip_slopes(&grid.r_nodes, level));
        }
        Self {
            grid,
            values,
            slopes,
            norm,
        }
    }

    #[inline]
    pub fn value_at(&self, level: usize, node: usize) -> R {
        self.values[level * self.grid.n_nodes() + node]
    }

    /// Evaluate the level-`a` radial interpolant at radius `lam <= r_last`.
    #[inline]
    fn eval_level(&self, a: usize, lam: R) -> R {
        let rs = &self.grid.r_nodes;
        let nr = rs.len();
        let j = cell_index(rs, lam);
        let base = a * nr;
        hermite(
            rs[j],
            rs[j + 1],
            self.values[base + j],
            self.values[base + j + 1],
            self.slopes[base + j],
            self.slopes[base + j + 1],
            lam,
        )
    }

    /// u(s, λ) anywhere in the slab 0 <= s <= t_max, λ >= 0.
    pub fn eval(&self, s: R, lam: R) -> R {
        let ts = &self.grid.t_levels;
        let r_last = *self.grid.r_nodes.last().unwrap();
        let a = cell_index(ts, s);
        let t0 = ts[a];
        let t1 = ts[a + 1];
        let theta = ((s - t0) / (t1 - t0)).max(R::zero()).min(R::one());
        let eval_r = |lam: R| -> R {
            let v0 = self.eval_level(a, lam);
            if theta == R::zero() {
                v0
            } else {
                v0 + theta * (self.eval_level(a + 1, lam) - v0)
            }
        };
        if lam <= r_last {
            eval_r(lam)
        } else {
            // decay-profile extension: u falls like 1/weight outward
            let edge = eval_r(r_last);
            edge * weight(s, r_last, self.norm) / weight(s, lam, self.norm)
        }
    }

    /// Values at the active tensor points as a sample set.
    pub fn sample_set(&self) -> SpacetimeSampleSet<R> {
        let mut pts = Vec::new();
        let mut vals = Vec::new();
        for (a, j) in self.grid.active_points() {
            pts.push((self.grid.t_levels[a], self.grid.r_nodes[j]));
            vals.push(self.value_at(a, j));
        }
        SpacetimeSampleSet::new(pts, vals).expect("grid points are valid samples")
    }
}
