//! Grid certification of the sphere and cone integral inequalities the decay
//! estimates rest on. Each verifier sweeps a (t, x, exponent) grid, evaluates
//! both sides of one inequality, and reports the worst LHS/RHS ratio; a
//! failure would contradict a proven bound, so it always signals a quadrature
//! or implementation bug.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{cone_integral, sphere_integral_closed_form, ConeKernelParams, QuadOptions};
use crate::weights::{bracket, big_c1, big_c2, c_pq, little_c};
use crate::Scalar;

/// Parameter grid for one verification sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    pub p_values: Vec<Scalar>,
    /// only used by the cone bound
    #[serde(default)]
    pub q_values: Vec<Scalar>,
    pub t_values: Vec<Scalar>,
    pub x_values: Vec<Scalar>,
    /// pass budget: worst ratio must stay below 1 + tolerance
    pub tolerance: Scalar,
    /// relative quadrature budget for cone evaluations
    pub quad_rel_tol: Scalar,
    /// add the case-boundary lines x ∈ {t/4, t/2, t, 2t, 1/4} of the proofs
    pub case_boundaries: bool,
    /// extra log-uniform random (t, x) pairs
    pub random_points: usize,
    pub seed: u64,
}

/// Log-spaced grid with `n` points over [lo, hi].
pub fn log_grid(lo: Scalar, hi: Scalar, n: usize) -> Vec<Scalar> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as Scalar / (n - 1) as Scalar).exp())
        .collect()
}

impl SweepSpec {
    /// 25×25 log grid over [1e−2, 1e2] with the proof's case boundaries.
    pub fn default_lemma1() -> Self {
        Self {
            p_values: vec![2.5, 3.0, 3.5, 4.0, 6.0],
            q_values: vec![],
            t_values: log_grid(1e-2, 1e2, 25),
            x_values: log_grid(1e-2, 1e2, 25),
            tolerance: 1e-9,
            quad_rel_tol: 1e-10,
            case_boundaries: true,
            random_points: 0,
            seed: 0,
        }
    }

    /// Cone sweep over [1e−2, 20]; t is kept moderate to keep the nested
    /// quadrature tractable.
    pub fn default_lemma2() -> Self {
        Self {
            p_values: vec![2.5, 3.0],
            q_values: vec![2.5, 3.0, 4.0],
            t_values: log_grid(1e-2, 20.0, 15),
            x_values: log_grid(1e-2, 20.0, 15),
            tolerance: 1e-4,
            quad_rel_tol: 1e-5,
            case_boundaries: true,
            random_points: 0,
            seed: 0,
        }
    }

    fn points(&self, include_x_zero: bool) -> Result<Vec<(Scalar, Scalar)>> {
        if self.t_values.is_empty() || self.x_values.is_empty() || self.p_values.is_empty() {
            return Err(Error::EmptySweep);
        }
        let x_lo = self.x_values.iter().copied().fold(Scalar::INFINITY, Scalar::min);
        let x_hi = self.x_values.iter().copied().fold(0.0, Scalar::max);
        let mut pts = Vec::new();
        let mut ts = self.t_values.clone();
        if self.case_boundaries && !ts.contains(&1.0) {
            ts.push(1.0);
        }
        for &t in &ts {
            if t <= 0.0 {
                return Err(Error::invalid("t_values", "sweep times must be positive"));
            }
            let mut xs = self.x_values.clone();
            if self.case_boundaries {
                for cand in [t / 4.0, t / 2.0, t, 2.0 * t, 0.25] {
                    if cand >= x_lo && cand <= x_hi {
                        xs.push(cand);
                    }
                }
            }
            if include_x_zero {
                xs.push(0.0);
            }
            xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            xs.dedup();
            for &x in &xs {
                if x < 0.0 {
                    return Err(Error::invalid("x_values", "radii must be nonnegative"));
                }
                pts.push((t, x));
            }
        }
        if self.random_points > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            let t_lo = ts.iter().copied().fold(Scalar::INFINITY, Scalar::min);
            let t_hi = ts.iter().copied().fold(0.0, Scalar::max);
            for _ in 0..self.random_points {
                let t = (t_lo.ln() + rng.gen::<Scalar>() * (t_hi.ln() - t_lo.ln())).exp();
                let x = (x_lo.ln() + rng.gen::<Scalar>() * (x_hi.ln() - x_lo.ln())).exp();
                pts.push((t, x));
            }
        }
        Ok(pts)
    }
}

/// One evaluated grid point of a sweep.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PointRow {
    pub t: Scalar,
    pub x: Scalar,
    pub p: Scalar,
    pub q: Option<Scalar>,
    pub lhs: Scalar,
    pub rhs: Scalar,
    pub ratio: Scalar,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorstPoint {
    pub t: Scalar,
    pub x: Scalar,
    pub p: Scalar,
    pub q: Option<Scalar>,
    pub lhs: Scalar,
    pub rhs: Scalar,
}

/// Verdict of one inequality sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    /// which inequality, by role: "sphere-data-bound",
    /// "sphere-bound-1" (the ⟨y⟩^−p / 4πt average),
    /// "sphere-bound-2" (the ⟨y⟩^−(p−1) / 4πt² average),
    /// "cone-source-bound"
    pub bound: String,
    pub worst_ratio: Scalar,
    pub worst_point: WorstPoint,
    pub pass: bool,
    pub n_points: usize,
    pub tolerance: Scalar,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub report: BoundReport,
    pub rows: Vec<PointRow>,
}

fn finish(bound: &str, rows: Vec<PointRow>, tolerance: Scalar) -> Result<SweepOutcome> {
    let mut worst: Option<&PointRow> = None;
    for row in &rows {
        if worst.map(|w| row.ratio > w.ratio).unwrap_or(true) {
            worst = Some(row);
        }
    }
    let worst = worst.ok_or(Error::EmptySweep)?;
    let report = BoundReport {
        bound: bound.to_string(),
        worst_ratio: worst.ratio,
        worst_point: WorstPoint {
            t: worst.t,
            x: worst.x,
            p: worst.p,
            q: worst.q,
            lhs: worst.lhs,
            rhs: worst.rhs,
        },
        pass: worst.ratio <= 1.0 + tolerance,
        n_points: rows.len(),
        tolerance,
    };
    Ok(SweepOutcome { report, rows })
}

/// I(t,x,p) <= c_p·t/(x·⟨t−x⟩^(p−2)) over the sweep (needs x > 0).
pub fn verify_lemma1_basic(spec: &SweepSpec) -> Result<SweepOutcome> {
    for &p in &spec.p_values {
        little_c(p)?;
    }
    let pts = spec.points(false)?;
    let mut jobs = Vec::new();
    for &p in &spec.p_values {
        for &(t, x) in &pts {
            if x > 0.0 {
                jobs.push((p, t, x));
            }
        }
    }
    if jobs.is_empty() {
        return Err(Error::EmptySweep);
    }
    let rows: Vec<PointRow> = jobs
        .par_iter()
        .map(|&(p, t, x)| -> Result<PointRow> {
            let lhs = sphere_integral_closed_form(x, t, p)?;
            // log-space ratio against c_p · t/(x ⟨t−x⟩^(p−2))
            let ln_rhs = little_c(p)?.ln() + t.ln() - x.ln() - (p - 2.0) * bracket(t - x).ln();
            let ratio = (lhs.ln() - ln_rhs).exp();
            Ok(PointRow {
                t,
                x,
                p,
                q: None,
                lhs,
                rhs: ln_rhs.exp(),
                ratio,
            })
        })
        .collect::<Result<_>>()?;
    finish("sphere-data-bound", rows, spec.tolerance)
}

enum Boxed {
    One,
    Two,
}

fn verify_lemma1_boxed(spec: &SweepSpec, which: Boxed) -> Result<SweepOutcome> {
    for &p in &spec.p_values {
        match which {
            Boxed::One => {
                if p <= 2.0 {
                    return Err(Error::invalid("p", format!("needs p > 2, got {p}")));
                }
            }
            Boxed::Two => {
                if p <= 3.0 {
                    return Err(Error::invalid("p", format!("needs p > 3, got {p}")));
                }
            }
        }
    }
    let pts = spec.points(true)?;
    let mut jobs = Vec::new();
    for &p in &spec.p_values {
        for &(t, x) in &pts {
            jobs.push((p, t, x));
        }
    }
    let rows: Vec<PointRow> = jobs
        .par_iter()
        .map(|&(p, t, x)| -> Result<PointRow> {
            // LHS in log space; the concentric x = 0 column uses the exact
            // identity (1/4π)∫ h dσ = t² h(t)
            let ln_lhs = match which {
                Boxed::One => {
                    if x == 0.0 {
                        t.ln() - p * bracket(t).ln()
                    } else {
                        sphere_integral_closed_form(x, t, p)?.ln() - t.ln()
                    }
                }
                Boxed::Two => {
                    if x == 0.0 {
                        -(p - 1.0) * bracket(t).ln()
                    } else {
                        sphere_integral_closed_form(x, t, p - 1.0)?.ln() - 2.0 * t.ln()
                    }
                }
            };
            let c = match which {
                Boxed::One => big_c1(p)?,
                Boxed::Two => big_c2(p)?,
            };
            let ln_rhs = c.ln() - bracket(t + x).ln() - (p - 2.0) * bracket(t - x).ln();
            let ratio = (ln_lhs - ln_rhs).exp();
            Ok(PointRow {
                t,
                x,
                p,
                q: None,
                lhs: ln_lhs.exp(),
                rhs: ln_rhs.exp(),
                ratio,
            })
        })
        .collect::<Result<_>>()?;
    let name = match which {
        Boxed::One => "sphere-bound-1",
        Boxed::Two => "sphere-bound-2",
    };
    finish(name, rows, spec.tolerance)
}

/// (1/4πt) ∫ ⟨y⟩^(−p) dσ <= C¹_p/(⟨t+x⟩⟨t−x⟩^(p−2)), p > 2.
pub fn verify_lemma1_boxed1(spec: &SweepSpec) -> Result<SweepOutcome> {
    verify_lemma1_boxed(spec, Boxed::One)
}

/// (1/4πt²) ∫ ⟨y⟩^(−(p−1)) dσ <= C²_p/(⟨t+x⟩⟨t−x⟩^(p−2)), p > 3.
pub fn verify_lemma1_boxed2(spec: &SweepSpec) -> Result<SweepOutcome> {
    verify_lemma1_boxed(spec, Boxed::Two)
}

/// Cone integral <= C_{p,q}/(⟨t+x⟩⟨t−x⟩^(p−1)) with the quadrature error
/// folded in conservatively: pass needs LHS·(1+quad_err) <= RHS·(1+tol).
pub fn verify_lemma2(spec: &SweepSpec) -> Result<SweepOutcome> {
    let mut pairs = Vec::new();
    for &p in &spec.p_values {
        for &q in &spec.q_values {
            if q >= p {
                ConeKernelParams::new(p, q)?;
                pairs.push((p, q));
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::EmptySweep);
    }
    let pts = spec.points(true)?;
    let mut jobs = Vec::new();
    for &(p, q) in &pairs {
        for &(t, x) in &pts {
            jobs.push((p, q, t, x));
        }
    }
    let quad = QuadOptions::with_rel_tol(spec.quad_rel_tol);
    let rows: Vec<PointRow> = jobs
        .par_iter()
        .map(|&(p, q, t, x)| -> Result<PointRow> {
            let params = ConeKernelParams::new(p, q)?;
            let res = cone_integral(x, t, params, &quad)?;
            let rel_err = if res.value > 0.0 {
                (res.abs_error / res.value).min(1.0)
            } else {
                0.0
            };
            let ln_rhs = c_pq(p, q)?.ln() - bracket(t + x).ln() - (p - 1.0) * bracket(t - x).ln();
            let lhs = res.value * (1.0 + rel_err);
            let ratio = if lhs > 0.0 {
                (lhs.ln() - ln_rhs).exp()
            } else {
                0.0
            };
            Ok(PointRow {
                t,
                x,
                p,
                q: Some(q),
                lhs,
                rhs: ln_rhs.exp(),
                ratio,
            })
        })
        .collect::<Result<_>>()?;
    finish("cone-source-bound", rows, spec.tolerance)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_lemma1() -> SweepSpec {
        SweepSpec {
            p_values: vec![2.5, 4.0],
            q_values: vec![],
            t_values: log_grid(0.1, 10.0, 6),
            x_values: log_grid(0.1, 10.0, 6),
            tolerance: 1e-9,
            quad_rel_tol: 1e-10,
            case_boundaries: true,
            random_points: 0,
            seed: 0,
        }
    }

    #[test]
    fn lemma1_basic_passes_and_is_reasonably_tight() {
        let out = verify_lemma1_basic(&tiny_lemma1()).unwrap();
        assert!(out.report.pass, "worst ratio {}", out.report.worst_ratio);
        // the bound is attained up to a bounded factor near the light cone
        assert!(out.report.worst_ratio >= 0.5);
        assert!(out.report.worst_ratio <= 1.0 + 1e-9);
    }

    #[test]
    fn lemma1_single_point_on_cone_passes() {
        let spec = SweepSpec {
            t_values: vec![3.0],
            x_values: vec![3.0],
            case_boundaries: false,
            ..tiny_lemma1()
        };
        let out = verify_lemma1_basic(&spec).unwrap();
        assert!(out.report.pass);
    }

    #[test]
    fn lemma1_reference_ratio_point() {
        // p=4, t=1, x=2: RHS = 1/32
        let spec = SweepSpec {
            p_values: vec![4.0],
            t_values: vec![1.0],
            x_values: vec![2.0],
            case_boundaries: false,
            ..tiny_lemma1()
        };
        let out = verify_lemma1_basic(&spec).unwrap();
        let row = &out.rows[0];
        assert!((row.rhs - 0.03125).abs() < 1e-12);
        assert!(row.ratio <= 1.0);
    }

    #[test]
    fn lemma1_boxed_bounds_pass_including_x_zero_column() {
        let out1 = verify_lemma1_boxed1(&tiny_lemma1()).unwrap();
        assert!(out1.report.pass, "worst {}", out1.report.worst_ratio);
        assert!(out1.rows.iter().any(|r| r.x == 0.0));

        let spec2 = SweepSpec {
            p_values: vec![3.5, 4.0, 6.0],
            ..tiny_lemma1()
        };
        let out2 = verify_lemma1_boxed2(&spec2).unwrap();
        assert!(out2.report.pass, "worst {}", out2.report.worst_ratio);
    }

    #[test]
    fn lemma1_boxed1_near_exponent_boundary() {
        let spec = SweepSpec {
            p_values: vec![3.0001],
            ..tiny_lemma1()
        };
        let out = verify_lemma1_boxed1(&spec).unwrap();
        assert!(out.report.pass);
    }

    #[test]
    fn lemma2_small_sweep_passes() {
        let spec = SweepSpec {
            p_values: vec![2.5, 3.0],
            q_values: vec![3.0],
            t_values: log_grid(0.1, 5.0, 4),
            x_values: log_grid(0.1, 5.0, 4),
            tolerance: 1e-4,
            quad_rel_tol: 1e-5,
            case_boundaries: false,
            random_points: 0,
            seed: 0,
        };
        let out = verify_lemma2(&spec).unwrap();
        assert!(out.report.pass, "worst {}", out.report.worst_ratio);
        // the cone constant is generous; the sweep stays well below it
        assert!(out.report.worst_ratio < 0.5);
    }

    #[test]
    fn invalid_sweeps_error() {
        let mut spec = tiny_lemma1();
        spec.p_values = vec![2.0];
        assert!(verify_lemma1_basic(&spec).is_err());
        let mut empty = tiny_lemma1();
        empty.t_values.clear();
        assert!(matches!(
            verify_lemma1_basic(&empty),
            Err(Error::EmptySweep | Error::InvalidParameter { .. })
        ));
        let mut boxed2 = tiny_lemma1();
        boxed2.p_values = vec![3.0];
        assert!(verify_lemma1_boxed2(&boxed2).is_err());
    }

    #[test]
    fn random_augmentation_is_deterministic() {
        let mut spec = tiny_lemma1();
        spec.random_points = 32;
        spec.seed = 7;
        let a = verify_lemma1_basic(&spec).unwrap();
        let b = verify_lemma1_basic(&spec).unwrap();
        assert_eq!(a.rows.len(), b.rows.len());
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.ratio.to_bits(), rb.ratio.to_bits());
        }
    }
}
