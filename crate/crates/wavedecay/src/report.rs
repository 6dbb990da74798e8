//! Machine-readable run reports (JSON) and plot-ready CSV emission, plus the
//! one-screen text rendering. Schemas are versioned; identical runs produce
//! byte-identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::duhamel::IterationReport;
use crate::error::Result;
use crate::fd::{BoundStateBound, EnergySample, ObserverSeries, PositivityReport, TailFit};
use crate::grid::GridField;
use crate::lemmas::{BoundReport, PointRow};
use crate::weights::{weight, ConstantSet, SourceConstants};
use crate::Scalar;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Envelope around every mode's payload.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub mode: String,
    /// SHA-256 of the canonical (re-serialized) config
    pub config_sha256: String,
    pub seed: u64,
    /// tolerance budget behind each pass/fail verdict
    pub tolerances: BTreeMap<String, Scalar>,
    pub pass: bool,
    pub payload: Payload,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Payload {
    Constants {
        theorem: ConstantSet<Scalar>,
        source: Option<SourceConstants<Scalar>>,
        bargmann: Option<BoundStateBound<Scalar>>,
        calogero: Option<BoundStateBound<Scalar>>,
        positivity: Option<PositivityReport<Scalar>>,
    },
    LemmaSweep {
        bounds: Vec<BoundReport>,
    },
    Solve {
        iteration: IterationReport<Scalar>,
        n_samples: usize,
        decay_bound_ok: bool,
        contraction_ok: bool,
    },
    Oracle {
        n_steps: usize,
        dt: Scalar,
        observers: Vec<Scalar>,
        energy_drift: Option<Scalar>,
    },
    Energy {
        initial_energy_quadrature: Scalar,
        initial_energy_discrete: Scalar,
        drift: Scalar,
        drift_refined: Option<Scalar>,
        refinement_factor: Option<Scalar>,
        majorant_ok: bool,
    },
    Tail {
        fit: TailFit<Scalar>,
        expected_exponent: Scalar,
    },
    Compare {
        base_rel_linf: Scalar,
        refined_rel_linf: Option<Scalar>,
        reduction_factor: Option<Scalar>,
        n_samples: usize,
        scale: Scalar,
    },
}

impl RunReport {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let report: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        if report.schema_version != REPORT_SCHEMA_VERSION {
            return Err(crate::error::Error::Config(format!(
                "report schema {} not supported (expected {})",
                report.schema_version, REPORT_SCHEMA_VERSION
            )));
        }
        Ok(report)
    }
}

fn fmt_f(v: Scalar) -> String {
    format!("{v}")
}

/// Per-point sweep rows: t, x, p, q, lhs, rhs, ratio.
pub fn write_rows_csv(path: &Path, rows: &[PointRow]) -> Result<()> {
    let mut s = String::from("t,x,p,q,lhs,rhs,ratio\n");
    for r in rows {
        let q = r.q.map(fmt_f).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            fmt_f(r.t),
            fmt_f(r.x),
            fmt_f(r.p),
            q,
            fmt_f(r.lhs),
            fmt_f(r.rhs),
            fmt_f(r.ratio)
        );
    }
    fs::write(path, s)?;
    Ok(())
}

/// Solved field samples: t, r, u, weight, weighted_abs.
pub fn write_field_csv(path: &Path, field: &GridField<'_, Scalar>) -> Result<()> {
    let mut s = String::from("t,r,u,weight,weighted_abs\n");
    for ((t, r), u) in field.sample_set().iter() {
        let w = weight(t, r, field.norm);
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            fmt_f(t),
            fmt_f(r),
            fmt_f(u),
            fmt_f(w),
            fmt_f(w * u.abs())
        );
    }
    fs::write(path, s)?;
    Ok(())
}

/// Observer series: t, r_obs, u.
pub fn write_observers_csv(path: &Path, series: &[ObserverSeries<Scalar>]) -> Result<()> {
    let mut s = String::from("t,r_obs,u\n");
    for ser in series {
        for (t, u) in ser.times.iter().zip(&ser.values) {
            let _ = writeln!(s, "{},{},{}", fmt_f(*t), fmt_f(ser.r_obs), fmt_f(*u));
        }
    }
    fs::write(path, s)?;
    Ok(())
}

/// Energy series: t, E, E0.
pub fn write_energy_csv(path: &Path, energies: &[EnergySample<Scalar>]) -> Result<()> {
    let mut s = String::from("t,E,E0\n");
    for e in energies {
        let _ = writeln!(
            s,
            "{},{},{}",
            fmt_f(e.t),
            fmt_f(e.energy),
            fmt_f(e.free_energy)
        );
    }
    fs::write(path, s)?;
    Ok(())
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

/// One-screen text summary of a report, one line per verified statement.
pub fn render(report: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "[{}] mode={} config={} {}",
        verdict(report.pass),
        report.mode,
        &report.config_sha256[..12.min(report.config_sha256.len())],
        if report.pass { "" } else { "(see lines below)" }
    );
    match &report.payload {
        Payload::Constants {
            theorem,
            source,
            bargmann,
            calogero,
            positivity,
        } => {
            let _ = writeln!(
                out,
                "  decay exponent p = {}, contraction delta = {} ({})",
                theorem.p,
                theorem.delta,
                if theorem.contractive {
                    "contractive"
                } else {
                    "outside contraction regime"
                }
            );
            let _ = writeln!(
                out,
                "  constants: c_p = {}, C1_p = {}, C2_p = {}, C_m = {}, C_pk = {}",
                theorem.c_p, theorem.c1_p, theorem.c2_p, theorem.c_m, theorem.c_pk
            );
            if let Some(c) = theorem.c_total {
                let _ = writeln!(out, "  composite decay constant C = {c}");
            }
            if let Some(s) = source {
                let _ = writeln!(
                    out,
                    "  sourced problem: p = {}, C_rq = {}, C = {:?}",
                    s.p, s.c_rq, s.c_total
                );
            }
            if let Some(b) = bargmann {
                let _ = writeln!(
                    out,
                    "  bound states (moment r|V|): integral = {}, model majorant = {}",
                    b.integral, b.model_majorant
                );
            }
            if let Some(c) = calogero {
                let _ = writeln!(
                    out,
                    "  bound states (moment sqrt|V|): integral = {}, model majorant = {}",
                    c.integral, c.model_majorant
                );
            }
            if let Some(p) = positivity {
                let _ = writeln!(
                    out,
                    "  energy positivity: V0 = {} ({}), coercivity 1-4V0 = {}, hardy ratio = {}",
                    p.v0,
                    if p.positive_definite_regime {
                        "positive definite"
                    } else {
                        "flag: V0 >= 1/4"
                    },
                    p.coercivity,
                    p.hardy_ratio
                );
            }
        }
        Payload::LemmaSweep { bounds } => {
            for b in bounds {
                let _ = writeln!(
                    out,
                    "  [{}] {}: worst LHS/RHS = {} over {} points (tol {}) at (t={}, x={}, p={}{})",
                    verdict(b.pass),
                    b.bound,
                    b.worst_ratio,
                    b.n_points,
                    b.tolerance,
                    b.worst_point.t,
                    b.worst_point.x,
                    b.worst_point.p,
                    b.worst_point
                        .q
                        .map(|q| format!(", q={q}"))
                        .unwrap_or_default()
                );
            }
        }
        Payload::Solve {
            iteration,
            n_samples,
            decay_bound_ok,
            contraction_ok,
        } => {
            let _ = writeln!(
                out,
                "  [{}] converged = {} after {} iterations ({})",
                verdict(iteration.converged),
                iteration.converged,
                iteration.n_iters,
                if iteration.contractive {
                    "contractive"
                } else {
                    "outside contraction regime"
                }
            );
            let _ = writeln!(
                out,
                "  [{}] contraction: measured ratio = {:?}, theoretical delta = {}",
                verdict(*contraction_ok),
                iteration.measured_ratio,
                iteration.delta_theoretical
            );
            let _ = writeln!(
                out,
                "  [{}] decay bound: weighted sup = {} vs constant {:?} over {} samples",
                verdict(*decay_bound_ok),
                iteration.c_empirical,
                iteration.c_theoretical,
                n_samples
            );
        }
        Payload::Oracle {
            n_steps,
            dt,
            observers,
            energy_drift,
        } => {
            let _ = writeln!(
                out,
                "  evolved {n_steps} steps at dt = {dt}; observers at {observers:?}"
            );
            if let Some(d) = energy_drift {
                let _ = writeln!(out, "  relative energy drift = {d}");
            }
        }
        Payload::Energy {
            initial_energy_quadrature,
            initial_energy_discrete,
            drift,
            drift_refined,
            refinement_factor,
            majorant_ok,
        } => {
            let _ = writeln!(
                out,
                "  initial energy: quadrature = {initial_energy_quadrature}, discrete = {initial_energy_discrete}"
            );
            let _ = writeln!(out, "  relative drift = {drift}");
            if let (Some(dr), Some(f)) = (drift_refined, refinement_factor) {
                let _ = writeln!(out, "  refined drift = {dr} (factor {f})");
            }
            let _ = writeln!(
                out,
                "  [{}] free-energy exponential majorant",
                verdict(*majorant_ok)
            );
        }
        Payload::Tail {
            fit,
            expected_exponent,
        } => {
            let _ = writeln!(
                out,
                "  fitted exponent = {} (expected ~{expected_exponent}), residual rms = {}, {} points{}",
                fit.exponent,
                fit.residual_rms,
                fit.n_points,
                if fit.used_envelope { ", envelope" } else { "" }
            );
        }
        Payload::Compare {
            base_rel_linf,
            refined_rel_linf,
            reduction_factor,
            n_samples,
            scale,
        } => {
            let _ = writeln!(
                out,
                "  relative L-inf difference = {base_rel_linf} over {n_samples} samples (scale {scale})"
            );
            if let (Some(r), Some(f)) = (refined_rel_linf, reduction_factor) {
                let _ = writeln!(out, "  refined difference = {r}, reduction factor = {f}");
            }
        }
    }
    out
}

/// Output paths of one run.
pub struct Artifacts {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }
}
