//! Experiment configuration: one TOML file per run, sectioned by concern.
//! The canonical serialization of the parsed struct is hashed into every
//! report, so provenance survives reformatting.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::duhamel::{InitialDataSpec, RadialPotential, SolveOptions, SourceSpec};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::lemmas::{log_grid, SweepSpec};
use crate::profiles::ProfileSpec;
use crate::weights::bracket;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Constants,
    Lemma1,
    Lemma2,
    Solve,
    SolveSource,
    Oracle,
    Compare,
    Tail,
    Energy,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Constants => "constants",
            Mode::Lemma1 => "lemma1",
            Mode::Lemma2 => "lemma2",
            Mode::Solve => "solve",
            Mode::SolveSource => "solve-source",
            Mode::Oracle => "oracle",
            Mode::Compare => "compare",
            Mode::Tail => "tail",
            Mode::Energy => "energy",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub m: Scalar,
    pub f: ProfileSpec,
    pub g: ProfileSpec,
    /// declared amplitudes; fitted from the profiles when absent
    #[serde(default)]
    pub f0: Option<Scalar>,
    #[serde(default)]
    pub f1: Option<Scalar>,
    #[serde(default)]
    pub g0: Option<Scalar>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            m: 4.0,
            f: ProfileSpec::Model {
                amplitude: 1.0 / 3.0,
                decay: 3.0,
            },
            g: ProfileSpec::Model {
                amplitude: 1.0,
                decay: 4.0,
            },
            f0: None,
            f1: None,
            g0: None,
        }
    }
}

impl DataConfig {
    pub fn build(&self) -> Result<InitialDataSpec<Scalar>> {
        let f = self.f.build();
        let g = self.g.build();
        match (self.f0, self.f1, self.g0) {
            (Some(f0), Some(f1), Some(g0)) => InitialDataSpec::new(f, g, self.m, f0, f1, g0),
            (None, None, None) => InitialDataSpec::with_fitted_amplitudes(f, g, self.m),
            _ => Err(Error::Config(
                "data: declare all of f0, f1, g0 or none of them".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub k: Scalar,
    pub profile: ProfileSpec,
    #[serde(default)]
    pub v0: Option<Scalar>,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self {
            k: 3.0,
            profile: ProfileSpec::Model {
                amplitude: 0.003,
                decay: 3.0,
            },
            v0: None,
        }
    }
}

impl PotentialConfig {
    pub fn build(&self) -> Result<RadialPotential<Scalar>> {
        let v = self.profile.build();
        match self.v0 {
            Some(v0) => RadialPotential::new(v, v0, self.k),
            None => RadialPotential::with_fitted_amplitude(v, self.k),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RangeConfig {
    pub lo: Scalar,
    pub hi: Scalar,
    pub n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub p_values: Vec<Scalar>,
    #[serde(default)]
    pub q_values: Vec<Scalar>,
    pub t_range: RangeConfig,
    pub x_range: RangeConfig,
    pub tolerance: Scalar,
    #[serde(default = "default_quad_rel_tol")]
    pub quad_rel_tol: Scalar,
    #[serde(default = "default_true")]
    pub case_boundaries: bool,
    #[serde(default)]
    pub random_points: usize,
}

fn default_quad_rel_tol() -> Scalar {
    1e-5
}

fn default_true() -> bool {
    true
}

impl SweepConfig {
    pub fn build(&self, seed: u64) -> Result<SweepSpec> {
        for r in [&self.t_range, &self.x_range] {
            if !(r.lo > 0.0 && r.hi > r.lo && r.n >= 2) {
                return Err(Error::Config(format!(
                    "sweep range must satisfy 0 < lo < hi and n >= 2, got {r:?}"
                )));
            }
        }
        Ok(SweepSpec {
            p_values: self.p_values.clone(),
            q_values: self.q_values.clone(),
            t_values: log_grid(self.t_range.lo, self.t_range.hi, self.t_range.n),
            x_values: log_grid(self.x_range.lo, self.x_range.hi, self.x_range.n),
            tolerance: self.tolerance,
            quad_rel_tol: self.quad_rel_tol,
            case_boundaries: self.case_boundaries,
            random_points: self.random_points,
            seed,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    #[serde(default = "default_stop_rel")]
    pub stop_rel: Scalar,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_solve_quad")]
    pub quad_rel_tol: Scalar,
    #[serde(default = "default_slack")]
    pub contraction_slack: Scalar,
    /// budget multiplier on the theorem decay bound
    #[serde(default = "default_decay_slack")]
    pub decay_bound_slack: Scalar,
}

fn default_stop_rel() -> Scalar {
    1e-8
}
fn default_max_iters() -> usize {
    50
}
fn default_solve_quad() -> Scalar {
    1e-10
}
fn default_slack() -> Scalar {
    0.05
}
fn default_decay_slack() -> Scalar {
    1e-6
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            stop_rel: default_stop_rel(),
            max_iters: default_max_iters(),
            quad_rel_tol: default_solve_quad(),
            contraction_slack: default_slack(),
            decay_bound_slack: default_decay_slack(),
        }
    }
}

impl SolveConfig {
    pub fn build(&self) -> SolveOptions {
        SolveOptions {
            stop_rel: self.stop_rel,
            max_iters: self.max_iters,
            quad_rel_tol: self.quad_rel_tol,
            contraction_slack: self.contraction_slack,
            split_at_crossings: true,
        }
    }
}

/// Built-in sources for the sourced solve.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SourceConfig {
    /// F = F0 / (⟨r⟩^q ⟨t+r⟩ ⟨t−r⟩^(r_exp−1)): saturates its own bound
    DecayKernel { f0: Scalar, q: Scalar, r_exp: Scalar },
    /// F = amplitude·bump(r)/(⟨t+r⟩⟨t−r⟩^(r_exp−1)) with a compact radial bump
    CompactKernel {
        amplitude: Scalar,
        center: Scalar,
        width: Scalar,
        q: Scalar,
        r_exp: Scalar,
    },
}

impl SourceConfig {
    pub fn build(&self) -> Result<SourceSpec<Scalar>> {
        match *self {
            SourceConfig::DecayKernel { f0, q, r_exp } => SourceSpec::new(
                std::sync::Arc::new(move |t: Scalar, r: Scalar| {
                    f0 / (bracket(r).powf(q)
                        * bracket(t + r)
                        * bracket(t - r).powf(r_exp - 1.0))
                }),
                f0,
                q,
                r_exp,
            ),
            SourceConfig::CompactKernel {
                amplitude,
                center,
                width,
                q,
                r_exp,
            } => {
                let bump = crate::profiles::RadialProfile::CompactBump {
                    amplitude,
                    center,
                    width,
                };
                let kinks = bump.kinks();
                // F0 = sup ⟨r⟩^q·bump(r); the time factor matches the bound
                let f0 = crate::profiles::sampled_sup(&bump, |r| bracket(r).powf(q));
                SourceSpec::new(
                    std::sync::Arc::new(move |t: Scalar, r: Scalar| {
                        bump.value(r) / (bracket(t + r) * bracket(t - r).powf(r_exp - 1.0))
                    }),
                    f0 * (1.0 + 1e-9),
                    q,
                    r_exp,
                )
                .map(|s| s.with_radial_kinks(kinks))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FdConfig {
    pub dr: Scalar,
    pub r_max: Scalar,
    #[serde(default = "default_cfl")]
    pub cfl: Scalar,
    pub t_final: Scalar,
    #[serde(default)]
    pub observers: Vec<Scalar>,
    #[serde(default = "default_energy_every")]
    pub energy_every: usize,
}

fn default_cfl() -> Scalar {
    0.9
}
fn default_energy_every() -> usize {
    20
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TailConfig {
    pub window: (Scalar, Scalar),
    pub expected_exponent: Scalar,
    #[serde(default = "default_tail_tol")]
    pub tolerance: Scalar,
}

fn default_tail_tol() -> Scalar {
    0.5
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EnergyConfig {
    #[serde(default = "default_drift_tol")]
    pub drift_tol: Scalar,
    #[serde(default = "default_majorant_slack")]
    pub majorant_slack: Scalar,
    #[serde(default = "default_true")]
    pub refine: bool,
    /// drift(dr/2) must be below this times drift(dr)
    #[serde(default = "default_second_order")]
    pub second_order_factor: Scalar,
}

fn default_drift_tol() -> Scalar {
    1e-4
}
fn default_majorant_slack() -> Scalar {
    1e-3
}
fn default_second_order() -> Scalar {
    0.3
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            drift_tol: default_drift_tol(),
            majorant_slack: default_majorant_slack(),
            refine: true,
            second_order_factor: default_second_order(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub t_samples: Vec<Scalar>,
    pub r_samples: Vec<Scalar>,
    #[serde(default = "default_compare_tol")]
    pub rel_tol: Scalar,
    #[serde(default = "default_true")]
    pub refine: bool,
    #[serde(default = "default_min_reduction")]
    pub min_reduction: Scalar,
}

fn default_compare_tol() -> Scalar {
    1e-2
}
fn default_min_reduction() -> Scalar {
    2.0
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// optional when the CLI subcommand names the mode
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub potential: PotentialConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub solve: SolveConfig,
    #[serde(default)]
    pub source: Option<SourceConfig>,
    #[serde(default)]
    pub fd: Option<FdConfig>,
    #[serde(default)]
    pub tail: Option<TailConfig>,
    #[serde(default)]
    pub energy: EnergyConfig,
    #[serde(default)]
    pub compare: Option<CompareConfig>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// SHA-256 of the canonical serialization; independent of file
    /// formatting and comments.
    pub fn sha256(&self) -> String {
        let canon = toml::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(canon.as_bytes());
        let digest = hasher.finalize();
        let mut s = String::with_capacity(64);
        for b in digest {
            s.push_str(&format!("{b:02x}"));
        }
        s
    }

    pub fn require_sweep(&self) -> Result<&SweepConfig> {
        self.sweep
            .as_ref()
            .ok_or_else(|| Error::Config("this mode needs a [sweep] section".into()))
    }

    pub fn require_fd(&self) -> Result<&FdConfig> {
        self.fd
            .as_ref()
            .ok_or_else(|| Error::Config("this mode needs an [fd] section".into()))
    }

    pub fn grid_spec(&self) -> GridSpec {
        self.grid.clone().unwrap_or_default()
    }
}
