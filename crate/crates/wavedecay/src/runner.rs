//! Config-driven orchestration: dispatches a parsed experiment config to the
//! verifier/solver/oracle pipelines, writes machine-readable artifacts, and
//! decides the overall pass/fail verdict.
//!
//! Determinism contract: identical config + seed produce byte-identical
//! reports at any thread count. Parallel work is always collected by index
//! and reduced sequentially.

use std::collections::BTreeMap;
use std::path::Path;

use crate::config::{CompareConfig, ExperimentConfig, FdConfig, Mode};
use crate::duhamel::{solve_fixed_point, solve_with_source};
use crate::error::{Error, Result};
use crate::fd::{
    bargmann_bound, calogero_bound, energy_drift, evolve, free_energy_growth_check,
    initial_data_energy, positivity_checks, tail_exponent_fit, EvolveOptions, EvolutionResult,
    RadialGrid,
};
use crate::grid::{GridSpec, SolveGrid};
use crate::lemmas::{
    verify_lemma1_basic, verify_lemma1_boxed1, verify_lemma1_boxed2, verify_lemma2, SweepOutcome,
};
use crate::report::{
    render, write_energy_csv, write_field_csv, write_observers_csv, write_rows_csv, Artifacts,
    Payload, RunReport, REPORT_SCHEMA_VERSION,
};
use crate::weights::theorem_constants;
use crate::Scalar;

pub struct RunOutcome {
    pub report: RunReport,
    pub rendered: String,
    pub files: Vec<std::path::PathBuf>,
}

/// Applies a CLI-level override of the mode's primary tolerance.
pub fn apply_tolerance_override(config: &mut ExperimentConfig, mode: Mode, tol: Scalar) {
    match mode {
        Mode::Lemma1 | Mode::Lemma2 => {
            if let Some(s) = config.sweep.as_mut() {
                s.tolerance = tol;
            }
        }
        Mode::Solve | Mode::SolveSource => config.solve.decay_bound_slack = tol,
        Mode::Compare => {
            if let Some(c) = config.compare.as_mut() {
                c.rel_tol = tol;
            }
        }
        Mode::Tail => {
            if let Some(t) = config.tail.as_mut() {
                t.tolerance = tol;
            }
        }
        Mode::Energy => config.energy.drift_tol = tol,
        Mode::Constants | Mode::Oracle => {}
    }
}

/// Runs one experiment inside a dedicated rayon pool and writes artifacts.
pub fn run(
    config: &ExperimentConfig,
    mode: Mode,
    out_dir: &Path,
    threads: usize,
) -> Result<RunOutcome> {
    if let Some(declared) = config.mode {
        if declared != mode {
            return Err(Error::Config(format!(
                "config declares mode `{}` but `{}` was requested",
                declared.as_str(),
                mode.as_str()
            )));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_in_pool(config, mode, out_dir))
}

fn run_in_pool(config: &ExperimentConfig, mode: Mode, out_dir: &Path) -> Result<RunOutcome> {
    let mut artifacts = Artifacts::new(out_dir)?;
    let mut tolerances = BTreeMap::new();
    let (payload, pass) = match mode {
        Mode::Constants => run_constants(config, &mut tolerances)?,
        Mode::Lemma1 => run_lemma1(config, &mut artifacts, &mut tolerances)?,
        Mode::Lemma2 => run_lemma2(config, &mut artifacts, &mut tolerances)?,
        Mode::Solve | Mode::SolveSource => {
            run_solve(config, mode, &mut artifacts, &mut tolerances)?
        }
        Mode::Oracle => run_oracle(config, &mut artifacts, &mut tolerances)?,
        Mode::Energy => run_energy(config, &mut artifacts, &mut tolerances)?,
        Mode::Tail => run_tail(config, &mut artifacts, &mut tolerances)?,
        Mode::Compare => run_compare(config, &mut artifacts, &mut tolerances)?,
    };
    let report = RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        mode: mode.as_str().to_string(),
        config_sha256: config.sha256(),
        seed: config.seed,
        tolerances,
        pass,
        payload,
    };
    report.write_json(&artifacts.path("report.json"))?;
    let rendered = render(&report);
    Ok(RunOutcome {
        report,
        rendered,
        files: artifacts.files,
    })
}

fn run_constants(
    config: &ExperimentConfig,
    tolerances: &mut BTreeMap<String, Scalar>,
) -> Result<(Payload, bool)> {
    let data = config.data.build()?;
    let potential = config.potential.build()?;
    let theorem = theorem_constants(
        data.f0,
        data.f1,
        data.g0,
        data.m,
        potential.v0,
        potential.k,
    )?;
    let source = match &config.source {
        Some(s) => {
            let spec = s.build()?;
            Some(crate::weights::corollary_source_constant(
                data.f0,
                data.f1,
                data.g0,
                spec.f0,
                data.m,
                potential.k,
                spec.q,
                spec.r_exp,
                potential.v0,
            )?)
        }
        None => None,
    };
    let bargmann = bargmann_bound(&potential).ok();
    let calogero = calogero_bound(&potential).ok();
    let positivity = positivity_checks(&data, &potential).ok();
    tolerances.insert("contraction".into(), 1.0);
    let pass = theorem.contractive;
    Ok((
        Payload::Constants {
            theorem,
            source,
            bargmann,
            calogero,
            positivity,
        },
        pass,
    ))
}

fn write_sweep(
    artifacts: &mut Artifacts,
    name: &str,
    outcome: &SweepOutcome,
) -> Result<()> {
    write_rows_csv(&artifacts.path(&format!("{name}.csv")), &outcome.rows)
}

fn run_lemma1(
    config: &ExperimentConfig,
    artifacts: &mut Artifacts,
    tolerances: &mut BTreeMap<String, Scalar>,
) -> Result<(Payload, bool)> {
    let sweep = config.require_sweep()?.build(config.seed)?;
    tolerances.insert("worst_ratio_budget".into(), sweep.tolerance);
    let basic = verify_lemma1_basic(&sweep)?;
    write_sweep(artifacts, "sphere_data_bound", &basic)?;
    let boxed1 = verify_lemma1_boxed1(&sweep)?;
    write_sweep(artifacts, "sphere_bound_1", &boxed1)?;
    let mut sweep2 = sweep.clone();
    sweep2.p_values.retain(|&p| p > 3.0);
    let boxed2 = if sweep2.p_values.is_empty() {
        None
    } else {
        let out = verify_lemma1_boxed2(&sweep2)?;
        write_sweep(artifacts, "sphere_bound_2", &out)?;
        Some(out)
    };
    let mut bounds = vec![basic.report, boxed1.report];
    if let Some(b) = boxed2 {
        bounds.push(b.report);
    }
    let pass = bounds.iter().all(|b| b.pass);
    Ok((Payload::LemmaSweep { bounds }, pass))
}

fn run_lemma2(
    config: &ExperimentConfig,
    artifacts: &mut Artifacts,
    tolerances: &mut BTreeMap<String, Scalar>,
) -> Result<(Payload, bool)> {
    let sweep = config.require_sweep()?.build(config.seed)?;
    tolerances.insert("worst_ratio_budget".into(), sweep.tolerance);
    tolerances.insert("cone_quadrature_rel".into(), sweep.quad_rel_tol);
    let out = verify_lemma2(&sweep)?;
    write_sweep(artifacts, "cone_source_bound", &out)?;
    let pass = out.report.pass;
    Ok((
        Payload::LemmaSweep {
            bounds: vec![out.report],
        },
        pass,
    ))
}

fn run_solve(
    config: &ExperimentConfig,
    mode: Mode,
    artifacts: &mut Artifacts,
    tolerances: &mut BTreeMap<String, Scalar>,
) -> Result<(Payload, bool)> {
    let data = config.data.build()?;
    let potential = config.potential.build()?;
    let spec = config.grid_spec();
    let grid = SolveGrid::new(&spec)?;
    let opts = config.solve.build();
    let (field, iteration) = match mode {
        Mode::SolveSource => {
            let src_cfg = config
                .source
                .as_ref()
                .ok_or_else(|| Error::Config("solve-source needs a [source] section".into()))?;
            let src = src_cfg.build()?;
            solve_with_source(&data, &potential, &src, &grid, &opts)?
        }
        _ => solve_fixed_point(&data, &potential, &grid, &opts)?,
    };
    write_field_csv(&artifacts.path("field.csv"), &field)?;

    let ratio_budget = 1.1 * iteration.delta_theoretical + config.solve.contraction_slack;
    let contraction_ok = match iteration.measured_ratio {
        Some(r) => !iteration.contractive || r <= ratio_budget,
        None => true,
    };
    let decay_bound_ok = match iteration.c_theoretical {
        Some(c) => iteration.c_empirical <= c * (1.0 + config.solve.decay_bound_slack),
        None => false,
    };
    tolerances.insert("stop_rel".into(), config.solve.stop_rel);
    tolerances.insert("contraction_ratio_budget".into(), ratio_budget);
    tolerances.insert("decay_bound_slack".into(), config.solve.decay_bound_slack);
    let pass = iteration.contractive && iteration.converged && contraction_ok && decay_bound_ok;
    let n_samples = field.sample_set().len();
    Ok((
        Payload::Solve {
            iteration,
            n_samples,
            decay_bound_ok,
            contraction_ok,
        },
        pass,
    ))
}

fn fd_run(
    config: &ExperimentConfig,
    fd: &FdConfig,
    observers: &[Scalar],
    dr: Scalar,
) -> Result<EvolutionResult<Scalar>> {
    let data = config.data.build()?;
    let potential = config.potential.build()?;
    let grid = RadialGrid::new(dr, fd.r_max, fd.cfl)?;
    evolve(
        &data,
        &potential,
        grid,
        fd.t_final,
        observers,
        &EvolveOptions {
            energy_every: fd.energy_every,
        },
    )
}

fn run_oracle(
    config: &ExperimentConfig,
    artifacts: &mut Artifacts,
    _tolerances: &mut BTreeMap<String, Scalar>,
) -> Result<(Payload, bool)> {
    let fd = config.require_fd()?;
    let res = fd_run(config, fd, &fd.observers, fd.dr)?;
    write_observers_csv(&artifacts.path("observers.csv"), &res.observers)?;
    if !res.energies.is_empty() {
        write_energy_csv(&artifacts.path("energy.csv"), &res.energies)?;
    }
    let drift = (!res.energies.is_empty()).then(|| energy_drift(&res.energies));
    Ok((
        Payload::Oracle {
            n_steps: res.n_steps,
            dt: res.dt,
            observers: fd.observers.clone(),
            energy_drift: drift,
        },
        true,
    ))
}

fn run_energy(
    config: &ExperimentConfig,
    artifacts: &mut Artifacts,
    tolerances: &mut BTreeMap<String, Scalar>,
) -> Result<(Payload, bool)> {
    let fd = config.require_fd()?;
    if fd.energy_every == 0 {
        return Err(Error::Config("energy mode needs fd.energy_every > 0".into()));
    }
    let data = config.data.build()?;
    let potential = config.potential.build()?;
    let res = fd_run(config, fd, &[], fd.dr)?;
    write_energy_csv(&artifacts.path("energy.csv"), &res.energies)?;
    let drift = energy_drift(&res.energies);
    let majorant_ok =
        free_energy_growth_check(&res.energies, potential.v0, config.energy.majorant_slack);
    let quad_energy = initial_data_energy(&data, &potential)?;
    let discrete_energy = res.energies.first().map(|e| e.energy).unwrap_or(0.0);

    let (drift_refined, refinement_factor) = if config.energy.refine {
        let refined = fd_run(config, fd, &[], fd.dr / 2.0)?;
        write_energy_csv(&artifacts.path("energy_refined.csv"), &refined.energies)?;
        let d2 = energy_drift(&refined.energies);
        (Some(d2), Some(d2 / drift.max(Scalar::MIN_POSITIVE)))
    } else {
        (None, None)
    };

    tolerances.insert("drift_tol".into(), config.energy.drift_tol);
    tolerances.insert("majorant_slack".into(), config.energy.majorant_slack);
    tolerances.insert(
        "second_order_factor".into(),
        config.energy.second_order_factor,
    );
    let second_order_ok = refinement_factor
        .map(|f| f <= config.energy.second_order_factor)
        .unwrap_or(true);
    let pass = drift <= config.energy.drift_tol && majorant_ok && second_order_ok;
    Ok((
        Payload::Energy {
            initial_energy_quadrature: quad_energy,
            initial_energy_discrete: discrete_energy,
            drift,
            drift_refined,
            refinement_factor,
            majorant_ok,
        },
        pass,
    ))
}

fn run_tail(
    config: &ExperimentConfig,
    artifacts: &mut Artifacts,
    tolerances: &mut BTreeMap<String, Scalar>,
) -> Result<(Payload, bool)> {
    let fd = config.require_fd()?;
    let tail = config
        .tail
        .as_ref()
        .ok_or_else(|| Error::Config("tail mode needs a [tail] section".into()))?;
    if fd.observers.is_empty() {
        return Err(Error::Config("tail mode needs at least one observer".into()));
    }
    let res = fd_run(config, fd, &fd.observers, fd.dr)?;
    write_observers_csv(&artifacts.path("observers.csv"), &res.observers)?;
    let fit = tail_exponent_fit(&res.observers[0], tail.window)?;
    tolerances.insert("exponent_tolerance".into(), tail.tolerance);
    let pass = (fit.exponent - tail.expected_exponent).abs() <= tail.tolerance;
    Ok((
        Payload::Tail {
            fit,
            expected_exponent: tail.expected_exponent,
        },
        pass,
    ))
}

struct CompareStage {
    rel_linf: Scalar,
    scale: Scalar,
    n_samples: usize,
}

fn compare_stage(
    config: &ExperimentConfig,
    cmp: &CompareConfig,
    grid_spec: &GridSpec,
    dr: Scalar,
) -> Result<CompareStage> {
    let data = config.data.build()?;
    let potential = config.potential.build()?;
    let fd = config.require_fd()?;

    let t_max_sample = cmp.t_samples.iter().copied().fold(0.0, Scalar::max);
    let r_max_sample = cmp.r_samples.iter().copied().fold(0.0, Scalar::max);
    if grid_spec.t_max < t_max_sample {
        return Err(Error::Config(
            "compare: grid.t_max must cover the largest t sample".into(),
        ));
    }
    if grid_spec.r_active < r_max_sample {
        return Err(Error::Config(
            "compare: grid.r_active must cover the largest r sample".into(),
        ));
    }

    let grid = SolveGrid::new(grid_spec)?;
    let opts = config.solve.build();
    let (field, _report) = solve_fixed_point(&data, &potential, &grid, &opts)?;

    let fd_grid = RadialGrid::new(dr, fd.r_max, fd.cfl)?;
    let res = evolve(
        &data,
        &potential,
        fd_grid,
        t_max_sample,
        &cmp.r_samples,
        &EvolveOptions { energy_every: 0 },
    )?;

    let mut worst = 0.0;
    let mut scale = 0.0;
    let mut n = 0;
    for (k, &r) in cmp.r_samples.iter().enumerate() {
        for &t in &cmp.t_samples {
            let u_fd = res.observers[k].value_at(t);
            let u_duh = field.eval(t, r);
            worst = (u_duh - u_fd).abs().max(worst);
            scale = u_fd.abs().max(scale);
            n += 1;
        }
    }
    if scale == 0.0 {
        return Err(Error::Config("compare: oracle field vanished at all samples".into()));
    }
    Ok(CompareStage {
        rel_linf: worst / scale,
        scale,
        n_samples: n,
    })
}

fn run_compare(
    config: &ExperimentConfig,
    _artifacts: &mut Artifacts,
    tolerances: &mut BTreeMap<String, Scalar>,
) -> Result<(Payload, bool)> {
    let cmp = config
        .compare
        .as_ref()
        .ok_or_else(|| Error::Config("compare mode needs a [compare] section".into()))?;
    let fd = config.require_fd()?;

    // shared sample coordinates become grid nodes on the solver side
    let mut spec = config.grid_spec();
    spec.extra.extend(cmp.t_samples.iter().copied());
    spec.extra.extend(cmp.r_samples.iter().copied());

    let base = compare_stage(config, cmp, &spec, fd.dr)?;
    let (refined_rel, reduction) = if cmp.refine {
        let refined = compare_stage(config, cmp, &spec.refined(), fd.dr / 2.0)?;
        (
            Some(refined.rel_linf),
            Some(base.rel_linf / refined.rel_linf.max(Scalar::MIN_POSITIVE)),
        )
    } else {
        (None, None)
    };

    tolerances.insert("rel_tol".into(), cmp.rel_tol);
    tolerances.insert("min_reduction".into(), cmp.min_reduction);
    let pass = base.rel_linf <= cmp.rel_tol
        && reduction.map(|f| f >= cmp.min_reduction).unwrap_or(true);
    Ok((
        Payload::Compare {
            base_rel_linf: base.rel_linf,
            refined_rel_linf: refined_rel,
            reduction_factor: reduction,
            n_samples: base.n_samples,
            scale: base.scale,
        },
        pass,
    ))
}

