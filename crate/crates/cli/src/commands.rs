//! The four subcommands. Each computes everything first and returns the
//! files to write together with a short report for stdout.

use std::path::Path;

use nash_sir_core::shooter::FIXED_POINT_TOL;
use nash_sir_core::{
    enumerate, simulate_schedule, verify_path, EpidemicState, EquilibriumSet, FinalCondition, FixedPointReport,
    IntegratorConfig, ModelParams, SearchConfig, SearchDiagnostics, TraceMethod, Trajectory, TrajectorySample,
    WelfareState,
};
use serde::Serialize;

use crate::config::{Format, OutputConfig, RunConfig, SweepConfig};
use crate::io::{self, OutputSet, TrajectorySummary};
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Result of a command: files to write and lines to print.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: OutputSet,
    pub report: Vec<String>,
    /// Set when a verification ran and failed.
    pub verification_failed: bool,
}

/// Forward run under the configured policy (no distancing if absent).
pub fn simulate(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let p = &cfg.model;
    let schedule = cfg.policy_schedule();
    let sol = simulate_schedule(p, &schedule, &cfg.integrator).map_err(|e| CliError::Compute(e.to_string()))?;
    let samples = sol
        .t
        .iter()
        .zip(&sol.y)
        .map(|(t, y)| TrajectorySample::new(*t, EpidemicState::from_array(*y), WelfareState::default(), schedule.value_at(*t), p))
        .collect();
    let traj = Trajectory { samples };
    let summary = TrajectorySummary::of(&traj, p);
    let mut out = Outcome::default();
    if cfg.output.wants(Format::Csv) {
        out.files.add("trajectory.csv", io::trajectory_csv(&io::strided(&io::rows(&traj), cfg.output.stride))?);
    }
    if cfg.output.wants(Format::Json) {
        out.files.add("summary.json", io::json_bytes(&summary)?);
    }
    out.report.push(format!(
        "attack rate {:.6}  total gamma_E {:.6}  peak I {:.6} at t = {:.3}",
        summary.attack_rate, summary.total_gamma_e, summary.peak_i, summary.t_peak
    ));
    Ok(out)
}

#[derive(Debug, Serialize)]
pub struct ManifestEntry {
    /// Trajectory file, relative to the manifest.
    pub file: Option<String>,
    pub final_condition: FinalCondition,
    pub attack_rate: f64,
    #[serde(rename = "total_gamma_E")]
    pub total_gamma_e: f64,
    #[serde(rename = "L_S0")]
    pub l_s0: f64,
    #[serde(rename = "peak_I")]
    pub peak_i: f64,
    pub t_peak: f64,
    pub cumulative_distancing: f64,
    /// Initial-state residual of the accepted backward trace.
    pub residual: f64,
    pub fixed_point_residual: f64,
    pub fixed_point_verified: bool,
    pub method: TraceMethod,
    pub integrator: IntegratorConfig,
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub schema_version: u32,
    pub params: &'a ModelParams,
    pub integrator: &'a IntegratorConfig,
    pub search: &'a SearchConfig,
    pub count: usize,
    pub equilibria: Vec<ManifestEntry>,
    pub diagnostics: &'a SearchDiagnostics,
}

fn equilibrium_files(set: &EquilibriumSet, cfg: &RunConfig, output: &OutputConfig, prefix: &str, files: &mut OutputSet) -> Result<(), CliError> {
    let mut entries = Vec::new();
    for (k, eq) in set.equilibria.iter().enumerate() {
        let file = output.wants(Format::Csv).then(|| format!("eq_{}.csv", k + 1));
        if let Some(name) = &file {
            files.add(format!("{prefix}{name}"), io::trajectory_csv(&io::strided(&io::rows(&eq.trajectory), output.stride))?);
        }
        let s = &eq.summary;
        entries.push(ManifestEntry {
            file,
            final_condition: s.final_condition,
            attack_rate: s.attack_rate,
            total_gamma_e: s.total_gamma_e,
            l_s0: s.initial_losses.l_s,
            peak_i: s.peak_i,
            t_peak: s.t_peak,
            cumulative_distancing: s.cumulative_distancing,
            residual: s.residual,
            fixed_point_residual: s.fixed_point_residual,
            fixed_point_verified: eq.fixed_point.passes(),
            method: eq.method,
            integrator: eq.integrator,
        });
    }
    if output.wants(Format::Json) {
        let manifest = Manifest {
            schema_version: SCHEMA_VERSION,
            params: &set.params,
            integrator: &cfg.integrator,
            search: &cfg.search,
            count: set.len(),
            equilibria: entries,
            diagnostics: &set.diagnostics,
        };
        files.add(format!("{prefix}manifest.json"), io::json_bytes(&manifest)?);
    }
    Ok(())
}

fn describe(set: &EquilibriumSet) -> Vec<String> {
    let d = &set.diagnostics;
    let mut lines = vec![format!(
        "{} equilibri{} ({} grid points traced, {} seeds refined, {} refinement failures)",
        set.len(),
        if set.len() == 1 { "um" } else { "a" },
        d.candidates_traced,
        d.seeds_refined,
        d.refinement_failures.len()
    )];
    for (k, eq) in set.equilibria.iter().enumerate() {
        let s = &eq.summary;
        lines.push(format!(
            "  #{}: attack rate {:.6}  total gamma_E {:.6}  L_S(0) {:.6}  peak I {:.6}  fixed-point residual {:.2e}",
            k + 1,
            s.attack_rate,
            s.total_gamma_e,
            s.initial_losses.l_s,
            s.peak_i,
            s.fixed_point_residual
        ));
    }
    lines
}

pub fn equilibrium(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let set = enumerate(&cfg.model, &cfg.search, &cfg.integrator);
    let mut out = Outcome::default();
    equilibrium_files(&set, cfg, &cfg.output, "", &mut out.files)?;
    out.report = describe(&set);
    Ok(out)
}

/// Fixed-point check of a trajectory file against the configured model.
pub fn verify(cfg: &RunConfig, trajectory: &Path) -> Result<Outcome, CliError> {
    let rows = io::read_trajectory(trajectory)?;
    let report = verify_rows(&cfg.model, &rows)?;
    let passed = report.passes();
    Ok(Outcome {
        files: OutputSet::default(),
        report: vec![
            format!("state mismatch    {:.3e}", report.state_mismatch),
            format!("behavior mismatch {:.3e}", report.behavior_mismatch),
            format!("{} (tolerance {FIXED_POINT_TOL:e})", if passed { "PASS" } else { "FAIL" }),
        ],
        verification_failed: !passed,
    })
}

pub fn verify_rows(p: &ModelParams, rows: &[io::Row]) -> Result<FixedPointReport, CliError> {
    let times: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let states: Vec<EpidemicState> = rows.iter().map(|r| EpidemicState::new(r[1], r[2], r[3], r[4], r[5])).collect();
    let d: Vec<f64> = rows.iter().map(|r| r[6]).collect();
    if d.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(CliError::Format("d_N outside [0, 1]".into()));
    }
    verify_path(p, &times, &states, &d).map_err(|e| CliError::Format(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub count: usize,
    pub min_attack_rate: Option<f64>,
    pub max_attack_rate: Option<f64>,
    pub min_total_gamma_e: Option<f64>,
    pub max_total_gamma_e: Option<f64>,
}

impl SweepRow {
    fn of(value: f64, set: &EquilibriumSet) -> Self {
        let range = |f: fn(&nash_sir_core::EquilibriumSummary) -> f64| {
            let v: Vec<f64> = set.equilibria.iter().map(|e| f(&e.summary)).collect();
            let lo = v.iter().copied().reduce(f64::min);
            let hi = v.iter().copied().reduce(f64::max);
            (lo, hi)
        };
        let (min_attack_rate, max_attack_rate) = range(|s| s.attack_rate);
        let (min_total_gamma_e, max_total_gamma_e) = range(|s| s.total_gamma_e);
        Self { value, count: set.len(), min_attack_rate, max_attack_rate, min_total_gamma_e, max_total_gamma_e }
    }
}

pub fn sweep_csv(param: &str, rows: &[SweepRow]) -> Result<Vec<u8>, CliError> {
    let cell = |x: Option<f64>| x.map(io::format_number).unwrap_or_default();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([param, "count", "min_attack_rate", "max_attack_rate", "min_total_gamma_E", "max_total_gamma_E"])
        .map_err(CliError::output)?;
    for r in rows {
        w.write_record([
            io::format_number(r.value),
            r.count.to_string(),
            cell(r.min_attack_rate),
            cell(r.max_attack_rate),
            cell(r.min_total_gamma_e),
            cell(r.max_total_gamma_e),
        ])
        .map_err(CliError::output)?;
    }
    w.into_inner().map_err(|e| CliError::output(e.into_error()))
}

/// Equilibrium search at every value of the swept parameter. Each value's
/// files go to `<param>_<k>/`; the comparison table to `sweep.csv`.
pub fn sweep(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let Some(SweepConfig { param, values }) = &cfg.sweep else {
        return Err(CliError::Config("sweep needs a [sweep] table with `param` and `values`".into()));
    };
    let mut out = Outcome::default();
    let mut rows = Vec::new();
    for (k, v) in values.iter().enumerate() {
        let p = param.apply(&cfg.model, *v);
        log::info!("sweep {} = {v}", param.name());
        let set = enumerate(&p, &cfg.search, &cfg.integrator);
        let sub = RunConfig { model: p, ..cfg.clone() };
        equilibrium_files(&set, &sub, &cfg.output, &format!("{}_{}/", param.name(), k + 1), &mut out.files)?;
        let row = SweepRow::of(*v, &set);
        out.report.push(format!(
            "{} = {v}: {} equilibri{}{}",
            param.name(),
            row.count,
            if row.count == 1 { "um" } else { "a" },
            match (row.min_attack_rate, row.max_attack_rate) {
                (Some(lo), Some(hi)) => format!(", attack rate {lo:.6}..{hi:.6}"),
                _ => String::new(),
            }
        ));
        rows.push(row);
    }
    out.files.add("sweep.csv", sweep_csv(param.name(), &rows)?);
    Ok(out)
}
