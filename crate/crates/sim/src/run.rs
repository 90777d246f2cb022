use std::path::{Path, PathBuf};
use std::time::Instant;

use phonon_core::protocol::Scheme;
use phonon_core::scenarios::{
    scenario_fig2, scenario_fig3_point, scenario_mapping_budget, scenario_tqd,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{RunConfig, ScenarioKind};
use crate::output::{self, write_csv};
use crate::SimError;

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: String,
    pub scenario: ScenarioKind,
    pub seed: u64,
    pub shots: u64,
    pub wall_clock_s: f64,
    pub files: Vec<PathBuf>,
    pub config: RunConfig,
}

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn version() -> String {
    format!("v{}", env!("CARGO_PKG_VERSION"))
}

/// Runs the configured scenario and writes its tables plus
/// `manifest.json` into `config.out`.
pub fn run(config: &RunConfig) -> Result<RunManifest, SimError> {
    let scenario = config
        .scenario
        .ok_or_else(|| SimError::Config("scenario: not set; pass --scenario or set it in the file".into()))?;
    let started = Instant::now();
    let out = &config.out;
    std::fs::create_dir_all(out).map_err(|source| SimError::Io { path: out.clone(), source })?;
    let files = match scenario {
        ScenarioKind::Fig2 => run_fig2(config, out)?,
        ScenarioKind::Fig3 => run_fig3(config, out)?,
        ScenarioKind::Tqd => run_tqd(config, out)?,
        ScenarioKind::Budget => run_budget(config, out)?,
    };
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME"),
        version: version(),
        scenario,
        seed: config.seed,
        shots: config.shots,
        wall_clock_s: started.elapsed().as_secs_f64(),
        files,
        config: config.clone(),
    };
    let path = out.join(MANIFEST_NAME);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n").map_err(|source| SimError::Io { path, source })?;
    Ok(manifest)
}

fn csv_name(scenario: ScenarioKind) -> String {
    format!("{scenario}.csv")
}

fn run_fig2(config: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, SimError> {
    let setup = config.setup()?;
    let results = config
        .fig2_phonons
        .par_iter()
        .map(|&n| scenario_fig2(n, config.shots, config.seed, &setup).map(|s| (n, s)))
        .collect::<Result<Vec<_>, _>>()?;
    let general = matches!(setup.protocol.scheme, Scheme::General { .. });
    let rows = output::fig2_rows(&results, setup.protocol.scheme.max_n(), general);
    let name = csv_name(ScenarioKind::Fig2);
    write_csv(&out.join(&name), &rows)?;
    Ok(vec![name.into()])
}

fn run_fig3(config: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, SimError> {
    let setup = config.setup()?;
    let points = config
        .fig3_times
        .par_iter()
        .enumerate()
        .map(|(i, &t)| scenario_fig3_point(t, i, config.shots, config.seed, &setup))
        .collect::<Result<Vec<_>, _>>()?;
    let name = csv_name(ScenarioKind::Fig3);
    write_csv(&out.join(&name), &output::fig3_rows(&points))?;
    let exact = "fig3_exact.csv";
    write_csv(&out.join(exact), &output::fig3_exact_rows(&points))?;
    Ok(vec![name.into(), exact.into()])
}

fn run_tqd(config: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, SimError> {
    let sweep = config.sweep();
    let rows = scenario_tqd(&sweep, 0..=config.tqd_max_n)?;
    let name = csv_name(ScenarioKind::Tqd);
    write_csv(&out.join(&name), &output::tqd_rows(&rows, sweep.duration))?;
    Ok(vec![name.into()])
}

fn run_budget(config: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, SimError> {
    let setup = config.setup()?;
    let rows = config
        .budget_kappas
        .par_iter()
        .map(|&k| scenario_mapping_budget(&[k], config.budget_phonons, &setup).map(|mut r| r.remove(0)))
        .collect::<Result<Vec<_>, _>>()?;
    let name = csv_name(ScenarioKind::Budget);
    write_csv(&out.join(&name), &output::budget_rows(&rows))?;
    let detail = "budget_detail.csv";
    write_csv(&out.join(detail), &output::budget_detail_rows(&rows))?;
    Ok(vec![name.into(), detail.into()])
}
