//! Result tables.
//!
//! Every scenario writes one CSV with the columns
//! `time_s,outcome,probability,sigma,counts,shots`. Values that are
//! computed exactly rather than sampled leave `sigma`, `counts` and
//! `shots` empty. Some scenarios add a companion file with extra columns.

use std::fs::File;
use std::path::Path;

use phonon_core::protocol::Histogram;
use phonon_core::scenarios::{BudgetRow, Fig3Point, Sampled, TqdRow, HOM_OUTCOMES};
use serde::Serialize;

use crate::SimError;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub time_s: f64,
    pub outcome: String,
    pub probability: f64,
    pub sigma: Option<f64>,
    pub counts: Option<u64>,
    pub shots: Option<u64>,
}

impl Row {
    fn sampled(time_s: f64, outcome: String, hist: &Histogram, key: Option<&[usize]>) -> Self {
        let counts = match key {
            Some(k) => hist.count(k),
            None => hist.invalid,
        };
        let probability = counts as f64 / hist.shots as f64;
        Row {
            time_s,
            outcome,
            probability,
            sigma: Some(phonon_core::protocol::binomial_sigma(probability, hist.shots)),
            counts: Some(counts),
            shots: Some(hist.shots),
        }
    }

    fn exact(time_s: f64, outcome: String, probability: f64) -> Self {
        Row { time_s, outcome, probability, sigma: None, counts: None, shots: None }
    }
}

/// `prepared->detected` rows for each prepared number, plus an `invalid`
/// row when the scheme can produce one.
pub fn fig2_rows(results: &[(usize, Sampled)], max_n: usize, with_invalid: bool) -> Vec<Row> {
    let mut rows = Vec::new();
    for (n, sampled) in results {
        for m in 0..=max_n {
            rows.push(Row::sampled(0.0, format!("{n}->{m}"), &sampled.histogram, Some(&[m])));
        }
        if with_invalid {
            rows.push(Row::sampled(0.0, format!("{n}->invalid"), &sampled.histogram, None));
        }
    }
    rows
}

fn hom_label(o: &[usize; 2]) -> String {
    format!("{}{}", o[0], o[1])
}

/// Three rows per time point: outcomes `11`, `20`, `02`.
pub fn fig3_rows(points: &[Fig3Point]) -> Vec<Row> {
    points
        .iter()
        .flat_map(|p| {
            HOM_OUTCOMES
                .iter()
                .map(move |o| Row::sampled(p.time, hom_label(o), &p.sampled.histogram, Some(o)))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Fig3ExactRow {
    pub time_s: f64,
    pub outcome: String,
    /// Infinite-shot probability of the simulated run.
    pub exact: f64,
    /// Ideal hopping curve.
    pub analytic: f64,
}

pub fn fig3_exact_rows(points: &[Fig3Point]) -> Vec<Fig3ExactRow> {
    points
        .iter()
        .flat_map(|p| {
            let direct = p.direct();
            HOM_OUTCOMES.iter().enumerate().map(move |(i, o)| Fig3ExactRow {
                time_s: p.time,
                outcome: hom_label(o),
                exact: direct[i],
                analytic: p.analytic[i],
            })
        })
        .collect()
}

/// One row per phonon number, `probability` holding the transfer fidelity.
pub fn tqd_rows(rows: &[TqdRow], duration: f64) -> Vec<Row> {
    rows.iter().map(|r| Row::exact(duration, format!("n={}", r.n), r.fidelity)).collect()
}

fn kappa_label(kappa: f64) -> String {
    format!("kappa={:.3}kHz", kappa / (2.0 * std::f64::consts::PI * 1e3))
}

/// Three rows per hopping rate: `end_to_end`, `offset_corrected`, `state`.
pub fn budget_rows(rows: &[BudgetRow]) -> Vec<Row> {
    rows.iter()
        .flat_map(|r| {
            let k = kappa_label(r.kappa);
            [
                Row::exact(r.duration, format!("{k}:end_to_end"), r.infidelity),
                Row::exact(r.duration, format!("{k}:offset_corrected"), r.offset_infidelity),
                Row::exact(r.duration, format!("{k}:state"), r.state_infidelity),
            ]
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BudgetDetailRow {
    pub kappa_hz: f64,
    pub duration_s: f64,
    pub infidelity: f64,
    pub offset_infidelity: f64,
    pub effective_time_s: f64,
    pub state_infidelity: f64,
}

pub fn budget_detail_rows(rows: &[BudgetRow]) -> Vec<BudgetDetailRow> {
    rows.iter()
        .map(|r| BudgetDetailRow {
            kappa_hz: r.kappa / (2.0 * std::f64::consts::PI),
            duration_s: r.duration,
            infidelity: r.infidelity,
            offset_infidelity: r.offset_infidelity,
            effective_time_s: r.effective_time,
            state_infidelity: r.state_infidelity,
        })
        .collect()
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), SimError> {
    let io = |source: std::io::Error| SimError::Io { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_writer(File::create(path).map_err(io)?);
    for row in rows {
        w.serialize(row).map_err(|e| io(e.into()))?;
    }
    w.flush().map_err(io)
}

pub fn to_csv_string<T: Serialize>(rows: &[T]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}
