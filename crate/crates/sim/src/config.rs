//! Run configuration: TOML file, command-line overrides, defaults.
//!
//! Every dimensioned value carries a unit suffix (see [`crate::units`]).
//! Unknown keys are rejected. Resolution order is flag, then file, then
//! default.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use phonon_core::dynamics::{hopping_rate, DecoherenceParams, HoppingParams, PhysicalIonParams};
use phonon_core::protocol::{Addressing, ProtocolConfig, Scheme, Timing};
use phonon_core::pulses::{RabiParams, SweepSpec};
use phonon_core::scenarios::Setup;
use serde::{Deserialize, Serialize};

use crate::units::{parse_quantity, Dimension};
use crate::SimError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Fig2,
    Fig3,
    Tqd,
    Budget,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Fig2 => "fig2",
            ScenarioKind::Fig3 => "fig3",
            ScenarioKind::Tqd => "tqd",
            ScenarioKind::Budget => "budget",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "fig2" => Ok(ScenarioKind::Fig2),
            "fig3" => Ok(ScenarioKind::Fig3),
            "tqd" => Ok(ScenarioKind::Tqd),
            "budget" => Ok(ScenarioKind::Budget),
            other => Err(format!("unknown scenario `{other}`; expected fig2, fig3, tqd or budget")),
        }
    }
}

/// The file as written, before defaults.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub scenario: Option<String>,
    pub shots: Option<i64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub trap: TrapSection,
    #[serde(default)]
    pub protocol: ProtocolSection,
    #[serde(default)]
    pub decoherence: DecoherenceSection,
    #[serde(default)]
    pub fig2: Fig2Section,
    #[serde(default)]
    pub fig3: Fig3Section,
    #[serde(default)]
    pub tqd: TqdSection,
    #[serde(default)]
    pub budget: BudgetSection,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapSection {
    pub spacing: Option<String>,
    pub omega_y: Option<String>,
    /// Overrides the rate derived from `spacing` and `omega_y`.
    pub kappa: Option<String>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    pub scheme: Option<String>,
    pub max_n: Option<usize>,
    pub timing: Option<String>,
    pub addressing: Option<String>,
    pub carrier_rabi: Option<String>,
    pub lamb_dicke: Option<f64>,
    pub shelve_duration: Option<String>,
    pub n_max: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoherenceSection {
    pub gamma: Option<String>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fig2Section {
    pub phonons: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fig3Section {
    /// Explicit grid; excludes `start`/`stop`/`points`.
    pub times: Option<Vec<String>>,
    pub start: Option<String>,
    pub stop: Option<String>,
    pub points: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TqdSection {
    pub duration: Option<String>,
    pub peak_rabi: Option<String>,
    pub detuning_span: Option<String>,
    pub counterdiabatic: Option<bool>,
    pub max_n: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSection {
    pub kappas: Option<Vec<String>>,
    pub phonons: Option<[usize; 2]>,
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub scenario: Option<ScenarioKind>,
    pub shots: Option<i64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// Fully resolved configuration; every physical value in SI.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub scenario: Option<ScenarioKind>,
    pub shots: u64,
    pub seed: u64,
    pub out: PathBuf,
    /// Ion spacing (m).
    pub spacing: f64,
    /// Radial trap frequency (rad/s).
    pub omega_y: f64,
    /// Hopping rate (rad/s).
    pub kappa: f64,
    /// `"derived"` or `"direct"`.
    pub kappa_source: &'static str,
    pub scheme: String,
    pub max_n: usize,
    pub timing: String,
    pub addressing: String,
    /// Carrier Rabi frequency (rad/s).
    pub carrier_rabi: f64,
    pub lamb_dicke: f64,
    /// Shelving pulse length (s).
    pub shelve_duration: f64,
    pub n_max: usize,
    /// Dephasing rate (1/s).
    pub gamma: f64,
    pub fig2_phonons: Vec<usize>,
    /// Hopping times (s).
    pub fig3_times: Vec<f64>,
    /// Sweep length (s).
    pub tqd_duration: f64,
    /// Peak sideband Rabi frequency (rad/s).
    pub tqd_peak_rabi: f64,
    /// Detuning excursion (rad/s).
    pub tqd_detuning_span: f64,
    pub tqd_counterdiabatic: bool,
    pub tqd_max_n: usize,
    /// Hopping rates (rad/s).
    pub budget_kappas: Vec<f64>,
    pub budget_phonons: [usize; 2],
}

pub const DEFAULT_SHOTS: u64 = 500;
pub const DEFAULT_SEED: u64 = 1;
const DEFAULT_SPACING: &str = "21 µm";
const DEFAULT_OMEGA_Y: &str = "3.0 MHz";
const DEFAULT_FIG3_STOP: &str = "300 µs";
const DEFAULT_FIG3_POINTS: usize = 21;
const DEFAULT_BUDGET_KAPPAS: [&str; 5] = ["0 kHz", "1 kHz", "2 kHz", "3 kHz", "4 kHz"];

fn err(key: &str, reason: impl fmt::Display) -> SimError {
    SimError::Config(format!("{key}: {reason}"))
}

fn quantity(key: &str, value: Option<&str>, default: &str, dim: Dimension) -> Result<f64, SimError> {
    parse_quantity(value.unwrap_or(default), dim).map_err(|e| err(key, e))
}

fn positive(key: &str, v: f64) -> Result<f64, SimError> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(err(key, format!("must be positive, got {v}")))
    }
}

fn non_negative(key: &str, v: f64) -> Result<f64, SimError> {
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(err(key, format!("must be non-negative, got {v}")))
    }
}

pub fn load_file(path: &Path) -> Result<FileConfig, SimError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| SimError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_file(&text)
}

pub fn parse_file(text: &str) -> Result<FileConfig, SimError> {
    toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))
}

impl RunConfig {
    pub fn resolve(file: &FileConfig, flags: &Overrides) -> Result<Self, SimError> {
        let scenario = match (flags.scenario, &file.scenario) {
            (Some(s), _) => Some(s),
            (None, Some(s)) => Some(s.parse().map_err(|e| err("scenario", e))?),
            (None, None) => None,
        };
        let shots = flags.shots.or(file.shots).unwrap_or(DEFAULT_SHOTS as i64);
        if shots < 1 {
            return Err(err("shots", format!("must be at least 1, got {shots}")));
        }

        let trap = &file.trap;
        let spacing = positive("trap.spacing", quantity("trap.spacing", trap.spacing.as_deref(), DEFAULT_SPACING, Dimension::Length)?)?;
        let omega_y = positive("trap.omega_y", quantity("trap.omega_y", trap.omega_y.as_deref(), DEFAULT_OMEGA_Y, Dimension::Frequency)?)?;
        let (kappa, kappa_source) = match &trap.kappa {
            Some(k) => (non_negative("trap.kappa", quantity("trap.kappa", Some(k), "", Dimension::Frequency)?)?, "direct"),
            None => (
                hopping_rate(&PhysicalIonParams::calcium40(spacing, omega_y)).map_err(|e| err("trap", e))?,
                "derived",
            ),
        };

        let p = &file.protocol;
        let scheme = p.scheme.clone().unwrap_or_else(|| "simplified".into());
        let max_n = match scheme.as_str() {
            "simplified" => {
                if p.max_n.is_some_and(|n| n != 2) {
                    return Err(err("protocol.max_n", "the simplified scheme resolves exactly n ≤ 2"));
                }
                2
            }
            "general" => match p.max_n.unwrap_or(2) {
                0 => return Err(err("protocol.max_n", "must be at least 1")),
                n if n > 200 => return Err(err("protocol.max_n", "at most 200 auxiliary levels")),
                n => n,
            },
            other => return Err(err("protocol.scheme", format!("unknown scheme `{other}`; expected simplified or general"))),
        };
        let timing = p.timing.clone().unwrap_or_else(|| "ideal".into());
        if !matches!(timing.as_str(), "ideal" | "hopping-aware") {
            return Err(err("protocol.timing", format!("unknown timing `{timing}`; expected ideal or hopping-aware")));
        }
        let addressing = p.addressing.clone().unwrap_or_else(|| "simultaneous".into());
        if !matches!(addressing.as_str(), "sequential" | "simultaneous") {
            return Err(err(
                "protocol.addressing",
                format!("unknown addressing `{addressing}`; expected sequential or simultaneous"),
            ));
        }
        let defaults = RabiParams::experiment();
        let carrier_rabi = match &p.carrier_rabi {
            Some(v) => positive("protocol.carrier_rabi", quantity("protocol.carrier_rabi", Some(v), "", Dimension::Frequency)?)?,
            None => defaults.carrier_rabi,
        };
        let lamb_dicke = p.lamb_dicke.unwrap_or(defaults.lamb_dicke);
        if !(lamb_dicke > 0.0 && lamb_dicke < 1.0) {
            return Err(err("protocol.lamb_dicke", format!("must lie in (0, 1), got {lamb_dicke}")));
        }
        let shelve_duration = match &p.shelve_duration {
            Some(v) => non_negative("protocol.shelve_duration", quantity("protocol.shelve_duration", Some(v), "", Dimension::Time)?)?,
            None => std::f64::consts::PI / carrier_rabi,
        };
        let n_max = p.n_max.unwrap_or(max_n + 1);
        if n_max < max_n {
            return Err(err("protocol.n_max", format!("must be at least {max_n} for this scheme")));
        }

        let gamma = match &file.decoherence.gamma {
            Some(v) => non_negative("decoherence.gamma", quantity("decoherence.gamma", Some(v), "", Dimension::Rate)?)?,
            None => 0.0,
        };

        let fig2_phonons = file.fig2.phonons.clone().unwrap_or_else(|| vec![0, 1, 2]);
        if let Some(n) = fig2_phonons.iter().find(|&&n| n > max_n) {
            return Err(err("fig2.phonons", format!("{n} exceeds the largest resolvable number {max_n}")));
        }

        let f3 = &file.fig3;
        let fig3_times = match &f3.times {
            Some(list) => {
                if f3.start.is_some() || f3.stop.is_some() || f3.points.is_some() {
                    return Err(err("fig3.times", "give either an explicit list or start/stop/points"));
                }
                list.iter()
                    .map(|t| quantity("fig3.times", Some(t), "", Dimension::Time))
                    .collect::<Result<Vec<_>, _>>()?
            }
            None => {
                let start = quantity("fig3.start", f3.start.as_deref(), "0 µs", Dimension::Time)?;
                let stop = quantity("fig3.stop", f3.stop.as_deref(), DEFAULT_FIG3_STOP, Dimension::Time)?;
                let points = f3.points.unwrap_or(DEFAULT_FIG3_POINTS);
                if points == 0 {
                    return Err(err("fig3.points", "must be at least 1"));
                }
                if stop < start {
                    return Err(err("fig3.stop", "must not precede fig3.start"));
                }
                let last = (points - 1).max(1) as f64;
                (0..points).map(|k| start + (stop - start) * k as f64 / last).collect()
            }
        };
        phonon_core::scenarios::check_time_grid(&fig3_times).map_err(|e| err("fig3.times", e))?;

        let t = &file.tqd;
        let sweep = SweepSpec::transitionless();
        let tqd_duration = match &t.duration {
            Some(v) => non_negative("tqd.duration", quantity("tqd.duration", Some(v), "", Dimension::Time)?)?,
            None => sweep.duration,
        };
        let tqd_peak_rabi = match &t.peak_rabi {
            Some(v) => non_negative("tqd.peak_rabi", quantity("tqd.peak_rabi", Some(v), "", Dimension::Frequency)?)?,
            None => sweep.peak_rabi,
        };
        let tqd_detuning_span = match &t.detuning_span {
            Some(v) => positive("tqd.detuning_span", quantity("tqd.detuning_span", Some(v), "", Dimension::Frequency)?)?,
            None => sweep.detuning_span,
        };

        let budget_kappas = match &file.budget.kappas {
            Some(list) => list
                .iter()
                .map(|k| non_negative("budget.kappas", quantity("budget.kappas", Some(k), "", Dimension::Frequency)?))
                .collect::<Result<Vec<_>, _>>()?,
            None => DEFAULT_BUDGET_KAPPAS
                .iter()
                .map(|k| parse_quantity(k, Dimension::Frequency).expect("valid default"))
                .collect(),
        };
        let budget_phonons = file.budget.phonons.unwrap_or([1, 1]);
        if budget_phonons.iter().any(|&n| n > n_max) {
            return Err(err("budget.phonons", format!("exceed protocol.n_max = {n_max}")));
        }

        Ok(RunConfig {
            scenario,
            shots: shots as u64,
            seed: flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            out: flags.out.clone().or_else(|| file.out.clone()).unwrap_or_else(|| PathBuf::from("out")),
            spacing,
            omega_y,
            kappa,
            kappa_source,
            scheme,
            max_n,
            timing,
            addressing,
            carrier_rabi,
            lamb_dicke,
            shelve_duration,
            n_max,
            gamma,
            fig2_phonons,
            fig3_times,
            tqd_duration,
            tqd_peak_rabi,
            tqd_detuning_span,
            tqd_counterdiabatic: t.counterdiabatic.unwrap_or(true),
            tqd_max_n: t.max_n.unwrap_or(7),
            budget_kappas,
            budget_phonons,
        })
    }

    pub fn protocol(&self) -> Result<ProtocolConfig, SimError> {
        let scheme = match self.scheme.as_str() {
            "general" => Scheme::General { max_n: self.max_n },
            _ => Scheme::Simplified,
        };
        let mut rabi = RabiParams::new(self.carrier_rabi, self.lamb_dicke).map_err(|e| err("protocol", e))?;
        rabi.shelve_duration = self.shelve_duration;
        let mut config = ProtocolConfig::new(scheme);
        config.rabi = rabi;
        config.timing = if self.timing == "hopping-aware" { Timing::HoppingAware } else { Timing::Ideal };
        config.addressing =
            if self.addressing == "simultaneous" { Addressing::Simultaneous } else { Addressing::Sequential };
        Ok(config)
    }

    pub fn setup(&self) -> Result<Setup, SimError> {
        let hop = HoppingParams::new(self.kappa, self.omega_y).map_err(|e| err("trap", e))?;
        let mut setup = Setup::new(self.protocol()?, hop);
        setup.decoherence = DecoherenceParams::new(self.gamma).map_err(|e| err("decoherence.gamma", e))?;
        setup.n_max = self.n_max;
        Ok(setup)
    }

    pub fn sweep(&self) -> SweepSpec {
        SweepSpec {
            peak_rabi: self.tqd_peak_rabi,
            detuning_span: self.tqd_detuning_span,
            duration: self.tqd_duration,
            counterdiabatic: self.tqd_counterdiabatic,
            ..SweepSpec::transitionless()
        }
    }
}
