//! Monte-Carlo sweeps of the minimum transmit power, config files and
//! result persistence.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use log::{debug, info};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::channel::{build_scenario_channels, ScenarioConfig};
use crate::metrics::{QosRequirements, TargetModel};
use crate::optimizer::{ao_solve, SolveOptions, SolveReport, SolveStatus};
use crate::pareto::{FrontMethod, Metric, DEFAULT_BUDGET_DBM};
use crate::protocol::{ProtocolConfig, ProtocolVariant, DEFAULT_ETA, DEFAULT_P_CIRCUIT_W, DEFAULT_P_ELEMENT_W};
use crate::{watts_to_dbm, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Rho,
    NRis,
    NTx,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Rho => "rho",
            SweepAxis::NRis => "n_ris",
            SweepAxis::NTx => "n_tx",
        }
    }
}

/// Parameters held constant along the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FixedParams {
    pub rho: f64,
    /// Overrides `scenario.n_ris` when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_ris: Option<usize>,
    /// Overrides `scenario.n_tx` when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_tx: Option<usize>,
    pub p_circuit_w: f64,
    pub p_element_w: f64,
    pub eta: f64,
}

impl Default for FixedParams {
    fn default() -> Self {
        FixedParams {
            rho: 0.5,
            n_ris: None,
            n_tx: None,
            p_circuit_w: DEFAULT_P_CIRCUIT_W,
            p_element_w: DEFAULT_P_ELEMENT_W,
            eta: DEFAULT_ETA,
        }
    }
}

impl FixedParams {
    fn protocol(&self, variant: ProtocolVariant, rho: f64, n_ris: usize) -> Result<ProtocolConfig> {
        let p = ProtocolConfig {
            variant,
            rho,
            n_ris,
            p_circuit: self.p_circuit_w,
            p_element: self.p_element_w,
            eta: self.eta,
        };
        p.validate().map_err(|e| prefix("fixed", e))?;
        Ok(p)
    }

    fn apply(&self, scenario: &ScenarioConfig) -> ScenarioConfig {
        let mut s = scenario.clone();
        if let Some(n) = self.n_ris {
            s.n_ris = n;
        }
        if let Some(n) = self.n_tx {
            s.n_tx = n;
        }
        s
    }
}

fn prefix(section: &str, e: Error) -> Error {
    match e {
        Error::InvalidField { field, reason } => Error::field(format!("{section}.{field}"), reason),
        other => other,
    }
}

fn all_variants() -> Vec<ProtocolVariant> {
    ProtocolVariant::ALL.to_vec()
}

fn default_trials() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub scenario: ScenarioConfig,
    #[serde(default = "all_variants")]
    pub protocol_variants: Vec<ProtocolVariant>,
    pub sweep_axis: SweepAxis,
    pub grid: Vec<f64>,
    #[serde(default)]
    pub fixed: FixedParams,
    #[serde(default = "default_trials")]
    pub n_trials: usize,
    #[serde(default)]
    pub qos: QosRequirements,
    #[serde(default)]
    pub solver: SolveOptions,
}

impl SweepConfig {
    pub fn new(sweep_axis: SweepAxis, grid: Vec<f64>) -> Self {
        SweepConfig {
            scenario: ScenarioConfig::default(),
            protocol_variants: all_variants(),
            sweep_axis,
            grid,
            fixed: FixedParams::default(),
            n_trials: default_trials(),
            qos: QosRequirements::default(),
            solver: SolveOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::field("grid", "grid is empty"));
        }
        for (i, w) in self.grid.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(Error::field("grid", format!("grid not increasing at index {}", i + 1)));
            }
        }
        match self.sweep_axis {
            SweepAxis::Rho => {
                if let Some(v) = self.grid.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
                    return Err(Error::field("grid", format!("rho value {v} is outside (0, 1)")));
                }
            }
            SweepAxis::NRis | SweepAxis::NTx => {
                if let Some(v) = self.grid.iter().find(|v| !(**v >= 1.0 && v.fract() == 0.0)) {
                    return Err(Error::field("grid", format!("{v} is not a positive integer")));
                }
            }
        }
        if self.n_trials == 0 {
            return Err(Error::field("n_trials", "must be at least 1"));
        }
        if self.protocol_variants.is_empty() {
            return Err(Error::field("protocol_variants", "must list at least one protocol"));
        }
        for (i, v) in self.protocol_variants.iter().enumerate() {
            if self.protocol_variants[..i].contains(v) {
                return Err(Error::field("protocol_variants", format!("{v} listed twice")));
            }
        }
        let conflict = match self.sweep_axis {
            SweepAxis::NRis => self.fixed.n_ris.is_some(),
            SweepAxis::NTx => self.fixed.n_tx.is_some(),
            SweepAxis::Rho => false,
        };
        if conflict {
            return Err(Error::field(
                format!("fixed.{}", self.sweep_axis.name()),
                "is also the sweep axis",
            ));
        }
        self.fixed.apply(&self.scenario).validate().map_err(|e| prefix("scenario", e))?;
        self.fixed.protocol(ProtocolVariant::PowerSplitting, self.fixed.rho, 1)?;
        self.qos.validate()?;
        self.solver.validate()?;
        Ok(())
    }

    /// Overrides the scenario and solver seeds.
    pub fn set_seed(&mut self, seed: u64) {
        self.scenario.seed = seed;
        self.solver.seed = seed;
    }

    /// Scenario, protocol and solver options of one trial.
    pub fn trial_setup(
        &self,
        variant: ProtocolVariant,
        axis_value: f64,
        trial: usize,
    ) -> Result<(ScenarioConfig, ProtocolConfig, SolveOptions)> {
        let mut scenario = self.fixed.apply(&self.scenario);
        let mut rho = self.fixed.rho;
        match self.sweep_axis {
            SweepAxis::Rho => rho = axis_value,
            SweepAxis::NRis => scenario.n_ris = axis_value as usize,
            SweepAxis::NTx => scenario.n_tx = axis_value as usize,
        }
        scenario.seed = self.scenario.seed.wrapping_add(trial as u64);
        let solver = SolveOptions {
            seed: self.solver.seed.wrapping_add(trial as u64),
            ..self.solver
        };
        let protocol = self.fixed.protocol(variant, rho, scenario.n_ris)?;
        Ok((scenario, protocol, solver))
    }
}

/// Reads and validates a JSON file; parse errors carry the offending line.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_json(&text, path)
}

fn parse_json<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    serde_json::from_str(text).map_err(|source| {
        let line = source.line();
        let snippet = text.lines().nth(line.saturating_sub(1)).unwrap_or("").trim_end().to_string();
        Error::Parse {
            path: path.to_path_buf(),
            line,
            snippet,
            source,
        }
    })
}

pub fn load_config(path: &Path) -> Result<SweepConfig> {
    let cfg: SweepConfig = read_json(path)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Outcome of one (protocol, axis value, trial) solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub protocol: ProtocolVariant,
    pub axis_value: f64,
    pub trial: usize,
    pub seed: u64,
    /// `None` when the solve failed outright.
    pub status: Option<SolveStatus>,
    pub power_w: f64,
    pub ao_iterations: usize,
    pub min_slack: f64,
}

impl TrialRecord {
    pub fn converged(&self) -> bool {
        self.status == Some(SolveStatus::Converged)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub protocol: ProtocolVariant,
    pub axis: SweepAxis,
    pub axis_value: f64,
    /// dBm of the mean transmit power (in Watts) over converged trials.
    pub mean_power_dbm: f64,
    /// Sample standard deviation of the per-trial power in dBm.
    pub std_power_db: f64,
    /// Fraction of trials that did not converge.
    pub infeasible_rate: f64,
    pub n_trials: usize,
    pub mean_ao_iters: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Per-trial outcomes keyed like the rows, trials in index order.
    pub trials: Vec<TrialRecord>,
}

impl SweepResult {
    pub fn row(&self, protocol: ProtocolVariant, axis_value: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.protocol == protocol && r.axis_value == axis_value)
    }

    /// Rows of one protocol, sorted by axis value.
    pub fn series(&self, protocol: ProtocolVariant) -> Vec<&SweepRow> {
        let mut rows: Vec<&SweepRow> = self.rows.iter().filter(|r| r.protocol == protocol).collect();
        rows.sort_by(|a, b| a.axis_value.total_cmp(&b.axis_value));
        rows
    }
}

/// Solves one trial of a sweep.
pub fn run_trial(cfg: &SweepConfig, variant: ProtocolVariant, axis_value: f64, trial: usize) -> Result<SolveReport> {
    let (scenario, protocol, solver) = cfg.trial_setup(variant, axis_value, trial)?;
    let ch = build_scenario_channels(&scenario)?;
    let target = TargetModel::from_scenario(&scenario)?;
    ao_solve(&ch, &protocol, &cfg.qos, &target, &solver)
}

/// Runs every (protocol, axis value, trial) on the current rayon pool.
///
/// Each trial's channels and initialisation depend only on the base seeds
/// and its trial index, and aggregation happens after all trials finish in
/// a fixed order, so the result does not depend on scheduling.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let mut tasks = Vec::new();
    for &variant in &cfg.protocol_variants {
        for &v in &cfg.grid {
            for t in 0..cfg.n_trials {
                tasks.push((variant, v, t));
            }
        }
    }
    info!(
        "sweep over {} with {} points x {} protocols x {} trials",
        cfg.sweep_axis.name(),
        cfg.grid.len(),
        cfg.protocol_variants.len(),
        cfg.n_trials
    );
    let trials: Vec<TrialRecord> = tasks
        .par_iter()
        .map(|&(variant, v, t)| {
            let (scenario, _, _) = cfg.trial_setup(variant, v, t)?;
            let record = match run_trial(cfg, variant, v, t) {
                Ok(r) => TrialRecord {
                    protocol: variant,
                    axis_value: v,
                    trial: t,
                    seed: scenario.seed,
                    status: Some(r.status),
                    power_w: r.solution.objective_w,
                    ao_iterations: r.ao_iterations,
                    min_slack: r.constraint_slacks.min(),
                },
                Err(e) => {
                    debug!("{variant} {}={v} trial {t} failed: {e}", cfg.sweep_axis.name());
                    TrialRecord {
                        protocol: variant,
                        axis_value: v,
                        trial: t,
                        seed: scenario.seed,
                        status: None,
                        power_w: f64::NAN,
                        ao_iterations: 0,
                        min_slack: f64::NAN,
                    }
                }
            };
            debug!(
                "{variant} {}={v} trial {t}: {:?} {:.3} dBm",
                cfg.sweep_axis.name(),
                record.status,
                watts_to_dbm(record.power_w)
            );
            Ok(record)
        })
        .collect::<Result<_>>()?;
    let rows = aggregate(cfg.sweep_axis, &trials);
    Ok(SweepResult { rows, trials })
}

/// Per-(protocol, axis value) statistics over converged trials, in first-seen order.
pub fn aggregate(axis: SweepAxis, trials: &[TrialRecord]) -> Vec<SweepRow> {
    let mut order = Vec::new();
    let mut groups: BTreeMap<(usize, u64), Vec<&TrialRecord>> = BTreeMap::new();
    for t in trials {
        let key = (t.protocol as usize, t.axis_value.to_bits());
        let slot = groups.entry(key).or_default();
        if slot.is_empty() {
            order.push(key);
        }
        slot.push(t);
    }
    order
        .iter()
        .map(|key| {
            let group = &groups[key];
            let ok: Vec<&&TrialRecord> = group.iter().filter(|t| t.converged()).collect();
            let n_ok = ok.len() as f64;
            let (mean_power_dbm, std_power_db, mean_ao_iters) = if ok.is_empty() {
                (f64::NAN, f64::NAN, f64::NAN)
            } else {
                let mean_w = ok.iter().map(|t| t.power_w).sum::<f64>() / n_ok;
                let dbm: Vec<f64> = ok.iter().map(|t| watts_to_dbm(t.power_w)).collect();
                let mean_dbm = dbm.iter().sum::<f64>() / n_ok;
                let std = if ok.len() > 1 {
                    (dbm.iter().map(|d| (d - mean_dbm).powi(2)).sum::<f64>() / (n_ok - 1.0)).sqrt()
                } else {
                    0.0
                };
                let iters = ok.iter().map(|t| t.ao_iterations as f64).sum::<f64>() / n_ok;
                (watts_to_dbm(mean_w), std, iters)
            };
            SweepRow {
                protocol: group[0].protocol,
                axis,
                axis_value: group[0].axis_value,
                mean_power_dbm,
                std_power_db,
                infeasible_rate: 1.0 - n_ok / group.len() as f64,
                n_trials: group.len(),
                mean_ao_iters,
            }
        })
        .collect()
}

pub const RESULTS_HEADER: [&str; 8] = [
    "protocol",
    "axis",
    "axis_value",
    "mean_power_dbm",
    "std_power_db",
    "infeasible_rate",
    "n_trials",
    "mean_ao_iters",
];

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_results(res: &SweepResult, path: &Path) -> Result<()> {
    let err = csv_error(path);
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(&err)?;
    w.write_record(RESULTS_HEADER).map_err(&err)?;
    for r in &res.rows {
        w.write_record([
            r.protocol.short_name().to_string(),
            r.axis.name().to_string(),
            r.axis_value.to_string(),
            r.mean_power_dbm.to_string(),
            r.std_power_db.to_string(),
            r.infeasible_rate.to_string(),
            r.n_trials.to_string(),
            r.mean_ao_iters.to_string(),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_results(path: &Path) -> Result<Vec<SweepRow>> {
    let err = csv_error(path);
    let mut r = csv::Reader::from_path(path).map_err(&err)?;
    let header = r.headers().map_err(&err)?.clone();
    if header.iter().ne(RESULTS_HEADER) {
        return Err(Error::invalid(format!("{}: unexpected header", path.display())));
    }
    let bad = |what: &str, v: &str| Error::invalid(format!("{}: bad {what} `{v}`", path.display()));
    let num = |v: &str, what: &str| v.parse::<f64>().map_err(|_| bad(what, v));
    r.records()
        .map(|rec| {
            let rec = rec.map_err(&err)?;
            let axis = match &rec[1] {
                "rho" => SweepAxis::Rho,
                "n_ris" => SweepAxis::NRis,
                "n_tx" => SweepAxis::NTx,
                other => return Err(bad("axis", other)),
            };
            Ok(SweepRow {
                protocol: rec[0].parse()?,
                axis,
                axis_value: num(&rec[2], "axis_value")?,
                mean_power_dbm: num(&rec[3], "mean_power_dbm")?,
                std_power_db: num(&rec[4], "std_power_db")?,
                infeasible_rate: num(&rec[5], "infeasible_rate")?,
                n_trials: rec[6].parse().map_err(|_| bad("n_trials", &rec[6]))?,
                mean_ao_iters: num(&rec[7], "mean_ao_iters")?,
            })
        })
        .collect()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(text.as_bytes()).map_err(io)
}

/// Writes `series_<protocol>.dat` files (`axis_value mean_power_dbm`, sorted)
/// into `dir` and returns their paths.
pub fn emit_plot_data(res: &SweepResult, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut protocols: Vec<ProtocolVariant> = Vec::new();
    for r in &res.rows {
        if !protocols.contains(&r.protocol) {
            protocols.push(r.protocol);
        }
    }
    let mut paths = Vec::new();
    for p in protocols {
        let rows = res.series(p);
        let mut text = format!("# {} mean_power_dbm\n", rows[0].axis.name());
        for r in rows {
            text.push_str(&format!("{} {}\n", r.axis_value, r.mean_power_dbm));
        }
        let path = dir.join(format!("series_{}.dat", p.short_name()));
        write_text(&path, &text)?;
        paths.push(path);
    }
    Ok(paths)
}

/// One JSON object per trial.
pub fn write_trial_dump(res: &SweepResult, path: &Path) -> Result<()> {
    let mut text = String::new();
    for t in &res.trials {
        text.push_str(&serde_json::to_string(t).map_err(|e| Error::invalid(e.to_string()))?);
        text.push('\n');
    }
    write_text(path, &text)
}

pub fn read_trial_dump(path: &Path) -> Result<Vec<TrialRecord>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    text.lines().filter(|l| !l.trim().is_empty()).map(|l| parse_json(l, path)).collect()
}

/// A single channel realisation and protocol, for `solve`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InstanceConfig {
    pub scenario: ScenarioConfig,
    pub protocol: ProtocolVariant,
    pub fixed: FixedParams,
    pub qos: QosRequirements,
    pub solver: SolveOptions,
}

impl Default for InstanceConfig {
    fn default() -> Self {
        InstanceConfig {
            scenario: ScenarioConfig::default(),
            protocol: ProtocolVariant::PowerSplitting,
            fixed: FixedParams::default(),
            qos: QosRequirements::default(),
            solver: SolveOptions::default(),
        }
    }
}

impl InstanceConfig {
    pub fn validate(&self) -> Result<()> {
        self.scenario().validate().map_err(|e| prefix("scenario", e))?;
        self.protocol_config()?;
        self.qos.validate()?;
        self.solver.validate()
    }

    pub fn scenario(&self) -> ScenarioConfig {
        self.fixed.apply(&self.scenario)
    }

    pub fn protocol_config(&self) -> Result<ProtocolConfig> {
        self.fixed.protocol(self.protocol, self.fixed.rho, self.scenario().n_ris)
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.scenario.seed = seed;
        self.solver.seed = seed;
    }
}

pub fn load_instance(path: &Path) -> Result<InstanceConfig> {
    let cfg: InstanceConfig = read_json(path)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Tradeoff front on one channel realisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParetoConfig {
    pub scenario: ScenarioConfig,
    pub protocol: ProtocolVariant,
    pub fixed: FixedParams,
    pub solver: SolveOptions,
    pub budget_dbm: f64,
    pub method: FrontMethod,
    pub grid: Vec<[f64; 3]>,
}

impl Default for ParetoConfig {
    fn default() -> Self {
        ParetoConfig {
            scenario: ScenarioConfig {
                n_tx: 4,
                n_ris: 20,
                ..Default::default()
            },
            protocol: ProtocolVariant::PowerSplitting,
            fixed: FixedParams::default(),
            solver: SolveOptions::default(),
            budget_dbm: DEFAULT_BUDGET_DBM,
            method: FrontMethod::EpsilonConstraint { objective: Metric::Comm },
            grid: (0..6).map(|i| [0.0, 0.5 * i as f64, 0.0]).collect(),
        }
    }
}

impl ParetoConfig {
    /// The channel/protocol part, with QoS unused.
    pub fn instance(&self) -> InstanceConfig {
        InstanceConfig {
            scenario: self.scenario.clone(),
            protocol: self.protocol,
            fixed: self.fixed,
            qos: QosRequirements::NONE,
            solver: self.solver,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.instance().validate()?;
        if !self.budget_dbm.is_finite() {
            return Err(Error::field("budget_dbm", "must be finite"));
        }
        if self.grid.is_empty() {
            return Err(Error::field("grid", "grid is empty"));
        }
        if self.grid.iter().flatten().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::field("grid", "entries must be finite and nonnegative"));
        }
        Ok(())
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.scenario.seed = seed;
        self.solver.seed = seed;
    }
}

pub fn load_pareto_config(path: &Path) -> Result<ParetoConfig> {
    let cfg: ParetoConfig = read_json(path)?;
    cfg.validate()?;
    Ok(cfg)
}
