//! wasm-bindgen entry points for the static demo page in `www/`.
//!
//! Every export returns plain strings or number arrays so the page needs no
//! glue beyond what `wasm-bindgen --target web` generates. Errors surface as
//! rejected promises carrying the message.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use iscap_core::channel::{build_scenario_channels, ScenarioConfig};
use iscap_core::metrics::{evaluate_slacks, QosRequirements, TargetModel};
use iscap_core::optimizer::{ao_solve, SolveOptions, SolveStatus};
use iscap_core::protocol::{power_requirement, ProtocolConfig, ProtocolVariant};
use iscap_core::watts_to_dbm;

/// Keeps the page responsive: a 256-element surface already takes seconds.
const MAX_RIS: usize = 256;
const MAX_TX: usize = 16;

fn protocol(name: &str, rho: f64, n_ris: usize) -> Result<ProtocolConfig, String> {
    let variant: ProtocolVariant = name.parse().map_err(|e| format!("{e}"))?;
    ProtocolConfig::new(variant, rho, n_ris).map_err(|e| e.to_string())
}

fn scenario(n_tx: usize, n_ris: usize, seed: u64) -> Result<ScenarioConfig, String> {
    if n_tx == 0 || n_tx > MAX_TX || n_ris == 0 || n_ris > MAX_RIS {
        return Err(format!("demo limits: 1..={MAX_TX} antennas, 1..={MAX_RIS} elements"));
    }
    let cfg = ScenarioConfig {
        n_tx,
        n_ris,
        seed,
        ..Default::default()
    };
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn qos(r_com_min: f64, r_sense_min: f64, e_min_mw: f64) -> Result<QosRequirements, String> {
    let q = QosRequirements {
        r_com_min,
        r_sense_min,
        e_min_total: e_min_mw * 1e-3,
    };
    q.validate().map_err(|e| e.to_string())?;
    Ok(q)
}

#[derive(Serialize)]
struct SolveSummary {
    status: SolveStatus,
    power_dbm: f64,
    trace_dbm: Vec<f64>,
    ao_iterations: usize,
    comm_rates: Vec<f64>,
    sense_rate: f64,
    wpt_mw: f64,
    ris_surplus_mw: f64,
    ris_phases: Vec<f64>,
}

/// Minimises the transmit power for one channel draw and returns a JSON summary.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn solve_instance(
    protocol_name: &str,
    rho: f64,
    n_tx: usize,
    n_ris: usize,
    seed: u64,
    r_com_min: f64,
    r_sense_min: f64,
    e_min_mw: f64,
) -> Result<String, String> {
    let sc = scenario(n_tx, n_ris, seed)?;
    let pc = protocol(protocol_name, rho, n_ris)?;
    let q = qos(r_com_min, r_sense_min, e_min_mw)?;
    let ch = build_scenario_channels(&sc).map_err(|e| e.to_string())?;
    let target = TargetModel::from_scenario(&sc).map_err(|e| e.to_string())?;
    let opts = SolveOptions {
        seed,
        ..Default::default()
    };
    let rep = ao_solve(&ch, &pc, &q, &target, &opts).map_err(|e| e.to_string())?;
    let slacks = evaluate_slacks(&rep.solution, &ch, &pc, &QosRequirements::NONE, &target).map_err(|e| e.to_string())?;
    let summary = SolveSummary {
        status: rep.status,
        power_dbm: watts_to_dbm(rep.solution.objective_w),
        trace_dbm: rep.objective_trace.iter().map(|p| watts_to_dbm(*p)).collect(),
        ao_iterations: rep.ao_iterations,
        comm_rates: slacks.comm,
        sense_rate: slacks.sense,
        wpt_mw: slacks.wpt * 1e3,
        ris_surplus_mw: slacks.ris_power * 1e3,
        ris_phases: rep.solution.ris_phases,
    };
    serde_json::to_string(&summary).map_err(|e| e.to_string())
}

/// Minimum transmit power (dBm) at `rho = 1/(points+1), …, points/(points+1)`
/// for one channel draw. Non-converged points come back as NaN.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn rho_curve(
    protocol_name: &str,
    n_tx: usize,
    n_ris: usize,
    seed: u64,
    points: usize,
    r_com_min: f64,
    r_sense_min: f64,
    e_min_mw: f64,
) -> Result<Vec<f64>, String> {
    if points == 0 || points > 19 {
        return Err("points must be between 1 and 19".into());
    }
    let sc = scenario(n_tx, n_ris, seed)?;
    let q = qos(r_com_min, r_sense_min, e_min_mw)?;
    let ch = build_scenario_channels(&sc).map_err(|e| e.to_string())?;
    let target = TargetModel::from_scenario(&sc).map_err(|e| e.to_string())?;
    let opts = SolveOptions {
        seed,
        ..Default::default()
    };
    (1..=points)
        .map(|i| {
            let rho = i as f64 / (points + 1) as f64;
            let pc = protocol(protocol_name, rho, n_ris)?;
            let rep = ao_solve(&ch, &pc, &q, &target, &opts).map_err(|e| e.to_string())?;
            Ok(match rep.status {
                SolveStatus::Converged => watts_to_dbm(rep.solution.objective_w),
                _ => f64::NAN,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct Budget {
    required_mw: f64,
    realized_rho: f64,
    reflecting: usize,
    harvesting: usize,
    time_share: f64,
    amplitude: f64,
}

/// Power the surface must harvest under a protocol, plus how its elements are split.
#[wasm_bindgen]
pub fn ris_power_budget(protocol_name: &str, rho: f64, n_ris: usize) -> Result<String, String> {
    let pc = protocol(protocol_name, rho, n_ris)?;
    let b = Budget {
        required_mw: power_requirement(&pc) * 1e3,
        realized_rho: pc.realized_rho(),
        reflecting: pc.n_reflect(),
        harvesting: pc.n_harvest(),
        time_share: pc.time_share(),
        amplitude: pc.reflect_amplitude(),
    };
    serde_json::to_string(&b).map_err(|e| e.to_string())
}
