use iscap_web::{rho_curve, ris_power_budget, solve_instance};
use serde_json::Value;

#[test]
fn budget_reports_split() {
    let b: Value = serde_json::from_str(&ris_power_budget("ES", 0.3, 100).unwrap()).unwrap();
    assert_eq!(b["reflecting"], 30);
    assert_eq!(b["harvesting"], 70);
    assert_eq!(b["time_share"], 1.0);
    let b: Value = serde_json::from_str(&ris_power_budget("ps", 0.25, 100).unwrap()).unwrap();
    assert_eq!(b["amplitude"], 0.5);
    assert!(b["required_mw"].as_f64().unwrap() > 0.0);
}

#[test]
fn bad_inputs_are_messages() {
    assert!(ris_power_budget("XX", 0.5, 10).unwrap_err().contains("XX"));
    assert!(ris_power_budget("PS", 1.5, 10).is_err());
    assert!(solve_instance("PS", 0.5, 4, 10_000, 0, 1.0, 0.2, 0.5).is_err());
    assert!(solve_instance("PS", 0.5, 4, 20, 0, -1.0, 0.2, 0.5).is_err());
    assert!(rho_curve("PS", 4, 20, 0, 0, 1.0, 0.2, 0.5).is_err());
}

#[test]
fn solve_summary_is_consistent() {
    let s: Value = serde_json::from_str(&solve_instance("TS", 0.5, 4, 20, 1, 1.0, 0.2, 0.5).unwrap()).unwrap();
    assert_eq!(s["status"], "Converged");
    let trace: Vec<f64> = s["trace_dbm"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(*trace.last().unwrap(), s["power_dbm"].as_f64().unwrap());
    for r in s["comm_rates"].as_array().unwrap() {
        assert!(r.as_f64().unwrap() >= 1.0 - 1e-6);
    }
    assert!(s["sense_rate"].as_f64().unwrap() >= 0.2 - 1e-6);
    assert!(s["wpt_mw"].as_f64().unwrap() >= 0.5 - 1e-6);
    assert!(s["ris_surplus_mw"].as_f64().unwrap() >= -1e-3);
    assert_eq!(s["ris_phases"].as_array().unwrap().len(), 20);
}

#[test]
fn curve_has_one_value_per_point() {
    let ys = rho_curve("PS", 4, 16, 2, 3, 1.0, 0.2, 0.5).unwrap();
    assert_eq!(ys.len(), 3);
    assert!(ys.iter().any(|y| y.is_finite()));
}
