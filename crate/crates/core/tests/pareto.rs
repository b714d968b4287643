use std::sync::OnceLock;

use iscap_core::channel::{build_scenario_channels, ChannelSet, ScenarioConfig};
use iscap_core::metrics::{total_power, QosRequirements, TargetModel};
use iscap_core::optimizer::SolveOptions;
use iscap_core::pareto::{
    budget_w, default_normalizers, dominates, mark_dominated, single_objective_optima, solve_constrained,
    solve_lexicographic, solve_weighted_sum, trace_front, write_front, FrontMethod, Metric, ParetoInstance,
    ParetoPoint, PointStatus, DEFAULT_BUDGET_DBM, FRONT_HEADER,
};
use iscap_core::protocol::{ProtocolConfig, ProtocolVariant};
use proptest::prelude::*;

struct Fixture {
    ch: ChannelSet,
    protocol: ProtocolConfig,
    target: TargetModel,
    opts: SolveOptions,
}

impl Fixture {
    fn inst(&self) -> ParetoInstance<'_> {
        self.inst_with_budget(budget_w(DEFAULT_BUDGET_DBM))
    }

    fn inst_with_budget(&self, budget_w: f64) -> ParetoInstance<'_> {
        ParetoInstance {
            ch: &self.ch,
            protocol: &self.protocol,
            target: &self.target,
            budget_w,
            opts: &self.opts,
        }
    }
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let cfg = ScenarioConfig {
            n_tx: 4,
            n_ris: 20,
            seed: 0,
            ..Default::default()
        };
        Fixture {
            ch: build_scenario_channels(&cfg).unwrap(),
            protocol: ProtocolConfig::new(ProtocolVariant::PowerSplitting, 0.5, 20).unwrap(),
            target: TargetModel::from_scenario(&cfg).unwrap(),
            opts: SolveOptions::default(),
        }
    })
}

fn optima() -> &'static [ParetoPoint; 3] {
    static O: OnceLock<[ParetoPoint; 3]> = OnceLock::new();
    O.get_or_init(|| single_objective_optima(&fixture().inst()).unwrap())
}

fn within_budget(p: &ParetoPoint, budget: f64) {
    assert!(total_power(&p.solution.tx_beams) <= budget + 1e-8);
}

/// Brute-force non-domination over metric triples.
fn nondominated(all: &[[f64; 3]]) -> Vec<[f64; 3]> {
    all.iter()
        .filter(|a| !all.iter().any(|b| b.iter().zip(a.iter()).all(|(x, y)| x >= y) && b != *a))
        .copied()
        .collect()
}

#[test]
fn dominance_examples() {
    assert!(dominates(&[1.0, 1.0, 1.0], &[1.0, 1.0, 0.5]));
    assert!(!dominates(&[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0]));
    assert!(!dominates(&[2.0, 0.0, 1.0], &[1.0, 1.0, 1.0]));
}

fn dummy(metrics: [f64; 3]) -> ParetoPoint {
    let f = fixture();
    let sol = iscap_core::metrics::BeamformingSolution::new(
        iscap_core::linalg::CMatrix::zeros(4, 2),
        vec![0.0; 20],
        f.ch.target_sensor.clone(),
    );
    ParetoPoint {
        grid_id: 0,
        comm: metrics[0],
        sense: metrics[1],
        wpt: metrics[2],
        solution: sol,
        dominated: false,
        status: PointStatus::Solved,
    }
}

proptest! {
    #[test]
    fn dominated_flags_match_brute_force(raw in prop::collection::vec((0u8..4, 0u8..4, 0u8..4), 1..12)) {
        let mut pts: Vec<ParetoPoint> = raw.iter().map(|&(a, b, c)| dummy([a as f64, b as f64, c as f64])).collect();
        mark_dominated(&mut pts);
        let all: Vec<[f64; 3]> = pts.iter().map(|p| p.metrics()).collect();
        for (i, p) in pts.iter().enumerate() {
            let oracle = all.iter().enumerate().any(|(j, m)| {
                j != i && m.iter().zip(&all[i]).all(|(x, y)| x >= y) && m.iter().zip(&all[i]).any(|(x, y)| x > y)
            });
            prop_assert_eq!(p.dominated, oracle);
        }
        let kept: Vec<&ParetoPoint> = pts.iter().filter(|p| !p.dominated).collect();
        for a in &kept {
            for b in &kept {
                prop_assert!(!a.dominates(b));
            }
        }
    }
}

#[test]
fn zero_thresholds_reduce_to_single_objective() {
    let f = fixture();
    let inst = f.inst();
    for (m, opt) in Metric::ALL.into_iter().zip(optima()) {
        assert_eq!(opt.status, PointStatus::Solved, "{m}");
        within_budget(opt, inst.budget_w);
        let again = solve_constrained(m, &QosRequirements::NONE, &inst).unwrap();
        assert_eq!(&again, opt);
    }
    // Each anchor is the best of the three points on its own metric.
    for (i, opt) in optima().iter().enumerate() {
        for other in optima() {
            assert!(opt.metrics()[i] >= other.metrics()[i] - 1e-6);
        }
    }
}

#[test]
fn thresholds_beyond_the_optima_are_infeasible() {
    let f = fixture();
    let q = QosRequirements {
        r_sense_min: 1.2 * optima()[1].sense,
        ..QosRequirements::NONE
    };
    let p = solve_constrained(Metric::Comm, &q, &f.inst()).unwrap();
    assert_eq!(p.status, PointStatus::Infeasible);
    let q = QosRequirements {
        e_min_total: 1.2 * optima()[2].wpt,
        ..QosRequirements::NONE
    };
    let p = solve_constrained(Metric::Sense, &q, &f.inst()).unwrap();
    assert_eq!(p.status, PointStatus::Infeasible);
}

#[test]
fn budget_below_ris_consumption_is_infeasible() {
    let f = fixture();
    let inst = f.inst_with_budget(budget_w(30.0));
    let p = solve_constrained(Metric::Comm, &QosRequirements::NONE, &inst).unwrap();
    assert_eq!(p.status, PointStatus::Infeasible);
    assert_eq!(p.metrics(), [0.0; 3]);
    let front = trace_front(FrontMethod::EpsilonConstraint { objective: Metric::Comm }, &[[0.0; 3]], &inst).unwrap();
    assert!(front.is_empty());
}

#[test]
fn constrained_point_meets_thresholds() {
    let f = fixture();
    let q = QosRequirements {
        r_sense_min: 1.0,
        e_min_total: 5e-4,
        ..QosRequirements::NONE
    };
    let p = solve_constrained(Metric::Comm, &q, &f.inst()).unwrap();
    assert_eq!(p.status, PointStatus::Solved);
    assert!(p.sense >= 1.0 - 1e-9 && p.wpt >= 5e-4 - 1e-12);
    assert!(p.comm < optima()[0].comm);
    within_budget(&p, f.inst().budget_w);
}

#[test]
fn bisection_level_matches_grid_scan() {
    let f = fixture();
    let inst = f.inst();
    let q = QosRequirements {
        r_com_min: 2.0,
        ..QosRequirements::NONE
    };
    let p = solve_constrained(Metric::Sense, &q, &inst).unwrap();
    assert_eq!(p.status, PointStatus::Solved);
    // Scan a 1e-3 grid around the returned level.
    let start = ((p.sense - 0.006) * 1e3).floor() / 1e3;
    let mut largest = None;
    for i in 0..=12 {
        let level = start + i as f64 * 1e-3;
        let qos = QosRequirements { r_sense_min: level, ..q };
        if inst.check_level(&qos, None).unwrap().is_some() {
            largest = Some(level);
        }
    }
    let largest = largest.expect("no feasible level in the scan window");
    assert!((largest - p.sense).abs() <= 1e-3 + 1e-9, "scan {largest} vs bisection {}", p.sense);
}

#[test]
fn lexicographic_zero_slack_keeps_top_optimum() {
    let f = fixture();
    let inst = f.inst();
    let priority = [Metric::Comm, Metric::Sense, Metric::Wpt];
    let p = solve_lexicographic(priority, [0.0, 0.0], &inst).unwrap();
    assert_ne!(p.status, PointStatus::Infeasible);
    let opt = optima()[0].comm;
    assert!(p.comm >= opt - 1e-6, "{} < {opt}", p.comm);
    within_budget(&p, inst.budget_w);
}

#[test]
fn lexicographic_slack_semantics() {
    let f = fixture();
    let inst = f.inst();
    let priority = [Metric::Sense, Metric::Wpt, Metric::Comm];
    let (s1, s2) = (0.2, 0.5);
    let p = solve_lexicographic(priority, [s1, s2], &inst).unwrap();
    assert_ne!(p.status, PointStatus::Infeasible);
    let opt1 = optima()[1].sense;
    assert!(p.sense >= (1.0 - s1) * opt1 - 1e-6);
    // Giving up sensing buys communication.
    assert!(p.comm > optima()[1].comm);
}

#[test]
fn lexicographic_full_slack_equals_last_stage_alone() {
    let f = fixture();
    let inst = f.inst();
    let p = solve_lexicographic([Metric::Sense, Metric::Comm, Metric::Wpt], [1.0, 1.0], &inst).unwrap();
    let alone = &optima()[2];
    assert_eq!(p.metrics(), alone.metrics());
}

#[test]
fn lexicographic_rejects_bad_input() {
    let f = fixture();
    let inst = f.inst();
    assert!(solve_lexicographic([Metric::Comm, Metric::Comm, Metric::Wpt], [0.0, 0.0], &inst).is_err());
    assert!(solve_lexicographic([Metric::Comm, Metric::Sense, Metric::Wpt], [1.5, 0.0], &inst).is_err());
}

#[test]
fn weighted_sum_single_weight_matches_optimum() {
    let f = fixture();
    let inst = f.inst();
    let n = default_normalizers(optima());
    let starts: Vec<_> = optima().iter().map(|p| p.solution.clone()).collect();
    for (i, m) in Metric::ALL.into_iter().enumerate() {
        let mut w = [0.0; 3];
        w[i] = 1.0;
        let p = solve_weighted_sum(w, n, &starts, &inst).unwrap();
        let opt = optima()[i].metric(m);
        assert!((p.metric(m) - opt).abs() <= 1e-3 * opt, "{m}: {} vs {opt}", p.metric(m));
        within_budget(&p, inst.budget_w);
    }
}

#[test]
fn weighted_sum_is_scale_invariant_and_improves_on_starts() {
    let f = fixture();
    let inst = f.inst();
    let n = default_normalizers(optima());
    let starts: Vec<_> = optima().iter().map(|p| p.solution.clone()).collect();
    let w = [1.0, 2.0, 1.0];
    let a = solve_weighted_sum(w, n, &starts, &inst).unwrap();
    let b = solve_weighted_sum(w.map(|x| 10.0 * x), n, &starts, &inst).unwrap();
    for (x, y) in a.metrics().iter().zip(b.metrics()) {
        assert!((x - y).abs() <= 1e-6 * x.abs().max(1e-9));
    }
    let value = |m: [f64; 3]| (0..3).map(|i| w[i] * m[i] / n[i]).sum::<f64>();
    for s in optima() {
        assert!(value(a.metrics()) >= value(s.metrics()) - 1e-9);
    }
}

#[test]
fn weighted_sum_rejects_bad_weights() {
    let f = fixture();
    let inst = f.inst();
    assert!(solve_weighted_sum([0.0; 3], [1.0; 3], &[], &inst).is_err());
    assert!(solve_weighted_sum([1.0, -1.0, 0.0], [1.0; 3], &[], &inst).is_err());
    assert!(solve_weighted_sum([1.0, 0.0, 0.0], [0.0, 1.0, 1.0], &[], &inst).is_err());
}

#[test]
fn singleton_grid_gives_singleton_front() {
    let f = fixture();
    let front = trace_front(FrontMethod::EpsilonConstraint { objective: Metric::Comm }, &[[0.0, 1.0, 0.0]], &f.inst()).unwrap();
    assert_eq!(front.len(), 1);
    assert!(!front[0].dominated);
    assert!(trace_front(FrontMethod::WeightedSum, &[], &f.inst()).is_err());
}

fn audit(front: &[ParetoPoint], budget: f64) {
    for w in front.windows(2) {
        assert!(w[0].comm <= w[1].comm);
    }
    let kept: Vec<&ParetoPoint> = front.iter().filter(|p| !p.dominated).collect();
    assert!(!kept.is_empty());
    for a in &kept {
        for b in &kept {
            assert!(!a.dominates(b));
        }
    }
    for p in front {
        assert!(p.metrics().iter().all(|v| v.is_finite() && *v >= 0.0));
        within_budget(p, budget);
        let dominated = front.iter().any(|q| q.dominates(p));
        assert_eq!(p.dominated, dominated);
    }
}

#[test]
fn fronts_pass_the_dominance_audit() {
    let f = fixture();
    let inst = f.inst();
    let s_max = optima()[1].sense;
    let eps_grid: Vec<[f64; 3]> = (0..5).map(|i| [0.0, s_max * i as f64 / 5.0, 0.0]).collect();
    let eps = trace_front(FrontMethod::EpsilonConstraint { objective: Metric::Comm }, &eps_grid, &inst).unwrap();
    assert_eq!(eps.len(), eps_grid.len());
    audit(&eps, inst.budget_w);

    let ws_grid = [[1.0, 0.0, 0.0], [0.7, 0.3, 0.0], [0.4, 0.6, 0.0], [0.0, 1.0, 0.0], [0.3, 0.3, 0.4]];
    let ws = trace_front(FrontMethod::WeightedSum, &ws_grid, &inst).unwrap();
    assert_eq!(ws.len(), ws_grid.len());
    audit(&ws, inst.budget_w);

    // Weighted-sum points that survive filtering are non-dominated in the union.
    let union: Vec<[f64; 3]> = eps.iter().chain(&ws).map(|p| p.metrics()).collect();
    let nd = nondominated(&union);
    for p in ws.iter().filter(|p| !p.dominated) {
        assert!(nd.contains(&p.metrics()), "weighted-sum point {:?} dominated by the union", p.metrics());
    }

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("front.csv");
    write_front(&ws, &FrontMethod::WeightedSum, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(FRONT_HEADER));
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), ws.len());
    for (row, p) in rows.iter().zip(&ws) {
        assert_eq!(row[0], "weighted_sum");
        assert_eq!(row[1].parse::<usize>().unwrap(), p.grid_id);
        assert_eq!(row[2].parse::<f64>().unwrap(), p.comm);
        assert_eq!(row[4].parse::<f64>().unwrap(), p.wpt * 1e3);
        assert_eq!(row[5].parse::<bool>().unwrap(), p.dominated);
    }
}
