//! Multi-objective tradeoffs between communication rate, sensing rate and
//! harvested power under a fixed transmit-power budget.
//!
//! Three scalarisations are provided: ε-constraint (maximise one metric with
//! thresholds on the others, by bisection over power-minimisation
//! feasibility checks), lexicographic (three ε-constraint stages) and the
//! normalised weighted sum (block minorise–maximise over beams and phases).

use std::f64::consts::LN_2;
use std::io::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::conic::{solve_socp, ConeConstraint, SocpProblem, SocpStatus, SparseRow};
use crate::linalg::{CMatrix, CVector, ZERO};
use crate::metrics::{
    comm_rate, harvested_power_ers, sensing_rate, total_power, BeamformingSolution, QosRequirements, TargetModel,
};
use crate::optimizer::{
    accumulate, ao_solve, ao_solve_from, check_feasibility, init_solution, update_receive_beamformer, CAffine,
    SolveOptions, SolveStatus,
};
use crate::protocol::{power_requirement, reflection_profile, ProtocolConfig};
use crate::{dbm_to_watts, Error, Result};

/// Default transmit-power budget of the tradeoff problems, dBm.
pub const DEFAULT_BUDGET_DBM: f64 = 75.0;

/// Bisection stops when the bracket is narrower than this (bps/Hz).
pub const RATE_TOL: f64 = 1e-3;
/// Bisection tolerance for harvested power, Watts.
pub const WPT_TOL: f64 = 1e-6;
pub const MAX_BISECTION_STEPS: usize = 30;
/// Slack accepted on the exact constraints during feasibility checks.
const CHECK_TOL: f64 = 1e-9;
/// Lexicographic bounds are relaxed by this relative amount, capped at
/// [`LEX_MARGIN_ABS`], so that the previous stage's optimum stays strictly
/// feasible after rounding.
const LEX_MARGIN: f64 = 1e-7;
const LEX_MARGIN_ABS: f64 = 5e-7;

const MM_MAX_ITERS: usize = 200;
const MM_TOL: f64 = 1e-7;
const MM_TRUST_INIT: f64 = 0.5;
const MM_TRUST_MIN: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Comm,
    Sense,
    Wpt,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Comm, Metric::Sense, Metric::Wpt];

    pub fn index(self) -> usize {
        match self {
            Metric::Comm => 0,
            Metric::Sense => 1,
            Metric::Wpt => 2,
        }
    }

    fn tolerance(self) -> f64 {
        match self {
            Metric::Comm | Metric::Sense => RATE_TOL,
            Metric::Wpt => WPT_TOL,
        }
    }

    fn initial_step(self) -> f64 {
        match self {
            Metric::Comm | Metric::Sense => 1.0,
            Metric::Wpt => 1e-3,
        }
    }

    /// Threshold set requiring `level` on this metric and `others` elsewhere.
    fn with_level(self, others: &QosRequirements, level: f64) -> QosRequirements {
        let mut q = *others;
        match self {
            Metric::Comm => q.r_com_min = level,
            Metric::Sense => q.r_sense_min = level,
            Metric::Wpt => q.e_min_total = level,
        }
        q
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Metric::Comm => "comm",
            Metric::Sense => "sense",
            Metric::Wpt => "wpt",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Solved,
    /// Returned at an iteration cap; feasible but possibly not stationary.
    IterationCap,
    Infeasible,
}

impl PointStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            PointStatus::Solved => "solved",
            PointStatus::IterationCap => "iteration_cap",
            PointStatus::Infeasible => "infeasible",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    /// Index of the grid node that produced the point.
    pub grid_id: usize,
    /// Smallest rate over the information receivers, bps/Hz.
    pub comm: f64,
    pub sense: f64,
    /// Watts.
    pub wpt: f64,
    pub solution: BeamformingSolution,
    pub dominated: bool,
    pub status: PointStatus,
}

impl ParetoPoint {
    pub fn metrics(&self) -> [f64; 3] {
        [self.comm, self.sense, self.wpt]
    }

    pub fn metric(&self, m: Metric) -> f64 {
        self.metrics()[m.index()]
    }

    /// `self` is at least as good everywhere and strictly better somewhere.
    pub fn dominates(&self, other: &ParetoPoint) -> bool {
        dominates(&self.metrics(), &other.metrics())
    }
}

pub fn dominates(a: &[f64; 3], b: &[f64; 3]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y) && a.iter().zip(b).any(|(x, y)| x > y)
}

/// Channel realisation, protocol and budget shared by every tradeoff solve.
#[derive(Debug, Clone, Copy)]
pub struct ParetoInstance<'a> {
    pub ch: &'a ChannelSet,
    pub protocol: &'a ProtocolConfig,
    pub target: &'a TargetModel,
    pub budget_w: f64,
    pub opts: &'a SolveOptions,
}

impl<'a> ParetoInstance<'a> {
    fn validate(&self) -> Result<()> {
        if !(self.budget_w > 0.0) || !self.budget_w.is_finite() {
            return Err(Error::field("budget", "must be positive and finite"));
        }
        self.protocol.validate()?;
        self.opts.validate()
    }

    /// Exact metric triple of a design.
    pub fn evaluate(&self, sol: &BeamformingSolution) -> Result<[f64; 3]> {
        let profile = reflection_profile(self.protocol, &sol.ris_phases)?;
        let comm = (0..self.ch.n_irs())
            .map(|k| comm_rate(k, sol, self.ch, &profile))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        let sense = sensing_rate(sol, self.ch, &profile, self.target)?;
        let wpt = harvested_power_ers(sol, self.ch, &profile, self.protocol.eta)?;
        Ok([comm.max(0.0), sense.max(0.0), wpt.max(0.0)])
    }

    fn point(&self, sol: BeamformingSolution, status: PointStatus) -> Result<ParetoPoint> {
        let [comm, sense, wpt] = if status == PointStatus::Infeasible {
            [0.0; 3]
        } else {
            self.evaluate(&sol)?
        };
        Ok(ParetoPoint {
            grid_id: 0,
            comm,
            sense,
            wpt,
            solution: sol,
            dominated: false,
            status,
        })
    }

    /// Scales the beams up to the full budget. Every metric and the RIS
    /// harvest are nondecreasing in a common beam scaling.
    fn fill_budget(&self, mut sol: BeamformingSolution) -> BeamformingSolution {
        let p = total_power(&sol.tx_beams);
        if p > 0.0 {
            let a = (self.budget_w / p).sqrt();
            sol.tx_beams *= Complex64::new(a, 0.0);
            sol.refresh_objective();
            // Guard against the last ulp.
            while sol.objective_w > self.budget_w {
                sol.tx_beams *= Complex64::new(1.0 - 1e-15, 0.0);
                sol.refresh_objective();
            }
        }
        sol
    }

    /// Whether `qos` can be met within the budget, with the budget-filling
    /// design when it can. `warm` is tried when the default start fails.
    pub fn check_level(&self, qos: &QosRequirements, warm: Option<&BeamformingSolution>) -> Result<Option<BeamformingSolution>> {
        let opts = SolveOptions {
            target_power_w: Some(self.budget_w),
            ..*self.opts
        };
        let accept = |sol: &BeamformingSolution, status: SolveStatus| -> Result<bool> {
            Ok(status != SolveStatus::Infeasible
                && sol.objective_w <= self.budget_w
                && check_feasibility(sol, self.ch, self.protocol, qos, self.target)?.satisfied(CHECK_TOL))
        };
        let report = ao_solve(self.ch, self.protocol, qos, self.target, &opts)?;
        if accept(&report.solution, report.status)? {
            return Ok(Some(self.fill_budget(report.solution)));
        }
        if let Some(w) = warm {
            let report = ao_solve_from(w.clone(), self.ch, self.protocol, qos, self.target, &opts)?;
            if accept(&report.solution, report.status)? {
                return Ok(Some(self.fill_budget(report.solution)));
            }
        }
        Ok(None)
    }

    fn fallback(&self) -> Result<BeamformingSolution> {
        Ok(init_solution(self.ch, self.protocol, &QosRequirements::NONE, self.target, self.opts)?.solution)
    }
}

fn check_thresholds(q: &QosRequirements) -> Result<()> {
    q.validate()
}

/// Maximises `objective` subject to the other two metrics meeting
/// `thresholds` (the objective's own entry is ignored).
pub fn solve_constrained(objective: Metric, thresholds: &QosRequirements, inst: &ParetoInstance) -> Result<ParetoPoint> {
    constrained(objective, thresholds, None, inst)
}

fn constrained(
    objective: Metric,
    thresholds: &QosRequirements,
    warm: Option<&BeamformingSolution>,
    inst: &ParetoInstance,
) -> Result<ParetoPoint> {
    inst.validate()?;
    check_thresholds(thresholds)?;
    let idx = objective.index();
    let Some(mut best) = inst.check_level(&objective.with_level(thresholds, 0.0), warm)? else {
        let sol = warm.cloned().map_or_else(|| inst.fallback(), Ok)?;
        return inst.point(sol, PointStatus::Infeasible);
    };
    let mut lo = inst.evaluate(&best)?[idx];
    let tol = objective.tolerance();
    let mut step = objective.initial_step().max(lo);
    let mut hi = None;
    let mut steps = 0;
    // Grow the bracket until a level fails.
    while hi.is_none() && steps < MAX_BISECTION_STEPS {
        steps += 1;
        let level = lo + step;
        match inst.check_level(&objective.with_level(thresholds, level), Some(&best))? {
            Some(sol) => {
                lo = inst.evaluate(&sol)?[idx].max(level);
                best = sol;
                step *= 2.0;
            }
            None => hi = Some(level),
        }
    }
    let Some(mut hi) = hi else {
        return inst.point(best, PointStatus::IterationCap);
    };
    while hi - lo > tol && steps < MAX_BISECTION_STEPS {
        steps += 1;
        let mid = 0.5 * (lo + hi);
        match inst.check_level(&objective.with_level(thresholds, mid), Some(&best))? {
            Some(sol) => {
                lo = inst.evaluate(&sol)?[idx].max(mid);
                best = sol;
            }
            None => hi = mid,
        }
    }
    let status = if hi - lo <= tol {
        PointStatus::Solved
    } else {
        PointStatus::IterationCap
    };
    inst.point(best, status)
}

/// Three ε-constraint stages in `priority` order; stage `i + 1` keeps metric
/// `i` above `(1 − slack_i)` times its stage optimum.
pub fn solve_lexicographic(priority: [Metric; 3], slack_fractions: [f64; 2], inst: &ParetoInstance) -> Result<ParetoPoint> {
    let mut seen = [false; 3];
    for m in priority {
        if std::mem::replace(&mut seen[m.index()], true) {
            return Err(Error::invalid("priority must list every metric once"));
        }
    }
    if slack_fractions.iter().any(|s| !(0.0..=1.0).contains(s)) {
        return Err(Error::invalid("slack fractions must lie in [0, 1]"));
    }
    let mut thresholds = QosRequirements::NONE;
    let mut warm: Option<BeamformingSolution> = None;
    let mut point = None;
    for (stage, &m) in priority.iter().enumerate() {
        let p = constrained(m, &thresholds, warm.as_ref(), inst)?;
        if p.status == PointStatus::Infeasible {
            return Ok(p);
        }
        if stage < 2 {
            let opt = p.metric(m);
            let bound = (1.0 - slack_fractions[stage]) * opt - (LEX_MARGIN * opt).min(LEX_MARGIN_ABS);
            thresholds = m.with_level(&thresholds, bound.max(0.0));
        }
        warm = Some(p.solution.clone());
        point = Some(p);
    }
    point.ok_or_else(|| Error::invalid("empty priority"))
}

/// Single-objective optimum of every metric, in [`Metric::ALL`] order.
pub fn single_objective_optima(inst: &ParetoInstance) -> Result<[ParetoPoint; 3]> {
    let pts = Metric::ALL
        .into_iter()
        .map(|m| solve_constrained(m, &QosRequirements::NONE, inst))
        .collect::<Result<Vec<_>>>()?;
    pts.try_into().map_err(|_| Error::invalid("expected three points"))
}

/// Scales used by the weighted sum: each metric's single-objective optimum,
/// or one where that optimum is zero.
pub fn default_normalizers(optima: &[ParetoPoint; 3]) -> [f64; 3] {
    std::array::from_fn(|i| {
        let v = optima[i].metric(Metric::ALL[i]);
        if v > 0.0 {
            v
        } else {
            1.0
        }
    })
}

/// Maximises `Σ wᵢ·metricᵢ / normalizerᵢ` from each of `starts` (or the
/// aligned initialisation when empty) and returns the best result.
pub fn solve_weighted_sum(
    weights: [f64; 3],
    normalizers: [f64; 3],
    starts: &[BeamformingSolution],
    inst: &ParetoInstance,
) -> Result<ParetoPoint> {
    inst.validate()?;
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) || weights.iter().all(|w| *w == 0.0) {
        return Err(Error::invalid("weights must be nonnegative, finite and not all zero"));
    }
    if normalizers.iter().any(|n| !(*n > 0.0) || !n.is_finite()) {
        return Err(Error::invalid("normalizers must be positive and finite"));
    }
    let total: f64 = weights.iter().sum();
    let coef: [f64; 3] = std::array::from_fn(|i| weights[i] / total / normalizers[i]);
    let default_start;
    let starts = if starts.is_empty() {
        default_start = [inst.fallback()?];
        &default_start[..]
    } else {
        starts
    };
    let mut best: Option<(f64, BeamformingSolution, PointStatus)> = None;
    for start in starts {
        let Some((value, sol, status)) = Mm::new(inst, coef).run(start)? else {
            continue;
        };
        if best.as_ref().is_none_or(|(v, _, _)| value > *v) {
            best = Some((value, sol, status));
        }
    }
    match best {
        Some((_, sol, status)) => inst.point(sol, status),
        None => inst.point(starts[0].clone(), PointStatus::Infeasible),
    }
}

/// Block minorise–maximise for the weighted sum.
///
/// With the phases fixed every received sample is linear in the beams, and
/// with the beams fixed it is affine in the reflection coefficients. In
/// either block the rates are bounded below by concave quadratics (see
/// [`add_rate_minorant`]) and the harvested powers by their tangent planes.
struct Mm<'a, 'b> {
    inst: &'b ParetoInstance<'a>,
    coef: [f64; 3],
}

/// Received samples as complex-affine functions of one block's variables.
struct BlockModel {
    /// `comm[k][j]`: beam `j` at information receiver `k`, noise-normalised.
    comm: Vec<Vec<CAffine>>,
    /// Echo of beam `j` at the combiner output, noise-normalised.
    sense: Vec<CAffine>,
    /// `er[m][j]` in √W.
    er: Vec<Vec<CAffine>>,
    x0: Vec<Complex64>,
    /// Element index of each phase slot (empty in the beam block).
    phase_elements: Vec<usize>,
}

impl<'a, 'b> Mm<'a, 'b> {
    fn new(inst: &'b ParetoInstance<'a>, coef: [f64; 3]) -> Self {
        Mm { inst, coef }
    }

    fn value(&self, sol: &BeamformingSolution) -> Result<f64> {
        let m = self.inst.evaluate(sol)?;
        Ok((0..3).map(|i| self.coef[i] * m[i]).sum())
    }

    fn feasible(&self, sol: &BeamformingSolution) -> Result<bool> {
        Ok(sol.objective_w <= self.inst.budget_w
            && check_feasibility(sol, self.inst.ch, self.inst.protocol, &QosRequirements::NONE, self.inst.target)?
                .ris_power
                >= -CHECK_TOL)
    }

    fn run(&self, start: &BeamformingSolution) -> Result<Option<(f64, BeamformingSolution, PointStatus)>> {
        let inst = self.inst;
        let mut cur = inst.fill_budget(start.clone());
        cur.rx_beam = update_receive_beamformer(&cur, inst.ch, inst.protocol, inst.target)?;
        if !self.feasible(&cur)? {
            return Ok(None);
        }
        let mut value = self.value(&cur)?;
        let mut radius = MM_TRUST_INIT;
        let has_phases = inst.protocol.n_reflect() > 0;
        for _ in 0..MM_MAX_ITERS {
            let before = value;
            if let Some(c) = self.beam_step(&cur)? {
                let v = self.value(&c)?;
                if v > value && self.feasible(&c)? {
                    cur = c;
                    value = v;
                }
            }
            let mut phase_moved = false;
            if has_phases && radius >= MM_TRUST_MIN {
                match self.phase_step(&cur, radius)? {
                    Some(c) if self.value(&c)? > value => {
                        value = self.value(&c)?;
                        cur = c;
                        radius = (radius * 1.5).min(1.0);
                        phase_moved = true;
                    }
                    _ => radius *= 0.5,
                }
            }
            let stalled = value - before <= MM_TOL * value.abs().max(1e-12);
            if stalled && (!has_phases || phase_moved || radius < MM_TRUST_MIN) {
                return Ok(Some((value, cur, PointStatus::Solved)));
            }
        }
        Ok(Some((value, cur, PointStatus::IterationCap)))
    }

    /// Samples as functions of the normalised beams `ŵ = w/√budget`.
    fn beam_model(&self, sol: &BeamformingSolution) -> Result<BlockModel> {
        let inst = self.inst;
        let ch = inst.ch;
        let profile = reflection_profile(inst.protocol, &sol.ris_phases)?;
        let n_tx = ch.n_tx();
        let k_beams = sol.n_beams();
        let sp = inst.budget_w.sqrt();
        let cy = (inst.budget_w / ch.noise_power).sqrt();
        let slot = |j: usize, i: usize| j * n_tx + i;
        let linear = |h: &CVector, j: usize, scale: f64| CAffine {
            terms: (0..n_tx).map(|i| (slot(j, i), h[i].conj() * scale)).collect(),
            constant: ZERO,
        };
        let comm = (0..ch.n_irs())
            .map(|k| {
                let h = crate::metrics::effective_channel(&ch.direct_ir[k], &ch.ris_ir[k], &profile, &ch.bs_ris)?;
                Ok((0..k_beams).map(|j| linear(&h, j, cy)).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        let er = (0..ch.n_ers())
            .map(|m| {
                let g = crate::metrics::effective_channel(&ch.direct_er[m], &ch.ris_er[m], &profile, &ch.bs_ris)?;
                Ok((0..k_beams).map(|j| linear(&g, j, sp)).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        // z_j = Σ_n conj(a_n) c_n (G w_j)_n = bᵀ w_j with b = Gᵀ(conj(a) ⊙ c).
        let steer = ch.ris_target.zip_map(&profile.coefficients, |a, c| a.conj() * c);
        let b = ch.bs_ris.transpose() * steer;
        let cs = self.sense_scale(sol)? * sp;
        let sense = (0..k_beams)
            .map(|j| CAffine {
                terms: (0..n_tx).map(|i| (slot(j, i), b[i] * cs)).collect(),
                constant: ZERO,
            })
            .collect();
        let x0 = (0..k_beams)
            .flat_map(|j| (0..n_tx).map(move |i| (j, i)))
            .map(|(j, i)| sol.tx_beams[(i, j)] / sp)
            .collect();
        Ok(BlockModel {
            comm,
            sense,
            er,
            x0,
            phase_elements: Vec::new(),
        })
    }

    /// Samples as functions of the reflection phasors, beams fixed.
    fn phase_model(&self, sol: &BeamformingSolution) -> Result<BlockModel> {
        let inst = self.inst;
        let ch = inst.ch;
        let protocol = inst.protocol;
        let elements = protocol.reflecting_indices();
        let amp = protocol.reflect_amplitude();
        let incident = &ch.bs_ris * &sol.tx_beams;
        let k_beams = sol.n_beams();
        let cy = 1.0 / ch.noise_power.sqrt();
        let sample = |direct: Option<&CVector>, cascade: &CVector, j: usize, scale: f64| {
            let w = sol.tx_beams.column(j);
            let constant = direct.map_or(ZERO, |d| d.dotc(&w)) * scale;
            let terms = elements
                .iter()
                .enumerate()
                .map(|(q, &n)| (q, cascade[n].conj() * incident[(n, j)] * amp * scale))
                .collect();
            CAffine { terms, constant }
        };
        let comm = (0..ch.n_irs())
            .map(|k| (0..k_beams).map(|j| sample(Some(&ch.direct_ir[k]), &ch.ris_ir[k], j, cy)).collect())
            .collect();
        let er = (0..ch.n_ers())
            .map(|m| (0..k_beams).map(|j| sample(Some(&ch.direct_er[m]), &ch.ris_er[m], j, 1.0)).collect())
            .collect();
        let cs = self.sense_scale(sol)?;
        let sense = (0..k_beams).map(|j| sample(None, &ch.ris_target, j, cs)).collect();
        let x0 = elements.iter().map(|&n| Complex64::from_polar(1.0, sol.ris_phases[n])).collect();
        Ok(BlockModel {
            comm,
            sense,
            er,
            x0,
            phase_elements: elements,
        })
    }

    /// `√(κ_s)` with the echo SNR equal to `κ_s Σ_j |bᵀw_j|²` for unit-norm combiners.
    fn sense_scale(&self, sol: &BeamformingSolution) -> Result<f64> {
        let ch = self.inst.ch;
        let un = sol.rx_beam.norm();
        if !(un > 0.0) {
            return Err(Error::invalid("receive beamformer has zero norm"));
        }
        let gain = sol.rx_beam.dotc(&ch.target_sensor).norm_sqr() / (un * un);
        Ok((self.inst.target.two_way_gain * gain / ch.noise_power).sqrt())
    }

    /// Builds the concave surrogate over one block. Variable layout: complex
    /// slots, then one epigraph real per rate metric in use.
    fn surrogate(&self, model: &BlockModel) -> (SocpProblem, usize) {
        let n_slots = model.x0.len();
        let ts = self.inst.protocol.time_share();
        let mut n_vars = 2 * n_slots;
        let comm_var = (self.coef[0] > 0.0).then(|| {
            n_vars += 1;
            n_vars - 1
        });
        let sense_var = (self.coef[1] > 0.0).then(|| {
            n_vars += 1;
            n_vars - 1
        });
        let mut p = SocpProblem::new(n_vars);
        let rate_scale = ts / LN_2;
        if let Some(r) = comm_var {
            p.objective[r] = -self.coef[0];
            for (k, row) in model.comm.iter().enumerate() {
                let interference: Vec<&CAffine> = row.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, y)| y).collect();
                add_rate_minorant(&mut p, &[&row[k]], &interference, &model.x0, r, rate_scale);
            }
        }
        if let Some(r) = sense_var {
            p.objective[r] = -self.coef[1];
            let signal: Vec<&CAffine> = model.sense.iter().collect();
            add_rate_minorant(&mut p, &signal, &[], &model.x0, r, rate_scale);
        }
        if self.coef[2] > 0.0 {
            // Tangent plane of ts·η·Σ|e|², Watts.
            let f = self.coef[2] * ts * self.inst.protocol.eta;
            let mut acc = vec![0.0; n_vars];
            for e in model.er.iter().flatten() {
                let e0 = e.eval(&model.x0);
                accumulate(&mut acc, &e.scaled(e0.conj()).re_row(), -2.0 * f);
            }
            for (o, a) in p.objective.iter_mut().zip(acc) {
                *o += a;
            }
        }
        (p, n_slots)
    }

    fn beam_step(&self, sol: &BeamformingSolution) -> Result<Option<BeamformingSolution>> {
        let inst = self.inst;
        let model = self.beam_model(sol)?;
        let (mut p, n_slots) = self.surrogate(&model);
        // ‖ŵ‖ ≤ 1.
        p.cone_constraints.push(ConeConstraint {
            a_rows: (0..2 * n_slots).map(|v| vec![(v, 1.0)]).collect(),
            b: vec![0.0; 2 * n_slots],
            c: Vec::new(),
            d: 1.0,
        });
        // RIS self-power, tangent plane at the current beams.
        let p_req = power_requirement(inst.protocol);
        if p_req > 0.0 {
            let harvest = inst.protocol.harvesting_indices();
            let scale = inst.protocol.harvest_factor() * inst.budget_w / p_req;
            let n_tx = inst.ch.n_tx();
            let mut acc = vec![0.0; p.n_vars];
            let mut constant = 0.0;
            for j in 0..sol.n_beams() {
                for &n in &harvest {
                    let v = CAffine {
                        terms: (0..n_tx).map(|i| (j * n_tx + i, inst.ch.bs_ris[(n, i)])).collect(),
                        constant: ZERO,
                    };
                    let v0 = v.eval(&model.x0);
                    accumulate(&mut acc, &v.scaled(v0.conj()).re_row(), 2.0 * scale);
                    constant -= scale * v0.norm_sqr();
                }
            }
            p.cone_constraints.push(ConeConstraint::nonnegative(sparse(&acc), constant - 1.0));
        }
        let Some(x) = self.solve(&p)? else {
            return Ok(None);
        };
        let sp = inst.budget_w.sqrt();
        let n_tx = inst.ch.n_tx();
        let mut out = sol.clone();
        out.tx_beams = CMatrix::from_fn(n_tx, sol.n_beams(), |i, j| {
            let s = j * n_tx + i;
            Complex64::new(x[2 * s], x[2 * s + 1]) * sp
        });
        out.refresh_objective();
        if out.objective_w > inst.budget_w {
            out = inst.fill_budget(out);
        }
        Ok(Some(out))
    }

    fn phase_step(&self, sol: &BeamformingSolution, radius: f64) -> Result<Option<BeamformingSolution>> {
        let model = self.phase_model(sol)?;
        let (mut p, n_slots) = self.surrogate(&model);
        for q in 0..n_slots {
            let th0 = model.x0[q];
            let rows = vec![vec![(2 * q, 1.0)], vec![(2 * q + 1, 1.0)]];
            p.cone_constraints.push(ConeConstraint {
                a_rows: rows.clone(),
                b: vec![0.0, 0.0],
                c: Vec::new(),
                d: 1.0,
            });
            p.cone_constraints.push(ConeConstraint {
                a_rows: rows,
                b: vec![-th0.re, -th0.im],
                c: Vec::new(),
                d: radius,
            });
        }
        let Some(x) = self.solve(&p)? else {
            return Ok(None);
        };
        let mut out = sol.clone();
        for (q, &n) in model.phase_elements.iter().enumerate() {
            let v = Complex64::new(x[2 * q], x[2 * q + 1]);
            if v.norm() > 1e-9 {
                out.ris_phases[n] = crate::metrics::wrap_phase(v.arg());
            }
        }
        out.rx_beam = update_receive_beamformer(&out, self.inst.ch, self.inst.protocol, self.inst.target)?;
        Ok(Some(out))
    }

    fn solve(&self, p: &SocpProblem) -> Result<Option<Vec<f64>>> {
        let sol = solve_socp(p, self.inst.opts.socp_tol)?;
        log::trace!("mm surrogate: {:?} after {} iterations", sol.status, sol.iterations);
        Ok((sol.status == SocpStatus::Optimal).then_some(sol.x))
    }
}

fn sparse(acc: &[f64]) -> SparseRow {
    crate::optimizer::dense_to_sparse(acc)
}

/// Lower bound on the tangent ratio `ℓ/T₀` kept by the rate surrogate.
const LOG_FLOOR: f64 = 0.5;

/// Adds `epi ≤ scale · ρ(x)` where `ρ` minorises `ln(T/I)`, with
/// `T = 1 + ‖signal‖² + ‖interference‖²` and `I = 1 + ‖interference‖²`.
///
/// `ln T ≥ ln ℓ` for the tangent plane `ℓ` of `T`; on `ℓ ≥ c·T₀`,
/// `ln ℓ ≥ ln T₀ + z − z²/(2c²)` with `z = ℓ/T₀ − 1`; and
/// `−ln I ≥ −ln I₀ − (I − I₀)/I₀`. All three are tight at `x0`.
fn add_rate_minorant(
    p: &mut SocpProblem,
    signal: &[&CAffine],
    interference: &[&CAffine],
    x0: &[Complex64],
    epi: usize,
    scale: f64,
) {
    let all: Vec<&CAffine> = signal.iter().chain(interference).copied().collect();
    let t0 = 1.0 + all.iter().map(|y| y.eval(x0).norm_sqr()).sum::<f64>();
    let i0 = 1.0 + interference.iter().map(|y| y.eval(x0).norm_sqr()).sum::<f64>();
    // z(x) = Σ 2Re(y₀*(y − y₀)) / T₀.
    let mut z_row = vec![0.0; p.n_vars];
    let mut z_const = 0.0;
    for y in &all {
        let y0 = y.eval(x0);
        let lin = y.scaled(y0.conj() / t0);
        accumulate(&mut z_row, &lin.re_row(), 2.0);
        z_const += 2.0 * lin.constant.re - 2.0 * y0.norm_sqr() / t0;
    }
    let z = sparse(&z_row);
    p.cone_constraints
        .push(ConeConstraint::nonnegative(z.clone(), z_const + 1.0 - LOG_FLOOR));
    // z²/(2c²) + ‖interference‖²/I₀ ≤ ln(T₀/I₀) + z + (I₀ − 1)/I₀ − epi/scale =: s.
    let mut s_row = z_row;
    s_row[epi] -= 1.0 / scale;
    let s = sparse(&s_row);
    let s_const = (t0 / i0).ln() + z_const + (i0 - 1.0) / i0;
    // ‖v‖² ≤ s  ⇔  ‖(2v, s − 1)‖ ≤ s + 1.
    let fz = 2.0 / (std::f64::consts::SQRT_2 * LOG_FLOOR);
    let mut a_rows = vec![z.iter().map(|&(j, v)| (j, fz * v)).collect::<SparseRow>()];
    let mut b = vec![fz * z_const];
    let fi = Complex64::new(2.0 / i0.sqrt(), 0.0);
    for y in interference {
        let y = y.scaled(fi);
        a_rows.push(y.re_row());
        b.push(y.constant.re);
        a_rows.push(y.im_row());
        b.push(y.constant.im);
    }
    a_rows.push(s.clone());
    b.push(s_const - 1.0);
    p.cone_constraints.push(ConeConstraint {
        a_rows,
        b,
        c: s,
        d: s_const + 1.0,
    });
}

/// Scalarisation used to trace a front.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FrontMethod {
    /// Grid nodes are threshold triples; the objective's own entry is ignored.
    EpsilonConstraint { objective: Metric },
    /// Grid nodes are weight triples.
    WeightedSum,
    /// Grid nodes hold the two slack fractions in their first entries.
    Lexicographic { priority: [Metric; 3] },
}

impl FrontMethod {
    pub fn name(&self) -> &'static str {
        match self {
            FrontMethod::EpsilonConstraint { .. } => "epsilon_constraint",
            FrontMethod::WeightedSum => "weighted_sum",
            FrontMethod::Lexicographic { .. } => "lexicographic",
        }
    }
}

/// Solves every grid node (in parallel), drops infeasible nodes, flags
/// dominated points and sorts by communication rate.
pub fn trace_front(method: FrontMethod, grid: &[[f64; 3]], inst: &ParetoInstance) -> Result<Vec<ParetoPoint>> {
    if grid.is_empty() {
        return Err(Error::invalid("grid is empty"));
    }
    inst.validate()?;
    let anchors = match method {
        FrontMethod::WeightedSum => Some(single_objective_optima(inst)?),
        _ => None,
    };
    let starts: Vec<BeamformingSolution> = anchors
        .iter()
        .flatten()
        .filter(|p| p.status != PointStatus::Infeasible)
        .map(|p| p.solution.clone())
        .collect();
    let points = grid
        .par_iter()
        .enumerate()
        .map(|(id, node)| {
            let mut p = match method {
                FrontMethod::EpsilonConstraint { objective } => {
                    let q = QosRequirements {
                        r_com_min: node[0],
                        r_sense_min: node[1],
                        e_min_total: node[2],
                    };
                    solve_constrained(objective, &q, inst)?
                }
                FrontMethod::WeightedSum => {
                    let normalizers = default_normalizers(anchors.as_ref().expect("anchors computed"));
                    solve_weighted_sum(*node, normalizers, &starts, inst)?
                }
                FrontMethod::Lexicographic { priority } => solve_lexicographic(priority, [node[0], node[1]], inst)?,
            };
            p.grid_id = id;
            Ok(p)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut front: Vec<ParetoPoint> = points.into_iter().filter(|p| p.status != PointStatus::Infeasible).collect();
    mark_dominated(&mut front);
    front.sort_by(|a, b| a.comm.total_cmp(&b.comm).then(a.grid_id.cmp(&b.grid_id)));
    Ok(front)
}

/// Sets every `dominated` flag relative to the other points of `points`.
pub fn mark_dominated(points: &mut [ParetoPoint]) {
    let metrics: Vec<[f64; 3]> = points.iter().map(|p| p.metrics()).collect();
    for (i, p) in points.iter_mut().enumerate() {
        p.dominated = metrics.iter().enumerate().any(|(j, m)| j != i && dominates(m, &metrics[i]));
    }
}

pub const FRONT_HEADER: &str = "method,grid_id,comm_bpshz,sense_bpshz,wpt_mw,dominated,status";

/// Writes a front as CSV.
pub fn write_front(points: &[ParetoPoint], method: &FrontMethod, path: &Path) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = String::from(FRONT_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            method.name(),
            p.grid_id,
            p.comm,
            p.sense,
            p.wpt * 1e3,
            p.dominated,
            p.status.as_str()
        ));
    }
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(out.as_bytes()).map_err(io)
}

/// Budget in Watts for a budget in dBm.
pub fn budget_w(dbm: f64) -> f64 {
    dbm_to_watts(dbm)
}
