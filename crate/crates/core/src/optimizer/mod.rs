//! Transmit-power minimisation by alternating optimisation.
//!
//! Each outer iteration refreshes the sensor combiner in closed form, solves
//! the exact beamforming SOCP for the current phases, and then runs SCA steps
//! that update beams and phases jointly through a linearised SOCP. A joint
//! step is kept only if, after projecting the coefficients back to the
//! protocol modulus and rescaling the beams to the smallest feasible power,
//! the exact metrics hold and the power went down.

mod build;

use std::f64::consts::TAU;

use log::debug;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use build::{sca_linearize_quadratic, AffineLowerBound, VariableLayout};
use build::{build, decode, BuildMode, Reference};
pub(crate) use build::{accumulate, dense_to_sparse, CAffine};

use crate::channel::ChannelSet;
use crate::conic::{generalized_rayleigh_max, normalize_phase, solve_socp, SocpProblem, SocpStatus};
use crate::linalg::{dominant_right_singular, CMatrix, CVector};
use crate::metrics::{
    comm_sinr, effective_channel, evaluate_slacks, harvested_power_ers, ris_incident_powers,
    sensing_snr, target_illumination, BeamformingSolution, QosRequirements, SlackRecord, TargetModel,
};
use crate::protocol::{power_requirement, reflection_profile, ris_harvested_power, ProtocolConfig};
use crate::{dbm_to_watts, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum InitStrategy {
    RandomPhases,
    #[default]
    AlignedPhases,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveOptions {
    pub max_ao_iters: usize,
    /// Joint SCA steps per outer iteration.
    pub max_sca_iters: usize,
    /// Relative power decrease below which an outer iteration counts as converged.
    pub convergence_tol: f64,
    pub init_strategy: InitStrategy,
    /// Weight of the linearised `Σ(1 − |θ̂_n|²)` term promoting unit modulus.
    pub penalty_weight: f64,
    pub seed: u64,
    /// Initialisations needing more transmit power than this are declared infeasible.
    pub power_cap_dbm: f64,
    /// Initial per-element trust radius on the normalised coefficients.
    pub trust_radius: f64,
    pub socp_tol: f64,
    /// Stop as soon as the transmit power is at or below this value (Watts).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_power_w: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_ao_iters: 50,
            max_sca_iters: 10,
            convergence_tol: 1e-4,
            init_strategy: InitStrategy::AlignedPhases,
            penalty_weight: 1e-3,
            seed: 0,
            power_cap_dbm: 100.0,
            trust_radius: 0.5,
            socp_tol: 1e-8,
            target_power_w: None,
        }
    }
}

pub const MIN_TRUST_RADIUS: f64 = 1e-3;
const TRUST_SHRINK: f64 = 0.5;
const TRUST_GROW: f64 = 1.5;
const MAX_TRUST_RADIUS: f64 = 1.0;

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_ao_iters == 0 {
            return Err(Error::field("solver.max_ao_iters", "must be at least 1"));
        }
        if self.max_sca_iters == 0 {
            return Err(Error::field("solver.max_sca_iters", "must be at least 1"));
        }
        for (name, v) in [
            ("solver.convergence_tol", self.convergence_tol),
            ("solver.trust_radius", self.trust_radius),
            ("solver.socp_tol", self.socp_tol),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::field(name, "must be positive and finite"));
            }
        }
        if !(self.penalty_weight >= 0.0) || !self.penalty_weight.is_finite() {
            return Err(Error::field("solver.penalty_weight", "must be nonnegative and finite"));
        }
        if self.power_cap_dbm.is_nan() {
            return Err(Error::field("solver.power_cap_dbm", "must be a number"));
        }
        if let Some(t) = self.target_power_w {
            if !(t >= 0.0) {
                return Err(Error::field("solver.target_power_w", "must be nonnegative"));
            }
        }
        Ok(())
    }

    pub fn power_cap_w(&self) -> f64 {
        dbm_to_watts(self.power_cap_dbm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    IterationCap,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub solution: BeamformingSolution,
    /// Transmit power after initialisation and after every outer iteration, Watts.
    pub objective_trace: Vec<f64>,
    pub status: SolveStatus,
    pub constraint_slacks: SlackRecord,
    pub ao_iterations: usize,
    pub socp_solves: usize,
}

/// Initial point and whether it satisfies every constraint within the power cap.
#[derive(Debug, Clone, PartialEq)]
pub struct Initialization {
    pub solution: BeamformingSolution,
    pub feasible: bool,
}

/// Slack record of `sol`, computed with the exact metrics.
pub fn check_feasibility(
    sol: &BeamformingSolution,
    ch: &ChannelSet,
    protocol: &ProtocolConfig,
    qos: &QosRequirements,
    target: &TargetModel,
) -> Result<SlackRecord> {
    evaluate_slacks(sol, ch, protocol, qos, target)
}

/// Receive combiner maximising the sensing SNR for white sensor noise.
pub fn update_receive_beamformer(
    sol: &BeamformingSolution,
    ch: &ChannelSet,
    protocol: &ProtocolConfig,
    target: &TargetModel,
) -> Result<CVector> {
    let noise = CMatrix::identity(ch.n_sensors(), ch.n_sensors()) * Complex64::new(ch.noise_power, 0.0);
    receive_beamformer_with_noise(sol, ch, protocol, target, &noise)
}

/// Receive combiner for an arbitrary Hermitian positive-definite noise covariance.
pub fn receive_beamformer_with_noise(
    sol: &BeamformingSolution,
    ch: &ChannelSet,
    protocol: &ProtocolConfig,
    target: &TargetModel,
    noise_cov: &CMatrix,
) -> Result<CVector> {
    let a_ts = &ch.target_sensor;
    let profile = reflection_profile(protocol, &sol.ris_phases)?;
    let echo = target.two_way_gain * target_illumination(sol, ch, &profile)?;
    let default = || normalize_phase(a_ts / Complex64::new(a_ts.norm(), 0.0));
    if !(echo > 0.0) {
        // Still validates the noise covariance.
        generalized_rayleigh_max(&(a_ts * a_ts.adjoint()), noise_cov)?;
        return Ok(default());
    }
    let a = a_ts * a_ts.adjoint() * Complex64::new(echo, 0.0);
    let (_, u) = generalized_rayleigh_max(&a, noise_cov)?;
    Ok(u)
}

/// Smallest `α²` such that scaling every beam by `α` satisfies all constraints.
///
/// Every constraint is homogeneous of degree two in the beams except the
/// SINR, whose noise term gives `α² ≥ γσ² / (S − γI)`. Returns infinity when
/// no scaling works.
pub fn minimum_power_scale(
    sol: &BeamformingSolution,
    ch: &ChannelSet,
    protocol: &ProtocolConfig,
    qos: &QosRequirements,
    target: &TargetModel,
) -> Result<f64> {
    let profile = reflection_profile(protocol, &sol.ris_phases)?;
    let ts = protocol.time_share();
    let mut need: f64 = 0.0;
    let ratio = |req: f64, val: f64| -> f64 {
        if req <= 0.0 {
            0.0
        } else if val > 0.0 {
            req / val
        } else {
            f64::INFINITY
        }
    };
    let gamma_c = qos.comm_sinr_threshold(ts);
    if gamma_c > 0.0 {
        for k in 0..ch.n_irs() {
            let h = effective_channel(&ch.direct_ir[k], &ch.ris_ir[k], &profile, &ch.bs_ris)?;
            let powers: Vec<f64> = (0..sol.n_beams())
                .map(|j| h.dotc(&sol.tx_beams.column(j).into_owned()).norm_sqr())
                .collect();
            let interference: f64 = powers.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, v)| v).sum();
            need = need.max(ratio(gamma_c * ch.noise_power, powers[k] - gamma_c * interference));
        }
    }
    let gamma_s = qos.sense_snr_threshold(ts);
    if gamma_s > 0.0 {
        need = need.max(ratio(gamma_s, sensing_snr(sol, ch, &profile, target)?));
    }
    if qos.e_min_total > 0.0 {
        need = need.max(ratio(qos.e_min_total, harvested_power_ers(sol, ch, &profile, protocol.eta)?));
    }
    let p_req = power_requirement(protocol);
    if p_req > 0.0 {
        let incident = ris_incident_powers(sol, ch)?;
        need = need.max(ratio(p_req, ris_harvested_power(protocol, &profile, &incident)?));
    }
    Ok(need)
}

/// Rescales the beams to the smallest power meeting every constraint.
fn rescale(
    mut sol: BeamformingSolution,
    ch: &ChannelSet,
    protocol: &ProtocolConfig,
    qos: &QosRequirements,
    target: &TargetModel,
) -> Result<Option<BeamformingSolution>> {
    let alpha2 = minimum_power_scale(&sol, ch, protocol, qos, target)?;
    if !alpha2.is_finite() {
        return Ok(None);
    }
    // A relative margin keeps the binding constraint on the feasible side of rounding.
    let alpha = (alpha2 * (1.0 + 1e-9)).sqrt();
    sol.tx_beams *= Complex64::new(alpha, 0.0);
    sol.refresh_objective();
    Ok(Some(sol))
}

/// Phases co-phasing the reflected path to information receiver 0 with its direct path.
fn aligned_phases(ch: &ChannelSet, protocol: &ProtocolConfig) -> Vec<f64> {
    let g = &ch.bs_ris;
    let v = dominant_right_singular(g);
    let incident = g * &v;
    let (direct_phase, cascade) = match (ch.direct_ir.first(), ch.ris_ir.first()) {
        (Some(d), Some(r)) => (d.dotc(&v).arg(), r.clone()),
        _ => (0.0, CVector::from_element(protocol.n_ris, Complex64::new(1.0, 0.0))),
    };
    (0..protocol.n_ris)
        .map(|n| crate::metrics::wrap_phase(direct_phase - (cascade[n].conj() * incident[n]).arg()))
        .collect()
}

/// Unit-norm beam directions: matched filters, or zero-forcing when the
/// matched filters cannot reach the SINR target at any power.
fn beam_directions(ch: &ChannelSet, protocol: &ProtocolConfig, phases: &[f64], gamma_c: f64) -> Result<CMatrix> {
    let profile = reflection_profile(protocol, phases)?;
    let k = ch.n_irs();
    let n_tx = ch.n_tx();
    let h: Vec<CVector> = (0..k)
        .map(|i| effective_channel(&ch.direct_ir[i], &ch.ris_ir[i], &profile, &ch.bs_ris))
        .collect::<Result<_>>()?;
    let unit = |v: CVector| {
        let n = v.norm();
        if n > 0.0 {
            v / Complex64::new(n, 0.0)
        } else {
            CVector::from_element(v.len(), Complex64::new(1.0 / (v.len() as f64).sqrt(), 0.0))
        }
    };
    let mf = CMatrix::from_columns(&h.iter().cloned().map(unit).collect::<Vec<_>>());
    let interference_ok = (0..k).all(|i| {
        let s = h[i].dotc(&mf.column(i).into_owned()).norm_sqr();
        let inter: f64 = (0..k)
            .filter(|&j| j != i)
            .map(|j| h[i].dotc(&mf.column(j).into_owned()).norm_sqr())
            .sum();
        s > gamma_c * inter * (1.0 + 1e-6)
    });
    if interference_ok || k > n_tx {
        return Ok(mf);
    }
    // W = H (HᴴH)⁻¹ with H = [h_1 … h_K].
    let hm = CMatrix::from_columns(&h);
    let gram = hm.adjoint() * &hm;
    match gram.try_inverse() {
        Some(inv) => {
            let zf = &hm * inv;
            Ok(CMatrix::from_columns(
                &(0..k).map(|i| unit(zf.column(i).into_owned())).collect::<Vec<_>>(),
            ))
        }
        None => Ok(mf),
    }
}

/// Initial phases, beams and combiner.
///
/// Beams start along matched filters (zero-forcing if interference-limited)
/// and are scaled to the smallest power satisfying every constraint; the
/// point is infeasible if that power exceeds the cap or no scaling works.
pub fn init_solution(
    ch: &ChannelSet,
    protocol: &ProtocolConfig,
    qos: &QosRequirements,
    target: &TargetModel,
    opts: &SolveOptions,
) -> Result<Initialization> {
    protocol.validate()?;
    qos.validate()?;
    opts.validate()?;
    if protocol.n_ris != ch.n_ris() {
        return Err(Error::invalid(format!(
            "protocol has {} elements, channels have {}",
            protocol.n_ris,
            ch.n_ris()
        )));
    }
    let phases = match opts.init_strategy {
        InitStrategy::AlignedPhases => aligned_phases(ch, protocol),
        InitStrategy::RandomPhases => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            (0..protocol.n_ris).map(|_| rng.random::<f64>() * TAU).collect()
        }
    };
    let gamma_c = qos.comm_sinr_threshold(protocol.time_share());
    let dirs = beam_directions(ch, protocol, &phases, gamma_c)?;
    let u0 = ch.target_sensor.clone();
    let mut sol = BeamformingSolution::new(dirs, phases, u0);
    sol.rx_beam = update_receive_beamformer(&sol, ch, protocol, target)?;
    match rescale(sol.clone(), ch, protocol, qos, target)? {
        Some(s) => {
            let feasible = s.objective_w <= opts.power_cap_w();
            Ok(Initialization { solution: s, feasible })
        }
        None => Ok(Initialization { solution: sol, feasible: false }),
    }
}

/// Convex surrogate of the power-minimisation problem around `solution_ref`,
/// with beams and the reflecting coefficients as variables.
///
/// Variables follow [`VariableLayout`]; the problem minimises the normalised
/// transmit power `Σ_k ‖w_k‖² / P_ref` where `P_ref` is the reference power.
pub fn build_joint_socp(
    solution_ref: &BeamformingSolution,
    ch: &ChannelSet,
    protocol: &ProtocolConfig,
    qos: &QosRequirements,
    target: &TargetModel,
    opts: &SolveOptions,
) -> Result<SocpProblem> {
    let reference = Reference::new(solution_ref, ch, protocol, qos, target)?;
    let mode = BuildMode {
        phases: true,
        trust_radius: opts.trust_radius,
        penalty_weight: opts.penalty_weight,
    };
    Ok(build(&reference, mode)?.problem)
}

/// Rotates every beam so that its own receiver sees a real positive sample.
fn rotate_beams(sol: &mut BeamformingSolution, ch: &ChannelSet, protocol: &ProtocolConfig) -> Result<()> {
    let profile = reflection_profile(protocol, &sol.ris_phases)?;
    for k in 0..ch.n_irs().min(sol.n_beams()) {
        let h = effective_channel(&ch.direct_ir[k], &ch.ris_ir[k], &profile, &ch.bs_ris)?;
        let y = h.dotc(&sol.beam(k));
        if y.norm() > 0.0 {
            let rot = y.conj() / y.norm();
            sol.tx_beams.column_mut(k).iter_mut().for_each(|v| *v *= rot);
        }
    }
    Ok(())
}

struct Solver<'a> {
    ch: &'a ChannelSet,
    protocol: &'a ProtocolConfig,
    qos: &'a QosRequirements,
    target: &'a TargetModel,
    opts: &'a SolveOptions,
    socp_solves: usize,
}

impl<'a> Solver<'a> {
    /// One SOCP step from `current`; returns the rescaled candidate.
    fn step(&mut self, current: &BeamformingSolution, mode: BuildMode) -> Result<Option<BeamformingSolution>> {
        let mut reference_sol = current.clone();
        rotate_beams(&mut reference_sol, self.ch, self.protocol)?;
        let reference = Reference::new(&reference_sol, self.ch, self.protocol, self.qos, self.target)?;
        let built = build(&reference, mode)?;
        self.socp_solves += 1;
        let sol = solve_socp(&built.problem, self.opts.socp_tol)?;
        if sol.status == SocpStatus::Infeasible || sol.x.iter().any(|v| !v.is_finite()) {
            return Ok(None);
        }
        let (beams, phases) = decode(&sol.x, &built.layout, &reference, &reference_sol.ris_phases);
        let mut cand = BeamformingSolution::new(beams, phases, current.rx_beam.clone());
        cand.rx_beam = update_receive_beamformer(&cand, self.ch, self.protocol, self.target)?;
        if !(cand.objective_w > 0.0) {
            return Ok(None);
        }
        let scaled = rescale(cand.clone(), self.ch, self.protocol, self.qos, self.target)?;
        let mut out = scaled.clone();
        if mode.phases {
            // Exact beam update at the projected phases repairs linearisation error
            // that a uniform rescaling cannot (interference-limited SINR).
            let fixed = BuildMode {
                phases: false,
                trust_radius: f64::INFINITY,
                penalty_weight: 0.0,
            };
            if let Some(refined) = self.step(&cand, fixed)? {
                if out.as_ref().is_none_or(|o| refined.objective_w < o.objective_w) {
                    out = Some(refined);
                }
            }
        }
        log::trace!(
            "sca step (phases: {}, radius {:.3e}): socp {:?} after {} iterations, power {:.4e} -> {:?}",
            mode.phases,
            mode.trust_radius,
            sol.status,
            sol.iterations,
            current.objective_w,
            out.as_ref().map(|o| o.objective_w)
        );
        Ok(out)
    }
}

/// Minimises the transmit power from the default initialisation.
pub fn ao_solve(
    ch: &ChannelSet,
    protocol: &ProtocolConfig,
    qos: &QosRequirements,
    target: &TargetModel,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    let init = init_solution(ch, protocol, qos, target, opts)?;
    if !init.feasible {
        let slacks = check_feasibility(&init.solution, ch, protocol, qos, target)?;
        let mut solution = init.solution;
        solution.slacks = Some(slacks.clone());
        return Ok(SolveReport {
            objective_trace: vec![solution.objective_w],
            solution,
            status: SolveStatus::Infeasible,
            constraint_slacks: slacks,
            ao_iterations: 0,
            socp_solves: 0,
        });
    }
    ao_solve_from(init.solution, ch, protocol, qos, target, opts)
}

/// Minimises the transmit power starting from `start`.
///
/// `start` is first rescaled to its smallest feasible power; if no scaling
/// makes it feasible the report is `Infeasible`.
pub fn ao_solve_from(
    start: BeamformingSolution,
    ch: &ChannelSet,
    protocol: &ProtocolConfig,
    qos: &QosRequirements,
    target: &TargetModel,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    opts.validate()?;
    qos.validate()?;
    protocol.validate()?;
    if start.tx_beams.nrows() != ch.n_tx() || start.n_beams() != ch.n_irs() || start.ris_phases.len() != ch.n_ris() {
        return Err(Error::invalid("starting point does not match the channel dimensions"));
    }
    let mut start = start;
    start.rx_beam = update_receive_beamformer(&start, ch, protocol, target)?;
    let Some(mut current) = rescale(start.clone(), ch, protocol, qos, target)? else {
        let slacks = check_feasibility(&start, ch, protocol, qos, target)?;
        return Ok(SolveReport {
            objective_trace: vec![start.objective_w],
            solution: BeamformingSolution { slacks: Some(slacks.clone()), ..start },
            status: SolveStatus::Infeasible,
            constraint_slacks: slacks,
            ao_iterations: 0,
            socp_solves: 0,
        });
    };
    let mut solver = Solver {
        ch,
        protocol,
        qos,
        target,
        opts,
        socp_solves: 0,
    };
    let mut trace = vec![current.objective_w];
    let mut status = SolveStatus::IterationCap;
    let mut radius = opts.trust_radius.min(MAX_TRUST_RADIUS);
    let mut ao_iterations = 0;
    let tiny = 1e-30;
    let reached_target = |p: f64| opts.target_power_w.is_some_and(|t| p <= t);

    for it in 0..opts.max_ao_iters {
        ao_iterations = it + 1;
        let before = current.objective_w;
        if before <= tiny || reached_target(before) {
            status = SolveStatus::Converged;
            trace.push(current.objective_w);
            break;
        }
        current.rx_beam = update_receive_beamformer(&current, ch, protocol, target)?;

        // Exact beamforming update for the current phases.
        let fixed = BuildMode {
            phases: false,
            trust_radius: f64::INFINITY,
            penalty_weight: 0.0,
        };
        if let Some(cand) = solver.step(&current, fixed)? {
            if cand.objective_w < current.objective_w {
                current = cand;
            }
        }

        // Joint SCA steps.
        let mut stagnated = false;
        for _ in 0..opts.max_sca_iters {
            if current.objective_w <= tiny || reached_target(current.objective_w) {
                break;
            }
            let mode = BuildMode {
                phases: true,
                trust_radius: radius,
                penalty_weight: opts.penalty_weight,
            };
            let prev = current.objective_w;
            match solver.step(&current, mode)? {
                Some(cand) if cand.objective_w < prev => {
                    current = cand;
                    radius = (radius * TRUST_GROW).min(MAX_TRUST_RADIUS);
                    if (prev - current.objective_w) / prev < opts.convergence_tol {
                        break;
                    }
                }
                _ => {
                    radius *= TRUST_SHRINK;
                    if radius < MIN_TRUST_RADIUS {
                        stagnated = true;
                        break;
                    }
                }
            }
        }
        trace.push(current.objective_w);
        debug!(
            "ao iteration {it}: power {:.6e} W, trust radius {radius:.3e}",
            current.objective_w
        );
        let change = (before - current.objective_w) / before;
        if change < opts.convergence_tol || stagnated || reached_target(current.objective_w) {
            status = SolveStatus::Converged;
            break;
        }
    }
    current.rx_beam = update_receive_beamformer(&current, ch, protocol, target)?;
    let slacks = check_feasibility(&current, ch, protocol, qos, target)?;
    current.slacks = Some(slacks.clone());
    Ok(SolveReport {
        solution: current,
        objective_trace: trace,
        status,
        constraint_slacks: slacks,
        ao_iterations,
        socp_solves: solver.socp_solves,
    })
}

/// Exact SINR of every receiver, exposed for reporting.
pub fn receiver_sinrs(sol: &BeamformingSolution, ch: &ChannelSet, protocol: &ProtocolConfig) -> Result<Vec<f64>> {
    let profile = reflection_profile(protocol, &sol.ris_phases)?;
    (0..ch.n_irs()).map(|k| comm_sinr(k, sol, ch, &profile)).collect()
}
