//! Construction of the convexified SOCP around a reference point.

use num_complex::Complex64;

use crate::channel::ChannelSet;
use crate::conic::{ConeConstraint, LinearEquality, SocpProblem, SparseRow};
use crate::linalg::{CMatrix, CVector, ZERO};
use crate::metrics::{BeamformingSolution, QosRequirements, TargetModel};
use crate::protocol::{power_requirement, ProtocolConfig};
use crate::{Error, Result};

/// Affine functional `x ↦ 2·Re{gᴴx} + constant`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineLowerBound {
    pub g: CVector,
    pub constant: f64,
}

impl AffineLowerBound {
    pub fn eval(&self, x: &CVector) -> f64 {
        2.0 * self.g.dotc(x).re + self.constant
    }
}

/// First-order minorant of `|aᴴx|²` at `x_ref`:
/// `x ↦ 2·Re{x_refᴴ a aᴴ x} − |aᴴx_ref|²`.
pub fn sca_linearize_quadratic(a: &CVector, x_ref: &CVector) -> Result<AffineLowerBound> {
    if a.len() != x_ref.len() {
        return Err(Error::invalid(format!(
            "vector lengths differ: {} and {}",
            a.len(),
            x_ref.len()
        )));
    }
    let proj = a.dotc(x_ref);
    Ok(AffineLowerBound {
        g: a * proj,
        constant: -proj.norm_sqr(),
    })
}

/// Positions of the decision variables inside the real SOCP vector.
///
/// Complex unknowns occupy consecutive `(Re, Im)` pairs: beam `k`, antenna
/// `i` sits at slot `k·N_t + i`, the normalised coefficient of the `q`-th
/// reflecting element at slot `K·N_t + q`. The epigraph variable of the
/// transmit power is the last real entry.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableLayout {
    pub n_tx: usize,
    pub n_beams: usize,
    /// RIS element index of every phase slot; empty when phases are fixed.
    pub phase_elements: Vec<usize>,
}

impl VariableLayout {
    /// Layout used by [`super::build_joint_socp`].
    pub fn joint(ch: &ChannelSet, protocol: &ProtocolConfig) -> Self {
        VariableLayout {
            n_tx: ch.n_tx(),
            n_beams: ch.n_irs(),
            phase_elements: protocol.reflecting_indices(),
        }
    }

    pub fn beam_slot(&self, k: usize, i: usize) -> usize {
        k * self.n_tx + i
    }

    pub fn phase_slot(&self, q: usize) -> usize {
        self.n_beams * self.n_tx + q
    }

    pub fn n_slots(&self) -> usize {
        self.n_beams * self.n_tx + self.phase_elements.len()
    }

    pub fn epigraph(&self) -> usize {
        2 * self.n_slots()
    }

    /// Number of real decision variables, epigraph excluded.
    pub fn n_decision(&self) -> usize {
        2 * self.n_slots()
    }

    pub fn n_vars(&self) -> usize {
        self.n_decision() + 1
    }
}

/// `Σ_s c_s x_s + constant` over complex slots.
#[derive(Debug, Clone, Default)]
pub(crate) struct CAffine {
    pub terms: Vec<(usize, Complex64)>,
    pub constant: Complex64,
}

impl CAffine {
    pub fn eval(&self, x: &[Complex64]) -> Complex64 {
        self.terms.iter().map(|&(s, c)| c * x[s]).sum::<Complex64>() + self.constant
    }

    pub fn scaled(&self, f: Complex64) -> CAffine {
        CAffine {
            terms: self.terms.iter().map(|&(s, c)| (s, c * f)).collect(),
            constant: self.constant * f,
        }
    }

    pub fn re_row(&self) -> SparseRow {
        let mut row = Vec::with_capacity(2 * self.terms.len());
        for &(s, c) in &self.terms {
            row.push((2 * s, c.re));
            row.push((2 * s + 1, -c.im));
        }
        row
    }

    pub fn im_row(&self) -> SparseRow {
        let mut row = Vec::with_capacity(2 * self.terms.len());
        for &(s, c) in &self.terms {
            row.push((2 * s, c.im));
            row.push((2 * s + 1, c.re));
        }
        row
    }
}

/// Adds `f · row` into a dense accumulator.
pub(crate) fn accumulate(acc: &mut [f64], row: &SparseRow, f: f64) {
    for &(j, v) in row {
        acc[j] += f * v;
    }
}

pub(crate) fn dense_to_sparse(acc: &[f64]) -> SparseRow {
    acc.iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(j, v)| (j, *v))
        .collect()
}

/// Problem data shared by the builders, evaluated at a reference point.
pub(crate) struct Reference<'a> {
    pub ch: &'a ChannelSet,
    pub protocol: &'a ProtocolConfig,
    pub qos: &'a QosRequirements,
    pub target: &'a TargetModel,
    /// Power of the reference beams; the SOCP works with `ŵ = w / √power`.
    pub power: f64,
    /// Reference beams divided by `√power`.
    pub beams: CMatrix,
    /// Unit-modulus reference coefficients of every element.
    pub phasors: CVector,
    pub sensor_gain: f64,
}

impl<'a> Reference<'a> {
    pub fn new(
        sol: &BeamformingSolution,
        ch: &'a ChannelSet,
        protocol: &'a ProtocolConfig,
        qos: &'a QosRequirements,
        target: &'a TargetModel,
    ) -> Result<Self> {
        let power = sol.objective_w;
        if !(power > 0.0) || !power.is_finite() {
            return Err(Error::invalid("reference beams must carry positive finite power"));
        }
        let un = sol.rx_beam.norm();
        let sensor_gain = if un > 0.0 {
            sol.rx_beam.dotc(&ch.target_sensor).norm_sqr() / (un * un)
        } else {
            ch.target_sensor.norm_squared()
        };
        Ok(Reference {
            ch,
            protocol,
            qos,
            target,
            power,
            beams: &sol.tx_beams / Complex64::new(power.sqrt(), 0.0),
            phasors: CVector::from_iterator(
                sol.ris_phases.len(),
                sol.ris_phases.iter().map(|p| Complex64::from_polar(1.0, *p)),
            ),
            sensor_gain,
        })
    }

    /// Linearised `y_j = conj(direct)ᵀŵ_j + a·θ̂ᵀ diag(conj cascade) G ŵ_j`.
    ///
    /// With fixed phases the expression is exact.
    fn received(&self, layout: &VariableLayout, direct: Option<&CVector>, cascade: &CVector, j: usize) -> (CAffine, Complex64) {
        let g = &self.ch.bs_ris;
        let n_tx = layout.n_tx;
        let amp = self.protocol.reflect_amplitude();
        let w0 = self.beams.column(j);
        // Coefficient on ŵ_j: conj(direct) + a Σ_n θ̂0_n conj(r_n) G_n·
        let mut coef = vec![ZERO; n_tx];
        if let Some(d) = direct {
            for i in 0..n_tx {
                coef[i] = d[i].conj();
            }
        }
        let mut value = ZERO;
        let mut terms = Vec::new();
        for n in 0..self.protocol.n_ris {
            if !self.protocol.is_reflecting(n) {
                continue;
            }
            let s = cascade[n].conj() * amp;
            let row = g.row(n);
            let gw0: Complex64 = row.iter().zip(w0.iter()).map(|(a, b)| a * b).sum();
            let th = self.phasors[n];
            for i in 0..n_tx {
                coef[i] += s * th * row[i];
            }
            value += s * th * gw0;
        }
        for (q, &n) in layout.phase_elements.iter().enumerate() {
            let s = cascade[n].conj() * amp;
            let gw0: Complex64 = g.row(n).iter().zip(w0.iter()).map(|(a, b)| a * b).sum();
            terms.push((layout.phase_slot(q), s * gw0));
        }
        let mut y0 = value;
        for i in 0..n_tx {
            terms.push((layout.beam_slot(j, i), coef[i]));
            if let Some(d) = direct {
                y0 += d[i].conj() * w0[i];
            }
        }
        // Subtract the doubly counted bilinear term when phases are variables.
        let constant = if layout.phase_elements.is_empty() { ZERO } else { -value };
        (CAffine { terms, constant }, y0)
    }
}

/// What the builder treats as variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct BuildMode {
    pub phases: bool,
    pub trust_radius: f64,
    pub penalty_weight: f64,
}

pub(crate) struct BuiltSocp {
    pub problem: SocpProblem,
    pub layout: VariableLayout,
}

/// Builds the convex surrogate at `reference`. Returns `None`-free problems;
/// thresholds equal to zero simply drop the corresponding constraint.
pub(crate) fn build(reference: &Reference, mode: BuildMode) -> Result<BuiltSocp> {
    let ch = reference.ch;
    let protocol = reference.protocol;
    let qos = reference.qos;
    let k_beams = reference.beams.ncols();
    let layout = VariableLayout {
        n_tx: ch.n_tx(),
        n_beams: k_beams,
        phase_elements: if mode.phases { protocol.reflecting_indices() } else { Vec::new() },
    };
    let n_vars = layout.n_vars();
    let mut p = SocpProblem::new(n_vars);
    let epi = layout.epigraph();
    p.objective[epi] = 1.0;
    let sigma2 = ch.noise_power;
    let ts = protocol.time_share();

    // (i) SINR at every information receiver.
    let gamma_c = qos.comm_sinr_threshold(ts);
    if gamma_c > 0.0 {
        let cy = (reference.power / sigma2).sqrt();
        let sg = gamma_c.sqrt();
        for k in 0..ch.n_irs() {
            let mut a_rows = Vec::new();
            let mut b = Vec::new();
            let mut desired = None;
            for j in 0..k_beams {
                let (y, _) = reference.received(&layout, Some(&ch.direct_ir[k]), &ch.ris_ir[k], j);
                let y = y.scaled(Complex64::new(cy, 0.0));
                if j == k {
                    desired = Some(y);
                } else {
                    a_rows.push(y.re_row());
                    b.push(y.constant.re);
                    a_rows.push(y.im_row());
                    b.push(y.constant.im);
                }
            }
            a_rows.push(Vec::new());
            b.push(1.0);
            let desired = desired.ok_or_else(|| Error::invalid("fewer beams than receivers"))?;
            p.linear_eqs.push(LinearEquality {
                a: desired.im_row(),
                rhs: -desired.constant.im,
            });
            p.cone_constraints.push(ConeConstraint {
                a_rows,
                b,
                c: desired.re_row().into_iter().map(|(j, v)| (j, v / sg)).collect(),
                d: desired.constant.re / sg,
            });
        }
    }

    // (ii) sensing SNR: Σ_k |z_k|² lower-bounded at the reference.
    let gamma_s = qos.sense_snr_threshold(ts);
    if gamma_s > 0.0 {
        let scale = reference.target.two_way_gain * reference.sensor_gain * reference.power / sigma2 / gamma_s;
        let mut acc = vec![0.0; n_vars];
        let mut constant = 0.0;
        for j in 0..k_beams {
            let (z, z0) = reference.received(&layout, None, &ch.ris_target, j);
            let lin = z.scaled(z0.conj());
            accumulate(&mut acc, &lin.re_row(), 2.0 * scale);
            constant += scale * (2.0 * lin.constant.re - z0.norm_sqr());
        }
        p.cone_constraints.push(ConeConstraint::nonnegative(dense_to_sparse(&acc), constant - 1.0));
    }

    // (iii) power harvested at the energy receivers.
    if qos.e_min_total > 0.0 {
        let scale = ts * protocol.eta * reference.power / qos.e_min_total;
        let mut acc = vec![0.0; n_vars];
        let mut constant = 0.0;
        for m in 0..ch.n_ers() {
            for j in 0..k_beams {
                let (y, y0) = reference.received(&layout, Some(&ch.direct_er[m]), &ch.ris_er[m], j);
                let lin = y.scaled(y0.conj());
                accumulate(&mut acc, &lin.re_row(), 2.0 * scale);
                constant += scale * (2.0 * lin.constant.re - y0.norm_sqr());
            }
        }
        p.cone_constraints.push(ConeConstraint::nonnegative(dense_to_sparse(&acc), constant - 1.0));
    }

    // (iv) RIS self-power; independent of the phases.
    let p_req = power_requirement(protocol);
    if p_req > 0.0 {
        let harvest = protocol.harvesting_indices();
        let scale = protocol.harvest_factor() * reference.power / p_req;
        let mut acc = vec![0.0; n_vars];
        let mut constant = 0.0;
        let g = &ch.bs_ris;
        for j in 0..k_beams {
            let w0 = reference.beams.column(j);
            let mut coef = vec![ZERO; layout.n_tx];
            for &n in &harvest {
                let row = g.row(n);
                let u: Complex64 = row.iter().zip(w0.iter()).map(|(a, b)| a * b).sum();
                for i in 0..layout.n_tx {
                    coef[i] += u.conj() * row[i];
                }
                constant -= scale * u.norm_sqr();
            }
            let lin = CAffine {
                terms: (0..layout.n_tx).map(|i| (layout.beam_slot(j, i), coef[i])).collect(),
                constant: ZERO,
            };
            accumulate(&mut acc, &lin.re_row(), 2.0 * scale);
        }
        p.cone_constraints.push(ConeConstraint::nonnegative(dense_to_sparse(&acc), constant - 1.0));
    }

    // (v) modulus bounds and per-element trust region on the phases.
    for (q, &n) in layout.phase_elements.iter().enumerate() {
        let s = layout.phase_slot(q);
        let th0 = reference.phasors[n];
        p.cone_constraints.push(ConeConstraint {
            a_rows: vec![vec![(2 * s, 1.0)], vec![(2 * s + 1, 1.0)]],
            b: vec![0.0, 0.0],
            c: Vec::new(),
            d: 1.0,
        });
        if mode.trust_radius.is_finite() {
            p.cone_constraints.push(ConeConstraint {
                a_rows: vec![vec![(2 * s, 1.0)], vec![(2 * s + 1, 1.0)]],
                b: vec![-th0.re, -th0.im],
                c: Vec::new(),
                d: mode.trust_radius,
            });
        }
        if mode.penalty_weight > 0.0 {
            // Linearised penalty weight · (1 − |θ̂|²).
            p.objective[2 * s] -= 2.0 * mode.penalty_weight * th0.re;
            p.objective[2 * s + 1] -= 2.0 * mode.penalty_weight * th0.im;
        }
    }

    // Epigraph of the normalised transmit power: ‖ŵ‖² ≤ t.
    let mut a_rows: Vec<SparseRow> = (0..2 * k_beams * layout.n_tx).map(|v| vec![(v, 2.0)]).collect();
    let mut b = vec![0.0; a_rows.len()];
    a_rows.push(vec![(epi, 1.0)]);
    b.push(-1.0);
    p.cone_constraints.push(ConeConstraint {
        a_rows,
        b,
        c: vec![(epi, 1.0)],
        d: 1.0,
    });
    Ok(BuiltSocp { problem: p, layout })
}

/// Maps an SOCP solution back to beams and phases.
pub(crate) fn decode(
    x: &[f64],
    layout: &VariableLayout,
    reference: &Reference,
    previous_phases: &[f64],
) -> (CMatrix, Vec<f64>) {
    let sp = reference.power.sqrt();
    let beams = CMatrix::from_fn(layout.n_tx, layout.n_beams, |i, k| {
        let s = layout.beam_slot(k, i);
        Complex64::new(x[2 * s], x[2 * s + 1]) * sp
    });
    let mut phases = previous_phases.to_vec();
    for (q, &n) in layout.phase_elements.iter().enumerate() {
        let s = layout.phase_slot(q);
        let v = Complex64::new(x[2 * s], x[2 * s + 1]);
        if v.norm() > 1e-9 {
            phases[n] = v.arg();
        }
    }
    (beams, phases)
}
