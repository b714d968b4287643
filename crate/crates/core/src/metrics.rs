//! Communication rate, sensing rate and harvested power of a beamforming design.

use serde::{Deserialize, Serialize};

use crate::channel::{path_gain, ChannelSet, ScenarioConfig};
use crate::linalg::{dotc, norm_sqr, CMatrix, CVector};
use crate::protocol::{ProtocolConfig, ReflectionProfile};
use crate::{Error, Result};

/// Quality-of-service thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QosRequirements {
    /// Minimum rate at every information receiver, bps/Hz.
    pub r_com_min: f64,
    /// Minimum sensing rate, bps/Hz.
    pub r_sense_min: f64,
    /// Minimum harvested power summed over the energy receivers, Watts.
    pub e_min_total: f64,
}

impl Default for QosRequirements {
    fn default() -> Self {
        QosRequirements {
            r_com_min: 1.0,
            r_sense_min: 0.2,
            e_min_total: 0.5e-3,
        }
    }
}

impl QosRequirements {
    pub const NONE: QosRequirements = QosRequirements {
        r_com_min: 0.0,
        r_sense_min: 0.0,
        e_min_total: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("qos.r_com_min", self.r_com_min),
            ("qos.r_sense_min", self.r_sense_min),
            ("qos.e_min_total", self.e_min_total),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::field(name, "must be finite and nonnegative"));
            }
        }
        Ok(())
    }

    pub fn comm_sinr_threshold(&self, time_share: f64) -> f64 {
        sinr_threshold(self.r_com_min, time_share)
    }

    pub fn sense_snr_threshold(&self, time_share: f64) -> f64 {
        sinr_threshold(self.r_sense_min, time_share)
    }
}

/// SINR needed so that `time_share · log2(1 + SINR) ≥ rate`.
pub fn sinr_threshold(rate: f64, time_share: f64) -> f64 {
    if rate <= 0.0 {
        return 0.0;
    }
    if time_share <= 0.0 {
        return f64::INFINITY;
    }
    (rate / time_share).exp2() - 1.0
}

/// Target echo model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetModel {
    /// Mean radar cross-section, m².
    pub rcs_mean: f64,
    /// Power gain of the RIS → target → sensor round trip, RCS included.
    pub two_way_gain: f64,
}

impl TargetModel {
    pub fn from_scenario(cfg: &ScenarioConfig) -> Result<Self> {
        let one_way = path_gain(cfg.target.range_m, cfg.pathloss.ris_target, cfg.ref_gain_db)?;
        Ok(TargetModel {
            rcs_mean: cfg.rcs_m2,
            two_way_gain: cfg.rcs_m2 * one_way * one_way,
        })
    }
}

/// Per-constraint residuals in natural units; nonnegative means satisfied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlackRecord {
    /// Rate minus requirement at each information receiver (bps/Hz).
    pub comm: Vec<f64>,
    /// Sensing rate minus requirement (bps/Hz).
    pub sense: f64,
    /// Harvested power at the energy receivers minus requirement (W).
    pub wpt: f64,
    /// Power harvested by the RIS minus its consumption (W).
    pub ris_power: f64,
}

impl SlackRecord {
    pub fn min(&self) -> f64 {
        self.comm
            .iter()
            .copied()
            .chain([self.sense, self.wpt, self.ris_power])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn satisfied(&self, tol: f64) -> bool {
        self.min() >= -tol
    }
}

/// Transmit beams, RIS phases and sensor combiner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamformingSolution {
    /// N_t × K, one column per information receiver.
    pub tx_beams: CMatrix,
    /// Phases in [0, 2π).
    pub ris_phases: Vec<f64>,
    /// Unit-norm receive beamformer at the sensors.
    pub rx_beam: CVector,
    /// Σ_k ‖w_k‖² in Watts.
    pub objective_w: f64,
    pub slacks: Option<SlackRecord>,
}

impl BeamformingSolution {
    pub fn new(tx_beams: CMatrix, ris_phases: Vec<f64>, rx_beam: CVector) -> Self {
        let objective_w = tx_beams.iter().map(|x| x.norm_sqr()).sum();
        BeamformingSolution {
            tx_beams,
            ris_phases: ris_phases.into_iter().map(wrap_phase).collect(),
            rx_beam,
            objective_w,
            slacks: None,
        }
    }

    pub fn n_beams(&self) -> usize {
        self.tx_beams.ncols()
    }

    pub fn beam(&self, k: usize) -> CVector {
        self.tx_beams.column(k).into_owned()
    }

    pub fn refresh_objective(&mut self) {
        self.objective_w = self.tx_beams.iter().map(|x| x.norm_sqr()).sum();
    }
}

/// Maps a phase into [0, 2π).
pub fn wrap_phase(p: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let w = p.rem_euclid(tau);
    if w >= tau {
        0.0
    } else {
        w
    }
}

fn check_shapes(sol: &BeamformingSolution, ch: &ChannelSet, profile: &ReflectionProfile) -> Result<()> {
    if sol.tx_beams.nrows() != ch.n_tx() {
        return Err(Error::invalid(format!(
            "beams have {} rows, channels have {} antennas",
            sol.tx_beams.nrows(),
            ch.n_tx()
        )));
    }
    if profile.coefficients.len() != ch.n_ris() {
        return Err(Error::invalid(format!(
            "profile has {} coefficients, channels have {} elements",
            profile.coefficients.len(),
            ch.n_ris()
        )));
    }
    Ok(())
}

/// `h_eff = direct + bs_risᴴ · (conj(coeff) ⊙ cascade)`, so the received sample is `h_effᴴ w`.
pub fn effective_channel(
    direct: &CVector,
    cascade: &CVector,
    profile: &ReflectionProfile,
    bs_ris: &CMatrix,
) -> Result<CVector> {
    let (n_ris, n_tx) = bs_ris.shape();
    if direct.len() != n_tx || cascade.len() != n_ris || profile.coefficients.len() != n_ris {
        return Err(Error::invalid(format!(
            "dimension mismatch: direct {}, cascade {}, coefficients {}, bs_ris {n_ris}x{n_tx}",
            direct.len(),
            cascade.len(),
            profile.coefficients.len()
        )));
    }
    let weighted = cascade.zip_map(&profile.coefficients, |r, c| c.conj() * r);
    Ok(direct + bs_ris.adjoint() * weighted)
}

/// `|h_effᴴ w_j|²` for every beam `j`.
fn received_powers(h_eff: &CVector, beams: &CMatrix) -> Vec<f64> {
    (0..beams.ncols())
        .map(|j| dotc(h_eff, &beams.column(j).into_owned()).norm_sqr())
        .collect()
}

/// SINR at information receiver `k`.
pub fn comm_sinr(
    k: usize,
    sol: &BeamformingSolution,
    ch: &ChannelSet,
    profile: &ReflectionProfile,
) -> Result<f64> {
    check_shapes(sol, ch, profile)?;
    if k >= ch.n_irs() || k >= sol.n_beams() {
        return Err(Error::invalid(format!("receiver index {k} out of range")));
    }
    let h = effective_channel(&ch.direct_ir[k], &ch.ris_ir[k], profile, &ch.bs_ris)?;
    let p = received_powers(&h, &sol.tx_beams);
    let interference: f64 = p.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, v)| v).sum();
    Ok(p[k] / (interference + ch.noise_power))
}

/// Achievable rate at information receiver `k` in bps/Hz.
pub fn comm_rate(
    k: usize,
    sol: &BeamformingSolution,
    ch: &ChannelSet,
    profile: &ReflectionProfile,
) -> Result<f64> {
    Ok(profile.time_share * comm_sinr(k, sol, ch, profile)?.ln_1p() / std::f64::consts::LN_2)
}

/// Σ_k |a_rtᴴ · diag(coeff) · G · w_k|², the illumination power steered at the target.
pub fn target_illumination(sol: &BeamformingSolution, ch: &ChannelSet, profile: &ReflectionProfile) -> Result<f64> {
    check_shapes(sol, ch, profile)?;
    let steer = ch.ris_target.zip_map(&profile.coefficients, |a, c| a.conj() * c);
    let incident = &ch.bs_ris * &sol.tx_beams;
    Ok((0..incident.ncols())
        .map(|k| {
            steer
                .iter()
                .zip(incident.column(k).iter())
                .map(|(s, x)| s * x)
                .sum::<num_complex::Complex64>()
                .norm_sqr()
        })
        .sum())
}

/// Echo SNR at the sensor combiner output.
pub fn sensing_snr(
    sol: &BeamformingSolution,
    ch: &ChannelSet,
    profile: &ReflectionProfile,
    target: &TargetModel,
) -> Result<f64> {
    let u_norm = sol.rx_beam.norm();
    if !(u_norm > 0.0) {
        return Err(Error::invalid("receive beamformer has zero norm"));
    }
    if sol.rx_beam.len() != ch.n_sensors() {
        return Err(Error::invalid("receive beamformer length differs from sensor count"));
    }
    let gain = dotc(&sol.rx_beam, &ch.target_sensor).norm_sqr() / (u_norm * u_norm);
    let illum = target_illumination(sol, ch, profile)?;
    Ok(target.two_way_gain * gain * illum / ch.noise_power)
}

/// Sensing rate in bps/Hz.
pub fn sensing_rate(
    sol: &BeamformingSolution,
    ch: &ChannelSet,
    profile: &ReflectionProfile,
    target: &TargetModel,
) -> Result<f64> {
    Ok(profile.time_share * sensing_snr(sol, ch, profile, target)?.ln_1p() / std::f64::consts::LN_2)
}

/// Total power harvested by the energy receivers (linear harvesting model).
pub fn harvested_power_ers(
    sol: &BeamformingSolution,
    ch: &ChannelSet,
    profile: &ReflectionProfile,
    eta: f64,
) -> Result<f64> {
    check_shapes(sol, ch, profile)?;
    let mut total = 0.0;
    for (direct, cascade) in ch.direct_er.iter().zip(&ch.ris_er) {
        let g = effective_channel(direct, cascade, profile, &ch.bs_ris)?;
        total += received_powers(&g, &sol.tx_beams).iter().sum::<f64>();
    }
    Ok(profile.time_share * eta * total)
}

/// Incident power on every RIS element, `Σ_k |[G w_k]_n|²`.
pub fn ris_incident_powers(sol: &BeamformingSolution, ch: &ChannelSet) -> Result<Vec<f64>> {
    if sol.tx_beams.nrows() != ch.n_tx() {
        return Err(Error::invalid("beam length differs from antenna count"));
    }
    let incident = &ch.bs_ris * &sol.tx_beams;
    Ok(incident.row_iter().map(|row| row.iter().map(|x| x.norm_sqr()).sum()).collect())
}

/// Evaluates every QoS and self-powering residual with the exact metrics.
pub fn evaluate_slacks(
    sol: &BeamformingSolution,
    ch: &ChannelSet,
    protocol: &ProtocolConfig,
    qos: &QosRequirements,
    target: &TargetModel,
) -> Result<SlackRecord> {
    let profile = crate::protocol::reflection_profile(protocol, &sol.ris_phases)?;
    let comm = (0..ch.n_irs())
        .map(|k| comm_rate(k, sol, ch, &profile).map(|r| r - qos.r_com_min))
        .collect::<Result<Vec<_>>>()?;
    let sense = sensing_rate(sol, ch, &profile, target)? - qos.r_sense_min;
    let wpt = harvested_power_ers(sol, ch, &profile, protocol.eta)? - qos.e_min_total;
    let incident = ris_incident_powers(sol, ch)?;
    let ris_power = crate::protocol::self_power_feasible(protocol, &profile, &incident)?.slack;
    Ok(SlackRecord {
        comm,
        sense,
        wpt,
        ris_power,
    })
}

/// Sum of squared norms of the beams.
pub fn total_power(beams: &CMatrix) -> f64 {
    beams.iter().map(|x| x.norm_sqr()).sum()
}

/// `‖v‖²` re-exported for callers that hold vectors.
pub fn vector_power(v: &CVector) -> f64 {
    norm_sqr(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{build_scenario_channels, complex_normal};
    use crate::linalg::ZERO;
    use crate::protocol::{reflection_profile, ProtocolVariant};
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> CVector {
        CVector::from_fn(n, |_, _| complex_normal(rng))
    }

    fn random_mat(r: usize, cc: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        CMatrix::from_fn(r, cc, |_, _| complex_normal(rng))
    }

    fn profile_from(coeff: CVector, time_share: f64) -> ReflectionProfile {
        let n = coeff.len();
        ReflectionProfile {
            coefficients: coeff,
            harvest_mask: vec![false; n],
            time_share,
        }
    }

    /// Minimal single-IR, single-ER channel set with no RIS contribution.
    fn toy_channels(h: CVector, noise: f64) -> ChannelSet {
        let n_tx = h.len();
        ChannelSet {
            bs_ris: CMatrix::zeros(1, n_tx),
            direct_ir: vec![h.clone()],
            direct_er: vec![h],
            ris_ir: vec![CVector::zeros(1)],
            ris_er: vec![CVector::zeros(1)],
            ris_target: CVector::from_element(1, c(1.0, 0.0)),
            target_sensor: CVector::from_element(1, c(1.0, 0.0)),
            noise_power: noise,
            ir_positions: vec![],
            er_positions: vec![],
        }
    }

    #[test]
    fn effective_channel_zero_coefficients_is_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let direct = random_vec(4, &mut rng);
        let cascade = random_vec(6, &mut rng);
        let g = random_mat(6, 4, &mut rng);
        let prof = profile_from(CVector::zeros(6), 1.0);
        let h = effective_channel(&direct, &cascade, &prof, &g).unwrap();
        assert_eq!(h, direct);
    }

    #[test]
    fn effective_channel_single_element() {
        let g = CMatrix::from_row_slice(1, 3, &[c(1.0, 2.0), c(0.5, -1.0), c(0.0, 3.0)]);
        let r = CVector::from_element(1, c(0.3, -0.7));
        let prof = profile_from(CVector::from_element(1, c(1.0, 0.0)), 1.0);
        let h = effective_channel(&CVector::zeros(3), &r, &prof, &g).unwrap();
        for i in 0..3 {
            assert!((h[i] - r[0] * g[(0, i)].conj()).norm() < 1e-15);
        }
        // The received sample equals the physical cascade conj(r)·θ·(G w).
        let w = CVector::from_vec(vec![c(0.2, 0.1), c(-1.0, 0.4), c(0.3, 0.3)]);
        let y = dotc(&h, &w);
        let physical = r[0].conj() * (g.row(0) * &w)[0];
        assert!((y - physical).norm() < 1e-14);
    }

    #[test]
    fn effective_channel_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let direct = random_vec(4, &mut rng);
        let cascade = random_vec(4, &mut rng);
        let g = random_mat(4, 4, &mut rng);
        let coeff = random_vec(4, &mut rng);
        let prof = profile_from(coeff.clone(), 1.0);
        let h = effective_channel(&direct, &cascade, &prof, &g).unwrap();
        for t in 0..4 {
            let mut acc = direct[t];
            for n in 0..4 {
                acc += g[(n, t)].conj() * coeff[n].conj() * cascade[n];
            }
            assert!((h[t] - acc).norm() < 1e-12);
        }
        assert!(effective_channel(&direct, &random_vec(3, &mut rng), &prof, &g).is_err());
    }

    #[test]
    fn comm_rate_examples() {
        let h = CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0)]);
        let noise = 2.0;
        let ch = toy_channels(h.clone(), noise);
        let prof = profile_from(CVector::zeros(1), 1.0);
        // |hᴴw|² = σ² = 2 → SINR 1 → rate 1.
        let w = &h * c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let sol = BeamformingSolution::new(
            CMatrix::from_column_slice(2, 1, w.as_slice()),
            vec![0.0],
            CVector::from_element(1, c(1.0, 0.0)),
        );
        assert!((comm_rate(0, &sol, &ch, &prof).unwrap() - 1.0).abs() < 1e-12);

        let zero = BeamformingSolution::new(CMatrix::zeros(2, 1), vec![0.0], CVector::from_element(1, c(1.0, 0.0)));
        assert_eq!(comm_rate(0, &zero, &ch, &prof).unwrap(), 0.0);
        assert!(comm_rate(3, &zero, &ch, &prof).is_err());
    }

    #[test]
    fn orthogonal_interference_vanishes() {
        let h1 = CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let h2 = CVector::from_vec(vec![c(0.0, 0.0), c(1.0, 0.0)]);
        let mut ch = toy_channels(h1.clone(), 1.0);
        ch.direct_ir.push(h2);
        ch.ris_ir.push(CVector::zeros(1));
        let prof = profile_from(CVector::zeros(1), 1.0);
        let beams = CMatrix::from_column_slice(2, 2, &[c(2.0, 0.0), ZERO, ZERO, c(0.0, 3.0)]);
        let sol = BeamformingSolution::new(beams.clone(), vec![0.0], CVector::from_element(1, c(1.0, 0.0)));
        let single = BeamformingSolution::new(beams.columns(0, 1).into_owned(), vec![0.0], CVector::from_element(1, c(1.0, 0.0)));
        let ch_single = toy_channels(h1, 1.0);
        let r2 = comm_rate(0, &sol, &ch, &prof).unwrap();
        let r1 = comm_rate(0, &single, &ch_single, &prof).unwrap();
        assert!((r1 - r2).abs() < 1e-14);
        assert!((r1 - 5f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn sensing_examples() {
        let cfg = ScenarioConfig {
            n_ris: 12,
            n_tx: 4,
            seed: 9,
            ..Default::default()
        };
        let ch = build_scenario_channels(&cfg).unwrap();
        let proto = ProtocolConfig::new(ProtocolVariant::PowerSplitting, 0.6, 12).unwrap();
        let prof = reflection_profile(&proto, &[0.4; 12]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let beams = random_mat(4, 2, &mut rng) * c(10.0, 0.0);
        let aligned = ch.target_sensor.normalize();
        let sol = BeamformingSolution::new(beams.clone(), vec![0.4; 12], aligned.clone());

        let silent = TargetModel { rcs_mean: 0.0, two_way_gain: 0.0 };
        assert_eq!(sensing_rate(&sol, &ch, &prof, &silent).unwrap(), 0.0);

        let target = TargetModel::from_scenario(&cfg).unwrap();
        let best = sensing_rate(&sol, &ch, &prof, &target).unwrap();
        for _ in 0..50 {
            let u = random_vec(10, &mut rng).normalize();
            let other = BeamformingSolution::new(beams.clone(), vec![0.4; 12], u);
            assert!(sensing_rate(&other, &ch, &prof, &target).unwrap() <= best * (1.0 + 1e-12));
        }
        // Global phase on the combiner is irrelevant.
        let rotated = BeamformingSolution::new(beams.clone(), vec![0.4; 12], &aligned * Complex64::from_polar(1.0, 1.1));
        let r = sensing_rate(&rotated, &ch, &prof, &target).unwrap();
        assert!((r - best).abs() <= 1e-12 * best.max(1e-300));

        let zero_u = BeamformingSolution::new(beams, vec![0.4; 12], CVector::zeros(10));
        assert!(sensing_rate(&zero_u, &ch, &prof, &target).is_err());

        assert!((sinr_threshold(0.2, 1.0) - 0.148_698_354_997_035).abs() < 1e-12);
    }

    #[test]
    fn harvested_power_examples() {
        let h = CVector::from_vec(vec![c(1.0, 0.0)]);
        let ch = toy_channels(h, 1.0);
        let prof = profile_from(CVector::zeros(1), 1.0);
        let zero = BeamformingSolution::new(CMatrix::zeros(1, 1), vec![0.0], CVector::from_element(1, c(1.0, 0.0)));
        assert_eq!(harvested_power_ers(&zero, &ch, &prof, 0.8).unwrap(), 0.0);
        // |gᴴw|² = 0.625 mW.
        let w = CMatrix::from_element(1, 1, c(0.625e-3f64.sqrt(), 0.0));
        let sol = BeamformingSolution::new(w, vec![0.0], CVector::from_element(1, c(1.0, 0.0)));
        assert!((harvested_power_ers(&sol, &ch, &prof, 0.8).unwrap() - 0.5e-3).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = random_vec(3, &mut rng);
        let ch = toy_channels(g.clone(), 1.0);
        let w = random_vec(3, &mut rng);
        let sol = BeamformingSolution::new(CMatrix::from_column_slice(3, 1, w.as_slice()), vec![0.0], CVector::from_element(1, c(1.0, 0.0)));
        let mut acc = ZERO;
        for i in 0..3 {
            acc += g[i].conj() * w[i];
        }
        let expected = 0.8 * acc.norm_sqr();
        assert!((harvested_power_ers(&sol, &ch, &prof, 0.8).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn incident_power_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let cfg = ScenarioConfig { n_ris: 5, n_tx: 3, ..Default::default() };
        let mut ch = build_scenario_channels(&cfg).unwrap();
        let zero = BeamformingSolution::new(CMatrix::zeros(3, 2), vec![0.0; 5], CVector::from_element(10, c(1.0, 0.0)));
        assert!(ris_incident_powers(&zero, &ch).unwrap().iter().all(|p| *p == 0.0));

        let w = random_mat(3, 2, &mut rng);
        ch.bs_ris = random_mat(5, 3, &mut rng);
        let sol = BeamformingSolution::new(w.clone(), vec![0.0; 5], CVector::from_element(10, c(1.0, 0.0)));
        let got = ris_incident_powers(&sol, &ch).unwrap();
        for n in 0..5 {
            let mut acc = 0.0;
            for k in 0..2 {
                let mut s = ZERO;
                for t in 0..3 {
                    s += ch.bs_ris[(n, t)] * w[(t, k)];
                }
                acc += s.norm_sqr();
            }
            assert!((got[n] - acc).abs() < 1e-12);
        }

        ch.bs_ris = CMatrix::identity(5, 3);
        let got = ris_incident_powers(&sol, &ch).unwrap();
        for t in 0..3 {
            let expect: f64 = (0..2).map(|k| w[(t, k)].norm_sqr()).sum();
            assert!((got[t] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn metrics_scale_with_beam_power() {
        let cfg = ScenarioConfig { n_ris: 8, n_tx: 4, seed: 3, ..Default::default() };
        let ch = build_scenario_channels(&cfg).unwrap();
        let proto = ProtocolConfig::new(ProtocolVariant::TimeSplitting, 0.7, 8).unwrap();
        let prof = reflection_profile(&proto, &[1.0; 8]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let beams = random_mat(4, 2, &mut rng);
        let u = ch.target_sensor.normalize();
        let base = BeamformingSolution::new(beams.clone(), vec![1.0; 8], u.clone());
        let scaled = BeamformingSolution::new(&beams * c(3.0, 0.0), vec![1.0; 8], u);
        let e0 = harvested_power_ers(&base, &ch, &prof, 0.8).unwrap();
        let e1 = harvested_power_ers(&scaled, &ch, &prof, 0.8).unwrap();
        assert!((e1 / e0 - 9.0).abs() < 1e-12);
        let i0: f64 = ris_incident_powers(&base, &ch).unwrap().iter().sum();
        let i1: f64 = ris_incident_powers(&scaled, &ch).unwrap().iter().sum();
        assert!((i1 / i0 - 9.0).abs() < 1e-12);
    }
}
