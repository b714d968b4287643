//! Seeded channel synthesis for the BS / RIS / receiver / target scenario.
//!
//! Geometry follows a flat layout: the BS array lies along the y axis with
//! its broadside facing +x, the RIS (and its co-located sensor array) lies
//! along the x axis facing +y. Angles are measured in the horizontal plane
//! from the array broadside, and only the azimuth enters the spatial
//! frequency of the uniform linear arrays.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::{CMatrix, CVector};
use crate::{dbm_to_watts, Error, Result};

/// Target direction relative to the RIS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetDirection {
    pub azimuth_rad: f64,
    pub elevation_rad: f64,
    pub range_m: f64,
}

/// Distance-power-law exponents for every link class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathlossExponents {
    pub bs_ris: f64,
    pub ris_user: f64,
    pub bs_user: f64,
    pub ris_target: f64,
}

impl Default for PathlossExponents {
    fn default() -> Self {
        PathlossExponents {
            bs_ris: 2.2,
            ris_user: 2.2,
            bs_user: 3.6,
            ris_target: 2.0,
        }
    }
}

/// Scenario geometry, array sizes and channel statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub n_tx: usize,
    pub n_ris: usize,
    pub n_sensors: usize,
    pub n_irs: usize,
    pub n_ers: usize,
    pub bs_position: [f64; 3],
    pub ris_position: [f64; 3],
    pub ir_center: [f64; 3],
    pub er_center: [f64; 3],
    /// Receivers are dropped uniformly in a disc of this radius around their cluster center.
    pub cluster_radius_m: f64,
    pub target: TargetDirection,
    /// Rician factor of the BS–RIS and RIS–receiver links.
    pub rician_k_db: f64,
    pub pathloss: PathlossExponents,
    pub ref_gain_db: f64,
    pub noise_power_dbm: f64,
    /// Mean radar cross-section of the target in m².
    pub rcs_m2: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n_tx: 8,
            n_ris: 100,
            n_sensors: 10,
            n_irs: 2,
            n_ers: 2,
            bs_position: [0.0, 0.0, 2.5],
            ris_position: [30.0, 0.0, 2.5],
            ir_center: [30.0, 50.0, 0.0],
            er_center: [30.0, 5.0, 0.0],
            cluster_radius_m: 2.0,
            target: TargetDirection {
                azimuth_rad: -30f64.to_radians(),
                elevation_rad: 40f64.to_radians(),
                range_m: 50.0,
            },
            rician_k_db: 3.0,
            pathloss: PathlossExponents::default(),
            ref_gain_db: -30.0,
            noise_power_dbm: -90.0,
            rcs_m2: 0.5,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n_tx", self.n_tx),
            ("n_ris", self.n_ris),
            ("n_sensors", self.n_sensors),
            ("n_irs", self.n_irs),
            ("n_ers", self.n_ers),
        ] {
            if v == 0 {
                return Err(Error::field(name, "must be at least 1"));
            }
        }
        if !(self.target.range_m > 0.0) {
            return Err(Error::field("target.range_m", "must be positive"));
        }
        if !(self.cluster_radius_m >= 0.0) {
            return Err(Error::field("cluster_radius_m", "must be nonnegative"));
        }
        let p = &self.pathloss;
        for (name, v) in [
            ("pathloss.bs_ris", p.bs_ris),
            ("pathloss.ris_user", p.ris_user),
            ("pathloss.bs_user", p.bs_user),
            ("pathloss.ris_target", p.ris_target),
        ] {
            if !(v >= 1.0) {
                return Err(Error::field(name, "path-loss exponent must be >= 1"));
            }
        }
        if !(self.rcs_m2 >= 0.0) {
            return Err(Error::field("rcs_m2", "must be nonnegative"));
        }
        for (name, v) in [
            ("rician_k_db", self.rician_k_db),
            ("ref_gain_db", self.ref_gain_db),
            ("noise_power_dbm", self.noise_power_dbm),
        ] {
            if !v.is_finite() {
                return Err(Error::field(name, "must be finite"));
            }
        }
        Ok(())
    }

    pub fn noise_power_w(&self) -> f64 {
        dbm_to_watts(self.noise_power_dbm)
    }

    /// Spatial frequency (radians per element) of the RIS toward the target.
    pub fn target_spatial_frequency(&self) -> f64 {
        PI * self.target.azimuth_rad.sin()
    }
}

/// All channels of one Monte-Carlo realisation.
///
/// The received baseband sample at a user is `h_effᴴ w` with
/// `h_effᴴ = directᴴ + cascadeᴴ · diag(θ) · bs_ris` (see
/// [`crate::metrics::effective_channel`]). The target links are stored as
/// unit-modulus steering vectors; their path gains live in
/// [`crate::metrics::TargetModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSet {
    /// N_r × N_t.
    pub bs_ris: CMatrix,
    pub direct_ir: Vec<CVector>,
    pub direct_er: Vec<CVector>,
    pub ris_ir: Vec<CVector>,
    pub ris_er: Vec<CVector>,
    pub ris_target: CVector,
    pub target_sensor: CVector,
    pub noise_power: f64,
    pub ir_positions: Vec<[f64; 3]>,
    pub er_positions: Vec<[f64; 3]>,
}

impl ChannelSet {
    pub fn n_tx(&self) -> usize {
        self.bs_ris.ncols()
    }

    pub fn n_ris(&self) -> usize {
        self.bs_ris.nrows()
    }

    pub fn n_irs(&self) -> usize {
        self.direct_ir.len()
    }

    pub fn n_ers(&self) -> usize {
        self.direct_er.len()
    }

    pub fn n_sensors(&self) -> usize {
        self.target_sensor.len()
    }
}

/// Unit-modulus phasor vector with phase `i · spatial_frequency` at entry `i`.
pub fn steering_vector(n_elements: usize, spatial_frequency: f64) -> Result<CVector> {
    if n_elements == 0 {
        return Err(Error::invalid("steering vector needs at least one element"));
    }
    Ok(CVector::from_fn(n_elements, |i, _| {
        Complex64::from_polar(1.0, i as f64 * spatial_frequency)
    }))
}

/// Linear power gain `10^(ref_gain_db/10) · d^(−exponent)`.
pub fn path_gain(distance_m: f64, exponent: f64, ref_gain_db: f64) -> Result<f64> {
    if !(distance_m > 0.0) {
        return Err(Error::invalid(format!(
            "path gain needs a positive distance, got {distance_m}"
        )));
    }
    Ok(10f64.powf(ref_gain_db / 10.0) * distance_m.powf(-exponent))
}

/// Circularly symmetric complex Gaussian sample with unit variance.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Rician fading `√gain · (√(K/(K+1)) · los + √(1/(K+1)) · scatter)`.
pub fn sample_rician<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    k_factor_linear: f64,
    los_component: &CMatrix,
    gain: f64,
    rng: &mut R,
) -> Result<CMatrix> {
    if los_component.nrows() != rows || los_component.ncols() != cols {
        return Err(Error::invalid(format!(
            "LoS component is {}x{}, expected {rows}x{cols}",
            los_component.nrows(),
            los_component.ncols()
        )));
    }
    if !(k_factor_linear >= 0.0) || !(gain >= 0.0) {
        return Err(Error::invalid("K-factor and gain must be nonnegative"));
    }
    let los_w = (k_factor_linear / (k_factor_linear + 1.0)).sqrt();
    let nlos_w = (1.0 / (k_factor_linear + 1.0)).sqrt();
    let amp = gain.sqrt();
    // Column-major fill keeps the draw order stable across nalgebra versions.
    let mut out = CMatrix::zeros(rows, cols);
    for c in 0..cols {
        for r in 0..rows {
            let scatter = complex_normal(rng);
            out[(r, c)] = (los_component[(r, c)] * los_w + scatter * nlos_w) * amp;
        }
    }
    Ok(out)
}

fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Azimuth of `to` seen from `from` for an array with the given axis/broadside.
fn azimuth(from: &[f64; 3], to: &[f64; 3], axis: [f64; 2], normal: [f64; 2]) -> f64 {
    let dx = to[0] - from[0];
    let dy = to[1] - from[1];
    let along = dx * axis[0] + dy * axis[1];
    let across = dx * normal[0] + dy * normal[1];
    along.atan2(across)
}

const BS_AXIS: [f64; 2] = [0.0, 1.0];
const BS_NORMAL: [f64; 2] = [1.0, 0.0];
const RIS_AXIS: [f64; 2] = [1.0, 0.0];
const RIS_NORMAL: [f64; 2] = [0.0, 1.0];

fn bs_frequency(bs: &[f64; 3], to: &[f64; 3]) -> f64 {
    PI * azimuth(bs, to, BS_AXIS, BS_NORMAL).sin()
}

fn ris_frequency(ris: &[f64; 3], to: &[f64; 3]) -> f64 {
    PI * azimuth(ris, to, RIS_AXIS, RIS_NORMAL).sin()
}

fn drop_in_disc<R: Rng + ?Sized>(center: &[f64; 3], radius: f64, rng: &mut R) -> [f64; 3] {
    let r = radius * rng.random::<f64>().sqrt();
    let phi = 2.0 * PI * rng.random::<f64>();
    [center[0] + r * phi.cos(), center[1] + r * phi.sin(), center[2]]
}

fn rayleigh_vector<R: Rng + ?Sized>(n: usize, gain: f64, rng: &mut R) -> CVector {
    let amp = gain.sqrt();
    CVector::from_fn(n, |_, _| complex_normal(rng) * amp)
}

fn rician_vector<R: Rng + ?Sized>(
    los: &CVector,
    k_linear: f64,
    gain: f64,
    rng: &mut R,
) -> Result<CVector> {
    let n = los.len();
    let los_m = CMatrix::from_column_slice(n, 1, los.as_slice());
    let m = sample_rician(n, 1, k_linear, &los_m, gain, rng)?;
    Ok(CVector::from_column_slice(m.as_slice()))
}

/// Draws every link of one realisation from `cfg.seed`.
pub fn build_scenario_channels(cfg: &ScenarioConfig) -> Result<ChannelSet> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pl = &cfg.pathloss;
    let k_lin = 10f64.powf(cfg.rician_k_db / 10.0);
    let bs = &cfg.bs_position;
    let ris = &cfg.ris_position;

    let ir_positions: Vec<[f64; 3]> = (0..cfg.n_irs)
        .map(|_| drop_in_disc(&cfg.ir_center, cfg.cluster_radius_m, &mut rng))
        .collect();
    let er_positions: Vec<[f64; 3]> = (0..cfg.n_ers)
        .map(|_| drop_in_disc(&cfg.er_center, cfg.cluster_radius_m, &mut rng))
        .collect();

    let g_gain = path_gain(distance(bs, ris), pl.bs_ris, cfg.ref_gain_db)?;
    let arrive = steering_vector(cfg.n_ris, ris_frequency(ris, bs))?;
    let depart = steering_vector(cfg.n_tx, bs_frequency(bs, ris))?;
    let g_los = &arrive * depart.adjoint();
    let bs_ris = sample_rician(cfg.n_ris, cfg.n_tx, k_lin, &g_los, g_gain, &mut rng)?;

    let mut links = |positions: &[[f64; 3]]| -> Result<(Vec<CVector>, Vec<CVector>)> {
        let mut direct = Vec::with_capacity(positions.len());
        let mut cascade = Vec::with_capacity(positions.len());
        for p in positions {
            let d_gain = path_gain(distance(bs, p), pl.bs_user, cfg.ref_gain_db)?;
            direct.push(rayleigh_vector(cfg.n_tx, d_gain, &mut rng));
            let r_gain = path_gain(distance(ris, p), pl.ris_user, cfg.ref_gain_db)?;
            let los = steering_vector(cfg.n_ris, ris_frequency(ris, p))?;
            cascade.push(rician_vector(&los, k_lin, r_gain, &mut rng)?);
        }
        Ok((direct, cascade))
    };
    let (direct_ir, ris_ir) = links(&ir_positions)?;
    let (direct_er, ris_er) = links(&er_positions)?;

    let f_target = cfg.target_spatial_frequency();
    Ok(ChannelSet {
        bs_ris,
        direct_ir,
        direct_er,
        ris_ir,
        ris_er,
        ris_target: steering_vector(cfg.n_ris, f_target)?,
        target_sensor: steering_vector(cfg.n_sensors, f_target)?,
        noise_power: cfg.noise_power_w(),
        ir_positions,
        er_positions,
    })
}

/// Euclidean BS–RIS distance of a scenario.
pub fn bs_ris_distance(cfg: &ScenarioConfig) -> f64 {
    distance(&cfg.bs_position, &cfg.ris_position)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn steering_examples() {
        let v = steering_vector(4, 0.0).unwrap();
        assert!(v.iter().all(|x| close(*x, Complex64::new(1.0, 0.0))));

        let v = steering_vector(2, PI).unwrap();
        assert!(close(v[0], Complex64::new(1.0, 0.0)));
        assert!(close(v[1], Complex64::new(-1.0, 0.0)));

        let v = steering_vector(4, PI / 2.0).unwrap();
        let expect = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)];
        for (x, (re, im)) in v.iter().zip(expect) {
            assert!(close(*x, Complex64::new(re, im)));
        }
        assert!(steering_vector(0, 0.3).is_err());
    }

    #[test]
    fn path_gain_examples() {
        assert!((path_gain(1.0, 2.2, -30.0).unwrap() - 1e-3).abs() < 1e-18);
        assert!((path_gain(10.0, 2.0, -30.0).unwrap() / 1e-5 - 1.0).abs() < 1e-12);
        assert!((path_gain(100.0, 2.0, -30.0).unwrap() / 1e-7 - 1.0).abs() < 1e-12);
        assert!(path_gain(0.0, 2.0, -30.0).is_err());
        assert!(path_gain(-1.0, 2.0, -30.0).is_err());
        let ratio = path_gain(7.0, 2.0, -30.0).unwrap() / path_gain(14.0, 2.0, -30.0).unwrap();
        assert!((ratio - 4.0).abs() < 1e-12);
    }

    #[test]
    fn rician_large_k_is_los() {
        let los = CMatrix::from_fn(3, 2, |r, c| Complex64::from_polar(1.0, 0.3 * (r + 2 * c) as f64));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let gain = 2.5;
        let h = sample_rician(3, 2, 1e12, &los, gain, &mut rng).unwrap();
        let reference = &los * Complex64::new(gain.sqrt(), 0.0);
        assert!((&h - &reference).norm() / reference.norm() < 1e-5);
    }

    #[test]
    fn rician_deviation_scales_like_inverse_sqrt_k() {
        let los = CMatrix::from_element(16, 4, Complex64::new(1.0, 0.0));
        for k in [1e4, 1e8] {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let h = sample_rician(16, 4, k, &los, 1.0, &mut rng).unwrap();
            let rel = (&h - &los).norm() / los.norm();
            // E‖scatter‖/‖los‖ = 1/√(K+1); allow a generous constant.
            assert!(rel < 3.0 / k.sqrt(), "K={k}: rel={rel}");
            assert!(rel > 0.1 / k.sqrt(), "K={k}: rel={rel}");
        }
    }

    #[test]
    fn rician_shape_mismatch() {
        let los = CMatrix::from_element(2, 2, Complex64::new(1.0, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_rician(3, 2, 1.0, &los, 1.0, &mut rng).is_err());
    }

    #[test]
    fn rayleigh_unit_power_monte_carlo() {
        // Oracle: average of raw Gaussian draws, independent of the Rician mixing.
        let los = CMatrix::from_element(1000, 100, Complex64::new(1.0, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = sample_rician(1000, 100, 0.0, &los, 1.0, &mut rng).unwrap();
        let mean_power = h.iter().map(|x| x.norm_sqr()).sum::<f64>() / 1e5;
        assert!((mean_power - 1.0).abs() < 0.02, "{mean_power}");
    }

    #[test]
    fn scenario_shapes_and_determinism() {
        let cfg = ScenarioConfig {
            n_ris: 100,
            n_tx: 8,
            seed: 42,
            ..Default::default()
        };
        let a = build_scenario_channels(&cfg).unwrap();
        let b = build_scenario_channels(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.bs_ris.nrows(), a.bs_ris.ncols()), (100, 8));
        assert_eq!(a.direct_ir.len(), 2);
        assert_eq!(a.ris_er[1].len(), 100);
        assert_eq!(a.target_sensor.len(), 10);
        assert!(a.ris_target.iter().all(|x| (x.norm() - 1.0).abs() < 1e-12));
        assert!(a.noise_power > 0.0);
        assert!((bs_ris_distance(&cfg) - 30.0).abs() < 1e-12);

        let c = build_scenario_channels(&ScenarioConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a.bs_ris, c.bs_ris);
    }

    #[test]
    fn bs_ris_link_uses_thirty_metres() {
        // With K → ∞ the BS–RIS matrix is the scaled LoS term, so every entry has
        // modulus √pg(30 m).
        let cfg = ScenarioConfig {
            rician_k_db: 150.0,
            n_ris: 4,
            n_tx: 2,
            ..Default::default()
        };
        let ch = build_scenario_channels(&cfg).unwrap();
        let expected = path_gain(30.0, 2.2, -30.0).unwrap().sqrt();
        for x in ch.bs_ris.iter() {
            assert!((x.norm() / expected - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn invalid_scenarios_rejected() {
        let bad = ScenarioConfig {
            n_tx: 0,
            ..Default::default()
        };
        assert!(build_scenario_channels(&bad).is_err());
        let mut bad = ScenarioConfig::default();
        bad.pathloss.bs_user = 0.5;
        assert!(bad.validate().is_err());
        let mut bad = ScenarioConfig::default();
        bad.target.range_m = 0.0;
        assert!(bad.validate().is_err());
    }
}
