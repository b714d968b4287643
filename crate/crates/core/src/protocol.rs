//! RIS operating protocols: element splitting (ES), time splitting (TS) and
//! power splitting (PS).
//!
//! The splitting factor `rho` is the share devoted to reflection: the share
//! of elements (ES), of the time slot (TS) or of the received power (PS).
//! The remainder feeds the energy harvester that powers the surface itself.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::CVector;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProtocolVariant {
    #[serde(rename = "ES")]
    ElementSplitting,
    #[serde(rename = "TS")]
    TimeSplitting,
    #[serde(rename = "PS")]
    PowerSplitting,
}

impl ProtocolVariant {
    pub const ALL: [ProtocolVariant; 3] = [
        ProtocolVariant::ElementSplitting,
        ProtocolVariant::TimeSplitting,
        ProtocolVariant::PowerSplitting,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            ProtocolVariant::ElementSplitting => "ES",
            ProtocolVariant::TimeSplitting => "TS",
            ProtocolVariant::PowerSplitting => "PS",
        }
    }
}

impl fmt::Display for ProtocolVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for ProtocolVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "ES" => Ok(ProtocolVariant::ElementSplitting),
            "TS" => Ok(ProtocolVariant::TimeSplitting),
            "PS" => Ok(ProtocolVariant::PowerSplitting),
            _ => Err(Error::invalid(format!(
                "unknown protocol `{s}` (expected ES, TS or PS)"
            ))),
        }
    }
}

/// Protocol parameters and RIS power constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub variant: ProtocolVariant,
    pub rho: f64,
    pub n_ris: usize,
    /// Constant circuit power P_c in Watts.
    pub p_circuit: f64,
    /// Power drawn by each reflecting element, P_e, in Watts.
    pub p_element: f64,
    /// Harvesting efficiency at the RIS and at the energy receivers.
    pub eta: f64,
}

pub const DEFAULT_P_CIRCUIT_W: f64 = 50e-3;
pub const DEFAULT_P_ELEMENT_W: f64 = 2e-6;
pub const DEFAULT_ETA: f64 = 0.8;

impl ProtocolConfig {
    pub fn new(variant: ProtocolVariant, rho: f64, n_ris: usize) -> Result<Self> {
        let cfg = ProtocolConfig {
            variant,
            rho,
            n_ris,
            p_circuit: DEFAULT_P_CIRCUIT_W,
            p_element: DEFAULT_P_ELEMENT_W,
            eta: DEFAULT_ETA,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::field("rho", format!("{} is outside [0, 1]", self.rho)));
        }
        if self.n_ris == 0 {
            return Err(Error::field("n_ris", "must be at least 1"));
        }
        if !(self.p_circuit >= 0.0) {
            return Err(Error::field("p_circuit", "must be nonnegative"));
        }
        if !(self.p_element >= 0.0) {
            return Err(Error::field("p_element", "must be nonnegative"));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::field("eta", "must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Number of reflecting elements. ES rounds `rho · N_r` to the nearest integer.
    pub fn n_reflect(&self) -> usize {
        match self.variant {
            ProtocolVariant::ElementSplitting => {
                ((self.rho * self.n_ris as f64).round() as usize).min(self.n_ris)
            }
            _ => self.n_ris,
        }
    }

    pub fn n_harvest(&self) -> usize {
        match self.variant {
            ProtocolVariant::ElementSplitting => self.n_ris - self.n_reflect(),
            _ => self.n_ris,
        }
    }

    /// The splitting factor actually realised (differs from `rho` under ES rounding).
    pub fn realized_rho(&self) -> f64 {
        match self.variant {
            ProtocolVariant::ElementSplitting => self.n_reflect() as f64 / self.n_ris as f64,
            _ => self.rho,
        }
    }

    /// Modulus of every reflecting coefficient.
    pub fn reflect_amplitude(&self) -> f64 {
        match self.variant {
            ProtocolVariant::PowerSplitting => self.rho.sqrt(),
            _ => 1.0,
        }
    }

    /// Fraction of the slot during which the surface reflects.
    pub fn time_share(&self) -> f64 {
        match self.variant {
            ProtocolVariant::TimeSplitting => self.rho,
            _ => 1.0,
        }
    }

    /// Whether element `n` reflects. ES harvests on the trailing indices.
    pub fn is_reflecting(&self, n: usize) -> bool {
        match self.variant {
            ProtocolVariant::ElementSplitting => n < self.n_reflect(),
            _ => true,
        }
    }

    /// Indices of reflecting elements, in order.
    pub fn reflecting_indices(&self) -> Vec<usize> {
        (0..self.n_ris).filter(|&n| self.is_reflecting(n)).collect()
    }

    /// Indices of elements feeding the harvester.
    pub fn harvesting_indices(&self) -> Vec<usize> {
        match self.variant {
            ProtocolVariant::ElementSplitting => (self.n_reflect()..self.n_ris).collect(),
            _ if self.rho < 1.0 => (0..self.n_ris).collect(),
            _ => Vec::new(),
        }
    }

    /// Multiplier applied to the summed incident power on the harvesting
    /// elements to obtain the harvested power.
    pub fn harvest_factor(&self) -> f64 {
        match self.variant {
            ProtocolVariant::ElementSplitting => self.eta,
            _ => self.eta * (1.0 - self.rho),
        }
    }
}

/// Per-element reflection coefficients for one protocol configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionProfile {
    pub coefficients: CVector,
    pub harvest_mask: Vec<bool>,
    pub time_share: f64,
}

/// Power the RIS must harvest to stay operational.
pub fn power_requirement(cfg: &ProtocolConfig) -> f64 {
    match cfg.variant {
        ProtocolVariant::ElementSplitting => {
            cfg.p_circuit + cfg.n_reflect() as f64 * cfg.p_element
        }
        ProtocolVariant::TimeSplitting | ProtocolVariant::PowerSplitting => {
            cfg.p_circuit + cfg.rho * cfg.n_ris as f64 * cfg.p_element
        }
    }
}

/// Builds `e^{j·phase}` coefficients scaled and masked according to the protocol.
pub fn reflection_profile(cfg: &ProtocolConfig, phases: &[f64]) -> Result<ReflectionProfile> {
    if phases.len() != cfg.n_ris {
        return Err(Error::invalid(format!(
            "expected {} phases, got {}",
            cfg.n_ris,
            phases.len()
        )));
    }
    let amp = cfg.reflect_amplitude();
    let coefficients = CVector::from_fn(cfg.n_ris, |n, _| {
        if cfg.is_reflecting(n) {
            Complex64::from_polar(amp, phases[n])
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let mut harvest_mask = vec![false; cfg.n_ris];
    for n in cfg.harvesting_indices() {
        harvest_mask[n] = true;
    }
    Ok(ReflectionProfile {
        coefficients,
        harvest_mask,
        time_share: cfg.time_share(),
    })
}

/// Power harvested by the RIS from per-element incident powers (Watts).
pub fn ris_harvested_power(
    cfg: &ProtocolConfig,
    profile: &ReflectionProfile,
    incident_powers: &[f64],
) -> Result<f64> {
    if incident_powers.len() != cfg.n_ris || profile.harvest_mask.len() != cfg.n_ris {
        return Err(Error::invalid(format!(
            "expected {} incident powers, got {}",
            cfg.n_ris,
            incident_powers.len()
        )));
    }
    if let Some(p) = incident_powers.iter().find(|p| !(**p >= 0.0)) {
        return Err(Error::invalid(format!("incident power {p} is negative")));
    }
    let harvested = match cfg.variant {
        ProtocolVariant::ElementSplitting => {
            let masked: f64 = incident_powers
                .iter()
                .zip(&profile.harvest_mask)
                .filter(|(_, &m)| m)
                .map(|(p, _)| p)
                .sum();
            cfg.eta * masked
        }
        _ => cfg.eta * (1.0 - cfg.rho) * incident_powers.iter().sum::<f64>(),
    };
    Ok(harvested)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfPowerCheck {
    pub feasible: bool,
    /// Harvested minus required, in Watts.
    pub slack: f64,
}

pub fn self_power_feasible(
    cfg: &ProtocolConfig,
    profile: &ReflectionProfile,
    incident_powers: &[f64],
) -> Result<SelfPowerCheck> {
    let slack = ris_harvested_power(cfg, profile, incident_powers)? - power_requirement(cfg);
    Ok(SelfPowerCheck {
        feasible: slack >= 0.0,
        slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(variant: ProtocolVariant, rho: f64, n_ris: usize) -> ProtocolConfig {
        ProtocolConfig::new(variant, rho, n_ris).unwrap()
    }

    #[test]
    fn power_requirement_examples() {
        let ps = cfg(ProtocolVariant::PowerSplitting, 0.5, 100);
        assert!((power_requirement(&ps) - 50.1e-3).abs() < 1e-12);
        let es0 = cfg(ProtocolVariant::ElementSplitting, 0.0, 100);
        assert!((power_requirement(&es0) - 50e-3).abs() < 1e-15);
        let es = cfg(ProtocolVariant::ElementSplitting, 0.75, 128);
        assert_eq!(es.n_reflect(), 96);
        assert!((power_requirement(&es) - 50.192e-3).abs() < 1e-12);
        let ts = cfg(ProtocolVariant::TimeSplitting, 0.5, 100);
        assert_eq!(power_requirement(&ts), power_requirement(&ps));
    }

    #[test]
    fn profile_examples() {
        let phases = vec![0.3; 128];
        let p = reflection_profile(&cfg(ProtocolVariant::PowerSplitting, 1.0, 128), &phases).unwrap();
        assert!(p.coefficients.iter().all(|c| (c.norm() - 1.0).abs() < 1e-15));
        assert!(p.harvest_mask.iter().all(|m| !m));

        let p = reflection_profile(&cfg(ProtocolVariant::PowerSplitting, 0.25, 128), &phases).unwrap();
        assert!(p.coefficients.iter().all(|c| (c.norm() - 0.5).abs() < 1e-15));

        let p = reflection_profile(&cfg(ProtocolVariant::ElementSplitting, 0.75, 128), &phases).unwrap();
        let reflecting = p.coefficients.iter().filter(|c| c.norm() > 0.0).count();
        assert_eq!(reflecting, 96);
        assert_eq!(p.harvest_mask.iter().filter(|m| **m).count(), 32);
        assert!(p.harvest_mask[96..].iter().all(|m| *m));
        assert!(p.coefficients.iter().skip(96).all(|c| c.norm() == 0.0));

        let p = reflection_profile(&cfg(ProtocolVariant::TimeSplitting, 0.75, 128), &phases).unwrap();
        assert_eq!(p.time_share, 0.75);

        assert!(reflection_profile(&cfg(ProtocolVariant::TimeSplitting, 0.75, 128), &phases[..5]).is_err());
    }

    #[test]
    fn es_rounding_records_realized_rho() {
        let c = cfg(ProtocolVariant::ElementSplitting, 0.333, 10);
        assert_eq!(c.n_reflect(), 3);
        assert!((c.realized_rho() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn harvesting_examples() {
        let ps = cfg(ProtocolVariant::PowerSplitting, 0.5, 4);
        let prof = reflection_profile(&ps, &[0.0; 4]).unwrap();
        let inc = [0.25e-3; 4];
        let h = ris_harvested_power(&ps, &prof, &inc).unwrap();
        assert!((h - 0.4e-3).abs() < 1e-15);

        let ps1 = cfg(ProtocolVariant::PowerSplitting, 1.0, 4);
        let prof1 = reflection_profile(&ps1, &[0.0; 4]).unwrap();
        assert_eq!(ris_harvested_power(&ps1, &prof1, &inc).unwrap(), 0.0);

        let es = cfg(ProtocolVariant::ElementSplitting, 1.0, 4);
        let prof = reflection_profile(&es, &[0.0; 4]).unwrap();
        assert!(prof.harvest_mask.iter().all(|m| !m));
        assert_eq!(ris_harvested_power(&es, &prof, &inc).unwrap(), 0.0);

        assert!(ris_harvested_power(&ps, &prof, &[-1.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn self_power_examples() {
        let ps = cfg(ProtocolVariant::PowerSplitting, 0.5, 100);
        let prof = reflection_profile(&ps, &vec![0.0; 100]).unwrap();
        let inc = vec![1e-5; 100];
        let chk = self_power_feasible(&ps, &prof, &inc).unwrap();
        assert!(!chk.feasible);
        assert!((chk.slack + 49.7e-3).abs() < 1e-12);

        let mut free = ps;
        free.p_circuit = 0.0;
        free.p_element = 0.0;
        assert!(self_power_feasible(&free, &prof, &vec![0.0; 100]).unwrap().feasible);

        // Harvested 0.4 mW: set P_c so the requirement matches exactly.
        let mut exact = ps;
        exact.p_element = 0.0;
        exact.p_circuit = 0.8 * 0.5 * 1e-3;
        let chk = self_power_feasible(&exact, &prof, &vec![1e-5; 100]).unwrap();
        assert!(chk.feasible);
        assert!(chk.slack.abs() < 1e-18);
    }

    #[test]
    fn parses_short_names() {
        assert_eq!("ps".parse::<ProtocolVariant>().unwrap(), ProtocolVariant::PowerSplitting);
        assert_eq!("ES".parse::<ProtocolVariant>().unwrap(), ProtocolVariant::ElementSplitting);
        assert!("XX".parse::<ProtocolVariant>().is_err());
        assert!(ProtocolConfig::new(ProtocolVariant::TimeSplitting, 1.2, 10).is_err());
    }

    #[test]
    fn modulus_contract_on_rho_grid() {
        let phases: Vec<f64> = (0..40).map(|i| 0.37 * i as f64).collect();
        for step in 0..=10 {
            let rho = step as f64 / 10.0;
            for variant in ProtocolVariant::ALL {
                let c = cfg(variant, rho, 40);
                let p = reflection_profile(&c, &phases).unwrap();
                for (n, coeff) in p.coefficients.iter().enumerate() {
                    let expected = match variant {
                        ProtocolVariant::PowerSplitting => rho.sqrt(),
                        ProtocolVariant::TimeSplitting => 1.0,
                        ProtocolVariant::ElementSplitting => {
                            if n < c.n_reflect() {
                                1.0
                            } else {
                                0.0
                            }
                        }
                    };
                    assert!((coeff.norm() - expected).abs() < 1e-12);
                }
                if variant == ProtocolVariant::ElementSplitting {
                    assert_eq!(p.harvest_mask.iter().filter(|m| **m).count(), c.n_harvest());
                }
                if variant == ProtocolVariant::TimeSplitting {
                    assert_eq!(p.time_share, rho);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn requirement_monotone_in_rho(a in 0.0f64..1.0, b in 0.0f64..1.0, n in 1usize..200) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            for v in ProtocolVariant::ALL {
                let rl = power_requirement(&cfg(v, lo, n));
                let rh = power_requirement(&cfg(v, hi, n));
                prop_assert!(rl <= rh + 1e-18);
            }
        }

        #[test]
        fn harvest_linear_and_decreasing(
            inc in proptest::collection::vec(0.0f64..1e-3, 8),
            scale in 0.0f64..10.0,
            a in 0.0f64..1.0,
            b in 0.0f64..1.0,
        ) {
            for v in [ProtocolVariant::PowerSplitting, ProtocolVariant::TimeSplitting, ProtocolVariant::ElementSplitting] {
                let c = cfg(v, a, 8);
                let prof = reflection_profile(&c, &[0.0; 8]).unwrap();
                let base = ris_harvested_power(&c, &prof, &inc).unwrap();
                let scaled: Vec<f64> = inc.iter().map(|x| x * scale).collect();
                let s = ris_harvested_power(&c, &prof, &scaled).unwrap();
                prop_assert!((s - scale * base).abs() <= 1e-12 * (1.0 + s.abs()));
            }
            let total: f64 = inc.iter().sum();
            if total > 0.0 && (a - b).abs() > 1e-9 {
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                for v in [ProtocolVariant::PowerSplitting, ProtocolVariant::TimeSplitting] {
                    let cl = cfg(v, lo, 8);
                    let ch = cfg(v, hi, 8);
                    let pl = reflection_profile(&cl, &[0.0; 8]).unwrap();
                    let ph = reflection_profile(&ch, &[0.0; 8]).unwrap();
                    prop_assert!(ris_harvested_power(&cl, &pl, &inc).unwrap() > ris_harvested_power(&ch, &ph, &inc).unwrap());
                }
            }
        }
    }
}
