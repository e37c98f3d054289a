//! Drifting error-rate profiles and the depolarizing channels they drive.
//!
//! A [`DriftProfile`] describes `g(n) = g0 + sum_m g_m sin(omega_m n + phase_m)`
//! in units of syndrome extraction cycles.  A [`NoiseAssignment`] attaches one
//! profile and channel kind to every fault location of a circuit.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Rates above this are rejected outright.
pub const MAX_PEAK_RATE: f64 = 0.75;
/// Rates above this trigger a warning: the correlator inversion assumes p < 1/2.
pub const WARN_PEAK_RATE: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub amplitude: f64,
    /// Angular frequency in radians per cycle.
    pub omega: f64,
    #[serde(default)]
    pub phase: f64,
}

impl Component {
    pub fn new(amplitude: f64, omega: f64, phase: f64) -> Self {
        Component {
            amplitude,
            omega,
            phase,
        }
    }

    /// Component with a period given in cycles. An infinite period is a static offset of zero.
    pub fn with_period(amplitude: f64, period_cycles: f64, phase: f64) -> Self {
        let omega = if period_cycles.is_infinite() {
            0.0
        } else {
            2.0 * PI / period_cycles
        };
        Component::new(amplitude, omega, phase)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftProfile {
    g0: f64,
    components: Vec<Component>,
}

impl DriftProfile {
    pub fn new(g0: f64, components: Vec<Component>) -> Result<Self> {
        if !(g0.is_finite() && g0 >= 0.0) {
            return Err(Error::config("g0", format!("must be finite and >= 0, got {g0}")));
        }
        for (i, c) in components.iter().enumerate() {
            if !(c.amplitude.is_finite() && c.amplitude >= 0.0) {
                return Err(Error::config(
                    format!("components[{i}].amplitude"),
                    format!("must be finite and >= 0, got {}", c.amplitude),
                ));
            }
            if !c.omega.is_finite() || !c.phase.is_finite() {
                return Err(Error::config(
                    format!("components[{i}]"),
                    "frequency and phase must be finite",
                ));
            }
        }
        let p = DriftProfile { g0, components };
        if p.peak() > MAX_PEAK_RATE {
            return Err(Error::config(
                "g0",
                format!(
                    "g0 + sum of amplitudes = {} exceeds {MAX_PEAK_RATE}",
                    p.peak()
                ),
            ));
        }
        Ok(p)
    }

    pub fn constant(g0: f64) -> Result<Self> {
        DriftProfile::new(g0, Vec::new())
    }

    pub fn zero() -> Self {
        DriftProfile {
            g0: 0.0,
            components: Vec::new(),
        }
    }

    pub fn g0(&self) -> f64 {
        self.g0
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    /// Upper bound `g0 + sum g_m`.
    pub fn peak(&self) -> f64 {
        self.g0 + self.components.iter().map(|c| c.amplitude).sum::<f64>()
    }

    /// True when the profile can exceed one half, where the estimator formulas break down.
    pub fn exceeds_half(&self) -> bool {
        self.peak() > WARN_PEAK_RATE
    }

    pub fn is_zero(&self) -> bool {
        self.g0 == 0.0 && self.components.iter().all(|c| c.amplitude == 0.0)
    }

    /// `g(n)` clamped to `[0, 1]`.
    pub fn sample_rate(&self, n: u64) -> f64 {
        self.sample_rate_checked(n).0
    }

    /// `g(n)` clamped to `[0, 1]`, plus whether clamping happened.
    pub fn sample_rate_checked(&self, n: u64) -> (f64, bool) {
        let t = n as f64;
        let raw = self.g0
            + self
                .components
                .iter()
                .map(|c| c.amplitude * (c.omega * t + c.phase).sin())
                .sum::<f64>();
        if raw < 0.0 {
            (0.0, true)
        } else if raw > 1.0 {
            (1.0, true)
        } else {
            (raw, false)
        }
    }

    /// The profile with all drift removed.
    pub fn static_part(&self) -> DriftProfile {
        DriftProfile {
            g0: self.g0,
            components: Vec::new(),
        }
    }
}

/// Single-qubit Pauli. Encoded as bit 0 = X part, bit 1 = Z part.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    I = 0,
    X = 1,
    Z = 2,
    Y = 3,
}

impl Pauli {
    pub fn from_bits(b: u8) -> Pauli {
        match b & 3 {
            0 => Pauli::I,
            1 => Pauli::X,
            2 => Pauli::Z,
            _ => Pauli::Y,
        }
    }

    pub fn has_x(self) -> bool {
        (self as u8) & 1 != 0
    }

    pub fn has_z(self) -> bool {
        (self as u8) & 2 != 0
    }

    fn letter(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Z => 'Z',
            Pauli::Y => 'Y',
        }
    }
}

/// A non-identity term of a depolarizing channel.
///
/// `code` holds two bits per qubit: the first qubit in bits 0..2 and, for
/// two-qubit terms, the second qubit in bits 2..4.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PauliTerm {
    pub arity: u8,
    pub code: u8,
}

impl PauliTerm {
    pub fn first(self) -> Pauli {
        Pauli::from_bits(self.code)
    }

    pub fn second(self) -> Pauli {
        Pauli::from_bits(self.code >> 2)
    }

    /// Number of distinct non-identity terms for the given arity.
    pub fn count(arity: u8) -> u8 {
        if arity == 1 {
            3
        } else {
            15
        }
    }

    pub fn all(arity: u8) -> impl Iterator<Item = PauliTerm> {
        (1..=Self::count(arity)).map(move |code| PauliTerm { arity, code })
    }
}

impl fmt::Display for PauliTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.first().letter())?;
        if self.arity == 2 {
            write!(f, "{}", self.second().letter())?;
        }
        Ok(())
    }
}

/// Non-identity terms of uniform depolarizing noise with total probability `g`.
pub fn depolarize_probabilities(g: f64, arity: u8) -> Vec<(PauliTerm, f64)> {
    assert!(arity == 1 || arity == 2, "arity must be 1 or 2");
    if g == 0.0 {
        return Vec::new();
    }
    let share = g / f64::from(PauliTerm::count(arity));
    PauliTerm::all(arity).map(|t| (t, share)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FaultLocation {
    Data(usize),
    Ancilla(usize),
    Gate(usize),
}

impl fmt::Display for FaultLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FaultLocation::Data(i) => write!(f, "d{}", i + 1),
            FaultLocation::Ancilla(i) => write!(f, "a{}", i + 1),
            FaultLocation::Gate(i) => write!(f, "g{}", i + 1),
        }
    }
}

impl FromStr for FaultLocation {
    type Err = Error;

    /// Parses one-based names such as `d1`, `a2`, `g4`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config("location", format!("cannot parse fault location {s:?}"));
        let (kind, num) = s.split_at(s.chars().next().map_or(0, char::len_utf8));
        let idx: usize = num.parse().map_err(|_| bad())?;
        if idx == 0 {
            return Err(bad());
        }
        match kind {
            "d" => Ok(FaultLocation::Data(idx - 1)),
            "a" => Ok(FaultLocation::Ancilla(idx - 1)),
            "g" => Ok(FaultLocation::Gate(idx - 1)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for FaultLocation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FaultLocation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Depolarize1,
    Depolarize2,
}

impl ChannelKind {
    pub fn arity(self) -> u8 {
        match self {
            ChannelKind::Depolarize1 => 1,
            ChannelKind::Depolarize2 => 2,
        }
    }

    pub fn for_location(loc: FaultLocation) -> ChannelKind {
        match loc {
            FaultLocation::Gate(_) => ChannelKind::Depolarize2,
            _ => ChannelKind::Depolarize1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseEntry {
    pub profile: DriftProfile,
    pub kind: ChannelKind,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseAssignment {
    entries: BTreeMap<FaultLocation, NoiseEntry>,
}

impl NoiseAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets the profile of `loc`, replacing any earlier one. The channel kind follows the location.
    pub fn set(&mut self, loc: FaultLocation, profile: DriftProfile) {
        let kind = ChannelKind::for_location(loc);
        self.entries.insert(loc, NoiseEntry { profile, kind });
    }

    pub fn get(&self, loc: FaultLocation) -> Option<&NoiseEntry> {
        self.entries.get(&loc)
    }

    pub fn iter(&self) -> impl Iterator<Item = (FaultLocation, &NoiseEntry)> {
        self.entries.iter().map(|(k, v)| (*k, v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Checks that exactly the given locations are covered.
    pub fn check_covers(&self, locations: &[FaultLocation]) -> Result<()> {
        for loc in locations {
            if !self.entries.contains_key(loc) {
                return Err(Error::config("noise", format!("fault location {loc} has no entry")));
            }
        }
        if let Some(extra) = self.entries.keys().find(|k| !locations.contains(k)) {
            return Err(Error::config(
                "noise",
                format!("fault location {extra} does not exist in this circuit"),
            ));
        }
        Ok(())
    }

    /// Same locations with every drift component removed.
    pub fn static_part(&self) -> NoiseAssignment {
        NoiseAssignment {
            entries: self
                .entries
                .iter()
                .map(|(k, v)| {
                    (
                        *k,
                        NoiseEntry {
                            profile: v.profile.static_part(),
                            kind: v.kind,
                        },
                    )
                })
                .collect(),
        }
    }

    pub fn hash(&self) -> [u8; 32] {
        let bytes = serde_json::to_vec(self).expect("assignment serializes");
        Sha256::digest(&bytes).into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fig3_profile() -> DriftProfile {
        DriftProfile::new(0.1, vec![Component::with_period(0.05, 1e4, 0.0)]).unwrap()
    }

    #[test]
    fn static_rate() {
        let p = DriftProfile::constant(0.1).unwrap();
        assert_eq!(p.sample_rate(0), 0.1);
        assert_eq!(p.sample_rate(123_456), 0.1);
    }

    #[test]
    fn sinusoid_rates() {
        let p = fig3_profile();
        assert!((p.sample_rate(0) - 0.1).abs() < 1e-15);
        assert!((p.sample_rate(2500) - 0.15).abs() < 1e-12);
        assert!((p.sample_rate(7500) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        assert!(DriftProfile::constant(-0.01).is_err());
        assert!(DriftProfile::new(0.5, vec![Component::with_period(0.3, 100.0, 0.0)]).is_err());
        assert!(DriftProfile::new(0.1, vec![Component::with_period(-0.01, 100.0, 0.0)]).is_err());
        let warn = DriftProfile::new(0.4, vec![Component::with_period(0.2, 100.0, 0.0)]).unwrap();
        assert!(warn.exceeds_half());
        assert!(!fig3_profile().exceeds_half());
    }

    #[test]
    fn clamping_is_reported() {
        let p = DriftProfile::new(0.01, vec![Component::with_period(0.05, 100.0, 0.0)]).unwrap();
        let (r, clamped) = p.sample_rate_checked(75);
        assert_eq!(r, 0.0);
        assert!(clamped);
        assert!(!fig3_profile().sample_rate_checked(7500).1);
    }

    #[test]
    fn depolarize_terms() {
        assert!(depolarize_probabilities(0.0, 1).is_empty());
        let one = depolarize_probabilities(0.09, 1);
        assert_eq!(one.len(), 3);
        let labels: Vec<String> = one.iter().map(|(t, _)| t.to_string()).collect();
        assert_eq!(labels, ["X", "Z", "Y"]);
        assert!(one.iter().all(|(_, p)| (p - 0.03).abs() < 1e-15));
        let two = depolarize_probabilities(0.15, 2);
        assert_eq!(two.len(), 15);
        assert!(two.iter().all(|(_, p)| (p - 0.01).abs() < 1e-15));
        assert!(two.iter().all(|(t, _)| t.to_string() != "II"));
    }

    #[test]
    fn location_names_round_trip() {
        for s in ["d1", "a4", "g12"] {
            let loc: FaultLocation = s.parse().unwrap();
            assert_eq!(loc.to_string(), s);
        }
        assert!("d0".parse::<FaultLocation>().is_err());
        assert!("q1".parse::<FaultLocation>().is_err());
        assert!("".parse::<FaultLocation>().is_err());
    }

    #[test]
    fn coverage_check() {
        let mut a = NoiseAssignment::new();
        a.set(FaultLocation::Data(0), DriftProfile::zero());
        let locs = [FaultLocation::Data(0), FaultLocation::Ancilla(0)];
        assert!(a.check_covers(&locs).is_err());
        a.set(FaultLocation::Ancilla(0), DriftProfile::zero());
        assert!(a.check_covers(&locs).is_ok());
        a.set(FaultLocation::Gate(3), DriftProfile::zero());
        assert!(a.check_covers(&locs).is_err());
        assert_eq!(a.get(FaultLocation::Gate(3)).unwrap().kind, ChannelKind::Depolarize2);
    }

    #[test]
    fn hash_depends_on_content() {
        let mut a = NoiseAssignment::new();
        a.set(FaultLocation::Data(0), fig3_profile());
        let h1 = a.hash();
        assert_eq!(h1, a.clone().hash());
        a.set(FaultLocation::Data(0), fig3_profile().static_part());
        assert_ne!(h1, a.hash());
    }

    proptest! {
        #[test]
        fn integer_period_is_exactly_periodic(period in 2u64..5000, n in 0u64..100_000, amp in 0.0f64..0.2) {
            let p = DriftProfile::new(0.25, vec![Component::with_period(amp, period as f64, 0.0)]).unwrap();
            let a = p.sample_rate(n);
            let b = p.sample_rate(n + period);
            prop_assert!((a - b).abs() < 1e-9 * (1.0 + n as f64 / period as f64));
        }

        #[test]
        fn depolarize_sums_to_g(g in 0.0f64..1.0, two in any::<bool>()) {
            let arity = if two { 2 } else { 1 };
            let s: f64 = depolarize_probabilities(g, arity).iter().map(|(_, p)| p).sum();
            prop_assert!((s - g).abs() <= 4.0 * f64::EPSILON * g.max(f64::MIN_POSITIVE));
        }
    }
}
