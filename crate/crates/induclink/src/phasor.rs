//! Complex phasor and impedance algebra underlying the link model and the
//! nodal solver.
//!
//! All quantities are SI doubles. Frequencies enter in hertz at the API
//! boundary and are converted once to rad/s. The capacitor reactance is
//! formed analytically as -1/(ωC) rather than through a complex division.

use num_complex::Complex64;
use std::f64::consts::TAU;
use std::fmt;

use crate::error::{Error, Result};

/// Complex scalar used throughout the crate.
pub type ComplexValue = Complex64;

fn ensure_finite(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { name, value })
    }
}

fn ensure_positive(name: &'static str, value: f64) -> Result<f64> {
    ensure_finite(name, value)?;
    if value > 0.0 {
        Ok(value)
    } else {
        Err(Error::NonPositive { name, value })
    }
}

/// Angular frequency in rad/s, strictly positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularFrequency {
    omega: f64,
}

impl AngularFrequency {
    /// ω = 2πf from a drive frequency in hertz.
    pub fn from_hz(hz: f64) -> Result<Self> {
        ensure_positive("operating frequency (Hz)", hz)?;
        Ok(Self { omega: TAU * hz })
    }

    /// Directly from rad/s.
    pub fn from_rad_per_s(omega: f64) -> Result<Self> {
        ensure_positive("angular frequency (rad/s)", omega)?;
        Ok(Self { omega })
    }

    pub fn rad_per_s(self) -> f64 {
        self.omega
    }

    pub fn hz(self) -> f64 {
        self.omega / TAU
    }
}

/// Complex impedance in ohms with finite components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Impedance(ComplexValue);

impl Impedance {
    pub fn new(re: f64, im: f64) -> Result<Self> {
        ensure_finite("impedance real part", re)?;
        ensure_finite("impedance imaginary part", im)?;
        Ok(Self(Complex64::new(re, im)))
    }

    pub fn from_complex(z: ComplexValue) -> Result<Self> {
        Self::new(z.re, z.im)
    }

    pub fn re(self) -> f64 {
        self.0.re
    }

    pub fn im(self) -> f64 {
        self.0.im
    }

    pub fn as_complex(self) -> ComplexValue {
        self.0
    }

    pub fn magnitude(self) -> f64 {
        self.0.norm()
    }
}

impl fmt::Display for Impedance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.im >= 0.0 {
            write!(f, "{} + j{} Ω", self.0.re, self.0.im)
        } else {
            write!(f, "{} - j{} Ω", self.0.re, -self.0.im)
        }
    }
}

/// Two-terminal passive element kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PassiveElement {
    Resistor,
    Inductor,
    Capacitor,
}

/// Impedance of a single passive element at angular frequency `w`.
///
/// Resistor: R + j0, inductor: jωL, capacitor: -j/(ωC).
pub fn impedance_of_element(
    kind: PassiveElement,
    value: f64,
    w: AngularFrequency,
) -> Result<Impedance> {
    let z = match kind {
        PassiveElement::Resistor => {
            let r = ensure_positive("resistance (Ω)", value)?;
            Complex64::new(r, 0.0)
        }
        PassiveElement::Inductor => {
            let l = ensure_positive("inductance (H)", value)?;
            Complex64::new(0.0, w.rad_per_s() * l)
        }
        PassiveElement::Capacitor => {
            let c = ensure_positive("capacitance (F)", value)?;
            Complex64::new(0.0, -1.0 / (w.rad_per_s() * c))
        }
    };
    Impedance::from_complex(z)
}

/// How two impedances are joined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombineMode {
    Series,
    Parallel,
}

/// Series: a + b. Parallel: ab/(a+b), rejecting the degenerate a + b = 0.
pub fn combine(mode: CombineMode, a: Impedance, b: Impedance) -> Result<Impedance> {
    match mode {
        CombineMode::Series => Impedance::from_complex(a.as_complex() + b.as_complex()),
        CombineMode::Parallel => {
            let sum = a.as_complex() + b.as_complex();
            if sum.norm() == 0.0 {
                return Err(Error::DegenerateParallel {
                    a: a.as_complex(),
                    b: b.as_complex(),
                });
            }
            Impedance::from_complex(a.as_complex() * b.as_complex() / sum)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel_close(actual: f64, expected: f64, tol: f64) -> bool {
        (actual - expected).abs() <= tol * expected.abs().max(1e-300)
    }

    #[test]
    fn inductor_reactance_at_link_frequency() {
        let w = AngularFrequency::from_rad_per_s(8.5197e7).unwrap();
        let z = impedance_of_element(PassiveElement::Inductor, 5.48e-6, w).unwrap();
        assert_eq!(z.re(), 0.0);
        assert!(rel_close(z.im(), 8.5197e7 * 5.48e-6, 1e-15));
        assert!((z.im() - 466.88).abs() < 0.005);
    }

    #[test]
    fn resistor_is_frequency_independent() {
        for hz in [50.0, 13.56e6, 1e9] {
            let w = AngularFrequency::from_hz(hz).unwrap();
            let z = impedance_of_element(PassiveElement::Resistor, 320.0, w).unwrap();
            assert_eq!(z.as_complex(), Complex64::new(320.0, 0.0));
        }
    }

    #[test]
    fn capacitor_cancels_inductor_at_resonance() {
        let w = AngularFrequency::from_hz(13.56e6).unwrap();
        let l = 5.48e-6;
        let c = 1.0 / (w.rad_per_s() * w.rad_per_s() * l);
        let zl = impedance_of_element(PassiveElement::Inductor, l, w).unwrap();
        let zc = impedance_of_element(PassiveElement::Capacitor, c, w).unwrap();
        // magnitudes match and the sum's reactance vanishes
        assert!(rel_close(-zc.im(), zl.im(), 1e-12));
        let sum = combine(CombineMode::Series, zl, zc).unwrap();
        assert!(sum.im().abs() <= 1e-12 * zl.im());
    }

    #[test]
    fn series_combination_is_componentwise() {
        let a = Impedance::new(100.0, 0.0).unwrap();
        let b = Impedance::new(0.0, 50.0).unwrap();
        let z = combine(CombineMode::Series, a, b).unwrap();
        assert_eq!(z.as_complex(), Complex64::new(100.0, 50.0));
    }

    #[test]
    fn parallel_rc_load_matches_direct_evaluation() {
        // 320 Ω in parallel with the tank capacitor branch at the link frequency
        let w = AngularFrequency::from_hz(13.56e6).unwrap();
        let r = Impedance::new(320.0, 0.0).unwrap();
        let c = impedance_of_element(PassiveElement::Capacitor, 1.0577844633824241e-11, w).unwrap();
        let z = combine(CombineMode::Parallel, r, c).unwrap();
        assert!(rel_close(z.re(), 295.42880503343235, 1e-12));
        assert!(rel_close(z.im(), -85.19999276535519, 1e-12));
    }

    #[test]
    fn parallel_of_equal_impedances_halves() {
        let z = Impedance::new(50.0, 50.0).unwrap();
        let half = combine(CombineMode::Parallel, z, z).unwrap();
        assert!(rel_close(half.re(), 25.0, 1e-15));
        assert!(rel_close(half.im(), 25.0, 1e-15));
    }

    #[test]
    fn degenerate_parallel_is_rejected() {
        let a = Impedance::new(0.0, 120.0).unwrap();
        let b = Impedance::new(0.0, -120.0).unwrap();
        let err = combine(CombineMode::Parallel, a, b).unwrap_err();
        assert!(matches!(err, Error::DegenerateParallel { .. }));
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let w = AngularFrequency::from_hz(13.56e6).unwrap();
        assert!(impedance_of_element(PassiveElement::Resistor, 0.0, w).is_err());
        assert!(impedance_of_element(PassiveElement::Inductor, -1e-6, w).is_err());
        assert!(impedance_of_element(PassiveElement::Capacitor, f64::NAN, w).is_err());
        assert!(AngularFrequency::from_hz(0.0).is_err());
        assert!(AngularFrequency::from_hz(-1.0).is_err());
        assert!(AngularFrequency::from_hz(f64::INFINITY).is_err());
        assert!(Impedance::new(f64::NAN, 0.0).is_err());
    }

    fn arb_passive() -> impl Strategy<Value = Impedance> {
        (0.0..1e3, -1e3..1e3f64).prop_map(|(re, im)| Impedance::new(re, im).unwrap())
    }

    proptest! {
        #[test]
        fn parallel_is_commutative(a in arb_passive(), b in arb_passive()) {
            let ab = combine(CombineMode::Parallel, a, b);
            let ba = combine(CombineMode::Parallel, b, a);
            match (ab, ba) {
                (Ok(x), Ok(y)) => prop_assert_eq!(x.as_complex(), y.as_complex()),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "commutativity broken on the error path"),
            }
        }

        #[test]
        fn combinations_of_passive_impedances_stay_passive(a in arb_passive(), b in arb_passive()) {
            let s = combine(CombineMode::Series, a, b).unwrap();
            prop_assert!(s.re() >= 0.0);
            if let Ok(p) = combine(CombineMode::Parallel, a, b) {
                prop_assert!(p.re() >= -1e-12 * p.magnitude());
            }
        }

        #[test]
        fn resonance_identity(l in 1e-8..1e-3f64, hz in 1e3..1e8f64) {
            let w = AngularFrequency::from_hz(hz).unwrap();
            let c = 1.0 / (w.rad_per_s() * w.rad_per_s() * l);
            let zl = impedance_of_element(PassiveElement::Inductor, l, w).unwrap();
            let zc = impedance_of_element(PassiveElement::Capacitor, c, w).unwrap();
            prop_assert!((zl.im() + zc.im()).abs() <= 1e-12 * zl.im());
        }
    }
}
