//! Closed-form model of the two tuned link topologies: mesh equations,
//! complex voltage gain, and link efficiency.
//!
//! The efficiency operations implement the real-part formulas
//! η = ω²M²·R / (Re[B]·(Re[A]Re[B] + ω²M²)) and its series-parallel
//! counterpart with Re[C] = Re[Zload] + R_L2. Those coincide with the true
//! load-power/source-power ratio exactly when the secondary branch is
//! resonant (Im of the secondary loop impedance is zero); `SolveResult`
//! additionally exposes the mesh currents so the power ratio itself can be
//! formed, which is what the oracle cross-check compares.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::phasor::{AngularFrequency, ComplexValue, Impedance};

/// Tissue-safety bound on the coupling coefficient (inclusive).
pub const K_SAFETY_LIMIT: f64 = 0.45;

/// Reference link parameters shipped as the `table1` preset: a 13.56 MHz
/// pacemaker-class transcutaneous link.
pub mod table1 {
    pub const FREQ_HZ: f64 = 13.56e6;
    pub const L1: f64 = 5.48e-6;
    pub const L2: f64 = 1.0e-6;
    pub const R_L1: f64 = 2.12;
    pub const R_L2: f64 = 1.63;
    pub const R_LOAD: f64 = 320.0;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    /// Series resonating capacitor on the primary only.
    SeriesPrimary,
    /// Series-tuned primary plus a capacitor across the load.
    SeriesParallel,
}

impl Topology {
    pub fn label(self) -> &'static str {
        match self {
            Topology::SeriesPrimary => "series",
            Topology::SeriesParallel => "sp",
        }
    }
}

impl std::fmt::Display for Topology {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

fn check_positive(name: &'static str, value: f64) -> Result<f64> {
    if !value.is_finite() {
        return Err(Error::NonFinite { name, value });
    }
    if value <= 0.0 {
        return Err(Error::NonPositive { name, value });
    }
    Ok(value)
}

fn check_non_negative(name: &'static str, value: f64) -> Result<f64> {
    if !value.is_finite() {
        return Err(Error::NonFinite { name, value });
    }
    if value < 0.0 {
        return Err(Error::Negative { name, value });
    }
    Ok(value)
}

/// The coupled coil pair: inductances, winding losses, and coupling.
#[derive(Debug, Clone, Copy)]
pub struct CoilPair {
    l1: f64,
    l2: f64,
    r_l1: f64,
    r_l2: f64,
    k: f64,
}

impl CoilPair {
    /// k must lie in [0, 1); perfect coupling needs [`CoilPair::new_allow_unity`].
    pub fn new(l1: f64, l2: f64, r_l1: f64, r_l2: f64, k: f64) -> Result<Self> {
        let pair = Self::new_allow_unity(l1, l2, r_l1, r_l2, k)?;
        if k >= 1.0 {
            return Err(Error::CouplingOutOfRange {
                k,
                max_allowed: 1.0,
            });
        }
        Ok(pair)
    }

    /// Explicit override admitting k = 1 (ideal transformer limit).
    pub fn new_allow_unity(l1: f64, l2: f64, r_l1: f64, r_l2: f64, k: f64) -> Result<Self> {
        check_positive("primary inductance l1 (H)", l1)?;
        check_positive("secondary inductance l2 (H)", l2)?;
        check_non_negative("primary parasitic resistance r_l1 (Ω)", r_l1)?;
        check_non_negative("secondary parasitic resistance r_l2 (Ω)", r_l2)?;
        if !k.is_finite() || !(0.0..=1.0).contains(&k) {
            return Err(Error::CouplingOutOfRange {
                k,
                max_allowed: 1.0,
            });
        }
        Ok(Self { l1, l2, r_l1, r_l2, k })
    }

    pub fn l1(&self) -> f64 {
        self.l1
    }
    pub fn l2(&self) -> f64 {
        self.l2
    }
    pub fn r_l1(&self) -> f64 {
        self.r_l1
    }
    pub fn r_l2(&self) -> f64 {
        self.r_l2
    }
    pub fn k(&self) -> f64 {
        self.k
    }
}

/// AC source: amplitude and series resistance.
#[derive(Debug, Clone, Copy)]
pub struct SourceSpec {
    vs: f64,
    rs: f64,
}

impl SourceSpec {
    pub fn new(vs: f64, rs: f64) -> Result<Self> {
        check_positive("source amplitude vs (V)", vs)?;
        check_non_negative("source resistance rs (Ω)", rs)?;
        Ok(Self { vs, rs })
    }

    pub fn vs(&self) -> f64 {
        self.vs
    }
    pub fn rs(&self) -> f64 {
        self.rs
    }
}

impl Default for SourceSpec {
    /// 1 V amplitude, no source resistance.
    fn default() -> Self {
        Self { vs: 1.0, rs: 0.0 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LoadSpec {
    r_load: f64,
}

impl LoadSpec {
    pub fn new(r_load: f64) -> Result<Self> {
        check_positive("load resistance r_load (Ω)", r_load)?;
        Ok(Self { r_load })
    }

    pub fn r_load(&self) -> f64 {
        self.r_load
    }
}

/// Tuning capacitors. `c2p = 0` is accepted and means an open (absent)
/// parallel branch, which makes the series-parallel formulas reduce exactly
/// to the series ones.
#[derive(Debug, Clone, Copy)]
pub struct TuningSpec {
    c1s: f64,
    c2p: Option<f64>,
}

impl TuningSpec {
    pub fn series(c1s: f64) -> Result<Self> {
        check_positive("series tuning capacitor c1s (F)", c1s)?;
        Ok(Self { c1s, c2p: None })
    }

    pub fn series_parallel(c1s: f64, c2p: f64) -> Result<Self> {
        check_positive("series tuning capacitor c1s (F)", c1s)?;
        check_non_negative("parallel tuning capacitor c2p (F)", c2p)?;
        Ok(Self { c1s, c2p: Some(c2p) })
    }

    pub fn c1s(&self) -> f64 {
        self.c1s
    }
    pub fn c2p(&self) -> Option<f64> {
        self.c2p
    }
}

/// One complete link instance.
#[derive(Debug, Clone, Copy)]
pub struct LinkDesign {
    topology: Topology,
    coils: CoilPair,
    source: SourceSpec,
    load: LoadSpec,
    tuning: TuningSpec,
    freq: AngularFrequency,
}

impl LinkDesign {
    pub fn new(
        topology: Topology,
        coils: CoilPair,
        source: SourceSpec,
        load: LoadSpec,
        tuning: TuningSpec,
        freq_hz: f64,
    ) -> Result<Self> {
        match (topology, tuning.c2p()) {
            (Topology::SeriesParallel, None) => return Err(Error::MissingParallelCap),
            (Topology::SeriesPrimary, Some(_)) => return Err(Error::UnexpectedParallelCap),
            _ => {}
        }
        let freq = AngularFrequency::from_hz(freq_hz)?;
        Ok(Self {
            topology,
            coils,
            source,
            load,
            tuning,
            freq,
        })
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }
    pub fn coils(&self) -> &CoilPair {
        &self.coils
    }
    pub fn source(&self) -> &SourceSpec {
        &self.source
    }
    pub fn load(&self) -> &LoadSpec {
        &self.load
    }
    pub fn tuning(&self) -> &TuningSpec {
        &self.tuning
    }
    pub fn freq(&self) -> AngularFrequency {
        self.freq
    }
    pub fn freq_hz(&self) -> f64 {
        self.freq.hz()
    }

    pub fn with_k(&self, k: f64) -> Result<Self> {
        let coils = CoilPair::new(self.coils.l1, self.coils.l2, self.coils.r_l1, self.coils.r_l2, k)?;
        Ok(Self { coils, ..*self })
    }

    pub fn with_r_load(&self, r_load: f64) -> Result<Self> {
        Ok(Self {
            load: LoadSpec::new(r_load)?,
            ..*self
        })
    }

    pub fn with_freq_hz(&self, freq_hz: f64) -> Result<Self> {
        Ok(Self {
            freq: AngularFrequency::from_hz(freq_hz)?,
            ..*self
        })
    }

    pub fn with_source(&self, source: SourceSpec) -> Result<Self> {
        Ok(Self { source, ..*self })
    }

    pub fn with_tuning(&self, tuning: TuningSpec) -> Result<Self> {
        match (self.topology, tuning.c2p()) {
            (Topology::SeriesParallel, None) => Err(Error::MissingParallelCap),
            (Topology::SeriesPrimary, Some(_)) => Err(Error::UnexpectedParallelCap),
            _ => Ok(Self { tuning, ..*self }),
        }
    }
}

/// Solution of one design point.
#[derive(Debug, Clone, Copy)]
pub struct SolveResult {
    pub gain: ComplexValue,
    pub gain_mag: f64,
    pub efficiency: f64,
    pub i1: ComplexValue,
    pub i2: ComplexValue,
    pub v_load: ComplexValue,
    /// Mutual inductance used, henries.
    pub m: f64,
}

impl SolveResult {
    /// Load power as a share of the total power drawn from the source,
    /// formed from the mesh currents as a sum of per-resistance dissipations.
    /// This is the quantity the nodal oracle reproduces for any design,
    /// tuned or not.
    pub fn load_power_share(&self, design: &LinkDesign) -> f64 {
        let re_zeff = effective_load(design).re();
        let p_primary = 0.5 * self.i1.norm_sqr() * (design.source.rs + design.coils.r_l1);
        let p_coil2 = 0.5 * self.i2.norm_sqr() * design.coils.r_l2;
        let p_load = 0.5 * self.i2.norm_sqr() * re_zeff;
        p_load / (p_primary + p_coil2 + p_load)
    }
}

/// M = k·√(L1·L2).
pub fn mutual_inductance(k: f64, l1: f64, l2: f64) -> Result<f64> {
    check_positive("primary inductance l1 (H)", l1)?;
    check_positive("secondary inductance l2 (H)", l2)?;
    if !k.is_finite() || !(0.0..=1.0).contains(&k) {
        return Err(Error::CouplingOutOfRange {
            k,
            max_allowed: 1.0,
        });
    }
    Ok(k * (l1 * l2).sqrt())
}

/// Primary loop impedance A = Rs + R_L1 + jωL1 - j/(ωC1s).
pub fn branch_a(design: &LinkDesign) -> Impedance {
    let w = design.freq.rad_per_s();
    let re = design.source.rs + design.coils.r_l1;
    let im = w * design.coils.l1 - 1.0 / (w * design.tuning.c1s);
    Impedance::new(re, im).expect("validated design yields finite A")
}

/// Secondary loop impedance B = R_load + R_L2 + jωL2 (series topology only).
pub fn branch_b(design: &LinkDesign) -> Result<Impedance> {
    if design.topology != Topology::SeriesPrimary {
        return Err(Error::WrongTopology {
            op: "branch_b",
            expected: Topology::SeriesPrimary.label(),
            actual: design.topology.label(),
        });
    }
    let re = design.load.r_load + design.coils.r_l2;
    let im = design.freq.rad_per_s() * design.coils.l2;
    Impedance::new(re, im)
}

/// Load impedance transformed by the parallel capacitor:
/// Zload = (R - jωC2p·R²) / (1 + ω²C2p²R²).
pub fn zload_parallel(r_load: f64, c2p: f64, w: AngularFrequency) -> Result<Impedance> {
    check_positive("load resistance r_load (Ω)", r_load)?;
    check_non_negative("parallel tuning capacitor c2p (F)", c2p)?;
    let u = w.rad_per_s() * c2p * r_load;
    let den = 1.0 + u * u;
    Impedance::new(r_load / den, -u * r_load / den)
}

/// Load impedance the secondary current drives: Rload, or Zload when the
/// parallel capacitor is present.
fn effective_load(design: &LinkDesign) -> Impedance {
    match design.tuning.c2p {
        None => Impedance::new(design.load.r_load, 0.0).expect("finite load"),
        Some(c2p) => zload_parallel(design.load.r_load, c2p, design.freq)
            .expect("validated design yields finite Zload"),
    }
}

/// Secondary loop impedance including the transformed load:
/// C = Zeff + jωL2 + R_L2 (equals B when no parallel capacitor is present).
fn secondary_loop(design: &LinkDesign) -> (Impedance, Impedance) {
    let zeff = effective_load(design);
    let w = design.freq.rad_per_s();
    let c = Complex64::new(
        zeff.re() + design.coils.r_l2,
        zeff.im() + w * design.coils.l2,
    );
    (zeff, Impedance::from_complex(c).expect("finite loop impedance"))
}

fn require_topology(design: &LinkDesign, op: &'static str, expected: Topology) -> Result<()> {
    if design.topology != expected {
        return Err(Error::WrongTopology {
            op,
            expected: expected.label(),
            actual: design.topology.label(),
        });
    }
    Ok(())
}

fn singular_details(design: &LinkDesign, a: Impedance, c: Impedance, x: f64) -> String {
    format!(
        "A·C + ω²M² vanished for k = {}, f = {} Hz, r_load = {} Ω (A = {}, secondary loop = {}, ω²M² = {})",
        design.coils.k,
        design.freq_hz(),
        design.load.r_load,
        a,
        c,
        x
    )
}

fn gain_formula(design: &LinkDesign) -> Result<ComplexValue> {
    let w = design.freq.rad_per_s();
    let m = mutual_inductance(design.coils.k, design.coils.l1, design.coils.l2)?;
    let a = branch_a(design);
    let (zeff, c) = secondary_loop(design);
    let x = w * m * (w * m);
    let den = a.as_complex() * c.as_complex() + x;
    if den.norm() == 0.0 {
        return Err(Error::SingularLink {
            details: singular_details(design, a, c, x),
        });
    }
    Ok(Complex64::new(0.0, w * m) * zeff.as_complex() / den)
}

/// Complex voltage gain of the series-tuned topology:
/// Vload/Vs = jωM·Rload / (A·B + ω²M²).
pub fn gain_series(design: &LinkDesign) -> Result<ComplexValue> {
    require_topology(design, "gain_series", Topology::SeriesPrimary)?;
    gain_formula(design)
}

/// Complex voltage gain of the series-parallel topology:
/// Vload/Vs = jωM·Zload / (A·(Zload + jωL2 + R_L2) + ω²M²).
pub fn gain_sp(design: &LinkDesign) -> Result<ComplexValue> {
    require_topology(design, "gain_sp", Topology::SeriesParallel)?;
    gain_formula(design)
}

fn efficiency_formula(design: &LinkDesign) -> Result<f64> {
    let w = design.freq.rad_per_s();
    let m = mutual_inductance(design.coils.k, design.coils.l1, design.coils.l2)?;
    let x = w * m * (w * m);
    let re_a = design.source.rs + design.coils.r_l1;
    let re_zeff = effective_load(design).re();
    let re_c = re_zeff + design.coils.r_l2;
    let den = re_c * (re_a * re_c + x);
    if den == 0.0 {
        return Err(Error::SingularLink {
            details: format!(
                "efficiency denominator vanished: Re of the secondary loop = {} Ω, Re[A] = {} Ω, ω²M² = {}",
                re_c, re_a, x
            ),
        });
    }
    Ok(x * re_zeff / den)
}

/// Link efficiency of the series-tuned topology:
/// η = ω²M²·Rload / (Re[B]·(Re[A]·Re[B] + ω²M²)).
pub fn efficiency_series(design: &LinkDesign) -> Result<f64> {
    require_topology(design, "efficiency_series", Topology::SeriesPrimary)?;
    efficiency_formula(design)
}

/// Link efficiency of the series-parallel topology:
/// η = ω²M²·Re[Zload] / (Re[C]·(Re[A]·Re[C] + ω²M²)).
pub fn efficiency_sp(design: &LinkDesign) -> Result<f64> {
    require_topology(design, "efficiency_sp", Topology::SeriesParallel)?;
    efficiency_formula(design)
}

/// Solve the 2x2 complex mesh system
///   [ A      -jωM ] [I1]   [Vs]
///   [ -jωM    C   ] [I2] = [0 ]
/// by elimination with partial pivoting, independent of the closed-form
/// gain expressions above.
fn solve_mesh(
    a: ComplexValue,
    m_off: ComplexValue,
    c: ComplexValue,
    vs: f64,
) -> Option<(ComplexValue, ComplexValue)> {
    let (mut r0, mut r1) = (
        [a, m_off, Complex64::new(vs, 0.0)],
        [m_off, c, Complex64::new(0.0, 0.0)],
    );
    if r1[0].norm() > r0[0].norm() {
        std::mem::swap(&mut r0, &mut r1);
    }
    if r0[0].norm() == 0.0 {
        return None;
    }
    let f = r1[0] / r0[0];
    let p1 = r1[1] - f * r0[1];
    if p1.norm() == 0.0 {
        return None;
    }
    let i2 = (r1[2] - f * r0[2]) / p1;
    let i1 = (r0[2] - r0[1] * i2) / r0[0];
    if i1.is_finite() && i2.is_finite() {
        Some((i1, i2))
    } else {
        None
    }
}

/// Full mesh solution of one design point: currents, load voltage, gain,
/// efficiency, and the mutual inductance actually used.
pub fn solve_link(design: &LinkDesign) -> Result<SolveResult> {
    let w = design.freq.rad_per_s();
    let m = mutual_inductance(design.coils.k, design.coils.l1, design.coils.l2)?;
    let a = branch_a(design);
    let (zeff, c) = secondary_loop(design);
    let m_off = Complex64::new(0.0, -w * m);
    let (i1, i2) = solve_mesh(a.as_complex(), m_off, c.as_complex(), design.source.vs)
        .ok_or_else(|| Error::SingularLink {
            details: singular_details(design, a, c, w * m * (w * m)),
        })?;
    let v_load = i2 * zeff.as_complex();
    let gain = v_load / design.source.vs;
    let efficiency = efficiency_formula(design)?;
    Ok(SolveResult {
        gain,
        gain_mag: gain.norm(),
        efficiency,
        i1,
        i2,
        v_load,
        m,
    })
}

/// Outcome of the tissue-safety check.
#[derive(Debug, Clone, Copy)]
pub struct SafetyReport {
    pub k: f64,
    pub limit: f64,
    pub within_limit: bool,
    pub overridden: bool,
}

impl std::fmt::Display for SafetyReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.within_limit {
            write!(
                f,
                "coupling k = {} within the tissue-safety limit {}",
                self.k, self.limit
            )
        } else {
            write!(
                f,
                "coupling k = {} EXCEEDS the tissue-safety limit {} (override in effect)",
                self.k, self.limit
            )
        }
    }
}

/// Reject designs with k above the safety limit unless explicitly overridden.
/// The boundary k = 0.45 passes.
pub fn validate_safety(design: &LinkDesign, allow_unsafe: bool) -> Result<SafetyReport> {
    let k = design.coils.k;
    let within_limit = k <= K_SAFETY_LIMIT;
    if !within_limit && !allow_unsafe {
        return Err(Error::UnsafeCoupling {
            k,
            limit: K_SAFETY_LIMIT,
        });
    }
    Ok(SafetyReport {
        k,
        limit: K_SAFETY_LIMIT,
        within_limit,
        overridden: !within_limit,
    })
}
