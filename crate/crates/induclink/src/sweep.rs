//! Parameter sweeps over a link design with deterministic CSV output,
//! including the four bundled figure presets (series and series-parallel
//! gain/efficiency surfaces over load resistance with a coupling family).

use crate::error::{Error, Result};
use crate::link::{
    solve_link, table1, CoilPair, LinkDesign, LoadSpec, SourceSpec, Topology, TuningSpec,
    K_SAFETY_LIMIT,
};
use crate::tuner::{parallel_tank_cap, series_resonance_cap};

/// Loads swept down to zero are floored here (ohms); indistinguishable at
/// figure resolution but keeps the load invariant intact.
pub const R_LOAD_FLOOR: f64 = 1e-9;

/// CSV header emitted for every sweep table.
pub const CSV_HEADER: &str =
    "curve,swept_var,value,gain_mag,gain_phase_deg,efficiency,i1_mag,i2_mag,vload_mag";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    K,
    RLoad,
    FreqHz,
}

impl SweepVariable {
    pub fn label(self) -> &'static str {
        match self {
            SweepVariable::K => "k",
            SweepVariable::RLoad => "r_load",
            SweepVariable::FreqHz => "freq_hz",
        }
    }
}

impl std::str::FromStr for SweepVariable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "k" => Ok(SweepVariable::K),
            "r_load" | "rload" => Ok(SweepVariable::RLoad),
            "freq_hz" | "freq" => Ok(SweepVariable::FreqHz),
            other => Err(Error::InvalidSweep {
                message: format!("unknown sweep variable '{other}' (expected k, r_load, or freq_hz)"),
            }),
        }
    }
}

/// One swept variable over an inclusive uniform grid, with an optional
/// family of secondary-variable values producing one curve per value.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    base: LinkDesign,
    variable: SweepVariable,
    start: f64,
    stop: f64,
    steps: usize,
    family: Option<(SweepVariable, Vec<f64>)>,
}

impl SweepSpec {
    pub fn new(
        base: LinkDesign,
        variable: SweepVariable,
        start: f64,
        stop: f64,
        steps: usize,
        family: Option<(SweepVariable, Vec<f64>)>,
    ) -> Result<Self> {
        if !(start.is_finite() && stop.is_finite() && start < stop) {
            return Err(Error::InvalidSweep {
                message: format!("need finite start < stop, got [{start}, {stop}]"),
            });
        }
        if steps < 2 {
            return Err(Error::InvalidSweep {
                message: format!("need at least 2 steps, got {steps}"),
            });
        }
        let domain_ok = match variable {
            SweepVariable::K => start >= 0.0 && stop < 1.0,
            SweepVariable::RLoad => true, // floored below R_LOAD_FLOOR
            SweepVariable::FreqHz => start > 0.0,
        };
        if !domain_ok {
            return Err(Error::InvalidSweep {
                message: format!(
                    "swept range [{start}, {stop}] leaves the domain of {}",
                    variable.label()
                ),
            });
        }
        if let Some((fam_var, values)) = &family {
            if *fam_var == variable {
                return Err(Error::InvalidSweep {
                    message: "family variable must differ from the swept variable".into(),
                });
            }
            if values.is_empty() {
                return Err(Error::InvalidSweep {
                    message: "family value list is empty".into(),
                });
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidSweep {
                    message: "family values must be finite".into(),
                });
            }
        }
        Ok(Self {
            base,
            variable,
            start,
            stop,
            steps,
            family,
        })
    }

    pub fn base(&self) -> &LinkDesign {
        &self.base
    }
    pub fn variable(&self) -> SweepVariable {
        self.variable
    }
    pub fn steps(&self) -> usize {
        self.steps
    }
    pub fn family(&self) -> Option<&(SweepVariable, Vec<f64>)> {
        self.family.as_ref()
    }

    fn grid_value(&self, idx: usize) -> f64 {
        let raw = match idx {
            0 => self.start,
            i if i == self.steps - 1 => self.stop,
            i => self.start + (self.stop - self.start) * i as f64 / (self.steps - 1) as f64,
        };
        if self.variable == SweepVariable::RLoad {
            raw.max(R_LOAD_FLOOR)
        } else {
            raw
        }
    }
}

/// Data carried by one solved grid point.
#[derive(Debug, Clone)]
pub enum RowOutcome {
    Point {
        gain_mag: f64,
        gain_phase_deg: f64,
        efficiency: f64,
        i1_mag: f64,
        i2_mag: f64,
        vload_mag: f64,
    },
    /// Singular or otherwise unsolvable point; the sweep continues.
    Failed { message: String },
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub curve: String,
    pub value: f64,
    pub outcome: RowOutcome,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    variable: SweepVariable,
    rows: Vec<SweepRow>,
    /// Curves whose family coupling exceeds the tissue-safety limit; kept
    /// for figure parity but flagged.
    unsafe_curves: Vec<String>,
}

impl SweepTable {
    pub fn rows(&self) -> &[SweepRow] {
        &self.rows
    }

    pub fn variable(&self) -> SweepVariable {
        self.variable
    }

    pub fn unsafe_curves(&self) -> &[String] {
        &self.unsafe_curves
    }

    /// Deterministic CSV: fixed header, `.` decimal separator, shortest
    /// round-trip float formatting, rows ordered by (curve, value).
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            match &row.outcome {
                RowOutcome::Point {
                    gain_mag,
                    gain_phase_deg,
                    efficiency,
                    i1_mag,
                    i2_mag,
                    vload_mag,
                } => {
                    out.push_str(&format!(
                        "{},{},{},{gain_mag},{gain_phase_deg},{efficiency},{i1_mag},{i2_mag},{vload_mag}\n",
                        row.curve,
                        self.variable.label(),
                        row.value,
                    ));
                }
                RowOutcome::Failed { .. } => {
                    out.push_str(&format!(
                        "{},{},{},nan,nan,nan,nan,nan,nan\n",
                        row.curve,
                        self.variable.label(),
                        row.value,
                    ));
                }
            }
        }
        out
    }

    /// Solved efficiency of the point closest to `value` on `curve`.
    pub fn efficiency_at(&self, curve: &str, value: f64) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.curve == curve)
            .min_by(|a, b| {
                (a.value - value)
                    .abs()
                    .total_cmp(&(b.value - value).abs())
            })
            .and_then(|r| match r.outcome {
                RowOutcome::Point { efficiency, .. } => Some(efficiency),
                RowOutcome::Failed { .. } => None,
            })
    }
}

fn substitute(
    base: &LinkDesign,
    variable: SweepVariable,
    value: f64,
) -> Result<LinkDesign> {
    match variable {
        SweepVariable::K => base.with_k(value),
        SweepVariable::RLoad => base.with_r_load(value),
        SweepVariable::FreqHz => base.with_freq_hz(value),
    }
}

/// Evaluate the grid. Endpoints are inclusive, spacing uniform, rows ordered
/// by (curve, swept value) ascending, and individual failures become error
/// rows rather than aborting the sweep.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepTable> {
    let mut curves: Vec<(String, Option<(SweepVariable, f64)>)> = Vec::new();
    let mut unsafe_curves = Vec::new();
    match &spec.family {
        None => curves.push(("base".to_string(), None)),
        Some((fam_var, values)) => {
            let mut sorted = values.clone();
            sorted.sort_by(|a, b| a.total_cmp(b));
            for v in sorted {
                let label = format!("{}={}", fam_var.label(), v);
                if *fam_var == SweepVariable::K && v > K_SAFETY_LIMIT {
                    unsafe_curves.push(label.clone());
                }
                curves.push((label, Some((*fam_var, v))));
            }
        }
    }

    let mut rows = Vec::with_capacity(curves.len() * spec.steps);
    for (curve, fam) in &curves {
        for idx in 0..spec.steps {
            let value = spec.grid_value(idx);
            let solved = (|| -> Result<RowOutcome> {
                let mut design = spec.base;
                if let Some((fam_var, fam_value)) = fam {
                    design = substitute(&design, *fam_var, *fam_value)?;
                }
                design = substitute(&design, spec.variable, value)?;
                let r = solve_link(&design)?;
                Ok(RowOutcome::Point {
                    gain_mag: r.gain_mag,
                    gain_phase_deg: r.gain.arg().to_degrees(),
                    efficiency: r.efficiency,
                    i1_mag: r.i1.norm(),
                    i2_mag: r.i2.norm(),
                    vload_mag: r.v_load.norm(),
                })
            })();
            let outcome = match solved {
                Ok(point) => point,
                Err(e) => RowOutcome::Failed {
                    message: e.to_string(),
                },
            };
            rows.push(SweepRow {
                curve: curve.clone(),
                value,
                outcome,
            });
        }
    }

    Ok(SweepTable {
        variable: spec.variable,
        rows,
        unsafe_curves,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig7,
    Fig8,
    Fig9,
    Fig10,
}

impl Figure {
    pub fn label(self) -> &'static str {
        match self {
            Figure::Fig7 => "fig7",
            Figure::Fig8 => "fig8",
            Figure::Fig9 => "fig9",
            Figure::Fig10 => "fig10",
        }
    }
}

impl std::str::FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig7" => Ok(Figure::Fig7),
            "fig8" => Ok(Figure::Fig8),
            "fig9" => Ok(Figure::Fig9),
            "fig10" => Ok(Figure::Fig10),
            other => Err(Error::InvalidSweep {
                message: format!("unknown figure '{other}' (expected fig7..fig10)"),
            }),
        }
    }
}

/// Reference sweep behind each bundled figure: table1 coils at 13.56 MHz,
/// no source resistance, unit drive, resonant C1s (and the tank C2p for the
/// series-parallel figures, chosen once at the 320 Ω reference load), load
/// swept 1-400 Ω over 400 points, coupling family {0.2, 0.4, 0.6, 0.8}.
/// Family members above the safety limit are generated for figure parity
/// and flagged in the table metadata.
pub fn figure_preset(which: Figure) -> Result<SweepSpec> {
    let topology = match which {
        Figure::Fig7 | Figure::Fig8 => Topology::SeriesPrimary,
        Figure::Fig9 | Figure::Fig10 => Topology::SeriesParallel,
    };
    let c1s = series_resonance_cap(table1::FREQ_HZ, table1::L1)?;
    let tuning = match topology {
        Topology::SeriesPrimary => TuningSpec::series(c1s)?,
        Topology::SeriesParallel => {
            let c2p = parallel_tank_cap(table1::FREQ_HZ, table1::L2, table1::R_LOAD)?;
            TuningSpec::series_parallel(c1s, c2p)?
        }
    };
    let base = LinkDesign::new(
        topology,
        CoilPair::new(table1::L1, table1::L2, table1::R_L1, table1::R_L2, 0.4)?,
        SourceSpec::default(),
        LoadSpec::new(table1::R_LOAD)?,
        tuning,
        table1::FREQ_HZ,
    )?;
    SweepSpec::new(
        base,
        SweepVariable::RLoad,
        1.0,
        400.0,
        400,
        Some((SweepVariable::K, vec![0.2, 0.4, 0.6, 0.8])),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure_presets_have_four_curves_of_400_points() {
        for figure in [Figure::Fig7, Figure::Fig9] {
            let spec = figure_preset(figure).unwrap();
            let table = run_sweep(&spec).unwrap();
            assert_eq!(table.rows().len(), 1600);
            let first_curve: Vec<_> = table.rows().iter().filter(|r| r.curve == "k=0.2").collect();
            assert_eq!(first_curve.len(), 400);
            assert_eq!(first_curve.first().unwrap().value, 1.0);
            assert_eq!(first_curve.last().unwrap().value, 400.0);
            assert_eq!(table.unsafe_curves(), ["k=0.6", "k=0.8"]);
        }
    }

    #[test]
    fn preset_operating_points() {
        let fig8 = run_sweep(&figure_preset(Figure::Fig8).unwrap()).unwrap();
        let eta = fig8.efficiency_at("k=0.4", 320.0).unwrap();
        assert!((eta - 0.8986584222849168).abs() <= 1e-9);

        let fig10 = run_sweep(&figure_preset(Figure::Fig10).unwrap()).unwrap();
        let eta = fig10.efficiency_at("k=0.4", 320.0).unwrap();
        assert!((eta - 0.9049696620186056).abs() <= 1e-9);
    }

    #[test]
    fn two_step_sweep_keeps_both_endpoints() {
        let base = *figure_preset(Figure::Fig7).unwrap().base();
        let spec = SweepSpec::new(base, SweepVariable::RLoad, 10.0, 20.0, 2, None).unwrap();
        let table = run_sweep(&spec).unwrap();
        assert_eq!(table.rows().len(), 2);
        assert_eq!(table.rows()[0].value, 10.0);
        assert_eq!(table.rows()[1].value, 20.0);
    }

    #[test]
    fn identical_specs_emit_identical_bytes() {
        let spec = figure_preset(Figure::Fig7).unwrap();
        let a = run_sweep(&spec).unwrap().to_csv();
        let b = run_sweep(&spec).unwrap().to_csv();
        assert_eq!(a, b);
        assert!(a.starts_with(CSV_HEADER));
        assert_eq!(a.lines().count(), 1601);
    }

    #[test]
    fn rows_are_ordered_by_curve_then_value() {
        let table = run_sweep(&figure_preset(Figure::Fig9).unwrap()).unwrap();
        let mut last: Option<(&str, f64)> = None;
        for row in table.rows() {
            if let Some((curve, value)) = last {
                assert!(
                    row.curve.as_str() > curve || (row.curve == curve && row.value > value)
                );
            }
            last = Some((row.curve.as_str(), row.value));
        }
    }

    #[test]
    fn invalid_family_values_become_error_rows() {
        let base = *figure_preset(Figure::Fig7).unwrap().base();
        let spec = SweepSpec::new(
            base,
            SweepVariable::RLoad,
            100.0,
            200.0,
            3,
            Some((SweepVariable::K, vec![0.3, 1.5])),
        )
        .unwrap();
        let table = run_sweep(&spec).unwrap();
        assert_eq!(table.rows().len(), 6);
        let failed: Vec<_> = table
            .rows()
            .iter()
            .filter(|r| matches!(r.outcome, RowOutcome::Failed { .. }))
            .collect();
        assert_eq!(failed.len(), 3);
        assert!(failed.iter().all(|r| r.curve == "k=1.5"));
        let csv = table.to_csv();
        assert!(csv.contains("k=1.5,r_load,100,nan,nan,nan,nan,nan,nan"));
    }

    #[test]
    fn sweep_domain_validation() {
        let base = *figure_preset(Figure::Fig7).unwrap().base();
        assert!(SweepSpec::new(base, SweepVariable::K, 0.2, 1.2, 5, None).is_err());
        assert!(SweepSpec::new(base, SweepVariable::FreqHz, 0.0, 1e6, 5, None).is_err());
        assert!(SweepSpec::new(base, SweepVariable::RLoad, 10.0, 5.0, 5, None).is_err());
        assert!(SweepSpec::new(base, SweepVariable::RLoad, 1.0, 400.0, 1, None).is_err());
        assert!(SweepSpec::new(
            base,
            SweepVariable::RLoad,
            1.0,
            400.0,
            4,
            Some((SweepVariable::RLoad, vec![1.0]))
        )
        .is_err());
        // r_load sweep down from zero floors instead of failing
        let spec = SweepSpec::new(base, SweepVariable::RLoad, 0.0, 400.0, 3, None).unwrap();
        let table = run_sweep(&spec).unwrap();
        assert_eq!(table.rows()[0].value, R_LOAD_FLOOR);
    }

    #[test]
    fn fig7_gain_rises_with_load_and_fig9_rises_beyond_100() {
        let fig7 = run_sweep(&figure_preset(Figure::Fig7).unwrap()).unwrap();
        for curve in ["k=0.2", "k=0.4", "k=0.6", "k=0.8"] {
            let gains: Vec<f64> = fig7
                .rows()
                .iter()
                .filter(|r| r.curve == curve)
                .map(|r| match r.outcome {
                    RowOutcome::Point { gain_mag, .. } => gain_mag,
                    RowOutcome::Failed { .. } => panic!("unexpected failure"),
                })
                .collect();
            assert!(gains.windows(2).all(|w| w[1] > w[0]), "{curve} not rising");
        }
        let fig9 = run_sweep(&figure_preset(Figure::Fig9).unwrap()).unwrap();
        let gains: Vec<(f64, f64)> = fig9
            .rows()
            .iter()
            .filter(|r| r.curve == "k=0.4" && r.value >= 100.0)
            .map(|r| match r.outcome {
                RowOutcome::Point { gain_mag, .. } => (r.value, gain_mag),
                RowOutcome::Failed { .. } => panic!("unexpected failure"),
            })
            .collect();
        assert!(gains.windows(2).all(|w| w[1].1 > w[0].1));
    }
}
