//! Tuning capacitor selection and constrained efficiency/gain search.
//!
//! The primary capacitor resonates the primary loop, C1s = 1/(ω²L1). The
//! secondary capacitor is chosen so the transformed load cancels the
//! secondary coil reactance, Im[Zload] + ωL2 = 0, which in the normalized
//! variable u = ωC2p·Rload is the quadratic ωL2·u² − Rload·u + ωL2 = 0.
//! The smaller root keeps Re[Zload] high and is the one that reproduces the
//! reference operating point; the larger root collapses the load to a few
//! ohms and throws the gain away.

use crate::error::{Error, Result};
use crate::link::{branch_a, LinkDesign, Topology, TuningSpec, K_SAFETY_LIMIT};
use crate::phasor::AngularFrequency;

/// Chosen capacitors plus the worst residual reactance left in the tuned
/// branches, in ohms.
#[derive(Debug, Clone, Copy)]
pub struct TuneResult {
    pub c1s: f64,
    pub c2p: Option<f64>,
    pub achieved_resonance_residual: f64,
}

/// C1s = 1/(ω²·L1).
pub fn series_resonance_cap(freq_hz: f64, l1: f64) -> Result<f64> {
    let w = AngularFrequency::from_hz(freq_hz)?.rad_per_s();
    if !l1.is_finite() {
        return Err(Error::NonFinite {
            name: "primary inductance l1 (H)",
            value: l1,
        });
    }
    if l1 <= 0.0 {
        return Err(Error::NonPositive {
            name: "primary inductance l1 (H)",
            value: l1,
        });
    }
    Ok(1.0 / (w * w * l1))
}

/// Smaller root of ωL2·u² − Rload·u + ωL2 = 0, returned as C2p = u/(ω·Rload).
/// Requires Rload ≥ 2ωL2 for a real resonance.
pub fn parallel_tank_cap(freq_hz: f64, l2: f64, r_load: f64) -> Result<f64> {
    let w = AngularFrequency::from_hz(freq_hz)?.rad_per_s();
    if l2 <= 0.0 || !l2.is_finite() {
        return Err(Error::NonPositive {
            name: "secondary inductance l2 (H)",
            value: l2,
        });
    }
    if r_load <= 0.0 || !r_load.is_finite() {
        return Err(Error::NonPositive {
            name: "load resistance r_load (Ω)",
            value: r_load,
        });
    }
    let wl2 = w * l2;
    let disc = r_load * r_load - 4.0 * wl2 * wl2;
    if disc < 0.0 {
        return Err(Error::NoTankResonance {
            r_load,
            min_r_load: 2.0 * wl2,
        });
    }
    let u = (r_load - disc.sqrt()) / (2.0 * wl2);
    Ok(u / (w * r_load))
}

/// Apply resonant capacitors to a design and report the achieved residuals.
pub fn tune_design(design: &LinkDesign) -> Result<(LinkDesign, TuneResult)> {
    let c1s = series_resonance_cap(design.freq_hz(), design.coils().l1())?;
    let tuning = match design.topology() {
        Topology::SeriesPrimary => TuningSpec::series(c1s)?,
        Topology::SeriesParallel => {
            let c2p = parallel_tank_cap(design.freq_hz(), design.coils().l2(), design.load().r_load())?;
            TuningSpec::series_parallel(c1s, c2p)?
        }
    };
    let tuned = design.with_tuning(tuning)?;
    let residual_primary = branch_a(&tuned).im().abs();
    let residual = match tuned.tuning().c2p() {
        None => residual_primary,
        Some(c2p) => {
            let w = tuned.freq();
            let zl = crate::link::zload_parallel(tuned.load().r_load(), c2p, w)?;
            let residual_secondary = (zl.im() + w.rad_per_s() * tuned.coils().l2()).abs();
            residual_primary.max(residual_secondary)
        }
    };
    Ok((
        tuned,
        TuneResult {
            c1s,
            c2p: tuned.tuning().c2p(),
            achieved_resonance_residual: residual,
        },
    ))
}

/// Design variable the optimizer may move.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreeVariable {
    K,
    RLoad,
    C1s,
    C2p,
}

impl FreeVariable {
    pub fn label(self) -> &'static str {
        match self {
            FreeVariable::K => "k",
            FreeVariable::RLoad => "r_load",
            FreeVariable::C1s => "c1s",
            FreeVariable::C2p => "c2p",
        }
    }
}

impl std::str::FromStr for FreeVariable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "k" => Ok(FreeVariable::K),
            "r_load" | "rload" => Ok(FreeVariable::RLoad),
            "c1s" => Ok(FreeVariable::C1s),
            "c2p" => Ok(FreeVariable::C2p),
            other => Err(Error::UnknownVariable {
                name: other.to_string(),
                expected: "k, r_load, c1s, c2p",
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Efficiency,
    GainMag,
}

impl Objective {
    pub fn label(self) -> &'static str {
        match self {
            Objective::Efficiency => "efficiency",
            Objective::GainMag => "gain_mag",
        }
    }
}

/// Bounded search over a subset of design variables. The coupling upper
/// bound is capped at the tissue-safety limit unless explicitly overridden.
#[derive(Debug, Clone)]
pub struct OptimizationProblem {
    base: LinkDesign,
    free: Vec<(FreeVariable, (f64, f64))>,
    objective: Objective,
}

impl OptimizationProblem {
    pub fn new(
        base: LinkDesign,
        free: Vec<(FreeVariable, (f64, f64))>,
        objective: Objective,
        allow_unsafe: bool,
    ) -> Result<Self> {
        if free.is_empty() {
            return Err(Error::NoFreeVariables);
        }
        let mut seen = Vec::new();
        for &(var, (lo, hi)) in &free {
            if seen.contains(&var) {
                return Err(Error::InvalidBounds {
                    variable: format!("{} listed twice", var.label()),
                    lo,
                    hi,
                });
            }
            seen.push(var);
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidBounds {
                    variable: var.label().to_string(),
                    lo,
                    hi,
                });
            }
            let domain_ok = match var {
                FreeVariable::K => lo >= 0.0 && hi < 1.0,
                FreeVariable::RLoad | FreeVariable::C1s => lo > 0.0,
                FreeVariable::C2p => lo >= 0.0,
            };
            if !domain_ok {
                return Err(Error::InvalidBounds {
                    variable: var.label().to_string(),
                    lo,
                    hi,
                });
            }
            if var == FreeVariable::K && hi > K_SAFETY_LIMIT && !allow_unsafe {
                return Err(Error::UnsafeCoupling {
                    k: hi,
                    limit: K_SAFETY_LIMIT,
                });
            }
            if var == FreeVariable::C2p && base.topology() != Topology::SeriesParallel {
                return Err(Error::WrongTopology {
                    op: "optimizing c2p",
                    expected: Topology::SeriesParallel.label(),
                    actual: base.topology().label(),
                });
            }
        }
        Ok(Self {
            base,
            free,
            objective,
        })
    }

    pub fn free_variables(&self) -> &[(FreeVariable, (f64, f64))] {
        &self.free
    }
}

/// One objective evaluation.
#[derive(Debug, Clone)]
pub struct TracePoint {
    pub values: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct OptimizationOutcome {
    pub best: LinkDesign,
    pub best_values: Vec<(FreeVariable, f64)>,
    pub objective_value: f64,
    pub trace: Vec<TracePoint>,
}

fn apply_values(base: &LinkDesign, free: &[(FreeVariable, (f64, f64))], values: &[f64]) -> Result<LinkDesign> {
    let mut design = *base;
    for (&(var, _), &v) in free.iter().zip(values) {
        design = match var {
            FreeVariable::K => design.with_k(v)?,
            FreeVariable::RLoad => design.with_r_load(v)?,
            FreeVariable::C1s => {
                let tuning = match design.tuning().c2p() {
                    None => TuningSpec::series(v)?,
                    Some(c2p) => TuningSpec::series_parallel(v, c2p)?,
                };
                design.with_tuning(tuning)?
            }
            FreeVariable::C2p => {
                design.with_tuning(TuningSpec::series_parallel(design.tuning().c1s(), v)?)?
            }
        };
    }
    Ok(design)
}

fn objective_of(design: &LinkDesign, objective: Objective) -> Result<f64> {
    let solved = crate::link::solve_link(design)?;
    Ok(match objective {
        Objective::Efficiency => solved.efficiency,
        Objective::GainMag => solved.gain_mag,
    })
}

const GRID_POINTS: usize = 32;
const GOLDEN_RELATIVE_TOL: f64 = 1e-6;
const COORDINATE_PASSES: usize = 6;

/// Coarse grid scan followed by coordinate-wise golden-section refinement.
/// The returned point is the best over every evaluation in the trace.
pub fn optimize(problem: &OptimizationProblem) -> Result<OptimizationOutcome> {
    let free = &problem.free;
    let dims = free.len();
    let mut trace: Vec<TracePoint> = Vec::new();
    let mut best: Option<(Vec<f64>, f64)> = None;

    let evaluate = |values: &[f64], trace: &mut Vec<TracePoint>, best: &mut Option<(Vec<f64>, f64)>| -> Option<f64> {
        let obj = apply_values(&problem.base, free, values)
            .and_then(|d| objective_of(&d, problem.objective))
            .ok()?;
        trace.push(TracePoint {
            values: values.to_vec(),
            objective: obj,
        });
        if best.as_ref().is_none_or(|(_, b)| obj > *b) {
            *best = Some((values.to_vec(), obj));
        }
        Some(obj)
    };

    // inclusive grid, GRID_POINTS per dimension, endpoints exact
    let grid_value = |dim: usize, idx: usize| -> f64 {
        let (lo, hi) = free[dim].1;
        match idx {
            0 => lo,
            i if i == GRID_POINTS - 1 => hi,
            i => lo + (hi - lo) * i as f64 / (GRID_POINTS - 1) as f64,
        }
    };
    let total = GRID_POINTS.pow(dims as u32);
    let mut values = vec![0.0; dims];
    for flat in 0..total {
        let mut rest = flat;
        for (d, value) in values.iter_mut().enumerate() {
            *value = grid_value(d, rest % GRID_POINTS);
            rest /= GRID_POINTS;
        }
        evaluate(&values, &mut trace, &mut best);
    }
    let (mut current, _) = best.clone().ok_or_else(|| Error::Infeasible {
        message: "every grid point failed to evaluate".into(),
    })?;

    // golden-section refinement, one coordinate at a time
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    for _ in 0..COORDINATE_PASSES {
        let before = best.as_ref().map(|(_, b)| *b).unwrap_or(f64::NEG_INFINITY);
        for d in 0..dims {
            let (lo, hi) = free[d].1;
            let step = (hi - lo) / (GRID_POINTS - 1) as f64;
            let mut a = (current[d] - step).max(lo);
            let mut b = (current[d] + step).min(hi);
            let tol = GOLDEN_RELATIVE_TOL * a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
            let mut probe = current.clone();
            while b - a > tol {
                let x1 = b - inv_phi * (b - a);
                let x2 = a + inv_phi * (b - a);
                probe[d] = x1;
                let f1 = evaluate(&probe, &mut trace, &mut best).unwrap_or(f64::NEG_INFINITY);
                probe[d] = x2;
                let f2 = evaluate(&probe, &mut trace, &mut best).unwrap_or(f64::NEG_INFINITY);
                if f1 >= f2 {
                    b = x2;
                } else {
                    a = x1;
                }
            }
            if let Some((ref v, _)) = best {
                current = v.clone();
            }
        }
        let after = best.as_ref().map(|(_, b)| *b).unwrap_or(f64::NEG_INFINITY);
        if after - before <= f64::EPSILON * after.abs() {
            break;
        }
    }

    let (best_values, objective_value) = best.expect("feasible point found above");
    let best_design = apply_values(&problem.base, free, &best_values)?;
    Ok(OptimizationOutcome {
        best: best_design,
        best_values: free
            .iter()
            .map(|&(var, _)| var)
            .zip(best_values.iter().copied())
            .collect(),
        objective_value,
        trace,
    })
}
