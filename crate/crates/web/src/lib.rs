//! Browser front end: datum summaries, the control problem at a chosen R and
//! the critical-parameter search, on expansions small enough for a page.
//!
//! Results cross the JS boundary as JSON strings.

use reynolds_core::control::{classical_bounds, classify, find_critical_r, solve_control, ControlParams, Verdict};
use reynolds_core::data::datum_by_name;
use reynolds_core::estimators::{ConstantsTable, EstimatorBasis, GridSpec, Variant};
use reynolds_core::expansion::{expand, ExpansionConfig};
use reynolds_core::numeric;
use reynolds_core::symmetry::find_symmetries;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest order the page may request; beyond it a tab stalls for minutes.
pub const MAX_ORDER: usize = 4;

const PRECISION: usize = 128;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

#[derive(Serialize)]
struct Summary {
    datum: String,
    norm_1: f64,
    norm_3: f64,
    reynolds_factor: f64,
    probe: [i32; 3],
    probe_coefficient: f64,
    symmetries: usize,
    reduced_plus: usize,
    reduced_minus: usize,
    classical_h3: f64,
    classical_h1: f64,
}

pub fn summary_json(datum: &str) -> Result<String, String> {
    let d = datum_by_name(datum).map_err(err)?;
    let sym = find_symmetries(&d.field).map_err(err)?;
    let c = classical_bounds(&d, &ConstantsTable::default()).map_err(err)?;
    let s = Summary {
        datum: d.name.clone(),
        norm_1: d.field.sobolev_norm_f64(1),
        norm_3: d.field.sobolev_norm_f64(3),
        reynolds_factor: numeric::to_f64(&d.rey_factor(PRECISION)),
        probe: d.probe.0,
        probe_coefficient: d.gamma0(),
        symmetries: sym.plus.len(),
        reduced_plus: sym.reduced_plus.len(),
        reduced_minus: sym.reduced_minus.len(),
        classical_h3: c.r_h3,
        classical_h1: c.r_h1,
    };
    serde_json::to_string(&s).map_err(err)
}

/// Datum norms, scales, symmetry counts and classical bounds.
#[wasm_bindgen(js_name = datumSummary)]
pub fn datum_summary(datum: &str) -> Result<String, JsError> {
    summary_json(datum).map_err(|e| JsError::new(&e))
}

/// An expansion with its sampled estimators, reused across parameter values.
#[wasm_bindgen]
pub struct Session {
    datum: String,
    order: usize,
    variant: Variant,
    basis: EstimatorBasis,
    reynolds_factor: f64,
}

#[derive(Serialize)]
struct ControlResult {
    r: f64,
    rey: f64,
    verdict: Verdict,
    label: &'static str,
    ts: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Serialize)]
struct CriticalResult {
    lo: f64,
    hi: f64,
    rey_lo: f64,
    rey_hi: f64,
    probes: usize,
}

impl Session {
    pub fn build(datum: &str, order: usize, variant: &str, grid_points: usize) -> Result<Session, String> {
        if order > MAX_ORDER {
            return Err(format!("order {order} is too large for the browser (max {MAX_ORDER})"));
        }
        let d = datum_by_name(datum).map_err(err)?;
        let variant: Variant = variant.parse().map_err(err)?;
        let mut exp = expand(&d.name, &d.field, order, &ExpansionConfig::default()).map_err(err)?;
        let grid = GridSpec {
            points: grid_points,
            ..GridSpec::default()
        }
        .nodes()
        .map_err(err)?;
        let basis = EstimatorBasis::new(&mut exp, 3, &[], variant.needs_tail(), &grid, PRECISION).map_err(err)?;
        Ok(Session {
            datum: d.name.clone(),
            order,
            variant,
            basis,
            reynolds_factor: numeric::to_f64(&d.rey_factor(PRECISION)),
        })
    }

    pub fn control_json(&self, r: f64) -> Result<String, String> {
        let c = ConstantsTable::default();
        let set = self.basis.estimator_set(r, self.variant, &c).map_err(err)?;
        let tr = solve_control(&set, &c, &ControlParams::default()).map_err(err)?;
        // thin out long trajectories for plotting
        let stride = (tr.ts.len() / 2000).max(1);
        let keep = |v: &[f64]| v.iter().step_by(stride).copied().collect::<Vec<_>>();
        let res = ControlResult {
            r,
            rey: r * self.reynolds_factor,
            label: tr.verdict.label(),
            verdict: tr.verdict.clone(),
            ts: keep(&tr.ts),
            values: keep(&tr.values),
        };
        serde_json::to_string(&res).map_err(err)
    }

    pub fn critical_json(&self, lo: f64, hi: f64, tol: f64) -> Result<String, String> {
        let c = ConstantsTable::default();
        let p = ControlParams::default();
        let br = find_critical_r(lo, hi, tol, 1, |r| classify(&self.basis, r, self.variant, &c, &p)).map_err(err)?;
        let res = CriticalResult {
            lo: br.lo,
            hi: br.hi,
            rey_lo: br.lo * self.reynolds_factor,
            rey_hi: br.hi * self.reynolds_factor,
            probes: br.probes.len(),
        };
        serde_json::to_string(&res).map_err(err)
    }
}

#[wasm_bindgen]
impl Session {
    #[wasm_bindgen(constructor)]
    pub fn new(datum: &str, order: usize, variant: &str, grid_points: usize) -> Result<Session, JsError> {
        Session::build(datum, order, variant, grid_points).map_err(|e| JsError::new(&e))
    }

    /// Trajectory and verdict at one parameter value.
    pub fn control(&self, r: f64) -> Result<String, JsError> {
        self.control_json(r).map_err(|e| JsError::new(&e))
    }

    /// Critical bracket by bisection between `lo` and `hi`.
    pub fn critical(&self, lo: f64, hi: f64, tol: f64) -> Result<String, JsError> {
        self.critical_json(lo, hi, tol).map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen(getter)]
    pub fn description(&self) -> String {
        format!("{} N={} {}", self.datum, self.order, self.variant)
    }
}
