//! The scalar Riccati control problem
//!
//! `R_n' = -R_n + R (G_n D_n + K_n D_{n+1}) R_n + R G_n R_n^2 + eps_n`, `R_n(0) = 0`,
//!
//! whose global solvability (with decay) indicates that the exact solution
//! stays within `R_n(t)` of the truncated expansion in the `H^n` norm.
//! Verdicts are numerical indications, not proofs.

use std::fmt::Write as _;

use ode_solvers::continuous_output_model::ContinuousOutputModel;
use ode_solvers::{Dopri5, OutputType, System, Vector1};
use serde::{Deserialize, Serialize};

use crate::data::DatumDescriptor;
use crate::error::{Error, Result};
use crate::estimators::{ConstantsTable, EstimatorBasis, EstimatorSet, Variant};
use crate::fields::WaveVector;
use crate::parallel::par_map;

/// Constant of the classical small-data bound in `H^1`.
pub const H1_SMALL_DATA_CONSTANT: f64 = 0.407;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlParams {
    /// End of the integration window; `None` uses the end of the estimator grid.
    pub t_max: Option<f64>,
    pub blowup_threshold: f64,
    /// A step below this after the threshold crossing corroborates blow-up.
    pub collapse_step: f64,
    /// GlobalDecay needs `R_n(t_max) < decay_ratio * max R_n`.
    pub decay_ratio: f64,
    /// Fraction of the window, at its end, over which `R_n` must decrease.
    pub trend_window: f64,
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub max_steps: u32,
}

impl Default for ControlParams {
    fn default() -> Self {
        ControlParams {
            t_max: None,
            blowup_threshold: 1e6,
            collapse_step: 1e-12,
            decay_ratio: 1e-6,
            trend_window: 0.1,
            rtol: 1e-10,
            atol: 1e-14,
            max_step: 0.1,
            max_steps: 2_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    GlobalDecay,
    /// `t_c` is where the step size collapsed; `t_threshold` where the
    /// solution first exceeded the threshold.
    BlowUp { t_c: f64, t_threshold: f64 },
    Inconclusive { t_end: f64, trend: String },
}

impl Verdict {
    pub fn is_decay(&self) -> bool {
        matches!(self, Verdict::GlobalDecay)
    }

    pub fn is_blowup(&self) -> bool {
        matches!(self, Verdict::BlowUp { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::GlobalDecay => "GlobalDecay",
            Verdict::BlowUp { .. } => "BlowUp",
            Verdict::Inconclusive { .. } => "Inconclusive",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: u32,
    pub rejected: u32,
    pub evaluations: u32,
    pub min_step: f64,
}

/// Solution of the control problem at the solver's accepted steps.
#[derive(Clone, Debug)]
pub struct ControlTrajectory {
    pub r: f64,
    pub n: i32,
    pub ts: Vec<f64>,
    pub values: Vec<f64>,
    pub verdict: Verdict,
    pub max_value: f64,
    pub last_value: f64,
    pub stats: StepStats,
    pub params: ControlParams,
    /// The solver's own continuous extension between steps.
    dense: Option<ContinuousOutputModel<f64, Vector1<f64>>>,
}

/// Riccati right-hand side with coefficients from an estimator set.
struct Riccati<'a> {
    est: &'a EstimatorSet,
    rg: f64,
    rk: f64,
    threshold: f64,
    collapse_step: f64,
    last_t: f64,
    crossed: bool,
}

fn riccati_rhs(est: &EstimatorSet, rg: f64, rk: f64, t: f64, y: f64) -> f64 {
    let (d0, d1, eps) = est.eval(t);
    -y + (rg * d0 + rk * d1) * y + rg * y * y + eps
}

impl System<f64, Vector1<f64>> for Riccati<'_> {
    fn system(&self, t: f64, y: &Vector1<f64>, dy: &mut Vector1<f64>) {
        dy[0] = riccati_rhs(self.est, self.rg, self.rk, t, y[0]);
    }

    // stops on a non-finite state or a collapsed step past the threshold
    fn solout(&mut self, t: f64, y: &Vector1<f64>, _dy: &Vector1<f64>) -> bool {
        let step = t - self.last_t;
        self.last_t = t;
        if !y[0].is_finite() {
            return true;
        }
        self.crossed |= y[0] > self.threshold;
        self.crossed && step < self.collapse_step
    }
}

/// Integrates the control problem for the estimators in `est`.
pub fn solve_control(est: &EstimatorSet, constants: &ConstantsTable, params: &ControlParams) -> Result<ControlTrajectory> {
    let n = est.meta.n;
    let r = est.meta.r;
    let g = constants.g(n)?;
    let k = constants.k(n)?;
    let t_max = params.t_max.unwrap_or(est.t_max());
    if !(t_max > 0.0) || t_max > est.t_max() * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "t_max {t_max} must lie in (0, {}] (the estimator grid)",
            est.t_max()
        )));
    }
    let sys = Riccati {
        est,
        rg: r * g,
        rk: r * k,
        threshold: params.blowup_threshold,
        collapse_step: params.collapse_step,
        last_t: 0.0,
        crossed: false,
    };
    let mut solver = Dopri5::from_param(
        sys,
        0.0,
        t_max,
        t_max,
        Vector1::new(0.0),
        params.rtol,
        params.atol,
        0.9,
        0.04,
        0.2,
        10.0,
        params.max_step.min(t_max),
        0.0,
        params.max_steps,
        u32::MAX,
        OutputType::Continuous,
    );
    let mut dense = ContinuousOutputModel::default();
    let outcome = solver.integrate_with_continuous_output_model(&mut dense);
    let (xs, ys) = solver.results().get();
    let mut ts = vec![0.0];
    let mut values = vec![0.0];
    for (x, y) in xs.iter().zip(ys) {
        if *x > *ts.last().unwrap() {
            ts.push(*x);
            values.push(y[0]);
        }
    }
    let stats_raw = match &outcome {
        Ok(s) => Some(*s),
        Err(_) => None,
    };
    let slopes: Vec<f64> = ts
        .iter()
        .zip(&values)
        .map(|(t, y)| riccati_rhs(est, r * g, r * k, *t, *y))
        .collect();
    let mut min_step = f64::INFINITY;
    let mut crossed = None;
    let mut collapsed = false;
    for i in 1..ts.len() {
        let step = ts[i] - ts[i - 1];
        min_step = min_step.min(step);
        if !values[i].is_finite() {
            collapsed = crossed.is_some();
            break;
        }
        if crossed.is_none() && values[i] > params.blowup_threshold {
            crossed = Some(ts[i]);
        }
        if crossed.is_some() && step < params.collapse_step {
            collapsed = true;
        }
    }
    let t_end = *ts.last().unwrap();
    if let Err(e) = &outcome {
        // a step-size underflow after the crossing is the same collapse
        if crossed.is_some() && matches!(e, ode_solvers::dop_shared::IntegrationError::StepSizeUnderflow { .. }) {
            collapsed = true;
        } else if crossed.is_none() {
            return Err(Error::Numerical(format!("control integration failed: {e}")));
        }
    }
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let max_value = finite.iter().copied().fold(0.0, f64::max);
    let last_value = *values.last().unwrap();
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Numerical("control solution became NaN".into()));
    }
    if finite.iter().any(|v| *v < -params.atol) {
        return Err(Error::Invariant("control solution went negative".into()));
    }
    let verdict = match crossed {
        Some(t_threshold) if collapsed => Verdict::BlowUp { t_c: t_end, t_threshold },
        Some(t_threshold) => Verdict::Inconclusive {
            t_end,
            trend: format!("exceeded {} at t = {t_threshold} without step collapse", params.blowup_threshold),
        },
        None => decay_verdict(&ts, &values, &slopes, t_max, params),
    };
    let stats = StepStats {
        accepted: stats_raw.map_or(ts.len() as u32 - 1, |s| s.accepted_steps),
        rejected: stats_raw.map_or(0, |s| s.rejected_steps),
        evaluations: stats_raw.map_or(0, |s| s.num_eval),
        min_step,
    };
    Ok(ControlTrajectory {
        r,
        n,
        ts,
        values,
        verdict,
        max_value,
        last_value,
        stats,
        params: ControlParams {
            t_max: Some(t_max),
            ..params.clone()
        },
        dense: Some(dense),
    })
}

fn decay_verdict(ts: &[f64], ys: &[f64], dys: &[f64], t_max: f64, params: &ControlParams) -> Verdict {
    let max = ys.iter().copied().fold(0.0, f64::max);
    let last = *ys.last().unwrap();
    if max == 0.0 {
        return Verdict::GlobalDecay;
    }
    let t_end = *ts.last().unwrap();
    if t_end < t_max * (1.0 - 1e-12) {
        return Verdict::Inconclusive {
            t_end,
            trend: "integration stopped early".into(),
        };
    }
    let from = t_max * (1.0 - params.trend_window);
    let decreasing = ts
        .iter()
        .zip(ys.iter().zip(dys))
        .filter(|(t, _)| **t >= from)
        .all(|(_, (y, dy))| *dy < 0.0 || (*y == 0.0 && *dy <= 0.0));
    let small = last < params.decay_ratio * max;
    if small && decreasing {
        Verdict::GlobalDecay
    } else {
        Verdict::Inconclusive {
            t_end,
            trend: format!(
                "final/max = {:.3e}, {} over the last {:.0}% of the window",
                last / max,
                if decreasing { "decreasing" } else { "not decreasing" },
                params.trend_window * 100.0
            ),
        }
    }
}

impl ControlTrajectory {
    pub fn t_end(&self) -> f64 {
        *self.ts.last().unwrap()
    }

    /// Dense output; `None` outside the integrated window.
    pub fn eval(&self, t: f64) -> Option<f64> {
        if !(0.0..=self.t_end()).contains(&t) {
            return None;
        }
        let i = self.ts.partition_point(|&x| x < t);
        if i < self.ts.len() && self.ts[i] == t {
            return Some(self.values[i]);
        }
        match &self.dense {
            Some(d) => d.evaluate(t).map(|y| y[0].max(0.0)),
            None => {
                let (t0, t1) = (self.ts[i - 1], self.ts[i]);
                let s = (t - t0) / (t1 - t0);
                Some(self.values[i - 1] * (1.0 - s) + self.values[i] * s)
            }
        }
    }

    /// A trajectory from explicit samples (e.g. read back from CSV),
    /// interpolated linearly between them.
    pub fn from_samples(r: f64, n: i32, ts: Vec<f64>, values: Vec<f64>, verdict: Verdict) -> Result<Self> {
        if ts.is_empty() || ts.len() != values.len() || ts[0] != 0.0 || ts.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("trajectory samples must start at 0 and increase".into()));
        }
        if values.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidArgument("trajectory samples must be >= 0".into()));
        }
        let max_value = values.iter().copied().fold(0.0, f64::max);
        let last_value = *values.last().unwrap();
        Ok(ControlTrajectory {
            r,
            n,
            ts,
            values,
            verdict,
            max_value,
            last_value,
            stats: StepStats::default(),
            params: ControlParams::default(),
            dense: None,
        })
    }

    pub fn to_csv(&self, provenance: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {provenance}");
        let _ = writeln!(s, "# R={} n={} verdict={}", self.r, self.n, self.verdict.label());
        s.push_str("t,R_n\n");
        for (t, y) in self.ts.iter().zip(&self.values) {
            let _ = writeln!(s, "{t:.16e},{y:.16e}");
        }
        s
    }

    pub fn record(&self, order: usize, variant: &str, datum: &str, provenance: &str) -> VerdictRecord {
        VerdictRecord {
            r: self.r,
            n: self.n,
            order,
            variant: variant.into(),
            datum: datum.into(),
            verdict: self.verdict.clone(),
            max_value: self.max_value,
            last_value: self.last_value,
            t_end: self.t_end(),
            stats: self.stats,
            settings: self.params.clone(),
            provenance: provenance.into(),
            note: "numerical indication, not a proof".into(),
        }
    }
}

/// JSON summary of one control integration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub r: f64,
    pub n: i32,
    pub order: usize,
    pub variant: String,
    pub datum: String,
    pub verdict: Verdict,
    pub max_value: f64,
    pub last_value: f64,
    pub t_end: f64,
    pub stats: StepStats,
    pub settings: ControlParams,
    pub provenance: String,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub r: f64,
    pub verdict: Verdict,
}

/// Result of the critical-parameter search: `lo` decays, `hi` does not.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalBracket {
    pub lo: f64,
    pub hi: f64,
    pub probes: Vec<Probe>,
}

/// Bracket search for the critical Reynolds parameter.
///
/// `probe(R)` classifies one parameter. Each round evaluates `per_round`
/// interior points concurrently; an inconclusive probe counts on the upper
/// side, so `lo` always carries a GlobalDecay verdict.
pub fn find_critical_r<F>(lo: f64, hi: f64, tol: f64, per_round: usize, probe: F) -> Result<CriticalBracket>
where
    F: Fn(f64) -> Result<Verdict> + Sync + Send,
{
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() || lo < 0.0 {
        return Err(Error::InvalidBracket(format!("need 0 <= lo < hi, got ({lo}, {hi})")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be positive")));
    }
    let per_round = per_round.max(1);
    let mut probes = Vec::new();
    let ends = par_map(&[lo, hi], |&r| probe(r));
    let mut ends = ends.into_iter();
    let (v_lo, v_hi) = (ends.next().unwrap()?, ends.next().unwrap()?);
    probes.push(Probe { r: lo, verdict: v_lo.clone() });
    probes.push(Probe { r: hi, verdict: v_hi.clone() });
    if !v_lo.is_decay() || !v_hi.is_blowup() {
        return Err(Error::InvalidBracket(format!(
            "endpoints do not straddle: R={lo} gives {}, R={hi} gives {}",
            v_lo.label(),
            v_hi.label()
        )));
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > tol {
        let pts: Vec<f64> = (1..=per_round)
            .map(|i| a + (b - a) * i as f64 / (per_round + 1) as f64)
            .collect();
        let verdicts = par_map(&pts, |&r| probe(r));
        let (mut na, mut nb) = (a, b);
        let mut upper_found = false;
        for (r, v) in pts.iter().zip(verdicts) {
            let v = v?;
            if !upper_found {
                if v.is_decay() {
                    na = *r;
                } else {
                    nb = *r;
                    upper_found = true;
                }
            }
            probes.push(Probe { r: *r, verdict: v });
        }
        a = na;
        b = nb;
    }
    Ok(CriticalBracket { lo: a, hi: b, probes })
}

/// Verdict of the control problem at one parameter value.
pub fn classify(
    basis: &EstimatorBasis,
    r: f64,
    variant: Variant,
    constants: &ConstantsTable,
    params: &ControlParams,
) -> Result<Verdict> {
    let est = basis.estimator_set(r, variant, constants)?;
    Ok(solve_control(&est, constants, params)?.verdict)
}

/// Samples of the higher-order bound `R_p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HigherOrderBound {
    pub r: f64,
    pub p: i32,
    pub n: i32,
    pub ts: Vec<f64>,
    pub values: Vec<f64>,
    /// `A_p` at the sample times.
    pub a: Vec<f64>,
}

// 5-point Gauss-Legendre rule on [-1, 1]
const GL_X: [f64; 5] = [
    0.0,
    -0.538_469_310_105_683_1,
    0.538_469_310_105_683_1,
    -0.906_179_845_938_664,
    0.906_179_845_938_664,
];
const GL_W: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];

fn gauss<F: Fn(f64) -> f64>(a: f64, b: f64, f: F) -> f64 {
    let (m, h) = ((a + b) / 2.0, (b - a) / 2.0);
    GL_X.iter().zip(GL_W).map(|(x, w)| w * f(m + h * x)).sum::<f64>() * h
}

/// `R_p(t) = exp(-t + R A_p(t)) int_0^t exp(s - R A_p(s)) eps_p(s) ds` with
/// `A_p' = G_p D_p + K_p D_{p+1} + G_pn R_n`.
///
/// Sampled on the union of the estimator grid and the trajectory steps,
/// within the trajectory's window (and before any blow-up).
pub fn solve_higher_order(
    est_p: &EstimatorSet,
    traj_n: &ControlTrajectory,
    constants: &ConstantsTable,
) -> Result<HigherOrderBound> {
    let p = est_p.meta.n;
    let n = traj_n.n;
    let r = est_p.meta.r;
    if (r - traj_n.r).abs() > 1e-15 * r.abs().max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "estimators at R={r} do not match the trajectory at R={}",
            traj_n.r
        )));
    }
    let (g_p, k_p, g_pn) = (constants.g(p)?, constants.k(p)?, constants.g_pn(p, n)?);
    let t_end = match traj_n.verdict {
        Verdict::BlowUp { t_threshold, .. } => t_threshold,
        _ => traj_n.t_end(),
    }
    .min(est_p.t_max());
    let mut nodes: Vec<f64> = est_p
        .grid
        .iter()
        .chain(&traj_n.ts)
        .copied()
        .filter(|t| *t <= t_end)
        .collect();
    nodes.sort_by(f64::total_cmp);
    nodes.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs().max(1.0));
    let rate = |s: f64| {
        let (d0, d1, _) = est_p.eval(s);
        g_p * d0 + k_p * d1 + g_pn * traj_n.eval(s).unwrap_or(0.0)
    };
    let mut a = vec![0.0];
    for w in nodes.windows(2) {
        a.push(a.last().unwrap() + gauss(w[0], w[1], rate));
    }
    // inner integral with A_p(s) = A_p(t_i) + int_{t_i}^s rate
    let mut inner = vec![0.0];
    for (i, w) in nodes.windows(2).enumerate() {
        let a_i = a[i];
        let seg = gauss(w[0], w[1], |s| {
            let a_s = a_i + gauss(w[0], s, rate);
            (s - r * a_s).exp() * est_p.eval(s).2
        });
        inner.push(inner.last().unwrap() + seg);
    }
    let values: Vec<f64> = nodes
        .iter()
        .zip(a.iter().zip(&inner))
        .map(|(t, (a, i))| ((-t + r * a).exp() * i).max(0.0))
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("higher-order bound overflowed".into()));
    }
    Ok(HigherOrderBound {
        r,
        p,
        n,
        ts: nodes,
        values,
        a,
    })
}

/// Bound on `(2 pi)^{3/2} |u_k(t) - u^N_k(t)|` from `R_n(t)`.
pub fn coefficient_bound(traj: &ControlTrajectory, k: &WaveVector, t: f64) -> Result<f64> {
    if k.is_zero() {
        return Err(Error::ZeroWaveVector);
    }
    let v = traj
        .eval(t)
        .ok_or_else(|| Error::InvalidArgument(format!("t = {t} outside the trajectory window")))?;
    Ok(v / (k.norm_sq() as f64).powf(traj.n as f64 / 2.0))
}

/// Closed-form small-data thresholds for global existence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalBounds {
    pub datum: String,
    /// `1 / (G_3 ||u_*||_3)`
    pub r_h3: f64,
    /// `0.407 / ||u_*||_1`
    pub r_h1: f64,
    pub re_h3: f64,
    pub re_h1: f64,
}

pub fn classical_bounds(datum: &DatumDescriptor, constants: &ConstantsTable) -> Result<ClassicalBounds> {
    let g3 = constants.g(3)?;
    let n3 = datum.field.sobolev_norm_f64(3);
    let n1 = datum.field.sobolev_norm_f64(1);
    if n3 == 0.0 || n1 == 0.0 {
        return Err(Error::InvalidArgument("classical bounds need a nonzero datum".into()));
    }
    let r_h3 = 1.0 / (g3 * n3);
    let r_h1 = H1_SMALL_DATA_CONSTANT / n1;
    Ok(ClassicalBounds {
        datum: datum.name.clone(),
        r_h3,
        r_h1,
        re_h3: datum.physical_reynolds(r_h3)?,
        re_h1: datum.physical_reynolds(r_h1)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::EstimatorMeta;

    fn meta(r: f64, n: i32) -> EstimatorMeta {
        EstimatorMeta {
            r,
            n,
            order: 0,
            variant: Variant::Rough,
            precision: 53,
            datum: "synthetic".into(),
            error_kind: "synthetic".into(),
        }
    }

    /// Estimators `a_i e^{-b_i t}` on a uniform grid, with exact slopes.
    fn exp_set(r: f64, n: i32, t_max: f64, points: usize, terms: [(f64, f64); 3]) -> EstimatorSet {
        let grid: Vec<f64> = (0..points).map(|i| t_max * i as f64 / (points - 1) as f64).collect();
        let mut cols: [Vec<f64>; 6] = Default::default();
        for (c, (a, b)) in terms.iter().enumerate() {
            cols[2 * c] = grid.iter().map(|t| a * (-b * t).exp()).collect();
            cols[2 * c + 1] = grid.iter().map(|t| -b * a * (-b * t).exp()).collect();
        }
        EstimatorSet::from_columns(meta(r, n), grid, cols).unwrap()
    }

    #[test]
    fn zero_forcing_stays_zero() {
        let est = exp_set(0.5, 3, 20.0, 201, [(3.0, 2.0), (4.0, 2.0), (0.0, 0.0)]);
        let tr = solve_control(&est, &ConstantsTable::default(), &ControlParams::default()).unwrap();
        assert!(tr.values.iter().all(|v| *v == 0.0));
        assert_eq!(tr.verdict, Verdict::GlobalDecay);
    }

    #[test]
    fn linear_case_matches_closed_form() {
        // R = 0: R_n' = -R_n + e^{-2t}  =>  R_n = e^{-t} - e^{-2t}
        let est = exp_set(0.0, 3, 20.0, 401, [(1.0, 1.0), (1.0, 1.0), (1.0, 2.0)]);
        let tr = solve_control(&est, &ConstantsTable::default(), &ControlParams::default()).unwrap();
        assert_eq!(tr.verdict, Verdict::GlobalDecay);
        assert_eq!(tr.values[0], 0.0);
        for i in 0..=100 {
            let t = 0.2 * i as f64;
            let exact = (-t).exp() - (-2.0 * t).exp();
            assert!((tr.eval(t).unwrap() - exact).abs() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn riccati_blow_up_time() {
        // R G = 1, no D terms, eps = 1: y' = y^2 - y + 1 blows up at 4 pi / (3 sqrt 3)
        let c = ConstantsTable::default();
        let r = 1.0 / c.g(3).unwrap();
        let est = exp_set(r, 3, 20.0, 201, [(0.0, 0.0), (0.0, 0.0), (1.0, 0.0)]);
        let tr = solve_control(&est, &c, &ControlParams::default()).unwrap();
        let exact = 4.0 * std::f64::consts::PI / (3.0 * 3f64.sqrt());
        match tr.verdict {
            Verdict::BlowUp { t_c, t_threshold } => {
                assert!((t_c - exact).abs() < 1e-6, "t_c = {t_c}");
                assert!(t_threshold <= t_c);
            }
            v => panic!("expected blow-up, got {v:?}"),
        }
        assert!(tr.stats.min_step < 1e-12);
    }

    #[test]
    fn larger_forcing_gives_larger_solution() {
        let c = ConstantsTable::default();
        let small = exp_set(0.3, 3, 20.0, 401, [(3.0, 1.5), (4.0, 1.5), (1.0, 2.0)]);
        let large = exp_set(0.3, 3, 20.0, 401, [(3.0, 1.5), (4.0, 1.5), (1.5, 2.0)]);
        let p = ControlParams::default();
        let (a, b) = (solve_control(&small, &c, &p).unwrap(), solve_control(&large, &c, &p).unwrap());
        for i in 0..=200 {
            let t = 0.1 * i as f64;
            assert!(b.eval(t).unwrap() >= a.eval(t).unwrap(), "t={t}");
        }
    }

    #[test]
    fn halving_tolerance_is_stable() {
        let c = ConstantsTable::default();
        let est = exp_set(0.4, 3, 20.0, 401, [(3.0, 1.5), (4.0, 1.5), (1.0, 2.0)]);
        let p = ControlParams::default();
        let fine = ControlParams {
            rtol: p.rtol / 2.0,
            atol: p.atol / 2.0,
            ..p.clone()
        };
        let (a, b) = (solve_control(&est, &c, &p).unwrap(), solve_control(&est, &c, &fine).unwrap());
        for (t, y) in a.ts.iter().zip(&a.values) {
            let z = b.eval(*t).unwrap();
            assert!((y - z).abs() < 10.0 * (p.rtol * y.abs() + p.atol), "t={t}: {y} vs {z}");
        }
    }

    #[test]
    fn growing_solution_is_inconclusive() {
        // R_n' = -R_n + 2 R_n + eps with no quadratic term: grows like e^t
        let mut c = ConstantsTable::default();
        c.g.insert(3, 1e-300);
        let est = exp_set(1.0 / c.k(3).unwrap(), 3, 10.0, 101, [(0.0, 0.0), (2.0, 0.0), (1.0, 0.0)]);
        let tr = solve_control(&est, &c, &ControlParams::default()).unwrap();
        assert!(matches!(tr.verdict, Verdict::Inconclusive { .. }), "{:?}", tr.verdict);
    }

    #[test]
    fn bisection_brackets_threshold() {
        let probe = |r: f64| {
            Ok(if r < 0.3 {
                Verdict::GlobalDecay
            } else if r < 0.31 {
                Verdict::Inconclusive { t_end: 20.0, trend: String::new() }
            } else {
                Verdict::BlowUp { t_c: 1.0, t_threshold: 1.0 }
            })
        };
        let b = find_critical_r(0.0, 1.0, 0.01, 3, probe).unwrap();
        assert!(b.lo < 0.3 && b.hi >= 0.3 && b.hi - b.lo <= 0.01, "{b:?}");
        assert!(matches!(find_critical_r(0.5, 0.5, 0.01, 1, probe), Err(Error::InvalidBracket(_))));
        assert!(matches!(find_critical_r(0.4, 0.9, 0.01, 1, probe), Err(Error::InvalidBracket(_))));
        assert!(matches!(find_critical_r(0.0, 0.2, 0.01, 1, probe), Err(Error::InvalidBracket(_))));
    }

    #[test]
    fn coefficient_bounds() {
        let tr = ControlTrajectory::from_samples(0.5, 3, vec![0.0, 2.3, 4.0], vec![0.0, 1.441, 1.441], Verdict::GlobalDecay)
            .unwrap();
        let b = coefficient_bound(&tr, &WaveVector::new(1, 1, 0), 2.3).unwrap();
        assert!((b - 1.441 / 2f64.powf(1.5)).abs() < 1e-15);
        let far = coefficient_bound(&tr, &WaveVector::new(2, 1, 0), 2.3).unwrap();
        assert!(far < b);
        assert_eq!(coefficient_bound(&tr, &WaveVector::new(1, 0, 0), 0.0).unwrap(), 0.0);
        assert!(coefficient_bound(&tr, &WaveVector::ZERO, 1.0).is_err());
        assert!(coefficient_bound(&tr, &WaveVector::new(1, 0, 0), 5.0).is_err());
    }

    fn higher_constants() -> ConstantsTable {
        let mut c = ConstantsTable::default();
        c.g.insert(4, 0.5);
        c.k.insert(4, 0.6);
        c.g_pn.insert("4,3".into(), 0.7);
        c
    }

    #[test]
    fn higher_order_without_coupling() {
        let c = higher_constants();
        let est_n = exp_set(0.0, 3, 20.0, 401, [(1.0, 1.0), (1.0, 1.0), (1.0, 2.0)]);
        let traj = solve_control(&est_n, &c, &ControlParams::default()).unwrap();
        let est_p = exp_set(0.0, 4, 20.0, 401, [(1.0, 1.0), (1.0, 1.0), (1.0, 2.0)]);
        let hp = solve_higher_order(&est_p, &traj, &c).unwrap();
        for (t, v) in hp.ts.iter().zip(&hp.values) {
            let exact = (-t).exp() - (-2.0 * t).exp();
            assert!((v - exact).abs() < 1e-12, "t={t}");
        }
        let zero = exp_set(0.0, 4, 20.0, 401, [(1.0, 1.0), (1.0, 1.0), (0.0, 0.0)]);
        assert!(solve_higher_order(&zero, &traj, &c).unwrap().values.iter().all(|v| *v == 0.0));
        assert!(matches!(
            solve_higher_order(&est_p, &traj, &ConstantsTable::default()),
            Err(Error::MissingConstant(_))
        ));
    }

    #[test]
    fn higher_order_satisfies_linear_equation() {
        let c = higher_constants();
        let r = 0.2;
        let est_n = exp_set(r, 3, 10.0, 2001, [(3.0, 1.5), (4.0, 1.5), (1.0, 2.0)]);
        let traj = solve_control(&est_n, &c, &ControlParams::default()).unwrap();
        let est_p = exp_set(r, 4, 10.0, 2001, [(5.0, 1.5), (6.0, 1.5), (2.0, 2.0)]);
        let hp = solve_higher_order(&est_p, &traj, &c).unwrap();
        let (g_p, k_p, g_pn) = (0.5, 0.6, 0.7);
        let mut worst = 0.0f64;
        for i in 1..hp.ts.len() - 1 {
            let (t0, t1, t2) = (hp.ts[i - 1], hp.ts[i], hp.ts[i + 1]);
            if t1 < 0.05 {
                continue;
            }
            let (y0, y1, y2) = (hp.values[i - 1], hp.values[i], hp.values[i + 1]);
            // three-point derivative on a nonuniform stencil
            let (h0, h1) = (t1 - t0, t2 - t1);
            let dy = (-h1 / (h0 * (h0 + h1))) * y0 + ((h1 - h0) / (h0 * h1)) * y1 + (h0 / (h1 * (h0 + h1))) * y2;
            let (d0, d1, eps) = est_p.eval(t1);
            let rhs = -y1 + r * (g_p * d0 + k_p * d1 + g_pn * traj.eval(t1).unwrap()) * y1 + eps;
            worst = worst.max((dy - rhs).abs() / (rhs.abs() + y1.abs()));
        }
        assert!(worst < 1e-4, "worst residual {worst}");
    }
}
