//! Growth estimators `D_m(t)` and error estimators `eps_m(t)` for a
//! truncated expansion, sampled at high precision on a time grid.
//!
//! All variants are assembled from three families of inner products sampled
//! once per grid point: `<f_a, f_b>_w`, `<f_a, f_b'>_w` and `<f_a', f_b'>_w`
//! (real parts, `f` ranging over the expansion orders or the residual tail).
//! With those tables any Reynolds parameter is a cheap recombination.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expansion::Expansion;
use crate::fields::{sobolev_weight, TimeField, WaveVector};
use crate::interp::MonotoneCubic;
use crate::numeric::{self, Real};
use crate::parallel::par_map;
use crate::symmetry::{apply_matrix, orbit_partition, Matrix, SymmetryData};

/// Bound constants of the bilinear and Kato-type inequalities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantsTable {
    #[serde(rename = "K", default)]
    pub k: BTreeMap<i32, f64>,
    #[serde(rename = "G", default)]
    pub g: BTreeMap<i32, f64>,
    /// Tame constants keyed by `"p,n"`.
    #[serde(rename = "K_pn", default)]
    pub k_pn: BTreeMap<String, f64>,
    #[serde(rename = "G_pn", default)]
    pub g_pn: BTreeMap<String, f64>,
}

impl Default for ConstantsTable {
    fn default() -> Self {
        ConstantsTable {
            k: [(3, 0.323)].into(),
            g: [(3, 0.438)].into(),
            k_pn: BTreeMap::new(),
            g_pn: BTreeMap::new(),
        }
    }
}

impl ConstantsTable {
    pub fn from_json(text: &str) -> Result<Self> {
        let t: ConstantsTable = serde_json::from_str(text)?;
        t.validate()?;
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let all = self.k.values().chain(self.g.values()).chain(self.k_pn.values()).chain(self.g_pn.values());
        for v in all {
            if !(v.is_finite() && *v > 0.0) {
                return Err(Error::InvalidArgument(format!("constant {v} must be positive")));
            }
        }
        for key in self.k_pn.keys().chain(self.g_pn.keys()) {
            parse_pair(key)?;
        }
        Ok(())
    }

    pub fn k(&self, n: i32) -> Result<f64> {
        self.k.get(&n).copied().ok_or_else(|| Error::MissingConstant(format!("K_{n}")))
    }

    pub fn g(&self, n: i32) -> Result<f64> {
        self.g.get(&n).copied().ok_or_else(|| Error::MissingConstant(format!("G_{n}")))
    }

    /// `K_{pn}`, with `K_{nn} = K_n`.
    pub fn k_pn(&self, p: i32, n: i32) -> Result<f64> {
        match self.k_pn.get(&format!("{p},{n}")) {
            Some(v) => Ok(*v),
            None if p == n => self.k(n),
            None => Err(Error::MissingConstant(format!("K_{p}{n}"))),
        }
    }

    pub fn g_pn(&self, p: i32, n: i32) -> Result<f64> {
        match self.g_pn.get(&format!("{p},{n}")) {
            Some(v) => Ok(*v),
            None if p == n => self.g(n),
            None => Err(Error::MissingConstant(format!("G_{p}{n}"))),
        }
    }
}

fn parse_pair(key: &str) -> Result<(i32, i32)> {
    let bad = || Error::Format(format!("constant key {key:?} must look like \"p,n\""));
    let (p, n) = key.split_once(',').ok_or_else(bad)?;
    Ok((p.trim().parse().map_err(|_| bad())?, n.trim().parse().map_err(|_| bad())?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// Exact norms of the truncated solution and of its residual.
    Tautological,
    /// Sums of norms of the individual orders.
    Rough,
    /// Exact norm up to order `M`, rough beyond; rough error.
    Intermediate(usize),
}

impl Default for Variant {
    fn default() -> Self {
        Variant::Intermediate(5)
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Variant::Tautological => write!(f, "tautological"),
            Variant::Rough => write!(f, "rough"),
            Variant::Intermediate(m) => write!(f, "intermediate:{m}"),
        }
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tautological" => Ok(Variant::Tautological),
            "rough" => Ok(Variant::Rough),
            _ => s
                .strip_prefix("intermediate:")
                .and_then(|m| m.parse().ok())
                .map(Variant::Intermediate)
                .ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "unknown variant {s:?}; expected tautological, rough or intermediate:M"
                    ))
                }),
        }
    }
}

impl Variant {
    pub fn needs_tail(&self) -> bool {
        matches!(self, Variant::Tautological)
    }
}

/// Time grid: `0`, a geometric part up to `t_split`, a uniform part up to `t_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub points: usize,
    pub t_first: f64,
    pub t_split: f64,
    pub t_max: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            points: 400,
            t_first: 1e-4,
            t_split: 1.0,
            t_max: 20.0,
        }
    }
}

impl GridSpec {
    pub fn with_t_max(t_max: f64) -> Self {
        GridSpec {
            t_max,
            ..Default::default()
        }
    }

    pub fn refined(&self, factor: usize) -> Self {
        GridSpec {
            points: self.points * factor,
            ..self.clone()
        }
    }

    pub fn nodes(&self) -> Result<Vec<f64>> {
        if self.points < 8 || !(0.0 < self.t_first && self.t_first < self.t_split && self.t_split < self.t_max) {
            return Err(Error::InvalidArgument(format!("invalid grid {self:?}")));
        }
        let n_geo = self.points / 2;
        let n_uni = self.points - 1 - n_geo;
        let mut out = Vec::with_capacity(self.points);
        out.push(0.0);
        let ratio = (self.t_split / self.t_first).ln() / (n_geo - 1) as f64;
        for i in 0..n_geo {
            out.push(self.t_first * (ratio * i as f64).exp());
        }
        *out.last_mut().unwrap() = self.t_split;
        let h = (self.t_max - self.t_split) / n_uni as f64;
        for i in 1..=n_uni {
            out.push(self.t_split + h * i as f64);
        }
        *out.last_mut().unwrap() = self.t_max;
        Ok(out)
    }
}

/// `(a, Re c, Im c)` terms sharing one decay rate.
type RateGroup = Vec<(u32, Option<Real>, Option<Real>)>;

/// A time polynomial prepared for repeated evaluation: terms grouped by decay
/// rate with coefficients already converted to [`Real`].
struct CompiledPoly {
    groups: Vec<(u32, RateGroup)>,
    /// Exact value and derivative at `t = 0`, so vanishing orders vanish exactly.
    origin: [Real; 4],
}

impl CompiledPoly {
    fn new(p: &crate::timebasis::TimePoly, prec: usize) -> Self {
        use crate::timebasis::Rational;
        let mut groups: BTreeMap<u32, RateGroup> = BTreeMap::new();
        let mut origin: [Rational; 4] = Default::default();
        for (&(a, b), c) in p.terms() {
            // d/dt t^a e^{-bt} at 0: 1 for a = 1, -b for a = 0
            if a == 0 {
                origin[0] += &c.re;
                origin[1] += &c.im;
                origin[2] -= &c.re * Rational::from(b);
                origin[3] -= &c.im * Rational::from(b);
            } else if a == 1 {
                origin[2] += &c.re;
                origin[3] += &c.im;
            }
            let conv = |r: &crate::timebasis::Rational| {
                if *r == crate::timebasis::Rational::ZERO {
                    None
                } else {
                    Some(numeric::from_rational(r, prec))
                }
            };
            groups.entry(b).or_default().push((a, conv(&c.re), conv(&c.im)));
        }
        CompiledPoly {
            groups: groups.into_iter().collect(),
            origin: origin.map(|r| numeric::from_rational(&r, prec)),
        }
    }

    /// Value and time derivative, as `(re, im, dre, dim)`.
    fn eval(&self, tab: &Tables) -> [Real; 4] {
        if tab.origin {
            return self.origin.clone();
        }
        let z = || tab.zero.clone();
        let mut out = [z(), z(), z(), z()];
        for (b, terms) in &self.groups {
            let mut p = [z(), z()];
            let mut q = [z(), z()];
            for (a, re, im) in terms {
                let ta = &tab.t_pows[*a as usize];
                let da = &tab.dt_pows[*a as usize];
                for (i, c) in [re, im].into_iter().enumerate() {
                    if let Some(c) = c {
                        if *a == 0 {
                            p[i] += c;
                        } else {
                            p[i] += c * ta;
                            q[i] += c * da;
                        }
                    }
                }
            }
            let e = &tab.decay[*b as usize];
            for i in 0..2 {
                if *b > 0 {
                    q[i] -= &p[i] * &tab.ints[*b as usize];
                }
                out[i] += &p[i] * e;
                out[2 + i] += &q[i] * e;
            }
        }
        out
    }
}

struct Tables {
    origin: bool,
    zero: Real,
    t_pows: Vec<Real>,
    /// `a t^{a-1}`
    dt_pows: Vec<Real>,
    decay: Vec<Real>,
    ints: Vec<Real>,
}

impl Tables {
    fn new(t: f64, max_a: u32, max_b: u32, prec: usize) -> Self {
        let tt = numeric::from_f64(t, prec);
        let mut t_pows = vec![numeric::one(prec)];
        for _ in 0..max_a {
            let next = t_pows.last().unwrap() * &tt;
            t_pows.push(next);
        }
        let dt_pows = (0..=max_a as usize)
            .map(|a| if a == 0 { numeric::zero(prec) } else { &t_pows[a - 1] * numeric::from_int(a as i64, prec) })
            .collect();
        let e1 = (-tt).exp();
        let mut decay = vec![numeric::one(prec)];
        for _ in 0..max_b {
            let next = decay.last().unwrap() * &e1;
            decay.push(next);
        }
        let ints = (0..=max_b as i64).map(|b| numeric::from_int(b, prec)).collect();
        Tables {
            origin: t == 0.0,
            zero: numeric::zero(prec),
            t_pows,
            dt_pows,
            decay,
            ints,
        }
    }
}

struct SignedOrbit {
    rep: WaveVector,
    /// Members reached from the representative by symmetries / pseudo-symmetries.
    plus: usize,
    minus: usize,
}

/// Orbits of `support` under the reduced group and `k -> -k`, with each
/// member classified by the sign of the element that reaches it.
fn signed_orbits(support: &BTreeSet<WaveVector>, sym: &SymmetryData) -> Result<Vec<SignedOrbit>> {
    let actions = sym.actions();
    let mut matrices: BTreeSet<Matrix> = BTreeSet::new();
    for s in actions.keys() {
        matrices.insert(*s);
        matrices.insert(s.map(|row| row.map(|x| -x)));
    }
    let orbits = if support.is_empty() {
        Vec::new()
    } else {
        orbit_partition(support, &matrices)?
    };
    orbits
        .into_iter()
        .map(|o| {
            let rep = o[0];
            let (mut plus, mut minus) = (0, 0);
            for m in &o {
                let sigma = actions
                    .iter()
                    .find(|(s, _)| {
                        let k = apply_matrix(s, &rep);
                        k == *m || k == -*m
                    })
                    .map(|(_, (_, sigma))| *sigma)
                    .ok_or_else(|| Error::Invariant(format!("no group element maps {rep} to {m}")))?;
                if sigma > 0 {
                    plus += 1;
                } else {
                    minus += 1;
                }
            }
            Ok(SignedOrbit { rep, plus, minus })
        })
        .collect()
}

/// Inner-product tables at one grid point; indices `[a][b]` over the fields.
#[derive(Clone, Debug)]
struct PointGram {
    /// `<f_a, f_b>`
    vv: Vec<Vec<Real>>,
    /// `<f_a, f_b'>`
    vd: Vec<Vec<Real>>,
    /// `<f_a', f_b'>`
    dd: Vec<Vec<Real>>,
}

/// Inner products of a family of fields at every grid point and every
/// requested Sobolev order (`(2 pi)^3` and both signs of `k` included).
pub struct SeriesSamples {
    pub grid: Vec<f64>,
    pub precision: usize,
    pub len: usize,
    grams: BTreeMap<i32, Vec<PointGram>>,
}

impl SeriesSamples {
    /// `orders_j[a]` is the expansion order of `fields[a]`; fields of order
    /// `j` must transform under `sym` with sign `sigma^{j+1}`, which lets each
    /// orbit be evaluated at its representative only.
    pub fn new(
        fields: &[TimeField],
        orders_j: &[usize],
        sym: &SymmetryData,
        orders: &BTreeSet<i32>,
        grid: &[f64],
        precision: usize,
    ) -> Result<Self> {
        if grid.first() != Some(&0.0) || grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("grid must start at 0 and increase strictly".into()));
        }
        if orders_j.len() != fields.len() {
            return Err(Error::InvalidArgument("one expansion order per field is required".into()));
        }
        let prec = precision + numeric::GUARD_BITS;
        let support: BTreeSet<WaveVector> = fields.iter().flat_map(|f| f.full_support()).collect();
        let orbits = signed_orbits(&support, sym)?;
        let mut max_a = 0;
        let mut max_b = 0;
        for f in fields {
            let (a, b) = f.degrees();
            max_a = max_a.max(a);
            max_b = max_b.max(b);
        }
        // compiled[f] = list of (orbit index, component polys at the representative)
        let compiled: Vec<Vec<(usize, [CompiledPoly; 3])>> = fields
            .iter()
            .map(|f| {
                orbits
                    .iter()
                    .enumerate()
                    .filter_map(|(oi, o)| {
                        f.get(&o.rep)
                            .map(|c| (oi, std::array::from_fn(|i| CompiledPoly::new(&c[i], prec))))
                    })
                    .collect()
            })
            .collect();
        // weights[w] = per orbit (same-parity factor, opposite-parity factor)
        let weights: BTreeMap<i32, Vec<(Real, Real)>> = orders
            .iter()
            .map(|&w| {
                let ws = orbits
                    .iter()
                    .map(|o| {
                        let base = sobolev_weight(&o.rep, w);
                        let even = base.clone() * crate::timebasis::Rational::from((o.plus + o.minus) as i64);
                        let odd = base * crate::timebasis::Rational::from(o.plus as i64 - o.minus as i64);
                        (numeric::from_rational(&even, prec), numeric::from_rational(&odd, prec))
                    })
                    .collect();
                (w, ws)
            })
            .collect();
        let scale = numeric::torus_volume(prec);
        let nf = fields.len();
        let per_point = par_map(grid, |&t| {
            let tab = Tables::new(t, max_a, max_b, prec);
            // values[f][orbit] = per component [re, im, dre, dim]
            let mut values: Vec<Vec<Option<[[Real; 4]; 3]>>> = vec![vec![None; orbits.len()]; nf];
            for (fi, comp) in compiled.iter().enumerate() {
                for (oi, polys) in comp {
                    values[fi][*oi] = Some(std::array::from_fn(|c| polys[c].eval(&tab)));
                }
            }
            let mut out = BTreeMap::new();
            for (&w, wk) in &weights {
                let zero_mat = || vec![vec![tab.zero.clone(); nf]; nf];
                let mut g = PointGram {
                    vv: zero_mat(),
                    vd: zero_mat(),
                    dd: zero_mat(),
                };
                for (oi, (w_even, w_odd)) in wk.iter().enumerate() {
                    for a in 0..nf {
                        let Some(va) = &values[a][oi] else { continue };
                        for b in 0..nf {
                            let Some(vb) = &values[b][oi] else { continue };
                            let weight = if (orders_j[a] + orders_j[b]).is_multiple_of(2) { w_even } else { w_odd };
                            let mut s_vv = tab.zero.clone();
                            let mut s_vd = tab.zero.clone();
                            let mut s_dd = tab.zero.clone();
                            for c in 0..3 {
                                let (x, y) = (&va[c], &vb[c]);
                                if b >= a {
                                    s_vv += &x[0] * &y[0] + &x[1] * &y[1];
                                    s_dd += &x[2] * &y[2] + &x[3] * &y[3];
                                }
                                s_vd += &x[0] * &y[2] + &x[1] * &y[3];
                            }
                            if b >= a {
                                g.vv[a][b] += s_vv * weight;
                                g.dd[a][b] += s_dd * weight;
                            }
                            g.vd[a][b] += s_vd * weight;
                        }
                    }
                }
                for a in 0..nf {
                    for b in 0..nf {
                        if b >= a {
                            g.vv[a][b] = &g.vv[a][b] * &scale;
                            g.dd[a][b] = &g.dd[a][b] * &scale;
                        }
                        g.vd[a][b] = &g.vd[a][b] * &scale;
                    }
                    for b in 0..a {
                        g.vv[a][b] = g.vv[b][a].clone();
                        g.dd[a][b] = g.dd[b][a].clone();
                    }
                }
                out.insert(w, g);
            }
            out
        });
        let mut grams: BTreeMap<i32, Vec<PointGram>> = orders.iter().map(|&w| (w, Vec::new())).collect();
        for point in per_point {
            for (w, g) in point {
                grams.get_mut(&w).unwrap().push(g);
            }
        }
        Ok(SeriesSamples {
            grid: grid.to_vec(),
            precision,
            len: nf,
            grams,
        })
    }

    fn gram(&self, w: i32, i: usize) -> Result<&PointGram> {
        self.grams
            .get(&w)
            .map(|g| &g[i])
            .ok_or_else(|| Error::InvalidArgument(format!("Sobolev order {w} was not sampled")))
    }

    /// `||sum_a x_a f_a||_w` and its time derivative at grid point `i`.
    fn combo_norm(&self, w: i32, i: usize, x: &[Option<Real>]) -> Result<(Real, Real)> {
        let g = self.gram(w, i)?;
        let zero = numeric::zero(self.precision + numeric::GUARD_BITS);
        let mut sq = zero.clone();
        let mut cross = zero.clone();
        let mut dsq = zero.clone();
        for a in 0..self.len {
            let Some(xa) = &x[a] else { continue };
            for b in 0..self.len {
                let Some(xb) = &x[b] else { continue };
                let xx = xa * xb;
                sq += &g.vv[a][b] * &xx;
                cross += &g.vd[a][b] * &xx;
                dsq += &g.dd[a][b] * &xx;
            }
        }
        Ok(norm_and_derivative(sq, cross, dsq))
    }

    /// `||f_a||_w` and derivative.
    fn single_norm(&self, w: i32, i: usize, a: usize) -> Result<(Real, Real)> {
        let g = self.gram(w, i)?;
        Ok(norm_and_derivative(g.vv[a][a].clone(), g.vd[a][a].clone(), g.dd[a][a].clone()))
    }
}

/// `sqrt(sq)` and `d/dt sqrt(sq) = cross / sqrt(sq)`; at a zero of the norm
/// (e.g. `t = 0` for the higher orders) the right derivative `sqrt(dsq)`.
fn norm_and_derivative(sq: Real, cross: Real, dsq: Real) -> (Real, Real) {
    let zero = Real::ZERO;
    let sq = if sq < zero { zero.clone() } else { sq };
    let n = numeric::sqrt(&sq);
    if n.repr().significand().is_zero() {
        let dsq = if dsq < zero { zero } else { dsq };
        (n, numeric::sqrt(&dsq))
    } else {
        let d = cross / &n;
        (n, d)
    }
}

/// Samples of one expansion needed for order-`n` estimators.
pub struct EstimatorBasis {
    pub n: i32,
    pub order: usize,
    pub datum_name: String,
    pub orders: BTreeSet<i32>,
    series: SeriesSamples,
    tail: Option<SeriesSamples>,
}

impl EstimatorBasis {
    /// Samples `||.||_n`, `||.||_{n+1}` (and any `extra` orders, e.g. for
    /// tame bounds) of the expansion orders, plus the tail when requested.
    pub fn new(
        exp: &mut Expansion,
        n: i32,
        extra: &[i32],
        with_tail: bool,
        grid: &[f64],
        precision: usize,
    ) -> Result<Self> {
        let mut orders: BTreeSet<i32> = [n, n + 1].into();
        orders.extend(extra.iter().copied());
        let js: Vec<usize> = (0..=exp.order()).collect();
        let series = SeriesSamples::new(&exp.coeffs, &js, &exp.symmetry, &orders, grid, precision)?;
        let tail = if with_tail {
            let tail = exp.ensure_tail().to_vec();
            let tj: Vec<usize> = (0..tail.len()).map(|i| exp.order() + 1 + i).collect();
            Some(SeriesSamples::new(&tail, &tj, &exp.symmetry, &[n].into(), grid, precision)?)
        } else {
            None
        };
        Ok(EstimatorBasis {
            n,
            order: exp.order(),
            datum_name: exp.datum_name.clone(),
            orders,
            series,
            tail,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.series.grid
    }

    pub fn precision(&self) -> usize {
        self.series.precision
    }

    fn powers(&self, r: f64, range: std::ops::RangeInclusive<usize>, len: usize) -> Vec<Option<Real>> {
        let prec = self.precision() + numeric::GUARD_BITS;
        let rr = numeric::from_f64(r, prec);
        let mut out = vec![None; len];
        let mut p = numeric::one(prec);
        for j in 0..len.max(*range.end() + 1) {
            if range.contains(&j) && j < len {
                out[j] = Some(p.clone());
            }
            p = &p * &rr;
        }
        out
    }

    fn r_pow(&self, r: f64, j: usize) -> Real {
        let prec = self.precision() + numeric::GUARD_BITS;
        let rr = numeric::from_f64(r, prec);
        let mut p = numeric::one(prec);
        for _ in 0..j {
            p = &p * &rr;
        }
        p
    }

    /// Growth estimator at order `w` and grid point `i`.
    pub fn growth(&self, r: f64, w: i32, variant: Variant, i: usize) -> Result<(Real, Real)> {
        let n = self.order;
        let m = match variant {
            Variant::Tautological => n,
            Variant::Rough => 0,
            Variant::Intermediate(m) => m.min(n),
        };
        let x = self.powers(r, 0..=m, n + 1);
        let (mut v, mut d) = if matches!(variant, Variant::Rough) {
            (numeric::zero(self.precision() + numeric::GUARD_BITS), numeric::zero(self.precision() + numeric::GUARD_BITS))
        } else {
            self.series.combo_norm(w, i, &x)?
        };
        let first_rough = if matches!(variant, Variant::Rough) { 0 } else { m + 1 };
        for j in first_rough..=n {
            let (nv, nd) = self.series.single_norm(w, i, j)?;
            let rj = self.r_pow(r, j);
            v += &rj * nv;
            d += rj * nd;
        }
        Ok((v, d))
    }

    /// Rough error `K_m sum_j R^j sum_l ||u_l||_m ||u_{j-l-1}||_{m+1}`.
    pub fn error_rough(&self, r: f64, k_m: f64, i: usize) -> Result<(Real, Real)> {
        self.error_pairs(r, |l, q| {
            let (a, da) = self.series.single_norm(self.n, i, l)?;
            let (b, db) = self.series.single_norm(self.n + 1, i, q)?;
            Ok((&a * &b, da * b + a * db))
        })
        .map(|(v, d)| {
            let k = numeric::from_f64(k_m, self.precision() + numeric::GUARD_BITS);
            (&v * &k, d * k)
        })
    }

    /// Tame error `K_pn / 2 sum_j R^j sum_l (||u_l||_p ||u_q||_{n+1} + ||u_l||_n ||u_q||_{p+1})`
    /// with `q = j - l - 1`.
    pub fn error_tame(&self, r: f64, p: i32, n: i32, k_pn: f64, i: usize) -> Result<(Real, Real)> {
        self.error_pairs(r, |l, q| {
            let (a1, da1) = self.series.single_norm(p, i, l)?;
            let (b1, db1) = self.series.single_norm(n + 1, i, q)?;
            let (a2, da2) = self.series.single_norm(n, i, l)?;
            let (b2, db2) = self.series.single_norm(p + 1, i, q)?;
            Ok((
                &a1 * &b1 + &a2 * &b2,
                da1 * b1 + a1 * db1 + da2 * b2 + a2 * db2,
            ))
        })
        .map(|(v, d)| {
            let k = numeric::from_f64(k_pn / 2.0, self.precision() + numeric::GUARD_BITS);
            (&v * &k, d * k)
        })
    }

    fn error_pairs(
        &self,
        r: f64,
        term: impl Fn(usize, usize) -> Result<(Real, Real)>,
    ) -> Result<(Real, Real)> {
        let n = self.order;
        let prec = self.precision() + numeric::GUARD_BITS;
        let mut v = numeric::zero(prec);
        let mut d = numeric::zero(prec);
        for j in n + 1..=2 * n + 1 {
            let rj = self.r_pow(r, j);
            for l in j - n - 1..=n {
                let (tv, td) = term(l, j - l - 1)?;
                v += &rj * tv;
                d += &rj * td;
            }
        }
        Ok((v, d))
    }

    /// Exact norm of `sum_{j=N+1}^{2N+1} R^j tail_j` at order `n`.
    pub fn error_tautological(&self, r: f64, i: usize) -> Result<(Real, Real)> {
        let tail = self
            .tail
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("tautological error needs the residual tail".into()))?;
        let n = self.order;
        let x: Vec<Option<Real>> = (0..tail.len).map(|i| Some(self.r_pow(r, n + 1 + i))).collect();
        tail.combo_norm(self.n, i, &x)
    }

    /// Estimators for `(R, variant)`: `D_n`, `D_{n+1}` and `eps_n`.
    pub fn estimator_set(&self, r: f64, variant: Variant, constants: &ConstantsTable) -> Result<EstimatorSet> {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::InvalidArgument(format!("Reynolds parameter {r} must be >= 0")));
        }
        let k_n = match variant {
            Variant::Tautological => None,
            _ => Some(constants.k(self.n)?),
        };
        let grid = self.grid();
        let mut cols: [Vec<f64>; 6] = Default::default();
        for i in 0..grid.len() {
            let (d0, dd0) = self.growth(r, self.n, variant, i)?;
            let (d1, dd1) = self.growth(r, self.n + 1, variant, i)?;
            let (e, de) = match k_n {
                None => self.error_tautological(r, i)?,
                Some(k) => self.error_rough(r, k, i)?,
            };
            for (c, x) in cols.iter_mut().zip([d0, dd0, d1, dd1, e, de]) {
                c.push(numeric::to_f64(&x));
            }
        }
        EstimatorSet::from_columns(
            EstimatorMeta {
                r,
                n: self.n,
                order: self.order,
                variant,
                precision: self.precision(),
                datum: self.datum_name.clone(),
                error_kind: match k_n {
                    None => "tautological".into(),
                    Some(_) => "rough".into(),
                },
            },
            grid.to_vec(),
            cols,
        )
    }

    /// Order-`p` estimators for the higher-order bound: growth at `p`, `p+1`
    /// and the tame error with constant `K_{pn}`.
    pub fn higher_order_set(&self, r: f64, p: i32, variant: Variant, constants: &ConstantsTable) -> Result<EstimatorSet> {
        let n = self.n;
        for w in [p, p + 1] {
            if !self.orders.contains(&w) {
                return Err(Error::InvalidArgument(format!("Sobolev order {w} was not sampled")));
            }
        }
        let k_pn = constants.k_pn(p, n)?;
        let grid = self.grid();
        let mut cols: [Vec<f64>; 6] = Default::default();
        for i in 0..grid.len() {
            let (d0, dd0) = self.growth(r, p, variant, i)?;
            let (d1, dd1) = self.growth(r, p + 1, variant, i)?;
            let (e, de) = self.error_tame(r, p, n, k_pn, i)?;
            for (c, x) in cols.iter_mut().zip([d0, dd0, d1, dd1, e, de]) {
                c.push(numeric::to_f64(&x));
            }
        }
        EstimatorSet::from_columns(
            EstimatorMeta {
                r,
                n: p,
                order: self.order,
                variant,
                precision: self.precision(),
                datum: self.datum_name.clone(),
                error_kind: format!("tame:{p},{n}"),
            },
            grid.to_vec(),
            cols,
        )
    }

    /// Exact norm `||u^N(t_i)||_w` for validity checks.
    pub fn truncated_norm(&self, r: f64, w: i32, i: usize) -> Result<f64> {
        let x = self.powers(r, 0..=self.order, self.order + 1);
        Ok(numeric::to_f64(&self.series.combo_norm(w, i, &x)?.0))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorMeta {
    pub r: f64,
    pub n: i32,
    pub order: usize,
    pub variant: Variant,
    pub precision: usize,
    pub datum: String,
    pub error_kind: String,
}

/// Sampled estimators with their interpolants.
#[derive(Clone, Debug)]
pub struct EstimatorSet {
    pub meta: EstimatorMeta,
    pub grid: Vec<f64>,
    pub d_n: Vec<f64>,
    pub d_n1: Vec<f64>,
    pub eps: Vec<f64>,
    interp: [MonotoneCubic; 3],
}

impl EstimatorSet {
    /// Columns are `[D_n, D_n', D_{n+1}, D_{n+1}', eps_n, eps_n']`.
    pub fn from_columns(meta: EstimatorMeta, grid: Vec<f64>, cols: [Vec<f64>; 6]) -> Result<Self> {
        let [d_n, dd_n, d_n1, dd_n1, eps, deps] = cols;
        for v in d_n.iter().chain(&d_n1).chain(&eps) {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::Numerical(format!("estimator sample {v} is not finite and >= 0")));
            }
        }
        let interp = [
            MonotoneCubic::new(&grid, &d_n, Some(&dd_n))?,
            MonotoneCubic::new(&grid, &d_n1, Some(&dd_n1))?,
            MonotoneCubic::new(&grid, &eps, Some(&deps))?,
        ];
        Ok(EstimatorSet {
            meta,
            grid,
            d_n,
            d_n1,
            eps,
            interp,
        })
    }

    /// Builds a set from plain samples (derivatives estimated from the data).
    pub fn from_samples(meta: EstimatorMeta, grid: Vec<f64>, d_n: Vec<f64>, d_n1: Vec<f64>, eps: Vec<f64>) -> Result<Self> {
        let interp = [
            MonotoneCubic::new(&grid, &d_n, None)?,
            MonotoneCubic::new(&grid, &d_n1, None)?,
            MonotoneCubic::new(&grid, &eps, None)?,
        ];
        Ok(EstimatorSet {
            meta,
            grid,
            d_n,
            d_n1,
            eps,
            interp,
        })
    }

    pub fn t_max(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    /// `(D_n(t), D_{n+1}(t), eps_n(t))`.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        (self.interp[0].eval(t), self.interp[1].eval(t), self.interp[2].eval(t))
    }

    pub fn to_csv(&self, provenance: &str) -> String {
        let mut s = String::new();
        let m = &self.meta;
        let _ = writeln!(s, "# {provenance}");
        let _ = writeln!(
            s,
            "# datum={} R={} N={} n={} variant={} error={} precision={}",
            m.datum, m.r, m.order, m.n, m.variant, m.error_kind, m.precision
        );
        s.push_str("t,D_n,D_n1,eps_n\n");
        for i in 0..self.grid.len() {
            let _ = writeln!(
                s,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                self.grid[i], self.d_n[i], self.d_n1[i], self.eps[i]
            );
        }
        s
    }
}

/// Pointwise estimators at a single time, for spot checks.
pub mod pointwise {
    use super::*;

    fn basis(exp: &mut Expansion, m: i32, extra: &[i32], tail: bool, t: f64, precision: usize) -> Result<EstimatorBasis> {
        let grid = if t == 0.0 { vec![0.0] } else { vec![0.0, t] };
        EstimatorBasis::new(exp, m, extra, tail, &grid, precision)
    }

    fn last(v: (Real, Real)) -> f64 {
        numeric::to_f64(&v.0)
    }

    pub fn growth_rough(exp: &mut Expansion, r: f64, m: i32, t: f64, precision: usize) -> Result<f64> {
        let b = basis(exp, m, &[], false, t, precision)?;
        b.growth(r, m, Variant::Rough, b.grid().len() - 1).map(last)
    }

    pub fn growth_intermediate(exp: &mut Expansion, r: f64, m: i32, big_m: usize, t: f64, precision: usize) -> Result<f64> {
        if big_m > exp.order() {
            return Err(Error::InvalidArgument(format!("M = {big_m} exceeds N = {}", exp.order())));
        }
        let b = basis(exp, m, &[], false, t, precision)?;
        b.growth(r, m, Variant::Intermediate(big_m), b.grid().len() - 1).map(last)
    }

    pub fn error_rough(exp: &mut Expansion, r: f64, m: i32, t: f64, constants: &ConstantsTable, precision: usize) -> Result<f64> {
        let k = constants.k(m)?;
        let b = basis(exp, m, &[], false, t, precision)?;
        b.error_rough(r, k, b.grid().len() - 1).map(last)
    }

    pub fn error_tautological(exp: &mut Expansion, r: f64, m: i32, t: f64, precision: usize) -> Result<f64> {
        let b = basis(exp, m, &[], true, t, precision)?;
        b.error_tautological(r, b.grid().len() - 1).map(last)
    }

    pub fn error_tame(
        exp: &mut Expansion,
        r: f64,
        p: i32,
        n: i32,
        t: f64,
        constants: &ConstantsTable,
        precision: usize,
    ) -> Result<f64> {
        let k = constants.k_pn(p, n)?;
        let b = basis(exp, n, &[p, p + 1], false, t, precision)?;
        b.error_tame(r, p, n, k, b.grid().len() - 1).map(last)
    }
}
