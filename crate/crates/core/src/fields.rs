//! Real, zero-mean, divergence-free vector fields on the 3-torus stored as
//! sparse Fourier polynomials over half the spectrum.
//!
//! Only the canonical representative of each pair `{k, -k}` (first nonzero
//! component positive) is stored; the coefficient at `-k` is the conjugate.

use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{self, Complex, PowerTable, Real};
use crate::parallel::par_map;
use crate::timebasis::{rational, Exponents, GaussianRational, Rational, TimePoly};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WaveVector(pub [i32; 3]);

impl WaveVector {
    pub const ZERO: WaveVector = WaveVector([0, 0, 0]);

    pub fn new(k1: i32, k2: i32, k3: i32) -> Self {
        WaveVector([k1, k2, k3])
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0, 0, 0]
    }

    pub fn norm_sq(&self) -> u32 {
        self.0.iter().map(|&c| (c as i64 * c as i64) as u32).sum()
    }

    pub fn dot(&self, other: &WaveVector) -> i64 {
        (0..3).map(|i| self.0[i] as i64 * other.0[i] as i64).sum()
    }

    /// Canonical members of `{k, -k}` have their first nonzero component positive.
    pub fn is_canonical(&self) -> bool {
        match self.0.iter().find(|&&c| c != 0) {
            Some(&c) => c > 0,
            None => false,
        }
    }

    pub fn canonical(&self) -> (WaveVector, bool) {
        if self.is_canonical() {
            (*self, false)
        } else {
            (-*self, true)
        }
    }

    pub fn max_abs(&self) -> i32 {
        self.0.iter().map(|c| c.abs()).max().unwrap_or(0)
    }
}

impl std::ops::Neg for WaveVector {
    type Output = WaveVector;
    fn neg(self) -> WaveVector {
        WaveVector([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl std::ops::Add for WaveVector {
    type Output = WaveVector;
    fn add(self, o: WaveVector) -> WaveVector {
        WaveVector([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl std::ops::Sub for WaveVector {
    type Output = WaveVector;
    fn sub(self, o: WaveVector) -> WaveVector {
        WaveVector([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl fmt::Display for WaveVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.0[0], self.0[1], self.0[2])
    }
}

/// One Fourier coefficient of a time-dependent field.
pub type TimeCoeff = [TimePoly; 3];

/// One Fourier coefficient of a static field.
pub type StaticCoeff = [GaussianRational; 3];

pub fn coeff_is_zero(v: &TimeCoeff) -> bool {
    v.iter().all(TimePoly::is_zero)
}

pub fn coeff_conj(v: &TimeCoeff) -> TimeCoeff {
    [v[0].conj(), v[1].conj(), v[2].conj()]
}

pub fn coeff_neg(v: &TimeCoeff) -> TimeCoeff {
    [-&v[0], -&v[1], -&v[2]]
}

fn coeff_terms(v: &TimeCoeff) -> usize {
    v.iter().map(TimePoly::len).sum()
}

/// `k . v` for an integer vector and a coefficient, componentwise in the time basis.
fn dot_k(k: &WaveVector, v: &TimeCoeff) -> TimePoly {
    let mut out = TimePoly::zero();
    for c in 0..3 {
        if k.0[c] != 0 {
            out += &v[c].scale_int(k.0[c] as i64);
        }
    }
    out
}

/// Projection of `vec` onto the orthogonal complement of `k`:
/// `v - (k.v / |k|^2) k`.
pub fn leray_project(k: &WaveVector, vec: &StaticCoeff) -> Result<StaticCoeff> {
    if k.is_zero() {
        return Err(Error::ZeroWaveVector);
    }
    let mut dot = GaussianRational::zero();
    for c in 0..3 {
        dot += &vec[c].scale_int(k.0[c] as i64);
    }
    let dot = dot.scale(&rational(1, k.norm_sq() as i64));
    Ok(std::array::from_fn(|c| &vec[c] - &dot.scale_int(k.0[c] as i64)))
}

/// Time-dependent field `sum_k v_k(t) e^{i k.x}`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TimeField {
    coeffs: BTreeMap<WaveVector, TimeCoeff>,
}

impl TimeField {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Adds `v` to the coefficient at `k` (and implicitly `conj(v)` at `-k`).
    pub fn add_coeff(&mut self, k: WaveVector, v: &TimeCoeff) -> Result<()> {
        if k.is_zero() {
            return Err(Error::ZeroWaveVector);
        }
        let (ck, flip) = k.canonical();
        let v: Cow<TimeCoeff> = if flip {
            Cow::Owned(coeff_conj(v))
        } else {
            Cow::Borrowed(v)
        };
        let entry = self.coeffs.entry(ck).or_default();
        for c in 0..3 {
            entry[c] += &v[c];
        }
        if coeff_is_zero(entry) {
            self.coeffs.remove(&ck);
        }
        Ok(())
    }

    /// Stores `v` at canonical `k`, replacing any previous value.
    pub(crate) fn set_canonical(&mut self, k: WaveVector, v: TimeCoeff) {
        debug_assert!(k.is_canonical());
        if coeff_is_zero(&v) {
            self.coeffs.remove(&k);
        } else {
            self.coeffs.insert(k, v);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Number of stored (canonical) wave vectors.
    pub fn canonical_len(&self) -> usize {
        self.coeffs.len()
    }

    /// Number of nonzero Fourier coefficients counting both `k` and `-k`.
    pub fn support_len(&self) -> usize {
        2 * self.coeffs.len()
    }

    pub fn term_count(&self) -> usize {
        self.coeffs.values().map(coeff_terms).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&WaveVector, &TimeCoeff)> {
        self.coeffs.iter()
    }

    /// Coefficient at any `k`, conjugating when `k` is not canonical.
    pub fn get(&self, k: &WaveVector) -> Option<Cow<'_, TimeCoeff>> {
        let (ck, flip) = k.canonical();
        self.coeffs.get(&ck).map(|v| {
            if flip {
                Cow::Owned(coeff_conj(v))
            } else {
                Cow::Borrowed(v)
            }
        })
    }

    /// All wave vectors carrying a nonzero coefficient (both signs).
    pub fn full_support(&self) -> Vec<WaveVector> {
        let mut out = Vec::with_capacity(2 * self.coeffs.len());
        for k in self.coeffs.keys() {
            out.push(*k);
            out.push(-*k);
        }
        out.sort();
        out
    }

    /// Maximum `(t-degree, decay-degree)` over all coefficients.
    pub fn degrees(&self) -> (u32, u32) {
        let mut d = (0, 0);
        for v in self.coeffs.values() {
            for p in v {
                d.0 = d.0.max(p.degree_t().unwrap_or(0));
                d.1 = d.1.max(p.degree_decay().unwrap_or(0));
            }
        }
        d
    }

    pub fn max_abs_wave(&self) -> i32 {
        self.coeffs.keys().map(WaveVector::max_abs).max().unwrap_or(0)
    }

    fn map_coeffs(&self, f: impl Fn(&WaveVector, &TimeCoeff) -> TimeCoeff) -> TimeField {
        let mut out = TimeField::zero();
        for (k, v) in &self.coeffs {
            out.set_canonical(*k, f(k, v));
        }
        out
    }

    pub fn scale(&self, s: &Rational) -> TimeField {
        self.map_coeffs(|_, v| std::array::from_fn(|c| v[c].scale_rational(s)))
    }

    pub fn neg(&self) -> TimeField {
        self.map_coeffs(|_, v| coeff_neg(v))
    }

    pub fn add(&self, other: &TimeField) -> TimeField {
        let mut out = self.clone();
        for (k, v) in &other.coeffs {
            out.add_coeff(*k, v).expect("stored wave vectors are nonzero");
        }
        out
    }

    pub fn sub(&self, other: &TimeField) -> TimeField {
        self.add(&other.neg())
    }

    /// Time derivative.
    pub fn derivative(&self) -> TimeField {
        self.map_coeffs(|_, v| std::array::from_fn(|c| v[c].derivative()))
    }

    /// `Delta v`, i.e. `-|k|^2 v_k`.
    pub fn laplacian(&self) -> TimeField {
        self.map_coeffs(|k, v| std::array::from_fn(|c| v[c].scale_int(-(k.norm_sq() as i64))))
    }

    /// Multiplies each coefficient by `e^{-t |k|^2}`; on a field with
    /// constant coefficients this is the heat semigroup `e^{t Delta}`.
    pub fn heat_apply(&self) -> TimeField {
        self.map_coeffs(|k, v| {
            let kernel = TimePoly::basis(0, k.norm_sq());
            std::array::from_fn(|c| &v[c] * &kernel)
        })
    }

    /// `int_0^t e^{(t-s) Delta} v(s) ds`.
    pub fn heat_duhamel(&self) -> TimeField {
        self.map_coeffs(|k, v| std::array::from_fn(|c| v[c].heat_convolve(k.norm_sq())))
    }

    /// Value at `t = 0` as a static field.
    pub fn at_zero(&self) -> StaticField {
        let mut out = StaticField::zero();
        for (k, v) in &self.coeffs {
            let c: StaticCoeff = std::array::from_fn(|i| {
                let mut s = GaussianRational::zero();
                for (&(a, _), coef) in v[i].terms() {
                    if a == 0 {
                        s += coef;
                    }
                }
                s
            });
            out.add_coeff(*k, &c).expect("nonzero wave vector");
        }
        out
    }

    /// Checks the exact divergence-free condition and storage canonicity.
    pub fn check_invariants(&self) -> Result<()> {
        for (k, v) in &self.coeffs {
            if !k.is_canonical() {
                return Err(Error::Invariant(format!("non-canonical key {k}")));
            }
            if coeff_is_zero(v) {
                return Err(Error::Invariant(format!("zero coefficient stored at {k}")));
            }
            if !dot_k(k, v).is_zero() {
                return Err(Error::Invariant(format!("k . v_k != 0 at {k}")));
            }
        }
        Ok(())
    }

    /// `||v(t)||_n^2 / (2 pi)^3` as an exact time polynomial.
    pub fn sobolev_norm_sq_poly(&self, n: i32) -> SobolevNormSq {
        let mut reduced = TimePoly::zero();
        for (k, v) in &self.coeffs {
            let w = sobolev_weight(k, n) * Rational::from(2);
            let mut s = TimePoly::zero();
            for p in v {
                s.add_product(p, &p.conj());
            }
            reduced += &s.scale_rational(&w);
        }
        SobolevNormSq { reduced }
    }

    /// Inner product `<v|w>_n / (2 pi)^3` (real part, full spectrum) as an exact polynomial.
    pub fn sobolev_inner_poly(&self, other: &TimeField, n: i32) -> TimePoly {
        let mut out = TimePoly::zero();
        for (k, v) in &self.coeffs {
            if let Some(w) = other.coeffs.get(k) {
                let mut s = TimePoly::zero();
                for c in 0..3 {
                    s.add_product(&v[c].conj(), &w[c]);
                    s.add_product(&v[c], &w[c].conj());
                }
                out += &s.scale_rational(&sobolev_weight(k, n));
            }
        }
        out
    }

    /// Numeric coefficient at any `k` (zero when absent).
    pub fn eval_coeff(&self, k: &WaveVector, t: &Real, precision: usize) -> [Complex; 3] {
        match self.get(k) {
            Some(v) => std::array::from_fn(|c| v[c].eval(t, precision)),
            None => std::array::from_fn(|_| Complex::zero(precision)),
        }
    }

    /// Numeric `||v(t)||_n`.
    pub fn sobolev_norm(&self, n: i32, t: &Real, precision: usize) -> Real {
        let mut table = PowerTable::new(t, precision + numeric::GUARD_BITS);
        let mut sum = numeric::zero(precision + numeric::GUARD_BITS);
        for (k, v) in &self.coeffs {
            let w = numeric::from_rational(&sobolev_weight(k, n), precision + numeric::GUARD_BITS);
            let mut s = numeric::zero(precision + numeric::GUARD_BITS);
            for p in v {
                s += p.eval_with(&mut table).norm_sqr();
            }
            sum += s * w;
        }
        let vol = numeric::torus_volume(precision + numeric::GUARD_BITS);
        let two = numeric::from_int(2, precision + numeric::GUARD_BITS);
        numeric::sqrt(&(sum * two * vol)).with_precision(precision).value()
    }

    /// Textual serialization: a header followed by per-coefficient records.
    pub fn to_text(&self, datum: &str, index: usize) -> String {
        let mut s = format!("field v1\ndatum {datum}\nindex {index}\n");
        for (k, v) in &self.coeffs {
            for (c, p) in v.iter().enumerate() {
                if p.is_zero() {
                    continue;
                }
                s.push_str(&format!(
                    "coeff {} {} {} {} {}\n",
                    k.0[0],
                    k.0[1],
                    k.0[2],
                    c,
                    p.len()
                ));
                s.push_str(&p.to_text());
            }
        }
        s.push_str("end\n");
        s
    }

    /// Parses [`TimeField::to_text`] output, returning `(datum, index, field)`.
    pub fn from_text(text: &str) -> Result<(String, usize, TimeField)> {
        let mut lines = text.lines();
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::Format(format!("truncated field file: expected {what}")))
        };
        if next("header")? != "field v1" {
            return Err(Error::Format("unsupported field format".into()));
        }
        let datum = next("datum")?
            .strip_prefix("datum ")
            .ok_or_else(|| Error::Format("missing datum line".into()))?
            .to_string();
        let index: usize = next("index")?
            .strip_prefix("index ")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("missing index line".into()))?;
        let mut field = TimeField::zero();
        loop {
            let line = next("coeff or end")?;
            if line == "end" {
                break;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 6 || parts[0] != "coeff" {
                return Err(Error::Format(format!("bad coefficient header {line:?}")));
            }
            let nums: Vec<i64> = parts[1..]
                .iter()
                .map(|p| p.parse::<i64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Format(format!("bad coefficient header {line:?}")))?;
            let k = WaveVector::new(nums[0] as i32, nums[1] as i32, nums[2] as i32);
            let comp = nums[3] as usize;
            if comp > 2 || !k.is_canonical() {
                return Err(Error::Format(format!("bad coefficient header {line:?}")));
            }
            let mut poly = TimePoly::zero();
            for _ in 0..nums[4] {
                let (e, c) = TimePoly::parse_record(next("term record")?)?;
                poly.add_term(e, &c);
            }
            let entry = field.coeffs.entry(k).or_default();
            if !entry[comp].is_zero() {
                return Err(Error::Format(format!("duplicate coefficient {line:?}")));
            }
            entry[comp] = poly;
        }
        field.check_invariants()?;
        Ok((datum, index, field))
    }
}

/// `|k|^{2n}` as an exact rational (negative orders allowed).
pub fn sobolev_weight(k: &WaveVector, n: i32) -> Rational {
    let ksq = Rational::from(k.norm_sq());
    let mut w = Rational::ONE;
    for _ in 0..n.unsigned_abs() {
        w = &w * &ksq;
    }
    if n < 0 {
        Rational::ONE / w
    } else {
        w
    }
}

/// Exact squared Sobolev norm, stored without the transcendental factor:
/// `||v(t)||_n^2 = (2 pi)^3 * reduced(t)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SobolevNormSq {
    pub reduced: TimePoly,
}

impl SobolevNormSq {
    pub fn eval(&self, t: &Real, precision: usize) -> Real {
        let v = self.reduced.eval(t, precision + numeric::GUARD_BITS).re;
        (v * numeric::torus_volume(precision + numeric::GUARD_BITS))
            .with_precision(precision)
            .value()
    }

    pub fn eval_norm_f64(&self, t: f64, precision: usize) -> f64 {
        numeric::to_f64(&numeric::sqrt(&self.eval(&numeric::from_f64(t, precision), precision)))
    }
}

/// Static field with Gaussian-rational coefficients (an initial datum).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StaticField {
    coeffs: BTreeMap<WaveVector, StaticCoeff>,
}

impl StaticField {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Builds a field from `(k, v_k)` pairs; `-k` entries must be conjugates
    /// of the `k` ones and are folded in, never summed.
    pub fn from_modes(modes: &[(WaveVector, StaticCoeff)]) -> Result<Self> {
        let mut seen: BTreeMap<WaveVector, StaticCoeff> = BTreeMap::new();
        for (k, v) in modes {
            if k.is_zero() {
                return Err(Error::ZeroWaveVector);
            }
            let (ck, flip) = k.canonical();
            let v: StaticCoeff = if flip {
                std::array::from_fn(|c| v[c].conj())
            } else {
                v.clone()
            };
            match seen.get(&ck) {
                Some(prev) if *prev != v => {
                    return Err(Error::Invariant(format!(
                        "coefficient at {k} is not the conjugate of the one at {}",
                        -*k
                    )));
                }
                Some(_) => {}
                None => {
                    seen.insert(ck, v);
                }
            }
        }
        let mut out = StaticField::zero();
        for (k, v) in seen {
            out.add_coeff(k, &v)?;
        }
        out.check_invariants()?;
        Ok(out)
    }

    pub fn add_coeff(&mut self, k: WaveVector, v: &StaticCoeff) -> Result<()> {
        if k.is_zero() {
            return Err(Error::ZeroWaveVector);
        }
        let (ck, flip) = k.canonical();
        let entry = self.coeffs.entry(ck).or_default();
        for c in 0..3 {
            if flip {
                entry[c] += &v[c].conj();
            } else {
                entry[c] += &v[c];
            }
        }
        if entry.iter().all(GaussianRational::is_zero) {
            self.coeffs.remove(&ck);
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn canonical_len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&WaveVector, &StaticCoeff)> {
        self.coeffs.iter()
    }

    pub fn get(&self, k: &WaveVector) -> Option<StaticCoeff> {
        let (ck, flip) = k.canonical();
        self.coeffs.get(&ck).map(|v| {
            if flip {
                std::array::from_fn(|c| v[c].conj())
            } else {
                v.clone()
            }
        })
    }

    pub fn check_invariants(&self) -> Result<()> {
        for (k, v) in &self.coeffs {
            let mut dot = GaussianRational::zero();
            for c in 0..3 {
                dot += &v[c].scale_int(k.0[c] as i64);
            }
            if !dot.is_zero() {
                return Err(Error::Invariant(format!("k . v_k != 0 at {k}")));
            }
        }
        Ok(())
    }

    pub fn to_time_field(&self) -> TimeField {
        let mut out = TimeField::zero();
        for (k, v) in &self.coeffs {
            out.set_canonical(*k, std::array::from_fn(|c| TimePoly::constant(v[c].clone())));
        }
        out
    }

    /// `||v||_n^2 / (2 pi)^3`, exact.
    pub fn norm_sq_reduced(&self, n: i32) -> Rational {
        let mut s = Rational::ZERO;
        for (k, v) in &self.coeffs {
            let m: Rational = v.iter().map(GaussianRational::norm_sqr).fold(Rational::ZERO, |a, b| a + b);
            s += m * sobolev_weight(k, n);
        }
        s * Rational::from(2)
    }

    pub fn sobolev_norm(&self, n: i32, precision: usize) -> Real {
        let p = precision + numeric::GUARD_BITS;
        let v = numeric::from_rational(&self.norm_sq_reduced(n), p) * numeric::torus_volume(p);
        numeric::sqrt(&v).with_precision(precision).value()
    }

    pub fn sobolev_norm_f64(&self, n: i32) -> f64 {
        numeric::to_f64(&self.sobolev_norm(n, numeric::DEFAULT_PRECISION))
    }

    /// Textual serialization (same record layout as [`TimeField::to_text`]).
    pub fn to_text(&self, name: &str) -> String {
        self.to_time_field().to_text(name, 0)
    }

    pub fn from_text(text: &str) -> Result<(String, StaticField)> {
        let (name, _, field) = TimeField::from_text(text)?;
        let mut out = StaticField::zero();
        for (k, v) in field.iter() {
            let mut c = StaticCoeff::default();
            for i in 0..3 {
                for (&(a, b), coef) in v[i].terms() {
                    if (a, b) != (0, 0) {
                        return Err(Error::Format(format!(
                            "datum coefficient at {k} is not constant in time"
                        )));
                    }
                    c[i] = coef.clone();
                }
            }
            out.add_coeff(*k, &c)?;
        }
        out.check_invariants()?;
        Ok((name, out))
    }
}

/// Full-spectrum view of a field for convolution lookups: both `k` and `-k`.
pub struct FullView<'a> {
    entries: HashMap<WaveVector, Cow<'a, TimeCoeff>>,
}

impl<'a> FullView<'a> {
    pub fn new(v: &'a TimeField) -> Self {
        let mut entries = HashMap::with_capacity(2 * v.coeffs.len());
        for (k, c) in &v.coeffs {
            entries.insert(*k, Cow::Borrowed(c));
            entries.insert(-*k, Cow::Owned(coeff_conj(c)));
        }
        FullView { entries }
    }

    pub fn get(&self, k: &WaveVector) -> Option<&TimeCoeff> {
        self.entries.get(k).map(|c| c.as_ref())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&WaveVector, &TimeCoeff)> {
        self.entries.iter().map(|(k, c)| (k, c.as_ref()))
    }

    pub fn keys(&self) -> impl Iterator<Item = &WaveVector> {
        self.entries.keys()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Accumulates `sum_h [v_h . (k-h)] w_{k-h}` into three component polynomials.
pub(crate) fn accumulate_convolution(
    acc: &mut [BTreeMap<Exponents, GaussianRational>; 3],
    k: &WaveVector,
    v: &FullView<'_>,
    w: &FullView<'_>,
) {
    for (h, vh) in v.iter() {
        let kh = *k - *h;
        let Some(wk) = w.get(&kh) else { continue };
        let s = dot_k(&kh, vh);
        if s.is_zero() {
            continue;
        }
        for (es, cs) in s.terms() {
            for c in 0..3 {
                for (ew, cw) in wk[c].terms() {
                    acc[c]
                        .entry((es.0 + ew.0, es.1 + ew.1))
                        .or_default()
                        .add_mul(cs, cw);
                }
            }
        }
    }
}

/// Applies `-i L_k` to an accumulated convolution.
pub(crate) fn project_accumulated(
    k: &WaveVector,
    acc: [BTreeMap<Exponents, GaussianRational>; 3],
) -> TimeCoeff {
    let ksq = k.norm_sq() as i64;
    let inv_ksq = rational(1, ksq);
    let keys: BTreeSet<Exponents> = acc.iter().flat_map(|m| m.keys().copied()).collect();
    let mut out: TimeCoeff = Default::default();
    let zero = GaussianRational::zero();
    for e in keys {
        let x: [&GaussianRational; 3] = std::array::from_fn(|c| acc[c].get(&e).unwrap_or(&zero));
        let mut dot = GaussianRational::zero();
        for c in 0..3 {
            if k.0[c] != 0 && !x[c].is_zero() {
                dot += &x[c].scale_int(k.0[c] as i64);
            }
        }
        let dot = if dot.is_zero() { dot } else { dot.scale(&inv_ksq) };
        for c in 0..3 {
            let mut y = x[c].clone();
            if k.0[c] != 0 && !dot.is_zero() {
                y -= &dot.scale_int(k.0[c] as i64);
            }
            // multiply by -i
            let y = GaussianRational::new(y.im, -y.re);
            out[c].add_term(e, &y);
        }
    }
    out
}

/// `P(v, w)_k = -i L_k sum_h [v_h . (k-h)] w_{k-h}` at a single `k != 0`.
pub fn bilinear_at(k: &WaveVector, v: &FullView<'_>, w: &FullView<'_>) -> TimeCoeff {
    let mut acc: [BTreeMap<Exponents, GaussianRational>; 3] = Default::default();
    accumulate_convolution(&mut acc, k, v, w);
    project_accumulated(k, acc)
}

/// Canonical wave vectors of the sumset `supp v + supp w`, without zero.
pub fn sumset_canonical<'a>(
    v: impl IntoIterator<Item = &'a WaveVector>,
    w: &[WaveVector],
) -> BTreeSet<WaveVector> {
    let mut out = BTreeSet::new();
    for h in v {
        for h2 in w {
            let k = *h + *h2;
            if k.is_canonical() {
                out.insert(k);
            }
        }
    }
    out
}

/// The NS bilinear map `P(v, w) = -L(v . grad w)` on Fourier polynomials.
/// The mean mode of the product is discarded.
pub fn bilinear_p(v: &TimeField, w: &TimeField) -> TimeField {
    if v.is_zero() || w.is_zero() {
        return TimeField::zero();
    }
    let vf = FullView::new(v);
    let wf = FullView::new(w);
    let wkeys: Vec<WaveVector> = wf.keys().copied().collect();
    let targets: Vec<WaveVector> = sumset_canonical(vf.keys(), &wkeys).into_iter().collect();
    let results = par_map(&targets, |k| bilinear_at(k, &vf, &wf));
    let mut out = TimeField::zero();
    for (k, c) in targets.into_iter().zip(results) {
        out.set_canonical(k, c);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gr(n: i64) -> GaussianRational {
        GaussianRational::from_int(n)
    }

    fn sc(a: i64, b: i64, c: i64) -> StaticCoeff {
        [gr(a), gr(b), gr(c)]
    }

    #[test]
    fn leray_examples() {
        let k = WaveVector::new(1, 0, 0);
        assert_eq!(leray_project(&k, &sc(1, 0, 0)).unwrap(), sc(0, 0, 0));
        assert_eq!(leray_project(&k, &sc(0, 1, 0)).unwrap(), sc(0, 1, 0));
        let k = WaveVector::new(1, 1, 0);
        let half = GaussianRational::real(rational(1, 2));
        assert_eq!(
            leray_project(&k, &sc(1, 0, 0)).unwrap(),
            [half.clone(), -&half, gr(0)]
        );
        assert!(matches!(
            leray_project(&WaveVector::ZERO, &sc(1, 0, 0)),
            Err(Error::ZeroWaveVector)
        ));
    }

    #[test]
    fn canonical_representative() {
        assert!(WaveVector::new(0, 1, -1).is_canonical());
        assert!(!WaveVector::new(0, -1, 1).is_canonical());
        assert!(!WaveVector::ZERO.is_canonical());
        assert_eq!(
            WaveVector::new(-1, 1, 1).canonical(),
            (WaveVector::new(1, -1, -1), true)
        );
    }

    #[test]
    fn bilinear_with_zero_is_zero() {
        let v = StaticField::from_modes(&[(WaveVector::new(1, 1, 0), sc(1, -1, 0))])
            .unwrap()
            .to_time_field();
        assert!(bilinear_p(&TimeField::zero(), &v).is_zero());
        assert!(bilinear_p(&v, &TimeField::zero()).is_zero());
    }

    #[test]
    fn static_field_rejects_divergence() {
        let err = StaticField::from_modes(&[(WaveVector::new(1, 0, 0), sc(1, 0, 0))]);
        assert!(matches!(err, Err(Error::Invariant(_))));
    }

    #[test]
    fn heat_duhamel_single_mode() {
        // k = (1,1,0), |k|^2 = 2, coefficient B_{0,3} (1,-1,0)
        let k = WaveVector::new(1, 1, 0);
        let mut f = TimeField::zero();
        let z: TimeCoeff = [
            TimePoly::basis(0, 3),
            TimePoly::basis(0, 3).scale_int(-1),
            TimePoly::zero(),
        ];
        f.add_coeff(k, &z).unwrap();
        let d = f.heat_duhamel();
        let got = d.get(&k).unwrap();
        // (B_{0,2} - B_{0,3}) / (3 - 2)
        let expected = &TimePoly::basis(0, 2) - &TimePoly::basis(0, 3);
        assert_eq!(got[0], expected);
        // resonant: B_{0,2} -> B_{1,2}
        let mut r = TimeField::zero();
        r.add_coeff(
            k,
            &[
                TimePoly::basis(0, 2),
                TimePoly::basis(0, 2).scale_int(-1),
                TimePoly::zero(),
            ],
        )
        .unwrap();
        assert_eq!(r.heat_duhamel().get(&k).unwrap()[0], TimePoly::basis(1, 2));
        assert!(TimeField::zero().heat_duhamel().is_zero());
    }

    #[test]
    fn text_round_trip_and_errors() {
        let v = StaticField::from_modes(&[
            (WaveVector::new(1, 1, 0), sc(1, -1, 0)),
            (WaveVector::new(0, 1, -1), [gr(3), GaussianRational::i(), GaussianRational::i()]),
        ])
        .unwrap()
        .heat_apply_static();
        let text = v.to_text("demo", 4);
        let (name, idx, back) = TimeField::from_text(&text).unwrap();
        assert_eq!((name.as_str(), idx), ("demo", 4));
        assert_eq!(back, v);
        let truncated = &text[..text.len() - 4];
        assert!(matches!(TimeField::from_text(truncated), Err(Error::Format(_))));
        let tampered = text.replace("coeff 1 1 0 1 1\n0 2 -1/1 0/1", "coeff 1 1 0 1 1\n0 2 -2/1 0/1");
        assert_ne!(tampered, text);
        assert!(matches!(TimeField::from_text(&tampered), Err(Error::Invariant(_))));
    }

    impl StaticField {
        fn heat_apply_static(&self) -> TimeField {
            self.to_time_field().heat_apply()
        }
    }
}
