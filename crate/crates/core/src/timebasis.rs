//! Exact algebra of time functions `sum C_{a,b} t^a e^{-b t}` with
//! Gaussian-rational coefficients.
//!
//! Every Fourier coefficient of every term of the Reynolds expansion lives in
//! this algebra: it is closed under addition, multiplication, differentiation
//! and the heat-kernel convolution `int_0^t e^{-|k|^2 (t-s)} x(s) ds`.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use dashu::integer::{IBig, UBig};
use dashu::rational::RBig;

use crate::error::{Error, Result};
use crate::numeric::{self, Complex, PowerTable, Real};

pub type Rational = RBig;

pub fn rational(num: i64, den: i64) -> Rational {
    assert!(den != 0, "zero denominator");
    let r = RBig::from_parts(IBig::from(num), UBig::from(den.unsigned_abs()));
    if den < 0 {
        -r
    } else {
        r
    }
}

fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numerator(), r.denominator())
}

fn parse_rational(s: &str) -> Result<Rational> {
    let bad = || Error::Format(format!("bad rational {s:?}"));
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n, d),
        None => (s, "1"),
    };
    let num = IBig::from_str(num).map_err(|_| bad())?;
    let den = UBig::from_str(den).map_err(|_| bad())?;
    if den == UBig::ZERO {
        return Err(bad());
    }
    Ok(RBig::from_parts(num, den))
}

/// Exact complex number `re + i im` with rational parts.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct GaussianRational {
    pub re: Rational,
    pub im: Rational,
}

impl GaussianRational {
    pub fn new(re: Rational, im: Rational) -> Self {
        GaussianRational { re, im }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::real(Rational::ONE)
    }

    pub fn i() -> Self {
        Self::new(Rational::ZERO, Rational::ONE)
    }

    pub fn real(re: Rational) -> Self {
        Self::new(re, Rational::ZERO)
    }

    pub fn imag(im: Rational) -> Self {
        Self::new(Rational::ZERO, im)
    }

    pub fn from_int(v: i64) -> Self {
        Self::real(Rational::from(v))
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        Self::new(self.re.clone(), -self.im.clone())
    }

    /// `|z|^2 = re^2 + im^2`.
    pub fn norm_sqr(&self) -> Rational {
        &self.re * &self.re + &self.im * &self.im
    }

    /// Multiplication by `i`.
    pub fn mul_i(&self) -> Self {
        Self::new(-self.im.clone(), self.re.clone())
    }

    pub fn scale(&self, s: &Rational) -> Self {
        Self::new(&self.re * s, &self.im * s)
    }

    pub fn scale_int(&self, s: i64) -> Self {
        if s == 1 {
            return self.clone();
        }
        let s = IBig::from(s);
        Self::new(&self.re * &s, &self.im * &s)
    }

    /// `self += a * b`, skipping products with a vanishing part.
    pub fn add_mul(&mut self, a: &GaussianRational, b: &GaussianRational) {
        let (ar, ai) = (!a.re.is_zero(), !a.im.is_zero());
        let (br, bi) = (!b.re.is_zero(), !b.im.is_zero());
        if ar && br {
            self.re += &a.re * &b.re;
        }
        if ai && bi {
            self.re -= &a.im * &b.im;
        }
        if ar && bi {
            self.im += &a.re * &b.im;
        }
        if ai && br {
            self.im += &a.im * &b.re;
        }
    }

    pub fn to_complex(&self, prec: usize) -> Complex {
        Complex {
            re: numeric::from_rational(&self.re, prec),
            im: numeric::from_rational(&self.im, prec),
        }
    }

    /// Textual form `re_num/re_den im_num/im_den`.
    pub fn to_text(&self) -> String {
        format!("{} {}", format_rational(&self.re), format_rational(&self.im))
    }

    pub fn parse_parts(re: &str, im: &str) -> Result<Self> {
        Ok(Self::new(parse_rational(re)?, parse_rational(im)?))
    }
}

impl Add for &GaussianRational {
    type Output = GaussianRational;
    fn add(self, rhs: &GaussianRational) -> GaussianRational {
        GaussianRational::new(&self.re + &rhs.re, &self.im + &rhs.im)
    }
}

impl Sub for &GaussianRational {
    type Output = GaussianRational;
    fn sub(self, rhs: &GaussianRational) -> GaussianRational {
        GaussianRational::new(&self.re - &rhs.re, &self.im - &rhs.im)
    }
}

impl Mul for &GaussianRational {
    type Output = GaussianRational;
    fn mul(self, rhs: &GaussianRational) -> GaussianRational {
        let mut out = GaussianRational::zero();
        out.add_mul(self, rhs);
        out
    }
}

impl Neg for &GaussianRational {
    type Output = GaussianRational;
    fn neg(self) -> GaussianRational {
        GaussianRational::new(-self.re.clone(), -self.im.clone())
    }
}

impl AddAssign<&GaussianRational> for GaussianRational {
    fn add_assign(&mut self, rhs: &GaussianRational) {
        if !rhs.re.is_zero() {
            self.re += &rhs.re;
        }
        if !rhs.im.is_zero() {
            self.im += &rhs.im;
        }
    }
}

impl SubAssign<&GaussianRational> for GaussianRational {
    fn sub_assign(&mut self, rhs: &GaussianRational) {
        if !rhs.re.is_zero() {
            self.re -= &rhs.re;
        }
        if !rhs.im.is_zero() {
            self.im -= &rhs.im;
        }
    }
}

impl fmt::Display for GaussianRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} + {}i)", self.re, self.im)
    }
}

/// Exponent pair `(a, b)` of the basis function `B_{a,b}(t) = t^a e^{-b t}`.
pub type Exponents = (u32, u32);

fn add_exponents(x: Exponents, y: Exponents) -> Exponents {
    (
        x.0.checked_add(y.0).expect("t-degree overflow"),
        x.1.checked_add(y.1).expect("decay exponent overflow"),
    )
}

/// Sparse exact combination `sum C_{a,b} B_{a,b}(t)`; zero terms are never stored.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct TimePoly {
    terms: BTreeMap<Exponents, GaussianRational>,
}

impl TimePoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: GaussianRational) -> Self {
        Self::monomial(0, 0, c)
    }

    /// `c B_{a,b}`.
    pub fn monomial(a: u32, b: u32, c: GaussianRational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert((a, b), c);
        }
        TimePoly { terms }
    }

    /// `B_{a,b}` with unit coefficient.
    pub fn basis(a: u32, b: u32) -> Self {
        Self::monomial(a, b, GaussianRational::one())
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Exponents, GaussianRational)>) -> Self {
        let mut out = TimePoly::zero();
        for (e, c) in terms {
            out.add_term(e, &c);
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponents, &GaussianRational)> {
        self.terms.iter()
    }

    pub fn coeff(&self, a: u32, b: u32) -> Option<&GaussianRational> {
        self.terms.get(&(a, b))
    }

    /// Maximum power of `t`, or `None` for the zero polynomial.
    pub fn degree_t(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.0).max()
    }

    /// Maximum power of `e^{-t}`, or `None` for the zero polynomial.
    pub fn degree_decay(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.1).max()
    }

    /// Adds `c B_{e}` in place, dropping the term if it cancels.
    pub fn add_term(&mut self, e: Exponents, c: &GaussianRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(e) {
            Entry::Vacant(v) => {
                v.insert(c.clone());
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    /// `self += x * y` without materializing the product.
    pub fn add_product(&mut self, x: &TimePoly, y: &TimePoly) {
        let mut acc: BTreeMap<Exponents, GaussianRational> = std::mem::take(&mut self.terms);
        for (ex, cx) in &x.terms {
            for (ey, cy) in &y.terms {
                acc.entry(add_exponents(*ex, *ey))
                    .or_default()
                    .add_mul(cx, cy);
            }
        }
        acc.retain(|_, c| !c.is_zero());
        self.terms = acc;
    }

    pub fn scale(&self, s: &GaussianRational) -> TimePoly {
        if s.is_zero() {
            return TimePoly::zero();
        }
        let terms = self
            .terms
            .iter()
            .map(|(e, c)| (*e, c * s))
            .filter(|(_, c)| !c.is_zero())
            .collect();
        TimePoly { terms }
    }

    pub fn scale_rational(&self, s: &Rational) -> TimePoly {
        if s.is_zero() {
            return TimePoly::zero();
        }
        let terms = self.terms.iter().map(|(e, c)| (*e, c.scale(s))).collect();
        TimePoly { terms }
    }

    pub fn scale_int(&self, s: i64) -> TimePoly {
        if s == 0 {
            return TimePoly::zero();
        }
        let terms = self
            .terms
            .iter()
            .map(|(e, c)| (*e, c.scale_int(s)))
            .collect();
        TimePoly { terms }
    }

    pub fn mul_i(&self) -> TimePoly {
        let terms = self.terms.iter().map(|(e, c)| (*e, c.mul_i())).collect();
        TimePoly { terms }
    }

    /// Complex conjugate (time is real).
    pub fn conj(&self) -> TimePoly {
        let terms = self.terms.iter().map(|(e, c)| (*e, c.conj())).collect();
        TimePoly { terms }
    }

    /// Exact derivative, using `d/dt B_{a,b} = a B_{a-1,b} - b B_{a,b}`.
    pub fn derivative(&self) -> TimePoly {
        let mut out = TimePoly::zero();
        for (&(a, b), c) in &self.terms {
            if a > 0 {
                out.add_term((a - 1, b), &c.scale_int(a as i64));
            }
            if b > 0 {
                out.add_term((a, b), &c.scale_int(-(b as i64)));
            }
        }
        out
    }

    /// Exact heat-kernel convolution `int_0^t e^{-ksq (t-s)} x(s) ds`.
    ///
    /// Non-resonant terms (`b != ksq`) expand into
    /// `a! (B_{0,ksq} / d^{a+1} - sum_{l<=a} B_{l,b} / (d^{a+1-l} l!))` with
    /// `d = b - ksq`; resonant terms give `B_{a+1,ksq} / (a+1)`.
    pub fn heat_convolve(&self, ksq: u32) -> TimePoly {
        assert!(ksq >= 1, "heat convolution needs |k|^2 >= 1");
        let mut out = TimePoly::zero();
        for (&(a, b), c) in &self.terms {
            if b == ksq {
                let a1 = a.checked_add(1).expect("t-degree overflow");
                out.add_term((a1, ksq), &c.scale(&rational(1, a1 as i64)));
                continue;
            }
            let d = IBig::from(b as i64 - ksq as i64);
            // d_pows[i] = d^i, fact[l] = l!
            let mut d_pows = vec![IBig::ONE];
            for _ in 0..=a {
                let next = d_pows.last().unwrap() * &d;
                d_pows.push(next);
            }
            let mut fact = vec![UBig::ONE];
            for l in 1..=a {
                let next = fact.last().unwrap() * UBig::from(l);
                fact.push(next);
            }
            let a_fact = fact[a as usize].clone();
            let head = RBig::from_parts(IBig::from(a_fact.clone()), UBig::ONE)
                / RBig::from(d_pows[a as usize + 1].clone());
            out.add_term((0, ksq), &c.scale(&head));
            for l in 0..=a {
                // a! / (d^{a+1-l} l!)
                let ratio = RBig::from_parts(
                    IBig::from(a_fact.clone()),
                    fact[l as usize].clone(),
                ) / RBig::from(d_pows[(a + 1 - l) as usize].clone());
                out.add_term((l, b), &c.scale(&(-ratio)));
            }
        }
        out
    }

    fn max_exponents(&self) -> (u32, u32) {
        self.terms
            .keys()
            .fold((0, 0), |(ma, mb), &(a, b)| (ma.max(a), mb.max(b)))
    }

    /// Numeric value at `t`; coefficients are rounded only here.
    pub fn eval(&self, t: &Real, precision: usize) -> Complex {
        assert!(precision >= 53, "precision must be at least 53 bits");
        let work = precision + numeric::GUARD_BITS;
        let mut table = PowerTable::new(t, work);
        let v = self.eval_with(&mut table);
        Complex {
            re: v.re.with_precision(precision).value(),
            im: v.im.with_precision(precision).value(),
        }
    }

    pub fn eval_f64(&self, t: f64, precision: usize) -> (f64, f64) {
        self.eval(&numeric::from_f64(t, precision), precision).to_f64()
    }

    /// Evaluation against a shared power table (precision taken from the table).
    pub fn eval_with(&self, table: &mut PowerTable) -> Complex {
        let prec = table.precision();
        let (ma, mb) = self.max_exponents();
        table.ensure(ma, mb);
        let table: &PowerTable = table;
        let mut out = Complex::zero(prec);
        // sum_a t^a (sum_b C_{a,b} e^{-bt}); terms are sorted by a.
        let mut iter = self.terms.iter().peekable();
        while let Some((&(a, _), _)) = iter.peek() {
            let mut inner = Complex::zero(prec);
            while let Some(&(&(a2, b), c)) = iter.peek() {
                if a2 != a {
                    break;
                }
                let e = table.decay(b);
                if !c.re.is_zero() {
                    inner.re += numeric::from_rational(&c.re, prec) * e;
                }
                if !c.im.is_zero() {
                    inner.im += numeric::from_rational(&c.im, prec) * e;
                }
                iter.next();
            }
            let tp = table.t_pow(a);
            out.re += inner.re * tp;
            out.im += inner.im * tp;
        }
        out
    }

    /// Serializes as one record `a b re_num/re_den im_num/im_den` per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (&(a, b), c) in &self.terms {
            s.push_str(&format!("{a} {b} {}\n", c.to_text()));
        }
        s
    }

    pub fn parse_record(line: &str) -> Result<(Exponents, GaussianRational)> {
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 4 {
            return Err(Error::Format(format!("bad term record {line:?}")));
        }
        let a: u32 = parts[0]
            .parse()
            .map_err(|_| Error::Format(format!("bad exponent in {line:?}")))?;
        let b: u32 = parts[1]
            .parse()
            .map_err(|_| Error::Format(format!("bad exponent in {line:?}")))?;
        Ok(((a, b), GaussianRational::parse_parts(parts[2], parts[3])?))
    }

    pub fn from_text(text: &str) -> Result<TimePoly> {
        let mut out = TimePoly::zero();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (e, c) = Self::parse_record(line)?;
            if c.is_zero() {
                return Err(Error::Format(format!("zero coefficient stored in {line:?}")));
            }
            if out.terms.insert(e, c).is_some() {
                return Err(Error::Format(format!("duplicate exponents in {line:?}")));
            }
        }
        Ok(out)
    }
}

impl Add for &TimePoly {
    type Output = TimePoly;
    fn add(self, rhs: &TimePoly) -> TimePoly {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub for &TimePoly {
    type Output = TimePoly;
    fn sub(self, rhs: &TimePoly) -> TimePoly {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl Mul for &TimePoly {
    type Output = TimePoly;
    fn mul(self, rhs: &TimePoly) -> TimePoly {
        let mut out = TimePoly::zero();
        out.add_product(self, rhs);
        out
    }
}

impl Neg for &TimePoly {
    type Output = TimePoly;
    fn neg(self) -> TimePoly {
        let terms = self.terms.iter().map(|(e, c)| (*e, -c)).collect();
        TimePoly { terms }
    }
}

impl AddAssign<&TimePoly> for TimePoly {
    fn add_assign(&mut self, rhs: &TimePoly) {
        for (e, c) in &rhs.terms {
            self.add_term(*e, c);
        }
    }
}

impl SubAssign<&TimePoly> for TimePoly {
    fn sub_assign(&mut self, rhs: &TimePoly) {
        for (e, c) in &rhs.terms {
            self.add_term(*e, &-c);
        }
    }
}
