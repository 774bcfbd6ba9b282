//! Configurable-precision real and complex numbers used wherever exact
//! expressions are evaluated at a concrete time.

use dashu::float::round::mode::HalfEven;
use dashu::float::FBig;
use dashu::integer::IBig;
use dashu::rational::RBig;

/// Binary floating point number with per-value precision (in bits).
pub type Real = FBig<HalfEven, 2>;

/// Default working precision for evaluations, in bits.
pub const DEFAULT_PRECISION: usize = 256;

/// Extra bits carried internally on top of the requested precision.
pub const GUARD_BITS: usize = 32;

pub fn zero(prec: usize) -> Real {
    Real::ZERO.with_precision(prec).value()
}

pub fn one(prec: usize) -> Real {
    Real::ONE.with_precision(prec).value()
}

pub fn from_int(v: i64, prec: usize) -> Real {
    Real::from(IBig::from(v)).with_precision(prec).value()
}

pub fn from_rational(r: &RBig, prec: usize) -> Real {
    r.to_float::<HalfEven, 2>(prec).value()
}

pub fn from_f64(x: f64, prec: usize) -> Real {
    assert!(x.is_finite(), "non-finite value {x}");
    Real::try_from(x)
        .expect("finite f64 converts exactly")
        .with_precision(prec)
        .value()
}

pub fn to_f64(x: &Real) -> f64 {
    x.to_f64().value()
}

pub fn sqrt(x: &Real) -> Real {
    if x.repr().significand().is_zero() {
        return x.clone();
    }
    x.sqrt()
}

pub fn pi(prec: usize) -> Real {
    Real::pi(prec)
}

/// `(2 pi)^3`, the volume of the 3-torus.
pub fn torus_volume(prec: usize) -> Real {
    let two_pi = from_int(2, prec) * pi(prec);
    &two_pi * &two_pi * &two_pi
}

/// Complex number over [`Real`].
#[derive(Clone, Debug)]
pub struct Complex {
    pub re: Real,
    pub im: Real,
}

impl Complex {
    pub fn zero(prec: usize) -> Self {
        Complex {
            re: zero(prec),
            im: zero(prec),
        }
    }

    pub fn norm_sqr(&self) -> Real {
        &self.re * &self.re + &self.im * &self.im
    }

    pub fn abs(&self) -> Real {
        sqrt(&self.norm_sqr())
    }

    pub fn to_f64(&self) -> (f64, f64) {
        (to_f64(&self.re), to_f64(&self.im))
    }

    /// Real part of `conj(self) * other`.
    pub fn re_conj_mul(&self, other: &Complex) -> Real {
        &self.re * &other.re + &self.im * &other.im
    }
}

/// Cached powers `t^a` and `e^{-b t}` for repeated evaluation of time-basis
/// functions at a fixed time.
#[derive(Clone, Debug)]
pub struct PowerTable {
    prec: usize,
    t: Real,
    exp_neg_t: Real,
    t_pows: Vec<Real>,
    e_pows: Vec<Real>,
}

impl PowerTable {
    pub fn new(t: &Real, prec: usize) -> Self {
        let t = t.clone().with_precision(prec).value();
        let exp_neg_t = (-t.clone()).exp();
        PowerTable {
            prec,
            t_pows: vec![one(prec)],
            e_pows: vec![one(prec)],
            t,
            exp_neg_t,
        }
    }

    pub fn from_f64(t: f64, prec: usize) -> Self {
        Self::new(&from_f64(t, prec), prec)
    }

    pub fn precision(&self) -> usize {
        self.prec
    }

    pub fn t(&self) -> &Real {
        &self.t
    }

    pub fn ensure(&mut self, max_t_pow: u32, max_decay: u32) {
        while self.t_pows.len() <= max_t_pow as usize {
            let next = self.t_pows.last().unwrap() * &self.t;
            self.t_pows.push(next);
        }
        while self.e_pows.len() <= max_decay as usize {
            let next = self.e_pows.last().unwrap() * &self.exp_neg_t;
            self.e_pows.push(next);
        }
    }

    /// `t^a`; requires a prior [`PowerTable::ensure`] covering `a`.
    pub fn t_pow(&self, a: u32) -> &Real {
        &self.t_pows[a as usize]
    }

    /// `e^{-b t}`; requires a prior [`PowerTable::ensure`] covering `b`.
    pub fn decay(&self, b: u32) -> &Real {
        &self.e_pows[b as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pi_matches_f64() {
        let p = to_f64(&pi(256));
        assert_eq!(p, std::f64::consts::PI);
    }

    #[test]
    fn pi_high_digits() {
        // pi = 3.14159265358979323846264338327950288419716939937510...
        let p = pi(256);
        let shifted = p * from_int(10i64.pow(15), 256);
        let frac = shifted - from_rational(&RBig::from(3141592653589793i64), 256);
        let v = to_f64(&frac);
        assert!((v - 0.238_462_643_383_279_5).abs() < 1e-15, "{v}");
    }

    #[test]
    fn power_table_values() {
        let mut tab = PowerTable::from_f64(1.0, 128);
        tab.ensure(3, 2);
        assert!((to_f64(tab.decay(1)) - (-1.0f64).exp()).abs() < 1e-16);
        assert!((to_f64(tab.decay(2)) - (-2.0f64).exp()).abs() < 1e-16);
        assert_eq!(to_f64(tab.t_pow(3)), 1.0);
    }
}
