#![allow(dead_code)]

use std::collections::BTreeMap;

use proptest::prelude::*;
use reynolds_core::fields::{StaticCoeff, StaticField, TimeCoeff, TimeField, WaveVector};
use reynolds_core::timebasis::{rational, GaussianRational, TimePoly};

/// Straightforward `P(v, w)_k = -i L_k sum_h [v_h . (k - h)] w_{k-h}` over the
/// full supports, with the Leray projection written out directly.
pub fn naive_p(v: &TimeField, w: &TimeField) -> TimeField {
    let mut acc: BTreeMap<WaveVector, TimeCoeff> = BTreeMap::new();
    for h in v.full_support() {
        let vh = v.get(&h).unwrap().into_owned();
        for h2 in w.full_support() {
            let k = h + h2;
            if k.is_zero() || !k.is_canonical() {
                continue;
            }
            let wh2 = w.get(&h2).unwrap().into_owned();
            let mut dot = TimePoly::zero();
            for c in 0..3 {
                dot = &dot + &vh[c].scale_int(h2.0[c] as i64);
            }
            let entry = acc.entry(k).or_insert_with(|| std::array::from_fn(|_| TimePoly::zero()));
            for c in 0..3 {
                entry[c].add_product(&dot, &wh2[c]);
            }
        }
    }
    let mut out = TimeField::zero();
    for (k, x) in acc {
        let ksq = k.norm_sq() as i64;
        let mut kx = TimePoly::zero();
        for c in 0..3 {
            kx = &kx + &x[c].scale_int(k.0[c] as i64);
        }
        let y: TimeCoeff = std::array::from_fn(|c| {
            let proj = &x[c] - &kx.scale_rational(&rational(k.0[c] as i64, ksq));
            proj.mul_i().scale_int(-1)
        });
        if y.iter().all(|p| p.is_zero()) {
            continue;
        }
        out.add_coeff(k, &y).unwrap();
    }
    out
}

fn cross(a: [i64; 3], b: [i64; 3]) -> [i64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// A divergence-free mode `amp * (k x e)` at a random small wave vector.
pub fn mode() -> impl Strategy<Value = (WaveVector, StaticCoeff)> {
    (
        prop::array::uniform3(-2i32..=2),
        prop::array::uniform3(-2i64..=2),
        -3i64..=3,
        -3i64..=3,
        1i64..=3,
    )
        .prop_filter_map("degenerate mode", |(k, e, re, im, den)| {
            let kv = WaveVector(k);
            let dir = cross(k.map(|x| x as i64), e);
            if kv.is_zero() || dir == [0, 0, 0] || (re == 0 && im == 0) {
                return None;
            }
            let amp = GaussianRational::new(rational(re, den), rational(im, den));
            Some((kv, dir.map(|d| amp.scale_int(d))))
        })
}

/// Random data with two independent modes.
pub fn two_mode_datum() -> impl Strategy<Value = StaticField> {
    (mode(), mode()).prop_filter_map("coinciding modes", |(a, b)| {
        if a.0.canonical().0 == b.0.canonical().0 {
            return None;
        }
        StaticField::from_modes(&[a, b]).ok()
    })
}

/// Random time field on a few modes with small polynomial coefficients.
pub fn time_field() -> impl Strategy<Value = TimeField> {
    prop::collection::vec((mode(), 0u32..3, 0u32..5), 1..4).prop_map(|modes| {
        let mut f = TimeField::zero();
        for ((k, v), a, b) in modes {
            let c: TimeCoeff = std::array::from_fn(|i| TimePoly::monomial(a, b, v[i].clone()));
            let mut g = TimeField::zero();
            g.add_coeff(k, &c).unwrap();
            f = f.add(&g);
        }
        f
    })
}

/// Random small time polynomial.
pub fn poly() -> impl Strategy<Value = TimePoly> {
    prop::collection::vec((0u32..4, 0u32..7, -9i64..=9, -9i64..=9, 1i64..=5), 1..6).prop_map(|terms| {
        TimePoly::from_terms(
            terms
                .into_iter()
                .map(|(a, b, re, im, den)| ((a, b), GaussianRational::new(rational(re, den), rational(im, den)))),
        )
    })
}

// Composite 8-point Gauss-Legendre on [0, t]
const GL_X: [f64; 4] = [0.183_434_642_495_649_8, 0.525_532_409_916_329, 0.796_666_477_413_626_7, 0.960_289_856_497_536_3];
const GL_W: [f64; 4] = [0.362_683_783_378_362, 0.313_706_645_877_887_3, 0.222_381_034_453_374_5, 0.101_228_536_290_376_3];

pub fn quad(t: f64, f: impl Fn(f64) -> (f64, f64)) -> (f64, f64) {
    let panels = 64;
    let h = t / panels as f64;
    let mut acc = (0.0, 0.0);
    for p in 0..panels {
        let m = (p as f64 + 0.5) * h;
        for (x, w) in GL_X.iter().zip(GL_W) {
            for s in [m - x * h / 2.0, m + x * h / 2.0] {
                let v = f(s);
                acc.0 += w * v.0 * h / 2.0;
                acc.1 += w * v.1 * h / 2.0;
            }
        }
    }
    acc
}
