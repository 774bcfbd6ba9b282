use std::collections::BTreeSet;

use reynolds_core::data::{datum_bnw, datum_km, datum_tg, DatumDescriptor};
use reynolds_core::fields::WaveVector;
use reynolds_core::numeric::{self, Real};
use reynolds_core::symmetry::{
    find_symmetries, octahedral_group, orbit_partition, propagate_coefficient, push_forward,
    GroupElement, SymmetryData,
};

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn datum_norms_and_gamma() {
    for (d, h3, g0) in [
        (datum_bnw(), 154.3, 22.27),
        (datum_tg(), 40.91, 2.784),
        (datum_km(), 497.6, 2.784),
    ] {
        let n3 = d.field.sobolev_norm_f64(3);
        assert!(rel(n3, h3) < 1e-3, "{}: {n3}", d.name);
        assert!(rel(d.gamma0(), g0) < 1e-3, "{}: {}", d.name, d.gamma0());
        // symbolic norm of the heat-evolved datum agrees at t = 0
        let poly = d.field.to_time_field().heat_apply().sobolev_norm_sq_poly(3);
        assert!(rel(poly.eval_norm_f64(0.0, 128), n3) < 1e-14);
    }
    // Parseval at n = 0: ||u||^2 = (2 pi)^3 * 12 for BNW
    let bnw = datum_bnw();
    assert_eq!(bnw.field.norm_sq_reduced(0), 12.into());
    assert_eq!(bnw.field.norm_sq_reduced(3), 96.into());
}

#[test]
fn rey_factors() {
    let pi = std::f64::consts::PI;
    let f = |d: &DatumDescriptor| numeric::to_f64(&d.rey_factor(128));
    assert!(rel(f(&datum_bnw()), 2.0 * 6f64.sqrt() * pi) < 1e-14);
    assert!(rel(f(&datum_tg()), pi / 3f64.sqrt()) < 1e-14);
    assert!(rel(f(&datum_km()), (3.0f64 / 11.0).sqrt() * pi) < 1e-14);
    assert!(rel(datum_bnw().physical_reynolds(0.51).unwrap(), 7.84) < 2e-3);
    assert!(rel(datum_tg().physical_reynolds(2.8).unwrap(), 5.07) < 2e-3);
    assert!(rel(datum_km().physical_reynolds(0.61).unwrap(), 1.00) < 5e-3);
}

fn fixture(name: &str) -> SymmetryData {
    let path = format!("{}/fixtures/{name}_symmetry.txt", env!("CARGO_MANIFEST_DIR"));
    SymmetryData::from_label_table(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn discovered_symmetries_match_tables() {
    for (d, fx) in [(datum_bnw(), "bnw"), (datum_tg(), "tg"), (datum_km(), "km")] {
        let found = find_symmetries(&d.field).unwrap();
        let table = fixture(fx);
        assert_eq!(found, table, "{}", d.name);
        found.check().unwrap();
        let e = d.expected_symmetry.unwrap();
        assert_eq!(found.plus.len(), e.plus);
        assert_eq!(found.minus.len(), e.plus);
        assert_eq!(found.reduced_plus.len(), e.reduced_plus);
        assert_eq!(found.reduced_minus.len(), e.reduced_plus);
        assert_eq!(found.reduced_coincide(), e.reduced_coincide);
        if !e.reduced_coincide {
            assert!(found.reduced_disjoint());
        }
    }
    let km = find_symmetries(&datum_km().field).unwrap();
    let full: BTreeSet<_> = octahedral_group().into_iter().collect();
    assert_eq!(km.reduced_plus, full);
}

#[test]
fn bnw_push_forward_examples() {
    let d = datum_bnw();
    let u = d.field.to_time_field();
    for g in fixture("bnw").plus {
        assert_eq!(push_forward(&g, &u), u);
    }
    let minus_id = GroupElement::from_labels(8, 1, 1).unwrap();
    assert_eq!(push_forward(&minus_id, &u), u.neg());
    assert_eq!(push_forward(&GroupElement::IDENTITY, &u), u);
}

#[test]
fn bnw_orbit_and_propagation() {
    let sym = find_symmetries(&datum_bnw().field).unwrap();
    let u = datum_bnw().field.to_time_field().heat_apply();
    let keys: BTreeSet<WaveVector> = u.full_support().into_iter().collect();
    let orbits = orbit_partition(&keys, &sym.reduced_union()).unwrap();
    let k110 = WaveVector::new(1, 1, 0);
    let orbit = orbits.iter().find(|o| o.contains(&k110)).unwrap();
    assert!(orbit.contains(&WaveVector::new(1, 0, 1)));
    assert!(orbit.contains(&WaveVector::new(0, 1, 1)));
    let group = sym.reduced_union().len();
    for o in &orbits {
        assert_eq!(group % o.len(), 0);
    }
    let c = u.get(&k110).unwrap().into_owned();
    for (g, sigma) in sym.plus.iter().map(|g| (g, 1)).chain(sym.minus.iter().map(|g| (g, -1))) {
        let (sk, w) = propagate_coefficient(&c, &k110, g, sigma, 0);
        assert_eq!(u.get(&sk).unwrap().into_owned(), w);
    }
    // identity leaves the coefficient alone; a pseudo-symmetry at even j flips sign
    let (k, w) = propagate_coefficient(&c, &k110, &GroupElement::IDENTITY, 1, 0);
    assert_eq!((k, &w), (k110, &c));
    let (_, w) = propagate_coefficient(&c, &k110, &GroupElement::IDENTITY, -1, 2);
    assert_eq!(w, reynolds_core::fields::coeff_neg(&c));
}

// cos(2 pi m / 16) from nested radicals, independent of any series code
fn cos16(m: i64, p: usize) -> Real {
    let m = m.rem_euclid(16);
    let two = numeric::from_int(2, p);
    let s2 = numeric::sqrt(&two);
    let half = numeric::from_rational(&reynolds_core::timebasis::rational(1, 2), p);
    let c1 = numeric::sqrt(&(two.clone() + s2.clone())) * half.clone(); // cos(pi/8)
    let c2 = s2 * half.clone(); // cos(pi/4)
    let c3 = numeric::sqrt(&(two.clone() - numeric::sqrt(&two))) * half; // cos(3pi/8)
    let table = [
        numeric::one(p),
        c1.clone(),
        c2.clone(),
        c3.clone(),
        numeric::zero(p),
    ];
    // reduce to the first quadrant
    let (idx, sign) = match m {
        0..=4 => (m, 1),
        5..=8 => (8 - m, -1),
        9..=12 => (m - 8, -1),
        _ => (16 - m, 1),
    };
    let v = table[idx as usize].clone();
    if sign < 0 {
        -v
    } else {
        v
    }
}

fn sin16(m: i64, p: usize) -> Real {
    cos16(m - 4, p)
}

#[test]
fn trig_forms_match_fourier_forms() {
    let p = 128;
    let tol = 1e-20;
    let two = numeric::from_int(2, p);
    for d in [datum_bnw(), datum_tg(), datum_km()] {
        let mut worst = 0.0f64;
        for m1 in 0..16i64 {
            for m2 in 0..16i64 {
                for m3 in 0..16i64 {
                    // Fourier form: 2 Re sum_{canonical k} v_k e^{i k.x}
                    let mut fourier: [Real; 3] = std::array::from_fn(|_| numeric::zero(p));
                    for (k, c) in d.field.iter() {
                        let phase = k.0[0] as i64 * m1 + k.0[1] as i64 * m2 + k.0[2] as i64 * m3;
                        let (cs, sn) = (cos16(phase, p), sin16(phase, p));
                        for i in 0..3 {
                            let z = c[i].to_complex(p);
                            fourier[i] += (&z.re * &cs - &z.im * &sn) * two.clone();
                        }
                    }
                    let (c1, c2, c3) = (cos16(m1, p), cos16(m2, p), cos16(m3, p));
                    let (s1, s2, s3) = (sin16(m1, p), sin16(m2, p), sin16(m3, p));
                    let trig: [Real; 3] = match d.name.as_str() {
                        "bnw" => {
                            let a = cos16(m1 + m2, p);
                            let b = cos16(m1 + m3, p);
                            let c = cos16(m2 + m3, p);
                            [
                                (a.clone() + b.clone()) * two.clone(),
                                (c.clone() - a) * two.clone(),
                                (-b - c) * two.clone(),
                            ]
                        }
                        "tg" => [
                            &s1 * &c2 * &c3,
                            -(&c1 * &s2 * &c3),
                            numeric::zero(p),
                        ],
                        _ => {
                            let (d1, d2, d3) = (cos16(2 * m1, p), cos16(2 * m2, p), cos16(2 * m3, p));
                            [
                                &s1 * &c2 * &c3 * (&d2 - &d3) * two.clone(),
                                &c1 * &s2 * &c3 * (&d3 - &d1) * two.clone(),
                                &c1 * &c2 * &s3 * (&d1 - &d2) * two.clone(),
                            ]
                        }
                    };
                    for i in 0..3 {
                        let diff = numeric::to_f64(&(&fourier[i] - &trig[i])).abs();
                        worst = worst.max(diff);
                    }
                }
            }
        }
        assert!(worst < tol, "{}: max deviation {worst}", d.name);
    }
}
