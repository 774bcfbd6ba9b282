//! The benchmark initial data and their characteristic scales.

use std::path::Path;

use crate::error::{Error, Result};
use crate::fields::{StaticCoeff, StaticField, WaveVector};
use crate::numeric::{self, Real};
use crate::timebasis::{rational, GaussianRational};

/// Symmetry sizes a datum is known to have.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExpectedSymmetry {
    pub plus: usize,
    pub reduced_plus: usize,
    pub reduced_coincide: bool,
}

#[derive(Clone, Debug)]
pub struct DatumDescriptor {
    pub name: String,
    pub field: StaticField,
    pub expected_symmetry: Option<ExpectedSymmetry>,
    /// Wave vector whose coefficient is reported as the "gamma" profile.
    pub probe: WaveVector,
}

impl DatumDescriptor {
    pub fn new(name: &str, field: StaticField) -> Result<Self> {
        field.check_invariants()?;
        if field.is_zero() {
            return Err(Error::InvalidArgument(format!("datum {name} is zero")));
        }
        let probe = *field.iter().next().expect("nonzero field").0;
        Ok(DatumDescriptor {
            name: name.to_string(),
            field,
            expected_symmetry: None,
            probe,
        })
    }

    /// Root mean square velocity `sqrt(||u||_0^2 / (2 pi)^3)`.
    pub fn v_star(&self, precision: usize) -> Real {
        let p = precision + numeric::GUARD_BITS;
        numeric::sqrt(&numeric::from_rational(&self.field.norm_sq_reduced(0), p))
            .with_precision(precision)
            .value()
    }

    /// `Rey / R = ||u||_{-1} / (2 pi)^{1/2}`.
    pub fn rey_factor(&self, precision: usize) -> Real {
        let p = precision + numeric::GUARD_BITS;
        let two_pi = numeric::from_int(2, p) * numeric::pi(p);
        (two_pi * numeric::sqrt(&numeric::from_rational(&self.field.norm_sq_reduced(-1), p)))
            .with_precision(precision)
            .value()
    }

    /// Characteristic length `rey_factor / V_*`.
    pub fn l_star(&self, precision: usize) -> Real {
        let p = precision + numeric::GUARD_BITS;
        (self.rey_factor(p) / self.v_star(p)).with_precision(precision).value()
    }

    pub fn physical_reynolds(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::InvalidArgument(format!("Reynolds parameter {r} must be >= 0")));
        }
        Ok(numeric::to_f64(&self.rey_factor(numeric::DEFAULT_PRECISION)) * r)
    }

    /// `(2 pi)^{3/2} |u_{*,k}|` at the probe wave vector.
    pub fn gamma0(&self) -> f64 {
        let p = numeric::DEFAULT_PRECISION;
        let c = self.field.get(&self.probe).unwrap_or_default();
        let m = c.iter().fold(crate::timebasis::Rational::ZERO, |a, x| a + x.norm_sqr());
        numeric::to_f64(&numeric::sqrt(
            &(numeric::from_rational(&m, p) * numeric::torus_volume(p)),
        ))
    }
}

fn real_vec(v: [i64; 3]) -> StaticCoeff {
    v.map(GaussianRational::from_int)
}

fn i_over_8(v: [i64; 3]) -> StaticCoeff {
    v.map(|x| GaussianRational::imag(rational(x, 8)))
}

fn wv(k: [i32; 3]) -> WaveVector {
    WaveVector(k)
}

/// Six real modes on the wave vectors of length `sqrt 2`.
pub fn datum_bnw() -> DatumDescriptor {
    let ks = [[1, 1, 0], [1, 0, 1], [0, 1, 1]];
    let zs = [[1, -1, 0], [1, 0, -1], [0, 1, -1]];
    let modes: Vec<_> = ks
        .iter()
        .zip(zs)
        .flat_map(|(k, z)| [(wv(*k), real_vec(z)), (-wv(*k), real_vec(z))])
        .collect();
    let field = StaticField::from_modes(&modes).expect("BNW datum is valid");
    DatumDescriptor {
        name: "bnw".into(),
        field,
        expected_symmetry: Some(ExpectedSymmetry {
            plus: 12,
            reduced_plus: 6,
            reduced_coincide: false,
        }),
        probe: wv([1, 1, 0]),
    }
}

/// Taylor-Green vortex `(sin x1 cos x2 cos x3, -cos x1 sin x2 cos x3, 0)`.
pub fn datum_tg() -> DatumDescriptor {
    let ks = [[1, 1, 1], [1, 1, -1], [1, -1, 1], [-1, 1, 1]];
    let z3 = [-1, -1, 0];
    let zs = [[-1, 1, 0], [-1, 1, 0], z3, z3.map(|x| -x)];
    let modes: Vec<_> = ks.iter().zip(zs).map(|(k, z)| (wv(*k), i_over_8(z))).collect();
    let field = StaticField::from_modes(&modes).expect("TG datum is valid");
    DatumDescriptor {
        name: "tg".into(),
        field,
        expected_symmetry: Some(ExpectedSymmetry {
            plus: 64,
            reduced_plus: 16,
            reduced_coincide: true,
        }),
        probe: wv([1, 1, 1]),
    }
}

/// Kida-Murakami flow on the wave vectors of length `sqrt 11`.
pub fn datum_km() -> DatumDescriptor {
    let ks = [
        [3, 1, 1],
        [3, 1, -1],
        [1, 3, 1],
        [1, 3, -1],
        [1, 1, 3],
        [1, 1, -3],
        [1, -1, 3],
        [1, -1, -3],
        [1, -3, 1],
        [1, -3, -1],
        [3, -1, 1],
        [3, -1, -1],
    ];
    let z1 = [0, 1, -1];
    let z2 = [0, 1, 1];
    let z3 = [-1, 0, 1];
    let z4 = [-1, 0, -1];
    let z5 = [1, -1, 0];
    let z7 = [1, 1, 0];
    let zs = [
        z1,
        z2,
        z3,
        z4,
        z5,
        z5,
        z7,
        z7,
        z3,
        z4,
        z2.map(|x| -x),
        z1.map(|x| -x),
    ];
    let modes: Vec<_> = ks.iter().zip(zs).map(|(k, z)| (wv(*k), i_over_8(z))).collect();
    let field = StaticField::from_modes(&modes).expect("KM datum is valid");
    DatumDescriptor {
        name: "km".into(),
        field,
        expected_symmetry: Some(ExpectedSymmetry {
            plus: 192,
            reduced_plus: 48,
            reduced_coincide: true,
        }),
        probe: wv([3, 1, 1]),
    }
}

/// Parses a datum file.
///
/// Two layouts are accepted: the exact field serialization, or a header
/// line `datum v1` followed by `name NAME` and lines
/// `mode k1 k2 k3 re1 im1 re2 im2 re3 im3` (rationals written `p/q` or `p`).
/// Modes at `-k` may be omitted; when present they must be the conjugates.
pub fn parse_datum(text: &str) -> Result<DatumDescriptor> {
    if text.starts_with("field v1") {
        let (name, field) = StaticField::from_text(text)?;
        return DatumDescriptor::new(&name, field);
    }
    let mut lines = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty());
    if lines.next() != Some("datum v1") {
        return Err(Error::Format("datum file must start with `datum v1` or `field v1`".into()));
    }
    let mut name = "user".to_string();
    let mut modes = Vec::new();
    for line in lines {
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts.first().copied() {
            Some("name") if parts.len() == 2 => name = parts[1].to_string(),
            Some("mode") if parts.len() == 10 => {
                let k: Vec<i32> = parts[1..4]
                    .iter()
                    .map(|s| s.parse())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::Format(format!("bad wave vector in {line:?}")))?;
                let mut v = StaticCoeff::default();
                for c in 0..3 {
                    v[c] = GaussianRational::parse_parts(parts[4 + 2 * c], parts[5 + 2 * c])?;
                }
                modes.push((wv([k[0], k[1], k[2]]), v));
            }
            _ => return Err(Error::Format(format!("bad datum line {line:?}"))),
        }
    }
    let field = StaticField::from_modes(&modes)?;
    DatumDescriptor::new(&name, field)
}

pub fn load_datum_file(path: &Path) -> Result<DatumDescriptor> {
    parse_datum(&std::fs::read_to_string(path)?)
}

/// Resolves `bnw`, `tg`, `km` or `file:PATH`.
pub fn datum_by_name(sel: &str) -> Result<DatumDescriptor> {
    match sel {
        "bnw" => Ok(datum_bnw()),
        "tg" => Ok(datum_tg()),
        "km" => Ok(datum_km()),
        _ => match sel.strip_prefix("file:") {
            Some(path) => load_datum_file(Path::new(path)),
            None => Err(Error::InvalidArgument(format!(
                "unknown datum {sel:?}; expected bnw, tg, km or file:PATH"
            ))),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_counts() {
        assert_eq!(datum_bnw().field.canonical_len(), 3);
        assert_eq!(datum_tg().field.canonical_len(), 4);
        assert_eq!(datum_km().field.canonical_len(), 12);
    }

    #[test]
    fn tg_third_component_vanishes() {
        for (_, c) in datum_tg().field.iter() {
            assert!(c[2].is_zero());
        }
    }

    #[test]
    fn characteristic_scales() {
        let p = 128;
        let f = |x: Real| numeric::to_f64(&x);
        let pi = std::f64::consts::PI;
        let bnw = datum_bnw();
        assert!((f(bnw.v_star(p)) - 2.0 * 3f64.sqrt()).abs() < 1e-14);
        assert!((f(bnw.l_star(p)) - 2.0 * pi / 2f64.sqrt()).abs() < 1e-14);
        let tg = datum_tg();
        assert!((f(tg.v_star(p)) - 0.5).abs() < 1e-15);
        assert!((f(tg.l_star(p)) - 2.0 * pi / 3f64.sqrt()).abs() < 1e-14);
        let km = datum_km();
        assert!((f(km.v_star(p)) - 3f64.sqrt() / 2.0).abs() < 1e-15);
        assert!((f(km.l_star(p)) - 2.0 * pi / 11f64.sqrt()).abs() < 1e-14);
        assert_eq!(km.physical_reynolds(0.0).unwrap(), 0.0);
        assert!(km.physical_reynolds(-1.0).is_err());
    }

    #[test]
    fn parse_user_datum() {
        let text = "datum v1\nname pair\nmode 1 1 0 1 0 -1 0 0 0\nmode -1 -1 0 1 0 -1 0 0 0\n";
        let d = parse_datum(text).unwrap();
        assert_eq!(d.name, "pair");
        assert_eq!(d.field.canonical_len(), 1);
        let bad = "datum v1\nmode 1 0 0 1 0 0 0 0 0\n";
        assert!(matches!(parse_datum(bad), Err(Error::Invariant(_))));
        let not_conj = "datum v1\nmode 0 1 0 0 1 0 0 0 0\nmode 0 -1 0 0 1 0 0 0 0\n";
        assert!(matches!(parse_datum(not_conj), Err(Error::Invariant(_))));
        assert!(datum_by_name("nope").is_err());
        let round = parse_datum(&datum_km().field.to_text("km")).unwrap();
        assert_eq!(round.field, datum_km().field);
    }
}
