//! The Reynolds expansion `u^N = sum_j R^j u_j` and its residual tail.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fields::{
    accumulate_convolution, project_accumulated, FullView, StaticField, TimeCoeff, TimeField,
    WaveVector,
};
use crate::parallel::par_map;
use crate::symmetry::{find_symmetries, orbit_partition, propagate_coefficient, SymmetryData};
use crate::timebasis::{Exponents, GaussianRational};

pub const DEFAULT_TERM_CEILING: usize = 10_000_000;
pub const CACHE_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct ExpansionConfig {
    pub use_symmetry: bool,
    /// Maximum total number of time-basis terms across all stored orders.
    pub term_ceiling: usize,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        ExpansionConfig {
            use_symmetry: true,
            term_ceiling: DEFAULT_TERM_CEILING,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderStats {
    pub order: usize,
    /// Nonzero Fourier coefficients, counting `k` and `-k`.
    pub coefficients: usize,
    pub orbits: usize,
    pub terms: usize,
    pub degree_t: u32,
    pub degree_decay: u32,
    pub max_wave: i32,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct Expansion {
    pub datum_name: String,
    pub datum: StaticField,
    pub use_symmetry: bool,
    pub symmetry: SymmetryData,
    /// `u_0, ..., u_N`.
    pub coeffs: Vec<TimeField>,
    pub stats: Vec<OrderStats>,
    /// Residual tail `tail_{N+1}, ..., tail_{2N+1}`, computed on demand.
    pub tail: Option<Vec<TimeField>>,
}

/// Hex SHA-256 of the exact datum serialization.
pub fn datum_hash(datum: &StaticField) -> String {
    let digest = Sha256::digest(datum.to_text("datum").as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(not(target_arch = "wasm32"))]
struct Stopwatch(std::time::Instant);

#[cfg(not(target_arch = "wasm32"))]
impl Stopwatch {
    fn start() -> Self {
        Stopwatch(std::time::Instant::now())
    }
    fn seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

#[cfg(target_arch = "wasm32")]
struct Stopwatch;

#[cfg(target_arch = "wasm32")]
impl Stopwatch {
    fn start() -> Self {
        Stopwatch
    }
    fn seconds(&self) -> f64 {
        0.0
    }
}

/// Computes the expansion up to order `n`.
pub fn expand(name: &str, datum: &StaticField, n: usize, cfg: &ExpansionConfig) -> Result<Expansion> {
    let mut exp = Expansion::new(name, datum, cfg.use_symmetry)?;
    exp.extend_to(n, cfg.term_ceiling)?;
    Ok(exp)
}

impl Expansion {
    /// Expansion holding only `u_0 = e^{t Delta} u_*`.
    pub fn new(name: &str, datum: &StaticField, use_symmetry: bool) -> Result<Expansion> {
        datum.check_invariants()?;
        let symmetry = if datum.is_zero() {
            SymmetryData::trivial()
        } else {
            find_symmetries(datum)?
        };
        let watch = Stopwatch::start();
        let u0 = datum.to_time_field().heat_apply();
        let mut exp = Expansion {
            datum_name: name.to_string(),
            datum: datum.clone(),
            use_symmetry,
            symmetry,
            coeffs: Vec::new(),
            stats: Vec::new(),
            tail: None,
        };
        exp.push_order(u0, watch.seconds());
        Ok(exp)
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn total_terms(&self) -> usize {
        self.coeffs.iter().map(TimeField::term_count).sum()
    }

    fn push_order(&mut self, u: TimeField, seconds: f64) {
        let order = self.coeffs.len();
        let (dt, db) = u.degrees();
        let stats = OrderStats {
            order,
            coefficients: u.support_len(),
            orbits: self.orbit_count(&u),
            terms: u.term_count(),
            degree_t: dt,
            degree_decay: db,
            max_wave: u.max_abs_wave(),
            seconds,
        };
        self.coeffs.push(u);
        self.stats.push(stats);
    }

    fn orbit_count(&self, u: &TimeField) -> usize {
        let keys: BTreeSet<WaveVector> = u.full_support().into_iter().collect();
        if keys.is_empty() {
            return 0;
        }
        orbit_partition(&keys, &self.symmetry.reduced_union())
            .map(|o| o.len())
            .unwrap_or(keys.len())
    }

    /// Computes further orders until `n`. On a resource-limit error the
    /// orders completed so far are kept.
    pub fn extend_to(&mut self, n: usize, term_ceiling: usize) -> Result<()> {
        while self.order() < n {
            let j = self.order() + 1;
            let watch = Stopwatch::start();
            let pairs: Vec<(usize, usize)> = (0..j).map(|l| (l, j - l - 1)).collect();
            let u = self.order_field(&pairs, j, true);
            let terms = self.total_terms() + u.term_count();
            if terms > term_ceiling {
                return Err(Error::ResourceLimit {
                    order: j,
                    terms,
                    ceiling: term_ceiling,
                });
            }
            self.push_order(u, watch.seconds());
            self.tail = None;
        }
        Ok(())
    }

    /// `sum_{(l,m) in pairs} P(u_l, u_m)` (Duhamel-integrated if requested),
    /// where every pair satisfies `l + m + 1 = j`.
    fn order_field(&self, pairs: &[(usize, usize)], j: usize, duhamel: bool) -> TimeField {
        let used: BTreeSet<usize> = pairs.iter().flat_map(|&(l, m)| [l, m]).collect();
        let views: BTreeMap<usize, FullView<'_>> =
            used.iter().map(|&l| (l, FullView::new(&self.coeffs[l]))).collect();
        let mut targets = BTreeSet::new();
        for &(l, m) in pairs {
            let wkeys: Vec<WaveVector> = views[&m].keys().copied().collect();
            for h in views[&l].keys() {
                for h2 in &wkeys {
                    let k = *h + *h2;
                    if !k.is_zero() {
                        targets.insert(k);
                    }
                }
            }
        }
        let compute = |k: &WaveVector| -> TimeCoeff {
            let mut acc: [BTreeMap<Exponents, GaussianRational>; 3] = Default::default();
            for &(l, m) in pairs {
                accumulate_convolution(&mut acc, k, &views[&l], &views[&m]);
            }
            let p = project_accumulated(k, acc);
            if duhamel {
                let ksq = k.norm_sq();
                std::array::from_fn(|c| p[c].heat_convolve(ksq))
            } else {
                p
            }
        };
        let mut out = TimeField::zero();
        if self.use_symmetry {
            let orbits = orbit_partition(&targets, &self.symmetry.reduced_union())
                .expect("reduced group contains the identity");
            let reps: Vec<WaveVector> = orbits.iter().map(|o| o[0]).collect();
            let values = par_map(&reps, compute);
            let actions = self.symmetry.actions();
            for (rep, c) in reps.iter().zip(values) {
                for (g, sigma) in actions.values() {
                    let (k, w) = propagate_coefficient(&c, rep, g, *sigma, j);
                    if k.is_canonical() {
                        out.set_canonical(k, w);
                    }
                }
            }
        } else {
            let canon: Vec<WaveVector> = targets.into_iter().filter(|k| k.is_canonical()).collect();
            let values = par_map(&canon, compute);
            for (k, c) in canon.into_iter().zip(values) {
                out.set_canonical(k, c);
            }
        }
        out
    }

    /// `tail_j = -sum_{l=j-N-1}^{N} P(u_l, u_{j-l-1})` for `j = N+1 .. 2N+1`.
    pub fn residual_tail(&self) -> Vec<TimeField> {
        let n = self.order();
        (n + 1..=2 * n + 1)
            .map(|j| {
                let pairs: Vec<(usize, usize)> = (j - n - 1..=n).map(|l| (l, j - l - 1)).collect();
                self.order_field(&pairs, j, false).neg()
            })
            .collect()
    }

    /// Computes and stores the tail if it is not present.
    pub fn ensure_tail(&mut self) -> &[TimeField] {
        if self.tail.is_none() {
            self.tail = Some(self.residual_tail());
        }
        self.tail.as_deref().expect("just computed")
    }

    /// Checks the field invariants of every order, `u_0(0) = u_*` and
    /// `u_j(0) = 0` for `j >= 1`.
    pub fn check_invariants(&self) -> Result<()> {
        for (j, u) in self.coeffs.iter().enumerate() {
            u.check_invariants()?;
            let at0 = u.at_zero();
            if j == 0 && at0 != self.datum {
                return Err(Error::Invariant("u_0(0) differs from the datum".into()));
            }
            if j > 0 && !at0.is_zero() {
                return Err(Error::Invariant(format!("u_{j}(0) is not zero")));
            }
        }
        if let Some(tail) = &self.tail {
            for t in tail {
                t.check_invariants()?;
            }
        }
        Ok(())
    }

    pub fn manifest(&self) -> CacheManifest {
        CacheManifest {
            format_version: CACHE_FORMAT_VERSION,
            datum_name: self.datum_name.clone(),
            datum_hash: datum_hash(&self.datum),
            order: self.order(),
            use_symmetry: self.use_symmetry,
            has_tail: self.tail.is_some(),
            total_terms: self.total_terms(),
            stats: self.stats.clone(),
        }
    }

    /// Writes `manifest.json`, `datum.txt`, `u_J.txt` and `tail_J.txt` into `dir`.
    pub fn store(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("datum.txt"), self.datum.to_text(&self.datum_name))?;
        for (j, u) in self.coeffs.iter().enumerate() {
            std::fs::write(dir.join(format!("u_{j}.txt")), u.to_text(&self.datum_name, j))?;
        }
        if let Some(tail) = &self.tail {
            let n = self.order();
            for (i, t) in tail.iter().enumerate() {
                let j = n + 1 + i;
                std::fs::write(dir.join(format!("tail_{j}.txt")), t.to_text(&self.datum_name, j))?;
            }
        }
        // manifest last: its presence marks a complete cache
        let json = serde_json::to_string_pretty(&self.manifest())?;
        std::fs::write(dir.join("manifest.json"), json + "\n")?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Expansion> {
        let manifest: CacheManifest = serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
        if manifest.format_version != CACHE_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "cache format version {} is not supported (expected {CACHE_FORMAT_VERSION})",
                manifest.format_version
            )));
        }
        let (_, datum) = StaticField::from_text(&std::fs::read_to_string(dir.join("datum.txt"))?)?;
        if datum_hash(&datum) != manifest.datum_hash {
            return Err(Error::Format("datum hash does not match the manifest".into()));
        }
        let read_field = |file: String, expect: usize| -> Result<TimeField> {
            let (_, idx, f) = TimeField::from_text(&std::fs::read_to_string(dir.join(&file))?)?;
            if idx != expect {
                return Err(Error::Format(format!("{file} carries index {idx}")));
            }
            Ok(f)
        };
        let coeffs = (0..=manifest.order)
            .map(|j| read_field(format!("u_{j}.txt"), j))
            .collect::<Result<Vec<_>>>()?;
        let tail = if manifest.has_tail {
            let n = manifest.order;
            Some(
                (n + 1..=2 * n + 1)
                    .map(|j| read_field(format!("tail_{j}.txt"), j))
                    .collect::<Result<Vec<_>>>()?,
            )
        } else {
            None
        };
        let symmetry = if datum.is_zero() {
            SymmetryData::trivial()
        } else {
            find_symmetries(&datum)?
        };
        let exp = Expansion {
            datum_name: manifest.datum_name.clone(),
            datum,
            use_symmetry: manifest.use_symmetry,
            symmetry,
            coeffs,
            stats: manifest.stats.clone(),
            tail,
        };
        exp.check_invariants()?;
        if exp.total_terms() != manifest.total_terms {
            return Err(Error::Format("term count does not match the manifest".into()));
        }
        Ok(exp)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheManifest {
    pub format_version: u32,
    pub datum_name: String,
    pub datum_hash: String,
    pub order: usize,
    pub use_symmetry: bool,
    pub has_tail: bool,
    pub total_terms: usize,
    pub stats: Vec<OrderStats>,
}
