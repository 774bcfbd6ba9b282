//! Command-line argument groups and the fully materialized run configuration.

use std::path::{Path, PathBuf};

use clap::Args;
use reynolds_core::control::ControlParams;
use reynolds_core::data::{datum_by_name, DatumDescriptor};
use reynolds_core::estimators::{ConstantsTable, GridSpec, Variant};
use reynolds_core::expansion::{datum_hash, Expansion};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Args, Clone, Debug)]
pub struct DatumArgs {
    /// bnw, tg, km or file:PATH
    #[arg(long)]
    pub datum: String,
}

impl DatumArgs {
    pub fn load(&self) -> Result<DatumDescriptor> {
        datum_by_name(&self.datum).map_err(|e| match e {
            reynolds_core::Error::InvalidArgument(m) => CliError::Usage(m),
            e => e.into(),
        })
    }
}

#[derive(Args, Clone, Debug)]
pub struct CacheArgs {
    #[command(flatten)]
    pub datum: DatumArgs,

    /// Truncation order N
    #[arg(long)]
    pub order: usize,

    /// Expand without symmetry pruning
    #[arg(long)]
    pub no_symmetry: bool,

    /// Root directory of expansion caches
    #[arg(long, env = "REYNOLDS_CACHE", default_value = "reynolds-cache")]
    pub cache_root: PathBuf,
}

impl CacheArgs {
    pub fn dir(&self, d: &DatumDescriptor) -> PathBuf {
        cache_dir(&self.cache_root, d, self.order, !self.no_symmetry)
    }
}

pub fn cache_dir(root: &Path, d: &DatumDescriptor, order: usize, symmetry: bool) -> PathBuf {
    let hash = datum_hash(&d.field);
    let sym = if symmetry { "sym" } else { "nosym" };
    root.join(format!("{}-{}", d.name, &hash[..12])).join(format!("N{order}-{sym}"))
}

#[derive(Args, Clone, Debug)]
pub struct EstimatorArgs {
    /// tautological, rough or intermediate:M
    #[arg(long, default_value_t = Variant::default())]
    pub variant: Variant,

    /// Sobolev order n of the control problem
    #[arg(long = "sobolev", default_value_t = 3)]
    pub n: i32,

    /// JSON constants table; the built-in K_3, G_3 are used otherwise
    #[arg(long)]
    pub constants: Option<PathBuf>,

    #[arg(long, default_value_t = GridSpec::default().points)]
    pub grid_points: usize,

    #[arg(long, default_value_t = GridSpec::default().t_first)]
    pub t_first: f64,

    #[arg(long, default_value_t = GridSpec::default().t_split)]
    pub t_split: f64,

    /// End of the estimator grid and of the integration window
    #[arg(long, default_value_t = GridSpec::default().t_max)]
    pub t_max: f64,

    /// Working precision in bits
    #[arg(long, default_value_t = reynolds_core::numeric::DEFAULT_PRECISION)]
    pub precision: usize,
}

impl EstimatorArgs {
    pub fn constants(&self) -> Result<ConstantsTable> {
        match &self.constants {
            Some(p) => ConstantsTable::load(p).map_err(|e| match e {
                reynolds_core::Error::Io(io) => CliError::io(p, io),
                e => e.into(),
            }),
            None => Ok(ConstantsTable::default()),
        }
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec {
            points: self.grid_points,
            t_first: self.t_first,
            t_split: self.t_split,
            t_max: self.t_max,
        }
    }
}

#[derive(Args, Clone, Debug)]
pub struct SolverArgs {
    #[arg(long, default_value_t = ControlParams::default().blowup_threshold)]
    pub blowup_threshold: f64,

    #[arg(long, default_value_t = ControlParams::default().rtol)]
    pub rtol: f64,

    #[arg(long, default_value_t = ControlParams::default().atol)]
    pub atol: f64,

    #[arg(long, default_value_t = ControlParams::default().max_step)]
    pub max_step: f64,
}

impl Default for SolverArgs {
    fn default() -> Self {
        let p = ControlParams::default();
        SolverArgs {
            blowup_threshold: p.blowup_threshold,
            rtol: p.rtol,
            atol: p.atol,
            max_step: p.max_step,
        }
    }
}

impl SolverArgs {
    pub fn params(&self, t_max: f64) -> ControlParams {
        ControlParams {
            t_max: Some(t_max),
            blowup_threshold: self.blowup_threshold,
            rtol: self.rtol,
            atol: self.atol,
            max_step: self.max_step,
            ..ControlParams::default()
        }
    }
}

/// Everything a run depends on, defaults included.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub datum: String,
    pub datum_hash: String,
    pub order: usize,
    pub symmetry: bool,
    pub cache: PathBuf,
    /// Digest of the cache manifest the run read.
    pub cache_digest: String,
    pub variant: Variant,
    pub n: i32,
    pub constants: ConstantsTable,
    pub grid: GridSpec,
    pub precision: usize,
    pub solver: ControlParams,
    pub r: Option<f64>,
    pub r_range: Option<(f64, f64)>,
    pub tol: Option<f64>,
    pub higher_order: Option<i32>,
}

impl RunConfig {
    pub fn new(
        command: &str,
        cache: &CacheArgs,
        exp: &Expansion,
        est: &EstimatorArgs,
        solver: &SolverArgs,
    ) -> Result<Self> {
        Ok(RunConfig {
            command: command.into(),
            datum: exp.datum_name.clone(),
            datum_hash: datum_hash(&exp.datum),
            order: exp.order(),
            symmetry: exp.use_symmetry,
            cache: cache.dir(&cache.datum.load()?),
            cache_digest: digest(serde_json::to_string(&exp.manifest())?.as_bytes()),
            variant: est.variant,
            n: est.n,
            constants: est.constants()?,
            grid: est.grid(),
            precision: est.precision,
            solver: solver.params(est.t_max),
            r: None,
            r_range: None,
            tol: None,
            higher_order: None,
        })
    }

    /// Hash embedded in every output file.
    pub fn hash(&self) -> String {
        digest(serde_json::to_string(self).expect("config serializes").as_bytes())
    }

    pub fn provenance(&self) -> String {
        format!("manifest sha256={} precision={} bits", self.hash(), self.precision)
    }
}

pub fn digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use reynolds_core::data::datum_tg;

    #[test]
    fn cache_layout() {
        let d = datum_tg();
        let p = cache_dir(Path::new("/c"), &d, 4, false);
        let parent = p.parent().unwrap().file_name().unwrap().to_str().unwrap();
        assert!(parent.starts_with("tg-") && parent.len() == 15);
        assert_eq!(p.file_name().unwrap(), "N4-nosym");
    }

    #[test]
    fn hash_tracks_every_setting() {
        let exp = reynolds_core::expansion::expand("tg", &datum_tg().field, 1, &Default::default()).unwrap();
        let cache = CacheArgs {
            datum: DatumArgs { datum: "tg".into() },
            order: 1,
            no_symmetry: false,
            cache_root: "/c".into(),
        };
        let est = EstimatorArgs {
            variant: Variant::default(),
            n: 3,
            constants: None,
            grid_points: 400,
            t_first: 1e-4,
            t_split: 1.0,
            t_max: 20.0,
            precision: 256,
        };
        let a = RunConfig::new("control", &cache, &exp, &est, &SolverArgs::default()).unwrap();
        assert_eq!(a.hash(), a.clone().hash());
        let mut b = a.clone();
        b.r = Some(0.5);
        assert_ne!(a.hash(), b.hash());
        let mut c = a.clone();
        c.solver.rtol = 1e-9;
        assert_ne!(a.hash(), c.hash());
    }
}
