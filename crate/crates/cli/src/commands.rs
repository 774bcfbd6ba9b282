use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use reynolds_core::control::{
    classical_bounds, classify, coefficient_bound, find_critical_r, solve_control, solve_higher_order,
    ControlTrajectory, VerdictRecord,
};
use reynolds_core::estimators::EstimatorBasis;
use reynolds_core::expansion::{Expansion, DEFAULT_TERM_CEILING};
use reynolds_core::numeric;
use reynolds_core::symmetry::find_symmetries;
use serde::Serialize;

use crate::config::{cache_dir, CacheArgs, DatumArgs, EstimatorArgs, RunConfig, SolverArgs};
use crate::error::{CliError, Result};

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(CliError::MissingInput(path.display().to_string()));
    }
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

#[derive(Args, Debug)]
pub struct ExpandArgs {
    #[command(flatten)]
    pub cache: CacheArgs,

    /// Also compute and store the residual tail (needed by tautological estimators)
    #[arg(long)]
    pub tail: bool,

    /// Abort once the stored orders hold more time-basis terms than this
    #[arg(long, default_value_t = DEFAULT_TERM_CEILING)]
    pub term_ceiling: usize,
}

pub fn expand(a: &ExpandArgs) -> Result<()> {
    let d = a.cache.datum.load()?;
    let sym = !a.cache.no_symmetry;
    let mut exp = Expansion::new(&d.name, &d.field, sym)?;
    let res = exp.extend_to(a.cache.order, a.term_ceiling);
    if res.is_ok() && a.tail {
        exp.ensure_tail();
    }
    // a resource limit keeps the completed orders; flush them before failing
    let dir = cache_dir(&a.cache.cache_root, &d, exp.order(), sym);
    exp.store(&dir)?;
    let mut table = String::from("order,coefficients,orbits,terms,degree_t,degree_decay,max_wave,seconds\n");
    for s in &exp.stats {
        let _ = writeln!(
            table,
            "{},{},{},{},{},{},{},{:.3}",
            s.order, s.coefficients, s.orbits, s.terms, s.degree_t, s.degree_decay, s.max_wave, s.seconds
        );
    }
    write_file(&dir.join("stats.csv"), &table)?;
    print!("{table}");
    eprintln!("cache: {}", dir.display());
    res?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct NormsArgs {
    #[command(flatten)]
    pub datum: DatumArgs,

    #[arg(long)]
    pub json: bool,
}

#[derive(Serialize)]
struct NormsReport {
    datum: String,
    /// `(n, ||u_*||_n)` for `n = -1..=4`.
    norms: Vec<(i32, f64)>,
    v_star: f64,
    l_star: f64,
    reynolds_factor: f64,
    probe: [i32; 3],
    probe_coefficient: f64,
    symmetries: usize,
    pseudo_symmetries: usize,
    reduced_plus: usize,
    reduced_minus: usize,
    reduced_coincide: bool,
    classical: reynolds_core::control::ClassicalBounds,
}

pub fn norms(a: &NormsArgs) -> Result<()> {
    let d = a.datum.load()?;
    let p = numeric::DEFAULT_PRECISION;
    let sym = find_symmetries(&d.field)?;
    let r = NormsReport {
        datum: d.name.clone(),
        norms: (-1..=4).map(|n| (n, d.field.sobolev_norm_f64(n))).collect(),
        v_star: numeric::to_f64(&d.v_star(p)),
        l_star: numeric::to_f64(&d.l_star(p)),
        reynolds_factor: numeric::to_f64(&d.rey_factor(p)),
        probe: d.probe.0,
        probe_coefficient: d.gamma0(),
        symmetries: sym.plus.len(),
        pseudo_symmetries: sym.minus.len(),
        reduced_plus: sym.reduced_plus.len(),
        reduced_minus: sym.reduced_minus.len(),
        reduced_coincide: sym.reduced_coincide(),
        classical: classical_bounds(&d, &Default::default())?,
    };
    if a.json {
        print!("{}", json(&r)?);
        return Ok(());
    }
    println!("datum {}", r.datum);
    for (n, v) in &r.norms {
        println!("  ||u||_{n:<2} = {v:.16e}");
    }
    println!("  V_* = {:.16e}  L_* = {:.16e}  Rey/R = {:.16e}", r.v_star, r.l_star, r.reynolds_factor);
    println!("  (2 pi)^(3/2) |u_k| at k = {:?}: {:.16e}", r.probe, r.probe_coefficient);
    let relation = if r.reduced_coincide { "coinciding" } else if sym.reduced_disjoint() { "disjoint" } else { "overlapping" };
    println!(
        "  symmetries {} (+) / {} (-); reduced {} (+) / {} (-), {relation}",
        r.symmetries, r.pseudo_symmetries, r.reduced_plus, r.reduced_minus
    );
    print_classical(&r.classical, &mut std::io::stdout().lock());
    Ok(())
}

fn print_classical(c: &reynolds_core::control::ClassicalBounds, w: &mut impl std::io::Write) {
    let _ = writeln!(w, "  classical H^3 bound: R < {:.16e} (Rey < {:.16e})", c.r_h3, c.re_h3);
    let _ = writeln!(w, "  classical H^1 bound: R < {:.16e} (Rey < {:.16e})", c.r_h1, c.re_h1);
}

/// Loads the cache for `args`; never expands.
fn load_cache(args: &CacheArgs) -> Result<Expansion> {
    let d = args.datum.load()?;
    let dir = args.dir(&d);
    if !dir.join("manifest.json").exists() {
        return Err(CliError::MissingInput(format!(
            "no expansion cache at {} (run `reynolds expand --datum {} --order {}` first)",
            dir.display(),
            args.datum.datum,
            args.order
        )));
    }
    Ok(Expansion::load(&dir)?)
}

fn basis(cache: &CacheArgs, est: &EstimatorArgs, extra: &[i32]) -> Result<(Expansion, EstimatorBasis)> {
    let mut exp = load_cache(cache)?;
    let with_tail = est.variant.needs_tail();
    let had_tail = exp.tail.is_some();
    let grid = est.grid().nodes()?;
    let b = EstimatorBasis::new(&mut exp, est.n, extra, with_tail, &grid, est.precision)?;
    if with_tail && !had_tail {
        // the tail is derived data: keep it for the next run
        exp.store(&cache.dir(&cache.datum.load()?))?;
    }
    Ok((exp, b))
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub cache: CacheArgs,
    #[command(flatten)]
    pub est: EstimatorArgs,

    /// Reynolds parameter
    #[arg(long)]
    pub r: f64,

    /// Output CSV (stdout otherwise)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn estimate(a: &EstimateArgs) -> Result<()> {
    let (exp, b) = basis(&a.cache, &a.est, &[])?;
    let mut cfg = RunConfig::new("estimate", &a.cache, &exp, &a.est, &SolverArgs::default())?;
    cfg.r = Some(a.r);
    let set = b.estimator_set(a.r, a.est.variant, &cfg.constants)?;
    emit(a.out.as_deref(), &set.to_csv(&cfg.provenance()))
}

#[derive(Args, Debug)]
pub struct ControlArgs {
    #[command(flatten)]
    pub cache: CacheArgs,
    #[command(flatten)]
    pub est: EstimatorArgs,
    #[command(flatten)]
    pub solver: SolverArgs,

    #[arg(long)]
    pub r: f64,

    /// Also integrate the bound at this higher Sobolev order (needs K_pn, G_pn)
    #[arg(long)]
    pub higher_order: Option<i32>,

    /// Directory for run.json, estimators.csv, trajectory.csv, verdict.json
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Serialize)]
struct VerdictOutput<'a> {
    manifest_hash: String,
    #[serde(flatten)]
    record: &'a VerdictRecord,
}

pub fn control(a: &ControlArgs) -> Result<()> {
    let extra: Vec<i32> = a.higher_order.iter().flat_map(|&p| [p, p + 1]).collect();
    let (exp, b) = basis(&a.cache, &a.est, &extra)?;
    let mut cfg = RunConfig::new("control", &a.cache, &exp, &a.est, &a.solver)?;
    cfg.r = Some(a.r);
    cfg.higher_order = a.higher_order;
    let prov = cfg.provenance();
    let set = b.estimator_set(a.r, a.est.variant, &cfg.constants)?;
    let traj = solve_control(&set, &cfg.constants, &cfg.solver)?;
    let record = traj.record(exp.order(), &a.est.variant.to_string(), &exp.datum_name, &prov);
    let verdict = json(&VerdictOutput {
        manifest_hash: cfg.hash(),
        record: &record,
    })?;
    let higher = match a.higher_order {
        Some(p) => {
            let est_p = b.higher_order_set(a.r, p, a.est.variant, &cfg.constants)?;
            let h = solve_higher_order(&est_p, &traj, &cfg.constants)?;
            let mut s = format!("# {prov}\n# R={} p={} n={}\nt,R_p,A_p\n", h.r, h.p, h.n);
            for i in 0..h.ts.len() {
                let _ = writeln!(s, "{:.16e},{:.16e},{:.16e}", h.ts[i], h.values[i], h.a[i]);
            }
            Some(s)
        }
        None => None,
    };
    match &a.out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            write_file(&dir.join("run.json"), &json(&cfg)?)?;
            write_file(&dir.join("estimators.csv"), &set.to_csv(&prov))?;
            write_file(&dir.join("trajectory.csv"), &traj.to_csv(&prov))?;
            write_file(&dir.join("verdict.json"), &verdict)?;
            if let Some(h) = &higher {
                write_file(&dir.join("higher_order.csv"), h)?;
            }
            println!("{}", describe(&record));
        }
        None => print!("{verdict}"),
    }
    Ok(())
}

fn describe(r: &VerdictRecord) -> String {
    use reynolds_core::control::Verdict;
    match &r.verdict {
        Verdict::GlobalDecay => format!("R={} N={} {}: global decay (max R_n {:.6e})", r.r, r.order, r.variant, r.max_value),
        Verdict::BlowUp { t_c, .. } => format!("R={} N={} {}: blow-up at T_c = {t_c:.6}", r.r, r.order, r.variant),
        Verdict::Inconclusive { t_end, trend } => {
            format!("R={} N={} {}: inconclusive at t = {t_end} ({trend})", r.r, r.order, r.variant)
        }
    }
}

#[derive(Args, Debug)]
pub struct CriticalArgs {
    #[command(flatten)]
    pub cache: CacheArgs,
    #[command(flatten)]
    pub est: EstimatorArgs,
    #[command(flatten)]
    pub solver: SolverArgs,

    #[arg(long)]
    pub lo: f64,

    #[arg(long)]
    pub hi: f64,

    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,

    /// Parameters probed concurrently per round
    #[arg(long, default_value_t = 3)]
    pub per_round: usize,

    /// Output JSON (stdout otherwise)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct CriticalOutput {
    manifest_hash: String,
    datum: String,
    order: usize,
    variant: String,
    bracket: (f64, f64),
    physical_bracket: (f64, f64),
    probes: Vec<reynolds_core::control::Probe>,
    config: RunConfig,
    note: &'static str,
}

pub fn critical(a: &CriticalArgs) -> Result<()> {
    let d = a.cache.datum.load()?;
    let (exp, b) = basis(&a.cache, &a.est, &[])?;
    let mut cfg = RunConfig::new("critical", &a.cache, &exp, &a.est, &a.solver)?;
    cfg.r_range = Some((a.lo, a.hi));
    cfg.tol = Some(a.tol);
    let br = find_critical_r(a.lo, a.hi, a.tol, a.per_round, |r| {
        classify(&b, r, a.est.variant, &cfg.constants, &cfg.solver)
    })?;
    let out = CriticalOutput {
        manifest_hash: cfg.hash(),
        datum: exp.datum_name.clone(),
        order: exp.order(),
        variant: a.est.variant.to_string(),
        bracket: (br.lo, br.hi),
        physical_bracket: (d.physical_reynolds(br.lo)?, d.physical_reynolds(br.hi)?),
        probes: br.probes,
        config: cfg,
        note: "numerical indication, not a proof",
    };
    emit(a.out.as_deref(), &json(&out)?)
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Output directory of a `control` run
    #[arg(long)]
    pub run_dir: PathBuf,
}

fn read_columns(path: &Path, width: usize) -> Result<Vec<Vec<f64>>> {
    let text = read_file(path)?;
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let mut cols = vec![Vec::new(); width];
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != width {
            return Err(CliError::Usage(format!("{}: expected {width} columns", path.display())));
        }
        for (c, f) in cols.iter_mut().zip(rec.iter()) {
            c.push(f.parse().map_err(|_| CliError::Usage(format!("{}: bad number {f:?}", path.display())))?);
        }
    }
    Ok(cols)
}

pub fn report(a: &ReportArgs) -> Result<()> {
    let dir = &a.run_dir;
    let cfg: RunConfig = serde_json::from_str(&read_file(&dir.join("run.json"))?)?;
    let record: VerdictRecord = serde_json::from_str(&read_file(&dir.join("verdict.json"))?)?;
    let est = read_columns(&dir.join("estimators.csv"), 4)?;
    let tr = read_columns(&dir.join("trajectory.csv"), 2)?;
    if !cfg.cache.join("manifest.json").exists() {
        return Err(CliError::MissingInput(format!("expansion cache {}", cfg.cache.display())));
    }
    let exp = Expansion::load(&cfg.cache)?;
    let d = reynolds_core::data::DatumDescriptor::new(&exp.datum_name, exp.datum.clone())?;
    let d = match reynolds_core::data::datum_by_name(&cfg.datum) {
        Ok(named) if named.field == d.field => named,
        _ => d,
    };
    let r = cfg.r.ok_or_else(|| CliError::Usage("run.json carries no R".into()))?;
    let traj = ControlTrajectory::from_samples(r, record.n, tr[0].clone(), tr[1].clone(), record.verdict.clone())?;
    let prov = cfg.provenance();

    // panel a: the probed Fourier coefficient of u^N and its error bound
    let k = d.probe;
    let scale = (2.0 * std::f64::consts::PI).powf(1.5);
    let mut gamma = format!("# {prov}\n# k={k}\nt,gamma_N,bound\n");
    let mut gamma0 = 0.0;
    for &t in est[0].iter().filter(|&&t| t <= traj.t_end()) {
        let tt = numeric::from_f64(t, cfg.precision);
        let mut acc = [(0.0f64, 0.0f64); 3];
        for (j, u) in exp.coeffs.iter().enumerate() {
            let w = r.powi(j as i32);
            for (a, c) in acc.iter_mut().zip(u.eval_coeff(&k, &tt, cfg.precision)) {
                let (re, im) = c.to_f64();
                a.0 += w * re;
                a.1 += w * im;
            }
        }
        let g = scale * acc.iter().map(|(re, im)| re * re + im * im).sum::<f64>().sqrt();
        if t == 0.0 {
            gamma0 = g;
        }
        let bound = coefficient_bound(&traj, &k, t)?;
        let _ = writeln!(gamma, "{t:.16e},{g:.16e},{bound:.16e}");
    }
    write_file(&dir.join("panel_a_gamma.csv"), &gamma)?;

    let mut growth = format!("# {prov}\nt,D_n,D_n1\n");
    let mut error = format!("# {prov}\nt,eps_n\n");
    for i in 0..est[0].len() {
        let _ = writeln!(growth, "{:.16e},{:.16e},{:.16e}", est[0][i], est[1][i], est[2][i]);
        let _ = writeln!(error, "{:.16e},{:.16e}", est[0][i], est[3][i]);
    }
    write_file(&dir.join("panel_b_growth.csv"), &growth)?;
    write_file(&dir.join("panel_c_error.csv"), &error)?;
    write_file(&dir.join("panel_d_control.csv"), &traj.to_csv(&prov))?;

    let classical = classical_bounds(&d, &cfg.constants)?;
    let mut s = Vec::new();
    {
        use std::io::Write;
        let _ = writeln!(s, "# {prov}");
        let _ = writeln!(s, "datum {} (order N = {}, {})", cfg.datum, cfg.order, cfg.variant);
        let _ = writeln!(s, "  ||u_*||_3 = {:.16e}", d.field.sobolev_norm_f64(3));
        let _ = writeln!(s, "  gamma(0) = {gamma0:.16e} at k = {k}");
        print_classical(&classical, &mut s);
        let _ = writeln!(s, "  Rey = {:.16e}", d.physical_reynolds(r)?);
        let _ = writeln!(s, "  {}", describe(&record));
        if r > classical.r_h3.max(classical.r_h1) && record.verdict.is_decay() {
            let _ = writeln!(s, "  (beyond both classical small-data bounds)");
        }
        let _ = writeln!(s, "  {}", record.note);
    }
    let summary = String::from_utf8(s).expect("utf-8");
    write_file(&dir.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}
