//! Config parsing, run manifests, and the command-line front end.
//!
//! Every run reads one TOML config, writes its data files (CSV with a header
//! row, UTF-8, LF line endings; JSON with stable key order) into the output
//! directory, and drops a `*_manifest.json` listing the exact config echo and
//! every output path. Re-running a subcommand from a manifest reproduces the
//! output files byte for byte.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::census::{
    annuli_census, betti_outside_ball, contractibility_probability, count_connected_tuples,
    count_crackle_tuples, maxima_path, palm_crosscheck, partial_sum_statistic, poisson_gof,
    replication_seed, run_replications, two_sample_ks, ExperimentConfig, FamilyName, GofReport,
};
use crate::distributions::{derive_seed, sample_cloud};
use crate::error::{Error, Result};
use crate::limits::{
    frechet_fidi, gumbel_fidi, gumbel_prefactor, integrate_h, StableSeriesSpec,
    DEFAULT_SERIES_TERMS,
};
use crate::scaling::{
    classify_regime, closed_form_r_heavy, closed_form_r_light, contractibility_radii,
    equation_residual, solve_r_heavy, solve_r_light, Regime, RnRule,
};
use crate::topology::ConstraintH;

/// Parses a config from TOML text, applying documented defaults and
/// rejecting unknown keys with the parser's line/column diagnostics.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config {
        location: "config".into(),
        message: e.to_string(),
    })?;
    config.validate()?;
    Ok(config)
}

/// Reads and validates a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config {
        location: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_config(&text).map_err(|e| match e {
        Error::Config { location, message } => Error::Config {
            location: format!("{}: {location}", path.display()),
            message,
        },
        other => other,
    })
}

/// Canonical TOML echo of a config; `parse_config(serialize_config(c))`
/// round-trips.
pub fn serialize_config(config: &ExperimentConfig) -> String {
    toml::to_string(config).expect("config serializes")
}

/// Provenance record dropped next to every run's outputs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub master_seed: u64,
    pub wall_seconds: f64,
    pub outputs: Vec<String>,
    pub config_toml: String,
}

#[derive(Parser)]
#[command(
    name = "crackle",
    version,
    about = "Simulation laboratory for isolated structures and Betti numbers of heavy- and light-tailed point clouds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample one Poisson cloud and write its points.
    Sample(RunArgs),
    /// Solve the normalizing radii R_{k,n} over the n grid.
    SolveScaling(RunArgs),
    /// Monte Carlo estimate of the constraint integral over tuples.
    IntegrateH(RunArgs),
    /// Replicated crackle-count census with Poisson goodness of fit.
    Census(RunArgs),
    /// Betti numbers outside the scaling radius with the sandwich counts.
    Betti(RunArgs),
    /// Running maxima of normalized norms over qualifying tuples.
    Maxima(RunArgs),
    /// Stable-limit partial sums against the series sampler.
    Sums(RunArgs),
    /// Isolated-component census per annulus and tuple size.
    Annuli(RunArgs),
    /// Contractibility radii and the joint coverage/emptiness event.
    Contractibility(RunArgs),
    /// Palm cross-check of the expected crackle count.
    PalmCheck(RunArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Sample(_) => "sample",
            Command::SolveScaling(_) => "solve-scaling",
            Command::IntegrateH(_) => "integrate-h",
            Command::Census(_) => "census",
            Command::Betti(_) => "betti",
            Command::Maxima(_) => "maxima",
            Command::Sums(_) => "sums",
            Command::Annuli(_) => "annuli",
            Command::Contractibility(_) => "contractibility",
            Command::PalmCheck(_) => "palm-check",
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Sample(a)
            | Command::SolveScaling(a)
            | Command::IntegrateH(a)
            | Command::Census(a)
            | Command::Betti(a)
            | Command::Maxima(a)
            | Command::Sums(a)
            | Command::Annuli(a)
            | Command::Contractibility(a)
            | Command::PalmCheck(a) => a,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Re-run from a previous manifest's config echo.
    #[arg(long, value_name = "FILE", conflicts_with = "config")]
    manifest: Option<PathBuf>,
    /// Override the config's output directory.
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
}

/// Runs the CLI and returns the process exit code: 0 on success, 2 for usage
/// errors, and the error-specific codes otherwise (a machine-readable JSON
/// record goes to stderr).
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return 2;
        }
    };
    match run_command(&cli.command) {
        Ok(()) => 0,
        Err(err) => {
            let record = serde_json::json!({
                "error": {
                    "code": err.code(),
                    "message": err.to_string(),
                }
            });
            eprintln!("{record}");
            err.code()
        }
    }
}

fn run_command(command: &Command) -> Result<()> {
    let args = command.args();
    let (config, echo) = resolve_config(args)?;
    let out_dir = args
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(&config.output.dir));
    fs::create_dir_all(&out_dir)?;
    let started = Instant::now();
    let outputs = match command {
        Command::Sample(_) => cmd_sample(&config, &out_dir)?,
        Command::SolveScaling(_) => cmd_solve_scaling(&config, &out_dir)?,
        Command::IntegrateH(_) => cmd_integrate_h(&config, &out_dir)?,
        Command::Census(_) => cmd_census(&config, &out_dir)?,
        Command::Betti(_) => cmd_betti(&config, &out_dir)?,
        Command::Maxima(_) => cmd_maxima(&config, &out_dir)?,
        Command::Sums(_) => cmd_sums(&config, &out_dir)?,
        Command::Annuli(_) => cmd_annuli(&config, &out_dir)?,
        Command::Contractibility(_) => cmd_contractibility(&config, &out_dir)?,
        Command::PalmCheck(_) => cmd_palm_check(&config, &out_dir)?,
    };
    let manifest = RunManifest {
        tool: "crackle".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.name().into(),
        master_seed: config.seed,
        wall_seconds: started.elapsed().as_secs_f64(),
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        config_toml: echo,
    };
    let manifest_path = out_dir.join(format!("{}_manifest.json", command.name().replace('-', "_")));
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;
    for path in &outputs {
        println!("wrote {}", path.display());
    }
    println!("wrote {}", manifest_path.display());
    Ok(())
}

fn resolve_config(args: &RunArgs) -> Result<(ExperimentConfig, String)> {
    if let Some(manifest_path) = &args.manifest {
        let text = fs::read_to_string(manifest_path)?;
        let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| Error::Config {
            location: manifest_path.display().to_string(),
            message: format!("not a manifest: {e}"),
        })?;
        let config = parse_config(&manifest.config_toml)?;
        let echo = serialize_config(&config);
        return Ok((config, echo));
    }
    let Some(config_path) = &args.config else {
        return Err(Error::Config {
            location: "cli".into(),
            message: "pass --config FILE or --manifest FILE".into(),
        });
    };
    let config = load_config(config_path)?;
    let echo = serialize_config(&config);
    Ok((config, echo))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

fn solve_for(config: &ExperimentConfig, k: usize, n: f64, r_n: f64) -> Result<crate::scaling::ScalingSolution> {
    let density = config.build_density()?;
    if config.is_heavy() {
        solve_r_heavy(n, k, &density, r_n)
    } else {
        solve_r_light(n, k, &density, r_n)
    }
}

fn cmd_sample(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let density = config.build_density()?;
    let n = config.n.grid[0];
    let cloud = sample_cloud(n, &density, derive_seed(config.seed, 0))?;
    let mut csv = String::from("index");
    for j in 0..config.dim {
        let _ = write!(csv, ",x{j}");
    }
    csv.push('\n');
    for i in 0..cloud.len() {
        let _ = write!(csv, "{i}");
        for v in cloud.point(i) {
            let _ = write!(csv, ",{v}");
        }
        csv.push('\n');
    }
    let path = out_dir.join("points.csv");
    write_text(&path, &csv)?;
    Ok(vec![path])
}

fn cmd_solve_scaling(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let density = config.build_density()?;
    let rule = config.rn_rule()?;
    let mut csv = String::from("n,k,dim,family,r_n,R_kn,c_kn,d_kn,closed_form,residual\n");
    let family = match config.density.family {
        FamilyName::Heavy => "heavy",
        FamilyName::Light => "light",
    };
    for &n in &config.n.grid {
        let r_n = rule.eval(n);
        let sol = if config.is_heavy() {
            solve_r_heavy(n, config.k, &density, r_n)?
        } else {
            solve_r_light(n, config.k, &density, r_n)?
        };
        let closed_form = match (config.is_heavy(), rule) {
            (true, RnRule::PowerN { s }) => Some(closed_form_r_heavy(
                n,
                config.k,
                config.dim,
                config.density.alpha.unwrap(),
                density.scale_c(),
                s,
            )),
            (true, RnRule::Constant(v)) if v == 1.0 => Some(closed_form_r_heavy(
                n,
                config.k,
                config.dim,
                config.density.alpha.unwrap(),
                density.scale_c(),
                0.0,
            )),
            (false, RnRule::Constant(v)) if v == 1.0 => Some(closed_form_r_light(
                n,
                config.k,
                config.dim,
                config.density.tau.unwrap(),
                density.scale_c(),
            )),
            _ => None,
        };
        let residual = equation_residual(n, config.k, &density, r_n, sol.r_kn)?;
        let cf = closed_form.map_or(String::new(), |v| v.to_string());
        let _ = writeln!(
            csv,
            "{n},{},{},{family},{r_n},{},{},{},{cf},{residual}",
            config.k, config.dim, sol.r_kn, sol.c_kn, sol.d_kn
        );
    }
    let path = out_dir.join("scaling.csv");
    write_text(&path, &csv)?;
    Ok(vec![path])
}

#[derive(Serialize)]
struct HIntegralReport {
    estimate: f64,
    stderr: f64,
    mc_samples: usize,
    seed: u64,
}

fn cmd_integrate_h(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let constraint = config.build_constraint()?;
    let seed = derive_seed(config.seed, 0x68);
    let (estimate, stderr) = integrate_h(&constraint, config.dim, config.mc_samples, seed)?;
    let report = HIntegralReport {
        estimate,
        stderr,
        mc_samples: config.mc_samples,
        seed,
    };
    let path = out_dir.join("h_integral.json");
    write_text(&path, &serde_json::to_string_pretty(&report)?)?;
    Ok(vec![path])
}

fn census_csv(report: &crate::census::CensusReport) -> String {
    let mut csv = String::from("replication,n,k,count,R_kn,seed\n");
    for run in &report.runs {
        for (rep, (&count, &seed)) in run.counts.iter().zip(&run.seeds).enumerate() {
            let _ = writeln!(csv, "{rep},{},{},{count},{},{seed}", run.n, report.k, run.r_kn);
        }
    }
    csv
}

fn cmd_census(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let report = run_replications(config)?;
    let csv_path = out_dir.join("census.csv");
    write_text(&csv_path, &census_csv(&report))?;
    let json_path = out_dir.join("census_report.json");
    write_text(&json_path, &serde_json::to_string_pretty(&report)?)?;
    Ok(vec![csv_path, json_path])
}

#[derive(Serialize)]
struct BettiRunReport {
    n: f64,
    r_n: f64,
    r_kn: f64,
    lambda_theory: f64,
    betti_mean: f64,
    s_hat_mean: f64,
    l_mean: f64,
    gof: GofReport,
}

fn cmd_betti(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    config.validate()?;
    if config.k < 2 {
        return Err(Error::domain("betti census needs k >= 2"));
    }
    let density = config.build_density()?;
    let constraint = config.build_constraint()?;
    let rule = config.rn_rule()?;
    let mut csv = String::from("replication,n,k,s_hat,l_corr,betti,R_kn,seed\n");
    let mut reports = Vec::new();
    let (lambda, _) = census_lambda(config)?;
    for (n_index, &n) in config.n.grid.iter().enumerate() {
        let r_n = rule.eval(n);
        let sol = solve_for(config, config.k, n, r_n)?;
        let big_r = sol.r_kn;
        let rows: Vec<(u64, u64, u64, u64)> = (0..config.replications)
            .into_par_iter()
            .map(|rep| {
                let seed = replication_seed(config.seed, n_index, rep);
                let cloud = sample_cloud(n, &density, seed)?;
                let s_hat = count_crackle_tuples(cloud.view(), &constraint, r_n, big_r)?;
                let l = count_connected_tuples(cloud.view(), config.k + 1, r_n, big_r)?;
                let betti = betti_outside_ball(cloud.view(), r_n, big_r, config.k - 2)?;
                Ok((s_hat, l, betti, seed))
            })
            .collect::<Result<_>>()?;
        let betti_counts: Vec<u64> = rows.iter().map(|r| r.2).collect();
        for (rep, &(s_hat, l, betti, seed)) in rows.iter().enumerate() {
            let _ = writeln!(
                csv,
                "{rep},{n},{},{s_hat},{l},{betti},{big_r},{seed}",
                config.k
            );
        }
        let mean = |it: &dyn Fn(&(u64, u64, u64, u64)) -> u64| {
            rows.iter().map(it).sum::<u64>() as f64 / rows.len() as f64
        };
        reports.push(BettiRunReport {
            n,
            r_n,
            r_kn: big_r,
            lambda_theory: lambda,
            betti_mean: mean(&|r| r.2),
            s_hat_mean: mean(&|r| r.0),
            l_mean: mean(&|r| r.1),
            gof: poisson_gof(&betti_counts, lambda)?,
        });
    }
    let csv_path = out_dir.join("betti.csv");
    write_text(&csv_path, &csv)?;
    let json_path = out_dir.join("betti_report.json");
    write_text(&json_path, &serde_json::to_string_pretty(&reports)?)?;
    Ok(vec![csv_path, json_path])
}

/// Theoretical Poisson mean for the configured family (shared by the census
/// and betti reports).
fn census_lambda(config: &ExperimentConfig) -> Result<(f64, f64)> {
    let density = config.build_density()?;
    let constraint = config.build_constraint()?;
    let rule = config.rn_rule()?;
    let h_seed = derive_seed(config.seed, 0x68);
    if config.is_heavy() {
        let (h_est, h_se) = integrate_h(&constraint, config.dim, config.mc_samples, h_seed)?;
        let lambda = crate::limits::nu_heavy_tail_mass(
            config.k,
            config.dim,
            config.density.alpha.unwrap(),
            h_est,
            1.0,
        )?;
        let scale = if h_est > 0.0 { lambda / h_est } else { 0.0 };
        Ok((lambda, scale * h_se))
    } else {
        let probe: Vec<f64> = [1e3, 1e4, 1e5, 1e6, 1e7]
            .into_iter()
            .chain(config.n.grid.iter().copied())
            .collect();
        match classify_regime(&density, &rule, config.k, &probe)? {
            Regime::Vanishing => Ok((0.0, 0.0)),
            Regime::NontrivialLimit(c) => crate::limits::poisson_mean_light(
                config.k,
                config.dim,
                c,
                &constraint,
                config.mc_samples,
                h_seed,
            ),
        }
    }
}

fn cmd_maxima(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let density = config.build_density()?;
    let constraint = config.build_constraint()?;
    let rule = config.rn_rule()?;
    let t_grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    let mut endpoints_csv = String::from("replication,n,k,endpoint\n");
    let mut paths_csv = String::from("x,y,series\n");
    let mut cdf_csv = String::from("x,y,series\n");
    for (n_index, &n) in config.n.grid.iter().enumerate() {
        let r_n = rule.eval(n);
        let sol = solve_for(config, config.k, n, r_n)?;
        let paths: Vec<crate::census::MaximaPath> = (0..config.replications)
            .into_par_iter()
            .map(|rep| {
                let seed = replication_seed(config.seed, n_index, rep);
                let cloud = sample_cloud(n, &density, seed)?;
                maxima_path(cloud.view(), &constraint, r_n, &sol, &t_grid)
            })
            .collect::<Result<_>>()?;
        for (rep, path) in paths.iter().enumerate() {
            let _ = writeln!(endpoints_csv, "{rep},{n},{},{}", config.k, path.endpoint());
        }
        for (rep, path) in paths.iter().take(3).enumerate() {
            for (t, v) in path.times.iter().zip(&path.values) {
                let _ = writeln!(paths_csv, "{t},{v},n{n}-rep{rep}");
            }
        }
        // empirical CDF of the endpoints against the limit law
        let mut finite: Vec<f64> = paths
            .iter()
            .map(|p| p.endpoint())
            .filter(|v| v.is_finite())
            .collect();
        finite.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        let total = paths.len() as f64;
        let limit_cdf: Box<dyn Fn(f64) -> Result<f64>> = if config.is_heavy() {
            let (h_est, _) =
                integrate_h(&constraint, config.dim, config.mc_samples, derive_seed(config.seed, 0x68))?;
            let k = config.k;
            let d = config.dim;
            let alpha = config.density.alpha.unwrap();
            Box::new(move |eta| frechet_fidi(&[1.0], &[eta], k, d, alpha, h_est))
        } else {
            let probe: Vec<f64> = [1e3, 1e4, 1e5, 1e6, 1e7].into_iter().collect();
            let c = match classify_regime(&density, &rule, config.k, &probe)? {
                Regime::NontrivialLimit(c) => c,
                Regime::Vanishing => {
                    return Err(Error::Unsupported(
                        "the maxima limit law degenerates in the vanishing regime".into(),
                    ))
                }
            };
            let (pref, _) = gumbel_prefactor(
                &constraint,
                config.dim,
                c,
                config.mc_samples,
                derive_seed(config.seed, 0x67),
            )?;
            let k = config.k;
            Box::new(move |eta| gumbel_fidi(&[1.0], &[eta], k, pref))
        };
        for (i, &eta) in finite.iter().enumerate() {
            let ecdf = (i + 1) as f64 / total;
            let _ = writeln!(cdf_csv, "{eta},{ecdf},n{n}-empirical");
            let _ = writeln!(cdf_csv, "{eta},{},n{n}-limit", limit_cdf(eta)?);
        }
    }
    let endpoints_path = out_dir.join("maxima_endpoints.csv");
    write_text(&endpoints_path, &endpoints_csv)?;
    let paths_path = out_dir.join("maxima_paths.csv");
    write_text(&paths_path, &paths_csv)?;
    let cdf_path = out_dir.join("maxima_cdf.csv");
    write_text(&cdf_path, &cdf_csv)?;
    Ok(vec![endpoints_path, paths_path, cdf_path])
}

#[derive(Serialize)]
struct SumsReport {
    n: f64,
    draws: usize,
    alpha: f64,
    c_alpha: f64,
    n_terms: usize,
    ks_distance: f64,
}

fn cmd_sums(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    config.validate()?;
    if config.dim != 1 || config.k != 2 {
        return Err(Error::Unsupported(
            "the stable partial-sum experiment needs d = 1 and k = 2".into(),
        ));
    }
    let alpha = config
        .density
        .alpha
        .ok_or_else(|| Error::domain("the stable limit needs the heavy family"))?;
    let density = config.build_density()?;
    let constraint = config.build_constraint()?;
    let rule = config.rn_rule()?;
    let n = config.n.grid[0];
    let r_n = rule.eval(n);
    let sol = solve_r_heavy(n, 2, &density, r_n)?;
    let sums: Vec<f64> = (0..config.replications)
        .into_par_iter()
        .map(|rep| {
            let seed = replication_seed(config.seed, 0, rep);
            let cloud = sample_cloud(n, &density, seed)?;
            partial_sum_statistic(cloud.view(), r_n, sol.r_kn, &constraint)
        })
        .collect::<Result<_>>()?;
    let (h_est, _) = integrate_h(
        &constraint,
        1,
        config.mc_samples,
        derive_seed(config.seed, 0x68),
    )?;
    let spec = StableSeriesSpec::new(alpha, h_est, DEFAULT_SERIES_TERMS)?;
    let series: Vec<f64> = (0..config.replications)
        .into_par_iter()
        .map(|rep| {
            crate::limits::stable_series_sample(&spec, derive_seed(config.seed ^ 0x5eed, rep as u64))
        })
        .collect();
    let mut csv = String::from("replication,n,partial_sum,stable_draw\n");
    for (rep, (a, b)) in sums.iter().zip(&series).enumerate() {
        let _ = writeln!(csv, "{rep},{n},{a},{b}");
    }
    let report = SumsReport {
        n,
        draws: config.replications,
        alpha,
        c_alpha: spec.c_alpha,
        n_terms: spec.n_terms,
        ks_distance: two_sample_ks(&sums, &series),
    };
    let csv_path = out_dir.join("sums.csv");
    write_text(&csv_path, &csv)?;
    let json_path = out_dir.join("sums_report.json");
    write_text(&json_path, &serde_json::to_string_pretty(&report)?)?;
    Ok(vec![csv_path, json_path])
}

fn cmd_annuli(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let density = config.build_density()?;
    let rule = config.rn_rule()?;
    let sizes: Vec<usize> = (2..=config.k).collect();
    if sizes.is_empty() {
        return Err(Error::domain("annuli census needs k >= 2"));
    }
    let constraints: Vec<ConstraintH> = sizes.iter().map(|&m| ConstraintH::connected(m)).collect();
    let mut csv = String::from("n,annulus_outer,annulus_inner,tuple_size,count\n");
    for (n_index, &n) in config.n.grid.iter().enumerate() {
        let r_n = rule.eval(n);
        // R_{m,n} decreases in m: outermost annulus belongs to pairs
        let radii: Vec<f64> = sizes
            .iter()
            .map(|&m| Ok(solve_for(config, m, n, r_n)?.r_kn))
            .collect::<Result<_>>()?;
        let tables: Vec<crate::census::AnnuliTable> = (0..config.replications)
            .into_par_iter()
            .map(|rep| {
                let seed = replication_seed(config.seed, n_index, rep);
                let cloud = sample_cloud(n, &density, seed)?;
                annuli_census(cloud.view(), r_n, &radii, &constraints)
            })
            .collect::<Result<_>>()?;
        for (j, &inner) in radii.iter().enumerate() {
            let outer = if j == 0 {
                "inf".to_string()
            } else {
                radii[j - 1].to_string()
            };
            for (ci, &m) in sizes.iter().enumerate() {
                let total: u64 = tables.iter().map(|t| t.counts[j][ci]).sum();
                let _ = writeln!(csv, "{n},{outer},{inner},{m},{total}");
            }
        }
    }
    let path = out_dir.join("annuli.csv");
    write_text(&path, &csv)?;
    Ok(vec![path])
}

fn cmd_contractibility(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let Some(params) = &config.contractibility else {
        return Err(Error::Config {
            location: "contractibility".into(),
            message: "this subcommand needs a [contractibility] section (delta, g)".into(),
        });
    };
    if config.density.family != FamilyName::Light {
        return Err(Error::Unsupported(
            "contractibility needs the light family (von Mises potential)".into(),
        ));
    }
    let density = config.build_density()?;
    let rule = config.rn_rule()?;
    let mut radii_csv = String::from("n,r_n,R0,R1,ratio\n");
    let mut sim_csv = String::from("n,replications,successes,probability\n");
    for (n_index, &n) in config.n.grid.iter().enumerate() {
        let r_n = rule.eval(n);
        let (r0, r1) = contractibility_radii(n, &density, r_n, params.delta, params.g)?;
        let ratio = (r1 - r0) / r_n;
        let _ = writeln!(radii_csv, "{n},{r_n},{r0},{r1},{ratio}");
        if config.dim == 1 && params.sim_replications > 0 {
            let seed = derive_seed(config.seed, n_index as u64);
            let p = contractibility_probability(
                &density,
                n,
                r_n,
                r0,
                r1,
                params.sim_replications,
                seed,
            )?;
            let successes = (p * params.sim_replications as f64).round() as u64;
            let _ = writeln!(
                sim_csv,
                "{n},{},{successes},{p}",
                params.sim_replications
            );
        }
    }
    let radii_path = out_dir.join("contractibility_radii.csv");
    write_text(&radii_path, &radii_csv)?;
    let sim_path = out_dir.join("contractibility_sim.csv");
    write_text(&sim_path, &sim_csv)?;
    Ok(vec![radii_path, sim_path])
}

fn cmd_palm_check(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let density = config.build_density()?;
    let constraint = config.build_constraint()?;
    let rule = config.rn_rule()?;
    let tuples_per_cloud = (config.mc_samples / config.replications).max(100);
    let mut csv = String::from("n,direct,direct_stderr,palm,palm_stderr,combined_stderr\n");
    let mut reports = Vec::new();
    for (n_index, &n) in config.n.grid.iter().enumerate() {
        let r_n = rule.eval(n);
        let sol = solve_for(config, config.k, n, r_n)?;
        let report = palm_crosscheck(
            &density,
            &constraint,
            n,
            r_n,
            sol.r_kn,
            config.replications,
            tuples_per_cloud,
            derive_seed(config.seed, n_index as u64),
        )?;
        let _ = writeln!(
            csv,
            "{n},{},{},{},{},{}",
            report.direct,
            report.direct_stderr,
            report.palm,
            report.palm_stderr,
            report.combined_stderr
        );
        reports.push(report);
    }
    let csv_path = out_dir.join("palm.csv");
    write_text(&csv_path, &csv)?;
    let json_path = out_dir.join("palm_report.json");
    write_text(&json_path, &serde_json::to_string_pretty(&reports)?)?;
    Ok(vec![csv_path, json_path])
}
