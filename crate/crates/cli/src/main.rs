mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use selfsim_core::config::RunConfig;
use selfsim_core::field::{FieldSpec, Level, Quantity};
use selfsim_core::fractal::{box_counting_dimension, generation};
use selfsim_core::grid::GridSpec;
use selfsim_core::params::{check_regime, hausdorff_dimension, suggest_params, RegimeReport, ScalingParams, Variant};
use selfsim_core::verify::{
    assumption_b_check, blowup_rate_fit, divergence_study, energy_norms, fd_oracle_compare, forcing_integrability, holder_quotient_g, local_energy_flatness, weak_residual,
    FdGrid, SuiteReport, TestFunction,
};
use selfsim_core::Error;

use output::{config_hash, OutDir};

/// Environment variable holding the worker thread count.
const THREADS_VAR: &str = "SELFSIM_THREADS";

#[derive(Parser)]
#[command(name = "selfsim", version, about = "Self-similar singular solutions: construction, dumps and verification")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `[output] dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Suppress tables and progress on stdout.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate every regime inequality; fails if one the variant needs does not hold.
    Regime,
    /// Write the generation point cloud and estimate its dimension.
    Fractal {
        #[arg(long, default_value_t = 5)]
        depth: u32,
    },
    /// Dump the field on a regular grid at time `t`.
    Field {
        #[arg(long)]
        t: f64,
        #[arg(long, value_parser = parse_grid, default_value = "33,33,33")]
        grid: [usize; 3],
    },
    /// Run verification suites; exit status 0 iff all pass.
    Verify {
        #[arg(long, value_enum, value_delimiter = ',', default_value = "all")]
        suite: Vec<Suite>,
    },
    /// Regime and dimension table over a parameter grid.
    Sweep {
        #[arg(long, value_delimiter = ',')]
        lambda: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        sigma: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        k: Vec<u32>,
        #[arg(long, value_delimiter = ',')]
        m: Vec<u32>,
    },
    /// Propose Cantor parameters with a target dimension.
    Suggest {
        #[arg(long)]
        dim: f64,
        #[arg(long, default_value_t = 7.0)]
        q: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Norms,
    Flatness,
    Residual,
    Forcing,
    Oracle,
    Blowup,
    #[value(name = "assumptionB")]
    AssumptionB,
    Divergence,
    Holder,
    All,
}

impl Suite {
    const EVERY: [Suite; 9] = [Suite::Norms, Suite::Flatness, Suite::Residual, Suite::Forcing, Suite::Oracle, Suite::Blowup, Suite::AssumptionB, Suite::Divergence, Suite::Holder];

    fn name(self) -> &'static str {
        match self {
            Suite::Norms => "norms",
            Suite::Flatness => "flatness",
            Suite::Residual => "residual",
            Suite::Forcing => "forcing",
            Suite::Oracle => "oracle",
            Suite::Blowup => "blowup",
            Suite::AssumptionB => "assumptionB",
            Suite::Divergence => "divergence",
            Suite::Holder => "holder",
            Suite::All => "all",
        }
    }

    /// Whether `all` includes this suite for the configured construction.
    fn applies(self, cfg: &RunConfig) -> bool {
        let axi = cfg.field.variant == Variant::Axisymmetric;
        match self {
            Suite::Norms | Suite::Forcing | Suite::Blowup => true,
            Suite::Flatness | Suite::Oracle | Suite::AssumptionB => axi,
            Suite::Residual => cfg.field.variant != Variant::Cantor3D,
            Suite::Divergence => axi && cfg.profile.zero_axial_mean,
            Suite::Holder => cfg.field.split_fraction > 0.0 && cfg.field.split != "all-in-f",
            Suite::All => false,
        }
    }
}

fn parse_grid(s: &str) -> std::result::Result<[usize; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected NX,NY,NZ, got `{s}`"));
    }
    let mut dims = [0; 3];
    for (d, p) in dims.iter_mut().zip(&parts) {
        *d = p.parse().map_err(|_| format!("`{p}` is not a positive integer"))?;
        if *d == 0 {
            return Err("grid sizes must be positive".into());
        }
    }
    Ok(dims)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let n: usize = v.trim().parse().with_context(|| format!("{THREADS_VAR} must be a positive integer, got `{v}`"))?;
        if n == 0 {
            bail!("{THREADS_VAR} must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

/// `Ok(false)` means the command ran but a checked claim failed.
fn run(cli: Cli) -> Result<bool> {
    if let Command::Suggest { dim, q } = cli.command {
        return cmd_suggest(dim, q);
    }
    let path = cli.config.as_deref().context("--config is required for this command")?;
    let cfg = RunConfig::from_file(path)?;
    let hash = config_hash(&cfg.canonical_json()?);
    let dir = cli.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    let quiet = cli.quiet;
    match cli.command {
        Command::Regime => cmd_regime(&cfg, OutDir::create(&dir, hash, "regime")?, quiet),
        Command::Fractal { depth } => cmd_fractal(&cfg, OutDir::create(&dir, hash, "fractal")?, depth, quiet),
        Command::Field { t, grid } => cmd_field(&cfg, OutDir::create(&dir, hash, "field")?, t, grid, quiet),
        Command::Verify { suite } => cmd_verify(&cfg, OutDir::create(&dir, hash, "verify")?, &suite, quiet),
        Command::Sweep { lambda, sigma, k, m } => cmd_sweep(&cfg, OutDir::create(&dir, hash, "sweep")?, SweepAxes { lambda, sigma, k, m }, quiet),
        Command::Suggest { .. } => unreachable!(),
    }
}

fn regime_json(report: &RegimeReport, variant: Variant) -> Value {
    let failed: Vec<&str> = report.failures_for(variant).iter().map(|r| r.name.as_str()).collect();
    json!({
        "variant": variant.to_string(),
        "required": RegimeReport::required_for(variant),
        "failed": failed,
        "pass": failed.is_empty(),
        "records": report.records,
    })
}

fn cmd_regime(cfg: &RunConfig, out: OutDir, quiet: bool) -> Result<bool> {
    let report = check_regime(&cfg.params)?;
    let variant = cfg.field.variant;
    let doc = regime_json(&report, variant);
    out.write_json("regime.json", &doc, json!({ "params": cfg.params }))?;
    let failed = report.failures_for(variant);
    if !quiet {
        print!("{}", report.to_table());
        println!("variant {variant}: requires {}", RegimeReport::required_for(variant).join(", "));
    }
    for r in &failed {
        eprintln!("regime: {} fails ({} = {:.6e} {} {})", r.name, r.expression, r.lhs, r.relation, r.threshold);
    }
    Ok(failed.is_empty())
}

fn cmd_fractal(cfg: &RunConfig, out: OutDir, depth: u32, quiet: bool) -> Result<bool> {
    let spec = cfg.cantor_spec()?;
    let cloud = generation(&spec, depth, cfg.output.point_cap)?;
    let dimension = hausdorff_dimension(spec.k(), spec.m())?;
    // boxes of side k^-1 .. k^-(depth-1) resolve the cloud without seeing single points
    let scales: Vec<f64> = (1..depth as i32).map(|e| (spec.k() as f64).powi(-e)).collect();
    let estimate = if scales.len() >= 3 { Some(box_counting_dimension(&cloud, &scales)?) } else { None };
    let mut csv = Vec::new();
    cloud.write_csv(&spec, &mut csv)?;
    let name = format!("cantor_depth{depth}.csv");
    out.write(
        &name,
        &csv,
        json!({
            "depth": depth, "k": spec.k(), "m": spec.m(), "cells": spec.cells_string(), "rows": cloud.len(),
            "similarity_dimension": dimension, "box_counting_dimension": estimate, "box_scales": scales,
        }),
    )?;
    if !quiet {
        println!("points: {}", cloud.len());
        println!("similarity dimension log m / log k = {dimension:.9}");
        match estimate {
            Some(d) => println!("box-counting estimate = {d:.6} (relative deviation {:.3}%)", 100.0 * (d / dimension - 1.0).abs()),
            None => println!("box-counting estimate needs depth >= 4"),
        }
    }
    Ok(true)
}

/// Box covering the first-level support, which contains every later level.
fn dump_bounds(field: &FieldSpec) -> ([f64; 3], [f64; 3]) {
    let b = field.support_box(1);
    match field.variant() {
        Variant::Axisymmetric => {
            let r = b.intervals[0].1.abs().max(b.intervals[0].0.abs());
            ([-r, -r, b.intervals[1].0], [r, r, b.intervals[1].1])
        }
        _ => ([b.intervals[0].0, b.intervals[1].0, b.intervals[2].0], [b.intervals[0].1, b.intervals[1].1, b.intervals[2].1]),
    }
}

fn cmd_field(cfg: &RunConfig, out: OutDir, t: f64, dims: [usize; 3], quiet: bool) -> Result<bool> {
    cfg.validate()?;
    let field = cfg.build_field()?;
    let level = match field.interval_index(t) {
        Ok(Level::At(n)) => json!(n),
        Ok(Level::PostT) => json!("post-T"),
        Err(Error::LevelOverflow { level, cap }) => {
            let t_max = field.time_partition().partial(cap);
            bail!("t = {t} lies in level {level}, beyond the level cap {cap}; the largest representable time is {t_max:.17e}")
        }
        Err(e) => return Err(e.into()),
    };
    let (lo, hi) = dump_bounds(&field);
    let grid = GridSpec::new(dims, lo, hi)?;
    let dump = field.sample_grid(t, grid, &[Quantity::Z, Quantity::F, Quantity::G, Quantity::GradNorm], cfg.output.grid_cap)?;
    let meta = json!({ "params": cfg.params, "variant": field.variant().to_string(), "t": t, "N": level, "grid": grid, "components": dump.components });
    let mut csv = Vec::new();
    dump.write_csv(&mut csv)?;
    out.write("field.csv", &csv, meta.clone())?;
    let mut bin = Vec::new();
    dump.write_binary(&mut bin)?;
    out.write("field.bin", &bin, meta)?;
    if field.variant() == Variant::Axisymmetric && cfg.profile.zero_axial_mean {
        let lift = cfg.build_lift()?;
        let vector = lift.sample_grid(t, grid, cfg.output.grid_cap)?;
        let meta = json!({ "params": cfg.params, "variant": field.variant().to_string(), "t": t, "N": level, "grid": grid, "components": vector.components });
        let mut csv = Vec::new();
        vector.write_csv(&mut csv)?;
        out.write("field_vector.csv", &csv, meta)?;
    }
    if !quiet {
        let peak = (0..dump.len()).map(|i| dump.value(i, 0).abs()).fold(0.0, f64::max);
        println!("t = {t}, level {level}, {} points, max |z| = {peak:.6e}", dump.len());
    }
    Ok(true)
}

fn run_suite(suite: Suite, cfg: &RunConfig, field: &FieldSpec) -> Result<SuiteReport> {
    let v = &cfg.verify;
    let q = &cfg.quadrature;
    let p = &cfg.params;
    let report = match suite {
        Suite::Norms => energy_norms(field, v.norm_levels, p.q, q)?.to_suite(),
        Suite::Flatness => {
            let x0 = match v.flatness_center.as_slice() {
                [a, b, c] => [*a, *b, *c],
                _ => [field.radial_partition().infty(), 0.0, 0.0],
            };
            local_energy_flatness(field, x0, v.flatness_levels[0]..=v.flatness_levels[1], q)?.to_suite()
        }
        Suite::Residual => weak_residual(field, &TestFunction::covering(field, v.test_radius)?, v.residual_levels, q)?.to_suite(),
        Suite::Forcing => {
            let exponent = if v.forcing_p > 0.0 { v.forcing_p } else { p.p };
            forcing_integrability(field, exponent, v.forcing_levels, q)?.to_suite()
        }
        Suite::Oracle => {
            let base = FdGrid::around(field, *v.oracle_cells.first().context("verify.oracle_cells is empty")?)?;
            let horizon = if v.oracle_horizon > 0.0 { v.oracle_horizon } else { field.time_partition().partial(2) };
            fd_oracle_compare(field, &base, horizon, &v.oracle_cells, v.oracle_cfl)?.to_suite()
        }
        Suite::Blowup => blowup_rate_fit(field, v.blowup_levels[0]..=v.blowup_levels[1])?.to_suite(),
        Suite::AssumptionB => assumption_b_check(field, v.assumption_levels, v.flatness_levels[0]..=v.flatness_levels[1], q)?.to_suite(),
        Suite::Divergence => divergence_study(&cfg.build_lift()?, v.divergence_points, v.divergence_levels, v.divergence_h0)?.to_suite(),
        Suite::Holder => {
            let times: Vec<f64> = if v.holder_times.is_empty() {
                let end = field.time_partition().partial(1);
                (0..=8).map(|i| end * i as f64 / 8.0).collect()
            } else {
                v.holder_times.clone()
            };
            holder_quotient_g(field, p.epsilon, &times, q)?.to_suite()
        }
        Suite::All => unreachable!("expanded before running"),
    };
    Ok(report)
}

fn cmd_verify(cfg: &RunConfig, out: OutDir, selected: &[Suite], quiet: bool) -> Result<bool> {
    cfg.validate()?;
    let field = cfg.build_field()?;
    let suites: Vec<Suite> = if selected.contains(&Suite::All) {
        Suite::EVERY.into_iter().filter(|s| s.applies(cfg)).collect()
    } else {
        let mut s = selected.to_vec();
        s.dedup();
        s
    };
    let mut reports = Vec::new();
    for suite in suites {
        let start = Instant::now();
        let report = run_suite(suite, cfg, &field).with_context(|| format!("suite {}", suite.name()))?;
        if !quiet {
            println!("{:<5} {:<12} {:>8.1} s  {}", if report.pass { "PASS" } else { "FAIL" }, suite.name(), start.elapsed().as_secs_f64(), report.notes.join("; "));
        }
        out.write(&format!("verify_{}.csv", suite.name()), report.to_csv().as_bytes(), json!({ "suite": suite.name(), "pass": report.pass }))?;
        reports.push(report);
    }
    let pass = reports.iter().all(|r| r.pass);
    let bundle = json!({
        "config_hash": out.hash(),
        "variant": cfg.field.variant.to_string(),
        "params": cfg.params,
        "pass": pass,
        "suites": reports,
    });
    out.write_json("verify.json", &bundle, json!({ "suites": reports.iter().map(|r| r.suite.clone()).collect::<Vec<_>>(), "pass": pass }))?;
    if !quiet {
        println!("{}", if pass { "all selected suites pass" } else { "some suites FAILED" });
    }
    Ok(pass)
}

struct SweepAxes {
    lambda: Vec<f64>,
    sigma: Vec<f64>,
    k: Vec<u32>,
    m: Vec<u32>,
}

fn cmd_sweep(cfg: &RunConfig, out: OutDir, axes: SweepAxes, quiet: bool) -> Result<bool> {
    let base = cfg.params;
    let or = |v: Vec<f64>, d: f64| if v.is_empty() { vec![d] } else { v };
    let or_u = |v: Vec<u32>, d: u32| if v.is_empty() { vec![d] } else { v };
    let (lambdas, sigmas, ks, ms) = (or(axes.lambda, base.lambda), or(axes.sigma, base.sigma), or_u(axes.k, base.k), or_u(axes.m, base.m));
    let names: Vec<String> = check_regime(&ScalingParams::new(1.5, 0.01))?.records.into_iter().map(|r| r.name).collect();
    let mut csv = format!("lambda,sigma,k,m,q,p,dimension,valid,{},variant_ok\n", names.join(","));
    let mut rows = 0;
    for &lambda in &lambdas {
        for &sigma in &sigmas {
            for &k in &ks {
                for &m in &ms {
                    let params = ScalingParams { lambda, sigma, k, m, ..base };
                    let dim = hausdorff_dimension(k, m).map(|d| format!("{d:.9}")).unwrap_or_default();
                    let row = match check_regime(&params) {
                        Ok(r) => {
                            let cells: Vec<&str> = r.records.iter().map(|x| if x.satisfied { "true" } else { "false" }).collect();
                            format!("true,{},{}", cells.join(","), r.failures_for(cfg.field.variant).is_empty())
                        }
                        Err(_) => format!("false,{},false", vec![""; names.len()].join(",")),
                    };
                    csv.push_str(&format!("{lambda},{sigma},{k},{m},{},{},{dim},{row}\n", base.q, base.p));
                    rows += 1;
                }
            }
        }
    }
    out.write("sweep.csv", csv.as_bytes(), json!({ "rows": rows, "variant": cfg.field.variant.to_string(), "lambda": lambdas, "sigma": sigmas, "k": ks, "m": ms }))?;
    if !quiet {
        print!("{csv}");
    }
    Ok(true)
}

fn cmd_suggest(dim: f64, q: f64) -> Result<bool> {
    let p = suggest_params(dim, q)?;
    let actual = hausdorff_dimension(p.k, p.m)?;
    println!("# dimension log {} / log {} = {actual:.6}", p.m, p.k);
    println!("[params]");
    println!("lambda = {}\nsigma = {}\nk = {}\nm = {}\nq = {}\np = {}\nbeta = {}\nepsilon = {}\nM = {}", p.lambda, p.sigma, p.k, p.m, p.q, p.p, p.beta, p.epsilon, p.big_m);
    println!("\n[field]\nvariant = \"cantor-3d\"");
    Ok(true)
}
