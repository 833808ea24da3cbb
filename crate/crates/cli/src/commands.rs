use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use hwdetect_core::constellation::{distinct_radii, format_constellation};
use hwdetect_core::mc_engine::format_sweep_rows;
use hwdetect_core::optimizer::{sapsk_search, AnnealSchedule, RefineSettings};
use hwdetect_core::{
    error_floor, make_qam, make_sapsk, optimize as run_optimizer, sep_union, sweep, ImpairmentParams,
    ObjectiveMode, OptimizeConfig, SapskSpec,
};
use rayon::ThreadPool;

use crate::manifest::RunManifest;
use crate::source::parse_list;
use crate::{AnalyzeArgs, GenArgs, GenType, Objective, OptimizeArgs, SearchSapskArgs, SimulateArgs};

pub fn thread_pool(threads: Option<usize>) -> Result<ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        ensure!(n > 0, "--threads must be at least 1");
        builder = builder.num_threads(n);
    }
    builder.build().context("failed to start worker threads")
}

/// Writes via a sibling temporary file so a failed run never leaves a
/// truncated output behind.
fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
        Some(path) => {
            let mut tmp = path.as_os_str().to_owned();
            tmp.push(".partial");
            let tmp = PathBuf::from(tmp);
            fs::write(&tmp, text).with_context(|| format!("cannot write {}", tmp.display()))?;
            fs::rename(&tmp, path).with_context(|| format!("cannot write {}", path.display()))?;
        }
    }
    Ok(())
}

fn channel_flags(m: RunManifest, sigma_g2: f64, sigma_phi2: f64) -> RunManifest {
    m.flag("sigma-g2", sigma_g2).flag("sigma-phi2", sigma_phi2)
}

pub fn gen(a: GenArgs) -> Result<()> {
    let mut manifest = RunManifest::new("gen")
        .flag("type", format!("{:?}", a.kind).to_lowercase())
        .flag("order", a.order);
    let c = match a.kind {
        GenType::Qam => make_qam(a.order)?,
        GenType::Sapsk => {
            let gamma = a.gamma.context("--gamma is required for SAPSK")?;
            let rho = a.rho.context("--rho is required for SAPSK")?;
            manifest = manifest.flag("gamma", gamma).flag("rho", rho);
            make_sapsk(SapskSpec::new(a.order, gamma, rho)?)?
        }
    };
    let manifest = manifest
        .note("label", c.label())
        .note("rings", distinct_radii(&c, 1e-9).len());
    write_output(a.out.as_deref(), &format_constellation(&c, &manifest.lines()))
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let c = a.constellation.load()?;
    let grid = a.snr.points();
    let manifest = RunManifest::new("simulate")
        .flag("constellation", &a.constellation)
        .flag("detector", a.detector.short_name());
    let manifest = channel_flags(manifest, a.channel.sigma_g2, a.channel.sigma_phi2)
        .flag("snr", a.snr)
        .flag("symbols", a.symbols)
        .flag("seed", a.seed)
        .note("order", c.order());
    let rows = sweep(
        &c,
        a.detector,
        a.channel.sigma_g2,
        a.channel.sigma_phi2,
        &grid,
        a.symbols,
        a.seed,
    )?;
    let text = manifest.header() + &format_sweep_rows(&rows);
    write_output(a.out.as_deref(), &text)
}

pub fn analyze(a: AnalyzeArgs) -> Result<()> {
    let c = a.constellation.load()?;
    let (g2, phi2) = (a.channel.sigma_g2, a.channel.sigma_phi2);
    let manifest = channel_flags(
        RunManifest::new("analyze").flag("constellation", &a.constellation),
        g2,
        phi2,
    );
    let mut text;
    if a.floor {
        text = manifest.switch("floor").header();
        text.push_str("# snr_db\tsep\n");
        let _ = writeln!(text, "inf\t{:e}", error_floor(&c, g2, phi2)?);
    } else {
        let grid = a.snr.expect("clap enforces --snr or --floor");
        text = manifest.flag("snr", grid).note("detector", "pad").header();
        text.push_str("# snr_db\tsep\n");
        for snr in grid.points() {
            let p = ImpairmentParams::at_snr_db(snr, g2, phi2)?;
            let _ = writeln!(text, "{snr}\t{:e}", sep_union(&c, &p)?);
        }
    }
    write_output(a.out.as_deref(), &text)
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn optimize(a: OptimizeArgs) -> Result<()> {
    let start = a.start.as_ref().map(|s| s.load()).transpose()?;
    let mut cfg = OptimizeConfig::new(a.order, a.detector, a.channel.sigma_g2, a.channel.sigma_phi2, a.snr_db);
    cfg.seed = a.seed;
    cfg.n_eval = a.n_eval;
    cfg.n_validation = a.n_validation;
    cfg.validation_seed = a.validation_seed;
    cfg.start = start;
    cfg.mode = match a.objective {
        Objective::Mc => ObjectiveMode::MonteCarloCrn,
        Objective::Analytic => ObjectiveMode::Analytic,
    };
    cfg.anneal = AnnealSchedule {
        initial_temperature: a.t0,
        cooling: a.cooling,
        iters_per_temperature: a.iters_per_temp,
        step_size: a.step,
        min_temperature_ratio: a.t_min_ratio,
        max_iterations: a.max_anneal_iters,
    };
    cfg.refine = RefineSettings {
        fd_step: a.fd_step,
        max_iterations: a.refine_iters,
        tolerance: a.tolerance,
        initial_step: a.line_step,
    };

    let mut manifest = RunManifest::new("optimize")
        .flag("order", a.order)
        .flag("detector", a.detector.short_name());
    manifest = channel_flags(manifest, a.channel.sigma_g2, a.channel.sigma_phi2)
        .flag("snr-db", a.snr_db)
        .flag("seed", a.seed)
        .flag("out-prefix", a.out_prefix.display())
        .flag("objective", format!("{:?}", a.objective).to_lowercase())
        .flag("n-eval", a.n_eval)
        .flag("n-validation", a.n_validation)
        .flag("validation-seed", cfg.validation_seed());
    if let Some(s) = &a.start {
        manifest = manifest.flag("start", s);
    }
    if let Some(t0) = a.t0 {
        manifest = manifest.flag("t0", t0);
    }
    manifest = manifest
        .flag("cooling", a.cooling)
        .flag("iters-per-temp", a.iters_per_temp)
        .flag("step", a.step)
        .flag("t-min-ratio", a.t_min_ratio);
    if let Some(n) = a.max_anneal_iters {
        manifest = manifest.flag("max-anneal-iters", n);
    }
    manifest = manifest
        .flag("fd-step", a.fd_step)
        .flag("refine-iters", a.refine_iters)
        .flag("tolerance", a.tolerance)
        .flag("line-step", a.line_step);

    let res = run_optimizer(&cfg)?;

    let mut history = manifest.header();
    history.push_str("# iter\tsep\n");
    for (it, f) in &res.objective_history {
        let _ = writeln!(history, "{it}\t{f:e}");
    }

    let v = &res.final_sep_mc;
    let mut validation = manifest.header();
    validation.push_str("# sep\tn_symbols\tn_errors\tci95\ttraining_sep\tanalytic_sep\n");
    let analytic = res.final_sep_analytic.map_or("nan".to_string(), |x| format!("{x:e}"));
    let line = format!(
        "{:e}\t{}\t{}\t{:e}\t{:e}\t{analytic}\n",
        v.sep, v.n_symbols, v.n_errors, v.ci95_halfwidth, res.final_objective
    );
    validation.push_str(&line);

    let const_text = format_constellation(&res.constellation, &manifest.lines());
    write_output(Some(&with_suffix(&a.out_prefix, ".const")), &const_text)?;
    write_output(Some(&with_suffix(&a.out_prefix, ".history.tsv")), &history)?;
    write_output(Some(&with_suffix(&a.out_prefix, ".validation.tsv")), &validation)?;
    print!("validation_sep\t{line}");
    Ok(())
}

pub fn search_sapsk(a: SearchSapskArgs) -> Result<()> {
    let gammas: Vec<usize> = parse_list(&a.gammas)?;
    let rhos: Vec<f64> = parse_list(&a.rhos)?;
    let p = ImpairmentParams::at_snr_db(a.snr_db, a.channel.sigma_g2, a.channel.sigma_phi2)?;
    let (spec, est) = sapsk_search(a.order, &gammas, &rhos, a.detector, &p, a.symbols, a.seed)?;
    let manifest = RunManifest::new("search-sapsk")
        .flag("order", a.order)
        .flag("detector", a.detector.short_name());
    let manifest = channel_flags(manifest, a.channel.sigma_g2, a.channel.sigma_phi2)
        .flag("snr-db", a.snr_db)
        .flag("gammas", &a.gammas)
        .flag("rhos", &a.rhos)
        .flag("symbols", a.symbols)
        .flag("seed", a.seed)
        .note("best", format!("sapsk:{}:{}:{}", spec.order, spec.levels, spec.spacing))
        .note("best_sep", format!("{:e}", est.sep));
    let c = make_sapsk(spec)?;
    write_output(a.out.as_deref(), &format_constellation(&c, &manifest.lines()))
}
