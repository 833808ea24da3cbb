//! Acceptance gate. Each test checks one requirement at its stated tolerance
//! and runtime budget and writes a single `PASS`/`FAIL` line to stderr (not
//! captured by the test harness, so the lines show up in every run).
//!
//! Tests hold a shared lock so that wall-clock budgets are measured without
//! competing work from sibling tests.

use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::process::Command;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use hwdetect_core::channel::{RandomStream, StreamFactory};
use hwdetect_core::mc_engine::estimate_sep_at;
use hwdetect_core::optimizer::{AnnealSchedule, RefineSettings};
use hwdetect_core::specialfn::{delta_from_skewness, normal_cdf};
use hwdetect_core::{
    detect, estimate_sep, make_qam, optimize, owen_t, pairwise_coeffs, q_function, sep_union,
    sweep, Complex64, Constellation, DetectorKind, ImpairmentParams, OptimizeConfig,
    OptimizeResult, SkewNormalParams,
};
use rand::Rng;
use rand_distr::StandardNormal;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(name: &str, pass: bool, elapsed: Duration, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "[acceptance] {verdict} {name} ({:.1} s): {detail}", elapsed.as_secs_f64());
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

#[test]
fn owen_t_identities() {
    let _guard = serial();
    let start = Instant::now();
    let hs = linspace(-8.0, 8.0, 40);
    let as_ = linspace(-20.0, 20.0, 40);
    let mut worst = 0.0f64;
    for &h in &hs {
        worst = worst.max(owen_t(h, 0.0).abs());
        let phi = normal_cdf(h);
        worst = worst.max((owen_t(h, 1.0) - 0.5 * phi * (1.0 - phi)).abs());
        for &a in &as_ {
            worst = worst.max((owen_t(h, -a) + owen_t(h, a)).abs());
        }
    }
    for &a in &as_ {
        worst = worst.max((owen_t(0.0, a) - a.atan() / std::f64::consts::TAU).abs());
    }
    let elapsed = start.elapsed();
    let pass = worst <= 1e-12 && elapsed < Duration::from_secs(1);
    report("owen_t_identities", pass, elapsed, &format!("max abs error {worst:.3e} over a 40x40 grid (limit 1e-12, 1 s)"));
    assert!(pass);
}

/// Composite Simpson integral of the skew-normal density from far in the
/// left tail up to `x`.
fn sn_cdf_by_quadrature(sn: &SkewNormalParams, x: f64) -> f64 {
    let lo = sn.location - 40.0 * sn.scale;
    if x <= lo {
        return 0.0;
    }
    let n = 200_000;
    let h = (x - lo) / n as f64;
    let pdf = |t: f64| {
        let z = (t - sn.location) / sn.scale;
        let phi = (-0.5 * z * z).exp() / (std::f64::consts::TAU).sqrt();
        2.0 / sn.scale * phi * normal_cdf(sn.shape * z)
    };
    let mut s = pdf(lo) + pdf(x);
    for k in 1..n {
        s += pdf(lo + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn skew_normal_round_trip() {
    let _guard = serial();
    let start = Instant::now();
    let mut rng = RandomStream::new(20_240_601, 0).rng();
    let mut worst_gamma = 0.0f64;
    for _ in 0..1000 {
        let g = rng.random_range(-0.99..=0.99);
        let sn = SkewNormalParams::from_delta(0.0, 1.0, delta_from_skewness(g)).unwrap();
        worst_gamma = worst_gamma.max((sn.moments().skewness - g).abs());
    }
    let mut worst_cdf = 0.0f64;
    for _ in 0..100 {
        let sn = SkewNormalParams::new(
            rng.random_range(-3.0..3.0),
            rng.random_range(0.2..3.0),
            rng.random_range(-12.0..12.0),
        )
        .unwrap();
        let x = sn.location + sn.scale * rng.random_range(-4.0..4.0);
        worst_cdf = worst_cdf.max((sn.cdf(x) - sn_cdf_by_quadrature(&sn, x)).abs());
    }
    let elapsed = start.elapsed();
    let pass = worst_gamma <= 1e-9 && worst_cdf <= 1e-10 && elapsed < Duration::from_secs(10);
    report(
        "skew_normal_round_trip",
        pass,
        elapsed,
        &format!("max skewness error {worst_gamma:.3e} (limit 1e-9), max cdf error {worst_cdf:.3e} (limit 1e-10)"),
    );
    assert!(pass);
}

#[test]
fn pad_equals_gap_without_gain_noise() {
    let _guard = serial();
    let start = Instant::now();
    let qam = make_qam(64).unwrap();
    let mut rng = RandomStream::new(77, 0).rng();
    let n = 100_000;
    let mut agree = 0;
    for t in 0..n {
        let p = ImpairmentParams::new(
            10f64.powf(rng.random_range(-6.0..0.0)),
            0.0,
            10f64.powf(rng.random_range(-6.0..-1.0)),
        )
        .unwrap();
        let r = if t % 2 == 0 {
            Complex64::new(rng.random_range(-1.6..1.6), rng.random_range(-1.6..1.6))
        } else {
            let s = qam.points()[t % 64];
            let draw = hwdetect_core::channel::ChannelDraw::sample(&p, &mut rng);
            draw.apply(s)
        };
        if detect(r, &qam, DetectorKind::PadD, &p).unwrap() == detect(r, &qam, DetectorKind::GapD, &p).unwrap() {
            agree += 1;
        }
    }
    let elapsed = start.elapsed();
    let pass = agree == n && elapsed < Duration::from_secs(5);
    report("pad_equals_gap_without_gain_noise", pass, elapsed, &format!("{agree}/{n} argmins agree (need all)"));
    assert!(pass);
}

struct BatchStats {
    mean: f64,
    var: f64,
    skew: f64,
}

/// Raw power sums about `shift`, turned into mean, variance and skewness.
fn stats_from_sums(s1: f64, s2: f64, s3: f64, n: f64, shift: f64) -> BatchStats {
    let m1 = s1 / n;
    let m2 = s2 / n - m1 * m1;
    let m3 = s3 / n - 3.0 * m1 * (s2 / n) + 2.0 * m1.powi(3);
    BatchStats {
        mean: shift + m1,
        var: m2 * n / (n - 1.0),
        skew: m3 / m2.powf(1.5),
    }
}

fn std_error(values: &[f64]) -> f64 {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt()
}

#[test]
fn pairwise_moment_fidelity() {
    let _guard = serial();
    let start = Instant::now();
    let qam = make_qam(16).unwrap();
    let p = ImpairmentParams::new(1e-4, 1e-3, 1e-4).unwrap();
    let mut pick = RandomStream::new(4_242, 0).rng();
    let streams = StreamFactory::new(4_243);
    const BATCHES: usize = 100;
    const PER_BATCH: usize = 100_000;
    let mut failures = Vec::new();
    let mut worst_z = 0.0f64;
    for pair in 0..50u64 {
        let i = pick.random_range(0..16);
        let j = (i + pick.random_range(1..16)) % 16;
        let st = pairwise_coeffs(&qam, i, j, &p).unwrap();
        let (sa, sp) = (st.var_amp.sqrt(), st.var_phase.sqrt());
        let mut rng = streams.stream(pair);
        let (mut t1, mut t2, mut t3) = (0.0, 0.0, 0.0);
        let mut batch = Vec::with_capacity(BATCHES);
        for _ in 0..BATCHES {
            let (mut b1, mut b2, mut b3) = (0.0, 0.0, 0.0);
            for _ in 0..PER_BATCH {
                let w = sa * rng.sample::<f64, _>(StandardNormal);
                let psi = sp * rng.sample::<f64, _>(StandardNormal);
                // centred on the predicted mean to keep the power sums well conditioned
                let x = st.a0 * w * w + 2.0 * st.a1 * w + 2.0 * st.a3 * psi + st.a4 - st.mu;
                b1 += x;
                b2 += x * x;
                b3 += x * x * x;
            }
            batch.push(stats_from_sums(b1, b2, b3, PER_BATCH as f64, st.mu));
            t1 += b1;
            t2 += b2;
            t3 += b3;
        }
        let all = stats_from_sums(t1, t2, t3, (BATCHES * PER_BATCH) as f64, st.mu);
        let checks = [
            ("mean", all.mean, st.mu, std_error(&batch.iter().map(|b| b.mean).collect::<Vec<_>>())),
            ("variance", all.var, st.sigma * st.sigma, std_error(&batch.iter().map(|b| b.var).collect::<Vec<_>>())),
            ("skewness", all.skew, st.gamma1, std_error(&batch.iter().map(|b| b.skew).collect::<Vec<_>>())),
        ];
        for (what, got, want, se) in checks {
            let z = (got - want).abs() / se;
            worst_z = worst_z.max(z);
            if !(z <= 3.0) {
                failures.push(format!("pair ({i},{j}) {what}: {got:.6e} vs {want:.6e} ({z:.2} SE)"));
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && elapsed < Duration::from_secs(120);
    report(
        "pairwise_moment_fidelity",
        pass,
        elapsed,
        &format!("50 pairs x 1e7 samples, worst deviation {worst_z:.2} SE (limit 3); {}", if failures.is_empty() { "no misses".to_string() } else { failures.join("; ") }),
    );
    assert!(pass);
}

#[test]
fn union_bound_tightness() {
    let _guard = serial();
    let start = Instant::now();
    let grid: Vec<f64> = (1..=8).map(|k| 10.0 * k as f64).collect();
    let mut misses = Vec::new();
    let mut worst_ratio = 1.0f64;
    for order in [128, 256] {
        let qam = make_qam(order).unwrap();
        for (g2, phi2) in [(1e-4, 1e-3), (1e-3, 1e-4)] {
            let rows = sweep(&qam, DetectorKind::PadD, g2, phi2, &grid, 10_000_000, 2_025).unwrap();
            for (snr, mc) in rows {
                let analytic = sep_union(&qam, &ImpairmentParams::at_snr_db(snr, g2, phi2).unwrap()).unwrap();
                let ratio = analytic / mc.sep;
                let ok = if snr >= 40.0 {
                    if mc.sep < 1e-5 {
                        continue;
                    }
                    worst_ratio = if (ratio.ln()).abs() > worst_ratio.ln().abs() { ratio } else { worst_ratio };
                    (0.5..=2.0).contains(&ratio)
                } else {
                    ratio >= 0.5
                };
                if !ok {
                    misses.push(format!("{order}-QAM ({g2:e},{phi2:e}) {snr} dB: analytic {analytic:.3e}, MC {:.3e}", mc.sep));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = misses.is_empty() && elapsed < Duration::from_secs(30 * 60);
    report(
        "union_bound_tightness",
        pass,
        elapsed,
        &format!("worst high-SNR analytic/MC ratio {worst_ratio:.3} (band 0.5..2); {}", if misses.is_empty() { "no misses".into() } else { misses.join("; ") }),
    );
    assert!(pass);
}

#[test]
fn error_floor_ordering() {
    let _guard = serial();
    let start = Instant::now();
    let qam = make_qam(256).unwrap();
    let p = ImpairmentParams::at_snr_db(70.0, 1e-3, 1e-4).unwrap();
    let sep = |kind| estimate_sep(&qam, kind, &p, 10_000_000, 31).unwrap().sep;
    let (euc, gap, pad) = (sep(DetectorKind::EucD), sep(DetectorKind::GapD), sep(DetectorKind::PadD));
    let gain = euc.min(gap) / pad;
    let elapsed = start.elapsed();
    let pass = pad < euc && pad < gap && gain >= 3.0 && elapsed < Duration::from_secs(600);
    report(
        "error_floor_ordering",
        pass,
        elapsed,
        &format!("EUC {euc:.3e}, GAP {gap:.3e}, PAD {pad:.3e}; min(EUC,GAP)/PAD = {gain:.2} (need >= 3)"),
    );
    assert!(pass);
}

#[test]
fn gap_detector_rises_at_high_snr() {
    let _guard = serial();
    let start = Instant::now();
    let qam = make_qam(256).unwrap();
    let grid = [30.0, 40.0, 50.0, 60.0, 80.0];
    let rows = sweep(&qam, DetectorKind::GapD, 1e-3, 1e-4, &grid, 10_000_000, 47).unwrap();
    let min_mid = rows[..4].iter().map(|r| r.1.sep).fold(f64::INFINITY, f64::min);
    let at80 = rows[4].1.sep;
    let elapsed = start.elapsed();
    let pass = at80 >= 1.5 * min_mid && elapsed < Duration::from_secs(600);
    report(
        "gap_detector_rises_at_high_snr",
        pass,
        elapsed,
        &format!("SEP(80 dB) = {at80:.3e}, min over 30..60 dB = {min_mid:.3e}, ratio {:.2} (need >= 1.5)", at80 / min_mid),
    );
    assert!(pass);
}

#[test]
fn monte_carlo_calibration() {
    let _guard = serial();
    let start = Instant::now();
    let bpsk = Constellation::new(vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)], "bpsk").unwrap();
    let p = ImpairmentParams::at_snr_db(4.0, 0.0, 0.0).unwrap();
    let exact = q_function((2.0 / p.sigma_n2).sqrt());
    let est = estimate_sep(&bpsk, DetectorKind::EucD, &p, 1_000_000, 8).unwrap();
    let z = (est.sep - exact).abs() / (exact * (1.0 - exact) / 1e6).sqrt();
    let covered = (0..100u64)
        .filter(|&seed| {
            let e = estimate_sep_at(&bpsk, DetectorKind::EucD, &p, 200_000, 1_000 + seed, 0).unwrap();
            (e.sep - exact).abs() <= e.ci95_halfwidth
        })
        .count();
    let elapsed = start.elapsed();
    let pass = z <= 3.0 && covered >= 90 && elapsed < Duration::from_secs(120);
    report(
        "monte_carlo_calibration",
        pass,
        elapsed,
        &format!("SEP {:.4e} vs Q = {exact:.4e} ({z:.2} SE, limit 3); CI coverage {covered}/100 (need >= 90)", est.sep),
    );
    assert!(pass);
}

fn feasibility_error(c: &Constellation) -> Option<String> {
    let energy_err = (c.energy() - 1.0).abs();
    let centroid = c.centroid().norm();
    if energy_err > 1e-9 || centroid > 1e-9 || c.min_amplitude() < hwdetect_core::constellation::MIN_AMPLITUDE {
        Some(format!("{}: energy error {energy_err:.2e}, centroid {centroid:.2e}, min |s| {:.2e}", c.label(), c.min_amplitude()))
    } else {
        None
    }
}

fn desk_config(order: usize, kind: DetectorKind, g2: f64, phi2: f64, snr: f64) -> OptimizeConfig {
    let mut cfg = OptimizeConfig::new(order, kind, g2, phi2, snr);
    cfg.seed = 101;
    cfg.n_eval = 100_000;
    cfg.n_validation = 1_000_000;
    cfg.anneal = AnnealSchedule {
        iters_per_temperature: if order > 64 { 10 } else { 20 },
        min_temperature_ratio: if order > 64 { 1e-2 } else { 1e-3 },
        ..AnnealSchedule::default()
    };
    cfg.refine = RefineSettings {
        max_iterations: if order > 64 { 1 } else { 2 },
        ..RefineSettings::default()
    };
    cfg
}

#[test]
fn optimizer_soundness() {
    let _guard = serial();
    let start = Instant::now();
    let mut notes = Vec::new();
    let mut pass = true;

    let cfg = desk_config(64, DetectorKind::PadD, 1e-2, 1e-3, 30.0);
    let res = optimize(&cfg).unwrap();
    let baseline = estimate_sep_at(&make_qam(64).unwrap(), cfg.detector, &cfg.params().unwrap(), cfg.n_validation, cfg.validation_seed(), 0).unwrap();
    let mut outputs: Vec<OptimizeResult> = vec![res.clone()];
    let b_ok = res.final_sep_mc.sep <= baseline.sep;
    pass &= b_ok;
    notes.push(format!("64-point PAD-D at 30 dB: optimized {:.3e} vs 64-QAM {:.3e}", res.final_sep_mc.sep, baseline.sep));

    let mut validated = Vec::new();
    for kind in DetectorKind::ALL {
        let res = optimize(&desk_config(256, kind, 1e-4, 1e-3, 40.0)).unwrap();
        validated.push((kind, res.final_sep_mc.sep));
        outputs.push(res);
    }
    let pad = validated[2].1;
    let c_ok = pad <= validated[0].1 && pad <= validated[1].1;
    pass &= c_ok;
    notes.push(format!(
        "256-point at 40 dB: EUC-opt {:.3e}, GAP-opt {:.3e}, PAD-opt {pad:.3e}",
        validated[0].1, validated[1].1
    ));

    let infeasible: Vec<String> = outputs.iter().filter_map(|r| feasibility_error(&r.constellation)).collect();
    pass &= infeasible.is_empty();
    if !infeasible.is_empty() {
        notes.push(format!("infeasible: {}", infeasible.join("; ")));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(3600);
    report("optimizer_soundness", pass, elapsed, &notes.join("; "));
    assert!(pass);
}

/// Runs the binary in `dir` with the thread count set through the
/// environment (`env`) and/or the flag (`flag`, which takes precedence).
fn hwdetect(args: &[&str], dir: &Path, env: Option<&str>, flag: Option<&str>) -> std::process::Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hwdetect"));
    cmd.current_dir(dir).env_remove("HWDETECT_THREADS");
    if let Some(t) = env {
        cmd.env("HWDETECT_THREADS", t);
    }
    if let Some(t) = flag {
        cmd.args(["--threads", t]);
    }
    let out = cmd.args(args).output().expect("binary runs");
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

const THREAD_VARIANTS: [(Option<&str>, Option<&str>); 3] = [(None, None), (Some("1"), None), (Some("1"), Some("3"))];

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn cli_determinism() {
    let _guard = serial();
    let start = Instant::now();
    let runs: Vec<Vec<&str>> = vec![
        vec!["gen", "--type", "qam", "--order", "32"],
        vec!["gen", "--type", "sapsk", "--order", "64", "--gamma", "4", "--rho", "0.8"],
        vec!["simulate", "-c", "qam:64", "-d", "pad", "--sigma-g2", "1e-3", "--sigma-phi2", "1e-4", "--snr", "10:10:60", "--symbols", "200000", "--seed", "9"],
        vec!["simulate", "-c", "sapsk:16:2:1", "-d", "gap", "--sigma-phi2", "1e-3", "--snr", "5:5:30", "--symbols", "100000"],
        vec!["analyze", "-c", "qam:128", "--sigma-g2", "1e-4", "--sigma-phi2", "1e-3", "--snr", "10:10:80"],
        vec!["analyze", "-c", "qam:256", "--sigma-g2", "1e-3", "--sigma-phi2", "1e-4", "--floor"],
        vec!["search-sapsk", "--order", "16", "-d", "pad", "--sigma-g2", "1e-3", "--sigma-phi2", "1e-3", "--snr-db", "25", "--gammas", "1,2,3", "--rhos", "0.5,1,1.5", "--symbols", "20000"],
    ];
    let scratch = tempfile::tempdir().unwrap();
    let mut mismatches = Vec::new();
    for args in &runs {
        let outputs: Vec<Vec<u8>> = THREAD_VARIANTS
            .iter()
            .map(|&(env, flag)| hwdetect(args, scratch.path(), env, flag).stdout)
            .collect();
        if outputs.windows(2).any(|w| w[0] != w[1]) {
            mismatches.push(args.join(" "));
        }
    }
    let optimize_args = [
        "optimize", "--order", "16", "-d", "pad", "--sigma-g2", "1e-3", "--sigma-phi2", "1e-3",
        "--snr-db", "20", "--seed", "5", "--n-eval", "10000", "--n-validation", "20000",
        "--iters-per-temp", "5", "--t-min-ratio", "0.1", "--refine-iters", "1", "--out-prefix", "opt16",
    ];
    let snapshots: Vec<_> = THREAD_VARIANTS
        .iter()
        .map(|&(env, flag)| {
            let dir = tempfile::tempdir().unwrap();
            let stdout = hwdetect(&optimize_args, dir.path(), env, flag).stdout;
            (stdout, snapshot(dir.path()))
        })
        .collect();
    if snapshots.windows(2).any(|w| w[0] != w[1]) || snapshots[0].1.len() != 3 {
        mismatches.push("optimize".into());
    }
    let elapsed = start.elapsed();
    let pass = mismatches.is_empty() && elapsed < Duration::from_secs(300);
    report(
        "cli_determinism",
        pass,
        elapsed,
        &format!("{} commands rerun under 1/2/3 threads; mismatches: {}", runs.len() + 1, if mismatches.is_empty() { "none".into() } else { mismatches.join(", ") }),
    );
    assert!(pass);
}
