//! Constellation optimisation: minimise SEP subject to unit average energy and
//! a zero centroid.
//!
//! The search runs simulated annealing over single-symbol moves and then
//! refines the best annealed design with projected gradient descent using
//! central finite differences. The Monte Carlo objective uses a fixed seed
//! (common random numbers), so it is a deterministic function of the points.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::channel::ImpairmentParams;
use crate::constellation::{center_and_scale, make_qam, make_sapsk, Constellation, SapskSpec, MIN_AMPLITUDE, QAM_ORDERS};
use crate::detector::DetectorKind;
use crate::error::{Error, Result};
use crate::mc_engine::{estimate_sep, estimate_sep_at, SepEstimate};
use crate::sep_analytic::sep_union;

const PROJECTION_ROUNDS: usize = 10;
const ANNEAL_SALT: u64 = 0xA11E_A1ED_5EED_0001;
const START_SALT: u64 = 0x5747_2754_0000_0002;
const VALIDATION_SALT: u64 = 0x9E37_79B9_7F4A_7C15;
const MAX_HALVINGS: usize = 20;
const ARMIJO: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveMode {
    /// Monte Carlo SEP under a fixed seed.
    MonteCarloCrn,
    /// Closed-form union bound (PAD-D only).
    Analytic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealSchedule {
    /// `None` means 10× the starting objective.
    pub initial_temperature: Option<f64>,
    /// Geometric cooling factor in (0, 1).
    pub cooling: f64,
    pub iters_per_temperature: usize,
    /// Perturbation scale at the initial temperature; shrinks as `T/T₀`.
    pub step_size: f64,
    /// Stop once `T < min_temperature_ratio · T₀`.
    pub min_temperature_ratio: f64,
    /// Optional hard cap on candidate evaluations.
    pub max_iterations: Option<usize>,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self {
            initial_temperature: None,
            cooling: 0.95,
            iters_per_temperature: 50,
            step_size: 0.1,
            min_temperature_ratio: 1e-6,
            max_iterations: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineSettings {
    pub fd_step: f64,
    pub max_iterations: usize,
    /// Stop when the relative objective decrease, or the gradient norm, falls
    /// below this.
    pub tolerance: f64,
    /// Length of the first trial step along the normalised descent direction.
    pub initial_step: f64,
}

impl Default for RefineSettings {
    fn default() -> Self {
        Self {
            fd_step: 1e-3,
            max_iterations: 20,
            tolerance: 1e-6,
            initial_step: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeConfig {
    pub order: usize,
    pub detector: DetectorKind,
    pub sigma_g2: f64,
    pub sigma_phi2: f64,
    pub snr_db: f64,
    /// Monte Carlo trials per objective evaluation.
    pub n_eval: u64,
    pub seed: u64,
    /// Seed of the final validation run; derived from `seed` when `None`.
    pub validation_seed: Option<u64>,
    pub n_validation: u64,
    pub anneal: AnnealSchedule,
    pub refine: RefineSettings,
    pub mode: ObjectiveMode,
    /// Starting design; QAM (or best of 10 random sets) when `None`.
    pub start: Option<Constellation>,
}

impl OptimizeConfig {
    pub fn new(order: usize, detector: DetectorKind, sigma_g2: f64, sigma_phi2: f64, snr_db: f64) -> Self {
        Self {
            order,
            detector,
            sigma_g2,
            sigma_phi2,
            snr_db,
            n_eval: 100_000,
            seed: 1,
            validation_seed: None,
            n_validation: 1_000_000,
            anneal: AnnealSchedule::default(),
            refine: RefineSettings::default(),
            mode: ObjectiveMode::MonteCarloCrn,
            start: None,
        }
    }

    pub fn params(&self) -> Result<ImpairmentParams> {
        ImpairmentParams::at_snr_db(self.snr_db, self.sigma_g2, self.sigma_phi2)
    }

    pub fn validation_seed(&self) -> u64 {
        self.validation_seed.unwrap_or(self.seed ^ VALIDATION_SALT)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        let a = &self.anneal;
        if self.order < 2 {
            return bad(format!("order must be ≥ 2, got {}", self.order));
        }
        if !(a.cooling > 0.0 && a.cooling < 1.0) {
            return bad(format!("cooling factor must lie in (0, 1), got {}", a.cooling));
        }
        if let Some(t0) = a.initial_temperature {
            if !(t0 > 0.0) {
                return bad(format!("initial temperature must be positive, got {t0}"));
            }
        }
        if !(a.min_temperature_ratio > 0.0 && a.min_temperature_ratio < 1.0) {
            return bad("minimum temperature ratio must lie in (0, 1)".into());
        }
        if a.iters_per_temperature == 0 || !(a.step_size > 0.0) {
            return bad("annealing needs ≥ 1 iteration per temperature and a positive step".into());
        }
        if !(self.refine.fd_step > 0.0) || !(self.refine.initial_step > 0.0) {
            return bad("finite-difference and line-search steps must be positive".into());
        }
        if self.mode == ObjectiveMode::MonteCarloCrn && self.n_eval < 10_000 {
            return bad(format!("n_eval must be ≥ 10⁴ for the Monte Carlo objective, got {}", self.n_eval));
        }
        if self.mode == ObjectiveMode::Analytic && self.detector != DetectorKind::PadD {
            return bad("the analytic objective models the PAD-D detector only".into());
        }
        if self.validation_seed() == self.seed {
            return bad("validation seed must differ from the training seed".into());
        }
        if let Some(start) = &self.start {
            if start.order() != self.order {
                return bad(format!("start design has {} points, expected {}", start.order(), self.order));
            }
        }
        self.params()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub constellation: Constellation,
    pub objective: f64,
    /// `(iteration, best objective so far)`.
    pub history: Vec<(usize, f64)>,
    pub evaluations: usize,
}

#[derive(Debug, Clone)]
pub struct OptimizeResult {
    pub constellation: Constellation,
    pub objective_history: Vec<(usize, f64)>,
    /// Objective of the starting design.
    pub initial_objective: f64,
    /// Training (common-random-number or analytic) objective of the result.
    pub final_objective: f64,
    /// Monte Carlo SEP on streams disjoint from training.
    pub final_sep_mc: SepEstimate,
    /// Union-bound approximation, when defined for the channel.
    pub final_sep_analytic: Option<f64>,
}

/// Enforces zero centroid, unit average energy and the amplitude floor.
pub fn project_constraints(points: &[Complex64]) -> Result<Vec<Complex64>> {
    let mut x = center_and_scale(points)?;
    for _ in 0..PROJECTION_ROUNDS {
        if x.iter().all(|p| p.norm() >= MIN_AMPLITUDE) {
            return Ok(x);
        }
        for p in &mut x {
            let r = p.norm();
            if r < MIN_AMPLITUDE {
                let phase = if r > 0.0 { p.arg() } else { 0.0 };
                // slightly past the floor so re-centring keeps it outside
                *p = Complex64::from_polar(2.0 * MIN_AMPLITUDE, phase);
            }
        }
        x = center_and_scale(&x)?;
    }
    if x.iter().all(|p| p.norm() >= MIN_AMPLITUDE) {
        Ok(x)
    } else {
        Err(Error::Degenerate("amplitude floor could not be enforced"))
    }
}

fn feasible(points: &[Complex64], label: &str) -> Result<Constellation> {
    Constellation::new(project_constraints(points)?, label)
}

/// SEP of `c` under the configured channel; bit-identical on repeated calls.
pub fn objective(c: &Constellation, cfg: &OptimizeConfig) -> Result<f64> {
    let p = cfg.params()?;
    match cfg.mode {
        ObjectiveMode::MonteCarloCrn => Ok(estimate_sep(c, cfg.detector, &p, cfg.n_eval, cfg.seed)?.sep),
        ObjectiveMode::Analytic => {
            if cfg.detector != DetectorKind::PadD {
                return Err(Error::InvalidConfig(
                    "the analytic objective models the PAD-D detector only".into(),
                ));
            }
            sep_union(c, &p)
        }
    }
}

/// Simulated annealing from a feasible start; returns the best design seen.
pub fn anneal(start: &Constellation, cfg: &OptimizeConfig) -> Result<SearchOutcome> {
    let sched = &cfg.anneal;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ ANNEAL_SALT);
    let mut current = start.clone();
    let mut f_cur = objective(&current, cfg)?;
    let mut best = current.clone();
    let mut f_best = f_cur;
    let mut history = vec![(0, f_best)];
    let mut evaluations = 1;

    let t0 = sched.initial_temperature.unwrap_or(10.0 * f_cur);
    if !(t0 > 0.0) {
        // zero objective: nothing to improve
        return Ok(SearchOutcome {
            constellation: best,
            objective: f_best,
            history,
            evaluations,
        });
    }
    let t_min = sched.min_temperature_ratio * t0;
    let max_iter = sched.max_iterations.unwrap_or(usize::MAX);
    let m = current.order();
    let mut temperature = t0;
    let mut iter = 0;

    'outer: while temperature >= t_min {
        let scale = sched.step_size * (temperature / t0) * std::f64::consts::FRAC_1_SQRT_2;
        for _ in 0..sched.iters_per_temperature {
            if iter >= max_iter {
                break 'outer;
            }
            iter += 1;
            let k = rng.random_range(0..m);
            let dz = Complex64::new(
                scale * rng.sample::<f64, _>(StandardNormal),
                scale * rng.sample::<f64, _>(StandardNormal),
            );
            let u: f64 = rng.random();
            let mut moved = current.points().to_vec();
            moved[k] += dz;
            let Ok(candidate) = feasible(&moved, current.label()) else {
                continue;
            };
            let f_new = objective(&candidate, cfg)?;
            evaluations += 1;
            let delta = f_new - f_cur;
            if delta <= 0.0 || u < (-delta / temperature).exp() {
                current = candidate;
                f_cur = f_new;
                if f_cur < f_best {
                    best = current.clone();
                    f_best = f_cur;
                    history.push((iter, f_best));
                }
            }
        }
        temperature *= sched.cooling;
    }
    if history.last().map(|h| h.0) != Some(iter) {
        history.push((iter, f_best));
    }
    Ok(SearchOutcome {
        constellation: best,
        objective: f_best,
        history,
        evaluations,
    })
}

fn to_coords(points: &[Complex64]) -> Vec<f64> {
    points.iter().flat_map(|p| [p.re, p.im]).collect()
}

fn from_coords(x: &[f64]) -> Vec<Complex64> {
    x.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect()
}

/// Projected gradient descent with central finite differences and a
/// backtracking (Armijo) line search. Never returns a worse design.
pub fn refine(start: &Constellation, cfg: &OptimizeConfig) -> Result<SearchOutcome> {
    let settings = &cfg.refine;
    let label = start.label().to_string();
    let mut current = start.clone();
    let mut f_cur = objective(&current, cfg)?;
    let mut history = vec![(0, f_cur)];
    let mut evaluations = 1;

    let eval_at = |x: &[f64], evals: &mut usize| -> Result<Option<(Constellation, f64)>> {
        match feasible(&from_coords(x), &label) {
            Ok(c) => {
                *evals += 1;
                let f = objective(&c, cfg)?;
                Ok(Some((c, f)))
            }
            Err(_) => Ok(None),
        }
    };

    for it in 1..=settings.max_iterations {
        let x = to_coords(current.points());
        let h = settings.fd_step;
        let mut grad = vec![0.0; x.len()];
        for k in 0..x.len() {
            let mut xp = x.clone();
            xp[k] += h;
            let mut xm = x.clone();
            xm[k] -= h;
            if let (Some((_, fp)), Some((_, fm))) = (eval_at(&xp, &mut evaluations)?, eval_at(&xm, &mut evaluations)?) {
                grad[k] = (fp - fm) / (2.0 * h);
            }
        }
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !(gnorm > settings.tolerance) {
            break;
        }
        let mut step = settings.initial_step;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = x.iter().zip(&grad).map(|(xi, g)| xi - step * g / gnorm).collect();
            if let Some((c, f)) = eval_at(&trial, &mut evaluations)? {
                if f <= f_cur - ARMIJO * step * gnorm {
                    accepted = Some((c, f));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((c, f)) = accepted else {
            break;
        };
        let rel = (f_cur - f) / f_cur.abs().max(f64::MIN_POSITIVE);
        current = c;
        f_cur = f;
        history.push((it, f_cur));
        if rel < settings.tolerance {
            break;
        }
    }
    Ok(SearchOutcome {
        constellation: current,
        objective: f_cur,
        history,
        evaluations,
    })
}

/// The configured start, QAM when the order has one, otherwise the best of
/// ten random feasible point clouds.
pub fn initial_constellation(cfg: &OptimizeConfig) -> Result<Constellation> {
    if let Some(start) = &cfg.start {
        return Ok(start.clone());
    }
    if QAM_ORDERS.contains(&cfg.order) {
        return make_qam(cfg.order);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ START_SALT);
    let mut best: Option<(Constellation, f64)> = None;
    for k in 0..10 {
        let cloud: Vec<Complex64> = (0..cfg.order)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let Ok(c) = feasible(&cloud, &format!("random{k}")) else {
            continue;
        };
        let f = objective(&c, cfg)?;
        if best.as_ref().is_none_or(|(_, fb)| f < *fb) {
            best = Some((c, f));
        }
    }
    best.map(|(c, _)| c)
        .ok_or(Error::Degenerate("no feasible random start found"))
}

/// Annealing followed by refinement, then validation on fresh streams.
pub fn optimize(cfg: &OptimizeConfig) -> Result<OptimizeResult> {
    cfg.validate()?;
    let p = cfg.params()?;
    let start = initial_constellation(cfg)?;
    let annealed = anneal(&start, cfg)?;
    let refined = refine(&annealed.constellation, cfg)?;

    let offset = annealed.history.last().map_or(0, |h| h.0);
    let mut history = annealed.history.clone();
    history.extend(refined.history.iter().skip(1).map(|&(it, f)| (offset + it, f)));

    let label = format!("opt{}-{}", cfg.order, cfg.detector.short_name());
    let constellation = refined.constellation.with_label(label);
    let final_sep_mc = estimate_sep_at(
        &constellation,
        cfg.detector,
        &p,
        cfg.n_validation,
        cfg.validation_seed(),
        0,
    )?;
    Ok(OptimizeResult {
        final_sep_analytic: sep_union(&constellation, &p).ok(),
        initial_objective: annealed.history[0].1,
        final_objective: refined.objective,
        objective_history: history,
        final_sep_mc,
        constellation,
    })
}

/// Picks the SAPSK ring spacing with the lowest common-random-number SEP;
/// ties go to the smallest spacing.
pub fn sapsk_spacing_search(
    order: usize,
    levels: usize,
    kind: DetectorKind,
    p: &ImpairmentParams,
    grid: &[f64],
    n_eval: u64,
    seed: u64,
) -> Result<(SapskSpec, SepEstimate)> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty spacing grid".into()));
    }
    let mut best: Option<(SapskSpec, SepEstimate)> = None;
    for &rho in grid {
        let spec = SapskSpec::new(order, levels, rho)?;
        let est = estimate_sep(&make_sapsk(spec)?, kind, p, n_eval, seed)?;
        let better = match &best {
            None => true,
            Some((b, e)) => est.sep < e.sep || (est.sep == e.sep && rho < b.spacing),
        };
        if better {
            best = Some((spec, est));
        }
    }
    Ok(best.expect("grid is non-empty"))
}

/// Joint search over ring counts and spacings; infeasible ring counts are
/// skipped.
pub fn sapsk_search(
    order: usize,
    level_grid: &[usize],
    spacing_grid: &[f64],
    kind: DetectorKind,
    p: &ImpairmentParams,
    n_eval: u64,
    seed: u64,
) -> Result<(SapskSpec, SepEstimate)> {
    let mut best: Option<(SapskSpec, SepEstimate)> = None;
    for &levels in level_grid {
        if SapskSpec::new(order, levels, 1.0).is_err() {
            continue;
        }
        let (spec, est) = sapsk_spacing_search(order, levels, kind, p, spacing_grid, n_eval, seed)?;
        if best.as_ref().is_none_or(|(_, e)| est.sep < e.sep) {
            best = Some((spec, est));
        }
    }
    best.ok_or_else(|| Error::InvalidConfig("no feasible SAPSK level count in grid".into()))
}
