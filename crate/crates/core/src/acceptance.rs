//! The ten acceptance measurements, each reduced to named checks against fixed bounds.

use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::config::Signal;
use crate::error::Result;
use crate::feedback::{closed_loop, ControllerKind};
use crate::functionals::{
    random_history, random_signal, IdeSystem, Kernel, LinearScalarDistributed, HISTORY_SHAPES,
};
use crate::hyperbolic::{l_mu_distance, HyperbolicSystem};
use crate::ide_core::{solve, SolveConfig, Trajectory};
use crate::rng::{streams, Stream};
use crate::sampled::{euclid, Grid, SampledFn};
use crate::stability::{check_razumikhin, lyapunov_v, Gain, IssCertificate};

pub const CRITERIA: [(usize, &str); 10] = [
    (1, "PDE/IDE equivalence against the upwind oracle"),
    (2, "stationary profiles at the critical gain"),
    (3, "decay below the critical gain"),
    (4, "Razumikhin certificate"),
    (5, "finite-time stabilization"),
    (6, "controller equivalence"),
    (7, "ISS under constant actuator error"),
    (8, "IDE solver against the closed-form solution"),
    (9, "Lipschitz dependence envelope"),
    (10, "L1 continuity for discontinuous data"),
];

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, hi: f64) -> Check {
        Check {
            name: name.into(),
            value,
            lo: None,
            hi: Some(hi),
            passed: value <= hi,
        }
    }

    pub fn between(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Check {
        Check {
            name: name.into(),
            value,
            lo: Some(lo),
            hi: Some(hi),
            passed: value >= lo && value <= hi,
        }
    }

    /// A count that must be zero.
    pub fn none(name: impl Into<String>, count: usize) -> Check {
        Check::at_most(name, count as f64, 0.0)
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = if self.passed { "" } else { " (FAIL)" };
        match (self.lo, self.hi) {
            (Some(lo), Some(hi)) => write!(f, "{} = {:.4e} in [{lo}, {hi}]{mark}", self.name, self.value),
            (None, Some(hi)) => write!(f, "{} = {:.4e} <= {hi:e}{mark}", self.name, self.value),
            _ => write!(f, "{} = {:.4e}{mark}", self.name, self.value),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionReport {
    pub criterion: usize,
    pub title: String,
    pub passed: bool,
    pub seconds: f64,
    pub checks: Vec<Check>,
}

impl CriterionReport {
    fn new(criterion: usize, checks: Vec<Check>, start: Instant) -> CriterionReport {
        CriterionReport {
            criterion,
            title: CRITERIA[criterion - 1].1.to_string(),
            passed: checks.iter().all(|c| c.passed),
            seconds: start.elapsed().as_secs_f64(),
            checks,
        }
    }

    /// One line: `criterion N: PASS|FAIL title | check; check; ...`.
    pub fn line(&self) -> String {
        let checks: Vec<String> = self.checks.iter().map(|c| c.to_string()).collect();
        format!(
            "criterion {}: {} {} ({:.2} s) | {}",
            self.criterion,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.seconds,
            checks.join("; ")
        )
    }
}

/// Runs criterion `n` (1 to 10).
pub fn run(n: usize, seed: u64) -> Result<CriterionReport> {
    match n {
        1 => criterion_1(seed),
        2 => criterion_2(),
        3 => criterion_3(seed),
        4 => criterion_4(seed),
        5 => criteria_5_6(seed, 5),
        6 => criteria_5_6(seed, 6),
        7 => criterion_7(seed),
        8 => criterion_8(seed),
        9 => criterion_9(seed),
        10 => criterion_10(),
        _ => Err(crate::Error::Validation(vec![format!("no acceptance criterion {n}")])),
    }
}

pub fn run_all(seed: u64) -> Result<Vec<CriterionReport>> {
    (1..=10).map(|n| run(n, seed)).collect()
}

fn pde_input(sys: &HyperbolicSystem, cells: usize, horizon: f64, signals: &[Signal], seed: u64) -> Result<SampledFn> {
    let h = sys.time_step(cells);
    let steps = (horizon / h).round() as usize;
    let grid = Grid::new(-sys.delay(), h, cells + steps)?;
    crate::config::Channels::Many(signals.to_vec()).sample(grid, sys.inputs.dim().max(1), seed, streams::DISTURBANCE)
}

fn profile(signal: &Signal, cells: usize, seed: u64) -> Result<SampledFn> {
    let grid = HyperbolicSystem::profile_grid(cells);
    SampledFn::new(grid, 1, signal.sample(&grid, seed, streams::INITIAL)?)
}

/// Equivalence on the recirculation plant and the integral-feedback system, K = 256 and 512.
pub fn criterion_1(seed: u64) -> Result<CriterionReport> {
    let start = Instant::now();
    let horizon = 5.0;
    let x0_signal = Signal::Smooth {
        amplitude: 1.0,
        modes: 6,
        stream: 0,
    };
    let cases: [(&str, HyperbolicSystem, Vec<Signal>); 2] = [
        ("recirculation", HyperbolicSystem::recirculation(1.0), vec![Signal::default()]),
        (
            "integral_feedback",
            HyperbolicSystem::integral_feedback(1.0),
            vec![Signal::Random {
                amplitude: 1.0,
                piece: 1.0 / 16.0,
                stream: 0,
            }],
        ),
    ];
    let mut checks = Vec::new();
    for (name, sys, signals) in cases {
        let t0 = Instant::now();
        let sys = Arc::new(sys);
        let mut d = [0.0; 2];
        for (i, cells) in [256usize, 512].into_iter().enumerate() {
            let x0 = profile(&x0_signal, cells, seed)?;
            let w = pde_input(&sys, cells, horizon, &signals, seed)?;
            d[i] = sys.equivalence_discrepancy(&x0, &w, &SolveConfig::with_horizon(horizon))?;
        }
        checks.push(Check::at_most(format!("{name}_discrepancy_K256"), d[0], 0.02));
        checks.push(Check::between(format!("{name}_ratio"), d[0] / d[1], 1.7, 2.3));
        checks.push(Check::at_most(format!("{name}_seconds"), t0.elapsed().as_secs_f64(), 10.0));
    }
    Ok(CriterionReport::new(1, checks, start))
}

/// `x0(z) = z` stays put at `g = 2`, `d ≡ 1`.
pub fn criterion_2() -> Result<CriterionReport> {
    let start = Instant::now();
    let (cells, horizon) = (256usize, 10.0);
    let sys = Arc::new(HyperbolicSystem::integral_feedback(2.0));
    let x0 = profile(&Signal::Ramp { slope: 1.0, offset: 0.0 }, cells, 0)?;
    let w = pde_input(&sys, cells, horizon, &[Signal::Constant { value: 1.0 }], 0)?;
    let traj = solve(&sys.to_ide()?, &sys.initial_v(&x0)?.combined(), &w, &SolveConfig::with_horizon(horizon))?;
    let mut worst: f64 = 0.0;
    for k in 0..=traj.steps() {
        let prof = sys.reconstruct(&traj, &x0, k as f64 * traj.step)?;
        worst = worst.max(prof.max_abs_diff(&x0)?);
    }
    let checks = vec![
        Check::at_most("steps_short_of_horizon", (10 * cells - traj.steps()) as f64, 0.0),
        Check::at_most("sup_deviation_from_z", worst, 1e-8),
    ];
    Ok(CriterionReport::new(2, checks, start))
}

/// Random disturbances and unit initial profiles at `g = 1.5`: decay by `T = 40` and
/// monotone `V` for `W = |p| + 5|v|`, `λ = 0.95`, sampled every `h*`.
pub fn criterion_3(seed: u64) -> Result<CriterionReport> {
    let start = Instant::now();
    let (cells, horizon, trials) = (64usize, 40.0, 20usize);
    let sys = Arc::new(HyperbolicSystem::integral_feedback(1.5));
    let ide = sys.to_ide()?;
    let cert = IssCertificate::new(vec![1.0, 5.0], 0.95, Gain::Zero, None, ide.r)?;
    let h = sys.time_step(cells);
    let stride = ((cert.h_star(ide.r) / h) * (1.0 + 1e-12)).floor() as usize;
    let zg = HyperbolicSystem::profile_grid(cells);
    let wg = Grid::new(-sys.delay(), h, cells + (horizon / h).round() as usize)?;
    let (mut final_sup, mut rise): (f64, f64) = (0.0, f64::NEG_INFINITY);
    let mut violations = 0;
    for trial in 0..trials as u64 {
        let mut rng = Stream::new(seed, streams::trial(streams::INITIAL, trial));
        let x0 = random_history(&mut rng, zg, 1, 1.0, HISTORY_SHAPES[trial as usize % 4]);
        let mut drng = Stream::new(seed, streams::trial(streams::DISTURBANCE, trial));
        let w = random_signal(&mut drng, wg, &sys.inputs, 0.0, 1 + (trial as usize % 4) * cells / 8);
        let traj = solve(&ide, &sys.initial_v(&x0)?.combined(), &w, &SolveConfig::with_horizon(horizon))?;
        final_sup = final_sup.max(sys.reconstruct(&traj, &x0, horizon)?.sup_norm());
        let mut k = 0;
        while k + stride <= traj.steps() {
            let a = lyapunov_v(&cert, &traj.history_at(k as f64 * h)?);
            let b = lyapunov_v(&cert, &traj.history_at((k + stride) as f64 * h)?);
            rise = rise.max(b - a);
            if b > a + 1e-8 {
                violations += 1;
            }
            k += stride;
        }
    }
    let checks = vec![
        Check::at_most("sup_profile_at_T40", final_sup, 1e-3),
        Check::at_most("largest_V_increase", rise, 1e-8),
        Check::none("V_monotonicity_violations", violations),
    ];
    Ok(CriterionReport::new(3, checks, start))
}

/// Razumikhin check of `W = |p| + 3|v|`, `λ = 5/6` for the integral-feedback system at `g = 1`.
pub fn criterion_4(seed: u64) -> Result<CriterionReport> {
    let start = Instant::now();
    let ide = Arc::new(HyperbolicSystem::integral_feedback(1.0)).to_ide()?;
    let lambda = 5.0 / 6.0;
    let cert = IssCertificate::new(vec![1.0, 3.0], lambda, Gain::Zero, None, ide.r)?;
    let rep = check_razumikhin(&ide, &cert, 10_000, 64, seed)?;
    let checks = vec![
        Check::none("violations", rep.violations),
        Check::at_most("effective_lambda", rep.effective_lambda, lambda + 1e-9),
        Check::at_most("negative_worst_margin", -rep.worst_margin, 0.0),
        Check::at_most("seconds", start.elapsed().as_secs_f64(), 5.0),
    ];
    Ok(CriterionReport::new(4, checks, start))
}

/// Initial profile `i` of the finite-time runs; profile 0 is a step.
fn feedback_x0(i: u64, cells: usize, seed: u64) -> Result<SampledFn> {
    if i == 0 {
        return profile(
            &Signal::Step {
                at: 0.5,
                before: 1.0,
                after: -0.5,
            },
            cells,
            seed,
        );
    }
    let mut rng = Stream::new(seed, streams::trial(streams::INITIAL, i));
    let norm = 0.1 + 2.0 * rng.uniform();
    Ok(random_history(&mut rng, HyperbolicSystem::profile_grid(cells), 1, norm, HISTORY_SHAPES[i as usize % 4]))
}

/// Finite-time stabilization (criterion 5) and the agreement of the three controllers along
/// the same runs (criterion 6).
pub fn criteria_5_6(seed: u64, which: usize) -> Result<CriterionReport> {
    let start = Instant::now();
    let (cells, horizon) = (256usize, 3.0);
    let h = 1.0 / cells as f64;
    let zero = SampledFn::zeros(Grid::new(-1.0, h, cells + 3 * cells)?, 1);
    let (mut residual, mut spread): (f64, f64) = (0.0, 0.0);
    let mut runs = 0;
    for g in [-1.5, 0.5, 1.0, 1.5] {
        for i in 0..20u64 {
            let x0 = feedback_x0(i, cells, seed)?;
            let run = closed_loop(g, &x0, ControllerKind::KernelIntegral, &zero, horizon, &[])?;
            residual = residual.max(run.sup_after(2.0 + 2.0 * h) / x0.sup_norm());
            spread = spread.max(run.controller_spread());
            runs += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let checks = if which == 5 {
        vec![
            Check::at_most("runs_short", (80 - runs) as f64, 0.0),
            Check::at_most("relative_sup_after_2+2h", residual, 1e-6),
            Check::at_most("seconds", secs, 20.0),
        ]
    } else {
        vec![Check::at_most("controller_spread", spread, 1e-9)]
    };
    Ok(CriterionReport::new(which, checks, start))
}

/// Constant actuator error `w = 0.1` at `g = 1`: `p` settles to `w` one delay later and the
/// steady profile is linear in `w`.
pub fn criterion_7(seed: u64) -> Result<CriterionReport> {
    let start = Instant::now();
    let (cells, horizon, wbar) = (256usize, 4.0, 0.1);
    let h = 1.0 / cells as f64;
    let wg = Grid::new(-1.0, h, cells + 4 * cells)?;
    let x0 = feedback_x0(3, cells, seed)?;
    let run1 = closed_loop(1.0, &x0, ControllerKind::KernelIntegral, &SampledFn::constant(wg, &[wbar])?, horizon, &[horizon])?;
    let run2 = closed_loop(
        1.0,
        &x0,
        ControllerKind::KernelIntegral,
        &SampledFn::constant(wg, &[2.0 * wbar])?,
        horizon,
        &[horizon],
    )?;
    let first = ((1.0 + 2.0 * h) / h).round() as usize;
    let p_err = (first..run1.trajectory.steps()).map(|k| (run1.p(k) - wbar).abs()).fold(0.0, f64::max);
    let lin = run2.snapshots[0].1.max_abs_diff(&run1.snapshots[0].1.scaled(2.0))?;
    let checks = vec![
        Check::at_most("p_minus_w_after_1+2h", p_err, 1e-9),
        Check::at_most("doubling_error", lin, 1e-9),
    ];
    Ok(CriterionReport::new(7, checks, start))
}

fn random_lsd(rng: &mut Stream, i: usize) -> Result<IdeSystem> {
    let r = [0.5, 1.0, 2.0][i % 3];
    let q = if i % 2 == 0 {
        Kernel::constant(rng.range(-1.5, 1.5) / r)
    } else {
        let beta: f64 = rng.range(-2.0, 2.0);
        Kernel::exp_affine(rng.range(-1.5, 1.5) / (r * (beta.abs() * r).exp()), beta)
    };
    IdeSystem::linear_scalar_distributed(LinearScalarDistributed {
        q,
        r,
        d_bound: rng.range(0.5, 1.0),
    })
}

struct Instance {
    sys: IdeSystem,
    x0: SampledFn,
    w: SampledFn,
    horizon: f64,
}

fn lsd_instance(seed: u64, i: usize, cells: usize) -> Result<Instance> {
    let mut rng = Stream::new(seed, streams::trial(streams::AUDIT, i as u64));
    let sys = random_lsd(&mut rng, i)?;
    let h = sys.r / cells as f64;
    let horizon = 2.0 * sys.r;
    let norm = rng.range(0.5, 1.0);
    let x0 = random_history(&mut rng, Grid::new(-sys.r, h, cells)?, 1, norm, HISTORY_SHAPES[i % 4]);
    let w = random_signal(&mut rng, Grid::new(-sys.r, h, 3 * cells)?, &sys.inputs, 0.5, (cells / 8).max(1));
    Ok(Instance { sys, x0, w, horizon })
}

fn tail_diff(a: &Trajectory, from: usize, b: &Trajectory) -> f64 {
    (0..b.steps())
        .map(|k| euclid(&[a.value_at_step(from + k)[0] - b.value_at_step(k)[0]]))
        .fold(0.0, f64::max)
}

/// Closed-form check on `x(t) = ½ ∫ x(t+s) ds` and the semigroup, causality and uniqueness
/// properties on random scalar systems.
pub fn criterion_8(seed: u64) -> Result<CriterionReport> {
    let start = Instant::now();
    let cells = 1024usize;
    let h = 1.0 / cells as f64;
    let sys = IdeSystem::scalar_average(0.5);
    let x0 = SampledFn::constant(Grid::new(-1.0, h, cells)?, &[1.0])?;
    let w = SampledFn::constant(Grid::new(-1.0, h, 2 * cells)?, &[1.0, 0.0])?;
    let traj = solve(&sys, &x0, &w, &SolveConfig::with_horizon(1.0))?;
    let err = (0..cells)
        .map(|i| {
            let t = (i as f64 + 0.5) * h;
            (traj.value_at_step(i)[0] - (1.0 - 0.5 * (0.5 * t).exp())).abs()
        })
        .fold(0.0, f64::max);
    let mut factor = traj.max_factor();
    let (mut semigroup, mut uniqueness): (f64, f64) = (0.0, 0.0);
    let mut causality_breaks = 0;
    let small = 32usize;
    for i in 0..100 {
        let inst = lsd_instance(seed, i, small)?;
        let cfg = SolveConfig::with_horizon(inst.horizon);
        let hs = inst.sys.r / small as f64;
        let full = solve(&inst.sys, &inst.x0, &inst.w, &cfg)?;
        factor = factor.max(full.max_factor());
        // semigroup: restart from the history at t0
        let m = 1 + i % 7;
        let t0 = inst.sys.r * m as f64 / 4.0;
        let hist = full.history_at(t0)?.rebased(-inst.sys.r);
        let w_tail = inst.w.window(t0 - inst.sys.r, inst.w.grid().t_end())?.rebased(-inst.sys.r);
        let rest = solve(&inst.sys, &hist, &w_tail, &SolveConfig::with_horizon(inst.horizon - t0))?;
        semigroup = semigroup.max(tail_diff(&full, (t0 / hs).round() as usize, &rest));
        // causality: new input from t1 on
        let t1_cells = small + (i * 5) % (2 * small);
        let mut vals = inst.w.values().to_vec();
        let dim = inst.w.dim();
        let mut prng = Stream::new(seed, streams::trial(streams::NOISE, i as u64));
        for (k, v) in vals.iter_mut().enumerate() {
            if k / dim >= t1_cells {
                *v = if k % dim == 0 { inst.sys.inputs.d_bounds[0] * prng.range(-1.0, 1.0) } else { 3.0 * prng.range(-1.0, 1.0) };
            }
        }
        let w2 = SampledFn::new(*inst.w.grid(), dim, vals)?;
        let other = solve(&inst.sys, &inst.x0, &w2, &cfg)?;
        let before = t1_cells;
        let same = full.solution.values()[..before]
            .iter()
            .zip(&other.solution.values()[..before])
            .all(|(a, b)| a.to_bits() == b.to_bits());
        if !same {
            causality_breaks += 1;
        }
        // uniqueness: a different first iterate
        let s = inst.x0.sup_norm().max(inst.w.sup_norm());
        let seeded = solve(&inst.sys, &inst.x0, &inst.w, &SolveConfig { seed_value: s, ..cfg })?;
        uniqueness = uniqueness.max(full.solution.max_abs_diff(&seeded.solution)?);
    }
    let tol = SolveConfig::default().tol;
    let checks = vec![
        Check::at_most("closed_form_error_K1024", err, 1e-6),
        Check::at_most("contraction_factor", factor, 0.5),
        Check::at_most("semigroup_gap", semigroup, 10.0 * tol),
        Check::none("causality_breaks", causality_breaks),
        Check::at_most("uniqueness_gap", uniqueness, 10.0 * tol),
        Check::at_most("seconds", start.elapsed().as_secs_f64(), 10.0),
    ];
    Ok(CriterionReport::new(8, checks, start))
}

/// `|x_t - y_t| <= 8 e^{2 ln 2 t} |x_0 - y_0|` on 50 pairs of the scalar-average system.
pub fn criterion_9(seed: u64) -> Result<CriterionReport> {
    let start = Instant::now();
    let (cells, horizon) = (64usize, 5.0);
    let sys = IdeSystem::scalar_average(0.5);
    let h = 1.0 / cells as f64;
    let hg = Grid::new(-1.0, h, cells)?;
    let cfg = SolveConfig::with_horizon(horizon);
    let rate = 2.0 * std::f64::consts::LN_2;
    let (mut violations, mut worst_ratio) = (0usize, 0.0f64);
    for pair in 0..50u64 {
        let mut rng = Stream::new(seed, streams::trial(streams::INITIAL, pair));
        let nx = rng.range(0.1, 2.0);
        let x0 = random_history(&mut rng, hg, 1, nx, HISTORY_SHAPES[pair as usize % 5]);
        let y0 = if pair % 2 == 0 {
            let ny = rng.range(0.1, 2.0);
            random_history(&mut rng, hg, 1, ny, HISTORY_SHAPES[(pair as usize + 1) % 5])
        } else {
            // a nearby datum
            let eps = rng.range(1e-4, 1e-1);
            let bump = random_history(&mut rng, hg, 1, eps, HISTORY_SHAPES[(pair as usize + 2) % 5]);
            SampledFn::new(hg, 1, x0.values().iter().zip(bump.values()).map(|(a, b)| a + b).collect())?
        };
        let mut wrng = Stream::new(seed, streams::trial(streams::DISTURBANCE, pair));
        let w = random_signal(&mut wrng, Grid::new(-1.0, h, cells + 5 * cells)?, &sys.inputs, 0.5, 8);
        let x = solve(&sys, &x0, &w, &cfg)?;
        let y = solve(&sys, &y0, &w, &cfg)?;
        let d0 = x0.max_abs_diff(&y0)?;
        let n = x.solution.len().min(y.solution.len());
        for j in cells..n {
            let t = x.solution.grid().cell_hi(j);
            let bound = 8.0 * (rate * t).exp() * d0;
            let d = (x.solution.value(j)[0] - y.solution.value(j)[0]).abs();
            worst_ratio = worst_ratio.max(d / bound);
            if d > bound {
                violations += 1;
            }
        }
    }
    let checks = vec![
        Check::none("violations", violations),
        Check::at_most("worst_ratio_to_envelope", worst_ratio, 1.0),
    ];
    Ok(CriterionReport::new(9, checks, start))
}

/// `‖x_{t+δ} - x_t‖_{L1}` for a step profile on the open-loop recirculation plant.
pub fn criterion_10() -> Result<CriterionReport> {
    let start = Instant::now();
    let (cells, t) = (320usize, 0.3);
    let deltas = [0.1, 0.05, 0.025, 0.0125];
    let sys = Arc::new(HyperbolicSystem::recirculation(1.0));
    let x0 = profile(
        &Signal::Step {
            at: 0.5,
            before: 1.0,
            after: 0.0,
        },
        cells,
        0,
    )?;
    let horizon = 0.4;
    let w = pde_input(&sys, cells, horizon, &[Signal::default()], 0)?;
    let mut times = vec![t];
    times.extend(deltas.iter().map(|d| t + d));
    let run = sys.solve_pde(&x0, &w, &SolveConfig::with_horizon(horizon), &times)?;
    let base = &run.snapshots[0].1;
    let mut dist = Vec::new();
    for (_, snap) in &run.snapshots[1..] {
        dist.push(l_mu_distance(snap, base, 1.0)?);
    }
    let mut checks = vec![Check::at_most("snapshots_missing", (5 - run.snapshots.len()) as f64, 0.0)];
    for i in 1..dist.len() {
        checks.push(Check::at_most(
            format!("L1_at_delta_{}_minus_0.6x_previous", deltas[i]),
            dist[i] - 0.6 * dist[i - 1],
            1e-9,
        ));
    }
    checks.push(Check::at_most("L1_at_smallest_delta", dist[dist.len() - 1], dist[0]));
    Ok(CriterionReport::new(10, checks, start))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_formatting() {
        let c = Check::at_most("x", 0.5, 1.0);
        assert!(c.passed);
        assert!(c.to_string().starts_with("x = 5.0000e-1"));
        assert!(!Check::between("r", 3.0, 1.7, 2.3).passed);
        assert!(Check::none("n", 0).passed);
    }

    #[test]
    fn unknown_criterion_is_rejected() {
        assert!(run(11, 0).is_err());
    }
}
