//! Boundary feedback for the recirculation plant `x_t + x_z = g x(t, 1)`, `x(t, 0) = u(t)`.
//!
//! The closed loop is simulated in `(p, v)` coordinates with the source integrated
//! exponentially over each step: with `α = e^{gh} - 1`,
//! `p_k = v_{k-K} + α Σ_{m=k-K}^{k-1} p_m` and `v_k = u_k + w_k`. The profile cell `i`
//! at step `k` is `v_{k-i} + α Σ_{m=k-i}^{k-1} p_m`, and the kernel law integrates
//! `k(z) = -g e^{gz}` exactly over each cell. On this grid the three controller forms are
//! rearrangements of one finite sum and the loop reaches zero after two delays.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{modulus, random_history, random_signal, EvalPoint, IdeSystem, InputSpec, Moduli, Rhs};
use crate::hyperbolic::HyperbolicSystem;
use crate::ide_core::{solve, SolveConfig, Trajectory};
use crate::rng::{streams, Stream};
use crate::sampled::{Grid, SampledFn, ALIGN_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecirculationPlant {
    pub g: f64,
    pub cells: usize,
}

impl RecirculationPlant {
    pub fn system(&self) -> HyperbolicSystem {
        HyperbolicSystem::recirculation(self.g)
    }

    pub fn step(&self) -> f64 {
        1.0 / self.cells as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerKind {
    /// `u = ∫ k(z) x(z) dz` over the full profile.
    KernelIntegral,
    /// Distributed delays on the boundary traces `x(s, 1)` and `x(s, 0)`.
    DelayedTwoPoint,
    /// Distributed delays on `p` and `v`.
    IdeCoordinates,
}

impl std::str::FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<ControllerKind> {
        match s {
            "kernel" | "kernel-integral" => Ok(ControllerKind::KernelIntegral),
            "two-point" | "delayed-two-point" => Ok(ControllerKind::DelayedTwoPoint),
            "ide" | "ide-coordinates" => Ok(ControllerKind::IdeCoordinates),
            other => Err(Error::Validation(vec![format!(
                "unknown controller '{other}' (expected kernel, two-point or ide)"
            )])),
        }
    }
}

pub fn kernel(g: f64, z: f64) -> f64 {
    -g * (g * z).exp()
}

/// `∫_lo^hi k(z) dz`.
fn kernel_cell(g: f64, lo: f64, hi: f64) -> f64 {
    -((g * hi).exp() - (g * lo).exp())
}

/// `∫_0^1 k(z) x(z) dz` with `k` integrated exactly over each profile cell.
pub fn control_kernel(g: f64, profile: &SampledFn) -> f64 {
    if g == 0.0 {
        return 0.0;
    }
    let zg = profile.grid();
    (0..zg.count)
        .map(|i| kernel_cell(g, zg.cell_lo(i), zg.cell_hi(i)) * profile.value(i)[0])
        .sum()
}

fn check_pair(a: &SampledFn, b: &SampledFn) -> Result<()> {
    if a.len() != b.len() || !a.grid().same_step(b.grid()) || a.dim() != 1 || b.dim() != 1 {
        return Err(Error::Alignment("histories must be scalar on the same grid".into()));
    }
    Ok(())
}

/// Weights on the `j`-th most recent cell: `(on p, on v)`.
fn delay_weights(g: f64, h: f64, kd: usize) -> Vec<(f64, f64)> {
    let alpha = (g * h).exp_m1();
    let eg = (g * kd as f64 * h).exp();
    (1..=kd)
        .map(|j| {
            let e = (g * (j - 1) as f64 * h).exp();
            (-alpha * (eg - e), -alpha * e)
        })
        .collect()
}

fn delay_law(g: f64, p: &SampledFn, v: &SampledFn) -> Result<f64> {
    check_pair(p, v)?;
    let kd = p.len();
    let h = p.grid().step;
    Ok(delay_weights(g, h, kd)
        .iter()
        .enumerate()
        .map(|(jm1, (wp, wv))| wp * p.value(kd - 1 - jm1)[0] + wv * v.value(kd - 1 - jm1)[0])
        .sum())
}

/// `u = -g ∫ (e^g - e^{g(t-s)}) p(s) ds - g ∫ e^{g(t-s)} v(s) ds` over the last delay.
pub fn control_ide(g: f64, p_hist: &SampledFn, v_hist: &SampledFn) -> Result<f64> {
    delay_law(g, p_hist, v_hist)
}

/// The same law on the measured traces `x(s, 1)` and `x(s, 0)`.
pub fn control_two_point(g: f64, x1_hist: &SampledFn, x0_hist: &SampledFn) -> Result<f64> {
    delay_law(g, x1_hist, x0_hist)
}

/// Profile on `(0, 1]` from one delay of `(p, v)`.
pub fn fitted_profile(g: f64, p_hist: &SampledFn, v_hist: &SampledFn) -> Result<SampledFn> {
    check_pair(p_hist, v_hist)?;
    let kd = p_hist.len();
    let alpha = (g * p_hist.grid().step).exp_m1();
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(kd);
    for i in 1..=kd {
        acc += p_hist.value(kd - i)[0];
        out.push(v_hist.value(kd - i)[0] + alpha * acc);
    }
    SampledFn::new(HyperbolicSystem::profile_grid(kd), 1, out)
}

fn split(hist: &SampledFn) -> Result<(SampledFn, SampledFn)> {
    let g = *hist.grid();
    let p = SampledFn::new(g, 1, hist.component(0))?;
    let v = SampledFn::new(g, 1, hist.component(1))?;
    Ok((p, v))
}

struct ClosedLoopRhs {
    g: f64,
    controller: ControllerKind,
}

impl Rhs for ClosedLoopRhs {
    fn state_dim(&self) -> usize {
        2
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn horizon(&self) -> f64 {
        1.0
    }

    fn eval(&self, x: &SampledFn, w: &SampledFn) -> Result<Vec<f64>> {
        let (p, v) = split(x)?;
        let profile = fitted_profile(self.g, &p, &v)?;
        let u = match self.controller {
            ControllerKind::KernelIntegral => control_kernel(self.g, &profile),
            ControllerKind::IdeCoordinates => control_ide(self.g, &p, &v)?,
            // the last profile cell is the trace x(s, 1) and the boundary value is v
            ControllerKind::DelayedTwoPoint => control_two_point(self.g, &p, &v)?,
        };
        Ok(vec![profile.value(profile.len() - 1)[0], u + w.current()[0]])
    }
}

/// Bound on the per-unit-time weight mass of the law and the recirculation, plus the
/// unit weight on the oldest boundary value.
fn closed_loop_weight(g: f64) -> f64 {
    let peak = g.exp().max(2.0 - g.exp());
    g.abs() * g.abs().exp() * (1.0 + peak) + 1.0
}

pub fn closed_loop_system(g: f64, controller: ControllerKind) -> IdeSystem {
    let n = closed_loop_weight(g);
    IdeSystem::external(
        Arc::new(ClosedLoopRhs { g, controller }),
        Moduli::new(
            modulus(move |_| n),
            modulus(move |_| n),
            modulus(move |r| 2.0 * (1.0 + n) * r),
            Some(modulus(move |r| 2.0 * (1.0 + n) * r)),
        ),
        InputSpec {
            d_bounds: vec![],
            u_dim: 1,
        },
        EvalPoint::LeftEdge,
    )
}

#[derive(Clone, Debug)]
pub struct ClosedLoopRun {
    pub g: f64,
    pub controller: ControllerKind,
    pub trajectory: Trajectory,
    pub snapshots: Vec<(f64, SampledFn)>,
    /// `(t, x(t, 1), x(t, 0))` per step.
    pub traces: Vec<(f64, f64, f64)>,
    /// `(t, u)` per step; `u = v - w`.
    pub control: Vec<(f64, f64)>,
    /// Kernel, IDE-coordinate and two-point law values at every step.
    pub control_forms: Vec<[f64; 3]>,
    /// `(t, sup_z |x(t, z)|)` per step.
    pub sup_trace: Vec<(f64, f64)>,
}

impl ClosedLoopRun {
    pub fn p(&self, k: usize) -> f64 {
        self.trajectory.value_at_step(k)[0]
    }

    pub fn v(&self, k: usize) -> f64 {
        self.trajectory.value_at_step(k)[1]
    }

    pub fn profile_at_step(&self, k: usize) -> Result<SampledFn> {
        let (p, v) = split(&self.trajectory.history_at(k as f64 * self.trajectory.step)?)?;
        fitted_profile(self.g, &p, &v)
    }

    /// Largest pairwise disagreement of the three controller forms.
    pub fn controller_spread(&self) -> f64 {
        self.control_forms
            .iter()
            .map(|[a, b, c]| (a - b).abs().max((a - c).abs()).max((b - c).abs()))
            .fold(0.0, f64::max)
    }

    /// `sup_z |x(t, z)|` over steps with `t >= t0`.
    pub fn sup_after(&self, t0: f64) -> f64 {
        self.sup_trace
            .iter()
            .filter(|(t, _)| *t >= t0 - ALIGN_TOL)
            .map(|(_, s)| *s)
            .fold(0.0, f64::max)
    }
}

/// Closed loop from the profile `x0` with additive actuator error `w` on `[-1, T)`.
pub fn closed_loop(
    g: f64,
    x0: &SampledFn,
    controller: ControllerKind,
    w: &SampledFn,
    horizon: f64,
    snapshot_times: &[f64],
) -> Result<ClosedLoopRun> {
    let kd = x0.len();
    let h = 1.0 / kd as f64;
    let mut errs = Vec::new();
    if x0.dim() != 1 || x0.grid().t_start != 0.0 || (x0.grid().step - h).abs() > ALIGN_TOL * h {
        errs.push("initial profile must be scalar on (0, 1]".to_string());
    }
    let steps = (horizon / h).round();
    if steps < 1.0 || (horizon / h - steps).abs() > ALIGN_TOL * steps {
        errs.push(format!("horizon {horizon} is not a whole number of steps 1/K = {h}"));
    }
    if !w.grid().same_step(x0.grid()) || (w.grid().t_start + 1.0).abs() > ALIGN_TOL {
        errs.push(format!("actuator error must start at -1 with step {h}"));
    }
    if w.dim() != 1 {
        errs.push(format!("actuator error has dimension {}, expected 1", w.dim()));
    }
    if !errs.is_empty() {
        return Err(Error::Validation(errs));
    }
    let steps = steps as usize;
    let tg = Grid::new(-1.0, h, kd)?;
    let mut hist = Vec::with_capacity(2 * kd);
    for j in 0..kd {
        hist.push(0.0);
        hist.push(x0.value(kd - 1 - j)[0]);
    }
    let hist = SampledFn::new(tg, 2, hist)?;
    let sys = closed_loop_system(g, controller);
    let trajectory = solve(&sys, &hist, w, &SolveConfig::with_horizon(steps as f64 * h))?;
    let mut run = ClosedLoopRun {
        g,
        controller,
        trajectory,
        snapshots: Vec::new(),
        traces: Vec::new(),
        control: Vec::new(),
        control_forms: Vec::new(),
        sup_trace: Vec::new(),
    };
    let done = run.trajectory.steps();
    let wanted: Vec<(f64, usize)> = snapshot_times.iter().map(|t| (*t, (t / h).round() as usize)).collect();
    // boundary traces of the profile, one delay back, for the two-point law
    let mut x1: Vec<f64> = Vec::with_capacity(done + kd);
    let mut xb: Vec<f64> = Vec::with_capacity(done + kd);
    for k in 0..=done {
        let t = k as f64 * h;
        let prof = run.profile_at_step(k)?;
        for (ts, ks) in &wanted {
            if *ks == k {
                run.snapshots.push((*ts, prof.clone()));
            }
        }
        run.sup_trace.push((t, prof.sup_norm()));
        if k == 0 {
            // before the loop starts the traces are the initial history itself
            let (p, v) = split(&run.trajectory.history_at(0.0)?)?;
            x1.extend(p.values());
            xb.extend(v.values());
        }
        if k < done {
            let (p, v) = split(&run.trajectory.history_at(t)?)?;
            let trace_grid = *p.grid();
            let x1_hist = SampledFn::new(trace_grid, 1, x1[k..k + kd].to_vec())?;
            let x0_hist = SampledFn::new(trace_grid, 1, xb[k..k + kd].to_vec())?;
            let forms = [
                control_kernel(g, &prof),
                control_ide(g, &p, &v)?,
                control_two_point(g, &x1_hist, &x0_hist)?,
            ];
            run.control_forms.push(forms);
            let vk = run.v(k);
            run.control.push((t, vk - w.value(kd + k)[0]));
            // x(t, 1) is the last profile cell, which is the value of p computed at this step
            run.traces.push((t, prof.value(kd - 1)[0], vk));
            x1.push(prof.value(kd - 1)[0]);
            xb.push(vk);
        }
    }
    Ok(run)
}

#[derive(Clone, Debug, Serialize)]
pub struct IssGainReport {
    pub g: f64,
    /// Smallest `Γ` with `sup_z |x(t)| <= Γ sup |w|` for `t >= 2 + 2h` over all trials.
    pub gamma: f64,
    /// `sup_z |x(t)|` for `t >= 2 + 2h` with `w ≡ 0`, relative to `|x0|`.
    pub zero_input_residual: f64,
    /// `|x(t; 2w) - 2 x(t; w)|` at steady state for a constant `w`.
    pub linearity_error: f64,
    /// `sup_z |x|` at steady state for `w ≡ 1`.
    pub constant_gain: f64,
}

/// Random initial profiles and bounded actuator errors: measures the steady-state input gain.
pub fn iss_gain_measurement(g: f64, trials: usize, horizon: f64, cells: usize, seed: u64) -> Result<IssGainReport> {
    let h = 1.0 / cells as f64;
    let steps = (horizon / h).round() as usize;
    let zg = HyperbolicSystem::profile_grid(cells);
    let wg = Grid::new(-1.0, h, cells + steps)?;
    let t_settle = 2.0 + 2.0 * h;
    let spec = InputSpec {
        d_bounds: vec![],
        u_dim: 1,
    };
    let mut gamma: f64 = 0.0;
    let mut residual: f64 = 0.0;
    for trial in 0..trials {
        let mut rng = Stream::new(seed, streams::trial(streams::INITIAL, trial as u64));
        let x0 = random_history(&mut rng, zg, 1, 1.0, crate::functionals::HISTORY_SHAPES[trial % 5]);
        let mut wrng = Stream::new(seed, streams::trial(streams::NOISE, trial as u64));
        let amp = 0.5 * (1.0 + wrng.uniform());
        let w = random_signal(&mut wrng, wg, &spec, amp, (cells / 4).max(1));
        let run = closed_loop(g, &x0, ControllerKind::KernelIntegral, &w, steps as f64 * h, &[])?;
        let w_sup = w.sup_norm();
        gamma = gamma.max(run.sup_after(t_settle) / w_sup);
        let zero = SampledFn::zeros(wg, 1);
        let run0 = closed_loop(g, &x0, ControllerKind::KernelIntegral, &zero, steps as f64 * h, &[])?;
        residual = residual.max(run0.sup_after(t_settle) / x0.sup_norm().max(f64::MIN_POSITIVE));
    }
    let zero0 = SampledFn::zeros(zg, 1);
    let one = SampledFn::constant(wg, &[1.0])?;
    let two = SampledFn::constant(wg, &[2.0])?;
    let r1 = closed_loop(g, &zero0, ControllerKind::KernelIntegral, &one, steps as f64 * h, &[horizon])?;
    let r2 = closed_loop(g, &zero0, ControllerKind::KernelIntegral, &two, steps as f64 * h, &[horizon])?;
    let (p1, p2) = (&r1.snapshots[0].1, &r2.snapshots[0].1);
    let linearity_error = p2.max_abs_diff(&p1.scaled(2.0))?;
    Ok(IssGainReport {
        g,
        gamma,
        zero_input_residual: residual,
        linearity_error,
        constant_gain: p1.sup_norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::audit_h1;

    fn zg(k: usize) -> Grid {
        HyperbolicSystem::profile_grid(k)
    }

    fn zero_w(k: usize, horizon: f64) -> SampledFn {
        SampledFn::zeros(Grid::new(-1.0, 1.0 / k as f64, k + (horizon * k as f64).round() as usize).unwrap(), 1)
    }

    #[test]
    fn kernel_values() {
        assert_eq!(kernel(0.0, 0.3), 0.0);
        assert_eq!(kernel(1.0, 0.0), -1.0);
        assert!((kernel(1.0, 1.0) + std::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn control_kernel_cases() {
        let g = zg(64);
        assert_eq!(control_kernel(1.0, &SampledFn::zeros(g, 1)), 0.0);
        let one = SampledFn::constant(g, &[1.0]).unwrap();
        assert!((control_kernel(1.0, &one) + (std::f64::consts::E - 1.0)).abs() < 1e-14);
        let x = SampledFn::from_scalar_fn(g, |z| z.sin()).unwrap();
        assert!(control_kernel(1e-12, &x).abs() < 1e-11);
    }

    #[test]
    fn control_ide_cases() {
        let tg = Grid::new(-1.0, 1.0 / 512.0, 512).unwrap();
        let zero = SampledFn::zeros(tg, 1);
        assert_eq!(control_ide(1.0, &zero, &zero).unwrap(), 0.0);
        assert_eq!(control_two_point(1.0, &zero, &zero).unwrap(), 0.0);
        // exact value -1 - e h / 2 + O(h^2): first order towards -1
        let err = |k: usize| {
            let tg = Grid::new(-1.0, 1.0 / k as f64, k).unwrap();
            let one = SampledFn::constant(tg, &[1.0]).unwrap();
            control_ide(1.0, &one, &SampledFn::zeros(tg, 1)).unwrap() + 1.0
        };
        assert!(err(512).abs() < 3e-3);
        let ratio = err(256) / err(512);
        assert!((ratio - 2.0).abs() < 0.01, "ratio {ratio}");
    }

    #[test]
    fn delay_law_equals_kernel_on_fitted_profile() {
        let k = 40;
        let tg = Grid::new(-1.0, 1.0 / k as f64, k).unwrap();
        let p = SampledFn::from_scalar_fn(tg, |t| (4.0 * t).cos()).unwrap();
        let v = SampledFn::from_scalar_fn(tg, |t| t * t - 0.3).unwrap();
        for g in [-1.5, 0.5, 2.0] {
            let prof = fitted_profile(g, &p, &v).unwrap();
            let a = control_kernel(g, &prof);
            let b = control_ide(g, &p, &v).unwrap();
            assert!((a - b).abs() < 1e-13, "{a} vs {b}");
        }
    }

    #[test]
    fn finite_time_zero_after_two_delays() {
        let k = 128;
        for g in [-1.5, -0.5, 0.5, 1.0, 1.5] {
            let x0 = SampledFn::from_scalar_fn(zg(k), |z| if z < 0.4 { 1.0 } else { -2.0 + z }).unwrap();
            let run = closed_loop(g, &x0, ControllerKind::KernelIntegral, &zero_w(k, 3.0), 3.0, &[]).unwrap();
            let tail = run.sup_after(2.0 + 2.0 / k as f64);
            assert!(tail <= 1e-12 * x0.sup_norm(), "g = {g}: {tail}");
            assert!(run.controller_spread() < 1e-12);
        }
    }

    #[test]
    fn controllers_give_the_same_loop() {
        let k = 64;
        let x0 = SampledFn::from_scalar_fn(zg(k), |z| (9.0 * z).sin()).unwrap();
        let w = SampledFn::from_scalar_fn(Grid::new(-1.0, 1.0 / k as f64, 4 * k).unwrap(), |t| 0.1 * t.cos()).unwrap();
        let a = closed_loop(1.2, &x0, ControllerKind::KernelIntegral, &w, 3.0, &[]).unwrap();
        for kind in [ControllerKind::IdeCoordinates, ControllerKind::DelayedTwoPoint] {
            let b = closed_loop(1.2, &x0, kind, &w, 3.0, &[]).unwrap();
            let d = a.trajectory.solution.max_abs_diff(&b.trajectory.solution).unwrap();
            assert!(d < 1e-12, "{kind:?}: {d}");
        }
    }

    #[test]
    fn constant_actuator_error_steady_state() {
        let k = 64;
        let g = 1.0;
        let wbar = 0.1;
        let x0 = SampledFn::from_scalar_fn(zg(k), |z| z - 0.5).unwrap();
        let w = SampledFn::constant(Grid::new(-1.0, 1.0 / k as f64, 5 * k).unwrap(), &[wbar]).unwrap();
        let run = closed_loop(g, &x0, ControllerKind::KernelIntegral, &w, 4.0, &[]).unwrap();
        let alpha = (g / k as f64).exp_m1();
        for step in (k + 2)..run.trajectory.steps() {
            assert!((run.p(step) - wbar).abs() < 1e-13);
        }
        let last = run.trajectory.steps() - 1;
        assert!((run.v(last) - wbar * (1.0 - k as f64 * alpha)).abs() < 1e-13);
    }

    #[test]
    fn zero_data_stays_zero() {
        let k = 32;
        let run = closed_loop(1.0, &SampledFn::zeros(zg(k), 1), ControllerKind::KernelIntegral, &zero_w(k, 2.0), 2.0, &[1.0]).unwrap();
        assert_eq!(run.sup_after(0.0), 0.0);
    }

    #[test]
    fn g_zero_is_pure_transport() {
        let k = 16;
        let x0 = SampledFn::from_scalar_fn(zg(k), |z| z).unwrap();
        let run = closed_loop(0.0, &x0, ControllerKind::KernelIntegral, &zero_w(k, 2.0), 2.0, &[0.5]).unwrap();
        let snap = &run.snapshots[0].1;
        for i in 0..k {
            let expect = if i < k / 2 { 0.0 } else { x0.value(i - k / 2)[0] };
            assert_eq!(snap.value(i)[0], expect);
        }
    }

    #[test]
    fn closed_loop_moduli_pass_audit() {
        for g in [-1.5, 1.0] {
            let sys = closed_loop_system(g, ControllerKind::IdeCoordinates);
            let rep = audit_h1(&sys, 1.0, 32, 100, 3).unwrap();
            assert!(rep.passed(), "{rep:?}");
        }
    }

    #[test]
    fn gain_measurement_structure() {
        let rep = iss_gain_measurement(1.0, 4, 4.0, 32, 7).unwrap();
        assert!(rep.zero_input_residual < 1e-12);
        assert!(rep.linearity_error < 1e-12);
        assert!((rep.constant_gain - 1.0).abs() < 1e-12);
        assert!(rep.gamma > 0.0 && rep.gamma < 10.0);
    }

    #[test]
    fn parse_controller() {
        assert_eq!("kernel".parse::<ControllerKind>().unwrap(), ControllerKind::KernelIntegral);
        assert_eq!("two-point".parse::<ControllerKind>().unwrap(), ControllerKind::DelayedTwoPoint);
        assert_eq!("ide".parse::<ControllerKind>().unwrap(), ControllerKind::IdeCoordinates);
        assert!("pid".parse::<ControllerKind>().is_err());
    }
}
