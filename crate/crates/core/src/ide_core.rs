//! Successive approximations on contraction windows for `x(t) = f(x_t, w_t)`.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functionals::{cells_for, EvalPoint, IdeSystem, Moduli};
use crate::sampled::{euclid, Grid, SampledFn};

const EPS0: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveConfig {
    pub tol: f64,
    pub max_picard_iters: usize,
    pub blowup_threshold: f64,
    pub horizon: f64,
    /// Constant value of the first Picard iterate on every window.
    pub seed_value: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            tol: 1e-12,
            max_picard_iters: 200,
            blowup_threshold: 1e12,
            horizon: 1.0,
            seed_value: 0.0,
        }
    }
}

impl SolveConfig {
    pub fn with_horizon(horizon: f64) -> SolveConfig {
        SolveConfig {
            horizon,
            ..SolveConfig::default()
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WindowLog {
    pub index: usize,
    pub t_start: f64,
    pub r_bound: f64,
    pub delta: f64,
    pub cells: usize,
    pub sweeps: usize,
    /// Largest ratio of successive iterate differences above the rounding floor (0 if none measured).
    pub factor: f64,
    pub max_iterate: f64,
}

impl fmt::Display for WindowLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "window {}: R={:.6e}, delta={:.6e}, sweeps={}, factor={:.6e}",
            self.index, self.r_bound, self.delta, self.sweeps, self.factor
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EscapeKind {
    /// An iterate exceeded the blow-up threshold or became non-finite.
    Threshold,
    /// The running norm forced the contraction window below one grid step.
    WindowBelowStep { required_step: f64 },
}

#[derive(Clone, Debug, Serialize)]
pub struct Escape {
    pub time: f64,
    pub last_finite_norm: f64,
    pub kind: EscapeKind,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub step: f64,
    pub r: f64,
    /// Solution on `[-r, t_end)`; the first `r/step` cells are the initial condition.
    pub solution: SampledFn,
    pub input: SampledFn,
    /// `None` when the requested horizon was reached.
    pub t_max_reached: Option<f64>,
    pub escape: Option<Escape>,
    pub windows: Vec<WindowLog>,
}

impl Trajectory {
    pub fn delay_cells(&self) -> usize {
        (self.r / self.step).round() as usize
    }

    /// Time up to which the solution is known.
    pub fn end_time(&self) -> f64 {
        self.solution.grid().t_end()
    }

    pub fn steps(&self) -> usize {
        self.solution.len() - self.delay_cells()
    }

    /// Value of the cell starting at `t = k*step`.
    pub fn value_at_step(&self, k: usize) -> &[f64] {
        self.solution.value(self.delay_cells() + k)
    }

    /// History `x_t` on `[-r, 0)` for an aligned `t`.
    pub fn history_at(&self, t: f64) -> Result<SampledFn> {
        let k = self.solution.grid().line_index(t)?;
        let kd = self.delay_cells();
        if k < kd {
            return Err(Error::Domain(format!("time {t} precedes the initial history")));
        }
        self.solution.window_cells(k - kd, k)
    }

    pub fn max_factor(&self) -> f64 {
        self.windows.iter().map(|w| w.factor).fold(0.0, f64::max)
    }

    pub fn max_iterate(&self) -> f64 {
        self.windows.iter().map(|w| w.max_iterate).fold(0.0, f64::max)
    }

    pub fn log_lines(&self) -> Vec<String> {
        self.windows.iter().map(|w| w.to_string()).collect()
    }
}

/// Length of the contraction window for the norm bound `R` on a grid of step `h`.
pub fn contraction_window(sys: &IdeSystem, radius: f64, h: f64) -> Result<f64> {
    Ok(contraction_cells(sys, radius, h)? as f64 * h)
}

/// Unrounded window length `min(r, 1/(2 N(5 a(R)) + eps0))`.
pub fn raw_window(moduli: &Moduli, r: f64, radius: f64) -> f64 {
    let n = (moduli.n)(5.0 * (moduli.a)(radius));
    r.min(1.0 / (2.0 * n + EPS0))
}

pub fn contraction_cells(sys: &IdeSystem, radius: f64, h: f64) -> Result<usize> {
    let delta = raw_window(&sys.moduli, sys.r, radius);
    let cells = ((delta / h) * (1.0 + 1e-12)).floor();
    if cells < 1.0 {
        return Err(Error::GridTooCoarse {
            required_step: delta,
            step: h,
        });
    }
    Ok(cells as usize)
}

/// Lower bound `r / (1 + 2 r N(5 a(s)))` on the existence time for data bounded by `s`.
pub fn escape_time_lower_bound(sys: &IdeSystem, s: f64) -> f64 {
    let n = (sys.moduli.n)(5.0 * (sys.moduli.a)(s));
    sys.r / (1.0 + 2.0 * sys.r * n)
}

/// `G = (1 + 2M(s))^(2 + 2 r N(s))`, `P = (2 N(s) + 1/r) ln(1 + 2M(s))`.
pub fn lipschitz_constants(moduli: &Moduli, r: f64, s: f64) -> (f64, f64) {
    let m = (moduli.m)(s);
    let n = (moduli.n)(s);
    let g = (1.0 + 2.0 * m).powf(2.0 + 2.0 * r * n);
    let p = (2.0 * n + 1.0 / r) * (1.0 + 2.0 * m).ln();
    (g, p)
}

struct Layout {
    n: usize,
    kd: usize,
    hgrid: Grid,
    igrid: Grid,
    in_dim: usize,
    implicit: bool,
}

impl Layout {
    fn new(sys: &IdeSystem, h: f64, in_dim: usize) -> Result<Layout> {
        Ok(Layout {
            n: sys.n,
            kd: cells_for(sys.r, h)?,
            hgrid: sys.history_grid(h)?,
            igrid: sys.input_grid(h)?,
            in_dim,
            implicit: sys.eval_point == EvalPoint::Midpoint,
        })
    }

    /// Evaluates the right-hand side for buffer cell `j` (buffer cell 0 sits at `-r`).
    fn eval(&self, sys: &IdeSystem, buf: &[f64], input: &[f64], j: usize) -> Result<Vec<f64>> {
        let lo = j - self.kd;
        let hi = if self.implicit { j + 1 } else { j };
        let x = SampledFn::new(self.hgrid, self.n, buf[lo * self.n..hi * self.n].to_vec())?;
        let w = SampledFn::new(self.igrid, self.in_dim, input[lo * self.in_dim..(j + 1) * self.in_dim].to_vec())?;
        sys.eval(&x, &w)
    }
}

enum WindowOutcome {
    Converged { sweeps: usize, factor: f64, max_iterate: f64 },
    Escaped { time_cell: usize, last_norm: f64 },
}

/// Jacobi sweeps over buffer cells `start..start + cells`; on success the buffer holds the limit.
///
/// Cells are frozen in order once their own iterates have settled, so the value of a cell
/// never depends on cells or inputs after it.
fn run_window(
    sys: &IdeSystem,
    lay: &Layout,
    buf: &mut [f64],
    input: &[f64],
    start: usize,
    cells: usize,
    cfg: &SolveConfig,
) -> Result<WindowOutcome> {
    let n = lay.n;
    for v in &mut buf[start * n..(start + cells) * n] {
        *v = cfg.seed_value;
    }
    let mut prev_diff = f64::INFINITY;
    let mut cell_prev = vec![f64::INFINITY; cells];
    let mut cell_diff = vec![0.0; cells];
    let mut frozen = 0usize;
    let mut factor: f64 = 0.0;
    let mut max_iterate: f64 = euclid(&vec![cfg.seed_value; n]);
    let mut next = vec![0.0; cells * n];
    for sweep in 1..=cfg.max_picard_iters {
        for c in frozen..cells {
            let j = start + c;
            let val = match lay.eval(sys, buf, input, j) {
                Ok(v) => v,
                Err(Error::Evaluation(_)) | Err(Error::Data(_)) => {
                    return Ok(WindowOutcome::Escaped {
                        time_cell: j,
                        last_norm: max_iterate,
                    })
                }
                Err(e) => return Err(e),
            };
            let norm = euclid(&val);
            if !norm.is_finite() || norm > cfg.blowup_threshold {
                return Ok(WindowOutcome::Escaped {
                    time_cell: j,
                    last_norm: max_iterate,
                });
            }
            max_iterate = max_iterate.max(norm);
            next[c * n..(c + 1) * n].copy_from_slice(&val);
        }
        let mut diff: f64 = 0.0;
        for c in frozen..cells {
            let cur = &mut buf[(start + c) * n..(start + c + 1) * n];
            let d: Vec<f64> = cur.iter().zip(&next[c * n..(c + 1) * n]).map(|(x, y)| x - y).collect();
            cell_prev[c] = cell_diff[c];
            cell_diff[c] = euclid(&d);
            diff = diff.max(cell_diff[c]);
            cur.copy_from_slice(&next[c * n..(c + 1) * n]);
        }
        let floor = 1e4 * f64::EPSILON * max_iterate.max(1.0);
        if prev_diff.is_finite() && prev_diff > floor && diff > floor {
            factor = factor.max(diff / prev_diff);
        }
        while frozen < cells {
            let (d, p) = (cell_diff[frozen], if sweep == 1 { f64::INFINITY } else { cell_prev[frozen] });
            if d <= cfg.tol && (d == 0.0 || d >= p || sweep == cfg.max_picard_iters) {
                frozen += 1;
            } else {
                break;
            }
        }
        if frozen == cells {
            return Ok(WindowOutcome::Converged {
                sweeps: sweep,
                factor,
                max_iterate,
            });
        }
        if sweep == cfg.max_picard_iters {
            return Err(Error::ContractionFailure {
                iters: sweep,
                last_diff: diff,
                factor,
            });
        }
        prev_diff = diff;
    }
    unreachable!("max_picard_iters is at least one")
}

fn check_inputs(sys: &IdeSystem, x0: &SampledFn, input: &SampledFn, steps: usize) -> Result<(f64, usize)> {
    let h = x0.grid().step;
    let kd = cells_for(sys.r, h)?;
    let mut errs = Vec::new();
    if x0.len() != kd || (x0.grid().t_start + sys.r).abs() > 1e-9 * sys.r.max(1.0) {
        errs.push(format!(
            "initial condition must cover [-{}, 0) with {kd} cells, got [{}, {}) with {}",
            sys.r,
            x0.grid().t_start,
            x0.grid().t_end(),
            x0.len()
        ));
    }
    if x0.dim() != sys.n {
        errs.push(format!("initial condition has dimension {}, system {}", x0.dim(), sys.n));
    }
    if !input.grid().same_step(x0.grid()) {
        errs.push(format!("input step {} differs from state step {h}", input.grid().step));
    }
    if (input.grid().t_start + sys.r).abs() > 1e-9 * sys.r.max(1.0) {
        errs.push(format!("input must start at -{}", sys.r));
    }
    if input.len() < kd + steps {
        errs.push(format!("input has {} cells, need {} to reach the horizon", input.len(), kd + steps));
    }
    if input.dim() != sys.input_dim() {
        errs.push(format!("input has dimension {}, system expects {}", input.dim(), sys.input_dim()));
    }
    if errs.is_empty() {
        Ok((h, kd))
    } else {
        Err(Error::Validation(errs))
    }
}

/// One contraction window: the limit of `x^(k+1)(t) = f(x^(k)_t, w_t)` on `[0, delta)`.
pub fn picard_step(
    sys: &IdeSystem,
    base_history: &SampledFn,
    input: &SampledFn,
    delta: f64,
    cfg: &SolveConfig,
) -> Result<SampledFn> {
    let h = base_history.grid().step;
    let cells = cells_for(delta, h)?;
    let (_, kd) = check_inputs(sys, base_history, input, cells)?;
    let lay = Layout::new(sys, h, input.dim())?;
    let mut buf = base_history.values().to_vec();
    buf.resize((kd + cells) * sys.n, 0.0);
    match run_window(sys, &lay, &mut buf, input.values(), kd, cells, cfg)? {
        WindowOutcome::Converged { .. } => SampledFn::new(Grid::new(0.0, h, cells)?, sys.n, buf[kd * sys.n..].to_vec()),
        WindowOutcome::Escaped { time_cell, last_norm } => Err(Error::Evaluation(format!(
            "iterates escaped at t = {} (last finite norm {last_norm:.3e})",
            (time_cell - kd) as f64 * h
        ))),
    }
}

/// Marches contraction windows from `x0` on `[-r, 0)` until the horizon or an escape.
pub fn solve(sys: &IdeSystem, x0: &SampledFn, input: &SampledFn, cfg: &SolveConfig) -> Result<Trajectory> {
    if !(cfg.tol > 0.0) {
        return Err(Error::Validation(vec!["tol must be positive".into()]));
    }
    let h = x0.grid().step;
    let steps = cells_for(cfg.horizon, h).map_err(|_| {
        Error::Validation(vec![format!("horizon {} is not a whole number of steps {h}", cfg.horizon)])
    })?;
    let (_, kd) = check_inputs(sys, x0, input, steps)?;
    let lay = Layout::new(sys, h, input.dim())?;
    let n = sys.n;
    let in_dim = input.dim();
    let cell_norm = |k: usize| euclid(&input.values()[k * in_dim..(k + 1) * in_dim]);
    // running sup of the input seen so far, so that later input never alters earlier windows
    let mut seen = 0usize;
    let mut in_sup: f64 = 0.0;
    let mut buf = x0.values().to_vec();
    let mut windows = Vec::new();
    let mut escape = None;
    let mut done = 0usize;
    while done < steps {
        while seen <= kd + done {
            in_sup = in_sup.max(cell_norm(seen));
            seen += 1;
        }
        let hist = &buf[done * n..(done + kd) * n];
        let x_sup = hist.chunks_exact(n).map(euclid).fold(0.0, f64::max);
        let mut radius = x_sup.max(in_sup);
        let mut cells = 0;
        // shrink once for input inside the window; the result only depends on that input
        for _ in 0..2 {
            match contraction_cells(sys, radius, h) {
                Ok(c) => {
                    let c = if cells == 0 { c.min(steps - done) } else { c.min(cells) };
                    cells = c;
                    let ahead = (kd + done..kd + done + cells).map(cell_norm).fold(0.0, f64::max);
                    if ahead <= radius {
                        break;
                    }
                    radius = ahead;
                }
                Err(Error::GridTooCoarse { required_step, step }) => {
                    if done == 0 {
                        return Err(Error::GridTooCoarse { required_step, step });
                    }
                    escape = Some(Escape {
                        time: done as f64 * h,
                        last_finite_norm: x_sup,
                        kind: EscapeKind::WindowBelowStep { required_step },
                    });
                    cells = 0;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if cells == 0 {
            break;
        }
        buf.resize((kd + done + cells) * n, 0.0);
        let outcome = run_window(sys, &lay, &mut buf, input.values(), kd + done, cells, cfg);
        match outcome? {
            WindowOutcome::Converged {
                sweeps,
                factor,
                max_iterate,
            } => {
                windows.push(WindowLog {
                    index: windows.len(),
                    t_start: done as f64 * h,
                    r_bound: radius,
                    delta: cells as f64 * h,
                    cells,
                    sweeps,
                    factor,
                    max_iterate,
                });
                done += cells;
            }
            WindowOutcome::Escaped { time_cell, .. } => {
                buf.truncate((kd + done) * n);
                escape = Some(Escape {
                    time: (time_cell - kd) as f64 * h,
                    last_finite_norm: x_sup,
                    kind: EscapeKind::Threshold,
                });
                break;
            }
        }
    }
    let solution = SampledFn::new(Grid::new(-sys.r, h, kd + done)?, n, buf)?;
    Ok(Trajectory {
        step: h,
        r: sys.r,
        solution,
        input: input.clone(),
        t_max_reached: escape.as_ref().map(|_| done as f64 * h),
        escape,
        windows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{modulus, InputSpec, Rhs};
    use std::sync::Arc;

    fn lsd_input(k: usize, t: f64, d: f64, u: f64) -> SampledFn {
        let h = 1.0 / k as f64;
        let cells = k + (t / h).round() as usize;
        SampledFn::constant(Grid::new(-1.0, h, cells).unwrap(), &[d, u]).unwrap()
    }

    #[test]
    fn scalar_average_window_is_one_minus_h() {
        let sys = IdeSystem::scalar_average(0.5);
        let h = 1.0 / 64.0;
        assert!((contraction_window(&sys, 1.0, h).unwrap() - (1.0 - h)).abs() < 1e-15);
    }

    #[test]
    fn zero_functional_window_is_r() {
        let mut sys = IdeSystem::scalar_average(0.5);
        sys.moduli = Moduli::zero();
        assert_eq!(contraction_window(&sys, 3.0, 0.125).unwrap(), 1.0);
    }

    #[test]
    fn coarse_grid_reports_required_step() {
        let mut sys = IdeSystem::scalar_average(0.5);
        sys.moduli = Moduli::new(modulus(|_| 100.0), modulus(|_| 1.0), modulus(|t| t), None);
        match contraction_window(&sys, 1.0, 0.125) {
            Err(Error::GridTooCoarse { required_step, step }) => {
                assert!((required_step - 1.0 / 200.0).abs() < 1e-9);
                assert_eq!(step, 0.125);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn lipschitz_constants_scalar_average() {
        let sys = IdeSystem::scalar_average(0.5);
        let (g, p) = lipschitz_constants(&sys.moduli, 1.0, 3.0);
        assert!((g - 8.0).abs() < 1e-12);
        assert!((p - 2.0 * 2f64.ln()).abs() < 1e-12);
        let (g0, p0) = lipschitz_constants(&Moduli::zero(), 1.0, 1.0);
        assert_eq!((g0, p0), (1.0, 0.0));
    }

    #[test]
    fn zero_data_one_iteration() {
        let sys = IdeSystem::scalar_average(0.5);
        let k = 32;
        let h = 1.0 / k as f64;
        let x0 = SampledFn::zeros(Grid::new(-1.0, h, k).unwrap(), 1);
        let w = lsd_input(k, 1.0, 1.0, 0.0);
        let ext = picard_step(&sys, &x0, &w, 0.5, &SolveConfig::default()).unwrap();
        assert_eq!(ext.sup_norm(), 0.0);
        let traj = solve(&sys, &x0, &w, &SolveConfig::with_horizon(1.0)).unwrap();
        assert!(traj.windows.iter().all(|w| w.sweeps == 1));
    }

    #[test]
    fn scalar_average_matches_reduction() {
        let sys = IdeSystem::scalar_average(0.5);
        let k = 256;
        let h = 1.0 / k as f64;
        let x0 = SampledFn::constant(Grid::new(-1.0, h, k).unwrap(), &[1.0]).unwrap();
        let w = lsd_input(k, 1.0, 1.0, 0.0);
        let traj = solve(&sys, &x0, &w, &SolveConfig::with_horizon(1.0)).unwrap();
        let mut err: f64 = 0.0;
        for i in 0..k {
            let t = (i as f64 + 0.5) * h;
            err = err.max((traj.value_at_step(i)[0] - (1.0 - 0.5 * (0.5 * t).exp())).abs());
        }
        assert!(err < 2e-5, "err {err}");
        let mid = traj.value_at_step(k / 2)[0];
        assert!((mid - 0.35798).abs() < 1e-3);
        assert!(traj.max_factor() <= 0.5);
    }

    #[test]
    fn initial_segment_is_preserved() {
        let sys = IdeSystem::scalar_average(0.5);
        let k = 16;
        let x0 = SampledFn::from_scalar_fn(Grid::new(-1.0, 1.0 / 16.0, k).unwrap(), |t| t.sin()).unwrap();
        let traj = solve(&sys, &x0, &lsd_input(k, 2.0, 0.5, 0.1), &SolveConfig::with_horizon(2.0)).unwrap();
        assert_eq!(&traj.solution.values()[..k], x0.values());
        assert_eq!(traj.steps(), 32);
    }

    #[test]
    fn window_log_format() {
        let w = WindowLog {
            index: 3,
            t_start: 0.5,
            r_bound: 1.0,
            delta: 0.25,
            cells: 4,
            sweeps: 7,
            factor: 0.125,
            max_iterate: 2.0,
        };
        assert_eq!(w.to_string(), "window 3: R=1.000000e0, delta=2.500000e-1, sweeps=7, factor=1.250000e-1");
    }

    struct Quadratic;

    impl Rhs for Quadratic {
        fn state_dim(&self) -> usize {
            1
        }
        fn input_dim(&self) -> usize {
            1
        }
        fn horizon(&self) -> f64 {
            1.0
        }
        fn eval(&self, x: &SampledFn, _w: &SampledFn) -> Result<Vec<f64>> {
            let sq = SampledFn::new(*x.grid(), 1, x.values().iter().map(|v| v * v).collect())?;
            Ok(vec![1.0 + sq.integrate(-1.0, 0.0)?[0]])
        }
    }

    fn quadratic_system() -> IdeSystem {
        IdeSystem::external(
            Arc::new(Quadratic),
            Moduli::new(
                modulus(|r| 2.0 * r),
                modulus(|r| 2.0 * r),
                modulus(|r| 1.0 + r * r),
                None,
            ),
            InputSpec::default(),
            EvalPoint::LeftEdge,
        )
    }

    #[test]
    fn quadratic_escape_respects_lower_bound() {
        let sys = quadratic_system();
        assert!(!sys.moduli.audited);
        let k = 512;
        let h = 1.0 / k as f64;
        let x0 = SampledFn::constant(Grid::new(-1.0, h, k).unwrap(), &[1.0]).unwrap();
        let w = SampledFn::zeros(Grid::new(-1.0, h, 2 * k).unwrap(), 1);
        let traj = solve(&sys, &x0, &w, &SolveConfig::with_horizon(1.0)).unwrap();
        let esc = traj.escape.clone().expect("finite escape");
        let bound = escape_time_lower_bound(&sys, 1.0);
        assert!(esc.time >= bound, "{} < {bound}", esc.time);
        // continuous escape time is ln(3)/2
        assert!(esc.time < 0.6);
        assert_eq!(traj.t_max_reached, Some(esc.time));
    }

    #[test]
    fn escape_threshold_reported() {
        let sys = IdeSystem::scalar_average(3.0);
        let k = 64;
        let h = 1.0 / k as f64;
        let x0 = SampledFn::constant(Grid::new(-1.0, h, k).unwrap(), &[1.0]).unwrap();
        let cfg = SolveConfig {
            blowup_threshold: 1.5,
            ..SolveConfig::with_horizon(1.0)
        };
        let traj = solve(&sys, &x0, &lsd_input(k, 1.0, 1.0, 0.0), &cfg).unwrap();
        let esc = traj.escape.expect("escape");
        assert_eq!(esc.kind, EscapeKind::Threshold);
        assert!(esc.last_finite_norm <= 1.5);
        assert!(esc.time < 1.0);
    }

    #[test]
    fn invalid_inputs_list_every_problem() {
        let sys = IdeSystem::scalar_average(0.5);
        let x0 = SampledFn::zeros(Grid::new(-0.5, 0.125, 4).unwrap(), 2);
        let w = SampledFn::zeros(Grid::new(-1.0, 0.125, 4).unwrap(), 1);
        match solve(&sys, &x0, &w, &SolveConfig::with_horizon(1.0)) {
            Err(Error::Validation(v)) => assert!(v.len() >= 4, "{v:?}"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
