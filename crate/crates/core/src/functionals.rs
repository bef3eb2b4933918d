//! Right-hand sides `f(x_t, w_t)` of integral delay equations and their moduli.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperbolic::HyperbolicSystem;
use crate::rng::Stream;
use crate::sampled::{euclid, Grid, SampledFn, ALIGN_TOL};

/// Scalar kernel of one variable, closed under the operations the library needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kernel {
    Constant { value: f64 },
    /// `c0 + c1 s + c2 s^2 + ...`
    Polynomial { coeffs: Vec<f64> },
    /// `alpha * exp(beta s)`
    ExpAffine { alpha: f64, beta: f64 },
    Sum { terms: Vec<Kernel> },
}

impl Kernel {
    pub fn constant(value: f64) -> Kernel {
        Kernel::Constant { value }
    }

    pub fn exp_affine(alpha: f64, beta: f64) -> Kernel {
        Kernel::ExpAffine { alpha, beta }
    }

    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Kernel::Constant { value } => *value,
            Kernel::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c),
            Kernel::ExpAffine { alpha, beta } => alpha * (beta * s).exp(),
            Kernel::Sum { terms } => terms.iter().map(|k| k.eval(s)).sum(),
        }
    }

    /// Exact `∫_a^b k(s) ds`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        match self {
            Kernel::Constant { value } => value * (b - a),
            Kernel::Polynomial { coeffs } => {
                let prim = |s: f64| {
                    coeffs
                        .iter()
                        .enumerate()
                        .rev()
                        .fold(0.0, |acc, (i, c)| acc * s + c / (i + 1) as f64)
                        * s
                };
                prim(b) - prim(a)
            }
            Kernel::ExpAffine { alpha, beta } => {
                if *beta == 0.0 {
                    alpha * (b - a)
                } else {
                    alpha * (beta * a).exp() * (beta * (b - a)).exp_m1() / beta
                }
            }
            Kernel::Sum { terms } => terms.iter().map(|k| k.integral(a, b)).sum(),
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Kernel::Constant { value } => Some(*value),
            Kernel::Polynomial { coeffs } if coeffs.iter().skip(1).all(|c| *c == 0.0) => {
                Some(coeffs.first().copied().unwrap_or(0.0))
            }
            Kernel::ExpAffine { alpha, beta } if *beta == 0.0 || *alpha == 0.0 => Some(*alpha),
            Kernel::Sum { terms } => terms.iter().map(|k| k.as_constant()).sum(),
            _ => None,
        }
    }

    /// Upper bound on `|k'|` over `[a, b]`.
    pub fn lipschitz(&self, a: f64, b: f64) -> f64 {
        match self {
            Kernel::Constant { .. } => 0.0,
            Kernel::Polynomial { coeffs } => {
                let m = a.abs().max(b.abs());
                coeffs
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(i, c)| i as f64 * c.abs() * m.powi(i as i32 - 1))
                    .sum()
            }
            Kernel::ExpAffine { alpha, beta } => (alpha * beta).abs() * (beta * a).exp().max((beta * b).exp()),
            Kernel::Sum { terms } => terms.iter().map(|k| k.lipschitz(a, b)).sum(),
        }
    }

    /// Upper bound on `sup |k|` over `[a, b]` (exact for constants and exponentials).
    pub fn sup_abs(&self, a: f64, b: f64) -> f64 {
        if let Some(c) = self.as_constant() {
            return c.abs();
        }
        match self {
            Kernel::ExpAffine { alpha, beta } => alpha.abs() * (beta * a).exp().max((beta * b).exp()),
            _ => {
                let n = 2048;
                let dx = (b - a) / n as f64;
                let peak = (0..=n).map(|i| self.eval(a + i as f64 * dx).abs()).fold(0.0, f64::max);
                peak + 0.5 * dx * self.lipschitz(a, b)
            }
        }
    }

    /// Upper bound on `∫_a^b |k|` (exact for constants and exponentials).
    pub fn abs_integral(&self, a: f64, b: f64) -> f64 {
        if let Some(c) = self.as_constant() {
            return c.abs() * (b - a);
        }
        match self {
            Kernel::ExpAffine { .. } => self.integral(a, b).abs(),
            _ => {
                let n = 2048;
                let dx = (b - a) / n as f64;
                let lip = self.lipschitz(a, b);
                (0..n)
                    .map(|i| {
                        let lo = a + i as f64 * dx;
                        let peak = self.eval(lo).abs().max(self.eval(lo + dx).abs());
                        dx * (peak + 0.5 * dx * lip)
                    })
                    .sum()
            }
        }
    }
}

/// `∫_a^b k(s) f(s) ds` for cell-constant `f`, with `k` integrated exactly over each cell.
pub fn kernel_integral(kernel: &Kernel, f: &SampledFn, a: f64, b: f64) -> Result<Vec<f64>> {
    if let Some(c) = kernel.as_constant() {
        let mut v = f.integrate(a, b)?;
        v.iter_mut().for_each(|x| *x *= c);
        return Ok(v);
    }
    let g = f.grid();
    let ua = g.position(a);
    let ub = g.position(b);
    if a > b || ua < 0.0 || ub > g.count as f64 {
        return Err(Error::Domain(format!("[{a}, {b}] not inside [{}, {}]", g.t_start, g.t_end())));
    }
    let mut out = vec![0.0; f.dim()];
    if ua == ub {
        return Ok(out);
    }
    let first = ua.floor() as usize;
    let last = (ub.ceil() as usize).max(first + 1) - 1;
    for k in first..=last {
        let lo = if k == first { a } else { g.cell_lo(k) };
        let hi = if k == last { b } else { g.cell_hi(k) };
        let w = kernel.integral(lo, hi);
        for (o, v) in out.iter_mut().zip(f.value(k)) {
            *o += w * v;
        }
    }
    Ok(out)
}

pub type Modulus = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

pub fn modulus(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Modulus {
    Arc::new(f)
}

/// Split-Lipschitz and bound moduli `N`, `M`, `a` and the optional gain `b`.
#[derive(Clone)]
pub struct Moduli {
    pub n: Modulus,
    pub m: Modulus,
    pub a: Modulus,
    pub b: Option<Modulus>,
    pub audited: bool,
}

impl Moduli {
    /// `a` is replaced by `max(a(t), t)`.
    pub fn new(n: Modulus, m: Modulus, a: Modulus, b: Option<Modulus>) -> Moduli {
        let raw = a;
        Moduli {
            n,
            m,
            a: Arc::new(move |t| raw(t).max(t)),
            b,
            audited: true,
        }
    }

    pub fn zero() -> Moduli {
        Moduli::new(modulus(|_| 0.0), modulus(|_| 0.0), modulus(|_| 0.0), Some(modulus(|_| 0.0)))
    }

    /// Spot check that every modulus is finite and nondecreasing along a ladder of arguments.
    pub fn check_monotone(&self) -> Result<()> {
        let ladder: Vec<f64> = (0..40).map(|i| if i == 0 { 0.0 } else { 1e-3 * 1.5f64.powi(i) }).collect();
        let mut named: Vec<(&str, &Modulus)> = vec![("N", &self.n), ("M", &self.m), ("a", &self.a)];
        if let Some(b) = &self.b {
            named.push(("b", b));
        }
        for (name, f) in named {
            let vals: Vec<f64> = ladder.iter().map(|t| f(*t)).collect();
            if vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::Certificate(format!("modulus {name} is not finite and nonnegative")));
            }
            if vals.windows(2).any(|w| w[1] < w[0] * (1.0 - 1e-12)) {
                return Err(Error::Certificate(format!("modulus {name} is not nondecreasing")));
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Moduli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Moduli")
            .field("N(1)", &(self.n)(1.0))
            .field("M(1)", &(self.m)(1.0))
            .field("a(1)", &(self.a)(1.0))
            .field("has_b", &self.b.is_some())
            .field("audited", &self.audited)
            .finish()
    }
}

/// Input layout: `w = (d_1..d_m1, u_1..u_m2)` with `|d_j| <= d_bounds[j]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    #[serde(default)]
    pub d_bounds: Vec<f64>,
    #[serde(default)]
    pub u_dim: usize,
}

impl InputSpec {
    pub fn dim(&self) -> usize {
        self.d_bounds.len() + self.u_dim
    }

    pub fn d_max(&self) -> f64 {
        euclid(&self.d_bounds)
    }
}

/// Where the present instant sits relative to the cell being computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalPoint {
    /// Value of cell k is `f` at the cell midpoint; the history handed to `f` is cells
    /// `k-K..=k` on `[-r - h/2, h/2)`, so cell k enters its own right-hand side.
    Midpoint,
    /// Value of cell k is `f` at the cell's left edge; the history is cells `k-K..k` on `[-r, 0)`.
    LeftEdge,
}

/// Caller-supplied right-hand side. `x` covers at least `[-r, 0)` and `w` holds the
/// input window ending with the current cell; the present instant is 0.
pub trait Rhs: Send + Sync {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn horizon(&self) -> f64;
    fn eval(&self, x: &SampledFn, w: &SampledFn) -> Result<Vec<f64>>;
}

/// Linear point delays plus a distributed kernel:
/// `f = Σ A_i x(-τ_i) + B_i w(-τ_i) + ∫_{-r}^0 k(s) (C x(s) + D w(s)) ds`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointPlusKernel {
    pub n: usize,
    pub r: f64,
    #[serde(default)]
    pub inputs: InputSpec,
    #[serde(default)]
    pub delays: Vec<f64>,
    #[serde(default)]
    pub point_state: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub point_input: Vec<Vec<Vec<f64>>>,
    pub kernel: Kernel,
    #[serde(default)]
    pub kernel_state: Vec<Vec<f64>>,
    #[serde(default)]
    pub kernel_input: Vec<Vec<f64>>,
}

/// `x(t) = d(t) ∫_{-r}^0 q(s) x(t+s) ds + u(t)` with `|d| <= d_bound`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearScalarDistributed {
    pub q: Kernel,
    pub r: f64,
    #[serde(default = "one")]
    pub d_bound: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone)]
pub enum RhsDescriptor {
    PointPlusKernel(PointPlusKernel),
    LinearScalarDistributed(LinearScalarDistributed),
    ConvertedHyperbolic(Arc<HyperbolicSystem>),
    External(Arc<dyn Rhs>),
}

impl fmt::Debug for RhsDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RhsDescriptor::PointPlusKernel(p) => f.debug_tuple("PointPlusKernel").field(p).finish(),
            RhsDescriptor::LinearScalarDistributed(l) => f.debug_tuple("LinearScalarDistributed").field(l).finish(),
            RhsDescriptor::ConvertedHyperbolic(h) => f.debug_tuple("ConvertedHyperbolic").field(h).finish(),
            RhsDescriptor::External(_) => f.write_str("External"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct IdeSystem {
    pub n: usize,
    pub r: f64,
    pub inputs: InputSpec,
    pub rhs: RhsDescriptor,
    pub moduli: Moduli,
    pub eval_point: EvalPoint,
}

impl IdeSystem {
    pub fn linear_scalar_distributed(desc: LinearScalarDistributed) -> Result<IdeSystem> {
        if !(desc.r > 0.0) {
            return Err(Error::Domain("delay horizon must be positive".into()));
        }
        let r = desc.r;
        let rhs = RhsDescriptor::LinearScalarDistributed(desc);
        let moduli = compute_moduli(&rhs, r)?;
        Ok(IdeSystem {
            n: 1,
            r,
            inputs: InputSpec {
                d_bounds: vec![match &rhs {
                    RhsDescriptor::LinearScalarDistributed(d) => d.d_bound,
                    _ => unreachable!(),
                }],
                u_dim: 1,
            },
            rhs,
            moduli,
            eval_point: EvalPoint::Midpoint,
        })
    }

    /// `x(t) = d(t) ∫ q0 x(t+s) ds + u(t)` over `[-1, 0]`, with `|d| <= 1`.
    pub fn scalar_average(q0: f64) -> IdeSystem {
        IdeSystem::linear_scalar_distributed(LinearScalarDistributed {
            q: Kernel::constant(q0),
            r: 1.0,
            d_bound: 1.0,
        })
        .expect("valid built-in system")
    }

    pub fn point_plus_kernel(desc: PointPlusKernel) -> Result<IdeSystem> {
        validate_ppk(&desc)?;
        let (n, r, inputs) = (desc.n, desc.r, desc.inputs.clone());
        let rhs = RhsDescriptor::PointPlusKernel(desc);
        let moduli = compute_moduli(&rhs, r)?;
        Ok(IdeSystem {
            n,
            r,
            inputs,
            rhs,
            moduli,
            eval_point: EvalPoint::Midpoint,
        })
    }

    /// Wraps a caller evaluator; the moduli are trusted and flagged unaudited.
    pub fn external(rhs: Arc<dyn Rhs>, moduli: Moduli, inputs: InputSpec, eval_point: EvalPoint) -> IdeSystem {
        let mut moduli = moduli;
        moduli.audited = false;
        IdeSystem {
            n: rhs.state_dim(),
            r: rhs.horizon(),
            inputs,
            rhs: RhsDescriptor::External(rhs),
            moduli,
            eval_point,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.dim().max(1)
    }

    /// Grid of the history window handed to the right-hand side for a time step `h`.
    pub fn history_grid(&self, h: f64) -> Result<Grid> {
        let k = cells_for(self.r, h)?;
        match self.eval_point {
            EvalPoint::Midpoint => Grid::new(-self.r - 0.5 * h, h, k + 1),
            EvalPoint::LeftEdge => Grid::new(-self.r, h, k),
        }
    }

    /// Grid of the input window handed to the right-hand side (always ends with the current cell).
    pub fn input_grid(&self, h: f64) -> Result<Grid> {
        let k = cells_for(self.r, h)?;
        match self.eval_point {
            EvalPoint::Midpoint => Grid::new(-self.r - 0.5 * h, h, k + 1),
            EvalPoint::LeftEdge => Grid::new(-self.r, h, k + 1),
        }
    }

    pub fn eval(&self, x: &SampledFn, w: &SampledFn) -> Result<Vec<f64>> {
        eval_rhs(self, x, w)
    }
}

/// Number of cells of width `h` in `r`, or an alignment error.
pub fn cells_for(r: f64, h: f64) -> Result<usize> {
    let u = r / h;
    let n = u.round();
    if n < 1.0 || (u - n).abs() > ALIGN_TOL * n {
        return Err(Error::Alignment(format!("{r} is not a whole number of steps {h}")));
    }
    Ok(n as usize)
}

fn validate_ppk(p: &PointPlusKernel) -> Result<()> {
    let mut errs = Vec::new();
    if !(p.r > 0.0) {
        errs.push("r must be positive".to_string());
    }
    let m = p.inputs.dim();
    for w in p.delays.windows(2) {
        if w[1] < w[0] {
            errs.push("delays must be sorted ascending".into());
        }
    }
    for (i, tau) in p.delays.iter().enumerate() {
        if !(*tau > 0.0 && *tau <= p.r * (1.0 + ALIGN_TOL)) {
            errs.push(format!("delay {i} = {tau} outside (0, r]"));
        }
    }
    if p.point_state.len() != p.delays.len() {
        errs.push(format!("{} delays but {} point_state matrices", p.delays.len(), p.point_state.len()));
    }
    if !p.point_input.is_empty() && p.point_input.len() != p.delays.len() {
        errs.push("point_input must be empty or have one matrix per delay".into());
    }
    let check = |mat: &Vec<Vec<f64>>, cols: usize, name: &str, errs: &mut Vec<String>| {
        if mat.is_empty() {
            return;
        }
        if mat.len() != p.n || mat.iter().any(|row| row.len() != cols) {
            errs.push(format!("{name} must be {} x {cols}", p.n));
        }
    };
    for (i, a) in p.point_state.iter().enumerate() {
        check(a, p.n, &format!("point_state[{i}]"), &mut errs);
    }
    for (i, b) in p.point_input.iter().enumerate() {
        check(b, m, &format!("point_input[{i}]"), &mut errs);
    }
    check(&p.kernel_state, p.n, "kernel_state", &mut errs);
    check(&p.kernel_input, m, "kernel_input", &mut errs);
    if errs.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(errs))
    }
}

fn frob(mat: &[Vec<f64>]) -> f64 {
    mat.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

fn mat_vec_add(out: &mut [f64], mat: &[Vec<f64>], v: &[f64], scale: f64) {
    for (o, row) in out.iter_mut().zip(mat) {
        *o += scale * row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// Evaluates `f(x, w)` with the present instant at 0.
pub fn eval_rhs(sys: &IdeSystem, history: &SampledFn, input: &SampledFn) -> Result<Vec<f64>> {
    let g = history.grid();
    if g.position(-sys.r) < 0.0 || g.position(0.0) > g.count as f64 {
        return Err(Error::Domain(format!(
            "history [{}, {}) does not cover [-{}, 0)",
            g.t_start,
            g.t_end(),
            sys.r
        )));
    }
    if history.dim() != sys.n {
        return Err(Error::Domain(format!("history has dimension {}, system {}", history.dim(), sys.n)));
    }
    let out = match &sys.rhs {
        RhsDescriptor::LinearScalarDistributed(lsd) => {
            let w = input.current();
            let d = w.first().copied().unwrap_or(1.0);
            let u = w.get(1).copied().unwrap_or(0.0);
            let integral = kernel_integral(&lsd.q, history, -lsd.r, 0.0)?[0];
            vec![d * integral + u]
        }
        RhsDescriptor::PointPlusKernel(p) => {
            let mut out = vec![0.0; p.n];
            for (i, tau) in p.delays.iter().enumerate() {
                let x = history.at(-tau)?;
                mat_vec_add(&mut out, &p.point_state[i], x, 1.0);
                if let Some(b) = p.point_input.get(i) {
                    if !b.is_empty() {
                        mat_vec_add(&mut out, b, input.at(-tau)?, 1.0);
                    }
                }
            }
            if !p.kernel_state.is_empty() {
                let ix = kernel_integral(&p.kernel, history, -p.r, 0.0)?;
                mat_vec_add(&mut out, &p.kernel_state, &ix, 1.0);
            }
            if !p.kernel_input.is_empty() {
                let iw = kernel_integral(&p.kernel, input, -p.r, 0.0)?;
                mat_vec_add(&mut out, &p.kernel_input, &iw, 1.0);
            }
            out
        }
        RhsDescriptor::ConvertedHyperbolic(h) => h.closure(history, input)?,
        RhsDescriptor::External(rhs) => rhs.eval(history, input)?,
    };
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Evaluation("right-hand side returned a non-finite value".into()));
    }
    Ok(out)
}

pub fn compute_moduli(desc: &RhsDescriptor, r: f64) -> Result<Moduli> {
    match desc {
        RhsDescriptor::LinearScalarDistributed(lsd) => {
            let d = lsd.d_bound.abs();
            let sup_q = lsd.q.sup_abs(-lsd.r, 0.0);
            let int_q = lsd.q.abs_integral(-lsd.r, 0.0);
            let (nn, mm) = (d * sup_q, d * int_q);
            Ok(Moduli::new(
                modulus(move |_| nn),
                modulus(move |_| mm),
                modulus(move |t| mm * t + t),
                Some(modulus(move |t| mm * t + t)),
            ))
        }
        RhsDescriptor::PointPlusKernel(p) => {
            let sup_k = p.kernel.sup_abs(-p.r, 0.0);
            let int_k = p.kernel.abs_integral(-p.r, 0.0);
            let c = frob(&p.kernel_state);
            let dn = frob(&p.kernel_input);
            let point_n: f64 = p.delays.iter().zip(&p.point_state).map(|(tau, a)| frob(a) / tau).sum();
            let point_m: f64 = p.point_state.iter().map(|a| frob(a)).sum();
            let point_in: f64 = p.point_input.iter().map(|b| frob(b)).sum();
            let nn = sup_k * c + point_n;
            let mm = point_m + int_k * c;
            let bound = point_m + point_in + int_k * (c + dn);
            let _ = r;
            Ok(Moduli::new(
                modulus(move |_| nn),
                modulus(move |_| mm),
                modulus(move |t| bound * t),
                Some(modulus(move |t| bound * t)),
            ))
        }
        RhsDescriptor::ConvertedHyperbolic(h) => Ok(h.moduli()),
        RhsDescriptor::External(_) => Err(Error::Certificate(
            "external right-hand sides carry caller moduli; use IdeSystem::external".into(),
        )),
    }
}

/// Shapes used for random histories.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HistoryShape {
    Uniform,
    Spike,
    LastSpike,
    Constant,
    SingleChannel,
}

pub const HISTORY_SHAPES: [HistoryShape; 5] = [
    HistoryShape::Uniform,
    HistoryShape::Spike,
    HistoryShape::LastSpike,
    HistoryShape::Constant,
    HistoryShape::SingleChannel,
];

/// Random cell-constant history on `grid` with sup-norm exactly `norm` (unless `norm` is 0).
pub fn random_history(rng: &mut Stream, grid: Grid, dim: usize, norm: f64, shape: HistoryShape) -> SampledFn {
    let n = grid.count;
    let mut vals = vec![0.0; n * dim];
    match shape {
        HistoryShape::Uniform => vals.iter_mut().for_each(|v| *v = rng.range(-1.0, 1.0)),
        HistoryShape::Spike | HistoryShape::LastSpike => {
            let k = if shape == HistoryShape::LastSpike { n - 1 } else { rng.index(n) };
            let base = 0.2 * rng.uniform();
            vals.iter_mut().for_each(|v| *v = base * rng.range(-1.0, 1.0));
            for j in 0..dim {
                vals[k * dim + j] = rng.range(-1.0, 1.0);
            }
        }
        HistoryShape::Constant => {
            let c: Vec<f64> = (0..dim).map(|_| rng.range(-1.0, 1.0)).collect();
            for k in 0..n {
                vals[k * dim..(k + 1) * dim].copy_from_slice(&c);
            }
        }
        HistoryShape::SingleChannel => {
            let j = rng.index(dim);
            let c = rng.sign();
            for k in 0..n {
                vals[k * dim + j] = c;
            }
        }
    }
    let sup = vals.chunks_exact(dim).map(euclid).fold(0.0, f64::max);
    if sup > 0.0 {
        vals.iter_mut().for_each(|v| *v *= norm / sup);
    }
    SampledFn::new(grid, dim, vals).expect("finite random history")
}

/// Random input window: `d` within its bounds (and within `radius`), `u` with sup-norm at most `radius`.
pub fn random_input(rng: &mut Stream, grid: Grid, inputs: &InputSpec, radius: f64, constant: bool) -> SampledFn {
    let dim = inputs.dim().max(1);
    let draw = |rng: &mut Stream| -> Vec<f64> {
        let mut w = Vec::with_capacity(dim);
        for b in &inputs.d_bounds {
            let lim = b.min(radius);
            w.push(rng.range(-lim, lim));
        }
        let u: Vec<f64> = (0..inputs.u_dim).map(|_| rng.range(-1.0, 1.0)).collect();
        let un = euclid(&u);
        let target = radius * rng.uniform();
        w.extend(u.iter().map(|x| if un > 0.0 { x * target / un } else { 0.0 }));
        if w.is_empty() {
            w.push(0.0);
        }
        w
    };
    let mut vals = Vec::with_capacity(grid.count * dim);
    let first = draw(rng);
    for k in 0..grid.count {
        if constant || k == 0 {
            vals.extend_from_slice(&first);
        } else {
            vals.extend(draw(rng));
        }
    }
    let mut f = SampledFn::new(grid, dim, vals).expect("finite random input");
    if euclid(f.current()) > radius {
        f = f.scaled(radius / euclid(f.current()));
    }
    f
}

/// Piecewise-constant random signal: each block of `piece` cells draws `d` uniformly within its
/// bounds and each `u` component uniformly in `[-u_amp, u_amp]`.
pub fn random_signal(rng: &mut Stream, grid: Grid, inputs: &InputSpec, u_amp: f64, piece: usize) -> SampledFn {
    let dim = inputs.dim().max(1);
    let piece = piece.max(1);
    let mut vals = Vec::with_capacity(grid.count * dim);
    let mut cur = vec![0.0; dim];
    for k in 0..grid.count {
        if k % piece == 0 {
            for (j, b) in inputs.d_bounds.iter().enumerate() {
                cur[j] = rng.range(-b, *b);
            }
            for j in 0..inputs.u_dim {
                cur[inputs.d_bounds.len() + j] = rng.range(-u_amp, u_amp);
            }
        }
        vals.extend_from_slice(&cur);
    }
    SampledFn::new(grid, dim, vals).expect("finite random signal")
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct AuditReport {
    pub checks: usize,
    pub violations: usize,
    /// Largest observed `lhs / rhs`.
    pub worst_ratio: f64,
    pub witness: Option<String>,
}

impl AuditReport {
    pub fn record(&mut self, lhs: f64, rhs: f64, what: impl FnOnce() -> String) {
        self.checks += 1;
        let ratio = if rhs > 0.0 {
            lhs / rhs
        } else if lhs > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        if ratio > self.worst_ratio {
            self.worst_ratio = ratio;
        }
        if lhs > rhs * (1.0 + 1e-10) + 1e-13 {
            self.violations += 1;
            if self.witness.is_none() {
                self.witness = Some(what());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

fn split_sups(diff: &SampledFn, h: f64) -> (f64, f64) {
    let g = diff.grid();
    let (mut recent, mut old) = (0.0f64, 0.0f64);
    for k in 0..g.count {
        let (lo, hi) = (g.cell_lo(k), g.cell_hi(k));
        let v = euclid(diff.value(k));
        let tol = ALIGN_TOL * g.step;
        if hi > -h + tol && lo < -tol {
            recent = recent.max(v);
        }
        if lo < -h - tol {
            old = old.max(v);
        }
    }
    (recent, old)
}

/// Randomized audit of the split-Lipschitz inequality and the bound `|f| <= a(R)`,
/// plus `|f| <= b(max(|x|, |u|))` when `b` is declared.
pub fn audit_h1(sys: &IdeSystem, radius: f64, cells: usize, pairs: usize, seed: u64) -> Result<AuditReport> {
    let h = sys.r / cells as f64;
    let hg = sys.history_grid(h)?;
    let ig = sys.input_grid(h)?;
    let mut rng = Stream::new(seed, crate::rng::streams::AUDIT);
    let mut rep = AuditReport::default();
    let nn = (sys.moduli.n)(radius);
    let mm = (sys.moduli.m)(radius);
    let a = (sys.moduli.a)(radius);
    let ladder: Vec<usize> = (0..10).map(|i| 1 + i * (cells - 1).max(1) / 10).collect();
    for p in 0..pairs {
        let shape = HISTORY_SHAPES[p % HISTORY_SHAPES.len()];
        let norm = radius * rng.uniform();
        let x = random_history(&mut rng, hg, sys.n, norm, shape);
        let w = random_input(&mut rng, ig, &sys.inputs, radius, p % 2 == 0);
        let fx = eval_rhs(sys, &x, &w)?;
        rep.record(euclid(&fx), a, || format!("bound a(R) at pair {p}"));
        if let Some(b) = &sys.moduli.b {
            let u_sup = (0..ig.count)
                .map(|k| euclid(&w.value(k)[sys.inputs.d_bounds.len()..]))
                .fold(0.0, f64::max);
            rep.record(euclid(&fx), b(x.sup_norm().max(u_sup)), || format!("gain b at pair {p}"));
        }
        for &m in &ladder {
            let hh = m as f64 * h;
            let y = if p % 3 == 0 {
                let norm = radius * rng.uniform();
                random_history(&mut rng, hg, sys.n, norm, HistoryShape::Uniform)
            } else {
                let mut vals = x.values().to_vec();
                for k in 0..hg.count {
                    if hg.cell_hi(k) > -hh + ALIGN_TOL * h {
                        for j in 0..sys.n {
                            vals[k * sys.n + j] = rng.range(-radius, radius) / (sys.n as f64).sqrt();
                        }
                    }
                }
                SampledFn::new(hg, sys.n, vals)?
            };
            let fy = eval_rhs(sys, &y, &w)?;
            let diff = x.sub(&y)?;
            let (recent, old) = split_sups(&diff, hh);
            let lhs = euclid(&fx.iter().zip(&fy).map(|(a, b)| a - b).collect::<Vec<_>>());
            rep.record(lhs, nn * hh * recent + mm * old, || {
                format!("split Lipschitz at pair {p}, h = {hh}: |f(x)-f(y)| = {lhs:.6e}, recent {recent:.3e}, old {old:.3e}")
            });
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lsd_window(k: usize, value: f64, d: f64, u: f64) -> (IdeSystem, SampledFn, SampledFn) {
        let sys = IdeSystem::scalar_average(0.5);
        let h = 1.0 / k as f64;
        let x = SampledFn::constant(sys.history_grid(h).unwrap(), &[value]).unwrap();
        let w = SampledFn::constant(sys.input_grid(h).unwrap(), &[d, u]).unwrap();
        (sys, x, w)
    }

    #[test]
    fn kernel_integrals_exact() {
        let p = Kernel::Polynomial {
            coeffs: vec![1.0, 2.0, 3.0],
        };
        assert!((p.integral(0.0, 1.0) - 3.0).abs() < 1e-15);
        let e = Kernel::exp_affine(2.0, 1.0);
        assert!((e.integral(0.0, 1.0) - 2.0 * (1f64.exp() - 1.0)).abs() < 1e-14);
        let s = Kernel::Sum {
            terms: vec![p.clone(), e.clone()],
        };
        assert!((s.eval(0.5) - p.eval(0.5) - e.eval(0.5)).abs() < 1e-15);
        assert!((Kernel::exp_affine(1.0, 1e-12).integral(0.0, 1.0) - 1.0).abs() < 1e-11);
    }

    #[test]
    fn kernel_bounds_are_upper_bounds() {
        let p = Kernel::Polynomial {
            coeffs: vec![0.1, -1.0, 1.0],
        };
        let sup = p.sup_abs(-1.0, 0.0);
        assert!(sup >= 2.1 && sup < 2.11);
        let ai = p.abs_integral(-1.0, 0.0);
        let exact = 0.1 + 0.5 + 1.0 / 3.0;
        assert!(ai >= exact && ai < exact + 1e-2);
    }

    #[test]
    fn scalar_average_rhs_on_unit_history() {
        let (sys, x, w) = lsd_window(64, 1.0, 1.0, 0.0);
        let v = eval_rhs(&sys, &x, &w).unwrap();
        assert!((v[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_history_zero_input_gives_zero() {
        let (sys, x, w) = lsd_window(16, 0.0, 0.7, 0.0);
        assert_eq!(eval_rhs(&sys, &x, &w).unwrap(), vec![0.0]);
        let ppk = IdeSystem::point_plus_kernel(PointPlusKernel {
            n: 2,
            r: 1.0,
            inputs: InputSpec {
                d_bounds: vec![],
                u_dim: 1,
            },
            delays: vec![0.25, 1.0],
            point_state: vec![vec![vec![0.1, 0.2], vec![0.0, 0.3]], vec![vec![0.1, 0.0], vec![0.0, 0.1]]],
            point_input: vec![],
            kernel: Kernel::exp_affine(0.5, 1.0),
            kernel_state: vec![vec![0.2, 0.0], vec![0.1, 0.1]],
            kernel_input: vec![vec![1.0], vec![0.0]],
        })
        .unwrap();
        let h = 1.0 / 16.0;
        let x = SampledFn::zeros(ppk.history_grid(h).unwrap(), 2);
        let w = SampledFn::zeros(ppk.input_grid(h).unwrap(), 1);
        assert_eq!(eval_rhs(&ppk, &x, &w).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn short_history_rejected() {
        let sys = IdeSystem::scalar_average(0.5);
        let x = SampledFn::constant(Grid::new(-0.5, 0.125, 4).unwrap(), &[1.0]).unwrap();
        let w = SampledFn::constant(Grid::new(-0.5, 0.125, 5).unwrap(), &[1.0, 0.0]).unwrap();
        assert!(matches!(eval_rhs(&sys, &x, &w), Err(Error::Domain(_))));
    }

    #[test]
    fn scalar_average_moduli() {
        let sys = IdeSystem::scalar_average(0.5);
        for r in [0.0, 0.3, 1.0, 17.0] {
            assert_eq!((sys.moduli.n)(r), 0.5);
            assert_eq!((sys.moduli.m)(r), 0.5);
            assert!(((sys.moduli.a)(r) - 1.5 * r).abs() < 1e-15);
        }
        sys.moduli.check_monotone().unwrap();
    }

    #[test]
    fn zero_functional_moduli() {
        let sys = IdeSystem::point_plus_kernel(PointPlusKernel {
            n: 1,
            r: 1.0,
            inputs: InputSpec::default(),
            delays: vec![0.5],
            point_state: vec![vec![vec![0.0]]],
            point_input: vec![],
            kernel: Kernel::constant(0.0),
            kernel_state: vec![vec![0.0]],
            kernel_input: vec![],
        })
        .unwrap();
        assert_eq!((sys.moduli.n)(3.0), 0.0);
        assert_eq!((sys.moduli.m)(3.0), 0.0);
        assert_eq!((sys.moduli.a)(3.0), 3.0);
    }

    #[test]
    fn point_delay_reads_containing_cell() {
        let sys = IdeSystem::point_plus_kernel(PointPlusKernel {
            n: 1,
            r: 1.0,
            inputs: InputSpec::default(),
            delays: vec![0.25],
            point_state: vec![vec![vec![1.0]]],
            point_input: vec![],
            kernel: Kernel::constant(0.0),
            kernel_state: vec![],
            kernel_input: vec![],
        })
        .unwrap();
        let h = 0.125;
        let g = sys.history_grid(h).unwrap();
        let x = SampledFn::from_scalar_fn(g, |t| t).unwrap();
        let w = SampledFn::zeros(sys.input_grid(h).unwrap(), 1);
        // midpoint convention: the cell centred on -0.25
        assert!((eval_rhs(&sys, &x, &w).unwrap()[0] + 0.25).abs() < 1e-15);
    }

    #[test]
    fn invalid_ppk_lists_all_errors() {
        let err = IdeSystem::point_plus_kernel(PointPlusKernel {
            n: 1,
            r: 1.0,
            inputs: InputSpec::default(),
            delays: vec![0.7, 0.5, 2.0],
            point_state: vec![vec![vec![1.0]]],
            point_input: vec![],
            kernel: Kernel::constant(0.0),
            kernel_state: vec![],
            kernel_input: vec![],
        })
        .unwrap_err();
        match err {
            Error::Validation(v) => assert!(v.len() >= 3),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn audit_scalar_average() {
        let sys = IdeSystem::scalar_average(0.5);
        let rep = audit_h1(&sys, 2.0, 32, 1000, 7).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert!(rep.checks >= 10_000);
    }

    #[test]
    fn audit_point_plus_kernel() {
        let sys = IdeSystem::point_plus_kernel(PointPlusKernel {
            n: 2,
            r: 1.0,
            inputs: InputSpec {
                d_bounds: vec![],
                u_dim: 1,
            },
            delays: vec![0.25, 1.0],
            point_state: vec![vec![vec![0.3, 0.2], vec![0.0, 0.3]], vec![vec![0.1, 0.0], vec![0.0, 0.1]]],
            point_input: vec![vec![vec![1.0], vec![0.5]], vec![vec![0.0], vec![0.0]]],
            kernel: Kernel::Polynomial {
                coeffs: vec![0.5, 1.0],
            },
            kernel_state: vec![vec![0.2, 0.0], vec![0.1, 0.1]],
            kernel_input: vec![vec![1.0], vec![0.0]],
        })
        .unwrap();
        let rep = audit_h1(&sys, 1.5, 32, 400, 11).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn audit_catches_understated_moduli() {
        let mut sys = IdeSystem::scalar_average(0.9);
        sys.moduli = Moduli::new(modulus(|_| 0.01), modulus(|_| 0.01), modulus(|t| t), None);
        let rep = audit_h1(&sys, 1.0, 16, 50, 3).unwrap();
        assert!(!rep.passed());
        assert!(rep.witness.is_some());
    }

    #[test]
    fn random_history_has_requested_norm() {
        let mut rng = Stream::new(1, 1);
        let g = Grid::new(-1.0, 0.125, 8).unwrap();
        for shape in HISTORY_SHAPES {
            let x = random_history(&mut rng, g, 2, 0.75, shape);
            assert!((x.sup_norm() - 0.75).abs() < 1e-12, "{shape:?}");
        }
    }
}
