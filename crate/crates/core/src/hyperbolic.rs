//! Transport PDE `x_t + c x_z = a(p, z) x + g(z)·p`, its closure system in `(p, v)`,
//! profile reconstruction along characteristics, and an upwind reference march.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{
    modulus, random_history, HistoryShape, IdeSystem, InputSpec, Kernel, Moduli, RhsDescriptor, EvalPoint,
    AuditReport,
};
use crate::ide_core::{lipschitz_constants, solve, SolveConfig, Trajectory};
use crate::rng::Stream;
use crate::sampled::{Grid, SampledFn, ALIGN_TOL};

/// `a(p, z) = base(z) + Σ p_gains[i] p_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub base: Kernel,
    #[serde(default)]
    pub p_gains: Vec<f64>,
}

impl Coefficient {
    pub fn zero() -> Coefficient {
        Coefficient {
            base: Kernel::constant(0.0),
            p_gains: Vec::new(),
        }
    }

    pub fn eval(&self, p: &[f64], z: f64) -> f64 {
        self.base.eval(z) + self.p_gains.iter().zip(p).map(|(a, b)| a * b).sum::<f64>()
    }

    fn gain_norm(&self) -> f64 {
        self.p_gains.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Multiplier of a boundary term: a constant or `gain * w[channel]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scale {
    Const { value: f64 },
    Input { channel: usize, gain: f64 },
}

impl Scale {
    fn eval(&self, w: &[f64]) -> f64 {
        match self {
            Scale::Const { value } => *value,
            Scale::Input { channel, gain } => gain * w.get(*channel).copied().unwrap_or(0.0),
        }
    }

    /// Bound on `|scale|` when `|w| <= radius`; `full_d` uses the whole disturbance range.
    fn bound(&self, radius: f64, inputs: &InputSpec, full_d: bool) -> f64 {
        match self {
            Scale::Const { value } => value.abs(),
            Scale::Input { channel, gain } => gain.abs() * channel_bound(*channel, radius, inputs, full_d),
        }
    }
}

fn channel_bound(channel: usize, radius: f64, inputs: &InputSpec, full_d: bool) -> f64 {
    match inputs.d_bounds.get(channel) {
        Some(b) if full_d => *b,
        Some(b) => b.min(radius),
        None => radius,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Term {
    /// `scale * x(z)` with `z` in `(0, 1]`.
    Point { z: f64, scale: Scale },
    /// `scale * ∫_0^1 k(z) x(z) dz`.
    Integral { kernel: Kernel, scale: Scale },
    /// `gain * w[channel]`.
    Input { channel: usize, gain: f64 },
}

/// Sum of terms, a functional of the input value and the profile on `(0, 1]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFunctional {
    #[serde(default)]
    pub terms: Vec<Term>,
}

impl BoundaryFunctional {
    pub fn zero() -> BoundaryFunctional {
        BoundaryFunctional { terms: Vec::new() }
    }

    pub fn point(z: f64) -> BoundaryFunctional {
        BoundaryFunctional {
            terms: vec![Term::Point {
                z,
                scale: Scale::Const { value: 1.0 },
            }],
        }
    }

    pub fn input(channel: usize) -> BoundaryFunctional {
        BoundaryFunctional {
            terms: vec![Term::Input { channel, gain: 1.0 }],
        }
    }

    /// Point values use the left-open cell convention of the profile grid, so `x(1)` is the last cell.
    pub fn eval(&self, w: &[f64], profile: &SampledFn) -> f64 {
        let g = profile.grid();
        let mut out = 0.0;
        for term in &self.terms {
            out += match term {
                Term::Point { z, scale } => {
                    let u = g.position(*z);
                    let i = (u.ceil() as usize).clamp(1, g.count) - 1;
                    scale.eval(w) * profile.value(i)[0]
                }
                Term::Integral { kernel, scale } => {
                    let s = match kernel.as_constant() {
                        Some(c) => c * g.step * profile.values().iter().sum::<f64>(),
                        None => (0..g.count)
                            .map(|i| kernel.integral(g.cell_lo(i), g.cell_hi(i)) * profile.value(i)[0])
                            .sum(),
                    };
                    scale.eval(w) * s
                }
                Term::Input { channel, gain } => gain * w.get(*channel).copied().unwrap_or(0.0),
            };
        }
        out
    }

    /// Split-Lipschitz modulus `L(R)` of this functional.
    pub fn lipschitz(&self, radius: f64, inputs: &InputSpec) -> f64 {
        self.terms
            .iter()
            .map(|t| match t {
                Term::Point { z, scale } => scale.bound(radius, inputs, false) / z,
                Term::Integral { kernel, scale } => {
                    scale.bound(radius, inputs, false) * kernel.sup_abs(0.0, 1.0).max(kernel.abs_integral(0.0, 1.0))
                }
                Term::Input { .. } => 0.0,
            })
            .sum()
    }

    /// Bound modulus `σ(R)`: `|functional| <= σ(R)` for `|w|, |x| <= R`.
    pub fn bound(&self, radius: f64, inputs: &InputSpec, full_d: bool) -> f64 {
        self.terms
            .iter()
            .map(|t| match t {
                Term::Point { scale, .. } => scale.bound(radius, inputs, full_d) * radius,
                Term::Integral { kernel, scale } => {
                    scale.bound(radius, inputs, full_d) * kernel.abs_integral(0.0, 1.0) * radius
                }
                Term::Input { channel, gain } => gain.abs() * channel_bound(*channel, radius, inputs, full_d),
            })
            .sum()
    }

    fn has_disturbance_offset(&self, inputs: &InputSpec) -> bool {
        self.terms
            .iter()
            .any(|t| matches!(t, Term::Input { channel, .. } if *channel < inputs.d_bounds.len()))
    }

    fn validate(&self, name: &str, inputs: &InputSpec, errs: &mut Vec<String>) {
        let dim = inputs.dim();
        for term in &self.terms {
            let channel = match term {
                Term::Point { z, scale } => {
                    if !(*z > 0.0 && *z <= 1.0) {
                        errs.push(format!("{name}: point evaluation at z = {z} outside (0, 1]"));
                    }
                    match scale {
                        Scale::Input { channel, .. } => Some(*channel),
                        _ => None,
                    }
                }
                Term::Integral { scale, .. } => match scale {
                    Scale::Input { channel, .. } => Some(*channel),
                    _ => None,
                },
                Term::Input { channel, .. } => Some(*channel),
            };
            if let Some(ch) = channel {
                if ch >= dim {
                    errs.push(format!("{name}: input channel {ch} but only {dim} input channels declared"));
                }
            }
        }
    }
}

/// `x_t + c x_z = a(p, z) x + Σ g_i(z) p_i`, `p_i = K_i(w, x)`, `x(t, 0) = G(w, x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicSystem {
    pub c: f64,
    pub a: Coefficient,
    pub g: Vec<Kernel>,
    pub k: Vec<BoundaryFunctional>,
    pub boundary: BoundaryFunctional,
    #[serde(default)]
    pub inputs: InputSpec,
}

/// `(p, v)` histories on `[-1/c, 0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PvHistory {
    pub p: SampledFn,
    pub v: SampledFn,
}

impl PvHistory {
    /// Single function with components `(p_1..p_N, v)`.
    pub fn combined(&self) -> SampledFn {
        let (np, k) = (self.p.dim(), self.p.len());
        let mut vals = Vec::with_capacity(k * (np + 1));
        for i in 0..k {
            vals.extend_from_slice(self.p.value(i));
            vals.push(self.v.value(i)[0]);
        }
        SampledFn::new(*self.p.grid(), np + 1, vals).expect("finite history")
    }

    pub fn split(hist: &SampledFn) -> PvHistory {
        let np = hist.dim() - 1;
        let mut p = Vec::with_capacity(hist.len() * np);
        let mut v = Vec::with_capacity(hist.len());
        for i in 0..hist.len() {
            let row = hist.value(i);
            p.extend_from_slice(&row[..np]);
            v.push(row[np]);
        }
        PvHistory {
            p: SampledFn::new(*hist.grid(), np.max(1), p).expect("finite history"),
            v: SampledFn::new(*hist.grid(), 1, v).expect("finite history"),
        }
    }
}

/// Output of `solve_pde`.
#[derive(Clone, Debug)]
pub struct PdeRun {
    pub trajectory: Trajectory,
    pub snapshots: Vec<(f64, SampledFn)>,
    /// `(t, sup_z |x(t, z)|)` per time step.
    pub sup_trace: Vec<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct UpwindRun {
    pub snapshots: Vec<(f64, SampledFn)>,
    pub sup_trace: Vec<(f64, f64)>,
    pub escape_time: Option<f64>,
}

const GAUSS3: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 5.0 / 9.0),
    (0.0, 8.0 / 9.0),
    (0.774_596_669_241_483_4, 5.0 / 9.0),
];

fn phi(mu: f64, len: f64) -> f64 {
    if mu == 0.0 {
        len
    } else {
        (mu * len).exp_m1() / mu
    }
}

impl HyperbolicSystem {
    /// The recirculation plant `x_t + x_z = g x(t, 1)`, `x(t, 0) = u(t)`.
    pub fn recirculation(g: f64) -> HyperbolicSystem {
        HyperbolicSystem {
            c: 1.0,
            a: Coefficient::zero(),
            g: vec![Kernel::constant(g)],
            k: vec![BoundaryFunctional::point(1.0)],
            boundary: BoundaryFunctional::input(0),
            inputs: InputSpec {
                d_bounds: vec![],
                u_dim: 1,
            },
        }
    }

    /// `x_t + x_z = g p`, `p = d ∫ x dz`, `x(t, 0) = 0`, `|d| <= 1`.
    pub fn integral_feedback(g: f64) -> HyperbolicSystem {
        HyperbolicSystem {
            c: 1.0,
            a: Coefficient::zero(),
            g: vec![Kernel::constant(g)],
            k: vec![BoundaryFunctional {
                terms: vec![Term::Integral {
                    kernel: Kernel::constant(1.0),
                    scale: Scale::Input { channel: 0, gain: 1.0 },
                }],
            }],
            boundary: BoundaryFunctional::zero(),
            inputs: InputSpec {
                d_bounds: vec![1.0],
                u_dim: 0,
            },
        }
    }

    /// Transport with speed `c` and boundary value `u`.
    pub fn pure_transport(c: f64) -> HyperbolicSystem {
        HyperbolicSystem {
            c,
            a: Coefficient::zero(),
            g: vec![Kernel::constant(0.0)],
            k: vec![BoundaryFunctional::zero()],
            boundary: BoundaryFunctional::input(0),
            inputs: InputSpec {
                d_bounds: vec![],
                u_dim: 1,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.c > 0.0 && self.c.is_finite()) {
            errs.push(format!("transport speed c = {} must be positive", self.c));
        }
        if self.k.is_empty() {
            errs.push("at least one p-channel (K functional) is required".into());
        }
        if self.g.len() != self.k.len() {
            errs.push(format!("{} source kernels g but {} functionals K", self.g.len(), self.k.len()));
        }
        if self.a.p_gains.len() > self.k.len() {
            errs.push("coefficient a has more p gains than p-channels".into());
        }
        for (i, k) in self.k.iter().enumerate() {
            k.validate(&format!("K_{}", i + 1), &self.inputs, &mut errs);
        }
        self.boundary.validate("G", &self.inputs, &mut errs);
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }

    pub fn channels(&self) -> usize {
        self.k.len()
    }

    pub fn delay(&self) -> f64 {
        1.0 / self.c
    }

    /// Time step for `cells` profile cells (unit CFL: `c h = 1/cells`).
    pub fn time_step(&self, cells: usize) -> f64 {
        1.0 / (self.c * cells as f64)
    }

    pub fn profile_grid(cells: usize) -> Grid {
        Grid::new(0.0, 1.0 / cells as f64, cells).expect("positive cell count")
    }

    pub fn history_grid(&self, cells: usize) -> Grid {
        Grid::new(-self.delay(), self.time_step(cells), cells).expect("positive cell count")
    }

    fn fast_path(&self) -> Option<(f64, Vec<f64>)> {
        let a0 = self.a.base.as_constant()?;
        let g = self.g.iter().map(|k| k.as_constant()).collect::<Option<Vec<f64>>>()?;
        Some((a0, g))
    }

    fn gains_dot(&self, p: &[f64]) -> f64 {
        self.a.p_gains.iter().zip(p).map(|(a, b)| a * b).sum()
    }

    fn check_history(&self, hist: &SampledFn) -> Result<usize> {
        let kd = hist.len();
        let h = hist.grid().step;
        if hist.dim() != self.channels() + 1 {
            return Err(Error::Domain(format!(
                "closure history has dimension {}, expected {}",
                hist.dim(),
                self.channels() + 1
            )));
        }
        if (self.c * h * kd as f64 - 1.0).abs() > ALIGN_TOL * kd as f64 {
            return Err(Error::Alignment(format!(
                "history of {kd} cells with step {h} does not span 1/c = {}",
                self.delay()
            )));
        }
        Ok(kd)
    }

    /// Profile `A(p)v + B(p)` sampled at the midpoints of the profile cells.
    pub fn profile(&self, hist: &SampledFn) -> Result<SampledFn> {
        let kd = self.check_history(hist)?;
        let h = hist.grid().step;
        let np = self.channels();
        let mut out = Vec::with_capacity(kd);
        if let Some((a0, g)) = self.fast_path() {
            let mut s_prev = 0.0f64;
            let mut acc = 0.0;
            for i in 1..=kd {
                let row = hist.value(kd - i);
                let (p, v) = (&row[..np], row[np]);
                let mu = a0 + self.gains_dot(p);
                let gp: f64 = g.iter().zip(p).map(|(a, b)| a * b).sum();
                let e = s_prev.exp();
                out.push((s_prev + 0.5 * mu * h).exp() * v + e * phi(mu, 0.5 * h) * gp + acc);
                acc += e * phi(mu, h) * gp;
                s_prev += mu * h;
            }
        } else {
            let pre = self.gain_prefix(hist);
            let hz = 1.0 / kd as f64;
            for i in 1..=kd {
                let z = (i as f64 - 0.5) * hz;
                out.push(self.op_a_raw(hist, &pre, z)? + self.op_b_raw(hist, &pre, z)?);
            }
        }
        SampledFn::new(HyperbolicSystem::profile_grid(kd), 1, out)
    }

    /// `pre[m] = Σ_{j<=m} gains·p` over the last `m` cells, times the step.
    fn gain_prefix(&self, hist: &SampledFn) -> Vec<f64> {
        let kd = hist.len();
        let h = hist.grid().step;
        let np = self.channels();
        let mut pre = vec![0.0; kd + 1];
        for m in 1..=kd {
            pre[m] = pre[m - 1] + self.gains_dot(&hist.value(kd - m)[..np]) * h;
        }
        pre
    }

    /// Cell (counted back from the present, 1-based) containing `s < 0`.
    fn cell_back(&self, s: f64, h: f64, kd: usize) -> Result<usize> {
        let u = -s / h;
        let n = u.round();
        let u = if (u - n).abs() <= ALIGN_TOL * n.max(1.0) { n } else { u };
        let m = u.ceil() as usize;
        if m == 0 || m > kd {
            return Err(Error::Domain(format!("s = {s} outside [-1/c, 0)")));
        }
        Ok(m)
    }

    /// `∫_s^0 a(p(q), z + c q) dq`.
    fn exponent(&self, hist: &SampledFn, pre: &[f64], z: f64, s: f64) -> Result<f64> {
        let kd = hist.len();
        let h = hist.grid().step;
        let base = self.a.base.integral(z + self.c * s, z) / self.c;
        if self.a.p_gains.is_empty() || s == 0.0 {
            return Ok(base);
        }
        let m = self.cell_back(s, h, kd)?;
        let mu = self.gains_dot(&hist.value(kd - m)[..self.channels()]);
        Ok(base + pre[m - 1] + mu * (-((m - 1) as f64) * h - s))
    }

    fn op_a_raw(&self, hist: &SampledFn, pre: &[f64], z: f64) -> Result<f64> {
        let kd = hist.len();
        let s0 = -z / self.c;
        let m = self.cell_back(s0, hist.grid().step, kd)?;
        let v = hist.value(kd - m)[self.channels()];
        Ok(self.exponent(hist, pre, z, s0)?.exp() * v)
    }

    fn op_b_raw(&self, hist: &SampledFn, pre: &[f64], z: f64) -> Result<f64> {
        let kd = hist.len();
        let h = hist.grid().step;
        let np = self.channels();
        let s0 = -z / self.c;
        let m0 = self.cell_back(s0, h, kd)?;
        let fast = self.fast_path();
        let mut total = 0.0;
        for m in (1..=m0).rev() {
            let lo = if m == m0 { s0 } else { -(m as f64) * h };
            let hi = -((m - 1) as f64) * h;
            if hi <= lo {
                continue;
            }
            let p = &hist.value(kd - m)[..np];
            if let Some((a0, g)) = &fast {
                let mu = a0 + self.gains_dot(p);
                let gp: f64 = g.iter().zip(p).map(|(a, b)| a * b).sum();
                total += self.exponent(hist, pre, z, hi)?.exp() * phi(mu, hi - lo) * gp;
            } else {
                let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
                for (x, wt) in GAUSS3 {
                    let s = mid + half * x;
                    let gp: f64 = self.g.iter().zip(p).map(|(k, pi)| k.eval(z + self.c * s) * pi).sum();
                    total += wt * half * self.exponent(hist, pre, z, s)?.exp() * gp;
                }
            }
        }
        Ok(total)
    }

    /// `(A(p)v)(z) = exp(∫_{-z/c}^0 a(p(q), z + c q) dq) v(-z/c)`.
    pub fn op_a(&self, p: &SampledFn, v: &SampledFn, z: f64) -> Result<f64> {
        let hist = PvHistory {
            p: p.clone(),
            v: v.clone(),
        }
        .combined();
        self.check_history(&hist)?;
        let pre = self.gain_prefix(&hist);
        self.op_a_raw(&hist, &pre, z)
    }

    /// `(B(p))(z) = ∫_{-z/c}^0 exp(∫_s^0 a(p(q), z + c q) dq) g(z + c s)·p(s) ds`.
    pub fn op_b(&self, p: &SampledFn, z: f64) -> Result<f64> {
        let v = SampledFn::zeros(*p.grid(), 1);
        let hist = PvHistory { p: p.clone(), v }.combined();
        self.check_history(&hist)?;
        let pre = self.gain_prefix(&hist);
        self.op_b_raw(&hist, &pre, z)
    }

    /// Closure right-hand side `(K_1..K_N, G)(w, A(p)v + B(p))`.
    pub fn closure(&self, hist: &SampledFn, input: &SampledFn) -> Result<Vec<f64>> {
        let profile = self.profile(hist)?;
        let w = input.current();
        let mut out: Vec<f64> = self.k.iter().map(|k| k.eval(w, &profile)).collect();
        out.push(self.boundary.eval(w, &profile));
        Ok(out)
    }

    pub fn to_ide(self: &Arc<Self>) -> Result<IdeSystem> {
        self.validate()?;
        Ok(IdeSystem {
            n: self.channels() + 1,
            r: self.delay(),
            inputs: self.inputs.clone(),
            rhs: RhsDescriptor::ConvertedHyperbolic(Arc::clone(self)),
            moduli: self.moduli(),
            eval_point: EvalPoint::LeftEdge,
        })
    }

    fn l_total(&self, radius: f64) -> f64 {
        self.k.iter().map(|k| k.lipschitz(radius, &self.inputs)).sum::<f64>()
            + self.boundary.lipschitz(radius, &self.inputs)
    }

    fn sigma_total(&self, radius: f64, full_d: bool) -> f64 {
        self.k.iter().map(|k| k.bound(radius, &self.inputs, full_d)).sum::<f64>()
            + self.boundary.bound(radius, &self.inputs, full_d)
    }

    /// `(M̃ as a function, C, L_a)` from the coefficient and source kernels.
    fn profile_constants(&self) -> (f64, f64, f64) {
        let base_sup = self.a.base.sup_abs(0.0, 1.0);
        let c_g = self.g.iter().map(|k| k.sup_abs(0.0, 1.0).powi(2)).sum::<f64>().sqrt();
        (base_sup, c_g, self.a.gain_norm())
    }

    /// Profile bound `K(R) = (1 + C/c) exp(M̃(R)/c) R`.
    pub fn profile_bound(&self, radius: f64) -> f64 {
        let (base_sup, c_g, la) = self.profile_constants();
        let mt = base_sup + la * radius;
        (1.0 + c_g / self.c) * (mt / self.c).exp() * radius
    }

    /// Moduli of the closure system.
    pub fn moduli(&self) -> Moduli {
        let sys = self.clone();
        let (base_sup, c_g, la) = self.profile_constants();
        let c = self.c;
        let parts = move |r: f64| {
            let mt = base_sup + la * r;
            let b1 = (mt / c).exp();
            let b2 = (r * la + c_g + c_g * r * la / c) * (3.0 * mt / c).exp();
            let kk = (1.0 + c_g / c) * (mt / c).exp() * r;
            (b1, b2, kk)
        };
        let (s1, s2, s3, s4) = (sys.clone(), sys.clone(), sys.clone(), sys.clone());
        let n = modulus(move |r| {
            let (b1, b2, kk) = parts(r);
            s1.l_total(kk) * (c * b1 + 2.0 * b2)
        });
        let m = modulus(move |r| {
            let (b1, b2, kk) = parts(r);
            s2.l_total(kk) * (b1 + b2 / c)
        });
        let a = modulus(move |r| s3.sigma_total(parts(r).2, false));
        let offset = self.k.iter().any(|k| k.has_disturbance_offset(&self.inputs))
            || self.boundary.has_disturbance_offset(&self.inputs);
        let b = (!offset).then(|| modulus(move |r| s4.sigma_total(parts(r).2, true)));
        Moduli::new(n, m, a, b)
    }

    /// `(Q(s), P(s))` with `sup_z |x_t - y_t| <= Q e^{P t} sup_z |x_0 - y_0|`.
    pub fn profile_lipschitz_constants(&self, s: f64) -> (f64, f64) {
        let (base_sup, c_g, la) = self.profile_constants();
        let mt = base_sup + la * s;
        let b1 = (mt / self.c).exp();
        let b2 = (s * la + c_g + c_g * s * la / self.c) * (3.0 * mt / self.c).exp();
        let (g, p) = lipschitz_constants(&self.moduli(), self.delay(), s);
        ((b1 + b2 / self.c) * g * (base_sup / self.c).exp(), p)
    }

    /// History `(p ≡ 0, v)` whose reconstruction at `t = 0` is `x0`.
    pub fn initial_v(&self, x0: &SampledFn) -> Result<PvHistory> {
        let kd = x0.len();
        let zg = x0.grid();
        if x0.dim() != 1 || zg.t_start != 0.0 || (zg.step * kd as f64 - 1.0).abs() > ALIGN_TOL * kd as f64 {
            return Err(Error::Alignment("initial profile must be scalar on (0, 1]".into()));
        }
        let tg = self.history_grid(kd);
        let mut v = vec![0.0; kd];
        for i in 1..=kd {
            let z = (i as f64 - 0.5) * zg.step;
            let e = self.a.base.integral(0.0, z) / self.c;
            v[kd - i] = (-e).exp() * x0.value(i - 1)[0];
        }
        Ok(PvHistory {
            p: SampledFn::zeros(tg, self.channels()),
            v: SampledFn::new(tg, 1, v)?,
        })
    }

    /// Profile at an aligned time `t` of a closure trajectory started from `x0`.
    pub fn reconstruct(&self, traj: &Trajectory, x0: &SampledFn, t: f64) -> Result<SampledFn> {
        if t == 0.0 {
            return Ok(x0.clone());
        }
        self.profile(&traj.history_at(t)?)
    }

    fn input_validation(&self, x0: &SampledFn, w: &SampledFn, horizon: f64) -> Result<(usize, usize)> {
        let kd = x0.len();
        let h = self.time_step(kd);
        let mut errs = Vec::new();
        if let Err(Error::Validation(v)) = self.validate() {
            errs.extend(v);
        }
        let steps = (horizon / h).round();
        if steps < 1.0 || (horizon / h - steps).abs() > ALIGN_TOL * steps {
            errs.push(format!("horizon {horizon} is not a whole number of steps 1/(c K) = {h}"));
        }
        if !w.grid().same_step(&self.history_grid(kd)) {
            errs.push(format!("input step {} must equal 1/(c K) = {h}", w.grid().step));
        }
        if w.dim() != self.inputs.dim().max(1) {
            errs.push(format!("input has dimension {}, system expects {}", w.dim(), self.inputs.dim().max(1)));
        }
        if errs.is_empty() {
            Ok((kd, steps as usize))
        } else {
            Err(Error::Validation(errs))
        }
    }

    /// Solves the closure system from `x0` and reconstructs profiles.
    pub fn solve_pde(
        self: &Arc<Self>,
        x0: &SampledFn,
        w: &SampledFn,
        cfg: &SolveConfig,
        snapshot_times: &[f64],
    ) -> Result<PdeRun> {
        let (kd, steps) = self.input_validation(x0, w, cfg.horizon)?;
        let ide = self.to_ide()?;
        let hist0 = self.initial_v(x0)?.combined();
        let trajectory = solve(&ide, &hist0, w, cfg)?;
        let h = self.time_step(kd);
        let done = trajectory.steps();
        let mut snapshots = Vec::new();
        for &t in snapshot_times {
            let k = (t / h).round();
            if (t / h - k).abs() > ALIGN_TOL * k.max(1.0) {
                return Err(Error::Validation(vec![format!("snapshot time {t} is not a multiple of the step {h}")]));
            }
            if (k as usize) <= done {
                snapshots.push((t, self.reconstruct(&trajectory, x0, k * h)?));
            }
        }
        let stride = if self.fast_path().is_some() { 1 } else { (kd / 8).max(1) };
        let mut sup_trace = Vec::new();
        for k in (0..=done.min(steps)).step_by(stride) {
            let t = k as f64 * h;
            sup_trace.push((t, self.reconstruct(&trajectory, x0, t)?.sup_norm()));
        }
        Ok(PdeRun {
            trajectory,
            snapshots,
            sup_trace,
        })
    }

    /// First-order upwind march at unit CFL; `observe(step, profile)` sees every time level.
    pub fn upwind_march(
        &self,
        x0: &SampledFn,
        w: &SampledFn,
        horizon: f64,
        threshold: f64,
        mut observe: impl FnMut(usize, &SampledFn),
    ) -> Result<Option<f64>> {
        let (kd, steps) = self.input_validation(x0, w, horizon)?;
        let h = self.time_step(kd);
        let hz = 1.0 / kd as f64;
        let np = self.channels();
        let mut x = x0.clone();
        observe(0, &x);
        for n in 0..steps {
            let wn = w.value(kd + n);
            let p: Vec<f64> = self.k.iter().map(|k| k.eval(wn, &x)).collect();
            let v = self.boundary.eval(wn, &x);
            let src = |z: f64, xv: f64| {
                self.a.eval(&p, z) * xv + self.g.iter().zip(&p[..np]).map(|(g, pi)| g.eval(z) * pi).sum::<f64>()
            };
            let mut next = Vec::with_capacity(kd);
            next.push(v + h * src(0.0, v));
            for j in 0..kd - 1 {
                let xv = x.value(j)[0];
                next.push(xv + h * src((j as f64 + 0.5) * hz, xv));
            }
            if next.iter().any(|v| !v.is_finite() || v.abs() > threshold) {
                return Ok(Some(n as f64 * h));
            }
            x = SampledFn::new(*x0.grid(), 1, next)?;
            observe(n + 1, &x);
        }
        Ok(None)
    }

    pub fn upwind_reference(
        &self,
        x0: &SampledFn,
        w: &SampledFn,
        horizon: f64,
        snapshot_times: &[f64],
        threshold: f64,
    ) -> Result<UpwindRun> {
        let h = self.time_step(x0.len());
        let wanted: Vec<usize> = snapshot_times.iter().map(|t| (t / h).round() as usize).collect();
        let mut snapshots = Vec::new();
        let mut sup_trace = Vec::new();
        let escape_time = self.upwind_march(x0, w, horizon, threshold, |n, x| {
            sup_trace.push((n as f64 * h, x.sup_norm()));
            for (t, k) in snapshot_times.iter().zip(&wanted) {
                if *k == n {
                    snapshots.push((*t, x.clone()));
                }
            }
        })?;
        Ok(UpwindRun {
            snapshots,
            sup_trace,
            escape_time,
        })
    }

    /// Largest sup-norm gap between the reconstructed and upwind profiles over all time levels.
    pub fn equivalence_discrepancy(self: &Arc<Self>, x0: &SampledFn, w: &SampledFn, cfg: &SolveConfig) -> Result<f64> {
        let mut upwind = Vec::new();
        self.upwind_march(x0, w, cfg.horizon, cfg.blowup_threshold, |_, x| upwind.push(x.clone()))?;
        let ide = self.to_ide()?;
        let traj = solve(&ide, &self.initial_v(x0)?.combined(), w, cfg)?;
        let h = traj.step;
        let mut worst: f64 = 0.0;
        for (k, up) in upwind.iter().enumerate().take(traj.steps() + 1) {
            let prof = self.reconstruct(&traj, x0, k as f64 * h)?;
            worst = worst.max(prof.max_abs_diff(up)?);
        }
        Ok(worst)
    }

    /// Randomized audit of the split-Lipschitz and bound inequalities for `K_i`, `G`.
    pub fn audit_a1(&self, radius: f64, cells: usize, samples: usize, seed: u64) -> Result<AuditReport> {
        let zg = HyperbolicSystem::profile_grid(cells);
        let mut rng = Stream::new(seed, crate::rng::streams::AUDIT);
        let mut rep = AuditReport::default();
        let l = self.l_total(radius);
        let sig = self.sigma_total(radius, false);
        let shapes = [HistoryShape::Uniform, HistoryShape::Spike, HistoryShape::Constant];
        let eval_all = |w: &[f64], x: &SampledFn| -> Vec<f64> {
            let mut v: Vec<f64> = self.k.iter().map(|k| k.eval(w, x)).collect();
            v.push(self.boundary.eval(w, x));
            v
        };
        for s in 0..samples {
            let norm = radius * rng.uniform();
            let x = random_history(&mut rng, zg, 1, norm, shapes[s % 3]);
            let norm = radius * rng.uniform();
            let y = random_history(&mut rng, zg, 1, norm, shapes[(s + 1) % 3]);
            let wv: Vec<f64> = (0..self.inputs.dim().max(1))
                .map(|j| {
                    let b = channel_bound(j, radius, &self.inputs, false);
                    rng.range(-b, b) / (self.inputs.dim().max(1) as f64).sqrt()
                })
                .collect();
            let fx = eval_all(&wv, &x);
            let fy = eval_all(&wv, &y);
            rep.record(fx.iter().map(|v| v.abs()).sum(), sig, || format!("bound at sample {s}"));
            let lhs: f64 = fx.iter().zip(&fy).map(|(a, b)| (a - b).abs()).sum();
            for m in [1usize, 2, cells / 4, cells / 2, cells - 1] {
                let hh = m.max(1) as f64 / cells as f64;
                let (mut near, mut far) = (0.0f64, 0.0f64);
                for i in 0..cells {
                    let d = (x.value(i)[0] - y.value(i)[0]).abs();
                    if zg.cell_lo(i) < hh - ALIGN_TOL * zg.step {
                        near = near.max(d);
                    }
                    if zg.cell_hi(i) > hh + ALIGN_TOL * zg.step {
                        far = far.max(d);
                    }
                }
                rep.record(lhs, l * hh * near + l * far, || format!("split Lipschitz at sample {s}, h = {hh}"));
            }
        }
        Ok(rep)
    }
}

/// `(Σ |f - g|^μ Δz)^(1/μ)`.
pub fn l_mu_distance(f: &SampledFn, g: &SampledFn, mu: f64) -> Result<f64> {
    if !(mu >= 1.0) {
        return Err(Error::Domain(format!("mu = {mu} must be at least 1")));
    }
    let d = f.sub(g)?;
    let step = f.grid().step;
    let s: f64 = d
        .values()
        .chunks_exact(d.dim())
        .map(|v| crate::sampled::euclid(v).powf(mu) * step)
        .sum();
    Ok(s.powf(1.0 / mu))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zgrid(k: usize) -> Grid {
        HyperbolicSystem::profile_grid(k)
    }

    fn zero_input(sys: &HyperbolicSystem, k: usize, horizon: f64) -> SampledFn {
        let h = sys.time_step(k);
        let cells = k + (horizon / h).round() as usize;
        SampledFn::zeros(Grid::new(-sys.delay(), h, cells).unwrap(), sys.inputs.dim().max(1))
    }

    fn history(sys: &HyperbolicSystem, k: usize, p: impl Fn(f64) -> f64, v: impl Fn(f64) -> f64) -> SampledFn {
        let tg = sys.history_grid(k);
        PvHistory {
            p: SampledFn::from_scalar_fn(tg, p).unwrap(),
            v: SampledFn::from_scalar_fn(tg, v).unwrap(),
        }
        .combined()
    }

    #[test]
    fn op_a_pure_read_back() {
        let sys = HyperbolicSystem::recirculation(0.0);
        let k = 16;
        let hist = PvHistory::split(&history(&sys, k, |_| 0.3, |t| t * t));
        for i in 1..=k {
            let z = i as f64 / k as f64;
            let expect = hist.v.at(-z).unwrap()[0];
            assert_eq!(sys.op_a(&hist.p, &hist.v, z).unwrap(), expect);
        }
    }

    #[test]
    fn op_a_constant_coefficient() {
        let mut sys = HyperbolicSystem::recirculation(0.0);
        sys.a.base = Kernel::constant(0.7);
        let k = 32;
        let hist = PvHistory::split(&history(&sys, k, |_| 1.0, |t| t.cos()));
        for i in [1usize, 5, 32] {
            let z = i as f64 / k as f64;
            let expect = (0.7 * z).exp() * hist.v.at(-z).unwrap()[0];
            assert!((sys.op_a(&hist.p, &hist.v, z).unwrap() - expect).abs() < 1e-14);
        }
        let zero_v = SampledFn::zeros(*hist.v.grid(), 1);
        assert_eq!(sys.op_a(&hist.p, &zero_v, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn op_b_cases() {
        let sys = HyperbolicSystem::recirculation(0.4);
        let k = 32;
        let hist = PvHistory::split(&history(&sys, k, |_| 2.5, |_| 0.0));
        for i in [1usize, 7, 32] {
            let z = i as f64 / k as f64;
            assert!((sys.op_b(&hist.p, z).unwrap() - 0.4 * 2.5 * z).abs() < 1e-14);
        }
        let zp = SampledFn::zeros(*hist.p.grid(), 1);
        assert_eq!(sys.op_b(&zp, 0.75).unwrap(), 0.0);
        // g ∫_{-z}^0 p for a varying p
        let hist = PvHistory::split(&history(&sys, k, |t| t.exp(), |_| 0.0));
        let z = 0.5;
        let expect = 0.4 * hist.p.integrate(-z, 0.0).unwrap()[0];
        assert!((sys.op_b(&hist.p, z).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn fast_profile_matches_operators() {
        let mut sys = HyperbolicSystem::recirculation(1.3);
        sys.a = Coefficient {
            base: Kernel::constant(-0.4),
            p_gains: vec![0.2],
        };
        let k = 24;
        let hist = history(&sys, k, |t| (3.0 * t).sin(), |t| 1.0 + t);
        let prof = sys.profile(&hist).unwrap();
        let pv = PvHistory::split(&hist);
        for i in 1..=k {
            let z = (i as f64 - 0.5) / k as f64;
            let direct = sys.op_a(&pv.p, &pv.v, z).unwrap() + sys.op_b(&pv.p, z).unwrap();
            assert!((prof.value(i - 1)[0] - direct).abs() < 1e-13);
        }
    }

    #[test]
    fn general_profile_agrees_with_fast_on_constant_kernels() {
        let fast = HyperbolicSystem::recirculation(0.8);
        let mut slow = fast.clone();
        slow.g = vec![Kernel::Polynomial {
            coeffs: vec![0.8, 0.0],
        }];
        slow.a.base = Kernel::Sum {
            terms: vec![Kernel::exp_affine(0.0, 1.0)],
        };
        assert!(slow.fast_path().is_some());
        slow.a.base = Kernel::Polynomial {
            coeffs: vec![0.0, 1e-300],
        };
        assert!(slow.fast_path().is_none());
        let k = 16;
        let hist = history(&fast, k, |t| t.cos(), |t| t * t);
        let a = fast.profile(&hist).unwrap();
        let b = slow.profile(&hist).unwrap();
        assert!(a.max_abs_diff(&b).unwrap() < 1e-12);
    }

    #[test]
    fn integral_feedback_closure_formula() {
        let g = 1.7;
        let sys = HyperbolicSystem::integral_feedback(g);
        let k = 64;
        let hist = history(&sys, k, |t| 1.0 + t * t, |t| (2.0 * t).sin());
        let tg = sys.history_grid(k);
        let w = SampledFn::constant(Grid::new(-1.0, tg.step, k + 1).unwrap(), &[0.6]).unwrap();
        let out = sys.closure(&hist, &w).unwrap();
        // p = d ∫ v + g d ∫ (1 + s) p(s) ds, v = 0; the half-cell weighting is exact for (1 + s)
        let pv = PvHistory::split(&hist);
        let iv = pv.v.integrate(-1.0, 0.0).unwrap()[0];
        let ip = crate::functionals::kernel_integral(
            &Kernel::Polynomial {
                coeffs: vec![1.0, 1.0],
            },
            &pv.p,
            -1.0,
            0.0,
        )
        .unwrap()[0];
        assert!((out[0] - 0.6 * (iv + g * ip)).abs() < 1e-13, "{} vs {}", out[0], 0.6 * (iv + g * ip));
        assert_eq!(out[1], 0.0);
    }

    #[test]
    fn recirculation_closure_formula() {
        let g = 1.0;
        let sys = HyperbolicSystem::recirculation(g);
        let k = 32;
        let hist = history(&sys, k, |t| t.exp(), |t| 3.0 + t);
        let tg = sys.history_grid(k);
        let w = SampledFn::constant(Grid::new(-1.0, tg.step, k + 1).unwrap(), &[0.25]).unwrap();
        let out = sys.closure(&hist, &w).unwrap();
        let pv = PvHistory::split(&hist);
        let h = tg.step;
        // x(1): v at the oldest cell plus g times half the oldest p cell and all later ones
        let expect = pv.v.value(0)[0] + g * (pv.p.integrate(-1.0, 0.0).unwrap()[0] - 0.5 * h * pv.p.value(0)[0]);
        assert!((out[0] - expect).abs() < 1e-13);
        assert_eq!(out[1], 0.25);
    }

    #[test]
    fn zero_profile_zero_input_is_zero() {
        for sys in [HyperbolicSystem::recirculation(1.0), HyperbolicSystem::integral_feedback(1.5)] {
            let k = 8;
            let hist = SampledFn::zeros(sys.history_grid(k), 2);
            let w = SampledFn::zeros(Grid::new(-1.0, 1.0 / 8.0, 9).unwrap(), 1);
            assert_eq!(sys.closure(&hist, &w).unwrap(), vec![0.0, 0.0]);
        }
    }

    #[test]
    fn initial_v_cases() {
        let sys = HyperbolicSystem::recirculation(0.0);
        let k = 16;
        let x0 = SampledFn::from_scalar_fn(zgrid(k), |z| z).unwrap();
        let pv = sys.initial_v(&x0).unwrap();
        for j in 0..k {
            let t = pv.v.grid().midpoint(j);
            assert!((pv.v.value(j)[0] + t).abs() < 1e-15);
        }
        assert_eq!(pv.p.sup_norm(), 0.0);
        let zero = sys.initial_v(&SampledFn::zeros(zgrid(k), 1)).unwrap();
        assert_eq!(zero.v.sup_norm(), 0.0);
        let mut damped = sys.clone();
        damped.a.base = Kernel::constant(0.5);
        let pv = damped.initial_v(&x0).unwrap();
        for j in 0..k {
            let t = pv.v.grid().midpoint(j);
            assert!((pv.v.value(j)[0] - (0.5 * t).exp() * (-t)).abs() < 1e-15);
        }
    }

    #[test]
    fn reconstruct_at_zero_is_initial() {
        let sys = Arc::new(HyperbolicSystem::recirculation(1.0));
        let k = 32;
        let x0 = SampledFn::from_scalar_fn(zgrid(k), |z| (5.0 * z).sin()).unwrap();
        let hist = sys.initial_v(&x0).unwrap().combined();
        assert_eq!(sys.profile(&hist).unwrap().values(), x0.values());
    }

    #[test]
    fn pure_transport_washes_out() {
        let sys = Arc::new(HyperbolicSystem::pure_transport(1.0));
        let k = 32;
        let x0 = SampledFn::constant(zgrid(k), &[1.0]).unwrap();
        let w = zero_input(&sys, k, 2.0);
        let run = sys.solve_pde(&x0, &w, &SolveConfig::with_horizon(2.0), &[0.5, 1.0, 1.5]).unwrap();
        for (t, s) in &run.sup_trace {
            let expect = if *t < 1.0 - 1e-12 { 1.0 } else { 0.0 };
            assert_eq!(*s, expect, "t = {t}");
        }
    }

    #[test]
    fn pure_transport_bit_identical_to_upwind() {
        let sys = Arc::new(HyperbolicSystem::pure_transport(2.0));
        let k = 32;
        let x0 = SampledFn::from_scalar_fn(zgrid(k), |z| (7.0 * z).cos()).unwrap();
        let h = sys.time_step(k);
        let n = k + 64;
        let w = SampledFn::from_scalar_fn(Grid::new(-0.5, h, n).unwrap(), |t| (3.0 * t).sin()).unwrap();
        let horizon = 64.0 * h;
        let d = sys.equivalence_discrepancy(&x0, &w, &SolveConfig::with_horizon(horizon)).unwrap();
        assert_eq!(d, 0.0);
        // with u: boundary value is the input read along the characteristic
        let run = sys.solve_pde(&x0, &w, &SolveConfig::with_horizon(horizon), &[horizon]).unwrap();
        let prof = &run.snapshots[0].1;
        for i in 0..k {
            let z = (i as f64 + 0.5) / k as f64;
            let t = horizon - z / 2.0;
            let expect = w.at(t).unwrap()[0];
            assert_eq!(prof.value(i)[0], expect);
        }
    }

    #[test]
    fn integral_feedback_stationary_profile() {
        let sys = Arc::new(HyperbolicSystem::integral_feedback(2.0));
        let k = 64;
        let x0 = SampledFn::from_scalar_fn(zgrid(k), |z| z).unwrap();
        let h = sys.time_step(k);
        let w = SampledFn::constant(Grid::new(-1.0, h, k + 2 * k).unwrap(), &[1.0]).unwrap();
        let run = sys.solve_pde(&x0, &w, &SolveConfig::with_horizon(2.0), &[1.0, 2.0]).unwrap();
        for (_, prof) in &run.snapshots {
            assert!(prof.max_abs_diff(&x0).unwrap() < 1e-12);
        }
        for k2 in 0..run.trajectory.steps() {
            assert!((run.trajectory.value_at_step(k2)[0] - 0.5).abs() < 1e-12);
        }
        // upwind puts a full step of source into the boundary cell; the gap shrinks at first order
        let gap = |k: usize| {
            let x0 = SampledFn::from_scalar_fn(zgrid(k), |z| z).unwrap();
            let h = sys.time_step(k);
            let w = SampledFn::constant(Grid::new(-1.0, h, 3 * k).unwrap(), &[1.0]).unwrap();
            let up = sys.upwind_reference(&x0, &w, 2.0, &[2.0], 1e12).unwrap();
            up.snapshots[0].1.max_abs_diff(&x0).unwrap()
        };
        let ratio = gap(64) / gap(128);
        assert!((1.7..2.3).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn moduli_for_recirculation() {
        let sys = HyperbolicSystem::recirculation(1.0);
        let m = sys.moduli();
        assert!(((m.n)(1.0) - 3.0).abs() < 1e-15);
        assert!(((m.m)(1.0) - 2.0).abs() < 1e-15);
        assert!(((m.a)(1.0) - 4.0).abs() < 1e-15);
        let g = -1.5;
        let m = HyperbolicSystem::recirculation(g).moduli();
        // a(R) = σ((1 + |g|) R) with σ(R) = R (point) + R (input)
        assert!(((m.a)(2.0) - 2.0 * (1.0 + g.abs()) * 2.0).abs() < 1e-14);
        m.check_monotone().unwrap();
    }

    #[test]
    fn moduli_for_integral_feedback() {
        let m = HyperbolicSystem::integral_feedback(1.5).moduli();
        assert!(((m.n)(2.0) - 4.0).abs() < 1e-15);
        assert!(((m.m)(2.0) - 2.5).abs() < 1e-15);
        assert!(((m.a)(2.0) - 5.0).abs() < 1e-15);
        let b = m.b.expect("no disturbance offset");
        assert!((b(0.5) - 1.25).abs() < 1e-15);
    }

    #[test]
    fn a1_audits_pass() {
        for sys in [
            HyperbolicSystem::recirculation(1.0),
            HyperbolicSystem::integral_feedback(1.5),
            HyperbolicSystem {
                k: vec![BoundaryFunctional {
                    terms: vec![
                        Term::Point {
                            z: 0.5,
                            scale: Scale::Const { value: 0.3 },
                        },
                        Term::Integral {
                            kernel: Kernel::exp_affine(1.0, -2.0),
                            scale: Scale::Const { value: -1.0 },
                        },
                    ],
                }],
                ..HyperbolicSystem::recirculation(0.5)
            },
        ] {
            let rep = sys.audit_a1(1.7, 32, 300, 5).unwrap();
            assert!(rep.passed(), "{rep:?}");
        }
    }

    #[test]
    fn converted_h1_audit_passes() {
        for sys in [HyperbolicSystem::recirculation(1.0), HyperbolicSystem::integral_feedback(1.5)] {
            let ide = Arc::new(sys).to_ide().unwrap();
            let rep = crate::functionals::audit_h1(&ide, 1.0, 32, 200, 9).unwrap();
            assert!(rep.passed(), "{rep:?}");
        }
    }

    #[test]
    fn validation_lists_everything() {
        let mut sys = HyperbolicSystem::recirculation(1.0);
        sys.c = -1.0;
        sys.g.push(Kernel::constant(1.0));
        sys.k[0] = BoundaryFunctional::point(0.0);
        sys.boundary = BoundaryFunctional::input(4);
        match sys.validate() {
            Err(Error::Validation(v)) => assert!(v.len() >= 4, "{v:?}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn l_mu_cases() {
        let g = zgrid(64);
        let one = SampledFn::constant(g, &[1.0]).unwrap();
        let zero = SampledFn::zeros(g, 1);
        assert_eq!(l_mu_distance(&one, &one, 1.0).unwrap(), 0.0);
        for mu in [1.0, 2.0, 3.5] {
            assert!((l_mu_distance(&one, &zero, mu).unwrap() - 1.0).abs() < 1e-14);
        }
        let id = SampledFn::from_scalar_fn(g, |z| z).unwrap();
        // midpoint rule on z^2 is low by h^2/12
        let expect = (1.0f64 / 3.0 - 1.0 / (12.0 * 64.0 * 64.0)).sqrt();
        assert!((l_mu_distance(&id, &zero, 2.0).unwrap() - expect).abs() < 1e-14);
        assert!((l_mu_distance(&id, &zero, 2.0).unwrap() - 0.57735).abs() < 1e-4);
        assert!(matches!(l_mu_distance(&id, &zero, 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn serde_round_trip() {
        let sys = HyperbolicSystem::integral_feedback(1.5);
        let s = serde_json::to_string(&sys).unwrap();
        let back: HyperbolicSystem = serde_json::from_str(&s).unwrap();
        assert_eq!(back, sys);
    }
}
