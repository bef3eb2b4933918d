//! Razumikhin-type ISS certificates, the weighted Lyapunov functional, decay audits,
//! and the robust-equilibrium radius.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{
    eval_rhs, random_history, random_input, random_signal, IdeSystem, RhsDescriptor, HISTORY_SHAPES,
};
use crate::ide_core::{solve, SolveConfig, Trajectory};
use crate::rng::{streams, Stream};
use crate::sampled::{euclid, Grid, SampledFn};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Gain {
    Zero,
    Linear { slope: f64 },
    Power { coeff: f64, exponent: f64 },
}

impl Gain {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Gain::Zero => 0.0,
            Gain::Linear { slope } => slope * s,
            Gain::Power { coeff, exponent } => coeff * s.powf(*exponent),
        }
    }
}

/// `W(x) = Σ k_j |x_j|`, `W(f(x, d, u)) <= λ sup W(x(s)) + γ(|u|)`, decay rate `σ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IssCertificate {
    pub weights: Vec<f64>,
    pub lambda: f64,
    pub gamma: Gain,
    pub sigma: f64,
}

impl IssCertificate {
    /// With `sigma = None` the rate is `0.5 ln(1/λ) / r`.
    pub fn new(weights: Vec<f64>, lambda: f64, gamma: Gain, sigma: Option<f64>, r: f64) -> Result<IssCertificate> {
        let mut errs = Vec::new();
        if weights.is_empty() || weights.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
            errs.push(format!("weights must be positive, got {weights:?}"));
        }
        if !(lambda > 0.0 && lambda < 1.0) {
            errs.push(format!("lambda = {lambda} must lie in (0, 1)"));
        }
        if !(r > 0.0) {
            errs.push(format!("delay r = {r} must be positive"));
        }
        if !errs.is_empty() {
            return Err(Error::Validation(errs));
        }
        let sup = (1.0 / lambda).ln() / r;
        let sigma = sigma.unwrap_or(0.5 * sup);
        if !(sigma > 0.0 && sigma < sup) {
            return Err(Error::Validation(vec![format!(
                "sigma = {sigma} must lie strictly inside (0, {sup})"
            )]));
        }
        Ok(IssCertificate {
            weights,
            lambda,
            gamma,
            sigma,
        })
    }

    pub fn w(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(k, v)| k * v.abs()).sum()
    }

    /// `W >= a1(|x|)` with `a1(s) = min_j k_j s`.
    pub fn a1(&self, s: f64) -> f64 {
        self.weights.iter().cloned().fold(f64::INFINITY, f64::min) * s
    }

    /// `W <= a2(|x|)` with `a2(s) = |k| s`.
    pub fn a2(&self, s: f64) -> f64 {
        euclid(&self.weights) * s
    }

    /// `ã1(s) = exp(-σ r) a1(s)`, the lower bound of `V`.
    pub fn a1_tilde(&self, s: f64, r: f64) -> f64 {
        (-self.sigma * r).exp() * self.a1(s)
    }

    /// Window `h* = ln(1/λ)/σ - r` on which `V` contracts.
    pub fn h_star(&self, r: f64) -> f64 {
        (1.0 / self.lambda).ln() / self.sigma - r
    }

    /// `(1/(1-λ)) (2 - λ e^{σr}) / (1 - λ e^{σr})`, the input factor of the global decay estimate.
    pub fn gain_factor(&self, r: f64) -> f64 {
        let le = self.lambda * (self.sigma * r).exp();
        (2.0 - le) / ((1.0 - self.lambda) * (1.0 - le))
    }

    /// `V(x_t) <= e^{-σt} V(x_0) + gain_factor γ(u)`.
    pub fn v_envelope(&self, r: f64, t: f64, v0: f64, u_sup: f64) -> f64 {
        (-self.sigma * t).exp() * v0 + self.gain_factor(r) * self.gamma.eval(u_sup)
    }

    /// Norm bound from the first form: `|x_t| <= ã1^{-1}(e^{-σt} a2(|x_0|) + factor γ(u))`.
    pub fn norm_envelope(&self, r: f64, t: f64, x0_norm: f64, u_sup: f64) -> f64 {
        let v = self.v_envelope(r, t, self.a2(x0_norm), u_sup);
        v / self.a1_tilde(1.0, r)
    }

    /// Split form: `ã1(|x_t|) <= max((1+ε) e^{-σt} a2(|x_0|), ((1+1/ε)/(1-λ)) factor' γ(u))`
    /// where `factor'` is the input factor times `(1-λ)`.
    pub fn norm_envelope_split(&self, r: f64, t: f64, x0_norm: f64, u_sup: f64, eps: f64) -> f64 {
        let transient = (1.0 + eps) * (-self.sigma * t).exp() * self.a2(x0_norm);
        let input = (1.0 + 1.0 / eps) * self.gain_factor(r) * self.gamma.eval(u_sup);
        transient.max(input) / self.a1_tilde(1.0, r)
    }
}

/// `V(x) = max over cells of exp(σ s_mid) W(x(s_mid))`.
pub fn lyapunov_v(cert: &IssCertificate, history: &SampledFn) -> f64 {
    let g = history.grid();
    let mut v: f64 = 0.0;
    for k in 0..g.count {
        let s = g.midpoint(k) - g.t_end();
        v = v.max((cert.sigma * s).exp() * cert.w(history.value(k)));
    }
    v
}

fn u_sup(sys: &IdeSystem, w: &SampledFn) -> f64 {
    let nd = sys.inputs.d_bounds.len();
    if sys.inputs.u_dim == 0 {
        return 0.0;
    }
    (0..w.len()).map(|k| euclid(&w.value(k)[nd..])).fold(0.0, f64::max)
}

#[derive(Clone, Debug, Serialize)]
pub struct RazumikhinReport {
    pub samples: usize,
    pub violations: usize,
    /// Smallest `λ sup W + γ(|u|) - W(F)` over the samples.
    pub worst_margin: f64,
    /// Largest `(W(F) - γ(|u|)) / sup W`.
    pub effective_lambda: f64,
    pub witness: Option<String>,
    /// Closed-form verdict where one exists.
    pub analytic: Option<bool>,
}

impl RazumikhinReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.analytic != Some(false)
    }
}

/// Closed-form check for the linear scalar distributed class: `d_max ∫|q| <= λ`, `γ(s) >= k s`.
fn analytic_check(sys: &IdeSystem, cert: &IssCertificate) -> Option<bool> {
    match &sys.rhs {
        RhsDescriptor::LinearScalarDistributed(d) => {
            let contraction = d.d_bound * d.q.abs_integral(-d.r, 0.0) <= cert.lambda;
            let k = cert.weights[0];
            let gain_ok = [1e-3, 1e-1, 1.0, 10.0, 1e3].iter().all(|s| cert.gamma.eval(*s) >= k * s * (1.0 - 1e-12));
            Some(contraction && gain_ok)
        }
        _ => None,
    }
}

/// Monte Carlo falsification of the Razumikhin inequality on `samples` random
/// `(history, d, u)` tuples, histories with `cells` cells per delay.
pub fn check_razumikhin(
    sys: &IdeSystem,
    cert: &IssCertificate,
    samples: usize,
    cells: usize,
    seed: u64,
) -> Result<RazumikhinReport> {
    if cert.weights.len() != sys.n {
        return Err(Error::Validation(vec![format!(
            "certificate has {} weights, system state dimension is {}",
            cert.weights.len(),
            sys.n
        )]));
    }
    let h = sys.r / cells as f64;
    let hg = sys.history_grid(h)?;
    let ig = sys.input_grid(h)?;
    let mut rng = Stream::new(seed, streams::RAZUMIKHIN);
    let norms = [1e-2, 1e-1, 1.0, 10.0];
    let mut rep = RazumikhinReport {
        samples,
        violations: 0,
        worst_margin: f64::INFINITY,
        effective_lambda: 0.0,
        witness: None,
        analytic: analytic_check(sys, cert),
    };
    for s in 0..samples {
        let shape = HISTORY_SHAPES[s % HISTORY_SHAPES.len()];
        let scale = norms[(s / HISTORY_SHAPES.len()) % norms.len()];
        let norm = scale * (0.5 + 0.5 * rng.uniform());
        let x = random_history(&mut rng, hg, sys.n, norm, shape);
        let u_radius = if s % 3 == 0 { 0.0 } else { scale * rng.uniform() };
        let w = random_input(&mut rng, ig, &sys.inputs, u_radius, s % 2 == 0);
        // disturbances span their whole range, half the time at its ends
        let dim = w.dim();
        let mut vals = w.values().to_vec();
        let sign = rng.sign();
        for k in 0..w.len() {
            for (j, b) in sys.inputs.d_bounds.iter().enumerate() {
                vals[k * dim + j] = if s % 4 < 2 { sign * b } else { rng.range(-b, *b) };
            }
        }
        let w = SampledFn::new(*w.grid(), dim, vals)?;
        let f = eval_rhs(sys, &x, &w)?;
        let sup_w = (0..x.len()).map(|k| cert.w(x.value(k))).fold(0.0, f64::max);
        let gamma = cert.gamma.eval(u_sup(sys, &w));
        let lhs = cert.w(&f);
        let margin = cert.lambda * sup_w + gamma - lhs;
        if margin < rep.worst_margin {
            rep.worst_margin = margin;
        }
        if sup_w > 0.0 {
            rep.effective_lambda = rep.effective_lambda.max((lhs - gamma) / sup_w);
        }
        let slack = 1e-12 * (sup_w + gamma).max(1e-300);
        if margin < -slack {
            rep.violations += 1;
            if rep.witness.is_none() {
                rep.witness = Some(format!(
                    "sample {s}: shape {shape:?}, sup W = {sup_w:.6e}, W(F) = {lhs:.6e}, gamma = {gamma:.6e}, d = {:?}",
                    &w.current()[..sys.inputs.d_bounds.len()]
                ));
            }
        }
    }
    Ok(rep)
}

#[derive(Clone, Debug)]
pub struct DecayConfig {
    pub trials: usize,
    pub horizon: f64,
    /// Cells per delay interval.
    pub cells: usize,
    /// Amplitude of the random `u` signal (every other trial uses `u ≡ 0`).
    pub u_amp: f64,
    pub x0_norm: f64,
    pub seed: u64,
    pub solve: SolveConfig,
}

impl Default for DecayConfig {
    fn default() -> Self {
        DecayConfig {
            trials: 10,
            horizon: 10.0,
            cells: 64,
            u_amp: 0.1,
            x0_norm: 1.0,
            seed: 0,
            solve: SolveConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayReport {
    pub trials: usize,
    pub h_star: f64,
    pub checks: usize,
    /// Violations of the one-window contraction along the `h*`-subsampled sequence.
    pub violations: usize,
    /// Violations of the global envelope.
    pub envelope_violations: usize,
    pub worst_excess: f64,
    pub witness: Option<String>,
}

impl DecayReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.envelope_violations == 0
    }
}

/// `V` at every step of a trajectory, starting at `t = 0`.
pub fn v_sequence(cert: &IssCertificate, traj: &Trajectory) -> Result<Vec<f64>> {
    (0..=traj.steps())
        .map(|k| Ok(lyapunov_v(cert, &traj.history_at(k as f64 * traj.step)?)))
        .collect()
}

/// Checks the contraction of `V` over windows of length `h*` and the global envelope on
/// simulated trajectories with random initial data and inputs.
pub fn decay_audit(sys: &IdeSystem, cert: &IssCertificate, cfg: &DecayConfig) -> Result<DecayReport> {
    let h = sys.r / cfg.cells as f64;
    let h_star = cert.h_star(sys.r);
    let stride = ((h_star / h) * (1.0 + 1e-12)).floor() as usize;
    if stride == 0 {
        return Err(Error::Certificate(format!("window h* = {h_star} is shorter than the step {h}")));
    }
    let slack = 1e-8 + 2.0 * cfg.solve.tol;
    let steps = (cfg.horizon / h).round() as usize;
    let mut rep = DecayReport {
        trials: cfg.trials,
        h_star,
        checks: 0,
        violations: 0,
        envelope_violations: 0,
        worst_excess: f64::NEG_INFINITY,
        witness: None,
    };
    let factor = cert.gain_factor(sys.r);
    let solve_cfg = SolveConfig {
        horizon: steps as f64 * h,
        ..cfg.solve
    };
    for trial in 0..cfg.trials {
        let mut rng = Stream::new(cfg.seed, streams::trial(streams::INITIAL, trial as u64));
        let hist_grid = Grid::new(-sys.r, h, cfg.cells)?;
        let shape = HISTORY_SHAPES[trial % HISTORY_SHAPES.len()];
        let norm = cfg.x0_norm * (0.5 + 0.5 * rng.uniform());
        let x0 = random_history(&mut rng, hist_grid, sys.n, norm, shape);
        let mut wrng = Stream::new(cfg.seed, streams::trial(streams::DISTURBANCE, trial as u64));
        let u_amp = if trial % 2 == 0 { 0.0 } else { cfg.u_amp };
        let w = random_signal(
            &mut wrng,
            Grid::new(-sys.r, h, cfg.cells + steps)?,
            &sys.inputs,
            u_amp,
            (cfg.cells / 8).max(1),
        );
        let traj = solve(sys, &x0, &w, &solve_cfg)?;
        if traj.escape.is_some() {
            return Err(Error::Certificate(format!("trial {trial} escaped before the horizon")));
        }
        let gamma = cert.gamma.eval(u_sup(sys, &w));
        let v = v_sequence(cert, &traj)?;
        let mut record = |excess: f64, what: &dyn Fn() -> String, envelope: bool| {
            rep.checks += 1;
            rep.worst_excess = rep.worst_excess.max(excess);
            if excess > slack {
                if envelope {
                    rep.envelope_violations += 1;
                } else {
                    rep.violations += 1;
                }
                if rep.witness.is_none() {
                    rep.witness = Some(what());
                }
            }
        };
        let mut k = 0;
        while k + stride < v.len() {
            let bound = (-cert.sigma * stride as f64 * h).exp() * v[k] + gamma / (1.0 - cert.lambda);
            let excess = v[k + stride] - bound;
            record(excess, &|| format!("trial {trial}: V({}) exceeds the window bound", (k + stride) as f64 * h), false);
            k += stride;
        }
        for (k, vk) in v.iter().enumerate() {
            let t = k as f64 * h;
            let bound = (-cert.sigma * t).exp() * v[0] + factor * gamma;
            record(vk - bound, &|| format!("trial {trial}: V({t}) exceeds the global envelope"), true);
        }
    }
    Ok(rep)
}

/// Radius `δ(ε, T)` such that `|x_0| + sup|u| < δ` keeps `|x_t| < ε` on `[0, T]`.
pub fn robust_equilibrium_delta(sys: &IdeSystem, eps: f64, t: f64) -> Result<f64> {
    if !(eps > 0.0) || !(t >= 0.0) {
        return Err(Error::Domain(format!("need eps > 0 and T >= 0, got eps = {eps}, T = {t}")));
    }
    let b = sys
        .moduli
        .b
        .clone()
        .ok_or_else(|| Error::Certificate("no input-bound modulus b declared".into()))?;
    let q = sys.inputs.d_max();
    let n = (sys.moduli.n)(5.0 * b(q + eps));
    let rho = sys.r / (1.0 + 2.0 * sys.r * n);
    let l = (t / rho).floor() as usize + 1;
    let kappa = |s: f64| (0..l).fold(s, |acc, _| 5.0 * b(acc));
    let target = 0.5 * eps;
    let mut hi = target;
    let mut guard = 0;
    while kappa(hi) < target {
        hi *= 2.0;
        guard += 1;
        if guard > 2000 {
            return Err(Error::Certificate("b does not reach eps/2".into()));
        }
    }
    let mut lo = 0.0;
    if kappa(lo) >= target {
        return Err(Error::Certificate("b(0) is not zero".into()));
    }
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        let (k_lo, k_mid) = (kappa(lo), kappa(mid));
        if k_mid < k_lo {
            return Err(Error::Certificate(format!("b is not increasing near {mid}")));
        }
        if k_mid < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[derive(Clone, Debug, Serialize)]
pub struct RobustAudit {
    pub delta: f64,
    pub trials: usize,
    /// Largest `|x_t|` seen on `[0, T]`.
    pub worst_norm: f64,
    pub violations: usize,
}

/// Simulates random small data below `δ(ε, T)` and checks that the state stays below `ε`.
pub fn robust_equilibrium_audit(
    sys: &IdeSystem,
    eps: f64,
    t: f64,
    trials: usize,
    cells: usize,
    seed: u64,
) -> Result<RobustAudit> {
    let delta = robust_equilibrium_delta(sys, eps, t)?;
    let h = sys.r / cells as f64;
    let steps = ((t / h).ceil() as usize).max(1);
    let mut rep = RobustAudit {
        delta,
        trials,
        worst_norm: 0.0,
        violations: 0,
    };
    for trial in 0..trials {
        let mut rng = Stream::new(seed, streams::trial(streams::AUDIT, trial as u64));
        let split = rng.uniform();
        let x0 = random_history(
            &mut rng,
            Grid::new(-sys.r, h, cells)?,
            sys.n,
            0.99 * delta * split,
            HISTORY_SHAPES[trial % HISTORY_SHAPES.len()],
        );
        let u_amp = 0.99 * delta * (1.0 - split) / (sys.inputs.u_dim.max(1) as f64).sqrt();
        let w = random_signal(&mut rng, Grid::new(-sys.r, h, cells + steps)?, &sys.inputs, u_amp, 4);
        let traj = solve(sys, &x0, &w, &SolveConfig::with_horizon(steps as f64 * h))?;
        let kd = traj.delay_cells();
        let worst = (kd..traj.solution.len())
            .map(|k| euclid(traj.solution.value(k)))
            .fold(0.0, f64::max);
        rep.worst_norm = rep.worst_norm.max(worst);
        if worst >= eps || traj.escape.is_some() {
            rep.violations += 1;
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{modulus, Moduli};
    use crate::hyperbolic::HyperbolicSystem;
    use std::sync::Arc;

    fn cert_2_7() -> IssCertificate {
        IssCertificate::new(vec![1.0], 0.5, Gain::Linear { slope: 1.0 }, None, 1.0).unwrap()
    }

    #[test]
    fn default_sigma_and_window() {
        let c = cert_2_7();
        assert!((c.sigma - 0.5 * 2f64.ln()).abs() < 1e-15);
        assert!((c.h_star(1.0) - 1.0).abs() < 1e-12);
        assert!((c.gain_factor(1.0) - 8.828427124746).abs() < 1e-9);
        assert!(IssCertificate::new(vec![1.0], 1.0, Gain::Zero, None, 1.0).is_err());
        assert!(IssCertificate::new(vec![-1.0], 0.5, Gain::Zero, None, 1.0).is_err());
        assert!(IssCertificate::new(vec![1.0], 0.5, Gain::Zero, Some(2.0), 1.0).is_err());
    }

    #[test]
    fn v_of_zero_and_constant() {
        let c = cert_2_7();
        let g = Grid::new(-1.0, 1.0 / 32.0, 32).unwrap();
        assert_eq!(lyapunov_v(&c, &SampledFn::zeros(g, 1)), 0.0);
        let v = lyapunov_v(&c, &SampledFn::constant(g, &[2.0]).unwrap());
        assert!((v - 2.0).abs() <= g.step * c.sigma * 2.0 / 2.0 + 1e-15);
        assert!(v <= 2.0);
    }

    #[test]
    fn v_sandwich_on_random_histories() {
        let c = IssCertificate::new(vec![1.0, 3.0], 0.8, Gain::Zero, None, 1.0).unwrap();
        let g = Grid::new(-1.0, 1.0 / 40.0, 40).unwrap();
        let mut rng = Stream::new(3, 0);
        for i in 0..200 {
            let x = random_history(&mut rng, g, 2, 5.0 * rng_norm(i), HISTORY_SHAPES[i % 5]);
            let v = lyapunov_v(&c, &x);
            let n = x.sup_norm();
            assert!(c.a1_tilde(n, 1.0) <= v * (1.0 + 1e-14));
            assert!(v <= c.a2(n) * (1.0 + 1e-14));
        }
    }

    fn rng_norm(i: usize) -> f64 {
        (i as f64 * 0.37).fract() + 0.01
    }

    #[test]
    fn razumikhin_scalar_average_analytic_and_sampled() {
        let sys = IdeSystem::scalar_average(0.5);
        let rep = check_razumikhin(&sys, &cert_2_7(), 2000, 32, 1).unwrap();
        assert_eq!(rep.analytic, Some(true));
        assert!(rep.passed(), "{rep:?}");
        assert!(rep.effective_lambda <= 0.5 + 1e-12);
        let tight = IssCertificate::new(vec![1.0], 0.4, Gain::Linear { slope: 1.0 }, None, 1.0).unwrap();
        let rep = check_razumikhin(&sys, &tight, 2000, 32, 1).unwrap();
        assert_eq!(rep.analytic, Some(false));
        assert!(!rep.passed());
    }

    #[test]
    fn razumikhin_zero_functional() {
        let mut sys = IdeSystem::scalar_average(0.0);
        sys.moduli = Moduli::zero();
        let cert = IssCertificate::new(vec![1.0], 0.3, Gain::Linear { slope: 1.0 }, None, 1.0).unwrap();
        let rep = check_razumikhin(&sys, &cert, 500, 16, 2).unwrap();
        assert!(rep.passed());
        assert!(rep.effective_lambda <= 0.0);
    }

    #[test]
    fn razumikhin_integral_feedback() {
        let sys = Arc::new(HyperbolicSystem::integral_feedback(1.0)).to_ide().unwrap();
        let cert = IssCertificate::new(vec![1.0, 3.0], 5.0 / 6.0, Gain::Zero, None, 1.0).unwrap();
        let rep = check_razumikhin(&sys, &cert, 2000, 32, 4).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert!(rep.effective_lambda <= 5.0 / 6.0 + 1e-9);
    }

    #[test]
    fn razumikhin_sharpness_at_g_2() {
        let sys = Arc::new(HyperbolicSystem::integral_feedback(2.0)).to_ide().unwrap();
        for (k, lambda) in [(3.0, 0.99), (10.0, 0.999), (1.0, 0.9)] {
            let cert = IssCertificate::new(vec![1.0, k], lambda, Gain::Zero, None, 1.0).unwrap();
            let rep = check_razumikhin(&sys, &cert, 500, 32, 5).unwrap();
            assert!(!rep.passed());
            assert!(rep.effective_lambda >= 1.0 - 1e-12, "{}", rep.effective_lambda);
        }
    }

    #[test]
    fn decay_audit_scalar_average() {
        let sys = IdeSystem::scalar_average(0.5);
        let cfg = DecayConfig {
            trials: 6,
            horizon: 6.0,
            cells: 32,
            ..DecayConfig::default()
        };
        let rep = decay_audit(&sys, &cert_2_7(), &cfg).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert!(rep.checks > 6 * 6);
    }

    #[test]
    fn zero_data_zero_v() {
        let sys = IdeSystem::scalar_average(0.5);
        let k = 16;
        let h = 1.0 / k as f64;
        let x0 = SampledFn::zeros(Grid::new(-1.0, h, k).unwrap(), 1);
        let w = SampledFn::constant(Grid::new(-1.0, h, 4 * k).unwrap(), &[1.0, 0.0]).unwrap();
        let traj = solve(&sys, &x0, &w, &SolveConfig::with_horizon(3.0)).unwrap();
        assert!(v_sequence(&cert_2_7(), &traj).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn scalar_average_step_input_within_gain() {
        let sys = IdeSystem::scalar_average(0.5);
        let c = cert_2_7();
        let k = 32;
        let h = 1.0 / k as f64;
        let x0 = SampledFn::zeros(Grid::new(-1.0, h, k).unwrap(), 1);
        let w = SampledFn::constant(Grid::new(-1.0, h, 31 * k).unwrap(), &[1.0, 0.1]).unwrap();
        let traj = solve(&sys, &x0, &w, &SolveConfig::with_horizon(30.0)).unwrap();
        let end = traj.value_at_step(traj.steps() - 1)[0];
        assert!((end - 0.2).abs() < 1e-6);
        let bound = c.norm_envelope(1.0, 30.0, 0.0, 0.1);
        assert!((bound - 1.248528137).abs() < 1e-6);
        assert!(end <= bound);
    }

    #[test]
    fn robust_delta_linear_b() {
        let mut sys = IdeSystem::scalar_average(0.5);
        sys.moduli = Moduli::new(modulus(|_| 0.0), modulus(|_| 0.0), modulus(|s| s), Some(modulus(|s| s)));
        // N = 0 gives rho = r, so l = floor(T) + 1
        let d = robust_equilibrium_delta(&sys, 1.0, 2.5).unwrap();
        assert!((d - 0.5 / 125.0).abs() < 1e-12 * 0.5 / 125.0 + 1e-15);
        let d0 = robust_equilibrium_delta(&sys, 1.0, 0.0).unwrap();
        assert!((d0 - 0.1).abs() < 1e-12);
        sys.moduli.b = None;
        assert!(matches!(robust_equilibrium_delta(&sys, 1.0, 1.0), Err(Error::Certificate(_))));
    }

    #[test]
    fn robust_audit_scalar_average() {
        let sys = IdeSystem::scalar_average(0.5);
        let rep = robust_equilibrium_audit(&sys, 0.1, 2.0, 20, 16, 8).unwrap();
        assert_eq!(rep.violations, 0);
        assert!(rep.delta > 0.0 && rep.worst_norm < 0.1);
    }
}
