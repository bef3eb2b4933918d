//! JSON scenarios: which system to run, with what data, on what grid.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feedback::ControllerKind;
use crate::functionals::{IdeSystem, LinearScalarDistributed, PointPlusKernel};
use crate::hyperbolic::HyperbolicSystem;
use crate::rng::{streams, Stream};
use crate::sampled::{Grid, SampledFn, ALIGN_TOL};
use crate::stability::{Gain, IssCertificate};

const MAX_CELLS: usize = 1 << 20;

/// A scalar signal of time (or of `z` for profiles), sampled at cell midpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Signal {
    Constant {
        value: f64,
    },
    Step {
        at: f64,
        before: f64,
        after: f64,
    },
    Ramp {
        slope: f64,
        #[serde(default)]
        offset: f64,
    },
    Sine {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Piecewise constant on intervals `[n piece, (n+1) piece)`, uniform in `[-amplitude, amplitude]`.
    Random {
        amplitude: f64,
        piece: f64,
        #[serde(default)]
        stream: u64,
    },
    /// `amplitude / modes · Σ_m c_m sin(π m t + φ_m)` with random `c_m ∈ [-1, 1]`, `φ_m ∈ [0, 2π)`.
    Smooth {
        amplitude: f64,
        #[serde(default = "default_modes")]
        modes: usize,
        #[serde(default)]
        stream: u64,
    },
    /// Values read from a CSV with columns `t_lo, t_hi, value`.
    Csv {
        path: PathBuf,
    },
}

fn default_modes() -> usize {
    4
}

impl Default for Signal {
    fn default() -> Self {
        Signal::Constant { value: 0.0 }
    }
}

/// Index of the draw for interval `n` of a random signal; negative intervals map below positive ones.
fn interval_counter(n: f64) -> u64 {
    (n as i64).wrapping_sub(i64::MIN) as u64
}

impl Signal {
    /// Samples the signal at the midpoints of `grid`. `family` separates the random streams of
    /// different roles (initial data, inputs) under one seed.
    pub fn sample(&self, grid: &Grid, seed: u64, family: u64) -> Result<Vec<f64>> {
        self.sample_channel(grid, seed, family, 0)
    }

    /// As [`Signal::sample`] for channel `channel`; channels draw from disjoint streams.
    pub fn sample_channel(&self, grid: &Grid, seed: u64, family: u64, channel: u64) -> Result<Vec<f64>> {
        let mids = (0..grid.count).map(|k| grid.midpoint(k));
        let vals: Vec<f64> = match self {
            Signal::Constant { value } => vec![*value; grid.count],
            Signal::Step { at, before, after } => mids.map(|t| if t < *at { *before } else { *after }).collect(),
            Signal::Ramp { slope, offset } => mids.map(|t| offset + slope * t).collect(),
            Signal::Sine {
                amplitude,
                frequency,
                phase,
            } => mids.map(|t| amplitude * (2.0 * PI * frequency * t + phase).sin()).collect(),
            Signal::Random {
                amplitude,
                piece,
                stream,
            } => {
                let id = streams::signal(family, channel, *stream);
                mids.map(|t| {
                    let u = Stream::uniform_at(seed, id, interval_counter((t / piece).floor()));
                    amplitude * (2.0 * u - 1.0)
                })
                .collect()
            }
            Signal::Smooth {
                amplitude,
                modes,
                stream,
            } => {
                let mut rng = Stream::new(seed, streams::signal(family, channel, *stream));
                let coef: Vec<(f64, f64)> = (0..*modes).map(|_| (rng.range(-1.0, 1.0), rng.range(0.0, 2.0 * PI))).collect();
                let scale = amplitude / (*modes).max(1) as f64;
                mids.map(|t| {
                    scale
                        * coef
                            .iter()
                            .enumerate()
                            .map(|(m, (c, ph))| c * (PI * (m + 1) as f64 * t + ph).sin())
                            .sum::<f64>()
                })
                .collect()
            }
            Signal::Csv { path } => {
                let f = SampledFn::read_csv(fs::File::open(path)?)?;
                mids.map(|t| f.at(t).map(|v| v[0])).collect::<Result<Vec<f64>>>()?
            }
        };
        Ok(vals)
    }

    fn check(&self, what: &str, errs: &mut Vec<String>) {
        match self {
            Signal::Random { stream, .. } | Signal::Smooth { stream, .. } if *stream > streams::MAX_SIGNAL_STREAM => {
                errs.push(format!("{what}: stream must be at most {}", streams::MAX_SIGNAL_STREAM))
            }
            Signal::Random { amplitude, piece, .. } => {
                if !(*piece > 0.0) {
                    errs.push(format!("{what}: random signal needs a positive piece length"));
                }
                if !amplitude.is_finite() {
                    errs.push(format!("{what}: amplitude must be finite"));
                }
            }
            Signal::Smooth { modes, .. } if *modes == 0 => errs.push(format!("{what}: smooth signal needs at least one mode")),
            Signal::Csv { path } if !path.exists() => errs.push(format!("{what}: file {} does not exist", path.display())),
            _ => {}
        }
    }

    fn resolve(&mut self, base: &Path) {
        if let Signal::Csv { path } = self {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }
}

/// One signal shared by every channel, or one per channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Channels {
    One(Signal),
    Many(Vec<Signal>),
}

impl Default for Channels {
    fn default() -> Self {
        Channels::Many(Vec::new())
    }
}

impl Channels {
    /// Samples `dim` channels on `grid`; channels beyond a given list are zero.
    pub fn sample(&self, grid: Grid, dim: usize, seed: u64, family: u64) -> Result<SampledFn> {
        let zero = Signal::default();
        let mut cols = Vec::with_capacity(dim);
        for j in 0..dim {
            let s = match self {
                Channels::One(s) => s,
                Channels::Many(v) => v.get(j).unwrap_or(&zero),
            };
            cols.push(s.sample_channel(&grid, seed, family, j as u64)?);
        }
        let mut vals = Vec::with_capacity(grid.count * dim);
        for k in 0..grid.count {
            vals.extend(cols.iter().map(|c| c[k]));
        }
        SampledFn::new(grid, dim, vals)
    }

    fn signals(&self) -> Vec<&Signal> {
        match self {
            Channels::One(s) => vec![s],
            Channels::Many(v) => v.iter().collect(),
        }
    }

    fn signals_mut(&mut self) -> Vec<&mut Signal> {
        match self {
            Channels::One(s) => vec![s],
            Channels::Many(v) => v.iter_mut().collect(),
        }
    }

    fn len(&self) -> usize {
        match self {
            Channels::One(_) => 1,
            Channels::Many(v) => v.len(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Transport with recirculation `g x(t, 1)` and boundary input.
    Recirculation,
    /// Transport driven by `g d ∫ x dz` with zero boundary value.
    IntegralFeedback,
    /// `x(t) = d(t) q ∫ x(t+s) ds + u(t)` on a unit delay.
    ScalarAverage,
    PureTransport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum SystemSpec {
    Preset {
        name: Preset,
        #[serde(default)]
        g: Option<f64>,
        #[serde(default)]
        q: Option<f64>,
        #[serde(default)]
        c: Option<f64>,
    },
    Hyperbolic(HyperbolicSystem),
    LinearScalarDistributed(LinearScalarDistributed),
    PointPlusKernel(PointPlusKernel),
    /// Another JSON file holding a system description.
    File {
        path: PathBuf,
    },
}

#[derive(Clone, Debug)]
pub enum BuiltSystem {
    Ide(IdeSystem),
    Pde(Arc<HyperbolicSystem>),
}

impl BuiltSystem {
    /// The system in IDE form, converting a PDE if needed.
    pub fn ide(&self) -> Result<IdeSystem> {
        match self {
            BuiltSystem::Ide(s) => Ok(s.clone()),
            BuiltSystem::Pde(p) => p.to_ide(),
        }
    }

    pub fn pde(&self) -> Option<&Arc<HyperbolicSystem>> {
        match self {
            BuiltSystem::Pde(p) => Some(p),
            BuiltSystem::Ide(_) => None,
        }
    }

    /// Time step for `cells` cells per delay.
    pub fn step(&self, cells: usize) -> f64 {
        match self {
            BuiltSystem::Ide(s) => s.r / cells as f64,
            BuiltSystem::Pde(p) => p.time_step(cells),
        }
    }

    /// Length of the delay window, in time units.
    pub fn delay(&self) -> f64 {
        match self {
            BuiltSystem::Ide(s) => s.r,
            BuiltSystem::Pde(p) => p.delay(),
        }
    }

    /// Point delays that must fall on the grid, as fractions of the delay window.
    fn grid_fractions(&self) -> Vec<f64> {
        match self {
            BuiltSystem::Ide(s) => match &s.rhs {
                crate::functionals::RhsDescriptor::PointPlusKernel(p) => p.delays.iter().map(|d| d / p.r).collect(),
                _ => Vec::new(),
            },
            BuiltSystem::Pde(_) => Vec::new(),
        }
    }
}

impl SystemSpec {
    pub fn build(&self) -> Result<BuiltSystem> {
        match self {
            SystemSpec::Preset { name, g, q, c } => Ok(match name {
                Preset::Recirculation => BuiltSystem::Pde(Arc::new(HyperbolicSystem::recirculation(g.unwrap_or(1.0)))),
                Preset::IntegralFeedback => {
                    BuiltSystem::Pde(Arc::new(HyperbolicSystem::integral_feedback(g.unwrap_or(1.0))))
                }
                Preset::ScalarAverage => BuiltSystem::Ide(IdeSystem::scalar_average(q.unwrap_or(0.5))),
                Preset::PureTransport => {
                    let c = c.unwrap_or(1.0);
                    if !(c > 0.0) {
                        return Err(Error::Validation(vec![format!("transport speed must be positive, got {c}")]));
                    }
                    BuiltSystem::Pde(Arc::new(HyperbolicSystem::pure_transport(c)))
                }
            }),
            SystemSpec::Hyperbolic(h) => {
                h.validate()?;
                Ok(BuiltSystem::Pde(Arc::new(h.clone())))
            }
            SystemSpec::LinearScalarDistributed(l) => Ok(BuiltSystem::Ide(IdeSystem::linear_scalar_distributed(l.clone())?)),
            SystemSpec::PointPlusKernel(p) => Ok(BuiltSystem::Ide(IdeSystem::point_plus_kernel(p.clone())?)),
            SystemSpec::File { path } => {
                let inner: SystemSpec = serde_json::from_str(&fs::read_to_string(path)?)?;
                if matches!(inner, SystemSpec::File { .. }) {
                    return Err(Error::Validation(vec![format!("{} refers to another file", path.display())]));
                }
                inner.build()
            }
        }
    }

    pub fn load(path: &Path) -> Result<SystemSpec> {
        let mut spec: SystemSpec = serde_json::from_str(&fs::read_to_string(path)?)?;
        spec.resolve(path.parent().unwrap_or(Path::new(".")));
        Ok(spec)
    }

    fn resolve(&mut self, base: &Path) {
        if let SystemSpec::File { path } = self {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    SimulateIde,
    SimulatePde,
    Convert,
    CheckRazumikhin,
    FeedbackDemo,
    EquivalenceAudit,
    Acceptance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Numerics {
    /// Cells per delay window.
    #[serde(rename = "K")]
    pub cells: usize,
    #[serde(rename = "T", default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_horizon() -> f64 {
    5.0
}

fn default_tol() -> f64 {
    1e-12
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            cells: 256,
            horizon: default_horizon(),
            tol: default_tol(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Outputs {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateSpec {
    pub weights: Vec<f64>,
    pub lambda: f64,
    #[serde(default = "zero_gain")]
    pub gamma: Gain,
    #[serde(default)]
    pub sigma: Option<f64>,
}

fn zero_gain() -> Gain {
    Gain::Zero
}

impl CertificateSpec {
    pub fn build(&self, r: f64) -> Result<IssCertificate> {
        IssCertificate::new(self.weights.clone(), self.lambda, self.gamma.clone(), self.sigma, r)
    }

    pub fn load(path: &Path) -> Result<CertificateSpec> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    #[serde(default)]
    pub system: Option<SystemSpec>,
    /// Initial history (IDE) or initial profile on `(0, 1]` (PDE, feedback).
    #[serde(default)]
    pub initial: Option<Channels>,
    /// Input channels, disturbances first; the actuator error for `feedback-demo`.
    #[serde(default)]
    pub input: Option<Channels>,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub certificate: Option<CertificateSpec>,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub controller: Option<ControllerKind>,
    #[serde(default)]
    pub g: Option<f64>,
    #[serde(default)]
    pub criterion: Option<usize>,
}

/// Smallest `K` placing every fraction of the delay window, the horizon and every snapshot on the grid.
pub fn smallest_valid_cells(fractions: &[f64], delay: f64, times: &[f64]) -> Option<usize> {
    let on_grid = |x: f64, k: usize| {
        let u = x * k as f64;
        (u - u.round()).abs() <= ALIGN_TOL * u.abs().max(1.0)
    };
    (1..=MAX_CELLS).find(|&k| {
        fractions.iter().all(|f| on_grid(*f, k)) && times.iter().all(|t| on_grid(t / delay, k))
    })
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario> {
        let mut sc: Scenario = serde_json::from_str(&fs::read_to_string(path)?)?;
        sc.resolve(path.parent().unwrap_or(Path::new(".")));
        Ok(sc)
    }

    /// Makes relative file references relative to `base`.
    pub fn resolve(&mut self, base: &Path) {
        if let Some(s) = &mut self.system {
            s.resolve(base);
        }
        for ch in [&mut self.initial, &mut self.input].into_iter().flatten() {
            for s in ch.signals_mut() {
                s.resolve(base);
            }
        }
        if let Some(d) = &mut self.outputs.dir {
            if d.is_relative() {
                *d = base.join(&*d);
            }
        }
    }

    /// Checks the scenario and builds its system, reporting every problem found.
    pub fn validate(&self) -> Result<Option<BuiltSystem>> {
        let mut errs = Vec::new();
        let num = &self.numerics;
        if num.cells == 0 {
            errs.push("K must be at least 1".to_string());
        }
        if !(num.horizon > 0.0) || !num.horizon.is_finite() {
            errs.push(format!("T must be positive, got {}", num.horizon));
        }
        if !(num.tol > 0.0) {
            errs.push(format!("tol must be positive, got {}", num.tol));
        }
        for ch in [&self.initial, &self.input].into_iter().flatten() {
            for s in ch.signals() {
                s.check("signal", &mut errs);
            }
        }
        let needs_system = !matches!(self.kind, ScenarioKind::FeedbackDemo | ScenarioKind::Acceptance);
        let built = match &self.system {
            None if needs_system => {
                errs.push(format!("scenario kind {:?} needs a system", self.kind));
                None
            }
            None => None,
            Some(spec) => match spec.build() {
                Ok(b) => Some(b),
                Err(Error::Validation(v)) => {
                    errs.extend(v);
                    None
                }
                Err(e) => {
                    errs.push(format!("system: {e}"));
                    None
                }
            },
        };
        match self.kind {
            ScenarioKind::SimulatePde | ScenarioKind::EquivalenceAudit => {
                if let Some(BuiltSystem::Ide(_)) = built {
                    errs.push(format!("scenario kind {:?} needs a hyperbolic system", self.kind));
                }
            }
            ScenarioKind::Convert => {
                if let Some(BuiltSystem::Ide(_)) = built {
                    errs.push("convert needs a hyperbolic system".to_string());
                }
            }
            ScenarioKind::CheckRazumikhin => match (&self.certificate, &built) {
                (None, _) => errs.push("check-razumikhin needs a certificate".to_string()),
                (Some(c), Some(b)) => match b.ide() {
                    Ok(ide) => {
                        if let Err(e) = c.build(ide.r) {
                            errs.push(format!("certificate: {e}"));
                        } else if c.weights.len() != ide.n {
                            errs.push(format!(
                                "certificate has {} weights, system state dimension is {}",
                                c.weights.len(),
                                ide.n
                            ));
                        }
                    }
                    Err(e) => errs.push(format!("system: {e}")),
                },
                _ => {}
            },
            ScenarioKind::Acceptance => {
                if let Some(c) = self.criterion.filter(|c| !(1..=10).contains(c)) {
                    errs.push(format!("acceptance criterion must be in 1..=10, got {c}"));
                }
            }
            ScenarioKind::FeedbackDemo => {
                if let Some(g) = self.g {
                    if !g.is_finite() {
                        errs.push("g must be finite".to_string());
                    }
                }
            }
            ScenarioKind::SimulateIde => {}
        }
        if let (Some(b), Some(input)) = (&built, &self.input) {
            if let Ok(ide) = b.ide() {
                if input.len() > ide.input_dim() {
                    errs.push(format!("{} input signals given, system has {} input channels", input.len(), ide.input_dim()));
                }
            }
        }
        if num.cells > 0 && num.horizon > 0.0 {
            let (delay, fractions) = match &built {
                Some(b) => (b.delay(), b.grid_fractions()),
                None => (1.0, Vec::new()),
            };
            let mut times = vec![num.horizon];
            times.extend(&self.outputs.snapshot_times);
            let on_grid = smallest_valid_cells(&fractions, delay, &times);
            let aligned = fractions.iter().all(|f| {
                let u = f * num.cells as f64;
                (u - u.round()).abs() <= ALIGN_TOL * u.max(1.0)
            }) && times.iter().all(|t| {
                let u = t / delay * num.cells as f64;
                (u - u.round()).abs() <= ALIGN_TOL * u.max(1.0)
            });
            if !aligned {
                errs.push(match on_grid {
                    Some(k) => format!(
                        "K = {} does not put every delay, T and snapshot time on the grid; smallest valid K is {k} (and its multiples)",
                        num.cells
                    ),
                    None => format!("K = {}: delays and times have no common grid with at most {MAX_CELLS} cells", num.cells),
                });
            }
            if self.outputs.snapshot_times.iter().any(|t| *t < 0.0 || *t > num.horizon) {
                errs.push("snapshot times must lie in [0, T]".to_string());
            }
        }
        if errs.is_empty() {
            Ok(built)
        } else {
            Err(Error::Validation(errs))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signals_sample_at_midpoints() {
        let g = Grid::new(0.0, 0.25, 4).unwrap();
        let ramp = Signal::Ramp { slope: 2.0, offset: 1.0 };
        assert_eq!(ramp.sample(&g, 0, 1).unwrap(), vec![1.25, 1.75, 2.25, 2.75]);
        let step = Signal::Step {
            at: 0.5,
            before: -1.0,
            after: 1.0,
        };
        assert_eq!(step.sample(&g, 0, 1).unwrap(), vec![-1.0, -1.0, 1.0, 1.0]);
    }

    #[test]
    fn random_signal_is_grid_independent() {
        let s = Signal::Random {
            amplitude: 1.0,
            piece: 0.5,
            stream: 0,
        };
        let coarse = s.sample(&Grid::new(-1.0, 0.25, 8).unwrap(), 7, 2).unwrap();
        let fine = s.sample(&Grid::new(-1.0, 0.125, 16).unwrap(), 7, 2).unwrap();
        for k in 0..8 {
            assert_eq!(coarse[k], fine[2 * k]);
            assert!(coarse[k].abs() <= 1.0);
        }
        assert_eq!(coarse[0], coarse[1]);
        assert_ne!(coarse[1], coarse[2]);
    }

    #[test]
    fn roles_and_channels_draw_different_values() {
        let s = Signal::Random {
            amplitude: 1.0,
            piece: 0.5,
            stream: 0,
        };
        let g = Grid::new(0.0, 0.5, 8).unwrap();
        let initial = Channels::One(s.clone()).sample(g, 2, 3, streams::INITIAL).unwrap();
        let input = Channels::One(s).sample(g, 2, 3, streams::DISTURBANCE).unwrap();
        assert_ne!(initial.component(0), input.component(0));
        assert_ne!(initial.component(0), initial.component(1));
    }

    #[test]
    fn smooth_signal_bounded() {
        let s = Signal::Smooth {
            amplitude: 2.0,
            modes: 5,
            stream: 1,
        };
        let v = s.sample(&Grid::new(0.0, 0.01, 100).unwrap(), 3, 1).unwrap();
        assert!(v.iter().all(|x| x.abs() <= 2.0));
        assert!(v.iter().any(|x| x.abs() > 1e-3));
    }

    #[test]
    fn parses_scenario() {
        let json = r#"{
            "kind": "simulate-pde",
            "system": {"type": "preset", "name": "integral-feedback", "g": 1.5},
            "initial": {"kind": "ramp", "slope": 1.0},
            "input": [{"kind": "random", "amplitude": 1.0, "piece": 0.0625}],
            "numerics": {"K": 64, "T": 2.0, "seed": 3},
            "outputs": {"snapshot_times": [0.5, 1.0]}
        }"#;
        let sc: Scenario = serde_json::from_str(json).unwrap();
        let built = sc.validate().unwrap().unwrap();
        assert!(built.pde().is_some());
        assert_eq!(sc.numerics.tol, 1e-12);
    }

    #[test]
    fn validation_lists_every_error() {
        let json = r#"{
            "kind": "check-razumikhin",
            "system": {"type": "preset", "name": "scalar-average"},
            "numerics": {"K": 0, "T": -1.0, "tol": 0.0}
        }"#;
        let sc: Scenario = serde_json::from_str(json).unwrap();
        match sc.validate() {
            Err(Error::Validation(v)) => assert_eq!(v.len(), 4, "{v:?}"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn misaligned_grid_names_smallest_k() {
        let json = r#"{
            "kind": "simulate-ide",
            "system": {"type": "preset", "name": "scalar-average"},
            "numerics": {"K": 64, "T": 0.3}
        }"#;
        let sc: Scenario = serde_json::from_str(json).unwrap();
        let err = sc.validate().unwrap_err().to_string();
        assert!(err.contains("smallest valid K is 10"), "{err}");
    }

    #[test]
    fn point_delays_constrain_k() {
        assert_eq!(smallest_valid_cells(&[0.25, 1.0 / 3.0], 1.0, &[2.0]), Some(12));
        assert_eq!(smallest_valid_cells(&[], 2.0, &[5.0]), Some(2));
    }
}
