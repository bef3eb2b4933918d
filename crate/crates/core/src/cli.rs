//! Command-line front end: every subcommand is turned into a [`Scenario`] and run.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use crate::acceptance;
use crate::config::{BuiltSystem, CertificateSpec, Channels, Scenario, ScenarioKind, Signal, SystemSpec};
use crate::error::{Error, Result};
use crate::feedback::{closed_loop, ControllerKind};
use crate::functionals::InputSpec;
use crate::hyperbolic::HyperbolicSystem;
use crate::ide_core::{escape_time_lower_bound, solve, SolveConfig, Trajectory};
use crate::rng::streams;
use crate::sampled::{fmt17, Grid, SampledFn};
use crate::stability::check_razumikhin;

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_ESCAPE: i32 = 3;
pub const EXIT_CHECK_FAILED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "delaypde", version, about = "Integral delay equations and hyperbolic PDEs with nonlocal boundary conditions")]
pub struct Cli {
    /// Seed of the counter-based generator behind every random signal.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for CSV, JSON and log output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Cells per delay interval.
    #[arg(long = "K", global = true)]
    pub cells: Option<usize>,
    /// Final time.
    #[arg(long = "T", global = true)]
    pub horizon: Option<f64>,
    /// Fixed-point tolerance of the Picard sweeps.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Echo the per-window solver log on stderr.
    #[arg(long, short, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve an integral delay equation.
    SimulateIde {
        #[arg(long)]
        system: PathBuf,
        /// CSV history on [-r, 0) (columns t_lo, t_hi, x); zero if omitted.
        #[arg(long)]
        initial: Option<PathBuf>,
        /// CSV input on [-r, T); zero if omitted.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Solve a hyperbolic PDE through its IDE form and reconstruct profiles.
    SimulatePde {
        #[arg(long)]
        system: PathBuf,
        /// CSV profile on (0, 1]; zero if omitted.
        #[arg(long)]
        initial: Option<PathBuf>,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        snapshots: Vec<f64>,
    },
    /// Convert a hyperbolic PDE to its IDE and report the moduli.
    Convert {
        #[arg(long)]
        system: PathBuf,
    },
    /// Monte Carlo check of a Razumikhin certificate.
    CheckRazumikhin {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        cert: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
    /// Closed-loop boundary feedback for the recirculation plant.
    FeedbackDemo {
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        g: f64,
        #[arg(long, default_value = "kernel")]
        controller: ControllerKind,
        #[arg(long, default_value = "step")]
        x0: InitialShape,
        /// Amplitude of a random actuator error.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
    },
    /// Compare the reconstructed PDE solution with the upwind scheme at K and 2K.
    EquivalenceAudit {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        initial: Option<PathBuf>,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Run one acceptance criterion, or all of them.
    Acceptance {
        #[arg(long)]
        criterion: Option<usize>,
    },
    /// Run a JSON scenario.
    Run { scenario: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum InitialShape {
    Step,
    Ramp,
    Random,
}

impl InitialShape {
    fn signal(self) -> Signal {
        match self {
            InitialShape::Step => Signal::Step {
                at: 0.5,
                before: 1.0,
                after: -0.5,
            },
            InitialShape::Ramp => Signal::Ramp { slope: 1.0, offset: 0.0 },
            InitialShape::Random => Signal::Random {
                amplitude: 1.0,
                piece: 1.0 / 16.0,
                stream: 0,
            },
        }
    }
}

/// Result of a scenario: a JSON report, the exit code it maps to, and solver log lines.
#[derive(Debug)]
pub struct Outcome {
    pub code: i32,
    pub report: Value,
    pub log: Vec<String>,
}

fn csv_signal(path: &Option<PathBuf>) -> Option<Channels> {
    path.as_ref().map(|p| Channels::One(Signal::Csv { path: p.clone() }))
}

impl Cli {
    /// The scenario described by the command line; `run` loads it from disk.
    pub fn scenario(&self) -> Result<Scenario> {
        let sys = |p: &Path| SystemSpec::load(p).map(Some);
        let mut sc = Scenario {
            kind: ScenarioKind::SimulateIde,
            system: None,
            initial: None,
            input: None,
            numerics: Default::default(),
            outputs: Default::default(),
            certificate: None,
            samples: None,
            controller: None,
            g: None,
            criterion: None,
        };
        match &self.command {
            Command::SimulateIde { system, initial, input } => {
                sc.system = sys(system)?;
                sc.initial = csv_signal(initial);
                sc.input = csv_signal(input);
            }
            Command::SimulatePde {
                system,
                initial,
                input,
                snapshots,
            } => {
                sc.kind = ScenarioKind::SimulatePde;
                sc.system = sys(system)?;
                sc.initial = csv_signal(initial);
                sc.input = csv_signal(input);
                sc.outputs.snapshot_times = snapshots.clone();
            }
            Command::Convert { system } => {
                sc.kind = ScenarioKind::Convert;
                sc.system = sys(system)?;
            }
            Command::CheckRazumikhin { system, cert, samples } => {
                sc.kind = ScenarioKind::CheckRazumikhin;
                sc.system = sys(system)?;
                sc.certificate = Some(CertificateSpec::load(cert)?);
                sc.samples = Some(*samples);
            }
            Command::FeedbackDemo { g, controller, x0, noise } => {
                sc.kind = ScenarioKind::FeedbackDemo;
                sc.g = Some(*g);
                sc.controller = Some(*controller);
                sc.initial = Some(Channels::One(x0.signal()));
                if *noise != 0.0 {
                    sc.input = Some(Channels::One(Signal::Random {
                        amplitude: *noise,
                        piece: 1.0 / 16.0,
                        stream: 0,
                    }));
                }
            }
            Command::EquivalenceAudit { system, initial, input } => {
                sc.kind = ScenarioKind::EquivalenceAudit;
                sc.system = sys(system)?;
                sc.initial = csv_signal(initial);
                sc.input = csv_signal(input);
            }
            Command::Acceptance { criterion } => {
                sc.kind = ScenarioKind::Acceptance;
                sc.criterion = *criterion;
            }
            Command::Run { scenario } => sc = Scenario::load(scenario)?,
        }
        if let Some(s) = self.seed {
            sc.numerics.seed = s;
        }
        if let Some(k) = self.cells {
            sc.numerics.cells = k;
        }
        if let Some(t) = self.horizon {
            sc.numerics.horizon = t;
        }
        if let Some(t) = self.tol {
            sc.numerics.tol = t;
        }
        if let Some(o) = &self.out {
            sc.outputs.dir = Some(o.clone());
        }
        Ok(sc)
    }
}

fn solve_config(sc: &Scenario, horizon: f64) -> SolveConfig {
    SolveConfig {
        tol: sc.numerics.tol,
        horizon,
        ..SolveConfig::default()
    }
}

/// Output sink: nothing is written unless the scenario names a directory.
struct Sink<'a> {
    dir: Option<&'a Path>,
}

impl Sink<'_> {
    fn open(&self, name: &str) -> Result<Option<fs::File>> {
        match self.dir {
            None => Ok(None),
            Some(d) => {
                fs::create_dir_all(d)?;
                Ok(Some(fs::File::create(d.join(name))?))
            }
        }
    }

    fn sampled(&self, name: &str, f: &SampledFn, lo: &str, hi: &str, names: &[String]) -> Result<()> {
        if let Some(file) = self.open(name)? {
            f.write_csv(file, lo, hi, names)?;
        }
        Ok(())
    }

    fn rows(&self, name: &str, header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
        if let Some(file) = self.open(name)? {
            let mut w = csv::Writer::from_writer(file);
            w.write_record(header)?;
            for r in rows {
                w.write_record(r.iter().map(|v| fmt17(*v)))?;
            }
            w.flush()?;
        }
        Ok(())
    }

    fn lines(&self, name: &str, lines: &[String]) -> Result<()> {
        if let Some(mut file) = self.open(name)? {
            for l in lines {
                writeln!(file, "{l}")?;
            }
        }
        Ok(())
    }

    fn json(&self, name: &str, v: &Value) -> Result<()> {
        if let Some(mut file) = self.open(name)? {
            writeln!(file, "{}", serde_json::to_string_pretty(v)?)?;
        }
        Ok(())
    }
}

fn snapshot_name(t: f64) -> String {
    format!("snapshot_t{t:.6}.csv")
}

fn escape_json(traj: &Trajectory) -> Value {
    match &traj.escape {
        None => Value::Null,
        Some(e) => serde_json::to_value(e).unwrap_or(Value::Null),
    }
}

fn state_names(n: usize, prefix: &str) -> Vec<String> {
    (1..=n).map(|j| format!("{prefix}{j}")).collect()
}

/// Validates and runs a scenario, writing artifacts to its output directory.
pub fn run_scenario(sc: &Scenario) -> Result<Outcome> {
    let built = sc.validate()?;
    let sink = Sink {
        dir: sc.outputs.dir.as_deref(),
    };
    let num = &sc.numerics;
    let seed = num.seed;
    let outcome = match sc.kind {
        ScenarioKind::SimulateIde => {
            let sys = built.as_ref().expect("validated").ide()?;
            let h = sys.r / num.cells as f64;
            let steps = (num.horizon / h).round() as usize;
            let x0 = sc.initial.clone().unwrap_or_default().sample(Grid::new(-sys.r, h, num.cells)?, sys.n, seed, streams::INITIAL)?;
            let w = sc.input.clone().unwrap_or_default().sample(
                Grid::new(-sys.r, h, num.cells + steps)?,
                sys.input_dim(),
                seed,
                streams::DISTURBANCE,
            )?;
            check_disturbances(&w, &sys.inputs)?;
            let traj = solve(&sys, &x0, &w, &solve_config(sc, steps as f64 * h))?;
            sink.sampled("solution.csv", &traj.solution, "t_lo", "t_hi", &state_names(sys.n, "x"))?;
            let s = x0.sup_norm().max(w.sup_norm());
            let report = json!({
                "kind": "simulate-ide",
                "step": h,
                "steps": traj.steps(),
                "end_time": traj.end_time(),
                "windows": traj.windows.len(),
                "max_contraction_factor": traj.max_factor(),
                "max_iterate": traj.max_iterate(),
                "escape": escape_json(&traj),
                "escape_time_lower_bound": escape_time_lower_bound(&sys, s),
                "final_norm": traj.solution.value(traj.solution.len() - 1).iter().map(|v| v * v).sum::<f64>().sqrt(),
            });
            Outcome {
                code: if traj.escape.is_some() { EXIT_ESCAPE } else { EXIT_OK },
                report,
                log: traj.log_lines(),
            }
        }
        ScenarioKind::SimulatePde => {
            let pde = built.as_ref().and_then(BuiltSystem::pde).expect("validated").clone();
            let (x0, w) = pde_data(sc, &pde, num.cells)?;
            let run = pde.solve_pde(&x0, &w, &solve_config(sc, num.horizon), &sc.outputs.snapshot_times)?;
            for (t, snap) in &run.snapshots {
                sink.sampled(&snapshot_name(*t), snap, "z_lo", "z_hi", &["x".to_string()])?;
            }
            sink.rows("sup_trace.csv", &["t", "sup_x"], run.sup_trace.iter().map(|(t, s)| vec![*t, *s]))?;
            let n = run.trajectory.solution.dim();
            let mut names = state_names(n - 1, "p");
            names.push("v".into());
            sink.sampled("pv.csv", &run.trajectory.solution, "t_lo", "t_hi", &names)?;
            let report = json!({
                "kind": "simulate-pde",
                "step": run.trajectory.step,
                "steps": run.trajectory.steps(),
                "end_time": run.trajectory.end_time(),
                "initial_sup": x0.sup_norm(),
                "final_sup": run.sup_trace.last().map(|(_, s)| *s),
                "max_contraction_factor": run.trajectory.max_factor(),
                "escape": escape_json(&run.trajectory),
                "snapshots": run.snapshots.iter().map(|(t, _)| *t).collect::<Vec<_>>(),
            });
            Outcome {
                code: if run.trajectory.escape.is_some() { EXIT_ESCAPE } else { EXIT_OK },
                report,
                log: run.trajectory.log_lines(),
            }
        }
        ScenarioKind::Convert => {
            let pde = built.as_ref().and_then(BuiltSystem::pde).expect("validated").clone();
            let ide = pde.to_ide()?;
            let radii = [0.1, 0.5, 1.0, 2.0, 5.0];
            let m = &ide.moduli;
            let report = json!({
                "kind": "convert",
                "state_dim": ide.n,
                "channels": pde.channels(),
                "delay": ide.r,
                "input_dim": ide.input_dim(),
                "eval_point": ide.eval_point,
                "step": pde.time_step(num.cells),
                "moduli": {
                    "R": radii,
                    "N": radii.iter().map(|r| (m.n)(*r)).collect::<Vec<_>>(),
                    "M": radii.iter().map(|r| (m.m)(*r)).collect::<Vec<_>>(),
                    "a": radii.iter().map(|r| (m.a)(*r)).collect::<Vec<_>>(),
                    "b": m.b.as_ref().map(|b| radii.iter().map(|r| b(*r)).collect::<Vec<_>>()),
                },
                "system": &*pde,
            });
            Outcome {
                code: EXIT_OK,
                report,
                log: Vec::new(),
            }
        }
        ScenarioKind::CheckRazumikhin => {
            let sys = built.as_ref().expect("validated").ide()?;
            let cert = sc.certificate.as_ref().expect("validated").build(sys.r)?;
            let rep = check_razumikhin(&sys, &cert, sc.samples.unwrap_or(10_000), num.cells, seed)?;
            let report = json!({
                "kind": "check-razumikhin",
                "passed": rep.passed(),
                "h_star": cert.h_star(sys.r),
                "sigma": cert.sigma,
                "report": rep,
            });
            Outcome {
                code: if rep.passed() { EXIT_OK } else { EXIT_CHECK_FAILED },
                report,
                log: Vec::new(),
            }
        }
        ScenarioKind::FeedbackDemo => feedback_demo(sc, &sink)?,
        ScenarioKind::EquivalenceAudit => {
            let pde = built.as_ref().and_then(BuiltSystem::pde).expect("validated").clone();
            let mut d = [0.0; 2];
            for (i, k) in [num.cells, 2 * num.cells].into_iter().enumerate() {
                let (x0, w) = pde_data(sc, &pde, k)?;
                d[i] = pde.equivalence_discrepancy(&x0, &w, &solve_config(sc, num.horizon))?;
            }
            let exact = d[0] <= 1e-13 && d[1] <= 1e-13;
            let ratio = d[0] / d[1];
            let passed = exact || (1.5..=2.5).contains(&ratio);
            let report = json!({
                "kind": "equivalence-audit",
                "K": [num.cells, 2 * num.cells],
                "discrepancy": d,
                "ratio": if exact { Value::Null } else { json!(ratio) },
                "passed": passed,
                "failure": if passed { Value::Null } else { json!(format!("convergence ratio {ratio:.4} outside [1.5, 2.5]: not first order")) },
            });
            Outcome {
                code: if passed { EXIT_OK } else { EXIT_CHECK_FAILED },
                report,
                log: Vec::new(),
            }
        }
        ScenarioKind::Acceptance => {
            let reports = match sc.criterion {
                Some(c) => vec![acceptance::run(c, seed)?],
                None => acceptance::run_all(seed)?,
            };
            let passed = reports.iter().all(|r| r.passed);
            Outcome {
                code: if passed { EXIT_OK } else { EXIT_CHECK_FAILED },
                log: reports.iter().map(|r| r.line()).collect(),
                report: json!({"kind": "acceptance", "passed": passed, "criteria": reports}),
            }
        }
    };
    sink.json("report.json", &outcome.report)?;
    if !outcome.log.is_empty() {
        let name = if sc.kind == ScenarioKind::Acceptance { "acceptance.log" } else { "windows.log" };
        sink.lines(name, &outcome.log)?;
    }
    Ok(outcome)
}

/// Rejects disturbance channels that leave their bounds.
fn check_disturbances(w: &SampledFn, inputs: &InputSpec) -> Result<()> {
    let mut errs = Vec::new();
    for (j, b) in inputs.d_bounds.iter().enumerate() {
        let sup = (0..w.len()).map(|k| w.value(k)[j].abs()).fold(0.0, f64::max);
        if sup > *b {
            errs.push(format!("disturbance channel {j} reaches {sup}, its bound is {b}"));
        }
    }
    if errs.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(errs))
    }
}

/// Initial profile and input of a PDE scenario at `cells` cells.
fn pde_data(sc: &Scenario, pde: &HyperbolicSystem, cells: usize) -> Result<(SampledFn, SampledFn)> {
    let num = &sc.numerics;
    let h = pde.time_step(cells);
    let steps = (num.horizon / h).round() as usize;
    let x0 = sc
        .initial
        .clone()
        .unwrap_or_default()
        .sample(HyperbolicSystem::profile_grid(cells), 1, num.seed, streams::INITIAL)?;
    let w = sc.input.clone().unwrap_or_default().sample(
        Grid::new(-pde.delay(), h, cells + steps)?,
        pde.inputs.dim().max(1),
        num.seed,
        streams::DISTURBANCE,
    )?;
    check_disturbances(&w, &pde.inputs)?;
    Ok((x0, w))
}

fn feedback_demo(sc: &Scenario, sink: &Sink) -> Result<Outcome> {
    let num = &sc.numerics;
    let g = sc.g.unwrap_or(1.0);
    let controller = sc.controller.unwrap_or(ControllerKind::KernelIntegral);
    let cells = num.cells;
    let h = 1.0 / cells as f64;
    let steps = (num.horizon / h).round() as usize;
    let x0 = sc
        .initial
        .clone()
        .unwrap_or(Channels::One(InitialShape::Step.signal()))
        .sample(HyperbolicSystem::profile_grid(cells), 1, num.seed, streams::INITIAL)?;
    let w = sc
        .input
        .clone()
        .unwrap_or_default()
        .sample(Grid::new(-1.0, h, cells + steps)?, 1, num.seed, streams::NOISE)?;
    let mut times: Vec<f64> = if sc.outputs.snapshot_times.is_empty() {
        [0.0, 0.5, 1.0, 1.5, 2.0, 2.5].into_iter().filter(|t| *t <= num.horizon).collect()
    } else {
        sc.outputs.snapshot_times.clone()
    };
    if !times.contains(&num.horizon) {
        times.push(num.horizon);
    }
    let run = closed_loop(g, &x0, controller, &w, num.horizon, &times)?;
    for (t, snap) in &run.snapshots {
        sink.sampled(&snapshot_name(*t), snap, "z_lo", "z_hi", &["x".to_string()])?;
    }
    sink.rows("boundary_traces.csv", &["t", "x_at_1", "x_at_0"], run.traces.iter().map(|(t, a, b)| vec![*t, *a, *b]))?;
    sink.rows(
        "control.csv",
        &["t", "u", "u_kernel", "u_ide", "u_two_point"],
        run.control.iter().zip(&run.control_forms).map(|((t, u), f)| vec![*t, *u, f[0], f[1], f[2]]),
    )?;
    sink.rows("sup_trace.csv", &["t", "sup_x"], run.sup_trace.iter().map(|(t, s)| vec![*t, *s]))?;
    let settle = 2.0 + 2.0 * h;
    let report = json!({
        "kind": "feedback-demo",
        "g": g,
        "controller": controller,
        "K": cells,
        "T": num.horizon,
        "initial_sup": x0.sup_norm(),
        "actuator_error_sup": w.sup_norm(),
        "sup_after_settle": if num.horizon >= settle { json!(run.sup_after(settle)) } else { Value::Null },
        "controller_spread": run.controller_spread(),
        "snapshots": run.snapshots.iter().map(|(t, s)| json!({"t": t, "sup": s.sup_norm()})).collect::<Vec<_>>(),
        "escape": escape_json(&run.trajectory),
    });
    Ok(Outcome {
        code: if run.trajectory.escape.is_some() { EXIT_ESCAPE } else { EXIT_OK },
        report,
        log: run.trajectory.log_lines(),
    })
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Validation(_) | Error::Alignment(_) | Error::Json(_) => EXIT_VALIDATION,
        Error::GridTooCoarse { .. } => EXIT_ESCAPE,
        Error::Certificate(_) => EXIT_CHECK_FAILED,
        _ => EXIT_OTHER,
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    let result = cli.scenario().and_then(|sc| Ok((sc.kind, run_scenario(&sc)?)));
    match result {
        Ok((kind, out)) => {
            if cli.verbose || kind == ScenarioKind::Acceptance {
                for l in &out.log {
                    eprintln!("{l}");
                }
            }
            println!("{}", serde_json::to_string_pretty(&out.report).unwrap_or_default());
            out.code
        }
        Err(e) => {
            let code = exit_code(&e);
            let report = match &e {
                Error::Validation(v) => json!({"error": "validation", "messages": v}),
                other => json!({"error": other.to_string()}),
            };
            eprintln!("{e}");
            println!("{}", serde_json::to_string_pretty(&report).unwrap_or_default());
            code
        }
    }
}
