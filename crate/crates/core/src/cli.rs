//! Command-line front end.
//!
//! Exit codes: 0 success or dominance holds, 1 violation or counterexample,
//! 2 usage or configuration error, 3 numerical failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::comparison::{
    check_qm_affine, check_qm_sampled, equilibrium_distance_analysis, estimate_rate,
    metzler_violations, ComparisonError, DominanceReport, DominanceSetup, DominanceVerdict,
    NormConclusion, QmReport,
};
use crate::cone::{check_cone_qm, ConeError, ConeQmReport};
use crate::dynamics::{DynamicsError, Trajectory};
use crate::linalg::perron_eigenpair;
use crate::presets::{self, Ex1Condition, Ex1Params, Ex3Report};
use crate::sampling::FalsifierVerdict;
use crate::scenario::{ConfigError, InitialSpec, Prepared, Scenario};

pub const SEED_ENV: &str = "VECCONTRACT_SEED";
pub const DEFAULT_OUT_DIR: &str = "veccontract-out";

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "veccontract",
    version,
    about = "Vector contraction analysis of nonlinear systems"
)]
pub struct Cli {
    /// Seed for the sampling falsifiers (overrides the config and VECCONTRACT_SEED).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Integration step (overrides the config).
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Final time (overrides the config).
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub tmax: Option<f64>,
    /// Output directory for artifacts.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Run the command on every `*.json` config in a directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub batch: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArg {
    /// Scenario config (JSON). Omit when using --batch.
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExampleName {
    Ex1,
    Ex2,
    Ex3,
}

#[derive(Debug, Clone, Args)]
pub struct ExampleArgs {
    pub name: ExampleName,
    /// ex1: number of states besides sigma.
    #[arg(long)]
    pub n: Option<usize>,
    /// ex1: decay rates, one value or n comma-separated values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub rho: Option<Vec<f64>>,
    /// ex1: couplings, one value or n comma-separated values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub a: Option<Vec<f64>>,
    /// ex1: damping parameter.
    #[arg(long, allow_negative_numbers = true)]
    pub p: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub dx0: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub u0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Integrate the system, its variational system and the comparison system.
    Simulate(ConfigArg),
    /// Check that the squared vector distance stays below the comparison solution.
    Verify(ConfigArg),
    /// Componentwise quasi-monotonicity of the comparison map.
    CheckQm(ConfigArg),
    /// Quasi-monotonicity of the comparison map relative to the configured cone.
    CheckConeQm(ConfigArg),
    /// Evaluate the vector-valued norm and its squared rate at a displacement.
    Norm {
        config: Option<PathBuf>,
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            required = true
        )]
        at: Vec<f64>,
    },
    /// Run a built-in worked example end to end.
    Example(ExampleArgs),
}

/// A failed run: exit code plus message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn config(e: impl std::fmt::Display) -> Self {
        Failure {
            code: EXIT_CONFIG,
            message: e.to_string(),
        }
    }

    fn numerical(e: impl std::fmt::Display) -> Self {
        Failure {
            code: EXIT_NUMERICAL,
            message: e.to_string(),
        }
    }

    fn io(path: &Path, e: io::Error) -> Self {
        Failure::config(format!("cannot write {}: {e}", path.display()))
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::config(e)
    }
}

impl From<DynamicsError> for Failure {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::NonFiniteState { .. }
            | DynamicsError::StepLimit { .. }
            | DynamicsError::Evaluation { .. } => Failure::numerical(e),
            _ => Failure::config(e),
        }
    }
}

impl From<ConeError> for Failure {
    fn from(e: ConeError) -> Self {
        match e {
            ConeError::Expr(_) | ConeError::NoBoundaryDirection => Failure::numerical(e),
            _ => Failure::config(e),
        }
    }
}

impl From<ComparisonError> for Failure {
    fn from(e: ComparisonError) -> Self {
        match e {
            ComparisonError::Dynamics(d) => d.into(),
            ComparisonError::Cone(c) => c.into(),
            ComparisonError::Evaluation(_)
            | ComparisonError::NonPositiveSeries { .. }
            | ComparisonError::Norm(_) => Failure::numerical(e),
            _ => Failure::config(e),
        }
    }
}

/// Result of one command: exit code and the text to print.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub text: String,
}

/// Global flags shared by every run.
#[derive(Debug, Clone, Default)]
struct Overrides {
    seed: Option<u64>,
    dt: Option<f64>,
    tmax: Option<f64>,
    out: Option<PathBuf>,
}

impl Overrides {
    fn apply(&self, scenario: &mut Scenario) {
        if let Some(dt) = self.dt {
            scenario.integrator.dt = dt;
        }
        if let Some(t) = self.tmax {
            scenario.integrator.t_end = t;
        }
    }

    /// `--seed`, then the config, then `VECCONTRACT_SEED`, then 0.
    fn seed(&self, scenario: &Scenario) -> Result<u64, Failure> {
        if let Some(s) = self.seed.or(scenario.seed) {
            return Ok(s);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v.trim().parse().map_err(|_| {
                Failure::config(format!("{SEED_ENV}={v:?} is not an unsigned integer"))
            }),
            Err(_) => Ok(0),
        }
    }

    fn out_dir(&self, scenario: &Scenario) -> PathBuf {
        self.out
            .clone()
            .or_else(|| scenario.output.as_ref().map(|o| PathBuf::from(&o.dir)))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: u64,
    config: &'a Scenario,
    #[serde(skip_serializing_if = "Option::is_none")]
    params: Option<serde_json::Value>,
    artifacts: Vec<&'static str>,
}

struct Artifacts {
    dir: PathBuf,
    written: Vec<&'static str>,
}

impl Artifacts {
    fn new(dir: PathBuf) -> Result<Self, Failure> {
        fs::create_dir_all(&dir).map_err(|e| Failure::io(&dir, e))?;
        Ok(Artifacts {
            dir,
            written: Vec::new(),
        })
    }

    fn write_with<F>(&mut self, name: &'static str, f: F) -> Result<(), Failure>
    where
        F: FnOnce(&mut BufWriter<fs::File>) -> io::Result<()>,
    {
        let path = self.dir.join(name);
        let file = fs::File::create(&path).map_err(|e| Failure::io(&path, e))?;
        let mut w = BufWriter::new(file);
        f(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Failure::io(&path, e))?;
        self.written.push(name);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &'static str, value: &T) -> Result<(), Failure> {
        self.write_with(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value).map_err(io::Error::other)?;
            writeln!(w)
        })
    }

    fn trajectory(&mut self, traj: &Trajectory) -> Result<(), Failure> {
        self.write_with("trajectory.csv", |w| traj.write_csv(w))
    }

    /// Writes `manifest.json` listing every artifact and prints the directory.
    fn finish(
        mut self,
        text: &mut String,
        command: &str,
        seed: u64,
        config: &Scenario,
        params: Option<serde_json::Value>,
    ) -> Result<(), Failure> {
        let mut artifacts = self.written.clone();
        artifacts.push("manifest.json");
        let m = Manifest {
            tool: "veccontract",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            config,
            params,
            artifacts: artifacts.clone(),
        };
        self.json("manifest.json", &m)?;
        let _ = writeln!(text, "artifacts: {}", self.dir.display());
        Ok(())
    }
}

fn integrate(p: &Prepared) -> Result<Trajectory, Failure> {
    let init = p.initial()?;
    let cfg = &p.scenario.integrator;
    let traj = match (&p.comparison, &init.dx0, &init.u0) {
        (Some(cmp), Some(dx0), Some(u0)) => {
            p.system.integrate_coupled(cmp, &init.x0, dx0, u0, cfg)?
        }
        (_, Some(dx0), _) => p.system.integrate_variational(&init.x0, dx0, cfg)?,
        _ => p.system.integrate(&init.x0, cfg)?,
    };
    Ok(traj)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassicalBaseline {
    /// Largest eigenvalue of the symmetric Jacobian part over the grid.
    pub max_lambda: f64,
    pub at_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumSummary {
    pub x_bar: Vec<f64>,
    pub initial: Vec<f64>,
    pub last: Vec<f64>,
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub dominance: DominanceReport,
    pub classical_baseline: ClassicalBaseline,
    /// Envelope rate of the comparison solution, `R(t) ≤ R(t0)·e^{−2λ(t−t0)}`.
    pub envelope_rate: Option<f64>,
    /// Envelope rate of the squared vector distance itself.
    pub distance_rate: Option<f64>,
    pub equilibrium: Option<EquilibriumSummary>,
}

/// Runs the dominance check for a prepared scenario.
pub fn run_verify(p: &Prepared) -> Result<(Trajectory, VerifyReport), Failure> {
    p.dx0()?;
    p.u0()?;
    let cmp = p.comparison()?;
    let traj = integrate(p)?;
    let setup = DominanceSetup {
        system: &p.system,
        comparison: cmp,
        gain: &p.gain,
        ordering: &p.ordering,
        region: p.region.as_ref(),
    };
    let dominance = crate::comparison::verify_dominance(&traj, &setup)?;

    let mut baseline = ClassicalBaseline {
        max_lambda: f64::NEG_INFINITY,
        at_time: traj.times()[0],
    };
    for (t, x) in traj.times().iter().zip(traj.states()) {
        let l = p.system.max_symmetric_jacobian_eig(*t, x)?;
        if l > baseline.max_lambda {
            baseline = ClassicalBaseline {
                max_lambda: l,
                at_time: *t,
            };
        }
    }

    let envelope_rate = estimate_rate(
        &dominance.times,
        &dominance.envelope,
        &dominance.envelope[0],
    )
    .ok();
    let distance_rate = estimate_rate(
        &dominance.times,
        &dominance.distance,
        &dominance.distance[0],
    )
    .ok();
    let equilibrium = match &p.scenario.equilibrium {
        None => None,
        Some(x_bar) => {
            let eq = equilibrium_distance_analysis(&p.system, x_bar, &p.gain, &traj)?;
            Some(EquilibriumSummary {
                x_bar: x_bar.clone(),
                rate: estimate_rate(&eq.times, &eq.series, &eq.initial).ok(),
                last: eq.series.last().cloned().unwrap_or_default(),
                initial: eq.initial,
            })
        }
    };
    Ok((
        traj,
        VerifyReport {
            dominance,
            classical_baseline: baseline,
            envelope_rate,
            distance_rate,
            equilibrium,
        },
    ))
}

fn describe_dominance(text: &mut String, r: &VerifyReport) {
    let d = &r.dominance;
    match &d.verdict {
        DominanceVerdict::HoldsOnGrid => {
            let _ = writeln!(
                text,
                "dominance: holds-on-grid ({} ordering, {} steps), margin {:.6e} at t = {}{}",
                d.ordering,
                d.steps,
                d.margin,
                d.margin_time,
                if d.fragile { " [fragile]" } else { "" }
            );
        }
        DominanceVerdict::Violated { time, component } => {
            let _ = writeln!(
                text,
                "dominance: violated at t = {time}, component {}",
                component + 1
            );
        }
    }
    let _ = writeln!(
        text,
        "premise: {} ({} grid points fail, min margin {:.6e})",
        if d.premise.holds_on_grid {
            "holds-on-grid"
        } else {
            "not strict on grid"
        },
        d.premise.violations,
        d.premise.min_margin
    );
    if let Some(region) = &d.region {
        let _ = match region.first_exit {
            None => writeln!(
                text,
                "region {:?}: inside on the whole grid",
                region.conditions
            ),
            Some(t) => writeln!(text, "region {:?}: left at t = {t}", region.conditions),
        };
    }
    let conclusion = match d.norm_conclusion {
        NormConclusion::EnvelopeVanishing => "envelope vanishing: displacement norm driven to zero",
        NormConclusion::EnvelopeNotVanishing => "envelope not vanishing on this horizon",
        NormConclusion::DominanceViolated => "no conclusion: dominance violated",
        NormConclusion::InconclusiveForUnweightedCoordinates => {
            "inconclusive for unweighted coordinates (gain not definite)"
        }
    };
    let _ = writeln!(text, "conclusion: {conclusion}");
    if let Some(rate) = r.envelope_rate {
        let _ = writeln!(text, "envelope rate: {rate:.6}");
    }
    let _ = writeln!(
        text,
        "classical baseline: max symmetric-Jacobian eigenvalue {:.6} at t = {}",
        r.classical_baseline.max_lambda, r.classical_baseline.at_time
    );
}

fn dominance_code(r: &VerifyReport) -> i32 {
    if r.dominance.holds() {
        EXIT_OK
    } else {
        EXIT_VIOLATED
    }
}

fn write_verify(art: &mut Artifacts, traj: &Trajectory, r: &VerifyReport) -> Result<(), Failure> {
    art.trajectory(traj)?;
    art.write_with("dominance.csv", |w| r.dominance.write_csv(w))?;
    art.json("report.json", r)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetzlerSummary {
    pub holds: bool,
    pub violations: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QmSummary {
    /// Exact test on the affine part, when `φ` is affine.
    pub metzler: Option<MetzlerSummary>,
    pub sampled: QmReport,
}

impl QmSummary {
    fn code(&self) -> i32 {
        let exact_fail = self.metzler.as_ref().is_some_and(|m| !m.holds);
        if exact_fail || self.sampled.verdict == FalsifierVerdict::CounterexampleFound {
            EXIT_VIOLATED
        } else {
            EXIT_OK
        }
    }
}

pub fn run_check_qm(p: &Prepared, seed: u64) -> Result<QmSummary, Failure> {
    let cmp = p.comparison()?;
    let frozen = p.frozen_state()?;
    let metzler = match cmp.affine() {
        Some(a) => Some(MetzlerSummary {
            holds: check_qm_affine(&a.matrix)?,
            violations: metzler_violations(&a.matrix)?,
        }),
        None => None,
    };
    let sampled = check_qm_sampled(cmp, &p.sampling(seed), frozen.as_deref())?;
    Ok(QmSummary { metzler, sampled })
}

pub fn run_check_cone_qm(p: &Prepared, seed: u64) -> Result<ConeQmReport, Failure> {
    let cmp = p.comparison()?;
    let frozen = p.frozen_state()?.unwrap_or_default();
    let f = cmp.frozen(p.scenario.integrator.t0, &frozen);
    Ok(check_cone_qm(&f, &p.cone(), &p.sampling(seed))?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormReport {
    pub at: Vec<f64>,
    pub value: Vec<f64>,
    pub squared: Vec<f64>,
    /// `2A·dvec(diag(δx)·diag(J(t0, x0)·δx))`, when the config gives `x0`.
    pub squared_rate: Option<Vec<f64>>,
    pub definite: bool,
}

pub fn run_norm(p: &Prepared, at: &[f64]) -> Result<NormReport, Failure> {
    let value = p.gain.norm(at).map_err(Failure::config)?;
    let squared = p.gain.norm_squared(at).map_err(Failure::config)?;
    let squared_rate = match &p.scenario.initial {
        Some(init) if at.len() == p.system.dim() => {
            let h = p
                .system
                .variational_rhs(p.scenario.integrator.t0, &init.x0, at)?;
            Some(p.gain.norm_squared_rate(at, &h).map_err(Failure::config)?)
        }
        _ => None,
    };
    Ok(NormReport {
        at: at.to_vec(),
        value: value.into_inner(),
        squared,
        squared_rate,
        definite: p.gain.is_definite(),
    })
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
    format!("({})", parts.join(", "))
}

/// One scenario-driven command on one config file.
fn run_config(
    command: &Command,
    path: &Path,
    flags: &Overrides,
    out: Option<PathBuf>,
) -> Result<Outcome, Failure> {
    let mut scenario = Scenario::from_file(path)?;
    flags.apply(&mut scenario);
    let seed = flags.seed(&scenario)?;
    let dir = out.unwrap_or_else(|| flags.out_dir(&scenario));
    let p = scenario.prepare()?;
    let mut text = String::new();
    let (name, code, art) = match command {
        Command::Simulate(_) => {
            let traj = integrate(&p)?;
            let mut art = Artifacts::new(dir)?;
            art.trajectory(&traj)?;
            let last = traj.states().last().expect("non-empty");
            let _ = writeln!(
                text,
                "simulate: {} steps to t = {}, x(T) = {}",
                traj.len() - 1,
                traj.times()[traj.len() - 1],
                fmt_vec(last)
            );
            ("simulate", EXIT_OK, art)
        }
        Command::Verify(_) => {
            let (traj, report) = run_verify(&p)?;
            let mut art = Artifacts::new(dir)?;
            write_verify(&mut art, &traj, &report)?;
            describe_dominance(&mut text, &report);
            ("verify", dominance_code(&report), art)
        }
        Command::CheckQm(_) => {
            let r = run_check_qm(&p, seed)?;
            let mut art = Artifacts::new(dir)?;
            art.json("qm_report.json", &r)?;
            if let Some(m) = &r.metzler {
                let _ = writeln!(text, "metzler (exact, affine part): {}", m.holds);
            }
            let _ = writeln!(
                text,
                "sampled: {} ({} samples, seed {})",
                verdict_name(r.sampled.verdict),
                r.sampled.samples,
                r.sampled.seed
            );
            if let Some(cx) = &r.sampled.counterexample {
                let _ = writeln!(
                    text,
                    "counterexample: component {}, u = {}, v = {}, phi_u = {}, phi_v = {}",
                    cx.component + 1,
                    fmt_vec(&cx.u),
                    fmt_vec(&cx.v),
                    cx.phi_u,
                    cx.phi_v
                );
            }
            ("check-qm", r.code(), art)
        }
        Command::CheckConeQm(_) => {
            let r = run_check_cone_qm(&p, seed)?;
            let mut art = Artifacts::new(dir)?;
            art.json("cone_qm_report.json", &r)?;
            describe_cone_qm(&mut text, &r);
            ("check-cone-qm", cone_code(&r), art)
        }
        Command::Norm { at, .. } => {
            let r = run_norm(&p, at)?;
            let mut art = Artifacts::new(dir)?;
            art.json("norm.json", &r)?;
            let _ = writeln!(text, "norm: {}", fmt_vec(&r.value));
            let _ = writeln!(text, "squared: {}", fmt_vec(&r.squared));
            if let Some(rate) = &r.squared_rate {
                let _ = writeln!(text, "squared rate: {}", fmt_vec(rate));
            }
            ("norm", EXIT_OK, art)
        }
        Command::Example(_) => unreachable!("examples do not read configs"),
    };
    art.finish(&mut text, name, seed, &p.scenario, None)?;
    Ok(Outcome { code, text })
}

fn verdict_name(v: FalsifierVerdict) -> &'static str {
    match v {
        FalsifierVerdict::NoCounterexampleFound => "no counterexample found",
        FalsifierVerdict::CounterexampleFound => "counterexample found",
    }
}

fn cone_code(r: &ConeQmReport) -> i32 {
    match r.verdict {
        FalsifierVerdict::NoCounterexampleFound => EXIT_OK,
        FalsifierVerdict::CounterexampleFound => EXIT_VIOLATED,
    }
}

fn describe_cone_qm(text: &mut String, r: &ConeQmReport) {
    let _ = writeln!(
        text,
        "cone quasi-monotonicity: {} ({} samples, seed {})",
        verdict_name(r.verdict),
        r.samples,
        r.seed
    );
    if let Some(cx) = &r.counterexample {
        let _ = writeln!(
            text,
            "counterexample: x = {}, y = {}, active rows {:?}",
            fmt_vec(&cx.x),
            fmt_vec(&cx.y),
            cx.active_rows.iter().map(|i| i + 1).collect::<Vec<_>>()
        );
        for w in &cx.witnesses {
            let _ = writeln!(
                text,
                "  witness {}: <phi, F(y) - F(x)> = {}",
                fmt_vec(&w.phi),
                w.pairing
            );
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ex1Summary {
    pub params: Ex1Params,
    pub convergence_condition: Ex1Condition,
    pub comparison_matrix: Vec<Vec<f64>>,
    pub metzler: bool,
    /// Largest real part among the eigenvalues of the comparison matrix.
    pub spectral_abscissa: Option<f64>,
    pub comparison_hurwitz: Option<bool>,
    pub verify: VerifyReport,
}

fn apply_initial(s: &mut Scenario, args: &ExampleArgs) {
    if args.x0.is_none() && args.dx0.is_none() && args.u0.is_none() {
        return;
    }
    let init = s.initial.get_or_insert_with(|| InitialSpec {
        x0: Vec::new(),
        dx0: None,
        u0: None,
    });
    if let Some(x0) = &args.x0 {
        init.x0 = x0.clone();
    }
    if let Some(dx0) = &args.dx0 {
        init.dx0 = Some(dx0.clone());
    }
    if let Some(u0) = &args.u0 {
        init.u0 = Some(u0.clone());
    }
}

fn run_example(args: &ExampleArgs, flags: &Overrides) -> Result<Outcome, Failure> {
    let ex1_flags = args.n.is_some() || args.rho.is_some() || args.a.is_some() || args.p.is_some();
    if ex1_flags && args.name != ExampleName::Ex1 {
        return Err(Failure::config("--n, --rho, --a and --p apply to ex1 only"));
    }
    let mut text = String::new();
    match args.name {
        ExampleName::Ex1 => {
            let d = Ex1Params::default();
            let params = Ex1Params::new(
                args.n.unwrap_or(d.n),
                args.rho.clone().unwrap_or(d.rho),
                args.a.clone().unwrap_or(d.a),
                args.p.unwrap_or(d.p),
            )?;
            let mut s = presets::ex1_scenario(&params);
            apply_initial(&mut s, args);
            flags.apply(&mut s);
            let seed = flags.seed(&s)?;
            let p = s.prepare()?;
            let (traj, verify) = run_verify(&p)?;
            let m = params.comparison_matrix();
            let metzler = check_qm_affine(&m)?;
            let spectral_abscissa = perron_eigenpair(&m).map(|(l, _)| l);
            let summary = Ex1Summary {
                convergence_condition: params.condition(),
                comparison_hurwitz: spectral_abscissa.map(|l| l < 0.0),
                comparison_matrix: m,
                metzler,
                spectral_abscissa,
                params: params.clone(),
                verify,
            };
            let c = summary.convergence_condition;
            let _ = writeln!(
                text,
                "convergence condition 2(p+1) > sum |a_i|/rho_i: {} > {} {}",
                c.lhs,
                c.rhs,
                if c.holds { "holds" } else { "VIOLATED" }
            );
            let _ = writeln!(text, "comparison matrix metzler: {metzler}");
            match spectral_abscissa {
                Some(l) => {
                    let _ = writeln!(
                        text,
                        "comparison spectral abscissa: {l:.6} ({})",
                        if l < 0.0 { "Hurwitz" } else { "not Hurwitz" }
                    );
                }
                None => {
                    let _ = writeln!(
                        text,
                        "comparison spectral abscissa: unavailable (not Metzler)"
                    );
                }
            }
            describe_dominance(&mut text, &summary.verify);
            let code = dominance_code(&summary.verify);
            let mut art = Artifacts::new(flags.out_dir(&p.scenario))?;
            write_verify(&mut art, &traj, &summary.verify)?;
            art.json("example.json", &summary)?;
            let params_json = serde_json::to_value(&params).ok();
            art.finish(&mut text, "example ex1", seed, &p.scenario, params_json)?;
            Ok(Outcome { code, text })
        }
        ExampleName::Ex2 => {
            let mut s = presets::ex2_scenario();
            apply_initial(&mut s, args);
            flags.apply(&mut s);
            let seed = flags.seed(&s)?;
            let p = s.prepare()?;
            let (traj, verify) = run_verify(&p)?;
            let qm = run_check_qm(&p, seed)?;
            describe_dominance(&mut text, &verify);
            let _ = writeln!(
                text,
                "comparison quasi-monotone at x0 (sampled): {}",
                verdict_name(qm.sampled.verdict)
            );
            let code = dominance_code(&verify);
            let mut art = Artifacts::new(flags.out_dir(&p.scenario))?;
            write_verify(&mut art, &traj, &verify)?;
            art.json("qm_report.json", &qm)?;
            art.finish(&mut text, "example ex2", seed, &p.scenario, None)?;
            Ok(Outcome { code, text })
        }
        ExampleName::Ex3 => {
            let mut s = presets::ex3_scenario();
            flags.apply(&mut s);
            let seed = flags.seed(&s)?;
            let p = s.prepare()?;
            let report: Ex3Report = presets::ex3_analysis(&p.sampling(seed))?;
            let _ = writeln!(
                text,
                "metzler (componentwise quasi-monotone): {}",
                report.metzler
            );
            for (k, w) in report.face_i.scales.iter().enumerate() {
                let pr = &report.face_i.pairings[k];
                let _ = writeln!(
                    text,
                    "face w1 = w2, w = {w}: <{}, F(w, w)> = {} = (3/2)*{w}",
                    fmt_vec(&pr.phi),
                    pr.pairing
                );
            }
            let per_scale = report.face_ii.pairings.len() / report.face_ii.scales.len();
            for (k, pr) in report.face_ii.pairings.iter().enumerate() {
                let w = report.face_ii.scales[k / per_scale];
                let y: Vec<f64> = report.face_ii.direction.iter().map(|d| d * w).collect();
                let _ = writeln!(
                    text,
                    "face w1 = 3*w2, y = {}: <{}, F(y)> = {} (phi in K*: {})",
                    fmt_vec(&y),
                    fmt_vec(&pr.phi),
                    pr.pairing,
                    pr.in_dual
                );
            }
            describe_cone_qm(&mut text, &report.cone_qm);
            let code = cone_code(&report.cone_qm);
            let mut art = Artifacts::new(flags.out_dir(&p.scenario))?;
            art.json("example.json", &report)?;
            art.json("cone_qm_report.json", &report.cone_qm)?;
            art.finish(&mut text, "example ex3", seed, &p.scenario, None)?;
            Ok(Outcome { code, text })
        }
    }
}

fn config_of(command: &Command) -> Option<&Path> {
    match command {
        Command::Simulate(c)
        | Command::Verify(c)
        | Command::CheckQm(c)
        | Command::CheckConeQm(c) => c.config.as_deref(),
        Command::Norm { config, .. } => config.as_deref(),
        Command::Example(_) => None,
    }
}

fn run_batch(command: &Command, dir: &Path, flags: &Overrides) -> Result<Outcome, Failure> {
    if matches!(command, Command::Example(_)) {
        return Err(Failure::config("--batch does not apply to example"));
    }
    if config_of(command).is_some() {
        return Err(Failure::config(
            "give either a config file or --batch, not both",
        ));
    }
    let entries = fs::read_dir(dir)
        .map_err(|e| Failure::config(format!("cannot read {}: {e}", dir.display())))?;
    let mut configs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    configs.sort();
    if configs.is_empty() {
        return Err(Failure::config(format!(
            "no *.json configs in {}",
            dir.display()
        )));
    }
    let base = flags
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    let results: Vec<(PathBuf, Result<Outcome, Failure>)> = configs
        .par_iter()
        .map(|cfg| {
            let stem = cfg.file_stem().map(PathBuf::from).unwrap_or_default();
            (
                cfg.clone(),
                run_config(command, cfg, flags, Some(base.join(stem))),
            )
        })
        .collect();
    let mut text = String::new();
    let mut code = EXIT_OK;
    for (cfg, r) in results {
        let _ = writeln!(text, "== {}", cfg.display());
        match r {
            Ok(o) => {
                text.push_str(&o.text);
                code = code.max(o.code);
            }
            Err(f) => {
                let _ = writeln!(text, "error: {}", f.message);
                code = code.max(f.code);
            }
        }
    }
    Ok(Outcome { code, text })
}

/// Dispatches a parsed command line.
pub fn execute(cli: &Cli) -> Result<Outcome, Failure> {
    let flags = Overrides {
        seed: cli.seed,
        dt: cli.dt,
        tmax: cli.tmax,
        out: cli.out.clone(),
    };
    if let Some(dir) = &cli.batch {
        return run_batch(&cli.command, dir, &flags);
    }
    match &cli.command {
        Command::Example(args) => run_example(args, &flags),
        other => {
            let path = config_of(other)
                .ok_or_else(|| Failure::config("missing config file (or use --batch DIR)"))?;
            run_config(other, path, &flags, None)
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(stderr, "{rendered}")
            } else {
                write!(stdout, "{rendered}")
            };
            return code;
        }
    };
    match execute(&cli) {
        Ok(o) => {
            let _ = write!(stdout, "{}", o.text);
            o.code
        }
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = io::stdout();
    let stderr = io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}
