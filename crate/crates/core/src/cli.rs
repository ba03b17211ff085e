//! Command-line front end. Every run writes `<name>.csv` and
//! `<name>.meta.json` into the output directory.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::coefficients::{Boundary, Coefficients, MeshRule, ScaleData};
use crate::error::{Error, Result};
use crate::estimators::{elliptic, parabolic_mean, right_exit_fraction, transition_density};
use crate::exit_law::{ExitCondition, ExitLaw, Series, Side};
use crate::oracles::{analytic_elliptic, EulerOracle, GaussianReference};
use crate::stats::{ks_one_sample, ks_one_sample_critical, ols_slope, summarize};
use crate::walk::{particle_rng, Batch, RunMode, SatelliteRule, Simulator, SimulatorOptions};

const SINE_JUMP: &str = include_str!("../configs/sine_jump.json");
const TWO_VALUED: &str = include_str!("../configs/two_valued.json");

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUN_ERROR: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_VALIDATE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "skewwalk", version, about = "Exact random walks for diffusions with discontinuous coefficients")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the coefficient file (if given) and run a table of oracle comparisons.
    Validate(ValidateArgs),
    /// Kernel estimate of the transition density at time t.
    Density(DensityArgs),
    /// E[f(X_t); t < exit] for a list of starting points.
    Parabolic(ParabolicArgs),
    /// Dirichlet problem through exit sides, against the scale-function solution.
    Elliptic(EllipticArgs),
    /// Differences between mesh sizes delta and delta / refine.
    Convergence(ConvergenceArgs),
    /// Mean number of steps against the mesh size.
    Cost(CostArgs),
    /// Tabulate the exit-time and killed laws of Brownian motion on [-1, 1].
    Tabulate(TabulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mesh {
    Uniform,
    ScaleUniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Satellites {
    HalfGap,
    FullGap,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Master seed of the particle streams.
    #[arg(long)]
    pub seed: u64,
    /// Mesh size.
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long, value_enum, default_value_t = Mesh::ScaleUniform)]
    pub mesh: Mesh,
    #[arg(long, value_enum, default_value_t = Satellites::FullGap)]
    pub satellites: Satellites,
    /// Number of particles.
    #[arg(long, short = 'n', default_value_t = 10_000)]
    pub n: usize,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Base name of the output files (default: the subcommand).
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct DensityArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub x0: f64,
    #[arg(long)]
    pub t: f64,
    /// Half-width of the counting window.
    #[arg(long, default_value_t = 0.05)]
    pub eps: f64,
    #[arg(long, default_value_t = -3.0, allow_negative_numbers = true)]
    pub ymin: f64,
    #[arg(long, default_value_t = 3.0, allow_negative_numbers = true)]
    pub ymax: f64,
    #[arg(long, default_value_t = 121)]
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Payoff {
    /// f = 1
    One,
    /// f(x) = cos x on |x| <= pi/2, 0 elsewhere
    Cos,
    /// f(x) = 1 for x > 0
    Positive,
    /// f(x) = x
    Identity,
}

impl Payoff {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Payoff::One => 1.0,
            Payoff::Cos => {
                if x.abs() <= std::f64::consts::FRAC_PI_2 {
                    x.cos()
                } else {
                    0.0
                }
            }
            Payoff::Positive => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Payoff::Identity => x,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ParabolicArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated starting points.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub x0: Vec<f64>,
    #[arg(long)]
    pub t: f64,
    #[arg(long, value_enum, default_value_t = Payoff::Cos)]
    pub payoff: Payoff,
    /// Also run the transformed Euler scheme with this step.
    #[arg(long)]
    pub euler_dt: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct EllipticArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub x0: Vec<f64>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub u_left: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub u_right: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ConvergenceArgs {
    /// Coefficient file (default: the sine-jump coefficients).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub x0: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long, value_enum, default_value_t = Payoff::Cos)]
    pub payoff: Payoff,
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.1,0.05")]
    pub deltas: Vec<f64>,
    /// The reference for mesh delta uses delta / refine.
    #[arg(long, default_value_t = 4.0)]
    pub refine: f64,
}

#[derive(Debug, Clone, Args)]
pub struct CostArgs {
    /// Coefficient file (default: the sine-jump coefficients).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 0.025)]
    pub dmin: f64,
    #[arg(long, default_value_t = 0.2)]
    pub dmax: f64,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub x0: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    /// Count steps to absorption instead of steps up to t.
    #[arg(long)]
    pub exit: bool,
}

#[derive(Debug, Clone, Args)]
pub struct TabulateArgs {
    #[arg(long, default_value_t = 0.1)]
    pub tmin: f64,
    #[arg(long, default_value_t = 3.0)]
    pub tmax: f64,
    #[arg(long, default_value_t = 50)]
    pub nt: usize,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-0.9,-0.6,-0.3,0,0.3,0.6,0.9")]
    pub x: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-0.9,-0.6,-0.3,0,0.3,0.6,0.9")]
    pub y: Vec<f64>,
    #[arg(long, value_enum)]
    pub series: Option<SeriesArg>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SeriesArg {
    Image,
    Spectral,
}

/// Failure of a command, split by exit code.
#[derive(Debug)]
enum Failure {
    Config(Error),
    Run(Error),
    Validate(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

type CmdResult<T> = std::result::Result<T, Failure>;

fn config<T>(r: Result<T>) -> CmdResult<T> {
    r.map_err(Failure::Config)
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            EXIT_RUN_ERROR
        }
        Err(Failure::Validate(n)) => {
            eprintln!("{n} validation row(s) failed");
            EXIT_VALIDATE
        }
    }
}

fn execute(cmd: Command) -> CmdResult<()> {
    let threads = match &cmd {
        Command::Validate(a) => a.threads,
        Command::Density(a) => a.common.threads,
        Command::Parabolic(a) => a.common.threads,
        Command::Elliptic(a) => a.common.threads,
        Command::Convergence(a) => a.common.threads,
        Command::Cost(a) => a.common.threads,
        Command::Tabulate(_) => None,
    };
    let pool = match threads {
        Some(0) => return Err(Failure::Config(Error::InvalidArgument("--threads must be positive".into()))),
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    }
    .map_err(|e| Failure::Run(Error::Simulation(format!("thread pool: {e}"))))?;
    pool.install(|| match cmd {
        Command::Validate(a) => validate(a),
        Command::Density(a) => density(a),
        Command::Parabolic(a) => parabolic(a),
        Command::Elliptic(a) => elliptic_cmd(a),
        Command::Convergence(a) => convergence(a),
        Command::Cost(a) => cost(a),
        Command::Tabulate(a) => tabulate(a),
    })
}

fn load(path: &Path) -> Result<Coefficients> {
    Coefficients::from_json_str(&fs::read_to_string(path)?)
}

fn load_or(path: Option<&Path>, builtin: &str) -> Result<Coefficients> {
    match path {
        Some(p) => load(p),
        None => Coefficients::from_json_str(builtin),
    }
}

fn options(c: &Common) -> Result<SimulatorOptions> {
    check_positive("--delta", c.delta)?;
    if c.n == 0 {
        return Err(Error::InvalidArgument("-n must be at least 1".into()));
    }
    Ok(SimulatorOptions {
        delta: c.delta,
        mesh: match c.mesh {
            Mesh::Uniform => MeshRule::Uniform,
            Mesh::ScaleUniform => MeshRule::ScaleUniform,
        },
        satellites: match c.satellites {
            Satellites::HalfGap => SatelliteRule::HalfGap,
            Satellites::FullGap => SatelliteRule::FullGap,
        },
        ..SimulatorOptions::default()
    })
}

fn check_positive(flag: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{flag} must be positive, got {v}")))
    }
}

fn horizon_simulator(c: &Coefficients, opts: SimulatorOptions, xs: &[f64], t: f64) -> Result<Simulator> {
    check_positive("--t", t)?;
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if c.is_bounded() {
        Simulator::new(c, opts)
    } else {
        Simulator::for_horizon(c, opts, lo, hi, t)
    }
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Header row and data rows, comma separated.
struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Self { header: header.to_vec(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

struct Meta {
    started: Instant,
    fields: serde_json::Map<String, Value>,
}

impl Meta {
    fn new(command: &str, echo: Value) -> Self {
        let mut fields = serde_json::Map::new();
        fields.insert("command".into(), json!(command));
        fields.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
        fields.insert("config".into(), echo);
        Self { started: Instant::now(), fields }
    }

    fn set(&mut self, key: &str, v: Value) {
        self.fields.insert(key.into(), v);
    }

    fn coefficients(&mut self, c: &Coefficients) {
        self.set("coefficients", c.to_json());
        self.set("coefficient_digest", json!(c.digest()));
    }

    fn simulator(&mut self, sim: &Simulator) {
        self.set("delta", json!(sim.options().delta));
        self.set("grid_digest", json!(sim.grid_digest()));
        self.set("domain", json!([sim.domain().0, sim.domain().1]));
    }

    fn batches<'a>(&mut self, batches: impl IntoIterator<Item = &'a Batch>) {
        let (mut hits, mut steps) = (0usize, 0u64);
        for b in batches {
            hits += b.barrier_hits();
            steps += b.total_steps();
        }
        self.set("barrier_hits", json!(hits));
        self.set("total_steps", json!(steps));
    }
}

fn write_outputs(out: &Path, name: &str, table: &Table, mut meta: Meta) -> Result<()> {
    fs::create_dir_all(out)?;
    fs::write(out.join(format!("{name}.csv")), table.render())?;
    meta.set("wall_time_seconds", json!(meta.started.elapsed().as_secs_f64()));
    fs::write(out.join(format!("{name}.meta.json")), serde_json::to_string_pretty(&Value::Object(meta.fields))? + "\n")?;
    Ok(())
}

fn common_echo(c: &Common) -> Value {
    json!({
        "seed": c.seed,
        "delta": c.delta,
        "mesh": format!("{:?}", c.mesh),
        "satellites": format!("{:?}", c.satellites),
        "n": c.n,
    })
}

fn merge(mut a: Value, b: Value) -> Value {
    if let (Some(m), Value::Object(extra)) = (a.as_object_mut(), b) {
        m.extend(extra);
    }
    a
}

fn density(a: DensityArgs) -> CmdResult<()> {
    let coeffs = config(load(&a.config))?;
    let opts = config(options(&a.common))?;
    config(check_positive("--eps", a.eps))?;
    if a.points < 2 || !(a.ymax > a.ymin) {
        return Err(Failure::Config(Error::InvalidArgument("need --points >= 2 and --ymax > --ymin".into())));
    }
    let sim = config(horizon_simulator(&coeffs, opts, &[a.x0], a.t))?;
    let mut meta = Meta::new(
        "density",
        merge(
            common_echo(&a.common),
            json!({ "config_path": a.config, "x0": a.x0, "t": a.t, "eps": a.eps, "ymin": a.ymin, "ymax": a.ymax, "points": a.points }),
        ),
    );
    meta.coefficients(&coeffs);
    meta.simulator(&sim);
    let batch = sim.run_batch(a.x0, RunMode::Horizon(a.t), a.common.n, a.common.seed)?;
    let ys: Vec<f64> =
        (0..a.points).map(|j| a.ymin + (a.ymax - a.ymin) * j as f64 / (a.points - 1) as f64).collect();
    let est = transition_density(&batch, |y| coeffs.eval(y).1, &ys, a.eps)?;
    let mut table = Table::new(&["y", "estimate", "std_error", "count"]);
    for d in &est {
        table.push(vec![num(d.y), num(d.value), num(d.se), d.count.to_string()]);
    }
    let inner = batch.survivors().filter(|p| p.x_final > -0.5 && p.x_final < 0.5).count();
    meta.set("survivors", json!(batch.survivors().count()));
    meta.set("mass_in_unit_window", json!(inner as f64 / batch.paths.len() as f64));
    meta.batches([&batch]);
    write_outputs(&a.common.out, a.common.name.as_deref().unwrap_or("density"), &table, meta)?;
    Ok(())
}

fn parabolic(a: ParabolicArgs) -> CmdResult<()> {
    let coeffs = config(load(&a.config))?;
    let opts = config(options(&a.common))?;
    let sim = config(horizon_simulator(&coeffs, opts, &a.x0, a.t))?;
    let euler = match a.euler_dt {
        Some(dt) => {
            config(check_positive("--euler-dt", dt))?;
            Some(config(EulerOracle::new(&coeffs))?)
        }
        None => None,
    };
    let mut meta = Meta::new(
        "parabolic",
        merge(
            common_echo(&a.common),
            json!({ "config_path": a.config, "x0": a.x0, "t": a.t, "payoff": format!("{:?}", a.payoff), "euler_dt": a.euler_dt }),
        ),
    );
    meta.coefficients(&coeffs);
    meta.simulator(&sim);
    let mut header = vec!["x0", "estimate", "std_error", "n"];
    if euler.is_some() {
        header.extend(["euler_estimate", "euler_std_error"]);
    }
    let mut table = Table::new(&header);
    let mut batches = Vec::new();
    for &x0 in &a.x0 {
        let batch = sim.run_batch(x0, RunMode::Horizon(a.t), a.common.n, a.common.seed)?;
        let e = parabolic_mean(&batch, |x| a.payoff.eval(x))?;
        let mut row = vec![num(x0), num(e.value), num(e.se), e.n.to_string()];
        if let (Some(o), Some(dt)) = (&euler, a.euler_dt) {
            let xs = o.sample(x0, a.t, dt, a.common.n, a.common.seed)?;
            let v: Vec<f64> = xs.iter().map(|x| x.map_or(0.0, |x| a.payoff.eval(x))).collect();
            let s = summarize(&v);
            row.extend([num(s.mean), num(s.se)]);
        }
        table.push(row);
        batches.push(batch);
    }
    meta.batches(&batches);
    write_outputs(&a.common.out, a.common.name.as_deref().unwrap_or("parabolic"), &table, meta)?;
    Ok(())
}

fn elliptic_cmd(a: EllipticArgs) -> CmdResult<()> {
    let coeffs = config(load(&a.config))?;
    let opts = config(options(&a.common))?;
    if !(coeffs.bc_left == Boundary::Dirichlet && coeffs.bc_right == Boundary::Dirichlet) {
        return Err(Failure::Config(Error::InvalidCoefficients(
            "the Dirichlet problem needs a bounded domain with Dirichlet ends".into(),
        )));
    }
    let sim = config(Simulator::new(&coeffs, opts))?;
    let scale = config(ScaleData::new(&coeffs))?;
    let mut meta = Meta::new(
        "elliptic",
        merge(
            common_echo(&a.common),
            json!({ "config_path": a.config, "x0": a.x0, "u_left": a.u_left, "u_right": a.u_right }),
        ),
    );
    meta.coefficients(&coeffs);
    meta.simulator(&sim);
    let mut table = Table::new(&["x0", "estimate", "std_error", "analytic", "n"]);
    let mut batches = Vec::new();
    for &x0 in &a.x0 {
        let batch = sim.run_batch(x0, RunMode::Exit, a.common.n, a.common.seed)?;
        let e = elliptic(&batch, a.u_left, a.u_right)?;
        let exact = analytic_elliptic(&scale, a.u_left, a.u_right, x0)?;
        table.push(vec![num(x0), num(e.value), num(e.se), num(exact), e.n.to_string()]);
        batches.push(batch);
    }
    meta.batches(&batches);
    write_outputs(&a.common.out, a.common.name.as_deref().unwrap_or("elliptic"), &table, meta)?;
    Ok(())
}

fn convergence(a: ConvergenceArgs) -> CmdResult<()> {
    let coeffs = config(load_or(a.config.as_deref(), SINE_JUMP))?;
    let base = config(options(&a.common))?;
    if !(a.refine > 1.0) || a.deltas.is_empty() {
        return Err(Failure::Config(Error::InvalidArgument("need --refine > 1 and at least one delta".into())));
    }
    for &d in &a.deltas {
        config(check_positive("--deltas", d))?;
    }
    let mut meta = Meta::new(
        "convergence",
        merge(
            common_echo(&a.common),
            json!({ "config_path": a.config, "x0": a.x0, "t": a.t, "payoff": format!("{:?}", a.payoff), "deltas": a.deltas, "refine": a.refine }),
        ),
    );
    meta.coefficients(&coeffs);
    let mut table = Table::new(&[
        "delta",
        "estimate",
        "std_error",
        "reference",
        "reference_std_error",
        "difference",
        "difference_std_error",
        "coefficient_error",
    ]);
    let mut batches = Vec::new();
    let mut cache: Vec<(f64, f64, f64, f64)> = Vec::new();
    let mut level = |delta: f64, batches: &mut Vec<Batch>| -> CmdResult<(f64, f64, f64)> {
        if let Some(&(_, v, se, err)) = cache.iter().find(|c| c.0 == delta) {
            return Ok((v, se, err));
        }
        let sim = config(horizon_simulator(&coeffs, SimulatorOptions { delta, ..base }, &[a.x0], a.t))?;
        let batch = sim.run_batch(a.x0, RunMode::Horizon(a.t), a.common.n, a.common.seed)?;
        let e = parabolic_mean(&batch, |x| a.payoff.eval(x))?;
        let err = sim.steps().error_bound();
        batches.push(batch);
        cache.push((delta, e.value, e.se, err));
        Ok((e.value, e.se, err))
    };
    for &d in &a.deltas {
        let (v, se, err) = level(d, &mut batches)?;
        let (r, rse, _) = level(d / a.refine, &mut batches)?;
        table.push(vec![num(d), num(v), num(se), num(r), num(rse), num((v - r).abs()), num(se.hypot(rse)), num(err)]);
    }
    meta.batches(&batches);
    write_outputs(&a.common.out, a.common.name.as_deref().unwrap_or("convergence"), &table, meta)?;
    Ok(())
}

/// `dmax, dmax/2, ...` down to `dmin` (inclusive up to rounding).
pub fn halving_sequence(dmin: f64, dmax: f64) -> Result<Vec<f64>> {
    check_positive("--dmin", dmin)?;
    check_positive("--dmax", dmax)?;
    if dmin > dmax {
        return Err(Error::InvalidArgument(format!("--dmin {dmin} exceeds --dmax {dmax}")));
    }
    let mut v = vec![dmax];
    while v.last().unwrap() / 2.0 >= dmin * (1.0 - 1e-9) {
        v.push(v.last().unwrap() / 2.0);
    }
    Ok(v)
}

fn cost(a: CostArgs) -> CmdResult<()> {
    let coeffs = config(load_or(a.config.as_deref(), SINE_JUMP))?;
    let base = config(options(&a.common))?;
    let deltas = config(halving_sequence(a.dmin, a.dmax))?;
    if deltas.len() < 2 {
        return Err(Failure::Config(Error::InvalidArgument("need at least two mesh sizes".into())));
    }
    let mut meta = Meta::new(
        "cost",
        merge(
            common_echo(&a.common),
            json!({ "config_path": a.config, "x0": a.x0, "t": a.t, "dmin": a.dmin, "dmax": a.dmax, "exit": a.exit }),
        ),
    );
    meta.coefficients(&coeffs);
    let mut table = Table::new(&["delta", "mean_steps", "std_error", "n"]);
    let mut batches = Vec::new();
    let (mut lx, mut ly) = (Vec::new(), Vec::new());
    for &d in &deltas {
        let opts = SimulatorOptions { delta: d, ..base };
        let (sim, mode) = if a.exit {
            (config(Simulator::new(&coeffs, opts))?, RunMode::Exit)
        } else {
            (config(horizon_simulator(&coeffs, opts, &[a.x0], a.t))?, RunMode::Horizon(a.t))
        };
        let batch = sim.run_batch(a.x0, mode, a.common.n, a.common.seed)?;
        let steps: Vec<f64> = batch.paths.iter().map(|p| p.n_steps as f64).collect();
        let s = summarize(&steps);
        table.push(vec![num(d), num(s.mean), num(s.se), s.n.to_string()]);
        lx.push(d.ln());
        ly.push(s.mean.ln());
        batches.push(batch);
    }
    let slope = ols_slope(&lx, &ly);
    println!("log-log slope of mean steps against delta: {slope:.4}");
    meta.set("slope", json!(slope));
    meta.batches(&batches);
    write_outputs(&a.common.out, a.common.name.as_deref().unwrap_or("cost"), &table, meta)?;
    Ok(())
}

fn tabulate(a: TabulateArgs) -> CmdResult<()> {
    config(check_positive("--tmin", a.tmin))?;
    if a.nt == 0 || a.tmax < a.tmin {
        return Err(Failure::Config(Error::InvalidArgument("need --nt >= 1 and --tmax >= --tmin".into())));
    }
    if a.x.iter().chain(&a.y).any(|v| !(v.abs() < 1.0)) {
        return Err(Failure::Config(Error::InvalidArgument("--x and --y must lie in (-1, 1)".into())));
    }
    let law = ExitLaw::default();
    let series = a.series.map(|s| match s {
        SeriesArg::Image => Series::Image,
        SeriesArg::Spectral => Series::Spectral,
    });
    let ts: Vec<f64> = if a.nt == 1 {
        vec![a.tmin]
    } else {
        (0..a.nt).map(|i| a.tmin + (a.tmax - a.tmin) * i as f64 / (a.nt - 1) as f64).collect()
    };
    let mut table =
        Table::new(&["t", "x", "y", "exit_cdf", "exit_density", "cond_cdf_right", "cond_cdf_left", "killed_density", "killed_cdf"]);
    for &t in &ts {
        for &x in &a.x {
            let pick = |s: Series| series.unwrap_or(s);
            let auto = if t <= law.config().crossover { Series::Image } else { Series::Spectral };
            let s = pick(auto);
            let g = law.exit_time_cdf_with(t, x, s)?;
            let gd = law.exit_time_density_with(t, x, s)?;
            let hr = law.cond_exit_time_cdf_with(t, x, Side::Right, s)?;
            let hl = law.cond_exit_time_cdf_with(t, x, Side::Left, s)?;
            for &y in &a.y {
                let kd = law.killed_density_with(t, x, y, s)?;
                let kc = law.killed_cdf_with(t, x, y, s)?;
                table.push(vec![num(t), num(x), num(y), num(g), num(gd), num(hr), num(hl), num(kd), num(kc)]);
            }
        }
    }
    let meta = Meta::new(
        "tabulate",
        json!({ "tmin": a.tmin, "tmax": a.tmax, "nt": a.nt, "x": a.x, "y": a.y, "series": a.series.map(|s| format!("{s:?}")) }),
    );
    write_outputs(&a.out, a.name.as_deref().unwrap_or("tabulate"), &table, meta)?;
    Ok(())
}

/// One line of the validation table.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub expected: f64,
    pub observed: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        (self.observed - self.expected).abs() <= self.tolerance
    }
}

/// Quick oracle comparisons used by `validate`.
pub fn validation_checks(seed: u64) -> Result<Vec<Check>> {
    let law = ExitLaw::default();
    let mut checks = Vec::new();

    let mut gap: f64 = 0.0;
    for &t in &[0.1, 0.3, 0.5, 1.0, 3.0] {
        for &x in &[-0.5, 0.0, 0.5] {
            let g1 = law.exit_time_cdf_with(t, x, Series::Image)?;
            let g2 = law.exit_time_cdf_with(t, x, Series::Spectral)?;
            gap = gap.max((g1 - g2).abs());
        }
    }
    checks.push(Check { name: "image_vs_spectral_exit_cdf", expected: 0.0, observed: gap, tolerance: 1e-8 });

    let n = 100_000;
    let mut rng = particle_rng(seed, u64::MAX);
    let taus = (0..n).map(|_| law.sample_exit_time(0.0, ExitCondition::NONE, &mut rng)).collect::<Result<Vec<_>>>()?;
    let s = summarize(&taus);
    checks.push(Check { name: "mean_exit_time_from_center", expected: 1.0, observed: s.mean, tolerance: 3.0 * s.se });

    let bm = Coefficients::constant(1.0, 1.0);
    let sim = Simulator::for_horizon(&bm, SimulatorOptions::with_delta(0.1), 0.0, 0.0, 1.0)?;
    let n = 10_000;
    let b = sim.run_batch(0.0, RunMode::Horizon(1.0), n, seed)?;
    let g = GaussianReference::new(1.0, 1.0, 1.0, 0.0)?;
    let xs: Vec<f64> = b.paths.iter().map(|p| p.x_final).collect();
    checks.push(Check {
        name: "brownian_walk_ks",
        expected: 0.0,
        observed: ks_one_sample(&xs, |x| g.cdf(x)),
        tolerance: ks_one_sample_critical(n),
    });

    let two = Coefficients::from_json_str(TWO_VALUED)?;
    let target = 2f64.sqrt() / (2f64.sqrt() + 1.0);
    let sd = (target * (1.0 - target) / n as f64).sqrt();
    let sim = Simulator::for_horizon(&two, SimulatorOptions::default(), 0.0, 0.0, 1.0)?;
    let b = sim.run_batch(0.0, RunMode::Horizon(1.0), n, seed)?;
    let frac = b.paths.iter().filter(|p| p.x_final > 0.0).count() as f64 / n as f64;
    checks.push(Check { name: "two_valued_mass_split_walk", expected: target, observed: frac, tolerance: 3.0 * sd });

    let euler = EulerOracle::new(&two)?;
    let xs = euler.sample(0.0, 1.0, 1e-3, n, seed)?;
    let frac = xs.iter().filter(|x| x.is_some_and(|x| x > 0.0)).count() as f64 / n as f64;
    checks.push(Check { name: "two_valued_mass_split_euler", expected: target, observed: frac, tolerance: 3.0 * sd });

    let pc = Coefficients::piecewise_constant(
        -1.0,
        1.0,
        (Boundary::Dirichlet, Boundary::Dirichlet),
        &[-1.0, -0.2, 0.4],
        &[1.0, 4.0, 0.5],
        &[1.0, 1.0, 1.0],
    )?;
    let sim = Simulator::new(&pc, SimulatorOptions::default())?;
    let b = sim.run_batch(0.1, RunMode::Exit, n, seed)?;
    let e = right_exit_fraction(&b);
    let exact = analytic_elliptic(&ScaleData::new(&pc)?, 0.0, 1.0, 0.1)?;
    checks.push(Check { name: "piecewise_constant_exit_side", expected: exact, observed: e.value, tolerance: 3.0 * e.se });

    Ok(checks)
}

fn validate(a: ValidateArgs) -> CmdResult<()> {
    let mut meta = Meta::new("validate", json!({ "seed": a.seed, "config_path": a.config }));
    let mut table = Table::new(&["criterion", "expected", "observed", "tolerance", "pass"]);
    let mut failed = 0;
    if let Some(path) = &a.config {
        let coeffs = config(load(path))?;
        let report = coeffs.validate();
        for v in &report.violations {
            println!("coefficients: {:?}: {}", v.kind, v.message);
        }
        let ok = report.violations.is_empty();
        failed += usize::from(!ok);
        let n = report.violations.len() as f64;
        table.push(vec!["coefficients".into(), num(0.0), num(n), num(0.0), ok.to_string()]);
        meta.coefficients(&coeffs);
    }
    for c in validation_checks(a.seed)? {
        let ok = c.passed();
        failed += usize::from(!ok);
        println!(
            "{:<32} expected {:>12.6} observed {:>12.6} tolerance {:>10.3e}  {}",
            c.name,
            c.expected,
            c.observed,
            c.tolerance,
            if ok { "pass" } else { "FAIL" }
        );
        table.push(vec![c.name.into(), num(c.expected), num(c.observed), num(c.tolerance), ok.to_string()]);
    }
    meta.set("failed", json!(failed));
    write_outputs(&a.out, a.name.as_deref().unwrap_or("validate"), &table, meta)?;
    if failed > 0 {
        Err(Failure::Validate(failed))
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halving_sequence_hits_both_ends() {
        let v = halving_sequence(0.025, 0.2).unwrap();
        assert_eq!(v, vec![0.2, 0.1, 0.05, 0.025]);
        assert!(halving_sequence(0.3, 0.2).is_err());
    }

    #[test]
    fn numbers_carry_seventeen_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn payoffs() {
        assert_eq!(Payoff::Cos.eval(0.0), 1.0);
        assert_eq!(Payoff::Cos.eval(2.0), 0.0);
        assert_eq!(Payoff::Positive.eval(0.0), 0.0);
    }

    #[test]
    fn bad_flags_are_config_errors() {
        assert_eq!(run(["skewwalk", "density", "--bogus"]), EXIT_CONFIG);
        assert_eq!(run(["skewwalk", "cost", "--dmin", "0.1"]), EXIT_CONFIG);
    }

    #[test]
    fn builtin_configs_parse() {
        for s in [SINE_JUMP, TWO_VALUED] {
            Coefficients::from_json_str(s).unwrap().validated().unwrap();
        }
    }
}
