//! The `switchosc` command line.
//!
//! Every subcommand accepts `--config <file.json>`, a flat JSON object whose
//! keys mirror the long flags (`model`, `a`, `epsilon`, `psi`, `x0`, `y0`,
//! `v0`, `x_end`, `tol`, `out`, `plot`, `range`, `samples`, `scenarios`);
//! flags given on the command line win over file values.
//!
//! Exit status: 0 on success, 1 when a verdict fails or a computation does
//! not converge, 2 on usage errors (bad flags, invalid parameters, unreadable
//! files).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::experiments::{self, Scenario};
use crate::io::{self, fmt_sig, Table};
use crate::model::{HybridState, OscillatorParams, Side, SwitchingModel};
use crate::plot;
use crate::poincare::{self, next_crossing, MAP_TOL};
use crate::regularization::{critical_branch, exit, integrate_layer, orbits, LayerOptions, LayerState};
use crate::sliding::{self, Stability};
use crate::TransitionFunction;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "SWITCHOSC_OUT";

#[derive(Debug, Parser)]
#[command(name = "switchosc", version, about = "Frequency-switching oscillator: simulation, periodic orbits, sliding and ageing")]
struct Cli {
    /// Flat JSON config; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: $SWITCHOSC_OUT, then ./out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one trajectory and write it as CSV.
    Simulate(SimulateArgs),
    /// Periodic orbit search.
    #[command(subcommand)]
    Orbit(OrbitCommand),
    /// Tabulate sliding branches (ε = 0) or critical manifolds (ε > 0).
    Manifolds(ManifoldArgs),
    /// Tabulate the crossing maps P₊, P₋, P and optionally P_ε over a grid;
    /// a cell is empty where the departure is not admissible.
    Map(MapArgs),
    /// Branch widths and, for a simulated run, slid length per branch.
    Ageing(AgeingArgs),
    /// Exit-point deviations and their power-law fits.
    Scaling(ScalingArgs),
    /// Run a named scenario (or `all`) and write out/<id>/.
    Reproduce(ReproduceArgs),
    /// Run the property suite on a transition function file.
    ValidatePsi(ValidatePsiArgs),
    /// Render a trajectory CSV as SVG.
    PlotFromCsv(PlotArgs),
}

#[derive(Debug, Subcommand)]
enum OrbitCommand {
    /// Find a period-4 orbit and print its fixed point and multiplier.
    Find(OrbitArgs),
}

#[derive(Debug, Args, Default)]
struct ModelArgs {
    /// linear | nonlinear
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    a: Option<f64>,
    /// Layer half-width; 0 selects the discontinuous system.
    #[arg(long)]
    epsilon: Option<f64>,
    /// `cubic` or a JSON file with polynomial coefficients.
    #[arg(long)]
    psi: Option<String>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    y0: Option<f64>,
    /// Initial layer coordinate `v = y/ε` (regularized runs only).
    #[arg(long, allow_hyphen_values = true)]
    v0: Option<f64>,
    /// Half-plane to depart into when starting on the threshold: + or -.
    #[arg(long, allow_hyphen_values = true)]
    side: Option<String>,
    #[arg(long)]
    x_end: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    /// CSV path; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write an SVG next to the CSV.
    #[arg(long)]
    plot: bool,
}

#[derive(Debug, Args)]
struct OrbitArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// nonsliding | sliding (default: nonsliding for linear, sliding for nonlinear).
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Debug, Args)]
struct ManifoldArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// `lo:hi`
    #[arg(long, allow_hyphen_values = true)]
    range: Option<String>,
    /// Points per branch for critical-manifold tables.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MapArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, allow_hyphen_values = true)]
    range: Option<String>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AgeingArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, allow_hyphen_values = true)]
    range: Option<String>,
    /// Simulate from (x0, y0) to the end of the range and report slid lengths.
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    y0: Option<f64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScalingArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Comma-separated ε grid at fixed n.
    #[arg(long, value_delimiter = ',', default_values_t = [1e-2, 3e-3, 1e-3, 3e-4, 1e-4])]
    epsilons: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    n: i64,
    /// Comma-separated n grid at fixed ε.
    #[arg(long, value_delimiter = ',', default_values_t = [4, 8, 16, 32])]
    ns: Vec<i64>,
    #[arg(long, default_value_t = 1e-3)]
    eps_fixed: f64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReproduceArgs {
    /// Scenario id such as E1 or FIG11, or `all`.
    id: String,
    /// Directory holding the scenario files.
    #[arg(long)]
    scenarios: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ValidatePsiArgs {
    file: PathBuf,
}

#[derive(Debug, Args)]
struct PlotArgs {
    file: PathBuf,
    /// SVG path; defaults to the CSV path with extension `.svg`.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    title: Option<String>,
}

/// Values read from `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CliConfig {
    model: Option<String>,
    a: Option<f64>,
    epsilon: Option<f64>,
    psi: Option<String>,
    x0: Option<f64>,
    y0: Option<f64>,
    v0: Option<f64>,
    x_end: Option<f64>,
    tol: Option<f64>,
    out: Option<PathBuf>,
    plot: Option<bool>,
    range: Option<String>,
    samples: Option<usize>,
    scenarios: Option<PathBuf>,
}

impl CliConfig {
    fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }
}

/// Failure categories, mapped onto exit codes.
enum Failure {
    Usage(String),
    Verdict(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::Domain(_) | Error::Io(_) | Error::Format(_) | Error::OnThreshold { .. } => {
                Failure::Usage(e.to_string())
            }
            other => Failure::Verdict(other.to_string()),
        }
    }
}

type CliResult = std::result::Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Entry point used by the binary; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    run_with(args, &mut stdout.lock())
}

/// As [`run`], writing normal output to `out`.
pub fn run_with<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli, out) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Verdict(msg)) => {
            eprintln!("failed: {msg}");
            1
        }
    }
}

struct Context {
    config: CliConfig,
    out_dir: PathBuf,
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> CliResult {
    let config = match &cli.config {
        Some(p) => CliConfig::load(p)?,
        None => CliConfig::default(),
    };
    let out_dir = cli
        .out
        .clone()
        .or_else(|| config.out.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let ctx = Context { config, out_dir };
    match cli.command {
        Command::Simulate(a) => simulate(&ctx, a, out),
        Command::Orbit(OrbitCommand::Find(a)) => orbit_find(&ctx, a, out),
        Command::Manifolds(a) => manifolds(&ctx, a, out),
        Command::Map(a) => map(&ctx, a, out),
        Command::Ageing(a) => ageing(&ctx, a, out),
        Command::Scaling(a) => scaling(&ctx, a, out),
        Command::Reproduce(a) => reproduce(&ctx, a, out),
        Command::ValidatePsi(a) => validate_psi(a, out),
        Command::PlotFromCsv(a) => plot_from_csv(a, out),
    }
}

fn io_err(e: std::io::Error) -> Failure {
    Failure::Usage(e.to_string())
}

fn resolve_model(ctx: &Context, m: &ModelArgs) -> Result<SwitchingModel> {
    m.model.clone().or_else(|| ctx.config.model.clone()).map_or(Ok(SwitchingModel::Linear), |s| s.parse())
}

fn resolve_params(ctx: &Context, m: &ModelArgs) -> Result<OscillatorParams> {
    let a = m.a.or(ctx.config.a).ok_or_else(|| Error::InvalidParameter("--a is required".into()))?;
    let eps = m.epsilon.or(ctx.config.epsilon).unwrap_or(0.0);
    let mut params = OscillatorParams::new(a)?.with_epsilon(eps)?;
    match m.psi.clone().or_else(|| ctx.config.psi.clone()).as_deref() {
        None | Some("cubic") => {}
        Some(path) => params = params.with_psi(TransitionFunction::from_json_file(Path::new(path))?)?,
    }
    Ok(params)
}

fn parse_range(text: &str) -> Result<(f64, f64)> {
    let bad = || Error::InvalidParameter(format!("range '{text}' must be lo:hi with lo < hi"));
    let (lo, hi) = text.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if lo < hi {
        Ok((lo, hi))
    } else {
        Err(bad())
    }
}

fn resolve_range(ctx: &Context, flag: &Option<String>, default: (f64, f64)) -> Result<(f64, f64)> {
    match flag.clone().or_else(|| ctx.config.range.clone()) {
        Some(r) => parse_range(&r),
        None => Ok(default),
    }
}

fn emit_table(table: &Table, output: &Option<PathBuf>, out: &mut dyn Write) -> CliResult {
    match output {
        Some(path) => {
            let file = create(path)?;
            table.write(file)?;
            writeln!(out, "wrote {}", path.display()).map_err(io_err)
        }
        None => out.write_all(table.to_csv_string().as_bytes()).map_err(io_err),
    }
}

fn create(path: &Path) -> Result<std::fs::File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    }
    std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn simulate(ctx: &Context, args: SimulateArgs, out: &mut dyn Write) -> CliResult {
    let model = resolve_model(ctx, &args.model)?;
    let params = resolve_params(ctx, &args.model)?;
    let c = &ctx.config;
    let x0 = args.x0.or(c.x0).unwrap_or(0.0);
    let x_end = args.x_end.or(c.x_end).ok_or_else(|| usage("--x-end is required"))?;
    if !(x_end > x0) {
        return Err(usage(format!("x_end = {x_end} must exceed x0 = {x0}")));
    }
    let y0 = args.y0.or(c.y0);
    let v0 = args.v0.or(c.v0);
    let traj = if params.is_regularized() {
        let v = match (v0, y0) {
            (Some(v), None) => v,
            (None, Some(y)) => y / params.epsilon,
            (None, None) => return Err(usage("give --v0 or --y0 for a regularized run")),
            (Some(_), Some(_)) => return Err(usage("give only one of --v0 and --y0")),
        };
        let mut opts = LayerOptions::default();
        if let Some(t) = args.tol.or(c.tol) {
            opts.tol = t;
        }
        integrate_layer(model, &params, LayerState::new(x0, v), x_end, &opts)?.trajectory
    } else {
        if v0.is_some() {
            return Err(usage("--v0 needs --epsilon > 0"));
        }
        let y = y0.unwrap_or(0.0);
        let initial = if y != 0.0 {
            HybridState::off_threshold(x0, y)?
        } else {
            let side = match args.side.as_deref() {
                Some("+") | Some("plus") => Side::Plus,
                Some("-") | Some("minus") => Side::Minus,
                Some(s) => return Err(usage(format!("unknown side '{s}', use + or -"))),
                None => return Err(usage("starting on the threshold needs --side + or -")),
            };
            HybridState::departing(x0, side)
        };
        sliding::simulate_discontinuous(model, &params, initial, x_end, args.tol.or(c.tol).unwrap_or(MAP_TOL))?
    };
    let plot = args.plot || c.plot.unwrap_or(false);
    let csv_path = args.output.clone().or_else(|| plot.then(|| ctx.out_dir.join("simulate").join("trajectory.csv")));
    match csv_path {
        None => io::write_trajectory(&traj, &mut *out)?,
        Some(path) => {
            let mut buf = Vec::new();
            io::write_trajectory(&traj, &mut buf)?;
            create(&path)?.write_all(&buf).map_err(io_err)?;
            writeln!(out, "wrote {}", path.display()).map_err(io_err)?;
            if plot {
                let text = String::from_utf8(buf).expect("CSV output is UTF-8");
                let title = format!("{model} system, a = {}, ε = {}", params.a, params.epsilon);
                let svg = plot::svg_from_trajectory_csv(&text, &title)?;
                let svg_path = path.with_extension("svg");
                create(&svg_path)?.write_all(svg.as_bytes()).map_err(io_err)?;
                writeln!(out, "wrote {}", svg_path.display()).map_err(io_err)?;
            }
        }
    }
    Ok(())
}

fn orbit_find(ctx: &Context, args: OrbitArgs, out: &mut dyn Write) -> CliResult {
    let model = resolve_model(ctx, &args.model)?;
    let params = resolve_params(ctx, &args.model)?;
    let default_kind = if model == SwitchingModel::Linear { "nonsliding" } else { "sliding" };
    let kind = args.kind.as_deref().unwrap_or(default_kind);
    let tol = args.tol.or(ctx.config.tol).unwrap_or(1e-13);
    let w = |out: &mut dyn Write, k: &str, v: f64| writeln!(out, "{k} = {}", fmt_sig(v)).map_err(io_err);
    match (model, kind, params.is_regularized()) {
        (SwitchingModel::Linear, "nonsliding", false) => {
            let o = poincare::find_nonsliding_period4(params.a, tol)?;
            w(out, "fixed_point", o.x_star)?;
            w(out, "multiplier", o.multiplier)?;
            w(out, "x_mid", o.x_mid)?;
            w(out, "residual", o.residual)?;
        }
        (SwitchingModel::Linear, "nonsliding", true) => {
            let o = orbits::find_regularized_nonsliding_orbit(&params, &LayerOptions::default())?;
            w(out, "fixed_point", o.x_star)?;
            w(out, "multiplier", o.multiplier)?;
            w(out, "fixed_point_discontinuous", o.x_star_discontinuous)?;
        }
        (SwitchingModel::Linear, "sliding", false) => {
            let o = sliding::find_sliding_period4_linear(params.a)?;
            w(out, "fixed_point", 10.0 / 3.0)?;
            // the slide collapses every nearby start onto the orbit in finite time
            w(out, "multiplier", 0.0)?;
            w(out, "landing", o.crossings[2])?;
            w(out, "closure", o.closure)?;
        }
        (SwitchingModel::Linear, "sliding", true) => {
            let o = orbits::find_regularized_sliding_orbit_linear(&params, &LayerOptions::default())?;
            w(out, "section_x", o.x_section)?;
            w(out, "fixed_point", o.v_star)?;
            w(out, "multiplier", o.contraction)?;
            w(out, "multiplier_fd", o.contraction_fd)?;
        }
        (SwitchingModel::Nonlinear, "sliding", false) => {
            let o = sliding::find_sliding_period4_nonlinear(params.a)?;
            w(out, "fixed_point", 0.0)?;
            w(out, "multiplier", 0.0)?;
            w(out, "x_a", o.x_a)?;
            w(out, "closure", o.closure)?;
        }
        (SwitchingModel::Nonlinear, "nonsliding", false) => {
            // the lattice confinement rules out every non-sliding candidate
            let margins = sliding::check_no_nonsliding_periodic_nonlinear(params.a, 10)?;
            if margins.iter().all(|m| m.all_inside()) {
                return Err(Failure::Verdict(format!(
                    "no non-sliding periodic orbit exists for the nonlinear model at a = {}",
                    params.a
                )));
            }
            return Err(Failure::Verdict("lattice confinement violated".into()));
        }
        (SwitchingModel::Nonlinear, _, true) => {
            return Err(Failure::Verdict(
                "the regularized nonlinear system has no periodic orbits; see `reproduce E12`".into(),
            ))
        }
        (_, other, _) => return Err(usage(format!("unknown orbit kind '{other}', use nonsliding or sliding"))),
    }
    Ok(())
}

fn manifolds(ctx: &Context, args: ManifoldArgs, out: &mut dyn Write) -> CliResult {
    let model = resolve_model(ctx, &args.model)?;
    let range = resolve_range(ctx, &args.range, (0.0, 8.0))?;
    let eps = args.model.epsilon.or(ctx.config.epsilon).unwrap_or(0.0);
    let branches: Vec<_> = sliding::branches(model, range)
        .into_iter()
        .filter(|b| b.domain.0 >= range.0 && b.domain.1 <= range.1)
        .collect();
    let stab = |s: Stability| if s == Stability::Attracting { "attracting" } else { "repelling" };
    let table = if eps > 0.0 {
        let params = resolve_params(ctx, &args.model)?;
        let samples = args.samples.or(ctx.config.samples).unwrap_or(20).max(2);
        let mut t = Table::new(["branch", "x", "lambda", "v0", "stability"]);
        for b in &branches {
            for j in 1..samples {
                let x = b.domain.0 + (b.domain.1 - b.domain.0) * j as f64 / samples as f64;
                t.push(vec![
                    b.id().to_string().into(),
                    x.into(),
                    b.lambda(x)?.into(),
                    critical_branch(b, x, &params)?.into(),
                    stab(b.stability).into(),
                ]);
            }
        }
        t
    } else {
        let mut t = Table::new(["branch", "lo", "hi", "width", "stability"]);
        for b in &branches {
            t.push(vec![b.id().to_string().into(), b.domain.0.into(), b.domain.1.into(), b.width().into(), stab(b.stability).into()]);
        }
        t
    };
    emit_table(&table, &args.output, out)
}

fn map(ctx: &Context, args: MapArgs, out: &mut dyn Write) -> CliResult {
    let params = resolve_params(ctx, &args.model)?;
    let range = resolve_range(ctx, &args.range, (0.0, 2.0 / 3.0))?;
    let samples = args.samples.or(ctx.config.samples).unwrap_or(20);
    if samples == 0 {
        return Err(usage("--samples must be positive"));
    }
    let disc = OscillatorParams { epsilon: 0.0, ..params.clone() };
    let opts = LayerOptions::default();
    let mut t = Table::new(["x", "P_plus", "P_minus", "P", "P_eps"]);
    let opt = |r: Result<f64>| r.ok();
    for k in 0..samples {
        // midpoints keep the grid off the tangency lattice at the range ends
        let x = range.0 + (range.1 - range.0) * (k as f64 + 0.5) / samples as f64;
        let p_plus = opt(next_crossing(Side::Plus, x, &disc, MAP_TOL).map(|r| r.x_next));
        let p_minus = opt(next_crossing(Side::Minus, x, &disc, MAP_TOL).map(|r| r.x_next));
        let p = opt(poincare::composite_map_with(&disc, x));
        let p_eps = if params.is_regularized() {
            opt(orbits::regularized_poincare_linear(x, &params, &opts).map(|r| r.x_next))
        } else {
            None
        };
        t.push(vec![x.into(), p_plus.into(), p_minus.into(), p.into(), p_eps.into()]);
    }
    emit_table(&t, &args.output, out)
}

fn ageing(ctx: &Context, args: AgeingArgs, out: &mut dyn Write) -> CliResult {
    let model = resolve_model(ctx, &args.model)?;
    let range = resolve_range(ctx, &args.range, (0.0, 20.0))?;
    let traj = match (args.x0.or(ctx.config.x0), args.y0.or(ctx.config.y0)) {
        (Some(x0), Some(y0)) => {
            let params = resolve_params(ctx, &args.model)?;
            Some(sliding::simulate_discontinuous(model, &params, HybridState::off_threshold(x0, y0)?, range.1, MAP_TOL)?)
        }
        (None, None) => None,
        _ => return Err(usage("give both --x0 and --y0 to measure slid lengths")),
    };
    let mut t = Table::new(["branch", "width", "slid_length"]);
    for r in sliding::ageing_metrics(model, range, traj.as_ref()) {
        t.push(vec![r.branch.into(), r.width.into(), r.slid_length.into()]);
    }
    emit_table(&t, &args.output, out)
}

fn scaling(ctx: &Context, args: ScalingArgs, out: &mut dyn Write) -> CliResult {
    let a = args.model.a.or(ctx.config.a).unwrap_or(0.01);
    OscillatorParams::new(a)?;
    let s = exit::exit_scaling_fit(a, &args.epsilons, args.n, &args.ns, args.eps_fixed, &LayerOptions::default())?;
    let mut t = Table::new(["sweep", "n", "epsilon", "x_exit", "fold", "deviation"]);
    for (sweep, rows) in [("epsilon", &s.epsilon_rows), ("n", &s.n_rows)] {
        for m in rows {
            t.push(vec![sweep.into(), m.n.into(), m.epsilon.into(), m.x_exit.into(), m.fold.into(), m.deviation.into()]);
        }
    }
    emit_table(&t, &args.output, out)?;
    let summary = format!(
        "epsilon exponent = {} (r² = {})\nn exponent = {} (r² = {})\n",
        fmt_sig(s.epsilon_fit.exponent),
        fmt_sig(s.epsilon_fit.r_squared),
        fmt_sig(s.n_fit.exponent),
        fmt_sig(s.n_fit.r_squared)
    );
    // keep stdout pure CSV when the table goes there
    if args.output.is_some() {
        out.write_all(summary.as_bytes()).map_err(io_err)
    } else {
        eprint!("{summary}");
        Ok(())
    }
}

fn scenario_dir(ctx: &Context, flag: &Option<PathBuf>) -> PathBuf {
    if let Some(d) = flag.clone().or_else(|| ctx.config.scenarios.clone()) {
        return d;
    }
    let local = PathBuf::from("scenarios");
    if local.is_dir() {
        local
    } else {
        // fall back to the scenarios shipped with the source tree
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
    }
}

fn reproduce(ctx: &Context, args: ReproduceArgs, out: &mut dyn Write) -> CliResult {
    let dir = scenario_dir(ctx, &args.scenarios);
    let scenarios: Vec<Scenario> = if args.id.eq_ignore_ascii_case("all") {
        experiments::load_scenarios(&dir)?
    } else {
        vec![experiments::find_scenario(&dir, &args.id)?]
    };
    let mut failed = Vec::new();
    for s in &scenarios {
        let report = experiments::run_scenario(s, &ctx.out_dir)?;
        out.write_all(report.render().as_bytes()).map_err(io_err)?;
        writeln!(out).map_err(io_err)?;
        if !report.passed() {
            failed.push(report.id.clone());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verdict(format!("verdict FAIL for {}", failed.join(", "))))
    }
}

fn validate_psi(args: ValidatePsiArgs, out: &mut dyn Write) -> CliResult {
    let text = std::fs::read_to_string(&args.file).map_err(|e| usage(format!("{}: {e}", args.file.display())))?;
    let psi = TransitionFunction::parse_json(&text)?;
    let checks = psi.property_checks();
    for c in &checks {
        writeln!(out, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail).map_err(io_err)?;
    }
    if checks.iter().all(|c| c.passed) {
        Ok(())
    } else {
        Err(Failure::Verdict(format!("{} fails the property suite", args.file.display())))
    }
}

fn plot_from_csv(args: PlotArgs, out: &mut dyn Write) -> CliResult {
    let text = std::fs::read_to_string(&args.file).map_err(|e| usage(format!("{}: {e}", args.file.display())))?;
    let title = args.title.unwrap_or_else(|| {
        args.file.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "trajectory".into())
    });
    let svg = plot::svg_from_trajectory_csv(&text, &title)?;
    let path = args.output.unwrap_or_else(|| args.file.with_extension("svg"));
    create(&path)?.write_all(svg.as_bytes()).map_err(io_err)?;
    writeln!(out, "wrote {}", path.display()).map_err(io_err)
}
