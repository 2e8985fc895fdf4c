//! Named, reproducible experiments.
//!
//! A [`Scenario`] is plain data (JSON, see `scenarios/` at the repository
//! root): parameters, one experiment with its settings and a list of
//! expected values with tolerances. [`run_scenario`] executes it, compares
//! every expectation and writes `results.csv`, `report.txt` and any SVG
//! figures under `<out>/<id>/`.

mod kinds;
mod shooting;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt_sig, Table};
use crate::model::{OscillatorParams, SwitchingModel};
use crate::plot::Plot;
use crate::TransitionFunction;
use crate::trajectory::Trajectory;

pub use kinds::Experiment;
pub use shooting::{shooting_fixed_point, shooting_return};

/// Where an expected value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    /// A number printed in the published analysis.
    Published,
    /// Follows from a closed form or from the definition of the quantity.
    Elementary,
    /// Frozen from an independent reference computation.
    Oracle,
    /// A resource limit such as a runtime budget.
    Budget,
}

/// Comparison applied to one measured quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum Rule {
    /// `|measured − value| ≤ tol`.
    Near { value: f64, tol: f64 },
    /// `lo < measured < hi`.
    Between { lo: f64, hi: f64 },
    /// `measured ≤ max`.
    AtMost { max: f64 },
    /// `measured ≥ min`.
    AtLeast { min: f64 },
    /// A flag quantity equal to 1.
    Holds,
}

impl Rule {
    pub fn accepts(&self, v: f64) -> bool {
        match *self {
            Rule::Near { value, tol } => (v - value).abs() <= tol,
            Rule::Between { lo, hi } => v > lo && v < hi,
            Rule::AtMost { max } => v <= max,
            Rule::AtLeast { min } => v >= min,
            Rule::Holds => v == 1.0,
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            Rule::Near { value, tol } => format!("= {} ± {}", fmt_sig(value), fmt_sig(tol)),
            Rule::Between { lo, hi } => format!("∈ ({}, {})", fmt_sig(lo), fmt_sig(hi)),
            Rule::AtMost { max } => format!("≤ {}", fmt_sig(max)),
            Rule::AtLeast { min } => format!("≥ {}", fmt_sig(min)),
            Rule::Holds => "holds".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expectation {
    pub quantity: String,
    #[serde(flatten)]
    pub rule: Rule,
    pub source: Source,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub title: String,
    /// Acceptance criterion realised by this scenario, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub criterion: Option<u32>,
    pub model: SwitchingModel,
    pub a: f64,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<TransitionFunction>,
    pub experiment: Experiment,
    #[serde(default = "yes")]
    pub plot: bool,
    pub expected: Vec<Expectation>,
}

fn yes() -> bool {
    true
}

impl Scenario {
    pub fn from_json_str(text: &str) -> Result<Scenario> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_file(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Scenario::from_json_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() || !self.id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(Error::InvalidParameter(format!("scenario id {:?} must be a plain identifier", self.id)));
        }
        if self.expected.is_empty() {
            return Err(Error::InvalidParameter(format!("scenario {} checks nothing", self.id)));
        }
        self.params()?;
        Ok(())
    }

    pub fn params(&self) -> Result<OscillatorParams> {
        let mut p = OscillatorParams::new(self.a)?.with_epsilon(self.epsilon)?;
        if let Some(psi) = &self.psi {
            p = p.with_psi(psi.clone())?;
        }
        Ok(p)
    }
}

/// Load every `*.json` scenario of a directory, sorted by id; ids must be unique.
pub fn load_scenarios(dir: &Path) -> Result<Vec<Scenario>> {
    let mut out = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    for entry in entries {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "json") {
            out.push(Scenario::from_file(&path)?);
        }
    }
    out.sort_by(|a, b| natural_key(&a.id).cmp(&natural_key(&b.id)));
    for w in out.windows(2) {
        if w[0].id == w[1].id {
            return Err(Error::InvalidParameter(format!("duplicate scenario id {}", w[0].id)));
        }
    }
    Ok(out)
}

/// `E2` sorts before `E10`.
fn natural_key(id: &str) -> (String, u64) {
    let split = id.find(|c: char| c.is_ascii_digit()).unwrap_or(id.len());
    (id[..split].to_string(), id[split..].parse().unwrap_or(0))
}

pub fn find_scenario(dir: &Path, id: &str) -> Result<Scenario> {
    load_scenarios(dir)?
        .into_iter()
        .find(|s| s.id.eq_ignore_ascii_case(id))
        .ok_or_else(|| Error::InvalidParameter(format!("no scenario {id} in {}", dir.display())))
}

/// Primary table of an experiment.
#[derive(Debug, Clone)]
pub enum Results {
    Trajectory { trajectory: Trajectory, title: String },
    Table(Table),
}

/// What an experiment produced before the expectations are checked.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub measured: BTreeMap<String, f64>,
    pub results: Results,
    /// Additional trajectories written as `<name>.csv` / `<name>.svg`.
    pub trajectories: Vec<(String, Trajectory)>,
    pub figures: Vec<(String, Plot)>,
    pub notes: Vec<String>,
}

impl Outcome {
    pub(crate) fn new(results: Results) -> Self {
        Outcome { measured: BTreeMap::new(), results, trajectories: Vec::new(), figures: Vec::new(), notes: Vec::new() }
    }

    pub(crate) fn set(&mut self, name: impl Into<String>, value: f64) {
        self.measured.insert(name.into(), value);
    }

    pub(crate) fn flag(&mut self, name: impl Into<String>, value: bool) {
        self.set(name, if value { 1.0 } else { 0.0 });
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub quantity: String,
    pub rule: Rule,
    pub source: Source,
    pub measured: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub id: String,
    pub title: String,
    pub criterion: Option<u32>,
    pub measured: BTreeMap<String, f64>,
    pub verdicts: Vec<Verdict>,
    pub runtime_s: f64,
    pub artifacts: Vec<PathBuf>,
    /// Failure of the underlying computation, if any.
    pub error: Option<String>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.verdicts.iter().all(|v| v.passed)
    }

    pub fn failures(&self) -> Vec<&Verdict> {
        self.verdicts.iter().filter(|v| !v.passed).collect()
    }

    /// Human-readable summary, as written to `report.txt`.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario: {}", self.id);
        let _ = writeln!(s, "title: {}", self.title);
        if let Some(c) = self.criterion {
            let _ = writeln!(s, "criterion: {c}");
        }
        let _ = writeln!(s, "verdict: {}", if self.passed() { "PASS" } else { "FAIL" });
        let _ = writeln!(s, "runtime_s: {:.3}", self.runtime_s);
        if let Some(e) = &self.error {
            let _ = writeln!(s, "error: {e}");
        }
        let _ = writeln!(s, "\nchecks:");
        for v in &self.verdicts {
            let _ = writeln!(
                s,
                "  [{}] {} = {} (expected {}; {})",
                if v.passed { "pass" } else { "FAIL" },
                v.quantity,
                v.measured.map_or("not measured".into(), fmt_sig),
                v.rule.describe(),
                serde_json::to_value(v.source).ok().and_then(|x| x.as_str().map(str::to_string)).unwrap_or_default()
            );
        }
        let _ = writeln!(s, "\nmeasured:");
        for (k, v) in &self.measured {
            let _ = writeln!(s, "  {k} = {}", fmt_sig(*v));
        }
        if !self.notes.is_empty() {
            let _ = writeln!(s, "\nnotes:");
            for n in &self.notes {
                let _ = writeln!(s, "  {n}");
            }
        }
        if !self.artifacts.is_empty() {
            let _ = writeln!(s, "\nartifacts:");
            for a in &self.artifacts {
                let _ = writeln!(s, "  {}", a.display());
            }
        }
        s
    }
}

fn judge(expected: &[Expectation], measured: &BTreeMap<String, f64>) -> Vec<Verdict> {
    expected
        .iter()
        .map(|e| {
            let m = measured.get(&e.quantity).copied();
            Verdict {
                quantity: e.quantity.clone(),
                rule: e.rule,
                source: e.source,
                measured: m,
                passed: m.is_some_and(|v| e.rule.accepts(v)),
            }
        })
        .collect()
}

/// Run the experiment and check the expectations, without writing files.
pub fn evaluate(scenario: &Scenario) -> (Report, Option<Outcome>) {
    let start = Instant::now();
    let outcome = scenario.params().and_then(|p| scenario.experiment.run(scenario.model, &p));
    let runtime_s = start.elapsed().as_secs_f64();
    let (mut measured, error, notes) = match &outcome {
        Ok(o) => (o.measured.clone(), None, o.notes.clone()),
        Err(e) => (BTreeMap::new(), Some(e.to_string()), Vec::new()),
    };
    measured.insert("runtime_s".into(), runtime_s);
    let mut verdicts = judge(&scenario.expected, &measured);
    if error.is_some() {
        // the computation failed: nothing it would have produced can pass
        for v in &mut verdicts {
            v.passed = false;
        }
    }
    let report = Report {
        id: scenario.id.clone(),
        title: scenario.title.clone(),
        criterion: scenario.criterion,
        measured,
        verdicts,
        runtime_s,
        artifacts: Vec::new(),
        error,
        notes,
    };
    (report, outcome.ok())
}

/// Run a scenario and write `results.csv`, `report.txt` and SVG figures to
/// `out_root/<id>/`. Computation errors become a failed report; only I/O
/// errors are returned as `Err`.
pub fn run_scenario(scenario: &Scenario, out_root: &Path) -> Result<Report> {
    let (mut report, outcome) = evaluate(scenario);
    let dir = out_root.join(&scenario.id);
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    if let Some(outcome) = outcome {
        report.artifacts = write_artifacts(&outcome, &dir, scenario.plot)?;
    }
    let path = dir.join("report.txt");
    report.artifacts.push(path.clone());
    std::fs::write(&path, report.render()).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(report)
}

fn write_text(path: &Path, text: &str) -> Result<PathBuf> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(path.to_path_buf())
}

fn trajectory_csv(t: &Trajectory) -> Result<String> {
    let mut buf = Vec::new();
    crate::io::write_trajectory(t, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))
}

fn write_artifacts(outcome: &Outcome, dir: &Path, plot: bool) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    match &outcome.results {
        Results::Trajectory { trajectory, title } => {
            let csv = trajectory_csv(trajectory)?;
            written.push(write_text(&dir.join("results.csv"), &csv)?);
            if plot {
                // drawn from the CSV text so plot-from-csv reproduces it exactly
                let svg = crate::plot::svg_from_trajectory_csv(&csv, title)?;
                written.push(write_text(&dir.join("trajectory.svg"), &svg)?);
            }
        }
        Results::Table(table) => {
            written.push(write_text(&dir.join("results.csv"), &table.to_csv_string())?);
        }
    }
    for (name, t) in &outcome.trajectories {
        let csv = trajectory_csv(t)?;
        written.push(write_text(&dir.join(format!("{name}.csv")), &csv)?);
        if plot {
            let svg = crate::plot::svg_from_trajectory_csv(&csv, name)?;
            written.push(write_text(&dir.join(format!("{name}.svg")), &svg)?);
        }
    }
    if plot {
        for (name, fig) in &outcome.figures {
            written.push(write_text(&dir.join(format!("{name}.svg")), &fig.render()?)?);
        }
    }
    Ok(written)
}

/// Parameter varied by [`sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParameter {
    A,
    Epsilon,
    /// Branch half-index of experiments that take one.
    N,
}

/// Direction of a measured quantity along the sweep grid (non-strict).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Trend {
    Increasing,
    Decreasing,
    Constant,
    Mixed,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub parameter: SweepParameter,
    pub points: Vec<(f64, Report)>,
    /// Trend of every quantity measured at all grid points.
    pub trends: BTreeMap<String, Trend>,
}

impl SweepResult {
    /// Grid value, pass flag and every measured quantity (runtime excluded).
    pub fn table(&self) -> Table {
        let names: Vec<String> = self.trends.keys().filter(|k| *k != "runtime_s").cloned().collect();
        let mut header = vec!["value".to_string(), "passed".to_string()];
        header.extend(names.iter().cloned());
        let mut t = Table::new(header);
        for (v, r) in &self.points {
            let mut row = vec![(*v).into(), if r.passed() { "1" } else { "0" }.into()];
            row.extend(names.iter().map(|n| r.measured.get(n).copied().into()));
            t.push(row);
        }
        t
    }
}

fn trend(values: &[f64]) -> Trend {
    let d: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    if d.iter().all(|&x| x == 0.0) {
        Trend::Constant
    } else if d.iter().all(|&x| x >= 0.0) {
        Trend::Increasing
    } else if d.iter().all(|&x| x <= 0.0) {
        Trend::Decreasing
    } else {
        Trend::Mixed
    }
}

/// Run `template` once per grid value of `parameter`, concurrently.
/// Failures are recorded per point.
pub fn sweep(parameter: SweepParameter, grid: &[f64], template: &Scenario) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("sweep grid is empty".into()));
    }
    let scenarios: Vec<Scenario> = grid
        .iter()
        .map(|&v| {
            let mut s = template.clone();
            s.id = format!("{}-{}", template.id, fmt_sig(v));
            match parameter {
                SweepParameter::A => s.a = v,
                SweepParameter::Epsilon => s.epsilon = v,
                SweepParameter::N => s.experiment = template.experiment.with_n(v as i64)?,
            }
            Ok(s)
        })
        .collect::<Result<_>>()?;
    let reports: Vec<Report> = scenarios.par_iter().map(|s| evaluate(s).0).collect();
    let points: Vec<(f64, Report)> = grid.iter().copied().zip(reports).collect();
    let mut trends = BTreeMap::new();
    if let Some((_, first)) = points.first() {
        for name in first.measured.keys() {
            let values: Option<Vec<f64>> = points.iter().map(|(_, r)| r.measured.get(name).copied()).collect();
            if let Some(values) = values {
                trends.insert(name.clone(), trend(&values));
            }
        }
    }
    Ok(SweepResult { parameter, points, trends })
}
