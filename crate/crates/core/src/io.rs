//! CSV emission and ingestion.
//!
//! Every number is written with 12 significant digits, `.` as decimal
//! separator and `\n` line endings, independent of the host locale.
//!
//! Trajectory files have the fixed header `x,y_or_v,mode,branch,event`:
//!
//! * `y_or_v` is `y` for discontinuous runs and `v = y/ε` for regularized ones;
//! * `mode` is one of `flow+`, `flow-`, `slide`, `layer`;
//! * `branch` is the sliding branch (`L3`, `N7`) or empty;
//! * `event` names the event recorded at that abscissa, if any.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{BranchId, Mode, SwitchingModel};
use crate::trajectory::{EventKind, Trajectory};

pub const TRAJECTORY_HEADER: [&str; 5] = ["x", "y_or_v", "mode", "branch", "event"];

/// Significant digits of every emitted number.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Format `value` with 12 significant digits, `%g` style: plain decimals for
/// moderate magnitudes, scientific notation otherwise. Trailing zeros are
/// dropped so the output is canonical.
pub fn fmt_sig(value: f64) -> String {
    if value.is_nan() {
        return "NaN".into();
    }
    if value.is_infinite() {
        return if value > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if value == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, value);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..SIGNIFICANT_DIGITS as i32).contains(&exp) {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{value:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    if t == "-0" {
        "0".into()
    } else {
        t.to_string()
    }
}

/// One row of a trajectory CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub x: f64,
    pub y_or_v: f64,
    pub mode: String,
    pub branch: String,
    pub event: String,
}

/// Flatten a trajectory into CSV rows, attaching events to the sample at
/// the same abscissa.
pub fn trajectory_rows(traj: &Trajectory) -> Vec<TrajectoryRow> {
    let mut events = traj.events.iter().peekable();
    // a shared segment boundary is reported once, in the mode entered there
    let mut points: Vec<(f64, f64, Mode)> = Vec::new();
    for seg in &traj.segments {
        for &(x, y) in &seg.points {
            if points.last().is_some_and(|p| p.0 == x) {
                points.pop();
            }
            points.push((x, y, seg.mode));
        }
    }
    let mut rows = Vec::new();
    for (x, y, mode) in points {
        let branch = match mode {
            Mode::Sliding(id) => id.to_string(),
            _ => String::new(),
        };
        let mut labels = Vec::new();
        let mut event_branch = None;
        while let Some(e) = events.peek() {
            if e.x > x {
                break;
            }
            if e.x == x {
                labels.push(e.kind.label());
                event_branch = event_branch.or(e.branch);
            }
            events.next();
        }
        let branch = if branch.is_empty() { event_branch.map(|b| b.to_string()).unwrap_or_default() } else { branch };
        rows.push(TrajectoryRow { x, y_or_v: y, mode: mode.label().to_string(), branch, event: labels.join(";") });
    }
    rows
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

/// Write a trajectory in the fixed five-column format.
pub fn write_trajectory<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record(TRAJECTORY_HEADER)?;
    for r in trajectory_rows(traj) {
        w.write_record([fmt_sig(r.x), fmt_sig(r.y_or_v), r.mode, r.branch, r.event])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trajectory_file(traj: &Trajectory, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write_trajectory(traj, std::io::BufWriter::new(file))
}

/// Read a trajectory CSV back; the header must match exactly.
pub fn read_trajectory<R: std::io::Read>(input: R) -> Result<Vec<TrajectoryRow>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != TRAJECTORY_HEADER {
        return Err(Error::Format(format!("expected header {}, found {}", TRAJECTORY_HEADER.join(","), header.join(","))));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let num = |k: usize| -> Result<f64> {
            rec.get(k)
                .unwrap_or("")
                .parse::<f64>()
                .map_err(|e| Error::Format(format!("row {}: column {}: {e}", i + 2, TRAJECTORY_HEADER[k])))
        };
        let mode = rec.get(2).unwrap_or("").to_string();
        if !["flow+", "flow-", "slide", "layer"].contains(&mode.as_str()) {
            return Err(Error::Format(format!("row {}: unknown mode {mode:?}", i + 2)));
        }
        let event = rec.get(4).unwrap_or("").to_string();
        if let Some(bad) = event.split(';').filter(|s| !s.is_empty()).find(|s| EventKind::parse(s).is_none()) {
            return Err(Error::Format(format!("row {}: unknown event {bad:?}", i + 2)));
        }
        rows.push(TrajectoryRow { x: num(0)?, y_or_v: num(1)?, mode, branch: rec.get(3).unwrap_or("").to_string(), event });
    }
    Ok(rows)
}

pub fn read_trajectory_file(path: &Path) -> Result<Vec<TrajectoryRow>> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_trajectory(std::io::BufReader::new(file))
}

/// Parse a branch label such as `N12` or `L-1`.
pub fn parse_branch(label: &str) -> Option<BranchId> {
    let model = match label.chars().next()? {
        'L' => SwitchingModel::Linear,
        'N' => SwitchingModel::Nonlinear,
        _ => return None,
    };
    label[1..].parse().ok().map(|index| BranchId { model, index })
}

/// A numeric table with named columns; non-finite cells are written as
/// `NaN`/`inf` and empty cells as `""`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => fmt_sig(*v),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Numeric column by name; text and empty cells become `NaN`.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(
            self.rows
                .iter()
                .map(|r| match r.get(k) {
                    Some(Cell::Num(v)) => *v,
                    _ => f64::NAN,
                })
                .collect(),
        )
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        let mut w = writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("CSV output is UTF-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::Trajectory;
    use proptest::prelude::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_sig(0.6261249968882), "0.626124996888");
        assert_eq!(fmt_sig(44.00345512345678), "44.0034551235");
        assert_eq!(fmt_sig(-1.0), "-1");
        assert_eq!(fmt_sig(2.0e-31), "2e-31");
        assert_eq!(fmt_sig(1.0e-5), "0.00001");
        assert_eq!(fmt_sig(123456789012345.0), "1.23456789012e14");
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(-0.0), "0");
    }

    #[test]
    fn trajectory_round_trip() {
        let mut t = Trajectory::new(0.0);
        t.begin(Mode::FlowMinus, 0.0, 0.0);
        t.push(0.5, -0.1);
        let b = BranchId { model: SwitchingModel::Nonlinear, index: 2 };
        t.switch(1.0, 0.0, Mode::Sliding(b), EventKind::SlideEntry, Some(b));
        t.push(2.0, 0.0);
        let mut buf = Vec::new();
        write_trajectory(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x,y_or_v,mode,branch,event\n"));
        assert!(!text.contains('\r'));
        assert!(text.contains("1,0,slide,N2,slide-entry\n"), "{text}");
        let rows = read_trajectory(buf.as_slice()).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[2].event, "slide-entry");
        assert_eq!(parse_branch(&rows[3].branch), Some(b));
    }

    #[test]
    fn wrong_header_is_rejected() {
        let err = read_trajectory("x,y\n1,2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Format(_)));
        let err = read_trajectory("x,y_or_v,mode,branch,event\n1,2,warp,,\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Format(_)));
    }

    #[test]
    fn table_output() {
        let mut t = Table::new(["eps", "x_star", "note"]);
        t.push(vec![1e-3.into(), Cell::Num(0.62747), Cell::Empty]);
        assert_eq!(t.to_csv_string(), "eps,x_star,note\n0.001,0.62747,\n");
        assert_eq!(t.column("x_star"), Some(vec![0.62747]));
    }

    proptest! {
        #[test]
        fn formatted_values_keep_twelve_digits(v in -1e6f64..1e6) {
            let back: f64 = fmt_sig(v).parse().unwrap();
            prop_assert!((back - v).abs() <= 5e-12 * v.abs().max(1e-300));
        }
    }
}
