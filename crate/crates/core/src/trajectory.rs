//! Mode-tagged trajectories and their event records.

use serde::{Deserialize, Serialize};

use crate::model::{BranchId, Mode};

/// What happened at an event point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Cross,
    SlideEntry,
    SlideExit,
    Fold,
    LayerEntry,
    LayerExit,
}

impl EventKind {
    pub fn label(self) -> &'static str {
        match self {
            EventKind::Cross => "cross",
            EventKind::SlideEntry => "slide-entry",
            EventKind::SlideExit => "slide-exit",
            EventKind::Fold => "fold",
            EventKind::LayerEntry => "layer-entry",
            EventKind::LayerExit => "layer-exit",
        }
    }

    pub fn parse(s: &str) -> Option<EventKind> {
        Some(match s {
            "cross" => EventKind::Cross,
            "slide-entry" => EventKind::SlideEntry,
            "slide-exit" => EventKind::SlideExit,
            "fold" => EventKind::Fold,
            "layer-entry" => EventKind::LayerEntry,
            "layer-exit" => EventKind::LayerExit,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub x: f64,
    pub kind: EventKind,
    pub branch: Option<BranchId>,
}

/// A maximal piece of trajectory in one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub mode: Mode,
    /// Samples `(x, y)`, or `(x, v)` for regularized runs; `x` strictly increasing.
    pub points: Vec<(f64, f64)>,
}

impl Segment {
    pub fn x_start(&self) -> f64 {
        self.points.first().map_or(f64::NAN, |p| p.0)
    }

    pub fn x_end(&self) -> f64 {
        self.points.last().map_or(f64::NAN, |p| p.0)
    }

    pub fn length(&self) -> f64 {
        self.x_end() - self.x_start()
    }
}

/// Ordered segments with events at their boundaries.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub segments: Vec<Segment>,
    pub events: Vec<Event>,
    /// Layer half-width when the ordinate is `v = y/ε`; `0` for `y`.
    pub epsilon: f64,
}

impl Trajectory {
    pub fn new(epsilon: f64) -> Self {
        Trajectory { segments: Vec::new(), events: Vec::new(), epsilon }
    }

    /// Start a new segment at `(x, y)`.
    pub fn begin(&mut self, mode: Mode, x: f64, y: f64) {
        self.segments.push(Segment { mode, points: vec![(x, y)] });
    }

    /// Append a sample to the current segment; samples that do not advance `x` are dropped.
    pub fn push(&mut self, x: f64, y: f64) {
        if let Some(seg) = self.segments.last_mut() {
            if seg.points.last().is_none_or(|p| x > p.0) {
                seg.points.push((x, y));
            }
        }
    }

    /// Close the current segment at `(x, y)` and open one in `mode`.
    pub fn switch(&mut self, x: f64, y: f64, mode: Mode, kind: EventKind, branch: Option<BranchId>) {
        self.push(x, y);
        self.events.push(Event { x, kind, branch });
        self.begin(mode, x, y);
    }

    pub fn record(&mut self, x: f64, kind: EventKind, branch: Option<BranchId>) {
        self.events.push(Event { x, kind, branch });
    }

    pub fn last(&self) -> Option<(f64, f64)> {
        self.segments.last().and_then(|s| s.points.last().copied())
    }

    pub fn x_end(&self) -> f64 {
        self.last().map_or(f64::NAN, |p| p.0)
    }

    pub fn current_mode(&self) -> Option<Mode> {
        self.segments.last().map(|s| s.mode)
    }

    /// Drop empty single-point segments left behind by back-to-back events.
    pub fn tidy(&mut self) {
        let n = self.segments.len();
        let mut kept = Vec::with_capacity(n);
        for (i, seg) in self.segments.drain(..).enumerate() {
            if seg.points.len() > 1 || i + 1 == n {
                kept.push(seg);
            }
        }
        self.segments = kept;
    }

    /// All samples in order, with the mode of the segment they belong to.
    /// Shared segment boundary points appear once.
    pub fn samples(&self) -> impl Iterator<Item = (f64, f64, Mode)> + '_ {
        self.segments.iter().enumerate().flat_map(|(i, seg)| {
            let skip = usize::from(i > 0);
            seg.points.iter().skip(skip).map(move |&(x, y)| (x, y, seg.mode))
        })
    }

    /// Linear interpolation of the ordinate at `x`.
    pub fn sample_at(&self, x: f64) -> Option<f64> {
        for seg in &self.segments {
            if seg.points.len() < 2 || x < seg.x_start() || x > seg.x_end() {
                continue;
            }
            let idx = seg.points.partition_point(|p| p.0 < x);
            if idx == 0 {
                return Some(seg.points[0].1);
            }
            let (x0, y0) = seg.points[idx - 1];
            let (x1, y1) = seg.points[idx];
            return Some(y0 + (y1 - y0) * (x - x0) / (x1 - x0));
        }
        None
    }

    /// Checks the segment continuity and monotonicity invariants.
    pub fn check(&self) -> Result<(), String> {
        let mut last: Option<(f64, f64)> = None;
        for (i, seg) in self.segments.iter().enumerate() {
            if seg.points.windows(2).any(|w| w[1].0 <= w[0].0) {
                return Err(format!("segment {i}: x not strictly increasing"));
            }
            if let (Some(prev), Some(first)) = (last, seg.points.first()) {
                if prev.0 != first.0 || (prev.1 - first.1).abs() > 1e-9 * (1.0 + prev.1.abs()) {
                    return Err(format!("segment {i} does not abut its predecessor"));
                }
            }
            last = seg.points.last().copied();
        }
        for e in &self.events {
            let on_boundary = self
                .segments
                .iter()
                .any(|s| s.points.first().is_some_and(|p| p.0 == e.x) || s.points.last().is_some_and(|p| p.0 == e.x));
            if !on_boundary {
                return Err(format!("event {} at x = {} is not at a segment boundary", e.kind.label(), e.x));
            }
        }
        Ok(())
    }

    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &Event> + '_ {
        self.events.iter().filter(move |e| e.kind == kind)
    }
}
