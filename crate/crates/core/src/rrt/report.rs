use std::io::{Read, Write};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::Path;
use crate::kinematics::JointConfig;
use crate::Result;

/// Incumbent cost after a planner iteration. `best_cost` is `None` until the
/// first solution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub wall_ms: f64,
    pub best_cost: Option<f64>,
}

/// Collects one trace point per distinct iteration index; a later record for
/// the same index overwrites the earlier one.
#[derive(Clone, Debug)]
pub struct TraceRecorder {
    origin: Instant,
    points: Vec<TracePoint>,
}

impl TraceRecorder {
    /// Wall-clock times are measured from `origin`.
    pub fn new(origin: Instant) -> Self {
        TraceRecorder {
            origin,
            points: Vec::new(),
        }
    }

    pub fn record(&mut self, iteration: usize, best_cost: Option<f64>) {
        let p = TracePoint {
            iteration,
            wall_ms: self.origin.elapsed().as_secs_f64() * 1e3,
            best_cost,
        };
        match self.points.last_mut() {
            Some(last) if last.iteration == iteration => *last = p,
            _ => self.points.push(p),
        }
    }

    pub fn into_points(self) -> Vec<TracePoint> {
        self.points
    }
}

/// Writes `iteration,wall_ms,best_cost` rows; an unsolved iteration has an
/// empty `best_cost` field.
pub fn write_trace_csv(out: impl Write, trace: &[TracePoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in trace {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv(input: impl Read) -> Result<Vec<TracePoint>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

/// When and at what cost the incumbent changed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub iteration: usize,
    pub wall_ms: f64,
    pub cost: f64,
}

/// Best solution seen so far. Only strictly cheaper offers replace it, so the
/// recorded cost never increases.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolutionRecord {
    pub best: Option<Path>,
    /// Index of the goal configuration (goal tree) the best path ends in.
    pub goal_index: Option<usize>,
    pub first: Option<Improvement>,
    pub latest: Option<Improvement>,
    pub improvements: usize,
}

impl SolutionRecord {
    pub fn best_cost(&self) -> Option<f64> {
        self.best.as_ref().map(|p| p.cost)
    }

    /// Whether a candidate of this cost would be accepted.
    pub fn improves(&self, cost: f64) -> bool {
        self.best_cost().is_none_or(|b| cost < b)
    }

    pub fn offer(&mut self, path: Path, goal_index: usize, iteration: usize, wall_ms: f64) -> bool {
        if !self.improves(path.cost) {
            return false;
        }
        let imp = Improvement {
            iteration,
            wall_ms,
            cost: path.cost,
        };
        if self.first.is_none() {
            self.first = Some(imp);
        }
        self.latest = Some(imp);
        self.improvements += 1;
        self.best = Some(path);
        self.goal_index = Some(goal_index);
        true
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Iterations,
    Nodes,
    Timeout,
    /// Every tree stopped growing (repeated Trapped extensions).
    Stalled,
}

/// Instrumentation points of one planner call. The search span excludes goal
/// sampling and data-structure set-up.
#[derive(Clone, Copy, Debug)]
pub struct Timing {
    pub started: Instant,
    pub setup_finished: Instant,
    pub search_started: Instant,
    pub search_finished: Instant,
}

impl Timing {
    pub(crate) fn begin() -> Self {
        let now = Instant::now();
        Timing {
            started: now,
            setup_finished: now,
            search_started: now,
            search_finished: now,
        }
    }

    pub fn setup_ms(&self) -> f64 {
        (self.setup_finished - self.started).as_secs_f64() * 1e3
    }

    pub fn search_ms(&self) -> f64 {
        (self.search_finished - self.search_started).as_secs_f64() * 1e3
    }

    pub(crate) fn deadline_passed(&self, budget_ms: u64) -> bool {
        self.search_started.elapsed().as_millis() >= budget_ms as u128
    }
}

/// Everything a planner call produces.
#[derive(Clone, Debug)]
pub struct PlanReport {
    pub record: SolutionRecord,
    pub trace: Vec<TracePoint>,
    /// Final iteration index under the planner's iteration definition.
    pub iterations: usize,
    /// Node count per tree; the start tree comes last.
    pub tree_sizes: Vec<usize>,
    /// Goal configurations the trees were rooted at.
    pub goal_configs: Vec<JointConfig>,
    pub stop: StopReason,
    pub timing: Timing,
}

impl PlanReport {
    pub fn path(&self) -> Option<&Path> {
        self.record.best.as_ref()
    }

    pub fn success(&self) -> bool {
        self.record.best.is_some()
    }

    pub fn total_nodes(&self) -> usize {
        self.tree_sizes.iter().sum()
    }

    /// Whether the trace never increases and is ordered by iteration.
    pub fn trace_is_monotone(&self) -> bool {
        trace_is_monotone(&self.trace)
    }
}

/// Non-decreasing iteration, and once solved, never unsolved or more expensive.
pub fn trace_is_monotone(trace: &[TracePoint]) -> bool {
    trace.windows(2).all(|w| {
        w[0].iteration <= w[1].iteration
            && match (w[0].best_cost, w[1].best_cost) {
                (Some(a), Some(b)) => b <= a,
                (Some(_), None) => false,
                _ => true,
            }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_accepts_only_strict_improvements() {
        let mut r = SolutionRecord::default();
        let p = |c: f64| Path::from_waypoints(vec![vec![0.0].into(), vec![c].into()]);
        assert!(r.offer(p(3.0), 0, 5, 1.0));
        assert!(!r.offer(p(3.0), 1, 6, 2.0));
        assert!(!r.offer(p(4.0), 1, 7, 3.0));
        assert!(r.offer(p(2.0), 2, 9, 4.0));
        assert_eq!(r.first.unwrap().iteration, 5);
        assert_eq!(r.latest.unwrap().cost, 2.0);
        assert_eq!(r.goal_index, Some(2));
        assert_eq!(r.improvements, 2);
    }

    #[test]
    fn trace_csv_roundtrip() {
        let trace = vec![
            TracePoint {
                iteration: 0,
                wall_ms: 0.5,
                best_cost: None,
            },
            TracePoint {
                iteration: 3,
                wall_ms: 1.25,
                best_cost: Some(2.5),
            },
        ];
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &trace).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text, "iteration,wall_ms,best_cost\n0,0.5,\n3,1.25,2.5\n");
        assert_eq!(read_trace_csv(&buf[..]).unwrap(), trace);
        assert!(trace_is_monotone(&trace));
    }

    #[test]
    fn recorder_keeps_last_point_per_iteration() {
        let mut t = TraceRecorder::new(Instant::now());
        t.record(0, None);
        t.record(0, Some(3.0));
        t.record(2, Some(2.0));
        let pts = t.into_points();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[0].best_cost, Some(3.0));
    }
}
