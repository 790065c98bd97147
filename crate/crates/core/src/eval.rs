//! Trajectory metrics and the method-by-threshold comparison sweep.

use serde::{Deserialize, Serialize};

use crate::env::{Env, EnvConfig};
use crate::error::{Error, Result};
use crate::msha::MshaPolicy;
use crate::planners::{run_classical, Method};
use crate::ppo::greedy_rollout;
use crate::radio::RadioMap;
use crate::scenario::Scenario;
use crate::trace::EpisodeTrace;

/// Trip metrics of one episode. Times are seconds, rates are percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Total distance flown (m).
    pub td: f64,
    /// Mean arrival-to-drop-off time over served passengers.
    pub att: Option<f64>,
    /// Mean arrival-to-pickup time over served passengers.
    pub awt: Option<f64>,
    /// Share of flown slots that started with nobody on board.
    pub elr: f64,
    /// Share of passengers delivered.
    pub pr: f64,
    /// Share of flown slots ending in a cell at or above the threshold.
    pub connectivity: f64,
    pub completion_time: f64,
}

/// Scores a finished episode. Connectivity is sampled once per slot at the
/// cell the vehicle ends the slot in.
pub fn compute_metrics(trace: &EpisodeTrace, scenario: &Scenario) -> Result<Metrics> {
    if !trace.complete {
        return Err(Error::Contract("metrics need a terminated episode".into()));
    }
    if trace.steps.is_empty() {
        return Err(Error::Contract("trace has no initial row".into()));
    }
    let moves = trace.moves();
    let td = trace.steps.iter().map(|s| s.travelled).sum();
    let slot = scenario.slot_duration;
    let served: Vec<_> = trace.passengers.iter().filter(|p| p.serve_time.is_some()).collect();
    let mean = |f: &dyn Fn(&crate::trace::PassengerTimeline) -> usize| {
        (!served.is_empty()).then(|| {
            served.iter().map(|p| (f(p) - p.arrival_slot) as f64 * slot).sum::<f64>() / served.len() as f64
        })
    };
    let awt = mean(&|p| p.board_time.expect("served implies boarded"));
    let att = mean(&|p| p.serve_time.unwrap());
    let pct = |k: usize, n: usize| if n == 0 { 100.0 } else { 100.0 * k as f64 / n as f64 };
    let empty = trace.steps.windows(2).filter(|w| w[0].onboard == 0).count();
    let linked = trace.steps[1..]
        .iter()
        .filter(|s| s.sinr_db >= scenario.sinr_threshold_db)
        .count();
    Ok(Metrics {
        td,
        att,
        awt,
        elr: if moves == 0 { 0.0 } else { pct(empty, moves) },
        pr: pct(served.len(), trace.passengers.len()),
        connectivity: pct(linked, moves),
        completion_time: moves as f64 * slot,
    })
}

/// A method in the comparison sweep.
pub enum Contender<'a> {
    Classical(Method),
    /// A trained policy rolled out greedily.
    Policy {
        name: String,
        policy: &'a MshaPolicy,
        config: EnvConfig,
    },
}

impl Contender<'_> {
    pub fn name(&self) -> String {
        match self {
            Contender::Classical(m) => m.name().to_string(),
            Contender::Policy { name, .. } => name.clone(),
        }
    }

    /// Runs on `scenario` (whose threshold is the one in force) and returns
    /// the trace.
    pub fn run(&self, scenario: &Scenario, map: &RadioMap) -> Result<EpisodeTrace> {
        match self {
            Contender::Classical(m) => Ok(run_classical(scenario, map, *m, scenario.sinr_threshold_db)?.trace),
            Contender::Policy { policy, config, .. } => greedy_rollout(policy, &Env::new(scenario, map, config.clone())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Success,
    Failure,
}

/// One (method, threshold) row. Failure rows keep only PR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub method: String,
    pub threshold_db: f64,
    pub status: Status,
    pub td: Option<f64>,
    pub att: Option<f64>,
    pub awt: Option<f64>,
    pub elr: Option<f64>,
    pub pr: f64,
    pub connectivity: Option<f64>,
    pub completion_time: Option<f64>,
    /// Error message when the method could not run.
    pub note: Option<String>,
}

impl CompareRow {
    fn from_metrics(method: String, threshold_db: f64, m: Metrics) -> Self {
        if m.pr < 100.0 {
            return CompareRow::failure(method, threshold_db, m.pr, None);
        }
        CompareRow {
            method,
            threshold_db,
            status: Status::Success,
            td: Some(m.td),
            att: m.att,
            awt: m.awt,
            elr: Some(m.elr),
            pr: m.pr,
            connectivity: Some(m.connectivity),
            completion_time: Some(m.completion_time),
            note: None,
        }
    }

    fn failure(method: String, threshold_db: f64, pr: f64, note: Option<String>) -> Self {
        CompareRow {
            method,
            threshold_db,
            status: Status::Failure,
            td: None,
            att: None,
            awt: None,
            elr: None,
            pr,
            connectivity: None,
            completion_time: None,
            note,
        }
    }

    fn metric_values(&self) -> [(&'static str, Option<f64>); 7] {
        [
            ("TD", self.td),
            ("ATT", self.att),
            ("AWT", self.awt),
            ("ELR", self.elr),
            ("PR", Some(self.pr)),
            ("connectivity", self.connectivity),
            ("completion_time", self.completion_time),
        ]
    }
}

/// Comparison output.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CompareTable {
    pub rows: Vec<CompareRow>,
}

pub const COMPARE_CSV_HEADER: &str = "method,threshold_db,status,TD,ATT,AWT,ELR,PR,connectivity,completion_time,note";

impl CompareTable {
    pub fn row(&self, method: &str, threshold_db: f64) -> Option<&CompareRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.threshold_db == threshold_db)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{COMPARE_CSV_HEADER}\n");
        for r in &self.rows {
            let cells: Vec<String> = r
                .metric_values()
                .iter()
                .map(|(_, v)| v.map(|v| v.to_string()).unwrap_or_default())
                .collect();
            let status = match r.status {
                Status::Success => "success",
                Status::Failure => "failure",
            };
            let note = r.note.as_deref().unwrap_or("").replace([',', '\n'], ";");
            out.push_str(&format!("{},{},{},{},{}\n", r.method, r.threshold_db, status, cells.join(","), note));
        }
        out
    }

    /// `method,threshold_db,metric,value`, one line per reported metric.
    pub fn to_long_csv(&self) -> String {
        let mut out = String::from("method,threshold_db,metric,value\n");
        for r in &self.rows {
            for (name, v) in r.metric_values() {
                if let Some(v) = v {
                    out.push_str(&format!("{},{},{},{}\n", r.method, r.threshold_db, name, v));
                }
            }
        }
        out
    }
}

/// Runs every contender at every threshold. Methods that cannot run (for
/// example an endpoint below the threshold) become failure rows.
pub fn compare(scenario: &Scenario, map: &RadioMap, contenders: &[Contender<'_>], thresholds: &[f64]) -> Result<CompareTable> {
    let mut table = CompareTable::default();
    for &thr in thresholds {
        let mut s = scenario.clone();
        s.sinr_threshold_db = thr;
        for c in contenders {
            let row = match c.run(&s, map) {
                Ok(trace) => CompareRow::from_metrics(c.name(), thr, compute_metrics(&trace, &s)?),
                Err(e @ (Error::InfeasibleEndpoint { .. } | Error::Unreachable { .. })) => {
                    CompareRow::failure(c.name(), thr, 0.0, Some(e.to_string()))
                }
                Err(e) => return Err(e),
            };
            table.rows.push(row);
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point;
    use crate::synth::{map_from_fn, open_scenario, request, uniform_map};
    use crate::trace::{PassengerTimeline, TraceStep};

    fn step(t: usize, x: f64, travelled: f64, onboard: usize, sinr: f64) -> TraceStep {
        TraceStep {
            t,
            position: Point::new(x, 50.0),
            travelled,
            action: (t > 0).then_some(0),
            reward: 0.0,
            sinr_db: sinr,
            seats_remaining: 2 - onboard,
            onboard,
            events: Vec::new(),
        }
    }

    #[test]
    fn ten_steps_four_empty() {
        let s = open_scenario(20, vec![request(0, Point::new(0.0, 0.0), Point::new(1.0, 0.0), 0)]);
        let mut steps = vec![step(0, 0.0, 0.0, 0, 0.0)];
        for t in 1..=10 {
            steps.push(step(t, t as f64 * 100.0, 100.0, usize::from(t >= 4), 0.0));
        }
        let trace = EpisodeTrace {
            steps,
            passengers: vec![PassengerTimeline {
                id: 0,
                arrival_slot: 0,
                board_time: Some(5),
                serve_time: Some(9),
            }],
            complete: true,
        };
        let m = compute_metrics(&trace, &s).unwrap();
        assert_eq!(m.elr, 40.0);
        assert_eq!(m.awt, Some(15.0));
        assert_eq!(m.att, Some(27.0));
        assert_eq!(m.connectivity, 100.0);
        assert_eq!(m.td, 1000.0);
        assert_eq!(m.completion_time, 30.0);
    }

    #[test]
    fn incomplete_trace_is_rejected() {
        let s = open_scenario(4, vec![]);
        let trace = EpisodeTrace {
            steps: vec![step(0, 0.0, 0.0, 0, 0.0)],
            passengers: vec![],
            complete: false,
        };
        assert!(matches!(compute_metrics(&trace, &s), Err(Error::Contract(_))));
    }

    #[test]
    fn nobody_served_has_no_times() {
        let s = open_scenario(4, vec![request(0, Point::new(0.0, 0.0), Point::new(1.0, 0.0), 0)]);
        let trace = EpisodeTrace {
            steps: vec![step(0, 0.0, 0.0, 0, 0.0), step(1, 100.0, 100.0, 0, -20.0)],
            passengers: vec![PassengerTimeline {
                id: 0,
                arrival_slot: 0,
                board_time: None,
                serve_time: None,
            }],
            complete: true,
        };
        let m = compute_metrics(&trace, &s).unwrap();
        assert_eq!((m.att, m.awt, m.pr, m.connectivity), (None, None, 0.0, 0.0));
    }

    #[test]
    fn compare_rows_and_failures() {
        let mut s = open_scenario(
            8,
            vec![
                request(0, Point::new(150.0, 150.0), Point::new(650.0, 650.0), 0),
                request(1, Point::new(150.0, 650.0), Point::new(650.0, 150.0), 0),
            ],
        );
        s.start_position = Point::new(50.0, 50.0);
        let grid = s.grid();
        // Destination cell of passenger 0 drops out above -6 dB.
        let map = map_from_fn(grid, |c| if (c.i, c.j) == (6, 6) { -6.5 } else { 0.0 });
        let contenders: Vec<_> = Method::ALL.iter().map(|&m| Contender::Classical(m)).collect();
        let table = compare(&s, &map, &contenders, &[-7.0, -5.0]).unwrap();
        assert_eq!(table.rows.len(), 6);
        for m in Method::ALL {
            let ok = table.row(m.name(), -7.0).unwrap();
            assert_eq!(ok.status, Status::Success);
            assert_eq!(ok.pr, 100.0);
        }
        let (c, p) = (table.row("cptsp", -7.0).unwrap(), table.row("pdpcc", -7.0).unwrap());
        assert!(p.td.unwrap() <= c.td.unwrap());
        assert_eq!(c.connectivity, Some(100.0));
        let failed = table.row("cptsp", -5.0).unwrap();
        assert_eq!(failed.status, Status::Failure);
        assert!(failed.td.is_none() && failed.att.is_none() && failed.elr.is_none());
        assert!(failed.note.as_deref().unwrap().contains("destination"));
        let csv = table.to_csv();
        assert_eq!(csv.lines().next().unwrap(), COMPARE_CSV_HEADER);
        assert!(csv.lines().nth(4).unwrap().starts_with("cptsp,-5,failure,,,,,0,,,"));
        assert!(!table.to_long_csv().contains("cptsp,-5,TD"));
        let _ = uniform_map(grid, 0.0);
    }
}
