use std::collections::BTreeMap;
use std::fmt;

use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};

use super::{PlannerKind, TrialResult};

/// Percentile of first-solution iterations. Failed trials count as
/// `max_iterations + 1`; a percentile landing on one is rendered `>max`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Percentile {
    Value(usize),
    Over(usize),
}

impl fmt::Display for Percentile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Percentile::Value(v) => write!(f, "{v}"),
            Percentile::Over(m) => write!(f, ">{m}"),
        }
    }
}

impl Serialize for Percentile {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Percentile::Value(v) => s.serialize_u64(*v as u64),
            Percentile::Over(_) => s.serialize_str(&self.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for Percentile {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(u64),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(v) => Ok(Percentile::Value(v as usize)),
            Raw::S(s) => s
                .strip_prefix('>')
                .and_then(|m| m.parse().ok())
                .map(Percentile::Over)
                .ok_or_else(|| de::Error::custom(format!("bad percentile '{s}'"))),
        }
    }
}

/// Costs are written as numbers, or the string `"inf"` when no trial succeeded.
mod cost {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str("inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(f64),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(v) => Ok(v),
            Raw::S(s) if s == "inf" => Ok(f64::INFINITY),
            Raw::S(s) => Err(serde::de::Error::custom(format!("bad cost '{s}'"))),
        }
    }
}

/// One line of the summary table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub chain: String,
    pub env: String,
    pub planner: String,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub first_iteration_p10: Percentile,
    pub first_iteration_p50: Percentile,
    pub first_iteration_p90: Percentile,
    /// Nearest-rank median over successful trials; `inf` without successes.
    #[serde(with = "cost")]
    pub median_first_cost: f64,
    #[serde(with = "cost")]
    pub median_final_cost: f64,
    /// Mean time to the first solution over successful trials.
    pub mean_first_ms: Option<f64>,
    /// Mean time to the last improvement over successful trials.
    pub mean_final_ms: Option<f64>,
    /// Mean search span over all trials.
    pub mean_total_ms: f64,
}

/// Nearest-rank percentile: the element of rank `⌈p/100 · n⌉` (1-based) of
/// `sorted`, clamped to the first element.
pub fn nearest_rank<T: Copy>(sorted: &[T], p: f64) -> T {
    assert!(!sorted.is_empty(), "percentile of an empty set");
    let rank = (p / 100.0 * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn planner_order(name: &str) -> usize {
    PlannerKind::parse(name).map_or(usize::MAX, |k| k as usize)
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Aggregates results per (chain, environment, planner). Rows are ordered by
/// chain, environment and planner; the input order does not matter.
pub fn summarize(results: &[TrialResult]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, String, usize, String), Vec<&TrialResult>> = BTreeMap::new();
    for r in results {
        let key = (r.chain.clone(), r.env.clone(), planner_order(&r.planner), r.planner.clone());
        groups.entry(key).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((chain, env, _, planner), rs)| {
            let max = rs.iter().map(|r| r.max_iterations).max().unwrap_or(0);
            let mut first_its: Vec<usize> = rs
                .iter()
                .map(|r| match (r.success, r.first_iteration) {
                    (true, Some(i)) => i,
                    _ => max + 1,
                })
                .collect();
            first_its.sort_unstable();
            let pct = |p: f64| {
                let v = nearest_rank(&first_its, p);
                if v > max {
                    Percentile::Over(max)
                } else {
                    Percentile::Value(v)
                }
            };
            let ok: Vec<&&TrialResult> = rs.iter().filter(|r| r.success).collect();
            let median_of = |f: &dyn Fn(&TrialResult) -> Option<f64>| {
                let mut v: Vec<f64> = ok.iter().filter_map(|r| f(r)).collect();
                v.sort_by(f64::total_cmp);
                if v.is_empty() {
                    f64::INFINITY
                } else {
                    nearest_rank(&v, 50.0)
                }
            };
            let first_ms: Vec<f64> = ok.iter().filter_map(|r| r.first_ms).collect();
            let final_ms: Vec<f64> = ok.iter().filter_map(|r| r.final_ms).collect();
            let totals: Vec<f64> = rs.iter().map(|r| r.total_ms).collect();
            SummaryRow {
                chain,
                env,
                planner,
                trials: rs.len(),
                successes: ok.len(),
                success_rate: ok.len() as f64 / rs.len() as f64,
                first_iteration_p10: pct(10.0),
                first_iteration_p50: pct(50.0),
                first_iteration_p90: pct(90.0),
                median_first_cost: median_of(&|r| r.first_cost),
                median_final_cost: median_of(&|r| r.final_cost),
                mean_first_ms: mean(&first_ms),
                mean_final_ms: mean(&final_ms),
                mean_total_ms: mean(&totals).unwrap_or(0.0),
            }
        })
        .collect()
}

fn fmt_cost(c: f64) -> String {
    if c.is_finite() {
        format!("{c:.3}")
    } else {
        "∞".to_string()
    }
}

fn fmt_ms(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.1}"))
}

const COLUMNS: [&str; 14] = [
    "chain",
    "env",
    "planner",
    "trials",
    "success_rate",
    "first_iteration_p10",
    "first_iteration_p50",
    "first_iteration_p90",
    "median_first_cost",
    "median_final_cost",
    "mean_first_ms",
    "mean_final_ms",
    "mean_total_ms",
    "successes",
];

fn cells(r: &SummaryRow) -> [String; 14] {
    [
        r.chain.clone(),
        r.env.clone(),
        r.planner.clone(),
        r.trials.to_string(),
        format!("{:.3}", r.success_rate),
        r.first_iteration_p10.to_string(),
        r.first_iteration_p50.to_string(),
        r.first_iteration_p90.to_string(),
        fmt_cost(r.median_first_cost),
        fmt_cost(r.median_final_cost),
        fmt_ms(r.mean_first_ms),
        fmt_ms(r.mean_final_ms),
        format!("{:.1}", r.mean_total_ms),
        r.successes.to_string(),
    ]
}

pub fn render_csv(rows: &[SummaryRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(COLUMNS).expect("in-memory write");
    for r in rows {
        w.write_record(cells(r)).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

/// Table with the columns of the benchmark report: success, first-solution
/// iteration percentiles, median costs and mean runtimes.
pub fn render_markdown(rows: &[SummaryRow]) -> String {
    let mut out = String::new();
    out.push_str("| Chain | Env | Planner | Success | 1st Sol. Iter. p10 | p50 | p90 | Median Cost First | Median Cost Final | Avg ms First | Avg ms Final | Avg ms Total |\n");
    out.push_str("|---|---|---|---|---|---|---|---|---|---|---|---|\n");
    for r in rows {
        out.push_str(&format!(
            "| {} | {} | {} | {:.1}% ({}/{}) | {} | {} | {} | {} | {} | {} | {} | {:.1} |\n",
            r.chain,
            r.env,
            r.planner,
            100.0 * r.success_rate,
            r.successes,
            r.trials,
            r.first_iteration_p10,
            r.first_iteration_p50,
            r.first_iteration_p90,
            fmt_cost(r.median_first_cost),
            fmt_cost(r.median_final_cost),
            fmt_ms(r.mean_first_ms),
            fmt_ms(r.mean_final_ms),
            r.mean_total_ms,
        ));
    }
    out
}
