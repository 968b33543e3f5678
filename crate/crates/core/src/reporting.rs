//! Suite-level aggregation: per-task rows, per-type means, the binary versus
//! fine-grained comparison and the error-taxonomy breakdown.
//!
//! A report covers one suite and any number of methods (run modes or
//! agents). Error shares are emitted twice: over each method's own error
//! total and over each error type's total across methods.

use std::collections::BTreeMap;

use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluator::{render2, render_exact, ExactScore, Score, Q, W1};
use crate::orchestrator::RunLog;
use crate::simulator::{ErrorEvent, Taxonomy, Trace};
use crate::task::{Task, TaskType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ErrorCounts {
    pub ctf: u32,
    pub cke: u32,
    pub eim: u32,
    pub cnc: u32,
}

impl ErrorCounts {
    pub fn get(&self, t: Taxonomy) -> u32 {
        match t {
            Taxonomy::Ctf => self.ctf,
            Taxonomy::Cke => self.cke,
            Taxonomy::Eim => self.eim,
            Taxonomy::Cnc => self.cnc,
        }
    }

    fn bump(&mut self, t: Taxonomy, by: u32) {
        match t {
            Taxonomy::Ctf => self.ctf += by,
            Taxonomy::Cke => self.cke += by,
            Taxonomy::Eim => self.eim += by,
            Taxonomy::Cnc => self.cnc += by,
        }
    }

    pub fn total(&self) -> u32 {
        self.ctf + self.cke + self.eim + self.cnc
    }

    fn add(&mut self, o: &ErrorCounts) {
        for t in TAXONOMY {
            self.bump(t, o.get(t));
        }
    }
}

pub const TAXONOMY: [Taxonomy; 4] = [Taxonomy::Ctf, Taxonomy::Cke, Taxonomy::Eim, Taxonomy::Cnc];

/// CKE, EIM and CNC are one per failed item in the trace. CTF is at most one
/// per run: a failed subtask was followed by a dispatched downstream subtask
/// and the submitted plan is not executable.
pub fn classify_errors(trace: &Trace, log: Option<&RunLog>) -> ErrorCounts {
    classify_events(&trace.events, trace.l1_full(), log)
}

pub fn classify_events(events: &[ErrorEvent], l1_full: bool, log: Option<&RunLog>) -> ErrorCounts {
    let mut c = ErrorCounts::default();
    for e in events {
        c.bump(e.taxonomy, 1);
    }
    if log.is_some_and(|l| l.cascading_failure()) && !l1_full {
        c.ctf = 1;
    }
    c
}

/// One scored task under one method.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskResult {
    pub suite: String,
    pub method: String,
    pub task_id: String,
    pub task_type: TaskType,
    pub score: Score,
    pub errors: ErrorCounts,
}

impl TaskResult {
    pub fn new(suite: &str, method: &str, task: &Task, score: Score, trace: &Trace, log: Option<&RunLog>) -> TaskResult {
        TaskResult {
            suite: suite.to_string(),
            method: method.to_string(),
            task_id: task.id.clone(),
            task_type: task.task_type,
            score,
            errors: classify_errors(trace, log),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReportError {
    #[error("no results to report")]
    Empty,
    #[error("results mix suites `{0}` and `{1}`")]
    MixedSuites(String, String),
    #[error("task {task} appears twice for method {method}")]
    Duplicate { method: String, task: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub task_id: String,
    #[serde(rename = "type")]
    pub task_type: TaskType,
    pub s1: String,
    pub s2: String,
    pub s3: String,
    pub total: String,
    pub binary: bool,
    pub exact: ExactScore,
    #[serde(flatten)]
    pub errors: ErrorCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMeans {
    /// "type1", "type2", "type3" or "overall".
    pub group: String,
    pub tasks: usize,
    pub s1: Option<String>,
    pub s2: Option<String>,
    pub s3: Option<String>,
    pub total: Option<String>,
    pub total_exact: Option<String>,
}

/// Percentages; `None` when the denominator is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shares {
    pub ctf: Option<String>,
    pub cke: Option<String>,
    pub eim: Option<String>,
    pub cnc: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBreakdown {
    pub counts: ErrorCounts,
    /// Share of this method's errors falling in each type.
    pub of_method: Shares,
    /// Share of each type's errors, across all methods, made by this method.
    pub of_type: Shares,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub rows: Vec<ReportRow>,
    pub by_type: Vec<GroupMeans>,
    /// Fraction of tasks with s1 = 60.
    pub binary_rate: String,
    pub binary_rate_exact: String,
    /// Mean total score.
    pub fine_grained_mean: String,
    pub fine_grained_mean_exact: String,
    /// Tasks that fail the binary criterion yet score above zero.
    pub hidden_progress: Vec<String>,
    pub errors: ErrorBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub methods: Vec<MethodReport>,
}

fn mean(xs: impl Iterator<Item = Q>) -> Option<Q> {
    let mut n = 0i128;
    let mut sum = Q::zero();
    for x in xs {
        sum += x;
        n += 1;
    }
    (n > 0).then(|| sum / Q::from_integer(n))
}

fn percent(num: u32, den: u32) -> Option<String> {
    (den > 0).then(|| render2(&Q::new(100 * i128::from(num), i128::from(den))))
}

fn shares(c: &ErrorCounts, den: impl Fn(Taxonomy) -> u32) -> Shares {
    let p = |t| percent(c.get(t), den(t));
    Shares { ctf: p(Taxonomy::Ctf), cke: p(Taxonomy::Cke), eim: p(Taxonomy::Eim), cnc: p(Taxonomy::Cnc) }
}

fn group(name: &str, rs: &[&TaskResult]) -> GroupMeans {
    let m = |f: fn(&Score) -> Q| mean(rs.iter().map(|r| f(&r.score)));
    let total = m(|s| s.total);
    GroupMeans {
        group: name.to_string(),
        tasks: rs.len(),
        s1: m(|s| s.s1).map(|q| render2(&q)),
        s2: m(|s| s.s2).map(|q| render2(&q)),
        s3: m(|s| s.s3).map(|q| render2(&q)),
        total: total.map(|q| render2(&q)),
        total_exact: total.map(|q| render_exact(&q)),
    }
}

fn row(r: &TaskResult) -> ReportRow {
    let s = &r.score;
    ReportRow {
        task_id: r.task_id.clone(),
        task_type: r.task_type,
        s1: render2(&s.s1),
        s2: render2(&s.s2),
        s3: render2(&s.s3),
        total: render2(&s.total),
        binary: s.s1 == Q::from_integer(W1),
        exact: ExactScore {
            s1: render_exact(&s.s1),
            s2: render_exact(&s.s2),
            s3: render_exact(&s.s3),
            total: render_exact(&s.total),
        },
        errors: r.errors,
    }
}

/// Aggregates results from one suite. Methods are ordered by name and rows
/// by task id, so the output does not depend on input order.
pub fn build_report(results: &[TaskResult]) -> Result<SuiteReport, ReportError> {
    let first = results.first().ok_or(ReportError::Empty)?;
    if let Some(r) = results.iter().find(|r| r.suite != first.suite) {
        return Err(ReportError::MixedSuites(first.suite.clone(), r.suite.clone()));
    }
    let mut by_method: BTreeMap<&str, BTreeMap<&str, &TaskResult>> = BTreeMap::new();
    for r in results {
        if by_method.entry(&r.method).or_default().insert(&r.task_id, r).is_some() {
            return Err(ReportError::Duplicate { method: r.method.clone(), task: r.task_id.clone() });
        }
    }
    let mut totals: BTreeMap<&str, ErrorCounts> = BTreeMap::new();
    let mut across = ErrorCounts::default();
    for (m, rs) in &by_method {
        let t = totals.entry(m).or_default();
        for r in rs.values() {
            t.add(&r.errors);
        }
        across.add(t);
    }
    let methods = by_method
        .iter()
        .map(|(m, rs)| {
            let rs: Vec<&TaskResult> = rs.values().copied().collect();
            let mut by_type: Vec<GroupMeans> = TaskType::ALL
                .iter()
                .map(|tt| {
                    let g: Vec<&TaskResult> = rs.iter().copied().filter(|r| r.task_type == *tt).collect();
                    group(&format!("type{}", tt.number()), &g)
                })
                .collect();
            by_type.push(group("overall", &rs));
            let rows: Vec<ReportRow> = rs.iter().map(|r| row(r)).collect();
            let n = rows.len() as i128;
            let binary = Q::new(rows.iter().filter(|r| r.binary).count() as i128, n);
            let fine = mean(rs.iter().map(|r| r.score.total)).unwrap_or_else(Q::zero);
            let counts = totals[m];
            MethodReport {
                method: m.to_string(),
                by_type,
                binary_rate: render2(&binary),
                binary_rate_exact: render_exact(&binary),
                fine_grained_mean: render2(&fine),
                fine_grained_mean_exact: render_exact(&fine),
                hidden_progress: rs
                    .iter()
                    .zip(&rows)
                    .filter(|(r, row)| !row.binary && r.score.total > Q::zero())
                    .map(|(r, _)| r.task_id.clone())
                    .collect(),
                errors: ErrorBreakdown {
                    counts,
                    of_method: shares(&counts, |_| counts.total()),
                    of_type: shares(&counts, |t| across.get(t)),
                },
                rows,
            }
        })
        .collect();
    Ok(SuiteReport { suite: first.suite.clone(), methods })
}

impl SuiteReport {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json_str(s: &str) -> Result<SuiteReport, serde_json::Error> {
        serde_json::from_str(s)
    }
}

pub const CSV_HEADER: [&str; 11] = ["task_id", "type", "s1", "s2", "s3", "total", "binary", "ctf", "cke", "eim", "cnc"];

impl MethodReport {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER).expect("in-memory write");
        for r in &self.rows {
            let e = &r.errors;
            w.write_record([
                r.task_id.clone(),
                r.task_type.number().to_string(),
                r.s1.clone(),
                r.s2.clone(),
                r.s3.clone(),
                r.total.clone(),
                u8::from(r.binary).to_string(),
                e.ctf.to_string(),
                e.cke.to_string(),
                e.eim.to_string(),
                e.cnc.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }
}
