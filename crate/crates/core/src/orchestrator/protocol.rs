//! Line-delimited JSON exchange with an external agent.
//!
//! The orchestrator writes one context message per subtask. The agent may
//! then send any number of tool calls, each answered on its own line, and
//! finishes with a message carrying the itinerary text. Every message in
//! both directions carries `"version": 1`.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::evaluator::{render2, render_exact};
use crate::itinerary::parse_itinerary;
use crate::simulator::SimStateFile;
use crate::solver::StayPolicy;
use crate::task::{AttractionTarget, CityTarget, ConstraintFile, Task};
use crate::time::{Calendar, Window};
use crate::world::World;

use super::calc::calc;
use super::{stale_view, Agent, AgentError, AgentReply, HistoryEntry, Skill, SubtaskContext, SubtaskKind};

pub const PROTOCOL_VERSION: u32 = 1;

pub const TOOL_DOC: &str = "\
Reply with one JSON object per line, each with \"version\": 1.
Tool calls are {\"version\": 1, \"op\": <name>, \"args\": {...}} and are answered with
{\"version\": 1, \"ok\": true, \"result\": ...} or {\"version\": 1, \"ok\": false, \"error\": \"...\"}.
  query_trips {origin, destination, from, to}: trips between two cities departing in
    [from, to] (\"MM-DD HH:MM\"), sorted by departure.
  query_attraction {city, place}: opening windows, minimum visit length and price.
  calc {expr}: exact arithmetic with + - * / and parentheses over integers and decimals;
    returns {exact: \"n/d\", decimal}.
Finish with {\"version\": 1, \"itinerary\": \"<one action per line>\", \"summary\": <optional text>}.
Actions: go_to_place(origin, destination, depart, arrive), visit(place, begin, end),
go_to_city(origin, destination, depart, arrive, ticket), stay_in(city, begin, end).
";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndFile {
    pub place: String,
    pub by: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetsFile {
    pub cities: Vec<CityTarget>,
    pub attractions: Vec<AttractionTarget>,
}

/// What an external agent receives for each subtask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextMessage {
    pub version: u32,
    #[serde(rename = "type")]
    pub message_type: String,
    pub task_id: String,
    pub start_date: String,
    pub objective: crate::task::Objective,
    pub subtask_id: usize,
    pub subtask: SubtaskKind,
    pub attempt: u32,
    pub frontier: SimStateFile,
    pub targets: TargetsFile,
    pub constraints: Vec<ConstraintFile>,
    pub excluded: Vec<String>,
    pub stays: StayPolicy,
    pub end: Option<EndFile>,
    pub skills: Vec<Skill>,
    pub tool_doc: String,
    pub history: Vec<HistoryEntry>,
}

impl ContextMessage {
    pub fn new(ctx: &SubtaskContext, task: &Task) -> ContextMessage {
        let cal = &task.calendar;
        ContextMessage {
            version: PROTOCOL_VERSION,
            message_type: "subtask".into(),
            task_id: task.id.clone(),
            start_date: cal.render_date(),
            objective: task.objective,
            subtask_id: ctx.subtask_id,
            subtask: ctx.kind.clone(),
            attempt: ctx.attempt,
            frontier: ctx.frontier.to_file(cal),
            targets: TargetsFile { cities: ctx.cities.clone(), attractions: ctx.attractions.clone() },
            constraints: ctx.constraints.iter().map(|c| ConstraintFile::from_constraint(c, cal)).collect(),
            excluded: ctx.excluded.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect(),
            stays: ctx.stays,
            end: ctx.end.as_ref().map(|e| EndFile { place: e.place.clone(), by: e.by.map(|t| cal.render(t)) }),
            skills: ctx.skills.clone(),
            tool_doc: ctx.tool_doc.clone(),
            history: ctx.history.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", content = "args", rename_all = "snake_case", deny_unknown_fields)]
pub enum ToolCall {
    QueryTrips { origin: String, destination: String, from: String, to: String },
    QueryAttraction { city: String, place: String },
    Calc { expr: String },
}

/// Answers a tool call from `view`.
pub fn answer_tool(view: &World, cal: &Calendar, call: &ToolCall) -> Result<Value, String> {
    match call {
        ToolCall::QueryTrips { origin, destination, from, to } => {
            let w = Window::new(cal.parse(from).map_err(|e| e.to_string())?, cal.parse(to).map_err(|e| e.to_string())?);
            let trips = view.query_trips(origin, destination, w).map_err(|e| e.to_string())?;
            Ok(Value::Array(
                trips
                    .iter()
                    .map(|t| {
                        json!({
                            "ticket_id": t.ticket_id,
                            "origin_city": t.origin_city,
                            "dest_city": t.dest_city,
                            "depart": cal.render(t.depart),
                            "arrive": cal.render(t.arrive),
                            "price": t.price,
                            "mode": t.mode(),
                        })
                    })
                    .collect(),
            ))
        }
        ToolCall::QueryAttraction { city, place } => {
            let p = view.query_attraction(city, place).map_err(|e| e.to_string())?;
            let windows: Vec<[String; 2]> =
                p.opening_windows.iter().map(|w| [cal.render(w.start), cal.render(w.end)]).collect();
            Ok(json!({
                "name": p.name,
                "opening_windows": windows,
                "min_visit_minutes": p.min_visit_minutes,
                "visit_price": p.visit_price,
            }))
        }
        ToolCall::Calc { expr } => {
            let q = calc(expr).map_err(|e| e.to_string())?;
            Ok(json!({ "exact": render_exact(&q), "decimal": render2(&q) }))
        }
    }
}

/// An agent on the other end of a pair of byte streams.
pub struct LineAgent<R, W> {
    reader: R,
    writer: W,
    view: World,
    task: Task,
    pub max_tool_calls: usize,
}

impl<R: BufRead, W: Write> LineAgent<R, W> {
    pub fn new(reader: R, writer: W, world: &World, task: &Task) -> Self {
        LineAgent { reader, writer, view: stale_view(world), task: task.public_view(), max_tool_calls: 1000 }
    }

    fn send(&mut self, v: &impl Serialize) -> Result<(), AgentError> {
        let line = serde_json::to_string(v).map_err(|e| AgentError::Protocol(e.to_string()))?;
        writeln!(self.writer, "{line}")?;
        self.writer.flush()?;
        Ok(())
    }

    fn receive(&mut self) -> Result<Value, AgentError> {
        let mut line = String::new();
        loop {
            line.clear();
            if self.reader.read_line(&mut line)? == 0 {
                return Err(AgentError::Protocol("agent closed its output".into()));
            }
            if !line.trim().is_empty() {
                break;
            }
        }
        let v: Value = serde_json::from_str(line.trim()).map_err(|e| AgentError::Protocol(format!("bad JSON: {e}")))?;
        match v.get("version").and_then(Value::as_u64) {
            Some(n) if n == u64::from(PROTOCOL_VERSION) => Ok(v),
            Some(n) => Err(AgentError::Protocol(format!("unsupported version {n}"))),
            None => Err(AgentError::Protocol("message has no version".into())),
        }
    }
}

impl<R: BufRead, W: Write> Agent for LineAgent<R, W> {
    fn execute(&mut self, ctx: &SubtaskContext) -> Result<AgentReply, AgentError> {
        let cal = self.task.calendar;
        self.send(&ContextMessage::new(ctx, &self.task))?;
        for _ in 0..=self.max_tool_calls {
            let mut v = self.receive()?;
            let obj = v.as_object_mut().ok_or_else(|| AgentError::Protocol("message is not an object".into()))?;
            obj.remove("version");
            if obj.contains_key("op") {
                let call: ToolCall =
                    serde_json::from_value(v).map_err(|e| AgentError::Protocol(format!("bad tool call: {e}")))?;
                let answer = match answer_tool(&self.view, &cal, &call) {
                    Ok(result) => json!({ "version": PROTOCOL_VERSION, "ok": true, "result": result }),
                    Err(error) => json!({ "version": PROTOCOL_VERSION, "ok": false, "error": error }),
                };
                self.send(&answer)?;
                continue;
            }
            let Some(text) = obj.get("itinerary").and_then(Value::as_str) else {
                return Err(AgentError::Protocol("expected a tool call or an itinerary".into()));
            };
            let itinerary = parse_itinerary(text, &cal).map_err(|e| AgentError::Protocol(e.to_string()))?;
            let summary = obj.get("summary").and_then(Value::as_str).map(str::to_string);
            return Ok(AgentReply { itinerary, summary });
        }
        Err(AgentError::Protocol(format!("more than {} tool calls", self.max_tool_calls)))
    }
}

/// An external agent running as a child process.
#[cfg(not(target_arch = "wasm32"))]
pub struct ProcessAgent {
    child: std::process::Child,
    inner: LineAgent<std::io::BufReader<std::process::ChildStdout>, std::process::ChildStdin>,
}

#[cfg(not(target_arch = "wasm32"))]
pub fn spawn_agent(program: &str, args: &[String], world: &World, task: &Task) -> std::io::Result<ProcessAgent> {
    use std::process::{Command, Stdio};
    let mut child = Command::new(program).args(args).stdin(Stdio::piped()).stdout(Stdio::piped()).spawn()?;
    let stdin = child.stdin.take().expect("piped");
    let stdout = std::io::BufReader::new(child.stdout.take().expect("piped"));
    Ok(ProcessAgent { child, inner: LineAgent::new(stdout, stdin, world, task) })
}

#[cfg(not(target_arch = "wasm32"))]
impl Agent for ProcessAgent {
    fn execute(&mut self, ctx: &SubtaskContext) -> Result<AgentReply, AgentError> {
        self.inner.execute(ctx)
    }
}

#[cfg(not(target_arch = "wasm32"))]
impl Drop for ProcessAgent {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
