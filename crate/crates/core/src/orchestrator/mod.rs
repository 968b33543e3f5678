//! The decomposition loop: split a task into subtasks, hand each to an
//! agent, execute its answer against the live world, keep a skill memory,
//! and (in dynamic mode) rewrite or retry downstream subtasks from what
//! actually happened.
//!
//! Agents plan against a stale view of the world in which every ticket still
//! looks available. Sell-outs only show up when a plan is executed, which is
//! what makes upstream failures cascade when the subtask list is frozen.

mod agents;
pub mod calc;
mod protocol;
mod skills;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::itinerary::{render_itinerary, Action, Itinerary};
use crate::simulator::{execute_from, simulate, simulate_with, SimState, SimStateFile};
use crate::solver::{EndRequirement, PlanProblem, StayPolicy};
use crate::task::{AttractionTarget, CityTarget, Constraint, Task, TaskType};
use crate::time::{Calendar, TimePoint};
use crate::world::{Money, World};

pub use agents::{Agent, AgentError, AgentReply, Impaired, SolverAgent};
pub use protocol::{ContextMessage, LineAgent, ToolCall, PROTOCOL_VERSION, TOOL_DOC};
#[cfg(not(target_arch = "wasm32"))]
pub use protocol::spawn_agent;
pub use skills::{tf_cosine, Admission, Similarity, Skill, SkillError, SkillLibrary, K_DUP, K_RETRIEVE, THETA};

/// Replans allowed for a failed subtask in dynamic mode.
pub const RETRY_CAP: u32 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "city", rename_all = "snake_case")]
pub enum SubtaskKind {
    InterCitySkeleton,
    IntraCity(String),
    Assemble,
    /// The whole task in one step; only used by the direct baseline.
    Whole,
}

impl fmt::Display for SubtaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubtaskKind::InterCitySkeleton => f.write_str("inter_city_skeleton"),
            SubtaskKind::IntraCity(c) => write!(f, "intra_city:{c}"),
            SubtaskKind::Assemble => f.write_str("assemble"),
            SubtaskKind::Whole => f.write_str("whole"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubtaskStatus {
    Pending,
    Running,
    Done,
    Failed,
}

/// Where a subtask's input frontier came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrontierSource {
    Start,
    Planned,
    Realized,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubtaskResult {
    pub partial: Itinerary,
    pub frontier: SimState,
    pub success: bool,
    pub note: String,
    /// Ticket whose unavailability caused the failure.
    pub blocked: Option<String>,
    /// Summary text supplied by the agent, if any.
    pub summary: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subtask {
    pub id: usize,
    pub kind: SubtaskKind,
    pub frontier: SimState,
    pub source: FrontierSource,
    pub end: Option<EndRequirement>,
    /// Spend allowed from the frontier on, when the task has a budget.
    pub allowance: Option<Money>,
    pub excluded: BTreeSet<String>,
    pub status: SubtaskStatus,
    pub attempts: u32,
    pub result: Option<SubtaskResult>,
}

impl Subtask {
    fn new(id: usize, kind: SubtaskKind, task: &Task) -> Subtask {
        Subtask {
            id,
            kind,
            frontier: SimState::at_start(task),
            source: FrontierSource::Start,
            end: None,
            allowance: None,
            excluded: BTreeSet::new(),
            status: SubtaskStatus::Pending,
            attempts: 0,
            result: None,
        }
    }
}

/// Rule-based split by task type: Type 1 is a skeleton then assembly; Type 2
/// a single city then assembly; Type 3 a skeleton, one subtask per city with
/// work to do (the start city only when it has targets or a hotel check),
/// then assembly.
pub fn decompose(task: &Task) -> Vec<Subtask> {
    let mut kinds = Vec::new();
    match task.task_type {
        TaskType::InterCity => kinds.push(SubtaskKind::InterCitySkeleton),
        TaskType::IntraCity => kinds.push(SubtaskKind::IntraCity(task.start.city.clone())),
        TaskType::Combined => {
            kinds.push(SubtaskKind::InterCitySkeleton);
            let start = &task.start.city;
            let start_work = task.targets.attractions.iter().any(|a| &a.city == start)
                || task.constraints.iter().any(|c| matches!(c, Constraint::SpecificHotel { city, .. } if city == start));
            if start_work {
                kinds.push(SubtaskKind::IntraCity(start.clone()));
            }
            kinds.extend(task.target_cities().into_iter().map(|c| SubtaskKind::IntraCity(c.to_string())));
        }
    }
    kinds.push(SubtaskKind::Assemble);
    kinds.into_iter().enumerate().map(|(i, k)| Subtask::new(i, k, task)).collect()
}

/// Copy of `world` in which every ticket looks available.
pub fn stale_view(world: &World) -> World {
    world
        .with_trips(|trips| trips.iter_mut().for_each(|t| t.capacity_available = true))
        .expect("availability does not affect validity")
}

// ---- context handed to agents ----

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub subtask: String,
    pub success: bool,
    pub itinerary: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubtaskContext {
    pub subtask_id: usize,
    pub kind: SubtaskKind,
    pub attempt: u32,
    pub frontier: SimState,
    pub cities: Vec<CityTarget>,
    pub attractions: Vec<AttractionTarget>,
    pub constraints: Vec<Constraint>,
    pub excluded: BTreeSet<String>,
    pub stays: StayPolicy,
    pub end: Option<EndRequirement>,
    pub skills: Vec<Skill>,
    pub tool_doc: String,
    pub history: Vec<HistoryEntry>,
}

impl SubtaskContext {
    pub fn problem<'a>(&self, world: &'a World, task: &'a Task) -> PlanProblem<'a> {
        PlanProblem {
            world,
            task,
            frontier: self.frontier.clone(),
            cities: self.cities.clone(),
            attractions: self.attractions.clone(),
            constraints: self.constraints.clone(),
            excluded: self.excluded.clone(),
            stays: self.stays,
            end: self.end.clone(),
        }
    }

    /// One-paragraph description of the inputs, used as the skill detail
    /// and as the retrieval query.
    pub fn describe(&self, cal: &Calendar) -> String {
        let f = &self.frontier;
        let mut s = format!(
            "{} from {} in {} at {} having spent {}",
            self.kind,
            f.current_place,
            f.current_city,
            cal.render(f.clock),
            f.spent
        );
        for c in &self.cities {
            s += &format!("; stay {} minutes in {}", c.min_stay_minutes, c.city);
        }
        for a in &self.attractions {
            s += &format!("; visit {} in {} for {} minutes", a.place, a.city, a.min_visit_minutes);
        }
        for c in &self.constraints {
            s += "; ";
            s += &c.describe(cal);
        }
        if let Some(e) = &self.end {
            s += &format!("; end at {}", e.place);
            if let Some(by) = e.by {
                s += &format!(" by {}", cal.render(by));
            }
        }
        if !self.excluded.is_empty() {
            s += &format!("; avoid {}", self.excluded.iter().cloned().collect::<Vec<_>>().join(", "));
        }
        s
    }
}

/// Template summary of a successful subtask.
pub fn summarize_process(result: &SubtaskResult, ctx: &SubtaskContext, cal: &Calendar) -> Result<Skill, SummarizeError> {
    if !result.success {
        return Err(SummarizeError::Failed(ctx.kind.to_string()));
    }
    let text = render_itinerary(&result.partial, cal);
    let solution = match &result.summary {
        Some(s) if !s.trim().is_empty() => s.clone(),
        _ if text.trim().is_empty() => "no actions needed".to_string(),
        _ => text,
    };
    Ok(Skill { name: ctx.kind.to_string(), detail: ctx.describe(cal), solution })
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SummarizeError {
    #[error("subtask {0} did not succeed")]
    Failed(String),
}

// ---- run log ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Dynamic,
    Static,
    Direct,
}

impl RunMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RunMode::Dynamic => "dynamic",
            RunMode::Static => "static",
            RunMode::Direct => "direct",
        }
    }
}

impl std::str::FromStr for RunMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "dynamic" => Ok(RunMode::Dynamic),
            "static" => Ok(RunMode::Static),
            "direct" => Ok(RunMode::Direct),
            _ => Err(format!("unknown mode `{s}` (expected dynamic, static or direct)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEvent {
    Decompose { subtasks: Vec<String> },
    Generate { subtask: usize, attempt: u32, skills: Vec<String> },
    Execute { subtask: usize, attempt: u32, success: bool, note: String },
    Summarize { subtask: usize, skill: String, admission: Admission },
    UpdateTasks { subtask: usize, update: String },
    Submit { actions: usize, executable: bool },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubtaskRecord {
    pub id: usize,
    pub kind: SubtaskKind,
    pub status: SubtaskStatus,
    pub attempts: u32,
    pub frontier: SimStateFile,
    pub source: FrontierSource,
    /// An earlier subtask had already failed when this one was dispatched.
    pub upstream_failed: bool,
    pub excluded: Vec<String>,
    pub itinerary: String,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunLog {
    pub task_id: String,
    pub mode: RunMode,
    pub events: Vec<LogEvent>,
    pub subtasks: Vec<SubtaskRecord>,
}

impl RunLog {
    /// A failed subtask was followed by a downstream subtask that had to
    /// start from the frontier the failure left unreachable.
    pub fn cascading_failure(&self) -> bool {
        self.subtasks.iter().any(|s| s.upstream_failed && s.kind != SubtaskKind::Assemble)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("run log serializes") + "\n"
    }

    pub fn from_json_str(s: &str) -> Result<RunLog, serde_json::Error> {
        serde_json::from_str(s)
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("agent failed on subtask {subtask}: {source}")]
    Agent { subtask: String, source: AgentError },
}

pub struct RunOutput {
    pub itinerary: Itinerary,
    pub log: RunLog,
    pub library: SkillLibrary,
}

/// Rewrites the tool description given to agents before a run.
pub type ToolDocHook = fn(&str) -> String;

pub fn identity_tool_doc(doc: &str) -> String {
    doc.to_string()
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub static_mode: bool,
    pub tool_doc_hook: ToolDocHook,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { static_mode: false, tool_doc_hook: identity_tool_doc }
    }
}

// ---- the loop ----

/// Planned route from the skeleton subtask.
#[derive(Debug, Clone)]
struct Skeleton {
    /// Cities in visiting order, starting with the start city.
    cities: Vec<String>,
    /// `legs[j]` leaves `cities[j]`.
    legs: Vec<Action>,
    /// Planned state on arrival in each city.
    arrivals: Vec<SimState>,
    /// Planned non-trip spend in each city.
    local_cost: Vec<Money>,
    total: Money,
}

impl Skeleton {
    fn from_plan(view: &World, task: &Task, plan: &Itinerary) -> Skeleton {
        let mut cities = vec![task.start.city.clone()];
        let mut legs = Vec::new();
        let mut arrivals = vec![SimState::at_start(task)];
        let mut local_cost = vec![Money::ZERO];
        let mut prev = Money::ZERO;
        for k in 0..plan.len() {
            let prefix = Itinerary::new(plan.actions[..=k].to_vec());
            let st = execute_from(view, task, SimState::at_start(task), &prefix).final_state;
            let delta = Money(st.spent.0.saturating_sub(prev.0));
            prev = st.spent;
            match &plan.actions[k] {
                a @ Action::GoToCity { destination, .. } => {
                    legs.push(a.clone());
                    cities.push(destination.clone());
                    arrivals.push(st);
                    local_cost.push(Money::ZERO);
                }
                _ => {
                    let j = local_cost.len() - 1;
                    local_cost[j] += delta;
                }
            }
        }
        Skeleton { cities, legs, arrivals, local_cost, total: prev }
    }
}

struct Run<'a> {
    world: &'a World,
    view: World,
    task: &'a Task,
    cal: Calendar,
    opts: RunOptions,
    tool_doc: String,
    subtasks: Vec<Subtask>,
    skeleton: Option<Skeleton>,
    /// Route from the latest skeleton answer, bound on the next update.
    pending: Option<Skeleton>,
    contexts: Vec<Option<SubtaskContext>>,
    upstream_failed: Vec<bool>,
    log: RunLog,
    lib: SkillLibrary,
}

enum Next {
    Retry,
    Advance,
}

/// Runs the decomposition loop with one agent for every subtask.
pub fn run_tdag(
    world: &World,
    task: &Task,
    agent: &mut dyn Agent,
    library: SkillLibrary,
    opts: RunOptions,
) -> Result<RunOutput, RunError> {
    let subtasks = decompose(task);
    let mode = if opts.static_mode { RunMode::Static } else { RunMode::Dynamic };
    let n = subtasks.len();
    let mut run = Run {
        world,
        view: stale_view(world),
        task,
        cal: task.calendar,
        tool_doc: (opts.tool_doc_hook)(TOOL_DOC),
        opts,
        subtasks,
        skeleton: None,
        pending: None,
        contexts: vec![None; n],
        upstream_failed: vec![false; n],
        log: RunLog { task_id: task.id.clone(), mode, events: Vec::new(), subtasks: Vec::new() },
        lib: library,
    };
    run.log.events.push(LogEvent::Decompose { subtasks: run.subtasks.iter().map(|s| s.kind.to_string()).collect() });
    let mut i = 0;
    while i < run.subtasks.len() {
        if run.subtasks[i].kind == SubtaskKind::Assemble {
            run.assemble(i);
            break;
        }
        run.upstream_failed[i] =
            run.subtasks[..i].iter().any(|s| s.status == SubtaskStatus::Failed && s.kind != SubtaskKind::Assemble);
        loop {
            let ctx = run.context(i);
            run.subtasks[i].status = SubtaskStatus::Running;
            run.subtasks[i].attempts += 1;
            let attempt = run.subtasks[i].attempts;
            run.log.events.push(LogEvent::Generate {
                subtask: i,
                attempt,
                skills: ctx.skills.iter().map(|s| s.name.clone()).collect(),
            });
            let reply = agent
                .execute(&ctx)
                .map_err(|source| RunError::Agent { subtask: run.subtasks[i].kind.to_string(), source })?;
            let result = run.execute(&ctx, reply);
            run.log.events.push(LogEvent::Execute {
                subtask: i,
                attempt,
                success: result.success,
                note: result.note.clone(),
            });
            if result.success {
                let skill = summarize_process(&result, &ctx, &run.cal).expect("successful result");
                let name = skill.name.clone();
                if let Ok(admission) = run.lib.add(skill) {
                    run.log.events.push(LogEvent::Summarize { subtask: i, skill: name, admission });
                }
            }
            run.contexts[i] = Some(ctx);
            match run.update_tasks(i, result) {
                Next::Retry => continue,
                Next::Advance => break,
            }
        }
        i += 1;
    }
    let itinerary = run
        .subtasks
        .last()
        .and_then(|s| s.result.as_ref())
        .map(|r| r.partial.clone())
        .unwrap_or_default();
    let mut log = run.log;
    log.subtasks = run
        .subtasks
        .iter()
        .enumerate()
        .map(|(k, s)| SubtaskRecord {
            id: s.id,
            kind: s.kind.clone(),
            status: s.status,
            attempts: s.attempts,
            frontier: s.frontier.to_file(&run.cal),
            source: s.source,
            upstream_failed: run.upstream_failed[k],
            excluded: s.excluded.iter().cloned().collect(),
            itinerary: s.result.as_ref().map(|r| render_itinerary(&r.partial, &run.cal)).unwrap_or_default(),
            note: s.result.as_ref().map(|r| r.note.clone()).unwrap_or_default(),
        })
        .collect();
    Ok(RunOutput { itinerary, log, library: run.lib })
}

/// Single-step baseline: one agent call on the whole task, no
/// decomposition, no retries.
pub fn run_direct(world: &World, task: &Task, agent: &mut dyn Agent, library: SkillLibrary) -> Result<RunOutput, RunError> {
    let cal = task.calendar;
    let ctx = SubtaskContext {
        subtask_id: 0,
        kind: SubtaskKind::Whole,
        attempt: 1,
        frontier: SimState::at_start(task),
        cities: task.targets.cities.clone(),
        attractions: task.targets.attractions.clone(),
        constraints: task.constraints.clone(),
        excluded: BTreeSet::new(),
        stays: StayPolicy::for_type(task.task_type),
        end: None,
        skills: library.retrieve(&format!("{}", SubtaskKind::Whole), library.k_retrieve).into_iter().cloned().collect(),
        tool_doc: TOOL_DOC.to_string(),
        history: Vec::new(),
    };
    let mut log = RunLog { task_id: task.id.clone(), mode: RunMode::Direct, events: Vec::new(), subtasks: Vec::new() };
    log.events.push(LogEvent::Generate { subtask: 0, attempt: 1, skills: ctx.skills.iter().map(|s| s.name.clone()).collect() });
    let reply = agent.execute(&ctx).map_err(|source| RunError::Agent { subtask: "whole".into(), source })?;
    let trace = simulate(world, task, &reply.itinerary);
    let ok = trace.l1_full();
    log.events.push(LogEvent::Execute { subtask: 0, attempt: 1, success: ok, note: first_note(&trace.events) });
    log.events.push(LogEvent::Submit { actions: reply.itinerary.len(), executable: ok });
    log.subtasks.push(SubtaskRecord {
        id: 0,
        kind: SubtaskKind::Whole,
        status: if ok { SubtaskStatus::Done } else { SubtaskStatus::Failed },
        attempts: 1,
        frontier: ctx.frontier.to_file(&cal),
        source: FrontierSource::Start,
        upstream_failed: false,
        excluded: Vec::new(),
        itinerary: render_itinerary(&reply.itinerary, &cal),
        note: String::new(),
    });
    Ok(RunOutput { itinerary: reply.itinerary, log, library })
}

fn first_note(events: &[crate::simulator::ErrorEvent]) -> String {
    events.first().map(|e| e.message.clone()).unwrap_or_default()
}

fn ticket_of(a: &Action) -> Option<&str> {
    match a {
        Action::GoToCity { ticket, .. } => Some(ticket),
        _ => None,
    }
}

impl Run<'_> {
    fn station(&self, city: &str) -> String {
        self.world.city(city).map(|c| c.start_place().name.clone()).unwrap_or_default()
    }

    /// Position of city `c` in the planned route.
    fn segment(&self, c: &str) -> Option<usize> {
        self.skeleton.as_ref()?.cities.iter().position(|x| x == c)
    }

    fn is_last_segment(&self, c: &str) -> bool {
        match (&self.skeleton, self.segment(c)) {
            (Some(s), Some(j)) => j + 1 == s.cities.len(),
            _ => true,
        }
    }

    fn context(&self, i: usize) -> SubtaskContext {
        let st = &self.subtasks[i];
        let task = self.task;
        let (cities, attractions, constraints, stays) = match &st.kind {
            SubtaskKind::InterCitySkeleton | SubtaskKind::Whole | SubtaskKind::Assemble => (
                task.targets.cities.clone(),
                task.targets.attractions.clone(),
                task.constraints.clone(),
                StayPolicy::for_type(task.task_type),
            ),
            SubtaskKind::IntraCity(c) if task.task_type == TaskType::IntraCity => (
                task.targets.cities.clone(),
                task.targets.attractions.clone(),
                task.constraints.clone(),
                StayPolicy::None,
            ),
            SubtaskKind::IntraCity(c) => {
                let last = self.is_last_segment(c);
                let from = st.frontier.clock;
                let to = st.end.as_ref().and_then(|e| e.by).unwrap_or(task.horizon);
                let mut cons = Vec::new();
                for k in &task.constraints {
                    match k {
                        Constraint::ActivityTime { .. } | Constraint::RestTime { .. } => cons.push(k.clone()),
                        Constraint::SpotDuration { city, .. } | Constraint::SpotOpeningHours { city, .. } if city == c => {
                            cons.push(k.clone())
                        }
                        Constraint::CityDuration { city, .. } if city == c && last => cons.push(k.clone()),
                        Constraint::TimeLimit { .. } if last => cons.push(k.clone()),
                        Constraint::SpecificHotel { city, hotel, check_times } => {
                            let inside: Vec<TimePoint> =
                                check_times.iter().copied().filter(|t| *t >= from && *t <= to).collect();
                            if !inside.is_empty() {
                                cons.push(Constraint::SpecificHotel {
                                    city: city.clone(),
                                    hotel: hotel.clone(),
                                    check_times: inside,
                                });
                            }
                        }
                        _ => {}
                    }
                }
                if let Some(a) = st.allowance {
                    cons.push(Constraint::Budget { max: st.frontier.spent + a });
                }
                let cities =
                    if last { task.targets.cities.iter().filter(|t| &t.city == c).cloned().collect() } else { Vec::new() };
                let attractions = task.targets.attractions.iter().filter(|a| &a.city == c).cloned().collect();
                (cities, attractions, cons, if last { StayPolicy::FinalOnly } else { StayPolicy::None })
            }
        };
        let mut ctx = SubtaskContext {
            subtask_id: st.id,
            kind: st.kind.clone(),
            attempt: st.attempts + 1,
            frontier: st.frontier.clone(),
            cities,
            attractions,
            constraints,
            excluded: st.excluded.clone(),
            stays,
            end: st.end.clone(),
            skills: Vec::new(),
            tool_doc: self.tool_doc.clone(),
            history: self.subtasks[..i]
                .iter()
                .filter_map(|s| {
                    s.result.as_ref().map(|r| HistoryEntry {
                        subtask: s.kind.to_string(),
                        success: r.success,
                        itinerary: render_itinerary(&r.partial, &self.cal),
                    })
                })
                .collect(),
        };
        let query = ctx.describe(&self.cal);
        ctx.skills = self.lib.retrieve(&query, self.lib.k_retrieve).into_iter().cloned().collect();
        ctx
    }

    fn execute(&mut self, ctx: &SubtaskContext, reply: AgentReply) -> SubtaskResult {
        let task = self.task;
        match &ctx.kind {
            SubtaskKind::InterCitySkeleton => {
                let plan = reply.itinerary;
                let sk = Skeleton::from_plan(&self.view, task, &plan);
                let partial = if task.task_type == TaskType::InterCity {
                    plan.clone()
                } else {
                    Itinerary::new(sk.legs.clone())
                };
                let missing: Vec<&str> =
                    task.target_cities().into_iter().filter(|c| !sk.cities.iter().any(|x| x == c)).collect();
                let mut blocked = None;
                let mut note = String::new();
                let mut frontier = ctx.frontier.clone();
                if task.task_type == TaskType::InterCity {
                    let trace = simulate_with(self.world, task, ctx.frontier.clone(), &partial, &ctx.constraints);
                    if let Some(k) = trace.first_failed_action() {
                        blocked = ticket_of(&partial.actions[k]).map(str::to_string);
                    }
                    if !trace.fully_valid() {
                        note = first_note(&trace.events);
                    }
                    frontier = trace.final_state;
                } else {
                    for leg in &sk.legs {
                        let Action::GoToCity { origin, depart, ticket, .. } = leg else { continue };
                        let at = SimState {
                            current_city: origin.clone(),
                            current_place: self.station(origin),
                            clock: *depart,
                            spent: Money::ZERO,
                            visited: BTreeSet::new(),
                        };
                        let t = execute_from(self.world, task, at, &Itinerary::new(vec![leg.clone()]));
                        if !t.l1_full() {
                            blocked = Some(ticket.clone());
                            note = format!("cannot book {ticket}: {}", first_note(&t.events));
                            break;
                        }
                    }
                }
                if !missing.is_empty() && note.is_empty() {
                    note = format!("plan never reaches {}", missing.join(", "));
                }
                let success = note.is_empty() && (!plan.is_empty() || task.target_cities().is_empty());
                if note.is_empty() && !success {
                    note = "agent returned no plan".into();
                }
                if !plan.is_empty() {
                    self.pending = Some(sk);
                }
                SubtaskResult { partial, frontier, success, note, blocked, summary: reply.summary }
            }
            SubtaskKind::IntraCity(_) | SubtaskKind::Whole => {
                let trace = simulate_with(self.world, task, ctx.frontier.clone(), &reply.itinerary, &ctx.constraints);
                let fin = trace.final_state.clone();
                let mut note = first_note(&trace.events);
                if note.is_empty() {
                    if let Some(e) = &ctx.end {
                        if fin.current_place != e.place || e.by.is_some_and(|b| fin.clock > b) {
                            note = format!("did not reach {} in time", e.place);
                        }
                    }
                }
                let blocked = trace.first_failed_action().and_then(|k| ticket_of(&reply.itinerary.actions[k])).map(str::to_string);
                SubtaskResult {
                    success: note.is_empty(),
                    partial: reply.itinerary,
                    frontier: fin,
                    note,
                    blocked,
                    summary: reply.summary,
                }
            }
            SubtaskKind::Assemble => unreachable!("assembly is done by the orchestrator"),
        }
    }

    /// Points the city subtasks at the planned route: frontier on arrival,
    /// station and departure as the end, and a share of the budget.
    fn bind_plan(&mut self, skeleton_idx: usize) {
        let Some(sk) = self.skeleton.clone() else { return };
        let slack = self.task.budget().map(|b| Money(b.0.saturating_sub(sk.total.0)));
        let intra: Vec<usize> = (skeleton_idx + 1..self.subtasks.len())
            .filter(|&k| matches!(self.subtasks[k].kind, SubtaskKind::IntraCity(_)))
            .collect();
        let share = slack.map(|s| Money(s.0 / intra.len().max(1) as u64));
        let mut kinds: Vec<(usize, SubtaskKind)> = intra
            .iter()
            .map(|&k| {
                let kind = self.subtasks[k].kind.clone();
                let SubtaskKind::IntraCity(c) = &kind else { unreachable!() };
                (self.segment(c).unwrap_or(usize::MAX), kind)
            })
            .collect();
        kinds.sort_by_key(|(j, _)| *j);
        for (&k, (j, kind)) in intra.iter().zip(kinds) {
            let s = &mut self.subtasks[k];
            s.kind = kind.clone();
            if j == usize::MAX {
                continue;
            }
            let SubtaskKind::IntraCity(c) = &kind else { unreachable!() };
            s.frontier = sk.arrivals[j].clone();
            s.source = if j == 0 { FrontierSource::Start } else { FrontierSource::Planned };
            s.end = sk.legs.get(j).map(|leg| EndRequirement {
                place: self.world.city(c).map(|x| x.start_place().name.clone()).unwrap_or_default(),
                by: Some(leg.start()),
            });
            s.allowance = share.map(|sh| sk.local_cost[j] + sh);
        }
        let order: Vec<String> = self.subtasks.iter().map(|s| s.kind.to_string()).collect();
        self.log.events.push(LogEvent::UpdateTasks { subtask: skeleton_idx, update: format!("bound route {}", order.join(" > ")) });
    }

    fn update_tasks(&mut self, i: usize, result: SubtaskResult) -> Next {
        let ok = result.success;
        let blocked = result.blocked.clone();
        let realized = result.frontier.clone();
        self.subtasks[i].result = Some(result);
        if let Some(sk) = self.pending.take() {
            self.skeleton = Some(sk);
            self.bind_plan(i);
        }
        if self.opts.static_mode {
            self.subtasks[i].status = if ok { SubtaskStatus::Done } else { SubtaskStatus::Failed };
            self.log.events.push(LogEvent::UpdateTasks { subtask: i, update: "static: no change".into() });
            return Next::Advance;
        }
        if !ok && self.subtasks[i].attempts <= RETRY_CAP {
            let st = &mut self.subtasks[i];
            let update = match blocked {
                Some(t) if st.excluded.insert(t.clone()) => format!("retry without {t}"),
                _ => "retry".to_string(),
            };
            st.status = SubtaskStatus::Pending;
            self.log.events.push(LogEvent::UpdateTasks { subtask: i, update });
            return Next::Retry;
        }
        self.subtasks[i].status = if ok { SubtaskStatus::Done } else { SubtaskStatus::Failed };
        let update = self.rewrite_downstream(i, &realized);
        self.log.events.push(LogEvent::UpdateTasks {
            subtask: i,
            update: if ok { update } else { format!("gave up; {update}") },
        });
        Next::Advance
    }

    /// Carries the realized spend and visits into the next subtask.
    fn rewrite_downstream(&mut self, i: usize, realized: &SimState) -> String {
        let Some(next) = self.subtasks.get(i + 1).map(|s| s.kind.clone()) else { return "no change".into() };
        let leg_price = |sk: &Skeleton, j: usize| {
            sk.legs
                .get(j)
                .and_then(ticket_of)
                .and_then(|t| self.view.trip(t))
                .map_or(Money::ZERO, |t| t.price)
        };
        let new = match (&self.subtasks[i].kind, &next) {
            (SubtaskKind::IntraCity(c), SubtaskKind::IntraCity(d)) => {
                let (Some(sk), Some(j), Some(jd)) = (&self.skeleton, self.segment(c), self.segment(d)) else {
                    return "no change".into();
                };
                let mut f = self.subtasks[i + 1].frontier.clone();
                let legs: Money = (j..jd).map(|x| leg_price(sk, x)).sum();
                f.spent = realized.spent + legs;
                f.visited = realized.visited.clone();
                f
            }
            (_, SubtaskKind::Assemble) => realized.clone(),
            _ => return "no change".into(),
        };
        let st = &mut self.subtasks[i + 1];
        if st.frontier == new {
            return "no change".into();
        }
        st.frontier = new;
        st.source = FrontierSource::Realized;
        format!("frontier of {} rewritten", st.kind)
    }

    fn assemble(&mut self, i: usize) {
        let task = self.task;
        let mut parts: Vec<Action> = Vec::new();
        let by_kind = |k: &SubtaskKind| {
            self.subtasks.iter().find(|s| &s.kind == k).and_then(|s| s.result.as_ref()).map(|r| r.partial.actions.clone())
        };
        match (&self.skeleton, task.task_type) {
            (Some(sk), TaskType::Combined) => {
                for (j, c) in sk.cities.iter().enumerate() {
                    parts.extend(by_kind(&SubtaskKind::IntraCity(c.clone())).unwrap_or_default());
                    if let Some(leg) = sk.legs.get(j) {
                        parts.push(leg.clone());
                    }
                }
            }
            _ => {
                for s in &self.subtasks[..i] {
                    if let Some(r) = &s.result {
                        parts.extend(r.partial.actions.iter().cloned());
                    }
                }
            }
        }
        let merged = Itinerary::new(parts);
        let trace = simulate(self.world, task, &merged);
        let ok = trace.l1_full();
        let st = &mut self.subtasks[i];
        st.attempts = 1;
        st.status = if ok { SubtaskStatus::Done } else { SubtaskStatus::Failed };
        st.result = Some(SubtaskResult {
            partial: merged.clone(),
            frontier: trace.final_state.clone(),
            success: ok,
            note: first_note(&trace.events),
            blocked: None,
            summary: None,
        });
        self.upstream_failed[i] =
            self.subtasks[..i].iter().any(|s| s.status == SubtaskStatus::Failed);
        self.log.events.push(LogEvent::Submit { actions: merged.len(), executable: ok });
    }
}
