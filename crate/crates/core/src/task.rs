//! Tasks: start conditions, targets, constraints and the hidden witness.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::itinerary::{itinerary_from_json, itinerary_to_json, ActionJson, Itinerary, ParseError};
use crate::time::{Calendar, TimeError, TimePoint, Window};
use crate::world::{Money, TransportMode, World};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TaskType {
    /// Inter-city: `go_to_city` and `stay_in`.
    InterCity,
    /// Intra-city: `go_to_place` and `visit`.
    IntraCity,
    /// Both combined.
    Combined,
}

impl TaskType {
    pub fn number(self) -> u8 {
        match self {
            TaskType::InterCity => 1,
            TaskType::IntraCity => 2,
            TaskType::Combined => 3,
        }
    }

    pub fn from_number(n: u8) -> Option<TaskType> {
        match n {
            1 => Some(TaskType::InterCity),
            2 => Some(TaskType::IntraCity),
            3 => Some(TaskType::Combined),
            _ => None,
        }
    }

    pub const ALL: [TaskType; 3] = [TaskType::InterCity, TaskType::IntraCity, TaskType::Combined];
}

impl Serialize for TaskType {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.number())
    }
}

impl<'de> Deserialize<'de> for TaskType {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let n = u8::deserialize(d)?;
        TaskType::from_number(n)
            .ok_or_else(|| serde::de::Error::custom(format!("task type must be 1, 2 or 3, got {n}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    CostCents,
    TotalMinutes,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Start {
    pub city: String,
    pub place: String,
    pub time: TimePoint,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CityTarget {
    pub city: String,
    pub min_stay_minutes: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttractionTarget {
    pub city: String,
    pub place: String,
    pub min_visit_minutes: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Targets {
    #[serde(default)]
    pub cities: Vec<CityTarget>,
    #[serde(default)]
    pub attractions: Vec<AttractionTarget>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Constraint {
    TimeLimit { deadline: TimePoint },
    Budget { max: Money },
    Transportation { mode: TransportMode },
    CityDuration { city: String, min_minutes: u32 },
    SpotDuration { city: String, place: String, min_minutes: u32 },
    SpecificHotel { city: String, hotel: String, check_times: Vec<TimePoint> },
    ActivityTime { windows: Vec<Window> },
    SpotOpeningHours { city: String, place: String },
    RestTime { windows: Vec<Window> },
}

impl Constraint {
    pub fn kind(&self) -> &'static str {
        match self {
            Constraint::TimeLimit { .. } => "time_limit",
            Constraint::Budget { .. } => "budget",
            Constraint::Transportation { .. } => "transportation",
            Constraint::CityDuration { .. } => "city_duration",
            Constraint::SpotDuration { .. } => "spot_duration",
            Constraint::SpecificHotel { .. } => "specific_hotel",
            Constraint::ActivityTime { .. } => "activity_time",
            Constraint::SpotOpeningHours { .. } => "spot_opening_hours",
            Constraint::RestTime { .. } => "rest_time",
        }
    }

    pub fn describe(&self, cal: &Calendar) -> String {
        let windows = |ws: &[Window]| {
            ws.iter()
                .map(|w| format!("{} to {}", cal.render(w.start), cal.render(w.end)))
                .collect::<Vec<_>>()
                .join(", ")
        };
        match self {
            Constraint::TimeLimit { deadline } => {
                format!("The whole trip must be finished by {}.", cal.render(*deadline))
            }
            Constraint::Budget { max } => format!("The total budget is {max} yuan."),
            Constraint::Transportation { mode } => {
                format!("All travel between cities must be by {mode}.")
            }
            Constraint::CityDuration { city, min_minutes } => {
                format!("Stay in {city} for at least {}.", hours(*min_minutes))
            }
            Constraint::SpotDuration { city, place, min_minutes } => {
                format!("Spend at least {} at {place} in {city}.", hours(*min_minutes))
            }
            Constraint::SpecificHotel { city, hotel, check_times } => format!(
                "Spend the night at {hotel} in {city} (be there at {}).",
                check_times.iter().map(|t| cal.render(*t)).collect::<Vec<_>>().join(", ")
            ),
            Constraint::ActivityTime { windows: ws } => {
                format!("Travel and sightseeing are only possible during {}.", windows(ws))
            }
            Constraint::SpotOpeningHours { city, place } => {
                format!("{place} in {city} can only be visited during its opening hours.")
            }
            Constraint::RestTime { windows: ws } => {
                format!("The traveler must rest during {}.", windows(ws))
            }
        }
    }
}

fn hours(minutes: u32) -> String {
    let unit = |n: u32, one: &str| if n == 1 { format!("1 {one}") } else { format!("{n} {one}s") };
    match (minutes / 60, minutes % 60) {
        (0, m) => unit(m, "minute"),
        (h, 0) => unit(h, "hour"),
        (h, m) => format!("{} {}", unit(h, "hour"), unit(m, "minute")),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Task {
    pub id: String,
    pub task_type: TaskType,
    pub calendar: Calendar,
    pub start: Start,
    /// Last usable instant, in minutes since the start date.
    pub horizon: TimePoint,
    pub objective: Objective,
    pub targets: Targets,
    pub constraints: Vec<Constraint>,
    pub prose: String,
    pub witness: Option<Itinerary>,
}

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("cannot read task file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed task JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("bad time literal: {0}")]
    Time(#[from] TimeError),
    #[error("bad witness: {0}")]
    Witness(#[from] ParseError),
    #[error("task does not fit its world: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

impl Task {
    pub fn budget(&self) -> Option<Money> {
        self.constraints.iter().find_map(|c| match c {
            Constraint::Budget { max } => Some(*max),
            _ => None,
        })
    }

    pub fn deadline(&self) -> TimePoint {
        self.constraints
            .iter()
            .filter_map(|c| match c {
                Constraint::TimeLimit { deadline } => Some(*deadline),
                _ => None,
            })
            .min()
            .unwrap_or(self.horizon)
            .min(self.horizon)
    }

    /// Cities the itinerary must reach, in target order, without the start city.
    pub fn target_cities(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        let names = self.targets.cities.iter().map(|c| c.city.as_str());
        for c in names.chain(self.targets.attractions.iter().map(|a| a.city.as_str())) {
            if !out.contains(&c) && c != self.start.city {
                out.push(c);
            }
        }
        out
    }

    /// Checks the task against `world`: names resolve, windows sit inside the
    /// horizon, and targets follow the task type.
    pub fn validate(&self, world: &World) -> Result<(), TaskError> {
        let mut errs = Vec::new();
        if world.calendar() != self.calendar {
            errs.push(format!(
                "start date {} differs from world start date {}",
                self.calendar,
                world.calendar()
            ));
        }
        match world.city(&self.start.city) {
            None => errs.push(format!("unknown start city `{}`", self.start.city)),
            Some(c) if c.place(&self.start.place).is_none() => {
                errs.push(format!("unknown start place `{}`", self.start.place))
            }
            _ => {}
        }
        if self.start.time > self.horizon {
            errs.push("start time after horizon".into());
        }
        let tc = &self.targets.cities;
        let ta = &self.targets.attractions;
        for c in tc {
            if world.city(&c.city).is_none() {
                errs.push(format!("unknown target city `{}`", c.city));
            }
        }
        for a in ta {
            if world.query_attraction(&a.city, &a.place).is_err() {
                errs.push(format!("unknown target attraction `{}` in `{}`", a.place, a.city));
            }
        }
        match self.task_type {
            TaskType::InterCity => {
                if tc.is_empty() || !ta.is_empty() {
                    errs.push("type 1 targets must be cities only".into());
                }
            }
            TaskType::IntraCity => {
                if !tc.is_empty() || ta.is_empty() || ta.iter().any(|a| a.city != self.start.city)
                {
                    errs.push("type 2 targets must be attractions in the start city".into());
                }
            }
            TaskType::Combined => {
                if ta.is_empty() || self.target_cities().is_empty() {
                    errs.push("type 3 needs attractions and at least one other city".into());
                }
            }
        }
        for c in &self.constraints {
            let in_horizon = |w: &Window| w.end <= self.horizon && !w.is_empty();
            match c {
                Constraint::Budget { max } if max.0 == 0 => errs.push("budget must be positive".into()),
                Constraint::TimeLimit { deadline } if *deadline > self.horizon => {
                    errs.push("time limit beyond horizon".into())
                }
                Constraint::ActivityTime { windows } | Constraint::RestTime { windows }
                    if !windows.iter().all(in_horizon) =>
                {
                    errs.push(format!("{} window outside horizon", c.kind()))
                }
                Constraint::CityDuration { city, .. } if world.city(city).is_none() => {
                    errs.push(format!("unknown city `{city}` in constraint"))
                }
                Constraint::SpotDuration { city, place, .. }
                | Constraint::SpotOpeningHours { city, place }
                    if world.query_attraction(city, place).is_err() =>
                {
                    errs.push(format!("unknown attraction `{place}` in constraint"))
                }
                Constraint::SpecificHotel { city, hotel, .. } if world.place(city, hotel).is_none() => {
                    errs.push(format!("unknown hotel `{hotel}` in constraint"))
                }
                _ => {}
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(TaskError::Invalid(errs))
        }
    }

    /// Figure-style description: a profile, the instruction and the
    /// constraint list.
    pub fn render_prose(&self) -> String {
        let cal = &self.calendar;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "Profile: You are a travel assistant. The traveler is at {} in {} at {}.",
            self.start.place,
            self.start.city,
            cal.render(self.start.time)
        );
        let instruction = match self.task_type {
            TaskType::InterCity => {
                let cities: Vec<String> = self
                    .targets
                    .cities
                    .iter()
                    .map(|c| format!("{} ({})", c.city, hours(c.min_stay_minutes)))
                    .collect();
                format!("Plan a trip that stays in {}.", cities.join(", "))
            }
            TaskType::IntraCity | TaskType::Combined => {
                let spots: Vec<String> = self
                    .targets
                    .attractions
                    .iter()
                    .map(|a| format!("{} in {} ({})", a.place, a.city, hours(a.min_visit_minutes)))
                    .collect();
                format!("Plan a trip that visits {}.", spots.join(", "))
            }
        };
        let _ = writeln!(s, "Instruction: {instruction}");
        let goal = match self.objective {
            Objective::CostCents => "Keep the total cost as low as possible.",
            Objective::TotalMinutes => "Finish as early as possible.",
        };
        let _ = writeln!(s, "{goal}");
        let _ = writeln!(s, "Constraints:");
        for c in &self.constraints {
            let _ = writeln!(s, "- {}", c.describe(cal));
        }
        s
    }

    pub fn to_file(&self) -> TaskFile {
        let cal = &self.calendar;
        TaskFile {
            id: self.id.clone(),
            task_type: self.task_type,
            start_date: cal.render_date(),
            start: StartFile {
                city: self.start.city.clone(),
                place: self.start.place.clone(),
                time: cal.render(self.start.time),
            },
            horizon: cal.render(self.horizon),
            objective: self.objective,
            targets: self.targets.clone(),
            constraints: self.constraints.iter().map(|c| ConstraintFile::from_constraint(c, cal)).collect(),
            prose: self.prose.clone(),
            witness: self.witness.as_ref().map(|w| itinerary_to_json(w, cal)),
        }
    }

    pub fn from_file(f: TaskFile) -> Result<Task, TaskError> {
        let cal = Calendar::parse_date(&f.start_date)?;
        let constraints =
            f.constraints.iter().map(|c| c.to_constraint(&cal)).collect::<Result<Vec<_>, _>>()?;
        let witness = match &f.witness {
            Some(items) => Some(itinerary_from_json(items, &cal)?),
            None => None,
        };
        Ok(Task {
            id: f.id,
            task_type: f.task_type,
            calendar: cal,
            start: Start { city: f.start.city, place: f.start.place, time: cal.parse(&f.start.time)? },
            horizon: cal.parse(&f.horizon)?,
            objective: f.objective,
            targets: f.targets,
            constraints,
            prose: f.prose,
            witness,
        })
    }

    pub fn from_json_str(s: &str) -> Result<Task, TaskError> {
        Task::from_file(serde_json::from_str(s)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("task serializes")
    }

    /// Copy without the witness, as shown to agents.
    pub fn public_view(&self) -> Task {
        Task { witness: None, ..self.clone() }
    }
}

pub fn load_task(path: impl AsRef<Path>) -> Result<Task, TaskError> {
    Task::from_json_str(&std::fs::read_to_string(path)?)
}

// ---- file form ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskFile {
    pub id: String,
    #[serde(rename = "type")]
    pub task_type: TaskType,
    pub start_date: String,
    pub start: StartFile,
    pub horizon: String,
    pub objective: Objective,
    pub targets: Targets,
    pub constraints: Vec<ConstraintFile>,
    #[serde(default)]
    pub prose: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<ActionJson>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartFile {
    pub city: String,
    pub place: String,
    pub time: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstraintFile {
    TimeLimit { deadline: String },
    Budget { max_cents: Money },
    Transportation { mode: TransportMode },
    CityDuration { city: String, min_minutes: u32 },
    SpotDuration { city: String, place: String, min_minutes: u32 },
    SpecificHotel { city: String, hotel: String, check_times: Vec<String> },
    ActivityTime { windows: Vec<[String; 2]> },
    SpotOpeningHours { city: String, place: String },
    RestTime { windows: Vec<[String; 2]> },
}

impl ConstraintFile {
    pub fn from_constraint(c: &Constraint, cal: &Calendar) -> ConstraintFile {
        let ws = |w: &[Window]| w.iter().map(|w| [cal.render(w.start), cal.render(w.end)]).collect();
        match c {
            Constraint::TimeLimit { deadline } => ConstraintFile::TimeLimit { deadline: cal.render(*deadline) },
            Constraint::Budget { max } => ConstraintFile::Budget { max_cents: *max },
            Constraint::Transportation { mode } => ConstraintFile::Transportation { mode: *mode },
            Constraint::CityDuration { city, min_minutes } => {
                ConstraintFile::CityDuration { city: city.clone(), min_minutes: *min_minutes }
            }
            Constraint::SpotDuration { city, place, min_minutes } => ConstraintFile::SpotDuration {
                city: city.clone(),
                place: place.clone(),
                min_minutes: *min_minutes,
            },
            Constraint::SpecificHotel { city, hotel, check_times } => ConstraintFile::SpecificHotel {
                city: city.clone(),
                hotel: hotel.clone(),
                check_times: check_times.iter().map(|t| cal.render(*t)).collect(),
            },
            Constraint::ActivityTime { windows } => ConstraintFile::ActivityTime { windows: ws(windows) },
            Constraint::SpotOpeningHours { city, place } => {
                ConstraintFile::SpotOpeningHours { city: city.clone(), place: place.clone() }
            }
            Constraint::RestTime { windows } => ConstraintFile::RestTime { windows: ws(windows) },
        }
    }

    pub fn to_constraint(&self, cal: &Calendar) -> Result<Constraint, TimeError> {
        let ws = |w: &[[String; 2]]| -> Result<Vec<Window>, TimeError> {
            w.iter().map(|[a, b]| Ok(Window::new(cal.parse(a)?, cal.parse(b)?))).collect()
        };
        Ok(match self {
            ConstraintFile::TimeLimit { deadline } => Constraint::TimeLimit { deadline: cal.parse(deadline)? },
            ConstraintFile::Budget { max_cents } => Constraint::Budget { max: *max_cents },
            ConstraintFile::Transportation { mode } => Constraint::Transportation { mode: *mode },
            ConstraintFile::CityDuration { city, min_minutes } => {
                Constraint::CityDuration { city: city.clone(), min_minutes: *min_minutes }
            }
            ConstraintFile::SpotDuration { city, place, min_minutes } => Constraint::SpotDuration {
                city: city.clone(),
                place: place.clone(),
                min_minutes: *min_minutes,
            },
            ConstraintFile::SpecificHotel { city, hotel, check_times } => Constraint::SpecificHotel {
                city: city.clone(),
                hotel: hotel.clone(),
                check_times: check_times.iter().map(|t| cal.parse(t)).collect::<Result<_, _>>()?,
            },
            ConstraintFile::ActivityTime { windows } => Constraint::ActivityTime { windows: ws(windows)? },
            ConstraintFile::SpotOpeningHours { city, place } => {
                Constraint::SpotOpeningHours { city: city.clone(), place: place.clone() }
            }
            ConstraintFile::RestTime { windows } => Constraint::RestTime { windows: ws(windows)? },
        })
    }
}
