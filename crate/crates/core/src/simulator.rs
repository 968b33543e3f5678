//! Executes an itinerary against a world and task.
//!
//! Every action yields four executability items (entity exists, schedule
//! matches, spatial continuity, chronological order); every constraint
//! instance yields one constraint item. Failures never abort the walk: the
//! simulated traveler snaps to the failed action's declared end state so the
//! rest of the plan is judged on its own terms.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::itinerary::{Action, Itinerary};
use crate::task::{Constraint, Task};
use crate::time::{Calendar, TimePoint};
use crate::world::{Money, World};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SimState {
    pub current_city: String,
    pub current_place: String,
    pub clock: TimePoint,
    pub spent: Money,
    pub visited: BTreeSet<(String, String)>,
}

impl SimState {
    pub fn at_start(task: &Task) -> SimState {
        SimState {
            current_city: task.start.city.clone(),
            current_place: task.start.place.clone(),
            clock: task.start.time,
            spent: Money::ZERO,
            visited: BTreeSet::new(),
        }
    }

    pub fn to_file(&self, cal: &Calendar) -> SimStateFile {
        SimStateFile {
            current_city: self.current_city.clone(),
            current_place: self.current_place.clone(),
            clock: cal.render(self.clock),
            spent: self.spent,
            visited: self.visited.iter().map(|(c, p)| [c.clone(), p.clone()]).collect(),
        }
    }

    pub fn from_file(f: &SimStateFile, cal: &Calendar) -> Result<SimState, crate::time::TimeError> {
        Ok(SimState {
            current_city: f.current_city.clone(),
            current_place: f.current_place.clone(),
            clock: cal.parse(&f.clock)?,
            spent: f.spent,
            visited: f.visited.iter().map(|[c, p]| (c.clone(), p.clone())).collect(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Level {
    L1,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemCode {
    EntityExists,
    ScheduleMatch,
    SpatialContinuity,
    ChronologicalOrder,
    TimeLimit,
    Budget,
    Transportation,
    CityDuration,
    SpotDuration,
    SpecificHotel,
    ActivityTime,
    SpotOpeningHours,
    RestTime,
}

impl ItemCode {
    pub fn of_constraint(c: &Constraint) -> ItemCode {
        match c {
            Constraint::TimeLimit { .. } => ItemCode::TimeLimit,
            Constraint::Budget { .. } => ItemCode::Budget,
            Constraint::Transportation { .. } => ItemCode::Transportation,
            Constraint::CityDuration { .. } => ItemCode::CityDuration,
            Constraint::SpotDuration { .. } => ItemCode::SpotDuration,
            Constraint::SpecificHotel { .. } => ItemCode::SpecificHotel,
            Constraint::ActivityTime { .. } => ItemCode::ActivityTime,
            Constraint::SpotOpeningHours { .. } => ItemCode::SpotOpeningHours,
            Constraint::RestTime { .. } => ItemCode::RestTime,
        }
    }

    pub fn taxonomy(self) -> Taxonomy {
        match self {
            ItemCode::EntityExists | ItemCode::ScheduleMatch => Taxonomy::Eim,
            ItemCode::SpatialContinuity | ItemCode::ChronologicalOrder => Taxonomy::Cke,
            _ => Taxonomy::Cnc,
        }
    }
}

/// Error taxonomy. Cascading failures are attributed from run logs, never by
/// the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Taxonomy {
    Ctf,
    Cke,
    Eim,
    Cnc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoringItem {
    pub level: Level,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub action: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub constraint: Option<usize>,
    pub code: ItemCode,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorEvent {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub action: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub constraint: Option<usize>,
    pub taxonomy: Taxonomy,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub items: Vec<ScoringItem>,
    pub events: Vec<ErrorEvent>,
    pub final_state: SimState,
    pub total_cost: Money,
    pub total_minutes: u32,
}

impl Trace {
    pub fn count(&self, level: Level) -> (usize, usize) {
        let items = self.items.iter().filter(|i| i.level == level);
        let total = items.clone().count();
        (items.filter(|i| i.passed).count(), total)
    }

    /// `(A1, B1)`.
    pub fn l1(&self) -> (usize, usize) {
        self.count(Level::L1)
    }

    /// `(A2, B2)`.
    pub fn l2(&self) -> (usize, usize) {
        self.count(Level::L2)
    }

    pub fn l1_full(&self) -> bool {
        let (a, b) = self.l1();
        a == b
    }

    pub fn fully_valid(&self) -> bool {
        self.items.iter().all(|i| i.passed)
    }

    /// Index of the first action with a failed executability item.
    pub fn first_failed_action(&self) -> Option<usize> {
        self.items.iter().filter(|i| i.level == Level::L1 && !i.passed).filter_map(|i| i.action).min()
    }

    pub fn to_file(&self, cal: &Calendar) -> TraceFile {
        let (a1, b1) = self.l1();
        let (a2, b2) = self.l2();
        TraceFile {
            items: self.items.clone(),
            events: self.events.clone(),
            final_state: self.final_state.to_file(cal),
            totals: Totals {
                a1,
                b1,
                a2,
                b2,
                total_cost: self.total_cost,
                total_minutes: self.total_minutes,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimStateFile {
    pub current_city: String,
    pub current_place: String,
    pub clock: String,
    pub spent: Money,
    pub visited: Vec<[String; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub a1: usize,
    pub b1: usize,
    pub a2: usize,
    pub b2: usize,
    pub total_cost: Money,
    pub total_minutes: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFile {
    pub items: Vec<ScoringItem>,
    pub events: Vec<ErrorEvent>,
    pub final_state: SimStateFile,
    pub totals: Totals,
}

/// Full simulation from the task's start state against all task constraints.
pub fn simulate(world: &World, task: &Task, it: &Itinerary) -> Trace {
    simulate_with(world, task, SimState::at_start(task), it, &task.constraints)
}

/// Executability-only walk from an arbitrary state.
pub fn execute_from(world: &World, task: &Task, start: SimState, it: &Itinerary) -> Trace {
    simulate_with(world, task, start, it, &[])
}

struct Step {
    /// City in effect while the action ran.
    city: String,
    after: SimState,
}

/// Walks `it` from `start`, then checks `constraints` against the walk.
pub fn simulate_with(
    world: &World,
    task: &Task,
    start: SimState,
    it: &Itinerary,
    constraints: &[Constraint],
) -> Trace {
    let cal = task.calendar;
    let mut items = Vec::with_capacity(it.len() * 4 + constraints.len());
    let mut events = Vec::new();
    let mut state = start.clone();
    let mut steps = Vec::with_capacity(it.len());
    // (city, from, to) presence intervals
    let mut presence: Vec<(String, TimePoint, TimePoint)> = Vec::new();
    let mut here_since = start.clock;

    for (i, action) in it.actions.iter().enumerate() {
        let mut check = |code: ItemCode, passed: bool, why: &dyn Fn() -> String| {
            items.push(ScoringItem { level: Level::L1, action: Some(i), constraint: None, code, passed });
            if !passed {
                events.push(ErrorEvent {
                    action: Some(i),
                    constraint: None,
                    taxonomy: code.taxonomy(),
                    message: format!("action {} `{}`: {}", i, action.render(&cal), why()),
                });
            }
        };
        let chrono_ok = action.start() >= state.clock;
        let cur_city = world.city(&state.current_city);
        let mut city_during = state.current_city.clone();
        match action {
            Action::GoToPlace { origin, destination, depart, arrive } => {
                let route = cur_city.and_then(|c| c.route(origin, destination));
                let exists = cur_city.is_some_and(|c| {
                    c.place(origin).is_some() && c.place(destination).is_some()
                }) && route.is_some();
                check(ItemCode::EntityExists, exists, &|| {
                    format!("no route {origin} -> {destination} in {}", state.current_city)
                });
                let sched = route.is_some_and(|r| *arrive - *depart == i64::from(r.duration_minutes));
                check(ItemCode::ScheduleMatch, sched, &|| match route {
                    Some(r) => format!("route takes {} minutes", r.duration_minutes),
                    None => "no route record to match".into(),
                });
                check(ItemCode::SpatialContinuity, *origin == state.current_place, &|| {
                    format!("traveler is at {}, not {origin}", state.current_place)
                });
                check(ItemCode::ChronologicalOrder, chrono_ok, &|| {
                    format!("starts before {}", cal.render(state.clock))
                });
                if let Some(r) = route {
                    state.spent += r.price;
                }
                state.current_place = destination.clone();
            }
            Action::Visit { place, begin, end } => {
                let rec = cur_city.and_then(|c| c.place(place)).filter(|p| p.is_attraction());
                check(ItemCode::EntityExists, rec.is_some(), &|| {
                    format!("{place} is not an attraction in {}", state.current_city)
                });
                let in_horizon = *begin >= task.start.time && *end <= task.horizon;
                check(ItemCode::ScheduleMatch, in_horizon, &|| "outside the task horizon".into());
                check(ItemCode::SpatialContinuity, *place == state.current_place, &|| {
                    format!("traveler is at {}, not {place}", state.current_place)
                });
                check(ItemCode::ChronologicalOrder, chrono_ok, &|| {
                    format!("starts before {}", cal.render(state.clock))
                });
                if let Some(p) = rec {
                    state.spent += p.visit_price;
                }
                state.visited.insert((state.current_city.clone(), place.clone()));
                state.current_place = place.clone();
            }
            Action::GoToCity { origin, destination, depart, arrive, ticket } => {
                let trip = world.trip(ticket);
                let exists = world.city(origin).is_some()
                    && world.city(destination).is_some()
                    && trip.is_some_and(|t| t.origin_city == *origin && t.dest_city == *destination);
                check(ItemCode::EntityExists, exists, &|| match trip {
                    None => format!("no ticket {ticket}"),
                    Some(t) => format!("{ticket} runs {} -> {}", t.origin_city, t.dest_city),
                });
                let sched = trip.is_some_and(|t| t.depart == *depart && t.arrive == *arrive);
                let available = trip.is_some_and(|t| t.capacity_available);
                check(ItemCode::ScheduleMatch, sched && available, &|| match trip {
                    None => "no schedule to match".into(),
                    Some(t) if !t.capacity_available => format!("{ticket} is sold out"),
                    Some(t) => format!(
                        "{ticket} departs {} and arrives {}",
                        cal.render(t.depart),
                        cal.render(t.arrive)
                    ),
                });
                let at_station = world
                    .city(origin)
                    .is_some_and(|c| c.start_place().name == state.current_place);
                let spatial = *origin == state.current_city && at_station;
                check(ItemCode::SpatialContinuity, spatial, &|| {
                    format!("traveler is at {} in {}", state.current_place, state.current_city)
                });
                check(ItemCode::ChronologicalOrder, chrono_ok, &|| {
                    format!("starts before {}", cal.render(state.clock))
                });
                if let Some(t) = trip.filter(|t| t.capacity_available) {
                    state.spent += t.price;
                }
                presence.push((state.current_city.clone(), here_since, (*depart).max(here_since)));
                here_since = *arrive;
                state.current_city = destination.clone();
                state.current_place =
                    world.city(destination).map(|c| c.start_place().name.clone()).unwrap_or_default();
            }
            Action::StayIn { city, begin, end } => {
                check(ItemCode::EntityExists, world.city(city).is_some(), &|| format!("no city {city}"));
                let in_horizon = *begin >= task.start.time && *end <= task.horizon;
                check(ItemCode::ScheduleMatch, in_horizon, &|| "outside the task horizon".into());
                check(ItemCode::SpatialContinuity, *city == state.current_city, &|| {
                    format!("traveler is in {}", state.current_city)
                });
                check(ItemCode::ChronologicalOrder, chrono_ok, &|| {
                    format!("starts before {}", cal.render(state.clock))
                });
                if *city != state.current_city {
                    presence.push((state.current_city.clone(), here_since, (*begin).max(here_since)));
                    here_since = *begin;
                    state.current_city = city.clone();
                    state.current_place =
                        world.city(city).map(|c| c.start_place().name.clone()).unwrap_or_default();
                }
                city_during = city.clone();
            }
        }
        state.clock = state.clock.max(action.end());
        steps.push(Step { city: city_during, after: state.clone() });
    }
    presence.push((state.current_city.clone(), here_since, state.clock.max(here_since)));

    for (j, c) in constraints.iter().enumerate() {
        let (passed, why) = check_constraint(world, &start, it, &steps, &presence, &state, c, &cal);
        items.push(ScoringItem {
            level: Level::L2,
            action: None,
            constraint: Some(j),
            code: ItemCode::of_constraint(c),
            passed,
        });
        if !passed {
            events.push(ErrorEvent {
                action: None,
                constraint: Some(j),
                taxonomy: Taxonomy::Cnc,
                message: format!("constraint {j} ({}): {why}", c.kind()),
            });
        }
    }

    Trace {
        items,
        events,
        total_cost: state.spent,
        total_minutes: state.clock.saturating_sub(start.clock),
        final_state: state,
    }
}

#[allow(clippy::too_many_arguments)]
fn check_constraint(
    world: &World,
    start: &SimState,
    it: &Itinerary,
    steps: &[Step],
    presence: &[(String, TimePoint, TimePoint)],
    fin: &SimState,
    c: &Constraint,
    cal: &Calendar,
) -> (bool, String) {
    let ok = |b: bool, msg: String| (b, if b { String::new() } else { msg });
    match c {
        Constraint::TimeLimit { deadline } => ok(
            fin.clock <= *deadline,
            format!("finishes {} after deadline {}", cal.render(fin.clock), cal.render(*deadline)),
        ),
        Constraint::Budget { max } => {
            ok(fin.spent <= *max, format!("spent {} of budget {}", fin.spent, max))
        }
        Constraint::Transportation { mode } => {
            let bad = it.actions.iter().find_map(|a| match a {
                Action::GoToCity { ticket, .. }
                    if crate::world::TransportMode::of_ticket(ticket) != *mode =>
                {
                    Some(ticket.clone())
                }
                _ => None,
            });
            ok(bad.is_none(), format!("ticket {} is not by {mode}", bad.unwrap_or_default()))
        }
        Constraint::CityDuration { city, min_minutes } => {
            let total: u32 =
                presence.iter().filter(|(c, _, _)| c == city).map(|(_, a, b)| b.saturating_sub(*a)).sum();
            ok(total >= *min_minutes, format!("stayed {total} of {min_minutes} minutes in {city}"))
        }
        Constraint::SpotDuration { city, place, min_minutes } => {
            let need = world
                .place(city, place)
                .map_or(*min_minutes, |p| p.min_visit_minutes.max(*min_minutes));
            let best = visits(it, steps, city, place).map(|(b, e)| e.saturating_sub(b)).max();
            match best {
                None => (false, format!("{place} in {city} never visited")),
                Some(d) => ok(d >= need, format!("longest visit {d} of {need} minutes")),
            }
        }
        Constraint::SpecificHotel { city, hotel, check_times } => {
            for h in check_times {
                let loc = location_at(start, it, steps, *h);
                if loc.as_ref().map(|(c, p)| (c.as_str(), p.as_str())) != Some((city, hotel)) {
                    let at = loc.map_or("in transit".to_string(), |(c, p)| format!("at {p} in {c}"));
                    return (false, format!("{} the traveler is {at}", cal.render(*h)));
                }
            }
            (true, String::new())
        }
        Constraint::ActivityTime { windows } => {
            let bad = it.actions.iter().position(|a| {
                matches!(a, Action::GoToPlace { .. } | Action::Visit { .. })
                    && !windows.iter().any(|w| w.contains_span(a.start(), a.end()))
            });
            ok(bad.is_none(), format!("action {} outside activity hours", bad.unwrap_or(0)))
        }
        Constraint::SpotOpeningHours { city, place } => {
            let rec = world.place(city, place);
            let bad = visits(it, steps, city, place)
                .find(|(b, e)| !rec.is_some_and(|p| p.is_open_for(*b, *e)));
            ok(
                bad.is_none(),
                format!("{place} visited at {} while closed", bad.map_or(String::new(), |(b, _)| cal.render(b))),
            )
        }
        Constraint::RestTime { windows } => {
            let bad = it.actions.iter().position(|a| {
                a.is_activity() && windows.iter().any(|w| w.overlaps_span(a.start(), a.end()))
            });
            ok(bad.is_none(), format!("action {} falls in a rest period", bad.unwrap_or(0)))
        }
    }
}

fn visits<'a>(
    it: &'a Itinerary,
    steps: &'a [Step],
    city: &'a str,
    place: &'a str,
) -> impl Iterator<Item = (TimePoint, TimePoint)> + 'a {
    it.actions.iter().zip(steps).filter_map(move |(a, s)| match a {
        Action::Visit { place: p, begin, end } if p == place && s.city == city => Some((*begin, *end)),
        _ => None,
    })
}

/// Where the traveler is at `h`: `None` while an activity is under way.
fn location_at(
    start: &SimState,
    it: &Itinerary,
    steps: &[Step],
    h: TimePoint,
) -> Option<(String, String)> {
    let mut loc = (start.current_city.clone(), start.current_place.clone());
    for (a, s) in it.actions.iter().zip(steps) {
        if a.is_activity() && a.start() < h && h < a.end() {
            return None;
        }
        if a.end() <= h {
            loc = (s.after.current_city.clone(), s.after.current_place.clone());
        }
    }
    Some(loc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::itinerary::parse_itinerary;
    use crate::task::{Objective, Start, TaskType, Targets};
    use crate::time::Window;
    use crate::world::TransportMode;
    use proptest::prelude::*;

    const WORLD: &str = r#"{
      "start_date": "07-01",
      "cities": [
        {"name": "Shanghai", "places": [
            {"name": "Shanghai Station", "kind": "station", "default_start": true},
            {"name": "Bund", "kind": "attraction", "opening_windows": [["07-01 08:00", "07-01 22:00"]], "min_visit_minutes": 60, "visit_price": 1000},
            {"name": "Peace Hotel", "kind": "hotel"}
          ],
          "intra_routes": [
            {"origin": "Shanghai Station", "destination": "Bund", "duration_minutes": 25, "price": 400},
            {"origin": "Bund", "destination": "Shanghai Station", "duration_minutes": 25, "price": 400},
            {"origin": "Bund", "destination": "Peace Hotel", "duration_minutes": 10, "price": 200}
          ]},
        {"name": "Beijing", "places": [
            {"name": "Beijing Station", "kind": "station", "default_start": true},
            {"name": "Palace Museum", "kind": "attraction", "opening_windows": [["07-01 08:30", "07-01 17:00"], ["07-02 08:30", "07-02 17:00"]], "min_visit_minutes": 120, "visit_price": 6000}
          ],
          "intra_routes": [
            {"origin": "Beijing Station", "destination": "Palace Museum", "duration_minutes": 40, "price": 500}
          ]}
      ],
      "inter_trips": [
        {"ticket_id": "G2305", "origin_city": "Shanghai", "dest_city": "Beijing", "depart": "07-01 14:40", "arrive": "07-01 20:30", "price": 55300},
        {"ticket_id": "G7", "origin_city": "Shanghai", "dest_city": "Beijing", "depart": "07-01 09:00", "arrive": "07-01 13:30", "price": 60000, "capacity_available": false},
        {"ticket_id": "MU5102", "origin_city": "Beijing", "dest_city": "Shanghai", "depart": "07-02 19:00", "arrive": "07-02 21:10", "price": 98000}
      ]
    }"#;

    fn world() -> World {
        World::from_json_str(WORLD).unwrap()
    }

    fn task(constraints: Vec<Constraint>) -> Task {
        let cal = Calendar::new(7, 1).unwrap();
        Task {
            id: "t".into(),
            task_type: TaskType::Combined,
            calendar: cal,
            start: Start {
                city: "Shanghai".into(),
                place: "Shanghai Station".into(),
                time: TimePoint::at(0, 8, 0),
            },
            horizon: TimePoint::at(3, 0, 0),
            objective: Objective::CostCents,
            targets: Targets::default(),
            constraints,
            prose: String::new(),
            witness: None,
        }
    }

    fn run(text: &str, constraints: Vec<Constraint>) -> Trace {
        let t = task(constraints);
        let it = parse_itinerary(text, &t.calendar).unwrap();
        simulate(&world(), &t, &it)
    }

    fn failed(trace: &Trace) -> Vec<ItemCode> {
        trace.items.iter().filter(|i| !i.passed).map(|i| i.code).collect()
    }

    const GOOD: &str = "
go_to_place(Shanghai Station, Bund, 07-01 09:00, 07-01 09:25)
visit(Bund, 07-01 09:30, 07-01 11:00)
go_to_place(Bund, Shanghai Station, 07-01 11:00, 07-01 11:25)
go_to_city(Shanghai, Beijing, 07-01 14:40, 07-01 20:30, G2305)
go_to_place(Beijing Station, Palace Museum, 07-02 08:00, 07-02 08:40)
visit(Palace Museum, 07-02 09:00, 07-02 11:30)
";

    #[test]
    fn empty_itinerary_has_no_items_and_no_cost() {
        let tr = run("", vec![]);
        assert_eq!(tr.l1(), (0, 0));
        assert_eq!(tr.total_cost, Money::ZERO);
        assert_eq!(tr.total_minutes, 0);
    }

    #[test]
    fn matching_train_passes_all_four_items() {
        let tr = run("go_to_city(Shanghai, Beijing, 07-01 14:40, 07-01 20:30, G2305)", vec![]);
        assert_eq!(tr.l1(), (4, 4));
        assert!(tr.events.is_empty());
        assert_eq!(tr.total_cost, Money(55300));
        assert_eq!(tr.final_state.current_city, "Beijing");
        assert_eq!(tr.final_state.current_place, "Beijing Station");
    }

    #[test]
    fn ten_minute_offset_is_a_schedule_mismatch() {
        let tr = run("go_to_city(Shanghai, Beijing, 07-01 14:50, 07-01 20:30, G2305)", vec![]);
        assert_eq!(failed(&tr), [ItemCode::ScheduleMatch]);
        assert_eq!(tr.events.len(), 1);
        assert_eq!(tr.events[0].taxonomy, Taxonomy::Eim);
    }

    #[test]
    fn origin_mismatch_is_a_commonsense_error() {
        let tr = run("go_to_place(Bund, Shanghai Station, 07-01 09:00, 07-01 09:25)", vec![]);
        assert_eq!(failed(&tr), [ItemCode::SpatialContinuity]);
        assert_eq!(tr.events[0].taxonomy, Taxonomy::Cke);
    }

    #[test]
    fn sold_out_ticket_fails_schedule_and_is_not_charged() {
        let tr = run("go_to_city(Shanghai, Beijing, 07-01 09:00, 07-01 13:30, G7)", vec![]);
        assert_eq!(failed(&tr), [ItemCode::ScheduleMatch]);
        assert!(tr.events[0].message.contains("sold out"));
        assert_eq!(tr.total_cost, Money::ZERO);
    }

    #[test]
    fn going_to_city_away_from_station_is_spatial_failure() {
        let tr = run(
            "go_to_place(Shanghai Station, Bund, 07-01 09:00, 07-01 09:25)\n\
             go_to_city(Shanghai, Beijing, 07-01 14:40, 07-01 20:30, G2305)",
            vec![],
        );
        assert_eq!(failed(&tr), [ItemCode::SpatialContinuity]);
    }

    #[test]
    fn overlapping_actions_fail_chronological_order() {
        let tr = run(
            "stay_in(Shanghai, 07-01 08:00, 07-01 12:00)\n\
             go_to_place(Shanghai Station, Bund, 07-01 11:00, 07-01 11:25)",
            vec![],
        );
        assert_eq!(failed(&tr), [ItemCode::ChronologicalOrder]);
        assert_eq!(tr.events[0].taxonomy, Taxonomy::Cke);
    }

    #[test]
    fn unknown_entities_are_information_errors() {
        let tr = run("visit(Louvre, 07-01 09:00, 07-01 10:00)\nstay_in(Paris, 07-01 10:00, 07-01 11:00)", vec![]);
        let eim = tr.events.iter().filter(|e| e.taxonomy == Taxonomy::Eim).count();
        assert!(eim >= 2);
        assert!(failed(&tr).contains(&ItemCode::EntityExists));
    }

    #[test]
    fn good_plan_is_fully_executable_and_costs_add_up() {
        let tr = run(GOOD, vec![]);
        assert_eq!(tr.l1(), (24, 24));
        assert_eq!(tr.total_cost, Money(400 + 1000 + 400 + 55300 + 500 + 6000));
        assert_eq!(tr.total_minutes, TimePoint::at(1, 11, 30).saturating_sub(TimePoint::at(0, 8, 0)));
        assert!(tr.final_state.visited.contains(&("Beijing".into(), "Palace Museum".into())));
    }

    #[test]
    fn failed_action_snaps_location_forward() {
        // Wrong duration but the traveler is taken to be at the Bund afterwards.
        let tr = run(
            "go_to_place(Shanghai Station, Bund, 07-01 09:00, 07-01 09:20)\n\
             visit(Bund, 07-01 09:30, 07-01 11:00)",
            vec![],
        );
        assert_eq!(failed(&tr), [ItemCode::ScheduleMatch]);
        assert_eq!(tr.first_failed_action(), Some(0));
    }

    #[test]
    fn constraint_items() {
        let cal = Calendar::new(7, 1).unwrap();
        let w = |a: &str, b: &str| Window::new(cal.parse(a).unwrap(), cal.parse(b).unwrap());
        let cs = vec![
            Constraint::TimeLimit { deadline: cal.parse("07-02 12:00").unwrap() },
            Constraint::Budget { max: Money(63600) },
            Constraint::Transportation { mode: TransportMode::Train },
            Constraint::CityDuration { city: "Shanghai".into(), min_minutes: 400 },
            Constraint::SpotDuration { city: "Beijing".into(), place: "Palace Museum".into(), min_minutes: 150 },
            Constraint::ActivityTime { windows: vec![w("07-01 08:00", "07-01 22:00"), w("07-02 08:00", "07-02 22:00")] },
            Constraint::SpotOpeningHours { city: "Beijing".into(), place: "Palace Museum".into() },
            Constraint::RestTime { windows: vec![w("07-01 22:00", "07-02 07:00")] },
            Constraint::SpecificHotel {
                city: "Beijing".into(),
                hotel: "Beijing Station".into(),
                check_times: vec![cal.parse("07-01 23:00").unwrap()],
            },
        ];
        let tr = run(GOOD, cs.clone());
        assert_eq!(tr.l2(), (9, 9), "{:?}", tr.events);

        let tight = |c: Constraint| run(GOOD, vec![c]);
        assert_eq!(tight(Constraint::Budget { max: Money(63599) }).l2(), (0, 1));
        assert_eq!(tight(Constraint::Budget { max: Money(63599) }).events[0].taxonomy, Taxonomy::Cnc);
        assert_eq!(tight(Constraint::TimeLimit { deadline: cal.parse("07-02 11:00").unwrap() }).l2(), (0, 1));
        assert_eq!(tight(Constraint::Transportation { mode: TransportMode::Flight }).l2(), (0, 1));
        // Presence in Shanghai runs 08:00 to 14:40.
        assert_eq!(tight(Constraint::CityDuration { city: "Shanghai".into(), min_minutes: 400 }).l2(), (1, 1));
        assert_eq!(tight(Constraint::CityDuration { city: "Shanghai".into(), min_minutes: 401 }).l2(), (0, 1));
        assert_eq!(
            tight(Constraint::SpotDuration { city: "Beijing".into(), place: "Palace Museum".into(), min_minutes: 151 })
                .l2(),
            (0, 1)
        );
        // The place minimum applies even when the constraint asks for less.
        assert_eq!(
            tight(Constraint::SpotDuration { city: "Shanghai".into(), place: "Bund".into(), min_minutes: 10 }).l2(),
            (1, 1)
        );
        assert_eq!(tight(Constraint::RestTime { windows: vec![w("07-01 14:00", "07-01 15:00")] }).l2(), (0, 1));
        // Rest windows touching an action boundary are fine.
        assert_eq!(tight(Constraint::RestTime { windows: vec![w("07-01 11:25", "07-01 14:40")] }).l2(), (1, 1));
        assert_eq!(tight(Constraint::ActivityTime { windows: vec![w("07-01 08:00", "07-01 22:00")] }).l2(), (0, 1));
        let mid_trip = Constraint::SpecificHotel {
            city: "Beijing".into(),
            hotel: "Beijing Station".into(),
            check_times: vec![cal.parse("07-01 16:00").unwrap()],
        };
        let tr = tight(mid_trip);
        assert_eq!(tr.l2(), (0, 1));
        assert!(tr.events[0].message.contains("in transit"));
    }

    #[test]
    fn opening_hours_failure_is_level_two_only() {
        let text = "go_to_place(Shanghai Station, Bund, 07-01 21:00, 07-01 21:25)\n\
                    visit(Bund, 07-01 21:30, 07-01 22:30)";
        let tr = run(text, vec![Constraint::SpotOpeningHours { city: "Shanghai".into(), place: "Bund".into() }]);
        assert!(tr.l1_full());
        assert_eq!(tr.l2(), (0, 1));
        assert!(tr.final_state.visited.contains(&("Shanghai".into(), "Bund".into())));
    }

    #[test]
    fn hotel_check_from_a_stay() {
        let cal = Calendar::new(7, 1).unwrap();
        let text = "go_to_place(Shanghai Station, Bund, 07-01 09:00, 07-01 09:25)\n\
                    go_to_place(Bund, Peace Hotel, 07-01 20:00, 07-01 20:10)\n\
                    stay_in(Shanghai, 07-01 20:10, 07-02 08:00)";
        let c = Constraint::SpecificHotel {
            city: "Shanghai".into(),
            hotel: "Peace Hotel".into(),
            check_times: vec![cal.parse("07-01 22:00").unwrap(), cal.parse("07-02 06:00").unwrap()],
        };
        let tr = run(text, vec![c]);
        assert!(tr.fully_valid(), "{:?}", tr.events);
    }

    #[test]
    fn simulation_is_deterministic() {
        let t = task(vec![Constraint::Budget { max: Money(1) }]);
        let it = parse_itinerary(GOOD, &t.calendar).unwrap();
        let a = serde_json::to_string(&simulate(&world(), &t, &it).to_file(&t.calendar)).unwrap();
        let b = serde_json::to_string(&simulate(&world(), &t, &it).to_file(&t.calendar)).unwrap();
        assert_eq!(a, b);
    }

    /// A failed step's snapped place outlives its successor, so deleting it
    /// can lower the passed count further down the plan.
    #[test]
    fn deleting_a_failed_step_can_cost_later_items() {
        let t = task(vec![]);
        let text = "visit(Beijing Station, 07-01 00:00, 07-01 01:00)\n\
                    stay_in(Shanghai, 07-01 00:00, 07-01 00:05)\n\
                    go_to_place(Beijing Station, Shanghai Station, 07-01 00:00, 07-01 00:05)";
        let mut it = parse_itinerary(text, &t.calendar).unwrap();
        let before = simulate(&world(), &t, &it);
        assert!(before.items.iter().any(|i| i.action == Some(0) && !i.passed));
        let passed = |tr: &Trace, j: usize| tr.items.iter().filter(|i| i.action == Some(j) && i.passed).count();
        let was = passed(&before, 2);
        it.actions.remove(0);
        assert!(passed(&simulate(&world(), &t, &it), 1) < was);
    }

    fn line() -> impl Strategy<Value = String> {
        let place = prop::sample::select(vec!["Shanghai Station", "Bund", "Peace Hotel", "Beijing Station", "Palace Museum"]);
        let city = prop::sample::select(vec!["Shanghai", "Beijing"]);
        let ticket = prop::sample::select(vec!["G2305", "G7", "MU5102", "X1"]);
        let t = (0u32..3, 0u32..24, 0u32..12).prop_map(|(d, h, m)| format!("07-0{} {:02}:{:02}", d + 1, h, m * 5));
        prop_oneof![
            (place.clone(), place.clone(), t.clone(), t.clone())
                .prop_map(|(a, b, s, e)| format!("go_to_place({a}, {b}, {s}, {e})")),
            (place, t.clone(), t.clone()).prop_map(|(p, s, e)| format!("visit({p}, {s}, {e})")),
            (city.clone(), city.clone(), t.clone(), t.clone(), ticket)
                .prop_map(|(a, b, s, e, k)| format!("go_to_city({a}, {b}, {s}, {e}, {k})")),
            (city, t.clone(), t).prop_map(|(c, s, e)| format!("stay_in({c}, {s}, {e})")),
        ]
    }

    proptest! {
        #[test]
        fn trace_invariants(lines in prop::collection::vec(line(), 0..8)) {
            let t = task(vec![Constraint::Budget { max: Money(70000) }, Constraint::TimeLimit { deadline: TimePoint::at(2, 0, 0) }]);
            let valid: Vec<String> = lines.into_iter().filter(|l| parse_itinerary(l, &t.calendar).is_ok()).collect();
            let it = parse_itinerary(&valid.join("\n"), &t.calendar).unwrap();
            let tr = simulate(&world(), &t, &it);
            prop_assert_eq!(tr.l1().1, it.len() * 4);
            prop_assert_eq!(tr.l2().1, 2);
            let failures = tr.items.iter().filter(|i| !i.passed).count();
            prop_assert_eq!(failures, tr.events.len());
            for (item, ev) in tr.items.iter().filter(|i| !i.passed).zip(&tr.events) {
                prop_assert_eq!(item.code.taxonomy(), ev.taxonomy);
                prop_assert!(ev.taxonomy != Taxonomy::Ctf);
            }
            // Recompute cost independently from the records.
            let w = world();
            let mut city = "Shanghai".to_string();
            let mut cost = 0u64;
            for a in &it.actions {
                match a {
                    Action::GoToPlace { origin, destination, .. } => {
                        cost += w.city(&city).and_then(|c| c.route(origin, destination)).map_or(0, |r| r.price.0);
                    }
                    Action::Visit { place, .. } => {
                        cost += w.place(&city, place).filter(|p| p.is_attraction()).map_or(0, |p| p.visit_price.0);
                    }
                    Action::GoToCity { ticket, destination, .. } => {
                        cost += w.trip(ticket).filter(|t| t.capacity_available).map_or(0, |t| t.price.0);
                        city = destination.clone();
                    }
                    Action::StayIn { city: c, .. } => city = c.clone(),
                }
            }
            prop_assert_eq!(tr.total_cost, Money(cost));
            // Clock never runs backwards.
            prop_assert!(tr.final_state.clock >= t.start.time);
        }

        /// Deleting a failed in-city action leaves the prefix untouched and
        /// every later entity check unchanged.
        #[test]
        fn deleting_a_failed_step(lines in prop::collection::vec(line(), 1..8)) {
            let t = task(vec![]);
            let valid: Vec<String> = lines.into_iter().filter(|l| parse_itinerary(l, &t.calendar).is_ok()).collect();
            let it = parse_itinerary(&valid.join("\n"), &t.calendar).unwrap();
            let before = simulate(&world(), &t, &it);
            let failed: Vec<usize> = (0..it.len())
                .filter(|&k| matches!(it.actions[k], Action::GoToPlace { .. } | Action::Visit { .. }))
                .filter(|&k| before.items.iter().any(|i| i.action == Some(k) && !i.passed))
                .collect();
            for k in failed {
                let mut actions = it.actions.clone();
                actions.remove(k);
                let after = simulate(&world(), &t, &Itinerary::new(actions));
                let row = |tr: &Trace, j: usize, all: bool| -> Vec<bool> {
                    tr.items
                        .iter()
                        .filter(|i| i.action == Some(j) && (all || i.code == ItemCode::EntityExists))
                        .map(|i| i.passed)
                        .collect()
                };
                for j in (0..it.len()).filter(|&j| j != k) {
                    let (nj, prefix) = if j > k { (j - 1, false) } else { (j, true) };
                    prop_assert_eq!(row(&before, j, prefix), row(&after, nj, prefix), "removed {}, action {}", k, j);
                }
            }
        }
    }
}
