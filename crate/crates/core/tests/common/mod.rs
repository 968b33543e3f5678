//! Test-side helpers shared by the integration suites.
#![allow(dead_code)]

use std::collections::BTreeMap;

use tripbench::evaluator::objective_value;
use tripbench::itinerary::{Action, Itinerary};
use tripbench::scenarios::{generate_task, generate_world, ConstraintMix, GenParams};
use tripbench::simulator::{simulate, simulate_with, SimState};
use tripbench::task::{Constraint, Task, TaskType};
use tripbench::time::TimePoint;
use tripbench::world::World;

/// Worlds small enough for [`BruteForce`]: four cities, three attractions
/// each, three trips per ordered pair, no hotels.
pub fn oracle_params(seed: u64) -> GenParams {
    GenParams {
        num_cities: 4,
        attractions_per_city: 3,
        hotels_per_city: 0,
        trips_per_pair: 3,
        route_density: 0.6,
        horizon_days: 3,
        mix: ConstraintMix { specific_hotel: 0.0, ..ConstraintMix::default() },
        seed,
        ..GenParams::default()
    }
}

/// The `i`-th oracle-scale instance, cycling through the three task types.
pub fn oracle_instance(i: u64) -> (World, Task) {
    let params = oracle_params(1000 + i);
    let world = generate_world(&params).unwrap();
    let tt = TaskType::ALL[(i % 3) as usize];
    let task = generate_task(&world, tt, i, &params.mix).unwrap();
    (world, task)
}

/// Exhaustive enumeration of plans that visit each required city once,
/// do a city's attractions (in any order) before leaving it, walk over at
/// most two routes per move, and start every move and visit at the first
/// five-minute mark the simulator accepts. The simulator is the only judge
/// of validity.
pub struct BruteForce<'a> {
    world: &'a World,
    task: &'a Task,
    local: Vec<Constraint>,
    needs: BTreeMap<(String, String), u32>,
    stays: BTreeMap<String, u32>,
    pub best: Option<u64>,
    pub leaves: u64,
}

#[derive(Clone)]
struct State {
    actions: Vec<Action>,
    city: String,
    place: String,
    clock: TimePoint,
    arrived: TimePoint,
    todo_here: Vec<String>,
    cities_left: Vec<String>,
}

impl<'a> BruteForce<'a> {
    pub fn new(world: &'a World, task: &'a Task) -> Self {
        let local = task
            .constraints
            .iter()
            .filter(|c| {
                matches!(
                    c,
                    Constraint::Transportation { .. }
                        | Constraint::ActivityTime { .. }
                        | Constraint::RestTime { .. }
                        | Constraint::SpotOpeningHours { .. }
                )
            })
            .cloned()
            .collect();
        let mut needs = BTreeMap::new();
        let mut stays = BTreeMap::new();
        for a in &task.targets.attractions {
            let p = world.place(&a.city, &a.place).unwrap();
            let e = needs.entry((a.city.clone(), a.place.clone())).or_insert(p.min_visit_minutes);
            *e = (*e).max(a.min_visit_minutes);
        }
        for c in &task.targets.cities {
            let e = stays.entry(c.city.clone()).or_insert(0);
            *e = (*e).max(c.min_stay_minutes);
        }
        for c in &task.constraints {
            match c {
                Constraint::SpotDuration { city, place, min_minutes } => {
                    let e = needs.entry((city.clone(), place.clone())).or_insert(0);
                    *e = (*e).max(*min_minutes);
                }
                Constraint::CityDuration { city, min_minutes } => {
                    let e = stays.entry(city.clone()).or_insert(0);
                    *e = (*e).max(*min_minutes);
                }
                _ => {}
            }
        }
        BruteForce { world, task, local, needs, stays, best: None, leaves: 0 }
    }

    pub fn run(mut self) -> Self {
        let start = &self.task.start;
        let mut cities: Vec<String> = Vec::new();
        for c in self.stays.keys().chain(self.needs.keys().map(|(c, _)| c)) {
            if *c != start.city && !cities.contains(c) {
                cities.push(c.clone());
            }
        }
        let s = State {
            actions: Vec::new(),
            city: start.city.clone(),
            place: start.place.clone(),
            clock: start.time,
            arrived: start.time,
            todo_here: self.todo(&start.city),
            cities_left: cities,
        };
        self.dfs(s);
        self
    }

    fn todo(&self, city: &str) -> Vec<String> {
        self.needs.keys().filter(|(c, _)| c == city).map(|(_, p)| p.clone()).collect()
    }

    fn accepted(&self, actions: &[Action]) -> bool {
        let it = Itinerary::new(actions.to_vec());
        let t = simulate_with(self.world, self.task, SimState::at_start(self.task), &it, &self.local);
        t.fully_valid()
    }

    /// Earliest five-minute start at which `make(t)` is accepted.
    fn earliest(&self, s: &State, make: impl Fn(TimePoint) -> Action) -> Option<State> {
        let mut t = s.clock;
        while t <= self.task.horizon {
            let a = make(t);
            let mut actions = s.actions.clone();
            actions.push(a.clone());
            if self.accepted(&actions) {
                let mut n = s.clone();
                n.actions = actions;
                n.clock = a.end();
                return Some(n);
            }
            t = t + 5;
        }
        None
    }

    fn paths(&self, city: &str, from: &str, to: &str) -> Vec<Vec<String>> {
        if from == to {
            return vec![vec![]];
        }
        let c = self.world.city(city).unwrap();
        let mut out = Vec::new();
        if c.route(from, to).is_some() {
            out.push(vec![to.to_string()]);
        }
        for k in &c.places {
            if k.name != from && k.name != to && c.route(from, &k.name).is_some() && c.route(&k.name, to).is_some() {
                out.push(vec![k.name.clone(), to.to_string()]);
            }
        }
        out
    }

    fn walk(&self, s: &State, path: &[String]) -> Option<State> {
        let mut cur = s.clone();
        for hop in path {
            let r = self.world.city(&cur.city).unwrap().route(&cur.place, hop).unwrap();
            let (o, d, dur) = (cur.place.clone(), hop.clone(), r.duration_minutes);
            cur = self.earliest(&cur, |t| Action::GoToPlace {
                origin: o.clone(),
                destination: d.clone(),
                depart: t,
                arrive: t + dur,
            })?;
            cur.place = hop.clone();
        }
        Some(cur)
    }

    fn dfs(&mut self, s: State) {
        if !s.todo_here.is_empty() {
            for (i, p) in s.todo_here.clone().iter().enumerate() {
                for path in self.paths(&s.city, &s.place, p) {
                    let Some(at) = self.walk(&s, &path) else { continue };
                    let need = self.needs[&(s.city.clone(), p.clone())];
                    let Some(mut v) = self.earliest(&at, |t| Action::Visit { place: p.clone(), begin: t, end: t + need })
                    else {
                        continue;
                    };
                    v.todo_here.remove(i);
                    self.dfs(v);
                }
            }
            return;
        }
        if s.cities_left.is_empty() {
            self.finish(s);
            return;
        }
        let station = self.world.city(&s.city).unwrap().start_place().name.clone();
        for path in self.paths(&s.city, &s.place, &station) {
            let Some(at) = self.walk(&s, &path) else { continue };
            for (i, next) in s.cities_left.iter().enumerate() {
                for trip in self.world.trips() {
                    if trip.origin_city != s.city || trip.dest_city != *next || !trip.capacity_available {
                        continue;
                    }
                    let mut n = at.clone();
                    let stays_everywhere = self.task.task_type == TaskType::InterCity;
                    if stays_everywhere && s.city != self.task.start.city && n.clock < trip.depart {
                        n.actions.push(Action::StayIn { city: s.city.clone(), begin: n.clock, end: trip.depart });
                    }
                    n.actions.push(Action::GoToCity {
                        origin: s.city.clone(),
                        destination: next.clone(),
                        depart: trip.depart,
                        arrive: trip.arrive,
                        ticket: trip.ticket_id.clone(),
                    });
                    if !self.accepted(&n.actions) {
                        continue;
                    }
                    n.city = next.clone();
                    n.place = self.world.city(next).unwrap().start_place().name.clone();
                    n.clock = trip.arrive;
                    n.arrived = trip.arrive;
                    n.todo_here = self.todo(next);
                    n.cities_left.remove(i);
                    self.dfs(n);
                }
            }
        }
    }

    fn finish(&mut self, mut s: State) {
        let need = s.arrived + self.stays.get(&s.city).copied().unwrap_or(0);
        if need > s.clock {
            if self.task.task_type == TaskType::IntraCity {
                return;
            }
            s.actions.push(Action::StayIn { city: s.city.clone(), begin: s.clock, end: need });
        }
        self.leaves += 1;
        let trace = simulate(self.world, self.task, &Itinerary::new(s.actions));
        if trace.fully_valid() {
            let v = objective_value(&trace, self.task.objective);
            if self.best.is_none_or(|b| v < b) {
                self.best = Some(v);
            }
        }
    }
}

pub fn brute_force_optimum(world: &World, task: &Task) -> Option<u64> {
    BruteForce::new(world, task).run().best
}
