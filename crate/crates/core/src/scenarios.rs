//! Seeded generation of worlds, tasks with stored witnesses, suites and
//! faults.
//!
//! Tasks are built answer-first: the structural constraints are fixed, a
//! random valid plan is drawn, and the numeric limits (budget, time limit)
//! are then set with slack around that plan.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluator::{calibrate, load_calibration, Calibration, EvalError};
use crate::itinerary::{Action, Itinerary};
use crate::rng::{derive_seed, derived_rng, stream, Rng};
use crate::simulator::simulate;
use crate::solver::{sample_up_to, sample_valid, solve_exact, solve_heuristic_evals, PlanProblem, Solution};
use crate::task::{load_task, AttractionTarget, CityTarget, Constraint, Objective, Start, Targets, Task, TaskError, TaskType};
use crate::time::{Calendar, TimePoint, Window, MINUTES_PER_DAY};
use crate::world::{
    load_world, City, InterCityTrip, IntraRoute, Money, Place, PlaceKind, TransportMode, World, WorldError,
};

pub const CITY_NAMES: [&str; 15] = [
    "Beijing", "Shanghai", "Hangzhou", "Nanjing", "Suzhou", "Xian", "Chengdu", "Chongqing", "Wuhan",
    "Guangzhou", "Shenzhen", "Xiamen", "Qingdao", "Tianjin", "Kunming",
];

const ATTRACTION_NAMES: [&str; 12] = [
    "Museum", "Old Town", "Temple", "Garden", "Tower", "Lake Park", "Art Gallery", "Night Market", "Zoo",
    "Bell Tower", "Ancient Wall", "Science Center",
];

const HOTEL_NAMES: [&str; 3] = ["Grand Hotel", "Inn", "Riverside Hotel"];

/// Probability that each optional constraint kind is attached to a task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintMix {
    pub rest_time: f64,
    pub meals: f64,
    pub activity_time: f64,
    pub specific_hotel: f64,
    pub transportation: f64,
    pub budget: f64,
    pub time_limit: f64,
}

impl Default for ConstraintMix {
    fn default() -> Self {
        ConstraintMix {
            rest_time: 0.6,
            meals: 0.3,
            activity_time: 0.5,
            specific_hotel: 0.3,
            transportation: 0.25,
            budget: 0.7,
            time_limit: 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub num_cities: usize,
    pub attractions_per_city: usize,
    pub hotels_per_city: usize,
    pub trips_per_pair: usize,
    pub route_density: f64,
    pub horizon_days: u32,
    pub start_date: String,
    pub mix: ConstraintMix,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            num_cities: 4,
            attractions_per_city: 3,
            hotels_per_city: 1,
            trips_per_pair: 3,
            route_density: 0.5,
            horizon_days: 3,
            start_date: "07-01".into(),
            mix: ConstraintMix::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generation parameters: {0}")]
    Params(String),
    #[error("world is too small for a type {0} task")]
    WorldTooSmall(u8),
    #[error("no witness found for a type {task_type} task after {attempts} attempts")]
    NoWitness { task_type: u8, attempts: usize },
    #[error(transparent)]
    World(#[from] WorldError),
}

impl GenParams {
    pub fn validate(&self) -> Result<Calendar, GenError> {
        let bad = |m: &str| Err(GenError::Params(m.to_string()));
        if self.num_cities == 0 || self.num_cities > CITY_NAMES.len() {
            return bad("num_cities must be between 1 and 15");
        }
        if self.attractions_per_city > ATTRACTION_NAMES.len() {
            return bad("attractions_per_city must be at most 12");
        }
        if self.hotels_per_city > HOTEL_NAMES.len() {
            return bad("hotels_per_city must be at most 3");
        }
        if self.num_cities > 1 && self.trips_per_pair == 0 {
            return bad("trips_per_pair must be positive when there are several cities");
        }
        if !(0.0..=1.0).contains(&self.route_density) {
            return bad("route_density must lie in [0, 1]");
        }
        if self.horizon_days == 0 || self.horizon_days > 30 {
            return bad("horizon_days must be between 1 and 30");
        }
        Calendar::parse_date(&self.start_date).map_err(|e| GenError::Params(e.to_string()))
    }

    pub fn horizon(&self) -> TimePoint {
        TimePoint(self.horizon_days * MINUTES_PER_DAY)
    }
}

fn five(rng: &mut Rng, lo: u32, hi: u32) -> u32 {
    5 * rng.gen_range(lo / 5..=hi / 5)
}

/// A world with `num_cities` cities, each with a station (the default start
/// place), hotels and attractions, station routes to every place, other
/// routes with probability `route_density`, and `trips_per_pair` trips for
/// every ordered city pair. All times are multiples of five minutes.
pub fn generate_world(params: &GenParams) -> Result<World, GenError> {
    let cal = params.validate()?;
    let mut rng = derived_rng(params.seed, stream::WORLD, 0);
    let mut names: Vec<&str> = CITY_NAMES.to_vec();
    names.shuffle(&mut rng);
    names.truncate(params.num_cities);
    let days = params.horizon_days;
    let mut cities = Vec::with_capacity(names.len());
    for name in &names {
        let mut places = vec![Place {
            name: format!("{name} Station"),
            kind: PlaceKind::Station,
            opening_windows: Vec::new(),
            min_visit_minutes: 0,
            visit_price: Money::ZERO,
            default_start: true,
        }];
        for h in HOTEL_NAMES.iter().take(params.hotels_per_city) {
            places.push(Place {
                name: format!("{name} {h}"),
                kind: PlaceKind::Hotel,
                opening_windows: Vec::new(),
                min_visit_minutes: 0,
                visit_price: Money::ZERO,
                default_start: false,
            });
        }
        let mut pool: Vec<&str> = ATTRACTION_NAMES.to_vec();
        pool.shuffle(&mut rng);
        for a in pool.iter().take(params.attractions_per_city) {
            let open = five(&mut rng, 7 * 60, 10 * 60);
            let close = five(&mut rng, 16 * 60, 21 * 60);
            let closed_day = if days > 1 && rng.gen_bool(0.15) { Some(rng.gen_range(1..days)) } else { None };
            let opening_windows = (0..days)
                .filter(|d| Some(*d) != closed_day)
                .map(|d| Window::new(TimePoint(d * MINUTES_PER_DAY + open), TimePoint(d * MINUTES_PER_DAY + close)))
                .collect();
            places.push(Place {
                name: format!("{name} {a}"),
                kind: PlaceKind::Attraction,
                opening_windows,
                min_visit_minutes: 15 * rng.gen_range(2..=12),
                visit_price: Money(500 * rng.gen_range(0..=30)),
                default_start: false,
            });
        }
        let mut intra_routes = Vec::new();
        for i in 0..places.len() {
            for j in i + 1..places.len() {
                if i != 0 && !rng.gen_bool(params.route_density) {
                    continue;
                }
                let minutes = five(&mut rng, 10, 60);
                let price = Money(100 * rng.gen_range(2..=30));
                for (o, d) in [(i, j), (j, i)] {
                    intra_routes.push(IntraRoute {
                        origin: places[o].name.clone(),
                        destination: places[d].name.clone(),
                        duration_minutes: minutes,
                        price,
                    });
                }
            }
        }
        cities.push(City { name: name.to_string(), places, intra_routes });
    }
    let mut trips = Vec::new();
    let mut used = BTreeSet::new();
    for a in &names {
        for b in &names {
            if a == b {
                continue;
            }
            for k in 0..params.trips_per_pair {
                let train = rng.gen_bool(0.6);
                let (dur, price) = if train {
                    (five(&mut rng, 60, 360), Money(100 * rng.gen_range(100..=600)))
                } else {
                    (five(&mut rng, 60, 180), Money(100 * rng.gen_range(400..=1500)))
                };
                let day = (k as u32 + rng.gen_range(0..days)) % days;
                let mut depart = TimePoint(day * MINUTES_PER_DAY + five(&mut rng, 6 * 60, 20 * 60));
                if depart.0 + dur > days * MINUTES_PER_DAY {
                    depart = TimePoint(depart.0 - MINUTES_PER_DAY.min(depart.0));
                }
                let ticket = loop {
                    let prefix = if train {
                        ["G", "D"][rng.gen_range(0..2)]
                    } else {
                        ["CA", "MU"][rng.gen_range(0..2)]
                    };
                    let id = format!("{prefix}{}", rng.gen_range(1000..10000));
                    if used.insert(id.clone()) {
                        break id;
                    }
                };
                trips.push(InterCityTrip {
                    ticket_id: ticket,
                    origin_city: a.to_string(),
                    dest_city: b.to_string(),
                    depart,
                    arrive: depart + dur,
                    price,
                    capacity_available: true,
                });
            }
        }
    }
    Ok(World::new(cal, params.seed, cities, trips)?)
}

/// Attempts made before [`generate_task`] gives up.
pub const TASK_ATTEMPTS: usize = 60;

/// A task of `task_type` over `world`, with a stored witness that passes
/// every item. Deterministic in `(world, task_type, seed, mix)`.
pub fn generate_task(world: &World, task_type: TaskType, seed: u64, mix: &ConstraintMix) -> Result<Task, GenError> {
    let n = task_type.number();
    let with_attractions: Vec<&City> = world.cities().iter().filter(|c| c.attractions().next().is_some()).collect();
    let ok = match task_type {
        TaskType::InterCity => world.cities().len() >= 2,
        TaskType::IntraCity => !with_attractions.is_empty(),
        TaskType::Combined => world.cities().len() >= 2 && !with_attractions.is_empty(),
    };
    if !ok {
        return Err(GenError::WorldTooSmall(n));
    }
    for attempt in 0..TASK_ATTEMPTS {
        let mut rng = derived_rng(seed, stream::TASK, attempt as u64);
        if let Some(t) = try_task(world, task_type, seed, mix, &mut rng) {
            return Ok(t);
        }
    }
    Err(GenError::NoWitness { task_type: n, attempts: TASK_ATTEMPTS })
}

fn world_days(world: &World) -> u32 {
    let last = world.trips().iter().map(|t| t.arrive.0).max().unwrap_or(0);
    let last_open = world
        .cities()
        .iter()
        .flat_map(|c| c.places.iter())
        .flat_map(|p| p.opening_windows.iter())
        .map(|w| w.end.0)
        .max()
        .unwrap_or(0);
    (last.max(last_open).div_ceil(MINUTES_PER_DAY)).max(1)
}

fn try_task(world: &World, task_type: TaskType, seed: u64, mix: &ConstraintMix, rng: &mut Rng) -> Option<Task> {
    let cal = world.calendar();
    let days = match task_type {
        TaskType::IntraCity => world_days(world).min(2),
        _ => world_days(world),
    };
    let horizon = TimePoint(days * MINUTES_PER_DAY);
    let cities = world.cities();
    let start_city: &City = match task_type {
        TaskType::IntraCity => {
            let c: Vec<&City> = cities.iter().filter(|c| c.attractions().next().is_some()).collect();
            c[rng.gen_range(0..c.len())]
        }
        _ => &cities[rng.gen_range(0..cities.len())],
    };
    let start = Start {
        city: start_city.name.clone(),
        place: start_city.start_place().name.clone(),
        time: TimePoint(five(rng, 8 * 60, 10 * 60)),
    };
    let objective = if rng.gen_bool(0.5) { Objective::CostCents } else { Objective::TotalMinutes };
    let mut others: Vec<&City> = cities.iter().filter(|c| c.name != start.city).collect();
    others.shuffle(rng);
    let mut targets = Targets::default();
    let pick_attractions = |c: &City, k: usize, rng: &mut Rng| -> Vec<AttractionTarget> {
        let mut a: Vec<&Place> = c.attractions().collect();
        a.shuffle(rng);
        a.into_iter()
            .take(k)
            .map(|p| AttractionTarget {
                city: c.name.clone(),
                place: p.name.clone(),
                min_visit_minutes: p.min_visit_minutes + 15 * rng.gen_range(0..=2),
            })
            .collect()
    };
    match task_type {
        TaskType::InterCity => {
            let k = rng.gen_range(1..=others.len().min(3));
            for c in others.iter().take(k) {
                targets.cities.push(CityTarget { city: c.name.clone(), min_stay_minutes: 30 * rng.gen_range(2..=16) });
            }
        }
        TaskType::IntraCity => {
            let k = rng.gen_range(1..=start_city.attractions().count().min(3));
            targets.attractions = pick_attractions(start_city, k, rng);
        }
        TaskType::Combined => {
            let candidates: Vec<&&City> = others.iter().filter(|c| c.attractions().next().is_some()).collect();
            if candidates.is_empty() {
                return None;
            }
            let k = rng.gen_range(1..=candidates.len().min(2));
            if start_city.attractions().next().is_some() && rng.gen_bool(0.3) {
                targets.attractions.extend(pick_attractions(start_city, 1, rng));
            }
            for c in candidates.iter().take(k) {
                let m = rng.gen_range(1..=c.attractions().count().min(2));
                targets.attractions.extend(pick_attractions(c, m, rng));
                if rng.gen_bool(0.5) {
                    targets.cities.push(CityTarget { city: c.name.clone(), min_stay_minutes: 60 * rng.gen_range(4..=8) });
                }
            }
        }
    }

    let mut constraints = Vec::new();
    for c in &targets.cities {
        constraints.push(Constraint::CityDuration { city: c.city.clone(), min_minutes: c.min_stay_minutes });
    }
    for a in &targets.attractions {
        constraints.push(Constraint::SpotDuration {
            city: a.city.clone(),
            place: a.place.clone(),
            min_minutes: a.min_visit_minutes,
        });
        constraints.push(Constraint::SpotOpeningHours { city: a.city.clone(), place: a.place.clone() });
    }
    let nights: Vec<TimePoint> = (0..days).map(|d| TimePoint(d * MINUTES_PER_DAY + 22 * 60)).collect();
    if rng.gen_bool(mix.rest_time) {
        let mut windows: Vec<Window> = nights
            .iter()
            .map(|&n| Window::new(n, TimePoint((n.0 + 9 * 60).min(horizon.0))))
            .filter(|w| !w.is_empty())
            .collect();
        if rng.gen_bool(mix.meals) {
            windows.extend((0..days).map(|d| Window::new(TimePoint(d * MINUTES_PER_DAY + 12 * 60), TimePoint(d * MINUTES_PER_DAY + 12 * 60 + 30))));
        }
        windows.sort_by_key(|w| w.start);
        constraints.push(Constraint::RestTime { windows });
    }
    if task_type != TaskType::InterCity && rng.gen_bool(mix.activity_time) {
        let (a, b) = (five(rng, 6 * 60, 8 * 60), five(rng, 20 * 60, 22 * 60));
        let windows = (0..days)
            .map(|d| Window::new(TimePoint(d * MINUTES_PER_DAY + a), TimePoint(d * MINUTES_PER_DAY + b)))
            .collect();
        constraints.push(Constraint::ActivityTime { windows });
    }
    if task_type != TaskType::IntraCity && rng.gen_bool(mix.transportation) {
        let mode = if rng.gen_bool(0.5) { TransportMode::Train } else { TransportMode::Flight };
        constraints.push(Constraint::Transportation { mode });
    }
    if task_type != TaskType::InterCity && rng.gen_bool(mix.specific_hotel) {
        if let Some(hotel) = start_city.hotels().next() {
            let check_times = match task_type {
                TaskType::IntraCity => nights.clone(),
                _ => nights.iter().take(1).copied().collect(),
            };
            constraints.push(Constraint::SpecificHotel {
                city: start_city.name.clone(),
                hotel: hotel.name.clone(),
                check_times,
            });
        }
    }

    let mut task = Task {
        id: format!("T{}-{seed}", task_type.number()),
        task_type,
        calendar: cal,
        start,
        horizon,
        objective,
        targets,
        constraints,
        prose: String::new(),
        witness: None,
    };
    let witness = {
        let problem = PlanProblem::for_task(world, &task);
        let s = sample_valid(&problem, 1, rng.gen()).ok()?;
        s.into_iter().next()?
    };
    let final_clock = simulate(world, &task, &witness.itinerary).final_state.clock;
    let cost = simulate(world, &task, &witness.itinerary).total_cost;
    if rng.gen_bool(mix.budget) {
        let slack = 1.0 + rng.gen_range(0.1..0.5);
        let max = ((cost.0 as f64 * slack / 100.0).ceil() as u64 * 100).max(cost.0).max(100);
        task.constraints.push(Constraint::Budget { max: Money(max) });
    }
    if rng.gen_bool(mix.time_limit) {
        let slack = 30 * rng.gen_range(0..=8);
        let deadline = TimePoint((final_clock.0 + slack).div_ceil(5) * 5).min(horizon);
        task.constraints.push(Constraint::TimeLimit { deadline });
    }
    task.witness = Some(witness.itinerary);
    let trace = simulate(world, &task, task.witness.as_ref().expect("set above"));
    if !trace.fully_valid() || task.validate(world).is_err() || !type_discipline(&task) {
        return None;
    }
    task.prose = task.render_prose();
    Some(task)
}

/// Type 1 witnesses use only trips and stays; Type 2 only routes and visits.
pub fn type_discipline(task: &Task) -> bool {
    let Some(w) = &task.witness else { return true };
    w.iter().all(|a| match task.task_type {
        TaskType::InterCity => matches!(a, Action::GoToCity { .. } | Action::StayIn { .. }),
        TaskType::IntraCity => matches!(a, Action::GoToPlace { .. } | Action::Visit { .. }),
        TaskType::Combined => true,
    })
}

// ---- calibration ----

/// Sampler rounds before a calibration is declared infeasible.
pub const CALIBRATION_ROUNDS: usize = 3;

/// Calibrates `task` from `n` distinct sampled itineraries. Round `r` of the
/// sampler uses seed `derive_seed(seed, SAMPLE, r)`.
pub fn calibrate_task(world: &World, task: &Task, n: usize, seed: u64) -> Result<(Calibration, Vec<Itinerary>), EvalError> {
    let p = PlanProblem::for_task(world, task);
    calibrate(world, task, n, CALIBRATION_ROUNDS, |_, round| {
        let s = derive_seed(seed, stream::SAMPLE, round as u64);
        sample_up_to(&p, n, s).unwrap_or_default().into_iter().map(|s| s.itinerary).collect()
    })
}

// ---- suites ----

/// Largest-remainder split of `total` in the ratio 96:95:173.
pub fn mix_counts(total: usize) -> [usize; 3] {
    const RATIO: [usize; 3] = [96, 95, 173];
    let sum: usize = RATIO.iter().sum();
    let mut counts = RATIO.map(|r| r * total / sum);
    let mut rem: Vec<(usize, usize)> = (0..3).map(|i| (RATIO[i] * total % sum, i)).collect();
    rem.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let short = total - counts.iter().sum::<usize>();
    for &(_, i) in rem.iter().take(short) {
        counts[i] += 1;
    }
    counts
}

/// Task types and seeds of a suite, in order.
pub fn suite_plan(counts: [usize; 3], seed: u64) -> Vec<(TaskType, u64)> {
    let mut out = Vec::new();
    for (k, t) in TaskType::ALL.iter().enumerate() {
        for _ in 0..counts[k] {
            let i = out.len() as u64;
            out.push((*t, derive_seed(seed, stream::SUITE, i)));
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct SuiteTask {
    pub task: Task,
    /// A world specific to this task (faulted suites), else the suite world.
    pub world: Option<World>,
    pub calibration: Option<Calibration>,
}

#[derive(Debug, Clone)]
pub struct Suite {
    pub name: String,
    pub world: World,
    pub tasks: Vec<SuiteTask>,
}

impl Suite {
    pub fn world_for<'s>(&'s self, t: &'s SuiteTask) -> &'s World {
        t.world.as_ref().unwrap_or(&self.world)
    }
}

/// Sequential suite generation; see [`suite_plan`] for the seeds used.
pub fn generate_suite(params: &GenParams, counts: [usize; 3], name: &str) -> Result<Suite, GenError> {
    let world = generate_world(params)?;
    let mut tasks = Vec::new();
    for (t, s) in suite_plan(counts, params.seed) {
        tasks.push(SuiteTask { task: generate_task(&world, t, s, &params.mix)?, world: None, calibration: None });
    }
    Ok(Suite { name: name.to_string(), world, tasks })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteManifest {
    pub name: String,
    pub world: String,
    pub tasks: Vec<SuiteEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteEntry {
    pub id: String,
    pub task: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub world: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<String>,
}

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("cannot access suite files: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed suite manifest: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    World { path: String, source: WorldError },
    #[error("{path}: {source}")]
    Task { path: String, source: TaskError },
    #[error("{path}: {source}")]
    Calibration { path: String, source: EvalError },
    #[error("task {0} does not fit its world")]
    Invalid(String),
}

impl Suite {
    /// Writes `suite.json`, `world.json`, one file per task and any
    /// per-task worlds and calibrations into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<PathBuf, SuiteError> {
        std::fs::create_dir_all(dir.join("tasks"))?;
        std::fs::write(dir.join("world.json"), self.world.to_json_string())?;
        let mut entries = Vec::new();
        for t in &self.tasks {
            let id = &t.task.id;
            let task_path = format!("tasks/{id}.json");
            std::fs::write(dir.join(&task_path), t.task.to_json_string())?;
            let world = match &t.world {
                Some(w) => {
                    let p = format!("tasks/{id}.world.json");
                    std::fs::write(dir.join(&p), w.to_json_string())?;
                    Some(p)
                }
                None => None,
            };
            let calibration = match &t.calibration {
                Some(c) => {
                    let p = format!("tasks/{id}.calib.json");
                    std::fs::write(dir.join(&p), c.to_json_string())?;
                    Some(p)
                }
                None => None,
            };
            entries.push(SuiteEntry { id: id.clone(), task: task_path, world, calibration });
        }
        let manifest = SuiteManifest { name: self.name.clone(), world: "world.json".into(), tasks: entries };
        let path = dir.join("suite.json");
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(path)
    }
}

pub fn load_suite(manifest: &Path) -> Result<Suite, SuiteError> {
    let dir = manifest.parent().unwrap_or(Path::new("."));
    let m: SuiteManifest = serde_json::from_str(&std::fs::read_to_string(manifest)?)?;
    let world_at = |p: &str| {
        load_world(dir.join(p)).map_err(|source| SuiteError::World { path: p.to_string(), source })
    };
    let world = world_at(&m.world)?;
    let mut tasks = Vec::new();
    for e in &m.tasks {
        let task = load_task(dir.join(&e.task)).map_err(|source| SuiteError::Task { path: e.task.clone(), source })?;
        let w = e.world.as_deref().map(world_at).transpose()?;
        let calibration = match &e.calibration {
            Some(p) => Some(
                load_calibration(dir.join(p)).map_err(|source| SuiteError::Calibration { path: p.clone(), source })?,
            ),
            None => None,
        };
        if task.validate(w.as_ref().unwrap_or(&world)).is_err() {
            return Err(SuiteError::Invalid(task.id));
        }
        tasks.push(SuiteTask { task, world: w, calibration });
    }
    Ok(Suite { name: m.name, world, tasks })
}

// ---- faults ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Fault {
    RemoveWitnessTrip,
    SelloutWitnessTicket,
    /// Moves every opening window of a witness attraction later.
    ShiftOpeningWindow { minutes: u32 },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FaultError {
    #[error("task has no witness")]
    NoWitness,
    #[error("the witness has nothing this fault can target")]
    NoTarget,
    #[error("the fault leaves the witness valid")]
    Ineffective,
    #[error("no valid itinerary survives the fault")]
    NoAlternative,
    #[error("faulted world is invalid: {0}")]
    World(String),
}

/// Node budget used when checking that a faulted task stays solvable.
pub const FAULT_NODE_BUDGET: u64 = 400_000;

/// Applies `fault` to the `which`-th eligible element of the witness
/// (modulo the number of candidates). The fault is rejected unless it breaks
/// the witness and some valid itinerary remains.
pub fn inject_fault(world: &World, task: &Task, fault: Fault, which: usize) -> Result<World, FaultError> {
    let witness = task.witness.as_ref().ok_or(FaultError::NoWitness)?;
    let tickets: Vec<&str> = witness
        .iter()
        .filter_map(|a| match a {
            Action::GoToCity { ticket, .. } => Some(ticket.as_str()),
            _ => None,
        })
        .collect();
    let err = |e: WorldError| FaultError::World(e.to_string());
    let faulted = match fault {
        Fault::RemoveWitnessTrip | Fault::SelloutWitnessTicket => {
            if tickets.is_empty() {
                return Err(FaultError::NoTarget);
            }
            let t = tickets[which % tickets.len()].to_string();
            world
                .with_trips(|trips| {
                    if fault == Fault::RemoveWitnessTrip {
                        trips.retain(|x| x.ticket_id != t);
                    } else if let Some(x) = trips.iter_mut().find(|x| x.ticket_id == t) {
                        x.capacity_available = false;
                    }
                })
                .map_err(err)?
        }
        Fault::ShiftOpeningWindow { minutes } => {
            let visits = visited_places(world, task, witness);
            if visits.is_empty() {
                return Err(FaultError::NoTarget);
            }
            let (city, place) = visits[which % visits.len()].clone();
            world
                .with_cities(|cities| {
                    if let Some(p) = cities
                        .iter_mut()
                        .find(|c| c.name == city)
                        .and_then(|c| c.places.iter_mut().find(|p| p.name == place))
                    {
                        for w in &mut p.opening_windows {
                            *w = Window::new(w.start + minutes, w.end + minutes);
                        }
                    }
                })
                .map_err(err)?
        }
    };
    if simulate(&faulted, task, witness).fully_valid() {
        return Err(FaultError::Ineffective);
    }
    if !has_alternative(&faulted, task) {
        return Err(FaultError::NoAlternative);
    }
    Ok(faulted)
}

/// Attractions visited by `it` whose opening hours the task constrains.
fn visited_places(world: &World, task: &Task, it: &Itinerary) -> Vec<(String, String)> {
    let trace = simulate(world, task, it);
    let mut out: Vec<(String, String)> = trace
        .final_state
        .visited
        .iter()
        .filter(|(c, p)| {
            task.constraints.iter().any(|k| {
                matches!(k, Constraint::SpotOpeningHours { city, place } if city == c && place == p)
            })
        })
        .cloned()
        .collect();
    out.sort();
    out
}

pub fn has_alternative(world: &World, task: &Task) -> bool {
    let p = PlanProblem::for_task(world, task);
    solve_exact(&p, FAULT_NODE_BUDGET).is_valid() || solve_heuristic_evals(&p, 2_000, 0, 0).is_valid()
}

/// One task of a fault suite: the faulted world and the plan it breaks.
#[derive(Debug, Clone)]
pub struct FaultCase {
    pub task: Task,
    pub world: World,
    pub broken_ticket: String,
}

/// Re-witnesses `task` with the optimal plan, then sells out the first
/// ticket of that plan whose loss still leaves a valid itinerary.
pub fn sellout_case(world: &World, task: &Task) -> Option<FaultCase> {
    let plan: Solution = solve_exact(&PlanProblem::for_task(world, task), FAULT_NODE_BUDGET);
    if !plan.is_valid() {
        return None;
    }
    let mut t = task.clone();
    t.witness = Some(plan.itinerary.clone());
    let n = plan.itinerary.iter().filter(|a| matches!(a, Action::GoToCity { .. })).count();
    for which in 0..n {
        if let Ok(w) = inject_fault(world, &t, Fault::SelloutWitnessTicket, which) {
            let ticket = plan
                .itinerary
                .iter()
                .filter_map(|a| match a {
                    Action::GoToCity { ticket, .. } => Some(ticket.clone()),
                    _ => None,
                })
                .nth(which)?;
            return Some(FaultCase { task: t, world: w, broken_ticket: ticket });
        }
    }
    None
}

/// `n` Type 3 sellout cases drawn from consecutive task seeds.
pub fn fault_suite(params: &GenParams, n: usize, name: &str) -> Result<Suite, GenError> {
    let world = generate_world(params)?;
    let mut tasks = Vec::new();
    let mut i = 0u64;
    while tasks.len() < n {
        if i > 20 * n as u64 + 100 {
            return Err(GenError::NoWitness { task_type: 3, attempts: i as usize });
        }
        let seed = derive_seed(params.seed, stream::FAULT, i);
        i += 1;
        let Ok(task) = generate_task(&world, TaskType::Combined, seed, &params.mix) else { continue };
        if let Some(case) = sellout_case(&world, &task) {
            tasks.push(SuiteTask { task: case.task, world: Some(case.world), calibration: None });
        }
    }
    Ok(Suite { name: name.to_string(), world, tasks })
}
