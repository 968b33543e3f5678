//! Cities, places, routes and scheduled inter-city trips.
//!
//! A [`World`] is immutable once built; [`World::new`] runs every structural
//! check and refuses to construct an invalid value. The JSON file form uses
//! `"MM-DD HH:MM"` strings for times and integer cents for money.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::ops::{Add, AddAssign};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::{Calendar, TimeError, TimePoint, Window};

/// Integer cents.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Money(pub u64);

impl Money {
    pub const ZERO: Money = Money(0);

    pub fn cents(self) -> u64 {
        self.0
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.0 += rhs.0;
    }
}

impl std::iter::Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        Money(iter.map(|m| m.0).sum())
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:02}", self.0 / 100, self.0 % 100)
    }
}

/// Names are letters, digits, spaces, underscores and hyphens, without
/// leading or trailing whitespace.
pub fn is_valid_name(s: &str) -> bool {
    !s.is_empty()
        && s.trim() == s
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == ' ' || c == '_' || c == '-')
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlaceKind {
    Attraction,
    Station,
    Hotel,
    Generic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransportMode {
    Train,
    Flight,
}

impl TransportMode {
    /// Train tickets carry a one-letter prefix (`G2305`), flights a two-letter
    /// carrier code (`CA1502`).
    pub fn of_ticket(ticket_id: &str) -> TransportMode {
        let mut chars = ticket_id.chars();
        chars.next();
        match chars.next() {
            Some(c) if c.is_ascii_digit() => TransportMode::Train,
            _ => TransportMode::Flight,
        }
    }
}

impl fmt::Display for TransportMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransportMode::Train => "train",
            TransportMode::Flight => "flight",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Place {
    pub name: String,
    pub kind: PlaceKind,
    pub opening_windows: Vec<Window>,
    pub min_visit_minutes: u32,
    pub visit_price: Money,
    pub default_start: bool,
}

impl Place {
    pub fn is_attraction(&self) -> bool {
        self.kind == PlaceKind::Attraction
    }

    pub fn is_open_for(&self, start: TimePoint, end: TimePoint) -> bool {
        self.opening_windows.iter().any(|w| w.contains_span(start, end))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntraRoute {
    pub origin: String,
    pub destination: String,
    pub duration_minutes: u32,
    pub price: Money,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct City {
    pub name: String,
    pub places: Vec<Place>,
    pub intra_routes: Vec<IntraRoute>,
}

impl City {
    pub fn place(&self, name: &str) -> Option<&Place> {
        self.places.iter().find(|p| p.name == name)
    }

    pub fn start_place(&self) -> &Place {
        self.places
            .iter()
            .find(|p| p.default_start)
            .expect("validated city has a default start place")
    }

    pub fn route(&self, origin: &str, destination: &str) -> Option<&IntraRoute> {
        self.intra_routes
            .iter()
            .find(|r| r.origin == origin && r.destination == destination)
    }

    pub fn attractions(&self) -> impl Iterator<Item = &Place> {
        self.places.iter().filter(|p| p.is_attraction())
    }

    pub fn hotels(&self) -> impl Iterator<Item = &Place> {
        self.places.iter().filter(|p| p.kind == PlaceKind::Hotel)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterCityTrip {
    pub ticket_id: String,
    pub origin_city: String,
    pub dest_city: String,
    pub depart: TimePoint,
    pub arrive: TimePoint,
    pub price: Money,
    pub capacity_available: bool,
}

impl InterCityTrip {
    pub fn mode(&self) -> TransportMode {
        TransportMode::of_ticket(&self.ticket_id)
    }

    pub fn duration(&self) -> u32 {
        self.arrive.saturating_sub(self.depart)
    }
}

/// One structural problem found while validating a world.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Defect {
    #[error("invalid name `{0}`")]
    InvalidName(String),
    #[error("duplicate city `{0}`")]
    DuplicateCity(String),
    #[error("city `{city}`: duplicate place `{place}`")]
    DuplicatePlace { city: String, place: String },
    #[error("city `{city}`: expected exactly one default start place, found {count}")]
    StartPlaceCount { city: String, count: usize },
    #[error("city `{city}`: place `{place}`: {reason}")]
    BadPlace { city: String, place: String, reason: String },
    #[error("city `{city}`: route {origin} -> {destination}: {reason}")]
    BadRoute { city: String, origin: String, destination: String, reason: String },
    #[error("trip `{ticket}`: {reason}")]
    BadTrip { ticket: String, reason: String },
    #[error("duplicate ticket id `{0}`")]
    DuplicateTicket(String),
}

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("cannot read world file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed world JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("bad time literal: {0}")]
    Time(#[from] TimeError),
    #[error("invalid world: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Validation(Vec<Defect>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("unknown city `{0}`")]
    UnknownCity(String),
    #[error("unknown place `{place}` in `{city}`")]
    UnknownPlace { city: String, place: String },
    #[error("`{place}` in `{city}` is not an attraction")]
    NotAnAttraction { city: String, place: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct World {
    calendar: Calendar,
    seed: u64,
    cities: Vec<City>,
    inter_trips: Vec<InterCityTrip>,
    city_index: HashMap<String, usize>,
    trip_index: HashMap<String, usize>,
}

impl World {
    pub fn new(
        calendar: Calendar,
        seed: u64,
        cities: Vec<City>,
        inter_trips: Vec<InterCityTrip>,
    ) -> Result<World, WorldError> {
        let defects = validate(&cities, &inter_trips);
        if !defects.is_empty() {
            return Err(WorldError::Validation(defects));
        }
        let city_index = cities.iter().enumerate().map(|(i, c)| (c.name.clone(), i)).collect();
        let trip_index =
            inter_trips.iter().enumerate().map(|(i, t)| (t.ticket_id.clone(), i)).collect();
        Ok(World { calendar, seed, cities, inter_trips, city_index, trip_index })
    }

    pub fn calendar(&self) -> Calendar {
        self.calendar
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn cities(&self) -> &[City] {
        &self.cities
    }

    pub fn trips(&self) -> &[InterCityTrip] {
        &self.inter_trips
    }

    pub fn city(&self, name: &str) -> Option<&City> {
        self.city_index.get(name).map(|&i| &self.cities[i])
    }

    pub fn trip(&self, ticket_id: &str) -> Option<&InterCityTrip> {
        self.trip_index.get(ticket_id).map(|&i| &self.inter_trips[i])
    }

    pub fn place(&self, city: &str, place: &str) -> Option<&Place> {
        self.city(city)?.place(place)
    }

    /// Trips from `origin_city` to `dest_city` departing within `window`
    /// (both ends inclusive), sorted by departure then ticket id.
    pub fn query_trips(
        &self,
        origin_city: &str,
        dest_city: &str,
        window: Window,
    ) -> Result<Vec<&InterCityTrip>, QueryError> {
        for c in [origin_city, dest_city] {
            if self.city(c).is_none() {
                return Err(QueryError::UnknownCity(c.to_string()));
            }
        }
        let mut out: Vec<&InterCityTrip> = self
            .inter_trips
            .iter()
            .filter(|t| {
                t.origin_city == origin_city && t.dest_city == dest_city && window.contains(t.depart)
            })
            .collect();
        out.sort_by(|a, b| (a.depart, &a.ticket_id).cmp(&(b.depart, &b.ticket_id)));
        Ok(out)
    }

    pub fn query_attraction(&self, city: &str, place: &str) -> Result<&Place, QueryError> {
        let c = self.city(city).ok_or_else(|| QueryError::UnknownCity(city.to_string()))?;
        let p = c.place(place).ok_or_else(|| QueryError::UnknownPlace {
            city: city.to_string(),
            place: place.to_string(),
        })?;
        if !p.is_attraction() {
            return Err(QueryError::NotAnAttraction {
                city: city.to_string(),
                place: place.to_string(),
            });
        }
        Ok(p)
    }

    /// Copy of this world with `edit` applied to the trip list, revalidated.
    pub fn with_trips(
        &self,
        edit: impl FnOnce(&mut Vec<InterCityTrip>),
    ) -> Result<World, WorldError> {
        let mut trips = self.inter_trips.clone();
        edit(&mut trips);
        World::new(self.calendar, self.seed, self.cities.clone(), trips)
    }

    pub fn with_cities(&self, edit: impl FnOnce(&mut Vec<City>)) -> Result<World, WorldError> {
        let mut cities = self.cities.clone();
        edit(&mut cities);
        World::new(self.calendar, self.seed, cities, self.inter_trips.clone())
    }

    pub fn to_file(&self) -> WorldFile {
        let cal = self.calendar;
        WorldFile {
            start_date: cal.render_date(),
            seed: self.seed,
            cities: self
                .cities
                .iter()
                .map(|c| CityFile {
                    name: c.name.clone(),
                    places: c
                        .places
                        .iter()
                        .map(|p| PlaceFile {
                            name: p.name.clone(),
                            kind: p.kind,
                            opening_windows: p
                                .opening_windows
                                .iter()
                                .map(|w| [cal.render(w.start), cal.render(w.end)])
                                .collect(),
                            min_visit_minutes: p.min_visit_minutes,
                            visit_price: p.visit_price,
                            default_start: p.default_start,
                        })
                        .collect(),
                    intra_routes: c
                        .intra_routes
                        .iter()
                        .map(|r| RouteFile {
                            origin: r.origin.clone(),
                            destination: r.destination.clone(),
                            duration_minutes: r.duration_minutes,
                            price: r.price,
                        })
                        .collect(),
                })
                .collect(),
            inter_trips: self
                .inter_trips
                .iter()
                .map(|t| TripFile {
                    ticket_id: t.ticket_id.clone(),
                    origin_city: t.origin_city.clone(),
                    dest_city: t.dest_city.clone(),
                    depart: cal.render(t.depart),
                    arrive: cal.render(t.arrive),
                    price: t.price,
                    capacity_available: t.capacity_available,
                })
                .collect(),
        }
    }

    pub fn from_file(file: WorldFile) -> Result<World, WorldError> {
        let cal = Calendar::parse_date(&file.start_date)?;
        let mut cities = Vec::with_capacity(file.cities.len());
        for c in file.cities {
            let mut places = Vec::with_capacity(c.places.len());
            for p in c.places {
                let opening_windows = p
                    .opening_windows
                    .iter()
                    .map(|[a, b]| Ok(Window::new(cal.parse(a)?, cal.parse(b)?)))
                    .collect::<Result<Vec<_>, TimeError>>()?;
                places.push(Place {
                    name: p.name,
                    kind: p.kind,
                    opening_windows,
                    min_visit_minutes: p.min_visit_minutes,
                    visit_price: p.visit_price,
                    default_start: p.default_start,
                });
            }
            let intra_routes = c
                .intra_routes
                .into_iter()
                .map(|r| IntraRoute {
                    origin: r.origin,
                    destination: r.destination,
                    duration_minutes: r.duration_minutes,
                    price: r.price,
                })
                .collect();
            cities.push(City { name: c.name, places, intra_routes });
        }
        let trips = file
            .inter_trips
            .into_iter()
            .map(|t| {
                Ok(InterCityTrip {
                    depart: cal.parse(&t.depart)?,
                    arrive: cal.parse(&t.arrive)?,
                    ticket_id: t.ticket_id,
                    origin_city: t.origin_city,
                    dest_city: t.dest_city,
                    price: t.price,
                    capacity_available: t.capacity_available,
                })
            })
            .collect::<Result<Vec<_>, TimeError>>()?;
        World::new(cal, file.seed, cities, trips)
    }

    pub fn from_json_str(s: &str) -> Result<World, WorldError> {
        World::from_file(serde_json::from_str(s)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("world serializes")
    }
}

/// Reads and validates a world JSON file.
pub fn load_world(path: impl AsRef<Path>) -> Result<World, WorldError> {
    let text = std::fs::read_to_string(path)?;
    World::from_json_str(&text)
}

fn validate(cities: &[City], trips: &[InterCityTrip]) -> Vec<Defect> {
    let mut defects = Vec::new();
    let mut city_names = HashSet::new();
    for city in cities {
        if !is_valid_name(&city.name) {
            defects.push(Defect::InvalidName(city.name.clone()));
        }
        if !city_names.insert(city.name.as_str()) {
            defects.push(Defect::DuplicateCity(city.name.clone()));
        }
        let mut place_names = HashSet::new();
        for p in &city.places {
            let bad = |reason: &str| Defect::BadPlace {
                city: city.name.clone(),
                place: p.name.clone(),
                reason: reason.to_string(),
            };
            if !is_valid_name(&p.name) {
                defects.push(Defect::InvalidName(p.name.clone()));
            }
            if !place_names.insert(p.name.as_str()) {
                defects.push(Defect::DuplicatePlace {
                    city: city.name.clone(),
                    place: p.name.clone(),
                });
            }
            if p.is_attraction() {
                if p.min_visit_minutes == 0 {
                    defects.push(bad("attraction needs a positive minimum visit"));
                }
            } else if !p.opening_windows.is_empty() {
                defects.push(bad("only attractions have opening windows"));
            }
            if p.opening_windows.iter().any(|w| w.is_empty()) {
                defects.push(bad("empty opening window"));
            }
            if p.opening_windows.windows(2).any(|w| w[0].end >= w[1].start) {
                defects.push(bad("opening windows must be sorted and disjoint"));
            }
        }
        let starts = city.places.iter().filter(|p| p.default_start).count();
        if starts != 1 {
            defects.push(Defect::StartPlaceCount { city: city.name.clone(), count: starts });
        }
        let mut pairs = HashSet::new();
        for r in &city.intra_routes {
            let bad = |reason: &str| Defect::BadRoute {
                city: city.name.clone(),
                origin: r.origin.clone(),
                destination: r.destination.clone(),
                reason: reason.to_string(),
            };
            if r.origin == r.destination {
                defects.push(bad("origin equals destination"));
            }
            if r.duration_minutes == 0 {
                defects.push(bad("duration must be at least one minute"));
            }
            for end in [&r.origin, &r.destination] {
                if !place_names.contains(end.as_str()) {
                    defects.push(bad(&format!("unknown place `{end}`")));
                }
            }
            if !pairs.insert((r.origin.as_str(), r.destination.as_str())) {
                defects.push(bad("duplicate route"));
            }
        }
    }
    let mut tickets = HashSet::new();
    for t in trips {
        let bad = |reason: String| Defect::BadTrip { ticket: t.ticket_id.clone(), reason };
        if !is_valid_name(&t.ticket_id) {
            defects.push(Defect::InvalidName(t.ticket_id.clone()));
        }
        if !tickets.insert(t.ticket_id.as_str()) {
            defects.push(Defect::DuplicateTicket(t.ticket_id.clone()));
        }
        if t.depart >= t.arrive {
            defects.push(bad("departure is not before arrival".into()));
        }
        if t.origin_city == t.dest_city {
            defects.push(bad("origin city equals destination city".into()));
        }
        for c in [&t.origin_city, &t.dest_city] {
            if !city_names.contains(c.as_str()) {
                defects.push(bad(format!("unknown city `{c}`")));
            }
        }
    }
    defects
}

// ---- file form ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldFile {
    pub start_date: String,
    #[serde(default)]
    pub seed: u64,
    pub cities: Vec<CityFile>,
    pub inter_trips: Vec<TripFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CityFile {
    pub name: String,
    pub places: Vec<PlaceFile>,
    #[serde(default)]
    pub intra_routes: Vec<RouteFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaceFile {
    pub name: String,
    pub kind: PlaceKind,
    #[serde(default)]
    pub opening_windows: Vec<[String; 2]>,
    #[serde(default)]
    pub min_visit_minutes: u32,
    #[serde(default)]
    pub visit_price: Money,
    #[serde(default)]
    pub default_start: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteFile {
    pub origin: String,
    pub destination: String,
    pub duration_minutes: u32,
    pub price: Money,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripFile {
    pub ticket_id: String,
    pub origin_city: String,
    pub dest_city: String,
    pub depart: String,
    pub arrive: String,
    pub price: Money,
    #[serde(default = "yes")]
    pub capacity_available: bool,
}

fn yes() -> bool {
    true
}
