//! Compiled planning model and the timeline primitives shared by the exact
//! search, the heuristic and the sampler.
//!
//! A partial plan is a [`Node`]: where the traveler is, the clock, money
//! spent and the actions so far. Every primitive appends actions at the
//! earliest start that keeps all window, rest and hotel rules intact.

use std::collections::{BTreeMap, BTreeSet};

use crate::itinerary::Action;
use crate::simulator::SimState;
use crate::task::{Constraint, Objective};
use crate::time::{Calendar, TimePoint, Window};
use crate::world::{InterCityTrip, Money, TransportMode, World};

use super::{PlanProblem, StayPolicy};

#[derive(Debug, Clone)]
pub(crate) struct Hop {
    pub from: String,
    pub to: String,
    pub minutes: u32,
    pub price: Money,
}

pub(crate) type Path = Vec<Hop>;

#[derive(Debug, Clone)]
pub(crate) struct Stop {
    pub city: String,
    pub stay: u32,
    /// (place, minutes needed, price)
    pub attractions: Vec<(String, u32, Money)>,
}

#[derive(Debug, Clone)]
pub(crate) struct Check {
    pub at: TimePoint,
    pub city: String,
    pub hotel: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Kind {
    Leg,
    Visit,
    Trip,
    Stay,
}

#[derive(Debug, Clone)]
pub(crate) struct Node {
    pub cur: usize,
    pub place: String,
    pub clock: TimePoint,
    pub spent: Money,
    pub arrived: TimePoint,
    /// Attractions of the current stop still to visit.
    pub left: u64,
    /// Stops already left behind (or the current one once entered).
    pub done: u64,
    pub actions: Vec<Action>,
}

pub(crate) struct Model<'a> {
    pub world: &'a World,
    pub calendar: Calendar,
    pub objective: Objective,
    pub origin: TimePoint,
    pub deadline: TimePoint,
    pub end_place: Option<String>,
    pub budget: Option<Money>,
    pub mode: Option<TransportMode>,
    pub activity: Vec<Vec<Window>>,
    pub rest: Vec<Window>,
    pub opening: BTreeSet<(String, String)>,
    pub checks: Vec<Check>,
    pub stops: Vec<Stop>,
    pub stays: StayPolicy,
    pub excluded: BTreeSet<String>,
    pub start: SimState,
    paths: BTreeMap<(String, String, String), Vec<Path>>,
}

fn bits(mask: u64) -> impl Iterator<Item = usize> {
    (0..64).filter(move |i| mask & (1u64 << i) != 0)
}

pub(crate) fn mask_items(mask: u64) -> Vec<usize> {
    bits(mask).collect()
}

impl<'a> Model<'a> {
    /// Compiles a problem; `None` when it names unknown cities or places or
    /// exceeds the representable size.
    pub fn compile(p: &PlanProblem<'a>) -> Option<Model<'a>> {
        let world = p.world;
        let task = p.task;
        let here = p.frontier.current_city.clone();
        world.city(&here)?;
        let mut deadline = task.horizon;
        let mut budget: Option<Money> = None;
        let mut mode = None;
        let mut activity = Vec::new();
        let mut rest = Vec::new();
        let mut opening = BTreeSet::new();
        let mut checks = Vec::new();
        let mut stays: BTreeMap<String, u32> = BTreeMap::new();
        let mut needs: BTreeMap<(String, String), u32> = BTreeMap::new();
        let mut city_order: Vec<String> = Vec::new();
        let note_city = |c: &str, order: &mut Vec<String>| {
            if c != here && !order.iter().any(|x| x == c) {
                order.push(c.to_string());
            }
        };
        for t in &p.cities {
            note_city(&t.city, &mut city_order);
            let e = stays.entry(t.city.clone()).or_default();
            *e = (*e).max(t.min_stay_minutes);
        }
        for a in &p.attractions {
            note_city(&a.city, &mut city_order);
            let e = needs.entry((a.city.clone(), a.place.clone())).or_default();
            *e = (*e).max(a.min_visit_minutes);
        }
        for c in &p.constraints {
            match c {
                Constraint::TimeLimit { deadline: d } => deadline = deadline.min(*d),
                Constraint::Budget { max } => budget = Some(budget.map_or(*max, |b: Money| b.min(*max))),
                Constraint::Transportation { mode: m } => {
                    if mode.is_some_and(|x| x != *m) {
                        return None;
                    }
                    mode = Some(*m);
                }
                Constraint::CityDuration { city, min_minutes } => {
                    note_city(city, &mut city_order);
                    let e = stays.entry(city.clone()).or_default();
                    *e = (*e).max(*min_minutes);
                }
                Constraint::SpotDuration { city, place, min_minutes } => {
                    note_city(city, &mut city_order);
                    let e = needs.entry((city.clone(), place.clone())).or_default();
                    *e = (*e).max(*min_minutes);
                }
                Constraint::SpecificHotel { city, hotel, check_times } => {
                    for &at in check_times {
                        checks.push(Check { at, city: city.clone(), hotel: hotel.clone() });
                    }
                }
                Constraint::ActivityTime { windows } => activity.push(windows.clone()),
                Constraint::SpotOpeningHours { city, place } => {
                    opening.insert((city.clone(), place.clone()));
                }
                Constraint::RestTime { windows } => rest.extend(windows.iter().copied()),
            }
        }
        checks.sort_by_key(|c| c.at);
        if let Some(by) = p.end.as_ref().and_then(|e| e.by) {
            deadline = deadline.min(by);
        }
        let mut stop_cities = vec![here.clone()];
        stop_cities.extend(city_order);
        if stop_cities.len() > 63 {
            return None;
        }
        let mut stops = Vec::with_capacity(stop_cities.len());
        for c in &stop_cities {
            let rec = world.city(c)?;
            let mut attractions = Vec::new();
            for ((city, place), need) in &needs {
                if city == c {
                    let pl = rec.place(place).filter(|p| p.is_attraction())?;
                    attractions.push((place.clone(), (*need).max(pl.min_visit_minutes), pl.visit_price));
                }
            }
            // Keep the order targets were given in.
            let order = |name: &str| {
                p.attractions.iter().position(|a| a.city == *c && a.place == name).unwrap_or(usize::MAX)
            };
            attractions.sort_by_key(|(name, _, _)| order(name));
            if attractions.len() > 63 {
                return None;
            }
            stops.push(Stop { city: c.clone(), stay: stays.get(c).copied().unwrap_or(0), attractions });
        }
        let mut model = Model {
            world,
            calendar: task.calendar,
            objective: task.objective,
            origin: p.frontier.clock,
            deadline,
            end_place: p.end.as_ref().map(|e| e.place.clone()),
            budget,
            mode,
            activity,
            rest,
            opening,
            checks,
            stops,
            stays: p.stays,
            excluded: p.excluded.clone(),
            start: p.frontier.clone(),
            paths: BTreeMap::new(),
        };
        model.build_paths();
        Some(model)
    }

    fn build_paths(&mut self) {
        for stop in &self.stops {
            let Some(city) = self.world.city(&stop.city) else { continue };
            for a in &city.places {
                for b in &city.places {
                    if a.name == b.name {
                        continue;
                    }
                    let mut out: Vec<Path> = Vec::new();
                    let hop = |o: &str, d: &str| {
                        city.route(o, d).map(|r| Hop {
                            from: o.to_string(),
                            to: d.to_string(),
                            minutes: r.duration_minutes,
                            price: r.price,
                        })
                    };
                    if let Some(h) = hop(&a.name, &b.name) {
                        out.push(vec![h]);
                    }
                    for m in &city.places {
                        if m.name == a.name || m.name == b.name {
                            continue;
                        }
                        if let (Some(x), Some(y)) = (hop(&a.name, &m.name), hop(&m.name, &b.name)) {
                            out.push(vec![x, y]);
                        }
                    }
                    out.sort_by(|x, y| {
                        let key = |p: &Path| {
                            (
                                p.iter().map(|h| h.minutes).sum::<u32>(),
                                p.iter().map(|h| h.price).sum::<Money>(),
                                p.iter().map(|h| h.to.clone()).collect::<Vec<_>>(),
                            )
                        };
                        key(x).cmp(&key(y))
                    });
                    self.paths.insert((stop.city.clone(), a.name.clone(), b.name.clone()), out);
                }
            }
        }
    }

    pub fn city(&self, n: &Node) -> &str {
        &self.stops[n.cur].city
    }

    pub fn station(&self, stop: usize) -> &str {
        &self.world.city(&self.stops[stop].city).expect("compiled city").start_place().name
    }

    pub fn hotel_for(&self, n: &Node) -> Option<&str> {
        self.next_check(n).filter(|c| c.city == self.city(n)).map(|c| c.hotel.as_str())
    }

    pub fn next_check(&self, n: &Node) -> Option<&Check> {
        self.checks.iter().find(|c| c.at >= n.clock)
    }

    /// All ≤ 2-hop paths between two places of the current city, fastest
    /// first. Empty when `from == to`.
    pub fn paths(&self, n: &Node, to: &str) -> Vec<Path> {
        if n.place == to {
            return vec![Vec::new()];
        }
        self.paths
            .get(&(self.city(n).to_string(), n.place.clone(), to.to_string()))
            .cloned()
            .unwrap_or_default()
    }

    pub fn shortest_minutes(&self, n: &Node, to: &str) -> Option<u32> {
        if n.place == to {
            return Some(0);
        }
        self.paths
            .get(&(self.city(n).to_string(), n.place.clone(), to.to_string()))
            .and_then(|ps| ps.iter().map(|p| p.iter().map(|h| h.minutes).sum()).min())
    }

    pub fn root(&self) -> Option<Node> {
        let s = &self.start;
        let n = Node {
            cur: 0,
            place: s.current_place.clone(),
            clock: s.clock,
            spent: s.spent,
            arrived: s.clock,
            left: (1u64 << self.stops[0].attractions.len()) - 1,
            done: 1,
            actions: Vec::new(),
        };
        // Checks before the frontier see the frontier location.
        for c in self.checks.iter().filter(|c| c.at < s.clock) {
            if c.city != s.current_city || c.hotel != s.current_place {
                return None;
            }
        }
        if self.budget.is_some_and(|b| n.spent > b) || n.clock > self.deadline {
            return None;
        }
        Some(n)
    }

    /// Hotel checks for an action over `[s, e)` started from `n`.
    fn checks_ok(&self, n: &Node, s: TimePoint, e: TimePoint, activity: bool) -> bool {
        let city = self.city(n);
        for c in self.checks.iter().filter(|c| c.at >= n.clock && c.at < e) {
            let here = c.city == city && c.hotel == n.place;
            if !here || (activity && c.at > s) {
                return false;
            }
        }
        true
    }

    fn fits(&self, n: &Node, s: TimePoint, dur: u32, kind: Kind, opening: Option<&[Window]>) -> bool {
        let e = s + dur;
        if e > self.deadline || s < n.clock {
            return false;
        }
        if matches!(kind, Kind::Leg | Kind::Visit)
            && !self.activity.iter().all(|ws| ws.iter().any(|w| w.contains_span(s, e)))
        {
            return false;
        }
        if kind != Kind::Stay && self.rest.iter().any(|w| w.overlaps_span(s, e)) {
            return false;
        }
        if let Some(ws) = opening {
            if !ws.iter().any(|w| w.contains_span(s, e)) {
                return false;
            }
        }
        self.checks_ok(n, s, e, kind != Kind::Stay)
    }

    /// Earliest start `≥ from` for an action of `dur` minutes.
    fn earliest(&self, n: &Node, from: TimePoint, dur: u32, kind: Kind, opening: Option<&[Window]>) -> Option<TimePoint> {
        let mut cand = vec![from];
        if matches!(kind, Kind::Leg | Kind::Visit) {
            for ws in &self.activity {
                cand.extend(ws.iter().map(|w| w.start).filter(|&t| t > from));
            }
        }
        if kind != Kind::Stay {
            cand.extend(self.rest.iter().map(|w| w.end).filter(|&t| t > from));
        }
        if let Some(ws) = opening {
            cand.extend(ws.iter().map(|w| w.start).filter(|&t| t > from));
        }
        cand.extend(self.checks.iter().map(|c| c.at).filter(|&t| t > from));
        cand.sort_unstable();
        cand.dedup();
        cand.into_iter()
            .take_while(|&s| s + dur <= self.deadline)
            .find(|&s| self.fits(n, s, dur, kind, opening))
    }

    fn charge(&self, n: &mut Node, price: Money) -> bool {
        n.spent += price;
        self.budget.is_none_or(|b| n.spent <= b)
    }

    pub fn leg(&self, n: &Node, h: &Hop, delay: u32) -> Option<Node> {
        let s = self.earliest(n, n.clock + delay, h.minutes, Kind::Leg, None)?;
        let mut m = n.clone();
        if !self.charge(&mut m, h.price) {
            return None;
        }
        m.actions.push(Action::GoToPlace {
            origin: h.from.clone(),
            destination: h.to.clone(),
            depart: s,
            arrive: s + h.minutes,
        });
        m.place = h.to.clone();
        m.clock = s + h.minutes;
        Some(m)
    }

    pub fn walk(&self, n: &Node, path: &Path, delay: &mut dyn FnMut() -> u32) -> Option<Node> {
        let mut cur = n.clone();
        for h in path {
            cur = self.leg(&cur, h, delay())?;
        }
        Some(cur)
    }

    /// Visits attraction `idx` of the current stop; the traveler must be there.
    pub fn visit(&self, n: &Node, idx: usize, delay: u32, extra: u32) -> Option<Node> {
        let (place, need, price) = self.stops[n.cur].attractions[idx].clone();
        if n.place != place {
            return None;
        }
        let city = self.city(n).to_string();
        let rec = self.world.place(&city, &place)?;
        let opening = self.opening.contains(&(city, place.clone())).then_some(rec.opening_windows.as_slice());
        let dur = need + extra;
        let s = self.earliest(n, n.clock + delay, dur, Kind::Visit, opening)?;
        let mut m = n.clone();
        if !self.charge(&mut m, price) {
            return None;
        }
        m.actions.push(Action::Visit { place, begin: s, end: s + dur });
        m.clock = s + dur;
        m.left &= !(1u64 << idx);
        Some(m)
    }

    pub fn stay(&self, n: &Node, until: TimePoint) -> Option<Node> {
        if until <= n.clock {
            return Some(n.clone());
        }
        let dur = until.saturating_sub(n.clock);
        if !self.fits(n, n.clock, dur, Kind::Stay, None) {
            return None;
        }
        let mut m = n.clone();
        m.actions.push(Action::StayIn { city: self.city(n).to_string(), begin: n.clock, end: until });
        m.clock = until;
        Some(m)
    }

    /// Trips from the current city to stop `to` that could be taken now,
    /// sorted by departure.
    pub fn trip_options(&self, n: &Node, to: usize) -> Vec<&'a InterCityTrip> {
        let earliest = n.clock.max(n.arrived + self.stops[n.cur].stay);
        if earliest > self.deadline {
            return Vec::new();
        }
        self.world
            .query_trips(self.city(n), &self.stops[to].city, Window::new(earliest, self.deadline))
            .unwrap_or_default()
            .into_iter()
            .filter(|t| {
                t.capacity_available
                    && !self.excluded.contains(&t.ticket_id)
                    && self.mode.is_none_or(|m| t.mode() == m)
            })
            .collect()
    }

    /// Takes `trip` to stop `to`, emitting the stay before it when the
    /// policy asks for one. The traveler must be at the station.
    pub fn trip(&self, n: &Node, trip: &InterCityTrip, to: usize) -> Option<Node> {
        if n.place != self.station(n.cur) || n.done & (1u64 << to) != 0 || n.left != 0 {
            return None;
        }
        if trip.depart < n.arrived + self.stops[n.cur].stay {
            return None;
        }
        let mut m = n.clone();
        if self.stays == StayPolicy::All && n.cur != 0 && n.clock < trip.depart {
            m = self.stay(&m, trip.depart)?;
        }
        if !self.fits(&m, trip.depart, trip.duration(), Kind::Trip, None) {
            return None;
        }
        if !self.charge(&mut m, trip.price) {
            return None;
        }
        m.actions.push(Action::GoToCity {
            origin: trip.origin_city.clone(),
            destination: trip.dest_city.clone(),
            depart: trip.depart,
            arrive: trip.arrive,
            ticket: trip.ticket_id.clone(),
        });
        m.cur = to;
        m.place = self.station(to).to_string();
        m.clock = trip.arrive;
        m.arrived = trip.arrive;
        m.left = (1u64 << self.stops[to].attractions.len()) - 1;
        m.done |= 1u64 << to;
        Some(m)
    }

    pub fn all_done(&self, n: &Node) -> bool {
        n.left == 0 && n.done.count_ones() as usize == self.stops.len()
    }

    /// Final stay covering the last city's required presence, lengthened by
    /// `extra` minutes.
    pub fn final_stay(&self, n: &Node, extra: u32) -> Option<Node> {
        let need = n.arrived + self.stops[n.cur].stay;
        let until = need.max(n.clock) + extra;
        if until <= n.clock {
            return Some(n.clone());
        }
        if self.stays == StayPolicy::None {
            return None;
        }
        self.stay(n, until)
    }

    /// Whether `n` is a complete plan.
    pub fn complete(&self, n: &Node) -> bool {
        if !self.all_done(n) || n.clock > self.deadline {
            return false;
        }
        if n.arrived + self.stops[n.cur].stay > n.clock {
            return false;
        }
        if self.end_place.as_ref().is_some_and(|p| *p != n.place) {
            return false;
        }
        let city = self.city(n);
        self.checks.iter().filter(|c| c.at >= n.clock).all(|c| c.city == city && c.hotel == n.place)
    }

    pub fn objective(&self, n: &Node) -> u64 {
        match self.objective {
            Objective::CostCents => n.spent.cents(),
            Objective::TotalMinutes => u64::from(n.clock.saturating_sub(self.origin)),
        }
    }

    /// Lower bound on the objective of any completion of `n`.
    pub fn bound(&self, n: &Node) -> u64 {
        match self.objective {
            Objective::CostCents => {
                let mut b = n.spent.cents();
                for i in bits(n.left) {
                    b += self.stops[n.cur].attractions[i].2.cents();
                }
                for (j, s) in self.stops.iter().enumerate() {
                    if n.done & (1u64 << j) == 0 {
                        b += s.attractions.iter().map(|a| a.2.cents()).sum::<u64>();
                    }
                }
                b
            }
            Objective::TotalMinutes => {
                let need = n.arrived + self.stops[n.cur].stay;
                let t = if n.left == 0 && self.all_done(n) { need.max(n.clock) } else { n.clock };
                u64::from(t.saturating_sub(self.origin))
            }
        }
    }

    /// Preference key: the objective first, the other resource second.
    pub fn prefer(&self, n: &Node) -> (u64, u64) {
        match self.objective {
            Objective::CostCents => (n.spent.cents(), u64::from(n.clock.0)),
            Objective::TotalMinutes => (u64::from(n.clock.0), n.spent.cents()),
        }
    }
}
