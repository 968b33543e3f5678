//! Greedy decoding with local search, and randomized sampling of valid plans.
//!
//! A decoder walks the timeline making one choice at a time (next
//! attraction, next city, path, trip). A [`Chooser`] answers those choices:
//! a gene vector for the heuristic, a seeded RNG for the sampler.

use std::collections::BTreeSet;

use rand::Rng as _;

use crate::itinerary::{render_itinerary, Itinerary};
use crate::rng::{derived_rng, stream, Rng};

use super::model::{mask_items, Model, Node};
use super::{checked, PlanProblem, Solution, SolveError, Status};

pub(crate) trait Chooser {
    /// Picks one of `n > 0` options of the given kind.
    fn pick(&mut self, kind: Choice, n: usize) -> usize;
    fn delay(&mut self) -> u32 {
        0
    }
    fn extra_visit(&mut self) -> u32 {
        0
    }
    fn extra_stay(&mut self) -> u32 {
        0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Choice {
    Attraction = 0,
    Stop = 1,
    Path = 2,
    Trip = 3,
}

fn sorted(m: &Model<'_>, mut v: Vec<Node>) -> Vec<Node> {
    v.sort_by_key(|n| m.prefer(n));
    v
}

/// True when a pending hotel check can still be met from `n`.
fn hotel_reachable(m: &Model<'_>, n: &Node) -> bool {
    let Some(c) = m.next_check(n) else { return true };
    if c.city != m.city(n) {
        return true;
    }
    match m.shortest_minutes(n, &c.hotel) {
        Some(d) => n.clock + d <= c.at,
        None => false,
    }
}

/// Options for walking to `place`, one per path, best first.
fn reach(m: &Model<'_>, n: &Node, place: &str, ch: &mut dyn Chooser) -> Vec<Node> {
    let mut opts = Vec::new();
    for path in m.paths(n, place) {
        let mut d = || ch.delay();
        if let Some(w) = m.walk(n, &path, &mut d) {
            opts.push(w);
        }
    }
    sorted(m, opts)
}

fn go_hotel(m: &Model<'_>, n: &Node, ch: &mut dyn Chooser) -> Option<Node> {
    let hotel = m.hotel_for(n)?.to_string();
    if n.place == hotel {
        return None;
    }
    let opts = reach(m, n, &hotel, ch);
    if opts.is_empty() {
        return None;
    }
    let k = ch.pick(Choice::Path, opts.len());
    opts.into_iter().nth(k)
}

fn visit_options(m: &Model<'_>, n: &Node, a: usize, ch: &mut dyn Chooser) -> Vec<Node> {
    let place = m.stops[n.cur].attractions[a].0.clone();
    let mut out = Vec::new();
    for w in reach(m, n, &place, ch) {
        let (d, x) = (ch.delay(), ch.extra_visit());
        if let Some(v) = m.visit(&w, a, d, x) {
            if hotel_reachable(m, &v) {
                out.push(v);
            }
        }
    }
    sorted(m, out)
}

fn trip_options(m: &Model<'_>, n: &Node, to: usize, ch: &mut dyn Chooser) -> Vec<Node> {
    let station = m.station(n.cur).to_string();
    let mut out = Vec::new();
    for at in reach(m, n, &station, ch) {
        for t in m.trip_options(&at, to) {
            if let Some(x) = m.trip(&at, t, to) {
                out.push(x);
            }
        }
    }
    sorted(m, out)
}

/// Runs one decode; `None` when the choices lead nowhere.
pub(crate) fn decode(m: &Model<'_>, ch: &mut dyn Chooser) -> Option<Node> {
    let mut n = m.root()?;
    loop {
        while n.left != 0 {
            let items = mask_items(n.left);
            let a = items[ch.pick(Choice::Attraction, items.len())];
            let mut opts = visit_options(m, &n, a, ch);
            if opts.is_empty() {
                n = go_hotel(m, &n, ch)?;
                opts = visit_options(m, &n, a, ch);
            }
            if opts.is_empty() {
                return None;
            }
            let k = ch.pick(Choice::Path, opts.len());
            n = opts.swap_remove(k);
        }
        let open: Vec<usize> = (1..m.stops.len()).filter(|&j| n.done & (1u64 << j) == 0).collect();
        if open.is_empty() {
            break;
        }
        let to = open[ch.pick(Choice::Stop, open.len())];
        let mut opts = trip_options(m, &n, to, ch);
        if opts.is_empty() {
            n = go_hotel(m, &n, ch)?;
            opts = trip_options(m, &n, to, ch);
        }
        if opts.is_empty() {
            return None;
        }
        let k = ch.pick(Choice::Trip, opts.len());
        n = opts.swap_remove(k);
    }
    if m.hotel_for(&n).is_some_and(|h| h != n.place) {
        n = go_hotel(m, &n, ch)?;
    }
    let extra = ch.extra_stay();
    n = m.final_stay(&n, extra).or_else(|| m.final_stay(&n, 0))?;
    if let Some(end) = m.end_place.clone() {
        let opts = reach(m, &n, &end, ch);
        if opts.is_empty() {
            return None;
        }
        let k = ch.pick(Choice::Path, opts.len());
        n = opts.into_iter().nth(k)?;
    }
    m.complete(&n).then_some(n)
}

// ---- heuristic ----

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Genome {
    genes: [Vec<u8>; 4],
}

struct GeneChooser<'g> {
    g: &'g Genome,
    pos: [usize; 4],
}

impl Chooser for GeneChooser<'_> {
    fn pick(&mut self, kind: Choice, n: usize) -> usize {
        let k = kind as usize;
        let v = self.g.genes[k].get(self.pos[k]).copied().unwrap_or(0) as usize;
        self.pos[k] += 1;
        v % n
    }
}

struct Heuristic<'m, 'a> {
    m: &'m Model<'a>,
    evals: u64,
    budget: u64,
    best: Option<(u64, usize, String, Node)>,
    #[cfg(not(target_arch = "wasm32"))]
    deadline: Option<std::time::Instant>,
}

impl Heuristic<'_, '_> {
    fn out_of_budget(&self) -> bool {
        #[cfg(not(target_arch = "wasm32"))]
        if self.deadline.is_some_and(|d| std::time::Instant::now() >= d) {
            return true;
        }
        self.evals >= self.budget
    }

    /// Objective of a genome, or `None` when it decodes to nothing.
    fn eval(&mut self, g: &Genome) -> Option<u64> {
        self.evals += 1;
        let mut ch = GeneChooser { g, pos: [0; 4] };
        let n = decode(self.m, &mut ch)?;
        let obj = self.m.objective(&n);
        let text = render_itinerary(&Itinerary::new(n.actions.clone()), &self.m.calendar);
        let key = (obj, n.actions.len(), text);
        if self.best.as_ref().is_none_or(|(o, l, t, _)| key < (*o, *l, t.clone())) {
            self.best = Some((key.0, key.1, key.2, n));
        }
        Some(obj)
    }

    /// First-improvement hill climbing over single-gene changes.
    fn climb(&mut self, mut g: Genome, mut cur: u64) {
        loop {
            let mut improved = false;
            'scan: for k in 0..4 {
                let len = g.genes[k].len().max(1) + 1;
                for i in 0..len {
                    for v in 0..4u8 {
                        if self.out_of_budget() {
                            return;
                        }
                        let mut h = g.clone();
                        if h.genes[k].len() <= i {
                            h.genes[k].resize(i + 1, 0);
                        }
                        if h.genes[k][i] == v {
                            continue;
                        }
                        h.genes[k][i] = v;
                        if let Some(o) = self.eval(&h) {
                            if o < cur {
                                g = h;
                                cur = o;
                                improved = true;
                                break 'scan;
                            }
                        }
                    }
                }
            }
            if !improved {
                return;
            }
        }
    }
}

/// Evaluation budget used by [`solve_heuristic`].
pub const HEURISTIC_EVALS: u64 = 3_000;

/// Greedy construction then local search, with seeded random restarts.
/// `time_budget_ms` is only a safety cap; the evaluation budget decides
/// the result, so output is deterministic for a fixed seed.
pub fn solve_heuristic(problem: &PlanProblem<'_>, time_budget_ms: u64, seed: u64) -> Solution {
    solve_heuristic_evals(problem, HEURISTIC_EVALS, time_budget_ms, seed)
}

pub fn solve_heuristic_evals(problem: &PlanProblem<'_>, evals: u64, time_budget_ms: u64, seed: u64) -> Solution {
    let Some(m) = Model::compile(problem) else { return Solution::none(Status::Infeasible) };
    let _ = time_budget_ms;
    let mut h = Heuristic {
        m: &m,
        evals: 0,
        budget: evals.max(1),
        best: None,
        #[cfg(not(target_arch = "wasm32"))]
        deadline: (time_budget_ms > 0)
            .then(|| std::time::Instant::now() + std::time::Duration::from_millis(time_budget_ms)),
    };
    let mut rng = derived_rng(seed, stream::HEURISTIC, 0);
    let mut g = Genome::default();
    let mut restarts = 0u64;
    while !h.out_of_budget() {
        if let Some(o) = h.eval(&g) {
            h.climb(g.clone(), o);
        }
        restarts += 1;
        g = Genome {
            genes: std::array::from_fn(|_| (0..8).map(|_| rng.gen_range(0..4u8)).collect()),
        };
        if restarts > evals {
            break;
        }
    }
    let sol = match h.best {
        Some((obj, _, _, n)) => {
            Solution { itinerary: Itinerary::new(n.actions), objective_value: obj, status: Status::Feasible }
        }
        None => Solution::none(Status::Infeasible),
    };
    checked(problem, sol)
}

// ---- sampler ----

struct RandomChooser<'r> {
    rng: &'r mut Rng,
}

impl Chooser for RandomChooser<'_> {
    fn pick(&mut self, _: Choice, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }
    fn delay(&mut self) -> u32 {
        if self.rng.gen_bool(0.6) {
            0
        } else {
            5 * self.rng.gen_range(1..=12)
        }
    }
    fn extra_visit(&mut self) -> u32 {
        if self.rng.gen_bool(0.6) {
            0
        } else {
            5 * self.rng.gen_range(1..=6)
        }
    }
    fn extra_stay(&mut self) -> u32 {
        if self.rng.gen_bool(0.5) {
            0
        } else {
            5 * self.rng.gen_range(1..=24)
        }
    }
}

/// `n` distinct valid plans from randomized decodes, each re-simulated.
/// Attempt `i` draws from its own stream so results do not depend on how
/// attempts are scheduled.
pub fn sample_valid(problem: &PlanProblem<'_>, n: usize, seed: u64) -> Result<Vec<Solution>, SolveError> {
    let out = sample_up_to(problem, n, seed)?;
    if out.len() < n {
        return Err(SolveError::Insufficient { got: out.len(), needed: n });
    }
    Ok(out)
}

/// Like [`sample_valid`] but returns however many plans were found.
pub fn sample_up_to(problem: &PlanProblem<'_>, n: usize, seed: u64) -> Result<Vec<Solution>, SolveError> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let m = Model::compile(problem).ok_or(SolveError::Malformed)?;
    let attempts = (50 * n).max(200);
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(n);
    for i in 0..attempts as u64 {
        let mut rng = derived_rng(seed, stream::SAMPLE, i);
        let mut ch = RandomChooser { rng: &mut rng };
        let Some(node) = decode(&m, &mut ch) else { continue };
        let it = Itinerary::new(node.actions.clone());
        let text = render_itinerary(&it, &m.calendar);
        if seen.contains(&text) {
            continue;
        }
        if !problem.verify(&it).fully_valid() {
            debug_assert!(false, "sampler produced an invalid plan:\n{text}");
            continue;
        }
        seen.insert(text);
        out.push(Solution { objective_value: m.objective(&node), itinerary: it, status: Status::Feasible });
        if out.len() == n {
            break;
        }
    }
    Ok(out)
}
