//! Depth-first branch and bound over city order, trip choice, attraction
//! order, paths and hotel returns.

use std::cmp::Ordering;

use crate::itinerary::{render_itinerary, Itinerary};

use super::model::{mask_items, Model, Node};
use super::{checked, PlanProblem, Solution, Status};

struct Search<'m, 'a> {
    m: &'m Model<'a>,
    nodes: u64,
    budget: u64,
    exhausted: bool,
    best: Option<(u64, Node)>,
}

fn no_delay() -> u32 {
    0
}

impl Search<'_, '_> {
    fn better(&self, obj: u64, n: &Node) -> bool {
        let Some((b, bn)) = &self.best else { return true };
        match obj.cmp(b).then(n.actions.len().cmp(&bn.actions.len())) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => {
                let cal = self.m.calendar;
                render_itinerary(&Itinerary::new(n.actions.clone()), &cal)
                    < render_itinerary(&Itinerary::new(bn.actions.clone()), &cal)
            }
        }
    }

    fn record(&mut self, n: Node) {
        if self.m.complete(&n) {
            let obj = self.m.objective(&n);
            if self.better(obj, &n) {
                self.best = Some((obj, n));
            }
        }
    }

    fn pruned(&self, n: &Node) -> bool {
        self.best.as_ref().is_some_and(|(b, _)| self.m.bound(n) > *b)
    }

    fn dfs(&mut self, n: Node) {
        self.nodes += 1;
        if self.nodes > self.budget {
            self.exhausted = false;
            return;
        }
        if self.pruned(&n) {
            return;
        }
        let m = self.m;
        if n.left != 0 {
            for a in mask_items(n.left) {
                let place = m.stops[n.cur].attractions[a].0.clone();
                for path in m.paths(&n, &place) {
                    if let Some(v) = m.walk(&n, &path, &mut no_delay).and_then(|w| m.visit(&w, a, 0, 0)) {
                        self.dfs(v);
                    }
                }
            }
        } else if m.all_done(&n) {
            self.finish(&n);
        } else {
            let station = m.station(n.cur).to_string();
            for to in 1..m.stops.len() {
                if n.done & (1u64 << to) != 0 {
                    continue;
                }
                for path in m.paths(&n, &station) {
                    let Some(at) = m.walk(&n, &path, &mut no_delay) else { continue };
                    let mut opts: Vec<Node> =
                        m.trip_options(&at, to).into_iter().filter_map(|t| m.trip(&at, t, to)).collect();
                    pareto(&mut opts);
                    for o in opts {
                        self.dfs(o);
                    }
                }
            }
        }
        if let Some(hotel) = m.hotel_for(&n).map(str::to_string) {
            if n.place != hotel {
                for path in m.paths(&n, &hotel) {
                    if let Some(h) = m.walk(&n, &path, &mut no_delay) {
                        self.dfs(h);
                    }
                }
            }
        }
    }

    fn finish(&mut self, n: &Node) {
        let m = self.m;
        let Some(s) = m.final_stay(n, 0) else { return };
        match m.end_place.clone() {
            None => self.record(s),
            Some(end) => {
                for path in m.paths(&s, &end) {
                    if let Some(e) = m.walk(&s, &path, &mut no_delay) {
                        self.record(e);
                    }
                }
            }
        }
    }
}

/// Keeps trips not dominated on (arrival, spend); first occurrence wins ties.
fn pareto(opts: &mut Vec<Node>) {
    let keep: Vec<bool> = opts
        .iter()
        .enumerate()
        .map(|(i, a)| {
            !opts.iter().enumerate().any(|(j, b)| {
                let le = b.clock <= a.clock && b.spent <= a.spent;
                let lt = b.clock < a.clock || b.spent < a.spent;
                le && (lt || j < i)
            })
        })
        .collect();
    let mut it = keep.iter();
    opts.retain(|_| *it.next().unwrap());
}

/// Objective-minimal plan within the search space, or the best found when
/// `node_budget` runs out.
pub fn solve_exact(problem: &PlanProblem<'_>, node_budget: u64) -> Solution {
    let Some(m) = Model::compile(problem) else { return Solution::none(Status::Infeasible) };
    let Some(root) = m.root() else { return Solution::none(Status::Infeasible) };
    let mut s = Search { m: &m, nodes: 0, budget: node_budget.max(1), exhausted: true, best: None };
    s.dfs(root);
    let sol = match (s.best, s.exhausted) {
        (Some((obj, n)), done) => Solution {
            itinerary: Itinerary::new(n.actions),
            objective_value: obj,
            status: if done { Status::Optimal } else { Status::Feasible },
        },
        (None, true) => Solution::none(Status::Infeasible),
        (None, false) => Solution::none(Status::Timeout),
    };
    checked(problem, sol)
}
