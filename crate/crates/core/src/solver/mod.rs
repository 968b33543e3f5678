//! Itinerary construction: an exhaustive search for small instances, a
//! seeded local-search heuristic and a randomized sampler of valid plans.
//!
//! All three share one timeline model. Plans visit every required city once,
//! move between places over paths of at most two routes, and start every
//! action at the earliest moment the task's windows allow. Every returned plan
//! is re-simulated before it is reported as feasible.

mod exact;
mod model;
mod search;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::itinerary::Itinerary;
use crate::simulator::{simulate_with, SimState, Trace};
use crate::task::{AttractionTarget, CityTarget, Constraint, Task, TaskType};
use crate::time::TimePoint;
use crate::world::World;

pub use exact::solve_exact;
pub use search::{sample_up_to, sample_valid, solve_heuristic, solve_heuristic_evals, HEURISTIC_EVALS};

/// Default node budget for [`solve_exact`].
pub const DEFAULT_NODE_BUDGET: u64 = 2_000_000;

/// Which `stay_in` actions a plan may contain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StayPolicy {
    /// No stays at all.
    None,
    /// One closing stay in the last city.
    FinalOnly,
    /// A stay in every city reached by trip, plus the closing one.
    All,
}

impl StayPolicy {
    pub fn for_type(t: TaskType) -> StayPolicy {
        match t {
            TaskType::InterCity => StayPolicy::All,
            TaskType::IntraCity => StayPolicy::None,
            TaskType::Combined => StayPolicy::FinalOnly,
        }
    }
}

/// Where a plan has to finish, and by when.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EndRequirement {
    pub place: String,
    pub by: Option<TimePoint>,
}

#[derive(Debug, Clone)]
pub struct PlanProblem<'a> {
    pub world: &'a World,
    pub task: &'a Task,
    pub frontier: SimState,
    /// Cities to reach, other than the frontier city.
    pub cities: Vec<CityTarget>,
    pub attractions: Vec<AttractionTarget>,
    pub constraints: Vec<Constraint>,
    /// Tickets the plan may not use.
    pub excluded: BTreeSet<String>,
    pub stays: StayPolicy,
    pub end: Option<EndRequirement>,
}

impl<'a> PlanProblem<'a> {
    /// The whole task from its start state.
    pub fn for_task(world: &'a World, task: &'a Task) -> PlanProblem<'a> {
        PlanProblem {
            world,
            task,
            frontier: SimState::at_start(task),
            cities: task.targets.cities.clone(),
            attractions: task.targets.attractions.clone(),
            constraints: task.constraints.clone(),
            excluded: BTreeSet::new(),
            stays: StayPolicy::for_type(task.task_type),
            end: None,
        }
    }

    /// Simulates `it` from the frontier against the problem's constraints.
    pub fn verify(&self, it: &Itinerary) -> Trace {
        simulate_with(self.world, self.task, self.frontier.clone(), it, &self.constraints)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    Feasible,
    Infeasible,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Solution {
    pub itinerary: Itinerary,
    pub objective_value: u64,
    pub status: Status,
}

impl Solution {
    pub fn is_valid(&self) -> bool {
        matches!(self.status, Status::Optimal | Status::Feasible)
    }

    fn none(status: Status) -> Solution {
        Solution { itinerary: Itinerary::default(), objective_value: 0, status }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SolveError {
    #[error("problem names unknown cities or places")]
    Malformed,
    #[error("found only {got} of {needed} distinct valid itineraries")]
    Insufficient { got: usize, needed: usize },
}

/// Downgrades a solution that fails re-simulation.
fn checked(p: &PlanProblem<'_>, s: Solution) -> Solution {
    if s.is_valid() && !p.verify(&s.itinerary).fully_valid() {
        debug_assert!(false, "solver produced an invalid plan:\n{:?}", s.itinerary);
        return Solution::none(Status::Infeasible);
    }
    s
}

#[cfg(test)]
mod tests;
