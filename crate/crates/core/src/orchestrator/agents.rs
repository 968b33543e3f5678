//! Agents answer one subtask at a time with a partial itinerary.

use thiserror::Error;

use crate::itinerary::Itinerary;
use crate::solver::{solve_exact, solve_heuristic_evals};
use crate::task::Task;
use crate::world::World;

use super::{stale_view, SubtaskContext};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AgentReply {
    pub itinerary: Itinerary,
    pub summary: Option<String>,
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("agent i/o failed: {0}")]
    Io(#[from] std::io::Error),
}

pub trait Agent {
    fn execute(&mut self, ctx: &SubtaskContext) -> Result<AgentReply, AgentError>;
}

/// Plans with the exact search, falling back to the heuristic when the
/// node budget runs out. Sees only the stale world view.
pub struct SolverAgent {
    view: World,
    task: Task,
    pub node_budget: u64,
    pub heuristic_evals: u64,
    pub seed: u64,
}

impl SolverAgent {
    pub const NODE_BUDGET: u64 = 200_000;

    pub fn new(world: &World, task: &Task) -> SolverAgent {
        SolverAgent {
            view: stale_view(world),
            task: task.public_view(),
            node_budget: Self::NODE_BUDGET,
            heuristic_evals: crate::solver::HEURISTIC_EVALS,
            seed: 0,
        }
    }
}

impl Agent for SolverAgent {
    fn execute(&mut self, ctx: &SubtaskContext) -> Result<AgentReply, AgentError> {
        let p = ctx.problem(&self.view, &self.task);
        let mut s = solve_exact(&p, self.node_budget);
        if !s.is_valid() {
            s = solve_heuristic_evals(&p, self.heuristic_evals, 0, self.seed);
        }
        let itinerary = if s.is_valid() { s.itinerary } else { Itinerary::default() };
        Ok(AgentReply { itinerary, summary: None })
    }
}

/// Drops the final action of every answer from the wrapped agent.
pub struct Impaired<A> {
    pub inner: A,
}

impl<A: Agent> Agent for Impaired<A> {
    fn execute(&mut self, ctx: &SubtaskContext) -> Result<AgentReply, AgentError> {
        let mut r = self.inner.execute(ctx)?;
        r.itinerary.actions.pop();
        Ok(r)
    }
}
