//! Travel-planning benchmark engine and dynamic task-decomposition orchestrator.
//!
//! The crate is organised bottom-up: [`world`] and [`itinerary`] define the
//! data, [`simulator`] executes plans, [`evaluator`] turns traces into gated
//! scores, [`solver`] builds valid plans, [`scenarios`] generates worlds and
//! tasks, [`orchestrator`] runs the decomposition loop and [`reporting`]
//! aggregates suite results.
//!
//! ```
//! use tripbench::evaluator::evaluate;
//! use tripbench::scenarios::{calibrate_task, generate_task, generate_world, ConstraintMix, GenParams};
//! use tripbench::solver::{solve_exact, PlanProblem, DEFAULT_NODE_BUDGET};
//! use tripbench::{simulate, TaskType};
//!
//! # fn main() -> Result<(), Box<dyn std::error::Error>> {
//! let world = generate_world(&GenParams { seed: 3, ..GenParams::default() })?;
//! let task = generate_task(&world, TaskType::Combined, 7, &ConstraintMix::default())?;
//! let plan = solve_exact(&PlanProblem::for_task(&world, &task), DEFAULT_NODE_BUDGET).itinerary;
//! let (calib, _samples) = calibrate_task(&world, &task, 50, 0)?;
//! let score = evaluate(&simulate(&world, &task, &plan), &task, &calib)?;
//! assert!(score.binary);
//! # Ok(())
//! # }
//! ```

pub mod evaluator;
pub mod itinerary;
pub mod orchestrator;
pub mod reporting;
pub mod rng;
pub mod scenarios;
pub mod simulator;
pub mod solver;
pub mod task;
pub mod time;
pub mod world;

pub use itinerary::{parse_itinerary, render_itinerary, Action, Itinerary};
pub use simulator::{simulate, Trace};
pub use task::{Constraint, Objective, Task, TaskType};
pub use time::{Calendar, TimePoint, Window};
pub use world::{load_world, Money, World};
