//! Browser bindings: generate a task, plan it, score an edited itinerary.
//!
//! Everything crosses the boundary as JSON or itinerary text so the page can
//! keep its state in plain strings.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use tripbench::evaluator::{evaluate, objective_value, render2, Calibration};
use tripbench::itinerary::{parse_any, render_itinerary};
use tripbench::scenarios::{calibrate_task, generate_task, generate_world, ConstraintMix, GenParams};
use tripbench::solver::{solve_exact, solve_heuristic, PlanProblem, DEFAULT_NODE_BUDGET};
use tripbench::task::{Task, TaskType};
use tripbench::world::World;
use tripbench::simulate;

/// Samples behind the demo's efficiency band; kept small for the browser.
const DEMO_SAMPLES: usize = 10;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

fn load(world: &str, task: &str) -> Result<(World, Task), String> {
    Ok((World::from_json_str(world).map_err(err)?, Task::from_json_str(task).map_err(err)?))
}

#[derive(Serialize)]
struct Generated {
    world: String,
    task: String,
    prose: String,
    witness: String,
}

/// World and task for the given seeds; `task_type` is 1, 2 or 3.
#[wasm_bindgen]
pub fn generate(seed: u64, task_type: u8) -> Result<String, JsError> {
    js(generate_json(seed, task_type))
}

pub fn generate_json(seed: u64, task_type: u8) -> Result<String, String> {
    let tt = match task_type {
        1 => TaskType::InterCity,
        2 => TaskType::IntraCity,
        3 => TaskType::Combined,
        n => return Err(err(format!("unknown task type {n}"))),
    };
    let world = generate_world(&GenParams { seed, ..GenParams::default() }).map_err(err)?;
    let task = generate_task(&world, tt, seed, &ConstraintMix::default()).map_err(err)?;
    let witness = task.witness.as_ref().map(|w| render_itinerary(w, &task.calendar)).unwrap_or_default();
    let out = Generated {
        world: world.to_json_string(),
        task: task.to_json_string(),
        prose: task.prose.clone(),
        witness,
    };
    serde_json::to_string(&out).map_err(err)
}

/// Itinerary text from the exact solver, or the heuristic when `exact` is false.
#[wasm_bindgen]
pub fn solve(world: &str, task: &str, exact: bool, seed: u64) -> Result<String, JsError> {
    js(solve_text(world, task, exact, seed))
}

pub fn solve_text(world: &str, task: &str, exact: bool, seed: u64) -> Result<String, String> {
    let (w, t) = load(world, task)?;
    let p = PlanProblem::for_task(&w, &t);
    let s = if exact { solve_exact(&p, DEFAULT_NODE_BUDGET) } else { solve_heuristic(&p, 0, seed) };
    if !s.is_valid() {
        return Err(err(format!("no valid itinerary ({:?})", s.status)));
    }
    Ok(render_itinerary(&s.itinerary, &t.calendar))
}

#[derive(Serialize)]
struct Scored {
    l1: [usize; 2],
    l2: [usize; 2],
    s1: String,
    s2: String,
    s3: String,
    total: String,
    binary: bool,
    objective_value: u64,
    band: [String; 2],
    failures: Vec<String>,
}

/// Simulates `itinerary` and scores it against a small sampled band.
#[wasm_bindgen]
pub fn score(world: &str, task: &str, itinerary: &str, seed: u64) -> Result<String, JsError> {
    js(score_json(world, task, itinerary, seed))
}

pub fn score_json(world: &str, task: &str, itinerary: &str, seed: u64) -> Result<String, String> {
    let (w, t) = load(world, task)?;
    let it = parse_any(itinerary, &t.calendar).map_err(err)?;
    let trace = simulate(&w, &t, &it);
    let calib = match calibrate_task(&w, &t, DEMO_SAMPLES, seed) {
        Ok((c, _)) => c,
        Err(_) => {
            let v = t.witness.as_ref().map(|x| objective_value(&simulate(&w, &t, x), t.objective)).unwrap_or(0);
            Calibration::fixed(t.objective, v as i128, v as i128)
        }
    };
    let sc = evaluate(&trace, &t, &calib).map_err(err)?;
    let (a1, b1) = trace.l1();
    let (a2, b2) = trace.l2();
    let out = Scored {
        l1: [a1, b1],
        l2: [a2, b2],
        s1: render2(&sc.s1),
        s2: render2(&sc.s2),
        s3: render2(&sc.s3),
        total: render2(&sc.total),
        binary: sc.binary,
        objective_value: sc.objective_value,
        band: [render2(&calib.a), render2(&calib.b)],
        failures: trace.events.iter().map(|e| e.message.clone()).collect(),
    };
    serde_json::to_string(&out).map_err(err)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(json: &str, k: &str) -> serde_json::Value {
        serde_json::from_str::<serde_json::Value>(json).unwrap()[k].clone()
    }

    #[test]
    fn generate_solve_score() {
        let g = generate_json(4, 3).unwrap();
        let (w, t) = (field(&g, "world"), field(&g, "task"));
        let (w, t) = (w.as_str().unwrap(), t.as_str().unwrap());
        let plan = solve_text(w, t, true, 0).unwrap();
        let s = score_json(w, t, &plan, 1).unwrap();
        assert_eq!(field(&s, "binary"), true);
        assert_eq!(field(&s, "failures"), serde_json::json!([]));
        let mut lines: Vec<&str> = plan.lines().collect();
        lines.pop();
        let s = score_json(w, t, &lines.join("\n"), 1).unwrap();
        assert_eq!(field(&s, "s3"), "0.00");
    }

    #[test]
    fn errors_are_messages() {
        assert_eq!(generate_json(1, 7).unwrap_err(), "unknown task type 7");
        let g = generate_json(2, 2).unwrap();
        let (w, t) = (field(&g, "world"), field(&g, "task"));
        assert!(score_json(w.as_str().unwrap(), t.as_str().unwrap(), "not an action", 0).is_err());
        assert!(solve_text("{}", "{}", true, 0).is_err());
    }
}
