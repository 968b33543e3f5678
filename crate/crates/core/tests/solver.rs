mod common;

use common::{brute_force_optimum, oracle_instance};
use tripbench::scenarios::{generate_task, generate_world, ConstraintMix};
use tripbench::solver::{sample_valid, solve_exact, solve_heuristic, PlanProblem, Status, DEFAULT_NODE_BUDGET};
use tripbench::task::TaskType;
use tripbench::simulate;

#[test]
fn three_city_inter_city_matches_enumeration() {
    let mut checked = 0;
    for seed in 0..6 {
        let params = common::oracle_params(seed);
        let world = generate_world(&params).unwrap();
        let task = generate_task(&world, TaskType::InterCity, seed, &params.mix).unwrap();
        let s = solve_exact(&PlanProblem::for_task(&world, &task), DEFAULT_NODE_BUDGET);
        assert_eq!(s.status, Status::Optimal);
        assert_eq!(Some(s.objective_value), brute_force_optimum(&world, &task), "{}", task.id);
        checked += 1;
    }
    assert_eq!(checked, 6);
}

#[test]
fn mixed_instances_match_enumeration() {
    for i in 0..9 {
        let (world, task) = oracle_instance(i);
        let p = PlanProblem::for_task(&world, &task);
        let s = solve_exact(&p, DEFAULT_NODE_BUDGET);
        assert_eq!(Some(s.objective_value), brute_force_optimum(&world, &task), "{}", task.id);
        let h = solve_heuristic(&p, 0, i);
        assert!(h.objective_value >= s.objective_value);
        assert!(simulate(&world, &task, &h.itinerary).fully_valid());
    }
}

#[test]
fn samples_never_beat_an_exhausted_search() {
    let params = common::oracle_params(77);
    let world = generate_world(&params).unwrap();
    let task = generate_task(&world, TaskType::IntraCity, 3, &ConstraintMix::default()).unwrap();
    let p = PlanProblem::for_task(&world, &task);
    let best = solve_exact(&p, DEFAULT_NODE_BUDGET);
    assert_eq!(best.status, Status::Optimal);
    for s in sample_valid(&p, 50, 1).unwrap() {
        assert!(simulate(&world, &task, &s.itinerary).fully_valid());
        assert!(s.objective_value >= best.objective_value);
    }
}

#[test]
fn heuristic_is_usually_near_optimal() {
    let mut close = 0;
    for i in 0..50 {
        let (world, task) = oracle_instance(i);
        let p = PlanProblem::for_task(&world, &task);
        let best = solve_exact(&p, DEFAULT_NODE_BUDGET).objective_value;
        let h = solve_heuristic(&p, 0, i);
        assert!(h.is_valid(), "{}", task.id);
        close += usize::from(h.objective_value * 10 <= best * 11);
    }
    assert!(close >= 40, "{close}/50 within 10%");
}
