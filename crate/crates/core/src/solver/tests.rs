use super::*;
use crate::evaluator::{evaluate, Calibration};
use crate::itinerary::{render_itinerary, Action};
use crate::scenarios::{generate_task, generate_world, ConstraintMix, GenParams};
use crate::simulator::simulate;
use crate::task::{Objective, Start, Targets};
use crate::time::{Calendar, Window};
use crate::world::Money;

const WORLD: &str = r#"{
  "start_date": "07-01",
  "cities": [
    {"name": "Hangzhou", "places": [
        {"name": "Hangzhou Station", "kind": "station", "default_start": true},
        {"name": "West Lake", "kind": "attraction", "opening_windows": [["07-01 08:00", "07-01 18:00"], ["07-02 08:00", "07-02 18:00"]], "min_visit_minutes": 90, "visit_price": 0},
        {"name": "Lingyin Temple", "kind": "attraction", "opening_windows": [["07-01 07:00", "07-01 17:00"]], "min_visit_minutes": 60, "visit_price": 4500},
        {"name": "Closed Hall", "kind": "attraction", "opening_windows": [], "min_visit_minutes": 30, "visit_price": 0},
        {"name": "Lakeside Inn", "kind": "hotel"}
      ],
      "intra_routes": [
        {"origin": "Hangzhou Station", "destination": "West Lake", "duration_minutes": 20, "price": 300},
        {"origin": "West Lake", "destination": "Hangzhou Station", "duration_minutes": 20, "price": 300},
        {"origin": "West Lake", "destination": "Lingyin Temple", "duration_minutes": 15, "price": 200},
        {"origin": "Lingyin Temple", "destination": "West Lake", "duration_minutes": 15, "price": 200},
        {"origin": "Hangzhou Station", "destination": "Lingyin Temple", "duration_minutes": 45, "price": 900},
        {"origin": "Hangzhou Station", "destination": "Closed Hall", "duration_minutes": 10, "price": 100},
        {"origin": "West Lake", "destination": "Lakeside Inn", "duration_minutes": 5, "price": 0},
        {"origin": "Lakeside Inn", "destination": "West Lake", "duration_minutes": 5, "price": 0}
      ]},
    {"name": "Suzhou", "places": [
        {"name": "Suzhou Station", "kind": "station", "default_start": true}
      ],
      "intra_routes": []}
  ],
  "inter_trips": [
    {"ticket_id": "G100", "origin_city": "Hangzhou", "dest_city": "Suzhou", "depart": "07-01 07:00", "arrive": "07-01 08:30", "price": 9000},
    {"ticket_id": "G200", "origin_city": "Hangzhou", "dest_city": "Suzhou", "depart": "07-01 13:00", "arrive": "07-01 14:30", "price": 8000},
    {"ticket_id": "MU300", "origin_city": "Hangzhou", "dest_city": "Suzhou", "depart": "07-01 15:00", "arrive": "07-01 15:50", "price": 40000}
  ]
}"#;

fn world() -> World {
    World::from_json_str(WORLD).unwrap()
}

fn task(task_type: TaskType, objective: Objective, targets: Targets, constraints: Vec<Constraint>) -> Task {
    Task {
        id: "t".into(),
        task_type,
        calendar: Calendar::new(7, 1).unwrap(),
        start: Start { city: "Hangzhou".into(), place: "Hangzhou Station".into(), time: TimePoint::at(0, 8, 0) },
        horizon: TimePoint::at(2, 0, 0),
        objective,
        targets,
        constraints,
        prose: String::new(),
        witness: None,
    }
}

fn visit_target(place: &str, min: u32) -> (Targets, Vec<Constraint>) {
    let targets = Targets {
        cities: vec![],
        attractions: vec![AttractionTarget { city: "Hangzhou".into(), place: place.into(), min_visit_minutes: min }],
    };
    let cons = vec![
        Constraint::SpotDuration { city: "Hangzhou".into(), place: place.into(), min_minutes: min },
        Constraint::SpotOpeningHours { city: "Hangzhou".into(), place: place.into() },
    ];
    (targets, cons)
}

fn full_marks(w: &World, t: &Task, s: &Solution) {
    let trace = simulate(w, t, &s.itinerary);
    assert!(trace.fully_valid(), "{:?}", trace.items.iter().filter(|i| !i.passed).collect::<Vec<_>>());
    let score = evaluate(&trace, t, &Calibration::fixed(t.objective, 0, 1)).unwrap();
    assert_eq!(score.s1, 60.into());
    assert_eq!(score.s2, 20.into());
}

#[test]
fn single_city_stay_is_one_free_stay() {
    let w = world();
    let targets = Targets { cities: vec![CityTarget { city: "Hangzhou".into(), min_stay_minutes: 240 }], attractions: vec![] };
    let cons = vec![Constraint::CityDuration { city: "Hangzhou".into(), min_minutes: 240 }];
    let t = task(TaskType::InterCity, Objective::CostCents, targets, cons);
    let p = PlanProblem::for_task(&w, &t);
    for s in [solve_exact(&p, 10_000), solve_heuristic(&p, 0, 1)] {
        assert!(s.is_valid());
        assert_eq!(s.objective_value, 0);
        assert_eq!(
            s.itinerary.actions,
            vec![Action::StayIn { city: "Hangzhou".into(), begin: TimePoint::at(0, 8, 0), end: TimePoint::at(0, 12, 0) }]
        );
        full_marks(&w, &t, &s);
    }
}

#[test]
fn only_feasible_trip_is_chosen() {
    let w = world();
    let targets = Targets { cities: vec![CityTarget { city: "Suzhou".into(), min_stay_minutes: 60 }], attractions: vec![] };
    // G100 left before the start; the budget rules out the flight.
    let cons = vec![
        Constraint::CityDuration { city: "Suzhou".into(), min_minutes: 60 },
        Constraint::Budget { max: Money(10_000) },
    ];
    let t = task(TaskType::InterCity, Objective::TotalMinutes, targets, cons);
    let p = PlanProblem::for_task(&w, &t);
    let s = solve_exact(&p, 10_000);
    assert_eq!(s.status, Status::Optimal);
    let tickets: Vec<&str> = s
        .itinerary
        .iter()
        .filter_map(|a| match a {
            Action::GoToCity { ticket, .. } => Some(ticket.as_str()),
            _ => None,
        })
        .collect();
    assert_eq!(tickets, ["G200"]);
    assert_eq!(s.objective_value, (15 * 60 + 30 - 8 * 60) as u64);
    full_marks(&w, &t, &s);
    let h = solve_heuristic(&p, 0, 3);
    assert_eq!(h.itinerary, s.itinerary);
}

#[test]
fn excluded_ticket_forces_the_alternative() {
    let w = world();
    let targets = Targets { cities: vec![CityTarget { city: "Suzhou".into(), min_stay_minutes: 60 }], attractions: vec![] };
    let t = task(TaskType::InterCity, Objective::CostCents, targets, vec![]);
    let mut p = PlanProblem::for_task(&w, &t);
    p.excluded.insert("G200".into());
    let s = solve_exact(&p, 10_000);
    assert!(s.itinerary.iter().any(|a| matches!(a, Action::GoToCity { ticket, .. } if ticket == "MU300")));
    assert_eq!(s.objective_value, 40_000);
}

#[test]
fn closed_attraction_is_infeasible() {
    let w = world();
    let (targets, cons) = visit_target("Closed Hall", 30);
    let t = task(TaskType::IntraCity, Objective::CostCents, targets, cons);
    let p = PlanProblem::for_task(&w, &t);
    assert_eq!(solve_exact(&p, 10_000).status, Status::Infeasible);
    assert_eq!(solve_heuristic_evals(&p, 200, 0, 0).status, Status::Infeasible);
    assert_eq!(sample_valid(&p, 1, 0), Err(SolveError::Insufficient { got: 0, needed: 1 }));
}

#[test]
fn two_hop_path_can_beat_the_direct_route() {
    let w = world();
    let (targets, cons) = visit_target("Lingyin Temple", 60);
    let t = task(TaskType::IntraCity, Objective::CostCents, targets, cons);
    let s = solve_exact(&PlanProblem::for_task(&w, &t), 10_000);
    // Via West Lake: 300 + 200 + 4500 against 900 + 4500 direct.
    assert_eq!(s.objective_value, 5_000);
    assert_eq!(s.itinerary.len(), 3);
    full_marks(&w, &t, &s);
}

#[test]
fn rest_window_pushes_visit_later() {
    let w = world();
    let (targets, mut cons) = visit_target("West Lake", 90);
    cons.push(Constraint::RestTime { windows: vec![Window::new(TimePoint::at(0, 8, 0), TimePoint::at(0, 9, 0))] });
    let t = task(TaskType::IntraCity, Objective::TotalMinutes, targets, cons);
    let s = solve_exact(&PlanProblem::for_task(&w, &t), 10_000);
    assert_eq!(s.itinerary.actions[0].start(), TimePoint::at(0, 9, 0));
    assert_eq!(s.objective_value, 60 + 20 + 90);
    full_marks(&w, &t, &s);
}

#[test]
fn hotel_check_is_met() {
    let w = world();
    let (targets, mut cons) = visit_target("West Lake", 90);
    cons.push(Constraint::SpecificHotel {
        city: "Hangzhou".into(),
        hotel: "Lakeside Inn".into(),
        check_times: vec![TimePoint::at(0, 22, 0)],
    });
    let t = task(TaskType::IntraCity, Objective::CostCents, targets, cons);
    let p = PlanProblem::for_task(&w, &t);
    let s = solve_exact(&p, 10_000);
    assert_eq!(s.status, Status::Optimal);
    full_marks(&w, &t, &s);
    full_marks(&w, &t, &solve_heuristic(&p, 0, 0));
    for x in sample_valid(&p, 3, 9).unwrap() {
        full_marks(&w, &t, &x);
    }
}

#[test]
fn sampler_edge_cases() {
    let w = world();
    let (targets, cons) = visit_target("West Lake", 90);
    let t = task(TaskType::IntraCity, Objective::CostCents, targets, cons);
    let p = PlanProblem::for_task(&w, &t);
    assert!(sample_valid(&p, 0, 0).unwrap().is_empty());
    let many = sample_valid(&p, 20, 4).unwrap();
    let texts: std::collections::BTreeSet<String> =
        many.iter().map(|s| render_itinerary(&s.itinerary, &t.calendar)).collect();
    assert_eq!(texts.len(), 20);
    let best = solve_exact(&p, 100_000);
    assert_eq!(best.status, Status::Optimal);
    for s in &many {
        full_marks(&w, &t, s);
        assert!(s.objective_value >= best.objective_value);
    }
    assert_eq!(sample_valid(&p, 20, 4).unwrap(), many);
}

#[test]
fn unique_plan_is_sampled_once() {
    let w = world();
    let targets = Targets { cities: vec![CityTarget { city: "Suzhou".into(), min_stay_minutes: 0 }], attractions: vec![] };
    let cons = vec![Constraint::Budget { max: Money(10_000) }];
    let t = task(TaskType::InterCity, Objective::CostCents, targets, cons);
    let p = PlanProblem::for_task(&w, &t);
    let one = sample_valid(&p, 1, 0).unwrap();
    assert_eq!(one[0].itinerary, solve_exact(&p, 1000).itinerary);
    for s in sample_valid(&p, 5, 0).unwrap() {
        assert!(s.itinerary.iter().any(|a| matches!(a, Action::GoToCity { ticket, .. } if ticket == "G200")));
    }
}

#[test]
fn generated_instances_heuristic_bounded_by_exact() {
    let mut close = 0;
    let mut total = 0;
    for seed in 0..12u64 {
        let w = generate_world(&GenParams { seed, num_cities: 3, ..GenParams::default() }).unwrap();
        for tt in TaskType::ALL {
            let Ok(t) = generate_task(&w, tt, seed, &ConstraintMix::default()) else { continue };
            let p = PlanProblem::for_task(&w, &t);
            let e = solve_exact(&p, DEFAULT_NODE_BUDGET);
            assert!(e.is_valid(), "{} has a witness", t.id);
            full_marks(&w, &t, &e);
            let h = solve_heuristic(&p, 0, seed);
            assert!(h.is_valid());
            full_marks(&w, &t, &h);
            if e.status == Status::Optimal {
                assert!(h.objective_value >= e.objective_value);
                let wit = crate::evaluator::objective_value(&simulate(&w, &t, t.witness.as_ref().unwrap()), t.objective);
                assert!(wit >= e.objective_value);
                total += 1;
                if h.objective_value * 10 <= e.objective_value * 11 {
                    close += 1;
                }
            }
            assert_eq!(solve_heuristic(&p, 0, seed), h);
        }
    }
    assert!(total > 20);
    assert!(close * 10 >= total * 8, "{close} of {total} within 10%");
}
