use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use tripbench::evaluator::{evaluate, load_calibration, objective_value, Calibration, Score, ScoreFile};
use tripbench::itinerary::{parse_any, render_itinerary, Itinerary};
use tripbench::orchestrator::{
    run_direct, run_tdag, spawn_agent, Agent, Impaired, RunOptions, RunOutput, SkillLibrary, SolverAgent,
};
use tripbench::reporting::{build_report, ErrorCounts, TaskResult};
use tripbench::rng::{derive_seed, stream};
use tripbench::scenarios::{
    calibrate_task, fault_suite, generate_suite, generate_task, generate_world, inject_fault, load_suite, mix_counts,
    ConstraintMix, Fault, GenParams, Suite, SuiteTask,
};
use tripbench::simulate;
use tripbench::solver::{solve_exact, solve_heuristic_evals, PlanProblem, DEFAULT_NODE_BUDGET};
use tripbench::task::{load_task, Task, TaskType};
use tripbench::world::{load_world, World};

use crate::{ensure_parent, AgentKind, Cli, Command, FaultKind, Gen, MixArgs, Mode, SolveMethod, WorldArgs};

pub fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Gen(g) => gen(cli, g),
        Command::Solve(a) => {
            let (world, task) = load_pair(&a.world, &a.task)?;
            let p = PlanProblem::for_task(&world, &task);
            let s = match a.method {
                SolveMethod::Exact => solve_exact(&p, a.node_budget),
                SolveMethod::Heuristic => solve_heuristic_evals(&p, a.evals, 0, cli.seed),
            };
            if !s.is_valid() {
                bail!("no valid itinerary found (status {:?})", s.status);
            }
            let out = cli.output(&a.out, "itinerary.txt");
            write(&out, &render_itinerary(&s.itinerary, &task.calendar))?;
            let summary = serde_json::json!({
                "task_id": task.id,
                "status": s.status,
                "objective": task.objective,
                "objective_value": s.objective_value,
                "actions": s.itinerary.len(),
                "itinerary": out,
            });
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(())
        }
        Command::Simulate(a) => {
            let (world, task) = load_pair(&a.world, &a.task)?;
            let it = load_itinerary(&a.itinerary, &task)?;
            let trace = simulate(&world, &task, &it);
            let json = serde_json::to_string_pretty(&trace.to_file(&task.calendar))? + "\n";
            write(&cli.output(&a.out, "trace.json"), &json)?;
            let (a1, b1) = trace.l1();
            let (a2, b2) = trace.l2();
            println!("L1 {a1}/{b1} L2 {a2}/{b2}");
            Ok(())
        }
        Command::Score(a) => {
            let (world, task) = load_pair(&a.world, &a.task)?;
            let it = load_itinerary(&a.itinerary, &task)?;
            let calib = load_calibration(&a.calib).with_context(|| format!("reading {}", a.calib.display()))?;
            let score = evaluate(&simulate(&world, &task, &it), &task, &calib)?;
            let json = serde_json::to_string_pretty(&score.to_file())? + "\n";
            if let Some(o) = &a.out {
                write(o, &json)?;
            }
            print!("{json}");
            Ok(())
        }
        Command::Calibrate(a) => {
            let (world, task) = load_pair(&a.world, &a.task)?;
            let out = cli.output(&a.out, "calib.json");
            write_calibration(&world, &task, a.n, cli.seed, &out)?;
            Ok(())
        }
        Command::Run(a) => run(cli, a),
        Command::Report(a) => report(cli, a),
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_pair(world: &Path, task: &Path) -> Result<(World, Task)> {
    let w = load_world(world).with_context(|| format!("loading world {}", world.display()))?;
    let t = load_task(task).with_context(|| format!("loading task {}", task.display()))?;
    t.validate(&w).with_context(|| format!("task {} does not fit world {}", t.id, world.display()))?;
    Ok((w, t))
}

fn load_itinerary(path: &Path, task: &Task) -> Result<Itinerary> {
    parse_any(&read(path)?, &task.calendar).with_context(|| format!("parsing {}", path.display()))
}

fn params(w: &WorldArgs, mix: &MixArgs, seed: u64) -> Result<GenParams> {
    let mix = match &mix.mix {
        Some(p) => serde_json::from_str::<ConstraintMix>(&read(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => ConstraintMix::default(),
    };
    let p = GenParams {
        num_cities: w.cities,
        attractions_per_city: w.attractions,
        hotels_per_city: w.hotels,
        trips_per_pair: w.trips,
        route_density: w.density,
        horizon_days: w.days,
        start_date: w.start_date.clone(),
        mix,
        seed,
    };
    p.validate()?;
    Ok(p)
}

#[derive(Serialize)]
struct SampleRecord {
    objective_value: u64,
    itinerary: String,
}

fn samples_path(calib: &Path) -> PathBuf {
    let stem = calib.file_name().and_then(|s| s.to_str()).unwrap_or("calib.json");
    let stem = stem.strip_suffix(".json").unwrap_or(stem);
    let stem = stem.strip_suffix(".calib").unwrap_or(stem);
    calib.with_file_name(format!("{stem}.samples.json"))
}

fn write_calibration(world: &World, task: &Task, n: usize, seed: u64, out: &Path) -> Result<Calibration> {
    let (calib, samples) = calibrate_task(world, task, n, seed)?;
    write(out, &(calib.to_json_string() + "\n"))?;
    let records: Vec<SampleRecord> = samples
        .iter()
        .map(|it| SampleRecord {
            objective_value: objective_value(&simulate(world, task, it), task.objective),
            itinerary: render_itinerary(it, &task.calendar),
        })
        .collect();
    write(&samples_path(out), &(serde_json::to_string_pretty(&records)? + "\n"))?;
    Ok(calib)
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?)
}

fn gen(cli: &Cli, g: &Gen) -> Result<()> {
    match g {
        Gen::World { world, out } => {
            let p = params(world, &MixArgs { mix: None }, cli.seed)?;
            write(&cli.output(out, "world.json"), &generate_world(&p)?.to_json_string())
        }
        Gen::Task { world, task_type, mix, calibrate, out } => {
            let w = load_world(world).with_context(|| format!("loading world {}", world.display()))?;
            let mix = params(&WorldArgs::default(), mix, cli.seed)?.mix;
            let tt = TaskType::from_number(*task_type).expect("range-checked");
            let task = generate_task(&w, tt, cli.seed, &mix)?;
            let out = cli.output(out, "task.json");
            write(&out, &task.to_json_string())?;
            if *calibrate > 0 {
                let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("task");
                write_calibration(&w, &task, *calibrate, cli.seed, &out.with_file_name(format!("{stem}.calib.json")))?;
            }
            Ok(())
        }
        Gen::Suite { world, mix, size, counts, name, calibrate, out } => {
            let p = params(world, mix, cli.seed)?;
            let counts = match (size, counts) {
                (Some(n), _) => mix_counts(*n),
                (None, Some(c)) => *c,
                (None, None) => bail!("give --size or --counts"),
            };
            let mut suite = generate_suite(&p, counts, name)?;
            if *calibrate > 0 {
                calibrate_suite(&mut suite, *calibrate, cli.seed, cli.jobs)?;
            }
            let dir = cli.output(out, name);
            suite.write_to(&dir)?;
            println!("{}", dir.join("suite.json").display());
            Ok(())
        }
        Gen::FaultSuite { world, mix, size, name, out } => {
            let p = params(world, mix, cli.seed)?;
            let suite = fault_suite(&p, *size, name)?;
            let dir = cli.output(out, name);
            suite.write_to(&dir)?;
            println!("{}", dir.join("suite.json").display());
            Ok(())
        }
        Gen::Fault { world, task, kind, which, minutes, out } => {
            let (w, t) = load_pair(world, task)?;
            let fault = match kind {
                FaultKind::RemoveTrip => Fault::RemoveWitnessTrip,
                FaultKind::Sellout => Fault::SelloutWitnessTicket,
                FaultKind::ShiftWindow => Fault::ShiftOpeningWindow { minutes: *minutes },
            };
            let faulted = inject_fault(&w, &t, fault, *which)?;
            write(&cli.output(out, "faulted-world.json"), &faulted.to_json_string())
        }
    }
}

impl Default for WorldArgs {
    fn default() -> Self {
        let d = GenParams::default();
        WorldArgs {
            cities: d.num_cities,
            attractions: d.attractions_per_city,
            hotels: d.hotels_per_city,
            trips: d.trips_per_pair,
            density: d.route_density,
            days: d.horizon_days,
            start_date: d.start_date,
        }
    }
}

fn calibrate_suite(suite: &mut Suite, n: usize, seed: u64, jobs: usize) -> Result<()> {
    let world = suite.world.clone();
    let calibs: Vec<Result<Calibration>> = pool(jobs)?.install(|| {
        suite
            .tasks
            .par_iter()
            .enumerate()
            .map(|(i, st)| {
                let w = st.world.as_ref().unwrap_or(&world);
                calibrate_task(w, &st.task, n, derive_seed(seed, stream::SAMPLE, i as u64))
                    .map(|(c, _)| c)
                    .with_context(|| format!("calibrating {}", st.task.id))
            })
            .collect()
    });
    for (st, c) in suite.tasks.iter_mut().zip(calibs) {
        st.calibration = Some(c?);
    }
    Ok(())
}

// ---- run and report ----

/// Per-task outcome of one `run`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub task_id: String,
    #[serde(rename = "type")]
    pub task_type: TaskType,
    pub score: ScoreFile,
    pub errors: ErrorCounts,
    pub cascading_failure: bool,
    /// Where the efficiency band came from: `given`, `sampled` or `witness`.
    pub calibration: String,
}

/// `results.json` written by `run`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResults {
    pub suite: String,
    pub method: String,
    pub mode: Mode,
    pub agent: AgentKind,
    pub tasks: Vec<RunRow>,
}

struct TaskOutput {
    row: RunRow,
    itinerary: String,
    log: String,
    trace: String,
}

fn band(world: &World, st: &SuiteTask, n: usize, seed: u64) -> (Calibration, &'static str) {
    if let Some(c) = &st.calibration {
        return (c.clone(), "given");
    }
    if let Ok((c, _)) = calibrate_task(world, &st.task, n, seed) {
        return (c, "sampled");
    }
    // Too few distinct valid plans: a degenerate band at the reference plan.
    let task = &st.task;
    let reference = match &task.witness {
        Some(w) => Some(w.clone()),
        None => {
            let s = solve_exact(&PlanProblem::for_task(world, task), DEFAULT_NODE_BUDGET);
            s.is_valid().then_some(s.itinerary)
        }
    };
    let v = reference.map_or(0, |it| objective_value(&simulate(world, task, &it), task.objective));
    (Calibration::fixed(task.objective, i128::from(v), i128::from(v)), "witness")
}

fn run_one(a: &crate::RunArgs, world: &World, st: &SuiteTask, library: &SkillLibrary, seed: u64) -> Result<TaskOutput> {
    let task = &st.task;
    let mut agent: Box<dyn Agent> = match a.agent {
        AgentKind::Solver => Box::new(SolverAgent::new(world, task)),
        AgentKind::Impaired => Box::new(Impaired { inner: SolverAgent::new(world, task) }),
        AgentKind::External => {
            let cmd = a.agent_cmd.as_deref().context("--agent-cmd is required for external agents")?;
            Box::new(spawn_agent(cmd, &a.agent_args, world, task).with_context(|| format!("starting `{cmd}`"))?)
        }
    };
    let lib = library.clone();
    let out: RunOutput = match a.mode {
        Mode::Direct => run_direct(world, task, agent.as_mut(), lib),
        Mode::Dynamic | Mode::Static => {
            let opts = RunOptions { static_mode: a.mode == Mode::Static, ..RunOptions::default() };
            run_tdag(world, task, agent.as_mut(), lib, opts)
        }
    }
    .with_context(|| format!("task {}", task.id))?;
    drop(agent);
    let trace = simulate(world, task, &out.itinerary);
    let (calib, source) = band(world, st, a.calib_n, seed);
    let score: Score = evaluate(&trace, task, &calib)?;
    let cascading_failure = out.log.cascading_failure();
    let result = TaskResult::new("", "", task, score.clone(), &trace, Some(&out.log));
    Ok(TaskOutput {
        row: RunRow {
            task_id: task.id.clone(),
            task_type: task.task_type,
            score: score.to_file(),
            errors: result.errors,
            cascading_failure,
            calibration: source.to_string(),
        },
        itinerary: render_itinerary(&out.itinerary, &task.calendar),
        log: out.log.to_json_string(),
        trace: serde_json::to_string_pretty(&trace.to_file(&task.calendar))? + "\n",
    })
}

fn run(cli: &Cli, a: &crate::RunArgs) -> Result<()> {
    let suite = match (&a.suite, &a.world, &a.task) {
        (Some(s), _, _) => load_suite(s).with_context(|| format!("loading suite {}", s.display()))?,
        (None, Some(w), Some(t)) => {
            let (world, task) = load_pair(w, t)?;
            let calibration = match &a.calib {
                Some(c) => Some(load_calibration(c).with_context(|| format!("reading {}", c.display()))?),
                None => None,
            };
            let name = task.id.clone();
            Suite { name, world, tasks: vec![SuiteTask { task, world: None, calibration }] }
        }
        _ => bail!("give --suite, or --world and --task"),
    };
    let library = match &a.skills {
        Some(p) => SkillLibrary::from_json_str(&read(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => SkillLibrary::default(),
    };
    let outputs: Vec<Result<TaskOutput>> = pool(cli.jobs)?.install(|| {
        suite
            .tasks
            .par_iter()
            .enumerate()
            .map(|(i, st)| run_one(a, suite.world_for(st), st, &library, derive_seed(cli.seed, stream::SAMPLE, i as u64)))
            .collect()
    });
    let mode = match a.mode {
        Mode::Dynamic => "dynamic",
        Mode::Static => "static",
        Mode::Direct => "direct",
    };
    let method = a.label.clone().unwrap_or_else(|| match a.agent {
        AgentKind::Solver => mode.to_string(),
        AgentKind::Impaired => format!("{mode}-impaired"),
        AgentKind::External => format!("{mode}-external"),
    });
    let dir = cli.output(&a.out, &format!("run-{method}"));
    let mut rows = Vec::new();
    for o in outputs {
        let o = o?;
        let id = &o.row.task_id;
        write(&dir.join("itineraries").join(format!("{id}.txt")), &o.itinerary)?;
        write(&dir.join("logs").join(format!("{id}.json")), &o.log)?;
        write(&dir.join("traces").join(format!("{id}.json")), &o.trace)?;
        rows.push(o.row);
    }
    let results = RunResults { suite: suite.name.clone(), method, mode: a.mode, agent: a.agent, tasks: rows };
    let path = dir.join("results.json");
    write(&path, &(serde_json::to_string_pretty(&results)? + "\n"))?;
    let full = results.tasks.iter().filter(|r| r.score.binary).count();
    println!("{}: {full}/{} tasks fully executable", path.display(), results.tasks.len());
    Ok(())
}

fn report(cli: &Cli, a: &crate::ReportArgs) -> Result<()> {
    let mut results = Vec::new();
    for p in &a.results {
        let r: RunResults = serde_json::from_str(&read(p)?).with_context(|| format!("parsing {}", p.display()))?;
        for row in r.tasks {
            results.push(TaskResult {
                suite: r.suite.clone(),
                method: r.method.clone(),
                task_id: row.task_id,
                task_type: row.task_type,
                score: Score::from_file(&row.score)?,
                errors: row.errors,
            });
        }
    }
    let report = build_report(&results)?;
    let dir = cli.output(&a.out, "report");
    write(&dir.join("report.json"), &report.to_json_string())?;
    if let [m] = report.methods.as_slice() {
        write(&dir.join("report.csv"), &m.to_csv())?;
    } else {
        for m in &report.methods {
            write(&dir.join(format!("report-{}.csv", m.method)), &m.to_csv())?;
        }
    }
    for m in &report.methods {
        println!(
            "{}: binary rate {}, fine-grained mean {}, errors ctf {} cke {} eim {} cnc {}",
            m.method,
            m.binary_rate,
            m.fine_grained_mean,
            m.errors.counts.ctf,
            m.errors.counts.cke,
            m.errors.counts.eim,
            m.errors.counts.cnc
        );
    }
    Ok(())
}
