//! End-to-end over the bundled 20-task toy corpus: stub optimizer, mutation
//! engine, surface similarity and the in-process harness.

use semdiff_core::fuzz::FuzzPlan;
use semdiff_core::harness::{score_pair, HarnessConfig, ToyRunner};
use semdiff_core::model::{load_tasks, CodePairRecord, Level, TaskSpec};
use semdiff_core::mutation::{generate_mutants, MutationLimits};
use semdiff_core::optimizer::{request_all, OptimizationOutcome, StubProvider};
use semdiff_core::surface::surface_sim;

const TASKS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/testdata/toy_tasks.jsonl");
const OPTIMIZED: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/testdata/toy_optimized.jsonl");

fn optimized(tasks: &[TaskSpec]) -> Vec<String> {
    let stub = StubProvider::from_fixture(OPTIMIZED).unwrap();
    request_all(tasks, &stub, 4)
        .into_iter()
        .map(|r| match r.unwrap() {
            OptimizationOutcome::Optimized { code, .. } => code,
            OptimizationOutcome::NotOptimizable => panic!("fixture has no None entries"),
        })
        .collect()
}

fn df(task: &TaskSpec, id: &str, code_var: &str, cfg: &HarnessConfig) -> f64 {
    let pair = CodePairRecord::new(id, &task.task_id, &task.reference_code, code_var, Level::Function);
    let plan = FuzzPlan::new(11, cfg.n_inputs.unwrap());
    score_pair(&pair, task, cfg, &plan, &mut ToyRunner::new()).unwrap().df_score
}

fn cfg() -> HarnessConfig {
    HarnessConfig {
        n_inputs: Some(100),
        repetitions: 2,
        // the slowest reference input needs about 0.02 s of simulated time
        per_input_timeout_seconds: 0.05,
        ..HarnessConfig::default()
    }
}

#[test]
fn optimized_variants_are_equivalent() {
    let tasks = load_tasks(TASKS).unwrap();
    assert_eq!(tasks.len(), 20);
    for (task, code) in tasks.iter().zip(optimized(&tasks)) {
        assert_eq!(df(task, "opt", &code, &cfg()), 1.0, "{}", task.task_id);
    }
}

#[test]
fn mutants_look_closer_but_behave_differently() {
    let tasks = load_tasks(TASKS).unwrap();
    let opt = optimized(&tasks);
    let limits = MutationLimits {
        max_mutants: 5,
        ..MutationLimits::default()
    };
    let (mut mut_sim, mut mut_df, mut opt_sim) = (Vec::new(), Vec::new(), Vec::new());
    for (task, code) in tasks.iter().zip(&opt) {
        opt_sim.push(surface_sim(&task.reference_code, code).unwrap());
        for m in generate_mutants(&task.task_id, &task.reference_code, &limits).unwrap() {
            mut_sim.push(surface_sim(&task.reference_code, &m.variant_code).unwrap());
            let d = df(task, &m.variant_id, &m.variant_code, &cfg());
            if d >= 0.0 {
                mut_df.push(d);
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mut_sim.len() >= 40, "{} mutants", mut_sim.len());
    assert!(mean(&mut_sim) > mean(&opt_sim), "{} vs {}", mean(&mut_sim), mean(&opt_sim));
    assert!(mean(&mut_df) < 0.8, "mutant df {}", mean(&mut_df));
}
