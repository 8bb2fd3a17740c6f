//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any fail.

use std::time::{Duration, Instant};

use semdiff_core::audit::{cross_pair, distinguishability, mae, own_pairs, spearman, ScoreSeries, SolutionPair};
use semdiff_core::fuzz::vectors::{check_vectors, parse_vectors};
use semdiff_core::fuzz::{generate_buffers, splitmix64, FuzzPlan};
use semdiff_core::harness::{score_pair, HarnessConfig, PairScore, ProcessRunner, Runner, ToyRunner};
use semdiff_core::model::{load_tasks, CodePairRecord, Level, RegionThresholds, TaskSpec};
use semdiff_core::mutation::{generate_mutants, MutationLimits};
use semdiff_core::optimizer::{request_all, OptimizationOutcome, StubProvider};
use semdiff_core::regions::{classify, select_thresholds, ErrorFlavor, RegionLabel, RegionPoint};
use semdiff_core::surface::{edit_similarity, surface_sim, tree_edit_distance, tree_similarity, SyntaxTree};
use semdiff_oracles as oracle;

const TOY_RUNNER: &str = env!("CARGO_BIN_EXE_semdiff-toy-runner");
const TESTDATA: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/testdata");

type Check = Result<String, String>;

/// Deterministic stream for synthetic inputs.
struct Stream(u64);

impl Stream {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        splitmix64(self.0)
    }
    fn below(&mut self, n: u64) -> u64 {
        self.next() % n
    }
    fn unit(&mut self) -> f64 {
        (self.next() >> 11) as f64 / (1u64 << 53) as f64
    }
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn task(code: &str, binding: &str) -> TaskSpec {
    TaskSpec {
        task_id: "t".into(),
        source_benchmark: "toy".into(),
        nl_description: None,
        reference_code: code.into(),
        level: Level::Function,
        entry_point: Some("f".into()),
        binding_program: binding.into(),
        example_input: None,
    }
}

fn score(code_a: &str, code_b: &str, cfg: &HarnessConfig, runner: &mut dyn Runner) -> PairScore {
    let t = task(code_a, "n = fdp.ConsumeIntInRange(-1000, 1000)\nk = fdp.ConsumeIntInRange(0, 50)\n");
    let pair = CodePairRecord::new("pair", "t", code_a, code_b, Level::Function);
    let plan = FuzzPlan::new(2024, cfg.n_inputs.unwrap());
    score_pair(&pair, &t, cfg, &plan, runner).expect("pair scores")
}

const P: &str = "def f(n, k):\n    total = 0\n    for i in range(k):\n        total += n * i - i % 3\n    if total < 0:\n        return -total\n    return total\n";

fn criterion_1() -> Check {
    let cfg = HarnessConfig {
        n_inputs: Some(200),
        repetitions: 5,
        ..HarnessConfig::default()
    };
    let started = Instant::now();
    let s = score(P, P, &cfg, &mut ToyRunner::new());
    let took = started.elapsed();
    ensure(s.df_score == 1.0, format!("df_score {}", s.df_score))?;
    ensure(took < Duration::from_secs(5), format!("took {took:?}"))?;
    Ok(format!("df_score {} over N=200, R=5 in {took:.2?}", s.df_score))
}

fn criterion_2() -> Check {
    let plus_one = P.replace("return -total", "return -total + 1").replace("return total\n", "return total + 1\n");
    let cfg = HarnessConfig {
        n_inputs: Some(200),
        repetitions: 5,
        ..HarnessConfig::default()
    };
    let s = score(P, &plus_one, &cfg, &mut ToyRunner::new());
    ensure(s.df_score == 0.0, format!("df_score {}", s.df_score))?;
    Ok(format!("df_score {}", s.df_score))
}

fn criterion_3() -> Check {
    let sleeper = "def f(n, k):\n    time.sleep(2)\n    return n\n";
    let toy_cfg = HarnessConfig {
        n_inputs: Some(50),
        repetitions: 5,
        per_input_timeout_seconds: 1.0,
        ..HarnessConfig::default()
    };
    let simulated = score(sleeper, P, &toy_cfg, &mut ToyRunner::new());
    ensure(simulated.df_score == -1.0, format!("simulated clock: df_score {}", simulated.df_score))?;
    // the same subject under a real process and wall-clock timeouts
    let proc_cfg = HarnessConfig {
        n_inputs: Some(3),
        repetitions: 2,
        per_input_timeout_seconds: 0.2,
        ..HarnessConfig::default()
    };
    let mut runner = ProcessRunner::new(TOY_RUNNER, Vec::<String>::new());
    let real = score(sleeper, P, &proc_cfg, &mut runner);
    ensure(real.df_score == -1.0, format!("process runner: df_score {}", real.df_score))?;
    Ok(format!(
        "df_score -1 (simulated clock, N=50, R=5; child process, {} restarts)",
        runner.restarts()
    ))
}

fn criterion_4() -> Check {
    let mut rng = Stream(4);
    let grid: Vec<f64> = (0..=4).map(|i| i as f64 / 4.0).collect();
    let started = Instant::now();
    for ds in 0..20 {
        let points: Vec<RegionPoint> = (0..50)
            .map(|_| {
                // half the coordinates land exactly on grid lines
                let coord = |rng: &mut Stream| {
                    if rng.below(2) == 0 {
                        rng.below(5) as f64 / 4.0
                    } else {
                        rng.unit()
                    }
                };
                RegionPoint {
                    x: coord(&mut rng),
                    y: coord(&mut rng),
                    scores: vec![rng.unit(), rng.unit()],
                }
            })
            .collect();
        let naive_points: Vec<oracle::ScoredPoint> = points
            .iter()
            .map(|p| oracle::ScoredPoint {
                x: p.x,
                y: p.y,
                scores: p.scores.clone(),
            })
            .collect();
        let want = oracle::naive_thresholds(&naive_points, &grid, false);
        let got = select_thresholds(&points, 2, 0.25, ErrorFlavor::Absolute).ok();
        match (got, want) {
            (Some(sel), Some((th, obj))) => {
                let t = sel.thresholds;
                ensure(
                    [t.x_lo, t.x_hi, t.y_lo, t.y_hi] == th && sel.objective.to_bits() == obj.to_bits(),
                    format!("dataset {ds}: {:?}/{} vs {th:?}/{obj}", t.as_tuple(), sel.objective),
                )?;
            }
            (None, None) => {}
            (got, want) => return Err(format!("dataset {ds}: {got:?} vs {want:?}")),
        }
    }
    let took = started.elapsed();
    ensure(took < Duration::from_secs(10), format!("took {took:?}"))?;
    Ok(format!("20/20 datasets identical tuple and objective in {took:.2?}"))
}

fn criterion_5() -> Check {
    let th = RegionThresholds::new(0.65, 0.90, 0.10, 0.90).expect("valid thresholds");
    let cases = [
        ((0.95, 0.05), RegionLabel::Sfd),
        ((0.50, 0.95), RegionLabel::Dfs),
        ((0.70, 0.50), RegionLabel::Control),
    ];
    for ((x, y), want) in cases {
        let got = classify(x, y, &th);
        ensure(got == want, format!("({x}, {y}) -> {got:?}, expected {want:?}"))?;
    }
    Ok("(0.95,0.05)->SFD, (0.50,0.95)->DFS, (0.70,0.50)->Control".into())
}

fn criterion_6() -> Check {
    let x: Vec<f64> = (1..=12).map(f64::from).collect();
    let up: Vec<f64> = x.iter().map(|v| v * v).collect();
    let down: Vec<f64> = x.iter().map(|v| -v.powi(3)).collect();
    let r_up = spearman(&x, &up).map_err(|e| e.to_string())?.rho;
    let r_down = spearman(&x, &down).map_err(|e| e.to_string())?.rho;
    ensure(r_up == 1.0 && r_down == -1.0, format!("monotone {r_up}, reversed {r_down}"))?;

    let mut rng = Stream(6);
    for case in 0..200 {
        let n = 3 + rng.below(30) as usize;
        let a: Vec<f64> = (0..n).map(|_| rng.below(5) as f64 / 4.0).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.below(4) as f64).collect();
        if a.iter().all(|v| *v == a[0]) || b.iter().all(|v| *v == b[0]) {
            continue;
        }
        let got = spearman(&a, &b).map_err(|e| e.to_string())?.rho;
        let want = oracle::spearman_rho(&a, &b);
        ensure((got - want).abs() <= 1e-12, format!("tie case {case}: {got} vs {want}"))?;
    }

    let series = ScoreSeries::new("m", vec![0.5, 1.0, 0.25, 0.0], vec![1.0, 1.0, 0.0, 0.5]).map_err(|e| e.to_string())?;
    let m = mae(&series);
    ensure(m == 0.3125, format!("MAE {m}"))?;
    let d = distinguishability(&[0.8, 0.6], &[0.35, 0.35]).map_err(|e| e.to_string())?;
    ensure(d == 2.0, format!("d {d}"))?;
    let single = distinguishability(&[0.7], &[0.35]).map_err(|e| e.to_string())?;
    ensure(single == 2.0, format!("d {single}"))?;

    // λ·v is itself rounded, so multi-value data can move by a few ulps
    let scale = |v: &[f64], l: f64| v.iter().map(|x| x * l).collect::<Vec<_>>();
    let (mut exact, mut total) = (0, 0);
    for lambda in [0.1, 3.7] {
        let scaled = distinguishability(&[0.7 * lambda], &[0.35 * lambda]).map_err(|e| e.to_string())?;
        ensure(scaled == single, format!("λ={lambda}: {scaled} vs {single}"))?;
        for _ in 0..200 {
            let a: Vec<f64> = (0..1 + rng.below(20)).map(|_| 0.01 + rng.unit()).collect();
            let b: Vec<f64> = (0..1 + rng.below(20)).map(|_| 0.01 + rng.unit()).collect();
            let base = distinguishability(&a, &b).map_err(|e| e.to_string())?;
            let s = distinguishability(&scale(&a, lambda), &scale(&b, lambda)).map_err(|e| e.to_string())?;
            let ulps = (base.to_bits() as i64 - s.to_bits() as i64).unsigned_abs();
            ensure(ulps <= 4, format!("λ={lambda}: {s} vs {base} ({ulps} ulp)"))?;
            exact += usize::from(ulps == 0);
            total += 1;
        }
    }
    Ok(format!(
        "rho +1/-1 exact; 200 tie cases within 1e-12; MAE 0.3125, d 2.0 exact; scaled d exact on the arithmetic case, {exact}/{total} random cases bit-exact, all within 4 ulp"
    ))
}

fn random_tree(rng: &mut Stream) -> SyntaxTree {
    fn go(node: usize, labels: &[u64], kids: &[Vec<usize>]) -> SyntaxTree {
        let label = ((b'a' + labels[node] as u8) as char).to_string();
        SyntaxTree::node(label, kids[node].iter().map(|&k| go(k, labels, kids)).collect())
    }
    let n = 1 + rng.below(6) as usize;
    let labels: Vec<u64> = (0..n).map(|_| rng.below(3)).collect();
    let mut kids = vec![Vec::new(); n];
    for k in 1..n {
        kids[rng.below(k as u64) as usize].push(k);
    }
    go(0, &labels, &kids)
}

fn to_oracle(t: &SyntaxTree) -> oracle::Tree {
    let mut parent = vec![None; t.len()];
    for i in 0..t.len() {
        for &c in t.children(i) {
            parent[c] = Some(i);
        }
    }
    oracle::Tree {
        labels: (0..t.len()).map(|i| t.label(i).to_string()).collect(),
        parent,
    }
}

const LINES: &[&str] = &[
    "x = a + 1",
    "y = x * 2 - a",
    "if x > y:\n        x = y",
    "for i in range(3):\n        y += i",
    "while x > 0:\n        x -= 1",
    "s = 'abc' + str(x)",
    "z = [v * v for v in range(x) if v % 2]",
    "return x",
];

fn random_program(rng: &mut Stream) -> String {
    let mut code = String::from("def f(a):\n");
    for _ in 0..rng.below(7) {
        code.push_str("    ");
        code.push_str(LINES[rng.below(LINES.len() as u64) as usize]);
        code.push('\n');
    }
    code.push_str("    return a\n");
    code
}

fn criterion_7() -> Check {
    let mut rng = Stream(7);
    let alphabet: Vec<char> = "ab c\né€".chars().collect();
    for case in 0..200 {
        let mut s = || -> String {
            (0..rng.below(51)).map(|_| alphabet[rng.below(alphabet.len() as u64) as usize]).collect()
        };
        let (a, b) = (s(), s());
        let max = a.chars().count().max(b.chars().count());
        let want = if max == 0 {
            1.0
        } else {
            1.0 - oracle::levenshtein_dp(&a, &b) as f64 / max as f64
        };
        let got = edit_similarity(&a, &b);
        ensure(got == want, format!("string case {case}: {got} vs {want}"))?;
    }
    for case in 0..300 {
        let (t1, t2) = (random_tree(&mut rng), random_tree(&mut rng));
        let d = oracle::tai_distance(&to_oracle(&t1), &to_oracle(&t2));
        let want = 1.0 - d as f64 / (t1.len() + t2.len()) as f64;
        ensure(tree_edit_distance(&t1, &t2) == d, format!("tree case {case}: distance"))?;
        ensure(tree_similarity(&t1, &t2) == want, format!("tree case {case}: similarity"))?;
    }
    for case in 0..1000 {
        let (a, b) = (random_program(&mut rng), random_program(&mut rng));
        let ab = surface_sim(&a, &b).map_err(|e| e.to_string())?;
        let ba = surface_sim(&b, &a).map_err(|e| e.to_string())?;
        let aa = surface_sim(&a, &a).map_err(|e| e.to_string())?;
        ensure(ab == ba && aa == 1.0 && (0.0..=1.0).contains(&ab), format!("program case {case}: {ab} {ba} {aa}"))?;
    }
    Ok("200 string pairs = DP; 300 tree pairs (<= 6 nodes) = exhaustive mapping; 1000 program pairs symmetric, reflexive, in [0,1]".into())
}

fn criterion_8() -> Check {
    let text = std::fs::read_to_string(format!("{TESTDATA}/provider_vectors.txt")).map_err(|e| e.to_string())?;
    let vectors = parse_vectors(&text).map_err(|e| e.to_string())?;
    ensure(vectors.len() >= 50, format!("only {} vectors", vectors.len()))?;
    let bad = check_vectors(&vectors).map_err(|e| e.to_string())?;
    ensure(bad.is_empty(), format!("{} mismatches, first {:?}", bad.len(), bad.first()))?;
    let plan = FuzzPlan::new(8, 2000);
    let first = generate_buffers(&plan);
    let second = generate_buffers(&plan.clone());
    ensure(first == second, "buffer lists differ between runs")?;
    Ok(format!("{} vectors byte-exact; 2000 buffers identical across two runs", vectors.len()))
}

fn criterion_12() -> Check {
    let tasks = load_tasks(format!("{TESTDATA}/toy_tasks.jsonl")).map_err(|e| e.to_string())?;
    let stub = StubProvider::from_fixture(format!("{TESTDATA}/toy_optimized.jsonl")).map_err(|e| e.to_string())?;
    let solutions: Vec<SolutionPair> = tasks
        .iter()
        .zip(request_all(&tasks, &stub, 4))
        .map(|(t, r)| match r {
            Ok(OptimizationOutcome::Optimized { code, .. }) => Ok(SolutionPair {
                task_id: t.task_id.clone(),
                level: t.level,
                slow: t.reference_code.clone(),
                fast: code,
            }),
            other => Err(format!("task {}: {other:?}", t.task_id)),
        })
        .collect::<Result<_, _>>()?;
    let sim = |r: &CodePairRecord| surface_sim(&r.code_ori, &r.code_var).map_err(|e| e.to_string());
    let intra: Vec<f64> = own_pairs(&solutions).iter().map(sim).collect::<Result<_, _>>()?;

    // non-equivalent look-alikes: mutants the toy subject scores exactly 0
    let cfg = HarnessConfig {
        n_inputs: Some(100),
        repetitions: 2,
        per_input_timeout_seconds: 0.05,
        ..HarnessConfig::default()
    };
    let mut killed = Vec::new();
    for t in &tasks {
        let mutants = generate_mutants(&t.task_id, &t.reference_code, &MutationLimits::default()).map_err(|e| e.to_string())?;
        for m in mutants {
            let pair = CodePairRecord::new(&m.variant_id, &t.task_id, &t.reference_code, &m.variant_code, t.level);
            let s = score_pair(&pair, t, &cfg, &FuzzPlan::new(12, 100), &mut ToyRunner::new()).map_err(|e| e.to_string())?;
            if s.df_score == 0.0 {
                killed.push(pair);
            }
        }
    }
    let count = intra.len();
    ensure(killed.len() >= count, format!("only {} mutants with df_score 0", killed.len()))?;
    let mut rng = Stream(12);
    let (mut orig, mut replaced) = (Vec::new(), Vec::new());
    for run in 0..10u64 {
        let cross: Vec<f64> = cross_pair(&solutions, count, run).map_err(|e| e.to_string())?.iter().map(sim).collect::<Result<_, _>>()?;
        let mut pool: Vec<usize> = (0..killed.len()).collect();
        let mut chosen = Vec::new();
        for k in 0..count {
            let pick = k + rng.below((pool.len() - k) as u64) as usize;
            pool.swap(k, pick);
            chosen.push(sim(&killed[pool[k]])?);
        }
        orig.push(distinguishability(&intra, &cross).map_err(|e| e.to_string())?);
        replaced.push(distinguishability(&intra, &chosen).map_err(|e| e.to_string())?);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (d_orig, d_repl) = (mean(&orig), mean(&replaced));
    ensure(orig.iter().all(|d| *d > 1.0), format!("d on cross pairs {orig:?}"))?;
    ensure(replaced.iter().all(|d| *d < 1.0), format!("d on look-alikes {replaced:?}"))?;
    Ok(format!(
        "metric = SurfaceSim over 10 draws: d {d_orig:.3} with cross pairs, {d_repl:.3} with df_score-0 mutants ({} available)",
        killed.len()
    ))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Check); 9] = [
        (1, "df_score identity", criterion_1),
        (2, "df_score disjoint", criterion_2),
        (3, "all-timeout sentinel", criterion_3),
        (4, "threshold search equals exhaustive oracle", criterion_4),
        (5, "region classification", criterion_5),
        (6, "statistics kernels", criterion_6),
        (7, "surface similarity oracles", criterion_7),
        (8, "provider conformance and buffer determinism", criterion_8),
        (12, "distinguishability collapse", criterion_12),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        match std::panic::catch_unwind(check) {
            Ok(Ok(detail)) => println!("criterion {id:>2} PASS  {name}: {detail}"),
            Ok(Err(why)) => {
                failed += 1;
                println!("criterion {id:>2} FAIL  {name}: {why}");
            }
            Err(_) => {
                failed += 1;
                println!("criterion {id:>2} FAIL  {name}: panicked");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
