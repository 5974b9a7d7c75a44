//! Acceptance suite: runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line each. Exits with status 1 if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rpn_dst::cmbp::{
    build_dst_topology, enumerate_monomials, hill_climb, init_rpn_from_cmbp, sample_feasible,
    DstLayout, HillClimbConfig, PolynomialModel,
};
use rpn_dst::corpus::{generate_corpus, Corpus, GeneratorConfig};
use rpn_dst::network::{
    random_topology, ActivationSpec, Network, NetworkState, RandomTopologyConfig, Softclip,
};
use rpn_dst::tracker::{
    build_samples, corpus_accuracy, one_best, score_corpus, soft_labels, BeliefState, CmbpModel,
    CorpusValidator,
};
use rpn_dst::trainer::{
    gradient_check, mse_loss, randomize_weights, supervised_outputs, train, GradCheckConfig,
    TrainingConfig, TrainingSample, Validation,
};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit: Duration, result: Outcome) -> Outcome {
    match result {
        Ok(d) if elapsed > limit => Err(format!("{d}; took {elapsed:.1?}, limit {limit:?}")),
        other => other,
    }
}

fn corpus(seed: u64, dialogues: usize, confusion: f64) -> Corpus {
    generate_corpus(&GeneratorConfig {
        seed,
        dialogues,
        confusion_prob: confusion,
        ..GeneratorConfig::default()
    })
    .expect("generator config is valid")
}

fn softclip() -> ActivationSpec {
    ActivationSpec::softclip(0.01).unwrap()
}

fn combinatorics() -> Outcome {
    let (a, b) = (enumerate_monomials(6, 3).len(), enumerate_monomials(10, 3).len());
    check(a == 56 && b == 220, format!("6 features: {a}, 10 features: {b}"))
}

/// One turn of a rule-initialised network, with the previous belief set to
/// the first feature.
fn rpn_turn(net: &Network, layout: &DstLayout, x: &[f64]) -> f64 {
    let mut prev = vec![0.0; net.node_count()];
    prev[layout.output] = x[0];
    let mut state = NetworkState::new(prev);
    net.forward_step(&mut state, &layout.network_inputs(x)).unwrap()[layout.output]
}

fn rule_equivalence() -> Outcome {
    let eps = 0.01;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let plain = build_dst_topology(6, false, ActivationSpec::None).unwrap();
    let clipped = build_dst_topology(6, false, softclip()).unwrap();
    let (mut worst_plain, mut worst_clipped, mut in_region) = (0.0f64, 0.0f64, 0usize);
    for _ in 0..100 {
        let mut rule = PolynomialModel::new(6, 3).unwrap();
        for m in enumerate_monomials(6, 3) {
            rule.set(m, rng.random_range(-1.0..1.0)).unwrap();
        }
        let a = Network::new(init_rpn_from_cmbp(&plain, &rule).unwrap()).unwrap();
        let b = Network::new(init_rpn_from_cmbp(&clipped, &rule).unwrap()).unwrap();
        let (la, lb) = (DstLayout::infer(a.topology()).unwrap(), DstLayout::infer(b.topology()).unwrap());
        for _ in 0..100 {
            let x = sample_feasible(&mut rng, 6);
            let want = rule.evaluate(&x).unwrap();
            let rel = |got: f64| if want == 0.0 { got.abs() } else { ((got - want) / want).abs() };
            worst_plain = worst_plain.max(rel(rpn_turn(&a, &la, &x)));
            if want > eps && want < 1.0 - eps {
                in_region += 1;
                worst_clipped = worst_clipped.max(rel(rpn_turn(&b, &lb, &x)));
            }
        }
    }
    check(
        worst_plain <= 1e-12 && worst_clipped <= 1e-12 && in_region > 0,
        format!(
            "max rel error {worst_plain:.2e} (none), {worst_clipped:.2e} (softclip, {in_region} points in the identity region)"
        ),
    )
}

fn random_samples(rng: &mut ChaCha8Rng, inputs: usize, count: usize) -> Vec<TrainingSample> {
    (0..count)
        .map(|i| {
            let turns = rng.random_range(1..=5);
            TrainingSample {
                dialogue_id: format!("d{i}"),
                slot: "s".into(),
                value: "v".into(),
                inputs: (0..turns).map(|_| (0..inputs).map(|_| rng.random()).collect()).collect(),
                labels: (0..turns).map(|_| f64::from(u8::from(rng.random_bool(0.5)))).collect(),
                mask: vec![true; turns],
            }
        })
        .collect()
}

fn gradient_fidelity() -> Outcome {
    let cfg = GradCheckConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst_random, mut checked) = (0.0f64, 0usize);
    for _ in 0..20 {
        let computation_nodes = rng.random_range(5..=27);
        let topo = random_topology(
            &mut rng,
            &RandomTopologyConfig {
                inputs: 3,
                computation_nodes,
                activation: ActivationSpec::None,
                ..Default::default()
            },
        );
        let net = Network::new(topo).unwrap();
        let samples = random_samples(&mut rng, net.input_nodes().len(), 5);
        let r = gradient_check(&net, &samples, &cfg).map_err(|e| e.to_string())?;
        worst_random = worst_random.max(r.max_relative_error);
        checked += r.checked;
    }

    let mut dst = Network::new(build_dst_topology(10, true, softclip()).unwrap()).unwrap();
    randomize_weights(&mut dst, &mut ChaCha8Rng::seed_from_u64(4), 0.1);
    let c = corpus(4, 20, 0.3);
    let samples: Vec<TrainingSample> = build_samples(&c, 10).into_iter().take(20).collect();
    let r = gradient_check(&dst, &samples, &cfg).map_err(|e| e.to_string())?;
    check(
        worst_random <= 1e-5 && r.max_relative_error <= 1e-4 && checked > 0 && r.checked > 0,
        format!(
            "random recurrent: max rel {worst_random:.2e} over {checked} weights; DST softclip: max rel {:.2e} over {} weights ({} skipped at branch points)",
            r.max_relative_error, r.checked, r.skipped
        ),
    )
}

fn activation_properties() -> Outcome {
    let eps = 0.01;
    let s = Softclip::new(eps).unwrap();
    let mut problems = Vec::new();
    let d = 1e-13;
    let jump = [eps, 1.0 - eps]
        .iter()
        .map(|&p| (s.apply(p - d) - s.apply(p + d)).abs().max((s.apply(p) - p).abs()))
        .fold(0.0, f64::max);
    if jump > 1e-12 {
        problems.push(format!("discontinuity {jump:.2e}"));
    }
    let grid: Vec<f64> = (0..=10_000).map(|i| -10.0 + 20.0 * i as f64 / 10_000.0).collect();
    let ys: Vec<f64> = grid.iter().map(|&x| s.apply(x)).collect();
    if !ys.windows(2).all(|w| w[1] >= w[0]) {
        problems.push("not monotone".into());
    }
    if !ys.iter().all(|&y| y > 0.0 && y < 1.0) {
        problems.push("range leaves (0, 1)".into());
    }
    if !grid.iter().zip(&ys).filter(|(x, _)| **x > eps && **x < 1.0 - eps).all(|(x, y)| x == y) {
        problems.push("not the identity on (eps, 1 - eps)".into());
    }
    let clip = ActivationSpec::Clip;
    if !grid.iter().filter(|&&x| !(0.0..=1.0).contains(&x)).all(|&x| clip.derivative(x) == 0.0) {
        problems.push("clip derivative nonzero outside [0, 1]".into());
    }
    check(
        problems.is_empty(),
        if problems.is_empty() {
            format!("branch-point jump {jump:.1e}, range [{:.3e}, {:.6}]", ys[0], ys[ys.len() - 1])
        } else {
            problems.join(", ")
        },
    )
}

/// Masked mean squared error per supervised turn.
fn per_turn_mse(net: &Network, samples: &[TrainingSample]) -> f64 {
    let (mut se, mut n) = (0.0, 0usize);
    for s in samples {
        let out = supervised_outputs(net, &net.run(&s.inputs).unwrap());
        for ((b, l), m) in out.iter().zip(&s.labels).zip(&s.mask) {
            if *m {
                se += (b - l) * (b - l);
                n += 1;
            }
        }
    }
    se / n as f64
}

fn rule_recovery() -> Outcome {
    let c = corpus(21, 200, 0.0);
    let teacher = CmbpModel::new(PolynomialModel::demo_rule()).unwrap();
    let (train_set, valid_set) = c.split();
    let samples = soft_labels(&train_set, 6, &teacher).map_err(|e| e.to_string())?;
    let held_out = soft_labels(&valid_set, 6, &teacher).map_err(|e| e.to_string())?;
    let everything = soft_labels(&c, 6, &teacher).map_err(|e| e.to_string())?;
    // fidelity to the rule on held-out dialogues
    let validator = |net: &Network| {
        let loss = mse_loss(net, &held_out)?;
        Ok(Validation { accuracy: -loss, loss })
    };
    let mut net = Network::new(build_dst_topology(6, false, softclip()).unwrap()).unwrap();
    randomize_weights(&mut net, &mut ChaCha8Rng::seed_from_u64(22), 0.1);
    let before = per_turn_mse(&net, &everything);
    let cfg = TrainingConfig {
        batch_size: Some(8),
        seed: 23,
        ..Default::default()
    };
    let out = train(&net, &samples, &validator, &cfg).map_err(|e| e.to_string())?;
    let mse = per_turn_mse(&out.network, &everything);
    check(
        mse <= 1e-3,
        format!(
            "per-turn MSE against the rule {mse:.3e} (initial {before:.3e}, best epoch {}, threshold 1e-3)",
            out.best_epoch
        ),
    )
}

fn knowledge_transfer() -> Outcome {
    let c = corpus(7, 300, 0.3);
    let (train_set, valid_set) = c.split();
    let samples = build_samples(&train_set, 6);
    let validator = CorpusValidator::new(&valid_set, 6).map_err(|e| e.to_string())?;
    let rule = PolynomialModel::demo_rule();
    let untrained = corpus_accuracy(&CmbpModel::new(rule.clone()).unwrap(), &valid_set)
        .map_err(|e| e.to_string())?;
    let topo = build_dst_topology(6, false, softclip()).unwrap();
    let from_rule = Network::new(init_rpn_from_cmbp(&topo, &rule).unwrap()).unwrap();

    let (mut cmbp_runs, mut random_runs) = (Vec::new(), Vec::new());
    for seed in 0..5u64 {
        let cfg = TrainingConfig {
            batch_size: Some(8),
            seed,
            ..Default::default()
        };
        let a = train(&from_rule, &samples, &validator, &cfg).map_err(|e| e.to_string())?;
        cmbp_runs.push(a.best.accuracy);
        let mut random = Network::new(topo.clone()).unwrap();
        randomize_weights(&mut random, &mut ChaCha8Rng::seed_from_u64(100 + seed), 0.1);
        let b = train(&random, &samples, &validator, &cfg).map_err(|e| e.to_string())?;
        random_runs.push(b.best.accuracy);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mc, mr) = (mean(&cmbp_runs), mean(&random_runs));
    check(
        mc >= mr && mc >= untrained && mr >= untrained,
        format!("mean validation accuracy: rule-initialised {mc:.4}, random {mr:.4}, untrained rule {untrained:.4}"),
    )
}

fn metric_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut dialogues, mut worst, mut states, mut mismatches) = (0, 0.0f64, 0usize, 0usize);
    let mut seed = 0;
    while dialogues < 50 {
        let c = generate_corpus(&GeneratorConfig {
            seed,
            dialogues: 5,
            slots: rng.random_range(1..=4),
            values_per_slot: rng.random_range(2..=5),
            min_turns: 1,
            max_turns: 4,
            confusion_prob: 0.3,
            ..GeneratorConfig::default()
        })
        .map_err(|e| e.to_string())?;
        seed += 1;
        dialogues += c.dialogues.len();
        let beliefs: Vec<Vec<BeliefState>> = c
            .dialogues
            .iter()
            .map(|d| d.turns.iter().map(|_| common::random_beliefs(&mut rng, &c.ontology)).collect())
            .collect();
        let (acc, l2, n) = common::brute_score(&c, &beliefs);
        match score_corpus(&c, &beliefs) {
            Ok(r) => {
                if r.turns_scored != n {
                    mismatches += 1;
                }
                worst = worst.max((r.accuracy - acc).abs()).max((r.l2 - l2).abs());
            }
            Err(_) if n == 0 => {}
            Err(e) => return Err(e.to_string()),
        }
        for b in beliefs.iter().flatten() {
            let best = one_best(b);
            let p = common::joint_probability(b, &best);
            if best != common::brute_one_best(b) || p != common::exhaustive_max(b) {
                mismatches += 1;
            }
            states += 1;
        }
    }
    check(
        worst <= 1e-12 && mismatches == 0,
        format!("{dialogues} dialogues: max metric difference {worst:.1e}; {states} belief states, {mismatches} 1-best mismatches"),
    )
}

fn hill_climbing() -> Outcome {
    let c = corpus(9, 100, 0.3);
    let start = PolynomialModel::demo_rule();
    let mut seen: Vec<(PolynomialModel, f64)> = Vec::new();
    let out = hill_climb(&start, &HillClimbConfig::default(), |m| {
        let acc = corpus_accuracy(&CmbpModel::new(m.clone())?, &c)?;
        seen.push((m.clone(), acc));
        Ok(acc)
    })
    .map_err(|e| e.to_string())?;

    let monomials: BTreeSet<_> = start.coefficients().map(|(m, _)| m.clone()).collect();
    let changed = |a: &PolynomialModel, b: &PolynomialModel| {
        monomials
            .iter()
            .filter(|m| a.get(m) != b.get(m))
            .map(|m| (m.clone(), b.get(m) - a.get(m)))
            .collect::<Vec<_>>()
    };
    // replay: every candidate is one ±0.1 step from the model accepted so far
    let mut problems = Vec::new();
    let (mut current, mut best) = (start.clone(), seen[0].1);
    let mut accepted = Vec::new();
    for (candidate, score) in &seen[1..] {
        let diff = changed(&current, candidate);
        if diff.len() != 1 || ((diff[0].1).abs() - 0.1).abs() > 1e-12 {
            problems.push(format!("candidate changes {diff:?}"));
        }
        if *score > best {
            best = *score;
            current = candidate.clone();
            accepted.push(*score);
        }
    }
    let objectives: Vec<f64> = std::iter::once(out.initial_objective)
        .chain(out.moves.iter().map(|m| m.objective))
        .collect();
    if !objectives.windows(2).all(|w| w[1] >= w[0]) {
        problems.push("objective decreased".into());
    }
    if accepted != out.moves.iter().map(|m| m.objective).collect::<Vec<_>>() {
        problems.push("accepted moves disagree with the replay".into());
    }
    if !changed(&current, &out.model).is_empty() {
        problems.push("final rule differs from the replay".into());
    }
    check(
        problems.is_empty(),
        if problems.is_empty() {
            format!(
                "{} moves, {} evaluations, accuracy {:.4} -> {:.4}",
                out.moves.len(),
                out.evaluations,
                out.initial_objective,
                out.objective
            )
        } else {
            problems.join("; ")
        },
    )
}

fn run_pipeline(dir: &std::path::Path) -> Result<Vec<u8>, String> {
    let rule = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data/demo_rule.cmbp");
    let p = |n: &str| dir.join(n).to_str().unwrap().to_string();
    let steps: Vec<Vec<String>> = [
        vec!["gen", "--seed", "12", "--dialogues", "60", "--confusion", "0.2", "-o", &p("c.jsonl")],
        vec!["build", "-o", &p("t.json")],
        vec!["init", "--topology", &p("t.json"), "--coefficients", rule.to_str().unwrap(), "-o", &p("i.json")],
        vec![
            "train", "--topology", &p("i.json"), "--corpus", &p("c.jsonl"), "--batch-size", "8",
            "--epochs", "10", "--seed", "13", "-o", &p("w.json"),
        ],
        vec!["track", "--topology", &p("w.json"), "--corpus", &p("c.jsonl"), "-o", &p("b.jsonl")],
        vec!["eval", "--corpus", &p("c.jsonl"), "--beliefs", &p("b.jsonl"), "-o", &p("report.json")],
    ]
    .iter()
    .map(|s| s.iter().map(|a| a.to_string()).collect())
    .collect();
    for args in steps {
        let out = Command::new(env!("CARGO_BIN_EXE_rpn"))
            .args(&args)
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("rpn {} failed: {}", args[0], String::from_utf8_lossy(&out.stderr)));
        }
    }
    std::fs::read(dir.join("report.json")).map_err(|e| e.to_string())
}

fn determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (ra, rb) = (run_pipeline(a.path())?, run_pipeline(b.path())?);
    let same_weights = std::fs::read(a.path().join("w.json")).ok() == std::fs::read(b.path().join("w.json")).ok();
    check(
        ra == rb && same_weights,
        format!(
            "reports {}, trained topologies {}",
            if ra == rb { "identical" } else { "differ" },
            if same_weights { "identical" } else { "differ" }
        ),
    )
}

fn main() {
    let criteria: [(&str, u64, fn() -> Outcome); 9] = [
        ("combinatorics", 1, combinatorics),
        ("rule/network equivalence", 10, rule_equivalence),
        ("gradient fidelity", 60, gradient_fidelity),
        ("activation properties", 60, activation_properties),
        ("rule recovery", 300, rule_recovery),
        ("knowledge transfer", 900, knowledge_transfer),
        ("metric oracle", 600, metric_oracle),
        ("hill climbing", 600, hill_climbing),
        ("end-to-end determinism", 600, determinism),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let result = within(elapsed, Duration::from_secs(*limit), result);
        let (tag, detail) = match &result {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {} ({name}): {tag} [{elapsed:.2?}] {detail}", i + 1);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
