//! Acceptance suite: prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Criteria run sequentially so the timings are not
//! skewed by each other.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use image::RgbImage;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use roadtracer_core::adaptive::StructureThresholds;
use roadtracer_core::dataset::Dataset;
use roadtracer_core::dbn::format_layer_sizes;
use roadtracer_core::decision::{
    bin_center, evaluate_accuracy, train_head_with, DecisionConfig, DecisionOutput, HeadSchedule,
};
use roadtracer_core::eval::{match_vertices, precision, recall, MatchResult};
use roadtracer_core::graph::{BBox, Point, RoadGraph};
use roadtracer_core::model::Model;
use roadtracer_core::pretrain::{pretrain_adaptive, pretrain_adaptive_with, PretrainSchedule};
use roadtracer_core::rbm::{BinaryVector, RbmParams, TrainBatch};
use roadtracer_core::search::{search, search_multi, step_position, SearchConfig, StepOutcome, TraceStep};
use roadtracer_core::world::{
    component_seeds, generate_world, make_training_set, oracle_search_config, OracleContext,
    TrainingSetOptions, WorldSpec,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> (Outcome, Duration) {
    let t = Instant::now();
    let mut out = f();
    let took = t.elapsed();
    if took >= limit {
        out.pass = false;
        out.detail.push_str(&format!("; over time limit {limit:?}"));
    }
    (out, took)
}

// 1. Exact-model oracle suite.
fn exact_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_sum = 0.0f64;
    let mut worst_energy = 0.0f64;
    for n in 0..100u64 {
        let i = rng.random_range(1..=8);
        let j = rng.random_range(1..=12 - i);
        let mut p = RbmParams::init(i, j, n);
        p.visible_bias.mapv_inplace(|_| rng.random_range(-2.0..2.0));
        p.hidden_bias.mapv_inplace(|_| rng.random_range(-2.0..2.0));
        p.weights.mapv_inplace(|_| rng.random_range(-2.0..2.0));
        let table = p.joint_table_exact().unwrap();
        worst_sum = worst_sum.max((table.iter().sum::<f64>() - 1.0).abs());
        for _ in 0..20 {
            let v = BinaryVector::from_bits(rng.random_range(0..1u64 << i), i);
            let h = BinaryVector::from_bits(rng.random_range(0..1u64 << j), j);
            let mut brute = 0.0;
            for a in 0..i {
                brute -= p.visible_bias[a] * v.as_slice()[a] as f64;
            }
            for b in 0..j {
                brute -= p.hidden_bias[b] * h.as_slice()[b] as f64;
            }
            for a in 0..i {
                for b in 0..j {
                    brute -= v.as_slice()[a] as f64 * p.weights[[a, b]] * h.as_slice()[b] as f64;
                }
            }
            worst_energy = worst_energy.max((p.energy(&v, &h).unwrap() - brute).abs());
        }
    }
    check(
        worst_sum <= 1e-9 && worst_energy <= 1e-12,
        format!("max |sum p - 1| = {worst_sum:.2e}, max energy error = {worst_energy:.2e}"),
    )
}

// 2. CD-1 reduces exact KL on a 3-pattern task.
fn learning_signal() -> Outcome {
    let patterns = [0b110000u64, 0b001100, 0b000011].map(|b| BinaryVector::from_bits(b, 6));
    let batch = TrainBatch::from_binary(&patterns).unwrap();
    let mut p = RbmParams::init(6, 4, 7);
    let before = p.kl_from_data_exact(&patterns).unwrap();
    for epoch in 0..500u64 {
        p = p.cd_update(&batch, 1, 0.1, 1000 + epoch).unwrap();
    }
    let after = p.kl_from_data_exact(&patterns).unwrap();
    check(after < before, format!("KL {before:.4} -> {after:.4}"))
}

// 3. Scripted traces.
fn scripted(actions: Vec<Option<usize>>, bins: usize) -> impl FnMut(&RoadGraph, Point, &RgbImage) -> DecisionOutput {
    let mut it = actions.into_iter();
    move |_: &RoadGraph, _: Point, _: &RgbImage| {
        DecisionOutput::certain(it.next().expect("script exhausted"), bins)
    }
}

fn trace_matches(got: &[TraceStep], want: &[(Point, bool, StepOutcome)]) -> bool {
    got.len() == want.len()
        && got
            .iter()
            .zip(want)
            .all(|(g, (p, walk, o))| g.position == *p && g.action.is_walk() == *walk && g.outcome == *o)
}

fn algorithm_conformance() -> Outcome {
    const BINS: usize = 64;
    const D: f64 = 12.0;
    let image = RgbImage::new(200, 200);
    let east = 0;
    let north = BINS / 4;
    let south = 3 * BINS / 4;
    let mut failures = Vec::new();

    // Stop immediately.
    let cfg = SearchConfig::default();
    let v0 = Point::new(50.0, 50.0);
    let r = search(&image, v0, &cfg, &mut scripted(vec![None], BINS)).unwrap();
    if !(trace_matches(&r.trace, &[(v0, false, StepOutcome::Popped)]) && r.graph.n_vertices() == 1) {
        failures.push("stop-immediately");
    }

    // Always walk east inside a box 5D wide.
    let cfg = SearchConfig {
        bbox: Some(BBox::new(Point::new(0.0, 0.0), Point::new(5.0 * D, 200.0)).unwrap()),
        ..SearchConfig::default()
    };
    let v0 = Point::new(0.0, 100.0);
    let a = bin_center(east, BINS);
    let path: Vec<Point> = std::iter::successors(Some(v0), |&p| Some(step_position(p, D, a)))
        .take(6)
        .collect();
    let mut want = Vec::new();
    for k in 0..5 {
        want.push((path[k], true, StepOutcome::Pushed(k + 1)));
    }
    for k in (0..6).rev() {
        want.push((path[k], true, StepOutcome::Popped));
    }
    let r = search(&image, v0, &cfg, &mut scripted(vec![Some(east); 11], BINS)).unwrap();
    let is_path = r.graph.n_vertices() == 6 && r.graph.n_edges() == 5 && (1..6).all(|k| r.graph.has_edge(k - 1, k));
    if !(trace_matches(&r.trace, &want) && is_path) {
        failures.push("five-step east path");
    }

    // Intersection: vertices 1-4 approach from the west, then walk east,
    // walk north, stop, back at the junction search south, stop, drain.
    let cfg = SearchConfig::default();
    let step = |p: Point, bin: usize| step_position(p, D, bin_center(bin, BINS));
    let v1 = Point::new(40.0, 100.0);
    let v2 = step(v1, east);
    let v3 = step(v2, east);
    let v4 = step(v3, east);
    let v5 = step(v4, east);
    let v6 = step(v5, north);
    let v7 = step(v4, south);
    let script = vec![
        Some(east),
        Some(east),
        Some(east),
        Some(east),
        Some(north),
        None,
        None,
        Some(south),
        None,
        None,
        None,
        None,
        None,
    ];
    let want = [
        (v1, true, StepOutcome::Pushed(1)),
        (v2, true, StepOutcome::Pushed(2)),
        (v3, true, StepOutcome::Pushed(3)),
        (v4, true, StepOutcome::Pushed(4)),
        (v5, true, StepOutcome::Pushed(5)),
        (v6, false, StepOutcome::Popped),
        (v5, false, StepOutcome::Popped),
        (v4, true, StepOutcome::Pushed(6)),
        (v7, false, StepOutcome::Popped),
        (v4, false, StepOutcome::Popped),
        (v3, false, StepOutcome::Popped),
        (v2, false, StepOutcome::Popped),
        (v1, false, StepOutcome::Popped),
    ];
    let r = search(&image, v1, &cfg, &mut scripted(script, BINS)).unwrap();
    if !(trace_matches(&r.trace, &want) && r.graph.n_vertices() == 7 && r.graph.n_edges() == 6) {
        failures.push("intersection");
    }

    check(
        failures.is_empty(),
        if failures.is_empty() {
            "3 scripted traces reproduced step for step".to_string()
        } else {
            format!("mismatch: {}", failures.join(", "))
        },
    )
}

// 4. Oracle-driven search on synthetic worlds.
fn oracle_end_to_end() -> Outcome {
    let mut worst_p = 1.0f64;
    let mut worst_r = 1.0f64;
    for seed in 0..10 {
        let spec = WorldSpec::with_seed(500 + seed);
        let world = generate_world(&spec).unwrap();
        let cfg = oracle_search_config(&spec);
        let mut oracle = OracleContext::new(world.graph.clone(), cfg.snap_radius(), 64);
        let r = search_multi(&world.image, &component_seeds(&world.graph), &cfg, &mut oracle).unwrap();
        let m = match_vertices(&r.graph, &world.graph, spec.segment / 2.0, spec.segment).unwrap();
        worst_p = worst_p.min(precision(&m));
        worst_r = worst_r.min(recall(&m));
        if r.budget_exhausted {
            return check(false, format!("world {seed}: step budget exhausted"));
        }
    }
    check(
        worst_p >= 0.95 && worst_r >= 0.95,
        format!("10 worlds, min precision {worst_p:.3}, min recall {worst_r:.3}"),
    )
}

// 5 and 6. Learned model.
struct Learned {
    samples: usize,
    layers: String,
    accuracy: f64,
    /// `(recall at T=0.1, recall at T=0.3)` per held-out world.
    recalls: Vec<(MatchResult, MatchResult)>,
}

fn train_learned() -> Learned {
    let decision = DecisionConfig::default();
    let opts = TrainingSetOptions {
        seed: 3,
        ..TrainingSetOptions::default()
    };
    let mut data = Dataset::new(decision.window, decision.angle_bins);
    let mut next_seed = 1000;
    while data.len() < 50_000 {
        let specs: Vec<WorldSpec> = (0..4).map(|k| WorldSpec::with_seed(next_seed + k)).collect();
        next_seed += 4;
        data.extend(&make_training_set(&specs, &decision, &opts).unwrap()).unwrap();
    }
    let held_specs: Vec<WorldSpec> = (0..4).map(|k| WorldSpec::with_seed(9000 + k)).collect();
    let held = make_training_set(&held_specs, &decision, &opts).unwrap();

    let thresholds = StructureThresholds {
        max_hidden: 256,
        max_layers: 2,
        ..StructureThresholds::default()
    };
    let schedule = PretrainSchedule {
        initial_hidden: 128,
        epochs_per_layer: 2,
        samples_per_epoch: Some(8000),
        learning_rate: 0.01,
        seed: 11,
        ..PretrainSchedule::default()
    };
    let stack = pretrain_adaptive_with(&data, &thresholds, &schedule, |_| {}).unwrap();
    let head = HeadSchedule {
        epochs: 10,
        learning_rate: 0.02,
        seed: 12,
        ..HeadSchedule::default()
    };
    let stack = train_head_with(&stack, &data, &head, |_| {}).unwrap();
    let (accuracy, _) = evaluate_accuracy(&stack, &held, 1).unwrap();
    let layers = format_layer_sizes(&stack.layer_sizes()[1..]);
    let mut model = Model::new(stack, decision).unwrap();

    let mut recalls = Vec::new();
    for spec in &held_specs {
        let world = generate_world(spec).unwrap();
        let seeds = component_seeds(&world.graph);
        let mut run = |t: f64| {
            let cfg = SearchConfig {
                threshold: t,
                ..oracle_search_config(spec)
            };
            let r = search_multi(&world.image, &seeds, &cfg, &mut model).unwrap();
            match_vertices(&r.graph, &world.graph, spec.segment / 2.0, spec.segment).unwrap()
        };
        let low = run(0.1);
        let high = run(0.3);
        recalls.push((low, high));
    }
    Learned {
        samples: data.len(),
        layers,
        accuracy,
        recalls,
    }
}

fn pooled_recall(results: impl Iterator<Item = MatchResult>) -> f64 {
    let (tp, fn_) = results.fold((0, 0), |(tp, f), m| (tp + m.tp, f + m.fn_));
    recall(&MatchResult::from_counts(tp, 0, fn_))
}

fn learned_end_to_end(l: &Learned) -> Outcome {
    let r = pooled_recall(l.recalls.iter().map(|(low, _)| low.clone()));
    check(
        l.samples >= 50_000 && l.accuracy >= 0.90 && r >= 0.70,
        format!(
            "{} samples, layers {}, held-out accuracy {:.3}, recall(T=0.1) {:.3}",
            l.samples, l.layers, l.accuracy, r
        ),
    )
}

fn threshold_behaviour(l: &Learned) -> Outcome {
    let pairs: Vec<(f64, f64)> = l.recalls.iter().map(|(a, b)| (recall(a), recall(b))).collect();
    let ok = pairs.iter().all(|(low, high)| low >= high);
    let text: Vec<String> = pairs.iter().map(|(a, b)| format!("{a:.3}>={b:.3}")).collect();
    check(ok, format!("recall T=0.1 vs T=0.3 per world: {}", text.join(", ")))
}

// 7. Structure adaptation.
fn pattern_data(k: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pats: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..16).map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 }).collect())
        .collect();
    Array2::from_shape_fn((256, 16), |(r, c)| pats[r % k][c])
}

fn structure_adaptation() -> Outcome {
    let thresholds = StructureThresholds {
        max_hidden: 64,
        max_layers: 3,
        ..StructureThresholds::default()
    };
    let mut lines = Vec::new();
    let mut ok = true;
    for seed in 0..3u64 {
        let mut totals = Vec::new();
        for k in [2usize, 8] {
            let schedule = PretrainSchedule {
                initial_hidden: 4,
                epochs_per_layer: 20,
                batch_size: 16,
                learning_rate: 0.1,
                seed,
                ..PretrainSchedule::default()
            };
            let stack = pretrain_adaptive(&pattern_data(k, 100 + seed), &thresholds, &schedule).unwrap();
            let replayed = stack.log().replay(&[16, 4]).unwrap();
            ok &= replayed == stack.layer_sizes();
            totals.push(stack.layer_sizes()[1..].iter().sum::<usize>());
        }
        ok &= totals[1] >= totals[0];
        lines.push(format!("seed {seed}: {} vs {}", totals[1], totals[0]));
    }
    check(ok, format!("neurons 8 vs 2 patterns: {}; log replay matches", lines.join(", ")))
}

// 8. Precision and recall on constructed pairs.
fn graph(vertices: &[(f64, f64)], edges: &[(usize, usize)]) -> RoadGraph {
    let mut g = RoadGraph::new();
    for &(x, y) in vertices {
        g.add_vertex(Point::new(x, y));
    }
    for &(a, b) in edges {
        g.add_edge(a, b).unwrap();
    }
    g
}

fn evaluation_correctness() -> Outcome {
    let row = |xs: &[f64]| graph(&xs.iter().map(|&x| (x, 0.0)).collect::<Vec<_>>(), &[]);
    let tri = [(0.0, 0.0), (12.0, 0.0), (6.0, 108f64.sqrt())];
    // (pred, truth, tp, fp, fn, precision, recall)
    let cases: Vec<(RoadGraph, RoadGraph, usize, usize, usize, f64, f64)> = vec![
        (row(&[0.0]), row(&[0.0]), 1, 0, 0, 1.0, 1.0),
        (row(&[]), row(&[]), 0, 0, 0, 1.0, 1.0),
        (row(&[]), row(&[0.0, 20.0, 40.0]), 0, 0, 3, 1.0, 0.0),
        (row(&[0.0, 20.0]), row(&[]), 0, 2, 0, 0.0, 1.0),
        (row(&[0.0, 1.0]), row(&[0.5]), 1, 1, 0, 0.5, 1.0),
        (row(&[0.5]), row(&[0.0, 1.0]), 1, 0, 1, 1.0, 0.5),
        (row(&[6.0]), row(&[0.0]), 1, 0, 0, 1.0, 1.0),
        (row(&[6.01]), row(&[0.0]), 0, 1, 1, 0.0, 0.0),
        (
            graph(&[(0.0, 3.0), (12.0, 3.0), (24.0, 3.0)], &[(0, 1), (1, 2)]),
            graph(&[(0.0, 0.0), (12.0, 0.0), (24.0, 0.0)], &[(0, 1), (1, 2)]),
            3, 0, 0, 1.0, 1.0,
        ),
        (row(&[0.0, 12.0, 24.0]), graph(&[(0.0, 0.0), (24.0, 0.0)], &[(0, 1)]), 3, 0, 0, 1.0, 1.0),
        (row(&[0.0, 36.0]), graph(&[(0.0, 0.0), (36.0, 0.0)], &[(0, 1)]), 2, 0, 2, 1.0, 0.5),
        // Greedy: the closest pair (5,4) is taken first, stranding both others.
        (row(&[0.0, 5.0]), row(&[4.0, 9.5]), 1, 1, 1, 0.5, 0.5),
        (
            row(&[0.0, 20.0, 40.0, 60.0, 80.0, 100.0, 120.0, 140.0, 500.0, 600.0]),
            row(&[0.0, 20.0, 40.0, 60.0, 80.0, 100.0, 120.0, 140.0]),
            8, 2, 0, 0.8, 1.0,
        ),
        (
            row(&[0.0, 20.0, 40.0, 60.0, 80.0, 100.0, 120.0, 140.0]),
            row(&[0.0, 20.0, 40.0, 60.0, 80.0, 100.0, 120.0, 140.0, 500.0, 600.0]),
            8, 0, 2, 1.0, 0.8,
        ),
        (
            graph(&[(0.0, 0.0), (12.0, 0.0)], &[(0, 1)]),
            graph(&[(0.0, 0.0), (12.0, 0.0), (0.0, 50.0), (12.0, 50.0)], &[(0, 1), (2, 3)]),
            2, 0, 2, 1.0, 0.5,
        ),
        (graph(&[(100.0, 100.0)], &[]), row(&[0.0]), 0, 1, 1, 0.0, 0.0),
        (row(&[3.0, 3.0]), row(&[0.0]), 1, 1, 0, 0.5, 1.0),
        (
            graph(&[tri[2], tri[0], tri[1]], &[(0, 1), (1, 2), (2, 0)]),
            graph(&tri, &[(0, 1), (1, 2), (2, 0)]),
            3, 0, 0, 1.0, 1.0,
        ),
        (graph(&[(0.0, 0.0), (24.0, 0.0)], &[(0, 1)]), row(&[0.0, 12.0, 24.0]), 3, 0, 0, 1.0, 1.0),
        (
            row(&[1.0, 22.0, 45.0, 61.0, 200.0]),
            row(&[0.0, 20.0, 40.0, 60.0, 80.0]),
            4, 1, 1, 0.8, 0.8,
        ),
    ];
    let mut bad = Vec::new();
    for (n, (pred, truth, tp, fp, fn_, p, r)) in cases.iter().enumerate() {
        let m = match_vertices(pred, truth, 6.0, 12.0).unwrap();
        if (m.tp, m.fp, m.fn_) != (*tp, *fp, *fn_) || precision(&m) != *p || recall(&m) != *r {
            bad.push(format!("#{} got ({},{},{})", n + 1, m.tp, m.fp, m.fn_));
        }
    }
    check(
        bad.is_empty() && cases.len() == 20,
        if bad.is_empty() {
            format!("{} pairs exact", cases.len())
        } else {
            bad.join("; ")
        },
    )
}

fn main() -> ExitCode {
    let mut all = true;
    let mut report = |n: usize, name: &str, (o, took): (Outcome, Duration)| {
        all &= o.pass;
        println!(
            "criterion {n} {:<4} {name}: {} ({:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64()
        );
    };
    report(1, "exact-model oracle", timed(Duration::from_secs(10), exact_oracle));
    report(2, "learning signal", timed(Duration::from_secs(30), learning_signal));
    report(3, "graph search conformance", timed(Duration::from_secs(1), algorithm_conformance));
    report(4, "oracle end-to-end", timed(Duration::from_secs(120), oracle_end_to_end));
    let t = Instant::now();
    let learned = train_learned();
    let train_time = t.elapsed();
    let (mut o5, _) = timed(Duration::MAX, || learned_end_to_end(&learned));
    if train_time >= Duration::from_secs(7200) {
        o5.pass = false;
        o5.detail.push_str("; over time limit 2h");
    }
    report(5, "learned end-to-end", (o5, train_time));
    report(6, "threshold behaviour", timed(Duration::from_secs(60), || threshold_behaviour(&learned)));
    report(7, "structure adaptation", timed(Duration::from_secs(120), structure_adaptation));
    report(8, "evaluation correctness", timed(Duration::from_secs(10), evaluation_correctness));
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
