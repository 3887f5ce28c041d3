//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Runs the criteria one after another so
//! wall-clock budgets are measured without competing tests.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use qresize::bench::{generate_benchmark, BenchOptions, Family};
use qresize::circuit::{Circuit, Gate};
use qresize::dependency::{find_resizable_pairs, inverse_relabel, search_resize, CostSpec, ResizePair};
use qresize::instantiate::{instantiate_blocks, InstantiationConfig, ParamProblem};
use qresize::pipeline::{report_json, resize_circuit, run_pipeline, Flow, PipelineConfig, Timings};
use qresize::qasm::emit_qasm;
use qresize::synthesis::{fragment_topology, qsearch, qsearch_two_region, CouplingGraph};
use qresize::unitary::{circuit_unitary, hs_distance, random_unitary, random_unitary_with};
use qresize::unitary_resize::{build_check_template, check_all_pairs, resize_via_synthesis_with, UnitaryResizeConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

fn benchmark_rows() -> Outcome {
    let cfg = PipelineConfig::default();
    let mut details = Vec::new();
    let mut pass = true;
    // (family, n, expected width, exact cx, max cx, exact depth)
    let rows: [(Family, usize, usize, Option<usize>, Option<usize>, Option<usize>); 4] = [
        (Family::Bv, 10, 2, Some(9), None, Some(9)),
        (Family::Dj, 10, 2, None, None, None),
        (Family::QaoaRing, 5, 3, None, Some(14), None),
        (Family::QaoaRing, 10, 3, None, None, None),
    ];
    for (family, n, width, cx, max_cx, depth) in rows {
        let c = generate_benchmark(family, n, &BenchOptions::default()).unwrap();
        let t = Instant::now();
        let result = resize_circuit(&c, &cfg);
        let elapsed = t.elapsed();
        match result {
            Ok((_, report)) => {
                let s = report.output;
                let ok = s.width == width
                    && cx.map_or(true, |v| s.cx_count == v)
                    && max_cx.map_or(true, |v| s.cx_count <= v)
                    && depth.map_or(true, |v| s.two_qubit_depth == v)
                    && elapsed < Duration::from_secs(60);
                pass &= ok;
                details.push(format!(
                    "{family}-{n}: {n}->{} cx {} depth {} in {}",
                    s.width,
                    s.cx_count,
                    s.two_qubit_depth,
                    secs(elapsed)
                ));
            }
            Err(e) => {
                pass = false;
                details.push(format!("{family}-{n}: error {e}"));
            }
        }
    }
    outcome(pass, details.join("; "))
}

fn oracle_equivalence() -> Outcome {
    let t = Instant::now();
    let mut mismatches = 0;
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..=6);
        let len = rng.gen_range(0..=12);
        let c = common::random_circuit(&mut rng, n, len);
        if find_resizable_pairs(&c) != common::schedule_oracle_pairs(&c) {
            mismatches += 1;
        }
    }
    let elapsed = t.elapsed();
    outcome(
        mismatches == 0 && elapsed < Duration::from_secs(120),
        format!("200 circuits, {mismatches} mismatches, {}", secs(elapsed)),
    )
}

fn semantics_preservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    while count < 50 {
        let n = rng.gen_range(2..=4);
        let len = rng.gen_range(1..=10);
        let c = common::random_circuit(&mut rng, n, len);
        if find_resizable_pairs(&c).is_empty() {
            continue;
        }
        count += 1;
        let (resized, plan) = search_resize(&c, &CostSpec::max_reuse()).unwrap();
        let back = inverse_relabel(&resized, &plan).unwrap();
        let d = hs_distance(&circuit_unitary(&c, None).unwrap(), &circuit_unitary(&back, None).unwrap()).unwrap();
        worst = worst.max(d);
    }
    outcome(worst < 1e-12, format!("50 circuits, worst distance {worst:.2e}"))
}

fn planted_instantiation() -> Outcome {
    let mut hits = 0;
    let mut max_iters = 0;
    let trials = 50;
    for seed in 0..trials as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = if seed % 2 == 0 { 3 } else { 4 };
        let host = rng.gen_range(0..n);
        let mut guest = rng.gen_range(0..n - 1);
        if guest >= host {
            guest += 1;
        }
        let template = build_check_template(n, ResizePair::new(host, guest)).unwrap();
        let blocks = vec![random_unitary_with(n - 1, &mut rng), random_unitary_with(n - 1, &mut rng)];
        let target = circuit_unitary(&template, Some(&blocks)).unwrap();
        let cfg = InstantiationConfig { max_sweeps: 1000, seed, ..InstantiationConfig::default() };
        let res = instantiate_blocks(&template, &target, &cfg).unwrap();
        max_iters = max_iters.max(res.iterations);
        if res.distance < 1e-10 {
            hits += 1;
        }
    }
    let rate = hits as f64 / trials as f64;
    outcome(rate >= 0.95, format!("{hits}/{trials} below 1e-10, at most {max_iters} sweeps per run"))
}

fn swap_impossibility() -> Outcome {
    let swap = Circuit::from_gates(2, vec![Gate::cnot(0, 1), Gate::cnot(1, 0), Gate::cnot(0, 1)]).unwrap();
    let target = circuit_unitary(&swap, None).unwrap();
    let checks = check_all_pairs(&target, &InstantiationConfig::default());
    let min = checks.iter().map(|o| o.distance).fold(f64::INFINITY, f64::min);
    let successes = checks.iter().filter(|o| o.success).count();
    outcome(min >= 0.5 - 1e-6 && successes == 0, format!("min distance {min:.9}, {successes} successes"))
}

fn gradient_correctness() -> Outcome {
    let structures = [
        common::layered(2, &[(0, 1)]),
        common::layered(2, &[(0, 1), (1, 0), (0, 1)]),
        common::layered(3, &[(0, 1), (1, 2)]),
        common::layered(3, &[(0, 1), (1, 2), (0, 2), (2, 1)]),
        Circuit::from_gates(
            2,
            vec![Gate::rz(0, 0.0), Gate::h(1), Gate::cnot(0, 1), Gate::rx(1, 0.0), Gate::rz(1, 0.0), Gate::cz(0, 1), Gate::rx(0, 0.0)],
        )
        .unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    let mut points = 0;
    for s in &structures {
        let target = random_unitary(s.width(), rng.gen());
        let p = ParamProblem::new(s, &target).unwrap();
        for _ in 0..20 {
            let x: Vec<f64> = (0..p.num_params()).map(|_| common::angle(&mut rng)).collect();
            let (_, g) = p.cost_and_gradient(&x);
            let h = 1e-6;
            let fd: Vec<f64> = (0..x.len())
                .map(|i| {
                    let mut up = x.clone();
                    let mut dn = x.clone();
                    up[i] += h;
                    dn[i] -= h;
                    (p.cost_and_gradient(&up).0 - p.cost_and_gradient(&dn).0) / (2.0 * h)
                })
                .collect();
            let err = g.iter().zip(&fd).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let scale = fd.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-8);
            worst = worst.max(err / scale);
            points += 1;
        }
    }
    outcome(worst <= 1e-5, format!("{points} points, worst relative error {worst:.2e}"))
}

fn synthesis_universality() -> Outcome {
    let cfg = InstantiationConfig::default().with_epsilon(1e-8);
    let coupling = CouplingGraph::all_to_all(2);
    let mut hits = 0;
    let mut slowest = Duration::ZERO;
    for seed in 0..20u64 {
        let target = random_unitary(2, 1000 + seed);
        let t = Instant::now();
        let res = qsearch(&target, &coupling, &InstantiationConfig { seed, ..cfg }, 3);
        let elapsed = t.elapsed();
        slowest = slowest.max(elapsed);
        if let Ok(c) = res {
            let d = hs_distance(&target, &circuit_unitary(&c, None).unwrap()).unwrap();
            if c.cx_count() <= 3 && d < 1e-8 && elapsed < Duration::from_secs(60) {
                hits += 1;
            }
        }
    }
    outcome(hits >= 19, format!("{hits}/20 within 3 CNOTs, slowest {}", secs(slowest)))
}

fn unitary_flow_end_to_end() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut hits = 0;
    let mut notes = Vec::new();
    let mut slowest = Duration::ZERO;
    for i in 0..20u64 {
        let n = if i < 10 { 3 } else { 4 };
        let coupling = if n == 4 && i % 2 == 1 { CouplingGraph::all_to_all(3) } else { CouplingGraph::linear(n - 1) };
        let (planted, _) = common::planted(&mut rng, &coupling, 2);
        let scrambled = common::scramble(&planted, i);
        let t = Instant::now();
        let res = resize_via_synthesis_with(&scrambled, &coupling, &UnitaryResizeConfig::default());
        let elapsed = t.elapsed();
        slowest = slowest.max(elapsed);
        match res {
            Ok(o) => {
                let on_coupling = o
                    .circuit
                    .gates()
                    .iter()
                    .filter(|g| g.is_two_qubit())
                    .all(|g| coupling.has_edge(g.wires[0], g.wires[1]));
                if o.circuit.width() == n - 1 && on_coupling && o.distance < 1e-8 && elapsed < Duration::from_secs(300) {
                    hits += 1;
                } else {
                    notes.push(format!("#{i} invalid output"));
                }
            }
            Err(e) => notes.push(format!("#{i} {e}")),
        }
    }
    let mut detail = format!("{hits}/20 resized, slowest {}", secs(slowest));
    if !notes.is_empty() {
        detail.push_str(&format!(" ({})", notes.join(", ")));
    }
    outcome(hits >= 18, detail)
}

fn fragmentation_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cfg = InstantiationConfig::default().with_epsilon(1e-8);
    let mut bad_edges = 0;
    let mut violations = 0;
    let mut synthesized = 0;
    for _ in 0..50 {
        let m = rng.gen_range(1..=3);
        let target_coupling = common::random_connected(&mut rng, m);
        let (planted, pair) = common::planted(&mut rng, &target_coupling, 1);
        let pre = fragment_topology(&target_coupling, pair, m + 1).unwrap();
        let post = |w: usize| {
            let w = if w == pair.guest { pair.host } else { w };
            if w > pair.guest {
                w - 1
            } else {
                w
            }
        };
        bad_edges += pre.edges().filter(|&(a, b)| !target_coupling.has_edge(post(a), post(b))).count();
        let a: Vec<usize> = (0..=m).filter(|&w| w != pair.guest).collect();
        let b: Vec<usize> = (0..=m).filter(|&w| w != pair.host).collect();
        let target = circuit_unitary(&planted, None).unwrap();
        if let Ok(out) = qsearch_two_region(&a, &b, &target, &pre, &cfg, 6) {
            synthesized += 1;
            match qresize::dependency::apply_reuse(&out, pair) {
                Ok(resized) => {
                    violations += resized
                        .gates()
                        .iter()
                        .filter(|g| g.is_two_qubit() && !target_coupling.has_edge(g.wires[0], g.wires[1]))
                        .count();
                }
                Err(_) => violations += 1,
            }
        }
    }
    outcome(
        bad_edges == 0 && violations == 0,
        format!("50 graphs, {bad_edges} unmapped edges, {synthesized} synthesized, {violations} coupling violations"),
    )
}

fn without_timings(mut r: qresize::pipeline::RunReport) -> String {
    r.timings = Timings::default();
    report_json(&r)
}

fn determinism() -> Outcome {
    let qaoa = emit_qasm(&generate_benchmark(Family::QaoaRing, 5, &BenchOptions::default()).unwrap(), 1);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (planted, _) = common::planted(&mut rng, &CouplingGraph::linear(2), 2);
    let small = emit_qasm(&common::scramble(&planted, 0), 1);
    let runs = [
        (qaoa, PipelineConfig { seed: 7, ..PipelineConfig::default() }),
        (small, PipelineConfig { flow: Flow::Unitary, seed: 7, resets: 2, ..PipelineConfig::default() }),
    ];
    let mut same = 0;
    for (qasm, cfg) in &runs {
        let first = run_pipeline(qasm, cfg);
        let second = run_pipeline(qasm, cfg);
        if let (Ok((q1, r1)), Ok((q2, r2))) = (first, second) {
            if q1 == q2 && without_timings(r1) == without_timings(r2) {
                same += 1;
            }
        }
    }
    outcome(same == runs.len(), format!("{same}/{} runs byte-identical", runs.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("benchmark qubit reductions", benchmark_rows),
        ("dependency oracle equivalence", oracle_equivalence),
        ("semantics preservation", semantics_preservation),
        ("planted-solution instantiation", planted_instantiation),
        ("SWAP impossibility", swap_impossibility),
        ("gradient correctness", gradient_correctness),
        ("synthesis universality", synthesis_universality),
        ("unitary flow end-to-end", unitary_flow_end_to_end),
        ("fragmentation round-trip", fragmentation_round_trip),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = run();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag} {:>2} {name}: {} [{}]", i + 1, o.detail, secs(t.elapsed()));
        if !o.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
