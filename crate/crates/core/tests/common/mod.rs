#![allow(dead_code)]

use qresize::circuit::{Circuit, Gate};
use qresize::dependency::ResizePair;
use qresize::instantiate::InstantiationConfig;
use qresize::synthesis::{fragment_topology, qsearch, CouplingGraph};
use qresize::unitary::circuit_unitary;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn angle(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI)
}

pub fn random_u3(rng: &mut ChaCha8Rng, w: usize) -> Gate {
    Gate::u3(w, angle(rng), angle(rng), angle(rng))
}

/// Random circuit over the unitary gate set.
pub fn random_circuit(rng: &mut ChaCha8Rng, n: usize, len: usize) -> Circuit {
    let mut c = Circuit::new(n);
    for _ in 0..len {
        let a = rng.gen_range(0..n);
        let two = n > 1 && rng.gen_bool(0.5);
        let gate = if two {
            let mut b = rng.gen_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            if rng.gen_bool(0.7) {
                Gate::cnot(a, b)
            } else {
                Gate::cz(a, b)
            }
        } else {
            match rng.gen_range(0..5) {
                0 => Gate::h(a),
                1 => Gate::x(a),
                2 => Gate::rz(a, angle(rng)),
                3 => Gate::rx(a, angle(rng)),
                _ => random_u3(rng, a),
            }
        };
        c.push(gate).unwrap();
    }
    c
}

/// Resizable pairs by exhaustive schedule search: `(h, g)` is resizable iff
/// some order respecting per-wire gate order runs every gate on `h` before
/// any gate on `g`. Works on at most 20 gates.
pub fn schedule_oracle_pairs(c: &Circuit) -> Vec<ResizePair> {
    let m = c.len();
    assert!(m <= 20);
    let gates = c.gates();
    // Every earlier gate sharing a wire must run first.
    let before: Vec<u32> = (0..m)
        .map(|i| {
            (0..i)
                .filter(|&j| gates[j].wires.iter().any(|w| gates[i].wires.contains(w)))
                .fold(0u32, |acc, j| acc | (1 << j))
        })
        .collect();
    let on = |w: usize| -> u32 {
        (0..m).filter(|&i| gates[i].wires.contains(&w)).fold(0u32, |acc, i| acc | (1 << i))
    };
    let full: u32 = if m == 32 { u32::MAX } else { (1u32 << m) - 1 };
    let mut out = Vec::new();
    for h in 0..c.width() {
        for g in 0..c.width() {
            if h == g {
                continue;
            }
            let (hm, gm) = (on(h), on(g));
            let mut seen = std::collections::HashSet::new();
            let mut stack = vec![0u32];
            let mut ok = false;
            while let Some(s) = stack.pop() {
                if s == full {
                    ok = true;
                    break;
                }
                if !seen.insert(s) {
                    continue;
                }
                for i in 0..m {
                    let bit = 1u32 << i;
                    if s & bit != 0 || before[i] & !s != 0 {
                        continue;
                    }
                    if gm & bit != 0 && hm & !s != 0 {
                        continue;
                    }
                    stack.push(s | bit);
                }
            }
            if ok {
                out.push(ResizePair::new(h, g));
            }
        }
    }
    out
}

/// A two-region circuit that is resizable for the returned pair by
/// construction. Region A avoids the guest, region B avoids the host, and
/// every CNOT lies on the fragmented version of `target`.
pub fn planted(rng: &mut ChaCha8Rng, target: &CouplingGraph, cx_per_region: usize) -> (Circuit, ResizePair) {
    let n = target.n_wires() + 1;
    let host = rng.gen_range(0..n);
    let mut guest = rng.gen_range(0..n - 1);
    if guest >= host {
        guest += 1;
    }
    let pair = ResizePair::new(host, guest);
    let pre = fragment_topology(target, pair, n).unwrap();
    let mut c = Circuit::new(n);
    for skip in [guest, host] {
        let edges: Vec<(usize, usize)> = pre.edges().filter(|&(a, b)| a != skip && b != skip).collect();
        for w in (0..n).filter(|&w| w != skip) {
            c.push(random_u3(rng, w)).unwrap();
        }
        for _ in 0..cx_per_region {
            if edges.is_empty() {
                break;
            }
            let (mut a, mut b) = edges[rng.gen_range(0..edges.len())];
            if rng.gen_bool(0.5) {
                std::mem::swap(&mut a, &mut b);
            }
            c.push(Gate::cnot(a, b)).unwrap();
            c.push(random_u3(rng, a)).unwrap();
            c.push(random_u3(rng, b)).unwrap();
        }
    }
    (c, pair)
}

/// Resynthesizes `c` on all-to-all coupling, which generally destroys its
/// two-region structure while keeping its unitary.
pub fn scramble(c: &Circuit, seed: u64) -> Circuit {
    let target = circuit_unitary(c, None).unwrap();
    let cfg = InstantiationConfig::default().with_epsilon(1e-12).with_seed(seed);
    qsearch(&target, &CouplingGraph::all_to_all(c.width()), &cfg, 12).unwrap()
}

/// Random connected graph on `n` wires: a random spanning tree plus extra edges.
pub fn random_connected(rng: &mut ChaCha8Rng, n: usize) -> CouplingGraph {
    let mut edges = Vec::new();
    for b in 1..n {
        edges.push((rng.gen_range(0..b), b));
    }
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen_bool(0.3) {
                edges.push((a, b));
            }
        }
    }
    CouplingGraph::new(n, edges).unwrap()
}

/// U3 on every wire, then one `[CNOT(a, b), U3(a), U3(b)]` layer per edge.
pub fn layered(n: usize, edges: &[(usize, usize)]) -> Circuit {
    let mut c = Circuit::new(n);
    for w in 0..n {
        c.push(Gate::u3(w, 0.0, 0.0, 0.0)).unwrap();
    }
    for &(a, b) in edges {
        c.push(Gate::cnot(a, b)).unwrap();
        c.push(Gate::u3(a, 0.0, 0.0, 0.0)).unwrap();
        c.push(Gate::u3(b, 0.0, 0.0, 0.0)).unwrap();
    }
    c
}
