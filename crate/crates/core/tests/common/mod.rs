#![allow(dead_code)]

use causal_behaviour::data::{
    build_binary_series, parse_records, IndividualSeries, MultiSeries, RawRecord, VariableCatalog,
};
use causal_behaviour::discovery::{CausalGraph, LaggedLink};
use causal_behaviour::rng::rng;
use rand::Rng;

/// Random one-hot states with independent fair-coin contexts.
pub fn random_series(n: usize, m: usize, len: usize, individuals: usize, seed: u64) -> MultiSeries {
    let cat = VariableCatalog::synthetic(n, m).unwrap();
    let mut r = rng(seed);
    let inds = (0..individuals)
        .map(|k| {
            let mut data = Vec::with_capacity(len * (n + m));
            for _ in 0..len {
                let s = r.random_range(0..n);
                data.extend((0..n).map(|i| u8::from(i == s)));
                data.extend((0..m).map(|_| u8::from(r.random_bool(0.5))));
            }
            IndividualSeries::new(format!("i{k}"), (0..len as i64).collect(), data, n + m).unwrap()
        })
        .collect();
    MultiSeries::new(cat, inds).unwrap()
}

/// State `t mod n` at tick `t`, plus `m` random contexts.
pub fn cycle_series(n: usize, m: usize, len: usize, seed: u64) -> MultiSeries {
    let cat = VariableCatalog::synthetic(n, m).unwrap();
    let mut r = rng(seed);
    let mut data = Vec::with_capacity(len * (n + m));
    for t in 0..len {
        data.extend((0..n).map(|i| u8::from(i == t % n)));
        data.extend((0..m).map(|_| u8::from(r.random_bool(0.5))));
    }
    let ind = IndividualSeries::new("a", (0..len as i64).collect(), data, n + m).unwrap();
    MultiSeries::new(cat, vec![ind]).unwrap()
}

/// Predecessor links `i-1 -> i` at lag 1.
pub fn cycle_graph(cat: &VariableCatalog, tau: usize) -> CausalGraph {
    let n = cat.n_states();
    let links = (0..n)
        .map(|j| LaggedLink {
            source: (j + n - 1) % n,
            lag: 1,
            target: j,
            strength: 1.0,
            p_value: 0.0,
        })
        .collect();
    CausalGraph::new(cat.clone(), tau, links).unwrap()
}

/// Random graph whose links have distinct keys.
pub fn random_graph(cat: &VariableCatalog, tau: usize, density: f64, seed: u64) -> CausalGraph {
    let mut r = rng(seed);
    let mut links = Vec::new();
    for target in 0..cat.n_states() {
        for lag in 1..=tau {
            for source in 0..cat.n_vars() {
                if r.random_bool(density) {
                    links.push(LaggedLink {
                        source,
                        lag,
                        target,
                        strength: r.random_range(0.0..1.0),
                        p_value: r.random_range(0.0..0.05),
                    });
                }
            }
        }
    }
    CausalGraph::new(cat.clone(), tau, links).unwrap()
}

/// A group of individuals that move between locations and see each other.
pub fn group_series(individuals: usize, len: usize, seed: u64) -> MultiSeries {
    let states: Vec<String> = ["rest", "forage", "vigilance"].iter().map(|s| s.to_string()).collect();
    let locations: Vec<String> = ["burrow", "field"].iter().map(|s| s.to_string()).collect();
    let cat = VariableCatalog::from_spec(&states, &locations, &[]).unwrap();
    let mut r = rng(seed);
    let ids: Vec<String> = (0..individuals).map(|k| format!("m{k}")).collect();
    let mut records = Vec::new();
    for t in 0..len as i64 {
        for id in &ids {
            let neighbours = ids.iter().filter(|o| *o != id && r.random_bool(0.4)).cloned().collect();
            records.push(RawRecord {
                time: t,
                individual: id.clone(),
                behaviour: states[r.random_range(0..states.len())].clone(),
                location: locations[r.random_range(0..locations.len())].clone(),
                neighbours,
            });
        }
    }
    let log = parse_records(records, Some(&cat)).unwrap();
    build_binary_series(&log, &cat).unwrap()
}

/// Plug-in entropy (bits) of a count vector.
pub fn entropy(counts: &[f64]) -> f64 {
    let total: f64 = counts.iter().sum();
    counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / total;
            -p * p.log2()
        })
        .sum()
}

/// `H(X) + H(Y) - H(X, Y)` from a joint count table.
pub fn mi_by_entropies(counts: &[Vec<u64>]) -> f64 {
    let rows: Vec<f64> = counts.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
    let cols: Vec<f64> = (0..counts[0].len())
        .map(|j| counts.iter().map(|r| r[j]).sum::<u64>() as f64)
        .collect();
    let joint: Vec<f64> = counts.iter().flatten().map(|&c| c as f64).collect();
    entropy(&rows) + entropy(&cols) - entropy(&joint)
}

pub struct GradientCheck {
    pub max_relative_error: f64,
    pub accepted: usize,
    pub rejected_near_kink: usize,
    pub coordinates: usize,
}

/// Compares `loss_and_grad` against central differences (`eps = 1e-4`) on
/// `trials` random instances. Instances where a coordinate's second
/// difference reveals a ReLU kink inside `[-eps, eps]` are redrawn.
pub fn gradient_check(trials: usize, seed: u64) -> GradientCheck {
    use causal_behaviour::inference::{loss_and_grad, training_examples, unroll_adjacency, PredictorParams};
    let eps = 1e-4;
    let mut r = rng(seed);
    let mut out = GradientCheck {
        max_relative_error: 0.0,
        accepted: 0,
        rejected_near_kink: 0,
        coordinates: 0,
    };
    let mut instance = 0u64;
    while out.accepted < trials {
        instance += 1;
        let n = r.random_range(2..5);
        let m = r.random_range(0..3);
        let tau = r.random_range(1..4);
        let s = random_series(n, m, 12, 1, seed.wrapping_add(instance));
        let g = random_graph(&s.catalog, tau, 0.3, seed.wrapping_add(instance));
        let u = unroll_adjacency(&g);
        let mut params = PredictorParams::init(n, 6, tau, seed.wrapping_add(instance));
        for layer in &mut params.layers {
            for t in layer.tensors_mut() {
                t.iter_mut().for_each(|v| *v += r.random_range(-0.5..0.5));
            }
        }
        let offset = r.random_range(1..=tau);
        let examples = training_examples(&s, params.history(offset));
        let batch = &examples[..5.min(examples.len())];
        let (_, grad) = loss_and_grad(&params, batch, &u, offset).unwrap();
        let loss_at = |p: &PredictorParams| loss_and_grad(p, batch, &u, offset).unwrap().0;
        let f0 = loss_at(&params);
        let mut worst: f64 = 0.0;
        let mut kink = false;
        let layer = offset - 1;
        let sizes: Vec<usize> = params.layers[layer].tensors().iter().map(|t| t.len()).collect();
        'coords: for (k, &len) in sizes.iter().enumerate() {
            for i in 0..len {
                let mut plus = params.clone();
                plus.layers[layer].tensors_mut()[k][i] += eps;
                let mut minus = params.clone();
                minus.layers[layer].tensors_mut()[k][i] -= eps;
                let (fp, fm) = (loss_at(&plus), loss_at(&minus));
                if (fp - 2.0 * f0 + fm).abs() > 1e-7 {
                    kink = true;
                    break 'coords;
                }
                let numeric = (fp - fm) / (2.0 * eps);
                let analytic = grad.layers[layer].tensors()[k][i];
                let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-6);
                worst = worst.max(rel);
            }
        }
        // Other offsets receive no gradient.
        for (o, l) in grad.layers.iter().enumerate() {
            if o != layer {
                assert!(l.tensors().iter().all(|t| t.iter().all(|&v| v == 0.0)));
            }
        }
        if kink {
            out.rejected_near_kink += 1;
            continue;
        }
        out.accepted += 1;
        out.coordinates += sizes.iter().sum::<usize>();
        out.max_relative_error = out.max_relative_error.max(worst);
    }
    out
}

/// Counts logit coordinates that moved when a window value outside the
/// state's parents (and its own lag-1 indicator) was changed, over `graphs`
/// random graphs. Returns `(violations, checks)`.
pub fn invariance_violations(graphs: usize, seed: u64) -> (usize, usize) {
    use causal_behaviour::data::Window;
    use causal_behaviour::inference::{forward_logits, unroll_adjacency, PredictorParams};
    let mut r = rng(seed);
    let (mut violations, mut checks) = (0, 0);
    for k in 0..graphs as u64 {
        let n = r.random_range(2..6);
        let m = r.random_range(0..4);
        let tau = r.random_range(1..5);
        let width = n + m;
        let s = random_series(n, m, tau, 1, seed ^ k);
        let g = random_graph(&s.catalog, tau, r.random_range(0.05..0.5), seed.wrapping_add(k));
        let u = unroll_adjacency(&g);
        let params = PredictorParams::init(n, 16, tau, seed.wrapping_add(k));
        let base = s.individuals[0].data().to_vec();
        for offset in 1..=tau {
            let history = params.history(offset);
            let layer = &params.layers[offset - 1];
            let before = forward_logits(layer, &u, Window::new(&base, width).unwrap(), history).unwrap();
            for lag in 1..=history {
                let row = tau - lag;
                for var in 0..width {
                    let mut changed = base.clone();
                    let touched = if var < n {
                        let active = (0..n).find(|&i| base[row * width + i] == 1).unwrap();
                        if active == var {
                            continue;
                        }
                        changed[row * width + active] = 0;
                        changed[row * width + var] = 1;
                        vec![active, var]
                    } else {
                        changed[row * width + var] ^= 1;
                        vec![var]
                    };
                    let after = forward_logits(layer, &u, Window::new(&changed, width).unwrap(), history).unwrap();
                    for j in 0..n {
                        let reads = |v: usize| (lag == 1 && v == j) || u.parents(j).contains(&(v, lag));
                        if touched.iter().any(|&v| reads(v)) {
                            continue;
                        }
                        checks += 1;
                        if before[j].to_bits() != after[j].to_bits() {
                            violations += 1;
                        }
                    }
                }
            }
        }
    }
    (violations, checks)
}
