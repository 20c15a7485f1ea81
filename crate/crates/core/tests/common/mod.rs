//! Random networks, voltages and matrices shared by the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use opfrelax::{Bus, Complex, CostSpec, Graph, HermitianMatrix, Line, Network};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_voltage(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex> {
    (0..n)
        .map(|j| {
            let angle = if j == 0 { 0.0 } else { rng.gen_range(-0.15..0.15) };
            Complex::from_polar(rng.gen_range(0.96..1.04), angle)
        })
        .collect()
}

/// Random spanning tree on `n` nodes, plus `extra` chords when asked.
pub fn random_edges(rng: &mut ChaCha8Rng, n: usize, extra: usize) -> Vec<(usize, usize)> {
    let mut edges: Vec<(usize, usize)> = (1..n).map(|k| (rng.gen_range(0..k), k)).collect();
    let mut tries = 0;
    while edges.len() < n - 1 + extra && tries < 1000 {
        tries += 1;
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        let e = (a.min(b), a.max(b));
        if a != b && !edges.iter().any(|&(x, y)| (x.min(y), x.max(y)) == e) {
            edges.push(e);
        }
    }
    edges
}

pub struct RandomCase {
    pub network: Network,
    pub cost: CostSpec,
    /// A voltage meeting every bound.
    pub voltage: Vec<Complex>,
    pub tree: bool,
}

/// Network built around a known operating point: loads are fixed at the
/// injections of `voltage`, generators get a box around theirs, the slack
/// bus holds its magnitude and absorbs the rest.
pub fn random_case(rng: &mut ChaCha8Rng, n: usize, tree: bool) -> RandomCase {
    let extra = if tree { 0 } else { rng.gen_range(1..=n.min(5)) };
    let edges = random_edges(rng, n, extra);
    let lines: Vec<Line> = edges
        .iter()
        .map(|&(a, b)| {
            let z = Complex::new(rng.gen_range(0.01..0.06), rng.gen_range(0.05..0.3));
            let line = if rng.gen_bool(0.5) { Line::new(a, b, z) } else { Line::new(b, a, z) };
            line.with_charging(rng.gen_range(0.0..0.05))
        })
        .collect();
    let v = random_voltage(rng, n);
    let buses = (0..n)
        .map(|j| if j == 0 { Bus::free(1, v[0].norm(), v[0].norm()) } else { Bus::free(j + 1, 0.94, 1.06) })
        .collect();
    let mut net = Network::new(format!("random{n}"), 100.0, buses, lines).expect("valid network");
    let s = net.injections(&v);
    let mut linear = vec![0.0; n];
    let mut quadratic = vec![0.0; n];
    for j in 0..n {
        let bus = &mut net.buses[j];
        if j == 0 {
            linear[j] = rng.gen_range(1.0..10.0);
            continue;
        }
        if rng.gen_bool(0.35) {
            let a = rng.gen_range(0.2..0.8);
            bus.s_min = Complex::new(s[j].re - a, s[j].im - 0.5);
            bus.s_max = Complex::new(s[j].re + a, s[j].im + 0.5);
            linear[j] = rng.gen_range(1.0..10.0);
            if rng.gen_bool(0.5) {
                quadratic[j] = rng.gen_range(0.1..2.0);
            }
        } else {
            bus.s_min = s[j];
            bus.s_max = s[j];
        }
    }
    let mut cost = CostSpec::weighted(linear, vec![0.0; n]);
    cost.quadratic = quadratic;
    RandomCase {
        network: net,
        cost,
        voltage: v,
        tree,
    }
}

/// Random chordal graph: a random graph closed under minimum-degree fill.
pub fn random_chordal_graph(rng: &mut ChaCha8Rng, n: usize) -> Graph {
    let extra = rng.gen_range(0..=n);
    let g = Graph::from_edges(n, &random_edges(rng, n, extra));
    opfrelax::chordal_extend(&g).filled()
}

/// Random Hermitian PSD matrix of full rank.
pub fn random_psd(rng: &mut ChaCha8Rng, n: usize) -> HermitianMatrix {
    let b = DMatrix::from_fn(n, n + 2, |_, _| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let m = &b * b.adjoint();
    HermitianMatrix::from_matrix((&m + m.adjoint()) * Complex::new(0.5, 0.0)).expect("hermitian")
}
