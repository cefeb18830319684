//! Population state and game play.
//!
//! Each time-step plays exactly one prisoner's dilemma round on every edge.
//! Memory is kept per edge, from the lower-indexed endpoint's side, so a node
//! remembers each opponent separately.

use std::io::{self, Write};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::graph::{self, Network};
use crate::rng::{self, SimRng};
use crate::strategy::{MemoryOneStrategy, Outcome, PayoffMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("strategy table is empty")]
    EmptyTable,
    #[error("node {node} maps to strategy {index}, table has {len}")]
    BadStrategyIndex { node: usize, index: usize, len: usize },
    #[error("assignment covers {got} nodes, network has {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("fraction {0} is outside [0, 1]")]
    BadFraction(f64),
    #[error("node {0} has no neighbours")]
    IsolatedNode(usize),
}

const UNPLAYED: u8 = 4;
const SWAP: [u8; 5] = [0, 2, 1, 3, UNPLAYED];

#[derive(Debug, Clone)]
pub struct Population {
    net: Arc<Network>,
    table: Vec<MemoryOneStrategy>,
    /// Cooperation probability per strategy, indexed by memory code;
    /// the fifth slot is the coin-flip opening move.
    coop: Vec<[f64; 5]>,
    strategy_of: Vec<usize>,
    payoff_of: Vec<f64>,
    rounds_of: Vec<u64>,
    memory: Vec<u8>,
    counts: Vec<usize>,
}

impl Population {
    pub fn new(
        net: impl Into<Arc<Network>>,
        table: Vec<MemoryOneStrategy>,
        strategy_of: Vec<usize>,
    ) -> Result<Self, EngineError> {
        let net = net.into();
        if table.is_empty() {
            return Err(EngineError::EmptyTable);
        }
        if strategy_of.len() != net.node_count() {
            return Err(EngineError::SizeMismatch {
                expected: net.node_count(),
                got: strategy_of.len(),
            });
        }
        let mut counts = vec![0; table.len()];
        for (node, &index) in strategy_of.iter().enumerate() {
            if index >= table.len() {
                return Err(EngineError::BadStrategyIndex {
                    node,
                    index,
                    len: table.len(),
                });
            }
            counts[index] += 1;
        }
        let coop = table
            .iter()
            .map(|s| {
                let [a, b, c, d] = s.probs();
                [a, b, c, d, 0.5]
            })
            .collect();
        let n = net.node_count();
        let m = net.edge_count();
        Ok(Self {
            net,
            table,
            coop,
            strategy_of,
            payoff_of: vec![0.0; n],
            rounds_of: vec![0; n],
            memory: vec![UNPLAYED; m],
            counts,
        })
    }

    /// Two-strategy population with exactly `round(fraction_a * n)` nodes
    /// of `a` (index 0) placed uniformly at random; the rest play `b`
    /// (index 1).
    pub fn init_random(
        net: impl Into<Arc<Network>>,
        a: MemoryOneStrategy,
        b: MemoryOneStrategy,
        fraction_a: f64,
        seed: u64,
    ) -> Result<Self, EngineError> {
        let net = net.into();
        let count = class_size(fraction_a, net.node_count())?;
        let mut nodes: Vec<usize> = (0..net.node_count()).collect();
        nodes.shuffle(&mut rng::substream(seed, rng::streams::INIT));
        let mut assign = vec![1; net.node_count()];
        nodes[..count].iter().for_each(|&v| assign[v] = 0);
        Self::new(net, vec![a, b], assign)
    }

    /// Two-strategy population where the `round(fraction_hub * n)`
    /// highest-degree nodes play `hub` (index 0) and the rest play `rest`
    /// (index 1). Equal degrees are ordered by a seeded shuffle.
    pub fn init_hubs(
        net: impl Into<Arc<Network>>,
        hub: MemoryOneStrategy,
        rest: MemoryOneStrategy,
        fraction_hub: f64,
        seed: u64,
    ) -> Result<Self, EngineError> {
        Self::init_ranked(net.into(), vec![hub, rest], 0, fraction_hub, seed)
    }

    /// Like [`Population::init_hubs`], but the hubs get `b` while `a` keeps
    /// table index 0.
    pub fn init_hubs_b(
        net: impl Into<Arc<Network>>,
        a: MemoryOneStrategy,
        b: MemoryOneStrategy,
        fraction_b: f64,
        seed: u64,
    ) -> Result<Self, EngineError> {
        Self::init_ranked(net.into(), vec![a, b], 1, fraction_b, seed)
    }

    fn init_ranked(
        net: Arc<Network>,
        table: Vec<MemoryOneStrategy>,
        hub_index: usize,
        fraction_hub: f64,
        seed: u64,
    ) -> Result<Self, EngineError> {
        let count = class_size(fraction_hub, net.node_count())?;
        let order = graph::hub_order(&net, &mut rng::substream(seed, rng::streams::INIT));
        let mut assign = vec![1 - hub_index; net.node_count()];
        order[..count].iter().for_each(|&v| assign[v] = hub_index);
        Self::new(net, table, assign)
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn shared_network(&self) -> Arc<Network> {
        Arc::clone(&self.net)
    }

    pub fn len(&self) -> usize {
        self.strategy_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strategy_of.is_empty()
    }

    pub fn table(&self) -> &[MemoryOneStrategy] {
        &self.table
    }

    pub fn strategy_of(&self, node: usize) -> usize {
        self.strategy_of[node]
    }

    pub fn payoff_of(&self, node: usize) -> f64 {
        self.payoff_of[node]
    }

    /// Rounds played by `node` since it was last reset.
    pub fn rounds_of(&self, node: usize) -> u64 {
        self.rounds_of[node]
    }

    /// Last outcome on edge `edge`, from its lower-indexed endpoint's side.
    pub fn memory(&self, edge: usize) -> Option<Outcome> {
        Outcome::from_index(self.memory[edge] as usize)
    }

    pub fn count_of(&self, strategy: usize) -> usize {
        self.counts[strategy]
    }

    pub fn fraction_of(&self, strategy: usize) -> f64 {
        self.counts[strategy] as f64 / self.len() as f64
    }

    /// Mean cumulative payoff over nodes playing `strategy`.
    pub fn mean_payoff_of(&self, strategy: usize) -> Option<f64> {
        self.class_mean(strategy, |v| self.payoff_of[v])
    }

    pub fn mean_degree_of(&self, strategy: usize) -> Option<f64> {
        self.class_mean(strategy, |v| self.net.degree(v) as f64)
    }

    fn class_mean(&self, strategy: usize, f: impl Fn(usize) -> f64) -> Option<f64> {
        let n = self.counts[strategy];
        (n > 0).then(|| {
            (0..self.len())
                .filter(|&v| self.strategy_of[v] == strategy)
                .map(f)
                .sum::<f64>()
                / n as f64
        })
    }

    /// Cumulative payoff averaged over the node's neighbours.
    pub fn fitness(&self, node: usize) -> Result<f64, EngineError> {
        match self.net.degree(node) {
            0 => Err(EngineError::IsolatedNode(node)),
            d => Ok(self.payoff_of[node] / d as f64),
        }
    }

    pub fn set_strategy(&mut self, node: usize, strategy: usize) {
        assert!(strategy < self.table.len(), "strategy index out of range");
        let old = std::mem::replace(&mut self.strategy_of[node], strategy);
        self.counts[old] -= 1;
        self.counts[strategy] += 1;
    }

    /// Zeroes the node's payoff and forgets every incident edge's history.
    /// The strategy is left for the caller to set.
    pub fn reset_node(&mut self, node: usize) {
        self.payoff_of[node] = 0.0;
        self.rounds_of[node] = 0;
        for &(_, e) in self.net.incident(node) {
            self.memory[e] = UNPLAYED;
        }
    }

    /// One round on every edge, in edge-list order.
    pub fn play_step<R: Rng + ?Sized>(&mut self, m: &PayoffMatrix, rng: &mut R) {
        let pay = Outcome::ALL.map(|o| m.round_payoffs(o));
        let net = Arc::clone(&self.net);
        for (e, &(u, v)) in net.edges().iter().enumerate() {
            let mem = self.memory[e];
            let pu = self.coop[self.strategy_of[u]][mem as usize];
            let pv = self.coop[self.strategy_of[v]][SWAP[mem as usize] as usize];
            let cu = draw(pu, rng);
            let cv = draw(pv, rng);
            let o = Outcome::from_moves(cu, cv);
            let (gu, gv) = pay[o.index()];
            self.payoff_of[u] += gu;
            self.payoff_of[v] += gv;
            self.rounds_of[u] += 1;
            self.rounds_of[v] += 1;
            self.memory[e] = o.index() as u8;
        }
    }

    /// CSV with columns `node_id,strategy_label,cumulative_payoff,degree`.
    pub fn write_snapshot_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "node_id,strategy_label,cumulative_payoff,degree")?;
        for v in 0..self.len() {
            writeln!(
                w,
                "{v},{},{},{}",
                self.table[self.strategy_of[v]].label(),
                self.payoff_of[v],
                self.net.degree(v)
            )?;
        }
        Ok(())
    }
}

#[inline]
fn draw<R: Rng + ?Sized>(p: f64, rng: &mut R) -> bool {
    if p >= 1.0 {
        true
    } else if p <= 0.0 {
        false
    } else {
        rng.random::<f64>() < p
    }
}

fn class_size(fraction: f64, n: usize) -> Result<usize, EngineError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(EngineError::BadFraction(fraction));
    }
    Ok(((fraction * n as f64).round() as usize).min(n))
}

/// Convenience for tests and tools that drive a population directly.
pub fn dynamics_rng(seed: u64) -> SimRng {
    rng::substream(seed, rng::streams::DYNAMICS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{barabasi_albert, regular_random};
    use crate::markov::expected_payoffs;
    use crate::strategy::{named_strategy, CATALOG};

    fn s(name: &str) -> MemoryOneStrategy {
        named_strategy(name).unwrap()
    }

    fn pair() -> Network {
        Network::from_edges(2, [(0, 1)]).unwrap()
    }

    #[test]
    fn random_init_exact_counts() {
        let net = Arc::new(regular_random(1000, 8, 1).unwrap());
        let p = Population::init_random(net.clone(), s("zd_default"), s("pavlov"), 0.6, 3).unwrap();
        assert_eq!(p.count_of(0), 600);
        assert_eq!(p.count_of(1), 400);
        let all_b = Population::init_random(net.clone(), s("zd_default"), s("pavlov"), 0.0, 3).unwrap();
        assert_eq!(all_b.count_of(1), 1000);
        let all_a = Population::init_random(net.clone(), s("zd_default"), s("pavlov"), 1.0, 3).unwrap();
        assert_eq!(all_a.count_of(0), 1000);
        assert!((0..1000).all(|v| p.payoff_of(v) == 0.0));
        assert!((0..net.edge_count()).all(|e| p.memory(e).is_none()));
        assert!(Population::init_random(net, s("zd_default"), s("pavlov"), 1.5, 3).is_err());
    }

    #[test]
    fn hubs_init() {
        let star = Network::star(10);
        let p = Population::init_hubs(star, s("zd_default"), s("pavlov"), 0.1, 0).unwrap();
        assert_eq!(p.strategy_of(0), 0);
        assert_eq!(p.count_of(0), 1);

        let g = barabasi_albert(1000, 1, 7).unwrap();
        let p = Population::init_hubs(g, s("zd_default"), s("pavlov"), 0.6, 0).unwrap();
        assert_eq!(p.count_of(0), 600);
        assert!(p.mean_degree_of(0).unwrap() > p.mean_degree_of(1).unwrap());
        let min_hub = (0..1000)
            .filter(|&v| p.strategy_of(v) == 0)
            .map(|v| p.network().degree(v))
            .min();
        let max_rest = (0..1000)
            .filter(|&v| p.strategy_of(v) == 1)
            .map(|v| p.network().degree(v))
            .max();
        assert!(min_hub >= max_rest);
    }

    #[test]
    fn cooperators_on_one_edge() {
        let mut p = Population::new(pair(), vec![s("cooperator")], vec![0, 0]).unwrap();
        p.play_step(&PayoffMatrix::default(), &mut rng::seeded(0));
        // Opening move is a coin flip even for cooperators.
        let opened = p.memory(0).unwrap();
        p.play_step(&PayoffMatrix::default(), &mut rng::seeded(0));
        assert_eq!(p.memory(0), Some(Outcome::CC));
        let (a, b) = PayoffMatrix::default().round_payoffs(opened);
        assert_eq!(p.payoff_of(0), a + 3.0);
        assert_eq!(p.payoff_of(1), b + 3.0);
    }

    #[test]
    fn defectors_earn_punishment_per_neighbour() {
        let net = regular_random(100, 6, 2).unwrap();
        let mut p = Population::new(net, vec![s("defector")], vec![0; 100]).unwrap();
        let mut rng = rng::seeded(1);
        p.play_step(&PayoffMatrix::default(), &mut rng);
        let before: Vec<f64> = (0..100).map(|v| p.payoff_of(v)).collect();
        p.play_step(&PayoffMatrix::default(), &mut rng);
        for (v, b) in before.iter().enumerate() {
            assert_eq!(p.payoff_of(v) - b, 6.0);
        }
    }

    #[test]
    fn fitness_and_reset() {
        let net = regular_random(50, 8, 2).unwrap();
        let mut p = Population::new(net.clone(), vec![s("cooperator")], vec![0; 50]).unwrap();
        assert_eq!(p.fitness(0).unwrap(), 0.0);
        let m = PayoffMatrix::default();
        let mut rng = rng::seeded(1);
        p.play_step(&m, &mut rng);
        let base: Vec<f64> = (0..50).map(|v| p.payoff_of(v)).collect();
        p.play_step(&m, &mut rng);
        for (v, b) in base.iter().enumerate() {
            assert!((p.payoff_of(v) - b - 24.0).abs() < 1e-12);
        }
        p.reset_node(5);
        assert_eq!(p.fitness(5).unwrap(), 0.0);
        for u in p.network().neighbors(5).collect::<Vec<_>>() {
            assert_eq!(p.payoff_of(u), base[u] + 24.0);
        }
        let touched: Vec<usize> = net.incident(5).iter().map(|&(_, e)| e).collect();
        for e in 0..net.edge_count() {
            assert_eq!(p.memory(e).is_none(), touched.contains(&e));
        }
        let iso = Network::from_edges(2, []).unwrap();
        let q = Population::new(iso, vec![s("cooperator")], vec![0, 0]).unwrap();
        assert_eq!(q.fitness(0), Err(EngineError::IsolatedNode(0)));
    }

    #[test]
    fn fitness_is_payoff_over_degree() {
        let net = regular_random(20, 8, 2).unwrap();
        let mut p = Population::new(net, vec![s("cooperator")], vec![0; 20]).unwrap();
        p.payoff_of[3] = 24.0;
        assert_eq!(p.fitness(3).unwrap(), 3.0);
    }

    #[test]
    fn payoffs_stay_in_bounds_and_seed_reproducible() {
        let net = Arc::new(barabasi_albert(300, 2, 1).unwrap());
        let m = PayoffMatrix::default();
        let run = |seed| {
            let mut p = Population::init_random(net.clone(), s("zd_default"), s("general_cooperator"), 0.5, 1).unwrap();
            let mut rng = dynamics_rng(seed);
            for _ in 0..200 {
                p.play_step(&m, &mut rng);
            }
            p
        };
        let p = run(9);
        for v in 0..p.len() {
            let r = p.rounds_of(v) as f64;
            assert_eq!(p.rounds_of(v), 200 * p.network().degree(v) as u64);
            assert!(p.payoff_of(v) >= m.s() * r && p.payoff_of(v) <= m.t() * r);
        }
        let q = run(9);
        assert_eq!(p.payoff_of, q.payoff_of);
        assert_eq!(p.memory, q.memory);
    }

    #[test]
    fn each_edge_round_pays_one_table_row() {
        let net = regular_random(60, 4, 3).unwrap();
        let m = PayoffMatrix::default();
        let mut p = Population::init_random(net.clone(), s("zd_default"), s("general_cooperator"), 0.5, 2).unwrap();
        let mut rng = rng::seeded(4);
        for _ in 0..20 {
            let before = p.payoff_of.clone();
            p.play_step(&m, &mut rng);
            let mut expected = before.clone();
            for (e, &(u, v)) in net.edges().iter().enumerate() {
                let (a, b) = m.round_payoffs(p.memory(e).unwrap());
                expected[u] += a;
                expected[v] += b;
            }
            for (e, got) in expected.iter().zip(&p.payoff_of) {
                assert!((e - got).abs() < 1e-9);
            }
        }
    }

    /// Many disjoint A-B pairs; long-run mean payoff per round must match the
    /// analytic limit for every catalog pairing.
    #[test]
    fn play_matches_markov_limit() {
        let m = PayoffMatrix::default();
        let pairs = 1000;
        let net = Arc::new(Network::from_edges(2 * pairs, (0..pairs).map(|i| (2 * i, 2 * i + 1))).unwrap());
        for (i, x) in CATALOG.iter().enumerate() {
            for y in &CATALOG[i..] {
                let assign = (0..2 * pairs).map(|v| v % 2).collect();
                let mut p = Population::new(net.clone(), vec![s(x), s(y)], assign).unwrap();
                let mut rng = rng::seeded(17);
                for _ in 0..500 {
                    p.play_step(&m, &mut rng);
                }
                let start = p.payoff_of.clone();
                let steps = 2000;
                for _ in 0..steps {
                    p.play_step(&m, &mut rng);
                }
                let mean = |parity: usize| {
                    (0..2 * pairs)
                        .filter(|v| v % 2 == parity)
                        .map(|v| p.payoff_of[v] - start[v])
                        .sum::<f64>()
                        / (pairs * steps) as f64
                };
                let e = expected_payoffs(&s(x), &s(y), &m);
                assert!(
                    (mean(0) - e.e_ab).abs() <= 0.05,
                    "{x} vs {y}: {} vs {}",
                    mean(0),
                    e.e_ab
                );
                assert!(
                    (mean(1) - e.e_ba).abs() <= 0.05,
                    "{y} vs {x}: {} vs {}",
                    mean(1),
                    e.e_ba
                );
            }
        }
    }

    #[test]
    fn zd_pins_pavlov_on_single_edge() {
        let m = PayoffMatrix::default();
        let mut p = Population::new(pair(), vec![s("zd_default"), s("pavlov")], vec![0, 1]).unwrap();
        let mut rng = rng::seeded(5);
        let steps = 1_000_000;
        for _ in 0..steps {
            p.play_step(&m, &mut rng);
        }
        let mean = p.payoff_of(1) / steps as f64;
        assert!((mean - 2.0).abs() <= 0.05, "pavlov mean {mean}");
    }

    #[test]
    fn snapshot_csv() {
        let p = Population::new(pair(), vec![s("pavlov"), s("zd_default")], vec![0, 1]).unwrap();
        let mut buf = Vec::new();
        p.write_snapshot_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "node_id,strategy_label,cumulative_payoff,degree\n0,pavlov,0,1\n1,zd_default,0,1\n"
        );
    }
}
