//! Evolutionary updates: death-birth Moran replacement and stochastic
//! strategy adoption, plus the time-step loop that interleaves them with
//! game play.

use std::io::{self, Write};

use rand::Rng;
use thiserror::Error;

use crate::engine::Population;
use crate::markov::expected_payoffs;
use crate::rng::{self, SimRng};
use crate::strategy::{MemoryOneStrategy, PayoffMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvolveError {
    #[error("replacement rate {0} must lie in (0, 1]")]
    BadRate(f64),
    #[error("adoption normalizer {0} must be positive")]
    BadNormalizer(f64),
    #[error("a run needs at least one step")]
    NoSteps,
    #[error("sample interval must be at least 1")]
    BadInterval,
    #[error("runs track exactly two strategies, table has {0}")]
    NotTwoStrategies(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoranConfig {
    replacement_rate: f64,
}

impl MoranConfig {
    pub fn new(replacement_rate: f64) -> Result<Self, EvolveError> {
        if !(replacement_rate > 0.0 && replacement_rate <= 1.0) {
            return Err(EvolveError::BadRate(replacement_rate));
        }
        Ok(Self { replacement_rate })
    }

    pub fn replacement_rate(&self) -> f64 {
        self.replacement_rate
    }

    pub fn events_per_step(&self, n: usize) -> usize {
        ((self.replacement_rate * n as f64).round() as usize).max(1)
    }
}

impl Default for MoranConfig {
    fn default() -> Self {
        Self {
            replacement_rate: 0.001,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdoptionConfig {
    normalizer: f64,
    reset_on_adopt: bool,
}

impl AdoptionConfig {
    /// Normalizer `|E(a, b) - E(b, a)|` for the two competing strategies,
    /// falling back to `T - S` when the expected payoffs tie.
    pub fn for_pair(a: &MemoryOneStrategy, b: &MemoryOneStrategy, m: &PayoffMatrix) -> Self {
        let e = expected_payoffs(a, b, m);
        let d = (e.e_ab - e.e_ba).abs();
        Self {
            normalizer: if d > 1e-12 { d } else { m.t() - m.s() },
            reset_on_adopt: false,
        }
    }

    pub fn with_normalizer(normalizer: f64) -> Result<Self, EvolveError> {
        if !(normalizer > 0.0 && normalizer.is_finite()) {
            return Err(EvolveError::BadNormalizer(normalizer));
        }
        Ok(Self {
            normalizer,
            reset_on_adopt: false,
        })
    }

    /// Whether a node that switches strategy also loses its payoff and
    /// edge memories, as a Moran replacement does. Off by default: adopters
    /// keep their accumulated payoff.
    pub fn reset_on_adopt(mut self, reset: bool) -> Self {
        self.reset_on_adopt = reset;
        self
    }

    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    pub fn resets(&self) -> bool {
        self.reset_on_adopt
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Process {
    Moran(MoranConfig),
    Adoption(AdoptionConfig),
}

/// A strategy change at one node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Change {
    pub node: usize,
    pub from: usize,
    pub to: usize,
}

/// Picks a neighbour of `x` with probability proportional to fitness;
/// uniformly when no neighbour has positive fitness.
pub fn select_neighbor<R: Rng + ?Sized>(pop: &Population, x: usize, rng: &mut R) -> usize {
    let net = pop.network();
    let weight = |y: usize| (pop.payoff_of(y) / net.degree(y) as f64).max(0.0);
    let total: f64 = net.neighbors(x).map(weight).sum();
    let degree = net.degree(x);
    assert!(degree > 0, "node {x} has no neighbours");
    if total <= 0.0 {
        return net.incident(x)[rng.random_range(0..degree)].0;
    }
    let mut pick = rng.random::<f64>() * total;
    let mut last = x;
    for y in net.neighbors(x) {
        let w = weight(y);
        if w > 0.0 {
            last = y;
            if pick < w {
                return y;
            }
            pick -= w;
        }
    }
    last
}

/// Death-birth replacement: a uniformly chosen node is replaced by a copy of
/// a fitness-proportionally chosen neighbour's strategy and starts from zero
/// payoff with fresh edge memories.
pub fn moran_event<R: Rng + ?Sized>(pop: &mut Population, rng: &mut R) -> Change {
    let x = rng.random_range(0..pop.len());
    let y = select_neighbor(pop, x, rng);
    let change = Change {
        node: x,
        from: pop.strategy_of(x),
        to: pop.strategy_of(y),
    };
    pop.set_strategy(x, change.to);
    pop.reset_node(x);
    change
}

/// `clamp(max(0, (p_y - p_x) / (k_max * d)), 0, 1)`.
pub fn adoption_probability(payoff_x: f64, payoff_y: f64, k_max: usize, normalizer: f64) -> f64 {
    ((payoff_y - payoff_x) / (k_max as f64 * normalizer)).clamp(0.0, 1.0)
}

/// Stochastic adoption: a uniformly marked node compares cumulative payoff
/// with a fitness-proportionally chosen neighbour and copies its strategy
/// with [`adoption_probability`]. Returns the change, if any.
pub fn adoption_event<R: Rng + ?Sized>(pop: &mut Population, cfg: &AdoptionConfig, rng: &mut R) -> Option<Change> {
    let x = rng.random_range(0..pop.len());
    let y = select_neighbor(pop, x, rng);
    let net = pop.network();
    let k_max = net.degree(x).max(net.degree(y));
    let p = adoption_probability(pop.payoff_of(x), pop.payoff_of(y), k_max, cfg.normalizer);
    if p <= 0.0 || rng.random::<f64>() >= p {
        return None;
    }
    let (from, to) = (pop.strategy_of(x), pop.strategy_of(y));
    if from == to {
        return None;
    }
    pop.set_strategy(x, to);
    if cfg.reset_on_adopt {
        pop.reset_node(x);
    }
    Some(Change { node: x, from, to })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub steps: u64,
    pub sample_interval: u64,
    pub payoffs: PayoffMatrix,
    pub process: Process,
}

impl RunConfig {
    pub fn new(steps: u64, payoffs: PayoffMatrix, process: Process) -> Self {
        Self {
            steps,
            sample_interval: 100,
            payoffs,
            process,
        }
    }

    pub fn sample_every(mut self, interval: u64) -> Self {
        self.sample_interval = interval;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub step: u64,
    pub fraction_a: f64,
    pub fraction_b: f64,
    /// Mean cumulative payoff of each class; NaN for an empty class and for
    /// rows padded after extinction.
    pub mean_payoff_a: f64,
    pub mean_payoff_b: f64,
}

/// Strategy-fraction time series of one seeded run. Strategy `a` is table
/// index 0, `b` is index 1.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub samples: Vec<Sample>,
    pub steps: u64,
    /// Step at which one strategy died out, if it did.
    pub extinction_step: Option<u64>,
    pub initial_mean_degree_a: Option<f64>,
    pub initial_mean_degree_b: Option<f64>,
}

impl RunRecord {
    pub fn final_fraction_a(&self) -> f64 {
        self.samples.last().map_or(f64::NAN, |s| s.fraction_a)
    }

    pub const CSV_HEADER: &'static str = "run_id,step,fraction_a,fraction_b,mean_payoff_a,mean_payoff_b";

    /// Rows `run_id,step,fraction_a,fraction_b,mean_payoff_a,mean_payoff_b`
    /// under a header line.
    pub fn write_csv<W: Write>(&self, run_id: usize, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for s in &self.samples {
            writeln!(
                w,
                "{run_id},{},{},{},{},{}",
                s.step, s.fraction_a, s.fraction_b, s.mean_payoff_a, s.mean_payoff_b
            )?;
        }
        Ok(())
    }
}

fn sample(pop: &Population, step: u64) -> Sample {
    Sample {
        step,
        fraction_a: pop.fraction_of(0),
        fraction_b: pop.fraction_of(1),
        mean_payoff_a: pop.mean_payoff_of(0).unwrap_or(f64::NAN),
        mean_payoff_b: pop.mean_payoff_of(1).unwrap_or(f64::NAN),
    }
}

/// Applies one time-step's evolution events.
pub fn evolve_step(pop: &mut Population, process: &Process, rng: &mut SimRng) {
    match process {
        Process::Moran(cfg) => {
            for _ in 0..cfg.events_per_step(pop.len()) {
                moran_event(pop, rng);
            }
        }
        Process::Adoption(cfg) => {
            adoption_event(pop, cfg, rng);
        }
    }
}

/// Plays and evolves `cfg.steps` time-steps. Each step plays one round per
/// edge, then applies the process's events. Stops early once either
/// strategy is extinct and pads the series with the absorbing state.
pub fn run(pop: &mut Population, cfg: &RunConfig, seed: u64) -> Result<RunRecord, EvolveError> {
    if cfg.steps == 0 {
        return Err(EvolveError::NoSteps);
    }
    if cfg.sample_interval == 0 {
        return Err(EvolveError::BadInterval);
    }
    if pop.table().len() != 2 {
        return Err(EvolveError::NotTwoStrategies(pop.table().len()));
    }
    let mut rng = rng::substream(seed, rng::streams::DYNAMICS);
    let extinct = |p: &Population| p.count_of(0) == 0 || p.count_of(1) == 0;
    let due = |step: u64| step.is_multiple_of(cfg.sample_interval) || step == cfg.steps;

    let initial_mean_degree_a = pop.mean_degree_of(0);
    let initial_mean_degree_b = pop.mean_degree_of(1);
    let mut samples = vec![sample(pop, 0)];
    let mut extinction_step = extinct(pop).then_some(0);
    let mut step = 0;
    while step < cfg.steps && extinction_step.is_none() {
        step += 1;
        pop.play_step(&cfg.payoffs, &mut rng);
        evolve_step(pop, &cfg.process, &mut rng);
        if extinct(pop) {
            extinction_step = Some(step);
            samples.push(sample(pop, step));
        } else if due(step) {
            samples.push(sample(pop, step));
        }
    }
    let absorbing = sample(pop, step);
    let mut next = (step / cfg.sample_interval + 1) * cfg.sample_interval;
    while step < cfg.steps {
        let at = next.min(cfg.steps);
        samples.push(Sample {
            step: at,
            mean_payoff_a: f64::NAN,
            mean_payoff_b: f64::NAN,
            ..absorbing
        });
        step = at;
        next += cfg.sample_interval;
    }
    Ok(RunRecord {
        samples,
        steps: cfg.steps,
        extinction_step,
        initial_mean_degree_a,
        initial_mean_degree_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{barabasi_albert, Network};
    use crate::rng::seeded;
    use crate::strategy::named_strategy;
    use std::sync::Arc;

    fn s(name: &str) -> MemoryOneStrategy {
        named_strategy(name).unwrap()
    }

    fn m() -> PayoffMatrix {
        PayoffMatrix::default()
    }

    fn moran(rate: f64) -> Process {
        Process::Moran(MoranConfig::new(rate).unwrap())
    }

    #[test]
    fn moran_rate_validation() {
        assert!(MoranConfig::new(0.0).is_err());
        assert!(MoranConfig::new(1.5).is_err());
        assert!(MoranConfig::new(f64::NAN).is_err());
        assert_eq!(MoranConfig::default().events_per_step(1000), 1);
        assert_eq!(MoranConfig::default().events_per_step(200), 1);
        assert_eq!(MoranConfig::new(0.01).unwrap().events_per_step(1000), 10);
    }

    #[test]
    fn adoption_probability_boundaries() {
        assert_eq!(adoption_probability(5.0, 5.0, 3, 1.0), 0.0);
        assert_eq!(adoption_probability(6.0, 5.0, 3, 1.0), 0.0);
        assert_eq!(adoption_probability(0.0, 100.0, 3, 1.0), 1.0);
        assert!((adoption_probability(4.0, 10.0, 3, 5.0) - 6.0 / 15.0).abs() < 1e-12);
        assert!((adoption_probability(4.0, 5.0, 4, 0.5) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn adoption_normalizer_for_zd_pavlov() {
        let cfg = AdoptionConfig::for_pair(&s("zd_default"), &s("pavlov"), &m());
        let e = expected_payoffs(&s("zd_default"), &s("pavlov"), &m());
        assert!((cfg.normalizer() - (e.e_ab - e.e_ba).abs()).abs() < 1e-12);
        assert!(!cfg.resets());
        let tie = AdoptionConfig::for_pair(&s("pavlov"), &s("pavlov"), &m());
        assert_eq!(tie.normalizer(), 5.0);
        assert!(AdoptionConfig::with_normalizer(0.0).is_err());
        assert!(AdoptionConfig::with_normalizer(-1.0).is_err());
    }

    #[test]
    fn zero_fitness_neighbour_choice_is_uniform() {
        let net = Arc::new(Network::star(5));
        let pop = Population::init_random(net, s("cooperator"), s("defector"), 0.4, 1).unwrap();
        let mut rng = seeded(9);
        let mut hits = [0usize; 5];
        for _ in 0..40_000 {
            hits[select_neighbor(&pop, 0, &mut rng)] += 1;
        }
        assert_eq!(hits[0], 0);
        for &h in &hits[1..] {
            assert!((h as f64 - 10_000.0).abs() < 600.0, "{hits:?}");
        }
    }

    #[test]
    fn neighbour_choice_follows_fitness() {
        let net = Arc::new(Network::star(4));
        let mut pop = Population::new(net, vec![s("cooperator"), s("defector")], vec![0, 1, 1, 0]).unwrap();
        let mut rng = seeded(2);
        for _ in 0..3 {
            pop.play_step(&m(), &mut rng);
        }
        let w: Vec<f64> = (1..4).map(|v| pop.fitness(v).unwrap()).collect();
        let total: f64 = w.iter().sum();
        assert!(total > 0.0);
        let mut hits = [0usize; 4];
        for _ in 0..30_000 {
            hits[select_neighbor(&pop, 0, &mut rng)] += 1;
        }
        assert_eq!(hits[0], 0);
        for v in 1..4 {
            assert!(
                (hits[v] as f64 / 30_000.0 - w[v - 1] / total).abs() < 0.015,
                "{hits:?} {w:?}"
            );
        }
    }

    #[test]
    fn homogeneous_population_never_changes() {
        let net = Arc::new(barabasi_albert(100, 2, 1).unwrap());
        for process in [
            moran(0.05),
            Process::Adoption(AdoptionConfig::with_normalizer(1.0).unwrap()),
        ] {
            let mut pop = Population::init_random(net.clone(), s("pavlov"), s("defector"), 1.0, 3).unwrap();
            let cfg = RunConfig::new(500, m(), process).sample_every(50);
            let rec = run(&mut pop, &cfg, 4).unwrap();
            assert!(rec.samples.iter().all(|x| x.fraction_a == 1.0 && x.fraction_b == 0.0));
            assert_eq!(rec.extinction_step, Some(0));
            assert_eq!(rec.samples.last().unwrap().step, 500);
        }
    }

    #[test]
    fn run_rejects_bad_config() {
        let net = Arc::new(Network::complete(4));
        let mut pop = Population::init_random(net, s("pavlov"), s("defector"), 0.5, 1).unwrap();
        assert_eq!(
            run(&mut pop, &RunConfig::new(0, m(), moran(0.5)), 1),
            Err(EvolveError::NoSteps)
        );
        assert_eq!(
            run(&mut pop, &RunConfig::new(5, m(), moran(0.5)).sample_every(0), 1),
            Err(EvolveError::BadInterval)
        );
    }

    #[test]
    fn neutral_moran_fixation_is_one_over_n() {
        let n = 50;
        let net = Arc::new(Network::complete(n));
        let trials = 5000;
        let mut rng = seeded(17);
        let mut fixed = 0;
        for t in 0..trials {
            let mut assign = vec![1; n];
            assign[t % n] = 0;
            let mut pop = Population::new(net.clone(), vec![s("pavlov"), s("pavlov")], assign).unwrap();
            while pop.count_of(0) != 0 && pop.count_of(1) != 0 {
                moran_event(&mut pop, &mut rng);
            }
            fixed += usize::from(pop.count_of(0) == n);
        }
        let rate = fixed as f64 / trials as f64;
        let expect = 1.0 / n as f64;
        assert!((rate - expect).abs() <= 0.3 * expect, "fixation {rate}");
    }

    #[test]
    fn series_shape_and_absorption() {
        let net = Arc::new(barabasi_albert(60, 2, 3).unwrap());
        let mut pop = Population::init_random(net.clone(), s("defector"), s("cooperator"), 0.5, 2).unwrap();
        let cfg = RunConfig::new(20_000, m(), moran(0.05)).sample_every(100);
        let rec = run(&mut pop, &cfg, 5).unwrap();
        assert_eq!(rec.samples[0].step, 0);
        assert_eq!(rec.samples[0].fraction_a, 0.5);
        assert_eq!(rec.samples.last().unwrap().step, 20_000);
        assert!(rec.samples.windows(2).all(|w| w[0].step < w[1].step));
        for x in &rec.samples {
            assert!((x.fraction_a + x.fraction_b - 1.0).abs() < 1e-12);
        }
        if let Some(at) = rec.extinction_step {
            let end = rec.samples.iter().find(|x| x.step == at).unwrap().fraction_a;
            assert!(end == 0.0 || end == 1.0);
            assert!(rec.samples.iter().filter(|x| x.step >= at).all(|x| x.fraction_a == end));
        }
        assert_eq!(pop.network().edges(), net.edges());
    }

    #[test]
    fn one_change_per_event() {
        let net = Arc::new(barabasi_albert(80, 2, 3).unwrap());
        let mut pop = Population::init_random(net, s("zd_default"), s("pavlov"), 0.5, 2).unwrap();
        let mut rng = seeded(3);
        let adopt = AdoptionConfig::with_normalizer(0.05).unwrap();
        for _ in 0..2000 {
            pop.play_step(&m(), &mut rng);
            let before: Vec<usize> = (0..pop.len()).map(|v| pop.strategy_of(v)).collect();
            let change = if rng.random::<bool>() {
                Some(moran_event(&mut pop, &mut rng))
            } else {
                adoption_event(&mut pop, &adopt, &mut rng)
            };
            let diff: Vec<usize> = (0..pop.len()).filter(|&v| pop.strategy_of(v) != before[v]).collect();
            assert!(diff.len() <= 1);
            if let Some(&v) = diff.first() {
                assert_eq!(change.unwrap().node, v);
            }
        }
    }

    #[test]
    fn moran_resets_replaced_node() {
        let net = Arc::new(Network::complete(3));
        let mut pop = Population::init_random(net, s("defector"), s("cooperator"), 1.0 / 3.0, 1).unwrap();
        let mut rng = seeded(1);
        pop.play_step(&m(), &mut rng);
        let c = moran_event(&mut pop, &mut rng);
        assert_eq!(pop.payoff_of(c.node), 0.0);
        assert_eq!(pop.rounds_of(c.node), 0);
    }

    #[test]
    fn seeded_runs_repeat() {
        let net = Arc::new(barabasi_albert(100, 1, 3).unwrap());
        let go = || {
            let mut pop = Population::init_random(net.clone(), s("zd_default"), s("pavlov"), 0.6, 7).unwrap();
            let cfg = RunConfig::new(
                3000,
                m(),
                Process::Adoption(AdoptionConfig::for_pair(&s("zd_default"), &s("pavlov"), &m())),
            );
            run(&mut pop, &cfg, 11).unwrap()
        };
        let (a, b) = (go(), go());
        let (mut x, mut y) = (Vec::new(), Vec::new());
        a.write_csv(0, &mut x).unwrap();
        b.write_csv(0, &mut y).unwrap();
        assert_eq!(x, y);
    }
}
