//! Long-run payoffs of two memory-one strategies playing each other.
//!
//! The pair's joint outcome is a four-state Markov chain. When the chain has
//! a single closed class its stationary distribution gives the payoffs
//! directly. Deterministic strategies can split it into several closed
//! classes; then the limit is the Cesàro average started from the uniform
//! distribution over the four states, which is what a simulated first round
//! with coin-flip moves produces.

use rand::Rng;

use crate::rng;
use crate::strategy::{MemoryOneStrategy, Outcome, PayoffMatrix};

/// Transition matrix over joint outcomes, read from A's side.
#[derive(Debug, Clone, PartialEq)]
pub struct PairChain {
    transition: [[f64; 4]; 4],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedPayoffPair {
    pub e_ab: f64,
    pub e_ba: f64,
}

pub fn build_chain(a: &MemoryOneStrategy, b: &MemoryOneStrategy) -> PairChain {
    let mut transition = [[0.0; 4]; 4];
    for from in Outcome::ALL {
        let pa = a.coop_prob(from);
        let pb = b.coop_prob(from.swap());
        let row = &mut transition[from.index()];
        row[Outcome::CC.index()] = pa * pb;
        row[Outcome::CD.index()] = pa * (1.0 - pb);
        row[Outcome::DC.index()] = (1.0 - pa) * pb;
        row[Outcome::DD.index()] = (1.0 - pa) * (1.0 - pb);
    }
    PairChain { transition }
}

impl PairChain {
    pub fn transition(&self) -> &[[f64; 4]; 4] {
        &self.transition
    }

    pub fn row(&self, from: Outcome) -> [f64; 4] {
        self.transition[from.index()]
    }

    fn reach(&self) -> [[bool; 4]; 4] {
        let mut r = [[false; 4]; 4];
        for (i, row) in r.iter_mut().enumerate() {
            row[i] = true;
            for (j, &p) in self.transition[i].iter().enumerate() {
                if p > 0.0 {
                    row[j] = true;
                }
            }
        }
        for k in 0..4 {
            for i in 0..4 {
                for j in 0..4 {
                    if r[i][k] && r[k][j] {
                        r[i][j] = true;
                    }
                }
            }
        }
        r
    }

    /// Closed communicating classes, each as a sorted list of state indices.
    pub fn closed_classes(&self) -> Vec<Vec<usize>> {
        let reach = self.reach();
        let recurrent: Vec<bool> = (0..4).map(|i| (0..4).all(|j| !reach[i][j] || reach[j][i])).collect();
        let mut seen = [false; 4];
        let mut classes = Vec::new();
        for i in 0..4 {
            if !recurrent[i] || seen[i] {
                continue;
            }
            let class: Vec<usize> = (0..4).filter(|&j| reach[i][j] && reach[j][i]).collect();
            for &j in &class {
                seen[j] = true;
            }
            classes.push(class);
        }
        classes
    }

    fn class_stationary(&self, class: &[usize]) -> [f64; 4] {
        let k = class.len();
        // pi (M_C - I) = 0 with the last balance equation replaced by sum = 1.
        let mut a = vec![vec![0.0; k]; k];
        let mut b = vec![0.0; k];
        for (row, &j) in class.iter().enumerate().take(k - 1) {
            for (col, &i) in class.iter().enumerate() {
                a[row][col] = self.transition[i][j] - if i == j { 1.0 } else { 0.0 };
            }
        }
        a[k - 1].iter_mut().for_each(|x| *x = 1.0);
        b[k - 1] = 1.0;
        let pi = solve(a, b).expect("closed class has a unique stationary law");
        let mut out = [0.0; 4];
        for (&i, &p) in class.iter().zip(pi.iter()) {
            out[i] = p.max(0.0);
        }
        normalize(out)
    }

    /// Stationary distribution when it is unique (one closed class).
    pub fn stationary(&self) -> Option<[f64; 4]> {
        match self.closed_classes().as_slice() {
            [only] => Some(self.class_stationary(only)),
            _ => None,
        }
    }

    /// Cesàro limit of the state distribution started from `initial`.
    pub fn limit_distribution(&self, initial: [f64; 4]) -> [f64; 4] {
        let classes = self.closed_classes();
        if classes.len() == 1 {
            return self.class_stationary(&classes[0]);
        }
        let mut closed = [false; 4];
        classes.iter().flatten().for_each(|&i| closed[i] = true);
        let transient: Vec<usize> = (0..4).filter(|&i| !closed[i]).collect();

        let mut limit = [0.0; 4];
        for class in &classes {
            let mut hit = [0.0; 4];
            class.iter().for_each(|&i| hit[i] = 1.0);
            if !transient.is_empty() {
                // (I - Q) h = R 1_C over transient states.
                let n = transient.len();
                let mut a = vec![vec![0.0; n]; n];
                let mut b = vec![0.0; n];
                for (r, &i) in transient.iter().enumerate() {
                    for (c, &j) in transient.iter().enumerate() {
                        a[r][c] = if i == j { 1.0 } else { 0.0 } - self.transition[i][j];
                    }
                    b[r] = class.iter().map(|&j| self.transition[i][j]).sum();
                }
                let h = solve(a, b).expect("transient block is invertible");
                for (&i, &v) in transient.iter().zip(h.iter()) {
                    hit[i] = v;
                }
            }
            let weight: f64 = initial.iter().zip(hit.iter()).map(|(p, h)| p * h).sum();
            let pi = self.class_stationary(class);
            for s in 0..4 {
                limit[s] += weight * pi[s];
            }
        }
        normalize(limit)
    }
}

fn normalize(mut v: [f64; 4]) -> [f64; 4] {
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= total);
    v
}

/// Dense Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                let (upper, lower) = a.split_at_mut(row);
                for (x, &y) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                    *x -= f * y;
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Some(x)
}

const UNIFORM: [f64; 4] = [0.25; 4];

/// Own payoff of B in each state read from A's side.
fn opponent_payoffs(m: &PayoffMatrix) -> [f64; 4] {
    Outcome::ALL.map(|o| m.round_payoffs(o).1)
}

pub fn expected_payoffs(a: &MemoryOneStrategy, b: &MemoryOneStrategy, m: &PayoffMatrix) -> ExpectedPayoffPair {
    let dist = build_chain(a, b).limit_distribution(UNIFORM);
    let dot = |w: [f64; 4]| dist.iter().zip(w.iter()).map(|(p, x)| p * x).sum::<f64>();
    ExpectedPayoffPair {
        e_ab: dot(m.own_payoffs()),
        e_ba: dot(opponent_payoffs(m)),
    }
}

/// Mean per-round payoffs from direct simulation.
///
/// The previous-round memory is stratified: a quarter of the rounds start
/// from each of the four states, matching the uniform start used by
/// [`expected_payoffs`].
pub fn monte_carlo_payoffs(
    a: &MemoryOneStrategy,
    b: &MemoryOneStrategy,
    m: &PayoffMatrix,
    rounds: u64,
    seed: u64,
) -> ExpectedPayoffPair {
    assert!(rounds >= 1, "at least one round is required");
    let mut rng = rng::seeded(seed);
    let (mut total_a, mut total_b) = (0.0, 0.0);
    for (k, start) in Outcome::ALL.into_iter().enumerate() {
        let segment = rounds / 4 + u64::from((k as u64) < rounds % 4);
        let mut state = start;
        for _ in 0..segment {
            let ca = rng.random::<f64>() < a.coop_prob(state);
            let cb = rng.random::<f64>() < b.coop_prob(state.swap());
            state = Outcome::from_moves(ca, cb);
            let (pa, pb) = m.round_payoffs(state);
            total_a += pa;
            total_b += pb;
        }
    }
    ExpectedPayoffPair {
        e_ab: total_a / rounds as f64,
        e_ba: total_b / rounds as f64,
    }
}
