//! Network generation and measurement.
//!
//! Covers the two families used by the experiments (random regular graphs
//! standing in for well-mixed populations, Barabási–Albert growth for
//! scale-free ones), degree assortativity over remaining degrees, and
//! degree-preserving rewiring toward a target assortativity.

use std::collections::HashSet;
use std::io::{self, BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::rng::{self, SimRng};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("no connected simple {k}-regular graph on {n} nodes")]
    InfeasibleDegree { n: usize, k: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("graph has no edges")]
    EmptyGraph,
    #[error("edge ({0}, {1}) is a self-loop")]
    SelfLoop(usize, usize),
    #[error("edge ({0}, {1}) appears more than once")]
    DuplicateEdge(usize, usize),
    #[error("edge ({u}, {v}) references a node outside 0..{n}")]
    NodeOutOfRange { u: usize, v: usize, n: usize },
    #[error("assortativity target {target} unreachable: stopped at {achieved}")]
    TargetUnreachable {
        target: f64,
        achieved: f64,
        network: Box<Network>,
    },
    #[error("edge list line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Undirected simple graph on nodes `0..n`.
///
/// Edges are stored once as `(u, v)` with `u < v`, sorted; each node keeps
/// `(neighbor, edge index)` pairs so per-edge state can be addressed from
/// either endpoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    n: usize,
    edges: Vec<(usize, usize)>,
    incident: Vec<Vec<(usize, usize)>>,
}

impl Network {
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, GraphError> {
        let mut list = Vec::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(GraphError::NodeOutOfRange { u, v, n });
            }
            if u == v {
                return Err(GraphError::SelfLoop(u, v));
            }
            list.push((u.min(v), u.max(v)));
        }
        list.sort_unstable();
        if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
            return Err(GraphError::DuplicateEdge(w[0].0, w[0].1));
        }
        let mut incident = vec![Vec::new(); n];
        for (idx, &(u, v)) in list.iter().enumerate() {
            incident[u].push((v, idx));
            incident[v].push((u, idx));
        }
        Ok(Self {
            n,
            edges: list,
            incident,
        })
    }

    /// Complete graph on `n` nodes.
    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v)));
        Self::from_edges(n, edges).expect("complete graph is simple")
    }

    /// Star with node 0 as the hub.
    pub fn star(n: usize) -> Self {
        Self::from_edges(n, (1..n).map(|v| (0, v))).expect("star is simple")
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.incident[v].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.incident.iter().map(Vec::len).collect()
    }

    /// `(neighbor, edge index)` pairs of `v`.
    #[inline]
    pub fn incident(&self, v: usize) -> &[(usize, usize)] {
        &self.incident[v]
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.incident[v].iter().map(|&(u, _)| u)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.binary_search(&(u.min(v), u.max(v))).is_ok()
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for u in self.neighbors(v) {
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    stack.push(u);
                }
            }
        }
        count == self.n
    }

    /// Writes `# nodes <n>` followed by one `u v` line per edge.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# nodes {}", self.n)?;
        for &(u, v) in &self.edges {
            writeln!(w, "{u} {v}")?;
        }
        Ok(())
    }

    /// Reads an edge list. Lines starting with `#` are comments, except a
    /// `# nodes <n>` header which fixes the node count; without it the count
    /// is one past the largest index.
    pub fn read_edge_list<R: BufRead>(r: R) -> Result<Self, GraphError> {
        let mut declared = None;
        let mut edges = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(n) = rest.trim().strip_prefix("nodes") {
                    let n = n.trim().parse::<usize>().map_err(|e| GraphError::Parse {
                        line: i + 1,
                        msg: e.to_string(),
                    })?;
                    declared = Some(n);
                }
                continue;
            }
            let mut it = line.split_whitespace();
            let mut next = || -> Result<usize, GraphError> {
                it.next()
                    .ok_or_else(|| GraphError::Parse {
                        line: i + 1,
                        msg: "expected two node indices".into(),
                    })?
                    .parse()
                    .map_err(|e: std::num::ParseIntError| GraphError::Parse {
                        line: i + 1,
                        msg: e.to_string(),
                    })
            };
            let (u, v) = (next()?, next()?);
            edges.push((u, v));
        }
        let n = declared.unwrap_or_else(|| edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0));
        Self::from_edges(n, edges)
    }
}

/// Connected simple `k`-regular random graph.
///
/// Stubs are paired one edge at a time, redrawing any pair that would form a
/// loop or a repeated edge and restarting when no valid pair is left; whole
/// graphs that come out disconnected are redrawn.
pub fn regular_random(n: usize, k: usize, seed: u64) -> Result<Network, GraphError> {
    if k >= n || (n * k) % 2 == 1 || (k == 0 && n > 1) || (k == 1 && n > 2) {
        return Err(GraphError::InfeasibleDegree { n, k });
    }
    let mut rng = rng::substream(seed, rng::streams::NETWORK);
    const MAX_ATTEMPTS: usize = 10_000;
    for _ in 0..MAX_ATTEMPTS {
        if let Some(edges) = pair_stubs(n, k, &mut rng) {
            let net = Network::from_edges(n, edges)?;
            if net.is_connected() {
                return Ok(net);
            }
        }
    }
    Err(GraphError::InfeasibleDegree { n, k })
}

fn pair_stubs(n: usize, k: usize, rng: &mut SimRng) -> Option<Vec<(usize, usize)>> {
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, k)).collect();
    let mut adj: Vec<Vec<usize>> = vec![Vec::with_capacity(k); n];
    let mut edges = Vec::with_capacity(n * k / 2);
    while !stubs.is_empty() {
        let mut misses = 0usize;
        loop {
            let i = rng.random_range(0..stubs.len());
            let j = rng.random_range(0..stubs.len());
            let (u, v) = (stubs[i], stubs[j]);
            if i != j && u != v && !adj[u].contains(&v) {
                adj[u].push(v);
                adj[v].push(u);
                edges.push((u, v));
                stubs.swap_remove(i.max(j));
                stubs.swap_remove(i.min(j));
                break;
            }
            misses += 1;
            if misses > 64 {
                if !has_valid_pair(&stubs, &adj) {
                    return None;
                }
                misses = 0;
            }
        }
    }
    Some(edges)
}

fn has_valid_pair(stubs: &[usize], adj: &[Vec<usize>]) -> bool {
    let mut nodes: Vec<usize> = stubs.to_vec();
    nodes.sort_unstable();
    nodes.dedup();
    nodes
        .iter()
        .enumerate()
        .any(|(i, &u)| nodes[i + 1..].iter().any(|&v| !adj[u].contains(&v)))
}

/// Preferential-attachment growth from a complete seed graph on
/// `max(m, 2)` nodes; each arriving node links to `m` distinct existing
/// nodes chosen with probability proportional to degree.
pub fn barabasi_albert(n: usize, m: usize, seed: u64) -> Result<Network, GraphError> {
    if m < 1 || m >= n {
        return Err(GraphError::InvalidParameter(format!(
            "barabasi_albert needs 1 <= m < n (got n={n}, m={m})"
        )));
    }
    let m0 = m.max(2);
    let mut rng = rng::substream(seed, rng::streams::NETWORK);
    let mut edges = Vec::with_capacity(m0 * (m0 - 1) / 2 + (n - m0) * m);
    // One entry per edge end, so a uniform pick is degree-proportional.
    let mut ends = Vec::with_capacity(2 * edges.capacity());
    for u in 0..m0 {
        for v in u + 1..m0 {
            edges.push((u, v));
            ends.extend([u, v]);
        }
    }
    let mut chosen = Vec::with_capacity(m);
    for v in m0..n {
        chosen.clear();
        while chosen.len() < m {
            let t = ends[rng.random_range(0..ends.len())];
            if !chosen.contains(&t) {
                chosen.push(t);
            }
        }
        for &t in &chosen {
            edges.push((t, v));
            ends.extend([t, v]);
        }
    }
    Network::from_edges(n, edges)
}

/// Joint statistics of remaining degrees (degree minus one) across edges.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeMixing {
    /// Excess-degree distribution, indexed by remaining degree.
    pub q: Vec<f64>,
    /// Symmetric joint distribution of remaining degrees at the two ends of
    /// a uniformly chosen edge.
    pub e_jk: Vec<Vec<f64>>,
    pub sigma_q: f64,
    pub rho: f64,
}

/// Degree assortativity ρ = Σ jk (e_jk − q_j q_k) / σ_q², with ρ = 0 when
/// σ_q vanishes.
pub fn assortativity(g: &Network) -> Result<DegreeMixing, GraphError> {
    if g.edge_count() == 0 {
        return Err(GraphError::EmptyGraph);
    }
    let deg = g.degrees();
    let kmax = deg.iter().copied().max().unwrap_or(1) - 1;
    let mut e_jk = vec![vec![0.0; kmax + 1]; kmax + 1];
    let w = 1.0 / (2.0 * g.edge_count() as f64);
    for &(u, v) in g.edges() {
        let (j, k) = (deg[u] - 1, deg[v] - 1);
        e_jk[j][k] += w;
        e_jk[k][j] += w;
    }
    let q: Vec<f64> = e_jk.iter().map(|row| row.iter().sum()).collect();
    let mean: f64 = q.iter().enumerate().map(|(j, p)| j as f64 * p).sum();
    let var: f64 = q.iter().enumerate().map(|(j, p)| (j as f64 - mean).powi(2) * p).sum();
    let var = if var <= 1e-12 { 0.0 } else { var };
    let sigma_q = var.sqrt();
    let rho = if var == 0.0 {
        0.0
    } else {
        let mut num = 0.0;
        for (j, row) in e_jk.iter().enumerate() {
            for (k, &e) in row.iter().enumerate() {
                num += (j * k) as f64 * (e - q[j] * q[k]);
            }
        }
        (num / var).clamp(-1.0, 1.0)
    };
    Ok(DegreeMixing { q, e_jk, sigma_q, rho })
}

/// Result of a rewiring pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Rewired {
    pub network: Network,
    pub rho: f64,
    pub accepted_swaps: usize,
}

/// Running assortativity under degree-preserving swaps. Degrees are fixed, so
/// only the sum of remaining-degree products over edges moves.
struct MixingTracker {
    rem: Vec<f64>,
    edges: f64,
    mean: f64,
    var: f64,
    product_sum: f64,
}

impl MixingTracker {
    fn new(g: &Network) -> Self {
        let rem: Vec<f64> = g.degrees().iter().map(|&d| d as f64 - 1.0).collect();
        let m = g.edge_count() as f64;
        let (mut first, mut second, mut prod) = (0.0, 0.0, 0.0);
        for &(u, v) in g.edges() {
            first += rem[u] + rem[v];
            second += rem[u] * rem[u] + rem[v] * rem[v];
            prod += rem[u] * rem[v];
        }
        let mean = first / (2.0 * m);
        Self {
            rem,
            edges: m,
            mean,
            var: second / (2.0 * m) - mean * mean,
            product_sum: prod,
        }
    }

    fn rho_for(&self, product_sum: f64) -> f64 {
        if self.var <= 1e-12 {
            0.0
        } else {
            (product_sum / self.edges - self.mean * self.mean) / self.var
        }
    }

    fn rho(&self) -> f64 {
        self.rho_for(self.product_sum)
    }
}

/// Degree-preserving double-edge swaps that move ρ toward `target`.
///
/// Two random edges with four distinct endpoints are re-paired the
/// Xulvi-Brunet–Sokolov way: the two highest-degree endpoints joined when ρ
/// must rise, highest with lowest when it must fall. A swap is kept only if
/// it brings ρ strictly closer to the target, creates no duplicate edge and
/// leaves the graph connected. Stops once within `tol` or after `max_steps`
/// proposals; ending further than `2 * tol` away is an error carrying the
/// best graph found.
pub fn rewire_to_assortativity(
    g: &Network,
    target_rho: f64,
    tol: f64,
    max_steps: usize,
    seed: u64,
) -> Result<Rewired, GraphError> {
    if !(-1.0..=1.0).contains(&target_rho) || tol.is_nan() || tol < 0.0 {
        return Err(GraphError::InvalidParameter(format!(
            "target {target_rho} must lie in [-1, 1] and tol {tol} must be >= 0"
        )));
    }
    if g.edge_count() == 0 {
        return Err(GraphError::EmptyGraph);
    }
    let mut rng = rng::substream(seed, rng::streams::REWIRE);
    let mut tracker = MixingTracker::new(g);
    let mut edges = g.edges().to_vec();
    let mut adj: Vec<HashSet<usize>> = (0..g.node_count()).map(|v| g.neighbors(v).collect()).collect();
    let mut accepted = 0;
    let deg: Vec<usize> = g.degrees();

    for _ in 0..max_steps {
        let rho = tracker.rho();
        let gap = (rho - target_rho).abs();
        if gap <= tol || edges.len() < 2 {
            break;
        }
        let i = rng.random_range(0..edges.len());
        let j = rng.random_range(0..edges.len());
        let ((a, b), (c, d)) = (edges[i], edges[j]);
        if i == j || a == c || a == d || b == c || b == d {
            continue;
        }
        let mut four = [a, b, c, d];
        // Equal degrees are ordered at random so plateaus do not bias pairing.
        four.shuffle(&mut rng);
        four.sort_by(|x, y| deg[*y].cmp(&deg[*x]));
        let assortative = ((four[0], four[1]), (four[2], four[3]));
        let disassortative = ((four[0], four[3]), (four[1], four[2]));
        let middle = ((four[0], four[2]), (four[1], four[3]));
        let ranked = if target_rho > rho {
            [assortative, middle]
        } else {
            [disassortative, middle]
        };
        let current = [key(a, b), key(c, d)];
        let r = &tracker.rem;
        let Some((e1, e2, new_sum)) = ranked.into_iter().find_map(|(e1, e2)| {
            let mut proposed = [key(e1.0, e1.1), key(e2.0, e2.1)];
            proposed.sort_unstable();
            let mut old = current;
            old.sort_unstable();
            if proposed == old || adj[e1.0].contains(&e1.1) || adj[e2.0].contains(&e2.1) {
                return None;
            }
            let sum = tracker.product_sum - r[a] * r[b] - r[c] * r[d] + r[e1.0] * r[e1.1] + r[e2.0] * r[e2.1];
            ((tracker.rho_for(sum) - target_rho).abs() < gap).then_some((e1, e2, sum))
        }) else {
            continue;
        };
        adj[a].remove(&b);
        adj[b].remove(&a);
        adj[c].remove(&d);
        adj[d].remove(&c);
        adj[e1.0].insert(e1.1);
        adj[e1.1].insert(e1.0);
        adj[e2.0].insert(e2.1);
        adj[e2.1].insert(e2.0);
        if connected(&adj) {
            edges[i] = e1;
            edges[j] = e2;
            tracker.product_sum = new_sum;
            accepted += 1;
        } else {
            adj[e1.0].remove(&e1.1);
            adj[e1.1].remove(&e1.0);
            adj[e2.0].remove(&e2.1);
            adj[e2.1].remove(&e2.0);
            adj[a].insert(b);
            adj[b].insert(a);
            adj[c].insert(d);
            adj[d].insert(c);
        }
    }

    let network = Network::from_edges(g.node_count(), edges)?;
    let rho = assortativity(&network)?.rho;
    if (rho - target_rho).abs() > 2.0 * tol {
        return Err(GraphError::TargetUnreachable {
            target: target_rho,
            achieved: rho,
            network: Box::new(network),
        });
    }
    Ok(Rewired {
        network,
        rho,
        accepted_swaps: accepted,
    })
}

fn key(u: usize, v: usize) -> (usize, usize) {
    (u.min(v), u.max(v))
}

fn connected(adj: &[HashSet<usize>]) -> bool {
    if adj.is_empty() {
        return true;
    }
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![0];
    seen[0] = true;
    let mut count = 1;
    while let Some(v) = stack.pop() {
        for &u in &adj[v] {
            if !seen[u] {
                seen[u] = true;
                count += 1;
                stack.push(u);
            }
        }
    }
    count == adj.len()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeStats {
    pub mean_degree: f64,
    /// `(degree, count)` pairs for every degree present, ascending.
    pub histogram: Vec<(usize, usize)>,
    /// Nodes by descending degree, ascending index within a degree.
    pub by_degree: Vec<usize>,
}

impl DegreeStats {
    pub fn write_histogram_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "degree,count")?;
        for &(d, c) in &self.histogram {
            writeln!(w, "{d},{c}")?;
        }
        Ok(())
    }
}

pub fn degree_stats(g: &Network) -> DegreeStats {
    let deg = g.degrees();
    let n = deg.len();
    let mean_degree = if n == 0 {
        0.0
    } else {
        deg.iter().sum::<usize>() as f64 / n as f64
    };
    let kmax = deg.iter().copied().max().unwrap_or(0);
    let mut counts = vec![0usize; kmax + 1];
    deg.iter().for_each(|&d| counts[d] += 1);
    let histogram = counts.into_iter().enumerate().filter(|&(_, c)| c > 0).collect();
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by(|&x, &y| deg[y].cmp(&deg[x]).then(x.cmp(&y)));
    DegreeStats {
        mean_degree,
        histogram,
        by_degree,
    }
}

/// Nodes by descending degree with equal-degree runs in seeded random order.
pub fn hub_order(g: &Network, rng: &mut SimRng) -> Vec<usize> {
    let mut nodes: Vec<usize> = (0..g.node_count()).collect();
    nodes.shuffle(rng);
    nodes.sort_by_key(|&v| std::cmp::Reverse(g.degree(v)));
    nodes
}

/// Exponent γ of a power law `count ∝ k^-γ` fitted to a degree histogram.
///
/// Degrees are grouped into doubling bins starting at the smallest degree
/// present; the per-degree density of each non-empty bin is regressed on its
/// geometric-mean degree in log-log space. Returns `None` with fewer than two
/// usable bins.
pub fn power_law_exponent(histogram: &[(usize, usize)]) -> Option<f64> {
    let kmin = histogram
        .iter()
        .filter(|&&(d, c)| d > 0 && c > 0)
        .map(|&(d, _)| d)
        .min()?;
    let mut bins: Vec<(usize, usize, usize)> = Vec::new(); // lo, hi (exclusive), count
    let mut lo = kmin;
    let kmax = histogram.iter().map(|&(d, _)| d).max()?;
    while lo <= kmax {
        let hi = lo * 2;
        let count = histogram
            .iter()
            .filter(|&&(d, _)| d >= lo && d < hi)
            .map(|&(_, c)| c)
            .sum();
        bins.push((lo, hi, count));
        lo = hi;
    }
    let points: Vec<(f64, f64)> = bins
        .iter()
        .filter(|b| b.2 > 0)
        .map(|&(lo, hi, c)| {
            let x = ((lo as f64) * ((hi - 1) as f64)).sqrt();
            let density = c as f64 / (hi - lo) as f64;
            (x.ln(), density.ln())
        })
        .collect();
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(-sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simple_and_connected(g: &Network) {
        assert!(g.is_connected());
        let mut seen = HashSet::new();
        for &(u, v) in g.edges() {
            assert!(u < v);
            assert!(seen.insert((u, v)));
        }
    }

    #[test]
    fn regular_graph_degrees() {
        let g = regular_random(1000, 8, 11).unwrap();
        simple_and_connected(&g);
        assert!(g.degrees().iter().all(|&d| d == 8));
        assert_eq!(g.edge_count(), 4000);
    }

    #[test]
    fn regular_small_cases() {
        let k4 = regular_random(4, 3, 0).unwrap();
        assert_eq!(k4, Network::complete(4));
        assert!(matches!(
            regular_random(3, 3, 0),
            Err(GraphError::InfeasibleDegree { .. })
        ));
        assert!(matches!(
            regular_random(5, 3, 0),
            Err(GraphError::InfeasibleDegree { .. })
        ));
        assert!(matches!(
            regular_random(10, 1, 0),
            Err(GraphError::InfeasibleDegree { .. })
        ));
        let ring = regular_random(30, 2, 5).unwrap();
        simple_and_connected(&ring);
    }

    #[test]
    fn regular_is_seed_deterministic() {
        assert_eq!(regular_random(200, 8, 3).unwrap(), regular_random(200, 8, 3).unwrap());
        assert_ne!(regular_random(200, 8, 3).unwrap(), regular_random(200, 8, 4).unwrap());
    }

    #[test]
    fn ba_edge_counts() {
        let g = barabasi_albert(1000, 1, 2).unwrap();
        assert_eq!(g.edge_count(), 999);
        simple_and_connected(&g);
        let g = barabasi_albert(500, 3, 2).unwrap();
        assert_eq!(g.edge_count(), 3 + 497 * 3);
        simple_and_connected(&g);
        assert!(barabasi_albert(10, 0, 0).is_err());
        assert!(barabasi_albert(10, 10, 0).is_err());
    }

    #[test]
    fn power_law_fit_recovers_synthetic_exponent() {
        let hist: Vec<(usize, usize)> = (1..=2000usize)
            .map(|k| (k, (1e9 * (k as f64).powf(-2.5)).round() as usize))
            .filter(|&(_, c)| c > 0)
            .collect();
        let gamma = power_law_exponent(&hist).unwrap();
        assert!((gamma - 2.5).abs() < 0.1, "gamma = {gamma}");
    }

    #[test]
    fn ba_degree_distribution_is_scale_free() {
        let g = barabasi_albert(10_000, 2, 9).unwrap();
        let gamma = power_law_exponent(&degree_stats(&g).histogram).unwrap();
        assert!((2.0..=3.5).contains(&gamma), "gamma = {gamma}");
    }

    #[test]
    fn star_is_perfectly_disassortative() {
        let mix = assortativity(&Network::star(10)).unwrap();
        assert!((mix.rho + 1.0).abs() < 1e-12);
        assert!((mix.q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn regular_graph_has_zero_assortativity() {
        let mix = assortativity(&regular_random(100, 4, 1).unwrap()).unwrap();
        assert_eq!(mix.rho, 0.0);
        assert_eq!(mix.sigma_q, 0.0);
    }

    #[test]
    fn empty_graph_rejected() {
        let g = Network::from_edges(3, []).unwrap();
        assert!(matches!(assortativity(&g), Err(GraphError::EmptyGraph)));
    }

    #[test]
    fn rewire_noop_when_on_target() {
        let g = barabasi_albert(300, 2, 1).unwrap();
        let rho = assortativity(&g).unwrap().rho;
        let out = rewire_to_assortativity(&g, rho, 0.01, 1000, 1).unwrap();
        assert_eq!(out.accepted_swaps, 0);
        assert_eq!(out.network, g);
    }

    #[test]
    fn rewire_reaches_negative_target() {
        let g = barabasi_albert(1000, 2, 4).unwrap();
        let out = rewire_to_assortativity(&g, -0.3, 0.02, 200_000, 4).unwrap();
        assert!((-0.32..=-0.28).contains(&out.rho), "rho = {}", out.rho);
        let mut before = g.degrees();
        let mut after = out.network.degrees();
        before.sort_unstable();
        after.sort_unstable();
        assert_eq!(before, after);
        assert_eq!(g.degrees(), out.network.degrees());
        simple_and_connected(&out.network);
    }

    #[test]
    fn rewire_star_unreachable() {
        let err = rewire_to_assortativity(&Network::star(10), 0.5, 0.02, 1000, 0).unwrap_err();
        match err {
            GraphError::TargetUnreachable { achieved, .. } => assert!((achieved + 1.0).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn degree_stats_examples() {
        assert_eq!(degree_stats(&Network::complete(4)).mean_degree, 3.0);
        let reg = degree_stats(&regular_random(1000, 8, 2).unwrap());
        assert_eq!(reg.histogram, vec![(8, 1000)]);
        let g = barabasi_albert(1000, 1, 3).unwrap();
        let st = degree_stats(&g);
        assert!((st.mean_degree - 2.0 * g.edge_count() as f64 / 1000.0).abs() < 1e-12);
        assert_eq!(st.histogram.iter().map(|h| h.1).sum::<usize>(), 1000);
        assert!(st.by_degree.windows(2).all(|w| g.degree(w[0]) >= g.degree(w[1])));
    }

    #[test]
    fn hub_order_sorted_with_shuffled_ties() {
        let g = barabasi_albert(300, 1, 5).unwrap();
        let a = hub_order(&g, &mut rng::seeded(1));
        let b = hub_order(&g, &mut rng::seeded(2));
        assert!(a.windows(2).all(|w| g.degree(w[0]) >= g.degree(w[1])));
        assert_ne!(a, b);
        assert_eq!(a, hub_order(&g, &mut rng::seeded(1)));
    }

    #[test]
    fn edge_list_round_trip() {
        let g = barabasi_albert(50, 2, 8).unwrap();
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        let back = Network::read_edge_list(&buf[..]).unwrap();
        assert_eq!(back, g);
        let text = "0 1\n1 2\n\n# comment\n2 0\n";
        assert_eq!(Network::read_edge_list(text.as_bytes()).unwrap().edge_count(), 3);
        assert!(matches!(
            Network::read_edge_list("0 1\n1 x\n".as_bytes()),
            Err(GraphError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            Network::read_edge_list("0 0\n".as_bytes()),
            Err(GraphError::SelfLoop(0, 0))
        ));
        assert!(matches!(
            Network::read_edge_list("0 1\n1 0\n".as_bytes()),
            Err(GraphError::DuplicateEdge(0, 1))
        ));
    }

    #[test]
    fn histogram_csv() {
        let mut buf = Vec::new();
        degree_stats(&Network::star(4)).write_histogram_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "degree,count\n1,3\n3,1\n");
    }
}
