//! Successive-shortest-path min-cost flow, the independent check on the
//! network simplex solver. Shares nothing with the simplex code path beyond
//! the integer mass scaling of the inputs.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::core::matrix::Mat;
use crate::scalar::Real;

use super::LotError;

pub(crate) struct SspOutcome<T> {
    pub flows: Vec<i64>,
    /// Bipartite node potentials (sources 0..m, sinks m..2m).
    pub potentials: Vec<T>,
    pub augmentations: usize,
}

struct Arc {
    to: u32,
    rev: u32,
    residual: i64,
    cost: f64,
}

struct Graph {
    adj: Vec<Vec<Arc>>,
}

impl Graph {
    fn new(nodes: usize) -> Self {
        Self { adj: (0..nodes).map(|_| Vec::new()).collect() }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: i64, cost: f64) {
        let rev_from = self.adj[to].len() as u32;
        let rev_to = self.adj[from].len() as u32;
        self.adj[from].push(Arc { to: to as u32, rev: rev_from, residual: cap, cost });
        self.adj[to].push(Arc { to: from as u32, rev: rev_to, residual: 0, cost: -cost });
    }
}

#[derive(PartialEq)]
struct HeapEntry {
    dist: f64,
    node: u32,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on distance; node index breaks ties deterministically.
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Exact transportation solve by successive shortest paths with Johnson
/// potentials. Dijkstra runs on reduced costs; one Bellman-Ford pass seeds
/// the potentials when negative costs are present.
pub(crate) fn solve_transportation_ssp<T: Real>(
    supply: &[i64],
    demand: &[i64],
    cost: &Mat<T>,
) -> Result<SspOutcome<T>, LotError> {
    let m = supply.len();
    let source = 2 * m;
    let sink = 2 * m + 1;
    let nodes = 2 * m + 2;
    let total: i64 = supply.iter().sum();

    let mut g = Graph::new(nodes);
    for (i, &s) in supply.iter().enumerate() {
        g.add_edge(source, i, s, 0.0);
    }
    // Real arc (i, j) lands at adjacency slot j + 1 of node i: slot 0 is the
    // reverse of source -> i.
    for i in 0..m {
        for j in 0..m {
            g.add_edge(i, m + j, total, cost[(i, j)].to_f64().unwrap());
        }
    }
    for (j, &d) in demand.iter().enumerate() {
        g.add_edge(m + j, sink, d, 0.0);
    }

    let mut pi = vec![0.0f64; nodes];
    if cost.iter().any(|c| *c < T::zero()) {
        bellman_ford(&g, source, &mut pi);
    }

    let mut remaining = total;
    let mut augmentations = 0usize;
    let mut dist = vec![f64::INFINITY; nodes];
    let mut prev: Vec<(u32, u32)> = vec![(u32::MAX, 0); nodes];

    while remaining > 0 {
        dist.fill(f64::INFINITY);
        dist[source] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(HeapEntry { dist: 0.0, node: source as u32 });
        while let Some(HeapEntry { dist: du, node }) = heap.pop() {
            let u = node as usize;
            if du > dist[u] {
                continue;
            }
            for (idx, arc) in g.adj[u].iter().enumerate() {
                if arc.residual <= 0 {
                    continue;
                }
                let v = arc.to as usize;
                // Johnson's invariant makes this non-negative in exact
                // arithmetic; clamp the float residue so predecessor chains
                // stay acyclic.
                let reduced = (arc.cost + pi[u] - pi[v]).max(0.0);
                let nd = du + reduced;
                if nd < dist[v] {
                    dist[v] = nd;
                    prev[v] = (node, idx as u32);
                    heap.push(HeapEntry { dist: nd, node: arc.to });
                }
            }
        }
        if !dist[sink].is_finite() {
            return Err(LotError::Internal(
                "sink unreachable in a balanced transportation problem".into(),
            ));
        }
        for (v, d) in dist.iter().enumerate() {
            if d.is_finite() {
                pi[v] += d;
            }
        }

        // Bottleneck along the shortest path, then push.
        let mut bottleneck = remaining;
        let mut v = sink;
        while v != source {
            let (p, idx) = prev[v];
            bottleneck = bottleneck.min(g.adj[p as usize][idx as usize].residual);
            v = p as usize;
        }
        let mut v = sink;
        while v != source {
            let (p, idx) = prev[v];
            let rev = g.adj[p as usize][idx as usize].rev as usize;
            g.adj[p as usize][idx as usize].residual -= bottleneck;
            g.adj[v][rev].residual += bottleneck;
            v = p as usize;
        }
        remaining -= bottleneck;
        augmentations += 1;
    }

    let mut flows = vec![0i64; m * m];
    for i in 0..m {
        for j in 0..m {
            let arc = &g.adj[i][j + 1];
            debug_assert_eq!(arc.to as usize, m + j);
            flows[i * m + j] = total - arc.residual;
        }
    }

    // LP duals from the flow potentials: u_i = -pi_i, v_j = pi_{m+j}, then
    // tighten rows that never entered a shortest-path tree (zero-supply rows)
    // so u_i + v_j <= c_ij holds everywhere.
    let mut u: Vec<f64> = (0..m).map(|i| -pi[i]).collect();
    let v: Vec<f64> = (0..m).map(|j| pi[m + j]).collect();
    for i in 0..m {
        let tight = (0..m)
            .map(|j| cost[(i, j)].to_f64().unwrap() - v[j])
            .fold(f64::INFINITY, f64::min);
        if tight > u[i] {
            u[i] = tight;
        }
    }
    let potentials: Vec<T> = u
        .iter()
        .map(|&x| -x)
        .chain(v.iter().copied())
        .map(|x| T::of(x))
        .collect();

    Ok(SspOutcome { flows, potentials, augmentations })
}

fn bellman_ford(g: &Graph, source: usize, pi: &mut [f64]) {
    let n = g.adj.len();
    pi.fill(f64::INFINITY);
    pi[source] = 0.0;
    for _ in 0..n {
        let mut changed = false;
        for u in 0..n {
            if !pi[u].is_finite() {
                continue;
            }
            for arc in &g.adj[u] {
                if arc.residual > 0 && pi[u] + arc.cost < pi[arc.to as usize] {
                    pi[arc.to as usize] = pi[u] + arc.cost;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    for p in pi.iter_mut() {
        if !p.is_finite() {
            *p = 0.0;
        }
    }
}
