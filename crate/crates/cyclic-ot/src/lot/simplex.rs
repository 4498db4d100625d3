//! Primal network simplex on the complete bipartite transportation graph.
//!
//! Masses arrive as exact 64-bit integers, so flow updates and ratio tests
//! never see floating-point noise; only costs and node potentials are real
//! valued. Degeneracy is handled by keeping the spanning tree strongly
//! feasible: every zero-flow tree arc points toward the root, and the
//! leaving arc is the last blocking arc around the cycle starting from its
//! apex. The entering rule is block search over the arc list, ties broken by
//! the lowest (i, j) arc index.

use crate::core::matrix::Mat;
use crate::scalar::Real;

use super::LotError;

const NONE: u32 = u32::MAX;

/// How many pivots between exact potential refreshes. Incremental updates
/// drift by ~eps * |potential| per pivot; refreshing keeps the entering-arc
/// test trustworthy on long runs.
const REFRESH_INTERVAL: usize = 256;

pub(crate) struct SimplexOutcome<T> {
    /// Flow on real arc i * m + j, in integer mass units.
    pub flows: Vec<i64>,
    /// Node potentials: sources 0..m, sinks m..2m, root at 2m.
    pub potentials: Vec<T>,
    pub pivots: usize,
}

struct Tree {
    parent: Vec<u32>,
    /// Arc connecting each node to its parent.
    pred_arc: Vec<u32>,
    children: Vec<Vec<u32>>,
    depth: Vec<u32>,
}

impl Tree {
    fn attach(&mut self, node: u32, parent: u32, arc: u32) {
        self.parent[node as usize] = parent;
        self.pred_arc[node as usize] = arc;
        self.children[parent as usize].push(node);
    }

    fn detach(&mut self, node: u32) {
        let parent = self.parent[node as usize] as usize;
        let pos = self.children[parent]
            .iter()
            .position(|&c| c == node)
            .expect("node missing from parent's child list");
        self.children[parent].swap_remove(pos);
        self.parent[node as usize] = NONE;
        self.pred_arc[node as usize] = NONE;
    }
}

/// Solves min <C, S> s.t. S 1 = supply, S^t 1 = demand, S >= 0 with integer
/// masses. `supply` and `demand` must already balance exactly.
pub(crate) fn solve_transportation<T: Real>(
    supply: &[i64],
    demand: &[i64],
    cost: &Mat<T>,
) -> Result<SimplexOutcome<T>, LotError> {
    let m = supply.len();
    debug_assert_eq!(demand.len(), m);
    debug_assert_eq!(cost.rows(), m);
    debug_assert_eq!(cost.cols(), m);
    debug_assert_eq!(supply.iter().sum::<i64>(), demand.iter().sum::<i64>());

    let num_nodes = 2 * m + 1;
    let root = (2 * m) as u32;
    let num_real = m * m;

    let max_abs_cost = cost.iter().fold(T::zero(), |acc, &c| acc.max(c.abs()));
    // Big-M cost on artificial arcs; large enough that no optimal basis keeps
    // artificial flow when a real routing exists.
    let art_cost = (T::one() + max_abs_cost) * T::of(num_nodes as f64);

    // supply per node: sources positive, sinks negative.
    let node_supply = |u: usize| -> i64 {
        if u < m {
            supply[u]
        } else {
            -demand[u - m]
        }
    };

    // Arc layout: 0..m*m real arcs (i -> m + j), then one artificial arc per
    // bipartite node, oriented toward the root for non-negative supply.
    let num_arcs = num_real + 2 * m;
    let mut flow = vec![0i64; num_arcs];
    let mut in_tree = vec![false; num_arcs];
    let mut potential = vec![T::zero(); num_nodes];

    let arc_tail_head = |a: usize| -> (u32, u32) {
        if a < num_real {
            ((a / m) as u32, (m + a % m) as u32)
        } else {
            let u = (a - num_real) as u32;
            if node_supply(u as usize) >= 0 {
                (u, root)
            } else {
                (root, u)
            }
        }
    };
    let arc_cost = |a: usize| -> T {
        if a < num_real {
            cost[(a / m, a % m)]
        } else {
            art_cost
        }
    };

    let mut tree = Tree {
        parent: vec![NONE; num_nodes],
        pred_arc: vec![NONE; num_nodes],
        children: vec![Vec::new(); num_nodes],
        depth: vec![0; num_nodes],
    };

    for u in 0..2 * m {
        let a = num_real + u;
        let s = node_supply(u);
        flow[a] = s.abs();
        in_tree[a] = true;
        tree.attach(u as u32, root, a as u32);
        tree.depth[u] = 1;
        potential[u] = if s >= 0 { -art_cost } else { art_cost };
    }

    let reduced_cost = |a: usize, potential: &[T]| -> T {
        let (t, h) = arc_tail_head(a);
        arc_cost(a) + potential[t as usize] - potential[h as usize]
    };

    let recompute_potentials = |tree: &Tree, potential: &mut Vec<T>| {
        potential[root as usize] = T::zero();
        let mut stack = vec![root];
        while let Some(p) = stack.pop() {
            for &c in &tree.children[p as usize] {
                let a = tree.pred_arc[c as usize] as usize;
                let (t, _h) = arc_tail_head(a);
                potential[c as usize] = if t == c {
                    potential[p as usize] - arc_cost(a)
                } else {
                    potential[p as usize] + arc_cost(a)
                };
                stack.push(c);
            }
        }
    };

    let block_size = ((num_real as f64).sqrt() as usize).max(16).min(num_real.max(1));
    let mut next_arc = 0usize;
    let mut pivots = 0usize;

    'outer: loop {
        // Block search over real arcs for the most negative reduced cost.
        let mut entering: Option<(usize, T)> = None;
        let mut scanned = 0usize;
        while scanned < num_real {
            let stop = (next_arc + block_size).min(next_arc + (num_real - scanned));
            let mut best: Option<(usize, T)> = None;
            for pos in next_arc..stop {
                let a = if pos >= num_real { pos - num_real } else { pos };
                if in_tree[a] {
                    continue;
                }
                let rc = reduced_cost(a, &potential);
                if rc < T::zero() && best.map_or(true, |(_, b)| rc < b) {
                    best = Some((a, rc));
                }
            }
            scanned += stop - next_arc;
            next_arc = if stop >= num_real { stop - num_real } else { stop };
            if best.is_some() {
                entering = best;
                break;
            }
        }

        let (enter_arc, _) = match entering {
            Some(e) => e,
            None => {
                // Candidate optimum. Refresh potentials to squeeze out the
                // incremental drift, then verify with one exact full pass.
                recompute_potentials(&tree, &mut potential);
                let mut best: Option<(usize, T)> = None;
                for a in 0..num_real {
                    if in_tree[a] {
                        continue;
                    }
                    let rc = reduced_cost(a, &potential);
                    if rc < T::zero() && best.map_or(true, |(_, b)| rc < b) {
                        best = Some((a, rc));
                    }
                }
                match best {
                    Some(e) => e,
                    None => break 'outer,
                }
            }
        };

        pivot(
            enter_arc,
            &arc_tail_head,
            &reduced_cost,
            &mut tree,
            &mut flow,
            &mut in_tree,
            &mut potential,
        )?;
        pivots += 1;
        if pivots % REFRESH_INTERVAL == 0 {
            recompute_potentials(&tree, &mut potential);
        }
    }

    for u in 0..2 * m {
        let a = num_real + u;
        if flow[a] != 0 {
            return Err(LotError::Internal(
                "artificial flow remained in an optimal basis; problem infeasible".into(),
            ));
        }
    }

    Ok(SimplexOutcome { flows: flow[..num_real].to_vec(), potentials: potential, pivots })
}

#[allow(clippy::too_many_arguments)]
fn pivot<T: Real>(
    enter_arc: usize,
    arc_tail_head: &impl Fn(usize) -> (u32, u32),
    reduced_cost: &impl Fn(usize, &[T]) -> T,
    tree: &mut Tree,
    flow: &mut [i64],
    in_tree: &mut [bool],
    potential: &mut Vec<T>,
) -> Result<(), LotError> {
    let (u, v) = arc_tail_head(enter_arc);
    let rc_enter = reduced_cost(enter_arc, potential);

    // Tree paths from both endpoints to the cycle apex.
    let mut pu = u;
    let mut pv = v;
    let mut path_u: Vec<u32> = Vec::new(); // nodes strictly below the apex on u's side
    let mut path_v: Vec<u32> = Vec::new();
    while tree.depth[pu as usize] > tree.depth[pv as usize] {
        path_u.push(pu);
        pu = tree.parent[pu as usize];
    }
    while tree.depth[pv as usize] > tree.depth[pu as usize] {
        path_v.push(pv);
        pv = tree.parent[pv as usize];
    }
    while pu != pv {
        path_u.push(pu);
        path_v.push(pv);
        pu = tree.parent[pu as usize];
        pv = tree.parent[pv as usize];
    }

    // Cycle orientation follows the entering arc u -> v: up from v to the
    // apex, then from the apex down to u. A tree arc is forward when the
    // cycle traverses it in its own direction.
    // Arc of node x on the v-side (x toward parent): forward iff tail == x.
    // Arc of node x on the u-side (parent toward x): forward iff head == x.
    let is_forward = |x: u32, v_side: bool| -> bool {
        let a = tree.pred_arc[x as usize] as usize;
        let (t, h) = arc_tail_head(a);
        if v_side {
            t == x
        } else {
            h == x
        }
    };

    // Ratio test: delta is limited by backward arcs only (no capacities).
    let mut delta: Option<i64> = None;
    for &x in &path_v {
        if !is_forward(x, true) {
            let f = flow[tree.pred_arc[x as usize] as usize];
            delta = Some(delta.map_or(f, |d: i64| d.min(f)));
        }
    }
    for &x in &path_u {
        if !is_forward(x, false) {
            let f = flow[tree.pred_arc[x as usize] as usize];
            delta = Some(delta.map_or(f, |d: i64| d.min(f)));
        }
    }
    let delta = delta.ok_or_else(|| {
        LotError::Internal("unbounded pivot cycle in a balanced transportation problem".into())
    })?;

    // Leaving arc: last blocking arc when walking the cycle from the apex in
    // its orientation, i.e. apex -> u side first, then v -> apex side.
    let mut leaving: Option<(u32, bool)> = None; // (node, on_v_side)
    for &x in path_u.iter().rev() {
        if !is_forward(x, false) && flow[tree.pred_arc[x as usize] as usize] == delta {
            leaving = Some((x, false));
        }
    }
    for &x in &path_v {
        if !is_forward(x, true) && flow[tree.pred_arc[x as usize] as usize] == delta {
            leaving = Some((x, true));
        }
    }
    let (leave_node, leave_on_v_side) =
        leaving.ok_or_else(|| LotError::Internal("no blocking arc found".into()))?;

    // Apply the flow change around the cycle.
    if delta != 0 {
        flow[enter_arc] += delta;
        for &x in &path_v {
            let a = tree.pred_arc[x as usize] as usize;
            if is_forward(x, true) {
                flow[a] += delta;
            } else {
                flow[a] -= delta;
            }
        }
        for &x in &path_u {
            let a = tree.pred_arc[x as usize] as usize;
            if is_forward(x, false) {
                flow[a] += delta;
            } else {
                flow[a] -= delta;
            }
        }
    }

    // Swap the leaving arc out of the tree and hang the entering arc.
    let leave_arc = tree.pred_arc[leave_node as usize];
    in_tree[leave_arc as usize] = false;
    in_tree[enter_arc] = true;
    tree.detach(leave_node);

    // The subtree cut off with leave_node contains exactly one endpoint of
    // the entering arc: u if the leaving arc sat on u's side of the cycle.
    let (sub_end, other_end) = if leave_on_v_side { (v, u) } else { (u, v) };

    // Re-root the cut subtree at sub_end: the parent chain sub_end -> ... ->
    // leave_node reverses, each reversed edge keeping its original arc.
    let mut chain = Vec::new();
    let mut x = sub_end;
    while x != leave_node {
        chain.push(x);
        x = tree.parent[x as usize];
    }
    chain.push(leave_node);
    let inner = chain.len() - 1;
    let old_arc: Vec<u32> = chain[..inner].iter().map(|&c| tree.pred_arc[c as usize]).collect();
    for &c in &chain[..inner] {
        tree.detach(c);
    }
    tree.attach(sub_end, other_end, enter_arc as u32);
    for w in 0..inner {
        tree.attach(chain[w + 1], chain[w], old_arc[w]);
    }

    // Potentials in the re-hung subtree shift by a constant chosen to zero
    // the entering arc's reduced cost; depths are rebuilt on the way.
    let shift = if sub_end == u { -rc_enter } else { rc_enter };
    let mut stack = vec![sub_end];
    tree.depth[sub_end as usize] = tree.depth[other_end as usize] + 1;
    while let Some(p) = stack.pop() {
        potential[p as usize] += shift;
        for &c in &tree.children[p as usize] {
            tree.depth[c as usize] = tree.depth[p as usize] + 1;
            stack.push(c);
        }
    }

    Ok(())
}
