use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use super::{BasicBlock, ControlEdge, EdgeKind, KernelGraph, NaturalLoop, PtxError};

/// Adds read-after-write edges from the most recent writer of each register
/// read. Existing edges are replaced.
pub fn build_dfg(mut block: BasicBlock) -> BasicBlock {
    let mut last_writer: BTreeMap<&str, usize> = BTreeMap::new();
    let mut edges = BTreeSet::new();
    for (i, inst) in block.instructions.iter().enumerate() {
        for reg in inst.reads() {
            if let Some(&w) = last_writer.get(reg) {
                edges.insert((w, i));
            }
        }
        for reg in &inst.defs {
            last_writer.insert(reg.as_str(), i);
        }
    }
    block.dfg = edges.into_iter().collect();
    block
}

/// Kahn's algorithm, always taking the smallest ready index. `None` on a cycle.
pub fn topo_order(n: usize, edges: &[(usize, usize)]) -> Option<Vec<usize>> {
    let mut indeg = vec![0usize; n];
    let mut succ = vec![Vec::new(); n];
    for &(u, v) in edges {
        succ[u].push(v);
        indeg[v] += 1;
    }
    let mut ready: BinaryHeap<Reverse<usize>> =
        (0..n).filter(|&i| indeg[i] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(u)) = ready.pop() {
        order.push(u);
        for &v in &succ[u] {
            indeg[v] -= 1;
            if indeg[v] == 0 {
                ready.push(Reverse(v));
            }
        }
    }
    (order.len() == n).then_some(order)
}

/// Immediate-dominator-free dominator sets for blocks reachable from `entry`.
/// Unreachable blocks get `None`.
fn dominators(n: usize, entry: usize, succ: &[Vec<usize>]) -> Vec<Option<BTreeSet<usize>>> {
    let mut preds = vec![Vec::new(); n];
    for (u, vs) in succ.iter().enumerate() {
        for &v in vs {
            preds[v].push(u);
        }
    }
    let mut reachable = vec![false; n];
    let mut stack = vec![entry];
    while let Some(u) = stack.pop() {
        if std::mem::replace(&mut reachable[u], true) {
            continue;
        }
        stack.extend(succ[u].iter().copied());
    }
    let all: BTreeSet<usize> = (0..n).filter(|&i| reachable[i]).collect();
    let mut dom: Vec<Option<BTreeSet<usize>>> = (0..n)
        .map(|i| reachable[i].then(|| all.clone()))
        .collect();
    dom[entry] = Some(BTreeSet::from([entry]));
    let mut changed = true;
    while changed {
        changed = false;
        for b in 0..n {
            if b == entry || !reachable[b] {
                continue;
            }
            let mut acc: Option<BTreeSet<usize>> = None;
            for &p in &preds[b] {
                if let Some(dp) = &dom[p] {
                    acc = Some(match acc {
                        None => dp.clone(),
                        Some(a) => a.intersection(dp).copied().collect(),
                    });
                }
            }
            let mut next = acc.unwrap_or_default();
            next.insert(b);
            if dom[b].as_ref() != Some(&next) {
                dom[b] = Some(next);
                changed = true;
            }
        }
    }
    dom
}

/// Classifies edges, rejects irreducible flow and collects natural loops.
pub(super) fn finish_graph(
    name: String,
    mut blocks: Vec<BasicBlock>,
    raw_edges: Vec<(usize, usize)>,
    warnings: Vec<String>,
) -> Result<KernelGraph, PtxError> {
    let n = blocks.len();
    let mut succ = vec![Vec::new(); n];
    for &(u, v) in &raw_edges {
        succ[u].push(v);
    }
    let dom = dominators(n, 0, &succ);

    let edges: Vec<ControlEdge> = raw_edges
        .iter()
        .map(|&(from, to)| {
            let back = dom[from].as_ref().is_some_and(|d| d.contains(&to));
            ControlEdge {
                from,
                to,
                kind: if back { EdgeKind::Back } else { EdgeKind::Forward },
            }
        })
        .collect();

    let forward: Vec<(usize, usize)> = edges
        .iter()
        .filter(|e| e.kind == EdgeKind::Forward)
        .map(|e| (e.from, e.to))
        .collect();
    if topo_order(n, &forward).is_none() {
        let culprit = first_cycle_node(n, &forward);
        return Err(PtxError::Irreducible {
            block: block_label(&blocks, culprit),
        });
    }

    let mut preds = vec![Vec::new(); n];
    for e in &edges {
        preds[e.to].push(e.from);
    }
    let mut by_header: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for e in edges.iter().filter(|e| e.kind == EdgeKind::Back) {
        let body = by_header
            .entry(e.to)
            .or_insert_with(|| BTreeSet::from([e.to]));
        let mut stack = vec![e.from];
        while let Some(b) = stack.pop() {
            if body.insert(b) {
                stack.extend(preds[b].iter().copied());
            }
        }
    }
    let loops: Vec<NaturalLoop> = by_header
        .into_iter()
        .map(|(header, blocks)| NaturalLoop {
            header,
            blocks,
            n_loop: None,
        })
        .collect();
    for l in &loops {
        for &b in &l.blocks {
            blocks[b].in_loop = true;
        }
    }

    let exits = (0..n).filter(|&b| succ[b].is_empty()).collect();
    Ok(KernelGraph {
        name,
        blocks,
        edges,
        loops,
        entry: 0,
        exits,
        warnings,
    })
}

fn block_label(blocks: &[BasicBlock], id: usize) -> String {
    blocks[id]
        .label
        .clone()
        .unwrap_or_else(|| format!("<bb{id}>"))
}

/// Smallest-index node left over after Kahn's algorithm stalls.
fn first_cycle_node(n: usize, edges: &[(usize, usize)]) -> usize {
    let mut indeg = vec![0usize; n];
    let mut succ = vec![Vec::new(); n];
    for &(u, v) in edges {
        succ[u].push(v);
        indeg[v] += 1;
    }
    let mut stack: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut done = vec![false; n];
    while let Some(u) = stack.pop() {
        done[u] = true;
        for &v in &succ[u] {
            indeg[v] -= 1;
            if indeg[v] == 0 {
                stack.push(v);
            }
        }
    }
    (0..n).find(|&i| !done[i]).unwrap_or(0)
}
