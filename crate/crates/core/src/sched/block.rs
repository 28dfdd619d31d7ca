use crate::arch::ArchProfile;
use crate::ptx::{topo_order, BasicBlock, Resource};
use crate::Scalar;

use super::reservation::ReservationTable;
use super::{LaunchConfig, ScheduleMode};

/// One node of a dependency DAG to be list-scheduled.
#[derive(Clone, Debug, PartialEq)]
pub struct DagNode<T> {
    pub resource: Resource,
    /// Cycles the node occupies its unit, batches included.
    pub duration: T,
    pub preds: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DagSchedule<T> {
    /// Start cycle per node.
    pub start: Vec<T>,
    /// Nodes in the order they were placed.
    pub order: Vec<usize>,
    /// Latest finish over all nodes.
    pub makespan: T,
}

/// Greedy list scheduling: nodes in topological order (smallest index first
/// among ready nodes), each placed at the earliest free span of its unit at or
/// after its ready time. `gap` adds idle cycles to every reservation on a unit
/// without delaying the node's successors.
///
/// Panics if the predecessor lists contain a cycle.
pub fn schedule_dag<T: Scalar>(nodes: &[DagNode<T>], gap: impl Fn(Resource) -> T) -> DagSchedule<T> {
    let edges: Vec<(usize, usize)> = nodes
        .iter()
        .enumerate()
        .flat_map(|(v, n)| n.preds.iter().map(move |&u| (u, v)))
        .collect();
    let order = topo_order(nodes.len(), &edges).expect("dependency graph is acyclic");
    let mut table = ReservationTable::new();
    let mut start = vec![T::zero(); nodes.len()];
    let mut makespan = T::zero();
    for &v in &order {
        let node = &nodes[v];
        let ready = node
            .preds
            .iter()
            .map(|&u| start[u] + nodes[u].duration)
            .fold(T::zero(), T::max);
        let span = node.duration + gap(node.resource);
        let t1 = table.earliest_fit(node.resource, ready, span);
        table.reserve(node.resource, t1, span);
        start[v] = t1;
        makespan = makespan.max(t1 + node.duration);
    }
    DagSchedule {
        start,
        order,
        makespan,
    }
}

/// Cycles one instruction holds its unit: latency plus one pipeline step per
/// extra batch of `n_tw` threads.
pub fn batched_duration<T: Scalar>(p: &ArchProfile<T>, latency: T, resource: Resource, n_tw: u64) -> T {
    let units = p.resource_count(resource) as u64;
    let batches = n_tw.div_ceil(units).max(1);
    latency + p.latencies.pipeline * T::from_count(batches - 1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockSchedule<T> {
    pub delay: T,
    /// Start cycle per instruction.
    pub sch: Vec<T>,
    pub durations: Vec<T>,
}

/// Schedules one basic block's DFG for a wave of `n_tw` threads.
pub fn schedule_block<T: Scalar>(
    p: &ArchProfile<T>,
    block: &BasicBlock,
    n_tw: u64,
    lc: &LaunchConfig,
    mode: ScheduleMode,
) -> BlockSchedule<T> {
    let preds = block.predecessors();
    let nodes: Vec<DagNode<T>> = block
        .instructions
        .iter()
        .zip(preds)
        .map(|(inst, preds)| {
            let lat = p.instruction_latency(inst, lc.n_blocks, lc.threads_per_block);
            DagNode {
                resource: inst.resource,
                duration: batched_duration(p, lat, inst.resource, n_tw),
                preds,
            }
        })
        .collect();
    let s = schedule_dag(&nodes, |r| match mode {
        ScheduleMode::Profile => T::from_count(p.scheduler.gap(r) as u64),
        ScheduleMode::Strict => T::zero(),
    });
    BlockSchedule {
        delay: s.makespan,
        sch: s.start,
        durations: nodes.into_iter().map(|n| n.duration).collect(),
    }
}
