use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

use serde::Serialize;

use crate::arch::ArchProfile;
use crate::ptx::{InstructionClass, KernelGraph};
use crate::Scalar;

use super::block::{schedule_block, BlockSchedule};
use super::penalty::{cm_penalty, gm_penalty, sm_penalty};
use super::trace::TraceRow;
use super::{LaunchConfig, SchedError, ScheduleMode};

/// How the scheduled threads of one SM split into waves.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WavePlan {
    /// `ceil(nB / nSM) * nT_b`.
    pub threads_scheduled: u64,
    /// Threads one wave can hold.
    pub cap: u64,
    /// Which limit set `cap`.
    pub limit: String,
    /// Threads in each wave.
    pub waves: Vec<u64>,
}

impl WavePlan {
    pub fn count(&self) -> u64 {
        self.waves.len() as u64
    }
}

/// Splits the per-SM thread load into waves bounded by the thread, register,
/// shared-memory and block-count limits, each rounded down to whole blocks.
pub fn wave_plan<T: Scalar>(p: &ArchProfile<T>, lc: &LaunchConfig) -> Result<WavePlan, SchedError> {
    lc.validate(p)?;
    let a = &p.attributes;
    let nt = lc.threads_per_block;
    let threads_scheduled = lc.n_blocks.div_ceil(a.sm_count as u64) * nt;

    let mut limits: Vec<(&str, u64)> = vec![
        ("thread limit", (a.max_threads_per_sm as u64 / nt) * nt),
        ("block limit", a.max_blocks_per_sm as u64 * nt),
    ];
    if lc.regs_per_thread > 0 {
        let per_block = lc.regs_per_thread as u64 * nt;
        limits.push(("register limit", (a.max_registers_per_block as u64 / per_block) * nt));
    }
    if let Some(blocks) = (a.max_shared_bytes_per_block as u64).checked_div(lc.shared_bytes_per_block) {
        limits.push(("shared memory limit", blocks * nt));
    }
    let (limit, cap) = limits
        .into_iter()
        .min_by_key(|&(_, c)| c)
        .expect("at least two limits");
    if cap < nt {
        return Err(SchedError::Unschedulable {
            limit: limit.to_string(),
            cap,
            threads_per_block: nt,
        });
    }

    let mut waves = Vec::new();
    let mut remaining = threads_scheduled;
    while remaining > 0 {
        let n = remaining.min(cap);
        waves.push(n);
        remaining -= n;
    }
    Ok(WavePlan {
        threads_scheduled,
        cap,
        limit: limit.to_string(),
        waves,
    })
}

/// Per-block iteration multipliers. Counts in `lc` override the graph's.
pub fn loop_multipliers(k: &KernelGraph, lc: &LaunchConfig) -> Result<Vec<u64>, SchedError> {
    let headers: BTreeMap<String, usize> = k
        .loops
        .iter()
        .enumerate()
        .map(|(i, l)| (k.block_name(l.header), i))
        .collect();
    if let Some(label) = lc.loops.keys().find(|l| !headers.contains_key(*l)) {
        return Err(SchedError::UnknownLoop {
            label: label.clone(),
        });
    }
    let mut mult = vec![1u64; k.blocks.len()];
    for l in &k.loops {
        let label = k.block_name(l.header);
        let n = lc
            .loops
            .get(&label)
            .copied()
            .or(l.n_loop)
            .ok_or_else(|| SchedError::MissingLoopCount {
                label: label.clone(),
            })?;
        if n == 0 {
            return Err(SchedError::InvalidLaunch(format!(
                "loop `{label}` needs an iteration count >= 1"
            )));
        }
        for &b in &l.blocks {
            mult[b] = mult[b].saturating_mul(n);
        }
    }
    Ok(mult)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CfgSchedule<T> {
    pub delay: T,
    pub block_start: Vec<T>,
    pub block_finish: Vec<T>,
    pub blocks: Vec<BlockSchedule<T>>,
    pub multipliers: Vec<u64>,
}

/// Longest-path composition of block delays over the forward CFG. A block's
/// delay counts once per iteration of every loop containing it.
pub fn schedule_cfg<T: Scalar>(
    p: &ArchProfile<T>,
    k: &KernelGraph,
    n_tw: u64,
    lc: &LaunchConfig,
    mode: ScheduleMode,
) -> Result<CfgSchedule<T>, SchedError> {
    let multipliers = loop_multipliers(k, lc)?;
    let blocks: Vec<BlockSchedule<T>> = k
        .blocks
        .iter()
        .map(|b| schedule_block(p, b, n_tw, lc, mode))
        .collect();
    let preds = k.forward_predecessors();
    let n = k.blocks.len();
    let mut block_start = vec![T::zero(); n];
    let mut block_finish = vec![T::zero(); n];
    for b in k.block_order() {
        let start = preds[b]
            .iter()
            .map(|&u| block_finish[u])
            .fold(T::zero(), T::max);
        block_start[b] = start;
        block_finish[b] = start + blocks[b].delay * T::from_count(multipliers[b]);
    }
    let exits: Vec<usize> = if k.exits.is_empty() {
        (0..n).collect()
    } else {
        k.exits.clone()
    };
    let delay = exits
        .iter()
        .map(|&b| block_finish[b])
        .fold(T::zero(), T::max);
    Ok(CfgSchedule {
        delay,
        block_start,
        block_finish,
        blocks,
        multipliers,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct PenaltyBreakdown<T> {
    pub launch_overhead_us: T,
    pub launch_overhead_cycles: T,
    pub gm_penalty: T,
    pub sm_penalty: T,
    pub cm_penalty: T,
    /// Set when a throughput model fell below the profile floor.
    pub throughput_clamped: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct ScheduleResult<T> {
    pub d_kernel: T,
    pub waves: u64,
    pub wave_plan: WavePlan,
    /// Global memory instructions over all waves, loops expanded.
    pub n_gm: u64,
    /// Shared memory instructions over all waves, loops expanded.
    pub n_shm: u64,
    /// Start cycles per block and instruction for the first wave.
    pub sch: Vec<Vec<T>>,
    pub penalties: PenaltyBreakdown<T>,
    pub d_total: T,
    pub t_kernel_us: T,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

/// Full execution-time prediction for one launch.
pub fn schedule_kernel<T: Scalar>(
    p: &ArchProfile<T>,
    k: &KernelGraph,
    lc: &LaunchConfig,
    mode: ScheduleMode,
) -> Result<ScheduleResult<T>, SchedError> {
    let plan = wave_plan(p, lc)?;
    let mut cache: BTreeMap<u64, CfgSchedule<T>> = BTreeMap::new();
    let mut d_kernel = T::zero();
    let mut trace = Vec::new();
    let mut wave_offset = T::zero();
    for (w, &n_tw) in plan.waves.iter().enumerate() {
        if let Entry::Vacant(slot) = cache.entry(n_tw) {
            slot.insert(schedule_cfg(p, k, n_tw, lc, mode)?);
        }
        let cfg = &cache[&n_tw];
        for (b, bs) in cfg.blocks.iter().enumerate() {
            for (i, (&s, &d)) in bs.sch.iter().zip(&bs.durations).enumerate() {
                let inst = &k.blocks[b].instructions[i];
                trace.push(TraceRow {
                    node: format!("w{w}/{}/{i}:{}", k.block_name(b), inst.mnemonic()),
                    resource: inst.resource,
                    start: (wave_offset + cfg.block_start[b] + s).to_f64_lossy(),
                    duration: d.to_f64_lossy(),
                });
            }
        }
        d_kernel += cfg.delay;
        wave_offset += cfg.delay;
    }

    let multipliers = loop_multipliers(k, lc)?;
    let per_wave = |class: InstructionClass| -> u64 {
        k.blocks
            .iter()
            .zip(&multipliers)
            .map(|(b, &m)| b.instructions.iter().filter(|i| i.class == class).count() as u64 * m)
            .sum()
    };
    let waves = plan.count();
    let n_gm = per_wave(InstructionClass::GlobalMemory) * waves;
    let n_shm = per_wave(InstructionClass::SharedMemory) * waves;

    let gm = gm_penalty(p, lc, T::from_count(n_gm));
    let sm = sm_penalty(p, lc, T::from_count(n_shm));
    let cm = cm_penalty(p, lc, T::from_count(n_gm), waves);
    let lo_us = p.launch_overhead_us(lc.n_blocks, lc.threads_per_block);
    let lo_cycles = p.cycles_from_us(lo_us);
    let d_total = d_kernel + lo_cycles + gm.cycles + sm.cycles + cm;
    let first = plan
        .waves
        .first()
        .and_then(|n| cache.get(n))
        .map(|c| c.blocks.iter().map(|b| b.sch.clone()).collect())
        .unwrap_or_default();

    Ok(ScheduleResult {
        d_kernel,
        waves,
        wave_plan: plan,
        n_gm,
        n_shm,
        sch: first,
        penalties: PenaltyBreakdown {
            launch_overhead_us: lo_us,
            launch_overhead_cycles: lo_cycles,
            gm_penalty: gm.cycles,
            sm_penalty: sm.cycles,
            cm_penalty: cm,
            throughput_clamped: gm.throughput_clamped || sm.throughput_clamped,
        },
        d_total,
        t_kernel_us: p.us_from_cycles(d_total),
        trace,
    })
}
