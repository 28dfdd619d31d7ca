use crate::arch::ArchProfile;
use crate::ptx::{InstructionClass, KernelGraph, MemoryDirection};
use crate::sched::{cm_penalty, gm_penalty, loop_multipliers, sm_penalty, wave_plan, LaunchConfig};
use crate::Scalar;

use super::{Feature, FeatureVector, PfeaError};

/// `(total_threads / (nWS * Sz_w)) * (total_inst / nDU)`.
pub fn inst_issue_cycles<T: Scalar>(p: &ArchProfile<T>, total_threads: T, total_inst: T) -> T {
    let a = &p.attributes;
    let warp_batches = total_threads / T::from_count(a.warp_schedulers as u64 * a.warp_size as u64);
    warp_batches * (total_inst / T::from_count(a.dispatch_units as u64))
}

/// Theoretical occupancy: resident warps over `wSM^M`, with the resident
/// block count limited by warps, threads, blocks, registers and shared
/// memory per SM.
pub fn theoretical_occupancy<T: Scalar>(
    p: &ArchProfile<T>,
    block_size: u64,
    reg_thread: u32,
    shmem_block: u64,
) -> Result<T, PfeaError> {
    let a = &p.attributes;
    if block_size == 0 || block_size > a.max_threads_per_sm as u64 {
        return Err(PfeaError::BlockSize {
            block_size,
            max: a.max_threads_per_sm as u64,
        });
    }
    let warps_per_block = block_size.div_ceil(a.warp_size as u64);
    let mut blocks = (a.max_warps_per_sm as u64 / warps_per_block)
        .min(a.max_threads_per_sm as u64 / block_size)
        .min(a.max_blocks_per_sm as u64);
    if reg_thread > 0 {
        blocks = blocks.min(a.max_registers_per_block as u64 / (reg_thread as u64 * block_size));
    }
    if let Some(cap) = (a.max_shared_bytes_per_block as u64).checked_div(shmem_block) {
        blocks = blocks.min(cap);
    }
    if blocks == 0 {
        return Err(PfeaError::NoResidentBlock);
    }
    Ok(T::from_count(blocks * warps_per_block) / T::from_count(a.max_warps_per_sm as u64))
}

fn class_slot(c: InstructionClass) -> usize {
    InstructionClass::ALL
        .iter()
        .position(|&x| x == c)
        .expect("class is one of four")
}

/// Feature vector of one launch. Each wave replays the CFG once; blocks
/// inside loops contribute their count times the loop iterations.
pub fn extract_features<T: Scalar>(
    p: &ArchProfile<T>,
    k: &KernelGraph,
    lc: &LaunchConfig,
) -> Result<FeatureVector<T>, PfeaError> {
    let plan = wave_plan(p, lc)?;
    let mult = loop_multipliers(k, lc)?;
    let waves = plan.count();

    // one CFG traversal
    let mut count = [0u64; 4];
    let mut latency = [T::zero(); 4];
    let (mut branch, mut loads, mut stores) = (0u64, 0u64, 0u64);
    for (block, &m) in k.blocks.iter().zip(&mult) {
        for inst in &block.instructions {
            let c = class_slot(inst.class);
            count[c] += m;
            latency[c] += p.instruction_latency(inst, lc.n_blocks, lc.threads_per_block)
                * T::from_count(m);
            if inst.is_branch {
                branch += m;
            }
            if inst.class == InstructionClass::GlobalMemory {
                match inst.memory {
                    Some(MemoryDirection::Load) => loads += m,
                    Some(MemoryDirection::Store) => stores += m,
                    None => {}
                }
            }
        }
    }

    let w = T::from_count(waves);
    let n = |v: u64| T::from_count(v);
    let inst_sm: Vec<T> = count.iter().map(|&c| n(c) * w).collect();
    let lat_sm: Vec<T> = latency.iter().map(|&l| l * w).collect();
    let avg = |i: usize| {
        if inst_sm[i] > T::zero() {
            lat_sm[i] / inst_sm[i]
        } else {
            T::zero()
        }
    };
    let kernel = k.class_counts();
    let [comp, glob, shar, misc] = [0, 1, 2, 3];

    let mut f = FeatureVector::default();
    f.set(Feature::AvgCompLat, avg(comp));
    f.set(Feature::AvgGlobLat, avg(glob));
    f.set(Feature::AvgMiscLat, avg(misc));
    f.set(Feature::AvgSharLat, avg(shar));
    f.set(Feature::Branch, n(branch) * w);
    f.set(Feature::CompInstKernel, n(kernel[comp] as u64));
    f.set(Feature::CompInstSm, inst_sm[comp]);
    f.set(Feature::CompLatSm, lat_sm[comp]);
    f.set(Feature::GlobInstKernel, n(kernel[glob] as u64));
    f.set(Feature::GlobInstSm, inst_sm[glob]);
    f.set(Feature::GlobLatSm, lat_sm[glob]);
    f.set(Feature::GlobLoadSm, n(loads) * w);
    f.set(Feature::GlobStoreSm, n(stores) * w);
    f.set(Feature::MiscInstKernel, n(kernel[misc] as u64));
    f.set(Feature::MiscInstSm, inst_sm[misc]);
    f.set(Feature::MiscLatSm, lat_sm[misc]);
    f.set(Feature::SharInstKernel, n(kernel[shar] as u64));
    f.set(Feature::SharInstSm, inst_sm[shar]);
    f.set(Feature::SharLatSm, lat_sm[shar]);
    f.set(Feature::SmActive, n(lc.n_blocks.min(p.attributes.sm_count as u64)));
    let first_wave = plan.waves.first().copied().unwrap_or(0);
    f.set(Feature::NWarps, n(first_wave.div_ceil(p.attributes.warp_size as u64)));
    f.set(Feature::Waves, w);
    let total_threads = n(lc.total_threads());
    f.set(Feature::TotalThreads, total_threads);
    let total_inst = inst_sm.iter().copied().sum::<T>();
    f.set(Feature::InstIssueCycles, inst_issue_cycles(p, total_threads, total_inst));
    f.set(Feature::CachePenalty, cm_penalty(p, lc, inst_sm[glob], waves));
    f.set(Feature::GlbPenalty, gm_penalty(p, lc, inst_sm[glob]).cycles);
    f.set(Feature::ShPenalty, sm_penalty(p, lc, inst_sm[shar]).cycles);
    f.set(
        Feature::Occupancy,
        theoretical_occupancy(p, lc.threads_per_block, lc.regs_per_thread, lc.shared_bytes_per_block)?,
    );
    f.set(Feature::RegThread, n(lc.regs_per_thread as u64));
    f.set(Feature::ShmemBlock, n(lc.shared_bytes_per_block));
    f.set(Feature::BlockSize, n(lc.threads_per_block));
    f.set(Feature::GridSize, n(lc.n_blocks));
    Ok(f)
}
