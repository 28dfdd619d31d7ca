//! Abstract GPU description: functional-unit counts, device attributes,
//! measured latencies and the fitted empirical sub-models.

mod builtin;
mod models;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ptx::{InstructionClass, PtxInstruction, Resource};
use crate::Scalar;

pub use builtin::{builtin_names, builtin_profile, builtin_profile_json, PROFILE_SCHEMA};
pub use models::{ExpGrowthModel, LinearOverheadModel, LinearSegment, PiecewiseLinearModel};

pub const PROFILE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("profile field `{field}`: {message}")]
    Schema { field: String, message: String },
    #[error("unknown built-in profile `{0}`")]
    UnknownBuiltin(String),
}

fn schema_err(field: impl Into<String>, message: impl Into<String>) -> ProfileError {
    ProfileError::Schema {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceCounts {
    #[serde(rename = "SP")]
    pub sp: u32,
    #[serde(rename = "SFU")]
    pub sfu: u32,
    #[serde(rename = "DPU")]
    pub dpu: u32,
    #[serde(rename = "LSU")]
    pub lsu: u32,
    #[serde(rename = "WS")]
    pub ws: u32,
}

impl ResourceCounts {
    pub fn get(&self, r: Resource) -> u32 {
        match r {
            Resource::SP => self.sp,
            Resource::SFU => self.sfu,
            Resource::DPU => self.dpu,
            Resource::LSU => self.lsu,
            Resource::WS => self.ws,
        }
    }
}

fn default_access_size() -> u32 {
    4
}
fn default_transaction() -> u32 {
    128
}
fn default_warp_size() -> u32 {
    32
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Attributes<T> {
    /// Bytes moved per memory instruction.
    #[serde(default = "default_access_size")]
    pub access_size_bytes: u32,
    /// Bytes per global memory transaction.
    #[serde(default = "default_transaction")]
    pub global_transaction_bytes: u32,
    pub sm_count: u32,
    pub max_threads_per_sm: u32,
    pub l2_bytes: u64,
    pub gpu_clock_mhz: T,
    pub mem_clock_mhz: T,
    pub max_registers_per_block: u32,
    pub max_shared_bytes_per_block: u32,
    pub max_blocks_per_sm: u32,
    pub max_warps_per_sm: u32,
    #[serde(default = "default_warp_size")]
    pub warp_size: u32,
    pub warp_schedulers: u32,
    pub dispatch_units: u32,
    /// Peak memory bandwidth in GB/s.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_gbps: Option<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ClassDefaults<T> {
    pub compute: T,
    pub global_memory: T,
    pub shared_memory: T,
    pub miscellaneous: T,
}

impl<T: Scalar> ClassDefaults<T> {
    pub fn get(&self, c: InstructionClass) -> T {
        match c {
            InstructionClass::Compute => self.compute,
            InstructionClass::GlobalMemory => self.global_memory,
            InstructionClass::SharedMemory => self.shared_memory,
            InstructionClass::Miscellaneous => self.miscellaneous,
        }
    }
}

fn one<T: Scalar>() -> T {
    T::one()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LatencyTable<T> {
    /// Extra cycles per additional batch of threads on a unit.
    #[serde(default = "one")]
    pub pipeline: T,
    /// Cycles per latency key (see the opcode table).
    pub table: BTreeMap<String, T>,
    /// Used for keys missing from `table`.
    pub defaults: ClassDefaults<T>,
}

fn default_floor<T: Scalar>() -> T {
    T::lit(1e-6)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ThroughputModels<T> {
    pub global: ExpGrowthModel<T>,
    pub shared: ExpGrowthModel<T>,
    /// Free-form description of the throughput units.
    #[serde(default)]
    pub units: String,
    /// Lower clamp applied to model values.
    #[serde(default = "default_floor")]
    pub floor: T,
    /// Measured instruction throughput at ILP 1, 2 and 3.
    #[serde(default)]
    pub instructions: BTreeMap<String, [Option<T>; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PenaltyModels<T> {
    pub launch_overhead: LinearOverheadModel<T>,
    pub global_latency: PiecewiseLinearModel<T>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchedulerConfig {
    /// Idle cycles a unit keeps after each reservation.
    #[serde(default)]
    pub issue_gap: BTreeMap<Resource, u32>,
}

impl SchedulerConfig {
    pub fn gap(&self, r: Resource) -> u32 {
        self.issue_gap.get(&r).copied().unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ArchProfile<T> {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub architecture: String,
    #[serde(default)]
    pub compute_capability: String,
    pub resources: ResourceCounts,
    pub attributes: Attributes<T>,
    pub latencies: LatencyTable<T>,
    pub throughput_models: ThroughputModels<T>,
    /// Warps needed for peak throughput at ILP 1, 2 and 3.
    #[serde(default)]
    pub peakwarps: BTreeMap<String, [Option<u32>; 3]>,
    pub penalty_models: PenaltyModels<T>,
    #[serde(default)]
    pub scheduler: SchedulerConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Memory space for throughput lookups.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemorySpace {
    Global,
    Shared,
}

/// A throughput value, possibly raised to the profile floor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Throughput<T> {
    pub value: T,
    pub clamped: bool,
}

pub fn load_profile<T: Scalar>(path: &Path) -> Result<ArchProfile<T>, ProfileError> {
    let text = std::fs::read_to_string(path).map_err(|source| ProfileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ArchProfile::from_json(&text)
}

impl<T: Scalar> ArchProfile<T> {
    pub fn from_json(text: &str) -> Result<Self, ProfileError> {
        let mut de = serde_json::Deserializer::from_str(text);
        let profile: ArchProfile<T> = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let field = e.path().to_string();
            schema_err(field, e.into_inner().to_string())
        })?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("profile serializes");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        if self.schema_version != PROFILE_SCHEMA_VERSION {
            return Err(schema_err(
                "schema_version",
                format!("expected {PROFILE_SCHEMA_VERSION}, got {}", self.schema_version),
            ));
        }
        if self.name.trim().is_empty() {
            return Err(schema_err("name", "must not be empty"));
        }
        for r in Resource::ALL {
            if self.resources.get(r) == 0 {
                return Err(schema_err(format!("resources.{r}"), "must be >= 1"));
            }
        }
        let a = &self.attributes;
        let counts = [
            ("access_size_bytes", a.access_size_bytes as u64),
            ("global_transaction_bytes", a.global_transaction_bytes as u64),
            ("sm_count", a.sm_count as u64),
            ("max_threads_per_sm", a.max_threads_per_sm as u64),
            ("l2_bytes", a.l2_bytes),
            ("max_registers_per_block", a.max_registers_per_block as u64),
            ("max_shared_bytes_per_block", a.max_shared_bytes_per_block as u64),
            ("max_blocks_per_sm", a.max_blocks_per_sm as u64),
            ("max_warps_per_sm", a.max_warps_per_sm as u64),
            ("warp_size", a.warp_size as u64),
            ("warp_schedulers", a.warp_schedulers as u64),
            ("dispatch_units", a.dispatch_units as u64),
        ];
        for (field, v) in counts {
            if v == 0 {
                return Err(schema_err(format!("attributes.{field}"), "must be >= 1"));
            }
        }
        let positive = |field: &str, v: T| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(schema_err(field, format!("must be positive, got {v}")))
            }
        };
        positive("attributes.gpu_clock_mhz", a.gpu_clock_mhz)?;
        positive("attributes.mem_clock_mhz", a.mem_clock_mhz)?;
        if let Some(bw) = a.bandwidth_gbps {
            positive("attributes.bandwidth_gbps", bw)?;
        }

        let l = &self.latencies;
        let nonneg = |field: String, v: T| {
            if v >= T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(schema_err(field, format!("must be a finite value >= 0, got {v}")))
            }
        };
        nonneg("latencies.pipeline".into(), l.pipeline)?;
        for (k, &v) in &l.table {
            nonneg(format!("latencies.table.{k}"), v)?;
        }
        for c in InstructionClass::ALL {
            nonneg(format!("latencies.defaults.{c}"), l.defaults.get(c))?;
        }

        let tp = &self.throughput_models;
        tp.global
            .check()
            .map_err(|m| schema_err("throughput_models.global", m))?;
        tp.shared
            .check()
            .map_err(|m| schema_err("throughput_models.shared", m))?;
        positive("throughput_models.floor", tp.floor)?;

        let pm = &self.penalty_models;
        pm.launch_overhead
            .check()
            .map_err(|m| schema_err("penalty_models.launch_overhead", m))?;
        pm.global_latency
            .check()
            .map_err(|m| schema_err("penalty_models.global_latency", m))?;
        Ok(())
    }

    pub fn resource_count(&self, r: Resource) -> u32 {
        self.resources.get(r)
    }

    /// Microseconds to GPU cycles.
    pub fn cycles_from_us(&self, us: T) -> T {
        us * self.attributes.gpu_clock_mhz
    }

    /// GPU cycles to microseconds.
    pub fn us_from_cycles(&self, cycles: T) -> T {
        cycles / self.attributes.gpu_clock_mhz
    }

    /// Global load/store latency at stride `nB * nT_b`.
    pub fn global_mem_latency(&self, n_blocks: u64, threads_per_block: u64) -> T {
        let stride = T::from_count(n_blocks.saturating_mul(threads_per_block));
        self.penalty_models.global_latency.eval(stride)
    }

    pub fn launch_overhead_us(&self, n_blocks: u64, threads_per_block: u64) -> T {
        let x = T::from_count(n_blocks.saturating_mul(threads_per_block));
        self.penalty_models.launch_overhead.eval(x)
    }

    /// Model throughput at `n_trans` transactions, clamped to the floor.
    pub fn mem_throughput(&self, space: MemorySpace, n_trans: T) -> Throughput<T> {
        let tp = &self.throughput_models;
        let model = match space {
            MemorySpace::Global => &tp.global,
            MemorySpace::Shared => &tp.shared,
        };
        let v = model.eval(n_trans);
        if v > tp.floor {
            Throughput {
                value: v,
                clamped: false,
            }
        } else {
            Throughput {
                value: tp.floor,
                clamped: true,
            }
        }
    }

    /// Latency for a latency key and class, for a given launch stride.
    /// Lookup order: explicit table entry, then the global model for global
    /// accesses, then the class default.
    pub fn latency_for(
        &self,
        key: &str,
        class: InstructionClass,
        n_blocks: u64,
        threads_per_block: u64,
    ) -> T {
        if let Some(&v) = self.latencies.table.get(key) {
            return v;
        }
        if class == InstructionClass::GlobalMemory {
            return self.global_mem_latency(n_blocks, threads_per_block);
        }
        self.latencies.defaults.get(class)
    }

    pub fn instruction_latency(
        &self,
        inst: &PtxInstruction,
        n_blocks: u64,
        threads_per_block: u64,
    ) -> T {
        self.latency_for(&inst.latency_key, inst.class, n_blocks, threads_per_block)
    }

    /// Same profile with every float converted to another scalar type.
    pub fn cast<U: Scalar>(&self) -> ArchProfile<U> {
        let j = serde_json::to_value(self).expect("profile serializes");
        serde_json::from_value(j).expect("profile shapes are scalar independent")
    }
}
