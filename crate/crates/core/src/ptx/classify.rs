//! Opcode classification: maps an opcode root plus its dot-suffixes to an
//! instruction class and the functional unit that executes it.
//!
//! The mapping is data driven. A table is an ordered list of rules; the first
//! rule whose opcode list contains the root (and, if present, whose
//! `any_suffix` list shares a suffix with the instruction) wins. Opcodes that
//! no rule names are "unknown" and fall back to the table's fallback entry.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::PtxError;

/// Instruction classes the models distinguish.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InstructionClass {
    Compute,
    GlobalMemory,
    SharedMemory,
    Miscellaneous,
}

impl InstructionClass {
    pub const ALL: [InstructionClass; 4] = [
        InstructionClass::Compute,
        InstructionClass::GlobalMemory,
        InstructionClass::SharedMemory,
        InstructionClass::Miscellaneous,
    ];
}

impl fmt::Display for InstructionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            InstructionClass::Compute => "Compute",
            InstructionClass::GlobalMemory => "GlobalMemory",
            InstructionClass::SharedMemory => "SharedMemory",
            InstructionClass::Miscellaneous => "Miscellaneous",
        };
        f.write_str(s)
    }
}

/// Per-SM functional unit types.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Resource {
    /// Single-precision cores.
    SP,
    /// Special function units.
    SFU,
    /// Double-precision units.
    DPU,
    /// Load/store units.
    LSU,
    /// Warp schedulers.
    WS,
}

impl Resource {
    pub const ALL: [Resource; 5] = [
        Resource::SP,
        Resource::SFU,
        Resource::DPU,
        Resource::LSU,
        Resource::WS,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Resource::SP => "SP",
            Resource::SFU => "SFU",
            Resource::DPU => "DPU",
            Resource::LSU => "LSU",
            Resource::WS => "WS",
        }
    }
}

impl fmt::Display for Resource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Resource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Resource::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown resource type `{s}`"))
    }
}

/// Global memory direction, tracked for the load/store feature counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemoryDirection {
    Load,
    Store,
}

/// Result of classifying one opcode.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Classification {
    pub class: InstructionClass,
    pub resource: Resource,
    /// Key into the architecture latency table.
    pub latency_key: String,
    pub branch: bool,
    pub memory: Option<MemoryDirection>,
    /// False when no rule names the opcode and the fallback was used.
    pub known: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassRule {
    pub opcodes: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub any_suffix: Vec<String>,
    pub class: InstructionClass,
    pub resource: Resource,
    /// `{op}` is replaced by the opcode root.
    pub latency_key: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub branch: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory: Option<MemoryDirection>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fallback {
    pub class: InstructionClass,
    pub resource: Resource,
    pub latency_key: String,
}

/// Versioned opcode classification table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpcodeTable {
    pub schema_version: u32,
    pub fallback: Fallback,
    pub rules: Vec<ClassRule>,
}

pub const OPCODE_TABLE_VERSION: u32 = 1;

const BUILTIN_TABLE: &str = include_str!("../../data/opcodes.json");

impl OpcodeTable {
    /// The table shipped with the crate.
    pub fn builtin() -> &'static OpcodeTable {
        static TABLE: OnceLock<OpcodeTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            OpcodeTable::from_json(BUILTIN_TABLE).expect("shipped opcode table is valid")
        })
    }

    pub fn from_json(text: &str) -> Result<Self, PtxError> {
        let table: OpcodeTable =
            serde_json::from_str(text).map_err(|e| PtxError::OpcodeTable(e.to_string()))?;
        if table.schema_version != OPCODE_TABLE_VERSION {
            return Err(PtxError::OpcodeTable(format!(
                "unsupported schema_version {} (expected {OPCODE_TABLE_VERSION})",
                table.schema_version
            )));
        }
        if let Some(rule) = table.rules.iter().find(|r| r.opcodes.is_empty()) {
            return Err(PtxError::OpcodeTable(format!(
                "rule with latency key `{}` names no opcodes",
                rule.latency_key
            )));
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, PtxError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PtxError::OpcodeTable(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// All opcode roots some rule names.
    pub fn known_opcodes(&self) -> BTreeSet<&str> {
        self.rules
            .iter()
            .flat_map(|r| r.opcodes.iter().map(String::as_str))
            .collect()
    }

    /// Classifies `opcode` with the given suffixes (each including its leading dot).
    pub fn classify<S: AsRef<str>>(&self, opcode: &str, suffixes: &[S]) -> Classification {
        let rule = self.rules.iter().find(|rule| {
            rule.opcodes.iter().any(|o| o == opcode)
                && (rule.any_suffix.is_empty()
                    || suffixes
                        .iter()
                        .any(|s| rule.any_suffix.iter().any(|want| want == s.as_ref())))
        });
        match rule {
            Some(rule) => Classification {
                class: rule.class,
                resource: rule.resource,
                latency_key: rule.latency_key.replace("{op}", opcode),
                branch: rule.branch,
                memory: rule.memory,
                known: true,
            },
            None => {
                let known = self.rules.iter().any(|r| r.opcodes.iter().any(|o| o == opcode));
                Classification {
                    class: self.fallback.class,
                    resource: self.fallback.resource,
                    latency_key: self.fallback.latency_key.replace("{op}", opcode),
                    branch: false,
                    memory: None,
                    known,
                }
            }
        }
    }
}

/// Classifies against the shipped table.
pub fn classify<S: AsRef<str>>(opcode: &str, suffixes: &[S]) -> (InstructionClass, Resource) {
    let c = OpcodeTable::builtin().classify(opcode, suffixes);
    (c.class, c.resource)
}
