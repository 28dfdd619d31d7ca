//! PTX front end: statement splitting, instruction classification, basic
//! blocks, control-flow graph and per-block data-dependency graphs.

mod classify;
mod graph;
mod parse;
mod print;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use classify::{
    classify, ClassRule, Classification, Fallback, InstructionClass, MemoryDirection, OpcodeTable,
    Resource, OPCODE_TABLE_VERSION,
};
pub use graph::{build_dfg, topo_order};
pub use parse::{list_kernels, parse_ptx, parse_ptx_with, ParseOptions, UnknownOpcodePolicy};
pub use print::print_kernel;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PtxError {
    #[error("kernel `{name}` not found (available: {})", available.join(", "))]
    KernelNotFound { name: String, available: Vec<String> },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown opcode `{opcode}`")]
    UnknownOpcode { line: usize, opcode: String },
    #[error("line {line}: branch to undefined label `{label}`")]
    UnknownLabel { line: usize, label: String },
    #[error("irreducible control flow entering block `{block}`")]
    Irreducible { block: String },
    #[error("no loop headed by `{label}`")]
    NoSuchLoop { label: String },
    #[error("loop `{label}` needs an iteration count >= 1")]
    InvalidLoopCount { label: String },
    #[error("opcode table: {0}")]
    OpcodeTable(String),
}

/// One executable PTX statement.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PtxInstruction {
    /// Opcode root, e.g. `add`, `ld`, `bra`.
    pub opcode: String,
    /// Dot-suffixes in source order, each with its leading dot.
    pub suffixes: Vec<String>,
    pub class: InstructionClass,
    pub resource: Resource,
    pub latency_key: String,
    pub is_branch: bool,
    pub memory: Option<MemoryDirection>,
    pub defs: BTreeSet<String>,
    pub uses: BTreeSet<String>,
    /// Guard register, with `!` kept when negated.
    pub predicate: Option<String>,
    /// Operands as written, whitespace removed.
    pub operands: Vec<String>,
    /// 1-based source line.
    pub line: usize,
}

impl PtxInstruction {
    /// Full opcode with suffixes, e.g. `ld.global.f32`.
    pub fn mnemonic(&self) -> String {
        let mut s = self.opcode.clone();
        for suffix in &self.suffixes {
            s.push_str(suffix);
        }
        s
    }

    /// Registers read, including the guard predicate.
    pub fn reads(&self) -> impl Iterator<Item = &str> {
        self.uses.iter().map(String::as_str).chain(
            self.predicate
                .as_deref()
                .map(|p| p.trim_start_matches('!')),
        )
    }

    /// Branch target label, when this is a direct branch.
    pub fn branch_target(&self) -> Option<&str> {
        if self.is_branch {
            self.operands.first().map(String::as_str)
        } else {
            None
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasicBlock {
    pub label: Option<String>,
    pub label_line: Option<usize>,
    pub instructions: Vec<PtxInstruction>,
    /// Producer to consumer edges, as indices into `instructions`.
    pub dfg: Vec<(usize, usize)>,
    pub in_loop: bool,
}

impl BasicBlock {
    pub fn new(label: Option<String>, label_line: Option<usize>) -> Self {
        BasicBlock {
            label,
            label_line,
            instructions: Vec::new(),
            dfg: Vec::new(),
            in_loop: false,
        }
    }

    pub fn from_instructions(instructions: Vec<PtxInstruction>) -> Self {
        build_dfg(BasicBlock {
            instructions,
            ..BasicBlock::new(None, None)
        })
    }

    /// Predecessor lists over `instructions`.
    pub fn predecessors(&self) -> Vec<Vec<usize>> {
        let mut preds = vec![Vec::new(); self.instructions.len()];
        for &(u, v) in &self.dfg {
            preds[v].push(u);
        }
        preds
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    Forward,
    Back,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ControlEdge {
    pub from: usize,
    pub to: usize,
    pub kind: EdgeKind,
}

/// Natural loop: the union of the bodies of all back edges into `header`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NaturalLoop {
    pub header: usize,
    pub blocks: BTreeSet<usize>,
    /// Iterations per entry; supplied by the user.
    pub n_loop: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelGraph {
    pub name: String,
    pub blocks: Vec<BasicBlock>,
    pub edges: Vec<ControlEdge>,
    pub loops: Vec<NaturalLoop>,
    pub entry: usize,
    pub exits: Vec<usize>,
    pub warnings: Vec<String>,
}

impl KernelGraph {
    /// Display name of a block: its label, or `<bbN>`.
    pub fn block_name(&self, id: usize) -> String {
        match &self.blocks[id].label {
            Some(l) => l.clone(),
            None => format!("<bb{id}>"),
        }
    }

    pub fn instruction_count(&self) -> usize {
        self.blocks.iter().map(|b| b.instructions.len()).sum()
    }

    pub fn instructions(&self) -> impl Iterator<Item = &PtxInstruction> {
        self.blocks.iter().flat_map(|b| b.instructions.iter())
    }

    pub fn back_edges(&self) -> impl Iterator<Item = &ControlEdge> {
        self.edges.iter().filter(|e| e.kind == EdgeKind::Back)
    }

    /// Forward predecessors of every block.
    pub fn forward_predecessors(&self) -> Vec<Vec<usize>> {
        let mut preds = vec![Vec::new(); self.blocks.len()];
        for e in self.edges.iter().filter(|e| e.kind == EdgeKind::Forward) {
            preds[e.to].push(e.from);
        }
        preds
    }

    /// Blocks in topological order over forward edges.
    pub fn block_order(&self) -> Vec<usize> {
        let edges: Vec<(usize, usize)> = self
            .edges
            .iter()
            .filter(|e| e.kind == EdgeKind::Forward)
            .map(|e| (e.from, e.to))
            .collect();
        topo_order(self.blocks.len(), &edges).expect("forward CFG is acyclic by construction")
    }

    /// Sets the iteration count of the loop headed by `label`.
    pub fn set_loop_count(&mut self, label: &str, n_loop: u64) -> Result<(), PtxError> {
        if n_loop == 0 {
            return Err(PtxError::InvalidLoopCount {
                label: label.to_string(),
            });
        }
        let idx = self
            .loops
            .iter()
            .position(|l| self.block_name(l.header) == label)
            .ok_or_else(|| PtxError::NoSuchLoop {
                label: label.to_string(),
            })?;
        self.loops[idx].n_loop = Some(n_loop);
        Ok(())
    }

    /// Product of iteration counts over the loops containing each block.
    /// `None` for a block inside a loop with no count.
    pub fn loop_multipliers(&self) -> Vec<Option<u64>> {
        let mut mult = vec![Some(1u64); self.blocks.len()];
        for l in &self.loops {
            for &b in &l.blocks {
                mult[b] = match (mult[b], l.n_loop) {
                    (Some(m), Some(n)) => Some(m.saturating_mul(n)),
                    _ => None,
                };
            }
        }
        mult
    }

    /// Loop header labels that still lack an iteration count.
    pub fn unannotated_loops(&self) -> Vec<String> {
        self.loops
            .iter()
            .filter(|l| l.n_loop.is_none())
            .map(|l| self.block_name(l.header))
            .collect()
    }

    /// Static instruction count per class.
    pub fn class_counts(&self) -> [usize; 4] {
        let mut counts = [0usize; 4];
        for inst in self.instructions() {
            let idx = InstructionClass::ALL
                .iter()
                .position(|c| *c == inst.class)
                .expect("class is one of four");
            counts[idx] += 1;
        }
        counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LOOP: &str = r#"
.visible .entry k(.param .u32 n)
{
    .reg .b32 %r<4>;
    mov.u32 %r1, 0;
L1:
    add.s32 %r1, %r1, 1;
    setp.lt.s32 %p1, %r1, 10;
    @%p1 bra L1;
    ret;
}
"#;

    #[test]
    fn single_instruction_statement() {
        let src = ".entry k() { add.s32 %r1,%r2,%r3; }";
        let g = parse_ptx(src, "k").unwrap();
        let inst = &g.blocks[0].instructions[0];
        assert_eq!(inst.class, InstructionClass::Compute);
        assert_eq!(inst.resource, Resource::SP);
        assert_eq!(inst.defs, BTreeSet::from(["%r1".to_string()]));
        assert_eq!(
            inst.uses,
            BTreeSet::from(["%r2".to_string(), "%r3".to_string()])
        );
    }

    #[test]
    fn global_load_statement() {
        let src = ".entry k() { ld.global.f32 %f1,[%rd4]; }";
        let g = parse_ptx(src, "k").unwrap();
        let inst = &g.blocks[0].instructions[0];
        assert_eq!(inst.class, InstructionClass::GlobalMemory);
        assert_eq!(inst.resource, Resource::LSU);
        assert_eq!(inst.defs, BTreeSet::from(["%f1".to_string()]));
        assert_eq!(inst.uses, BTreeSet::from(["%rd4".to_string()]));
    }

    #[test]
    fn self_loop_gives_one_back_edge() {
        let g = parse_ptx(LOOP, "k").unwrap();
        let back: Vec<_> = g.back_edges().collect();
        assert_eq!(back.len(), 1);
        assert_eq!(g.block_name(back[0].to), "L1");
        assert_eq!(back[0].from, back[0].to);
        assert_eq!(g.loops.len(), 1);
        assert!(g.blocks[back[0].to].in_loop);
    }

    #[test]
    fn loop_count_annotation() {
        let mut g = parse_ptx(LOOP, "k").unwrap();
        assert_eq!(g.unannotated_loops(), vec!["L1".to_string()]);
        assert!(g.set_loop_count("L1", 0).is_err());
        assert!(g.set_loop_count("L9", 3).is_err());
        g.set_loop_count("L1", 5).unwrap();
        let mult = g.loop_multipliers();
        let header = g.loops[0].header;
        assert_eq!(mult[header], Some(5));
        assert_eq!(mult[0], Some(1));
    }

    #[test]
    fn class_counts_sum_to_total() {
        let g = parse_ptx(LOOP, "k").unwrap();
        assert_eq!(g.class_counts().iter().sum::<usize>(), g.instruction_count());
    }
}
