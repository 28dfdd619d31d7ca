use std::fmt::Write;

use super::{KernelGraph, PtxInstruction};

/// Renders the kernel as PTX. Statements are placed on their original source
/// lines, so parsing the output reproduces the same graph.
pub fn print_kernel(g: &KernelGraph) -> String {
    let mut out = format!(".entry {}() {{", g.name);
    let mut line = 1usize;
    for block in &g.blocks {
        if let Some(label) = &block.label {
            place(&mut out, &mut line, block.label_line.unwrap_or(0));
            let _ = write!(out, "{label}:");
        }
        for inst in &block.instructions {
            place(&mut out, &mut line, inst.line);
            out.push_str(&render(inst));
        }
    }
    out.push_str("\n}\n");
    out
}

fn place(out: &mut String, line: &mut usize, target: usize) {
    while *line < target {
        out.push('\n');
        *line += 1;
    }
    out.push(' ');
}

fn render(inst: &PtxInstruction) -> String {
    let mut s = String::new();
    if let Some(p) = &inst.predicate {
        let _ = write!(s, "@{p} ");
    }
    s.push_str(&inst.mnemonic());
    if !inst.operands.is_empty() {
        s.push(' ');
        s.push_str(&inst.operands.join(", "));
    }
    s.push(';');
    s
}
