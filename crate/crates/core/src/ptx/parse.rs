use std::collections::{BTreeMap, BTreeSet};

use super::graph::{build_dfg, finish_graph};
use super::{BasicBlock, KernelGraph, OpcodeTable, PtxError, PtxInstruction};

/// What to do with opcodes the table does not name.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum UnknownOpcodePolicy {
    Reject,
    /// Classify with the table fallback and record a warning.
    #[default]
    Miscellaneous,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ParseOptions<'a> {
    pub unknown_opcodes: UnknownOpcodePolicy,
    /// Defaults to the shipped table.
    pub table: Option<&'a OpcodeTable>,
}

/// Opcodes that never write a register operand.
const NO_DEST: &[&str] = &[
    "st", "bra", "brx", "bar", "barrier", "membar", "fence", "ret", "exit", "trap", "red",
    "prefetch", "prefetchu", "sust", "sured", "pmevent", "nanosleep", "brkpt", "cp",
    "griddepcontrol",
];

pub fn parse_ptx(text: &str, kernel_name: &str) -> Result<KernelGraph, PtxError> {
    parse_ptx_with(text, kernel_name, ParseOptions::default())
}

/// Names of every `.entry` in the module, in source order.
pub fn list_kernels(text: &str) -> Vec<String> {
    let clean = strip_comments(text);
    entries(&clean).into_iter().map(|(name, _)| name).collect()
}

pub fn parse_ptx_with(
    text: &str,
    kernel_name: &str,
    opts: ParseOptions<'_>,
) -> Result<KernelGraph, PtxError> {
    let table = opts.table.unwrap_or_else(|| OpcodeTable::builtin());
    let clean = strip_comments(text);
    let found = entries(&clean);
    let mangled_prefix = format!("_Z{}{}", kernel_name.len(), kernel_name);
    let (name, after_name) = found
        .iter()
        .find(|(n, _)| n == kernel_name)
        .or_else(|| found.iter().find(|(n, _)| n.starts_with(&mangled_prefix)))
        .cloned()
        .ok_or_else(|| PtxError::KernelNotFound {
            name: kernel_name.to_string(),
            available: found.iter().map(|(n, _)| n.clone()).collect(),
        })?;

    let (body_start, body_end) = locate_body(&clean, after_name)?;
    let statements = split_statements(&clean, body_start, body_end)?;

    let mut warnings = Vec::new();
    let mut items = Vec::new();
    for stmt in statements {
        match stmt {
            Stmt::Label(label, line) => items.push(Item::Label(label, line)),
            Stmt::Text(s, _) if s.starts_with('.') => {}
            Stmt::Text(s, line) => {
                let inst = parse_instruction(&s, line, table, opts.unknown_opcodes, &mut warnings)?;
                items.push(Item::Inst(inst));
            }
        }
    }
    assemble(name, items, warnings)
}

enum Item {
    Label(String, usize),
    Inst(PtxInstruction),
}

fn assemble(name: String, items: Vec<Item>, warnings: Vec<String>) -> Result<KernelGraph, PtxError> {
    let mut blocks: Vec<BasicBlock> = Vec::new();
    let mut current: Option<BasicBlock> = None;
    let mut labels: BTreeMap<String, usize> = BTreeMap::new();

    for item in items {
        match item {
            Item::Label(label, line) => {
                if labels.contains_key(&label) {
                    return Err(PtxError::Syntax {
                        line,
                        message: format!("duplicate label `{label}`"),
                    });
                }
                match current.as_mut() {
                    Some(b) if b.instructions.is_empty() && b.label.is_none() => {
                        b.label = Some(label.clone());
                        b.label_line = Some(line);
                    }
                    _ => {
                        if let Some(b) = current.take() {
                            blocks.push(b);
                        }
                        current = Some(BasicBlock::new(Some(label.clone()), Some(line)));
                    }
                }
                labels.insert(label, blocks.len());
            }
            Item::Inst(inst) => {
                let ends_block = inst.is_branch || matches!(inst.opcode.as_str(), "ret" | "exit");
                current
                    .get_or_insert_with(|| BasicBlock::new(None, None))
                    .instructions
                    .push(inst);
                if ends_block {
                    blocks.push(current.take().expect("just pushed"));
                }
            }
        }
    }
    if let Some(b) = current.take() {
        blocks.push(b);
    }
    if blocks.is_empty() {
        blocks.push(BasicBlock::new(None, None));
    }

    let n = blocks.len();
    let mut warnings = warnings;
    let mut edges = BTreeSet::new();
    for (i, b) in blocks.iter().enumerate() {
        let fall = (i + 1 < n).then_some(i + 1);
        match b.instructions.last() {
            Some(last) if last.is_branch => {
                let conditional = last.predicate.is_some();
                match last.branch_target() {
                    Some(target) if last.opcode == "bra" => {
                        let &to = labels.get(target).ok_or_else(|| PtxError::UnknownLabel {
                            line: last.line,
                            label: target.to_string(),
                        })?;
                        edges.insert((i, to));
                        if conditional {
                            edges.extend(fall.map(|f| (i, f)));
                        }
                    }
                    _ => {
                        warnings.push(format!(
                            "line {}: indirect branch `{}` modeled as fall-through",
                            last.line,
                            last.mnemonic()
                        ));
                        edges.extend(fall.map(|f| (i, f)));
                    }
                }
            }
            Some(last) if matches!(last.opcode.as_str(), "ret" | "exit") => {
                if last.predicate.is_some() {
                    edges.extend(fall.map(|f| (i, f)));
                }
            }
            _ => edges.extend(fall.map(|f| (i, f))),
        }
    }

    let blocks = blocks.into_iter().map(build_dfg).collect();
    finish_graph(name, blocks, edges.into_iter().collect(), warnings)
}

fn parse_instruction(
    stmt: &str,
    line: usize,
    table: &OpcodeTable,
    policy: UnknownOpcodePolicy,
    warnings: &mut Vec<String>,
) -> Result<PtxInstruction, PtxError> {
    let syntax = |message: String| PtxError::Syntax { line, message };
    let mut rest = stmt.trim();

    let mut predicate = None;
    if let Some(after) = rest.strip_prefix('@') {
        let end = after.find(char::is_whitespace).ok_or_else(|| {
            syntax(format!("guard without instruction in `{stmt}`"))
        })?;
        let guard = &after[..end];
        let reg = guard.strip_prefix('!').unwrap_or(guard);
        if !is_register(reg) {
            return Err(syntax(format!("bad guard predicate `{guard}`")));
        }
        predicate = Some(guard.to_string());
        rest = after[end..].trim_start();
    }

    let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
    let mnemonic = &rest[..end];
    let operand_text = rest[end..].trim();
    let mut parts = mnemonic.split('.');
    let opcode = parts.next().unwrap_or_default();
    let opcode_ok = opcode
        .chars()
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic())
        && opcode.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    if !opcode_ok {
        return Err(syntax(format!("cannot parse instruction `{stmt}`")));
    }
    let mut suffixes = Vec::new();
    for p in parts {
        if p.is_empty() || !p.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(syntax(format!("bad opcode modifier in `{mnemonic}`")));
        }
        suffixes.push(format!(".{p}"));
    }

    let operands = split_operands(operand_text).map_err(syntax)?;

    let c = table.classify(opcode, &suffixes);
    if !c.known {
        match policy {
            UnknownOpcodePolicy::Reject => {
                return Err(PtxError::UnknownOpcode {
                    line,
                    opcode: opcode.to_string(),
                })
            }
            UnknownOpcodePolicy::Miscellaneous => warnings.push(format!(
                "line {line}: unknown opcode `{opcode}` classified as {}",
                c.class
            )),
        }
    }

    let mut defs = BTreeSet::new();
    let mut uses = BTreeSet::new();
    let writes_first = !operands.is_empty()
        && !NO_DEST.contains(&opcode)
        && !operands[0].starts_with('[')
        && (opcode != "call" || operands[0].starts_with('('));
    for (i, op) in operands.iter().enumerate() {
        let target = if i == 0 && writes_first { &mut defs } else { &mut uses };
        target.extend(registers(op));
    }

    Ok(PtxInstruction {
        opcode: opcode.to_string(),
        suffixes,
        class: c.class,
        resource: c.resource,
        latency_key: c.latency_key,
        is_branch: c.branch,
        memory: c.memory,
        defs,
        uses,
        predicate,
        operands,
        line,
    })
}

fn split_operands(text: &str) -> Result<Vec<String>, String> {
    if text.is_empty() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for ch in text.chars() {
        match ch {
            '[' | '{' | '(' => depth += 1,
            ']' | '}' | ')' => {
                depth -= 1;
                if depth < 0 {
                    return Err(format!("unbalanced `{ch}` in operands `{text}`"));
                }
            }
            ',' if depth == 0 => {
                if cur.is_empty() {
                    return Err(format!("empty operand in `{text}`"));
                }
                out.push(std::mem::take(&mut cur));
                continue;
            }
            _ => {}
        }
        if !ch.is_whitespace() {
            cur.push(ch);
        }
    }
    if depth != 0 {
        return Err(format!("unbalanced brackets in operands `{text}`"));
    }
    if cur.is_empty() {
        return Err(format!("empty operand in `{text}`"));
    }
    out.push(cur);
    Ok(out)
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '$'
}

fn is_register(s: &str) -> bool {
    registers(s) == [s]
}

/// `%name` tokens in an operand; special registers keep their `.x` component.
fn registers(op: &str) -> Vec<String> {
    let bytes: Vec<char> = op.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] != '%' {
            i += 1;
            continue;
        }
        let start = i;
        i += 1;
        while i < bytes.len() && is_ident_char(bytes[i]) {
            i += 1;
        }
        if i == start + 1 {
            continue;
        }
        if i + 1 < bytes.len()
            && bytes[i] == '.'
            && matches!(bytes[i + 1], 'x' | 'y' | 'z' | 'w')
            && bytes.get(i + 2).is_none_or(|c| !is_ident_char(*c))
        {
            i += 2;
        }
        out.push(bytes[start..i].iter().collect());
    }
    out
}

/// Blanks out comments, keeping newlines so offsets map to the same lines.
fn strip_comments(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match (c, chars.peek()) {
            ('/', Some('/')) => {
                out.push_str("  ");
                chars.next();
                while let Some(&n) = chars.peek() {
                    if n == '\n' {
                        break;
                    }
                    out.push(' ');
                    chars.next();
                }
            }
            ('/', Some('*')) => {
                out.push_str("  ");
                chars.next();
                let mut prev = '\0';
                for n in chars.by_ref() {
                    out.push(if n == '\n' { '\n' } else { ' ' });
                    if prev == '*' && n == '/' {
                        break;
                    }
                    prev = n;
                }
            }
            _ => out.push(c),
        }
    }
    out
}

/// (name, byte offset just past the name) for every `.entry`.
fn entries(clean: &str) -> Vec<(String, usize)> {
    let mut out = Vec::new();
    let mut from = 0;
    while let Some(pos) = clean[from..].find(".entry") {
        let at = from + pos;
        from = at + ".entry".len();
        let boundary_before = at == 0 || !is_ident_char(clean[..at].chars().last().unwrap_or(' '));
        let rest = &clean[from..];
        if !boundary_before || !rest.starts_with(char::is_whitespace) {
            continue;
        }
        let trimmed = rest.trim_start();
        let start = from + (rest.len() - trimmed.len());
        let len = trimmed
            .find(|c: char| !is_ident_char(c))
            .unwrap_or(trimmed.len());
        if len > 0 {
            out.push((clean[start..start + len].to_string(), start + len));
        }
    }
    out
}

fn line_of(clean: &str, offset: usize) -> usize {
    clean[..offset].matches('\n').count() + 1
}

/// Byte range strictly inside the kernel's outer braces.
fn locate_body(clean: &str, after_name: usize) -> Result<(usize, usize), PtxError> {
    let unterminated = |message: &str| PtxError::Syntax {
        line: line_of(clean, after_name),
        message: message.to_string(),
    };
    let mut i = after_name;
    let bytes = clean.as_bytes();
    let mut paren = 0i32;
    let open = loop {
        match bytes.get(i) {
            None => return Err(unterminated("kernel has no body")),
            Some(b'(') => paren += 1,
            Some(b')') => paren -= 1,
            Some(b'{') if paren == 0 => break i,
            Some(b';') if paren == 0 => return Err(unterminated("kernel declaration has no body")),
            _ => {}
        }
        i += 1;
    };
    let mut depth = 0i32;
    for (j, &b) in bytes.iter().enumerate().skip(open) {
        match b {
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Ok((open + 1, j));
                }
            }
            _ => {}
        }
    }
    Err(unterminated("unterminated kernel body"))
}

enum Stmt {
    Label(String, usize),
    Text(String, usize),
}

fn split_statements(clean: &str, start: usize, end: usize) -> Result<Vec<Stmt>, PtxError> {
    let mut out = Vec::new();
    let mut line = line_of(clean, start);
    let mut buf = String::new();
    let mut buf_line = line;
    let mut depth = 0i32;
    for ch in clean[start..end].chars() {
        if ch == '\n' {
            line += 1;
        }
        let empty = buf.trim().is_empty();
        if empty && (ch == '{' || ch == '}') {
            buf.clear();
            continue;
        }
        match ch {
            '{' => depth += 1,
            '}' => depth -= 1,
            ';' if depth == 0 => {
                out.push(Stmt::Text(buf.trim().to_string(), buf_line));
                buf.clear();
                continue;
            }
            ':' if depth == 0 && is_label(buf.trim()) => {
                out.push(Stmt::Label(buf.trim().to_string(), buf_line));
                buf.clear();
                continue;
            }
            _ => {}
        }
        if empty {
            if ch.is_whitespace() {
                continue;
            }
            buf.clear();
            buf_line = line;
        }
        buf.push(ch);
    }
    if !buf.trim().is_empty() {
        return Err(PtxError::Syntax {
            line: buf_line,
            message: format!("statement `{}` is missing `;`", buf.trim()),
        });
    }
    Ok(out)
}

fn is_label(s: &str) -> bool {
    let mut chars = s.chars();
    chars
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_' || c == '$')
        && chars.all(is_ident_char)
}
