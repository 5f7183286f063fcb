// SPDX-License-Identifier: Apache-2.0
//! BLIF subset: `.model`, `.inputs`, `.outputs`, `.names`, `.latch`, `.end`.
//!
//! Comments start with `#`; a trailing `\` continues a logical line.

use std::fmt::Write as _;

use super::netlist::{BlockKind, Netlist, NetlistBuilder, OUTPUT_PREFIX};
use crate::error::{Error, Result};
use crate::fabric::MAX_LUT_INPUTS;

struct Token<'a> {
    text: &'a str,
    column: usize,
}

struct Line<'a> {
    number: usize,
    tokens: Vec<Token<'a>>,
}

fn logical_lines(text: &str) -> Vec<Line<'_>> {
    let mut out: Vec<Line<'_>> = Vec::new();
    let mut pending: Option<Line<'_>> = None;
    for (i, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("");
        let (content, continues) = match content.trim_end().strip_suffix('\\') {
            Some(c) => (c, true),
            None => (content, false),
        };
        let line = pending.get_or_insert_with(|| Line {
            number: i + 1,
            tokens: Vec::new(),
        });
        let base = content.as_ptr() as usize - raw.as_ptr() as usize;
        let mut col = 0;
        for piece in content.split(|c: char| c.is_ascii_whitespace()) {
            if !piece.is_empty() {
                line.tokens.push(Token {
                    text: piece,
                    column: base + col + 1,
                });
            }
            col += piece.len() + 1;
        }
        if !continues {
            let l = pending.take().unwrap();
            if !l.tokens.is_empty() {
                out.push(l);
            }
        }
    }
    if let Some(l) = pending {
        if !l.tokens.is_empty() {
            out.push(l);
        }
    }
    out
}

fn syntax(path: &str, line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        path: path.to_string(),
        line,
        column,
        message: message.into(),
    }
}

/// Parses BLIF text. `path` only labels error positions.
pub fn parse_netlist(text: &str, path: &str) -> Result<Netlist> {
    let lines = logical_lines(text);
    let mut model: Option<String> = None;
    let mut inputs: Vec<String> = Vec::new();
    let mut outputs: Vec<String> = Vec::new();
    let mut logic = NetlistBuilder::new("");
    let mut ended = false;
    let mut i = 0;
    while i < lines.len() {
        let line = &lines[i];
        let head = &line.tokens[0];
        if ended {
            return Err(syntax(path, line.number, head.column, "content after .end"));
        }
        let args = &line.tokens[1..];
        match head.text {
            ".model" => {
                if model.is_some() {
                    return Err(syntax(
                        path,
                        line.number,
                        head.column,
                        "multiple .model directives",
                    ));
                }
                model = Some(args.first().map(|t| t.text.to_string()).unwrap_or_default());
            }
            ".inputs" => inputs.extend(args.iter().map(|t| t.text.to_string())),
            ".outputs" => outputs.extend(args.iter().map(|t| t.text.to_string())),
            ".names" => {
                if args.is_empty() {
                    return Err(syntax(
                        path,
                        line.number,
                        head.column,
                        ".names needs an output signal",
                    ));
                }
                let k = args.len() - 1;
                if k > MAX_LUT_INPUTS {
                    return Err(syntax(
                        path,
                        line.number,
                        args[MAX_LUT_INPUTS].column,
                        format!(
                            "LUT with {k} inputs exceeds the supported maximum of {MAX_LUT_INPUTS}"
                        ),
                    ));
                }
                let mut covers = Vec::new();
                while i + 1 < lines.len() && !lines[i + 1].tokens[0].text.starts_with('.') {
                    i += 1;
                    covers.push(&lines[i]);
                }
                let tt = parse_cover(path, k, &covers)?;
                let ins: Vec<&str> = args[..k].iter().map(|t| t.text).collect();
                logic.add_lut(args[k].text, &ins, tt);
            }
            ".latch" => {
                let init = match args.len() {
                    2 => 3,
                    3 => parse_init(path, line.number, &args[2])?,
                    4 => 3,
                    5 => parse_init(path, line.number, &args[4])?,
                    _ => {
                        return Err(syntax(
                            path,
                            line.number,
                            head.column,
                            ".latch expects 2 to 5 arguments",
                        ));
                    }
                };
                logic.add_ff(args[1].text, args[0].text, init);
            }
            ".end" => ended = true,
            other if other.starts_with('.') => {
                return Err(syntax(
                    path,
                    line.number,
                    head.column,
                    format!("unsupported directive `{other}`"),
                ));
            }
            _ => {
                return Err(syntax(
                    path,
                    line.number,
                    head.column,
                    "cover line outside .names",
                ));
            }
        }
        i += 1;
    }
    let mut b = NetlistBuilder::new(&model.unwrap_or_default());
    for s in &inputs {
        b.add_input(s);
    }
    b.extend_from(&logic);
    for s in &outputs {
        b.add_output(s);
    }
    b.build()
}

fn parse_init(path: &str, line: usize, tok: &Token<'_>) -> Result<u8> {
    match tok.text {
        "0" => Ok(0),
        "1" => Ok(1),
        "2" => Ok(2),
        "3" => Ok(3),
        _ => Err(syntax(
            path,
            line,
            tok.column,
            format!("bad latch init value `{}`", tok.text),
        )),
    }
}

fn parse_cover(path: &str, k: usize, covers: &[&Line<'_>]) -> Result<u64> {
    let mut set: u64 = 0;
    let mut polarity: Option<bool> = None;
    for line in covers {
        let (cube, out) = match (k, line.tokens.as_slice()) {
            (0, [o]) => ("", o),
            (_, [c, o]) if k > 0 => (c.text, o),
            _ => {
                return Err(syntax(
                    path,
                    line.number,
                    line.tokens[0].column,
                    format!("expected a {k}-input cover line"),
                ));
            }
        };
        if cube.len() != k || !cube.bytes().all(|c| matches!(c, b'0' | b'1' | b'-')) {
            return Err(syntax(
                path,
                line.number,
                line.tokens[0].column,
                format!("bad cube `{cube}`"),
            ));
        }
        let bit = match out.text {
            "1" => true,
            "0" => false,
            _ => {
                return Err(syntax(
                    path,
                    line.number,
                    out.column,
                    format!("bad output value `{}`", out.text),
                ))
            }
        };
        if polarity.is_some_and(|p| p != bit) {
            return Err(syntax(
                path,
                line.number,
                out.column,
                "cover mixes on-set and off-set lines",
            ));
        }
        polarity = Some(bit);
        let cube = cube.as_bytes();
        for m in 0..(1u64 << k) {
            let hit = (0..k).all(|j| match cube[j] {
                b'0' => m >> j & 1 == 0,
                b'1' => m >> j & 1 == 1,
                _ => true,
            });
            if hit {
                set |= 1 << m;
            }
        }
    }
    let full = if k == 6 {
        u64::MAX
    } else {
        (1u64 << (1 << k)) - 1
    };
    Ok(match polarity {
        Some(false) => !set & full,
        _ => set,
    })
}

/// Emits canonical BLIF; `parse_netlist(&emit_blif(n))` reproduces `n`.
pub fn emit_blif(n: &Netlist) -> String {
    let mut s = String::new();
    let _ = writeln!(s, ".model {}", n.name);
    let names = |kind: BlockKind| -> Vec<&str> {
        n.blocks
            .iter()
            .filter(|b| b.kind == kind)
            .map(|b| match kind {
                BlockKind::Output => &b.name[OUTPUT_PREFIX.len()..],
                _ => b.name.as_str(),
            })
            .collect()
    };
    let _ = writeln!(s, ".inputs {}", names(BlockKind::Input).join(" "));
    let _ = writeln!(s, ".outputs {}", names(BlockKind::Output).join(" "));
    for b in &n.blocks {
        let ins: Vec<&str> = b.inputs.iter().map(|i| n.net(*i).name.as_str()).collect();
        match b.kind {
            BlockKind::Lut => {
                let _ = write!(s, ".names");
                for i in &ins {
                    let _ = write!(s, " {i}");
                }
                let _ = writeln!(s, " {}", b.name);
                let k = ins.len();
                for m in 0..(1u64 << k) {
                    if b.truth_table >> m & 1 == 1 {
                        let cube: String = (0..k)
                            .map(|j| if m >> j & 1 == 1 { '1' } else { '0' })
                            .collect();
                        if k == 0 {
                            let _ = writeln!(s, "1");
                        } else {
                            let _ = writeln!(s, "{cube} 1");
                        }
                    }
                }
            }
            BlockKind::Ff => {
                let _ = writeln!(s, ".latch {} {} {}", ins[0], b.name, b.init);
            }
            _ => {}
        }
    }
    s.push_str(".end\n");
    s
}
