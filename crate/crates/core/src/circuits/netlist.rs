// SPDX-License-Identifier: Apache-2.0
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BlockId(pub u32);

impl BlockId {
    #[inline]
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NetId(pub u32);

impl NetId {
    #[inline]
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BlockKind {
    Lut,
    Ff,
    Input,
    Output,
}

impl BlockKind {
    /// Occupies a BLE slot in a CLB.
    pub fn is_logic(self) -> bool {
        matches!(self, BlockKind::Lut | BlockKind::Ff)
    }

    pub fn is_io(self) -> bool {
        matches!(self, BlockKind::Input | BlockKind::Output)
    }
}

/// Prefix of OUTPUT block names; the rest is the observed signal.
pub const OUTPUT_PREFIX: &str = "out:";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    /// Output signal name for LUT, FF and INPUT blocks; `out:<signal>` for OUTPUT blocks.
    pub name: String,
    pub kind: BlockKind,
    pub inputs: Vec<NetId>,
    pub output: Option<NetId>,
    /// LUT function; bit `m` is the output for the input assignment whose
    /// pin `j` value is bit `j` of `m`.
    pub truth_table: u64,
    /// FF initial value in BLIF encoding (0, 1, 2 = don't care, 3 = unknown).
    pub init: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pin {
    pub block: BlockId,
    pub pin: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Net {
    pub name: String,
    pub driver: BlockId,
    pub sinks: Vec<Pin>,
}

/// A technology-mapped netlist in canonical order: INPUT blocks, then logic
/// blocks, then OUTPUT blocks. Nets follow the order of their drivers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Netlist {
    pub name: String,
    pub blocks: Vec<Block>,
    pub nets: Vec<Net>,
}

impl Netlist {
    pub fn block(&self, id: BlockId) -> &Block {
        &self.blocks[id.idx()]
    }

    pub fn net(&self, id: NetId) -> &Net {
        &self.nets[id.idx()]
    }

    pub fn block_ids(&self) -> impl Iterator<Item = BlockId> {
        (0..self.blocks.len() as u32).map(BlockId)
    }

    pub fn find_block(&self, name: &str) -> Option<BlockId> {
        self.blocks
            .iter()
            .position(|b| b.name == name)
            .map(|i| BlockId(i as u32))
    }

    pub fn count(&self, kind: BlockKind) -> usize {
        self.blocks.iter().filter(|b| b.kind == kind).count()
    }

    /// Observable user signals: every LUT, FF and INPUT output.
    pub fn signals(&self) -> Vec<BlockId> {
        self.block_ids()
            .filter(|&b| self.block(b).kind != BlockKind::Output)
            .collect()
    }

    pub fn signal_names(&self) -> Vec<String> {
        self.signals()
            .into_iter()
            .map(|b| self.block(b).name.clone())
            .collect()
    }

    pub fn max_lut_inputs(&self) -> usize {
        self.blocks
            .iter()
            .filter(|b| b.kind == BlockKind::Lut)
            .map(|b| b.inputs.len())
            .max()
            .unwrap_or(0)
    }

    /// External pin count (INPUT plus OUTPUT blocks).
    pub fn external_pins(&self) -> usize {
        self.count(BlockKind::Input) + self.count(BlockKind::Output)
    }

    /// Re-creates a builder holding this netlist's blocks, for edits.
    pub fn to_builder(&self) -> NetlistBuilder {
        let mut b = NetlistBuilder::new(&self.name);
        for blk in &self.blocks {
            let inputs = blk
                .inputs
                .iter()
                .map(|n| self.net(*n).name.clone())
                .collect();
            b.blocks.push(ProtoBlock {
                name: blk.name.clone(),
                kind: blk.kind,
                inputs,
                truth_table: blk.truth_table,
                init: blk.init,
            });
        }
        b
    }
}

#[derive(Debug, Clone)]
struct ProtoBlock {
    name: String,
    kind: BlockKind,
    inputs: Vec<String>,
    truth_table: u64,
    init: u8,
}

/// Accumulates blocks by signal name and resolves them into a canonical
/// [`Netlist`], enforcing the single-driver and no-combinational-loop rules.
#[derive(Debug, Clone)]
pub struct NetlistBuilder {
    name: String,
    blocks: Vec<ProtoBlock>,
}

impl NetlistBuilder {
    pub fn new(name: &str) -> Self {
        NetlistBuilder {
            name: name.to_string(),
            blocks: Vec::new(),
        }
    }

    pub fn add_input(&mut self, signal: &str) -> &mut Self {
        self.push(signal.to_string(), BlockKind::Input, Vec::new(), 0, 0)
    }

    pub fn add_output(&mut self, signal: &str) -> &mut Self {
        self.push(
            format!("{OUTPUT_PREFIX}{signal}"),
            BlockKind::Output,
            vec![signal.to_string()],
            0,
            0,
        )
    }

    pub fn add_lut<S: AsRef<str>>(
        &mut self,
        out: &str,
        inputs: &[S],
        truth_table: u64,
    ) -> &mut Self {
        let inputs = inputs.iter().map(|s| s.as_ref().to_string()).collect();
        self.push(out.to_string(), BlockKind::Lut, inputs, truth_table, 0)
    }

    pub fn add_ff(&mut self, out: &str, d: &str, init: u8) -> &mut Self {
        self.push(out.to_string(), BlockKind::Ff, vec![d.to_string()], 0, init)
    }

    /// Appends every block of `other`, keeping its order.
    pub fn extend_from(&mut self, other: &NetlistBuilder) -> &mut Self {
        self.blocks.extend(other.blocks.iter().cloned());
        self
    }

    fn push(
        &mut self,
        name: String,
        kind: BlockKind,
        inputs: Vec<String>,
        truth_table: u64,
        init: u8,
    ) -> &mut Self {
        self.blocks.push(ProtoBlock {
            name,
            kind,
            inputs,
            truth_table,
            init,
        });
        self
    }

    pub fn build(&self) -> Result<Netlist> {
        let rank = |k: BlockKind| match k {
            BlockKind::Input => 0,
            BlockKind::Lut | BlockKind::Ff => 1,
            BlockKind::Output => 2,
        };
        let mut order: Vec<usize> = (0..self.blocks.len()).collect();
        order.sort_by_key(|&i| (rank(self.blocks[i].kind), i));

        let mut blocks = Vec::with_capacity(order.len());
        let mut nets: Vec<Net> = Vec::new();
        let mut net_of: HashMap<&str, NetId> = HashMap::new();
        for (bi, &pi) in order.iter().enumerate() {
            let p = &self.blocks[pi];
            let output = if p.kind == BlockKind::Output {
                None
            } else {
                let id = NetId(nets.len() as u32);
                if net_of.insert(p.name.as_str(), id).is_some() {
                    return Err(Error::Validation(format!(
                        "multiple drivers for net `{}`",
                        p.name
                    )));
                }
                nets.push(Net {
                    name: p.name.clone(),
                    driver: BlockId(bi as u32),
                    sinks: Vec::new(),
                });
                Some(id)
            };
            blocks.push(Block {
                name: p.name.clone(),
                kind: p.kind,
                inputs: Vec::new(),
                output,
                truth_table: p.truth_table,
                init: p.init,
            });
        }
        let mut out_names = std::collections::HashSet::new();
        for (bi, &pi) in order.iter().enumerate() {
            let p = &self.blocks[pi];
            if p.kind == BlockKind::Output && !out_names.insert(p.name.as_str()) {
                return Err(Error::Validation(format!(
                    "duplicate primary output `{}`",
                    &p.name[OUTPUT_PREFIX.len()..]
                )));
            }
            for (j, s) in p.inputs.iter().enumerate() {
                let Some(&nid) = net_of.get(s.as_str()) else {
                    return Err(Error::Validation(format!("net `{s}` has no driver")));
                };
                blocks[bi].inputs.push(nid);
                nets[nid.idx()].sinks.push(Pin {
                    block: BlockId(bi as u32),
                    pin: j as u8,
                });
            }
        }
        let netlist = Netlist {
            name: self.name.clone(),
            blocks,
            nets,
        };
        if let Some(net) = find_combinational_loop(&netlist) {
            return Err(Error::Validation(format!(
                "combinational loop through net `{net}`"
            )));
        }
        Ok(netlist)
    }
}

/// Returns the name of a net on a LUT-only cycle, if one exists.
pub fn find_combinational_loop(n: &Netlist) -> Option<String> {
    #[derive(Clone, Copy, PartialEq)]
    enum Color {
        White,
        Grey,
        Black,
    }
    let mut color = vec![Color::White; n.blocks.len()];
    for start in n.block_ids() {
        if n.block(start).kind != BlockKind::Lut || color[start.idx()] != Color::White {
            continue;
        }
        // Iterative DFS over LUT -> LUT fanout edges.
        let mut stack: Vec<(BlockId, usize)> = vec![(start, 0)];
        color[start.idx()] = Color::Grey;
        while let Some(&mut (b, ref mut next)) = stack.last_mut() {
            let sinks = match n.block(b).output {
                Some(o) => &n.net(o).sinks,
                None => &Vec::new() as &Vec<Pin>,
            };
            if *next < sinks.len() {
                let s = sinks[*next].block;
                *next += 1;
                if n.block(s).kind != BlockKind::Lut {
                    continue;
                }
                match color[s.idx()] {
                    Color::Grey => return Some(n.block(b).name.clone()),
                    Color::White => {
                        color[s.idx()] = Color::Grey;
                        stack.push((s, 0));
                    }
                    Color::Black => {}
                }
            } else {
                color[b.idx()] = Color::Black;
                stack.pop();
            }
        }
    }
    None
}
