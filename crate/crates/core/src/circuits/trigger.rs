// SPDX-License-Identifier: Apache-2.0
//! Trigger (and assertion) netlists: small circuits whose primary inputs tap
//! user signals and whose single primary output fires the trigger.

use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::netlist::{BlockId, BlockKind, Netlist, NetlistBuilder};
use crate::error::{Error, Result};

/// Prefix given to trigger blocks when merged into a user netlist.
pub const TRIGGER_PREFIX: &str = "trig:";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriggerNetlist {
    /// INPUT block names are the user signals they tap.
    pub netlist: Netlist,
    /// The OUTPUT block.
    pub output: BlockId,
}

impl TriggerNetlist {
    /// Validates `netlist` as a trigger for `user`.
    pub fn new(netlist: Netlist, user: &Netlist) -> Result<Self> {
        let signals: HashSet<String> = user.signal_names().into_iter().collect();
        for b in &netlist.blocks {
            if b.kind == BlockKind::Input && !signals.contains(&b.name) {
                return Err(Error::UnknownSignal(b.name.clone()));
            }
        }
        let outs: Vec<BlockId> = netlist
            .block_ids()
            .filter(|&b| netlist.block(b).kind == BlockKind::Output)
            .collect();
        if outs.len() != 1 {
            return Err(Error::validation(format!(
                "trigger netlist must have exactly one primary output, found {}",
                outs.len()
            )));
        }
        let out = outs[0];
        let driver = netlist.net(netlist.block(out).inputs[0]).driver;
        if !netlist.block(driver).kind.is_logic() {
            return Err(Error::validation(
                "trigger output must be driven by a LUT or FF",
            ));
        }
        Ok(TriggerNetlist {
            netlist,
            output: out,
        })
    }

    /// Logic elements (LUT and FF blocks) in netlist order.
    pub fn les(&self) -> Vec<BlockId> {
        self.netlist
            .block_ids()
            .filter(|&b| self.netlist.block(b).kind.is_logic())
            .collect()
    }

    /// The LE driving the trigger output.
    pub fn root(&self) -> BlockId {
        let n = &self.netlist;
        n.net(n.block(self.output).inputs[0]).driver
    }

    pub fn taps(&self) -> Vec<BlockId> {
        self.netlist
            .block_ids()
            .filter(|&b| self.netlist.block(b).kind == BlockKind::Input)
            .collect()
    }
}

/// Generates a random trigger with `n_les` logic elements tapping signals of
/// `user`. Every LE feeds, directly or indirectly, the root LUT.
pub fn gen_trigger(seed: u64, n_les: usize, user: &Netlist) -> Result<TriggerNetlist> {
    if n_les == 0 {
        return Err(Error::validation("trigger needs at least one LE"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool = user.signal_names();
    if pool.is_empty() {
        return Err(Error::validation("user netlist has no signals to tap"));
    }
    pool.shuffle(&mut rng);
    let n_taps = (n_les / 2 + 1).min(pool.len());
    let taps: Vec<String> = pool.into_iter().take(n_taps).collect();

    // The root (last LE) is always a LUT.
    let is_ff: Vec<bool> = (0..n_les)
        .map(|i| i + 1 < n_les && i > 0 && rng.gen_bool(0.15))
        .collect();
    let le_name = |i: usize| format!("t{i}");
    let mut inputs: Vec<Vec<String>> = vec![Vec::new(); n_les];
    let mut used = vec![false; n_les];
    let mut tap_used = vec![false; taps.len()];
    for i in 0..n_les {
        let want = if is_ff[i] { 1 } else { rng.gen_range(2..=4) };
        let mut tries = 0;
        while inputs[i].len() < want && tries < 32 {
            tries += 1;
            // Prefer unused earlier LEs, then unused taps, then anything.
            let unused_le: Vec<usize> = (0..i).filter(|&j| !used[j]).collect();
            let unused_tap: Vec<usize> = (0..taps.len()).filter(|&t| !tap_used[t]).collect();
            let pick = if !unused_le.is_empty() && rng.gen_bool(0.7) {
                le_name(*unused_le.choose(&mut rng).unwrap())
            } else if !unused_tap.is_empty() {
                let t = *unused_tap.choose(&mut rng).unwrap();
                taps[t].clone()
            } else if i > 0 && rng.gen_bool(0.5) {
                le_name(rng.gen_range(0..i))
            } else {
                taps[rng.gen_range(0..taps.len())].clone()
            };
            if !inputs[i].contains(&pick) {
                if let Some(j) = (0..i).find(|&j| le_name(j) == pick) {
                    used[j] = true;
                }
                if let Some(t) = taps.iter().position(|t| *t == pick) {
                    tap_used[t] = true;
                }
                inputs[i].push(pick);
            }
        }
    }
    // Hook any LE that still has no fanout into a later LUT.
    for j in 0..n_les.saturating_sub(1) {
        if used[j] {
            continue;
        }
        let host = (j + 1..n_les).find(|&h| !is_ff[h] && inputs[h].len() < 4);
        let h = host.unwrap_or(n_les - 1);
        if inputs[h].len() >= 4 {
            inputs[h].pop();
        }
        inputs[h].push(le_name(j));
        used[j] = true;
    }
    let mut b = NetlistBuilder::new(&format!("trigger_s{seed}_{n_les}"));
    let referenced: BTreeSet<&String> = inputs.iter().flatten().collect();
    for t in &taps {
        if referenced.contains(t) {
            b.add_input(t);
        }
    }
    for i in 0..n_les {
        if is_ff[i] {
            b.add_ff(&le_name(i), &inputs[i][0], 0);
        } else {
            let k = inputs[i].len();
            let full = (1u64 << (1 << k)) - 1;
            let tt = (rng.gen::<u64>() & full).max(1);
            b.add_lut(&le_name(i), &inputs[i], tt);
        }
    }
    b.add_output(&le_name(n_les - 1));
    TriggerNetlist::new(b.build()?, user)
}

/// Merges a trigger into the user netlist as ordinary logic, for a full
/// recompile. Trigger blocks are prefixed with [`TRIGGER_PREFIX`].
pub fn merge_trigger(user: &Netlist, trig: &TriggerNetlist) -> Result<Netlist> {
    let t = &trig.netlist;
    let mut b = user.to_builder();
    let rename = |id: BlockId| -> String {
        let blk = t.block(id);
        if blk.kind == BlockKind::Input {
            blk.name.clone()
        } else {
            format!("{TRIGGER_PREFIX}{}", blk.name)
        }
    };
    for id in t.block_ids() {
        let blk = t.block(id);
        let ins: Vec<String> = blk
            .inputs
            .iter()
            .map(|n| rename(t.net(*n).driver))
            .collect();
        match blk.kind {
            BlockKind::Lut => {
                b.add_lut(&rename(id), &ins, blk.truth_table);
            }
            BlockKind::Ff => {
                b.add_ff(&rename(id), &ins[0], blk.init);
            }
            BlockKind::Output => {
                b.add_output(&ins[0]);
            }
            BlockKind::Input => {}
        }
    }
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::{gen_synthetic, parse_netlist};

    #[test]
    fn generated_triggers_are_valid_and_connected() {
        let user = gen_synthetic(1, 60, 0.6).unwrap();
        for (seed, n) in [(1, 1), (2, 4), (3, 9), (4, 32)] {
            let t = gen_trigger(seed, n, &user).unwrap();
            assert_eq!(t.les().len(), n);
            let net = &t.netlist;
            for le in t.les() {
                if le != t.root() {
                    let out = net.block(le).output.unwrap();
                    assert!(
                        !net.net(out).sinks.is_empty(),
                        "dangling {}",
                        net.block(le).name
                    );
                }
            }
            assert!(net.max_lut_inputs() <= 4);
        }
    }

    #[test]
    fn rejects_unknown_tap_and_multiple_outputs() {
        let user = parse_netlist(".inputs a\n.outputs y\n.names a y\n1 1\n", "u").unwrap();
        let t = parse_netlist(".inputs zz\n.outputs f\n.names zz f\n1 1\n", "t").unwrap();
        assert!(matches!(TriggerNetlist::new(t, &user), Err(Error::UnknownSignal(s)) if s == "zz"));
        let t = parse_netlist(
            ".inputs a\n.outputs f g\n.names a f\n1 1\n.names a g\n0 1\n",
            "t",
        )
        .unwrap();
        assert!(TriggerNetlist::new(t, &user).is_err());
    }

    #[test]
    fn merge_adds_trigger_logic() {
        let user = gen_synthetic(2, 40, 0.6).unwrap();
        let t = gen_trigger(5, 6, &user).unwrap();
        let merged = merge_trigger(&user, &t).unwrap();
        assert_eq!(
            merged.count(BlockKind::Lut) + merged.count(BlockKind::Ff),
            40 + 10 + 6
        );
        assert_eq!(
            merged.count(BlockKind::Output),
            user.count(BlockKind::Output) + 1
        );
    }
}
