// SPDX-License-Identifier: Apache-2.0
//! Synthetic benchmark generator.
//!
//! Logic blocks are laid out along the leaves of an implicit binary
//! hierarchy. Each LUT/FF input picks its driver from the sibling subtree at
//! level `L`, where `P(L > l) = 2^(l (p - 1))` for Rent exponent `p`; levels
//! above the root become primary inputs. That gives a cluster of `2^l` blocks
//! roughly `2^(l p)` external connections, i.e. Rent's rule.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::netlist::{Netlist, NetlistBuilder};
use crate::error::{Error, Result};

/// LUT size produced by the generator.
pub const SYNTH_LUT_K: usize = 4;

/// Flip-flops per LUT.
pub const FF_RATIO: f64 = 0.25;

/// Scale of the primary-input pool: `round(PI_SCALE * n_luts^p)`.
const PI_SCALE: f64 = 0.6;
/// Minimum primary outputs as a fraction of `n_luts^p`.
const PO_SCALE: f64 = 0.4;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Lut,
    Ff,
}

enum Src {
    Block(usize),
    Pi(usize),
}

struct Gen {
    rng: ChaCha8Rng,
    kinds: Vec<Kind>,
    levels: u32,
    p: f64,
}

impl Gen {
    fn sample_level(&mut self) -> u32 {
        // P(L > l) = 2^(l (p - 1)); L >= 1.
        let u: f64 = self.rng.gen();
        let mut l = 1;
        while l <= self.levels && u < 2f64.powf(l as f64 * (self.p - 1.0)) {
            l += 1;
        }
        l
    }

    /// Sibling subtree of `i` at level `l`, clipped to the block count.
    fn sibling_range(&self, i: usize, l: u32) -> std::ops::Range<usize> {
        let half = 1usize << (l - 1);
        let base = ((i >> (l - 1)) ^ 1) << (l - 1);
        let n = self.kinds.len();
        base.min(n)..(base + half).min(n)
    }

    /// A legal driver for block `i` from the level-`l` sibling subtree. LUTs
    /// may only read earlier LUTs; FFs break cycles so are always legal.
    fn pick_in_level(&mut self, i: usize, l: u32, earlier_only: bool) -> Option<usize> {
        let r = self.sibling_range(i, l);
        if r.is_empty() {
            return None;
        }
        for _ in 0..8 {
            let j = self.rng.gen_range(r.clone());
            let later_lut = j > i && self.kinds[j] == Kind::Lut && self.kinds[i] == Kind::Lut;
            if (earlier_only && j >= i) || later_lut {
                continue;
            }
            return Some(j);
        }
        None
    }
}

pub fn gen_synthetic(seed: u64, n_luts: usize, rent_p: f64) -> Result<Netlist> {
    if n_luts == 0 {
        return Err(Error::validation("n_luts must be at least 1"));
    }
    if !(rent_p > 0.0 && rent_p < 1.0) {
        return Err(Error::validation(format!(
            "rent_p must be in (0, 1), got {rent_p}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_ff = (n_luts as f64 * FF_RATIO).round() as usize;
    let total = n_luts + n_ff;
    let mut kinds = vec![Kind::Lut; n_luts];
    kinds.extend(std::iter::repeat(Kind::Ff).take(n_ff));
    kinds.shuffle(&mut rng);
    let levels = usize::BITS - (total.max(2) - 1).leading_zeros();
    let scale = (n_luts as f64).powf(rent_p);
    let pi_pool = ((PI_SCALE * scale).round() as usize).max(1);
    let po_min = ((PO_SCALE * scale).round() as usize).max(1);

    let mut g = Gen {
        rng,
        kinds,
        levels,
        p: rent_p,
    };
    let mut inputs: Vec<Vec<Src>> = Vec::with_capacity(total);
    let mut next_pi = 0usize;
    let mut pi_used = 0usize;

    for i in 0..total {
        let want = match g.kinds[i] {
            Kind::Ff => 1,
            Kind::Lut => {
                let u: f64 = g.rng.gen();
                if u < 0.15 {
                    2
                } else if u < 0.4 {
                    3
                } else {
                    SYNTH_LUT_K
                }
            }
        };
        let mut ins: Vec<Src> = Vec::with_capacity(want);
        // The first input comes from an earlier block, which keeps the whole
        // netlist connected through block 0.
        if i > 0 {
            let mut l = g.sample_level();
            let mut found = None;
            while found.is_none() && l <= g.levels {
                found = g.pick_in_level(i, l, true);
                l += 1;
            }
            let j = found.unwrap_or_else(|| g.rng.gen_range(0..i));
            ins.push(Src::Block(j));
        }
        let mut attempts = 0;
        while ins.len() < want && attempts < 32 {
            attempts += 1;
            let l = g.sample_level();
            let src = if l > g.levels {
                let pi = if next_pi < pi_pool {
                    next_pi += 1;
                    next_pi - 1
                } else {
                    g.rng.gen_range(0..pi_pool)
                };
                Src::Pi(pi)
            } else {
                match g.pick_in_level(i, l, false) {
                    Some(j) => Src::Block(j),
                    None => continue,
                }
            };
            let dup = ins.iter().any(|s| match (s, &src) {
                (Src::Block(a), Src::Block(b)) => a == b,
                (Src::Pi(a), Src::Pi(b)) => a == b,
                _ => false,
            });
            if !dup {
                if let Src::Pi(p) = src {
                    pi_used = pi_used.max(p + 1);
                }
                ins.push(src);
            }
        }
        if ins.is_empty() {
            ins.push(Src::Pi(0));
            pi_used = pi_used.max(1);
        }
        inputs.push(ins);
    }

    // Absorb dangling outputs into LUTs with spare inputs where legal.
    let mut fanout = vec![0usize; total];
    for ins in &inputs {
        for s in ins {
            if let Src::Block(j) = s {
                fanout[*j] += 1;
            }
        }
    }
    for d in 0..total {
        if fanout[d] > 0 {
            continue;
        }
        let host = (0..total)
            .map(|k| (d + 1 + k) % total)
            .filter(|&h| h != d && g.kinds[h] == Kind::Lut && inputs[h].len() < SYNTH_LUT_K)
            .filter(|&h| g.kinds[d] == Kind::Ff || h > d)
            .find(|&h| {
                !inputs[h]
                    .iter()
                    .any(|s| matches!(s, Src::Block(j) if *j == d))
            });
        if let Some(h) = host {
            inputs[h].push(Src::Block(d));
            fanout[d] += 1;
        }
    }

    let name = |i: usize| match g.kinds[i] {
        Kind::Lut => format!("n{i}"),
        Kind::Ff => format!("ff{i}"),
    };
    let mut b = NetlistBuilder::new(&format!("synth_s{seed}_n{n_luts}"));
    for p in 0..pi_used {
        b.add_input(&format!("pi{p}"));
    }
    for i in 0..total {
        let ins: Vec<String> = inputs[i]
            .iter()
            .map(|s| match s {
                Src::Block(j) => name(*j),
                Src::Pi(p) => format!("pi{p}"),
            })
            .collect();
        match g.kinds[i] {
            Kind::Lut => {
                let k = ins.len();
                let full = (1u64 << (1 << k)) - 1;
                let mut tt = g.rng.gen::<u64>() & full;
                if tt == 0 || tt == full {
                    tt ^= 1;
                }
                b.add_lut(&name(i), &ins, tt);
            }
            Kind::Ff => {
                b.add_ff(&name(i), &ins[0], 0);
            }
        }
    }
    let mut outs: Vec<usize> = (0..total).filter(|&i| fanout[i] == 0).collect();
    if outs.len() < po_min {
        let mut rest: Vec<usize> = (0..total).filter(|&i| fanout[i] > 0).collect();
        rest.shuffle(&mut g.rng);
        outs.extend(rest.into_iter().take(po_min - outs.len()));
        outs.sort_unstable();
    }
    for i in outs {
        b.add_output(&name(i));
    }
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::{emit_blif, parse_netlist, BlockKind};

    #[test]
    fn deterministic_in_seed() {
        let a = emit_blif(&gen_synthetic(7, 50, 0.6).unwrap());
        let b = emit_blif(&gen_synthetic(7, 50, 0.6).unwrap());
        assert_eq!(a, b);
        assert_ne!(a, emit_blif(&gen_synthetic(8, 50, 0.6).unwrap()));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(gen_synthetic(1, 0, 0.6).is_err());
        assert!(gen_synthetic(1, 10, 0.0).is_err());
        assert!(gen_synthetic(1, 10, 1.0).is_err());
    }

    #[test]
    fn block_counts() {
        let n = gen_synthetic(3, 120, 0.65).unwrap();
        assert_eq!(n.count(BlockKind::Lut), 120);
        assert_eq!(n.count(BlockKind::Ff), 30);
        assert!(n.max_lut_inputs() <= SYNTH_LUT_K);
        let again = parse_netlist(&emit_blif(&n), "synth").unwrap();
        assert_eq!(n, again);
    }

    #[test]
    fn tiny_netlists_are_valid() {
        for n in 1..12 {
            gen_synthetic(n as u64, n, 0.5).unwrap();
        }
    }
}
