// SPDX-License-Identifier: Apache-2.0
//! Hopcroft–Karp maximum bipartite matching.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::fold::BipartiteConnectivity;
use crate::error::{Error, Result};

/// Matching of requested signals (by id) onto trace inputs (by index into
/// `BipartiteConnectivity::trace_inputs`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matching {
    /// `(signal, trace input)` pairs, sorted by signal.
    pub pairs: Vec<(u32, u32)>,
    /// Requested signals left unobserved, sorted.
    pub unmatched: Vec<u32>,
}

impl Matching {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

const FREE: u32 = u32::MAX;
const INF: u32 = u32::MAX;

/// Maximum matching of the `left` vertices (indices into `adj`) onto
/// `0..n_right`. Vertices and their neighbours are tried in the given
/// order, so the result is deterministic. Returns each left vertex's match.
pub fn hopcroft_karp(adj: &[Vec<u32>], left: &[u32], n_right: usize) -> Vec<Option<u32>> {
    let nl = left.len();
    let mut match_l = vec![FREE; nl];
    let mut match_r = vec![FREE; n_right];
    let mut dist = vec![INF; nl];
    let nbrs = |i: usize| &adj[left[i] as usize];

    loop {
        // Layer the graph from free left vertices.
        let mut q = VecDeque::new();
        for i in 0..nl {
            if match_l[i] == FREE {
                dist[i] = 0;
                q.push_back(i);
            } else {
                dist[i] = INF;
            }
        }
        let mut found = false;
        while let Some(i) = q.pop_front() {
            for &r in nbrs(i) {
                let j = match_r[r as usize];
                if j == FREE {
                    found = true;
                } else if dist[j as usize] == INF {
                    dist[j as usize] = dist[i] + 1;
                    q.push_back(j as usize);
                }
            }
        }
        if !found {
            break;
        }
        fn dfs(
            i: usize,
            adj: &[Vec<u32>],
            left: &[u32],
            match_l: &mut [u32],
            match_r: &mut [u32],
            dist: &mut [u32],
        ) -> bool {
            for &r in &adj[left[i] as usize] {
                let j = match_r[r as usize];
                let ok = j == FREE
                    || (dist[j as usize] == dist[i] + 1
                        && dfs(j as usize, adj, left, match_l, match_r, dist));
                if ok {
                    match_l[i] = r;
                    match_r[r as usize] = i as u32;
                    return true;
                }
            }
            dist[i] = INF;
            false
        }
        for i in 0..nl {
            if match_l[i] == FREE {
                dfs(i, adj, left, &mut match_l, &mut match_r, &mut dist);
            }
        }
    }
    match_l
        .into_iter()
        .map(|m| (m != FREE).then_some(m))
        .collect()
}

/// Matches the requested signals (by name) onto trace inputs. Requests may
/// exceed the number of trace inputs; duplicates are ignored.
pub fn select_signals<S: AsRef<str>>(
    bip: &BipartiteConnectivity,
    requested: &[S],
) -> Result<Matching> {
    let ids: HashMap<&str, u32> = bip
        .signals
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i as u32))
        .collect();
    let mut left = Vec::with_capacity(requested.len());
    for r in requested {
        let name = r.as_ref();
        match ids.get(name) {
            Some(&id) => left.push(id),
            None => return Err(Error::UnknownSignal(name.to_string())),
        }
    }
    left.sort_unstable();
    left.dedup();
    let m = hopcroft_karp(&bip.adj, &left, bip.trace_inputs.len());
    let mut pairs = Vec::new();
    let mut unmatched = Vec::new();
    for (i, r) in m.into_iter().enumerate() {
        match r {
            Some(r) => pairs.push((left[i], r)),
            None => unmatched.push(left[i]),
        }
    }
    Ok(Matching { pairs, unmatched })
}

/// Whether an augmenting path exists from some unmatched requested signal.
/// A `false` answer certifies that `matching` is maximum (Berge).
pub fn has_augmenting_path(bip: &BipartiteConnectivity, matching: &Matching) -> bool {
    let mut match_r = vec![FREE; bip.trace_inputs.len()];
    let mut in_set = vec![false; bip.signals.len()];
    for &(s, t) in &matching.pairs {
        match_r[t as usize] = s;
        in_set[s as usize] = true;
    }
    for &s in &matching.unmatched {
        in_set[s as usize] = true;
    }
    let mut seen_r = vec![false; bip.trace_inputs.len()];
    let mut q: VecDeque<u32> = matching.unmatched.iter().copied().collect();
    while let Some(s) = q.pop_front() {
        for &t in &bip.adj[s as usize] {
            if seen_r[t as usize] {
                continue;
            }
            seen_r[t as usize] = true;
            let owner = match_r[t as usize];
            if owner == FREE {
                return true;
            }
            if in_set[owner as usize] {
                q.push_back(owner);
            }
        }
    }
    false
}
