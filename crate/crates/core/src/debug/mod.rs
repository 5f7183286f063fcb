// SPDX-License-Identifier: Apache-2.0
//! Debug-time configuration of the trace overlay: fold the forest into a
//! bipartite graph, match requested signals to trace inputs, and set the
//! multiplexer selects that realize the matching.

mod config;
mod fold;
mod matching;

pub use config::{emit_mux_config, simulate_config, DebugConfig, MatchPair, MuxSelect};
pub use fold::{fold_to_bipartite, BipartiteConnectivity};
pub use matching::{has_augmenting_path, hopcroft_karp, select_signals, Matching};
