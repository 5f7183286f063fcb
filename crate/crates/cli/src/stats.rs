// SPDX-License-Identifier: Apache-2.0
//! Project summary over whichever artifacts exist.

use anyhow::Result;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use debugfabric_core::circuits::{parse_netlist, BlockKind};
use debugfabric_core::debug::DebugConfig;
use debugfabric_core::fabric::ArchSpec;
use debugfabric_core::pnr::{MinWidthResult, Routing};
use debugfabric_core::trigger::{OverlayFabric, TriggerMapping};

use crate::commands::{Done, OverlayReport};
use crate::project::*;
use crate::Status;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetlistStats {
    pub name: String,
    pub luts: usize,
    pub ffs: usize,
    pub inputs: usize,
    pub outputs: usize,
    pub nets: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchStats {
    pub grid: [usize; 2],
    pub clb_slots: usize,
    pub lut_size_k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingStats {
    pub channel_width: usize,
    pub w_min: Option<usize>,
    pub nets: usize,
    pub routed_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayStats {
    pub signals: usize,
    pub connected: usize,
    pub fraction_connected: f64,
    pub trees: usize,
    pub fanout_target: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FabricSummary {
    pub cells: usize,
    pub slots: usize,
    pub links: usize,
    pub link_budget: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebugStats {
    pub matched: usize,
    pub unmatched: usize,
    pub mux_selects: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerSummary {
    pub trigger: String,
    pub feasible: bool,
    pub cost: i64,
    pub blocked_terms: usize,
    pub failed_inputs: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProjectStats {
    pub netlist: Option<NetlistStats>,
    pub arch: Option<ArchStats>,
    pub routing: Option<RoutingStats>,
    pub overlay: Option<OverlayStats>,
    pub trigger_fabric: Option<FabricSummary>,
    pub debug_config: Option<DebugStats>,
    pub trigger_config: Option<TriggerSummary>,
}

/// Flattens a JSON object into `section.key  value` rows.
pub fn table(v: &Value) -> String {
    fn walk(prefix: &str, v: &Value, rows: &mut Vec<(String, String)>) {
        match v {
            Value::Object(m) => {
                for (k, x) in m {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&key, x, rows);
                }
            }
            Value::Null => {}
            Value::Number(n) if n.is_f64() => rows.push((prefix.into(), format!("{:.4}", n.as_f64().unwrap_or(0.0)))),
            other => rows.push((prefix.into(), other.to_string().trim_matches('"').to_string())),
        }
    }
    let mut rows = Vec::new();
    walk("", v, &mut rows);
    let w = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
    rows.iter().map(|(k, v)| format!("{k:<w$}  {v}\n")).collect()
}

pub(crate) fn project_stats(p: &mut Project, as_table: bool) -> Result<Done> {
    let mut s = ProjectStats::default();
    if p.exists(NETLIST) {
        let n = parse_netlist(&p.read_text(NETLIST)?, NETLIST)?;
        s.netlist = Some(NetlistStats {
            name: n.name.clone(),
            luts: n.count(BlockKind::Lut),
            ffs: n.count(BlockKind::Ff),
            inputs: n.count(BlockKind::Input),
            outputs: n.count(BlockKind::Output),
            nets: n.nets.len(),
        });
    }
    if p.exists(ARCH) {
        let a: ArchSpec = p.read_json(ARCH)?;
        s.arch = Some(ArchStats {
            grid: [a.grid_width, a.grid_height],
            clb_slots: a.clb_slot_count(),
            lut_size_k: a.lut_size_k,
        });
    }
    if p.exists(ROUTING) {
        let r: Routing = p.read_json(ROUTING)?;
        let w_min = if p.exists(MINW) { Some(p.read_json::<MinWidthResult>(MINW)?.w_min) } else { None };
        s.routing = Some(RoutingStats {
            channel_width: r.channel_width,
            w_min,
            nets: r.nets.len(),
            routed_nodes: r.used_nodes().count(),
        });
    }
    if p.exists(OVERLAY_REPORT) {
        let o: OverlayReport = p.read_json(OVERLAY_REPORT)?;
        let c = &o.connectivity;
        s.overlay = Some(OverlayStats {
            signals: c.signals,
            connected: c.connected,
            fraction_connected: c.fraction_connected,
            trees: c.trees,
            fanout_target: o.params.fanout_target,
        });
    }
    if p.exists(TRIGGER_FABRIC) {
        let f: OverlayFabric = p.read_json(TRIGGER_FABRIC)?;
        s.trigger_fabric = Some(FabricSummary {
            cells: f.cells.len(),
            slots: f.total_slots(),
            links: f.links.len(),
            link_budget: f.link_budget,
        });
    }
    if p.exists(DEBUG_CONFIG) {
        let c: DebugConfig = p.read_json(DEBUG_CONFIG)?;
        s.debug_config = Some(DebugStats {
            matched: c.matching.len(),
            unmatched: c.unmatched.len(),
            mux_selects: c.mux_selects.len(),
        });
    }
    if p.exists(TRIGGER_CONFIG) {
        let m: TriggerMapping = p.read_json(TRIGGER_CONFIG)?;
        s.trigger_config = Some(TriggerSummary {
            trigger: m.trigger.clone(),
            feasible: m.feasible,
            cost: m.cost,
            blocked_terms: m.blocked_terms,
            failed_inputs: m.failed_inputs.len(),
        });
    }
    p.write_json(STATS, &s)?;
    let mut v = serde_json::to_value(&s)?;
    if as_table {
        let t = table(&v);
        if let Value::Object(m) = &mut v {
            m.insert("table".into(), Value::String(t));
        }
    }
    Ok((Status::Success, v))
}
