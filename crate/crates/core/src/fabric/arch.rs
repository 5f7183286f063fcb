// SPDX-License-Identifier: Apache-2.0
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of I/O pads in every perimeter tile.
pub const IO_PADS_PER_TILE: usize = 4;

/// Largest LUT the truth-table representation supports.
pub const MAX_LUT_INPUTS: usize = 6;

/// Parameters of an island-style FPGA.
///
/// The core grid holds `grid_width` CLB columns. Trace-buffer columns are
/// interleaved: counting core columns from 1, every column whose index is a
/// multiple of `tb_column_period` is a trace-buffer column, and columns are
/// emitted until `grid_width` CLB columns exist. I/O tiles ring the core.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchSpec {
    pub grid_width: usize,
    pub grid_height: usize,
    pub lut_size_k: usize,
    pub bles_per_clb: usize,
    pub clb_inputs: usize,
    pub channel_width_w: usize,
    pub fc_in: f64,
    pub fc_out: f64,
    pub tb_column_period: usize,
    pub tb_inputs_per_block: usize,
    pub tb_fc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Clb,
    TraceBuffer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TileKind {
    Clb,
    TraceBuffer,
    Io,
    Empty,
}

impl Default for ArchSpec {
    fn default() -> Self {
        ArchSpec {
            grid_width: 8,
            grid_height: 8,
            lut_size_k: 4,
            bles_per_clb: 4,
            clb_inputs: 12,
            channel_width_w: 16,
            fc_in: 0.5,
            fc_out: 1.0,
            tb_column_period: 4,
            tb_inputs_per_block: 8,
            tb_fc: 0.5,
        }
    }
}

impl ArchSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if self.grid_width == 0 || self.grid_height == 0 {
            return bad(format!(
                "grid must be at least 1x1, got {}x{}",
                self.grid_width, self.grid_height
            ));
        }
        if self.channel_width_w < 2 || self.channel_width_w % 2 != 0 {
            return bad(format!(
                "channel_width_w must be even and >= 2, got {}",
                self.channel_width_w
            ));
        }
        if !(2..=MAX_LUT_INPUTS).contains(&self.lut_size_k) {
            return bad(format!(
                "lut_size_k must be in 2..={MAX_LUT_INPUTS}, got {}",
                self.lut_size_k
            ));
        }
        for (name, fc) in [
            ("fc_in", self.fc_in),
            ("fc_out", self.fc_out),
            ("tb_fc", self.tb_fc),
        ] {
            if !(fc > 0.0 && fc <= 1.0) {
                return bad(format!("{name} must be in (0, 1], got {fc}"));
            }
        }
        if self.bles_per_clb == 0 {
            return bad("bles_per_clb must be >= 1".into());
        }
        if self.clb_inputs == 0 {
            return bad("clb_inputs must be >= 1".into());
        }
        if self.tb_column_period < 2 {
            return bad(format!(
                "tb_column_period must be >= 2, got {}",
                self.tb_column_period
            ));
        }
        if self.tb_inputs_per_block == 0 {
            return bad("tb_inputs_per_block must be >= 1".into());
        }
        Ok(())
    }

    pub fn with_channel_width(&self, w: usize) -> ArchSpec {
        ArchSpec {
            channel_width_w: w,
            ..self.clone()
        }
    }

    /// Core column kinds, left to right (core column `i` sits at x = i + 1).
    pub fn columns(&self) -> Vec<ColumnKind> {
        let mut cols = Vec::new();
        let mut clbs = 0;
        let mut pos = 1;
        while clbs < self.grid_width {
            if pos % self.tb_column_period == 0 {
                cols.push(ColumnKind::TraceBuffer);
            } else {
                cols.push(ColumnKind::Clb);
                clbs += 1;
            }
            pos += 1;
        }
        cols
    }

    /// Number of core columns (CLB plus trace-buffer).
    pub fn core_columns(&self) -> usize {
        self.columns().len()
    }

    pub fn tile_kind(&self, x: usize, y: usize) -> TileKind {
        let cols = self.core_columns();
        let h = self.grid_height;
        let on_x_edge = x == 0 || x == cols + 1;
        let on_y_edge = y == 0 || y == h + 1;
        if x > cols + 1 || y > h + 1 || (on_x_edge && on_y_edge) {
            return TileKind::Empty;
        }
        if on_x_edge || on_y_edge {
            return TileKind::Io;
        }
        match self.columns()[x - 1] {
            ColumnKind::Clb => TileKind::Clb,
            ColumnKind::TraceBuffer => TileKind::TraceBuffer,
        }
    }

    /// CLB tile coordinates in row-major order (y outer, x inner).
    pub fn clb_tiles(&self) -> Vec<(usize, usize)> {
        let cols = self.columns();
        let mut out = Vec::new();
        for y in 1..=self.grid_height {
            for (i, c) in cols.iter().enumerate() {
                if *c == ColumnKind::Clb {
                    out.push((i + 1, y));
                }
            }
        }
        out
    }

    /// I/O tile coordinates: left and right columns, then bottom and top rows.
    pub fn io_tiles(&self) -> Vec<(usize, usize)> {
        let cols = self.core_columns();
        let h = self.grid_height;
        let mut out = Vec::new();
        for y in 1..=h {
            out.push((0, y));
            out.push((cols + 1, y));
        }
        for x in 1..=cols {
            out.push((x, 0));
            out.push((x, h + 1));
        }
        out
    }

    pub fn tb_tiles(&self) -> Vec<(usize, usize)> {
        let cols = self.columns();
        let mut out = Vec::new();
        for y in 1..=self.grid_height {
            for (i, c) in cols.iter().enumerate() {
                if *c == ColumnKind::TraceBuffer {
                    out.push((i + 1, y));
                }
            }
        }
        out
    }

    pub fn clb_slot_count(&self) -> usize {
        self.grid_width * self.grid_height * self.bles_per_clb
    }

    pub fn io_slot_count(&self) -> usize {
        self.io_tiles().len() * IO_PADS_PER_TILE
    }

    /// Tracks a pin connects to for a connection-block fraction `fc`.
    pub fn tracks_for(&self, fc: f64) -> usize {
        let w = self.channel_width_w;
        ((fc * w as f64).round() as usize).clamp(1, w)
    }
}

/// Smallest even width that is at least `(1 + margin) * w_min`.
pub fn margin_width(w_min: usize, margin: f64) -> usize {
    let target = ((1.0 + margin) * w_min as f64 - 1e-9).ceil() as usize;
    let target = target.max(2);
    target + target % 2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        ArchSpec::default().validate().unwrap();
    }

    #[test]
    fn rejects_degenerate_parameters() {
        let base = ArchSpec::default();
        let cases = [
            ArchSpec {
                grid_width: 0,
                ..base.clone()
            },
            ArchSpec {
                grid_height: 0,
                ..base.clone()
            },
            ArchSpec {
                channel_width_w: 0,
                ..base.clone()
            },
            ArchSpec {
                channel_width_w: 3,
                ..base.clone()
            },
            ArchSpec {
                fc_in: 0.0,
                ..base.clone()
            },
            ArchSpec {
                fc_out: 1.5,
                ..base.clone()
            },
            ArchSpec {
                tb_fc: 0.0,
                ..base.clone()
            },
            ArchSpec {
                lut_size_k: 1,
                ..base.clone()
            },
            ArchSpec {
                tb_column_period: 1,
                ..base.clone()
            },
        ];
        for c in cases {
            assert!(matches!(c.validate(), Err(Error::Validation(_))), "{c:?}");
        }
    }

    #[test]
    fn trace_buffer_columns_never_adjacent() {
        let arch = ArchSpec {
            grid_width: 12,
            tb_column_period: 2,
            ..ArchSpec::default()
        };
        let cols = arch.columns();
        assert_eq!(cols.iter().filter(|c| **c == ColumnKind::Clb).count(), 12);
        for pair in cols.windows(2) {
            assert!(!(pair[0] == ColumnKind::TraceBuffer && pair[1] == ColumnKind::TraceBuffer));
        }
        assert_eq!(cols.first(), Some(&ColumnKind::Clb));
        assert_eq!(cols.last(), Some(&ColumnKind::Clb));
    }

    #[test]
    fn single_column_has_no_trace_buffer() {
        let arch = ArchSpec {
            grid_width: 1,
            grid_height: 1,
            ..ArchSpec::default()
        };
        assert_eq!(arch.columns(), vec![ColumnKind::Clb]);
        assert!(arch.tb_tiles().is_empty());
    }

    #[test]
    fn margin_width_rounds_up_to_even() {
        assert_eq!(margin_width(10, 0.3), 14);
        assert_eq!(margin_width(20, 0.3), 26);
        assert_eq!(margin_width(2, 0.3), 4);
        assert_eq!(margin_width(8, 0.0), 8);
    }

    #[test]
    fn json_uses_exact_field_names() {
        let json = serde_json::to_value(ArchSpec::default()).unwrap();
        let keys: Vec<_> = json.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys.len(), 11);
        for k in [
            "grid_width",
            "grid_height",
            "lut_size_k",
            "bles_per_clb",
            "clb_inputs",
            "channel_width_w",
            "fc_in",
            "fc_out",
            "tb_column_period",
            "tb_inputs_per_block",
            "tb_fc",
        ] {
            assert!(keys.contains(&k.to_string()), "{k}");
        }
        let extra = r#"{"grid_width":1,"grid_height":1,"lut_size_k":4,"bles_per_clb":1,
            "clb_inputs":4,"channel_width_w":2,"fc_in":1,"fc_out":1,"tb_column_period":2,
            "tb_inputs_per_block":1,"tb_fc":1,"bogus":3}"#;
        assert!(serde_json::from_str::<ArchSpec>(extra).is_err());
    }
}
