//! Derived performance metrics and variant comparison.

use crate::config::HardwareConfig;
use crate::kernelsim::SimReport;
use serde::Serialize;

/// Profiler-style summary of one run. Ratios with an empty denominator are
/// `None` (rendered as `null` / `n/a`), never zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricSet {
    pub duration_cycles: f64,
    /// Busy compute warp-cycles over resident warp slot cycles, 0..1.
    pub compute_throughput: Option<f64>,
    /// HBM bytes (demand + prefetch) over the channel's capacity, 0..1.
    pub memory_throughput: Option<f64>,
    /// Same, demand traffic only.
    pub memory_throughput_demand: Option<f64>,
    pub l1_hit_rate: Option<f64>,
    pub l2_hit_rate: Option<f64>,
    pub cpi: Option<f64>,
    /// Long-scoreboard stall cycles per instruction.
    pub stall_long_scoreboard: Option<f64>,
    /// Duration ratio against a named baseline; set by comparisons.
    pub speedup: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den != 0).then(|| num as f64 / den as f64)
}

// Transfers still draining when the last warp retires are folded into the
// final cycle, so utilization is capped at the channel's capacity.
fn utilization(bytes: u64, capacity: u64) -> Option<f64> {
    ratio(bytes, capacity).map(|r| r.min(1.0))
}

pub fn derive_metrics(r: &SimReport, hw: &HardwareConfig) -> MetricSet {
    let active = r.issue_cycles
        + r.compute_busy_cycles
        + r.stall_long_scoreboard_cycles
        + r.stall_other_cycles;
    let channel_bytes = r.duration_cycles.saturating_mul(hw.bw_hbm);
    MetricSet {
        duration_cycles: r.duration_cycles as f64,
        compute_throughput: ratio(
            r.compute_busy_cycles,
            r.duration_cycles.saturating_mul(r.resident_warp_slots),
        ),
        memory_throughput: utilization(
            r.mem.hbm_demand_bytes + r.mem.hbm_prefetch_bytes,
            channel_bytes,
        ),
        memory_throughput_demand: utilization(r.mem.hbm_demand_bytes, channel_bytes),
        l1_hit_rate: ratio(r.mem.l1_demand_hits, r.mem.l1_demand_probes),
        l2_hit_rate: ratio(r.mem.l2_demand_hits, r.mem.l2_demand_probes),
        cpi: ratio(active, r.instructions),
        stall_long_scoreboard: ratio(r.stall_long_scoreboard_cycles, r.instructions),
        speedup: None,
    }
}

/// Duration ratio of `baseline` over `optimized`; above 1 means faster.
pub fn speedup(baseline: &MetricSet, optimized: &MetricSet) -> f64 {
    assert!(baseline.duration_cycles > 0.0 && optimized.duration_cycles > 0.0);
    baseline.duration_cycles / optimized.duration_cycles
}

/// End-to-end speedup when only a fraction of total time is accelerated:
/// `1 / ((1 - f) + f / s)`.
pub fn amdahl_e2e(kernel_speedup: f64, attention_fraction: f64) -> f64 {
    assert!(kernel_speedup > 0.0);
    assert!((0.0..=1.0).contains(&attention_fraction));
    1.0 / ((1.0 - attention_fraction) + attention_fraction / kernel_speedup)
}

const TABLE_ROWS: usize = 7;

fn fmt_pct(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{:.2}", x * 100.0))
}

fn fmt2(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.2}"))
}

fn row_values(m: &MetricSet) -> [String; TABLE_ROWS] {
    [
        format!("{:.0}", m.duration_cycles),
        fmt_pct(m.compute_throughput),
        fmt_pct(m.memory_throughput),
        fmt_pct(m.l1_hit_rate),
        fmt_pct(m.l2_hit_rate),
        fmt2(m.cpi),
        fmt2(m.stall_long_scoreboard),
    ]
}

/// Plain-text table, one column per labeled metric set. A final speedup row
/// appears when any column carries one.
pub fn render_table(columns: &[(&str, &MetricSet)]) -> String {
    const LABELS: [&str; TABLE_ROWS] = [
        "Duration (cycles)",
        "Compute Throughput (%)",
        "Memory Throughput (%)",
        "L1 Hit Rate (%)",
        "L2 Hit Rate (%)",
        "Cycles Per Instruction (cycle)",
        "Stall Long Scoreboard (cycle)",
    ];
    let with_speedup = columns.iter().any(|(_, m)| m.speedup.is_some());
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut header = vec!["Metric".to_string()];
    header.extend(columns.iter().map(|(name, _)| name.to_string()));
    rows.push(header);
    for (i, label) in LABELS.iter().enumerate() {
        let mut row = vec![label.to_string()];
        for (_, m) in columns {
            row.push(row_values(m)[i].clone());
        }
        rows.push(row);
    }
    if with_speedup {
        let mut row = vec!["Speedup".to_string()];
        for (_, m) in columns {
            row.push(m.speedup.map_or_else(|| "-".into(), |s| format!("{s:.2}x")));
        }
        rows.push(row);
    }

    let cols = rows[0].len();
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap())
        .collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            if c > 0 {
                out.push_str("  ");
            }
            if c == 0 {
                out.push_str(&format!("{cell:<width$}", width = widths[c]));
            } else {
                out.push_str(&format!("{cell:>width$}", width = widths[c]));
            }
        }
        out.push('\n');
        if i == 0 {
            let total: usize = widths.iter().sum::<usize>() + 2 * (cols - 1);
            out.push_str(&"-".repeat(total));
            out.push('\n');
        }
    }
    out
}
