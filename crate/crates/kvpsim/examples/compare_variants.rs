//! Baseline vs prefetch variants on the same scenario, side by side.
//!
//! The K-only variant hides the QK-phase loads; prefetching V blocks too
//! hides both phases and roughly halves the duration at these defaults.
//!
//! Run with: cargo run --example compare_variants

use kvpsim::config::{Scenario, VariantKind};
use kvpsim::kernelsim::run_kernel;
use kvpsim::metrics::{derive_metrics, render_table, speedup, MetricSet};

fn main() {
    let base = Scenario::preset("llama2-7b", 1, 4096).unwrap();
    let mut columns: Vec<(String, MetricSet)> = Vec::new();
    for kind in [
        VariantKind::Baseline,
        VariantKind::PrefetchK,
        VariantKind::PrefetchKv,
    ] {
        let s = base.clone().with_variant(kind);
        let report = run_kernel(&s).unwrap();
        columns.push((kind.to_string(), derive_metrics(&report, &s.hardware)));
    }
    let reference = columns[0].1;
    for (_, m) in columns.iter_mut() {
        m.speedup = Some(speedup(&reference, m));
    }
    let refs: Vec<(&str, &MetricSet)> = columns.iter().map(|(n, m)| (n.as_str(), m)).collect();
    print!("{}", render_table(&refs));
}
