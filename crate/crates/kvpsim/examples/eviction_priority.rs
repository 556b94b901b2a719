//! Effect of the evict-first tag on prefetched lines past the capacity bound.
//!
//! The scenario packs grouped query heads so one group straddles the wave
//! boundary: later thread blocks re-read blocks consumed by earlier ones.
//! Tagging prefetched data evict-first makes capacity overflow thrash the
//! unconsumed prefetch stream against itself instead of evicting the
//! consumed, still-useful lines.
//!
//! Run with: cargo run --example eviction_priority

use kvpsim::config::{
    preset_hardware, EvictionPriority, KernelVariant, ModelConfig, Scenario, VariantKind,
    WorkloadConfig,
};
use kvpsim::kernelsim::run_kernel;
use kvpsim::kvlayout::l2_residency_bound;

fn main() {
    let model = ModelConfig {
        bytes_per_param: 2,
        head_dim: 128,
        tokens_per_block: 16,
        threads_per_block: 128,
        q_heads: 12,
        kv_heads: 1,
    };
    let hardware = preset_hardware("custom-small").unwrap();
    let workload = WorkloadConfig::with_defaults(&model, 3, 512);
    println!(
        "batch {} vs residency bound {}",
        workload.batch,
        l2_residency_bound(&model, &hardware)
    );

    for priority in [EvictionPriority::Normal, EvictionPriority::EvictFirst] {
        let scenario = Scenario {
            model,
            hardware,
            workload,
            variant: KernelVariant {
                kind: VariantKind::PrefetchKv,
                eviction_priority: priority,
                prefetch_at_load_issue: false,
            },
        };
        let r = run_kernel(&scenario).unwrap();
        println!(
            "{priority:?}: L2 hit rate {:.2}%, duration {} cycles, evictions {}+{}",
            100.0 * r.mem.l2_demand_hits as f64 / r.mem.l2_demand_probes as f64,
            r.duration_cycles,
            r.mem.l2_evictions_normal,
            r.mem.l2_evictions_evict_first,
        );
    }
}
