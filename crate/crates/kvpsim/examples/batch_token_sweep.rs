//! Speedup surface over batch size and sequence length, as CSV.
//!
//! On the deliberately small hardware preset the prefetch speedup grows with
//! sequence length (the cold start amortizes away) and stops growing once
//! the batch pushes the per-iteration working set past the L2 residency
//! bound.
//!
//! Run with: cargo run --release --example batch_token_sweep

use kvpsim::config::{preset_hardware, ModelConfig, Scenario, VariantKind, WorkloadConfig};
use kvpsim::kernelsim::run_kernel;
use kvpsim::kvlayout::l2_residency_bound;

fn main() {
    // Four-head MHA toy model: one batch's per-iteration set is 64 KiB,
    // so the 256 KiB L2 holds four batches.
    let model = ModelConfig {
        bytes_per_param: 2,
        head_dim: 128,
        tokens_per_block: 16,
        threads_per_block: 128,
        q_heads: 4,
        kv_heads: 4,
    };
    let hardware = preset_hardware("custom-small").unwrap();
    eprintln!(
        "residency bound: {} batches",
        l2_residency_bound(&model, &hardware)
    );

    println!("batch,output_tokens,duration_baseline,duration_prefetch,speedup");
    for batch in [1u64, 2, 4, 6, 8] {
        for tokens in [512u64, 1024, 2048, 4096] {
            let mut scenario = Scenario {
                model,
                hardware,
                workload: WorkloadConfig::with_defaults(&model, batch, tokens),
                variant: Default::default(),
            };
            let baseline = run_kernel(&scenario).unwrap();
            scenario.variant.kind = VariantKind::PrefetchKv;
            let prefetch = run_kernel(&scenario).unwrap();
            println!(
                "{batch},{tokens},{},{},{:.6}",
                baseline.duration_cycles,
                prefetch.duration_cycles,
                baseline.duration_cycles as f64 / prefetch.duration_cycles as f64
            );
        }
    }
}
