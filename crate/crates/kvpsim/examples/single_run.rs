//! Simulate one decode kernel launch and print its metrics table.
//!
//! Run with: cargo run --example single_run

use kvpsim::config::{Scenario, VariantKind};
use kvpsim::kernelsim::run_kernel;
use kvpsim::metrics::{derive_metrics, render_table};

fn main() {
    // Llama2-7B shape, 2 sequences at 2048 tokens, prefetching K and V.
    let scenario = Scenario::preset("llama2-7b", 2, 2048)
        .unwrap()
        .with_variant(VariantKind::PrefetchKv);

    let report = run_kernel(&scenario).unwrap();
    let metrics = derive_metrics(&report, &scenario.hardware);
    print!("{}", render_table(&[("prefetch_kv", &metrics)]));

    println!();
    println!("warps simulated: {}", report.warps.len());
    println!("instructions:    {}", report.instructions);
    println!(
        "HBM traffic:     {} B demand + {} B prefetch",
        report.mem.hbm_demand_bytes, report.mem.hbm_prefetch_bytes
    );
}
