//! Block footprint and L2 residency analytics for every model preset.
//!
//! Run with: cargo run --example capacity_planning

use kvpsim::config::{preset_hardware, preset_model, MODEL_PRESETS};
use kvpsim::kvlayout::{capacity_report, l2_residency_bound};

fn main() {
    let h20 = preset_hardware("h20").unwrap();
    let small = preset_hardware("custom-small").unwrap();

    println!("model         block   per-iter/batch   bound(h20)  bound(custom-small)");
    for name in MODEL_PRESETS {
        let model = preset_model(name).unwrap();
        let report = capacity_report(&model, &h20, 1);
        println!(
            "{name:12} {:6} B {:10} B {:12} {:12}",
            report.m_block_bytes,
            report.m_total_per_batch_bytes,
            report.residency_bound_batches,
            l2_residency_bound(&model, &small),
        );
    }

    println!("\nFull report for llama2-7b at batch 64 on the 60 MB part:");
    let model = preset_model("llama2-7b").unwrap();
    let report = capacity_report(&model, &h20, 64);
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
}
