//! Parse a scenario document, apply overrides, render it back.
//!
//! Run with: cargo run --example scenario_files

use kvpsim::config::{apply_override, parse_scenario, scenario_from_value};

const DOC: &str = r#"{
  "model": {"preset": "llama3-8b"},
  "hardware": {"preset": "h20", "l2_capacity": 262144},
  "workload": {"batch": 2, "seq_len": 1024,
               "allocation_policy": {"policy": "shuffled", "seed": 7}},
  "variant": {"kind": "prefetch_kv", "eviction_priority": "evict_first"}
}"#;

fn main() {
    let scenario = parse_scenario(DOC).unwrap();
    println!(
        "parsed: {} q-heads / {} kv-heads, batch {}, {} tokens, variant {}",
        scenario.model.q_heads,
        scenario.model.kv_heads,
        scenario.workload.batch,
        scenario.workload.seq_len,
        scenario.variant.kind,
    );

    // The same override mechanism the CLI exposes as --set.
    let mut doc: serde_json::Value = serde_json::from_str(DOC).unwrap();
    apply_override(&mut doc, "workload.batch=8").unwrap();
    apply_override(&mut doc, "variant.kind=baseline").unwrap();
    let overridden = scenario_from_value(&doc).unwrap();
    println!(
        "overridden: batch {}, variant {}",
        overridden.workload.batch, overridden.variant.kind
    );

    // Round trip: the rendered form parses back to the identical scenario.
    let rendered = overridden.render();
    assert_eq!(parse_scenario(&rendered).unwrap(), overridden);
    println!("\ncanonical form:\n{rendered}");
}
