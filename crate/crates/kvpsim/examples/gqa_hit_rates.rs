//! Baseline L2 hit rate as a function of the query:KV head ratio.
//!
//! Grouped-query models share one KV block across several query heads whose
//! thread blocks run concurrently, so the first one fetches and the rest hit.
//! Multi-head attention (1:1) shares nothing and streams straight past the
//! cache. Stalls stay high either way: a hit on an in-flight fill still
//! waits for the data.
//!
//! Run with: cargo run --example gqa_hit_rates

use kvpsim::config::Scenario;
use kvpsim::kernelsim::run_kernel;
use kvpsim::metrics::derive_metrics;

fn main() {
    println!("model         q:kv    L2 hit rate   stall/instr");
    for name in ["llama2-7b", "llama3-8b", "qwen2.5-14b", "qwen2.5-7b"] {
        let scenario = Scenario::preset(name, 3, 2048).unwrap();
        let ratio = scenario.model.q_heads / scenario.model.kv_heads;
        let report = run_kernel(&scenario).unwrap();
        let m = derive_metrics(&report, &scenario.hardware);
        println!(
            "{name:12}  {ratio}:1   {:>9.2} %   {:>9.2}",
            m.l2_hit_rate.unwrap() * 100.0,
            m.stall_long_scoreboard.unwrap(),
        );
    }
}
