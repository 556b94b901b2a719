//! Drive the memory hierarchy directly: loads, a prefetch, and the JSON-lines
//! event trace on stdout.
//!
//! Run with: cargo run --example memory_trace

use kvpsim::config::{preset_hardware, EvictionPriority};
use kvpsim::memsim::MemoryHierarchy;

fn main() {
    let mut hw = preset_hardware("custom-small").unwrap();
    hw.bw_hbm = 512;
    hw.bw_l2 = 2048;
    let mut mem = MemoryHierarchy::new(&hw);
    mem.set_trace(Some(Box::new(std::io::stdout())));

    // Cold 4 KiB load: every line misses to HBM.
    let cold = mem.demand_load(0, 0, 4096);
    mem.drain();
    eprintln!("cold load completed at cycle {:?}", mem.completion_of(cold));

    // Prefetch the next block, let it land, then load it: pure L2 hits.
    mem.prefetch_l2(4096, 4096, EvictionPriority::Normal);
    mem.drain();
    let warm = mem.demand_load(0, 4096, 4096);
    mem.drain();
    eprintln!(
        "prefetched load issued at its probe cycle, completed at {:?} (L2 latency {})",
        mem.completion_of(warm),
        hw.lat_l2
    );

    let c = mem.counters();
    eprintln!(
        "counters: l2 demand {}/{} hits, HBM bytes {} demand + {} prefetch",
        c.l2_demand_hits, c.l2_demand_probes, c.hbm_demand_bytes, c.hbm_prefetch_bytes
    );
}
