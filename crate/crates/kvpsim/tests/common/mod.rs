//! Shared plumbing for the integration and acceptance suites.

#![allow(dead_code)]

pub mod reference;
pub mod traces;

use kvpsim::memsim::MemoryHierarchy;
use reference::{RefCounters, RefProbe, RefSim};
use std::sync::{Arc, Mutex};
use traces::{TraceCase, TraceOp};

/// `Write` sink capturing output for later inspection.
#[derive(Clone, Default)]
pub struct SharedBuf(pub Arc<Mutex<Vec<u8>>>);

impl std::io::Write for SharedBuf {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.lock().unwrap().extend_from_slice(buf);
        Ok(buf.len())
    }
    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

impl SharedBuf {
    pub fn contents(&self) -> String {
        String::from_utf8(self.0.lock().unwrap().clone()).unwrap()
    }
}

/// Demand-probe stream parsed back out of the production trace log.
fn demand_probes_from_trace(log: &str, line_size: u64) -> Vec<RefProbe> {
    log.lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).expect("valid trace json"))
        .filter(|v| v["kind"] == "demand")
        .map(|v| RefProbe {
            level: match v["level"].as_str().unwrap() {
                "l1" => 0,
                "l2" => 1,
                "hbm" => 2,
                other => panic!("unexpected level {other}"),
            },
            line: v["addr"].as_u64().unwrap() / line_size,
        })
        .collect()
}

/// Replays one trace on the production hierarchy and the naive reference,
/// asserting identical hit/miss streams, completion cycles, counters and
/// final resident sets.
pub fn assert_oracle_equivalence(case: &TraceCase) {
    let mut mem = MemoryHierarchy::new(&case.hw);
    let log = SharedBuf::default();
    mem.set_trace(Some(Box::new(log.clone())));
    let mut oracle = RefSim::new(&case.hw);

    let mut requests = Vec::new();
    for op in &case.ops {
        match *op {
            TraceOp::Load { sm, addr, len } => {
                let id = mem.demand_load(sm, addr, len);
                let rid = oracle.demand_load(sm, addr, len);
                requests.push((id, rid));
            }
            TraceOp::Prefetch { addr, len, prio } => {
                mem.prefetch_l2(addr, len, prio);
                oracle.prefetch_l2(addr, len, prio);
            }
            TraceOp::Advance { cycles } => {
                mem.advance(cycles);
                oracle.advance(cycles);
                assert_eq!(mem.clock(), oracle.clock(), "clock skew");
            }
        }
    }
    mem.drain();
    oracle.drain();
    assert!(!mem.has_inflight());
    assert!(oracle.quiescent(), "oracle not drained");

    // Hit/miss stream, line by line.
    let main_probes = demand_probes_from_trace(&log.contents(), case.hw.line_size);
    let ref_probes: Vec<RefProbe> = oracle.probes.iter().flatten().copied().collect();
    assert_eq!(main_probes, ref_probes, "demand probe streams differ");

    // Completion cycles of every demand request.
    for (id, rid) in &requests {
        assert_eq!(
            mem.completion_of(*id),
            oracle.completion_of(*rid),
            "completion of request {rid} differs"
        );
    }

    // Counters.
    let c = mem.counters();
    let r: &RefCounters = &oracle.counters;
    assert_eq!(c.l1_demand_probes, r.l1_demand_probes);
    assert_eq!(c.l1_demand_hits, r.l1_demand_hits);
    assert_eq!(c.l2_demand_probes, r.l2_demand_probes);
    assert_eq!(c.l2_demand_hits, r.l2_demand_hits);
    assert_eq!(c.l2_demand_misses, r.l2_demand_misses);
    assert_eq!(c.l2_prefetch_probes, r.l2_prefetch_probes);
    assert_eq!(c.l2_prefetch_hits, r.l2_prefetch_hits);
    assert_eq!(c.prefetch_fill_lines, r.prefetch_fill_lines);
    assert_eq!(c.hbm_demand_bytes, r.hbm_demand_bytes);
    assert_eq!(c.hbm_prefetch_bytes, r.hbm_prefetch_bytes);
    assert_eq!(c.dropped_prefetches, r.dropped_prefetches);

    // Byte conservation on the way out.
    assert_eq!(
        c.hbm_demand_bytes + c.hbm_prefetch_bytes,
        case.hw.line_size * (c.l2_demand_misses + c.prefetch_fill_lines)
    );

    // Final resident state, tags included.
    let main_l2: Vec<(u64, bool)> = mem
        .l2_cache()
        .entries()
        .into_iter()
        .map(|(line, prio)| (line, prio == kvpsim::config::EvictionPriority::EvictFirst))
        .collect();
    assert_eq!(main_l2, oracle.l2_lines_sorted(), "L2 resident sets differ");
    for sm in 0..case.hw.sm_count as usize {
        let main_l1: Vec<u64> = mem
            .l1_cache(sm)
            .entries()
            .into_iter()
            .map(|(l, _)| l)
            .collect();
        assert_eq!(
            main_l1,
            oracle.l1_lines_sorted(sm),
            "L1[{sm}] resident sets differ"
        );
    }
}
