//! Deterministic random trace generation for the oracle equivalence and
//! property suites. Traces stay within a small line space (at most 64 lines)
//! so cache behavior is exercised densely.

use kvpsim::config::{EvictionPriority, HardwareConfig};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
pub enum TraceOp {
    Load {
        sm: usize,
        addr: u64,
        len: u64,
    },
    Prefetch {
        addr: u64,
        len: u64,
        prio: EvictionPriority,
    },
    Advance {
        cycles: u64,
    },
}

#[derive(Debug, Clone)]
pub struct TraceCase {
    pub hw: HardwareConfig,
    pub ops: Vec<TraceOp>,
    /// Distinct lines the ops may touch.
    pub line_space: u64,
}

fn gen_hardware(rng: &mut ChaCha8Rng) -> HardwareConfig {
    let line_size = *[64u64, 128].select(rng);
    let lat_l1 = rng.gen_range(1..=6);
    let lat_l2 = rng.gen_range(lat_l1 + 1..=20);
    let lat_hbm = rng.gen_range(lat_l2 + 1..=60);
    let bw_hbm = *[
        line_size / 4,
        line_size / 2,
        line_size,
        2 * line_size,
        5 * line_size,
    ]
    .select(rng);
    HardwareConfig {
        l1_capacity: line_size * rng.gen_range(2..=8),
        l2_capacity: line_size * rng.gen_range(4..=64),
        line_size,
        lat_l1,
        lat_l2,
        lat_hbm,
        bw_l2: bw_hbm * 4,
        bw_hbm,
        sm_count: rng.gen_range(1..=3),
        max_blocks_per_sm: 1,
        prefetch_queue_depth: rng.gen_range(0..=4),
        hbm_capacity: 1 << 30,
    }
}

trait Select<T> {
    fn select(&self, rng: &mut ChaCha8Rng) -> &T;
}

impl<T> Select<T> for [T] {
    fn select(&self, rng: &mut ChaCha8Rng) -> &T {
        &self[rng.gen_range(0..self.len())]
    }
}

/// Random trace over at most 64 lines; `max_ops` bounds the op count.
pub fn gen_case(seed: u64, max_ops: usize) -> TraceCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hw = gen_hardware(&mut rng);
    let line_space = rng.gen_range(4..=64);
    let space_bytes = line_space * hw.line_size;
    let op_count = rng.gen_range(max_ops / 4..=max_ops).max(4);
    let mut ops = Vec::with_capacity(op_count);
    for _ in 0..op_count {
        let roll = rng.gen_range(0..100);
        if roll < 55 {
            let len = rng.gen_range(1..=4 * hw.line_size).min(space_bytes);
            let addr = rng.gen_range(0..=space_bytes - len);
            ops.push(TraceOp::Load {
                sm: rng.gen_range(0..hw.sm_count as usize),
                addr,
                len,
            });
        } else if roll < 80 {
            let len = rng.gen_range(1..=4 * hw.line_size).min(space_bytes);
            let addr = rng.gen_range(0..=space_bytes - len);
            let prio = if rng.gen_bool(0.5) {
                EvictionPriority::EvictFirst
            } else {
                EvictionPriority::Normal
            };
            ops.push(TraceOp::Prefetch { addr, len, prio });
        } else {
            ops.push(TraceOp::Advance {
                cycles: rng.gen_range(1..=40),
            });
        }
    }
    TraceCase {
        hw,
        ops,
        line_space,
    }
}

/// Trace whose total touched footprint fits both caches on a single SM and
/// whose loads are spaced far enough apart to settle: the regime in which
/// prefetching must never slow a demand load down.
pub fn gen_safety_case(seed: u64) -> (TraceCase, TraceCase) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let line_size = 128u64;
    let cap_lines = rng.gen_range(8..=24);
    let bw_hbm = *[64u64, 128, 256].select(&mut rng);
    let hw = HardwareConfig {
        l1_capacity: line_size * cap_lines,
        l2_capacity: line_size * cap_lines,
        line_size,
        lat_l1: 2,
        lat_l2: rng.gen_range(5..=15),
        lat_hbm: rng.gen_range(30..=80),
        bw_l2: bw_hbm * 4,
        bw_hbm,
        sm_count: 1,
        max_blocks_per_sm: 1,
        prefetch_queue_depth: 64,
        hbm_capacity: 1 << 30,
    };
    let op_count = rng.gen_range(20..=120);
    let mut with_prefetch = Vec::new();
    let mut without = Vec::new();
    let space_bytes = cap_lines * line_size;
    for _ in 0..op_count {
        let roll = rng.gen_range(0..100);
        if roll < 45 {
            let len = rng.gen_range(1..=2 * line_size).min(space_bytes);
            let addr = rng.gen_range(0..=space_bytes - len);
            let op = TraceOp::Load { sm: 0, addr, len };
            with_prefetch.push(op);
            without.push(op);
        } else if roll < 75 {
            let len = rng.gen_range(1..=2 * line_size).min(space_bytes);
            let addr = rng.gen_range(0..=space_bytes - len);
            let prio = if rng.gen_bool(0.5) {
                EvictionPriority::EvictFirst
            } else {
                EvictionPriority::Normal
            };
            with_prefetch.push(TraceOp::Prefetch { addr, len, prio });
        } else {
            let cycles = rng.gen_range(1..=60);
            with_prefetch.push(TraceOp::Advance { cycles });
            without.push(TraceOp::Advance { cycles });
        }
    }
    (
        TraceCase {
            hw,
            ops: with_prefetch,
            line_space: cap_lines,
        },
        TraceCase {
            hw,
            ops: without,
            line_space: cap_lines,
        },
    )
}
