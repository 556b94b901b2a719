//! Cycle-stepped model of the L1 / L2 / HBM hierarchy with demand loads,
//! non-blocking L2 prefetches, HBM bandwidth contention and segmented-LRU
//! eviction.
//!
//! # Timing semantics
//!
//! These rules are the contract; the naive reference simulator used by the
//! equivalence tests implements the same rules independently.
//!
//! Ordering within a cycle `c`: scheduled arrivals land first, then the
//! caller issues new requests, then the cycle's HBM bandwidth window drains
//! as the clock moves to `c + 1`. [`MemoryHierarchy::advance`] performs the
//! arrivals and the draining; issuing between advances is the caller's job.
//!
//! A demand load splits into `ceil(len / line_size)` line probes, classified
//! against the state at issue time:
//!
//! * L1 hit: line completes at `issue + lat_l1`.
//! * L1 miss, L2 resident: completes at `issue + lat_l2`; the line is
//!   installed into the issuing SM's L1 when it completes.
//! * L1 miss, L2 fill in flight with its bytes already off the channel
//!   (demand transfers, whose schedule is fixed at issue, and fully drained
//!   prefetches): counts as an L2 hit and completes at
//!   `max(issue + lat_l2, fill arrival)` - the waiting request is serviced
//!   by the arriving fill.
//! * L1 miss, line only covered by a still-draining prefetch: counts as an
//!   L2 miss. The load re-requests the line at demand priority rather than
//!   waiting on leftover bandwidth; the lagging prefetch arrival degrades to
//!   a recency touch. Prefetching therefore never delays a load beyond what
//!   fetching the data itself would cost.
//! * Double miss: all such lines of the request coalesce into a single
//!   store-and-forward HBM transfer; they complete, and install into L2
//!   (tag `normal`) and the SM's L1, at the transfer's arrival.
//!
//! The request handle completes at the maximum over its lines.
//!
//! The HBM channel moves `bw_hbm` bytes per cycle, demand traffic strictly
//! before prefetch traffic. Demand transfers occupy a FIFO byte stream:
//! a transfer issued at cycle `t` when the stream tail is at byte slot `tail`
//! occupies slots `[s, s + len)` with `s = max(tail, t * bw_hbm)`, and its
//! data arrives at cycle `(s + len) / bw_hbm + lat_hbm` (integer division).
//! A transfer no larger than one cycle's bandwidth therefore costs bare
//! `lat_hbm`; larger ones add their full serialization. Prefetch transfers
//! drain, FIFO among themselves, only from each cycle's leftover bandwidth,
//! and arrive at `end_slot / bw_hbm + lat_hbm` where `end_slot` is the slot
//! after their last drained byte. An arrival whose line was demand-fetched
//! in the meantime installs as a plain recency touch.
//!
//! Arrivals landing on the same cycle apply in a canonical order: HBM
//! transfer installs in transfer creation order, then L1 installs ordered by
//! (SM, line), then request completions ordered by request id.
//!
//! Prefetches never install into L1 and are excluded from the demand hit
//! counters. A prefetch of an L2-resident line refreshes its recency without
//! traffic; a line already in flight is skipped; issuing a prefetch when
//! `prefetch_queue_depth` transfers are already in flight drops it entirely.

mod lru;

pub use lru::TaggedLru;

use crate::config::{EvictionPriority, HardwareConfig};
use serde::Serialize;
use std::collections::{HashMap, VecDeque};
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RequestId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestKind {
    DemandLoad,
    PrefetchL2,
}

/// One issued memory request, for inspection and tracing.
#[derive(Debug, Clone, Copy)]
pub struct MemRequest {
    pub kind: RequestKind,
    pub addr: u64,
    pub len: u64,
    pub sm: usize,
    pub issue_cycle: u64,
    /// Completion cycle. Resolved eagerly at issue for demand loads.
    pub completion: Option<u64>,
}

/// Completion notice delivered by [`MemoryHierarchy::advance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Completion {
    pub request: RequestId,
    pub cycle: u64,
}

/// Event totals, split demand vs prefetch. All monotonically non-decreasing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MemCounters {
    pub l1_demand_probes: u64,
    pub l1_demand_hits: u64,
    pub l2_demand_probes: u64,
    pub l2_demand_hits: u64,
    pub l2_demand_misses: u64,
    pub l2_prefetch_probes: u64,
    pub l2_prefetch_hits: u64,
    /// Lines fetched from HBM on behalf of prefetches.
    pub prefetch_fill_lines: u64,
    /// Bytes requested by demand loads (independent of where they hit).
    pub demand_requested_bytes: u64,
    pub hbm_demand_bytes: u64,
    pub hbm_prefetch_bytes: u64,
    pub l1_fill_bytes: u64,
    pub l2_demand_fill_bytes: u64,
    pub l2_prefetch_fill_bytes: u64,
    pub l2_evictions_normal: u64,
    pub l2_evictions_evict_first: u64,
    pub prefetches_issued: u64,
    pub dropped_prefetches: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FillClass {
    Demand { sm: usize },
    Prefetch,
}

#[derive(Debug)]
struct Fill {
    lines: Vec<u64>,
    class: FillClass,
    prio: EvictionPriority,
    /// Undrained bytes; zero once the transfer has left the channel.
    remaining: u64,
    arrival: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ev {
    InstallFill(usize),
    InstallL1 { sm: usize, line: u64 },
    Complete(RequestId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Scheduled {
    cycle: u64,
    /// Canonical same-cycle ordering: fill installs by fill creation order,
    /// then L1 installs by (sm, line), then completions by request id.
    key: (u8, u64, u64),
    ev: Ev,
}

impl Scheduled {
    fn new(cycle: u64, ev: Ev) -> Self {
        let key = match ev {
            Ev::InstallFill(idx) => (0, idx as u64, 0),
            Ev::InstallL1 { sm, line } => (1, sm as u64, line),
            Ev::Complete(id) => (2, id.0, 0),
        };
        Scheduled { cycle, key, ev }
    }
}

impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // BinaryHeap is a max-heap; reverse for earliest-first.
        (other.cycle, other.key).cmp(&(self.cycle, self.key))
    }
}
impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

pub struct MemoryHierarchy {
    line_size: u64,
    lat_l1: u64,
    lat_l2: u64,
    lat_hbm: u64,
    bw_hbm: u64,
    prefetch_queue_depth: u64,
    clock: u64,
    l1: Vec<TaggedLru>,
    l2: TaggedLru,
    /// line -> index into `fills` for lines currently being fetched.
    in_flight: HashMap<u64, usize>,
    fills: Vec<Fill>,
    prefetch_queue: VecDeque<usize>,
    inflight_prefetch_transfers: u64,
    /// Byte-slot position of the demand stream tail on the HBM channel.
    demand_tail: u64,
    events: std::collections::BinaryHeap<Scheduled>,
    requests: Vec<MemRequest>,
    counters: MemCounters,
    trace: Option<Box<dyn Write + Send>>,
}

impl MemoryHierarchy {
    pub fn new(hw: &HardwareConfig) -> Self {
        MemoryHierarchy {
            line_size: hw.line_size,
            lat_l1: hw.lat_l1,
            lat_l2: hw.lat_l2,
            lat_hbm: hw.lat_hbm,
            bw_hbm: hw.bw_hbm,
            prefetch_queue_depth: hw.prefetch_queue_depth,
            clock: 0,
            l1: (0..hw.sm_count)
                .map(|_| TaggedLru::new(hw.l1_capacity, hw.line_size))
                .collect(),
            l2: TaggedLru::new(hw.l2_capacity, hw.line_size),
            in_flight: HashMap::new(),
            fills: Vec::new(),
            prefetch_queue: VecDeque::new(),
            inflight_prefetch_transfers: 0,
            demand_tail: 0,
            events: std::collections::BinaryHeap::new(),
            requests: Vec::new(),
            counters: MemCounters::default(),
            trace: None,
        }
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn counters(&self) -> &MemCounters {
        &self.counters
    }

    pub fn request(&self, id: RequestId) -> &MemRequest {
        &self.requests[id.0 as usize]
    }

    /// Scheduled completion cycle of a demand load. Known from issue time.
    pub fn completion_of(&self, id: RequestId) -> Option<u64> {
        self.requests[id.0 as usize].completion
    }

    pub fn l1_resident_lines(&self, sm: usize) -> usize {
        self.l1[sm].len()
    }

    pub fn l2_resident_lines(&self) -> usize {
        self.l2.len()
    }

    pub fn l2_cache(&self) -> &TaggedLru {
        &self.l2
    }

    pub fn l1_cache(&self, sm: usize) -> &TaggedLru {
        &self.l1[sm]
    }

    pub fn has_inflight(&self) -> bool {
        !self.events.is_empty() || !self.prefetch_queue.is_empty()
    }

    /// Streams one JSON record per line probe to `w`:
    /// `{cycle, kind, level, addr, len, hit}`.
    pub fn set_trace(&mut self, w: Option<Box<dyn Write + Send>>) {
        self.trace = w;
    }

    fn trace_probe(&mut self, kind: &str, level: &str, addr: u64, len: u64, hit: bool) {
        if let Some(w) = self.trace.as_mut() {
            let _ = writeln!(
                w,
                "{{\"cycle\":{},\"kind\":\"{kind}\",\"level\":\"{level}\",\"addr\":{addr},\"len\":{len},\"hit\":{hit}}}",
                self.clock
            );
        }
    }

    fn lines_of(&self, addr: u64, len: u64) -> std::ops::RangeInclusive<u64> {
        debug_assert!(len > 0);
        (addr / self.line_size)..=((addr + len - 1) / self.line_size)
    }

    fn schedule(&mut self, cycle: u64, ev: Ev) {
        self.events.push(Scheduled::new(cycle, ev));
    }

    /// Appends `len` bytes to the demand byte stream and returns the cycle at
    /// which the transfer's data arrives.
    fn demand_stream_push(&mut self, len: u64) -> u64 {
        let start = self.demand_tail.max(self.clock * self.bw_hbm);
        self.demand_tail = start + len;
        self.demand_tail / self.bw_hbm + self.lat_hbm
    }

    /// Issues a demand load of `len` bytes at `addr` from SM `sm`. The
    /// returned handle's completion is reported by [`advance`](Self::advance).
    pub fn demand_load(&mut self, sm: usize, addr: u64, len: u64) -> RequestId {
        assert!(len > 0, "demand load of zero bytes");
        assert!(sm < self.l1.len(), "SM index out of range");
        self.counters.demand_requested_bytes += len;
        let issue = self.clock;
        let mut completion = 0u64;
        let mut missing: Vec<u64> = Vec::new();
        for line in self.lines_of(addr, len) {
            self.counters.l1_demand_probes += 1;
            if self.l1[sm].touch(line, false) {
                self.counters.l1_demand_hits += 1;
                self.trace_probe("demand", "l1", line * self.line_size, self.line_size, true);
                completion = completion.max(issue + self.lat_l1);
                continue;
            }
            self.counters.l2_demand_probes += 1;
            if self.l2.touch(line, true) {
                self.counters.l2_demand_hits += 1;
                self.trace_probe("demand", "l2", line * self.line_size, self.line_size, true);
                let done = issue + self.lat_l2;
                completion = completion.max(done);
                self.schedule(done, Ev::InstallL1 { sm, line });
                continue;
            }
            // A fill whose bytes are off the channel services the probe as a
            // hit; a still-draining prefetch does not - the load re-requests
            // the line at demand priority instead of waiting on leftovers.
            if let Some(arrival) = self
                .in_flight
                .get(&line)
                .and_then(|&f| self.fills[f].arrival)
            {
                self.counters.l2_demand_hits += 1;
                self.trace_probe("demand", "l2", line * self.line_size, self.line_size, true);
                let done = arrival.max(issue + self.lat_l2);
                completion = completion.max(done);
                self.schedule(done, Ev::InstallL1 { sm, line });
                continue;
            }
            self.counters.l2_demand_misses += 1;
            self.trace_probe(
                "demand",
                "hbm",
                line * self.line_size,
                self.line_size,
                false,
            );
            missing.push(line);
        }

        if !missing.is_empty() {
            let len = missing.len() as u64 * self.line_size;
            self.counters.hbm_demand_bytes += len;
            let arrival = self.demand_stream_push(len);
            completion = completion.max(arrival);
            let fill_idx = self.fills.len();
            for &line in &missing {
                self.in_flight.insert(line, fill_idx);
            }
            self.fills.push(Fill {
                lines: missing,
                class: FillClass::Demand { sm },
                prio: EvictionPriority::Normal,
                remaining: 0,
                arrival: Some(arrival),
            });
            self.schedule(arrival, Ev::InstallFill(fill_idx));
        }

        let id = RequestId(self.requests.len() as u64);
        self.requests.push(MemRequest {
            kind: RequestKind::DemandLoad,
            addr,
            len,
            sm,
            issue_cycle: issue,
            completion: Some(completion),
        });
        self.schedule(completion, Ev::Complete(id));
        id
    }

    /// Issues a non-blocking prefetch into L2. Lines already resident are
    /// recency-refreshed, in-flight lines are skipped, and the rest are
    /// fetched at prefetch priority carrying the given eviction tag.
    pub fn prefetch_l2(&mut self, addr: u64, len: u64, prio: EvictionPriority) {
        assert!(len > 0, "prefetch of zero bytes");
        self.counters.prefetches_issued += 1;
        let mut missing: Vec<u64> = Vec::new();
        for line in self.lines_of(addr, len) {
            self.counters.l2_prefetch_probes += 1;
            if self.l2.touch(line, false) || self.in_flight.contains_key(&line) {
                self.counters.l2_prefetch_hits += 1;
                self.trace_probe(
                    "prefetch",
                    "l2",
                    line * self.line_size,
                    self.line_size,
                    true,
                );
            } else {
                missing.push(line);
            }
        }
        if missing.is_empty() {
            return;
        }
        if self.inflight_prefetch_transfers >= self.prefetch_queue_depth {
            self.counters.dropped_prefetches += 1;
            self.trace_probe("prefetch_dropped", "hbm", addr, len, false);
            return;
        }
        for &line in &missing {
            self.trace_probe(
                "prefetch",
                "hbm",
                line * self.line_size,
                self.line_size,
                false,
            );
        }
        let bytes = missing.len() as u64 * self.line_size;
        self.counters.prefetch_fill_lines += missing.len() as u64;
        self.counters.hbm_prefetch_bytes += bytes;
        let fill_idx = self.fills.len();
        for &line in &missing {
            self.in_flight.insert(line, fill_idx);
        }
        self.fills.push(Fill {
            lines: missing,
            class: FillClass::Prefetch,
            prio,
            remaining: bytes,
            arrival: None,
        });
        self.prefetch_queue.push_back(fill_idx);
        self.inflight_prefetch_transfers += 1;
    }

    fn install_line_l2(&mut self, line: u64, prio: EvictionPriority) {
        if let Some((_, tag)) = self.l2.insert(line, prio) {
            match tag {
                EvictionPriority::Normal => self.counters.l2_evictions_normal += 1,
                EvictionPriority::EvictFirst => self.counters.l2_evictions_evict_first += 1,
            }
        }
    }

    fn install_fill(&mut self, fill_idx: usize) {
        let lines = std::mem::take(&mut self.fills[fill_idx].lines);
        let class = self.fills[fill_idx].class;
        let prio = self.fills[fill_idx].prio;
        for &line in &lines {
            if self.in_flight.get(&line) == Some(&fill_idx) {
                self.in_flight.remove(&line);
            }
            match class {
                FillClass::Demand { sm } => {
                    if self.l2.touch(line, true) {
                        // A racing prefetch landed first; this is now a touch.
                    } else {
                        self.install_line_l2(line, prio);
                    }
                    self.counters.l2_demand_fill_bytes += self.line_size;
                    if !self.l1[sm].touch(line, false) {
                        self.l1[sm].insert(line, EvictionPriority::Normal);
                        self.counters.l1_fill_bytes += self.line_size;
                    }
                }
                FillClass::Prefetch => {
                    if !self.l2.touch(line, false) {
                        self.install_line_l2(line, prio);
                    }
                    self.counters.l2_prefetch_fill_bytes += self.line_size;
                }
            }
        }
        if class == FillClass::Prefetch {
            self.inflight_prefetch_transfers -= 1;
        }
    }

    /// Drains the bandwidth window of cycle `c`: demand bytes first, then
    /// prefetch transfers from the leftover budget, FIFO.
    fn drain_cycle(&mut self, c: u64) {
        if self.prefetch_queue.is_empty() {
            return;
        }
        let window_start = c * self.bw_hbm;
        let window_end = window_start + self.bw_hbm;
        let mut pos = self.demand_tail.clamp(window_start, window_end);
        while pos < window_end {
            let Some(&fill_idx) = self.prefetch_queue.front() else {
                break;
            };
            let take = self.fills[fill_idx].remaining.min(window_end - pos);
            self.fills[fill_idx].remaining -= take;
            pos += take;
            if self.fills[fill_idx].remaining == 0 {
                self.prefetch_queue.pop_front();
                let arrival = pos / self.bw_hbm + self.lat_hbm;
                self.fills[fill_idx].arrival = Some(arrival);
                self.schedule(arrival, Ev::InstallFill(fill_idx));
            }
        }
    }

    fn advance_inner(&mut self, limit: u64, stop_on_completion: bool) -> Vec<Completion> {
        let mut out = Vec::new();
        loop {
            while self.events.peek().is_some_and(|s| s.cycle == self.clock) {
                let s = self.events.pop().unwrap();
                match s.ev {
                    Ev::InstallFill(idx) => self.install_fill(idx),
                    Ev::InstallL1 { sm, line } => {
                        if !self.l1[sm].touch(line, false) {
                            self.l1[sm].insert(line, EvictionPriority::Normal);
                            self.counters.l1_fill_bytes += self.line_size;
                        }
                    }
                    Ev::Complete(id) => out.push(Completion {
                        request: id,
                        cycle: self.clock,
                    }),
                }
            }
            if stop_on_completion && !out.is_empty() {
                return out;
            }
            if self.clock >= limit {
                return out;
            }
            self.drain_cycle(self.clock);
            self.clock += 1;
        }
    }

    /// Advances the clock by `cycles`, returning every request completed in
    /// the window in completion order.
    pub fn advance(&mut self, cycles: u64) -> Vec<Completion> {
        let limit = self.clock + cycles;
        self.advance_inner(limit, false)
    }

    /// Advances toward `limit` but stops at the first cycle that completes
    /// at least one request, returning those completions. The clock then
    /// rests on that cycle so the caller can react before time moves on.
    pub fn advance_until(&mut self, limit: u64) -> Vec<Completion> {
        if limit <= self.clock {
            return Vec::new();
        }
        self.advance_inner(limit, true)
    }

    /// Runs until no events or prefetch transfers remain in flight.
    pub fn drain(&mut self) -> Vec<Completion> {
        let mut out = Vec::new();
        while self.has_inflight() {
            let next = self
                .events
                .peek()
                .map(|s| s.cycle)
                .unwrap_or(self.clock + 1)
                .max(self.clock + 1);
            out.extend(self.advance_inner(next, false));
        }
        out
    }
}
