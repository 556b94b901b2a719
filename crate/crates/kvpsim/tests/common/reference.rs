//! Naive event-list reference simulator for the memory hierarchy.
//!
//! Written independently of the production implementation: caches are linear
//! scan vectors, the HBM channel is drained literally cycle by cycle, and
//! request completions resolve lazily as transfers finish. Only the
//! documented timing contract is shared. Used to cross-check hit/miss
//! streams, completion cycles and counters on randomized traces.

use kvpsim::config::{EvictionPriority, HardwareConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RefProbe {
    /// 0 = L1 hit, 1 = L2 hit, 2 = HBM (miss at both levels).
    pub level: u8,
    pub line: u64,
}

#[derive(Debug, Clone, Copy)]
struct RefLine {
    line: u64,
    stamp: u64,
    evict_first: bool,
}

#[derive(Debug)]
struct RefFill {
    lines: Vec<u64>,
    /// SM to fill into L1 on arrival; None for prefetches.
    demand_sm: Option<usize>,
    evict_first: bool,
    remaining: u64,
    arrival: Option<u64>,
    installed: bool,
}

#[derive(Debug, Clone, Copy)]
enum Part {
    Known(u64),
    /// Hit under fill: resolves to max(probe + lat_l2, arrival).
    UnderFill {
        fill: usize,
        probe: u64,
    },
    /// The request's own HBM transfer: resolves to its arrival.
    OwnFill {
        fill: usize,
    },
}

#[derive(Debug)]
struct RefRequest {
    parts: Vec<Part>,
    completion: Option<u64>,
}

/// Pending L1 install for an L2-hit or hit-under-fill line.
#[derive(Debug)]
struct PendingL1 {
    sm: usize,
    line: u64,
    cycle: Option<u64>,
    /// For under-fill lines: resolve cycle from this fill's arrival.
    from_fill: Option<(usize, u64)>,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct RefCounters {
    pub l1_demand_probes: u64,
    pub l1_demand_hits: u64,
    pub l2_demand_probes: u64,
    pub l2_demand_hits: u64,
    pub l2_demand_misses: u64,
    pub l2_prefetch_probes: u64,
    pub l2_prefetch_hits: u64,
    pub prefetch_fill_lines: u64,
    pub hbm_demand_bytes: u64,
    pub hbm_prefetch_bytes: u64,
    pub dropped_prefetches: u64,
}

pub struct RefSim {
    line_size: u64,
    lat_l1: u64,
    lat_l2: u64,
    lat_hbm: u64,
    bw_hbm: u64,
    depth: u64,
    l1_cap: usize,
    l2_cap: usize,
    clock: u64,
    stamp: u64,
    l1: Vec<Vec<RefLine>>,
    l2: Vec<RefLine>,
    fills: Vec<RefFill>,
    /// Fills not yet installed into L2.
    active_fills: Vec<usize>,
    /// Per-line fetch ownership: the most recent transfer covering a line.
    /// A demand refetch usurps a lagging prefetch's claim; the usurped
    /// fill's later arrival degrades to a recency touch.
    owners: Vec<(u64, usize)>,
    demand_q: Vec<usize>,
    prefetch_q: Vec<usize>,
    pending_l1: Vec<PendingL1>,
    requests: Vec<RefRequest>,
    unresolved: Vec<usize>,
    pub counters: RefCounters,
    pub probes: Vec<Vec<RefProbe>>,
}

impl RefSim {
    pub fn new(hw: &HardwareConfig) -> Self {
        RefSim {
            line_size: hw.line_size,
            lat_l1: hw.lat_l1,
            lat_l2: hw.lat_l2,
            lat_hbm: hw.lat_hbm,
            bw_hbm: hw.bw_hbm,
            depth: hw.prefetch_queue_depth,
            l1_cap: (hw.l1_capacity / hw.line_size) as usize,
            l2_cap: (hw.l2_capacity / hw.line_size) as usize,
            clock: 0,
            stamp: 0,
            l1: (0..hw.sm_count).map(|_| Vec::new()).collect(),
            l2: Vec::new(),
            fills: Vec::new(),
            active_fills: Vec::new(),
            owners: Vec::new(),
            demand_q: Vec::new(),
            prefetch_q: Vec::new(),
            pending_l1: Vec::new(),
            requests: Vec::new(),
            unresolved: Vec::new(),
            counters: RefCounters::default(),
            probes: Vec::new(),
        }
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn completion_of(&self, req: usize) -> Option<u64> {
        self.requests[req].completion
    }

    pub fn l2_lines_sorted(&self) -> Vec<(u64, bool)> {
        let mut v: Vec<(u64, bool)> = self.l2.iter().map(|l| (l.line, l.evict_first)).collect();
        v.sort_unstable();
        v
    }

    pub fn l1_lines_sorted(&self, sm: usize) -> Vec<u64> {
        let mut v: Vec<u64> = self.l1[sm].iter().map(|l| l.line).collect();
        v.sort_unstable();
        v
    }

    pub fn quiescent(&self) -> bool {
        self.active_fills.is_empty() && self.unresolved.is_empty() && self.pending_l1.is_empty()
    }

    /// Runs until everything in flight has landed.
    pub fn drain(&mut self) {
        while !self.quiescent() {
            self.step();
        }
        self.land_at_clock();
    }

    fn touch_l1(&mut self, sm: usize, line: u64) -> bool {
        if let Some(entry) = self.l1[sm].iter_mut().find(|l| l.line == line) {
            self.stamp += 1;
            entry.stamp = self.stamp;
            true
        } else {
            false
        }
    }

    fn touch_l2(&mut self, line: u64, promote: bool) -> bool {
        if let Some(entry) = self.l2.iter_mut().find(|l| l.line == line) {
            self.stamp += 1;
            entry.stamp = self.stamp;
            if promote {
                entry.evict_first = false;
            }
            true
        } else {
            false
        }
    }

    fn insert_l1(&mut self, sm: usize, line: u64) {
        if self.touch_l1(sm, line) {
            return;
        }
        if self.l1[sm].len() == self.l1_cap {
            // Plain LRU: evict the smallest stamp.
            let idx = self.l1[sm]
                .iter()
                .enumerate()
                .min_by_key(|(_, l)| l.stamp)
                .map(|(i, _)| i)
                .unwrap();
            self.l1[sm].swap_remove(idx);
        }
        self.stamp += 1;
        self.l1[sm].push(RefLine {
            line,
            stamp: self.stamp,
            evict_first: false,
        });
    }

    fn insert_l2(&mut self, line: u64, evict_first: bool) {
        debug_assert!(self.l2.iter().all(|l| l.line != line));
        if self.l2.len() == self.l2_cap {
            // Segmented LRU: evict_first lines go first, LRU within a class.
            let idx = self
                .l2
                .iter()
                .enumerate()
                .min_by_key(|(_, l)| (!l.evict_first, l.stamp))
                .map(|(i, _)| i)
                .unwrap();
            self.l2.swap_remove(idx);
        }
        self.stamp += 1;
        self.l2.push(RefLine {
            line,
            stamp: self.stamp,
            evict_first,
        });
    }

    fn in_flight_fill(&self, line: u64) -> Option<usize> {
        self.owners
            .iter()
            .find(|&&(l, _)| l == line)
            .map(|&(_, f)| f)
    }

    fn claim_line(&mut self, line: u64, fill: usize) {
        if let Some(entry) = self.owners.iter_mut().find(|(l, _)| *l == line) {
            entry.1 = fill;
        } else {
            self.owners.push((line, fill));
        }
    }

    /// Owning fill that can service a demand probe of `line`: a demand
    /// transfer, or a prefetch whose bytes have fully drained.
    fn serviceable_fill(&self, line: u64) -> Option<usize> {
        let f = self.in_flight_fill(line)?;
        if self.fills[f].demand_sm.is_some() || self.fills[f].remaining == 0 {
            Some(f)
        } else {
            None
        }
    }

    pub fn demand_load(&mut self, sm: usize, addr: u64, len: u64) -> usize {
        let issue = self.clock;
        let mut parts = Vec::new();
        let mut probes = Vec::new();
        let mut missing = Vec::new();
        for line in (addr / self.line_size)..=((addr + len - 1) / self.line_size) {
            self.counters.l1_demand_probes += 1;
            if self.touch_l1(sm, line) {
                self.counters.l1_demand_hits += 1;
                probes.push(RefProbe { level: 0, line });
                parts.push(Part::Known(issue + self.lat_l1));
                continue;
            }
            self.counters.l2_demand_probes += 1;
            if self.touch_l2(line, true) {
                self.counters.l2_demand_hits += 1;
                probes.push(RefProbe { level: 1, line });
                parts.push(Part::Known(issue + self.lat_l2));
                self.pending_l1.push(PendingL1 {
                    sm,
                    line,
                    cycle: Some(issue + self.lat_l2),
                    from_fill: None,
                });
                continue;
            }
            // Hit under fill only when the data is already off the channel:
            // demand transfers (fixed schedule) or fully drained prefetches.
            // A still-draining prefetch line is refetched as a miss.
            let covering = self.serviceable_fill(line);
            if let Some(fill) = covering {
                self.counters.l2_demand_hits += 1;
                probes.push(RefProbe { level: 1, line });
                parts.push(Part::UnderFill { fill, probe: issue });
                // The arrival may already be known (transfer drained, data in
                // the latency pipe); bind the install cycle now in that case.
                let cycle = self.fills[fill].arrival.map(|a| a.max(issue + self.lat_l2));
                self.pending_l1.push(PendingL1 {
                    sm,
                    line,
                    cycle,
                    from_fill: Some((fill, issue)),
                });
                continue;
            }
            self.counters.l2_demand_misses += 1;
            probes.push(RefProbe { level: 2, line });
            missing.push(line);
        }
        if !missing.is_empty() {
            let bytes = missing.len() as u64 * self.line_size;
            self.counters.hbm_demand_bytes += bytes;
            let fill = self.fills.len();
            for &line in &missing {
                self.claim_line(line, fill);
            }
            self.fills.push(RefFill {
                lines: missing,
                demand_sm: Some(sm),
                evict_first: false,
                remaining: bytes,
                arrival: None,
                installed: false,
            });
            self.active_fills.push(fill);
            self.demand_q.push(fill);
            parts.push(Part::OwnFill { fill });
        }
        let req = self.requests.len();
        self.requests.push(RefRequest {
            parts,
            completion: None,
        });
        self.unresolved.push(req);
        self.resolve_ready();
        self.probes.push(probes);
        req
    }

    pub fn prefetch_l2(&mut self, addr: u64, len: u64, prio: EvictionPriority) {
        let mut missing = Vec::new();
        for line in (addr / self.line_size)..=((addr + len - 1) / self.line_size) {
            self.counters.l2_prefetch_probes += 1;
            if self.touch_l2(line, false) || self.in_flight_fill(line).is_some() {
                self.counters.l2_prefetch_hits += 1;
            } else {
                missing.push(line);
            }
        }
        if missing.is_empty() {
            return;
        }
        let in_flight = self
            .active_fills
            .iter()
            .filter(|&&f| self.fills[f].demand_sm.is_none())
            .count() as u64;
        if in_flight >= self.depth {
            self.counters.dropped_prefetches += 1;
            return;
        }
        let bytes = missing.len() as u64 * self.line_size;
        self.counters.prefetch_fill_lines += missing.len() as u64;
        self.counters.hbm_prefetch_bytes += bytes;
        let fill = self.fills.len();
        for &line in &missing {
            self.claim_line(line, fill);
        }
        self.fills.push(RefFill {
            lines: missing,
            demand_sm: None,
            evict_first: prio == EvictionPriority::EvictFirst,
            remaining: bytes,
            arrival: None,
            installed: false,
        });
        self.active_fills.push(fill);
        self.prefetch_q.push(fill);
    }

    /// Recomputes completions for requests whose parts may now be known.
    fn resolve_ready(&mut self) {
        let mut still = Vec::new();
        for &req in &self.unresolved {
            let mut max = 0u64;
            let mut ready = true;
            for part in &self.requests[req].parts {
                let value = match *part {
                    Part::Known(v) => Some(v),
                    Part::UnderFill { fill, probe } => {
                        self.fills[fill].arrival.map(|a| a.max(probe + self.lat_l2))
                    }
                    Part::OwnFill { fill } => self.fills[fill].arrival,
                };
                match value {
                    Some(v) => max = max.max(v),
                    None => {
                        ready = false;
                        break;
                    }
                }
            }
            if ready {
                self.requests[req].completion = Some(max);
            } else {
                still.push(req);
            }
        }
        self.unresolved = still;
    }

    fn on_fill_drained(&mut self, fill: usize) {
        self.resolve_ready();
        let arrival = self.fills[fill].arrival.unwrap();
        for p in self.pending_l1.iter_mut() {
            if p.cycle.is_none() {
                if let Some((f, probe)) = p.from_fill {
                    if f == fill {
                        p.cycle = Some(arrival.max(probe + self.lat_l2));
                    }
                }
            }
        }
    }

    /// Lands everything due exactly at the current clock edge, in canonical
    /// order: fill installs by creation order, then L1 installs by (sm, line).
    fn land_at_clock(&mut self) {
        let mut due_fills: Vec<usize> = self
            .active_fills
            .iter()
            .copied()
            .filter(|&f| self.fills[f].arrival == Some(self.clock))
            .collect();
        due_fills.sort_unstable();
        for fill in due_fills {
            self.fills[fill].installed = true;
            self.active_fills.retain(|&f| f != fill);
            let lines = self.fills[fill].lines.clone();
            let evict_first = self.fills[fill].evict_first;
            let demand_sm = self.fills[fill].demand_sm;
            for line in lines {
                self.owners.retain(|&(l, f)| l != line || f != fill);
                // A racing fill may have landed the line already; then this
                // arrival is only a recency touch (demand use promotes).
                if !self.touch_l2(line, demand_sm.is_some()) {
                    self.insert_l2(line, evict_first);
                }
                if let Some(sm) = demand_sm {
                    self.insert_l1(sm, line);
                }
            }
        }
        let mut due_l1: Vec<(usize, u64)> = self
            .pending_l1
            .iter()
            .filter(|p| p.cycle == Some(self.clock))
            .map(|p| (p.sm, p.line))
            .collect();
        due_l1.sort_unstable();
        for (sm, line) in due_l1 {
            self.insert_l1(sm, line);
        }
        self.pending_l1.retain(|p| p.cycle != Some(self.clock));
    }

    /// One cycle: land arrivals, then drain the bandwidth window
    /// (demand first, leftovers to prefetch, FIFO).
    fn step(&mut self) {
        self.land_at_clock();
        let mut used = 0u64;
        while used < self.bw_hbm {
            let Some(&fill) = self.demand_q.first() else {
                break;
            };
            let take = self.fills[fill].remaining.min(self.bw_hbm - used);
            self.fills[fill].remaining -= take;
            used += take;
            if self.fills[fill].remaining == 0 {
                self.demand_q.remove(0);
                let end_slot = self.clock * self.bw_hbm + used;
                self.fills[fill].arrival = Some(end_slot / self.bw_hbm + self.lat_hbm);
                self.on_fill_drained(fill);
            }
        }
        while used < self.bw_hbm {
            let Some(&fill) = self.prefetch_q.first() else {
                break;
            };
            let take = self.fills[fill].remaining.min(self.bw_hbm - used);
            self.fills[fill].remaining -= take;
            used += take;
            if self.fills[fill].remaining == 0 {
                self.prefetch_q.remove(0);
                let end_slot = self.clock * self.bw_hbm + used;
                self.fills[fill].arrival = Some(end_slot / self.bw_hbm + self.lat_hbm);
                self.on_fill_drained(fill);
            }
        }
        self.clock += 1;
    }

    /// Advances `cycles`, landing arrivals scheduled at the final edge too.
    pub fn advance(&mut self, cycles: u64) {
        for _ in 0..cycles {
            self.step();
        }
        self.land_at_clock();
    }
}
