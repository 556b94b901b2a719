//! Line-granular fully-associative cache state with segmented-LRU eviction.
//!
//! Every resident line carries an eviction-priority tag. Victim selection
//! always prefers `evict_first` lines (LRU order among them) and only then
//! falls back to `normal` lines (LRU order among them), so prefetched data
//! tagged `evict_first` thrashes among itself before displacing anything else.

use crate::config::EvictionPriority;
use std::collections::{BTreeSet, HashMap};

#[derive(Debug)]
pub struct TaggedLru {
    capacity_lines: usize,
    stamp: u64,
    lines: HashMap<u64, (u64, EvictionPriority)>,
    normal: BTreeSet<(u64, u64)>,
    evict_first: BTreeSet<(u64, u64)>,
}

impl TaggedLru {
    pub fn new(capacity_bytes: u64, line_size: u64) -> Self {
        TaggedLru {
            capacity_lines: (capacity_bytes / line_size) as usize,
            stamp: 0,
            lines: HashMap::new(),
            normal: BTreeSet::new(),
            evict_first: BTreeSet::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn capacity_lines(&self) -> usize {
        self.capacity_lines
    }

    pub fn contains(&self, line: u64) -> bool {
        self.lines.contains_key(&line)
    }

    /// Resident lines with their tags, sorted by line id.
    pub fn entries(&self) -> Vec<(u64, EvictionPriority)> {
        let mut v: Vec<(u64, EvictionPriority)> = self
            .lines
            .iter()
            .map(|(&line, &(_, prio))| (line, prio))
            .collect();
        v.sort_unstable_by_key(|&(line, _)| line);
        v
    }

    fn set_of<'a>(
        normal: &'a mut BTreeSet<(u64, u64)>,
        evict_first: &'a mut BTreeSet<(u64, u64)>,
        prio: EvictionPriority,
    ) -> &'a mut BTreeSet<(u64, u64)> {
        match prio {
            EvictionPriority::Normal => normal,
            EvictionPriority::EvictFirst => evict_first,
        }
    }

    /// Refreshes recency of `line`. Returns false on miss. When `promote` is
    /// set a hit also retags the line as `normal` (a demand hit consumes
    /// prefetched data, which then deserves ordinary retention).
    pub fn touch(&mut self, line: u64, promote: bool) -> bool {
        let Some((stamp, prio)) = self.lines.get(&line).copied() else {
            return false;
        };
        Self::set_of(&mut self.normal, &mut self.evict_first, prio).remove(&(stamp, line));
        let new_prio = if promote {
            EvictionPriority::Normal
        } else {
            prio
        };
        self.stamp += 1;
        self.lines.insert(line, (self.stamp, new_prio));
        Self::set_of(&mut self.normal, &mut self.evict_first, new_prio).insert((self.stamp, line));
        true
    }

    /// Next line the replacement policy would evict, if the cache is full.
    pub fn victim(&self) -> Option<u64> {
        self.evict_first
            .first()
            .or_else(|| self.normal.first())
            .map(|&(_, line)| line)
    }

    /// Installs a line, evicting one first if at capacity. Returns the
    /// evicted line and its tag, if any.
    pub fn insert(&mut self, line: u64, prio: EvictionPriority) -> Option<(u64, EvictionPriority)> {
        debug_assert!(
            !self.lines.contains_key(&line),
            "double install of line {line}"
        );
        let mut evicted = None;
        if self.lines.len() == self.capacity_lines {
            let victim = self.victim().expect("full cache has a victim");
            let (stamp, prio) = self.lines.remove(&victim).unwrap();
            Self::set_of(&mut self.normal, &mut self.evict_first, prio).remove(&(stamp, victim));
            evicted = Some((victim, prio));
        }
        self.stamp += 1;
        self.lines.insert(line, (self.stamp, prio));
        Self::set_of(&mut self.normal, &mut self.evict_first, prio).insert((self.stamp, line));
        evicted
    }
}
