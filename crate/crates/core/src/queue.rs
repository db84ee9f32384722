//! Bounded max-priority queue of partial paths for the sequential decoder.
//!
//! A pairing heap in an arena. Every key comparison is counted so decoding
//! complexity can be reported. Priority is lexicographic: higher score, then
//! deeper phase, then earlier insertion.

use std::cmp::Ordering;

use crate::datapath::PathHandle;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueEntry {
    pub score: f64,
    pub phase: u32,
    /// Insertion sequence number, unique per queue lifetime.
    pub seq: u64,
    pub path: PathHandle,
}

impl QueueEntry {
    /// Total priority order; `Greater` pops first.
    pub fn priority_cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then(self.phase.cmp(&other.phase))
            .then(other.seq.cmp(&self.seq))
    }
}

/// Stable handle of a queued entry, valid until the entry leaves the queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(u32);

const NIL: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct PriorityQueue {
    capacity: usize,
    entries: Vec<QueueEntry>,
    child: Vec<u32>,
    next: Vec<u32>,
    // previous sibling, or the parent for a first child
    prev: Vec<u32>,
    live_pos: Vec<u32>,
    live: Vec<u32>,
    free: Vec<u32>,
    root: u32,
    next_seq: u64,
    comparisons: u64,
    scratch: Vec<u32>,
}

impl PriorityQueue {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1);
        Self {
            capacity,
            entries: Vec::new(),
            child: Vec::new(),
            next: Vec::new(),
            prev: Vec::new(),
            live_pos: Vec::new(),
            live: Vec::new(),
            free: Vec::new(),
            root: NIL,
            next_seq: 0,
            comparisons: 0,
            scratch: Vec::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.live.len()
    }

    pub fn is_empty(&self) -> bool {
        self.live.is_empty()
    }

    /// Key comparisons performed since construction or the last reset.
    pub fn comparisons(&self) -> u64 {
        self.comparisons
    }

    pub fn reset_comparisons(&mut self) {
        self.comparisons = 0;
    }

    /// Empties the queue; sequence numbers restart at zero.
    pub fn clear(&mut self) {
        self.entries.clear();
        self.child.clear();
        self.next.clear();
        self.prev.clear();
        self.live_pos.clear();
        self.live.clear();
        self.free.clear();
        self.root = NIL;
        self.next_seq = 0;
    }

    pub fn peek(&self) -> Option<&QueueEntry> {
        (self.root != NIL).then(|| &self.entries[self.root as usize])
    }

    pub fn get(&self, id: NodeId) -> &QueueEntry {
        &self.entries[id.0 as usize]
    }

    /// Entries in unspecified order.
    pub fn iter(&self) -> impl Iterator<Item = &QueueEntry> + '_ {
        self.live.iter().map(|&i| &self.entries[i as usize])
    }

    /// Panics if the queue is full: callers evict before pushing.
    pub fn push(&mut self, score: f64, phase: u32, path: PathHandle) -> NodeId {
        let seq = self.take_seq();
        NodeId(self.insert(QueueEntry { score, phase, seq, path }))
    }

    /// Pushes two entries whose sequence numbers follow argument order while
    /// `second` enters the heap first. Pushing the lower-priority entry first
    /// leaves the winner at the root with a single child, so the next pop
    /// needs no merging.
    pub fn push_pair(&mut self, first: (f64, u32, PathHandle), second: (f64, u32, PathHandle)) -> (NodeId, NodeId) {
        let s1 = self.take_seq();
        let s2 = self.take_seq();
        let b = self.insert(QueueEntry {
            score: second.0,
            phase: second.1,
            seq: s2,
            path: second.2,
        });
        let a = self.insert(QueueEntry {
            score: first.0,
            phase: first.1,
            seq: s1,
            path: first.2,
        });
        (NodeId(a), NodeId(b))
    }

    pub fn pop_max(&mut self) -> Option<QueueEntry> {
        if self.root == NIL {
            return None;
        }
        let r = self.root;
        let c = self.child[r as usize];
        self.root = if c == NIL { NIL } else { self.merge_pairs(c) };
        if self.root != NIL {
            self.prev[self.root as usize] = NIL;
        }
        Some(self.release(r))
    }

    /// Removes an arbitrary entry.
    pub fn remove(&mut self, id: NodeId) -> QueueEntry {
        let x = id.0;
        assert!(self.live_pos[x as usize] != NIL, "entry is not queued");
        if x == self.root {
            return self.pop_max().expect("root exists");
        }
        self.unlink(x);
        let c = self.child[x as usize];
        if c != NIL {
            let sub = self.merge_pairs(c);
            self.root = self.link(self.root, sub);
        }
        self.release(x)
    }

    /// Removes the lowest-priority entry. The minimum is always a leaf, so
    /// only leaves are scanned.
    pub fn evict_min(&mut self) -> Option<QueueEntry> {
        let mut worst = NIL;
        for &i in &self.live {
            if self.child[i as usize] != NIL {
                continue;
            }
            if worst == NIL {
                worst = i;
                continue;
            }
            self.comparisons += 1;
            if self.entries[i as usize].priority_cmp(&self.entries[worst as usize]) == Ordering::Less {
                worst = i;
            }
        }
        (worst != NIL).then(|| self.remove(NodeId(worst)))
    }

    /// Removes every entry matching `pred` and returns them in ascending
    /// sequence order. The survivors are re-linked into a fresh heap.
    pub fn remove_where(&mut self, mut pred: impl FnMut(&QueueEntry) -> bool) -> Vec<QueueEntry> {
        let (gone, kept): (Vec<u32>, Vec<u32>) = self.live.iter().partition(|&&i| pred(&self.entries[i as usize]));
        if gone.is_empty() {
            return Vec::new();
        }
        let mut removed: Vec<QueueEntry> = gone.iter().map(|&i| self.release(i)).collect();
        removed.sort_by_key(|e| e.seq);
        self.root = NIL;
        for i in kept {
            let iu = i as usize;
            self.child[iu] = NIL;
            self.next[iu] = NIL;
            self.prev[iu] = NIL;
            self.root = if self.root == NIL { i } else { self.link(self.root, i) };
        }
        removed
    }

    fn take_seq(&mut self) -> u64 {
        self.next_seq += 1;
        self.next_seq - 1
    }

    fn insert(&mut self, e: QueueEntry) -> u32 {
        assert!(
            self.live.len() < self.capacity,
            "priority queue overflow: capacity {}",
            self.capacity
        );
        let i = match self.free.pop() {
            Some(i) => {
                self.entries[i as usize] = e;
                i
            }
            None => {
                self.entries.push(e);
                self.child.push(NIL);
                self.next.push(NIL);
                self.prev.push(NIL);
                self.live_pos.push(NIL);
                (self.entries.len() - 1) as u32
            }
        };
        let iu = i as usize;
        self.child[iu] = NIL;
        self.next[iu] = NIL;
        self.prev[iu] = NIL;
        self.live_pos[iu] = self.live.len() as u32;
        self.live.push(i);
        self.root = if self.root == NIL { i } else { self.link(self.root, i) };
        i
    }

    fn release(&mut self, i: u32) -> QueueEntry {
        let pos = self.live_pos[i as usize] as usize;
        self.live.swap_remove(pos);
        if pos < self.live.len() {
            self.live_pos[self.live[pos] as usize] = pos as u32;
        }
        self.live_pos[i as usize] = NIL;
        self.free.push(i);
        self.entries[i as usize]
    }

    /// Links two roots; the loser becomes the winner's first child.
    fn link(&mut self, a: u32, b: u32) -> u32 {
        self.comparisons += 1;
        let (w, l) = if self.entries[a as usize].priority_cmp(&self.entries[b as usize]) == Ordering::Less {
            (b, a)
        } else {
            (a, b)
        };
        let (wu, lu) = (w as usize, l as usize);
        let c = self.child[wu];
        self.next[lu] = c;
        if c != NIL {
            self.prev[c as usize] = l;
        }
        self.prev[lu] = w;
        self.child[wu] = l;
        self.next[wu] = NIL;
        self.prev[wu] = NIL;
        w
    }

    fn unlink(&mut self, x: u32) {
        let xu = x as usize;
        let p = self.prev[xu];
        let nx = self.next[xu];
        if self.child[p as usize] == x {
            self.child[p as usize] = nx;
        } else {
            self.next[p as usize] = nx;
        }
        if nx != NIL {
            self.prev[nx as usize] = p;
        }
        self.next[xu] = NIL;
        self.prev[xu] = NIL;
    }

    /// Standard two-pass merge of a sibling list.
    fn merge_pairs(&mut self, first: u32) -> u32 {
        let mut list = std::mem::take(&mut self.scratch);
        list.clear();
        let mut c = first;
        while c != NIL {
            let nx = self.next[c as usize];
            self.next[c as usize] = NIL;
            self.prev[c as usize] = NIL;
            list.push(c);
            c = nx;
        }
        let mut paired = 0;
        let mut i = 0;
        while i + 1 < list.len() {
            list[paired] = self.link(list[i], list[i + 1]);
            paired += 1;
            i += 2;
        }
        if i < list.len() {
            list[paired] = list[i];
            paired += 1;
        }
        let mut acc = list[paired - 1];
        for j in (0..paired - 1).rev() {
            acc = self.link(list[j], acc);
        }
        self.scratch = list;
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(i: u32) -> PathHandle {
        PathHandle::from_index(i as usize)
    }

    #[test]
    fn pops_highest_score() {
        let mut q = PriorityQueue::new(8);
        q.push(1.0, 0, h(0));
        q.push(3.0, 0, h(1));
        q.push(2.0, 0, h(2));
        assert_eq!(q.pop_max().unwrap().path, h(1));
        assert_eq!(q.pop_max().unwrap().path, h(2));
        assert_eq!(q.pop_max().unwrap().path, h(0));
        assert!(q.pop_max().is_none());
    }

    #[test]
    fn ties_prefer_deeper_then_earlier() {
        let mut q = PriorityQueue::new(8);
        q.push(-1.0, 2, h(0));
        q.push(-1.0, 5, h(1));
        q.push(-1.0, 5, h(2));
        assert_eq!(q.pop_max().unwrap().path, h(1));
        assert_eq!(q.pop_max().unwrap().path, h(2));
        assert_eq!(q.pop_max().unwrap().path, h(0));
    }

    #[test]
    fn push_pair_keeps_sequence_order() {
        let mut q = PriorityQueue::new(8);
        q.push_pair((0.0, 1, h(0)), (0.0, 1, h(1)));
        assert_eq!(q.pop_max().unwrap().path, h(0));
        assert_eq!(q.pop_max().unwrap().path, h(1));
    }

    #[test]
    fn evict_and_remove() {
        let mut q = PriorityQueue::new(8);
        let ids: Vec<_> = [4.0, -2.0, 7.0, 1.0].iter().enumerate().map(|(i, &s)| q.push(s, 0, h(i as u32))).collect();
        assert_eq!(q.evict_min().unwrap().score, -2.0);
        assert_eq!(q.remove(ids[2]).score, 7.0);
        assert_eq!(q.len(), 2);
        assert_eq!(q.pop_max().unwrap().score, 4.0);
        assert_eq!(q.pop_max().unwrap().score, 1.0);
    }

    #[test]
    fn remove_where_sweeps() {
        let mut q = PriorityQueue::new(16);
        for i in 0..10u32 {
            q.push(f64::from(i), i % 4, h(i));
        }
        let gone = q.remove_where(|e| e.phase <= 1);
        assert_eq!(gone.len(), 6);
        assert!(gone.windows(2).all(|w| w[0].seq < w[1].seq));
        let rest: Vec<_> = std::iter::from_fn(|| q.pop_max()).map(|e| e.score).collect();
        assert_eq!(rest, vec![7.0, 6.0, 3.0, 2.0]);
    }

    #[test]
    #[should_panic(expected = "overflow")]
    fn overflow_is_a_bug() {
        let mut q = PriorityQueue::new(1);
        q.push(0.0, 0, h(0));
        q.push(0.0, 0, h(1));
    }

    #[test]
    fn sorted_pair_push_pops_without_merging() {
        let mut q = PriorityQueue::new(8);
        q.push(0.0, 0, h(0));
        q.pop_max();
        q.reset_comparisons();
        q.push_pair((0.0, 1, h(1)), (-3.0, 1, h(2)));
        assert_eq!(q.comparisons(), 1);
        q.pop_max();
        assert_eq!(q.comparisons(), 1);
    }
}
