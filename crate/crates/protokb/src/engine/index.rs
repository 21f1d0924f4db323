//! A compact ID index for the batch checks.
//!
//! Holds `(digest, allocation pointer, handle)` triples sorted by digest —
//! small enough that even million-prototype tables stay cache-resident.
//! Probes binary search the digest and verify candidates in place: a
//! matching allocation pointer settles it immediately (IDs cloned from one
//! another share their allocation), and only digest collisions between
//! distinct allocations fall back to byte comparison. Nothing here touches
//! a hash table or the definitions themselves, which keeps batch
//! resolution linear instead of memory-bound.

use crate::model::PrototypeId;

pub(crate) struct DigestIndex {
    ids: Vec<PrototypeId>,
    /// `(digest, iri allocation address, handle)`, sorted.
    entries: Vec<(u64, usize, u32)>,
}

fn iri_address(id: &PrototypeId) -> usize {
    id.as_str().as_ptr() as usize
}

impl DigestIndex {
    pub fn from_ids<'a>(iter: impl Iterator<Item = &'a PrototypeId>) -> Self {
        let ids: Vec<PrototypeId> = iter.cloned().collect();
        let mut entries: Vec<(u64, usize, u32)> = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.digest(), iri_address(id), i as u32))
            .collect();
        entries.sort_unstable();
        Self { ids, entries }
    }

    /// Handle of the entry whose ID equals `probe`, if any. When several
    /// handles share the probe's ID (input duplicates), the smallest wins.
    pub fn find(&self, probe: &PrototypeId) -> Option<u32> {
        let digest = probe.digest();
        let address = iri_address(probe);
        let start = self.entries.partition_point(|&(d, _, _)| d < digest);
        let run = self.entries[start..]
            .iter()
            .take_while(|&&(d, _, _)| d == digest);
        let mut best: Option<u32> = None;
        for &(_, candidate_address, handle) in run {
            // A shared allocation settles equality without touching the
            // ID storage; distinct allocations compare bytes.
            let matches = candidate_address == address || self.ids[handle as usize] == *probe;
            if matches && best.is_none_or(|b| handle < b) {
                best = Some(handle);
            }
        }
        best
    }

    /// Handles whose ID duplicates an earlier entry's ID, in ascending
    /// handle order.
    pub fn duplicates(&self) -> Vec<u32> {
        let mut dups = Vec::new();
        let mut run_start = 0;
        while run_start < self.entries.len() {
            let digest = self.entries[run_start].0;
            let mut run_end = run_start + 1;
            while run_end < self.entries.len() && self.entries[run_end].0 == digest {
                run_end += 1;
            }
            if run_end - run_start > 1 {
                // Digest ties are rare; compare IDs pairwise within the
                // run. Sort order within a run is by address, not handle,
                // so every other entry is a candidate earlier occurrence.
                let run = &self.entries[run_start..run_end];
                for (pos, &(_, _, handle)) in run.iter().enumerate() {
                    let is_dup = run.iter().enumerate().any(|(other_pos, &(_, _, other))| {
                        other_pos != pos
                            && other < handle
                            && self.ids[other as usize] == self.ids[handle as usize]
                    });
                    if is_dup {
                        dups.push(handle);
                    }
                }
            }
            run_start = run_end;
        }
        dups.sort_unstable();
        dups
    }

    /// Drops the given handles from the index. `drop_list` must be sorted.
    pub fn remove_handles(&mut self, drop_list: &[u32]) {
        if drop_list.is_empty() {
            return;
        }
        self.entries
            .retain(|&(_, _, handle)| drop_list.binary_search(&handle).is_err());
    }
}
