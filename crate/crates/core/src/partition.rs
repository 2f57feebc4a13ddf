//! Set partitions of party indices, k-fineness families and the three
//! coarsening relations (discard blocks, merge blocks, discard inside a
//! block).

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::qstate::{default_label, SystemLayout};

/// Disjoint nonempty blocks of party indices. Canonical form: each block
/// sorted, blocks ordered by their smallest element.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    pub fn new(mut blocks: Vec<Vec<usize>>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::MalformedPartition("no blocks".into()));
        }
        let mut seen = BTreeSet::new();
        for b in &mut blocks {
            if b.is_empty() {
                return Err(Error::MalformedPartition("empty block".into()));
            }
            b.sort_unstable();
            for &p in b.iter() {
                if !seen.insert(p) {
                    return Err(Error::MalformedPartition(alloc::format!("party {p} appears twice")));
                }
            }
        }
        blocks.sort_by_key(|b| b[0]);
        Ok(Partition { blocks })
    }

    /// All singletons over `0..n`.
    pub fn discrete(n: usize) -> Self {
        Partition { blocks: (0..n).map(|i| vec![i]).collect() }
    }

    /// One block holding `0..n`.
    pub fn whole(n: usize) -> Self {
        Partition { blocks: vec![(0..n).collect()] }
    }

    /// Partition from a restricted-growth string over `parties`.
    pub fn from_rgs(rgs: &[usize], parties: &[usize]) -> Self {
        let nb = rgs.iter().copied().max().map_or(0, |m| m + 1);
        let mut blocks = vec![Vec::new(); nb];
        for (&b, &p) in rgs.iter().zip(parties) {
            blocks[b].push(p);
        }
        Partition::new(blocks).expect("an RGS always yields a valid partition")
    }

    pub fn from_masks(masks: &[u32]) -> Self {
        Partition::new(masks.iter().map(|&m| crate::qstate::parties_of(m)).collect())
            .expect("masks must be disjoint and nonempty")
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Sorted covered party indices.
    pub fn parties(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.blocks.iter().flatten().copied().collect();
        v.sort_unstable();
        v
    }

    pub fn n_parties(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    /// Largest block size Δ.
    pub fn fineness(&self) -> usize {
        self.blocks.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn block_masks(&self) -> Vec<u32> {
        self.blocks.iter().map(|b| crate::qstate::mask_of(b)).collect()
    }

    pub fn party_mask(&self) -> u32 {
        self.block_masks().into_iter().fold(0, |a, b| a | b)
    }

    /// True when the blocks cover exactly `0..n`.
    pub fn covers_exactly(&self, n: usize) -> bool {
        self.n_parties() == n && self.blocks.iter().flatten().all(|&p| p < n)
    }

    pub fn block_of(&self, party: usize) -> Option<usize> {
        self.blocks.iter().position(|b| b.contains(&party))
    }

    /// Relabel parties through `map` (old index -> new index).
    pub fn map_parties(&self, map: impl Fn(usize) -> usize) -> Partition {
        Partition::new(self.blocks.iter().map(|b| b.iter().map(|&p| map(p)).collect()).collect())
            .expect("map must be injective")
    }

    /// Text form `AB|CD|E` with party labels from `layout`.
    pub fn to_text(&self, layout: &SystemLayout) -> String {
        let mut s = String::new();
        for (i, b) in self.blocks.iter().enumerate() {
            if i > 0 {
                s.push('|');
            }
            for &p in b {
                s.push_str(layout.label(p));
            }
        }
        s
    }

    /// Parse `AB|CD|E`. Labels are matched greedily, longest first.
    pub fn parse(text: &str, layout: &SystemLayout) -> Result<Partition> {
        let mut labels: Vec<(usize, &str)> = (0..layout.len()).map(|i| (i, layout.label(i))).collect();
        labels.sort_by_key(|l| core::cmp::Reverse(l.1.len()));
        let mut blocks = Vec::new();
        for chunk in text.trim().split('|') {
            let mut rest = chunk.trim();
            let mut block = Vec::new();
            while !rest.is_empty() {
                let (idx, label) = labels
                    .iter()
                    .find(|(_, l)| rest.starts_with(l))
                    .ok_or_else(|| Error::MalformedPartition(alloc::format!("unknown label in `{rest}`")))?;
                block.push(*idx);
                rest = &rest[label.len()..];
            }
            blocks.push(block);
        }
        Partition::new(blocks)
    }

    pub fn apply(&self, op: &Coarsening) -> Result<Partition> {
        apply_coarsening(self, op)
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, b) in self.blocks.iter().enumerate() {
            if i > 0 {
                f.write_str("|")?;
            }
            for &p in b {
                f.write_str(&default_label(p))?;
            }
        }
        Ok(())
    }
}

/// Every member of Γ_k^f over one party set, in enumeration order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionFamily {
    pub k: usize,
    pub members: Vec<Partition>,
}

impl PartitionFamily {
    pub fn cardinality(&self) -> usize {
        self.members.len()
    }

    pub fn contains(&self, p: &Partition) -> bool {
        self.members.contains(p)
    }
}

/// Restricted-growth strings with every block of size at most `k`, in
/// lexicographic order. The first string is `0…0 1…1 …` in runs of `k`.
#[derive(Debug, Clone)]
pub struct RgsCursor {
    k: usize,
    rgs: Vec<usize>,
    /// prefix_max[i] = max(rgs[..i]) + 1, i.e. the number of blocks opened before i
    opened: Vec<usize>,
    counts: Vec<usize>,
    started: bool,
    done: bool,
}

impl RgsCursor {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidFineness);
        }
        let mut c = RgsCursor {
            k,
            rgs: vec![0; n],
            opened: vec![0; n + 1],
            counts: vec![0; n + 1],
            started: false,
            done: n == 0,
        };
        c.fill_from(0);
        Ok(c)
    }

    /// Smallest valid completion of positions `from..`.
    fn fill_from(&mut self, from: usize) {
        for j in from..self.rgs.len() {
            let open = self.opened[j];
            let v = (0..=open).find(|&v| self.counts[v] < self.k).expect("a fresh block is always free");
            self.place(j, v);
        }
    }

    fn place(&mut self, j: usize, v: usize) {
        self.rgs[j] = v;
        self.counts[v] += 1;
        self.opened[j + 1] = self.opened[j].max(v + 1);
    }

    /// Move to the next string; false once exhausted.
    pub fn advance(&mut self) -> bool {
        if self.done {
            return false;
        }
        if !self.started {
            self.started = true;
            return true;
        }
        let n = self.rgs.len();
        for i in (1..n).rev() {
            // release positions i.. and try to bump position i
            for j in i..n {
                self.counts[self.rgs[j]] -= 1;
            }
            let cur = self.rgs[i];
            let open = self.opened[i];
            if let Some(v) = (cur + 1..=open).find(|&v| self.counts[v] < self.k) {
                self.place(i, v);
                self.fill_from(i + 1);
                return true;
            }
            // restore i.. so the next (smaller) position sees consistent counts
            for j in i..n {
                self.counts[self.rgs[j]] += 1;
            }
        }
        self.done = true;
        false
    }

    pub fn rgs(&self) -> &[usize] {
        &self.rgs
    }

    pub fn n_blocks(&self) -> usize {
        self.opened[self.rgs.len()]
    }

    /// Block masks of the current string over `parties` (position i ↦
    /// party `parties[i]`), written into `out`.
    pub fn block_masks_into(&self, parties: &[usize], out: &mut Vec<u32>) {
        out.clear();
        out.resize(self.n_blocks(), 0);
        for (&b, &p) in self.rgs.iter().zip(parties) {
            out[b] |= 1 << p;
        }
    }
}

/// Streaming enumeration of Γ_k^f over `parties`.
#[derive(Debug, Clone)]
pub struct KFineness {
    parties: Vec<usize>,
    cursor: RgsCursor,
}

impl KFineness {
    pub fn new(parties: &[usize], k: usize) -> Result<Self> {
        Ok(KFineness { parties: parties.to_vec(), cursor: RgsCursor::new(parties.len(), k)? })
    }
}

impl Iterator for KFineness {
    type Item = Partition;

    fn next(&mut self) -> Option<Partition> {
        self.cursor.advance().then(|| Partition::from_rgs(self.cursor.rgs(), &self.parties))
    }
}

/// Γ_k^f over `parties`: all set partitions whose blocks have at most `k`
/// members, in restricted-growth lexicographic order.
pub fn enumerate_k_fineness(parties: &[usize], k: usize) -> Result<PartitionFamily> {
    if parties.is_empty() {
        return Err(Error::MalformedPartition("empty party set".into()));
    }
    let members = KFineness::new(parties, k)?.collect();
    Ok(PartitionFamily { k, members })
}

/// |Γ_k^f| for `n` parties: T(m) = Σ_{j=1}^{min(k,m)} C(m-1, j-1) T(m-j).
pub fn count_k_fineness(n: usize, k: usize) -> u128 {
    let mut binom = vec![vec![0u128; n + 1]; n + 1];
    for i in 0..=n {
        binom[i][0] = 1;
        for j in 1..=i {
            binom[i][j] = binom[i - 1][j - 1] + if j < i { binom[i - 1][j] } else { 0 };
        }
    }
    let mut t = vec![0u128; n + 1];
    t[0] = 1;
    for m in 1..=n {
        t[m] = (1..=k.min(m)).map(|j| binom[m - 1][j - 1].saturating_mul(t[m - j])).fold(0u128, u128::saturating_add);
    }
    t[n]
}

/// One coarsening step descriptor.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Coarsening {
    /// (a) drop whole blocks, by block index.
    DiscardBlocks(Vec<usize>),
    /// (b) merge each group of block indices into one block.
    MergeBlocks(Vec<Vec<usize>>),
    /// (c) drop some parties from inside one block of two or more parties.
    InnerDiscard { block: usize, parties: Vec<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum CoarseningType {
    Discard,
    Merge,
    InnerDiscard,
}

impl CoarseningType {
    pub fn tag(self) -> char {
        match self {
            CoarseningType::Discard => 'a',
            CoarseningType::Merge => 'b',
            CoarseningType::InnerDiscard => 'c',
        }
    }
}

impl fmt::Display for CoarseningType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.tag())
    }
}

pub fn apply_coarsening(p: &Partition, op: &Coarsening) -> Result<Partition> {
    let nb = p.n_blocks();
    let check = |i: usize| {
        if i < nb {
            Ok(())
        } else {
            Err(Error::IllegalCoarsening(alloc::format!("block index {i} out of range ({nb} blocks)")))
        }
    };
    match op {
        Coarsening::DiscardBlocks(idx) => {
            let drop: BTreeSet<usize> = idx.iter().copied().collect();
            for &i in &drop {
                check(i)?;
            }
            if drop.is_empty() {
                return Err(Error::IllegalCoarsening("nothing to discard".into()));
            }
            if drop.len() == nb {
                return Err(Error::IllegalCoarsening("cannot discard every block".into()));
            }
            let blocks =
                p.blocks.iter().enumerate().filter(|(i, _)| !drop.contains(i)).map(|(_, b)| b.clone()).collect();
            Partition::new(blocks)
        }
        Coarsening::MergeBlocks(groups) => {
            let mut used = BTreeSet::new();
            let mut merged_any = false;
            let mut blocks = Vec::new();
            for g in groups {
                let mut merged = Vec::new();
                for &i in g {
                    check(i)?;
                    if !used.insert(i) {
                        return Err(Error::IllegalCoarsening(alloc::format!("block {i} appears in two groups")));
                    }
                    merged.extend_from_slice(&p.blocks[i]);
                }
                merged_any |= g.len() >= 2;
                if !merged.is_empty() {
                    blocks.push(merged);
                }
            }
            if !merged_any {
                return Err(Error::IllegalCoarsening("no group merges two or more blocks".into()));
            }
            blocks.extend(p.blocks.iter().enumerate().filter(|(i, _)| !used.contains(i)).map(|(_, b)| b.clone()));
            Partition::new(blocks)
        }
        Coarsening::InnerDiscard { block, parties } => {
            check(*block)?;
            let b = &p.blocks[*block];
            if b.len() < 2 {
                return Err(Error::IllegalCoarsening("inner discard needs a block of two or more parties".into()));
            }
            if parties.is_empty() {
                return Err(Error::IllegalCoarsening("nothing to discard".into()));
            }
            if let Some(x) = parties.iter().find(|x| !b.contains(x)) {
                return Err(Error::IllegalCoarsening(alloc::format!("party {x} is not in block {block}")));
            }
            let kept: Vec<usize> = b.iter().copied().filter(|x| !parties.contains(x)).collect();
            if kept.is_empty() {
                return Err(Error::IllegalCoarsening("inner discard would empty the block".into()));
            }
            let mut blocks = p.blocks.clone();
            blocks[*block] = kept;
            Partition::new(blocks)
        }
    }
}

/// Elementary single-step relations under which `q` is obtained from `p`:
/// (a) one block discarded, (b) two blocks merged, (c) one party dropped
/// from a block of two or more. Strict: `p` is never related to itself.
pub fn coarsening_related(p: &Partition, q: &Partition) -> Vec<CoarseningType> {
    let mut out = Vec::new();
    // (a)
    if q.n_blocks() + 1 == p.n_blocks() && q.blocks.iter().all(|b| p.blocks.contains(b)) {
        out.push(CoarseningType::Discard);
    }
    // (b)
    if q.n_blocks() + 1 == p.n_blocks() && q.parties() == p.parties() {
        let fresh: Vec<&Vec<usize>> = q.blocks.iter().filter(|b| !p.blocks.contains(b)).collect();
        if fresh.len() == 1 {
            let parts: Vec<&Vec<usize>> = p.blocks.iter().filter(|b| !q.blocks.contains(b)).collect();
            if parts.len() == 2 {
                let mut union: Vec<usize> = parts.iter().flat_map(|b| b.iter().copied()).collect();
                union.sort_unstable();
                if &union == fresh[0] {
                    out.push(CoarseningType::Merge);
                }
            }
        }
    }
    // (c)
    if q.n_blocks() == p.n_blocks() && q.n_parties() + 1 == p.n_parties() {
        let qp = q.parties();
        let mut changed = 0;
        let ok = p.blocks.iter().all(|b| {
            let kept: Vec<usize> = b.iter().copied().filter(|x| qp.contains(x)).collect();
            if kept.len() != b.len() {
                changed += 1;
                b.len() >= 2 && q.blocks.contains(&kept)
            } else {
                q.blocks.contains(b)
            }
        });
        if ok && changed == 1 {
            out.push(CoarseningType::InnerDiscard);
        }
    }
    out
}

/// Compact text tag list such as `{a,b}`.
pub fn relation_tags(rel: &[CoarseningType]) -> String {
    let mut s = String::from("{");
    for (i, r) in rel.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push(r.tag());
    }
    s.push('}');
    s
}
