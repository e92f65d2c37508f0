//! Binary hash tree over sorted leaves.
//!
//! Interior nodes are `H(0x01 ‖ left ‖ right)`. A node without a right
//! sibling is promoted to the next level unchanged, so the root is a pure
//! function of the leaf sequence.

use super::digest::{hash, hash_parts, Digest, DIGEST_LEN};

const NODE_TAG: u8 = 0x01;

/// Root of the tree with no leaves.
pub fn empty_root() -> Digest {
    hash(&[])
}

pub fn node_hash(left: &Digest, right: &Digest) -> Digest {
    hash_parts(&[&[NODE_TAG], &left.0, &right.0])
}

/// Node count per level, leaves first, ending with the single root.
/// Empty for `n = 0`.
pub fn level_counts(n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    let mut c = n;
    out.push(c);
    while c > 1 {
        c = c.div_ceil(2);
        out.push(c);
    }
    out
}

/// Number of levels a full authentication path spans.
pub fn tree_height(n: u64) -> usize {
    level_counts(n).len().saturating_sub(1)
}

/// Which side of the current node the sibling sits on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Sibling digests from a leaf upwards. Levels where the node is promoted
/// carry no entry.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct AuthPath {
    pub siblings: Vec<(Side, Digest)>,
}

impl AuthPath {
    /// `len(2) ‖ direction bitmap ‖ digests`. Bit k (MSB-first) set means the
    /// k-th sibling is on the left.
    pub fn encode_into(&self, out: &mut Vec<u8>) {
        let count = self.siblings.len();
        out.extend_from_slice(&(count as u16).to_be_bytes());
        let mut bitmap = vec![0u8; count.div_ceil(8)];
        for (k, (side, _)) in self.siblings.iter().enumerate() {
            if *side == Side::Left {
                bitmap[k / 8] |= 0x80 >> (k % 8);
            }
        }
        out.extend_from_slice(&bitmap);
        for (_, d) in &self.siblings {
            out.extend_from_slice(&d.0);
        }
    }

    pub fn encoded_len(&self) -> usize {
        2 + self.siblings.len().div_ceil(8) + self.siblings.len() * DIGEST_LEN
    }

    /// Strict decoding: padding bits in the bitmap must be zero.
    pub fn decode_prefix(buf: &[u8]) -> Option<(Self, &[u8])> {
        if buf.len() < 2 {
            return None;
        }
        let count = u16::from_be_bytes([buf[0], buf[1]]) as usize;
        let rest = &buf[2..];
        let bm_len = count.div_ceil(8);
        if rest.len() < bm_len + count * DIGEST_LEN {
            return None;
        }
        let (bitmap, rest) = rest.split_at(bm_len);
        if !count.is_multiple_of(8) {
            let pad_mask = 0xffu8 >> (count % 8);
            if bitmap[bm_len - 1] & pad_mask != 0 {
                return None;
            }
        }
        let (digests, rest) = rest.split_at(count * DIGEST_LEN);
        let siblings = digests
            .chunks_exact(DIGEST_LEN)
            .enumerate()
            .map(|(k, chunk)| {
                let side = if bitmap[k / 8] & (0x80 >> (k % 8)) != 0 {
                    Side::Left
                } else {
                    Side::Right
                };
                (side, Digest::from_slice(chunk).unwrap())
            })
            .collect();
        Some((AuthPath { siblings }, rest))
    }
}

/// Result of folding a path from a leaf up to some level.
#[derive(Debug)]
pub struct Folded {
    /// Node reached at the top of the folded range.
    pub node: Digest,
    /// Sibling used at each level (None where the node was promoted).
    pub siblings: Vec<Option<Digest>>,
}

/// Recomputes the node at level `levels` above leaf `pos` of an `n`-leaf
/// tree. The path must contain exactly one entry per level in `0..levels`
/// that has a sibling, on the side implied by `pos`.
pub fn fold_path(n: u64, pos: u64, leaf_hash: Digest, path: &AuthPath, levels: usize) -> Option<Folded> {
    let counts = level_counts(n);
    if pos >= n || levels > counts.len().saturating_sub(1) {
        return None;
    }
    let mut idx = pos;
    let mut cur = leaf_hash;
    let mut it = path.siblings.iter();
    let mut used = Vec::with_capacity(levels);
    for count in counts.iter().take(levels) {
        let sib = idx ^ 1;
        if sib < *count {
            let (side, d) = it.next()?;
            let expected = if idx & 1 == 1 { Side::Left } else { Side::Right };
            if *side != expected {
                return None;
            }
            cur = if idx & 1 == 1 { node_hash(d, &cur) } else { node_hash(&cur, d) };
            used.push(Some(*d));
        } else {
            used.push(None);
        }
        idx >>= 1;
    }
    if it.next().is_some() {
        return None;
    }
    Some(Folded { node: cur, siblings: used })
}

/// Reconstructs the leaf position a full path commits to, walking from the
/// root down. Returns None if the path shape does not fit an `n`-leaf tree.
pub fn position_from_path(n: u64, path: &AuthPath) -> Option<u64> {
    let counts = level_counts(n);
    if counts.is_empty() {
        return None;
    }
    let mut idx = 0u64;
    let mut remaining = path.siblings.len();
    for level in (0..counts.len() - 1).rev() {
        let left = idx * 2;
        if left + 1 < counts[level] {
            if remaining == 0 {
                return None;
            }
            remaining -= 1;
            idx = match path.siblings[remaining].0 {
                Side::Left => left + 1,
                Side::Right => left,
            };
        } else {
            idx = left;
        }
    }
    if remaining != 0 {
        return None;
    }
    Some(idx)
}

/// Level of the lowest common ancestor of leaves `a` and `b` (a != b).
pub fn common_ancestor_level(a: u64, b: u64) -> usize {
    (64 - (a ^ b).leading_zeros()) as usize
}

/// Hash tree materialised level by level.
#[derive(Clone, Debug, Default)]
pub struct MerkleTree {
    levels: Vec<Vec<Digest>>,
}

impl MerkleTree {
    pub fn build(leaf_hashes: Vec<Digest>) -> Self {
        let mut levels = Vec::new();
        if leaf_hashes.is_empty() {
            return MerkleTree { levels };
        }
        levels.push(leaf_hashes);
        while levels.last().unwrap().len() > 1 {
            let prev = levels.last().unwrap();
            let next: Vec<Digest> = prev
                .chunks(2)
                .map(|pair| match pair {
                    [l, r] => node_hash(l, r),
                    [single] => *single,
                    _ => unreachable!(),
                })
                .collect();
            levels.push(next);
        }
        MerkleTree { levels }
    }

    /// Same result as `build(leaf_hashes)`, given that the first `unchanged`
    /// leaves match this tree's. Only nodes covering later leaves are hashed.
    pub fn rebuild(&self, leaf_hashes: Vec<Digest>, unchanged: usize) -> Self {
        if leaf_hashes.is_empty() {
            return MerkleTree::default();
        }
        let mut keep = unchanged.min(self.leaf_count() as usize).min(leaf_hashes.len());
        let mut levels = vec![leaf_hashes];
        let mut l = 0;
        while levels[l].len() > 1 {
            let prev = &levels[l];
            // node j is reusable when both children 2j and 2j + 1 are
            keep /= 2;
            let mut next = match self.levels.get(l + 1) {
                Some(old) => old[..keep.min(old.len())].to_vec(),
                None => Vec::new(),
            };
            keep = next.len();
            next.extend(prev[2 * keep..].chunks(2).map(|pair| match pair {
                [a, b] => node_hash(a, b),
                [single] => *single,
                _ => unreachable!(),
            }));
            levels.push(next);
            l += 1;
        }
        MerkleTree { levels }
    }

    pub fn leaf_hashes(&self) -> &[Digest] {
        self.levels.first().map_or(&[], |l| l)
    }

    pub fn leaf_count(&self) -> u64 {
        self.levels.first().map_or(0, |l| l.len() as u64)
    }

    pub fn root(&self) -> Digest {
        match self.levels.last() {
            Some(top) => top[0],
            None => empty_root(),
        }
    }

    pub fn height(&self) -> usize {
        self.levels.len().saturating_sub(1)
    }

    /// Siblings of leaf `pos` for levels `0..levels`.
    pub fn path_below(&self, pos: u64, levels: usize) -> AuthPath {
        let mut siblings = Vec::new();
        let mut idx = pos as usize;
        for level in self.levels.iter().take(levels) {
            let sib = idx ^ 1;
            if sib < level.len() {
                let side = if idx & 1 == 1 { Side::Left } else { Side::Right };
                siblings.push((side, level[sib]));
            }
            idx >>= 1;
        }
        AuthPath { siblings }
    }

    pub fn path(&self, pos: u64) -> AuthPath {
        self.path_below(pos, self.height())
    }
}
